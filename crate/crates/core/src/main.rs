fn main() {
    std::process::exit(sle_lab::cli::main_with_args(std::env::args_os()));
}
