//! Command-line front end.
//!
//! `sle-lab <command> [flags]` with commands `drive`, `trace`, `hcap`,
//! `bubbles` and `experiment`. Every run that gets past argument parsing
//! writes `<out>.manifest.json` next to its artifact, echoing the resolved
//! configuration, the tool version, artifact checksums, the status and the
//! wall-clock time. Exit codes: 0 success, 1 computational failure, 2 usage
//! error.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::driving::{
    chordal_sle_driving, radial_sle_driving, sle_kappa_rho_driving_euler, DrivingFunction, ForcePoint,
    ForcePointConfig,
};
use crate::error::{Error, Result};
use crate::experiments::{run_experiment, ExperimentConfig, EXPERIMENTS};
use crate::geometry::{
    bubbles_closed, closing_radius, default_start_height, estimate_hcap_with, fill_hull, fill_hull_closed, HullRaster, WalkConfig,
};
use crate::io::{read_trace_csv, sha256_hex, to_json_bytes, trace_svg, write_drive_csv, write_trace_csv};
use crate::loewner::{compute_trace, LoewnerTrace};
use crate::noise::BrownianPath;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "sle-lab", version, about = "Numerical laboratory for Schramm-Loewner evolutions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample a driving function.
    Drive {
        #[command(flatten)]
        path: PathFlags,
        #[command(flatten)]
        common: CommonFlags,
    },
    /// Compute an SLE trace by composing slit maps.
    Trace {
        #[command(flatten)]
        path: PathFlags,
        #[command(flatten)]
        common: CommonFlags,
    },
    /// Monte-Carlo half-plane capacity of a hull.
    Hcap {
        #[command(flatten)]
        hull: HullFlags,
        #[command(flatten)]
        path: PathFlags,
        #[command(flatten)]
        common: CommonFlags,
        /// Number of walkers.
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        /// Starting height of the walkers (default: 10 x hull diameter).
        #[arg(long)]
        y0: Option<f64>,
    },
    /// Bubbles (bounded complementary components) of a trace and their inscribed disks.
    Bubbles {
        #[command(flatten)]
        hull: HullFlags,
        /// Gap-closing radius (default: half the 90th percentile of the
        /// trace's vertex spacing; 0 for fixtures).
        #[arg(long)]
        closing: Option<f64>,
        #[command(flatten)]
        path: PathFlags,
        #[command(flatten)]
        common: CommonFlags,
    },
    /// Run a named experiment.
    Experiment {
        /// Experiment name.
        #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(EXPERIMENTS))]
        experiment: Option<String>,
        /// JSON experiment configuration; flags override its fields.
        #[arg(long)]
        config: Option<PathBuf>,
        /// kappa values (repeatable).
        #[arg(long, allow_negative_numbers = true)]
        kappa: Vec<f64>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long = "T")]
        t_end: Option<f64>,
        /// Experiment parameter as `key=v1,v2,...` (repeatable).
        #[arg(long = "param", value_name = "KEY=VALUES")]
        params: Vec<String>,
        #[command(flatten)]
        common: CommonFlags,
    },
}

#[derive(Args, Debug, Clone)]
struct CommonFlags {
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (0: all cores).
    #[arg(long, env = "SLE_LAB_THREADS")]
    threads: Option<usize>,
    /// Output path (a directory for experiments).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Args, Debug, Clone)]
struct PathFlags {
    #[arg(long, allow_negative_numbers = true)]
    kappa: Option<f64>,
    /// Force-point weight (repeatable; pairs with --at).
    #[arg(long, allow_negative_numbers = true)]
    rho: Vec<f64>,
    /// Force-point position on the real line; `-0` is 0^-, `0` is 0^+.
    #[arg(long, allow_negative_numbers = true)]
    at: Vec<f64>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long = "T")]
    t_end: Option<f64>,
    /// Radial driving function (drive only).
    #[arg(long)]
    radial: bool,
    /// Radial: initial angle between W and the force point.
    #[arg(long)]
    theta0: Option<f64>,
}

#[derive(Args, Debug, Clone)]
struct HullFlags {
    /// Bundled hull: slit (height --size) or half-disk (radius --size).
    #[arg(long, value_enum, conflicts_with = "trace_file")]
    fixture: Option<Fixture>,
    #[arg(long, requires = "fixture")]
    size: Option<f64>,
    /// Trace CSV to measure instead of simulating one.
    #[arg(long = "trace-file")]
    trace_file: Option<PathBuf>,
    /// Raster pixel size (default: hull diameter / 1024).
    #[arg(long)]
    px: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    Svg,
    Pgm,
}

impl Format {
    fn ext(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
            Format::Svg => "svg",
            Format::Pgm => "pgm",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Fixture {
    Slit,
    HalfDisk,
}

/// Resolved driving-function parameters.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PathSpec {
    pub kappa: f64,
    pub force_points: Vec<ForcePoint>,
    pub steps: usize,
    pub dt: f64,
    #[serde(rename = "T")]
    pub t_end: f64,
    pub radial: bool,
    pub theta0: Option<f64>,
}

/// Where a measured hull comes from.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum HullSource {
    Fixture { fixture: Fixture, size: f64 },
    TraceFile { path: PathBuf },
    Simulated(PathSpec),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "command", rename_all = "lowercase")]
pub enum Job {
    Drive(PathSpec),
    Trace(PathSpec),
    Hcap {
        source: HullSource,
        walkers: usize,
        y0: Option<f64>,
        px: Option<f64>,
    },
    Bubbles {
        source: HullSource,
        px: Option<f64>,
        closing: Option<f64>,
    },
    Experiment(ExperimentConfig),
}

/// A validated command line.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub job: Job,
    pub seed: u64,
    pub out: PathBuf,
    pub threads: usize,
    pub format: Format,
}

/// Outcome of argument parsing that does not lead to a run.
#[derive(Debug)]
pub enum ParseOutcome {
    /// Help or version text was requested; print it and exit 0.
    Info(String),
    /// Usage error; exit 2.
    Usage(String),
}

fn usage<T>(msg: impl Into<String>) -> std::result::Result<T, ParseOutcome> {
    Err(ParseOutcome::Usage(msg.into()))
}

/// Parses and validates `argv` (including the program name).
pub fn parse_args<I, T>(argv: I) -> std::result::Result<RunConfig, ParseOutcome>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    if argv.len() <= 1 {
        return Err(ParseOutcome::Info(Cli::command().render_help().to_string()));
    }
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => Err(ParseOutcome::Info(e.to_string())),
                ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => Err(ParseOutcome::Info(e.to_string())),
                _ => usage(e.to_string()),
            };
        }
    };
    match cli.command {
        Command::Drive { path, common } => {
            let spec = resolve_path(&path, true)?;
            let format = pick_format(common.format, Format::Csv, &[Format::Csv, Format::Json])?;
            finish(Job::Drive(spec), common, format, "drive")
        }
        Command::Trace { path, common } => {
            let spec = resolve_path(&path, false)?;
            let format = pick_format(
                common.format,
                Format::Csv,
                &[Format::Csv, Format::Json, Format::Svg, Format::Pgm],
            )?;
            finish(Job::Trace(spec), common, format, "trace")
        }
        Command::Hcap {
            hull,
            path,
            common,
            samples,
            y0,
        } => {
            if samples == 0 {
                return usage("--samples must be at least 1");
            }
            if let Some(y) = y0 {
                if !(y > 0.0) {
                    return usage(format!("--y0 must be positive, got {y}"));
                }
            }
            let source = resolve_hull(&hull, &path)?;
            let format = pick_format(common.format, Format::Json, &[Format::Json])?;
            let px = check_px(hull.px)?;
            finish(
                Job::Hcap {
                    source,
                    walkers: samples,
                    y0,
                    px,
                },
                common,
                format,
                "hcap",
            )
        }
        Command::Bubbles {
            hull,
            closing,
            path,
            common,
        } => {
            let source = resolve_hull(&hull, &path)?;
            let format = pick_format(common.format, Format::Json, &[Format::Json, Format::Pgm])?;
            let px = check_px(hull.px)?;
            if let Some(c) = closing {
                if !(c >= 0.0 && c.is_finite()) {
                    return usage(format!("--closing must be nonnegative, got {c}"));
                }
            }
            finish(Job::Bubbles { source, px, closing }, common, format, "bubbles")
        }
        Command::Experiment {
            experiment,
            config,
            kappa,
            samples,
            dt,
            t_end,
            params,
            common,
        } => {
            let mut cfg = match &config {
                Some(p) => {
                    let text = std::fs::read_to_string(p)
                        .or_else(|e| usage(format!("cannot read config {}: {e}", p.display())))?;
                    serde_json::from_str::<ExperimentConfig>(&text)
                        .or_else(|e| usage(format!("invalid config {}: {e}", p.display())))?
                }
                None => ExperimentConfig::new(""),
            };
            match (experiment, cfg.name.is_empty()) {
                (Some(name), _) => cfg.name = name,
                (None, true) => return usage("experiment needs --experiment <name> or a config with a name"),
                (None, false) => {}
            }
            if !kappa.is_empty() {
                cfg.kappa = kappa;
            }
            if let Some(n) = samples {
                cfg.samples = n;
            }
            if let Some(v) = dt {
                cfg.dt = v;
            }
            if let Some(v) = t_end {
                cfg.t_end = v;
            }
            if let Some(s) = common.seed {
                cfg.seed = s;
            }
            for p in &params {
                let (k, v) = parse_param(p)?;
                cfg.params.insert(k, v);
            }
            cfg.validate().or_else(|e| usage(e.to_string()))?;
            let format = pick_format(common.format, Format::Json, &[Format::Json])?;
            let name = cfg.name.clone();
            let mut rc = finish(Job::Experiment(cfg), common, format, &name)?;
            if let Job::Experiment(c) = &mut rc.job {
                c.threads = rc.threads;
                c.out_dir = Some(rc.out.clone());
            }
            Ok(rc)
        }
    }
}

fn finish(
    job: Job,
    common: CommonFlags,
    format: Format,
    stem: &str,
) -> std::result::Result<RunConfig, ParseOutcome> {
    let out = match (common.out, &job) {
        (Some(p), _) => p,
        (None, Job::Experiment(_)) => PathBuf::from(stem),
        (None, _) => PathBuf::from(format!("{stem}.{}", format.ext())),
    };
    Ok(RunConfig {
        seed: common.seed.unwrap_or(0),
        threads: common.threads.unwrap_or(0),
        out,
        format,
        job,
    })
}

fn pick_format(
    requested: Option<Format>,
    default: Format,
    allowed: &[Format],
) -> std::result::Result<Format, ParseOutcome> {
    let f = requested.unwrap_or(default);
    if !allowed.contains(&f) {
        return usage(format!(
            "format {} is not available here; choose one of {}",
            f.ext(),
            allowed.iter().map(|f| f.ext()).collect::<Vec<_>>().join(", ")
        ));
    }
    Ok(f)
}

fn check_px(px: Option<f64>) -> std::result::Result<Option<f64>, ParseOutcome> {
    match px {
        Some(p) if !(p > 0.0 && p.is_finite()) => usage(format!("--px must be positive, got {p}")),
        other => Ok(other),
    }
}

fn parse_param(s: &str) -> std::result::Result<(String, Vec<f64>), ParseOutcome> {
    let Some((k, v)) = s.split_once('=') else {
        return usage(format!("--param expects key=v1,v2,..., got {s:?}"));
    };
    let vals = v
        .split(',')
        .map(|x| x.trim().parse::<f64>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .or_else(|e| usage(format!("--param {k}: {e}")))?;
    Ok((k.trim().to_string(), vals))
}

fn path_given(p: &PathFlags) -> bool {
    p.kappa.is_some()
        || !p.rho.is_empty()
        || !p.at.is_empty()
        || p.steps.is_some()
        || p.dt.is_some()
        || p.t_end.is_some()
        || p.radial
        || p.theta0.is_some()
}

fn resolve_hull(h: &HullFlags, p: &PathFlags) -> std::result::Result<HullSource, ParseOutcome> {
    let external = h.fixture.is_some() || h.trace_file.is_some();
    if external && path_given(p) {
        return usage("--fixture/--trace-file conflict with simulation flags");
    }
    if let Some(fixture) = h.fixture {
        let size = h.size.unwrap_or(1.0);
        if !(size > 0.0 && size.is_finite()) {
            return usage(format!("--size must be positive, got {size}"));
        }
        return Ok(HullSource::Fixture { fixture, size });
    }
    if let Some(path) = &h.trace_file {
        return Ok(HullSource::TraceFile { path: path.clone() });
    }
    Ok(HullSource::Simulated(resolve_path(p, false)?))
}

fn resolve_path(p: &PathFlags, allow_radial: bool) -> std::result::Result<PathSpec, ParseOutcome> {
    let Some(kappa) = p.kappa else {
        return usage("missing required parameter --kappa");
    };
    if !(kappa >= 0.0 && kappa.is_finite()) {
        return usage(format!("--kappa must be finite and nonnegative, got {kappa}"));
    }
    if p.radial && !allow_radial {
        return usage("--radial is only available for drive");
    }
    if p.theta0.is_some() && !p.radial {
        return usage("--theta0 requires --radial");
    }
    let (steps, dt, t_end) = match (p.steps, p.dt, p.t_end) {
        (Some(_), Some(_), Some(_)) => return usage("--steps, --dt and --T conflict; give at most two"),
        (Some(n), Some(dt), None) => (n, dt, n as f64 * dt),
        (Some(n), None, t) => {
            let t = t.unwrap_or(1.0);
            (n, t / n.max(1) as f64, t)
        }
        (None, dt, t) => {
            let t = t.unwrap_or(1.0);
            let dt = dt.unwrap_or(1e-3);
            if !(dt > 0.0 && t > 0.0) {
                return usage(format!("need dt > 0 and T > 0, got dt={dt} T={t}"));
            }
            let n = (t / dt).round() as usize;
            (n, dt, n as f64 * dt)
        }
    };
    if steps == 0 || !(dt > 0.0 && dt.is_finite()) {
        return usage(format!("need steps >= 1 and dt > 0, got steps={steps} dt={dt}"));
    }
    if p.radial {
        if p.rho.len() > 1 || !p.at.is_empty() {
            return usage("radial drives take a single --rho and no --at");
        }
        if kappa == 0.0 && !p.rho.is_empty() {
            return usage("--rho needs kappa > 0");
        }
        let rho = p.rho.first().copied().unwrap_or(0.0);
        return Ok(PathSpec {
            kappa,
            force_points: vec![ForcePoint::right(0.0, rho)],
            steps,
            dt,
            t_end,
            radial: true,
            theta0: Some(p.theta0.unwrap_or(std::f64::consts::PI)),
        });
    }
    if !p.at.is_empty() && p.at.len() != p.rho.len() {
        return usage(format!("{} --rho values but {} --at positions", p.rho.len(), p.at.len()));
    }
    if !p.rho.is_empty() && kappa == 0.0 {
        return usage("--rho needs kappa > 0");
    }
    let force_points: Vec<ForcePoint> = p
        .rho
        .iter()
        .enumerate()
        .map(|(j, &rho)| {
            let at = p.at.get(j).copied().unwrap_or(0.0);
            if at.is_sign_negative() {
                ForcePoint::left(-at, rho)
            } else {
                ForcePoint::right(at, rho)
            }
        })
        .collect();
    ForcePointConfig::new(force_points.clone()).or_else(|e| usage(e.to_string()))?;
    Ok(PathSpec {
        kappa,
        force_points,
        steps,
        dt,
        t_end,
        radial: false,
        theta0: None,
    })
}

fn build_drive(spec: &PathSpec, seed: u64) -> Result<DrivingFunction> {
    let noise = BrownianPath::sample(spec.t_end, spec.dt, seed)?.truncated(spec.steps);
    if spec.radial {
        let rho = spec.force_points.first().map_or(0.0, |f| f.weight);
        return radial_sle_driving(spec.kappa, rho, spec.theta0.unwrap_or(std::f64::consts::PI), &noise);
    }
    if spec.force_points.is_empty() {
        return chordal_sle_driving(spec.kappa, &noise);
    }
    sle_kappa_rho_driving_euler(spec.kappa, &ForcePointConfig::new(spec.force_points.clone())?, &noise)
}

fn load_trace_points(path: &Path) -> Result<Vec<num_complex::Complex64>> {
    let text = std::fs::read_to_string(path)?;
    Ok(read_trace_csv(&text)?.into_iter().map(|(_, z)| z).collect())
}

/// A measured hull: its raster, the exact capacity when known, and the
/// closing radius suited to its sampling.
struct Hull {
    raster: HullRaster,
    reference: Option<f64>,
    closing: f64,
}

fn hull_raster(source: &HullSource, px: Option<f64>, seed: u64) -> Result<Hull> {
    let from_points = |points: Vec<num_complex::Complex64>, reference| Hull {
        raster: polyline(&points, px),
        reference,
        closing: closing_radius(&points),
    };
    match source {
        HullSource::Fixture { fixture, size } => {
            let px = px.unwrap_or(size / 1024.0);
            let (raster, reference) = match fixture {
                Fixture::Slit => (HullRaster::slit(*size, px), size * size / 2.0),
                Fixture::HalfDisk => (HullRaster::half_disk(*size, px), size * size),
            };
            Ok(Hull {
                raster,
                reference: Some(reference),
                closing: 0.0,
            })
        }
        HullSource::TraceFile { path } => Ok(from_points(load_trace_points(path)?, None)),
        HullSource::Simulated(spec) => {
            let trace = compute_trace(&build_drive(spec, seed)?)?;
            Ok(from_points(trace.points, Some(2.0 * spec.t_end)))
        }
    }
}

fn polyline(pts: &[num_complex::Complex64], px: Option<f64>) -> HullRaster {
    match px {
        Some(px) => HullRaster::from_polyline(pts, px),
        None => HullRaster::from_polyline_default(pts),
    }
}

/// Artifacts of a run: file path and contents.
type Artifacts = Vec<(PathBuf, Vec<u8>)>;

/// What a finished job reports besides its artifacts.
struct JobResult {
    artifacts: Artifacts,
    /// The job ran but its checks failed (exit 1).
    failed: Option<String>,
}

fn execute(cfg: &RunConfig) -> Result<JobResult> {
    let ok = |artifacts| Ok(JobResult { artifacts, failed: None });
    match &cfg.job {
        Job::Drive(spec) => {
            let drive = build_drive(spec, cfg.seed)?;
            let bytes = match cfg.format {
                Format::Json => to_json_bytes(&drive)?,
                _ => {
                    let mut buf = Vec::new();
                    write_drive_csv(&drive, &mut buf)?;
                    buf
                }
            };
            ok(vec![(cfg.out.clone(), bytes)])
        }
        Job::Trace(spec) => {
            let trace = compute_trace(&build_drive(spec, cfg.seed)?)?;
            ok(vec![(cfg.out.clone(), trace_bytes(&trace, cfg.format)?)])
        }
        Job::Hcap {
            source,
            walkers,
            y0,
            px,
        } => {
            let Hull { raster, reference, .. } = hull_raster(source, *px, cfg.seed)?;
            let y0 = y0.unwrap_or_else(|| default_start_height(&raster));
            let (est, lost) = estimate_hcap_with(&raster, y0, *walkers, cfg.seed, WalkConfig::default())?;
            let body = json!({
                "hcap": est.value,
                "stderr": est.stderr,
                "walkers": walkers,
                "lost": lost,
                "seed": cfg.seed,
                "y0": y0,
                "px": raster.px,
                "reference": reference,
            });
            ok(vec![(cfg.out.clone(), to_json_bytes(&body)?)])
        }
        Job::Bubbles { source, px, closing } => {
            let hull = hull_raster(source, *px, cfg.seed)?;
            let closing = closing.unwrap_or(hull.closing);
            let bytes = match cfg.format {
                Format::Pgm => fill_hull_closed(&hull.raster, closing).to_pgm(),
                _ => to_json_bytes(&json!({
                    "closing": closing,
                    "bubbles": bubbles_closed(&hull.raster, closing),
                }))?,
            };
            ok(vec![(cfg.out.clone(), bytes)])
        }
        Job::Experiment(ecfg) => {
            let report = run_experiment(ecfg)?;
            let name = &ecfg.name;
            let artifacts = vec![
                (cfg.out.join(format!("{name}.json")), report.to_json()?),
                (cfg.out.join(format!("{name}.md")), report.to_markdown().into_bytes()),
            ];
            let mut problems: Vec<String> = report
                .checks
                .iter()
                .filter(|c| !c.passed)
                .map(|c| format!("check {} failed", c.name))
                .collect();
            problems.extend(report.fits.iter().filter(|f| f.censored).map(|f| format!("fit {} censored", f.label)));
            Ok(JobResult {
                artifacts,
                failed: (!problems.is_empty()).then(|| problems.join("; ")),
            })
        }
    }
}

fn trace_bytes(trace: &LoewnerTrace, format: Format) -> Result<Vec<u8>> {
    Ok(match format {
        Format::Json => to_json_bytes(trace)?,
        Format::Svg => trace_svg(&trace.points).into_bytes(),
        Format::Pgm => fill_hull(&HullRaster::from_polyline_default(&trace.points)).to_pgm(),
        Format::Csv => {
            let mut buf = Vec::new();
            write_trace_csv(trace, &mut buf)?;
            buf
        }
    })
}

/// Path of the manifest that accompanies `out`.
pub fn manifest_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

fn write_artifacts(artifacts: &Artifacts) -> Result<Vec<serde_json::Value>> {
    let mut listed = Vec::new();
    for (path, bytes) in artifacts {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(path, bytes)?;
        listed.push(json!({
            "path": path,
            "bytes": bytes.len(),
            "sha256": sha256_hex(bytes),
        }));
    }
    Ok(listed)
}

/// Runs a validated configuration; returns the exit code. Messages go to
/// stderr.
pub fn run(cfg: &RunConfig) -> i32 {
    let start = Instant::now();
    let outcome = if cfg.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.threads)
            .build()
            .map_err(|e| Error::Computation(format!("thread pool: {e}")))
            .and_then(|pool| pool.install(|| execute(cfg)))
    } else {
        execute(cfg)
    };
    let (code, status, message, artifacts) = match outcome.and_then(|r| Ok((write_artifacts(&r.artifacts)?, r.failed))) {
        Ok((listed, None)) => (EXIT_OK, "ok", None, listed),
        Ok((listed, Some(msg))) => (EXIT_FAILURE, "failed", Some(msg), listed),
        Err(e @ Error::Parameter(_)) => (EXIT_USAGE, "usage-error", Some(e.to_string()), vec![]),
        Err(e) => (EXIT_FAILURE, "failed", Some(e.to_string()), vec![]),
    };
    if let Some(m) = &message {
        eprintln!("sle-lab: {m}");
    }
    let manifest = json!({
        "tool": "sle-lab",
        "version": env!("CARGO_PKG_VERSION"),
        "config": cfg,
        "artifacts": artifacts,
        "status": status,
        "exit_code": code,
        "message": message,
        "wall_clock_seconds": start.elapsed().as_secs_f64(),
    });
    let mpath = manifest_path(&cfg.out);
    let written = to_json_bytes(&manifest).and_then(|b| Ok(std::fs::write(&mpath, b)?));
    if let Err(e) = written {
        eprintln!("sle-lab: cannot write manifest {}: {e}", mpath.display());
        return if code == EXIT_OK { EXIT_FAILURE } else { code };
    }
    code
}

/// Parses `argv` and runs it; the process exit code.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match parse_args(argv) {
        Ok(cfg) => run(&cfg),
        Err(ParseOutcome::Info(text)) => {
            println!("{text}");
            EXIT_OK
        }
        Err(ParseOutcome::Usage(msg)) => {
            eprintln!("{msg}");
            EXIT_USAGE
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &str) -> std::result::Result<RunConfig, ParseOutcome> {
        parse_args(std::iter::once("sle-lab").chain(args.split_whitespace()))
    }

    #[test]
    fn trace_echo() {
        let rc = parse("trace --kappa 8 --steps 20000 --seed 42 --out t.csv").unwrap();
        assert_eq!(rc.seed, 42);
        assert_eq!(rc.out, PathBuf::from("t.csv"));
        let Job::Trace(spec) = rc.job else { panic!() };
        assert_eq!((spec.kappa, spec.steps), (8.0, 20000));
        assert_eq!(spec.dt, 1.0 / 20000.0);
    }

    #[test]
    fn usage_errors() {
        for bad in [
            "trace --kappa -1",
            "trace --steps 10",
            "trace --kappa 2 --steps 10 --dt 0.1 --T 1",
            "drive --kappa 6 --rho 1 --rho 2 --at 1",
            "hcap --fixture slit --kappa 2",
            "experiment --experiment modulus --param bogus=1",
            "experiment",
            "trace --kappa 2 --radial",
            "bubbles --kappa 6 --format csv",
            "nonsense",
        ] {
            assert!(matches!(parse(bad), Err(ParseOutcome::Usage(_))), "{bad}");
        }
    }

    #[test]
    fn empty_argv_is_help() {
        assert!(matches!(parse(""), Err(ParseOutcome::Info(_))));
        assert_eq!(main_with_args(["sle-lab"]), EXIT_OK);
    }

    #[test]
    fn force_point_sides() {
        let rc = parse("drive --kappa 6 --rho 1 --at -0 --rho 2 --at 0.5").unwrap();
        let Job::Drive(spec) = rc.job else { panic!() };
        assert_eq!(spec.force_points, vec![ForcePoint::left(0.0, 1.0), ForcePoint::right(0.5, 2.0)]);
    }
}
