//! Chordal and radial Loewner chains driven by sampled driving functions.
//!
//! Every step solves the Loewner equation exactly for the driving value held
//! constant over the step, so the capacity of the hull grows by exactly
//! `2 dt` per chordal step. Traces come from composing the inverse steps
//! backwards ("zipper"): `gamma_k = f_1 o ... o f_k (W_k + i eps)`.

mod chordal;
mod radial;
mod reparam;

pub use chordal::{
    advance_map_step, compute_trace, compute_trace_until, inverse_map_step, solve_forward, sqrt_upper,
    FlowHistory, LoewnerTrace, Parameterization, MAX_TRACE_STEPS, SWALLOW_TOLERANCE,
};
pub use radial::{radial_map_step, solve_radial_forward};
pub use reparam::{
    capacity_functions, reparameterize_by_area, resample_uniform, CapacityConfig, CapacityFunctions,
};
