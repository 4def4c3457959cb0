//! A numerical laboratory for Schramm-Loewner evolutions.
//!
//! The crate simulates SLE_kappa and SLE_kappa(rho) driving functions,
//! solves chordal and radial Loewner chains, extracts traces by composing
//! exact slit maps, measures hulls (half-plane capacity, harmonic measure,
//! bubbles, inscribed disks) and runs reproducible Monte-Carlo experiments.
//!
//! Module map:
//! - [`noise`]: seeded Brownian increments keyed by `(seed, stream)`.
//! - [`bessel`]: squared/linear/radial Bessel processes and their couplings.
//! - [`driving`]: chordal, force-point and radial driving functions.
//! - [`loewner`]: forward flows, traces and reparameterizations.
//! - [`geometry`]: rasterized hulls and Monte-Carlo potential theory.
//! - [`experiments`]: the experiment harness.
//! - [`io`]: CSV, JSON, binary, PGM and SVG artifacts.
//! - [`cli`]: argument parsing and command dispatch.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::too_many_arguments)]

pub mod bessel;
pub mod cli;
pub mod driving;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod io;
pub mod loewner;
pub mod noise;
pub mod stats;

pub use error::{Error, Result};
pub use num_complex::Complex64;
