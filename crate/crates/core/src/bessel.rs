//! Bessel, squared-Bessel and radial Bessel processes on shared noise.
//!
//! Linear Bessel paths are produced as square roots of a squared-Bessel
//! scheme that is nondecreasing in both its state and its dimension, so
//! paths of different dimension driven by the same increments are ordered
//! exactly, step by step.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{param_err, Error, Result};
use crate::noise::{BrownianPath, NoiseStream};
use crate::stats::McEstimate;

/// Squared-process level below which a path counts as having hit zero.
pub const ZERO_HIT_TOLERANCE: f64 = 1e-12;
/// Angular distance from 0 and 2pi at which the radial drift is clamped.
pub const RADIAL_THETA_MIN: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BesselKind {
    Linear,
    Radial,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BesselParams {
    pub dimension: f64,
    pub x0: f64,
    pub kind: BesselKind,
}

impl BesselParams {
    pub fn linear(dimension: f64, x0: f64) -> Self {
        Self {
            dimension,
            x0,
            kind: BesselKind::Linear,
        }
    }

    pub fn radial(dimension: f64, x0: f64) -> Self {
        Self {
            dimension,
            x0,
            kind: BesselKind::Radial,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BesselPath {
    pub params: BesselParams,
    pub dt: f64,
    /// Values on the grid `k * dt`, `k = 0..=N`.
    pub values: Vec<f64>,
    /// Linear: first index whose squared value is at most
    /// [`ZERO_HIT_TOLERANCE`], or whose Brownian part `sqrt(Z) + dB` reached
    /// zero within the step (the scheme reflects there). Radial: first index at which the path left
    /// `(theta_min, 2pi - theta_min)`.
    pub zero_hit_index: Option<usize>,
    /// Radial only: the cot drift hit its clamp at least once.
    pub clamped: bool,
}

impl BesselPath {
    pub fn times(&self) -> Vec<f64> {
        (0..self.values.len()).map(|k| k as f64 * self.dt).collect()
    }

    pub fn horizon(&self) -> f64 {
        self.dt * (self.values.len().saturating_sub(1)) as f64
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// `d(kappa, rho) = 1 + 2 (rho + 2) / kappa`; also the radial dimension.
pub fn bessel_dimension(kappa: f64, rho: f64) -> Result<f64> {
    if !(kappa > 0.0) || !kappa.is_finite() {
        return param_err!("kappa must be positive, got {kappa}");
    }
    if !rho.is_finite() {
        return param_err!("rho must be finite, got {rho}");
    }
    Ok(1.0 + 2.0 * (rho + 2.0) / kappa)
}

/// One step of the squared-Bessel scheme
/// `Z' = max(0, max(0, sqrt(Z) + dB)^2 + (d - 1) dt)`.
///
/// Conditional mean is `Z + d dt` away from zero. The map is nondecreasing
/// in `z` and in `d` (every operation is monotone, including under IEEE
/// rounding), which makes the shared-noise ordering exact.
#[inline]
pub fn squared_bessel_step(z: f64, db: f64, dimension: f64, dt: f64) -> f64 {
    let s = (z.sqrt() + db).max(0.0);
    (s * s + (dimension - 1.0) * dt).max(0.0)
}

/// Drift `coef * cot(x / 2)` with `|cot|` capped at `cot(theta_min / 2)`.
/// Returns the drift and whether the cap engaged.
#[inline]
pub(crate) fn clamped_cot_drift(x: f64, coef: f64) -> (f64, bool) {
    let cap = 1.0 / (RADIAL_THETA_MIN / 2.0).tan();
    let c = 1.0 / (x / 2.0).tan();
    if c.abs() > cap || !c.is_finite() {
        (coef * cap.copysign(c), true)
    } else {
        (coef * c, false)
    }
}

/// Euler path of `dX = coef cot(X/2) dt + sigma dB` kept inside
/// `[theta_min, 2pi - theta_min]`. Returns values, first exit index and
/// whether the drift clamp engaged.
pub(crate) fn radial_euler(
    x0: f64,
    coef: f64,
    sigma: f64,
    dt: f64,
    increments: &[f64],
) -> (Vec<f64>, Option<usize>, bool) {
    let lo = RADIAL_THETA_MIN;
    let hi = 2.0 * std::f64::consts::PI - RADIAL_THETA_MIN;
    let mut values = Vec::with_capacity(increments.len() + 1);
    let mut x = x0;
    let mut exit = None;
    let mut clamped = false;
    values.push(x);
    for (k, &db) in increments.iter().enumerate() {
        let (drift, c) = clamped_cot_drift(x, coef);
        clamped |= c;
        x += drift * dt + sigma * db;
        if x <= lo || x >= hi {
            exit.get_or_insert(k + 1);
            x = x.clamp(lo, hi);
        }
        values.push(x);
    }
    (values, exit, clamped)
}

/// Bessel path of dimension `params.dimension` started at `params.x0`,
/// using every increment of `noise`.
pub fn simulate_bessel(params: &BesselParams, noise: &BrownianPath) -> Result<BesselPath> {
    if params.kind != BesselKind::Linear {
        return param_err!("simulate_bessel expects a linear Bessel process");
    }
    if !(params.x0 >= 0.0) || !params.x0.is_finite() {
        return param_err!("x0 must be nonnegative, got {}", params.x0);
    }
    if !params.dimension.is_finite() {
        return param_err!("dimension must be finite");
    }
    let d = params.dimension;
    let dt = noise.dt;
    let mut z = params.x0 * params.x0;
    let mut values = Vec::with_capacity(noise.len() + 1);
    let mut zero_hit_index = (z <= ZERO_HIT_TOLERANCE).then_some(0);
    values.push(z.sqrt());
    for (k, &db) in noise.increments.iter().enumerate() {
        let crossed = z.sqrt() + db <= 0.0;
        z = squared_bessel_step(z, db, d, dt);
        if zero_hit_index.is_none() && (crossed || z <= ZERO_HIT_TOLERANCE) {
            zero_hit_index = Some(k + 1);
        }
        values.push(z.sqrt());
    }
    Ok(BesselPath {
        params: *params,
        dt,
        values,
        zero_hit_index,
        clamped: false,
    })
}

/// As [`simulate_bessel`] but only up to `horizon`; errors if the noise
/// does not reach it.
pub fn simulate_bessel_to(
    params: &BesselParams,
    noise: &BrownianPath,
    horizon: f64,
) -> Result<BesselPath> {
    let n = crate::noise::steps_for(horizon, noise.dt);
    if n > noise.len() {
        return param_err!(
            "noise covers {} steps but horizon {horizon} needs {n}",
            noise.len()
        );
    }
    simulate_bessel(params, &noise.truncated(n))
}

/// Radial Bessel process `dX = ((delta - 1)/4) cot(X/2) dt + dB` on
/// `(0, 2pi)`, Euler scheme with the clamped cot drift.
pub fn simulate_radial_bessel(params: &BesselParams, noise: &BrownianPath) -> Result<BesselPath> {
    if params.kind != BesselKind::Radial {
        return param_err!("simulate_radial_bessel expects a radial Bessel process");
    }
    let two_pi = 2.0 * std::f64::consts::PI;
    if !(params.x0 > 0.0 && params.x0 < two_pi) {
        return param_err!("radial x0 must lie in (0, 2pi), got {}", params.x0);
    }
    let coef = (params.dimension - 1.0) / 4.0;
    let (values, exit, clamped) = radial_euler(params.x0, coef, 1.0, noise.dt, &noise.increments);
    Ok(BesselPath {
        params: *params,
        dt: noise.dt,
        values,
        zero_hit_index: exit,
        clamped,
    })
}

/// Pairwise comparison of two coupled paths with `lower_dim <= upper_dim`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairReport {
    pub lower_dim: f64,
    pub upper_dim: f64,
    /// `max_k (X^lower_k - X^upper_k)^+`; zero under the monotone scheme.
    pub max_order_violation: f64,
    /// `max_k |X^upper_k - X^lower_k|`.
    pub sup_difference: f64,
    /// `(|d' - d| / 2) * int_0^T ds / Z^{d_min}_s` (left Riemann sum).
    pub integral_bound: f64,
    /// `exp(T |1 - d'| / (2 u^2)) ((d' - d)/2) (T / u)` with `u` the minimum
    /// of the minimal-dimension path; absent when `u = 0`.
    pub gronwall_bound: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingReport {
    pub min_dimension: f64,
    /// Pathwise minimum `u` of the minimal-dimension path.
    pub min_path_minimum: f64,
    /// Left-endpoint quadrature of `int_0^T ds / Z^{d_min}_s`.
    pub inverse_integral: f64,
    pub pairs: Vec<PairReport>,
}

impl CouplingReport {
    pub fn total_order_violation(&self) -> f64 {
        self.pairs.iter().map(|p| p.max_order_violation).sum()
    }
}

/// Simulates Bessel processes of every dimension in `dims` from the same
/// start on the same noise and reports their ordering and the
/// continuity-in-dimension bounds.
pub fn couple_bessel(
    dims: &[f64],
    x0: f64,
    noise: &BrownianPath,
) -> Result<(Vec<BesselPath>, CouplingReport)> {
    if dims.is_empty() {
        return param_err!("at least one dimension is required");
    }
    let paths = dims
        .iter()
        .map(|&d| simulate_bessel(&BesselParams::linear(d, x0), noise))
        .collect::<Result<Vec<_>>>()?;
    let (imin, &dmin) = dims
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("nonempty");
    let base = &paths[imin];
    let horizon = noise.horizon();
    let u = base.min_value();
    let inverse_integral: f64 = base.values[..base.values.len() - 1]
        .iter()
        .map(|&z| noise.dt / z)
        .sum();

    let mut pairs = Vec::new();
    for i in 0..dims.len() {
        for j in (i + 1)..dims.len() {
            let (lo, hi) = if dims[i] <= dims[j] { (i, j) } else { (j, i) };
            let (dl, dh) = (dims[lo], dims[hi]);
            let mut violation: f64 = 0.0;
            let mut sup: f64 = 0.0;
            for (a, b) in paths[lo].values.iter().zip(&paths[hi].values) {
                violation = violation.max(a - b);
                sup = sup.max((b - a).abs());
            }
            let gap = dh - dl;
            let gronwall = (u > 0.0).then(|| {
                (horizon * (1.0 - dh).abs() / (2.0 * u * u)).exp() * (gap / 2.0) * (horizon / u)
            });
            pairs.push(PairReport {
                lower_dim: dl,
                upper_dim: dh,
                max_order_violation: violation,
                sup_difference: sup,
                integral_bound: gap / 2.0 * inverse_integral,
                gronwall_bound: gronwall,
            });
        }
    }
    Ok((
        paths,
        CouplingReport {
            min_dimension: dmin,
            min_path_minimum: u,
            inverse_integral,
            pairs,
        },
    ))
}

/// Probability that a Bessel process of dimension `d` started at `x0`
/// reaches `a` before `b`, from the scale function `s(x) = x^(2-d)`
/// (`log x` when `d = 2`).
pub fn bessel_hitting_probability(d: f64, x0: f64, a: f64, b: f64) -> Result<f64> {
    if !(a > 0.0 && a < b && a <= x0 && x0 <= b) {
        return param_err!("need 0 < a <= x0 <= b with a < b, got a={a}, x0={x0}, b={b}");
    }
    if x0 == a {
        return Ok(1.0);
    }
    if x0 == b {
        return Ok(0.0);
    }
    let scale = |x: f64| {
        if (d - 2.0).abs() < 1e-12 {
            x.ln()
        } else {
            x.powf(2.0 - d)
        }
    };
    Ok((scale(b) - scale(x0)) / (scale(b) - scale(a)))
}

/// Outcome of a Monte-Carlo two-sided exit experiment.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ExitEstimate {
    /// Estimated probability of reaching `a` first.
    pub probability: McEstimate,
    /// Paths that reached neither level within the horizon; counted as
    /// not hitting `a`.
    pub undecided: u64,
}

/// Fraction of simulated paths (dimension `d`, start `x0`) that reach `a`
/// before `b`. Path `i` uses noise stream `i` of `seed`.
pub fn estimate_exit_probability(
    d: f64,
    x0: f64,
    a: f64,
    b: f64,
    dt: f64,
    max_horizon: f64,
    samples: usize,
    seed: u64,
) -> Result<ExitEstimate> {
    bessel_hitting_probability(d, x0, a, b)?;
    if samples == 0 {
        return param_err!("samples must be positive");
    }
    let max_steps = crate::noise::steps_for(max_horizon, dt);
    let (a2, b2) = (a * a, b * b);
    let outcomes: Vec<Option<bool>> = (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let mut z = x0 * x0;
            for db in NoiseStream::new(dt, seed, i).take(max_steps) {
                z = squared_bessel_step(z, db, d, dt);
                if z <= a2 {
                    return Some(true);
                }
                if z >= b2 {
                    return Some(false);
                }
            }
            None
        })
        .collect();
    let undecided = outcomes.iter().filter(|o| o.is_none()).count() as u64;
    let hits: Vec<f64> = outcomes
        .iter()
        .map(|o| if *o == Some(true) { 1.0 } else { 0.0 })
        .collect();
    if undecided as usize * 100 > samples {
        return Err(Error::Computation(format!(
            "{undecided} of {samples} paths undecided within horizon {max_horizon}"
        )));
    }
    Ok(ExitEstimate {
        probability: McEstimate::from_samples(&hits, seed),
        undecided,
    })
}
