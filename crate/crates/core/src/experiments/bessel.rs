use rayon::prelude::*;

use super::{fit_or_censor, Cell, ExperimentConfig, ExperimentReport};
use crate::bessel::couple_bessel;
use crate::error::{Error, Result};
use crate::noise::BrownianPath;
use crate::stats::McEstimate;

struct PathOutcome {
    sups: Vec<f64>,
    bounds: Vec<Option<f64>>,
    min_level: f64,
    order_violation: f64,
}

/// Shared-noise coupling of Bessel processes of dimensions `d_list` and
/// `d_star`: sup-distances to the `d_star` path, their ordering along the
/// list and compliance with the pathwise Gronwall bound.
///
/// Parameters: `d_star` (3), `d_list` (2.5, 2.9, 2.99), `x0` (1),
/// `min_level` (0; the bound is checked on paths whose minimal-dimension
/// path stays above it), `slack` (5; in units of sqrt(dt)).
pub fn bessel_continuity_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let d_star = cfg.scalar("d_star", 3.0);
    let d_list = cfg.list("d_list", &[2.5, 2.9, 2.99]);
    let x0 = cfg.scalar("x0", 1.0);
    let min_level = cfg.scalar("min_level", 0.0);
    let slack = cfg.scalar("slack", 5.0) * cfg.dt.sqrt();
    let d_minus = d_list.iter().copied().fold(d_star, f64::min);
    if d_minus <= 1.0 {
        return Err(Error::Refused(format!(
            "smallest dimension {d_minus} <= 1: uniform convergence needs the no-hit event"
        )));
    }
    let mut dims = d_list.clone();
    dims.push(d_star);
    let star = dims.len() - 1;

    let outcomes: Vec<PathOutcome> = (0..cfg.samples as u64)
        .into_par_iter()
        .map(|i| -> Result<PathOutcome> {
            let noise = BrownianPath::sample_stream(cfg.t_end, cfg.dt, cfg.seed, i)?;
            let (paths, rep) = couple_bessel(&dims, x0, &noise)?;
            let mut sups = Vec::with_capacity(d_list.len());
            let mut bounds = Vec::with_capacity(d_list.len());
            for (n, &dn) in d_list.iter().enumerate() {
                let sup = paths[n]
                    .values
                    .iter()
                    .zip(&paths[star].values)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                sups.push(sup);
                let (lo, hi) = if dn <= d_star { (dn, d_star) } else { (d_star, dn) };
                let bound = rep
                    .pairs
                    .iter()
                    .find(|p| p.lower_dim == lo && p.upper_dim == hi)
                    .and_then(|p| p.gronwall_bound);
                bounds.push(bound);
            }
            Ok(PathOutcome {
                sups,
                bounds,
                min_level: rep.min_path_minimum,
                order_violation: rep.total_order_violation(),
            })
        })
        .collect::<Result<_>>()?;

    let mut report = ExperimentReport::new(cfg);
    let mut log_gap = Vec::new();
    let mut log_sup = Vec::new();
    for (n, &dn) in d_list.iter().enumerate() {
        let sups: Vec<f64> = outcomes.iter().map(|o| o.sups[n]).collect();
        let est = McEstimate::from_samples(&sups, cfg.seed);
        let gap = (dn - d_star).abs();
        if gap > 0.0 && est.value > 0.0 {
            log_gap.push(gap.ln());
            log_sup.push(est.value.ln());
        }
        report.cells.push(
            Cell::new(format!("d={dn}"))
                .param("d", dn)
                .param("gap", gap)
                .estimate(est)
                .value("max_sup", sups.iter().copied().fold(0.0, f64::max)),
        );
    }
    report.fits.push(fit_or_censor("log sup-distance vs log |d - d_star|", &log_gap, &log_sup));

    let violations: f64 = outcomes.iter().map(|o| o.order_violation).sum();
    report.check(
        "ordering",
        violations == 0.0,
        format!("total ordering violation {violations:e} over {} paths", outcomes.len()),
    );

    let gaps: Vec<f64> = d_list.iter().map(|d| (d - d_star).abs()).collect();
    if gaps.windows(2).all(|g| g[1] <= g[0]) {
        let bad = outcomes
            .iter()
            .filter(|o| o.sups.windows(2).any(|s| s[1] > s[0]))
            .count();
        report.check(
            "monotone-in-list",
            bad == 0,
            format!("{bad} paths with a sup-distance increasing along the list"),
        );
    } else {
        report.notes.push("d_list does not approach d_star monotonically; ordering along the list not checked".into());
    }

    let eligible: Vec<&PathOutcome> = outcomes.iter().filter(|o| o.min_level > min_level).collect();
    let compliant = eligible
        .iter()
        .filter(|o| {
            o.sups
                .iter()
                .zip(&o.bounds)
                .all(|(s, b)| b.is_some_and(|b| *s <= b + slack))
        })
        .count();
    let rate = if eligible.is_empty() {
        f64::NAN
    } else {
        compliant as f64 / eligible.len() as f64
    };
    report.cells.push(
        Cell::new("gronwall")
            .param("min_level", min_level)
            .value("eligible_paths", eligible.len() as f64)
            .value("compliance_rate", rate),
    );
    report.check(
        "gronwall-compliance",
        !eligible.is_empty() && compliant == eligible.len(),
        format!("{compliant} of {} eligible paths within the bound + {slack:e}", eligible.len()),
    );
    Ok(report)
}
