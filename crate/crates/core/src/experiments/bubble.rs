use num_complex::Complex64;
use rayon::prelude::*;

use super::{fit_or_censor, Cell, ExperimentConfig, ExperimentReport};
use crate::driving::chordal_sle_driving;
use crate::error::{param_err, Result};
use crate::geometry::{bubbles_closed, edt_squared, fill_hull_closed, HullRaster};
use crate::loewner::{compute_trace_until, LoewnerTrace};
use crate::noise::BrownianPath;
use crate::stats::{proportion_stderr, McEstimate};

/// SLE_kappa trace driven by `noise`, stopped at the first point with
/// modulus at least `radius`; `None` if it does not get there.
pub fn trace_to_exit(kappa: f64, noise: &BrownianPath, radius: f64) -> Result<Option<LoewnerTrace>> {
    let drive = chordal_sle_driving(kappa, noise)?;
    let trace = compute_trace_until(&drive, |z| z.norm() >= radius)?;
    Ok(trace
        .points
        .last()
        .is_some_and(|z| z.norm() >= radius)
        .then_some(trace))
}

/// Raster of the trace on a frame that contains the half-disk of `radius`.
fn exit_raster(trace: &LoewnerTrace, radius: f64, px: f64) -> HullRaster {
    let mut pts = trace.points.clone();
    pts.extend([Complex64::new(-radius, 0.0), Complex64::new(radius, radius)]);
    let mut r = HullRaster::frame_for(&pts, px, 4);
    r.draw_polyline(&trace.points);
    r
}

/// Radius of the largest disk inside the occupied set of `filled`, with the
/// real line as part of the boundary (pixel-center convention).
pub fn max_filled_ball(filled: &HullRaster) -> f64 {
    let (w, h) = (filled.width, filled.height);
    let d2 = edt_squared(w, h + 1, |i| i < w || !filled.cells[i - w]);
    let best = d2[w..]
        .iter()
        .zip(&filled.cells)
        .filter(|(_, &occ)| occ)
        .map(|(d, _)| *d)
        .fold(0.0, f64::max);
    best.sqrt() * filled.px
}

fn proportion(hits: usize, n: usize, seed: u64) -> McEstimate {
    let p = if n == 0 { f64::NAN } else { hits as f64 / n as f64 };
    McEstimate {
        value: p,
        stderr: proportion_stderr(p, n),
        n_samples: n as u64,
        seed,
    }
}

/// Chordal SLE_kappa' for kappa' in (4, 8) run until it leaves the unit
/// half-disk; records the largest inscribed radius among the bubbles it
/// has disconnected and estimates `P[radius >= delta]` on a grid.
///
/// Parameters: `radius` (1), `px` (1/512), `deltas`, `threshold_delta`
/// (0.02) and `threshold_p` (0.1) for the pass/fail line, `closing` (gap
/// closing radius; default half the 90th percentile of the vertex spacing,
/// 0 disables). Samples share noise streams across kappa'.
pub fn bubble_disconnection_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let kappas = cfg.kappas(&[7.0]);
    if let Some(k) = kappas.iter().find(|k| !(**k > 4.0 && **k < 8.0)) {
        return param_err!("bubble disconnection needs kappa' in (4, 8), got {k}");
    }
    let radius = cfg.scalar("radius", 1.0);
    let px = cfg.scalar("px", 1.0 / 512.0);
    let deltas = cfg.list("deltas", &[px, 0.005, 0.01, 0.02, 0.05, 0.1]);
    let threshold_delta = cfg.scalar("threshold_delta", 0.02);
    let threshold_p = cfg.scalar("threshold_p", 0.1);
    let closing = cfg.params.get("closing").and_then(|v| v.first().copied());
    let mut report = ExperimentReport::new(cfg);
    for &kappa in &kappas {
        let radii: Vec<Option<f64>> = (0..cfg.samples as u64)
            .into_par_iter()
            .map(|i| -> Result<Option<f64>> {
                let noise = BrownianPath::sample_stream(cfg.t_end, cfg.dt, cfg.seed, i)?;
                Ok(trace_to_exit(kappa, &noise, radius)?.map(|tr| {
                    let c = closing.unwrap_or_else(|| tr.closing_radius());
                    bubbles_closed(&exit_raster(&tr, radius, px), c).max_radius()
                }))
            })
            .collect::<Result<_>>()?;
        let kept: Vec<f64> = radii.iter().flatten().copied().collect();
        let discarded = radii.len() - kept.len();
        let mut best_delta = f64::NAN;
        for &delta in &deltas {
            let hits = kept.iter().filter(|&&r| r >= delta).count();
            let est = proportion(hits, kept.len(), cfg.seed);
            if est.value >= threshold_p && !(best_delta >= delta) {
                best_delta = delta;
            }
            report.cells.push(
                Cell::new(format!("kappa={kappa} delta={delta}"))
                    .param("kappa", kappa)
                    .param("delta", delta)
                    .estimate(est),
            );
        }
        let hits = kept.iter().filter(|&&r| r >= threshold_delta).count();
        let p = proportion(hits, kept.len(), cfg.seed);
        report.cells.push(
            Cell::new(format!("kappa={kappa} summary"))
                .param("kappa", kappa)
                .value("kept", kept.len() as f64)
                .value("discarded", discarded as f64)
                .value("largest_delta_with_p_at_least_threshold", best_delta)
                .value("mean_max_radius", McEstimate::from_samples(&kept, cfg.seed).value),
        );
        report.check(
            &format!("bubble-probability kappa={kappa}"),
            p.value >= threshold_p,
            format!(
                "P[inscribed radius >= {threshold_delta}] = {:.4} ± {:.4} over {} samples ({discarded} discarded), threshold {threshold_p}",
                p.value,
                p.stderr,
                kept.len()
            ),
        );
    }
    report.notes.push(format!(
        "bubbles measured on a raster of pixel size {px}; inscribed radii are accurate to about one pixel; \
         polyline gaps below twice the closing radius ({}) count as closed",
        closing.map_or("auto".to_string(), |c| c.to_string())
    ));
    Ok(report)
}

/// SLE_8 run until it leaves the half-disk of radius `r`: estimates the
/// probability that its filled hull contains no ball of radius `eps r`.
///
/// Parameters: `radius` (1), `px` (1/512), `eps` grid, `closing` (as for
/// the bubble experiment).
pub fn ball_filling_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let kappas = cfg.kappas(&[8.0]);
    if kappas != [8.0] {
        return param_err!("ball filling uses kappa' = 8 only, got {kappas:?}");
    }
    let radius = cfg.scalar("radius", 1.0);
    let px = cfg.scalar("px", 1.0 / 512.0);
    let mut eps = cfg.list("eps", &[1.0, 0.5, 0.3, 0.2, 0.15, 0.1, 0.05]);
    eps.sort_by(|a, b| b.total_cmp(a));
    let closing = cfg.params.get("closing").and_then(|v| v.first().copied());
    let balls: Vec<Option<f64>> = (0..cfg.samples as u64)
        .into_par_iter()
        .map(|i| -> Result<Option<f64>> {
            let noise = BrownianPath::sample_stream(cfg.t_end, cfg.dt, cfg.seed, i)?;
            Ok(trace_to_exit(8.0, &noise, radius)?.map(|tr| {
                let c = closing.unwrap_or_else(|| tr.closing_radius());
                max_filled_ball(&fill_hull_closed(&exit_raster(&tr, radius, px), c))
            }))
        })
        .collect::<Result<_>>()?;
    let kept: Vec<f64> = balls.iter().flatten().copied().collect();
    let discarded = balls.len() - kept.len();
    let mut report = ExperimentReport::new(cfg);
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    let mut probs = Vec::new();
    for &e in &eps {
        let fails = kept.iter().filter(|&&b| b < e * radius).count();
        let est = proportion(fails, kept.len(), cfg.seed);
        probs.push(est);
        let mut cell = Cell::new(format!("eps={e}")).param("eps", e).estimate(est);
        if fails == 0 {
            cell = cell.value("censored", 1.0);
        } else if fails < kept.len() {
            xs.push(1.0 / e);
            ys.push(est.value.ln());
        }
        report.cells.push(cell);
    }
    report.fits.push(fit_or_censor("log P[no eps-ball] vs 1/eps (slope = -a1)", &xs, &ys));
    // Nesting: a sample failing at eps also fails at every larger eps.
    let nested = kept.iter().all(|&b| {
        let fails: Vec<bool> = eps.iter().map(|&e| b < e * radius).collect();
        fails.windows(2).all(|w| w[0] || !w[1])
    });
    let monotone = probs.windows(2).all(|p| p[1].value <= p[0].value);
    report.check(
        "nesting",
        nested && monotone,
        format!("per-sample event nesting {nested}, aggregate monotonicity {monotone}"),
    );
    report.cells.push(
        Cell::new("summary")
            .value("kept", kept.len() as f64)
            .value("discarded", discarded as f64)
            .value("mean_max_ball", McEstimate::from_samples(&kept, cfg.seed).value),
    );
    report.notes.push(
        "chordal SLE_8 stands in for the whole-plane space-filling curve; tail constants may differ".into(),
    );
    Ok(report)
}
