use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::driving::{DrivingFunction, Geometry};
use crate::error::{param_err, Error, Result};

/// Images with imaginary part below this are swallowed.
pub const SWALLOW_TOLERANCE: f64 = 1e-9;

/// Hard cap on the number of steps of a zipper trace (quadratic cost).
pub const MAX_TRACE_STEPS: usize = 100_000;

/// Evaluation height above the driving point, relative to `sqrt(dt)`.
const LIFT: f64 = 1e-6;

/// Square root in the closed upper half-plane. On the nonnegative real axis
/// the sign is taken from `side` (the sign of the pre-image offset).
#[inline]
pub fn sqrt_upper(z: Complex64, side: f64) -> Complex64 {
    let s = z.sqrt();
    if s.im < 0.0 {
        -s
    } else if s.im == 0.0 && side < 0.0 {
        Complex64::new(-s.re, 0.0)
    } else {
        s
    }
}

/// One exact chordal step: the image of `u` under the conformal map that
/// removes a vertical slit of capacity `2 dt` at `w`. The base point `u = w`
/// maps to the tip convention `w + 2 i sqrt(dt)`.
#[inline]
pub fn advance_map_step(u: Complex64, w: f64, dt: f64) -> Complex64 {
    let d = u - w;
    if d == Complex64::new(0.0, 0.0) {
        return Complex64::new(w, 2.0 * dt.sqrt());
    }
    w + sqrt_upper(d * d + 4.0 * dt, d.re)
}

/// Inverse of [`advance_map_step`]: grows the slit back.
#[inline]
pub fn inverse_map_step(z: Complex64, w: f64, dt: f64) -> Complex64 {
    let d = z - w;
    w + sqrt_upper(d * d - 4.0 * dt, d.re)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parameterization {
    Capacity,
    Area,
}

/// A sampled curve with its time parameterization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoewnerTrace {
    pub kappa: f64,
    pub parameterization: Parameterization,
    pub times: Vec<f64>,
    pub points: Vec<Complex64>,
    pub seed: u64,
    pub dt: f64,
    /// Capacity time of each point (equal to `times` for capacity traces).
    pub capacity_times: Vec<f64>,
    /// The time change collapsed (e.g. a zero-area curve).
    pub degenerate: bool,
    pub notes: Vec<String>,
}

impl LoewnerTrace {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// The first `n` points.
    /// Half the 90th percentile of the vertex spacing: polyline gaps below
    /// twice this are below the sampling resolution and count as closed
    /// when hulls are filled.
    pub fn closing_radius(&self) -> f64 {
        crate::geometry::closing_radius(&self.points)
    }

    pub fn truncated(&self, n: usize) -> Self {
        let n = n.min(self.len());
        Self {
            times: self.times[..n].to_vec(),
            points: self.points[..n].to_vec(),
            capacity_times: self.capacity_times[..n].to_vec(),
            ..self.clone()
        }
    }
}

fn check_chordal(drive: &DrivingFunction) -> Result<()> {
    if drive.geometry != Geometry::Chordal {
        return param_err!("expected a chordal drive");
    }
    if drive.w.len() != drive.times.len() {
        return param_err!("drive has {} values for {} times", drive.w.len(), drive.times.len());
    }
    Ok(())
}

/// `gamma_k` for one index.
fn trace_point(drive: &DrivingFunction, k: usize) -> Complex64 {
    let (t, w) = (&drive.times, &drive.w);
    if k == 0 {
        return Complex64::new(w[0], 0.0);
    }
    let dt_k = t[k] - t[k - 1];
    let mut z = Complex64::new(w[k], LIFT * dt_k.sqrt());
    for j in (1..=k).rev() {
        z = inverse_map_step(z, w[j], t[j] - t[j - 1]);
    }
    z
}

fn empty_trace(drive: &DrivingFunction) -> LoewnerTrace {
    LoewnerTrace {
        kappa: drive.kappa,
        parameterization: Parameterization::Capacity,
        times: Vec::new(),
        points: Vec::new(),
        seed: drive.seed,
        dt: drive.dt,
        capacity_times: Vec::new(),
        degenerate: false,
        notes: Vec::new(),
    }
}

/// Trace of the chain driven by `drive`, one point per grid time. Step `j`
/// uses the right-endpoint driving value `W_j`.
pub fn compute_trace(drive: &DrivingFunction) -> Result<LoewnerTrace> {
    compute_trace_until(drive, |_| false)
}

/// Like [`compute_trace`] but stops at the first point for which `stop`
/// returns true (that point is included).
pub fn compute_trace_until(
    drive: &DrivingFunction,
    stop: impl Fn(Complex64) -> bool + Sync,
) -> Result<LoewnerTrace> {
    check_chordal(drive)?;
    let n = drive.len();
    if n > MAX_TRACE_STEPS + 1 {
        return Err(Error::Refused(format!(
            "trace of {} steps exceeds the cap of {MAX_TRACE_STEPS}",
            n - 1
        )));
    }
    let mut trace = empty_trace(drive);
    const BLOCK: usize = 512;
    let mut start = 0;
    'blocks: while start < n {
        let end = (start + BLOCK).min(n);
        let block: Vec<Complex64> = (start..end)
            .into_par_iter()
            .map(|k| trace_point(drive, k))
            .collect();
        for (k, z) in (start..end).zip(block) {
            trace.points.push(z);
            trace.times.push(drive.times[k]);
            if stop(z) {
                break 'blocks;
            }
        }
        start = end;
    }
    trace.capacity_times = trace.times.clone();
    Ok(trace)
}

/// Forward images of tracked points at every grid time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowHistory {
    pub times: Vec<f64>,
    /// `images[m][k]`: image of point `m` at step `k`; frozen after the
    /// point is swallowed.
    pub images: Vec<Vec<Complex64>>,
    pub swallow_index: Vec<Option<usize>>,
    pub swallow_times: Vec<Option<f64>>,
}

impl FlowHistory {
    /// Images at the final time.
    pub fn final_images(&self) -> Vec<Complex64> {
        self.images.iter().map(|v| *v.last().unwrap()).collect()
    }
}

fn evolve_point(drive: &DrivingFunction, z0: Complex64) -> (Vec<Complex64>, Option<usize>) {
    let (t, w) = (&drive.times, &drive.w);
    let mut out = Vec::with_capacity(t.len());
    let mut z = z0;
    out.push(z);
    let on_line = z0.im < SWALLOW_TOLERANCE;
    if on_line && (z0.re - w[0]) == 0.0 {
        return (vec![z; t.len()], Some(0));
    }
    if !on_line && z0.im < SWALLOW_TOLERANCE {
        return (vec![z; t.len()], Some(0));
    }
    for k in 1..t.len() {
        if on_line {
            // A boundary point is swallowed once the driving reaches it.
            let side = (z.re - w[k - 1]).signum();
            if (z.re - w[k]) * side <= 0.0 {
                out.resize(t.len(), z);
                return (out, Some(k));
            }
        }
        z = advance_map_step(z, w[k], t[k] - t[k - 1]);
        out.push(z);
        if !on_line && z.im < SWALLOW_TOLERANCE {
            out.resize(t.len(), z);
            return (out, Some(k));
        }
    }
    (out, None)
}

/// Evolves each point forward under the chain. Interior points are
/// swallowed when their image drops below [`SWALLOW_TOLERANCE`]; real
/// points when the driving function reaches them.
pub fn solve_forward(drive: &DrivingFunction, points: &[Complex64]) -> Result<FlowHistory> {
    check_chordal(drive)?;
    if drive.is_empty() {
        return param_err!("empty drive");
    }
    if let Some(z) = points.iter().find(|z| !(z.im >= 0.0) || !z.re.is_finite()) {
        return param_err!("point {z} is not in the closed upper half-plane");
    }
    let evolved: Vec<_> = points.par_iter().map(|&z| evolve_point(drive, z)).collect();
    let mut h = FlowHistory {
        times: drive.times.clone(),
        images: Vec::with_capacity(points.len()),
        swallow_index: Vec::with_capacity(points.len()),
        swallow_times: Vec::with_capacity(points.len()),
    };
    for (images, idx) in evolved {
        h.images.push(images);
        h.swallow_times.push(idx.map(|k| drive.times[k]));
        h.swallow_index.push(idx);
    }
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::driving::chordal_sle_driving;
    use crate::noise::BrownianPath;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn tip_convention() {
        assert_eq!(advance_map_step(c(0.3, 0.0), 0.3, 0.25), c(0.3, 1.0));
    }

    #[test]
    fn large_y_expansion() {
        let (y, dt) = (1e3, 0.01);
        let g = advance_map_step(c(0.0, y), 0.0, dt);
        // g = i sqrt(y^2 - 4 dt) = iy - 2 dt / (iy) ... with 2dt/(iy) = -2i dt/y
        let expected = c(0.0, y) + 2.0 * dt / c(0.0, y);
        assert!((g - expected).norm() < 1e-9);
    }

    #[test]
    fn composition_matches_closed_form() {
        let z = c(0.0, 2.0);
        let n = 10_000;
        for (t, tol) in [(0.5, 1e-6), (0.75, 1e-6), (1.0, 1e-5)] {
            let dt = t / n as f64;
            let mut g = z;
            for _ in 0..n {
                g = advance_map_step(g, 0.0, dt);
            }
            let exact = (z * z + 4.0 * t).sqrt();
            // At t = 1 the point reaches the real line, so compare absolutely.
            assert!((g - exact).norm() <= tol * exact.norm().max(z.norm()), "t={t}: {g} vs {exact}");
        }
    }

    #[test]
    fn inverse_undoes_advance() {
        for z in [c(0.4, 0.3), c(-2.0, 0.01), c(0.0, 5.0), c(3.0, 0.0), c(-3.0, 0.0)] {
            let back = inverse_map_step(advance_map_step(z, 0.1, 0.02), 0.1, 0.02);
            assert!((back - z).norm() < 1e-12, "{z} -> {back}");
        }
    }

    #[test]
    fn zero_drive_trace_is_vertical_slit() {
        let drive = DrivingFunction::constant(0.0, 1000, 1e-3);
        let tr = compute_trace(&drive).unwrap();
        assert_eq!(tr.points[0], c(0.0, 0.0));
        for (t, z) in tr.times.iter().zip(&tr.points).skip(1) {
            let exact = 2.0 * t.sqrt();
            assert!(z.re.abs() < 1e-12);
            assert!((z.im - exact).abs() / exact < 1e-9);
        }
    }

    #[test]
    fn constant_drive_is_translated_slit() {
        let drive = DrivingFunction::constant(1.5, 200, 1e-3);
        let tr = compute_trace(&drive).unwrap();
        for z in &tr.points {
            assert!((z.re - 1.5).abs() < 1e-12);
        }
    }

    #[test]
    fn sle8_trace_stays_in_closed_half_plane() {
        let noise = BrownianPath::sample(1.0, 1.0 / 20_000.0, 3).unwrap();
        let drive = chordal_sle_driving(8.0, &noise).unwrap();
        let tr = compute_trace(&drive).unwrap();
        let eps = LIFT * drive.dt.sqrt();
        assert_eq!(tr.points[0], c(0.0, 0.0));
        assert!(tr.points.iter().all(|z| z.im >= -eps && z.re.is_finite()));
    }

    #[test]
    fn early_stop() {
        let drive = DrivingFunction::constant(0.0, 4000, 1e-3);
        let tr = compute_trace_until(&drive, |z| z.im >= 1.0).unwrap();
        let last = *tr.points.last().unwrap();
        assert!(last.im >= 1.0);
        assert!(tr.points[tr.len() - 2].im < 1.0);
        assert_eq!(tr.len(), 251);
    }

    #[test]
    fn oversized_trace_is_refused() {
        let drive = DrivingFunction::constant(0.0, MAX_TRACE_STEPS + 1, 1e-6);
        assert!(matches!(compute_trace(&drive), Err(Error::Refused(_))));
    }

    #[test]
    fn swallow_time_of_i() {
        let dt = 1e-4;
        let drive = DrivingFunction::constant(0.0, 5000, dt);
        let h = solve_forward(&drive, &[c(0.0, 1.0), c(0.0, 2.0)]).unwrap();
        let t = h.swallow_times[0].unwrap();
        assert!((t - 0.25).abs() <= 2.0 * dt, "{t}");
        assert!(h.swallow_times[1].is_none());
        let ims: Vec<f64> = h.images[1].iter().map(|z| z.im).collect();
        assert!(ims.windows(2).all(|p| p[1] < p[0]));
    }

    #[test]
    fn real_points_swallowed_when_driving_crosses() {
        // A smooth drive pushes real points ahead of it; a jump past the
        // image swallows the point.
        let mut w: Vec<f64> = (0..=100).map(|k| k as f64 * 0.001).collect();
        w.extend([2.0, 2.0]);
        let drive = DrivingFunction::from_values(w, 1e-4);
        let h = solve_forward(&drive, &[c(0.5, 0.0), c(-0.5, 0.0)]).unwrap();
        assert_eq!(h.swallow_index[0], Some(101));
        assert_eq!(h.swallow_index[1], None);
        assert!(h.images[0][100].re > 0.5);
    }

    #[test]
    fn high_points_never_swallowed() {
        for seed in 0..10 {
            let t_end = 1.0;
            let noise = BrownianPath::sample(t_end, 1e-3, seed).unwrap();
            let drive = chordal_sle_driving(6.0, &noise).unwrap();
            let y = 10.0 * (2.0 * t_end).sqrt();
            let pts: Vec<Complex64> = (-5..=5).map(|k| c(k as f64, y)).collect();
            let h = solve_forward(&drive, &pts).unwrap();
            assert!(h.swallow_times.iter().all(Option::is_none));
        }
    }

    #[test]
    fn hydrodynamic_normalization() {
        let noise = BrownianPath::sample(1.0, 1e-3, 5).unwrap();
        let drive = chordal_sle_driving(4.0, &noise).unwrap();
        let y = 100.0;
        let h = solve_forward(&drive, &[c(0.0, y)]).unwrap();
        let g = h.final_images()[0];
        let defect = y * (g.im - y);
        assert!((defect + 2.0).abs() <= 0.02, "{defect}");
    }

    proptest! {
        #[test]
        fn step_lowers_imaginary_part(re in -5.0f64..5.0, im in 1e-3f64..5.0, w in -1.0f64..1.0, dt in 1e-5f64..1e-1) {
            let g = advance_map_step(c(re, im), w, dt);
            prop_assert!(g.im < im && g.im > 0.0);
        }
    }
}
