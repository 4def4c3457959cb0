use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::chordal::{LoewnerTrace, Parameterization};
use crate::error::{param_err, Error, Result};
use crate::geometry::{
    default_start_height, estimate_hcap, fill_times, segment_diameter, HullRaster, DEFAULT_RESOLUTION_DIVISOR,
};
use crate::stats::McEstimate;

/// Pixel size used when none is given: trace diameter / 1024.
fn default_px(points: &[Complex64]) -> f64 {
    let d = segment_diameter(points).unwrap_or(0.0);
    if d > 0.0 {
        d / DEFAULT_RESOLUTION_DIVISOR
    } else {
        1e-3
    }
}

/// Re-times a capacity-parameterized trace by the area of its filled hull:
/// the new time of point `k` is the area of the filled hull of the polyline
/// through points `0..=k`, measured on a raster of pixel size `px`.
///
/// The polyline is thickened by `closing` (default
/// [`LoewnerTrace::closing_radius`]; 0 disables): loops the sampled curve
/// closes only up to its vertex spacing are then filled when they close,
/// not when a later segment happens to seal them on the raster.
pub fn reparameterize_by_area(trace: &LoewnerTrace, px: Option<f64>, closing: Option<f64>) -> Result<LoewnerTrace> {
    if trace.parameterization != Parameterization::Capacity {
        return param_err!("area reparameterization expects a capacity-parameterized trace");
    }
    let mut out = trace.clone();
    out.parameterization = Parameterization::Area;
    if trace.is_empty() {
        return Ok(out);
    }
    if trace.kappa < 8.0 {
        return Err(Error::Refused(format!(
            "kappa = {} < 8: the trace is not space-filling and has no area parameterization",
            trace.kappa
        )));
    }
    let px = px.unwrap_or_else(|| default_px(&trace.points));
    if !(px > 0.0) {
        return param_err!("pixel size must be positive");
    }
    let pts = &trace.points;
    let mut raster = HullRaster::frame_for(pts, px, 2);
    let mut draw = vec![usize::MAX; raster.cells.len()];
    raster.draw_segment_with(pts[0], pts[0], |i| draw[i] = 0);
    for k in 1..pts.len() {
        raster.draw_segment_with(pts[k - 1], pts[k], |i| draw[i] = draw[i].min(k));
    }
    let closing = closing.unwrap_or_else(|| trace.closing_radius());
    if closing > 0.0 {
        draw = thicken(&mut raster, &draw, closing / px);
    }
    let fill = fill_times(&raster, &draw);
    let mut per_step = vec![0u64; pts.len()];
    let mut interior = 0u64;
    for (i, &f) in fill.iter().enumerate() {
        if f != usize::MAX {
            per_step[f] += 1;
            if draw[i] == usize::MAX {
                interior += 1;
            }
        }
    }
    let cell = px * px;
    let mut acc = 0u64;
    out.times = per_step
        .iter()
        .map(|&n| {
            acc += n;
            acc as f64 * cell
        })
        .collect();
    out.capacity_times = trace.times.clone();
    out.notes.push(format!("area from filled raster, pixel size {px:e}, closing radius {closing:e}"));
    if interior == 0 {
        out.degenerate = true;
        out.notes.push("filled hull has no interior: area time change is degenerate".into());
    }
    Ok(out)
}

/// Stamps every cell within `radius` pixels of a drawn cell with the
/// earliest draw time in reach and marks it occupied.
fn thicken(raster: &mut HullRaster, draw: &[usize], radius: f64) -> Vec<usize> {
    let (w, h) = (raster.width as isize, raster.height as isize);
    let r = radius.floor() as isize;
    let offsets: Vec<(isize, isize)> = (-r..=r)
        .flat_map(|dr| (-r..=r).map(move |dc| (dc, dr)))
        .filter(|&(dc, dr)| ((dc * dc + dr * dr) as f64) <= radius * radius)
        .collect();
    let mut order: Vec<(usize, usize)> = draw
        .iter()
        .enumerate()
        .filter(|(_, &k)| k != usize::MAX)
        .map(|(i, &k)| (k, i))
        .collect();
    order.sort_unstable();
    let mut stamped = vec![usize::MAX; draw.len()];
    for (k, i) in order {
        let (c, row) = ((i as isize) % w, (i as isize) / w);
        for &(dc, dr) in &offsets {
            let (cc, rr) = (c + dc, row + dr);
            if cc >= 0 && cc < w && rr >= 0 && rr < h {
                let j = (rr * w + cc) as usize;
                if stamped[j] == usize::MAX {
                    stamped[j] = k;
                    raster.cells[j] = true;
                }
            }
        }
    }
    stamped
}

/// Samples the trace at `m + 1` equally spaced times of its own
/// parameterization, interpolating linearly along the segment whose time
/// interval contains each sample time. Where the time does not advance
/// along a run of points (a jump in this parameterization) the sample takes
/// the first point of the run.
pub fn resample_uniform(trace: &LoewnerTrace, m: usize) -> Result<LoewnerTrace> {
    if trace.is_empty() || m == 0 {
        return param_err!("resampling needs a nonempty trace and m > 0");
    }
    let total = *trace.times.last().unwrap();
    let mut out = trace.clone();
    out.times = Vec::with_capacity(m + 1);
    out.points = Vec::with_capacity(m + 1);
    out.capacity_times = Vec::with_capacity(m + 1);
    let mut k = 0;
    for i in 0..=m {
        let s = total * i as f64 / m as f64;
        while k + 1 < trace.len() && trace.times[k] < s {
            k += 1;
        }
        let (point, cap) = if k > 0 && trace.times[k] > trace.times[k - 1] && trace.times[k] >= s {
            let f = ((s - trace.times[k - 1]) / (trace.times[k] - trace.times[k - 1])).clamp(0.0, 1.0);
            (
                trace.points[k - 1] + (trace.points[k] - trace.points[k - 1]) * f,
                trace.capacity_times[k - 1] + (trace.capacity_times[k] - trace.capacity_times[k - 1]) * f,
            )
        } else {
            (trace.points[k], trace.capacity_times[k])
        };
        out.times.push(s);
        out.points.push(point);
        out.capacity_times.push(cap);
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug)]
pub struct CapacityConfig {
    /// Number of sampled prefix times (plus the start).
    pub samples: usize,
    /// Walkers per capacity estimate.
    pub walkers: usize,
    pub seed: u64,
    pub px: Option<f64>,
}

impl Default for CapacityConfig {
    fn default() -> Self {
        Self {
            samples: 16,
            walkers: 10_000,
            seed: 0,
            px: None,
        }
    }
}

/// Capacity of hull prefixes as a function of the trace's own time, and its
/// right inverse.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CapacityFunctions {
    /// Sampled times `r_i`.
    pub r: Vec<f64>,
    /// Raw estimates of `hcap(hull(trace[0, r_i]))`.
    pub estimates: Vec<McEstimate>,
    /// `H(r_i)`: running maximum of the estimates.
    pub h: Vec<f64>,
    /// Some pair of estimates decreased by more than 3 combined stderr.
    pub inconsistent: bool,
}

impl CapacityFunctions {
    /// `S(t) = min { r_i : H(r_i) >= t }`, or `None` above the sampled range.
    pub fn s(&self, t: f64) -> Option<f64> {
        let i = self.h.partition_point(|&h| h < t);
        self.r.get(i).copied()
    }
}

/// Estimates `H(r) = hcap(hull(trace[0, r]))` at sampled `r` by Monte Carlo
/// on rasterized prefixes (one frame, one seed and one start height for all
/// prefixes so the estimates are coupled).
pub fn capacity_functions(trace: &LoewnerTrace, cfg: &CapacityConfig) -> Result<CapacityFunctions> {
    if trace.is_empty() || cfg.samples == 0 {
        return param_err!("capacity_functions needs a nonempty trace and samples > 0");
    }
    let n = trace.len();
    let px = cfg.px.unwrap_or_else(|| default_px(&trace.points));
    let frame = HullRaster::frame_for(&trace.points, px, 4);
    let mut full = frame.clone();
    full.draw_polyline(&trace.points);
    let y0 = default_start_height(&full);
    let mut idx: Vec<usize> = (0..=cfg.samples).map(|i| i * (n - 1) / cfg.samples).collect();
    idx.dedup();
    let mut r = Vec::with_capacity(idx.len());
    let mut estimates = Vec::with_capacity(idx.len());
    for &k in &idx {
        let mut prefix = frame.clone();
        prefix.draw_polyline(&trace.points[..=k]);
        r.push(trace.times[k]);
        estimates.push(estimate_hcap(&prefix, y0, cfg.walkers, cfg.seed)?);
    }
    let mut inconsistent = false;
    for i in 0..estimates.len() {
        for j in i + 1..estimates.len() {
            let (a, b) = (&estimates[i], &estimates[j]);
            if b.value < a.value - 3.0 * a.stderr.hypot(b.stderr) {
                inconsistent = true;
            }
        }
    }
    let mut h = Vec::with_capacity(estimates.len());
    let mut run = f64::NEG_INFINITY;
    for e in &estimates {
        run = run.max(e.value);
        h.push(run);
    }
    Ok(CapacityFunctions {
        r,
        estimates,
        h,
        inconsistent,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::driving::{chordal_sle_driving, DrivingFunction};
    use crate::loewner::compute_trace;
    use crate::noise::BrownianPath;

    fn sle8(n: usize, seed: u64) -> LoewnerTrace {
        let noise = BrownianPath::sample(1.0, 1.0 / n as f64, seed).unwrap();
        compute_trace(&chordal_sle_driving(8.0, &noise).unwrap()).unwrap()
    }

    #[test]
    fn area_times_are_monotone_and_end_at_filled_area() {
        let tr = sle8(1500, 4);
        let px = 2e-3;
        let a = reparameterize_by_area(&tr, Some(px), Some(0.0)).unwrap();
        assert_eq!(a.parameterization, Parameterization::Area);
        assert!(a.times.windows(2).all(|p| p[1] >= p[0]));
        let mut r = HullRaster::frame_for(&tr.points, px, 2);
        r.draw_polyline(&tr.points);
        let filled = crate::geometry::fill_hull(&r);
        assert!((a.times.last().unwrap() - filled.area()).abs() < 1e-12);
        assert!(!a.degenerate);
    }

    #[test]
    fn closing_fills_nearly_closed_loops_when_they_close() {
        // Square loop from (0.5, 0) whose right side stops 0.02 above the real
        // line: with closing it seals against the line at step 3.
        let pts: Vec<Complex64> = [(0.5, 0.0), (0.5, 1.0), (1.5, 1.0), (1.5, 0.02), (0.52, 0.02), (0.52, 0.5)]
            .iter()
            .map(|&(x, y)| Complex64::new(x, y))
            .collect();
        let mut tr = compute_trace(&DrivingFunction::constant(0.0, pts.len() - 1, 0.1)).unwrap();
        tr.points = pts;
        tr.kappa = 8.0;
        let open = reparameterize_by_area(&tr, Some(0.01), Some(0.0)).unwrap();
        let closed = reparameterize_by_area(&tr, Some(0.01), Some(0.03)).unwrap();
        // Without closing the gap to the real line never seals: no interior.
        assert!(open.degenerate);
        assert!(!closed.degenerate);
        assert!(closed.times[3] > 0.9 && closed.times[2] < 0.3, "{:?}", closed.times);
    }

    #[test]
    fn refusals_and_empty() {
        let slit = compute_trace(&DrivingFunction::constant(0.0, 100, 1e-2)).unwrap();
        assert!(matches!(reparameterize_by_area(&slit, None, None), Err(Error::Refused(_))));
        let mut degenerate = slit.clone();
        degenerate.kappa = 8.0;
        assert!(reparameterize_by_area(&degenerate, None, None).unwrap().degenerate);
        let empty = slit.truncated(0);
        assert!(reparameterize_by_area(&empty, None, None).unwrap().is_empty());
    }

    #[test]
    fn resampling_interpolates_within_segments() {
        let mut tr = compute_trace(&DrivingFunction::constant(0.0, 4, 0.25)).unwrap();
        tr.points = [0.0, 1.0, 2.0, 3.0, 4.0].iter().map(|&x| Complex64::new(x, 1.0)).collect();
        tr.times = vec![0.0, 0.1, 0.1, 0.7, 1.0];
        let u = resample_uniform(&tr, 4).unwrap();
        assert_eq!(u.times, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        let xs: Vec<f64> = u.points.iter().map(|z| z.re).collect();
        // 0.25 and 0.5 lie on the segment from point 2 (time 0.1) to point 3 (0.7).
        let expect = [0.0, 2.25, 2.0 + 4.0 / 6.0, 3.0 + 0.05 / 0.3, 4.0];
        for (x, e) in xs.iter().zip(expect) {
            assert!((x - e).abs() < 1e-12, "{xs:?}");
        }
    }

    #[test]
    fn capacity_input_gives_h_equal_2r() {
        let tr = compute_trace(&DrivingFunction::constant(0.0, 400, 1e-3)).unwrap();
        let cfg = CapacityConfig {
            samples: 4,
            walkers: 20_000,
            seed: 1,
            px: None,
        };
        let cf = capacity_functions(&tr, &cfg).unwrap();
        for (r, e) in cf.r.iter().zip(&cf.estimates).skip(1) {
            assert!(e.agrees_with(2.0 * r, 3.0, 10.0 * tr.dt), "{r}: {e:?}");
        }
        assert!(cf.h.windows(2).all(|p| p[1] >= p[0]));
        for (r, h) in cf.r.iter().zip(&cf.h) {
            assert!(cf.s(*h).unwrap() <= *r);
        }
    }

    #[test]
    fn flat_segment_makes_s_jump() {
        let cf = CapacityFunctions {
            r: vec![0.0, 1.0, 2.0, 3.0],
            estimates: vec![],
            h: vec![0.0, 0.5, 0.5, 0.9],
            inconsistent: false,
        };
        assert_eq!(cf.s(0.5), Some(1.0));
        assert_eq!(cf.s(0.6), Some(3.0));
        assert_eq!(cf.s(1.0), None);
    }
}
