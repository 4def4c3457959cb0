use num_complex::Complex64;
use rayon::prelude::*;

use super::chordal::{FlowHistory, SWALLOW_TOLERANCE};
use crate::driving::{DrivingFunction, Geometry};
use crate::error::{param_err, Result};

/// One exact radial step with the driving point `w` (on the unit circle)
/// held fixed over `dt`.
///
/// With `u = g / w` the flow `du/dt = u (1 + u) / (1 - u)` conserves
/// `e^{-t} u / (1 + u)^2`, so the step solves a quadratic whose two roots
/// are reciprocal; the root inside the disk is taken (for boundary points,
/// the one that keeps moving away from `w`).
pub fn radial_map_step(g: Complex64, w: Complex64, dt: f64) -> Complex64 {
    let u = g / w;
    let one = Complex64::new(1.0, 0.0);
    if u == Complex64::new(0.0, 0.0) || u == -one {
        return g;
    }
    let c = dt.exp() * u / ((one + u) * (one + u));
    let disc = (one - 4.0 * c).sqrt();
    let base = one - 2.0 * c;
    let (d1, d2) = (base + disc, base - disc);
    let (small, large) = if d1.norm() >= d2.norm() {
        (2.0 * c / d1, 2.0 * c / d2)
    } else {
        (2.0 * c / d2, 2.0 * c / d1)
    };
    let next = if (u.norm() - 1.0).abs() <= 1e-12 {
        // Both roots sit on the circle; continue on the side of u.
        if (small.im >= 0.0) == (u.im >= 0.0) {
            small
        } else {
            large
        }
    } else {
        small
    };
    next * w
}

fn evolve(drive: &DrivingFunction, w: &[Complex64], z0: Complex64) -> (Vec<Complex64>, Option<usize>) {
    let t = &drive.times;
    let n = t.len();
    let on_circle = (z0.norm() - 1.0).abs() <= 1e-12;
    let mut z = z0;
    let mut out = Vec::with_capacity(n);
    out.push(z);
    let hits = |z: Complex64, w: Complex64| (z - w).norm() <= SWALLOW_TOLERANCE;
    if hits(z, w[0]) || (!on_circle && 1.0 - z.norm() < SWALLOW_TOLERANCE) {
        return (vec![z; n], Some(0));
    }
    for k in 1..n {
        if on_circle {
            // Swallowed once the driving point passes over the image.
            let before = (z / w[k - 1]).arg();
            let after = (z / w[k]).arg();
            if hits(z, w[k])
                || (before.abs() < std::f64::consts::FRAC_PI_2
                    && after.abs() < std::f64::consts::FRAC_PI_2
                    && before.signum() != after.signum())
            {
                out.resize(n, z);
                return (out, Some(k));
            }
        }
        z = radial_map_step(z, w[k], t[k] - t[k - 1]);
        out.push(z);
        if !on_circle && 1.0 - z.norm() < SWALLOW_TOLERANCE {
            out.resize(n, z);
            return (out, Some(k));
        }
    }
    (out, None)
}

/// Evolves points of the closed unit disk under the radial chain driven by
/// `exp(i alpha_k)`. Interior points are swallowed when their image comes
/// within [`SWALLOW_TOLERANCE`] of the circle.
pub fn solve_radial_forward(drive: &DrivingFunction, points: &[Complex64]) -> Result<FlowHistory> {
    if drive.geometry != Geometry::Radial {
        return param_err!("expected a radial drive");
    }
    if drive.is_empty() {
        return param_err!("empty drive");
    }
    if let Some(z) = points.iter().find(|z| !(z.norm() <= 1.0 + 1e-12)) {
        return param_err!("point {z} is outside the closed unit disk");
    }
    let w = drive.radial_points();
    let evolved: Vec<_> = points.par_iter().map(|&z| evolve(drive, &w, z)).collect();
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
    use crate::driving::radial_sle_driving;
    use crate::noise::BrownianPath;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// RK4 on the radial equation as an independent oracle.
    fn rk4(z: Complex64, w: Complex64, t: f64, n: usize) -> Complex64 {
        let f = |g: Complex64| g * (w + g) / (w - g);
        let h = t / n as f64;
        let mut g = z;
        for _ in 0..n {
            let k1 = f(g);
            let k2 = f(g + 0.5 * h * k1);
            let k3 = f(g + 0.5 * h * k2);
            let k4 = f(g + h * k3);
            g += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        g
    }

    #[test]
    fn exact_step_matches_ode() {
        let w = Complex64::from_polar(1.0, 0.7);
        for z in [c(0.1, 0.2), c(-0.5, 0.3), c(0.0, -0.6), c(0.3, 0.0)] {
            let exact = radial_map_step(z, w, 0.05);
            let oracle = rk4(z, w, 0.05, 2000);
            assert!((exact - oracle).norm() < 1e-10, "{z}: {exact} vs {oracle}");
        }
    }

    #[test]
    fn origin_is_fixed_and_derivative_grows_like_exp() {
        let dt = 1e-5;
        let n = 50_000;
        let drive = DrivingFunction::radial_from_angles(vec![0.0; n + 1], dt);
        let h = 1e-6;
        let hist = solve_radial_forward(&drive, &[c(0.0, 0.0), c(h, 0.0)]).unwrap();
        let fin = hist.final_images();
        assert_eq!(fin[0], c(0.0, 0.0));
        let deriv = fin[1].norm() / h;
        let t = drive.times[n];
        assert!((deriv / t.exp() - 1.0).abs() <= 1e-3, "{deriv}");
    }

    #[test]
    fn derivative_on_random_drive() {
        let noise = BrownianPath::sample(0.5, 1e-4, 2).unwrap();
        let drive = radial_sle_driving(2.0, 0.0, PI, &noise).unwrap();
        let h = 1e-6;
        let hist = solve_radial_forward(&drive, &[c(h, 0.0)]).unwrap();
        let deriv = hist.final_images()[0].norm() / h;
        let t = *drive.times.last().unwrap();
        assert!((deriv / t.exp() - 1.0).abs() <= 1e-3, "{deriv}");
    }

    #[test]
    fn boundary_stays_on_circle() {
        let drive = DrivingFunction::radial_from_angles(vec![0.0; 1001], 1e-3);
        let pts = [c(-1.0, 0.0), Complex64::from_polar(1.0, 2.0), Complex64::from_polar(1.0, -0.5)];
        let hist = solve_radial_forward(&drive, &pts).unwrap();
        for im in &hist.images {
            for z in im {
                assert!((z.norm() - 1.0).abs() <= 1e-6);
            }
        }
        assert_eq!(hist.final_images()[0], c(-1.0, 0.0));
        // Points move away from the driving point.
        assert!(hist.final_images()[1].arg() > 2.0);
        assert!(hist.final_images()[2].arg() < -0.5);
    }

    #[test]
    fn radial_slit_swallows_points_near_driving() {
        let drive = DrivingFunction::radial_from_angles(vec![0.0; 2001], 1e-3);
        let hist = solve_radial_forward(&drive, &[c(0.9, 0.0), c(0.0, 0.5)]).unwrap();
        assert!(hist.swallow_times[0].is_some());
        assert!(hist.swallow_times[1].is_none());
    }
}
