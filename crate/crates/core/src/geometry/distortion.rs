//! Empirical checks of the Koebe-type distortion bounds on sampled
//! conformal maps.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative slack allowed on every bound.
const SLACK: f64 = 0.05;

/// Probe radii, as fractions of the domain boundary distance, used for the
/// image-ball bound.
const BALL_FRACTIONS: [f64; 3] = [0.25, 0.5, 0.75];
const BALL_DIRECTIONS: usize = 8;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DistortionSample {
    pub z: Complex64,
    pub fz: Complex64,
    /// Finite-difference derivative.
    pub deriv: Complex64,
    pub dist_domain: f64,
    pub dist_range: f64,
    /// Points `w` near `z` with their images.
    pub probes: Vec<(Complex64, Complex64)>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct DistortionReport {
    pub samples: usize,
    pub lower_violations: usize,
    pub upper_violations: usize,
    pub ball_violations: usize,
    /// Largest observed |f'| dist(z) / dist(f(z)) and its smallest value.
    pub max_ratio: f64,
    pub min_ratio: f64,
}

impl DistortionReport {
    pub fn violations(&self) -> usize {
        self.lower_violations + self.upper_violations + self.ball_violations
    }
}

/// Samples `f` at `z`: central-difference derivative with step `h`, plus
/// probes on circles of radius r dist(z, ∂D) for a few r < 1.
/// `dist_range` gives the boundary distance in the image domain.
pub fn sample_map(
    f: impl Fn(Complex64) -> Complex64,
    dist_range: impl Fn(Complex64) -> f64,
    z: Complex64,
    dist_domain: f64,
    h: f64,
) -> Result<DistortionSample> {
    if !(h > 0.0) || h > dist_domain / 100.0 {
        return Err(Error::Refused(format!(
            "derivative step {h} is not small against boundary distance {dist_domain}"
        )));
    }
    let fz = f(z);
    let deriv = (f(z + h) - f(z - h)) / (2.0 * h);
    let mut probes = Vec::new();
    for frac in BALL_FRACTIONS {
        for k in 0..BALL_DIRECTIONS {
            let theta = 2.0 * std::f64::consts::PI * k as f64 / BALL_DIRECTIONS as f64;
            let w = z + Complex64::from_polar(frac * dist_domain, theta);
            probes.push((w, f(w)));
        }
    }
    Ok(DistortionSample {
        z,
        fz,
        deriv,
        dist_domain,
        dist_range: dist_range(fz),
        probes,
    })
}

/// Checks the two-sided derivative bound and the image-ball bound on each
/// sample, with 5% relative slack.
pub fn check_distortion(samples: &[DistortionSample]) -> DistortionReport {
    let mut rep = DistortionReport {
        samples: samples.len(),
        min_ratio: f64::INFINITY,
        ..Default::default()
    };
    for s in samples {
        let d = s.deriv.norm();
        let ratio = d * s.dist_domain / s.dist_range;
        rep.max_ratio = rep.max_ratio.max(ratio);
        rep.min_ratio = rep.min_ratio.min(ratio);
        if d < (1.0 - SLACK) * s.dist_range / (4.0 * s.dist_domain) {
            rep.lower_violations += 1;
        }
        if d > (1.0 + SLACK) * 4.0 * s.dist_range / s.dist_domain {
            rep.upper_violations += 1;
        }
        for (w, fw) in &s.probes {
            let r = (w - s.z).norm() / s.dist_domain;
            if r >= 1.0 {
                continue;
            }
            let bound = 4.0 * r / (1.0 - r * r) * s.dist_range;
            if (fw - s.fz).norm() > (1.0 + SLACK) * bound {
                rep.ball_violations += 1;
            }
        }
    }
    rep
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disk_dist(z: Complex64) -> f64 {
        1.0 - z.norm()
    }

    #[test]
    fn identity_on_disk() {
        let samples: Vec<_> = (0..20)
            .map(|k| {
                let z = Complex64::from_polar(0.8 * k as f64 / 20.0, k as f64);
                sample_map(|z| z, disk_dist, z, disk_dist(z), 1e-5).unwrap()
            })
            .collect();
        let rep = check_distortion(&samples);
        assert_eq!(rep.violations(), 0);
        assert!((rep.max_ratio - 1.0).abs() < 1e-6);
    }

    #[test]
    fn doubling_on_disk() {
        let z = Complex64::new(0.3, -0.2);
        let s = sample_map(|z| 2.0 * z, |w| 2.0 - w.norm(), z, disk_dist(z), 1e-6).unwrap();
        assert!((s.deriv.norm() - 2.0).abs() < 1e-8);
        assert_eq!(check_distortion(&[s]).violations(), 0);
    }

    #[test]
    fn detects_non_conformal_blowup() {
        // A map whose derivative is far too large for its image distances.
        let z = Complex64::new(0.0, 0.0);
        let s = sample_map(|z| 100.0 * z, disk_dist, z, 1.0, 1e-4).unwrap();
        assert!(check_distortion(&[s]).upper_violations > 0);
    }

    #[test]
    fn coarse_step_is_refused() {
        let err = sample_map(|z| z, disk_dist, Complex64::new(0.0, 0.0), 0.5, 0.1);
        assert!(matches!(err, Err(Error::Refused(_))));
    }
}
