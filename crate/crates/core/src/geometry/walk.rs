//! Brownian exit sampling from the complement of a raster hull by
//! walk-on-spheres: each step jumps to a uniform point on the largest circle
//! that provably avoids both the hull and the real line, which samples the
//! exit distribution of Brownian motion without time discretization.

use std::f64::consts::{PI, SQRT_2};

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;

use super::edt::edt_squared;
use super::raster::HullRaster;
use crate::error::{param_err, Error, Result};
use crate::noise::stream_rng;
use crate::stats::McEstimate;

#[derive(Clone, Copy, Debug)]
pub struct WalkConfig {
    /// Step budget per walker; exhausted walkers count as lost.
    pub max_steps: u64,
    /// Walkers within this many pixels of an occupied cell are absorbed.
    pub absorb_px: f64,
    /// Walkers below this height are absorbed on the real line, in pixels.
    pub real_eps_px: f64,
    /// Largest tolerated fraction of lost walkers.
    pub max_loss: f64,
}

impl Default for WalkConfig {
    fn default() -> Self {
        Self {
            max_steps: 1_000_000,
            absorb_px: 2.0,
            real_eps_px: 1e-3,
            max_loss: 0.01,
        }
    }
}

/// Which part of the boundary counts as a hit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BoundaryTarget {
    RealInterval { lo: f64, hi: f64 },
    Hull,
    All,
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Exit {
    Real(f64),
    Hull(Complex64),
    Lost,
}

/// Precomputed distance field for one raster.
struct Field<'a> {
    raster: &'a HullRaster,
    d2: Vec<f64>,
    bbox: Option<(f64, f64, f64, f64)>,
    cfg: WalkConfig,
}

impl<'a> Field<'a> {
    fn new(raster: &'a HullRaster, cfg: WalkConfig) -> Self {
        let d2 = edt_squared(raster.width, raster.height, |i| raster.cells[i]);
        Self {
            raster,
            d2,
            bbox: raster.bounding_box_world(),
            cfg,
        }
    }

    /// Lower bound on the distance from `z` to the hull, or `None` if `z`
    /// is close enough to count as touching it.
    fn hull_distance(&self, z: Complex64) -> Option<f64> {
        let px = self.raster.px;
        let Some((x0, x1, y0, y1)) = self.bbox else {
            return Some(f64::INFINITY);
        };
        if let Some((c, r)) = self.raster.cell_of(z) {
            let i = self.raster.index(c, r);
            let d2 = self.d2[i];
            if self.raster.cells[i] || d2 <= self.cfg.absorb_px * self.cfg.absorb_px {
                return None;
            }
            return Some((d2.sqrt() - SQRT_2) * px);
        }
        let dx = (x0 - z.re).max(z.re - x1).max(0.0);
        let dy = (y0 - z.im).max(z.im - y1).max(0.0);
        let d = dx.hypot(dy);
        if d <= self.cfg.absorb_px * px {
            None
        } else {
            Some(d)
        }
    }

    fn walk(&self, start: Complex64, seed: u64, stream: u64) -> Exit {
        let mut rng = stream_rng(seed, stream);
        let eps = self.cfg.real_eps_px * self.raster.px;
        let mut z = start;
        for _ in 0..self.cfg.max_steps {
            if z.im <= eps {
                return Exit::Real(z.re);
            }
            let Some(dh) = self.hull_distance(z) else {
                return Exit::Hull(z);
            };
            let r = dh.min(z.im);
            let phi = rng.random::<f64>() * 2.0 * PI;
            z += Complex64::from_polar(r, phi);
        }
        Exit::Lost
    }

    fn run(&self, start: Complex64, n: usize, seed: u64) -> Vec<Exit> {
        (0..n as u64)
            .into_par_iter()
            .map(|k| self.walk(start, seed, k))
            .collect()
    }
}

fn check_loss(lost: usize, n: usize, cfg: &WalkConfig) -> Result<()> {
    if lost as f64 > cfg.max_loss * n as f64 {
        return Err(Error::Computation(format!(
            "{lost} of {n} walkers exhausted the step budget"
        )));
    }
    Ok(())
}

/// Half-plane capacity: `y0` times the mean height at which walkers started
/// at `i y0` leave the complement of the hull. Walkers on the real line
/// contribute 0. Returns the estimate and the number of lost walkers.
pub fn estimate_hcap_with(
    hull: &HullRaster,
    y0: f64,
    n: usize,
    seed: u64,
    cfg: WalkConfig,
) -> Result<(McEstimate, usize)> {
    if !(y0 > 0.0) || n == 0 {
        return param_err!("estimate_hcap needs y0 > 0 and n > 0 (got y0={y0}, n={n})");
    }
    let field = Field::new(hull, cfg);
    let start = Complex64::new(0.0, y0);
    if field.hull_distance(start).is_none() {
        return param_err!("start point i*{y0} touches the hull");
    }
    let exits = field.run(start, n, seed);
    let lost = exits.iter().filter(|e| **e == Exit::Lost).count();
    check_loss(lost, n, &cfg)?;
    let samples: Vec<f64> = exits
        .iter()
        .filter_map(|e| match e {
            Exit::Real(_) => Some(0.0),
            Exit::Hull(z) => Some(y0 * z.im),
            Exit::Lost => None,
        })
        .collect();
    Ok((McEstimate::from_samples(&samples, seed), lost))
}

/// [`estimate_hcap_with`] under the default configuration.
pub fn estimate_hcap(hull: &HullRaster, y0: f64, n: usize, seed: u64) -> Result<McEstimate> {
    estimate_hcap_with(hull, y0, n, seed, WalkConfig::default()).map(|(e, _)| e)
}

/// Starting height 10 x (upper bound on the hull diameter), at least 10 px
/// above the hull top.
pub fn default_start_height(hull: &HullRaster) -> f64 {
    let top = hull.bounding_box_world().map(|b| b.3).unwrap_or(0.0);
    (10.0 * hull.diameter_bound()).max(top + 10.0 * hull.px).max(hull.px)
}

/// Fraction of walkers from `start` whose first boundary hit lies in
/// `target`. Lost walkers are excluded from the fraction.
pub fn harmonic_measure(
    domain: &HullRaster,
    start: Complex64,
    target: BoundaryTarget,
    n: usize,
    seed: u64,
) -> Result<McEstimate> {
    harmonic_measure_with(domain, start, target, n, seed, WalkConfig::default())
}

pub fn harmonic_measure_with(
    domain: &HullRaster,
    start: Complex64,
    target: BoundaryTarget,
    n: usize,
    seed: u64,
    cfg: WalkConfig,
) -> Result<McEstimate> {
    if n == 0 {
        return param_err!("harmonic_measure needs n > 0");
    }
    if !(start.im > 0.0) {
        return param_err!("start {start} is not in the upper half-plane");
    }
    if let Some((c, r)) = domain.cell_of(start) {
        if domain.occupied(c, r) {
            return param_err!("start {start} lies in an occupied pixel");
        }
    }
    let field = Field::new(domain, cfg);
    let exits = field.run(start, n, seed);
    let lost = exits.iter().filter(|e| **e == Exit::Lost).count();
    check_loss(lost, n, &cfg)?;
    let samples: Vec<f64> = exits
        .iter()
        .filter_map(|e| {
            let hit = match (e, target) {
                (Exit::Lost, _) => return None,
                (_, BoundaryTarget::All) => true,
                (Exit::Hull(_), BoundaryTarget::Hull) => true,
                (Exit::Real(x), BoundaryTarget::RealInterval { lo, hi }) => *x >= lo && *x <= hi,
                _ => false,
            };
            Some(if hit { 1.0 } else { 0.0 })
        })
        .collect();
    Ok(McEstimate::from_samples(&samples, seed))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn slit(h: f64) -> HullRaster {
        let px = h / 1024.0;
        let pts = [Complex64::new(0.0, 0.0), Complex64::new(0.0, h)];
        HullRaster::from_polyline(&pts, px)
    }

    #[test]
    fn empty_hull_has_zero_capacity() {
        let e = estimate_hcap(&HullRaster::empty(1e-3), 1.0, 2000, 1).unwrap();
        assert_eq!(e.value, 0.0);
        assert_eq!(e.stderr, 0.0);
    }

    #[test]
    fn slit_capacity() {
        let r = slit(1.0);
        let e = estimate_hcap(&r, 10.0, 20_000, 7).unwrap();
        assert!(e.agrees_with(0.5, 3.0, 0.0), "{e:?}");
    }

    #[test]
    fn nested_hulls_are_ordered() {
        let a = slit(0.5);
        let mut b = HullRaster::with_frame(a.origin_x, a.px, a.width, 2 * a.height);
        b.draw_polyline(&[Complex64::new(0.0, 0.0), Complex64::new(0.0, 1.0)]);
        let ea = estimate_hcap(&a, 10.0, 10_000, 3).unwrap();
        let eb = estimate_hcap(&b, 10.0, 10_000, 3).unwrap();
        assert!(ea.value < eb.value + 3.0 * (ea.stderr.hypot(eb.stderr)));
    }

    #[test]
    fn half_plane_harmonic_measures() {
        let empty = HullRaster::empty(1e-3);
        let i = Complex64::new(0.0, 1.0);
        let pos = harmonic_measure(&empty, i, BoundaryTarget::RealInterval { lo: 0.0, hi: f64::INFINITY }, 20_000, 5)
            .unwrap();
        assert!(pos.agrees_with(0.5, 3.0, 0.0), "{pos:?}");
        let mid = harmonic_measure(&empty, i, BoundaryTarget::RealInterval { lo: -1.0, hi: 1.0 }, 20_000, 6)
            .unwrap();
        assert!(mid.agrees_with(0.5, 3.0, 0.0), "{mid:?}");
        let all = harmonic_measure(&empty, i, BoundaryTarget::All, 1000, 7).unwrap();
        assert_eq!(all.value, 1.0);
    }

    #[test]
    fn partition_sums_to_one() {
        let r = slit(1.0);
        let z = Complex64::new(0.5, 0.5);
        let n = 20_000;
        let h = harmonic_measure(&r, z, BoundaryTarget::Hull, n, 9).unwrap();
        let left = harmonic_measure(&r, z, BoundaryTarget::RealInterval { lo: f64::NEG_INFINITY, hi: 0.0 }, n, 9)
            .unwrap();
        let right = harmonic_measure(&r, z, BoundaryTarget::RealInterval { lo: 0.0, hi: f64::INFINITY }, n, 9)
            .unwrap();
        let total = h.value + left.value + right.value;
        assert!((total - 1.0).abs() < 1e-12, "{total}");
    }

    #[test]
    fn start_in_hull_is_rejected() {
        let r = slit(1.0);
        let err = harmonic_measure(&r, Complex64::new(0.0, 0.5), BoundaryTarget::All, 10, 1);
        assert!(matches!(err, Err(Error::Parameter(_))));
    }
}
