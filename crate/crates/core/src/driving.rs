//! Loewner driving functions: plain SLE_kappa, SLE_kappa(rho) with boundary
//! force points (Euler route and Bessel route) and radial SLE_kappa(rho)
//! through the angle between the driving point and the force point.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bessel::{bessel_dimension, clamped_cot_drift, radial_euler, squared_bessel_step};
use crate::bessel::{simulate_bessel, BesselParams};
use crate::error::{param_err, Error, Result};
use crate::noise::BrownianPath;

/// Which side of the driving point a boundary force point sits on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn sign(self) -> f64 {
        match self {
            Side::Left => -1.0,
            Side::Right => 1.0,
        }
    }
}

/// A weighted boundary force point. `offset` is the distance from the
/// origin; `offset = 0` with `side = Left` is `0^-`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForcePoint {
    pub side: Side,
    pub offset: f64,
    pub weight: f64,
}

impl ForcePoint {
    pub fn left(offset: f64, weight: f64) -> Self {
        Self {
            side: Side::Left,
            offset,
            weight,
        }
    }

    pub fn right(offset: f64, weight: f64) -> Self {
        Self {
            side: Side::Right,
            offset,
            weight,
        }
    }

    /// Signed real position (0^- and 0^+ both map to 0).
    pub fn position(&self) -> f64 {
        if self.offset == 0.0 {
            0.0
        } else {
            self.side.sign() * self.offset
        }
    }
}

/// Validated force points, left ones first (nearest to farthest), then right
/// ones (nearest to farthest).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ForcePointConfig {
    points: Vec<ForcePoint>,
}

impl ForcePointConfig {
    pub fn new(points: impl IntoIterator<Item = ForcePoint>) -> Result<Self> {
        let mut left = Vec::new();
        let mut right = Vec::new();
        for p in points {
            if !(p.offset >= 0.0) || !p.offset.is_finite() {
                return param_err!("force point offset must be finite and >= 0, got {}", p.offset);
            }
            if !p.weight.is_finite() {
                return param_err!("force point weight must be finite");
            }
            match p.side {
                Side::Left => left.push(p),
                Side::Right => right.push(p),
            }
        }
        for side in [&left, &right] {
            if side.windows(2).any(|w| w[1].offset <= w[0].offset) {
                return param_err!("force points on one side must be strictly ordered away from 0");
            }
        }
        left.extend(right);
        Ok(Self { points: left })
    }

    pub fn points(&self) -> &[ForcePoint] {
        &self.points
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    /// Smallest strictly positive distance between the origin and a force
    /// point or between neighbouring points on one side.
    pub fn min_positive_gap(&self) -> Option<f64> {
        let mut gaps = Vec::new();
        for side in [Side::Left, Side::Right] {
            let mut prev = 0.0;
            for p in self.points.iter().filter(|p| p.side == side) {
                gaps.push(p.offset - prev);
                prev = p.offset;
            }
        }
        gaps.into_iter().filter(|&g| g > 0.0).reduce(f64::min)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Geometry {
    Chordal,
    Radial,
}

/// Sampled driving function on a uniform capacity-time grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DrivingFunction {
    pub kappa: f64,
    pub dt: f64,
    pub seed: u64,
    pub geometry: Geometry,
    pub times: Vec<f64>,
    /// Chordal driving values `W_k`. Empty for radial drives.
    pub w: Vec<f64>,
    pub force_points: ForcePointConfig,
    /// `v[j][k]`: position of force point `j` at step `k`.
    pub v: Vec<Vec<f64>>,
    /// Distance below which a force point counts as touching `W`.
    pub touch_tolerance: Option<f64>,
    pub threshold_index: Option<usize>,
    /// Radial: `theta = arg W - arg O`.
    pub theta: Vec<f64>,
    /// Radial: `alpha = arg W`.
    pub alpha: Vec<f64>,
    /// Radial: first index at which theta left `(theta_min, 2pi - theta_min)`.
    pub radial_exit_index: Option<usize>,
    /// Radial: the cot clamp engaged somewhere along the path.
    pub clamped: bool,
}

impl DrivingFunction {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Radial driving points `exp(i alpha_k)`.
    pub fn radial_points(&self) -> Vec<Complex64> {
        self.alpha.iter().map(|&a| Complex64::from_polar(1.0, a)).collect()
    }

    /// Realized quadratic variation of the chordal driving function.
    pub fn quadratic_variation(&self) -> f64 {
        self.w.windows(2).map(|p| (p[1] - p[0]).powi(2)).sum()
    }

    /// Chordal drive with a prescribed sequence of driving values.
    pub fn from_values(w: Vec<f64>, dt: f64) -> Self {
        let times = (0..w.len()).map(|k| k as f64 * dt).collect();
        Self {
            kappa: 0.0,
            dt,
            seed: 0,
            geometry: Geometry::Chordal,
            times,
            w,
            force_points: ForcePointConfig::default(),
            v: Vec::new(),
            touch_tolerance: None,
            threshold_index: None,
            theta: Vec::new(),
            alpha: Vec::new(),
            radial_exit_index: None,
            clamped: false,
        }
    }

    /// Radial drive with prescribed driving angles `alpha_k` (no force point).
    pub fn radial_from_angles(alpha: Vec<f64>, dt: f64) -> Self {
        let mut d = Self::from_values(Vec::new(), dt);
        d.geometry = Geometry::Radial;
        d.times = grid(alpha.len(), dt);
        d.theta = alpha.clone();
        d.alpha = alpha;
        d
    }

    /// Chordal drive with `steps` steps of constant value `c`.
    pub fn constant(c: f64, steps: usize, dt: f64) -> Self {
        Self::from_values(vec![c; steps + 1], dt)
    }
}

fn grid(n: usize, dt: f64) -> Vec<f64> {
    (0..n).map(|k| k as f64 * dt).collect()
}

fn check_kappa(kappa: f64) -> Result<()> {
    if !(kappa >= 0.0) || !kappa.is_finite() {
        return param_err!("kappa must be finite and nonnegative, got {kappa}");
    }
    Ok(())
}

/// `W = sqrt(kappa) B` on the grid of `noise`.
pub fn chordal_sle_driving(kappa: f64, noise: &BrownianPath) -> Result<DrivingFunction> {
    check_kappa(kappa)?;
    let scale = kappa.sqrt();
    let w = noise.cumulative().into_iter().map(|b| scale * b).collect();
    let mut drive = DrivingFunction::from_values(w, noise.dt);
    drive.kappa = kappa;
    drive.seed = noise.seed;
    Ok(drive)
}

/// Touch tolerance `10 sqrt(kappa dt)`.
pub fn touch_tolerance(kappa: f64, dt: f64) -> f64 {
    10.0 * (kappa * dt).sqrt()
}

/// SLE_kappa(rho) driving function with any number of boundary force
/// points, integrated with Euler steps away from collisions.
///
/// While a force point is within [`touch_tolerance`] of `W`, the gap to the
/// nearest touching point on that side advances as `sqrt(kappa)` times a
/// squared-Bessel step of dimension `d(kappa, sum of touching weights)`,
/// and the force point moves by the trapezoid rule `4 dt / (G + G')`.
/// Integration stops at the first grid index where the touching weights sum
/// to at most -2.
pub fn sle_kappa_rho_driving_euler(
    kappa: f64,
    fps: &ForcePointConfig,
    noise: &BrownianPath,
) -> Result<DrivingFunction> {
    if !(kappa > 0.0) || !kappa.is_finite() {
        return param_err!("kappa must be positive for SLE_kappa(rho), got {kappa}");
    }
    let dt = noise.dt;
    if let Some(gap) = fps.min_positive_gap() {
        if dt > gap * gap / 100.0 {
            return Err(Error::Refused(format!(
                "dt = {dt} is too coarse for the smallest force-point gap {gap}; use dt <= {:.3e}",
                gap * gap / 100.0
            )));
        }
    }
    let eps = touch_tolerance(kappa, dt);
    let sk = kappa.sqrt();
    let pts = fps.points();
    let m = pts.len();
    let n = noise.len();

    let mut w = Vec::with_capacity(n + 1);
    let mut v: Vec<Vec<f64>> = vec![Vec::with_capacity(n + 1); m];
    let mut wk = 0.0;
    let mut vk: Vec<f64> = pts.iter().map(ForcePoint::position).collect();
    let mut threshold_index = None;
    let mut touching = vec![false; m];
    let mut vnext = vec![0.0; m];

    for k in 0..=n {
        w.push(wk);
        for j in 0..m {
            v[j].push(vk[j]);
        }
        let mut touch_sum = 0.0;
        for j in 0..m {
            touching[j] = (wk - vk[j]).abs() < eps;
            if touching[j] {
                touch_sum += pts[j].weight;
            }
        }
        if touching.iter().any(|&t| t) && touch_sum <= -2.0 {
            threshold_index = Some(k);
            break;
        }
        if k == n {
            break;
        }
        let db = noise.increments[k];

        // Nearest touching point per side.
        let nearest = |side: Side| {
            (0..m)
                .filter(|&j| touching[j] && pts[j].side == side)
                .min_by(|&a, &b| (vk[a] - wk).abs().total_cmp(&(vk[b] - wk).abs()))
        };
        let active = match (nearest(Side::Left), nearest(Side::Right)) {
            (None, None) => None,
            (Some(l), None) => Some(l),
            (None, Some(r)) => Some(r),
            (Some(l), Some(r)) => {
                if (vk[l] - wk).abs() < (vk[r] - wk).abs() {
                    Some(l)
                } else {
                    Some(r)
                }
            }
        };

        // Drift on W from points outside the active cluster.
        let active_side = active.map(|a| pts[a].side);
        let mut drift = 0.0;
        for j in 0..m {
            if touching[j] && Some(pts[j].side) == active_side {
                continue;
            }
            let mut diff = wk - vk[j];
            if touching[j] {
                // Touching on the inactive side: bounded by the tolerance.
                diff = diff.abs().max(eps).copysign(-pts[j].side.sign());
            }
            drift += pts[j].weight / diff;
        }

        let wn;
        match active {
            None => {
                wn = wk + sk * db + drift * dt;
                for j in 0..m {
                    vnext[j] = vk[j] + 2.0 * dt / (vk[j] - wk);
                }
            }
            Some(a) => {
                let side = pts[a].side;
                let sg = side.sign();
                let rho_touch: f64 = (0..m)
                    .filter(|&j| touching[j] && pts[j].side == side)
                    .map(|j| pts[j].weight)
                    .sum();
                let d = bessel_dimension(kappa, rho_touch)?;
                let gap = sg * (vk[a] - wk);
                let x = gap / sk;
                let xdb = -sg * (db + drift * dt / sk);
                let gap_next = sk * squared_bessel_step(x * x, xdb, d, dt).sqrt();
                let denom = gap + gap_next;
                let dv = if denom > 0.0 { 4.0 * dt / denom } else { 0.0 };
                let va = vk[a] + sg * dv;
                wn = va - sg * gap_next;
                for j in 0..m {
                    // Points stacked on the active one move with it.
                    let stacked = pts[j].side == side && touching[j] && (vk[j] - vk[a]).abs() == 0.0;
                    vnext[j] = if j == a || stacked {
                        va
                    } else {
                        let g = vk[j] - wk;
                        if g == 0.0 {
                            vk[j]
                        } else {
                            vk[j] + 2.0 * dt / g
                        }
                    };
                }
            }
        }

        // Keep each side ordered and on its side of W.
        let mut wn = wn;
        for side in [Side::Left, Side::Right] {
            let sg = side.sign();
            let mut prev: Option<f64> = None;
            for j in (0..m).filter(|&j| pts[j].side == side) {
                if let Some(p) = prev {
                    if sg * (vnext[j] - p) < 0.0 {
                        vnext[j] = p;
                    }
                }
                prev = Some(vnext[j]);
            }
            if let Some(j) = (0..m).find(|&j| pts[j].side == side) {
                if sg * (vnext[j] - wn) < 0.0 {
                    wn = vnext[j];
                }
            }
        }
        wk = wn;
        vk.copy_from_slice(&vnext);
    }

    let len = w.len();
    Ok(DrivingFunction {
        kappa,
        dt,
        seed: noise.seed,
        geometry: Geometry::Chordal,
        times: grid(len, dt),
        w,
        force_points: fps.clone(),
        v,
        touch_tolerance: Some(eps),
        threshold_index,
        theta: Vec::new(),
        alpha: Vec::new(),
        radial_exit_index: None,
        clamped: false,
    })
}

/// Single-force-point SLE_kappa(rho) built from a Bessel process `X` of
/// dimension `d(kappa, rho)`: `V = sqrt(kappa) X_0 + (2/sqrt(kappa)) int ds/X`
/// and `W = V - sqrt(kappa) X`. `x0` is the force point's distance from the
/// origin, so `X_0 = x0 / sqrt(kappa)`. The integral uses the trapezoid rule,
/// which stays finite when the discrete path touches zero.
pub fn sle_kappa_rho_driving_bessel(
    kappa: f64,
    rho: f64,
    x0: f64,
    side: Side,
    noise: &BrownianPath,
) -> Result<DrivingFunction> {
    if !(rho > -2.0) {
        return Err(Error::Unsupported(format!(
            "the Bessel construction needs rho > -2, got {rho}"
        )));
    }
    let d = bessel_dimension(kappa, rho)?;
    let sk = kappa.sqrt();
    let path = simulate_bessel(&BesselParams::linear(d, x0 / sk), noise)?;
    let x = &path.values;
    let dt = noise.dt;
    let sg = side.sign();
    let mut v = Vec::with_capacity(x.len());
    let mut w = Vec::with_capacity(x.len());
    let mut acc = sk * x[0];
    for k in 0..x.len() {
        if k > 0 {
            let denom = x[k - 1] + x[k];
            if denom > 0.0 {
                acc += (2.0 / sk) * 2.0 * dt / denom;
            }
        }
        v.push(sg * acc);
        w.push(sg * (acc - sk * x[k]));
    }
    let fps = ForcePointConfig::new([ForcePoint {
        side,
        offset: x0,
        weight: rho,
    }])?;
    Ok(DrivingFunction {
        kappa,
        dt,
        seed: noise.seed,
        geometry: Geometry::Chordal,
        times: grid(w.len(), dt),
        w,
        force_points: fps,
        v: vec![v],
        touch_tolerance: None,
        threshold_index: None,
        theta: Vec::new(),
        alpha: Vec::new(),
        radial_exit_index: None,
        clamped: false,
    })
}

/// Radial SLE_kappa(rho) with the force point `O` starting at 1 and `W` at
/// `exp(i theta0)`.
///
/// `theta` follows `d theta = ((rho+2)/2) cot(theta/2) dt + sqrt(kappa) dB`
/// (the radial Bessel scheme with the clamped cot drift), `arg O` follows
/// `d beta = -cot(theta/2) dt` and `alpha = theta + beta`.
pub fn radial_sle_driving(
    kappa: f64,
    rho: f64,
    theta0: f64,
    noise: &BrownianPath,
) -> Result<DrivingFunction> {
    check_kappa(kappa)?;
    let two_pi = 2.0 * std::f64::consts::PI;
    if !(theta0 > 0.0 && theta0 < two_pi) {
        return param_err!("theta0 must lie in (0, 2pi), got {theta0}");
    }
    if !rho.is_finite() {
        return param_err!("rho must be finite");
    }
    let dt = noise.dt;
    let (theta, exit, clamped) =
        radial_euler(theta0, (rho + 2.0) / 2.0, kappa.sqrt(), dt, &noise.increments);
    let mut alpha = Vec::with_capacity(theta.len());
    let mut beta = 0.0;
    for (k, &th) in theta.iter().enumerate() {
        if k > 0 {
            let (drift, _) = clamped_cot_drift(theta[k - 1], -1.0);
            beta += drift * dt;
        }
        alpha.push(th + beta);
    }
    let fps = ForcePointConfig::default();
    Ok(DrivingFunction {
        kappa,
        dt,
        seed: noise.seed,
        geometry: Geometry::Radial,
        times: grid(theta.len(), dt),
        w: Vec::new(),
        force_points: fps,
        v: Vec::new(),
        touch_tolerance: None,
        threshold_index: None,
        theta,
        alpha,
        radial_exit_index: exit,
        clamped,
    })
}

/// Capacity time at which the continuation threshold was reached.
pub fn continuation_threshold_time(drive: &DrivingFunction) -> Option<f64> {
    if drive.geometry != Geometry::Chordal {
        return None;
    }
    drive.threshold_index.map(|k| drive.times[k])
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn zero_kappa_gives_zero_drive() {
        let noise = BrownianPath::sample(1.0, 1e-3, 1).unwrap();
        let d = chordal_sle_driving(0.0, &noise).unwrap();
        assert!(d.w.iter().all(|&x| x == 0.0));
        assert!(chordal_sle_driving(-1.0, &noise).is_err());
    }

    #[test]
    fn kappa_scaling_is_exact() {
        let noise = BrownianPath::sample(1.0, 1e-3, 2).unwrap();
        let a = chordal_sle_driving(4.0, &noise).unwrap();
        let b = chordal_sle_driving(16.0, &noise).unwrap();
        for (x, y) in a.w.iter().zip(&b.w) {
            assert_eq!(2.0 * x, *y);
        }
    }

    #[test]
    fn quadratic_variation_near_kappa() {
        let noise = BrownianPath::sample(1.0, 1e-5, 3).unwrap();
        let d = chordal_sle_driving(8.0, &noise).unwrap();
        let qv = d.quadratic_variation();
        assert!((qv - 8.0).abs() <= 0.4, "qv = {qv}");
    }

    #[test]
    fn zero_weights_reduce_to_plain_sle() {
        let noise = BrownianPath::sample(1.0, 1e-4, 4).unwrap();
        let fps = ForcePointConfig::new([ForcePoint::right(0.5, 0.0), ForcePoint::left(0.7, 0.0)])
            .unwrap();
        let e = sle_kappa_rho_driving_euler(2.0, &fps, &noise).unwrap();
        let plain = chordal_sle_driving(2.0, &noise).unwrap();
        // Away from collisions the drift is exactly zero, so W agrees
        // until a force point first comes within the touch tolerance.
        let eps = e.touch_tolerance.unwrap();
        let first_touch = (0..e.len())
            .find(|&k| e.v.iter().any(|vj| (vj[k] - e.w[k]).abs() < eps))
            .unwrap_or(e.len());
        for k in 0..first_touch {
            assert!((e.w[k] - plain.w[k]).abs() < 1e-12);
        }
        // Force points follow the Loewner flow dV = 2/(V-W) dt.
        for k in 0..first_touch.saturating_sub(1) {
            for vj in &e.v {
                let expected = vj[k] + 2.0 * noise.dt / (vj[k] - e.w[k]);
                assert!((vj[k + 1] - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rho_below_threshold_stops_immediately() {
        let noise = BrownianPath::sample(1.0, 1e-4, 5).unwrap();
        let fps = ForcePointConfig::new([ForcePoint::right(0.0, -3.0)]).unwrap();
        let e = sle_kappa_rho_driving_euler(4.0, &fps, &noise).unwrap();
        assert_eq!(e.threshold_index, Some(0));
        assert_eq!(continuation_threshold_time(&e), Some(0.0));
    }

    #[test]
    fn no_force_points_no_threshold() {
        let noise = BrownianPath::sample(1.0, 1e-3, 5).unwrap();
        let d = chordal_sle_driving(6.0, &noise).unwrap();
        assert_eq!(continuation_threshold_time(&d), None);
        let e = sle_kappa_rho_driving_euler(6.0, &ForcePointConfig::default(), &noise).unwrap();
        assert_eq!(continuation_threshold_time(&e), None);
    }

    #[test]
    fn coarse_step_is_refused() {
        let noise = BrownianPath::sample(1.0, 1e-2, 5).unwrap();
        let fps = ForcePointConfig::new([ForcePoint::right(0.1, 1.0)]).unwrap();
        assert!(matches!(
            sle_kappa_rho_driving_euler(4.0, &fps, &noise),
            Err(Error::Refused(_))
        ));
    }

    #[test]
    fn config_rejects_misordered_points() {
        assert!(ForcePointConfig::new([ForcePoint::right(0.5, 1.0), ForcePoint::right(0.2, 1.0)])
            .is_err());
        assert!(ForcePointConfig::new([ForcePoint::left(-0.5, 1.0)]).is_err());
        let c = ForcePointConfig::new([ForcePoint::left(0.0, 1.0), ForcePoint::right(0.0, 1.0)])
            .unwrap();
        assert_eq!(c.points()[0].side, Side::Left);
        assert_eq!(c.min_positive_gap(), None);
    }

    #[test]
    fn euler_route_preserves_sides_and_monotonicity() {
        for seed in 0..20 {
            let noise = BrownianPath::sample(1.0, 1e-4, seed).unwrap();
            let fps = ForcePointConfig::new([
                ForcePoint::left(0.0, 0.5),
                ForcePoint::left(0.3, -1.0),
                ForcePoint::right(0.0, -1.0),
                ForcePoint::right(0.2, 2.0),
            ])
            .unwrap();
            let e = sle_kappa_rho_driving_euler(6.0, &fps, &noise).unwrap();
            let end = e.threshold_index.map_or(e.len(), |k| k + 1);
            for (j, p) in fps.points().iter().enumerate() {
                let sg = p.side.sign();
                for k in 0..end {
                    assert!(sg * (e.v[j][k] - e.w[k]) >= 0.0, "seed {seed} j {j} k {k}");
                    if k > 0 {
                        assert!(sg * (e.v[j][k] - e.v[j][k - 1]) >= 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn bessel_route_gap_identity() {
        let noise = BrownianPath::sample(1.0, 1e-4, 6).unwrap();
        let d = sle_kappa_rho_driving_bessel(6.0, 1.0, 0.3, Side::Right, &noise).unwrap();
        let x = simulate_bessel(
            &BesselParams::linear(bessel_dimension(6.0, 1.0).unwrap(), 0.3 / 6f64.sqrt()),
            &noise,
        )
        .unwrap();
        for k in 0..d.len() {
            let gap = d.v[0][k] - d.w[k];
            assert!(gap >= 0.0);
            assert!((gap - 6f64.sqrt() * x.values[k]).abs() < 1e-12);
        }
        assert!(sle_kappa_rho_driving_bessel(6.0, -2.0, 0.0, Side::Right, &noise).is_err());
        let l = sle_kappa_rho_driving_bessel(6.0, 1.0, 0.3, Side::Left, &noise).unwrap();
        assert!(l.w.iter().zip(&d.w).all(|(a, b)| *a == -*b));
    }

    #[test]
    fn radial_identities() {
        let empty = BrownianPath::empty(1e-3, 0);
        let r = radial_sle_driving(6.0, 0.0, 1.0, &empty).unwrap();
        assert_eq!(r.theta, vec![1.0]);
        assert_eq!(r.alpha, vec![1.0]);
        let zero = BrownianPath::from_increments(1e-3, vec![0.0]);
        let r = radial_sle_driving(6.0, -2.0, PI, &zero).unwrap();
        assert!((r.theta[1] - PI).abs() < 1e-15);
        assert!(radial_sle_driving(6.0, 0.0, 0.0, &empty).is_err());
        assert!(radial_sle_driving(6.0, 0.0, 2.0 * PI, &empty).is_err());
    }
}
