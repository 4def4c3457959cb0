use num_complex::Complex64;

use crate::error::{param_err, Result};

const BRUTE_FORCE_LIMIT: usize = 1000;

fn cross(o: Complex64, a: Complex64, b: Complex64) -> f64 {
    (a.re - o.re) * (b.im - o.im) - (a.im - o.im) * (b.re - o.re)
}

/// Convex hull by Andrew's monotone chain, counter-clockwise, without
/// collinear points.
pub fn convex_hull(points: &[Complex64]) -> Vec<Complex64> {
    let mut pts: Vec<Complex64> = points.to_vec();
    pts.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<Complex64> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &Complex64>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for &p in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

fn brute_force(points: &[Complex64]) -> f64 {
    let mut best = 0.0f64;
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            best = best.max((a - b).norm());
        }
    }
    best
}

/// Largest pairwise distance. Exact pair search for small inputs; larger
/// inputs are first reduced to their convex hull, which contains every
/// diametral pair.
pub fn segment_diameter(points: &[Complex64]) -> Result<f64> {
    if points.is_empty() {
        return param_err!("segment_diameter of an empty point set");
    }
    if points.len() <= BRUTE_FORCE_LIMIT {
        return Ok(brute_force(points));
    }
    let hull = convex_hull(points);
    Ok(brute_force(&hull))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn small_cases() {
        assert_eq!(segment_diameter(&[Complex64::new(1.0, 2.0)]).unwrap(), 0.0);
        let d = segment_diameter(&[Complex64::new(0.0, 0.0), Complex64::new(3.0, 4.0)]).unwrap();
        assert_eq!(d, 5.0);
        assert!(segment_diameter(&[]).is_err());
    }

    #[test]
    fn hull_path_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in [1000usize, 1001, 5000] {
            let pts: Vec<Complex64> = (0..n)
                .map(|_| Complex64::new(rng.random::<f64>(), rng.random::<f64>()))
                .collect();
            let hull = convex_hull(&pts);
            assert_eq!(brute_force(&hull), brute_force(&pts));
            assert_eq!(segment_diameter(&pts).unwrap(), brute_force(&pts));
        }
    }

    #[test]
    fn hull_of_square_with_interior() {
        let mut pts = vec![
            Complex64::new(0.0, 0.0),
            Complex64::new(1.0, 0.0),
            Complex64::new(1.0, 1.0),
            Complex64::new(0.0, 1.0),
            Complex64::new(0.5, 0.5),
            Complex64::new(0.5, 0.0),
        ];
        pts.extend(pts.clone());
        assert_eq!(convex_hull(&pts).len(), 4);
    }
}
