//! Exact squared Euclidean distance transform (separable lower-envelope
//! algorithm) on integer grids.

use super::raster::HullRaster;

/// 1-D squared distance transform of `f` (values may be infinite).
fn edt_1d(f: &[f64], out: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    if n == 0 {
        return;
    }
    // Lower envelope of parabolas rooted at finite samples.
    let mut k: isize = -1;
    for q in 0..n {
        if !f[q].is_finite() {
            continue;
        }
        loop {
            if k < 0 {
                k = 0;
                v[0] = q;
                z[0] = f64::NEG_INFINITY;
                z[1] = f64::INFINITY;
                break;
            }
            let p = v[k as usize];
            let s = ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * (q as f64 - p as f64));
            if s <= z[k as usize] {
                k -= 1;
                continue;
            }
            k += 1;
            v[k as usize] = q;
            z[k as usize] = s;
            z[k as usize + 1] = f64::INFINITY;
            break;
        }
    }
    if k < 0 {
        out.iter_mut().for_each(|o| *o = f64::INFINITY);
        return;
    }
    let mut j = 0usize;
    for (q, o) in out.iter_mut().enumerate() {
        while z[j + 1] < q as f64 {
            j += 1;
        }
        let p = v[j];
        let d = q as f64 - p as f64;
        *o = d * d + f[p];
    }
}

/// Squared distance (in pixel units, center to center) from every cell of a
/// `width x height` grid to the nearest feature cell. Cells with no feature
/// anywhere get `f64::INFINITY`. Values are exact integers.
pub fn edt_squared(width: usize, height: usize, is_feature: impl Fn(usize) -> bool) -> Vec<f64> {
    let mut grid: Vec<f64> = (0..width * height)
        .map(|i| if is_feature(i) { 0.0 } else { f64::INFINITY })
        .collect();
    let n = width.max(height);
    let mut f = vec![0.0; n];
    let mut out = vec![0.0; n];
    let mut v = vec![0usize; n];
    let mut z = vec![0.0; n + 1];
    // columns
    for c in 0..width {
        for r in 0..height {
            f[r] = grid[r * width + c];
        }
        edt_1d(&f[..height], &mut out[..height], &mut v, &mut z);
        for r in 0..height {
            grid[r * width + c] = out[r];
        }
    }
    // rows
    for r in 0..height {
        let row = &mut grid[r * width..(r + 1) * width];
        f[..width].copy_from_slice(row);
        edt_1d(&f[..width], &mut out[..width], &mut v, &mut z);
        row.copy_from_slice(&out[..width]);
    }
    grid
}

/// Hausdorff distance between the occupied sets of two rasters on the same
/// frame, in world units (pixel centers). Infinite if exactly one is empty.
pub fn hausdorff_distance(a: &HullRaster, b: &HullRaster) -> Option<f64> {
    if a.width != b.width || a.height != b.height || a.px != b.px || a.origin_x != b.origin_x {
        return None;
    }
    let (w, h) = (a.width, a.height);
    let da = edt_squared(w, h, |i| a.cells[i]);
    let db = edt_squared(w, h, |i| b.cells[i]);
    let mut worst: f64 = 0.0;
    let mut any = false;
    for i in 0..w * h {
        if a.cells[i] {
            worst = worst.max(db[i]);
            any = true;
        }
        if b.cells[i] {
            worst = worst.max(da[i]);
            any = true;
        }
    }
    if !any {
        return Some(0.0);
    }
    Some(worst.sqrt() * a.px)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute(width: usize, height: usize, feat: &[bool]) -> Vec<f64> {
        let mut out = vec![f64::INFINITY; width * height];
        for i in 0..width * height {
            let (ri, ci) = ((i / width) as i64, (i % width) as i64);
            for j in 0..width * height {
                if feat[j] {
                    let (rj, cj) = ((j / width) as i64, (j % width) as i64);
                    let d = ((ri - rj).pow(2) + (ci - cj).pow(2)) as f64;
                    out[i] = out[i].min(d);
                }
            }
        }
        out
    }

    #[test]
    fn single_feature() {
        let d = edt_squared(5, 5, |i| i == 12);
        assert_eq!(d[0], 8.0);
        assert_eq!(d[12], 0.0);
        assert_eq!(d[14], 4.0);
    }

    #[test]
    fn no_features_is_infinite() {
        let d = edt_squared(3, 2, |_| false);
        assert!(d.iter().all(|x| x.is_infinite()));
    }

    proptest! {
        #[test]
        fn matches_brute_force(w in 1usize..12, h in 1usize..12, bits in proptest::collection::vec(any::<bool>(), 144)) {
            let feat: Vec<bool> = (0..w * h).map(|i| bits[i] && (i % 3 == 0)).collect();
            let fast = edt_squared(w, h, |i| feat[i]);
            let slow = brute(w, h, &feat);
            prop_assert_eq!(fast, slow);
        }
    }
}
