use std::collections::VecDeque;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::diameter::segment_diameter;
use super::edt::edt_squared;
use super::raster::HullRaster;

/// A bounded component of the complement of a hull.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Bubble {
    pub pixels: usize,
    pub diameter: f64,
    pub center: Complex64,
    /// Radius of the largest disk inside the component, measured from a
    /// pixel center to the nearest boundary pixel center.
    pub radius: f64,
    /// Squared pixel distance from the disk center cell to the nearest
    /// boundary feature (occupied cell or the row below the real line).
    pub radius_d2: u64,
    pub touches_real_line: bool,
    #[serde(skip)]
    pub cells: Vec<usize>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct BubbleReport {
    pub px: f64,
    pub components: Vec<Bubble>,
}

impl BubbleReport {
    pub fn max_radius(&self) -> f64 {
        self.components.iter().map(|b| b.radius).fold(0.0, f64::max)
    }
}

/// Squared distance field for inscribed disks: occupied cells and a
/// virtual row just below row 0 (the real line) act as features. Returned
/// grid has the raster's shape.
fn boundary_d2(raster: &HullRaster) -> Vec<f64> {
    let (w, h) = (raster.width, raster.height);
    let full = edt_squared(w, h + 1, |i| i < w || raster.cells[i - w]);
    full[w..].to_vec()
}

/// Largest inscribed disk of the component made of `cells`: returns the
/// center, the radius and the integer squared pixel distance it is based
/// on. `None` for an empty component.
pub fn inscribed_radius(raster: &HullRaster, cells: &[usize]) -> Option<(Complex64, f64, u64)> {
    let d2 = boundary_d2(raster);
    inscribed_from(raster, &d2, cells)
}

fn inscribed_from(raster: &HullRaster, d2: &[f64], cells: &[usize]) -> Option<(Complex64, f64, u64)> {
    let &best = cells.iter().max_by(|&&a, &&b| d2[a].total_cmp(&d2[b]).then(b.cmp(&a)))?;
    let d = d2[best];
    let center = raster.center(best % raster.width, best / raster.width);
    Some((center, d.sqrt() * raster.px, d as u64))
}

/// Bounded complementary components (4-connected), largest first.
pub fn bubbles(raster: &HullRaster) -> BubbleReport {
    let (w, h) = (raster.width, raster.height);
    let outside = raster.outside_mask();
    let d2 = boundary_d2(raster);
    let mut label = vec![false; w * h];
    let mut components = Vec::new();
    for start in 0..w * h {
        if raster.cells[start] || outside[start] || label[start] {
            continue;
        }
        let mut cells = vec![];
        let mut queue = VecDeque::from([start]);
        label[start] = true;
        while let Some(i) = queue.pop_front() {
            cells.push(i);
            let (c, r) = (i % w, i / w);
            let mut nbrs = [usize::MAX; 4];
            if c > 0 {
                nbrs[0] = i - 1;
            }
            if c + 1 < w {
                nbrs[1] = i + 1;
            }
            if r > 0 {
                nbrs[2] = i - w;
            }
            if r + 1 < h {
                nbrs[3] = i + w;
            }
            for j in nbrs {
                if j != usize::MAX && !raster.cells[j] && !label[j] {
                    label[j] = true;
                    queue.push_back(j);
                }
            }
        }
        cells.sort_unstable();
        let centers: Vec<Complex64> = cells.iter().map(|&i| raster.center(i % w, i / w)).collect();
        let diameter = segment_diameter(&centers).unwrap_or(0.0);
        let (center, radius, radius_d2) = inscribed_from(raster, &d2, &cells).unwrap();
        components.push(Bubble {
            pixels: cells.len(),
            diameter,
            center,
            radius,
            radius_d2,
            touches_real_line: cells[0] < w,
            cells,
        });
    }
    components.sort_by_key(|b| std::cmp::Reverse(b.pixels));
    BubbleReport {
        px: raster.px,
        components,
    }
}

/// Half the 90th percentile of the vertex spacing of a polyline.
pub fn closing_radius(points: &[Complex64]) -> f64 {
    let mut steps: Vec<f64> = points.windows(2).map(|w| (w[1] - w[0]).norm()).collect();
    if steps.is_empty() {
        return 0.0;
    }
    steps.sort_by(f64::total_cmp);
    0.5 * steps[(steps.len() * 9 / 10).min(steps.len() - 1)]
}

/// [`bubbles`] after closing gaps narrower than `2 closing` in the hull:
/// cells within `closing` of an occupied cell or of the real line count as
/// boundary when the components are separated. Inscribed radii are still
/// measured to the original occupied cells and the real line. Sampled
/// curves drawn as polylines only close their loops up to the sampling
/// resolution; `closing` should be about half the vertex spacing.
pub fn bubbles_closed(raster: &HullRaster, closing: f64) -> BubbleReport {
    if !(closing > 0.0) {
        return bubbles(raster);
    }
    let d2 = boundary_d2(raster);
    let limit = (closing / raster.px).powi(2);
    let mut closed = raster.clone();
    for (cell, &d) in closed.cells.iter_mut().zip(&d2) {
        *cell |= d <= limit;
    }
    let mut report = bubbles(&closed);
    for b in &mut report.components {
        let (center, radius, radius_d2) = inscribed_from(raster, &d2, &b.cells).unwrap();
        b.center = center;
        b.radius = radius;
        b.radius_d2 = radius_d2;
    }
    report
}

/// Filled hull after closing gaps narrower than `2 closing` (see
/// [`bubbles_closed`]), opened back so that cells within `closing` of the
/// unbounded component and not on the curve stay outside.
pub fn fill_hull_closed(raster: &HullRaster, closing: f64) -> HullRaster {
    if !(closing > 0.0) {
        return super::raster::fill_hull(raster);
    }
    let (w, h) = (raster.width, raster.height);
    let limit = (closing / raster.px).powi(2);
    let d2 = boundary_d2(raster);
    let mut closed = raster.clone();
    for (cell, &d) in closed.cells.iter_mut().zip(&d2) {
        *cell |= d <= limit;
    }
    let outside = closed.outside_mask();
    let to_outside = edt_squared(w, h, |i| outside[i]);
    let mut filled = raster.clone();
    for (cell, &d) in filled.cells.iter_mut().zip(&to_outside) {
        *cell = *cell || d > limit;
    }
    filled
}
