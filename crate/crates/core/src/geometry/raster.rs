use std::collections::{BinaryHeap, VecDeque};

use num_complex::Complex64;

use super::diameter::segment_diameter;

/// Default pixel size is the hull diameter divided by this.
pub const DEFAULT_RESOLUTION_DIVISOR: f64 = 1024.0;

/// Occupancy bitmap over `[origin_x, origin_x + width px) x [0, height px)`.
///
/// Row 0 sits on the real line; row indices grow upward. The real line is a
/// boundary, not a route to infinity: only the top, left and right edges of
/// the frame connect to the unbounded component.
#[derive(Clone, Debug, PartialEq)]
pub struct HullRaster {
    pub origin_x: f64,
    pub px: f64,
    pub width: usize,
    pub height: usize,
    pub cells: Vec<bool>,
}

impl HullRaster {
    /// Empty frame.
    pub fn with_frame(origin_x: f64, px: f64, width: usize, height: usize) -> Self {
        Self {
            origin_x,
            px,
            width,
            height,
            cells: vec![false; width * height],
        }
    }

    /// Raster with no cells: the bare upper half-plane.
    pub fn empty(px: f64) -> Self {
        Self::with_frame(0.0, px, 0, 0)
    }

    /// Frame covering `points` plus `margin` pixels on the left, right and
    /// top.
    pub fn frame_for(points: &[Complex64], px: f64, margin: usize) -> Self {
        let (mut xmin, mut xmax, mut ymax) = (0.0f64, 0.0f64, 0.0f64);
        if let Some(p) = points.first() {
            xmin = p.re;
            xmax = p.re;
        }
        for p in points {
            xmin = xmin.min(p.re);
            xmax = xmax.max(p.re);
            ymax = ymax.max(p.im);
        }
        let m = margin as f64 * px;
        let origin_x = xmin - m;
        let width = ((xmax + m - origin_x) / px).floor() as usize + 1;
        let height = ((ymax + m) / px).floor() as usize + 1;
        Self::with_frame(origin_x, px, width, height)
    }

    /// Rasterizes the polyline through `points` (8-connected segments) at
    /// pixel size `px`, with a margin of empty pixels around it.
    pub fn from_polyline(points: &[Complex64], px: f64) -> Self {
        let mut r = Self::frame_for(points, px, 4);
        r.draw_polyline(points);
        r
    }

    /// Vertical slit `[0, i h]`.
    pub fn slit(h: f64, px: f64) -> Self {
        Self::from_polyline(&[Complex64::new(0.0, 0.0), Complex64::new(0.0, h)], px)
    }

    /// Closed half-disk of radius `r` centered at 0, filled.
    pub fn half_disk(r: f64, px: f64) -> Self {
        let mut out = Self::frame_for(&[Complex64::new(-r, 0.0), Complex64::new(r, r)], px, 4);
        for row in 0..out.height {
            for col in 0..out.width {
                if out.center(col, row).norm() <= r {
                    out.set(col, row);
                }
            }
        }
        out
    }

    /// Polyline raster at the default resolution (diameter / 1024).
    pub fn from_polyline_default(points: &[Complex64]) -> Self {
        let diam = if points.is_empty() {
            0.0
        } else {
            segment_diameter(points).unwrap_or(0.0)
        };
        let px = if diam > 0.0 {
            diam / DEFAULT_RESOLUTION_DIVISOR
        } else {
            1e-3
        };
        Self::from_polyline(points, px)
    }

    #[inline]
    pub fn index(&self, col: usize, row: usize) -> usize {
        row * self.width + col
    }

    /// Cell containing `z`, if inside the frame. Points with a slightly
    /// negative imaginary part map to row 0.
    pub fn cell_of(&self, z: Complex64) -> Option<(usize, usize)> {
        let c = ((z.re - self.origin_x) / self.px).floor();
        let r = (z.im / self.px).floor().max(0.0);
        if c < 0.0 || r < 0.0 || c >= self.width as f64 || r >= self.height as f64 {
            return None;
        }
        Some((c as usize, r as usize))
    }

    /// Cell containing `z`, clamped into the frame.
    fn cell_clamped(&self, z: Complex64) -> (i64, i64) {
        let c = ((z.re - self.origin_x) / self.px).floor() as i64;
        let r = (z.im / self.px).floor().max(0.0) as i64;
        (
            c.clamp(0, self.width as i64 - 1),
            r.clamp(0, self.height as i64 - 1),
        )
    }

    pub fn center(&self, col: usize, row: usize) -> Complex64 {
        Complex64::new(
            self.origin_x + (col as f64 + 0.5) * self.px,
            (row as f64 + 0.5) * self.px,
        )
    }

    pub fn occupied(&self, col: usize, row: usize) -> bool {
        self.cells[self.index(col, row)]
    }

    pub fn set(&mut self, col: usize, row: usize) {
        let i = self.index(col, row);
        self.cells[i] = true;
    }

    pub fn count(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.cells.iter().any(|&c| c)
    }

    pub fn area(&self) -> f64 {
        self.count() as f64 * self.px * self.px
    }

    /// Marks every cell on the 8-connected digital segment from `a` to `b`
    /// and calls `mark` on each cell index as it is set.
    pub fn draw_segment_with(&mut self, a: Complex64, b: Complex64, mut mark: impl FnMut(usize)) {
        if self.width == 0 || self.height == 0 {
            return;
        }
        let (mut x0, mut y0) = self.cell_clamped(a);
        let (x1, y1) = self.cell_clamped(b);
        let dx = (x1 - x0).abs();
        let dy = -(y1 - y0).abs();
        let sx = if x0 < x1 { 1 } else { -1 };
        let sy = if y0 < y1 { 1 } else { -1 };
        let mut err = dx + dy;
        loop {
            let i = self.index(x0 as usize, y0 as usize);
            self.cells[i] = true;
            mark(i);
            if x0 == x1 && y0 == y1 {
                break;
            }
            let e2 = 2 * err;
            if e2 >= dy {
                err += dy;
                x0 += sx;
            }
            if e2 <= dx {
                err += dx;
                y0 += sy;
            }
        }
    }

    pub fn draw_polyline(&mut self, points: &[Complex64]) {
        if let Some(&p) = points.first() {
            self.draw_segment_with(p, p, |_| {});
        }
        for w in points.windows(2) {
            self.draw_segment_with(w[0], w[1], |_| {});
        }
    }

    /// Tight bounding box of the occupied cells as
    /// `(col_min, col_max, row_min, row_max)`.
    pub fn bounding_box(&self) -> Option<(usize, usize, usize, usize)> {
        let mut bb: Option<(usize, usize, usize, usize)> = None;
        for r in 0..self.height {
            for c in 0..self.width {
                if self.occupied(c, r) {
                    bb = Some(match bb {
                        None => (c, c, r, r),
                        Some((c0, c1, r0, r1)) => (c0.min(c), c1.max(c), r0.min(r), r1.max(r)),
                    });
                }
            }
        }
        bb
    }

    /// World-coordinate rectangle `(xmin, xmax, ymin, ymax)` of the occupied
    /// cells (cell edges).
    pub fn bounding_box_world(&self) -> Option<(f64, f64, f64, f64)> {
        self.bounding_box().map(|(c0, c1, r0, r1)| {
            (
                self.origin_x + c0 as f64 * self.px,
                self.origin_x + (c1 + 1) as f64 * self.px,
                r0 as f64 * self.px,
                (r1 + 1) as f64 * self.px,
            )
        })
    }

    /// Diagonal of the occupied bounding box, an upper bound on the hull
    /// diameter.
    pub fn diameter_bound(&self) -> f64 {
        self.bounding_box_world()
            .map(|(x0, x1, y0, y1)| ((x1 - x0).powi(2) + (y1 - y0).powi(2)).sqrt())
            .unwrap_or(0.0)
    }

    /// Cells of the empty region reachable from the top, left or right edge
    /// of the frame through 4-connected empty cells.
    pub(crate) fn outside_mask(&self) -> Vec<bool> {
        let (w, h) = (self.width, self.height);
        let mut seen = vec![false; w * h];
        let mut queue = VecDeque::new();
        let seed = |c: usize, r: usize, seen: &mut Vec<bool>, q: &mut VecDeque<usize>| {
            let i = r * w + c;
            if !self.cells[i] && !seen[i] {
                seen[i] = true;
                q.push_back(i);
            }
        };
        if w == 0 || h == 0 {
            return seen;
        }
        for c in 0..w {
            seed(c, h - 1, &mut seen, &mut queue);
        }
        for r in 0..h {
            seed(0, r, &mut seen, &mut queue);
            seed(w - 1, r, &mut seen, &mut queue);
        }
        while let Some(i) = queue.pop_front() {
            let (c, r) = (i % w, i / w);
            let mut visit = |j: usize| {
                if !self.cells[j] && !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            };
            if c > 0 {
                visit(i - 1);
            }
            if c + 1 < w {
                visit(i + 1);
            }
            if r > 0 {
                visit(i - w);
            }
            if r + 1 < h {
                visit(i + w);
            }
        }
        seen
    }

    /// The raster as a binary PGM (P5) image, top row first, occupied = 255.
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        for r in (0..self.height).rev() {
            for c in 0..self.width {
                out.push(if self.occupied(c, r) { 255 } else { 0 });
            }
        }
        out
    }
}

/// Adds every bounded complementary component to the occupancy.
pub fn fill_hull(raster: &HullRaster) -> HullRaster {
    let outside = raster.outside_mask();
    let mut out = raster.clone();
    for (cell, out_cell) in out.cells.iter_mut().zip(&outside) {
        if !*out_cell {
            *cell = true;
        }
    }
    out
}

/// Prefix-fill times for a polyline drawn segment by segment.
///
/// `draw_time[i]` is the index of the first segment that marked cell `i`
/// (`usize::MAX` if never marked). Returns, per cell, the smallest prefix
/// index `k` for which the cell belongs to the filled hull of the first `k`
/// segments, i.e. the widest-path bottleneck from the frame edges.
/// `usize::MAX` marks cells outside the final hull.
pub fn fill_times(raster: &HullRaster, draw_time: &[usize]) -> Vec<usize> {
    let (w, h) = (raster.width, raster.height);
    let mut best = vec![0usize; w * h];
    let mut settled = vec![false; w * h];
    let mut heap = BinaryHeap::new();
    if w == 0 || h == 0 {
        return best;
    }
    let push_seed = |i: usize, heap: &mut BinaryHeap<(usize, usize)>, best: &mut Vec<usize>| {
        best[i] = best[i].max(draw_time[i]);
        heap.push((draw_time[i], i));
    };
    for c in 0..w {
        push_seed((h - 1) * w + c, &mut heap, &mut best);
    }
    for r in 0..h {
        push_seed(r * w, &mut heap, &mut best);
        push_seed(r * w + w - 1, &mut heap, &mut best);
    }
    while let Some((val, i)) = heap.pop() {
        if settled[i] || val < best[i] {
            continue;
        }
        settled[i] = true;
        let (c, r) = (i % w, i / w);
        let mut relax = |j: usize| {
            if settled[j] {
                return;
            }
            let cand = val.min(draw_time[j]);
            if cand > best[j] {
                best[j] = cand;
                heap.push((cand, j));
            }
        };
        if c > 0 {
            relax(i - 1);
        }
        if c + 1 < w {
            relax(i + 1);
        }
        if r > 0 {
            relax(i - w);
        }
        if r + 1 < h {
            relax(i + w);
        }
    }
    best
}
