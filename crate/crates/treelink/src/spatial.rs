//! Planar geometry: points, rectangular domains, rigid transforms about a
//! domain midpoint, and a uniform grid index for bounding-box candidate
//! queries.

use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

/// A location in the plane, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const ORIGIN: Point2 = Point2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn norm2(&self) -> f64 {
        self.x * self.x + self.y * self.y
    }

    pub fn dist2(&self, other: &Point2) -> f64 {
        (*self - *other).norm2()
    }

    pub fn dist(&self, other: &Point2) -> f64 {
        self.dist2(other).sqrt()
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, rhs: Point2) -> Point2 {
        Point2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, rhs: Point2) -> Point2 {
        Point2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, k: f64) -> Point2 {
        Point2::new(self.x * k, self.y * k)
    }
}

/// Axis-aligned rectangle `[xmin, xmax] × [ymin, ymax]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub xmin: f64,
    pub ymin: f64,
    pub xmax: f64,
    pub ymax: f64,
}

impl Domain {
    /// Panics unless `xmin < xmax` and `ymin < ymax`.
    pub fn new(xmin: f64, ymin: f64, xmax: f64, ymax: f64) -> Self {
        assert!(
            xmin < xmax && ymin < ymax,
            "degenerate domain [{xmin}, {xmax}] x [{ymin}, {ymax}]"
        );
        Self {
            xmin,
            ymin,
            xmax,
            ymax,
        }
    }

    pub fn square(origin: f64, side: f64) -> Self {
        Self::new(origin, origin, origin + side, origin + side)
    }

    pub fn is_valid(&self) -> bool {
        self.xmin < self.xmax && self.ymin < self.ymax
    }

    pub fn midpoint(&self) -> Point2 {
        Point2::new(0.5 * (self.xmin + self.xmax), 0.5 * (self.ymin + self.ymax))
    }

    pub fn width(&self) -> f64 {
        self.xmax - self.xmin
    }

    pub fn height(&self) -> f64 {
        self.ymax - self.ymin
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn diagonal(&self) -> f64 {
        self.width().hypot(self.height())
    }

    pub fn contains(&self, p: &Point2) -> bool {
        p.x >= self.xmin && p.x <= self.xmax && p.y >= self.ymin && p.y <= self.ymax
    }

    /// Nearest point of the (closed) domain.
    pub fn clamp(&self, p: &Point2) -> Point2 {
        Point2::new(
            p.x.clamp(self.xmin, self.xmax),
            p.y.clamp(self.ymin, self.ymax),
        )
    }

    /// Distance from an interior point to the nearest edge; negative outside.
    pub fn distance_to_boundary(&self, p: &Point2) -> f64 {
        let dx = (p.x - self.xmin).min(self.xmax - p.x);
        let dy = (p.y - self.ymin).min(self.ymax - p.y);
        dx.min(dy)
    }
}

/// Moves every side of `d` outward by `margin` meters.
pub fn expand_domain(d: &Domain, margin: f64) -> Domain {
    assert!(margin >= 0.0, "negative margin {margin}");
    Domain {
        xmin: d.xmin - margin,
        ymin: d.ymin - margin,
        xmax: d.xmax + margin,
        ymax: d.ymax + margin,
    }
}

/// Counterclockwise rotation by `theta` about `mu`, followed by translation `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigidTransform {
    pub theta: f64,
    pub t: Point2,
    pub mu: Point2,
}

impl RigidTransform {
    pub fn identity(mu: Point2) -> Self {
        Self {
            theta: 0.0,
            t: Point2::ORIGIN,
            mu,
        }
    }

    pub fn new(theta: f64, t: Point2, mu: Point2) -> Self {
        debug_assert!(theta.abs() <= std::f64::consts::PI);
        Self { theta, t, mu }
    }

    #[inline]
    pub fn apply(&self, s: &Point2) -> Point2 {
        apply_transform(self, s)
    }

    #[inline]
    pub fn invert(&self, y: &Point2) -> Point2 {
        invert_transform(self, y)
    }
}

/// `R(theta)(s - mu) + t + mu`.
#[inline]
pub fn apply_transform(tr: &RigidTransform, s: &Point2) -> Point2 {
    let (sin, cos) = tr.theta.sin_cos();
    let dx = s.x - tr.mu.x;
    let dy = s.y - tr.mu.y;
    Point2::new(
        cos * dx - sin * dy + tr.t.x + tr.mu.x,
        sin * dx + cos * dy + tr.t.y + tr.mu.y,
    )
}

/// `R(theta)^T (y - t - mu) + mu`, the exact inverse of [`apply_transform`].
#[inline]
pub fn invert_transform(tr: &RigidTransform, y: &Point2) -> Point2 {
    let (sin, cos) = tr.theta.sin_cos();
    let dx = y.x - tr.t.x - tr.mu.x;
    let dy = y.y - tr.t.y - tr.mu.y;
    Point2::new(
        cos * dx + sin * dy + tr.mu.x,
        -sin * dx + cos * dy + tr.mu.y,
    )
}

/// Uniform grid over the bounding rectangle of a point set.
///
/// Cells are stored densely in row-major order; each holds the identifiers
/// (positions in the indexed slice) of the points falling inside it.
#[derive(Debug, Clone)]
pub struct GridIndex {
    cell_size: f64,
    extent: Domain,
    ncols: usize,
    nrows: usize,
    cells: Vec<Vec<u32>>,
    points: Vec<Point2>,
}

impl GridIndex {
    pub fn build(points: &[Point2], cell_size: f64) -> Self {
        assert!(cell_size > 0.0, "cell size must be positive");
        let mut idx = GridIndex {
            cell_size,
            extent: Domain::new(0.0, 0.0, cell_size, cell_size),
            ncols: 1,
            nrows: 1,
            cells: vec![Vec::new()],
            points: Vec::new(),
        };
        idx.rebuild(points);
        idx
    }

    /// Re-indexes a new point set, reusing cell allocations where possible.
    pub fn rebuild(&mut self, points: &[Point2]) {
        self.points.clear();
        self.points.extend_from_slice(points);
        let half = 0.5 * self.cell_size;
        self.extent = if points.is_empty() {
            Domain::new(0.0, 0.0, self.cell_size, self.cell_size)
        } else {
            let (mut xmin, mut ymin) = (f64::INFINITY, f64::INFINITY);
            let (mut xmax, mut ymax) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
            for p in points {
                xmin = xmin.min(p.x);
                ymin = ymin.min(p.y);
                xmax = xmax.max(p.x);
                ymax = ymax.max(p.y);
            }
            Domain::new(xmin - half, ymin - half, xmax + half, ymax + half)
        };
        self.ncols = (self.extent.width() / self.cell_size).ceil().max(1.0) as usize;
        self.nrows = (self.extent.height() / self.cell_size).ceil().max(1.0) as usize;
        let ncells = self.ncols * self.nrows;
        for c in self.cells.iter_mut() {
            c.clear();
        }
        self.cells.resize_with(ncells, Vec::new);
        for (id, p) in points.iter().enumerate() {
            let (c, r) = self.cell_of(p);
            self.cells[r * self.ncols + c].push(id as u32);
        }
    }

    fn cell_of(&self, p: &Point2) -> (usize, usize) {
        let c = ((p.x - self.extent.xmin) / self.cell_size).floor();
        let r = ((p.y - self.extent.ymin) / self.cell_size).floor();
        (
            (c.max(0.0) as usize).min(self.ncols - 1),
            (r.max(0.0) as usize).min(self.nrows - 1),
        )
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn extent(&self) -> &Domain {
        &self.extent
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, id: usize) -> Point2 {
        self.points[id]
    }

    /// Chebyshev distance from `center` to the farthest corner of the extent;
    /// any box with at least this half-width contains every indexed point.
    pub fn covering_half_width(&self, center: &Point2) -> f64 {
        let e = &self.extent;
        (center.x - e.xmin)
            .abs()
            .max((e.xmax - center.x).abs())
            .max((center.y - e.ymin).abs())
            .max((e.ymax - center.y).abs())
    }

    /// Nearest indexed point by Euclidean distance, ties to the lowest
    /// identifier.
    pub fn nearest(&self, y: &Point2) -> Option<usize> {
        if self.points.is_empty() {
            return None;
        }
        let mut hw = self.cell_size;
        let limit = self.covering_half_width(y);
        let mut buf = Vec::new();
        loop {
            self.query_box_into(y, hw, &mut buf);
            let mut best: Option<(usize, f64)> = None;
            for &j in &buf {
                let d2 = self.points[j].dist2(y);
                if best.is_none_or(|(_, bd)| d2 < bd) {
                    best = Some((j, d2));
                }
            }
            match best {
                // anything outside the box is farther than hw >= d
                Some((j, d2)) if d2.sqrt() <= hw || hw >= limit => return Some(j),
                Some((_, d2)) => hw = d2.sqrt(),
                None => hw *= 2.0,
            }
        }
    }

    /// Identifiers of points inside the closed box, ascending.
    pub fn query_box(&self, center: &Point2, half_width: f64) -> Vec<usize> {
        let mut out = Vec::new();
        self.query_box_into(center, half_width, &mut out);
        out
    }

    /// Allocation-free variant of [`GridIndex::query_box`]; clears `out` first.
    pub fn query_box_into(&self, center: &Point2, half_width: f64, out: &mut Vec<usize>) {
        out.clear();
        if self.points.is_empty() {
            return;
        }
        let e = &self.extent;
        let lo_x = center.x - half_width;
        let hi_x = center.x + half_width;
        let lo_y = center.y - half_width;
        let hi_y = center.y + half_width;
        if hi_x < e.xmin || lo_x > e.xmax || hi_y < e.ymin || lo_y > e.ymax {
            return;
        }
        let c0 = (((lo_x - e.xmin) / self.cell_size).floor().max(0.0) as usize).min(self.ncols - 1);
        let c1 = (((hi_x - e.xmin) / self.cell_size).floor().max(0.0) as usize).min(self.ncols - 1);
        let r0 = (((lo_y - e.ymin) / self.cell_size).floor().max(0.0) as usize).min(self.nrows - 1);
        let r1 = (((hi_y - e.ymin) / self.cell_size).floor().max(0.0) as usize).min(self.nrows - 1);
        for r in r0..=r1 {
            let row = &self.cells[r * self.ncols..(r + 1) * self.ncols];
            for cell in &row[c0..=c1] {
                for &id in cell {
                    let p = &self.points[id as usize];
                    if (p.x - center.x).abs() <= half_width && (p.y - center.y).abs() <= half_width
                    {
                        out.push(id as usize);
                    }
                }
            }
        }
        out.sort_unstable();
    }
}
