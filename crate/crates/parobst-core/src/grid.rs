//! Discrete backward space-time cylinders.
//!
//! A [`SpaceTimeGrid`] is a tensor grid `x ∈ hZ^n ∩ [-R, R]^n`,
//! `t ∈ {-T, -T+k, …, 0}` with `n ∈ {1, 2}`. A [`Cylinder`] is a backward
//! parabolic cylinder `Q_r^-(X0) = B_r(x0) × (t0 - r², t0]` realized as a node
//! mask on that grid: the Euclidean ball becomes a staircase, the time slab is
//! half open so the bottom slice carries boundary data.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use std::sync::Arc;

/// Uniform tensor grid over `[-R, R]^n × [-T, 0]`.
///
/// Node coordinates are `x_i = (i - m) h` per axis (so `x = 0` is always a
/// node and the per-axis node count `2m + 1` is odd) and `t_j = -(L - 1 - j) k`
/// with `j = L - 1` the top slice `t = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeGrid<T: Scalar> {
    n: usize,
    /// Half node count per axis; axis 1 has 0 when `n = 1`.
    half_nodes: [usize; 2],
    h: T,
    /// Number of time levels, `L = T/k + 1`.
    levels: usize,
    k: T,
}

impl<T: Scalar> SpaceTimeGrid<T> {
    /// Build a grid from dimension, spatial half-width, spacing, time depth
    /// and time step.
    pub fn new(n: usize, half_width: T, h: T, depth: T, k: T) -> Result<Self> {
        if n != 1 && n != 2 {
            return Err(Error::BadDimension(n));
        }
        for (name, value) in [("h", h), ("k", k), ("R", half_width), ("T", depth)] {
            if !(value > T::zero()) || !value.is_finite() {
                return Err(Error::NonPositiveSpacing { name, value: value.as_f64() });
            }
        }
        let m = (half_width / h + T::lit(1e-9)).floor().as_f64() as usize;
        if 2 * m + 1 < 9 {
            return Err(Error::TooFewNodes { nodes: 2 * m + 1 });
        }
        let steps_f = (depth / k).as_f64();
        let steps = steps_f.round();
        if (steps_f - steps).abs() > 1e-6 {
            return Err(Error::DepthNotMultipleOfStep { ratio: steps_f });
        }
        let levels = steps as usize + 1;
        if levels < 5 {
            return Err(Error::TooFewLevels { levels });
        }
        let half_nodes = if n == 1 { [m, 0] } else { [m, m] };
        Ok(Self { n, half_nodes, h, levels, k })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn spacing(&self) -> T {
        self.h
    }

    pub fn time_step(&self) -> T {
        self.k
    }

    /// Effective half-width `m·h`.
    pub fn half_width(&self) -> T {
        T::from_usize(self.half_nodes[0]).unwrap() * self.h
    }

    /// Effective time depth `(L-1)·k`.
    pub fn depth(&self) -> T {
        T::from_usize(self.levels - 1).unwrap() * self.k
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    /// Nodes along axis `a` (1 when the axis is unused).
    pub fn nodes_along(&self, a: usize) -> usize {
        2 * self.half_nodes[a] + 1
    }

    pub fn half_nodes(&self, a: usize) -> usize {
        self.half_nodes[a]
    }

    /// Spatial node count per time level.
    pub fn spatial_count(&self) -> usize {
        self.nodes_along(0) * self.nodes_along(1)
    }

    pub fn node_count(&self) -> usize {
        self.spatial_count() * self.levels
    }

    /// Coordinate of the spatial multi-index; the second entry is 0 for n = 1.
    pub fn coord(&self, ix: [usize; 2]) -> [T; 2] {
        let c = |i: usize, a: usize| {
            (T::from_usize(i).unwrap() - T::from_usize(self.half_nodes[a]).unwrap()) * self.h
        };
        [c(ix[0], 0), c(ix[1], 1)]
    }

    pub fn time(&self, j: usize) -> T {
        -(T::from_usize(self.levels - 1 - j).unwrap()) * self.k
    }

    pub fn spatial_flat(&self, ix: [usize; 2]) -> usize {
        ix[0] + self.nodes_along(0) * ix[1]
    }

    pub fn spatial_unflat(&self, s: usize) -> [usize; 2] {
        let nx = self.nodes_along(0);
        [s % nx, s / nx]
    }

    pub fn node_flat(&self, ix: [usize; 2], j: usize) -> usize {
        j * self.spatial_count() + self.spatial_flat(ix)
    }

    /// Multi-index of a spatial coordinate if it is a node (within `1e-9 h`).
    pub fn spatial_index_of(&self, x: [T; 2]) -> Option<[usize; 2]> {
        let mut ix = [0usize; 2];
        for a in 0..2 {
            if a >= self.n {
                if x[a] != T::zero() {
                    return None;
                }
                continue;
            }
            let rel = (x[a] / self.h).as_f64();
            let i = rel.round();
            if (rel - i).abs() > 1e-9 {
                return None;
            }
            let i = i as i64 + self.half_nodes[a] as i64;
            if i < 0 || i as usize >= self.nodes_along(a) {
                return None;
            }
            ix[a] = i as usize;
        }
        Some(ix)
    }

    /// Level index of a time coordinate if it is a grid level.
    pub fn level_of(&self, t: T) -> Option<usize> {
        let rel = (t / self.k).as_f64();
        let j = rel.round();
        if (rel - j).abs() > 1e-9 {
            return None;
        }
        let j = j as i64 + (self.levels - 1) as i64;
        if j < 0 || j as usize >= self.levels {
            return None;
        }
        Some(j as usize)
    }

    /// Iterate spatial multi-indices in deterministic order (row-major).
    pub fn spatial_indices(&self) -> impl Iterator<Item = [usize; 2]> + '_ {
        let nx = self.nodes_along(0);
        let ny = self.nodes_along(1);
        (0..ny).flat_map(move |iy| (0..nx).map(move |ix| [ix, iy]))
    }

    /// True when the node has all 2n spatial neighbors and one earlier level.
    pub fn has_stencil(&self, ix: [usize; 2], j: usize) -> bool {
        if j == 0 {
            return false;
        }
        for a in 0..self.n {
            if ix[a] == 0 || ix[a] + 1 >= self.nodes_along(a) {
                return false;
            }
        }
        true
    }

    pub fn cell_measure(&self) -> T {
        let hn = if self.n == 1 { self.h } else { self.h * self.h };
        hn * self.k
    }

    pub fn into_arc(self) -> Arc<Self> {
        Arc::new(self)
    }
}

/// Backward cylinder `Q_r^-(X0)` anchored at a grid node.
#[derive(Debug, Clone)]
pub struct Cylinder<T: Scalar> {
    grid: Arc<SpaceTimeGrid<T>>,
    center_ix: [usize; 2],
    center_level: usize,
    radius: T,
    /// Spatial multi-indices inside the closed ball, row-major order.
    ball: Vec<[usize; 2]>,
    /// Ball nodes with a spatial neighbor outside the ball.
    lateral: Vec<[usize; 2]>,
    /// Ball minus lateral.
    inner: Vec<[usize; 2]>,
    /// Level carrying bottom boundary data, `t = t0 - r²` (or nearest below).
    bottom_level: usize,
    /// Spatial-flat flags for O(1) membership tests.
    ball_flag: Vec<bool>,
    inner_flag: Vec<bool>,
}

impl<T: Scalar> Cylinder<T> {
    /// Cylinder centered at the grid node nearest to `(x0, t0)`; errors if the
    /// center is not a node or the cylinder does not fit.
    pub fn new(grid: &Arc<SpaceTimeGrid<T>>, x0: [T; 2], t0: T, radius: T) -> Result<Self> {
        if !(radius > T::zero()) {
            return Err(Error::NonPositiveRadius(radius.as_f64()));
        }
        let center_ix = grid.spatial_index_of(x0).ok_or(Error::CenterOffGrid {
            x: x0[0].as_f64(),
            y: x0[1].as_f64(),
            t: t0.as_f64(),
        })?;
        let center_level = grid.level_of(t0).ok_or(Error::CenterOffGrid {
            x: x0[0].as_f64(),
            y: x0[1].as_f64(),
            t: t0.as_f64(),
        })?;
        let c = grid.coord(center_ix);
        for a in 0..grid.dim() {
            if (c[a].abs() + radius).as_f64() > grid.half_width().as_f64() + 1e-12 {
                return Err(Error::CylinderOutsideGrid {
                    reason: format!(
                        "ball of radius {} at {} exceeds half-width {}",
                        radius.as_f64(),
                        c[a].as_f64(),
                        grid.half_width().as_f64()
                    ),
                });
            }
        }
        let bottom_t = t0 - radius * radius;
        if bottom_t.as_f64() < -grid.depth().as_f64() - 1e-12 {
            return Err(Error::CylinderOutsideGrid {
                reason: format!(
                    "bottom slice t = {} is below the grid depth {}",
                    bottom_t.as_f64(),
                    grid.depth().as_f64()
                ),
            });
        }
        // Largest level with t <= t0 - r² (within rounding).
        let rel = (bottom_t / grid.time_step()).as_f64() + (grid.levels() - 1) as f64;
        let bottom_level = (rel + 1e-9).floor();
        if bottom_level < 0.0 {
            return Err(Error::CylinderOutsideGrid {
                reason: "no grid level at or below the cylinder bottom".into(),
            });
        }
        let bottom_level = bottom_level as usize;
        if bottom_level >= center_level {
            return Err(Error::EmptyMask { radius: radius.as_f64() });
        }

        let r2 = radius * radius * (T::one() + T::lit(1e-12));
        let mut ball = Vec::new();
        for ix in grid.spatial_indices() {
            let x = grid.coord(ix);
            let mut d2 = T::zero();
            for a in 0..grid.dim() {
                let d = x[a] - c[a];
                d2 = d2 + d * d;
            }
            if d2 <= r2 {
                ball.push(ix);
            }
        }
        if ball.is_empty() {
            return Err(Error::EmptyMask { radius: radius.as_f64() });
        }
        let in_ball = |ix: [i64; 2]| -> bool {
            for a in 0..grid.dim() {
                if ix[a] < 0 || ix[a] as usize >= grid.nodes_along(a) {
                    return false;
                }
            }
            let p = grid.coord([ix[0] as usize, ix[1] as usize]);
            let mut d2 = T::zero();
            for a in 0..grid.dim() {
                let d = p[a] - c[a];
                d2 = d2 + d * d;
            }
            d2 <= r2
        };
        let mut lateral = Vec::new();
        let mut inner = Vec::new();
        for &ix in &ball {
            let mut boundary = false;
            for a in 0..grid.dim() {
                for s in [-1i64, 1] {
                    let mut nb = [ix[0] as i64, ix[1] as i64];
                    nb[a] += s;
                    if !in_ball(nb) {
                        boundary = true;
                    }
                }
            }
            if boundary {
                lateral.push(ix);
            } else {
                inner.push(ix);
            }
        }
        let mut ball_flag = vec![false; grid.spatial_count()];
        for &ix in &ball {
            ball_flag[grid.spatial_flat(ix)] = true;
        }
        let mut inner_flag = vec![false; grid.spatial_count()];
        for &ix in &inner {
            inner_flag[grid.spatial_flat(ix)] = true;
        }
        Ok(Self {
            grid: Arc::clone(grid),
            center_ix,
            center_level,
            radius,
            ball,
            lateral,
            inner,
            bottom_level,
            ball_flag,
            inner_flag,
        })
    }

    pub fn grid(&self) -> &Arc<SpaceTimeGrid<T>> {
        &self.grid
    }

    pub fn radius(&self) -> T {
        self.radius
    }

    pub fn center(&self) -> ([T; 2], T) {
        (self.grid.coord(self.center_ix), self.grid.time(self.center_level))
    }

    pub fn center_ix(&self) -> [usize; 2] {
        self.center_ix
    }

    pub fn center_level(&self) -> usize {
        self.center_level
    }

    /// Levels belonging to the mask: `t0 - r² < t <= t0`.
    pub fn mask_levels(&self) -> core::ops::RangeInclusive<usize> {
        self.bottom_level + 1..=self.center_level
    }

    pub fn bottom_level(&self) -> usize {
        self.bottom_level
    }

    pub fn ball(&self) -> &[[usize; 2]] {
        &self.ball
    }

    pub fn lateral(&self) -> &[[usize; 2]] {
        &self.lateral
    }

    /// Spatially interior ball nodes (full Laplacian stencil inside the ball).
    pub fn inner(&self) -> &[[usize; 2]] {
        &self.inner
    }

    pub fn is_in_ball(&self, ix: [usize; 2]) -> bool {
        self.ball_flag[self.grid.spatial_flat(ix)]
    }

    pub fn is_inner_spatial(&self, ix: [usize; 2]) -> bool {
        self.inner_flag[self.grid.spatial_flat(ix)]
    }

    pub fn mask_node_count(&self) -> usize {
        self.ball.len() * (self.center_level - self.bottom_level)
    }

    /// Discrete measure: node count × h^n k.
    pub fn mask_measure(&self) -> T {
        T::from_usize(self.mask_node_count()).unwrap() * self.grid.cell_measure()
    }

    pub fn contains(&self, ix: [usize; 2], j: usize) -> bool {
        if j <= self.bottom_level || j > self.center_level {
            return false;
        }
        let c = self.grid.coord(self.center_ix);
        let x = self.grid.coord(ix);
        let mut d2 = T::zero();
        for a in 0..self.grid.dim() {
            let d = x[a] - c[a];
            d2 = d2 + d * d;
        }
        d2 <= self.radius * self.radius * (T::one() + T::lit(1e-12))
    }

    /// Iterate mask nodes level-major, row-major within a level.
    pub fn mask_nodes(&self) -> impl Iterator<Item = ([usize; 2], usize)> + '_ {
        self.mask_levels().flat_map(move |j| self.ball.iter().map(move |&ix| (ix, j)))
    }

    /// Parabolic boundary: bottom slice (whole ball) then the lateral shell of
    /// every mask level, in deterministic order.
    pub fn parabolic_boundary(&self) -> impl Iterator<Item = ([usize; 2], usize)> + '_ {
        let bottom = self.ball.iter().map(move |&ix| (ix, self.bottom_level));
        let shell = self
            .mask_levels()
            .flat_map(move |j| self.lateral.iter().map(move |&ix| (ix, j)));
        bottom.chain(shell)
    }

    /// Interior nodes: mask nodes off the lateral shell.
    pub fn interior_nodes(&self) -> impl Iterator<Item = ([usize; 2], usize)> + '_ {
        self.mask_levels().flat_map(move |j| self.inner.iter().map(move |&ix| (ix, j)))
    }

    /// True when every mask node has its differentiation stencil on the grid.
    pub fn has_stencil_margin(&self) -> bool {
        self.mask_levels()
            .next()
            .map(|j0| j0 >= 1)
            .unwrap_or(false)
            && self.ball.iter().all(|&ix| {
                (0..self.grid.dim())
                    .all(|a| ix[a] >= 1 && ix[a] + 1 < self.grid.nodes_along(a))
            })
    }
}

/// Checks that `r` maps grid nodes to grid nodes under parabolic rescaling:
/// `r/h'` and `r²/k'` must be integers for the target spacing.
pub fn dyadic_compatible<T: Scalar>(grid: &SpaceTimeGrid<T>, r: T) -> bool {
    if !(r > T::zero()) {
        return false;
    }
    let a = (r / grid.spacing()).as_f64();
    let b = ((r * r) / grid.time_step()).as_f64();
    (a - a.round()).abs() < 1e-9 && a.round() >= 1.0 && (b - b.round()).abs() < 1e-9 && b.round() >= 1.0
}
