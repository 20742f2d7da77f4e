//! Sampled space-time scalar fields with an optional exact evaluator.

use crate::error::{Error, Result};
use crate::grid::SpaceTimeGrid;
use crate::scalar::Scalar;
use std::sync::Arc;

/// Closed-form evaluator `(x, t) -> value`; analytic fields bypass all
/// interpolation error in quadratures that can use it.
pub type Evaluator<T> = Arc<dyn Fn([T; 2], T) -> T + Send + Sync>;

/// A scalar function sampled at every grid node, optionally backed by the
/// exact closed form it was sampled from.
#[derive(Clone)]
pub struct ScalarField<T: Scalar> {
    grid: Arc<SpaceTimeGrid<T>>,
    values: Vec<T>,
    evaluator: Option<Evaluator<T>>,
}

impl<T: Scalar> ScalarField<T> {
    pub fn zeros(grid: &Arc<SpaceTimeGrid<T>>) -> Self {
        Self {
            grid: Arc::clone(grid),
            values: vec![T::zero(); grid.node_count()],
            evaluator: None,
        }
    }

    /// Sample a closed form at every node and keep the evaluator.
    pub fn from_fn<F>(grid: &Arc<SpaceTimeGrid<T>>, f: F) -> Self
    where
        F: Fn([T; 2], T) -> T + Send + Sync + 'static,
    {
        let f: Evaluator<T> = Arc::new(f);
        let mut field = Self::sampled_only(grid, f.as_ref());
        field.evaluator = Some(f);
        field
    }

    /// Sample a closed form without retaining it.
    pub fn sampled_only(grid: &Arc<SpaceTimeGrid<T>>, f: &dyn Fn([T; 2], T) -> T) -> Self {
        let mut values = Vec::with_capacity(grid.node_count());
        for j in 0..grid.levels() {
            let t = grid.time(j);
            for ix in grid.spatial_indices() {
                values.push(f(grid.coord(ix), t));
            }
        }
        Self { grid: Arc::clone(grid), values, evaluator: None }
    }

    pub fn from_values(grid: &Arc<SpaceTimeGrid<T>>, values: Vec<T>) -> Result<Self> {
        assert_eq!(values.len(), grid.node_count(), "value vector does not match grid");
        if let Some(node) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue { node });
        }
        Ok(Self { grid: Arc::clone(grid), values, evaluator: None })
    }

    pub fn constant(grid: &Arc<SpaceTimeGrid<T>>, c: T) -> Self {
        Self::from_fn(grid, move |_, _| c)
    }

    pub fn grid(&self) -> &Arc<SpaceTimeGrid<T>> {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        self.evaluator = None;
        &mut self.values
    }

    pub fn at(&self, ix: [usize; 2], j: usize) -> T {
        self.values[self.grid.node_flat(ix, j)]
    }

    pub fn at_flat(&self, node: usize) -> T {
        self.values[node]
    }

    pub fn set(&mut self, ix: [usize; 2], j: usize, v: T) {
        let node = self.grid.node_flat(ix, j);
        self.values[node] = v;
    }

    pub fn evaluator(&self) -> Option<&Evaluator<T>> {
        self.evaluator.as_ref()
    }

    pub fn with_evaluator(mut self, f: Evaluator<T>) -> Self {
        self.evaluator = Some(f);
        self
    }

    /// Evaluate at an arbitrary point, requiring the exact form.
    pub fn eval_exact(&self, x: [T; 2], t: T) -> Option<T> {
        self.evaluator.as_ref().map(|f| f(x, t))
    }

    /// Check that the samples agree with the evaluator at every node.
    pub fn samples_match_evaluator(&self, tol: T) -> bool {
        match &self.evaluator {
            None => true,
            Some(f) => {
                let g = &self.grid;
                (0..g.levels()).all(|j| {
                    let t = g.time(j);
                    g.spatial_indices()
                        .all(|ix| (self.at(ix, j) - f(g.coord(ix), t)).abs() <= tol)
                })
            }
        }
    }

    /// Pointwise linear combination `a·self + b·other` on a shared grid.
    pub fn axpy(&self, a: T, other: &Self, b: T) -> Self {
        assert!(Arc::ptr_eq(&self.grid, &other.grid) || self.grid == other.grid);
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&u, &v)| a * u + b * v)
            .collect();
        Self { grid: Arc::clone(&self.grid), values, evaluator: None }
    }

    /// Max |self - other| over all nodes.
    pub fn sup_diff(&self, other: &Self) -> T {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(&u, &v)| (u - v).abs())
            .fold(T::zero(), T::max)
    }
}

impl<T: Scalar> core::fmt::Debug for ScalarField<T> {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("ScalarField")
            .field("nodes", &self.values.len())
            .field("exact", &self.evaluator.is_some())
            .finish()
    }
}
