//! Diagnostic curves: a sequence of (radius, value) pairs.

use crate::scalar::Scalar;

/// Sequence `(r_i, value_i)` produced by the per-radius diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticCurve<T: Scalar> {
    points: Vec<(T, T)>,
}

impl<T: Scalar> DiagnosticCurve<T> {
    pub fn new(points: Vec<(T, T)>) -> Self {
        Self { points }
    }

    pub fn radii(&self) -> impl Iterator<Item = T> + '_ {
        self.points.iter().map(|&(r, _)| r)
    }

    pub fn values(&self) -> impl Iterator<Item = T> + '_ {
        self.points.iter().map(|&(_, v)| v)
    }

    pub fn points(&self) -> &[(T, T)] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// True when values are non-decreasing in radius within `tol`, after
    /// sorting points by radius.
    pub fn non_decreasing_within(&self, tol: T) -> bool {
        let mut pts = self.points.clone();
        pts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        pts.windows(2).all(|w| w[1].1 >= w[0].1 - tol)
    }
}
