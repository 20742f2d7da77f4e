//! Registry of closed-form solutions and diagnostic profiles.
//!
//! The obstacle problem admits `½((x·e - c)₊)²` for `f = 1` and `(t - t₀)₊`
//! for `f = -1`; caloric-polynomial data `½xᵀMx + mt` solve with the constant
//! `f = tr M - m`. The quartic is not an obstacle solution but drives the
//! higher-order decay diagnostics.

use crate::calculus::SymMat;
use crate::field::ScalarField;
use crate::grid::SpaceTimeGrid;
use crate::scalar::Scalar;
use std::sync::Arc;

#[derive(Debug, Clone)]
pub enum ExactSolution<T: Scalar> {
    /// `u = ½((x·e - c)₊)²` with unit direction `e`; `Hu = χ_{x·e > c}`, `f = 1`.
    Halfspace { e: [T; 2], offset: T },
    /// `u = ½xᵀMx + m·t`; `Hu = tr M - m` everywhere, coincidence set is a
    /// null set.
    Polynomial { m: SymMat<T>, mt: T },
    /// `u = (t - t0)₊`; `Hu = -χ_{t > t0}`, `f = -1`, `Λ = {t <= t0}`.
    TimeBarrier { t0: T },
    /// `u = x₁⁴` with `f = Hu = 12x₁²`; diagnostic profile only.
    Quartic,
}

impl<T: Scalar> ExactSolution<T> {
    pub fn name(&self) -> &'static str {
        match self {
            ExactSolution::Halfspace { .. } => "halfspace",
            ExactSolution::Polynomial { .. } => "polynomial",
            ExactSolution::TimeBarrier { .. } => "time_barrier",
            ExactSolution::Quartic => "quartic",
        }
    }

    /// True when the profile solves the obstacle equation `Hu = f·χ_{u≠0}`.
    pub fn is_obstacle_solution(&self) -> bool {
        !matches!(self, ExactSolution::Quartic)
    }

    pub fn eval_u(&self, x: [T; 2], t: T) -> T {
        match self {
            ExactSolution::Halfspace { e, offset } => {
                let d = (x[0] * e[0] + x[1] * e[1] - *offset).max(T::zero());
                d * d * T::lit(0.5)
            }
            ExactSolution::Polynomial { m, mt } => m.half_quadratic(x) + *mt * t,
            ExactSolution::TimeBarrier { t0 } => (t - *t0).max(T::zero()),
            ExactSolution::Quartic => x[0] * x[0] * x[0] * x[0],
        }
    }

    /// Right-hand side `f` on the active set.
    pub fn eval_f(&self, x: [T; 2], _t: T) -> T {
        match self {
            ExactSolution::Halfspace { .. } => T::one(),
            ExactSolution::Polynomial { m, mt } => m.trace() - *mt,
            ExactSolution::TimeBarrier { .. } => -T::one(),
            ExactSolution::Quartic => T::lit(12.0) * x[0] * x[0],
        }
    }

    /// Exact coincidence set `{u = 0}`, used to seed the active-set solver.
    pub fn coincidence_predicate(&self) -> Arc<dyn Fn([T; 2], T) -> bool + Send + Sync> {
        match self.clone() {
            ExactSolution::Halfspace { e, offset } => {
                Arc::new(move |x: [T; 2], _| x[0] * e[0] + x[1] * e[1] <= offset)
            }
            ExactSolution::Polynomial { m, mt } => {
                Arc::new(move |x: [T; 2], t| (m.half_quadratic(x) + mt * t).abs() <= T::lit(1e-14))
            }
            ExactSolution::TimeBarrier { t0 } => Arc::new(move |_, t| t <= t0),
            ExactSolution::Quartic => Arc::new(|x: [T; 2], _| x[0] == T::zero()),
        }
    }

    pub fn u_field(&self, grid: &Arc<SpaceTimeGrid<T>>) -> ScalarField<T> {
        let me = self.clone();
        ScalarField::from_fn(grid, move |x, t| me.eval_u(x, t))
    }

    pub fn f_field(&self, grid: &Arc<SpaceTimeGrid<T>>) -> ScalarField<T> {
        let me = self.clone();
        ScalarField::from_fn(grid, move |x, t| me.eval_f(x, t))
    }

    /// One-line signatures for the registry listing.
    pub fn registry() -> Vec<(&'static str, &'static str, &'static str)> {
        vec![
            (
                "halfspace",
                "halfspace(e, offset)",
                "u = ((x.e - offset)+)^2 / 2 with f = 1; coincidence set {x.e <= offset}",
            ),
            (
                "polynomial",
                "polynomial(M, mt)",
                "u = x'Mx/2 + mt*t with constant f = tr M - mt; null coincidence set",
            ),
            (
                "time_barrier",
                "time_barrier(t0)",
                "u = (t - t0)+ with f = -1; coincidence set {t <= t0}",
            ),
            ("quartic", "quartic()", "u = x1^4 with f = 12 x1^2; diagnostic profile"),
        ]
    }
}
