//! The no-sign obstacle problem `Hu = f·χ_{u≠0}` on a backward cylinder:
//! active-set solver, coincidence set and free boundary extraction, and the
//! density / quadratic-growth diagnostic curves.
//!
//! The solver iterates `Ω^m = {|u^m| > tol_zero}` and resolves
//! `Hu^{m+1} = f·χ_{Ω^m}` with the nodes of the complement held at zero. The
//! pinning realizes `u = |∇u| = 0` off the active set; without it the exact
//! model solutions (which carry an O(1) stencil defect on the free boundary
//! line) are not fixed points of the discrete iteration. The problem is not
//! unique for sign-changing data, so the converged set depends on the
//! initialization; both initializations are available and reported.

use crate::calculus::tilde_d2;
use crate::curve::DiagnosticCurve;
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::grid::Cylinder;
use crate::heat::{solve_dirichlet_pinned, BoundaryData, DirichletProblem};
use crate::scalar::Scalar;

/// Node set where `|u| <= tol_zero`, restricted to interior nodes of the
/// domain cylinder. Flags are indexed by grid-flat node id.
#[derive(Debug, Clone)]
pub struct CoincidenceSet<T: Scalar> {
    domain: Cylinder<T>,
    mask: Vec<bool>,
    tol_zero: T,
}

impl<T: Scalar> CoincidenceSet<T> {
    pub fn domain(&self) -> &Cylinder<T> {
        &self.domain
    }

    pub fn tol_zero(&self) -> T {
        self.tol_zero
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn contains(&self, ix: [usize; 2], j: usize) -> bool {
        self.mask[self.domain.grid().node_flat(ix, j)]
    }

    /// Number of coincidence nodes.
    pub fn node_count(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    /// Interior-of-Λ test: a Λ node whose spatial neighbors and previous-time
    /// node (those inside the domain) are all in Λ.
    pub fn is_interior(&self, ix: [usize; 2], j: usize) -> bool {
        if !self.contains(ix, j) {
            return false;
        }
        let g = self.domain.grid();
        for a in 0..g.dim() {
            for s in [-1i64, 1] {
                let ni = ix[a] as i64 + s;
                if ni < 0 || ni as usize >= g.nodes_along(a) {
                    continue;
                }
                let mut nb = ix;
                nb[a] = ni as usize;
                if self.in_universe(nb, j) && !self.contains(nb, j) {
                    return false;
                }
            }
        }
        if j > 0 && self.in_universe(ix, j - 1) && !self.contains(ix, j - 1) {
            return false;
        }
        true
    }

    fn in_universe(&self, ix: [usize; 2], j: usize) -> bool {
        // Interior nodes of the domain cylinder are the Λ universe.
        j > self.domain.bottom_level()
            && j <= self.domain.center_level()
            && self.domain.is_inner_spatial(ix)
    }
}

/// Deterministic node set representing the discrete free boundary.
#[derive(Debug, Clone)]
pub struct FreeBoundary {
    pub nodes: Vec<([usize; 2], usize)>,
}

impl FreeBoundary {
    pub fn contains(&self, ix: [usize; 2], j: usize) -> bool {
        self.nodes.iter().any(|&(i, l)| i == ix && l == j)
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// `Λ = {|u| <= tol_zero}` over the interior nodes of the domain.
pub fn coincidence_set<T: Scalar>(
    u: &ScalarField<T>,
    domain: &Cylinder<T>,
    tol_zero: T,
) -> CoincidenceSet<T> {
    let g = domain.grid();
    let mut mask = vec![false; g.node_count()];
    for j in domain.mask_levels() {
        for &ix in domain.inner() {
            if u.at(ix, j).abs() <= tol_zero {
                mask[g.node_flat(ix, j)] = true;
            }
        }
    }
    CoincidenceSet { domain: domain.clone(), mask, tol_zero }
}

/// Discrete free boundary: a Λ-node with a non-Λ spatial neighbor, or a non-Λ
/// node whose same-position node one time level earlier is interior-Λ.
pub fn free_boundary<T: Scalar>(lambda: &CoincidenceSet<T>) -> FreeBoundary {
    let domain = &lambda.domain;
    let g = domain.grid();
    let mut nodes = Vec::new();
    for j in domain.mask_levels() {
        for &ix in domain.inner() {
            let in_lambda = lambda.contains(ix, j);
            let mut is_gamma = false;
            if in_lambda {
                'outer: for a in 0..g.dim() {
                    for s in [-1i64, 1] {
                        let ni = ix[a] as i64 + s;
                        if ni < 0 || ni as usize >= g.nodes_along(a) {
                            continue;
                        }
                        let mut nb = ix;
                        nb[a] = ni as usize;
                        if lambda.in_universe(nb, j) && !lambda.contains(nb, j) {
                            is_gamma = true;
                            break 'outer;
                        }
                    }
                }
            } else if j > 0 && lambda.is_interior(ix, j - 1) {
                is_gamma = true;
            }
            if is_gamma {
                nodes.push((ix, j));
            }
        }
    }
    FreeBoundary { nodes }
}

/// How the active-set iteration is initialized.
#[derive(Clone, Default)]
pub enum ActiveSetInit<T: Scalar> {
    /// `u⁰` solves `Hu = f`; the first active set is `{|u⁰| > tol_zero}`.
    #[default]
    FullSolve,
    /// Seed the coincidence set from a predicate over `(x, t)`.
    Seeded(std::sync::Arc<dyn Fn([T; 2], T) -> bool + Send + Sync>),
}

impl<T: Scalar> core::fmt::Debug for ActiveSetInit<T> {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            ActiveSetInit::FullSolve => f.write_str("FullSolve"),
            ActiveSetInit::Seeded(_) => f.write_str("Seeded(..)"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolverParams<T: Scalar> {
    /// Zero threshold; `None` uses the default `h²/10` (the solution vanishes
    /// quadratically at the free boundary, so a sub-h² threshold separates the
    /// kink band from genuine zeros).
    pub tol_zero: Option<T>,
    pub max_iter: usize,
    pub init: ActiveSetInit<T>,
}

impl<T: Scalar> Default for SolverParams<T> {
    fn default() -> Self {
        Self { tol_zero: None, max_iter: 64, init: ActiveSetInit::FullSolve }
    }
}

#[derive(Debug, Clone)]
pub struct ObstacleProblem<T: Scalar> {
    pub domain: Cylinder<T>,
    pub f: ScalarField<T>,
    pub boundary: BoundaryData<T>,
    pub params: SolverParams<T>,
}

/// Convergence record of a no-sign solve.
#[derive(Debug, Clone)]
pub struct SolveOutcome<T: Scalar> {
    pub u: ScalarField<T>,
    pub coincidence: CoincidenceSet<T>,
    pub iterations: usize,
    pub converged: bool,
    pub damped: bool,
    /// Max `|Hu - f·χ_{Λᶜ}|` over interior nodes away from the Λ interface.
    pub residual_off_band: T,
    /// Max over the interface band, where the indicator defect is O(|f|).
    pub residual_band: T,
}

/// Fixed-point active-set solve of `Hu = f·χ_{u≠0}`, `u = g` on `∂_p`.
pub fn solve_no_sign<T: Scalar>(p: &ObstacleProblem<T>) -> Result<SolveOutcome<T>> {
    let g = p.domain.grid();
    let tol = p
        .params
        .tol_zero
        .unwrap_or_else(|| g.spacing() * g.spacing() * T::lit(0.1));

    let solve_with = |pins: &[bool], multiplier: Option<&[T]>| -> Result<ScalarField<T>> {
        let mut rhs = p.f.clone();
        {
            let vals = rhs.values_mut();
            match multiplier {
                None => {
                    for (node, flag) in pins.iter().enumerate() {
                        if *flag {
                            vals[node] = T::zero();
                        }
                    }
                }
                Some(m) => {
                    for (node, v) in vals.iter_mut().enumerate() {
                        *v = *v * m[node];
                    }
                }
            }
        }
        let dp = DirichletProblem::new(p.domain.clone(), rhs, p.boundary.clone())?;
        solve_dirichlet_pinned(&dp, Some(pins))
    };

    let lambda_of = |u: &ScalarField<T>| -> Vec<bool> {
        coincidence_set(u, &p.domain, tol).mask
    };

    let mut lambda = match &p.params.init {
        ActiveSetInit::FullSolve => {
            let no_pins = vec![false; g.node_count()];
            let u0 = solve_with(&no_pins, None)?;
            lambda_of(&u0)
        }
        ActiveSetInit::Seeded(pred) => {
            let mut mask = vec![false; g.node_count()];
            for j in p.domain.mask_levels() {
                let t = g.time(j);
                for &ix in p.domain.inner() {
                    if pred(g.coord(ix), t) {
                        mask[g.node_flat(ix, j)] = true;
                    }
                }
            }
            mask
        }
    };

    let mut prev_lambda: Option<Vec<bool>> = None;
    let mut damped = false;
    let mut converged = false;
    let mut iterations = 0;
    let mut u = solve_with(&lambda, None)?;

    while iterations < p.params.max_iter {
        iterations += 1;
        let next = lambda_of(&u);
        if next == lambda {
            converged = true;
            break;
        }
        if prev_lambda.as_deref() == Some(next.as_slice()) {
            // 2-cycle: one damped step with the averaged indicator, then resume.
            damped = true;
            let half = T::lit(0.5);
            let mult: Vec<T> = lambda
                .iter()
                .zip(&next)
                .map(|(&a, &b)| {
                    let xa = if a { T::zero() } else { T::one() };
                    let xb = if b { T::zero() } else { T::one() };
                    (xa + xb) * half
                })
                .collect();
            let both: Vec<bool> = lambda.iter().zip(&next).map(|(&a, &b)| a && b).collect();
            u = solve_with(&both, Some(&mult))?;
            prev_lambda = None;
            lambda = lambda_of(&u);
            u = solve_with(&lambda, None)?;
            continue;
        }
        prev_lambda = Some(std::mem::replace(&mut lambda, next));
        u = solve_with(&lambda, None)?;
    }

    let coincidence = CoincidenceSet { domain: p.domain.clone(), mask: lambda, tol_zero: tol };
    let (residual_off_band, residual_band) = self_consistency(&u, &p.f, &coincidence)?;
    Ok(SolveOutcome { u, coincidence, iterations, converged, damped, residual_off_band, residual_band })
}

/// Max `|Hu - f·χ_{Λᶜ}|` split into (off-interface, interface-band) parts. The
/// band is where the indicator changes across a stencil, carrying the
/// irreducible O(|f|) defect of any kinked discrete solution.
pub fn self_consistency<T: Scalar>(
    u: &ScalarField<T>,
    f: &ScalarField<T>,
    lambda: &CoincidenceSet<T>,
) -> Result<(T, T)> {
    let domain = lambda.domain();
    let g = domain.grid();
    let mut off_band = T::zero();
    let mut band = T::zero();
    for j in domain.mask_levels() {
        for &ix in domain.inner() {
            if !g.has_stencil(ix, j) {
                continue;
            }
            let here = lambda.contains(ix, j);
            let mut near_interface = false;
            for a in 0..g.dim() {
                for s in [-1i64, 1] {
                    let ni = ix[a] as i64 + s;
                    if ni < 0 || ni as usize >= g.nodes_along(a) {
                        continue;
                    }
                    let mut nb = ix;
                    nb[a] = ni as usize;
                    if lambda.in_universe(nb, j) && lambda.contains(nb, j) != here {
                        near_interface = true;
                    }
                }
            }
            if j > 0 && lambda.in_universe(ix, j - 1) && lambda.contains(ix, j - 1) != here {
                near_interface = true;
            }
            let rhs = if here { T::zero() } else { f.at(ix, j) };
            let res = (tilde_d2(u, ix, j)?.heat() - rhs).abs();
            if near_interface {
                band = band.max(res);
            } else {
                off_band = off_band.max(res);
            }
        }
    }
    Ok((off_band, band))
}

/// Coincidence density `λ_r = |Λ ∩ Q_r⁻(X⁰)| / |Q_r⁻(X⁰)|` per radius.
pub fn density_curve<T: Scalar>(
    lambda: &CoincidenceSet<T>,
    x0: [T; 2],
    t0: T,
    radii: &[T],
) -> Result<DiagnosticCurve<T>> {
    let g = lambda.domain().grid();
    let mut pts = Vec::with_capacity(radii.len());
    for &r in radii {
        let q = Cylinder::new(g, x0, t0, r)?;
        let total = q.mask_node_count();
        if total == 0 {
            return Err(Error::EmptyMask { radius: r.as_f64() });
        }
        let mut inside = 0usize;
        for (ix, j) in q.mask_nodes() {
            if lambda.contains(ix, j) {
                inside += 1;
            }
        }
        pts.push((r, T::from_usize(inside).unwrap() / T::from_usize(total).unwrap()));
    }
    Ok(DiagnosticCurve::new(pts))
}

/// Growth constants `M_r = sup_{Q_r⁻(X⁰)} |u| / r²`.
pub fn quadratic_growth_curve<T: Scalar>(
    u: &ScalarField<T>,
    x0: [T; 2],
    t0: T,
    radii: &[T],
) -> Result<DiagnosticCurve<T>> {
    let g = u.grid();
    let mut pts = Vec::with_capacity(radii.len());
    for &r in radii {
        let q = Cylinder::new(g, x0, t0, r)?;
        let sup = crate::calculus::sup_norm_on(u, &q)?;
        pts.push((r, sup / (r * r)));
    }
    Ok(DiagnosticCurve::new(pts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::SpaceTimeGrid;
    use std::sync::Arc;

    fn grid(h: f64, k: f64) -> Arc<SpaceTimeGrid<f64>> {
        SpaceTimeGrid::new(1, 1.0, h, 1.0, k).unwrap().into_arc()
    }

    fn halfspace(x: [f64; 2], _: f64) -> f64 {
        0.5 * x[0].max(0.0).powi(2)
    }

    fn halfspace_problem(g: &Arc<SpaceTimeGrid<f64>>, init: ActiveSetInit<f64>) -> ObstacleProblem<f64> {
        let q = Cylinder::new(g, [0.0, 0.0], 0.0, 1.0).unwrap();
        ObstacleProblem {
            domain: q.clone(),
            f: ScalarField::constant(g, 1.0),
            boundary: BoundaryData::from_fn(&q, halfspace).unwrap(),
            params: SolverParams { init, ..Default::default() },
        }
    }

    #[test]
    fn seeded_halfspace_is_an_exact_fixed_point() {
        let g = grid(1.0 / 16.0, 1.0 / 16.0);
        let p = halfspace_problem(&g, ActiveSetInit::Seeded(std::sync::Arc::new(|x: [f64; 2], _| x[0] <= 0.0)));
        let out = solve_no_sign(&p).unwrap();
        assert!(out.converged);
        assert!(out.iterations <= 3);
        for (ix, j) in p.domain.mask_nodes() {
            let e = halfspace(g.coord(ix), g.time(j));
            assert!((out.u.at(ix, j) - e).abs() < 1e-11, "node {ix:?}");
        }
        // Λ = {x <= 0}: off-band residual is solver roundoff, band carries the
        // kink defect ≈ |f|/2.
        assert!(out.residual_off_band < 1e-9);
        assert!(out.residual_band > 0.1 && out.residual_band < 1.0);
    }

    #[test]
    fn full_solve_init_converges_to_the_ae_active_solution() {
        let g = grid(1.0 / 16.0, 1.0 / 16.0);
        let p = halfspace_problem(&g, ActiveSetInit::FullSolve);
        let out = solve_no_sign(&p).unwrap();
        assert!(out.converged);
        // The a.e.-active branch: almost no coincidence nodes.
        let interior_count = p.domain.inner().len() * p.domain.mask_levels().count();
        assert!(out.coincidence.node_count() < interior_count / 20);
        assert!(out.residual_off_band < 1e-9);
    }

    #[test]
    fn pure_quadratic_has_measure_zero_coincidence() {
        let g = grid(1.0 / 16.0, 1.0 / 16.0);
        let q = Cylinder::new(&g, [0.0, 0.0], 0.0, 1.0).unwrap();
        let p = ObstacleProblem {
            domain: q.clone(),
            f: ScalarField::constant(&g, 1.0),
            boundary: BoundaryData::from_fn(&q, |x, _| 0.5 * x[0] * x[0]).unwrap(),
            params: SolverParams {
                init: ActiveSetInit::Seeded(std::sync::Arc::new(|x: [f64; 2], _| x[0] == 0.0)),
                ..Default::default()
            },
        };
        let out = solve_no_sign(&p).unwrap();
        assert!(out.converged);
        for (ix, j) in q.mask_nodes() {
            let x = g.coord(ix);
            assert!((out.u.at(ix, j) - 0.5 * x[0] * x[0]).abs() < 1e-11);
        }
        // Λ is the single line {x = 0}.
        assert_eq!(out.coincidence.node_count(), q.mask_levels().count());
    }

    #[test]
    fn time_barrier_recovered_with_order_k() {
        // u = (t + ½)⁺ solves Hu = -χ_{t > -½}; with T/k odd the temporal kink
        // falls midway between levels and the error is exactly k/2.
        let err_for = |steps: usize| -> f64 {
            let k = 1.0 / steps as f64;
            let g = SpaceTimeGrid::new(1, 1.0, 1.0 / 16.0, 1.0, k).unwrap().into_arc();
            let q = Cylinder::new(&g, [0.0, 0.0], 0.0, 1.0).unwrap();
            let exact = |_x: [f64; 2], t: f64| (t + 0.5).max(0.0);
            let p = ObstacleProblem {
                domain: q.clone(),
                f: ScalarField::constant(&g, -1.0),
                boundary: BoundaryData::from_fn(&q, exact).unwrap(),
                params: SolverParams {
                    init: ActiveSetInit::Seeded(std::sync::Arc::new(|_: [f64; 2], t| t <= -0.5)),
                    ..Default::default()
                },
            };
            let out = solve_no_sign(&p).unwrap();
            assert!(out.converged);
            let mut worst: f64 = 0.0;
            for (ix, j) in q.mask_nodes() {
                worst = worst.max((out.u.at(ix, j) - exact(g.coord(ix), g.time(j))).abs());
            }
            worst
        };
        let e1 = err_for(17);
        let e2 = err_for(33);
        // Sup error bounded by k/2 (the temporal kink defect) and first order.
        assert!(e1 <= 0.5 / 17.0 + 1e-12, "e1 = {e1}");
        assert!(e2 <= 0.5 / 33.0 + 1e-12, "e2 = {e2}");
        let order = (e1 / e2).ln() / (33.0f64 / 17.0).ln();
        assert!(order > 0.9, "order {order} (e1={e1}, e2={e2})");
    }

    #[test]
    fn coincidence_set_thresholding() {
        let g = grid(1.0 / 16.0, 1.0 / 16.0);
        let q = Cylinder::new(&g, [0.0, 0.0], 0.0, 1.0).unwrap();
        let one = ScalarField::constant(&g, 1.0);
        assert_eq!(coincidence_set(&one, &q, 1e-4).node_count(), 0);
        let zero = ScalarField::zeros(&g);
        let interior_count = q.inner().len() * q.mask_levels().count();
        assert_eq!(coincidence_set(&zero, &q, 1e-4).node_count(), interior_count);

        // Monotone in the threshold.
        let u = ScalarField::from_fn(&g, halfspace);
        let small = coincidence_set(&u, &q, 1e-6);
        let large = coincidence_set(&u, &q, 1e-2);
        for (node, &flag) in small.mask().iter().enumerate() {
            assert!(!flag || large.mask()[node]);
        }
    }

    #[test]
    fn free_boundary_of_halfspace_is_the_kink_line() {
        let g = grid(1.0 / 16.0, 1.0 / 16.0);
        let q = Cylinder::new(&g, [0.0, 0.0], 0.0, 1.0).unwrap();
        let u = ScalarField::from_fn(&g, halfspace);
        let lam = coincidence_set(&u, &q, g.spacing() * g.spacing() / 10.0);
        let gamma = free_boundary(&lam);
        assert!(!gamma.is_empty());
        for &(ix, _) in &gamma.nodes {
            assert_eq!(g.coord(ix)[0], 0.0);
        }
        assert_eq!(gamma.nodes.len(), q.mask_levels().count());
    }

    #[test]
    fn free_boundary_of_time_barrier_is_one_slice() {
        let g = SpaceTimeGrid::new(1, 1.0, 1.0 / 16.0, 1.0, 1.0 / 16.0).unwrap().into_arc();
        let q = Cylinder::new(&g, [0.0, 0.0], 0.0, 1.0).unwrap();
        let u = ScalarField::from_fn(&g, |_, t: f64| (t + 0.5).max(0.0));
        let lam = coincidence_set(&u, &q, 1e-6);
        let gamma = free_boundary(&lam);
        assert!(!gamma.is_empty());
        // All Γ nodes sit on the first level above the interface.
        let expected = g.level_of(-0.5).unwrap() + 1;
        for &(_, j) in &gamma.nodes {
            assert_eq!(j, expected);
        }
    }

    #[test]
    fn free_boundary_empty_for_nonvanishing_field() {
        let g = grid(1.0 / 16.0, 1.0 / 16.0);
        let q = Cylinder::new(&g, [0.0, 0.0], 0.0, 1.0).unwrap();
        let one = ScalarField::constant(&g, 1.0);
        let lam = coincidence_set(&one, &q, 1e-8);
        assert!(free_boundary(&lam).is_empty());
    }

    #[test]
    fn density_curve_halfspace_and_barrier() {
        let g = grid(1.0 / 32.0, 1.0 / 1024.0);
        let q = Cylinder::new(&g, [0.0, 0.0], 0.0, 1.0).unwrap();
        let u = ScalarField::from_fn(&g, halfspace);
        let lam = coincidence_set(&u, &q, g.spacing() * g.spacing() / 10.0);
        let c = density_curve(&lam, [0.0, 0.0], 0.0, &[0.5, 0.25]).unwrap();
        for (r, v) in c.points() {
            let slack = 2.0 * g.spacing() / r;
            assert!((v - 0.5).abs() <= slack, "λ_{r} = {v}");
        }

        let ub = ScalarField::from_fn(&g, |_, t: f64| (t + 0.5).max(0.0));
        let lamb = coincidence_set(&ub, &q, 1e-9);
        let cb = density_curve(&lamb, [0.0, 0.0], 0.0, &[0.25]).unwrap();
        assert_eq!(cb.points()[0].1, 0.0);

        let empty = coincidence_set(&ScalarField::constant(&g, 1.0), &q, 1e-9);
        let ce = density_curve(&empty, [0.0, 0.0], 0.0, &[0.5, 0.25]).unwrap();
        assert!(ce.values().all(|v| v == 0.0));
    }

    #[test]
    fn growth_curve_halfspace() {
        let g = grid(1.0 / 32.0, 1.0 / 1024.0);
        let u = ScalarField::from_fn(&g, halfspace);
        let c = quadratic_growth_curve(&u, [0.0, 0.0], 0.0, &[0.5, 0.25, 0.125]).unwrap();
        for v in c.values() {
            assert!((v - 0.5).abs() < 1e-12);
        }
        let zero = ScalarField::zeros(&g);
        let cz = quadratic_growth_curve(&zero, [0.0, 0.0], 0.0, &[0.5]).unwrap();
        assert_eq!(cz.points()[0].1, 0.0);
    }
}
