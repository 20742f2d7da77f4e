//! Dirichlet solver for `Hw = Δw - ∂_t w = f` on backward cylinders, caloric
//! extension of boundary data, and heat-kernel convolution.
//!
//! Time stepping is backward (implicit) Euler from the bottom slice upward with
//! the (2n+1)-point Laplacian; one banded Cholesky factorization per distinct
//! unknown pattern is reused across time levels.

use crate::calculus::{self, tilde_d2};
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::grid::Cylinder;
use crate::linalg::SymBanded;
use crate::scalar::Scalar;

/// Dirichlet data on the parabolic boundary of a cylinder, stored in the
/// deterministic order of [`Cylinder::parabolic_boundary`].
#[derive(Debug, Clone)]
pub struct BoundaryData<T: Scalar> {
    values: Vec<T>,
}

impl<T: Scalar> BoundaryData<T> {
    pub fn from_fn(q: &Cylinder<T>, f: impl Fn([T; 2], T) -> T) -> Result<Self> {
        let g = q.grid();
        let values: Vec<T> = q
            .parabolic_boundary()
            .map(|(ix, j)| f(g.coord(ix), g.time(j)))
            .collect();
        Self::checked(values)
    }

    /// Restrict a full field to the parabolic boundary node set.
    pub fn from_field(q: &Cylinder<T>, u: &ScalarField<T>) -> Result<Self> {
        let values: Vec<T> = q.parabolic_boundary().map(|(ix, j)| u.at(ix, j)).collect();
        Self::checked(values)
    }

    pub fn zero(q: &Cylinder<T>) -> Self {
        Self { values: vec![T::zero(); q.parabolic_boundary().count()] }
    }

    fn checked(values: Vec<T>) -> Result<Self> {
        if let Some(node) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::BadBoundaryData { node });
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }
}

/// `Hw = f` in a cylinder with Dirichlet data on its parabolic boundary.
#[derive(Debug, Clone)]
pub struct DirichletProblem<T: Scalar> {
    pub domain: Cylinder<T>,
    pub rhs: ScalarField<T>,
    pub boundary: BoundaryData<T>,
}

impl<T: Scalar> DirichletProblem<T> {
    pub fn new(domain: Cylinder<T>, rhs: ScalarField<T>, boundary: BoundaryData<T>) -> Result<Self> {
        let expected = domain.parabolic_boundary().count();
        if boundary.values.len() != expected {
            return Err(Error::BadBoundaryData { node: boundary.values.len().min(expected) });
        }
        Ok(Self { domain, rhs, boundary })
    }
}

/// Solve `Hw = f`, `w = boundary` on `∂_p Q`. The output field carries the
/// boundary values on `∂_p` and zeros outside the cylinder.
pub fn solve_dirichlet<T: Scalar>(p: &DirichletProblem<T>) -> Result<ScalarField<T>> {
    solve_dirichlet_pinned(p, None)
}

/// Caloric extension of boundary data: `solve_dirichlet` with `f = 0`.
pub fn caloric_extension<T: Scalar>(boundary: BoundaryData<T>, domain: Cylinder<T>) -> Result<ScalarField<T>> {
    let rhs = ScalarField::zeros(domain.grid());
    solve_dirichlet(&DirichletProblem::new(domain, rhs, boundary)?)
}

/// As `solve_dirichlet`, but nodes flagged in `pins` (grid-flat indices over
/// spatially interior nodes) are held at zero and act as Dirichlet walls.
pub fn solve_dirichlet_pinned<T: Scalar>(
    p: &DirichletProblem<T>,
    pins: Option<&[bool]>,
) -> Result<ScalarField<T>> {
    let q = &p.domain;
    let g = q.grid();
    let n = g.dim();
    let h2 = g.spacing() * g.spacing();
    let inv_h2 = h2.recip();
    let inv_k = g.time_step().recip();

    let mut out = ScalarField::zeros(g);
    for (pos, (ix, j)) in q.parabolic_boundary().enumerate() {
        out.set(ix, j, p.boundary.values[pos]);
    }

    let inner = q.inner();
    // Spatial-flat -> position in `inner`, for neighbor classification.
    let mut inner_pos = vec![usize::MAX; g.spatial_count()];
    for (pos, &ix) in inner.iter().enumerate() {
        inner_pos[g.spatial_flat(ix)] = pos;
    }

    struct PatternSolver<T: Scalar> {
        pinned: Vec<bool>,
        unknown_of_inner: Vec<Option<usize>>,
        unknowns: Vec<usize>,
        chol: crate::linalg::BandedCholesky<T>,
    }
    let mut solvers: Vec<PatternSolver<T>> = Vec::new();

    let neighbor = |ix: [usize; 2], a: usize, s: i64| -> [usize; 2] {
        let mut nb = ix;
        if s > 0 {
            nb[a] += 1;
        } else {
            nb[a] -= 1;
        }
        nb
    };

    for j in q.mask_levels() {
        let pinned: Vec<bool> = inner
            .iter()
            .map(|&ix| pins.map_or(false, |m| m[g.node_flat(ix, j)]))
            .collect();

        let solver_idx = match solvers.iter().position(|s| s.pinned == pinned) {
            Some(i) => i,
            None => {
                let mut unknown_of_inner = vec![None; inner.len()];
                let mut unknowns = Vec::new();
                for (pos, &flag) in pinned.iter().enumerate() {
                    if !flag {
                        unknown_of_inner[pos] = Some(unknowns.len());
                        unknowns.push(pos);
                    }
                }
                let unknown_at = |ix: [usize; 2]| -> Option<usize> {
                    let p = inner_pos[g.spatial_flat(ix)];
                    if p == usize::MAX {
                        None
                    } else {
                        unknown_of_inner[p]
                    }
                };
                let mut bandwidth = 0usize;
                for (ui, &pos) in unknowns.iter().enumerate() {
                    let ix = inner[pos];
                    for a in 0..n {
                        for s in [-1i64, 1] {
                            if let Some(uj) = unknown_at(neighbor(ix, a, s)) {
                                bandwidth = bandwidth.max(ui.abs_diff(uj));
                            }
                        }
                    }
                }
                let diag = inv_k + T::from_usize(2 * n).unwrap() * inv_h2;
                let mut a_mat = SymBanded::zeros(unknowns.len(), bandwidth);
                for (ui, &pos) in unknowns.iter().enumerate() {
                    a_mat.add(ui, ui, diag);
                    let ix = inner[pos];
                    for axis in 0..n {
                        for s in [-1i64, 1] {
                            if let Some(uj) = unknown_at(neighbor(ix, axis, s)) {
                                if uj < ui {
                                    a_mat.add(ui, uj, -inv_h2);
                                }
                            }
                        }
                    }
                }
                solvers.push(PatternSolver {
                    pinned,
                    unknown_of_inner,
                    unknowns,
                    chol: a_mat.cholesky(),
                });
                solvers.len() - 1
            }
        };
        let solver = &solvers[solver_idx];

        // Pinned nodes are exact zeros at this level.
        for (pos, &flag) in solver.pinned.iter().enumerate() {
            if flag {
                out.set(inner[pos], j, T::zero());
            }
        }

        let mut rhs = Vec::with_capacity(solver.unknowns.len());
        for &pos in &solver.unknowns {
            let ix = inner[pos];
            let mut b = out.at(ix, j - 1) * inv_k - p.rhs.at(ix, j);
            for a in 0..n {
                for s in [-1i64, 1] {
                    let nb = neighbor(ix, a, s);
                    let p_in = inner_pos[g.spatial_flat(nb)];
                    let is_unknown =
                        p_in != usize::MAX && solver.unknown_of_inner[p_in].is_some();
                    if !is_unknown {
                        // Lateral Dirichlet value or pinned zero.
                        b = b + out.at(nb, j) * inv_h2;
                    }
                }
            }
            rhs.push(b);
        }
        let x = solver.chol.solve(&rhs);
        for (ui, &pos) in solver.unknowns.iter().enumerate() {
            out.set(inner[pos], j, x[ui]);
        }
    }
    Ok(out)
}

/// Discrete Duhamel sum `g(x,t) = -Σ_{s<t} Σ_y G(x-y, t-s) src(y,s) h^n k`,
/// so that `Hg = Δg - ∂_t g = src` holds to stencil accuracy (verified a
/// posteriori by the caller; see [`heat_residual`]).
pub fn kernel_convolution<T: Scalar>(source: &ScalarField<T>) -> Result<ScalarField<T>> {
    let g = source.grid();
    let n = g.dim();
    let cell = g.cell_measure();
    let mut out = ScalarField::zeros(g);
    let spatial: Vec<[usize; 2]> = g.spatial_indices().collect();
    let coords: Vec<[T; 2]> = spatial.iter().map(|&ix| g.coord(ix)).collect();
    // Nonzero source nodes only; sources are typically indicator-supported.
    let mut src_nodes: Vec<(usize, usize, T)> = Vec::new();
    for j in 0..g.levels() {
        for (si, &ix) in spatial.iter().enumerate() {
            let v = source.at(ix, j);
            if v != T::zero() {
                src_nodes.push((si, j, v));
            }
        }
    }
    for jt in 0..g.levels() {
        let t = g.time(jt);
        for (ti, &tix) in spatial.iter().enumerate() {
            let xt = coords[ti];
            let mut acc = T::zero();
            for &(si, js, v) in &src_nodes {
                if js >= jt {
                    continue;
                }
                let elapsed = t - g.time(js);
                let dx = [xt[0] - coords[si][0], xt[1] - coords[si][1]];
                let w = calculus::gaussian_weight(dx, -elapsed, n)?;
                acc = acc + w * v;
            }
            out.set(tix, jt, -acc * cell);
        }
    }
    Ok(out)
}

/// Measured Lemma-4 constant: `sup_{Q_{r/2}} |D̃²w| · r² / ‖w‖_{L¹(Q_r)}` for a
/// caloric field (`Hw = 0` checked to `caloric_tol` on interior stencils).
pub fn interior_derivative_ratio<T: Scalar>(
    w: &ScalarField<T>,
    q: &Cylinder<T>,
    caloric_tol: T,
) -> Result<T> {
    let g = q.grid();
    let mut max_h = T::zero();
    for (ix, j) in q.interior_nodes() {
        if !g.has_stencil(ix, j) {
            continue;
        }
        let hess = tilde_d2(w, ix, j)?;
        max_h = max_h.max(hess.heat().abs());
    }
    if max_h > caloric_tol {
        return Err(Error::NotCaloric { residual: max_h.as_f64(), tol: caloric_tol.as_f64() });
    }
    let l1 = calculus::l1_norm_on(w, q)?;
    if l1 == T::zero() {
        return Err(Error::TrivialField);
    }
    let (c, t0) = q.center();
    let half = Cylinder::new(g, c, t0, q.radius() * T::lit(0.5))?;
    let mut sup = T::zero();
    for (ix, j) in half.mask_nodes() {
        if g.has_stencil(ix, j) {
            sup = sup.max(tilde_d2(w, ix, j)?.norm());
        }
    }
    Ok(sup * q.radius() * q.radius() / l1)
}

/// Max interior-stencil residual `|Hw - f|` over the cylinder mask.
pub fn heat_residual<T: Scalar>(w: &ScalarField<T>, f: &ScalarField<T>, q: &Cylinder<T>) -> Result<T> {
    let g = q.grid();
    let mut worst = T::zero();
    for (ix, j) in q.interior_nodes() {
        if !g.has_stencil(ix, j) {
            continue;
        }
        let r = (tilde_d2(w, ix, j)?.heat() - f.at(ix, j)).abs();
        worst = worst.max(r);
    }
    Ok(worst)
}
