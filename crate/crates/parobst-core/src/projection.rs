//! Projection onto parabolically homogeneous caloric polynomials.
//!
//! `P₂` is the space `p(x,t) = ½xᵀMx + (tr M)·t`: homogeneous of degree two in
//! space, degree one in time, and caloric (`Hp = tr M - tr M = 0`). The
//! projection minimizes `∫_Q |D̃²u - D̃²p|²`; since `D̃²p` is the constant pair
//! `(M, tr M)`, the minimizer solves the stationarity system
//! `M + (tr M - a) I = A` with `A = mean(D²u)` and `a = mean(∂_t u)`, giving
//! `M = A - ((tr A - a)/(n+1)) I` in closed form.

use crate::calculus::{tilde_d2, ParabolicHessian, SymMat};
use crate::curve::DiagnosticCurve;
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::grid::Cylinder;
use crate::scalar::Scalar;

/// Polynomial `p(x,t) = ½xᵀMx + m·t`. Members of `P₂` have `m = tr M`; the
/// trace-corrected polynomials of the mean-splitting identity carry an
/// independent `m`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CaloricQuadratic<T: Scalar> {
    pub m: SymMat<T>,
    pub mt: T,
}

impl<T: Scalar> CaloricQuadratic<T> {
    /// Caloric member of `P₂`: time coefficient pinned to `tr M`.
    pub fn caloric(m: SymMat<T>) -> Self {
        let mt = m.trace();
        Self { m, mt }
    }

    /// General quadratic-in-space, linear-in-time polynomial.
    pub fn general(m: SymMat<T>, mt: T) -> Self {
        Self { m, mt }
    }

    pub fn zero(n: usize) -> Self {
        Self { m: SymMat::zero(n), mt: T::zero() }
    }

    pub fn is_caloric(&self, tol: T) -> bool {
        (self.mt - self.m.trace()).abs() <= tol
    }

    /// Evaluate relative to a center: `½(x-x⁰)ᵀM(x-x⁰) + m·(t-t⁰)`.
    pub fn eval(&self, x: [T; 2], t: T) -> T {
        self.m.half_quadratic(x) + self.mt * t
    }

    pub fn eval_centered(&self, x: [T; 2], t: T, x0: [T; 2], t0: T) -> T {
        self.eval([x[0] - x0[0], x[1] - x0[1]], t - t0)
    }

    /// The constant parabolic Hessian `(M, m)`.
    pub fn hessian(&self) -> ParabolicHessian<T> {
        ParabolicHessian { d2: self.m, dt: self.mt }
    }

    /// Matrix norm `sqrt(Σ M_ij² + m²)`; equals `sup_{Q₁⁻} |D̃²p|`.
    pub fn hessian_norm(&self) -> T {
        self.hessian().norm()
    }

    pub fn scale(&self, c: T) -> Self {
        Self { m: self.m.scale(c), mt: self.mt * c }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self { m: self.m.add(&other.m), mt: self.mt + other.mt }
    }

    /// Block trace `tr M + m` of the parabolic Hessian.
    pub fn block_trace(&self) -> T {
        self.m.trace() + self.mt
    }
}

/// Output of [`project`]: `Π = S·p` with `|D̃²p| = 1` whenever `S > 0`.
#[derive(Debug, Clone, Copy)]
pub struct ProjectionResult<T: Scalar> {
    pub pi: CaloricQuadratic<T>,
    pub s: T,
    pub p_unit: Option<CaloricQuadratic<T>>,
}

/// Mean parabolic Hessian `(A, a)` over the cylinder mask.
pub fn mean_hessian<T: Scalar>(u: &ScalarField<T>, q: &Cylinder<T>) -> Result<(SymMat<T>, T)> {
    if !q.has_stencil_margin() {
        return Err(Error::CylinderOutsideGrid {
            reason: "cylinder lacks the one-node stencil margin".into(),
        });
    }
    let count = q.mask_node_count();
    if count == 0 {
        return Err(Error::EmptyMask { radius: q.radius().as_f64() });
    }
    let n = u.grid().dim();
    let mut a_mat = SymMat::zero(n);
    let mut a_t = T::zero();
    for (ix, j) in q.mask_nodes() {
        let h = tilde_d2(u, ix, j)?;
        a_mat = a_mat.add(&h.d2);
        a_t = a_t + h.dt;
    }
    let inv = T::from_usize(count).unwrap().recip();
    Ok((a_mat.scale(inv), a_t * inv))
}

/// L² projection of `u` onto `P₂` over the cylinder, split as `S·p_unit`.
pub fn project<T: Scalar>(u: &ScalarField<T>, q: &Cylinder<T>) -> Result<ProjectionResult<T>> {
    let (a_mat, a_t) = mean_hessian(u, q)?;
    let n = u.grid().dim();
    let shift = (a_mat.trace() - a_t) / T::from_usize(n + 1).unwrap();
    let m = a_mat.sub(&SymMat::identity(n).scale(shift));
    let pi = CaloricQuadratic::caloric(m);
    let s = pi.hessian_norm();
    let p_unit = if s > T::zero() { Some(pi.scale(s.recip())) } else { None };
    Ok(ProjectionResult { pi, s, p_unit })
}

/// Trace-corrected polynomial of the mean-splitting identity: subtracting
/// `(mean Hu)/(n+1) · I` from the block `(mean D²u, -mean ∂_t u)` leaves a
/// constant block matrix with zero trace. The time slot of the returned
/// polynomial is the corner entry of that block.
pub fn q_polynomial<T: Scalar>(u: &ScalarField<T>, q: &Cylinder<T>) -> Result<CaloricQuadratic<T>> {
    let (a_mat, a_t) = mean_hessian(u, q)?;
    let n = u.grid().dim();
    let mean_heat = a_mat.trace() - a_t;
    let shift = mean_heat / T::from_usize(n + 1).unwrap();
    let m = a_mat.sub(&SymMat::identity(n).scale(shift));
    let corner = -a_t - shift;
    Ok(CaloricQuadratic::general(m, corner))
}

/// Normalized BMO-type residual
/// `ρ(r) = ‖D̃²u - D̃²Π(u,r,X⁰)‖_{L²(Q_r⁻)} / r^{(n+2)/2}`.
pub fn bmo_residual<T: Scalar>(u: &ScalarField<T>, q: &Cylinder<T>) -> Result<T> {
    let proj = project(u, q)?;
    let target = proj.pi.hessian();
    let mut sum = T::zero();
    for (ix, j) in q.mask_nodes() {
        let r = tilde_d2(u, ix, j)?.sub(&target);
        sum = sum + r.norm_sq();
    }
    let norm = (sum * u.grid().cell_measure()).sqrt();
    let n = u.grid().dim();
    let expo = T::from_usize(n + 2).unwrap() * T::lit(0.5);
    Ok(norm / q.radius().powf(expo))
}

/// `S(u, r, X⁰)` over a list of radii.
pub fn s_curve<T: Scalar>(
    u: &ScalarField<T>,
    x0: [T; 2],
    t0: T,
    radii: &[T],
) -> Result<DiagnosticCurve<T>> {
    let mut pts = Vec::with_capacity(radii.len());
    for &r in radii {
        let q = Cylinder::new(u.grid(), x0, t0, r)?;
        pts.push((r, project(u, &q)?.s));
    }
    Ok(DiagnosticCurve::new(pts))
}

/// Parabolic Poincaré ratio at the fixed inner scale `κ = 7/8`:
/// `‖w - (w)_{Q_κr} - (x-x⁰)·(∇w)_{Q_κr}‖_{L²(Q_κr)}` over
/// `‖D²w‖_{L²(Q_r)} + ‖w_t‖_{L²(Q_r)}`. Norms skip nodes without stencils.
/// Returns `(ratio, rhs_was_zero)`.
pub fn poincare_residual<T: Scalar>(w: &ScalarField<T>, q: &Cylinder<T>) -> Result<(T, bool)> {
    const KAPPA: f64 = 7.0 / 8.0;
    let g = w.grid();
    let (c, t0) = q.center();
    let inner = Cylinder::new(g, c, t0, q.radius() * T::lit(KAPPA))?;

    let mut d2_sum = T::zero();
    let mut dt_sum = T::zero();
    for (ix, j) in q.mask_nodes() {
        if !g.has_stencil(ix, j) {
            continue;
        }
        let h = tilde_d2(w, ix, j)?;
        d2_sum = d2_sum + h.d2.frobenius_sq();
        dt_sum = dt_sum + h.dt * h.dt;
    }
    let cell = g.cell_measure();
    let rhs = (d2_sum * cell).sqrt() + (dt_sum * cell).sqrt();

    let count = T::from_usize(inner.mask_node_count()).unwrap();
    let mut mean_w = T::zero();
    let mut mean_g = [T::zero(); 2];
    for (ix, j) in inner.mask_nodes() {
        mean_w = mean_w + w.at(ix, j);
        let gr = crate::calculus::gradient(w, ix, j)?;
        for a in 0..g.dim() {
            mean_g[a] = mean_g[a] + gr[a];
        }
    }
    mean_w = mean_w / count;
    for a in 0..g.dim() {
        mean_g[a] = mean_g[a] / count;
    }
    let mut lhs_sum = T::zero();
    for (ix, j) in inner.mask_nodes() {
        let x = g.coord(ix);
        let mut v = w.at(ix, j) - mean_w;
        for a in 0..g.dim() {
            v = v - (x[a] - c[a]) * mean_g[a];
        }
        lhs_sum = lhs_sum + v * v;
    }
    let lhs = (lhs_sum * cell).sqrt();

    if rhs == T::zero() {
        return Ok((T::zero(), true));
    }
    Ok((lhs / rhs, false))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::SpaceTimeGrid;
    use std::sync::Arc;

    fn grid(n: usize, h: f64, k: f64) -> Arc<SpaceTimeGrid<f64>> {
        SpaceTimeGrid::new(n, 1.0, h, 1.0, k).unwrap().into_arc()
    }

    #[test]
    fn halfspace_projection_closed_form() {
        // A = ½, a = 0 ⇒ M = ¼, m = ¼, S = √2/4 on symmetric dyadic masks.
        let g = grid(1, 1.0 / 64.0, 1.0 / 256.0);
        let u = ScalarField::from_fn(&g, |x, _| 0.5 * x[0].max(0.0).powi(2));
        for r in [0.5, 0.25] {
            let q = Cylinder::new(&g, [0.0, 0.0], 0.0, r).unwrap();
            let p = project(&u, &q).unwrap();
            assert!((p.pi.m.m[0][0] - 0.25).abs() < 1e-12);
            assert!((p.pi.mt - 0.25).abs() < 1e-12);
            assert!((p.s - 2.0f64.sqrt() / 4.0).abs() < 1e-12);
            let unit = p.p_unit.unwrap();
            assert!((unit.hessian_norm() - 1.0).abs() < 1e-12);
            // Π(x,t) = x²/8 + t/4.
            assert!((p.pi.eval([0.5, 0.0], -0.25) - (0.25 / 8.0 - 0.25 / 4.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn projection_fixes_its_range() {
        let g = grid(1, 1.0 / 32.0, 1.0 / 64.0);
        let u = ScalarField::from_fn(&g, |x, t| x[0] * x[0] + 2.0 * t);
        let q = Cylinder::new(&g, [0.0, 0.0], 0.0, 0.5).unwrap();
        let p = project(&u, &q).unwrap();
        assert!((p.pi.m.m[0][0] - 2.0).abs() < 1e-11);
        assert!((p.pi.mt - 2.0).abs() < 1e-11);
    }

    #[test]
    fn linear_fields_project_to_zero() {
        let g = grid(2, 1.0 / 16.0, 1.0 / 32.0);
        let u = ScalarField::from_fn(&g, |x, _| 3.0 * x[0] - 2.0 * x[1] + 0.7);
        let q = Cylinder::new(&g, [0.0, 0.0], 0.0, 0.5).unwrap();
        let p = project(&u, &q).unwrap();
        assert!(p.s < 1e-11);
        assert!(p.p_unit.is_none() || p.s > 0.0);
    }

    #[test]
    fn projection_is_linear() {
        let g = grid(1, 1.0 / 32.0, 1.0 / 64.0);
        let u = ScalarField::from_fn(&g, |x, t| 0.5 * x[0].max(0.0).powi(2) + 0.3 * t * x[0]);
        let v = ScalarField::from_fn(&g, |x, t| x[0].powi(4) + t * t);
        let (a, b) = (1.7, -0.4);
        let combo = u.axpy(a, &v, b);
        let q = Cylinder::new(&g, [0.0, 0.0], 0.0, 0.5).unwrap();
        let pu = project(&u, &q).unwrap().pi;
        let pv = project(&v, &q).unwrap().pi;
        let pc = project(&combo, &q).unwrap().pi;
        let lin = pu.scale(a).add(&pv.scale(b));
        assert!((pc.m.m[0][0] - lin.m.m[0][0]).abs() < 1e-12);
        assert!((pc.mt - lin.mt).abs() < 1e-12);
    }

    #[test]
    fn residual_is_orthogonal_to_the_caloric_basis() {
        let g = grid(2, 1.0 / 16.0, 1.0 / 32.0);
        let u = ScalarField::from_fn(&g, |x, t| {
            (x[0] * 1.3 + 0.2).sin() * 0.1 + x[0] * x[0] * 0.4 - x[1] * x[1] * 0.1 + t * x[1]
        });
        let q = Cylinder::new(&g, [0.0, 0.0], 0.0, 0.5).unwrap();
        let proj = project(&u, &q).unwrap();
        let target = proj.pi.hessian();
        // Caloric basis directions: E11, E22 (with m = 1), symmetric E12 (m = 0).
        let mut basis = vec![
            CaloricQuadratic::caloric(SymMat::diag(2, [1.0, 0.0])),
            CaloricQuadratic::caloric(SymMat::diag(2, [0.0, 1.0])),
        ];
        let mut e12 = SymMat::zero(2);
        e12.m[0][1] = 1.0;
        e12.m[1][0] = 1.0;
        basis.push(CaloricQuadratic::caloric(e12));
        for p in basis {
            let ph = p.hessian();
            let mut acc = 0.0;
            let mut count = 0usize;
            for (ix, j) in q.mask_nodes() {
                let r = tilde_d2(&u, ix, j).unwrap().sub(&target);
                let mut dot = r.dt * ph.dt;
                for a in 0..2 {
                    for b in 0..2 {
                        dot += r.d2.m[a][b] * ph.d2.m[a][b];
                    }
                }
                acc += dot;
                count += 1;
            }
            assert!((acc / count as f64).abs() < 1e-10, "basis not orthogonal: {acc}");
        }
    }

    #[test]
    fn q_polynomial_arithmetic() {
        let g = grid(1, 1.0 / 32.0, 1.0 / 64.0);
        let q = Cylinder::new(&g, [0.0, 0.0], 0.0, 0.5).unwrap();

        // Hu = 1: block diag(1, 0) - ½I = diag(½, -½).
        let u = ScalarField::from_fn(&g, |x, _| 0.5 * x[0] * x[0]);
        let qq = q_polynomial(&u, &q).unwrap();
        assert!((qq.m.m[0][0] - 0.5).abs() < 1e-11);
        assert!((qq.mt + 0.5).abs() < 1e-11);
        assert!(qq.block_trace().abs() < 1e-11);

        // Caloric field: zero correction, block (mean D², -mean ∂_t).
        let c = ScalarField::from_fn(&g, |x, t| x[0] * x[0] + 2.0 * t);
        let qc = q_polynomial(&c, &q).unwrap();
        assert!((qc.m.m[0][0] - 2.0).abs() < 1e-11);
        assert!((qc.mt + 2.0).abs() < 1e-11);
        assert!(qc.block_trace().abs() < 1e-11);

        // u = t has zero block trace as well.
        let ut = ScalarField::from_fn(&g, |_, t| t);
        let qt = q_polynomial(&ut, &q).unwrap();
        assert!(qt.block_trace().abs() < 1e-11);
        assert!((qt.m.m[0][0] - 0.5).abs() < 1e-11);
        assert!((qt.mt + 0.5).abs() < 1e-11);
    }

    #[test]
    fn bmo_residual_halfspace_is_scale_free() {
        // Mean-square residual is 3/8, so ρ(r)² = (3/8)·|Q_r|/r³ is constant
        // on aligned dyadic masks.
        let g = grid(1, 1.0 / 64.0, 1.0 / 1024.0);
        let u = ScalarField::from_fn(&g, |x, _| 0.5 * x[0].max(0.0).powi(2));
        let rhos: Vec<f64> = [0.5, 0.25, 0.125]
            .iter()
            .map(|&r| {
                let q = Cylinder::new(&g, [0.0, 0.0], 0.0, r).unwrap();
                bmo_residual(&u, &q).unwrap()
            })
            .collect();
        for w in rhos.windows(2) {
            assert!((w[0] - w[1]).abs() / w[0] < 0.02, "{rhos:?}");
        }
        // |Q_r|_disc ≈ 2r·r² gives ρ ≈ sqrt(3/4).
        assert!((rhos[0] - 0.75f64.sqrt()).abs() < 0.05, "{rhos:?}");
    }

    #[test]
    fn bmo_residual_vanishes_on_p2_and_decays_for_quartic() {
        let g = grid(1, 1.0 / 64.0, 1.0 / 1024.0);
        let p2 = ScalarField::from_fn(&g, |x, t| x[0] * x[0] + 2.0 * t);
        let q = Cylinder::new(&g, [0.0, 0.0], 0.0, 0.25).unwrap();
        assert!(bmo_residual(&p2, &q).unwrap() < 1e-10);

        let quartic = ScalarField::from_fn(&g, |x, _| x[0].powi(4));
        let rho_big = {
            let q = Cylinder::new(&g, [0.0, 0.0], 0.0, 0.25).unwrap();
            bmo_residual(&quartic, &q).unwrap()
        };
        let rho_small = {
            let q = Cylinder::new(&g, [0.0, 0.0], 0.0, 0.125).unwrap();
            bmo_residual(&quartic, &q).unwrap()
        };
        let order = (rho_big / rho_small).log2();
        assert!(order > 0.9, "order {order}");
    }

    #[test]
    fn s_curve_constant_for_halfspace() {
        let g = grid(1, 1.0 / 64.0, 1.0 / 1024.0);
        let u = ScalarField::from_fn(&g, |x, _| 0.5 * x[0].max(0.0).powi(2));
        let c = s_curve(&u, [0.0, 0.0], 0.0, &[0.5, 0.25, 0.125]).unwrap();
        for v in c.values() {
            assert!((v - 2.0f64.sqrt() / 4.0).abs() < 1e-12);
        }
    }

    #[test]
    fn s_curve_limit_for_quartic_perturbation() {
        // S(r) -> ½√2 as r -> 0 for ½x² + x⁴.
        let g = grid(1, 1.0 / 128.0, 1.0 / 4096.0);
        let u = ScalarField::from_fn(&g, |x, _| 0.5 * x[0] * x[0] + x[0].powi(4));
        let c = s_curve(&u, [0.0, 0.0], 0.0, &[0.25, 0.125, 0.0625]).unwrap();
        let vals: Vec<f64> = c.values().collect();
        let target = 0.5 * 2.0f64.sqrt();
        assert!((vals[2] - target).abs() < (vals[0] - target).abs());
        assert!((vals[2] - target).abs() < 0.02, "{vals:?}");
    }

    #[test]
    fn poincare_residual_kills_affine_fields() {
        let g = grid(1, 1.0 / 32.0, 1.0 / 64.0);
        let q = Cylinder::new(&g, [0.0, 0.0], 0.0, 0.9).unwrap();
        let w = ScalarField::from_fn(&g, |x, _| 2.0 - 3.0 * x[0]);
        let (ratio, rhs_zero) = poincare_residual(&w, &q).unwrap();
        assert!(rhs_zero);
        assert_eq!(ratio, 0.0);
    }

    #[test]
    fn poincare_residual_stable_under_refinement() {
        let run = |h: f64, k: f64, f: fn([f64; 2], f64) -> f64| {
            let g = grid(1, h, k);
            let q = Cylinder::new(&g, [0.0, 0.0], 0.0, 0.96).unwrap();
            let w = ScalarField::from_fn(&g, f);
            poincare_residual(&w, &q).unwrap().0
        };
        let quad = |h: f64, k: f64| run(h, k, |x, _| 0.5 * x[0] * x[0]);
        let a = quad(1.0 / 32.0, 1.0 / 64.0);
        let b = quad(1.0 / 64.0, 1.0 / 128.0);
        assert!((a - b).abs() / b < 0.06, "quad a={a} b={b}");

        let lin_t = |h: f64, k: f64| run(h, k, |_, t| t);
        let a = lin_t(1.0 / 32.0, 1.0 / 64.0);
        let b = lin_t(1.0 / 64.0, 1.0 / 128.0);
        assert!((a - b).abs() / b < 0.06, "time a={a} b={b}");
    }
}
