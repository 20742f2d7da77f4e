//! Discrete parabolic calculus on cylinder masks: the parabolic second
//! derivative, region means and norms, and the backward heat kernel weight.

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::grid::Cylinder;
use crate::scalar::Scalar;

/// Small symmetric n×n matrix (n ≤ 2) stored dense.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymMat<T: Scalar> {
    pub n: usize,
    pub m: [[T; 2]; 2],
}

impl<T: Scalar> SymMat<T> {
    pub fn zero(n: usize) -> Self {
        Self { n, m: [[T::zero(); 2]; 2] }
    }

    pub fn diag(n: usize, d: [T; 2]) -> Self {
        let mut s = Self::zero(n);
        s.m[0][0] = d[0];
        if n > 1 {
            s.m[1][1] = d[1];
        }
        s
    }

    pub fn identity(n: usize) -> Self {
        Self::diag(n, [T::one(), T::one()])
    }

    pub fn trace(&self) -> T {
        let mut t = T::zero();
        for a in 0..self.n {
            t = t + self.m[a][a];
        }
        t
    }

    pub fn frobenius_sq(&self) -> T {
        let mut s = T::zero();
        for a in 0..self.n {
            for b in 0..self.n {
                s = s + self.m[a][b] * self.m[a][b];
            }
        }
        s
    }

    pub fn scale(&self, c: T) -> Self {
        let mut out = *self;
        for a in 0..self.n {
            for b in 0..self.n {
                out.m[a][b] = self.m[a][b] * c;
            }
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = *self;
        for a in 0..self.n {
            for b in 0..self.n {
                out.m[a][b] = self.m[a][b] + other.m[a][b];
            }
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-T::one()))
    }

    /// Quadratic form `½ xᵀ M x`.
    pub fn half_quadratic(&self, x: [T; 2]) -> T {
        let mut s = T::zero();
        for a in 0..self.n {
            for b in 0..self.n {
                s = s + self.m[a][b] * x[a] * x[b];
            }
        }
        s * T::lit(0.5)
    }
}

/// The block pair `(D²u, ∂_t u)` with norm `|A|² = Σ|A_ij|² + |∂_t u|²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParabolicHessian<T: Scalar> {
    pub d2: SymMat<T>,
    pub dt: T,
}

impl<T: Scalar> ParabolicHessian<T> {
    pub fn zero(n: usize) -> Self {
        Self { d2: SymMat::zero(n), dt: T::zero() }
    }

    pub fn norm_sq(&self) -> T {
        self.d2.frobenius_sq() + self.dt * self.dt
    }

    pub fn norm(&self) -> T {
        self.norm_sq().sqrt()
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self { d2: self.d2.sub(&other.d2), dt: self.dt - other.dt }
    }

    /// Discrete heat operator value `Hu = tr D²u - ∂_t u`.
    pub fn heat(&self) -> T {
        self.d2.trace() - self.dt
    }
}

/// Parabolic second derivative at a node: second-order centered differences in
/// space, first-order backward difference in time.
pub fn tilde_d2<T: Scalar>(u: &ScalarField<T>, ix: [usize; 2], j: usize) -> Result<ParabolicHessian<T>> {
    let g = u.grid();
    let n = g.dim();
    let [x, y] = g.coord(ix);
    let t = g.time(j);
    if j == 0 {
        return Err(Error::MissingStencil {
            x: x.as_f64(),
            y: y.as_f64(),
            t: t.as_f64(),
            which: "earlier time level",
        });
    }
    for a in 0..n {
        if ix[a] == 0 || ix[a] + 1 >= g.nodes_along(a) {
            return Err(Error::MissingStencil {
                x: x.as_f64(),
                y: y.as_f64(),
                t: t.as_f64(),
                which: if a == 0 { "spatial neighbor along x" } else { "spatial neighbor along y" },
            });
        }
    }
    let h2 = g.spacing() * g.spacing();
    let mut d2 = SymMat::zero(n);
    let center = u.at(ix, j);
    for a in 0..n {
        let mut p = ix;
        let mut m = ix;
        p[a] += 1;
        m[a] -= 1;
        d2.m[a][a] = (u.at(p, j) - center - center + u.at(m, j)) / h2;
    }
    if n == 2 {
        let pp = u.at([ix[0] + 1, ix[1] + 1], j);
        let pm = u.at([ix[0] + 1, ix[1] - 1], j);
        let mp = u.at([ix[0] - 1, ix[1] + 1], j);
        let mm = u.at([ix[0] - 1, ix[1] - 1], j);
        let cross = (pp - pm - mp + mm) / (T::lit(4.0) * h2);
        d2.m[0][1] = cross;
        d2.m[1][0] = cross;
    }
    let dt = (center - u.at(ix, j - 1)) / g.time_step();
    Ok(ParabolicHessian { d2, dt })
}

/// Centered spatial gradient at a node.
pub fn gradient<T: Scalar>(u: &ScalarField<T>, ix: [usize; 2], j: usize) -> Result<[T; 2]> {
    let g = u.grid();
    let mut grad = [T::zero(); 2];
    for a in 0..g.dim() {
        if ix[a] == 0 || ix[a] + 1 >= g.nodes_along(a) {
            let [x, y] = g.coord(ix);
            return Err(Error::MissingStencil {
                x: x.as_f64(),
                y: y.as_f64(),
                t: g.time(j).as_f64(),
                which: "spatial neighbor for gradient",
            });
        }
        let mut p = ix;
        let mut m = ix;
        p[a] += 1;
        m[a] -= 1;
        grad[a] = (u.at(p, j) - u.at(m, j)) / (T::lit(2.0) * g.spacing());
    }
    Ok(grad)
}

/// Node-count-weighted average of the field over the cylinder mask.
pub fn mean_value<T: Scalar>(u: &ScalarField<T>, q: &Cylinder<T>) -> Result<T> {
    let count = q.mask_node_count();
    if count == 0 {
        return Err(Error::EmptyMask { radius: q.radius().as_f64() });
    }
    let mut sum = T::zero();
    for (ix, j) in q.mask_nodes() {
        sum = sum + u.at(ix, j);
    }
    Ok(sum / T::from_usize(count).unwrap())
}

/// `sqrt(Σ u² h^n k)` over the mask.
pub fn l2_norm_on<T: Scalar>(u: &ScalarField<T>, q: &Cylinder<T>) -> Result<T> {
    if q.mask_node_count() == 0 {
        return Err(Error::EmptyMask { radius: q.radius().as_f64() });
    }
    let mut sum = T::zero();
    for (ix, j) in q.mask_nodes() {
        let v = u.at(ix, j);
        sum = sum + v * v;
    }
    Ok((sum * u.grid().cell_measure()).sqrt())
}

/// `Σ |u| h^n k` over the mask.
pub fn l1_norm_on<T: Scalar>(u: &ScalarField<T>, q: &Cylinder<T>) -> Result<T> {
    if q.mask_node_count() == 0 {
        return Err(Error::EmptyMask { radius: q.radius().as_f64() });
    }
    let mut sum = T::zero();
    for (ix, j) in q.mask_nodes() {
        sum = sum + u.at(ix, j).abs();
    }
    Ok(sum * u.grid().cell_measure())
}

/// `max |u|` over the mask.
pub fn sup_norm_on<T: Scalar>(u: &ScalarField<T>, q: &Cylinder<T>) -> Result<T> {
    if q.mask_node_count() == 0 {
        return Err(Error::EmptyMask { radius: q.radius().as_f64() });
    }
    let mut sup = T::zero();
    for (ix, j) in q.mask_nodes() {
        sup = sup.max(u.at(ix, j).abs());
    }
    Ok(sup)
}

/// Backward heat kernel weight `G(x, -t) = (4π(-t))^{-n/2} exp(-|x|²/(4(-t)))`
/// for `t < 0`, normalized to unit spatial mass at every time.
pub fn gaussian_weight<T: Scalar>(x: [T; 2], t: T, n: usize) -> Result<T> {
    if !(t < T::zero()) {
        return Err(Error::NonNegativeTime(t.as_f64()));
    }
    let s = -t;
    let four_pi_s = T::lit(4.0) * T::lit(core::f64::consts::PI) * s;
    let norm = match n {
        1 => four_pi_s.sqrt().recip(),
        2 => four_pi_s.recip(),
        _ => return Err(Error::BadDimension(n)),
    };
    let mut x2 = T::zero();
    for a in 0..n {
        x2 = x2 + x[a] * x[a];
    }
    Ok(norm * (-(x2 / (T::lit(4.0) * s))).exp())
}
