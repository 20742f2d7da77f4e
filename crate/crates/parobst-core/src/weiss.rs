//! Gaussian-weighted scaling energy `W(r; v, f, X⁰)`, the Euler operator
//! `Lv = x·∇v + 2t v_t - 2v`, monotonicity curves, blow-up rescaling, energy
//! classification of free boundary points, and the minimal-diameter condition.
//!
//! `W(r)` is always evaluated through the rescaling identity
//! `W(r; v, f, X⁰) = W(1; v_r, f_r, 0)`. The time integral uses geometric
//! nodes `s_q = r²γ^q` toward `t⁰` with a trapezoid rule per cell, matching
//! the `O(|t|)` decay of the slice integrand for fields vanishing
//! quadratically at the center. Per slice, fields with a closed form are
//! integrated by Gauss-Hermite over all of space; sampled fields are cut off
//! by ψ (1 on `B_{1/2}`, 0 outside `B_{3/4}`, C² in between) and summed with
//! exact per-cell Gaussian masses.

use crate::calculus;
use crate::curve::DiagnosticCurve;
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::grid::{Cylinder, SpaceTimeGrid};
use crate::scalar::Scalar;
use std::collections::HashMap;
use std::sync::Arc;

/// Quadrature parameters for the Weiss energy.
#[derive(Debug, Clone)]
pub struct WeissQuadrature<T: Scalar> {
    /// Geometric ratio of the time nodes, in (0, 1).
    pub gamma: T,
    /// Number of geometric steps (≥ 16).
    pub steps: usize,
    /// Spatial truncation multiplier: cells beyond `ν·sqrt(2s)` are dropped.
    pub nu: T,
    /// Gauss-Hermite order for closed-form fields.
    pub gh_order: usize,
}

impl<T: Scalar> WeissQuadrature<T> {
    pub fn new(gamma: T, steps: usize, nu: T, gh_order: usize) -> Result<Self> {
        if !(gamma > T::zero() && gamma < T::one()) {
            return Err(Error::InvalidParameter(format!(
                "weiss gamma must be in (0,1), got {}",
                gamma.as_f64()
            )));
        }
        if steps < 16 {
            return Err(Error::InvalidParameter(format!("weiss steps must be >= 16, got {steps}")));
        }
        if nu < T::lit(6.0) {
            return Err(Error::InvalidParameter(format!(
                "weiss nu must be >= 6, got {}",
                nu.as_f64()
            )));
        }
        if gh_order < 4 {
            return Err(Error::InvalidParameter(format!(
                "gauss-hermite order must be >= 4, got {gh_order}"
            )));
        }
        Ok(Self { gamma, steps, nu, gh_order })
    }
}

impl<T: Scalar> Default for WeissQuadrature<T> {
    fn default() -> Self {
        Self { gamma: T::lit(0.85), steps: 96, nu: T::lit(8.0), gh_order: 40 }
    }
}

/// Gauss-Hermite nodes and weights for `∫ f(x) e^{-x²} dx ≈ Σ w_i f(x_i)`,
/// computed by Newton iteration on the orthonormal Hermite recurrence.
pub fn gauss_hermite(order: usize) -> Vec<(f64, f64)> {
    assert!(order >= 1);
    // Orthonormal value and derivative at x.
    let eval = |x: f64| -> (f64, f64) {
        let mut pm1 = 0.0f64;
        let mut p = core::f64::consts::PI.powf(-0.25);
        for k in 0..order {
            let next = x * (2.0 / (k as f64 + 1.0)).sqrt() * p
                - (k as f64 / (k as f64 + 1.0)).sqrt() * pm1;
            pm1 = p;
            p = next;
        }
        let dp = (2.0 * order as f64).sqrt() * pm1;
        (p, dp)
    };
    let mut roots = Vec::with_capacity(order);
    let mut z = 0.0f64;
    let half = order / 2;
    for i in 0..half + (order % 2) {
        // Initial guesses, largest root first (Numerical Recipes style).
        z = match i {
            0 => {
                let b = 2.0 * order as f64 + 1.0;
                b.sqrt() - 1.85575 * b.powf(-1.0 / 6.0)
            }
            1 => z - 1.14 * (order as f64).powf(0.426) / z,
            2 => 1.86 * z - 0.86 * roots[0],
            3 => 1.91 * z - 0.91 * roots[1],
            _ => 2.0 * z - roots[i - 2],
        };
        for _ in 0..100 {
            let (p, dp) = eval(z);
            let dz = p / dp;
            z -= dz;
            if dz.abs() < 1e-15 * (1.0 + z.abs()) {
                break;
            }
        }
        roots.push(z);
    }
    let mut out = Vec::with_capacity(order);
    for &r in roots.iter() {
        let (_, dp) = eval(r);
        let w = 2.0 / (dp * dp);
        out.push((r, w));
        if r > 1e-14 {
            out.push((-r, w));
        }
    }
    out.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    out
}

/// Radial cutoff: exactly 1 on `B_{1/2}`, exactly 0 outside `B_{3/4}`, quintic
/// C² blend in between.
pub fn cutoff<T: Scalar>(rho: T) -> T {
    let lo = T::lit(0.5);
    let hi = T::lit(0.75);
    if rho <= lo {
        T::one()
    } else if rho >= hi {
        T::zero()
    } else {
        let s = (rho - lo) / (hi - lo);
        let s3 = s * s * s;
        let smooth = s3 * (T::lit(6.0) * s * s - T::lit(15.0) * s + T::lit(10.0));
        T::one() - smooth
    }
}

/// Exact node correspondence of the parabolic rescaling
/// `x = r x' + x⁰, t = r² t' + t⁰`: the rescaled grid has spacings
/// `h' = h/r`, `k' = k/r²` and reuses the original node values untouched.
#[derive(Debug, Clone)]
pub struct RescaleFrame<T: Scalar> {
    pub grid: Arc<SpaceTimeGrid<T>>,
    pub r: T,
    pub x0: [T; 2],
    pub t0: T,
    center_ix: [usize; 2],
    center_level: usize,
    half_nodes: usize,
}

impl<T: Scalar> RescaleFrame<T> {
    /// Build the frame; `r` must be a power of two and `X⁰` a grid node.
    pub fn new(g: &Arc<SpaceTimeGrid<T>>, r: T, x0: [T; 2], t0: T) -> Result<Self> {
        if !(r > T::zero()) {
            return Err(Error::NonPositiveRadius(r.as_f64()));
        }
        let log2r = r.as_f64().log2();
        if (log2r - log2r.round()).abs() > 1e-9 {
            return Err(Error::NonDyadicRadius(r.as_f64()));
        }
        let n = g.dim();
        let off_grid = Error::CenterOffGrid {
            x: x0[0].as_f64(),
            y: x0[1].as_f64(),
            t: t0.as_f64(),
        };
        let center_ix = g.spatial_index_of(x0).ok_or(off_grid)?;
        let center_level = g.level_of(t0).ok_or(Error::CenterOffGrid {
            x: x0[0].as_f64(),
            y: x0[1].as_f64(),
            t: t0.as_f64(),
        })?;
        let mut half_nodes = usize::MAX;
        for a in 0..n {
            half_nodes = half_nodes.min(center_ix[a]).min(2 * g.half_nodes(a) - center_ix[a]);
        }
        if half_nodes < 4 {
            return Err(Error::CylinderOutsideGrid {
                reason: "rescaling center too close to the grid edge".into(),
            });
        }
        let levels_new = center_level + 1;
        if levels_new < 5 {
            return Err(Error::CylinderOutsideGrid {
                reason: "rescaling center too close to the initial slice".into(),
            });
        }
        let h_new = g.spacing() / r;
        let k_new = g.time_step() / (r * r);
        let depth_new = T::from_usize(levels_new - 1).unwrap() * k_new;
        let grid = SpaceTimeGrid::new(
            n,
            T::from_usize(half_nodes).unwrap() * h_new,
            h_new,
            depth_new,
            k_new,
        )?
        .into_arc();
        Ok(Self { grid, r, x0, t0, center_ix, center_level, half_nodes })
    }

    /// Original node behind a rescaled node.
    pub fn source_node(&self, ix_new: [usize; 2], j_new: usize) -> ([usize; 2], usize) {
        let n = self.grid.dim();
        let old = [
            self.center_ix[0] + ix_new[0] - self.half_nodes,
            if n == 2 { self.center_ix[1] + ix_new[1] - self.half_nodes } else { 0 },
        ];
        let j_old = self.center_level - (self.grid.levels() - 1 - j_new);
        (old, j_old)
    }

    /// Remap a field onto the rescaled grid, multiplying values by `scale`.
    pub fn remap(&self, u: &ScalarField<T>, scale: T) -> ScalarField<T> {
        let gn = &self.grid;
        let mut values = Vec::with_capacity(gn.node_count());
        for j_new in 0..gn.levels() {
            for iy in 0..gn.nodes_along(1) {
                for ix in 0..gn.nodes_along(0) {
                    let (old, j_old) = self.source_node([ix, iy], j_new);
                    values.push(u.at(old, j_old) * scale);
                }
            }
        }
        ScalarField::from_values(gn, values).expect("remap of a finite field is finite")
    }
}

/// Parabolic rescaling `u_r(x,t) = u(rx + x⁰, r²t + t⁰)/r²` by exact index
/// remapping; `r` must be a power of two and `X⁰` a grid node.
pub fn rescale<T: Scalar>(u: &ScalarField<T>, r: T, x0: [T; 2], t0: T) -> Result<ScalarField<T>> {
    let frame = RescaleFrame::new(u.grid(), r, x0, t0)?;
    let inv_r2 = (r * r).recip();
    let mut out = frame.remap(u, inv_r2);
    if let Some(ev) = u.evaluator() {
        let ev = Arc::clone(ev);
        out = out.with_evaluator(Arc::new(move |x: [T; 2], t: T| {
            ev([r * x[0] + x0[0], r * x[1] + x0[1]], r * r * t + t0) * inv_r2
        }));
    }
    Ok(out)
}

/// Weiss energy of closed forms: `W(1; v, f, 0)` with `v`, `f` given as
/// evaluators already rescaled to the unit cylinder.
fn weiss_energy_unit_analytic<T: Scalar>(
    v: &dyn Fn([T; 2], T) -> T,
    f: &dyn Fn([T; 2], T) -> T,
    n: usize,
    quad: &WeissQuadrature<T>,
) -> Result<T> {
    let gh = gauss_hermite(quad.gh_order);
    let delta = T::lit(1e-5);
    let slice = |tau: T| -> T {
        let s = -tau;
        let scale = T::lit(2.0) * s.sqrt();
        let wnorm = T::lit(core::f64::consts::PI.powf(-(n as f64) / 2.0));
        let mut acc = T::zero();
        let eval_at = |x: [T; 2]| -> T { v(x, tau) };
        let point = |x: [T; 2], w: T| -> T {
            let mut grad2 = T::zero();
            for a in 0..n {
                let mut xp = x;
                let mut xm = x;
                xp[a] = xp[a] + delta;
                xm[a] = xm[a] - delta;
                let da = (eval_at(xp) - eval_at(xm)) / (T::lit(2.0) * delta);
                grad2 = grad2 + da * da;
            }
            let vv = eval_at(x);
            (grad2 + T::lit(2.0) * f(x, tau) * vv + vv * vv / tau) * w
        };
        match n {
            1 => {
                for &(xi, w) in &gh {
                    acc = acc + point([scale * T::lit(xi), T::zero()], T::lit(w));
                }
            }
            2 => {
                for &(xi, wi) in &gh {
                    for &(yj, wj) in &gh {
                        acc = acc + point([scale * T::lit(xi), scale * T::lit(yj)], T::lit(wi * wj));
                    }
                }
            }
            _ => unreachable!(),
        }
        acc * wnorm
    };
    integrate_geometric(T::one(), quad, slice)
}

/// Trapezoid integration of `F` over `(-r², 0]` on the geometric nodes
/// `τ_q = -r²γ^q` with `F(0) := 0`; errors if the tail cell is not negligible.
fn integrate_geometric<T: Scalar>(
    r: T,
    quad: &WeissQuadrature<T>,
    slice: impl Fn(T) -> T,
) -> Result<T> {
    let r2 = r * r;
    let mut taus = Vec::with_capacity(quad.steps + 1);
    let mut s = r2;
    for _ in 0..=quad.steps {
        taus.push(-s);
        s = s * quad.gamma;
    }
    let mut total = T::zero();
    let mut f_prev = slice(taus[0]);
    for q in 1..taus.len() {
        let f_here = slice(taus[q]);
        total = total + (f_prev + f_here) * (taus[q] - taus[q - 1]) * T::lit(0.5);
        f_prev = f_here;
    }
    let tail = f_prev * (-taus[taus.len() - 1]) * T::lit(0.5);
    let budget = T::lit(1e-6) * (total.abs() + T::lit(1e-3));
    if tail.abs() > budget {
        return Err(Error::QuadratureTail {
            detail: format!(
                "tail cell {} exceeds budget {}; integrand does not vanish at the center",
                tail.as_f64(),
                budget.as_f64()
            ),
        });
    }
    Ok(total + tail)
}

/// Weiss energy `W(r; v, f, X⁰)`, computed as `W(1; v_r, f_r, 0)`.
///
/// Fields with closed forms integrate over all of space by Gauss-Hermite;
/// sampled fields are multiplied by the ψ cutoff around `x⁰` and summed with
/// exact per-cell Gaussian masses, interpolating linearly between time levels.
pub fn weiss_energy<T: Scalar>(
    v: &ScalarField<T>,
    f: &ScalarField<T>,
    x0: [T; 2],
    t0: T,
    r: T,
    quad: &WeissQuadrature<T>,
) -> Result<T> {
    if !(r > T::zero()) {
        return Err(Error::NonPositiveRadius(r.as_f64()));
    }
    if let (Some(ve), Some(fe)) = (v.evaluator(), f.evaluator()) {
        let n = v.grid().dim();
        let r2 = r * r;
        let inv_r2 = r2.recip();
        let vr = |x: [T; 2], t: T| ve([r * x[0] + x0[0], r * x[1] + x0[1]], r2 * t + t0) * inv_r2;
        let fr = |x: [T; 2], t: T| fe([r * x[0] + x0[0], r * x[1] + x0[1]], r2 * t + t0);
        weiss_energy_unit_analytic(&vr, &fr, n, quad)
    } else {
        weiss_energy_sampled(v, f, x0, t0, r, quad)
    }
}

fn weiss_energy_sampled<T: Scalar>(
    v: &ScalarField<T>,
    f: &ScalarField<T>,
    x0: [T; 2],
    t0: T,
    r: T,
    quad: &WeissQuadrature<T>,
) -> Result<T> {
    let g = v.grid();
    let n = g.dim();
    let h = g.spacing();
    let k = g.time_step();
    for a in 0..n {
        if (x0[a].abs() + T::lit(0.75) + h + h).as_f64() > g.half_width().as_f64() + 1e-12 {
            return Err(Error::QuadratureTail {
                detail: "cutoff support B_{3/4}(x0) exceeds the grid".into(),
            });
        }
    }
    if (t0 - r * r).as_f64() < -g.depth().as_f64() - 1e-12 {
        return Err(Error::CylinderOutsideGrid {
            reason: "weiss radius reaches below the grid depth".into(),
        });
    }
    let j0 = g.level_of(t0).ok_or(Error::CenterOffGrid {
        x: x0[0].as_f64(),
        y: x0[1].as_f64(),
        t: t0.as_f64(),
    })?;

    // Spatial window: support of ψ(·-x0) with one-node margin for gradients.
    let support = T::lit(0.75);
    let mut window: Vec<[usize; 2]> = Vec::new();
    let mut pos_of = vec![usize::MAX; g.spatial_count()];
    for ix in g.spatial_indices() {
        let x = g.coord(ix);
        let mut d2 = T::zero();
        for a in 0..n {
            let d = x[a] - x0[a];
            d2 = d2 + d * d;
        }
        if d2.sqrt() <= support + h {
            pos_of[g.spatial_flat(ix)] = window.len();
            window.push(ix);
        }
    }
    let coords: Vec<[T; 2]> = window.iter().map(|&ix| g.coord(ix)).collect();
    let psi: Vec<T> = coords
        .iter()
        .map(|&x| {
            let mut d2 = T::zero();
            for a in 0..n {
                let d = x[a] - x0[a];
                d2 = d2 + d * d;
            }
            cutoff(d2.sqrt())
        })
        .collect();

    // ψ·v (and f) on a level, cached lazily across time nodes.
    let wv_cache: core::cell::RefCell<HashMap<usize, Arc<(Vec<T>, Vec<T>)>>> =
        core::cell::RefCell::new(HashMap::new());
    let level_slices = |j: usize| -> Arc<(Vec<T>, Vec<T>)> {
        Arc::clone(wv_cache.borrow_mut().entry(j).or_insert_with(|| {
            let wv: Vec<T> = window.iter().zip(&psi).map(|(&ix, &p)| p * v.at(ix, j)).collect();
            let fv: Vec<T> = window.iter().map(|&ix| f.at(ix, j)).collect();
            Arc::new((wv, fv))
        }))
    };

    let half_h = h * T::lit(0.5);
    let two = T::lit(2.0);
    let _ = j0;
    let slice = |tau: T| -> T {
        // tau is time relative to t0; absolute time t = t0 + tau.
        let s = -tau;
        let t_abs = t0 + tau;
        let rel = ((t_abs + g.depth()) / k).as_f64();
        let j_lo = (rel.floor().max(0.0) as usize).min(g.levels() - 1);
        let j_hi = (j_lo + 1).min(g.levels() - 1);
        let theta = T::lit((rel - j_lo as f64).clamp(0.0, 1.0));
        let lo_sl = level_slices(j_lo);
        let hi_sl = level_slices(j_hi);
        let (wv_lo, f_lo) = (&lo_sl.0, &lo_sl.1);
        let (wv_hi, f_hi) = (&hi_sl.0, &hi_sl.1);
        let lerp = |a: T, b: T| a + (b - a) * theta;

        let sigma = (two * s).sqrt();
        let cut = quad.nu * sigma;
        let denom = two * s.sqrt();
        let mut acc = T::zero();
        for (p, &ix) in window.iter().enumerate() {
            let x = coords[p];
            let mut keep = true;
            let mut cm = T::one();
            for a in 0..n {
                let d = x[a] - x0[a];
                if d.abs() > cut + h {
                    keep = false;
                    break;
                }
                let hi = T::lit(libm::erf(((d + half_h) / denom).as_f64()));
                let lo = T::lit(libm::erf(((d - half_h) / denom).as_f64()));
                cm = cm * (hi - lo) * T::lit(0.5);
            }
            if !keep || cm == T::zero() {
                continue;
            }
            let value = lerp(wv_lo[p], wv_hi[p]);
            let fval = lerp(f_lo[p], f_hi[p]);
            let mut grad2 = T::zero();
            for a in 0..n {
                let mut ixp = ix;
                let mut ixm = ix;
                ixp[a] += 1;
                ixm[a] -= 1;
                let vp_pos = pos_of[g.spatial_flat(ixp)];
                let vm_pos = pos_of[g.spatial_flat(ixm)];
                let vp = if vp_pos == usize::MAX { T::zero() } else { lerp(wv_lo[vp_pos], wv_hi[vp_pos]) };
                let vm = if vm_pos == usize::MAX { T::zero() } else { lerp(wv_lo[vm_pos], wv_hi[vm_pos]) };
                let d = (vp - vm) / (two * h);
                grad2 = grad2 + d * d;
            }
            acc = acc + (grad2 + two * fval * value + value * value / tau) * cm;
        }
        acc
        // Nodes of the window sit one node inside the grid edge, so ixp/ixm
        // above never leave the grid.
    };

    let r2 = r * r;
    let inv_r4 = (r2 * r2).recip();
    let integral = integrate_geometric(r, quad, slice)?;
    Ok(integral * inv_r4)
}

/// Discrete Euler operator `Lv = x·∇v + 2t v_t - 2v` at a node (centered
/// gradient, backward time difference).
pub fn euler_operator<T: Scalar>(v: &ScalarField<T>, ix: [usize; 2], j: usize) -> Result<T> {
    let g = v.grid();
    let grad = calculus::gradient(v, ix, j)?;
    if j == 0 {
        let [x, y] = g.coord(ix);
        return Err(Error::MissingStencil {
            x: x.as_f64(),
            y: y.as_f64(),
            t: g.time(j).as_f64(),
            which: "earlier time level",
        });
    }
    let x = g.coord(ix);
    let t = g.time(j);
    let vt = (v.at(ix, j) - v.at(ix, j - 1)) / g.time_step();
    let mut acc = T::zero();
    for a in 0..g.dim() {
        acc = acc + x[a] * grad[a];
    }
    Ok(acc + T::lit(2.0) * t * vt - T::lit(2.0) * v.at(ix, j))
}

/// Weiss energies over a list of radii plus the monotonicity verdict
/// (restricted to constant `f`, where the Dini correction vanishes).
pub fn weiss_curve<T: Scalar>(
    v: &ScalarField<T>,
    f: &ScalarField<T>,
    x0: [T; 2],
    t0: T,
    radii: &[T],
    quad: &WeissQuadrature<T>,
    tol_mono: T,
) -> Result<(DiagnosticCurve<T>, bool)> {
    let (mut lo, mut hi) = (T::infinity(), T::neg_infinity());
    for &val in f.values() {
        lo = lo.min(val);
        hi = hi.max(val);
    }
    let spread = hi - lo;
    if spread > T::lit(1e-9) * (T::one() + hi.abs().max(lo.abs())) {
        return Err(Error::NonConstantSource(spread.as_f64()));
    }
    let mut pts = Vec::with_capacity(radii.len());
    for &r in radii {
        pts.push((r, weiss_energy(v, f, x0, t0, r, quad)?));
    }
    let curve = DiagnosticCurve::new(pts);
    let verdict = curve.non_decreasing_within(tol_mono);
    Ok((curve, verdict))
}

/// Reference energies at unit-mass Gaussian normalization, self-calibrated
/// from the exact profiles at high quadrature order. The half-space : caloric
/// polynomial ratio is ½ regardless of the kernel normalization.
#[derive(Debug, Clone, Copy)]
pub struct EnergyRefs<T: Scalar> {
    pub w_half: T,
    pub w_poly: T,
}

pub fn reference_energies<T: Scalar>(n: usize) -> Result<EnergyRefs<T>> {
    let quad = WeissQuadrature::<T>::new(T::lit(0.8), 128, T::lit(8.0), 64)?;
    let half = |x: [T; 2], _: T| {
        let q = x[0].max(T::zero());
        q * q * T::lit(0.5)
    };
    let poly = |x: [T; 2], _: T| x[0] * x[0] * T::lit(0.5);
    let one = |_: [T; 2], _: T| T::one();
    let w_half = weiss_energy_unit_analytic(&half, &one, n, &quad)?;
    let w_poly = weiss_energy_unit_analytic(&poly, &one, n, &quad)?;
    Ok(EnergyRefs { w_half, w_poly })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnergyKind {
    ZeroEnergy,
    LowEnergy,
    HighEnergy,
    Indeterminate,
}

impl core::fmt::Display for EnergyKind {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        let s = match self {
            EnergyKind::ZeroEnergy => "ZeroEnergy",
            EnergyKind::LowEnergy => "LowEnergy",
            EnergyKind::HighEnergy => "HighEnergy",
            EnergyKind::Indeterminate => "Indeterminate",
        };
        f.write_str(s)
    }
}

/// Classification of a free boundary point by the `r → 0⁺` energy limit.
#[derive(Debug, Clone)]
pub struct EnergyClass<T: Scalar> {
    pub kind: EnergyKind,
    pub w_limit: T,
    pub distance: T,
    pub warning: Option<String>,
}

/// Estimate `W(0⁺)` from the three smallest radii (Aitken extrapolation) and
/// classify against the reference energies with a 10% relative margin.
pub fn classify_point<T: Scalar>(
    v: &ScalarField<T>,
    f: &ScalarField<T>,
    x0: [T; 2],
    t0: T,
    radii: &[T],
    quad: &WeissQuadrature<T>,
    refs: &EnergyRefs<T>,
) -> Result<EnergyClass<T>> {
    if radii.len() < 3 {
        return Ok(EnergyClass {
            kind: EnergyKind::Indeterminate,
            w_limit: T::nan(),
            distance: T::nan(),
            warning: Some(format!("need at least 3 radii, got {}", radii.len())),
        });
    }
    let mut pts: Vec<(T, T)> = Vec::with_capacity(radii.len());
    for &r in radii {
        pts.push((r, weiss_energy(v, f, x0, t0, r, quad)?));
    }
    pts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    // Aitken Δ² on the three smallest radii, guarded against flat curves.
    let w3 = pts[0].1;
    let w2 = pts[1].1;
    let w1 = pts[2].1;
    let d32 = w3 - w2;
    let dd = d32 - (w2 - w1);
    let w_limit = if dd.abs() > T::lit(1e-12) * (T::one() + w3.abs()) {
        let extr = w3 - d32 * d32 / dd;
        // Accept the extrapolation only when it stays near the curve tail.
        if (extr - w3).abs() <= d32.abs() * T::lit(4.0) + T::lit(1e-9) {
            extr
        } else {
            w3
        }
    } else {
        w3
    };

    let mut dist = [
        (EnergyKind::ZeroEnergy, w_limit.abs()),
        (EnergyKind::LowEnergy, (w_limit - refs.w_half).abs()),
        (EnergyKind::HighEnergy, (w_limit - refs.w_poly).abs()),
    ];
    dist.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
    let margin = (dist[1].1 - dist[0].1) / refs.w_poly;
    if margin < T::lit(0.1) {
        return Ok(EnergyClass {
            kind: EnergyKind::Indeterminate,
            w_limit,
            distance: dist[0].1,
            warning: Some(format!("margin {} below 10%", margin.as_f64())),
        });
    }
    let warning = if dist[0].0 == EnergyKind::ZeroEnergy {
        Some("zero-energy limit does not occur on the free boundary; the point is likely not a free boundary point".to_string())
    } else {
        None
    };
    Ok(EnergyClass { kind: dist[0].0, w_limit, distance: dist[0].1, warning })
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Equispaced unit directions; seed 0 keeps the set axis-aligned, other seeds
/// rotate it by a deterministic sub-spacing offset.
pub fn direction_samples<T: Scalar>(n: usize, count: usize, seed: u64) -> Vec<[T; 2]> {
    if n == 1 {
        return vec![[T::one(), T::zero()], [-T::one(), T::zero()]];
    }
    let count = count.max(4);
    let offset = if seed == 0 {
        0.0
    } else {
        (splitmix64(seed) >> 11) as f64 / (1u64 << 53) as f64
    };
    (0..count)
        .map(|j| {
            let theta = 2.0 * core::f64::consts::PI * (j as f64 + offset) / count as f64;
            [T::lit(theta.cos()), T::lit(theta.sin())]
        })
        .collect()
}

/// Distance of the rescaled field to the nearest half-space profile
/// `½((x·e)₊)²` in sup norm over the unit cylinder mask.
pub fn blowup_distance<T: Scalar>(
    u: &ScalarField<T>,
    x0: [T; 2],
    t0: T,
    r: T,
    k_dirs: usize,
    seed: u64,
) -> Result<(T, [T; 2])> {
    let ur = rescale(u, r, x0, t0)?;
    let g = ur.grid();
    let q = Cylinder::new(g, [T::zero(); 2], T::zero(), T::one())?;
    let dirs = direction_samples(g.dim(), k_dirs, seed);
    let mut best = (T::infinity(), dirs[0]);
    for e in dirs {
        let mut worst = T::zero();
        for (ix, j) in q.mask_nodes() {
            let x = g.coord(ix);
            let dot = (x[0] * e[0] + x[1] * e[1]).max(T::zero());
            let profile = dot * dot * T::lit(0.5);
            worst = worst.max((ur.at(ix, j) - profile).abs());
        }
        if worst < best.0 {
            best = (worst, e);
        }
    }
    Ok(best)
}

/// Minimal diameter of the zero set on the slice `t = t⁰ - r²`.
#[derive(Debug, Clone, Copy)]
pub struct MinimalDiameter<T: Scalar> {
    pub md: T,
    pub ratio: T,
    pub zero_nodes: usize,
    /// `MD/r > σ(r)`, when σ was supplied.
    pub flag: Option<bool>,
}

pub fn minimal_diameter<T: Scalar>(
    u: &ScalarField<T>,
    x0: [T; 2],
    t0: T,
    r: T,
    tol_zero: T,
    k_dirs: usize,
    seed: u64,
    sigma: Option<T>,
) -> Result<MinimalDiameter<T>> {
    let g = u.grid();
    let n = g.dim();
    let t_slice = t0 - r * r;
    let j = g.level_of(t_slice).ok_or_else(|| {
        Error::InvalidParameter(format!("slice t = {} is not a grid level", t_slice.as_f64()))
    })?;
    let mut pts: Vec<[T; 2]> = Vec::new();
    for ix in g.spatial_indices() {
        let x = g.coord(ix);
        let mut d2 = T::zero();
        for a in 0..n {
            let d = x[a] - x0[a];
            d2 = d2 + d * d;
        }
        if d2.sqrt() <= r && u.at(ix, j).abs() <= tol_zero {
            pts.push(x);
        }
    }
    let md = if pts.len() <= 1 {
        T::zero()
    } else {
        let dirs: Vec<[T; 2]> = if n == 1 {
            vec![[T::one(), T::zero()]]
        } else {
            let count = k_dirs.max(4);
            let offset = if seed == 0 {
                0.0
            } else {
                (splitmix64(seed) >> 11) as f64 / (1u64 << 53) as f64
            };
            (0..count)
                .map(|i| {
                    let theta = core::f64::consts::PI * (i as f64 + offset) / count as f64;
                    [T::lit(theta.cos()), T::lit(theta.sin())]
                })
                .collect()
        };
        let mut best = T::infinity();
        for e in dirs {
            let (mut lo, mut hi) = (T::infinity(), T::neg_infinity());
            for p in &pts {
                let proj = p[0] * e[0] + p[1] * e[1];
                lo = lo.min(proj);
                hi = hi.max(proj);
            }
            best = best.min(hi - lo);
        }
        best
    };
    let ratio = md / r;
    Ok(MinimalDiameter { md, ratio, zero_nodes: pts.len(), flag: sigma.map(|s| ratio > s) })
}
