//! Steady states: the functions F, G, H and φ, the epidemic reproduction ratio,
//! endemic equilibria and their age profiles.
//!
//! For fixed `α` the inner integrals are reorganised so that a single backward
//! sweep
//!
//! ```text
//! T_g(ρ) = ∫_ρ^{a†} g(σ) e^{-α(σ-ρ)} dσ
//! ```
//!
//! per weight `g ∈ {βπ, rπ, qπ}` turns every later evaluation of F, G, H into a
//! plain weighted sum over the quadrature nodes.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{bisect, Model};
use crate::tabulated::TabulatedFn;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EqKind {
    DiseaseFree,
    Endemic,
}

impl EqKind {
    pub fn label(self) -> &'static str {
        match self {
            EqKind::DiseaseFree => "disease-free",
            EqKind::Endemic => "endemic",
        }
    }
}

/// A steady state of the model at one value of `α`.
#[derive(Debug, Clone)]
pub struct EquilibriumPoint {
    pub alpha: f64,
    pub kind: EqKind,
    pub w_star: f64,
    pub b_star: f64,
    pub q_star: f64,
    pub r0e: f64,
    pub s_profile: TabulatedFn,
    pub i_profile: TabulatedFn,
    /// ∂φ/∂W at `w_star`.
    pub phi_slope: f64,
    /// Set when Φ is not decreasing at `q_star`.
    pub outside_monotone_region: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fgh {
    pub f: f64,
    pub g: f64,
    pub h: f64,
}

/// φ(α, ·) for one fixed `α`.
#[derive(Debug, Clone)]
pub struct PhiCurve<'m> {
    model: &'m Model,
    alpha: f64,
    beta_pi: Vec<f64>,
    r_pi: Vec<f64>,
    t_beta: Vec<f64>,
    t_r: Vec<f64>,
    t_q: Vec<f64>,
}

impl<'m> PhiCurve<'m> {
    pub fn new(model: &'m Model, alpha: f64) -> Self {
        let g = model.grid();
        let times = |f: &[f64]| -> Vec<f64> { f.iter().zip(&model.pi).map(|(a, b)| a * b).collect() };
        let beta_pi = times(&model.beta);
        let r_pi = times(&model.r);
        let q_pi = times(&model.q);
        PhiCurve {
            t_beta: g.backward_decay(&beta_pi, alpha),
            t_r: g.backward_decay(&r_pi, alpha),
            t_q: g.backward_decay(&q_pi, alpha),
            model,
            alpha,
            beta_pi,
            r_pi,
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn model(&self) -> &Model {
        self.model
    }

    pub fn fgh(&self, w: f64) -> Fgh {
        let g = self.model.grid();
        let (mut f, mut gg, mut h) = (0.0, 0.0, 0.0);
        for i in 0..g.len() {
            let e = (-w * self.model.l[i]).exp();
            let wt = g.weights()[i];
            let ke = self.model.k[i] * e;
            f += wt * (self.beta_pi[i] * e + w * ke * self.t_beta[i]);
            gg += wt * (self.r_pi[i] * e + w * ke * self.t_r[i]);
            h += wt * ke * self.t_q[i];
        }
        Fgh { f, g: gg, h }
    }

    /// φ(α, W); zero when `H` vanishes, since then `G/H` is unbounded.
    pub fn phi(&self, w: f64) -> f64 {
        let v = self.fgh(w);
        if v.h <= 0.0 {
            return 0.0;
        }
        self.model.spec().r0d * self.model.spec().phi.eval(v.g / v.h) * v.f
    }

    /// Central difference with step `1e-4·max(1, W)` (forward at `W = 0`).
    pub fn slope(&self, w: f64) -> f64 {
        let h = 1e-4 * w.max(1.0);
        if w < h {
            (self.phi(w + h) - self.phi(w)) / h
        } else {
            (self.phi(w + h) - self.phi(w - h)) / (2.0 * h)
        }
    }

    /// `J(a) = ∫_0^a K(ρ) e^{-W L(ρ) - α(a-ρ)} dρ` at the quadrature nodes.
    pub fn j_nodes(&self, w: f64) -> Vec<f64> {
        let m = self.model;
        let f: Vec<f64> = m.k.iter().zip(&m.l).map(|(k, l)| k * (-w * l).exp()).collect();
        m.grid().forward_decay(&f, self.alpha)
    }
}

pub fn eval_fgh(model: &Model, alpha: f64, w: f64) -> Result<Fgh> {
    check_w(w)?;
    let v = PhiCurve::new(model, alpha).fgh(w);
    for (name, x) in [("F", v.f), ("G", v.g), ("H", v.h)] {
        if !x.is_finite() {
            return Err(Error::NonFinite {
                value: x,
                location: format!("{}({}, {})", name, alpha, w),
            });
        }
    }
    Ok(v)
}

pub fn eval_phi(model: &Model, alpha: f64, w: f64) -> Result<f64> {
    let v = eval_fgh(model, alpha, w)?;
    if v.h <= 0.0 {
        return Err(Error::Degenerate(format!(
            "H({}, {}) = {}: no transmission path (K*q vanishes)",
            alpha, w, v.h
        )));
    }
    Ok(model.spec().r0d * model.spec().phi.eval(v.g / v.h) * v.f)
}

fn check_w(w: f64) -> Result<()> {
    if !(w >= 0.0) || !w.is_finite() {
        return Err(Error::Precondition(format!("W must be finite and nonnegative, got {}", w)));
    }
    Ok(())
}

/// Relative tolerance of the agreement between the two routes to `R0e`.
pub const R0E_CROSS_TOL: f64 = 1e-8;

/// `R0e = N*(0)·H(α, 0)`, verified against the next-generation form
/// `∫ K(a) N*(a) ∫_a^{a†} q(σ) π(σ)/π(a) e^{-α(σ-a)} dσ da`.
pub fn epidemic_reproduction(model: &Model, alpha: f64) -> Result<f64> {
    let (primary, check) = epidemic_reproduction_both(model, alpha);
    if (primary - check).abs() > R0E_CROSS_TOL * (1.0 + primary.abs()) {
        let g = model.grid();
        return Err(Error::Quadrature {
            lo: 0.0,
            hi: g.a_dagger(),
            message: format!("R0e routes disagree: {} vs {}", primary, check),
        });
    }
    Ok(primary)
}

/// Both routes to `R0e`: through `H(α,0)` and through the next-generation kernel.
pub fn epidemic_reproduction_both(model: &Model, alpha: f64) -> (f64, f64) {
    let g = model.grid();
    let n0 = model.b_dfe();
    let primary = n0 * PhiCurve::new(model, alpha).fgh(0.0).h;
    // next-generation form with the infection age integrated forward from each
    // source age instead of backward from each infected age
    let q_pi: Vec<f64> = model.q.iter().zip(&model.pi).map(|(a, b)| a * b).collect();
    let fwd = g.forward_decay(&model.k, alpha);
    let f: Vec<f64> = (0..g.len()).map(|i| q_pi[i] * n0 * fwd[i]).collect();
    let check = g.integrate(&f);
    (primary, check)
}

/// Disease-free equilibrium at `alpha`.
pub fn disease_free(model: &Model, alpha: f64) -> Result<EquilibriumPoint> {
    let demo = model.demographic_equilibrium()?;
    let curve = PhiCurve::new(model, alpha);
    let ad = model.a_dagger();
    Ok(EquilibriumPoint {
        alpha,
        kind: EqKind::DiseaseFree,
        w_star: 0.0,
        b_star: demo.b_dfe,
        q_star: demo.q_d_star,
        r0e: epidemic_reproduction(model, alpha)?,
        s_profile: demo.n_star,
        i_profile: TabulatedFn::zeros(ad, model.table_ages().len()),
        phi_slope: curve.slope(0.0),
        outside_monotone_region: false,
    })
}

/// All endemic equilibria with `W` in `(0, w_scan_max]`, sorted by `W`.
///
/// Roots closer together than the scan spacing can be missed.
pub fn find_endemic(model: &Model, alpha: f64) -> Result<Vec<EquilibriumPoint>> {
    let curve = PhiCurve::new(model, alpha);
    Ok(endemic_roots(&curve)?
        .into_iter()
        .map(|w| build_point(&curve, w))
        .collect::<Result<Vec<_>>>()?)
}

/// The `W` values where φ(α, W) = 1.
pub fn endemic_roots(curve: &PhiCurve) -> Result<Vec<f64>> {
    let model = curve.model();
    if curve.fgh(0.0).h <= 0.0 {
        return Ok(Vec::new());
    }
    let num = &model.spec().numerics;
    let n = num.w_scan_points;
    let wmax = num.w_scan_max;
    let f = |w: f64| curve.phi(w) - 1.0;
    let mut roots = Vec::new();
    let mut w0 = 0.0;
    let mut f0 = f(0.0);
    for i in 1..=n {
        let w1 = wmax * i as f64 / n as f64;
        let f1 = f(w1);
        if !f1.is_finite() {
            return Err(Error::NonFinite {
                value: f1,
                location: format!("phi({}, {})", curve.alpha(), w1),
            });
        }
        if f1 == 0.0 {
            roots.push(w1);
        } else if f0 != 0.0 && (f0 > 0.0) != (f1 > 0.0) {
            roots.push(bisect(f, w0, w1));
        }
        w0 = w1;
        f0 = f1;
    }
    // φ = 1 cannot hold where Φ has been clipped to zero
    roots.retain(|&w| {
        let v = curve.fgh(w);
        model.spec().phi.eval(v.g / v.h) > 0.0
    });
    Ok(roots)
}

/// Full equilibrium from a root `W*` of φ(α, ·) = 1.
pub fn reconstruct_equilibrium(model: &Model, alpha: f64, w_star: f64) -> Result<EquilibriumPoint> {
    check_w(w_star)?;
    let curve = PhiCurve::new(model, alpha);
    let phi = curve.phi(w_star);
    let tol = model.spec().numerics.root_tol;
    if !((phi - 1.0).abs() < tol) {
        return Err(Error::Precondition(format!(
            "phi({}, {}) = {} is not within {} of 1",
            alpha, w_star, phi, tol
        )));
    }
    build_point(&curve, w_star)
}

pub(crate) fn build_point(curve: &PhiCurve, w: f64) -> Result<EquilibriumPoint> {
    let model = curve.model();
    let alpha = curve.alpha();
    if w == 0.0 {
        return disease_free(model, alpha);
    }
    let v = curve.fgh(w);
    if v.h <= 0.0 {
        return Err(Error::Degenerate(format!("H({}, {}) = {}", alpha, w, v.h)));
    }
    let b = 1.0 / v.h;
    let q = v.g / v.h;
    let j = curve.j_nodes(w);
    let g = model.grid();
    let ages = model.table_ages();
    let pis = model.pi_table();
    let mut s = Vec::with_capacity(ages.len());
    let mut i_vals = Vec::with_capacity(ages.len());
    for (idx, (&a, &p)) in ages.iter().zip(pis).enumerate() {
        s.push(b * (-w * model.cumulative_contagion(a)).exp() * p);
        i_vals.push(if idx == 0 { 0.0 } else { b * w * p * g.interp(&j, a) });
    }
    let phi = &model.spec().phi;
    let outside = match phi.derivative(q) {
        Ok(d) => d >= 0.0,
        Err(_) => false,
    };
    Ok(EquilibriumPoint {
        alpha,
        kind: EqKind::Endemic,
        w_star: w,
        b_star: b,
        q_star: q,
        r0e: epidemic_reproduction(model, alpha)?,
        s_profile: model.table(s),
        i_profile: model.table(i_vals),
        phi_slope: curve.slope(w),
        outside_monotone_region: outside,
    })
}

/// `S*(a)` and `I*(a)` from their closed forms, with the inner integral done
/// by direct quadrature rather than through the node tables.
pub fn profile_at(model: &Model, eq: &EquilibriumPoint, a: f64) -> Result<(f64, f64)> {
    let p = model.survival(a)?;
    let w = eq.w_star;
    let s = eq.b_star * (-w * model.cumulative_contagion(a)).exp() * p;
    if w == 0.0 || a <= 0.0 {
        return Ok((s, 0.0));
    }
    let g = model.grid();
    let rule = g.rule();
    let k = &model.spec().k;
    let mut j = 0.0;
    for pnl in g.edges().windows(2) {
        if pnl[0] >= a {
            break;
        }
        let hi = pnl[1].min(a);
        j += rule.integrate(pnl[0], hi, |r| {
            k.eval(r) * (-w * model.cumulative_contagion(r) - eq.alpha * (a - r)).exp()
        });
    }
    Ok((s, eq.b_star * w * p * j))
}

/// Outcome of checking the sufficient condition for a unique endemic state.
#[derive(Debug, Clone, PartialEq)]
pub struct UniquenessCheck {
    pub holds: bool,
    /// Smallest value of right side minus left side over the grid.
    pub worst_violation: f64,
    pub at: (f64, f64),
}

/// Checks, for all grid pairs `ρ1 ≤ ρ2`,
/// `K(ρ1)·Q(ρ1)·R(ρ2) ≤ K(ρ2)·R(ρ1)·Q(ρ2)` with
/// `Q(ρ) = ∫_ρ^{a†} qπe^{-ασ}` and `R(ρ) = ∫_ρ^{a†} rπe^{-ασ}`.
pub fn check_uniqueness_condition(model: &Model, alpha: f64, grid_n: usize) -> Result<UniquenessCheck> {
    if grid_n < 2 {
        return Err(Error::Precondition(format!("grid_n must be at least 2, got {}", grid_n)));
    }
    let g = model.grid();
    let ad = model.a_dagger();
    let weighted = |f: &[f64]| -> Vec<f64> { f.iter().zip(&model.pi).map(|(a, b)| a * b).collect() };
    let tq = g.backward_decay(&weighted(&model.q), alpha);
    let tr = g.backward_decay(&weighted(&model.r), alpha);
    let pts: Vec<(f64, f64, f64, f64)> = (0..grid_n)
        .map(|i| {
            let rho = ad * i as f64 / (grid_n - 1) as f64;
            let scale = (-alpha * rho).exp();
            let (qv, rv) = if i == grid_n - 1 {
                (0.0, 0.0)
            } else {
                (scale * g.interp(&tq, rho), scale * g.interp(&tr, rho))
            };
            (rho, model.spec().k.eval(rho), qv, rv)
        })
        .collect();
    let mut worst = f64::INFINITY;
    let mut at = (0.0, 0.0);
    for i in 0..grid_n {
        let (r1, k1, q1, rr1) = pts[i];
        for &(r2, k2, q2, rr2) in &pts[i..] {
            let margin = (k2 * q2) * rr1 - (k1 * q1) * rr2;
            if margin < worst {
                worst = margin;
                at = (r1, r2);
            }
        }
    }
    Ok(UniquenessCheck {
        holds: worst >= -1e-12,
        worst_violation: worst,
        at,
    })
}
