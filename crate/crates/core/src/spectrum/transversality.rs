//! Crossing direction of the `±5i` pair of the sine-shaped preset as `α`
//! leaves 0.

use num_complex::Complex64;

use super::kernels::build_kernels;
use super::{CharFn, Analytic};
use crate::equilibria::{eval_fgh, find_endemic, EquilibriumPoint};
use crate::error::{Error, Result};
use crate::model::Model;
use crate::presets;

/// Crossing frequency at `α = 0`.
pub const OMEGA0: f64 = 5.0;

/// Step for the `α`-differences.
const D_ALPHA: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct TransversalityReport {
    pub w_star0: f64,
    pub h0: f64,
    pub dh_dalpha: f64,
    pub dh_dw: f64,
    /// `W*'(0) = (12/125·W*₀ - 1)·∂αH/∂WH`.
    pub w_star_prime0: f64,
    /// `W*'(0) = -∂αφ/∂Wφ`, the implicit-function derivative.
    pub w_star_prime0_direct: f64,
    /// `1 - ∫cos(5a)Ψ4`, `∫sin(5a)Ψ4` at `α = 0`.
    pub a: f64,
    pub b: f64,
    /// `∫cos(5a)∂αΨ1`, `∫sin(5a)∂αΨ1` with the closed-form derivative kernel
    /// `sin2a·cos a·(-3W*₀ + 6a - 6∫_0^a e^{-W*₀σ²/2}dσ)`.
    pub c: f64,
    pub d: f64,
    /// `∫cos(5a)Ψ3`, `∫sin(5a)Ψ3` at `α = 0`.
    pub e: f64,
    pub f: f64,
    /// `∫cos(5a)∂αΨ2`, `∫sin(5a)∂αΨ2`.
    pub g: f64,
    pub h: f64,
    /// `C`, `D`, `G`, `H` from differences of the kernels along the branch.
    pub c_branch: f64,
    pub d_branch: f64,
    pub g_branch: f64,
    pub h_branch: f64,
    /// Partials at `(α, ζ, ω) = (0, 0, 5)`.
    pub df1_dalpha: f64,
    pub df2_dalpha: f64,
    pub df1_dzeta: f64,
    pub df2_dzeta: f64,
    /// Quotient of the partials above.
    pub zeta_prime0: f64,
    /// Same quotient with the branch-difference `C, D, G, H`.
    pub zeta_prime0_branch: f64,
    /// `d Re λ / dα` from following the root of the full characteristic
    /// function near `5i`.
    pub zeta_prime0_tracked: f64,
}

impl TransversalityReport {
    pub fn zeta_prime_from_partials(f1a: f64, f2a: f64, f1z: f64, f2z: f64) -> f64 {
        -(f1a * f1z + f2a * f2z) / (f1z * f1z + f2z * f2z)
    }
}

fn is_stab_preset(model: &Model) -> bool {
    let mut want = presets::choices_stab();
    want.alpha = model.spec().alpha;
    want.numerics = model.spec().numerics.clone();
    *model.spec() == want
}

fn unique_endemic(model: &Model, alpha: f64) -> Result<EquilibriumPoint> {
    let mut v = find_endemic(model, alpha)?;
    if v.len() != 1 {
        return Err(Error::EquilibriumNotFound(format!(
            "expected one endemic state at alpha = {}, found {}",
            alpha,
            v.len()
        )));
    }
    Ok(v.remove(0))
}

/// `(∫cos(ωa)v, ∫sin(ωa)v)` on the model grid.
fn moments(model: &Model, v: &[f64], omega: f64) -> (f64, f64) {
    let g = model.grid();
    let (mut c, mut s) = (0.0, 0.0);
    for ((&x, &w), &y) in g.nodes().iter().zip(g.weights()).zip(v) {
        c += w * (omega * x).cos() * y;
        s += w * (omega * x).sin() * y;
    }
    (c, s)
}

/// Transversality computation for the sine-shaped preset at `α = 0`.
pub fn transversality_at_zero(model: &Model) -> Result<TransversalityReport> {
    if !is_stab_preset(model) {
        return Err(Error::Precondition(
            "transversality formulas hold only for the choices-stab parameter set".into(),
        ));
    }
    let grid = model.grid();
    let n = grid.len();
    let eq0 = unique_endemic(model, 0.0)?;
    let w0 = eq0.w_star;
    let da = D_ALPHA;

    let h_at = |al: f64, w: f64| eval_fgh(model, al, w).map(|v| v.h);
    let h0 = h_at(0.0, w0)?;
    let dh_dalpha = (h_at(da, w0)? - h_at(-da, w0)?) / (2.0 * da);
    let dw = 1e-5 * w0;
    let dh_dw = (h_at(0.0, w0 + dw)? - h_at(0.0, w0 - dw)?) / (2.0 * dw);
    let w_star_prime0 = (12.0 / 125.0 * w0 - 1.0) * dh_dalpha / dh_dw;

    let phi_at = |al: f64, w: f64| crate::equilibria::eval_phi(model, al, w);
    let phi_a = (phi_at(da, w0)? - phi_at(-da, w0)?) / (2.0 * da);
    let phi_w = (phi_at(0.0, w0 + dw)? - phi_at(0.0, w0 - dw)?) / (2.0 * dw);
    let w_star_prime0_direct = -phi_a / phi_w;

    let k0 = build_kernels(model, &eq0)?;
    let (c4, s4) = moments(model, k0.node_values(3), OMEGA0);
    let (a, b) = (1.0 - c4, s4);
    let (e, f) = moments(model, k0.node_values(2), OMEGA0);

    // Closed-form derivative kernels at α = 0.
    let ages = grid.nodes();
    let ewl: Vec<f64> = model.l_nodes().iter().map(|l| (-w0 * l).exp()).collect();
    let big_p = grid.cumulative(&ewl);
    let dpsi1: Vec<f64> = (0..n)
        .map(|i| {
            let x = ages[i];
            (2.0 * x).sin() * x.cos() * (-3.0 * w0 + 6.0 * x - 6.0 * big_p[i])
        })
        .collect();
    let (c, d) = moments(model, &dpsi1, OMEGA0);
    // ∂αΨ2(0, a) = -B*·∫_a^{a†} c(σ)π(σ)K(σ-a)[P(σ) - P(σ-a)]dσ, which the
    // kernel builder produces as Ψ2 / α; a one-sided difference is exact to
    // first order because Ψ2 vanishes at α = 0.
    let kp = build_kernels(model, &unique_endemic(model, da)?)?;
    let km = build_kernels(model, &unique_endemic(model, -da)?)?;
    let diff = |i: usize| -> Vec<f64> {
        kp.node_values(i)
            .iter()
            .zip(km.node_values(i))
            .map(|(p, m)| (p - m) / (2.0 * da))
            .collect()
    };
    let dpsi2 = diff(1);
    let (g, h) = moments(model, &dpsi2, OMEGA0);
    let (c_branch, d_branch) = moments(model, &diff(0), OMEGA0);
    let (g_branch, h_branch) = (g, h);

    // -Ψ̂1'(5i) = ∫ a e^{-5ia} Ψ1(0, a) da
    let a_psi1: Vec<f64> = (0..n).map(|i| ages[i] * k0.node_values(0)[i]).collect();
    let (m1c, m1s) = moments(model, &a_psi1, OMEGA0);
    let (u, v) = (m1c, -m1s);
    let df1_dzeta = u * a - v * b;
    let df2_dzeta = u * b + v * a;

    let partials = |c: f64, d: f64, g: f64, h: f64| {
        (-a * c - b * d - e * g + f * h, -b * c + a * d + f * g + e * h)
    };
    let (df1_dalpha, df2_dalpha) = partials(c, d, g, h);
    let zeta_prime0 = TransversalityReport::zeta_prime_from_partials(df1_dalpha, df2_dalpha, df1_dzeta, df2_dzeta);
    let (b1, b2) = partials(c_branch, d_branch, g_branch, h_branch);
    let zeta_prime0_branch = TransversalityReport::zeta_prime_from_partials(b1, b2, df1_dzeta, df2_dzeta);

    let tol = model.spec().numerics.newton_tol;
    let track = |k: &super::KernelSet| -> Result<Complex64> {
        let f = CharFn(k);
        let mut z = Complex64::new(0.0, OMEGA0);
        for _ in 0..50 {
            let (val, der, scale) = f.eval(z);
            let step = val / der;
            z -= step;
            if val.norm() / scale < 1e-3 * tol || step.norm() < 1e-14 {
                return Ok(z);
            }
        }
        Err(Error::NoRoot("Newton did not settle near 5i".into()))
    };
    let zp = track(&kp)?;
    let zm = track(&km)?;
    let zeta_prime0_tracked = (zp.re - zm.re) / (2.0 * da);

    Ok(TransversalityReport {
        w_star0: w0,
        h0,
        dh_dalpha,
        dh_dw,
        w_star_prime0,
        w_star_prime0_direct,
        a,
        b,
        c,
        d,
        e,
        f,
        g,
        h,
        c_branch,
        d_branch,
        g_branch,
        h_branch,
        df1_dalpha,
        df2_dalpha,
        df1_dzeta,
        df2_dzeta,
        zeta_prime0,
        zeta_prime0_branch,
        zeta_prime0_tracked,
    })
}
