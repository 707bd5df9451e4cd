//! Linearisation around equilibria: kernels, characteristic function, roots
//! and stability.

mod kernels;
mod roots;
pub mod transversality;

pub use kernels::{build_kernels, KernelSet, Transforms};
pub use roots::{
    find_roots, rightmost_root, Analytic, Region, Root, RootOptions, SpectrumResult, WindingBox,
    WINDOW_HALF_WIDTH,
};
pub use transversality::{transversality_at_zero, TransversalityReport};

use num_complex::Complex64;

use crate::equilibria::{disease_free, EquilibriumPoint};
use crate::error::{Error, Result};
use crate::model::{bisect, Model, NumericOptions};
use crate::quadrature::Rule;

/// `Ψ(λ) = (1 - Ψ̂1)(1 - Ψ̂4) - Ψ̂2 Ψ̂3`.
pub fn char_fn(kernels: &KernelSet, lambda: Complex64) -> Complex64 {
    CharFn(kernels).eval(lambda).0
}

/// The full characteristic function as an [`Analytic`] map.
pub struct CharFn<'k>(pub &'k KernelSet);

impl Analytic for CharFn<'_> {
    fn eval(&self, lambda: Complex64) -> (Complex64, Complex64, f64) {
        let t = self.0.transforms(lambda);
        let [p1, p2, p3, p4] = t.value;
        let [d1, d2, d3, d4] = t.deriv;
        let one = Complex64::new(1.0, 0.0);
        let v = (one - p1) * (one - p4) - p2 * p3;
        let d = -d1 * (one - p4) - (one - p1) * d4 - d2 * p3 - p2 * d3;
        let scale = 1.0 + p1.norm() + p4.norm() + (p1 * p4).norm() + (p2 * p3).norm();
        (v, d, scale)
    }

    fn no_root_margin(&self, zeta: f64) -> f64 {
        let [a1, a2, a3, a4] = self.0.abs_transforms(zeta);
        1.0 - a1 - a4 - a1 * a4 - a2 * a3
    }
}

/// `1 - Ψ̂_i(λ)` for a single kernel (`i` 0-based).
pub struct Factor<'k> {
    pub kernels: &'k KernelSet,
    pub index: usize,
}

impl Analytic for Factor<'_> {
    fn eval(&self, lambda: Complex64) -> (Complex64, Complex64, f64) {
        let t = self.kernels.transforms(lambda);
        let p = t.value[self.index];
        (Complex64::new(1.0, 0.0) - p, -t.deriv[self.index], 1.0 + p.norm())
    }

    fn no_root_margin(&self, zeta: f64) -> f64 {
        1.0 - self.kernels.abs_transforms(zeta)[self.index]
    }
}

impl From<&NumericOptions> for RootOptions {
    fn from(o: &NumericOptions) -> Self {
        RootOptions { newton_tol: o.newton_tol, max_roots: o.max_roots }
    }
}

/// Default search rectangle taken from the numeric options.
pub fn default_region(o: &NumericOptions) -> Region {
    Region { zeta_lo: o.zeta_lo, zeta_hi: o.zeta_hi, omega_max: o.omega_max }
}

/// Stability verdict for a rightmost root.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Stable,
    Unstable,
    /// Rightmost real part within the stability tolerance of 0.
    Marginal,
}

impl Verdict {
    /// Classifies a rightmost root; `None` means no root above the search window.
    pub fn of(rightmost: Option<Root>, tol: f64) -> Verdict {
        match rightmost {
            None => Verdict::Stable,
            Some(r) if r.lambda.re < -tol => Verdict::Stable,
            Some(r) if r.lambda.re > tol => Verdict::Unstable,
            Some(_) => Verdict::Marginal,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Verdict::Stable => "stable",
            Verdict::Unstable => "unstable",
            Verdict::Marginal => "marginal",
        }
    }
}

/// Rightmost characteristic root at `eq` using the model's numeric options.
pub fn rightmost_at(model: &Model, eq: &EquilibriumPoint) -> Result<Option<Root>> {
    let o = &model.spec().numerics;
    let k = build_kernels(model, eq)?;
    rightmost_root(&CharFn(&k), o.zeta_lo, o.zeta_hi, o.omega_max, o.into())
}

/// All characteristic roots at `eq` inside the default search rectangle,
/// widened to the right when the rightmost root lies beyond it.
pub fn spectrum_at(model: &Model, eq: &EquilibriumPoint) -> Result<SpectrumResult> {
    let o = &model.spec().numerics;
    let k = build_kernels(model, eq)?;
    let f = CharFn(&k);
    let mut region = default_region(o);
    if let Some(r) = rightmost_root(&f, o.zeta_lo, o.zeta_hi, o.omega_max, o.into())? {
        region.zeta_hi = region.zeta_hi.max(r.lambda.re + 2.0 * WINDOW_HALF_WIDTH);
    }
    find_roots(&f, region, o.into())
}

#[derive(Debug, Clone, PartialEq)]
pub struct DfeStability {
    pub r0e: f64,
    /// Rightmost zero of `1 - Ψ̂4`.
    pub epidemic_factor_rightmost: Option<Root>,
    /// Rightmost zero of `1 - Ψ̂1`, the demographic characteristic equation.
    pub demographic_factor_rightmost: Option<Root>,
    pub verdict: Verdict,
}

/// Stability of the disease-free equilibrium, factor by factor.
pub fn dfe_stability(model: &Model, alpha: f64) -> Result<DfeStability> {
    let o = &model.spec().numerics;
    let eq = disease_free(model, alpha)?;
    let k = build_kernels(model, &eq)?;
    let opts: RootOptions = o.into();
    let epi = rightmost_root(&Factor { kernels: &k, index: 3 }, o.zeta_lo, o.zeta_hi, o.omega_max, opts)?;
    let demo = rightmost_root(&Factor { kernels: &k, index: 0 }, o.zeta_lo, o.zeta_hi, o.omega_max, opts)?;
    let right = [epi, demo]
        .into_iter()
        .flatten()
        .max_by(|a, b| a.lambda.re.total_cmp(&b.lambda.re));
    Ok(DfeStability {
        r0e: eq.r0e,
        epidemic_factor_rightmost: epi,
        demographic_factor_rightmost: demo,
        verdict: Verdict::of(right, o.stability_tol),
    })
}

/// One demographic-factor threshold of the sine-shaped preset at `α = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TauThreshold {
    pub k: usize,
    /// Crossing frequency found numerically (expected `2k + 1`).
    pub omega: f64,
    pub tau_numeric: f64,
    pub tau_closed: f64,
}

/// Agreement required between the two routes in [`tau_thresholds`].
pub const TAU_AGREEMENT_TOL: f64 = 1e-8;

/// `(1 - 4k²)/3` for even `k`, `(-4k² - 8k - 3)/3` for odd `k`.
pub fn tau_closed_form(k: usize) -> f64 {
    let k = k as f64;
    if k as usize % 2 == 0 {
        (1.0 - 4.0 * k * k) / 3.0
    } else {
        (-4.0 * k * k - 8.0 * k - 3.0) / 3.0
    }
}

/// `(∫ cos(ωa) sin 2a cos a da, ∫ sin(ωa) sin 2a cos a da)` over `[0, π/2]`.
fn trig_moments(rule: &Rule, omega: f64) -> (f64, f64) {
    let panels = 16;
    let h = std::f64::consts::FRAC_PI_2 / panels as f64;
    let (mut c, mut s) = (0.0, 0.0);
    for p in 0..panels {
        let lo = p as f64 * h;
        c += rule.integrate(lo, lo + h, |a| (omega * a).cos() * (2.0 * a).sin() * a.cos());
        s += rule.integrate(lo, lo + h, |a| (omega * a).sin() * (2.0 * a).sin() * a.cos());
    }
    (c, s)
}

/// Values of `τ = R0d·B*·Φ'(Q*)` at which `1 - (1 + τ)·(3/2)·∫e^{-iωa} sin 2a cos a da`
/// vanishes at `ω ≈ 2k + 1`, for `k = 2..=k_max`, computed by quadrature and
/// bisection and checked against the closed form.
pub fn tau_thresholds(k_max: usize) -> Result<Vec<TauThreshold>> {
    if k_max < 2 {
        return Err(Error::Precondition(format!("k_max = {} < 2", k_max)));
    }
    let rule = Rule::new(24);
    let mut out = Vec::new();
    for k in 2..=k_max {
        let w0 = 2.0 * k as f64 + 1.0;
        let s = |w: f64| trig_moments(&rule, w).1;
        let (lo, hi) = (w0 - 0.5, w0 + 0.5);
        if s(lo) * s(hi) > 0.0 {
            return Err(Error::NoRoot(format!("sine moment has no sign change near omega = {}", w0)));
        }
        let omega = bisect(s, lo, hi);
        let (c, _) = trig_moments(&rule, omega);
        let tau_numeric = 1.0 / (1.5 * c) - 1.0;
        let tau_closed = tau_closed_form(k);
        if (tau_numeric - tau_closed).abs() > TAU_AGREEMENT_TOL * (1.0 + tau_closed.abs()) {
            return Err(Error::Quadrature {
                lo: 0.0,
                hi: std::f64::consts::FRAC_PI_2,
                message: format!(
                    "threshold k = {}: numeric {} vs closed form {}; increase resolution",
                    k, tau_numeric, tau_closed
                ),
            });
        }
        out.push(TauThreshold { k, omega, tau_numeric, tau_closed });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibria::{find_endemic, EqKind};
    use crate::presets;
    use crate::quadrature::QuadGrid;
    use std::f64::consts::FRAC_PI_2;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// `∫_0^{π/2} e^{-λa} sin(ka) da` in closed form.
    fn sin_transform(l: Complex64, k: f64) -> Complex64 {
        let t = FRAC_PI_2;
        (k - (-l * t).exp() * (l * (k * t).sin() + k * (k * t).cos())) / (l * l + k * k)
    }

    #[test]
    fn laplace_matches_closed_form() {
        let g = QuadGrid::new(FRAC_PI_2, 64, 8, &[]);
        let v = g.tabulate(|a| 0.7 * (2.0 * a).sin() * a.cos());
        let z = vec![0.0; g.len()];
        let k = KernelSet::from_nodes(g, [v, z.clone(), z.clone(), z]);
        for l in [c(0.0, 0.0), c(1.0, 0.0), c(0.0, 5.0), c(1.0, 5.0), c(-2.0, 33.0)] {
            let want = 0.35 * (sin_transform(l, 3.0) + sin_transform(l, 1.0));
            let got = k.transforms(l).value[0];
            assert!((got - want).norm() < 1e-10, "{l}: {got} vs {want}");
        }
    }

    #[test]
    fn empty_kernels_give_one() {
        let g = QuadGrid::new(FRAC_PI_2, 8, 8, &[]);
        let z = vec![0.0; g.len()];
        let k = KernelSet::from_nodes(g, [z.clone(), z.clone(), z.clone(), z]);
        for l in [c(0.0, 0.0), c(-3.0, 2.0), c(1.0, 39.0)] {
            assert_eq!(char_fn(&k, l), c(1.0, 0.0));
        }
    }

    #[test]
    fn transform_derivative_matches_difference() {
        let m = Model::new(presets::choices()).unwrap();
        let eq = &find_endemic(&m, 10.0).unwrap()[0];
        let k = build_kernels(&m, eq).unwrap();
        let f = CharFn(&k);
        let l = c(0.3, 2.2);
        let h = 1e-6;
        let fd = (f.eval(l + h).0 - f.eval(l - h).0) / (2.0 * h);
        assert!((f.eval(l).1 - fd).norm() < 1e-6 * (1.0 + fd.norm()));
    }

    #[test]
    fn dfe_kernels_factorise() {
        let m = Model::new(presets::choices()).unwrap();
        let eq = disease_free(&m, 10.0).unwrap();
        let k = build_kernels(&m, &eq).unwrap();
        assert!(k.node_values(2).iter().all(|&x| x == 0.0));
        // 1 - Ψ̂4(0) = 1 - B* H(α, 0)
        let h0 = crate::equilibria::eval_fgh(&m, 10.0, 0.0).unwrap().h;
        let p4 = k.transforms(c(0.0, 0.0)).value[3];
        assert!((p4.re - eq.b_star * h0).abs() < 1e-10 * (1.0 + p4.re.abs()), "{} vs {}", p4.re, eq.b_star * h0);
        assert!((p4.re - eq.r0e).abs() < 1e-8);
    }

    #[test]
    fn stab_preset_kernels_at_alpha_zero() {
        let m = Model::new(presets::choices_stab()).unwrap();
        let eqs = find_endemic(&m, 0.0).unwrap();
        assert_eq!(eqs.len(), 1);
        let eq = &eqs[0];
        assert_eq!(eq.kind, EqKind::Endemic);
        let k = build_kernels(&m, eq).unwrap();
        assert!(k.node_values(1).iter().all(|&x| x == 0.0));
        let tau = m.spec().r0d * eq.b_star * (-0.1);
        assert!((tau + 5.0).abs() < 1e-6, "tau = {tau}");
        for (i, &a) in m.grid().nodes().iter().enumerate() {
            let want = (1.0 + tau) * 1.5 * (2.0 * a).sin() * a.cos();
            assert!((k.node_values(0)[i] - want).abs() < 1e-9);
        }
        for l in [c(0.0, 5.0), c(0.0, -5.0)] {
            assert!(char_fn(&k, l).norm() < 1e-6, "{}", char_fn(&k, l));
        }
    }

    #[test]
    fn conjugate_symmetry() {
        let m = Model::new(presets::choices2()).unwrap();
        let eq = &find_endemic(&m, 0.9).unwrap()[0];
        let k = build_kernels(&m, eq).unwrap();
        for l in [c(0.2, 1.0), c(-4.0, 17.0), c(1.5, 0.3)] {
            assert!((char_fn(&k, l.conj()) - char_fn(&k, l).conj()).norm() < 1e-12);
        }
    }

    #[test]
    fn thresholds_agree_with_closed_form() {
        let t = tau_thresholds(6).unwrap();
        assert_eq!(t.len(), 5);
        assert_eq!(t[0].tau_closed, -5.0);
        assert_eq!(tau_closed_form(3), -21.0);
        assert_eq!(tau_closed_form(4), -21.0);
        for x in &t {
            assert!((x.omega - (2 * x.k + 1) as f64).abs() < 1e-8);
        }
        assert!(t.iter().all(|x| x.tau_closed <= -5.0));
    }

    #[test]
    fn verdict_bands() {
        let r = |z| Some(Root { lambda: c(z, 1.0), residual: 0.0, multiplicity: 1 });
        assert_eq!(Verdict::of(r(-1e-3), 1e-6), Verdict::Stable);
        assert_eq!(Verdict::of(r(1e-3), 1e-6), Verdict::Unstable);
        assert_eq!(Verdict::of(r(1e-7), 1e-6), Verdict::Marginal);
        assert_eq!(Verdict::of(None, 1e-6), Verdict::Stable);
    }
}
