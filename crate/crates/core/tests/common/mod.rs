//! Independent reference computations shared by the integration suites.
#![allow(dead_code)]

use si_age::ModelSpec;

/// `F, G, H` by nested trapezoid sums on `n` uniform cells, in the form with
/// `α ∫ e^{-WL(ρ) - α(σ-ρ)} dρ` (no integration by parts), then one
/// Richardson step against `2n` cells. Survival is `cos a`, so `spec` must
/// use `μ = tan a` on `[0, π/2]`. Choose `n` divisible by 6 so the jumps of
/// the step contact kernel fall on nodes.
pub fn fgh_oracle(spec: &ModelSpec, alpha: f64, w: f64, n: usize) -> (f64, f64, f64) {
    assert_eq!(spec.mu.source().replace(' ', ""), "tan(a)");
    let coarse = fgh_trapezoid(spec, alpha, w, n);
    let fine = fgh_trapezoid(spec, alpha, w, 2 * n);
    let rich = |c: f64, f: f64| (4.0 * f - c) / 3.0;
    (rich(coarse.0, fine.0), rich(coarse.1, fine.1), rich(coarse.2, fine.2))
}

fn fgh_trapezoid(spec: &ModelSpec, alpha: f64, w: f64, n: usize) -> (f64, f64, f64) {
    let ad = spec.a_dagger;
    let h = ad / n as f64;
    let a: Vec<f64> = (0..=n).map(|j| j as f64 * h).collect();
    let eps = 1e-12;
    // one-sided limits of K inside each cell
    let k_right_of: Vec<f64> = (0..n).map(|j| spec.k.eval(a[j] + eps)).collect();
    let k_left_of: Vec<f64> = (1..=n).map(|j| spec.k.eval(a[j] - eps)).collect();
    let mut l = vec![0.0; n + 1];
    for j in 1..=n {
        l[j] = l[j - 1] + 0.5 * h * (k_right_of[j - 1] + k_left_of[j - 1]);
    }
    let decay = (-alpha * h).exp();
    let mut inner_fg = vec![0.0; n + 1];
    let mut inner_h = vec![0.0; n + 1];
    for j in 1..=n {
        let (e0, e1) = ((-w * l[j - 1]).exp(), (-w * l[j]).exp());
        inner_fg[j] = decay * inner_fg[j - 1] + 0.5 * h * (decay * e0 + e1);
        inner_h[j] = decay * inner_h[j - 1] + 0.5 * h * (decay * k_right_of[j - 1] * e0 + k_left_of[j - 1] * e1);
    }
    let trap = |f: &dyn Fn(usize) -> f64| -> f64 {
        (0..=n).map(|j| if j == 0 || j == n { 0.5 * f(j) } else { f(j) }).sum::<f64>() * h
    };
    let pi = |j: usize| a[j].cos();
    let bracket = |j: usize| (-alpha * a[j]).exp() + alpha * inner_fg[j];
    let f = trap(&|j| spec.beta.eval(a[j]) * pi(j) * bracket(j));
    let g = trap(&|j| spec.r.eval(a[j]) * pi(j) * bracket(j));
    let hh = trap(&|j| spec.q.eval(a[j]) * pi(j) * inner_h[j]);
    (f, g, hh)
}

/// `φ(α, W) = R0d Φ(G/H) F` from [`fgh_oracle`].
pub fn phi_oracle(spec: &ModelSpec, alpha: f64, w: f64, n: usize) -> f64 {
    let (f, g, h) = fgh_oracle(spec, alpha, w, n);
    spec.r0d * spec.phi.eval(g / h) * f
}

/// `∫_0^{π/2} e^{-λa} sin(ka) da` in closed form.
pub fn sin_transform(l: num_complex::Complex64, k: f64) -> num_complex::Complex64 {
    let t = std::f64::consts::FRAC_PI_2;
    (k - (-l * t).exp() * (l * (k * t).sin() + k * (k * t).cos())) / (l * l + k * k)
}
