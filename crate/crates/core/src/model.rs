//! Validated model instances and their demographic quantities.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{integrate_graded, QuadGrid, Rule};
use crate::ratefn::{DensityDependence, RateFn};
use crate::tabulated::{TabulatedFn, DEFAULT_TABLE_NODES};

/// Integrated mortality beyond which survival is taken to be exactly zero.
pub const SURVIVAL_CAP: f64 = 700.0;

/// Largest supported number of Gauss–Legendre nodes per panel.
pub const MAX_QUAD_ORDER: usize = 32;

/// Numerical settings shared by all modules.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NumericOptions {
    /// Number of quadrature panels on `[0, a†]` before break-point alignment.
    pub quad_panels: usize,
    /// Gauss–Legendre nodes per panel.
    pub quad_order: usize,
    pub norm_tol: f64,
    /// Tolerance on scalar equations such as `φ = 1`.
    pub root_tol: f64,
    pub w_scan_max: f64,
    pub w_scan_points: usize,
    /// Nodes of the uniform output tables.
    pub table_nodes: usize,
    pub zeta_lo: f64,
    pub zeta_hi: f64,
    pub omega_max: f64,
    /// Relative residual accepted for a characteristic root.
    pub newton_tol: f64,
    pub max_roots: usize,
    pub stability_tol: f64,
}

impl Default for NumericOptions {
    fn default() -> Self {
        NumericOptions {
            quad_panels: 64,
            quad_order: 8,
            norm_tol: 1e-6,
            root_tol: 1e-10,
            w_scan_max: 100.0,
            w_scan_points: 2000,
            table_nodes: DEFAULT_TABLE_NODES,
            zeta_lo: -10.0,
            zeta_hi: 2.0,
            omega_max: 40.0,
            newton_tol: 1e-10,
            max_roots: 64,
            stability_tol: 1e-6,
        }
    }
}

impl NumericOptions {
    pub fn validate(&self) -> Result<()> {
        let pos = [
            ("norm_tol", self.norm_tol),
            ("root_tol", self.root_tol),
            ("w_scan_max", self.w_scan_max),
            ("omega_max", self.omega_max),
            ("newton_tol", self.newton_tol),
            ("stability_tol", self.stability_tol),
        ];
        for (name, v) in pos {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Validation(format!("numerics.{} must be positive, got {}", name, v)));
            }
        }
        if self.quad_panels == 0 || !(2..=MAX_QUAD_ORDER).contains(&self.quad_order) || self.w_scan_points < 2 || self.table_nodes < 2 {
            return Err(Error::Validation(
                "numerics: quad_panels >= 1, quad_order in 2..=32, w_scan_points >= 2 and table_nodes >= 2 required".into(),
            ));
        }
        if !(self.zeta_lo < self.zeta_hi) {
            return Err(Error::Validation(format!(
                "numerics: zeta_lo ({}) must be below zeta_hi ({})",
                self.zeta_lo, self.zeta_hi
            )));
        }
        Ok(())
    }
}

/// Everything that defines one model instance.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub a_dagger: f64,
    pub r0d: f64,
    pub alpha: f64,
    pub beta: RateFn,
    pub mu: RateFn,
    pub r: RateFn,
    pub q: RateFn,
    pub k: RateFn,
    pub phi: DensityDependence,
    pub numerics: NumericOptions,
}

impl ModelSpec {
    pub fn with_alpha(&self, alpha: f64) -> ModelSpec {
        ModelSpec { alpha, ..self.clone() }
    }
}

/// A validated model with its rates tabulated on the quadrature grid.
#[derive(Debug, Clone)]
pub struct Model {
    spec: ModelSpec,
    grid: QuadGrid,
    rule: Rule,
    pub(crate) beta: Vec<f64>,
    pub(crate) r: Vec<f64>,
    pub(crate) q: Vec<f64>,
    pub(crate) k: Vec<f64>,
    pub(crate) pi: Vec<f64>,
    pub(crate) l: Vec<f64>,
    l_edges: Vec<f64>,
    table_ages: Vec<f64>,
    pi_table: Vec<f64>,
    int_rpi: f64,
    int_betapi: f64,
    q_d_star: f64,
}

/// Demographic steady state.
#[derive(Debug, Clone)]
pub struct Demography {
    pub q_d_star: f64,
    pub n_star: TabulatedFn,
    pub b_dfe: f64,
}

impl Model {
    pub fn new(spec: ModelSpec) -> Result<Model> {
        let ad = spec.a_dagger;
        if !(ad > 0.0) || !ad.is_finite() {
            return Err(Error::Validation(format!("a_dagger must be positive, got {}", ad)));
        }
        if !(spec.r0d > 1.0) || !spec.r0d.is_finite() {
            return Err(Error::Validation(format!("r0d must exceed 1, got {}", spec.r0d)));
        }
        if !(spec.alpha >= 0.0) || !spec.alpha.is_finite() {
            return Err(Error::Validation(format!("alpha must be nonnegative, got {}", spec.alpha)));
        }
        spec.numerics.validate()?;
        let named = [
            ("beta", &spec.beta),
            ("mu", &spec.mu),
            ("r", &spec.r),
            ("q", &spec.q),
            ("k", &spec.k),
        ];
        for (name, f) in named {
            f.check_coverage(ad)
                .map_err(|e| Error::Validation(format!("{}: {}", name, e)))?;
            for i in 0..1000 {
                let a = ad * i as f64 / 999.0;
                let v = f.eval(a);
                if !v.is_finite() {
                    if i == 999 {
                        continue;
                    }
                    return Err(Error::Validation(format!("{} is not finite at a = {}", name, a)));
                }
                if v < 0.0 && name != "mu" {
                    return Err(Error::Validation(format!("{} is negative at a = {} ({})", name, a, v)));
                }
            }
        }
        spec.phi.validate(spec.phi.scan_limit(spec.numerics.w_scan_max.max(100.0)))?;

        let mut breaks = Vec::new();
        for (_, f) in named {
            breaks.extend(f.breakpoints());
        }
        let grid = QuadGrid::new(ad, spec.numerics.quad_panels, spec.numerics.quad_order, &breaks);
        let rule = Rule::new(spec.numerics.quad_order);
        let beta = grid.tabulate(|a| spec.beta.eval(a));
        let r = grid.tabulate(|a| spec.r.eval(a));
        let q = grid.tabulate(|a| spec.q.eval(a));
        let k = grid.tabulate(|a| spec.k.eval(a));

        let mut pi = Vec::with_capacity(grid.len());
        let mut m = 0.0;
        let mut prev = 0.0;
        for &x in grid.nodes() {
            m += integrate_graded(&rule, prev, x, ad, |s| spec.mu.eval(s))?;
            prev = x;
            pi.push(if m > SURVIVAL_CAP { 0.0 } else { (-m).exp() });
        }
        let l = grid.cumulative(&k);
        let l_edges = grid.edge_cumulative(&k);
        let prod = |f: &[f64]| grid.integrate(&f.iter().zip(&pi).map(|(a, b)| a * b).collect::<Vec<_>>());
        let int_betapi = prod(&beta);
        let int_rpi = prod(&r);
        if (int_betapi - 1.0).abs() > spec.numerics.norm_tol {
            return Err(Error::Validation(format!(
                "birth normalisation violated: integral of beta*pi = {} (tolerance {})",
                int_betapi, spec.numerics.norm_tol
            )));
        }
        if !(int_rpi > 0.0) {
            return Err(Error::Validation(format!("integral of r*pi must be positive, got {}", int_rpi)));
        }
        let q_d_star = solve_qd(&spec)?;
        let n = spec.numerics.table_nodes;
        let table_ages: Vec<f64> = (0..n)
            .map(|i| if i == n - 1 { ad } else { ad * i as f64 / (n - 1) as f64 })
            .collect();
        let mut pi_table = Vec::with_capacity(n);
        let mut m = 0.0;
        let mut prev = 0.0;
        for &a in &table_ages {
            m += if a >= ad {
                f64::INFINITY
            } else {
                integrate_graded(&rule, prev, a, ad, |s| spec.mu.eval(s))?
            };
            prev = a;
            pi_table.push(if m > SURVIVAL_CAP { 0.0 } else { (-m).exp() });
        }
        Ok(Model {
            spec,
            grid,
            rule,
            beta,
            r,
            q,
            k,
            pi,
            l,
            l_edges,
            table_ages,
            pi_table,
            int_rpi,
            int_betapi,
            q_d_star,
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn grid(&self) -> &QuadGrid {
        &self.grid
    }

    pub fn a_dagger(&self) -> f64 {
        self.spec.a_dagger
    }

    pub fn alpha(&self) -> f64 {
        self.spec.alpha
    }

    /// Survival at the quadrature nodes.
    pub fn pi_nodes(&self) -> &[f64] {
        &self.pi
    }

    /// `L` at the quadrature nodes.
    pub fn l_nodes(&self) -> &[f64] {
        &self.l
    }

    pub fn k_nodes(&self) -> &[f64] {
        &self.k
    }

    pub fn int_beta_pi(&self) -> f64 {
        self.int_betapi
    }

    pub fn int_r_pi(&self) -> f64 {
        self.int_rpi
    }

    pub fn q_d_star(&self) -> f64 {
        self.q_d_star
    }

    /// `N*(0)`, the birth rate of the disease-free population.
    pub fn b_dfe(&self) -> f64 {
        self.q_d_star / self.int_rpi
    }

    /// `∫_{a1}^{a2} μ`.
    pub fn integrated_mortality(&self, a1: f64, a2: f64) -> Result<f64> {
        let ad = self.spec.a_dagger;
        if a2 >= ad {
            return Ok(f64::INFINITY);
        }
        integrate_graded(&self.rule, a1.max(0.0), a2, ad, |s| self.spec.mu.eval(s))
    }

    /// `π(a) = exp(-∫_0^a μ)`, exactly zero at `a†`.
    pub fn survival(&self, a: f64) -> Result<f64> {
        self.survival_ratio(0.0, a)
    }

    /// `π(a2)/π(a1)` computed directly from the mortality between the two ages.
    pub fn survival_ratio(&self, a1: f64, a2: f64) -> Result<f64> {
        let m = self.integrated_mortality(a1, a2)?;
        Ok(if m > SURVIVAL_CAP { 0.0 } else { (-m).exp() })
    }

    /// `L(a) = ∫_0^a K`.
    pub fn cumulative_contagion(&self, a: f64) -> f64 {
        let a = a.clamp(0.0, self.spec.a_dagger);
        let p = self.grid.panel_of(a);
        let lo = self.grid.edges()[p];
        self.l_edges[p] + self.rule.integrate(lo, a, |s| self.spec.k.eval(s))
    }

    /// Ages of the uniform output tables.
    pub fn table_ages(&self) -> &[f64] {
        &self.table_ages
    }

    /// Survival at [`Model::table_ages`].
    pub fn pi_table(&self) -> &[f64] {
        &self.pi_table
    }

    /// A table on [`Model::table_ages`].
    pub fn table(&self, values: Vec<f64>) -> TabulatedFn {
        TabulatedFn::new(self.table_ages.clone(), values).expect("uniform table ages")
    }

    pub fn demographic_equilibrium(&self) -> Result<Demography> {
        let b = self.b_dfe();
        let vals = self.pi_table.iter().map(|p| b * p).collect();
        Ok(Demography {
            q_d_star: self.q_d_star,
            n_star: self.table(vals),
            b_dfe: b,
        })
    }
}

/// Leftmost root of `R0d·Φ(Q) = 1`.
fn solve_qd(spec: &ModelSpec) -> Result<f64> {
    let f = |x: f64| spec.r0d * spec.phi.eval(x) - 1.0;
    let mut x_stop = spec.phi.scan_limit(1.0);
    if spec.phi.cap().is_none() {
        while f(x_stop) > 0.0 && x_stop < 1e8 {
            x_stop *= 2.0;
        }
    }
    let n = 2000;
    let mut x0 = 0.0;
    let mut f0 = f(0.0);
    let (mut lo_phi, mut hi_phi) = (spec.phi.eval(0.0), spec.phi.eval(0.0));
    for i in 1..=n {
        let x1 = x_stop * i as f64 / n as f64;
        let f1 = f(x1);
        let p = spec.phi.eval(x1);
        lo_phi = lo_phi.min(p);
        hi_phi = hi_phi.max(p);
        if f1 == 0.0 {
            return Ok(x1);
        }
        if f0 > 0.0 && f1 < 0.0 {
            return Ok(bisect(f, x0, x1));
        }
        x0 = x1;
        f0 = f1;
    }
    Err(Error::NoRoot(format!(
        "R0d*Phi(Q) = 1 has no sign change on [0, {}]; Phi ranged over [{}, {}] against 1/R0d = {}",
        x_stop,
        lo_phi,
        hi_phi,
        1.0 / spec.r0d
    )))
}

/// Bisection of a bracketed sign change `f(lo) > 0 > f(hi)` or the reverse, to
/// floating-point resolution.
pub fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64) -> f64 {
    let flo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm > 0.0) == (flo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;
    use std::f64::consts::PI;

    #[test]
    fn survival_matches_cosine() {
        let m = Model::new(presets::choices()).unwrap();
        assert!((m.survival(PI / 4.0).unwrap() - (PI / 4.0).cos()).abs() < 1e-12);
        assert_eq!(m.survival(0.0).unwrap(), 1.0);
        assert_eq!(m.survival(PI / 2.0).unwrap(), 0.0);
        for (x, p) in m.grid().nodes().iter().zip(m.pi_nodes()) {
            assert!((p - x.cos()).abs() < 1e-12);
        }
    }

    #[test]
    fn survival_ratios() {
        let m = Model::new(presets::choices()).unwrap();
        for (a1, a2) in [(0.1, 0.2), (0.5, 1.4), (1.2, 1.5707), (0.0, 1.57079)] {
            let got = m.survival_ratio(a1, a2).unwrap();
            let want = f64::cos(a2) / f64::cos(a1);
            assert!((got - want).abs() < 1e-8 * want.max(1e-300) + 1e-14, "{a1} {a2}");
        }
    }

    #[test]
    fn contagion_integral() {
        let m = Model::new(presets::choices()).unwrap();
        assert!((m.cumulative_contagion(PI / 4.0) - PI / 6.0).abs() < 1e-14);
        assert_eq!(m.cumulative_contagion(0.0), 0.0);
        let s = Model::new(presets::choices_stab()).unwrap();
        assert!((s.cumulative_contagion(1.0) - 0.5).abs() < 1e-14);
    }

    #[test]
    fn demographic_equilibria() {
        let m = Model::new(presets::choices()).unwrap();
        // oracle: analytic inversion of the capped linear Φ
        assert!((m.q_d_star() - 18.0 * (1.0 - 1.0 / 27.0)).abs() < 1e-10);
        let s = Model::new(presets::choices_stab()).unwrap();
        assert!((s.q_d_star() - 25.0 / 3.0).abs() < 1e-10);
        assert!((s.spec().r0d * s.spec().phi.eval(s.q_d_star()) - 1.0).abs() < s.spec().numerics.root_tol);
        let d = s.demographic_equilibrium().unwrap();
        assert!((d.b_dfe - 25.0 / 3.0).abs() < 1e-9);
        assert!((d.n_star.eval(PI / 3.0) - 25.0 / 6.0).abs() < 1e-9);
        assert_eq!(*d.n_star.values().last().unwrap(), 0.0);
    }

    #[test]
    fn exact_root_at_scan_node() {
        let mut spec = presets::choices();
        // Φ = 2^-x equals 1/R0d exactly at x = 1, the last node of the scan
        spec.r0d = 2.0;
        spec.phi = DensityDependence::parse("2^(-x)").unwrap();
        let m = Model::new(spec).unwrap();
        assert!((m.q_d_star() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn validation_errors() {
        let mut spec = presets::choices();
        spec.r0d = 0.5;
        assert!(Model::new(spec).is_err());
        let mut spec = presets::choices();
        spec.beta = crate::ratefn::parse_rate("2").unwrap();
        match Model::new(spec) {
            Err(Error::Validation(msg)) => assert!(msg.contains("normalisation")),
            other => panic!("{other:?}"),
        }
        let mut spec = presets::choices();
        spec.k = crate::ratefn::parse_rate("piecewise{[0, 1): 1; [1, 1.5]: 0}").unwrap();
        assert!(Model::new(spec).is_err());
        let mut spec = presets::choices();
        spec.q = crate::ratefn::parse_rate("a - 1").unwrap();
        assert!(Model::new(spec).is_err());
    }
}
