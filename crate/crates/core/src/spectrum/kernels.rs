//! Convolution kernels of the linearised birth / force-of-infection system and
//! their Laplace transforms.

use std::sync::OnceLock;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::equilibria::{EqKind, EquilibriumPoint};
use crate::error::{Error, Result};
use crate::model::{Model, MAX_QUAD_ORDER};
use crate::quadrature::QuadGrid;
use crate::tabulated::TabulatedFn;

/// Kernels `Ψ1..Ψ4` around one equilibrium, stored at the quadrature nodes.
#[derive(Debug)]
pub struct KernelSet {
    pub at: Option<EquilibriumPoint>,
    grid: QuadGrid,
    nodes: [Vec<f64>; 4],
    /// Node data on grids with every panel split `m` times, indexed by `m - 2`.
    refined: Vec<OnceLock<(QuadGrid, [Vec<f64>; 4])>>,
}

/// Laplace transforms of the four kernels and their λ-derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transforms {
    pub value: [Complex64; 4],
    pub deriv: [Complex64; 4],
}

const MAX_REFINE: usize = 64;

impl KernelSet {
    /// Wraps kernels already tabulated at the nodes of `grid`.
    pub fn from_nodes(grid: QuadGrid, nodes: [Vec<f64>; 4]) -> Self {
        for v in &nodes {
            assert_eq!(v.len(), grid.len());
        }
        KernelSet {
            at: None,
            grid,
            nodes,
            refined: (0..MAX_REFINE).map(|_| OnceLock::new()).collect(),
        }
    }

    pub fn grid(&self) -> &QuadGrid {
        &self.grid
    }

    /// Node values of `Ψ_{i+1}`.
    pub fn node_values(&self, i: usize) -> &[f64] {
        &self.nodes[i]
    }

    /// `Ψ_{i+1}(a)` by in-panel interpolation.
    pub fn eval(&self, i: usize, a: f64) -> f64 {
        self.grid.interp(&self.nodes[i], a)
    }

    /// Kernel `i` (0-based) sampled on `n` uniform ages.
    pub fn table(&self, i: usize, n: usize) -> TabulatedFn {
        TabulatedFn::uniform(self.grid.a_dagger(), n, |a| self.eval(i, a))
    }

    /// Panel split factor needed to resolve `e^{-iωa}`.
    fn split_for(&self, omega: f64) -> usize {
        let need = omega.abs() * self.grid.a_dagger() / std::f64::consts::PI;
        let have = self.grid.panels() as f64;
        if !(need > have) {
            1
        } else {
            ((need / have).ceil() as usize).min(MAX_REFINE + 1)
        }
    }

    fn data_for(&self, omega: f64) -> (&QuadGrid, &[Vec<f64>; 4]) {
        let m = self.split_for(omega);
        if m == 1 {
            return (&self.grid, &self.nodes);
        }
        let (g, v) = self.refined[m - 2].get_or_init(|| {
            let g = self.grid.refined(m);
            let v = [0, 1, 2, 3].map(|i| {
                g.nodes()
                    .iter()
                    .enumerate()
                    .map(|(k, &a)| self.grid.interp_in(&self.nodes[i], k / g.order() / m, a))
                    .collect()
            });
            (g, v)
        });
        (g, v)
    }

    /// `Ψ̂_i(λ) = ∫ e^{-λa} Ψ_i(a) da` and `Ψ̂_i'(λ)` for all four kernels.
    pub fn transforms(&self, lambda: Complex64) -> Transforms {
        let (g, vals) = self.data_for(lambda.im);
        let mut value = [Complex64::new(0.0, 0.0); 4];
        let mut deriv = value;
        for (k, (&x, &w)) in g.nodes().iter().zip(g.weights()).enumerate() {
            let e = (-lambda * x).exp() * w;
            for i in 0..4 {
                let v = vals[i][k];
                if v != 0.0 {
                    value[i] += e * v;
                    deriv[i] -= e * (x * v);
                }
            }
        }
        Transforms { value, deriv }
    }

    /// `∫ e^{-ζa} |Ψ_i(a)| da`, bounding `|Ψ̂_i(λ)|` for `Re λ ≥ ζ`.
    pub fn abs_transforms(&self, zeta: f64) -> [f64; 4] {
        let g = &self.grid;
        let mut out = [0.0; 4];
        for (k, (&x, &w)) in g.nodes().iter().zip(g.weights()).enumerate() {
            let e = (-zeta * x).exp() * w;
            for (i, o) in out.iter_mut().enumerate() {
                *o += e * self.nodes[i][k].abs();
            }
        }
        out
    }
}

/// Builds `Ψ1..Ψ4` at an equilibrium of `model`.
///
/// With `c = R0d·Φ(Q*)·β + B*·Φ'(Q*)/Φ(Q*)·r`, `J(x) = ∫_0^x K e^{-W L(ρ) - α(x-ρ)} dρ`
/// and `P(x) = ∫_0^x e^{-W L(ρ) - α(x-ρ)} dρ`:
///
/// ```text
/// Ψ1(a) = c π (e^{-WL} + W J)
/// Ψ2(a) = -α B* ∫_a^{a†} c π(σ) K(σ-a) [P(σ) - e^{-αa} P(σ-a)] dσ
/// Ψ3(a) = W q π J
/// Ψ4(a) = B* ∫_a^{a†} q π(σ) K(σ-a) [e^{-αa - W L(σ-a)} - W (J(σ) - e^{-αa} J(σ-a))] dσ
/// ```
pub fn build_kernels(model: &Model, eq: &EquilibriumPoint) -> Result<KernelSet> {
    let spec = model.spec();
    let (alpha, w, b, q_star) = (eq.alpha, eq.w_star, eq.b_star, eq.q_star);
    let phi_q = spec.phi.eval(q_star);
    if !(phi_q > 0.0) {
        return Err(Error::Degenerate(format!("Phi(Q*) = {} at Q* = {}", phi_q, q_star)));
    }
    let dphi = spec.phi.derivative(q_star)?;
    let g = model.grid();
    let n = g.len();
    let (pi, l, k) = (&model.pi, &model.l, &model.k);
    let c: Vec<f64> = (0..n)
        .map(|i| spec.r0d * phi_q * model.beta[i] + b * dphi / phi_q * model.r[i])
        .collect();
    let c_pi: Vec<f64> = (0..n).map(|i| c[i] * pi[i]).collect();
    let q_pi: Vec<f64> = (0..n).map(|i| model.q[i] * pi[i]).collect();
    let ewl: Vec<f64> = l.iter().map(|x| (-w * x).exp()).collect();
    let k_ewl: Vec<f64> = (0..n).map(|i| k[i] * ewl[i]).collect();
    let j = g.forward_decay(&k_ewl, alpha);
    let p = g.forward_decay(&ewl, alpha);

    let psi1: Vec<f64> = (0..n).map(|i| c_pi[i] * (ewl[i] + w * j[i])).collect();
    let psi3: Vec<f64> = if eq.kind == EqKind::DiseaseFree || w == 0.0 {
        vec![0.0; n]
    } else {
        (0..n).map(|i| w * q_pi[i] * j[i]).collect()
    };

    let kfun = &spec.k;
    let order = g.order();
    let rule = g.rule();
    let edges = g.edges();
    let ad = g.a_dagger();
    let conv: Vec<(f64, f64)> = g
        .nodes()
        .par_iter()
        .map(|&a| {
            let mut cuts: Vec<f64> = edges
                .iter()
                .flat_map(|&e| [e, e + a])
                .filter(|&x| x > a && x < ad)
                .collect();
            cuts.push(a);
            cuts.push(ad);
            cuts.sort_by(f64::total_cmp);
            cuts.dedup_by(|x, y| (*x - *y).abs() <= 1e-14 * ad);
            let ea = (-alpha * a).exp();
            let mut ws = [0.0; MAX_QUAD_ORDER];
            let mut wu = [0.0; MAX_QUAD_ORDER];
            let (mut s2, mut s4) = (0.0, 0.0);
            for seg in cuts.windows(2) {
                let (lo, hi) = (seg[0], seg[1]);
                if hi - lo <= 0.0 {
                    continue;
                }
                let mid = 0.5 * (lo + hi);
                let ps = g.panel_of(mid);
                let pu = g.panel_of(mid - a);
                let (cc, hh) = (mid, 0.5 * (hi - lo));
                for (t, wt) in rule.t.iter().zip(&rule.w) {
                    let sigma = cc + hh * t;
                    let u = sigma - a;
                    let kv = kfun.eval(u);
                    if kv == 0.0 {
                        continue;
                    }
                    g.interp_weights(ps, sigma, &mut ws);
                    g.interp_weights(pu, u, &mut wu);
                    let at = |v: &[f64], wts: &[f64], pp: usize| -> f64 {
                        let base = pp * order;
                        (0..order).map(|m| wts[m] * v[base + m]).sum()
                    };
                    let cpi_s = at(&c_pi, &ws, ps);
                    let qpi_s = at(&q_pi, &ws, ps);
                    let p_s = at(&p, &ws, ps);
                    let p_u = at(&p, &wu, pu);
                    let l_u = at(l, &wu, pu);
                    let weight = hh * wt * kv;
                    s2 += weight * cpi_s * (p_s - ea * p_u);
                    let mut inner = (-alpha * a - w * l_u).exp();
                    if w != 0.0 {
                        let j_s = at(&j, &ws, ps);
                        let j_u = at(&j, &wu, pu);
                        inner -= w * (j_s - ea * j_u);
                    }
                    s4 += weight * qpi_s * inner;
                }
            }
            (-alpha * b * s2, b * s4)
        })
        .collect();
    let psi2: Vec<f64> = conv.iter().map(|x| x.0).collect();
    let psi4: Vec<f64> = conv.iter().map(|x| x.1).collect();
    let mut set = KernelSet::from_nodes(g.clone(), [psi1, psi2, psi3, psi4]);
    for (i, v) in set.nodes.iter().enumerate() {
        if let Some(bad) = v.iter().find(|x| !x.is_finite()) {
            return Err(Error::NonFinite {
                value: *bad,
                location: format!("kernel Psi{}", i + 1),
            });
        }
    }
    set.at = Some(eq.clone());
    Ok(set)
}
