//! Composite Gauss–Legendre quadrature on `[0, a†]`.
//!
//! Every function the model needs is carried by its values at the nodes of a
//! [`QuadGrid`]. Inside a panel those values define a polynomial, which gives
//! interpolation, cumulative integrals and exponentially weighted running
//! integrals without leaving the grid.

use crate::error::{Error, Result};

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`, ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut t = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        // Chebyshev-like initial guess, then Newton on P_n
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        dp = if d != 0.0 { d } else { dp };
        let wi = 2.0 / ((1.0 - x * x) * dp * dp);
        t[i] = -x;
        t[n - 1 - i] = x;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        t[n / 2] = 0.0;
    }
    (t, w)
}

/// P_n(x) and P_n'(x) by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Reference rule on `[-1, 1]` with interpolation data.
#[derive(Debug, Clone)]
pub struct Rule {
    pub t: Vec<f64>,
    pub w: Vec<f64>,
    bary: Vec<f64>,
    /// `fwd[i][j] = ∫_{-1}^{t_i} l_j`, with `l_j` the Lagrange basis.
    fwd: Vec<Vec<f64>>,
}

impl Rule {
    pub fn new(n: usize) -> Self {
        let (t, w) = gauss_legendre(n);
        let bary: Vec<f64> = (0..n)
            .map(|j| {
                let s = if j % 2 == 0 { 1.0 } else { -1.0 };
                s * ((1.0 - t[j] * t[j]) * w[j]).sqrt()
            })
            .collect();
        let mut rule = Rule {
            t,
            w,
            bary,
            fwd: Vec::new(),
        };
        let fwd = (0..n)
            .map(|i| {
                let half = 0.5 * (rule.t[i] + 1.0);
                (0..n)
                    .map(|j| {
                        // the basis polynomial has degree n-1, so the rule is exact
                        (0..n)
                            .map(|m| {
                                let s = -1.0 + half * (rule.t[m] + 1.0);
                                half * rule.w[m] * rule.basis(j, s)
                            })
                            .sum()
                    })
                    .collect()
            })
            .collect();
        rule.fwd = fwd;
        rule
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    fn basis(&self, j: usize, s: f64) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for (m, &tm) in self.t.iter().enumerate() {
            if s == tm {
                return if m == j { 1.0 } else { 0.0 };
            }
            let c = self.bary[m] / (s - tm);
            if m == j {
                num = c;
            }
            den += c;
        }
        num / den
    }

    /// Barycentric interpolation of node values at `s` in `[-1, 1]`.
    pub fn interp(&self, vals: &[f64], s: f64) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for (m, &tm) in self.t.iter().enumerate() {
            let d = s - tm;
            if d == 0.0 {
                return vals[m];
            }
            let c = self.bary[m] / d;
            num += c * vals[m];
            den += c;
        }
        num / den
    }

    /// Integral of `f` over `[lo, hi]`.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, lo: f64, hi: f64, mut f: F) -> f64 {
        let (c, h) = (0.5 * (lo + hi), 0.5 * (hi - lo));
        self.t
            .iter()
            .zip(&self.w)
            .map(|(&t, &w)| w * f(c + h * t))
            .sum::<f64>()
            * h
    }
}

/// Integral of `f` over `[lo, hi]` with panels graded geometrically toward
/// `sing`, a point at or beyond `hi` where `f` may blow up.
///
/// Returns `+inf` when `hi` reaches `sing` and the integral keeps growing.
pub fn integrate_graded<F: FnMut(f64) -> f64>(
    rule: &Rule,
    lo: f64,
    hi: f64,
    sing: f64,
    mut f: F,
) -> Result<f64> {
    if hi <= lo {
        return Ok(0.0);
    }
    let mut total = 0.0;
    let mut a = lo;
    for _ in 0..1100 {
        let next = a + 0.5 * (sing - a);
        let b = if next >= hi || next <= a { hi } else { next };
        let part = rule.integrate(a, b, &mut f);
        if !part.is_finite() {
            return Err(Error::Quadrature {
                lo: a,
                hi: b,
                message: format!("non-finite integrand (partial sum {})", part),
            });
        }
        total += part;
        if b >= hi {
            return Ok(total);
        }
        a = b;
    }
    Ok(f64::INFINITY)
}

/// Composite rule on `[0, a†]` with panel edges aligned to break points.
#[derive(Debug, Clone)]
pub struct QuadGrid {
    a_dagger: f64,
    edges: Vec<f64>,
    rule: Rule,
    x: Vec<f64>,
    w: Vec<f64>,
}

impl QuadGrid {
    /// `panels` uniform panels, adjusted so that every point of `breaks` (and its
    /// reflection `a† - b`) is a panel edge.
    pub fn new(a_dagger: f64, panels: usize, order: usize, breaks: &[f64]) -> Self {
        let panels = panels.max(1);
        let h = a_dagger / panels as f64;
        let mut edges: Vec<f64> = (0..=panels).map(|j| j as f64 * h).collect();
        edges[panels] = a_dagger;
        let mut wanted: Vec<f64> = breaks
            .iter()
            .flat_map(|&b| [b, a_dagger - b])
            .filter(|&b| b > 1e-12 * a_dagger && b < a_dagger * (1.0 - 1e-12))
            .collect();
        wanted.sort_by(f64::total_cmp);
        wanted.dedup_by(|x, y| (*x - *y).abs() < 1e-12 * a_dagger);
        let mut snapped = vec![false; panels + 1];
        let mut extra = Vec::new();
        for b in wanted {
            let j = (b / h).round() as usize;
            if j > 0 && j < panels && !snapped[j] && (edges[j] - b).abs() < 0.3 * h {
                edges[j] = b;
                snapped[j] = true;
            } else if !edges.iter().any(|&e| (e - b).abs() < 1e-12 * a_dagger) {
                extra.push(b);
            }
        }
        edges.extend(extra);
        edges.sort_by(f64::total_cmp);
        Self::from_edges(edges, order)
    }

    pub fn from_edges(edges: Vec<f64>, order: usize) -> Self {
        let rule = Rule::new(order);
        let mut x = Vec::with_capacity((edges.len() - 1) * order);
        let mut w = Vec::with_capacity(x.capacity());
        for p in edges.windows(2) {
            let (c, hh) = (0.5 * (p[0] + p[1]), 0.5 * (p[1] - p[0]));
            for (t, wt) in rule.t.iter().zip(&rule.w) {
                x.push(c + hh * t);
                w.push(hh * wt);
            }
        }
        QuadGrid {
            a_dagger: *edges.last().unwrap(),
            edges,
            rule,
            x,
            w,
        }
    }

    /// The same panels, each split into `m` equal parts.
    pub fn refined(&self, m: usize) -> QuadGrid {
        let mut edges = Vec::with_capacity(self.panels() * m + 1);
        for p in self.edges.windows(2) {
            for k in 0..m {
                edges.push(p[0] + (p[1] - p[0]) * k as f64 / m as f64);
            }
        }
        edges.push(self.a_dagger);
        QuadGrid::from_edges(edges, self.order())
    }

    pub fn a_dagger(&self) -> f64 {
        self.a_dagger
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn rule(&self) -> &Rule {
        &self.rule
    }

    pub fn panels(&self) -> usize {
        self.edges.len() - 1
    }

    pub fn order(&self) -> usize {
        self.rule.len()
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.x
    }

    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    /// Evaluates `f` at every node.
    pub fn tabulate<F: FnMut(f64) -> f64>(&self, f: F) -> Vec<f64> {
        self.x.iter().copied().map(f).collect()
    }

    pub fn integrate(&self, vals: &[f64]) -> f64 {
        self.w.iter().zip(vals).map(|(w, v)| w * v).sum()
    }

    /// Index of the panel containing `a` (the last panel owns `a†`).
    pub fn panel_of(&self, a: f64) -> usize {
        let n = self.panels();
        match self.edges.binary_search_by(|e| e.total_cmp(&a)) {
            Ok(i) => i.min(n - 1),
            Err(i) => i.saturating_sub(1).min(n - 1),
        }
    }

    /// Normalised barycentric weights of the panel-`p` polynomial at `a`; the
    /// interpolant is `Σ out[m]·vals[p·order + m]`.
    pub fn interp_weights(&self, p: usize, a: f64, out: &mut [f64]) {
        let n = self.order();
        let (lo, hi) = (self.edges[p], self.edges[p + 1]);
        let s = (2.0 * a - lo - hi) / (hi - lo);
        let mut den = 0.0;
        for m in 0..n {
            let d = s - self.rule.t[m];
            if d == 0.0 {
                out[..n].iter_mut().for_each(|o| *o = 0.0);
                out[m] = 1.0;
                return;
            }
            out[m] = self.rule.bary[m] / d;
            den += out[m];
        }
        out[..n].iter_mut().for_each(|o| *o /= den);
    }

    /// Interpolates node values at `a` using the polynomial of its panel.
    pub fn interp(&self, vals: &[f64], a: f64) -> f64 {
        let p = self.panel_of(a);
        self.interp_in(vals, p, a)
    }

    /// Interpolates using the polynomial of panel `p` (which may extrapolate).
    pub fn interp_in(&self, vals: &[f64], p: usize, a: f64) -> f64 {
        let n = self.order();
        let (lo, hi) = (self.edges[p], self.edges[p + 1]);
        let s = (2.0 * a - lo - hi) / (hi - lo);
        self.rule.interp(&vals[p * n..(p + 1) * n], s)
    }

    /// `∫_0^{x_k} f` at every node.
    pub fn cumulative(&self, vals: &[f64]) -> Vec<f64> {
        self.forward_decay(vals, 0.0)
    }

    /// `∫_0^{x_k} f(ρ) e^{-α(x_k-ρ)} dρ` at every node.
    pub fn forward_decay(&self, vals: &[f64], alpha: f64) -> Vec<f64> {
        let n = self.order();
        let mut out = vec![0.0; self.len()];
        let mut acc = 0.0;
        for p in 0..self.panels() {
            let (lo, hi) = (self.edges[p], self.edges[p + 1]);
            let hh = 0.5 * (hi - lo);
            let base = p * n;
            for i in 0..n {
                let xi = self.x[base + i];
                let mut s = 0.0;
                for m in 0..n {
                    s += self.rule.fwd[i][m] * vals[base + m] * (-alpha * (xi - self.x[base + m])).exp();
                }
                out[base + i] = acc * (-alpha * (xi - lo)).exp() + hh * s;
            }
            let mut s = 0.0;
            for m in 0..n {
                s += self.w[base + m] * vals[base + m] * (-alpha * (hi - self.x[base + m])).exp();
            }
            acc = acc * (-alpha * (hi - lo)).exp() + s;
        }
        out
    }

    /// `∫_{x_k}^{a†} f(σ) e^{-α(σ-x_k)} dσ` at every node.
    pub fn backward_decay(&self, vals: &[f64], alpha: f64) -> Vec<f64> {
        let n = self.order();
        let mut out = vec![0.0; self.len()];
        let mut acc = 0.0;
        for p in (0..self.panels()).rev() {
            let (lo, hi) = (self.edges[p], self.edges[p + 1]);
            let hh = 0.5 * (hi - lo);
            let base = p * n;
            for i in 0..n {
                let xi = self.x[base + i];
                let mut s = 0.0;
                for m in 0..n {
                    let bw = self.rule.w[m] - self.rule.fwd[i][m];
                    s += bw * vals[base + m] * (-alpha * (self.x[base + m] - xi)).exp();
                }
                out[base + i] = acc * (-alpha * (hi - xi)).exp() + hh * s;
            }
            let mut s = 0.0;
            for m in 0..n {
                s += self.w[base + m] * vals[base + m] * (-alpha * (self.x[base + m] - lo)).exp();
            }
            acc = acc * (-alpha * (hi - lo)).exp() + s;
        }
        out
    }

    /// Value at the left edge of each panel of the cumulative integral `∫_0^{e_p} f`.
    pub fn edge_cumulative(&self, vals: &[f64]) -> Vec<f64> {
        let n = self.order();
        let mut out = Vec::with_capacity(self.panels() + 1);
        let mut acc = 0.0;
        out.push(0.0);
        for p in 0..self.panels() {
            acc += (0..n).map(|m| self.w[p * n + m] * vals[p * n + m]).sum::<f64>();
            out.push(acc);
        }
        out
    }
}
