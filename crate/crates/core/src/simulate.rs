//! Time integration of the S–I system along characteristics.
//!
//! Age and time share the step `Δ`, so each cell moves one node per step and
//! natural mortality acts through exact survival ratios `π(a_j)/π(a_{j-1})`.
//! Infection along a characteristic uses the force of infection frozen at the
//! start of the step, integrated exactly over the step. The newborn cell is
//! found from the scalar renewal condition after the interior has moved.

use serde::Serialize;

use crate::equilibria::{EqKind, EquilibriumPoint};
use crate::error::{Error, Result};
use crate::model::Model;
use crate::quadrature::Rule;
use crate::ratefn::DensityDependence;
use crate::tabulated::TabulatedFn;

/// Cells per unit `a†` used when no step is given.
pub const DEFAULT_CELLS: usize = 512;
/// `W` above which a run counts as diverged.
pub const DIVERGENCE_LEVEL: f64 = 1e8;
/// Fraction of the run, taken from the end, used for classification.
pub const TAIL_FRACTION: f64 = 0.3;
/// Peaks needed to call a run oscillating, and their allowed spread.
pub const MIN_PEAK_INTERVALS: usize = 5;
pub const PEAK_SPREAD: f64 = 0.05;
/// Minimum ratio of late to early `W` range within the tail for an
/// oscillation to count as sustained.
pub const SUSTAINED_RATIO: f64 = 0.9;

/// Population densities at one time on the uniform age grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub t: f64,
    pub s: Vec<f64>,
    pub i: Vec<f64>,
    /// `S(0, t)`.
    pub b: f64,
    /// `∫ q I`.
    pub w: f64,
    /// `∫ r (S + I)`.
    pub q: f64,
    pub step: usize,
}

/// One row of the recorded trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TracePoint {
    pub t: f64,
    #[serde(rename = "B")]
    pub b: f64,
    #[serde(rename = "W")]
    pub w: f64,
    #[serde(rename = "Q")]
    pub q: f64,
    #[serde(rename = "totalS")]
    pub total_s: f64,
    #[serde(rename = "totalI")]
    pub total_i: f64,
}

/// Precomputed grid data for one model and step.
#[derive(Debug, Clone)]
pub struct Simulator {
    delta: f64,
    ages: Vec<f64>,
    /// `π(a_j)/π(a_{j-1})`, index `j ≥ 1`.
    ratio: Vec<f64>,
    /// Mean of `K` along the characteristic entering node `j`.
    k_mean: Vec<f64>,
    beta: Vec<f64>,
    r: Vec<f64>,
    q: Vec<f64>,
    weights: Vec<f64>,
    alpha: f64,
    r0d: f64,
    phi: DensityDependence,
}

/// Trapezoid weights on `n + 1` uniform nodes. Simpson's alternating weights
/// feed an even/odd sawtooth into the birth condition when `Φ` is steep.
pub fn trapezoid_weights(n: usize, h: f64) -> Vec<f64> {
    let mut w = vec![h; n + 1];
    w[0] = 0.5 * h;
    w[n] = 0.5 * h;
    w
}

impl Simulator {
    /// Grid with `Δ = a†/cells`.
    pub fn new(model: &Model, delta: f64) -> Result<Simulator> {
        let spec = model.spec();
        let ad = spec.a_dagger;
        let m = ad / delta;
        let cells = m.round();
        if !(delta > 0.0) || (m - cells).abs() > 1e-9 * m.max(1.0) || cells < 4.0 {
            return Err(Error::Precondition(format!(
                "step {} must divide a† = {} into at least 4 cells",
                delta, ad
            )));
        }
        let cells = cells as usize;
        let delta = ad / cells as f64;
        let ages: Vec<f64> = (0..=cells).map(|j| if j == cells { ad } else { j as f64 * delta }).collect();
        let mut ratio = vec![0.0; cells + 1];
        for j in 1..=cells {
            ratio[j] = model.survival_ratio(ages[j - 1], ages[j])?;
        }
        // mean of K over each cell, split at its jumps
        let rule = Rule::new(4);
        let breaks = spec.k.breakpoints();
        let k_mean = (0..=cells)
            .map(|j| {
                if j == 0 {
                    return 0.0;
                }
                let (lo, hi) = (ages[j - 1], ages[j]);
                let mut cuts = vec![lo];
                cuts.extend(breaks.iter().copied().filter(|&b| b > lo && b < hi));
                cuts.push(hi);
                cuts.windows(2).map(|c| rule.integrate(c[0], c[1], |a| spec.k.eval(a))).sum::<f64>() / delta
            })
            .collect();
        let tab = |f: &crate::ratefn::RateFn| ages.iter().map(|&a| f.eval(a)).collect::<Vec<f64>>();
        Ok(Simulator {
            delta,
            ratio,
            k_mean,
            beta: tab(&spec.beta),
            r: tab(&spec.r),
            q: tab(&spec.q),
            weights: trapezoid_weights(cells, delta),
            ages,
            alpha: spec.alpha,
            r0d: spec.r0d,
            phi: spec.phi.clone(),
        })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn ages(&self) -> &[f64] {
        &self.ages
    }

    fn integrate(&self, f: impl Fn(usize) -> f64) -> f64 {
        self.weights.iter().enumerate().map(|(j, w)| w * f(j)).sum()
    }

    /// State from initial profiles sampled at the grid ages. `I(0)` is set to 0.
    /// Interpolation undershoot below zero is clipped; negative table values
    /// are rejected.
    pub fn init(&self, s0: &TabulatedFn, i0: &TabulatedFn) -> Result<SimState> {
        for (name, f) in [("S", s0), ("I", i0)] {
            if let Some(k) = f.values().iter().position(|v| !(*v >= 0.0) || !v.is_finite()) {
                return Err(Error::Precondition(format!(
                    "initial {} must be nonnegative and finite (age {}: {})",
                    name,
                    f.nodes()[k],
                    f.values()[k]
                )));
            }
        }
        let s: Vec<f64> = self.ages.iter().map(|&a| s0.eval(a).max(0.0)).collect();
        let mut i: Vec<f64> = self.ages.iter().map(|&a| i0.eval(a).max(0.0)).collect();
        i[0] = 0.0;
        let mut st = SimState { t: 0.0, b: s[0], s, i, w: 0.0, q: 0.0, step: 0 };
        self.refresh(&mut st);
        Ok(st)
    }

    fn refresh(&self, st: &mut SimState) {
        st.w = self.integrate(|j| self.q[j] * st.i[j]);
        st.q = self.integrate(|j| self.r[j] * (st.s[j] + st.i[j]));
    }

    /// Advances the state by one step `Δ`.
    pub fn step(&self, st: &mut SimState) -> Result<()> {
        let d = self.delta;
        let n = self.ages.len();
        let w = st.w;
        let ea = (-self.alpha * d).exp();
        for j in (1..n).rev() {
            let g = self.k_mean[j] * w;
            let rho = self.ratio[j];
            let s_prev = st.s[j - 1];
            let eg = (-g * d).exp();
            // ∫_0^Δ g e^{-g s} e^{-α(Δ - s)} ds
            let gain = if (g - self.alpha).abs() > 1e-12 {
                g * (ea - eg) / (g - self.alpha)
            } else {
                g * d * ea
            };
            st.s[j] = s_prev * rho * eg;
            st.i[j] = st.i[j - 1] * rho * ea + s_prev * rho * gain;
        }
        st.i[0] = 0.0;
        // B = R0d Φ(Q) ∫β(S + I), with S(0) = B on both sides.
        let w0 = self.weights[0];
        let p_int: f64 = (1..n).map(|j| self.weights[j] * self.beta[j] * (st.s[j] + st.i[j])).sum();
        let q_int: f64 = (1..n).map(|j| self.weights[j] * self.r[j] * (st.s[j] + st.i[j])).sum();
        let h = |b: f64| b - self.r0d * self.phi.eval(q_int + w0 * self.r[0] * b) * (p_int + w0 * self.beta[0] * b);
        let mut b = st.b.max(0.0);
        let mut ok = false;
        for _ in 0..200 {
            let nb = b - h(b);
            if !nb.is_finite() {
                break;
            }
            if (nb - b).abs() <= 1e-15 * (1.0 + b.abs()) {
                b = nb;
                ok = true;
                break;
            }
            b = nb.max(0.0);
        }
        if !ok {
            let mut hi = 1.0 + b.abs();
            while h(hi) < 0.0 && hi < 1e300 {
                hi *= 2.0;
            }
            b = if h(0.0) >= 0.0 { 0.0 } else { crate::model::bisect(h, 0.0, hi) };
        }
        st.s[0] = b;
        st.b = b;
        st.t += d;
        st.step += 1;
        self.refresh(st);
        if !(st.w.is_finite() && st.q.is_finite() && b.is_finite()) {
            return Err(Error::Simulation {
                step: st.step,
                message: format!("non-finite state (B = {}, W = {}, Q = {})", b, st.w, st.q),
            });
        }
        if let Some(j) = (0..n).find(|&j| st.s[j] < 0.0 || st.i[j] < 0.0) {
            return Err(Error::Simulation {
                step: st.step,
                message: format!("negative density at age {}", self.ages[j]),
            });
        }
        Ok(())
    }

    pub fn trace_point(&self, st: &SimState) -> TracePoint {
        TracePoint {
            t: st.t,
            b: st.b,
            w: st.w,
            q: st.q,
            total_s: self.integrate(|j| st.s[j]),
            total_i: self.integrate(|j| st.i[j]),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    Converged,
    Oscillating,
    Diverged,
    Inconclusive,
}

impl Outcome {
    pub fn label(self) -> &'static str {
        match self {
            Outcome::Converged => "converged",
            Outcome::Oscillating => "oscillating",
            Outcome::Diverged => "diverged",
            Outcome::Inconclusive => "inconclusive",
        }
    }
}

/// Equilibrium values a run is compared with.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Probe {
    pub b_star: f64,
    pub w_star: f64,
}

impl From<&EquilibriumPoint> for Probe {
    fn from(e: &EquilibriumPoint) -> Self {
        Probe { b_star: e.b_star, w_star: e.w_star }
    }
}

impl Probe {
    /// `|W - W*|/(1 + W*) + |B - B*|/(1 + B*)`.
    pub fn distance(&self, b: f64, w: f64) -> f64 {
        (w - self.w_star).abs() / (1.0 + self.w_star) + (b - self.b_star).abs() / (1.0 + self.b_star)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimReport {
    pub outcome: Outcome,
    pub final_w: f64,
    pub final_b: f64,
    /// Mean peak-to-peak interval of `W` over the tail, when oscillating.
    pub period: Option<f64>,
    /// Peak-to-peak range of `W` over the tail, when oscillating.
    pub amplitude: Option<f64>,
    /// `(t, distance to the probe)` at every step.
    pub distance: Vec<(f64, f64)>,
    pub trace: Vec<TracePoint>,
}

impl SimReport {
    /// Whether the run ended closer to the probe than it started: the mean
    /// distance over the last tenth against the starting distance.
    pub fn approached_probe(&self) -> Option<bool> {
        let d = &self.distance;
        if d.len() < 10 {
            return None;
        }
        let start = d[0].1;
        let tail = &d[d.len() - d.len() / 10..];
        let end = tail.iter().map(|x| x.1).sum::<f64>() / tail.len() as f64;
        Some(end < 0.5 * start)
    }

    /// Exponential rate of approach to the final state, fitted by least squares
    /// to `ln |x(t) - x(T)|` where that deviation lies in `[lo, hi]`, with `x`
    /// the pair `(B, W)` in the probe's scaling. `None` without enough samples.
    pub fn decay_rate(&self, lo: f64, hi: f64) -> Option<f64> {
        let last = self.trace.last()?;
        let scale = Probe { b_star: last.b, w_star: last.w };
        let pts: Vec<(f64, f64)> = self
            .trace
            .iter()
            .map(|p| (p.t, scale.distance(p.b, p.w)))
            .filter(|&(_, d)| d >= lo && d <= hi)
            .map(|(t, d)| (t, d.ln()))
            .collect();
        if pts.len() < 20 {
            return None;
        }
        let n = pts.len() as f64;
        let (mt, my) = pts.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0 / n, a.1 + p.1 / n));
        let (mut sxy, mut sxx) = (0.0, 0.0);
        for (t, y) in &pts {
            sxy += (t - mt) * (y - my);
            sxx += (t - mt) * (t - mt);
        }
        (sxx > 0.0).then(|| sxy / sxx)
    }
}

/// Relative size of the perturbation used for stability probes.
pub const PERTURBATION: f64 = 0.01;

/// Initial data for a stability probe: `I*` raised by the fraction `eps`, or
/// an infective seed `I = eps N*`, `S = (1 - eps) N*` at the disease-free state.
pub fn perturbed_initial(eq: &EquilibriumPoint, eps: f64) -> (TabulatedFn, TabulatedFn) {
    match eq.kind {
        EqKind::Endemic => {
            let i = eq.i_profile.values().iter().map(|v| (1.0 + eps) * v).collect();
            (
                eq.s_profile.clone(),
                TabulatedFn::new(eq.i_profile.nodes().to_vec(), i).expect("same nodes"),
            )
        }
        EqKind::DiseaseFree => {
            let n = eq.s_profile.nodes().to_vec();
            let s = eq.s_profile.values().iter().map(|v| (1.0 - eps) * v).collect();
            let i = eq.s_profile.values().iter().map(|v| eps * v).collect();
            (
                TabulatedFn::new(n.clone(), s).expect("same nodes"),
                TabulatedFn::new(n, i).expect("same nodes"),
            )
        }
    }
}

/// Peak times of `W` (strict local maxima standing out of rounding noise).
fn peak_times(trace: &[TracePoint]) -> Vec<f64> {
    let scale = trace.iter().map(|p| p.w.abs()).fold(0.0, f64::max);
    let noise = 1e-12 * (1.0 + scale);
    let mut out = Vec::new();
    for k in 1..trace.len().saturating_sub(1) {
        let (a, b, c) = (trace[k - 1].w, trace[k].w, trace[k + 1].w);
        if b > a + noise && b >= c + noise {
            // parabola through the three samples
            let denom = a - 2.0 * b + c;
            let shift = if denom != 0.0 { 0.5 * (a - c) / denom } else { 0.0 };
            let dt = trace[k + 1].t - trace[k].t;
            out.push(trace[k].t + shift * dt);
        }
    }
    out
}

fn range_w(tr: &[TracePoint]) -> f64 {
    let (lo, hi) = tr.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |a, p| (a.0.min(p.w), a.1.max(p.w)));
    hi - lo
}

/// Classifies the tail of a trace.
pub fn classify(trace: &[TracePoint], conv_tol: f64) -> (Outcome, Option<f64>, Option<f64>) {
    let Some(last) = trace.last() else {
        return (Outcome::Inconclusive, None, None);
    };
    if trace.iter().any(|p| !(p.w.abs() <= DIVERGENCE_LEVEL)) {
        return (Outcome::Diverged, None, None);
    }
    let start = trace.len() - ((trace.len() as f64 * TAIL_FRACTION).ceil() as usize).min(trace.len());
    let tail = &trace[start..];
    let dev = tail.iter().map(|p| (p.w - last.w).abs()).fold(0.0, f64::max);
    if dev < conv_tol {
        return (Outcome::Converged, None, None);
    }
    let peaks = peak_times(tail);
    if peaks.len() > MIN_PEAK_INTERVALS {
        let gaps: Vec<f64> = peaks.windows(2).map(|w| w[1] - w[0]).collect();
        let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
        let (lo, hi) = gaps.iter().fold((f64::INFINITY, 0.0f64), |a, &g| (a.0.min(g), a.1.max(g)));
        let third = tail.len() / 3;
        let first = range_w(&tail[..third]);
        let latest = range_w(&tail[tail.len() - third..]);
        // a damped ringing is not a sustained oscillation
        let sustained = latest >= SUSTAINED_RATIO * first;
        if mean > 0.0 && (hi - lo) / mean < PEAK_SPREAD && sustained {
            return (Outcome::Oscillating, Some(mean), Some(range_w(tail)));
        }
    }
    (Outcome::Inconclusive, None, None)
}

/// Runs from `(s0, i0)` to time `t_end` with step `delta`, comparing against
/// `probe` when given (otherwise against the final state).
pub fn run(
    model: &Model,
    s0: &TabulatedFn,
    i0: &TabulatedFn,
    delta: f64,
    t_end: f64,
    probe: Option<Probe>,
) -> Result<SimReport> {
    if !(t_end > 0.0) {
        return Err(Error::Precondition(format!("end time {} must be positive", t_end)));
    }
    let sim = Simulator::new(model, delta)?;
    let mut st = sim.init(s0, i0)?;
    let steps = (t_end / sim.delta()).round().max(1.0) as usize;
    let mut trace = Vec::with_capacity(steps + 1);
    trace.push(sim.trace_point(&st));
    for _ in 0..steps {
        sim.step(&mut st)?;
        trace.push(sim.trace_point(&st));
        if !(st.w <= DIVERGENCE_LEVEL) {
            break;
        }
    }
    let last = *trace.last().unwrap();
    let conv_tol = 1e-7 * (1.0 + probe.map_or(last.w, |p| p.w_star).abs());
    let (outcome, period, amplitude) = classify(&trace, conv_tol);
    let reference = probe.unwrap_or(Probe { b_star: last.b, w_star: last.w });
    let distance = trace.iter().map(|p| (p.t, reference.distance(p.b, p.w))).collect();
    Ok(SimReport {
        outcome,
        final_w: last.w,
        final_b: last.b,
        period,
        amplitude,
        distance,
        trace,
    })
}
