//! Equilibrium branches `W*(α)` with stability, and their bifurcations.
//!
//! Endemic branches are followed by pseudo-arclength continuation of
//! `φ(α, W) = 1` from seeds found by scanning an `α` grid, so folds are passed
//! without losing the curve.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::equilibria::{build_point, disease_free, endemic_roots, epidemic_reproduction, EqKind, PhiCurve};
use crate::error::{Error, Result};
use crate::model::{bisect, Model};
use crate::spectrum::{rightmost_at, Root, Verdict};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BranchPoint {
    pub alpha: f64,
    pub w_star: f64,
    pub kind: EqKind,
    /// `None` when no root lies above the search window.
    #[serde(skip)]
    pub rightmost: Option<Complex64>,
    pub verdict: Verdict,
    /// `verdict == Stable`.
    pub stable: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BifurcationKind {
    Transcritical,
    Fold,
    Hopf,
}

impl BifurcationKind {
    pub fn label(self) -> &'static str {
        match self {
            BifurcationKind::Transcritical => "transcritical",
            BifurcationKind::Fold => "fold",
            BifurcationKind::Hopf => "hopf",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Bifurcation {
    pub kind: BifurcationKind,
    pub alpha: f64,
    pub w_star: f64,
    /// Crossing frequency for Hopf points, 0 otherwise.
    pub omega: f64,
    /// False for folds sitting at the end of a traced branch.
    pub refined: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Branch {
    pub points: Vec<BranchPoint>,
    pub bifurcations: Vec<Bifurcation>,
    /// Whether the branch returned to its starting point.
    pub closed: bool,
}

impl Branch {
    pub fn kind(&self) -> Option<EqKind> {
        self.points.first().map(|p| p.kind)
    }
}

/// Tolerance on `|∂φ/∂W|` at a refined fold.
pub const FOLD_TOL: f64 = 1e-6;
/// Width of the final bracket around a Hopf point.
pub const HOPF_ALPHA_TOL: f64 = 1e-4;
/// Frequency below which a crossing root counts as real.
const OMEGA_TOL: f64 = 1e-6;
const MIN_ARC_STEP: f64 = 1e-7;
const MAX_TURN: f64 = 0.2;

fn phi(model: &Model, alpha: f64, w: f64) -> f64 {
    PhiCurve::new(model, alpha).phi(w)
}

/// `(g, ∂g/∂α, ∂g/∂W)` for `g = φ - 1`.
fn grad(model: &Model, alpha: f64, w: f64) -> (f64, f64, f64) {
    let c = PhiCurve::new(model, alpha);
    let g = c.phi(w) - 1.0;
    let ha = 1e-6 * (1.0 + alpha.abs());
    let hw = 1e-6 * (1.0 + w.abs());
    let ga = (phi(model, alpha + ha, w) - phi(model, alpha - ha, w)) / (2.0 * ha);
    let gw = (c.phi(w + hw) - c.phi((w - hw).max(0.0))) / (w + hw - (w - hw).max(0.0));
    (g, ga, gw)
}

fn unit_tangent(ga: f64, gw: f64) -> Option<(f64, f64)> {
    let n = ga.hypot(gw);
    if !(n > 0.0) || !n.is_finite() {
        return None;
    }
    Some((-gw / n, ga / n))
}

/// Newton on `{g = 0, t·(x - x0) = ds}`.
fn correct(model: &Model, x0: (f64, f64), t: (f64, f64), ds: f64, tol: f64) -> Option<((f64, f64), usize)> {
    let mut x = (x0.0 + ds * t.0, x0.1 + ds * t.1);
    for it in 0..15 {
        if !(x.1 > 0.0) {
            return None;
        }
        let (g, ga, gw) = grad(model, x.0, x.1);
        let h = t.0 * (x.0 - x0.0) + t.1 * (x.1 - x0.1) - ds;
        let det = ga * t.1 - gw * t.0;
        if !(det.abs() > 0.0) || !g.is_finite() {
            return None;
        }
        let da = (-g * t.1 + h * gw) / det;
        let dw = (-ga * h + t.0 * g) / det;
        x = (x.0 + da, x.1 + dw);
        if da.hypot(dw) < 1e-12 * (1.0 + x.0.abs() + x.1.abs()) && g.abs() < tol {
            return Some((x, it + 1));
        }
    }
    let (g, _, _) = grad(model, x.0, x.1);
    (g.abs() < tol && x.1 > 0.0).then_some((x, 15))
}

/// Follows `φ = 1` from `start` in direction `sign`, stopping at the `α`
/// bounds, at `W = 0`, beyond `w_max`, or when the curve closes.
fn trace_one_way(
    model: &Model,
    start: (f64, f64),
    sign: f64,
    lo: f64,
    hi: f64,
    step: f64,
    w_max: f64,
) -> Result<(Vec<(f64, f64)>, bool)> {
    let tol = model.spec().numerics.root_tol.max(1e-12);
    let mut pts = vec![start];
    let (_, ga, gw) = grad(model, start.0, start.1);
    let mut t = unit_tangent(ga, gw).ok_or_else(|| Error::Degenerate("zero gradient of phi".into()))?;
    t = (sign * t.0, sign * t.1);
    let mut ds = step;
    let max_points = 200_000;
    while pts.len() < max_points {
        let x0 = *pts.last().unwrap();
        if x0.1 + ds * t.1 <= 0.0 && x0.1 < ds {
            // Heading into W = 0: the branch ends at the transcritical point.
            return Ok((pts, false));
        }
        let Some((x, iters)) = correct(model, x0, t, ds, tol) else {
            if ds > MIN_ARC_STEP {
                ds *= 0.5;
                continue;
            }
            // Corrector fails below the W = 0 axis or at a degenerate point.
            return Ok((pts, false));
        };
        let (_, ga, gw) = grad(model, x.0, x.1);
        let Some(mut tn) = unit_tangent(ga, gw) else {
            return Ok((pts, false));
        };
        if tn.0 * t.0 + tn.1 * t.1 < 0.0 {
            tn = (-tn.0, -tn.1);
        }
        let turn = (tn.0 * t.0 + tn.1 * t.1).clamp(-1.0, 1.0).acos();
        let dist = (x.0 - x0.0).hypot(x.1 - x0.1);
        if (turn > MAX_TURN || dist > step) && ds > MIN_ARC_STEP {
            ds *= 0.5;
            continue;
        }
        if x.0 < lo || x.0 > hi {
            // Land exactly on the bound.
            let edge = if x.0 < lo { lo } else { hi };
            let s = (edge - x0.0) / (x.0 - x0.0);
            let guess = x0.1 + s * (x.1 - x0.1);
            if (edge - x0.0).abs() > 1e-12 {
                if let Some(w) = solve_w_near(model, edge, guess, (x.1 - x0.1).abs() + 1e-9) {
                    pts.push((edge, w));
                }
            }
            return Ok((pts, false));
        }
        if x.1 > w_max {
            return Ok((pts, false));
        }
        pts.push(x);
        t = tn;
        if pts.len() > 8 {
            let d = (x.0 - start.0).hypot(x.1 - start.1);
            if d < 0.75 * ds {
                return Ok((pts, true));
            }
        }
        if iters <= 3 {
            ds = (1.5 * ds).min(step);
        }
    }
    Err(Error::Degenerate(format!("continuation exceeded {} points", max_points)))
}

/// Root of `φ(α, ·) = 1` near `guess`, searched within `±spread`.
fn solve_w_near(model: &Model, alpha: f64, guess: f64, spread: f64) -> Option<f64> {
    let c = PhiCurve::new(model, alpha);
    let f = |w: f64| c.phi(w) - 1.0;
    let mut w = guess;
    for _ in 0..30 {
        let h = 1e-7 * (1.0 + w.abs());
        let d = (f(w + h) - f(w - h)) / (2.0 * h);
        if !(d.abs() > 0.0) {
            break;
        }
        let step = f(w) / d;
        w -= step;
        if !(w > 0.0) {
            break;
        }
        if step.abs() < 1e-13 * (1.0 + w.abs()) {
            return (f(w).abs() < 1e-9 && (w - guess).abs() <= 4.0 * spread + 1e-6).then_some(w);
        }
    }
    let mut width = spread.max(1e-9);
    for _ in 0..8 {
        let (a, b) = ((guess - width).max(1e-300), guess + width);
        if f(a) * f(b) < 0.0 {
            return Some(bisect(f, a, b));
        }
        width *= 2.0;
    }
    None
}

/// Pseudo-arclength curve through `seed`, both directions joined.
fn trace_curve(model: &Model, seed: (f64, f64), lo: f64, hi: f64, step: f64) -> Result<(Vec<(f64, f64)>, bool)> {
    let w_max = model.spec().numerics.w_scan_max;
    let (fwd, closed) = trace_one_way(model, seed, 1.0, lo, hi, step, w_max)?;
    if closed {
        return Ok((fwd, true));
    }
    let (mut back, _) = trace_one_way(model, seed, -1.0, lo, hi, step, w_max)?;
    back.reverse();
    back.pop();
    back.extend(fwd);
    // Orient by increasing α at the start for reproducible output.
    if back.len() > 1 && back[0].0 > back[back.len() - 1].0 {
        back.reverse();
    }
    Ok((back, false))
}

fn covered(curve: &[(f64, f64)], a: f64, w: f64, step: f64) -> bool {
    curve.windows(2).any(|s| {
        let (p, q) = (s[0], s[1]);
        let (amin, amax) = (p.0.min(q.0), p.0.max(q.0));
        if a < amin - 1e-12 || a > amax + 1e-12 {
            return false;
        }
        let t = if q.0 == p.0 { 0.5 } else { (a - p.0) / (q.0 - p.0) };
        let wi = p.1 + t * (q.1 - p.1);
        (wi - w).abs() <= 0.5 * step + 1e-3 * (1.0 + w.abs())
    })
}

fn classify(model: &Model, alpha: f64, w: f64) -> Result<BranchPoint> {
    let curve = PhiCurve::new(model, alpha);
    let eq = build_point(&curve, w)?;
    let r = rightmost_at(model, &eq)?;
    let verdict = Verdict::of(r, model.spec().numerics.stability_tol);
    Ok(BranchPoint {
        alpha,
        w_star: w,
        kind: eq.kind,
        rightmost: r.map(|r| r.lambda),
        verdict,
        stable: verdict == Verdict::Stable,
    })
}

fn alpha_grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step).round().max(1.0) as usize;
    (0..=n).map(|k| lo + (hi - lo) * k as f64 / n as f64).collect()
}

/// Every equilibrium branch over `[alpha_lo, alpha_hi]`: the disease-free
/// branch first, then endemic branches in order of their first `α`.
pub fn trace_diagram(model: &Model, alpha_lo: f64, alpha_hi: f64, step: f64) -> Result<Vec<Branch>> {
    if !(alpha_lo < alpha_hi) || !(step > 0.0) || !alpha_lo.is_finite() || !alpha_hi.is_finite() {
        return Err(Error::Precondition(format!(
            "need alpha_lo < alpha_hi and step > 0, got [{}, {}] step {}",
            alpha_lo, alpha_hi, step
        )));
    }
    let grid = alpha_grid(alpha_lo, alpha_hi, step);
    let scans: Vec<Vec<f64>> = grid
        .par_iter()
        .map(|&a| endemic_roots(&PhiCurve::new(model, a)))
        .collect::<Result<_>>()?;

    let mut curves: Vec<(Vec<(f64, f64)>, bool)> = Vec::new();
    for (&a, ws) in grid.iter().zip(&scans) {
        for &w in ws {
            if curves.iter().any(|(c, _)| covered(c, a, w, step)) {
                continue;
            }
            curves.push(trace_curve(model, (a, w), alpha_lo, alpha_hi, step)?);
        }
    }

    let transcritical = detect_transcritical(model, alpha_lo, alpha_hi)?;
    let mut dfe_alphas = grid.clone();
    dfe_alphas.extend(&transcritical);
    dfe_alphas.sort_by(f64::total_cmp);
    dfe_alphas.dedup_by(|x, y| (*x - *y).abs() < 1e-12);

    let dfe_points: Vec<BranchPoint> = dfe_alphas
        .par_iter()
        .map(|&a| {
            let eq = disease_free(model, a)?;
            let r = rightmost_at(model, &eq)?;
            let verdict = Verdict::of(r, model.spec().numerics.stability_tol);
            Ok(BranchPoint {
                alpha: a,
                w_star: 0.0,
                kind: EqKind::DiseaseFree,
                rightmost: r.map(|r| r.lambda),
                verdict,
                stable: verdict == Verdict::Stable,
            })
        })
        .collect::<Result<_>>()?;
    let mut dfe = Branch { points: dfe_points, bifurcations: Vec::new(), closed: false };
    for &a in &transcritical {
        dfe.bifurcations.push(Bifurcation {
            kind: BifurcationKind::Transcritical,
            alpha: a,
            w_star: 0.0,
            omega: 0.0,
            refined: true,
        });
    }
    dfe.bifurcations.extend(detect_hopf(model, &dfe)?);

    let mut out = vec![dfe];
    for (c, closed) in curves {
        let points: Vec<BranchPoint> = c.par_iter().map(|&(a, w)| classify(model, a, w)).collect::<Result<_>>()?;
        let mut b = Branch { points, bifurcations: Vec::new(), closed };
        let mut events = detect_fold(model, &b)?;
        events.extend(detect_hopf(model, &b)?);
        events.sort_by(|x, y| x.alpha.total_cmp(&y.alpha));
        b.bifurcations = events;
        out.push(b);
    }
    Ok(out)
}

/// Values of `α` in `[alpha_lo, alpha_hi]` where `R0e(α) = 1`.
pub fn detect_transcritical(model: &Model, alpha_lo: f64, alpha_hi: f64) -> Result<Vec<f64>> {
    let n = 256;
    let f = |a: f64| epidemic_reproduction(model, a).map(|r| r - 1.0);
    let mut out = Vec::new();
    let mut a0 = alpha_lo;
    let mut f0 = f(a0)?;
    for k in 1..=n {
        let a1 = alpha_lo + (alpha_hi - alpha_lo) * k as f64 / n as f64;
        let f1 = f(a1)?;
        if f0 == 0.0 {
            out.push(a0);
        } else if f0 * f1 < 0.0 {
            out.push(bisect(|a| f(a).unwrap_or(f64::NAN), a0, a1));
        }
        a0 = a1;
        f0 = f1;
    }
    if f0 == 0.0 {
        out.push(a0);
    }
    Ok(out)
}

/// Rightmost root at the point of `kind` near `(alpha, w_guess)`.
fn rightmost_near(model: &Model, kind: EqKind, alpha: f64, w_guess: f64, spread: f64) -> Result<Option<Root>> {
    let eq = match kind {
        EqKind::DiseaseFree => disease_free(model, alpha)?,
        EqKind::Endemic => {
            let w = solve_w_near(model, alpha, w_guess, spread).ok_or_else(|| {
                Error::EquilibriumNotFound(format!("branch lost at alpha = {} near W = {}", alpha, w_guess))
            })?;
            build_point(&PhiCurve::new(model, alpha), w)?
        }
    };
    rightmost_at(model, &eq)
}

/// Sign changes of the rightmost real part between neighbouring points whose
/// crossing root is a complex pair, refined by bisection in `α`.
pub fn detect_hopf(model: &Model, branch: &Branch) -> Result<Vec<Bifurcation>> {
    let mut out = Vec::new();
    let p = &branch.points;
    for s in p.windows(2) {
        let (a, b) = (&s[0], &s[1]);
        let (Some(ra), Some(rb)) = (a.rightmost, b.rightmost) else {
            continue;
        };
        if (ra.re > 0.0) == (rb.re > 0.0) || a.alpha == b.alpha {
            continue;
        }
        match refine_crossing(model, a, b, ra, rb, 0) {
            Ok(v) => out.extend(v),
            Err(e) => log::warn!("crossing between alpha = {} and {} not refined: {}", a.alpha, b.alpha, e),
        }
    }
    Ok(out)
}

fn refine_crossing(
    model: &Model,
    a: &BranchPoint,
    b: &BranchPoint,
    ra: Complex64,
    rb: Complex64,
    depth: usize,
) -> Result<Vec<Bifurcation>> {
    let kind = a.kind;
    let spread = (b.w_star - a.w_star).abs() + 1e-9;
    let w_at = |al: f64| a.w_star + (al - a.alpha) / (b.alpha - a.alpha) * (b.w_star - a.w_star);
    let is_complex = |r: Complex64| r.im.abs() > OMEGA_TOL;
    if !is_complex(ra) && !is_complex(rb) {
        // A real root crossing: a fold or transcritical point, not a Hopf point.
        return Ok(Vec::new());
    }
    if is_complex(ra) != is_complex(rb) && depth < 3 {
        // The leading root changes type inside the interval; look at finer steps.
        let n = 8;
        let mut prev = (a.clone(), ra);
        let mut found = Vec::new();
        for k in 1..=n {
            let al = a.alpha + (b.alpha - a.alpha) * k as f64 / n as f64;
            let r = if k == n {
                Some(rb)
            } else {
                rightmost_near(model, kind, al, w_at(al), spread)?.map(|r| r.lambda)
            };
            let Some(r) = r else { continue };
            let bp = BranchPoint { alpha: al, w_star: w_at(al), rightmost: Some(r), ..a.clone() };
            if (prev.1.re > 0.0) != (r.re > 0.0) {
                found.extend(refine_crossing(model, &prev.0, &bp, prev.1, r, depth + 1)?);
            }
            prev = (bp, r);
        }
        return Ok(found);
    }
    let (mut lo, mut hi) = (a.alpha, b.alpha);
    let (mut zlo, mut zhi) = (ra, rb);
    while (hi - lo).abs() > HOPF_ALPHA_TOL {
        let mid = 0.5 * (lo + hi);
        let Some(r) = rightmost_near(model, kind, mid, w_at(mid), spread)? else {
            break;
        };
        if (r.lambda.re > 0.0) == (zlo.re > 0.0) {
            lo = mid;
            zlo = r.lambda;
        } else {
            hi = mid;
            zhi = r.lambda;
        }
    }
    let unstable = if zlo.re > 0.0 { zlo } else { zhi };
    if !is_complex(unstable) || !is_complex(if zlo.re > 0.0 { zhi } else { zlo }) {
        return Ok(Vec::new());
    }
    let alpha = 0.5 * (lo + hi);
    let w_star = match kind {
        EqKind::DiseaseFree => 0.0,
        EqKind::Endemic => solve_w_near(model, alpha, w_at(alpha), spread).unwrap_or(w_at(alpha)),
    };
    Ok(vec![Bifurcation {
        kind: BifurcationKind::Hopf,
        alpha,
        w_star,
        omega: 0.5 * (zlo.im.abs() + zhi.im.abs()),
        refined: true,
    }])
}

/// Turning points of `α` along an endemic branch, refined by solving
/// `φ = 1, ∂φ/∂W = 0`.
pub fn detect_fold(model: &Model, branch: &Branch) -> Result<Vec<Bifurcation>> {
    let p = &branch.points;
    let mut out = Vec::new();
    if p.len() < 3 || branch.kind() != Some(EqKind::Endemic) {
        return Ok(out);
    }
    let n = p.len();
    let idx: Vec<usize> = if branch.closed { (0..n).collect() } else { (1..n - 1).collect() };
    for i in idx {
        let (prev, next) = (&p[(i + n - 1) % n], &p[(i + 1) % n]);
        let d0 = p[i].alpha - prev.alpha;
        let d1 = next.alpha - p[i].alpha;
        if !(d0 * d1 < 0.0) {
            continue;
        }
        match refine_fold(model, p[i].alpha, p[i].w_star) {
            Some((a, w)) => out.push(Bifurcation {
                kind: BifurcationKind::Fold,
                alpha: a,
                w_star: w,
                omega: 0.0,
                refined: true,
            }),
            None => out.push(Bifurcation {
                kind: BifurcationKind::Fold,
                alpha: p[i].alpha,
                w_star: p[i].w_star,
                omega: 0.0,
                refined: false,
            }),
        }
    }
    // An extreme α reached at a branch end is reported unrefined.
    if !branch.closed {
        for (end, inner) in [(0, 1), (n - 1, n - 2)] {
            let a = p[end].alpha;
            let edge = a <= p.iter().map(|q| q.alpha).fold(f64::INFINITY, f64::min)
                || a >= p.iter().map(|q| q.alpha).fold(f64::NEG_INFINITY, f64::max);
            let slope = PhiCurve::new(model, a).slope(p[end].w_star);
            if edge && slope.abs() < 1e-3 && (p[inner].alpha - a).abs() < 1e-3 {
                out.push(Bifurcation {
                    kind: BifurcationKind::Fold,
                    alpha: a,
                    w_star: p[end].w_star,
                    omega: 0.0,
                    refined: false,
                });
            }
        }
    }
    Ok(out)
}

fn refine_fold(model: &Model, alpha: f64, w: f64) -> Option<(f64, f64)> {
    let sys = |a: f64, w: f64| {
        let c = PhiCurve::new(model, a);
        (c.phi(w) - 1.0, c.slope(w))
    };
    let (mut a, mut w) = (alpha, w);
    for _ in 0..40 {
        let (f1, f2) = sys(a, w);
        let ha = 1e-5 * (1.0 + a.abs());
        let hw = 1e-5 * (1.0 + w.abs());
        let (f1a, f2a) = sys(a + ha, w);
        let (f1w, f2w) = sys(a, w + hw);
        let (j11, j12, j21, j22) = ((f1a - f1) / ha, (f1w - f1) / hw, (f2a - f2) / ha, (f2w - f2) / hw);
        let det = j11 * j22 - j12 * j21;
        if !(det.abs() > 0.0) {
            return None;
        }
        let da = (-f1 * j22 + f2 * j12) / det;
        let dw = (-j11 * f2 + j21 * f1) / det;
        a += da;
        w += dw;
        if !(w > 0.0) || (a - alpha).abs() > 1.0 {
            return None;
        }
        if da.abs() < 1e-12 * (1.0 + a.abs()) && dw.abs() < 1e-12 * (1.0 + w.abs()) {
            break;
        }
    }
    let (f1, f2) = sys(a, w);
    (f1.abs() < 1e-9 && f2.abs() < FOLD_TOL).then_some((a, w))
}
