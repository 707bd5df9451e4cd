//! Complex root location by argument-principle box subdivision and Newton
//! polishing.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// An entire function of `λ` with its derivative.
pub trait Analytic: Sync {
    /// `(f(λ), f'(λ), scale)`, where `scale ≥ 1` is the size of the terms
    /// that cancel in `f`; residuals are reported as `|f| / scale`.
    fn eval(&self, lambda: Complex64) -> (Complex64, Complex64, f64);

    /// Positive when `f` provably has no zero with `Re λ ≥ zeta`.
    fn no_root_margin(&self, zeta: f64) -> f64;
}

/// Search rectangle `[zeta_lo, zeta_hi] × [-omega_max, omega_max]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Region {
    pub zeta_lo: f64,
    pub zeta_hi: f64,
    pub omega_max: f64,
}

/// Knobs for [`find_roots`] and [`rightmost_root`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootOptions {
    pub newton_tol: f64,
    pub max_roots: usize,
}

impl Default for RootOptions {
    fn default() -> Self {
        RootOptions { newton_tol: 1e-10, max_roots: 64 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root {
    pub lambda: Complex64,
    /// `|f(λ)| / scale` after polishing.
    pub residual: f64,
    pub multiplicity: usize,
}

/// A box of the subdivision tree with its argument-principle count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindingBox {
    pub zeta: (f64, f64),
    pub omega: (f64, f64),
    pub count: usize,
    pub depth: usize,
    /// Whether the box was split; if so its children follow it at `depth + 1`
    /// and their counts add up to `count`.
    pub split: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumResult {
    /// Sorted by real part, then imaginary part. Conjugates are both listed.
    pub roots: Vec<Root>,
    pub region: Region,
    pub winding_counts: Vec<WindingBox>,
    /// Set when more than `max_roots` roots were found and the search stopped.
    pub partial: bool,
}

impl SpectrumResult {
    /// Root with the largest real part (largest `ω ≥ 0` among ties).
    pub fn rightmost(&self) -> Option<Root> {
        self.roots
            .iter()
            .filter(|r| r.lambda.im >= 0.0)
            .copied()
            .max_by(|a, b| {
                a.lambda
                    .re
                    .total_cmp(&b.lambda.re)
                    .then(a.lambda.im.total_cmp(&b.lambda.im))
            })
    }
}

/// How far below the real axis the search box reaches so that real roots lie
/// strictly inside it.
const BELOW_AXIS: f64 = 1e-2;
const MAX_JITTERS: usize = 5;
const MAX_EDGE_DEPTH: usize = 48;
const SPLIT_FRACTIONS: [f64; MAX_JITTERS + 1] = [0.5, 0.437, 0.563, 0.381, 0.619, 0.47];

#[derive(Clone, Copy)]
struct Sample {
    z: Complex64,
    f: Complex64,
    df: f64,
}

fn sample<F: Analytic + ?Sized>(f: &F, z: Complex64) -> Sample {
    let (v, d, _) = f.eval(z);
    Sample { z, f: v, df: d.norm() }
}

/// Phase change of `f` along the segment between two samples, refined until
/// each piece turns by less than π/2 and `f` cannot vanish on it.
fn edge_phase<F: Analytic + ?Sized>(f: &F, a: Sample, b: Sample, depth: usize) -> Option<f64> {
    let (fa, fb) = (a.f.norm(), b.f.norm());
    if !(fa > 0.0 && fb > 0.0) || !fa.is_finite() || !fb.is_finite() {
        return None;
    }
    let dphi = (b.f / a.f).arg();
    let len = (b.z - a.z).norm();
    if dphi.abs() <= std::f64::consts::FRAC_PI_2 && len * a.df.max(b.df) <= 0.5 * fa.min(fb) {
        return Some(dphi);
    }
    if depth >= MAX_EDGE_DEPTH {
        return None;
    }
    let m = sample(f, 0.5 * (a.z + b.z));
    Some(edge_phase(f, a, m, depth + 1)? + edge_phase(f, m, b, depth + 1)?)
}

#[derive(Debug, Clone, Copy)]
struct Rect {
    z0: f64,
    z1: f64,
    w0: f64,
    w1: f64,
}

impl Rect {
    fn corners(&self) -> [Complex64; 4] {
        [
            Complex64::new(self.z0, self.w0),
            Complex64::new(self.z1, self.w0),
            Complex64::new(self.z1, self.w1),
            Complex64::new(self.z0, self.w1),
        ]
    }

    fn centre(&self) -> Complex64 {
        Complex64::new(0.5 * (self.z0 + self.z1), 0.5 * (self.w0 + self.w1))
    }

    fn contains(&self, z: Complex64) -> bool {
        z.re >= self.z0 && z.re <= self.z1 && z.im >= self.w0 && z.im <= self.w1
    }

    fn diam(&self) -> f64 {
        (self.z1 - self.z0).hypot(self.w1 - self.w0)
    }

    fn split(&self, frac: f64) -> [Rect; 2] {
        if self.z1 - self.z0 >= self.w1 - self.w0 {
            let m = self.z0 + frac * (self.z1 - self.z0);
            [Rect { z1: m, ..*self }, Rect { z0: m, ..*self }]
        } else {
            let m = self.w0 + frac * (self.w1 - self.w0);
            [Rect { w1: m, ..*self }, Rect { w0: m, ..*self }]
        }
    }
}

/// Number of zeros inside `r`, or `None` if a zero sits too close to the boundary.
fn winding<F: Analytic + ?Sized>(f: &F, r: &Rect) -> Option<usize> {
    let c = r.corners();
    let s: Vec<Sample> = c.par_iter().map(|&z| sample(f, z)).collect();
    let total: Option<Vec<f64>> = (0..4)
        .into_par_iter()
        .map(|i| edge_phase(f, s[i], s[(i + 1) % 4], 0))
        .collect();
    let turns = total?.iter().sum::<f64>() / std::f64::consts::TAU;
    let n = turns.round();
    if (turns - n).abs() > 0.1 || n < 0.0 {
        return None;
    }
    Some(n as usize)
}

/// Newton iteration; returns the limit and its relative residual.
fn newton<F: Analytic + ?Sized>(f: &F, mut z: Complex64, tol: f64) -> Option<(Complex64, f64)> {
    let mut best = None;
    for _ in 0..60 {
        let (v, d, scale) = f.eval(z);
        let res = v.norm() / scale;
        if !res.is_finite() {
            return None;
        }
        if best.map_or(true, |(_, r)| res < r) {
            best = Some((z, res));
        }
        if res < 1e-3 * tol || d.norm() == 0.0 {
            break;
        }
        let step = v / d;
        z -= step;
        if !(z.re.is_finite() && z.im.is_finite()) {
            break;
        }
        if step.norm() <= 1e-3 * tol * (1.0 + z.norm()) {
            let (v, _, scale) = f.eval(z);
            let res = v.norm() / scale;
            if res < best.unwrap().1 {
                best = Some((z, res));
            }
            break;
        }
    }
    best
}

enum Outcome {
    Root(Root),
    Split([(Rect, usize); 2]),
    Empty,
}

fn process<F: Analytic + ?Sized>(f: &F, r: Rect, count: usize, tol: f64) -> Result<Outcome> {
    if count == 0 {
        return Ok(Outcome::Empty);
    }
    let c = r.centre();
    let tiny = r.diam() < 1e-9 * (1.0 + c.norm());
    if count == 1 || tiny {
        if let Some((z, res)) = newton(f, c, tol) {
            if r.contains(z) && (res < tol || tiny) {
                return Ok(Outcome::Root(Root { lambda: z, residual: res, multiplicity: count }));
            }
        }
        if tiny {
            let (v, _, scale) = f.eval(c);
            return Ok(Outcome::Root(Root {
                lambda: c,
                residual: v.norm() / scale,
                multiplicity: count,
            }));
        }
    }
    for frac in SPLIT_FRACTIONS {
        let [a, b] = r.split(frac);
        if let (Some(na), Some(nb)) = (winding(f, &a), winding(f, &b)) {
            if na + nb == count {
                return Ok(Outcome::Split([(a, na), (b, nb)]));
            }
        }
    }
    Err(Error::WindingUnstable(format!(
        "box [{}, {}] x [{}, {}] with {} roots could not be split consistently",
        r.z0, r.z1, r.w0, r.w1, count
    )))
}

/// Locates the zeros of `f` in `region`, assuming `f(conj λ) = conj f(λ)`.
pub fn find_roots<F: Analytic + ?Sized>(f: &F, region: Region, opts: RootOptions) -> Result<SpectrumResult> {
    if !(region.zeta_lo < region.zeta_hi) || !(region.omega_max > 0.0) || !region.zeta_lo.is_finite()
        || !region.zeta_hi.is_finite() || !region.omega_max.is_finite()
    {
        return Err(Error::Precondition(format!("bad search region {:?}", region)));
    }
    let width = region.zeta_hi - region.zeta_lo;
    let mut top = None;
    for k in 0..=MAX_JITTERS {
        let j = if k == 0 { 0.0 } else { 1e-4 * k as f64 * (1.0 + 0.618 * k as f64) };
        let r = Rect {
            z0: region.zeta_lo - j * width,
            z1: region.zeta_hi + 0.7 * j * width,
            w0: -BELOW_AXIS * (1.0 + 3.0 * j),
            w1: region.omega_max * (1.0 + j),
        };
        if let Some(n) = winding(f, &r) {
            top = Some((r, n));
            break;
        }
    }
    let (top, n) = top.ok_or_else(|| {
        Error::WindingUnstable(format!("zero on the boundary of {:?} after {} jitters", region, MAX_JITTERS))
    })?;

    let mut boxes = vec![WindingBox {
        zeta: (top.z0, top.z1),
        omega: (top.w0, top.w1),
        count: n,
        depth: 0,
        split: false,
    }];
    let mut frontier = vec![(top, n, 0usize)];
    let mut found: Vec<Root> = Vec::new();
    let mut partial = false;
    while !frontier.is_empty() {
        let outcomes: Vec<Result<Outcome>> = frontier
            .par_iter()
            .map(|&(r, c, _)| process(f, r, c, opts.newton_tol))
            .collect();
        let mut next = Vec::new();
        for ((r, _, depth), out) in frontier.iter().zip(outcomes) {
            match out? {
                Outcome::Empty => {}
                Outcome::Root(root) => found.push(root),
                Outcome::Split(children) => {
                    if let Some(b) = boxes
                        .iter_mut()
                        .rev()
                        .find(|b| b.zeta == (r.z0, r.z1) && b.omega == (r.w0, r.w1))
                    {
                        b.split = true;
                    }
                    for (cr, cn) in children {
                        boxes.push(WindingBox {
                            zeta: (cr.z0, cr.z1),
                            omega: (cr.w0, cr.w1),
                            count: cn,
                            depth: depth + 1,
                            split: false,
                        });
                        next.push((cr, cn, depth + 1));
                    }
                }
            }
        }
        if found.iter().map(|r| r.multiplicity).sum::<usize>() > opts.max_roots {
            partial = true;
            break;
        }
        frontier = next;
    }

    let mut roots = Vec::new();
    for mut r in found {
        let snap = 1e-7 * (1.0 + r.lambda.norm());
        if r.lambda.im.abs() <= snap {
            r.lambda.im = 0.0;
            roots.push(r);
        } else if r.lambda.im > 0.0 {
            roots.push(r);
            roots.push(Root { lambda: r.lambda.conj(), ..r });
        }
    }
    roots.sort_by(|a, b| {
        a.lambda
            .re
            .total_cmp(&b.lambda.re)
            .then(a.lambda.im.total_cmp(&b.lambda.im))
    });
    Ok(SpectrumResult { roots, region, winding_counts: boxes, partial })
}

/// Half-width of the windows scanned by [`rightmost_root`].
pub const WINDOW_HALF_WIDTH: f64 = 0.5;

/// Scans windows of width `2·WINDOW_HALF_WIDTH` leftward from `zeta_hi` and
/// returns the rightmost root of the first window holding any, or `None` when
/// nothing lies above `zeta_lo`.
///
/// The scan starts at whichever is larger of `zeta_hi` and the smallest `ζ`
/// past which [`Analytic::no_root_margin`] excludes zeros, so roots right of
/// `zeta_hi` are not missed.
pub fn rightmost_root<F: Analytic + ?Sized>(
    f: &F,
    zeta_lo: f64,
    zeta_hi: f64,
    omega_max: f64,
    opts: RootOptions,
) -> Result<Option<Root>> {
    let mut hi = zeta_hi;
    if f.no_root_margin(hi) > 0.0 {
        // Lower the start to the free half-plane boundary.
        let mut lo = hi;
        while lo > zeta_lo && f.no_root_margin(lo) > 0.0 {
            lo -= 1.0;
        }
        if f.no_root_margin(lo) > 0.0 {
            return Ok(None);
        }
        hi = crate::model::bisect(|z| f.no_root_margin(z), lo, lo + 1.0) + 1e-3;
    } else {
        let mut step = 1.0;
        while f.no_root_margin(hi) <= 0.0 {
            hi += step;
            step *= 2.0;
            if hi > 1e6 {
                return Err(Error::Degenerate("no root-free half-plane found".into()));
            }
        }
    }
    let mut top = hi;
    while top > zeta_lo {
        let bottom = (top - 2.0 * WINDOW_HALF_WIDTH).max(zeta_lo);
        let res = find_roots(f, Region { zeta_lo: bottom, zeta_hi: top, omega_max }, opts)?;
        if let Some(r) = res.rightmost() {
            return Ok(Some(r));
        }
        top = bottom;
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// `(λ - r1)(λ - r2)...` with conjugates.
    struct Poly(Vec<Complex64>);

    impl Analytic for Poly {
        fn eval(&self, z: Complex64) -> (Complex64, Complex64, f64) {
            let mut v = Complex64::new(1.0, 0.0);
            let mut d = Complex64::new(0.0, 0.0);
            for r in &self.0 {
                d = d * (z - r) + v;
                v *= z - r;
            }
            (v, d, 1.0 + z.norm().powi(self.0.len() as i32))
        }
        fn no_root_margin(&self, zeta: f64) -> f64 {
            zeta - self.0.iter().map(|r| r.re).fold(f64::MIN, f64::max) - 1e-9
        }
    }

    /// `λ + 1 - e^{-λ}`-style entire function with infinitely many roots.
    struct Delay;

    impl Analytic for Delay {
        fn eval(&self, z: Complex64) -> (Complex64, Complex64, f64) {
            let e = (-z).exp();
            (z + 0.5 + 2.0 * e, 1.0 - 2.0 * e, 1.0 + z.norm() + 2.0 * e.norm())
        }
        fn no_root_margin(&self, zeta: f64) -> f64 {
            zeta + 0.5 - 2.0 * (-zeta).exp()
        }
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn polynomial_roots_found_with_conjugates() {
        let p = Poly(vec![c(-1.0, 0.0), c(0.3, 2.0), c(0.3, -2.0), c(-3.0, 7.5), c(-3.0, -7.5), c(1.0, 0.0)]);
        let res = find_roots(&p, Region { zeta_lo: -10.0, zeta_hi: 2.0, omega_max: 40.0 }, RootOptions::default())
            .unwrap();
        assert_eq!(res.roots.len(), 6);
        let mut want = p.0.clone();
        want.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        for (r, w) in res.roots.iter().zip(&want) {
            assert!((r.lambda - w).norm() < 1e-9, "{:?} vs {:?}", r.lambda, w);
            assert_eq!(r.multiplicity, 1);
        }
        assert_eq!(res.rightmost().unwrap().lambda, c(1.0, 0.0));
        assert!(!res.partial);
    }

    #[test]
    fn children_counts_add_up() {
        let p = Poly(vec![c(-1.0, 1.0), c(-1.0, -1.0), c(0.5, 3.0), c(0.5, -3.0), c(-0.2, 0.0)]);
        let res = find_roots(&p, Region { zeta_lo: -4.0, zeta_hi: 2.0, omega_max: 10.0 }, RootOptions::default())
            .unwrap();
        let b = &res.winding_counts;
        for (i, parent) in b.iter().enumerate() {
            if !parent.split {
                continue;
            }
            let kids: Vec<_> = b[i + 1..]
                .iter()
                .filter(|k| {
                    k.depth == parent.depth + 1
                        && k.zeta.0 >= parent.zeta.0
                        && k.zeta.1 <= parent.zeta.1
                        && k.omega.0 >= parent.omega.0
                        && k.omega.1 <= parent.omega.1
                })
                .collect();
            assert_eq!(kids.len(), 2);
            assert_eq!(kids[0].count + kids[1].count, parent.count);
        }
    }

    #[test]
    fn double_root_reported_with_multiplicity() {
        let p = Poly(vec![c(-0.5, 0.0), c(-0.5, 0.0)]);
        let res = find_roots(&p, Region { zeta_lo: -2.0, zeta_hi: 1.0, omega_max: 3.0 }, RootOptions::default())
            .unwrap();
        let total: usize = res.roots.iter().map(|r| r.multiplicity).sum();
        assert_eq!(total, 2);
        for r in &res.roots {
            assert!((r.lambda - c(-0.5, 0.0)).norm() < 1e-4);
        }
    }

    #[test]
    fn max_roots_flags_partial() {
        let p = Poly((0..6).map(|k| c(-1.0 + 0.1 * k as f64, 0.0)).collect());
        let res = find_roots(&p, Region { zeta_lo: -2.0, zeta_hi: 1.0, omega_max: 3.0 }, RootOptions {
            max_roots: 2,
            ..Default::default()
        })
        .unwrap();
        assert!(res.partial);
    }

    #[test]
    fn delay_equation_rightmost() {
        // Real roots of λ + 1/2 + 2e^{-λ}: none; the rightmost pair solves the
        // equation with Newton from a nearby guess, which serves as reference.
        let f = Delay;
        let r = rightmost_root(&f, -10.0, 2.0, 40.0, RootOptions::default()).unwrap().unwrap();
        let (v, _, s) = f.eval(r.lambda);
        assert!(v.norm() / s < 1e-10);
        let res = find_roots(&f, Region { zeta_lo: r.lambda.re - 3.0, zeta_hi: 3.0, omega_max: 40.0 }, RootOptions::default())
            .unwrap();
        assert!((res.rightmost().unwrap().lambda - r.lambda).norm() < 1e-8);
        for root in &res.roots {
            assert!(res.roots.iter().any(|o| (o.lambda - root.lambda.conj()).norm() < 1e-9));
        }
    }

    #[test]
    fn nothing_above_window_gives_none() {
        let p = Poly(vec![c(-20.0, 0.0)]);
        assert!(rightmost_root(&p, -10.0, 2.0, 40.0, RootOptions::default()).unwrap().is_none());
    }
}
