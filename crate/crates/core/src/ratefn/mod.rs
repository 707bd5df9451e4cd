//! Text expressions for age-dependent rates and density dependence.
//!
//! Rates are written in the variable `a`, density dependence in `x`. A rate may
//! also be given piecewise:
//!
//! ```text
//! piecewise{[0, pi/6): 1; [pi/6, pi/3): 0; [pi/3, pi/2]: 1}
//! ```
//!
//! Intervals are left-closed; the last piece is also closed on the right.

mod expr;
mod parser;

use std::fmt;

pub use expr::{BinOp, Expr, Func1, Func2, Node};
pub use parser::{parse_constant, parse_expr};

use crate::error::{Error, Result};

/// Tolerance used when comparing piece endpoints.
const EDGE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Piece {
    pub lo: f64,
    pub hi: f64,
    pub closed_right: bool,
    pub expr: Expr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Piecewise {
    source: String,
    pieces: Vec<Piece>,
}

impl Piecewise {
    pub(crate) fn new(source: &str, mut pieces: Vec<Piece>) -> Self {
        pieces.sort_by(|x, y| x.lo.total_cmp(&y.lo));
        Piecewise {
            source: source.to_string(),
            pieces,
        }
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    fn locate(&self, a: f64) -> Option<&Piece> {
        let n = self.pieces.len();
        let first = &self.pieces[0];
        let last = &self.pieces[n - 1];
        if a < first.lo {
            return (first.lo - a <= EDGE_TOL).then_some(first);
        }
        if a >= last.hi {
            return (a - last.hi <= EDGE_TOL).then_some(last);
        }
        // left-closed piece wins at shared endpoints
        self.pieces
            .iter()
            .rev()
            .find(|p| a >= p.lo && (a < p.hi || (a == p.hi && p.closed_right)))
    }

    pub fn eval(&self, a: f64) -> f64 {
        match self.locate(a) {
            Some(p) => p.expr.eval(a),
            None => f64::NAN,
        }
    }

    /// Checks that the pieces are disjoint and cover `[0, a_dagger]`.
    pub fn check_coverage(&self, a_dagger: f64) -> Result<()> {
        let n = self.pieces.len();
        if self.pieces[0].lo.abs() > EDGE_TOL {
            return Err(Error::Validation(format!(
                "piecewise `{}` starts at {} instead of 0",
                self.source, self.pieces[0].lo
            )));
        }
        for w in self.pieces.windows(2) {
            if (w[0].hi - w[1].lo).abs() > EDGE_TOL {
                let what = if w[0].hi < w[1].lo { "gap" } else { "overlap" };
                return Err(Error::Validation(format!(
                    "piecewise `{}` has a {} between {} and {}",
                    self.source, what, w[0].hi, w[1].lo
                )));
            }
            if w[0].closed_right {
                return Err(Error::Validation(format!(
                    "piecewise `{}`: interior piece ending at {} must be right-open",
                    self.source, w[0].hi
                )));
            }
        }
        let end = self.pieces[n - 1].hi;
        if (end - a_dagger).abs() > EDGE_TOL * (1.0 + a_dagger) {
            return Err(Error::Validation(format!(
                "piecewise `{}` ends at {} but the age domain ends at {}",
                self.source, end, a_dagger
            )));
        }
        Ok(())
    }

    /// Interior break points, where the function may be discontinuous.
    pub fn breakpoints(&self) -> Vec<f64> {
        self.pieces.iter().skip(1).map(|p| p.lo).collect()
    }
}

impl fmt::Display for Piecewise {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("piecewise{")?;
        for (i, p) in self.pieces.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            let close = if p.closed_right { ']' } else { ')' };
            write!(f, "[{}, {}{}: {}", p.lo, p.hi, close, p.expr)?;
        }
        f.write_str("}")
    }
}

/// An age-dependent rate: a single expression or a piecewise definition.
#[derive(Debug, Clone, PartialEq)]
pub enum RateFn {
    Expr(Expr),
    Piecewise(Piecewise),
}

/// Parses a rate in the variable `a`.
pub fn parse_rate(source: &str) -> Result<RateFn> {
    if source.trim_start().starts_with("piecewise") {
        let rest = source.trim_start()["piecewise".len()..].trim_start();
        if rest.starts_with('{') {
            return parser::parse_piecewise(source, "a").map(RateFn::Piecewise);
        }
    }
    parse_expr(source, "a").map(RateFn::Expr)
}

impl RateFn {
    pub fn constant(c: f64) -> Self {
        RateFn::Expr(Expr::from_parts(&format!("{}", c), "a", Node::Num(c)))
    }

    pub fn eval(&self, a: f64) -> f64 {
        match self {
            RateFn::Expr(e) => e.eval(a),
            RateFn::Piecewise(p) => p.eval(a),
        }
    }

    pub fn try_eval(&self, a: f64) -> Result<f64> {
        let y = self.eval(a);
        if y.is_finite() {
            Ok(y)
        } else {
            Err(Error::NonFinite {
                value: y,
                location: format!("`{}` at a = {}", self.source(), a),
            })
        }
    }

    pub fn source(&self) -> &str {
        match self {
            RateFn::Expr(e) => e.source(),
            RateFn::Piecewise(p) => p.source(),
        }
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            RateFn::Expr(_) => Vec::new(),
            RateFn::Piecewise(p) => p.breakpoints(),
        }
    }

    pub fn check_coverage(&self, a_dagger: f64) -> Result<()> {
        match self {
            RateFn::Expr(_) => Ok(()),
            RateFn::Piecewise(p) => p.check_coverage(a_dagger),
        }
    }

    /// True if the rate is the same constant everywhere.
    pub fn is_constant(&self) -> bool {
        match self {
            RateFn::Expr(e) => e.is_constant(),
            RateFn::Piecewise(_) => false,
        }
    }

    /// True if the rate is identically zero.
    pub fn is_zero(&self) -> bool {
        match self {
            RateFn::Expr(e) => e.is_constant() && e.eval(0.0) == 0.0,
            RateFn::Piecewise(p) => p
                .pieces()
                .iter()
                .all(|pc| pc.expr.is_constant() && pc.expr.eval(0.0) == 0.0),
        }
    }
}

impl fmt::Display for RateFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RateFn::Expr(e) => e.fmt(f),
            RateFn::Piecewise(p) => p.fmt(f),
        }
    }
}

/// Distance from the kink of a linear-capped Φ inside which Φ′ is undefined.
pub const KINK_TOL: f64 = 1e-9;

/// Density dependence Φ(x) of the fertility.
#[derive(Debug, Clone, PartialEq)]
pub enum DensityDependence {
    /// `max(1 - x/X, 0)` with ceiling `X`.
    LinearCapped { cap: f64, expr: Expr },
    General(Expr),
}

impl DensityDependence {
    pub fn linear_capped(cap: f64) -> Self {
        let src = format!("max(1 - x/{}, 0)", cap);
        // the generated text always parses
        let expr = parse_expr(&src, "x").expect("generated expression");
        DensityDependence::LinearCapped { cap, expr }
    }

    /// Parses Φ in the variable `x`, recognising the linear-capped form.
    pub fn parse(source: &str) -> Result<Self> {
        let expr = parse_expr(source, "x")?;
        Ok(match detect_cap(expr.root()) {
            Some(cap) => DensityDependence::LinearCapped { cap, expr },
            None => DensityDependence::General(expr),
        })
    }

    pub fn expr(&self) -> &Expr {
        match self {
            DensityDependence::LinearCapped { expr, .. } => expr,
            DensityDependence::General(e) => e,
        }
    }

    pub fn cap(&self) -> Option<f64> {
        match self {
            DensityDependence::LinearCapped { cap, .. } => Some(*cap),
            DensityDependence::General(_) => None,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            DensityDependence::LinearCapped { cap, .. } => (1.0 - x / cap).max(0.0),
            DensityDependence::General(e) => e.eval(x),
        }
    }

    /// Φ′(x). Exact for the capped form, central difference otherwise.
    pub fn derivative(&self, x: f64) -> Result<f64> {
        match self {
            DensityDependence::LinearCapped { cap, .. } => {
                if (x - cap).abs() < KINK_TOL {
                    Err(Error::NonDifferentiable { q_star: x })
                } else if x < *cap {
                    Ok(-1.0 / cap)
                } else {
                    Ok(0.0)
                }
            }
            DensityDependence::General(e) => {
                let h = 1e-6 * (1.0 + x.abs());
                let lo = (x - h).max(0.0);
                let d = (e.eval(x + h) - e.eval(lo)) / (x + h - lo);
                if d.is_finite() {
                    Ok(d)
                } else {
                    Err(Error::NonFinite {
                        value: d,
                        location: format!("Phi'({})", x),
                    })
                }
            }
        }
    }

    /// Upper end of the sample range used for checks and root scans.
    pub fn scan_limit(&self, fallback: f64) -> f64 {
        match self {
            DensityDependence::LinearCapped { cap, .. } => 3.0 * cap,
            DensityDependence::General(_) => fallback,
        }
    }

    /// Checks Φ(0) = 1 and monotonicity on 1000 samples of `[0, x_max]`.
    pub fn validate(&self, x_max: f64) -> Result<()> {
        if let DensityDependence::LinearCapped { cap, .. } = self {
            if !(*cap > 0.0) || !cap.is_finite() {
                return Err(Error::Validation(format!(
                    "phi: ceiling must be positive, got {}",
                    cap
                )));
            }
        }
        let p0 = self.eval(0.0);
        if (p0 - 1.0).abs() > 1e-12 {
            return Err(Error::Validation(format!("phi(0) = {} but must equal 1", p0)));
        }
        let hi = self.scan_limit(x_max);
        let n = 1000;
        let mut prev = p0;
        for i in 1..n {
            let x = hi * i as f64 / (n - 1) as f64;
            let v = self.eval(x);
            if !v.is_finite() {
                return Err(Error::Validation(format!("phi({}) is not finite", x)));
            }
            if v > prev + 1e-12 {
                return Err(Error::Validation(format!(
                    "phi is increasing near x = {} ({} -> {})",
                    x, prev, v
                )));
            }
            prev = v;
        }
        Ok(())
    }
}

impl fmt::Display for DensityDependence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.expr().fmt(f)
    }
}

/// Recognises `max(1 - x/C, 0)` and `max(1 - c*x, 0)` in either argument order.
fn detect_cap(n: &Node) -> Option<f64> {
    let Node::Call2(Func2::Max, l, r) = n else {
        return None;
    };
    let lin = match (l.as_ref(), r.as_ref()) {
        (Node::Num(z), other) | (other, Node::Num(z)) if *z == 0.0 => other,
        _ => return None,
    };
    let Node::Bin(BinOp::Sub, one, slope) = lin else {
        return None;
    };
    if !one.is_constant() || one.eval(0.0) != 1.0 {
        return None;
    }
    let cap = match slope.as_ref() {
        Node::Bin(BinOp::Div, v, c) if **v == Node::Var && c.is_constant() => c.eval(0.0),
        Node::Bin(BinOp::Mul, v, c) if **v == Node::Var && c.is_constant() => 1.0 / c.eval(0.0),
        Node::Bin(BinOp::Mul, c, v) if **v == Node::Var && c.is_constant() => 1.0 / c.eval(0.0),
        Node::Var => 1.0,
        _ => return None,
    };
    (cap.is_finite() && cap > 0.0).then_some(cap)
}
