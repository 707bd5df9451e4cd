use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn precedence(self) -> u8 {
        match self {
            BinOp::Add | BinOp::Sub => 1,
            BinOp::Mul | BinOp::Div => 2,
            BinOp::Pow => 4,
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func1 {
    Sin,
    Cos,
    Tan,
    Exp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func2 {
    Max,
    Min,
}

impl Func1 {
    pub(crate) fn from_name(name: &str) -> Option<Self> {
        match name {
            "sin" => Some(Func1::Sin),
            "cos" => Some(Func1::Cos),
            "tan" => Some(Func1::Tan),
            "exp" => Some(Func1::Exp),
            _ => None,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Func1::Sin => "sin",
            Func1::Cos => "cos",
            Func1::Tan => "tan",
            Func1::Exp => "exp",
        }
    }

    fn apply(self, x: f64) -> f64 {
        match self {
            Func1::Sin => x.sin(),
            Func1::Cos => x.cos(),
            Func1::Tan => x.tan(),
            Func1::Exp => x.exp(),
        }
    }
}

impl Func2 {
    pub(crate) fn from_name(name: &str) -> Option<Self> {
        match name {
            "max" => Some(Func2::Max),
            "min" => Some(Func2::Min),
            _ => None,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Func2::Max => "max",
            Func2::Min => "min",
        }
    }

    fn apply(self, x: f64, y: f64) -> f64 {
        match self {
            Func2::Max => x.max(y),
            Func2::Min => x.min(y),
        }
    }
}

/// Expression tree over a single free variable.
#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Num(f64),
    Var,
    Pi,
    Neg(Box<Node>),
    Bin(BinOp, Box<Node>, Box<Node>),
    Call1(Func1, Box<Node>),
    Call2(Func2, Box<Node>, Box<Node>),
}

impl Node {
    pub fn eval(&self, v: f64) -> f64 {
        match self {
            Node::Num(c) => *c,
            Node::Var => v,
            Node::Pi => std::f64::consts::PI,
            Node::Neg(e) => -e.eval(v),
            Node::Bin(op, l, r) => {
                let (x, y) = (l.eval(v), r.eval(v));
                match op {
                    BinOp::Add => x + y,
                    BinOp::Sub => x - y,
                    BinOp::Mul => x * y,
                    BinOp::Div => x / y,
                    BinOp::Pow => pow(x, y),
                }
            }
            Node::Call1(f, e) => f.apply(e.eval(v)),
            Node::Call2(f, l, r) => f.apply(l.eval(v), r.eval(v)),
        }
    }

    /// True if the subtree does not reference the free variable.
    pub fn is_constant(&self) -> bool {
        match self {
            Node::Num(_) | Node::Pi => true,
            Node::Var => false,
            Node::Neg(e) | Node::Call1(_, e) => e.is_constant(),
            Node::Bin(_, l, r) | Node::Call2(_, l, r) => l.is_constant() && r.is_constant(),
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Node::Bin(op, _, _) => op.precedence(),
            Node::Neg(_) => 3,
            Node::Num(c) if *c < 0.0 || c.is_sign_negative() => 3,
            _ => 5,
        }
    }

    fn write(&self, f: &mut fmt::Formatter<'_>, var: &str) -> fmt::Result {
        match self {
            Node::Num(c) => {
                if c.is_sign_negative() {
                    write!(f, "-{}", -c)
                } else {
                    write!(f, "{}", c)
                }
            }
            Node::Var => f.write_str(var),
            Node::Pi => f.write_str("pi"),
            Node::Neg(e) => {
                f.write_str("-")?;
                write_operand(f, e, e.precedence() < 3, var)
            }
            Node::Bin(op, l, r) => {
                let p = op.precedence();
                let left_parens = if *op == BinOp::Pow {
                    l.precedence() <= p
                } else {
                    l.precedence() < p
                };
                let right_parens = if *op == BinOp::Pow {
                    r.precedence() < p
                } else {
                    r.precedence() <= p
                };
                write_operand(f, l, left_parens, var)?;
                write!(f, " {} ", op.symbol())?;
                write_operand(f, r, right_parens, var)
            }
            Node::Call1(func, e) => {
                write!(f, "{}(", func.name())?;
                e.write(f, var)?;
                f.write_str(")")
            }
            Node::Call2(func, l, r) => {
                write!(f, "{}(", func.name())?;
                l.write(f, var)?;
                f.write_str(", ")?;
                r.write(f, var)?;
                f.write_str(")")
            }
        }
    }
}

fn write_operand(f: &mut fmt::Formatter<'_>, n: &Node, parens: bool, var: &str) -> fmt::Result {
    if parens {
        f.write_str("(")?;
        n.write(f, var)?;
        f.write_str(")")
    } else {
        n.write(f, var)
    }
}

fn pow(x: f64, y: f64) -> f64 {
    if y.fract() == 0.0 && y.abs() <= i32::MAX as f64 {
        x.powi(y as i32)
    } else {
        x.powf(y)
    }
}

/// A parsed expression in one free variable (`a` for rates, `x` for density dependence).
#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    source: String,
    var: String,
    root: Node,
}

impl Expr {
    pub(crate) fn from_parts(source: &str, var: &str, root: Node) -> Self {
        Expr {
            source: source.to_string(),
            var: var.to_string(),
            root,
        }
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn var(&self) -> &str {
        &self.var
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    pub fn eval(&self, v: f64) -> f64 {
        self.root.eval(v)
    }

    pub fn try_eval(&self, v: f64) -> Result<f64> {
        let y = self.eval(v);
        if y.is_finite() {
            Ok(y)
        } else {
            Err(Error::NonFinite {
                value: y,
                location: format!("`{}` at {} = {}", self.source, self.var, v),
            })
        }
    }

    pub fn is_constant(&self) -> bool {
        self.root.is_constant()
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.root.write(f, &self.var)
    }
}
