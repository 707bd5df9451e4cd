//! Recursive-descent parser for rate expressions.
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := ('-' | '+') unary | power
//! power  := atom ('^' unary)?
//! atom   := number | 'pi' | VAR | func '(' expr (',' expr)? ')' | '(' expr ')'
//! ```
//!
//! Piecewise definitions use `piecewise{[lo,hi): expr; ...; [lo,hi]: expr}` where the
//! bounds are constant expressions.

use super::expr::{BinOp, Expr, Func1, Func2, Node};
use super::{Piece, Piecewise};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
}

struct Lexer<'s> {
    src: &'s str,
    pos: usize,
}

impl<'s> Lexer<'s> {
    fn new(src: &'s str) -> Self {
        Lexer { src, pos: 0 }
    }

    fn skip_ws(&mut self) {
        let rest = &self.src[self.pos..];
        let trimmed = rest.trim_start();
        self.pos += rest.len() - trimmed.len();
    }

    /// Returns the next token and its byte offset without consuming it.
    fn peek(&mut self) -> Result<Option<(Tok, usize)>> {
        let save = self.pos;
        let t = self.next();
        self.pos = save;
        t
    }

    fn next(&mut self) -> Result<Option<(Tok, usize)>> {
        self.skip_ws();
        let start = self.pos;
        let bytes = self.src.as_bytes();
        let Some(&c) = bytes.get(start) else {
            return Ok(None);
        };
        if c.is_ascii_digit() || c == b'.' {
            let mut end = start;
            while end < bytes.len() && (bytes[end].is_ascii_digit() || bytes[end] == b'.') {
                end += 1;
            }
            if end < bytes.len() && (bytes[end] == b'e' || bytes[end] == b'E') {
                let mut e = end + 1;
                if e < bytes.len() && (bytes[e] == b'+' || bytes[e] == b'-') {
                    e += 1;
                }
                let digits_start = e;
                while e < bytes.len() && bytes[e].is_ascii_digit() {
                    e += 1;
                }
                if e > digits_start {
                    end = e;
                }
            }
            let text = &self.src[start..end];
            let v: f64 = text.parse().map_err(|_| Error::Syntax {
                offset: start,
                message: format!("malformed number `{}`", text),
            })?;
            self.pos = end;
            return Ok(Some((Tok::Num(v), start)));
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            let mut end = start;
            while end < bytes.len() && (bytes[end].is_ascii_alphanumeric() || bytes[end] == b'_') {
                end += 1;
            }
            self.pos = end;
            return Ok(Some((Tok::Ident(self.src[start..end].to_string()), start)));
        }
        if b"+-*/^(),;:[]{}".contains(&c) {
            self.pos += 1;
            return Ok(Some((Tok::Op(c as char), start)));
        }
        let ch = self.src[start..].chars().next().unwrap_or('?');
        Err(Error::Syntax {
            offset: start,
            message: format!("unexpected character `{}`", ch),
        })
    }
}

struct Parser<'s> {
    lex: Lexer<'s>,
    var: &'s str,
}

impl<'s> Parser<'s> {
    fn expect_op(&mut self, op: char) -> Result<usize> {
        match self.lex.next()? {
            Some((Tok::Op(c), at)) if c == op => Ok(at),
            Some((t, at)) => Err(Error::Syntax {
                offset: at,
                message: format!("expected `{}`, found {}", op, describe(&t)),
            }),
            None => Err(Error::Syntax {
                offset: self.lex.src.len(),
                message: format!("expected `{}`, found end of input", op),
            }),
        }
    }

    fn peek_op(&mut self) -> Result<Option<char>> {
        Ok(match self.lex.peek()? {
            Some((Tok::Op(c), _)) => Some(c),
            _ => None,
        })
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        while let Some(c @ ('+' | '-')) = self.peek_op()? {
            self.lex.next()?;
            let rhs = self.term()?;
            let op = if c == '+' { BinOp::Add } else { BinOp::Sub };
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        while let Some(c @ ('*' | '/')) = self.peek_op()? {
            self.lex.next()?;
            let rhs = self.unary()?;
            let op = if c == '*' { BinOp::Mul } else { BinOp::Div };
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Node> {
        match self.peek_op()? {
            Some('-') => {
                self.lex.next()?;
                Ok(Node::Neg(Box::new(self.unary()?)))
            }
            Some('+') => {
                self.lex.next()?;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Node> {
        let base = self.atom()?;
        if self.peek_op()? == Some('^') {
            self.lex.next()?;
            let exp = self.unary()?;
            return Ok(Node::Bin(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node> {
        let end = self.lex.src.len();
        match self.lex.next()? {
            None => Err(Error::Syntax {
                offset: end,
                message: "unexpected end of input".into(),
            }),
            Some((Tok::Num(v), _)) => Ok(Node::Num(v)),
            Some((Tok::Op('('), _)) => {
                let e = self.expr()?;
                self.expect_op(')')?;
                Ok(e)
            }
            Some((Tok::Ident(name), at)) => {
                if self.peek_op()? == Some('(') {
                    return self.call(&name, at);
                }
                if name == "pi" {
                    Ok(Node::Pi)
                } else if name == self.var {
                    Ok(Node::Var)
                } else {
                    Err(Error::UnknownIdentifier { name, offset: at })
                }
            }
            Some((t, at)) => Err(Error::Syntax {
                offset: at,
                message: format!("unexpected {}", describe(&t)),
            }),
        }
    }

    fn call(&mut self, name: &str, at: usize) -> Result<Node> {
        self.expect_op('(')?;
        let first = self.expr()?;
        let mut args = vec![first];
        while self.peek_op()? == Some(',') {
            self.lex.next()?;
            args.push(self.expr()?);
        }
        self.expect_op(')')?;
        if let Some(f) = Func1::from_name(name) {
            if args.len() != 1 {
                return Err(Error::Syntax {
                    offset: at,
                    message: format!("`{}` takes 1 argument, got {}", name, args.len()),
                });
            }
            return Ok(Node::Call1(f, Box::new(args.remove(0))));
        }
        if let Some(f) = Func2::from_name(name) {
            if args.len() != 2 {
                return Err(Error::Syntax {
                    offset: at,
                    message: format!("`{}` takes 2 arguments, got {}", name, args.len()),
                });
            }
            let r = args.pop().unwrap();
            let l = args.pop().unwrap();
            return Ok(Node::Call2(f, Box::new(l), Box::new(r)));
        }
        Err(Error::UnknownIdentifier {
            name: name.to_string(),
            offset: at,
        })
    }

    fn finish(&mut self) -> Result<()> {
        match self.lex.next()? {
            None => Ok(()),
            Some((t, at)) => Err(Error::Syntax {
                offset: at,
                message: format!("unexpected trailing {}", describe(&t)),
            }),
        }
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Num(v) => format!("number {}", v),
        Tok::Ident(s) => format!("identifier `{}`", s),
        Tok::Op(c) => format!("`{}`", c),
    }
}

/// Parses a plain expression in the free variable `var`.
pub fn parse_expr(source: &str, var: &str) -> Result<Expr> {
    if source.trim().is_empty() {
        return Err(Error::Syntax {
            offset: 0,
            message: "empty expression".into(),
        });
    }
    let mut p = Parser {
        lex: Lexer::new(source),
        var,
    };
    let root = p.expr()?;
    p.finish()?;
    Ok(Expr::from_parts(source, var, root))
}

/// Parses a constant expression such as `pi/6` to a number.
pub fn parse_constant(source: &str) -> Result<f64> {
    // no free variable: any identifier other than `pi` is rejected
    let e = parse_expr(source, "\u{0}")?;
    let v = e.eval(0.0);
    if !v.is_finite() {
        return Err(Error::NonFinite {
            value: v,
            location: format!("constant `{}`", source),
        });
    }
    Ok(v)
}

pub(super) fn parse_piecewise(source: &str, var: &str) -> Result<Piecewise> {
    let trimmed_start = source.len() - source.trim_start().len();
    let body_start = trimmed_start + "piecewise".len();
    let mut lex = Lexer::new(source);
    lex.pos = body_start;
    let mut p = Parser { lex, var };
    p.expect_op('{')?;
    let mut pieces = Vec::new();
    loop {
        if p.peek_op()? == Some('}') {
            p.lex.next()?;
            break;
        }
        let open_at = p.expect_op('[')?;
        let lo = constant_node(p.expr()?, open_at)?;
        p.expect_op(',')?;
        let hi = constant_node(p.expr()?, open_at)?;
        let closed = match p.lex.next()? {
            Some((Tok::Op(')'), _)) => false,
            Some((Tok::Op(']'), _)) => true,
            Some((t, at)) => {
                return Err(Error::Syntax {
                    offset: at,
                    message: format!("expected `)` or `]`, found {}", describe(&t)),
                })
            }
            None => {
                return Err(Error::Syntax {
                    offset: source.len(),
                    message: "unterminated interval".into(),
                })
            }
        };
        p.expect_op(':')?;
        let expr_start = p.lex.pos;
        let node = p.expr()?;
        let expr_end = p.lex.pos;
        let text = source[expr_start..expr_end].trim();
        if hi < lo {
            return Err(Error::Syntax {
                offset: open_at,
                message: format!("interval [{}, {}] is reversed", lo, hi),
            });
        }
        pieces.push(Piece {
            lo,
            hi,
            closed_right: closed,
            expr: Expr::from_parts(text, var, node),
        });
        match p.lex.next()? {
            Some((Tok::Op(';'), _)) => continue,
            Some((Tok::Op('}'), _)) => break,
            Some((t, at)) => {
                return Err(Error::Syntax {
                    offset: at,
                    message: format!("expected `;` or `}}`, found {}", describe(&t)),
                })
            }
            None => {
                return Err(Error::Syntax {
                    offset: source.len(),
                    message: "unterminated piecewise definition".into(),
                })
            }
        }
    }
    p.finish()?;
    if pieces.is_empty() {
        return Err(Error::Syntax {
            offset: body_start,
            message: "piecewise definition has no pieces".into(),
        });
    }
    Ok(Piecewise::new(source, pieces))
}

fn constant_node(n: Node, at: usize) -> Result<f64> {
    if !n.is_constant() {
        return Err(Error::Syntax {
            offset: at,
            message: "interval bounds must be constant".into(),
        });
    }
    Ok(n.eval(0.0))
}
