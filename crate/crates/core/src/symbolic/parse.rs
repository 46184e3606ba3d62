//! Infix expression grammar:
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := ('-' | '+') unary | power
//! power  := atom ('^' unary)?
//! atom   := number | 't' | 'x' digits | func '(' expr ')' | '(' expr ')'
//! func   := sin | cos | exp | sqrt
//! ```
//!
//! `^` is right-associative and binds tighter than unary minus, so `-x1^2`
//! is `-(x1^2)`.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive};

use super::expr::{rational_to_f64, Expr, Func, Var};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
enum Ast {
    Num(BigRational),
    Var(Var, usize),
    Neg(Box<Ast>),
    Bin(char, Box<Ast>, Box<Ast>, usize),
    Call(Func, Box<Ast>),
}

/// Parses an expression over `t` and `x1..x{dim}`.
pub fn parse_expr(src: &str, dim: usize) -> Result<Expr> {
    let ast = Parser::new(src).parse_all()?;
    to_expr(&ast, dim)
}

/// Parses and evaluates a constant expression such as `sqrt(2)/2` or
/// `2^(1/3)`. Real exponents are allowed here.
pub fn eval_const(src: &str) -> Result<f64> {
    let ast = Parser::new(src).parse_all()?;
    let v = eval_ast(&ast)?;
    if !v.is_finite() {
        return Err(Error::Domain(format!("`{src}` is not finite")));
    }
    Ok(v)
}

fn eval_ast(ast: &Ast) -> Result<f64> {
    Ok(match ast {
        Ast::Num(c) => rational_to_f64(c),
        Ast::Var(v, col) => {
            return Err(Error::Parse {
                line: 1,
                column: *col,
                message: format!("variable `{v}` not allowed in a constant"),
            })
        }
        Ast::Neg(a) => -eval_ast(a)?,
        Ast::Bin(op, a, b, _) => {
            let (a, b) = (eval_ast(a)?, eval_ast(b)?);
            match op {
                '+' => a + b,
                '-' => a - b,
                '*' => a * b,
                '/' => {
                    if b == 0.0 {
                        return Err(Error::Domain("division by zero".into()));
                    }
                    a / b
                }
                _ => a.powf(b),
            }
        }
        Ast::Call(f, a) => {
            let v = eval_ast(a)?;
            match f {
                Func::Sin => v.sin(),
                Func::Cos => v.cos(),
                Func::Exp => v.exp(),
                Func::Sqrt => {
                    if v < 0.0 {
                        return Err(Error::Domain(format!("sqrt of negative value {v}")));
                    }
                    v.sqrt()
                }
            }
        }
    })
}

fn to_expr(ast: &Ast, dim: usize) -> Result<Expr> {
    Ok(match ast {
        Ast::Num(c) => Expr::Const(c.clone()),
        Ast::Var(v, col) => {
            if let Var::State(i) = v {
                if *i >= dim {
                    return Err(Error::Parse {
                        line: 1,
                        column: *col,
                        message: format!("`{v}` exceeds the state dimension {dim}"),
                    });
                }
            }
            Expr::Var(*v)
        }
        Ast::Neg(a) => Expr::neg(to_expr(a, dim)?),
        Ast::Bin('^', base, exp, col) => {
            let k = exponent(exp).ok_or_else(|| Error::Parse {
                line: 1,
                column: *col,
                message: "exponent must be a non-negative integer constant".into(),
            })?;
            Expr::pow(to_expr(base, dim)?, k)
        }
        Ast::Bin(op, a, b, _) => {
            let (a, b) = (to_expr(a, dim)?, to_expr(b, dim)?);
            match op {
                '+' => Expr::add(a, b),
                '-' => Expr::sub(a, b),
                '*' => Expr::mul(a, b),
                _ => Expr::div(a, b),
            }
        }
        Ast::Call(f, a) => Expr::call(*f, to_expr(a, dim)?),
    })
}

fn exponent(ast: &Ast) -> Option<u32> {
    let e = to_expr(ast, 0).ok()?;
    let c = e.as_const()?;
    if c.is_integer() && !c.is_negative() {
        c.to_integer().to_u32()
    } else {
        None
    }
}

struct Parser<'a> {
    src: &'a str,
    chars: Vec<(usize, char)>,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Self {
        Parser {
            src,
            chars: src.char_indices().collect(),
            pos: 0,
        }
    }

    fn column(&self) -> usize {
        self.pos + 1
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::Parse {
            line: 1,
            column: self.column(),
            message: message.into(),
        })
    }

    fn skip_ws(&mut self) {
        while self.pos < self.chars.len() && self.chars[self.pos].1.is_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.chars.get(self.pos).map(|&(_, c)| c)
    }

    fn parse_all(mut self) -> Result<Ast> {
        if self.peek().is_none() {
            return self.err("empty expression");
        }
        let ast = self.expr()?;
        match self.peek() {
            None => Ok(ast),
            Some(c) => self.err(format!("unexpected `{c}`")),
        }
    }

    fn expr(&mut self) -> Result<Ast> {
        let mut lhs = self.term()?;
        while let Some(op @ ('+' | '-')) = self.peek() {
            let col = self.column();
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Ast::Bin(op, Box::new(lhs), Box::new(rhs), col);
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Ast> {
        let mut lhs = self.unary()?;
        while let Some(op @ ('*' | '/')) = self.peek() {
            let col = self.column();
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Ast::Bin(op, Box::new(lhs), Box::new(rhs), col);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Ast> {
        match self.peek() {
            Some('-') => {
                self.pos += 1;
                Ok(Ast::Neg(Box::new(self.unary()?)))
            }
            Some('+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Ast> {
        let base = self.atom()?;
        if self.peek() == Some('^') {
            let col = self.column();
            self.pos += 1;
            let exp = self.unary()?;
            return Ok(Ast::Bin('^', Box::new(base), Box::new(exp), col));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Ast> {
        match self.peek() {
            None => self.err("unexpected end of expression"),
            Some('(') => {
                self.pos += 1;
                let inner = self.expr()?;
                if self.peek() != Some(')') {
                    return self.err("expected `)`");
                }
                self.pos += 1;
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() || c == '.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => self.identifier(),
            Some(c) => self.err(format!("unexpected `{c}`")),
        }
    }

    fn take_while(&mut self, pred: impl Fn(char) -> bool) -> &'a str {
        let start = self.chars.get(self.pos).map_or(self.src.len(), |&(i, _)| i);
        while self.pos < self.chars.len() && pred(self.chars[self.pos].1) {
            self.pos += 1;
        }
        let end = self.chars.get(self.pos).map_or(self.src.len(), |&(i, _)| i);
        &self.src[start..end]
    }

    fn number(&mut self) -> Result<Ast> {
        let col = self.column();
        let mantissa = self.take_while(|c| c.is_ascii_digit() || c == '.');
        let mut exp10: i64 = 0;
        if let Some(&(_, 'e' | 'E')) = self.chars.get(self.pos) {
            let save = self.pos;
            self.pos += 1;
            let sign = match self.chars.get(self.pos) {
                Some(&(_, '-')) => {
                    self.pos += 1;
                    -1
                }
                Some(&(_, '+')) => {
                    self.pos += 1;
                    1
                }
                _ => 1,
            };
            let digits = self.take_while(|c| c.is_ascii_digit());
            match digits.parse::<i64>() {
                Ok(d) => exp10 = sign * d,
                Err(_) => self.pos = save,
            }
        }
        decimal_to_rational(mantissa, exp10)
            .map(Ast::Num)
            .ok_or(Error::Parse {
                line: 1,
                column: col,
                message: format!("malformed number `{mantissa}`"),
            })
    }

    fn identifier(&mut self) -> Result<Ast> {
        let col = self.column();
        let name = self.take_while(|c| c.is_ascii_alphanumeric() || c == '_');
        if name == "t" {
            return Ok(Ast::Var(Var::Time, col));
        }
        if let Some(idx) = name.strip_prefix('x') {
            if let Ok(i) = idx.parse::<usize>() {
                if i == 0 {
                    return Err(Error::Parse {
                        line: 1,
                        column: col,
                        message: "state variables are numbered from x1".into(),
                    });
                }
                return Ok(Ast::Var(Var::State(i - 1), col));
            }
        }
        if let Some(f) = Func::from_name(name) {
            if self.peek() != Some('(') {
                return self.err(format!("expected `(` after `{name}`"));
            }
            self.pos += 1;
            let arg = self.expr()?;
            if self.peek() != Some(')') {
                return self.err("expected `)`");
            }
            self.pos += 1;
            return Ok(Ast::Call(f, Box::new(arg)));
        }
        Err(Error::Parse {
            line: 1,
            column: col,
            message: format!("unknown identifier `{name}`"),
        })
    }
}

fn decimal_to_rational(mantissa: &str, exp10: i64) -> Option<BigRational> {
    let (int_part, frac_part) = match mantissa.split_once('.') {
        Some((a, b)) => (a, b),
        None => (mantissa, ""),
    };
    if (int_part.is_empty() && frac_part.is_empty()) || frac_part.contains('.') {
        return None;
    }
    let digits = format!("{int_part}{frac_part}");
    let numer: BigInt = digits.parse().ok()?;
    let scale = exp10 - frac_part.len() as i64;
    let ten = BigInt::from(10);
    let pow = num_traits::pow(ten, scale.unsigned_abs() as usize);
    Some(if scale >= 0 {
        BigRational::from_integer(numer * pow)
    } else {
        BigRational::new(numer, pow)
    })
}
