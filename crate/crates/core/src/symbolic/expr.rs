use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// A variable an expression may refer to. State indices are 0-based
/// internally and printed 1-based (`x1` is `State(0)`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Var {
    Time,
    State(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Sqrt,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Sqrt => "sqrt",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        match name {
            "sin" => Some(Func::Sin),
            "cos" => Some(Func::Cos),
            "exp" => Some(Func::Exp),
            "sqrt" => Some(Func::Sqrt),
            _ => None,
        }
    }
}

/// Scalar symbolic expression over the time variable and the state.
///
/// Constants are exact rationals. The smart constructors (`add`, `mul`, ...)
/// apply local rewrites, so anything assembled through them is already in
/// the form [`Expr::simplify`] would produce.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Expr {
    Const(BigRational),
    Var(Var),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, u32),
    Call(Func, Box<Expr>),
}

impl Expr {
    pub fn zero() -> Expr {
        Expr::Const(BigRational::zero())
    }

    pub fn one() -> Expr {
        Expr::Const(BigRational::one())
    }

    pub fn int(v: i64) -> Expr {
        Expr::Const(BigRational::from_integer(BigInt::from(v)))
    }

    pub fn ratio(num: i64, den: i64) -> Expr {
        Expr::Const(BigRational::new(BigInt::from(num), BigInt::from(den)))
    }

    pub fn time() -> Expr {
        Expr::Var(Var::Time)
    }

    /// State variable with 0-based index.
    pub fn state(index: usize) -> Expr {
        Expr::Var(Var::State(index))
    }

    pub fn as_const(&self) -> Option<&BigRational> {
        match self {
            Expr::Const(c) => Some(c),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Expr::Const(c) if c.is_zero())
    }

    pub fn is_one(&self) -> bool {
        matches!(self, Expr::Const(c) if c.is_one())
    }

    pub fn neg(a: Expr) -> Expr {
        match a {
            Expr::Const(c) => Expr::Const(-c),
            Expr::Neg(inner) => *inner,
            Expr::Mul(l, r) if l.as_const().is_some() => match *l {
                Expr::Const(c) => Expr::mul(Expr::Const(-c), *r),
                l => Expr::Neg(Box::new(Expr::Mul(Box::new(l), r))),
            },
            other => Expr::Neg(Box::new(other)),
        }
    }

    pub fn add(a: Expr, b: Expr) -> Expr {
        match (a, b) {
            (Expr::Const(x), Expr::Const(y)) => Expr::Const(x + y),
            (a, b) if a.is_zero() => b,
            (a, b) if b.is_zero() => a,
            (a, Expr::Neg(b)) => Expr::sub(a, *b),
            (Expr::Neg(a), b) => Expr::sub(b, *a),
            (a, b) => Expr::Add(Box::new(a), Box::new(b)),
        }
    }

    pub fn sub(a: Expr, b: Expr) -> Expr {
        match (a, b) {
            (Expr::Const(x), Expr::Const(y)) => Expr::Const(x - y),
            (a, b) if b.is_zero() => a,
            (a, b) if a.is_zero() => Expr::neg(b),
            (a, b) if a == b => Expr::zero(),
            (a, Expr::Neg(b)) => Expr::add(a, *b),
            (a, b) => Expr::Sub(Box::new(a), Box::new(b)),
        }
    }

    pub fn mul(a: Expr, b: Expr) -> Expr {
        match (a, b) {
            (Expr::Const(x), Expr::Const(y)) => Expr::Const(x * y),
            (a, _) if a.is_zero() => Expr::zero(),
            (_, b) if b.is_zero() => Expr::zero(),
            (a, b) if a.is_one() => b,
            (a, b) if b.is_one() => a,
            // constants go to the left
            (a, Expr::Const(c)) => Expr::mul(Expr::Const(c), a),
            (Expr::Const(c), b) if c == -BigRational::one() => Expr::neg(b),
            (Expr::Const(c), Expr::Mul(l, r)) if l.as_const().is_some() => {
                let k = l.as_const().cloned().unwrap_or_else(BigRational::one);
                Expr::mul(Expr::Const(c * k), *r)
            }
            (Expr::Const(c), Expr::Neg(b)) => Expr::mul(Expr::Const(-c), *b),
            (Expr::Neg(a), b) => Expr::neg(Expr::mul(*a, b)),
            (a, Expr::Neg(b)) => Expr::neg(Expr::mul(a, *b)),
            (a, b) => Expr::Mul(Box::new(a), Box::new(b)),
        }
    }

    pub fn div(a: Expr, b: Expr) -> Expr {
        match (a, b) {
            (Expr::Const(x), Expr::Const(y)) if !y.is_zero() => Expr::Const(x / y),
            (a, b) if a.is_zero() && !b.is_zero() => Expr::zero(),
            (a, b) if b.is_one() => a,
            (a, Expr::Const(c)) if !c.is_zero() => Expr::mul(Expr::Const(c.recip()), a),
            (Expr::Neg(a), b) => Expr::neg(Expr::div(*a, b)),
            (a, b) => Expr::Div(Box::new(a), Box::new(b)),
        }
    }

    pub fn pow(a: Expr, k: u32) -> Expr {
        match (a, k) {
            (_, 0) => Expr::one(),
            (a, 1) => a,
            (Expr::Const(c), k) => Expr::Const(num_traits::pow(c, k as usize)),
            (Expr::Pow(base, j), k) => match j.checked_mul(k) {
                Some(jk) => Expr::Pow(base, jk),
                None => Expr::Pow(Box::new(Expr::Pow(base, j)), k),
            },
            (a, k) => Expr::Pow(Box::new(a), k),
        }
    }

    pub fn call(f: Func, a: Expr) -> Expr {
        if a.is_zero() {
            match f {
                Func::Sin | Func::Sqrt => return Expr::zero(),
                Func::Cos | Func::Exp => return Expr::one(),
            }
        }
        if f == Func::Sqrt && a.is_one() {
            return Expr::one();
        }
        Expr::Call(f, Box::new(a))
    }

    /// Rebuilds the tree through the smart constructors: constant folding
    /// plus the 0/1 identities. No ring normalization is attempted.
    pub fn simplify(&self) -> Expr {
        match self {
            Expr::Const(_) | Expr::Var(_) => self.clone(),
            Expr::Neg(a) => Expr::neg(a.simplify()),
            Expr::Add(a, b) => Expr::add(a.simplify(), b.simplify()),
            Expr::Sub(a, b) => Expr::sub(a.simplify(), b.simplify()),
            Expr::Mul(a, b) => Expr::mul(a.simplify(), b.simplify()),
            Expr::Div(a, b) => Expr::div(a.simplify(), b.simplify()),
            Expr::Pow(a, k) => Expr::pow(a.simplify(), *k),
            Expr::Call(f, a) => Expr::call(*f, a.simplify()),
        }
    }

    /// Exact partial derivative with respect to `var`.
    pub fn diff(&self, var: Var) -> Expr {
        match self {
            Expr::Const(_) => Expr::zero(),
            Expr::Var(v) => {
                if *v == var {
                    Expr::one()
                } else {
                    Expr::zero()
                }
            }
            Expr::Neg(a) => Expr::neg(a.diff(var)),
            Expr::Add(a, b) => Expr::add(a.diff(var), b.diff(var)),
            Expr::Sub(a, b) => Expr::sub(a.diff(var), b.diff(var)),
            Expr::Mul(a, b) => Expr::add(
                Expr::mul(a.diff(var), b.simplify()),
                Expr::mul(a.simplify(), b.diff(var)),
            ),
            Expr::Div(a, b) => {
                // (a'b - ab') / b^2
                let num = Expr::sub(
                    Expr::mul(a.diff(var), b.simplify()),
                    Expr::mul(a.simplify(), b.diff(var)),
                );
                Expr::div(num, Expr::pow(b.simplify(), 2))
            }
            Expr::Pow(a, k) => {
                let da = a.diff(var);
                if da.is_zero() {
                    return Expr::zero();
                }
                let outer = Expr::mul(Expr::int(*k as i64), Expr::pow(a.simplify(), k - 1));
                Expr::mul(outer, da)
            }
            Expr::Call(f, a) => {
                let da = a.diff(var);
                if da.is_zero() {
                    return Expr::zero();
                }
                let a = a.simplify();
                let outer = match f {
                    Func::Sin => Expr::call(Func::Cos, a),
                    Func::Cos => Expr::neg(Expr::call(Func::Sin, a)),
                    Func::Exp => Expr::call(Func::Exp, a),
                    Func::Sqrt => Expr::div(Expr::one(), Expr::mul(Expr::int(2), Expr::call(Func::Sqrt, a))),
                };
                Expr::mul(outer, da)
            }
        }
    }

    /// Evaluates at time `t` and state `x`.
    pub fn eval(&self, t: f64, x: &[f64]) -> Result<f64> {
        Ok(match self {
            Expr::Const(c) => rational_to_f64(c),
            Expr::Var(Var::Time) => t,
            Expr::Var(Var::State(i)) => *x.get(*i).ok_or(Error::Dimension {
                expected: i + 1,
                got: x.len(),
            })?,
            Expr::Neg(a) => -a.eval(t, x)?,
            Expr::Add(a, b) => a.eval(t, x)? + b.eval(t, x)?,
            Expr::Sub(a, b) => a.eval(t, x)? - b.eval(t, x)?,
            Expr::Mul(a, b) => a.eval(t, x)? * b.eval(t, x)?,
            Expr::Div(a, b) => {
                let den = b.eval(t, x)?;
                if den == 0.0 {
                    return Err(Error::Domain(format!("division by zero in {self}")));
                }
                a.eval(t, x)? / den
            }
            Expr::Pow(a, k) => powi(a.eval(t, x)?, *k),
            Expr::Call(f, a) => {
                let v = a.eval(t, x)?;
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

    /// Largest state index referenced (0-based), if any.
    pub fn max_state_index(&self) -> Option<usize> {
        let mut best: Option<usize> = None;
        self.visit_vars(&mut |v| {
            if let Var::State(i) = v {
                best = Some(best.map_or(i, |b| b.max(i)));
            }
        });
        best
    }

    pub fn uses_time(&self) -> bool {
        let mut hit = false;
        self.visit_vars(&mut |v| hit |= v == Var::Time);
        hit
    }

    fn visit_vars(&self, f: &mut impl FnMut(Var)) {
        match self {
            Expr::Const(_) => {}
            Expr::Var(v) => f(*v),
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Call(_, a) => a.visit_vars(f),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.visit_vars(f);
                b.visit_vars(f);
            }
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Add(..) | Expr::Sub(..) => 1,
            Expr::Mul(..) | Expr::Div(..) => 2,
            Expr::Neg(_) => 3,
            Expr::Const(c) if c.is_negative() => 3,
            Expr::Const(c) if !c.is_integer() => 2,
            Expr::Pow(..) => 4,
            Expr::Const(_) | Expr::Var(_) | Expr::Call(..) => 5,
        }
    }
}

fn powi(base: f64, k: u32) -> f64 {
    match i32::try_from(k) {
        Ok(k) => base.powi(k),
        Err(_) => base.powf(k as f64),
    }
}

pub(crate) fn rational_to_f64(c: &BigRational) -> f64 {
    c.to_f64().unwrap_or_else(|| {
        let n = c.numer().to_f64().unwrap_or(f64::NAN);
        let d = c.denom().to_f64().unwrap_or(f64::NAN);
        n / d
    })
}

fn write_child(f: &mut fmt::Formatter<'_>, e: &Expr, min_prec: u8) -> fmt::Result {
    if e.precedence() < min_prec {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Var::Time => write!(f, "t"),
            Var::State(i) => write!(f, "x{}", i + 1),
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => {
                if c.is_integer() {
                    write!(f, "{}", c.numer())
                } else {
                    write!(f, "{}/{}", c.numer(), c.denom())
                }
            }
            Expr::Var(v) => write!(f, "{v}"),
            Expr::Neg(a) => {
                write!(f, "-")?;
                write_child(f, a, 3)
            }
            Expr::Add(a, b) => {
                write_child(f, a, 1)?;
                write!(f, " + ")?;
                write_child(f, b, 1)
            }
            Expr::Sub(a, b) => {
                write_child(f, a, 1)?;
                write!(f, " - ")?;
                write_child(f, b, 2)
            }
            Expr::Mul(a, b) => {
                write_child(f, a, 2)?;
                write!(f, "*")?;
                write_child(f, b, 3)
            }
            Expr::Div(a, b) => {
                write_child(f, a, 2)?;
                write!(f, "/")?;
                write_child(f, b, 4)
            }
            Expr::Pow(a, k) => {
                write_child(f, a, 5)?;
                write!(f, "^{k}")
            }
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}
