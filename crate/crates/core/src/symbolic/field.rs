use std::fmt;

use super::expr::{Expr, Var};
use crate::error::{Error, Result};

/// Autonomous vector field on R^n: `n` expressions in the state variables.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct VectorField {
    components: Vec<Expr>,
}

impl VectorField {
    pub fn new(components: Vec<Expr>) -> Result<Self> {
        let n = components.len();
        if n == 0 {
            return Err(Error::Invalid("vector field must have dimension >= 1".into()));
        }
        for (i, c) in components.iter().enumerate() {
            if c.uses_time() {
                return Err(Error::Invalid(format!(
                    "component {} depends on t; vector fields must be autonomous",
                    i + 1
                )));
            }
            if let Some(j) = c.max_state_index() {
                if j >= n {
                    return Err(Error::Dimension { expected: n, got: j + 1 });
                }
            }
        }
        Ok(VectorField { components })
    }

    pub fn zero(dim: usize) -> Self {
        VectorField {
            components: vec![Expr::zero(); dim],
        }
    }

    /// The constant field `e_i` (0-based `i`).
    pub fn unit(dim: usize, i: usize) -> Self {
        let mut components = vec![Expr::zero(); dim];
        components[i] = Expr::one();
        VectorField { components }
    }

    /// `F(x) = x`.
    pub fn identity(dim: usize) -> Self {
        VectorField {
            components: (0..dim).map(Expr::state).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[Expr] {
        &self.components
    }

    pub fn is_zero(&self) -> bool {
        self.components.iter().all(Expr::is_zero)
    }

    pub fn scale(&self, c: Expr) -> VectorField {
        VectorField {
            components: self
                .components
                .iter()
                .map(|e| Expr::mul(c.clone(), e.clone()))
                .collect(),
        }
    }

    pub fn simplify(&self) -> VectorField {
        VectorField {
            components: self.components.iter().map(Expr::simplify).collect(),
        }
    }

    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x.len())?;
        self.components.iter().map(|c| c.eval(0.0, x)).collect()
    }

    /// `p · F(x)`.
    pub fn dot(&self, x: &[f64], p: &[f64]) -> Result<f64> {
        self.check_dim(p.len())?;
        Ok(self.eval(x)?.iter().zip(p).map(|(a, b)| a * b).sum())
    }

    fn check_dim(&self, got: usize) -> Result<()> {
        if got != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                got,
            });
        }
        Ok(())
    }

    /// Entry `(i, j)` is `∂F_i/∂x_j`.
    pub fn jacobian(&self) -> Vec<Vec<Expr>> {
        let n = self.dim();
        self.components
            .iter()
            .map(|c| (0..n).map(|j| c.diff(Var::State(j))).collect())
            .collect()
    }
}

/// Numeric evaluation of a symbolic Jacobian.
pub fn eval_matrix(m: &[Vec<Expr>], x: &[f64]) -> Result<Vec<Vec<f64>>> {
    m.iter()
        .map(|row| row.iter().map(|e| e.eval(0.0, x)).collect())
        .collect()
}

/// `[F1, F2] = DF2·F1 − DF1·F2`, each component simplified.
pub fn lie_bracket(f1: &VectorField, f2: &VectorField) -> Result<VectorField> {
    if f1.dim() != f2.dim() {
        return Err(Error::Dimension {
            expected: f1.dim(),
            got: f2.dim(),
        });
    }
    let n = f1.dim();
    let (d1, d2) = (f1.jacobian(), f2.jacobian());
    let components = (0..n)
        .map(|i| {
            let mut acc = Expr::zero();
            for j in 0..n {
                acc = Expr::add(acc, Expr::mul(d2[i][j].clone(), f1.components[j].clone()));
                acc = Expr::sub(acc, Expr::mul(d1[i][j].clone(), f2.components[j].clone()));
            }
            acc.simplify()
        })
        .collect();
    Ok(VectorField { components })
}

impl fmt::Display for VectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.components.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}
