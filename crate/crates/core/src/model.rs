//! Problem data: control-affine dynamics, target set, cost.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::symbolic::{Expr, Var, VectorField};

/// Default band for activity and target membership.
pub const DEFAULT_TARGET_TOL: f64 = 1e-7;

/// `dx/dt = f(x) + Σ g_i(x) u^i`.
#[derive(Clone, Debug, PartialEq)]
pub struct ControlAffineSystem {
    drift: VectorField,
    controls: Vec<VectorField>,
}

impl ControlAffineSystem {
    pub fn new(drift: VectorField, controls: Vec<VectorField>) -> Result<Self> {
        if controls.is_empty() {
            return Err(Error::Invalid("at least one controlled field is required".into()));
        }
        for g in &controls {
            if g.dim() != drift.dim() {
                return Err(Error::Dimension {
                    expected: drift.dim(),
                    got: g.dim(),
                });
            }
        }
        Ok(ControlAffineSystem { drift, controls })
    }

    /// State dimension `n`.
    pub fn n(&self) -> usize {
        self.drift.dim()
    }

    /// Control dimension `m`.
    pub fn m(&self) -> usize {
        self.controls.len()
    }

    pub fn drift(&self) -> &VectorField {
        &self.drift
    }

    pub fn controls(&self) -> &[VectorField] {
        &self.controls
    }

    /// `a f(x) + Σ b_i g_i(x)`.
    pub fn velocity(&self, x: &[f64], a: f64, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.m() {
            return Err(Error::Dimension {
                expected: self.m(),
                got: b.len(),
            });
        }
        let mut v = if a != 0.0 {
            let mut f = self.drift.eval(x)?;
            f.iter_mut().for_each(|c| *c *= a);
            f
        } else {
            if x.len() != self.n() {
                return Err(Error::Dimension {
                    expected: self.n(),
                    got: x.len(),
                });
            }
            vec![0.0; self.n()]
        };
        for (g, &bi) in self.controls.iter().zip(b) {
            if bi != 0.0 {
                for (vi, gi) in v.iter_mut().zip(g.eval(x)?) {
                    *vi += bi * gi;
                }
            }
        }
        Ok(v)
    }
}

/// `{(t,x) : φ_i(t,x) ≤ 0, ψ_j(t,x) = 0}`.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct TargetSet {
    pub phi: Vec<Expr>,
    pub psi: Vec<Expr>,
}

/// Generators of the polar cone at a target point, as `(∂_t, ∂_x)` vectors.
#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct ConeGenerators {
    /// Gradients of the active inequality constraints (nonnegative span).
    pub nonneg: Vec<Vec<f64>>,
    /// Indices into `phi` of the active constraints, aligned with `nonneg`.
    pub active: Vec<usize>,
    /// Gradients of the equality constraints (linear span).
    pub free: Vec<Vec<f64>>,
}

/// `(∂e/∂t, ∂e/∂x_1, ..., ∂e/∂x_n)` at `(t, x)`.
pub fn gradient(e: &Expr, t: f64, x: &[f64]) -> Result<Vec<f64>> {
    let mut g = Vec::with_capacity(x.len() + 1);
    g.push(e.diff(Var::Time).eval(t, x)?);
    for j in 0..x.len() {
        g.push(e.diff(Var::State(j)).eval(t, x)?);
    }
    Ok(g)
}

impl TargetSet {
    pub fn contains(&self, t: f64, x: &[f64], tol: f64) -> Result<bool> {
        for phi in &self.phi {
            if phi.eval(t, x)? > tol {
                return Ok(false);
            }
        }
        for psi in &self.psi {
            if psi.eval(t, x)?.abs() > tol {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// 0-based indices ℓ with `|φ_ℓ(t,x)| ≤ tol`.
    pub fn active_set(&self, t: f64, x: &[f64], tol: f64) -> Result<Vec<usize>> {
        if !self.contains(t, x, tol)? {
            return Err(Error::NotOnTarget { t, x: x.to_vec() });
        }
        let mut active = Vec::new();
        for (l, phi) in self.phi.iter().enumerate() {
            if phi.eval(t, x)?.abs() <= tol {
                active.push(l);
            }
        }
        Ok(active)
    }

    pub fn polar_cone(&self, t: f64, x: &[f64], tol: f64) -> Result<ConeGenerators> {
        let active = self.active_set(t, x, tol)?;
        let nonneg = active
            .iter()
            .map(|&l| gradient(&self.phi[l], t, x))
            .collect::<Result<_>>()?;
        let free = self
            .psi
            .iter()
            .map(|psi| gradient(psi, t, x))
            .collect::<Result<_>>()?;
        Ok(ConeGenerators { nonneg, active, free })
    }
}

/// Terminal cost `Ψ(t, x)`.
#[derive(Clone, Debug, PartialEq)]
pub struct CostFunction {
    pub expr: Expr,
}

impl CostFunction {
    /// `(Ψ(t,x), DΨ(t,x))` with the gradient ordered `(∂_t, ∂_x)`.
    pub fn value_and_gradient(&self, t: f64, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        Ok((self.expr.eval(t, x)?, gradient(&self.expr, t, x)?))
    }
}

/// Everything that defines an instance: dynamics, initial state, target, cost.
#[derive(Clone, Debug, PartialEq)]
pub struct Problem {
    pub system: ControlAffineSystem,
    pub initial_state: Vec<f64>,
    pub target: TargetSet,
    pub cost: CostFunction,
}

impl Problem {
    pub fn new(
        system: ControlAffineSystem,
        initial_state: Vec<f64>,
        target: TargetSet,
        cost: CostFunction,
    ) -> Result<Self> {
        let n = system.n();
        if initial_state.len() != n {
            return Err(Error::Dimension {
                expected: n,
                got: initial_state.len(),
            });
        }
        for e in target.phi.iter().chain(&target.psi).chain(std::iter::once(&cost.expr)) {
            if let Some(j) = e.max_state_index() {
                if j >= n {
                    return Err(Error::Dimension { expected: n, got: j + 1 });
                }
            }
        }
        Ok(Problem {
            system,
            initial_state,
            target,
            cost,
        })
    }
}
