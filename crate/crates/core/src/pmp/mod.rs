//! Hamiltonians, the maximum-principle conditions on a space-time process,
//! and the multiplier feasibility search.

mod certify;
mod check;

use serde::{Deserialize, Serialize};

use crate::dynamics::{integrate_adjoint, AdjointPath};
use crate::error::{Error, Result};
use crate::model::{ControlAffineSystem, DEFAULT_TARGET_TOL};
use crate::symbolic::{enumerate_brackets, lie_bracket, BracketTree, VectorField};
use crate::trajectory::{norm, SpaceTimeProcess};

pub use certify::{certify, control_samples};
pub use check::check_conditions;

/// Below this, `|a|` and `p0 + p·f` count as zero for the degeneracy flag.
pub const DEGENERACY_TOL: f64 = 1e-12;

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::Dimension { expected, got });
    }
    Ok(())
}

/// `H = p0 w0 + p·(f(x) w0 + Σ g_i(x) w^i)`.
pub fn hamiltonian(
    sys: &ControlAffineSystem,
    x: &[f64],
    p0: f64,
    p: &[f64],
    w0: f64,
    w: &[f64],
) -> Result<f64> {
    check_len(sys.n(), p.len())?;
    let v = sys.velocity(x, w0, w)?;
    Ok(p0 * w0 + v.iter().zip(p).map(|(a, b)| a * b).sum::<f64>())
}

/// `𝐇` together with a maximizing control.
#[derive(Clone, Debug, PartialEq)]
pub struct MaxHamiltonian {
    pub value: f64,
    pub w0: f64,
    pub w: Vec<f64>,
    /// Both `|a|` and `p0 + p·f` vanish, so every control in 𝒲 is a maximizer.
    pub degenerate: bool,
}

/// Closed form `max(p0 + p·f(x), |a|)` with `a_i = p·g_i(x)`; ties go to
/// `(1, 0)`.
pub fn max_hamiltonian(sys: &ControlAffineSystem, x: &[f64], p0: f64, p: &[f64]) -> Result<MaxHamiltonian> {
    check_len(sys.n(), p.len())?;
    let drift = p0 + sys.drift().dot(x, p)?;
    let a = sys
        .controls()
        .iter()
        .map(|g| g.dot(x, p))
        .collect::<Result<Vec<_>>>()?;
    let na = norm(&a);
    let degenerate = na <= DEGENERACY_TOL && drift.abs() <= DEGENERACY_TOL;
    Ok(if drift >= na {
        MaxHamiltonian {
            value: drift,
            w0: 1.0,
            w: vec![0.0; sys.m()],
            degenerate,
        }
    } else {
        MaxHamiltonian {
            value: na,
            w0: 0.0,
            w: a.iter().map(|c| c / na).collect(),
            degenerate,
        }
    })
}

/// `𝐇_F(x, p) = p·F(x)`.
pub fn field_hamiltonian(field: &VectorField, x: &[f64], p: &[f64]) -> Result<f64> {
    field.dot(x, p)
}

/// `(p0, p, λ)` with `p` sampled on the process grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Multiplier {
    pub p0: f64,
    pub lambda: f64,
    pub adjoint: AdjointPath,
}

impl Multiplier {
    pub fn new(p0: f64, lambda: f64, adjoint: AdjointPath) -> Result<Self> {
        if !(lambda >= 0.0) {
            return Err(Error::Domain(format!("lambda must be >= 0, got {lambda}")));
        }
        Ok(Multiplier { p0, lambda, adjoint })
    }

    /// Integrates the adjoint equation back from `p(S) = p_final`.
    pub fn from_terminal(
        sys: &ControlAffineSystem,
        proc: &SpaceTimeProcess,
        p0: f64,
        lambda: f64,
        p_final: &[f64],
    ) -> Result<Self> {
        Multiplier::new(p0, lambda, integrate_adjoint(sys, proc, p_final)?)
    }

    pub fn scaled(&self, c: f64) -> Multiplier {
        Multiplier {
            p0: c * self.p0,
            lambda: c * self.lambda,
            adjoint: self.adjoint.scaled(c),
        }
    }

    /// `max(|p0|, sup_s |p(s)|_∞, λ)`.
    pub fn magnitude(&self) -> f64 {
        self.adjoint_sup().max(self.p0.abs()).max(self.lambda)
    }

    pub(crate) fn adjoint_sup(&self) -> f64 {
        self.adjoint
            .covectors
            .iter()
            .flatten()
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[allow(clippy::upper_case_acronyms)]
pub enum ConditionId {
    /// `(p0, p, λ) ≠ 0`.
    NT,
    /// Terminal covector in `−λDΨ − N`.
    TRANS,
    /// Adjoint equation.
    ADJ,
    /// `H(w̄) = 𝐇`.
    MAX,
    /// `𝐇 = 0`.
    H0,
    /// `p·g_i = 0`.
    HG,
    /// `p·B = 0` for brackets of degree ≥ 2.
    HB,
    /// `p·[f,B] w0 = 0`.
    FB,
    /// `(p, λ) ≠ 0` when the final clock is positive.
    #[serde(rename = "NT_STRONG")]
    NtStrong,
}

impl std::fmt::Display for ConditionId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ConditionId::NT => "NT",
            ConditionId::TRANS => "TRANS",
            ConditionId::ADJ => "ADJ",
            ConditionId::MAX => "MAX",
            ConditionId::H0 => "H0",
            ConditionId::HG => "HG",
            ConditionId::HB => "HB",
            ConditionId::FB => "FB",
            ConditionId::NtStrong => "NT_STRONG",
        };
        f.write_str(s)
    }
}

/// Outcome of one condition. Residuals other than NT/NT_STRONG are relative
/// to the multiplier magnitude; NT/NT_STRONG report the magnitude itself and
/// pass when it exceeds the tolerance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionResult {
    pub id: ConditionId,
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
    /// Pseudo-time of the worst node, when the condition is pointwise.
    pub worst_s: Option<f64>,
    /// Which field or bracket attains the worst residual.
    pub detail: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Pointwise equalities and non-triviality.
    pub eq: f64,
    /// Target membership and activity.
    pub target: f64,
    pub transversality: f64,
    pub adjoint: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            eq: 1e-7,
            target: DEFAULT_TARGET_TOL,
            transversality: 1e-7,
            adjoint: 1e-5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Feasible,
    Infeasible,
    Checked { pass: bool },
}

/// Terminal data of a multiplier found by [`certify`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub p0: f64,
    pub p_final: Vec<f64>,
    pub lambda: f64,
    /// Aligned with `active_phi`.
    pub mu: Vec<f64>,
    /// One per equality constraint.
    pub nu: Vec<f64>,
    /// 0-based indices of the active inequality constraints.
    pub active_phi: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridMetadata {
    pub cells: usize,
    pub substeps: usize,
    pub nodes: usize,
    pub bracket_depth: usize,
    pub control_samples: Option<usize>,
    /// Cells whose control has `w0 + |w| ≠ 1`.
    pub rescaled_cells: Vec<usize>,
    /// Distinct LP rows after rounding (certify only).
    pub lp_rows: Option<usize>,
    pub note: String,
}

pub(crate) const GRID_NOTE: &str =
    "almost-everywhere conditions are enforced at every grid node of each cell's closure";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificationReport {
    pub verdict: Verdict,
    pub conditions: Vec<ConditionResult>,
    pub witness: Option<Witness>,
    /// First bracket whose rows turn the first-order system infeasible.
    pub killing_bracket: Option<String>,
    /// Dimension of the lineality space of the feasible cone, in multiplier space.
    pub lineality_dimension: Option<usize>,
    /// Nonzero brackets taken into account.
    pub brackets: Vec<String>,
    pub metadata: GridMetadata,
}

impl CertificationReport {
    pub fn all_pass(&self) -> bool {
        self.conditions.iter().all(|c| c.pass)
    }

    pub fn condition(&self, id: ConditionId) -> Option<&ConditionResult> {
        self.conditions.iter().find(|c| c.id == id)
    }
}

/// A nonzero bracket realized on the controlled fields, with `[f, B]`.
pub(crate) struct RealizedBracket {
    pub tree: BracketTree,
    pub field: VectorField,
    pub with_drift: VectorField,
}

pub(crate) fn realize_brackets(sys: &ControlAffineSystem, trees: &[BracketTree]) -> Result<Vec<RealizedBracket>> {
    let mut out = Vec::new();
    for tree in trees {
        let field = tree.realize(sys.controls())?;
        if field.is_zero() {
            continue;
        }
        let with_drift = lie_bracket(sys.drift(), &field)?;
        out.push(RealizedBracket {
            tree: tree.clone(),
            field,
            with_drift,
        });
    }
    Ok(out)
}

/// `(B, sup_s |p(s)·B(y(s))|)` for every nonzero bracket up to `max_depth`,
/// by decreasing residual (enumeration order on ties).
pub fn bracket_spectrum(
    sys: &ControlAffineSystem,
    proc: &SpaceTimeProcess,
    p: &AdjointPath,
    max_depth: usize,
) -> Result<Vec<(BracketTree, f64)>> {
    check_len(proc.nodes().len(), p.covectors.len())?;
    let mut rows = Vec::new();
    for b in realize_brackets(sys, &enumerate_brackets(sys.m(), max_depth))? {
        let mut sup = 0.0_f64;
        for (y, pk) in proc.states().iter().zip(&p.covectors) {
            sup = sup.max(b.field.dot(y, pk)?.abs());
        }
        rows.push((b.tree, sup));
    }
    rows.sort_by(|a, b| b.1.total_cmp(&a.1));
    Ok(rows)
}
