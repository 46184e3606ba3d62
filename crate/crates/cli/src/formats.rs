//! JSON documents read and written by the command-line tool.

use std::fmt;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use hopmp_core::model::{ControlAffineSystem, CostFunction, Problem, TargetSet};
use hopmp_core::pmp::{CertificationReport, Tolerances};
use hopmp_core::symbolic::{eval_const, parse_expr, Expr, VectorField};
use hopmp_core::trajectory::{ControlCell, SpaceTimeProcess, StrictCell, StrictProcess};

/// Lengths given as fractions must add up to 1 within this.
pub const FRACTION_TOL: f64 = 1e-9;

#[derive(Debug, thiserror::Error)]
pub enum InputError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },

    #[error("{path}:{line}:{column}: {message}")]
    Syntax {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },

    /// A field whose contents are invalid; `field` is a JSON-path-like label.
    #[error("{field}: {source}")]
    Field {
        field: String,
        source: hopmp_core::Error,
    },

    #[error("{0}")]
    Invalid(String),
}

fn field_err(field: impl Into<String>) -> impl FnOnce(hopmp_core::Error) -> InputError {
    let field = field.into();
    move |source| InputError::Field { field, source }
}

/// Reads and parses a JSON document.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, InputError> {
    let text = std::fs::read_to_string(path).map_err(|source| InputError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_json(&text, &path.display().to_string())
}

pub fn parse_json<T: DeserializeOwned>(text: &str, origin: &str) -> Result<T, InputError> {
    serde_json::from_str(text).map_err(|e| InputError::Syntax {
        path: origin.to_string(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("documents serialize");
    s.push('\n');
    s
}

/// A number given either as a JSON number or as a constant expression such
/// as `"sqrt(2)/2"` or `"2^(1/3)"`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Number {
    Value(f64),
    Expr(String),
}

impl Number {
    pub fn value(&self) -> hopmp_core::Result<f64> {
        match self {
            Number::Value(v) => Ok(*v),
            Number::Expr(s) => eval_const(s),
        }
    }
}

impl From<f64> for Number {
    fn from(v: f64) -> Self {
        Number::Value(v)
    }
}

impl fmt::Display for Number {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Number::Value(v) => write!(f, "{v}"),
            Number::Expr(s) => f.write_str(s),
        }
    }
}

fn values(nums: &[Number], field: &str) -> Result<Vec<f64>, InputError> {
    nums.iter()
        .enumerate()
        .map(|(i, n)| n.value().map_err(field_err(format!("{field}[{i}]"))))
        .collect()
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetFile {
    #[serde(default)]
    pub phi: Vec<String>,
    #[serde(default)]
    pub psi: Vec<String>,
}

/// Problem data: dynamics, target, cost and initial state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub n: usize,
    pub m: usize,
    pub drift: Vec<String>,
    pub g: Vec<Vec<String>>,
    #[serde(default)]
    pub target: TargetFile,
    pub cost: String,
    pub initial_state: Vec<Number>,
}

impl ProblemFile {
    fn expr(&self, src: &str, field: String) -> Result<Expr, InputError> {
        parse_expr(src, self.n).map_err(field_err(field))
    }

    fn vector_field(&self, comps: &[String], field: &str) -> Result<VectorField, InputError> {
        if comps.len() != self.n {
            return Err(InputError::Invalid(format!(
                "{field} has {} components, expected n = {}",
                comps.len(),
                self.n
            )));
        }
        let exprs = comps
            .iter()
            .enumerate()
            .map(|(i, s)| self.expr(s, format!("{field}[{i}]")))
            .collect::<Result<Vec<_>, _>>()?;
        VectorField::new(exprs).map_err(field_err(field))
    }

    pub fn to_problem(&self) -> Result<Problem, InputError> {
        if self.g.len() != self.m {
            return Err(InputError::Invalid(format!(
                "g lists {} fields, expected m = {}",
                self.g.len(),
                self.m
            )));
        }
        let drift = self.vector_field(&self.drift, "drift")?;
        let controls = self
            .g
            .iter()
            .enumerate()
            .map(|(i, g)| self.vector_field(g, &format!("g[{i}]")))
            .collect::<Result<Vec<_>, _>>()?;
        let system = ControlAffineSystem::new(drift, controls).map_err(field_err("g"))?;
        let list = |srcs: &[String], name: &str| -> Result<Vec<Expr>, InputError> {
            srcs.iter()
                .enumerate()
                .map(|(i, s)| self.expr(s, format!("target.{name}[{i}]")))
                .collect()
        };
        let target = TargetSet {
            phi: list(&self.target.phi, "phi")?,
            psi: list(&self.target.psi, "psi")?,
        };
        let cost = CostFunction {
            expr: self.expr(&self.cost, "cost".into())?,
        };
        let x0 = values(&self.initial_state, "initial_state")?;
        Problem::new(system, x0, target, cost).map_err(field_err("problem"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrictCellFile {
    pub u: Vec<Number>,
    /// Share of the horizon `T` covered by this cell.
    pub fraction: Number,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceTimeCellFile {
    pub w0: Number,
    pub w: Vec<Number>,
    /// Share of the pseudo-time horizon `S` covered by this cell.
    pub fraction: Number,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrictTrajectory {
    pub substeps: usize,
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub nu: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimeTrajectory {
    pub substeps: usize,
    pub nodes: Vec<f64>,
    pub clock: Vec<f64>,
    pub states: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrictFile {
    #[serde(rename = "T")]
    pub horizon: Number,
    pub cells: Vec<StrictCellFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectory: Option<StrictTrajectory>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimeFile {
    #[serde(rename = "S")]
    pub horizon: Number,
    pub cells: Vec<SpaceTimeCellFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectory: Option<SpaceTimeTrajectory>,
}

/// A piecewise-constant control, optionally with sampled trajectory. Any
/// trajectory present on input is ignored and recomputed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ProcessFile {
    Strict(StrictFile),
    Spacetime(SpaceTimeFile),
}

fn lengths(horizon: &Number, fractions: Vec<&Number>) -> Result<Vec<f64>, InputError> {
    let total = horizon.value().map_err(field_err("horizon"))?;
    if !(total > 0.0) {
        return Err(InputError::Invalid(format!("horizon must be positive, got {total}")));
    }
    let fr = fractions
        .iter()
        .enumerate()
        .map(|(i, f)| f.value().map_err(field_err(format!("cells[{i}].fraction"))))
        .collect::<Result<Vec<_>, _>>()?;
    if fr.is_empty() {
        return Err(InputError::Invalid("process has no cells".into()));
    }
    let sum: f64 = fr.iter().sum();
    if (sum - 1.0).abs() > FRACTION_TOL {
        return Err(InputError::Invalid(format!("cell fractions sum to {sum}, expected 1")));
    }
    Ok(fr.iter().map(|f| f * total).collect())
}

impl StrictFile {
    pub fn cells(&self) -> Result<Vec<StrictCell>, InputError> {
        let lens = lengths(&self.horizon, self.cells.iter().map(|c| &c.fraction).collect())?;
        self.cells
            .iter()
            .zip(lens)
            .enumerate()
            .map(|(i, (c, duration))| {
                Ok(StrictCell {
                    duration,
                    u: values(&c.u, &format!("cells[{i}].u"))?,
                })
            })
            .collect()
    }

    pub fn from_process(p: &StrictProcess) -> Self {
        let t = p.horizon();
        StrictFile {
            horizon: t.into(),
            cells: p
                .cells()
                .iter()
                .map(|c| StrictCellFile {
                    u: c.u.iter().map(|&v| v.into()).collect(),
                    fraction: (c.duration / t).into(),
                })
                .collect(),
            trajectory: Some(StrictTrajectory {
                substeps: p.substeps(),
                times: p.times().to_vec(),
                states: p.states().to_vec(),
                nu: p.nu_samples(),
            }),
        }
    }
}

impl SpaceTimeFile {
    pub fn cells(&self) -> Result<Vec<ControlCell>, InputError> {
        let lens = lengths(&self.horizon, self.cells.iter().map(|c| &c.fraction).collect())?;
        self.cells
            .iter()
            .zip(lens)
            .enumerate()
            .map(|(i, (c, length))| {
                Ok(ControlCell {
                    length,
                    w0: c.w0.value().map_err(field_err(format!("cells[{i}].w0")))?,
                    w: values(&c.w, &format!("cells[{i}].w"))?,
                })
            })
            .collect()
    }

    pub fn from_process(p: &SpaceTimeProcess) -> Self {
        let s = p.horizon();
        SpaceTimeFile {
            horizon: s.into(),
            cells: p
                .cells()
                .iter()
                .map(|c| SpaceTimeCellFile {
                    w0: c.w0.into(),
                    w: c.w.iter().map(|&v| v.into()).collect(),
                    fraction: (c.length / s).into(),
                })
                .collect(),
            trajectory: Some(SpaceTimeTrajectory {
                substeps: p.substeps(),
                nodes: p.nodes().to_vec(),
                clock: p.clock().to_vec(),
                states: p.states().to_vec(),
            }),
        }
    }
}

/// Terminal data of a multiplier; the adjoint is integrated from `p_final`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultiplierFile {
    pub p0: Number,
    pub lambda: Number,
    pub p_final: Vec<Number>,
}

impl MultiplierFile {
    /// `(p0, λ, p(S))`.
    pub fn values(&self) -> Result<(f64, f64, Vec<f64>), InputError> {
        Ok((
            self.p0.value().map_err(field_err("p0"))?,
            self.lambda.value().map_err(field_err("lambda"))?,
            values(&self.p_final, "p_final")?,
        ))
    }
}

/// Written by `check` and `certify`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub tolerances: Tolerances,
    pub report: CertificationReport,
}

/// One row of the `brackets` listing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BracketRow {
    pub bracket: String,
    pub degree: usize,
    pub components: Vec<String>,
}
