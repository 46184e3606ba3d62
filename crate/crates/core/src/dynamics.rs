//! Fixed-step RK4 for the state (forward) and the adjoint (backward).
//!
//! Steps are aligned with control cells, so every step sees a constant
//! control and the scheme keeps its order across switches.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ControlAffineSystem;
use crate::symbolic::{eval_matrix, Expr};
use crate::trajectory::{
    check_substeps, validate_controls, ControlCell, SpaceTimeProcess, StrictCell, StrictProcess,
};

pub const DEFAULT_SUBSTEPS: usize = 10;

type Matrix = Vec<Vec<f64>>;

fn axpy(a: f64, x: &[f64], y: &[f64]) -> Vec<f64> {
    y.iter().zip(x).map(|(yi, xi)| yi + a * xi).collect()
}

fn check_finite(v: &[f64], s: f64) -> Result<()> {
    if v.iter().all(|c| c.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFiniteState { s })
    }
}

/// One classical RK4 step of `dx/ds = a f(x) + Σ b_i g_i(x)`.
pub(crate) fn rk4_step(
    sys: &ControlAffineSystem,
    x: &[f64],
    a: f64,
    b: &[f64],
    h: f64,
) -> Result<Vec<f64>> {
    let k1 = sys.velocity(x, a, b)?;
    let k2 = sys.velocity(&axpy(h / 2.0, &k1, x), a, b)?;
    let k3 = sys.velocity(&axpy(h / 2.0, &k2, x), a, b)?;
    let k4 = sys.velocity(&axpy(h, &k3, x), a, b)?;
    Ok(x.iter()
        .enumerate()
        .map(|(i, xi)| xi + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect())
}

fn sweep(
    sys: &ControlAffineSystem,
    x0: &[f64],
    cells: impl Iterator<Item = (f64, f64, Vec<f64>)>,
    substeps: usize,
) -> Result<Vec<Vec<f64>>> {
    if x0.len() != sys.n() {
        return Err(Error::Dimension {
            expected: sys.n(),
            got: x0.len(),
        });
    }
    let mut states = vec![x0.to_vec()];
    let mut s = 0.0;
    for (len, a, b) in cells {
        let h = len / substeps as f64;
        for _ in 0..substeps {
            let next = rk4_step(sys, states.last().expect("seeded"), a, &b, h)?;
            s += h;
            check_finite(&next, s)?;
            states.push(next);
        }
    }
    Ok(states)
}

/// Integrates `dy0/ds = w0`, `dy/ds = f(y) w0 + Σ g_i(y) w^i` from `(0, x0)`.
pub fn integrate_state(
    sys: &ControlAffineSystem,
    cells: Vec<ControlCell>,
    x0: &[f64],
    substeps: usize,
) -> Result<SpaceTimeProcess> {
    validate_controls(&cells)?;
    check_substeps(substeps)?;
    for c in &cells {
        if c.w.len() != sys.m() {
            return Err(Error::Dimension {
                expected: sys.m(),
                got: c.w.len(),
            });
        }
    }
    let states = sweep(
        sys,
        x0,
        cells.iter().map(|c| (c.length, c.w0, c.w.clone())),
        substeps,
    )?;
    // y0 is piecewise linear: exact accumulation.
    let mut clock = vec![0.0];
    let mut t = 0.0;
    for c in &cells {
        let h = c.length / substeps as f64;
        for _ in 0..substeps {
            t += c.w0 * h;
            clock.push(t);
        }
    }
    SpaceTimeProcess::from_parts(cells, substeps, clock, states)
}

/// Integrates the original system `dx/dt = f(x) + Σ g_i(x) u^i`.
pub fn integrate_strict(
    sys: &ControlAffineSystem,
    cells: Vec<StrictCell>,
    x0: &[f64],
    substeps: usize,
) -> Result<StrictProcess> {
    check_substeps(substeps)?;
    for c in &cells {
        if c.u.len() != sys.m() {
            return Err(Error::Dimension {
                expected: sys.m(),
                got: c.u.len(),
            });
        }
    }
    let states = sweep(
        sys,
        x0,
        cells.iter().map(|c| (c.duration, 1.0, c.u.clone())),
        substeps,
    )?;
    StrictProcess::from_parts(cells, substeps, states)
}

/// Symbolic Jacobians of the drift and of each controlled field.
pub(crate) struct Linearization {
    df: Vec<Vec<Expr>>,
    dg: Vec<Vec<Vec<Expr>>>,
}

impl Linearization {
    pub(crate) fn new(sys: &ControlAffineSystem) -> Self {
        Linearization {
            df: sys.drift().jacobian(),
            dg: sys.controls().iter().map(|g| g.jacobian()).collect(),
        }
    }

    /// `A = Df(x) w0 + Σ Dg_i(x) w^i`.
    pub(crate) fn eval(&self, x: &[f64], w0: f64, w: &[f64]) -> Result<Matrix> {
        let n = x.len();
        let mut a = vec![vec![0.0; n]; n];
        let mut add = |m: &[Vec<Expr>], c: f64| -> Result<()> {
            if c == 0.0 {
                return Ok(());
            }
            for (row, mrow) in a.iter_mut().zip(eval_matrix(m, x)?) {
                for (aij, mij) in row.iter_mut().zip(mrow) {
                    *aij += c * mij;
                }
            }
            Ok(())
        };
        add(&self.df, w0)?;
        for (dg, &wi) in self.dg.iter().zip(w) {
            add(dg, wi)?;
        }
        Ok(a)
    }
}

/// `p·A` for a row covector.
pub(crate) fn row_times(p: &[f64], a: &Matrix) -> Vec<f64> {
    let n = p.len();
    (0..n).map(|j| (0..n).map(|i| p[i] * a[i][j]).sum()).collect()
}

/// `A` at the start, midpoint and end of every integration step. Midpoint
/// states come from an RK4 half step off the stored node state.
fn step_matrices(sys: &ControlAffineSystem, proc: &SpaceTimeProcess) -> Result<Vec<[Matrix; 3]>> {
    let lin = Linearization::new(sys);
    let (nodes, states) = (proc.nodes(), proc.states());
    let mut out = Vec::with_capacity(nodes.len() - 1);
    for k in 0..nodes.len() - 1 {
        let cell = &proc.cells()[proc.cell_of_step(k)];
        let h = nodes[k + 1] - nodes[k];
        let mid = rk4_step(sys, &states[k], cell.w0, &cell.w, h / 2.0)?;
        out.push([
            lin.eval(&states[k], cell.w0, &cell.w)?,
            lin.eval(&mid, cell.w0, &cell.w)?,
            lin.eval(&states[k + 1], cell.w0, &cell.w)?,
        ]);
    }
    Ok(out)
}

fn backward(nodes: &[f64], mats: &[[Matrix; 3]], p_final: &[f64]) -> Result<Vec<Vec<f64>>> {
    let mut out = vec![p_final.to_vec()];
    for k in (0..mats.len()).rev() {
        let h = nodes[k + 1] - nodes[k];
        let [a0, am, a1] = &mats[k];
        let p = out.last().expect("seeded");
        let rhs = |q: &[f64], a: &Matrix| -> Vec<f64> { row_times(q, a).iter().map(|v| -v).collect() };
        let k1 = rhs(p, a1);
        let k2 = rhs(&axpy(-h / 2.0, &k1, p), am);
        let k3 = rhs(&axpy(-h / 2.0, &k2, p), am);
        let k4 = rhs(&axpy(-h, &k3, p), a0);
        let next: Vec<f64> = (0..p.len())
            .map(|i| p[i] - h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
            .collect();
        check_finite(&next, nodes[k])?;
        out.push(next);
    }
    out.reverse();
    Ok(out)
}

/// Adjoint covector `p(s)` sampled on the owning process's nodes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdjointPath {
    pub nodes: Vec<f64>,
    pub covectors: Vec<Vec<f64>>,
}

impl AdjointPath {
    pub fn terminal(&self) -> &[f64] {
        self.covectors.last().expect("non-empty path")
    }

    pub fn scaled(&self, c: f64) -> AdjointPath {
        AdjointPath {
            nodes: self.nodes.clone(),
            covectors: self
                .covectors
                .iter()
                .map(|p| p.iter().map(|v| c * v).collect())
                .collect(),
        }
    }
}

/// Backward RK4 for `dp/ds = −p·(Df(y) w0 + Σ Dg_i(y) w^i)` from `p(S) = p_final`.
pub fn integrate_adjoint(
    sys: &ControlAffineSystem,
    proc: &SpaceTimeProcess,
    p_final: &[f64],
) -> Result<AdjointPath> {
    if p_final.len() != sys.n() {
        return Err(Error::Dimension {
            expected: sys.n(),
            got: p_final.len(),
        });
    }
    let mats = step_matrices(sys, proc)?;
    Ok(AdjointPath {
        nodes: proc.nodes().to_vec(),
        covectors: backward(proc.nodes(), &mats, p_final)?,
    })
}

/// `M(s)` with `M(S) = I` and `p(s) = p(S)·M(s)` for every terminal covector.
#[derive(Clone, Debug, PartialEq)]
pub struct TransitionMatrix {
    pub nodes: Vec<f64>,
    pub matrices: Vec<Matrix>,
}

impl TransitionMatrix {
    /// `p_final · M(s_k)`.
    pub fn propagate(&self, k: usize, p_final: &[f64]) -> Vec<f64> {
        row_times(p_final, &self.matrices[k])
    }
}

/// Solves `dM/ds = −M·A(s)` backward; row `i` of `M` is the adjoint with
/// terminal value `e_i`.
pub fn transition_matrix(sys: &ControlAffineSystem, proc: &SpaceTimeProcess) -> Result<TransitionMatrix> {
    let n = sys.n();
    let mats = step_matrices(sys, proc)?;
    let rows: Vec<Vec<Vec<f64>>> = (0..n)
        .map(|i| {
            let mut e = vec![0.0; n];
            e[i] = 1.0;
            backward(proc.nodes(), &mats, &e)
        })
        .collect::<Result<_>>()?;
    let matrices = (0..proc.nodes().len())
        .map(|k| rows.iter().map(|r| r[k].clone()).collect())
        .collect();
    Ok(TransitionMatrix {
        nodes: proc.nodes().to_vec(),
        matrices,
    })
}
