use nalgebra::{DMatrix, DVector};

use super::{
    hamiltonian, max_hamiltonian, realize_brackets, CertificationReport, ConditionId, ConditionResult,
    GridMetadata, Multiplier, RealizedBracket, Tolerances, Verdict, GRID_NOTE,
};
use crate::dynamics::{row_times, Linearization};
use crate::error::{Error, Result};
use crate::model::{ConeGenerators, Problem};
use crate::symbolic::BracketTree;
use crate::trajectory::{norm, SpaceTimeProcess};

/// Exhaustive active-set search is used for the cone projection; beyond
/// this many active constraints it becomes too expensive.
const MAX_ACTIVE_FOR_PROJECTION: usize = 16;

/// Running maximum of a pointwise residual.
struct Worst {
    value: f64,
    s: Option<f64>,
    detail: Option<String>,
}

impl Worst {
    fn new() -> Self {
        Worst { value: 0.0, s: None, detail: None }
    }

    fn update(&mut self, value: f64, s: f64, detail: impl FnOnce() -> Option<String>) {
        if value > self.value || self.s.is_none() {
            self.value = value;
            self.s = Some(s);
            self.detail = detail();
        }
    }

    fn finish(self, id: ConditionId, scale: f64, tolerance: f64) -> ConditionResult {
        let residual = self.value / scale;
        ConditionResult {
            id,
            residual,
            tolerance,
            pass: residual <= tolerance,
            worst_s: self.s,
            detail: self.detail,
        }
    }
}

/// Distance from `v` to `−cone` where the cone is spanned nonnegatively by
/// `nonneg` and linearly by `free`: `min |v + Σ μ a + Σ ν b|`, `μ ≥ 0`.
pub(crate) fn distance_to_negative_cone(v: &[f64], cone: &ConeGenerators) -> Result<f64> {
    let k = cone.nonneg.len();
    if k > MAX_ACTIVE_FOR_PROJECTION {
        return Err(Error::Invalid(format!(
            "{k} active inequality constraints; at most {MAX_ACTIVE_FOR_PROJECTION} are supported"
        )));
    }
    let target = DVector::from_iterator(v.len(), v.iter().map(|c| -c));
    let mut best = f64::INFINITY;
    for mask in 0u32..(1 << k) {
        let cols: Vec<&Vec<f64>> = (0..k)
            .filter(|l| mask & (1 << l) != 0)
            .map(|l| &cone.nonneg[l])
            .chain(&cone.free)
            .collect();
        let nsub = mask.count_ones() as usize;
        let (resid, ok) = if cols.is_empty() {
            (norm(v), true)
        } else {
            let a = DMatrix::from_fn(v.len(), cols.len(), |i, j| cols[j][i]);
            let c = a
                .clone()
                .svd(true, true)
                .solve(&target, 1e-13)
                .map_err(|e| Error::Invalid(e.to_string()))?;
            let r = &a * &c - &target;
            (r.norm(), c.iter().take(nsub).all(|&m| m >= -1e-12))
        };
        if ok {
            best = best.min(resid);
        }
    }
    Ok(best)
}

/// Evaluates every condition on a given multiplier. Brackets of degree 1
/// feed HG and FB, higher degrees feed HB and FB; brackets that vanish
/// symbolically are skipped.
pub fn check_conditions(
    problem: &Problem,
    proc: &SpaceTimeProcess,
    mult: &Multiplier,
    brackets: &[BracketTree],
    tols: &Tolerances,
) -> Result<CertificationReport> {
    let sys = &problem.system;
    let nodes = proc.nodes();
    let states = proc.states();
    let ps = &mult.adjoint.covectors;
    if ps.len() != nodes.len() {
        return Err(Error::Dimension {
            expected: nodes.len(),
            got: ps.len(),
        });
    }
    let (t_end, y_end) = proc.endpoint();
    let cone = problem.target.polar_cone(t_end, y_end, tols.target)?;

    let magnitude = mult.magnitude();
    let scale = if magnitude > 0.0 { magnitude } else { 1.0 };
    let mut results = Vec::new();

    results.push(ConditionResult {
        id: ConditionId::NT,
        residual: magnitude,
        tolerance: tols.eq,
        pass: magnitude > tols.eq,
        worst_s: None,
        detail: None,
    });

    // transversality
    let (_, dpsi) = problem.cost.value_and_gradient(t_end, y_end)?;
    let p_end = mult.adjoint.terminal();
    let v: Vec<f64> = std::iter::once(mult.p0)
        .chain(p_end.iter().copied())
        .zip(&dpsi)
        .map(|(a, d)| a + mult.lambda * d)
        .collect();
    let dist = distance_to_negative_cone(&v, &cone)? / scale;
    results.push(ConditionResult {
        id: ConditionId::TRANS,
        residual: dist,
        tolerance: tols.transversality,
        pass: dist <= tols.transversality,
        worst_s: Some(proc.horizon()),
        detail: None,
    });

    // adjoint equation, trapezoidal finite differences per step
    let lin = Linearization::new(sys);
    let mut adj = Worst::new();
    for k in 0..nodes.len() - 1 {
        let cell = &proc.cells()[proc.cell_of_step(k)];
        let h = nodes[k + 1] - nodes[k];
        let a0 = lin.eval(&states[k], cell.w0, &cell.w)?;
        let a1 = lin.eval(&states[k + 1], cell.w0, &cell.w)?;
        let (q0, q1) = (row_times(&ps[k], &a0), row_times(&ps[k + 1], &a1));
        let r = (0..sys.n())
            .map(|i| ((ps[k + 1][i] - ps[k][i]) / h + 0.5 * (q0[i] + q1[i])).abs())
            .fold(0.0, f64::max);
        adj.update(r, nodes[k], || None);
    }
    results.push(adj.finish(ConditionId::ADJ, scale, tols.adjoint));

    let realized = realize_brackets(sys, brackets)?;
    let (firsts, highers): (Vec<&RealizedBracket>, Vec<&RealizedBracket>) =
        realized.iter().partition(|b| b.tree.degree() == 1);

    let mut max_c = Worst::new();
    let mut h0 = Worst::new();
    let mut hg = Worst::new();
    let mut hb = Worst::new();
    let mut fb = Worst::new();
    for (k, (y, p)) in states.iter().zip(ps).enumerate() {
        let s = nodes[k];
        let big_h = max_hamiltonian(sys, y, mult.p0, p)?;
        h0.update(big_h.value.abs(), s, || None);
        for (i, g) in sys.controls().iter().enumerate() {
            hg.update(g.dot(y, p)?.abs(), s, || Some(format!("g{}", i + 1)));
        }
        for b in &highers {
            hb.update(b.field.dot(y, p)?.abs(), s, || Some(b.tree.to_string()));
        }
        // cell-dependent conditions: every cell whose closure holds node k
        let last_cell = proc.cells().len() - 1;
        let first = if k > 0 { proc.cell_of_step(k - 1) } else { 0 };
        let last = proc.cell_of_step(k).min(last_cell);
        for c in first..=last {
            let (w0, w) = proc.cells()[c].normalized();
            let h = hamiltonian(sys, y, mult.p0, p, w0, &w)?;
            max_c.update(big_h.value - h, s, || Some(format!("cell {c}")));
            if w0 > 0.0 {
                for b in firsts.iter().chain(&highers) {
                    let r = (b.with_drift.dot(y, p)? * w0).abs();
                    fb.update(r, s, || Some(format!("[f,{}]", b.tree)));
                }
            }
        }
    }
    results.push(max_c.finish(ConditionId::MAX, scale, tols.eq));
    results.push(h0.finish(ConditionId::H0, scale, tols.eq));
    results.push(hg.finish(ConditionId::HG, scale, tols.eq));
    results.push(hb.finish(ConditionId::HB, scale, tols.eq));
    results.push(fb.finish(ConditionId::FB, scale, tols.eq));

    if t_end > tols.target {
        let strong = mult.adjoint_sup().max(mult.lambda);
        results.push(ConditionResult {
            id: ConditionId::NtStrong,
            residual: strong,
            tolerance: tols.eq,
            pass: strong > tols.eq,
            worst_s: None,
            detail: None,
        });
    }

    let pass = results.iter().all(|r| r.pass);
    Ok(CertificationReport {
        verdict: Verdict::Checked { pass },
        conditions: results,
        witness: None,
        killing_bracket: None,
        lineality_dimension: None,
        brackets: realized.iter().map(|b| b.tree.to_string()).collect(),
        metadata: GridMetadata {
            cells: proc.cells().len(),
            substeps: proc.substeps(),
            nodes: nodes.len(),
            bracket_depth: brackets.iter().map(BracketTree::degree).max().unwrap_or(0),
            control_samples: None,
            rescaled_cells: proc.rescaled_cells(),
            lp_rows: None,
            note: GRID_NOTE.into(),
        },
    })
}
