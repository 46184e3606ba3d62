//! Multiplier feasibility as an exact linear program.
//!
//! Unknowns are the transversality coefficients θ = (λ, μ, ν). The terminal
//! covector is linear in θ and the adjoint is linear in its terminal value,
//! so every pointwise condition becomes a linear row in θ.

use std::collections::HashSet;

use num_traits::{One, Signed, ToPrimitive, Zero};

use super::{
    check_conditions, realize_brackets, CertificationReport, GridMetadata, Multiplier, Tolerances, Verdict,
    Witness, GRID_NOTE,
};
use crate::dynamics::transition_matrix;
use crate::error::Result;
use crate::lp::{self, FeasibilityProblem, LpOutcome, Rational, DEFAULT_MAX_PIVOTS};
use crate::model::Problem;
use crate::symbolic::enumerate_brackets;
use crate::trajectory::SpaceTimeProcess;

fn radical_inverse(mut i: usize, base: usize) -> f64 {
    let mut inv = 1.0 / base as f64;
    let mut out = 0.0;
    while i > 0 {
        out += (i % base) as f64 * inv;
        i /= base;
        inv /= base as f64;
    }
    out
}

fn first_primes(k: usize) -> Vec<usize> {
    let mut primes: Vec<usize> = Vec::with_capacity(k);
    let mut c = 2;
    while primes.len() < k {
        if primes.iter().all(|p| c % p != 0) {
            primes.push(c);
        }
        c += 1;
    }
    primes
}

/// Deterministic controls in 𝒲: the poles `(1,0)`, `(0,±e_i)`, then `count`
/// Halton points with `w0` from the first coordinate and the direction of
/// `w` from the remaining ones.
pub fn control_samples(m: usize, count: usize) -> Vec<(f64, Vec<f64>)> {
    let mut out = vec![(1.0, vec![0.0; m])];
    for i in 0..m {
        for sign in [1.0, -1.0] {
            let mut w = vec![0.0; m];
            w[i] = sign;
            out.push((0.0, w));
        }
    }
    let bases = first_primes(m + 1);
    for i in 1..=count {
        let w0 = radical_inverse(i, bases[0]);
        let mut d: Vec<f64> = bases[1..].iter().map(|&b| 2.0 * radical_inverse(i, b) - 1.0).collect();
        let nd = crate::trajectory::norm(&d);
        if nd == 0.0 {
            d = vec![0.0; m];
            d[0] = 1.0;
        } else {
            d.iter_mut().for_each(|c| *c /= nd);
        }
        out.push((w0, d.iter().map(|c| (1.0 - w0) * c).collect()));
    }
    out
}

/// Exact, deduplicated rows over θ.
struct RowSet {
    rows: Vec<Vec<Rational>>,
    seen: HashSet<Vec<Rational>>,
}

impl RowSet {
    fn new() -> Self {
        RowSet { rows: Vec::new(), seen: HashSet::new() }
    }

    fn insert(&mut self, row: Vec<Rational>) {
        if self.seen.insert(row.clone()) {
            self.rows.push(row);
        }
    }
}

/// Rounds and scales a θ-row so its largest coefficient has magnitude 1.
/// Rows whose coefficients all lie within `zero_tol` are numerically zero.
fn normalize(row: &[f64], zero_tol: f64) -> Option<Vec<Rational>> {
    if row.iter().all(|c| c.abs() <= zero_tol) {
        return None;
    }
    let q: Vec<Rational> = row.iter().map(|&c| lp::rationalize(c)).collect();
    let max = q.iter().map(|c| c.abs()).max()?;
    if max.is_zero() {
        return None;
    }
    Some(q.into_iter().map(|c| c / &max).collect())
}

struct Layout {
    /// 1 + active φ + ψ.
    theta: usize,
    k: usize,
    q: usize,
}

impl Layout {
    /// `[λ, μ, ν⁺, ν⁻]`.
    fn split(&self, row: &[Rational]) -> Vec<Rational> {
        let mut out = row.to_vec();
        out.extend(row[1 + self.k..].iter().map(|c| -c.clone()));
        out
    }

    fn split_len(&self) -> usize {
        self.theta + self.q
    }

    /// A `≤ 0` row is implied by `x ≥ 0` when no split coefficient is positive.
    fn implied_le(&self, row: &[Rational]) -> bool {
        row[..1 + self.k].iter().all(|c| !c.is_positive()) && row[1 + self.k..].iter().all(Zero::is_zero)
    }

    fn unsplit(&self, x: &[Rational]) -> Vec<Rational> {
        let mut theta = x[..1 + self.k].to_vec();
        for j in 0..self.q {
            theta.push(&x[1 + self.k + j] - &x[1 + self.k + self.q + j]);
        }
        theta
    }
}

/// Searches for a nonzero θ: one LP per normalization form `form·θ = ±1`.
fn solve_cone(
    layout: &Layout,
    eq: &[&Vec<Rational>],
    le: &[Vec<Rational>],
    forms: &[(Vec<Rational>, Rational)],
) -> Result<Option<Vec<Rational>>> {
    let zero = Rational::zero();
    let le_rows: Vec<(Vec<Rational>, Rational)> = le.iter().map(|r| (layout.split(r), zero.clone())).collect();
    for (form, rhs) in forms {
        let mut eq_rows: Vec<(Vec<Rational>, Rational)> =
            eq.iter().map(|r| (layout.split(r), zero.clone())).collect();
        eq_rows.push((layout.split(form), rhs.clone()));
        let problem = FeasibilityProblem {
            num_vars: layout.split_len(),
            eq: eq_rows,
            le: le_rows.clone(),
        };
        if let LpOutcome::Feasible(x) = lp::phase_one_lazy(&problem, DEFAULT_MAX_PIVOTS)? {
            return Ok(Some(layout.unsplit(&x)));
        }
    }
    Ok(None)
}

fn mat_vec(m: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    m.iter().map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
}

/// Decides whether a nonzero multiplier satisfies the conditions on `proc`,
/// with brackets of at most `depth` leaves and `samples` extra control
/// samples per node.
pub fn certify(
    problem: &Problem,
    proc: &SpaceTimeProcess,
    depth: usize,
    samples: usize,
    tols: &Tolerances,
) -> Result<CertificationReport> {
    let sys = &problem.system;
    let n = sys.n();
    let (t_end, y_end) = proc.endpoint();
    let cone = problem.target.polar_cone(t_end, y_end, tols.target)?;
    let (_, dpsi) = problem.cost.value_and_gradient(t_end, y_end)?;

    // (p0, p(S)) = Σ θ_j cols[j]
    let neg = |v: &Vec<f64>| v.iter().map(|c| -c).collect::<Vec<f64>>();
    let mut cols = vec![neg(&dpsi)];
    cols.extend(cone.nonneg.iter().map(neg));
    cols.extend(cone.free.iter().map(neg));
    let layout = Layout {
        theta: cols.len(),
        k: cone.nonneg.len(),
        q: cone.free.len(),
    };
    // multiplier-space row r ↦ θ-row
    let to_theta = |r: &[f64]| -> Vec<f64> {
        cols.iter()
            .map(|c| c.iter().zip(r).map(|(a, b)| a * b).sum())
            .collect()
    };

    let trees = enumerate_brackets(sys.m(), depth);
    let realized = realize_brackets(sys, &trees)?;
    let tm = transition_matrix(sys, proc)?;
    let controls = control_samples(sys.m(), samples);

    let mut base_eq = RowSet::new();
    let mut le = RowSet::new();
    let mut bracket_eq: Vec<RowSet> = realized.iter().map(|_| RowSet::new()).collect();
    let zero_tol = tols.eq;
    let push_eq = |set: &mut RowSet, r: Vec<f64>| {
        if let Some(mut row) = normalize(&to_theta(&r), zero_tol) {
            if let Some(lead) = row.iter().find(|c| !c.is_zero()) {
                if lead.is_negative() {
                    row.iter_mut().for_each(|c| *c = -c.clone());
                }
            }
            set.insert(row);
        }
    };
    let covector_row = |m: &[Vec<f64>], v: &[f64], lead: f64| -> Vec<f64> {
        std::iter::once(lead).chain(mat_vec(m, v)).collect()
    };

    let last_cell = proc.cells().len() - 1;
    for (k, y) in proc.states().iter().enumerate() {
        let m = &tm.matrices[k];
        for (i, b) in realized.iter().enumerate() {
            let set = if b.tree.degree() == 1 { &mut base_eq } else { &mut bracket_eq[i] };
            push_eq(set, covector_row(m, &b.field.eval(y)?, 0.0));
        }
        let first = if k > 0 { proc.cell_of_step(k - 1) } else { 0 };
        let last = proc.cell_of_step(k).min(last_cell);
        for c in first..=last {
            let (w0, w) = proc.cells()[c].normalized();
            push_eq(&mut base_eq, covector_row(m, &sys.velocity(y, w0, &w)?, w0));
            if w0 > 0.0 {
                for (i, b) in realized.iter().enumerate() {
                    let row = covector_row(m, &b.with_drift.eval(y)?, 0.0);
                    let set = if b.tree.degree() == 1 { &mut base_eq } else { &mut bracket_eq[i] };
                    push_eq(set, row);
                }
            }
        }
        for (w0, w) in &controls {
            let row = to_theta(&covector_row(m, &sys.velocity(y, *w0, w)?, *w0));
            if let Some(row) = normalize(&row, zero_tol) {
                if !layout.implied_le(&row) {
                    le.insert(row);
                }
            }
        }
    }

    // normalization forms: λ, then p0 (only when the clock ends at 0), then p(S)
    let mut forms: Vec<(Vec<Rational>, Rational)> = Vec::new();
    let mut e_lambda = vec![Rational::zero(); layout.theta];
    e_lambda[0] = Rational::one();
    forms.push((e_lambda, Rational::one()));
    let first_coord = if t_end > tols.target { 1 } else { 0 };
    let mut seen_forms = HashSet::new();
    for i in first_coord..=n {
        let form: Vec<Rational> = cols.iter().map(|c| lp::rationalize(c[i])).collect();
        if form.iter().all(Zero::is_zero) || !seen_forms.insert(form.clone()) {
            continue;
        }
        for sign in [Rational::one(), -Rational::one()] {
            forms.push((form.clone(), sign));
        }
    }

    let all_eq: Vec<&Vec<Rational>> = base_eq.rows.iter().chain(bracket_eq.iter().flat_map(|s| &s.rows)).collect();
    let lp_rows = all_eq.len() + le.rows.len();
    let metadata = GridMetadata {
        cells: proc.cells().len(),
        substeps: proc.substeps(),
        nodes: proc.nodes().len(),
        bracket_depth: depth,
        control_samples: Some(samples),
        rescaled_cells: proc.rescaled_cells(),
        lp_rows: Some(lp_rows),
        note: GRID_NOTE.into(),
    };
    let bracket_names: Vec<String> = realized.iter().map(|b| b.tree.to_string()).collect();

    let Some(theta) = solve_cone(&layout, &all_eq, &le.rows, &forms)? else {
        // find the first bracket that turns the first-order system infeasible
        let mut killing = None;
        let mut eq: Vec<&Vec<Rational>> = base_eq.rows.iter().collect();
        if solve_cone(&layout, &eq, &le.rows, &forms)?.is_some() {
            for (b, set) in realized.iter().zip(&bracket_eq) {
                eq.extend(&set.rows);
                if !set.rows.is_empty() && solve_cone(&layout, &eq, &le.rows, &forms)?.is_none() {
                    killing = Some(b.tree.to_string());
                    break;
                }
            }
        }
        return Ok(CertificationReport {
            verdict: Verdict::Infeasible,
            conditions: Vec::new(),
            witness: None,
            killing_bracket: killing,
            lineality_dimension: None,
            brackets: bracket_names,
            metadata,
        });
    };

    let theta_f: Vec<f64> = theta.iter().map(|c| c.to_f64().unwrap_or(f64::NAN)).collect();
    let mult_vec: Vec<f64> = (0..=n)
        // `+ 0.0` turns -0.0 into 0.0 for cleaner reports
        .map(|i| cols.iter().zip(&theta_f).map(|(c, t)| c[i] * t).sum::<f64>() + 0.0)
        .collect();
    let lambda = theta_f[0].max(0.0);
    let mult = Multiplier::from_terminal(sys, proc, mult_vec[0], lambda, &mult_vec[1..])?;
    let checked = check_conditions(problem, proc, &mult, &trees, tols)?;

    let lineality = lineality_dimension(&layout, &all_eq, &le.rows, &cols);
    Ok(CertificationReport {
        verdict: Verdict::Feasible,
        conditions: checked.conditions,
        witness: Some(Witness {
            p0: mult_vec[0],
            p_final: mult_vec[1..].to_vec(),
            lambda,
            mu: theta_f[1..1 + layout.k].to_vec(),
            nu: theta_f[1 + layout.k..].to_vec(),
            active_phi: cone.active,
        }),
        killing_bracket: None,
        lineality_dimension: Some(lineality),
        brackets: bracket_names,
        metadata,
    })
}

/// Rank, in multiplier space, of `{θ : Eθ = 0, Gθ = 0, λ = 0, μ = 0}`.
fn lineality_dimension(layout: &Layout, eq: &[&Vec<Rational>], le: &[Vec<Rational>], cols: &[Vec<f64>]) -> usize {
    let mut rows: Vec<Vec<Rational>> = eq.iter().map(|r| (*r).clone()).chain(le.iter().cloned()).collect();
    for j in 0..=layout.k {
        let mut e = vec![Rational::zero(); layout.theta];
        e[j] = Rational::one();
        rows.push(e);
    }
    let basis = lp::nullspace(&rows, layout.theta);
    if basis.is_empty() {
        return 0;
    }
    let dim = cols[0].len();
    let images: Vec<Vec<Rational>> = basis
        .iter()
        .map(|v| {
            (0..dim)
                .map(|i| {
                    cols.iter()
                        .zip(v)
                        .map(|(c, t)| lp::rationalize(c[i]) * t)
                        .sum()
                })
                .collect()
        })
        .collect();
    lp::rank(&images)
}
