//! Exact rational linear feasibility: phase-1 simplex with Bland's rule, plus
//! RREF-based rank and null space.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, One, Signed, Zero};

use crate::error::{Error, Result};

pub type Rational = BigRational;

/// Quantum used when turning float coefficients into rationals.
pub const ROUNDING_QUANTUM: f64 = 1e-12;

/// Nearest multiple of [`ROUNDING_QUANTUM`], as an exact rational.
pub fn rationalize(x: f64) -> Rational {
    let scaled = (x / ROUNDING_QUANTUM).round();
    let numer = BigInt::from_f64(scaled).unwrap_or_else(BigInt::zero);
    let denom = BigInt::from(1_000_000_000_000_i64);
    Rational::new(numer, denom)
}

/// `{x ≥ 0 : A_eq x = b_eq, A_le x ≤ b_le}`.
#[derive(Clone, Debug, Default)]
pub struct FeasibilityProblem {
    pub num_vars: usize,
    pub eq: Vec<(Vec<Rational>, Rational)>,
    pub le: Vec<(Vec<Rational>, Rational)>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum LpOutcome {
    Feasible(Vec<Rational>),
    Infeasible,
}

pub const DEFAULT_MAX_PIVOTS: usize = 100_000;

/// Phase-1 simplex: minimizes the sum of artificial variables. Bland's rule
/// (smallest entering index, smallest leaving basic index on ties)
/// guarantees termination; `max_pivots` is only a backstop.
pub fn phase_one(problem: &FeasibilityProblem, max_pivots: usize) -> Result<LpOutcome> {
    let nv = problem.num_vars;
    let n_le = problem.le.len();
    let rows = problem.eq.len() + n_le;
    for (a, _) in problem.eq.iter().chain(&problem.le) {
        if a.len() != nv {
            return Err(Error::Dimension { expected: nv, got: a.len() });
        }
    }

    // Row layout: [vars | slacks | artificials | rhs]
    struct RowSpec {
        coeffs: Vec<Rational>,
        rhs: Rational,
        slack: Option<(usize, bool)>, // (slack index, coefficient is +1)
    }
    let mut specs = Vec::with_capacity(rows);
    for (a, b) in &problem.eq {
        specs.push(RowSpec { coeffs: a.clone(), rhs: b.clone(), slack: None });
    }
    for (i, (a, b)) in problem.le.iter().enumerate() {
        specs.push(RowSpec { coeffs: a.clone(), rhs: b.clone(), slack: Some((i, true)) });
    }
    for s in &mut specs {
        if s.rhs.is_negative() {
            s.coeffs.iter_mut().for_each(|c| *c = -c.clone());
            s.rhs = -s.rhs.clone();
            if let Some((_, sign)) = &mut s.slack {
                *sign = false;
            }
        }
    }
    let needs_artificial: Vec<bool> = specs
        .iter()
        .map(|s| !matches!(s.slack, Some((_, true))))
        .collect();
    let n_art = needs_artificial.iter().filter(|&&b| b).count();
    let ncols = nv + n_le + n_art;
    let art_start = nv + n_le;

    let mut tab: Vec<Vec<Rational>> = Vec::with_capacity(rows);
    let mut basis: Vec<usize> = Vec::with_capacity(rows);
    let mut next_art = art_start;
    for (s, &art) in specs.iter().zip(&needs_artificial) {
        let mut row = vec![Rational::zero(); ncols + 1];
        row[..nv].clone_from_slice(&s.coeffs);
        if let Some((k, positive)) = s.slack {
            row[nv + k] = if positive { Rational::one() } else { -Rational::one() };
        }
        if art {
            row[next_art] = Rational::one();
            basis.push(next_art);
            next_art += 1;
        } else {
            basis.push(nv + s.slack.expect("slack row").0);
        }
        row[ncols] = s.rhs.clone();
        tab.push(row);
    }

    let is_art = |j: usize| j >= art_start;
    let mut pivots = 0;
    loop {
        // reduced cost d_j = c_j - Σ_i c_B(i) T_ij
        let entering = (0..ncols).find(|&j| {
            if basis.contains(&j) {
                return false;
            }
            let mut d = if is_art(j) { Rational::one() } else { Rational::zero() };
            for (i, row) in tab.iter().enumerate() {
                if is_art(basis[i]) && !row[j].is_zero() {
                    d -= &row[j];
                }
            }
            d.is_negative()
        });
        let Some(j) = entering else { break };

        let mut leave: Option<(usize, Rational)> = None;
        for (i, row) in tab.iter().enumerate() {
            if row[j].is_positive() {
                let ratio = &row[ncols] / &row[j];
                let better = match &leave {
                    None => true,
                    Some((li, lr)) => ratio < *lr || (ratio == *lr && basis[i] < basis[*li]),
                };
                if better {
                    leave = Some((i, ratio));
                }
            }
        }
        // Phase-1 objective is bounded below by 0, so a column with a
        // negative reduced cost always has a positive entry.
        let Some((r, _)) = leave else {
            return Err(Error::Invalid("phase-1 objective unbounded".into()));
        };
        pivot(&mut tab, r, j);
        basis[r] = j;
        pivots += 1;
        if pivots > max_pivots {
            return Err(Error::SolverStall { iterations: pivots });
        }
    }

    let infeasibility: Rational = tab
        .iter()
        .zip(&basis)
        .filter(|(_, &b)| is_art(b))
        .map(|(row, _)| row[ncols].clone())
        .sum();
    if !infeasibility.is_zero() {
        return Ok(LpOutcome::Infeasible);
    }
    let mut x = vec![Rational::zero(); nv];
    for (row, &b) in tab.iter().zip(&basis) {
        if b < nv {
            x[b] = row[ncols].clone();
        }
    }
    Ok(LpOutcome::Feasible(x))
}

/// Inequality rows added per round of [`phase_one_lazy`].
const ROW_BATCH: usize = 16;

/// Same answer as [`phase_one`], but inequality rows enter only once they
/// are violated by the current candidate. Suited to systems with many
/// redundant `≤` rows and few unknowns.
pub fn phase_one_lazy(problem: &FeasibilityProblem, max_pivots: usize) -> Result<LpOutcome> {
    let mut active = vec![false; problem.le.len()];
    let mut sub = FeasibilityProblem {
        num_vars: problem.num_vars,
        eq: problem.eq.clone(),
        le: Vec::new(),
    };
    loop {
        let x = match phase_one(&sub, max_pivots)? {
            LpOutcome::Infeasible => return Ok(LpOutcome::Infeasible),
            LpOutcome::Feasible(x) => x,
        };
        let mut violated: Vec<(Rational, usize)> = problem
            .le
            .iter()
            .enumerate()
            .filter(|(i, _)| !active[*i])
            .filter_map(|(i, (a, b))| {
                let v = a.iter().zip(&x).map(|(u, v)| u * v).sum::<Rational>() - b;
                v.is_positive().then_some((v, i))
            })
            .collect();
        if violated.is_empty() {
            return Ok(LpOutcome::Feasible(x));
        }
        violated.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
        for (_, i) in violated.into_iter().take(ROW_BATCH) {
            active[i] = true;
            sub.le.push(problem.le[i].clone());
        }
    }
}

fn pivot(tab: &mut [Vec<Rational>], r: usize, j: usize) {
    let p = tab[r][j].clone();
    tab[r].iter_mut().for_each(|v| *v /= &p);
    let pivot_row = tab[r].clone();
    for (i, row) in tab.iter_mut().enumerate() {
        if i == r || row[j].is_zero() {
            continue;
        }
        let f = row[j].clone();
        for (v, pv) in row.iter_mut().zip(&pivot_row) {
            if !pv.is_zero() {
                *v -= &f * pv;
            }
        }
    }
}

/// Reduced row echelon form in place; returns pivot columns.
fn rref(rows: &mut [Vec<Rational>], ncols: usize) -> Vec<usize> {
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..ncols {
        if r == rows.len() {
            break;
        }
        let Some(p) = (r..rows.len()).find(|&i| !rows[i][c].is_zero()) else {
            continue;
        };
        rows.swap(r, p);
        let lead = rows[r][c].clone();
        rows[r].iter_mut().for_each(|v| *v /= &lead);
        let prow = rows[r].clone();
        for (i, row) in rows.iter_mut().enumerate() {
            if i != r && !row[c].is_zero() {
                let f = row[c].clone();
                for (v, pv) in row.iter_mut().zip(&prow) {
                    *v -= &f * pv;
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    pivots
}

pub fn rank(rows: &[Vec<Rational>]) -> usize {
    let ncols = rows.first().map_or(0, Vec::len);
    let mut m = rows.to_vec();
    rref(&mut m, ncols).len()
}

/// Basis of `{v : rows · v = 0}` in `ncols` unknowns.
pub fn nullspace(rows: &[Vec<Rational>], ncols: usize) -> Vec<Vec<Rational>> {
    let mut m = rows.to_vec();
    let pivots = rref(&mut m, ncols);
    let free: Vec<usize> = (0..ncols).filter(|c| !pivots.contains(c)).collect();
    free.iter()
        .map(|&f| {
            let mut v = vec![Rational::zero(); ncols];
            v[f] = Rational::one();
            for (r, &pc) in pivots.iter().enumerate() {
                v[pc] = -m[r][f].clone();
            }
            v
        })
        .collect()
}
