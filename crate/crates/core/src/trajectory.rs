//! Strict-sense and space-time processes, the L¹ functional ν, the
//! reparameterization maps between them, and the uniform graph distance.
//!
//! Controls are piecewise constant on cells of arbitrary length; each cell is
//! split into `substeps` equal integration steps, so node `c * substeps` is
//! the left end of cell `c`.

use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance for `w0 + |w| = 1` and for the reparameterization bookkeeping.
pub const W_TOL: f64 = 1e-9;

pub const DEFAULT_W0_MIN: f64 = 1e-9;

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|c| c * c).sum::<f64>().sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrictCell {
    pub duration: f64,
    pub u: Vec<f64>,
}

/// One cell of a space-time control.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlCell {
    pub length: f64,
    pub w0: f64,
    pub w: Vec<f64>,
}

impl ControlCell {
    /// `w0 + |w|`; equals 1 for controls in 𝒲. Any other positive value is a
    /// constant rescaling of pseudo-time on this cell.
    pub fn speed(&self) -> f64 {
        self.w0 + norm(&self.w)
    }

    /// The control scaled back onto 𝒲.
    pub fn normalized(&self) -> (f64, Vec<f64>) {
        let r = self.speed();
        (self.w0 / r, self.w.iter().map(|c| c / r).collect())
    }

    pub fn in_w(&self) -> bool {
        (self.speed() - 1.0).abs() <= W_TOL
    }
}

fn node_range(cell: usize, substeps: usize) -> RangeInclusive<usize> {
    cell * substeps..=(cell + 1) * substeps
}

fn cumulative_nodes(lengths: impl Iterator<Item = f64>, substeps: usize) -> Vec<f64> {
    let mut nodes = vec![0.0];
    let mut start = 0.0;
    for len in lengths {
        let h = len / substeps as f64;
        for k in 1..=substeps {
            nodes.push(if k == substeps { start + len } else { start + k as f64 * h });
        }
        start += len;
    }
    nodes
}

pub(crate) fn check_substeps(substeps: usize) -> Result<()> {
    if substeps == 0 {
        return Err(Error::Invalid("substeps must be at least 1".into()));
    }
    Ok(())
}

/// Strict-sense process `(T, u, x)` sampled at the integration nodes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrictProcess {
    cells: Vec<StrictCell>,
    substeps: usize,
    times: Vec<f64>,
    states: Vec<Vec<f64>>,
}

impl StrictProcess {
    pub fn from_parts(
        cells: Vec<StrictCell>,
        substeps: usize,
        states: Vec<Vec<f64>>,
    ) -> Result<Self> {
        check_substeps(substeps)?;
        if cells.is_empty() {
            return Err(Error::Invalid("a process needs at least one cell".into()));
        }
        let m = cells[0].u.len();
        for (i, c) in cells.iter().enumerate() {
            if !(c.duration > 0.0) || !c.duration.is_finite() {
                return Err(Error::Invalid(format!("cell {i} has non-positive duration")));
            }
            if c.u.len() != m {
                return Err(Error::Dimension { expected: m, got: c.u.len() });
            }
            if c.u.iter().any(|v| !v.is_finite()) {
                return Err(Error::Invalid(format!("cell {i} has a non-finite control")));
            }
        }
        let times = cumulative_nodes(cells.iter().map(|c| c.duration), substeps);
        if states.len() != times.len() {
            return Err(Error::Dimension {
                expected: times.len(),
                got: states.len(),
            });
        }
        Ok(StrictProcess {
            cells,
            substeps,
            times,
            states,
        })
    }

    pub fn cells(&self) -> &[StrictCell] {
        &self.cells
    }

    pub fn substeps(&self) -> usize {
        self.substeps
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[Vec<f64>] {
        &self.states
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().expect("non-empty grid")
    }

    pub fn endpoint(&self) -> (f64, &[f64]) {
        (self.horizon(), self.states.last().expect("non-empty grid"))
    }

    /// ν[u] at every node.
    pub fn nu_samples(&self) -> Vec<f64> {
        let mut out = vec![0.0];
        let mut acc = 0.0;
        for c in &self.cells {
            let rate = norm(&c.u);
            let h = c.duration / self.substeps as f64;
            for _ in 0..self.substeps {
                acc += rate * h;
                out.push(acc);
            }
        }
        out
    }

    /// `(T, t ↦ (x(t), ν[u](t)))`, the object compared by the graph distance.
    pub fn graph(&self) -> ProcessDistanceInput {
        let nu = self.nu_samples();
        ProcessDistanceInput {
            horizon: self.horizon(),
            times: self.times.clone(),
            values: self
                .states
                .iter()
                .zip(nu)
                .map(|(x, v)| {
                    let mut z = x.clone();
                    z.push(v);
                    z
                })
                .collect(),
        }
    }
}

/// `ν[u](t) = ∫_0^t |u(τ)| dτ` for a piecewise-constant control.
pub fn nu(cells: &[StrictCell], t: f64) -> Result<f64> {
    let horizon: f64 = cells.iter().map(|c| c.duration).sum();
    if t < 0.0 || t > horizon * (1.0 + 1e-12) + 1e-15 {
        return Err(Error::Range { value: t, horizon });
    }
    let mut acc = 0.0;
    let mut start = 0.0;
    for c in cells {
        if t <= start {
            break;
        }
        let overlap = (t - start).min(c.duration);
        acc += norm(&c.u) * overlap;
        start += c.duration;
    }
    Ok(acc)
}

/// Space-time process `(S, w0, w, y0, y)` sampled at the integration nodes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimeProcess {
    cells: Vec<ControlCell>,
    substeps: usize,
    nodes: Vec<f64>,
    clock: Vec<f64>,
    states: Vec<Vec<f64>>,
}

impl SpaceTimeProcess {
    /// Validates controls (w0 ≥ 0, positive speed) and grid sizes. `clock`
    /// is y0 and `states` is y, both sampled at the nodes.
    pub fn from_parts(
        cells: Vec<ControlCell>,
        substeps: usize,
        clock: Vec<f64>,
        states: Vec<Vec<f64>>,
    ) -> Result<Self> {
        validate_controls(&cells)?;
        check_substeps(substeps)?;
        let nodes = cumulative_nodes(cells.iter().map(|c| c.length), substeps);
        for (what, len) in [("clock", clock.len()), ("states", states.len())] {
            if len != nodes.len() {
                return Err(Error::Invalid(format!(
                    "{what} has {len} samples, grid has {} nodes",
                    nodes.len()
                )));
            }
        }
        if clock[0] != 0.0 {
            return Err(Error::Invalid("y0(0) must be 0".into()));
        }
        if clock.windows(2).any(|w| w[1] < w[0] - W_TOL) {
            return Err(Error::Invalid("y0 must be nondecreasing".into()));
        }
        Ok(SpaceTimeProcess {
            cells,
            substeps,
            nodes,
            clock,
            states,
        })
    }

    pub fn cells(&self) -> &[ControlCell] {
        &self.cells
    }

    pub fn substeps(&self) -> usize {
        self.substeps
    }

    /// Pseudo-time nodes.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// y0 at the nodes.
    pub fn clock(&self) -> &[f64] {
        &self.clock
    }

    /// y at the nodes.
    pub fn states(&self) -> &[Vec<f64>] {
        &self.states
    }

    pub fn horizon(&self) -> f64 {
        *self.nodes.last().expect("non-empty grid")
    }

    /// `(y0(S), y(S))`.
    pub fn endpoint(&self) -> (f64, &[f64]) {
        (
            *self.clock.last().expect("non-empty grid"),
            self.states.last().expect("non-empty grid"),
        )
    }

    /// Node indices covered by the closure of `cell`.
    pub fn cell_nodes(&self, cell: usize) -> RangeInclusive<usize> {
        node_range(cell, self.substeps)
    }

    /// Cell owning the step `[node k, node k+1]`.
    pub fn cell_of_step(&self, k: usize) -> usize {
        k / self.substeps
    }

    /// Cells whose speed differs from 1.
    pub fn rescaled_cells(&self) -> Vec<usize> {
        (0..self.cells.len()).filter(|&c| !self.cells[c].in_w()).collect()
    }

    /// `(y0(S), s ↦ (y(s), ν[w](s)))`.
    pub fn graph(&self) -> ProcessDistanceInput {
        let mut values = Vec::with_capacity(self.nodes.len());
        let mut acc = 0.0;
        values.push({
            let mut z = self.states[0].clone();
            z.push(0.0);
            z
        });
        for k in 0..self.nodes.len() - 1 {
            let c = &self.cells[self.cell_of_step(k)];
            acc += norm(&c.w) * (self.nodes[k + 1] - self.nodes[k]);
            let mut z = self.states[k + 1].clone();
            z.push(acc);
            values.push(z);
        }
        ProcessDistanceInput {
            horizon: self.horizon(),
            times: self.nodes.clone(),
            values,
        }
    }
}

pub(crate) fn validate_controls(cells: &[ControlCell]) -> Result<()> {
    if cells.is_empty() {
        return Err(Error::Invalid("a process needs at least one cell".into()));
    }
    let m = cells[0].w.len();
    for (i, c) in cells.iter().enumerate() {
        if c.w.len() != m {
            return Err(Error::Dimension { expected: m, got: c.w.len() });
        }
        if !(c.length > 0.0) || !c.length.is_finite() {
            return Err(Error::Invalid(format!("cell {i} has non-positive length")));
        }
        if !c.w0.is_finite() || c.w.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid(format!("cell {i} has a non-finite control")));
        }
        if c.w0 < -W_TOL {
            return Err(Error::Invalid(format!("cell {i} has w0 = {} < 0", c.w0)));
        }
        if c.speed() <= W_TOL {
            return Err(Error::Invalid(format!("cell {i} has w0 + |w| = 0")));
        }
    }
    Ok(())
}

/// Graph-completion embedding of a strict-sense process: the cell of
/// duration `dt` with control `u` becomes a cell of length `(1+|u|) dt` with
/// `w0 = 1/(1+|u|)`, `w = u/(1+|u|)`. Node samples carry over unchanged.
pub fn embed(sp: &StrictProcess) -> SpaceTimeProcess {
    let cells: Vec<ControlCell> = sp
        .cells
        .iter()
        .map(|c| {
            let r = 1.0 + norm(&c.u);
            ControlCell {
                length: r * c.duration,
                w0: 1.0 / r,
                w: c.u.iter().map(|v| v / r).collect(),
            }
        })
        .collect();
    let nodes = cumulative_nodes(cells.iter().map(|c| c.length), sp.substeps);
    SpaceTimeProcess {
        cells,
        substeps: sp.substeps,
        nodes,
        clock: sp.times.clone(),
        states: sp.states.clone(),
    }
}

/// Inverse of [`embed`]: `T = y0(S)`, `x(t) = y(σ(t))`, `u = w/w0` cellwise.
/// Fails when a cell has `w0 < w0_min`, i.e. the process jumps there.
pub fn project(ep: &SpaceTimeProcess, w0_min: f64) -> Result<StrictProcess> {
    let impulsive: Vec<usize> = (0..ep.cells.len())
        .filter(|&c| ep.cells[c].w0 < w0_min)
        .collect();
    if !impulsive.is_empty() {
        return Err(Error::ImpulsiveProcess {
            cells: impulsive,
            w0_min,
        });
    }
    let cells: Vec<StrictCell> = ep
        .cells
        .iter()
        .map(|c| StrictCell {
            duration: c.w0 * c.length,
            u: c.w.iter().map(|v| v / c.w0).collect(),
        })
        .collect();
    let times = cumulative_nodes(cells.iter().map(|c| c.duration), ep.substeps);
    Ok(StrictProcess {
        cells,
        substeps: ep.substeps,
        times,
        states: ep.states.clone(),
    })
}

/// A sampled continuous path `z : [0, τ] → R^q`, linearly interpolated
/// between samples and extended as a constant past `τ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProcessDistanceInput {
    pub horizon: f64,
    pub times: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

impl ProcessDistanceInput {
    fn dim(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }

    fn at(&self, t: f64) -> Vec<f64> {
        let last = self.times.len() - 1;
        if t >= self.times[last] {
            return self.values[last].clone();
        }
        if t <= self.times[0] {
            return self.values[0].clone();
        }
        let k = self.times.partition_point(|&s| s <= t) - 1;
        let (t0, t1) = (self.times[k], self.times[k + 1]);
        let a = if t1 > t0 { (t - t0) / (t1 - t0) } else { 0.0 };
        self.values[k]
            .iter()
            .zip(&self.values[k + 1])
            .map(|(u, v)| u + a * (v - u))
            .collect()
    }
}

/// `|τ1 − τ2| + sup_t |z̃1(t) − z̃2(t)|`, the sup taken over the union of
/// both sample grids.
pub fn process_distance(a: &ProcessDistanceInput, b: &ProcessDistanceInput) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::Dimension {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    for p in [a, b] {
        if p.times.is_empty() || p.times.len() != p.values.len() || !(p.horizon > 0.0) {
            return Err(Error::Invalid("malformed sampled path".into()));
        }
    }
    let mut sup: f64 = 0.0;
    for &t in a.times.iter().chain(&b.times) {
        let (za, zb) = (a.at(t), b.at(t));
        let d = za
            .iter()
            .zip(&zb)
            .map(|(u, v)| (u - v) * (u - v))
            .sum::<f64>()
            .sqrt();
        sup = sup.max(d);
    }
    Ok((a.horizon - b.horizon).abs() + sup)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cells(spec: &[(f64, &[f64])]) -> Vec<StrictCell> {
        spec.iter()
            .map(|(d, u)| StrictCell {
                duration: *d,
                u: u.to_vec(),
            })
            .collect()
    }

    #[test]
    fn nu_closed_form() {
        let zero = cells(&[(1.0, &[0.0, 0.0])]);
        for t in [0.0, 0.3, 1.0] {
            assert_eq!(nu(&zero, t).unwrap(), 0.0);
        }
        let one = cells(&[(1.0, &[1.0, 0.0])]);
        assert_eq!(nu(&one, 0.5).unwrap(), 0.5);
        let two = cells(&[(0.5, &[-1.0, 0.0]), (0.5, &[0.0, 2.0])]);
        assert_eq!(nu(&two, 1.0).unwrap(), 1.5);
        assert!(matches!(nu(&two, 1.5), Err(Error::Range { .. })));
        assert!(nu(&two, -0.1).is_err());
    }

    fn constant_states(n_nodes: usize) -> Vec<Vec<f64>> {
        (0..n_nodes).map(|k| vec![k as f64]).collect()
    }

    #[test]
    fn embed_zero_control_is_identity() {
        let sp = StrictProcess::from_parts(cells(&[(1.0, &[0.0, 0.0])]), 4, constant_states(5)).unwrap();
        let ep = embed(&sp);
        assert_eq!(ep.horizon(), 1.0);
        assert!(ep.cells().iter().all(|c| c.w0 == 1.0 && c.w == [0.0, 0.0]));
        assert_eq!(ep.clock(), ep.nodes());
    }

    #[test]
    fn embed_unit_control() {
        let sp = StrictProcess::from_parts(cells(&[(1.0, &[-1.0, 0.0])]), 2, constant_states(3)).unwrap();
        let ep = embed(&sp);
        assert_eq!(ep.horizon(), 2.0);
        assert_eq!(ep.cells()[0].w0, 0.5);
        assert_eq!(ep.cells()[0].w, [-0.5, 0.0]);
        assert_eq!(ep.clock(), &[0.0, 0.5, 1.0]);
    }

    #[test]
    fn embed_alternating_cells() {
        let sp = StrictProcess::from_parts(
            cells(&[(0.5, &[0.0, 0.0]), (0.5, &[0.0, 1.0])]),
            1,
            constant_states(3),
        )
        .unwrap();
        let ep = embed(&sp);
        assert!((ep.horizon() - 1.5).abs() < 1e-15);
        assert_eq!(ep.cells()[0].w0, 1.0);
        assert_eq!(ep.cells()[1].w0, 0.5);
        for c in ep.cells() {
            assert!(c.in_w());
        }
    }

    #[test]
    fn project_rescaled_half_control() {
        let ep = SpaceTimeProcess::from_parts(
            vec![ControlCell {
                length: 2.0,
                w0: 0.5,
                w: vec![0.5, 0.0],
            }],
            2,
            vec![0.0, 0.5, 1.0],
            constant_states(3),
        )
        .unwrap();
        let sp = project(&ep, DEFAULT_W0_MIN).unwrap();
        assert_eq!(sp.horizon(), 1.0);
        assert_eq!(sp.cells()[0].u, [1.0, 0.0]);
    }

    #[test]
    fn project_rejects_impulsive_cells() {
        let mk = |w0: f64, w: f64| ControlCell {
            length: 1.0,
            w0,
            w: vec![w],
        };
        let ep = SpaceTimeProcess::from_parts(
            vec![mk(0.5, 0.5), mk(0.0, -1.0), mk(0.0, 1.0)],
            1,
            vec![0.0, 0.5, 0.5, 0.5],
            constant_states(4),
        )
        .unwrap();
        match project(&ep, DEFAULT_W0_MIN) {
            Err(Error::ImpulsiveProcess { cells, .. }) => assert_eq!(cells, [1, 2]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn distance_examples() {
        let path = |tau: f64, f: &dyn Fn(f64) -> f64| {
            let times: Vec<f64> = (0..=10).map(|k| tau * k as f64 / 10.0).collect();
            ProcessDistanceInput {
                horizon: tau,
                values: times.iter().map(|&t| vec![f(t)]).collect(),
                times,
            }
        };
        let a = path(1.0, &|t| t);
        assert_eq!(process_distance(&a, &a).unwrap(), 0.0);
        let z1 = path(1.0, &|_| 0.0);
        let z2 = path(2.0, &|_| 0.0);
        assert_eq!(process_distance(&z1, &z2).unwrap(), 1.0);
        let b = path(1.0, &|t| t + 0.3);
        assert!((process_distance(&a, &b).unwrap() - 0.3).abs() < 1e-15);

        let q2 = ProcessDistanceInput {
            horizon: 1.0,
            times: vec![0.0, 1.0],
            values: vec![vec![0.0, 0.0], vec![0.0, 0.0]],
        };
        assert!(matches!(process_distance(&a, &q2), Err(Error::Dimension { .. })));
    }

    #[test]
    fn rejects_bad_controls() {
        let bad = vec![ControlCell {
            length: 1.0,
            w0: -0.5,
            w: vec![0.5],
        }];
        assert!(SpaceTimeProcess::from_parts(bad, 1, vec![0.0, 0.0], constant_states(2)).is_err());
        let zero = vec![ControlCell {
            length: 1.0,
            w0: 0.0,
            w: vec![0.0],
        }];
        assert!(SpaceTimeProcess::from_parts(zero, 1, vec![0.0, 0.0], constant_states(2)).is_err());
    }
}
