#![allow(dead_code)]

use hopmp_core::dynamics::integrate_state;
use hopmp_core::model::{ControlAffineSystem, CostFunction, Problem, TargetSet};
use hopmp_core::symbolic::{parse_expr, VectorField};
use hopmp_core::trajectory::{ControlCell, SpaceTimeProcess};

pub fn field(src: &[&str]) -> VectorField {
    VectorField::new(src.iter().map(|s| parse_expr(s, src.len()).unwrap()).collect()).unwrap()
}

/// Five-state example with a quadratic running cost carried by `x4`.
pub fn example_problem() -> Problem {
    let p = |s| parse_expr(s, 5).unwrap();
    let sys = ControlAffineSystem::new(
        field(&["0", "0", "0", "1/2*(x2^2 + x3^2 + (1 - x1 - x5)^2)", "1"]),
        vec![field(&["1", "0", "-1/2*x2^2", "0", "0"]), field(&["0", "1", "0", "0", "0"])],
    )
    .unwrap();
    Problem::new(
        sys,
        vec![1.0, 0.0, 0.0, 0.0, 0.0],
        TargetSet {
            phi: vec![p("-x3 - 1")],
            psi: vec![p("t - 1"), p("x1"), p("x2")],
        },
        CostFunction { expr: p("x3 + x4") },
    )
    .unwrap()
}

pub fn hat_cell() -> ControlCell {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    ControlCell {
        length: std::f64::consts::SQRT_2,
        w0: r,
        w: vec![-r, 0.0],
    }
}

pub fn bar_cells() -> Vec<ControlCell> {
    let c = 2f64.cbrt();
    let cell = |w: [f64; 2]| ControlCell { length: c, w0: 0.0, w: w.to_vec() };
    vec![hat_cell(), cell([-1.0, 0.0]), cell([0.0, -1.0]), cell([1.0, 0.0]), cell([0.0, 1.0])]
}

pub fn hat(problem: &Problem, substeps: usize) -> SpaceTimeProcess {
    integrate_state(&problem.system, vec![hat_cell()], &problem.initial_state, substeps).unwrap()
}

pub fn bar(problem: &Problem, substeps: usize) -> SpaceTimeProcess {
    integrate_state(&problem.system, bar_cells(), &problem.initial_state, substeps).unwrap()
}
