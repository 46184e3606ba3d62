mod common;

use common::field;
use hopmp_core::dynamics::{integrate_adjoint, integrate_state, transition_matrix};
use hopmp_core::model::ControlAffineSystem;
use hopmp_core::pmp::hamiltonian;
use hopmp_core::symbolic::{enumerate_brackets, lie_bracket};
use hopmp_core::trajectory::{ControlCell, SpaceTimeProcess};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Smooth, genuinely nonlinear drift and controlled fields on R^3.
fn nonlinear_system() -> ControlAffineSystem {
    ControlAffineSystem::new(
        field(&["x2", "-sin(x1) - x2/5", "x1*x2"]),
        vec![field(&["0", "1 + x3^2/4", "cos(x2)"]), field(&["x3", "0", "-x1"])],
    )
    .unwrap()
}

fn nonlinear_cells() -> Vec<ControlCell> {
    vec![
        ControlCell { length: 0.7, w0: 0.5, w: vec![0.3, -0.2] },
        ControlCell { length: 0.4, w0: 0.0, w: vec![-0.6, 0.8] },
        ControlCell { length: 0.9, w0: 1.0, w: vec![0.0, 0.0] },
    ]
}

fn max_err(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn rk4_error_drops_sixteenfold_on_step_halving() {
    let sys = nonlinear_system();
    let x0 = [0.4, -0.3, 0.2];
    let end = |substeps| integrate_state(&sys, nonlinear_cells(), &x0, substeps).unwrap().endpoint().1.to_vec();
    let reference = end(2560);
    let e1 = max_err(&end(8), &reference);
    let e2 = max_err(&end(16), &reference);
    let ratio = e1 / e2;
    assert!((12.0..=20.0).contains(&ratio), "order factor {ratio} ({e1:e} -> {e2:e})");
}

#[test]
fn transition_matrix_reproduces_direct_adjoint() {
    let pr = common::example_problem();
    let cases: Vec<(ControlAffineSystem, SpaceTimeProcess)> = vec![
        (pr.system.clone(), common::bar(&pr, 10)),
        {
            let sys = nonlinear_system();
            let proc = integrate_state(&sys, nonlinear_cells(), &[0.4, -0.3, 0.2], 10).unwrap();
            (sys, proc)
        },
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for (sys, proc) in &cases {
        let tm = transition_matrix(sys, proc).unwrap();
        for _ in 0..10 {
            let pf: Vec<f64> = (0..sys.n()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let direct = integrate_adjoint(sys, proc, &pf).unwrap();
            for (k, p) in direct.covectors.iter().enumerate() {
                let err = max_err(p, &tm.propagate(k, &pf));
                assert!(err < 1e-8, "node {k}: {err:e}");
            }
        }
    }
}

/// `H(y(s), p0, p(s), w0, w)` is a first integral on every control cell.
#[test]
fn hamiltonian_is_constant_on_cells() {
    let pr = common::example_problem();
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let nonlinear = nonlinear_system();
    let cases = [
        (&pr.system, common::bar(&pr, 10)),
        (&pr.system, common::hat(&pr, 10)),
        (&nonlinear, integrate_state(&nonlinear, nonlinear_cells(), &[0.4, -0.3, 0.2], 40).unwrap()),
    ];
    for (sys, proc) in &cases {
        for _ in 0..5 {
            let pf: Vec<f64> = (0..sys.n()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let p0 = rng.gen_range(-1.0..1.0);
            let adj = integrate_adjoint(sys, proc, &pf).unwrap();
            for (c, cell) in proc.cells().iter().enumerate() {
                let hs: Vec<f64> = proc
                    .cell_nodes(c)
                    .map(|k| hamiltonian(sys, &proc.states()[k], p0, &adj.covectors[k], cell.w0, &cell.w).unwrap())
                    .collect();
                let spread = hs.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b))
                    - hs.iter().fold(f64::INFINITY, |a, &b| a.min(b));
                assert!(spread < 1e-7, "cell {c}: spread {spread:e}");
            }
        }
    }
}

/// `d/ds (p·B) = p·[f,B] w0 + Σ p·[g_i,B] w^i` at interior nodes. The grid
/// is fine enough for the central difference to resolve 2e-5.
#[test]
fn bracket_derivative_identity_on_a_nonlinear_system() {
    let sys = nonlinear_system();
    let proc = integrate_state(&sys, nonlinear_cells(), &[0.4, -0.3, 0.2], 200).unwrap();
    let adj = integrate_adjoint(&sys, &proc, &[0.3, -0.7, 0.5]).unwrap();
    for tree in enumerate_brackets(sys.m(), 3) {
        let b = tree.realize(sys.controls()).unwrap();
        let fb = lie_bracket(sys.drift(), &b).unwrap();
        let gb: Vec<_> = sys.controls().iter().map(|g| lie_bracket(g, &b).unwrap()).collect();
        let hb = |k: usize| b.dot(&proc.states()[k], &adj.covectors[k]).unwrap();
        for (c, cell) in proc.cells().iter().enumerate() {
            let range = proc.cell_nodes(c);
            for k in range.start() + 1..*range.end() {
                let (y, p) = (&proc.states()[k], &adj.covectors[k]);
                let h = proc.nodes()[k + 1] - proc.nodes()[k];
                let numeric = (hb(k + 1) - hb(k - 1)) / (2.0 * h);
                let mut exact = fb.dot(y, p).unwrap() * cell.w0;
                for (g, wi) in gb.iter().zip(&cell.w) {
                    exact += g.dot(y, p).unwrap() * wi;
                }
                assert!((numeric - exact).abs() < 2e-5, "{tree} at node {k}: {numeric} vs {exact}");
            }
        }
    }
}
