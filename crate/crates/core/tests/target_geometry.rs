use hopmp_core::model::TargetSet;
use hopmp_core::symbolic::parse_expr;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const N: usize = 3;

/// Central-difference gradient `(∂t, ∂x)` of `e` at `(t, x)`.
fn fd_gradient(e: &hopmp_core::symbolic::Expr, t: f64, x: &[f64]) -> Vec<f64> {
    let h = 1e-6;
    let mut g = vec![(e.eval(t + h, x).unwrap() - e.eval(t - h, x).unwrap()) / (2.0 * h)];
    for j in 0..x.len() {
        let (mut xp, mut xm) = (x.to_vec(), x.to_vec());
        xp[j] += h;
        xm[j] -= h;
        g.push((e.eval(t, &xp).unwrap() - e.eval(t, &xm).unwrap()) / (2.0 * h));
    }
    g
}

#[test]
fn polar_cone_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let shapes = [
        "x1^2 + sin(x2) - t*x3",
        "cos(x1*x2) + x3^2/2",
        "t^2 - x1 + exp(x2)/3",
        "x1*x2*x3 - sqrt(x1^2 + 1)",
    ];
    for _ in 0..25 {
        let t: f64 = rng.gen_range(0.0..2.0);
        let x: Vec<f64> = (0..N).map(|_| rng.gen_range(-1.5..1.5)).collect();
        // shift every shape so that it vanishes at (t, x): all φ active, all ψ satisfied
        let shifted: Vec<_> = shapes
            .iter()
            .map(|s| {
                let e = parse_expr(s, N).unwrap();
                let c = e.eval(t, &x).unwrap();
                (e, c)
            })
            .collect();
        let mk = |(e, c): &(hopmp_core::symbolic::Expr, f64)| {
            parse_expr(&format!("({e}) - ({c:.17})"), N).unwrap()
        };
        let tgt = TargetSet {
            phi: shifted[..2].iter().map(mk).collect(),
            psi: shifted[2..].iter().map(mk).collect(),
        };
        let cone = tgt.polar_cone(t, &x, 1e-9).unwrap();
        assert_eq!(cone.active, [0, 1]);
        let exprs = tgt.phi.iter().chain(&tgt.psi);
        for (gen, e) in cone.nonneg.iter().chain(&cone.free).zip(exprs) {
            let fd = fd_gradient(e, t, &x);
            for (a, b) in gen.iter().zip(&fd) {
                assert!((a - b).abs() <= 1e-6 * a.abs().max(1.0), "{e}: {gen:?} vs {fd:?}");
            }
        }
    }
}
