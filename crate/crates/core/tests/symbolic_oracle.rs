mod common;

use common::{close, duffing_f3_y, hand_f2, hand_rhs, random_point, rng, sir_f2_sign_slip};
use tmpinn::symbolic::eval_vec;
use tmpinn::systems::{builtin_system, BUILTIN_NAMES};

#[test]
fn builtin_right_hand_sides_match_hand_transcription() {
    let mut r = rng(11);
    for name in BUILTIN_NAMES {
        let sys = builtin_system(name).unwrap();
        for _ in 0..20 {
            let (x, _, p) = random_point(&sys, &mut r);
            let got = sys.eval_rhs(&x, &p, 0.0).unwrap();
            let want = hand_rhs(name, &x, &p);
            for (g, w) in got.iter().zip(&want) {
                assert!(close(*g, *w, 1e-13, 1e-15), "{name}: {g} vs {w}");
            }
        }
    }
}

#[test]
fn generated_second_derivatives_match_hand_derivation() {
    let mut r = rng(12);
    for name in ["duffing", "pendulum", "lotka_volterra", "lorenz", "sir"] {
        let sys = builtin_system(name).unwrap();
        let table = sys.lie_table(1).unwrap();
        for _ in 0..100 {
            let (x, _, p) = random_point(&sys, &mut r);
            let got = eval_vec(table.entry(2), &x, &p, 0.0).unwrap();
            for (g, w) in got.iter().zip(hand_f2(name, &x, &p)) {
                assert!(close(*g, w, 1e-10, 1e-12), "{name}: {g} vs {w}");
            }
        }
    }
}

#[test]
fn oracle_rejects_sign_slipped_sir_expression() {
    // Conservation forces S̈ + Ï + R̈ = 0; the slipped first component breaks it.
    let sys = builtin_system("sir").unwrap();
    let table = sys.lie_table(1).unwrap();
    let (x, p) = ([0.6, 0.3, 0.1], [0.8, 0.4, 1.0]);
    let got = eval_vec(table.entry(2), &x, &p, 0.0).unwrap();
    assert!(got.iter().sum::<f64>().abs() < 1e-15);
    let slipped = sir_f2_sign_slip(&x, &p);
    assert!((slipped[0] - got[0]).abs() > 1e-3);
}

#[test]
fn duffing_third_derivative_matches_hand_derivation() {
    let sys = builtin_system("duffing").unwrap();
    let table = sys.lie_table(2).unwrap();
    let mut r = rng(13);
    for _ in 0..100 {
        let (x, _, p) = random_point(&sys, &mut r);
        let f3 = eval_vec(table.entry(3), &x, &p, 0.0).unwrap();
        assert!(close(f3[1], duffing_f3_y(&x, &p), 1e-10, 1e-12));
        // d³x/dt³ = d²y/dt²
        assert!(close(f3[0], hand_f2("duffing", &x, &p)[1], 1e-10, 1e-12));
    }
}

#[test]
fn lie_coefficients_match_derivatives_of_the_flow() {
    // Central differences of a fine RK4 trajectory around t = 0.5 against
    // f₁, f₂ evaluated on the trajectory; tolerances cover the O(h²) stencil error.
    for name in ["lotka_volterra", "duffing", "rikitake"] {
        let sys = builtin_system(name).unwrap();
        let table = sys.lie_table(2).unwrap();
        let (x0, theta, p) = random_point(&sys, &mut rng(14));
        let h = 1e-3;
        let grid = [0.0, 0.5 - h, 0.5, 0.5 + h];
        let traj = tmpinn::solver::integrate(&sys, &x0, &theta, &grid, 1e-4).unwrap();
        let (a, m, b) = (&traj.states[1], &traj.states[2], &traj.states[3]);
        let f1 = eval_vec(table.entry(1), m, &p, 0.5).unwrap();
        let f2 = eval_vec(table.entry(2), m, &p, 0.5).unwrap();
        for i in 0..sys.n_states() {
            let d1 = (b[i] - a[i]) / (2.0 * h);
            let d2 = (b[i] - 2.0 * m[i] + a[i]) / (h * h);
            assert!(close(d1, f1[i], 1e-6, 1e-6), "{name} d1: {d1} vs {}", f1[i]);
            assert!(close(d2, f2[i], 1e-4, 1e-4), "{name} d2: {d2} vs {}", f2[i]);
        }
    }
}

#[test]
fn lotka_volterra_lie_derivative_at_known_point() {
    // ẍ at (x, y) = (0.5, 0.4), (α, β, γ, δ) = (0.8, 0.3, 0.7, 0.2):
    // ẋ = 0.4 − 0.06 = 0.34, ẏ = −0.28 + 0.04 = −0.24,
    // ẍ = (α − βy)ẋ − βx ẏ = 0.68·0.34 + 0.15·0.24 = 0.2672
    let sys = builtin_system("lotka_volterra").unwrap();
    let f2 = eval_vec(sys.lie_table(1).unwrap().entry(2), &[0.5, 0.4], &[0.8, 0.3, 0.7, 0.2], 0.0).unwrap();
    assert!((f2[0] - 0.2672).abs() < 1e-14);
}
