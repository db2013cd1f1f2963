use proptest::prelude::*;
use tmpinn::evaluation::{aggregate, evaluate, EvalOptions, FnPredictor, GroundTruth, MaeMode, Predictor};
use tmpinn::losses::TaylorSurrogate;
use tmpinn::network::{Activation, Mlp};
use tmpinn::systems::{builtin_system, BUILTIN_NAMES};

fn unit_vec(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..1.0, n)
}

fn lerp(bounds: &[[f64; 2]], u: &[f64]) -> Vec<f64> {
    bounds.iter().zip(u).map(|([lo, hi], u)| lo + (hi - lo) * u).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn surrogate_reproduces_initial_state(
        sys_idx in 0usize..9, order in 1usize..=4, seed in 0u64..1000, u in unit_vec(12),
    ) {
        let sys = builtin_system(BUILTIN_NAMES[sys_idx]).unwrap();
        let n = sys.n_states();
        let x0 = lerp(sys.state_bounds(), &u[..n]);
        let theta = lerp(sys.param_bounds(), &u[n..n + sys.n_params()]);
        let s = TaylorSurrogate::new(&sys, order, seed).unwrap();
        prop_assert_eq!(s.eval(&x0, &theta, 0.0).unwrap(), x0);
    }

    #[test]
    fn surrogate_slope_at_zero_is_the_field(
        order in 2usize..=4, seed in 0u64..1000, u in unit_vec(3),
    ) {
        let sys = builtin_system("duffing").unwrap();
        let x0 = lerp(sys.state_bounds(), &u[..2]);
        let theta = lerp(sys.param_bounds(), &u[2..]);
        let s = TaylorSurrogate::new(&sys, order, seed).unwrap();
        let jets = s.eval_jets(&x0, &theta, 0.0).unwrap();
        let p = sys.full_params(&x0, &theta).unwrap();
        let f = sys.eval_rhs(&x0, &p, 0.0).unwrap();
        for (j, fi) in jets.iter().zip(&f) {
            prop_assert!((j.d1 - fi).abs() <= 1e-12 * fi.abs().max(1.0));
        }
    }

    #[test]
    fn windowed_mae_never_exceeds_rmse(
        errors in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 11), 1..6),
        k in 0usize..11,
    ) {
        let times: Vec<f64> = (0..11).map(|i| i as f64 * 0.1).collect();
        let m = errors.len() as f64;
        let abs: Vec<f64> = (0..11).map(|i| errors.iter().map(|e| e[i].abs()).sum::<f64>() / m).collect();
        let sq: Vec<f64> = (0..11).map(|i| errors.iter().map(|e| e[i] * e[i]).sum::<f64>() / m).collect();
        for mode in [MaeMode::Windowed, MaeMode::Endpoint] {
            let h = aggregate(&times, &abs, &sq, times[k], mode).unwrap();
            prop_assert!(h.mae <= h.rmse * (1.0 + 1e-12) + 1e-300);
        }
    }

    #[test]
    fn checkpoint_round_trip_is_bit_identical(
        inp in 1usize..5, hidden in 1usize..12, out in 1usize..4, seed in any::<u64>(), sin in any::<bool>(),
    ) {
        let act = if sin { Activation::Sin } else { Activation::Tanh };
        let net = Mlp::new(inp, hidden, out, act, seed);
        let text = serde_json::to_string(&net.to_checkpoint()).unwrap();
        let back = Mlp::from_checkpoint(&serde_json::from_str(&text).unwrap()).unwrap();
        prop_assert_eq!(back.params(), net.params());
        prop_assert_eq!(back.activation(), act);
        let x = vec![0.3; inp];
        prop_assert_eq!(back.forward(&x).unwrap(), net.forward(&x).unwrap());
    }
}

#[test]
fn ground_truth_scores_zero_and_offsets_score_their_size() {
    let sys = builtin_system("duffing").unwrap();
    let truth = GroundTruth::default();
    let opts = EvalOptions::new(vec![1.0, 2.0], 3);
    let m = evaluate(&truth, &sys, &EvalOptions { n_eval: 5, ..opts.clone() }).unwrap();
    assert!(m.horizons.iter().all(|h| h.mae == 0.0 && h.rmse == 0.0));

    let shifted = FnPredictor(|x0: &[f64], th: &[f64], ts: &[f64]| {
        let mut v = truth.predict(&sys, x0, th, ts)?;
        v.iter_mut().flatten().for_each(|x| *x += 0.25);
        Ok(v)
    });
    let m = evaluate(&shifted, &sys, &EvalOptions { n_eval: 5, ..opts }).unwrap();
    for h in &m.horizons {
        assert!((h.mae - 0.25).abs() < 1e-12 && (h.rmse - 0.25).abs() < 1e-12);
    }
}
