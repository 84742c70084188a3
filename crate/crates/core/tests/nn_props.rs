mod oracles;

use handsign::nn::{classify_nn, train_nn, Mlp, TrainParams};
use handsign::tokenizer::{Token, TokenSequence};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn flat(net: &Mlp) -> Vec<f64> {
    net.w1.iter().chain(&net.b1).chain(&net.w2).chain(&net.b2).copied().collect()
}

fn random_data(rng: &mut ChaCha8Rng, n: usize, input: usize, output: usize) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let xs = (0..n).map(|_| (0..input).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    let ts = (0..n).map(|_| (0..output).map(|_| rng.gen_range(0.0..1.0)).collect()).collect();
    (xs, ts)
}

#[test]
fn analytic_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for trial in 0..20 {
        let net = Mlp::seeded(4, 3, 2, trial);
        let (xs, ts) = random_data(&mut rng, 5, 4, 2);
        let g = net.mse_gradients(&xs, &ts).unwrap();
        let analytic: Vec<f64> = g.w1.iter().chain(&g.b1).chain(&g.w2).chain(&g.b2).copied().collect();
        let params = flat(&net);
        let (want, got) = (oracles::mlp_mse((4, 3, 2), &params, &xs, &ts), net.mse(&xs, &ts).unwrap());
        assert!((want - got).abs() <= 1e-12 * want, "{want} vs {got}");
        let numeric = oracles::numeric_gradient((4, 3, 2), &params, &xs, &ts, 1e-5);
        for (a, n) in analytic.iter().zip(&numeric) {
            let rel = (a - n).abs() / a.abs().max(n.abs()).max(1e-8);
            assert!(rel <= 1e-4, "analytic {a} numeric {n}");
        }
    }
}

#[test]
fn xor_converges_at_default_settings() {
    let inputs = vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]];
    let targets = vec![vec![0.0], vec![1.0], vec![1.0], vec![0.0]];
    let params = TrainParams::default();
    let mut net = Mlp::seeded(2, params.hidden_width, 1, params.seed);
    let report = net.train(&inputs, &targets, &params).unwrap();
    assert!(report.converged && report.mse < 0.01 && report.epochs <= 2000, "{report:?}");
    for (x, t) in inputs.iter().zip(&targets) {
        assert_eq!(net.forward(x).unwrap()[0] > 0.5, t[0] > 0.5);
    }
}

fn seq(angles: &[f64]) -> TokenSequence {
    TokenSequence::new(angles.iter().map(|a| Token { cos: a.cos(), sin: a.sin() }).collect())
}

#[test]
fn same_seed_gives_identical_weights() {
    let samples = vec![
        (seq(&[0.0, 1.0, 2.0]), "A".to_string()),
        (seq(&[3.0, 2.0, 1.0]), "B".to_string()),
        (seq(&[0.5, 0.5, 0.5]), "C".to_string()),
    ];
    let p = TrainParams { max_epochs: 50, ..TrainParams::default() };
    let (a, ra) = train_nn(&samples, &p).unwrap();
    let (b, rb) = train_nn(&samples, &p).unwrap();
    assert_eq!(a, b);
    assert_eq!(ra, rb);
    assert_eq!(a.label_order, ["A", "B", "C"]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn zero_rate_leaves_weights_bit_identical(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut net = Mlp::seeded(4, 3, 2, seed);
        let before = net.clone();
        let (xs, ts) = random_data(&mut rng, 6, 4, 2);
        net.train_epoch(&xs, &ts, 0.0).unwrap();
        prop_assert_eq!(net, before);
    }

    #[test]
    fn nn_percentages_sum_to_100(seed in any::<u64>(), angles in prop::collection::vec(-3.2f64..3.2, 4)) {
        let samples = vec![(seq(&angles), "X".to_string()), (seq(&[0.0; 4]), "Y".to_string())];
        let p = TrainParams { max_epochs: 3, seed, hidden_width: 5, ..TrainParams::default() };
        let (model, _) = train_nn(&samples, &p).unwrap();
        let r = classify_nn(&model, &seq(&angles)).unwrap();
        prop_assert!((r.total_percentage() - 100.0).abs() <= 1e-6);
        prop_assert!(r.entries().windows(2).all(|w| w[0].percentage >= w[1].percentage));
    }
}
