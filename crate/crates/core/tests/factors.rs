mod common;

use common::{lstm_oracle, random_tensor, rng};
use dfgp::factors::{
    fixed_effect, global_factors, init_params, lstm_step, FactorConfig, LstmState, LstmVars,
    ProjectionVars,
};
use dfgp::numeric::{Tape, Tensor};

fn config(d: usize, h: usize, k: usize) -> FactorConfig {
    FactorConfig {
        input_dim: d,
        hidden_dim: h,
        num_factors: k,
        num_series: 4,
    }
}

#[test]
fn matches_scalar_loop_lstm() {
    for seed in 0..10 {
        let (d, h, k, steps) = (3 + seed as usize % 3, 5, 2 + seed as usize % 4, 30);
        let (mut lstm, proj, _) = init_params(seed, &config(d, h, k)).unwrap();
        // Non-trivial biases so every gate slice is exercised.
        lstm.bias = random_tensor(&mut rng(seed + 77), &[1, 4 * h], -1.0, 1.0);
        let x = random_tensor(&mut rng(seed + 99), &[steps, d], -1.0, 1.0);

        let tape = Tape::new();
        let g = global_factors(
            &tape,
            &x,
            &LstmVars::constants(&tape, &lstm),
            &ProjectionVars::constants(&tape, &proj),
        )
        .unwrap()
        .value();
        assert_eq!(g.shape(), &[k, steps]);

        let oracle = lstm_oracle(
            x.data(),
            steps,
            d,
            h,
            lstm.w_input.data(),
            lstm.w_recurrent.data(),
            lstm.bias.data(),
            proj.weight.data(),
            proj.bias.data(),
        );
        for t in 0..steps {
            for j in 0..k {
                assert!((g.at(j, t) - oracle[t][j]).abs() < 1e-12, "seed {seed} t {t} k {j}");
            }
        }
    }
}

#[test]
fn unrolled_steps_equal_global_factors() {
    let (d, h, k, steps) = (4, 6, 3, 25);
    let (lstm, proj, _) = init_params(5, &config(d, h, k)).unwrap();
    let x = random_tensor(&mut rng(6), &[steps, d], -1.0, 1.0);
    let tape = Tape::new();
    let lv = LstmVars::constants(&tape, &lstm);
    let pv = ProjectionVars::constants(&tape, &proj);
    let g = global_factors(&tape, &x, &lv, &pv).unwrap().value();

    let mut state = LstmState::zeros(&tape, h);
    for t in 0..steps {
        let row = Tensor::matrix(1, d, x.data()[t * d..(t + 1) * d].to_vec()).unwrap();
        state = lstm_step(state, tape.constant(row), &lv).unwrap();
        let out = state.hidden.matmul(pv.weight).unwrap().add(pv.bias).unwrap().value();
        for j in 0..k {
            assert_eq!(out.data()[j].to_bits(), g.at(j, t).to_bits());
        }
    }
}

#[test]
fn fixed_effect_is_linear_in_loadings() {
    let tape = Tape::new();
    let g = tape.constant(random_tensor(&mut rng(1), &[4, 12], -2.0, 2.0));
    let w1 = random_tensor(&mut rng(2), &[4], -1.0, 1.0);
    let w2 = random_tensor(&mut rng(3), &[4], -1.0, 1.0);
    let (a, b) = (1.5, -0.25);
    let combined = w1.zip_map(&w2, |x, y| a * x + b * y).unwrap();
    let f = |w: &Tensor| fixed_effect(tape.constant(w.clone()), g).unwrap().value();
    let (f1, f2, fc) = (f(&w1), f(&w2), f(&combined));
    for t in 0..12 {
        let expected = a * f1.data()[t] + b * f2.data()[t];
        assert!((fc.data()[t] - expected).abs() < 1e-12);
    }
}

#[test]
fn factors_do_not_depend_on_series() {
    // Only the covariates feed the LSTM; two tables with different loadings
    // and series counts produce identical factors.
    let (lstm, proj, _) = init_params(9, &config(3, 4, 2)).unwrap();
    let (_, _, other) = init_params(10, &FactorConfig { num_series: 7, ..config(3, 4, 2) }).unwrap();
    assert_eq!(other.num_series(), 7);
    let x = random_tensor(&mut rng(4), &[10, 3], -1.0, 1.0);
    let run = || {
        let tape = Tape::new();
        global_factors(
            &tape,
            &x,
            &LstmVars::constants(&tape, &lstm),
            &ProjectionVars::constants(&tape, &proj),
        )
        .unwrap()
        .value()
    };
    assert_eq!(run(), run());
}

#[test]
fn embedding_spread_follows_factor_count() {
    let k = 10;
    let (_, _, emb) = init_params(0, &FactorConfig { num_series: 2000, ..config(3, 4, k) }).unwrap();
    let w = emb.weights.data();
    let mean = w.iter().sum::<f64>() / w.len() as f64;
    let sd = (w.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / w.len() as f64).sqrt();
    assert!((sd - 1.0 / (k as f64).sqrt()).abs() < 0.01, "sd {sd}");
    assert!(mean.abs() < 0.01);
}
