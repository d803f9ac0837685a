mod common;

use common::{random_tensor, rng};
use dfgp::factors::{fixed_effect, global_factors, init_params, FactorConfig, LstmVars, ProjectionVars};
use dfgp::gp::{gp_nll, nll_on_tape, KernelParams};
use dfgp::numeric::{finite_difference_gradient, relative_error, Tape, Tensor, Var};
use dfgp::Result;

const STEP: f64 = 1e-5;
const SEEDS: u64 = 20;

type Op = for<'t> fn(&[Var<'t>]) -> Result<Var<'t>>;

/// Max relative error between tape and central-difference gradients of
/// `Σ c ⊙ op(inputs)` for a fixed random weighting `c`.
fn check(seed: u64, inputs: &[Tensor], op: Op) -> f64 {
    let weights = {
        let tape = Tape::new();
        let vars: Vec<Var> = inputs.iter().map(|t| tape.constant(t.clone())).collect();
        let shape = op(&vars).unwrap().shape();
        random_tensor(&mut rng(seed ^ 0xabcd), &shape, -1.0, 1.0)
    };
    let loss = |xs: &[Tensor]| -> Result<f64> {
        let tape = Tape::new();
        let vars: Vec<Var> = xs.iter().map(|t| tape.constant(t.clone())).collect();
        op(&vars)?.mul(tape.constant(weights.clone()))?.sum()?.item()
    };
    let tape = Tape::new();
    let leaves: Vec<Var> = inputs.iter().map(|t| tape.leaf(t.clone())).collect();
    let out = op(&leaves).unwrap().mul(tape.constant(weights.clone())).unwrap().sum().unwrap();
    let grads = tape.backward(out).unwrap();
    let mut worst = 0.0f64;
    for (j, leaf) in leaves.iter().enumerate() {
        let numeric = finite_difference_gradient(
            |x| {
                let mut xs = inputs.to_vec();
                xs[j] = x.clone();
                loss(&xs)
            },
            &inputs[j],
            STEP,
        )
        .unwrap();
        worst = worst.max(relative_error(&grads.wrt(*leaf), &numeric));
    }
    worst
}

fn over_seeds(name: &str, shapes: &[&[usize]], lo: f64, hi: f64, op: Op) {
    for seed in 0..SEEDS {
        let mut r = rng(seed);
        let inputs: Vec<Tensor> = shapes.iter().map(|s| random_tensor(&mut r, s, lo, hi)).collect();
        let err = check(seed, &inputs, op);
        assert!(err < 1e-4, "{name} seed {seed}: relative error {err:e}");
    }
}

#[test]
fn elementwise_primitives() {
    over_seeds("add", &[&[3, 4], &[3, 4]], -2.0, 2.0, |v| v[0].add(v[1]));
    over_seeds("sub", &[&[3, 4], &[3, 4]], -2.0, 2.0, |v| v[0].sub(v[1]));
    over_seeds("mul", &[&[3, 4], &[3, 4]], -2.0, 2.0, |v| v[0].mul(v[1]));
    over_seeds("scale", &[&[5]], -2.0, 2.0, |v| v[0].scale(-1.7));
    over_seeds("tanh", &[&[2, 6]], -3.0, 3.0, |v| v[0].tanh());
    over_seeds("sigmoid", &[&[2, 6]], -4.0, 4.0, |v| v[0].sigmoid());
    over_seeds("exp", &[&[7]], -2.0, 2.0, |v| v[0].exp());
    over_seeds("log", &[&[7]], 0.2, 3.0, |v| v[0].log());
    over_seeds("softplus", &[&[7]], -4.0, 4.0, |v| v[0].softplus());
}

#[test]
fn reductions_and_layout_primitives() {
    over_seeds("matmul", &[&[3, 4], &[4, 2]], -1.0, 1.0, |v| v[0].matmul(v[1]));
    over_seeds("sum", &[&[3, 4]], -1.0, 1.0, |v| v[0].sum());
    over_seeds("mean", &[&[3, 4]], -1.0, 1.0, |v| v[0].mean());
    over_seeds("slice", &[&[4, 5]], -1.0, 1.0, |v| v[0].slice(1, 1, 3));
    over_seeds("transpose", &[&[3, 4]], -1.0, 1.0, |v| v[0].transpose());
    over_seeds("reshape", &[&[3, 4]], -1.0, 1.0, |v| v[0].reshape(&[2, 6]));
    over_seeds("tile_rows", &[&[1, 4]], -1.0, 1.0, |v| v[0].tile_rows(3));
    over_seeds("gather_rows", &[&[4, 3]], -1.0, 1.0, |v| v[0].gather_rows(&[2, 0, 2]));
    over_seeds("softmax_rows", &[&[3, 5]], -2.0, 2.0, |v| v[0].softmax_rows());
    over_seeds("concat", &[&[2, 3], &[1, 3]], -1.0, 1.0, |v| Var::concat(&[v[0], v[1]], 0));
}

#[test]
fn tanh_on_large_matrix() {
    let x = random_tensor(&mut rng(7), &[40, 50], -3.0, 3.0);
    let err = check(7, &[x], |v| v[0].tanh());
    assert!(err < 1e-6, "relative error {err:e}");
}

#[test]
fn three_layer_composition() {
    fn net<'t>(v: &[Var<'t>]) -> Result<Var<'t>> {
        let h1 = v[0].matmul(v[1])?.add(v[2])?.tanh()?;
        let h2 = h1.matmul(v[3])?.sigmoid()?;
        h2.matmul(v[4])?.softplus()
    }
    over_seeds(
        "mlp",
        &[&[5, 4], &[4, 6], &[5, 6], &[6, 3], &[3, 2]],
        -1.0,
        1.0,
        net,
    );
}

fn f(v: Var<'_>) -> Result<Var<'_>> {
    v.tanh()?.sum()
}

fn g(v: Var<'_>) -> Result<Var<'_>> {
    v.exp()?.mul(v)?.sum()
}

#[test]
fn backward_is_linear() {
    for seed in 0..SEEDS {
        let x = random_tensor(&mut rng(seed), &[3, 3], -1.0, 1.0);
        let (a, b) = (0.7, -2.3);
        let grad_of = |which: u8| {
            let tape = Tape::new();
            let v = tape.leaf(x.clone());
            let loss = match which {
                0 => f(v).unwrap(),
                1 => g(v).unwrap(),
                _ => f(v).unwrap().scale(a).unwrap().add(g(v).unwrap().scale(b).unwrap()).unwrap(),
            };
            tape.backward(loss).unwrap().wrt(v)
        };
        let (gf, gg, gc) = (grad_of(0), grad_of(1), grad_of(2));
        for j in 0..x.len() {
            let expected = a * gf.data()[j] + b * gg.data()[j];
            assert!((gc.data()[j] - expected).abs() < 1e-12 * (1.0 + expected.abs()));
        }
    }
}

#[test]
fn repeated_runs_are_bit_identical() {
    let run = || {
        let x = random_tensor(&mut rng(3), &[4, 4], -1.0, 1.0);
        let tape = Tape::new();
        let v = tape.leaf(x);
        let loss = v.matmul(v).unwrap().tanh().unwrap().softmax_rows().unwrap().log().unwrap().sum().unwrap();
        let value = loss.item().unwrap();
        (value.to_bits(), tape.backward(loss).unwrap().wrt(v).data().iter().map(|g| g.to_bits()).collect::<Vec<_>>())
    };
    assert_eq!(run(), run());
}

#[test]
fn leaf_used_twice_accumulates() {
    let tape = Tape::new();
    let x = tape.leaf(Tensor::scalar(0.3));
    let y = x.add(x).unwrap();
    assert_eq!(tape.backward(y).unwrap().wrt(x).item().unwrap(), 2.0);
}

fn random_gp(seed: u64) -> (Vec<f64>, Vec<f64>, [f64; 3]) {
    let mut r = rng(seed);
    let n = 6 + (seed as usize % 10);
    let mut x = common::uniform(&mut r, n, 0.0, 1.0);
    x.sort_by(f64::total_cmp);
    let res = common::uniform(&mut r, n, -1.5, 1.5);
    let logs = [
        common::uniform(&mut r, 1, -1.0, 0.7)[0],
        common::uniform(&mut r, 1, -2.5, -0.5)[0],
        common::uniform(&mut r, 1, -2.0, -0.3)[0],
    ];
    (x, res, logs)
}

#[test]
fn gp_nll_gradients_match_differences() {
    for seed in 0..SEEDS {
        let (x, res, logs) = random_gp(seed);
        let nll = gp_nll(&res, &x, &KernelParams::from_logs(logs)).unwrap();

        let r0 = Tensor::vector(res.clone());
        let numeric_r = finite_difference_gradient(
            |r| Ok(gp_nll(r.data(), &x, &KernelParams::from_logs(logs))?.value),
            &r0,
            STEP,
        )
        .unwrap();
        let err_r = relative_error(&Tensor::vector(nll.d_residuals.clone()), &numeric_r);
        assert!(err_r < 1e-4, "seed {seed} residuals: {err_r:e}");

        let p0 = Tensor::vector(logs.to_vec());
        let numeric_p = finite_difference_gradient(
            |p| {
                let l = [p.data()[0], p.data()[1], p.data()[2]];
                Ok(gp_nll(&res, &x, &KernelParams::from_logs(l))?.value)
            },
            &p0,
            STEP,
        )
        .unwrap();
        let err_p = relative_error(&Tensor::vector(nll.d_log_params.to_vec()), &numeric_p);
        assert!(err_p < 1e-4, "seed {seed} hyperparameters: {err_p:e}");
    }
}

#[test]
fn gp_node_on_tape_matches_differences() {
    for seed in 0..SEEDS {
        let (x, res, logs) = random_gp(seed);
        let inputs = [Tensor::vector(res), Tensor::vector(logs.to_vec())];
        let tape = Tape::new();
        let r = tape.leaf(inputs[0].clone());
        let p = tape.leaf(inputs[1].clone());
        let loss = nll_on_tape(&tape, r.scale(2.0).unwrap(), p, &x).unwrap();
        let grads = tape.backward(loss).unwrap();
        for (j, leaf) in [r, p].iter().enumerate() {
            let numeric = finite_difference_gradient(
                |t| {
                    let mut xs = inputs.clone();
                    xs[j] = t.clone();
                    let l = [xs[1].data()[0], xs[1].data()[1], xs[1].data()[2]];
                    let doubled: Vec<f64> = xs[0].data().iter().map(|v| 2.0 * v).collect();
                    Ok(gp_nll(&doubled, &x, &KernelParams::from_logs(l))?.value)
                },
                &inputs[j],
                STEP,
            )
            .unwrap();
            let err = relative_error(&grads.wrt(*leaf), &numeric);
            assert!(err < 1e-4, "seed {seed} input {j}: {err:e}");
        }
    }
}

#[test]
fn every_factor_parameter_receives_gradient() {
    let config = FactorConfig {
        input_dim: 3,
        hidden_dim: 4,
        num_factors: 2,
        num_series: 3,
    };
    let (lstm, proj, emb) = init_params(11, &config).unwrap();
    let covariates = random_tensor(&mut rng(12), &[6, 3], -1.0, 1.0);
    let target = random_tensor(&mut rng(13), &[6], -1.0, 1.0);
    let tape = Tape::new();
    let lv = LstmVars::leaves(&tape, &lstm);
    let pv = ProjectionVars::leaves(&tape, &proj);
    let w = tape.leaf(emb.weights.clone());
    let g = global_factors(&tape, &covariates, &lv, &pv).unwrap();
    let mut loss = None;
    for i in 0..3 {
        let f = fixed_effect(w.slice(0, i, 1).unwrap(), g).unwrap();
        let diff = f.sub(tape.constant(target.clone())).unwrap();
        let term = diff.mul(diff).unwrap().sum().unwrap();
        loss = Some(match loss {
            None => term,
            Some(l) => term.add(l).unwrap(),
        });
    }
    let grads = tape.backward(loss.unwrap()).unwrap();
    for (name, v) in [
        ("w_input", lv.w_input),
        ("w_recurrent", lv.w_recurrent),
        ("bias", lv.bias),
        ("projection", pv.weight),
        ("projection bias", pv.bias),
        ("embeddings", w),
    ] {
        let g = grads.wrt(v);
        assert!(g.data().iter().all(|x| *x != 0.0), "{name} has a zero gradient entry");
    }
}
