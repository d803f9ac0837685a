//! Finite-difference check of every parameter group on a miniature model.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use dfgp::data::{split_train_eval, synth_generate, SynthConfig};
use dfgp::model::{batch_loss, ModelConfig, ModelParams, ParamVars, TrainingData, PARAM_GROUPS};
use dfgp::numeric::{finite_difference_gradient, relative_error, Tape, Tensor, Var};

use crate::error::CliResult;

pub const TOLERANCE: f64 = 1e-4;
const STEP: f64 = 1e-5;
const NUM_SERIES: usize = 3;
const LENGTH: usize = 20;
const NUM_FACTORS: usize = 2;
const HIDDEN: usize = 4;

#[derive(Clone, Debug, PartialEq)]
pub struct GroupResult {
    pub name: &'static str,
    /// Worst relative error over all seeds.
    pub max_relative_error: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradcheckReport {
    pub groups: Vec<GroupResult>,
    pub seeds: Vec<u64>,
}

impl GradcheckReport {
    pub fn passed(&self) -> bool {
        self.groups.iter().all(|g| g.max_relative_error < TOLERANCE)
    }
}

/// Identity whose backward pass scales the incoming gradient; used as a
/// deliberately wrong rule to prove the check can fail.
fn corrupted_identity<'t>(tape: &'t Tape, x: Var<'t>) -> dfgp::Result<Var<'t>> {
    tape.custom(
        "corrupted_identity",
        x.value(),
        &[x],
        Box::new(|grad, _, _| Ok(vec![grad.scaled(1.5)])),
    )
}

struct Problem {
    data: TrainingData,
    params: ModelParams,
    softmax: bool,
}

fn problem(seed: u64) -> CliResult<Problem> {
    let synth = synth_generate(&SynthConfig {
        num_series: NUM_SERIES,
        length: LENGTH,
        num_factors: NUM_FACTORS,
        seed,
        ..Default::default()
    })?;
    let data = TrainingData::from_split(&split_train_eval(&synth.dataset, LENGTH, 0)?)?;
    let softmax = seed % 2 == 1;
    let config = ModelConfig {
        num_factors: NUM_FACTORS,
        hidden_dim: HIDDEN,
        seed,
        softmax_loadings: softmax,
        ..Default::default()
    };
    let input_dim = data.covariates.dims2()?.1;
    let mut params = ModelParams::init(data.series_ids.clone(), input_dim, &config)?;
    // Give each series its own kernel and move biases off their initial values.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(2);
    for v in params.kernel.data_mut() {
        *v += rng.random_range(-0.3..0.3);
    }
    for v in params.lstm.bias.data_mut() {
        *v += rng.random_range(-0.2..0.2);
    }
    for v in params.projection.bias.data_mut() {
        *v += rng.random_range(-0.2..0.2);
    }
    Ok(Problem {
        data,
        params,
        softmax,
    })
}

fn loss_value(p: &Problem, params: &ModelParams) -> dfgp::Result<f64> {
    let tape = Tape::new();
    let vars = params.constants(&tape);
    let batch: Vec<usize> = (0..p.data.num_series()).collect();
    batch_loss(&tape, &vars, &p.data, &batch, p.softmax)?.item()
}

fn analytic(p: &Problem, negative_control: bool) -> dfgp::Result<Vec<Tensor>> {
    let tape = Tape::new();
    let vars = p.params.leaves(&tape);
    let used = if negative_control {
        ParamVars {
            kernel: corrupted_identity(&tape, vars.kernel)?,
            ..vars
        }
    } else {
        vars
    };
    let batch: Vec<usize> = (0..p.data.num_series()).collect();
    let loss = batch_loss(&tape, &used, &p.data, &batch, p.softmax)?;
    Ok(vars.gradients(&tape.backward(loss)?))
}

/// Compare tape gradients with central differences for `count` seeds
/// starting at `first_seed`.
pub fn run_gradcheck(first_seed: u64, count: usize, negative_control: bool) -> CliResult<GradcheckReport> {
    let mut groups: Vec<GroupResult> = PARAM_GROUPS
        .iter()
        .map(|name| GroupResult {
            name,
            max_relative_error: 0.0,
        })
        .collect();
    let seeds: Vec<u64> = (first_seed..first_seed + count as u64).collect();
    for &seed in &seeds {
        let p = problem(seed)?;
        let grads = analytic(&p, negative_control)?;
        for (g, group) in groups.iter_mut().enumerate() {
            let x0 = p.params.tensors()[g].clone();
            let numeric = finite_difference_gradient(
                |x: &Tensor| {
                    let mut params = p.params.clone();
                    *params.tensors_mut()[g] = x.clone();
                    loss_value(&p, &params)
                },
                &x0,
                STEP,
            )?;
            let err = relative_error(&grads[g], &numeric);
            log::debug!("seed {seed} {}: relative error {err:.3e}", group.name);
            group.max_relative_error = group.max_relative_error.max(err);
        }
    }
    Ok(GradcheckReport { groups, seeds })
}
