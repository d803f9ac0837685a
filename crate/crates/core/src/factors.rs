//! Global fixed effects: an LSTM over shared covariates, projected to `K`
//! latent factors, combined per series through an embedding row.
//!
//! Gate layout in every `4·hidden` block is `[input, forget, cell, output]`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::numeric::{Tape, Tensor, Var};

#[derive(Clone, Debug, PartialEq)]
pub struct LstmParams {
    pub input_dim: usize,
    pub hidden_dim: usize,
    /// `input_dim × 4·hidden_dim`.
    pub w_input: Tensor,
    /// `hidden_dim × 4·hidden_dim`.
    pub w_recurrent: Tensor,
    /// `1 × 4·hidden_dim`.
    pub bias: Tensor,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FactorProjection {
    /// `hidden_dim × K`.
    pub weight: Tensor,
    /// `1 × K`.
    pub bias: Tensor,
}

impl FactorProjection {
    pub fn num_factors(&self) -> usize {
        self.weight.shape()[1]
    }
}

/// Per-series loadings, one row `w_i` per training series.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingTable {
    /// `N × K`.
    pub weights: Tensor,
}

impl EmbeddingTable {
    pub fn num_series(&self) -> usize {
        self.weights.shape()[0]
    }
}

#[derive(Clone, Copy, Debug)]
pub struct FactorConfig {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub num_factors: usize,
    pub num_series: usize,
}

/// LSTM weights recorded on a tape.
#[derive(Clone, Copy, Debug)]
pub struct LstmVars<'t> {
    pub w_input: Var<'t>,
    pub w_recurrent: Var<'t>,
    pub bias: Var<'t>,
    pub hidden_dim: usize,
}

impl<'t> LstmVars<'t> {
    pub fn leaves(tape: &'t Tape, p: &LstmParams) -> Self {
        Self {
            w_input: tape.leaf(p.w_input.clone()),
            w_recurrent: tape.leaf(p.w_recurrent.clone()),
            bias: tape.leaf(p.bias.clone()),
            hidden_dim: p.hidden_dim,
        }
    }

    pub fn constants(tape: &'t Tape, p: &LstmParams) -> Self {
        Self {
            w_input: tape.constant(p.w_input.clone()),
            w_recurrent: tape.constant(p.w_recurrent.clone()),
            bias: tape.constant(p.bias.clone()),
            hidden_dim: p.hidden_dim,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ProjectionVars<'t> {
    pub weight: Var<'t>,
    pub bias: Var<'t>,
}

impl<'t> ProjectionVars<'t> {
    pub fn leaves(tape: &'t Tape, p: &FactorProjection) -> Self {
        Self {
            weight: tape.leaf(p.weight.clone()),
            bias: tape.leaf(p.bias.clone()),
        }
    }

    pub fn constants(tape: &'t Tape, p: &FactorProjection) -> Self {
        Self {
            weight: tape.constant(p.weight.clone()),
            bias: tape.constant(p.bias.clone()),
        }
    }
}

/// Hidden and cell state, each `1 × hidden_dim`.
#[derive(Clone, Copy, Debug)]
pub struct LstmState<'t> {
    pub hidden: Var<'t>,
    pub cell: Var<'t>,
}

impl<'t> LstmState<'t> {
    pub fn zeros(tape: &'t Tape, hidden_dim: usize) -> Self {
        Self {
            hidden: tape.constant(Tensor::zeros(&[1, hidden_dim])),
            cell: tape.constant(Tensor::zeros(&[1, hidden_dim])),
        }
    }
}

/// One LSTM update from a `1 × input_dim` covariate row.
pub fn lstm_step<'t>(
    state: LstmState<'t>,
    x_t: Var<'t>,
    params: &LstmVars<'t>,
) -> Result<LstmState<'t>> {
    let h = params.hidden_dim;
    let pre = x_t
        .matmul(params.w_input)?
        .add(state.hidden.matmul(params.w_recurrent)?)?
        .add(params.bias)?;
    let input_gate = pre.slice(1, 0, h)?.sigmoid()?;
    let forget_gate = pre.slice(1, h, h)?.sigmoid()?;
    let candidate = pre.slice(1, 2 * h, h)?.tanh()?;
    let output_gate = pre.slice(1, 3 * h, h)?.sigmoid()?;
    let cell = forget_gate
        .mul(state.cell)?
        .add(input_gate.mul(candidate)?)?;
    let hidden = output_gate.mul(cell.tanh()?)?;
    Ok(LstmState { hidden, cell })
}

/// Latent factors `g` as a `K × T` matrix: column `t` projects the hidden
/// state after consuming covariate rows `0..=t` from a zero state.
pub fn global_factors<'t>(
    tape: &'t Tape,
    covariates: &Tensor,
    lstm: &LstmVars<'t>,
    projection: &ProjectionVars<'t>,
) -> Result<Var<'t>> {
    let (steps, dim) = covariates.dims2()?;
    if steps == 0 {
        return Err(Error::Shape("global_factors needs at least one step".into()));
    }
    let expected = lstm.w_input.shape()[0];
    if dim != expected {
        return Err(Error::Shape(format!(
            "covariates have {dim} columns, LSTM expects {expected}"
        )));
    }
    let mut state = LstmState::zeros(tape, lstm.hidden_dim);
    let mut hidden = Vec::with_capacity(steps);
    for t in 0..steps {
        let row = Tensor::matrix(1, dim, covariates.data()[t * dim..(t + 1) * dim].to_vec())?;
        state = lstm_step(state, tape.constant(row), lstm)?;
        hidden.push(state.hidden);
    }
    let hs = Var::concat(&hidden, 0)?;
    hs.matmul(projection.weight)?
        .add(projection.bias.tile_rows(steps)?)?
        .transpose()
}

/// `f_t = Σ_k w_k g_{k,t}` for a `[K]` or `1 × K` loading and `K × T` factors; returns `[T]`.
pub fn fixed_effect<'t>(w: Var<'t>, g: Var<'t>) -> Result<Var<'t>> {
    let k = match w.shape().as_slice() {
        [k] | [1, k] => *k,
        other => return Err(Error::Shape(format!("loading must be a vector, got {other:?}"))),
    };
    let steps = g.shape()[1];
    w.reshape(&[1, k])?.matmul(g)?.reshape(&[steps])
}

/// Deterministic initialization from `seed`.
///
/// LSTM and projection weights are `Uniform(−s, s)` with `s = 1/√hidden`,
/// biases zero except the forget gate (1.0), loadings `Normal(0, 1/√K)`.
pub fn init_params(
    seed: u64,
    config: &FactorConfig,
) -> Result<(LstmParams, FactorProjection, EmbeddingTable)> {
    let FactorConfig {
        input_dim: d,
        hidden_dim: h,
        num_factors: k,
        num_series: n,
    } = *config;
    if d == 0 || h == 0 || k == 0 {
        return Err(Error::Config(format!(
            "factor dimensions must be positive (input {d}, hidden {h}, factors {k})"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = 1.0 / (h as f64).sqrt();
    let mut uniform = |len: usize| -> Vec<f64> { (0..len).map(|_| rng.random_range(-s..s)).collect() };

    let w_input = Tensor::matrix(d, 4 * h, uniform(d * 4 * h))?;
    let w_recurrent = Tensor::matrix(h, 4 * h, uniform(h * 4 * h))?;
    let proj_weight = Tensor::matrix(h, k, uniform(h * k))?;

    let mut bias = vec![0.0; 4 * h];
    bias[h..2 * h].fill(1.0);

    let normal = Normal::new(0.0, 1.0 / (k as f64).sqrt())
        .map_err(|e| Error::Config(e.to_string()))?;
    let loadings: Vec<f64> = (0..n * k).map(|_| normal.sample(&mut rng)).collect();

    Ok((
        LstmParams {
            input_dim: d,
            hidden_dim: h,
            w_input,
            w_recurrent,
            bias: Tensor::matrix(1, 4 * h, bias)?,
        },
        FactorProjection {
            weight: proj_weight,
            bias: Tensor::zeros(&[1, k]),
        },
        EmbeddingTable {
            weights: Tensor::matrix(n, k, loadings)?,
        },
    ))
}
