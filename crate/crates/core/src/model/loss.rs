use rayon::prelude::*;

use super::params::ParamVars;
use crate::data::{SeriesScaler, SplitDataset};
use crate::error::{Error, Result};
use crate::factors::global_factors;
use crate::gp::{gp_nll, nll_node, time_inputs, KernelParams};
use crate::numeric::{Tape, Tensor, Var};

/// Scaled training windows plus everything shared across series.
#[derive(Clone, Debug)]
pub struct TrainingData {
    pub series_ids: Vec<String>,
    /// `train_window × d`.
    pub covariates: Tensor,
    /// Scaled targets, one row per series.
    pub targets: Vec<Vec<f64>>,
    pub scalers: Vec<SeriesScaler>,
    /// Normalized time of each training step, shared by every series.
    pub gp_inputs: Vec<f64>,
}

impl TrainingData {
    pub fn from_split(split: &SplitDataset) -> Result<Self> {
        let scalers: Vec<SeriesScaler> = split
            .train_values
            .iter()
            .map(|v| SeriesScaler::fit(v))
            .collect();
        let targets = split
            .train_values
            .iter()
            .zip(&scalers)
            .map(|(v, s)| s.apply(v))
            .collect();
        Ok(Self {
            series_ids: split.series_ids.clone(),
            covariates: split.train_covariates()?,
            targets,
            scalers,
            gp_inputs: time_inputs(1, split.train_window, split.train_window),
        })
    }

    pub fn num_series(&self) -> usize {
        self.series_ids.len()
    }

    pub fn window(&self) -> usize {
        self.gp_inputs.len()
    }
}

/// Row-wise loadings for `rows`, softmax-normalized when requested.
pub(crate) fn loadings<'t>(embeddings: Var<'t>, rows: &[usize], softmax: bool) -> Result<Var<'t>> {
    let w = embeddings.gather_rows(rows)?;
    if softmax {
        w.softmax_rows()
    } else {
        Ok(w)
    }
}

/// `Σ_i NLL_i` over the series in `batch`, recorded on `tape`.
pub fn batch_loss<'t>(
    tape: &'t Tape,
    params: &ParamVars<'t>,
    data: &TrainingData,
    batch: &[usize],
    softmax_loadings: bool,
) -> Result<Var<'t>> {
    if batch.is_empty() {
        return Err(Error::Config("empty batch".into()));
    }
    let n = data.window();
    let g = global_factors(tape, &data.covariates, &params.lstm, &params.projection)?;
    let fixed = loadings(params.embeddings, batch, softmax_loadings)?.matmul(g)?;

    let mut residuals = Vec::with_capacity(batch.len());
    for (b, &i) in batch.iter().enumerate() {
        let target = tape.constant(Tensor::vector(data.targets[i].clone()));
        let f = fixed.slice(0, b, 1)?.reshape(&[n])?;
        residuals.push(target.sub(f)?);
    }
    let kernel_rows: Vec<Var<'t>> = batch
        .iter()
        .map(|&i| params.kernel.slice(0, i, 1)?.reshape(&[3]))
        .collect::<Result<_>>()?;

    // The GP solves dominate; run them in parallel, then record nodes in order.
    let inputs: Vec<(Vec<f64>, [f64; 3])> = residuals
        .iter()
        .zip(&kernel_rows)
        .map(|(r, k)| {
            let logs = k.value_ref();
            (r.value_ref().data().to_vec(), [logs.data()[0], logs.data()[1], logs.data()[2]])
        })
        .collect();
    let nlls: Vec<_> = inputs
        .par_iter()
        .zip(batch.par_iter())
        .map(|((r, logs), &i)| {
            gp_nll(r, &data.gp_inputs, &KernelParams::from_logs(*logs))
                .map_err(|e| e.for_series(&data.series_ids[i]))
        })
        .collect::<Result<_>>()?;

    let mut total: Option<Var<'t>> = None;
    for ((r, k), nll) in residuals.into_iter().zip(kernel_rows).zip(nlls) {
        let term = nll_node(tape, r, k, nll)?;
        total = Some(match total {
            Some(acc) => acc.add(term)?,
            None => term,
        });
    }
    Ok(total.expect("non-empty batch"))
}
