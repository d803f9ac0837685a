use chrono::{DateTime, Utc};
use rayon::prelude::*;

use super::loss::loadings;
use super::params::ModelParams;
use super::quantile::gaussian_quantile;
use crate::data::{build_features, SeriesScaler, SplitDataset, TimeSeriesDataset};
use crate::error::{Error, Result};
use crate::factors::global_factors;
use crate::gp::{gp_posterior, time_inputs};
use crate::numeric::{Tape, Tensor};

/// Conditioning windows and future covariates for a set of series.
#[derive(Clone, Debug)]
pub struct ForecastRequest {
    pub series_ids: Vec<String>,
    /// Raw observations of the conditioning window, one row per series.
    pub context: Vec<Vec<f64>>,
    /// `(window + horizon) × d`, window rows first.
    pub covariates: Tensor,
    pub future_timestamps: Vec<DateTime<Utc>>,
}

impl ForecastRequest {
    /// Forecast the held-out span of a split from its training window.
    pub fn from_split(split: &SplitDataset) -> Self {
        Self {
            series_ids: split.series_ids.clone(),
            context: split.train_values.clone(),
            covariates: split.covariates.clone(),
            future_timestamps: split.eval_timestamps.clone(),
        }
    }

    /// Forecast `horizon` steps past the end of `dataset`, conditioning on its
    /// last `window` points.
    pub fn beyond_end(dataset: &TimeSeriesDataset, window: usize, horizon: usize) -> Result<Self> {
        for s in &dataset.series {
            if s.len() < window {
                return Err(Error::Length {
                    series: s.id.clone(),
                    len: s.len(),
                    needed: window,
                });
            }
        }
        let total = dataset.len();
        let start = total - window;
        let mut grid = dataset.timestamps()[start..].to_vec();
        let last = *grid
            .last()
            .ok_or_else(|| Error::Config("cannot forecast from an empty dataset".into()))?;
        let future: Vec<DateTime<Utc>> = (1..=horizon as i32)
            .map(|h| last + dataset.frequency * h)
            .collect();
        grid.extend(&future);
        Ok(Self {
            series_ids: dataset.series.iter().map(|s| s.id.clone()).collect(),
            context: dataset
                .series
                .iter()
                .map(|s| s.values[start..].to_vec())
                .collect(),
            covariates: build_features(&grid, &dataset.features, window)?,
            future_timestamps: future,
        })
    }

    pub fn window(&self) -> usize {
        self.context.first().map_or(0, Vec::len)
    }

    pub fn horizon(&self) -> usize {
        self.future_timestamps.len()
    }

    /// Keep only the named series, in the given order.
    pub fn select(&self, ids: &[String]) -> Result<Self> {
        let mut out = Self {
            series_ids: Vec::with_capacity(ids.len()),
            context: Vec::with_capacity(ids.len()),
            covariates: self.covariates.clone(),
            future_timestamps: self.future_timestamps.clone(),
        };
        for id in ids {
            let i = self
                .series_ids
                .iter()
                .position(|s| s == id)
                .ok_or_else(|| Error::UnknownSeries(id.clone()))?;
            out.series_ids.push(id.clone());
            out.context.push(self.context[i].clone());
        }
        Ok(out)
    }
}

/// Per-step Gaussian marginals in original units.
#[derive(Clone, Debug, PartialEq)]
pub struct ForecastResult {
    pub series_id: String,
    pub timestamps: Vec<DateTime<Utc>>,
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    /// `(ρ, values)` in the requested order.
    pub quantiles: Vec<(f64, Vec<f64>)>,
}

impl ForecastResult {
    pub fn quantile(&self, rho: f64) -> Option<&[f64]> {
        self.quantiles
            .iter()
            .find(|(r, _)| (r - rho).abs() < 1e-12)
            .map(|(_, v)| v.as_slice())
    }
}

/// Predictive marginals for every series in `request`.
pub fn forecast(
    params: &ModelParams,
    request: &ForecastRequest,
    quantiles: &[f64],
    softmax_loadings: bool,
) -> Result<Vec<ForecastResult>> {
    let rows: Vec<usize> = request
        .series_ids
        .iter()
        .map(|id| params.series_index(id))
        .collect::<Result<_>>()?;
    let window = request.window();
    let horizon = request.horizon();
    if rows.is_empty() {
        return Ok(Vec::new());
    }
    if let Some((id, ctx)) = request
        .series_ids
        .iter()
        .zip(&request.context)
        .find(|(_, c)| c.len() != window)
    {
        return Err(Error::Length {
            series: id.clone(),
            len: ctx.len(),
            needed: window,
        });
    }
    let (steps, _) = request.covariates.dims2()?;
    if steps != window + horizon {
        return Err(Error::Shape(format!(
            "covariates cover {steps} steps, expected {} + {}",
            window, horizon
        )));
    }

    let fixed = {
        let tape = Tape::new();
        let vars = params.constants(&tape);
        let g = global_factors(&tape, &request.covariates, &vars.lstm, &vars.projection)?;
        loadings(vars.embeddings, &rows, softmax_loadings)?
            .matmul(g)?
            .value()
    };
    let train_x = time_inputs(1, window, window);
    let test_x = time_inputs(window + 1, horizon, window);

    request
        .series_ids
        .par_iter()
        .enumerate()
        .map(|(b, id)| {
            let scaler = SeriesScaler::fit(&request.context[b]);
            let f = &fixed.data()[b * steps..(b + 1) * steps];
            let mut result = ForecastResult {
                series_id: id.clone(),
                timestamps: request.future_timestamps.clone(),
                mean: Vec::new(),
                variance: Vec::new(),
                quantiles: quantiles.iter().map(|&q| (q, Vec::new())).collect(),
            };
            if horizon == 0 {
                return Ok(result);
            }
            let residuals: Vec<f64> = scaler
                .apply(&request.context[b])
                .iter()
                .zip(&f[..window])
                .map(|(z, f)| z - f)
                .collect();
            let post = gp_posterior(&train_x, &residuals, &test_x, &params.kernel_params(rows[b]))
                .map_err(|e| e.for_series(id))?;
            let s = scaler.scale;
            result.mean = f[window..]
                .iter()
                .zip(&post.mean)
                .map(|(f, m)| (f + m) * s)
                .collect();
            result.variance = post.variance.iter().map(|v| v * s * s).collect();
            for (rho, values) in result.quantiles.iter_mut() {
                *values = result
                    .mean
                    .iter()
                    .zip(&result.variance)
                    .map(|(&m, &v)| gaussian_quantile(m, v, *rho))
                    .collect::<Result<_>>()?;
            }
            Ok(result)
        })
        .collect()
}
