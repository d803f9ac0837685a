use chrono::{DateTime, Utc};

use super::dataset::TimeSeriesDataset;
use super::features::{build_features, FeatureSpec};
use crate::error::{Error, Result};
use crate::numeric::Tensor;

/// Training windows and held-out targets on a shared grid.
#[derive(Clone, Debug)]
pub struct SplitDataset {
    pub series_ids: Vec<String>,
    pub train_timestamps: Vec<DateTime<Utc>>,
    pub eval_timestamps: Vec<DateTime<Utc>>,
    /// Raw training observations, one row per series.
    pub train_values: Vec<Vec<f64>>,
    /// Raw held-out observations, one row per series (empty when the horizon is 0).
    pub eval_values: Vec<Vec<f64>>,
    /// `(train_window + horizon) × d` covariates over the union grid.
    pub covariates: Tensor,
    pub features: FeatureSpec,
    pub train_window: usize,
    pub horizon: usize,
}

/// The last `horizon` points of each series are targets; the `train_window`
/// points before them are the training window.
pub fn split_train_eval(
    dataset: &TimeSeriesDataset,
    train_window: usize,
    horizon: usize,
) -> Result<SplitDataset> {
    let needed = train_window + horizon;
    for s in &dataset.series {
        if s.len() < needed {
            return Err(Error::Length {
                series: s.id.clone(),
                len: s.len(),
                needed,
            });
        }
    }
    let total = dataset.len();
    let start = total.saturating_sub(needed);
    let cut = start + train_window;
    let grid = dataset.timestamps();
    let covariates = build_features(&grid[start..total], &dataset.features, train_window)?;
    Ok(SplitDataset {
        series_ids: dataset.series.iter().map(|s| s.id.clone()).collect(),
        train_timestamps: grid[start..cut].to_vec(),
        eval_timestamps: grid[cut..total].to_vec(),
        train_values: dataset
            .series
            .iter()
            .map(|s| s.values[start..cut].to_vec())
            .collect(),
        eval_values: dataset
            .series
            .iter()
            .map(|s| s.values[cut..total].to_vec())
            .collect(),
        covariates,
        features: dataset.features.clone(),
        train_window,
        horizon,
    })
}

impl SplitDataset {
    pub fn num_series(&self) -> usize {
        self.series_ids.len()
    }

    /// Covariate rows of the training window only.
    pub fn train_covariates(&self) -> Result<Tensor> {
        let d = self.features.dim();
        Tensor::matrix(
            self.train_window,
            d,
            self.covariates.data()[..self.train_window * d].to_vec(),
        )
    }
}
