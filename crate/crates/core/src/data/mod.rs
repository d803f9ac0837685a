//! Ingestion, calendar covariates, scaling, train/eval splitting and a
//! synthetic sampler of the generative model.

mod dataset;
mod features;
mod scaler;
mod split;
mod synth;

pub use dataset::{
    format_timestamp, load_long_csv, parse_timestamp, ColumnSpec, Series, TimeSeriesDataset,
};
pub use features::{build_features, Feature, FeatureSpec};
pub use scaler::SeriesScaler;
pub use split::{split_train_eval, SplitDataset};
pub use synth::{synth_generate, write_ground_truth_csv, SynthConfig, SynthOutput, SynthTruth};
