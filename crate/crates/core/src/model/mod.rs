//! The full model: loss assembly, training and probabilistic forecasting.

mod adam;
mod baseline;
mod config;
mod forecast;
mod loss;
mod params;
mod quantile;
mod train;

pub use adam::{adam_step, AdamConfig, AdamState, StepReport};
pub use baseline::seasonal_naive;
pub use config::ModelConfig;
pub use forecast::{forecast, ForecastRequest, ForecastResult};
pub use loss::{batch_loss, TrainingData};
pub use params::{ModelParams, ParamVars, PARAM_GROUPS};
pub use quantile::{gaussian_quantile, standard_normal_quantile};
pub use train::{train, train_from, EpochRecord, TrainHistory};
