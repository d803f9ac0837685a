use crate::error::{Error, Result};

/// Hyperparameters of the model and its training loop.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub num_factors: usize,
    pub hidden_dim: usize,
    pub horizon: usize,
    pub train_window: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    /// Series per optimizer step.
    pub batch_size: usize,
    pub seed: u64,
    /// Pass loadings through a row softmax so they form a weighted average.
    pub softmax_loadings: bool,
    pub quantiles: Vec<f64>,
    pub clip_norm: f64,
    pub init_amplitude: f64,
    pub init_lengthscale: f64,
    pub init_noise: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            num_factors: 10,
            hidden_dim: 50,
            horizon: 24,
            train_window: 168,
            learning_rate: 0.01,
            epochs: 2000,
            batch_size: 64,
            seed: 0,
            softmax_loadings: false,
            quantiles: vec![0.1, 0.5, 0.9],
            clip_norm: 10.0,
            init_amplitude: 0.1,
            init_lengthscale: 0.05,
            init_noise: 0.1,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.horizon < 1 {
            return fail("horizon must be >= 1".into());
        }
        if self.train_window < 2 {
            return fail(format!("train_window must be >= 2, got {}", self.train_window));
        }
        if self.num_factors < 1 || self.hidden_dim < 1 {
            return fail("num_factors and hidden_dim must be >= 1".into());
        }
        if self.batch_size < 1 {
            return fail("batch_size must be >= 1".into());
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return fail(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if !(self.clip_norm.is_finite() && self.clip_norm > 0.0) {
            return fail(format!("clip_norm must be positive, got {}", self.clip_norm));
        }
        for (name, v) in [
            ("init_amplitude", self.init_amplitude),
            ("init_lengthscale", self.init_lengthscale),
            ("init_noise", self.init_noise),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return fail(format!("{name} must be positive, got {v}"));
            }
        }
        if self.quantiles.is_empty() {
            return fail("at least one quantile level is required".into());
        }
        if let Some(q) = self.quantiles.iter().find(|q| !(**q > 0.0 && **q < 1.0)) {
            return fail(format!("quantile {q} outside (0, 1)"));
        }
        if self.quantiles.windows(2).any(|w| w[0] >= w[1]) {
            return fail("quantiles must be strictly increasing".into());
        }
        Ok(())
    }
}
