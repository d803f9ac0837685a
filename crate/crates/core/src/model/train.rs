use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::adam::{adam_step, AdamConfig, AdamState};
use super::config::ModelConfig;
use super::loss::{batch_loss, TrainingData};
use super::params::ModelParams;
use crate::error::{Error, Result};
use crate::numeric::Tape;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    /// Summed batch losses over the epoch, evaluated before each step.
    pub nll: f64,
    /// Largest pre-clipping gradient norm seen in the epoch.
    pub grad_norm: f64,
    pub seconds: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    pub skipped_steps: usize,
}

impl TrainHistory {
    pub fn first_nll(&self) -> Option<f64> {
        self.epochs.first().map(|e| e.nll)
    }

    pub fn last_nll(&self) -> Option<f64> {
        self.epochs.last().map(|e| e.nll)
    }
}

/// Fit from a fresh, seeded initialization.
pub fn train(data: &TrainingData, config: &ModelConfig) -> Result<(ModelParams, TrainHistory)> {
    config.validate()?;
    if data.num_series() == 0 || data.window() == 0 {
        return Err(Error::Config("training set is empty".into()));
    }
    let input_dim = data.covariates.dims2()?.1;
    let params = ModelParams::init(data.series_ids.clone(), input_dim, config)?;
    train_from(params, data, config)
}

/// Continue optimizing `params` for `config.epochs` epochs.
pub fn train_from(
    mut params: ModelParams,
    data: &TrainingData,
    config: &ModelConfig,
) -> Result<(ModelParams, TrainHistory)> {
    config.validate()?;
    let n = data.num_series();
    if n == 0 || data.window() == 0 {
        return Err(Error::Config("training set is empty".into()));
    }
    if params.series_ids != data.series_ids {
        return Err(Error::Config(
            "parameters were built for a different set of series".into(),
        ));
    }
    let adam = AdamConfig {
        learning_rate: config.learning_rate,
        clip_norm: Some(config.clip_norm),
        ..Default::default()
    };
    let mut state = AdamState::default();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(1);
    let mut order: Vec<usize> = (0..n).collect();
    let mut history = TrainHistory::default();

    for epoch in 1..=config.epochs {
        let started = Instant::now();
        order.shuffle(&mut rng);
        let mut nll = 0.0;
        let mut grad_norm: f64 = 0.0;
        for batch in order.chunks(config.batch_size) {
            let tape = Tape::new();
            let vars = params.leaves(&tape);
            let loss = batch_loss(&tape, &vars, data, batch, config.softmax_loadings)?;
            nll += loss.item()?;
            let grads = vars.gradients(&tape.backward(loss)?);
            drop(tape);
            let report = adam_step(&mut params.tensors_mut(), &grads, &mut state, &adam)?;
            grad_norm = grad_norm.max(report.grad_norm);
            if !report.applied {
                history.skipped_steps += 1;
            }
        }
        let record = EpochRecord {
            epoch,
            nll,
            grad_norm,
            seconds: started.elapsed().as_secs_f64(),
        };
        log::debug!(
            "epoch {epoch}: nll {:.6} grad_norm {:.4}",
            record.nll,
            record.grad_norm
        );
        history.epochs.push(record);
    }
    Ok((params, history))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{split_train_eval, synth_generate, SynthConfig};

    fn data() -> TrainingData {
        let out = synth_generate(&SynthConfig {
            num_series: 3,
            length: 40,
            ..Default::default()
        })
        .unwrap();
        TrainingData::from_split(&split_train_eval(&out.dataset, 32, 8).unwrap()).unwrap()
    }

    fn small(epochs: usize) -> ModelConfig {
        ModelConfig {
            hidden_dim: 4,
            num_factors: 2,
            epochs,
            batch_size: 2,
            ..Default::default()
        }
    }

    #[test]
    fn zero_epochs_returns_initialization() {
        let d = data();
        let (p, h) = train(&d, &small(0)).unwrap();
        assert!(h.epochs.is_empty());
        assert_eq!(p, ModelParams::init(d.series_ids.clone(), 5, &small(0)).unwrap());
    }

    #[test]
    fn deterministic_and_history_sized() {
        let d = data();
        let (a, ha) = train(&d, &small(3)).unwrap();
        let (b, hb) = train(&d, &small(3)).unwrap();
        assert_eq!(a, b);
        assert_eq!(ha.epochs.len(), 3);
        assert_eq!(ha.epochs.iter().map(|e| e.nll).collect::<Vec<_>>(),
                   hb.epochs.iter().map(|e| e.nll).collect::<Vec<_>>());
    }

    #[test]
    fn empty_dataset_is_config_error() {
        let mut d = data();
        d.series_ids.clear();
        d.targets.clear();
        assert!(matches!(train(&d, &small(1)), Err(Error::Config(_))));
    }
}
