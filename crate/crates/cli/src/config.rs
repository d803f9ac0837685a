//! `key = value` run configuration.
//!
//! Every key has a default, unknown keys are rejected, and [`RunConfig::echo`]
//! writes a file that parses back to the same configuration.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use dfgp::data::{format_timestamp, parse_timestamp, ColumnSpec, Feature, FeatureSpec, SynthConfig};
use dfgp::model::ModelConfig;

use crate::error::{CliError, CliResult};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub features: FeatureSpec,
    pub columns: ColumnSpec,
    pub synth: SynthConfig,
    pub data_path: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
}

fn feature_name(f: Feature) -> &'static str {
    match f {
        Feature::HourOfDay => "hour_of_day",
        Feature::DayOfWeek => "day_of_week",
        Feature::LinearTime => "linear_time",
    }
}

fn parse_feature(s: &str) -> Option<Feature> {
    match s {
        "hour_of_day" => Some(Feature::HourOfDay),
        "day_of_week" => Some(Feature::DayOfWeek),
        "linear_time" => Some(Feature::LinearTime),
        _ => None,
    }
}

fn join<T: ToString>(items: &[T]) -> String {
    items
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(",")
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, String> {
    value
        .parse()
        .map_err(|_| format!("invalid value '{value}' for '{key}'"))
}

fn parse_bool(key: &str, value: &str) -> Result<bool, String> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(format!("invalid boolean '{value}' for '{key}'")),
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Defaults, or the file at `path` when given.
    pub fn load_or_default(path: Option<&Path>) -> CliResult<Self> {
        match path {
            Some(p) => Self::load(p),
            None => Ok(Self::default()),
        }
    }

    pub fn parse(text: &str) -> CliResult<Self> {
        let mut config = Self::default();
        let mut seen: Vec<String> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fail = |msg: String| CliError::Config(format!("line {}: {msg}", idx + 1));
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| fail(format!("expected 'key = value', got '{line}'")))?;
            let (key, value) = (key.trim(), value.trim());
            if seen.iter().any(|k| k == key) {
                return Err(fail(format!("duplicate key '{key}'")));
            }
            config.set(key, value).map_err(fail)?;
            seen.push(key.to_string());
        }
        config.validate()?;
        Ok(config)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let m = &mut self.model;
        let s = &mut self.synth;
        match key {
            "num_factors" => m.num_factors = parse_num(key, value)?,
            "hidden_dim" => m.hidden_dim = parse_num(key, value)?,
            "horizon" => m.horizon = parse_num(key, value)?,
            "train_window" => m.train_window = parse_num(key, value)?,
            "learning_rate" => m.learning_rate = parse_num(key, value)?,
            "epochs" => m.epochs = parse_num(key, value)?,
            "batch_size" => m.batch_size = parse_num(key, value)?,
            "seed" => m.seed = parse_num(key, value)?,
            "softmax_loadings" => m.softmax_loadings = parse_bool(key, value)?,
            "quantiles" => {
                m.quantiles = value
                    .split(',')
                    .map(|q| parse_num(key, q.trim()))
                    .collect::<Result<_, _>>()?
            }
            "clip_norm" => m.clip_norm = parse_num(key, value)?,
            "init_amplitude" => m.init_amplitude = parse_num(key, value)?,
            "init_lengthscale" => m.init_lengthscale = parse_num(key, value)?,
            "init_noise" => m.init_noise = parse_num(key, value)?,
            "features" => {
                self.features.features = value
                    .split(',')
                    .map(|f| {
                        parse_feature(f.trim()).ok_or_else(|| format!("unknown feature '{}'", f.trim()))
                    })
                    .collect::<Result<_, _>>()?
            }
            "data.id_column" => self.columns.id = value.to_string(),
            "data.timestamp_column" => self.columns.timestamp = value.to_string(),
            "data.value_column" => self.columns.value = value.to_string(),
            "data_path" => self.data_path = (!value.is_empty()).then(|| PathBuf::from(value)),
            "out_dir" => self.out_dir = (!value.is_empty()).then(|| PathBuf::from(value)),
            "synth.num_series" => s.num_series = parse_num(key, value)?,
            "synth.length" => s.length = parse_num(key, value)?,
            "synth.num_factors" => s.num_factors = parse_num(key, value)?,
            "synth.noise" => s.noise = parse_num(key, value)?,
            "synth.gp_amplitude" => s.gp_amplitude = parse_num(key, value)?,
            "synth.gp_lengthscale" => s.gp_lengthscale = parse_num(key, value)?,
            "synth.seed" => s.seed = parse_num(key, value)?,
            "synth.start" => {
                s.start = parse_timestamp(value)
                    .ok_or_else(|| format!("invalid timestamp '{value}' for '{key}'"))?
            }
            _ => return Err(format!("unknown key '{key}'")),
        }
        Ok(())
    }

    pub fn validate(&self) -> CliResult<()> {
        self.model.validate()?;
        self.synth.validate()?;
        if self.features.features.is_empty() {
            return Err(CliError::Config("at least one feature is required".into()));
        }
        Ok(())
    }

    /// Every key with its current value, in a stable order.
    pub fn echo(&self) -> String {
        let m = &self.model;
        let s = &self.synth;
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        let features: Vec<&str> = self.features.features.iter().map(|f| feature_name(*f)).collect();
        let start: DateTime<Utc> = s.start;
        let entries: Vec<(&str, String)> = vec![
            ("num_factors", m.num_factors.to_string()),
            ("hidden_dim", m.hidden_dim.to_string()),
            ("horizon", m.horizon.to_string()),
            ("train_window", m.train_window.to_string()),
            ("learning_rate", m.learning_rate.to_string()),
            ("epochs", m.epochs.to_string()),
            ("batch_size", m.batch_size.to_string()),
            ("seed", m.seed.to_string()),
            ("softmax_loadings", m.softmax_loadings.to_string()),
            ("quantiles", join(&m.quantiles)),
            ("clip_norm", m.clip_norm.to_string()),
            ("init_amplitude", m.init_amplitude.to_string()),
            ("init_lengthscale", m.init_lengthscale.to_string()),
            ("init_noise", m.init_noise.to_string()),
            ("features", features.join(",")),
            ("data.id_column", self.columns.id.clone()),
            ("data.timestamp_column", self.columns.timestamp.clone()),
            ("data.value_column", self.columns.value.clone()),
            ("data_path", path(&self.data_path)),
            ("out_dir", path(&self.out_dir)),
            ("synth.num_series", s.num_series.to_string()),
            ("synth.length", s.length.to_string()),
            ("synth.num_factors", s.num_factors.to_string()),
            ("synth.noise", s.noise.to_string()),
            ("synth.gp_amplitude", s.gp_amplitude.to_string()),
            ("synth.gp_lengthscale", s.gp_lengthscale.to_string()),
            ("synth.seed", s.seed.to_string()),
            ("synth.start", format_timestamp(&start)),
        ];
        let mut out = String::new();
        for (k, v) in entries {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_echo_and_reparse() {
        let c = RunConfig::default();
        assert_eq!(RunConfig::parse(&c.echo()).unwrap(), c);
    }

    #[test]
    fn overrides_and_comments() {
        let c = RunConfig::parse(
            "# small run\nepochs = 3\nlearning_rate=0.005\nquantiles = 0.05, 0.5, 0.95\n\
             features = hour_of_day\nsoftmax_loadings = true\n",
        )
        .unwrap();
        assert_eq!(c.model.epochs, 3);
        assert_eq!(c.model.learning_rate, 0.005);
        assert_eq!(c.model.quantiles, vec![0.05, 0.5, 0.95]);
        assert_eq!(c.features.features, vec![Feature::HourOfDay]);
        assert!(c.model.softmax_loadings);
        assert_eq!(RunConfig::parse(&c.echo()).unwrap(), c);
    }

    #[test]
    fn unknown_and_duplicate_keys_rejected() {
        assert!(matches!(RunConfig::parse("epoch = 3"), Err(CliError::Config(_))));
        assert!(matches!(
            RunConfig::parse("epochs = 3\nepochs = 4"),
            Err(CliError::Config(_))
        ));
        assert!(RunConfig::parse("epochs = three").is_err());
        assert!(RunConfig::parse("horizon = 0").is_err());
        assert!(RunConfig::parse("features = moon_phase").is_err());
    }
}
