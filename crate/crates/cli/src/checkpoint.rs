//! Versioned text checkpoint.
//!
//! ```text
//! DFGP-CHECKPOINT 1
//! [config]
//! key = value ...
//! [series]
//! <one id per line>
//! [params]
//! <name> <dim> <dim> ...
//! <row-major values, one row of the last dimension per line>
//! [end]
//! ```
//!
//! Values are written with `{:e}`, the shortest form that parses back to the
//! same bits.

use std::fmt::Write as _;
use std::path::Path;

use dfgp::model::{ModelParams, PARAM_GROUPS};
use dfgp::numeric::Tensor;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

const MAGIC: &str = "DFGP-CHECKPOINT";
const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub config: RunConfig,
    pub params: ModelParams,
}

impl Checkpoint {
    /// Paths are dropped from the stored config so the file depends only on
    /// what determines the parameters.
    pub fn new(config: &RunConfig, params: ModelParams) -> Self {
        let mut config = config.clone();
        config.data_path = None;
        config.out_dir = None;
        Self { config, params }
    }

    pub fn render(&self) -> String {
        let mut out = format!("{MAGIC} {VERSION}\n[config]\n");
        out.push_str(&self.config.echo());
        out.push_str("[series]\n");
        for id in &self.params.series_ids {
            out.push_str(id);
            out.push('\n');
        }
        out.push_str("[params]\n");
        for (name, t) in PARAM_GROUPS.iter().zip(self.params.tensors()) {
            let dims: Vec<String> = t.shape().iter().map(|d| d.to_string()).collect();
            let _ = writeln!(out, "{name} {}", dims.join(" "));
            let width = t.shape().last().copied().unwrap_or(1).max(1);
            for row in t.data().chunks(width) {
                let vals: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
                out.push_str(&vals.join(" "));
                out.push('\n');
            }
        }
        out.push_str("[end]\n");
        out
    }

    pub fn save(&self, path: &Path) -> CliResult<()> {
        std::fs::write(path, self.render()).map_err(|e| dfgp::Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        Ok(())
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| dfgp::Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Data(msg) => CliError::Data(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> CliResult<Self> {
        let bad = |line: usize, msg: &str| CliError::Data(format!("checkpoint line {}: {msg}", line + 1));
        let lines: Vec<&str> = text.lines().collect();
        let header = format!("{MAGIC} {VERSION}");
        if lines.first() != Some(&header.as_str()) {
            return Err(bad(0, &format!("expected header '{header}'")));
        }
        let section = |name: &str, from: usize| {
            lines[from..]
                .iter()
                .position(|l| *l == name)
                .map(|p| p + from)
                .ok_or_else(|| bad(from, &format!("missing section {name}")))
        };
        let config_at = section("[config]", 1)?;
        let series_at = section("[series]", config_at)?;
        let params_at = section("[params]", series_at)?;
        let end_at = section("[end]", params_at)?;

        let config = RunConfig::parse(&lines[config_at + 1..series_at].join("\n"))
            .map_err(|e| CliError::Data(format!("checkpoint config: {e}")))?;
        let series_ids: Vec<String> = lines[series_at + 1..params_at]
            .iter()
            .map(|s| s.to_string())
            .collect();

        let mut named = Vec::new();
        let mut i = params_at + 1;
        while i < end_at {
            let mut parts = lines[i].split_whitespace();
            let name = parts.next().ok_or_else(|| bad(i, "empty parameter header"))?;
            let shape: Vec<usize> = parts
                .map(|d| d.parse().map_err(|_| bad(i, "bad dimension")))
                .collect::<CliResult<_>>()?;
            let width = shape.last().copied().unwrap_or(1).max(1);
            let count: usize = shape.iter().product();
            let rows = count.div_ceil(width);
            if i + rows >= end_at {
                return Err(bad(i, &format!("truncated values for '{name}'")));
            }
            let mut data = Vec::with_capacity(count);
            for (k, line) in lines[i + 1..=i + rows].iter().enumerate() {
                for v in line.split_whitespace() {
                    let x: f64 = v.parse().map_err(|_| bad(i + 1 + k, "bad value"))?;
                    data.push(x);
                }
            }
            if data.len() != count {
                return Err(bad(i, &format!("'{name}' has {} values, expected {count}", data.len())));
            }
            let tensor = Tensor::new(shape, data).map_err(|e| bad(i, &e.to_string()))?;
            named.push((name.to_string(), tensor));
            i += rows + 1;
        }
        let params = ModelParams::from_named(series_ids, named)
            .map_err(|e| CliError::Data(format!("checkpoint parameters: {e}")))?;
        if !params.is_finite() {
            return Err(CliError::Data("checkpoint holds non-finite parameters".into()));
        }
        Ok(Self { config, params })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Checkpoint {
        let mut cfg = RunConfig::default();
        cfg.model.hidden_dim = 3;
        cfg.model.num_factors = 2;
        let mut params = ModelParams::init(vec!["a b".into(), "c".into()], 5, &cfg.model).unwrap();
        params.kernel.data_mut()[0] = 0.1 + 0.2;
        params.kernel.data_mut()[1] = -0.0;
        params.kernel.data_mut()[2] = 1e-300;
        Checkpoint::new(&cfg, params)
    }

    #[test]
    fn bit_exact_roundtrip() {
        let ck = sample();
        let text = ck.render();
        let back = Checkpoint::parse(&text).unwrap();
        for (a, b) in ck.params.tensors().iter().zip(back.params.tensors()) {
            let bits = |t: &Tensor| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(a), bits(b));
        }
        assert_eq!(back, ck);
        assert_eq!(back.render(), text);
    }

    #[test]
    fn malformed_is_data_error() {
        assert!(matches!(Checkpoint::parse("hello"), Err(CliError::Data(_))));
        let text = sample().render();
        let truncated: String = text.lines().take(40).collect::<Vec<_>>().join("\n");
        assert!(matches!(Checkpoint::parse(&truncated), Err(CliError::Data(_))));
        let corrupted = text.replacen("[params]\nlstm.w_input 5 12", "[params]\nlstm.w_input 5 11", 1);
        assert!(Checkpoint::parse(&corrupted).is_err());
    }
}
