use super::config::ModelConfig;
use crate::error::{Error, Result};
use crate::factors::{
    init_params, EmbeddingTable, FactorConfig, FactorProjection, LstmParams, LstmVars,
    ProjectionVars,
};
use crate::gp::KernelParams;
use crate::numeric::{Gradients, Tape, Tensor, Var};

/// Parameter group names, in the order used by optimizers and checkpoints.
pub const PARAM_GROUPS: [&str; 7] = [
    "lstm.w_input",
    "lstm.w_recurrent",
    "lstm.bias",
    "projection.weight",
    "projection.bias",
    "embeddings",
    "kernel.log_params",
];

/// Every trainable quantity, plus the series each embedding/kernel row belongs to.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub series_ids: Vec<String>,
    pub lstm: LstmParams,
    pub projection: FactorProjection,
    pub embeddings: EmbeddingTable,
    /// `N × 3` rows of `[log a, log ℓ, log σ]`.
    pub kernel: Tensor,
}

impl ModelParams {
    pub fn init(series_ids: Vec<String>, input_dim: usize, config: &ModelConfig) -> Result<Self> {
        let n = series_ids.len();
        let (lstm, projection, embeddings) = init_params(
            config.seed,
            &FactorConfig {
                input_dim,
                hidden_dim: config.hidden_dim,
                num_factors: config.num_factors,
                num_series: n,
            },
        )?;
        let init = KernelParams::new(
            config.init_amplitude,
            config.init_lengthscale,
            config.init_noise,
        )?
        .to_logs();
        let kernel = Tensor::matrix(n, 3, init.repeat(n))?;
        Ok(Self {
            series_ids,
            lstm,
            projection,
            embeddings,
            kernel,
        })
    }

    pub fn num_series(&self) -> usize {
        self.series_ids.len()
    }

    pub fn series_index(&self, id: &str) -> Result<usize> {
        self.series_ids
            .iter()
            .position(|s| s == id)
            .ok_or_else(|| Error::UnknownSeries(id.to_string()))
    }

    pub fn kernel_params(&self, series: usize) -> KernelParams {
        let row = &self.kernel.data()[series * 3..series * 3 + 3];
        KernelParams::from_logs([row[0], row[1], row[2]])
    }

    pub fn tensors(&self) -> [&Tensor; 7] {
        [
            &self.lstm.w_input,
            &self.lstm.w_recurrent,
            &self.lstm.bias,
            &self.projection.weight,
            &self.projection.bias,
            &self.embeddings.weights,
            &self.kernel,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut Tensor; 7] {
        [
            &mut self.lstm.w_input,
            &mut self.lstm.w_recurrent,
            &mut self.lstm.bias,
            &mut self.projection.weight,
            &mut self.projection.bias,
            &mut self.embeddings.weights,
            &mut self.kernel,
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.is_finite())
    }

    /// Rebuild from named tensors (checkpoint order need not match), checking shapes.
    pub fn from_named(series_ids: Vec<String>, mut named: Vec<(String, Tensor)>) -> Result<Self> {
        let mut take = |name: &str| -> Result<Tensor> {
            let pos = named
                .iter()
                .position(|(n, _)| n == name)
                .ok_or_else(|| Error::Config(format!("missing parameter group '{name}'")))?;
            Ok(named.swap_remove(pos).1)
        };
        let w_input = take(PARAM_GROUPS[0])?;
        let w_recurrent = take(PARAM_GROUPS[1])?;
        let bias = take(PARAM_GROUPS[2])?;
        let proj_weight = take(PARAM_GROUPS[3])?;
        let proj_bias = take(PARAM_GROUPS[4])?;
        let embeddings = take(PARAM_GROUPS[5])?;
        let kernel = take(PARAM_GROUPS[6])?;
        if let Some((extra, _)) = named.first() {
            return Err(Error::Config(format!("unexpected parameter group '{extra}'")));
        }

        let (d, four_h) = w_input.dims2()?;
        let (h, k) = proj_weight.dims2()?;
        let n = series_ids.len();
        let expect = [
            (w_recurrent.shape(), vec![h, 4 * h]),
            (bias.shape(), vec![1, 4 * h]),
            (proj_bias.shape(), vec![1, k]),
            (embeddings.shape(), vec![n, k]),
            (kernel.shape(), vec![n, 3]),
        ];
        if four_h != 4 * h || expect.iter().any(|(got, want)| *got != want.as_slice()) {
            return Err(Error::Shape(format!(
                "inconsistent parameter shapes (input {d}, hidden {h}, factors {k}, series {n})"
            )));
        }
        Ok(Self {
            series_ids,
            lstm: LstmParams {
                input_dim: d,
                hidden_dim: h,
                w_input,
                w_recurrent,
                bias,
            },
            projection: FactorProjection {
                weight: proj_weight,
                bias: proj_bias,
            },
            embeddings: EmbeddingTable {
                weights: embeddings,
            },
            kernel,
        })
    }

    /// Record all parameters as trainable leaves.
    pub fn leaves<'t>(&self, tape: &'t Tape) -> ParamVars<'t> {
        ParamVars {
            lstm: LstmVars::leaves(tape, &self.lstm),
            projection: ProjectionVars::leaves(tape, &self.projection),
            embeddings: tape.leaf(self.embeddings.weights.clone()),
            kernel: tape.leaf(self.kernel.clone()),
        }
    }

    /// Record all parameters as constants (inference only).
    pub fn constants<'t>(&self, tape: &'t Tape) -> ParamVars<'t> {
        ParamVars {
            lstm: LstmVars::constants(tape, &self.lstm),
            projection: ProjectionVars::constants(tape, &self.projection),
            embeddings: tape.constant(self.embeddings.weights.clone()),
            kernel: tape.constant(self.kernel.clone()),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ParamVars<'t> {
    pub lstm: LstmVars<'t>,
    pub projection: ProjectionVars<'t>,
    pub embeddings: Var<'t>,
    pub kernel: Var<'t>,
}

impl<'t> ParamVars<'t> {
    pub fn vars(&self) -> [Var<'t>; 7] {
        [
            self.lstm.w_input,
            self.lstm.w_recurrent,
            self.lstm.bias,
            self.projection.weight,
            self.projection.bias,
            self.embeddings,
            self.kernel,
        ]
    }

    /// Gradients in [`PARAM_GROUPS`] order, zeros where nothing flowed.
    pub fn gradients(&self, grads: &Gradients) -> Vec<Tensor> {
        self.vars().iter().map(|v| grads.wrt(*v)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ModelParams {
        let cfg = ModelConfig {
            hidden_dim: 3,
            num_factors: 2,
            ..Default::default()
        };
        ModelParams::init(vec!["a".into(), "b".into()], 4, &cfg).unwrap()
    }

    #[test]
    fn kernel_rows_start_at_configured_values() {
        let p = small();
        let k = p.kernel_params(1);
        assert!((k.amplitude() - 0.1).abs() < 1e-15);
        assert!((k.lengthscale() - 0.05).abs() < 1e-15);
        assert!((k.noise() - 0.1).abs() < 1e-15);
    }

    #[test]
    fn named_roundtrip() {
        let p = small();
        let mut named: Vec<(String, Tensor)> = PARAM_GROUPS
            .iter()
            .zip(p.tensors())
            .map(|(n, t)| (n.to_string(), t.clone()))
            .collect();
        named.reverse();
        let back = ModelParams::from_named(p.series_ids.clone(), named.clone()).unwrap();
        assert_eq!(back, p);

        named.pop();
        assert!(ModelParams::from_named(p.series_ids.clone(), named).is_err());
    }

    #[test]
    fn unknown_series() {
        assert!(matches!(small().series_index("zzz"), Err(Error::UnknownSeries(_))));
        assert_eq!(small().series_index("b").unwrap(), 1);
    }
}
