use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use chrono::{DateTime, Duration, TimeZone, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::dataset::{format_timestamp, Series, TimeSeriesDataset};
use crate::error::{Error, Result};
use crate::gp::{rbf_kernel_matrix, KernelParams};
use crate::linalg::{cholesky, DEFAULT_JITTER_SCHEDULE};

/// Periods (hours) and weights of the sinusoids summed into each true factor.
const FACTOR_HARMONICS: [(f64, f64); 3] = [(24.0, 1.0), (12.0, 0.5), (168.0, 0.5)];

/// Parameters of the forward sampler. GP lengthscale is in hours (grid steps).
#[derive(Clone, Debug, PartialEq)]
pub struct SynthConfig {
    pub num_series: usize,
    pub length: usize,
    pub num_factors: usize,
    pub noise: f64,
    pub gp_amplitude: f64,
    pub gp_lengthscale: f64,
    pub seed: u64,
    pub start: DateTime<Utc>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            num_series: 20,
            length: 192,
            num_factors: 2,
            noise: 0.1,
            gp_amplitude: 0.3,
            gp_lengthscale: 6.0,
            seed: 0,
            start: Utc.with_ymd_and_hms(2014, 1, 1, 0, 0, 0).unwrap(),
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_series == 0 || self.length == 0 || self.num_factors == 0 {
            return Err(Error::Config(
                "synth needs num_series, length and num_factors > 0".into(),
            ));
        }
        for (name, v) in [("noise", self.noise), ("gp_amplitude", self.gp_amplitude)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        if !(self.gp_lengthscale.is_finite() && self.gp_lengthscale > 0.0) {
            return Err(Error::Config(format!(
                "gp_lengthscale must be positive, got {}",
                self.gp_lengthscale
            )));
        }
        Ok(())
    }
}

/// The decomposition `z = f + r + ε` behind each generated series.
#[derive(Clone, Debug, PartialEq)]
pub struct SynthTruth {
    /// `K_true × T` factor paths.
    pub factors: Vec<Vec<f64>>,
    /// One `K_true` loading per series.
    pub embeddings: Vec<Vec<f64>>,
    pub fixed: Vec<Vec<f64>>,
    pub random: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthOutput {
    pub dataset: TimeSeriesDataset,
    pub truth: SynthTruth,
}

/// Sample `N` series from the fixed-plus-random-effect model.
pub fn synth_generate(config: &SynthConfig) -> Result<SynthOutput> {
    config.validate()?;
    let SynthConfig {
        num_series: n,
        length: t_len,
        num_factors: k,
        ..
    } = *config;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let factors: Vec<Vec<f64>> = (0..k)
        .map(|_| {
            let phases: Vec<f64> = FACTOR_HARMONICS
                .iter()
                .map(|_| rng.random_range(0.0..2.0 * PI))
                .collect();
            (0..t_len)
                .map(|t| {
                    FACTOR_HARMONICS
                        .iter()
                        .zip(&phases)
                        .map(|((period, weight), phase)| {
                            weight * (2.0 * PI * t as f64 / period + phase).sin()
                        })
                        .sum()
                })
                .collect()
        })
        .collect();

    let embeddings: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..k).map(|_| StandardNormal.sample(&mut rng)).collect())
        .collect();

    let fixed: Vec<Vec<f64>> = embeddings
        .iter()
        .map(|w| {
            (0..t_len)
                .map(|t| w.iter().zip(&factors).map(|(wk, g)| wk * g[t]).sum())
                .collect()
        })
        .collect();

    let gp_factor = if config.gp_amplitude > 0.0 {
        let grid: Vec<f64> = (0..t_len).map(|t| t as f64).collect();
        let params = KernelParams::new(config.gp_amplitude, config.gp_lengthscale, 1.0)?;
        let kmat = rbf_kernel_matrix(&grid, &grid, &params);
        Some(cholesky(&kmat, &DEFAULT_JITTER_SCHEDULE)?)
    } else {
        None
    };

    let t0 = config.start;
    let timestamps: Vec<DateTime<Utc>> =
        (0..t_len).map(|t| t0 + Duration::hours(t as i64)).collect();
    let mut random = Vec::with_capacity(n);
    let mut series = Vec::with_capacity(n);
    for (i, f) in fixed.iter().enumerate() {
        let r: Vec<f64> = match &gp_factor {
            Some(factor) => {
                let eps: Vec<f64> = (0..t_len).map(|_| StandardNormal.sample(&mut rng)).collect();
                let l = factor.lower();
                (0..t_len)
                    .map(|p| (0..=p).map(|q| l[(p, q)] * eps[q]).sum())
                    .collect()
            }
            None => vec![0.0; t_len],
        };
        let values: Vec<f64> = (0..t_len)
            .map(|t| {
                let e: f64 = StandardNormal.sample(&mut rng);
                f[t] + r[t] + config.noise * e
            })
            .collect();
        random.push(r);
        series.push(Series {
            id: format!("series_{i:03}"),
            timestamps: timestamps.clone(),
            values,
        });
    }

    Ok(SynthOutput {
        dataset: TimeSeriesDataset::new(series)?,
        truth: SynthTruth {
            factors,
            embeddings,
            fixed,
            random,
        },
    })
}

/// `series_id,timestamp,z,f,r` companion file.
pub fn write_ground_truth_csv(output: &SynthOutput, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(w, "series_id,timestamp,z,f,r").map_err(io)?;
    for (i, s) in output.dataset.series.iter().enumerate() {
        for t in 0..s.len() {
            writeln!(
                w,
                "{},{},{},{},{}",
                s.id,
                format_timestamp(&s.timestamps[t]),
                s.values[t],
                output.truth.fixed[i][t],
                output.truth.random[i][t]
            )
            .map_err(io)?;
        }
    }
    w.flush().map_err(io)
}
