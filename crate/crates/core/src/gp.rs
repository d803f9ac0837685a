//! Local random effects: an RBF-kernel Gaussian process per series.
//!
//! The negative log marginal likelihood joins the autodiff tape as a custom
//! node whose gradients are closed-form, so nothing differentiates through
//! the Cholesky factorization.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::linalg::{cholesky, Matrix, DEFAULT_JITTER_SCHEDULE};
use crate::numeric::{Tape, Tensor, Var};

/// Floor applied to predictive variances.
pub const VARIANCE_FLOOR: f64 = 1e-12;

/// RBF amplitude, lengthscale and observation noise, stored as logs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelParams {
    pub log_amplitude: f64,
    pub log_lengthscale: f64,
    pub log_noise: f64,
}

impl KernelParams {
    pub fn new(amplitude: f64, lengthscale: f64, noise: f64) -> Result<Self> {
        let p = Self {
            log_amplitude: amplitude.ln(),
            log_lengthscale: lengthscale.ln(),
            log_noise: noise.ln(),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn from_logs(logs: [f64; 3]) -> Self {
        Self {
            log_amplitude: logs[0],
            log_lengthscale: logs[1],
            log_noise: logs[2],
        }
    }

    pub fn to_logs(self) -> [f64; 3] {
        [self.log_amplitude, self.log_lengthscale, self.log_noise]
    }

    pub fn amplitude(&self) -> f64 {
        self.log_amplitude.exp()
    }

    pub fn lengthscale(&self) -> f64 {
        self.log_lengthscale.exp()
    }

    pub fn noise(&self) -> f64 {
        self.log_noise.exp()
    }

    /// Prior marginal variance of an observation, `a² + σ²`.
    pub fn prior_variance(&self) -> f64 {
        self.amplitude().powi(2) + self.noise().powi(2)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("amplitude", self.amplitude()),
            ("lengthscale", self.lengthscale()),
            ("noise", self.noise()),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::numeric("kernel_params", format!("{name} = {v}")));
            }
        }
        Ok(())
    }
}

/// GP inputs for steps `first..first+count` (1-based) on a window of `train_len` steps: `t / train_len`.
pub fn time_inputs(first: usize, count: usize, train_len: usize) -> Vec<f64> {
    (first..first + count)
        .map(|t| t as f64 / train_len as f64)
        .collect()
}

/// `a²·exp(−(x − x')² / 2ℓ²)` for every pair.
pub fn rbf_kernel_matrix(x1: &[f64], x2: &[f64], params: &KernelParams) -> Matrix {
    let a2 = params.amplitude().powi(2);
    let inv_two_l2 = 0.5 / params.lengthscale().powi(2);
    Matrix::from_fn(x1.len(), x2.len(), |p, q| {
        let d = x1[p] - x2[q];
        a2 * (-d * d * inv_two_l2).exp()
    })
}

fn noisy_covariance(inputs: &[f64], params: &KernelParams) -> Matrix {
    let mut k = rbf_kernel_matrix(inputs, inputs, params);
    k.add_diagonal(params.noise().powi(2));
    k
}

/// Negative log marginal likelihood and its closed-form gradients.
#[derive(Clone, Debug)]
pub struct NllWithGrad {
    pub value: f64,
    /// `∂NLL/∂r = (K + σ²I)⁻¹ r`.
    pub d_residuals: Vec<f64>,
    /// Gradient w.r.t. `[log a, log ℓ, log σ]`.
    pub d_log_params: [f64; 3],
    pub jitter: f64,
}

/// `½ rᵀ(K+σ²I)⁻¹r + ½ log|K+σ²I| + (n/2) log 2π` with gradients.
pub fn gp_nll(residuals: &[f64], inputs: &[f64], params: &KernelParams) -> Result<NllWithGrad> {
    let n = residuals.len();
    if n == 0 || inputs.len() != n {
        return Err(Error::Shape(format!(
            "gp_nll: {n} residuals for {} inputs",
            inputs.len()
        )));
    }
    params.validate()?;
    let k_rbf = rbf_kernel_matrix(inputs, inputs, params);
    let mut ky = k_rbf.clone();
    let noise_var = params.noise().powi(2);
    ky.add_diagonal(noise_var);
    let factor = cholesky(&ky, &DEFAULT_JITTER_SCHEDULE)?;
    let alpha = factor.solve(residuals)?;
    let quad: f64 = residuals.iter().zip(&alpha).map(|(r, a)| r * a).sum();
    let value = 0.5 * quad + 0.5 * factor.log_det() + 0.5 * n as f64 * (2.0 * PI).ln();

    // ½ tr((Ky⁻¹ − ααᵀ) ∂Ky/∂θ) for each log-hyperparameter.
    let inv = factor.inverse()?;
    let inv_l2 = 1.0 / params.lengthscale().powi(2);
    let (mut d_amp, mut d_len, mut d_noise) = (0.0, 0.0, 0.0);
    for p in 0..n {
        for q in 0..n {
            let w = inv[(p, q)] - alpha[p] * alpha[q];
            let k = k_rbf[(p, q)];
            let d = inputs[p] - inputs[q];
            d_amp += w * 2.0 * k;
            d_len += w * k * d * d * inv_l2;
        }
        d_noise += (inv[(p, p)] - alpha[p] * alpha[p]) * 2.0 * noise_var;
    }
    let out = NllWithGrad {
        value,
        d_residuals: alpha,
        d_log_params: [0.5 * d_amp, 0.5 * d_len, 0.5 * d_noise],
        jitter: factor.jitter(),
    };
    if !out.value.is_finite() || !out.d_log_params.iter().all(|v| v.is_finite()) {
        return Err(Error::numeric("gp_nll", "non-finite likelihood or gradient"));
    }
    Ok(out)
}

/// Attach a precomputed [`NllWithGrad`] to the tape as a node over
/// `residuals` (shape `[n]`) and `log_params` (3 entries, any shape).
pub fn nll_node<'t>(
    tape: &'t Tape,
    residuals: Var<'t>,
    log_params: Var<'t>,
    nll: NllWithGrad,
) -> Result<Var<'t>> {
    let r_shape = residuals.shape();
    let p_shape = log_params.shape();
    let d_r = Tensor::new(r_shape, nll.d_residuals)?;
    let d_p = Tensor::new(p_shape, nll.d_log_params.to_vec())?;
    tape.custom(
        "gp_nll",
        Tensor::scalar(nll.value),
        &[residuals, log_params],
        Box::new(move |g, _, _| {
            let g = g.item()?;
            Ok(vec![d_r.scaled(g), d_p.scaled(g)])
        }),
    )
}

/// Evaluate [`gp_nll`] on the current values of `residuals` and `log_params` and record it.
pub fn nll_on_tape<'t>(
    tape: &'t Tape,
    residuals: Var<'t>,
    log_params: Var<'t>,
    inputs: &[f64],
) -> Result<Var<'t>> {
    let r = residuals.value();
    let logs = log_params.value();
    if logs.len() != 3 {
        return Err(Error::Shape(format!(
            "kernel parameters need 3 entries, got {:?}",
            logs.shape()
        )));
    }
    let params = KernelParams::from_logs([logs.data()[0], logs.data()[1], logs.data()[2]]);
    let nll = gp_nll(r.data(), inputs, &params)?;
    nll_node(tape, residuals, log_params, nll)
}

/// Posterior predictive marginals of the residual process (observation noise included).
#[derive(Clone, Debug, PartialEq)]
pub struct GpPosterior {
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
}

pub fn gp_posterior(
    train_x: &[f64],
    train_residuals: &[f64],
    test_x: &[f64],
    params: &KernelParams,
) -> Result<GpPosterior> {
    if train_x.is_empty() || train_x.len() != train_residuals.len() {
        return Err(Error::Shape(format!(
            "gp_posterior: {} inputs for {} residuals",
            train_x.len(),
            train_residuals.len()
        )));
    }
    params.validate()?;
    let factor = cholesky(&noisy_covariance(train_x, params), &DEFAULT_JITTER_SCHEDULE)?;
    let alpha = factor.solve(train_residuals)?;
    let k_star = rbf_kernel_matrix(test_x, train_x, params);
    let prior = params.prior_variance();
    let mut mean = Vec::with_capacity(test_x.len());
    let mut variance = Vec::with_capacity(test_x.len());
    for q in 0..test_x.len() {
        let kq = k_star.row(q);
        mean.push(crate::linalg::dot(kq, &alpha));
        let v = factor.solve_triangular(kq, false)?;
        let explained: f64 = v.iter().map(|x| x * x).sum();
        variance.push((prior - explained).max(VARIANCE_FLOOR));
    }
    Ok(GpPosterior { mean, variance })
}
