use crate::error::{Error, Result};
use crate::numeric::Tensor;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Global L2 norm above which gradients are rescaled; `None` disables clipping.
    pub clip_norm: Option<f64>,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            clip_norm: Some(10.0),
        }
    }
}

/// First and second moment estimates, one pair per parameter tensor.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AdamState {
    pub m: Vec<Tensor>,
    pub v: Vec<Tensor>,
    pub step: u64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepReport {
    /// Global gradient norm before clipping.
    pub grad_norm: f64,
    pub applied: bool,
}

/// One clipped, bias-corrected Adam update in place.
///
/// Non-finite gradients, or an update that would make any parameter
/// non-finite, leave both `params` and `state` untouched and report
/// `applied: false`.
pub fn adam_step(
    params: &mut [&mut Tensor],
    grads: &[Tensor],
    state: &mut AdamState,
    config: &AdamConfig,
) -> Result<StepReport> {
    if params.len() != grads.len() {
        return Err(Error::Shape(format!(
            "{} parameters but {} gradients",
            params.len(),
            grads.len()
        )));
    }
    for (p, g) in params.iter().zip(grads) {
        p.check_same_shape(g, "adam_step")?;
    }
    if state.m.is_empty() {
        state.m = grads.iter().map(|g| Tensor::zeros(g.shape())).collect();
        state.v = state.m.clone();
    }

    let grad_norm = grads.iter().map(Tensor::squared_norm).sum::<f64>().sqrt();
    if !grad_norm.is_finite() {
        log::warn!("skipping optimizer step {}: non-finite gradient", state.step + 1);
        return Ok(StepReport {
            grad_norm,
            applied: false,
        });
    }
    let clip = match config.clip_norm {
        Some(c) if grad_norm > c => c / grad_norm,
        _ => 1.0,
    };

    let step = state.step + 1;
    let bc1 = 1.0 - config.beta1.powi(step as i32);
    let bc2 = 1.0 - config.beta2.powi(step as i32);
    let mut new_m = Vec::with_capacity(grads.len());
    let mut new_v = Vec::with_capacity(grads.len());
    let mut new_p = Vec::with_capacity(grads.len());
    for ((p, g), (m, v)) in params.iter().zip(grads).zip(state.m.iter().zip(&state.v)) {
        let mut m_next = m.clone();
        let mut v_next = v.clone();
        let mut p_next = (*p).clone();
        for k in 0..g.len() {
            let gk = g.data()[k] * clip;
            let mk = config.beta1 * m.data()[k] + (1.0 - config.beta1) * gk;
            let vk = config.beta2 * v.data()[k] + (1.0 - config.beta2) * gk * gk;
            m_next.data_mut()[k] = mk;
            v_next.data_mut()[k] = vk;
            p_next.data_mut()[k] -=
                config.learning_rate * (mk / bc1) / ((vk / bc2).sqrt() + config.epsilon);
        }
        if !p_next.is_finite() {
            log::warn!("skipping optimizer step {step}: update produced non-finite parameters");
            return Ok(StepReport {
                grad_norm,
                applied: false,
            });
        }
        new_m.push(m_next);
        new_v.push(v_next);
        new_p.push(p_next);
    }
    for (p, next) in params.iter_mut().zip(new_p) {
        **p = next;
    }
    state.m = new_m;
    state.v = new_v;
    state.step = step;
    Ok(StepReport {
        grad_norm,
        applied: true,
    })
}
