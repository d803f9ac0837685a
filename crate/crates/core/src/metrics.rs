//! Forecast evaluation: quantile losses, RMSE and interval coverage.
//!
//! All functions take flattened `(series, step)` pairs in matching order and
//! operate on values in original units.

use crate::error::{Error, Result};

/// `2[ρ(z−ẑ)·1{z−ẑ>0} + (1−ρ)(ẑ−z)·1{z−ẑ≤0}]`.
pub fn quantile_loss(target: f64, prediction: f64, rho: f64) -> f64 {
    let diff = target - prediction;
    if diff > 0.0 {
        2.0 * rho * diff
    } else {
        2.0 * (1.0 - rho) * (prediction - target)
    }
}

fn check_lengths(targets: &[f64], predictions: &[f64]) -> Result<()> {
    if targets.len() != predictions.len() {
        return Err(Error::Shape(format!(
            "{} targets vs {} predictions",
            targets.len(),
            predictions.len()
        )));
    }
    Ok(())
}

/// `Σ QL_ρ(z, ẑ) / Σ |z|`.
pub fn normalized_quantile_loss(targets: &[f64], predictions: &[f64], rho: f64) -> Result<f64> {
    check_lengths(targets, predictions)?;
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::Domain(format!("quantile level {rho} outside (0, 1)")));
    }
    let denom: f64 = targets.iter().map(|z| z.abs()).sum();
    if denom == 0.0 {
        return Err(Error::DegenerateNormalizer(
            "sum of |targets| is zero".into(),
        ));
    }
    let num: f64 = targets
        .iter()
        .zip(predictions)
        .map(|(&z, &p)| quantile_loss(z, p, rho))
        .sum();
    Ok(num / denom)
}

/// `√(Σ (z − ẑ)² / (N·τ))` over every evaluated pair.
pub fn rmse(targets: &[f64], predictions: &[f64]) -> Result<f64> {
    check_lengths(targets, predictions)?;
    if targets.is_empty() {
        return Err(Error::DegenerateNormalizer("empty evaluation set".into()));
    }
    let sse: f64 = targets
        .iter()
        .zip(predictions)
        .map(|(z, p)| (z - p).powi(2))
        .sum();
    Ok((sse / targets.len() as f64).sqrt())
}

/// Fraction of targets inside `[lower, upper]`; 0 for an empty set.
pub fn interval_coverage(targets: &[f64], lower: &[f64], upper: &[f64]) -> Result<f64> {
    check_lengths(targets, lower)?;
    check_lengths(targets, upper)?;
    if let Some(k) = lower.iter().zip(upper).position(|(l, u)| l > u) {
        return Err(Error::Domain(format!(
            "interval {k} has lower {} > upper {}",
            lower[k], upper[k]
        )));
    }
    if targets.is_empty() {
        return Ok(0.0);
    }
    let inside = targets
        .iter()
        .zip(lower.iter().zip(upper))
        .filter(|(z, (l, u))| *l <= *z && *z <= *u)
        .count();
    Ok(inside as f64 / targets.len() as f64)
}

/// Table-style summary of one evaluation span.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    /// `(ρ, normalized quantile loss)` in increasing `ρ`.
    pub quantile_losses: Vec<(f64, f64)>,
    pub rmse: f64,
    /// `(lower ρ, upper ρ, coverage)`.
    pub coverage: Vec<(f64, f64, f64)>,
    pub n_points: usize,
    pub horizon: usize,
}

impl EvalReport {
    pub fn quantile_loss(&self, rho: f64) -> Option<f64> {
        self.quantile_losses
            .iter()
            .find(|(r, _)| (r - rho).abs() < 1e-12)
            .map(|(_, v)| *v)
    }

    pub fn coverage(&self, lower: f64, upper: f64) -> Option<f64> {
        self.coverage
            .iter()
            .find(|(l, u, _)| (l - lower).abs() < 1e-12 && (u - upper).abs() < 1e-12)
            .map(|(_, _, c)| *c)
    }
}

/// Column name for a quantile level: `0.9 → "p90"`, `0.025 → "p2.5"`.
pub fn quantile_key(rho: f64) -> String {
    let pct = rho * 100.0;
    let rounded = pct.round();
    if (pct - rounded).abs() < 1e-9 {
        format!("p{}", rounded as i64)
    } else {
        format!("p{}", (pct * 1e6).round() / 1e6)
    }
}

/// Evaluate quantile forecasts. `quantiles` pairs each level with its
/// predictions; coverage is reported for every symmetric `(ρ, 1−ρ)` pair present.
pub fn evaluate(
    targets: &[f64],
    means: &[f64],
    quantiles: &[(f64, Vec<f64>)],
    horizon: usize,
) -> Result<EvalReport> {
    let mut quantile_losses = Vec::with_capacity(quantiles.len());
    for (rho, preds) in quantiles {
        quantile_losses.push((*rho, normalized_quantile_loss(targets, preds, *rho)?));
    }
    quantile_losses.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut coverage = Vec::new();
    for (lo, lo_preds) in quantiles {
        if *lo >= 0.5 {
            continue;
        }
        if let Some((hi, hi_preds)) = quantiles.iter().find(|(r, _)| (r - (1.0 - lo)).abs() < 1e-9) {
            coverage.push((*lo, *hi, interval_coverage(targets, lo_preds, hi_preds)?));
        }
    }
    coverage.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(EvalReport {
        quantile_losses,
        rmse: rmse(targets, means)?,
        coverage,
        n_points: targets.len(),
        horizon,
    })
}
