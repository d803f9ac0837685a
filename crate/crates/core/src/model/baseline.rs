/// Seasonal-naive point forecast: repeat the last observed season.
///
/// Step `h` (1-based) copies the 1-based observation `T + h − period·⌈h/period⌉`, which is
/// `z_{T+h−period}` whenever `h ≤ period`. Returns `None` when the history is
/// shorter than one period.
pub fn seasonal_naive(history: &[f64], horizon: usize, period: usize) -> Option<Vec<f64>> {
    let t = history.len();
    if period == 0 || t < period {
        return None;
    }
    Some(
        (1..=horizon)
            .map(|h| {
                let back = period * h.div_ceil(period);
                history[t + h - 1 - back]
            })
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn repeats_last_period() {
        let hist: Vec<f64> = (0..6).map(f64::from).collect();
        assert_eq!(seasonal_naive(&hist, 3, 3).unwrap(), vec![3.0, 4.0, 5.0]);
        assert_eq!(
            seasonal_naive(&hist, 7, 3).unwrap(),
            vec![3.0, 4.0, 5.0, 3.0, 4.0, 5.0, 3.0]
        );
        assert!(seasonal_naive(&hist[..2], 1, 3).is_none());
        assert!(seasonal_naive(&hist, 0, 3).unwrap().is_empty());
    }
}
