/// Per-series magnitude scale `s = max(mean |z_train|, 1e-3)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SeriesScaler {
    pub scale: f64,
}

const SCALE_FLOOR: f64 = 1e-3;

impl SeriesScaler {
    /// Fit on the training window only.
    pub fn fit(train: &[f64]) -> Self {
        let mean_abs = if train.is_empty() {
            0.0
        } else {
            train.iter().map(|v| v.abs()).sum::<f64>() / train.len() as f64
        };
        Self {
            scale: mean_abs.max(SCALE_FLOOR),
        }
    }

    pub fn apply(&self, values: &[f64]) -> Vec<f64> {
        values.iter().map(|v| v / self.scale).collect()
    }

    pub fn inverse(&self, values: &[f64]) -> Vec<f64> {
        values.iter().map(|v| v * self.scale).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn mean_abs_scale() {
        let s = SeriesScaler::fit(&[2.0, 4.0]);
        assert_eq!(s.scale, 3.0);
        let z = s.apply(&[2.0, 4.0]);
        assert!((z[0] - 0.6667).abs() < 1e-4);
        assert!((z[1] - 1.3333).abs() < 1e-4);
    }

    #[test]
    fn zero_series_hits_floor() {
        assert_eq!(SeriesScaler::fit(&[0.0; 5]).scale, 1e-3);
    }

    proptest! {
        #[test]
        fn roundtrip(values in prop::collection::vec(-1e6f64..1e6, 1..50)) {
            let s = SeriesScaler::fit(&values);
            let back = s.inverse(&s.apply(&values));
            for (a, b) in values.iter().zip(&back) {
                prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1e-300));
            }
        }
    }
}
