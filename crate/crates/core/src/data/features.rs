use std::f64::consts::PI;

use chrono::{DateTime, Datelike, Timelike, Utc};

use crate::error::Result;
use crate::numeric::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Feature {
    /// `(sin 2πh/24, cos 2πh/24)` for hour of day `h`.
    HourOfDay,
    /// `(sin 2πw/7, cos 2πw/7)` for weekday `w`, Monday = 0.
    DayOfWeek,
    /// Step index `t / train_window`, counting from 1 at the window start.
    LinearTime,
}

impl Feature {
    pub fn width(self) -> usize {
        match self {
            Feature::HourOfDay | Feature::DayOfWeek => 2,
            Feature::LinearTime => 1,
        }
    }
}

/// Ordered covariate layout shared by every series.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FeatureSpec {
    pub features: Vec<Feature>,
}

impl Default for FeatureSpec {
    fn default() -> Self {
        Self {
            features: vec![Feature::HourOfDay, Feature::DayOfWeek, Feature::LinearTime],
        }
    }
}

impl FeatureSpec {
    pub fn dim(&self) -> usize {
        self.features.iter().map(|f| f.width()).sum()
    }
}

/// `T × d` covariates for a window whose first timestamp is step 1.
pub fn build_features(
    timestamps: &[DateTime<Utc>],
    spec: &FeatureSpec,
    train_window: usize,
) -> Result<Tensor> {
    let d = spec.dim();
    let mut data = Vec::with_capacity(timestamps.len() * d);
    for (idx, ts) in timestamps.iter().enumerate() {
        for f in &spec.features {
            match f {
                Feature::HourOfDay => {
                    let angle = 2.0 * PI * ts.hour() as f64 / 24.0;
                    data.extend([angle.sin(), angle.cos()]);
                }
                Feature::DayOfWeek => {
                    let w = ts.weekday().num_days_from_monday() as f64;
                    let angle = 2.0 * PI * w / 7.0;
                    data.extend([angle.sin(), angle.cos()]);
                }
                Feature::LinearTime => data.push((idx + 1) as f64 / train_window as f64),
            }
        }
    }
    Tensor::matrix(timestamps.len(), d, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    fn at(y: i32, m: u32, d: u32, h: u32) -> DateTime<Utc> {
        Utc.with_ymd_and_hms(y, m, d, h, 0, 0).unwrap()
    }

    #[test]
    fn midnight_and_six() {
        let spec = FeatureSpec {
            features: vec![Feature::HourOfDay],
        };
        let x = build_features(&[at(2014, 1, 1, 0), at(2014, 1, 1, 6)], &spec, 168).unwrap();
        assert_eq!(x.data()[0], 0.0);
        assert_eq!(x.data()[1], 1.0);
        assert!((x.data()[2] - 1.0).abs() < 1e-12);
        assert!(x.data()[3].abs() < 1e-12);
    }

    #[test]
    fn thursday_afternoon() {
        // 2014-01-02 is a Thursday (weekday index 3).
        let x = build_features(&[at(2014, 1, 2, 15)], &FeatureSpec::default(), 168).unwrap();
        let expected = [
            -std::f64::consts::FRAC_1_SQRT_2,
            -std::f64::consts::FRAC_1_SQRT_2,
            0.433_883_739_117_558_1,
            -0.900_968_867_902_419_1,
            1.0 / 168.0,
        ];
        assert_eq!(x.shape(), &[1, 5]);
        for (a, b) in x.data().iter().zip(expected) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }
}
