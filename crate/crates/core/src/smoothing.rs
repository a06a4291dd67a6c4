//! Exponential level extraction and the log-ratio transform between price
//! space and model space.
//!
//! `smooth_level` tracks the local scale of a positive series,
//! `to_model_space` expresses the series as log-ratios against that level,
//! and `from_model_space` maps model outputs back to prices. The pipeline
//! integration (which columns are transformed, per-sample levels for
//! decoding) lives in [`crate::data::build_dataset`] behind
//! `WindowOptions::smoothing_alpha`.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Exponentially smoothed levels aligned with the source series.
#[derive(Clone, Debug, PartialEq)]
pub struct LevelSeries<T> {
    levels: Vec<T>,
    alpha: T,
}

impl<T: Scalar> LevelSeries<T> {
    pub fn levels(&self) -> &[T] {
        &self.levels
    }

    pub fn alpha(&self) -> T {
        self.alpha
    }

    pub fn into_levels(self) -> Vec<T> {
        self.levels
    }
}

/// `l_0 = y_0`, then `l_t = alpha*y_t + (1-alpha)*l_{t-1}`. The series must
/// be positive and `alpha` in (0, 1]; with `alpha = 1` the levels equal the
/// series.
pub fn smooth_level<T: Scalar>(series: &[T], alpha: T) -> Result<LevelSeries<T>> {
    if series.is_empty() {
        return Err(Error::InvalidArgument("series must not be empty".into()));
    }
    if !(alpha > T::zero() && alpha <= T::one()) || !alpha.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "smoothing coefficient {alpha} must lie in (0, 1]"
        )));
    }
    let one = T::one();
    let mut levels = Vec::with_capacity(series.len());
    let mut level = T::zero();
    for (t, &y) in series.iter().enumerate() {
        if !y.is_finite() || y <= T::zero() {
            return Err(Error::Data(format!(
                "series value {y} at index {t} must be positive and finite"
            )));
        }
        level = if t == 0 { y } else { alpha * y + (one - alpha) * level };
        levels.push(level);
    }
    Ok(LevelSeries { levels, alpha })
}

/// Elementwise `ln(series/levels)`.
pub fn to_model_space<T: Scalar>(series: &[T], levels: &[T]) -> Result<Vec<T>> {
    if series.len() != levels.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} series values but {} levels",
            series.len(),
            levels.len()
        )));
    }
    series
        .iter()
        .zip(levels)
        .enumerate()
        .map(|(t, (&y, &l))| {
            let ratio = y / l;
            if !ratio.is_finite() || ratio <= T::zero() {
                return Err(Error::Data(format!(
                    "non-positive value/level ratio at index {t}"
                )));
            }
            Ok(ratio.ln())
        })
        .collect()
}

/// Elementwise `levels * exp(outputs)`, the inverse of `to_model_space`.
pub fn from_model_space<T: Scalar>(outputs: &[T], levels: &[T]) -> Result<Vec<T>> {
    if outputs.len() != levels.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} outputs but {} levels",
            outputs.len(),
            levels.len()
        )));
    }
    for (t, &l) in levels.iter().enumerate() {
        if !l.is_finite() || l <= T::zero() {
            return Err(Error::Data(format!("level {l} at index {t} must be positive")));
        }
    }
    Ok(outputs.iter().zip(levels).map(|(&o, &l)| l * o.exp()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alpha_one_tracks_the_series() {
        let y = [3.0, 7.0, 2.0, 5.5];
        let l = smooth_level(&y, 1.0).unwrap();
        assert_eq!(l.levels(), &y);
        // and the model-space image is identically zero
        let x = to_model_space(&y, l.levels()).unwrap();
        assert!(x.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn one_recursion_step_by_hand() {
        let l = smooth_level::<f64>(&[1.0, 2.0], 0.8).unwrap();
        assert_eq!(l.levels()[0], 1.0);
        assert!((l.levels()[1] - 1.8).abs() < 1e-15);
    }

    #[test]
    fn constant_series_is_a_fixed_point() {
        let l = smooth_level::<f64>(&[4.0; 10], 0.3).unwrap();
        assert!(l.levels().iter().all(|&v| (v - 4.0).abs() < 1e-12));
    }

    #[test]
    fn rejects_bad_alpha_and_nonpositive_values() {
        assert!(smooth_level(&[1.0], 0.0).is_err());
        assert!(smooth_level(&[1.0], 1.0 + 1e-9).is_err());
        assert!(smooth_level(&[1.0], f64::NAN).is_err());
        assert!(smooth_level(&[1.0, -2.0], 0.5).is_err());
        assert!(smooth_level::<f64>(&[], 0.5).is_err());
    }

    #[test]
    fn log_ratio_hand_values() {
        let x = to_model_space(&[2.0], &[1.0]).unwrap();
        assert!((x[0] - std::f64::consts::LN_2).abs() < 1e-12);
        assert_eq!(to_model_space(&[5.0], &[5.0]).unwrap()[0], 0.0);
        let y = from_model_space(&[std::f64::consts::LN_2], &[3.0]).unwrap();
        assert!((y[0] - 6.0).abs() < 1e-12);
        assert_eq!(from_model_space(&[0.0], &[3.5]).unwrap()[0], 3.5);
    }

    #[test]
    fn roundtrip_is_exact_to_tolerance() {
        let y: Vec<f64> = (1..40).map(|i| 20.0 + (i as f64 * 0.7).sin() * 5.0).collect();
        let l = smooth_level(&y, 0.8).unwrap();
        let x = to_model_space(&y, l.levels()).unwrap();
        let back = from_model_space(&x, l.levels()).unwrap();
        for (a, b) in y.iter().zip(&back) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn levels_lag_a_rising_series() {
        let y: Vec<f64> = (0..50).map(|i| 10.0 + 0.5 * i as f64).collect();
        let l = smooth_level(&y, 0.6).unwrap();
        for (t, (&yv, &lv)) in y.iter().zip(l.levels()).enumerate() {
            assert!(lv <= yv + 1e-12, "level overtook series at {t}");
        }
    }

    #[test]
    fn mismatched_lengths_error() {
        assert!(to_model_space(&[1.0, 2.0], &[1.0]).is_err());
        assert!(from_model_space(&[0.0], &[1.0, 2.0]).is_err());
    }
}
