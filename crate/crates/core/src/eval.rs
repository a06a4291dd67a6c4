//! Forecast-accuracy metrics and per-period report assembly.
//!
//! All metrics take `(actual, predicted)` in that order and are meant to be
//! computed on price-space (denormalized) series. Shape violations are
//! argument errors; value degeneracies (a zero actual in the percentage
//! error, a constant series in the correlation) are numerical errors.

use std::fmt::Write as _;
use std::ops::Range;
use std::path::Path;

use chrono::{Datelike, NaiveDate};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

fn check_pair<T>(actual: &[T], predicted: &[T], min_len: usize) -> Result<()> {
    if actual.len() != predicted.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} actual values but {} predictions",
            actual.len(),
            predicted.len()
        )));
    }
    if actual.len() < min_len {
        return Err(Error::InvalidArgument(format!(
            "need at least {min_len} observations, got {}",
            actual.len()
        )));
    }
    Ok(())
}

/// Mean absolute percentage error as a fraction: `(1/N) * sum |(p - a)/a|`.
pub fn mape<T: Scalar>(actual: &[T], predicted: &[T]) -> Result<T> {
    check_pair(actual, predicted, 1)?;
    let mut sum = T::zero();
    for (t, (&a, &p)) in actual.iter().zip(predicted).enumerate() {
        if a == T::zero() {
            return Err(Error::Numerical(format!(
                "actual value at index {t} is zero; percentage error undefined"
            )));
        }
        sum += ((p - a) / a).abs();
    }
    Ok(sum / T::from(actual.len()).unwrap())
}

/// RMS error divided by the sum of the two series' RMS magnitudes; 0 is a
/// perfect forecast, and the value always lies in [0, 1].
pub fn theil_u<T: Scalar>(actual: &[T], predicted: &[T]) -> Result<T> {
    check_pair(actual, predicted, 1)?;
    let n = T::from(actual.len()).unwrap();
    let mean_sq = |xs: &[T]| xs.iter().map(|&x| x * x).sum::<T>() / n;
    let rms_err = actual
        .iter()
        .zip(predicted)
        .map(|(&a, &p)| (p - a) * (p - a))
        .sum::<T>()
        / n;
    let denom = mean_sq(predicted).sqrt() + mean_sq(actual).sqrt();
    if denom == T::zero() {
        return Err(Error::Numerical(
            "both series are identically zero; relative error undefined".into(),
        ));
    }
    Ok(rms_err.sqrt() / denom)
}

/// Standard linear correlation coefficient.
pub fn pearson_r<T: Scalar>(actual: &[T], predicted: &[T]) -> Result<T> {
    check_pair(actual, predicted, 2)?;
    let n = T::from(actual.len()).unwrap();
    let mean = |xs: &[T]| xs.iter().copied().sum::<T>() / n;
    let (ma, mp) = (mean(actual), mean(predicted));
    let mut cov = T::zero();
    let mut va = T::zero();
    let mut vp = T::zero();
    for (&a, &p) in actual.iter().zip(predicted) {
        cov += (a - ma) * (p - mp);
        va += (a - ma) * (a - ma);
        vp += (p - mp) * (p - mp);
    }
    if va == T::zero() || vp == T::zero() {
        return Err(Error::Numerical(
            "a constant series has no defined correlation".into(),
        ));
    }
    Ok(cov / (va * vp).sqrt())
}

/// Fraction of days whose predicted move has the same sign as the actual
/// move; a zero product (either side flat) counts as a miss.
pub fn directional_accuracy<T: Scalar>(actual: &[T], predicted: &[T]) -> Result<T> {
    check_pair(actual, predicted, 2)?;
    let mut hits = 0usize;
    for t in 1..actual.len() {
        let product = (actual[t] - actual[t - 1]) * (predicted[t] - predicted[t - 1]);
        if product > T::zero() {
            hits += 1;
        }
    }
    Ok(T::from(hits).unwrap() / T::from(actual.len() - 1).unwrap())
}

/// Coefficient of determination `1 - SSE/SST`; can be negative for
/// predictions worse than the actual mean.
pub fn r_squared<T: Scalar>(actual: &[T], predicted: &[T]) -> Result<T> {
    check_pair(actual, predicted, 2)?;
    let n = T::from(actual.len()).unwrap();
    let mean = actual.iter().copied().sum::<T>() / n;
    let mut sse = T::zero();
    let mut sst = T::zero();
    for (&a, &p) in actual.iter().zip(predicted) {
        sse += (a - p) * (a - p);
        sst += (a - mean) * (a - mean);
    }
    if sst == T::zero() {
        return Err(Error::Numerical(
            "actual series is constant; coefficient of determination undefined".into(),
        ));
    }
    Ok(T::one() - sse / sst)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PeriodMode {
    /// 365-day windows counted from the first date, labeled "Year 1", ...
    Rolling365,
    /// Calendar years, labeled by year number.
    CalendarYear,
}

/// Splits sorted dates into contiguous period ranges; empty periods (a gap
/// longer than a window) are skipped.
pub fn partition_periods(dates: &[NaiveDate], mode: PeriodMode) -> Vec<(String, Range<usize>)> {
    let mut out = Vec::new();
    if dates.is_empty() {
        return out;
    }
    match mode {
        PeriodMode::Rolling365 => {
            let first = dates[0];
            let mut year = 1usize;
            let mut start_idx = 0usize;
            while start_idx < dates.len() {
                let end_date = first + chrono::Days::new(365 * year as u64);
                let end_idx = start_idx
                    + dates[start_idx..].partition_point(|d| *d < end_date);
                if end_idx > start_idx {
                    out.push((format!("Year {year}"), start_idx..end_idx));
                }
                start_idx = end_idx;
                year += 1;
            }
        }
        PeriodMode::CalendarYear => {
            let mut start_idx = 0usize;
            while start_idx < dates.len() {
                let y = dates[start_idx].year();
                let end_idx = start_idx + dates[start_idx..].partition_point(|d| d.year() == y);
                out.push((y.to_string(), start_idx..end_idx));
                start_idx = end_idx;
            }
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct PeriodMetrics {
    pub label: String,
    pub observations: usize,
    pub mape: f64,
    pub theil_u: f64,
    pub pearson_r: f64,
    pub directional_accuracy: f64,
    pub r_squared: f64,
}

pub const METRIC_NAMES: [&str; 5] =
    ["mape", "theil_u", "pearson_r", "directional_accuracy", "r_squared"];

impl PeriodMetrics {
    pub fn values(&self) -> [f64; 5] {
        [self.mape, self.theil_u, self.pearson_r, self.directional_accuracy, self.r_squared]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricReport {
    pub periods: Vec<PeriodMetrics>,
    /// Arithmetic mean of each metric over the periods.
    pub average: PeriodMetrics,
}

impl MetricReport {
    /// Grid CSV: one row per metric, one column per period plus the average.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = String::from("metric");
        for p in &self.periods {
            let _ = write!(out, ",{}", p.label);
        }
        out.push_str(",Average\n");
        for (k, name) in METRIC_NAMES.iter().enumerate() {
            let _ = write!(out, "{name}");
            for p in &self.periods {
                let _ = write!(out, ",{}", p.values()[k]);
            }
            let _ = writeln!(out, ",{}", self.average.values()[k]);
        }
        std::fs::write(path, out)?;
        Ok(())
    }

    /// Human-readable block, one period per paragraph.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        for p in self.periods.iter().chain(std::iter::once(&self.average)) {
            let _ = writeln!(out, "{} ({} observations)", p.label, p.observations);
            for (name, value) in METRIC_NAMES.iter().zip(p.values()) {
                let _ = writeln!(out, "  {name:<22} {value:.6}");
            }
        }
        out
    }
}

/// Computes all five metrics per period and their arithmetic mean. Periods
/// with fewer than two observations are omitted with a warning on stderr.
pub fn yearly_report(
    dates: &[NaiveDate],
    actual: &[f64],
    predicted: &[f64],
    mode: PeriodMode,
) -> Result<MetricReport> {
    if dates.len() != actual.len() || dates.len() != predicted.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} dates, {} actual values, {} predictions",
            dates.len(),
            actual.len(),
            predicted.len()
        )));
    }
    if dates.windows(2).any(|p| p[0] >= p[1]) {
        return Err(Error::InvalidArgument("dates must be strictly increasing".into()));
    }
    let mut periods = Vec::new();
    for (label, range) in partition_periods(dates, mode) {
        if range.len() < 2 {
            eprintln!(
                "warning: skipping period {label}: {} observation(s) is too few for metrics",
                range.len()
            );
            continue;
        }
        let a = &actual[range.clone()];
        let p = &predicted[range.clone()];
        periods.push(PeriodMetrics {
            label,
            observations: range.len(),
            mape: mape(a, p)?,
            theil_u: theil_u(a, p)?,
            pearson_r: pearson_r(a, p)?,
            directional_accuracy: directional_accuracy(a, p)?,
            r_squared: r_squared(a, p)?,
        });
    }
    if periods.is_empty() {
        return Err(Error::Data("no period has enough observations for a report".into()));
    }
    let n = periods.len() as f64;
    let mean = |f: fn(&PeriodMetrics) -> f64| periods.iter().map(f).sum::<f64>() / n;
    let average = PeriodMetrics {
        label: "Average".into(),
        observations: periods.iter().map(|p| p.observations).sum(),
        mape: mean(|p| p.mape),
        theil_u: mean(|p| p.theil_u),
        pearson_r: mean(|p| p.pearson_r),
        directional_accuracy: mean(|p| p.directional_accuracy),
        r_squared: mean(|p| p.r_squared),
    };
    Ok(MetricReport { periods, average })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mape_hand_values() {
        assert_eq!(mape(&[100.0], &[99.0]).unwrap(), 0.01);
        assert_eq!(mape(&[5.0, 7.0], &[5.0, 7.0]).unwrap(), 0.0);
        // scale invariance
        let y = [3.0, 9.0, 4.5];
        let p = [2.5, 9.5, 4.0];
        let scaled: Vec<f64> = y.iter().map(|v| v * 7.0).collect();
        let pscaled: Vec<f64> = p.iter().map(|v| v * 7.0).collect();
        assert!((mape(&y, &p).unwrap() - mape(&scaled, &pscaled).unwrap()).abs() < 1e-12);
        assert!(mape(&[0.0], &[1.0]).is_err());
    }

    #[test]
    fn theil_hand_values_and_bounds() {
        assert_eq!(theil_u(&[1.0], &[3.0]).unwrap(), 0.5);
        assert_eq!(theil_u(&[2.0, 4.0], &[2.0, 4.0]).unwrap(), 0.0);
        // symmetric in its arguments
        let y: [f64; 3] = [1.0, 5.0, 2.0];
        let p = [2.0, 4.0, 2.5];
        assert!((theil_u(&y, &p).unwrap() - theil_u(&p, &y).unwrap()).abs() < 1e-15);
        for i in 0..20 {
            let a: Vec<f64> = (0..10).map(|j| 1.0 + ((i * 10 + j) as f64 * 0.37).sin().abs()).collect();
            let b: Vec<f64> = (0..10).map(|j| 1.0 + ((i * 7 + j) as f64 * 0.53).cos().abs()).collect();
            let u = theil_u(&a, &b).unwrap();
            assert!((0.0..=1.0).contains(&u), "u={u}");
        }
        assert!(theil_u(&[0.0], &[0.0]).is_err());
    }

    #[test]
    fn pearson_hand_values() {
        let r: f64 = pearson_r(&[1.0, 2.0, 3.0], &[1.0, 2.0, 2.0]).unwrap();
        assert!((r - 0.8660254037844387).abs() < 1e-12);
        let y = [1.0, 2.0, 5.0];
        let affine: Vec<f64> = y.iter().map(|v| 3.0 * v + 1.0).collect();
        assert!((pearson_r(&y, &affine).unwrap() - 1.0).abs() < 1e-12);
        let negated: Vec<f64> = y.iter().map(|v| -v).collect();
        assert!((pearson_r(&y, &negated).unwrap() + 1.0).abs() < 1e-12);
        assert!(pearson_r(&[1.0, 1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn directional_accuracy_hand_values() {
        assert_eq!(directional_accuracy(&[1.0, 2.0, 1.0], &[1.0, 2.0, 3.0]).unwrap(), 0.5);
        let y = [1.0, 3.0, 2.0, 5.0];
        assert_eq!(directional_accuracy(&y, &y).unwrap(), 1.0);
        let negated: Vec<f64> = y.iter().map(|v| -v).collect();
        assert_eq!(directional_accuracy(&y, &negated).unwrap(), 0.0);
        // flat predicted move is a miss
        assert_eq!(directional_accuracy(&[1.0, 2.0], &[1.0, 1.0]).unwrap(), 0.0);
        assert!(directional_accuracy(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn da_invariant_under_increasing_transforms() {
        let y: [f64; 5] = [1.0, 3.0, 2.0, 5.0, 4.0];
        let p: [f64; 5] = [1.5, 2.0, 2.5, 4.0, 3.0];
        let base = directional_accuracy(&y, &p).unwrap();
        let fy: Vec<f64> = y.iter().map(|v| v.exp()).collect();
        let fp: Vec<f64> = p.iter().map(|v| v.exp()).collect();
        assert_eq!(base, directional_accuracy(&fy, &fp).unwrap());
    }

    #[test]
    fn r_squared_reference_points() {
        let y: [f64; 4] = [1.0, 2.0, 3.0, 4.0];
        assert!((r_squared(&y, &y).unwrap() - 1.0).abs() < 1e-15);
        let mean = [2.5; 4];
        assert!(r_squared(&y, &mean).unwrap().abs() < 1e-15);
        assert!(r_squared(&[2.0, 2.0], &[1.0, 3.0]).is_err());
    }

    fn daily_dates(start: (i32, u32, u32), n: usize) -> Vec<NaiveDate> {
        let d0 = NaiveDate::from_ymd_opt(start.0, start.1, start.2).unwrap();
        (0..n).map(|i| d0 + chrono::Days::new(i as u64)).collect()
    }

    #[test]
    fn rolling_periods_cut_at_365_days() {
        let dates = daily_dates((2002, 1, 2), 400);
        let periods = partition_periods(&dates, PeriodMode::Rolling365);
        assert_eq!(periods.len(), 2);
        assert_eq!(periods[0], ("Year 1".to_string(), 0..365));
        assert_eq!(periods[1], ("Year 2".to_string(), 365..400));
    }

    #[test]
    fn calendar_periods_use_year_numbers() {
        let dates = daily_dates((2002, 12, 30), 5);
        let periods = partition_periods(&dates, PeriodMode::CalendarYear);
        assert_eq!(periods.len(), 2);
        assert_eq!(periods[0].0, "2002");
        assert_eq!(periods[1].0, "2003");
        let total: usize = periods.iter().map(|(_, r)| r.len()).sum();
        assert_eq!(total, dates.len());
    }

    fn wavy(n: usize, phase: f64) -> Vec<f64> {
        (0..n).map(|i| 100.0 + 5.0 * ((i as f64) * 0.21 + phase).sin()).collect()
    }

    #[test]
    fn report_average_is_the_mean_of_periods() {
        let dates = daily_dates((2002, 1, 2), 500);
        let actual = wavy(500, 0.0);
        let predicted = wavy(500, 0.07);
        let report = yearly_report(&dates, &actual, &predicted, PeriodMode::Rolling365).unwrap();
        assert_eq!(report.periods.len(), 2);
        let mean_mape =
            report.periods.iter().map(|p| p.mape).sum::<f64>() / report.periods.len() as f64;
        assert!((report.average.mape - mean_mape).abs() < 1e-12);
        assert_eq!(report.average.observations, 500);
    }

    #[test]
    fn single_period_average_equals_period() {
        let dates = daily_dates((2002, 1, 2), 100);
        let actual = wavy(100, 0.0);
        let predicted = wavy(100, 0.1);
        let report = yearly_report(&dates, &actual, &predicted, PeriodMode::Rolling365).unwrap();
        assert_eq!(report.periods.len(), 1);
        assert_eq!(report.average.values(), report.periods[0].values());
    }

    #[test]
    fn undersized_period_is_omitted() {
        // 366 dates: Year 1 has 365, Year 2 has a single observation
        let dates = daily_dates((2002, 1, 2), 366);
        let actual = wavy(366, 0.0);
        let predicted = wavy(366, 0.1);
        let report = yearly_report(&dates, &actual, &predicted, PeriodMode::Rolling365).unwrap();
        assert_eq!(report.periods.len(), 1);
        assert_eq!(report.periods[0].label, "Year 1");
    }

    #[test]
    fn report_csv_grid_shape() {
        let dates = daily_dates((2002, 1, 2), 500);
        let actual = wavy(500, 0.0);
        let predicted = wavy(500, 0.05);
        let report = yearly_report(&dates, &actual, &predicted, PeriodMode::Rolling365).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("metrics.csv");
        report.write_csv(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "metric,Year 1,Year 2,Average");
        assert_eq!(lines.count(), METRIC_NAMES.len());
    }
}
