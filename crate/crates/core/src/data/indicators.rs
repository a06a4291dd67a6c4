//! Technical indicators over daily bars.
//!
//! Indicator outputs are aligned to the input series; positions inside an
//! indicator's warm-up carry NaN, and consumers are expected to start at
//! [`FeatureFrame::valid_from`].

use chrono::NaiveDate;

use super::OhlcvBar;
use crate::error::{Error, Result};

/// Difference between today's close and the close `lookback` days earlier,
/// the momentum series used for the 5- and 10-day columns.
pub fn close_change(closes: &[f64], lookback: usize) -> Vec<f64> {
    assert!(lookback >= 1, "lookback must be at least 1");
    (0..closes.len())
        .map(|t| {
            if t < lookback {
                f64::NAN
            } else {
                closes[t] - closes[t - lookback]
            }
        })
        .collect()
}

/// Conventional trailing mean over `window` values including today.
pub fn rolling_mean(values: &[f64], window: usize) -> Vec<f64> {
    assert!(window >= 1, "window must be at least 1");
    (0..values.len())
        .map(|t| {
            if t + 1 < window {
                f64::NAN
            } else {
                values[t + 1 - window..=t].iter().sum::<f64>() / window as f64
            }
        })
        .collect()
}

/// Exponential moving average with `alpha = 2/(n+1)`, seeded with the first
/// value. Defined from index 0.
pub fn ema(values: &[f64], n: usize) -> Vec<f64> {
    assert!(n >= 1, "period must be at least 1");
    let alpha = 2.0 / (n as f64 + 1.0);
    let mut out = Vec::with_capacity(values.len());
    let mut level = match values.first() {
        Some(&v) => v,
        None => return out,
    };
    out.push(level);
    for &v in &values[1..] {
        level += alpha * (v - level);
        out.push(level);
    }
    out
}

/// 12-day EMA minus 26-day EMA; reported from index 26 so the slow EMA has a
/// full period behind it.
pub fn macd(closes: &[f64]) -> Vec<f64> {
    let fast = ema(closes, 12);
    let slow = ema(closes, 26);
    fast.iter()
        .zip(&slow)
        .enumerate()
        .map(|(t, (f, s))| if t < 26 { f64::NAN } else { f - s })
        .collect()
}

/// True range: `max(high-low, |high-prev_close|, |low-prev_close|)`. Index 0
/// has no previous close and carries NaN.
pub fn true_range(bars: &[OhlcvBar]) -> Vec<f64> {
    (0..bars.len())
        .map(|t| {
            if t == 0 {
                return f64::NAN;
            }
            let b = &bars[t];
            let pc = bars[t - 1].close;
            (b.high - b.low)
                .max((b.high - pc).abs())
                .max((b.low - pc).abs())
        })
        .collect()
}

/// Average true range: seeded at index `period` with the mean of the first
/// `period` true ranges, then smoothed as
/// `((period-1)*prev + TR)/period`.
pub fn atr(bars: &[OhlcvBar], period: usize) -> Vec<f64> {
    assert!(period >= 1, "period must be at least 1");
    let tr = true_range(bars);
    let mut out = vec![f64::NAN; bars.len()];
    if bars.len() <= period {
        return out;
    }
    let seed = tr[1..=period].iter().sum::<f64>() / period as f64;
    out[period] = seed;
    for t in period + 1..bars.len() {
        out[t] = ((period as f64 - 1.0) * out[t - 1] + tr[t]) / period as f64;
    }
    out
}

/// Stochastic oscillator `(close - L)/(H - L)` over the trailing `period`
/// bars including today, as a fraction in [0, 1]. Reported from index
/// `period`; a window with no high/low spread is an error.
pub fn stochastic_k(bars: &[OhlcvBar], period: usize) -> Result<Vec<f64>> {
    assert!(period >= 1, "period must be at least 1");
    let mut out = vec![f64::NAN; bars.len()];
    for t in period..bars.len() {
        let window = &bars[t + 1 - period..=t];
        let high = window.iter().map(|b| b.high).fold(f64::NEG_INFINITY, f64::max);
        let low = window.iter().map(|b| b.low).fold(f64::INFINITY, f64::min);
        if high <= low {
            return Err(Error::Data(format!(
                "{}: flat {period}-day range, oscillator undefined",
                bars[t].date
            )));
        }
        out[t] = (bars[t].close - low) / (high - low);
    }
    Ok(out)
}

/// Aligned feature columns over one bar series. Rows before `valid_from`
/// may contain NaN (indicator warm-up); everything from `valid_from` on is
/// finite.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureFrame {
    dates: Vec<NaiveDate>,
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
    valid_from: usize,
}

impl FeatureFrame {
    pub fn new(
        dates: Vec<NaiveDate>,
        names: Vec<String>,
        columns: Vec<Vec<f64>>,
        valid_from: usize,
    ) -> Result<Self> {
        if names.len() != columns.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} names for {} columns",
                names.len(),
                columns.len()
            )));
        }
        if names.is_empty() {
            return Err(Error::InvalidArgument("frame needs at least one column".into()));
        }
        for (i, name) in names.iter().enumerate() {
            if names[..i].contains(name) {
                return Err(Error::InvalidArgument(format!("duplicate column name {name:?}")));
            }
        }
        let len = dates.len();
        if len == 0 {
            return Err(Error::InvalidArgument("frame needs at least one row".into()));
        }
        if valid_from >= len {
            return Err(Error::InvalidArgument(format!(
                "valid_from {valid_from} leaves no valid rows in a {len}-row frame"
            )));
        }
        for pair in dates.windows(2) {
            if pair[0] >= pair[1] {
                return Err(Error::Data(format!(
                    "dates not strictly increasing at {}",
                    pair[1]
                )));
            }
        }
        for (name, col) in names.iter().zip(&columns) {
            if col.len() != len {
                return Err(Error::DimensionMismatch(format!(
                    "column {name:?} has {} rows, expected {len}",
                    col.len()
                )));
            }
            if let Some(i) = col[valid_from..].iter().position(|v| !v.is_finite()) {
                return Err(Error::Data(format!(
                    "column {name:?} is not finite at valid row {}",
                    valid_from + i
                )));
            }
        }
        Ok(Self { dates, names, columns, valid_from })
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    /// First row at which every column is defined.
    pub fn valid_from(&self) -> usize {
        self.valid_from
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.column_index(name).map(|i| self.columns[i].as_slice())
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct IndicatorOptions {
    /// Replace the momentum-style 5/10-day columns with trailing means.
    pub conventional_ma: bool,
}

pub const FEATURE_NAMES: [&str; 12] = [
    "open", "high", "low", "close", "adj_close", "volume", "ma5", "ma10", "ema20", "macd",
    "atr14", "pct_k",
];

/// Longest indicator warm-up; also the frame's `valid_from`.
pub const INDICATOR_WARMUP: usize = 26;

pub fn compute_indicators(bars: &[OhlcvBar]) -> Result<FeatureFrame> {
    compute_indicators_with(bars, IndicatorOptions::default())
}

/// Builds the full 12-column feature frame: raw OHLCV plus the 5/10-day
/// momentum columns, EMA(20), the 12/26 EMA difference, ATR(14), and the
/// 14-day oscillator.
pub fn compute_indicators_with(
    bars: &[OhlcvBar],
    options: IndicatorOptions,
) -> Result<FeatureFrame> {
    if bars.len() <= INDICATOR_WARMUP {
        return Err(Error::Data(format!(
            "need at least {} bars to compute indicators, got {}",
            INDICATOR_WARMUP + 1,
            bars.len()
        )));
    }
    let closes: Vec<f64> = bars.iter().map(|b| b.close).collect();
    let pick = |n: usize| -> Vec<f64> {
        if options.conventional_ma {
            rolling_mean(&closes, n)
        } else {
            close_change(&closes, n)
        }
    };
    let columns = vec![
        bars.iter().map(|b| b.open).collect(),
        bars.iter().map(|b| b.high).collect(),
        bars.iter().map(|b| b.low).collect(),
        closes.clone(),
        bars.iter().map(|b| b.adj_close).collect(),
        bars.iter().map(|b| b.volume).collect(),
        pick(5),
        pick(10),
        ema(&closes, 20),
        macd(&closes),
        atr(bars, 14),
        stochastic_k(bars, 14)?,
    ];
    FeatureFrame::new(
        bars.iter().map(|b| b.date).collect(),
        FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
        columns,
        INDICATOR_WARMUP,
    )
}
