//! Deterministic synthetic series for tests, benchmarks, and fixtures.

use std::f64::consts::PI;

use chrono::{Days, Datelike, NaiveDate, Weekday};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{build_dataset, FeatureFrame, OhlcvBar, SplitSpec, WindowOptions, WindowedDataset};
use crate::error::Result;

/// Observations of a two-unit nonlinear state machine driven by a pair of
/// incommensurate sinusoids. The observation mixes both hidden units, so a
/// single-input model must reconstruct the hidden state from history to
/// predict well.
pub fn hidden_driver_series(len: usize) -> Vec<f64> {
    let w = [[0.6, -0.4], [0.5, 0.3]];
    let v = [0.5, -0.4];
    let mut h = [0.0f64; 2];
    let mut out = Vec::with_capacity(len);
    for t in 0..len {
        out.push(h[0] + 0.5 * h[1]);
        let tf = t as f64;
        let u = 0.8 * (2.0 * PI * tf / 37.0).sin() + 0.6 * (2.0 * PI * tf / 101.0 + 1.0).sin();
        let h0 = (w[0][0] * h[0] + w[0][1] * h[1] + v[0] * u).tanh();
        let h1 = (w[1][0] * h[0] + w[1][1] * h[1] + v[1] * u).tanh();
        h = [h0, h1];
    }
    out
}

/// Smooth, strictly positive pseudo-price path: two slow sinusoids plus a
/// mild linear drift around 100.
pub fn smooth_price_series(len: usize) -> Vec<f64> {
    (0..len)
        .map(|t| {
            let tf = t as f64;
            100.0 + 10.0 * (2.0 * PI * tf / 40.0).sin()
                + 8.0 * (2.0 * PI * tf / 90.0 + 0.5).sin()
                + 0.03 * tf
        })
        .collect()
}

fn frame_from_series(series: &[f64]) -> Result<FeatureFrame> {
    let start = NaiveDate::from_ymd_opt(2010, 1, 1).unwrap();
    let dates = (0..series.len())
        .map(|i| start + Days::new(i as u64))
        .collect();
    FeatureFrame::new(dates, vec!["close".to_string()], vec![series.to_vec()], 0)
}

/// Wrap a univariate series as a windowed dataset with the given split
/// fractions. The single feature doubles as the prediction target.
pub fn dataset_from_series(
    series: &[f64],
    window: usize,
    train: f64,
    val: f64,
    test: f64,
) -> Result<WindowedDataset<f64>> {
    let frame = frame_from_series(series)?;
    let split = SplitSpec::fractions(train, val, test)?;
    let options = WindowOptions {
        window,
        ..WindowOptions::default()
    };
    build_dataset(&frame, &split, &options)
}

/// Same as [`dataset_from_series`] but with exponential smoothing applied,
/// so inputs and targets live in log-ratio space relative to the smoothed
/// level. Requires a strictly positive series.
pub fn dataset_from_series_smoothed(
    series: &[f64],
    window: usize,
    train: f64,
    val: f64,
    test: f64,
    alpha: f64,
) -> Result<WindowedDataset<f64>> {
    let frame = frame_from_series(series)?;
    let split = SplitSpec::fractions(train, val, test)?;
    let options = WindowOptions {
        window,
        smoothing_alpha: Some(alpha),
        ..WindowOptions::default()
    };
    build_dataset(&frame, &split, &options)
}

/// Random-walk daily bars on weekdays starting 2002-01-02. Every bar
/// satisfies the OHLC ordering invariants; the walk is multiplicative so
/// prices stay positive. Deterministic for a given seed.
pub fn synthetic_ohlcv(days: usize, seed: u64) -> Vec<OhlcvBar> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut date = NaiveDate::from_ymd_opt(2002, 1, 2).unwrap();
    let mut prev_close = 100.0f64;
    let mut bars = Vec::with_capacity(days);
    while bars.len() < days {
        if matches!(date.weekday(), Weekday::Sat | Weekday::Sun) {
            date = date + Days::new(1);
            continue;
        }
        let open = prev_close * (1.0 + rng.gen_range(-0.01..0.01));
        let close = prev_close * (1.0 + rng.gen_range(-0.025..0.025));
        let high = open.max(close) * (1.0 + rng.gen_range(0.0..0.01));
        let low = open.min(close) * (1.0 - rng.gen_range(0.0..0.01));
        let volume = rng.gen_range(1.0e5f64..5.0e6).round();
        bars.push(OhlcvBar {
            date,
            open,
            high,
            low,
            close,
            adj_close: close,
            volume,
        });
        prev_close = close;
        date = date + Days::new(1);
    }
    bars
}
