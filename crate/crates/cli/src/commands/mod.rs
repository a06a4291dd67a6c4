pub mod backtest;
pub mod compare;
pub mod evaluate;
pub mod gradcheck;
pub mod train;

use chrono::NaiveDate;
use ecnn_core::checkpoint::ModelCheckpoint;
use ecnn_core::data::{compute_indicators_with, parse_csv};
use ecnn_core::model::SequenceModel;
use ecnn_core::{Error, Result, WindowedDataset64};

use crate::config::Config;

/// CSV on disk through indicators, splitting, normalization, and windowing.
pub fn build_pipeline(config: &Config) -> Result<WindowedDataset64> {
    let path = config.data_path();
    let bars = parse_csv(&path)?;
    let frame = compute_indicators_with(&bars, config.indicator_options())?;
    let split = config.split.to_split_spec()?;
    ecnn_core::data::build_dataset(&frame, &split, &config.window_options())
}

pub struct TestPredictions {
    pub dates: Vec<NaiveDate>,
    pub actual: Vec<f64>,
    pub predicted: Vec<f64>,
}

/// One-step-ahead price forecasts over every test window, decoded back to
/// price space. Windows are processed in chronological order.
pub fn predict_test(
    checkpoint: &ModelCheckpoint,
    dataset: &WindowedDataset64,
) -> Result<TestPredictions> {
    check_model_dims(checkpoint, dataset)?;
    let samples = dataset.samples();
    let range = dataset.test_range();
    if range.is_empty() {
        return Err(Error::Data("no test windows to evaluate".into()));
    }
    let mut dates = Vec::with_capacity(range.len());
    let mut actual = Vec::with_capacity(range.len());
    let mut predicted = Vec::with_capacity(range.len());
    for i in range {
        let sample = &samples[i];
        let prior = &sample.step_targets[..sample.step_targets.len() - 1];
        let output = match checkpoint {
            ModelCheckpoint::Ecnn(p) => p.predict_next(&sample.inputs, prior)?,
            ModelCheckpoint::Rnn(p) => p.predict_next(&sample.inputs, prior)?,
            ModelCheckpoint::Lstm(p) => p.predict_next(&sample.inputs, prior)?,
        };
        dates.push(sample.target_date);
        actual.push(sample.target_price);
        predicted.push(dataset.decode_output(i, output[0])?);
    }
    Ok(TestPredictions { dates, actual, predicted })
}

pub fn check_model_dims(
    checkpoint: &ModelCheckpoint,
    dataset: &WindowedDataset64,
) -> Result<()> {
    let (m, p) = match checkpoint {
        ModelCheckpoint::Ecnn(e) => (e.input_dim(), e.output_dim()),
        ModelCheckpoint::Rnn(r) => (r.input_dim(), r.output_dim()),
        ModelCheckpoint::Lstm(l) => (l.input_dim(), l.output_dim()),
    };
    if m != dataset.feature_dim() {
        return Err(Error::DimensionMismatch(format!(
            "checkpoint expects {m} input features, dataset has {}",
            dataset.feature_dim()
        )));
    }
    if p != 1 {
        return Err(Error::DimensionMismatch(format!(
            "checkpoint produces {p} outputs, expected a scalar price forecast"
        )));
    }
    Ok(())
}

pub fn write_predictions_csv(
    path: impl AsRef<std::path::Path>,
    tp: &TestPredictions,
) -> Result<()> {
    let mut out = String::from("date,actual,predicted\n");
    for ((d, a), p) in tp.dates.iter().zip(&tp.actual).zip(&tp.predicted) {
        out.push_str(&format!("{d},{a},{p}\n"));
    }
    std::fs::write(path, out)?;
    Ok(())
}
