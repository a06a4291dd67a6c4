//! Chronological splits, feature scaling, and rolling-window construction.
//!
//! A window sample covers `window` consecutive valid rows; its prediction
//! target is the close `horizon` rows after the last input row. Each step
//! inside the window also carries the close `horizon` rows after that step,
//! which drives the per-step loss and the error-feedback input during
//! prediction. Samples are assigned to the split containing their target
//! row, so inputs may reach back across a split boundary but never forward.

use std::fmt::Write as _;
use std::ops::Range;
use std::path::Path;

use chrono::NaiveDate;

use super::FeatureFrame;
use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::scalar::Scalar;
use crate::smoothing;

/// Feature columns treated as prices: under the smoothing transform these
/// switch from min-max scaling to log-ratios against the close level.
const PRICE_COLUMNS: [&str; 5] = ["open", "high", "low", "close", "adj_close"];

fn cast<T: Scalar>(x: f64) -> T {
    T::from(x).expect("f64 converts into the scalar type")
}

#[derive(Clone, Debug, PartialEq)]
pub enum SplitSpec {
    /// Chronological fractions of the valid rows, summing to 1.
    Fractions { train: f64, val: f64, test: f64 },
    /// Explicit inclusive date ranges, chronological and disjoint.
    DateRanges {
        train: (NaiveDate, NaiveDate),
        val: Option<(NaiveDate, NaiveDate)>,
        test: (NaiveDate, NaiveDate),
    },
}

impl SplitSpec {
    pub fn fractions(train: f64, val: f64, test: f64) -> Result<Self> {
        let spec = SplitSpec::Fractions { train, val, test };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            SplitSpec::Fractions { train, val, test } => {
                for (name, f) in [("train", train), ("val", val), ("test", test)] {
                    if !f.is_finite() || *f < 0.0 {
                        return Err(Error::InvalidArgument(format!(
                            "{name} fraction {f} must be non-negative"
                        )));
                    }
                }
                if *train <= 0.0 || *test <= 0.0 {
                    return Err(Error::InvalidArgument(
                        "train and test fractions must be positive".into(),
                    ));
                }
                if (train + val + test - 1.0).abs() > 1e-9 {
                    return Err(Error::InvalidArgument(format!(
                        "split fractions sum to {}, expected 1",
                        train + val + test
                    )));
                }
            }
            SplitSpec::DateRanges { train, val, test } => {
                let mut ranges = vec![("train", *train)];
                if let Some(v) = val {
                    ranges.push(("val", *v));
                }
                ranges.push(("test", *test));
                for (name, (start, end)) in &ranges {
                    if start > end {
                        return Err(Error::InvalidArgument(format!(
                            "{name} range {start}..{end} is reversed"
                        )));
                    }
                }
                for pair in ranges.windows(2) {
                    let (a_name, (_, a_end)) = &pair[0];
                    let (b_name, (b_start, _)) = &pair[1];
                    if a_end >= b_start {
                        return Err(Error::InvalidArgument(format!(
                            "{a_name} range must end before {b_name} range starts"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Maps the spec onto row index ranges over the frame's valid rows.
    fn resolve(&self, frame: &FeatureFrame) -> Result<SplitRows> {
        self.validate()?;
        let start = frame.valid_from();
        let len = frame.len();
        match self {
            SplitSpec::Fractions { train, val, .. } => {
                let v = len - start;
                let n_train = (train * v as f64).round() as usize;
                let n_val = ((val * v as f64).round() as usize).min(v - n_train.min(v));
                let n_train = n_train.min(v);
                let train_end = start + n_train;
                let val_end = train_end + n_val;
                Ok(SplitRows {
                    train: start..train_end,
                    val: train_end..val_end,
                    test: val_end..len,
                })
            }
            SplitSpec::DateRanges { train, val, test } => {
                let dates = frame.dates();
                let rows = |range: &(NaiveDate, NaiveDate)| -> Range<usize> {
                    let lo = dates.partition_point(|d| *d < range.0).max(start);
                    let hi = dates.partition_point(|d| *d <= range.1).max(start);
                    lo..hi.max(lo)
                };
                Ok(SplitRows {
                    train: rows(train),
                    val: val.as_ref().map(|v| rows(v)).unwrap_or(0..0),
                    test: rows(test),
                })
            }
        }
    }
}

struct SplitRows {
    train: Range<usize>,
    val: Range<usize>,
    test: Range<usize>,
}

impl SplitRows {
    fn classify(&self, row: usize) -> Option<Split> {
        if self.train.contains(&row) {
            Some(Split::Train)
        } else if self.val.contains(&row) {
            Some(Split::Val)
        } else if self.test.contains(&row) {
            Some(Split::Test)
        } else {
            None
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Split {
    Train,
    Val,
    Test,
}

/// Per-feature scaling fitted on the training rows only.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FeatureScale<T> {
    MinMax { min: T, max: T },
    /// Log-ratio against the close-price level series; no fitted constants.
    LogRatio,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Normalization<T> {
    names: Vec<String>,
    scales: Vec<FeatureScale<T>>,
}

impl<T: Scalar> Normalization<T> {
    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn scales(&self) -> &[FeatureScale<T>] {
        &self.scales
    }

    pub fn scale_of(&self, name: &str) -> Option<&FeatureScale<T>> {
        self.names.iter().position(|n| n == name).map(|i| &self.scales[i])
    }

    /// Min-max transform of a raw value of feature `idx`.
    pub fn apply(&self, idx: usize, x: T) -> Result<T> {
        match self.scales.get(idx) {
            Some(FeatureScale::MinMax { min, max }) => Ok((x - *min) / (*max - *min)),
            Some(FeatureScale::LogRatio) => Err(Error::InvalidArgument(format!(
                "feature {:?} is log-ratio scaled; there are no min-max constants",
                self.names[idx]
            ))),
            None => Err(Error::InvalidArgument(format!("no feature at index {idx}"))),
        }
    }

    /// Inverse of `apply`.
    pub fn invert(&self, idx: usize, v: T) -> Result<T> {
        match self.scales.get(idx) {
            Some(FeatureScale::MinMax { min, max }) => Ok(*min + v * (*max - *min)),
            Some(FeatureScale::LogRatio) => Err(Error::InvalidArgument(format!(
                "feature {:?} is log-ratio scaled; there are no min-max constants",
                self.names[idx]
            ))),
            None => Err(Error::InvalidArgument(format!("no feature at index {idx}"))),
        }
    }

    /// Writes `feature,scale,min,max` rows; log-ratio features leave the
    /// constants empty.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = String::from("feature,scale,min,max\n");
        for (name, scale) in self.names.iter().zip(&self.scales) {
            match scale {
                FeatureScale::MinMax { min, max } => {
                    let _ = writeln!(out, "{name},minmax,{min},{max}");
                }
                FeatureScale::LogRatio => {
                    let _ = writeln!(out, "{name},log_ratio,,");
                }
            }
        }
        std::fs::write(path, out)?;
        Ok(())
    }
}

fn fit_minmax<T: Scalar>(name: &str, column: &[f64], rows: &Range<usize>) -> Result<FeatureScale<T>> {
    if rows.is_empty() {
        return Err(Error::Data("train split is empty".into()));
    }
    let slice = &column[rows.clone()];
    let min = slice.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = slice.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(max > min) {
        return Err(Error::Data(format!(
            "feature {name:?} is constant ({min}) on the training range; cannot scale"
        )));
    }
    Ok(FeatureScale::MinMax { min: cast(min), max: cast(max) })
}

/// Fits min-max constants for every frame column on the training rows of
/// the split. This is the plain scaling path; the smoothing transform is
/// selected through [`WindowOptions::smoothing_alpha`] in [`build_dataset`].
pub fn normalize<T: Scalar>(frame: &FeatureFrame, split: &SplitSpec) -> Result<Normalization<T>> {
    let rows = split.resolve(frame)?;
    let mut scales = Vec::with_capacity(frame.names().len());
    for (name, column) in frame.names().iter().zip(frame.columns()) {
        scales.push(fit_minmax(name, column, &rows.train)?);
    }
    Ok(Normalization { names: frame.names().to_vec(), scales })
}

/// How model-space outputs map back to prices.
#[derive(Clone, Debug, PartialEq)]
pub enum TargetCodec<T> {
    /// Min-max constants of the close column, fitted on train rows.
    MinMax { min: T, max: T },
    /// Close level at each sample's last input row; outputs decode as
    /// `level * exp(output)`.
    LogLevel { levels: Vec<T> },
}

impl<T: Scalar> TargetCodec<T> {
    /// Price-space value of a model-space output for sample `sample`.
    pub fn decode(&self, sample: usize, value: T) -> Result<T> {
        match self {
            TargetCodec::MinMax { min, max } => Ok(*min + value * (*max - *min)),
            TargetCodec::LogLevel { levels } => {
                let level = levels.get(sample).ok_or_else(|| {
                    Error::InvalidArgument(format!("no sample {sample} in the target codec"))
                })?;
                Ok(*level * value.exp())
            }
        }
    }
}

/// One rolling-window training/evaluation sample in model space.
#[derive(Clone, Debug, PartialEq)]
pub struct WindowSample<T> {
    /// `window` feature vectors, one per input row.
    pub inputs: Vec<Vector<T>>,
    /// Per-step next-close targets in model space, aligned with `inputs`.
    pub step_targets: Vec<Vector<T>>,
    /// Date of the last input row.
    pub end_date: NaiveDate,
    /// Date of the prediction target row.
    pub target_date: NaiveDate,
    /// Raw close at the target row.
    pub target_price: f64,
}

#[derive(Clone, Debug)]
pub struct WindowOptions {
    pub window: usize,
    pub horizon: usize,
    /// Subset of frame columns to use as inputs; `None` means all.
    pub features: Option<Vec<String>>,
    /// When set, prices are expressed as log-ratios against the close level
    /// with this smoothing coefficient, replacing their min-max scaling.
    pub smoothing_alpha: Option<f64>,
}

impl Default for WindowOptions {
    fn default() -> Self {
        Self { window: 7, horizon: 1, features: None, smoothing_alpha: None }
    }
}

#[derive(Clone, Debug)]
pub struct WindowedDataset<T> {
    window: usize,
    horizon: usize,
    feature_names: Vec<String>,
    samples: Vec<WindowSample<T>>,
    train: Range<usize>,
    val: Range<usize>,
    test: Range<usize>,
    norm: Normalization<T>,
    codec: TargetCodec<T>,
}

impl<T: Scalar> WindowedDataset<T> {
    pub fn window(&self) -> usize {
        self.window
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_names.len()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn samples(&self) -> &[WindowSample<T>] {
        &self.samples
    }

    pub fn train_range(&self) -> Range<usize> {
        self.train.clone()
    }

    pub fn val_range(&self) -> Range<usize> {
        self.val.clone()
    }

    pub fn test_range(&self) -> Range<usize> {
        self.test.clone()
    }

    pub fn train_samples(&self) -> &[WindowSample<T>] {
        &self.samples[self.train.clone()]
    }

    pub fn val_samples(&self) -> &[WindowSample<T>] {
        &self.samples[self.val.clone()]
    }

    pub fn test_samples(&self) -> &[WindowSample<T>] {
        &self.samples[self.test.clone()]
    }

    pub fn norm(&self) -> &Normalization<T> {
        &self.norm
    }

    pub fn codec(&self) -> &TargetCodec<T> {
        &self.codec
    }

    /// Price-space value of a model output for the sample at global index
    /// `sample`.
    pub fn decode_output(&self, sample: usize, value: T) -> Result<T> {
        self.codec.decode(sample, value)
    }

    /// One row per window: dates, raw target, and the flattened model-space
    /// inputs (`x{step}_{feature}`).
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut header = String::from("end_date,target_date,target_price,target");
        for step in 1..=self.window {
            for name in &self.feature_names {
                let _ = write!(header, ",x{step}_{name}");
            }
        }
        header.push('\n');
        let mut out = header;
        for s in &self.samples {
            let _ = write!(
                out,
                "{},{},{},{}",
                s.end_date,
                s.target_date,
                s.target_price,
                s.step_targets[self.window - 1][0]
            );
            for x in &s.inputs {
                for j in 0..x.len() {
                    let _ = write!(out, ",{}", x[j]);
                }
            }
            out.push('\n');
        }
        std::fs::write(path, out)?;
        Ok(())
    }
}

/// Builds the model-space dataset: resolves the split, fits feature scaling
/// on the training rows, and cuts rolling windows.
pub fn build_dataset<T: Scalar>(
    frame: &FeatureFrame,
    split: &SplitSpec,
    options: &WindowOptions,
) -> Result<WindowedDataset<T>> {
    if options.window < 1 {
        return Err(Error::InvalidArgument("window must be at least 1".into()));
    }
    if options.horizon < 1 {
        return Err(Error::InvalidArgument("horizon must be at least 1".into()));
    }
    let rows = split.resolve(frame)?;
    if rows.train.is_empty() {
        return Err(Error::Data("train split is empty".into()));
    }

    let names: Vec<String> = match &options.features {
        Some(list) => {
            if list.is_empty() {
                return Err(Error::InvalidArgument("feature list must not be empty".into()));
            }
            for name in list {
                if frame.column_index(name).is_none() {
                    return Err(Error::InvalidArgument(format!(
                        "unknown feature {name:?}; frame has {:?}",
                        frame.names()
                    )));
                }
            }
            list.clone()
        }
        None => frame.names().to_vec(),
    };
    let feature_columns: Vec<&[f64]> =
        names.iter().map(|n| frame.column(n).expect("validated")).collect();

    let closes = frame
        .column("close")
        .ok_or_else(|| Error::Data("frame has no close column to predict".into()))?;

    let levels: Option<Vec<f64>> = match options.smoothing_alpha {
        Some(alpha) => Some(smoothing::smooth_level(closes, alpha)?.into_levels()),
        None => None,
    };

    let mut scales = Vec::with_capacity(names.len());
    for (name, column) in names.iter().zip(&feature_columns) {
        if levels.is_some() && PRICE_COLUMNS.contains(&name.as_str()) {
            scales.push(FeatureScale::LogRatio);
        } else {
            scales.push(fit_minmax::<T>(name, column, &rows.train)?);
        }
    }
    let norm = Normalization { names: names.clone(), scales };

    let close_scale: Option<FeatureScale<T>> = if levels.is_some() {
        None
    } else {
        Some(fit_minmax::<T>("close", closes, &rows.train)?)
    };

    let window = options.window;
    let horizon = options.horizon;
    let encode_close = |row: usize, level_row: usize| -> Result<T> {
        match (&levels, &close_scale) {
            (Some(levels), _) => {
                let ratio = closes[row] / levels[level_row];
                if !(ratio > 0.0) {
                    return Err(Error::Data(format!(
                        "non-positive close/level ratio at row {row}"
                    )));
                }
                Ok(cast(ratio.ln()))
            }
            (None, Some(FeatureScale::MinMax { min, max })) => {
                Ok((cast::<T>(closes[row]) - *min) / (*max - *min))
            }
            _ => unreachable!("one of the two target scalings is always set"),
        }
    };

    let mut samples: Vec<WindowSample<T>> = Vec::new();
    let mut sample_levels: Vec<T> = Vec::new();
    let mut counts = [0usize; 3];
    let mut last_split: Option<Split> = None;

    let first_target = frame.valid_from() + window - 1 + horizon;
    for target_row in first_target..frame.len() {
        let end_row = target_row - horizon;
        let start_row = end_row + 1 - window;
        let split = match rows.classify(target_row) {
            Some(s) => s,
            None => continue,
        };
        if let Some(prev) = last_split {
            debug_assert!(split >= prev, "target rows must visit splits in order");
        }
        last_split = Some(split);
        counts[split as usize] += 1;

        let mut inputs = Vec::with_capacity(window);
        let mut step_targets = Vec::with_capacity(window);
        for row in start_row..=end_row {
            let mut x = Vec::with_capacity(names.len());
            for (scale, column) in norm.scales.iter().zip(&feature_columns) {
                let v = column[row];
                match scale {
                    FeatureScale::MinMax { min, max } => {
                        x.push((cast::<T>(v) - *min) / (*max - *min));
                    }
                    FeatureScale::LogRatio => {
                        let level = levels.as_ref().expect("log-ratio implies levels")[row];
                        let ratio = v / level;
                        if !(ratio > 0.0) {
                            return Err(Error::Data(format!(
                                "non-positive price/level ratio at row {row}"
                            )));
                        }
                        x.push(cast(ratio.ln()));
                    }
                }
            }
            inputs.push(Vector::new(x)?);
            step_targets.push(Vector::new(vec![encode_close(row + horizon, row)?])?);
        }
        if let Some(levels) = &levels {
            sample_levels.push(cast(levels[end_row]));
        }
        samples.push(WindowSample {
            inputs,
            step_targets,
            end_date: frame.dates()[end_row],
            target_date: frame.dates()[target_row],
            target_price: closes[target_row],
        });
    }

    let [n_train, n_val, n_test] = counts;
    if n_train == 0 {
        return Err(Error::Data(format!(
            "no training windows: window {window} and horizon {horizon} exhaust the train rows"
        )));
    }
    if n_test == 0 {
        return Err(Error::Data("no test windows".into()));
    }

    let codec = match (&levels, close_scale) {
        (Some(_), _) => TargetCodec::LogLevel { levels: sample_levels },
        (None, Some(FeatureScale::MinMax { min, max })) => TargetCodec::MinMax { min, max },
        _ => unreachable!(),
    };

    Ok(WindowedDataset {
        window,
        horizon,
        feature_names: names,
        samples,
        train: 0..n_train,
        val: n_train..n_train + n_val,
        test: n_train + n_val..n_train + n_val + n_test,
        norm,
        codec,
    })
}
