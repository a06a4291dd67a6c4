//! OHLCV ingestion and the feature pipeline.
//!
//! The entry format is the daily-bar CSV layout used by common market-data
//! exports: `Date,Open,High,Low,Close,Adj Close,Volume` with ISO dates.

mod dataset;
mod indicators;

pub use dataset::{
    build_dataset, normalize, FeatureScale, Normalization, SplitSpec, TargetCodec,
    WindowOptions, WindowSample, WindowedDataset,
};
pub use indicators::{
    atr, close_change, compute_indicators, compute_indicators_with, ema, macd, rolling_mean,
    stochastic_k, true_range, FeatureFrame, IndicatorOptions, FEATURE_NAMES, INDICATOR_WARMUP,
};

use std::io::Read;
use std::path::Path;

use chrono::NaiveDate;

use crate::error::{Error, Result};

pub const CSV_HEADER: [&str; 7] = ["Date", "Open", "High", "Low", "Close", "Adj Close", "Volume"];

/// One daily bar. Volume is kept as a float so every feature column shares a
/// representation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OhlcvBar {
    pub date: NaiveDate,
    pub open: f64,
    pub high: f64,
    pub low: f64,
    pub close: f64,
    pub adj_close: f64,
    pub volume: f64,
}

impl OhlcvBar {
    /// Checks the single-bar invariants: positive finite prices, a
    /// non-negative volume, and a high/low range that brackets open and
    /// close.
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("open", self.open),
            ("high", self.high),
            ("low", self.low),
            ("close", self.close),
            ("adj_close", self.adj_close),
        ] {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::Data(format!(
                    "{}: {name} price {v} must be positive and finite",
                    self.date
                )));
            }
        }
        if !self.volume.is_finite() || self.volume < 0.0 {
            return Err(Error::Data(format!(
                "{}: volume {} must be non-negative",
                self.date, self.volume
            )));
        }
        if self.high < self.open.max(self.close) {
            return Err(Error::Data(format!(
                "{}: high {} below max(open, close)",
                self.date, self.high
            )));
        }
        if self.low > self.open.min(self.close) {
            return Err(Error::Data(format!(
                "{}: low {} above min(open, close)",
                self.date, self.low
            )));
        }
        Ok(())
    }
}

/// Reads a daily-bar CSV file. See [`parse_csv_reader`].
pub fn parse_csv(path: impl AsRef<Path>) -> Result<Vec<OhlcvBar>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    parse_csv_reader(file)
}

/// Parses daily bars from a reader. The header must match [`CSV_HEADER`]
/// exactly; every field of every row must be present and parseable. Rows are
/// returned sorted by date; a duplicate date is an error.
pub fn parse_csv_reader(reader: impl Read) -> Result<Vec<OhlcvBar>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);

    {
        let headers = rdr
            .headers()
            .map_err(|e| Error::Data(format!("cannot read header: {e}")))?;
        let got: Vec<&str> = headers.iter().collect();
        if got != CSV_HEADER {
            return Err(Error::Data(format!(
                "malformed header: expected {:?}, got {:?}",
                CSV_HEADER.join(","),
                got.join(",")
            )));
        }
    }

    let mut bars = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| Error::Data(format!("csv error: {e}")))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != CSV_HEADER.len() {
            return Err(Error::Data(format!(
                "line {line}: expected {} fields, got {}",
                CSV_HEADER.len(),
                record.len()
            )));
        }
        let field = |idx: usize| -> Result<&str> {
            let s = record.get(idx).unwrap_or("");
            if s.is_empty() || s == "null" {
                return Err(Error::Data(format!(
                    "line {line}: missing value in column {}",
                    CSV_HEADER[idx]
                )));
            }
            Ok(s)
        };
        let number = |idx: usize| -> Result<f64> {
            let s = field(idx)?;
            s.parse::<f64>().map_err(|_| {
                Error::Data(format!(
                    "line {line}: cannot parse {} value {s:?} as a number",
                    CSV_HEADER[idx]
                ))
            })
        };
        let date_str = field(0)?;
        let date = NaiveDate::parse_from_str(date_str, "%Y-%m-%d").map_err(|_| {
            Error::Data(format!("line {line}: cannot parse date {date_str:?} (expected YYYY-MM-DD)"))
        })?;
        let bar = OhlcvBar {
            date,
            open: number(1)?,
            high: number(2)?,
            low: number(3)?,
            close: number(4)?,
            adj_close: number(5)?,
            volume: number(6)?,
        };
        bar.validate().map_err(|e| match e {
            Error::Data(msg) => Error::Data(format!("line {line}: {msg}")),
            other => other,
        })?;
        bars.push(bar);
    }
    if bars.is_empty() {
        return Err(Error::Data("no data rows".into()));
    }
    bars.sort_by_key(|b| b.date);
    for pair in bars.windows(2) {
        if pair[0].date == pair[1].date {
            return Err(Error::Data(format!("duplicate date {}", pair[0].date)));
        }
    }
    Ok(bars)
}

/// Writes bars in the same CSV layout `parse_csv` accepts.
pub fn write_csv(path: impl AsRef<Path>, bars: &[OhlcvBar]) -> Result<()> {
    let mut out = String::new();
    out.push_str(&CSV_HEADER.join(","));
    out.push('\n');
    for b in bars {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            b.date, b.open, b.high, b.low, b.close, b.adj_close, b.volume
        ));
    }
    std::fs::write(path, out)?;
    Ok(())
}
