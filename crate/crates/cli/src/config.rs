//! TOML run configuration shared by every subcommand that touches data.
//!
//! Unknown keys are rejected so typos fail fast, and every optional section
//! materializes its defaults on load; `resolved.toml` written next to the
//! training outputs is therefore a complete record of the run.

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use ecnn_core::backtest::{CostSpec, ReturnBasis, SellRule};
use ecnn_core::data::{IndicatorOptions, SplitSpec, WindowOptions};
use ecnn_core::eval::PeriodMode;
use ecnn_core::model::ModelKind;
use ecnn_core::training::{Optimizer, TrainConfig};
use ecnn_core::{Error, Result};
use serde::{Deserialize, Serialize};

/// Environment variable that anchors relative `data.path` values.
pub const DATA_DIR_ENV: &str = "ECNN_DATA_DIR";

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub data: DataSection,
    #[serde(default)]
    pub split: SplitSection,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub smoothing: SmoothingSection,
    #[serde(default)]
    pub costs: CostsSection,
    #[serde(default)]
    pub backtest: BacktestSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    /// OHLCV CSV file; relative paths resolve against `ECNN_DATA_DIR` when
    /// that variable is set, else against the working directory.
    pub path: PathBuf,
    /// Subset of feature columns to feed the model; omit for all of them.
    #[serde(default)]
    pub features: Option<Vec<String>>,
    /// Use plain moving averages in place of the exponential variants.
    #[serde(default)]
    pub conventional_ma: bool,
}

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSection {
    /// `[train, val, test]` fractions of the usable rows.
    #[serde(default)]
    pub fractions: Option<[f64; 3]>,
    /// Inclusive `[start, end]` date ranges as `YYYY-MM-DD`; give train and
    /// test, val is optional. Mutually exclusive with `fractions`.
    #[serde(default)]
    pub train_range: Option<[String; 2]>,
    #[serde(default)]
    pub val_range: Option<[String; 2]>,
    #[serde(default)]
    pub test_range: Option<[String; 2]>,
}

impl Default for SplitSection {
    fn default() -> Self {
        Self {
            fractions: Some([0.7, 0.15, 0.15]),
            train_range: None,
            val_range: None,
            test_range: None,
        }
    }
}

fn parse_date(s: &str) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .map_err(|e| Error::InvalidArgument(format!("bad date '{s}': {e}")))
}

fn parse_range(r: &[String; 2]) -> Result<(NaiveDate, NaiveDate)> {
    Ok((parse_date(&r[0])?, parse_date(&r[1])?))
}

impl SplitSection {
    pub fn to_split_spec(&self) -> Result<SplitSpec> {
        let has_ranges =
            self.train_range.is_some() || self.val_range.is_some() || self.test_range.is_some();
        match (&self.fractions, has_ranges) {
            (Some(_), true) => Err(Error::InvalidArgument(
                "split: give either fractions or date ranges, not both".into(),
            )),
            (Some([train, val, test]), false) => SplitSpec::fractions(*train, *val, *test),
            (None, true) => {
                let train = self.train_range.as_ref().ok_or_else(|| {
                    Error::InvalidArgument("split: train_range is required".into())
                })?;
                let test = self.test_range.as_ref().ok_or_else(|| {
                    Error::InvalidArgument("split: test_range is required".into())
                })?;
                let spec = SplitSpec::DateRanges {
                    train: parse_range(train)?,
                    val: self.val_range.as_ref().map(parse_range).transpose()?,
                    test: parse_range(test)?,
                };
                spec.validate()?;
                Ok(spec)
            }
            (None, false) => Err(Error::InvalidArgument(
                "split: fractions or date ranges required".into(),
            )),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    /// `ecnn`, `rnn`, or `lstm`.
    pub kind: String,
    pub state_dim: usize,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self { kind: "ecnn".into(), state_dim: 32 }
    }
}

impl ModelSection {
    pub fn model_kind(&self) -> Result<ModelKind> {
        self.kind.parse()
    }

    pub fn validate(&self) -> Result<()> {
        self.model_kind()?;
        if self.state_dim < 1 || self.state_dim > 4096 {
            return Err(Error::InvalidArgument(format!(
                "model.state_dim {} must lie in 1..=4096",
                self.state_dim
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub epochs: usize,
    pub batch_size: usize,
    pub window: usize,
    pub learning_rate: f64,
    pub optimizer: String,
    #[serde(default)]
    pub truncation: Option<usize>,
    pub seed: u64,
}

impl Default for TrainSection {
    fn default() -> Self {
        Self {
            epochs: 1000,
            batch_size: 64,
            window: 7,
            learning_rate: 1e-3,
            optimizer: "adam".into(),
            truncation: None,
            seed: 42,
        }
    }
}

impl TrainSection {
    pub fn to_train_config(&self) -> Result<TrainConfig> {
        let optimizer: Optimizer = self.optimizer.parse()?;
        let cfg = TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            window: self.window,
            learning_rate: self.learning_rate,
            truncation: self.truncation,
            seed: self.seed,
            optimizer,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct SmoothingSection {
    pub enabled: bool,
    pub alpha: f64,
}

impl Default for SmoothingSection {
    fn default() -> Self {
        Self { enabled: false, alpha: 0.8 }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct CostsSection {
    pub buy: f64,
    pub sell: f64,
}

impl Default for CostsSection {
    fn default() -> Self {
        let d = CostSpec::default();
        Self { buy: d.buy, sell: d.sell }
    }
}

impl CostsSection {
    pub fn to_cost_spec(&self) -> Result<CostSpec> {
        let spec = CostSpec { buy: self.buy, sell: self.sell };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct BacktestSection {
    /// `actual` trades on real closes; `predicted` evaluates the return
    /// formula over the forecast series itself.
    pub basis: String,
    /// `short` or `exit` behavior for sell signals.
    pub sell_rule: String,
}

impl Default for BacktestSection {
    fn default() -> Self {
        Self { basis: "actual".into(), sell_rule: "short".into() }
    }
}

impl BacktestSection {
    pub fn return_basis(&self) -> Result<ReturnBasis> {
        self.basis.parse()
    }

    pub fn sell_rule(&self) -> Result<SellRule> {
        self.sell_rule.parse()
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    /// Directory for checkpoints, curves, predictions, and reports.
    pub dir: PathBuf,
    /// `rolling365` or `calendar` reporting periods.
    pub periods: String,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: PathBuf::from("out"), periods: "rolling365".into() }
    }
}

impl OutputSection {
    pub fn period_mode(&self) -> Result<PeriodMode> {
        match self.periods.as_str() {
            "rolling365" => Ok(PeriodMode::Rolling365),
            "calendar" => Ok(PeriodMode::CalendarYear),
            other => Err(Error::InvalidArgument(format!(
                "unknown periods mode '{other}' (expected rolling365 or calendar)"
            ))),
        }
    }
}

impl Config {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
        let config: Config = toml::from_str(&text)
            .map_err(|e| Error::InvalidArgument(format!("{}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.split.to_split_spec()?;
        self.model.validate()?;
        self.train.to_train_config()?;
        if self.smoothing.enabled
            && !(self.smoothing.alpha > 0.0 && self.smoothing.alpha <= 1.0)
        {
            return Err(Error::InvalidArgument(format!(
                "smoothing.alpha {} must lie in (0, 1]",
                self.smoothing.alpha
            )));
        }
        self.costs.to_cost_spec()?;
        self.backtest.return_basis()?;
        self.backtest.sell_rule()?;
        self.output.period_mode()?;
        Ok(())
    }

    /// Data path with the `ECNN_DATA_DIR` anchor applied.
    pub fn data_path(&self) -> PathBuf {
        if self.data.path.is_relative() {
            if let Some(base) = std::env::var_os(DATA_DIR_ENV) {
                return PathBuf::from(base).join(&self.data.path);
            }
        }
        self.data.path.clone()
    }

    pub fn indicator_options(&self) -> IndicatorOptions {
        IndicatorOptions { conventional_ma: self.data.conventional_ma }
    }

    pub fn window_options(&self) -> WindowOptions {
        WindowOptions {
            window: self.train.window,
            horizon: 1,
            features: self.data.features.clone(),
            smoothing_alpha: self.smoothing.enabled.then_some(self.smoothing.alpha),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}
