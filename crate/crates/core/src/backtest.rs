//! Trading simulation from next-day forecasts.
//!
//! Signals come from consecutive predicted values; returns are simple
//! per-day contributions with proportional transaction costs subtracted,
//! summed and reported in percent. A buy-and-hold baseline with the same
//! costs is provided for comparison.

use std::fmt;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use chrono::NaiveDate;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Signal {
    Buy,
    Sell,
    Hold,
}

impl fmt::Display for Signal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Signal::Buy => "buy",
            Signal::Sell => "sell",
            Signal::Hold => "hold",
        })
    }
}

/// Proportional transaction costs as fractions of the traded price.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CostSpec {
    pub buy: f64,
    pub sell: f64,
}

impl Default for CostSpec {
    fn default() -> Self {
        Self { buy: 0.0025, sell: 0.0045 }
    }
}

impl CostSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, c) in [("buy", self.buy), ("sell", self.sell)] {
            if !c.is_finite() || !(0.0..1.0).contains(&c) {
                return Err(Error::InvalidArgument(format!(
                    "{name} cost {c} must lie in [0, 1)"
                )));
            }
        }
        Ok(())
    }
}

/// Which price series the day contributions are computed over.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReturnBasis {
    /// Signals from predictions, profit and loss on actual closes; sell
    /// days are credited per position direction.
    ActualPrices,
    /// The return formula evaluated directly over the predicted series,
    /// for comparability with forecast-only reporting.
    PredictedSeries,
}

impl FromStr for ReturnBasis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "actual" => Ok(ReturnBasis::ActualPrices),
            "predicted" => Ok(ReturnBasis::PredictedSeries),
            other => Err(Error::InvalidArgument(format!(
                "unknown return basis '{other}' (expected actual or predicted)"
            ))),
        }
    }
}

/// What a sell signal does to the position.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SellRule {
    /// Sell days take a short position and profit from declines.
    Short,
    /// Sell days close out; the day contributes nothing.
    Exit,
}

impl FromStr for SellRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "short" => Ok(SellRule::Short),
            "exit" => Ok(SellRule::Exit),
            other => Err(Error::InvalidArgument(format!(
                "unknown sell rule '{other}' (expected short or exit)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TradeDay {
    pub signal: Signal,
    pub price: f64,
    pub next_price: f64,
    /// Position return before costs, as a fraction of the entry price.
    pub gross: f64,
    /// Cost drag, as a fraction of the entry price.
    pub cost: f64,
    pub net: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TradeLog {
    pub days: Vec<TradeDay>,
    pub buy_days: usize,
    pub sell_days: usize,
    /// `100 * sum(net)`.
    pub total_return_pct: f64,
}

impl TradeLog {
    /// `date,signal,price,next_price,gross,cost,net` rows; the day index
    /// stands in for missing dates.
    pub fn write_csv(&self, path: impl AsRef<Path>, dates: Option<&[NaiveDate]>) -> Result<()> {
        if let Some(d) = dates {
            if d.len() != self.days.len() {
                return Err(Error::DimensionMismatch(format!(
                    "{} dates for {} trade days",
                    d.len(),
                    self.days.len()
                )));
            }
        }
        let mut out = String::from("date,signal,price,next_price,gross,cost,net\n");
        for (i, day) in self.days.iter().enumerate() {
            match dates {
                Some(d) => {
                    let _ = write!(out, "{}", d[i]);
                }
                None => {
                    let _ = write!(out, "{i}");
                }
            }
            let _ = writeln!(
                out,
                ",{},{},{},{},{},{}",
                day.signal, day.price, day.next_price, day.gross, day.cost, day.net
            );
        }
        std::fs::write(path, out)?;
        Ok(())
    }
}

/// One signal per adjacent pair: up move buys, down move sells, flat holds.
pub fn generate_signals(predicted: &[f64]) -> Result<Vec<Signal>> {
    if predicted.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 predictions to form a signal, got {}",
            predicted.len()
        )));
    }
    Ok(predicted
        .windows(2)
        .map(|w| {
            if w[1] > w[0] {
                Signal::Buy
            } else if w[1] < w[0] {
                Signal::Sell
            } else {
                Signal::Hold
            }
        })
        .collect())
}

fn check_prices(prices: &[f64]) -> Result<()> {
    for (i, &p) in prices.iter().enumerate() {
        if !p.is_finite() || p <= 0.0 {
            return Err(Error::Data(format!("price {p} at index {i} must be positive")));
        }
    }
    Ok(())
}

/// Day-by-day strategy return. `prices` has one more entry than `signals`;
/// day `t` enters at `prices[t]` and resolves at `prices[t+1]`.
///
/// Buy days earn the price move minus `sell_cost*p(t+1) + buy_cost*p(t)`,
/// all relative to `p(t)`. Sell days depend on the basis: over actual
/// prices a short earns the negated move minus `buy_cost*p(t+1) +
/// sell_cost*p(t)`, while over the predicted series the formula is taken as
/// written, without negation. Under [`SellRule::Exit`] sell days contribute
/// nothing. Hold days contribute nothing.
pub fn strategy_return(
    signals: &[Signal],
    prices: &[f64],
    costs: &CostSpec,
    basis: ReturnBasis,
    sell_rule: SellRule,
) -> Result<TradeLog> {
    costs.validate()?;
    if prices.len() != signals.len() + 1 {
        return Err(Error::DimensionMismatch(format!(
            "{} signals need {} prices, got {}",
            signals.len(),
            signals.len() + 1,
            prices.len()
        )));
    }
    check_prices(prices)?;
    let mut days = Vec::with_capacity(signals.len());
    let mut buy_days = 0usize;
    let mut sell_days = 0usize;
    let mut total = 0.0f64;
    for (t, &signal) in signals.iter().enumerate() {
        let p0 = prices[t];
        let p1 = prices[t + 1];
        let (gross, cost) = match signal {
            Signal::Buy => {
                buy_days += 1;
                ((p1 - p0) / p0, (costs.sell * p1 + costs.buy * p0) / p0)
            }
            Signal::Sell => {
                sell_days += 1;
                match (sell_rule, basis) {
                    (SellRule::Exit, _) => (0.0, 0.0),
                    (SellRule::Short, ReturnBasis::ActualPrices) => {
                        (-(p1 - p0) / p0, (costs.buy * p1 + costs.sell * p0) / p0)
                    }
                    (SellRule::Short, ReturnBasis::PredictedSeries) => {
                        ((p1 - p0) / p0, (costs.buy * p1 + costs.sell * p0) / p0)
                    }
                }
            }
            Signal::Hold => (0.0, 0.0),
        };
        let net = gross - cost;
        total += net;
        days.push(TradeDay { signal, price: p0, next_price: p1, gross, cost, net });
    }
    Ok(TradeLog { days, buy_days, sell_days, total_return_pct: 100.0 * total })
}

/// Buying at the first price and selling at the last, net of costs:
/// `100 * (p_last*(1-S) - p_first*(1+B)) / (p_first*(1+B))`.
pub fn buy_and_hold(prices: &[f64], costs: &CostSpec) -> Result<f64> {
    costs.validate()?;
    if prices.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 prices, got {}",
            prices.len()
        )));
    }
    check_prices(prices)?;
    let entry = prices[0] * (1.0 + costs.buy);
    let exit = prices[prices.len() - 1] * (1.0 - costs.sell);
    Ok(100.0 * (exit - entry) / entry)
}
