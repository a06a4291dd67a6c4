use std::fmt::Write as _;

use ecnn_core::backtest::{
    buy_and_hold, generate_signals, strategy_return, ReturnBasis, Signal,
};
use ecnn_core::eval::partition_periods;
use ecnn_core::Result;

use crate::commands::evaluate::EvalArgs;
use crate::commands::{build_pipeline, predict_test, TestPredictions};

pub fn run(args: &EvalArgs) -> Result<()> {
    let (config, checkpoint) = crate::commands::evaluate::load_run(args)?;
    let dataset = build_pipeline(&config)?;
    let tp = predict_test(&checkpoint, &dataset)?;

    let costs = config.costs.to_cost_spec()?;
    let basis = config.backtest.return_basis()?;
    let rule = config.backtest.sell_rule()?;

    let signals = generate_signals(&tp.predicted)?;
    let prices = price_series(&tp, basis);
    let log = strategy_return(&signals, prices, &costs, basis, rule)?;
    let hold = buy_and_hold(&tp.actual, &costs)?;

    let out_dir = &config.output.dir;
    std::fs::create_dir_all(out_dir)?;
    log.write_csv(
        out_dir.join("tradelog.csv"),
        Some(&tp.dates[..log.days.len()]),
    )?;

    // per-period returns, each period traded in isolation
    let mode = config.output.period_mode()?;
    let mut labels = Vec::new();
    let mut strat_cells = Vec::new();
    let mut hold_cells = Vec::new();
    for (label, range) in partition_periods(&tp.dates, mode) {
        if range.len() < 2 {
            eprintln!("warning: period {label} has {} predictions, skipping", range.len());
            continue;
        }
        let sl = generate_signals(&tp.predicted[range.clone()])?;
        let pp = &price_series(&tp, basis)[range.clone()];
        let period_log = strategy_return(&sl, pp, &costs, basis, rule)?;
        let period_hold = buy_and_hold(&tp.actual[range.clone()], &costs)?;
        labels.push(label);
        strat_cells.push(period_log.total_return_pct);
        hold_cells.push(period_hold);
    }

    let mut out = String::from("series");
    for label in &labels {
        let _ = write!(out, ",{label}");
    }
    out.push_str(",Overall\n");
    let _ = write!(out, "strategy");
    for v in &strat_cells {
        let _ = write!(out, ",{v}");
    }
    let _ = writeln!(out, ",{}", log.total_return_pct);
    let _ = write!(out, "buy_and_hold");
    for v in &hold_cells {
        let _ = write!(out, ",{v}");
    }
    let _ = writeln!(out, ",{hold}");
    std::fs::write(out_dir.join("returns.csv"), out)?;

    let holds = log
        .days
        .iter()
        .filter(|d| d.signal == Signal::Hold)
        .count();
    println!(
        "backtest over {} trading days: {} buy, {} sell, {holds} hold",
        log.days.len(),
        log.buy_days,
        log.sell_days
    );
    println!("strategy return: {:.3}%", log.total_return_pct);
    println!("buy-and-hold:    {hold:.3}%");
    println!("wrote {}", out_dir.join("returns.csv").display());
    Ok(())
}

fn price_series(tp: &TestPredictions, basis: ReturnBasis) -> &[f64] {
    match basis {
        ReturnBasis::ActualPrices => &tp.actual,
        ReturnBasis::PredictedSeries => &tp.predicted,
    }
}
