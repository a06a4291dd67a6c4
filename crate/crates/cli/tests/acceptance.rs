//! Acceptance suite: one test per shipping criterion, each printing a
//! `[PASS]`/`[FAIL]` line (visible with `--nocapture`; failures also panic).
//!
//! Covered: finite-difference gradient validation for all three models, the
//! feedback-free reduction to the plain RNN, a forecasting win over the RNN
//! baseline on a hidden-driver series, metric and indicator oracles, trading
//! arithmetic, smoothing integration, determinism, and the CLI round trip.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ecnn_core::backtest::{
    buy_and_hold, generate_signals, strategy_return, CostSpec, ReturnBasis, SellRule, Signal,
};
use ecnn_core::baselines::{init_lstm_params, init_rnn_params};
use ecnn_core::checkpoint::ModelCheckpoint;
use ecnn_core::data::{
    atr, build_dataset, compute_indicators, ema, macd, rolling_mean, stochastic_k, SplitSpec,
    WindowOptions,
};
use ecnn_core::ecnn::{init_params, EcnnParams};
use ecnn_core::eval::{directional_accuracy, mape, pearson_r, r_squared, theil_u};
use ecnn_core::gradcheck::{check_gradients, random_sequence, DEFAULT_STEP};
use ecnn_core::linalg::Matrix;
use ecnn_core::model::SequenceModel;
use ecnn_core::smoothing::{from_model_space, smooth_level, to_model_space};
use ecnn_core::synthetic::{
    dataset_from_series, dataset_from_series_smoothed, hidden_driver_series, smooth_price_series,
    synthetic_ohlcv,
};
use ecnn_core::training::{fit, Optimizer, TrainConfig};
use ecnn_core::WindowedDataset64;

fn verdict(criterion: u32, description: &str, ok: bool, detail: String) {
    if ok {
        println!("[PASS] criterion {criterion}: {description}");
    } else {
        println!("[FAIL] criterion {criterion}: {description} ({detail})");
        panic!("criterion {criterion} failed: {detail}");
    }
}

// criterion 1: analytic gradients of all three models agree with central
// finite differences on random configurations, within 1e-5 relative error,
// in under a minute.
#[test]
fn c1_gradients_match_finite_differences() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(424242);
    let mut worst = 0.0f64;
    let mut failures = Vec::new();
    for trial in 0..20 {
        let n = rng.gen_range(1..=5);
        let m = rng.gen_range(1..=5);
        let p = rng.gen_range(1..=5);
        let steps = rng.gen_range(1..=8);
        let data_seed = rng.gen::<u64>();
        let (inputs, targets) = random_sequence::<f64>(m, p, steps, data_seed);

        let mut check = |name: &str, report: ecnn_core::gradcheck::CheckReport| {
            worst = worst.max(report.max_rel_error());
            if !report.passed {
                failures.push(format!(
                    "{name} trial {trial} (n={n} m={m} p={p} T={steps}): {:?}",
                    report.failing_tensors()
                ));
            }
        };
        let ecnn = init_params::<f64>(n, m, p, data_seed ^ 1).unwrap();
        check("ecnn", check_gradients(&ecnn, &inputs, &targets, DEFAULT_STEP, 1e-5).unwrap());
        let rnn = init_rnn_params::<f64>(n, m, p, data_seed ^ 2).unwrap();
        check("rnn", check_gradients(&rnn, &inputs, &targets, DEFAULT_STEP, 1e-5).unwrap());
        let lstm = init_lstm_params::<f64>(n, m, p, data_seed ^ 3).unwrap();
        check("lstm", check_gradients(&lstm, &inputs, &targets, DEFAULT_STEP, 1e-5).unwrap());
    }
    let elapsed = started.elapsed().as_secs_f64();
    verdict(
        1,
        "finite-difference gradient agreement for ecnn, rnn, and lstm",
        failures.is_empty() && elapsed < 60.0,
        format!("failures: {failures:?}, worst rel error {worst:.3e}, elapsed {elapsed:.1}s"),
    );
}

// criterion 2: zeroing the error-feedback weights makes the cell numerically
// indistinguishable from the plain RNN, forward and backward.
#[test]
fn c2_feedback_free_cell_reduces_to_rnn() {
    let mut worst_fwd = 0.0f64;
    let mut worst_grad = 0.0f64;
    for seed in 0..10u64 {
        let n = 1 + (seed as usize * 2) % 6;
        let m = 1 + (seed as usize) % 4;
        let p = 1 + (seed as usize) % 3;
        let steps = 2 + (seed as usize) % 6;
        let rnn = init_rnn_params::<f64>(n, m, p, 9000 + seed).unwrap();
        let ecnn = EcnnParams::new(
            rnn.a.clone(),
            rnn.b.clone(),
            rnn.c.clone(),
            Matrix::zeros(n, p),
        )
        .unwrap();
        let (inputs, targets) = random_sequence(m, p, steps, 9100 + seed);

        let lr = rnn.sequence_loss(&inputs, &targets).unwrap();
        let le = ecnn.sequence_loss(&inputs, &targets).unwrap();
        worst_fwd = worst_fwd.max((lr - le).abs());

        let gr = rnn.sequence_gradients(&inputs, &targets).unwrap();
        let ge = ecnn.sequence_gradients(&inputs, &targets).unwrap();
        for (a, b) in gr.iter().zip(&ge) {
            for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
                worst_grad = worst_grad.max((x - y).abs());
            }
        }
    }
    verdict(
        2,
        "zero-feedback cell matches the rnn to 1e-12 forward and 1e-10 backward",
        worst_fwd < 1e-12 && worst_grad < 1e-10,
        format!("worst forward gap {worst_fwd:.3e}, worst gradient gap {worst_grad:.3e}"),
    );
}

fn model_space_test_mse<M: SequenceModel<f64>>(model: &M, ds: &WindowedDataset64) -> f64 {
    let mut sum = 0.0;
    for sample in ds.test_samples() {
        let prior = &sample.step_targets[..sample.step_targets.len() - 1];
        let y = model.predict_next(&sample.inputs, prior).unwrap()[0];
        let t = sample.step_targets.last().unwrap()[0];
        sum += (y - t) * (y - t);
    }
    sum / ds.test_samples().len() as f64
}

// criterion 3: on observations of a nonlinear system driven by unobserved
// inputs, the error-feedback cell beats the plain RNN at one-step-ahead test
// MSE for at least 7 of 10 seeds, under an identical training recipe.
#[test]
fn c3_error_feedback_beats_rnn_on_hidden_driver_series() {
    let started = Instant::now();
    let series = hidden_driver_series(300);
    let ds = dataset_from_series(&series, 7, 0.7, 0.15, 0.15).unwrap();
    let mut wins = 0;
    let mut rows = Vec::new();
    for seed in 0..10u64 {
        let cfg = TrainConfig {
            epochs: 300,
            batch_size: 16,
            window: 7,
            learning_rate: 1e-3,
            truncation: None,
            seed,
            optimizer: Optimizer::Adam,
        };
        let mut ecnn = init_params::<f64>(8, 1, 1, seed).unwrap();
        fit(&mut ecnn, &ds, &cfg).unwrap();
        let mse_ecnn = model_space_test_mse(&ecnn, &ds);

        let mut rnn = init_rnn_params::<f64>(8, 1, 1, seed).unwrap();
        fit(&mut rnn, &ds, &cfg).unwrap();
        let mse_rnn = model_space_test_mse(&rnn, &ds);

        if mse_ecnn <= mse_rnn {
            wins += 1;
        }
        rows.push(format!("seed {seed}: ecnn {mse_ecnn:.3e} rnn {mse_rnn:.3e}"));
    }
    let elapsed = started.elapsed().as_secs_f64();
    verdict(
        3,
        "error-feedback cell wins test MSE against the rnn on >= 7 of 10 seeds",
        wins >= 7 && elapsed < 600.0,
        format!("{wins}/10 wins in {elapsed:.0}s; {rows:?}"),
    );
}

// criterion 4: forecast metrics reproduce hand-computed oracle values and
// behave correctly on perfect predictions.
#[test]
fn c4_metric_oracles() {
    let tol = 1e-9;
    let mut gaps = Vec::new();
    let mut check = |name: &str, got: f64, want: f64| {
        if (got - want).abs() > tol {
            gaps.push(format!("{name}: got {got}, want {want}"));
        }
    };
    check("mape", mape(&[100.0], &[99.0]).unwrap(), 0.01);
    check("theil", theil_u(&[1.0], &[3.0]).unwrap(), 0.5);
    check(
        "pearson",
        pearson_r(&[1.0, 2.0, 3.0], &[1.0, 2.0, 2.0]).unwrap(),
        0.8660254037844387,
    );
    check(
        "da",
        directional_accuracy(&[1.0, 2.0, 1.0], &[1.0, 2.0, 3.0]).unwrap(),
        0.5,
    );

    let y = [3.0, 1.0, 4.0, 1.5, 5.0];
    check("perfect mape", mape(&y, &y).unwrap(), 0.0);
    check("perfect theil", theil_u(&y, &y).unwrap(), 0.0);
    check("perfect pearson", pearson_r(&y, &y).unwrap(), 1.0);
    check("perfect da", directional_accuracy(&y, &y).unwrap(), 1.0);
    check("perfect r2", r_squared(&y, &y).unwrap(), 1.0);

    verdict(4, "metric hand oracles at 1e-9", gaps.is_empty(), format!("{gaps:?}"));
}

// criterion 5: trading arithmetic matches the hand-computed single-trade
// value, a zero-cost perfect-foresight trader never loses to buy-and-hold on
// balanced random walks, and returns fall monotonically as costs rise.
#[test]
fn c5_backtest_arithmetic() {
    let mut problems = Vec::new();

    let log = strategy_return(
        &[Signal::Buy],
        &[100.0, 110.0],
        &CostSpec::default(),
        ReturnBasis::ActualPrices,
        SellRule::Short,
    )
    .unwrap();
    if (log.total_return_pct - 9.255).abs() > 1e-9 {
        problems.push(format!("single trade: got {}, want 9.255", log.total_return_pct));
    }

    let no_costs = CostSpec { buy: 0.0, sell: 0.0 };
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(31_000 + seed);
        let mut price = 100.0f64;
        let days = rng.gen_range(50..=70);
        let mut path = Vec::with_capacity(days + 1);
        path.push(price);
        for _ in 0..days {
            price *= 1.0 + rng.gen_range(-0.03..0.03);
            path.push(price);
        }
        let signals = generate_signals(&path).unwrap();
        let log = strategy_return(
            &signals,
            &path,
            &no_costs,
            ReturnBasis::ActualPrices,
            SellRule::Short,
        )
        .unwrap();
        let hold = buy_and_hold(&path, &no_costs).unwrap();
        if log.total_return_pct < hold - 1e-9 {
            problems.push(format!(
                "path {seed}: foresight {:.4} < hold {hold:.4}",
                log.total_return_pct
            ));
        }
    }

    let path = [100.0, 104.0, 101.0, 103.0, 99.0, 102.0];
    let signals = generate_signals(&path).unwrap();
    let grid = [0.0, 0.001, 0.0025, 0.005, 0.01];
    let ret = |buy: f64, sell: f64| {
        strategy_return(
            &signals,
            &path,
            &CostSpec { buy, sell },
            ReturnBasis::ActualPrices,
            SellRule::Short,
        )
        .unwrap()
        .total_return_pct
    };
    for (i, &b1) in grid.iter().enumerate() {
        for (j, &s1) in grid.iter().enumerate() {
            for &b2 in &grid[i..] {
                for &s2 in &grid[j..] {
                    if ret(b2, s2) > ret(b1, s1) + 1e-12 {
                        problems.push(format!(
                            "costs ({b2},{s2}) beat cheaper ({b1},{s1})"
                        ));
                    }
                }
            }
        }
    }

    verdict(
        5,
        "trade arithmetic, foresight dominance, and cost monotonicity",
        problems.is_empty(),
        format!("{problems:?}"),
    );
}

// criterion 6: the smoothing transform round-trips exactly, degenerates to
// the identity at alpha = 1, and training on the smoothed encoding keeps
// forecast quality on an easy positive series.
#[test]
fn c6_smoothing_integration() {
    let mut problems = Vec::new();

    let series = smooth_price_series(120);
    let levels = smooth_level(&series, 0.8).unwrap();
    let encoded = to_model_space(&series, levels.levels()).unwrap();
    let decoded = from_model_space(&encoded, levels.levels()).unwrap();
    let worst = series
        .iter()
        .zip(&decoded)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    if worst > 1e-12 {
        problems.push(format!("roundtrip error {worst:.3e}"));
    }

    let unit = smooth_level(&series, 1.0).unwrap();
    if unit.levels() != &series[..] {
        problems.push("alpha=1 levels differ from the series".into());
    }
    let flat = to_model_space(&series, unit.levels()).unwrap();
    if flat.iter().any(|&v| v != 0.0) {
        problems.push("alpha=1 model space is not identically zero".into());
    }

    let long = smooth_price_series(400);
    let cfg = TrainConfig {
        epochs: 200,
        batch_size: 16,
        window: 7,
        learning_rate: 1e-3,
        truncation: None,
        seed: 4,
        optimizer: Optimizer::Adam,
    };
    let r2_of = |ds: &WindowedDataset64| -> f64 {
        let mut model = init_params::<f64>(8, 1, 1, 4).unwrap();
        fit(&mut model, ds, &cfg).unwrap();
        let range = ds.test_range();
        let samples = ds.samples();
        let mut actual = Vec::new();
        let mut predicted = Vec::new();
        for i in range {
            let s = &samples[i];
            let prior = &s.step_targets[..s.step_targets.len() - 1];
            let out = model.predict_next(&s.inputs, prior).unwrap()[0];
            actual.push(s.target_price);
            predicted.push(ds.decode_output(i, out).unwrap());
        }
        r_squared(&actual, &predicted).unwrap()
    };
    let plain = dataset_from_series(&long, 7, 0.7, 0.15, 0.15).unwrap();
    let smoothed = dataset_from_series_smoothed(&long, 7, 0.7, 0.15, 0.15, 0.8).unwrap();
    let r2_plain = r2_of(&plain);
    let r2_smooth = r2_of(&smoothed);
    if (r2_plain - r2_smooth).abs() > 0.02 {
        problems.push(format!(
            "price-space r2 drifted: plain {r2_plain:.4}, smoothed {r2_smooth:.4}"
        ));
    }

    verdict(
        6,
        "smoothing roundtrip, alpha=1 identity, and forecast-quality parity",
        problems.is_empty(),
        format!("{problems:?}"),
    );
}

// criterion 7: indicator oracles: the two-point EMA hand value, constant
// series identities, and first-valid-row positions.
#[test]
fn c7_indicator_oracles() {
    let mut problems = Vec::new();

    let mut series = vec![1.0, 2.0];
    let e = ema(&series, 20);
    if (e[1] - 1.0952380952380953).abs() > 1e-9 {
        problems.push(format!("ema tail {}", e[1]));
    }

    series = vec![5.0; 40];
    let bars = synthetic_ohlcv(60, 1);
    let flat: Vec<_> = bars
        .iter()
        .map(|b| ecnn_core::data::OhlcvBar {
            open: 5.0,
            high: 5.0,
            low: 5.0,
            close: 5.0,
            adj_close: 5.0,
            ..*b
        })
        .collect();
    let ma = rolling_mean(&series, 5);
    if ma[10] != 5.0 {
        problems.push(format!("flat rolling mean {}", ma[10]));
    }
    let em = ema(&series, 10);
    if em[20] != 5.0 {
        problems.push(format!("flat ema {}", em[20]));
    }
    let md = macd(&series);
    if md[30].abs() > 1e-12 {
        problems.push(format!("flat macd {}", md[30]));
    }
    let a = atr(&flat, 14);
    if a[20].abs() > 1e-12 {
        problems.push(format!("flat atr {}", a[20]));
    }
    if stochastic_k(&flat, 14).is_ok() {
        problems.push("flat oscillator should fail on a zero range".into());
    }

    // first valid index of each warmup-bearing indicator
    let bars = synthetic_ohlcv(80, 2);
    let a = atr(&bars, 14);
    if !(a[13].is_nan() && a[14].is_finite()) {
        problems.push("atr warmup is not 14".into());
    }
    let k = stochastic_k(&bars, 14).unwrap();
    if !(k[13].is_nan() && k[14].is_finite()) {
        problems.push("oscillator warmup is not 14".into());
    }
    let closes: Vec<_> = bars.iter().map(|b| b.close).collect();
    let md = macd(&closes);
    if !(md[25].is_nan() && md[26].is_finite()) {
        problems.push("macd warmup is not 26".into());
    }
    let frame = compute_indicators(&bars).unwrap();
    if frame.valid_from() != 26 {
        problems.push(format!("feature frame first valid row {}", frame.valid_from()));
    }

    verdict(7, "indicator hand values, identities, and warmups", problems.is_empty(), format!("{problems:?}"));
}

// criterion 8: bit-for-bit reproducibility for a fixed seed, and training
// rows are the only input to the normalization constants.
#[test]
fn c8_determinism_and_leakage() {
    let mut problems: Vec<String> = Vec::new();

    let series = hidden_driver_series(150);
    let ds = dataset_from_series(&series, 7, 0.7, 0.15, 0.15).unwrap();
    let cfg = TrainConfig {
        epochs: 25,
        batch_size: 8,
        window: 7,
        learning_rate: 1e-3,
        truncation: None,
        seed: 99,
        optimizer: Optimizer::Adam,
    };
    let dir = tempfile::tempdir().unwrap();
    let mut byte_sets = Vec::new();
    for run in 0..2 {
        let mut model = init_params::<f64>(5, 1, 1, 99).unwrap();
        let report = fit(&mut model, &ds, &cfg).unwrap();
        let ck = ModelCheckpoint::Ecnn(model);
        let curve = dir.path().join(format!("curve{run}.csv"));
        report.write_loss_csv(&curve).unwrap();
        byte_sets.push((ck.to_bytes(), std::fs::read(&curve).unwrap()));
    }
    if byte_sets[0] != byte_sets[1] {
        problems.push("same seed produced different checkpoint or loss curve bytes".into());
    }

    let bars = synthetic_ohlcv(400, 77);
    let split = SplitSpec::fractions(0.7, 0.15, 0.15).unwrap();
    let options = WindowOptions::default();
    let base = build_dataset::<f64>(&compute_indicators(&bars).unwrap(), &split, &options).unwrap();
    let mut tampered = bars;
    let cut = base.samples()[base.test_range().start].end_date;
    for bar in tampered.iter_mut().filter(|b| b.date > cut) {
        bar.open *= 2.0;
        bar.high *= 2.0;
        bar.low *= 2.0;
        bar.close *= 2.0;
        bar.adj_close *= 2.0;
    }
    let moved =
        build_dataset::<f64>(&compute_indicators(&tampered).unwrap(), &split, &options).unwrap();
    if base.norm() != moved.norm() {
        problems.push("perturbing rows after the training range moved the normalization".into());
    }

    verdict(
        8,
        "byte-identical reruns and train-only normalization",
        problems.is_empty(),
        format!("{problems:?}"),
    );
}

// criterion 9: the shipped binary trains, evaluates, and backtests the
// bundled 500-row fixture end to end in under two minutes, producing
// correctly shaped report files.
#[test]
fn c9_cli_round_trip_on_fixture() {
    let started = Instant::now();
    let mut problems = Vec::new();

    let fixture = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/synthetic_ohlcv.csv");
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let config = dir.path().join("run.toml");
    std::fs::write(
        &config,
        format!(
            r#"
[data]
path = "{}"

[model]
kind = "ecnn"
state_dim = 8

[train]
epochs = 100
batch_size = 32
window = 7
learning_rate = 1e-3
optimizer = "adam"
seed = 42

[output]
dir = "{}"
"#,
            fixture.display(),
            out_dir.display()
        ),
    )
    .unwrap();

    let bin: PathBuf = env!("CARGO_BIN_EXE_ecnn").into();
    for sub in ["train", "evaluate", "backtest"] {
        let out = std::process::Command::new(&bin)
            .args([sub, "--config"])
            .arg(&config)
            .output()
            .expect("binary runs");
        if !out.status.success() {
            problems.push(format!(
                "{sub} exited with {:?}: {}",
                out.status.code(),
                String::from_utf8_lossy(&out.stderr)
            ));
        }
    }

    if problems.is_empty() {
        let metrics = std::fs::read_to_string(out_dir.join("metrics.csv")).unwrap();
        let lines: Vec<&str> = metrics.lines().collect();
        let cols = lines[0].split(',').count();
        if lines.len() != 6 {
            problems.push(format!("metrics.csv has {} rows, want 6", lines.len()));
        }
        if !lines[0].starts_with("metric,") || !lines[0].ends_with(",Average") {
            problems.push(format!("metrics.csv header: {}", lines[0]));
        }
        if lines.iter().skip(1).any(|l| l.split(',').count() != cols) {
            problems.push("ragged metrics.csv".into());
        }

        let preds = std::fs::read_to_string(out_dir.join("predictions.csv")).unwrap();
        if !preds.starts_with("date,actual,predicted\n") || preds.lines().count() < 30 {
            problems.push("predictions.csv malformed or too short".into());
        }

        let returns = std::fs::read_to_string(out_dir.join("returns.csv")).unwrap();
        let rl: Vec<&str> = returns.lines().collect();
        if rl.len() != 3
            || !rl[0].starts_with("series,")
            || !rl[1].starts_with("strategy,")
            || !rl[2].starts_with("buy_and_hold,")
        {
            problems.push(format!("returns.csv shape: {rl:?}"));
        }
        let width = rl[0].split(',').count();
        if rl.iter().any(|l| l.split(',').count() != width) {
            problems.push("ragged returns.csv".into());
        }

        if !out_dir.join("checkpoint.bin").exists()
            || !out_dir.join("tradelog.csv").exists()
            || !out_dir.join("summary.txt").exists()
        {
            problems.push("expected output file missing".into());
        }
    }

    let elapsed = started.elapsed().as_secs_f64();
    if elapsed >= 120.0 {
        problems.push(format!("round trip took {elapsed:.0}s"));
    }
    verdict(
        9,
        "CLI train/evaluate/backtest round trip on the bundled fixture",
        problems.is_empty(),
        format!("{problems:?}"),
    );
}
