use std::fmt::Write as _;
use std::path::PathBuf;

use clap::Args;
use ecnn_core::baselines::{init_lstm_params, init_rnn_params};
use ecnn_core::checkpoint::ModelCheckpoint;
use ecnn_core::ecnn::init_params;
use ecnn_core::eval::{yearly_report, MetricReport, METRIC_NAMES};
use ecnn_core::model::ModelKind;
use ecnn_core::training::fit;
use ecnn_core::{Error, Result};

use crate::commands::{build_pipeline, predict_test};
use crate::config::Config;

#[derive(Args, Debug)]
pub struct CompareArgs {
    /// Two or more run configuration files; they must agree on the data
    /// file, the split, the window length, and the reporting periods.
    #[arg(long, num_args = 2.., required = true)]
    pub configs: Vec<PathBuf>,
    /// Directory for the comparison grids.
    #[arg(long, default_value = "compare_out")]
    pub out: PathBuf,
    /// Train the runs sequentially instead of in parallel threads.
    #[arg(long)]
    pub sequential: bool,
}

pub fn run(args: &CompareArgs) -> Result<()> {
    let mut labels: Vec<String> = Vec::new();
    let mut configs: Vec<Config> = Vec::new();
    for path in &args.configs {
        let label = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        if labels.contains(&label) {
            return Err(Error::InvalidArgument(format!(
                "config label '{label}' appears twice; rename one file"
            )));
        }
        labels.push(label);
        configs.push(Config::load(path)?);
    }

    let base = &configs[0];
    for (label, c) in labels.iter().zip(&configs).skip(1) {
        if c.data != base.data {
            return Err(Error::InvalidArgument(format!(
                "config '{label}': [data] differs from '{}'",
                labels[0]
            )));
        }
        if c.split != base.split {
            return Err(Error::InvalidArgument(format!(
                "config '{label}': [split] differs from '{}'",
                labels[0]
            )));
        }
        if c.train.window != base.train.window {
            return Err(Error::InvalidArgument(format!(
                "config '{label}': train.window differs from '{}'",
                labels[0]
            )));
        }
        if c.output.periods != base.output.periods {
            return Err(Error::InvalidArgument(format!(
                "config '{label}': output.periods differs from '{}'",
                labels[0]
            )));
        }
    }

    let reports: Vec<MetricReport> = if args.sequential {
        let mut out = Vec::with_capacity(configs.len());
        for (label, config) in labels.iter().zip(&configs) {
            println!("training '{label}'");
            out.push(run_single(config)?);
        }
        out
    } else {
        // one thread per run; joining in spawn order keeps the merge
        // deterministic no matter how the threads are scheduled
        std::thread::scope(|scope| {
            let handles: Vec<_> = configs
                .iter()
                .map(|config| scope.spawn(move || run_single(config)))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("comparison worker panicked"))
                .collect::<Result<Vec<_>>>()
        })?
    };

    // identical data, split, and window imply identical test dates, so the
    // period labels must line up; anything else is a bug upstream
    let period_labels: Vec<&String> =
        reports[0].periods.iter().map(|p| &p.label).collect();
    for (label, report) in labels.iter().zip(&reports).skip(1) {
        let got: Vec<&String> = report.periods.iter().map(|p| &p.label).collect();
        if got != period_labels {
            return Err(Error::Data(format!(
                "run '{label}' produced periods {got:?}, expected {period_labels:?}"
            )));
        }
    }

    std::fs::create_dir_all(&args.out)?;
    for (mi, metric) in METRIC_NAMES.iter().enumerate() {
        let mut out = String::from("config");
        for pl in &period_labels {
            let _ = write!(out, ",{pl}");
        }
        out.push_str(",Average\n");
        for (label, report) in labels.iter().zip(&reports) {
            let _ = write!(out, "{label}");
            for period in &report.periods {
                let _ = write!(out, ",{}", period.values()[mi]);
            }
            let _ = writeln!(out, ",{}", report.average.values()[mi]);
        }
        std::fs::write(args.out.join(format!("{metric}.csv")), out)?;
    }

    println!("compared {} runs over {} periods", labels.len(), period_labels.len());
    let width = labels.iter().map(|l| l.len()).max().unwrap_or(6).max(6);
    print!("{:width$}", "config");
    for metric in METRIC_NAMES {
        print!("  {metric:>20}");
    }
    println!();
    for (label, report) in labels.iter().zip(&reports) {
        print!("{label:width$}");
        for v in report.average.values() {
            print!("  {v:>20.6}");
        }
        println!();
    }
    println!("wrote per-metric grids to {}", args.out.display());
    Ok(())
}

fn run_single(config: &Config) -> Result<MetricReport> {
    let dataset = build_pipeline(config)?;
    let kind = config.model.model_kind()?;
    let train_cfg = config.train.to_train_config()?;
    let n = config.model.state_dim;
    let m = dataset.feature_dim();
    let checkpoint = match kind {
        ModelKind::Ecnn => {
            let mut model = init_params(n, m, 1, train_cfg.seed)?;
            fit(&mut model, &dataset, &train_cfg)?;
            ModelCheckpoint::Ecnn(model)
        }
        ModelKind::Rnn => {
            let mut model = init_rnn_params(n, m, 1, train_cfg.seed)?;
            fit(&mut model, &dataset, &train_cfg)?;
            ModelCheckpoint::Rnn(model)
        }
        ModelKind::Lstm => {
            let mut model = init_lstm_params(n, m, 1, train_cfg.seed)?;
            fit(&mut model, &dataset, &train_cfg)?;
            ModelCheckpoint::Lstm(model)
        }
    };
    let tp = predict_test(&checkpoint, &dataset)?;
    yearly_report(&tp.dates, &tp.actual, &tp.predicted, config.output.period_mode()?)
}
