use std::path::PathBuf;

use clap::Args;
use ecnn_core::checkpoint::ModelCheckpoint;
use ecnn_core::eval::yearly_report;
use ecnn_core::{Error, Result};

use crate::commands::{build_pipeline, predict_test, write_predictions_csv};
use crate::config::Config;

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Run configuration TOML file.
    #[arg(long)]
    pub config: PathBuf,
    /// Checkpoint to evaluate; defaults to `<output.dir>/checkpoint.bin`.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Override `output.dir` from the config.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn load_run(args: &EvalArgs) -> Result<(Config, ModelCheckpoint)> {
    let mut config = Config::load(&args.config)?;
    if let Some(dir) = &args.out {
        config.output.dir = dir.clone();
    }
    let path = args
        .checkpoint
        .clone()
        .unwrap_or_else(|| config.output.dir.join("checkpoint.bin"));
    let checkpoint = ModelCheckpoint::load(&path)?;
    let expected = config.model.model_kind()?;
    if checkpoint.kind() != expected {
        return Err(Error::InvalidArgument(format!(
            "checkpoint {} holds a {} model but the config says {expected}",
            path.display(),
            checkpoint.kind()
        )));
    }
    Ok((config, checkpoint))
}

pub fn run(args: &EvalArgs) -> Result<()> {
    let (config, checkpoint) = load_run(args)?;
    let dataset = build_pipeline(&config)?;
    let tp = predict_test(&checkpoint, &dataset)?;

    let out_dir = &config.output.dir;
    std::fs::create_dir_all(out_dir)?;
    write_predictions_csv(out_dir.join("predictions.csv"), &tp)?;

    let mode = config.output.period_mode()?;
    let report = yearly_report(&tp.dates, &tp.actual, &tp.predicted, mode)?;
    report.write_csv(out_dir.join("metrics.csv"))?;
    let summary = report.summary();
    std::fs::write(out_dir.join("summary.txt"), &summary)?;

    println!(
        "evaluated {} test predictions from {} to {}",
        tp.dates.len(),
        tp.dates.first().unwrap(),
        tp.dates.last().unwrap()
    );
    print!("{summary}");
    println!("wrote {}", out_dir.join("metrics.csv").display());
    Ok(())
}
