use std::path::PathBuf;
use std::time::Instant;

use clap::Args;
use ecnn_core::baselines::{init_lstm_params, init_rnn_params};
use ecnn_core::checkpoint::ModelCheckpoint;
use ecnn_core::ecnn::init_params;
use ecnn_core::model::ModelKind;
use ecnn_core::training::{fit, TrainReport};
use ecnn_core::Result;

use crate::commands::build_pipeline;
use crate::config::Config;

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Run configuration TOML file.
    #[arg(long)]
    pub config: PathBuf,
    /// Override `train.seed` from the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Override `output.dir` from the config.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(args: &TrainArgs) -> Result<()> {
    let mut config = Config::load(&args.config)?;
    if let Some(seed) = args.seed {
        config.train.seed = seed;
    }
    if let Some(dir) = &args.out {
        config.output.dir = dir.clone();
    }

    let dataset = build_pipeline(&config)?;
    println!(
        "dataset: {} features, window {}, {} train / {} val / {} test windows",
        dataset.feature_dim(),
        dataset.window(),
        dataset.train_samples().len(),
        dataset.val_samples().len(),
        dataset.test_samples().len()
    );

    let kind = config.model.model_kind()?;
    let train_cfg = config.train.to_train_config()?;
    let n = config.model.state_dim;
    let m = dataset.feature_dim();

    let started = Instant::now();
    let (report, checkpoint): (TrainReport<f64>, ModelCheckpoint) = match kind {
        ModelKind::Ecnn => {
            let mut model = init_params(n, m, 1, train_cfg.seed)?;
            let report = fit(&mut model, &dataset, &train_cfg)?;
            (report, ModelCheckpoint::Ecnn(model))
        }
        ModelKind::Rnn => {
            let mut model = init_rnn_params(n, m, 1, train_cfg.seed)?;
            let report = fit(&mut model, &dataset, &train_cfg)?;
            (report, ModelCheckpoint::Rnn(model))
        }
        ModelKind::Lstm => {
            let mut model = init_lstm_params(n, m, 1, train_cfg.seed)?;
            let report = fit(&mut model, &dataset, &train_cfg)?;
            (report, ModelCheckpoint::Lstm(model))
        }
    };
    let elapsed = started.elapsed();

    let out_dir = &config.output.dir;
    std::fs::create_dir_all(out_dir)?;
    checkpoint.save(out_dir.join("checkpoint.bin"))?;
    report.write_loss_csv(out_dir.join("loss_curve.csv"))?;
    std::fs::write(out_dir.join("resolved.toml"), config.to_toml())?;

    match (report.best_epoch, report.train_loss.last(), report.val_loss.last()) {
        (Some(best), Some(train_last), Some(_)) => {
            println!(
                "trained {kind} for {} epochs in {:.1}s; best epoch {} (val loss {:.6e}), final train loss {:.6e}",
                report.train_loss.len(),
                elapsed.as_secs_f64(),
                best,
                report.val_loss[best],
                train_last
            );
        }
        _ => println!("trained {kind} for 0 epochs; parameters left at initialization"),
    }
    println!("wrote {}", out_dir.join("checkpoint.bin").display());
    Ok(())
}
