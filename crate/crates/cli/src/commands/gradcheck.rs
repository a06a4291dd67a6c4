use clap::Args;
use ecnn_core::baselines::{init_lstm_params, init_rnn_params};
use ecnn_core::ecnn::init_params;
use ecnn_core::gradcheck::{
    check_gradients, random_sequence, CheckReport, DEFAULT_STEP, DEFAULT_TOLERANCE,
};
use ecnn_core::linalg::{Matrix, Vector};
use ecnn_core::model::{ModelKind, SequenceModel};
use ecnn_core::{Error, Result};

/// Environment hook for a negative control: name a tensor (or leave the
/// value empty for the first one) and its analytic gradient is deliberately
/// corrupted before the comparison, which must make the check fail.
pub const CORRUPT_ENV: &str = "ECNN_GRADCHECK_CORRUPT";

const MAX_DIM: usize = 10;

#[derive(Args, Debug)]
pub struct GradcheckArgs {
    /// `ecnn`, `rnn`, `lstm`, or `all`.
    #[arg(long, default_value = "all")]
    pub model: String,
    #[arg(long, default_value_t = 4)]
    pub state_dim: usize,
    #[arg(long, default_value_t = 3)]
    pub input_dim: usize,
    #[arg(long, default_value_t = 2)]
    pub output_dim: usize,
    /// Sequence length of each trial.
    #[arg(long, default_value_t = 6)]
    pub steps: usize,
    /// Random restarts per model.
    #[arg(long, default_value_t = 3)]
    pub trials: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Finite-difference step size.
    #[arg(long, default_value_t = DEFAULT_STEP)]
    pub step: f64,
    /// Maximum accepted relative error.
    #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
    pub tolerance: f64,
}

pub fn run(args: &GradcheckArgs) -> Result<()> {
    for (name, v) in [
        ("state-dim", args.state_dim),
        ("input-dim", args.input_dim),
        ("output-dim", args.output_dim),
    ] {
        if v < 1 || v > MAX_DIM {
            return Err(Error::InvalidArgument(format!(
                "--{name} {v} must lie in 1..={MAX_DIM}"
            )));
        }
    }
    if args.steps < 1 || args.steps > 64 {
        return Err(Error::InvalidArgument(format!(
            "--steps {} must lie in 1..=64",
            args.steps
        )));
    }
    if args.trials < 1 || args.trials > 1000 {
        return Err(Error::InvalidArgument(format!(
            "--trials {} must lie in 1..=1000",
            args.trials
        )));
    }

    let kinds: Vec<ModelKind> = if args.model == "all" {
        vec![ModelKind::Ecnn, ModelKind::Rnn, ModelKind::Lstm]
    } else {
        vec![args.model.parse()?]
    };
    let corrupt = std::env::var(CORRUPT_ENV).ok();

    let (n, m, p) = (args.state_dim, args.input_dim, args.output_dim);
    let mut failures = Vec::new();
    for kind in kinds {
        let mut worst = 0.0f64;
        let mut passed = 0usize;
        for trial in 0..args.trials {
            let model_seed = args.seed + 1009 * trial as u64 + 101 * kind.tag() as u64;
            let (inputs, targets) = random_sequence::<f64>(m, p, args.steps, model_seed + 7);
            // the corruption hook applies to the first trial only, so a
            // corrupted run still shows healthy trials alongside the failure
            let corrupt_here = if trial == 0 { corrupt.as_deref() } else { None };
            let report = run_one(kind, n, m, p, model_seed, &inputs, &targets, args, corrupt_here)?;
            for t in &report.tensors {
                println!(
                    "{kind} trial {trial}: {:<4} max rel error {:.3e} at {:?} (analytic {:.6e}, numeric {:.6e})",
                    t.name, t.max_rel_error, t.worst_entry, t.analytic, t.numeric
                );
            }
            worst = worst.max(report.max_rel_error());
            if report.passed {
                passed += 1;
            } else {
                failures.push(format!(
                    "{kind} trial {trial}: tensors {:?} exceed tolerance {:.1e}",
                    report.failing_tensors(),
                    args.tolerance
                ));
            }
        }
        println!(
            "{kind}: {passed}/{} trials passed (worst relative error {worst:.3e})",
            args.trials
        );
    }

    if failures.is_empty() {
        println!("gradient check passed");
        Ok(())
    } else {
        Err(Error::Numerical(format!(
            "gradient check failed: {}",
            failures.join("; ")
        )))
    }
}

#[allow(clippy::too_many_arguments)]
fn run_one(
    kind: ModelKind,
    n: usize,
    m: usize,
    p: usize,
    seed: u64,
    inputs: &[Vector<f64>],
    targets: &[Vector<f64>],
    args: &GradcheckArgs,
    corrupt: Option<&str>,
) -> Result<CheckReport> {
    match kind {
        ModelKind::Ecnn => {
            let model = init_params::<f64>(n, m, p, seed)?;
            checked(model, inputs, targets, args, corrupt)
        }
        ModelKind::Rnn => {
            let model = init_rnn_params::<f64>(n, m, p, seed)?;
            checked(model, inputs, targets, args, corrupt)
        }
        ModelKind::Lstm => {
            let model = init_lstm_params::<f64>(n, m, p, seed)?;
            checked(model, inputs, targets, args, corrupt)
        }
    }
}

fn checked<M: SequenceModel<f64>>(
    model: M,
    inputs: &[Vector<f64>],
    targets: &[Vector<f64>],
    args: &GradcheckArgs,
    corrupt: Option<&str>,
) -> Result<CheckReport> {
    match corrupt {
        None => check_gradients(&model, inputs, targets, args.step, args.tolerance),
        Some(which) => {
            let names = model.tensor_names();
            let tensor = if which.is_empty() {
                0
            } else {
                names.iter().position(|&n| n == which).ok_or_else(|| {
                    Error::InvalidArgument(format!(
                        "{CORRUPT_ENV}={which} names no tensor of this model; valid: {names:?}"
                    ))
                })?
            };
            eprintln!(
                "negative control: corrupting the analytic gradient of {}",
                names[tensor]
            );
            let wrapped = Corrupted { inner: model, tensor };
            check_gradients(&wrapped, inputs, targets, args.step, args.tolerance)
        }
    }
}

/// Delegating wrapper that falsifies one analytic gradient tensor. The
/// finite-difference side only sees losses, so the checker must flag the
/// mismatch; if it does not, the checker itself is broken.
#[derive(Clone)]
struct Corrupted<M> {
    inner: M,
    tensor: usize,
}

impl<M: SequenceModel<f64>> SequenceModel<f64> for Corrupted<M> {
    type Carry = M::Carry;
    type Trace = M::Trace;

    fn kind(&self) -> ModelKind {
        self.inner.kind()
    }

    fn state_dim(&self) -> usize {
        self.inner.state_dim()
    }

    fn input_dim(&self) -> usize {
        self.inner.input_dim()
    }

    fn output_dim(&self) -> usize {
        self.inner.output_dim()
    }

    fn tensor_names(&self) -> &'static [&'static str] {
        self.inner.tensor_names()
    }

    fn params(&self) -> Vec<&Matrix<f64>> {
        self.inner.params()
    }

    fn params_mut(&mut self) -> Vec<&mut Matrix<f64>> {
        self.inner.params_mut()
    }

    fn initial_carry(&self) -> Self::Carry {
        self.inner.initial_carry()
    }

    fn segment_forward(
        &self,
        carry: &Self::Carry,
        inputs: &[Vector<f64>],
        targets: &[Vector<f64>],
        loss_scale: f64,
    ) -> Result<(f64, Self::Trace, Self::Carry)> {
        self.inner.segment_forward(carry, inputs, targets, loss_scale)
    }

    fn segment_backward(
        &self,
        trace: &Self::Trace,
        inputs: &[Vector<f64>],
        loss_scale: f64,
    ) -> Result<Vec<Matrix<f64>>> {
        let mut grads = self.inner.segment_backward(trace, inputs, loss_scale)?;
        if let Some(g) = grads.get_mut(self.tensor) {
            g.as_mut_slice()[0] += 0.75;
        }
        Ok(grads)
    }

    fn predict_next(
        &self,
        inputs: &[Vector<f64>],
        prior_targets: &[Vector<f64>],
    ) -> Result<Vector<f64>> {
        self.inner.predict_next(inputs, prior_targets)
    }
}
