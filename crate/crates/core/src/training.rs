//! Mini-batch training over rolling-window datasets.
//!
//! Each window is an independent sequence started from the zero state; its
//! loss is the mean per-step squared error, and truncated BPTT cuts the
//! window into segments whose carries chain forward while gradients stay
//! segment-local. The mini-batch gradient is the mean over its windows, so
//! the learning rate is comparable across batch sizes. After every epoch
//! the validation loss is recorded, and the parameters from the best
//! validation epoch are what `fit` leaves in the model.

use std::fmt;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{WindowSample, WindowedDataset};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::model::SequenceModel;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Optimizer {
    Sgd,
    Adam,
}

impl fmt::Display for Optimizer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Optimizer::Sgd => "sgd",
            Optimizer::Adam => "adam",
        })
    }
}

impl FromStr for Optimizer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sgd" => Ok(Optimizer::Sgd),
            "adam" => Ok(Optimizer::Adam),
            other => Err(Error::InvalidArgument(format!(
                "unknown optimizer '{other}' (expected sgd or adam)"
            ))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    /// Rolling-window length; must match the dataset.
    pub window: usize,
    pub learning_rate: f64,
    /// Truncated-BPTT segment length; `None` unrolls the whole window.
    pub truncation: Option<usize>,
    pub seed: u64,
    pub optimizer: Optimizer,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 1000,
            batch_size: 64,
            window: 7,
            learning_rate: 1e-3,
            truncation: None,
            seed: 42,
            optimizer: Optimizer::Adam,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size < 1 {
            return Err(Error::InvalidArgument("batch_size must be at least 1".into()));
        }
        if self.window < 1 {
            return Err(Error::InvalidArgument("window must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "learning_rate {} must be positive and finite",
                self.learning_rate
            )));
        }
        if let Some(k) = self.truncation {
            if k < 1 || k > self.window {
                return Err(Error::InvalidArgument(format!(
                    "truncation {k} must lie in 1..={}",
                    self.window
                )));
            }
        }
        Ok(())
    }
}

/// `(1/(2K)) * sum (target - prediction)^2`. `examples` is the divisor K,
/// which may differ from the pair count when several windows contribute per
/// example.
pub fn mse_loss<T: Scalar>(predictions: &[T], targets: &[T], examples: usize) -> Result<T> {
    if predictions.len() != targets.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} predictions but {} targets",
            predictions.len(),
            targets.len()
        )));
    }
    if examples == 0 {
        return Err(Error::InvalidArgument("example count must be positive".into()));
    }
    let sum: T = predictions
        .iter()
        .zip(targets)
        .map(|(&p, &t)| {
            let d = t - p;
            d * d
        })
        .sum();
    Ok(sum / (T::from(2).unwrap() * T::from(examples).unwrap()))
}

/// In-place `W -= lr * g` over aligned tensor lists.
pub fn sgd_step<T: Scalar>(
    params: Vec<&mut Matrix<T>>,
    gradients: &[Matrix<T>],
    learning_rate: T,
) -> Result<()> {
    if params.len() != gradients.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} parameter tensors but {} gradients",
            params.len(),
            gradients.len()
        )));
    }
    for (p, g) in params.into_iter().zip(gradients) {
        p.add_scaled(-learning_rate, g)?;
    }
    Ok(())
}

/// Per-tensor first and second moments for the adaptive optimizer.
#[derive(Clone, Debug)]
pub struct AdamState<T> {
    m: Vec<Matrix<T>>,
    v: Vec<Matrix<T>>,
    step: u64,
    beta1: T,
    beta2: T,
    epsilon: T,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(params: &[&Matrix<T>]) -> Self {
        Self {
            m: params.iter().map(|p| Matrix::zeros_like(p)).collect(),
            v: params.iter().map(|p| Matrix::zeros_like(p)).collect(),
            step: 0,
            beta1: T::from(0.9).unwrap(),
            beta2: T::from(0.999).unwrap(),
            epsilon: T::from(1e-8).unwrap(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

/// Bias-corrected adaptive update: moments folded in, then
/// `W -= lr * m_hat / (sqrt(v_hat) + eps)` per coordinate.
pub fn adam_step<T: Scalar>(
    params: Vec<&mut Matrix<T>>,
    gradients: &[Matrix<T>],
    state: &mut AdamState<T>,
    learning_rate: T,
) -> Result<()> {
    if params.len() != gradients.len() || params.len() != state.m.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} parameter tensors, {} gradients, {} state slots",
            params.len(),
            gradients.len(),
            state.m.len()
        )));
    }
    let one = T::one();
    state.step += 1;
    let t = state.step as i32;
    let bc1 = one - state.beta1.powi(t);
    let bc2 = one - state.beta2.powi(t);
    for (k, (p, g)) in params.into_iter().zip(gradients).enumerate() {
        if p.shape() != g.shape() || state.m[k].shape() != g.shape() {
            return Err(Error::DimensionMismatch(format!(
                "tensor {k}: parameter {:?} vs gradient {:?}",
                p.shape(),
                g.shape()
            )));
        }
        let m = state.m[k].as_mut_slice();
        let v = state.v[k].as_mut_slice();
        let pv = p.as_mut_slice();
        for i in 0..pv.len() {
            let gi = g.as_slice()[i];
            m[i] = state.beta1 * m[i] + (one - state.beta1) * gi;
            v[i] = state.beta2 * v[i] + (one - state.beta2) * gi * gi;
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            pv[i] -= learning_rate * m_hat / (v_hat.sqrt() + state.epsilon);
        }
    }
    Ok(())
}

/// Loss curves and the selected epoch; `selected_params` are clones of the
/// tensors `fit` left in the model.
#[derive(Clone, Debug)]
pub struct TrainReport<T> {
    pub train_loss: Vec<T>,
    pub val_loss: Vec<T>,
    pub best_epoch: Option<usize>,
    pub selected_params: Vec<Matrix<T>>,
}

impl<T: Scalar> TrainReport<T> {
    pub fn write_loss_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = String::from("epoch,train_loss,val_loss\n");
        for (e, (tr, va)) in self.train_loss.iter().zip(&self.val_loss).enumerate() {
            let _ = writeln!(out, "{e},{tr},{va}");
        }
        std::fs::write(path, out)?;
        Ok(())
    }
}

/// Window loss and summed segment gradients under truncation `trunc`.
fn window_pass<T: Scalar, M: SequenceModel<T>>(
    model: &M,
    sample: &WindowSample<T>,
    trunc: usize,
    window: usize,
) -> Result<(T, Vec<Matrix<T>>)> {
    let scale = T::one() / T::from(window).unwrap();
    let mut carry = model.initial_carry();
    let mut loss = T::zero();
    let mut grads: Option<Vec<Matrix<T>>> = None;
    for (xs, ys) in sample.inputs.chunks(trunc).zip(sample.step_targets.chunks(trunc)) {
        let (seg_loss, trace, next) = model.segment_forward(&carry, xs, ys, scale)?;
        loss += seg_loss;
        let seg_grads = model.segment_backward(&trace, xs, scale)?;
        match &mut grads {
            None => grads = Some(seg_grads),
            Some(acc) => {
                for (a, g) in acc.iter_mut().zip(&seg_grads) {
                    a.add_scaled(T::one(), g)?;
                }
            }
        }
        carry = next;
    }
    Ok((loss, grads.expect("windows have at least one step")))
}

fn mean_window_loss<T: Scalar, M: SequenceModel<T>>(
    model: &M,
    samples: &[WindowSample<T>],
) -> Result<T> {
    let mut sum = T::zero();
    for s in samples {
        sum += model.sequence_loss(&s.inputs, &s.step_targets)?;
    }
    Ok(sum / T::from(samples.len()).unwrap())
}

/// Trains `model` on the dataset's train split and leaves it holding the
/// parameters from the epoch with the smallest validation loss (earliest on
/// ties). With an empty validation split, selection falls back to the
/// training loss. Fully deterministic for a given seed.
pub fn fit<T: Scalar, M: SequenceModel<T>>(
    model: &mut M,
    dataset: &WindowedDataset<T>,
    cfg: &TrainConfig,
) -> Result<TrainReport<T>> {
    cfg.validate()?;
    if cfg.window != dataset.window() {
        return Err(Error::InvalidArgument(format!(
            "config window {} does not match dataset window {}",
            cfg.window,
            dataset.window()
        )));
    }
    if model.input_dim() != dataset.feature_dim() {
        return Err(Error::DimensionMismatch(format!(
            "model expects {} input features, dataset has {}",
            model.input_dim(),
            dataset.feature_dim()
        )));
    }
    if model.output_dim() != 1 {
        return Err(Error::DimensionMismatch(format!(
            "dataset targets are scalar; model outputs {} values",
            model.output_dim()
        )));
    }
    let train = dataset.train_samples();
    if train.is_empty() {
        return Err(Error::Data("no training windows".into()));
    }
    let val = dataset.val_samples();
    let trunc = cfg.truncation.unwrap_or(cfg.window);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let lr = T::from(cfg.learning_rate).unwrap();
    let mut adam = match cfg.optimizer {
        Optimizer::Adam => Some(AdamState::new(&model.params())),
        Optimizer::Sgd => None,
    };

    let mut train_curve = Vec::with_capacity(cfg.epochs);
    let mut val_curve = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(T, usize, Vec<Matrix<T>>)> = None;
    let mut order: Vec<usize> = (0..train.len()).collect();

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = T::zero();
        for batch in order.chunks(cfg.batch_size) {
            let mut acc: Option<Vec<Matrix<T>>> = None;
            for &idx in batch {
                let (loss, grads) = window_pass(model, &train[idx], trunc, cfg.window)?;
                loss_sum += loss;
                match &mut acc {
                    None => acc = Some(grads),
                    Some(acc) => {
                        for (a, g) in acc.iter_mut().zip(&grads) {
                            a.add_scaled(T::one(), g)?;
                        }
                    }
                }
            }
            let mut grads = acc.expect("batches are non-empty");
            let inv = T::one() / T::from(batch.len()).unwrap();
            for g in &mut grads {
                g.scale_in_place(inv);
            }
            match cfg.optimizer {
                Optimizer::Sgd => sgd_step(model.params_mut(), &grads, lr)?,
                Optimizer::Adam => {
                    adam_step(model.params_mut(), &grads, adam.as_mut().unwrap(), lr)?
                }
            }
        }
        let train_loss = loss_sum / T::from(train.len()).unwrap();
        let val_loss = if val.is_empty() {
            mean_window_loss(model, train)?
        } else {
            mean_window_loss(model, val)?
        };
        if !train_loss.is_finite() || !val_loss.is_finite() {
            return Err(Error::Numerical(format!("training diverged at epoch {epoch}")));
        }
        train_curve.push(train_loss);
        val_curve.push(val_loss);
        let improved = match &best {
            None => true,
            Some((best_val, _, _)) => val_loss < *best_val,
        };
        if improved {
            let snapshot = model.params().into_iter().cloned().collect();
            best = Some((val_loss, epoch, snapshot));
        }
    }

    let best_epoch = best.as_ref().map(|(_, e, _)| *e);
    if let Some((_, _, snapshot)) = best {
        for (p, s) in model.params_mut().into_iter().zip(snapshot) {
            *p = s;
        }
    }
    Ok(TrainReport {
        train_loss: train_curve,
        val_loss: val_curve,
        best_epoch,
        selected_params: model.params().into_iter().cloned().collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mse_hand_values() {
        assert_eq!(mse_loss(&[1.0, 2.0], &[1.0, 2.0], 2).unwrap(), 0.0);
        assert!((mse_loss::<f64>(&[0.5], &[1.0], 1).unwrap() - 0.125).abs() < 1e-15);
        // duplicating the data while doubling K leaves the value unchanged
        let single = mse_loss::<f64>(&[0.5, 0.2], &[1.0, 0.1], 2).unwrap();
        let doubled = mse_loss(&[0.5, 0.2, 0.5, 0.2], &[1.0, 0.1, 1.0, 0.1], 4).unwrap();
        assert!((single - doubled).abs() < 1e-15);
        assert!(mse_loss::<f64>(&[1.0], &[1.0], 0).is_err());
        assert!(mse_loss(&[1.0], &[1.0, 2.0], 1).is_err());
    }

    #[test]
    fn sgd_hand_values_and_linearity() {
        let mut w = Matrix::from_rows(vec![vec![2.0f64]]).unwrap();
        let g = Matrix::from_rows(vec![vec![0.5f64]]).unwrap();
        sgd_step(vec![&mut w], std::slice::from_ref(&g), 1.0).unwrap();
        assert_eq!(w[(0, 0)], 1.5);

        let zero = Matrix::zeros_like(&g);
        sgd_step(vec![&mut w], std::slice::from_ref(&zero), 1.0).unwrap();
        assert_eq!(w[(0, 0)], 1.5);

        // two eta-steps of a held gradient equal one 2*eta step
        let mut a = Matrix::from_rows(vec![vec![2.0f64]]).unwrap();
        let mut b = a.clone();
        sgd_step(vec![&mut a], std::slice::from_ref(&g), 0.25).unwrap();
        sgd_step(vec![&mut a], std::slice::from_ref(&g), 0.25).unwrap();
        sgd_step(vec![&mut b], std::slice::from_ref(&g), 0.5).unwrap();
        assert_eq!(a[(0, 0)], b[(0, 0)]);
    }

    #[test]
    fn sgd_shape_mismatch_errors() {
        let mut w = Matrix::<f64>::zeros(2, 2);
        let g = Matrix::<f64>::zeros(2, 3);
        assert!(sgd_step(vec![&mut w], std::slice::from_ref(&g), 0.1).is_err());
        let g2 = Matrix::<f64>::zeros(2, 2);
        assert!(sgd_step(vec![&mut w], &[g2.clone(), g2], 0.1).is_err());
    }

    #[test]
    fn adam_first_step_is_signed_learning_rate() {
        let mut w = Matrix::from_rows(vec![vec![1.0f64, -1.0]]).unwrap();
        let g = Matrix::from_rows(vec![vec![0.5f64, -0.25]]).unwrap();
        let mut state = AdamState::new(&[&w]);
        adam_step(vec![&mut w], std::slice::from_ref(&g), &mut state, 0.01).unwrap();
        assert_eq!(state.step_count(), 1);
        assert!((w[(0, 0)] - (1.0 - 0.01)).abs() < 1e-9);
        assert!((w[(0, 1)] - (-1.0 + 0.01)).abs() < 1e-9);
    }

    #[test]
    fn adam_zero_gradient_is_identity() {
        let mut w = Matrix::from_rows(vec![vec![3.0f64]]).unwrap();
        let g = Matrix::zeros_like(&w);
        let mut state = AdamState::new(&[&w]);
        adam_step(vec![&mut w], std::slice::from_ref(&g), &mut state, 0.1).unwrap();
        assert_eq!(w[(0, 0)], 3.0);
        assert_eq!(state.step_count(), 1);
    }

    #[test]
    fn config_validation() {
        let ok = TrainConfig::default();
        assert!(ok.validate().is_ok());
        assert!(TrainConfig { batch_size: 0, ..ok.clone() }.validate().is_err());
        assert!(TrainConfig { learning_rate: 0.0, ..ok.clone() }.validate().is_err());
        assert!(TrainConfig { truncation: Some(0), ..ok.clone() }.validate().is_err());
        assert!(TrainConfig { truncation: Some(8), window: 7, ..ok }.validate().is_err());
    }

    #[test]
    fn optimizer_parses() {
        assert_eq!("sgd".parse::<Optimizer>().unwrap(), Optimizer::Sgd);
        assert_eq!("adam".parse::<Optimizer>().unwrap(), Optimizer::Adam);
        assert!("momentum".parse::<Optimizer>().is_err());
    }
}
