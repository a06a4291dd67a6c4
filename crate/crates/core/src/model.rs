//! Common interface over the recurrent cells in this crate.
//!
//! Every model exposes the same four capabilities: forward evaluation over a
//! segment of steps with an explicit carried state, reverse-accumulation
//! gradients over that segment, a flat view of its parameter tensors, and
//! one-step-ahead prediction. The training loop and the gradient checker are
//! written against this trait only.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Ecnn,
    Rnn,
    Lstm,
}

impl ModelKind {
    /// Stable one-byte tag used by the checkpoint format.
    pub fn tag(self) -> u8 {
        match self {
            ModelKind::Ecnn => 1,
            ModelKind::Rnn => 2,
            ModelKind::Lstm => 3,
        }
    }

    pub fn from_tag(tag: u8) -> Result<Self> {
        match tag {
            1 => Ok(ModelKind::Ecnn),
            2 => Ok(ModelKind::Rnn),
            3 => Ok(ModelKind::Lstm),
            other => Err(Error::Data(format!("unknown model tag {other}"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Ecnn => "ecnn",
            ModelKind::Rnn => "rnn",
            ModelKind::Lstm => "lstm",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ecnn" => Ok(ModelKind::Ecnn),
            "rnn" => Ok(ModelKind::Rnn),
            "lstm" => Ok(ModelKind::Lstm),
            other => Err(Error::InvalidArgument(format!(
                "unknown model kind '{other}' (expected ecnn, rnn, or lstm)"
            ))),
        }
    }
}

/// A recurrent cell trainable by truncated backpropagation through time.
///
/// A "segment" is a consecutive run of steps evaluated from a carried state.
/// Splitting a window into segments and chaining the carries gives truncated
/// BPTT: gradients never flow across a segment boundary. With a single
/// segment covering the whole window, `segment_backward` is exact BPTT.
///
/// `loss_scale` multiplies each step's `1/2 * ||y - y_d||^2` term so that
/// segment losses of one window sum to the window's `(1/T) * sum` loss
/// regardless of how the window was cut.
pub trait SequenceModel<T: Scalar>: Clone {
    /// State carried across a segment boundary.
    type Carry: Clone;
    /// Cached forward quantities consumed by `segment_backward`.
    type Trace;

    fn kind(&self) -> ModelKind;
    fn state_dim(&self) -> usize;
    fn input_dim(&self) -> usize;
    fn output_dim(&self) -> usize;

    /// Names of the parameter tensors, aligned with `params`/`params_mut`.
    fn tensor_names(&self) -> &'static [&'static str];
    fn params(&self) -> Vec<&Matrix<T>>;
    fn params_mut(&mut self) -> Vec<&mut Matrix<T>>;

    /// The all-zero start state used at the beginning of every window.
    fn initial_carry(&self) -> Self::Carry;

    fn segment_forward(
        &self,
        carry: &Self::Carry,
        inputs: &[Vector<T>],
        targets: &[Vector<T>],
        loss_scale: T,
    ) -> Result<(T, Self::Trace, Self::Carry)>;

    /// Gradients of the segment loss with respect to every parameter tensor,
    /// in `tensor_names` order. The entry carry is treated as a constant.
    fn segment_backward(
        &self,
        trace: &Self::Trace,
        inputs: &[Vector<T>],
        loss_scale: T,
    ) -> Result<Vec<Matrix<T>>>;

    /// One-step-ahead prediction: steps through `inputs`, feeding back the
    /// prediction errors against `prior_targets` where the model uses them,
    /// and returns the output of the final step. `prior_targets` must hold
    /// exactly one fewer element than `inputs`.
    fn predict_next(&self, inputs: &[Vector<T>], prior_targets: &[Vector<T>]) -> Result<Vector<T>>;

    /// Mean per-step loss `(1/T) * sum 1/2 ||y - y_d||^2` over a whole
    /// sequence started from the zero state.
    fn sequence_loss(&self, inputs: &[Vector<T>], targets: &[Vector<T>]) -> Result<T> {
        let scale = full_sequence_scale::<T>(inputs.len())?;
        let (loss, _, _) = self.segment_forward(&self.initial_carry(), inputs, targets, scale)?;
        Ok(loss)
    }

    /// Exact BPTT gradients of `sequence_loss`, in `tensor_names` order.
    fn sequence_gradients(&self, inputs: &[Vector<T>], targets: &[Vector<T>]) -> Result<Vec<Matrix<T>>> {
        let scale = full_sequence_scale::<T>(inputs.len())?;
        let (_, trace, _) = self.segment_forward(&self.initial_carry(), inputs, targets, scale)?;
        self.segment_backward(&trace, inputs, scale)
    }
}

pub(crate) fn full_sequence_scale<T: Scalar>(len: usize) -> Result<T> {
    if len == 0 {
        return Err(Error::InvalidArgument("sequence must not be empty".into()));
    }
    Ok(T::one() / T::from(len).unwrap())
}
