//! Finite-difference verification of the hand-coded backward passes.
//!
//! The checker never touches a model's backward code on the numeric side:
//! it perturbs one parameter entry at a time and re-runs the forward loss,
//! so the two sides of the comparison are fully independent. Central
//! differences with h = 1e-6 give roughly 1e-10 absolute noise on these
//! problem sizes, comfortably under the default tolerance.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::linalg::Vector;
use crate::model::SequenceModel;
use crate::scalar::Scalar;

pub const DEFAULT_STEP: f64 = 1e-6;
pub const DEFAULT_TOLERANCE: f64 = 1e-5;

/// Denominator floor for [`relative_error`]. Together with the default
/// tolerance it yields an absolute acceptance floor of 1e-8 for entries
/// whose magnitude is below 1e-3.
const REL_ERROR_FLOOR: f64 = 1e-3;

/// `|a - b| / max(|a|, |b|, 1e-3)`. Pass/fail is `<= tol`, so a tolerance
/// of zero always fails against finite-difference noise.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(REL_ERROR_FLOOR)
}

/// Worst disagreement found in one parameter tensor.
#[derive(Clone, Debug)]
pub struct TensorCheck {
    pub name: &'static str,
    pub max_rel_error: f64,
    pub worst_entry: (usize, usize),
    pub analytic: f64,
    pub numeric: f64,
}

#[derive(Clone, Debug)]
pub struct CheckReport {
    pub tensors: Vec<TensorCheck>,
    pub tolerance: f64,
    pub passed: bool,
}

impl CheckReport {
    pub fn max_rel_error(&self) -> f64 {
        self.tensors
            .iter()
            .map(|t| t.max_rel_error)
            .fold(0.0, f64::max)
    }

    /// Names of tensors whose worst entry exceeds the tolerance.
    pub fn failing_tensors(&self) -> Vec<&'static str> {
        self.tensors
            .iter()
            .filter(|t| t.max_rel_error > self.tolerance)
            .map(|t| t.name)
            .collect()
    }
}

/// Central difference of a scalar function at `x`.
pub fn central_difference<T, F>(mut f: F, x: T, h: T) -> Result<T>
where
    T: Scalar,
    F: FnMut(T) -> Result<T>,
{
    let two = T::from(2.0).unwrap();
    let fp = f(x + h)?;
    let fm = f(x - h)?;
    Ok((fp - fm) / (two * h))
}

/// Compares a model's analytic sequence gradients against central finite
/// differences of its forward loss, entry by entry.
pub fn check_gradients<T, M>(
    model: &M,
    inputs: &[Vector<T>],
    targets: &[Vector<T>],
    step: f64,
    tolerance: f64,
) -> Result<CheckReport>
where
    T: Scalar,
    M: SequenceModel<T>,
{
    let analytic = model.sequence_gradients(inputs, targets)?;
    let names = model.tensor_names();
    let h = T::from(step).unwrap();

    let mut tensors = Vec::with_capacity(analytic.len());
    let mut scratch = model.clone();
    for (k, grad) in analytic.iter().enumerate() {
        let (rows, cols) = grad.shape();
        let mut worst = TensorCheck {
            name: names[k],
            max_rel_error: 0.0,
            worst_entry: (0, 0),
            analytic: 0.0,
            numeric: 0.0,
        };
        for i in 0..rows {
            for j in 0..cols {
                let base = scratch.params()[k][(i, j)];
                let numeric = central_difference(
                    |x| {
                        scratch.params_mut()[k][(i, j)] = x;
                        let loss = scratch.sequence_loss(inputs, targets);
                        scratch.params_mut()[k][(i, j)] = base;
                        loss
                    },
                    base,
                    h,
                )?;
                let numeric_f = numeric.to_f64().unwrap();
                let analytic_f = grad[(i, j)].to_f64().unwrap();
                let rel = relative_error(analytic_f, numeric_f);
                if rel >= worst.max_rel_error {
                    worst.max_rel_error = rel;
                    worst.worst_entry = (i, j);
                    worst.analytic = analytic_f;
                    worst.numeric = numeric_f;
                }
            }
        }
        tensors.push(worst);
    }

    let passed = tensors.iter().all(|t| t.max_rel_error <= tolerance);
    Ok(CheckReport { tensors, tolerance, passed })
}

/// Seeded random inputs/targets in `(-1, 1)`, the usual fuel for the
/// finite-difference suites.
pub fn random_sequence<T: Scalar>(
    m: usize,
    p: usize,
    steps: usize,
    seed: u64,
) -> (Vec<Vector<T>>, Vec<Vector<T>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |len: usize| -> Vector<T> {
        let data = (0..len)
            .map(|_| T::from(rng.gen_range(-1.0..1.0)).unwrap())
            .collect();
        Vector::new(data).expect("len >= 1")
    };
    let inputs = (0..steps).map(|_| draw(m)).collect();
    let targets = (0..steps).map(|_| draw(p)).collect();
    (inputs, targets)
}
