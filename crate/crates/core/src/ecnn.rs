//! The error-correction recurrent cell.
//!
//! Dynamics per step (inputs and errors enter from the previous step):
//!
//! ```text
//! s(t) = tanh(A s(t-1) + B x(t-1) + D tanh(z(t-1)))
//! y(t) = C s(t)
//! z(t) = y(t) - y_d(t)        (zero when no target is known)
//! ```
//!
//! with `s(0) = 0` and `z(0) = 0`. Feeding the previous prediction error
//! back through `D` lets the state compensate for drivers the inputs do not
//! observe. The per-sequence loss is `(1/T) * sum_t 1/2 ||y(t) - y_d(t)||^2`.
//!
//! The backward pass is reverse accumulation over the cached trace. For the
//! cost of one extra Hadamard product per step it handles both paths out of
//! `z(t)`: the loss term and the feedback into `s(t+1)`. Correctness is
//! defined by agreement with central finite differences of the forward loss;
//! the suites in `tests/` hold that line.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, Vector};
use crate::model::{full_sequence_scale, ModelKind, SequenceModel};
use crate::scalar::Scalar;

/// The four shared weight matrices. `A` is state-to-state (n x n), `B` maps
/// inputs into the state (n x m), `C` reads the output off the state
/// (p x n), and `D` feeds the squashed previous error back into the state
/// (n x p).
#[derive(Clone, Debug, PartialEq)]
pub struct EcnnParams<T> {
    pub a: Matrix<T>,
    pub b: Matrix<T>,
    pub c: Matrix<T>,
    pub d: Matrix<T>,
}

impl<T: Scalar> EcnnParams<T> {
    pub fn new(a: Matrix<T>, b: Matrix<T>, c: Matrix<T>, d: Matrix<T>) -> Result<Self> {
        let n = a.rows();
        if a.cols() != n {
            return Err(Error::DimensionMismatch(format!(
                "A must be square, got {}x{}",
                a.rows(),
                a.cols()
            )));
        }
        if b.rows() != n {
            return Err(Error::DimensionMismatch(format!(
                "B has {} rows, expected {}",
                b.rows(),
                n
            )));
        }
        if c.cols() != n {
            return Err(Error::DimensionMismatch(format!(
                "C has {} columns, expected {}",
                c.cols(),
                n
            )));
        }
        let p = c.rows();
        if d.rows() != n || d.cols() != p {
            return Err(Error::DimensionMismatch(format!(
                "D is {}x{}, expected {}x{}",
                d.rows(),
                d.cols(),
                n,
                p
            )));
        }
        Ok(Self { a, b, c, d })
    }

    pub fn zeros(n: usize, m: usize, p: usize) -> Result<Self> {
        check_dims(n, m, p)?;
        Ok(Self {
            a: Matrix::zeros(n, n),
            b: Matrix::zeros(n, m),
            c: Matrix::zeros(p, n),
            d: Matrix::zeros(n, p),
        })
    }

    pub fn state_dim(&self) -> usize {
        self.a.rows()
    }

    pub fn input_dim(&self) -> usize {
        self.b.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.c.rows()
    }
}

fn check_dims(n: usize, m: usize, p: usize) -> Result<()> {
    if n == 0 || m == 0 || p == 0 {
        return Err(Error::InvalidArgument(format!(
            "model dimensions must be positive, got n={n} m={m} p={p}"
        )));
    }
    Ok(())
}

/// Seeded uniform initialization on `[-1/sqrt(n), 1/sqrt(n)]`. Entries are
/// drawn in a fixed order (A, B, C, D, row-major), so the same seed always
/// yields bit-identical parameters. The bound keeps tanh pre-activations in
/// their responsive range at the start of training.
pub fn init_params<T: Scalar>(n: usize, m: usize, p: usize, seed: u64) -> Result<EcnnParams<T>> {
    check_dims(n, m, p)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bound = 1.0 / (n as f64).sqrt();
    let mut params = EcnnParams::zeros(n, m, p)?;
    for mat in [&mut params.a, &mut params.b, &mut params.c, &mut params.d] {
        fill_uniform(mat, &mut rng, bound);
    }
    Ok(params)
}

pub(crate) fn fill_uniform<T: Scalar>(mat: &mut Matrix<T>, rng: &mut ChaCha8Rng, bound: f64) {
    for v in mat.as_mut_slice() {
        *v = T::from(rng.gen_range(-bound..=bound)).unwrap();
    }
}

/// Per-timestep quantities recorded by the forward pass for BPTT.
///
/// For a segment of `L` steps: `states` and `errors` have `L + 1` entries
/// (index 0 is the entry carry), `outputs` and `preactivations` have `L`,
/// and `fed_errors[t] = tanh(errors[t])` for `t < L` (the squashed errors
/// actually fed into steps `1..=L`).
#[derive(Clone, Debug)]
pub struct ForwardTrace<T> {
    pub states: Vec<Vector<T>>,
    pub outputs: Vec<Vector<T>>,
    pub errors: Vec<Vector<T>>,
    pub preactivations: Vec<Vector<T>>,
    pub fed_errors: Vec<Vector<T>>,
}

/// State carried across segment boundaries: the hidden state and the last
/// prediction error.
#[derive(Clone, Debug)]
pub struct EcnnCarry<T> {
    pub state: Vector<T>,
    pub error: Vector<T>,
}

/// Gradients of the sequence loss with respect to each weight matrix.
#[derive(Clone, Debug)]
pub struct EcnnGradients<T> {
    pub da: Matrix<T>,
    pub db: Matrix<T>,
    pub dc: Matrix<T>,
    pub dd: Matrix<T>,
}

/// The shared pre-activation computation. Forward passes and the trace
/// consistency check both go through here so a recomputation is bit-identical.
fn step_preactivation<T: Scalar>(
    params: &EcnnParams<T>,
    s_prev: &Vector<T>,
    x_prev: &Vector<T>,
    fed_error: &Vector<T>,
) -> Result<Vector<T>> {
    let mut pre = linalg::matvec(&params.a, s_prev)?;
    pre = linalg::add(&pre, &linalg::matvec(&params.b, x_prev)?)?;
    pre = linalg::add(&pre, &linalg::matvec(&params.d, fed_error)?)?;
    Ok(pre)
}

/// One step of the dynamics. Returns `(s, y, z)`; when `y_target` is absent
/// the caller is forecasting and `z` comes back as the zero vector.
pub fn forward_step<T: Scalar>(
    params: &EcnnParams<T>,
    s_prev: &Vector<T>,
    x_prev: &Vector<T>,
    z_prev: &Vector<T>,
    y_target: Option<&Vector<T>>,
) -> Result<(Vector<T>, Vector<T>, Vector<T>)> {
    let (n, m, p) = (params.state_dim(), params.input_dim(), params.output_dim());
    if s_prev.len() != n || x_prev.len() != m || z_prev.len() != p {
        return Err(Error::DimensionMismatch(format!(
            "forward_step: got state {}, input {}, error {}, expected {n}, {m}, {p}",
            s_prev.len(),
            x_prev.len(),
            z_prev.len()
        )));
    }
    if !(s_prev.is_finite() && x_prev.is_finite() && z_prev.is_finite()) {
        return Err(Error::Numerical("non-finite input to forward_step".into()));
    }
    if let Some(t) = y_target {
        if t.len() != p {
            return Err(Error::DimensionMismatch(format!(
                "forward_step: target has length {}, expected {p}",
                t.len()
            )));
        }
        if !t.is_finite() {
            return Err(Error::Numerical("non-finite target in forward_step".into()));
        }
    }
    let fed = linalg::tanh_map(z_prev);
    let pre = step_preactivation(params, s_prev, x_prev, &fed)?;
    let s = linalg::tanh_map(&pre);
    let y = linalg::matvec(&params.c, &s)?;
    let z = match y_target {
        Some(t) => linalg::sub(&y, t)?,
        None => Vector::zeros(p),
    };
    Ok((s, y, z))
}

fn validate_sequence<T: Scalar>(
    m: usize,
    p: usize,
    inputs: &[Vector<T>],
    targets: &[Vector<T>],
) -> Result<()> {
    if inputs.is_empty() {
        return Err(Error::InvalidArgument("sequence must not be empty".into()));
    }
    if targets.len() != inputs.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} inputs but {} targets",
            inputs.len(),
            targets.len()
        )));
    }
    for (t, x) in inputs.iter().enumerate() {
        if x.len() != m {
            return Err(Error::DimensionMismatch(format!(
                "input {t} has length {}, expected {m}",
                x.len()
            )));
        }
    }
    for (t, y) in targets.iter().enumerate() {
        if y.len() != p {
            return Err(Error::DimensionMismatch(format!(
                "target {t} has length {}, expected {p}",
                y.len()
            )));
        }
    }
    Ok(())
}

fn segment_forward_impl<T: Scalar>(
    params: &EcnnParams<T>,
    carry: &EcnnCarry<T>,
    inputs: &[Vector<T>],
    targets: &[Vector<T>],
    loss_scale: T,
) -> Result<(T, ForwardTrace<T>, EcnnCarry<T>)> {
    validate_sequence(params.input_dim(), params.output_dim(), inputs, targets)?;
    let steps = inputs.len();
    let half = T::from(0.5).unwrap();

    let mut states = Vec::with_capacity(steps + 1);
    let mut errors = Vec::with_capacity(steps + 1);
    let mut outputs = Vec::with_capacity(steps);
    let mut preactivations = Vec::with_capacity(steps);
    let mut fed_errors = Vec::with_capacity(steps);
    states.push(carry.state.clone());
    errors.push(carry.error.clone());

    let mut loss = T::zero();
    for t in 0..steps {
        let fed = linalg::tanh_map(&errors[t]);
        let pre = step_preactivation(params, &states[t], &inputs[t], &fed)?;
        let s = linalg::tanh_map(&pre);
        let y = linalg::matvec(&params.c, &s)?;
        let z = linalg::sub(&y, &targets[t])?;
        loss += loss_scale * half * z.squared_norm();
        fed_errors.push(fed);
        preactivations.push(pre);
        states.push(s);
        outputs.push(y);
        errors.push(z);
    }

    let end = EcnnCarry {
        state: states[steps].clone(),
        error: errors[steps].clone(),
    };
    let trace = ForwardTrace { states, outputs, errors, preactivations, fed_errors };
    Ok((loss, trace, end))
}

/// Reverse accumulation over one segment. `gy` collects everything flowing
/// into `y(t)`: the loss term `loss_scale * z(t)` plus, for non-final steps,
/// the feedback path `(1 - tanh(z(t))^2) . (D^T gpre(t+1))` (the error is
/// consumed by the next step through tanh and D). The `C` gradient picks up
/// its error-feedback contribution automatically because it is an outer
/// product with this combined `gy`.
fn segment_backward_impl<T: Scalar>(
    params: &EcnnParams<T>,
    trace: &ForwardTrace<T>,
    inputs: &[Vector<T>],
    loss_scale: T,
) -> Result<[Matrix<T>; 4]> {
    let steps = inputs.len();
    if trace.outputs.len() != steps
        || trace.states.len() != steps + 1
        || trace.errors.len() != steps + 1
        || trace.fed_errors.len() != steps
    {
        return Err(Error::InvalidArgument(
            "trace does not match the given inputs".into(),
        ));
    }
    let one = T::one();
    let mut da = Matrix::zeros_like(&params.a);
    let mut db = Matrix::zeros_like(&params.b);
    let mut dc = Matrix::zeros_like(&params.c);
    let mut dd = Matrix::zeros_like(&params.d);

    let mut gpre_next: Option<Vector<T>> = None;
    for t in (1..=steps).rev() {
        let mut gy = linalg::scale(loss_scale, &trace.errors[t]);
        if let Some(gp) = &gpre_next {
            // z(t) also feeds step t+1 through D tanh(.)
            let through_d = linalg::transpose_matvec(&params.d, gp)?;
            let fz = &trace.fed_errors[t];
            let deriv = fz.map(|v| one - v * v);
            gy = linalg::add(&gy, &linalg::diag_apply(&deriv, &through_d)?)?;
        }
        let mut gs = linalg::transpose_matvec(&params.c, &gy)?;
        if let Some(gp) = &gpre_next {
            gs = linalg::add(&gs, &linalg::transpose_matvec(&params.a, gp)?)?;
        }
        let s_t = &trace.states[t];
        let sderiv = s_t.map(|v| one - v * v);
        let gpre = linalg::diag_apply(&sderiv, &gs)?;

        da.add_outer(one, &gpre, &trace.states[t - 1])?;
        db.add_outer(one, &gpre, &inputs[t - 1])?;
        dd.add_outer(one, &gpre, &trace.fed_errors[t - 1])?;
        dc.add_outer(one, &gy, s_t)?;
        gpre_next = Some(gpre);
    }
    Ok([da, db, dc, dd])
}

/// Runs the cell over a full sequence from the zero state. Returns the trace
/// and the loss `(1/T) * sum_t 1/2 ||y(t) - y_d(t)||^2`.
pub fn forward_sequence<T: Scalar>(
    params: &EcnnParams<T>,
    inputs: &[Vector<T>],
    targets: &[Vector<T>],
) -> Result<(ForwardTrace<T>, T)> {
    let scale = full_sequence_scale::<T>(inputs.len())?;
    let carry = zero_carry(params);
    let (loss, trace, _) = segment_forward_impl(params, &carry, inputs, targets, scale)?;
    Ok((trace, loss))
}

fn zero_carry<T: Scalar>(params: &EcnnParams<T>) -> EcnnCarry<T> {
    EcnnCarry {
        state: Vector::zeros(params.state_dim()),
        error: Vector::zeros(params.output_dim()),
    }
}

/// Gradients of the `forward_sequence` loss. The trace must have been
/// produced by `forward_sequence` with these parameters, inputs, and
/// targets; a spot recomputation (first state, final output and error)
/// rejects stale traces.
pub fn bptt_gradients<T: Scalar>(
    params: &EcnnParams<T>,
    trace: &ForwardTrace<T>,
    inputs: &[Vector<T>],
    targets: &[Vector<T>],
) -> Result<EcnnGradients<T>> {
    validate_sequence(params.input_dim(), params.output_dim(), inputs, targets)?;
    let steps = inputs.len();
    if trace.states.len() != steps + 1
        || trace.outputs.len() != steps
        || trace.errors.len() != steps + 1
        || trace.preactivations.len() != steps
        || trace.fed_errors.len() != steps
    {
        return Err(Error::InvalidArgument(format!(
            "stale trace: recorded {} steps, sequence has {steps}",
            trace.outputs.len()
        )));
    }
    // Spot checks: recompute the first and last states and the final
    // output/error with the exact forward code path; any parameter or data
    // drift shows up as a bitwise difference. The first step from a zero
    // carry only exercises B, so the last step matters for A and D.
    for t in [1, steps] {
        let fed = linalg::tanh_map(&trace.errors[t - 1]);
        let pre = step_preactivation(params, &trace.states[t - 1], &inputs[t - 1], &fed)?;
        if linalg::tanh_map(&pre) != trace.states[t] {
            return Err(Error::InvalidArgument(format!(
                "stale trace: recorded state {t} does not match these parameters and inputs"
            )));
        }
    }
    let y_last = linalg::matvec(&params.c, &trace.states[steps])?;
    if y_last != trace.outputs[steps - 1] {
        return Err(Error::InvalidArgument(
            "stale trace: final recorded output does not match these parameters".into(),
        ));
    }
    if linalg::sub(&y_last, &targets[steps - 1])? != trace.errors[steps] {
        return Err(Error::InvalidArgument(
            "stale trace: final recorded error does not match these targets".into(),
        ));
    }

    let scale = full_sequence_scale::<T>(steps)?;
    let [da, db, dc, dd] = segment_backward_impl(params, trace, inputs, scale)?;
    Ok(EcnnGradients { da, db, dc, dd })
}

impl<T: Scalar> EcnnGradients<T> {
    pub fn into_flat(self) -> Vec<Matrix<T>> {
        vec![self.da, self.db, self.dc, self.dd]
    }
}

/// Warm-up over known targets, then free-running prediction. During the
/// future steps no targets exist, so the error input is held at zero (its
/// expectation absent evidence) except for the very first future step, which
/// still consumes the last warm-up error. Returns one output per future
/// input.
pub fn forecast<T: Scalar>(
    params: &EcnnParams<T>,
    warmup_inputs: &[Vector<T>],
    warmup_targets: &[Vector<T>],
    future_inputs: &[Vector<T>],
) -> Result<Vec<Vector<T>>> {
    if warmup_inputs.is_empty() {
        return Err(Error::InvalidArgument("forecast warmup must not be empty".into()));
    }
    let (trace, _) = forward_sequence(params, warmup_inputs, warmup_targets)?;
    let mut s = trace.states.last().expect("non-empty trace").clone();
    let mut z = trace.errors.last().expect("non-empty trace").clone();
    let mut predictions = Vec::with_capacity(future_inputs.len());
    for x in future_inputs {
        let (s_next, y, z_next) = forward_step(params, &s, x, &z, None)?;
        s = s_next;
        z = z_next;
        predictions.push(y);
    }
    Ok(predictions)
}

impl<T: Scalar> SequenceModel<T> for EcnnParams<T> {
    type Carry = EcnnCarry<T>;
    type Trace = ForwardTrace<T>;

    fn kind(&self) -> ModelKind {
        ModelKind::Ecnn
    }

    fn state_dim(&self) -> usize {
        EcnnParams::state_dim(self)
    }

    fn input_dim(&self) -> usize {
        EcnnParams::input_dim(self)
    }

    fn output_dim(&self) -> usize {
        EcnnParams::output_dim(self)
    }

    fn tensor_names(&self) -> &'static [&'static str] {
        &["A", "B", "C", "D"]
    }

    fn params(&self) -> Vec<&Matrix<T>> {
        vec![&self.a, &self.b, &self.c, &self.d]
    }

    fn params_mut(&mut self) -> Vec<&mut Matrix<T>> {
        vec![&mut self.a, &mut self.b, &mut self.c, &mut self.d]
    }

    fn initial_carry(&self) -> EcnnCarry<T> {
        zero_carry(self)
    }

    fn segment_forward(
        &self,
        carry: &EcnnCarry<T>,
        inputs: &[Vector<T>],
        targets: &[Vector<T>],
        loss_scale: T,
    ) -> Result<(T, ForwardTrace<T>, EcnnCarry<T>)> {
        segment_forward_impl(self, carry, inputs, targets, loss_scale)
    }

    fn segment_backward(
        &self,
        trace: &ForwardTrace<T>,
        inputs: &[Vector<T>],
        loss_scale: T,
    ) -> Result<Vec<Matrix<T>>> {
        let [da, db, dc, dd] = segment_backward_impl(self, trace, inputs, loss_scale)?;
        Ok(vec![da, db, dc, dd])
    }

    fn predict_next(&self, inputs: &[Vector<T>], prior_targets: &[Vector<T>]) -> Result<Vector<T>> {
        if inputs.is_empty() {
            return Err(Error::InvalidArgument("predict_next needs at least one input".into()));
        }
        if prior_targets.len() + 1 != inputs.len() {
            return Err(Error::DimensionMismatch(format!(
                "predict_next: {} inputs need {} prior targets, got {}",
                inputs.len(),
                inputs.len() - 1,
                prior_targets.len()
            )));
        }
        let mut s = Vector::zeros(self.state_dim());
        let mut z = Vector::zeros(self.output_dim());
        for (x, target) in inputs.iter().zip(prior_targets) {
            let (s_next, _, z_next) = forward_step(self, &s, x, &z, Some(target))?;
            s = s_next;
            z = z_next;
        }
        let (_, y, _) = forward_step(self, &s, inputs.last().expect("non-empty"), &z, None)?;
        Ok(y)
    }
}
