//! Plain recurrent network: `s(t) = tanh(A s(t-1) + B x(t-1))`,
//! `y(t) = C s(t)`. This is exactly the error-correction cell with the
//! feedback matrix removed, which the cross-model equivalence tests exploit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::ecnn::fill_uniform;
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, Vector};
use crate::model::{full_sequence_scale, ModelKind, SequenceModel};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct RnnParams<T> {
    pub a: Matrix<T>,
    pub b: Matrix<T>,
    pub c: Matrix<T>,
}

impl<T: Scalar> RnnParams<T> {
    pub fn new(a: Matrix<T>, b: Matrix<T>, c: Matrix<T>) -> Result<Self> {
        let n = a.rows();
        if a.cols() != n {
            return Err(Error::DimensionMismatch(format!(
                "A must be square, got {}x{}",
                a.rows(),
                a.cols()
            )));
        }
        if b.rows() != n || c.cols() != n {
            return Err(Error::DimensionMismatch(format!(
                "B has {} rows and C has {} columns, expected {}",
                b.rows(),
                c.cols(),
                n
            )));
        }
        Ok(Self { a, b, c })
    }

    pub fn zeros(n: usize, m: usize, p: usize) -> Result<Self> {
        if n == 0 || m == 0 || p == 0 {
            return Err(Error::InvalidArgument(format!(
                "model dimensions must be positive, got n={n} m={m} p={p}"
            )));
        }
        Ok(Self {
            a: Matrix::zeros(n, n),
            b: Matrix::zeros(n, m),
            c: Matrix::zeros(p, n),
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

/// Same scheme and draw order as the error-correction init (A, B, C,
/// row-major, uniform on `[-1/sqrt(n), 1/sqrt(n)]`), so a given seed yields
/// the same A, B, C in both models.
pub fn init_rnn_params<T: Scalar>(n: usize, m: usize, p: usize, seed: u64) -> Result<RnnParams<T>> {
    let mut params = RnnParams::zeros(n, m, p)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bound = 1.0 / (n as f64).sqrt();
    for mat in [&mut params.a, &mut params.b, &mut params.c] {
        fill_uniform(mat, &mut rng, bound);
    }
    Ok(params)
}

/// Forward quantities cached for the backward pass. `states` has one more
/// entry than the segment length (index 0 is the entry state); `errors[t]`
/// is `y(t+1) - y_d(t+1)`.
#[derive(Clone, Debug)]
pub struct RnnTrace<T> {
    pub states: Vec<Vector<T>>,
    pub outputs: Vec<Vector<T>>,
    pub errors: Vec<Vector<T>>,
    pub preactivations: Vec<Vector<T>>,
}

#[derive(Clone, Debug)]
pub struct RnnGradients<T> {
    pub da: Matrix<T>,
    pub db: Matrix<T>,
    pub dc: Matrix<T>,
}

impl<T: Scalar> RnnGradients<T> {
    pub fn into_flat(self) -> Vec<Matrix<T>> {
        vec![self.da, self.db, self.dc]
    }
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

fn step_state<T: Scalar>(
    params: &RnnParams<T>,
    s_prev: &Vector<T>,
    x_prev: &Vector<T>,
) -> Result<Vector<T>> {
    let pre = linalg::add(
        &linalg::matvec(&params.a, s_prev)?,
        &linalg::matvec(&params.b, x_prev)?,
    )?;
    Ok(pre)
}

fn segment_forward_impl<T: Scalar>(
    params: &RnnParams<T>,
    carry: &Vector<T>,
    inputs: &[Vector<T>],
    targets: &[Vector<T>],
    loss_scale: T,
) -> Result<(T, RnnTrace<T>, Vector<T>)> {
    validate_sequence(params.input_dim(), params.output_dim(), inputs, targets)?;
    let steps = inputs.len();
    let half = T::from(0.5).unwrap();

    let mut states = Vec::with_capacity(steps + 1);
    states.push(carry.clone());
    let mut outputs = Vec::with_capacity(steps);
    let mut errors = Vec::with_capacity(steps);
    let mut preactivations = Vec::with_capacity(steps);

    let mut loss = T::zero();
    for t in 0..steps {
        let pre = step_state(params, &states[t], &inputs[t])?;
        let s = linalg::tanh_map(&pre);
        let y = linalg::matvec(&params.c, &s)?;
        let z = linalg::sub(&y, &targets[t])?;
        loss += loss_scale * half * z.squared_norm();
        preactivations.push(pre);
        states.push(s);
        outputs.push(y);
        errors.push(z);
    }
    let end = states[steps].clone();
    Ok((loss, RnnTrace { states, outputs, errors, preactivations }, end))
}

fn segment_backward_impl<T: Scalar>(
    params: &RnnParams<T>,
    trace: &RnnTrace<T>,
    inputs: &[Vector<T>],
    loss_scale: T,
) -> Result<[Matrix<T>; 3]> {
    let steps = inputs.len();
    if trace.outputs.len() != steps || trace.states.len() != steps + 1 {
        return Err(Error::InvalidArgument(
            "trace does not match the given inputs".into(),
        ));
    }
    let one = T::one();
    let mut da = Matrix::zeros_like(&params.a);
    let mut db = Matrix::zeros_like(&params.b);
    let mut dc = Matrix::zeros_like(&params.c);

    let mut gpre_next: Option<Vector<T>> = None;
    for t in (1..=steps).rev() {
        let gy = linalg::scale(loss_scale, &trace.errors[t - 1]);
        let mut gs = linalg::transpose_matvec(&params.c, &gy)?;
        if let Some(gp) = &gpre_next {
            gs = linalg::add(&gs, &linalg::transpose_matvec(&params.a, gp)?)?;
        }
        let s_t = &trace.states[t];
        let sderiv = s_t.map(|v| one - v * v);
        let gpre = linalg::diag_apply(&sderiv, &gs)?;

        da.add_outer(one, &gpre, &trace.states[t - 1])?;
        db.add_outer(one, &gpre, &inputs[t - 1])?;
        dc.add_outer(one, &gy, s_t)?;
        gpre_next = Some(gpre);
    }
    Ok([da, db, dc])
}

/// Full-sequence forward from the zero state; loss is
/// `(1/T) * sum 1/2 ||y - y_d||^2`.
pub fn rnn_forward<T: Scalar>(
    params: &RnnParams<T>,
    inputs: &[Vector<T>],
    targets: &[Vector<T>],
) -> Result<(RnnTrace<T>, T)> {
    let scale = full_sequence_scale::<T>(inputs.len())?;
    let carry = Vector::zeros(params.state_dim());
    let (loss, trace, _) = segment_forward_impl(params, &carry, inputs, targets, scale)?;
    Ok((trace, loss))
}

/// BPTT gradients of the `rnn_forward` loss, with the same stale-trace spot
/// checks as the error-correction cell.
pub fn rnn_bptt<T: Scalar>(
    params: &RnnParams<T>,
    trace: &RnnTrace<T>,
    inputs: &[Vector<T>],
    targets: &[Vector<T>],
) -> Result<RnnGradients<T>> {
    validate_sequence(params.input_dim(), params.output_dim(), inputs, targets)?;
    let steps = inputs.len();
    if trace.states.len() != steps + 1
        || trace.outputs.len() != steps
        || trace.errors.len() != steps
        || trace.preactivations.len() != steps
    {
        return Err(Error::InvalidArgument(format!(
            "stale trace: recorded {} steps, sequence has {steps}",
            trace.outputs.len()
        )));
    }
    // First step from the zero state only exercises B; the last step also
    // exercises A.
    for t in [1, steps] {
        let pre = step_state(params, &trace.states[t - 1], &inputs[t - 1])?;
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
    if linalg::sub(&y_last, &targets[steps - 1])? != trace.errors[steps - 1] {
        return Err(Error::InvalidArgument(
            "stale trace: final recorded error does not match these targets".into(),
        ));
    }
    let scale = full_sequence_scale::<T>(steps)?;
    let [da, db, dc] = segment_backward_impl(params, trace, inputs, scale)?;
    Ok(RnnGradients { da, db, dc })
}

impl<T: Scalar> SequenceModel<T> for RnnParams<T> {
    type Carry = Vector<T>;
    type Trace = RnnTrace<T>;

    fn kind(&self) -> ModelKind {
        ModelKind::Rnn
    }

    fn state_dim(&self) -> usize {
        RnnParams::state_dim(self)
    }

    fn input_dim(&self) -> usize {
        RnnParams::input_dim(self)
    }

    fn output_dim(&self) -> usize {
        RnnParams::output_dim(self)
    }

    fn tensor_names(&self) -> &'static [&'static str] {
        &["A", "B", "C"]
    }

    fn params(&self) -> Vec<&Matrix<T>> {
        vec![&self.a, &self.b, &self.c]
    }

    fn params_mut(&mut self) -> Vec<&mut Matrix<T>> {
        vec![&mut self.a, &mut self.b, &mut self.c]
    }

    fn initial_carry(&self) -> Vector<T> {
        Vector::zeros(self.state_dim())
    }

    fn segment_forward(
        &self,
        carry: &Vector<T>,
        inputs: &[Vector<T>],
        targets: &[Vector<T>],
        loss_scale: T,
    ) -> Result<(T, RnnTrace<T>, Vector<T>)> {
        segment_forward_impl(self, carry, inputs, targets, loss_scale)
    }

    fn segment_backward(
        &self,
        trace: &RnnTrace<T>,
        inputs: &[Vector<T>],
        loss_scale: T,
    ) -> Result<Vec<Matrix<T>>> {
        let [da, db, dc] = segment_backward_impl(self, trace, inputs, loss_scale)?;
        Ok(vec![da, db, dc])
    }

    /// Targets play no role in the plain RNN's dynamics; they are accepted
    /// (and length-checked) only to keep the call shape uniform.
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
        for x in inputs {
            let pre = step_state(self, &s, x)?;
            s = linalg::tanh_map(&pre);
        }
        linalg::matvec(&self.c, &s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v1(x: f64) -> Vector<f64> {
        Vector::new(vec![x]).unwrap()
    }

    #[test]
    fn zero_weights_loss_is_target_energy() {
        let params = RnnParams::<f64>::zeros(3, 2, 1).unwrap();
        let inputs: Vec<_> = (0..4)
            .map(|i| Vector::new(vec![i as f64, 1.0]).unwrap())
            .collect();
        let targets: Vec<_> = [0.5, -1.0, 2.0, 0.0].iter().map(|&y| v1(y)).collect();
        let (trace, loss) = rnn_forward(&params, &inputs, &targets).unwrap();
        for y in &trace.outputs {
            assert_eq!(y[0], 0.0);
        }
        let expected: f64 = targets.iter().map(|t| 0.5 * t[0] * t[0]).sum::<f64>() / 4.0;
        assert!((loss - expected).abs() < 1e-15);
    }

    #[test]
    fn scalar_two_step_hand_recursion() {
        let params = RnnParams::new(
            Matrix::new(1, 1, vec![0.5]).unwrap(),
            Matrix::new(1, 1, vec![-0.8]).unwrap(),
            Matrix::new(1, 1, vec![1.5]).unwrap(),
        )
        .unwrap();
        let inputs = vec![v1(0.2), v1(-0.4)];
        let targets = vec![v1(0.1), v1(0.3)];
        let (trace, loss) = rnn_forward(&params, &inputs, &targets).unwrap();

        let s1 = (-0.8f64 * 0.2).tanh();
        let s2 = (0.5 * s1 - 0.8 * (-0.4)).tanh();
        let (y1, y2) = (1.5 * s1, 1.5 * s2);
        assert!((trace.outputs[0][0] - y1).abs() < 1e-15);
        assert!((trace.outputs[1][0] - y2).abs() < 1e-15);
        let expected = 0.5 * ((y1 - 0.1).powi(2) + (y2 - 0.3).powi(2)) / 2.0;
        assert!((loss - expected).abs() < 1e-15);
    }

    #[test]
    fn zero_residual_gradients_vanish() {
        let params = init_rnn_params::<f64>(2, 1, 1, 4).unwrap();
        let inputs = vec![v1(0.3), v1(-0.2), v1(0.5)];
        // Targets read off the model's own outputs.
        let mut s = Vector::zeros(2);
        let mut targets = Vec::new();
        for x in &inputs {
            let pre = step_state(&params, &s, x).unwrap();
            s = linalg::tanh_map(&pre);
            targets.push(linalg::matvec(&params.c, &s).unwrap());
        }
        let (trace, loss) = rnn_forward(&params, &inputs, &targets).unwrap();
        assert_eq!(loss, 0.0);
        let grads = rnn_bptt(&params, &trace, &inputs, &targets).unwrap();
        assert_eq!(grads.da.max_abs(), 0.0);
        assert_eq!(grads.db.max_abs(), 0.0);
        assert_eq!(grads.dc.max_abs(), 0.0);
    }

    #[test]
    fn stale_trace_is_rejected() {
        let params = init_rnn_params::<f64>(2, 1, 1, 4).unwrap();
        let inputs = vec![v1(0.3), v1(-0.2)];
        let targets = vec![v1(0.0), v1(0.1)];
        let (trace, _) = rnn_forward(&params, &inputs, &targets).unwrap();
        let mut other = params.clone();
        other.b[(0, 0)] -= 0.25;
        assert!(rnn_bptt(&other, &trace, &inputs, &targets).is_err());
        assert!(rnn_bptt(&params, &trace, &inputs, &targets).is_ok());
    }
}
