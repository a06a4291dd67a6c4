//! Single-layer LSTM with a linear readout.
//!
//! Gate order everywhere (parameter lists, checkpoints, gradients) is
//! input, forget, output, candidate. Each gate weight is `n x (n+m)` and
//! acts on the stacked `[h(t-1); x(t-1)]`; biases are stored as `n x 1`
//! matrices so every parameter tensor flows through the same optimizer and
//! checker plumbing.
//!
//! ```text
//! i = sig(W_i u + b_i)   f = sig(W_f u + b_f)
//! o = sig(W_o u + b_o)   g = tanh(W_g u + b_g)
//! c(t) = f . c(t-1) + i . g        h(t) = o . tanh(c(t))
//! y(t) = C h(t)
//! ```

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::ecnn::fill_uniform;
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, Vector};
use crate::model::{full_sequence_scale, ModelKind, SequenceModel};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct LstmParams<T> {
    pub w_i: Matrix<T>,
    pub w_f: Matrix<T>,
    pub w_o: Matrix<T>,
    pub w_g: Matrix<T>,
    pub b_i: Matrix<T>,
    pub b_f: Matrix<T>,
    pub b_o: Matrix<T>,
    pub b_g: Matrix<T>,
    pub c_out: Matrix<T>,
}

impl<T: Scalar> LstmParams<T> {
    pub fn zeros(n: usize, m: usize, p: usize) -> Result<Self> {
        if n == 0 || m == 0 || p == 0 {
            return Err(Error::InvalidArgument(format!(
                "model dimensions must be positive, got n={n} m={m} p={p}"
            )));
        }
        Ok(Self {
            w_i: Matrix::zeros(n, n + m),
            w_f: Matrix::zeros(n, n + m),
            w_o: Matrix::zeros(n, n + m),
            w_g: Matrix::zeros(n, n + m),
            b_i: Matrix::zeros(n, 1),
            b_f: Matrix::zeros(n, 1),
            b_o: Matrix::zeros(n, 1),
            b_g: Matrix::zeros(n, 1),
            c_out: Matrix::zeros(p, n),
        })
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.state_dim();
        let cols = self.w_i.cols();
        if cols <= n {
            return Err(Error::DimensionMismatch(format!(
                "gate weights have {cols} columns, need more than state size {n}"
            )));
        }
        for (name, w) in [("W_f", &self.w_f), ("W_o", &self.w_o), ("W_g", &self.w_g)] {
            if w.shape() != (n, cols) {
                return Err(Error::DimensionMismatch(format!(
                    "{name} is {}x{}, expected {n}x{cols}",
                    w.rows(),
                    w.cols()
                )));
            }
        }
        for (name, b) in [
            ("b_i", &self.b_i),
            ("b_f", &self.b_f),
            ("b_o", &self.b_o),
            ("b_g", &self.b_g),
        ] {
            if b.shape() != (n, 1) {
                return Err(Error::DimensionMismatch(format!(
                    "{name} is {}x{}, expected {n}x1",
                    b.rows(),
                    b.cols()
                )));
            }
        }
        if self.c_out.cols() != n {
            return Err(Error::DimensionMismatch(format!(
                "readout has {} columns, expected {n}",
                self.c_out.cols()
            )));
        }
        Ok(())
    }

    pub fn state_dim(&self) -> usize {
        self.w_i.rows()
    }

    pub fn input_dim(&self) -> usize {
        self.w_i.cols() - self.w_i.rows()
    }

    pub fn output_dim(&self) -> usize {
        self.c_out.rows()
    }
}

/// Gate weights and the readout are drawn uniformly from
/// `[-1/sqrt(n), 1/sqrt(n)]` in a fixed order (W_i, W_f, W_o, W_g, C);
/// biases start at constants, with the forget bias at one so early training
/// retains cell state.
pub fn init_lstm_params<T: Scalar>(
    n: usize,
    m: usize,
    p: usize,
    seed: u64,
) -> Result<LstmParams<T>> {
    let mut params = LstmParams::zeros(n, m, p)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bound = 1.0 / (n as f64).sqrt();
    for mat in [
        &mut params.w_i,
        &mut params.w_f,
        &mut params.w_o,
        &mut params.w_g,
    ] {
        fill_uniform(mat, &mut rng, bound);
    }
    fill_uniform(&mut params.c_out, &mut rng, bound);
    for v in params.b_f.as_mut_slice() {
        *v = T::one();
    }
    Ok(params)
}

#[derive(Clone, Debug)]
pub struct LstmCarry<T> {
    pub hidden: Vector<T>,
    pub cell: Vector<T>,
}

/// Cached activations for one segment. `hidden` and `cell` have one more
/// entry than the segment length (index 0 is the entry carry); the gate
/// vectors, `cell_tanh`, `outputs`, and `errors` have one entry per step.
#[derive(Clone, Debug)]
pub struct LstmTrace<T> {
    pub hidden: Vec<Vector<T>>,
    pub cell: Vec<Vector<T>>,
    pub outputs: Vec<Vector<T>>,
    pub errors: Vec<Vector<T>>,
    pub gate_i: Vec<Vector<T>>,
    pub gate_f: Vec<Vector<T>>,
    pub gate_o: Vec<Vector<T>>,
    pub gate_g: Vec<Vector<T>>,
    pub cell_tanh: Vec<Vector<T>>,
}

#[derive(Clone, Debug)]
pub struct LstmGradients<T> {
    pub dw_i: Matrix<T>,
    pub dw_f: Matrix<T>,
    pub dw_o: Matrix<T>,
    pub dw_g: Matrix<T>,
    pub db_i: Matrix<T>,
    pub db_f: Matrix<T>,
    pub db_o: Matrix<T>,
    pub db_g: Matrix<T>,
    pub dc_out: Matrix<T>,
}

impl<T: Scalar> LstmGradients<T> {
    pub fn into_flat(self) -> Vec<Matrix<T>> {
        vec![
            self.dw_i, self.dw_f, self.dw_o, self.dw_g, self.db_i, self.db_f, self.db_o,
            self.db_g, self.dc_out,
        ]
    }
}

fn sigmoid<T: Scalar>(x: T) -> T {
    let one = T::one();
    if x >= T::zero() {
        one / (one + (-x).exp())
    } else {
        let e = x.exp();
        e / (one + e)
    }
}

fn bias_column<T: Scalar>(b: &Matrix<T>) -> Vector<T> {
    Vector::new(b.as_slice().to_vec()).expect("bias is at least 1x1")
}

struct StepActivations<T> {
    gate_i: Vector<T>,
    gate_f: Vector<T>,
    gate_o: Vector<T>,
    gate_g: Vector<T>,
    cell: Vector<T>,
    cell_tanh: Vector<T>,
    hidden: Vector<T>,
}

fn lstm_step<T: Scalar>(
    params: &LstmParams<T>,
    h_prev: &Vector<T>,
    c_prev: &Vector<T>,
    x_prev: &Vector<T>,
) -> Result<StepActivations<T>> {
    let u = linalg::concat(h_prev, x_prev);
    let gate = |w: &Matrix<T>, b: &Matrix<T>, squash: fn(T) -> T| -> Result<Vector<T>> {
        let pre = linalg::add(&linalg::matvec(w, &u)?, &bias_column(b))?;
        Ok(pre.map(squash))
    };
    let gate_i = gate(&params.w_i, &params.b_i, sigmoid)?;
    let gate_f = gate(&params.w_f, &params.b_f, sigmoid)?;
    let gate_o = gate(&params.w_o, &params.b_o, sigmoid)?;
    let gate_g = gate(&params.w_g, &params.b_g, |x| x.tanh())?;
    let cell = linalg::add(
        &linalg::diag_apply(&gate_f, c_prev)?,
        &linalg::diag_apply(&gate_i, &gate_g)?,
    )?;
    let cell_tanh = linalg::tanh_map(&cell);
    let hidden = linalg::diag_apply(&gate_o, &cell_tanh)?;
    Ok(StepActivations { gate_i, gate_f, gate_o, gate_g, cell, cell_tanh, hidden })
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
    params: &LstmParams<T>,
    carry: &LstmCarry<T>,
    inputs: &[Vector<T>],
    targets: &[Vector<T>],
    loss_scale: T,
) -> Result<(T, LstmTrace<T>, LstmCarry<T>)> {
    validate_sequence(params.input_dim(), params.output_dim(), inputs, targets)?;
    let steps = inputs.len();
    let half = T::from(0.5).unwrap();

    let mut trace = LstmTrace {
        hidden: Vec::with_capacity(steps + 1),
        cell: Vec::with_capacity(steps + 1),
        outputs: Vec::with_capacity(steps),
        errors: Vec::with_capacity(steps),
        gate_i: Vec::with_capacity(steps),
        gate_f: Vec::with_capacity(steps),
        gate_o: Vec::with_capacity(steps),
        gate_g: Vec::with_capacity(steps),
        cell_tanh: Vec::with_capacity(steps),
    };
    trace.hidden.push(carry.hidden.clone());
    trace.cell.push(carry.cell.clone());

    let mut loss = T::zero();
    for t in 0..steps {
        let act = lstm_step(params, &trace.hidden[t], &trace.cell[t], &inputs[t])?;
        let y = linalg::matvec(&params.c_out, &act.hidden)?;
        let z = linalg::sub(&y, &targets[t])?;
        loss += loss_scale * half * z.squared_norm();
        trace.gate_i.push(act.gate_i);
        trace.gate_f.push(act.gate_f);
        trace.gate_o.push(act.gate_o);
        trace.gate_g.push(act.gate_g);
        trace.cell_tanh.push(act.cell_tanh);
        trace.hidden.push(act.hidden);
        trace.cell.push(act.cell);
        trace.outputs.push(y);
        trace.errors.push(z);
    }
    let end = LstmCarry {
        hidden: trace.hidden[steps].clone(),
        cell: trace.cell[steps].clone(),
    };
    Ok((loss, trace, end))
}

fn segment_backward_impl<T: Scalar>(
    params: &LstmParams<T>,
    trace: &LstmTrace<T>,
    inputs: &[Vector<T>],
    loss_scale: T,
) -> Result<[Matrix<T>; 9]> {
    let steps = inputs.len();
    if trace.outputs.len() != steps || trace.hidden.len() != steps + 1 {
        return Err(Error::InvalidArgument(
            "trace does not match the given inputs".into(),
        ));
    }
    let n = params.state_dim();
    let one = T::one();
    let unit = Vector::new(vec![one]).expect("unit vector");

    let mut dw_i = Matrix::zeros_like(&params.w_i);
    let mut dw_f = Matrix::zeros_like(&params.w_f);
    let mut dw_o = Matrix::zeros_like(&params.w_o);
    let mut dw_g = Matrix::zeros_like(&params.w_g);
    let mut db_i = Matrix::zeros_like(&params.b_i);
    let mut db_f = Matrix::zeros_like(&params.b_f);
    let mut db_o = Matrix::zeros_like(&params.b_o);
    let mut db_g = Matrix::zeros_like(&params.b_g);
    let mut dc_out = Matrix::zeros_like(&params.c_out);

    let mut gh_next = Vector::zeros(n);
    let mut gc_next = Vector::zeros(n);
    for t in (1..=steps).rev() {
        let idx = t - 1; // per-step vectors are 0-based
        let gy = linalg::scale(loss_scale, &trace.errors[idx]);
        dc_out.add_outer(one, &gy, &trace.hidden[t])?;
        let gh = linalg::add(&linalg::transpose_matvec(&params.c_out, &gy)?, &gh_next)?;

        let (i_t, f_t, o_t, g_t) = (
            &trace.gate_i[idx],
            &trace.gate_f[idx],
            &trace.gate_o[idx],
            &trace.gate_g[idx],
        );
        let tc = &trace.cell_tanh[idx];

        let go = linalg::diag_apply(&gh, tc)?;
        let through_cell = {
            let deriv = tc.map(|v| one - v * v);
            linalg::diag_apply(&linalg::diag_apply(&gh, o_t)?, &deriv)?
        };
        let gc = linalg::add(&gc_next, &through_cell)?;

        let gi = linalg::diag_apply(&gc, g_t)?;
        let gg = linalg::diag_apply(&gc, i_t)?;
        let gf = linalg::diag_apply(&gc, &trace.cell[t - 1])?;
        gc_next = linalg::diag_apply(&gc, f_t)?;

        // Through the activations: sigmoid' = a(1-a), tanh' = 1-a^2.
        let gpi = linalg::diag_apply(&gi, &i_t.map(|v| v * (one - v)))?;
        let gpf = linalg::diag_apply(&gf, &f_t.map(|v| v * (one - v)))?;
        let gpo = linalg::diag_apply(&go, &o_t.map(|v| v * (one - v)))?;
        let gpg = linalg::diag_apply(&gg, &g_t.map(|v| one - v * v))?;

        let u = linalg::concat(&trace.hidden[t - 1], &inputs[idx]);
        dw_i.add_outer(one, &gpi, &u)?;
        dw_f.add_outer(one, &gpf, &u)?;
        dw_o.add_outer(one, &gpo, &u)?;
        dw_g.add_outer(one, &gpg, &u)?;
        db_i.add_outer(one, &gpi, &unit)?;
        db_f.add_outer(one, &gpf, &unit)?;
        db_o.add_outer(one, &gpo, &unit)?;
        db_g.add_outer(one, &gpg, &unit)?;

        let mut gu = linalg::transpose_matvec(&params.w_i, &gpi)?;
        gu = linalg::add(&gu, &linalg::transpose_matvec(&params.w_f, &gpf)?)?;
        gu = linalg::add(&gu, &linalg::transpose_matvec(&params.w_o, &gpo)?)?;
        gu = linalg::add(&gu, &linalg::transpose_matvec(&params.w_g, &gpg)?)?;
        gh_next = Vector::new(gu.as_slice()[..n].to_vec()).expect("state part");
    }

    Ok([dw_i, dw_f, dw_o, dw_g, db_i, db_f, db_o, db_g, dc_out])
}

/// Full-sequence forward from zero hidden and cell state; loss is
/// `(1/T) * sum 1/2 ||y - y_d||^2`.
pub fn lstm_forward<T: Scalar>(
    params: &LstmParams<T>,
    inputs: &[Vector<T>],
    targets: &[Vector<T>],
) -> Result<(LstmTrace<T>, T)> {
    params.validate()?;
    let scale = full_sequence_scale::<T>(inputs.len())?;
    let carry = LstmCarry {
        hidden: Vector::zeros(params.state_dim()),
        cell: Vector::zeros(params.state_dim()),
    };
    let (loss, trace, _) = segment_forward_impl(params, &carry, inputs, targets, scale)?;
    Ok((trace, loss))
}

/// BPTT gradients of the `lstm_forward` loss, rejecting stale traces via a
/// bitwise recomputation of the first step and the final output.
pub fn lstm_bptt<T: Scalar>(
    params: &LstmParams<T>,
    trace: &LstmTrace<T>,
    inputs: &[Vector<T>],
    targets: &[Vector<T>],
) -> Result<LstmGradients<T>> {
    params.validate()?;
    validate_sequence(params.input_dim(), params.output_dim(), inputs, targets)?;
    let steps = inputs.len();
    if trace.hidden.len() != steps + 1
        || trace.cell.len() != steps + 1
        || trace.outputs.len() != steps
        || trace.errors.len() != steps
        || trace.gate_i.len() != steps
    {
        return Err(Error::InvalidArgument(format!(
            "stale trace: recorded {} steps, sequence has {steps}",
            trace.outputs.len()
        )));
    }
    // First step from a zero carry only exercises the input columns of the
    // gate weights, so the last step is recomputed as well.
    for t in [1, steps] {
        let act = lstm_step(params, &trace.hidden[t - 1], &trace.cell[t - 1], &inputs[t - 1])?;
        if act.hidden != trace.hidden[t] || act.cell != trace.cell[t] {
            return Err(Error::InvalidArgument(format!(
                "stale trace: recorded step {t} does not match these parameters and inputs"
            )));
        }
    }
    let y_last = linalg::matvec(&params.c_out, &trace.hidden[steps])?;
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
    let [dw_i, dw_f, dw_o, dw_g, db_i, db_f, db_o, db_g, dc_out] =
        segment_backward_impl(params, trace, inputs, scale)?;
    Ok(LstmGradients { dw_i, dw_f, dw_o, dw_g, db_i, db_f, db_o, db_g, dc_out })
}

impl<T: Scalar> SequenceModel<T> for LstmParams<T> {
    type Carry = LstmCarry<T>;
    type Trace = LstmTrace<T>;

    fn kind(&self) -> ModelKind {
        ModelKind::Lstm
    }

    fn state_dim(&self) -> usize {
        LstmParams::state_dim(self)
    }

    fn input_dim(&self) -> usize {
        LstmParams::input_dim(self)
    }

    fn output_dim(&self) -> usize {
        LstmParams::output_dim(self)
    }

    fn tensor_names(&self) -> &'static [&'static str] {
        &["W_i", "W_f", "W_o", "W_g", "b_i", "b_f", "b_o", "b_g", "C"]
    }

    fn params(&self) -> Vec<&Matrix<T>> {
        vec![
            &self.w_i, &self.w_f, &self.w_o, &self.w_g, &self.b_i, &self.b_f, &self.b_o,
            &self.b_g, &self.c_out,
        ]
    }

    fn params_mut(&mut self) -> Vec<&mut Matrix<T>> {
        vec![
            &mut self.w_i,
            &mut self.w_f,
            &mut self.w_o,
            &mut self.w_g,
            &mut self.b_i,
            &mut self.b_f,
            &mut self.b_o,
            &mut self.b_g,
            &mut self.c_out,
        ]
    }

    fn initial_carry(&self) -> LstmCarry<T> {
        LstmCarry {
            hidden: Vector::zeros(self.state_dim()),
            cell: Vector::zeros(self.state_dim()),
        }
    }

    fn segment_forward(
        &self,
        carry: &LstmCarry<T>,
        inputs: &[Vector<T>],
        targets: &[Vector<T>],
        loss_scale: T,
    ) -> Result<(T, LstmTrace<T>, LstmCarry<T>)> {
        segment_forward_impl(self, carry, inputs, targets, loss_scale)
    }

    fn segment_backward(
        &self,
        trace: &LstmTrace<T>,
        inputs: &[Vector<T>],
        loss_scale: T,
    ) -> Result<Vec<Matrix<T>>> {
        let grads = segment_backward_impl(self, trace, inputs, loss_scale)?;
        Ok(grads.into())
    }

    /// Targets play no role in the LSTM's dynamics; they are accepted (and
    /// length-checked) only to keep the call shape uniform.
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
        let mut h = Vector::zeros(self.state_dim());
        let mut c = Vector::zeros(self.state_dim());
        for x in inputs {
            let act = lstm_step(self, &h, &c, x)?;
            h = act.hidden;
            c = act.cell;
        }
        linalg::matvec(&self.c_out, &h)
    }
}
