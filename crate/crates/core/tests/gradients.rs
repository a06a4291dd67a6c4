//! Finite-difference validation of every hand-written backward pass, plus
//! structural identities between the model families.

use ecnn_core::baselines::{init_lstm_params, init_rnn_params, RnnParams};
use ecnn_core::ecnn::{forward_sequence, init_params, EcnnParams};
use ecnn_core::gradcheck::{check_gradients, random_sequence, DEFAULT_STEP, DEFAULT_TOLERANCE};
use ecnn_core::linalg::Matrix;
use ecnn_core::model::SequenceModel;

fn max_abs_diff(a: &Matrix<f64>, b: &Matrix<f64>) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

const CONFIGS: [(usize, usize, usize, usize); 6] = [
    (1, 1, 1, 1),
    (1, 1, 1, 5),
    (3, 2, 1, 4),
    (2, 3, 2, 6),
    (5, 4, 3, 8),
    (4, 1, 1, 7),
];

#[test]
fn error_correction_gradients_match_finite_differences() {
    for (i, &(n, m, p, steps)) in CONFIGS.iter().enumerate() {
        let model = init_params::<f64>(n, m, p, 100 + i as u64).unwrap();
        let (inputs, targets) = random_sequence(m, p, steps, 200 + i as u64);
        let report =
            check_gradients(&model, &inputs, &targets, DEFAULT_STEP, DEFAULT_TOLERANCE).unwrap();
        assert!(
            report.passed,
            "config n={n} m={m} p={p} T={steps}: max rel error {} in {:?}",
            report.max_rel_error(),
            report.failing_tensors()
        );
    }
}

#[test]
fn recurrent_baseline_gradients_match_finite_differences() {
    for (i, &(n, m, p, steps)) in CONFIGS.iter().enumerate() {
        let model = init_rnn_params::<f64>(n, m, p, 300 + i as u64).unwrap();
        let (inputs, targets) = random_sequence(m, p, steps, 400 + i as u64);
        let report =
            check_gradients(&model, &inputs, &targets, DEFAULT_STEP, DEFAULT_TOLERANCE).unwrap();
        assert!(
            report.passed,
            "config n={n} m={m} p={p} T={steps}: max rel error {} in {:?}",
            report.max_rel_error(),
            report.failing_tensors()
        );
    }
}

#[test]
fn lstm_gradients_match_finite_differences() {
    for (i, &(n, m, p, steps)) in CONFIGS.iter().enumerate() {
        let model = init_lstm_params::<f64>(n, m, p, 500 + i as u64).unwrap();
        let (inputs, targets) = random_sequence(m, p, steps, 600 + i as u64);
        let report =
            check_gradients(&model, &inputs, &targets, DEFAULT_STEP, DEFAULT_TOLERANCE).unwrap();
        assert!(
            report.passed,
            "config n={n} m={m} p={p} T={steps}: max rel error {} in {:?}",
            report.max_rel_error(),
            report.failing_tensors()
        );
    }
}

#[test]
fn zero_feedback_weights_reduce_to_the_plain_rnn() {
    for seed in 0..10u64 {
        let n = 2 + (seed as usize % 4);
        let m = 1 + (seed as usize % 3);
        let p = 1 + (seed as usize % 2);
        let steps = 3 + (seed as usize % 5);
        let rnn = init_rnn_params::<f64>(n, m, p, 700 + seed).unwrap();
        let ecnn = EcnnParams::new(
            rnn.a.clone(),
            rnn.b.clone(),
            rnn.c.clone(),
            Matrix::zeros(n, p),
        )
        .unwrap();
        let (inputs, targets) = random_sequence(m, p, steps, 800 + seed);

        let loss_rnn = rnn.sequence_loss(&inputs, &targets).unwrap();
        let loss_ecnn = ecnn.sequence_loss(&inputs, &targets).unwrap();
        assert!(
            (loss_rnn - loss_ecnn).abs() < 1e-12,
            "losses diverge: {loss_rnn} vs {loss_ecnn}"
        );

        let g_rnn = rnn.sequence_gradients(&inputs, &targets).unwrap();
        let g_ecnn = ecnn.sequence_gradients(&inputs, &targets).unwrap();
        // shared tensors A, B, C agree; the fourth entry is the gradient of
        // the feedback weights themselves and has no counterpart
        for (r, e) in g_rnn.iter().zip(&g_ecnn) {
            assert!(max_abs_diff(r, e) < 1e-10);
        }
    }
}

#[test]
fn stripping_feedback_weights_from_a_trained_cell_matches_the_rnn() {
    for seed in 0..10u64 {
        let n = 3;
        let m = 2;
        let p = 1;
        let ecnn_full = init_params::<f64>(n, m, p, 900 + seed).unwrap();
        let mut ecnn = ecnn_full.clone();
        ecnn.d = Matrix::zeros(n, p);
        let rnn = RnnParams::new(ecnn.a.clone(), ecnn.b.clone(), ecnn.c.clone()).unwrap();
        let (inputs, targets) = random_sequence(m, p, 6, 1000 + seed);

        let loss_rnn = rnn.sequence_loss(&inputs, &targets).unwrap();
        let loss_ecnn = ecnn.sequence_loss(&inputs, &targets).unwrap();
        assert!((loss_rnn - loss_ecnn).abs() < 1e-12);

        let g_rnn = rnn.sequence_gradients(&inputs, &targets).unwrap();
        let g_ecnn = ecnn.sequence_gradients(&inputs, &targets).unwrap();
        for (r, e) in g_rnn.iter().zip(&g_ecnn) {
            assert!(max_abs_diff(r, e) < 1e-10);
        }
    }
}

#[test]
fn one_step_prediction_matches_the_final_forward_output() {
    // The last output of a forced sequence never depends on the last target,
    // so predicting from the first T-1 targets must reproduce it exactly.
    let n = 4;
    let m = 3;
    let p = 2;
    let steps = 6;
    let (inputs, targets) = random_sequence::<f64>(m, p, steps, 42);
    let prior = &targets[..steps - 1];

    let ecnn = init_params::<f64>(n, m, p, 1).unwrap();
    let (trace, _) = forward_sequence(&ecnn, &inputs, &targets).unwrap();
    let predicted = ecnn.predict_next(&inputs, prior).unwrap();
    assert_eq!(trace.outputs.last().unwrap().as_slice(), predicted.as_slice());

    let rnn = init_rnn_params::<f64>(n, m, p, 2).unwrap();
    let (rnn_trace, _) = ecnn_core::baselines::rnn_forward(&rnn, &inputs, &targets).unwrap();
    let predicted = rnn.predict_next(&inputs, prior).unwrap();
    assert_eq!(
        rnn_trace.outputs.last().unwrap().as_slice(),
        predicted.as_slice()
    );

    let lstm = init_lstm_params::<f64>(n, m, p, 3).unwrap();
    let (lstm_trace, _) = ecnn_core::baselines::lstm_forward(&lstm, &inputs, &targets).unwrap();
    let predicted = lstm.predict_next(&inputs, prior).unwrap();
    assert_eq!(
        lstm_trace.outputs.last().unwrap().as_slice(),
        predicted.as_slice()
    );
}
