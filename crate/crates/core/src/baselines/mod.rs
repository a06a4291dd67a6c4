//! Reference recurrent models the error-correction cell is compared
//! against: a plain tanh RNN with linear readout, and a standard
//! single-layer LSTM. Both carry hand-coded backward passes verified by the
//! same finite-difference suites as the main cell.

mod lstm;
mod rnn;

pub use lstm::{
    init_lstm_params, lstm_bptt, lstm_forward, LstmCarry, LstmGradients, LstmParams, LstmTrace,
};
pub use rnn::{init_rnn_params, rnn_bptt, rnn_forward, RnnGradients, RnnParams, RnnTrace};
