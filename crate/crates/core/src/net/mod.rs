//! From-scratch sequence classifier: bidirectional and stacked LSTMs,
//! inverted dropout, dense layers, softmax, and full BPTT.

pub mod gradcheck;
pub mod layers;
pub mod lstm;
pub mod model;
pub mod params;
pub mod real;

pub use layers::{dense, dropout, softmax, Activation, DropoutMode};
pub use lstm::{bilstm_forward, lstm_cell_forward, lstm_layer_forward, lstm_layer_output, LstmTrace, LstmWeights};
pub use model::{
    argmax, batch_gradients, model_backward, model_forward, predict, sample_backward, sample_forward, sample_loss,
    BatchCache, BatchGradients, DropoutCtx, SampleCache,
};
pub use params::{init_params, Layout, ModelConfig, ModelParams};
pub use real::Real;
