//! Numeric kernel: tensors and hand-written forward/backward passes.

pub mod adam;
pub mod conv;
pub mod dense;
pub mod dropout;
pub mod embedding;
pub mod gradcheck;
pub mod init;
pub mod linalg;
pub mod lstm;
mod params;
pub mod pool;
mod tensor;

pub use adam::{adam_update, AdamConfig, AdamState};
pub use conv::{conv1d_backward, conv1d_forward, conv1d_linear};
pub use dense::{
    cross_entropy, cross_entropy_from_logits, dense_backward, dense_logits, dense_softmax, softmax,
    softmax_cross_entropy_grad,
};
pub use dropout::{dropout, dropout_backward, Dropped};
pub use embedding::{embedding_backward, embedding_forward};
pub use gradcheck::{check_gradients, check_gradients_with, relative_error, Coverage, GradCheckReport, DEFAULT_EPS};
pub use lstm::{bilstm_backward, bilstm_forward, lstm_cell_step, BiLstmCache, LstmGrads, LstmWeights};
pub use params::{Gradients, Param, ParamId, ParamSet};
pub use pool::{maxpool1d, maxpool1d_backward, Pooled};
pub use tensor::{Scalar, Tensor};
