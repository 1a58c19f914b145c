//! Numerical substrate: tensors, a small reverse-mode tape, GRU encoder,
//! Adam and finite-difference gradient checking.

mod adam;
mod gradcheck;
mod graph;
mod gru;
mod ops;
mod params;
mod real;
mod tensor;

pub use adam::{adam_step, AdamState};
pub use gradcheck::{gradient_check, relative_error, GradCheckOptions, GradCheckReport};
pub use graph::{Graph, GruIds, Node, PROB_FLOOR};
pub use gru::{encode_utterance, gru_cell_step, EncodedUtterance, Encoder, GruLayerParams};
pub use ops::{cross_entropy, softmax_masked};
pub(crate) use params::{ParamIn, ParamOut, ParameterFileIn};
pub use params::{init_values, Gradients, Init, ParamId, ParameterStore, PARAMETER_FORMAT_VERSION};
pub use real::Real;
pub use tensor::Tensor;
