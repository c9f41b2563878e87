//! Dense arithmetic, reverse-mode differentiation, initialization and
//! gradient hygiene.

mod gradcheck;
mod init;
mod ops;
mod params;
mod real;
mod tape;
mod tensor;

pub use gradcheck::{grad_check, relative_error, GradCheckOptions, GradCheckReport, TensorCheck};
pub use init::{rng_stream, xavier_bound, xavier_init, Rng};
pub use ops::{apply_dropout, clip_global_norm, dropout_mask, global_norm, layer_norm, softmax, LAYER_NORM_EPS};
pub use params::{Grads, ParamId, ParamStore, CHECKPOINT_MAGIC};
pub use real::Real;
pub use tape::{Tape, Var};
pub use tensor::Tensor;
