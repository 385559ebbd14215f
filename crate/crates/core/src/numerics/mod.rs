//! Dense matrices, differentiable primitives, initialization and optimization.

pub mod adam;
pub mod dd;
pub mod gradcheck;
pub mod init;
pub mod matrix;
pub mod ops;
pub mod tape;

pub use adam::{adam_step, AdamState};
pub use dd::Dd;
pub use gradcheck::{finite_difference_grad, max_relative_error, relative_error};
pub use init::xavier_init;
pub use matrix::{matmul, DenseMatrix};
pub use ops::{cosine_rows, row_normalize, row_softmax, sigmoid};
pub use tape::{Gradients, NodeId, ParamSlot, Tape};
