// `!(x > 0.0)` style checks are used so that NaN fails them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod datagen;
pub mod decomp;
pub mod error;
pub mod experiment;
pub mod linalg;
pub mod select;
pub mod stats;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::{fold, unfold, Matrix, Mode, Tensor3};
