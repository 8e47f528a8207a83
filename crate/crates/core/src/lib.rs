pub mod accounting;
pub mod arch;
pub mod cli;
pub mod data;
pub mod error;
pub mod gradcheck;
pub mod ops;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use tensor::{Scalar, Shape4, Tensor4};
