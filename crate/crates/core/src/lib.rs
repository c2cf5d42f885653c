#![cfg_attr(not(feature = "std"), no_std)]
// negated float comparisons are used on purpose so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod error;
pub mod field;
pub mod helmholtz;
pub mod inverse;
pub mod ldl;
pub mod neumann;
pub mod scene;
pub mod sparse;

pub use error::{Error, Result};
pub use field::{ComplexField, Field, Grid2D, RealField};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
