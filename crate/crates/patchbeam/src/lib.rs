//! Configuration, sparse linear algebra, CSV output and experiment runners
//! for `patchbeam-core`.

pub mod error;
pub mod linalg;
pub mod output;
pub mod run;
pub mod scenario;

pub use error::{Error, Result};
