pub mod error;
pub mod eval;
pub mod io;
pub mod irpca;
pub mod linalg;
pub mod lrr;
pub mod norms;
pub mod parallel;
pub mod schedule;
pub mod synth;
pub mod trace;

pub use error::{IrlsError, Result};
pub use linalg::DenseMatrix;
