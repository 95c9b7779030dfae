//! Robust joint regression and scale estimation with Huber's criterion.
//!
//! * [`loss`]: Huber's loss, score, `chi` and weight functions, and the
//!   Fisher-consistency factor.
//! * [`linalg`]: column-major dense matrices and a QR-based pseudoinverse.
//! * [`hubreg`]: the block-wise MM solver with adaptive step sizes.
//! * [`hubniht`]: K-sparse recovery by normalized iterative hard thresholding.
//! * [`denoise`]: patch-based image denoising on an overcomplete dictionary.
//! * [`bench`]: the seeded sign-flip contamination experiment.
//! * [`dataset`]: CSV input for the regression commands.

pub mod bench;
pub mod dataset;
pub mod denoise;
pub mod error;
pub mod hubniht;
pub mod hubreg;
pub mod linalg;
pub mod loss;
pub mod stats;

pub use error::{Error, Result};
pub use hubniht::{fit_sparse, hard_threshold, SparseCoder, SparseModel, SparseProblem};
pub use hubreg::{fit, FitResult, RegressionProblem, ScaleNormalization, SolverConfig};
pub use linalg::{DenseMatrix, Pseudoinverse};
pub use loss::HuberKernel;
