//! Supervised dimensionality reduction by distance-correlation maximization.
//!
//! Given features `X` and a response `Y`, the solver learns a low-dimensional
//! embedding `X̂` whose sample distance correlation with `Y` is large while
//! the neighbourhood structure of `X` is preserved. The pieces:
//!
//! * [`linalg`]: dense matrices, Jacobi eigendecomposition, pseudoinverses,
//!   power iteration.
//! * [`distance`]: classical and Laplacian-form distance covariance and
//!   correlation.
//! * [`solver`]: the loss, its gradient, the CCCP and MM updates, and the
//!   fitting loop.
//! * [`diagnostics`]: gradient checks and the spectral-radius report.
//! * [`evaluation`]: k-fold cross-validated k-NN regression on embeddings.
//! * [`cli`]: the `embed`, `check` and `eval` commands.

pub mod cli;
pub mod data;
pub mod diagnostics;
pub mod distance;
pub mod error;
pub mod evaluation;
pub mod linalg;
pub mod solver;

pub use data::{load_csv, Dataset};
pub use error::{Error, Result};
pub use linalg::Matrix;
