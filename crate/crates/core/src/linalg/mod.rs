//! Dense linear-algebra substrate.

mod eigen;
mod matrix;
mod power;

pub use eigen::{
    is_psd, pinv_diag, pinv_diag_values, pinv_psd, psd_order_check, sym_eigen, EigenDecomposition,
    EIGEN_TOL, RANK_TOL, SYMMETRY_TOL,
};
pub use matrix::Matrix;
pub use power::{spectral_radius, SpectralRadius};
