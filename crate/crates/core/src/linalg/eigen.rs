//! Symmetric eigendecomposition (cyclic Jacobi) and the routines built on
//! it: PSD pseudoinverse and Loewner-order checks.

use super::Matrix;
use crate::error::{Error, Result};

/// Default relative off-diagonal threshold for [`sym_eigen`].
pub const EIGEN_TOL: f64 = 1e-14;

/// Default relative rank cutoff for the pseudoinverses.
pub const RANK_TOL: f64 = 1e-12;

/// Asymmetry accepted by [`sym_eigen`], relative to `max(1, max|a_ij|)`.
pub const SYMMETRY_TOL: f64 = 1e-10;

const MAX_SWEEPS: usize = 100;

/// Eigenpairs of a symmetric matrix, eigenvalues in descending order and
/// eigenvectors stored column-wise.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub values: Vec<f64>,
    pub vectors: Matrix,
}

impl EigenDecomposition {
    /// `V · diag(λ) · Vᵀ`
    pub fn reconstruct(&self) -> Matrix {
        let n = self.values.len();
        let mut out = Matrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let s: f64 = (0..n)
                    .map(|k| self.vectors[(i, k)] * self.values[k] * self.vectors[(j, k)])
                    .sum();
                out[(i, j)] = s;
            }
        }
        out.mirror_upper();
        out
    }

    pub fn min_value(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }

    pub fn max_value(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }
}

fn check_symmetric(a: &Matrix) -> Result<()> {
    if !a.is_square() {
        return Err(Error::shape(format!(
            "expected a square matrix, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    let asym = a.max_abs_asymmetry();
    if asym > SYMMETRY_TOL * a.max_abs().max(1.0) {
        return Err(Error::NotSymmetric(asym));
    }
    Ok(())
}

fn off_diagonal_norm(a: &Matrix) -> f64 {
    let n = a.rows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a[(i, j)] * a[(i, j)];
            }
        }
    }
    s.sqrt()
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
///
/// Sweeps over every `(p, q)` pair, annihilating `a_pq` with a plane rotation,
/// until the off-diagonal Frobenius norm drops to `tol · ‖A‖_F`. The
/// rotation order is fixed, so identical input gives identical output.
pub fn sym_eigen(a: &Matrix, tol: f64) -> Result<EigenDecomposition> {
    check_symmetric(a)?;
    let n = a.rows();
    let mut m = a.clone();
    // work on an exactly symmetric copy
    m.mirror_upper();
    let mut v = Matrix::identity(n);
    let norm = m.frobenius_norm();

    if norm > 0.0 {
        for _ in 0..MAX_SWEEPS {
            if off_diagonal_norm(&m) <= tol * norm {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = m[(p, q)];
                    if apq == 0.0 {
                        continue;
                    }
                    let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    rotate(&mut m, &mut v, p, q, c, s);
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let raw: Vec<f64> = m.diag();
    order.sort_by(|&i, &j| raw[j].total_cmp(&raw[i]));
    let values = order.iter().map(|&i| raw[i]).collect();
    let vectors = v.select_columns(&order)?;
    Ok(EigenDecomposition { values, vectors })
}

/// Applies `A ← JᵀAJ`, `V ← VJ` for the rotation in the `(p, q)` plane.
fn rotate(m: &mut Matrix, v: &mut Matrix, p: usize, q: usize, c: f64, s: f64) {
    let n = m.rows();
    for k in 0..n {
        let (akp, akq) = (m[(k, p)], m[(k, q)]);
        m[(k, p)] = c * akp - s * akq;
        m[(k, q)] = s * akp + c * akq;
    }
    for k in 0..n {
        let (apk, aqk) = (m[(p, k)], m[(q, k)]);
        m[(p, k)] = c * apk - s * aqk;
        m[(q, k)] = s * apk + c * aqk;
    }
    m[(p, q)] = 0.0;
    m[(q, p)] = 0.0;
    for k in 0..n {
        let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
        v[(k, p)] = c * vkp - s * vkq;
        v[(k, q)] = s * vkp + c * vkq;
    }
}

/// Moore-Penrose pseudoinverse of a symmetric PSD matrix.
///
/// Eigenvalues at or below `rank_tol · λ_max` are treated as zero. Small
/// negative eigenvalues down to `-rank_tol · ‖A‖_F` are accepted as roundoff.
pub fn pinv_psd(a: &Matrix, rank_tol: f64) -> Result<Matrix> {
    let eig = sym_eigen(a, EIGEN_TOL)?;
    let norm = a.frobenius_norm();
    let min = eig.min_value();
    if min < -rank_tol * norm {
        return Err(Error::NotPsd(min));
    }
    let cutoff = rank_tol * eig.max_value().max(0.0);
    let n = a.rows();
    let kept: Vec<(usize, f64)> = eig
        .values
        .iter()
        .enumerate()
        .filter(|(_, &l)| l > cutoff)
        .map(|(k, &l)| (k, 1.0 / l))
        .collect();
    let mut out = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            out[(i, j)] = kept
                .iter()
                .map(|&(k, inv)| eig.vectors[(i, k)] * inv * eig.vectors[(j, k)])
                .sum();
        }
    }
    out.mirror_upper();
    Ok(out)
}

/// Entrywise pseudo-reciprocal of a nonnegative diagonal.
pub fn pinv_diag_values(diag: &[f64], rank_tol: f64) -> Result<Vec<f64>> {
    // entries that are zero up to roundoff may come out slightly negative
    let cutoff = rank_tol * diag.iter().fold(0.0_f64, |m, &d| m.max(d.abs()));
    if let Some(&neg) = diag.iter().find(|&&d| d < -cutoff) {
        return Err(Error::NotPsd(neg));
    }
    Ok(diag
        .iter()
        .map(|&d| if d > cutoff { 1.0 / d } else { 0.0 })
        .collect())
}

/// Pseudoinverse of a diagonal matrix with nonnegative entries.
pub fn pinv_diag(d: &Matrix, rank_tol: f64) -> Result<Matrix> {
    if !d.is_square() {
        return Err(Error::shape("pinv_diag expects a square matrix"));
    }
    let n = d.rows();
    for i in 0..n {
        for j in 0..n {
            if i != j && d[(i, j)] != 0.0 {
                return Err(Error::shape(format!(
                    "pinv_diag expects a diagonal matrix, entry ({i}, {j}) is nonzero"
                )));
            }
        }
    }
    Ok(Matrix::from_diag(&pinv_diag_values(&d.diag(), rank_tol)?))
}

/// `0 ⪯ A` and `A ⪯ B`, each up to `-tol · ‖·‖_F` on the smallest eigenvalue.
pub fn psd_order_check(a: &Matrix, b: &Matrix, tol: f64) -> Result<bool> {
    if a.shape() != b.shape() {
        return Err(Error::shape(format!(
            "psd_order_check on {}x{} and {}x{}",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols()
        )));
    }
    Ok(is_psd(a, tol)? && is_psd(&b.sub(a)?, tol)?)
}

/// Smallest eigenvalue at least `-tol · ‖A‖_F`.
pub fn is_psd(a: &Matrix, tol: f64) -> Result<bool> {
    let eig = sym_eigen(a, EIGEN_TOL)?;
    Ok(eig.min_value() >= -tol * a.frobenius_norm())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn approx(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn diagonal_input_is_already_decomposed() {
        let e = sym_eigen(&Matrix::from_diag(&[3.0, 1.0]), EIGEN_TOL).unwrap();
        assert_eq!(e.values, vec![3.0, 1.0]);
        assert_eq!(e.vectors, Matrix::identity(2));
    }

    #[test]
    fn two_by_two_eigenvalues() {
        // λ² − 4λ + 3 = 0
        let a = Matrix::from_rows(&[[2.0, 1.0], [1.0, 2.0]]).unwrap();
        let e = sym_eigen(&a, EIGEN_TOL).unwrap();
        assert!(approx(e.values[0], 3.0, 1e-14));
        assert!(approx(e.values[1], 1.0, 1e-14));
        let r = e.reconstruct().sub(&a).unwrap().frobenius_norm();
        assert!(r < 1e-14);
    }

    #[test]
    fn zero_matrix_has_zero_spectrum() {
        let e = sym_eigen(&Matrix::zeros(3, 3), EIGEN_TOL).unwrap();
        assert_eq!(e.values, vec![0.0; 3]);
    }

    #[test]
    fn rejects_asymmetric_and_rectangular() {
        let a = Matrix::from_rows(&[[1.0, 2.0], [0.0, 1.0]]).unwrap();
        assert!(matches!(
            sym_eigen(&a, EIGEN_TOL),
            Err(Error::NotSymmetric(_))
        ));
        assert!(matches!(
            sym_eigen(&Matrix::zeros(2, 3), EIGEN_TOL),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn pinv_examples() {
        let i3 = Matrix::identity(3);
        let p = pinv_psd(&i3, RANK_TOL).unwrap();
        assert!(p.sub(&i3).unwrap().frobenius_norm() < 1e-15);

        let d = Matrix::from_diag(&[2.0, 0.0, 4.0]);
        let expect = Matrix::from_diag(&[0.5, 0.0, 0.25]);
        assert!(
            pinv_psd(&d, RANK_TOL)
                .unwrap()
                .sub(&expect)
                .unwrap()
                .frobenius_norm()
                < 1e-15
        );
        assert_eq!(pinv_diag(&d, RANK_TOL).unwrap(), expect);

        // rank one vvᵀ with ‖v‖ = 1 is its own pseudoinverse
        let v = [0.6, 0.0, 0.8];
        let mut vv = Matrix::zeros(3, 3);
        for i in 0..3 {
            for j in 0..3 {
                vv[(i, j)] = v[i] * v[j];
            }
        }
        let p = pinv_psd(&vv, RANK_TOL).unwrap();
        assert!(p.sub(&vv).unwrap().frobenius_norm() < 1e-12);
    }

    #[test]
    fn pinv_diag_edge_cases() {
        assert_eq!(
            pinv_diag(&Matrix::identity(2), RANK_TOL).unwrap(),
            Matrix::identity(2)
        );
        assert_eq!(
            pinv_diag(&Matrix::zeros(2, 2), RANK_TOL).unwrap(),
            Matrix::zeros(2, 2)
        );
        assert!(matches!(
            pinv_diag(&Matrix::from_diag(&[1.0, -1.0]), RANK_TOL),
            Err(Error::NotPsd(_))
        ));
        assert_eq!(
            pinv_diag_values(&[2.0, -1e-16], RANK_TOL).unwrap(),
            vec![0.5, 0.0]
        );
        let not_diag = Matrix::from_rows(&[[1.0, 1.0], [1.0, 1.0]]).unwrap();
        assert!(pinv_diag(&not_diag, RANK_TOL).is_err());
    }

    #[test]
    fn pinv_rejects_indefinite() {
        let a = Matrix::from_diag(&[1.0, -1.0]);
        assert!(matches!(pinv_psd(&a, RANK_TOL), Err(Error::NotPsd(_))));
    }

    #[test]
    fn psd_order_examples() {
        let z = Matrix::zeros(2, 2);
        let i = Matrix::identity(2);
        assert!(psd_order_check(&z, &i, 1e-9).unwrap());
        assert!(!psd_order_check(&i, &z, 1e-9).unwrap());
        let a = Matrix::from_diag(&[1.0, 2.0]);
        let b = Matrix::from_diag(&[2.0, 2.0]);
        assert!(psd_order_check(&a, &b, 1e-9).unwrap());
        assert!(psd_order_check(&a, &Matrix::zeros(3, 3), 1e-9).is_err());
    }
}
