//! Distance matrices, double-centering, classical sample distance
//! covariance/correlation, and their graph-Laplacian trace forms.
//!
//! Two families of statistics live here and are never substituted for each
//! other:
//!
//! * the classical estimators double-center *plain* Euclidean distances and
//!   average the entrywise product: `ν̂²(P,Q) = (1/n²) Σ A_kl B_kl`;
//! * the Laplacian forms start from *squared* distances. With
//!   `W = ½·J E J` the Laplacian `L = Degree(W) − W` reduces to the centered
//!   Gram matrix (the rows of `W` sum to zero), so `Tr(ZᵀLZ)` is a
//!   quadratic form that [`crate::solver`] can optimize directly.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{pinv_diag_values, Matrix, RANK_TOL};

/// Variance terms at or below this are treated as a constant input.
pub const DEGENERATE_VARIANCE: f64 = 1e-14;

#[derive(Debug, Clone)]
pub struct DistanceMatrices {
    /// Squared Euclidean distances `E`.
    pub squared: Matrix,
    /// Euclidean distances `D`.
    pub plain: Matrix,
}

/// Pairwise squared and plain Euclidean distances between the rows of `p`.
pub fn pairwise_distances(p: &Matrix) -> Result<DistanceMatrices> {
    let n = p.rows();
    if n < 2 {
        return Err(Error::InsufficientSamples { needed: 2, got: n });
    }
    let mut squared = Matrix::zeros(n, n);
    let mut plain = Matrix::zeros(n, n);
    for i in 0..n {
        let ri = p.row(i);
        for j in (i + 1)..n {
            let e: f64 = ri
                .iter()
                .zip(p.row(j))
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            let d = e.sqrt();
            squared[(i, j)] = e;
            squared[(j, i)] = e;
            plain[(i, j)] = d;
            plain[(j, i)] = d;
        }
    }
    Ok(DistanceMatrices { squared, plain })
}

/// `J M J` with `J = I − eeᵀ/n`, via `M_kl − r̄_k − c̄_l + m̄`.
pub fn double_center(m: &Matrix) -> Result<Matrix> {
    if !m.is_square() {
        return Err(Error::shape(format!(
            "double-centering a {}x{} matrix",
            m.rows(),
            m.cols()
        )));
    }
    let n = m.rows();
    let nf = n as f64;
    let row_means: Vec<f64> = (0..n).map(|i| m.row(i).iter().sum::<f64>() / nf).collect();
    let col_means: Vec<f64> = (0..n)
        .map(|j| (0..n).map(|i| m[(i, j)]).sum::<f64>() / nf)
        .collect();
    let grand = row_means.iter().sum::<f64>() / nf;
    let mut out = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            out[(i, j)] = m[(i, j)] - row_means[i] - col_means[j] + grand;
        }
    }
    Ok(out)
}

fn check_rows(p: &Matrix, q: &Matrix) -> Result<()> {
    if p.rows() != q.rows() {
        return Err(Error::shape(format!(
            "row counts differ: {} vs {}",
            p.rows(),
            q.rows()
        )));
    }
    Ok(())
}

fn centered_plain(p: &Matrix) -> Result<Matrix> {
    double_center(&pairwise_distances(p)?.plain)
}

fn dcov2_from_centered(a: &Matrix, b: &Matrix) -> Result<f64> {
    let n = a.rows() as f64;
    Ok((a.frobenius_inner(b)? / (n * n)).max(0.0))
}

/// Sample distance covariance `ν̂²(P,Q)`.
pub fn classical_dcov2(p: &Matrix, q: &Matrix) -> Result<f64> {
    check_rows(p, q)?;
    dcov2_from_centered(&centered_plain(p)?, &centered_plain(q)?)
}

/// Sample distance correlation `ρ̂²(P,Q)`; zero when either input is constant.
pub fn classical_dcor2(p: &Matrix, q: &Matrix) -> Result<f64> {
    check_rows(p, q)?;
    let a = centered_plain(p)?;
    let b = centered_plain(q)?;
    let vp = dcov2_from_centered(&a, &a)?;
    let vq = dcov2_from_centered(&b, &b)?;
    if vp <= DEGENERATE_VARIANCE || vq <= DEGENERATE_VARIANCE {
        return Ok(0.0);
    }
    Ok(dcov2_from_centered(&a, &b)? / (vp * vq).sqrt())
}

/// Graph Laplacian `Degree(W) − W` over the adjacency `W = ½·J E J` of the
/// rows of `p`.
pub fn distance_laplacian(p: &Matrix) -> Result<Matrix> {
    let e = pairwise_distances(p)?.squared;
    let mut w = double_center(&e)?.scale(0.5);
    w.mirror_upper();
    let n = w.rows();
    let degree: Vec<f64> = (0..n).map(|i| w.row(i).iter().sum()).collect();
    let mut l = w.scale(-1.0);
    for (i, d) in degree.into_iter().enumerate() {
        l[(i, i)] += d;
    }
    Ok(l)
}

/// `Tr(Zᵀ L Z)`.
pub fn quadratic_trace(l: &Matrix, z: &Matrix) -> Result<f64> {
    if !l.is_square() || l.rows() != z.rows() {
        return Err(Error::shape(format!(
            "Tr(ZᵀLZ) with L {}x{} and Z {}x{}",
            l.rows(),
            l.cols(),
            z.rows(),
            z.cols()
        )));
    }
    z.frobenius_inner(&l.matmul(z)?)
}

/// Laplacians of the features and the response, precomputed once per fit.
#[derive(Debug, Clone)]
pub struct LaplacianPair {
    pub lx: Matrix,
    pub ly: Matrix,
    /// Diagonal of `Diag(L_X)⁺`.
    pub diag_lx_pinv: Vec<f64>,
    /// `n / (2·Tr(YᵀL_Y Y))`.
    pub k: f64,
    /// `Tr(YᵀL_Y Y)`.
    pub y_trace: f64,
}

impl LaplacianPair {
    pub fn n(&self) -> usize {
        self.lx.rows()
    }

    pub fn diag_lx_pinv_matrix(&self) -> Matrix {
        Matrix::from_diag(&self.diag_lx_pinv)
    }

    /// Builds a pair from explicit matrices, for callers that already hold
    /// Laplacians (tests, experiments). `y_trace` is supplied by the caller.
    pub fn from_parts(lx: Matrix, ly: Matrix, y_trace: f64) -> Result<Self> {
        if !lx.is_square() || lx.shape() != ly.shape() {
            return Err(Error::shape("Laplacians must be square and the same size"));
        }
        if y_trace.is_nan() || y_trace <= 0.0 {
            return Err(Error::DegenerateResponse);
        }
        let diag_lx_pinv = pinv_diag_values(&lx.diag(), RANK_TOL)?;
        let k = lx.rows() as f64 / (2.0 * y_trace);
        Ok(Self {
            lx,
            ly,
            diag_lx_pinv,
            k,
            y_trace,
        })
    }
}

fn is_constant(m: &Matrix) -> bool {
    (0..m.cols()).all(|j| {
        let first = m[(0, j)];
        (0..m.rows()).all(|i| m[(i, j)] == first)
    })
}

pub fn build_laplacians(x: &Matrix, y: &Matrix) -> Result<LaplacianPair> {
    check_rows(x, y)?;
    if is_constant(y) {
        return Err(Error::DegenerateResponse);
    }
    let lx = distance_laplacian(x)?;
    let ly = distance_laplacian(y)?;
    let y_trace = quadratic_trace(&ly, y)?.max(0.0);
    LaplacianPair::from_parts(lx, ly, y_trace)
}

/// Laplacian-form distance covariance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LaplacianCov {
    /// `(2/n²)·Tr(XᵀLX)`.
    pub dcov2: f64,
    /// `Tr(XᵀLX)`.
    pub trace: f64,
}

pub fn laplacian_dcov2(xhat: &Matrix, l: &Matrix) -> Result<LaplacianCov> {
    let trace = quadratic_trace(l, xhat)?;
    let n = xhat.rows() as f64;
    Ok(LaplacianCov {
        dcov2: 2.0 * trace.max(0.0) / (n * n),
        trace,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DcorMode {
    /// `k·Tr(X̂ᵀL_Y X̂) / Tr(X̂ᵀL_X̂ X̂)`, taken literally.
    AsStated,
    /// `Tr(X̂ᵀL_Y X̂) / √(Tr(X̂ᵀL_X̂ X̂)·Tr(YᵀL_Y Y))`, bounded by 1.
    Normalized,
}

/// Laplacian distance correlation of an embedding with the response held
/// in `pair`. The variance term of `xhat` uses a Laplacian built from
/// `xhat` itself.
pub fn laplacian_dcor2(xhat: &Matrix, pair: &LaplacianPair, mode: DcorMode) -> Result<f64> {
    if xhat.rows() != pair.n() {
        return Err(Error::shape(format!(
            "embedding has {} rows, Laplacians are {}x{}",
            xhat.rows(),
            pair.n(),
            pair.n()
        )));
    }
    let self_trace = quadratic_trace(&distance_laplacian(xhat)?, xhat)?.max(0.0);
    if self_trace <= 0.0 {
        return Err(Error::DegenerateEmbedding);
    }
    let cross = quadratic_trace(&pair.ly, xhat)?.max(0.0);
    Ok(match mode {
        DcorMode::AsStated => pair.k * cross / self_trace,
        DcorMode::Normalized => cross / (self_trace * pair.y_trace).sqrt(),
    })
}
