//! Numerical checks around the fit: directional-derivative verification of
//! the loss, and the prescaling conditions with the spectral radius of the
//! MM map's derivative.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::distance::{build_laplacians, LaplacianPair};
use crate::error::{Error, Result};
use crate::linalg::{is_psd, Matrix};
use crate::solver::{gamma_interval, grad_g, loss_g, prescale, t_prime_radius, GammaInterval};

pub const GRAD_CHECK_DIRECTIONS: usize = 20;

/// Eigenvalue tolerance of the PSD conditions, relative to `‖·‖_F`.
pub const PSD_TOL: f64 = 1e-9;

/// A radius must sit this far below 1 to count as strongly attracting.
pub const ATTRACTION_MARGIN: f64 = 1e-9;

/// Worst relative error between the analytic directional derivative
/// `2·Tr(Δᵀ C X̂)`, `C = L_X − w L_Y`, and the central difference
/// `(G(X̂+hΔ) − G(X̂−hΔ)) / 2h`, over seeded random unit directions.
pub fn grad_check(xhat: &Matrix, pair: &LaplacianPair, w: f64, h: f64, seed: u64) -> Result<f64> {
    if h.is_nan() || h <= 0.0 {
        return Err(Error::InvalidConfig(format!(
            "step h = {h} must be positive"
        )));
    }
    let grad = grad_g(xhat, pair, w)?;
    let floor = 1e-8 * grad.frobenius_norm();
    let (n, d) = xhat.shape();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0_f64;
    let mut drawn = 0;
    while drawn < GRAD_CHECK_DIRECTIONS {
        let raw: Vec<f64> = (0..n * d)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        let dir = Matrix::from_vec(n, d, raw)?;
        let norm = dir.frobenius_norm();
        if norm == 0.0 {
            continue;
        }
        let dir = dir.scale(1.0 / norm);
        drawn += 1;

        let analytic = dir.frobenius_inner(&grad)?;
        let plus = loss_g(&xhat.add(&dir.scale(h))?, pair, w)?;
        let minus = loss_g(&xhat.sub(&dir.scale(h))?, pair, w)?;
        let numeric = (plus - minus) / (2.0 * h);
        let denom = analytic.abs().max(numeric.abs()).max(floor);
        if denom > 0.0 {
            worst = worst.max((analytic - numeric).abs() / denom);
        }
    }
    Ok(worst)
}

/// `Tr(XXᵀ) + 4 Σᵢ ‖Xᵢ.‖ ≥ Tr(YYᵀ) ≥ Tr(XXᵀ)`, evaluated literally.
pub fn trace_condition_check(x: &Matrix, y: &Matrix) -> Result<bool> {
    if x.rows() != y.rows() {
        return Err(Error::shape(format!(
            "row counts differ: {} vs {}",
            x.rows(),
            y.rows()
        )));
    }
    let (lower, upper) = trace_condition_bounds(x);
    let ty = sum_sq(y);
    Ok(upper >= ty && ty >= lower)
}

fn trace_condition_bounds(x: &Matrix) -> (f64, f64) {
    let tx = sum_sq(x);
    let row_norms: f64 = (0..x.rows())
        .map(|i| x.row(i).iter().map(|v| v * v).sum::<f64>().sqrt())
        .sum();
    (tx, tx + 4.0 * row_norms)
}

fn sum_sq(m: &Matrix) -> f64 {
    m.as_slice().iter().map(|v| v * v).sum()
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    pub gamma_interval: GammaInterval,
    pub gamma_used: f64,
    /// `0 ⪯ 2(L_Y − L_X)`
    pub psd_lower_ok: bool,
    /// `2(L_Y − L_X) ⪯ 8 Diag(L_X)`
    pub psd_upper_ok: bool,
    pub trace_condition_ok: bool,
    pub t_prime_radius: f64,
    pub t_prime_radius_converged: bool,
    pub strong_attraction: bool,
}

/// `(0 ⪯ 2(L_Y−L_X), 2(L_Y−L_X) ⪯ 8·Diag(L_X))`, each judged on its own;
/// both true is exactly `psd_order_check(2(L_Y−L_X), 8·Diag(L_X))`.
pub fn psd_conditions(pair: &LaplacianPair) -> Result<(bool, bool)> {
    let a = pair.ly.sub(&pair.lx)?.scale(2.0);
    let b = Matrix::from_diag(&pair.lx.diag()).scale(8.0);
    Ok((is_psd(&a, PSD_TOL)?, is_psd(&b.sub(&a)?, PSD_TOL)?))
}

/// Builds Laplacians over `(γX, Y)` and evaluates every prescaling
/// condition independently. `T′` does not depend on the iterate, so the
/// verdict applies to every stationary point.
pub fn convergence_report(
    x: &Matrix,
    y: &Matrix,
    gamma: f64,
    seed: u64,
) -> Result<ConvergenceReport> {
    let interval = gamma_interval(x, y)?;
    let xs = prescale(x, gamma)?;
    let pair = build_laplacians(&xs, y)?;
    let (psd_lower_ok, psd_upper_ok) = psd_conditions(&pair)?;
    let radius = t_prime_radius(&pair, seed, None)?;
    Ok(ConvergenceReport {
        gamma_interval: interval,
        gamma_used: gamma,
        psd_lower_ok,
        psd_upper_ok,
        trace_condition_ok: trace_condition_check(&xs, y)?,
        t_prime_radius: radius.value,
        t_prime_radius_converged: radius.converged,
        strong_attraction: radius.value < 1.0 - ATTRACTION_MARGIN,
    })
}
