//! The embedding iteration.
//!
//! The fit minimizes
//!
//! ```text
//! G(X̂) = Tr(X̂ᵀ L_X X̂) − w · Tr(X̂ᵀ L_Y X̂)
//! ```
//!
//! over an n×d embedding `X̂`, with `L_X` built once from the (optionally
//! γ-prescaled) features and `L_Y` from the response. Two updates are
//! available:
//!
//! * CCCP: `X̂ ← w · L_X⁺ L_Y X̂`
//! * inversion-free MM: `X̂ ← X̂ + ½ Diag(L_X)⁺ (w L_Y − L_X) X̂`,
//!   equivalently `X̂ − ¼ Diag(L_X)⁺ ∇G(X̂)`.
//!
//! Both updates are linear in `X̂` and the adaptive `w` depends only on the
//! scale-free distance correlation, so the iterate can be rescaled to its
//! initial Frobenius norm after every step without changing its direction.
//! That is on by default ([`SolverConfig::rescale`]); the MM map is not a
//! contraction on centered Gram Laplacians and the raw iterate overflows
//! within a few hundred steps.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::data::Dataset;
use crate::distance::{
    build_laplacians, classical_dcor2, laplacian_dcor2, quadratic_trace, DcorMode, LaplacianPair,
};
use crate::error::{Error, Result};
use crate::linalg::{pinv_psd, spectral_radius, Matrix, SpectralRadius, RANK_TOL};

/// Bounds applied to the adaptive `w`.
pub const W_MIN: f64 = 1e-6;
pub const W_MAX: f64 = 1.0;

/// A step smaller than this (Frobenius) ends the run as a numerical stall.
pub const STALL_STEP: f64 = 1e-14;

/// Power-iteration budget for [`t_prime_radius`].
pub const T_PRIME_MAX_ITER: usize = 5000;
pub const T_PRIME_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateRule {
    Mm,
    Cccp,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WSchedule {
    Fixed(f64),
    /// `w = √ρ̂²(X̂_{φ−1}, Y)` (normalized Laplacian form), clamped to `[W_MIN, W_MAX]`.
    DcorPerIteration,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GammaPolicy {
    /// Midpoint of [`gamma_interval`].
    AutoMidpoint,
    Fixed(f64),
    /// No prescaling (γ = 1).
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Init {
    /// Seeded standard normal, scaled to `‖γX‖_F`.
    Gaussian,
    /// The `d` columns of `γX` with the largest classical dCor² against `Y`.
    FeatureSubset,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverConfig {
    pub target_dim: usize,
    pub update_rule: UpdateRule,
    pub w_schedule: WSchedule,
    pub gamma_policy: GammaPolicy,
    pub max_iter: usize,
    /// Stop when `|ΔG| / |G_prev|` falls below this; 0 disables the test.
    pub loss_tol: f64,
    pub seed: u64,
    pub init: Init,
    /// Renormalize `X̂` to `‖X̂₀‖_F` after each step.
    pub rescale: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            target_dim: 2,
            update_rule: UpdateRule::Mm,
            w_schedule: WSchedule::DcorPerIteration,
            gamma_policy: GammaPolicy::AutoMidpoint,
            max_iter: 100,
            loss_tol: 1e-10,
            seed: 0,
            init: Init::Gaussian,
            rescale: true,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self, p: usize) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.target_dim == 0 || self.target_dim > p {
            return bad(format!(
                "target dimension {} must be in 1..={p}",
                self.target_dim
            ));
        }
        if self.max_iter == 0 {
            return bad("max_iter must be at least 1".into());
        }
        if self.loss_tol.is_nan() || self.loss_tol < 0.0 {
            return bad(format!("loss_tol {} must be nonnegative", self.loss_tol));
        }
        if let WSchedule::Fixed(w) = self.w_schedule {
            if w <= 0.0 || !w.is_finite() {
                return bad(format!("fixed w {w} must be positive and finite"));
            }
        }
        if let GammaPolicy::Fixed(g) = self.gamma_policy {
            if g == 0.0 || !g.is_finite() {
                return bad(format!("fixed gamma {g} must be nonzero and finite"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub loss: f64,
    pub dcor2_lap_norm: f64,
    pub dcor2_lap_stated: f64,
    pub dcor2_classical: f64,
    pub w: f64,
    pub step_norm: f64,
    /// Wall time of the iteration in milliseconds.
    pub ms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MaxIter,
    LossTol,
    NumericalStall,
}

#[derive(Debug, Clone)]
pub struct EmbeddingResult {
    pub embedding: Matrix,
    pub gamma_interval: GammaInterval,
    pub gamma_used: f64,
    /// Normalized Laplacian dCor² of the starting point.
    pub initial_dcor2: f64,
    pub trace: Vec<IterationRecord>,
    pub stop_reason: StopReason,
}

/// `G(X̂) = Tr(X̂ᵀL_X X̂) − w·Tr(X̂ᵀL_Y X̂)`.
pub fn loss_g(xhat: &Matrix, pair: &LaplacianPair, w: f64) -> Result<f64> {
    Ok(quadratic_trace(&pair.lx, xhat)? - w * quadratic_trace(&pair.ly, xhat)?)
}

/// `∇G = 2(L_X − w L_Y) X̂`.
pub fn grad_g(xhat: &Matrix, pair: &LaplacianPair, w: f64) -> Result<Matrix> {
    let lx = pair.lx.matmul(xhat)?;
    let ly = pair.ly.matmul(xhat)?;
    Ok(lx.sub(&ly.scale(w))?.scale(2.0))
}

/// CCCP update `w · L_X⁺ L_Y X̂`, with `lx_pinv = pinv_psd(L_X)`.
pub fn cccp_step(xprev: &Matrix, pair: &LaplacianPair, w: f64, lx_pinv: &Matrix) -> Result<Matrix> {
    Ok(lx_pinv.matmul(&pair.ly.matmul(xprev)?)?.scale(w))
}

/// MM update `X̂ + ½ Diag(L_X)⁺ (w L_Y − L_X) X̂`.
///
/// Rows whose `Diag(L_X)` entry is zero (points at the feature mean) are
/// never moved.
pub fn mm_step(xprev: &Matrix, pair: &LaplacianPair, w: f64) -> Result<Matrix> {
    let pull = pair.ly.matmul(xprev)?.scale(w);
    let push = pair.lx.matmul(xprev)?;
    let half: Vec<f64> = pair.diag_lx_pinv.iter().map(|d| 0.5 * d).collect();
    let correction = pull.sub(&push)?.scale_rows(&half)?;
    xprev.add(&correction)
}

/// The same update written as `X̂ − ¼ Diag(L_X)⁺ ∇G(X̂)`.
pub fn mm_step_via_gradient(xprev: &Matrix, pair: &LaplacianPair, w: f64) -> Result<Matrix> {
    let quarter: Vec<f64> = pair.diag_lx_pinv.iter().map(|d| 0.25 * d).collect();
    let g = grad_g(xprev, pair, w)?.scale_rows(&quarter)?;
    xprev.sub(&g)
}

pub fn choose_w(xprev: &Matrix, pair: &LaplacianPair, schedule: WSchedule) -> Result<f64> {
    match schedule {
        WSchedule::Fixed(w) => Ok(w),
        WSchedule::DcorPerIteration => {
            let r2 = laplacian_dcor2(xprev, pair, DcorMode::Normalized)?;
            Ok(r2.sqrt().clamp(W_MIN, W_MAX))
        }
    }
}

/// Admissible `|γ|` range `[√(1/5)·‖Y‖_F/‖X‖_F, ‖Y‖_F/‖X‖_F]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GammaInterval {
    pub lo: f64,
    pub hi: f64,
}

impl GammaInterval {
    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn contains(&self, gamma: f64) -> bool {
        (self.lo..=self.hi).contains(&gamma.abs())
    }
}

pub fn gamma_interval(x: &Matrix, y: &Matrix) -> Result<GammaInterval> {
    let nx = x.frobenius_norm();
    let ny = y.frobenius_norm();
    if nx == 0.0 || ny == 0.0 {
        return Err(Error::DegenerateInput(
            "gamma interval needs nonzero ‖X‖_F and ‖Y‖_F".into(),
        ));
    }
    let hi = ny / nx;
    Ok(GammaInterval {
        lo: 0.2_f64.sqrt() * hi,
        hi,
    })
}

/// `γ·X`.
pub fn prescale(x: &Matrix, gamma: f64) -> Result<Matrix> {
    if gamma == 0.0 || !gamma.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "gamma {gamma} must be nonzero and finite"
        )));
    }
    Ok(x.scale(gamma))
}

/// `T′ = I + ¼ Diag(L_X)⁺ [w·L_Y − L_X]`; `w = None` leaves the weight out.
pub fn t_prime(pair: &LaplacianPair, w: Option<f64>) -> Result<Matrix> {
    let ly = match w {
        Some(w) => pair.ly.scale(w),
        None => pair.ly.clone(),
    };
    let quarter: Vec<f64> = pair.diag_lx_pinv.iter().map(|d| 0.25 * d).collect();
    let mut t = ly.sub(&pair.lx)?.scale_rows(&quarter)?;
    for i in 0..t.rows() {
        t[(i, i)] += 1.0;
    }
    Ok(t)
}

/// Spectral radius of [`t_prime`] by seeded power iteration.
pub fn t_prime_radius(pair: &LaplacianPair, seed: u64, w: Option<f64>) -> Result<SpectralRadius> {
    spectral_radius(&t_prime(pair, w)?, T_PRIME_MAX_ITER, T_PRIME_TOL, seed)
}

fn resolve_gamma(policy: GammaPolicy, interval: GammaInterval) -> f64 {
    match policy {
        GammaPolicy::AutoMidpoint => interval.midpoint(),
        GammaPolicy::Fixed(g) => g,
        GammaPolicy::Off => 1.0,
    }
}

fn initial_embedding(xs: &Matrix, y: &Matrix, config: &SolverConfig) -> Result<Matrix> {
    let (n, d) = (xs.rows(), config.target_dim);
    match config.init {
        Init::Gaussian => {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            let data: Vec<f64> = (0..n * d)
                .map(|_| StandardNormal.sample(&mut rng))
                .collect();
            let g = Matrix::from_vec(n, d, data)?;
            Ok(g.scale(xs.frobenius_norm() / g.frobenius_norm()))
        }
        Init::FeatureSubset => {
            let mut scored = Vec::with_capacity(xs.cols());
            for j in 0..xs.cols() {
                let c = Matrix::column(&xs.col(j))?;
                scored.push((j, classical_dcor2(&c, y)?));
            }
            // stable: ties keep the lower column index first
            scored.sort_by(|a, b| b.1.total_cmp(&a.1));
            let cols: Vec<usize> = scored.iter().take(d).map(|&(j, _)| j).collect();
            xs.select_columns(&cols)
        }
    }
}

/// Fits an embedding; see [`run_with_snapshots`].
pub fn run(dataset: &Dataset, config: &SolverConfig) -> Result<EmbeddingResult> {
    run_with_snapshots(dataset, config, &[]).map(|(r, _)| r)
}

/// Fits an embedding and also returns a copy of the iterate after each
/// iteration listed in `checkpoints` (ascending). Checkpoints past an early
/// stop receive the final embedding.
pub fn run_with_snapshots(
    dataset: &Dataset,
    config: &SolverConfig,
    checkpoints: &[usize],
) -> Result<(EmbeddingResult, Vec<Matrix>)> {
    config.validate(dataset.p())?;
    let interval = gamma_interval(&dataset.x, &dataset.y)?;
    let gamma = resolve_gamma(config.gamma_policy, interval);
    let xs = prescale(&dataset.x, gamma)?;
    let pair = build_laplacians(&xs, &dataset.y)?;

    let mut xhat = initial_embedding(&xs, &dataset.y, config)?;
    let initial_norm = xhat.frobenius_norm();
    let initial_dcor2 = laplacian_dcor2(&xhat, &pair, DcorMode::Normalized)?;
    let lx_pinv = match config.update_rule {
        UpdateRule::Cccp => Some(pinv_psd(&pair.lx, RANK_TOL)?),
        UpdateRule::Mm => None,
    };

    let mut trace: Vec<IterationRecord> = Vec::with_capacity(config.max_iter);
    let mut snapshots = Vec::with_capacity(checkpoints.len());
    let mut next_checkpoint = checkpoints.iter().peekable();
    let mut stop_reason = StopReason::MaxIter;

    for iter in 1..=config.max_iter {
        let started = Instant::now();
        let w = choose_w(&xhat, &pair, config.w_schedule)?;
        let mut next = match &lx_pinv {
            Some(pinv) => cccp_step(&xhat, &pair, w, pinv)?,
            None => mm_step(&xhat, &pair, w)?,
        };
        if config.rescale {
            let norm = next.frobenius_norm();
            if norm > 0.0 && norm.is_finite() {
                next = next.scale(initial_norm / norm);
            }
        }
        if !next.is_finite() || next.frobenius_norm() == 0.0 {
            stop_reason = StopReason::NumericalStall;
            break;
        }
        let dcor2_lap_norm = match laplacian_dcor2(&next, &pair, DcorMode::Normalized) {
            Ok(v) => v,
            Err(Error::DegenerateEmbedding) => {
                stop_reason = StopReason::NumericalStall;
                break;
            }
            Err(e) => return Err(e),
        };
        let record = IterationRecord {
            iter,
            loss: loss_g(&next, &pair, w)?,
            dcor2_lap_norm,
            dcor2_lap_stated: laplacian_dcor2(&next, &pair, DcorMode::AsStated)?,
            dcor2_classical: classical_dcor2(&next, &dataset.y)?,
            w,
            step_norm: next.sub(&xhat)?.frobenius_norm(),
            ms: started.elapsed().as_secs_f64() * 1e3,
        };
        if !record.loss.is_finite() {
            stop_reason = StopReason::NumericalStall;
            break;
        }
        let prev_loss = trace.last().map(|r| r.loss);
        trace.push(record);
        xhat = next;

        while next_checkpoint.next_if(|&&c| c <= iter).is_some() {
            snapshots.push(xhat.clone());
        }

        if record.step_norm < STALL_STEP {
            stop_reason = StopReason::NumericalStall;
            break;
        }
        if let Some(prev) = prev_loss {
            if config.loss_tol > 0.0
                && (record.loss - prev).abs() < config.loss_tol * prev.abs().max(f64::MIN_POSITIVE)
            {
                stop_reason = StopReason::LossTol;
                break;
            }
        }
    }
    while snapshots.len() < checkpoints.len() {
        snapshots.push(xhat.clone());
    }

    Ok((
        EmbeddingResult {
            embedding: xhat,
            gamma_interval: interval,
            gamma_used: gamma,
            initial_dcor2,
            trace,
            stop_reason,
        },
        snapshots,
    ))
}
