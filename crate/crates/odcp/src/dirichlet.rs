//! Dirichlet density evaluation, log-likelihood, maximum-likelihood
//! estimation via the fixed-point update, and closed-form KL divergence.
//!
//! Fitting consumes only sufficient statistics `(n, mean of ln x, mean,
//! mean of x²)`, which makes permutation invariance structural and lets the
//! detector slide windows with O(1) incremental stat updates.

use serde::{Deserialize, Serialize};

use crate::error::DirichletError;
use crate::simplex::Composition;
use crate::special::{digamma_unchecked, inv_digamma_unchecked, log_gamma, trigamma_unchecked};

/// Lower clamp on every concentration parameter during fitting.
pub const ALPHA_MIN: f64 = 1e-3;
/// Upper clamp on every concentration parameter during fitting.
pub const ALPHA_MAX: f64 = 1e6;

/// Concentration parameters of one Dirichlet distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DirichletParams {
    alpha: Vec<f64>,
}

impl DirichletParams {
    pub fn new(alpha: Vec<f64>) -> Result<Self, DirichletError> {
        if alpha.len() < 2 {
            return Err(DirichletError::InvalidParams {
                reason: format!("need at least 2 components, got {}", alpha.len()),
            });
        }
        for (i, &a) in alpha.iter().enumerate() {
            if !a.is_finite() || a <= 0.0 {
                return Err(DirichletError::InvalidParams {
                    reason: format!("alpha[{i}] = {a} is not finite and positive"),
                });
            }
        }
        Ok(Self { alpha })
    }

    /// Symmetric parameters `(value, ..., value)` of length `k`.
    pub fn symmetric(k: usize, value: f64) -> Result<Self, DirichletError> {
        Self::new(vec![value; k])
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn dim(&self) -> usize {
        self.alpha.len()
    }

    /// Total concentration Σ αᵢ.
    pub fn sum(&self) -> f64 {
        self.alpha.iter().sum()
    }

    pub(crate) fn from_validated(alpha: Vec<f64>) -> Self {
        debug_assert!(alpha.iter().all(|&a| a.is_finite() && a > 0.0));
        Self { alpha }
    }
}

/// Sufficient statistics of a sample set for Dirichlet fitting.
#[derive(Debug, Clone, PartialEq)]
pub struct SufficientStats {
    n: usize,
    mean_log: Vec<f64>,
    mean: Vec<f64>,
    mean_sq: Vec<f64>,
}

impl SufficientStats {
    /// Accumulates statistics from data. Per-component addends are summed
    /// in sorted order, so any permutation of the samples produces
    /// bit-identical statistics.
    pub fn from_data(data: &[Composition]) -> Result<Self, DirichletError> {
        if data.is_empty() {
            return Err(DirichletError::EmptySegment);
        }
        let k = data[0].dim();
        for c in data {
            if c.dim() != k {
                return Err(DirichletError::DimensionMismatch {
                    left: k,
                    right: c.dim(),
                });
            }
        }
        let n = data.len();
        let mut mean_log = vec![0.0; k];
        let mut mean = vec![0.0; k];
        let mut mean_sq = vec![0.0; k];
        let mut col = vec![0.0; n];
        for j in 0..k {
            for (i, c) in data.iter().enumerate() {
                col[i] = c.values()[j].ln();
            }
            mean_log[j] = sorted_sum(&mut col) / n as f64;
            for (i, c) in data.iter().enumerate() {
                col[i] = c.values()[j];
            }
            mean[j] = sorted_sum(&mut col) / n as f64;
            for (i, c) in data.iter().enumerate() {
                let v = c.values()[j];
                col[i] = v * v;
            }
            mean_sq[j] = sorted_sum(&mut col) / n as f64;
        }
        Ok(Self {
            n,
            mean_log,
            mean,
            mean_sq,
        })
    }

    /// Builds statistics directly from already-averaged moments. Used by
    /// the detector's prefix-sum window arithmetic.
    pub fn from_moments(
        n: usize,
        mean_log: Vec<f64>,
        mean: Vec<f64>,
        mean_sq: Vec<f64>,
    ) -> Result<Self, DirichletError> {
        if n == 0 {
            return Err(DirichletError::EmptySegment);
        }
        if mean_log.len() != mean.len() || mean.len() != mean_sq.len() {
            return Err(DirichletError::DimensionMismatch {
                left: mean_log.len(),
                right: mean.len(),
            });
        }
        Ok(Self {
            n,
            mean_log,
            mean,
            mean_sq,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.mean_log.len()
    }

    pub fn mean_log(&self) -> &[f64] {
        &self.mean_log
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn mean_sq(&self) -> &[f64] {
        &self.mean_sq
    }

    /// Per-component population variance from the stored moments.
    fn variance(&self, j: usize) -> f64 {
        self.mean_sq[j] - self.mean[j] * self.mean[j]
    }
}

fn sorted_sum(values: &mut [f64]) -> f64 {
    values.sort_unstable_by(f64::total_cmp);
    values.iter().sum()
}

/// ln B(α) = Σ ln Γ(αᵢ) − ln Γ(Σ αᵢ).
pub fn log_beta(params: &DirichletParams) -> f64 {
    let sum_lg: f64 = params
        .alpha()
        .iter()
        .map(|&a| log_gamma(a).expect("alpha validated positive"))
        .sum();
    sum_lg - log_gamma(params.sum()).expect("alpha sum positive")
}

/// Dirichlet log-density of one interior simplex point.
pub fn log_pdf(x: &Composition, params: &DirichletParams) -> Result<f64, DirichletError> {
    if x.dim() != params.dim() {
        return Err(DirichletError::DimensionMismatch {
            left: x.dim(),
            right: params.dim(),
        });
    }
    let dot: f64 = x
        .values()
        .iter()
        .zip(params.alpha())
        .map(|(&xi, &ai)| (ai - 1.0) * xi.ln())
        .sum();
    Ok(dot - log_beta(params))
}

/// Joint log-likelihood of i.i.d. samples.
pub fn log_likelihood(
    data: &[Composition],
    params: &DirichletParams,
) -> Result<f64, DirichletError> {
    if data.is_empty() {
        return Err(DirichletError::EmptySegment);
    }
    let mut total = 0.0;
    for x in data {
        total += log_pdf(x, params)?;
    }
    Ok(total)
}

/// Joint log-likelihood expressed through sufficient statistics:
/// `n · (−ln B(α) + Σ (αᵢ−1)·mean_logᵢ)`.
pub fn log_likelihood_stats(stats: &SufficientStats, params: &DirichletParams) -> f64 {
    debug_assert_eq!(stats.dim(), params.dim());
    let dot: f64 = stats
        .mean_log()
        .iter()
        .zip(params.alpha())
        .map(|(&ml, &a)| (a - 1.0) * ml)
        .sum();
    stats.n as f64 * (dot - log_beta(params))
}

/// Moment-matched initializer: αᵢ = mᵢ·s with the total concentration s
/// estimated from the first component's mean and variance.
pub fn moment_match_init(data: &[Composition]) -> Result<DirichletParams, DirichletError> {
    if data.len() < 2 {
        return Err(DirichletError::TooFewSamples { got: data.len() });
    }
    let stats = SufficientStats::from_data(data)?;
    Ok(moment_init_from_stats(&stats))
}

pub(crate) fn moment_init_from_stats(stats: &SufficientStats) -> DirichletParams {
    let m1 = stats.mean[0];
    let v1 = stats.variance(0);
    let mut s = if v1 > 1e-14 {
        (m1 - m1 * m1) / v1 - 1.0
    } else {
        1.0
    };
    if !(s > 0.0) || !s.is_finite() {
        s = 1.0;
    }
    let alpha = stats
        .mean
        .iter()
        .map(|&m| (m * s).clamp(ALPHA_MIN, ALPHA_MAX))
        .collect();
    DirichletParams::from_validated(alpha)
}

/// Outcome of a maximum-likelihood fit.
#[derive(Debug, Clone)]
pub struct MleFit {
    pub params: DirichletParams,
    pub iterations: usize,
    /// Stationarity reached: max_i |ψ(αᵢ) − ψ(Σα) − mean_logᵢ| ≤ 10·tol.
    pub converged: bool,
    /// Set when the data pins some component (zero variance) or a clamp
    /// bound is active; the estimate is returned clamped instead of erroring.
    pub degenerate: bool,
    /// Max stationarity residual at the returned parameters.
    pub residual: f64,
}

/// Fits Dirichlet parameters by maximum likelihood with the fixed-point
/// update αᵢ ← ψ⁻¹(ψ(Σαⱼ) + mean_logᵢ), starting from the moment-matched
/// initializer.
pub fn fit_mle(
    data: &[Composition],
    tol: f64,
    max_iter: usize,
) -> Result<MleFit, DirichletError> {
    if data.len() < 2 {
        return Err(DirichletError::TooFewSamples { got: data.len() });
    }
    let stats = SufficientStats::from_data(data)?;
    fit_mle_from_stats(&stats, None, tol, max_iter)
}

/// Fits from precomputed statistics. `init` overrides the moment-matched
/// starting point (the detector warm-starts segment fits from the pooled
/// window estimate).
pub fn fit_mle_from_stats(
    stats: &SufficientStats,
    init: Option<&DirichletParams>,
    tol: f64,
    max_iter: usize,
) -> Result<MleFit, DirichletError> {
    if stats.n < 2 {
        return Err(DirichletError::TooFewSamples { got: stats.n });
    }
    let k = stats.dim();
    let zero_var = (0..k).filter(|&j| stats.variance(j) <= 1e-14).count();
    let init_params = match init {
        Some(p) => {
            if p.dim() != k {
                return Err(DirichletError::DimensionMismatch {
                    left: p.dim(),
                    right: k,
                });
            }
            p.clone()
        }
        None => moment_init_from_stats(stats),
    };
    if zero_var == k {
        // All components constant: the likelihood has no interior maximum,
        // so report the moment estimate as-is.
        let residual = stationarity_residual(&init_params, stats);
        return Ok(MleFit {
            params: init_params,
            iterations: 0,
            converged: false,
            degenerate: true,
            residual,
        });
    }

    let mut alpha = init_params.alpha().to_vec();
    let mut best = alpha.clone();
    let mut best_ll = ll_from_stats(&alpha, stats);
    let mut iterations = 0;

    // Fixed-point phase. Convergence is linear with rate worsening as the
    // total concentration grows, so this phase only needs to carry the
    // iterate into the basin where Newton takes over.
    let fp_budget = 60.min(max_iter);
    while iterations < fp_budget {
        iterations += 1;
        let step = fixed_point_step(&mut alpha, stats);
        let ll = ll_from_stats(&alpha, stats);
        if ll > best_ll {
            best_ll = ll;
            best.copy_from_slice(&alpha);
        }
        if step <= tol.max(1e-3) {
            break;
        }
    }

    // Newton phase: the log-likelihood is strictly concave in α and the
    // Hessian is diagonal plus rank one, so the Newton direction is O(K).
    // Backtrack on the likelihood; fall back to a fixed-point step when the
    // direction is unusable.
    while iterations < max_iter {
        if stationarity_residual_slice(&alpha, stats) <= tol {
            break;
        }
        iterations += 1;
        let step = match newton_step(&mut alpha, stats) {
            Some(step) => step,
            None => fixed_point_step(&mut alpha, stats),
        };
        let ll = ll_from_stats(&alpha, stats);
        if ll > best_ll {
            best_ll = ll;
            best.copy_from_slice(&alpha);
        }
        if step <= tol {
            break;
        }
    }

    let params = DirichletParams::from_validated(best);
    let residual = stationarity_residual(&params, stats);
    let clamped = params
        .alpha()
        .iter()
        .any(|&a| a <= ALPHA_MIN || a >= ALPHA_MAX);
    let degenerate = zero_var > 0 || clamped;
    let converged = residual <= 10.0 * tol;
    if !converged && !degenerate && residual > 100.0 * tol {
        return Err(DirichletError::NonConvergence {
            iterations,
            residual,
            last: params,
        });
    }
    Ok(MleFit {
        params,
        iterations,
        converged,
        degenerate,
        residual,
    })
}

/// One update αᵢ ← ψ⁻¹(ψ(Σα) + mean_logᵢ); returns the max relative step.
fn fixed_point_step(alpha: &mut [f64], stats: &SufficientStats) -> f64 {
    let total: f64 = alpha.iter().sum();
    let psi_total = digamma_unchecked(total);
    let mut max_step = 0.0f64;
    for (a, &ml) in alpha.iter_mut().zip(&stats.mean_log) {
        let next = inv_digamma_unchecked(psi_total + ml).clamp(ALPHA_MIN, ALPHA_MAX);
        max_step = max_step.max((next - *a).abs() / *a);
        *a = next;
    }
    max_step
}

/// One damped Newton step on the log-likelihood. The Hessian is
/// `n (ψ'(Σα)·11ᵀ − diag ψ'(αⱼ))`, inverted in O(K). Returns the max
/// relative step, or `None` when the direction is unusable so the caller
/// can fall back to the fixed point.
fn newton_step(alpha: &mut [f64], stats: &SufficientStats) -> Option<f64> {
    let total: f64 = alpha.iter().sum();
    let psi_total = digamma_unchecked(total);
    let z = trigamma_unchecked(total);
    let k = alpha.len();
    let mut grad = vec![0.0; k];
    let mut q = vec![0.0; k];
    for j in 0..k {
        grad[j] = psi_total - digamma_unchecked(alpha[j]) + stats.mean_log[j];
        q[j] = trigamma_unchecked(alpha[j]);
    }
    // Solve (z·11ᵀ − diag q) d = grad via Sherman-Morrison.
    let inv_q_sum: f64 = q.iter().map(|&v| 1.0 / v).sum();
    let denom = 1.0 - z * inv_q_sum;
    if denom.abs() < 1e-12 {
        return None;
    }
    let s: f64 = -grad.iter().zip(&q).map(|(&g, &qj)| g / qj).sum::<f64>() / denom;
    let direction: Vec<f64> = grad
        .iter()
        .zip(&q)
        .map(|(&g, &qj)| -(z * s - g) / qj)
        .collect();
    if direction.iter().any(|d| !d.is_finite()) {
        return None;
    }

    let ll_old = ll_from_stats(alpha, stats);
    let mut scale = 1.0;
    for _ in 0..30 {
        let candidate: Vec<f64> = alpha
            .iter()
            .zip(&direction)
            .map(|(&a, &d)| (a + scale * d).clamp(ALPHA_MIN, ALPHA_MAX))
            .collect();
        if ll_from_stats(&candidate, stats) >= ll_old {
            let max_step = candidate
                .iter()
                .zip(alpha.iter())
                .map(|(&n, &o)| (n - o).abs() / o)
                .fold(0.0, f64::max);
            alpha.copy_from_slice(&candidate);
            return Some(max_step);
        }
        scale *= 0.5;
    }
    None
}

fn ll_from_stats(alpha: &[f64], stats: &SufficientStats) -> f64 {
    let total: f64 = alpha.iter().sum();
    let mut acc = log_gamma(total).expect("positive");
    for (&a, &ml) in alpha.iter().zip(&stats.mean_log) {
        acc -= log_gamma(a).expect("positive");
        acc += (a - 1.0) * ml;
    }
    stats.n as f64 * acc
}

fn stationarity_residual(params: &DirichletParams, stats: &SufficientStats) -> f64 {
    stationarity_residual_slice(params.alpha(), stats)
}

fn stationarity_residual_slice(alpha: &[f64], stats: &SufficientStats) -> f64 {
    let psi_total = digamma_unchecked(alpha.iter().sum());
    alpha
        .iter()
        .zip(stats.mean_log())
        .map(|(&a, &ml)| (digamma_unchecked(a) - psi_total - ml).abs())
        .fold(0.0, f64::max)
}

/// KL(a ‖ b) between two Dirichlet distributions, in closed form.
pub fn kl_dirichlet(
    a: &DirichletParams,
    b: &DirichletParams,
) -> Result<f64, DirichletError> {
    if a.dim() != b.dim() {
        return Err(DirichletError::DimensionMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    let psi_total = digamma_unchecked(a.sum());
    let mut kl = log_beta(b) - log_beta(a);
    for (&ai, &bi) in a.alpha().iter().zip(b.alpha()) {
        kl += (ai - bi) * (digamma_unchecked(ai) - psi_total);
    }
    Ok(kl.max(0.0))
}

/// KL(a ‖ b) + KL(b ‖ a).
pub fn symmetric_kl(
    a: &DirichletParams,
    b: &DirichletParams,
) -> Result<f64, DirichletError> {
    Ok(kl_dirichlet(a, b)? + kl_dirichlet(b, a)?)
}
