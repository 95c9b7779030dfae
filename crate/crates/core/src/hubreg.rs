//! Joint regression and scale estimation by minimizing Huber's criterion
//!
//! ```text
//! L(β, σ) = N α σ + σ Σᵢ ρ_c((yᵢ - xᵢᵀβ) / σ)
//! ```
//!
//! with a block-wise majorization-minimization (MM) algorithm. Each iteration
//! first updates the scale, `σ ← σ τ^λ`, then the regression vector,
//! `β ← β + μ δ` with `δ = X⁺ r_ψ`. With unit steps (`λ = μ = 1`) every
//! update minimizes a surrogate that majorizes the criterion, so the
//! criterion never increases. The adaptive steps are one-step estimates of
//! the exact line searches: `λ` comes from one fixed-point iteration in
//! log-scale space and `μ` from one IRWLS iteration along `z = X δ`. Each
//! adaptive step is accepted only when it does at least as well as the unit
//! step, which keeps the descent property.

use crate::error::{Error, Result};
use crate::linalg::{norm, DenseMatrix, Pseudoinverse};
use crate::loss::HuberKernel;
use crate::stats;

/// Response vector `y` and design matrix `X` of the linear model `y = Xβ + e`.
#[derive(Debug, Clone)]
pub struct RegressionProblem {
    y: Vec<f64>,
    design: DenseMatrix,
    intercept: bool,
}

impl RegressionProblem {
    /// With `intercept`, a leading all-ones column is prepended to `x`; the
    /// coefficient vector then has `x.cols() + 1` entries, intercept first.
    pub fn new(y: Vec<f64>, x: DenseMatrix, intercept: bool) -> Result<Self> {
        if y.len() != x.rows() {
            return Err(Error::DimensionMismatch {
                context: "response length vs design rows",
                expected: x.rows(),
                found: y.len(),
            });
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidProblem("non-finite response value".into()));
        }
        let design = if intercept { x.with_leading_ones() } else { x };
        if design.rows() <= design.cols() {
            return Err(Error::InvalidProblem(format!(
                "regression needs more observations than coefficients, got N = {} and p = {}",
                design.rows(),
                design.cols()
            )));
        }
        Ok(Self {
            y,
            design,
            intercept,
        })
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn design(&self) -> &DenseMatrix {
        &self.design
    }

    pub fn intercept(&self) -> bool {
        self.intercept
    }

    /// Number of observations `N`.
    pub fn n(&self) -> usize {
        self.y.len()
    }

    /// Total number of coefficients `p` (including the intercept column).
    pub fn p(&self) -> usize {
        self.design.cols()
    }

    /// `y - X β`.
    pub fn residuals(&self, beta: &[f64]) -> Result<Vec<f64>> {
        let fit = self.design.matvec(beta)?;
        Ok(self.y.iter().zip(&fit).map(|(y, f)| y - f).collect())
    }
}

/// Which observation count multiplies `α σ` in the criterion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScaleNormalization {
    /// `N`: the criterion as written; `σ̂` reduces to `√(RSS/N)` in the
    /// least-squares limit.
    #[default]
    Observations,
    /// `N - p`: degrees-of-freedom corrected; `σ̂` reduces to `√(RSS/(N-p))`.
    DegreesOfFreedom,
}

impl ScaleNormalization {
    pub fn count(self, n: usize, p: usize) -> f64 {
        match self {
            ScaleNormalization::Observations => n as f64,
            ScaleNormalization::DegreesOfFreedom => (n - p) as f64,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub kernel: HuberKernel,
    /// Convergence threshold on the relative regression step and on `|τ^λ - 1|`.
    pub tol: f64,
    pub max_iter: usize,
    pub adaptive_steps: bool,
    /// Lower bound for the scale. `None` means `1e-12` times the robust scale
    /// of the response.
    pub sigma_floor: Option<f64>,
    pub record_trace: bool,
    pub normalization: ScaleNormalization,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            kernel: HuberKernel::efficient_95(),
            tol: 1e-6,
            max_iter: 500,
            adaptive_steps: true,
            sigma_floor: None,
            record_trace: false,
            normalization: ScaleNormalization::Observations,
        }
    }
}

impl SolverConfig {
    pub fn with_kernel(kernel: HuberKernel) -> Self {
        Self {
            kernel,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.tol.is_finite() || self.tol <= 0.0 {
            return Err(Error::Domain(format!(
                "tol must be positive, got {}",
                self.tol
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::Domain("max_iter must be at least 1".into()));
        }
        if let Some(f) = self.sigma_floor {
            if !f.is_finite() || f <= 0.0 {
                return Err(Error::Domain(format!(
                    "sigma_floor must be positive, got {f}"
                )));
            }
        }
        Ok(())
    }

    pub(crate) fn resolve_sigma_floor(&self, y: &[f64]) -> f64 {
        self.sigma_floor.unwrap_or_else(|| {
            let s = stats::robust_scale(y);
            1e-12 * if s > 0.0 { s } else { 1.0 }
        })
    }
}

/// One row of the optional per-iteration trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    /// Criterion value after the iteration.
    pub criterion: f64,
    /// Applied scale factor `τ^λ`.
    pub scale_factor: f64,
    /// `‖μδ‖ / ‖β‖` (absolute when the previous `β` was zero).
    pub relative_step: f64,
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub beta: Vec<f64>,
    pub sigma: f64,
    pub iterations: usize,
    pub converged: bool,
    /// All residuals vanished; `sigma` was clamped to the floor.
    pub perfect_fit: bool,
    pub trace: Option<Vec<TraceRecord>>,
}

/// Adaptive step sizes carried between iterations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepState {
    pub mu: f64,
    pub lambda: f64,
}

impl Default for StepState {
    fn default() -> Self {
        Self {
            mu: 0.0,
            lambda: 1.0,
        }
    }
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "sigma must be positive, got {sigma}"
        )))
    }
}

pub(crate) fn criterion_from_residuals(k: &HuberKernel, r: &[f64], sigma: f64, count: f64) -> f64 {
    let s: f64 = r.iter().map(|&ri| k.rho(ri / sigma)).sum();
    count * k.alpha() * sigma + sigma * s
}

fn psi_norm(k: &HuberKernel, r: &[f64], sigma: f64) -> f64 {
    r.iter()
        .map(|&ri| k.psi(ri / sigma).powi(2))
        .sum::<f64>()
        .sqrt()
}

pub(crate) fn tau_from_residuals(
    k: &HuberKernel,
    r: &[f64],
    sigma: f64,
    count: f64,
) -> Result<f64> {
    let pn = psi_norm(k, r, sigma);
    if pn == 0.0 {
        return Err(Error::DegenerateScale);
    }
    Ok(pn / (2.0 * count * k.alpha()).sqrt())
}

pub(crate) fn pseudo_residual_from(k: &HuberKernel, r: &[f64], sigma: f64) -> Vec<f64> {
    r.iter().map(|&ri| k.psi(ri / sigma) * sigma).collect()
}

/// Huber's criterion `N α σ + σ Σ ρ_c(rᵢ/σ)`.
pub fn criterion(
    prob: &RegressionProblem,
    k: &HuberKernel,
    beta: &[f64],
    sigma: f64,
) -> Result<f64> {
    check_sigma(sigma)?;
    let r = prob.residuals(beta)?;
    Ok(criterion_from_residuals(k, &r, sigma, prob.n() as f64))
}

/// Pseudo-residual `ψ_c(r/σ) σ`: the residual winsorized at `±cσ`.
pub fn pseudo_residual(
    prob: &RegressionProblem,
    k: &HuberKernel,
    beta: &[f64],
    sigma: f64,
) -> Result<Vec<f64>> {
    check_sigma(sigma)?;
    let r = prob.residuals(beta)?;
    Ok(pseudo_residual_from(k, &r, sigma))
}

/// MM scale multiplier `τ = ‖ψ_c(r/σ)‖ / √(2Nα)`.
pub fn scale_multiplier(
    prob: &RegressionProblem,
    k: &HuberKernel,
    beta: &[f64],
    sigma: f64,
) -> Result<f64> {
    check_sigma(sigma)?;
    let r = prob.residuals(beta)?;
    tau_from_residuals(k, &r, sigma, prob.n() as f64)
}

/// MM regression direction `δ = X⁺ r_ψ`.
pub fn regression_direction(
    prob: &RegressionProblem,
    pinv: &Pseudoinverse,
    k: &HuberKernel,
    beta: &[f64],
    sigma: f64,
) -> Result<Vec<f64>> {
    let rpsi = pseudo_residual(prob, k, beta, sigma)?;
    pinv.apply(&rpsi)
}

/// One-step estimate of the optimal scale step `λ`, where `σ_new = σ τ^λ`.
///
/// `residuals_std` holds `r / σ` at the current scale. Returns 1 when
/// `log τ` vanishes, where the update is a no-op.
pub fn scale_step_size(k: &HuberKernel, residuals_std: &[f64], tau: f64, lambda_prev: f64) -> f64 {
    scale_step_with_count(
        k,
        residuals_std,
        tau,
        lambda_prev,
        residuals_std.len() as f64,
    )
}

pub(crate) fn scale_step_with_count(
    k: &HuberKernel,
    residuals_std: &[f64],
    tau: f64,
    lambda_prev: f64,
    count: f64,
) -> f64 {
    let log_tau = tau.ln();
    if log_tau.abs() < 1e-12 {
        return 1.0;
    }
    let shrink = tau.powf(lambda_prev);
    let pn = residuals_std
        .iter()
        .map(|&x| k.psi(x / shrink).powi(2))
        .sum::<f64>()
        .sqrt();
    lambda_prev + (pn / (2.0 * k.alpha() * count).sqrt()).ln() / log_tau
}

/// One IRWLS step for the line search `min_μ Σ ρ_c((rᵢ - μ zᵢ)/σ)`, started
/// at `mu_prev`. Returns 0 when `‖z‖_w` vanishes.
pub fn regression_step_size(
    k: &HuberKernel,
    residual: &[f64],
    z: &[f64],
    sigma: f64,
    mu_prev: f64,
) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for (&ri, &zi) in residual.iter().zip(z) {
        let w = k.weight((ri - mu_prev * zi) / sigma);
        num += ri * zi * w;
        den += zi * zi * w;
    }
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Fits `(β̂, σ̂)`. `init` defaults to the least-squares estimate and the MAD
/// scale of its residuals.
pub fn fit(
    prob: &RegressionProblem,
    cfg: &SolverConfig,
    init: Option<(Vec<f64>, f64)>,
) -> Result<FitResult> {
    HubReg::new(prob, cfg.clone())?.fit(init)
}

/// Solver bound to one problem, holding the factorization of `X` so it can be
/// reused across fits and for the least-squares estimate.
#[derive(Debug)]
pub struct HubReg<'a> {
    prob: &'a RegressionProblem,
    cfg: SolverConfig,
    pinv: Pseudoinverse,
    count: f64,
}

impl<'a> HubReg<'a> {
    pub fn new(prob: &'a RegressionProblem, cfg: SolverConfig) -> Result<Self> {
        cfg.validate()?;
        let pinv = Pseudoinverse::factorize(prob.design())?;
        let count = cfg.normalization.count(prob.n(), prob.p());
        Ok(Self {
            prob,
            cfg,
            pinv,
            count,
        })
    }

    pub fn pseudoinverse(&self) -> &Pseudoinverse {
        &self.pinv
    }

    /// Least-squares estimate `X⁺y`.
    pub fn lse(&self) -> Result<Vec<f64>> {
        self.pinv.apply(self.prob.y())
    }

    /// Criterion under the configured normalization.
    pub fn criterion(&self, beta: &[f64], sigma: f64) -> Result<f64> {
        check_sigma(sigma)?;
        let r = self.prob.residuals(beta)?;
        Ok(criterion_from_residuals(
            &self.cfg.kernel,
            &r,
            sigma,
            self.count,
        ))
    }

    pub fn fit(&self, init: Option<(Vec<f64>, f64)>) -> Result<FitResult> {
        let k = &self.cfg.kernel;
        let prob = self.prob;
        let floor = self.cfg.resolve_sigma_floor(prob.y());
        let mut trace = self.cfg.record_trace.then(Vec::new);

        let (mut beta, sigma0) = match init {
            Some((b, s)) => {
                if b.len() != prob.p() {
                    return Err(Error::DimensionMismatch {
                        context: "initial coefficients",
                        expected: prob.p(),
                        found: b.len(),
                    });
                }
                check_sigma(s)?;
                (b, s)
            }
            None => {
                let b = self.lse()?;
                let s = stats::robust_scale(&prob.residuals(&b)?);
                (b, s)
            }
        };
        let mut sigma = sigma0.max(floor);
        let mut steps = StepState::default();
        let mut converged = false;
        let mut perfect_fit = false;
        let mut iterations = 0;

        for it in 1..=self.cfg.max_iter {
            iterations = it;
            let r = prob.residuals(&beta)?;
            let tau = match tau_from_residuals(k, &r, sigma, self.count) {
                Ok(t) => t,
                Err(Error::DegenerateScale) => {
                    sigma = floor;
                    perfect_fit = true;
                    converged = true;
                    break;
                }
                Err(e) => return Err(e),
            };

            let lambda = if self.cfg.adaptive_steps {
                let rs: Vec<f64> = r.iter().map(|v| v / sigma).collect();
                let cand = scale_step_with_count(k, &rs, tau, steps.lambda, self.count);
                let unit = criterion_from_residuals(k, &r, sigma * tau, self.count);
                let trial = sigma * tau.powf(cand);
                let ok = cand.is_finite()
                    && trial > 0.0
                    && trial.is_finite()
                    && criterion_from_residuals(k, &r, trial, self.count) <= unit;
                if ok {
                    cand
                } else {
                    1.0
                }
            } else {
                1.0
            };
            let scale_factor = tau.powf(lambda);
            sigma = (sigma * scale_factor).max(floor);

            let rpsi = pseudo_residual_from(k, &r, sigma);
            let delta = self.pinv.apply(&rpsi)?;

            let mu = if self.cfg.adaptive_steps {
                let z = prob.design().matvec(&delta)?;
                let cand = regression_step_size(k, &r, &z, sigma, steps.mu);
                let moved =
                    |m: f64| -> Vec<f64> { r.iter().zip(&z).map(|(ri, zi)| ri - m * zi).collect() };
                let unit = criterion_from_residuals(k, &moved(1.0), sigma, self.count);
                let ok = cand.is_finite()
                    && criterion_from_residuals(k, &moved(cand), sigma, self.count) <= unit;
                if ok {
                    cand
                } else {
                    1.0
                }
            } else {
                1.0
            };
            steps = StepState { mu, lambda };

            let beta_norm = norm(&beta);
            let step_norm = mu.abs() * norm(&delta);
            for (b, d) in beta.iter_mut().zip(&delta) {
                *b += mu * d;
            }
            let relative_step = if beta_norm > 0.0 {
                step_norm / beta_norm
            } else {
                step_norm
            };

            if let Some(t) = trace.as_mut() {
                t.push(TraceRecord {
                    criterion: self.criterion(&beta, sigma)?,
                    scale_factor,
                    relative_step,
                });
            }

            if relative_step < self.cfg.tol && (scale_factor - 1.0).abs() < self.cfg.tol {
                converged = true;
                break;
            }
        }

        Ok(FitResult {
            beta,
            sigma,
            iterations,
            converged,
            perfect_fit,
            trace,
        })
    }
}

/// Majorizing surrogates of the two MM blocks, exposed for verification.
///
/// Both touch the criterion at the anchor `(β', σ')` and lie above it
/// elsewhere along their block.
pub mod surrogate {
    use super::*;

    /// Scale-block surrogate
    /// `L(β',σ') + Nα(σ - σ') + Σ χ_c(r'ᵢ/σ') (σ'²/σ - σ')`.
    pub fn scale(
        prob: &RegressionProblem,
        k: &HuberKernel,
        beta_anchor: &[f64],
        sigma_anchor: f64,
        sigma: f64,
    ) -> Result<f64> {
        check_sigma(sigma)?;
        let r = prob.residuals(beta_anchor)?;
        let n = prob.n() as f64;
        let base = criterion_from_residuals(k, &r, sigma_anchor, n);
        let chi_sum: f64 = r.iter().map(|&ri| k.chi(ri / sigma_anchor)).sum();
        Ok(base
            + n * k.alpha() * (sigma - sigma_anchor)
            + chi_sum * (sigma_anchor * sigma_anchor / sigma - sigma_anchor))
    }

    /// Regression-block surrogate
    /// `L(β',σ') + (1/σ') Σ [(r'_ψ,ᵢ - r'ᵢ)(rᵢ - r'ᵢ) + (rᵢ² - r'ᵢ²)/2]`.
    pub fn regression(
        prob: &RegressionProblem,
        k: &HuberKernel,
        beta_anchor: &[f64],
        sigma_anchor: f64,
        beta: &[f64],
    ) -> Result<f64> {
        check_sigma(sigma_anchor)?;
        let ra = prob.residuals(beta_anchor)?;
        let r = prob.residuals(beta)?;
        let base = criterion_from_residuals(k, &ra, sigma_anchor, prob.n() as f64);
        let rpsi = pseudo_residual_from(k, &ra, sigma_anchor);
        let s: f64 = (0..r.len())
            .map(|i| (rpsi[i] - ra[i]) * (r[i] - ra[i]) + 0.5 * (r[i] * r[i] - ra[i] * ra[i]))
            .sum();
        Ok(base + s / sigma_anchor)
    }
}

/// Max-norm of `Xᵀ ψ_c(r/σ)` and `|mean χ_c(r/σ) - α|`: the residuals of the
/// two M-estimating equations at `(β, σ)`.
pub fn stationarity_residuals(
    prob: &RegressionProblem,
    k: &HuberKernel,
    beta: &[f64],
    sigma: f64,
) -> Result<(f64, f64)> {
    check_sigma(sigma)?;
    let r = prob.residuals(beta)?;
    let psi: Vec<f64> = r.iter().map(|&ri| k.psi(ri / sigma)).collect();
    let g = prob.design().t_matvec(&psi)?;
    let g_inf = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let chi_mean = psi.iter().map(|p| 0.5 * p * p).sum::<f64>() / prob.n() as f64;
    Ok((g_inf, (chi_mean - k.alpha()).abs()))
}
