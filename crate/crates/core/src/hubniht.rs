//! K-sparse minimization of Huber's criterion by normalized iterative hard
//! thresholding (HUBNIHT).
//!
//! Each iteration updates the scale exactly as [`crate::hubreg`] does, then
//! takes a thresholded gradient-style step
//! `β ← H_K(β + μ Xᵀ r_ψ)` on the pseudo-residual computed at the new scale.
//! The step size `μ` is the one-step IRWLS line search along `X` times the
//! gradient restricted to the current support;
//! it is halved until the thresholded step does not increase the criterion.
//! Once the iteration stops, the coefficients on the selected support are
//! refined by the full-rank solver of [`crate::hubreg`].

use crate::error::{Error, Result};
use crate::hubreg::{
    criterion_from_residuals, pseudo_residual_from, regression_step_size, scale_step_with_count,
    tau_from_residuals, HubReg, RegressionProblem, ScaleNormalization, SolverConfig, StepState,
};
use crate::linalg::{norm, DenseMatrix, Pseudoinverse};
use crate::stats;

const MAX_HALVINGS: usize = 40;

#[derive(Debug, Clone)]
pub struct SparseProblem {
    y: Vec<f64>,
    design: DenseMatrix,
    k: usize,
    normalize_columns: bool,
}

impl SparseProblem {
    pub fn new(y: Vec<f64>, x: DenseMatrix, k: usize, normalize_columns: bool) -> Result<Self> {
        if y.len() != x.rows() {
            return Err(Error::DimensionMismatch {
                context: "response length vs dictionary rows",
                expected: x.rows(),
                found: y.len(),
            });
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidProblem("non-finite response value".into()));
        }
        check_budget(k, x.rows(), x.cols())?;
        Ok(Self {
            y,
            design: x,
            k,
            normalize_columns,
        })
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn design(&self) -> &DenseMatrix {
        &self.design
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn normalize_columns(&self) -> bool {
        self.normalize_columns
    }
}

fn check_budget(k: usize, n: usize, p: usize) -> Result<()> {
    if k == 0 || k > n.min(p) {
        return Err(Error::InvalidProblem(format!(
            "sparsity budget K must satisfy 1 <= K <= min(N, p) = {}, got {k}",
            n.min(p)
        )));
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct SparseModel {
    /// Coefficients on the original column scale; at most K nonzeros.
    pub beta: Vec<f64>,
    /// Indices of the nonzero coefficients, ascending.
    pub support: Vec<usize>,
    pub sigma: f64,
    pub iterations: usize,
    pub converged: bool,
    pub perfect_fit: bool,
    /// Criterion value after each iteration, when requested.
    pub trace: Option<Vec<f64>>,
}

/// Keeps the `k` entries of largest magnitude; ties go to the smaller index.
pub fn hard_threshold(beta: &[f64], k: usize) -> Vec<f64> {
    let mut out = vec![0.0; beta.len()];
    if k == 0 {
        return out;
    }
    if k >= beta.len() {
        out.copy_from_slice(beta);
        return out;
    }
    let mut idx: Vec<usize> = (0..beta.len()).collect();
    let order = |&a: &usize, &b: &usize| beta[b].abs().total_cmp(&beta[a].abs()).then(a.cmp(&b));
    idx.select_nth_unstable_by(k - 1, order);
    for &i in &idx[..k] {
        out[i] = beta[i];
    }
    out
}

fn support_of(beta: &[f64]) -> Vec<usize> {
    beta.iter()
        .enumerate()
        .filter(|(_, v)| **v != 0.0)
        .map(|(i, _)| i)
        .collect()
}

/// A dictionary prepared for repeated sparse coding with a fixed budget.
#[derive(Debug, Clone)]
pub struct SparseCoder {
    working: DenseMatrix,
    // original column norms when the working copy was normalized
    col_norms: Option<Vec<f64>>,
    k: usize,
    cfg: SolverConfig,
    refit: bool,
}

impl SparseCoder {
    pub fn new(
        x: &DenseMatrix,
        k: usize,
        normalize_columns: bool,
        cfg: SolverConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        check_budget(k, x.rows(), x.cols())?;
        let (working, col_norms) = if normalize_columns {
            let norms = x.column_norms();
            if let Some(j) = norms.iter().position(|&v| v == 0.0 || !v.is_finite()) {
                return Err(Error::InvalidProblem(format!(
                    "column {j} cannot be normalized (norm {})",
                    norms[j]
                )));
            }
            let inv: Vec<f64> = norms.iter().map(|v| 1.0 / v).collect();
            (x.scale_columns(&inv)?, Some(norms))
        } else {
            (x.clone(), None)
        };
        Ok(Self {
            working,
            col_norms,
            k,
            cfg,
            refit: true,
        })
    }

    /// Toggles the final refit on the selected support (on by default).
    pub fn with_support_refit(mut self, on: bool) -> Self {
        self.refit = on;
        self
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    fn residuals(&self, y: &[f64], beta: &[f64]) -> Result<Vec<f64>> {
        let f = self.working.matvec(beta)?;
        Ok(y.iter().zip(&f).map(|(a, b)| a - b).collect())
    }

    /// Sparse-codes `y`. The criterion always uses the observation count `N`.
    pub fn fit(&self, y: &[f64]) -> Result<SparseModel> {
        let n = self.working.rows();
        if y.len() != n {
            return Err(Error::DimensionMismatch {
                context: "response length vs dictionary rows",
                expected: n,
                found: y.len(),
            });
        }
        let cfg = &self.cfg;
        let kern = &cfg.kernel;
        let count = n as f64;
        let floor = cfg.resolve_sigma_floor(y);
        let p = self.working.cols();
        let mut beta = vec![0.0; p];
        let mut trace = cfg.record_trace.then(Vec::new);

        let s0 = stats::robust_scale(y);
        if s0 == 0.0 {
            return Ok(self.finish(beta, floor, 0, true, true, trace));
        }
        let mut sigma = s0.max(floor);
        let mut steps = StepState::default();
        let mut support = Vec::new();
        let mut converged = false;
        let mut perfect_fit = false;
        let mut iterations = 0;

        for it in 1..=cfg.max_iter {
            iterations = it;
            let r = self.residuals(y, &beta)?;
            let tau = match tau_from_residuals(kern, &r, sigma, count) {
                Ok(t) => t,
                Err(Error::DegenerateScale) => {
                    sigma = floor;
                    perfect_fit = true;
                    converged = true;
                    break;
                }
                Err(e) => return Err(e),
            };

            let lambda = if cfg.adaptive_steps {
                let rs: Vec<f64> = r.iter().map(|v| v / sigma).collect();
                let cand = scale_step_with_count(kern, &rs, tau, steps.lambda, count);
                let trial = sigma * tau.powf(cand);
                let ok = cand.is_finite()
                    && trial > 0.0
                    && trial.is_finite()
                    && criterion_from_residuals(kern, &r, trial, count)
                        <= criterion_from_residuals(kern, &r, sigma * tau, count);
                if ok {
                    cand
                } else {
                    1.0
                }
            } else {
                1.0
            };
            sigma = (sigma * tau.powf(lambda)).max(floor);

            let rpsi = pseudo_residual_from(kern, &r, sigma);
            let delta = self.working.t_matvec(&rpsi)?;
            let mut mu = if cfg.adaptive_steps {
                // line search along the gradient restricted to the working support
                let mask = if support.is_empty() {
                    support_of(&hard_threshold(&delta, self.k))
                } else {
                    support.clone()
                };
                let mut restricted = vec![0.0; p];
                for &j in &mask {
                    restricted[j] = delta[j];
                }
                let z = self.working.matvec(&restricted)?;
                regression_step_size(kern, &r, &z, sigma, steps.mu)
            } else {
                1.0
            };
            if !mu.is_finite() {
                mu = 1.0;
            }
            steps = StepState { mu, lambda };

            let current = criterion_from_residuals(kern, &r, sigma, count);
            let mut next = None;
            for _ in 0..=MAX_HALVINGS {
                let moved: Vec<f64> = beta.iter().zip(&delta).map(|(b, d)| b + mu * d).collect();
                let cand = hard_threshold(&moved, self.k);
                let rc = self.residuals(y, &cand)?;
                let val = criterion_from_residuals(kern, &rc, sigma, count);
                if val <= current {
                    next = Some((cand, val));
                    break;
                }
                mu *= 0.5;
            }
            let (cand, val) = next.unwrap_or_else(|| (beta.clone(), current));

            let beta_norm = norm(&beta);
            let diff: Vec<f64> = cand.iter().zip(&beta).map(|(a, b)| a - b).collect();
            let change = norm(&diff) / beta_norm.max(cfg.tol);
            let new_support = support_of(&cand);
            let stable = new_support == support;
            beta = cand;
            support = new_support;
            if let Some(t) = trace.as_mut() {
                t.push(val);
            }
            if stable && change < cfg.tol {
                converged = true;
                break;
            }
        }

        if self.refit && !perfect_fit && !support.is_empty() {
            if let Some((b, s, exact)) = self.refit_support(y, &beta, &support, sigma)? {
                beta = b;
                sigma = s;
                perfect_fit = exact;
                if let Some(t) = trace.as_mut() {
                    let r = self.residuals(y, &beta)?;
                    t.push(criterion_from_residuals(kern, &r, sigma, count));
                }
            }
        }

        Ok(self.finish(beta, sigma, iterations, converged, perfect_fit, trace))
    }

    /// Minimizes the criterion over the coefficients on `support` alone,
    /// starting from the thresholded iterate. Returns `None` when the
    /// selected atoms are linearly dependent or the refit does not improve.
    fn refit_support(
        &self,
        y: &[f64],
        beta: &[f64],
        support: &[usize],
        sigma: f64,
    ) -> Result<Option<(Vec<f64>, f64, bool)>> {
        let n = self.working.rows();
        let cols: Vec<Vec<f64>> = support
            .iter()
            .map(|&j| self.working.column(j).to_vec())
            .collect();
        let xs = DenseMatrix::from_columns(&cols)?;
        let embed = |bs: &[f64]| {
            let mut full = vec![0.0; beta.len()];
            for (&j, &v) in support.iter().zip(bs) {
                full[j] = v;
            }
            full
        };
        if support.len() == n {
            return match Pseudoinverse::factorize(&xs) {
                Ok(pinv) => {
                    let floor = self.cfg.resolve_sigma_floor(y);
                    Ok(Some((embed(&pinv.apply(y)?), floor, true)))
                }
                Err(Error::RankDeficient { .. }) => Ok(None),
                Err(e) => Err(e),
            };
        }
        let prob = RegressionProblem::new(y.to_vec(), xs, false)?;
        let cfg = SolverConfig {
            normalization: ScaleNormalization::Observations,
            record_trace: false,
            ..self.cfg.clone()
        };
        let solver = match HubReg::new(&prob, cfg) {
            Ok(s) => s,
            Err(Error::RankDeficient { .. }) => return Ok(None),
            Err(e) => return Err(e),
        };
        let start: Vec<f64> = support.iter().map(|&j| beta[j]).collect();
        let before = solver.criterion(&start, sigma)?;
        let fit = solver.fit(Some((start, sigma)))?;
        if !fit.perfect_fit && solver.criterion(&fit.beta, fit.sigma)? > before {
            return Ok(None);
        }
        let full = embed(&fit.beta);
        // a refit coefficient can land on exactly zero; the support shrinks
        Ok(Some((full, fit.sigma, fit.perfect_fit)))
    }

    fn finish(
        &self,
        mut beta: Vec<f64>,
        sigma: f64,
        iterations: usize,
        converged: bool,
        perfect_fit: bool,
        trace: Option<Vec<f64>>,
    ) -> SparseModel {
        if let Some(norms) = &self.col_norms {
            for (b, s) in beta.iter_mut().zip(norms) {
                *b /= s;
            }
        }
        let support = support_of(&beta);
        SparseModel {
            beta,
            support,
            sigma,
            iterations,
            converged,
            perfect_fit,
            trace,
        }
    }
}

pub fn fit_sparse(prob: &SparseProblem, cfg: &SolverConfig) -> Result<SparseModel> {
    SparseCoder::new(&prob.design, prob.k, prob.normalize_columns, cfg.clone())?.fit(&prob.y)
}

/// `X β̂` on the original column scale.
pub fn reconstruct(prob: &SparseProblem, model: &SparseModel) -> Result<Vec<f64>> {
    prob.design.matvec(&model.beta)
}
