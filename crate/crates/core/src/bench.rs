//! Seeded Monte-Carlo comparison of least squares and the Huber solver under
//! sign-flip contamination of the responses.
//!
//! Trial `t` at grid index `e` draws from ChaCha8 seeded with `master_seed`
//! on stream `(e << 32) | t`, in the order: `X` (column-major), `β`, `e`,
//! then one uniform per response for the flips.

use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hubreg::{HubReg, RegressionProblem, ScaleNormalization, SolverConfig};
use crate::linalg::{norm, DenseMatrix};
use crate::loss::HuberKernel;

/// Identity of the random generator and seeding scheme.
pub const GENERATOR_ID: &str =
    "ChaCha8Rng(seed_from_u64(master_seed), stream = eps_index << 32 | trial)";

pub const CSV_HEADER: &str =
    "eps,lse_beta_nmse,hub_beta_nmse,sd_scale_err,hub_scale_err,trials,failures";

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub n: usize,
    pub p: usize,
    pub snr_db: f64,
    pub c: f64,
    pub eps_grid: Vec<f64>,
    pub trials: usize,
    pub master_seed: u64,
    /// Use `N - p` in place of `N` for both scale estimates.
    pub dof_correction: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n: 500,
            p: 250,
            snr_db: 20.0,
            c: 1.345,
            eps_grid: (0..=10).map(|i| i as f64 / 100.0).collect(),
            trials: 200,
            master_seed: 42,
            dof_correction: true,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.p == 0 || self.n <= self.p {
            return Err(Error::InvalidProblem(format!(
                "need N > p >= 1, got N = {} and p = {}",
                self.n, self.p
            )));
        }
        if self.trials == 0 {
            return Err(Error::InvalidProblem("trials must be at least 1".into()));
        }
        if self.eps_grid.is_empty() {
            return Err(Error::InvalidProblem("contamination grid is empty".into()));
        }
        if let Some(e) = self.eps_grid.iter().find(|e| !(0.0..=1.0).contains(*e)) {
            return Err(Error::Domain(format!(
                "contamination probability {e} outside [0, 1]"
            )));
        }
        if !self.snr_db.is_finite() {
            return Err(Error::Domain("SNR must be finite".into()));
        }
        HuberKernel::new(self.c)?;
        Ok(())
    }

    fn solver_config(&self) -> Result<SolverConfig> {
        let mut cfg = SolverConfig::with_kernel(HuberKernel::new(self.c)?);
        if self.dof_correction {
            cfg.normalization = ScaleNormalization::DegreesOfFreedom;
        }
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub eps: f64,
    pub trial: usize,
    pub beta_nmse_lse: f64,
    pub beta_nmse_hub: f64,
    pub scale_err_sd: f64,
    pub scale_err_hub: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub eps: f64,
    pub lse_beta_nmse: f64,
    pub hub_beta_nmse: f64,
    pub sd_scale_err: f64,
    pub hub_scale_err: f64,
    pub trials: usize,
    pub failures: usize,
}

#[derive(Debug, Clone)]
pub struct Trial {
    pub problem: RegressionProblem,
    pub beta: Vec<f64>,
    pub sigma: f64,
}

pub fn trial_rng(master_seed: u64, eps_index: usize, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(((eps_index as u64) << 32) | trial as u64);
    rng
}

/// Draws one contaminated regression problem.
pub fn generate_trial(cfg: &ExperimentConfig, eps: f64, rng: &mut ChaCha8Rng) -> Result<Trial> {
    let (n, p) = (cfg.n, cfg.p);
    let data: Vec<f64> = (0..n * p).map(|_| rng.sample(StandardNormal)).collect();
    let x = DenseMatrix::from_col_major(n, p, data)?;
    let beta: Vec<f64> = (0..p).map(|_| rng.sample(StandardNormal)).collect();
    let noise: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let signal = x.matvec(&beta)?;
    let power = signal.iter().map(|v| v * v).sum::<f64>() / n as f64;
    let sigma = (power / 10f64.powf(cfg.snr_db / 10.0)).sqrt();
    let y: Vec<f64> = signal
        .iter()
        .zip(&noise)
        .map(|(s, e)| {
            let v = s + sigma * e;
            if rng.random::<f64>() < eps {
                -v
            } else {
                v
            }
        })
        .collect();
    Ok(Trial {
        problem: RegressionProblem::new(y, x, false)?,
        beta,
        sigma,
    })
}

fn nmse(est: &[f64], truth: &[f64]) -> f64 {
    let d: Vec<f64> = est.iter().zip(truth).map(|(a, b)| a - b).collect();
    (norm(&d) / norm(truth)).powi(2)
}

fn log_ratio_sq(est: f64, truth: f64) -> f64 {
    (est / truth).log10().powi(2)
}

pub fn run_trial(cfg: &ExperimentConfig, eps_index: usize, trial: usize) -> Result<TrialOutcome> {
    let eps = cfg.eps_grid[eps_index];
    let mut rng = trial_rng(cfg.master_seed, eps_index, trial);
    let t = generate_trial(cfg, eps, &mut rng)?;
    let solver = HubReg::new(&t.problem, cfg.solver_config()?)?;
    let lse = solver.lse()?;
    let rss = t
        .problem
        .residuals(&lse)?
        .iter()
        .map(|r| r * r)
        .sum::<f64>();
    let dof = if cfg.dof_correction {
        cfg.n - cfg.p
    } else {
        cfg.n
    };
    let sd = (rss / dof as f64).sqrt();
    let fit = solver.fit(None)?;
    let out = TrialOutcome {
        eps,
        trial,
        beta_nmse_lse: nmse(&lse, &t.beta),
        beta_nmse_hub: nmse(&fit.beta, &t.beta),
        scale_err_sd: log_ratio_sq(sd, t.sigma),
        scale_err_hub: log_ratio_sq(fit.sigma, t.sigma),
    };
    let finite = [
        out.beta_nmse_lse,
        out.beta_nmse_hub,
        out.scale_err_sd,
        out.scale_err_hub,
    ]
    .iter()
    .all(|v| v.is_finite());
    if !finite {
        return Err(Error::InvalidProblem(format!(
            "non-finite outcome at eps {eps}, trial {trial}"
        )));
    }
    Ok(out)
}

/// Runs every `(eps, trial)` pair and averages per grid point. Failed trials
/// are counted and left out of the means.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<SummaryRow>> {
    cfg.validate()?;
    let jobs: Vec<(usize, usize)> = (0..cfg.eps_grid.len())
        .flat_map(|e| (0..cfg.trials).map(move |t| (e, t)))
        .collect();
    let results: Vec<Result<TrialOutcome>> = jobs
        .par_iter()
        .map(|&(e, t)| run_trial(cfg, e, t))
        .collect();

    let mut rows = Vec::with_capacity(cfg.eps_grid.len());
    for (e, chunk) in results.chunks(cfg.trials).enumerate() {
        let ok: Vec<&TrialOutcome> = chunk.iter().filter_map(|r| r.as_ref().ok()).collect();
        let mean = |f: fn(&TrialOutcome) -> f64| {
            if ok.is_empty() {
                f64::NAN
            } else {
                ok.iter().map(|o| f(o)).sum::<f64>() / ok.len() as f64
            }
        };
        rows.push(SummaryRow {
            eps: cfg.eps_grid[e],
            lse_beta_nmse: mean(|o| o.beta_nmse_lse),
            hub_beta_nmse: mean(|o| o.beta_nmse_hub),
            sd_scale_err: mean(|o| o.scale_err_sd),
            hub_scale_err: mean(|o| o.scale_err_hub),
            trials: cfg.trials,
            failures: chunk.len() - ok.len(),
        });
    }
    Ok(rows)
}

pub fn write_csv_to(rows: &[SummaryRow], mut w: impl Write) -> std::io::Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in rows {
        // `{:?}` prints the shortest representation that round-trips
        writeln!(
            w,
            "{:?},{:?},{:?},{:?},{:?},{},{}",
            r.eps,
            r.lse_beta_nmse,
            r.hub_beta_nmse,
            r.sd_scale_err,
            r.hub_scale_err,
            r.trials,
            r.failures
        )?;
    }
    w.flush()
}

pub fn write_csv(rows: &[SummaryRow], path: &Path) -> Result<()> {
    if rows.is_empty() {
        return Err(Error::InvalidProblem("no rows to write".into()));
    }
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv_to(rows, std::io::BufWriter::new(file)).map_err(|e| Error::io(path, e))
}
