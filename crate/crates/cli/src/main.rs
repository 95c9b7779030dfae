use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use huber_mm::bench::{self, ExperimentConfig};
use huber_mm::dataset;
use huber_mm::denoise::{self, pgm, Dictionary, DictionaryKind, PatchGrid};
use huber_mm::hubreg::HubReg;
use huber_mm::{HuberKernel, RegressionProblem, ScaleNormalization, SolverConfig, SparseCoder};

const DATA_HELP: &str =
    "CSV file: the first column is the response y, the remaining columns are the regressors. \
A non-numeric first row is treated as a header; lines starting with '#' are skipped";

#[derive(Parser)]
#[command(
    name = "hubmm",
    version,
    about = "Robust regression, sparse recovery and denoising with Huber's criterion"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Joint regression and scale estimate; prints beta, sigma, iterations and convergence as CSV
    Hubreg(HubregArgs),
    /// K-sparse fit by iterative hard thresholding; prints nonzero coefficients as index,value rows
    Hubniht(HubnihtArgs),
    /// Denoise a grayscale PGM image by sparse coding of overlapping patches
    Denoise(DenoiseArgs),
    /// Monte-Carlo benchmarks
    #[command(subcommand)]
    Bench(BenchCommand),
}

#[derive(Args)]
struct SolverArgs {
    /// Huber threshold c (1.345 gives 95% efficiency; large values approach least squares)
    #[arg(long, default_value_t = 1.345)]
    c: f64,
    /// Convergence tolerance
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    /// Iteration limit
    #[arg(long = "max-iter", default_value_t = 500)]
    max_iter: usize,
    /// Use unit MM steps instead of adaptive step sizes
    #[arg(long = "no-adaptive")]
    no_adaptive: bool,
}

impl SolverArgs {
    fn config(&self) -> Result<SolverConfig> {
        let kernel = HuberKernel::new(self.c).context("invalid --c")?;
        let cfg = SolverConfig {
            tol: self.tol,
            max_iter: self.max_iter,
            adaptive_steps: !self.no_adaptive,
            ..SolverConfig::with_kernel(kernel)
        };
        cfg.validate().context("invalid --tol or --max-iter")?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct HubregArgs {
    #[arg(long, help = DATA_HELP)]
    data: PathBuf,
    #[command(flatten)]
    solver: SolverArgs,
    /// Prepend an intercept column; beta0 is then the intercept
    #[arg(long)]
    intercept: bool,
    /// Use N - p instead of N in the scale term of the criterion
    #[arg(long = "dof-correction")]
    dof_correction: bool,
    /// Write per-iteration criterion, scale factor and relative step to this CSV file
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct HubnihtArgs {
    #[arg(long, help = DATA_HELP)]
    data: PathBuf,
    /// Sparsity budget K, at most min(N, p)
    #[arg(long)]
    k: usize,
    #[command(flatten)]
    solver: SolverArgs,
    /// Use the columns as given instead of scaling them to unit norm
    #[arg(long = "no-normalize")]
    no_normalize: bool,
}

#[derive(Args)]
struct DenoiseArgs {
    /// Input image (binary P5 or ASCII P2 PGM)
    #[arg(long = "in")]
    input: PathBuf,
    /// Output image, written as binary PGM
    #[arg(long)]
    out: PathBuf,
    /// Atoms per patch
    #[arg(long, default_value_t = 6)]
    k: usize,
    /// Patch side length in pixels
    #[arg(long, default_value_t = 8)]
    patch: usize,
    /// Step between neighbouring patches
    #[arg(long, default_value_t = 2)]
    stride: usize,
    #[command(flatten)]
    solver: SolverArgs,
    /// Dictionary file: a line "d p", then d rows of p numbers (default: DCT + Haar + spikes)
    #[arg(long)]
    dict: Option<PathBuf>,
    /// Corrupt the input first: each pixel becomes black or white with this probability
    #[arg(long = "add-noise", value_name = "EPS")]
    add_noise: Option<f64>,
    /// Corrupt the input first with additive Gaussian noise of this standard deviation
    #[arg(
        long = "gaussian-noise",
        value_name = "SD",
        conflicts_with = "add_noise"
    )]
    gaussian_noise: Option<f64>,
    /// Seed for the noise generator
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Print PSNR of the (noisy) input and of the output against this clean image
    #[arg(long = "report-psnr", value_name = "CLEAN")]
    report_psnr: Option<PathBuf>,
}

#[derive(Subcommand)]
enum BenchCommand {
    /// Estimation error of least squares and the Huber solver versus sign-flip probability
    Fig1(Fig1Args),
}

#[derive(Args)]
struct Fig1Args {
    /// Trials per contamination level
    #[arg(long, default_value_t = 200)]
    trials: usize,
    /// Master seed
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Output CSV path
    #[arg(long, default_value = "results.csv")]
    out: PathBuf,
    /// Huber threshold c
    #[arg(long, default_value_t = 1.345)]
    c: f64,
    /// Observations per trial
    #[arg(long, default_value_t = 500)]
    n: usize,
    /// Regressors per trial
    #[arg(long, default_value_t = 250)]
    p: usize,
    /// Signal-to-noise ratio in dB
    #[arg(long = "snr-db", default_value_t = 20.0)]
    snr_db: f64,
    /// Use N instead of N - p when estimating scales
    #[arg(long = "no-dof-correction")]
    no_dof_correction: bool,
}

fn read_problem(path: &Path) -> Result<dataset::Dataset> {
    dataset::read_csv(path).with_context(|| format!("reading --data {}", path.display()))
}

fn hubreg(a: HubregArgs) -> Result<()> {
    let mut cfg = a.solver.config()?;
    cfg.record_trace = a.trace.is_some();
    if a.dof_correction {
        cfg.normalization = ScaleNormalization::DegreesOfFreedom;
    }
    let data = read_problem(&a.data)?;
    let prob = RegressionProblem::new(data.y, data.x, a.intercept)
        .with_context(|| format!("building the regression from {}", a.data.display()))?;
    let solver = HubReg::new(&prob, cfg).context("factorizing the design matrix")?;
    let res = solver.fit(None).context("fitting")?;

    if let (Some(path), Some(trace)) = (&a.trace, &res.trace) {
        let mut s = String::from("iteration,criterion,scale_factor,relative_step\n");
        for (i, t) in trace.iter().enumerate() {
            s.push_str(&format!(
                "{},{:?},{:?},{:?}\n",
                i + 1,
                t.criterion,
                t.scale_factor,
                t.relative_step
            ));
        }
        std::fs::write(path, s).with_context(|| format!("writing --trace {}", path.display()))?;
    }

    let mut out = std::io::stdout().lock();
    writeln!(out, "param,value")?;
    for (i, b) in res.beta.iter().enumerate() {
        writeln!(out, "beta{i},{b:?}")?;
    }
    writeln!(out, "sigma,{:?}", res.sigma)?;
    writeln!(out, "iterations,{}", res.iterations)?;
    writeln!(out, "converged,{}", res.converged)?;
    Ok(())
}

fn hubniht(a: HubnihtArgs) -> Result<()> {
    let cfg = a.solver.config()?;
    let data = read_problem(&a.data)?;
    let coder = SparseCoder::new(&data.x, a.k, !a.no_normalize, cfg)
        .context("invalid --k or dictionary columns")?;
    let m = coder.fit(&data.y).context("fitting")?;
    let mut out = std::io::stdout().lock();
    writeln!(out, "index,value")?;
    for &j in &m.support {
        writeln!(out, "{j},{:?}", m.beta[j])?;
    }
    writeln!(out, "sigma,{:?}", m.sigma)?;
    writeln!(out, "iterations,{}", m.iterations)?;
    writeln!(out, "converged,{}", m.converged)?;
    Ok(())
}

fn denoise_cmd(a: DenoiseArgs) -> Result<()> {
    let cfg = a.solver.config()?;
    let img = pgm::read(&a.input).with_context(|| format!("reading --in {}", a.input.display()))?;
    let dict =
        match &a.dict {
            Some(p) => Dictionary::from_file(p)
                .with_context(|| format!("reading --dict {}", p.display()))?,
            None => Dictionary::build(a.patch, DictionaryKind::DctHaarSpike)
                .context("invalid --patch")?,
        };
    let grid = PatchGrid::new(a.patch, a.stride).context("invalid --patch or --stride")?;
    let noisy = match (a.add_noise, a.gaussian_noise) {
        (Some(eps), _) => {
            denoise::add_impulsive_noise(&img, eps, a.seed).context("invalid --add-noise")?
        }
        (_, Some(sd)) => {
            denoise::add_gaussian_noise(&img, sd, a.seed).context("invalid --gaussian-noise")?
        }
        _ => img,
    };
    let out = denoise::denoise_image(&noisy, &dict, &grid, a.k, &cfg).context("denoising")?;
    pgm::write(&out, &a.out).with_context(|| format!("writing --out {}", a.out.display()))?;
    if let Some(clean_path) = &a.report_psnr {
        let clean = pgm::read(clean_path)
            .with_context(|| format!("reading --report-psnr {}", clean_path.display()))?;
        let before = denoise::psnr(&noisy, &clean).context("comparing with --report-psnr")?;
        let after = denoise::psnr(&out, &clean).context("comparing with --report-psnr")?;
        println!("PSNR noisy: {before:.4} dB");
        println!("PSNR denoised: {after:.4} dB");
    }
    Ok(())
}

fn fig1(a: Fig1Args) -> Result<()> {
    let cfg = ExperimentConfig {
        n: a.n,
        p: a.p,
        snr_db: a.snr_db,
        c: a.c,
        trials: a.trials,
        master_seed: a.seed,
        dof_correction: !a.no_dof_correction,
        ..ExperimentConfig::default()
    };
    cfg.validate().context("invalid benchmark flags")?;
    eprintln!("generator: {}", bench::GENERATOR_ID);
    eprintln!(
        "running {} contamination levels x {} trials (N = {}, p = {})",
        cfg.eps_grid.len(),
        cfg.trials,
        cfg.n,
        cfg.p
    );
    let rows = bench::run_experiment(&cfg).context("running the experiment")?;
    bench::write_csv(&rows, &a.out)
        .with_context(|| format!("writing --out {}", a.out.display()))?;
    let failures: usize = rows.iter().map(|r| r.failures).sum();
    eprintln!("wrote {} ({failures} failed trials)", a.out.display());
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let solver = err
        .chain()
        .filter_map(|e| e.downcast_ref::<huber_mm::Error>())
        .any(huber_mm::Error::is_solver_failure);
    if solver {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let res = match cli.command {
        Command::Hubreg(a) => hubreg(a),
        Command::Hubniht(a) => hubniht(a),
        Command::Denoise(a) => denoise_cmd(a),
        Command::Bench(BenchCommand::Fig1(a)) => fig1(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
