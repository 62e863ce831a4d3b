//! The `safescreen` command line.
//!
//! Each subcommand reads its settings from flags, optionally layered over a
//! `--config` file, and writes its results into `--out`.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use safescreen_core::{
    gaussian_gram, kernelize, linear_gram, verify_safety, Dataset, ErmProblem, ProblemKind,
    SafeLoss, SolverOptions,
};

use crate::config::{parse_config, KernelChoice, RunConfig};
use crate::experiments::{self, RegionPlan};
use crate::{io, report, synth};

#[derive(Debug, Parser)]
#[command(name = "safescreen", version, about = "Safe sample screening for convex ERM")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset and its ground-truth model.
    Gen,
    /// Fit a model.
    Solve,
    /// Build a safe region, screen samples, and optionally verify the result.
    Screen,
    /// Delete samples by screening score versus at random, and refit.
    Compress,
    /// Warm-started regularization path with and without screening.
    Path,
}

/// Every flag can also be given as `key = value` in the config file.
#[derive(Debug, Default, Args)]
pub struct Flags {
    /// `key = value` settings file; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Dataset file.
    #[arg(long, global = true)]
    pub data: Option<String>,
    /// csv | libsvm
    #[arg(long, global = true)]
    pub format: Option<String>,
    /// regression | classification | interval
    #[arg(long, global = true)]
    pub kind: Option<String>,
    /// sreg | safe-logistic | squared-hinge | hinge | huber | square | logistic
    #[arg(long, global = true)]
    pub loss: Option<String>,
    /// Smoothing parameter of the loss; interval half-width for interval data.
    #[arg(long, global = true)]
    pub mu: Option<String>,
    /// l1 | l2sq
    #[arg(long, global = true)]
    pub penalty: Option<String>,
    /// Regularization weight (largest λ of a path).
    #[arg(long, global = true)]
    pub lambda: Option<String>,
    /// Smallest λ of a path.
    #[arg(long = "lambda-min", global = true)]
    pub lambda_min: Option<String>,
    /// Number of λ values on a path.
    #[arg(long, global = true)]
    pub grid: Option<String>,
    /// none | linear | gaussian
    #[arg(long, global = true)]
    pub kernel: Option<String>,
    /// Gaussian kernel bandwidth; for `gen`, the noise standard deviation.
    #[arg(long, global = true)]
    pub sigma: Option<String>,
    /// Ellipsoid-method cuts.
    #[arg(long, global = true)]
    pub steps: Option<String>,
    /// Initial ball radius (default: from the duality gap).
    #[arg(long, global = true)]
    pub radius: Option<String>,
    /// Solver epochs before the region is built.
    #[arg(long = "init-epochs", global = true)]
    pub init_epochs: Option<String>,
    #[arg(long = "max-epochs", global = true)]
    pub max_epochs: Option<String>,
    /// Solver tolerance on the duality gap.
    #[arg(long, global = true)]
    pub tol: Option<String>,
    #[arg(long, global = true)]
    pub seed: Option<String>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<String>,
    /// Check the region against a high-precision solve and refit on the survivors.
    #[arg(long, global = true)]
    pub verify: bool,
    /// Samples to generate.
    #[arg(long, global = true)]
    pub n: Option<String>,
    /// Features to generate.
    #[arg(long, global = true)]
    pub p: Option<String>,
    /// Nonzeros of the generated ground truth.
    #[arg(long, global = true)]
    pub sparsity: Option<String>,
    /// Random-deletion repetitions for `compress`.
    #[arg(long, global = true)]
    pub reps: Option<String>,
    /// Held-out fraction for `compress`.
    #[arg(long = "test-fraction", global = true)]
    pub test_fraction: Option<String>,
}

impl Flags {
    fn to_map(&self) -> BTreeMap<String, String> {
        let pairs = [
            ("data", &self.data),
            ("format", &self.format),
            ("kind", &self.kind),
            ("loss", &self.loss),
            ("mu", &self.mu),
            ("penalty", &self.penalty),
            ("lambda", &self.lambda),
            ("lambda-min", &self.lambda_min),
            ("grid", &self.grid),
            ("kernel", &self.kernel),
            ("sigma", &self.sigma),
            ("steps", &self.steps),
            ("radius", &self.radius),
            ("init-epochs", &self.init_epochs),
            ("max-epochs", &self.max_epochs),
            ("tol", &self.tol),
            ("seed", &self.seed),
            ("out", &self.out),
            ("n", &self.n),
            ("p", &self.p),
            ("sparsity", &self.sparsity),
            ("reps", &self.reps),
            ("test-fraction", &self.test_fraction),
        ];
        let mut m: BTreeMap<String, String> = pairs
            .into_iter()
            .filter_map(|(k, v)| v.as_ref().map(|v| (k.to_string(), v.clone())))
            .collect();
        if self.verify {
            m.insert("verify".into(), "true".into());
        }
        m
    }
}

pub fn resolve_config(flags: &Flags) -> Result<RunConfig> {
    let file = match &flags.config {
        Some(path) => parse_config(&io::load_text(path)?)
            .with_context(|| format!("reading {}", path.display()))?,
        None => BTreeMap::new(),
    };
    Ok(RunConfig::resolve(file, flags.to_map())?)
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args)?;
    let cfg = resolve_config(&cli.flags)?;
    std::fs::create_dir_all(&cfg.out)
        .with_context(|| format!("creating {}", cfg.out.display()))?;
    match cli.command {
        Command::Gen => cmd_gen(&cfg),
        Command::Solve => cmd_solve(&cfg),
        Command::Screen => cmd_screen(&cfg),
        Command::Compress => cmd_compress(&cfg),
        Command::Path => cmd_path(&cfg),
    }
}

fn out_file(cfg: &RunConfig, name: &str) -> PathBuf {
    cfg.out.join(name)
}

fn write_json(path: &Path, v: &serde_json::Value) -> Result<()> {
    io::save_text(path, &report::render(v))?;
    Ok(())
}

fn solver_options(cfg: &RunConfig) -> SolverOptions {
    SolverOptions {
        max_epochs: cfg.max_epochs,
        tol: cfg.tol,
    }
}

fn load(cfg: &RunConfig) -> Result<Dataset> {
    let path = cfg.data_path()?;
    Ok(io::load_dataset(path, cfg.format, cfg.kind, cfg.interval_halfwidth())?)
}

fn build_problem(cfg: &RunConfig, data: Dataset) -> Result<ErmProblem> {
    let loss = SafeLoss::new(cfg.loss, cfg.mu)?;
    let linear = ErmProblem::new(data, loss, cfg.penalty, cfg.lambda)?;
    let gram = match cfg.kernel {
        KernelChoice::None => return Ok(linear),
        KernelChoice::Linear => linear_gram(linear.data())?,
        KernelChoice::Gaussian => gaussian_gram(linear.data(), cfg.sigma)?,
    };
    Ok(kernelize(&linear, &gram)?)
}

fn common_json(cfg: &RunConfig) -> serde_json::Value {
    json!({
        "kind": format!("{:?}", cfg.kind).to_lowercase(),
        "kernel": format!("{:?}", cfg.kernel).to_lowercase(),
        "sigma": if cfg.kernel == KernelChoice::Gaussian { json!(cfg.sigma) } else { json!(null) },
        "seed": cfg.seed,
        "tol": cfg.tol,
    })
}

pub fn cmd_gen(cfg: &RunConfig) -> Result<()> {
    let noise = cfg.sigma;
    let (data, truth) = match cfg.kind {
        ProblemKind::Regression => {
            synth::gen_synthetic_regression(cfg.n, cfg.p, cfg.sparsity, noise, cfg.seed)?
        }
        ProblemKind::Classification => {
            synth::gen_synthetic_classification(cfg.n, cfg.p, cfg.sparsity, noise, cfg.seed)?
        }
        ProblemKind::Interval => {
            let d = synth::gen_interval_dataset(cfg.n, cfg.p, cfg.mu, cfg.seed)?;
            let p = d.p();
            (d, safescreen_core::ModelVector::zeros(p, safescreen_core::Mode::Linear))
        }
    };
    io::save_csv(&data, &out_file(cfg, "data.csv"))?;
    if cfg.kind != ProblemKind::Interval {
        io::save_model(&truth, &out_file(cfg, "truth.txt"))?;
    }
    println!("wrote {} samples × {} features to {}", data.n(), data.p(), cfg.out.display());
    Ok(())
}

pub fn cmd_solve(cfg: &RunConfig) -> Result<()> {
    let problem = build_problem(cfg, load(cfg)?)?;
    let trace = problem.solve(&solver_options(cfg), None)?;
    let objective = problem.primal_objective(trace.solution())?;
    io::save_model(&trace.final_model, &out_file(cfg, "model.txt"))?;
    let extra = json!({
        "n": problem.n(),
        "dim": problem.dim(),
        "loss": cfg.loss.name(),
        "mu": cfg.mu,
        "penalty": cfg.penalty.name(),
        "lambda": cfg.lambda,
        "common": common_json(cfg),
    });
    write_json(&out_file(cfg, "solve.json"), &report::solve_json(&trace, objective, extra))?;
    println!(
        "{} epochs, objective {objective:.6e}, gap {:.3e}, converged {}",
        trace.epochs(),
        trace.final_gap(),
        trace.converged
    );
    Ok(())
}

fn plan(cfg: &RunConfig) -> RegionPlan {
    RegionPlan {
        steps: cfg.steps,
        radius: cfg.radius,
        // an explicit radius is checked, never enlarged
        max_doublings: if cfg.radius.is_some() { 0 } else { RegionPlan::default().max_doublings },
        ..RegionPlan::default()
    }
}

pub fn cmd_screen(cfg: &RunConfig) -> Result<()> {
    let problem = build_problem(cfg, load(cfg)?)?;
    let x0 = experiments::initial_point(&problem, cfg.init_epochs)?;
    let x_ref = if cfg.verify {
        Some(experiments::reference_solution(&problem)?)
    } else {
        None
    };
    let out = experiments::screen_verified(&problem, &x0, &plan(cfg), x_ref.as_deref())?;
    let safety = if cfg.verify && out.containment == Some(true) {
        let opts = SolverOptions {
            max_epochs: experiments::REFERENCE_OPTIONS.max_epochs,
            tol: experiments::REFERENCE_OPTIONS.tol,
        };
        Some(verify_safety(&problem, &out.report.mask, &opts, 1e-6, 1e-4)?)
    } else {
        None
    };
    io::save_mask(&out.report.mask, &out_file(cfg, "mask.txt"))?;
    let extra = json!({
        "init_epochs": cfg.init_epochs,
        "init_gap": problem.duality_gap(&x0)?,
        "radius_used": out.radius,
        "region_builds": out.attempts,
        "radius_certified": cfg.radius.is_none() && experiments::radius_is_certified(&problem),
        "common": common_json(cfg),
    });
    let v = report::screening_json(&out.report, out.containment, safety.as_ref(), extra);
    write_json(&out_file(cfg, "screen.json"), &v)?;
    println!(
        "screened {} of {} samples ({})",
        out.report.n_screened,
        problem.n(),
        v["status"].as_str().unwrap_or("unchecked")
    );
    Ok(())
}

pub fn cmd_compress(cfg: &RunConfig) -> Result<()> {
    if cfg.kernel != KernelChoice::None {
        bail!("compress evaluates held-out error of a linear model; drop --kernel");
    }
    let data = load(cfg)?;
    let n_test = ((data.n() as f64) * cfg.test_fraction).round() as usize;
    let (train, test) = synth::train_test_split(&data, n_test.max(1))?;
    let problem = build_problem(cfg, train)?;
    let x0 = experiments::initial_point(&problem, cfg.init_epochs)?;
    let x_ref = if cfg.verify {
        Some(experiments::reference_solution(&problem)?)
    } else {
        None
    };
    let out = experiments::screen_verified(&problem, &x0, &plan(cfg), x_ref.as_deref())?;
    let fractions: Vec<f64> = (1..=9).map(|i| i as f64 / 10.0).collect();
    let table = experiments::compression_experiment(
        &problem,
        &test,
        &out.region,
        &fractions,
        cfg.reps,
        cfg.seed,
        &solver_options(cfg),
    )?;
    let extra = json!({
        "n_train": problem.n(),
        "n_test": test.n(),
        "containment": out.containment,
        "settings": report::settings_json(&out.report.settings),
        "common": common_json(cfg),
    });
    write_json(&out_file(cfg, "compress.json"), &report::compression_json(&table, extra))?;
    io::save_text(&out_file(cfg, "compress.csv"), &report::compression_csv(&table))?;
    println!("full-data test error {:.6e}", table.full_error);
    Ok(())
}

pub fn cmd_path(cfg: &RunConfig) -> Result<()> {
    let problem = build_problem(cfg, load(cfg)?)?;
    let grid = experiments::log_grid(cfg.lambda, cfg.lambda_min, cfg.grid)?;
    let path = experiments::regularization_path(
        &problem,
        &grid,
        &plan(cfg),
        cfg.init_epochs,
        &solver_options(cfg),
        1e-6,
        1e-4,
    )?;
    let extra = json!({
        "steps": cfg.steps,
        "init_epochs": cfg.init_epochs,
        "loss": cfg.loss.name(),
        "mu": cfg.mu,
        "penalty": cfg.penalty.name(),
        "common": common_json(cfg),
    });
    write_json(&out_file(cfg, "path.json"), &report::path_json(&path, extra))?;
    io::save_text(&out_file(cfg, "path.csv"), &report::path_csv(&path))?;
    println!(
        "cost {:.1} screened vs {:.1} unscreened epoch equivalents",
        path.total_screened, path.total_unscreened
    );
    Ok(())
}
