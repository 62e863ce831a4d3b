//! Experiment drivers: screening with an a-posteriori verified region,
//! dataset compression and regularization paths.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use safescreen_core::{
    build_region, compression_order, compression_scores, linalg, screen, CutRegion, Dataset,
    ErmProblem, Error, Penalty, Result, SampleMask, ScreeningReport, SolverOptions,
    DEFAULT_STRICT_EPS,
};

/// Solver settings used for reference solutions.
pub const REFERENCE_OPTIONS: SolverOptions = SolverOptions {
    max_epochs: 200_000,
    tol: 1e-11,
};

/// Relative slack allowed when checking that a reference solution lies in a
/// region; the reference is itself only accurate to the solver tolerance.
pub const CONTAINMENT_TOL: f64 = 1e-9;

pub fn reference_solution(problem: &ErmProblem) -> Result<Vec<f64>> {
    Ok(problem.solve(&REFERENCE_OPTIONS, None)?.solution().to_vec())
}

/// Runs `epochs` solver epochs from zero, as the initialization phase of a
/// screening run.
pub fn initial_point(problem: &ErmProblem, epochs: usize) -> Result<Vec<f64>> {
    let opts = SolverOptions {
        max_epochs: epochs,
        tol: 0.0,
    };
    Ok(problem.solve(&opts, None)?.solution().to_vec())
}

/// Radius of a ball around `x0` meant to contain the optimum.
///
/// For a linear model with the L2sq penalty the objective is `λ`-strongly
/// convex, so `‖x0 − x⋆‖² ≤ 2Δ/λ` with `Δ` the duality gap; this radius is a
/// certificate. In kernel mode the penalty `λαᵀKα` is `2λ·λ_min(K)`-strongly
/// convex in `α`, with `λ_min` only estimated. With the L1 penalty there is no
/// strong convexity and the same formula is merely a starting guess. The
/// last two cases must be confirmed with [`screen_verified`].
pub fn gap_radius(problem: &ErmProblem, x0: &[f64]) -> Result<f64> {
    let gap = problem.duality_gap(x0)?.max(0.0);
    if !gap.is_finite() {
        return Err(Error::InvalidParameter("duality gap is not finite at x0".into()));
    }
    let lambda = problem.lambda();
    let r = match problem.gram() {
        Some(k) => {
            let lmin = k.min_eigenvalue_estimate(500);
            if lmin > 0.0 {
                (gap / (lambda * lmin)).sqrt()
            } else {
                (2.0 * gap / lambda).sqrt()
            }
        }
        None => (2.0 * gap / lambda).sqrt(),
    };
    // a ball needs a positive radius
    Ok(r.max(1e-12 * (1.0 + linalg::norm2(x0))))
}

pub fn radius_is_certified(problem: &ErmProblem) -> bool {
    problem.penalty() == Penalty::L2Sq && problem.gram().is_none()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionPlan {
    pub steps: usize,
    /// Initial radius; `None` uses [`gap_radius`].
    pub radius: Option<f64>,
    /// How many times the radius may double while the reference solution
    /// falls outside the region.
    pub max_doublings: usize,
    pub strict_eps: f64,
}

impl Default for RegionPlan {
    fn default() -> Self {
        Self {
            steps: 10,
            radius: None,
            max_doublings: 60,
            strict_eps: DEFAULT_STRICT_EPS,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScreenOutcome {
    pub report: ScreeningReport,
    pub region: CutRegion,
    pub radius: f64,
    /// Regions built, including rejected ones.
    pub attempts: usize,
    /// `None` when no reference solution was given.
    pub containment: Option<bool>,
}

/// Builds the region around `x0` and screens. With `x_ref`, the region is
/// rebuilt with a doubled radius until it contains `x_ref`; if that never
/// happens the outcome has `containment = Some(false)` and its mask keeps
/// every sample.
pub fn screen_verified(
    problem: &ErmProblem,
    x0: &[f64],
    plan: &RegionPlan,
    x_ref: Option<&[f64]>,
) -> Result<ScreenOutcome> {
    let start = Instant::now();
    let mut radius = match plan.radius {
        Some(r) => r,
        None => gap_radius(problem, x0)?,
    };
    let mut attempts = 0;
    loop {
        attempts += 1;
        let region = build_region(problem, x0, radius, plan.steps)?;
        let contained = match x_ref {
            Some(x) => Some(region.verify_containment(x, CONTAINMENT_TOL)?),
            None => None,
        };
        let give_up = attempts > plan.max_doublings;
        if contained != Some(false) || give_up {
            let mut report = screen(problem, &region, plan.strict_eps)?;
            if contained == Some(false) {
                report.mask.keep.iter_mut().for_each(|k| *k = true);
                report.n_screened = 0;
            }
            report.wall_time_s = start.elapsed().as_secs_f64();
            return Ok(ScreenOutcome {
                report,
                region,
                radius,
                attempts,
                containment: contained,
            });
        }
        radius *= 2.0;
    }
}

/// Solves the problem restricted to the kept samples of `mask`, warm-started
/// from `x0` if given, and lifts the result back to the full variable.
pub fn solve_screened(
    problem: &ErmProblem,
    mask: &SampleMask,
    opts: &SolverOptions,
    x0: Option<&[f64]>,
) -> Result<(Vec<f64>, usize)> {
    let kept = mask.kept_indices();
    if kept.len() == problem.n() {
        let trace = problem.solve(opts, x0)?;
        return Ok((trace.solution().to_vec(), trace.epochs()));
    }
    if kept.is_empty() {
        return Ok((vec![0.0; problem.dim()], 0));
    }
    let sub = problem.subset(&kept)?;
    let start = x0.map(|x| restrict(problem, &kept, x));
    let trace = sub.solve(opts, start.as_deref())?;
    Ok((problem.embed_subset(&kept, trace.solution()), trace.epochs()))
}

fn restrict(problem: &ErmProblem, kept: &[usize], x: &[f64]) -> Vec<f64> {
    match problem.gram() {
        Some(_) => kept.iter().map(|&i| x[i]).collect(),
        None => x.to_vec(),
    }
}

/// Held-out error: mean squared error for regression, distance to the
/// interval squared for interval data, misclassification rate otherwise.
pub fn test_error(problem: &ErmProblem, x: &[f64], test: &Dataset) -> Result<f64> {
    if problem.gram().is_some() {
        return Err(Error::InvalidParameter(
            "held-out error needs a linear model".into(),
        ));
    }
    let pred = test.features().matvec(x)?;
    let n = test.n() as f64;
    let labels = test.labels();
    let err = match test.kind() {
        safescreen_core::ProblemKind::Regression => pred
            .iter()
            .zip(labels)
            .map(|(p, b)| (p - b) * (p - b))
            .sum::<f64>(),
        safescreen_core::ProblemKind::Interval => {
            let h = test.interval_halfwidth().unwrap_or(0.0);
            pred.iter()
                .zip(labels)
                .map(|(p, b)| ((p - b).abs() - h).max(0.0).powi(2))
                .sum::<f64>()
        }
        safescreen_core::ProblemKind::Classification => pred
            .iter()
            .zip(labels)
            .filter(|(p, b)| **p * **b <= 0.0)
            .count() as f64,
    };
    Ok(err / n)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompressionRow {
    /// Fraction of training samples deleted.
    pub fraction: f64,
    pub n_kept: usize,
    pub screened_error: f64,
    /// One entry per repetition of random deletion.
    pub random_errors: Vec<f64>,
}

impl CompressionRow {
    pub fn random_mean(&self) -> f64 {
        self.random_errors.iter().sum::<f64>() / self.random_errors.len().max(1) as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompressionTable {
    pub full_error: f64,
    /// Samples the region alone certifies as removable.
    pub n_screened: usize,
    pub rows: Vec<CompressionRow>,
}

/// Deletes training samples by decreasing screening score and, as a
/// baseline, uniformly at random (`repetitions` draws seeded from `seed`),
/// refitting on the remaining samples each time.
pub fn compression_experiment(
    problem: &ErmProblem,
    test: &Dataset,
    region: &CutRegion,
    fractions: &[f64],
    repetitions: usize,
    seed: u64,
    opts: &SolverOptions,
) -> Result<CompressionTable> {
    let n = problem.n();
    let scores = compression_scores(problem, region)?;
    let order = compression_order(&scores);
    let n_screened = scores.iter().filter(|&&s| s > DEFAULT_STRICT_EPS).count();
    let full = problem.solve(opts, None)?;
    let full_error = test_error(problem, full.solution(), test)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(fractions.len());
    for &fraction in fractions {
        if !(0.0..1.0).contains(&fraction) {
            return Err(Error::InvalidParameter(format!(
                "deletion fraction must be in [0, 1), got {fraction}"
            )));
        }
        let n_delete = (fraction * n as f64).round() as usize;
        let mut kept: Vec<usize> = order[n_delete..].to_vec();
        kept.sort_unstable();
        let screened_error = refit_error(problem, &kept, test, opts)?;
        let mut random_errors = Vec::with_capacity(repetitions);
        for _ in 0..repetitions {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.shuffle(&mut rng);
            let mut kept = idx[n_delete..].to_vec();
            kept.sort_unstable();
            random_errors.push(refit_error(problem, &kept, test, opts)?);
        }
        rows.push(CompressionRow {
            fraction,
            n_kept: n - n_delete,
            screened_error,
            random_errors,
        });
    }
    Ok(CompressionTable {
        full_error,
        n_screened,
        rows,
    })
}

fn refit_error(
    problem: &ErmProblem,
    kept: &[usize],
    test: &Dataset,
    opts: &SolverOptions,
) -> Result<f64> {
    let x = if kept.len() == problem.n() {
        problem.solve(opts, None)?.solution().to_vec()
    } else {
        let sub = problem.subset(kept)?;
        problem.embed_subset(kept, sub.solve(opts, None)?.solution())
    };
    test_error(problem, &x, test)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathPoint {
    pub lambda: f64,
    pub epochs_unscreened: usize,
    pub epochs_screened: usize,
    pub n_kept: usize,
    /// Regions built at this point (0 when no screening ran).
    pub region_builds: usize,
    pub cost_unscreened: f64,
    pub cost_screened: f64,
    pub objective_diff: f64,
    pub solution_diff: Option<f64>,
    pub containment: Option<bool>,
    pub safe: bool,
}

struct ScreenedFit {
    x: Vec<f64>,
    epochs: usize,
    n_kept: usize,
    builds: usize,
    containment: Option<bool>,
    cost: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathReport {
    pub points: Vec<PathPoint>,
    pub total_unscreened: f64,
    pub total_screened: f64,
}

/// `n` values from `hi` down to `lo`, evenly spaced in log scale.
pub fn log_grid(hi: f64, lo: f64, n: usize) -> Result<Vec<f64>> {
    if !(hi > 0.0 && lo > 0.0 && hi.is_finite() && lo.is_finite()) || n == 0 {
        return Err(Error::InvalidParameter(format!(
            "bad λ grid: hi={hi}, lo={lo}, n={n}"
        )));
    }
    if n == 1 {
        return Ok(vec![hi]);
    }
    let (a, b) = (hi.ln(), lo.ln());
    Ok((0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect())
}

/// Warm-started regularization path, with and without screening.
///
/// At every `λ` after the first, the screened arm runs up to `init_epochs`
/// epochs on all samples from the warm start, builds a region around the
/// result, and finishes the fit on the surviving samples only.
///
/// Costs are in epoch equivalents (passes over the full data): a fit of `T`
/// epochs on `s` of `n` samples costs `T·s/n`; building a region of `k` cuts
/// costs `k`, plus one pass for the duality gap that sets its radius. Every
/// screened point is checked against the unscreened solution at the same
/// `λ`; for radii that are not certificates the region is additionally
/// verified against that solution.
pub fn regularization_path(
    problem: &ErmProblem,
    lambdas: &[f64],
    plan: &RegionPlan,
    init_epochs: usize,
    opts: &SolverOptions,
    objective_tol: f64,
    solution_tol: f64,
) -> Result<PathReport> {
    let n = problem.n() as f64;
    let mut points = Vec::with_capacity(lambdas.len());
    let mut warm_u: Option<Vec<f64>> = None;
    let mut warm_s: Option<Vec<f64>> = None;
    for &lambda in lambdas {
        let pb = problem.with_lambda(lambda)?;
        let trace = pb.solve(opts, warm_u.as_deref())?;
        let x_u = trace.solution().to_vec();
        let epochs_u = trace.epochs();

        let mut screened = ScreenedFit {
            x: x_u.clone(),
            epochs: epochs_u,
            n_kept: pb.n(),
            builds: 0,
            containment: None,
            cost: epochs_u as f64,
        };
        if let Some(warm) = &warm_s {
            let init_opts = SolverOptions {
                max_epochs: init_epochs,
                tol: opts.tol,
            };
            let init = pb.solve(&init_opts, Some(warm))?;
            let x0 = init.solution().to_vec();
            if init.converged {
                screened = ScreenedFit {
                    x: x0,
                    epochs: init.epochs(),
                    n_kept: pb.n(),
                    builds: 0,
                    containment: None,
                    cost: init.epochs() as f64,
                };
            } else {
                let x_ref = (!radius_is_certified(&pb)).then_some(x_u.as_slice());
                let out = screen_verified(&pb, &x0, plan, x_ref)?;
                let kept = out.report.mask.kept_indices().len();
                let (x, epochs) = solve_screened(&pb, &out.report.mask, opts, Some(&x0))?;
                screened = ScreenedFit {
                    x,
                    epochs: init.epochs() + epochs,
                    n_kept: kept,
                    builds: out.attempts,
                    containment: out.containment,
                    cost: init.epochs() as f64
                        + (out.attempts * plan.steps + 1) as f64
                        + epochs as f64 * kept as f64 / n,
                };
            }
        }
        let x_s = screened.x;
        let objective_diff = (pb.primal_objective(&x_s)? - pb.primal_objective(&x_u)?).abs();
        let solution_diff = match (pb.penalty(), pb.gram()) {
            (Penalty::L2Sq, None) => Some(linalg::dist2(&x_s, &x_u)),
            _ => None,
        };
        let safe = screened.containment != Some(false)
            && objective_diff <= objective_tol
            && solution_diff.is_none_or(|d| d <= solution_tol * (1.0 + linalg::norm2(&x_u)));
        points.push(PathPoint {
            lambda,
            epochs_unscreened: epochs_u,
            epochs_screened: screened.epochs,
            n_kept: screened.n_kept,
            region_builds: screened.builds,
            cost_unscreened: epochs_u as f64,
            cost_screened: screened.cost,
            objective_diff,
            solution_diff,
            containment: screened.containment,
            safe,
        });
        warm_u = Some(x_u);
        warm_s = Some(x_s);
    }
    let total_unscreened = points.iter().map(|p| p.cost_unscreened).sum();
    let total_screened = points.iter().map(|p| p.cost_screened).sum();
    Ok(PathReport {
        points,
        total_unscreened,
        total_screened,
    })
}
