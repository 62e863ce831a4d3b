//! Sample screening over cut ellipsoids.
//!
//! Over the region `{x : (x − z)ᵀE⁻¹(x − z) ≤ 1, gᵀ(x − z) ≤ 0}` the maximum of
//! `aᵀx − b` has a closed form. Without the cut, or when `gᵀEa < 0`, the cut is
//! inactive and the maximum is `aᵀz + √(aᵀEa) − b`. Otherwise the maximizer
//! lies on the hyperplane `gᵀ(x − z) = 0`: with `ν = gᵀEa / gᵀEg` and
//! `w = a − νg` it is `z + Ew/√(wᵀEw)`, the point of the ellipsoid boundary
//! along `Ew`.
//!
//! A commonly quoted form of this result scales the step by `1/(2γ)` with
//! `γ = (½ wᵀEw)^{½}`, i.e. `Ew/√(2 wᵀEw)`. That point is strictly inside the
//! ellipsoid and under-estimates the maximum by a factor `√2` on the
//! `√(wᵀEw)` term (for `E = I`, `a = e₁`, `g = (1, 1)` it gives `½` instead of
//! the true `1/√2`), which would make the test unsafe. The boundary-normalized
//! form is used here.

use alloc::vec;
use alloc::vec::Vec;

use crate::data::SampleMask;
use crate::ellipsoid::CutRegion;
use crate::erm::{ErmProblem, Penalty, SolverOptions};
use crate::error::{Error, Result};
use crate::linalg::{self, dot};
use crate::losses::{FlatInterval, LossFamily};

/// Samples are discarded only when their certified margin range is at least
/// this far inside the flat interval.
pub const DEFAULT_STRICT_EPS: f64 = 1e-9;

/// Relative threshold below which `wᵀEw` is treated as zero (`a ∥ g`).
const DEGENERACY_EPS: f64 = 1e-12;

/// Precomputed products of a region that are shared by every test.
struct RegionTester<'a> {
    region: &'a CutRegion,
    cut: Option<(&'a [f64], Vec<f64>, f64)>, // (g, Eg, gᵀEg)
}

impl<'a> RegionTester<'a> {
    fn new(region: &'a CutRegion) -> Result<Self> {
        let cut = match &region.halfspace {
            Some(g) => {
                let eg = region.ellipsoid.matvec(g)?;
                let geg = dot(g, &eg);
                if !(geg > 0.0) {
                    return Err(Error::NotPositiveDefinite);
                }
                Some((g.as_slice(), eg, geg))
            }
            None => None,
        };
        Ok(Self { region, cut })
    }

    fn max_linear(&self, a: &[f64], b_off: f64) -> Result<f64> {
        let e = &self.region.ellipsoid;
        let ea = e.matvec(a)?;
        let aea = dot(a, &ea);
        if aea < -DEGENERACY_EPS * e.scale() * dot(a, a) {
            return Err(Error::NotPositiveDefinite);
        }
        let base = dot(a, e.center()) - b_off;
        let unconstrained = base + libm::sqrt(aea.max(0.0));
        let Some((g, eg, geg)) = &self.cut else {
            return Ok(unconstrained);
        };
        let gea = dot(g, &ea);
        if gea < 0.0 {
            return Ok(unconstrained);
        }
        let nu = gea / geg;
        let w: Vec<f64> = a.iter().zip(*g).map(|(ai, gi)| ai - nu * gi).collect();
        let ew: Vec<f64> = ea.iter().zip(eg).map(|(x, y)| x - nu * y).collect();
        let wew = dot(&w, &ew);
        if wew <= DEGENERACY_EPS * e.scale() * dot(a, a) {
            // a is parallel to g and points along it: the cut pins aᵀx to aᵀz.
            return Ok(base);
        }
        Ok(base + dot(a, &ew) / libm::sqrt(wew))
    }
}

/// Exact maximum of `aᵀx − b_off` over `region`.
pub fn max_linear_over_region(a: &[f64], b_off: f64, region: &CutRegion) -> Result<f64> {
    linalg::check_len(region.dim(), a.len())?;
    RegionTester::new(region)?.max_linear(a, b_off)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScreeningSettings {
    pub loss: LossFamily,
    pub mu: f64,
    pub lambda: f64,
    pub penalty: Penalty,
    /// Ellipsoid cuts behind the region.
    pub steps: usize,
    /// Radius of the ball the region started from.
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScreeningReport {
    pub mask: SampleMask,
    pub n_screened: usize,
    pub region_volume_logdet: f64,
    pub settings: ScreeningSettings,
    /// Left at zero here; timed by callers that have a clock.
    pub wall_time_s: f64,
}

fn flat_interval_for(problem: &ErmProblem) -> Result<FlatInterval> {
    problem.loss().flat_interval().map_err(|e| match e {
        Error::NoFlatInterval(f) => Error::UnsafeLoss(f),
        other => other,
    })
}

/// Signed slack of sample `i`'s certified margin range to the flat interval.
fn sample_slack(
    tester: &RegionTester<'_>,
    problem: &ErmProblem,
    flat: &FlatInterval,
    i: usize,
) -> Result<f64> {
    let a = problem.design().row(i);
    let b = problem.data().labels()[i];
    if problem.data().kind().is_classification() {
        // min over the region of b·aᵀx
        let neg: Vec<f64> = a.iter().map(|v| -b * v).collect();
        let lower = -tester.max_linear(&neg, 0.0)?;
        Ok(lower - flat.lo)
    } else {
        let upper = tester.max_linear(a, b)?;
        let neg: Vec<f64> = a.iter().map(|v| -v).collect();
        let lower = -tester.max_linear(&neg, -b)?;
        Ok(flat.slack(lower, upper))
    }
}

fn all_slacks(problem: &ErmProblem, region: &CutRegion) -> Result<Vec<f64>> {
    let flat = flat_interval_for(problem)?;
    linalg::check_len(problem.dim(), region.dim())?;
    let tester = RegionTester::new(region)?;
    let n = problem.n();
    #[cfg(feature = "rayon")]
    {
        use rayon::prelude::*;
        (0..n)
            .into_par_iter()
            .map(|i| sample_slack(&tester, problem, &flat, i))
            .collect()
    }
    #[cfg(not(feature = "rayon"))]
    {
        (0..n)
            .map(|i| sample_slack(&tester, problem, &flat, i))
            .collect()
    }
}

/// The safe rule: discard sample `i` iff its margin stays at least
/// `strict_eps` inside the flat interval for every point of `region`.
pub fn screen(problem: &ErmProblem, region: &CutRegion, strict_eps: f64) -> Result<ScreeningReport> {
    let scores = all_slacks(problem, region)?;
    let keep: Vec<bool> = scores.iter().map(|&s| !(s > strict_eps)).collect();
    let n_screened = keep.iter().filter(|k| !**k).count();
    let e = &region.ellipsoid;
    Ok(ScreeningReport {
        mask: SampleMask { keep, scores },
        n_screened,
        region_volume_logdet: e.log_det().unwrap_or(f64::NEG_INFINITY),
        settings: ScreeningSettings {
            loss: problem.loss().family(),
            mu: problem.loss().mu(),
            lambda: problem.lambda(),
            penalty: problem.penalty(),
            steps: e.rank(),
            radius: e.initial_radius(),
        },
        wall_time_s: 0.0,
    })
}

/// Per-sample screening slack; larger means easier to discard.
pub fn compression_scores(problem: &ErmProblem, region: &CutRegion) -> Result<Vec<f64>> {
    all_slacks(problem, region)
}

/// Sample indices from easiest (largest score) to hardest; ties keep index order.
pub fn compression_order(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&i, &j| scores[j].total_cmp(&scores[i]).then(i.cmp(&j)));
    idx
}

/// Ball around `x` of radius `2Δ/λ`, `Δ` the duality gap at `x`.
pub fn gap_ball_region(problem: &ErmProblem, x: &[f64]) -> Result<CutRegion> {
    if problem.penalty() != Penalty::L2Sq || problem.gram().is_some() {
        return Err(Error::NotStronglyConvex);
    }
    let gap = problem.duality_gap(x)?.max(0.0);
    if !gap.is_finite() {
        return Err(Error::InvalidParameter("duality gap is not finite".into()));
    }
    let radius = 2.0 * gap / problem.lambda();
    let ellipsoid = if radius > 0.0 {
        crate::ellipsoid::Ellipsoid::init_ball(x.to_vec(), radius)?
    } else {
        crate::ellipsoid::Ellipsoid::point(x.to_vec())?
    };
    CutRegion::new(ellipsoid, None)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SafetyCheck {
    /// `|P(x̂_screened) − P(x̂_full)|`, both evaluated on the full problem.
    pub objective_diff: f64,
    /// `‖x̂_screened − x̂_full‖₂` (prediction distance `‖K(α̂_s − α̂)‖₂` in kernel
    /// mode); `None` for L1 where the solution need not be unique.
    pub solution_diff: Option<f64>,
    pub solution_scale: f64,
    pub safe: bool,
}

/// Solves the full and the screened problems and compares them on the full
/// objective. `solution_tol` is relative to `1 + ‖x̂_full‖₂`.
pub fn verify_safety(
    problem: &ErmProblem,
    mask: &SampleMask,
    opts: &SolverOptions,
    objective_tol: f64,
    solution_tol: f64,
) -> Result<SafetyCheck> {
    linalg::check_len(problem.n(), mask.len())?;
    let full = problem.solve(opts, None)?;
    let x_full = full.solution().to_vec();
    let kept = mask.kept_indices();
    let x_screened = if kept.len() == problem.n() {
        x_full.clone()
    } else if kept.is_empty() {
        vec![0.0; problem.dim()]
    } else {
        let sub = problem.subset(&kept)?;
        let trace = sub.solve(opts, None)?;
        problem.embed_subset(&kept, trace.solution())
    };
    let objective_diff =
        (problem.primal_objective(&x_screened)? - problem.primal_objective(&x_full)?).abs();
    let (solution_diff, solution_scale) = match (problem.gram(), problem.penalty()) {
        (Some(k), _) => {
            let ps = k.matvec(&x_screened)?;
            let pf = k.matvec(&x_full)?;
            (Some(linalg::dist2(&ps, &pf)), linalg::norm2(&pf))
        }
        (None, Penalty::L2Sq) => (
            Some(linalg::dist2(&x_screened, &x_full)),
            linalg::norm2(&x_full),
        ),
        (None, Penalty::L1) => (None, linalg::norm2(&x_full)),
    };
    let safe = objective_diff <= objective_tol
        && solution_diff.is_none_or(|d| d <= solution_tol * (1.0 + solution_scale));
    Ok(SafetyCheck {
        objective_diff,
        solution_diff,
        solution_scale,
        safe,
    })
}
