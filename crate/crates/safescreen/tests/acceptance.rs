//! Acceptance suite. Prints one line per criterion and exits non-zero if any
//! fails.

use std::time::Instant;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use safescreen::experiments::{
    compression_experiment, initial_point, log_grid, radius_is_certified, reference_solution,
    regularization_path, screen_verified, RegionPlan, REFERENCE_OPTIONS,
};
use safescreen::synth::{gen_synthetic_classification, gen_synthetic_regression, train_test_split};
use safescreen_core::losses::infconv_oracle;
use safescreen_core::{
    gap_ball_region, gaussian_gram, kernelize, linear_gram, linalg, max_linear_over_region, screen,
    verify_safety, CutRegion, Dataset, Ellipsoid, ErmProblem, LossFamily, Penalty, SafeLoss,
    SolverOptions, DEFAULT_STRICT_EPS,
};

type Outcome = Result<(bool, String), Box<dyn std::error::Error>>;
type Criterion = fn() -> Outcome;

const OBJ_TOL: f64 = 1e-6;
const SOL_TOL: f64 = 1e-4;
const VERIFY: SolverOptions = SolverOptions {
    max_epochs: 200_000,
    tol: 1e-10,
};

fn data_for(family: LossFamily, n: usize, p: usize, sparsity: usize, seed: u64) -> Dataset {
    if family.is_classification() {
        gen_synthetic_classification(n, p, sparsity, 0.1, seed).unwrap().0
    } else {
        gen_synthetic_regression(n, p, sparsity, 0.1, seed).unwrap().0
    }
}

/// Screens with the default plan after `init` epochs; non-certified radii are
/// verified against the reference solution.
fn screen_and_check(pb: &ErmProblem, init: usize, steps: usize) -> Result<(usize, bool), Box<dyn std::error::Error>> {
    let x0 = initial_point(pb, init)?;
    let x_ref = (!radius_is_certified(pb)).then(|| reference_solution(pb)).transpose()?;
    let plan = RegionPlan { steps, ..Default::default() };
    let out = screen_verified(pb, &x0, &plan, x_ref.as_deref())?;
    let check = verify_safety(pb, &out.report.mask, &VERIFY, OBJ_TOL, SOL_TOL)?;
    Ok((out.report.n_screened, check.safe && out.containment != Some(false)))
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let setups = [
        (LossFamily::ScreeningFriendlyRegression, Penalty::L1),
        (LossFamily::ScreeningFriendlyRegression, Penalty::L2Sq),
        (LossFamily::SafeLogistic, Penalty::L1),
        (LossFamily::SquaredHinge, Penalty::L2Sq),
    ];
    let (mut discarding, mut safe) = (0, 0);
    for (family, penalty) in setups {
        for seed in 0..5 {
            let data = data_for(family, 200, 20, 5, seed);
            let pb = ErmProblem::new(data, SafeLoss::new(family, 0.5)?, penalty, 0.01)?;
            let (n_screened, ok) = screen_and_check(&pb, 20, 10)?;
            discarding += usize::from(n_screened > 0);
            safe += usize::from(ok);
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Ok((
        discarding >= 15 && safe == 20 && secs < 60.0,
        format!("{discarding}/20 discard, {safe}/20 safe, {secs:.1}s"),
    ))
}

/// `max aᵀx − b` over the cut ellipsoid by projected gradient ascent on the
/// whitened half-ball `{‖u‖ ≤ 1, hᵀu ≤ 0}`, `x = z + E^{1/2}u`.
fn brute_force(a: &[f64], b: f64, region: &CutRegion) -> f64 {
    let e = region.ellipsoid.dense();
    let eig = SymmetricEigen::new(DMatrix::from_row_slice(e.rows(), e.cols(), e.as_slice()));
    let root = &eig.eigenvectors
        * DMatrix::from_diagonal(&eig.eigenvalues.map(f64::sqrt))
        * eig.eigenvectors.transpose();
    let av = DVector::from_column_slice(a);
    let c = &root * &av;
    let h = region.halfspace.as_ref().map(|g| &root * DVector::from_column_slice(g));
    let mut u = DVector::zeros(a.len());
    let step = 0.5 / c.norm().max(1e-300);
    for _ in 0..20_000 {
        let mut next = &u + &c * step;
        if let Some(h) = &h {
            let s = h.dot(&next);
            if s > 0.0 {
                next -= h * (s / h.dot(h));
            }
        }
        let norm = next.norm();
        if norm > 1.0 {
            next /= norm;
        }
        let moved = (&next - &u).norm();
        u = next;
        if moved < 1e-15 {
            break;
        }
    }
    av.dot(&DVector::from_column_slice(region.ellipsoid.center())) + c.dot(&u) - b
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    // the boundary-normalization example: max x₁ over the unit half-disc x₁ + x₂ ≤ 0
    let example = CutRegion::new(Ellipsoid::init_ball(vec![0.0, 0.0], 1.0)?, Some(vec![1.0, 1.0]))?;
    let got = max_linear_over_region(&[1.0, 0.0], 0.0, &example)?;
    let example_ok = (got - std::f64::consts::FRAC_1_SQRT_2).abs() <= 1e-5
        && (brute_force(&[1.0, 0.0], 0.0, &example) - got).abs() <= 1e-5;
    cases += 1;
    while cases < 500 {
        let p = rng.random_range(2..=10);
        let z: Vec<f64> = (0..p).map(|_| rng.random_range(-2.0..2.0)).collect();
        let mut e = Ellipsoid::init_ball(z, rng.random_range(0.3..3.0))?;
        for _ in 0..rng.random_range(0..2 * p) {
            let g: Vec<f64> = (0..p).map(|_| rng.random_range(-1.0..1.0)).collect();
            e = e.step(&g)?;
        }
        let g: Vec<f64> = (0..p).map(|_| rng.random_range(-1.0..1.0)).collect();
        let region = CutRegion::new(e, rng.random_bool(0.8).then_some(g))?;
        let a: Vec<f64> = (0..p).map(|_| rng.random_range(-2.0..2.0)).collect();
        let b = rng.random_range(-1.0..1.0);
        let diff = (max_linear_over_region(&a, b, &region)? - brute_force(&a, b, &region)).abs();
        worst = worst.max(diff);
        cases += 1;
    }
    let secs = start.elapsed().as_secs_f64();
    Ok((
        example_ok && worst <= 1e-5 && secs < 30.0,
        format!("{cases} cases, max error {worst:.1e}, 1/sqrt(2) example {example_ok}, {secs:.1}s"),
    ))
}

fn ind(ok: bool) -> f64 {
    if ok {
        0.0
    } else {
        f64::INFINITY
    }
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    let families = [
        LossFamily::Huber,
        LossFamily::Hinge,
        LossFamily::SquaredHinge,
        LossFamily::ScreeningFriendlyRegression,
        LossFamily::SafeLogistic,
    ];
    for family in families {
        for _ in 0..100 {
            let mu = match family {
                LossFamily::Huber | LossFamily::ScreeningFriendlyRegression => rng.random_range(0.05..2.0),
                _ => rng.random_range(0.05..0.95),
            };
            let t = rng.random_range(-3.0..3.0);
            let (w, h) = (8.0, 1e-2);
            let want = match family {
                LossFamily::Huber => infconv_oracle(f64::abs, |s| 0.5 * s * s, mu, t, w, h),
                LossFamily::Hinge => infconv_oracle(|z| 0.5 * (1.0 - z).abs(), |s| ind(s >= -1.0), mu, t, w, h),
                LossFamily::SquaredHinge => {
                    infconv_oracle(|z| (1.0 - z) * (1.0 - z), |s| ind(s >= -1.0), mu, t, w, h)
                }
                LossFamily::ScreeningFriendlyRegression => {
                    infconv_oracle(|z| 0.5 * z * z, |s| ind(s.abs() <= 1.0), mu, t, w, h)
                }
                _ => infconv_oracle(
                    |z| if z <= 1.0 { (z - 1.0).exp() - z } else { 0.0 },
                    |s| ind(s >= -1.0),
                    mu,
                    t,
                    w,
                    h,
                ),
            };
            worst = worst.max((SafeLoss::new(family, mu)?.eval(t) - want).abs());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Ok((worst <= 1e-6 && secs < 10.0, format!("500 evaluations, max error {worst:.1e}, {secs:.1}s")))
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let unit = |rng: &mut ChaCha8Rng, p: usize| -> Vec<f64> {
        let v: Vec<f64> = (0..p).map(|_| rng.random_range(-1.0..1.0)).collect();
        let n = linalg::norm2(&v);
        v.into_iter().map(|x| x / n).collect()
    };
    let mut worst: f64 = 0.0;
    for p in [2usize, 5, 10, 20] {
        let pf = p as f64;
        let law = 0.5 * (pf * (pf * pf / (pf * pf - 1.0)).ln() + ((pf - 1.0) / (pf + 1.0)).ln());
        let mut e = Ellipsoid::init_ball(vec![0.0; p], 1.0)?;
        let mut prev = e.log_det()?;
        for _ in 0..25 {
            e = e.step(&unit(&mut rng, p))?;
            let now = e.log_det()?;
            worst = worst.max((0.5 * (now - prev) - law).abs());
            prev = now;
        }
    }
    // points of the cut half-ellipsoid stay in the next ellipsoid
    let mut violations = 0;
    let mut total = 0;
    while total < 100_000 {
        let p = rng.random_range(2..=8);
        let mut e = Ellipsoid::init_ball(vec![0.0; p], 2.0)?;
        for _ in 0..3 {
            e = e.step(&unit(&mut rng, p))?;
        }
        let g = unit(&mut rng, p);
        let next = e.step(&g)?;
        let region = CutRegion::new(e.clone(), Some(g))?;
        for _ in 0..1000 {
            let d = unit(&mut rng, p);
            let ed = e.matvec(&d)?;
            let r = rng.random::<f64>().powf(1.0 / p as f64) / e.quad_form(&d)?.sqrt();
            let x: Vec<f64> = e.center().iter().zip(&ed).map(|(z, v)| z + r * v).collect();
            if !region.verify_containment(&x, 0.0)? {
                continue;
            }
            total += 1;
            if next.mahalanobis_sq(&x)? > 1.0 + 1e-9 {
                violations += 1;
            }
        }
    }
    Ok((
        worst <= 1e-9 && violations == 0,
        format!("volume law max error {worst:.1e}, {violations} violations in {total} points"),
    ))
}

fn criterion_5() -> Outcome {
    let tol = 1e-8;
    let opts = SolverOptions { max_epochs: 100_000, tol };
    let mut nonzero = 0;
    let mut checked = 0;
    let mut worst_link: f64 = 0.0;
    for (family, penalty) in [
        (LossFamily::ScreeningFriendlyRegression, Penalty::L1),
        (LossFamily::ScreeningFriendlyRegression, Penalty::L2Sq),
        (LossFamily::SafeLogistic, Penalty::L2Sq),
        (LossFamily::SquaredHinge, Penalty::L2Sq),
    ] {
        for seed in 0..3 {
            let pb = ErmProblem::new(data_for(family, 200, 20, 5, seed), SafeLoss::new(family, 0.5)?, penalty, 0.01)?;
            let x = pb.solve(&opts, None)?.solution().to_vec();
            let t = pb.margins(&x)?;
            let nu = pb.dual_from_primal(&x)?;
            let flat = pb.loss().flat_interval()?;
            for (ti, vi) in t.iter().zip(&nu) {
                if ti - flat.lo >= 10.0 * tol && flat.hi - ti >= 10.0 * tol {
                    checked += 1;
                    nonzero += usize::from(*vi != 0.0);
                }
            }
            if let Some(link) = pb.kkt_residual(&x, &nu)? {
                worst_link = worst_link.max(link);
            }
        }
    }
    Ok((
        checked > 0 && nonzero == 0 && worst_link <= 10.0 * tol,
        format!("{nonzero} nonzero of {checked} interior duals, max link residual {worst_link:.1e}"),
    ))
}

fn criterion_6() -> Outcome {
    let (init, steps) = (40, 10);
    let mut worst: f64 = 0.0;
    let mut all_safe = true;
    for seed in 0..3 {
        let data = gen_synthetic_classification(500, 30, 10, 0.1, seed)?.0;
        let pb = ErmProblem::new(data, SafeLoss::new(LossFamily::SquaredHinge, 0.5)?, Penalty::L2Sq, 0.01)?;
        let x0 = initial_point(&pb, init)?;
        let plan = RegionPlan { steps, ..Default::default() };
        let ell = screen_verified(&pb, &x0, &plan, None)?;
        // the gap ball gets the cut budget as extra solver epochs
        let gb = screen(&pb, &gap_ball_region(&pb, &initial_point(&pb, init + steps)?)?, DEFAULT_STRICT_EPS)?;
        let n = pb.n() as f64;
        worst = worst.max((ell.report.n_screened as f64 / n - gb.n_screened as f64 / n).abs());
        all_safe &= verify_safety(&pb, &ell.report.mask, &VERIFY, OBJ_TOL, SOL_TOL)?.safe;
        all_safe &= verify_safety(&pb, &gb.mask, &VERIFY, OBJ_TOL, SOL_TOL)?.safe;
    }
    Ok((worst <= 0.15 && all_safe, format!("max fraction difference {worst:.3}, both safe {all_safe}")))
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

fn criterion_7() -> Outcome {
    let fractions: Vec<f64> = (1..=7).map(|i| i as f64 / 10.0).collect();
    let mut screened = vec![Vec::new(); fractions.len()];
    let mut random = vec![Vec::new(); fractions.len()];
    for seed in 0..5 {
        let (data, _) = gen_synthetic_regression(700, 20, 5, 0.1, seed)?;
        let (train, test) = train_test_split(&data, 500)?;
        let pb = ErmProblem::new(
            train,
            SafeLoss::new(LossFamily::ScreeningFriendlyRegression, 0.5)?,
            Penalty::L1,
            0.01,
        )?;
        let x0 = initial_point(&pb, 50)?;
        let x_ref = reference_solution(&pb)?;
        let out = screen_verified(&pb, &x0, &RegionPlan::default(), Some(&x_ref))?;
        let table = compression_experiment(&pb, &test, &out.region, &fractions, 3, seed, &SolverOptions::default())?;
        for (i, row) in table.rows.iter().enumerate() {
            screened[i].push(row.screened_error);
            random[i].push(row.random_mean());
        }
    }
    let mut ok = true;
    let mut cells = Vec::new();
    for (i, f) in fractions.iter().enumerate() {
        let (s, r) = (median(screened[i].clone()), median(random[i].clone()));
        ok &= s <= r;
        cells.push(format!("{:.0}%: {s:.3}/{r:.3}", f * 100.0));
    }
    Ok((ok, format!("median test MSE screened/random {}", cells.join(", "))))
}

fn criterion_8() -> Outcome {
    let mut worst_ratio: f64 = 0.0;
    let mut all_safe = true;
    for seed in 0..3 {
        let data = gen_synthetic_regression(500, 30, 10, 0.1, seed)?.0;
        let pb = ErmProblem::new(
            data,
            SafeLoss::new(LossFamily::ScreeningFriendlyRegression, 0.5)?,
            Penalty::L2Sq,
            1.0,
        )?;
        let grid = log_grid(1.0, 0.01, 10)?;
        let plan = RegionPlan { steps: 5, ..Default::default() };
        let opts = SolverOptions { max_epochs: 100_000, tol: 1e-8 };
        let report = regularization_path(&pb, &grid, &plan, 10, &opts, OBJ_TOL, SOL_TOL)?;
        worst_ratio = worst_ratio.max(report.total_screened / report.total_unscreened);
        all_safe &= report.points.iter().all(|p| p.safe);
    }
    Ok((
        worst_ratio <= 0.9 && all_safe,
        format!("worst screened/unscreened cost {worst_ratio:.3} over 3 seeds, all points safe {all_safe}"),
    ))
}

fn criterion_9() -> Outcome {
    let lambda = 0.01;
    let data = gen_synthetic_regression(100, 5, 2, 0.1, 1)?.0;
    let lin = ErmProblem::new(
        data.clone(),
        SafeLoss::new(LossFamily::ScreeningFriendlyRegression, 0.3)?,
        Penalty::L2Sq,
        lambda,
    )?;
    // ½λ‖x‖² with x = Aᵀα is (λ/2)·αᵀKα
    let lk = kernelize(&lin.with_lambda(lambda / 2.0)?, &linear_gram(&data)?)?;
    let pk = lk.predictions(&reference_solution(&lk)?)?;
    let pl = lin.predictions(&reference_solution(&lin)?)?;
    let equiv = linalg::norm_inf(&linalg::sub(&pk, &pl));

    let kp = kernelize(&lin, &gaussian_gram(&data, 1.0)?)?;
    let x_ref = kp.solve(&REFERENCE_OPTIONS, None)?.solution().to_vec();
    let out = screen_verified(&kp, &initial_point(&kp, 50)?, &RegionPlan::default(), Some(&x_ref))?;
    let check = verify_safety(&kp, &out.report.mask, &VERIFY, OBJ_TOL, SOL_TOL)?;
    let safe = check.safe && out.containment == Some(true);
    Ok((
        equiv <= 1e-5 && safe,
        format!(
            "linear-kernel prediction error {equiv:.1e}, gaussian screened {}/100 safe {safe}",
            out.report.n_screened
        ),
    ))
}

fn main() {
    let criteria: [(&str, Criterion); 9] = [
        ("safety on 20 problems", criterion_1),
        ("closed form vs brute force", criterion_2),
        ("smoothed losses vs infimal convolution", criterion_3),
        ("ellipsoid volume law and containment", criterion_4),
        ("dual sparsity and KKT link", criterion_5),
        ("parity with the gap ball", criterion_6),
        ("compression beats random deletion", criterion_7),
        ("screened path cost", criterion_8),
        ("kernels", criterion_9),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let (ok, detail) = run().unwrap_or_else(|e| (false, format!("error: {e}")));
        failed += usize::from(!ok);
        println!("criterion {}: {} {name}: {detail}", i + 1, if ok { "PASS" } else { "FAIL" });
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
    println!("all criteria passed");
}
