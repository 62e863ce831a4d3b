//! The closed-form cut-ellipsoid maximization against a brute-force oracle,
//! and end-to-end properties of the screening rule.

mod common;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use safescreen_core::{
    build_region, gap_ball_region, max_linear_over_region, screen, verify_safety, CutRegion,
    Ellipsoid, LossFamily, Penalty, SampleMask, DEFAULT_STRICT_EPS,
};

/// `max aᵀx − b` over `{(x−z)ᵀE⁻¹(x−z) ≤ 1, gᵀ(x−z) ≤ 0}` by projected
/// gradient ascent in whitened coordinates `x = z + E^{1/2}u`, where the
/// feasible set is the unit half-ball `{‖u‖ ≤ 1, hᵀu ≤ 0}`.
fn brute_force(a: &[f64], b: f64, region: &CutRegion) -> f64 {
    let e = region.ellipsoid.dense();
    let m = DMatrix::from_row_slice(e.rows(), e.cols(), e.as_slice());
    let eig = SymmetricEigen::new(m);
    let root = &eig.eigenvectors
        * DMatrix::from_diagonal(&eig.eigenvalues.map(f64::sqrt))
        * eig.eigenvectors.transpose();
    let av = DVector::from_column_slice(a);
    let c = &root * &av;
    let h = region.halfspace.as_ref().map(|g| &root * DVector::from_column_slice(g));
    // projection onto a half-ball through its center: half-space, then ball
    let project = |mut u: DVector<f64>| {
        if let Some(h) = &h {
            let s = h.dot(&u);
            if s > 0.0 {
                u -= h * (s / h.dot(h));
            }
        }
        let n = u.norm();
        if n > 1.0 {
            u /= n;
        }
        u
    };
    let mut u = DVector::zeros(a.len());
    let step = 0.5 / c.norm().max(1e-300);
    for _ in 0..20_000 {
        let next = project(&u + &c * step);
        if (&next - &u).norm() < 1e-15 {
            break;
        }
        u = next;
    }
    let z = DVector::from_column_slice(region.ellipsoid.center());
    av.dot(&z) + c.dot(&u) - b
}

fn random_region(rng: &mut ChaCha8Rng, p: usize) -> CutRegion {
    let z: Vec<f64> = (0..p).map(|_| rng.random_range(-2.0..2.0)).collect();
    let mut e = Ellipsoid::init_ball(z, rng.random_range(0.3..3.0)).unwrap();
    for _ in 0..rng.random_range(0..2 * p) {
        let g: Vec<f64> = (0..p).map(|_| rng.random_range(-1.0..1.0)).collect();
        e = e.step(&g).unwrap();
    }
    let g = rng
        .random_bool(0.8)
        .then(|| (0..p).map(|_| rng.random_range(-1.0..1.0)).collect());
    CutRegion::new(e, g).unwrap()
}

#[test]
fn closed_form_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut active = 0;
    for _ in 0..500 {
        let p = rng.random_range(2..=10);
        let region = random_region(&mut rng, p);
        let a: Vec<f64> = (0..p).map(|_| rng.random_range(-2.0..2.0)).collect();
        let b = rng.random_range(-1.0..1.0);
        let got = max_linear_over_region(&a, b, &region).unwrap();
        let want = brute_force(&a, b, &region);
        assert!((got - want).abs() <= 1e-5, "p={p}: {got} vs {want}");
        if let Some(g) = &region.halfspace {
            let eg = region.ellipsoid.matvec(g).unwrap();
            if eg.iter().zip(&a).map(|(x, y)| x * y).sum::<f64>() >= 0.0 {
                active += 1;
            }
        }
    }
    // both branches exercised
    assert!(active > 50, "{active}");
}

#[test]
fn boundary_normalization_example() {
    let region = CutRegion::new(Ellipsoid::init_ball(vec![0.0, 0.0], 1.0).unwrap(), Some(vec![1.0, 1.0])).unwrap();
    let want = brute_force(&[1.0, 0.0], 0.0, &region);
    let got = max_linear_over_region(&[1.0, 0.0], 0.0, &region).unwrap();
    assert!((want - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-5);
    assert!((got - want).abs() < 1e-5);
    // scaling the direction by 1/(2γ) instead of to the boundary would give ½
    assert!((got - 0.5).abs() > 0.2);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn closed_form_bounds_every_member(seed in 0u64..100_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = rng.random_range(2..=6);
        let region = random_region(&mut rng, p);
        let a: Vec<f64> = (0..p).map(|_| rng.random_range(-2.0..2.0)).collect();
        let bound = max_linear_over_region(&a, 0.3, &region).unwrap();
        let e = &region.ellipsoid;
        for _ in 0..200 {
            let d: Vec<f64> = (0..p).map(|_| rng.random_range(-1.0..1.0)).collect();
            let ed = e.matvec(&d).unwrap();
            let r = rng.random::<f64>() / e.quad_form(&d).unwrap().sqrt();
            let x: Vec<f64> = e.center().iter().zip(&ed).map(|(zi, v)| zi + r * v).collect();
            if region.verify_containment(&x, 0.0).unwrap() {
                let val: f64 = a.iter().zip(&x).map(|(u, v)| u * v).sum::<f64>() - 0.3;
                prop_assert!(val <= bound + 1e-9);
            }
        }
    }
}

#[test]
fn tiny_ball_at_optimum_is_the_exact_margin_test() {
    for (family, penalty) in [
        (LossFamily::ScreeningFriendlyRegression, Penalty::L2Sq),
        (LossFamily::SquaredHinge, Penalty::L2Sq),
        (LossFamily::SafeLogistic, Penalty::L1),
    ] {
        let pb = common::problem(family, penalty, 0.05, 3);
        let x = common::solve(&pb);
        let report = screen(&pb, &CutRegion::ball(x.clone(), 1e-9).unwrap(), DEFAULT_STRICT_EPS).unwrap();
        let flat = pb.loss().flat_interval().unwrap();
        let t = pb.margins(&x).unwrap();
        for (i, &ti) in t.iter().enumerate() {
            let slack = (ti - flat.lo).min(flat.hi - ti);
            if !report.mask.keep[i] {
                assert!(slack > 0.0, "{family:?}: discarded sample {i} with slack {slack}");
            } else {
                assert!(slack <= 1e-6, "{family:?}: kept sample {i} with slack {slack}");
            }
        }
        assert!(report.n_screened > 0);
    }
}

#[test]
fn huge_ball_screens_nothing() {
    let pb = common::problem(LossFamily::ScreeningFriendlyRegression, Penalty::L1, 0.05, 4);
    let region = CutRegion::ball(vec![0.0; pb.dim()], 1e6).unwrap();
    assert_eq!(screen(&pb, &region, DEFAULT_STRICT_EPS).unwrap().n_screened, 0);
}

#[test]
fn nested_regions_screen_monotonically() {
    let pb = common::problem(LossFamily::SquaredHinge, Penalty::L2Sq, 0.05, 5);
    let x = common::solve(&pb);
    let mut last = usize::MAX;
    for r in [1e-4, 1e-3, 1e-2, 1e-1, 1.0] {
        let n = screen(&pb, &CutRegion::ball(x.clone(), r).unwrap(), DEFAULT_STRICT_EPS)
            .unwrap()
            .n_screened;
        assert!(n <= last);
        last = n;
    }
}

#[test]
fn screened_samples_have_zero_dual_and_refit_matches() {
    for seed in 0..4 {
        for (family, penalty) in [
            (LossFamily::ScreeningFriendlyRegression, Penalty::L1),
            (LossFamily::SquaredHinge, Penalty::L2Sq),
        ] {
            let pb = common::problem(family, penalty, 0.05, seed);
            let x_star = common::solve(&pb);
            let x0 = pb
                .solve(&safescreen_core::SolverOptions { max_epochs: 30, tol: 0.0 }, None)
                .unwrap()
                .solution()
                .to_vec();
            // a radius that holds x⋆, found by doubling
            let mut r = 1e-3;
            let region = loop {
                let region = build_region(&pb, &x0, r, 8).unwrap();
                if region.verify_containment(&x_star, 1e-9).unwrap() {
                    break region;
                }
                r *= 2.0;
            };
            let report = screen(&pb, &region, DEFAULT_STRICT_EPS).unwrap();
            let nu = pb.dual_from_primal(&x_star).unwrap();
            for (i, keep) in report.mask.keep.iter().enumerate() {
                if !keep {
                    assert_eq!(nu[i], 0.0);
                }
            }
            let check = verify_safety(&pb, &report.mask, &common::TIGHT, 1e-6, 1e-4).unwrap();
            assert!(check.safe, "{family:?} seed {seed}: {check:?}");
        }
    }
}

#[test]
fn keep_all_is_trivially_safe() {
    let pb = common::problem(LossFamily::SafeLogistic, Penalty::L2Sq, 0.05, 6);
    let check = verify_safety(&pb, &SampleMask::keep_all(pb.n()), &common::TIGHT, 1e-6, 1e-4).unwrap();
    assert!(check.safe);
    assert_eq!(check.objective_diff, 0.0);
}

#[test]
fn discarding_support_samples_is_caught() {
    let pb = common::problem(LossFamily::SquaredHinge, Penalty::L2Sq, 0.05, 7);
    let x = common::solve(&pb);
    let nu = pb.dual_from_primal(&x).unwrap();
    // drop every sample with an active dual variable
    let keep: Vec<bool> = nu.iter().map(|v| *v == 0.0).collect();
    assert!(keep.iter().any(|k| !k));
    let mask = SampleMask { scores: vec![0.0; keep.len()], keep };
    let check = verify_safety(&pb, &mask, &common::TIGHT, 1e-6, 1e-4).unwrap();
    assert!(!check.safe);
}

#[test]
fn gap_ball_radius_follows_the_gap() {
    let pb = common::problem(LossFamily::SquaredHinge, Penalty::L2Sq, 0.05, 8);
    let x_star = common::solve(&pb);
    let x = vec![0.0; pb.dim()];
    let gap = pb.duality_gap(&x).unwrap();
    let region = gap_ball_region(&pb, &x).unwrap();
    assert!((region.ellipsoid.initial_radius() - 2.0 * gap / pb.lambda()).abs() < 1e-12);
    assert!(region.halfspace.is_none());
    // at the optimum the gap vanishes up to rounding and the ball collapses
    let at_opt = gap_ball_region(&pb, &x_star).unwrap();
    assert!(at_opt.ellipsoid.initial_radius() <= 1e-9);
    let l1 = common::problem(LossFamily::SquaredHinge, Penalty::L1, 0.05, 8);
    assert!(gap_ball_region(&l1, &x).is_err());
}
