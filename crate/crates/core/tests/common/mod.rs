#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use safescreen_core::{
    Dataset, ErmProblem, LossFamily, Matrix, Penalty, ProblemKind, SafeLoss, SolverOptions,
};

pub const TIGHT: SolverOptions = SolverOptions {
    max_epochs: 200_000,
    tol: 1e-12,
};

/// Uniform design; regression responses `Ax + noise`, or their signs.
pub fn dataset(n: usize, p: usize, kind: ProblemKind, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a: Vec<f64> = (0..n * p).map(|_| rng.random_range(-1.0..1.0)).collect();
    let x: Vec<f64> = (0..p).map(|j| if j < 3 { rng.random_range(-2.0..2.0) } else { 0.0 }).collect();
    let a = Matrix::new(n, p, a).unwrap();
    let ax = a.matvec(&x).unwrap();
    let b = ax
        .iter()
        .map(|v| {
            let y = v + 0.1 * rng.random_range(-1.0..1.0);
            match kind {
                ProblemKind::Classification => if y >= 0.0 { 1.0 } else { -1.0 },
                _ => y,
            }
        })
        .collect();
    let h = (kind == ProblemKind::Interval).then_some(0.3);
    Dataset::new(a, b, kind, h).unwrap()
}

pub fn problem(family: LossFamily, penalty: Penalty, lambda: f64, seed: u64) -> ErmProblem {
    let kind = if family.is_classification() {
        ProblemKind::Classification
    } else {
        ProblemKind::Regression
    };
    let data = dataset(80, 6, kind, seed);
    ErmProblem::new(data, SafeLoss::new(family, 0.4).unwrap(), penalty, lambda).unwrap()
}

pub fn solve(problem: &ErmProblem) -> Vec<f64> {
    problem.solve(&TIGHT, None).unwrap().solution().to_vec()
}
