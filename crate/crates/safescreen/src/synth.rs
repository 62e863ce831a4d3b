//! Seeded synthetic datasets.
//!
//! Every generator draws from a ChaCha8 stream seeded with `seed`, so output
//! is identical across runs and platforms.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use safescreen_core::{linalg, Dataset, Error, Matrix, Mode, ModelVector, ProblemKind, Result};

fn check_sizes(n: usize, p: usize, sparsity: usize, sigma: f64) -> Result<()> {
    if n == 0 || p == 0 {
        return Err(Error::InvalidParameter(format!("need n, p ≥ 1, got n={n}, p={p}")));
    }
    if sparsity == 0 || sparsity > p {
        return Err(Error::InvalidParameter(format!(
            "sparsity must be in 1..={p}, got {sparsity}"
        )));
    }
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidParameter(format!("sigma must be ≥ 0, got {sigma}")));
    }
    Ok(())
}

/// `A` uniform on [−1,1], a ground truth with `sparsity` standard-normal
/// nonzeros at random positions, and the noiseless responses `A x`.
fn design_and_truth(
    rng: &mut ChaCha8Rng,
    n: usize,
    p: usize,
    sparsity: usize,
) -> Result<(Matrix, Vec<f64>, Vec<f64>)> {
    let values: Vec<f64> = (0..n * p).map(|_| rng.random_range(-1.0..=1.0)).collect();
    let a = Matrix::new(n, p, values)?;
    let mut x = vec![0.0; p];
    for j in index::sample(rng, p, sparsity) {
        x[j] = rng.sample(StandardNormal);
    }
    let ax = a.matvec(&x)?;
    Ok((a, x, ax))
}

fn noise(rng: &mut ChaCha8Rng, n: usize, sigma: f64) -> Vec<f64> {
    if sigma == 0.0 {
        return vec![0.0; n];
    }
    let d = Normal::new(0.0, sigma).expect("sigma checked finite and ≥ 0");
    (0..n).map(|_| d.sample(rng)).collect()
}

/// `b = A x + ε`, `ε ~ N(0, σ²)`.
pub fn gen_synthetic_regression(
    n: usize,
    p: usize,
    sparsity: usize,
    sigma: f64,
    seed: u64,
) -> Result<(Dataset, ModelVector)> {
    check_sizes(n, p, sparsity, sigma)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (a, x, ax) = design_and_truth(&mut rng, n, p, sparsity)?;
    let eps = noise(&mut rng, n, sigma);
    let b: Vec<f64> = if sigma == 0.0 {
        ax
    } else {
        ax.iter().zip(&eps).map(|(u, e)| u + e).collect()
    };
    let data = Dataset::new(a, b, ProblemKind::Regression, None)?;
    Ok((data, ModelVector::new(x, Mode::Linear)?))
}

/// `b = sign(A x + ε)` with `sign(0) = +1`.
pub fn gen_synthetic_classification(
    n: usize,
    p: usize,
    sparsity: usize,
    sigma: f64,
    seed: u64,
) -> Result<(Dataset, ModelVector)> {
    check_sizes(n, p, sparsity, sigma)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (a, x, ax) = design_and_truth(&mut rng, n, p, sparsity)?;
    let eps = noise(&mut rng, n, sigma);
    let b = ax
        .iter()
        .zip(&eps)
        .map(|(u, e)| if u + e >= 0.0 { 1.0 } else { -1.0 })
        .collect();
    let data = Dataset::new(a, b, ProblemKind::Classification, None)?;
    Ok((data, ModelVector::new(x, Mode::Linear)?))
}

/// Intervals `[b_i − h, b_i + h]` around regression responses from a single
/// active feature, with noise of standard deviation `h`, so a fraction of
/// the intervals miss the noiseless fit.
pub fn gen_interval_dataset(n: usize, p: usize, halfwidth: f64, seed: u64) -> Result<Dataset> {
    if !(halfwidth > 0.0) || !halfwidth.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "interval half-width must be > 0, got {halfwidth}"
        )));
    }
    let (data, _) = gen_synthetic_regression(n, p, 1, halfwidth, seed)?;
    Dataset::new(
        data.features().clone(),
        data.labels().to_vec(),
        ProblemKind::Interval,
        Some(halfwidth),
    )
}

/// Splits off the last `n_test` samples; for held-out evaluation.
pub fn train_test_split(data: &Dataset, n_test: usize) -> Result<(Dataset, Dataset)> {
    let n = data.n();
    if n_test == 0 || n_test >= n {
        return Err(Error::InvalidParameter(format!(
            "test size must be in 1..{n}, got {n_test}"
        )));
    }
    let train: Vec<usize> = (0..n - n_test).collect();
    let test: Vec<usize> = (n - n_test..n).collect();
    Ok((data.select(&train)?, data.select(&test)?))
}

/// Residual `‖b − A x‖∞`, convenient for checking generated data.
pub fn max_residual(data: &Dataset, x: &[f64]) -> Result<f64> {
    let ax = data.features().matvec(x)?;
    let r = linalg::sub(data.labels(), &ax);
    Ok(linalg::norm_inf(&r))
}
