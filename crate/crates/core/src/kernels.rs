//! Gram matrices and kernelized problems.
//!
//! By the representer theorem a kernel model is `x(·) = Σ α_i K(a_i, ·)`, so
//! margins become `[K]_i α` and the squared RKHS norm becomes `αᵀKα`. The
//! kernelized problem is
//!
//! ```text
//! min_α (1/n) Σ φ(t_i) + λ αᵀKα,   t = Kα − b  (or b ∘ Kα)
//! ```
//!
//! which is linear in `α`, so the ellipsoid and screening modules apply with
//! `a_i` replaced by the Gram row `[K]_i`. Note the penalty is `λ αᵀKα`, not
//! `½ λ αᵀKα`: a linear-model problem with weight `λ` on `½‖x‖²` corresponds
//! to a kernelized problem with weight `λ/2`.

use alloc::vec::Vec;

use crate::data::Dataset;
use crate::erm::{ErmProblem, Penalty};
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Kernel {
    /// `exp(−‖x − x'‖² / (2σ²))`
    Gaussian { sigma: f64 },
    /// `xᵀx'`
    Linear,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    values: Matrix,
    kernel: Kernel,
}

impl GramMatrix {
    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn kernel(&self) -> Kernel {
        self.kernel
    }

    pub fn into_matrix(self) -> Matrix {
        self.values
    }
}

fn squared_distances(rows: &[&[f64]], i: usize) -> Vec<f64> {
    let a = rows[i];
    rows.iter()
        .map(|b| a.iter().zip(*b).map(|(x, y)| (x - y) * (x - y)).sum())
        .collect()
}

/// `K_ij = exp(−‖a_i − a_j‖² / (2σ²))`.
pub fn gaussian_gram(data: &Dataset, sigma: f64) -> Result<GramMatrix> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidParameter(alloc::format!(
            "kernel bandwidth must be > 0, got {sigma}"
        )));
    }
    let rows: Vec<&[f64]> = data.features().row_iter().collect();
    let n = rows.len();
    let scale = 1.0 / (2.0 * sigma * sigma);
    let row_values = |i: usize| -> Vec<f64> {
        squared_distances(&rows, i)
            .into_iter()
            .map(|d| libm::exp(-d * scale))
            .collect()
    };
    #[cfg(feature = "rayon")]
    let all: Vec<Vec<f64>> = {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(row_values).collect()
    };
    #[cfg(not(feature = "rayon"))]
    let all: Vec<Vec<f64>> = (0..n).map(row_values).collect();

    let mut values = Matrix::from_rows(&all)?;
    // exact symmetry and unit diagonal
    for i in 0..n {
        values[(i, i)] = 1.0;
        for j in 0..i {
            values[(j, i)] = values[(i, j)];
        }
    }
    Ok(GramMatrix {
        values,
        kernel: Kernel::Gaussian { sigma },
    })
}

/// `K = AAᵀ`.
pub fn linear_gram(data: &Dataset) -> Result<GramMatrix> {
    let a = data.features();
    let values = a.matmul(&a.transpose())?;
    Ok(GramMatrix {
        values,
        kernel: Kernel::Linear,
    })
}

/// The kernelized counterpart of a linear problem: same data, loss and `λ`,
/// with margins `[K]_i α` and penalty `λ αᵀKα`.
pub fn kernelize(problem: &ErmProblem, gram: &GramMatrix) -> Result<ErmProblem> {
    if problem.gram().is_some() {
        return Err(Error::InvalidParameter("problem is already kernelized".into()));
    }
    if problem.penalty() == Penalty::L1 {
        return Err(Error::L1InKernelMode);
    }
    linalg::check_len(problem.n(), gram.values.rows())?;
    ErmProblem::new_kernelized(
        problem.data().clone(),
        *problem.loss(),
        problem.lambda(),
        gram.values.clone(),
    )
}
