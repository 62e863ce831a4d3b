//! Ellipsoid method iterates, stored in low-rank form.
//!
//! An ellipsoid is `{x : (x − z)ᵀE⁻¹(x − z) ≤ 1}` with
//! `E = s·I − L·diag(D)·Lᵀ`. Each central cut with subgradient `g` performs
//!
//! ```text
//! g̃      = g / √(gᵀEg)
//! z'     = z − E g̃ / (p + 1)
//! E'     = p²/(p² − 1) · (E − 2/(p + 1) · (E g̃)(E g̃)ᵀ)
//! ```
//!
//! which in factored form scales `s` and `D` by `p²/(p² − 1)` and appends the
//! column `E g̃` with weight `p²/(p² − 1) · 2/(p + 1)`. Products with `E` cost
//! `O(pk)` after `k` cuts; `E` is never materialized.

use alloc::vec;
use alloc::vec::Vec;

use crate::erm::ErmProblem;
use crate::error::{Error, Result};
use crate::linalg::{self, dot, Matrix};

#[derive(Debug, Clone, PartialEq)]
pub struct Ellipsoid {
    center: Vec<f64>,
    scale: f64,
    /// Columns of `L`.
    factors: Vec<Vec<f64>>,
    /// Diagonal of `D`.
    weights: Vec<f64>,
    last_cut: Option<Vec<f64>>,
    initial_radius: f64,
}

impl Ellipsoid {
    /// The ball of the given radius: `E = radius²·I`.
    pub fn init_ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::InvalidParameter(alloc::format!(
                "radius must be > 0, got {radius}"
            )));
        }
        if center.is_empty() {
            return Err(Error::DimensionMismatch {
                expected: 1,
                found: 0,
            });
        }
        Ok(Self {
            center,
            scale: radius * radius,
            factors: Vec::new(),
            weights: Vec::new(),
            last_cut: None,
            initial_radius: radius,
        })
    }

    /// The degenerate ellipsoid `{center}` (`E = 0`), e.g. a zero-gap ball.
    pub fn point(center: Vec<f64>) -> Result<Self> {
        if center.is_empty() {
            return Err(Error::DimensionMismatch {
                expected: 1,
                found: 0,
            });
        }
        Ok(Self {
            center,
            scale: 0.0,
            factors: Vec::new(),
            weights: Vec::new(),
            last_cut: None,
            initial_radius: 0.0,
        })
    }

    pub fn initial_radius(&self) -> f64 {
        self.initial_radius
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Number of cuts folded into the factorization.
    pub fn rank(&self) -> usize {
        self.factors.len()
    }

    pub fn factors(&self) -> &[Vec<f64>] {
        &self.factors
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn last_cut(&self) -> Option<&[f64]> {
        self.last_cut.as_deref()
    }

    /// `E v` in `O(pk)`.
    pub fn matvec(&self, v: &[f64]) -> Result<Vec<f64>> {
        linalg::check_len(self.dim(), v.len())?;
        let mut out: Vec<f64> = v.iter().map(|x| self.scale * x).collect();
        for (col, &d) in self.factors.iter().zip(&self.weights) {
            let c = d * dot(col, v);
            linalg::axpy(-c, col, &mut out);
        }
        Ok(out)
    }

    /// `vᵀEv`.
    pub fn quad_form(&self, v: &[f64]) -> Result<f64> {
        linalg::check_len(self.dim(), v.len())?;
        let mut q = self.scale * dot(v, v);
        for (col, &d) in self.factors.iter().zip(&self.weights) {
            let c = dot(col, v);
            q -= d * c * c;
        }
        Ok(q)
    }

    /// One central cut with subgradient `g` at the current center.
    pub fn step(&self, g: &[f64]) -> Result<Ellipsoid> {
        let p = self.dim();
        if self.scale == 0.0 {
            return Err(Error::NotPositiveDefinite);
        }
        if p < 2 {
            return Err(Error::InvalidParameter(
                "ellipsoid updates need dimension p ≥ 2".into(),
            ));
        }
        linalg::check_len(p, g.len())?;
        if g.iter().all(|&v| v == 0.0) {
            return Err(Error::ZeroSubgradient);
        }
        let eg = self.matvec(g)?;
        let geg = dot(g, &eg);
        if !(geg > 0.0) {
            return Err(Error::NotPositiveDefinite);
        }
        let norm = libm::sqrt(geg);
        let u: Vec<f64> = eg.iter().map(|v| v / norm).collect(); // E g̃
        let pf = p as f64;
        let expand = pf * pf / (pf * pf - 1.0);

        let mut center = self.center.clone();
        linalg::axpy(-1.0 / (pf + 1.0), &u, &mut center);
        let mut factors = self.factors.clone();
        factors.push(u);
        let mut weights: Vec<f64> = self.weights.iter().map(|d| d * expand).collect();
        weights.push(expand * 2.0 / (pf + 1.0));
        Ok(Ellipsoid {
            center,
            scale: self.scale * expand,
            factors,
            weights,
            last_cut: Some(g.to_vec()),
            initial_radius: self.initial_radius,
        })
    }

    /// `E` as a dense matrix; for tests and small `p`.
    pub fn dense(&self) -> Matrix {
        let p = self.dim();
        let mut m = Matrix::zeros(p, p);
        for i in 0..p {
            m[(i, i)] = self.scale;
        }
        for (col, &d) in self.factors.iter().zip(&self.weights) {
            for i in 0..p {
                for j in 0..p {
                    m[(i, j)] -= d * col[i] * col[j];
                }
            }
        }
        m
    }

    /// `log det E`, through the `k × k` capacitance matrix
    /// `I − s⁻¹ D^{½} LᵀL D^{½}`. Fails if `E` is not positive definite.
    pub fn log_det(&self) -> Result<f64> {
        let k = self.rank();
        let mut cap = Matrix::identity(k);
        for i in 0..k {
            for j in 0..=i {
                let v = libm::sqrt(self.weights[i] * self.weights[j])
                    * dot(&self.factors[i], &self.factors[j])
                    / self.scale;
                cap[(i, j)] -= v;
                if i != j {
                    cap[(j, i)] -= v;
                }
            }
        }
        let chol = cap.cholesky().ok_or(Error::NotPositiveDefinite)?;
        let cap_logdet: f64 = (0..k).map(|i| 2.0 * libm::log(chol[(i, i)])).sum();
        Ok(self.dim() as f64 * libm::log(self.scale) + cap_logdet)
    }

    /// `E⁻¹ v` by conjugate gradient on [`Self::matvec`] (relative residual
    /// `1e-10`, at most `10p` iterations).
    pub fn solve(&self, v: &[f64]) -> Result<Vec<f64>> {
        let p = self.dim();
        linalg::check_len(p, v.len())?;
        let target = 1e-10 * linalg::norm2(v);
        let mut x = vec![0.0; p];
        let mut r = v.to_vec();
        let mut d = r.clone();
        let mut rr = dot(&r, &r);
        if libm::sqrt(rr) <= target {
            return Ok(x);
        }
        let cap = 10 * p;
        for _ in 0..cap {
            let ed = self.matvec(&d)?;
            let ded = dot(&d, &ed);
            if !(ded > 0.0) {
                return Err(Error::NotPositiveDefinite);
            }
            let a = rr / ded;
            linalg::axpy(a, &d, &mut x);
            linalg::axpy(-a, &ed, &mut r);
            let rr_new = dot(&r, &r);
            if libm::sqrt(rr_new) <= target {
                return Ok(x);
            }
            let beta = rr_new / rr;
            rr = rr_new;
            d.iter_mut().zip(&r).for_each(|(di, ri)| *di = ri + beta * *di);
        }
        Err(Error::CgNotConverged { iterations: cap })
    }

    /// `(x − z)ᵀE⁻¹(x − z)`.
    pub fn mahalanobis_sq(&self, x: &[f64]) -> Result<f64> {
        let diff = linalg::sub(x, &self.center);
        if self.scale == 0.0 {
            return Ok(if diff.iter().all(|&d| d == 0.0) {
                0.0
            } else {
                f64::INFINITY
            });
        }
        let w = self.solve(&diff)?;
        Ok(dot(&diff, &w))
    }
}

/// Ellipsoid intersected with the half-space `gᵀ(x − z) ≤ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct CutRegion {
    pub ellipsoid: Ellipsoid,
    pub halfspace: Option<Vec<f64>>,
}

impl CutRegion {
    /// Fails on an all-zero half-space normal.
    pub fn new(ellipsoid: Ellipsoid, halfspace: Option<Vec<f64>>) -> Result<Self> {
        if let Some(g) = &halfspace {
            linalg::check_len(ellipsoid.dim(), g.len())?;
            if g.iter().all(|&v| v == 0.0) {
                return Err(Error::ZeroSubgradient);
            }
        }
        Ok(Self {
            ellipsoid,
            halfspace,
        })
    }

    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        Self::new(Ellipsoid::init_ball(center, radius)?, None)
    }

    pub fn dim(&self) -> usize {
        self.ellipsoid.dim()
    }

    /// A posteriori check that `x_ref` lies in the region, with relative
    /// tolerance `tol` on both constraints.
    pub fn verify_containment(&self, x_ref: &[f64], tol: f64) -> Result<bool> {
        let e = &self.ellipsoid;
        if e.mahalanobis_sq(x_ref)? > 1.0 + tol {
            return Ok(false);
        }
        if let Some(g) = &self.halfspace {
            let diff = linalg::sub(x_ref, e.center());
            let slack = tol * linalg::norm2(g) * libm::sqrt(e.scale());
            if dot(g, &diff) > slack {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// Runs `n_steps` ellipsoid-method cuts on `problem`, starting from the ball
/// `B(x0, radius)` which the caller asserts contains the optimum. The region
/// keeps the subgradient at the final center as its half-space.
///
/// A zero subgradient means the current center is optimal; the iteration stops
/// there and the region carries no half-space.
pub fn build_region(
    problem: &ErmProblem,
    x0: &[f64],
    radius: f64,
    n_steps: usize,
) -> Result<CutRegion> {
    linalg::check_len(problem.dim(), x0.len())?;
    let mut e = Ellipsoid::init_ball(x0.to_vec(), radius)?;
    let mut g = problem.subgradient(e.center())?;
    for _ in 0..n_steps {
        if g.iter().all(|&v| v == 0.0) {
            break;
        }
        e = e.step(&g)?;
        g = problem.subgradient(e.center())?;
    }
    let halfspace = (!g.iter().all(|&v| v == 0.0)).then_some(g);
    CutRegion::new(e, halfspace)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ball_basics() {
        let e = Ellipsoid::init_ball(vec![0.0, 0.0], 2.0).unwrap();
        assert_eq!(e.scale(), 4.0);
        assert_eq!(e.rank(), 0);
        assert_eq!(e.matvec(&[1.0, -2.0]).unwrap(), vec![4.0, -8.0]);
        assert!(Ellipsoid::init_ball(vec![0.0], 0.0).is_err());
        assert!(Ellipsoid::init_ball(vec![0.0], -1.0).is_err());
        let r = CutRegion::new(e, None).unwrap();
        assert!(r.verify_containment(&[2.0, 0.0], 1e-12).unwrap());
        assert!(r.verify_containment(&[1.2, 1.5], 1e-12).unwrap());
        assert!(!r.verify_containment(&[4.0, 0.0], 1e-12).unwrap());
    }

    #[test]
    fn first_step_by_hand() {
        let e = Ellipsoid::init_ball(vec![0.0, 0.0], 1.0).unwrap();
        let e1 = e.step(&[1.0, 0.0]).unwrap();
        assert!((e1.center()[0] + 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(e1.center()[1], 0.0);
        let d = e1.dense();
        assert!((d[(0, 0)] - 4.0 / 9.0).abs() < 1e-15);
        assert!((d[(1, 1)] - 4.0 / 3.0).abs() < 1e-15);
        assert!(d[(0, 1)].abs() < 1e-15);
        // det ratio 16/27
        let ratio = libm::exp(e1.log_det().unwrap() - e.log_det().unwrap());
        assert!((ratio - 16.0 / 27.0).abs() < 1e-14);
        // rank-one matvec
        let v = [0.3, -0.4];
        let mv = e1.matvec(&v).unwrap();
        let col = &e1.factors()[0];
        let w = e1.weights()[0];
        for i in 0..2 {
            let expected = e1.scale() * v[i] - col[i] * w * dot(col, &v);
            assert!((mv[i] - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn step_errors() {
        let e = Ellipsoid::init_ball(vec![0.0, 0.0], 1.0).unwrap();
        assert_eq!(e.step(&[0.0, 0.0]).unwrap_err(), Error::ZeroSubgradient);
        assert!(e.step(&[1.0]).is_err());
        let e1 = Ellipsoid::init_ball(vec![0.0], 1.0).unwrap();
        assert!(e1.step(&[1.0]).is_err());
    }

    #[test]
    fn cg_inverts_after_cuts() {
        let mut e = Ellipsoid::init_ball(vec![0.0; 4], 1.5).unwrap();
        for g in [[1.0, 0.2, 0.0, -0.3], [0.0, 1.0, 1.0, 0.0], [-0.5, 0.1, 0.2, 1.0]] {
            e = e.step(&g).unwrap();
        }
        let v = [0.1, -0.2, 0.3, 0.4];
        let w = e.solve(&v).unwrap();
        let back = e.matvec(&w).unwrap();
        for i in 0..4 {
            assert!((back[i] - v[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn halfspace_containment() {
        let e = Ellipsoid::init_ball(vec![0.0, 0.0], 1.0).unwrap();
        let r = CutRegion::new(e, Some(vec![1.0, 0.0])).unwrap();
        assert!(r.verify_containment(&[0.0, 0.0], 1e-12).unwrap());
        assert!(r.verify_containment(&[-0.5, 0.5], 1e-12).unwrap());
        assert!(!r.verify_containment(&[0.5, 0.0], 1e-12).unwrap());
        assert!(CutRegion::new(
            Ellipsoid::init_ball(vec![0.0, 0.0], 1.0).unwrap(),
            Some(vec![0.0, 0.0])
        )
        .is_err());
    }
}
