//! ERM problems `P(x) = (1/n) Σ f_i(a_iᵀx) + λ R(x)`, their Fenchel duals, and
//! a proximal-gradient solver.
//!
//! Margins follow one convention for every code path: `t_i = a_iᵀx − b_i` for
//! regression and interval data, `t_i = b_i a_iᵀx` for classification, and
//! `f_i(a_iᵀx) = φ(t_i)`. Dual vectors are expressed in that margin
//! convention, `ν_i = φ'(t_i)`; the label sign of classification is carried
//! explicitly as `diag(b)` wherever `Aᵀν` appears, so the primal–dual link
//! reads `x* = −Aᵀ diag(s) ν* / (λn)` with `s = b` (classification) or `s = 1`.
//!
//! In kernelized mode `A` is replaced by the Gram matrix `K`, the variable is
//! `α ∈ ℝⁿ` and the penalty is `λ αᵀKα`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::data::{Dataset, Mode, ModelVector, ProblemKind};
use crate::error::{Error, Result};
use crate::linalg::{self, dot, norm1, norm2, norm_inf, Matrix};
use crate::losses::SafeLoss;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Penalty {
    /// `‖x‖₁`
    L1,
    /// `½‖x‖₂²`
    L2Sq,
}

impl Penalty {
    pub fn name(self) -> &'static str {
        match self {
            Penalty::L1 => "l1",
            Penalty::L2Sq => "l2sq",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "l1" => Some(Penalty::L1),
            "l2sq" | "l2" => Some(Penalty::L2Sq),
            _ => None,
        }
    }
}

/// Slack allowed on `‖Aᵀν/(λn)‖∞ ≤ 1` before the L1 dual is declared infeasible.
const L1_DUAL_FEASIBILITY_SLACK: f64 = 1e-12;

/// Relative slack of the backtracking tests; well below the `1e-12` allowed
/// on the monotonicity of the objective trace.
const ROUNDING_SLACK: f64 = 1e-14;

/// Below this relative change of the smooth part, backtracking estimates the
/// local curvature from gradients instead of function values.
const CURVATURE_SWITCH: f64 = 1e-10;

/// Gradient-difference curvature numerators below this fraction of the
/// rounding scale of the gradients times `‖Δ‖` read as zero curvature.
const GRADIENT_NOISE: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq)]
pub struct ErmProblem {
    data: Dataset,
    loss: SafeLoss,
    penalty: Penalty,
    lambda: f64,
    gram: Option<Matrix>,
}

impl ErmProblem {
    /// A linear-model problem.
    pub fn new(data: Dataset, loss: SafeLoss, penalty: Penalty, lambda: f64) -> Result<Self> {
        validate_pairing(&data, &loss, lambda)?;
        Ok(Self {
            data,
            loss,
            penalty,
            lambda,
            gram: None,
        })
    }

    /// A kernelized problem over `α`; see [`crate::kernels::kernelize`].
    pub(crate) fn new_kernelized(
        data: Dataset,
        loss: SafeLoss,
        lambda: f64,
        gram: Matrix,
    ) -> Result<Self> {
        validate_pairing(&data, &loss, lambda)?;
        let n = data.n();
        if gram.rows() != n || gram.cols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: gram.rows(),
            });
        }
        if gram.max_asymmetry() > 1e-10 {
            return Err(Error::InvalidParameter("Gram matrix is not symmetric".into()));
        }
        let mut shifted = gram.clone();
        for i in 0..n {
            shifted[(i, i)] += 1e-8;
        }
        if shifted.cholesky().is_none() {
            return Err(Error::InvalidParameter(
                "Gram matrix is not positive semi-definite".into(),
            ));
        }
        Ok(Self {
            data,
            loss,
            penalty: Penalty::L2Sq,
            lambda,
            gram: Some(gram),
        })
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }

    pub fn loss(&self) -> &SafeLoss {
        &self.loss
    }

    pub fn penalty(&self) -> Penalty {
        self.penalty
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn gram(&self) -> Option<&Matrix> {
        self.gram.as_ref()
    }

    pub fn mode(&self) -> Mode {
        if self.gram.is_some() {
            Mode::Kernelized
        } else {
            Mode::Linear
        }
    }

    /// The matrix whose rows define the margins: `A`, or `K` in kernel mode.
    pub fn design(&self) -> &Matrix {
        self.gram.as_ref().unwrap_or_else(|| self.data.features())
    }

    pub fn n(&self) -> usize {
        self.data.n()
    }

    /// Dimension of the optimization variable (`p`, or `n` in kernel mode).
    pub fn dim(&self) -> usize {
        self.design().cols()
    }

    /// Same problem with a different regularization weight.
    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidParameter(format!("lambda must be > 0, got {lambda}")));
        }
        let mut out = self.clone();
        out.lambda = lambda;
        Ok(out)
    }

    /// The problem restricted to samples in `kept`, normalized so that its
    /// objective is `(1/n) Σ_{i ∈ kept} f_i + λR` with the ORIGINAL `n`; the
    /// regularization weight becomes `λ n / |kept|`. In kernel mode the
    /// variable shrinks to the kept coordinates of `α`.
    pub fn subset(&self, kept: &[usize]) -> Result<Self> {
        if kept.is_empty() {
            return Err(Error::InvalidDataset("subset keeps no sample".into()));
        }
        let data = self.data.select(kept)?;
        let lambda = self.lambda * self.n() as f64 / kept.len() as f64;
        Ok(Self {
            data,
            loss: self.loss,
            penalty: self.penalty,
            lambda,
            gram: self.gram.as_ref().map(|k| k.select_principal(kept)),
        })
    }

    /// Lifts a solution of [`Self::subset`] back to this problem's variable.
    pub fn embed_subset(&self, kept: &[usize], sub: &[f64]) -> Vec<f64> {
        match self.mode() {
            Mode::Linear => sub.to_vec(),
            Mode::Kernelized => {
                let mut full = vec![0.0; self.dim()];
                for (&i, &v) in kept.iter().zip(sub) {
                    full[i] = v;
                }
                full
            }
        }
    }

    fn label_signs(&self) -> Option<&[f64]> {
        self.data
            .kind()
            .is_classification()
            .then(|| self.data.labels())
    }

    /// `Ax` (or `Kα`).
    pub fn predictions(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.design().matvec(x)
    }

    /// Per-sample margins `t_i` at `x`.
    pub fn margins(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut t = self.predictions(x)?;
        let b = self.data.labels();
        if self.data.kind().is_classification() {
            t.iter_mut().zip(b).for_each(|(ti, bi)| *ti *= bi);
        } else {
            t.iter_mut().zip(b).for_each(|(ti, bi)| *ti -= bi);
        }
        Ok(t)
    }

    /// `λR(x)` (or `λ αᵀKα`).
    pub fn penalty_value(&self, x: &[f64]) -> Result<f64> {
        linalg::check_len(self.dim(), x.len())?;
        Ok(match &self.gram {
            Some(k) => self.lambda * dot(x, &k.matvec(x)?),
            None => match self.penalty {
                Penalty::L1 => self.lambda * norm1(x),
                Penalty::L2Sq => 0.5 * self.lambda * dot(x, x),
            },
        })
    }

    fn loss_average(&self, t: &[f64]) -> f64 {
        t.iter().map(|&ti| self.loss.eval(ti)).sum::<f64>() / self.n() as f64
    }

    pub fn primal_objective(&self, x: &[f64]) -> Result<f64> {
        let t = self.margins(x)?;
        Ok(self.loss_average(&t) + self.penalty_value(x)?)
    }

    /// `Aᵀ diag(s) ν` (or `K diag(s) ν`).
    fn adjoint(&self, nu: &[f64]) -> Result<Vec<f64>> {
        match self.label_signs() {
            Some(b) => {
                let scaled: Vec<f64> = nu.iter().zip(b).map(|(v, s)| v * s).collect();
                self.design().matvec_t(&scaled)
            }
            None => self.design().matvec_t(nu),
        }
    }

    /// `D(ν) = (1/n) Σ −f_i*(ν_i) − λR*(−Aᵀdiag(s)ν/(λn))`; `−∞` off-domain.
    pub fn dual_objective(&self, nu: &[f64]) -> Result<f64> {
        let n = self.n();
        linalg::check_len(n, nu.len())?;
        let regression = !self.data.kind().is_classification();
        let mut loss_part = 0.0;
        for (&v, &b) in nu.iter().zip(self.data.labels()) {
            let c = self.loss.conjugate(v);
            if c == f64::INFINITY {
                return Ok(f64::NEG_INFINITY);
            }
            loss_part -= c;
            if regression {
                loss_part -= b * v;
            }
        }
        loss_part /= n as f64;
        let nf = n as f64;
        let penalty_part = match &self.gram {
            Some(k) => {
                let signed: Vec<f64> = match self.label_signs() {
                    Some(b) => nu.iter().zip(b).map(|(v, s)| v * s).collect(),
                    None => nu.to_vec(),
                };
                dot(&signed, &k.matvec(&signed)?) / (4.0 * self.lambda * nf * nf)
            }
            None => {
                let w = self.adjoint(nu)?;
                match self.penalty {
                    Penalty::L2Sq => {
                        let scale = self.lambda * nf;
                        0.5 * self.lambda * dot(&w, &w) / (scale * scale)
                    }
                    Penalty::L1 => {
                        if norm_inf(&w) / (self.lambda * nf) > 1.0 + L1_DUAL_FEASIBILITY_SLACK {
                            return Ok(f64::NEG_INFINITY);
                        }
                        0.0
                    }
                }
            }
        };
        Ok(loss_part - penalty_part)
    }

    /// `ν_i = φ'(t_i)`: the dual candidate attached to `x`.
    pub fn dual_from_primal(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self
            .margins(x)?
            .into_iter()
            .map(|t| self.loss.subgradient(t))
            .collect())
    }

    /// Dual candidate rescaled into the feasible set (L1: divided by
    /// `max(1, ‖Aᵀdiag(s)ν/(λn)‖∞)`).
    pub fn feasible_dual(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut nu = self.dual_from_primal(x)?;
        if self.gram.is_none() && self.penalty == Penalty::L1 {
            let w = self.adjoint(&nu)?;
            let scale = (norm_inf(&w) / (self.lambda * self.n() as f64)).max(1.0);
            nu.iter_mut().for_each(|v| *v /= scale);
        }
        Ok(nu)
    }

    pub fn duality_gap(&self, x: &[f64]) -> Result<f64> {
        let nu = self.feasible_dual(x)?;
        Ok(self.primal_objective(x)? - self.dual_objective(&nu)?)
    }

    /// `‖x + Aᵀdiag(s)ν/(λn)‖∞` (kernel mode: `‖K(α + diag(s)ν/(2λn))‖∞`), the
    /// residual of the primal–dual link; `None` for the L1 penalty where the
    /// link is not an equation.
    pub fn kkt_residual(&self, x: &[f64], nu: &[f64]) -> Result<Option<f64>> {
        linalg::check_len(self.dim(), x.len())?;
        linalg::check_len(self.n(), nu.len())?;
        let nf = self.n() as f64;
        match (&self.gram, self.penalty) {
            (Some(k), _) => {
                // measured through K: α is only determined modulo its null space
                let signs = self.label_signs();
                let r: Vec<f64> = x
                    .iter()
                    .enumerate()
                    .map(|(i, &a)| {
                        let s = signs.map_or(1.0, |b| b[i]);
                        a + s * nu[i] / (2.0 * self.lambda * nf)
                    })
                    .collect();
                Ok(Some(k.matvec(&r)?.iter().fold(0.0, |m, v| f64::max(m, v.abs()))))
            }
            (None, Penalty::L2Sq) => {
                let w = self.adjoint(nu)?;
                let worst = x
                    .iter()
                    .zip(&w)
                    .map(|(a, wi)| (a + wi / (self.lambda * nf)).abs())
                    .fold(0.0, f64::max);
                Ok(Some(worst))
            }
            (None, Penalty::L1) => Ok(None),
        }
    }

    /// Gradient of the smooth part `(1/n) Σ φ(t_i)` (plus `λαᵀKα` in kernel mode).
    fn smooth_gradient(&self, x: &[f64], t: &[f64]) -> Result<Vec<f64>> {
        let nu: Vec<f64> = t.iter().map(|&ti| self.loss.subgradient(ti)).collect();
        let mut g = self.adjoint(&nu)?;
        let inv_n = 1.0 / self.n() as f64;
        g.iter_mut().for_each(|v| *v *= inv_n);
        if let Some(k) = &self.gram {
            linalg::axpy(2.0 * self.lambda, &k.matvec(x)?, &mut g);
        }
        Ok(g)
    }

    /// Step direction. In kernel mode this is the gradient in function space,
    /// `d = diag(s)φ'(t)/n + 2λα` with `K d` the α-gradient; stepping along
    /// `d` is gradient descent in the RKHS and does not suffer from the
    /// conditioning of `K`.
    fn direction(&self, x: &[f64], t: &[f64], grad: &[f64]) -> Vec<f64> {
        if self.gram.is_none() {
            return grad.to_vec();
        }
        let signs = self.label_signs();
        let inv_n = 1.0 / self.n() as f64;
        t.iter()
            .zip(x)
            .enumerate()
            .map(|(i, (&ti, &xi))| {
                let s = signs.map_or(1.0, |b| b[i]);
                s * self.loss.subgradient(ti) * inv_n + 2.0 * self.lambda * xi
            })
            .collect()
    }

    /// Squared length of a move in the geometry the solver steps in.
    fn move_norm_sq(&self, diff: &[f64]) -> Result<f64> {
        match &self.gram {
            Some(k) => Ok(dot(diff, &k.matvec(diff)?)),
            None => Ok(dot(diff, diff)),
        }
    }

    /// Magnitude of the summands behind the smooth gradient,
    /// `‖M‖_F(‖φ'‖/n + 2λ‖α‖)` with `M` the design (or Gram) matrix. The
    /// gradient itself may be far smaller after cancellation.
    fn gradient_scale(&self, x: &[f64], t: &[f64]) -> f64 {
        let slopes: Vec<f64> = t.iter().map(|&ti| self.loss.subgradient(ti)).collect();
        let mut inner = norm2(&slopes) / self.n() as f64;
        if self.gram.is_some() {
            inner += 2.0 * self.lambda * norm2(x);
        }
        norm2(self.design().as_slice()) * inner
    }

    fn smooth_value(&self, x: &[f64], t: &[f64]) -> Result<f64> {
        let mut v = self.loss_average(t);
        if self.gram.is_some() {
            v += self.penalty_value(x)?;
        }
        Ok(v)
    }

    /// The part of the penalty handled by the proximal operator.
    fn prox_value(&self, x: &[f64]) -> f64 {
        match (&self.gram, self.penalty) {
            (Some(_), _) => 0.0,
            (None, Penalty::L1) => self.lambda * norm1(x),
            (None, Penalty::L2Sq) => 0.5 * self.lambda * dot(x, x),
        }
    }

    fn prox(&self, v: &[f64], step: f64) -> Vec<f64> {
        match (&self.gram, self.penalty) {
            (Some(_), _) => v.to_vec(),
            (None, Penalty::L1) => soft_threshold(v, step * self.lambda),
            (None, Penalty::L2Sq) => prox_l2sq(v, step * self.lambda),
        }
    }

    /// A subgradient of `P` at `x` (sign convention `sign(0) = 0` for L1).
    pub fn subgradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        let t = self.margins(x)?;
        let mut g = self.smooth_gradient(x, &t)?;
        if self.gram.is_none() {
            match self.penalty {
                Penalty::L1 => g.iter_mut().zip(x).for_each(|(gi, &xi)| {
                    if xi > 0.0 {
                        *gi += self.lambda;
                    } else if xi < 0.0 {
                        *gi -= self.lambda;
                    }
                }),
                Penalty::L2Sq => linalg::axpy(self.lambda, x, &mut g),
            }
        }
        Ok(g)
    }

    /// Stationarity measure used by [`Self::solve`]: the duality gap, and for
    /// the squared-norm penalties also the primal–dual link residual.
    fn optimality(&self, x: &[f64]) -> Result<(f64, f64)> {
        let gap = self.duality_gap(x)?;
        let link = if self.penalty == Penalty::L2Sq {
            let nu = self.dual_from_primal(x)?;
            self.kkt_residual(x, &nu)?.unwrap_or(0.0)
        } else {
            0.0
        };
        Ok((gap, link))
    }

    /// Proximal gradient (ISTA) with backtracking: the step halves until the
    /// quadratic upper model holds, and is allowed to double at the start of
    /// every epoch. Kernel problems step along the function-space gradient
    /// and measure moves in the `K`-norm. Stops once the duality gap is at
    /// most `opts.tol`; with a squared-norm penalty the link residual
    /// [`Self::kkt_residual`] must also be at most `opts.tol`.
    pub fn solve(&self, opts: &SolverOptions, x0: Option<&[f64]>) -> Result<SolveTrace> {
        let lipschitz_loss = self.loss.smoothness().ok_or(Error::NonsmoothLoss)?;
        if !(opts.tol >= 0.0) {
            return Err(Error::InvalidParameter("tol must be ≥ 0".into()));
        }
        let mut x = match x0 {
            Some(x0) => {
                linalg::check_len(self.dim(), x0.len())?;
                x0.to_vec()
            }
            None => vec![0.0; self.dim()],
        };
        let nf = self.n() as f64;
        let lipschitz = match &self.gram {
            // in the K-metric, ‖K‖₂ ≤ ‖K‖_F bounds the loss curvature
            Some(k) => lipschitz_loss * norm2(k.as_slice()) / nf + 2.0 * self.lambda,
            None => {
                let design_sq: f64 = self.design().as_slice().iter().map(|v| v * v).sum();
                lipschitz_loss * design_sq / nf
            }
        };
        let mut step = 1.0 / lipschitz.max(1e-12);

        let mut t = self.margins(&x)?;
        let mut f = self.smooth_value(&x, &t)?;
        let mut objective = f + self.prox_value(&x);
        if !objective.is_finite() {
            return Err(Error::Divergence { epoch: 0 });
        }
        let (mut gap, mut link) = self.optimality(&x)?;
        let mut iterates = vec![TraceEntry {
            epoch: 0,
            primal: objective,
            gap,
        }];
        let mut grad = self.smooth_gradient(&x, &t)?;
        let mut dir = self.direction(&x, &t, &grad);
        let mut epoch = 0;
        while (gap > opts.tol || link > opts.tol) && epoch < opts.max_epochs {
            epoch += 1;
            step *= 2.0;
            let mut accepted = None;
            for _ in 0..64 {
                let trial: Vec<f64> = x.iter().zip(&dir).map(|(xi, di)| xi - step * di).collect();
                let x_new = self.prox(&trial, step);
                let diff = linalg::sub(&x_new, &x);
                let diff_sq = self.move_norm_sq(&diff)?;
                if !(diff_sq > 0.0) {
                    break;
                }
                let t_new = self.margins(&x_new)?;
                let f_new = self.smooth_value(&x_new, &t_new)?;
                let obj_new = f_new + self.prox_value(&x_new);
                if !obj_new.is_finite() {
                    return Err(Error::Divergence { epoch });
                }
                let grad_new = self.smooth_gradient(&x_new, &t_new)?;
                let dir_new = self.direction(&x_new, &t_new, &grad_new);
                // Local curvature along the move. Once the decrease is at
                // rounding level the function-value estimate is noise and the
                // gradient-difference estimate is used instead.
                let local_l = if (f_new - f).abs() > CURVATURE_SWITCH * f.abs().max(f_new.abs()) {
                    2.0 * (f_new - f - dot(&grad, &diff)) / diff_sq
                } else {
                    let dg = linalg::sub(&grad_new, &grad);
                    let num = dot(&dg, &diff).abs();
                    // kernel moves along the null space of K make both
                    // numerator and denominator vanish
                    let noise = GRADIENT_NOISE
                        * (self.gradient_scale(&x, &t) + self.gradient_scale(&x_new, &t_new))
                        * norm2(&diff);
                    if num <= noise { 0.0 } else { num / diff_sq }
                };
                let slack = ROUNDING_SLACK * (1.0 + objective.abs());
                if local_l <= 1.0 / step && obj_new <= objective + slack {
                    accepted = Some((x_new, t_new, f_new, obj_new, grad_new, dir_new));
                    break;
                }
                step *= 0.5;
            }
            let Some((x_new, t_new, f_new, obj_new, grad_new, dir_new)) = accepted else {
                // No representable decrease left: we are at the precision floor.
                break;
            };
            x = x_new;
            t = t_new;
            f = f_new;
            grad = grad_new;
            dir = dir_new;
            objective = obj_new;
            (gap, link) = self.optimality(&x)?;
            iterates.push(TraceEntry {
                epoch,
                primal: objective,
                gap,
            });
        }
        Ok(SolveTrace {
            converged: gap <= opts.tol && link <= opts.tol,
            iterates,
            final_model: ModelVector::new(x, self.mode())?,
        })
    }
}

fn validate_pairing(data: &Dataset, loss: &SafeLoss, lambda: f64) -> Result<()> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidParameter(format!("lambda must be > 0, got {lambda}")));
    }
    let family = loss.family();
    if family.is_classification() != data.kind().is_classification() {
        return Err(Error::InvalidParameter(format!(
            "loss {} does not match {:?} data",
            family.name(),
            data.kind()
        )));
    }
    if data.kind() == ProblemKind::Interval {
        let h = data.interval_halfwidth().unwrap_or(0.0);
        let matches = family == crate::losses::LossFamily::ScreeningFriendlyRegression
            && (loss.mu() - h).abs() <= 1e-12 * h.max(1.0);
        if !matches {
            return Err(Error::InvalidParameter(format!(
                "interval data with half-width {h} needs the sreg loss with mu = {h}"
            )));
        }
    }
    Ok(())
}

/// Componentwise `sign(t)·[|t| − τ]₊`.
pub fn soft_threshold(t: &[f64], tau: f64) -> Vec<f64> {
    t.iter()
        .map(|&v| {
            let m = v.abs() - tau;
            if m > 0.0 {
                v.signum() * m
            } else {
                0.0
            }
        })
        .collect()
}

/// Proximal operator of `τ·½‖·‖²`: `t/(1+τ)`.
pub fn prox_l2sq(t: &[f64], tau: f64) -> Vec<f64> {
    t.iter().map(|v| v / (1.0 + tau)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub max_epochs: usize,
    /// Target duality gap.
    pub tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_epochs: 10_000,
            tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEntry {
    pub epoch: usize,
    pub primal: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveTrace {
    /// Entry 0 is the starting point.
    pub iterates: Vec<TraceEntry>,
    pub final_model: ModelVector,
    pub converged: bool,
}

impl SolveTrace {
    pub fn epochs(&self) -> usize {
        self.iterates.last().map_or(0, |e| e.epoch)
    }

    pub fn final_gap(&self) -> f64 {
        self.iterates.last().map_or(f64::INFINITY, |e| e.gap)
    }

    pub fn solution(&self) -> &[f64] {
        self.final_model.as_slice()
    }
}
