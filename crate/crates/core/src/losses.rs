//! Scalar loss functions, with the "safe" family that is exactly zero on a
//! non-trivial interval.
//!
//! Every safe loss here is an infimal convolution `f □ μΩ*(·/μ)` of a classical
//! loss `f` with a dual penalty `Ω` that forces a flat region; the closed forms
//! below are what that construction evaluates to:
//!
//! | family                        | `φ(t)`                                         | flat interval  |
//! |-------------------------------|------------------------------------------------|----------------|
//! | `ScreeningFriendlyRegression` | `½[|t| − μ]₊²`                                 | `[−μ, μ]`      |
//! | `SafeLogistic`                | `e^{t+μ−1} − (t+μ)` if `t ≤ 1−μ`, else `0`     | `[1−μ, ∞)`     |
//! | `SquaredHinge`                | `[1 − t − μ]₊²`                                | `[1−μ, ∞)`     |
//! | `Hinge`                       | `½[1 − t − μ]₊`                                | `[1−μ, ∞)`     |
//! | `Huber`                       | `t²/(2μ)` if `|t| ≤ μ`, else `|t| − μ/2`        | none           |
//! | `Square`                      | `t²/2`                                         | none           |
//! | `Logistic`                    | `log(1 + e^{−t})`                              | none           |
//!
//! `Hinge` keeps the ½ factor of its construction, so it is half the
//! conventional SVM hinge. `SquaredHinge` has no ½ factor.

use alloc::format;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LossFamily {
    ScreeningFriendlyRegression,
    SafeLogistic,
    Hinge,
    SquaredHinge,
    Huber,
    Square,
    Logistic,
}

impl LossFamily {
    pub const ALL: [LossFamily; 7] = [
        LossFamily::ScreeningFriendlyRegression,
        LossFamily::SafeLogistic,
        LossFamily::Hinge,
        LossFamily::SquaredHinge,
        LossFamily::Huber,
        LossFamily::Square,
        LossFamily::Logistic,
    ];

    pub fn is_safe(self) -> bool {
        matches!(
            self,
            LossFamily::ScreeningFriendlyRegression
                | LossFamily::SafeLogistic
                | LossFamily::Hinge
                | LossFamily::SquaredHinge
        )
    }

    /// Margin-based losses that expect `t = b_i a_iᵀx` with `b_i = ±1`.
    pub fn is_classification(self) -> bool {
        matches!(
            self,
            LossFamily::SafeLogistic
                | LossFamily::Hinge
                | LossFamily::SquaredHinge
                | LossFamily::Logistic
        )
    }

    pub fn is_differentiable(self) -> bool {
        !matches!(self, LossFamily::Hinge)
    }

    pub fn name(self) -> &'static str {
        match self {
            LossFamily::ScreeningFriendlyRegression => "sreg",
            LossFamily::SafeLogistic => "safe-logistic",
            LossFamily::Hinge => "hinge",
            LossFamily::SquaredHinge => "squared-hinge",
            LossFamily::Huber => "huber",
            LossFamily::Square => "square",
            LossFamily::Logistic => "logistic",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|f| f.name() == name)
    }
}

/// `[lo, hi]` on which a safe loss vanishes; either end may be infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlatInterval {
    pub lo: f64,
    pub hi: f64,
}

impl FlatInterval {
    /// Distance of `[low, high]` to the boundary, measured inward: positive
    /// iff the whole range lies in the interior.
    pub fn slack(&self, low: f64, high: f64) -> f64 {
        (low - self.lo).min(self.hi - high)
    }

    pub fn contains_interior(&self, t: f64) -> bool {
        t > self.lo && t < self.hi
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SafeLoss {
    family: LossFamily,
    mu: f64,
}

impl SafeLoss {
    pub fn new(family: LossFamily, mu: f64) -> Result<Self> {
        if !(mu >= 0.0) || !mu.is_finite() {
            return Err(Error::InvalidParameter(format!("mu must be finite and ≥ 0, got {mu}")));
        }
        let needs_positive = matches!(
            family,
            LossFamily::ScreeningFriendlyRegression | LossFamily::Huber
        );
        if needs_positive && mu == 0.0 {
            return Err(Error::InvalidParameter(format!(
                "{} requires mu > 0",
                family.name()
            )));
        }
        Ok(Self { family, mu })
    }

    pub fn family(&self) -> LossFamily {
        self.family
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn eval(&self, t: f64) -> f64 {
        let mu = self.mu;
        match self.family {
            LossFamily::ScreeningFriendlyRegression => {
                let r = pos(t.abs() - mu);
                0.5 * r * r
            }
            LossFamily::SafeLogistic => {
                if t + mu - 1.0 <= 0.0 {
                    // e^u − u − 1 with u = t + μ − 1
                    libm::expm1(t + mu - 1.0) - (t + mu - 1.0)
                } else {
                    0.0
                }
            }
            LossFamily::SquaredHinge => {
                let r = pos(1.0 - t - mu);
                r * r
            }
            LossFamily::Hinge => 0.5 * pos(1.0 - t - mu),
            LossFamily::Huber => {
                if t.abs() <= mu {
                    t * t / (2.0 * mu)
                } else {
                    t.abs() - mu / 2.0
                }
            }
            LossFamily::Square => 0.5 * t * t,
            LossFamily::Logistic => {
                if t > 0.0 {
                    libm::log1p(libm::exp(-t))
                } else {
                    -t + libm::log1p(libm::exp(t))
                }
            }
        }
    }

    /// A subgradient; the derivative wherever it exists. At the hinge kink the
    /// flat-side element 0 is returned.
    pub fn subgradient(&self, t: f64) -> f64 {
        let mu = self.mu;
        match self.family {
            LossFamily::ScreeningFriendlyRegression => signum0(t) * pos(t.abs() - mu),
            LossFamily::SafeLogistic => {
                if t + mu - 1.0 <= 0.0 {
                    libm::expm1(t + mu - 1.0)
                } else {
                    0.0
                }
            }
            LossFamily::SquaredHinge => -2.0 * pos(1.0 - t - mu),
            LossFamily::Hinge => {
                if t < 1.0 - mu {
                    -0.5
                } else {
                    0.0
                }
            }
            LossFamily::Huber => {
                if t.abs() <= mu {
                    t / mu
                } else {
                    signum0(t)
                }
            }
            LossFamily::Square => t,
            LossFamily::Logistic => {
                // −1/(1+e^t), written to avoid overflow
                if t > 0.0 {
                    let e = libm::exp(-t);
                    -e / (1.0 + e)
                } else {
                    -1.0 / (1.0 + libm::exp(t))
                }
            }
        }
    }

    /// Fenchel conjugate `φ*(y) = sup_t ty − φ(t)`; `f64::INFINITY` off-domain.
    pub fn conjugate(&self, y: f64) -> f64 {
        let mu = self.mu;
        const INF: f64 = f64::INFINITY;
        match self.family {
            LossFamily::ScreeningFriendlyRegression => 0.5 * y * y + mu * y.abs(),
            LossFamily::SafeLogistic => {
                if (-1.0..=0.0).contains(&y) {
                    xlogx(1.0 + y) - mu * y
                } else {
                    INF
                }
            }
            LossFamily::SquaredHinge => {
                if y <= 0.0 {
                    y * (1.0 - mu) + 0.25 * y * y
                } else {
                    INF
                }
            }
            LossFamily::Hinge => {
                if (-0.5..=0.0).contains(&y) {
                    y * (1.0 - mu)
                } else {
                    INF
                }
            }
            LossFamily::Huber => {
                if y.abs() <= 1.0 {
                    0.5 * mu * y * y
                } else {
                    INF
                }
            }
            LossFamily::Square => 0.5 * y * y,
            LossFamily::Logistic => {
                if (-1.0..=0.0).contains(&y) {
                    xlogx(-y) + xlogx(1.0 + y)
                } else {
                    INF
                }
            }
        }
    }

    pub fn flat_interval(&self) -> Result<FlatInterval> {
        match self.family {
            LossFamily::ScreeningFriendlyRegression => Ok(FlatInterval {
                lo: -self.mu,
                hi: self.mu,
            }),
            LossFamily::SafeLogistic | LossFamily::Hinge | LossFamily::SquaredHinge => {
                Ok(FlatInterval {
                    lo: 1.0 - self.mu,
                    hi: f64::INFINITY,
                })
            }
            f => Err(Error::NoFlatInterval(f)),
        }
    }

    /// Lipschitz constant of `φ'`, or `None` when `φ` is not differentiable.
    pub fn smoothness(&self) -> Option<f64> {
        match self.family {
            LossFamily::ScreeningFriendlyRegression
            | LossFamily::SafeLogistic
            | LossFamily::Square => Some(1.0),
            LossFamily::SquaredHinge => Some(2.0),
            LossFamily::Huber => Some(1.0 / self.mu),
            LossFamily::Logistic => Some(0.25),
            LossFamily::Hinge => None,
        }
    }
}

#[inline]
fn pos(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

#[inline]
fn signum0(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `x log x` with `0 log 0 = 0`.
#[inline]
fn xlogx(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * libm::log(x)
    }
}

/// Numeric infimal convolution `min_z base(z) + μ·Ω*((t − z)/μ)`.
///
/// The minimum is first taken over the grid `t ± grid_halfwidth` with spacing
/// `grid_step`, then refined by repeated 10× denser grids around the best
/// point (for a convex objective the minimizer lies between the neighbours of
/// the best grid point). `omega_star` may return `+∞` to encode indicators.
/// Meant as a test oracle for the closed forms above.
pub fn infconv_oracle(
    base: impl Fn(f64) -> f64,
    omega_star: impl Fn(f64) -> f64,
    mu: f64,
    t: f64,
    grid_halfwidth: f64,
    grid_step: f64,
) -> f64 {
    let objective = |z: f64| base(z) + mu * omega_star((t - z) / mu);
    let best_on_grid = |lo: f64, step: f64, count: usize| {
        let mut best = (f64::INFINITY, lo);
        for k in 0..=count {
            let z = lo + step * k as f64;
            let v = objective(z);
            if v < best.0 {
                best = (v, z);
            }
        }
        best
    };
    let count = libm::ceil(2.0 * grid_halfwidth / grid_step) as usize;
    let (mut value, mut z) = best_on_grid(t - grid_halfwidth, grid_step, count);
    let mut step = grid_step;
    for _ in 0..8 {
        let fine = step / 10.0;
        let (v, zz) = best_on_grid(z - step, fine, 20);
        if v <= value {
            value = v;
            z = zz;
        }
        step = fine;
    }
    value
}

/// `sup_{t ∈ [lo, hi]} t·y − f(t)` by ternary search; assumes `f` convex.
pub fn conjugate_numeric(f: impl Fn(f64) -> f64, y: f64, lo: f64, hi: f64, tol: f64) -> f64 {
    let g = |t: f64| t * y - f(t);
    let (mut a, mut b) = (lo, hi);
    while b - a > tol {
        let m1 = a + (b - a) / 3.0;
        let m2 = b - (b - a) / 3.0;
        if g(m1) < g(m2) {
            a = m1;
        } else {
            b = m2;
        }
    }
    g(0.5 * (a + b))
}
