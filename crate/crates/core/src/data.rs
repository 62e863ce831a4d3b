//! Data model shared by every other module.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProblemKind {
    Regression,
    Classification,
    /// Regression against intervals `[b_i − h, b_i + h]` sharing one half-width `h`.
    Interval,
}

impl ProblemKind {
    /// Margins are `b_i a_iᵀx` rather than `a_iᵀx − b_i`.
    pub fn is_classification(self) -> bool {
        matches!(self, ProblemKind::Classification)
    }
}

/// Design matrix `A` (n × p), labels `b` and the kind of problem they encode.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Matrix,
    labels: Vec<f64>,
    kind: ProblemKind,
    interval_halfwidth: Option<f64>,
}

impl Dataset {
    pub fn new(
        features: Matrix,
        labels: Vec<f64>,
        kind: ProblemKind,
        interval_halfwidth: Option<f64>,
    ) -> Result<Self> {
        if features.rows() == 0 || features.cols() == 0 {
            return Err(Error::InvalidDataset(format!(
                "need n ≥ 1 and p ≥ 1, got {}×{}",
                features.rows(),
                features.cols()
            )));
        }
        if labels.len() != features.rows() {
            return Err(Error::DimensionMismatch {
                expected: features.rows(),
                found: labels.len(),
            });
        }
        if !features.is_finite() || labels.iter().any(|b| !b.is_finite()) {
            return Err(Error::InvalidDataset("non-finite value".into()));
        }
        if kind == ProblemKind::Classification {
            if let Some((i, b)) = labels
                .iter()
                .enumerate()
                .find(|(_, &b)| b != 1.0 && b != -1.0)
            {
                return Err(Error::InvalidDataset(format!(
                    "invalid label {b} at sample {i}: classification labels must be ±1"
                )));
            }
        }
        match (kind, interval_halfwidth) {
            (ProblemKind::Interval, Some(h)) if h > 0.0 && h.is_finite() => {}
            (ProblemKind::Interval, _) => {
                return Err(Error::InvalidDataset(
                    "interval data requires a positive half-width".into(),
                ))
            }
            (_, Some(_)) => {
                return Err(Error::InvalidDataset(
                    "half-width is only meaningful for interval data".into(),
                ))
            }
            _ => {}
        }
        Ok(Self {
            features,
            labels,
            kind,
            interval_halfwidth,
        })
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn kind(&self) -> ProblemKind {
        self.kind
    }

    pub fn interval_halfwidth(&self) -> Option<f64> {
        self.interval_halfwidth
    }

    pub fn n(&self) -> usize {
        self.features.rows()
    }

    pub fn p(&self) -> usize {
        self.features.cols()
    }

    /// Samples listed in `idx`, in that order.
    pub fn select(&self, idx: &[usize]) -> Result<Self> {
        Self::new(
            self.features.select_rows(idx),
            idx.iter().map(|&i| self.labels[i]).collect(),
            self.kind,
            self.interval_halfwidth,
        )
    }
}

/// Outcome of a screening pass: which samples to keep and their test slack.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleMask {
    pub keep: Vec<bool>,
    /// Signed slack of the certified margin bound to the flat-interval
    /// boundary; positive means the sample was certified.
    pub scores: Vec<f64>,
}

impl SampleMask {
    pub fn keep_all(n: usize) -> Self {
        Self {
            keep: alloc::vec![true; n],
            scores: alloc::vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.keep.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keep.is_empty()
    }

    pub fn n_discarded(&self) -> usize {
        self.keep.iter().filter(|k| !**k).count()
    }

    pub fn kept_indices(&self) -> Vec<usize> {
        self.keep
            .iter()
            .enumerate()
            .filter_map(|(i, &k)| k.then_some(i))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    /// Coefficients `x ∈ ℝᵖ`.
    Linear,
    /// Representer weights `α ∈ ℝⁿ`.
    Kernelized,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelVector {
    pub coefficients: Vec<f64>,
    pub mode: Mode,
}

impl ModelVector {
    pub fn new(coefficients: Vec<f64>, mode: Mode) -> Result<Self> {
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter("non-finite model coefficient".into()));
        }
        Ok(Self { coefficients, mode })
    }

    pub fn zeros(dim: usize, mode: Mode) -> Self {
        Self {
            coefficients: alloc::vec![0.0; dim],
            mode,
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.coefficients
    }
}
