use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Flat parameter state shared between the master and the workers.
///
/// The element count is fixed for a given model configuration and every
/// element is finite.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector(Vec<f32>);

impl ParamVector {
    pub fn new(values: Vec<f32>) -> Result<Self> {
        if values.is_empty() {
            return Err(invalid("parameter vector must be nonempty"));
        }
        check_finite(&values)?;
        Ok(Self(values))
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim > 0, "parameter vector must be nonempty");
        Self(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f32> {
        self.0
    }

    /// Bitwise equality, distinguishing `0.0` from `-0.0`.
    pub fn bit_eq(&self, other: &ParamVector) -> bool {
        self.0.len() == other.0.len()
            && self
                .0
                .iter()
                .zip(&other.0)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }

    pub(crate) fn from_vec_unchecked(values: Vec<f32>) -> Self {
        debug_assert!(values.iter().all(|v| v.is_finite()));
        Self(values)
    }

    pub(crate) fn ensure_dim(&self, expected: usize) -> Result<()> {
        if self.dim() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: self.dim(),
            });
        }
        Ok(())
    }
}

impl AsRef<[f32]> for ParamVector {
    fn as_ref(&self) -> &[f32] {
        &self.0
    }
}

pub(crate) fn check_finite(values: &[f32]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::NonFinite { index }),
        None => Ok(()),
    }
}

/// When a worker stops local SGD to exchange with the master.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommPeriod {
    /// Exchange every `tau` iterations.
    Fixed { tau: u64 },
    /// Exchange once the cumulated batch loss exceeds `loss_cut`.
    ///
    /// `None` resolves to 20x the loss of the first minibatch at the
    /// initial parameters.
    Adaptive { loss_cut: Option<f64> },
}

impl CommPeriod {
    pub fn is_adaptive(&self) -> bool {
        matches!(self, CommPeriod::Adaptive { .. })
    }
}

/// Multiplier applied to the first minibatch loss when no explicit loss
/// threshold is configured.
pub const DEFAULT_LOSS_CUT_FACTOR: f64 = 20.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    /// Learning rate.
    pub eta: f64,
    /// Elastic moving rate, strictly inside (0, 1).
    pub alpha: f64,
    pub period: CommPeriod,
    pub batch_size: usize,
    /// Number of local iterations a worker executes.
    pub i_max: u64,
    /// Optional L2 decay folded into the SGD step. Defaults to 0.
    #[serde(default)]
    pub weight_decay: f64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            eta: 0.05,
            alpha: 0.1,
            period: CommPeriod::Fixed { tau: 100 },
            batch_size: 32,
            i_max: 1000,
            weight_decay: 0.0,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta.is_finite() && self.eta > 0.0) {
            return Err(invalid(format!("eta must be positive, got {}", self.eta)));
        }
        validate_alpha(self.alpha)?;
        match self.period {
            CommPeriod::Fixed { tau: 0 } => {
                return Err(invalid("tau must be positive"));
            }
            CommPeriod::Adaptive {
                loss_cut: Some(cut),
            } if cut.is_nan() || cut <= 0.0 => {
                return Err(invalid(format!("loss_cut must be positive, got {cut}")));
            }
            _ => {}
        }
        if self.batch_size == 0 {
            return Err(invalid("batch_size must be positive"));
        }
        if self.i_max == 0 {
            return Err(invalid("i_max must be positive"));
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return Err(invalid("weight_decay must be a nonnegative finite number"));
        }
        Ok(())
    }
}

pub(crate) fn validate_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(invalid(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}
