//! Conditioning and entropy diagnostics, and the predicted precision loss
//! per octave.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::distributions::{DistributionError, DistributionSpec, Side};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum AnalysisError {
    #[error("precision must be at least 2, got {0}")]
    Precision(u32),
    #[error("tail depth k = {k} must be below the precision {precision}")]
    TailDepth { k: u32, precision: u32 },
    #[error("octave index must be at least 1")]
    Octave,
    #[error("step δu = {0} must be positive")]
    Step(f64),
    #[error(transparent)]
    Distribution(#[from] DistributionError),
}

/// How the uniform variates feeding a quantile branch are spaced, as seen
/// by that branch.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum VariateStream {
    /// Spacing `2^-P` throughout.
    Even,
    /// Canonical variates from `bits`-bit integers.
    Partial { bits: u32 },
    /// Every model value, weighted by its rounding interval.
    Uneven,
}

impl fmt::Display for VariateStream {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VariateStream::Even => f.write_str("even"),
            VariateStream::Partial { bits } => write!(f, "partial-b{bits}"),
            VariateStream::Uneven => f.write_str("uneven"),
        }
    }
}

/// Predicted bits lost in one octave of one branch.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossPrediction {
    pub k: u32,
    pub side: Side,
    pub stream: VariateStream,
    /// Missing entropy of the variate stream in this octave.
    pub deficit_bits: f64,
    /// `log2` of the branch condition number at the octave's
    /// representative point.
    pub modulation_bits: f64,
    /// `max(0, deficit + modulation)`.
    pub loss_bits: f64,
}

/// Relative output change `δu |Q'(u) / Q(u)|` of a branch for a fixed
/// absolute input step.
pub fn effective_precision(
    dist: &DistributionSpec,
    side: Side,
    u: f64,
    du: f64,
) -> Result<f64, AnalysisError> {
    if du.is_nan() || du <= 0.0 {
        return Err(AnalysisError::Step(du));
    }
    let q = dist.quantile(side, u)?;
    let d = dist.quantile_derivative(side, u)?;
    Ok(du * (d / q).abs())
}

fn check_precision(precision: u32) -> Result<(), AnalysisError> {
    if precision < 2 {
        Err(AnalysisError::Precision(precision))
    } else {
        Ok(())
    }
}

/// Entropy of even variates: `P` bits.
pub fn entropy_even(precision: u32) -> Result<f64, AnalysisError> {
    check_precision(precision)?;
    Ok(precision as f64)
}

/// Entropy of uneven variates with `K` normal binades below one and the
/// remaining mass `2^-K` spread over the subnormal floor:
/// `Σ_{k=1..K} 2^-k (P - 1 + k) + 2^-K (P - 1 + K) = P + 1 - 2^(1-K)`.
pub fn entropy_uneven(precision: u32, min_exponent: u32) -> Result<f64, AnalysisError> {
    check_precision(precision)?;
    Ok(precision as f64 + 1.0 - (1.0 - min_exponent as f64).exp2())
}

/// Entropy of even variates restricted to `u < 2^-k`: `P - k`.
pub fn entropy_even_tail(precision: u32, k: u32) -> Result<f64, AnalysisError> {
    check_precision(precision)?;
    if k >= precision {
        return Err(AnalysisError::TailDepth { k, precision });
    }
    Ok((precision - k) as f64)
}

/// Entropy of uneven variates on `(0, 1)` restricted to `u < 2^-k`: the
/// sub-space is a copy of the whole with `k` fewer binades, so the entropy
/// stays near `P + 1` instead of falling one bit per octave.
pub fn entropy_uneven_tail(precision: u32, min_exponent: u32, k: u32) -> Result<f64, AnalysisError> {
    if k > min_exponent {
        return Err(AnalysisError::TailDepth { k, precision: min_exponent });
    }
    entropy_uneven(precision, min_exponent - k)
}

/// Representative tail coordinate of octave `k`, the geometric midpoint of
/// `[2^-(k+1), 2^-k)`.
pub fn representative_u(k: u32) -> f64 {
    (-(k as f64) - 0.5).exp2()
}

/// Predicted loss for octave `k` (tail coordinate in `[2^-(k+1), 2^-k)`) of
/// `side`: the entropy deficit `max(0, k - (B - P))` of the stream plus
/// `log2 C(Q)` at [`representative_u`], floored at zero.
pub fn predicted_loss(
    k: u32,
    stream: VariateStream,
    precision: u32,
    dist: &DistributionSpec,
    side: Side,
) -> Result<LossPrediction, AnalysisError> {
    check_precision(precision)?;
    if k == 0 {
        return Err(AnalysisError::Octave);
    }
    let deficit = match stream {
        VariateStream::Even => k as f64,
        VariateStream::Partial { bits } => (k as f64 - (bits as f64 - precision as f64)).max(0.0),
        VariateStream::Uneven => 0.0,
    };
    let modulation = dist.condition_number(side, representative_u(k))?.log2();
    Ok(LossPrediction {
        k,
        side,
        stream,
        deficit_bits: deficit,
        modulation_bits: modulation,
        loss_bits: (deficit + modulation).max(0.0),
    })
}
