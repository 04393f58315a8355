//! Quantile flip-flops and the samplers built on them.
//!
//! Every continuous distribution here carries a pair of quantile branches
//! on `(0, 1/2]`: `Q1` maps onto the values below the median and `Q2` onto
//! the values above it. Neither branch ever forms `1 - u`, so feeding them
//! uneven uniform variates keeps the full precision of the tails.
//!
//! Scale parameters are applied as a final multiplication of the unit-scale
//! variate, so a sample at rate `λ` equals the rate-one sample times
//! `1/λ` (rounded once more to the model).

use std::f64::consts::{LN_2, SQRT_2};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use libm::erfc;
use statrs::function::erf::erfc_inv;
use statrs::function::gamma::{gamma_lr, gamma_ur};

use crate::bitstream::{fresh_bits, RandomBits};
use crate::float_model::FloatSpec;
use crate::uniform::{draw_canonical, draw_uneven_half, draw_uneven_unit};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum DistributionError {
    #[error("invalid parameter {name} = {value}")]
    Parameter { name: &'static str, value: f64 },
    #[error("{what} = {value} outside its domain")]
    Domain { what: &'static str, value: f64 },
    #[error("{0} has no closed-form quantile pair")]
    NoQuantile(&'static str),
}

/// Which half of the distribution: below the median (branch `Q1`) or above
/// it (branch `Q2`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Lower,
    Upper,
}

impl Side {
    pub const BOTH: [Side; 2] = [Side::Lower, Side::Upper];

    pub fn as_str(&self) -> &'static str {
        match self {
            Side::Lower => "lower",
            Side::Upper => "upper",
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Side {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "lower" | "q1" => Ok(Side::Lower),
            "upper" | "q2" => Ok(Side::Upper),
            _ => Err(format!("unknown side {s:?} (expected lower or upper)")),
        }
    }
}

/// A continuous distribution with validated parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DistributionSpec {
    Exponential { rate: f64 },
    Weibull { shape: f64, scale: f64 },
    Logistic { location: f64, scale: f64 },
    LogNormal { mu: f64, sigma: f64 },
    Uniform { low: f64, high: f64 },
    Normal { mean: f64, std_dev: f64 },
    /// Shape `α`, rate `β`.
    Gamma { shape: f64, rate: f64 },
}

fn positive(name: &'static str, value: f64) -> Result<f64, DistributionError> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(DistributionError::Parameter { name, value })
    }
}

fn finite(name: &'static str, value: f64) -> Result<f64, DistributionError> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(DistributionError::Parameter { name, value })
    }
}

impl DistributionSpec {
    pub fn exponential(rate: f64) -> Result<Self, DistributionError> {
        Ok(Self::Exponential {
            rate: positive("rate", rate)?,
        })
    }

    pub fn weibull(shape: f64, scale: f64) -> Result<Self, DistributionError> {
        Ok(Self::Weibull {
            shape: positive("shape", shape)?,
            scale: positive("scale", scale)?,
        })
    }

    pub fn logistic(location: f64, scale: f64) -> Result<Self, DistributionError> {
        Ok(Self::Logistic {
            location: finite("location", location)?,
            scale: positive("scale", scale)?,
        })
    }

    pub fn log_normal(mu: f64, sigma: f64) -> Result<Self, DistributionError> {
        Ok(Self::LogNormal {
            mu: finite("mu", mu)?,
            sigma: positive("sigma", sigma)?,
        })
    }

    pub fn uniform(low: f64, high: f64) -> Result<Self, DistributionError> {
        finite("low", low)?;
        finite("high", high)?;
        if high <= low || !(high - low).is_finite() {
            return Err(DistributionError::Parameter {
                name: "high",
                value: high,
            });
        }
        Ok(Self::Uniform { low, high })
    }

    pub fn normal(mean: f64, std_dev: f64) -> Result<Self, DistributionError> {
        Ok(Self::Normal {
            mean: finite("mean", mean)?,
            std_dev: positive("std_dev", std_dev)?,
        })
    }

    pub fn gamma(shape: f64, rate: f64) -> Result<Self, DistributionError> {
        Ok(Self::Gamma {
            shape: positive("shape", shape)?,
            rate: positive("rate", rate)?,
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Exponential { .. } => "exponential",
            Self::Weibull { .. } => "weibull",
            Self::Logistic { .. } => "logistic",
            Self::LogNormal { .. } => "lognormal",
            Self::Uniform { .. } => "uniform",
            Self::Normal { .. } => "normal",
            Self::Gamma { .. } => "gamma",
        }
    }

    pub fn has_quantile(&self) -> bool {
        !matches!(self, Self::Gamma { .. })
    }

    /// Closed support interval (endpoints may be infinite).
    pub fn support(&self) -> (f64, f64) {
        match *self {
            Self::Exponential { .. } | Self::Weibull { .. } | Self::Gamma { .. } => {
                (0.0, f64::INFINITY)
            }
            Self::LogNormal { .. } => (0.0, f64::INFINITY),
            Self::Uniform { low, high } => (low, high),
            Self::Logistic { .. } | Self::Normal { .. } => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    pub fn median(&self) -> f64 {
        match *self {
            Self::Exponential { rate } => LN_2 / rate,
            Self::Weibull { shape, scale } => scale * LN_2.powf(1.0 / shape),
            Self::Logistic { location, .. } => location,
            Self::LogNormal { mu, .. } => mu.exp(),
            Self::Uniform { low, high } => low + 0.5 * (high - low),
            Self::Normal { mean, .. } => mean,
            Self::Gamma { .. } => self.bisect_median(),
        }
    }

    fn bisect_median(&self) -> f64 {
        let (mut lo, mut hi) = (0.0, 1.0);
        while self.cdf(hi) < 0.5 {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.cdf(mid) < 0.5 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Cumulative distribution function, evaluated in binary64.
    pub fn cdf(&self, x: f64) -> f64 {
        let (lo, hi) = self.support();
        if x <= lo {
            return 0.0;
        }
        if x >= hi {
            return 1.0;
        }
        match *self {
            Self::Exponential { rate } => -(-rate * x).exp_m1(),
            Self::Weibull { shape, scale } => -(-(x / scale).powf(shape)).exp_m1(),
            Self::Logistic { location, scale } => 1.0 / (1.0 + (-(x - location) / scale).exp()),
            Self::LogNormal { mu, sigma } => 0.5 * erfc(-(x.ln() - mu) / (sigma * SQRT_2)),
            Self::Uniform { low, high } => (x - low) / (high - low),
            Self::Normal { mean, std_dev } => 0.5 * erfc(-(x - mean) / (std_dev * SQRT_2)),
            Self::Gamma { shape, rate } => gamma_lr(shape, rate * x),
        }
    }

    /// Survival function `1 - F(x)`, evaluated without cancellation.
    pub fn sf(&self, x: f64) -> f64 {
        let (lo, hi) = self.support();
        if x <= lo {
            return 1.0;
        }
        if x >= hi {
            return 0.0;
        }
        match *self {
            Self::Exponential { rate } => (-rate * x).exp(),
            Self::Weibull { shape, scale } => (-(x / scale).powf(shape)).exp(),
            Self::Logistic { location, scale } => 1.0 / (1.0 + ((x - location) / scale).exp()),
            Self::LogNormal { mu, sigma } => 0.5 * erfc((x.ln() - mu) / (sigma * SQRT_2)),
            Self::Uniform { low, high } => (high - x) / (high - low),
            Self::Normal { mean, std_dev } => 0.5 * erfc((x - mean) / (std_dev * SQRT_2)),
            Self::Gamma { shape, rate } => gamma_ur(shape, rate * x),
        }
    }

    /// Probability of the real interval `[a, b]`, taking differences on the
    /// side of the median where they do not cancel.
    pub fn interval_mass(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        if let Self::Exponential { rate } = *self {
            let a = a.max(0.0);
            if b <= a {
                return 0.0;
            }
            return (-rate * a).exp() * -(-rate * (b - a)).exp_m1();
        }
        let m = self.median();
        if b <= m {
            self.cdf(b) - self.cdf(a)
        } else if a >= m {
            self.sf(a) - self.sf(b)
        } else {
            (self.cdf(m) - self.cdf(a)) + (self.sf(m) - self.sf(b))
        }
    }

    /// Branch quantile in binary64: `Q1(u)` for [`Side::Lower`] with
    /// `0 < u < 1`, `Q2(u)` for [`Side::Upper`] with `0 < u <= 1`.
    pub fn quantile(&self, side: Side, u: f64) -> Result<f64, DistributionError> {
        if !self.has_quantile() {
            return Err(DistributionError::NoQuantile(self.name()));
        }
        let ok = match side {
            Side::Lower => u > 0.0 && u < 1.0,
            Side::Upper => u > 0.0 && u <= 1.0,
        };
        if !ok {
            return Err(DistributionError::Domain { what: "u", value: u });
        }
        Ok(self.unit_quantile(side, u).map_or(f64::NAN, |v| self.finish(v)))
    }

    /// Quantile at unit scale/location, before [`Self::finish`].
    #[inline]
    fn unit_quantile(&self, side: Side, u: f64) -> Option<f64> {
        Some(match (*self, side) {
            (Self::Exponential { .. }, Side::Lower) => -(-u).ln_1p(),
            (Self::Exponential { .. }, Side::Upper) => -u.ln(),
            (Self::Weibull { shape, .. }, Side::Lower) => (-(-u).ln_1p()).powf(1.0 / shape),
            (Self::Weibull { shape, .. }, Side::Upper) => (-u.ln()).powf(1.0 / shape),
            (Self::Logistic { .. }, Side::Lower) => u.ln() - (-u).ln_1p(),
            (Self::Logistic { .. }, Side::Upper) => (-u).ln_1p() - u.ln(),
            (Self::LogNormal { mu, sigma }, side) => (mu + sigma * probit(side, u)).exp(),
            (Self::Normal { .. }, side) => probit(side, u),
            (Self::Uniform { .. }, Side::Lower) => u,
            (Self::Uniform { .. }, Side::Upper) => -u,
            (Self::Gamma { .. }, _) => return None,
        })
    }

    /// Applies scale and location to a unit variate.
    #[inline]
    fn finish(&self, v: f64) -> f64 {
        match *self {
            Self::Exponential { rate } => v * (1.0 / rate),
            Self::Weibull { scale, .. } => v * scale,
            Self::Logistic { location, scale } => location + scale * v,
            Self::LogNormal { .. } => v,
            Self::Uniform { low, high } if v >= 0.0 => low + (high - low) * v,
            Self::Uniform { high, low } => high + (high - low) * v,
            Self::Normal { mean, std_dev } => mean + std_dev * v,
            Self::Gamma { rate, .. } => v * (1.0 / rate),
        }
    }

    /// Model-precision finishing step: scale factors are rounded to the
    /// model and multiplied in, affine maps are rounded once.
    #[inline]
    fn finish_model(&self, v: f64, spec: &FloatSpec) -> f64 {
        let scaled = match *self {
            Self::Exponential { rate } => v * spec.round_f64(1.0 / rate),
            Self::Weibull { scale, .. } => v * spec.round_f64(scale),
            Self::Gamma { rate, .. } => v * spec.round_f64(1.0 / rate),
            _ => self.finish(v),
        };
        spec.round_f64(scaled)
    }

    /// The branch quantile as a model computation: unit quantile evaluated
    /// in binary64 and rounded once, then [`Self::finish_model`].
    #[inline]
    pub fn model_quantile(&self, side: Side, u: f64, spec: &FloatSpec) -> f64 {
        match self.unit_quantile(side, u) {
            Some(v) => self.finish_model(spec.round_f64(v), spec),
            None => f64::NAN,
        }
    }

    /// `dQ/du` of the branch.
    pub fn quantile_derivative(&self, side: Side, u: f64) -> Result<f64, DistributionError> {
        let q = self.quantile(side, u)?;
        let sign = match side {
            Side::Lower => 1.0,
            Side::Upper => -1.0,
        };
        let d = match *self {
            Self::Exponential { rate } => match side {
                Side::Lower => 1.0 / (rate * (1.0 - u)),
                Side::Upper => -1.0 / (rate * u),
            },
            Self::Weibull { shape, scale } => {
                let (l, dl) = match side {
                    Side::Lower => (-(-u).ln_1p(), 1.0 / (1.0 - u)),
                    Side::Upper => (-u.ln(), -1.0 / u),
                };
                scale / shape * l.powf(1.0 / shape - 1.0) * dl
            }
            Self::Logistic { scale, .. } => sign * scale / (u * (1.0 - u)),
            Self::LogNormal { sigma, .. } => sign * q * sigma / normal_pdf(probit(side, u)),
            Self::Normal { std_dev, .. } => sign * std_dev / normal_pdf(probit(side, u)),
            Self::Uniform { low, high } => sign * (high - low),
            Self::Gamma { .. } => unreachable!("rejected by quantile"),
        };
        Ok(d)
    }

    /// Condition number `|u Q'(u) / Q(u)|` of a branch, with the analytic
    /// limit at removable singularities.
    pub fn condition_number(&self, side: Side, u: f64) -> Result<f64, DistributionError> {
        if !self.has_quantile() {
            return Err(DistributionError::NoQuantile(self.name()));
        }
        if !(0.0..=1.0).contains(&u) || (side == Side::Lower && u == 1.0) {
            return Err(DistributionError::Domain { what: "u", value: u });
        }
        let exp_lower = |u: f64| {
            if u == 0.0 {
                1.0
            } else {
                -u / ((1.0 - u) * (-u).ln_1p())
            }
        };
        let c = match (*self, side) {
            (Self::Exponential { .. }, Side::Lower) => exp_lower(u),
            (Self::Exponential { .. }, Side::Upper) => -1.0 / u.ln(),
            (Self::Weibull { shape, .. }, Side::Lower) => exp_lower(u) / shape,
            (Self::Weibull { shape, .. }, Side::Upper) => -1.0 / (shape * u.ln()),
            (Self::Uniform { low, .. }, Side::Lower) if u == 0.0 && low == 0.0 => 1.0,
            _ if u == 0.0 => {
                return Err(DistributionError::Domain { what: "u", value: u });
            }
            _ => {
                let q = self.quantile(side, u)?;
                (u * self.quantile_derivative(side, u)? / q).abs()
            }
        };
        Ok(c.abs())
    }
}

impl fmt::Display for DistributionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Self::Exponential { rate } => write!(f, "exponential(rate={rate})"),
            Self::Weibull { shape, scale } => write!(f, "weibull(shape={shape},scale={scale})"),
            Self::Logistic { location, scale } => {
                write!(f, "logistic(location={location},scale={scale})")
            }
            Self::LogNormal { mu, sigma } => write!(f, "lognormal(mu={mu},sigma={sigma})"),
            Self::Uniform { low, high } => write!(f, "uniform(low={low},high={high})"),
            Self::Normal { mean, std_dev } => write!(f, "normal(mean={mean},std_dev={std_dev})"),
            Self::Gamma { shape, rate } => write!(f, "gamma(shape={shape},rate={rate})"),
        }
    }
}

/// Standard normal quantile on a branch: `Φ⁻¹(u)` below the median,
/// `Φ⁻¹(1 - u)` above it.
#[inline]
fn probit(side: Side, u: f64) -> f64 {
    let z = SQRT_2 * erfc_inv(2.0 * u);
    match side {
        Side::Lower => -z,
        Side::Upper => z,
    }
}

fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

fn check_u_rate(u: f64, rate: f64, upper_closed: bool) -> Result<(), DistributionError> {
    positive("rate", rate)?;
    let ok = u > 0.0 && (u < 1.0 || (upper_closed && u == 1.0));
    if ok {
        Ok(())
    } else {
        Err(DistributionError::Domain { what: "u", value: u })
    }
}

/// Exponential small-value branch `-log1p(-u) / λ`.
pub fn exp_q1(u: f64, rate: f64) -> Result<f64, DistributionError> {
    check_u_rate(u, rate, false)?;
    Ok(-(-u).ln_1p() / rate)
}

/// Exponential large-value branch `-log(u) / λ`.
pub fn exp_q2(u: f64, rate: f64) -> Result<f64, DistributionError> {
    check_u_rate(u, rate, true)?;
    Ok(-u.ln() / rate)
}

/// Exponential CDF `-expm1(-λx)`.
pub fn exp_cdf(x: f64, rate: f64) -> Result<f64, DistributionError> {
    positive("rate", rate)?;
    if x.is_nan() || x < 0.0 {
        return Err(DistributionError::Domain { what: "x", value: x });
    }
    Ok(-(-rate * x).exp_m1())
}

#[inline]
fn fair_bit<R: RandomBits + ?Sized>(src: &mut R) -> bool {
    fresh_bits(src, 1) == 1
}

/// Robust inversion: a fair bit picks `Q1` or `Q2`, which is fed an uneven
/// variate from `(0, 1/2]`. Since `u = 1/2` is half as probable as its
/// neighbour, the median is not double-counted.
///
/// # Panics
///
/// If `dist` has no quantile pair.
#[inline]
pub fn sample_flip_flop<R: RandomBits + ?Sized>(
    dist: &DistributionSpec,
    src: &mut R,
    spec: &FloatSpec,
) -> f64 {
    assert!(dist.has_quantile(), "{} has no quantile pair", dist.name());
    let side = if fair_bit(src) { Side::Upper } else { Side::Lower };
    let u = draw_uneven_half(src, spec);
    dist.model_quantile(side, u, spec)
}

/// Antithetic pair `(Q1(u), Q2(u))` from a single uneven `u`.
pub fn sample_antithetic<R: RandomBits + ?Sized>(
    dist: &DistributionSpec,
    src: &mut R,
    spec: &FloatSpec,
) -> (f64, f64) {
    assert!(dist.has_quantile(), "{} has no quantile pair", dist.name());
    let u = draw_uneven_half(src, spec);
    (
        dist.model_quantile(Side::Lower, u, spec),
        dist.model_quantile(Side::Upper, u, spec),
    )
}

/// Half-normal by rejection from a unit exponential proposal, with a random
/// sign. Proposal and acceptance variates are both uneven.
fn unit_normal<R: RandomBits + ?Sized>(src: &mut R, spec: &FloatSpec) -> f64 {
    let proposal = DistributionSpec::Exponential { rate: 1.0 };
    loop {
        let y = sample_flip_flop(&proposal, src, spec);
        let u = draw_uneven_unit(src, spec);
        let d = y - 1.0;
        if u <= (-0.5 * d * d).exp() {
            return if fair_bit(src) { -y } else { y };
        }
    }
}

/// Normal variate `μ + σ z`.
pub fn sample_normal<R: RandomBits + ?Sized>(
    src: &mut R,
    spec: &FloatSpec,
    mean: f64,
    std_dev: f64,
) -> Result<f64, DistributionError> {
    finite("mean", mean)?;
    positive("std_dev", std_dev)?;
    let z = unit_normal(src, spec);
    Ok(spec.round_f64(mean + std_dev * z))
}

/// Gamma variate with shape `α` and rate `β` (Marsaglia–Tsang squeeze,
/// boosted by `u^(1/α)` for `α < 1`).
pub fn sample_gamma<R: RandomBits + ?Sized>(
    src: &mut R,
    spec: &FloatSpec,
    shape: f64,
    rate: f64,
) -> Result<f64, DistributionError> {
    positive("shape", shape)?;
    positive("rate", rate)?;
    let boosted = shape < 1.0;
    let a = if boosted { shape + 1.0 } else { shape };
    let d = a - 1.0 / 3.0;
    let c = 1.0 / (9.0 * d).sqrt();
    let unit = loop {
        let x = unit_normal(src, spec);
        let t = 1.0 + c * x;
        if t <= 0.0 {
            continue;
        }
        let v = t * t * t;
        let u = draw_uneven_unit(src, spec);
        let x2 = x * x;
        if u < 1.0 - 0.0331 * x2 * x2 || u.ln() < 0.5 * x2 + d * (1.0 - v + v.ln()) {
            break d * v;
        }
    };
    let unit = if boosted {
        unit * draw_uneven_unit(src, spec).powf(1.0 / shape)
    } else {
        unit
    };
    let dist = DistributionSpec::Gamma { shape, rate };
    Ok(dist.finish_model(spec.round_f64(unit), spec))
}

/// Log-normal variate `exp(μ + σ z)`, with `z` drawn at binary64 so the
/// exponential does not amplify a coarse normal.
pub fn sample_lognormal<R: RandomBits + ?Sized>(
    src: &mut R,
    spec: &FloatSpec,
    mu: f64,
    sigma: f64,
) -> Result<f64, DistributionError> {
    finite("mu", mu)?;
    positive("sigma", sigma)?;
    let z = unit_normal(src, &FloatSpec::BINARY64);
    Ok(spec.round_f64((mu + sigma * z).exp()))
}

/// Uniform variate on `(low, high)`: an affine map of an uneven unit
/// variate.
pub fn sample_uniform<R: RandomBits + ?Sized>(
    src: &mut R,
    spec: &FloatSpec,
    low: f64,
    high: f64,
) -> Result<f64, DistributionError> {
    DistributionSpec::uniform(low, high)?;
    let u = draw_uneven_unit(src, spec);
    Ok(spec.round_f64(low + (high - low) * u))
}

/// One variate from `dist` by its preferred robust method: rejection for
/// the normal and gamma, an affine uneven variate for the uniform, the
/// quantile flip-flop otherwise.
pub fn sample<R: RandomBits + ?Sized>(
    dist: &DistributionSpec,
    src: &mut R,
    spec: &FloatSpec,
) -> f64 {
    match *dist {
        DistributionSpec::Normal { mean, std_dev } => spec.round_f64(mean + std_dev * unit_normal(src, spec)),
        DistributionSpec::Gamma { shape, rate } => {
            sample_gamma(src, spec, shape, rate).expect("validated parameters")
        }
        DistributionSpec::Uniform { low, high } => {
            spec.round_f64(low + (high - low) * draw_uneven_unit(src, spec))
        }
        _ => sample_flip_flop(dist, src, spec),
    }
}

/// Exponential transform of a canonical variate `u`, as done by common
/// libraries: `-log(1 - u)` with `1 - u` rounded to the model, or the
/// `log1p` form.
#[inline]
pub fn baseline_exponential_of(u: f64, spec: &FloatSpec, rate: f64, use_log1p: bool) -> f64 {
    let unit = if use_log1p {
        spec.round_f64(-(-u).ln_1p())
    } else {
        let v = spec.round_f64(1.0 - u);
        spec.round_f64(-v.ln())
    };
    // -0.0 from log(1) is the same sample as +0.0
    let unit = unit + 0.0;
    spec.round_f64(unit * spec.round_f64(1.0 / rate))
}

/// Canonical inversion: `u` from [`draw_canonical`] with `bits`-bit
/// integers, then [`baseline_exponential_of`].
#[inline]
pub fn baseline_exponential<R: RandomBits + ?Sized>(
    src: &mut R,
    spec: &FloatSpec,
    rate: f64,
    bits: u32,
    use_log1p: bool,
) -> f64 {
    let u = draw_canonical(src, spec, bits);
    baseline_exponential_of(u, spec, rate, use_log1p)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_exp() -> DistributionSpec {
        DistributionSpec::exponential(1.0).unwrap()
    }

    #[test]
    fn exponential_branches() {
        assert_eq!(exp_q1(0.5, 1.0).unwrap(), LN_2);
        assert_eq!(exp_q2(0.5, 1.0).unwrap(), LN_2);
        assert_eq!(exp_q2(1.0, 1.0).unwrap(), 0.0);
        assert!((exp_q1(0.5, 2.0).unwrap() - LN_2 / 2.0).abs() < 1e-16);
        assert!(exp_q1(0.0, 1.0).is_err());
        assert!(exp_q1(1.0, 1.0).is_err());
        assert!(exp_q2(0.0, 1.0).is_err());
        assert!(exp_q2(0.5, 0.0).is_err());
        assert_eq!(exp_cdf(0.0, 1.0).unwrap(), 0.0);
        assert!(exp_cdf(-1.0, 1.0).is_err());
    }

    #[test]
    fn parameter_validation() {
        assert!(DistributionSpec::exponential(0.0).is_err());
        assert!(DistributionSpec::exponential(f64::NAN).is_err());
        assert!(DistributionSpec::weibull(1.0, -1.0).is_err());
        assert!(DistributionSpec::uniform(1.0, 1.0).is_err());
        assert!(DistributionSpec::gamma(0.0, 1.0).is_err());
        assert!(DistributionSpec::log_normal(f64::INFINITY, 1.0).is_err());
    }

    #[test]
    fn medians_meet() {
        let dists = [
            unit_exp(),
            DistributionSpec::weibull(2.0, 3.0).unwrap(),
            DistributionSpec::logistic(1.0, 2.0).unwrap(),
            DistributionSpec::log_normal(0.5, 0.7).unwrap(),
            DistributionSpec::uniform(-1.0, 3.0).unwrap(),
            DistributionSpec::normal(2.0, 3.0).unwrap(),
        ];
        for d in dists {
            let m = d.median();
            for side in Side::BOTH {
                let q = d.quantile(side, 0.5).unwrap();
                assert!((q - m).abs() <= 2.0 * f64::EPSILON * m.abs().max(1e-300), "{d} {side}");
            }
        }
    }

    #[test]
    fn gamma_has_no_quantile() {
        let g = DistributionSpec::gamma(3.0, 1.0).unwrap();
        assert!(matches!(g.quantile(Side::Lower, 0.3), Err(DistributionError::NoQuantile(_))));
        assert!((g.cdf(g.median()) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn condition_limits() {
        let d = unit_exp();
        assert_eq!(d.condition_number(Side::Lower, 0.0).unwrap(), 1.0);
        assert!((d.condition_number(Side::Upper, (-1f64).exp()).unwrap() - 1.0).abs() < 1e-15);
        assert!(d.condition_number(Side::Upper, 1e-300).unwrap() < 0.002);
        let w = DistributionSpec::weibull(2.0, 1.0).unwrap();
        assert_eq!(w.condition_number(Side::Lower, 0.0).unwrap(), 0.5);
    }

    #[test]
    fn model_quantile_rounds_to_model() {
        let spec = FloatSpec::BINARY32;
        let d = unit_exp();
        let x = d.model_quantile(Side::Upper, 0.125, &spec);
        assert_eq!(x, (-(0.125f64).ln()) as f32 as f64);
    }

    #[test]
    fn baseline_without_log1p_collapses_small_u() {
        let spec = FloatSpec::BINARY32;
        let u = 2f64.powi(-30);
        assert_eq!(baseline_exponential_of(u, &spec, 1.0, false), 0.0);
        let x = baseline_exponential_of(u, &spec, 1.0, true);
        assert_eq!(x, u as f32 as f64);
    }
}
