//! Binary floating-point model with precision `P` and minimum normal
//! exponent `-K`.
//!
//! [`FloatSpec`] covers native binary32/binary64 and software-emulated
//! precisions. Values that flow through the samplers are carried as `f64`
//! holding a number exactly representable at the model precision; the
//! exact type [`PFloat`] and the dyadic interval endpoints in [`Dyadic`]
//! are used wherever rounding must be reasoned about exactly.
//!
//! Only round-to-nearest, ties-to-even is modelled, and only non-negative
//! values have a [`PFloat`] form.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum FloatError {
    #[error("precision {0} outside [2, 53]")]
    Precision(u32),
    #[error("minimum exponent {0} outside [1, 1022], or subnormals below 2^-1074")]
    MinExponent(u32),
    #[error("value overflows the exponent range")]
    Overflow,
    #[error("unrecognised precision {0:?} (expected binary32, binary64 or emulated:P)")]
    Parse(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FloatMode {
    Native32,
    Native64,
    Emulated,
}

/// Precision `P` (mantissa bits including the implicit one), minimum normal
/// exponent `-K`, and whether hardware performs the rounding.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct FloatSpec {
    precision: u32,
    min_exponent: u32,
    mode: FloatMode,
}

impl FloatSpec {
    pub const BINARY32: FloatSpec = FloatSpec {
        precision: 24,
        min_exponent: 126,
        mode: FloatMode::Native32,
    };
    pub const BINARY64: FloatSpec = FloatSpec {
        precision: 53,
        min_exponent: 1022,
        mode: FloatMode::Native64,
    };

    /// Software-emulated precision with the binary32 exponent range.
    pub fn emulated(precision: u32) -> Result<Self, FloatError> {
        Self::emulated_with_range(precision, 126)
    }

    pub fn emulated_with_range(precision: u32, min_exponent: u32) -> Result<Self, FloatError> {
        if !(2..=53).contains(&precision) {
            return Err(FloatError::Precision(precision));
        }
        // every model value, subnormals included, must be an f64
        if !(1..=1022).contains(&min_exponent) || min_exponent + precision - 1 > 1074 {
            return Err(FloatError::MinExponent(min_exponent));
        }
        Ok(Self {
            precision,
            min_exponent,
            mode: FloatMode::Emulated,
        })
    }

    #[inline]
    pub fn precision(&self) -> u32 {
        self.precision
    }

    /// `K`, where `2^-K` is the smallest normal value.
    #[inline]
    pub fn min_exponent(&self) -> u32 {
        self.min_exponent
    }

    /// Largest binade exponent, `K + 1` as in IEEE 754.
    #[inline]
    pub fn max_exponent(&self) -> i32 {
        self.min_exponent as i32 + 1
    }

    #[inline]
    pub fn mode(&self) -> FloatMode {
        self.mode
    }

    /// `ε = 2^-P`.
    pub fn epsilon(&self) -> f64 {
        pow2(-(self.precision as i32))
    }

    /// Exponent of the ULP of subnormals (and of the lowest normal binade).
    #[inline]
    pub fn min_scale(&self) -> i32 {
        -(self.min_exponent as i32) - (self.precision as i32 - 1)
    }

    #[inline]
    pub fn max_scale(&self) -> i32 {
        self.max_exponent() - (self.precision as i32 - 1)
    }

    #[inline]
    fn top(&self) -> u64 {
        1u64 << self.precision
    }

    #[inline]
    fn hidden(&self) -> u64 {
        1u64 << (self.precision - 1)
    }

    pub fn zero(&self) -> PFloat {
        PFloat {
            scale: self.min_scale(),
            mantissa: 0,
        }
    }

    /// Largest finite value.
    pub fn max_value(&self) -> PFloat {
        PFloat {
            scale: self.max_scale(),
            mantissa: self.top() - 1,
        }
    }

    /// Nearest model value to `j * 2^exp`, ties to even mantissa.
    pub fn round_scaled(&self, j: u128, exp: i32) -> Result<PFloat, FloatError> {
        if j == 0 {
            return Ok(self.zero());
        }
        let p = self.precision as i32;
        let len = 128 - j.leading_zeros() as i32;
        let leading = len - 1 + exp;
        let scale = (leading - (p - 1)).max(self.min_scale());
        let drop = scale - exp;
        let mut mantissa = if drop <= 0 {
            j << (-drop) as u32
        } else if drop > len {
            // below half an ULP of the target scale
            0
        } else {
            let drop = drop as u32;
            let kept = if drop == 128 { 0 } else { j >> drop };
            let rem = if drop == 128 { j } else { j & ((1u128 << drop) - 1) };
            let half = 1u128 << (drop - 1);
            let up = rem > half || (rem == half && kept & 1 == 1);
            kept + up as u128
        };
        let mut scale = scale;
        if mantissa == self.top() as u128 {
            mantissa >>= 1;
            scale += 1;
        }
        if mantissa == 0 {
            return Ok(self.zero());
        }
        if scale > self.max_scale() {
            return Err(FloatError::Overflow);
        }
        Ok(PFloat {
            scale,
            mantissa: mantissa as u64,
        })
    }

    /// Nearest model value to `j / 2^n`.
    pub fn round_ratio(&self, j: u128, n: i32) -> Result<PFloat, FloatError> {
        self.round_scaled(j, -n)
    }

    /// `j / 2^n` rounded to the model, returned as an `f64`.
    ///
    /// Native modes use the hardware integer-to-float conversion, which is
    /// round-to-nearest, ties-to-even.
    #[inline]
    pub fn round_ratio_f64(&self, j: u64, n: i32) -> f64 {
        match self.mode {
            FloatMode::Native32 => {
                let v = (j as f32) as f64 * pow2(-n);
                if v < f32::MIN_POSITIVE as f64 {
                    // subnormal results need the second rounding
                    self.round_f64(v)
                } else {
                    v
                }
            }
            FloatMode::Native64 if n <= 1022 => (j as f64) * pow2(-n),
            _ => match self.round_scaled(j as u128, -n) {
                Ok(x) => x.to_f64(),
                Err(_) => f64::INFINITY,
            },
        }
    }

    /// Rounds an `f64` to the model precision. Overflow gives infinity;
    /// NaN and infinities pass through.
    #[inline]
    pub fn round_f64(&self, x: f64) -> f64 {
        match self.mode {
            FloatMode::Native32 => x as f32 as f64,
            FloatMode::Native64 => x,
            FloatMode::Emulated => {
                if !x.is_finite() || x == 0.0 {
                    return x;
                }
                let (j, exp) = decompose(x.abs());
                let magnitude = match self.round_scaled(j as u128, exp) {
                    Ok(v) => v.to_f64(),
                    Err(_) => f64::INFINITY,
                };
                magnitude.copysign(x)
            }
        }
    }

    /// The exact model value equal to `x`, if there is one.
    pub fn to_pfloat(&self, x: f64) -> Option<PFloat> {
        if !x.is_finite() || x < 0.0 {
            return None;
        }
        if x == 0.0 {
            return Some(self.zero());
        }
        let (j, exp) = decompose(x);
        let v = self.round_scaled(j as u128, exp).ok()?;
        (v.to_f64() == x).then_some(v)
    }

    /// IEEE-style bit pattern: biased exponent above `P - 1` fraction bits.
    /// Matches `f32::to_bits` / `f64::to_bits` for the native modes and is
    /// monotone in the value.
    pub fn encode(&self, x: PFloat) -> u64 {
        let frac_bits = self.precision - 1;
        if x.mantissa < self.hidden() {
            return x.mantissa;
        }
        let biased = (x.scale - self.min_scale() + 1) as u64;
        (biased << frac_bits) | (x.mantissa - self.hidden())
    }

    pub fn decode(&self, bits: u64) -> PFloat {
        let frac_bits = self.precision - 1;
        let biased = bits >> frac_bits;
        let frac = bits & (self.hidden() - 1);
        if biased == 0 {
            PFloat {
                scale: self.min_scale(),
                mantissa: frac,
            }
        } else {
            PFloat {
                scale: self.min_scale() + biased as i32 - 1,
                mantissa: frac | self.hidden(),
            }
        }
    }

    /// Bit pattern of a non-negative `f64` already representable in the
    /// model.
    #[inline]
    pub fn encode_f64(&self, x: f64) -> Option<u64> {
        match self.mode {
            FloatMode::Native32 => {
                let f = x as f32;
                (f as f64 == x && x >= 0.0).then(|| (f.to_bits() & 0x7fff_ffff) as u64)
            }
            FloatMode::Native64 => (x >= 0.0 && x.is_finite()).then(|| x.to_bits() & !(1 << 63)),
            FloatMode::Emulated => self.to_pfloat(x).map(|p| self.encode(p)),
        }
    }

    pub fn successor(&self, x: PFloat) -> Option<PFloat> {
        let mut next = PFloat {
            scale: x.scale,
            mantissa: x.mantissa + 1,
        };
        if next.mantissa == self.top() {
            next = PFloat {
                scale: x.scale + 1,
                mantissa: self.hidden(),
            };
        }
        (next.scale <= self.max_scale()).then_some(next)
    }

    pub fn predecessor(&self, x: PFloat) -> Option<PFloat> {
        if x.mantissa == 0 {
            return None;
        }
        if x.mantissa == self.hidden() && x.scale > self.min_scale() {
            return Some(PFloat {
                scale: x.scale - 1,
                mantissa: self.top() - 1,
            });
        }
        Some(PFloat {
            scale: x.scale,
            mantissa: x.mantissa - 1,
        })
    }

    /// Reals that round to `x`: the midpoints to its neighbours. Both ends
    /// belong to `x` exactly when its mantissa is even. Zero's interval
    /// starts at zero; the top value's interval ends at the overflow
    /// threshold.
    pub fn rounding_interval(&self, x: PFloat) -> RoundingInterval {
        let m = x.mantissa as u128;
        let upper = Dyadic::new(2 * m + 1, x.scale - 1);
        let lower = if m == 0 {
            Dyadic::ZERO
        } else if x.mantissa == self.hidden() && x.scale > self.min_scale() {
            // the ULP below a binade boundary is half as wide
            Dyadic::new(4 * m - 1, x.scale - 2)
        } else {
            Dyadic::new(2 * m - 1, x.scale - 1)
        };
        RoundingInterval {
            lower,
            upper,
            closed: x.mantissa.is_multiple_of(2),
        }
    }

    /// Label used in reports and accepted by [`FromStr`].
    pub fn label(&self) -> String {
        match self.mode {
            FloatMode::Native32 => "binary32".into(),
            FloatMode::Native64 => "binary64".into(),
            FloatMode::Emulated if self.min_exponent == 126 => {
                format!("emulated:{}", self.precision)
            }
            FloatMode::Emulated => format!("emulated:{}:{}", self.precision, self.min_exponent),
        }
    }
}

impl fmt::Display for FloatSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl FromStr for FloatSpec {
    type Err = FloatError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parse_err = || FloatError::Parse(s.to_owned());
        match s {
            "binary32" | "f32" => Ok(Self::BINARY32),
            "binary64" | "f64" => Ok(Self::BINARY64),
            _ => {
                let rest = s.strip_prefix("emulated:").ok_or_else(parse_err)?;
                let mut parts = rest.split(':');
                let p = parts.next().and_then(|p| p.parse().ok()).ok_or_else(parse_err)?;
                match parts.next() {
                    None => Self::emulated(p),
                    Some(k) => {
                        let k = k.parse().map_err(|_| parse_err())?;
                        if parts.next().is_some() {
                            return Err(parse_err());
                        }
                        Self::emulated_with_range(p, k)
                    }
                }
            }
        }
    }
}

/// A non-negative model value `mantissa * 2^scale` in canonical form:
/// normal values have the leading mantissa bit set, subnormals and zero sit
/// at the minimum scale. Canonical form makes the derived ordering agree
/// with the ordering of the reals.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PFloat {
    scale: i32,
    mantissa: u64,
}

impl PFloat {
    #[inline]
    pub fn mantissa(&self) -> u64 {
        self.mantissa
    }

    /// Exponent of the value's ULP.
    #[inline]
    pub fn scale(&self) -> i32 {
        self.scale
    }

    pub fn is_zero(&self) -> bool {
        self.mantissa == 0
    }

    /// Exact for every model with `P <= 53` inside the binary64 range.
    #[inline]
    pub fn to_f64(&self) -> f64 {
        (self.mantissa as f64) * pow2(self.scale)
    }

    pub fn to_dyadic(&self) -> Dyadic {
        Dyadic::new(self.mantissa as u128, self.scale)
    }
}

/// Non-negative dyadic rational `num * 2^exp`, kept in lowest terms.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Dyadic {
    num: u128,
    exp: i32,
}

impl Dyadic {
    pub const ZERO: Dyadic = Dyadic { num: 0, exp: 0 };

    pub fn new(num: u128, exp: i32) -> Self {
        if num == 0 {
            return Self::ZERO;
        }
        let tz = num.trailing_zeros();
        Self {
            num: num >> tz,
            exp: exp + tz as i32,
        }
    }

    pub fn num(&self) -> u128 {
        self.num
    }

    pub fn exp(&self) -> i32 {
        self.exp
    }

    /// Correctly rounded; exact when the numerator fits in 53 bits.
    pub fn to_f64(&self) -> f64 {
        if self.num == 0 {
            return 0.0;
        }
        if self.num < (1u128 << 53) {
            return mul_pow2(self.num as f64, self.exp);
        }
        match FloatSpec::BINARY64.round_scaled(self.num, self.exp) {
            Ok(v) => v.to_f64(),
            Err(_) => f64::INFINITY,
        }
    }

    fn msb(&self) -> i32 {
        (127 - self.num.leading_zeros() as i32) + self.exp
    }

    /// Exact sum, if representable with a 128-bit numerator.
    pub fn checked_add(&self, other: &Dyadic) -> Option<Dyadic> {
        if other.num == 0 {
            return Some(*self);
        }
        if self.num == 0 {
            return Some(*other);
        }
        let exp = self.exp.min(other.exp);
        let a = shl_exact(self.num, (self.exp - exp) as u32)?;
        let b = shl_exact(other.num, (other.exp - exp) as u32)?;
        a.checked_add(b).map(|s| Dyadic::new(s, exp))
    }

    /// `log2` of the value; `-inf` for zero.
    pub fn log2(&self) -> f64 {
        if self.num == 0 {
            return f64::NEG_INFINITY;
        }
        let shift = (128 - self.num.leading_zeros()).saturating_sub(60);
        ((self.num >> shift) as f64).log2() + (self.exp + shift as i32) as f64
    }

    /// Exact difference `self - other`, if non-negative and representable
    /// with a 128-bit numerator.
    pub fn checked_sub(&self, other: &Dyadic) -> Option<Dyadic> {
        if other.num == 0 {
            return Some(*self);
        }
        let exp = self.exp.min(other.exp);
        let a = shl_exact(self.num, (self.exp - exp) as u32)?;
        let b = shl_exact(other.num, (other.exp - exp) as u32)?;
        a.checked_sub(b).map(|d| Dyadic::new(d, exp))
    }
}

impl Ord for Dyadic {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self.num == 0, other.num == 0) {
            (true, true) => return Ordering::Equal,
            (true, false) => return Ordering::Less,
            (false, true) => return Ordering::Greater,
            _ => {}
        }
        match self.msb().cmp(&other.msb()) {
            Ordering::Equal => {}
            ord => return ord,
        }
        // equal leading positions: align on the smaller exponent
        let exp = self.exp.min(other.exp);
        let a = self.num << (self.exp - exp) as u32;
        let b = other.num << (other.exp - exp) as u32;
        a.cmp(&b)
    }
}

impl PartialOrd for Dyadic {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// The reals `[lower, upper]` that round to one model value; the endpoints
/// are included only when `closed` is set.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RoundingInterval {
    pub lower: Dyadic,
    pub upper: Dyadic,
    pub closed: bool,
}

impl RoundingInterval {
    pub fn width(&self) -> Dyadic {
        self.upper
            .checked_sub(&self.lower)
            .expect("interval endpoints are close dyadics")
    }
}

/// `2^e` for any `e` whose power is a normal or subnormal `f64`.
#[inline]
pub fn pow2(e: i32) -> f64 {
    if (-1022..=1023).contains(&e) {
        f64::from_bits(((e + 1023) as u64) << 52)
    } else if e < -1022 {
        pow2(e + 600) * pow2(-600)
    } else {
        f64::INFINITY
    }
}

#[inline]
fn mul_pow2(x: f64, e: i32) -> f64 {
    if e < -1000 {
        x * pow2(e + 600) * pow2(-600)
    } else if e > 1000 {
        x * pow2(e - 600) * pow2(600)
    } else {
        x * pow2(e)
    }
}

fn shl_exact(x: u128, by: u32) -> Option<u128> {
    if by >= 128 || x.leading_zeros() < by {
        return None;
    }
    Some(x << by)
}

/// `x = j * 2^exp` with integer `j` for finite positive `x`.
#[inline]
fn decompose(x: f64) -> (u64, i32) {
    let bits = x.to_bits();
    let biased = ((bits >> 52) & 0x7ff) as i32;
    let frac = bits & ((1u64 << 52) - 1);
    if biased == 0 {
        (frac, -1074)
    } else {
        (frac | (1u64 << 52), biased - 1075)
    }
}
