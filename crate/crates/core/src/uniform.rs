//! Uniform variates at model precision.
//!
//! * [`draw_canonical`] is the textbook generator: a `B`-bit integer scaled
//!   into `[0, 1)`. With `B = P` the outputs form an even grid of spacing
//!   `2^-P`; with `B > P` they are partially uneven.
//! * [`draw_uneven_half`] samples a real uniformly from `(0, 1/2]` and
//!   rounds it to the nearest model value. Every representable value is
//!   reachable with probability proportional to the width of its rounding
//!   interval, so the sub-space below any `2^-k` looks like the whole.
//!
//! All draws return an `f64` that is exactly representable at the model
//! precision; use [`FloatSpec::to_pfloat`] for the exact form.

use std::collections::BTreeMap;

use crate::bitstream::{fresh_bits, RandomBits};
use crate::distributions::Side;
use crate::float_model::{pow2, Dyadic, FloatSpec, PFloat};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum UniformError {
    #[error("exhaustive enumeration infeasible: {0}")]
    Infeasible(String),
    #[error("word size {0} outside [1, 64]")]
    Bits(u32),
    #[error("octave {k} out of range for {what}")]
    Octave { k: u32, what: String },
}

/// Shape of a uniform sample space.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum UniformMode {
    /// [`draw_canonical`] with `B = P`: outputs in `[0, 1)`.
    Even,
    /// [`draw_canonical`] with `B > P`: outputs in `[0, 1)`.
    Partial { bits: u32 },
    /// [`draw_uneven_half`]: outputs in `(0, 1/2]`.
    UnevenHalf,
    /// [`draw_uneven_unit`]: outputs in `(0, 1)`.
    UnevenUnit,
}

/// One canonical draw together with the integer it came from.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CanonicalDraw {
    pub j: u64,
    pub value: f64,
}

/// The integer form `j / 2^n` of an uneven draw before the final rounding.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct UnevenDraw {
    pub j: u64,
    pub n: i32,
    /// The significand was shorter than `P + 2` bits and had to be topped
    /// up with fresh entropy.
    pub topped_up: bool,
}

impl UnevenDraw {
    /// Octave `k` of the unrounded value: `j / 2^n` lies in
    /// `[2^-(k+1), 2^-k)`.
    pub fn octave(&self) -> i32 {
        let len = 64 - self.j.leading_zeros() as i32;
        self.n - len
    }
}

/// Canonical draw: `j` uniform on `[0, 2^bits)`, converted to the model,
/// redrawn if the conversion rounded up to `2^bits`, then scaled into
/// `[0, 1)`.
///
/// # Panics
///
/// If `bits` is outside `[1, 64]`.
#[inline]
pub fn draw_canonical<R: RandomBits + ?Sized>(src: &mut R, spec: &FloatSpec, bits: u32) -> f64 {
    draw_canonical_traced(src, spec, bits).value
}

pub fn draw_canonical_traced<R: RandomBits + ?Sized>(
    src: &mut R,
    spec: &FloatSpec,
    bits: u32,
) -> CanonicalDraw {
    assert!((1..=64).contains(&bits), "word size {bits} outside [1, 64]");
    let limit = pow2(bits as i32);
    loop {
        let j = fresh_bits(src, bits);
        let a = spec.round_ratio_f64(j, 0);
        if a < limit {
            return CanonicalDraw {
                j,
                value: spec.round_f64(a / limit),
            };
        }
    }
}

/// Integer part of an uneven draw into `(0, 1/2]` (`first_scale = 1`) or
/// `(0, 1)` (`first_scale = 0`).
#[inline]
fn uneven_raw<R: RandomBits + ?Sized>(src: &mut R, precision: u32, first_scale: i32) -> UnevenDraw {
    let word_bits = src.word_bits() as i32;
    let mut n = first_scale;
    let mut j;
    loop {
        j = src.next_word();
        n += word_bits;
        if j != 0 {
            break;
        }
    }
    let target = precision + 2;
    let significant = 64 - j.leading_zeros();
    let topped_up = significant < target;
    if topped_up {
        let hole = target - significant;
        j = (j << hole) | fresh_bits(src, hole);
        n += hole as i32;
    }
    UnevenDraw {
        j: j | 1,
        n,
        topped_up,
    }
}

/// Uneven draw before rounding: words are consumed until a set bit
/// appears, the significand is topped up to at least `P + 2` bits, and the
/// last bit is forced to one so that rounding never meets a tie.
#[inline]
pub fn uneven_bits<R: RandomBits + ?Sized>(src: &mut R, precision: u32) -> UnevenDraw {
    uneven_raw(src, precision, 1)
}

/// Uneven uniform variate on `(0, 1/2]`.
///
/// `1/2` is half as probable as its lower neighbour, since it only absorbs
/// the left half of its rounding interval.
#[inline]
pub fn draw_uneven_half<R: RandomBits + ?Sized>(src: &mut R, spec: &FloatSpec) -> f64 {
    let d = uneven_raw(src, spec.precision(), 1);
    spec.round_ratio_f64(d.j, d.n)
}

/// Uneven uniform variate on `(0, 1)`: the same construction started one
/// binade higher, rejecting values that round to 1.
#[inline]
pub fn draw_uneven_unit<R: RandomBits + ?Sized>(src: &mut R, spec: &FloatSpec) -> f64 {
    loop {
        let d = uneven_raw(src, spec.precision(), 0);
        let u = spec.round_ratio_f64(d.j, d.n);
        if u < 1.0 {
            return u;
        }
    }
}

/// Uneven variate conditioned on its unrounded value lying in
/// `[2^-(k+1), 2^-k)`, `k >= 1`: the leading bit is pinned and only the
/// `P` bits that influence rounding are drawn. Results lie in
/// `[2^-(k+1), 2^-k]`.
#[inline]
pub fn draw_uneven_octave<R: RandomBits + ?Sized>(src: &mut R, spec: &FloatSpec, k: u32) -> f64 {
    let p = spec.precision();
    let j = (1u64 << (p + 1)) | (fresh_bits(src, p) << 1) | 1;
    spec.round_ratio_f64(j, (p + k + 2) as i32)
}

/// Canonical variate conditioned on its tail coordinate lying in
/// `[2^-(k+1), 2^-k)`: `u` itself for [`Side::Lower`], `1 - u` for
/// [`Side::Upper`]. Only the free low bits of `j` are drawn.
///
/// Requires `1 <= k < bits <= 64`, and `k < P` for [`Side::Upper`]: a
/// canonical variate never comes closer to 1 than `2^-P`.
pub fn draw_canonical_octave<R: RandomBits + ?Sized>(
    src: &mut R,
    spec: &FloatSpec,
    bits: u32,
    k: u32,
    side: Side,
) -> f64 {
    assert!((1..=64).contains(&bits) && k >= 1 && k < bits);
    assert!(
        side == Side::Lower || k < spec.precision(),
        "1 - u never reaches octave {k} at precision {}",
        spec.precision()
    );
    let free = bits - k - 1;
    let limit = pow2(bits as i32);
    loop {
        let m = (1u64 << free) | fresh_bits(src, free);
        let j = match side {
            Side::Lower => m,
            Side::Upper if bits == 64 => 0u64.wrapping_sub(m),
            Side::Upper => (1u64 << bits) - m,
        };
        let a = spec.round_ratio_f64(j, 0);
        if a < limit {
            return spec.round_f64(a / limit);
        }
    }
}

/// Exact output distribution of a uniform generator: unnormalised dyadic
/// weights per attainable value.
#[derive(Clone, Debug)]
pub struct SpaceDistribution {
    weights: BTreeMap<PFloat, Dyadic>,
}

impl SpaceDistribution {
    fn new() -> Self {
        Self {
            weights: BTreeMap::new(),
        }
    }

    fn add(&mut self, x: PFloat, w: Dyadic) {
        let slot = self.weights.entry(x).or_insert(Dyadic::ZERO);
        *slot = slot.checked_add(&w).expect("weights share a narrow exponent range");
    }

    /// Keeps only outcomes strictly below `bound`.
    pub fn restrict_below(&self, bound: f64) -> Self {
        Self {
            weights: self
                .weights
                .iter()
                .filter(|(x, _)| x.to_f64() < bound)
                .map(|(x, w)| (*x, *w))
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn total(&self) -> Dyadic {
        self.weights
            .values()
            .try_fold(Dyadic::ZERO, |acc, w| acc.checked_add(w))
            .expect("total weight fits")
    }

    /// Normalised probabilities in increasing order of value.
    pub fn probabilities(&self) -> Vec<(PFloat, f64)> {
        let log_total = self.total().log2();
        self.weights
            .iter()
            .map(|(x, w)| (*x, (w.log2() - log_total).exp2()))
            .collect()
    }

    pub fn weight(&self, x: PFloat) -> Option<Dyadic> {
        self.weights.get(&x).copied()
    }

    /// Shannon entropy in bits.
    pub fn entropy(&self) -> f64 {
        let log_total = self.total().log2();
        self.weights
            .values()
            .map(|w| {
                let lp = w.log2() - log_total;
                -lp.exp2() * lp
            })
            .sum()
    }
}

/// Largest precision accepted by the uneven enumerations.
pub const MAX_ENUMERATED_PRECISION: u32 = 12;
/// Largest canonical word size accepted by the enumerations.
pub const MAX_ENUMERATED_BITS: u32 = 24;

/// Exact output distribution of the generator selected by `mode`.
pub fn exact_distribution(
    spec: &FloatSpec,
    mode: UniformMode,
) -> Result<SpaceDistribution, UniformError> {
    match mode {
        UniformMode::Even => enumerate_canonical(spec, spec.precision()),
        UniformMode::Partial { bits } => enumerate_canonical(spec, bits),
        UniformMode::UnevenHalf => enumerate_uneven(spec, 1),
        UniformMode::UnevenUnit => enumerate_uneven(spec, 0),
    }
}

/// Exact Shannon entropy (bits) of the attainable output space.
pub fn entropy_of_space(spec: &FloatSpec, mode: UniformMode) -> Result<f64, UniformError> {
    Ok(exact_distribution(spec, mode)?.entropy())
}

/// Entropy of the sub-space `u < 2^-k`, conditioned on landing there.
pub fn tail_entropy_of_space(
    spec: &FloatSpec,
    mode: UniformMode,
    k: u32,
) -> Result<f64, UniformError> {
    let dist = exact_distribution(spec, mode)?.restrict_below(pow2(-(k as i32)));
    if dist.is_empty() {
        return Err(UniformError::Octave {
            k,
            what: format!("{mode:?} at P = {}", spec.precision()),
        });
    }
    Ok(dist.entropy())
}

fn enumerate_canonical(spec: &FloatSpec, bits: u32) -> Result<SpaceDistribution, UniformError> {
    if !(1..=64).contains(&bits) {
        return Err(UniformError::Bits(bits));
    }
    if bits > MAX_ENUMERATED_BITS {
        return Err(UniformError::Infeasible(format!(
            "2^{bits} integers exceeds 2^{MAX_ENUMERATED_BITS}"
        )));
    }
    let mut dist = SpaceDistribution::new();
    let one = Dyadic::new(1, 0);
    let limit = pow2(bits as i32);
    for j in 0..(1u64 << bits) {
        let a = spec.round_ratio_f64(j, 0);
        if a < limit {
            let u = spec
                .to_pfloat(spec.round_f64(a / limit))
                .expect("model value");
            dist.add(u, one);
        }
    }
    Ok(dist)
}

fn enumerate_uneven(spec: &FloatSpec, first_scale: i32) -> Result<SpaceDistribution, UniformError> {
    let p = spec.precision();
    if p > MAX_ENUMERATED_PRECISION {
        return Err(UniformError::Infeasible(format!(
            "P = {p} exceeds {MAX_ENUMERATED_PRECISION}"
        )));
    }
    // Underlying real r: leading bit at 2^-(first_scale + z + 1) with
    // probability 2^-(z+1); then P + 1 bits decide the rounding, the bit
    // after them is forced to one.
    let mut dist = SpaceDistribution::new();
    let floor = spec.min_scale() - 1;
    let mut z = 0i32;
    loop {
        let lead = -(first_scale + z + 1);
        if lead < floor {
            // everything left rounds to zero (a tie at half the smallest
            // subnormal goes to the even zero)
            dist.add(spec.zero(), Dyadic::new(1, -(z)));
            break;
        }
        let weight = Dyadic::new(1, -(z + 1) - (p as i32 + 1));
        for b in 0..(1u64 << (p + 1)) {
            let j = (1u64 << (p + 2)) | (b << 1) | 1;
            let n = (p as i32 + 2) - lead;
            let u = spec.round_ratio(j as u128, n).expect("in range");
            if first_scale == 0 && u.to_f64() >= 1.0 {
                continue;
            }
            dist.add(u, weight);
        }
        z += 1;
    }
    Ok(dist)
}
