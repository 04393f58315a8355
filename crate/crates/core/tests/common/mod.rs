//! Exhaustive enumeration of generator outputs over every bit stream.

#![allow(dead_code)]

use std::collections::BTreeMap;

use recondition::bitstream::{BitSourceError, RandomBits};
use recondition::float_model::{Dyadic, FloatSpec, PFloat};

/// Serves bits from a fixed prefix; past its end it serves ones and flags
/// the run as needing a longer prefix.
pub struct PrefixBits<'a> {
    word_bits: u32,
    bits: &'a [u8],
    pos: usize,
    pub exhausted: bool,
}

impl<'a> PrefixBits<'a> {
    pub fn new(word_bits: u32, bits: &'a [u8]) -> Self {
        Self {
            word_bits,
            bits,
            pos: 0,
            exhausted: false,
        }
    }

    pub fn consumed(&self) -> usize {
        self.pos
    }

    fn take(&mut self, k: u32) -> u64 {
        let mut v = 0u64;
        for _ in 0..k {
            let b = match self.bits.get(self.pos) {
                Some(b) => *b as u64,
                None => {
                    self.exhausted = true;
                    1
                }
            };
            v = (v << 1) | b;
            self.pos += 1;
        }
        v
    }
}

impl RandomBits for PrefixBits<'_> {
    fn word_bits(&self) -> u32 {
        self.word_bits
    }

    fn next_word(&mut self) -> u64 {
        self.take(self.word_bits)
    }

    fn next_bits(&mut self, k: u32) -> Result<u64, BitSourceError> {
        Ok(self.take(k))
    }
}

/// Exact output distribution of `draw` over all bit streams, explored to
/// `max_depth` bits.
pub struct Enumeration {
    /// Probability of each output, in units of `2^-max_depth`.
    pub weights: BTreeMap<PFloat, u128>,
    /// Probability of streams cut off at `max_depth`, same units.
    pub truncated: u128,
    pub max_depth: usize,
}

impl Enumeration {
    pub fn probability(&self, x: PFloat) -> Dyadic {
        Dyadic::new(
            self.weights.get(&x).copied().unwrap_or(0),
            -(self.max_depth as i32),
        )
    }

    pub fn truncation_bound(&self) -> Dyadic {
        Dyadic::new(self.truncated, -(self.max_depth as i32))
    }

    pub fn total(&self) -> u128 {
        self.weights.values().sum::<u128>() + self.truncated
    }
}

/// Depth-first search over bit prefixes: a prefix is extended by one bit
/// whenever `draw` reads past it.
pub fn enumerate<F>(spec: &FloatSpec, word_bits: u32, max_depth: usize, mut draw: F) -> Enumeration
where
    F: FnMut(&mut PrefixBits<'_>) -> f64,
{
    assert!(max_depth < 120);
    let mut out = Enumeration {
        weights: BTreeMap::new(),
        truncated: 0,
        max_depth,
    };
    let mut stack: Vec<Vec<u8>> = vec![Vec::new()];
    while let Some(prefix) = stack.pop() {
        let mut src = PrefixBits::new(word_bits, &prefix);
        let x = draw(&mut src);
        let weight = 1u128 << (max_depth - prefix.len());
        if !src.exhausted {
            assert_eq!(src.consumed(), prefix.len(), "prefix extended past need");
            let p = spec.to_pfloat(x).expect("model value");
            *out.weights.entry(p).or_insert(0) += weight;
        } else if prefix.len() == max_depth {
            out.truncated += weight;
        } else {
            for b in [1u8, 0] {
                let mut next = prefix.clone();
                next.push(b);
                stack.push(next);
            }
        }
    }
    assert_eq!(out.total(), 1u128 << max_depth);
    out
}

/// Every model value in `(lo, hi]`, increasing.
pub fn values_in(spec: &FloatSpec, lo: f64, hi: f64) -> Vec<PFloat> {
    let mut v = Vec::new();
    let mut x = spec.to_pfloat(spec.round_f64(hi)).expect("representable");
    while x.to_f64() > lo {
        if x.to_f64() <= hi {
            v.push(x);
        }
        match spec.predecessor(x) {
            Some(p) => x = p,
            None => break,
        }
    }
    v.reverse();
    v
}

/// `|a - b|` for dyadics.
pub fn dyadic_distance(a: Dyadic, b: Dyadic) -> Dyadic {
    if a >= b {
        a.checked_sub(&b).unwrap()
    } else {
        b.checked_sub(&a).unwrap()
    }
}
