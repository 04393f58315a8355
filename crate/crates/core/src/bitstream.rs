//! Deterministic, seedable source of uniform random bits.
//!
//! Every other module draws its entropy through the [`RandomBits`] trait.
//! [`BitSource`] is the production implementation: a ChaCha20 keystream
//! whose 256-bit key is derived from a seed byte string with SHA-256.
//!
//! Sub-word draws ([`RandomBits::next_bits`]) are served from a bit buffer,
//! most-significant bit first, so the concatenation of every `next_bits`
//! result reproduces the raw word stream exactly.

use std::fmt;

use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};
use sha2::{Digest, Sha256};

/// Default number of bits per raw draw.
pub const DEFAULT_WORD_BITS: u32 = 64;

const STATE_TAG: &str = "bits1";
const KEY_DOMAIN: &[u8] = b"recondition/bitsource/v1\0";

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum BitSourceError {
    #[error("seed must not be empty")]
    EmptySeed,
    #[error("entropy source unavailable: {0}")]
    EntropyUnavailable(String),
    #[error("bit count {k} outside [1, {word_bits}]")]
    BitCount { k: u32, word_bits: u32 },
    #[error("word size {0} outside [1, 64]")]
    WordBits(u32),
    #[error("malformed bit source state: {0}")]
    MalformedState(String),
}

/// A stream of i.i.d. fair coin flips, consumed either as `B`-bit words or
/// as shorter runs of bits.
pub trait RandomBits {
    /// Bits per raw draw (`B`).
    fn word_bits(&self) -> u32;

    /// Next `B`-bit word, uniform over `[0, 2^B)`.
    fn next_word(&mut self) -> u64;

    /// Next `k` bits from the buffered stream, uniform over `[0, 2^k)`.
    fn next_bits(&mut self, k: u32) -> Result<u64, BitSourceError>;
}

impl<R: RandomBits + ?Sized> RandomBits for &mut R {
    fn word_bits(&self) -> u32 {
        (**self).word_bits()
    }

    fn next_word(&mut self) -> u64 {
        (**self).next_word()
    }

    fn next_bits(&mut self, k: u32) -> Result<u64, BitSourceError> {
        (**self).next_bits(k)
    }
}

/// Provider of seed material for [`BitSource::seed_from_entropy_with`].
pub trait EntropySource {
    fn fill(&mut self, dest: &mut [u8]) -> Result<(), BitSourceError>;
}

/// The operating system's entropy pool.
#[derive(Clone, Copy, Debug, Default)]
pub struct OsEntropy;

impl EntropySource for OsEntropy {
    fn fill(&mut self, dest: &mut [u8]) -> Result<(), BitSourceError> {
        getrandom::fill(dest).map_err(|e| BitSourceError::EntropyUnavailable(e.to_string()))
    }
}

#[inline]
fn low_mask(k: u32) -> u64 {
    if k >= 64 {
        u64::MAX
    } else {
        (1u64 << k) - 1
    }
}

/// Seedable bit stream backed by ChaCha20.
///
/// Exclusively owned: move it between threads, never share it. Parallel
/// work should [`derive`](BitSource::derive) independent child sources.
#[derive(Clone)]
pub struct BitSource {
    rng: ChaCha20Rng,
    seed: Vec<u8>,
    buffer: u64,
    buffered: u32,
    word_bits: u32,
}

impl fmt::Debug for BitSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BitSource")
            .field("seed", &self.seed_string())
            .field("word_bits", &self.word_bits)
            .field("buffered", &self.buffered)
            .field("word_pos", &self.rng.get_word_pos())
            .finish()
    }
}

impl BitSource {
    /// Expands `seed` into the full generator state. Equal seeds give equal
    /// streams.
    pub fn seed_from_value(seed: impl AsRef<[u8]>) -> Result<Self, BitSourceError> {
        let seed = seed.as_ref();
        if seed.is_empty() {
            return Err(BitSourceError::EmptySeed);
        }
        let mut hasher = Sha256::new();
        hasher.update(KEY_DOMAIN);
        hasher.update(seed);
        let key: [u8; 32] = hasher.finalize().into();
        Ok(Self {
            rng: ChaCha20Rng::from_seed(key),
            seed: seed.to_vec(),
            buffer: 0,
            buffered: 0,
            word_bits: DEFAULT_WORD_BITS,
        })
    }

    /// Seeds from the operating system. The random seed is kept as a hex
    /// string, so `seed_from_value(src.seed_string())` reproduces the stream.
    pub fn seed_from_entropy() -> Result<Self, BitSourceError> {
        Self::seed_from_entropy_with(&mut OsEntropy)
    }

    pub fn seed_from_entropy_with<E: EntropySource + ?Sized>(
        entropy: &mut E,
    ) -> Result<Self, BitSourceError> {
        let mut raw = [0u8; 32];
        entropy.fill(&mut raw)?;
        Self::seed_from_value(hex::encode(raw))
    }

    /// Changes the raw word size `B`. Any buffered bits are kept.
    pub fn with_word_bits(mut self, word_bits: u32) -> Result<Self, BitSourceError> {
        if !(1..=64).contains(&word_bits) {
            return Err(BitSourceError::WordBits(word_bits));
        }
        self.word_bits = word_bits;
        self.buffered = self.buffered.min(word_bits);
        Ok(self)
    }

    /// Independent child stream for a labelled work unit.
    pub fn derive(&self, label: &str) -> Self {
        let mut seed = self.seed.clone();
        seed.push(0);
        seed.extend_from_slice(label.as_bytes());
        let mut child = Self::seed_from_value(seed).expect("derived seed is never empty");
        child.word_bits = self.word_bits;
        child
    }

    pub fn seed(&self) -> &[u8] {
        &self.seed
    }

    /// The seed as text: verbatim when it is valid UTF-8, otherwise `hex:`
    /// followed by its hex encoding.
    pub fn seed_string(&self) -> String {
        match std::str::from_utf8(&self.seed) {
            Ok(s) => s.to_owned(),
            Err(_) => format!("hex:{}", hex::encode(&self.seed)),
        }
    }

    pub fn buffered_bits(&self) -> u32 {
        self.buffered
    }

    /// Printable snapshot of the full state:
    ///
    /// `bits1:<B>:<buffered>:<buffer hex16>:<key hex64>:<stream hex16>:<word_pos hex32>:<seed hex>`
    pub fn save_state(&self) -> String {
        format!(
            "{STATE_TAG}:{}:{}:{:016x}:{}:{:016x}:{:032x}:{}",
            self.word_bits,
            self.buffered,
            self.buffer & low_mask(self.buffered),
            hex::encode(self.rng.get_seed()),
            self.rng.get_stream(),
            self.rng.get_word_pos(),
            hex::encode(&self.seed),
        )
    }

    pub fn restore_state(state: &str) -> Result<Self, BitSourceError> {
        let bad = |what: &str| BitSourceError::MalformedState(what.to_owned());
        let fields: Vec<&str> = state.trim().split(':').collect();
        if fields.len() != 8 {
            return Err(bad("expected 8 ':'-separated fields"));
        }
        if fields[0] != STATE_TAG {
            return Err(bad("unknown version tag"));
        }
        let word_bits: u32 = fields[1].parse().map_err(|_| bad("word size"))?;
        if !(1..=64).contains(&word_bits) {
            return Err(bad("word size out of range"));
        }
        let buffered: u32 = fields[2].parse().map_err(|_| bad("buffered count"))?;
        if buffered > word_bits {
            return Err(bad("buffered count exceeds word size"));
        }
        if fields[3].len() != 16 || fields[5].len() != 16 || fields[6].len() != 32 {
            return Err(bad("field width"));
        }
        let buffer = u64::from_str_radix(fields[3], 16).map_err(|_| bad("buffer"))?;
        let key: [u8; 32] = hex::decode(fields[4])
            .ok()
            .and_then(|k| k.try_into().ok())
            .ok_or_else(|| bad("key"))?;
        let stream = u64::from_str_radix(fields[5], 16).map_err(|_| bad("stream"))?;
        let word_pos = u128::from_str_radix(fields[6], 16).map_err(|_| bad("word position"))?;
        let seed = hex::decode(fields[7]).map_err(|_| bad("seed"))?;
        if seed.is_empty() {
            return Err(bad("seed"));
        }

        let mut rng = ChaCha20Rng::from_seed(key);
        rng.set_stream(stream);
        rng.set_word_pos(word_pos);
        Ok(Self {
            rng,
            seed,
            buffer: buffer & low_mask(buffered),
            buffered,
            word_bits,
        })
    }

    /// [`RandomBits::next_bits`] without the range check on `k`.
    #[inline]
    fn take_bits(&mut self, k: u32) -> u64 {
        if k <= self.buffered {
            self.buffered -= k;
            return (self.buffer >> self.buffered) & low_mask(k);
        }
        let have = self.buffered;
        let high = self.buffer & low_mask(have);
        let need = k - have;
        let word = self.next_word();
        self.buffered = self.word_bits - need;
        self.buffer = word;
        let low = (word >> self.buffered) & low_mask(need);
        if have == 0 {
            low
        } else {
            (high << need) | low
        }
    }
}

impl RandomBits for BitSource {
    #[inline]
    fn word_bits(&self) -> u32 {
        self.word_bits
    }

    #[inline]
    fn next_word(&mut self) -> u64 {
        let raw = self.rng.next_u64();
        if self.word_bits == 64 {
            raw
        } else {
            raw >> (64 - self.word_bits)
        }
    }

    #[inline]
    fn next_bits(&mut self, k: u32) -> Result<u64, BitSourceError> {
        if k == 0 || k > self.word_bits {
            return Err(BitSourceError::BitCount {
                k,
                word_bits: self.word_bits,
            });
        }
        Ok(self.take_bits(k))
    }
}

/// Draws `k` fresh bits for any `k <= 64`, splitting requests wider than
/// the source's word size. `k = 0` yields 0.
#[inline]
pub(crate) fn fresh_bits<R: RandomBits + ?Sized>(src: &mut R, k: u32) -> u64 {
    debug_assert!(k <= 64);
    let word_bits = src.word_bits();
    let mut out = 0u64;
    let mut left = k;
    while left > 0 {
        let take = left.min(word_bits);
        let chunk = src
            .next_bits(take)
            .unwrap_or_else(|_| unreachable!("chunk within [1, word_bits]"));
        out = if take == 64 { chunk } else { (out << take) | chunk };
        left -= take;
    }
    out
}
