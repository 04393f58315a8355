//! Robust inversion sampling.
//!
//! Random variates are produced in three steps: random bits
//! ([`bitstream`]), uniform variates ([`uniform`]), and a quantile function
//! ([`distributions`]). Canonical inversion loses precision in the tails
//! twice over: evenly spaced uniform variates carry too little entropy near
//! zero, and forming `1 - u` throws away what is left. Here uniform
//! variates are *uneven*, so every representable value in `(0, 1/2]` is
//! reachable, and each distribution is sampled through a pair of quantile
//! branches that never form `1 - u`.
//!
//! [`audit`] measures the result: the Kullback–Leibler divergence, per
//! octave of the tail, between a sampler's output and the ideal density on
//! the floating-point grid ([`float_model`]). [`analysis`] predicts the
//! loss from the entropy of the variate stream and the conditioning of the
//! quantile function.
//!
//! ```
//! use recondition::bitstream::BitSource;
//! use recondition::distributions::{sample_flip_flop, DistributionSpec};
//! use recondition::float_model::FloatSpec;
//!
//! let mut src = BitSource::seed_from_value("example").unwrap();
//! let exp = DistributionSpec::exponential(2.0).unwrap();
//! let x = sample_flip_flop(&exp, &mut src, &FloatSpec::BINARY64);
//! assert!(x >= 0.0);
//! ```

pub mod analysis;
pub mod audit;
pub mod bitstream;
pub mod distributions;
pub mod float_model;
pub mod par;
pub mod uniform;

pub use bitstream::{BitSource, RandomBits};
pub use distributions::{DistributionSpec, Side};
pub use float_model::{FloatSpec, PFloat};
