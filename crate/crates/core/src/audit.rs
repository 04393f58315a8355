//! Per-octave precision audit.
//!
//! For each octave `k` of the tail coordinate `t` (`u` below the median,
//! `1 - u` above it) the audit draws variates with `t` confined to
//! `[2^-(k+1), 2^-k)`, counts every distinct model value, and reports the
//! Kullback–Leibler divergence, in bits, of those counts from the ideal
//! density: the probability of each value's rounding interval, restricted
//! to the octave's image and renormalised.

use std::collections::HashMap;
use std::fmt;
use std::io;
use std::ops::RangeInclusive;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::analysis::{predicted_loss, AnalysisError, VariateStream};
use crate::bitstream::{fresh_bits, BitSource, BitSourceError};
use crate::distributions::{baseline_exponential_of, DistributionError, DistributionSpec, Side};
use crate::float_model::{pow2, FloatSpec};
use crate::par::{map_units, Execution};
use crate::uniform::{draw_canonical_octave, draw_uneven_octave};

/// Version of the JSON document; the CSV format is identified by its
/// header line, [`CSV_HEADER`].
pub const SCHEMA_VERSION: u32 = 1;
pub const CSV_HEADER: &str = "sampler,dist,precision,k,side,N,dkl_bits,predicted_bits,seed";

/// Largest octave image the ideal reference sampler will tabulate.
pub const MAX_IDEAL_BINS: u64 = 1 << 22;

#[derive(Debug, thiserror::Error)]
pub enum AuditError {
    #[error("octave {k}: {reason}")]
    Octave { k: u32, reason: String },
    #[error("{0}")]
    Unsupported(String),
    #[error("sample size {0} outside [1, 2^32)")]
    SampleSize(u64),
    #[error("sampler emitted {x}, which has no ideal probability in octave {k} ({side})")]
    ImpossibleValue { x: f64, k: u32, side: Side },
    #[error("value {0} is not representable in the audited model")]
    NotRepresentable(f64),
    #[error("histograms for different octaves cannot be merged")]
    Mismatch,
    #[error("malformed report: {0}")]
    Malformed(String),
    #[error(transparent)]
    Distribution(#[from] DistributionError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    BitSource(#[from] BitSourceError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// The sampler under audit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Sampler {
    /// Quantile flip-flop fed uneven variates.
    Robust,
    /// Exponential by canonical inversion with `bits`-bit integers, using
    /// `-log(1 - u)` or, with `log1p`, `-log1p(-u)`.
    Baseline { bits: u32, log1p: bool },
    /// Draws straight from the ideal density (small models only); measures
    /// the finite-sample bias of the estimator.
    Ideal,
}

impl Sampler {
    pub fn label(&self) -> String {
        match self {
            Sampler::Robust => "robust".into(),
            Sampler::Baseline { bits, log1p: false } => format!("baseline-b{bits}"),
            Sampler::Baseline { bits, log1p: true } => format!("baseline-log1p-b{bits}"),
            Sampler::Ideal => "ideal".into(),
        }
    }

    /// Spacing of the uniform variates seen by the branch on `side`.
    pub fn stream(&self, side: Side) -> VariateStream {
        match (self, side) {
            (Sampler::Robust | Sampler::Ideal, _) => VariateStream::Uneven,
            (Sampler::Baseline { log1p: false, .. }, _) => VariateStream::Even,
            (Sampler::Baseline { log1p: true, bits }, Side::Lower) => {
                VariateStream::Partial { bits: *bits }
            }
            (Sampler::Baseline { log1p: true, .. }, Side::Upper) => VariateStream::Even,
        }
    }
}

impl fmt::Display for Sampler {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl FromStr for Sampler {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bits = |rest: &str| -> Result<u32, String> {
            if rest.is_empty() {
                return Ok(32);
            }
            rest.strip_prefix("-b")
                .and_then(|b| b.parse().ok())
                .filter(|b| (1..=64).contains(b))
                .ok_or_else(|| format!("bad word size in sampler {s:?}"))
        };
        match s {
            "robust" => Ok(Sampler::Robust),
            "ideal" => Ok(Sampler::Ideal),
            _ => {
                if let Some(rest) = s.strip_prefix("baseline-log1p") {
                    Ok(Sampler::Baseline {
                        bits: bits(rest)?,
                        log1p: true,
                    })
                } else if let Some(rest) = s.strip_prefix("baseline") {
                    Ok(Sampler::Baseline {
                        bits: bits(rest)?,
                        log1p: false,
                    })
                } else {
                    Err(format!(
                        "unknown sampler {s:?} (robust, baseline[-b<B>], baseline-log1p[-b<B>], ideal)"
                    ))
                }
            }
        }
    }
}

/// Counts of model values within one octave, keyed densely by bit pattern.
#[derive(Clone, Debug, PartialEq)]
pub struct OctaveHistogram {
    k: u32,
    side: Side,
    base: u64,
    counts: Vec<u32>,
    n: u64,
}

impl OctaveHistogram {
    /// Empty histogram over the bit patterns `first..=last`.
    pub fn new(k: u32, side: Side, first: u64, last: u64) -> Self {
        assert!(first <= last);
        Self {
            k,
            side,
            base: first,
            counts: vec![0; (last - first + 1) as usize],
            n: 0,
        }
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    /// Records a value by its bit pattern; `false` if it lies outside the
    /// histogram's range.
    #[inline]
    pub fn record_bits(&mut self, bits: u64) -> bool {
        match bits.checked_sub(self.base).and_then(|i| self.counts.get_mut(i as usize)) {
            Some(c) => {
                *c += 1;
                self.n += 1;
                true
            }
            None => false,
        }
    }

    #[inline]
    fn record(&mut self, spec: &FloatSpec, x: f64) -> Result<(), AuditError> {
        let ok = spec
            .encode_f64(x)
            .is_some_and(|bits| self.record_bits(bits));
        if ok {
            Ok(())
        } else {
            Err(AuditError::ImpossibleValue {
                x,
                k: self.k,
                side: self.side,
            })
        }
    }

    /// Occupied bins as `(bit pattern, count)`.
    pub fn occupied(&self) -> impl Iterator<Item = (u64, u64)> + '_ {
        self.counts
            .iter()
            .enumerate()
            .filter(|(_, c)| **c > 0)
            .map(|(i, c)| (self.base + i as u64, *c as u64))
    }

    pub fn distinct(&self) -> usize {
        self.counts.iter().filter(|c| **c > 0).count()
    }

    /// Adds another histogram of the same octave and range.
    pub fn merge(&mut self, other: &OctaveHistogram) -> Result<(), AuditError> {
        if self.k != other.k
            || self.side != other.side
            || self.base != other.base
            || self.counts.len() != other.counts.len()
        {
            return Err(AuditError::Mismatch);
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.n += other.n;
        Ok(())
    }
}

/// Probability the distribution assigns to the rounding interval of `x`.
pub fn ideal_density(x: f64, dist: &DistributionSpec, spec: &FloatSpec) -> Result<f64, AuditError> {
    let p = spec.to_pfloat(x).ok_or(AuditError::NotRepresentable(x))?;
    let iv = spec.rounding_interval(p);
    Ok(dist.interval_mass(iv.lower.to_f64(), iv.upper.to_f64()))
}

/// Real-valued image of an octave under a branch, and the bit patterns of
/// the model values that can land in it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OctaveImage {
    pub k: u32,
    pub side: Side,
    pub lower: f64,
    pub upper: f64,
    pub first_bits: u64,
    pub last_bits: u64,
}

impl OctaveImage {
    pub fn new(
        dist: &DistributionSpec,
        spec: &FloatSpec,
        side: Side,
        k: u32,
    ) -> Result<Self, AuditError> {
        if k == 0 {
            return Err(AuditError::Octave {
                k,
                reason: "octaves start at 1".into(),
            });
        }
        let depth = spec.min_exponent() as i64 - spec.precision() as i64;
        if k as i64 > depth {
            return Err(AuditError::Octave {
                k,
                reason: format!("deeper than {depth}, the limit of normal values in {spec}"),
            });
        }
        if !dist.has_quantile() || dist.support().0 < 0.0 {
            return Err(AuditError::Unsupported(format!(
                "the audit needs a quantile pair on a non-negative support, not {dist}"
            )));
        }
        let t_hi = pow2(-(k as i32));
        let t_lo = pow2(-(k as i32) - 1);
        let (lower, upper) = match side {
            Side::Lower => (dist.quantile(side, t_lo)?, dist.quantile(side, t_hi)?),
            Side::Upper => (dist.quantile(side, t_hi)?, dist.quantile(side, t_lo)?),
        };
        let bits = |x: f64| {
            spec.encode_f64(spec.round_f64(x)).ok_or_else(|| AuditError::Octave {
                k,
                reason: format!("image endpoint {x} outside the model"),
            })
        };
        let first_bits = bits(lower)?.saturating_sub(1);
        let last_bits = bits(upper)? + 1;
        Ok(Self {
            k,
            side,
            lower,
            upper,
            first_bits,
            last_bits,
        })
    }

    /// Probability of the image itself.
    pub fn mass(&self, dist: &DistributionSpec) -> f64 {
        dist.interval_mass(self.lower, self.upper)
    }

    /// Probability of the part of `bits`' rounding interval inside the
    /// image.
    pub fn bin_mass(&self, dist: &DistributionSpec, spec: &FloatSpec, bits: u64) -> f64 {
        let iv = spec.rounding_interval(spec.decode(bits));
        let a = iv.lower.to_f64().max(self.lower);
        let b = iv.upper.to_f64().min(self.upper);
        dist.interval_mass(a, b)
    }
}

/// `D_KL(P̂ ‖ Q̃)` in bits, where `P̂` are the histogram frequencies and
/// `Q̃` the ideal density restricted to the image and renormalised. Empty
/// bins contribute nothing.
pub fn kl_divergence(
    hist: &OctaveHistogram,
    image: &OctaveImage,
    dist: &DistributionSpec,
    spec: &FloatSpec,
) -> Result<f64, AuditError> {
    let total = image.mass(dist);
    kl_from_counts(hist.occupied(), hist.n(), |bits| {
        let q = image.bin_mass(dist, spec, bits) / total;
        (q > 0.0).then_some(q).ok_or_else(|| AuditError::ImpossibleValue {
            x: spec.decode(bits).to_f64(),
            k: hist.k(),
            side: hist.side(),
        })
    })
}

fn kl_from_counts<I, F>(counts: I, n: u64, mut ideal: F) -> Result<f64, AuditError>
where
    I: Iterator<Item = (u64, u64)>,
    F: FnMut(u64) -> Result<f64, AuditError>,
{
    let n = n as f64;
    let mut sum = 0.0;
    for (bits, c) in counts {
        let p = c as f64 / n;
        sum += p * (p / ideal(bits)?).log2();
    }
    // the estimator is non-negative; rounding can leave a tiny negative sum
    Ok(sum.max(0.0))
}

/// One octave of one side.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub k: u32,
    pub side: Side,
    #[serde(rename = "N")]
    pub n: u64,
    pub dkl_bits: f64,
    pub predicted_bits: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub schema_version: u32,
    pub sampler: String,
    pub dist: String,
    pub precision: String,
    pub seed: String,
    pub records: Vec<AuditRecord>,
}

#[derive(Serialize, Deserialize)]
struct CsvRow {
    sampler: String,
    dist: String,
    precision: String,
    k: u32,
    side: Side,
    #[serde(rename = "N")]
    n: u64,
    dkl_bits: f64,
    predicted_bits: f64,
    seed: String,
}

impl AuditReport {
    pub fn record(&self, k: u32, side: Side) -> Option<&AuditRecord> {
        self.records.iter().find(|r| r.k == k && r.side == side)
    }

    pub fn write_csv<W: io::Write>(&self, out: W) -> Result<(), AuditError> {
        let mut w = csv::Writer::from_writer(out);
        if self.records.is_empty() {
            w.write_record(CSV_HEADER.split(','))?;
        }
        for r in &self.records {
            w.serialize(CsvRow {
                sampler: self.sampler.clone(),
                dist: self.dist.clone(),
                precision: self.precision.clone(),
                k: r.k,
                side: r.side,
                n: r.n,
                dkl_bits: r.dkl_bits,
                predicted_bits: r.predicted_bits,
                seed: self.seed.clone(),
            })?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String, AuditError> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        String::from_utf8(buf).map_err(|e| AuditError::Malformed(e.to_string()))
    }

    /// Parses CSV written by [`Self::write_csv`]. The report-level fields
    /// are taken from the rows, so at least one row is required.
    pub fn from_csv<R: io::Read>(input: R) -> Result<Self, AuditError> {
        let mut r = csv::Reader::from_reader(input);
        let header: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
        if header.join(",") != CSV_HEADER {
            return Err(AuditError::Malformed(format!(
                "unexpected header {:?}",
                header.join(",")
            )));
        }
        let mut report: Option<AuditReport> = None;
        for row in r.deserialize::<CsvRow>() {
            let row = row?;
            let rep = report.get_or_insert_with(|| AuditReport {
                schema_version: SCHEMA_VERSION,
                sampler: row.sampler.clone(),
                dist: row.dist.clone(),
                precision: row.precision.clone(),
                seed: row.seed.clone(),
                records: Vec::new(),
            });
            if rep.sampler != row.sampler
                || rep.dist != row.dist
                || rep.precision != row.precision
                || rep.seed != row.seed
            {
                return Err(AuditError::Malformed("rows from different runs".into()));
            }
            rep.records.push(AuditRecord {
                k: row.k,
                side: row.side,
                n: row.n,
                dkl_bits: row.dkl_bits,
                predicted_bits: row.predicted_bits,
            });
        }
        report.ok_or_else(|| AuditError::Malformed("no rows".into()))
    }

    pub fn to_json(&self) -> Result<String, AuditError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self, AuditError> {
        let report: AuditReport = serde_json::from_str(s)?;
        if report.schema_version != SCHEMA_VERSION {
            return Err(AuditError::Malformed(format!(
                "schema version {} (expected {SCHEMA_VERSION})",
                report.schema_version
            )));
        }
        Ok(report)
    }
}

#[derive(Clone, Debug)]
pub struct AuditConfig {
    pub sampler: Sampler,
    pub dist: DistributionSpec,
    pub spec: FloatSpec,
    pub octaves: RangeInclusive<u32>,
    pub sides: Vec<Side>,
    /// Draws per octave and side.
    pub n: u64,
    pub seed: String,
    pub execution: Execution,
}

impl AuditConfig {
    pub fn new(sampler: Sampler, dist: DistributionSpec, spec: FloatSpec) -> Self {
        Self {
            sampler,
            dist,
            spec,
            octaves: 1..=16,
            sides: Side::BOTH.to_vec(),
            n: 1_000_000,
            seed: "0".into(),
            execution: Execution::Parallel,
        }
    }

    fn validate(&self) -> Result<(), AuditError> {
        if self.n == 0 || self.n > u32::MAX as u64 {
            return Err(AuditError::SampleSize(self.n));
        }
        if self.octaves.is_empty() {
            return Err(AuditError::Octave {
                k: *self.octaves.start(),
                reason: "empty octave range".into(),
            });
        }
        if let Sampler::Baseline { bits, .. } = self.sampler {
            if !matches!(self.dist, DistributionSpec::Exponential { .. }) {
                return Err(AuditError::Unsupported(
                    "baseline samplers exist only for the exponential".into(),
                ));
            }
            if bits < self.spec.precision() || bits > 64 {
                return Err(AuditError::Unsupported(format!(
                    "baseline word size {bits} must lie in [P, 64]"
                )));
            }
            let k = *self.octaves.end();
            if k >= bits {
                return Err(AuditError::Octave {
                    k,
                    reason: format!("a {bits}-bit canonical variate does not reach it"),
                });
            }
            let p = self.spec.precision();
            if self.sides.contains(&Side::Upper) && k >= p {
                return Err(AuditError::Octave {
                    k,
                    reason: format!("canonical variates never come within 2^-{p} of 1"),
                });
            }
        }
        Ok(())
    }
}

/// Draws one variate with its tail coordinate in octave `k` of `side`.
struct OctaveSampler<'a> {
    config: &'a AuditConfig,
    side: Side,
    k: u32,
    rate: f64,
    ideal: Option<(Vec<f64>, u64)>,
}

impl<'a> OctaveSampler<'a> {
    fn new(config: &'a AuditConfig, image: &OctaveImage) -> Result<Self, AuditError> {
        let rate = match config.dist {
            DistributionSpec::Exponential { rate } => rate,
            _ => f64::NAN,
        };
        let ideal = match config.sampler {
            Sampler::Ideal => {
                let bins = image.last_bits - image.first_bits + 1;
                if bins > MAX_IDEAL_BINS {
                    return Err(AuditError::Unsupported(format!(
                        "the ideal sampler tabulates at most {MAX_IDEAL_BINS} values; octave {} has {bins}",
                        image.k
                    )));
                }
                let mut acc = 0.0;
                let cumulative = (image.first_bits..=image.last_bits)
                    .map(|b| {
                        acc += image.bin_mass(&config.dist, &config.spec, b);
                        acc
                    })
                    .collect();
                Some((cumulative, image.first_bits))
            }
            _ => None,
        };
        Ok(Self {
            config,
            side: image.side,
            k: image.k,
            rate,
            ideal,
        })
    }

    #[inline]
    fn draw(&self, src: &mut BitSource) -> f64 {
        let spec = &self.config.spec;
        match self.config.sampler {
            Sampler::Robust => {
                let u = draw_uneven_octave(src, spec, self.k);
                self.config.dist.model_quantile(self.side, u, spec)
            }
            Sampler::Baseline { bits, log1p } => {
                let u = draw_canonical_octave(src, spec, bits, self.k, self.side);
                baseline_exponential_of(u, spec, self.rate, log1p)
            }
            Sampler::Ideal => {
                let (cumulative, first) = self.ideal.as_ref().expect("tabulated");
                let total = *cumulative.last().expect("non-empty");
                let r = fresh_bits(src, 53) as f64 * pow2(-53) * total;
                let i = cumulative.partition_point(|c| *c <= r).min(cumulative.len() - 1);
                spec.decode(first + i as u64).to_f64()
            }
        }
    }
}

fn audit_unit(
    config: &AuditConfig,
    root: &BitSource,
    k: u32,
    side: Side,
) -> Result<AuditRecord, AuditError> {
    let image = OctaveImage::new(&config.dist, &config.spec, side, k)?;
    let sampler = OctaveSampler::new(config, &image)?;
    let mut src = root.derive(&format!("k{k}/{side}"));
    let mut hist = OctaveHistogram::new(k, side, image.first_bits, image.last_bits);
    for _ in 0..config.n {
        let x = sampler.draw(&mut src);
        hist.record(&config.spec, x)?;
    }
    let dkl_bits = kl_divergence(&hist, &image, &config.dist, &config.spec)?;
    let predicted = predicted_loss(
        k,
        config.sampler.stream(side),
        config.spec.precision(),
        &config.dist,
        side,
    )?;
    Ok(AuditRecord {
        k,
        side,
        n: hist.n(),
        dkl_bits,
        predicted_bits: predicted.loss_bits,
    })
}

/// Audits every octave and side in `config`. Each unit draws from its own
/// source derived from the seed and the unit's label, so the report does
/// not depend on the execution mode.
pub fn run_audit(config: &AuditConfig) -> Result<AuditReport, AuditError> {
    config.validate()?;
    let root = BitSource::seed_from_value(&config.seed)?;
    let units: Vec<(u32, Side)> = config
        .octaves
        .clone()
        .flat_map(|k| config.sides.iter().map(move |s| (k, *s)))
        .collect();
    let records = map_units(units, config.execution, |(k, side)| {
        audit_unit(config, &root, k, side)
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;
    Ok(AuditReport {
        schema_version: SCHEMA_VERSION,
        sampler: config.sampler.label(),
        dist: config.dist.to_string(),
        precision: config.spec.label(),
        seed: config.seed.clone(),
        records,
    })
}

/// Boundaries of the octaves of one side in value space.
struct SidePartition {
    side: Side,
    /// `edges[k - 1]` and `edges[k]` bound octave `k`, increasing in value.
    edges: Vec<f64>,
    octaves: RangeInclusive<u32>,
}

impl SidePartition {
    fn new(
        dist: &DistributionSpec,
        side: Side,
        octaves: &RangeInclusive<u32>,
    ) -> Result<Self, AuditError> {
        let last = *octaves.end();
        let mut edges = Vec::with_capacity(last as usize + 1);
        for k in 0..=last {
            let t = pow2(-(k as i32) - 1);
            edges.push(dist.quantile(side, t)?);
        }
        if side == Side::Lower {
            edges.reverse();
        }
        Ok(Self {
            side,
            edges,
            octaves: octaves.clone(),
        })
    }

    /// Octave of `x` on this side, if it falls in the audited range.
    fn octave(&self, x: f64) -> Option<u32> {
        let last = *self.octaves.end() as usize;
        // edges are increasing; find i with edges[i] <= x < edges[i + 1]
        let i = self.edges.partition_point(|e| *e <= x);
        if i == 0 || i > last {
            return None;
        }
        let k = match self.side {
            Side::Lower => (last + 1 - i) as u32,
            Side::Upper => i as u32,
        };
        self.octaves.contains(&k).then_some(k)
    }

    fn bounds(&self, k: u32) -> (f64, f64) {
        let last = *self.octaves.end() as usize;
        let i = match self.side {
            Side::Lower => last + 1 - k as usize,
            Side::Upper => k as usize,
        };
        (self.edges[i - 1], self.edges[i])
    }
}

/// Summary of an audit of externally produced values.
#[derive(Clone, Debug, PartialEq)]
pub struct ValueAudit {
    pub report: AuditReport,
    /// Values outside the audited octaves.
    pub skipped: u64,
}

/// Audits an unconditioned stream of model values. Each value is assigned
/// to the octave and side its value falls in, and compared with the ideal
/// density of the model values in that octave. `sampler` only selects the
/// prediction attached to each record.
pub fn audit_values<I>(
    values: I,
    dist: &DistributionSpec,
    spec: &FloatSpec,
    octaves: RangeInclusive<u32>,
    sampler: Sampler,
    seed: &str,
) -> Result<ValueAudit, AuditError>
where
    I: IntoIterator<Item = f64>,
{
    if octaves.is_empty() || *octaves.start() == 0 {
        return Err(AuditError::Octave {
            k: *octaves.start(),
            reason: "octave range must be non-empty and start at 1 or above".into(),
        });
    }
    let median = dist.median();
    let parts = [
        SidePartition::new(dist, Side::Lower, &octaves)?,
        SidePartition::new(dist, Side::Upper, &octaves)?,
    ];
    let mut counts: HashMap<(u32, Side), HashMap<u64, u64>> = HashMap::new();
    let mut skipped = 0u64;
    for x in values {
        let bits = spec.encode_f64(x).ok_or(AuditError::NotRepresentable(x))?;
        let part = if x < median { &parts[0] } else { &parts[1] };
        match part.octave(x) {
            Some(k) => *counts.entry((k, part.side)).or_default().entry(bits).or_default() += 1,
            None => skipped += 1,
        }
    }
    let mut keys: Vec<_> = counts.keys().copied().collect();
    keys.sort();
    let mut records = Vec::with_capacity(keys.len());
    for (k, side) in keys {
        let bins = &counts[&(k, side)];
        let part = if side == Side::Lower { &parts[0] } else { &parts[1] };
        let (a, b) = part.bounds(k);
        // model values in [a, b) own their whole rounding intervals
        let first = first_at_or_above(spec, a)?;
        let last = last_below(spec, b)?;
        let total = dist.interval_mass(
            spec.rounding_interval(spec.decode(first)).lower.to_f64(),
            spec.rounding_interval(spec.decode(last)).upper.to_f64(),
        );
        let n: u64 = bins.values().sum();
        let mut sorted: Vec<(u64, u64)> = bins.iter().map(|(b, c)| (*b, *c)).collect();
        sorted.sort_unstable();
        let dkl_bits = kl_from_counts(sorted.into_iter(), n, |bits| {
            let x = spec.decode(bits);
            let iv = spec.rounding_interval(x);
            let q = dist.interval_mass(iv.lower.to_f64(), iv.upper.to_f64()) / total;
            (q > 0.0).then_some(q).ok_or(AuditError::ImpossibleValue {
                x: x.to_f64(),
                k,
                side,
            })
        })?;
        let predicted = predicted_loss(k, sampler.stream(side), spec.precision(), dist, side)?;
        records.push(AuditRecord {
            k,
            side,
            n,
            dkl_bits,
            predicted_bits: predicted.loss_bits,
        });
    }
    Ok(ValueAudit {
        report: AuditReport {
            schema_version: SCHEMA_VERSION,
            sampler: sampler.label(),
            dist: dist.to_string(),
            precision: spec.label(),
            seed: seed.to_owned(),
            records,
        },
        skipped,
    })
}

fn first_at_or_above(spec: &FloatSpec, a: f64) -> Result<u64, AuditError> {
    let r = spec.round_f64(a);
    let bits = spec.encode_f64(r).ok_or(AuditError::NotRepresentable(r))?;
    Ok(if r < a { bits + 1 } else { bits })
}

fn last_below(spec: &FloatSpec, b: f64) -> Result<u64, AuditError> {
    let r = spec.round_f64(b);
    let bits = spec.encode_f64(r).ok_or(AuditError::NotRepresentable(r))?;
    Ok(if r >= b { bits - 1 } else { bits })
}
