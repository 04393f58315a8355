use std::ops::RangeInclusive;
use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use recondition::audit::Sampler;
use recondition::distributions::{DistributionSpec, Side};
use recondition::float_model::FloatSpec;

pub const SEED_ENV: &str = "RECONDITION_SEED";

/// Robust inversion sampling: variates, precision audits, entropy tables
/// and throughput benchmarks. Data goes to stdout, logs to stderr.
#[derive(Debug, Parser)]
#[command(name = "recondition", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Emit variates, one per line, after a metadata header.
    Sample(SampleArgs),
    /// Per-octave precision-loss audit (KL divergence in bits).
    Audit(AuditArgs),
    /// Entropy of uniform sample spaces and predicted loss per octave.
    Entropy(EntropyArgs),
    /// Nanoseconds per variate for the uniform generators and exponential
    /// samplers.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum DistName {
    #[value(alias = "exponential")]
    Exp,
    Weibull,
    Logistic,
    #[value(alias = "log-normal")]
    Lognormal,
    Uniform,
    Normal,
    Gamma,
}

#[derive(Clone, Debug, Args)]
pub struct DistArgs {
    #[arg(long, value_enum, default_value = "exp")]
    pub dist: DistName,
    /// Exponential rate.
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub lambda: f64,
    /// Weibull shape.
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub shape: f64,
    /// Weibull or logistic scale.
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub scale: f64,
    /// Logistic location.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub location: f64,
    /// Log-normal location of the logarithm.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub mu: f64,
    /// Log-normal scale of the logarithm.
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub sigma: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub low: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub high: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub mean: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub std_dev: f64,
    /// Gamma shape.
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub alpha: f64,
    /// Gamma rate.
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub beta: f64,
}

impl DistArgs {
    pub fn spec(&self) -> anyhow::Result<DistributionSpec> {
        let d = match self.dist {
            DistName::Exp => DistributionSpec::exponential(self.lambda),
            DistName::Weibull => DistributionSpec::weibull(self.shape, self.scale),
            DistName::Logistic => DistributionSpec::logistic(self.location, self.scale),
            DistName::Lognormal => DistributionSpec::log_normal(self.mu, self.sigma),
            DistName::Uniform => DistributionSpec::uniform(self.low, self.high),
            DistName::Normal => DistributionSpec::normal(self.mean, self.std_dev),
            DistName::Gamma => DistributionSpec::gamma(self.alpha, self.beta),
        };
        d.with_context(|| format!("invalid {:?} parameters", self.dist))
    }
}

#[derive(Clone, Debug, Args)]
pub struct CommonArgs {
    /// binary32, binary64, or emulated:P[:K].
    #[arg(long, default_value = "binary32", value_parser = parse_precision)]
    pub precision: FloatSpec,
    /// Seed string; random (and echoed) when absent.
    #[arg(long, env = SEED_ENV)]
    pub seed: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SampleFormat {
    Text,
    /// Little-endian binary64 values; metadata goes to stderr.
    Binary,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[command(flatten)]
    pub dist: DistArgs,
    #[command(flatten)]
    pub common: CommonArgs,
    /// robust, baseline[-b<B>] or baseline-log1p[-b<B>].
    #[arg(long, default_value = "robust", value_parser = parse_sampler)]
    pub sampler: Sampler,
    #[arg(long, short = 'n', default_value_t = 10)]
    pub n: u64,
    #[arg(long, value_enum, default_value = "text")]
    pub format: SampleFormat,
    #[arg(long, short = 'o')]
    pub output: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SideArg {
    Both,
    Lower,
    Upper,
}

impl SideArg {
    pub fn sides(self) -> Vec<Side> {
        match self {
            SideArg::Both => Side::BOTH.to_vec(),
            SideArg::Lower => vec![Side::Lower],
            SideArg::Upper => vec![Side::Upper],
        }
    }
}

#[derive(Debug, Args)]
pub struct AuditArgs {
    #[command(flatten)]
    pub dist: DistArgs,
    #[command(flatten)]
    pub common: CommonArgs,
    /// robust, baseline[-b<B>], baseline-log1p[-b<B>] or ideal. With
    /// --input it only selects the prediction column.
    #[arg(long, default_value = "robust", value_parser = parse_sampler)]
    pub sampler: Sampler,
    /// Octave range, `a..b`, `a-b` or a single octave.
    #[arg(long, default_value = "1..16", value_parser = parse_octaves)]
    pub octaves: RangeInclusive<u32>,
    #[arg(long, value_enum, default_value = "both")]
    pub sides: SideArg,
    /// Draws per octave and side.
    #[arg(long, short = 'n', default_value_t = 1_000_000)]
    pub n: u64,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: ReportFormat,
    /// Run octaves one after another instead of on the thread pool.
    #[arg(long)]
    pub sequential: bool,
    /// Audit values read from a file (`-` for stdin) instead of sampling.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, short = 'o')]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EntropyArgs {
    #[command(flatten)]
    pub dist: DistArgs,
    #[arg(long, default_value = "binary32", value_parser = parse_precision)]
    pub precision: FloatSpec,
    /// Canonical word size for the partially uneven rows.
    #[arg(long, default_value_t = 32)]
    pub bits: u32,
    /// Deepest tail `u < 2^-k` to tabulate.
    #[arg(long, default_value_t = 16)]
    pub max_k: u32,
    /// Branch used for the predicted-loss column.
    #[arg(long, default_value = "lower", value_parser = parse_side)]
    pub side: Side,
    /// Add a column computed by exact enumeration (P <= 12).
    #[arg(long)]
    pub exhaustive: bool,
    #[arg(long, short = 'o')]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, default_value = "binary32", value_parser = parse_precision)]
    pub precision: FloatSpec,
    /// Canonical word size of the baseline.
    #[arg(long, default_value_t = 32)]
    pub bits: u32,
    /// Timed iterations per generator, after an equal warm-up.
    #[arg(long, default_value_t = 10_000_000)]
    pub iterations: u64,
    #[arg(long, env = SEED_ENV)]
    pub seed: Option<String>,
    #[arg(long, short = 'o')]
    pub output: Option<PathBuf>,
}

fn parse_precision(s: &str) -> Result<FloatSpec, String> {
    s.parse().map_err(|e| format!("{e}"))
}

fn parse_sampler(s: &str) -> Result<Sampler, String> {
    s.parse()
}

fn parse_side(s: &str) -> Result<Side, String> {
    s.parse()
}

pub fn parse_octaves(s: &str) -> Result<RangeInclusive<u32>, String> {
    let parse = |t: &str| -> Result<u32, String> {
        t.trim()
            .parse::<u32>()
            .map_err(|_| format!("bad octave {t:?} in {s:?}"))
    };
    let (a, b) = if let Some((a, b)) = s.split_once("..=") {
        (parse(a)?, parse(b)?)
    } else if let Some((a, b)) = s.split_once("..") {
        (parse(a)?, parse(b)?)
    } else if let Some((a, b)) = s.split_once('-') {
        (parse(a)?, parse(b)?)
    } else {
        let k = parse(s)?;
        (k, k)
    };
    if a == 0 || b < a {
        return Err(format!("octave range {s:?} must satisfy 1 <= start <= end"));
    }
    Ok(a..=b)
}

/// Rejects combinations clap cannot express.
pub fn check_sampler(sampler: Sampler, dist: &DistributionSpec) -> anyhow::Result<()> {
    if matches!(sampler, Sampler::Baseline { .. })
        && !matches!(dist, DistributionSpec::Exponential { .. })
    {
        bail!("baseline samplers exist only for --dist exp");
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn octave_ranges() {
        assert_eq!(parse_octaves("1..16").unwrap(), 1..=16);
        assert_eq!(parse_octaves("3..=5").unwrap(), 3..=5);
        assert_eq!(parse_octaves("2-4").unwrap(), 2..=4);
        assert_eq!(parse_octaves("7").unwrap(), 7..=7);
        assert!(parse_octaves("0..3").is_err());
        assert!(parse_octaves("5..3").is_err());
        assert!(parse_octaves("a..b").is_err());
    }
}
