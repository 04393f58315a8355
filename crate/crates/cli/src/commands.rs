use std::fs::File;
use std::hint::black_box;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use anyhow::{bail, Context};
use log::info;
use recondition::analysis::{
    entropy_even_tail, entropy_uneven, entropy_uneven_tail, predicted_loss, VariateStream,
};
use recondition::audit::{audit_values, run_audit, AuditConfig, AuditReport, Sampler};
use recondition::bitstream::BitSource;
use recondition::distributions::{self, baseline_exponential, sample_flip_flop, DistributionSpec};
use recondition::float_model::{FloatMode, FloatSpec};
use recondition::par::Execution;
use recondition::uniform::{
    draw_canonical, draw_uneven_half, entropy_of_space, tail_entropy_of_space, UniformMode,
};

use crate::args::{
    check_sampler, AuditArgs, BenchArgs, EntropyArgs, ReportFormat, SampleArgs, SampleFormat,
};

/// Seeds from `seed`, or from the OS when absent. The effective seed is
/// logged either way.
fn source(seed: Option<&str>) -> anyhow::Result<BitSource> {
    let src = match seed {
        Some(s) => BitSource::seed_from_value(s)?,
        None => BitSource::seed_from_entropy().context("no seed given and no OS entropy")?,
    };
    info!("seed: {}", src.seed_string());
    Ok(src)
}

fn output(path: Option<&Path>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_value(out: &mut dyn Write, spec: &FloatSpec, x: f64) -> io::Result<()> {
    if spec.mode() == FloatMode::Native32 {
        writeln!(out, "{}", x as f32)
    } else {
        writeln!(out, "{x}")
    }
}

pub fn sample(args: SampleArgs) -> anyhow::Result<()> {
    let dist = args.dist.spec()?;
    check_sampler(args.sampler, &dist)?;
    let spec = args.common.precision;
    let mut src = source(args.common.seed.as_deref())?;
    let meta = format!(
        "sampler={} dist={} precision={} seed={} n={}",
        args.sampler,
        dist,
        spec,
        src.seed_string(),
        args.n
    );
    let mut out = output(args.output.as_deref())?;
    match args.format {
        SampleFormat::Text => writeln!(out, "# {meta}")?,
        SampleFormat::Binary => info!("{meta}"),
    }
    for _ in 0..args.n {
        let x = match args.sampler {
            Sampler::Robust => distributions::sample(&dist, &mut src, &spec),
            Sampler::Baseline { bits, log1p } => {
                let DistributionSpec::Exponential { rate } = dist else {
                    unreachable!("checked above")
                };
                baseline_exponential(&mut src, &spec, rate, bits, log1p)
            }
            Sampler::Ideal => bail!("the ideal sampler exists only inside audits"),
        };
        match args.format {
            SampleFormat::Text => write_value(&mut out, &spec, x)?,
            SampleFormat::Binary => out.write_all(&x.to_le_bytes())?,
        }
    }
    out.flush()?;
    Ok(())
}

fn read_values(path: &Path, spec: &FloatSpec) -> anyhow::Result<Vec<f64>> {
    let reader: Box<dyn BufRead> = if path == Path::new("-") {
        Box::new(BufReader::new(io::stdin().lock()))
    } else {
        Box::new(BufReader::new(
            File::open(path).with_context(|| format!("opening {}", path.display()))?,
        ))
    };
    let mut values = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let x: f64 = t
            .parse()
            .with_context(|| format!("line {}: not a number: {t:?}", i + 1))?;
        // decimal text of a model value reads back as its nearest f64
        values.push(spec.round_f64(x));
    }
    Ok(values)
}

fn write_report(report: &AuditReport, format: ReportFormat, out: &mut dyn Write) -> anyhow::Result<()> {
    match format {
        ReportFormat::Csv => report.write_csv(&mut *out)?,
        ReportFormat::Json => writeln!(out, "{}", report.to_json()?)?,
    }
    out.flush()?;
    Ok(())
}

pub fn audit(args: AuditArgs) -> anyhow::Result<()> {
    let dist = args.dist.spec()?;
    check_sampler(args.sampler, &dist)?;
    let spec = args.common.precision;
    let started = Instant::now();
    let report = if let Some(input) = &args.input {
        let values = read_values(input, &spec)?;
        let seed = args.common.seed.clone().unwrap_or_else(|| "external".into());
        let audit = audit_values(values, &dist, &spec, args.octaves.clone(), args.sampler, &seed)?;
        info!("{} values outside the audited octaves", audit.skipped);
        audit.report
    } else {
        let src = source(args.common.seed.as_deref())?;
        let config = AuditConfig {
            sampler: args.sampler,
            dist,
            spec,
            octaves: args.octaves.clone(),
            sides: args.sides.sides(),
            n: args.n,
            seed: src.seed_string(),
            execution: if args.sequential {
                Execution::Sequential
            } else {
                Execution::Parallel
            },
        };
        run_audit(&config)?
    };
    info!(
        "audited {} octave/side units in {:.1} s",
        report.records.len(),
        started.elapsed().as_secs_f64()
    );
    let mut out = output(args.output.as_deref())?;
    write_report(&report, args.format, &mut out)
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

pub fn entropy(args: EntropyArgs) -> anyhow::Result<()> {
    let dist = args.dist.spec()?;
    let spec = args.precision;
    let p = spec.precision();
    let big_k = spec.min_exponent();
    if args.bits < p || args.bits > 64 {
        bail!("--bits must lie in [P, 64], got {}", args.bits);
    }
    let mut out = output(args.output.as_deref())?;
    let mut header = "mode,P,k,entropy_bits,predicted_loss_bits".to_owned();
    if args.exhaustive {
        header.push_str(",exhaustive_bits");
    }
    writeln!(out, "{header}")?;
    let modes = [
        (VariateStream::Even, UniformMode::Even),
        (
            VariateStream::Partial { bits: args.bits },
            UniformMode::Partial { bits: args.bits },
        ),
        (VariateStream::Uneven, UniformMode::UnevenUnit),
    ];
    for (stream, mode) in modes {
        for k in 0..=args.max_k {
            let closed = match stream {
                VariateStream::Even => entropy_even_tail(p, k).ok(),
                VariateStream::Partial { .. } => None,
                VariateStream::Uneven if k == 0 => Some(entropy_uneven(p, big_k)?),
                VariateStream::Uneven => entropy_uneven_tail(p, big_k, k).ok(),
            };
            let predicted = if k == 0 {
                None
            } else {
                Some(predicted_loss(k, stream, p, &dist, args.side)?.loss_bits)
            };
            write!(out, "{stream},{p},{k},{},{}", cell(closed), cell(predicted))?;
            if args.exhaustive {
                let exact = if k == 0 {
                    entropy_of_space(&spec, mode)
                } else {
                    tail_entropy_of_space(&spec, mode, k)
                };
                write!(out, ",{}", cell(exact.ok()))?;
            }
            writeln!(out)?;
        }
    }
    out.flush()?;
    Ok(())
}

fn cpu_model() -> String {
    std::fs::read_to_string("/proc/cpuinfo")
        .ok()
        .and_then(|s| {
            s.lines()
                .find(|l| l.starts_with("model name"))
                .and_then(|l| l.split_once(':'))
                .map(|(_, v)| v.trim().to_owned())
        })
        .unwrap_or_else(|| "unknown".into())
}

fn time_per_call(iterations: u64, mut f: impl FnMut() -> f64) -> f64 {
    let mut acc = 0.0;
    for _ in 0..iterations {
        acc += f();
    }
    black_box(acc);
    let start = Instant::now();
    let mut acc = 0.0;
    for _ in 0..iterations {
        acc += f();
    }
    black_box(acc);
    start.elapsed().as_nanos() as f64 / iterations as f64
}

pub fn bench(args: BenchArgs) -> anyhow::Result<()> {
    let spec = args.precision;
    if args.bits < 1 || args.bits > 64 {
        bail!("--bits must lie in [1, 64]");
    }
    if args.iterations == 0 {
        bail!("--iterations must be positive");
    }
    let mut src = source(args.seed.as_deref())?;
    let exp = DistributionSpec::exponential(1.0)?;
    let bits = args.bits;
    let n = args.iterations;
    let canonical = time_per_call(n, || draw_canonical(&mut src, &spec, bits));
    let uneven = time_per_call(n, || draw_uneven_half(&mut src, &spec));
    let robust = time_per_call(n, || sample_flip_flop(&exp, &mut src, &spec));
    let baseline = time_per_call(n, || baseline_exponential(&mut src, &spec, 1.0, bits, false));
    let mut out = output(args.output.as_deref())?;
    writeln!(out, "# cpu={}", cpu_model())?;
    writeln!(
        out,
        "# precision={spec} bits={bits} iterations={n} parallel_feature={}",
        Execution::parallel_available()
    )?;
    writeln!(
        out,
        "# robust/baseline exponential throughput ratio={:.3}",
        baseline / robust
    )?;
    writeln!(out, "# uneven/canonical cost ratio={:.3}", uneven / canonical)?;
    writeln!(out, "name,iterations,ns_per_variate")?;
    for (name, ns) in [
        (format!("draw_canonical_b{bits}"), canonical),
        ("draw_uneven_half".into(), uneven),
        ("robust_exponential".into(), robust),
        (format!("baseline_exponential_b{bits}"), baseline),
    ] {
        writeln!(out, "{name},{n},{ns:.3}")?;
    }
    out.flush()?;
    Ok(())
}
