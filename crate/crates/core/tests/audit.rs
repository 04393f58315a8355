use recondition::audit::{
    audit_values, ideal_density, run_audit, AuditConfig, AuditError, AuditReport, Sampler,
    CSV_HEADER,
};
use recondition::bitstream::BitSource;
use recondition::distributions::{sample_flip_flop, DistributionSpec, Side};
use recondition::float_model::{pow2, FloatSpec};
use recondition::par::Execution;

fn exp1() -> DistributionSpec {
    DistributionSpec::exponential(1.0).unwrap()
}

fn p10() -> FloatSpec {
    FloatSpec::emulated(10).unwrap()
}

fn config(sampler: Sampler, n: u64) -> AuditConfig {
    let mut c = AuditConfig::new(sampler, exp1(), p10());
    c.octaves = 1..=6;
    c.n = n;
    c.seed = "audit-tests".into();
    c
}

#[test]
fn ideal_sampler_measures_only_estimator_bias() {
    let r = run_audit(&config(Sampler::Ideal, 1_000_000)).unwrap();
    assert_eq!(r.records.len(), 12);
    for rec in &r.records {
        assert!(rec.dkl_bits < 0.05, "{rec:?}");
    }
}

#[test]
fn reports_are_reproducible_across_execution_modes() {
    let mut c = config(Sampler::Robust, 50_000);
    let parallel = run_audit(&c).unwrap();
    assert_eq!(run_audit(&c).unwrap(), parallel);
    c.execution = Execution::Sequential;
    assert_eq!(run_audit(&c).unwrap(), parallel);
    c.seed = "other".into();
    assert_ne!(run_audit(&c).unwrap(), parallel);
}

#[test]
fn csv_and_json_roundtrip() {
    let r = run_audit(&config(Sampler::Baseline { bits: 16, log1p: true }, 20_000)).unwrap();
    let csv = r.to_csv_string().unwrap();
    assert_eq!(csv.lines().next().unwrap(), CSV_HEADER);
    assert_eq!(csv.lines().count(), 1 + r.records.len());
    assert_eq!(AuditReport::from_csv(csv.as_bytes()).unwrap(), r);
    assert_eq!(AuditReport::from_json(&r.to_json().unwrap()).unwrap(), r);
    let renamed = csv.replacen("dkl_bits", "kl", 1);
    assert!(AuditReport::from_csv(renamed.as_bytes()).is_err());
}

#[test]
fn robust_beats_even_baseline_in_deep_octaves() {
    let mut robust = config(Sampler::Robust, 200_000);
    robust.octaves = 3..=7;
    let mut baseline = robust.clone();
    baseline.sampler = Sampler::Baseline { bits: 16, log1p: false };
    let r = run_audit(&robust).unwrap();
    let b = run_audit(&baseline).unwrap();
    for rec in &r.records {
        assert!(rec.dkl_bits < 0.3, "{rec:?}");
    }
    for side in Side::BOTH {
        let deep: Vec<f64> = (3..=7).map(|k| b.record(k, side).unwrap().dkl_bits).collect();
        for w in deep.windows(2) {
            assert!(w[1] >= w[0] - 0.1, "{side}: {deep:?}");
        }
        let last = b.record(7, side).unwrap();
        assert!((last.dkl_bits - last.predicted_bits).abs() < 0.75, "{last:?}");
        assert!(last.dkl_bits > 4.0);
    }
}

#[test]
fn other_distributions_audit_cleanly() {
    let mut c = config(Sampler::Robust, 200_000);
    c.octaves = 3..=8;
    for dist in [
        DistributionSpec::weibull(1.5, 2.0).unwrap(),
        DistributionSpec::log_normal(0.0, 0.5).unwrap(),
    ] {
        c.dist = dist;
        for rec in run_audit(&c).unwrap().records {
            assert!(rec.dkl_bits < 0.3, "{dist}: {rec:?}");
        }
    }
}

#[test]
fn ideal_density_matches_interval_mass() {
    let spec = FloatSpec::BINARY32;
    // [1 - 2^-25, 1 + 2^-24] under density e^-x
    let d = ideal_density(1.0, &exp1(), &spec).unwrap();
    let want = (-1f64).exp() * 1.5 * pow2(-24);
    assert!((d / want - 1.0).abs() < 1e-6, "{d} vs {want}");
    let uniform = DistributionSpec::uniform(0.0, 1.0).unwrap();
    assert!((ideal_density(0.75, &uniform, &spec).unwrap() - pow2(-24)).abs() < 1e-20);
    assert!(matches!(
        ideal_density(0.1, &exp1(), &FloatSpec::emulated(4).unwrap()),
        Err(AuditError::NotRepresentable(_))
    ));
}

#[test]
fn ideal_densities_sum_to_one() {
    let spec = FloatSpec::emulated(4).unwrap();
    let mut x = spec.zero();
    let mut total = 0.0;
    loop {
        total += ideal_density(x.to_f64(), &exp1(), &spec).unwrap();
        match spec.successor(x) {
            Some(next) => x = next,
            None => break,
        }
    }
    assert!((total - 1.0).abs() < 1e-12, "{total}");
}

#[test]
fn external_values_agree_with_conditioned_audit() {
    let spec = p10();
    let mut src = BitSource::seed_from_value("external").unwrap();
    let values: Vec<f64> = (0..4_000_000).map(|_| sample_flip_flop(&exp1(), &mut src, &spec)).collect();
    let external = audit_values(values, &exp1(), &spec, 1..=4, Sampler::Robust, "external").unwrap();
    let mut c = config(Sampler::Robust, 500_000);
    c.octaves = 1..=4;
    let conditioned = run_audit(&c).unwrap();
    assert!(external.skipped > 0);
    for rec in &external.report.records {
        let other = conditioned.record(rec.k, rec.side).unwrap();
        assert!((rec.dkl_bits - other.dkl_bits).abs() < 0.05, "{rec:?} vs {other:?}");
        assert_eq!(rec.predicted_bits, other.predicted_bits);
    }
}

#[test]
fn invalid_configurations_are_rejected() {
    let mut c = config(Sampler::Robust, 0);
    assert!(matches!(run_audit(&c), Err(AuditError::SampleSize(0))));
    c.n = 10;
    c.octaves = 0..=3;
    assert!(run_audit(&c).is_err());
    c.octaves = 1..=3;
    c.sampler = Sampler::Baseline { bits: 32, log1p: false };
    c.dist = DistributionSpec::weibull(2.0, 1.0).unwrap();
    assert!(matches!(run_audit(&c), Err(AuditError::Unsupported(_))));
    c.dist = exp1();
    c.octaves = 1..=12;
    // 1 - u never reaches octave 12 at P = 10
    assert!(run_audit(&c).is_err());
    let mut big = AuditConfig::new(Sampler::Ideal, exp1(), FloatSpec::BINARY32);
    big.n = 10;
    big.octaves = 1..=1;
    assert!(matches!(run_audit(&big), Err(AuditError::Unsupported(_))));
    let mut signed = config(Sampler::Robust, 10);
    signed.dist = DistributionSpec::normal(0.0, 1.0).unwrap();
    assert!(run_audit(&signed).is_err());
}
