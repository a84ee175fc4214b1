use proptest::prelude::*;

use fpfunnel::config::ScenarioConfig;
use fpfunnel::diagnostics::{check_record, cross_validate};
use fpfunnel::record::{Row, Series, Snapshot};
use fpfunnel::{Backend, Error, RunRecord, Scenario};

fn short(mut cfg: ScenarioConfig) -> ScenarioConfig {
    cfg.solver.horizon = 0.5;
    cfg.solver.snapshots = Some(vec![0.0, 0.25, 0.5]);
    cfg
}

#[test]
fn written_records_read_back_identically() {
    let sc = Scenario::new(short(ScenarioConfig::tracking_disturbed())).unwrap();
    let dir = tempfile::tempdir().unwrap();
    for b in Backend::ALL {
        let rec = sc.run(b).unwrap();
        let path = dir.path().join(b.name());
        rec.write(&path).unwrap();
        let back = RunRecord::read(&path).unwrap();
        assert_eq!(back.meta, rec.meta);
        assert_eq!(back.series.to_csv(), rec.series.to_csv());
        assert_eq!(back.snapshots.len(), rec.snapshots.len());
        for (a, b) in back.snapshots.iter().zip(&rec.snapshots) {
            assert_eq!(a.to_csv(), b.to_csv());
        }
        let checks = check_record(&back).unwrap();
        assert!(checks.iter().all(|c| !c.failed()), "{checks:?}");
    }
    assert_eq!(
        std::fs::read_dir(dir.path().join("spectral/snapshots")).unwrap().count(),
        3
    );
}

#[test]
fn runs_are_byte_for_byte_deterministic() {
    let sc = Scenario::new(short(ScenarioConfig::tracking_disturbed())).unwrap();
    for b in [Backend::Spectral, Backend::Fd] {
        assert_eq!(sc.run(b).unwrap().series.to_csv(), sc.run(b).unwrap().series.to_csv());
    }
}

#[test]
fn self_comparison_has_zero_gaps_and_mismatch_is_rejected() {
    let a = Scenario::new(short(ScenarioConfig::tracking_disturbed())).unwrap().run(Backend::Spectral).unwrap();
    let r = cross_validate(&a, &a).unwrap();
    assert_eq!(r.mean_gap, 0.0);
    assert_eq!(r.mass_gap, 0.0);
    assert!(r.snapshot_gaps.iter().all(|g| g.l2 == 0.0));
    let b = Scenario::new(short(ScenarioConfig::tracking_clean())).unwrap().run(Backend::Spectral).unwrap();
    assert!(matches!(cross_validate(&a, &b), Err(Error::ScenarioMismatch(_))));
}

#[test]
fn missing_or_corrupt_files_are_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert!(RunRecord::read(dir.path()).is_err());
    let rec = Scenario::new(short(ScenarioConfig::tracking_clean())).unwrap().run(Backend::Ode).unwrap();
    rec.write(dir.path()).unwrap();
    std::fs::write(dir.path().join("series.csv"), "t,y0\n0,1\n").unwrap();
    assert!(RunRecord::read(dir.path()).is_err());
}

fn row(dim: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>, [f64; 6])> {
    let any = prop_oneof![any::<f64>().prop_filter("finite", |v| v.is_finite()), Just(f64::NAN), -1e3f64..1e3];
    (
        prop::collection::vec(any.clone(), dim * 3),
        prop::collection::vec(any.clone(), dim * (dim + 1) / 2),
        [any.clone(), any.clone(), any.clone(), any.clone(), any.clone(), any],
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn series_csv_round_trips(dim in 1usize..4, rows in prop::collection::vec(row(3), 1..6)) {
        let mut s = Series::new(dim);
        for (i, (v, cov, scalars)) in rows.iter().enumerate() {
            s.push(Row {
                t: i as f64 * 0.125,
                y: v[..dim].to_vec(),
                u: v[dim..2 * dim].to_vec(),
                e: v[2 * dim..3 * dim].to_vec(),
                funnel: scalars[0],
                margin: scalars[1],
                mass: scalars[2],
                cov: cov[..dim * (dim + 1) / 2].to_vec(),
                h_norm: scalars[3],
                min_density: scalars[4],
            });
        }
        let text = s.to_csv();
        let back = Series::parse_csv(&text).unwrap();
        prop_assert_eq!(back.to_csv(), text);
    }

    #[test]
    fn snapshot_csv_round_trips(values in prop::collection::vec(-1e6f64..1e6, 1..50)) {
        let snap = Snapshot {
            t: 0.25,
            dim: 1,
            points: (0..values.len()).map(|i| i as f64 / 7.0).collect(),
            values,
        };
        let back = Snapshot::parse_csv(&snap.to_csv(), 0.25).unwrap();
        prop_assert_eq!(back, snap);
    }
}

/// The fuzz corpus seeds are valid inputs and satisfy the round-trip
/// assertions of their targets.
#[test]
fn fuzz_seeds_round_trip() {
    let corpus = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus");
    let read = |target: &str| -> Vec<String> {
        let mut files: Vec<_> = std::fs::read_dir(corpus.join(target))
            .unwrap()
            .map(|e| e.unwrap().path())
            .collect();
        files.sort();
        assert!(!files.is_empty(), "no seeds for {target}");
        files.iter().map(|p| std::fs::read_to_string(p).unwrap()).collect()
    };
    for text in read("scenario_config") {
        let cfg = ScenarioConfig::from_json_str(&text).unwrap();
        let again = serde_json::to_string(&cfg).unwrap();
        assert_eq!(ScenarioConfig::from_json_str(&again).unwrap(), cfg);
    }
    for text in read("series_csv") {
        let out = Series::parse_csv(&text).unwrap().to_csv();
        assert_eq!(Series::parse_csv(&out).unwrap().to_csv(), out);
    }
    for text in read("snapshot_csv") {
        let out = Snapshot::parse_csv(&text, 0.0).unwrap().to_csv();
        assert_eq!(Snapshot::parse_csv(&out, 0.0).unwrap().to_csv(), out);
    }
    for text in read("run_meta") {
        fpfunnel::record::RunMeta::from_json_str(&text).unwrap();
    }
}

#[test]
fn bundled_tracking_configs_match_builtin_scenarios() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let load = |name: &str| ScenarioConfig::from_json_str(&std::fs::read_to_string(dir.join(name)).unwrap()).unwrap();
    let disturbed = load("paper_sec6_disturbed.cfg");
    let clean = load("paper_sec6_clean.cfg");
    assert_eq!(disturbed.stamp(), ScenarioConfig::tracking_disturbed().stamp());
    assert_eq!(clean.stamp(), ScenarioConfig::tracking_clean().stamp());
    assert_eq!(disturbed.spectral_order(), 60);
    for name in ["feedforward_2d.cfg", "open_loop_2d.cfg"] {
        Scenario::new(load(name)).unwrap();
    }
}
