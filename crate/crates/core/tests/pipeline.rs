use holotrans::bundle::BundleSpec;
use holotrans::geometry::GeometryContext;
use holotrans::pipeline::config::Degrees;
use holotrans::pipeline::report::{emit_report, margin_rows, point_rows, read_margins, read_points, read_summary, RunSummary};
use holotrans::pipeline::{
    count_zeros, load_record, measure, persist, run_dir, run_pipeline, run_single, Failure, RunConfig, MATCH_TOL, VALUE_SEPARATION,
};
use holotrans::sections::{make_reference_section, SectionField};
use holotrans::Error;

#[test]
fn single_atom_at_degree_one_has_one_zero() {
    let sp = BundleSpec::new(GeometryContext::new(1, 1).unwrap(), 1).unwrap();
    let s = make_reference_section(&[0.3, 0.7], 0, &sp).unwrap();
    let z = count_zeros(&s, 0.25).unwrap();
    assert_eq!(z.count, 1);
    assert_eq!(z.zeros.len(), 1);
    assert_eq!(z.zeros[0].degree, 1);
}

#[test]
fn hypersurface_run_and_replay() {
    let cfg = RunConfig::single(1, 4, 0, 0, 0.5);
    let rec = run_single(&cfg, 4).unwrap();
    assert!(rec.failure.is_none(), "{:?}", rec.failure);
    assert!(rec.verdict().is_ok());
    let z = rec.measurement.counts.zeros.as_ref().unwrap();
    assert_eq!(z.oracle.count, 4);
    assert!(z.oracle.zeros.iter().all(|p| p.degree == 1));
    assert!(z.max_mismatch.unwrap() <= MATCH_TOL);
    assert!(rec.measurement.strata.iter().all(|r| r.eta_cert > 0.0));

    // re-measurement from the serialized section alone
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    persist(&rec, &run).unwrap();
    let section = SectionField::load(&run.join("section.json")).unwrap();
    let cfg_back = RunConfig::load(&run.join("config.toml")).unwrap();
    assert_eq!(cfg_back, rec.config);
    let again = measure(&section, &cfg_back).unwrap();
    assert_eq!(again, rec.measurement);
    assert_eq!(load_record(&run).unwrap(), rec);
}

#[test]
fn counts_are_seed_invariant() {
    for seed in 0..3 {
        let mut cfg = RunConfig::single(1, 3, 0, 0, 0.5);
        cfg.seed = seed;
        let rec = run_single(&cfg, 3).unwrap();
        assert!(rec.failure.is_none(), "seed {seed}: {:?}", rec.failure);
        assert_eq!(rec.measurement.counts.zeros.as_ref().unwrap().oracle.count, 3);
    }
}

#[test]
fn pencil_at_degree_three() {
    let cfg = RunConfig::single(1, 3, 1, 2, 0.5);
    let rec = run_single(&cfg, 3).unwrap();
    assert!(rec.failure.is_none(), "{:?}", rec.failure);
    let p = rec.measurement.counts.pencil.as_ref().unwrap();
    assert!(p.base_points.is_empty());
    assert!(p.min_sigma0 > 0.0);
    assert_eq!(p.winding_count, 6);
    assert_eq!(p.critical.len(), 6);
    assert!(p.critical.iter().all(|c| c.degree == 1));
    let cert = rec.measurement.strata.iter().map(|r| r.eta_cert).fold(f64::INFINITY, f64::min);
    assert!(p.critical.iter().all(|c| c.hessian_margin >= cert));
    assert!(p.min_value_separation.unwrap() >= VALUE_SEPARATION);
    assert!(p.degree_checks.iter().all(|d| d.count == 3));
    assert!(rec.measurement.counts.critical_mismatch.unwrap() <= MATCH_TOL);
}

#[test]
fn report_round_trip_over_a_sweep() {
    let mut cfg = RunConfig::single(1, 3, 0, 0, 0.5);
    cfg.model.k = Degrees::Sweep(vec![3, 5]);
    let records = run_pipeline(&cfg).unwrap();
    assert_eq!(records.len(), 2);
    let dir = tempfile::tempdir().unwrap();
    let files = emit_report(&records, dir.path()).unwrap();

    let summaries = read_summary(&files.summary).unwrap();
    assert_eq!(summaries, records.iter().map(RunSummary::of).collect::<Vec<_>>());
    let rows = read_margins(&files.margins).unwrap();
    assert_eq!(rows, margin_rows(&records));
    // hypersurfaces carry a single stratum: one row per degree
    assert_eq!(rows.len(), 2);
    assert_eq!((rows[0].k, rows[1].k), (3, 5));
    assert!(rows[0].nonincreasing);
    assert_eq!(rows[1].nonincreasing, rows[1].eta_cert <= rows[0].eta_cert);
    let points = read_points(&files.points).unwrap();
    assert_eq!(points, point_rows(&records));
    assert_eq!(points.iter().filter(|p| p.kind == "zero").count(), 8);
}

#[test]
fn minimal_record_has_empty_counts() {
    // a pencil without jets has no counting oracles attached
    let cfg = RunConfig::single(1, 1, 1, 0, 0.5);
    let rec = run_single(&cfg, 1).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let files = emit_report(std::slice::from_ref(&rec), dir.path()).unwrap();
    let s = &read_summary(&files.summary).unwrap()[0];
    assert_eq!(s.config, cfg);
    assert!(s.counts.zeros.is_none() && s.counts.base.is_empty() && s.counts.critical.is_empty());
}

#[test]
fn exit_codes() {
    let err = RunConfig::from_toml_str("model.n = 3").unwrap_err();
    assert_eq!(err.exit_code(), 4);
    let mut cfg = RunConfig::single(1, 3, 0, 0, 0.5);
    cfg.grid.spacing = 1.0;
    assert_eq!(run_single(&cfg, 3).unwrap_err().exit_code(), 4);

    let mut rec = run_single(&RunConfig::single(1, 2, 0, 0, 0.5), 2).unwrap();
    rec.failure = Some(Failure {
        code: 3,
        message: "zeros differ".into(),
    });
    assert!(matches!(rec.verdict(), Err(Error::OracleDisagreement(_))));
    assert_eq!(rec.verdict().unwrap_err().exit_code(), 3);
    rec.failure = Some(Failure {
        code: 2,
        message: "Z".into(),
    });
    assert_eq!(rec.verdict().unwrap_err().exit_code(), 2);
}

#[test]
fn run_directories_are_distinct() {
    let mut cfg = RunConfig::single(1, 3, 1, 2, 0.5);
    cfg.seed = 7;
    assert!(run_dir(&cfg, 3).ends_with("n1-k3-m1-r2-seed7"));
    assert_ne!(run_dir(&cfg, 3), run_dir(&cfg, 5));
}
