//! End-to-end runs of every catalog scenario through the library runner,
//! including the catalog round-trip: each documented example config must
//! validate and execute.

use std::path::PathBuf;

use latflow::experiment::{catalog, run_config, ConfigMap, RunError};

fn tmp_dir(name: &str) -> PathBuf {
    std::env::temp_dir().join(format!("latflow-scn-{}-{name}", std::process::id()))
}

#[test]
fn catalog_examples_run_end_to_end() {
    for doc in catalog() {
        let cfg = ConfigMap::parse(doc.example).unwrap();
        let dir = tmp_dir(doc.tag);
        let summary = run_config(&cfg, Some(&dir), Some(1))
            .unwrap_or_else(|e| panic!("{} example failed: {e}", doc.tag));
        assert_eq!(summary.scenario, doc.tag);
        assert!(summary.rows > 0, "{}: no rows", doc.tag);
        assert_eq!(
            summary.fail_rows, 0,
            "{}: FAIL rows in the example",
            doc.tag
        );
        let records = std::fs::read_to_string(dir.join("records.jsonl")).unwrap();
        let header: serde_json::Value =
            serde_json::from_str(records.lines().next().unwrap()).unwrap();
        assert_eq!(header["schema"], "latflow.records/1");
        assert!(header["config_hash"].is_string());
        let csv = std::fs::read_to_string(dir.join("summary.csv")).unwrap();
        assert!(
            csv.starts_with(doc.csv_columns),
            "{}: csv header mismatch",
            doc.tag
        );
        let _ = std::fs::remove_dir_all(&dir);
    }
}

#[test]
fn schema_violations_are_config_errors() {
    // unknown key inside params
    let cfg = ConfigMap::parse("scenario = delta-scan\n[params]\nk = 3\nwat = 1\n").unwrap();
    assert!(matches!(
        run_config(&cfg, Some(&tmp_dir("bad1")), Some(1)),
        Err(RunError::Config(_))
    ));
    // missing required key
    let cfg = ConfigMap::parse("scenario = nondiv-53\n[params]\nk = 2\n").unwrap();
    assert!(matches!(
        run_config(&cfg, Some(&tmp_dir("bad2")), Some(1)),
        Err(RunError::Config(_))
    ));
    // out-of-range dimension
    let cfg = ConfigMap::parse("scenario = delta-scan\n[params]\nk = 9\n").unwrap();
    assert!(matches!(
        run_config(&cfg, Some(&tmp_dir("bad3")), Some(1)),
        Err(RunError::Config(_))
    ));
    // eps above rho in a sweep grid
    let cfg = ConfigMap::parse(
        "scenario = marking-41\n[params]\nx0 = 0.04\nradius = 0.035\nt = 1.5,0.9\nrho = 0.3\neps_grid = 0.5\nsamples = 50\n",
    )
    .unwrap();
    assert!(matches!(
        run_config(&cfg, Some(&tmp_dir("bad4")), Some(1)),
        Err(RunError::Config(_))
    ));
}

#[test]
fn q_budget_violation_is_budget_error() {
    let cfg = ConfigMap::parse(
        "scenario = exponent-scan\n[params]\ny = 0.3,0.7\ncriterion = dual-standard\nq_max = 100000\n",
    )
    .unwrap();
    assert!(matches!(
        run_config(&cfg, Some(&tmp_dir("bud")), Some(1)),
        Err(RunError::Budget(_))
    ));
}

#[test]
fn witness_demo_rejection_is_not_failure() {
    // A rational target: the scan hits exactly, the witness is rejected
    // with a diagnostic row and the run still reports zero FAIL rows.
    let cfg =
        ConfigMap::parse("scenario = witness-demo\nseed = 2\n[params]\ny = 1/2\nq = 2\n").unwrap();
    let dir = tmp_dir("wreject");
    let summary = run_config(&cfg, Some(&dir), Some(1)).unwrap();
    assert_eq!(summary.fail_rows, 0);
    let records = std::fs::read_to_string(dir.join("records.jsonl")).unwrap();
    assert!(records.contains("REJECTED"), "{records}");
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn good_cert_flags_an_honest_violation() {
    // Deliberately tiny constant: the certificate must fail and the run
    // must report FAIL rows (exit code 1 at the CLI).
    let cfg = ConfigMap::parse(
        "scenario = good-cert\n[params]\npoly_inline = 0 0;1 1\ncenter = 0.5\nradius = 0.5\n\
         eps_grid = 0.5\nc = 0.01\nalpha = 1\n",
    )
    .unwrap();
    let dir = tmp_dir("gfail");
    let summary = run_config(&cfg, Some(&dir), Some(1)).unwrap();
    assert!(summary.fail_rows > 0);
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn marking_run_emits_point_stream() {
    let cfg = ConfigMap::parse(
        "scenario = marking-41\nseed = 4\n[params]\nx0 = 0.04\nradius = 0.035\nt = 1.5,0.9\n\
         rho = 0.3\neps_grid = 0.1\nsamples = 150\n",
    )
    .unwrap();
    let dir = tmp_dir("mark");
    let summary = run_config(&cfg, Some(&dir), Some(1)).unwrap();
    assert_eq!(summary.fail_rows, 0);
    let points = std::fs::read_to_string(dir.join("points_eps0.jsonl")).unwrap();
    assert_eq!(points.lines().count(), 150);
    let first: serde_json::Value = serde_json::from_str(points.lines().next().unwrap()).unwrap();
    assert!(first["status"].is_string());
    assert!(first["x"].is_number());
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn khintchine_counts_monotone_in_bound() {
    let cfg = ConfigMap::parse(
        "scenario = khintchine-count\n[params]\ny = sqrt2,0.33\npsi = constant:0.5\nq_max = 64\n",
    )
    .unwrap();
    let dir = tmp_dir("kh");
    run_config(&cfg, Some(&dir), Some(1)).unwrap();
    let csv = std::fs::read_to_string(dir.join("summary.csv")).unwrap();
    let counts: Vec<u64> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert!(counts.windows(2).all(|w| w[1] >= w[0]), "{counts:?}");
    let _ = std::fs::remove_dir_all(&dir);
}
