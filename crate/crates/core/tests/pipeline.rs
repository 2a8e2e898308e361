mod common;

use common::*;
use subnetgeo::report::{self, MetricKind, RunConfig, INCOMPLETE_MARKER};
use subnetgeo::synthgen::{self, DbMode, ScaleDist, SynthConfig};
use subnetgeo::Error;

fn simple_run(dir: &std::path::Path) -> RunConfig {
    let ds = synthgen::generate(&SynthConfig::simple(21, 600, 6)).unwrap();
    write_with_config(&ds, dir)
}

#[test]
fn perfect_database_gives_zero_errors_and_full_retention() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = simple_run(dir.path());
    let out = run_metrics(&mut cfg, &[MetricKind::Quantiles, MetricKind::Churn, MetricKind::TooClose]);
    for row in read_csv(&out.join("quantiles.csv")) {
        for q in ["q10", "q25", "q50", "q75", "q90"] {
            assert_eq!(row[q], "0", "{row:?}");
        }
    }
    let churn = read_csv(&out.join("churn.csv"));
    assert_eq!(churn.len(), cfg.report.churn_d_max + 1);
    assert!(churn.iter().filter(|r| r["d"].parse::<usize>().unwrap() < 6).all(|r| r["share"] == "1"));
    let tc = read_csv(&out.join("too_close.csv"));
    assert!(tc.iter().all(|r| r["share"] == "1"));
}

#[test]
fn metric_selection_limits_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = simple_run(dir.path());
    let out = run_metrics(&mut cfg, &[MetricKind::Classes]);
    let files: Vec<String> = tree(&out).into_iter().map(|(p, _)| p.display().to_string()).collect();
    assert_eq!(files, vec!["classes.csv", "summary.json"]);
}

#[test]
fn summary_accounts_for_rows_and_versions() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = simple_run(dir.path());
    let mut text = std::fs::read_to_string(&cfg.inputs.clusters).unwrap();
    text.push_str("not,a,valid,row\n");
    std::fs::write(&cfg.inputs.clusters, text).unwrap();
    let out = run_metrics(&mut cfg, &[MetricKind::Classes]);
    let s = read_summary(&out);
    let t = &s["tally"];
    assert_eq!(t["balanced"], true);
    assert_eq!(t["rejected"]["malformed"], 1);
    assert_eq!(
        t["accepted"].as_u64().unwrap() + t["rejected_total"].as_u64().unwrap(),
        t["total"].as_u64().unwrap()
    );
    for m in ["core-model", "geodesy", "enrichment", "metrics", "synthgen", "cli-report"] {
        assert!(s["versions"][m].is_string(), "{m}");
    }
    assert_eq!(s["status"], "complete");
}

#[test]
fn missing_registry_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = simple_run(dir.path());
    std::fs::remove_file(&cfg.inputs.registry).unwrap();
    let err = report::run(&cfg).unwrap_err();
    assert!(err.is_config());
    assert!(err.to_string().contains(&cfg.inputs.registry.display().to_string()), "{err}");
}

#[test]
fn failure_leaves_marker_and_success_clears_it() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = simple_run(dir.path());
    let registry = std::fs::read_to_string(&cfg.inputs.registry).unwrap();
    std::fs::write(&cfg.inputs.registry, "this is not a registry\n").unwrap();
    assert!(report::run(&cfg).is_err());
    let marker = cfg.out.join(INCOMPLETE_MARKER);
    assert!(std::fs::read_to_string(&marker).unwrap().contains("failed"));
    std::fs::write(&cfg.inputs.registry, registry).unwrap();
    report::run(&cfg).unwrap();
    assert!(!marker.exists());
}

#[test]
fn stale_ecdf_files_are_removed() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = simple_run(dir.path());
    std::fs::create_dir_all(cfg.out.join("ecdf")).unwrap();
    std::fs::write(cfg.out.join("ecdf/old_cohort.csv"), "error_m,share\n1,1\n").unwrap();
    let out = run_metrics(&mut cfg, &[MetricKind::Quantiles]);
    assert!(!out.join("ecdf/old_cohort.csv").exists());
    assert!(out.join("ecdf/provider_perfect.csv").exists());
}

#[test]
fn clusters_outside_snapshot_window_are_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = simple_run(dir.path());
    let g = &mut cfg.inputs.geodb[0];
    g.window_from = g.window_to;
    let err = report::run(&cfg).unwrap_err();
    assert!(matches!(err, Error::Config(_)), "{err}");
}

#[test]
fn inconsistent_provider_windows_are_rejected() {
    let scale = ScaleDist::LogNormal { median_m: 3000.0, sigma: 0.3 };
    let sc = scenario(
        5,
        300,
        3,
        vec![fixed_profile("Isp", 3, scale, 1.0, 0.0)],
        vec![provider("a", DbMode::Perfect, 0.0), provider("b", DbMode::SubnetCentroid, 0.0)],
    );
    let ds = synthgen::generate(&sc).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = write_with_config(&ds, dir.path());
    cfg.validate().unwrap();
    cfg.inputs.geodb[1].window_to += chrono::Duration::days(1);
    assert!(matches!(cfg.validate(), Err(Error::Config(_))));
}

#[test]
fn run_config_round_trips_through_toml() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = simple_run(dir.path());
    let back = RunConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
    assert_eq!(back, cfg);
}

#[test]
fn check_reports_accounting_without_writing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = simple_run(dir.path());
    let r = report::check(&cfg).unwrap();
    assert!(r.tally.balanced());
    assert_eq!(r.tally.rejected_total(), 0);
    assert_eq!(r.snapshot_entries.len(), 1);
    assert!(!cfg.out.exists());
}

#[test]
fn plots_render_from_a_report() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = simple_run(dir.path());
    let out = run_metrics(&mut cfg, &[MetricKind::Quantiles, MetricKind::Churn]);
    let o = report::plot(&out).unwrap();
    assert_eq!(o.written.len(), 2);
    assert_eq!(o.notices, vec!["skipped movement: no data".to_string()]);
}
