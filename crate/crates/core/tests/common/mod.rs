#![allow(dead_code)]

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use subnetgeo::enrichment::{Category, Modality};
use subnetgeo::report::{self, config_for_dataset, MetricKind, RunConfig};
use subnetgeo::synthgen::{self, DbErrorModel, DbMode, Dataset, IspProfile, ScaleDist, SynthConfig};

pub fn fixed_profile(name: &str, subnets: usize, scale: ScaleDist, stickiness: f64, ephemeral: f64) -> IspProfile {
    IspProfile {
        dba_name: name.into(),
        org_name: format!("{name} Communications LLC"),
        modality: Modality::Fixed,
        category: Category::ConsumerIsp,
        subnet_count: subnets,
        market_share: 1.0,
        scale,
        stickiness,
        ephemeral_share: ephemeral,
    }
}

pub fn mobile_profile(name: &str) -> IspProfile {
    IspProfile {
        dba_name: name.into(),
        org_name: format!("{name} Wireless Inc"),
        modality: Modality::Mobile,
        category: Category::ConsumerIsp,
        subnet_count: 4,
        market_share: 1.0,
        scale: ScaleDist::LogNormal { median_m: 30_000.0, sigma: 0.1 },
        stickiness: 0.0,
        ephemeral_share: 1.0,
    }
}

pub fn provider(name: &str, mode: DbMode, echo_share: f64) -> DbErrorModel {
    DbErrorModel { provider: name.into(), mode, echo_share }
}

pub fn scenario(seed: u64, n_devices: usize, n_nights: usize, profiles: Vec<IspProfile>, providers: Vec<DbErrorModel>) -> SynthConfig {
    let mut cfg = SynthConfig::simple(seed, n_devices, n_nights);
    cfg.profiles = profiles;
    cfg.providers = providers;
    cfg
}

/// Writes the dataset under `dir` and returns a run config for it.
pub fn write_with_config(ds: &Dataset, dir: &Path) -> RunConfig {
    let paths = synthgen::write_dataset(ds, dir).expect("dataset written");
    let mut cfg = config_for_dataset(&paths, ds, dir, PathBuf::from("report"));
    cfg.resolve_paths(dir);
    cfg
}

pub fn run_metrics(cfg: &mut RunConfig, metrics: &[MetricKind]) -> PathBuf {
    cfg.metrics = metrics.to_vec();
    report::run(cfg).expect("pipeline run");
    cfg.out.clone()
}

pub fn read_csv(path: &Path) -> Vec<HashMap<String, String>> {
    let mut r = csv::Reader::from_path(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    let headers = r.headers().unwrap().clone();
    r.records()
        .map(|rec| {
            let rec = rec.unwrap();
            headers.iter().zip(rec.iter()).map(|(h, v)| (h.to_string(), v.to_string())).collect()
        })
        .collect()
}

pub fn read_summary(report_dir: &Path) -> serde_json::Value {
    let text = std::fs::read_to_string(report_dir.join("summary.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

/// Every file under `dir` with its bytes, keyed by relative path.
pub fn tree(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    fn walk(base: &Path, dir: &Path, out: &mut Vec<(PathBuf, Vec<u8>)>) {
        let mut entries: Vec<_> = std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
        entries.sort();
        for p in entries {
            if p.is_dir() {
                walk(base, &p, out);
            } else {
                out.push((p.strip_prefix(base).unwrap().to_path_buf(), std::fs::read(&p).unwrap()));
            }
        }
    }
    let mut out = Vec::new();
    walk(dir, dir, &mut out);
    out
}
