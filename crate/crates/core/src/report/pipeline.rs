//! End-to-end run: parse, filter, enrich, score, compute metrics, write.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde_json::{json, Map, Value};

use super::config::{MetricKind, RunConfig};
use super::format::{fmt_g6, fmt_opt, round_sig};
use crate::enrichment::{
    classify_org, load_nic_table, resolve_org, ErrorRecord, GeoDbSnapshot, Modality, OrgClass, PrefixTable,
    Registry, Resolution, RuleTable, ScoreOutput,
};
use crate::error::{Error, Result};
use crate::geodesy::PolygonLayer;
use crate::metrics::{
    attenuation_analysis, attribute_correlation, churn_curve, cohort_compare, modality_share,
    scale_error_correlation, subnet_aggregate, subnet_movement, summarize_cohorts, CohortKey, Dimension,
    LayerLocator, SubnetAggregate, VisitHistogram, DEFAULT_QUANTILES,
};
use crate::model::{
    night_flag, parse_clusters, subnet_key, tabulate_classes, LocationCluster, RejectionTally, SubnetKey,
};

pub const INCOMPLETE_MARKER: &str = "INCOMPLETE";
const QUANTILE_HEADER: [&str; 6] = ["cohort", "q10", "q25", "q50", "q75", "q90"];
const MODULES: [&str; 6] = ["core-model", "geodesy", "enrichment", "metrics", "synthgen", "cli-report"];

/// Reference data shared by both observation periods.
pub struct LoadedInputs {
    pub registry: Registry,
    pub rules: RuleTable,
    pub nic: Option<PrefixTable<String>>,
    pub snapshots: Vec<GeoDbSnapshot>,
    pub layers: Vec<PolygonLayer>,
}

pub fn load_inputs(cfg: &RunConfig) -> Result<LoadedInputs> {
    cfg.validate()?;
    let i = &cfg.inputs;
    let registry = Registry::load(&i.registry)?;
    let rules = match &i.rules {
        Some(p) => RuleTable::load(p)?,
        None => RuleTable::default(),
    };
    let nic = i.nic.as_deref().map(load_nic_table).transpose()?;
    let snapshots = i
        .geodb
        .iter()
        .map(|g| GeoDbSnapshot::load(&g.path, &g.provider, g.snapshot_date, g.window()?))
        .collect::<Result<Vec<_>>>()?;
    let layers = i.polygons.iter().map(|p| PolygonLayer::load(p)).collect::<Result<Vec<_>>>()?;
    Ok(LoadedInputs { registry, rules, nic, snapshots, layers })
}

/// Accepted clusters of one period with their per-record enrichment.
pub struct Period {
    pub clusters: Vec<LocationCluster>,
    pub tally: RejectionTally,
    /// Index into `orgs`, or `None` for unknown organizations.
    pub org: Vec<Option<usize>>,
    pub orgs: Vec<OrgClass>,
    pub night: Vec<bool>,
    /// Index into the configured regions.
    pub city: Vec<Option<usize>>,
    pub subnets: usize,
    pub unknown_subnets: usize,
}

impl Period {
    pub fn org_of(&self, i: usize) -> Option<&OrgClass> {
        self.org[i].map(|k| &self.orgs[k])
    }

    fn fixed_selection(&self) -> Vec<usize> {
        (0..self.clusters.len())
            .filter(|&i| self.org_of(i).map_or(false, |o| o.modality == Modality::Fixed))
            .collect()
    }
}

pub fn load_period(cfg: &RunConfig, inputs: &LoadedInputs, path: &Path) -> Result<Period> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let parsed = parse_clusters(
        std::io::BufReader::new(file),
        &path.display().to_string(),
        &cfg.policy,
        inputs.nic.as_ref(),
    )?;
    let clusters = parsed.clusters;

    let keys: BTreeSet<SubnetKey> = clusters.iter().filter_map(|c| subnet_key(c.ip.addr).ok()).collect();
    let keys: Vec<SubnetKey> = keys.into_iter().collect();
    let resolved: Vec<Result<Option<OrgClass>>> = keys
        .par_iter()
        .map(|k| {
            Ok(match resolve_org(k, &inputs.registry)? {
                Resolution::Found(rec) => Some(classify_org(rec, &inputs.rules)),
                Resolution::Unknown => None,
            })
        })
        .collect();
    let mut orgs: Vec<OrgClass> = Vec::new();
    let mut org_index: BTreeMap<OrgClass, usize> = BTreeMap::new();
    let mut by_subnet: HashMap<SubnetKey, Option<usize>> = HashMap::with_capacity(keys.len());
    let mut unknown_subnets = 0;
    for (k, r) in keys.iter().zip(resolved) {
        let slot = match r? {
            Some(org) => Some(*org_index.entry(org.clone()).or_insert_with(|| {
                orgs.push(org);
                orgs.len() - 1
            })),
            None => {
                unknown_subnets += 1;
                None
            }
        };
        by_subnet.insert(*k, slot);
    }
    let org = clusters
        .iter()
        .map(|c| subnet_key(c.ip.addr).ok().and_then(|k| by_subnet.get(&k).copied().flatten()))
        .collect();
    let night = clusters.par_iter().map(|c| night_flag(c, cfg.utc_offset)).collect();
    let city = clusters
        .par_iter()
        .map(|c| cfg.policy.regions.iter().position(|r| r.contains(c.position)))
        .collect();
    Ok(Period {
        clusters,
        tally: parsed.tally,
        org,
        orgs,
        night,
        city,
        subnets: keys.len(),
        unknown_subnets,
    })
}

fn tally_json(t: &RejectionTally) -> Value {
    let rejected: Map<String, Value> = t.rejected.iter().map(|(k, v)| (k.as_str().to_string(), json!(v))).collect();
    json!({
        "total": t.total,
        "accepted": t.accepted,
        "rejected": rejected,
        "rejected_total": t.rejected_total(),
        "special_use": t.special_use,
        "foreign_registry": t.foreign_registry,
        "balanced": t.balanced(),
    })
}

fn jf(x: f64) -> Value {
    if x.is_finite() {
        json!(round_sig(x))
    } else {
        Value::Null
    }
}

fn jopt(x: Option<f64>) -> Value {
    x.map_or(Value::Null, jf)
}

/// Output files accumulated in memory and written in path order at the end.
#[derive(Default)]
struct Outputs {
    files: BTreeMap<PathBuf, Vec<u8>>,
}

impl Outputs {
    fn csv(&mut self, name: impl Into<PathBuf>, header: &[&str], rows: Vec<Vec<String>>) -> Result<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Data(e.to_string()))?;
        self.files.insert(name.into(), bytes);
        Ok(())
    }
}

struct Context<'a> {
    cfg: &'a RunConfig,
    inputs: &'a LoadedInputs,
    period: &'a Period,
    scores: Vec<ScoreOutput>,
    /// Polygon of each cluster's GPS position in the first layer.
    gps_polygon: Vec<Option<usize>>,
    locator: Option<LayerLocator<'a>>,
}

impl<'a> Context<'a> {
    fn providers(&self) -> impl Iterator<Item = (&'a str, &ScoreOutput)> + '_ {
        self.inputs.snapshots.iter().map(|s| &*s.provider).zip(&self.scores)
    }

    fn dimension_value(&self, d: Dimension, rec: &'a ErrorRecord) -> String {
        let i = rec.cluster;
        let p = self.period;
        let org = p.org_of(i);
        match d {
            Dimension::City => p.city[i].map_or("none".into(), |k| self.cfg.policy.regions[k].name.clone()),
            Dimension::Provider => rec.provider.to_string(),
            Dimension::Dba => org.map_or("unknown".into(), |o| o.dba_name.clone()),
            Dimension::Modality => org.map_or("unknown".into(), |o| o.modality.to_string()),
            Dimension::Category => org.map_or("unknown".into(), |o| o.category.to_string()),
            Dimension::ClassGroup => {
                if p.clusters[i].class.is_travel() { "travel" } else { "non_travel" }.into()
            }
            Dimension::Night => if p.night[i] { "night" } else { "day" }.into(),
            Dimension::AccuracyBin => rec.claimed_accuracy_km.map_or("none".into(), |a| format!("{}km", fmt_g6(a))),
            Dimension::PolygonClass => self
                .polygon_attr(i, &self.cfg.report.polygon_class_attribute)
                .unwrap_or("none")
                .to_string(),
        }
    }

    fn polygon_attr(&self, cluster: usize, key: &str) -> Option<&'a str> {
        let layer = self.locator.as_ref()?.layer();
        layer.polygons()[self.gps_polygon[cluster]?].attribute(key)
    }
}

fn quantiles(ctx: &Context, out: &mut Outputs, summary: &mut Map<String, Value>) -> Result<()> {
    let mut specs: Vec<Vec<Dimension>> = Vec::new();
    for s in &ctx.cfg.report.group_by {
        if !specs.contains(s) {
            specs.push(s.clone());
        }
    }
    let mut rows = Vec::new();
    let mut empty = Vec::new();
    let mut cohorts = 0;
    let mut ecdf_names = BTreeSet::new();
    for spec in &specs {
        let mut groups: HashMap<Vec<String>, Vec<f64>> = HashMap::new();
        for (_, score) in ctx.providers() {
            for rec in &score.records {
                let key: Vec<String> = spec.iter().map(|d| ctx.dimension_value(*d, rec)).collect();
                groups.entry(key).or_default().push(rec.error_m);
            }
        }
        let keyed: BTreeMap<CohortKey, Vec<f64>> = groups
            .into_iter()
            .map(|(vals, v)| (CohortKey::new(spec.iter().copied().zip(vals.iter().map(String::as_str))), v))
            .collect();
        let report = summarize_cohorts(keyed, &DEFAULT_QUANTILES);
        empty.extend(report.empty.iter().map(|k| k.to_string()));
        for (key, stats) in &report.cohorts {
            cohorts += 1;
            let mut row = vec![key.to_string()];
            row.extend(stats.quantiles.iter().map(|q| fmt_g6(*q)));
            rows.push(row);
            let name = format!("ecdf/{}.csv", key.slug());
            if ecdf_names.insert(name.clone()) {
                let pts = stats.ecdf.thinned(ctx.cfg.report.ecdf_max_points);
                let ecdf_rows = pts.iter().map(|(x, s)| vec![fmt_g6(*x), fmt_g6(*s)]).collect();
                out.csv(name, &["error_m", "share"], ecdf_rows)?;
            }
        }
    }
    out.csv("quantiles.csv", &QUANTILE_HEADER, rows)?;
    summary.insert("quantiles".into(), json!({ "cohorts": cohorts, "empty_cohorts": empty, "unit": "m" }));
    Ok(())
}

fn too_close(ctx: &Context, out: &mut Outputs) -> Result<()> {
    let mut rows = Vec::new();
    for (provider, score) in ctx.providers() {
        let mut by_dba: BTreeMap<String, (u64, u64)> = BTreeMap::new();
        for rec in &score.records {
            let dba = ctx.period.org_of(rec.cluster).map_or("unknown".to_string(), |o| o.dba_name.clone());
            for key in ["(all)".to_string(), dba] {
                let e = by_dba.entry(key).or_default();
                e.0 += 1;
                e.1 += rec.too_close as u64;
            }
        }
        for (dba, (n, close)) in by_dba {
            rows.push(vec![provider.to_string(), dba, n.to_string(), close.to_string(), fmt_g6(close as f64 / n as f64)]);
        }
    }
    out.csv("too_close.csv", &["provider", "dba", "records", "too_close", "share"], rows)
}

fn compare(ctx: &Context, out: &mut Outputs) -> Result<()> {
    let mut rows = Vec::new();
    for (provider, score) in ctx.providers() {
        let (mut travel, mut other) = (Vec::new(), Vec::new());
        for rec in &score.records {
            if ctx.period.clusters[rec.cluster].class.is_travel() {
                travel.push(rec.error_m);
            } else {
                other.push(rec.error_m);
            }
        }
        let (na, nb) = (travel.len(), other.len());
        if let (Ok(a), Ok(b)) = (crate::metrics::EcdfTable::new(travel), crate::metrics::EcdfTable::new(other)) {
            let c = cohort_compare(&a, &b);
            rows.push(vec![
                provider.to_string(),
                "class_group=travel".into(),
                "class_group=non_travel".into(),
                na.to_string(),
                nb.to_string(),
                fmt_opt(c.median_ratio),
                fmt_g6(c.ks),
            ]);
        }
    }
    out.csv("compare.csv", &["provider", "cohort_a", "cohort_b", "n_a", "n_b", "median_ratio", "ks"], rows)
}

fn scale_column(f: f64) -> String {
    format!("scale_f{}", fmt_g6(f))
}

fn subnets(ctx: &Context, aggs: &[SubnetAggregate], out: &mut Outputs, summary: &mut Map<String, Value>) -> Result<()> {
    let cfg = ctx.cfg;
    let providers: Vec<&str> = ctx.providers().map(|(p, _)| p).collect();
    let mut header: Vec<String> = ["subnet", "dba", "devices", "addresses", "points", "out_of_range", "passes", "medioid_lat", "medioid_lon"]
        .map(String::from)
        .to_vec();
    header.extend(cfg.scale.fractions.iter().map(|f| scale_column(*f)));
    header.extend(providers.iter().map(|p| format!("mean_error_m_{p}")));
    let dba_of: HashMap<SubnetKey, String> = ctx
        .period
        .clusters
        .iter()
        .enumerate()
        .filter_map(|(i, c)| Some((subnet_key(c.ip.addr).ok()?, ctx.period.org_of(i)?.dba_name.clone())))
        .collect();
    let mut rows = Vec::new();
    for a in aggs {
        let mut row = vec![
            a.key.to_string(),
            dba_of.get(&a.key).cloned().unwrap_or_default(),
            a.devices.to_string(),
            a.addresses.to_string(),
            a.points.len().to_string(),
            a.out_of_range.to_string(),
            a.passes.to_string(),
            format!("{:.6}", a.medioid_geo.lat),
            format!("{:.6}", a.medioid_geo.lon),
        ];
        row.extend(a.scales.iter().map(|(_, s)| fmt_g6(s.scale_m)));
        row.extend(providers.iter().map(|p| fmt_opt(a.mean_error.get(*p).map(|m| m.mean_m))));
        rows.push(row);
    }
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    out.csv("subnets.csv", &header_refs, rows)?;

    let mut corr_rows = Vec::new();
    for p in &providers {
        for f in &cfg.scale.fractions {
            let c = scale_error_correlation(aggs, *f, p);
            corr_rows.push(vec![p.to_string(), fmt_g6(*f), c.n.to_string(), fmt_opt(c.r), fmt_opt(c.p_value)]);
        }
    }
    out.csv("scale_correlation.csv", &["provider", "f", "n", "r", "p_value"], corr_rows)?;
    summary.insert(
        "subnets".into(),
        json!({ "aggregated": aggs.len(), "passing": aggs.iter().filter(|a| a.passes).count() }),
    );
    Ok(())
}

fn visits(ctx: &Context, aggs: &[SubnetAggregate], out: &mut Outputs) -> Result<()> {
    let split_f = if ctx.cfg.scale.fractions.contains(&0.75) { 0.75 } else { ctx.cfg.scale.fractions[0] };
    let split = ctx.cfg.report.visit_scale_split_m;
    let mut groups: BTreeMap<&str, VisitHistogram> = BTreeMap::new();
    let km = fmt_g6(split / 1000.0);
    let (gt, le) = (format!("scale_gt_{km}km"), format!("scale_le_{km}km"));
    for a in aggs.iter().filter(|a| a.passes) {
        groups.entry("all").or_default().merge(&a.visits);
        if let Some(s) = a.scale_at(split_f) {
            let g = if s.scale_m > split { gt.as_str() } else { le.as_str() };
            groups.entry(g).or_default().merge(&a.visits);
        }
    }
    let mut rows = Vec::new();
    for (g, h) in &groups {
        let unweighted: BTreeMap<u64, f64> = h.unweighted_shares().into_iter().collect();
        for (v, w) in h.weighted_shares() {
            rows.push(vec![
                g.to_string(),
                v.to_string(),
                h.pairs_by_visits[&v].to_string(),
                fmt_g6(w),
                fmt_g6(unweighted[&v]),
            ]);
        }
    }
    out.csv("visits.csv", &["group", "visits", "pairs", "weighted_share", "unweighted_share"], rows)
}

fn churn(ctx: &Context, out: &mut Outputs) -> Result<()> {
    let p = ctx.period;
    let labels: Vec<Option<&str>> = (0..p.clusters.len())
        .map(|i| p.org_of(i).filter(|o| o.modality == Modality::Fixed).map(|o| o.dba_name.as_str()))
        .collect();
    let curves = churn_curve(&p.clusters, &labels, ctx.cfg.utc_offset, ctx.cfg.report.churn_d_max);
    let mut rows = Vec::new();
    for (isp, c) in &curves {
        for d in 0..=c.d_max() {
            rows.push(vec![isp.clone(), d.to_string(), fmt_opt(c.share(d)), c.pairs[d].to_string()]);
        }
    }
    out.csv("churn.csv", &["isp", "d", "share", "n_pairs"], rows)
}

fn movement(
    ctx: &Context,
    aggs: &[SubnetAggregate],
    period2: &Period,
    out: &mut Outputs,
) -> Result<()> {
    let cfg = ctx.cfg;
    let aggs2 = subnet_aggregate(&period2.clusters, &period2.fixed_selection(), &[], &cfg.policy.regions, &cfg.scale)?;
    let m = subnet_movement(aggs, &aggs2, (cfg.scale.min_devices, cfg.scale.min_addresses), &cfg.report.persistence_ladder)?;
    let rows = m.displacements.iter().map(|d| vec![d.key.to_string(), fmt_g6(d.distance_m)]).collect();
    out.csv("movement.csv", &["subnet", "distance_m"], rows)?;
    let rows = m
        .persistence
        .iter()
        .map(|r| {
            vec![
                r.threshold.to_string(),
                r.forward_n.to_string(),
                r.forward_kept.to_string(),
                fmt_opt(r.forward_share()),
                r.backward_n.to_string(),
                r.backward_kept.to_string(),
                fmt_opt(r.backward_share()),
            ]
        })
        .collect();
    out.csv(
        "persistence.csv",
        &["threshold", "forward_n", "forward_kept", "forward_share", "backward_n", "backward_kept", "backward_share"],
        rows,
    )
}

fn modality(ctx: &Context, locator: &LayerLocator, out: &mut Outputs) -> Result<()> {
    let p = ctx.period;
    let points = (0..p.clusters.len())
        .filter(|&i| p.night[i])
        .filter_map(|i| Some((p.clusters[i].position, p.org_of(i)?.modality)));
    let rows = modality_share(points, locator)
        .into_iter()
        .map(|r| vec![r.polygon_id, r.mobile.to_string(), r.fixed.to_string(), fmt_opt(r.share)])
        .collect();
    out.csv("modality.csv", &["polygon_id", "mobile", "fixed", "share"], rows)
}

fn polygon_correlation(ctx: &Context, layer: &PolygonLayer, out: &mut Outputs) -> Result<()> {
    let mut rows = Vec::new();
    for (provider, score) in ctx.providers() {
        let mut per_poly: Vec<Vec<f64>> = vec![Vec::new(); layer.len()];
        for rec in &score.records {
            if let Some(k) = ctx.gps_polygon[rec.cluster] {
                per_poly[k].push(rec.error_m);
            }
        }
        let medians: Vec<Option<f64>> = per_poly
            .into_iter()
            .map(|v| crate::metrics::EcdfTable::new(v).ok().map(|e| e.median()))
            .collect();
        let weights: Vec<f64> = medians.iter().map(|m| m.map_or(0.0, |_| 1.0)).collect();
        let counts: Vec<f64> = {
            let mut c = vec![0.0; layer.len()];
            for rec in &score.records {
                if let Some(k) = ctx.gps_polygon[rec.cluster] {
                    c[k] += 1.0;
                }
            }
            c.iter().zip(&weights).map(|(c, w)| c * w).collect()
        };
        for attr in &ctx.cfg.report.polygon_attributes {
            let values: Vec<Option<f64>> = layer.polygons().iter().map(|p| p.numeric_attribute(attr)).collect();
            let c = attribute_correlation(&medians, &values, Some(&counts));
            rows.push(vec![provider.to_string(), attr.clone(), c.n.to_string(), fmt_opt(c.r), fmt_opt(c.p_value)]);
        }
    }
    out.csv("polygon_correlation.csv", &["provider", "attribute", "n", "r", "p_value"], rows)
}

fn attenuation(
    ctx: &Context,
    locator: &LayerLocator,
    out: &mut Outputs,
    summary: &mut Map<String, Value>,
) -> Result<()> {
    let attr = &ctx.cfg.report.attenuation_attribute;
    let polys = locator.layer().polygons();
    let mut rows = Vec::new();
    let mut fit_rows = Vec::new();
    let mut fits = Map::new();
    for (provider, score) in ctx.providers() {
        let pairs: Vec<(Option<f64>, Option<f64>)> = score
            .records
            .par_iter()
            .map(|rec| {
                let truth = ctx.gps_polygon[rec.cluster].and_then(|k| polys[k].numeric_attribute(attr));
                let imputed = locator.locate(rec.predicted).and_then(|p| p.numeric_attribute(attr));
                (truth, imputed)
            })
            .collect();
        let r = attenuation_analysis(&pairs, &DEFAULT_QUANTILES);
        for d in &r.deciles {
            let mut row = vec![provider.to_string(), d.decile.to_string(), d.n.to_string(), fmt_g6(d.y_true_mean)];
            row.extend(d.y_imp_quantiles.iter().map(|q| fmt_g6(*q)));
            rows.push(row);
        }
        fit_rows.push(vec![
            provider.to_string(),
            r.fit.map_or(0, |f| f.n).to_string(),
            fmt_opt(r.fit.map(|f| f.slope)),
            fmt_opt(r.fit.map(|f| f.intercept)),
            r.excluded.to_string(),
        ]);
        fits.insert(
            provider.to_string(),
            json!({ "slope": jopt(r.fit.map(|f| f.slope)), "excluded": r.excluded }),
        );
    }
    out.csv(
        "attenuation.csv",
        &["provider", "decile", "n", "y_true_mean", "q10", "q25", "q50", "q75", "q90"],
        rows,
    )?;
    out.csv("attenuation_fit.csv", &["provider", "n", "slope", "intercept", "excluded"], fit_rows)?;
    summary.insert("attenuation".into(), Value::Object(fits));
    Ok(())
}

/// Result of a completed run.
#[derive(Debug)]
pub struct RunOutcome {
    pub out_dir: PathBuf,
    /// Relative paths of every file written, in write order.
    pub files: Vec<PathBuf>,
    pub summary: Value,
}

fn compute(cfg: &RunConfig) -> Result<(Outputs, Map<String, Value>)> {
    let inputs = load_inputs(cfg)?;
    let period = load_period(cfg, &inputs, &cfg.inputs.clusters)?;
    let mut summary = Map::new();
    summary.insert("tally".into(), tally_json(&period.tally));
    summary.insert(
        "enrichment".into(),
        json!({
            "subnets": period.subnets,
            "unknown_org_subnets": period.unknown_subnets,
            "unknown_org_clusters": period.org.iter().filter(|o| o.is_none()).count(),
        }),
    );

    let scores = inputs
        .snapshots
        .iter()
        .map(|s| crate::enrichment::score_errors(&period.clusters, s, cfg.report.too_close_m))
        .collect::<Result<Vec<_>>>()?;
    let mut scoring = Map::new();
    for (s, o) in inputs.snapshots.iter().zip(&scores) {
        let close = o.records.iter().filter(|r| r.too_close).count();
        scoring.insert(
            s.provider.to_string(),
            json!({
                "records": o.records.len(),
                "misses": o.misses,
                "antipodal": o.antipodal,
                "too_close": close,
                "too_close_share": jopt((!o.records.is_empty()).then(|| close as f64 / o.records.len() as f64)),
            }),
        );
    }
    summary.insert("scoring".into(), Value::Object(scoring));

    let origin = cfg.report.polygon_origin.or_else(|| cfg.policy.regions.first().map(|r| r.center()));
    let locator = inputs.layers.first().map(|l| LayerLocator::new(l, origin)).transpose()?;
    let gps_polygon = match &locator {
        Some(loc) => period.clusters.par_iter().map(|c| loc.locate_index(c.position)).collect(),
        None => vec![None; period.clusters.len()],
    };
    let ctx = Context { cfg, inputs: &inputs, period: &period, scores, gps_polygon, locator };

    let mut out = Outputs::default();
    let mut skipped = Map::new();
    if cfg.wants(MetricKind::Quantiles) {
        quantiles(&ctx, &mut out, &mut summary)?;
    }
    if cfg.wants(MetricKind::Classes) {
        let table = tabulate_classes(&period.clusters);
        let rows = table
            .rows
            .iter()
            .map(|r| {
                vec![
                    r.class.to_string(),
                    r.clusters.to_string(),
                    r.bumps.to_string(),
                    fmt_g6(r.cluster_share),
                    fmt_g6(r.bump_share),
                ]
            })
            .collect();
        out.csv("classes.csv", &["class", "clusters", "bumps", "cluster_share", "bump_share"], rows)?;
    }
    if cfg.wants(MetricKind::TooClose) {
        too_close(&ctx, &mut out)?;
    }
    if cfg.wants(MetricKind::Compare) {
        compare(&ctx, &mut out)?;
    }
    let needs_aggs = [MetricKind::Subnets, MetricKind::Visits, MetricKind::Movement].iter().any(|m| cfg.wants(*m));
    let aggs = if needs_aggs {
        let errors: Vec<ErrorRecord> = ctx.scores.iter().flat_map(|s| s.records.iter().cloned()).collect();
        subnet_aggregate(&period.clusters, &period.fixed_selection(), &errors, &cfg.policy.regions, &cfg.scale)?
    } else {
        Vec::new()
    };
    if cfg.wants(MetricKind::Subnets) {
        subnets(&ctx, &aggs, &mut out, &mut summary)?;
    }
    if cfg.wants(MetricKind::Visits) {
        visits(&ctx, &aggs, &mut out)?;
    }
    if cfg.wants(MetricKind::Churn) {
        churn(&ctx, &mut out)?;
    }
    if cfg.wants(MetricKind::Movement) {
        match &cfg.inputs.clusters_period2 {
            Some(p2) => {
                let period2 = load_period(cfg, &inputs, p2)?;
                summary.insert("tally_period2".into(), tally_json(&period2.tally));
                movement(&ctx, &aggs, &period2, &mut out)?;
            }
            None => {
                skipped.insert("movement".into(), json!("no second-period cluster file"));
            }
        }
    }
    let polygon_metrics = [MetricKind::Modality, MetricKind::PolygonCorrelation, MetricKind::Attenuation];
    match &ctx.locator {
        Some(loc) => {
            if cfg.wants(MetricKind::Modality) {
                modality(&ctx, loc, &mut out)?;
            }
            if cfg.wants(MetricKind::PolygonCorrelation) {
                polygon_correlation(&ctx, loc.layer(), &mut out)?;
            }
            if cfg.wants(MetricKind::Attenuation) {
                attenuation(&ctx, loc, &mut out, &mut summary)?;
            }
        }
        None => {
            for m in polygon_metrics.into_iter().filter(|m| cfg.wants(*m)) {
                skipped.insert(m.to_string(), json!("no polygon layer"));
            }
        }
    }
    summary.insert("skipped".into(), Value::Object(skipped));
    Ok((out, summary))
}

fn versions() -> Value {
    let v = env!("CARGO_PKG_VERSION");
    Value::Object(MODULES.iter().map(|m| (m.to_string(), json!(v))).collect())
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn clear_previous(out_dir: &Path) -> Result<()> {
    let ecdf = out_dir.join("ecdf");
    if ecdf.is_dir() {
        for entry in std::fs::read_dir(&ecdf).map_err(|e| Error::io(&ecdf, e))? {
            let path = entry.map_err(|e| Error::io(&ecdf, e))?.path();
            if path.extension().map_or(false, |x| x == "csv") {
                std::fs::remove_file(&path).map_err(|e| Error::io(&path, e))?;
            }
        }
    }
    Ok(())
}

/// Runs the whole pipeline into `cfg.out`. While running, and after any
/// failure, the directory holds an `INCOMPLETE` marker.
pub fn run(cfg: &RunConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    let out_dir = cfg.out.clone();
    std::fs::create_dir_all(&out_dir).map_err(|e| Error::io(&out_dir, e))?;
    let marker = out_dir.join(INCOMPLETE_MARKER);
    write_file(&marker, b"run in progress\n")?;
    let result = (|| {
        clear_previous(&out_dir)?;
        let (outputs, mut summary) = compute(cfg)?;
        let mut files: Vec<PathBuf> = outputs.files.keys().cloned().collect();
        files.push(PathBuf::from("summary.json"));
        summary.insert("status".into(), json!("complete"));
        summary.insert("versions".into(), versions());
        summary.insert(
            "files".into(),
            json!(files.iter().map(|f| f.to_string_lossy().replace('\\', "/")).collect::<Vec<_>>()),
        );
        let summary = Value::Object(summary);
        for (rel, bytes) in &outputs.files {
            write_file(&out_dir.join(rel), bytes)?;
        }
        let text = serde_json::to_string_pretty(&summary).map_err(|e| Error::Data(e.to_string()))? + "\n";
        write_file(&out_dir.join("summary.json"), text.as_bytes())?;
        Ok(RunOutcome { out_dir: out_dir.clone(), files, summary })
    })();
    match result {
        Ok(o) => {
            std::fs::remove_file(&marker).map_err(|e| Error::io(&marker, e))?;
            Ok(o)
        }
        Err(e) => {
            let _ = std::fs::write(&marker, format!("run failed: {e}\n"));
            Err(e)
        }
    }
}

/// A rayon pool with `threads` workers, or all cores when `None`.
pub fn thread_pool(threads: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        b = b.num_threads(n.max(1));
    }
    b.build().map_err(|e| Error::Config(format!("thread pool: {e}")))
}

/// `run` on a dedicated pool of `threads` workers (all cores when `None`).
pub fn run_with_threads(cfg: &RunConfig, threads: Option<usize>) -> Result<RunOutcome> {
    thread_pool(threads)?.install(|| run(cfg))
}

/// Input validation without metric computation.
#[derive(Debug)]
pub struct CheckReport {
    pub tally: RejectionTally,
    pub tally_period2: Option<RejectionTally>,
    pub registry_records: usize,
    pub snapshot_entries: Vec<(Arc<str>, usize)>,
    pub polygons: usize,
    pub unknown_subnets: usize,
}

pub fn check(cfg: &RunConfig) -> Result<CheckReport> {
    let inputs = load_inputs(cfg)?;
    let period = load_period(cfg, &inputs, &cfg.inputs.clusters)?;
    for s in &inputs.snapshots {
        if let Some(c) = period.clusters.iter().find(|c| !s.window.covers(c.t_start)) {
            return Err(Error::Config(format!(
                "cluster dated {} is outside the {} snapshot window",
                c.t_start.date_naive(),
                s.provider
            )));
        }
    }
    let tally_period2 = match &cfg.inputs.clusters_period2 {
        Some(p) => Some(load_period(cfg, &inputs, p)?.tally),
        None => None,
    };
    Ok(CheckReport {
        tally: period.tally,
        tally_period2,
        registry_records: inputs.registry.len(),
        snapshot_entries: inputs.snapshots.iter().map(|s| (s.provider.clone(), s.table.len())).collect(),
        polygons: inputs.layers.iter().map(PolygonLayer::len).sum(),
        unknown_subnets: period.unknown_subnets,
    })
}

/// A run config pointing at a written synthetic dataset. Paths are stored
/// relative to `base` when they live under it, so the config can sit next to
/// the data.
pub fn config_for_dataset(
    paths: &crate::synthgen::DatasetPaths,
    ds: &crate::synthgen::Dataset,
    base: &Path,
    out: PathBuf,
) -> RunConfig {
    let rel = |p: &Path| p.strip_prefix(base).map(Path::to_path_buf).unwrap_or_else(|_| p.to_path_buf());
    let (from, to) = ds.date_window();
    let s = &ds.sidecar;
    let inputs = super::config::Inputs {
        clusters: rel(&paths.clusters),
        clusters_period2: None,
        registry: rel(&paths.registry),
        rules: Some(rel(&paths.rules)),
        nic: Some(rel(&paths.nic)),
        polygons: paths.tracts.iter().map(|p| rel(p)).collect(),
        geodb: paths
            .geodb
            .iter()
            .map(|(provider, p)| super::config::GeoDbInput {
                provider: provider.clone(),
                path: rel(p),
                snapshot_date: s.start_date,
                window_from: from,
                window_to: to,
            })
            .collect(),
    };
    RunConfig {
        out,
        seed: s.seed,
        utc_offset: s.utc_offset,
        metrics: Vec::new(),
        inputs,
        policy: crate::model::FilterPolicy { regions: s.regions.clone(), ..Default::default() },
        scale: Default::default(),
        report: Default::default(),
    }
}
