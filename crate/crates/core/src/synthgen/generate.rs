use std::collections::{BTreeMap, VecDeque};
use std::f64::consts::{PI, TAU};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::net::{IpAddr, Ipv4Addr};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Duration, NaiveDate, Utc};
use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{LogNormal, Normal};

use super::oracle::{DeviceTruth, EchoTruth, GroundTruthSidecar, IspTruth, ProviderTruth, SubnetTruth};
use super::{DbMode, IspProfile, ScaleDist, SynthConfig, TractGrid};
use crate::enrichment::{Cidr, DbEntry, Modality, PrefixTable, RegistryRecord, Rule, RuleTable};
use crate::error::{Error, Result};
use crate::geodesy::{Crs, GeoPoint, LocalProjection, PlanePoint, Polygon, PolygonLayer};
use crate::model::{write_clusters, ClusterClass, ClusterIp, LocationCluster};

const STREAM_SUBNETS: u64 = 1;
const STREAM_DEVICES: u64 = 2;
const STREAM_LEASES: u64 = 3;
const STREAM_CLUSTERS: u64 = 4;
const STREAM_ECHO: u64 = 5;
const STREAM_TRACTS: u64 = 6;
const STREAM_EXTRA: u64 = 7;
const STREAM_PROVIDER_BASE: u64 = 100;

/// First /24 handed out, and the exclusive upper bound of the allocation space.
const ALLOC_START: u32 = 0x1800_0000; // 24.0.0.0
const ALLOC_END: u32 = 0x6400_0000; // 100.0.0.0
const EXTRA_START: u32 = 0x8000_0000; // 128.0.0.0
const ACCURACY_BINS_KM: [f64; 9] = [1.0, 5.0, 10.0, 20.0, 50.0, 100.0, 200.0, 500.0, 1000.0];
const DAY_CLASSES: [ClusterClass; 4] = [
    ClusterClass::AreaDwell,
    ClusterClass::ShortAreaDwell,
    ClusterClass::PotentialAreaDwell,
    ClusterClass::Ping,
];

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn round6(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

fn rounded(p: GeoPoint) -> GeoPoint {
    GeoPoint::new(round6(p.lat), round6(p.lon))
}

fn accuracy_bin(km: f64) -> f64 {
    ACCURACY_BINS_KM.into_iter().find(|b| *b >= km).unwrap_or(1000.0)
}

fn uniform_in_disc(rng: &mut ChaCha8Rng, r: f64) -> PlanePoint {
    let rho = r * rng.gen::<f64>().sqrt();
    let th = rng.gen_range(0.0..TAU);
    PlanePoint::new(rho * th.cos(), rho * th.sin())
}

fn slug(s: &str) -> String {
    s.chars()
        .filter(|c| c.is_ascii_alphanumeric())
        .collect::<String>()
        .to_uppercase()
}

/// Everything `generate` produces, in memory.
#[derive(Debug)]
pub struct Dataset {
    pub clusters: Vec<LocationCluster>,
    /// One entry list per configured provider, in config order.
    pub snapshots: Vec<(String, Vec<(Cidr, DbEntry)>)>,
    pub registry: Vec<RegistryRecord>,
    pub nic: Vec<(Cidr, String)>,
    pub rules: RuleTable,
    pub tracts: Option<PolygonLayer>,
    pub sidecar: GroundTruthSidecar,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetPaths {
    pub clusters: PathBuf,
    pub geodb: Vec<(String, PathBuf)>,
    pub registry: PathBuf,
    pub nic: PathBuf,
    pub rules: PathBuf,
    pub tracts: Option<PathBuf>,
    pub sidecar: PathBuf,
}

struct SubnetState {
    truth: SubnetTruth,
    profile: usize,
    region: usize,
    /// Center in the region's projected frame.
    center_xy: PlanePoint,
    radius_m: f64,
    devices: Vec<usize>,
}

struct Layout {
    isps: Vec<IspTruth>,
    subnets: Vec<SubnetState>,
    projections: Vec<LocalProjection>,
}

fn draw_scale(rng: &mut ChaCha8Rng, dist: ScaleDist) -> Result<f64> {
    Ok(match dist {
        ScaleDist::LogNormal { median_m, sigma } => {
            let d = LogNormal::new(median_m.ln(), sigma).map_err(|e| Error::Config(e.to_string()))?;
            d.sample(rng)
        }
        ScaleDist::LogUniform { min_m, max_m } => (rng.gen::<f64>() * (max_m / min_m).ln()).exp() * min_m,
    })
}

fn build_layout(cfg: &SynthConfig) -> Result<Layout> {
    let mut rng = stream(cfg.seed, STREAM_SUBNETS);
    let projections = cfg
        .regions
        .iter()
        .map(|r| LocalProjection::new(r.center()))
        .collect::<Result<Vec<_>>>()?;
    let mut cursor: u32 = 0;
    let mut isps = Vec::new();
    let mut subnets = Vec::new();
    for (pi, prof) in cfg.profiles.iter().enumerate() {
        let size = prof.subnet_count.next_power_of_two() as u32;
        cursor = cursor.div_ceil(size) * size;
        let base = ALLOC_START as u64 + cursor as u64 * 256;
        if base + size as u64 * 256 > ALLOC_END as u64 {
            return Err(Error::Infeasible("synthetic address space exhausted".into()));
        }
        let block = Cidr::new(IpAddr::V4(Ipv4Addr::from(base as u32)), 24 - size.trailing_zeros() as u8)?;
        cursor += size;
        isps.push(IspTruth {
            dba_name: prof.dba_name.clone(),
            org_name: prof.org_name.clone(),
            modality: prof.modality,
            stickiness: prof.stickiness,
            block,
        });
        let n_ephemeral = if prof.modality == Modality::Fixed {
            (prof.ephemeral_share * prof.subnet_count as f64).round() as usize
        } else {
            0
        };
        for j in 0..prof.subnet_count {
            let region = subnets.len() % cfg.regions.len();
            let big_r = cfg.regions[region].radius_m;
            let network = Cidr::new(IpAddr::V4(Ipv4Addr::from(base as u32 + j as u32 * 256)), 24)?;
            let (center_xy, radius_m) = if prof.modality == Modality::Mobile {
                (PlanePoint::new(0.0, 0.0), 0.8 * big_r)
            } else {
                let s = draw_scale(&mut rng, prof.scale)?;
                let r = s / (0.9 * PI).sqrt();
                let mut placed = None;
                for _ in 0..1000 {
                    let c = if rng.gen::<f64>() < cfg.urban_weight {
                        let n = Normal::new(0.0, 0.1 * big_r).expect("positive sd");
                        PlanePoint::new(n.sample(&mut rng), n.sample(&mut rng))
                    } else {
                        uniform_in_disc(&mut rng, 0.6 * big_r)
                    };
                    if c.x.hypot(c.y) + r <= 0.95 * big_r {
                        placed = Some(c);
                        break;
                    }
                }
                let c = placed.ok_or_else(|| {
                    Error::Infeasible(format!("subnet radius {r:.0} m does not fit region {}", cfg.regions[region].name))
                })?;
                (c, r)
            };
            let center = rounded(projections[region].unproject(center_xy)?);
            subnets.push(SubnetState {
                truth: SubnetTruth {
                    network,
                    isp: prof.dba_name.clone(),
                    region: cfg.regions[region].name.clone(),
                    center,
                    radius_m,
                    scale_f90_m: (0.9 * PI).sqrt() * radius_m,
                    ephemeral: j < n_ephemeral,
                },
                profile: pi,
                region,
                center_xy,
                radius_m,
                devices: Vec::new(),
            });
        }
    }
    Ok(Layout { isps, subnets, projections })
}

fn capacity(prof: &IspProfile) -> usize {
    if prof.stickiness >= 1.0 {
        254
    } else {
        230
    }
}

fn weighted(profiles: &[IspProfile], modality: Modality) -> Option<(Vec<usize>, WeightedIndex<f64>)> {
    let idx: Vec<usize> = (0..profiles.len()).filter(|i| profiles[*i].modality == modality).collect();
    let w: Vec<f64> = idx.iter().map(|i| profiles[*i].market_share).collect();
    WeightedIndex::new(&w).ok().map(|d| (idx, d))
}

fn place_devices(cfg: &SynthConfig, layout: &mut Layout) -> Result<Vec<DeviceTruth>> {
    let mut rng = stream(cfg.seed, STREAM_DEVICES);
    let (fixed_idx, fixed_w) = weighted(&cfg.profiles, Modality::Fixed)
        .ok_or_else(|| Error::Config("fixed-line market shares sum to zero".into()))?;
    let mobile = weighted(&cfg.profiles, Modality::Mobile);
    let mut by_profile: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, s) in layout.subnets.iter().enumerate() {
        by_profile.entry(s.profile).or_default().push(i);
    }
    let mut devices = Vec::with_capacity(cfg.n_devices);
    for k in 0..cfg.n_devices {
        let p = fixed_idx[fixed_w.sample(&mut rng)];
        let pool = &by_profile[&p];
        let start = rng.gen_range(0..pool.len());
        let cap = capacity(&cfg.profiles[p]);
        let si = (0..pool.len())
            .map(|o| pool[(start + o) % pool.len()])
            .find(|&si| layout.subnets[si].devices.len() < cap)
            .ok_or_else(|| {
                Error::Infeasible(format!(
                    "{} has more devices than its {} subnets can address",
                    cfg.profiles[p].dba_name,
                    pool.len()
                ))
            })?;
        let s = &mut layout.subnets[si];
        s.devices.push(k);
        let off = uniform_in_disc(&mut rng, s.radius_m);
        let home_xy = PlanePoint::new(s.center_xy.x + off.x, s.center_xy.y + off.y);
        let home = rounded(layout.projections[s.region].unproject(home_xy)?);
        let mobile_isp = mobile
            .as_ref()
            .map(|(idx, w)| cfg.profiles[idx[w.sample(&mut rng)]].dba_name.clone());
        devices.push(DeviceTruth {
            device_id: format!("dev{k:07}"),
            isp: cfg.profiles[p].dba_name.clone(),
            subnet: s.truth.network,
            home,
            mobile_isp,
        });
    }
    Ok(devices)
}

/// Host octet per device per night.
fn simulate_leases(cfg: &SynthConfig, layout: &Layout) -> Vec<Vec<u8>> {
    let mut rng = stream(cfg.seed, STREAM_LEASES);
    let mut hosts = vec![Vec::new(); cfg.n_devices];
    for s in &layout.subnets {
        if s.devices.is_empty() {
            continue;
        }
        if s.truth.ephemeral {
            for &d in &s.devices {
                hosts[d] = (0..cfg.n_nights).map(|_| rng.gen_range(1..=254u8)).collect();
            }
            continue;
        }
        let p = cfg.profiles[s.profile].stickiness;
        let mut free: Vec<u8> = (1..=254).collect();
        free.shuffle(&mut rng);
        let mut free: VecDeque<u8> = free.into();
        let mut current: Vec<u8> = s.devices.iter().map(|_| free.pop_front().expect("capacity checked")).collect();
        for night in 0..cfg.n_nights {
            for (slot, &d) in s.devices.iter().enumerate() {
                if night > 0 && rng.gen::<f64>() >= p {
                    // least recently released address first, as DHCP pools do
                    free.push_back(current[slot]);
                    current[slot] = free.pop_front().expect("queue never empties");
                }
                hosts[d].push(current[slot]);
            }
        }
    }
    hosts
}

fn host_ip(network: Cidr, host: u8) -> IpAddr {
    match network.addr() {
        IpAddr::V4(v4) => IpAddr::V4(Ipv4Addr::from(u32::from(v4) | host as u32)),
        v6 => v6,
    }
}

fn build_snapshots(
    cfg: &SynthConfig,
    layout: &Layout,
    devices: &[DeviceTruth],
    hosts: &[Vec<u8>],
) -> Result<Vec<(String, Vec<(Cidr, DbEntry)>)>> {
    let mut extra_rng = stream(cfg.seed, STREAM_EXTRA);
    let mut extra = Vec::with_capacity(cfg.extra_prefixes);
    for i in 0..cfg.extra_prefixes {
        let region = i % cfg.regions.len();
        let xy = uniform_in_disc(&mut extra_rng, 0.8 * cfg.regions[region].radius_m);
        let point = rounded(layout.projections[region].unproject(xy)?);
        let net = Cidr::new(IpAddr::V4(Ipv4Addr::from(EXTRA_START + i as u32 * 256)), 24)?;
        extra.push((net, DbEntry { point, accuracy_km: Some(100.0) }));
    }

    let mut out = Vec::new();
    for (pi, model) in cfg.providers.iter().enumerate() {
        let mut rng = stream(cfg.seed, STREAM_PROVIDER_BASE + pi as u64);
        let mut entries: Vec<(Cidr, DbEntry)> = Vec::new();
        for s in &layout.subnets {
            let centroid = DbEntry {
                point: s.truth.center,
                accuracy_km: Some(accuracy_bin(s.radius_m / 1000.0)),
            };
            let entry = match model.mode {
                DbMode::DefaultLocation { lat, lon, share } if rng.gen::<f64>() < share => {
                    DbEntry { point: rounded(GeoPoint::new(lat, lon)), accuracy_km: Some(1000.0) }
                }
                _ => centroid,
            };
            entries.push((s.truth.network, entry));
            let per_address = matches!(
                model.mode,
                DbMode::Perfect | DbMode::OffsetGaussian { .. } | DbMode::UniformRegion
            );
            if !per_address || s.truth.ephemeral || cfg.n_nights == 0 {
                continue;
            }
            for &d in &s.devices {
                let home = devices[d].home;
                let (point, acc) = match model.mode {
                    DbMode::Perfect => (home, 1.0),
                    DbMode::OffsetGaussian { sigma_m } => {
                        let n = Normal::new(0.0, sigma_m).map_err(|e| Error::Config(e.to_string()))?;
                        let off = PlanePoint::new(n.sample(&mut rng), n.sample(&mut rng));
                        (LocalProjection::new(home)?.unproject(off)?, accuracy_bin(3.0 * sigma_m / 1000.0))
                    }
                    DbMode::UniformRegion => {
                        let xy = uniform_in_disc(&mut rng, 0.8 * cfg.regions[s.region].radius_m);
                        (layout.projections[s.region].unproject(xy)?, 100.0)
                    }
                    _ => unreachable!(),
                };
                let net = Cidr::new(host_ip(s.truth.network, hosts[d][0]), 32)?;
                entries.push((net, DbEntry { point: rounded(point), accuracy_km: Some(acc) }));
            }
        }
        entries.extend(extra.iter().copied());
        out.push((model.provider.clone(), entries));
    }
    Ok(out)
}

fn local_midnight(cfg: &SynthConfig, night: usize) -> DateTime<Utc> {
    let date = cfg.start_date + Duration::days(night as i64);
    date.and_hms_opt(0, 0, 0).expect("midnight").and_utc() - Duration::seconds(cfg.utc_offset.seconds() as i64)
}

fn build_clusters(
    cfg: &SynthConfig,
    layout: &Layout,
    devices: &[DeviceTruth],
    hosts: &[Vec<u8>],
) -> Result<Vec<LocationCluster>> {
    let mut rng = stream(cfg.seed, STREAM_CLUSTERS);
    let jitter = if cfg.gps_jitter_m > 0.0 { Normal::new(0.0, cfg.gps_jitter_m).ok() } else { None };
    let pools: BTreeMap<&str, Vec<Cidr>> = layout
        .subnets
        .iter()
        .filter(|s| cfg.profiles[s.profile].modality == Modality::Mobile)
        .fold(BTreeMap::new(), |mut m, s| {
            m.entry(cfg.profiles[s.profile].dba_name.as_str()).or_insert_with(Vec::new).push(s.truth.network);
            m
        });
    let subnet_of: BTreeMap<Cidr, usize> =
        layout.subnets.iter().enumerate().map(|(i, s)| (s.truth.network, i)).collect();
    let mut out = Vec::new();
    for (d, dev) in devices.iter().enumerate() {
        let s = &layout.subnets[subnet_of[&dev.subnet]];
        for night in 0..cfg.n_nights {
            let t0 = local_midnight(cfg, night) + Duration::seconds(rng.gen_range(0..3600));
            let t1 = t0 + Duration::seconds(rng.gen_range(3 * 3600..=5 * 3600));
            let position = match &jitter {
                Some(n) => {
                    let off = PlanePoint::new(n.sample(&mut rng), n.sample(&mut rng));
                    rounded(LocalProjection::new(dev.home)?.unproject(off)?)
                }
                None => dev.home,
            };
            out.push(LocationCluster {
                device_id: dev.device_id.clone(),
                t_start: t0,
                t_end: t1,
                position,
                accuracy_m: (rng.gen_range(3.0..30.0f64) * 10.0).round() / 10.0,
                coord_decimals: 6,
                class: ClusterClass::LongAreaDwell,
                ip: ClusterIp::full(host_ip(s.truth.network, hosts[d][night])),
                bump_count: rng.gen_range(1..=20),
            });
            let pool = match dev.mobile_isp.as_deref().and_then(|m| pools.get(m)) {
                Some(p) => p,
                None => continue,
            };
            let mut k = cfg.day_rate.floor() as usize;
            if rng.gen::<f64>() < cfg.day_rate.fract() {
                k += 1;
            }
            for _ in 0..k {
                let t0 = local_midnight(cfg, night) + Duration::seconds(rng.gen_range(10 * 3600..16 * 3600));
                let t1 = t0 + Duration::seconds(rng.gen_range(1800..=7200));
                let xy = uniform_in_disc(&mut rng, 0.8 * cfg.regions[s.region].radius_m);
                let class = if rng.gen::<f64>() < cfg.travel_share {
                    ClusterClass::Travel
                } else {
                    DAY_CLASSES[rng.gen_range(0..DAY_CLASSES.len())]
                };
                let net = pool[rng.gen_range(0..pool.len())];
                out.push(LocationCluster {
                    device_id: dev.device_id.clone(),
                    t_start: t0,
                    t_end: t1,
                    position: rounded(layout.projections[s.region].unproject(xy)?),
                    accuracy_m: (rng.gen_range(5.0..50.0f64) * 10.0).round() / 10.0,
                    coord_decimals: 6,
                    class,
                    ip: ClusterIp::full(host_ip(net, rng.gen_range(1..=254))),
                    bump_count: rng.gen_range(1..=10),
                });
            }
        }
    }
    Ok(out)
}

fn plant_echoes(
    cfg: &SynthConfig,
    clusters: &mut [LocationCluster],
    snapshots: &[(String, Vec<(Cidr, DbEntry)>)],
) -> Result<Vec<EchoTruth>> {
    let mut tables = Vec::new();
    for (model, (name, entries)) in cfg.providers.iter().zip(snapshots) {
        if model.echo_share > 0.0 {
            tables.push((model.echo_share, name.clone(), PrefixTable::build(entries.iter().copied())?));
        }
    }
    let mut echoes = Vec::new();
    if tables.is_empty() {
        return Ok(echoes);
    }
    let mut rng = stream(cfg.seed, STREAM_ECHO);
    for (row, c) in clusters.iter_mut().enumerate() {
        for (share, name, table) in &tables {
            if rng.gen::<f64>() < *share {
                if let Some((_, e)) = table.lookup(c.ip.addr) {
                    c.position = e.point;
                    echoes.push(EchoTruth { row, provider: name.clone() });
                }
                break;
            }
        }
    }
    Ok(echoes)
}

fn build_registry(cfg: &SynthConfig, layout: &Layout) -> Vec<RegistryRecord> {
    let mut out = Vec::new();
    for (pi, isp) in layout.isps.iter().enumerate() {
        let handle = format!("NET-{}-{pi}", slug(&isp.dba_name));
        out.push(RegistryRecord {
            cidr: isp.block,
            net_handle: handle.clone(),
            parent_handle: None,
            org_name: isp.org_name.clone(),
        });
        if isp.modality != Modality::Fixed {
            continue;
        }
        let children = layout.subnets.iter().filter(|s| s.profile == pi).take(cfg.registry_children);
        for (j, s) in children.enumerate() {
            out.push(RegistryRecord {
                cidr: Cidr::new(s.truth.network.addr(), 28).expect("valid /28"),
                net_handle: format!("{handle}-C{j}"),
                parent_handle: Some(handle.clone()),
                org_name: format!("Customer {j} Holdings LLC"),
            });
        }
    }
    out
}

fn build_tracts(cfg: &SynthConfig, grid: TractGrid, devices: &[DeviceTruth]) -> Result<PolygonLayer> {
    let mut rng = stream(cfg.seed, STREAM_TRACTS);
    let noise = Normal::new(0.0, 0.15).expect("positive sd");
    let mut polygons = Vec::new();
    for region in &cfg.regions {
        let c = region.center();
        let dlat = region.radius_m / 111_320.0;
        let dlon = region.radius_m / (111_320.0 * c.lat.to_radians().cos());
        let (lat0, lon0) = (c.lat - dlat, c.lon - dlon);
        let (h, w) = (2.0 * dlat / grid.rows as f64, 2.0 * dlon / grid.cols as f64);
        let mut cells = Vec::new();
        for r in 0..grid.rows {
            for k in 0..grid.cols {
                let (y0, x0) = (round6(lat0 + r as f64 * h), round6(lon0 + k as f64 * w));
                let (y1, x1) = (round6(lat0 + (r + 1) as f64 * h), round6(lon0 + (k + 1) as f64 * w));
                let ring = vec![
                    PlanePoint::new(x0, y0),
                    PlanePoint::new(x1, y0),
                    PlanePoint::new(x1, y1),
                    PlanePoint::new(x0, y1),
                    PlanePoint::new(x0, y0),
                ];
                let homes = devices
                    .iter()
                    .filter(|d| d.home.lat >= y0 && d.home.lat < y1 && d.home.lon >= x0 && d.home.lon < x1)
                    .count();
                let area_km2 = (h * 111.32) * (w * 111.32 * ((y0 + y1) / 2.0).to_radians().cos());
                let mid = GeoPoint::new((y0 + y1) / 2.0, (x0 + x1) / 2.0);
                let dist = crate::geodesy::vincenty_distance(c, mid).unwrap_or(region.radius_m);
                let log_mhi = 10.2 + 1.2 * (dist / region.radius_m) + noise.sample(&mut rng);
                cells.push((format!("{}-{r:03}-{k:03}", region.name), ring, homes as f64 / area_km2, log_mhi));
            }
        }
        let mut dens: Vec<f64> = cells.iter().map(|c| c.2).collect();
        dens.sort_by(f64::total_cmp);
        let median = dens[dens.len() / 2];
        for (id, ring, density, log_mhi) in cells {
            let mut attrs = BTreeMap::new();
            attrs.insert("density".to_string(), format!("{density:.4}"));
            attrs.insert("log_mhi".to_string(), format!("{log_mhi:.4}"));
            let class = if density > median { "urban" } else { "suburban" };
            attrs.insert("class".to_string(), class.to_string());
            polygons.push(Polygon::new(id, attrs, vec![ring])?);
        }
    }
    PolygonLayer::new(Crs::Geo, polygons)
}

/// Builds a complete synthetic world. Deterministic for a given config.
pub fn generate(cfg: &SynthConfig) -> Result<Dataset> {
    cfg.validate()?;
    let mut layout = build_layout(cfg)?;
    let devices = place_devices(cfg, &mut layout)?;
    let hosts = simulate_leases(cfg, &layout);
    let snapshots = build_snapshots(cfg, &layout, &devices, &hosts)?;
    let mut clusters = build_clusters(cfg, &layout, &devices, &hosts)?;
    let echoes = plant_echoes(cfg, &mut clusters, &snapshots)?;
    let registry = build_registry(cfg, &layout);
    let nic = layout.isps.iter().map(|i| (i.block, "ARIN".to_string())).collect();
    let mut rules = RuleTable {
        rules: cfg
            .profiles
            .iter()
            .map(|p| Rule::new(&p.org_name, &p.dba_name, p.modality, p.category))
            .collect(),
    };
    rules.rules.extend(RuleTable::default().rules);
    let tracts = cfg.tracts.map(|g| build_tracts(cfg, g, &devices)).transpose()?;
    let sidecar = GroundTruthSidecar {
        seed: cfg.seed,
        start_date: cfg.start_date,
        n_nights: cfg.n_nights,
        utc_offset: cfg.utc_offset,
        regions: cfg.regions.clone(),
        isps: layout.isps,
        subnets: layout.subnets.into_iter().map(|s| s.truth).collect(),
        devices,
        providers: cfg
            .providers
            .iter()
            .map(|m| ProviderTruth { provider: m.provider.clone(), mode: m.mode, echo_share: m.echo_share })
            .collect(),
        echoes,
        total_clusters: clusters.len(),
    };
    Ok(Dataset { clusters, snapshots, registry, nic, rules, tracts, sidecar })
}

impl Dataset {
    /// Inclusive UTC date range covering every generated cluster.
    pub fn date_window(&self) -> (NaiveDate, NaiveDate) {
        let s = &self.sidecar;
        (s.start_date - Duration::days(1), s.start_date + Duration::days(s.n_nights as i64 + 1))
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?))
}

fn csv_done<W: Write>(w: csv::Writer<W>, path: &Path) -> Result<()> {
    w.into_inner()
        .map_err(|e| Error::io(path, e.into_error()))?
        .flush()
        .map_err(|e| Error::io(path, e))
}

/// Writes the dataset as input files under `dir`.
pub fn write_dataset(ds: &Dataset, dir: &Path) -> Result<DatasetPaths> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let clusters = dir.join("clusters.csv");
    {
        let mut f = create(&clusters)?;
        write_clusters(&mut f, &ds.clusters)?;
        f.flush().map_err(|e| Error::io(&clusters, e))?;
    }
    let mut geodb = Vec::new();
    for (provider, entries) in &ds.snapshots {
        let path = dir.join(format!("geodb_{provider}.csv"));
        let mut w = csv::Writer::from_writer(create(&path)?);
        w.write_record(["network", "latitude", "longitude", "accuracy_km"])?;
        for (net, e) in entries {
            w.write_record([
                net.to_string(),
                format!("{:.6}", e.point.lat),
                format!("{:.6}", e.point.lon),
                e.accuracy_km.map(|a| a.to_string()).unwrap_or_default(),
            ])?;
        }
        csv_done(w, &path)?;
        geodb.push((provider.clone(), path));
    }
    let registry = dir.join("registry.csv");
    {
        let mut w = csv::Writer::from_writer(create(&registry)?);
        w.write_record(["cidr", "net_handle", "parent_handle", "org_name"])?;
        for r in &ds.registry {
            w.write_record([
                r.cidr.to_string(),
                r.net_handle.clone(),
                r.parent_handle.clone().unwrap_or_default(),
                r.org_name.clone(),
            ])?;
        }
        csv_done(w, &registry)?;
    }
    let nic = dir.join("nic.csv");
    {
        let mut w = csv::Writer::from_writer(create(&nic)?);
        w.write_record(["cidr", "registry"])?;
        for (c, r) in &ds.nic {
            w.write_record([c.to_string(), r.clone()])?;
        }
        csv_done(w, &nic)?;
    }
    let rules = dir.join("rules.csv");
    {
        let mut f = create(&rules)?;
        ds.rules.write(&mut f)?;
        f.flush().map_err(|e| Error::io(&rules, e))?;
    }
    let tracts = match &ds.tracts {
        Some(layer) => {
            let path = dir.join("tracts.txt");
            std::fs::write(&path, layer.to_text()).map_err(|e| Error::io(&path, e))?;
            Some(path)
        }
        None => None,
    };
    let sidecar = dir.join("sidecar.json");
    let json = serde_json::to_string_pretty(&ds.sidecar).map_err(|e| Error::Data(e.to_string()))?;
    std::fs::write(&sidecar, json + "\n").map_err(|e| Error::io(&sidecar, e))?;
    Ok(DatasetPaths { clusters, geodb, registry, nic, rules, tracts, sidecar })
}
