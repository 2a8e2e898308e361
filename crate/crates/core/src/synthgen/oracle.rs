//! Ground truth written next to a synthetic dataset, and the metric values
//! it implies.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::DbMode;
use crate::enrichment::{Cidr, Modality};
use crate::geodesy::GeoPoint;
use crate::metrics::DEFAULT_QUANTILES;
use crate::model::{CityRegion, UtcOffset};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IspTruth {
    pub dba_name: String,
    pub org_name: String,
    pub modality: Modality,
    pub stickiness: f64,
    pub block: Cidr,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubnetTruth {
    pub network: Cidr,
    pub isp: String,
    pub region: String,
    pub center: GeoPoint,
    /// Radius of the uniform disc homes are drawn from.
    pub radius_m: f64,
    /// Hull scale of the nearest 90% of an infinitely dense disc.
    pub scale_f90_m: f64,
    pub ephemeral: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceTruth {
    pub device_id: String,
    pub isp: String,
    pub subnet: Cidr,
    pub home: GeoPoint,
    pub mobile_isp: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderTruth {
    pub provider: String,
    pub mode: DbMode,
    pub echo_share: f64,
}

/// A cluster (by row in the cluster file) whose position was replaced by a
/// provider's prediction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EchoTruth {
    pub row: usize,
    pub provider: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthSidecar {
    pub seed: u64,
    pub start_date: NaiveDate,
    pub n_nights: usize,
    pub utc_offset: UtcOffset,
    pub regions: Vec<CityRegion>,
    pub isps: Vec<IspTruth>,
    pub subnets: Vec<SubnetTruth>,
    pub devices: Vec<DeviceTruth>,
    pub providers: Vec<ProviderTruth>,
    pub echoes: Vec<EchoTruth>,
    pub total_clusters: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleReport {
    /// Per fixed ISP, expected same-address share for d = 0..=d_max.
    pub churn: BTreeMap<String, Vec<f64>>,
    /// Per Gaussian-offset provider, (q, expected error in meters).
    pub error_quantiles: BTreeMap<String, Vec<(f64, f64)>>,
    /// Per provider, planted echo share (a floor on the too-close share).
    pub too_close_share: BTreeMap<String, f64>,
    /// Per subnet, (f, expected hull scale) for a uniform disc.
    pub subnet_scales: BTreeMap<Cidr, Vec<(f64, f64)>>,
    /// Truth is static, so medioids do not move.
    pub movement_m: f64,
}

/// Quantile of the distance from the origin of an isotropic 2-D Gaussian.
pub fn rayleigh_quantile(sigma: f64, q: f64) -> f64 {
    sigma * (-2.0 * (1.0 - q).ln()).sqrt()
}

/// Closed-form expectations implied by the sidecar.
pub fn expected_metrics(sidecar: &GroundTruthSidecar, d_max: usize, fractions: &[f64]) -> OracleReport {
    let churn = sidecar
        .isps
        .iter()
        .filter(|i| i.modality == Modality::Fixed)
        .map(|i| (i.dba_name.clone(), (0..=d_max).map(|d| i.stickiness.powi(d as i32)).collect()))
        .collect();
    let error_quantiles = sidecar
        .providers
        .iter()
        .filter_map(|p| match p.mode {
            DbMode::OffsetGaussian { sigma_m } => Some((
                p.provider.clone(),
                DEFAULT_QUANTILES.iter().map(|q| (*q, rayleigh_quantile(sigma_m, *q))).collect(),
            )),
            DbMode::Perfect => Some((p.provider.clone(), DEFAULT_QUANTILES.iter().map(|q| (*q, 0.0)).collect())),
            _ => None,
        })
        .collect();
    let too_close_share = sidecar.providers.iter().map(|p| (p.provider.clone(), p.echo_share)).collect();
    let subnet_scales = sidecar
        .subnets
        .iter()
        .map(|s| {
            let v = fractions
                .iter()
                .map(|f| (*f, (std::f64::consts::PI * f).sqrt() * s.radius_m))
                .collect();
            (s.network, v)
        })
        .collect();
    OracleReport { churn, error_quantiles, too_close_share, subnet_scales, movement_m: 0.0 }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_forms() {
        assert!((rayleigh_quantile(1000.0, 0.5) - 1177.41).abs() < 0.01);
        assert!((0.99f64.powi(30) - 0.7397).abs() < 1e-4);
    }
}
