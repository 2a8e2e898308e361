//! Polygon-level estimators: access-modality shares, attribute
//! correlation, and attenuation of imputed attributes.

use serde::Serialize;

use super::stats::{ols, pearson, quantile_sorted, Correlation, OlsFit};
use crate::enrichment::Modality;
use crate::error::{Error, Result};
use crate::geodesy::{Crs, GeoPoint, LocalProjection, Polygon, PolygonLayer};

/// Finds the polygon containing a geographic point, projecting first when
/// the layer is in planar coordinates.
#[derive(Debug)]
pub struct LayerLocator<'a> {
    layer: &'a PolygonLayer,
    projection: Option<LocalProjection>,
}

impl<'a> LayerLocator<'a> {
    /// `origin` is required for planar layers and ignored for geographic ones.
    pub fn new(layer: &'a PolygonLayer, origin: Option<GeoPoint>) -> Result<Self> {
        let projection = match layer.crs {
            Crs::Geo => None,
            Crs::Plane => Some(LocalProjection::new(origin.ok_or_else(|| {
                Error::Config("planar polygon layer needs a projection origin".into())
            })?)?),
        };
        Ok(LayerLocator { layer, projection })
    }

    pub fn layer(&self) -> &'a PolygonLayer {
        self.layer
    }

    pub fn locate_index(&self, p: GeoPoint) -> Option<usize> {
        let key = match &self.projection {
            None => PolygonLayer::geo_key(p),
            Some(proj) => proj.project(p).ok()?,
        };
        self.layer.polygons().iter().position(|poly| poly.contains(key))
    }

    pub fn locate(&self, p: GeoPoint) -> Option<&'a Polygon> {
        self.locate_index(p).map(|i| &self.layer.polygons()[i])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModalityRow {
    pub polygon_id: String,
    pub mobile: u64,
    pub fixed: u64,
    /// `None` when no classified cluster fell in the polygon.
    pub share: Option<f64>,
}

/// Mobile share of classified points per polygon, one row per polygon in
/// id order. Points outside the layer are ignored.
pub fn modality_share(
    points: impl IntoIterator<Item = (GeoPoint, Modality)>,
    locator: &LayerLocator<'_>,
) -> Vec<ModalityRow> {
    let polys = locator.layer().polygons();
    let mut counts = vec![(0u64, 0u64); polys.len()];
    for (p, m) in points {
        if let Some(i) = locator.locate_index(p) {
            match m {
                Modality::Mobile => counts[i].0 += 1,
                Modality::Fixed => counts[i].1 += 1,
            }
        }
    }
    polys
        .iter()
        .zip(counts)
        .map(|(poly, (mobile, fixed))| ModalityRow {
            polygon_id: poly.id.clone(),
            mobile,
            fixed,
            share: (mobile + fixed > 0).then(|| mobile as f64 / (mobile + fixed) as f64),
        })
        .collect()
}

/// Weighted Pearson correlation of two per-polygon attributes over the
/// polygons where both (and the weight, if any) are present.
pub fn attribute_correlation(a: &[Option<f64>], b: &[Option<f64>], weights: Option<&[f64]>) -> Correlation {
    let (mut x, mut y, mut w) = (Vec::new(), Vec::new(), Vec::new());
    for i in 0..a.len() {
        if let (Some(p), Some(q)) = (a[i], b[i]) {
            x.push(p);
            y.push(q);
            w.push(weights.map_or(1.0, |w| w[i]));
        }
    }
    pearson(&x, &y, weights.map(|_| w.as_slice()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecileRow {
    pub decile: usize,
    pub n: usize,
    pub y_true_mean: f64,
    /// y_imp quantiles at the report's levels.
    pub y_imp_quantiles: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttenuationReport {
    pub levels: Vec<f64>,
    pub deciles: Vec<DecileRow>,
    pub fit: Option<OlsFit>,
    /// Records without both a true and an imputed value.
    pub excluded: usize,
}

/// Groups records into deciles of the true attribute (by rank, ties broken
/// by input order) and summarizes the imputed attribute within each, then
/// fits y_imp on y_true.
pub fn attenuation_analysis(pairs: &[(Option<f64>, Option<f64>)], levels: &[f64]) -> AttenuationReport {
    let mut kept: Vec<(f64, f64)> = pairs.iter().filter_map(|(t, i)| Some(((*t)?, (*i)?))).collect();
    let excluded = pairs.len() - kept.len();
    let fit = {
        let (x, y): (Vec<f64>, Vec<f64>) = kept.iter().copied().unzip();
        ols(&x, &y)
    };
    kept.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n = kept.len();
    let mut deciles = Vec::new();
    for d in 0..10 {
        let (s, e) = (d * n / 10, (d + 1) * n / 10);
        if s == e {
            continue;
        }
        let slice = &kept[s..e];
        let mut imp: Vec<f64> = slice.iter().map(|p| p.1).collect();
        imp.sort_by(f64::total_cmp);
        deciles.push(DecileRow {
            decile: d + 1,
            n: slice.len(),
            y_true_mean: slice.iter().map(|p| p.0).sum::<f64>() / slice.len() as f64,
            y_imp_quantiles: levels.iter().map(|q| quantile_sorted(&imp, *q)).collect(),
        });
    }
    AttenuationReport { levels: levels.to_vec(), deciles, fit, excluded }
}
