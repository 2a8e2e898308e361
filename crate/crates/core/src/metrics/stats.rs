//! Small numeric kernels shared by the estimators.

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

/// Type-7 quantile (linear interpolation between order statistics) of an
/// ascending, non-empty slice.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty sample");
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    if lo + 1 >= sorted.len() {
        return sorted[sorted.len() - 1];
    }
    sorted[lo] + (h - lo as f64) * (sorted[lo + 1] - sorted[lo])
}

pub fn mean(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        None
    } else {
        Some(xs.iter().sum::<f64>() / xs.len() as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Correlation {
    pub n: usize,
    /// `None` when fewer than three pairs or either side has zero variance.
    pub r: Option<f64>,
    /// Two-sided, from Student's t with n - 2 degrees of freedom.
    pub p_value: Option<f64>,
}

/// Weighted Pearson correlation. Unit weights give the textbook two-pass
/// estimator.
pub fn pearson(x: &[f64], y: &[f64], w: Option<&[f64]>) -> Correlation {
    assert_eq!(x.len(), y.len());
    let n = x.len();
    let weight = |i: usize| w.map_or(1.0, |w| w[i]);
    let undefined = Correlation { n, r: None, p_value: None };
    if n < 3 {
        return undefined;
    }
    let total: f64 = (0..n).map(weight).sum();
    if total <= 0.0 {
        return undefined;
    }
    let mx = (0..n).map(|i| weight(i) * x[i]).sum::<f64>() / total;
    let my = (0..n).map(|i| weight(i) * y[i]).sum::<f64>() / total;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let (dx, dy) = (x[i] - mx, y[i] - my);
        sxy += weight(i) * dx * dy;
        sxx += weight(i) * dx * dx;
        syy += weight(i) * dy * dy;
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return undefined;
    }
    let r = (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0);
    Correlation { n, r: Some(r), p_value: Some(t_test_p(r, n)) }
}

fn t_test_p(r: f64, n: usize) -> f64 {
    let df = (n - 2) as f64;
    if r.abs() >= 1.0 {
        return 0.0;
    }
    let t = r * (df / (1.0 - r * r)).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).expect("df > 0");
    (2.0 * (1.0 - dist.cdf(t.abs()))).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OlsFit {
    pub slope: f64,
    pub intercept: f64,
    pub n: usize,
}

/// Least-squares fit of y on x; `None` when x has no spread.
pub fn ols(x: &[f64], y: &[f64]) -> Option<OlsFit> {
    assert_eq!(x.len(), y.len());
    let n = x.len();
    let (mx, my) = (mean(x)?, mean(y)?);
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for i in 0..n {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    if sxx <= 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    Some(OlsFit { slope, intercept: my - slope * mx, n })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn odd_median() {
        assert_eq!(quantile_sorted(&[1.0, 2.0, 3.0, 4.0, 5.0], 0.5), 3.0);
        assert_eq!(quantile_sorted(&[7.0], 0.1), 7.0);
        assert_eq!(quantile_sorted(&[1.0, 2.0], 0.25), 1.25);
    }

    #[test]
    fn perfect_and_anti_correlation() {
        let a: Vec<f64> = (0..10).map(|i| i as f64 * 1.5).collect();
        let b: Vec<f64> = a.iter().map(|v| -v).collect();
        let two: Vec<f64> = a.iter().map(|v| 2.0 * v).collect();
        assert_eq!(pearson(&a, &b, None).r, Some(-1.0));
        assert_eq!(pearson(&a, &two, None).r, Some(1.0));
        assert_eq!(pearson(&a, &b, None).p_value, Some(0.0));
        assert_eq!(pearson(&a, &vec![1.0; 10], None).r, None);
    }

    #[test]
    fn ten_points_match_textbook_formula() {
        let x = [2.1, 3.4, 1.9, 5.6, 4.4, 3.3, 2.8, 6.1, 4.0, 3.7];
        let y = [1.0, 2.2, 1.4, 4.1, 2.9, 2.0, 2.6, 3.8, 3.1, 1.9];
        // sum-of-products form, computed independently of the two-pass code
        let n = 10.0;
        let sx: f64 = x.iter().sum();
        let sy: f64 = y.iter().sum();
        let sxy: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
        let sxx: f64 = x.iter().map(|a| a * a).sum();
        let syy: f64 = y.iter().map(|b| b * b).sum();
        let r = (n * sxy - sx * sy) / ((n * sxx - sx * sx).sqrt() * (n * syy - sy * sy).sqrt());
        let got = pearson(&x, &y, None);
        assert!((got.r.unwrap() - r).abs() < 1e-12);
        // p-value for this r with 8 degrees of freedom, cross-checked by the
        // symmetric t tail identity P(|T|>t) = I_{df/(df+t^2)}(df/2, 1/2)
        let t = r * (8.0 / (1.0 - r * r)).sqrt();
        let p = statrs::function::beta::beta_reg(4.0, 0.5, 8.0 / (8.0 + t * t));
        assert!((got.p_value.unwrap() - p).abs() < 1e-9);
    }

    #[test]
    fn integer_weights_equal_replication() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y = [2.0, 1.0, 4.0, 3.0];
        let w = [1.0, 3.0, 1.0, 2.0];
        let (mut rx, mut ry) = (vec![], vec![]);
        for i in 0..4 {
            for _ in 0..w[i] as usize {
                rx.push(x[i]);
                ry.push(y[i]);
            }
        }
        let a = pearson(&x, &y, Some(&w)).r.unwrap();
        let b = pearson(&rx, &ry, None).r.unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn ols_recovers_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [1.0, 3.0, 5.0, 7.0];
        let fit = ols(&x, &y).unwrap();
        assert!((fit.slope - 2.0).abs() < 1e-12 && (fit.intercept - 1.0).abs() < 1e-12);
        assert!(ols(&[1.0, 1.0], &[0.0, 1.0]).is_none());
    }
}
