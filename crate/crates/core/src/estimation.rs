//! Estimators for tail indices, log-log elasticities and the scale-share
//! gradient, plus fixed-effect demeaning.

use std::collections::HashMap;
use std::hash::Hash;

use serde::Serialize;

use crate::error::{Error, Result};

/// Default fraction of the sample used as the Hill tail.
pub const DEFAULT_HILL_FRACTION: f64 = 0.10;
pub const MIN_TAIL_SAMPLE: usize = 10;
pub const MIN_HILL_K: usize = 5;

const DEMEAN_TOL: f64 = 1e-10;
const DEMEAN_MAX_SWEEPS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegressionFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub stderr_slope: f64,
    pub n: usize,
}

impl RegressionFit {
    pub fn t_stat(&self) -> f64 {
        self.slope / self.stderr_slope
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TailMethod {
    RankRegression,
    Hill,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailFit {
    pub alpha_hat: f64,
    /// `α̂·sqrt(2/n)` for the rank regression, `α̂/sqrt(k)` for Hill.
    pub stderr: f64,
    /// Classical OLS slope standard error (rank regression only).
    pub stderr_ols: Option<f64>,
    pub n_used: usize,
    pub method: TailMethod,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Least squares of `y` on `x` with an intercept.
pub fn ols(x: &[f64], y: &[f64]) -> Result<RegressionFit> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    let n = x.len();
    if n < 3 {
        return Err(Error::InsufficientSample { needed: 3, got: n });
    }
    let (mx, my) = (mean(x), mean(y));
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (&xi, &yi) in x.iter().zip(y) {
        let (dx, dy) = (xi - mx, yi - my);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    let scale = mx.abs().max(f64::MIN_POSITIVE.sqrt());
    if !(sxx > 0.0) || sxx <= n as f64 * (1e-14 * scale).powi(2) {
        return Err(Error::DegenerateRegressor);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = x
        .iter()
        .zip(y)
        .map(|(&xi, &yi)| {
            let e = yi - intercept - slope * xi;
            e * e
        })
        .sum();
    let r_squared = if syy > 0.0 { (1.0 - ssr / syy).clamp(0.0, 1.0) } else { 1.0 };
    let stderr_slope = (ssr / (n - 2) as f64 / sxx).sqrt();
    Ok(RegressionFit {
        slope,
        intercept,
        r_squared,
        stderr_slope,
        n,
    })
}

fn check_positive(values: &[f64], what: &str) -> Result<()> {
    match values.iter().position(|&v| !(v.is_finite() && v > 0.0)) {
        Some(i) => Err(Error::domain(format!(
            "{what} must be positive and finite; entry {i} is {}",
            values[i]
        ))),
        None => Ok(()),
    }
}

fn sorted_descending(outputs: &[f64]) -> Vec<f64> {
    let mut v = outputs.to_vec();
    // stable: ties keep input order
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

/// Rank-½ log-rank regression `ln(rank − 0.5) = C − α·ln Y` over the full sample.
pub fn rank_regression_tail(outputs: &[f64]) -> Result<TailFit> {
    rank_regression_tail_top(outputs, 1.0)
}

/// Rank regression on the largest `top_fraction` of observations
/// (diagnostic variant; `1.0` uses the full sample).
pub fn rank_regression_tail_top(outputs: &[f64], top_fraction: f64) -> Result<TailFit> {
    if !(top_fraction > 0.0 && top_fraction <= 1.0) {
        return Err(Error::InvalidParameter {
            name: "top_fraction",
            value: top_fraction,
            reason: "must lie in (0, 1]",
        });
    }
    check_positive(outputs, "outputs")?;
    let n_total = outputs.len();
    let n = ((top_fraction * n_total as f64).ceil() as usize).min(n_total);
    if n < MIN_TAIL_SAMPLE {
        return Err(Error::InsufficientSample {
            needed: MIN_TAIL_SAMPLE,
            got: n,
        });
    }
    let sorted = sorted_descending(outputs);
    if sorted[0] == sorted[n - 1] {
        return Err(Error::DegenerateTail);
    }
    let log_y: Vec<f64> = sorted[..n].iter().map(|y| y.ln()).collect();
    let log_rank: Vec<f64> = (1..=n).map(|i| (i as f64 - 0.5).ln()).collect();
    let fit = ols(&log_y, &log_rank)?;
    let alpha_hat = -fit.slope;
    if !(alpha_hat > 0.0) {
        return Err(Error::DegenerateRegressor);
    }
    Ok(TailFit {
        alpha_hat,
        stderr: alpha_hat * (2.0 / n as f64).sqrt(),
        stderr_ols: Some(fit.stderr_slope),
        n_used: n,
        method: TailMethod::RankRegression,
    })
}

/// Hill estimator on the `k = floor(k_fraction·n)` largest observations.
pub fn hill_tail(outputs: &[f64], k_fraction: f64) -> Result<TailFit> {
    if !(k_fraction > 0.0 && k_fraction <= 0.5) {
        return Err(Error::InvalidParameter {
            name: "k_fraction",
            value: k_fraction,
            reason: "must lie in (0, 0.5]",
        });
    }
    check_positive(outputs, "outputs")?;
    let k = (k_fraction * outputs.len() as f64).floor() as usize;
    if k < MIN_HILL_K {
        return Err(Error::InsufficientTail { k, needed: MIN_HILL_K });
    }
    let sorted = sorted_descending(outputs);
    let threshold = sorted[k].ln();
    let spacing: f64 = sorted[..k].iter().map(|y| y.ln() - threshold).sum::<f64>() / k as f64;
    if !(spacing > 0.0) {
        return Err(Error::DegenerateTail);
    }
    let alpha_hat = 1.0 / spacing;
    Ok(TailFit {
        alpha_hat,
        stderr: alpha_hat / (k as f64).sqrt(),
        stderr_ols: None,
        n_used: k,
        method: TailMethod::Hill,
    })
}

/// OLS of `ln y` on `ln x`.
pub fn ols_loglog(x: &[f64], y: &[f64]) -> Result<RegressionFit> {
    check_positive(x, "regressor")?;
    check_positive(y, "response")?;
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    ols(&lx, &ly)
}

/// Slope of the firm labor share on log output, optionally within groups.
pub fn estimate_scale_share_gradient<K: Hash + Eq + Clone>(
    ls: &[f64],
    outputs: &[f64],
    groups: Option<&[K]>,
) -> Result<RegressionFit> {
    if ls.len() != outputs.len() {
        return Err(Error::LengthMismatch {
            left: ls.len(),
            right: outputs.len(),
        });
    }
    check_positive(outputs, "outputs")?;
    let log_y: Vec<f64> = outputs.iter().map(|v| v.ln()).collect();
    let Some(labels) = groups else {
        return ols(&log_y, ls);
    };
    if labels.len() != ls.len() {
        return Err(Error::LengthMismatch {
            left: labels.len(),
            right: ls.len(),
        });
    }
    let (codes, n_groups) = encode_labels(labels);
    let mut counts = vec![0usize; n_groups];
    for &c in &codes {
        counts[c] += 1;
    }
    if let Some(&smallest) = counts.iter().min() {
        if smallest < 2 {
            return Err(Error::InsufficientSample { needed: 2, got: smallest });
        }
    }
    let dy = demean_codes(ls, &[(&codes, n_groups)])?;
    let dx = demean_codes(&log_y, &[(&codes, n_groups)])?;
    let mut fit = ols(&dx, &dy)?;
    // absorbed group means cost G − 1 extra degrees of freedom
    let n = fit.n as f64;
    let df_plain = n - 2.0;
    let df_fe = n - n_groups as f64 - 1.0;
    if df_fe < 1.0 {
        return Err(Error::InsufficientSample {
            needed: n_groups + 2,
            got: fit.n,
        });
    }
    fit.stderr_slope *= (df_plain / df_fe).sqrt();
    Ok(fit)
}

/// Dense codes `0..G` for arbitrary labels, in first-appearance order.
pub fn encode_labels<K: Hash + Eq + Clone>(labels: &[K]) -> (Vec<usize>, usize) {
    let mut map: HashMap<K, usize> = HashMap::new();
    let codes = labels
        .iter()
        .map(|k| {
            let next = map.len();
            *map.entry(k.clone()).or_insert(next)
        })
        .collect();
    (codes, map.len())
}

/// Remove the means of every factor by alternating projections.
pub fn demean<K: Hash + Eq + Clone>(values: &[f64], factors: &[&[K]]) -> Result<Vec<f64>> {
    let mut encoded = Vec::with_capacity(factors.len());
    for f in factors {
        if f.len() != values.len() {
            return Err(Error::LengthMismatch {
                left: f.len(),
                right: values.len(),
            });
        }
        encoded.push(encode_labels(f));
    }
    let refs: Vec<(&[usize], usize)> = encoded.iter().map(|(c, g)| (c.as_slice(), *g)).collect();
    demean_codes(values, &refs)
}

fn cell_means(values: &[f64], codes: &[usize], n_groups: usize) -> Vec<f64> {
    let mut sums = vec![0.0; n_groups];
    let mut counts = vec![0usize; n_groups];
    for (&v, &c) in values.iter().zip(codes) {
        sums[c] += v;
        counts[c] += 1;
    }
    sums.iter().zip(&counts).map(|(s, &n)| s / n as f64).collect()
}

fn demean_codes(values: &[f64], factors: &[(&[usize], usize)]) -> Result<Vec<f64>> {
    let mut out = values.to_vec();
    if factors.is_empty() {
        return Ok(out);
    }
    let mut residual = f64::INFINITY;
    for _ in 0..DEMEAN_MAX_SWEEPS {
        for &(codes, g) in factors {
            let means = cell_means(&out, codes, g);
            for (v, &c) in out.iter_mut().zip(codes) {
                *v -= means[c];
            }
        }
        residual = factors
            .iter()
            .flat_map(|&(codes, g)| cell_means(&out, codes, g))
            .fold(0.0, |m: f64, v| m.max(v.abs()));
        if residual < DEMEAN_TOL {
            return Ok(out);
        }
    }
    Err(Error::NoConvergence {
        sweeps: DEMEAN_MAX_SWEEPS,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Closed-form least-squares slope, written independently of `ols`.
    fn normal_equations_slope(x: &[f64], y: &[f64]) -> f64 {
        let n = x.len() as f64;
        let sx: f64 = x.iter().sum();
        let sy: f64 = y.iter().sum();
        let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
        let sxx: f64 = x.iter().map(|a| a * a).sum();
        (n * sxy - sx * sy) / (n * sxx - sx * sx)
    }

    #[test]
    fn ols_exact_line() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        let y: Vec<f64> = x.iter().map(|v| 3.0 - 2.0 * v).collect();
        let fit = ols(&x, &y).unwrap();
        assert_relative_eq!(fit.slope, -2.0, epsilon = 1e-14);
        assert_relative_eq!(fit.intercept, 3.0, epsilon = 1e-13);
        assert_eq!(fit.r_squared, 1.0);
        assert!(fit.stderr_slope < 1e-14);
        assert!(matches!(ols(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]), Err(Error::DegenerateRegressor)));
        assert!(ols(&[1.0, 2.0], &[1.0, 2.0]).is_err());
        assert!(ols(&[1.0, 2.0, 3.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn zipf_grid_matches_least_squares_oracle() {
        let y: Vec<f64> = (1..=100).map(|i| 1000.0 / i as f64).collect();
        let fit = rank_regression_tail(&y).unwrap();
        let lx: Vec<f64> = y.iter().map(|v| v.ln()).collect();
        let lr: Vec<f64> = (1..=100).map(|i| (i as f64 - 0.5).ln()).collect();
        let oracle = -normal_equations_slope(&lx, &lr);
        assert_relative_eq!(fit.alpha_hat, oracle, max_relative = 1e-10);
        // the half-rank shift bends the top of a pure 1/i grid
        assert_relative_eq!(fit.alpha_hat, 1.059_403_131_446_564_8, max_relative = 1e-10);

        let shifted: Vec<f64> = (1..=100).map(|i| 1000.0 / (i as f64 - 0.5)).collect();
        let fit = rank_regression_tail(&shifted).unwrap();
        assert!((fit.alpha_hat - 1.0).abs() < 1e-12);
        assert_relative_eq!(fit.stderr, fit.alpha_hat * (2.0f64 / 100.0).sqrt());
    }

    #[test]
    fn rank_regression_errors() {
        assert!(matches!(
            rank_regression_tail(&[1.0; 9]),
            Err(Error::InsufficientSample { needed: 10, got: 9 })
        ));
        let mut y: Vec<f64> = (1..=20).map(|i| i as f64).collect();
        y[3] = 0.0;
        assert!(matches!(rank_regression_tail(&y), Err(Error::Domain(_))));
        assert!(rank_regression_tail(&[2.0; 20]).is_err());
    }

    #[test]
    fn tail_estimators_are_scale_invariant() {
        let y: Vec<f64> = (1..=500).map(|i| (1.0 - i as f64 / 501.0).powf(-1.0 / 1.3)).collect();
        let scaled: Vec<f64> = y.iter().map(|v| v * 37.5).collect();
        let a = rank_regression_tail(&y).unwrap().alpha_hat;
        let b = rank_regression_tail(&scaled).unwrap().alpha_hat;
        assert!((a - b).abs() < 1e-12);
        let a = hill_tail(&y, 0.1).unwrap().alpha_hat;
        let b = hill_tail(&scaled, 0.1).unwrap().alpha_hat;
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn top_fraction_variant() {
        let y: Vec<f64> = (1..=1000).map(|i| 1000.0 / (i as f64 - 0.5)).collect();
        let fit = rank_regression_tail_top(&y, 0.2).unwrap();
        assert_eq!(fit.n_used, 200);
        assert!((fit.alpha_hat - 1.0).abs() < 1e-12);
        assert!(rank_regression_tail_top(&y, 0.0).is_err());
        assert!(rank_regression_tail_top(&y, 0.005).is_err());
    }

    #[test]
    fn hill_on_pareto_quantile_grid() {
        let n = 10_000;
        let y: Vec<f64> = (1..=n).map(|i| 1.0 / (1.0 - i as f64 / (n as f64 + 1.0))).collect();
        let fit = hill_tail(&y, DEFAULT_HILL_FRACTION).unwrap();
        assert_eq!(fit.n_used, 1000);
        assert!((fit.alpha_hat - 1.0).abs() < 0.03, "{}", fit.alpha_hat);
        assert_relative_eq!(fit.stderr, fit.alpha_hat / 1000f64.sqrt());
    }

    #[test]
    fn hill_errors() {
        assert!(matches!(hill_tail(&[3.0; 100], 0.1), Err(Error::DegenerateTail)));
        assert!(matches!(
            hill_tail(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0], 0.4),
            Err(Error::InsufficientTail { k: 4, .. })
        ));
        assert!(hill_tail(&[1.0; 100], 0.6).is_err());
    }

    #[test]
    fn hill_ties_at_boundary_contribute_zero() {
        // k = 5; Y_(5) == Y_(6)
        let mut y = vec![1.0; 40];
        y.extend([10.0, 20.0, 40.0, 80.0, 5.0, 5.0]);
        let fit = hill_tail(&y, 5.0 / 46.0 + 1e-9).unwrap();
        let expected = 5.0 / [2.0f64, 4.0, 8.0, 16.0].iter().map(|v| v.ln()).sum::<f64>();
        assert_relative_eq!(fit.alpha_hat, expected, max_relative = 1e-13);
    }

    #[test]
    fn loglog_exact_power_law() {
        let x: Vec<f64> = (1..=50).map(|i| i as f64 * 1.7).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v.powf(0.469)).collect();
        let fit = ols_loglog(&x, &y).unwrap();
        assert!((fit.slope - 0.469).abs() < 1e-13);
        assert!((fit.intercept - 2f64.ln()).abs() < 1e-12);
        assert!(fit.r_squared > 1.0 - 1e-14);
        assert!(fit.stderr_slope < 1e-12);
        assert!(ols_loglog(&[1.0, -2.0, 3.0], &[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn capital_deepening_slope_is_difference() {
        let y: Vec<f64> = (1..=40).map(|i| 1.0 + (i as f64).powf(1.3)).collect();
        let l: Vec<f64> = y.iter().enumerate().map(|(i, v)| v.powf(0.5) * (1.0 + 0.3 * ((i * 7 % 5) as f64))).collect();
        let k: Vec<f64> = y.iter().enumerate().map(|(i, v)| v.powf(0.9) * (1.0 + 0.2 * ((i * 3 % 7) as f64))).collect();
        let kl: Vec<f64> = k.iter().zip(&l).map(|(a, b)| a / b).collect();
        let sk = ols_loglog(&y, &k).unwrap().slope;
        let sl = ols_loglog(&y, &l).unwrap().slope;
        let skl = ols_loglog(&y, &kl).unwrap().slope;
        assert!((skl - (sk - sl)).abs() < 1e-10);
    }

    #[test]
    fn gradient_fe_absorbs_group_offsets() {
        let y: Vec<f64> = (0..60).map(|i| 1.0 + (i as f64 * 0.37).exp() % 50.0).collect();
        let groups: Vec<u8> = (0..60).map(|i| (i % 3) as u8).collect();
        let ls: Vec<f64> = y.iter().enumerate().map(|(i, v)| 0.5 - 0.06 * v.ln() + 0.01 * ((i % 4) as f64)).collect();
        let shifted: Vec<f64> = ls.iter().zip(&groups).map(|(v, &g)| v + 0.1 * g as f64).collect();
        let a = estimate_scale_share_gradient(&ls, &y, Some(&groups)).unwrap();
        let b = estimate_scale_share_gradient(&shifted, &y, Some(&groups)).unwrap();
        assert!((a.slope - b.slope).abs() < 1e-10);
        let pooled = estimate_scale_share_gradient::<u8>(&ls, &y, None).unwrap();
        assert!(pooled.slope < 0.0);

        let singleton: Vec<u8> = (0..60).map(|i| if i == 0 { 9 } else { (i % 3) as u8 }).collect();
        assert!(estimate_scale_share_gradient(&ls, &y, Some(&singleton)).is_err());
    }

    #[test]
    fn demean_single_factor() {
        let v = [1.0, 2.0, 6.0];
        let out = demean(&v, &[&["a", "a", "a"][..]]).unwrap();
        for (o, x) in out.iter().zip(v) {
            assert_relative_eq!(*o, x - 3.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn demean_balanced_two_way() {
        let v = [1.0, 4.0, 2.0, 9.0];
        let rows = [0, 0, 1, 1];
        let cols = [0, 1, 0, 1];
        let out = demean(&v, &[&rows[..], &cols[..]]).unwrap();
        // exact two-way demeaning: v − row mean − col mean + grand mean
        let expected = [1.0 - 2.5 - 1.5 + 4.0, 4.0 - 2.5 - 6.5 + 4.0, 2.0 - 5.5 - 1.5 + 4.0, 9.0 - 5.5 - 6.5 + 4.0];
        for (o, e) in out.iter().zip(expected) {
            assert!((o - e).abs() < 1e-14);
        }
    }

    #[test]
    fn demean_unbalanced_panel() {
        let n = 500;
        let firm: Vec<usize> = (0..n).map(|i| (i * 7919) % 37).collect();
        let year: Vec<usize> = (0..n).map(|i| (i * 104_729 + i / 3) % 11).collect();
        let v: Vec<f64> = (0..n).map(|i| ((i as f64) * 0.618).sin() * 10.0 + firm[i] as f64).collect();
        let out = demean(&v, &[&firm[..], &year[..]]).unwrap();
        for (codes, g) in [(&firm, 37), (&year, 11)] {
            for m in cell_means(&out, codes, g) {
                assert!(m.abs() < 1e-10);
            }
        }
        assert!(demean(&v, &[&firm[..10]]).is_err());
    }
}
