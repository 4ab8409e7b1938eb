//! Brute-force reference computations.
//!
//! These evaluate expectations under the truncated Pareto density by direct
//! numerical integration. They share nothing with the closed forms except
//! the density itself.

use crate::distribution::TruncatedPareto;
use crate::quadrature;

const REL_TOL: f64 = 1e-13;

/// `∫ f(y)·pdf(y) dy` over the support.
pub fn expectation<F: Fn(f64) -> f64>(d: &TruncatedPareto, f: F) -> f64 {
    quadrature::integrate_log_scale(|y| f(y) * d.pdf(y), d.y_min(), d.y_max(), REL_TOL).value
}

/// `E[y^a]` by quadrature.
pub fn moment(d: &TruncatedPareto, a: f64) -> f64 {
    expectation(d, |y| y.powf(a))
}

/// `E[y·ln(y/y_min)] / E[y]` by quadrature, the weighting factor's definition.
pub fn weighting_factor(d: &TruncatedPareto) -> f64 {
    let y_min = d.y_min();
    expectation(d, |y| y * (y / y_min).ln()) / expectation(d, |y| y)
}

/// Output-weighted mean of `ls(y)` by quadrature.
pub fn output_weighted_mean<F: Fn(f64) -> f64>(d: &TruncatedPareto, ls: F) -> f64 {
    expectation(d, |y| y * ls(y)) / expectation(d, |y| y)
}

/// `Σ_i Σ_j |x_i − x_j| / (2 n² mean)`, the O(n²) definition of the Gini index.
pub fn gini_double_sum(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let mut total = 0.0;
    for &a in values {
        for &b in values {
            total += (a - b).abs();
        }
    }
    total / (2.0 * n * n * mean)
}

/// Values of `Φ` near `ξ = 1` written as `ln r·(h(e^u) − 1)/u`, where
/// `h(s) = s·ln s/(s − 1)` and `u = (1 − ξ)·ln r`, evaluated to 50 digits
/// for `ln r = ln 10` (as the nearest f64). Entries are `(u, Φ)`.
pub const PHI_NEAR_ONE_REFERENCE: [(f64, f64); 4] = [
    (1e-3, 1.151_484_428_584_907_752_933_988_778_21),
    (-1e-3, 1.151_100_664_409_138_148_159_625_014_7),
    (1e-2, 1.153_211_364_209_824_085_140_033_441_7),
    (-1e-2, 1.149_373_728_784_221_815_953_580_351_21),
];

/// `ln 10` rounded to f64, the `ln r` used by [`PHI_NEAR_ONE_REFERENCE`].
pub const PHI_REFERENCE_LN_R: f64 = std::f64::consts::LN_10;
