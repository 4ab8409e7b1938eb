//! Truncated Pareto law for firm output on `[y_min, y_max]`.
//!
//! Density `ξ·y_min^ξ·y^(−ξ−1) / Z` with `r = y_max / y_min` and
//! `Z = 1 − r^(−ξ)`. Moments are available in closed form; the expressions
//! contain a removable singularity at `a = ξ` (and at `ξ = 1` for the
//! output-weighted log moment) which is handled explicitly.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rng;

/// Below this distance from the singular point the logarithmic branch is used.
pub const SINGULAR_EPS: f64 = 1e-9;

/// `(e^(c·ln r) − 1) / c`, continuous through `c = 0` where it equals `ln r`.
///
/// This is the `B(a)` auxiliary of the aggregation algebra with `c = a − ξ`.
pub fn power_ratio(c: f64, ln_r: f64) -> f64 {
    if c.abs() <= SINGULAR_EPS {
        ln_r
    } else {
        (c * ln_r).exp_m1() / c
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TruncatedPareto {
    xi: f64,
    y_min: f64,
    y_max: f64,
    r: f64,
    ln_r: f64,
    z: f64,
}

impl TruncatedPareto {
    pub fn new(xi: f64, y_min: f64, y_max: f64) -> Result<Self> {
        if !(xi.is_finite() && xi > 0.0) {
            return Err(Error::InvalidParameter {
                name: "xi",
                value: xi,
                reason: "shape must be positive and finite",
            });
        }
        if !(y_min.is_finite() && y_min > 0.0) {
            return Err(Error::InvalidParameter {
                name: "y_min",
                value: y_min,
                reason: "lower bound must be positive and finite",
            });
        }
        if !(y_max.is_finite() && y_max > y_min) {
            return Err(Error::InvalidParameter {
                name: "y_max",
                value: y_max,
                reason: "upper bound must be finite and exceed y_min",
            });
        }
        let r = y_max / y_min;
        let ln_r = y_max.ln() - y_min.ln();
        let z = -(-xi * ln_r).exp_m1();
        if !(r > 1.0 && z > 0.0 && z <= 1.0) {
            return Err(Error::InvalidParameter {
                name: "y_max",
                value: y_max,
                reason: "support ratio too close to 1 to normalize",
            });
        }
        Ok(Self {
            xi,
            y_min,
            y_max,
            r,
            ln_r,
            z,
        })
    }

    /// Build from the shape, the range ratio `r` and the lower bound.
    pub fn with_ratio(xi: f64, r: f64, y_min: f64) -> Result<Self> {
        if !(r.is_finite() && r > 1.0) {
            return Err(Error::InvalidParameter {
                name: "r",
                value: r,
                reason: "range ratio must exceed 1",
            });
        }
        Self::new(xi, y_min, y_min * r)
    }

    pub fn xi(&self) -> f64 {
        self.xi
    }
    pub fn y_min(&self) -> f64 {
        self.y_min
    }
    pub fn y_max(&self) -> f64 {
        self.y_max
    }
    /// `y_max / y_min`
    pub fn r(&self) -> f64 {
        self.r
    }
    pub fn ln_r(&self) -> f64 {
        self.ln_r
    }
    /// Normalization `1 − r^(−ξ)`.
    pub fn z(&self) -> f64 {
        self.z
    }

    pub fn contains(&self, y: f64) -> bool {
        y >= self.y_min && y <= self.y_max
    }

    pub fn pdf(&self, y: f64) -> f64 {
        if !self.contains(y) {
            return 0.0;
        }
        let log_ratio = (self.y_min / y).ln();
        self.xi * (self.xi * log_ratio).exp() / (y * self.z)
    }

    pub fn cdf(&self, y: f64) -> f64 {
        if y <= self.y_min {
            0.0
        } else if y >= self.y_max {
            1.0
        } else {
            -(self.xi * (self.y_min / y).ln()).exp_m1() / self.z
        }
    }

    /// `(r^(a−ξ) − 1) / (a − ξ)`, the log branch `ln r` at `a = ξ`.
    pub fn aux_b(&self, a: f64) -> f64 {
        power_ratio(a - self.xi, self.ln_r)
    }

    /// `E[y^a]`.
    pub fn moment(&self, a: f64) -> Result<f64> {
        if !a.is_finite() {
            return Err(Error::domain(format!("moment order must be finite, got {a}")));
        }
        if a == 0.0 {
            return Ok(1.0);
        }
        Ok(self.xi * self.y_min.powf(a) / self.z * self.aux_b(a))
    }

    /// `E[y]`.
    pub fn mean(&self) -> f64 {
        self.xi * self.y_min / self.z * self.aux_b(1.0)
    }

    /// `E[y·ln y]` in closed form.
    ///
    /// Fails within [`SINGULAR_EPS`] of `ξ = 1`, where the expression is a
    /// removable singularity; integrate numerically there instead.
    pub fn mean_log_weighted(&self) -> Result<f64> {
        let one_minus_xi = 1.0 - self.xi;
        if one_minus_xi.abs() <= SINGULAR_EPS {
            return Err(Error::Singular {
                what: format!("xi = {} (E[y ln y] needs xi != 1)", self.xi),
            });
        }
        let s = (one_minus_xi * self.ln_r).exp();
        let a = power_ratio(one_minus_xi, self.ln_r);
        let bracket = self.y_min.ln() * a + s * self.ln_r / one_minus_xi - a / one_minus_xi;
        Ok(self.xi * self.y_min / self.z * bracket)
    }

    /// Inverse CDF: `y_min·(1 − u·Z)^(−1/ξ)`.
    pub fn quantile(&self, u: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&u) {
            return Err(Error::domain(format!("quantile level must lie in [0, 1], got {u}")));
        }
        Ok(self.quantile_unchecked(u))
    }

    fn quantile_unchecked(&self, u: f64) -> f64 {
        if u == 0.0 {
            return self.y_min;
        }
        if u == 1.0 {
            return self.y_max;
        }
        let y = self.y_min * (-(-u * self.z).ln_1p() / self.xi).exp();
        y.clamp(self.y_min, self.y_max)
    }

    /// Draw one value from an explicit generator state.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.quantile_unchecked(rng.random::<f64>())
    }

    /// `n` i.i.d. draws; block-parallel with per-block derived seeds, so the
    /// output depends only on `(self, seed, n)`.
    pub fn sample(&self, seed: u64, n: usize) -> Vec<f64> {
        let mut out = vec![0.0; n];
        let chunks: Vec<(u64, &mut [f64])> = out
            .chunks_mut(rng::BLOCK_SIZE)
            .enumerate()
            .map(|(b, c)| (b as u64, c))
            .collect();
        chunks.into_par_iter().for_each(|(b, chunk)| {
            let mut g = rng::rng_from_seed(rng::derive_seed(seed, b));
            for v in chunk.iter_mut() {
                *v = self.draw(&mut g);
            }
        });
        out
    }
}
