//! From firm-level factor demands to the aggregate production function and
//! the aggregate labor share.
//!
//! With `l(y) = ℓ₀·y^β` and `k(y) = κ₀·y^γ` and output drawn from a
//! [`TruncatedPareto`], the totals `(Y, L, K)` satisfy
//! `Y = A·L^(1−θ)·K^θ` exactly with `θ = (1−β)/(γ−β)`. When the elasticities
//! drift with log size the firm labor share becomes `LS + δ·ln(y/y_min)` to
//! first order and the output-weighted aggregate is `LS + δ·Φ(ξ, r)`.

use serde::Serialize;

use crate::distribution::TruncatedPareto;
use crate::error::{Error, Result};

const DEGENERATE_EPS: f64 = 1e-12;

/// Below this `|u| = |(1−ξ)·ln r|` the weighting factor uses its series.
pub const PHI_SERIES_CUTOFF: f64 = 1e-4;

/// Firm-level power-law factor demand `l = ℓ₀·y^β`, `k = κ₀·y^γ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MicroTechnology {
    pub beta: f64,
    pub gamma: f64,
    pub l0: f64,
    pub k0: f64,
}

impl MicroTechnology {
    pub fn new(beta: f64, gamma: f64, l0: f64, k0: f64) -> Result<Self> {
        if !beta.is_finite() || !gamma.is_finite() {
            return Err(Error::domain("elasticities must be finite"));
        }
        if !(l0.is_finite() && l0 > 0.0) {
            return Err(Error::InvalidParameter {
                name: "l0",
                value: l0,
                reason: "labor efficiency must be positive",
            });
        }
        if !(k0.is_finite() && k0 > 0.0) {
            return Err(Error::InvalidParameter {
                name: "k0",
                value: k0,
                reason: "capital efficiency must be positive",
            });
        }
        Ok(Self { beta, gamma, l0, k0 })
    }

    /// Unit efficiencies.
    pub fn elasticities(beta: f64, gamma: f64) -> Result<Self> {
        Self::new(beta, gamma, 1.0, 1.0)
    }

    pub fn regularity(&self) -> Regularity {
        validate_regularity(self)
    }
}

/// Log-size drift of the elasticities: `β(u) = β + b·u`, `γ(u) = γ + g·u`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct TechGradient {
    pub b: f64,
    pub g: f64,
}

impl TechGradient {
    pub fn new(b: f64, g: f64) -> Result<Self> {
        if !b.is_finite() || !g.is_finite() {
            return Err(Error::domain("scale gradients must be finite"));
        }
        Ok(Self { b, g })
    }

    pub fn homogeneous() -> Self {
        Self::default()
    }

    /// Gradient that plants `delta` through the labor elasticity alone
    /// (`g = 0`), or through the capital elasticity when `γ = 1`.
    pub fn for_delta(tech: &MicroTechnology, delta: f64) -> Result<Self> {
        let spread = gap(tech.beta, tech.gamma)?;
        let scale = delta * spread * spread;
        if (tech.gamma - 1.0).abs() > DEGENERATE_EPS {
            Self::new(scale / (tech.gamma - 1.0), 0.0)
        } else if (1.0 - tech.beta).abs() > DEGENERATE_EPS {
            Self::new(0.0, scale / (1.0 - tech.beta))
        } else {
            Err(Error::domain("cannot plant a gradient when beta = gamma = 1"))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regularity {
    /// `γ > 1 > β > 0`
    Regular,
    /// `γ > β` without the full regularity ordering.
    CapitalDeepeningOnly,
    /// `γ ≤ β`
    Degenerate,
}

fn gap(beta: f64, gamma: f64) -> Result<f64> {
    let d = gamma - beta;
    if d.abs() < DEGENERATE_EPS {
        return Err(Error::DegenerateTechnology { beta, gamma });
    }
    Ok(d)
}

/// Capital share `θ = (1−β)/(γ−β)`.
pub fn derive_theta(beta: f64, gamma: f64) -> Result<f64> {
    Ok((1.0 - beta) / gap(beta, gamma)?)
}

/// Labor share `(γ−1)/(γ−β)`.
pub fn derive_labor_share(beta: f64, gamma: f64) -> Result<f64> {
    Ok((gamma - 1.0) / gap(beta, gamma)?)
}

pub fn validate_regularity(tech: &MicroTechnology) -> Regularity {
    let (b, g) = (tech.beta, tech.gamma);
    if g <= b || (g - b).abs() < DEGENERATE_EPS {
        Regularity::Degenerate
    } else if g > 1.0 && 1.0 > b && b > 0.0 {
        Regularity::Regular
    } else {
        Regularity::CapitalDeepeningOnly
    }
}

/// `B(a) = (r^(a−ξ) − 1)/(a − ξ)`.
pub fn aux_b(a: f64, d: &TruncatedPareto) -> f64 {
    d.aux_b(a)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AggregationConstants {
    pub c_y: f64,
    pub c_l: f64,
    pub c_k: f64,
}

fn require_aggregable(tech: &MicroTechnology) -> Result<()> {
    if validate_regularity(tech) == Regularity::Degenerate {
        return Err(Error::DegenerateTechnology {
            beta: tech.beta,
            gamma: tech.gamma,
        });
    }
    Ok(())
}

/// `C_Y = ξ·B(1)/Z`, `C_L = ξ·ℓ₀·B(β)/Z`, `C_K = ξ·κ₀·B(γ)/Z`.
pub fn derive_constants(tech: &MicroTechnology, d: &TruncatedPareto) -> Result<AggregationConstants> {
    require_aggregable(tech)?;
    let scale = d.xi() / d.z();
    Ok(AggregationConstants {
        c_y: scale * d.aux_b(1.0),
        c_l: scale * tech.l0 * d.aux_b(tech.beta),
        c_k: scale * tech.k0 * d.aux_b(tech.gamma),
    })
}

/// TFP `A = C_Y / (C_L^(1−θ)·C_K^θ)`.
pub fn derive_tfp(tech: &MicroTechnology, d: &TruncatedPareto) -> Result<f64> {
    let c = derive_constants(tech, d)?;
    let theta = derive_theta(tech.beta, tech.gamma)?;
    // log form keeps extreme constants in range
    Ok((c.c_y.ln() - (1.0 - theta) * c.c_l.ln() - theta * c.c_k.ln()).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Aggregates {
    pub output: f64,
    pub labor: f64,
    pub capital: f64,
}

impl Aggregates {
    /// `|Y − A·L^(1−θ)·K^θ| / Y`.
    pub fn cobb_douglas_residual(&self, tfp: f64, theta: f64) -> f64 {
        let predicted = tfp * self.labor.powf(1.0 - theta) * self.capital.powf(theta);
        ((self.output - predicted) / self.output).abs()
    }
}

/// `(Y, L, K) = N·(E[y], ℓ₀·E[y^β], κ₀·E[y^γ])` from exact moments.
pub fn aggregate_exact(tech: &MicroTechnology, d: &TruncatedPareto, n_firms: f64) -> Result<Aggregates> {
    if !(n_firms.is_finite() && n_firms > 0.0) {
        return Err(Error::InvalidParameter {
            name: "n_firms",
            value: n_firms,
            reason: "firm count must be positive",
        });
    }
    Ok(Aggregates {
        output: n_firms * d.moment(1.0)?,
        labor: n_firms * tech.l0 * d.moment(tech.beta)?,
        capital: n_firms * tech.k0 * d.moment(tech.gamma)?,
    })
}

/// Revenue elasticity to physical elasticity: `raw·σ/(σ−1)`.
pub fn physical_elasticity_correction(raw_elasticity: f64, sigma: f64) -> Result<f64> {
    if !(sigma.is_finite() && sigma > 1.0) {
        return Err(Error::InvalidParameter {
            name: "sigma",
            value: sigma,
            reason: "substitution elasticity must exceed 1",
        });
    }
    Ok(raw_elasticity * sigma / (sigma - 1.0))
}

/// `δ = [g·(1−β) + b·(γ−1)] / (γ−β)²`, the slope of the firm labor share in
/// log size at `u = 0`.
pub fn scale_share_gradient(tech: &MicroTechnology, grad: &TechGradient) -> Result<f64> {
    let spread = gap(tech.beta, tech.gamma)?;
    Ok((grad.g * (1.0 - tech.beta) + grad.b * (tech.gamma - 1.0)) / (spread * spread))
}

/// Log size `u` at which the exact share's denominator `(γ−β) + (g−b)·u`
/// reaches zero, if it ever does for `u ≥ 0`.
pub fn gradient_validity_bound(tech: &MicroTechnology, grad: &TechGradient) -> Option<f64> {
    let slope = grad.g - grad.b;
    let level = tech.gamma - tech.beta;
    if slope == 0.0 {
        return None;
    }
    let u_star = -level / slope;
    (u_star > 0.0).then_some(u_star)
}

/// `LS(u) = ((γ−1) + g·u) / ((γ−β) + (g−b)·u)`.
pub fn exact_labor_share(tech: &MicroTechnology, grad: &TechGradient, u: f64) -> Result<f64> {
    let den = (tech.gamma - tech.beta) + (grad.g - grad.b) * u;
    if den.abs() < DEGENERATE_EPS {
        return Err(Error::domain(format!(
            "log size {u} reaches the gradient model's validity bound"
        )));
    }
    Ok(((tech.gamma - 1.0) + grad.g * u) / den)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShareEvaluation {
    /// `LS + δ·ln(y/y_min)`
    #[default]
    Linearized,
    /// The quotient form before linearization.
    ExactQuotient,
}

fn log_size(y: f64, y_min: f64) -> Result<f64> {
    if !(y_min > 0.0 && y >= y_min) {
        return Err(Error::domain(format!(
            "firm output {y} must be at least y_min = {y_min} > 0"
        )));
    }
    Ok((y / y_min).ln())
}

/// Linearized firm labor share `LS + δ·ln(y/y_min)`.
pub fn firm_labor_share(tech: &MicroTechnology, grad: &TechGradient, y: f64, y_min: f64) -> Result<f64> {
    firm_labor_share_with(tech, grad, y, y_min, ShareEvaluation::Linearized)
}

pub fn firm_labor_share_with(
    tech: &MicroTechnology,
    grad: &TechGradient,
    y: f64,
    y_min: f64,
    mode: ShareEvaluation,
) -> Result<f64> {
    let u = log_size(y, y_min)?;
    match mode {
        ShareEvaluation::Linearized => {
            let ls = derive_labor_share(tech.beta, tech.gamma)?;
            Ok(ls + scale_share_gradient(tech, grad)? * u)
        }
        ShareEvaluation::ExactQuotient => exact_labor_share(tech, grad, u),
    }
}

/// `Φ(ξ, r)` straight from its defining expression,
/// `r^(1−ξ)·ln r/(r^(1−ξ) − 1) + 1/(ξ − 1)`. Undefined at `ξ = 1`.
pub fn weighting_factor_direct(xi: f64, r: f64) -> Result<f64> {
    check_phi_args(xi, r)?;
    if xi == 1.0 {
        return Err(Error::Singular {
            what: "xi = 1 in the direct weighting-factor expression".into(),
        });
    }
    let ln_r = r.ln();
    let s = r.powf(1.0 - xi);
    Ok(s * ln_r / (s - 1.0) + 1.0 / (xi - 1.0))
}

/// Fourth-order expansion of `Φ` around `ξ = 1` in `u = (1−ξ)·ln r`:
/// `h(e^u) = 1 + u/2 + u²/12 − u⁴/720 + O(u⁶)`, so
/// `Φ = ln r·(1/2 + u/12 − u³/720)`.
pub fn weighting_factor_series(u: f64, ln_r: f64) -> f64 {
    let u2 = u * u;
    ln_r * (0.5 + u / 12.0 - u * u2 / 720.0)
}

fn check_phi_args(xi: f64, r: f64) -> Result<()> {
    if !(xi.is_finite() && xi > 0.0) {
        return Err(Error::InvalidParameter {
            name: "xi",
            value: xi,
            reason: "shape must be positive",
        });
    }
    if !(r.is_finite() && r > 1.0) {
        return Err(Error::InvalidParameter {
            name: "r",
            value: r,
            reason: "range ratio must exceed 1",
        });
    }
    Ok(())
}

/// Weighting factor `Φ(ξ, r) = (1 − h(s))/(ξ − 1)` with `s = r^(1−ξ)` and
/// `h(s) = s·ln s/(s − 1)`; strictly positive for `ξ > 0`, `r > 1`.
pub fn weighting_factor(xi: f64, r: f64) -> Result<f64> {
    check_phi_args(xi, r)?;
    let ln_r = r.ln();
    let u = (1.0 - xi) * ln_r;
    if u.abs() < PHI_SERIES_CUTOFF {
        return Ok(weighting_factor_series(u, ln_r));
    }
    // h(e^u) = u / (1 − e^(−u)) avoids overflow of s for large u
    let h = u / -(-u).exp_m1();
    Ok((1.0 - h) / (xi - 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MacroEvaluation {
    /// `LS + δ·Φ(ξ, r)`
    #[default]
    WeightingFactor,
    /// `LS + δ·(E[y ln y]/E[y] − ln y_min)` from the distribution moments.
    ExactExpectation,
}

/// Aggregate share from a baseline share and gradient.
pub fn macro_labor_share_from(ls: f64, delta: f64, d: &TruncatedPareto, mode: MacroEvaluation) -> Result<f64> {
    let weight = match mode {
        MacroEvaluation::WeightingFactor => weighting_factor(d.xi(), d.r())?,
        MacroEvaluation::ExactExpectation => d.mean_log_weighted()? / d.mean() - d.y_min().ln(),
    };
    Ok(ls + delta * weight)
}

/// Output-weighted aggregate labor share `LS + δ·Φ(ξ, r)`.
pub fn macro_labor_share(tech: &MicroTechnology, grad: &TechGradient, d: &TruncatedPareto) -> Result<f64> {
    macro_labor_share_with(tech, grad, d, MacroEvaluation::WeightingFactor)
}

pub fn macro_labor_share_with(
    tech: &MicroTechnology,
    grad: &TechGradient,
    d: &TruncatedPareto,
    mode: MacroEvaluation,
) -> Result<f64> {
    require_aggregable(tech)?;
    let ls = derive_labor_share(tech.beta, tech.gamma)?;
    let delta = scale_share_gradient(tech, grad)?;
    macro_labor_share_from(ls, delta, d, mode)
}

/// Every macro object implied by one micro configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AggregateTechnology {
    pub theta: f64,
    pub tfp: f64,
    pub base_ls: f64,
    pub delta: f64,
    pub phi: f64,
    pub macro_ls: f64,
}

impl AggregateTechnology {
    pub fn derive(tech: &MicroTechnology, grad: &TechGradient, d: &TruncatedPareto) -> Result<Self> {
        let theta = derive_theta(tech.beta, tech.gamma)?;
        let tfp = derive_tfp(tech, d)?;
        let base_ls = derive_labor_share(tech.beta, tech.gamma)?;
        let delta = scale_share_gradient(tech, grad)?;
        let phi = weighting_factor(d.xi(), d.r())?;
        Ok(Self {
            theta,
            tfp,
            base_ls,
            delta,
            phi,
            macro_ls: base_ls + delta * phi,
        })
    }
}
