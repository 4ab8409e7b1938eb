//! Synthetic firm populations with planted parameters, and Monte Carlo
//! checks of the closed-form aggregation results.
//!
//! Firm `i` draws `y ~ TruncatedPareto`, then
//! `l = ℓ₀·y^(β + b·u)·e^(ε_l)` and `k = κ₀·y^(γ + g·u)·e^(ε_k)` with
//! `u = ln(y/y_min)`. Its labor share is either the linearized
//! `LS + δ·u` or the exact quotient share at `u`, plus Normal noise
//! truncated to `(0, 1)`. Value added is `(1 − intermediate_share)·y` and
//! the wage bill is `share × value added`.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::aggregation::{
    self, exact_labor_share, MacroEvaluation, MicroTechnology, Regularity, TechGradient,
};
use crate::distribution::TruncatedPareto;
use crate::error::{Error, Result};
use crate::estimation::{self, RegressionFit};
use crate::market_structure::FirmRecord;
use crate::rng::{self, SimRng};

/// Default intermediate-input share of gross output. A calibration
/// convenience only; it scales value added and nothing else.
pub const DEFAULT_INTERMEDIATE_SHARE: f64 = 0.7;

const SHARE_FLOOR: f64 = 1e-6;
const SHARE_CEIL: f64 = 1.0 - 1e-6;
const MAX_NOISE_REDRAWS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LsMode {
    /// Linearized share `LS + δ·ln(y/y_min)`.
    #[default]
    FromGradient,
    /// Exact quotient share implied by the firm's own elasticities.
    FromFactors,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SyntheticSpec {
    pub dist: TruncatedPareto,
    pub tech: MicroTechnology,
    pub grad: TechGradient,
    pub noise_labor_sd: f64,
    pub noise_capital_sd: f64,
    pub noise_ls_sd: f64,
    pub n_firms: usize,
    pub seed: u64,
    pub ls_mode: LsMode,
    pub intermediate_share: f64,
    pub region: String,
    pub industry: String,
    pub year: i32,
}

impl SyntheticSpec {
    /// Noise-free, homogeneous-technology spec.
    pub fn new(dist: TruncatedPareto, tech: MicroTechnology, n_firms: usize, seed: u64) -> Self {
        Self {
            dist,
            tech,
            grad: TechGradient::homogeneous(),
            noise_labor_sd: 0.0,
            noise_capital_sd: 0.0,
            noise_ls_sd: 0.0,
            n_firms,
            seed,
            ls_mode: LsMode::FromGradient,
            intermediate_share: DEFAULT_INTERMEDIATE_SHARE,
            region: "R0".into(),
            industry: "I0".into(),
            year: 2000,
        }
    }

    pub fn with_gradient(mut self, grad: TechGradient) -> Self {
        self.grad = grad;
        self
    }

    pub fn with_noise(mut self, labor_sd: f64, capital_sd: f64, ls_sd: f64) -> Self {
        self.noise_labor_sd = labor_sd;
        self.noise_capital_sd = capital_sd;
        self.noise_ls_sd = ls_sd;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_ls_mode(mut self, mode: LsMode) -> Self {
        self.ls_mode = mode;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_firms == 0 {
            return Err(Error::InsufficientSample { needed: 1, got: 0 });
        }
        for (name, sd) in [
            ("noise_labor_sd", self.noise_labor_sd),
            ("noise_capital_sd", self.noise_capital_sd),
            ("noise_ls_sd", self.noise_ls_sd),
        ] {
            if !(sd.is_finite() && sd >= 0.0) {
                return Err(Error::InvalidParameter {
                    name,
                    value: sd,
                    reason: "noise sd must be nonnegative",
                });
            }
        }
        if !(0.0..1.0).contains(&self.intermediate_share) {
            return Err(Error::InvalidParameter {
                name: "intermediate_share",
                value: self.intermediate_share,
                reason: "must lie in [0, 1)",
            });
        }
        if self.tech.regularity() == Regularity::Degenerate {
            return Err(Error::DegenerateTechnology {
                beta: self.tech.beta,
                gamma: self.tech.gamma,
            });
        }
        Ok(())
    }

    /// Planted scale-share gradient.
    pub fn delta(&self) -> Result<f64> {
        aggregation::scale_share_gradient(&self.tech, &self.grad)
    }
}

/// Column-oriented synthetic sample.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SyntheticFirms {
    pub output: Vec<f64>,
    pub labor: Vec<f64>,
    pub capital: Vec<f64>,
    pub labor_share: Vec<f64>,
}

impl SyntheticFirms {
    pub fn len(&self) -> usize {
        self.output.len()
    }

    pub fn is_empty(&self) -> bool {
        self.output.is_empty()
    }

    /// `Σ y·LS / Σ y`.
    pub fn weighted_share(&self) -> f64 {
        let total: f64 = self.output.iter().sum();
        self.output.iter().zip(&self.labor_share).map(|(y, s)| y * s).sum::<f64>() / total
    }

    pub fn unweighted_share(&self) -> f64 {
        self.labor_share.iter().sum::<f64>() / self.len() as f64
    }
}

#[derive(Debug, Clone, Copy)]
struct FirmDraw {
    output: f64,
    labor: f64,
    capital: f64,
    share: f64,
}

struct Planted {
    base_ls: f64,
    delta: f64,
}

impl Planted {
    fn of(spec: &SyntheticSpec) -> Result<Self> {
        Ok(Self {
            base_ls: aggregation::derive_labor_share(spec.tech.beta, spec.tech.gamma)?,
            delta: spec.delta()?,
        })
    }
}

fn normal(rng: &mut SimRng) -> f64 {
    rng.sample(StandardNormal)
}

fn truncated_share(center: f64, sd: f64, rng: &mut SimRng) -> f64 {
    if sd > 0.0 {
        for _ in 0..MAX_NOISE_REDRAWS {
            let v = center + sd * normal(rng);
            if v > 0.0 && v < 1.0 {
                return v;
            }
        }
    }
    center.clamp(SHARE_FLOOR, SHARE_CEIL)
}

fn draw_firm(spec: &SyntheticSpec, planted: &Planted, rng: &mut SimRng) -> FirmDraw {
    let y = spec.dist.draw(rng);
    let u = (y / spec.dist.y_min()).ln();
    let ln_y = y.ln();
    let (e_l, e_k) = (normal(rng), normal(rng));
    let t = &spec.tech;
    let g = &spec.grad;
    let labor = t.l0 * ((t.beta + g.b * u) * ln_y + spec.noise_labor_sd * e_l).exp();
    let capital = t.k0 * ((t.gamma + g.g * u) * ln_y + spec.noise_capital_sd * e_k).exp();
    let center = match spec.ls_mode {
        LsMode::FromGradient => planted.base_ls + planted.delta * u,
        LsMode::FromFactors => exact_labor_share(t, g, u).unwrap_or(SHARE_FLOOR),
    };
    let share = truncated_share(center, spec.noise_ls_sd, rng);
    FirmDraw {
        output: y,
        labor,
        capital,
        share,
    }
}

/// Run `f` over every block of firms with that block's own generator and
/// return the per-block results in block order.
fn map_blocks<T, F>(spec: &SyntheticSpec, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&mut dyn FnMut() -> FirmDraw, usize) -> T + Sync,
{
    spec.validate()?;
    let planted = Planted::of(spec)?;
    let blocks: Vec<_> = rng::blocks(spec.n_firms).collect();
    Ok(blocks
        .into_par_iter()
        .map(|(b, _, len)| {
            let mut g = rng::rng_from_seed(rng::derive_seed(spec.seed, b));
            let mut next = || draw_firm(spec, &planted, &mut g);
            f(&mut next, len)
        })
        .collect())
}

/// Draw the planted sample as columns.
pub fn simulate_firms(spec: &SyntheticSpec) -> Result<SyntheticFirms> {
    let parts = map_blocks(spec, |next, len| {
        let mut part = SyntheticFirms::default();
        for _ in 0..len {
            let d = next();
            part.output.push(d.output);
            part.labor.push(d.labor);
            part.capital.push(d.capital);
            part.labor_share.push(d.share);
        }
        part
    })?;
    let mut out = SyntheticFirms::default();
    for p in parts {
        out.output.extend(p.output);
        out.labor.extend(p.labor);
        out.capital.extend(p.capital);
        out.labor_share.extend(p.labor_share);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FirmPopulation {
    pub records: Vec<FirmRecord>,
    pub spec: SyntheticSpec,
}

impl FirmPopulation {
    pub fn outputs(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.output).collect()
    }
}

/// Planted population as firm records.
pub fn generate_population(spec: &SyntheticSpec) -> Result<FirmPopulation> {
    let firms = simulate_firms(spec)?;
    let va_share = 1.0 - spec.intermediate_share;
    let records = (0..firms.len())
        .map(|i| {
            let va = va_share * firms.output[i];
            FirmRecord {
                firm_id: format!("f{i:07}"),
                year: spec.year,
                region: spec.region.clone(),
                industry: spec.industry.clone(),
                output: firms.output[i],
                labor: firms.labor[i],
                capital: firms.capital[i],
                wage_bill: firms.labor_share[i] * va,
                value_added: Some(va),
            }
        })
        .collect();
    Ok(FirmPopulation {
        records,
        spec: spec.clone(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AggregationCheck {
    pub n_firms: usize,
    pub seed: u64,
    pub theta: f64,
    pub tfp: f64,
    /// `|Y − A·L^(1−θ)·K^θ| / Y` on sampled totals.
    pub sampled_relative_error: f64,
    /// The same residual on exact-moment totals.
    pub exact_relative_error: f64,
}

/// Sum sampled `(y, l, k)` and compare the totals with the aggregate
/// Cobb–Douglas implied by the micro parameters.
pub fn mc_verify_aggregation(spec: &SyntheticSpec) -> Result<AggregationCheck> {
    if spec.grad != TechGradient::homogeneous() {
        return Err(Error::domain("aggregation check needs homogeneous technology (b = g = 0)"));
    }
    if spec.noise_labor_sd != 0.0 || spec.noise_capital_sd != 0.0 {
        return Err(Error::domain("aggregation check needs noise-free factor demands"));
    }
    if spec.tech.regularity() != Regularity::Regular {
        return Err(Error::domain("aggregation check needs gamma > 1 > beta > 0"));
    }
    let theta = aggregation::derive_theta(spec.tech.beta, spec.tech.gamma)?;
    let tfp = aggregation::derive_tfp(&spec.tech, &spec.dist)?;
    let sums = map_blocks(spec, |next, len| {
        let mut s = [0.0; 3];
        for _ in 0..len {
            let d = next();
            s[0] += d.output;
            s[1] += d.labor;
            s[2] += d.capital;
        }
        s
    })?;
    let mut total = [0.0; 3];
    for s in sums {
        for (t, v) in total.iter_mut().zip(s) {
            *t += v;
        }
    }
    let sampled = aggregation::Aggregates {
        output: total[0],
        labor: total[1],
        capital: total[2],
    };
    let exact = aggregation::aggregate_exact(&spec.tech, &spec.dist, spec.n_firms as f64)?;
    Ok(AggregationCheck {
        n_firms: spec.n_firms,
        seed: spec.seed,
        theta,
        tfp,
        sampled_relative_error: sampled.cobb_douglas_residual(tfp, theta),
        exact_relative_error: exact.cobb_douglas_residual(tfp, theta),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeightingCheck {
    pub n_firms: usize,
    pub seed: u64,
    pub base_ls: f64,
    pub delta: f64,
    pub phi: f64,
    /// Output-weighted sample share.
    pub monte_carlo: f64,
    pub monte_carlo_stderr: f64,
    pub unweighted: f64,
    /// `LS + δ·Φ`.
    pub weighting_factor_form: f64,
    /// `LS + δ·(E[y ln y]/E[y] − ln y_min)`.
    pub exact_expectation_form: f64,
}

impl WeightingCheck {
    /// Distance of the Monte Carlo estimate from the closed form in
    /// standard errors.
    pub fn z_score(&self) -> f64 {
        let gap = self.monte_carlo - self.weighting_factor_form;
        if self.monte_carlo_stderr > 0.0 {
            gap / self.monte_carlo_stderr
        } else if gap == 0.0 {
            0.0
        } else {
            f64::INFINITY.copysign(gap)
        }
    }

    pub fn identity_gap(&self) -> f64 {
        (self.weighting_factor_form - self.exact_expectation_form).abs()
    }
}

/// Compare the sampled output-weighted share with both closed forms of the
/// aggregate share.
pub fn mc_verify_weighting(spec: &SyntheticSpec) -> Result<WeightingCheck> {
    if spec.ls_mode != LsMode::FromGradient {
        return Err(Error::domain("weighting check needs the linearized share mode"));
    }
    let planted = Planted::of(spec)?;
    // Σy, Σy·s, Σy², Σy²·s, Σy²·s², Σs
    let parts = map_blocks(spec, |next, len| {
        let mut s = [0.0; 6];
        for _ in 0..len {
            let d = next();
            let (y, v) = (d.output, d.share);
            s[0] += y;
            s[1] += y * v;
            s[2] += y * y;
            s[3] += y * y * v;
            s[4] += y * y * v * v;
            s[5] += v;
        }
        s
    })?;
    let mut t = [0.0; 6];
    for p in parts {
        for (a, b) in t.iter_mut().zip(p) {
            *a += b;
        }
    }
    let ratio = t[1] / t[0];
    // delta-method variance of a ratio estimator
    let resid_sq = (t[4] - 2.0 * ratio * t[3] + ratio * ratio * t[2]).max(0.0);
    let stderr = resid_sq.sqrt() / t[0];
    let d = &spec.dist;
    Ok(WeightingCheck {
        n_firms: spec.n_firms,
        seed: spec.seed,
        base_ls: planted.base_ls,
        delta: planted.delta,
        phi: aggregation::weighting_factor(d.xi(), d.r())?,
        monte_carlo: ratio,
        monte_carlo_stderr: stderr,
        unweighted: t[5] / spec.n_firms as f64,
        weighting_factor_form: aggregation::macro_labor_share_from(
            planted.base_ls,
            planted.delta,
            d,
            MacroEvaluation::WeightingFactor,
        )?,
        exact_expectation_form: aggregation::macro_labor_share_from(
            planted.base_ls,
            planted.delta,
            d,
            MacroEvaluation::ExactExpectation,
        )?,
    })
}

/// A grid of cells (`ξ` × planted `δ`) for the hypothesis checks.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisGrid {
    pub xis: Vec<f64>,
    pub deltas: Vec<f64>,
    pub r: f64,
    pub y_min: f64,
    pub tech: MicroTechnology,
    pub firms_per_cell: usize,
    pub noise_labor_sd: f64,
    pub noise_capital_sd: f64,
    pub noise_ls_sd: f64,
    pub significance: f64,
    pub seed: u64,
}

impl HypothesisGrid {
    /// Twelve `ξ` values on `[0.8, 1.5]`, `r = e^5`, physical elasticities
    /// `(0.703, 1.329)`.
    pub fn standard(deltas: Vec<f64>, seed: u64) -> Self {
        Self {
            xis: (0..12).map(|i| 0.8 + 0.7 * i as f64 / 11.0).collect(),
            deltas,
            r: 5f64.exp(),
            y_min: 1.0,
            tech: MicroTechnology {
                beta: 0.703,
                gamma: 1.329,
                l0: 1.0,
                k0: 1.0,
            },
            firms_per_cell: 5_000,
            noise_labor_sd: 0.5,
            noise_capital_sd: 0.5,
            noise_ls_sd: 0.05,
            significance: 0.05,
            seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HypothesisCell {
    pub xi: f64,
    pub delta: f64,
    pub alpha_hat: f64,
    pub beta_hat: f64,
    pub gamma_hat: f64,
    pub delta_hat: f64,
    pub delta_stderr: f64,
    pub weighted_ls: f64,
}

/// Cross-cell slope of the weighted share on the estimated tail index at one
/// planted `δ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct XiEffect {
    pub delta: f64,
    pub slope: f64,
    pub stderr: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisReport {
    pub cells: Vec<HypothesisCell>,
    pub xi_effects: Vec<XiEffect>,
    /// `γ̂ > β̂` in every cell.
    pub h1_capital_deepening: bool,
    /// `δ̂` significantly negative wherever `δ < 0` was planted.
    pub h2_negative_gradient: Option<bool>,
    /// No significant `ξ` effect wherever `δ = 0`.
    pub h3a_null_effect: Option<bool>,
    /// Significantly positive `ξ` effect wherever `δ < 0`.
    pub h3b_positive_effect: Option<bool>,
    /// `ξ` effect grows with `|δ|`.
    pub h3c_monotone_in_delta: Option<bool>,
}

fn two_sided_p(t: f64, df: f64) -> f64 {
    let dist = StudentsT::new(0.0, 1.0, df).expect("df > 0");
    2.0 * (1.0 - dist.cdf(t.abs()))
}

fn one_sided_upper_p(t: f64, df: f64) -> f64 {
    let dist = StudentsT::new(0.0, 1.0, df).expect("df > 0");
    1.0 - dist.cdf(t)
}

fn run_cell(grid: &HypothesisGrid, xi: f64, delta: f64, seed: u64) -> Result<HypothesisCell> {
    let dist = TruncatedPareto::with_ratio(xi, grid.r, grid.y_min)?;
    let grad = TechGradient::for_delta(&grid.tech, delta)?;
    let spec = SyntheticSpec::new(dist, grid.tech, grid.firms_per_cell, seed)
        .with_gradient(grad)
        .with_noise(grid.noise_labor_sd, grid.noise_capital_sd, grid.noise_ls_sd);
    let firms = simulate_firms(&spec)?;
    let tail = estimation::rank_regression_tail(&firms.output)?;
    let beta = estimation::ols_loglog(&firms.output, &firms.labor)?;
    let gamma = estimation::ols_loglog(&firms.output, &firms.capital)?;
    let grad_fit = estimation::estimate_scale_share_gradient::<u8>(&firms.labor_share, &firms.output, None)?;
    Ok(HypothesisCell {
        xi,
        delta,
        alpha_hat: tail.alpha_hat,
        beta_hat: beta.slope,
        gamma_hat: gamma.slope,
        delta_hat: grad_fit.slope,
        delta_stderr: grad_fit.stderr_slope,
        weighted_ls: firms.weighted_share(),
    })
}

/// Run the estimator pipeline on every grid cell and evaluate the
/// capital-deepening, negative-gradient and conditional weighting-effect
/// predictions.
pub fn hypothesis_suite(grid: &HypothesisGrid) -> Result<HypothesisReport> {
    if grid.xis.len() < 3 {
        return Err(Error::InsufficientSample {
            needed: 3,
            got: grid.xis.len(),
        });
    }
    if grid.deltas.is_empty() {
        return Err(Error::Empty("deltas"));
    }
    let jobs: Vec<(usize, f64, f64)> = grid
        .deltas
        .iter()
        .flat_map(|&d| grid.xis.iter().map(move |&x| (d, x)))
        .enumerate()
        .map(|(i, (d, x))| (i, x, d))
        .collect();
    let cells = jobs
        .into_par_iter()
        .map(|(i, xi, delta)| run_cell(grid, xi, delta, rng::derive_seed(grid.seed, i as u64)))
        .collect::<Result<Vec<_>>>()?;

    let df = (grid.xis.len() - 2) as f64;
    let mut xi_effects = Vec::with_capacity(grid.deltas.len());
    for &delta in &grid.deltas {
        let group: Vec<&HypothesisCell> = cells.iter().filter(|c| c.delta == delta).collect();
        let alpha: Vec<f64> = group.iter().map(|c| c.alpha_hat).collect();
        let ls: Vec<f64> = group.iter().map(|c| c.weighted_ls).collect();
        let fit: RegressionFit = estimation::ols(&alpha, &ls)?;
        xi_effects.push(XiEffect {
            delta,
            slope: fit.slope,
            stderr: fit.stderr_slope,
            p_value: two_sided_p(fit.t_stat(), df),
        });
    }

    let level = grid.significance;
    let h1 = cells.iter().all(|c| c.gamma_hat > c.beta_hat);
    let negative: Vec<&HypothesisCell> = cells.iter().filter(|c| c.delta < 0.0).collect();
    let n_df = (grid.firms_per_cell - 2) as f64;
    let h2 = (!negative.is_empty()).then(|| {
        negative
            .iter()
            .all(|c| one_sided_upper_p(-c.delta_hat / c.delta_stderr, n_df) < level)
    });
    let nulls: Vec<&XiEffect> = xi_effects.iter().filter(|e| e.delta == 0.0).collect();
    let h3a = (!nulls.is_empty()).then(|| nulls.iter().all(|e| e.p_value >= level));
    let negs: Vec<&XiEffect> = xi_effects.iter().filter(|e| e.delta < 0.0).collect();
    let h3b = (!negs.is_empty()).then(|| {
        negs.iter()
            .all(|e| e.slope > 0.0 && one_sided_upper_p(e.slope / e.stderr, df) < level)
    });
    let mut ordered: Vec<&XiEffect> = xi_effects.iter().filter(|e| e.delta <= 0.0).collect();
    ordered.sort_by(|a, b| a.delta.abs().total_cmp(&b.delta.abs()));
    let h3c = (ordered.len() >= 2).then(|| ordered.windows(2).all(|w| w[1].slope > w[0].slope));

    Ok(HypothesisReport {
        cells,
        xi_effects,
        h1_capital_deepening: h1,
        h2_negative_gradient: h2,
        h3a_null_effect: h3a,
        h3b_positive_effect: h3b,
        h3c_monotone_in_delta: h3c,
    })
}
