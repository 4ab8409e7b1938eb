//! Deterministic oracle suite: closed forms against quadrature, algebraic
//! identities, weighting-factor properties and decomposition fuzzing.

use rand::Rng;
use serde::Serialize;

use crate::aggregation::{
    self, MacroEvaluation, MicroTechnology, PHI_SERIES_CUTOFF,
};
use crate::decomposition::{melitz_polanec, WeightedObs};
use crate::distribution::TruncatedPareto;
use crate::error::Result;
use crate::oracle;
use crate::rng;

pub const XI_GRID: [f64; 6] = [0.5, 0.892, 1.0, 1.2, 2.0, 3.0];
pub const R_GRID: [f64; 5] = [1.5, std::f64::consts::E, 10.0, 1e2, 1e4];
pub const TECH_GRID: [(f64, f64); 3] = [(0.703, 1.329), (0.5, 1.5), (0.9, 1.1)];
/// Weighting-factor grid, dense around `ξ = 1`.
pub const PHI_XI_GRID: [f64; 9] = [0.3, 0.5, 0.892, 0.999, 1.0, 1.001, 1.2, 2.0, 3.0];
pub const PHI_R_GRID: [f64; 6] = [1.5, std::f64::consts::E, 10.0, 1e2, 1e4, 1e6];
/// Grid points where the direct and compact weighting-factor paths are
/// compared.
pub const PHI_AWAY_FROM_ONE: [f64; 6] = [0.3, 0.5, 0.892, 1.2, 2.0, 3.0];

pub const MOMENT_TOL: f64 = 1e-10;
pub const IDENTITY_TOL: f64 = 1e-12;
pub const PHI_PATH_TOL: f64 = 1e-10;
pub const PHI_REFERENCE_TOL: f64 = 1e-8;
pub const WEIGHTING_TOL: f64 = 1e-10;
pub const MP_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    /// Largest observed violation measure (error, or count of failures).
    pub worst: f64,
    pub tolerance: f64,
    pub cases: usize,
    pub detail: String,
}

impl Check {
    fn from_errors(name: &'static str, tolerance: f64, errors: &[(String, f64)]) -> Self {
        let (detail, worst) = errors
            .iter()
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(d, e)| (d.clone(), *e))
            .unwrap_or_default();
        Self {
            name,
            passed: errors.iter().all(|(_, e)| *e <= tolerance),
            worst,
            tolerance,
            cases: errors.len(),
            detail,
        }
    }

    fn from_failures(name: &'static str, failures: Vec<String>, cases: usize) -> Self {
        Self {
            name,
            passed: failures.is_empty(),
            worst: failures.len() as f64,
            tolerance: 0.0,
            cases,
            detail: failures.first().cloned().unwrap_or_default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

/// Closed-form moments against adaptive quadrature.
pub fn quadrature_vs_moments() -> Result<Check> {
    let mut errors = Vec::new();
    for &xi in &XI_GRID {
        for &r in &R_GRID {
            let d = TruncatedPareto::with_ratio(xi, r, 1.5)?;
            for a in [0.0, 0.5, 0.703, 1.0, 1.329, xi, 2.5] {
                let e = rel(d.moment(a)?, oracle::moment(&d, a));
                errors.push((format!("xi={xi} r={r} a={a}"), e));
            }
            if (xi - 1.0).abs() > 1e-6 {
                let oracle_value = oracle::expectation(&d, |y| y * y.ln());
                let e = rel(d.mean_log_weighted()?, oracle_value);
                errors.push((format!("xi={xi} r={r} E[y ln y]"), e));
            }
        }
    }
    Ok(Check::from_errors("moments match quadrature", MOMENT_TOL, &errors))
}

/// `Y = A·L^(1−θ)·K^θ` on exact-moment aggregates.
pub fn aggregation_identity_grid() -> Result<Check> {
    let mut errors = Vec::new();
    for &xi in &XI_GRID {
        for &r in &R_GRID {
            let d = TruncatedPareto::with_ratio(xi, r, 1.0)?;
            for &(beta, gamma) in &TECH_GRID {
                let tech = MicroTechnology::elasticities(beta, gamma)?;
                let theta = aggregation::derive_theta(beta, gamma)?;
                let tfp = aggregation::derive_tfp(&tech, &d)?;
                let agg = aggregation::aggregate_exact(&tech, &d, 1e6)?;
                errors.push((
                    format!("xi={xi} r={r} beta={beta} gamma={gamma}"),
                    agg.cobb_douglas_residual(tfp, theta),
                ));
            }
        }
    }
    Ok(Check::from_errors("aggregation identity (exact moments)", IDENTITY_TOL, &errors))
}

/// Positivity and monotonicity of `Φ` by central differences.
pub fn phi_properties() -> Result<Check> {
    let mut failures = Vec::new();
    let mut cases = 0;
    for &xi in &PHI_XI_GRID {
        for &r in &PHI_R_GRID {
            cases += 1;
            let phi = aggregation::weighting_factor(xi, r)?;
            let hr = 1e-4 * r;
            let d_r = (aggregation::weighting_factor(xi, r + hr)? - aggregation::weighting_factor(xi, r - hr)?) / (2.0 * hr);
            let hx = 1e-4;
            let d_xi =
                (aggregation::weighting_factor(xi + hx, r)? - aggregation::weighting_factor(xi - hx, r)?) / (2.0 * hx);
            if !(phi > 0.0) {
                failures.push(format!("Phi({xi}, {r}) = {phi} not positive"));
            }
            if !(d_r > 0.0) {
                failures.push(format!("dPhi/dr({xi}, {r}) = {d_r} not positive"));
            }
            if !(d_xi < 0.0) {
                failures.push(format!("dPhi/dxi({xi}, {r}) = {d_xi} not negative"));
            }
        }
    }
    Ok(Check::from_failures("weighting factor positive, rising in r, falling in xi", failures, cases))
}

/// Direct and compact weighting-factor paths away from `ξ = 1`.
pub fn phi_paths_agree() -> Result<Check> {
    let mut errors = Vec::new();
    for &xi in &PHI_AWAY_FROM_ONE {
        for &r in &PHI_R_GRID {
            let direct = aggregation::weighting_factor_direct(xi, r)?;
            let compact = aggregation::weighting_factor(xi, r)?;
            errors.push((format!("xi={xi} r={r}"), rel(compact, direct)));
        }
    }
    Ok(Check::from_errors("weighting factor paths agree", PHI_PATH_TOL, &errors))
}

/// Near-unit-`ξ` series against high-precision reference values.
pub fn phi_series_reference() -> Result<Check> {
    let mut errors = Vec::new();
    let ln_r = oracle::PHI_REFERENCE_LN_R;
    for &(u, reference) in &oracle::PHI_NEAR_ONE_REFERENCE {
        errors.push((format!("series u={u}"), (aggregation::weighting_factor_series(u, ln_r) - reference).abs()));
        let xi = 1.0 - u / ln_r;
        let phi = aggregation::weighting_factor(xi, ln_r.exp())?;
        errors.push((format!("public path u={u}"), (phi - reference).abs()));
    }
    let at_one = aggregation::weighting_factor(1.0, ln_r.exp())?;
    errors.push(("xi=1".into(), (at_one - ln_r / 2.0).abs()));
    for side in [-1.0, 1.0] {
        let xi = 1.0 + side * 0.5 * PHI_SERIES_CUTOFF / ln_r;
        let u = (1.0 - xi) * ln_r;
        let phi = aggregation::weighting_factor(xi, ln_r.exp())?;
        errors.push((format!("series band xi={xi}"), (phi - aggregation::weighting_factor_series(u, ln_r)).abs()));
    }
    Ok(Check::from_errors("weighting factor series near xi = 1", PHI_REFERENCE_TOL, &errors))
}

/// `LS + δ·Φ` against `LS + δ·(E[y ln y]/E[y] − ln y_min)`.
pub fn weighting_equivalence() -> Result<Check> {
    let mut errors = Vec::new();
    for &xi in &PHI_XI_GRID {
        if (xi - 1.0_f64).abs() < 1e-6 {
            continue;
        }
        for &r in &PHI_R_GRID {
            for y_min in [0.5, 1.0, 40.0] {
                let d = TruncatedPareto::with_ratio(xi, r, y_min)?;
                for delta in [-0.09, -0.066, 0.0, 0.03] {
                    let a = aggregation::macro_labor_share_from(0.525, delta, &d, MacroEvaluation::WeightingFactor)?;
                    let b = aggregation::macro_labor_share_from(0.525, delta, &d, MacroEvaluation::ExactExpectation)?;
                    errors.push((format!("xi={xi} r={r} y_min={y_min} delta={delta}"), (a - b).abs()));
                }
            }
        }
    }
    Ok(Check::from_errors("weighting factor form equals exact expectation", WEIGHTING_TOL, &errors))
}

/// Hand-worked two-period panel.
pub fn mp_worked_example() -> Result<Check> {
    let p1 = [
        WeightedObs::new("A", 0.5, 0.40),
        WeightedObs::new("B", 0.3, 0.30),
        WeightedObs::new("C", 0.2, 0.50),
    ];
    let p2 = [
        WeightedObs::new("A", 0.6, 0.35),
        WeightedObs::new("B", 0.2, 0.30),
        WeightedObs::new("D", 0.2, 0.45),
    ];
    let mp = melitz_polanec(&p1, &p2)?;
    let errors = [
        ("within".to_string(), (mp.within + 0.025).abs()),
        ("between".to_string(), mp.between.abs()),
        ("exit".to_string(), (mp.exit + 0.0275).abs()),
        ("entry".to_string(), (mp.entry - 0.0225).abs()),
    ];
    Ok(Check::from_errors("decomposition worked example", MP_TOL, &errors))
}

/// Random two-period panels with entry and exit; component sums must equal
/// the total change.
pub fn mp_fuzz(seed: u64, panels: usize) -> Result<Check> {
    let mut g = rng::rng_from_seed(seed);
    let mut errors = Vec::with_capacity(panels);
    for p in 0..panels {
        let pool = g.random_range(2..40usize);
        let mut p1 = Vec::new();
        let mut p2 = Vec::new();
        for id in 0..pool {
            let state = if id == 0 { 0 } else { g.random_range(0..3u8) };
            if state != 2 {
                p1.push(WeightedObs::new(id, g.random_range(0.01..100.0), g.random::<f64>()));
            }
            if state != 1 {
                p2.push(WeightedObs::new(id, g.random_range(0.01..100.0), g.random::<f64>()));
            }
        }
        let mp = melitz_polanec(&p1, &p2)?;
        errors.push((format!("panel {p}"), (mp.component_sum() - mp.total_change).abs()));
    }
    Ok(Check::from_errors("decomposition components sum to total", MP_TOL, &errors))
}

pub const MP_FUZZ_PANELS: usize = 1_000;

pub fn run_all(seed: u64) -> Result<VerifyReport> {
    run_with(seed, MP_FUZZ_PANELS)
}

pub fn run_with(seed: u64, mp_panels: usize) -> Result<VerifyReport> {
    Ok(VerifyReport {
        seed,
        checks: vec![
            quadrature_vs_moments()?,
            aggregation_identity_grid()?,
            phi_properties()?,
            phi_paths_agree()?,
            phi_series_reference()?,
            weighting_equivalence()?,
            mp_worked_example()?,
            mp_fuzz(seed, mp_panels)?,
        ],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_passes() {
        let report = run_all(42).unwrap();
        for c in &report.checks {
            assert!(c.passed, "{c:?}");
            assert!(c.cases > 0);
        }
    }
}
