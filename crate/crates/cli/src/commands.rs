//! One function per subcommand; each returns the `results` payload.

use std::collections::BTreeMap;

use serde_json::{json, Value};
use sizeshare_core::aggregation::{
    self, AggregateTechnology, MacroEvaluation, MicroTechnology, Regularity, TechGradient,
};
use sizeshare_core::decomposition::{self, melitz_polanec, CounterfactualResult, WeightedObs};
use sizeshare_core::distribution::TruncatedPareto;
use sizeshare_core::estimation;
use sizeshare_core::market_structure::{self, FirmRecord, PanelOptions, WeightBasis};
use sizeshare_core::simulation::{self, HypothesisGrid, LsMode, SyntheticSpec};
use sizeshare_core::verify;

use crate::cli::*;
use crate::config::AnalysisConfig;
use crate::error::{CliError, CliResult};
use crate::input;
use crate::report::to_value;

/// Payload plus anything a reader should know about it.
#[derive(Debug, Default)]
pub struct Outcome {
    pub results: Value,
    pub warnings: Vec<String>,
    /// Set when the command ran but its checks did not pass.
    pub failed: bool,
}

impl Outcome {
    fn ok(results: Value) -> Self {
        Self {
            results,
            ..Default::default()
        }
    }
}

fn distribution(xi: f64, y_min: f64, y_max: Option<f64>, r: Option<f64>) -> CliResult<TruncatedPareto> {
    Ok(match (y_max, r) {
        (Some(hi), _) => TruncatedPareto::new(xi, y_min, hi)?,
        (None, Some(r)) => TruncatedPareto::with_ratio(xi, r, y_min)?,
        (None, None) => return Err(CliError::Usage("give --y-max or --r".into())),
    })
}

pub fn moments(args: &MomentsArgs) -> CliResult<Outcome> {
    let d = distribution(args.xi, args.y_min, args.y_max, args.r)?;
    let mut warnings = Vec::new();
    let orders = args
        .a
        .iter()
        .map(|&a| Ok(json!({"a": a, "value": d.moment(a)?})))
        .collect::<CliResult<Vec<_>>>()?;
    let log_weighted = match d.mean_log_weighted() {
        Ok(v) => Some(v),
        Err(e) => {
            warnings.push(format!("E[y ln y] not reported: {e}"));
            None
        }
    };
    Ok(Outcome {
        results: json!({
            "distribution": d,
            "mean": d.mean(),
            "mean_y_log_y": log_weighted,
            "weighting_factor": aggregation::weighting_factor(d.xi(), d.r())?,
            "moments": orders,
        }),
        warnings,
        failed: false,
    })
}

fn outputs_of(records: &[FirmRecord], year: Option<i32>) -> Vec<f64> {
    records
        .iter()
        .filter(|r| year.is_none_or(|y| r.year == y))
        .map(|r| r.output)
        .collect()
}

pub fn fit_tail(args: &FitTailArgs, cfg: &AnalysisConfig) -> CliResult<Outcome> {
    let records = input::parse_firm_csv(&args.input)?;
    let outputs = outputs_of(&records, args.year);
    let mut out = Outcome::default();
    let mut results = serde_json::Map::new();
    results.insert("n_firms".into(), outputs.len().into());
    let want_rank = args.method != TailMethodArg::Hill;
    let want_hill = args.method != TailMethodArg::Rank;
    let strict = args.method != TailMethodArg::Both;
    if want_rank {
        match estimation::rank_regression_tail_top(&outputs, args.top_fraction) {
            Ok(fit) => {
                results.insert("rank_regression".into(), to_value(&fit));
            }
            Err(e) if !strict => out.warnings.push(format!("rank regression: {e}")),
            Err(e) => return Err(e.into()),
        }
    }
    if want_hill {
        match estimation::hill_tail(&outputs, cfg.hill_k_fraction) {
            Ok(fit) => {
                results.insert("hill".into(), to_value(&fit));
            }
            Err(e) if !strict => out.warnings.push(format!("hill: {e}")),
            Err(e) => return Err(e.into()),
        }
    }
    if !results.contains_key("rank_regression") && !results.contains_key("hill") {
        return Err(CliError::Compute(sizeshare_core::Error::DegenerateTail));
    }
    out.results = Value::Object(results);
    Ok(out)
}

pub fn aggregate(args: &AggregateArgs, cfg: &AnalysisConfig) -> CliResult<Outcome> {
    let physical = |given: Option<f64>, raw: Option<f64>, name: &str| -> CliResult<f64> {
        match (given, raw) {
            (Some(v), _) => Ok(v),
            (None, Some(raw)) => Ok(aggregation::physical_elasticity_correction(raw, cfg.sigma)?),
            (None, None) => Err(CliError::Usage(format!("give --{name} or --raw-{name}"))),
        }
    };
    let beta = physical(args.beta, args.raw_beta, "beta")?;
    let gamma = physical(args.gamma, args.raw_gamma, "gamma")?;
    let tech = MicroTechnology::elasticities(beta, gamma)?;
    let regularity = tech.regularity();
    let mut warnings = Vec::new();
    if regularity != Regularity::Regular {
        warnings.push(format!("technology is {regularity:?}: gamma > 1 > beta > 0 does not hold"));
    }
    let mut results = json!({
        "sigma": cfg.sigma,
        "raw": {"beta": args.raw_beta, "gamma": args.raw_gamma},
        "physical": {"beta": beta, "gamma": gamma},
        "theta": aggregation::derive_theta(beta, gamma)?,
        "labor_share": aggregation::derive_labor_share(beta, gamma)?,
        "regularity": regularity,
    });
    if let (Some(xi), Some(r)) = (args.xi, args.r) {
        let d = TruncatedPareto::with_ratio(xi, r, args.y_min)?;
        let delta = args.delta.unwrap_or(0.0);
        let grad = if delta == 0.0 {
            TechGradient::homogeneous()
        } else {
            TechGradient::for_delta(&tech, delta)?
        };
        let agg = AggregateTechnology::derive(&tech, &grad, &d)?;
        let totals = aggregation::aggregate_exact(&tech, &d, args.n_firms)?;
        results["distribution"] = to_value(&d);
        results["constants"] = to_value(&aggregation::derive_constants(&tech, &d)?);
        results["aggregate"] = to_value(&agg);
        results["gradient"] = to_value(&grad);
        results["totals"] = to_value(&totals);
        results["identity_error"] = totals.cobb_douglas_residual(agg.tfp, agg.theta).into();
    }
    Ok(Outcome {
        results,
        warnings,
        failed: false,
    })
}

pub fn weighting(args: &WeightingArgs) -> CliResult<Outcome> {
    let d = TruncatedPareto::with_ratio(args.xi, args.r, args.y_min)?;
    let phi = aggregation::weighting_factor(args.xi, args.r)?;
    let via_phi = aggregation::macro_labor_share_from(args.ls, args.delta, &d, MacroEvaluation::WeightingFactor)?;
    let mut warnings = Vec::new();
    let exact = match aggregation::macro_labor_share_from(args.ls, args.delta, &d, MacroEvaluation::ExactExpectation) {
        Ok(v) => Some(v),
        Err(e) => {
            warnings.push(format!("exact-expectation form not reported: {e}"));
            None
        }
    };
    Ok(Outcome {
        results: json!({
            "weighting_factor": phi,
            "macro_labor_share": via_phi,
            "macro_labor_share_exact": exact,
            "weighting_effect": via_phi - args.ls,
        }),
        warnings,
        failed: false,
    })
}

fn parse_periods(specs: &[String]) -> CliResult<BTreeMap<i32, String>> {
    specs
        .iter()
        .map(|s| {
            let (y, label) = s
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("--period expects YEAR=LABEL, got {s:?}")))?;
            let year = y
                .trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("--period year {y:?} is not an integer")))?;
            Ok((year, label.trim().to_string()))
        })
        .collect()
}

pub fn panel(args: &PanelArgs, cfg: &AnalysisConfig) -> CliResult<Outcome> {
    let records = input::parse_firm_csv(&args.input)?;
    let opts = PanelOptions {
        min_cell_size: cfg.min_cell_size,
        basis: cfg.basis,
        weights: match args.weights {
            WeightArg::Output => WeightBasis::Output,
            WeightArg::ValueAdded => WeightBasis::ValueAdded,
        },
        winsorize: cfg.winsorize,
        period_map: parse_periods(&args.periods)?,
    };
    let panel = market_structure::build_panel(&records, &opts)?;
    let mut warnings = Vec::new();
    if panel.dropped_cells > 0 {
        warnings.push(format!(
            "dropped {} cell(s) with {} firm(s) below the minimum cell size {}",
            panel.dropped_cells, panel.dropped_firms, cfg.min_cell_size
        ));
    }
    if panel.ls_above_one > 0 {
        warnings.push(format!("{} firm(s) have a labor share above 1", panel.ls_above_one));
    }
    let no_alpha = panel.cells.iter().filter(|c| c.alpha_hat.is_none()).count();
    if no_alpha > 0 {
        warnings.push(format!("{no_alpha} cell(s) have no tail index (outputs do not vary)"));
    }
    let instruments: Vec<Value> = market_structure::leave_one_out_instruments(&panel.cells)
        .into_iter()
        .map(|(key, v)| json!({"region": key.region, "industry": key.industry, "period": key.period, "alpha_leave_one_out": v}))
        .collect();

    // firm-level gradient within cells
    let kept: std::collections::HashSet<_> = panel
        .cells
        .iter()
        .map(|c| (c.key.region.clone(), c.key.industry.clone(), c.key.period.clone()))
        .collect();
    let mut shares = Vec::new();
    let mut outputs = Vec::new();
    let mut groups = Vec::new();
    for r in &records {
        let period = opts.period_map.get(&r.year).cloned().unwrap_or_else(|| r.year.to_string());
        let key = (r.region.clone(), r.industry.clone(), period);
        if kept.contains(&key) {
            shares.push(market_structure::labor_share(r, cfg.basis)?);
            outputs.push(r.output);
            groups.push(key);
        }
    }
    let gradient = if panel.cells.len() > 1 {
        estimation::estimate_scale_share_gradient(&shares, &outputs, Some(&groups))
    } else {
        estimation::estimate_scale_share_gradient::<u8>(&shares, &outputs, None)
    };
    let gradient = match gradient {
        Ok(fit) => to_value(&fit),
        Err(e) => {
            warnings.push(format!("scale-share gradient not reported: {e}"));
            Value::Null
        }
    };
    Ok(Outcome {
        results: json!({
            "n_firms": records.len(),
            "n_cells": panel.cells.len(),
            "dropped_cells": panel.dropped_cells,
            "dropped_firms": panel.dropped_firms,
            "ls_above_one": panel.ls_above_one,
            "scale_share_gradient": gradient,
            "cells": panel.cells,
            "instruments": instruments,
        }),
        warnings,
        failed: false,
    })
}

pub fn decompose(args: &DecomposeArgs, cfg: &AnalysisConfig) -> CliResult<Outcome> {
    let records = input::parse_firm_csv(&args.input)?;
    let period = |year: i32| -> CliResult<Vec<WeightedObs<String>>> {
        let obs = records
            .iter()
            .filter(|r| r.year == year)
            .map(|r| Ok(WeightedObs::new(r.firm_id.clone(), r.output, market_structure::labor_share(r, cfg.basis)?)))
            .collect::<CliResult<Vec<_>>>()?;
        if obs.is_empty() {
            return Err(CliError::Compute(sizeshare_core::Error::Empty("period has no firms")));
        }
        Ok(obs)
    };
    let (p1, p2) = (period(args.from)?, period(args.to)?);
    let mp = melitz_polanec(&p1, &p2)?;
    let ids1: std::collections::HashSet<_> = p1.iter().map(|o| &o.id).collect();
    let ids2: std::collections::HashSet<_> = p2.iter().map(|o| &o.id).collect();
    Ok(Outcome::ok(json!({
        "components": mp,
        "component_sum": mp.component_sum(),
        "survivors": ids1.intersection(&ids2).count(),
        "exiters": ids1.difference(&ids2).count(),
        "entrants": ids2.difference(&ids1).count(),
    })))
}

pub fn counterfactual(args: &CounterfactualArgs) -> CliResult<Outcome> {
    let result: CounterfactualResult = match (args.contribution, args.coef, args.alpha_start, args.alpha_end) {
        (Some(c), _, _, _) => CounterfactualResult::from_contribution(args.total, c),
        (None, Some(coef), Some(a0), Some(a1)) => decomposition::counterfactual_contribution(args.total, coef, a0, a1),
        _ => {
            return Err(CliError::Usage(
                "give --contribution, or --coef with --alpha-start and --alpha-end".into(),
            ))
        }
    };
    let mut out = Outcome::ok(to_value(&result));
    if result.distribution_share.is_none() {
        out.warnings.push("total change is zero; shares are not reported".into());
    }
    Ok(out)
}

fn synthetic_spec(args: &SimulateArgs, seed: u64) -> CliResult<SyntheticSpec> {
    let d = TruncatedPareto::with_ratio(args.xi, args.r, args.y_min)?;
    let tech = MicroTechnology::elasticities(args.beta, args.gamma)?;
    let grad = match (args.delta, args.b, args.g) {
        (Some(delta), _, _) => TechGradient::for_delta(&tech, delta)?,
        (None, b, g) => TechGradient::new(b.unwrap_or(0.0), g.unwrap_or(0.0))?,
    };
    let mut spec = SyntheticSpec::new(d, tech, args.n, seed)
        .with_gradient(grad)
        .with_noise(args.noise_labor, args.noise_capital, args.noise_ls)
        .with_ls_mode(match args.ls_mode {
            LsModeArg::FromGradient => LsMode::FromGradient,
            LsModeArg::FromFactors => LsMode::FromFactors,
        });
    spec.region = args.region.clone();
    spec.industry = args.industry.clone();
    spec.year = args.year;
    spec.validate()?;
    Ok(spec)
}

pub fn simulate(args: &SimulateArgs, cfg: &AnalysisConfig) -> CliResult<Outcome> {
    let spec = synthetic_spec(args, cfg.seed)?;
    let mut out = Outcome::default();
    if spec.ls_mode == LsMode::FromFactors {
        out.warnings.push(format!(
            "value added uses the calibration intermediate share {}",
            spec.intermediate_share
        ));
    }
    let check = match args.check {
        CheckArg::None => Value::Null,
        CheckArg::Aggregation => to_value(&simulation::mc_verify_aggregation(&spec)?),
        CheckArg::Weighting => {
            let w = simulation::mc_verify_weighting(&spec)?;
            let mut v = to_value(&w);
            v["z_score"] = w.z_score().into();
            v["identity_gap"] = w.identity_gap().into();
            v
        }
        CheckArg::Hypotheses => {
            let grid = HypothesisGrid::standard(vec![0.0, -0.03, -0.09], cfg.seed);
            to_value(&simulation::hypothesis_suite(&grid)?)
        }
    };
    let pop = simulation::generate_population(&spec)?;
    if let Some(path) = &args.export {
        let file = std::fs::File::create(path).map_err(|e| CliError::io(path.display(), e))?;
        input::write_firm_csv(&pop.records, std::io::BufWriter::new(file))?;
    }
    let recs = &pop.records;
    let outputs: Vec<f64> = recs.iter().map(|r| r.output).collect();
    let labor: Vec<f64> = recs.iter().map(|r| r.labor).collect();
    let capital: Vec<f64> = recs.iter().map(|r| r.capital).collect();
    let shares = recs
        .iter()
        .map(|r| market_structure::labor_share(r, cfg.basis))
        .collect::<sizeshare_core::Result<Vec<_>>>()?;
    let estimate = |r: sizeshare_core::Result<Value>, what: &str, warnings: &mut Vec<String>| match r {
        Ok(v) => v,
        Err(e) => {
            warnings.push(format!("{what}: {e}"));
            Value::Null
        }
    };
    let w = &mut out.warnings;
    let estimates = json!({
        "rank_regression": estimate(estimation::rank_regression_tail(&outputs).map(|f| to_value(&f)), "rank regression", w),
        "hill": estimate(estimation::hill_tail(&outputs, cfg.hill_k_fraction).map(|f| to_value(&f)), "hill", w),
        "beta": estimate(estimation::ols_loglog(&outputs, &labor).map(|f| to_value(&f)), "beta", w),
        "gamma": estimate(estimation::ols_loglog(&outputs, &capital).map(|f| to_value(&f)), "gamma", w),
        "scale_share_gradient": estimate(
            estimation::estimate_scale_share_gradient::<u8>(&shares, &outputs, None).map(|f| to_value(&f)),
            "scale-share gradient",
            w,
        ),
        "weighted_labor_share": market_structure::weighted_labor_share(recs, cfg.basis)?,
        "unweighted_labor_share": shares.iter().sum::<f64>() / shares.len() as f64,
    });
    let failed = match args.check {
        CheckArg::Aggregation => check["exact_relative_error"].as_f64().is_none_or(|e| e > verify::IDENTITY_TOL),
        CheckArg::Weighting => check["identity_gap"].as_f64().is_none_or(|g| g > verify::WEIGHTING_TOL),
        _ => false,
    };
    out.failed = failed;
    out.results = json!({
        "planted": {
            "spec": spec,
            "delta": spec.delta()?,
            "theta": aggregation::derive_theta(args.beta, args.gamma)?,
            "labor_share": aggregation::derive_labor_share(args.beta, args.gamma)?,
            "weighting_factor": aggregation::weighting_factor(args.xi, args.r)?,
        },
        "generator": sizeshare_core::rng::GENERATOR_NAME,
        "n_firms": recs.len(),
        "estimates": estimates,
        "check": check,
        "exported_to": args.export.as_ref().map(|p| p.display().to_string()),
    });
    Ok(out)
}

pub fn verify(args: &VerifyArgs, cfg: &AnalysisConfig) -> CliResult<Outcome> {
    let report = verify::run_with(cfg.seed, args.mp_panels)?;
    let mut out = Outcome::ok(to_value(&report));
    for c in report.checks.iter().filter(|c| !c.passed) {
        out.warnings.push(format!("check failed: {} (worst {}, {})", c.name, c.worst, c.detail));
    }
    out.failed = !report.all_passed();
    Ok(out)
}
