//! Firm records, concentration and inequality indices, panel-cell
//! construction and the leave-one-out instrument.

use std::collections::BTreeMap;

use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation;

pub const DEFAULT_MIN_CELL_SIZE: usize = 30;
pub const MIN_CELL_SIZE_FLOOR: usize = 10;

/// One firm-year observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FirmRecord {
    pub firm_id: String,
    pub year: i32,
    pub region: String,
    pub industry: String,
    pub output: f64,
    pub labor: f64,
    pub capital: f64,
    pub wage_bill: f64,
    #[serde(default)]
    pub value_added: Option<f64>,
}

impl FirmRecord {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &'static str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidParameter {
                    name,
                    value: v,
                    reason: "must be positive",
                })
            }
        };
        positive("output", self.output)?;
        positive("labor", self.labor)?;
        positive("capital", self.capital)?;
        if !(self.wage_bill.is_finite() && self.wage_bill >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "wage_bill",
                value: self.wage_bill,
                reason: "must be nonnegative",
            });
        }
        if let Some(va) = self.value_added {
            positive("value_added", va)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LsBasis {
    #[default]
    ValueAdded,
    Output,
}

/// Which firm size weights the aggregate share.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightBasis {
    #[default]
    Output,
    ValueAdded,
}

/// Wages over value added or over gross output. Values above 1 are legal.
pub fn labor_share(firm: &FirmRecord, basis: LsBasis) -> Result<f64> {
    let denom = match basis {
        LsBasis::Output => firm.output,
        LsBasis::ValueAdded => firm.value_added.ok_or_else(|| Error::MissingField {
            field: "value_added",
            firm_id: firm.firm_id.clone(),
        })?,
    };
    Ok(firm.wage_bill / denom)
}

fn weight_of(firm: &FirmRecord, weights: WeightBasis) -> Result<f64> {
    match weights {
        WeightBasis::Output => Ok(firm.output),
        WeightBasis::ValueAdded => firm.value_added.ok_or_else(|| Error::MissingField {
            field: "value_added",
            firm_id: firm.firm_id.clone(),
        }),
    }
}

/// `Σ LS_i·Y_i / Σ Y_i`.
pub fn weighted_labor_share(firms: &[FirmRecord], basis: LsBasis) -> Result<f64> {
    weighted_labor_share_with(firms, basis, WeightBasis::Output)
}

pub fn weighted_labor_share_with(firms: &[FirmRecord], basis: LsBasis, weights: WeightBasis) -> Result<f64> {
    if firms.is_empty() {
        return Err(Error::Empty("firms"));
    }
    let shares = firms
        .iter()
        .map(|f| labor_share(f, basis))
        .collect::<Result<Vec<_>>>()?;
    let w = firms
        .iter()
        .map(|f| weight_of(f, weights))
        .collect::<Result<Vec<_>>>()?;
    Ok(weighted_mean(&shares, &w))
}

fn weighted_mean(values: &[f64], weights: &[f64]) -> f64 {
    let total: f64 = weights.iter().sum();
    values.iter().zip(weights).map(|(v, w)| v * w).sum::<f64>() / total
}

fn check_outputs(outputs: &[f64]) -> Result<f64> {
    if outputs.is_empty() {
        return Err(Error::Empty("outputs"));
    }
    if let Some(&bad) = outputs.iter().find(|&&y| !(y.is_finite() && y > 0.0)) {
        return Err(Error::domain(format!("outputs must be positive, found {bad}")));
    }
    Ok(outputs.iter().sum())
}

/// Herfindahl–Hirschman index `Σ s_i²`.
pub fn hhi(outputs: &[f64]) -> Result<f64> {
    let total = check_outputs(outputs)?;
    Ok(outputs.iter().map(|y| (y / total).powi(2)).sum())
}

/// Sum of the four largest market shares (all shares when fewer than four).
pub fn cr4(outputs: &[f64]) -> Result<f64> {
    let total = check_outputs(outputs)?;
    let mut v = outputs.to_vec();
    v.sort_by(|a, b| b.total_cmp(a));
    Ok((v.iter().take(4).sum::<f64>() / total).min(1.0))
}

/// Gini index via the sorted-rank identity
/// `Σ_i Σ_j |x_i − x_j| = 2·Σ_i (2i − n − 1)·x_(i)`.
pub fn gini(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Empty("values"));
    }
    if let Some(&bad) = values.iter().find(|&&v| !(v.is_finite() && v >= 0.0)) {
        return Err(Error::domain(format!("gini needs nonnegative values, found {bad}")));
    }
    let total: f64 = values.iter().sum();
    if total <= 0.0 {
        return Err(Error::domain("gini is undefined when every value is zero"));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let weighted: f64 = v
        .iter()
        .enumerate()
        .map(|(i, x)| (2.0 * (i as f64 + 1.0) - n - 1.0) * x)
        .sum();
    Ok((weighted / (n * total)).max(0.0))
}

/// Clamp values to their 1st and 99th percentiles (linear interpolation).
pub fn winsorize(values: &[f64]) -> Vec<f64> {
    if values.len() < 2 {
        return values.to_vec();
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q = |p: f64| {
        let h = p * (sorted.len() - 1) as f64;
        let lo = h.floor() as usize;
        let hi = h.ceil() as usize;
        sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
    };
    let (lo, hi) = (q(0.01), q(0.99));
    values.iter().map(|v| v.clamp(lo, hi)).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct CellKey {
    pub region: String,
    pub industry: String,
    pub period: String,
}

/// One region × industry × period aggregate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PanelCell {
    #[serde(flatten)]
    pub key: CellKey,
    pub weighted_ls: f64,
    pub unweighted_ls: f64,
    /// Rank-regression tail index; `None` when outputs do not vary.
    pub alpha_hat: Option<f64>,
    pub hhi: f64,
    pub cr4: f64,
    pub gini: f64,
    pub n_firms: usize,
    pub mean_size: f64,
    pub total_output: f64,
    pub ls_above_one: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelOptions {
    pub min_cell_size: usize,
    pub basis: LsBasis,
    pub weights: WeightBasis,
    pub winsorize: bool,
    /// Year → period label; unmapped years keep their own label.
    pub period_map: BTreeMap<i32, String>,
}

impl Default for PanelOptions {
    fn default() -> Self {
        Self {
            min_cell_size: DEFAULT_MIN_CELL_SIZE,
            basis: LsBasis::ValueAdded,
            weights: WeightBasis::Output,
            winsorize: false,
            period_map: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Panel {
    pub cells: Vec<PanelCell>,
    pub dropped_cells: usize,
    pub dropped_firms: usize,
    pub ls_above_one: usize,
}

fn build_cell(key: CellKey, firms: &[&FirmRecord], opts: &PanelOptions) -> Result<PanelCell> {
    let mut shares = firms
        .iter()
        .map(|f| labor_share(f, opts.basis))
        .collect::<Result<Vec<_>>>()?;
    let ls_above_one = shares.iter().filter(|&&s| s > 1.0).count();
    if opts.winsorize {
        shares = winsorize(&shares);
    }
    let weights = firms
        .iter()
        .map(|f| weight_of(f, opts.weights))
        .collect::<Result<Vec<_>>>()?;
    let outputs: Vec<f64> = firms.iter().map(|f| f.output).collect();
    let total_output: f64 = outputs.iter().sum();
    let n = firms.len();
    Ok(PanelCell {
        key,
        weighted_ls: weighted_mean(&shares, &weights),
        unweighted_ls: shares.iter().sum::<f64>() / n as f64,
        alpha_hat: estimation::rank_regression_tail(&outputs).ok().map(|f| f.alpha_hat),
        hhi: hhi(&outputs)?,
        cr4: cr4(&outputs)?,
        gini: gini(&outputs)?,
        n_firms: n,
        mean_size: total_output / n as f64,
        total_output,
        ls_above_one,
    })
}

/// Group firms into region × industry × period cells, drop cells below
/// `min_cell_size`, and compute each cell's aggregates. Cells come back
/// sorted by key.
pub fn build_panel(records: &[FirmRecord], opts: &PanelOptions) -> Result<Panel> {
    if opts.min_cell_size < MIN_CELL_SIZE_FLOOR {
        return Err(Error::InvalidParameter {
            name: "min_cell_size",
            value: opts.min_cell_size as f64,
            reason: "cells need at least 10 firms for the tail regression",
        });
    }
    let mut groups: BTreeMap<CellKey, Vec<&FirmRecord>> = BTreeMap::new();
    for r in records {
        let period = opts
            .period_map
            .get(&r.year)
            .cloned()
            .unwrap_or_else(|| r.year.to_string());
        let key = CellKey {
            region: r.region.clone(),
            industry: r.industry.clone(),
            period,
        };
        groups.entry(key).or_default().push(r);
    }
    let (kept, dropped): (Vec<_>, Vec<_>) = groups
        .into_iter()
        .partition(|(_, firms)| firms.len() >= opts.min_cell_size);
    let dropped_firms = dropped.iter().map(|(_, f)| f.len()).sum();
    if !dropped.is_empty() {
        info!(
            "dropped {} cells ({} firms) below {} firms",
            dropped.len(),
            dropped_firms,
            opts.min_cell_size
        );
    }
    let cells = kept
        .into_par_iter()
        .map(|(key, firms)| build_cell(key, &firms, opts))
        .collect::<Result<Vec<_>>>()?;
    let ls_above_one = cells.iter().map(|c| c.ls_above_one).sum();
    Ok(Panel {
        cells,
        dropped_cells: dropped.len(),
        dropped_firms,
        ls_above_one,
    })
}

/// Output-weighted mean of `alpha_hat` over the cells of one
/// industry-period, leaving out `exclude_region`.
pub fn leave_one_out_mean(cells: &[PanelCell], exclude_region: &str) -> Result<f64> {
    leave_one_out_mean_within(cells, exclude_region, |_| true)
}

/// As [`leave_one_out_mean`] but restricted to cells accepted by `pool`
/// (e.g. regions of the same province).
pub fn leave_one_out_mean_within<F: Fn(&PanelCell) -> bool>(
    cells: &[PanelCell],
    exclude_region: &str,
    pool: F,
) -> Result<f64> {
    if cells.len() < 2 {
        return Err(Error::InsufficientSample {
            needed: 2,
            got: cells.len(),
        });
    }
    let first = &cells[0].key;
    if cells
        .iter()
        .any(|c| c.key.industry != first.industry || c.key.period != first.period)
    {
        return Err(Error::domain("leave-one-out pool must share one industry-period"));
    }
    if !cells.iter().any(|c| c.key.region == exclude_region) {
        return Err(Error::KeyNotFound(exclude_region.to_string()));
    }
    let (num, den) = cells
        .iter()
        .filter(|c| c.key.region != exclude_region && pool(c))
        .filter_map(|c| c.alpha_hat.map(|a| (a, c.total_output)))
        .fold((0.0, 0.0), |(n, d), (a, y)| (n + a * y, d + y));
    if den <= 0.0 {
        return Err(Error::Empty("leave-one-out pool"));
    }
    Ok(num / den)
}

/// Leave-one-out instrument for every cell that has at least one peer.
pub fn leave_one_out_instruments(cells: &[PanelCell]) -> Vec<(CellKey, f64)> {
    let mut by_market: BTreeMap<(&str, &str), Vec<PanelCell>> = BTreeMap::new();
    for c in cells {
        by_market
            .entry((c.key.industry.as_str(), c.key.period.as_str()))
            .or_default()
            .push(c.clone());
    }
    let mut out = Vec::new();
    for group in by_market.values() {
        for c in group {
            if let Ok(v) = leave_one_out_mean(group, &c.key.region) {
                out.push((c.key.clone(), v));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn firm(id: &str, output: f64, wage_bill: f64, value_added: Option<f64>) -> FirmRecord {
        FirmRecord {
            firm_id: id.into(),
            year: 2000,
            region: "r1".into(),
            industry: "i1".into(),
            output,
            labor: 10.0,
            capital: 20.0,
            wage_bill,
            value_added,
        }
    }

    #[test]
    fn labor_share_examples() {
        assert_relative_eq!(labor_share(&firm("a", 300.0, 31.0, Some(100.0)), LsBasis::ValueAdded).unwrap(), 0.31);
        assert_eq!(labor_share(&firm("a", 300.0, 0.0, Some(100.0)), LsBasis::ValueAdded).unwrap(), 0.0);
        assert_relative_eq!(labor_share(&firm("a", 100.0, 6.8, None), LsBasis::Output).unwrap(), 0.068);
        assert!(matches!(
            labor_share(&firm("a", 100.0, 6.8, None), LsBasis::ValueAdded),
            Err(Error::MissingField { .. })
        ));
        assert!(labor_share(&firm("a", 100.0, 150.0, Some(100.0)), LsBasis::ValueAdded).unwrap() > 1.0);
    }

    #[test]
    fn validation() {
        assert!(firm("a", 1.0, 0.0, None).validate().is_ok());
        assert!(firm("a", 0.0, 0.0, None).validate().is_err());
        assert!(firm("a", 1.0, -1.0, None).validate().is_err());
        assert!(firm("a", 1.0, 1.0, Some(0.0)).validate().is_err());
    }

    #[test]
    fn weighted_share_examples() {
        let one = [firm("a", 5.0, 2.0, None)];
        assert_relative_eq!(weighted_labor_share(&one, LsBasis::Output).unwrap(), 0.4);
        let two = [firm("a", 3.0, 1.2, None), firm("b", 1.0, 0.2, None)];
        assert_relative_eq!(weighted_labor_share(&two, LsBasis::Output).unwrap(), 0.35, epsilon = 1e-15);
        let equal = [firm("a", 2.0, 0.2, None), firm("b", 2.0, 1.0, None), firm("c", 2.0, 0.6, None)];
        assert_relative_eq!(weighted_labor_share(&equal, LsBasis::Output).unwrap(), 0.3, epsilon = 1e-15);
        assert!(weighted_labor_share(&[], LsBasis::Output).is_err());
    }

    #[test]
    fn concentration_examples() {
        assert_relative_eq!(hhi(&[5.0; 8]).unwrap(), 1.0 / 8.0, epsilon = 1e-15);
        let shares = [0.4, 0.3, 0.2, 0.1];
        assert_relative_eq!(hhi(&shares).unwrap(), 0.30, epsilon = 1e-15);
        assert_relative_eq!(cr4(&shares).unwrap(), 1.0, epsilon = 1e-15);
        assert_eq!(hhi(&[7.0]).unwrap(), 1.0);
        assert_eq!(cr4(&[7.0]).unwrap(), 1.0);
        assert_relative_eq!(cr4(&[1.0, 1.0, 1.0, 1.0, 1.0, 5.0]).unwrap(), 0.8);
        assert!(hhi(&[]).is_err());
        assert!(cr4(&[1.0, 0.0]).is_err());
    }

    #[test]
    fn gini_examples() {
        assert_eq!(gini(&[3.0; 10]).unwrap(), 0.0);
        assert_relative_eq!(gini(&[1.0, 3.0]).unwrap(), 0.25, epsilon = 1e-15);
        assert_relative_eq!(oracle::gini_double_sum(&[1.0, 3.0]), 0.25, epsilon = 1e-15);
        assert!(gini(&[0.0, 0.0]).is_err());
        assert!(gini(&[]).is_err());
        assert!(gini(&[1.0, -1.0]).is_err());
        assert_eq!(gini(&[0.0, 0.0, 5.0]).unwrap(), oracle::gini_double_sum(&[0.0, 0.0, 5.0]));
    }

    proptest! {
        #[test]
        fn gini_matches_double_sum(v in prop::collection::vec(0.0f64..1e3, 1..500)) {
            prop_assume!(v.iter().sum::<f64>() > 0.0);
            let fast = gini(&v).unwrap();
            prop_assert!((fast - oracle::gini_double_sum(&v)).abs() < 1e-10);
        }

        #[test]
        fn indices_bounded_and_scale_invariant(
            v in prop::collection::vec(1e-3f64..1e4, 1..200),
            c in 1e-3f64..1e3,
        ) {
            let n = v.len() as f64;
            let h = hhi(&v).unwrap();
            let k = cr4(&v).unwrap();
            let g = gini(&v).unwrap();
            prop_assert!(h >= 1.0 / n - 1e-12 && h <= 1.0 + 1e-12);
            prop_assert!(k > 0.0 && k <= 1.0);
            prop_assert!((0.0..1.0).contains(&g));
            let s: Vec<f64> = v.iter().map(|x| x * c).collect();
            prop_assert!((hhi(&s).unwrap() - h).abs() < 1e-12);
            prop_assert!((cr4(&s).unwrap() - k).abs() < 1e-12);
            prop_assert!((gini(&s).unwrap() - g).abs() < 1e-12);
        }

        #[test]
        fn weighted_share_within_range(
            rows in prop::collection::vec((1e-2f64..1e4, 0.0f64..2.0), 1..100),
        ) {
            let firms: Vec<FirmRecord> = rows
                .iter()
                .enumerate()
                .map(|(i, &(y, ls))| firm(&i.to_string(), y, ls * y, None))
                .collect();
            let w = weighted_labor_share(&firms, LsBasis::Output).unwrap();
            let lo = rows.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
            let hi = rows.iter().map(|r| r.1).fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(w >= lo - 1e-12 && w <= hi + 1e-12);
        }
    }

    fn cell_of(region: &str, n: usize, output: impl Fn(usize) -> f64) -> Vec<FirmRecord> {
        (0..n)
            .map(|i| {
                let y = output(i);
                FirmRecord {
                    firm_id: format!("{region}-{i}"),
                    year: 2001,
                    region: region.into(),
                    industry: "c13".into(),
                    output: y,
                    labor: 1.0,
                    capital: 1.0,
                    wage_bill: 0.3 * y,
                    value_added: Some(y),
                }
            })
            .collect()
    }

    #[test]
    fn panel_identical_firms() {
        let panel = build_panel(&cell_of("a", 30, |_| 50.0), &PanelOptions::default()).unwrap();
        assert_eq!(panel.cells.len(), 1);
        let c = &panel.cells[0];
        assert_relative_eq!(c.hhi, 1.0 / 30.0, epsilon = 1e-15);
        assert_eq!(c.gini, 0.0);
        assert_relative_eq!(c.weighted_ls, 0.3, epsilon = 1e-15);
        assert_eq!(c.alpha_hat, None);
        assert_eq!(c.n_firms, 30);
        assert_eq!(c.key.period, "2001");
    }

    #[test]
    fn panel_drops_small_cells() {
        let mut records = cell_of("a", 29, |i| 1.0 + i as f64);
        records.extend(cell_of("b", 31, |i| 1.0 + i as f64));
        let panel = build_panel(&records, &PanelOptions::default()).unwrap();
        assert_eq!(panel.dropped_cells, 1);
        assert_eq!(panel.dropped_firms, 29);
        assert_eq!(panel.cells.len(), 1);
        assert_eq!(panel.cells[0].key.region, "b");

        let opts = PanelOptions {
            min_cell_size: 5,
            ..PanelOptions::default()
        };
        assert!(build_panel(&records, &opts).is_err());
    }

    #[test]
    fn panel_period_map_and_flags() {
        let mut records = cell_of("a", 15, |i| 1.0 + i as f64);
        for (i, r) in records.iter_mut().enumerate() {
            r.year = 1998 + (i % 2) as i32;
        }
        records[0].wage_bill = 2.0 * records[0].value_added.unwrap();
        let opts = PanelOptions {
            min_cell_size: 10,
            period_map: BTreeMap::from([(1998, "P1".to_string()), (1999, "P1".to_string())]),
            ..PanelOptions::default()
        };
        let panel = build_panel(&records, &opts).unwrap();
        assert_eq!(panel.cells.len(), 1);
        assert_eq!(panel.cells[0].key.period, "P1");
        assert_eq!(panel.ls_above_one, 1);

        let wins = build_panel(&records, &PanelOptions { winsorize: true, ..opts }).unwrap();
        assert!(wins.cells[0].weighted_ls < panel.cells[0].weighted_ls);
    }

    #[test]
    fn winsorize_clamps_extremes() {
        let mut v: Vec<f64> = (0..101).map(|i| i as f64).collect();
        v[100] = 1e6;
        let w = winsorize(&v);
        assert!(w[100] < 1e6);
        assert_eq!(w[50], 50.0);
        assert!(w[0] > 0.0);
    }

    fn simple_cell(region: &str, alpha: f64, total_output: f64) -> PanelCell {
        PanelCell {
            key: CellKey {
                region: region.into(),
                industry: "c13".into(),
                period: "2001".into(),
            },
            weighted_ls: 0.3,
            unweighted_ls: 0.3,
            alpha_hat: Some(alpha),
            hhi: 0.1,
            cr4: 0.3,
            gini: 0.4,
            n_firms: 30,
            mean_size: total_output / 30.0,
            total_output,
            ls_above_one: 0,
        }
    }

    #[test]
    fn leave_one_out_examples() {
        let two = [simple_cell("a", 0.8, 10.0), simple_cell("b", 1.1, 20.0)];
        assert_eq!(leave_one_out_mean(&two, "a").unwrap(), 1.1);

        let three = [
            simple_cell("a", 0.8, 5.0),
            simple_cell("b", 0.9, 5.0),
            simple_cell("c", 1.0, 5.0),
        ];
        assert_relative_eq!(leave_one_out_mean(&three, "a").unwrap(), 0.95, epsilon = 1e-15);

        let mut perturbed = three.clone();
        perturbed[0].alpha_hat = Some(7.0);
        perturbed[0].total_output = 1e6;
        assert_eq!(
            leave_one_out_mean(&perturbed, "a").unwrap(),
            leave_one_out_mean(&three, "a").unwrap()
        );

        let only_c = leave_one_out_mean_within(&three, "a", |c| c.key.region == "c").unwrap();
        assert_eq!(only_c, 1.0);
        assert!(leave_one_out_mean_within(&three, "a", |_| false).is_err());
        assert!(leave_one_out_mean(&three, "zz").is_err());
        assert!(leave_one_out_mean(&three[..1], "a").is_err());

        let mut mixed = three.clone();
        mixed[2].key.industry = "c14".into();
        assert!(leave_one_out_mean(&mixed, "a").is_err());

        let iv = leave_one_out_instruments(&three);
        assert_eq!(iv.len(), 3);
        assert_relative_eq!(iv[0].1, 0.95, epsilon = 1e-15);
    }
}
