//! Melitz–Polanec dynamic decomposition and the counterfactual split of a
//! labor-share change.

use std::collections::HashSet;
use std::hash::Hash;

use serde::Serialize;

use crate::error::{Error, Result};

/// Below this magnitude a total change is treated as zero and shares are
/// not reported.
pub const ZERO_TOTAL_EPS: f64 = 1e-9;

/// A firm's weight (market share, any positive scale) and share value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightedObs<K> {
    pub id: K,
    pub weight: f64,
    pub value: f64,
}

impl<K> WeightedObs<K> {
    pub fn new(id: K, weight: f64, value: f64) -> Self {
        Self { id, weight, value }
    }
}

/// Components sum to `total_change`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MPComponents {
    pub total_change: f64,
    pub within: f64,
    pub between: f64,
    pub exit: f64,
    pub entry: f64,
    pub aggregate_start: f64,
    pub aggregate_end: f64,
}

impl MPComponents {
    pub fn component_sum(&self) -> f64 {
        self.within + self.between + self.exit + self.entry
    }
}

#[derive(Default)]
struct Group {
    weight: f64,
    weighted_value: f64,
    plain_sum: f64,
    count: usize,
}

impl Group {
    fn add(&mut self, w: f64, v: f64) {
        self.weight += w;
        self.weighted_value += w * v;
        self.plain_sum += v;
        self.count += 1;
    }

    /// Weighted group aggregate `Σ s·φ / Σ s`.
    fn aggregate(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.weighted_value / self.weight
        }
    }

    fn plain_mean(&self) -> f64 {
        self.plain_sum / self.count as f64
    }
}

struct Period {
    aggregate: f64,
    survivors: Group,
    others: Group,
}

fn index_period<K>(obs: &[WeightedObs<K>]) -> Result<(HashSet<K>, f64)>
where
    K: Hash + Eq + Clone + std::fmt::Debug,
{
    let mut ids = HashSet::with_capacity(obs.len());
    let mut total = 0.0;
    for o in obs {
        if !(o.weight.is_finite() && o.weight > 0.0) {
            return Err(Error::domain(format!("weight of {:?} must be positive", o.id)));
        }
        if !o.value.is_finite() {
            return Err(Error::domain(format!("share value of {:?} must be finite", o.id)));
        }
        if !ids.insert(o.id.clone()) {
            return Err(Error::DuplicateId(format!("{:?}", o.id)));
        }
        total += o.weight;
    }
    Ok((ids, total))
}

fn split_period<K: Hash + Eq>(obs: &[WeightedObs<K>], total: f64, survivors: &HashSet<&K>) -> Period {
    let mut s = Group::default();
    let mut o = Group::default();
    let mut aggregate = 0.0;
    for x in obs {
        let w = x.weight / total;
        aggregate += w * x.value;
        if survivors.contains(&x.id) {
            s.add(w, x.value);
        } else {
            o.add(w, x.value);
        }
    }
    Period {
        aggregate,
        survivors: s,
        others: o,
    }
}

/// Split the change in the weighted aggregate between two periods into
/// survivor within/between terms, exit and entry.
///
/// Weights are normalized within each period. The survivor term is split
/// Olley–Pakes style into the change of the unweighted survivor mean
/// (`within`) and the change of the covariance remainder (`between`).
pub fn melitz_polanec<K>(period1: &[WeightedObs<K>], period2: &[WeightedObs<K>]) -> Result<MPComponents>
where
    K: Hash + Eq + Clone + std::fmt::Debug,
{
    let (ids1, total1) = index_period(period1)?;
    let (ids2, total2) = index_period(period2)?;
    let survivors: HashSet<&K> = ids1.intersection(&ids2).collect();
    if survivors.is_empty() {
        return Err(Error::NoSurvivors);
    }
    let p1 = split_period(period1, total1, &survivors);
    let p2 = split_period(period2, total2, &survivors);

    let s1 = p1.survivors.aggregate();
    let s2 = p2.survivors.aggregate();
    let mean1 = p1.survivors.plain_mean();
    let mean2 = p2.survivors.plain_mean();

    let within = mean2 - mean1;
    let between = (s2 - mean2) - (s1 - mean1);
    let exit = if p1.others.count == 0 {
        0.0
    } else {
        p1.others.weight * (s1 - p1.others.aggregate())
    };
    let entry = if p2.others.count == 0 {
        0.0
    } else {
        p2.others.weight * (p2.others.aggregate() - s2)
    };
    let out = MPComponents {
        total_change: p2.aggregate - p1.aggregate,
        within,
        between,
        exit,
        entry,
        aggregate_start: p1.aggregate,
        aggregate_end: p2.aggregate,
    };
    debug_assert!(
        (out.component_sum() - out.total_change).abs() <= 1e-9 * (1.0 + out.total_change.abs()),
        "decomposition identity violated: {out:?}"
    );
    Ok(out)
}

/// Split of a total labor-share change (percentage points) into the part
/// driven by the size-distribution path and the rest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CounterfactualResult {
    pub total_change: f64,
    pub distribution_contribution: f64,
    pub residual_contribution: f64,
    /// Percent of the total; `None` when the total is numerically zero.
    pub distribution_share: Option<f64>,
    pub residual_share: Option<f64>,
}

impl CounterfactualResult {
    /// Split a total change given the distribution contribution directly.
    pub fn from_contribution(total_change_pp: f64, distribution_contribution_pp: f64) -> Self {
        let residual = total_change_pp - distribution_contribution_pp;
        let share = |part: f64| (total_change_pp.abs() >= ZERO_TOTAL_EPS).then(|| 100.0 * part / total_change_pp);
        Self {
            total_change: total_change_pp,
            distribution_contribution: distribution_contribution_pp,
            residual_contribution: residual,
            distribution_share: share(distribution_contribution_pp),
            residual_share: share(residual),
        }
    }
}

/// Contribution `100·coefficient·(α_end − α_start)` of the tail-index path
/// to a labor-share change of `ls_change_pp` percentage points.
pub fn counterfactual_contribution(
    ls_change_pp: f64,
    coefficient: f64,
    alpha_start: f64,
    alpha_end: f64,
) -> CounterfactualResult {
    CounterfactualResult::from_contribution(ls_change_pp, 100.0 * coefficient * (alpha_end - alpha_start))
}

/// Coefficient that would make the tail-index path account for
/// `contribution_pp`.
pub fn implied_coefficient(contribution_pp: f64, alpha_start: f64, alpha_end: f64) -> Result<f64> {
    let d = alpha_end - alpha_start;
    if d.abs() < f64::EPSILON {
        return Err(Error::domain("tail index path has no change"));
    }
    Ok(contribution_pp / (100.0 * d))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn obs(rows: &[(&'static str, f64, f64)]) -> Vec<WeightedObs<&'static str>> {
        rows.iter().map(|&(id, w, v)| WeightedObs::new(id, w, v)).collect()
    }

    #[test]
    fn worked_four_firm_example() {
        let p1 = obs(&[("A", 0.5, 0.40), ("B", 0.3, 0.30), ("C", 0.2, 0.50)]);
        let p2 = obs(&[("A", 0.6, 0.35), ("B", 0.2, 0.30), ("D", 0.2, 0.45)]);
        let mp = melitz_polanec(&p1, &p2).unwrap();
        let close = |a: f64, b: f64| (a - b).abs() < 1e-12;
        assert!(close(mp.total_change, -0.03), "{mp:?}");
        assert!(close(mp.within, -0.025));
        assert!(close(mp.between, 0.0));
        assert!(close(mp.exit, -0.0275));
        assert!(close(mp.entry, 0.0225));
        assert!(close(mp.component_sum(), mp.total_change));
    }

    #[test]
    fn identical_periods_are_zero() {
        let p = obs(&[("A", 2.0, 0.4), ("B", 1.0, 0.2)]);
        let mp = melitz_polanec(&p, &p).unwrap();
        assert_eq!(
            (mp.total_change, mp.within, mp.between, mp.exit, mp.entry),
            (0.0, 0.0, 0.0, 0.0, 0.0)
        );
    }

    #[test]
    fn constant_shift_is_all_within() {
        let p1 = obs(&[("A", 2.0, 0.4), ("B", 1.0, 0.2), ("C", 5.0, 0.1)]);
        let p2: Vec<_> = p1.iter().map(|o| WeightedObs::new(o.id, o.weight, o.value + 0.05)).collect();
        let mp = melitz_polanec(&p1, &p2).unwrap();
        assert!((mp.within - 0.05).abs() < 1e-15);
        assert!(mp.between.abs() < 1e-15);
        assert_eq!((mp.exit, mp.entry), (0.0, 0.0));
    }

    #[test]
    fn errors() {
        let p1 = obs(&[("A", 1.0, 0.4)]);
        let p2 = obs(&[("B", 1.0, 0.4)]);
        assert!(matches!(melitz_polanec(&p1, &p2), Err(Error::NoSurvivors)));
        let dup = obs(&[("A", 1.0, 0.4), ("A", 2.0, 0.1)]);
        assert!(matches!(melitz_polanec(&dup, &p1), Err(Error::DuplicateId(_))));
        let neg = obs(&[("A", -1.0, 0.4)]);
        assert!(melitz_polanec(&neg, &p1).is_err());
    }

    proptest! {
        #[test]
        fn rescaling_weights_changes_nothing(
            w in prop::collection::vec(0.01f64..10.0, 6),
            v in prop::collection::vec(0.0f64..1.0, 6),
            c1 in 0.1f64..100.0,
            c2 in 0.1f64..100.0,
        ) {
            let ids = ["a", "b", "c", "d", "e", "f"];
            let p1: Vec<_> = (0..4).map(|i| WeightedObs::new(ids[i], w[i], v[i])).collect();
            let p2: Vec<_> = (1..6).map(|i| WeightedObs::new(ids[i], w[i] * 1.3, v[i] * 0.9)).collect();
            let base = melitz_polanec(&p1, &p2).unwrap();
            let s1: Vec<_> = p1.iter().map(|o| WeightedObs::new(o.id, o.weight * c1, o.value)).collect();
            let s2: Vec<_> = p2.iter().map(|o| WeightedObs::new(o.id, o.weight * c2, o.value)).collect();
            let scaled = melitz_polanec(&s1, &s2).unwrap();
            for (a, b) in [
                (base.within, scaled.within),
                (base.between, scaled.between),
                (base.exit, scaled.exit),
                (base.entry, scaled.entry),
            ] {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn counterfactual_examples() {
        let r = CounterfactualResult::from_contribution(-5.42, -7.02);
        assert!((r.distribution_share.unwrap() - 129.5).abs() < 0.2);
        assert!((r.residual_share.unwrap() + 29.5).abs() < 0.2);
        assert!((r.residual_contribution - 1.60).abs() < 1e-12);
        assert!((r.distribution_share.unwrap() + r.residual_share.unwrap() - 100.0).abs() < 1e-12);

        let flat = counterfactual_contribution(-5.42, 0.44, 0.9, 0.9);
        assert_eq!(flat.distribution_contribution, 0.0);
        assert_eq!(flat.residual_contribution, -5.42);

        let c = implied_coefficient(-7.02, 0.98, 0.82).unwrap();
        assert!((c - 0.438_75).abs() < 1e-12);
        let back = counterfactual_contribution(-5.42, c, 0.98, 0.82);
        assert!((back.distribution_contribution + 7.02).abs() < 1e-12);

        let zero = CounterfactualResult::from_contribution(0.0, 1.0);
        assert_eq!(zero.distribution_share, None);
        assert_eq!(zero.residual_contribution, -1.0);
        assert!(implied_coefficient(1.0, 0.5, 0.5).is_err());
    }
}
