//! Ranking accuracy and counting fairness metrics.

use std::collections::{BTreeMap, BTreeSet};

use log::debug;
use ndarray::{ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::hin::{Group, NodeId};

/// One scored user: group, ground-truth career and the full career ranking.
#[derive(Clone, Debug, PartialEq)]
pub struct PredictionRecord {
    pub user: NodeId,
    pub group: Group,
    pub truth: NodeId,
    pub ranking: Vec<NodeId>,
}

impl PredictionRecord {
    pub fn top1(&self) -> Option<NodeId> {
        self.ranking.first().copied()
    }

    /// 1-based position of the truth in the ranking.
    pub fn rank(&self) -> Option<usize> {
        self.ranking.iter().position(|&c| c == self.truth).map(|p| p + 1)
    }
}

/// `(1/N) Σ 1/rank_i`
pub fn mrr(records: &[PredictionRecord]) -> Result<f64, EvalError> {
    if records.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut sum = 0.0;
    for r in records {
        let rank = r.rank().ok_or(EvalError::TruthNotRanked { user: r.user, truth: r.truth })?;
        sum += 1.0 / rank as f64;
    }
    Ok(sum / records.len() as f64)
}

/// Class order for a probability row: descending probability, ties by
/// ascending class index.
pub fn ranking_from_probs(row: ArrayView1<f64>) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..row.len()).collect();
    idx.sort_by(|&a, &b| row[b].total_cmp(&row[a]).then(a.cmp(&b)));
    idx
}

/// 1-based rank of class `y` under [`ranking_from_probs`] ordering.
pub fn rank_in_row(row: ArrayView1<f64>, y: usize) -> usize {
    let py = row[y];
    1 + row.iter().enumerate().filter(|&(k, &p)| p > py || (p == py && k < y)).count()
}

/// MRR of the true classes over probability rows; 0 for no rows.
pub fn mrr_from_probs(probs: ArrayView2<f64>, labels: &[usize]) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    let s: f64 = probs.rows().into_iter().zip(labels).map(|(row, &y)| 1.0 / rank_in_row(row, y) as f64).sum();
    s / labels.len() as f64
}

fn group_totals(records: &[PredictionRecord]) -> Result<[usize; 2], EvalError> {
    let mut n = [0usize; 2];
    for r in records {
        n[r.group.index()] += 1;
    }
    if n[0] == 0 || n[1] == 0 {
        return Err(EvalError::EmptyGroup);
    }
    Ok(n)
}

/// Signed per-class terms `N_k^0/N^0 - N_k^1/N^1` over top-1 predictions,
/// for every class predicted by at least one user.
pub fn dp_terms(records: &[PredictionRecord]) -> Result<BTreeMap<NodeId, f64>, EvalError> {
    let n = group_totals(records)?;
    let mut counts: BTreeMap<NodeId, [usize; 2]> = BTreeMap::new();
    for r in records {
        let top = r.top1().ok_or(EvalError::EmptyRanking(r.user))?;
        counts.entry(top).or_default()[r.group.index()] += 1;
    }
    Ok(counts.into_iter().map(|(k, c)| (k, c[0] as f64 / n[0] as f64 - c[1] as f64 / n[1] as f64)).collect())
}

/// `Σ_k |N_k^0/N^0 - N_k^1/N^1|`
pub fn diff_dp(records: &[PredictionRecord]) -> Result<f64, EvalError> {
    Ok(dp_terms(records)?.values().map(|d| d.abs()).sum())
}

/// Denominator of the per-class correctness ratio in [`diff_eo_with`].
#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EoDenominator {
    /// Users of the group predicted as class k.
    #[default]
    Predicted,
    /// Users of the group whose truth is class k (true-positive rate).
    Truth,
}

/// `Σ_k |N_kk^0/N_k^0 - N_kk^1/N_k^1|` with `N_k^i` the number of group-i
/// users predicted as k and `N_kk^i` those among them predicted correctly.
pub fn diff_eo(records: &[PredictionRecord]) -> Result<f64, EvalError> {
    diff_eo_with(records, EoDenominator::Predicted)
}

pub fn diff_eo_with(records: &[PredictionRecord], denom: EoDenominator) -> Result<f64, EvalError> {
    group_totals(records)?;
    // per class: [correct, denominator] per group
    let mut counts: BTreeMap<NodeId, [[usize; 2]; 2]> = BTreeMap::new();
    for r in records {
        let top = r.top1().ok_or(EvalError::EmptyRanking(r.user))?;
        let g = r.group.index();
        let class = match denom {
            EoDenominator::Predicted => top,
            EoDenominator::Truth => r.truth,
        };
        let c = counts.entry(class).or_default();
        c[g][1] += 1;
        if top == r.truth {
            c[g][0] += 1;
        }
    }
    let mut total = 0.0;
    for (k, c) in counts {
        if c[0][1] == 0 || c[1][1] == 0 {
            debug!("diff_eo skips class {k}: denominators {} / {}", c[0][1], c[1][1]);
            continue;
        }
        total += (c[0][0] as f64 / c[0][1] as f64 - c[1][0] as f64 / c[1][1] as f64).abs();
    }
    Ok(total)
}

/// Careers appearing in any ranking.
pub fn career_set(records: &[PredictionRecord]) -> BTreeSet<NodeId> {
    records.iter().flat_map(|r| r.ranking.iter().copied()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    const A: NodeId = NodeId(100);
    const B: NodeId = NodeId(101);
    const C: NodeId = NodeId(102);

    fn rec(user: u32, group: Group, truth: NodeId, ranking: &[NodeId]) -> PredictionRecord {
        PredictionRecord { user: NodeId(user), group, truth, ranking: ranking.to_vec() }
    }

    #[test]
    fn mrr_examples() {
        let rs = vec![
            rec(0, Group::G0, A, &[A, B, C, NodeId(103)]),
            rec(1, Group::G0, B, &[A, B, C, NodeId(103)]),
            rec(2, Group::G1, NodeId(103), &[A, B, C, NodeId(103)]),
        ];
        assert!((mrr(&rs).unwrap() - 0.583333).abs() < 1e-6);
        assert_eq!(mrr(&rs[..1]).unwrap(), 1.0);
        let ten: Vec<NodeId> = (0..10).map(NodeId).collect();
        assert_eq!(mrr(&[rec(0, Group::G0, NodeId(9), &ten)]).unwrap(), 0.1);
        assert!(matches!(mrr(&[]), Err(EvalError::Empty)));
    }

    #[test]
    fn dp_examples() {
        let rs = vec![
            rec(0, Group::G0, A, &[A, B]),
            rec(1, Group::G0, A, &[A, B]),
            rec(2, Group::G1, A, &[A, B]),
            rec(3, Group::G1, A, &[B, A]),
        ];
        assert_eq!(diff_dp(&rs).unwrap(), 1.0);
        let disjoint = vec![rec(0, Group::G0, A, &[A, B]), rec(1, Group::G1, A, &[B, A])];
        assert_eq!(diff_dp(&disjoint).unwrap(), 2.0);
        let same = vec![rec(0, Group::G0, A, &[A, B]), rec(1, Group::G1, B, &[A, B])];
        assert_eq!(diff_dp(&same).unwrap(), 0.0);
        assert!(matches!(diff_dp(&rs[..2]), Err(EvalError::EmptyGroup)));
    }

    #[test]
    fn eo_examples() {
        // g0: two predicted A, one correct; g1: one predicted A, correct
        let rs = vec![rec(0, Group::G0, A, &[A, B]), rec(1, Group::G0, B, &[A, B]), rec(2, Group::G1, A, &[A, B])];
        assert_eq!(diff_eo(&rs).unwrap(), 0.5);
        let correct = vec![rec(0, Group::G0, A, &[A, B]), rec(1, Group::G1, B, &[B, A]), rec(2, Group::G1, A, &[A, B])];
        assert_eq!(diff_eo(&correct).unwrap(), 0.0);
        // class B predicted only in g0 is skipped
        let skip = vec![rec(0, Group::G0, A, &[B, A]), rec(1, Group::G0, A, &[A, B]), rec(2, Group::G1, A, &[A, B])];
        assert_eq!(diff_eo(&skip).unwrap(), 0.0);
        // the truth-denominator variant counts the miss
        assert_eq!(diff_eo_with(&skip, EoDenominator::Truth).unwrap(), 0.5);
    }

    #[test]
    fn prob_rankings_break_ties_by_index() {
        let row = array![0.25, 0.25, 0.5, 0.0];
        assert_eq!(ranking_from_probs(row.view()), vec![2, 0, 1, 3]);
        assert_eq!(rank_in_row(row.view(), 1), 3);
        assert_eq!(rank_in_row(row.view(), 2), 1);
        let probs = array![[0.5, 0.5], [0.9, 0.1]];
        assert_eq!(mrr_from_probs(probs.view(), &[1, 0]), 0.75);
    }
}
