//! Nested cross-validation splits and the balance-data baseline.

use std::collections::BTreeMap;

use log::{info, warn};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::hin::{HinGraph, NodeId};
use crate::rng::stage_rng;

pub const NUM_FOLDS: usize = 3;
/// Minimum career size for stratified splitting.
pub const MIN_STRATUM: usize = 10;

/// Four disjoint user sets for one outer fold. The embedding-training set
/// is shared by all folds.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub fold: usize,
    pub embedding_train: Vec<NodeId>,
    pub predict_train: Vec<NodeId>,
    pub predict_valid: Vec<NodeId>,
    pub predict_test: Vec<NodeId>,
}

impl SplitPlan {
    pub fn all(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.embedding_train.iter().chain(&self.predict_train).chain(&self.predict_valid).chain(&self.predict_test).copied()
    }
}

#[derive(Copy, Clone, PartialEq, Eq)]
enum Slot {
    Embed,
    Fold(usize),
}

// 4 embedding slots and 2 per fold in every run of 10 consecutive users.
const OUTER: [Slot; 10] = [
    Slot::Embed,
    Slot::Fold(0),
    Slot::Embed,
    Slot::Fold(1),
    Slot::Embed,
    Slot::Fold(2),
    Slot::Embed,
    Slot::Fold(0),
    Slot::Fold(1),
    Slot::Fold(2),
];
// 3 train slots and 1 validation slot in every run of 4.
const INNER_VALID: [bool; 4] = [false, false, true, false];

/// Splits labeled `(user, career)` pairs 4:3:1:2 into embedding-train,
/// predict-train, predict-validation and predict-test sets for each of the
/// three outer folds, stratified by career.
pub fn nested_cv_split(users: &[(NodeId, NodeId)], seed: u64) -> Result<Vec<SplitPlan>, EvalError> {
    if users.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut seen = std::collections::HashSet::new();
    let mut by_career: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
    for &(u, c) in users {
        if !seen.insert(u) {
            return Err(EvalError::DuplicateUser(u));
        }
        by_career.entry(c).or_default().push(u);
    }
    let stratified = by_career.values().all(|v| v.len() >= MIN_STRATUM);
    let order: Vec<NodeId> = if stratified {
        by_career
            .iter_mut()
            .flat_map(|(c, members)| {
                members.sort_unstable();
                members.shuffle(&mut stage_rng(seed, "split", &[u64::from(c.0)]));
                members.iter().copied()
            })
            .collect()
    } else {
        warn!("a career has fewer than {MIN_STRATUM} users; splitting without stratification");
        let mut all: Vec<NodeId> = users.iter().map(|&(u, _)| u).collect();
        all.sort_unstable();
        all.shuffle(&mut stage_rng(seed, "split", &[]));
        all
    };

    let mut embed = Vec::new();
    let mut folds: [Vec<NodeId>; NUM_FOLDS] = Default::default();
    let slots: Vec<Slot> = (0..order.len()).map(|i| OUTER[i % OUTER.len()]).collect();
    for (&u, &slot) in order.iter().zip(&slots) {
        match slot {
            Slot::Embed => embed.push(u),
            Slot::Fold(f) => folds[f].push(u),
        }
    }
    embed.sort_unstable();

    let plans = (0..NUM_FOLDS)
        .map(|test| {
            // the other folds in their stratified order
            let pool: Vec<NodeId> =
                order.iter().zip(&slots).filter(|(_, s)| matches!(s, Slot::Fold(f) if *f != test)).map(|(&u, _)| u).collect();
            let (mut train, mut valid) = (Vec::new(), Vec::new());
            for (i, u) in pool.into_iter().enumerate() {
                if INNER_VALID[i % INNER_VALID.len()] {
                    valid.push(u);
                } else {
                    train.push(u);
                }
            }
            train.sort_unstable();
            valid.sort_unstable();
            let mut t = folds[test].clone();
            t.sort_unstable();
            SplitPlan { fold: test, embedding_train: embed.clone(), predict_train: train, predict_valid: valid, predict_test: t }
        })
        .collect();
    Ok(plans)
}

/// Result of [`balance_data`].
#[derive(Clone, Debug)]
pub struct Balanced {
    pub graph: HinGraph,
    /// Removed users, ascending.
    pub removed: Vec<NodeId>,
}

/// Removes randomly chosen advantaged-group users from each career of the
/// embedding-training set until both groups are equally represented. The
/// removed users lose all their edges; node ids are kept.
pub fn balance_data(g: &HinGraph, embedding_train: &[(NodeId, NodeId)], seed: u64) -> Result<Balanced, EvalError> {
    let adv = g.advantaged();
    let mut by_career: BTreeMap<NodeId, [Vec<NodeId>; 2]> = BTreeMap::new();
    for &(u, c) in embedding_train {
        let grp = g.group(u).ok_or(EvalError::Ungrouped(u))?;
        by_career.entry(c).or_default()[grp.index()].push(u);
    }
    let mut removed = Vec::new();
    for (c, members) in by_career.iter_mut() {
        let dis = members[adv.other().index()].len();
        let pool = &mut members[adv.index()];
        if pool.len() <= dis {
            continue;
        }
        pool.sort_unstable();
        pool.shuffle(&mut stage_rng(seed, "balance", &[u64::from(c.0)]));
        removed.extend_from_slice(&pool[dis..]);
    }
    removed.sort_unstable();
    info!("balance-data removes {} {} users", removed.len(), g.group_name(adv));
    let mut gone = vec![false; g.num_nodes()];
    for u in &removed {
        gone[u.index()] = true;
    }
    let graph = g.filter_edges(|e| !gone[e.src.index()] && !gone[e.dst.index()]);
    Ok(Balanced { graph, removed })
}

/// Group counts of a user list.
pub fn group_counts(g: &HinGraph, users: &[NodeId]) -> [usize; 2] {
    let mut c = [0; 2];
    for u in users {
        if let Some(grp) = g.group(*u) {
            c[grp.index()] += 1;
        }
    }
    c
}
