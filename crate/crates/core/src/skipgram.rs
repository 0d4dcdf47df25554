//! Skip-gram with negative sampling over meta-path walk corpora.
//!
//! For every (center, context) pair inside the window the trainer performs
//! one positive update and `k` negative updates. Negatives are drawn from
//! the unigram^0.75 distribution restricted to nodes of the context's type,
//! which keeps the objective decomposed by node type.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::EmbeddingTable;
use crate::hin::{HinGraph, NodeId, TypeId};
use crate::metapath::Walk;
use crate::rng::stage_rng;

#[derive(Debug, Error, PartialEq)]
pub enum SkipGramError {
    #[error("walk corpus is empty")]
    EmptyCorpus,
    #[error("corpus node {0} is not in the graph")]
    UnknownNode(NodeId),
    #[error("invalid skip-gram configuration: {0}")]
    Config(String),
    #[error("non-finite gradient at epoch {epoch} (center {center}, context {context}, lr {lr})")]
    NonFinite { epoch: usize, center: NodeId, context: NodeId, lr: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkipGramConfig {
    pub dim: usize,
    pub negatives: usize,
    pub window: usize,
    pub initial_lr: f64,
    pub min_lr: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for SkipGramConfig {
    fn default() -> Self {
        Self { dim: 128, negatives: 5, window: 5, initial_lr: 0.025, min_lr: 1e-4, epochs: 5, seed: 0 }
    }
}

impl SkipGramConfig {
    pub fn validate(&self) -> Result<(), SkipGramError> {
        if self.dim == 0 || self.negatives == 0 || self.window == 0 {
            return Err(SkipGramError::Config("dim, negatives and window must be positive".into()));
        }
        if !(self.initial_lr > 0.0 && self.min_lr >= 0.0 && self.min_lr <= self.initial_lr) {
            return Err(SkipGramError::Config("need 0 <= min_lr <= initial_lr and initial_lr > 0".into()));
        }
        Ok(())
    }
}

/// Cumulative unigram^0.75 weights over the vocabulary entries of one type.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseDistribution {
    /// Vocabulary indices.
    pub members: Vec<usize>,
    pub cumulative: Vec<f64>,
}

impl NoiseDistribution {
    fn new(members: Vec<usize>, counts: &[u64]) -> Self {
        let mut acc = 0.0;
        let cumulative = members
            .iter()
            .map(|&m| {
                acc += (counts[m] as f64).powf(0.75);
                acc
            })
            .collect();
        Self { members, cumulative }
    }

    pub fn probability(&self, pos: usize) -> f64 {
        let total = *self.cumulative.last().unwrap_or(&1.0);
        let prev = if pos == 0 { 0.0 } else { self.cumulative[pos - 1] };
        (self.cumulative[pos] - prev) / total
    }

    fn sample(&self, u: f64) -> usize {
        let target = u * self.cumulative.last().copied().unwrap_or(0.0);
        let pos = self.cumulative.partition_point(|&c| c <= target).min(self.members.len() - 1);
        self.members[pos]
    }
}

/// Occurrence counts over the corpus vocabulary plus per-type noise
/// distributions for negative sampling.
#[derive(Clone, Debug, PartialEq)]
pub struct FrequencyTable {
    /// Vocabulary in ascending id order.
    pub vocab: Vec<NodeId>,
    pub counts: Vec<u64>,
    pub types: Vec<TypeId>,
    pub noise: BTreeMap<TypeId, NoiseDistribution>,
}

impl FrequencyTable {
    pub fn count(&self, v: NodeId) -> u64 {
        self.vocab.binary_search(&v).map(|i| self.counts[i]).unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn as_map(&self) -> BTreeMap<NodeId, u64> {
        self.vocab.iter().copied().zip(self.counts.iter().copied()).collect()
    }
}

pub fn build_frequency_table(corpus: &[Walk], g: &HinGraph) -> Result<FrequencyTable, SkipGramError> {
    let mut counts: BTreeMap<NodeId, u64> = BTreeMap::new();
    for w in corpus {
        for &v in w {
            *counts.entry(v).or_insert(0) += 1;
        }
    }
    if counts.is_empty() {
        return Err(SkipGramError::EmptyCorpus);
    }
    let vocab: Vec<NodeId> = counts.keys().copied().collect();
    let counts: Vec<u64> = counts.values().copied().collect();
    let types = vocab.iter().map(|&v| g.node_type(v).map_err(|_| SkipGramError::UnknownNode(v))).collect::<Result<Vec<_>, _>>()?;
    let mut by_type: BTreeMap<TypeId, Vec<usize>> = BTreeMap::new();
    for (i, t) in types.iter().enumerate() {
        by_type.entry(*t).or_default().push(i);
    }
    let noise = by_type.into_iter().map(|(t, m)| (t, NoiseDistribution::new(m, &counts))).collect();
    Ok(FrequencyTable { vocab, counts, types, noise })
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `-log σ(x)` computed without overflow.
#[inline]
fn neg_log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        (-x).exp().ln_1p()
    } else {
        -x + x.exp().ln_1p()
    }
}

/// Loss and score coefficient for one target row: label 1 for the observed
/// context, 0 for a negative. The gradient of the loss w.r.t. the score
/// `⟨center, target⟩` is the returned coefficient.
#[inline]
fn target_term(center: &[f64], target: &[f64], positive: bool) -> (f64, f64) {
    let s: f64 = center.iter().zip(target).map(|(a, b)| a * b).sum();
    if positive {
        (neg_log_sigmoid(s), sigmoid(s) - 1.0)
    } else {
        (neg_log_sigmoid(-s), sigmoid(s))
    }
}

/// Negative-sampling loss of one (center, context, negatives) tuple:
/// `-log σ(c·v) - Σ log σ(-n·v)`.
pub fn pair_loss(center: &[f64], context: &[f64], negatives: &[&[f64]]) -> f64 {
    let mut loss = target_term(center, context, true).0;
    for n in negatives {
        loss += target_term(center, n, false).0;
    }
    loss
}

#[derive(Clone, Debug, PartialEq)]
pub struct PairGradient {
    pub center: Vec<f64>,
    pub context: Vec<f64>,
    pub negatives: Vec<Vec<f64>>,
}

/// Analytic gradient of [`pair_loss`] with respect to every input vector.
pub fn pair_gradient(center: &[f64], context: &[f64], negatives: &[&[f64]]) -> (f64, PairGradient) {
    let d = center.len();
    let mut g_center = vec![0.0; d];
    let (mut loss, coef) = target_term(center, context, true);
    axpy(coef, context, &mut g_center);
    let g_context = center.iter().map(|c| coef * c).collect();
    let mut g_negs = Vec::with_capacity(negatives.len());
    for n in negatives {
        let (l, coef) = target_term(center, n, false);
        loss += l;
        axpy(coef, n, &mut g_center);
        g_negs.push(center.iter().map(|c| coef * c).collect());
    }
    (loss, PairGradient { center: g_center, context: g_context, negatives: g_negs })
}

#[inline]
fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

#[derive(Clone, Debug)]
pub struct SkipGramModel {
    pub centers: EmbeddingTable,
    pub contexts: EmbeddingTable,
    /// Mean per-pair loss of each epoch, measured before each update.
    pub epoch_losses: Vec<f64>,
}

/// Trains center and context vectors on `corpus`. Single-threaded and fully
/// determined by `cfg.seed`; invariant to the order of walks in `corpus`.
pub fn train_skipgram(corpus: &[Walk], g: &HinGraph, cfg: &SkipGramConfig) -> Result<SkipGramModel, SkipGramError> {
    cfg.validate()?;
    let freq = build_frequency_table(corpus, g)?;
    let dim = cfg.dim;
    let nv = freq.vocab.len();

    let mut lookup = vec![u32::MAX; g.num_nodes()];
    for (i, v) in freq.vocab.iter().enumerate() {
        lookup[v.index()] = i as u32;
    }
    let mut walks: Vec<Vec<u32>> =
        corpus.iter().map(|w| w.iter().map(|v| lookup[v.index()]).collect()).filter(|w: &Vec<u32>| w.len() >= 2).collect();
    walks.sort_unstable();

    let mut init_rng = stage_rng(cfg.seed, "skipgram-init", &[]);
    let half = 0.5 / dim as f64;
    let mut centers: Vec<f64> = (0..nv * dim).map(|_| init_rng.gen_range(-half..half)).collect();
    let mut contexts = vec![0.0f64; nv * dim];

    let pairs_per_epoch: u64 = walks
        .iter()
        .map(|w| {
            let n = w.len();
            (0..n).map(|i| ((i + cfg.window).min(n - 1) - i.saturating_sub(cfg.window)) as u64).sum::<u64>()
        })
        .sum();
    let total_pairs = (pairs_per_epoch * cfg.epochs as u64).max(1);
    let noise: Vec<Option<&NoiseDistribution>> = freq.types.iter().map(|t| freq.noise.get(t)).collect();

    let mut neg_rng = stage_rng(cfg.seed, "skipgram-negatives", &[]);
    let mut grad_center = vec![0.0f64; dim];
    let mut negs: Vec<usize> = Vec::with_capacity(cfg.negatives);
    let mut processed: u64 = 0;
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    let mut order: Vec<usize> = (0..walks.len()).collect();

    for epoch in 0..cfg.epochs {
        let mut shuffle_rng = stage_rng(cfg.seed, "skipgram-epoch", &[epoch as u64]);
        order.sort_unstable();
        order.shuffle(&mut shuffle_rng);
        let mut epoch_loss = 0.0;
        let mut epoch_pairs = 0u64;
        for &wi in &order {
            let w = &walks[wi];
            let n = w.len();
            for i in 0..n {
                let c = w[i] as usize;
                let lo = i.saturating_sub(cfg.window);
                let hi = (i + cfg.window).min(n - 1);
                for (j, &ctx) in w.iter().enumerate().take(hi + 1).skip(lo) {
                    if j == i {
                        continue;
                    }
                    let ctx = ctx as usize;
                    let lr = (cfg.initial_lr * (1.0 - processed as f64 / total_pairs as f64)).max(cfg.min_lr);
                    processed += 1;

                    negs.clear();
                    if let Some(dist) = noise[ctx] {
                        for _ in 0..cfg.negatives {
                            let nidx = dist.sample(neg_rng.gen::<f64>());
                            if nidx != ctx {
                                negs.push(nidx);
                            }
                        }
                    }

                    grad_center.iter_mut().for_each(|x| *x = 0.0);
                    let center = &centers[c * dim..(c + 1) * dim];
                    let mut loss = 0.0;
                    for (t, positive) in std::iter::once((ctx, true)).chain(negs.iter().map(|&n| (n, false))) {
                        let row = &mut contexts[t * dim..(t + 1) * dim];
                        let (l, coef) = target_term(center, row, positive);
                        if !(l.is_finite() && coef.is_finite()) {
                            return Err(SkipGramError::NonFinite { epoch, center: freq.vocab[c], context: freq.vocab[ctx], lr });
                        }
                        loss += l;
                        axpy(coef, row, &mut grad_center);
                        axpy(-lr * coef, center, row);
                    }
                    let center = &mut centers[c * dim..(c + 1) * dim];
                    axpy(-lr, &grad_center, center);
                    epoch_loss += loss;
                    epoch_pairs += 1;
                }
            }
        }
        epoch_losses.push(if epoch_pairs == 0 { 0.0 } else { epoch_loss / epoch_pairs as f64 });
    }

    Ok(SkipGramModel {
        centers: EmbeddingTable::from_parts(dim, freq.vocab.clone(), centers),
        contexts: EmbeddingTable::from_parts(dim, freq.vocab, contexts),
        epoch_losses,
    })
}
