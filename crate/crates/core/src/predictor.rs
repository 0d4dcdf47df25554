//! MLP career ranker over user and career embeddings.
//!
//! A user vector is mapped through one tanh hidden layer to a query in the
//! embedding space; each career scores the inner product of the query with
//! its (frozen) embedding, and a softmax over careers gives probabilities.

use log::{debug, info};
use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::EmbeddingTable;
use crate::eval::{mrr_from_probs, ranking_from_probs};
use crate::gnn::{softmax_rows, PROB_FLOOR};
use crate::hin::NodeId;
use crate::rng::stage_rng;

#[derive(Debug, Error)]
pub enum PredictorError {
    #[error("no embedding for node {0}")]
    MissingEmbedding(NodeId),
    #[error("career {0} is not one of the ranker's careers")]
    UnknownCareer(NodeId),
    #[error("embedding dimension {got} does not match the ranker's {expected}")]
    DimMismatch { expected: usize, got: usize },
    #[error("no careers to rank")]
    NoCareers,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("loss became non-finite at epoch {0}")]
    Diverged(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpConfig {
    pub hidden: usize,
    pub lr: f64,
    pub epochs: usize,
    pub patience: usize,
    pub seed: u64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        Self { hidden: 128, lr: 0.05, epochs: 200, patience: 20, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MlpRanker {
    /// Careers in ascending id order; class `k` is `careers[k]`.
    pub careers: Vec<NodeId>,
    /// hidden × d
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    /// d × hidden
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MlpGradients {
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
}

fn glorot(rng: &mut impl Rng, rows: usize, cols: usize) -> Array2<f64> {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    Array2::from_shape_simple_fn((rows, cols), || rng.gen_range(-limit..limit))
}

/// Stacks the rows of `ids` from `emb`.
pub fn gather(emb: &EmbeddingTable, ids: &[NodeId]) -> Result<Array2<f64>, PredictorError> {
    let d = emb.dim();
    let mut out = Array2::zeros((ids.len(), d));
    for (i, &v) in ids.iter().enumerate() {
        let row = emb.get(v).ok_or(PredictorError::MissingEmbedding(v))?;
        out.row_mut(i).assign(&ndarray::ArrayView1::from(row));
    }
    Ok(out)
}

impl MlpRanker {
    pub fn init(careers: &[NodeId], dim: usize, hidden: usize, seed: u64) -> Self {
        let mut careers = careers.to_vec();
        careers.sort_unstable();
        careers.dedup();
        let mut rng = stage_rng(seed, "mlp-init", &[]);
        Self {
            careers,
            w1: glorot(&mut rng, hidden, dim),
            b1: Array1::zeros(hidden),
            w2: glorot(&mut rng, dim, hidden),
            b2: Array1::zeros(dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.w1.ncols()
    }

    pub fn hidden(&self) -> usize {
        self.w1.nrows()
    }

    pub fn class_of(&self, career: NodeId) -> Result<usize, PredictorError> {
        self.careers.binary_search(&career).map_err(|_| PredictorError::UnknownCareer(career))
    }

    fn hidden_and_query(&self, users: &Array2<f64>) -> (Array2<f64>, Array2<f64>) {
        let a = (users.dot(&self.w1.t()) + &self.b1).mapv(f64::tanh);
        let q = a.dot(&self.w2.t()) + &self.b2;
        (a, q)
    }

    /// Career logits for stacked user rows against stacked career rows.
    pub fn logits(&self, users: &Array2<f64>, careers: &Array2<f64>) -> Array2<f64> {
        self.hidden_and_query(users).1.dot(&careers.t())
    }

    pub fn probs(&self, users: &Array2<f64>, careers: &Array2<f64>) -> Array2<f64> {
        softmax_rows(&self.logits(users, careers))
    }

    fn career_matrix(&self, emb: &EmbeddingTable) -> Result<Array2<f64>, PredictorError> {
        if emb.dim() != self.dim() {
            return Err(PredictorError::DimMismatch { expected: self.dim(), got: emb.dim() });
        }
        gather(emb, &self.careers)
    }

    /// Mean cross-entropy over `labels` and its parameter gradients.
    pub fn loss_and_grad(&self, users: &Array2<f64>, careers: &Array2<f64>, labels: &[usize]) -> (f64, MlpGradients) {
        let n = labels.len().max(1) as f64;
        let (a, q) = self.hidden_and_query(users);
        let p = softmax_rows(&q.dot(&careers.t()));
        let mut loss = 0.0;
        let mut d_logits = p.clone();
        for (i, &y) in labels.iter().enumerate() {
            loss -= p[[i, y]].max(PROB_FLOOR).ln();
            d_logits[[i, y]] -= 1.0;
        }
        d_logits /= n;
        let dq = d_logits.dot(careers);
        let w2 = dq.t().dot(&a);
        let b2 = dq.sum_axis(Axis(0));
        let dz1 = dq.dot(&self.w2) * a.mapv(|x| 1.0 - x * x);
        let w1 = dz1.t().dot(users);
        let b1 = dz1.sum_axis(Axis(0));
        (loss / n, MlpGradients { w1, b1, w2, b2 })
    }

    pub fn loss(&self, users: &Array2<f64>, careers: &Array2<f64>, labels: &[usize]) -> f64 {
        self.loss_and_grad(users, careers, labels).0
    }

    fn descend(&mut self, g: &MlpGradients, lr: f64) {
        self.w1.scaled_add(-lr, &g.w1);
        self.b1.scaled_add(-lr, &g.b1);
        self.w2.scaled_add(-lr, &g.w2);
        self.b2.scaled_add(-lr, &g.b2);
    }

    pub fn tensors(&self) -> Vec<(&'static str, Vec<usize>, &[f64])> {
        vec![
            ("w1", self.w1.shape().to_vec(), self.w1.as_slice().expect("standard layout")),
            ("b1", self.b1.shape().to_vec(), self.b1.as_slice().expect("standard layout")),
            ("w2", self.w2.shape().to_vec(), self.w2.as_slice().expect("standard layout")),
            ("b2", self.b2.shape().to_vec(), self.b2.as_slice().expect("standard layout")),
        ]
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            self.w1.as_slice_mut().expect("standard layout"),
            self.b1.as_slice_mut().expect("standard layout"),
            self.w2.as_slice_mut().expect("standard layout"),
            self.b2.as_slice_mut().expect("standard layout"),
        ]
    }
}

impl MlpGradients {
    pub fn tensors(&self) -> Vec<&[f64]> {
        vec![
            self.w1.as_slice().expect("standard layout"),
            self.b1.as_slice().expect("standard layout"),
            self.w2.as_slice().expect("standard layout"),
            self.b2.as_slice().expect("standard layout"),
        ]
    }
}

#[derive(Clone, Debug)]
pub struct TrainedMlp {
    pub ranker: MlpRanker,
    pub best_epoch: usize,
    pub best_valid_mrr: Option<f64>,
    pub train_losses: Vec<f64>,
}

fn stack_pairs(ranker: &MlpRanker, emb: &EmbeddingTable, pairs: &[(NodeId, NodeId)]) -> Result<(Array2<f64>, Vec<usize>), PredictorError> {
    let users: Vec<NodeId> = pairs.iter().map(|p| p.0).collect();
    let labels = pairs.iter().map(|p| ranker.class_of(p.1)).collect::<Result<_, _>>()?;
    Ok((gather(emb, &users)?, labels))
}

/// Trains on `(user, career)` pairs with early stopping on validation MRR.
pub fn train_mlp(
    emb: &EmbeddingTable,
    careers: &[NodeId],
    train: &[(NodeId, NodeId)],
    valid: &[(NodeId, NodeId)],
    cfg: &MlpConfig,
) -> Result<TrainedMlp, PredictorError> {
    if careers.is_empty() {
        return Err(PredictorError::NoCareers);
    }
    if cfg.hidden == 0 || !(cfg.lr > 0.0 && cfg.lr.is_finite()) {
        return Err(PredictorError::Config(format!("hidden {} lr {}", cfg.hidden, cfg.lr)));
    }
    let mut ranker = MlpRanker::init(careers, emb.dim(), cfg.hidden, cfg.seed);
    let c = ranker.career_matrix(emb)?;
    let (xt, yt) = stack_pairs(&ranker, emb, train)?;
    let (xv, yv) = stack_pairs(&ranker, emb, valid)?;

    let mut best: Option<(MlpRanker, usize, f64)> = None;
    let mut since_best = 0;
    let mut losses = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        if !valid.is_empty() {
            let m = mrr_from_probs(ranker.probs(&xv, &c).view(), &yv);
            if best.as_ref().is_none_or(|b| m > b.2) {
                best = Some((ranker.clone(), epoch, m));
                since_best = 0;
            } else {
                since_best += 1;
                if since_best >= cfg.patience {
                    debug!("mlp early stop at epoch {epoch}");
                    break;
                }
            }
        }
        let (loss, grad) = ranker.loss_and_grad(&xt, &c, &yt);
        if !loss.is_finite() {
            return Err(PredictorError::Diverged(epoch));
        }
        losses.push(loss);
        ranker.descend(&grad, cfg.lr);
    }
    let out = match best {
        Some((r, e, m)) => TrainedMlp { ranker: r, best_epoch: e, best_valid_mrr: Some(m), train_losses: losses },
        None => TrainedMlp { best_epoch: losses.len(), ranker, best_valid_mrr: None, train_losses: losses },
    };
    info!("mlp kept epoch {}", out.best_epoch);
    Ok(out)
}

/// Careers by descending probability, ties by ascending career id.
pub fn predict_ranking(m: &MlpRanker, emb: &EmbeddingTable, user: NodeId) -> Result<Vec<(NodeId, f64)>, PredictorError> {
    let c = m.career_matrix(emb)?;
    let u = gather(emb, &[user])?;
    let p = m.probs(&u, &c);
    Ok(ranking_from_probs(p.row(0)).into_iter().map(|k| (m.careers[k], p[[0, k]])).collect())
}

/// Probability rows for many users at once.
pub fn predict_probs(m: &MlpRanker, emb: &EmbeddingTable, users: &[NodeId]) -> Result<Array2<f64>, PredictorError> {
    let c = m.career_matrix(emb)?;
    Ok(m.probs(&gather(emb, users)?, &c))
}
