//! Full-batch gradient descent with early stopping on validation MRR.

use log::{debug, info};
use ndarray::{s, Array2};
use serde::{Deserialize, Serialize};

use super::loss::{objective_with_grad, FairLossConfig};
use super::model::{softmax_backward, Activation, GnnGradients, GnnInput, GnnModel};
use super::GnnError;
use crate::eval::mrr_from_probs;
use crate::hin::Group;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GnnTrainConfig {
    pub hidden: usize,
    pub lr: f64,
    pub epochs: usize,
    pub patience: usize,
    pub activation: Activation,
    pub fair: FairLossConfig,
    pub seed: u64,
}

impl Default for GnnTrainConfig {
    fn default() -> Self {
        Self { hidden: 128, lr: 0.05, epochs: 300, patience: 30, activation: Activation::Relu, fair: FairLossConfig::None, seed: 0 }
    }
}

impl GnnTrainConfig {
    pub fn validate(&self) -> Result<(), GnnError> {
        if self.hidden == 0 {
            return Err(GnnError::Config("hidden width must be positive".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(GnnError::Config(format!("learning rate must be positive, got {}", self.lr)));
        }
        self.fair.validate()
    }
}

/// Node indices with class labels and protected groups, row-aligned.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LabeledNodes {
    pub nodes: Vec<usize>,
    pub labels: Vec<usize>,
    pub groups: Vec<Group>,
}

impl LabeledNodes {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn check(&self, classes: usize, num_nodes: usize) -> Result<(), GnnError> {
        if self.labels.len() != self.nodes.len() || self.groups.len() != self.nodes.len() {
            return Err(GnnError::Config("nodes, labels and groups differ in length".into()));
        }
        if let Some(&v) = self.nodes.iter().find(|&&v| v >= num_nodes) {
            return Err(GnnError::NodeOutOfRange(v));
        }
        if let Some(&label) = self.labels.iter().find(|&&y| y >= classes) {
            return Err(GnnError::LabelOutOfRange { label, classes });
        }
        Ok(())
    }
}

/// Objective value and parameter gradients on one labeled set.
pub fn loss_and_grad(
    model: &GnnModel,
    input: &GnnInput,
    set: &LabeledNodes,
    fair: &FairLossConfig,
) -> Result<(f64, GnnGradients), GnnError> {
    let fwd = model.forward(input, &set.nodes);
    let (loss, d_probs) = objective_with_grad(fwd.probs.view(), &set.labels, &set.groups, fair)?;
    let d_logits = softmax_backward(&fwd.probs, &d_probs);
    Ok((loss, model.backward(input, &fwd, &d_logits)))
}

#[derive(Clone, Debug)]
pub struct TrainedGnn {
    pub model: GnnModel,
    /// Epoch whose parameters were kept (0 = initialization).
    pub best_epoch: usize,
    pub best_valid_mrr: Option<f64>,
    pub epochs_run: usize,
    pub train_losses: Vec<f64>,
}

pub fn train_gnn(
    input: &GnnInput,
    classes: usize,
    train: &LabeledNodes,
    valid: &LabeledNodes,
    cfg: &GnnTrainConfig,
) -> Result<TrainedGnn, GnnError> {
    cfg.validate()?;
    let n = input.x.nrows();
    train.check(classes, n)?;
    valid.check(classes, n)?;
    if train.is_empty() {
        return Err(GnnError::Config("empty training set".into()));
    }
    let mut seen = vec![false; n];
    for &v in &train.nodes {
        seen[v] = true;
    }
    if let Some(&v) = valid.nodes.iter().find(|&&v| seen[v]) {
        return Err(GnnError::Overlap(v));
    }

    let mut model = GnnModel::init(input.x.ncols(), cfg.hidden, classes, cfg.activation, cfg.seed);
    // train rows first, validation rows after; one forward pass serves both
    let nodes: Vec<usize> = train.nodes.iter().chain(&valid.nodes).copied().collect();
    let nt = train.len();

    let mut best = (model.clone(), 0usize, None::<f64>);
    let mut since_best = 0usize;
    let mut losses = Vec::with_capacity(cfg.epochs);
    let mut epochs_run = 0;
    let mut last_finite = model.clone();
    for epoch in 0..cfg.epochs {
        let fwd = model.forward(input, &nodes);
        let probs_t = fwd.probs.slice(s![..nt, ..]);
        let (loss, d_probs_t) = objective_with_grad(probs_t, &train.labels, &train.groups, &cfg.fair)?;
        if !loss.is_finite() || fwd.probs.iter().any(|p| !p.is_finite()) {
            return Err(GnnError::Diverged { epoch, checkpoint: Box::new(last_finite) });
        }
        losses.push(loss);
        last_finite.clone_from(&model);

        if !valid.is_empty() {
            let m = mrr_from_probs(fwd.probs.slice(s![nt.., ..]), &valid.labels);
            if best.2.is_none_or(|b| m > b) {
                best = (model.clone(), epoch, Some(m));
                since_best = 0;
            } else {
                since_best += 1;
                if since_best >= cfg.patience {
                    debug!("early stop at epoch {epoch}; best validation MRR {:.4} at epoch {}", best.2.unwrap_or(0.0), best.1);
                    epochs_run = epoch;
                    break;
                }
            }
        }

        let mut d_probs = Array2::zeros(fwd.probs.raw_dim());
        d_probs.slice_mut(s![..nt, ..]).assign(&d_probs_t);
        let d_logits = softmax_backward(&fwd.probs, &d_probs);
        let grad = model.backward(input, &fwd, &d_logits);
        model.descend(&grad, cfg.lr);
        epochs_run = epoch + 1;
    }

    let (model, best_epoch, best_valid_mrr) = if valid.is_empty() { (model, epochs_run, None) } else { best };
    info!("gnn trained for {epochs_run} epochs, kept epoch {best_epoch}");
    Ok(TrainedGnn { model, best_epoch, best_valid_mrr, epochs_run, train_losses: losses })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gnn::features::Adjacency;
    use crate::rng::stage_rng;
    use rand::Rng;

    /// Random instance: `n` nodes, `f` features, classes `k`, ring-plus-chords graph.
    pub(crate) fn instance(seed: u64, n: usize, f: usize, k: usize) -> (GnnInput, LabeledNodes) {
        let mut rng = stage_rng(seed, "gnn-test", &[]);
        let mut lists = vec![Vec::new(); n];
        for v in 0..n {
            let u = (v + 1) % n;
            lists[v].push(u);
            lists[u].push(v);
            if rng.gen_bool(0.3) {
                let w = rng.gen_range(0..n);
                if w != v {
                    lists[v].push(w);
                    lists[w].push(v);
                }
            }
        }
        // leave one isolated node
        let iso = n - 1;
        for l in lists.iter_mut() {
            l.retain(|&u| u != iso);
        }
        lists[iso].clear();
        for l in lists.iter_mut() {
            l.sort_unstable();
            l.dedup();
        }
        let x = Array2::from_shape_fn((n, f), |_| rng.gen_range(-1.0..1.0));
        let input = GnnInput::new(Adjacency::from_lists(&lists), x);
        let nodes: Vec<usize> = (0..n).collect();
        let labels = (0..n).map(|i| i % k).collect();
        let groups = (0..n).map(|i| if (i / k).is_multiple_of(2) { Group::G0 } else { Group::G1 }).collect();
        (input, LabeledNodes { nodes, labels, groups })
    }

    #[test]
    fn zero_lambda_matches_plain_training() {
        let (input, all) = instance(3, 16, 6, 3);
        let train = LabeledNodes { nodes: all.nodes[..12].to_vec(), labels: all.labels[..12].to_vec(), groups: all.groups[..12].to_vec() };
        let valid = LabeledNodes { nodes: all.nodes[12..].to_vec(), labels: all.labels[12..].to_vec(), groups: all.groups[12..].to_vec() };
        let base = GnnTrainConfig { hidden: 8, epochs: 40, seed: 9, ..Default::default() };
        let a = train_gnn(&input, 3, &train, &valid, &base).unwrap();
        let b = train_gnn(&input, 3, &train, &valid, &GnnTrainConfig { fair: FairLossConfig::Dp { lambda: 0.0 }, ..base.clone() }).unwrap();
        let c = train_gnn(&input, 3, &train, &valid, &GnnTrainConfig { fair: FairLossConfig::Eo { lambda: 0.0 }, ..base }).unwrap();
        assert_eq!(a.model, b.model);
        assert_eq!(a.model, c.model);
        assert_eq!(a.train_losses, b.train_losses);
    }

    #[test]
    fn training_reduces_loss() {
        let (input, all) = instance(4, 20, 6, 2);
        let cfg = GnnTrainConfig { hidden: 8, epochs: 100, activation: Activation::Tanh, lr: 0.2, ..Default::default() };
        let t = train_gnn(&input, 2, &all, &LabeledNodes::default(), &cfg).unwrap();
        assert!(t.train_losses.last().unwrap() < &t.train_losses[0]);
        assert_eq!(t.epochs_run, 100);
    }

    #[test]
    fn rejects_overlap_and_bad_labels() {
        let (input, all) = instance(5, 10, 4, 2);
        let cfg = GnnTrainConfig { hidden: 4, epochs: 2, ..Default::default() };
        assert!(matches!(train_gnn(&input, 2, &all, &all, &cfg), Err(GnnError::Overlap(_))));
        assert!(matches!(train_gnn(&input, 1, &all, &LabeledNodes::default(), &cfg), Err(GnnError::LabelOutOfRange { .. })));
    }

    #[test]
    fn divergence_returns_checkpoint() {
        let (input, all) = instance(6, 10, 4, 2);
        let cfg = GnnTrainConfig { hidden: 4, epochs: 50, lr: 1e300, ..Default::default() };
        match train_gnn(&input, 2, &all, &LabeledNodes::default(), &cfg) {
            Err(GnnError::Diverged { checkpoint, .. }) => {
                assert!(checkpoint.w1.iter().all(|x| x.is_finite()))
            }
            other => panic!("expected divergence, got {other:?}"),
        }
    }
}
