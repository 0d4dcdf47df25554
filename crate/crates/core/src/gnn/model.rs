//! Two-layer mean-aggregation GNN with hand-written backpropagation.
//!
//! Layer `l` computes `h_v = act(W_l [h_v ‖ mean_{u∈N(v)} h_u] + b_l)`; an
//! isolated node aggregates the zero vector. A linear head maps the second
//! layer to class logits followed by a softmax.

use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::features::Adjacency;
use crate::rng::stage_rng;

#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    #[default]
    Relu,
}

impl Activation {
    fn apply(self, z: &Array2<f64>) -> Array2<f64> {
        match self {
            Activation::Tanh => z.mapv(f64::tanh),
            Activation::Relu => z.mapv(|x| x.max(0.0)),
        }
    }

    /// Derivative given pre-activation `z` and output `h`.
    fn derivative(self, z: &Array2<f64>, h: &Array2<f64>) -> Array2<f64> {
        match self {
            Activation::Tanh => h.mapv(|y| 1.0 - y * y),
            Activation::Relu => z.mapv(|x| if x > 0.0 { 1.0 } else { 0.0 }),
        }
    }
}

/// Row-wise mean of `h` over each node's neighbors.
pub fn mean_aggregate(adj: &Adjacency, h: ArrayView2<f64>, nodes: impl Iterator<Item = usize>) -> Array2<f64> {
    let nodes: Vec<usize> = nodes.collect();
    let mut out = Array2::zeros((nodes.len(), h.ncols()));
    for (r, &v) in nodes.iter().enumerate() {
        let nbrs = adj.neighbors(v);
        if nbrs.is_empty() {
            continue;
        }
        let mut row = out.row_mut(r);
        for &u in nbrs {
            row += &h.row(u as usize);
        }
        row /= nbrs.len() as f64;
    }
    out
}

/// Features plus their (fixed) neighbor means, computed once per graph.
#[derive(Clone, Debug)]
pub struct GnnInput {
    pub adj: Adjacency,
    pub x: Array2<f64>,
    pub agg_x: Array2<f64>,
}

impl GnnInput {
    pub fn new(adj: Adjacency, x: Array2<f64>) -> Self {
        let agg_x = mean_aggregate(&adj, x.view(), 0..x.nrows());
        Self { adj, x, agg_x }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GnnModel {
    pub activation: Activation,
    /// hidden × 2·features
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    /// hidden × 2·hidden
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
    /// classes × hidden
    pub wo: Array2<f64>,
    pub bo: Array1<f64>,
}

/// Gradients with the same shapes as the model parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct GnnGradients {
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
    pub wo: Array2<f64>,
    pub bo: Array1<f64>,
}

/// Intermediate values of one forward pass over a node list.
#[derive(Clone, Debug)]
pub struct Forward {
    pub nodes: Vec<usize>,
    z1: Array2<f64>,
    h1: Array2<f64>,
    h1_s: Array2<f64>,
    agg_h1_s: Array2<f64>,
    z2: Array2<f64>,
    h2: Array2<f64>,
    pub probs: Array2<f64>,
}

fn glorot(rng: &mut impl Rng, rows: usize, cols: usize) -> Array2<f64> {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    Array2::from_shape_simple_fn((rows, cols), || rng.gen_range(-limit..limit))
}

pub fn softmax_rows(logits: &Array2<f64>) -> Array2<f64> {
    let mut p = logits.clone();
    for mut row in p.rows_mut() {
        let m = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|x| (x - m).exp());
        let s = row.sum();
        row /= s;
    }
    p
}

/// Chains `dL/dP` through a row-wise softmax.
pub fn softmax_backward(probs: &Array2<f64>, d_probs: &Array2<f64>) -> Array2<f64> {
    let mut out = Array2::zeros(probs.raw_dim());
    for ((p, dp), mut o) in probs.rows().into_iter().zip(d_probs.rows()).zip(out.rows_mut()) {
        let inner = p.dot(&dp);
        for ((oi, pi), dpi) in o.iter_mut().zip(p).zip(dp) {
            *oi = pi * (dpi - inner);
        }
    }
    out
}

impl GnnModel {
    pub fn init(feature_dim: usize, hidden: usize, classes: usize, activation: Activation, seed: u64) -> Self {
        let mut rng = stage_rng(seed, "gnn-init", &[]);
        Self {
            activation,
            w1: glorot(&mut rng, hidden, 2 * feature_dim),
            b1: Array1::zeros(hidden),
            w2: glorot(&mut rng, hidden, 2 * hidden),
            b2: Array1::zeros(hidden),
            wo: glorot(&mut rng, classes, hidden),
            bo: Array1::zeros(classes),
        }
    }

    pub fn feature_dim(&self) -> usize {
        self.w1.ncols() / 2
    }

    pub fn hidden(&self) -> usize {
        self.w1.nrows()
    }

    pub fn num_classes(&self) -> usize {
        self.wo.nrows()
    }

    pub fn check_shapes(&self) -> bool {
        let (h, f2) = self.w1.dim();
        f2 % 2 == 0
            && self.b1.len() == h
            && self.w2.dim() == (h, 2 * h)
            && self.b2.len() == h
            && self.wo.ncols() == h
            && self.bo.len() == self.wo.nrows()
    }

    pub fn forward(&self, input: &GnnInput, nodes: &[usize]) -> Forward {
        let f = self.feature_dim();
        let h = self.hidden();
        let z1 = input.x.dot(&self.w1.slice(s![.., ..f]).t()) + input.agg_x.dot(&self.w1.slice(s![.., f..]).t()) + &self.b1;
        let h1 = self.activation.apply(&z1);
        let h1_s = h1.select(Axis(0), nodes);
        let agg_h1_s = mean_aggregate(&input.adj, h1.view(), nodes.iter().copied());
        let z2 = h1_s.dot(&self.w2.slice(s![.., ..h]).t()) + agg_h1_s.dot(&self.w2.slice(s![.., h..]).t()) + &self.b2;
        let h2 = self.activation.apply(&z2);
        let logits = h2.dot(&self.wo.t()) + &self.bo;
        let probs = softmax_rows(&logits);
        Forward { nodes: nodes.to_vec(), z1, h1, h1_s, agg_h1_s, z2, h2, probs }
    }

    /// Per-node class probabilities.
    pub fn predict(&self, input: &GnnInput, nodes: &[usize]) -> Array2<f64> {
        self.forward(input, nodes).probs
    }

    /// Parameter gradients given `dL/dlogits` for the rows of `fwd`.
    pub fn backward(&self, input: &GnnInput, fwd: &Forward, d_logits: &Array2<f64>) -> GnnGradients {
        let f = self.feature_dim();
        let h = self.hidden();
        let wo = d_logits.t().dot(&fwd.h2);
        let bo = d_logits.sum_axis(Axis(0));
        let dh2 = d_logits.dot(&self.wo);
        let dz2 = dh2 * self.activation.derivative(&fwd.z2, &fwd.h2);

        let mut w2 = Array2::zeros(self.w2.raw_dim());
        w2.slice_mut(s![.., ..h]).assign(&dz2.t().dot(&fwd.h1_s));
        w2.slice_mut(s![.., h..]).assign(&dz2.t().dot(&fwd.agg_h1_s));
        let b2 = dz2.sum_axis(Axis(0));
        let dh1_s = dz2.dot(&self.w2.slice(s![.., ..h]));
        let d_agg = dz2.dot(&self.w2.slice(s![.., h..]));

        let mut dh1 = Array2::<f64>::zeros(fwd.h1.raw_dim());
        for (r, &v) in fwd.nodes.iter().enumerate() {
            {
                let mut row = dh1.row_mut(v);
                row += &dh1_s.row(r);
            }
            let nbrs = input.adj.neighbors(v);
            if nbrs.is_empty() {
                continue;
            }
            let scale = 1.0 / nbrs.len() as f64;
            for &u in nbrs {
                dh1.row_mut(u as usize).scaled_add(scale, &d_agg.row(r));
            }
        }
        let dz1 = dh1 * self.activation.derivative(&fwd.z1, &fwd.h1);
        let mut w1 = Array2::zeros(self.w1.raw_dim());
        w1.slice_mut(s![.., ..f]).assign(&dz1.t().dot(&input.x));
        w1.slice_mut(s![.., f..]).assign(&dz1.t().dot(&input.agg_x));
        let b1 = dz1.sum_axis(Axis(0));
        GnnGradients { w1, b1, w2, b2, wo, bo }
    }

    /// `self -= lr * grad`
    pub fn descend(&mut self, grad: &GnnGradients, lr: f64) {
        self.w1.scaled_add(-lr, &grad.w1);
        self.b1.scaled_add(-lr, &grad.b1);
        self.w2.scaled_add(-lr, &grad.w2);
        self.b2.scaled_add(-lr, &grad.b2);
        self.wo.scaled_add(-lr, &grad.wo);
        self.bo.scaled_add(-lr, &grad.bo);
    }

    /// Named parameter tensors in serialization order.
    pub fn tensors(&self) -> Vec<(&'static str, Vec<usize>, &[f64])> {
        vec![
            ("w1", self.w1.shape().to_vec(), self.w1.as_slice().expect("standard layout")),
            ("b1", self.b1.shape().to_vec(), self.b1.as_slice().expect("standard layout")),
            ("w2", self.w2.shape().to_vec(), self.w2.as_slice().expect("standard layout")),
            ("b2", self.b2.shape().to_vec(), self.b2.as_slice().expect("standard layout")),
            ("wo", self.wo.shape().to_vec(), self.wo.as_slice().expect("standard layout")),
            ("bo", self.bo.shape().to_vec(), self.bo.as_slice().expect("standard layout")),
        ]
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            self.w1.as_slice_mut().expect("standard layout"),
            self.b1.as_slice_mut().expect("standard layout"),
            self.w2.as_slice_mut().expect("standard layout"),
            self.b2.as_slice_mut().expect("standard layout"),
            self.wo.as_slice_mut().expect("standard layout"),
            self.bo.as_slice_mut().expect("standard layout"),
        ]
    }
}

impl GnnGradients {
    pub fn tensors(&self) -> Vec<&[f64]> {
        vec![
            self.w1.as_slice().expect("standard layout"),
            self.b1.as_slice().expect("standard layout"),
            self.w2.as_slice().expect("standard layout"),
            self.b2.as_slice().expect("standard layout"),
            self.wo.as_slice().expect("standard layout"),
            self.bo.as_slice().expect("standard layout"),
        ]
    }
}
