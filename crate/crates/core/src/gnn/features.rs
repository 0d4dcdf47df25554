//! Hashed bag-of-words node features and the aggregation adjacency.

use std::collections::HashMap;

use ndarray::Array2;

use crate::hin::{HinGraph, NodeId, TypeId};

pub const FEATURE_DIM: usize = 50;

/// Dense feature rows for every node of a graph. Nodes without features
/// (careers, empty titles, itemless users) hold the zero vector.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    pub data: Array2<f64>,
}

impl FeatureMatrix {
    pub fn dim(&self) -> usize {
        self.data.ncols()
    }

    pub fn row(&self, v: NodeId) -> ndarray::ArrayView1<'_, f64> {
        self.data.row(v.index())
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// Slot and sign a token contributes to.
pub fn token_slot(token: &str, dim: usize) -> (usize, f64) {
    let h = fnv1a(token.as_bytes());
    let sign = if h >> 63 == 1 { -1.0 } else { 1.0 };
    ((h % dim as u64) as usize, sign)
}

/// Mean of the tokens' signed one-hot vectors; zero for no tokens.
pub fn hash_tokens(tokens: &[String], dim: usize) -> Vec<f64> {
    let mut v = vec![0.0; dim];
    if tokens.is_empty() {
        return v;
    }
    for t in tokens {
        let (slot, sign) = token_slot(t, dim);
        v[slot] += sign;
    }
    let n = tokens.len() as f64;
    v.iter_mut().for_each(|x| *x /= n);
    v
}

/// Item features from hashed titles; user features as the mean of their
/// linked items' features.
pub fn build_features(
    g: &HinGraph,
    item_texts: &HashMap<NodeId, Vec<String>>,
    user_type: TypeId,
    item_type: TypeId,
    dim: usize,
) -> FeatureMatrix {
    let mut data = Array2::zeros((g.num_nodes(), dim));
    for &i in g.nodes_of_type(item_type) {
        if let Some(tokens) = item_texts.get(&i) {
            let v = hash_tokens(tokens, dim);
            data.row_mut(i.index()).assign(&ndarray::ArrayView1::from(&v));
        }
    }
    let mut fm = FeatureMatrix { data };
    aggregate_user_features(g, &mut fm, user_type, item_type);
    fm
}

/// Overwrites each user row with the mean of its linked items' rows.
pub fn aggregate_user_features(g: &HinGraph, fm: &mut FeatureMatrix, user_type: TypeId, item_type: TypeId) {
    for &u in g.nodes_of_type(user_type) {
        let items = g.neighbors_by_type(u, item_type).unwrap_or(&[]);
        let mut acc = ndarray::Array1::<f64>::zeros(fm.dim());
        for &i in items {
            acc += &fm.data.row(i.index());
        }
        if !items.is_empty() {
            acc /= items.len() as f64;
        }
        fm.data.row_mut(u.index()).assign(&acc);
    }
}

/// Compressed adjacency used for mean aggregation; nodes of excluded types
/// have no neighbors and are never neighbors.
#[derive(Clone, Debug, PartialEq)]
pub struct Adjacency {
    offsets: Vec<usize>,
    targets: Vec<u32>,
}

impl Adjacency {
    pub fn from_hin(g: &HinGraph, exclude: &[TypeId]) -> Self {
        let mut offsets = Vec::with_capacity(g.num_nodes() + 1);
        let mut targets = Vec::new();
        offsets.push(0);
        for v in 0..g.num_nodes() {
            let v = NodeId(v as u32);
            let vt = g.node_type(v).expect("node in range");
            if !exclude.contains(&vt) {
                for (t, _) in g.schema().types() {
                    if exclude.contains(&t) {
                        continue;
                    }
                    targets.extend(g.neighbors_by_type(v, t).expect("node in range").iter().map(|u| u.0));
                }
            }
            offsets.push(targets.len());
        }
        Self { offsets, targets }
    }

    /// Adjacency from explicit neighbor lists (node `i` → `lists[i]`).
    pub fn from_lists(lists: &[Vec<usize>]) -> Self {
        let mut offsets = vec![0];
        let mut targets = Vec::new();
        for l in lists {
            targets.extend(l.iter().map(|&u| u as u32));
            offsets.push(targets.len());
        }
        Self { offsets, targets }
    }

    pub fn num_nodes(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn neighbors(&self, v: usize) -> &[u32] {
        &self.targets[self.offsets[v]..self.offsets[v + 1]]
    }
}
