//! Synthetic user–item–career graphs with a planted gender bias.
//!
//! Items are split into one pool per (career, group) pair. Each like of a
//! user is drawn from the user's own pool with probability `beta` and from
//! all items otherwise, so `beta = 0` makes likes independent of both
//! career and group. Item titles use pool-specific words with probability
//! `beta` and shared words otherwise.

use std::collections::{BTreeSet, HashMap};

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Dataset, DatasetError};
use crate::hin::{build_graph, EdgeSpec, Group, NodeId, NodeSpec, ProtectedAttribute, Schema};
use crate::rng::stage_rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    /// Users per career, split as `[g0, g1]`.
    pub users_per_career: Vec<[usize; 2]>,
    pub items: usize,
    pub beta: f64,
    pub likes_per_user: usize,
    pub tokens_per_item: usize,
    pub seed: u64,
}

/// Largest-remainder rounding of `total * weights` to integers.
fn apportion(total: usize, weights: &[f64]) -> Vec<usize> {
    let s: f64 = weights.iter().sum();
    let exact: Vec<f64> = weights.iter().map(|w| total as f64 * w / s).collect();
    let mut out: Vec<usize> = exact.iter().map(|x| x.floor() as usize).collect();
    let mut rest: Vec<usize> = (0..weights.len()).collect();
    rest.sort_by(|&a, &b| (exact[b] - exact[b].floor()).total_cmp(&(exact[a] - exact[a].floor())).then(a.cmp(&b)));
    let short = total - out.iter().sum::<usize>();
    for &i in rest.iter().take(short) {
        out[i] += 1;
    }
    out
}

impl SyntheticSpec {
    /// `users` users over `careers` careers with a fraction `g1_fraction` in
    /// group 1. Group 0 favors low-index careers (weights `K, K-1, …, 1`) and
    /// group 1 high-index ones (`1, 2, …, K`).
    pub fn skewed(users: usize, careers: usize, g1_fraction: f64, items: usize, beta: f64, seed: u64) -> Self {
        let n1 = (users as f64 * g1_fraction).round() as usize;
        let n0 = users - n1;
        let w0: Vec<f64> = (0..careers).map(|c| (careers - c) as f64).collect();
        let w1: Vec<f64> = (0..careers).map(|c| (c + 1) as f64).collect();
        let (c0, c1) = (apportion(n0, &w0), apportion(n1, &w1));
        Self {
            users_per_career: c0.into_iter().zip(c1).map(|(a, b)| [a, b]).collect(),
            items,
            beta,
            likes_per_user: 20,
            tokens_per_item: 4,
            seed,
        }
    }

    pub fn num_users(&self) -> usize {
        self.users_per_career.iter().map(|c| c[0] + c[1]).sum()
    }

    pub fn num_pools(&self) -> usize {
        2 * self.users_per_career.len()
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        let bad = |m: String| Err(DatasetError::Spec(m));
        if !(0.0..=1.0).contains(&self.beta) {
            return bad(format!("beta must lie in [0, 1], got {}", self.beta));
        }
        if self.users_per_career.is_empty() || self.num_users() == 0 {
            return bad("no users".into());
        }
        if self.items < self.num_pools() {
            return bad(format!("need at least {} items for the pools, got {}", self.num_pools(), self.items));
        }
        if self.likes_per_user == 0 || self.likes_per_user > self.items / self.num_pools() {
            return bad(format!(
                "likes_per_user must be in 1..={} (the pool size), got {}",
                self.items / self.num_pools(),
                self.likes_per_user
            ));
        }
        Ok(())
    }

    /// Pool of `(career, group)`.
    pub fn pool_index(career: usize, group: Group) -> usize {
        2 * career + group.index()
    }

    /// Pool that item number `i` belongs to (items are dealt round-robin).
    pub fn item_pool(&self, i: usize) -> usize {
        i % self.num_pools()
    }
}

/// Generates the graph, labels and item titles described by `spec`.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Dataset, DatasetError> {
    spec.validate()?;
    let k = spec.users_per_career.len();
    let n_users = spec.num_users();
    let pools = spec.num_pools();
    let mut schema = Schema::new();
    let user_t = schema.add_type("user");
    let item_t = schema.add_type("item");
    let career_t = schema.add_type("career");
    let like = schema.add_relation("like", user_t, item_t)?;
    let choose = schema.add_relation("choose", user_t, career_t)?;

    let mut nodes = Vec::with_capacity(n_users + spec.items + k);
    let mut users = Vec::with_capacity(n_users);
    for (c, counts) in spec.users_per_career.iter().enumerate() {
        for g in Group::BOTH {
            for _ in 0..counts[g.index()] {
                users.push((c, g));
            }
        }
    }
    // interleave careers so user ids do not encode the label
    let mut rng = stage_rng(spec.seed, "synthetic-users", &[]);
    for i in (1..users.len()).rev() {
        let j = rng.gen_range(0..=i);
        users.swap(i, j);
    }
    for i in 0..n_users {
        nodes.push(NodeSpec { id: NodeId(i as u32), node_type: user_t, name: format!("u{i}") });
    }
    let item0 = n_users;
    for i in 0..spec.items {
        nodes.push(NodeSpec { id: NodeId((item0 + i) as u32), node_type: item_t, name: format!("i{i}") });
    }
    let career0 = item0 + spec.items;
    for c in 0..k {
        nodes.push(NodeSpec { id: NodeId((career0 + c) as u32), node_type: career_t, name: format!("c{c}") });
    }

    let pool_items: Vec<Vec<usize>> = (0..pools).map(|p| (0..spec.items).filter(|&i| spec.item_pool(i) == p).collect()).collect();
    let mut edges = Vec::new();
    let mut labels = Vec::with_capacity(n_users);
    let mut groups = Vec::with_capacity(n_users);
    for (i, &(c, g)) in users.iter().enumerate() {
        let u = NodeId(i as u32);
        let career = NodeId((career0 + c) as u32);
        labels.push((u, career));
        groups.push((u, g));
        edges.push(EdgeSpec { src: u, dst: career, relation: choose });
        let own = &pool_items[SyntheticSpec::pool_index(c, g)];
        let mut rng = stage_rng(spec.seed, "synthetic-likes", &[i as u64]);
        let mut liked = BTreeSet::new();
        while liked.len() < spec.likes_per_user {
            let item = if rng.gen_bool(spec.beta) { own[rng.gen_range(0..own.len())] } else { rng.gen_range(0..spec.items) };
            liked.insert(item);
        }
        edges.extend(liked.into_iter().map(|it| EdgeSpec { src: u, dst: NodeId((item0 + it) as u32), relation: like }));
    }

    let mut item_texts = HashMap::with_capacity(spec.items);
    for i in 0..spec.items {
        let mut rng = stage_rng(spec.seed, "synthetic-titles", &[i as u64]);
        let pool = spec.item_pool(i);
        let tokens =
            (0..spec.tokens_per_item)
                .map(|_| {
                    if rng.gen_bool(spec.beta) {
                        format!("p{pool}w{}", rng.gen_range(0..8))
                    } else {
                        format!("w{}", rng.gen_range(0..64))
                    }
                })
                .collect();
        item_texts.insert(NodeId((item0 + i) as u32), tokens);
    }

    let graph = build_graph(
        schema,
        nodes,
        edges,
        ProtectedAttribute { name: "gender".into(), node_type: user_t, group_names: ["M".into(), "F".into()], labels: groups },
    )?;
    Ok(Dataset { graph, labels, item_texts })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn skewed_counts() {
        let s = SyntheticSpec::skewed(200, 4, 0.35, 200, 0.8, 1);
        assert_eq!(s.users_per_career, vec![[52, 7], [39, 14], [26, 21], [13, 28]]);
        assert_eq!(s.num_users(), 200);
    }

    #[test]
    fn deterministic() {
        let s = SyntheticSpec { likes_per_user: 5, ..SyntheticSpec::skewed(60, 3, 0.4, 60, 0.5, 9) };
        let (a, b) = (generate_synthetic(&s).unwrap(), generate_synthetic(&s).unwrap());
        assert_eq!(a.graph.edges(), b.graph.edges());
        assert_eq!(a.labels, b.labels);
        let c = generate_synthetic(&SyntheticSpec { seed: 10, ..s }).unwrap();
        assert_ne!(a.graph.edges(), c.graph.edges());
    }

    #[test]
    fn beta_one_uses_only_own_pool() {
        let s = SyntheticSpec { beta: 1.0, likes_per_user: 5, ..SyntheticSpec::skewed(80, 4, 0.4, 80, 1.0, 3) };
        let ds = generate_synthetic(&s).unwrap();
        let g = &ds.graph;
        let item = g.schema().type_id("item").unwrap();
        let item0 = s.num_users() as u32;
        let career0 = item0 + s.items as u32;
        for &(u, c) in &ds.labels {
            let pool = SyntheticSpec::pool_index((c.0 - career0) as usize, g.group(u).unwrap());
            let likes = g.neighbors_by_type(u, item).unwrap();
            assert_eq!(likes.len(), 5);
            assert!(likes.iter().all(|i| s.item_pool((i.0 - item0) as usize) == pool));
        }
    }

    #[test]
    fn rejects_bad_specs() {
        let s = SyntheticSpec { likes_per_user: 5, ..SyntheticSpec::skewed(20, 2, 0.5, 40, 0.5, 0) };
        assert!(generate_synthetic(&SyntheticSpec { beta: 1.5, ..s.clone() }).is_err());
        assert!(generate_synthetic(&SyntheticSpec { likes_per_user: 11, ..s.clone() }).is_err());
        assert!(generate_synthetic(&SyntheticSpec { items: 3, ..s }).is_err());
    }
}
