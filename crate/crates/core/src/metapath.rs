//! Meta-path guided random walks.
//!
//! A walker follows the node-type sequence of a [`MetaPath`], repeating it
//! cyclically. At each step the next node is drawn uniformly among the
//! current node's neighbors of the required type. In fair mode, steps from
//! a career node to the protected (user) type use a group-aware kernel that
//! gives the disadvantaged group `r` times the per-group mass of the
//! advantaged group.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hin::{HinError, HinGraph, NodeId, RelationId, Schema, TypeId};
use crate::rng::stage_rng;

pub type Walk = Vec<NodeId>;

#[derive(Debug, Error, PartialEq)]
pub enum SampleError {
    #[error(transparent)]
    Graph(#[from] HinError),
    #[error("unknown node type {0:?} in meta-path")]
    UnknownType(String),
    #[error("unknown relation {0:?} in meta-path")]
    UnknownRelation(String),
    #[error("relation {relation:?} does not connect {from:?} and {to:?}")]
    IncompatibleStep { relation: String, from: String, to: String },
    #[error("meta-path needs at least two node types")]
    TooShort,
    #[error("meta-path {0} does not end on its start type and cannot be repeated")]
    NotCyclic(String),
    #[error("node {0} is not a career node")]
    NotCareer(NodeId),
    #[error("invalid sampler configuration: {0}")]
    Config(String),
}

/// A sequence of node types joined by relations.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MetaPath {
    pub name: String,
    pub types: Vec<TypeId>,
    pub relations: Vec<RelationId>,
}

impl MetaPath {
    pub fn new(schema: &Schema, name: &str, types: Vec<TypeId>, relations: Vec<RelationId>) -> Result<Self, SampleError> {
        if types.len() < 2 || relations.len() != types.len() - 1 {
            return Err(SampleError::TooShort);
        }
        for (w, &r) in types.windows(2).zip(&relations) {
            let rel = schema.relation(r);
            let ok = (rel.src_type == w[0] && rel.dst_type == w[1]) || (rel.src_type == w[1] && rel.dst_type == w[0]);
            if !ok {
                return Err(SampleError::IncompatibleStep {
                    relation: rel.name.clone(),
                    from: schema.type_name(w[0]).to_string(),
                    to: schema.type_name(w[1]).to_string(),
                });
            }
        }
        Ok(Self { name: name.to_string(), types, relations })
    }

    /// Builds a meta-path from type and relation names.
    pub fn from_names(schema: &Schema, name: &str, types: &[&str], relations: &[&str]) -> Result<Self, SampleError> {
        let t = types
            .iter()
            .map(|n| schema.type_id(n).ok_or_else(|| SampleError::UnknownType(n.to_string())))
            .collect::<Result<Vec<_>, _>>()?;
        let r = relations
            .iter()
            .map(|n| schema.relation_id(n).ok_or_else(|| SampleError::UnknownRelation(n.to_string())))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(schema, name, t, r)
    }

    /// Number of node positions in one traversal (relations + 1).
    pub fn len(&self) -> usize {
        self.types.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn is_cyclic(&self) -> bool {
        self.types.first() == self.types.last()
    }

    /// Expected type at position `i` of a walk that repeats the path.
    pub fn type_at(&self, i: usize) -> TypeId {
        let period = self.types.len() - 1;
        if period == 0 || i < self.types.len() {
            return self.types[i.min(self.types.len() - 1)];
        }
        self.types[i % period]
    }
}

/// Names binding the built-in meta-paths to a loaded schema.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Roles {
    pub user: String,
    pub item: String,
    pub career: String,
    pub like: String,
    pub choose: String,
}

impl Default for Roles {
    fn default() -> Self {
        Self { user: "user".into(), item: "item".into(), career: "career".into(), like: "like".into(), choose: "choose".into() }
    }
}

/// `career → user → item → user → career` and `user → item → user`.
pub fn builtin_metapaths(schema: &Schema, roles: &Roles) -> Result<Vec<MetaPath>, SampleError> {
    Ok(vec![builtin_metapath(schema, roles, "cuiuc")?, builtin_metapath(schema, roles, "uiu")?])
}

pub fn builtin_metapath(schema: &Schema, roles: &Roles, name: &str) -> Result<MetaPath, SampleError> {
    let (u, i, c) = (roles.user.as_str(), roles.item.as_str(), roles.career.as_str());
    let (like, choose) = (roles.like.as_str(), roles.choose.as_str());
    match name {
        "cuiuc" => MetaPath::from_names(schema, name, &[c, u, i, u, c], &[choose, like, like, choose]),
        "uiu" => MetaPath::from_names(schema, name, &[u, i, u], &[like, like]),
        other => Err(SampleError::Config(format!("unknown built-in meta-path {other:?}"))),
    }
}

/// Probability map over the next node, ascending by node id. Empty means
/// the walk has no conforming neighbor and terminates.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Transition(pub Vec<(NodeId, f64)>);

impl Transition {
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn prob(&self, v: NodeId) -> f64 {
        self.0.iter().find(|(u, _)| *u == v).map(|(_, p)| *p).unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.0.iter().map(|(_, p)| p).sum()
    }

    /// Cumulative-sum inversion of `u ∈ [0, 1)`.
    pub fn sample_with(&self, u: f64) -> Option<NodeId> {
        let target = u * self.total();
        let mut acc = 0.0;
        let mut last = None;
        for &(v, p) in &self.0 {
            if p <= 0.0 {
                continue;
            }
            acc += p;
            last = Some(v);
            if target < acc {
                return Some(v);
            }
        }
        last
    }

    fn from_weights(weights: Vec<(NodeId, f64)>) -> Self {
        let total: f64 = weights.iter().map(|(_, w)| w).sum();
        if total <= 0.0 {
            return Transition::default();
        }
        Transition(weights.into_iter().map(|(v, w)| (v, w / total)).collect())
    }
}

/// Uniform kernel over the neighbors of `v` whose type is `next_type`.
pub fn transition_standard(g: &HinGraph, v: NodeId, next_type: TypeId) -> Result<Transition, SampleError> {
    let nbrs = g.neighbors_by_type(v, next_type)?;
    if nbrs.is_empty() {
        return Ok(Transition::default());
    }
    let p = 1.0 / nbrs.len() as f64;
    Ok(Transition(nbrs.iter().map(|&u| (u, p)).collect()))
}

/// How the ratio `r` enters the group-aware kernel.
#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FairKernel {
    /// Disadvantaged members get mass `r / |N(v, U, g_dis)|`, advantaged
    /// members `1 / |N(v, U, g_adv)|`.
    #[default]
    Disadvantaged,
    /// Both groups get `r / |N(v, U, g_i)|`; `r` cancels on normalization.
    Literal,
}

/// Group-aware kernel for a career → user step.
pub fn transition_fair(g: &HinGraph, v: NodeId, career_type: TypeId, ratio: f64, kernel: FairKernel) -> Result<Transition, SampleError> {
    if g.node_type(v)? != career_type {
        return Err(SampleError::NotCareer(v));
    }
    if !(ratio.is_finite() && ratio > 0.0) {
        return Err(SampleError::Config(format!("fair ratio must be positive, got {ratio}")));
    }
    let user = g.protected_type();
    let dis = g.disadvantaged();
    let mut weights = Vec::with_capacity(g.neighbors_by_type(v, user)?.len());
    for grp in crate::hin::Group::BOTH {
        let members = g.neighbors_by_type_and_group(v, user, grp)?;
        if members.is_empty() {
            continue;
        }
        let scale = match kernel {
            FairKernel::Literal => ratio,
            FairKernel::Disadvantaged if grp == dis => ratio,
            FairKernel::Disadvantaged => 1.0,
        };
        let w = scale / members.len() as f64;
        weights.extend(members.iter().map(|&u| (u, w)));
    }
    weights.sort_by_key(|(u, _)| *u);
    Ok(Transition::from_weights(weights))
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum SamplingMode {
    Standard,
    Fair { career_type: TypeId, ratio: f64, kernel: FairKernel },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub num_walks_per_start: usize,
    /// Number of meta-path repetitions per walk.
    pub walk_length: usize,
    pub seed: u64,
    pub mode: SamplingMode,
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<(), SampleError> {
        if self.walk_length == 0 {
            return Err(SampleError::Config("walk_length must be at least 1".into()));
        }
        if let SamplingMode::Fair { ratio, .. } = self.mode {
            if !(ratio >= 1.0 && ratio.is_finite()) {
                return Err(SampleError::Config(format!("fair ratio must be >= 1, got {ratio}")));
            }
        }
        Ok(())
    }
}

/// Kernel for one step of a walk under `mode`.
pub fn step_transition(g: &HinGraph, v: NodeId, next_type: TypeId, mode: &SamplingMode) -> Result<Transition, SampleError> {
    match *mode {
        SamplingMode::Fair { career_type, ratio, kernel } if next_type == g.protected_type() && g.node_type(v)? == career_type => {
            transition_fair(g, v, career_type, ratio, kernel)
        }
        _ => transition_standard(g, v, next_type),
    }
}

fn walk_from(g: &HinGraph, mp: &MetaPath, cfg: &SamplerConfig, start: NodeId, index: usize) -> Result<Walk, SampleError> {
    let mut rng = stage_rng(cfg.seed, "walk", &[u64::from(start.0), index as u64]);
    let steps = mp.types.len() - 1;
    let mut walk = Vec::with_capacity(1 + cfg.walk_length * steps);
    walk.push(start);
    let mut cur = start;
    'outer: for _ in 0..cfg.walk_length {
        for &next_type in &mp.types[1..] {
            let t = step_transition(g, cur, next_type, &cfg.mode)?;
            match t.sample_with(rng.gen::<f64>()) {
                Some(v) => {
                    walk.push(v);
                    cur = v;
                }
                None => break 'outer,
            }
        }
    }
    Ok(walk)
}

/// Generates `num_walks_per_start` walks from every node of the meta-path's
/// first type, in ascending start order. Walks that hit a dead end are kept
/// truncated if they contain at least two nodes.
pub fn generate_walks(g: &HinGraph, mp: &MetaPath, cfg: &SamplerConfig) -> Result<Vec<Walk>, SampleError> {
    cfg.validate()?;
    for &t in &mp.types {
        if t.0 as usize >= g.schema().num_types() {
            return Err(SampleError::UnknownType(format!("{t:?}")));
        }
    }
    for &r in &mp.relations {
        if r.0 as usize >= g.schema().relations().count() {
            return Err(SampleError::UnknownRelation(format!("{r:?}")));
        }
    }
    if cfg.walk_length > 1 && !mp.is_cyclic() {
        return Err(SampleError::NotCyclic(mp.name.clone()));
    }
    let starts = g.nodes_of_type(mp.types[0]);
    let per_start: Vec<Vec<Walk>> = starts
        .par_iter()
        .map(|&s| {
            let mut out = Vec::with_capacity(cfg.num_walks_per_start);
            for k in 0..cfg.num_walks_per_start {
                let w = walk_from(g, mp, cfg, s, k)?;
                if w.len() >= 2 {
                    out.push(w);
                }
            }
            Ok(out)
        })
        .collect::<Result<_, SampleError>>()?;
    Ok(per_start.into_iter().flatten().collect())
}

/// Checks a walk edge-by-edge against the graph and type-by-type against
/// the repeated meta-path.
pub fn validate_walk(g: &HinGraph, mp: &MetaPath, walk: &[NodeId]) -> bool {
    for (i, &v) in walk.iter().enumerate() {
        match g.node_type(v) {
            Ok(t) if t == mp.type_at(i) => {}
            _ => return false,
        }
    }
    walk.windows(2)
        .all(|w| g.node_type(w[1]).ok().and_then(|t| g.neighbors_by_type(w[0], t).ok()).is_some_and(|n| n.binary_search(&w[1]).is_ok()))
}
