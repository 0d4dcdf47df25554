//! Typed, undirected multigraph with a binary protected attribute.
//!
//! A [`HinGraph`] is immutable once built. Neighbor lists are materialized
//! per node and per neighbor type, sorted by ascending id, and the lists of
//! protected-type neighbors are further split by group.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeId(pub u32);

impl NodeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TypeId(pub u16);

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RelationId(pub u16);

/// Binary protected-attribute value.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Group {
    G0,
    G1,
}

impl Group {
    pub const BOTH: [Group; 2] = [Group::G0, Group::G1];

    #[inline]
    pub fn index(self) -> usize {
        match self {
            Group::G0 => 0,
            Group::G1 => 1,
        }
    }

    pub fn from_index(i: usize) -> Option<Group> {
        match i {
            0 => Some(Group::G0),
            1 => Some(Group::G1),
            _ => None,
        }
    }

    pub fn other(self) -> Group {
        match self {
            Group::G0 => Group::G1,
            Group::G1 => Group::G0,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum HinError {
    #[error("a heterogeneous graph needs at least two node types, got {0}")]
    TooFewTypes(usize),
    #[error("duplicate node id {0}")]
    DuplicateNode(NodeId),
    #[error("node ids must be dense: id {id} out of range for {count} nodes")]
    NonDenseId { id: NodeId, count: usize },
    #[error("unknown node id {0}")]
    UnknownNode(NodeId),
    #[error("unknown node type {0:?}")]
    UnknownType(TypeId),
    #[error("unknown relation {0:?}")]
    UnknownRelation(RelationId),
    #[error("relation {name:?} already declared with different endpoint types")]
    ConflictingRelation { name: String },
    #[error("edge {index} ({src} -[{relation}]-> {dst}): endpoint types {src_type:?}/{dst_type:?} do not match the relation")]
    TypeMismatch { index: usize, src: NodeId, dst: NodeId, relation: String, src_type: String, dst_type: String },
    #[error("node {0} of the protected type has no group label")]
    MissingGroup(NodeId),
    #[error("node {0} is not of the protected type but carries a group label")]
    GroupOnWrongType(NodeId),
    #[error("node {0} has more than one group label")]
    DuplicateGroup(NodeId),
    #[error("type {0:?} is not the protected type")]
    NotProtectedType(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Relation {
    pub name: String,
    pub src_type: TypeId,
    pub dst_type: TypeId,
}

/// Node types and relation declarations.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Schema {
    types: Vec<String>,
    relations: Vec<Relation>,
}

impl Schema {
    pub fn new() -> Self {
        Self::default()
    }

    /// Declares a node type, returning the existing id if already present.
    pub fn add_type(&mut self, name: &str) -> TypeId {
        if let Some(t) = self.type_id(name) {
            return t;
        }
        self.types.push(name.to_string());
        TypeId((self.types.len() - 1) as u16)
    }

    pub fn add_relation(&mut self, name: &str, src: TypeId, dst: TypeId) -> Result<RelationId, HinError> {
        for t in [src, dst] {
            if t.0 as usize >= self.types.len() {
                return Err(HinError::UnknownType(t));
            }
        }
        if let Some(r) = self.relation_id(name) {
            let rel = &self.relations[r.0 as usize];
            if rel.src_type == src && rel.dst_type == dst {
                return Ok(r);
            }
            return Err(HinError::ConflictingRelation { name: name.to_string() });
        }
        self.relations.push(Relation { name: name.to_string(), src_type: src, dst_type: dst });
        Ok(RelationId((self.relations.len() - 1) as u16))
    }

    pub fn type_id(&self, name: &str) -> Option<TypeId> {
        self.types.iter().position(|t| t == name).map(|i| TypeId(i as u16))
    }

    pub fn type_name(&self, t: TypeId) -> &str {
        &self.types[t.0 as usize]
    }

    pub fn relation_id(&self, name: &str) -> Option<RelationId> {
        self.relations.iter().position(|r| r.name == name).map(|i| RelationId(i as u16))
    }

    pub fn relation(&self, r: RelationId) -> &Relation {
        &self.relations[r.0 as usize]
    }

    /// Relation connecting the two types in either orientation, if any.
    pub fn relation_between(&self, a: TypeId, b: TypeId) -> Option<RelationId> {
        self.relations
            .iter()
            .position(|r| (r.src_type == a && r.dst_type == b) || (r.src_type == b && r.dst_type == a))
            .map(|i| RelationId(i as u16))
    }

    pub fn num_types(&self) -> usize {
        self.types.len()
    }

    pub fn types(&self) -> impl Iterator<Item = (TypeId, &str)> {
        self.types.iter().enumerate().map(|(i, s)| (TypeId(i as u16), s.as_str()))
    }

    pub fn relations(&self) -> impl Iterator<Item = (RelationId, &Relation)> {
        self.relations.iter().enumerate().map(|(i, r)| (RelationId(i as u16), r))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NodeSpec {
    pub id: NodeId,
    pub node_type: TypeId,
    pub name: String,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EdgeSpec {
    pub src: NodeId,
    pub dst: NodeId,
    pub relation: RelationId,
}

/// Binary attribute carried by every node of one designated type.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProtectedAttribute {
    pub name: String,
    pub node_type: TypeId,
    /// Display names for `G0` and `G1`.
    pub group_names: [String; 2],
    pub labels: Vec<(NodeId, Group)>,
}

#[derive(Clone, Debug)]
pub struct HinGraph {
    schema: Schema,
    node_types: Vec<TypeId>,
    names: Vec<String>,
    name_index: HashMap<String, NodeId>,
    nodes_by_type: Vec<Vec<NodeId>>,
    groups: Vec<Option<Group>>,
    attr_name: String,
    group_names: [String; 2],
    protected_type: TypeId,
    group_sizes: [usize; 2],
    edges: Vec<EdgeSpec>,
    // adj[v][t]: neighbors of v with type t, ascending
    adj: Vec<Vec<Vec<NodeId>>>,
    // group_adj[v][g]: protected-type neighbors of v in group g, ascending
    group_adj: Vec<[Vec<NodeId>; 2]>,
}

/// Builds a graph from node, edge and attribute lists.
///
/// Node ids must be unique and dense (`0..nodes.len()`). Each edge must
/// connect nodes whose types match its relation's declared source and
/// destination types. Every node of the protected type needs exactly one
/// group label and no other node may carry one.
pub fn build_graph(schema: Schema, nodes: Vec<NodeSpec>, edges: Vec<EdgeSpec>, attr: ProtectedAttribute) -> Result<HinGraph, HinError> {
    if schema.num_types() < 2 {
        return Err(HinError::TooFewTypes(schema.num_types()));
    }
    let n = nodes.len();
    let mut node_types: Vec<Option<TypeId>> = vec![None; n];
    let mut names = vec![String::new(); n];
    for spec in nodes {
        let i = spec.id.index();
        if i >= n {
            return Err(HinError::NonDenseId { id: spec.id, count: n });
        }
        if node_types[i].is_some() {
            return Err(HinError::DuplicateNode(spec.id));
        }
        if spec.node_type.0 as usize >= schema.num_types() {
            return Err(HinError::UnknownType(spec.node_type));
        }
        node_types[i] = Some(spec.node_type);
        names[i] = spec.name;
    }
    // Every slot is filled: n specs, none duplicated, none out of range.
    let node_types: Vec<TypeId> = node_types.into_iter().map(|t| t.expect("dense ids")).collect();

    if attr.node_type.0 as usize >= schema.num_types() {
        return Err(HinError::UnknownType(attr.node_type));
    }
    let mut groups: Vec<Option<Group>> = vec![None; n];
    for &(v, g) in &attr.labels {
        if v.index() >= n {
            return Err(HinError::UnknownNode(v));
        }
        if node_types[v.index()] != attr.node_type {
            return Err(HinError::GroupOnWrongType(v));
        }
        if groups[v.index()].is_some() {
            return Err(HinError::DuplicateGroup(v));
        }
        groups[v.index()] = Some(g);
    }
    let mut group_sizes = [0usize; 2];
    for (i, t) in node_types.iter().enumerate() {
        if *t == attr.node_type {
            match groups[i] {
                Some(g) => group_sizes[g.index()] += 1,
                None => return Err(HinError::MissingGroup(NodeId(i as u32))),
            }
        }
    }

    for (index, e) in edges.iter().enumerate() {
        for v in [e.src, e.dst] {
            if v.index() >= n {
                return Err(HinError::UnknownNode(v));
            }
        }
        if e.relation.0 as usize >= schema.relations.len() {
            return Err(HinError::UnknownRelation(e.relation));
        }
        let rel = schema.relation(e.relation);
        let (st, dt) = (node_types[e.src.index()], node_types[e.dst.index()]);
        if st != rel.src_type || dt != rel.dst_type {
            return Err(HinError::TypeMismatch {
                index,
                src: e.src,
                dst: e.dst,
                relation: rel.name.clone(),
                src_type: schema.type_name(st).to_string(),
                dst_type: schema.type_name(dt).to_string(),
            });
        }
    }

    let mut name_index = HashMap::with_capacity(n);
    for (i, name) in names.iter().enumerate() {
        name_index.entry(name.clone()).or_insert(NodeId(i as u32));
    }
    let mut nodes_by_type = vec![Vec::new(); schema.num_types()];
    for (i, t) in node_types.iter().enumerate() {
        nodes_by_type[t.0 as usize].push(NodeId(i as u32));
    }

    let mut graph = HinGraph {
        schema,
        node_types,
        names,
        name_index,
        nodes_by_type,
        groups,
        attr_name: attr.name,
        group_names: attr.group_names,
        protected_type: attr.node_type,
        group_sizes,
        edges,
        adj: Vec::new(),
        group_adj: Vec::new(),
    };
    graph.index_edges();
    Ok(graph)
}

impl HinGraph {
    fn index_edges(&mut self) {
        let n = self.node_types.len();
        let k = self.schema.num_types();
        let mut adj = vec![vec![Vec::new(); k]; n];
        for e in &self.edges {
            adj[e.src.index()][self.node_types[e.dst.index()].0 as usize].push(e.dst);
            adj[e.dst.index()][self.node_types[e.src.index()].0 as usize].push(e.src);
        }
        for lists in adj.iter_mut() {
            for l in lists.iter_mut() {
                l.sort_unstable();
            }
        }
        let p = self.protected_type.0 as usize;
        let group_adj = adj
            .iter()
            .map(|lists| {
                let mut split: [Vec<NodeId>; 2] = [Vec::new(), Vec::new()];
                for &u in &lists[p] {
                    if let Some(g) = self.groups[u.index()] {
                        split[g.index()].push(u);
                    }
                }
                split
            })
            .collect();
        self.adj = adj;
        self.group_adj = group_adj;
    }

    /// A copy of this graph keeping the same nodes and only the edges for
    /// which `keep` returns true.
    pub fn filter_edges(&self, keep: impl Fn(&EdgeSpec) -> bool) -> HinGraph {
        let mut g = HinGraph {
            schema: self.schema.clone(),
            node_types: self.node_types.clone(),
            names: self.names.clone(),
            name_index: self.name_index.clone(),
            nodes_by_type: self.nodes_by_type.clone(),
            groups: self.groups.clone(),
            attr_name: self.attr_name.clone(),
            group_names: self.group_names.clone(),
            protected_type: self.protected_type,
            group_sizes: self.group_sizes,
            edges: self.edges.iter().copied().filter(|e| keep(e)).collect(),
            adj: Vec::new(),
            group_adj: Vec::new(),
        };
        g.index_edges();
        g
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn num_nodes(&self) -> usize {
        self.node_types.len()
    }

    pub fn edges(&self) -> &[EdgeSpec] {
        &self.edges
    }

    pub fn contains(&self, v: NodeId) -> bool {
        v.index() < self.num_nodes()
    }

    pub fn node_type(&self, v: NodeId) -> Result<TypeId, HinError> {
        self.node_types.get(v.index()).copied().ok_or(HinError::UnknownNode(v))
    }

    pub fn name(&self, v: NodeId) -> &str {
        &self.names[v.index()]
    }

    pub fn node_by_name(&self, name: &str) -> Option<NodeId> {
        self.name_index.get(name).copied()
    }

    pub fn nodes_of_type(&self, t: TypeId) -> &[NodeId] {
        self.nodes_by_type.get(t.0 as usize).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn group(&self, v: NodeId) -> Option<Group> {
        self.groups.get(v.index()).copied().flatten()
    }

    pub fn attribute_name(&self) -> &str {
        &self.attr_name
    }

    pub fn group_name(&self, g: Group) -> &str {
        &self.group_names[g.index()]
    }

    pub fn protected_type(&self) -> TypeId {
        self.protected_type
    }

    pub fn group_size(&self, g: Group) -> usize {
        self.group_sizes[g.index()]
    }

    /// The globally larger group. Ties go to `G0`.
    pub fn advantaged(&self) -> Group {
        if self.group_sizes[1] > self.group_sizes[0] {
            Group::G1
        } else {
            Group::G0
        }
    }

    pub fn disadvantaged(&self) -> Group {
        self.advantaged().other()
    }

    /// All neighbors of `v` with type `t`, ascending by id.
    pub fn neighbors_by_type(&self, v: NodeId, t: TypeId) -> Result<&[NodeId], HinError> {
        let lists = self.adj.get(v.index()).ok_or(HinError::UnknownNode(v))?;
        Ok(lists.get(t.0 as usize).map(Vec::as_slice).unwrap_or(&[]))
    }

    /// Neighbors of `v` of the protected type `t` that belong to `grp`.
    pub fn neighbors_by_type_and_group(&self, v: NodeId, t: TypeId, grp: Group) -> Result<&[NodeId], HinError> {
        if t != self.protected_type {
            let name = self.schema.types.get(t.0 as usize).cloned().unwrap_or_else(|| format!("{t:?}"));
            return Err(HinError::NotProtectedType(name));
        }
        let split = self.group_adj.get(v.index()).ok_or(HinError::UnknownNode(v))?;
        Ok(&split[grp.index()])
    }

    /// Total degree over all neighbor types.
    pub fn degree(&self, v: NodeId) -> usize {
        self.adj[v.index()].iter().map(Vec::len).sum()
    }

    /// Nodes of type `t` with more than one edge of relation `rel`.
    pub fn multi_edge_nodes(&self, t: TypeId, rel: RelationId) -> Vec<NodeId> {
        let mut counts = vec![0u32; self.num_nodes()];
        for e in self.edges.iter().filter(|e| e.relation == rel) {
            counts[e.src.index()] += 1;
            if e.dst != e.src {
                counts[e.dst.index()] += 1;
            }
        }
        self.nodes_of_type(t).iter().copied().filter(|v| counts[v.index()] > 1).collect()
    }
}
