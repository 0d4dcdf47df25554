//! Dataset loaders and the synthetic biased-graph generator.

mod movielens;
mod synthetic;

use std::collections::HashMap;

use log::warn;
use thiserror::Error;

use crate::hin::{HinError, HinGraph, NodeId, TypeId};
use crate::metapath::Roles;

pub use movielens::{
    load_movielens, parse_movies, parse_ratings, parse_users, tokenize, MovieLensOptions, MovieLensRaw, MovieRow, RatingRow, UserRow,
    DEFAULT_REMOVED_OCCUPATIONS, OCCUPATIONS,
};
pub use synthetic::{generate_synthetic, SyntheticSpec};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{file} line {line}: {msg}")]
    Malformed { file: String, line: usize, msg: String },
    #[error("missing file {0}")]
    MissingFile(String),
    #[error("invalid synthetic spec: {0}")]
    Spec(String),
    #[error(transparent)]
    Graph(#[from] HinError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A loaded graph with career labels and item token lists.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub graph: HinGraph,
    /// `(user, career)` in ascending user order.
    pub labels: Vec<(NodeId, NodeId)>,
    pub item_texts: HashMap<NodeId, Vec<String>>,
}

/// Type ids of the three roles.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct RoleTypes {
    pub user: TypeId,
    pub item: TypeId,
    pub career: TypeId,
}

pub fn role_types(g: &HinGraph, roles: &Roles) -> Option<RoleTypes> {
    let s = g.schema();
    Some(RoleTypes { user: s.type_id(&roles.user)?, item: s.type_id(&roles.item)?, career: s.type_id(&roles.career)? })
}

/// Career labels read off the choose-edges. Users with more than one
/// choose-edge are reported and labeled with their lowest-id career.
pub fn labels_from_graph(g: &HinGraph, roles: &Roles) -> Vec<(NodeId, NodeId)> {
    let Some(t) = role_types(g, roles) else {
        return Vec::new();
    };
    if let Some(rel) = g.schema().relation_id(&roles.choose) {
        let multi = g.multi_edge_nodes(t.user, rel);
        if !multi.is_empty() {
            warn!(
                "{} users have more than one {} edge (first: {}); keeping the lowest-id career",
                multi.len(),
                roles.choose,
                g.name(multi[0])
            );
        }
    }
    g.nodes_of_type(t.user).iter().filter_map(|&u| g.neighbors_by_type(u, t.career).ok().and_then(|c| c.first()).map(|&c| (u, c))).collect()
}
