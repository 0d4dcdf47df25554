//! Dense node embedding tables and their text format.
//!
//! The text format is one header line `N d` followed by `N` lines of
//! `node_id v1 … vd`, values written with 9 significant digits.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use thiserror::Error;

use crate::hin::NodeId;

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("embedding dimension must be positive")]
    ZeroDim,
    #[error("node {0} has no embedding")]
    Missing(NodeId),
    #[error("vector for {0} has dimension {1}, expected {2}")]
    DimMismatch(String, usize, usize),
    #[error("non-finite value in embedding of {0}")]
    NonFinite(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("unknown node name {0:?}")]
    UnknownName(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Map from node id to a dense vector; rows kept in ascending id order.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    ids: Vec<NodeId>,
    index: HashMap<NodeId, usize>,
    data: Vec<f64>,
}

impl EmbeddingTable {
    /// Table from `(id, vector)` rows; rows are re-ordered by id.
    pub fn from_rows(dim: usize, rows: impl IntoIterator<Item = (NodeId, Vec<f64>)>) -> Result<Self, EmbeddingError> {
        if dim == 0 {
            return Err(EmbeddingError::ZeroDim);
        }
        let mut rows: Vec<(NodeId, Vec<f64>)> = rows.into_iter().collect();
        rows.sort_by_key(|(id, _)| *id);
        rows.dedup_by_key(|(id, _)| *id);
        let mut data = Vec::with_capacity(rows.len() * dim);
        for (id, v) in &rows {
            if v.len() != dim {
                return Err(EmbeddingError::DimMismatch(id.to_string(), v.len(), dim));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(EmbeddingError::NonFinite(id.to_string()));
            }
            data.extend_from_slice(v);
        }
        let ids: Vec<NodeId> = rows.into_iter().map(|(id, _)| id).collect();
        Ok(Self::from_parts(dim, ids, data))
    }

    /// `ids` must be ascending and `data.len() == ids.len() * dim`.
    pub(crate) fn from_parts(dim: usize, ids: Vec<NodeId>, data: Vec<f64>) -> Self {
        debug_assert!(ids.windows(2).all(|w| w[0] < w[1]));
        debug_assert_eq!(data.len(), ids.len() * dim);
        let index = ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
        Self { dim, ids, index, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[NodeId] {
        &self.ids
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.index.contains_key(&id)
    }

    pub fn get(&self, id: NodeId) -> Option<&[f64]> {
        self.index.get(&id).map(|&i| &self.data[i * self.dim..(i + 1) * self.dim])
    }

    pub fn vector(&self, id: NodeId) -> Result<&[f64], EmbeddingError> {
        self.get(id).ok_or(EmbeddingError::Missing(id))
    }

    pub fn get_mut(&mut self, id: NodeId) -> Option<&mut [f64]> {
        let dim = self.dim;
        let i = *self.index.get(&id)?;
        Some(&mut self.data[i * dim..(i + 1) * dim])
    }

    pub fn iter(&self) -> impl Iterator<Item = (NodeId, &[f64])> {
        self.ids.iter().copied().zip(self.data.chunks_exact(self.dim))
    }

    /// Writes the text format, naming rows with `name`.
    pub fn write_text<W: Write>(&self, mut w: W, name: impl Fn(NodeId) -> String) -> Result<(), EmbeddingError> {
        writeln!(w, "{} {}", self.len(), self.dim)?;
        for (id, v) in self.iter() {
            write!(w, "{}", name(id))?;
            for x in v {
                write!(w, " {}", format_sig9(*x))?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    /// Reads the text format, resolving row names with `resolve`.
    pub fn read_text<R: BufRead>(r: R, resolve: impl FnMut(&str) -> Option<NodeId>) -> Result<Self, EmbeddingError> {
        let named = read_named(r)?;
        named.resolve(resolve)
    }
}

/// Parsed embedding file before names are mapped to node ids.
#[derive(Clone, Debug, PartialEq)]
pub struct NamedEmbeddings {
    pub dim: usize,
    pub names: Vec<String>,
    pub data: Vec<f64>,
}

impl NamedEmbeddings {
    pub fn resolve(self, mut resolve: impl FnMut(&str) -> Option<NodeId>) -> Result<EmbeddingTable, EmbeddingError> {
        let dim = self.dim;
        let mut rows = Vec::with_capacity(self.names.len());
        for (name, chunk) in self.names.iter().zip(self.data.chunks_exact(dim)) {
            let id = resolve(name).ok_or_else(|| EmbeddingError::UnknownName(name.clone()))?;
            rows.push((id, chunk.to_vec()));
        }
        EmbeddingTable::from_rows(dim, rows)
    }
}

pub fn read_named<R: BufRead>(r: R) -> Result<NamedEmbeddings, EmbeddingError> {
    let mut lines = r.lines();
    let header = lines.next().ok_or(EmbeddingError::Parse { line: 1, msg: "missing header".into() })??;
    let mut parts = header.split_whitespace();
    let parse_usize = |s: Option<&str>, what: &str| -> Result<usize, EmbeddingError> {
        s.and_then(|t| t.parse().ok()).ok_or_else(|| EmbeddingError::Parse { line: 1, msg: format!("bad {what} in header") })
    };
    let n = parse_usize(parts.next(), "row count")?;
    let dim = parse_usize(parts.next(), "dimension")?;
    if parts.next().is_some() {
        return Err(EmbeddingError::Parse { line: 1, msg: "trailing fields in header".into() });
    }
    if dim == 0 {
        return Err(EmbeddingError::ZeroDim);
    }
    let mut names = Vec::new();
    let mut data = Vec::new();
    for (i, line) in lines.enumerate() {
        let lineno = i + 2;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split_whitespace();
        let name = fields.next().unwrap_or_default().to_string();
        let before = data.len();
        for f in fields {
            let x: f64 = f.parse().map_err(|_| EmbeddingError::Parse { line: lineno, msg: format!("bad number {f:?}") })?;
            if !x.is_finite() {
                return Err(EmbeddingError::NonFinite(name));
            }
            data.push(x);
        }
        if data.len() - before != dim {
            return Err(EmbeddingError::DimMismatch(name, data.len() - before, dim));
        }
        names.push(name);
    }
    if names.len() != n {
        return Err(EmbeddingError::Parse { line: 1, msg: format!("header announces {n} rows, found {}", names.len()) });
    }
    Ok(NamedEmbeddings { dim, names, data })
}

/// 9 significant digits in scientific notation.
pub fn format_sig9(x: f64) -> String {
    format!("{x:.8e}")
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let d = norm(a) * norm(b);
    if d == 0.0 {
        0.0
    } else {
        dot(a, b) / d
    }
}
