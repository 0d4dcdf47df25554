//! Removal of the group-difference direction from user embeddings.
//!
//! Each group's direction is the normalized sum of its members' vectors.
//! The bias direction is the normalized difference of the two group
//! directions, and every user vector is projected onto its orthogonal
//! complement.

use log::warn;
use thiserror::Error;

use crate::embedding::{dot, norm, EmbeddingError, EmbeddingTable};
use crate::hin::{Group, NodeId};

#[derive(Debug, Error)]
pub enum ProjectionError {
    #[error("no members given for a group direction")]
    EmptyGroup,
    #[error("member vectors sum to zero; group direction undefined")]
    ZeroNormSum,
    #[error("group directions coincide; bias direction undefined")]
    ZeroNormBias,
    #[error("dimension mismatch: {0} vs {1}")]
    DimMismatch(usize, usize),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
}

/// Unit vector along which group membership is removed.
#[derive(Clone, Debug, PartialEq)]
pub struct BiasDirection(Vec<f64>);

impl BiasDirection {
    /// Normalizes `v`; fails if its norm is zero.
    pub fn new(v: Vec<f64>) -> Result<Self, ProjectionError> {
        let n = norm(&v);
        if n == 0.0 || !n.is_finite() {
            return Err(ProjectionError::ZeroNormBias);
        }
        Ok(Self(v.into_iter().map(|x| x / n).collect()))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Normalized sum of the members' embeddings.
pub fn group_direction(emb: &EmbeddingTable, members: &[NodeId]) -> Result<Vec<f64>, ProjectionError> {
    if members.is_empty() {
        return Err(ProjectionError::EmptyGroup);
    }
    let mut sum = vec![0.0; emb.dim()];
    for &m in members {
        for (s, x) in sum.iter_mut().zip(emb.vector(m)?) {
            *s += x;
        }
    }
    let n = norm(&sum);
    if n == 0.0 {
        return Err(ProjectionError::ZeroNormSum);
    }
    Ok(sum.into_iter().map(|x| x / n).collect())
}

/// Below this norm the difference of two unit group directions is treated
/// as rounding noise.
pub const COINCIDENT_TOL: f64 = 1e-9;

pub fn bias_direction(v_g0: &[f64], v_g1: &[f64]) -> Result<BiasDirection, ProjectionError> {
    if v_g0.len() != v_g1.len() {
        return Err(ProjectionError::DimMismatch(v_g0.len(), v_g1.len()));
    }
    let diff: Vec<f64> = v_g0.iter().zip(v_g1).map(|(a, b)| a - b).collect();
    if norm(&diff) < COINCIDENT_TOL {
        return Err(ProjectionError::ZeroNormBias);
    }
    BiasDirection::new(diff)
}

/// `e - ⟨e, v_b⟩ v_b`.
pub fn debias(e: &[f64], v_b: &BiasDirection) -> Result<Vec<f64>, ProjectionError> {
    let b = v_b.as_slice();
    if e.len() != b.len() {
        return Err(ProjectionError::DimMismatch(e.len(), b.len()));
    }
    let c = dot(e, b);
    Ok(e.iter().zip(b).map(|(x, y)| x - c * y).collect())
}

/// Estimates the bias direction from the labeled `fit` users and projects
/// every vector in `targets`. Other rows are left untouched.
///
/// Returns the projected table and the direction used, or `None` when the
/// two group directions coincide (the table is then returned unchanged).
pub fn debias_all(
    emb: &EmbeddingTable,
    fit: &[(NodeId, Group)],
    targets: &[NodeId],
) -> Result<(EmbeddingTable, Option<BiasDirection>), ProjectionError> {
    let members = |g: Group| fit.iter().filter(|(_, x)| *x == g).map(|(v, _)| *v).collect::<Vec<_>>();
    let v0 = group_direction(emb, &members(Group::G0))?;
    let v1 = group_direction(emb, &members(Group::G1))?;
    let vb = match bias_direction(&v0, &v1) {
        Ok(vb) => vb,
        Err(ProjectionError::ZeroNormBias) => {
            warn!("group directions coincide; projection skipped");
            return Ok((emb.clone(), None));
        }
        Err(e) => return Err(e),
    };
    let mut out = emb.clone();
    for &u in targets {
        let projected = debias(emb.vector(u)?, &vb)?;
        // vector() succeeded so the row exists
        out.get_mut(u).expect("row present").copy_from_slice(&projected);
    }
    Ok((out, Some(vb)))
}
