//! Accuracy and differentiable fairness losses over probability rows.
//!
//! Every loss here comes with its gradient with respect to the probability
//! matrix; the model chains it through the softmax.

use log::debug;
use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use super::GnnError;
use crate::hin::Group;

/// Floor applied to probabilities inside logarithms.
pub const PROB_FLOOR: f64 = 1e-12;

/// Fairness penalty added to the accuracy loss. One penalty per run.
#[derive(Copy, Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum FairLossConfig {
    #[default]
    None,
    /// `L_acc + λ_dp · L_dp`
    Dp { lambda: f64 },
    /// `L_acc + λ_eo · L_eo`
    Eo { lambda: f64 },
}

impl FairLossConfig {
    pub fn lambda(&self) -> f64 {
        match *self {
            FairLossConfig::None => 0.0,
            FairLossConfig::Dp { lambda } | FairLossConfig::Eo { lambda } => lambda,
        }
    }

    pub fn validate(&self) -> Result<(), GnnError> {
        let l = self.lambda();
        if !(l >= 0.0 && l.is_finite()) {
            return Err(GnnError::Config(format!("fairness weight must be finite and >= 0, got {l}")));
        }
        Ok(())
    }
}

/// Mean negative log-probability of the true class.
pub fn loss_acc(probs: ArrayView2<f64>, labels: &[usize]) -> f64 {
    acc_with_grad(probs, labels).0
}

pub fn acc_with_grad(probs: ArrayView2<f64>, labels: &[usize]) -> (f64, Array2<f64>) {
    let n = labels.len();
    let mut grad = Array2::zeros(probs.raw_dim());
    if n == 0 {
        return (0.0, grad);
    }
    let mut loss = 0.0;
    for (i, &y) in labels.iter().enumerate() {
        let p = probs[[i, y]];
        if p < PROB_FLOOR {
            debug!("probability {p:e} at true class clamped to {PROB_FLOOR:e}");
            loss -= PROB_FLOOR.ln();
        } else {
            loss -= p.ln();
            grad[[i, y]] = -1.0 / (p * n as f64);
        }
    }
    (loss / n as f64, grad)
}

fn group_counts(groups: &[Group]) -> [usize; 2] {
    let mut c = [0usize; 2];
    for g in groups {
        c[g.index()] += 1;
    }
    c
}

/// Per-class difference of group-mean probabilities,
/// `mean_{g0} P(ŷ=k|x) - mean_{g1} P(ŷ=k|x)`.
pub fn dp_differences(probs: ArrayView2<f64>, groups: &[Group]) -> Result<Vec<f64>, GnnError> {
    let counts = group_counts(groups);
    if counts[0] == 0 || counts[1] == 0 {
        return Err(GnnError::EmptyGroup);
    }
    let k = probs.ncols();
    let mut sums = [vec![0.0; k], vec![0.0; k]];
    for (row, g) in probs.rows().into_iter().zip(groups) {
        for (s, p) in sums[g.index()].iter_mut().zip(row) {
            *s += p;
        }
    }
    Ok((0..k).map(|c| sums[0][c] / counts[0] as f64 - sums[1][c] / counts[1] as f64).collect())
}

/// `Σ_k (mean_{g0} P(ŷ=k|x) - mean_{g1} P(ŷ=k|x))²`
pub fn loss_dp(probs: ArrayView2<f64>, groups: &[Group]) -> Result<f64, GnnError> {
    Ok(dp_differences(probs, groups)?.iter().map(|d| d * d).sum())
}

pub fn dp_with_grad(probs: ArrayView2<f64>, groups: &[Group]) -> Result<(f64, Array2<f64>), GnnError> {
    let diffs = dp_differences(probs, groups)?;
    let counts = group_counts(groups);
    let mut grad = Array2::zeros(probs.raw_dim());
    for (i, g) in groups.iter().enumerate() {
        let scale = match g {
            Group::G0 => 2.0 / counts[0] as f64,
            Group::G1 => -2.0 / counts[1] as f64,
        };
        for (k, d) in diffs.iter().enumerate() {
            grad[[i, k]] = scale * d;
        }
    }
    Ok((diffs.iter().map(|d| d * d).sum(), grad))
}

/// Per-class equal-opportunity differences. Classes without ground-truth
/// members in both groups are skipped (`None`).
pub fn eo_differences(probs: ArrayView2<f64>, groups: &[Group], labels: &[usize]) -> Vec<Option<(f64, [usize; 2])>> {
    let k = probs.ncols();
    let mut sums = vec![[0.0f64; 2]; k];
    let mut counts = vec![[0usize; 2]; k];
    for (i, (&y, g)) in labels.iter().zip(groups).enumerate() {
        sums[y][g.index()] += probs[[i, y]];
        counts[y][g.index()] += 1;
    }
    (0..k)
        .map(|c| {
            let n = counts[c];
            if n[0] == 0 || n[1] == 0 {
                if n[0] + n[1] > 0 {
                    debug!("equal-opportunity loss skips class {c}: ground-truth counts {n:?}");
                }
                None
            } else {
                Some((sums[c][0] / n[0] as f64 - sums[c][1] / n[1] as f64, n))
            }
        })
        .collect()
}

/// `Σ_k (mean_{a=0,y=k} P(ŷ=k|x) - mean_{a=1,y=k} P(ŷ=k|x))²`, normalized
/// by the ground-truth counts.
pub fn loss_eo(probs: ArrayView2<f64>, groups: &[Group], labels: &[usize]) -> f64 {
    eo_differences(probs, groups, labels).iter().flatten().map(|(d, _)| d * d).sum()
}

pub fn eo_with_grad(probs: ArrayView2<f64>, groups: &[Group], labels: &[usize]) -> (f64, Array2<f64>) {
    let diffs = eo_differences(probs, groups, labels);
    let mut grad = Array2::zeros(probs.raw_dim());
    for (i, (&y, g)) in labels.iter().zip(groups).enumerate() {
        if let Some((d, n)) = diffs[y] {
            grad[[i, y]] = match g {
                Group::G0 => 2.0 * d / n[0] as f64,
                Group::G1 => -2.0 * d / n[1] as f64,
            };
        }
    }
    (diffs.iter().flatten().map(|(d, _)| d * d).sum(), grad)
}

/// Total objective value and its gradient w.r.t. the probability rows.
pub fn objective_with_grad(
    probs: ArrayView2<f64>,
    labels: &[usize],
    groups: &[Group],
    fair: &FairLossConfig,
) -> Result<(f64, Array2<f64>), GnnError> {
    let (mut loss, mut grad) = acc_with_grad(probs, labels);
    match *fair {
        FairLossConfig::None => {}
        FairLossConfig::Dp { lambda: 0.0 } | FairLossConfig::Eo { lambda: 0.0 } => {}
        FairLossConfig::Dp { lambda } => {
            let (l, g) = dp_with_grad(probs, groups)?;
            loss += lambda * l;
            grad.scaled_add(lambda, &g);
        }
        FairLossConfig::Eo { lambda } => {
            let (l, g) = eo_with_grad(probs, groups, labels);
            loss += lambda * l;
            grad.scaled_add(lambda, &g);
        }
    }
    Ok((loss, grad))
}
