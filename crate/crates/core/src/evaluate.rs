//! IoU/Dice metrics over an optimal one-to-one pairing of ground truth and
//! predicted instances.

use log::warn;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::raster::{BinaryMask, RasterError};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no ground truth instances")]
    NoGroundTruth,
    #[error(transparent)]
    Raster(#[from] RasterError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum MetricMode {
    /// Mean over matched pairs only.
    #[default]
    MatchedOnly,
    /// Unmatched ground truth counts as 0; the mean runs over all ground truth.
    PenalizeMisses,
}

pub fn iou(a: &BinaryMask, b: &BinaryMask) -> Result<f64, EvalError> {
    let inter = a.intersection_area(b)?;
    let union = a.area() + b.area() - inter;
    if union == 0 {
        warn!("IoU of two empty masks is undefined; using 0");
        return Ok(0.0);
    }
    Ok(inter as f64 / union as f64)
}

pub fn dice(a: &BinaryMask, b: &BinaryMask) -> Result<f64, EvalError> {
    let inter = a.intersection_area(b)?;
    let total = a.area() + b.area();
    if total == 0 {
        warn!("Dice of two empty masks is undefined; using 0");
        return Ok(0.0);
    }
    Ok(2.0 * inter as f64 / total as f64)
}

/// Maximum-weight assignment on a rectangular matrix (Hungarian method with
/// potentials, O(n^3) on the padded square). Returns the column assigned
/// to each row, or `None` for rows left over when rows outnumber columns.
pub fn hungarian_max(weights: &[Vec<f64>]) -> Vec<Option<usize>> {
    let rows = weights.len();
    let cols = weights.first().map_or(0, Vec::len);
    let n = rows.max(cols);
    if n == 0 {
        return Vec::new();
    }
    let cost = |i: usize, j: usize| if i < rows && j < cols { -weights[i][j] } else { 0.0 };
    // 1-based arrays; column 0 is the virtual start
    let (mut u, mut v) = (vec![0.0; n + 1], vec![0.0; n + 1]);
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut out = vec![None; rows];
    for j in 1..=n {
        let i = owner[j];
        if i >= 1 && i <= rows && j <= cols {
            out[i - 1] = Some(j - 1);
        }
    }
    out
}

/// Pairs `(gt index, pred index, iou)` of the maximum-total-IoU one-to-one
/// assignment; zero-IoU pairs are dropped.
pub fn optimal_pairing(gt: &[BinaryMask], pred: &[BinaryMask]) -> Result<Vec<(usize, usize, f64)>, EvalError> {
    let matrix = iou_matrix(gt, pred)?;
    Ok(hungarian_max(&matrix)
        .into_iter()
        .enumerate()
        .filter_map(|(i, j)| j.map(|j| (i, j, matrix[i][j])))
        .filter(|&(_, _, v)| v > 0.0)
        .collect())
}

fn iou_matrix(gt: &[BinaryMask], pred: &[BinaryMask]) -> Result<Vec<Vec<f64>>, EvalError> {
    let boxes: Vec<_> = pred.iter().map(BinaryMask::bbox).collect();
    gt.iter()
        .map(|g| {
            let gb = g.bbox();
            pred.iter()
                .zip(&boxes)
                .map(|(p, pb)| {
                    g.check_same(p)?;
                    let overlap = match (gb, pb) {
                        (Some(a), Some(b)) => a.x0 <= b.x1 && b.x0 <= a.x1 && a.y0 <= b.y1 && b.y0 <= a.y1,
                        _ => false,
                    };
                    if overlap { iou(g, p) } else { Ok(0.0) }
                })
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairScore {
    pub gt_id: u32,
    pub pred_id: u32,
    pub iou: f64,
    pub dice: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mode: MetricMode,
    pub miou: f64,
    pub mdice: f64,
    pub n_gt: usize,
    pub n_pred: usize,
    pub pairs: Vec<PairScore>,
    pub unmatched_gt: Vec<u32>,
    pub unmatched_pred: Vec<u32>,
}

impl EvalReport {
    fn means(pairs: &[PairScore], n_gt: usize, mode: MetricMode) -> (f64, f64) {
        let denom = match mode {
            MetricMode::MatchedOnly => pairs.len(),
            MetricMode::PenalizeMisses => n_gt,
        };
        if denom == 0 {
            return (0.0, 0.0);
        }
        let d = denom as f64;
        (pairs.iter().map(|p| p.iou).sum::<f64>() / d, pairs.iter().map(|p| p.dice).sum::<f64>() / d)
    }

    /// Pools several per-image reports: means run over all pairs (or all
    /// ground truth) of all images rather than averaging image means.
    pub fn pooled(reports: &[EvalReport], mode: MetricMode) -> EvalReport {
        let pairs: Vec<PairScore> = reports.iter().flat_map(|r| r.pairs.iter().cloned()).collect();
        let n_gt = reports.iter().map(|r| r.n_gt).sum();
        let (miou, mdice) = Self::means(&pairs, n_gt, mode);
        EvalReport {
            mode,
            miou,
            mdice,
            n_gt,
            n_pred: reports.iter().map(|r| r.n_pred).sum(),
            unmatched_gt: Vec::new(),
            unmatched_pred: Vec::new(),
            pairs,
        }
    }

    pub fn with_mode(&self, mode: MetricMode) -> EvalReport {
        let (miou, mdice) = Self::means(&self.pairs, self.n_gt, mode);
        EvalReport { mode, miou, mdice, ..self.clone() }
    }
}

pub fn evaluate(
    gt: &[(u32, BinaryMask)],
    pred: &[(u32, BinaryMask)],
    mode: MetricMode,
) -> Result<EvalReport, EvalError> {
    if gt.is_empty() {
        return Err(EvalError::NoGroundTruth);
    }
    let gm: Vec<BinaryMask> = gt.iter().map(|g| g.1.clone()).collect();
    let pm: Vec<BinaryMask> = pred.iter().map(|p| p.1.clone()).collect();
    let pairing = optimal_pairing(&gm, &pm)?;
    let mut pairs = Vec::with_capacity(pairing.len());
    for &(i, j, v) in &pairing {
        pairs.push(PairScore { gt_id: gt[i].0, pred_id: pred[j].0, iou: v, dice: dice(&gm[i], &pm[j])? });
    }
    let unmatched_gt = (0..gt.len()).filter(|i| !pairing.iter().any(|p| p.0 == *i)).map(|i| gt[i].0).collect();
    let unmatched_pred =
        (0..pred.len()).filter(|j| !pairing.iter().any(|p| p.1 == *j)).map(|j| pred[j].0).collect();
    let (miou, mdice) = EvalReport::means(&pairs, gt.len(), mode);
    Ok(EvalReport { mode, miou, mdice, n_gt: gt.len(), n_pred: pred.len(), pairs, unmatched_gt, unmatched_pred })
}
