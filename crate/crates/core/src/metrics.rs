//! Instance-segmentation metrics: IoU, Aggregated Jaccard Index, object
//! Dice, F1 at an IoU threshold, and mAP over the 0.50:0.05:0.95 grid.
//!
//! Conventions fixed here: IoU comparisons use ≥ (a boundary IoU counts
//! as a match); ties break by ground-truth/input order; predictions sort
//! by descending score with input order as tiebreaker; empty-vs-empty
//! scores 1.0 and empty-vs-nonempty 0.0.

use serde::Serialize;

use crate::scene::InstanceMask;

#[derive(Debug, thiserror::Error)]
pub enum MetricError {
    #[error("mask dimensions differ: {a_h}x{a_w} vs {b_h}x{b_w}")]
    DimensionMismatch {
        a_h: usize,
        a_w: usize,
        b_h: usize,
        b_w: usize,
    },
    #[error("instance {id}: score {score} outside [0,1]")]
    BadScore { id: u32, score: f64 },
    #[error("expected {want} scores, got {got}")]
    ScoreCount { want: usize, got: usize },
    #[error("predictions carry no confidence scores")]
    MissingScores,
    #[error("IoU threshold {0} outside (0,1)")]
    BadThreshold(f64),
}

/// A set of instances on one canvas; predictions carry per-instance
/// confidence scores, ground truth does not.
#[derive(Clone, Debug)]
pub struct InstanceSet {
    height: usize,
    width: usize,
    masks: Vec<InstanceMask>,
    scores: Option<Vec<f64>>,
}

impl InstanceSet {
    pub fn ground_truth(
        height: usize,
        width: usize,
        masks: Vec<InstanceMask>,
    ) -> Result<InstanceSet, MetricError> {
        check_dims(height, width, &masks)?;
        Ok(InstanceSet {
            height,
            width,
            masks,
            scores: None,
        })
    }

    pub fn predictions(
        height: usize,
        width: usize,
        masks: Vec<InstanceMask>,
        scores: Vec<f64>,
    ) -> Result<InstanceSet, MetricError> {
        check_dims(height, width, &masks)?;
        if scores.len() != masks.len() {
            return Err(MetricError::ScoreCount {
                want: masks.len(),
                got: scores.len(),
            });
        }
        for (m, &s) in masks.iter().zip(&scores) {
            if !(0.0..=1.0).contains(&s) {
                return Err(MetricError::BadScore {
                    id: m.id(),
                    score: s,
                });
            }
        }
        Ok(InstanceSet {
            height,
            width,
            masks,
            scores: Some(scores),
        })
    }

    pub fn masks(&self) -> &[InstanceMask] {
        &self.masks
    }

    pub fn scores(&self) -> Option<&[f64]> {
        self.scores.as_deref()
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    fn is_empty(&self) -> bool {
        self.masks.is_empty()
    }

    /// Prediction indices by descending score, ties by input order.
    fn rank_by_score(&self) -> Result<Vec<usize>, MetricError> {
        let scores = self.scores().ok_or(MetricError::MissingScores)?;
        let mut order: Vec<usize> = (0..scores.len()).collect();
        order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap().then(a.cmp(&b)));
        Ok(order)
    }
}

fn check_dims(height: usize, width: usize, masks: &[InstanceMask]) -> Result<(), MetricError> {
    for m in masks {
        if m.mask().dims() != (height, width) {
            return Err(MetricError::DimensionMismatch {
                a_h: height,
                a_w: width,
                b_h: m.mask().height(),
                b_w: m.mask().width(),
            });
        }
    }
    Ok(())
}

fn check_set_dims(gt: &InstanceSet, pred: &InstanceSet) -> Result<(), MetricError> {
    if gt.dims() != pred.dims() {
        return Err(MetricError::DimensionMismatch {
            a_h: gt.height,
            a_w: gt.width,
            b_h: pred.height,
            b_w: pred.width,
        });
    }
    Ok(())
}

fn overlap_counts(a: &InstanceMask, b: &InstanceMask) -> (usize, usize) {
    let mut inter = 0usize;
    let mut union = 0usize;
    for (&x, &y) in a.mask().data().iter().zip(b.mask().data()) {
        inter += (x && y) as usize;
        union += (x || y) as usize;
    }
    (inter, union)
}

/// Intersection over union of two masks; 0 when disjoint.
pub fn iou(a: &InstanceMask, b: &InstanceMask) -> Result<f64, MetricError> {
    if a.mask().dims() != b.mask().dims() {
        return Err(MetricError::DimensionMismatch {
            a_h: a.mask().height(),
            a_w: a.mask().width(),
            b_h: b.mask().height(),
            b_w: b.mask().width(),
        });
    }
    let (inter, union) = overlap_counts(a, b);
    Ok(if union == 0 {
        0.0 // unreachable for valid masks, which are nonempty
    } else {
        inter as f64 / union as f64
    })
}

/// IoU of every (gt, pred) pair.
fn iou_matrix(gt: &InstanceSet, pred: &InstanceSet) -> Result<Vec<Vec<f64>>, MetricError> {
    check_set_dims(gt, pred)?;
    gt.masks
        .iter()
        .map(|g| pred.masks.iter().map(|p| iou(g, p)).collect())
        .collect()
}

/// Aggregated Jaccard Index: greedy GT-order matching against unused
/// predictions, with unmatched areas on both sides penalizing the
/// denominator.
pub fn aji(gt: &InstanceSet, pred: &InstanceSet) -> Result<f64, MetricError> {
    check_set_dims(gt, pred)?;
    if gt.is_empty() && pred.is_empty() {
        return Ok(1.0);
    }
    if gt.is_empty() || pred.is_empty() {
        return Ok(0.0);
    }
    let mut used = vec![false; pred.masks.len()];
    let mut numerator = 0usize;
    let mut denominator = 0usize;
    for g in &gt.masks {
        let mut best: Option<(usize, f64, usize, usize)> = None;
        for (j, p) in pred.masks.iter().enumerate() {
            if used[j] {
                continue;
            }
            let (inter, union) = overlap_counts(g, p);
            if inter == 0 {
                continue;
            }
            let j_iou = inter as f64 / union as f64;
            if best.is_none_or(|(_, bi, _, _)| j_iou > bi) {
                best = Some((j, j_iou, inter, union));
            }
        }
        match best {
            Some((j, _, inter, union)) => {
                used[j] = true;
                numerator += inter;
                denominator += union;
            }
            None => denominator += g.area(),
        }
    }
    for (j, p) in pred.masks.iter().enumerate() {
        if !used[j] {
            denominator += p.area();
        }
    }
    Ok(numerator as f64 / denominator as f64)
}

/// Object-level Dice: each GT instance scores 2|g∩p*|/(|g|+|p*|) against
/// its best-IoU prediction (0 when nothing overlaps); mean over GT.
pub fn dice_object(gt: &InstanceSet, pred: &InstanceSet) -> Result<f64, MetricError> {
    check_set_dims(gt, pred)?;
    if gt.is_empty() && pred.is_empty() {
        return Ok(1.0);
    }
    if gt.is_empty() || pred.is_empty() {
        return Ok(0.0);
    }
    let mut sum = 0.0;
    for g in &gt.masks {
        let mut best_iou = 0.0;
        let mut best_dice = 0.0;
        for p in &pred.masks {
            let (inter, union) = overlap_counts(g, p);
            if inter == 0 {
                continue;
            }
            let j = inter as f64 / union as f64;
            if j > best_iou {
                best_iou = j;
                best_dice = 2.0 * inter as f64 / (g.area() + p.area()) as f64;
            }
        }
        sum += best_dice;
    }
    Ok(sum / gt.masks.len() as f64)
}

/// Greedy score-ordered matching at one IoU threshold; returns, per
/// prediction rank, whether it was a true positive.
fn match_at_threshold(iom: &[Vec<f64>], order: &[usize], n_gt: usize, thr: f64) -> Vec<bool> {
    let mut gt_taken = vec![false; n_gt];
    let mut tp = Vec::with_capacity(order.len());
    for &j in order {
        let mut best: Option<(usize, f64)> = None;
        for (i, taken) in gt_taken.iter().enumerate() {
            if *taken {
                continue;
            }
            let v = iom[i][j];
            if v >= thr && best.is_none_or(|(_, bv)| v > bv) {
                best = Some((i, v));
            }
        }
        match best {
            Some((i, _)) => {
                gt_taken[i] = true;
                tp.push(true);
            }
            None => tp.push(false),
        }
    }
    tp
}

/// F1 score with greedy matching at the given IoU threshold (≥ counts).
pub fn f1_at_iou(gt: &InstanceSet, pred: &InstanceSet, thr: f64) -> Result<f64, MetricError> {
    if !(thr > 0.0 && thr < 1.0) {
        return Err(MetricError::BadThreshold(thr));
    }
    check_set_dims(gt, pred)?;
    if gt.is_empty() && pred.is_empty() {
        return Ok(1.0);
    }
    if gt.is_empty() || pred.is_empty() {
        return Ok(0.0);
    }
    let iom = iou_matrix(gt, pred)?;
    let order = pred.rank_by_score()?;
    let tp = match_at_threshold(&iom, &order, gt.masks.len(), thr)
        .iter()
        .filter(|&&t| t)
        .count();
    let (fp, fng) = (pred.masks.len() - tp, gt.masks.len() - tp);
    let p = tp as f64 / (tp + fp) as f64;
    let r = tp as f64 / (tp + fng) as f64;
    Ok(if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    })
}

/// Average precision at one threshold with all-point (monotone envelope)
/// interpolation.
fn average_precision(iom: &[Vec<f64>], order: &[usize], n_gt: usize, thr: f64) -> f64 {
    let tp_flags = match_at_threshold(iom, order, n_gt, thr);
    let mut precision = Vec::with_capacity(tp_flags.len());
    let mut recall = Vec::with_capacity(tp_flags.len());
    let mut tp = 0usize;
    for (rank, &is_tp) in tp_flags.iter().enumerate() {
        tp += is_tp as usize;
        precision.push(tp as f64 / (rank + 1) as f64);
        recall.push(tp as f64 / n_gt as f64);
    }
    for k in (0..precision.len().saturating_sub(1)).rev() {
        precision[k] = precision[k].max(precision[k + 1]);
    }
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for k in 0..precision.len() {
        if tp_flags[k] {
            ap += (recall[k] - prev_recall) * precision[k];
            prev_recall = recall[k];
        }
    }
    ap
}

/// One row of the mAP breakdown.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ApEntry {
    pub iou: f64,
    pub ap: f64,
}

/// The ten COCO-style thresholds 0.50, 0.55, …, 0.95.
pub fn map_thresholds() -> [f64; 10] {
    std::array::from_fn(|i| 0.5 + 0.05 * i as f64)
}

/// mAP over the ten thresholds plus the per-threshold table.
pub fn map_over_thresholds(
    gt: &InstanceSet,
    pred: &InstanceSet,
) -> Result<(f64, Vec<ApEntry>), MetricError> {
    check_set_dims(gt, pred)?;
    if !pred.is_empty() && pred.scores().is_none() {
        return Err(MetricError::MissingScores);
    }
    let trivial = if gt.is_empty() && pred.is_empty() {
        Some(1.0)
    } else if gt.is_empty() || pred.is_empty() {
        Some(0.0)
    } else {
        None
    };
    if let Some(v) = trivial {
        let table = map_thresholds().map(|iou| ApEntry { iou, ap: v }).to_vec();
        return Ok((v, table));
    }
    let iom = iou_matrix(gt, pred)?;
    let order = pred.rank_by_score()?;
    let table: Vec<ApEntry> = map_thresholds()
        .map(|iou| ApEntry {
            iou,
            ap: average_precision(&iom, &order, gt.masks.len(), iou),
        })
        .to_vec();
    let map = table.iter().map(|e| e.ap).sum::<f64>() / table.len() as f64;
    Ok((map, table))
}

/// Full evaluation report, serialized by the CLI as JSON.
#[derive(Clone, Debug, Serialize)]
pub struct MetricReport {
    pub aji: f64,
    pub dice: f64,
    pub f1: f64,
    pub map: f64,
    pub ap_table: Vec<ApEntry>,
}

/// Evaluates all metrics at their conventional defaults (F1 at IoU 0.5).
pub fn evaluate(gt: &InstanceSet, pred: &InstanceSet) -> Result<MetricReport, MetricError> {
    let (map, ap_table) = map_over_thresholds(gt, pred)?;
    Ok(MetricReport {
        aji: aji(gt, pred)?,
        dice: dice_object(gt, pred)?,
        f1: f1_at_iou(gt, pred, 0.5)?,
        map,
        ap_table,
    })
}
