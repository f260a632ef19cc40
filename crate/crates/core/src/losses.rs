//! Loss arithmetic as pure functions: the gradient-anomaly map loss,
//! per-pixel cross-entropy, the anomaly-reweighted mask refinement loss
//! and the scalar total combinator.
//!
//! Detector-side terms (reg/cls/rpn) are pass-through scalars supplied by
//! the caller; nothing here differentiates or trains.

use crate::anomaly::AnomalyMap;
use crate::grid::Grid;

/// Probability floor applied before taking logarithms.
pub const PROB_EPSILON: f64 = 1e-12;

#[derive(Debug, thiserror::Error)]
pub enum LossError {
    #[error("expected {want} prediction maps, got {got}")]
    LengthMismatch { want: usize, got: usize },
    #[error("map {index}: prediction is {got_h}x{got_w}, ground truth is {want_h}x{want_w}")]
    DimensionMismatch {
        index: usize,
        want_h: usize,
        want_w: usize,
        got_h: usize,
        got_w: usize,
    },
    #[error("probability map: {0}")]
    BadProbability(String),
    #[error("label {label} at ({x},{y}) out of range for {k} classes")]
    LabelOutOfRange {
        label: u32,
        x: usize,
        y: usize,
        k: usize,
    },
    #[error("loss term {0} is not finite")]
    NonFinite(&'static str),
}

/// Per-pixel class probabilities over K classes, stored plane-major:
/// plane c holds p(class=c) for every pixel.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbMap {
    height: usize,
    width: usize,
    k: usize,
    planes: Vec<f64>,
}

impl ProbMap {
    /// Validates shape, range and per-pixel normalization (sums within
    /// 1e−6 of 1).
    pub fn new(
        height: usize,
        width: usize,
        k: usize,
        planes: Vec<f64>,
    ) -> Result<ProbMap, LossError> {
        if k == 0 {
            return Err(LossError::BadProbability("zero classes".into()));
        }
        let hw = height * width;
        if planes.len() != k * hw {
            return Err(LossError::BadProbability(format!(
                "expected {}x{}x{} = {} values, got {}",
                k,
                height,
                width,
                k * hw,
                planes.len()
            )));
        }
        for idx in 0..hw {
            let mut sum = 0.0;
            for c in 0..k {
                let p = planes[c * hw + idx];
                if !(0.0..=1.0).contains(&p) {
                    return Err(LossError::BadProbability(format!(
                        "value {p} at pixel {idx} outside [0,1]"
                    )));
                }
                sum += p;
            }
            if (sum - 1.0).abs() > 1e-6 {
                return Err(LossError::BadProbability(format!(
                    "pixel {idx} probabilities sum to {sum}"
                )));
            }
        }
        Ok(ProbMap {
            height,
            width,
            k,
            planes,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn classes(&self) -> usize {
        self.k
    }

    pub fn prob(&self, class: usize, x: usize, y: usize) -> f64 {
        self.planes[class * self.height * self.width + y * self.width + x]
    }
}

/// Sum over instances of the per-map mean squared error between
/// ground-truth anomaly maps and predicted grids.
pub fn gradient_anomaly_loss(
    gt_maps: &[AnomalyMap],
    pred_maps: &[Grid<f64>],
) -> Result<f64, LossError> {
    if gt_maps.len() != pred_maps.len() {
        return Err(LossError::LengthMismatch {
            want: gt_maps.len(),
            got: pred_maps.len(),
        });
    }
    let mut total = 0.0;
    for (index, (gt, pred)) in gt_maps.iter().zip(pred_maps).enumerate() {
        let (h, w) = gt.values().dims();
        if pred.dims() != (h, w) {
            return Err(LossError::DimensionMismatch {
                index,
                want_h: h,
                want_w: w,
                got_h: pred.height(),
                got_w: pred.width(),
            });
        }
        let n = (h * w) as f64;
        let mut sum = 0.0;
        for (g, p) in gt.values().data().iter().zip(pred.data()) {
            let d = g - p;
            sum += d * d;
        }
        total += sum / n;
    }
    Ok(total)
}

/// Per-pixel cross-entropy −log p(gt class), no reduction. Probabilities
/// are clamped to [PROB_EPSILON, 1] before the log so degenerate
/// predictions stay finite.
pub fn pixel_ce(pred: &ProbMap, gt_labels: &Grid<u32>) -> Result<Grid<f64>, LossError> {
    let (h, w) = gt_labels.dims();
    if (pred.height(), pred.width()) != (h, w) {
        return Err(LossError::DimensionMismatch {
            index: 0,
            want_h: h,
            want_w: w,
            got_h: pred.height(),
            got_w: pred.width(),
        });
    }
    let mut out = Grid::filled(h, w, 0.0f64);
    for (x, y, &label) in gt_labels.iter() {
        if label as usize >= pred.classes() {
            return Err(LossError::LabelOutOfRange {
                label,
                x,
                y,
                k: pred.classes(),
            });
        }
        let p = pred.prob(label as usize, x, y).clamp(PROB_EPSILON, 1.0);
        out.set(x, y, -p.ln());
    }
    Ok(out)
}

/// Reweighting applied to the per-pixel cross-entropy before summation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WeightMode {
    /// Σ m(p)·ce(p) over the anomaly map m. Zero outside anomaly regions.
    Literal,
    /// Penalty increment reading: Σ (1 + m(p))·ce(p). Equals the
    /// literal loss plus the unweighted Σ ce, exactly.
    Offset,
}

/// Pixel-wise multiply the cross-entropy map by the anomaly map, then sum
/// over pixels.
pub fn mask_refinement_loss(
    ce_map: &Grid<f64>,
    mg: &AnomalyMap,
    weight_mode: WeightMode,
) -> Result<f64, LossError> {
    let (h, w) = ce_map.dims();
    if mg.values().dims() != (h, w) {
        return Err(LossError::DimensionMismatch {
            index: 0,
            want_h: h,
            want_w: w,
            got_h: mg.values().height(),
            got_w: mg.values().width(),
        });
    }
    let mut weighted = 0.0;
    let mut plain = 0.0;
    for (ce, g) in ce_map.data().iter().zip(mg.values().data()) {
        weighted += g * ce;
        plain += ce;
    }
    Ok(match weight_mode {
        WeightMode::Literal => weighted,
        // Summed separately so offset = literal + Σce holds bit-exactly.
        WeightMode::Offset => weighted + plain,
    })
}

/// Total-loss combinator over the two mask losses and the externally
/// supplied detector terms.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossBreakdown {
    pub ga: f64,
    pub mr: f64,
    pub reg: f64,
    pub cls: f64,
    pub rpn: f64,
    pub total: f64,
}

pub fn total_loss(
    ga: f64,
    mr: f64,
    reg: f64,
    cls: f64,
    rpn: f64,
) -> Result<LossBreakdown, LossError> {
    for (name, v) in [
        ("ga", ga),
        ("mr", mr),
        ("reg", reg),
        ("cls", cls),
        ("rpn", rpn),
    ] {
        if !v.is_finite() {
            return Err(LossError::NonFinite(name));
        }
    }
    Ok(LossBreakdown {
        ga,
        mr,
        reg,
        cls,
        rpn,
        total: ga + mr + reg + cls + rpn,
    })
}
