use crate::error::{Error, Result};
use crate::volume::LabelVolume;

fn overlap_counts(pred: &[bool], gt: &LabelVolume) -> Result<(usize, usize, usize)> {
    if pred.len() != gt.labels().len() {
        return Err(Error::dims(gt.labels().len(), pred.len()));
    }
    let (mut inter, mut p, mut g) = (0, 0, 0);
    for (&a, &b) in pred.iter().zip(gt.labels()) {
        let b = b == 1;
        inter += (a && b) as usize;
        p += a as usize;
        g += b as usize;
    }
    Ok((inter, p, g))
}

/// Foreground intersection over union; 1 when both masks are empty.
pub fn voc_score(pred: &[bool], gt: &LabelVolume) -> Result<f64> {
    let (i, p, g) = overlap_counts(pred, gt)?;
    Ok(voc_from_counts(i, p, g))
}

/// `2 |A n B| / (|A| + |B|)`; 1 when both masks are empty.
pub fn dice_score(pred: &[bool], gt: &LabelVolume) -> Result<f64> {
    let (i, p, g) = overlap_counts(pred, gt)?;
    Ok(dice_from_counts(i, p, g))
}

pub(crate) fn voc_from_counts(inter: usize, pred: usize, gt: usize) -> f64 {
    let union = pred + gt - inter;
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

pub(crate) fn dice_from_counts(inter: usize, pred: usize, gt: usize) -> f64 {
    if pred + gt == 0 {
        1.0
    } else {
        2.0 * inter as f64 / (pred + gt) as f64
    }
}

/// Linear-interpolated empirical quantile of sorted data.
pub(crate) fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Width of the central 80% interval: `q(0.9) - q(0.1)`.
pub fn variability_interval(scores: &[f64]) -> Result<f64> {
    if scores.len() < 2 {
        return Err(Error::Config(format!(
            "variability needs at least 2 scores, got {}",
            scores.len()
        )));
    }
    let mut s = scores.to_vec();
    s.sort_by(f64::total_cmp);
    Ok(quantile(&s, 0.9) - quantile(&s, 0.1))
}
