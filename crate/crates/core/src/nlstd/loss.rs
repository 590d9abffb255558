//! Training losses and evaluation metrics for segmentations.

use serde::Serialize;

use crate::energy::{wt_energy, TopoParams};
use crate::error::{Error, Result};
use crate::grid::ScalarField;
use crate::minimize::BINARIZE_THRESHOLD;
use crate::persistence::{betti_at_threshold, compute_superlevel_persistence};

fn check_channels(u: &[ScalarField], g: &[ScalarField]) -> Result<()> {
    if u.len() != g.len() {
        return Err(Error::Config(format!("{} prediction channels for {} label channels", u.len(), g.len())));
    }
    if u.is_empty() {
        return Err(Error::TooFewChannels(0));
    }
    for (a, b) in u.iter().zip(g) {
        a.check_same_shape(b)?;
    }
    Ok(())
}

/// `1 - mean_l 2<u_l, g_l> / (|u_l|^2 + |g_l|^2)`. A channel where both are
/// all zero counts as a perfect match.
pub fn dice_loss(u: &[ScalarField], g: &[ScalarField]) -> Result<f64> {
    check_channels(u, g)?;
    let mut total = 0.0;
    for (a, b) in u.iter().zip(g) {
        let (mut ab, mut aa, mut bb) = (0.0, 0.0, 0.0);
        for (&x, &y) in a.values().iter().zip(b.values()) {
            ab += x * y;
            aa += x * x;
            bb += y * y;
        }
        let denom = aa + bb;
        total += if denom == 0.0 { 1.0 } else { 2.0 * ab / denom };
    }
    Ok(1.0 - total / u.len() as f64)
}

/// Dice loss plus `alpha` times the width-aware energy of channel `channel`.
pub fn topo_loss(u: &[ScalarField], g: &[ScalarField], alpha: f64, topo: &TopoParams, channel: usize) -> Result<f64> {
    let dice = dice_loss(u, g)?;
    if alpha == 0.0 {
        return Ok(dice);
    }
    let target = u
        .get(channel)
        .ok_or_else(|| Error::Config(format!("channel {channel} out of range for {} channels", u.len())))?;
    Ok(dice + alpha * wt_energy(target, topo).0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub dice: f64,
    pub iou: f64,
    pub betti_error_0: f64,
    pub betti_error_1: f64,
}

/// Compares `pred` and `truth` after binarizing both at 0.5.
///
/// Betti errors are measured against `targets` when given, otherwise against
/// the Betti numbers of `truth`. Two empty masks have Dice and IoU 1.
pub fn metrics(pred: &ScalarField, truth: &ScalarField, targets: Option<[usize; 2]>) -> Result<MetricsReport> {
    pred.check_same_shape(truth)?;
    let p = pred.threshold(BINARIZE_THRESHOLD);
    let t = truth.threshold(BINARIZE_THRESHOLD);
    let (mut both, mut either, mut agree) = (0usize, 0usize, 0usize);
    let (mut np, mut nt) = (0usize, 0usize);
    for (&a, &b) in p.iter().zip(&t) {
        both += usize::from(a && b);
        either += usize::from(a || b);
        agree += usize::from(a == b);
        np += usize::from(a);
        nt += usize::from(b);
    }
    let ratio = |num: usize, den: usize| if den == 0 { 1.0 } else { num as f64 / den as f64 };

    let betti = |f: &ScalarField| {
        let d = compute_superlevel_persistence(f);
        [0, 1].map(|k| betti_at_threshold(&d, BINARIZE_THRESHOLD, k))
    };
    let got = betti(pred);
    let want = targets.unwrap_or_else(|| betti(truth));
    let err = |k: usize| got[k].abs_diff(want[k]) as f64;
    Ok(MetricsReport {
        accuracy: ratio(agree, p.len()),
        dice: ratio(2 * both, np + nt),
        iou: ratio(both, either),
        betti_error_0: err(0),
        betti_error_1: err(1),
    })
}
