//! Registration-quality metrics: Dice overlap for label volumes and the
//! half-mean-squared intensity difference used as the registration data term.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fields::{ScalarKind, ScalarVolume};
use crate::par;

/// Dice score plus a flag marking the degenerate both-empty case.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DiceScore {
    pub score: f64,
    pub both_empty: bool,
}

fn ensure_labels(a: &ScalarVolume, b: &ScalarVolume) -> Result<()> {
    for v in [a, b] {
        if v.kind() != ScalarKind::Label {
            return Err(Error::InvalidKind { expected: "label", got: v.kind().name() });
        }
    }
    a.grid().ensure_compatible(b.grid(), "dice")
}

/// Dice overlap 2|A∩B| / (|A| + |B|) of one label. Both sets empty is
/// reported as 1.0 with `both_empty` set.
pub fn dice(seg_a: &ScalarVolume, seg_b: &ScalarVolume, label: u32) -> Result<DiceScore> {
    ensure_labels(seg_a, seg_b)?;
    let n = seg_a.grid().len();
    let l = label as f64;
    let in_a = |i: usize| seg_a.data()[i] == l;
    let in_b = |i: usize| seg_b.data()[i] == l;
    let na = par::count_indexed(n, in_a);
    let nb = par::count_indexed(n, in_b);
    if na + nb == 0 {
        return Ok(DiceScore { score: 1.0, both_empty: true });
    }
    let inter = par::count_indexed(n, |i| in_a(i) && in_b(i));
    Ok(DiceScore { score: 2.0 * inter as f64 / (na + nb) as f64, both_empty: false })
}

/// Per-label Dice over the union of labels present in either volume,
/// excluding background (label 0), plus the unweighted mean.
#[derive(Debug, Clone, Serialize)]
pub struct MultiDice {
    pub per_label: BTreeMap<u32, f64>,
    pub mean: f64,
}

pub fn dice_multilabel(seg_a: &ScalarVolume, seg_b: &ScalarVolume) -> Result<MultiDice> {
    ensure_labels(seg_a, seg_b)?;
    let mut labels: Vec<u32> = seg_a
        .data()
        .iter()
        .chain(seg_b.data())
        .map(|&v| v as u32)
        .filter(|&l| l != 0)
        .collect();
    labels.sort_unstable();
    labels.dedup();

    let mut per_label = BTreeMap::new();
    for &l in &labels {
        per_label.insert(l, dice(seg_a, seg_b, l)?.score);
    }
    let mean = if per_label.is_empty() {
        1.0 // no foreground anywhere: nothing disagrees
    } else {
        per_label.values().sum::<f64>() / per_label.len() as f64
    };
    Ok(MultiDice { per_label, mean })
}

/// Half the mean squared intensity difference.
pub fn ssd_value(a: &ScalarVolume, b: &ScalarVolume) -> Result<f64> {
    a.grid().ensure_compatible(b.grid(), "ssd")?;
    let n = a.grid().len();
    let sum = par::sum_indexed(n, |i| {
        let d = a.data()[i] - b.data()[i];
        d * d
    });
    Ok(0.5 * sum / n as f64)
}
