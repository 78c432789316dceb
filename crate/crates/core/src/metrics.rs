use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fraction of `mask` nodes whose prediction matches the label.
pub fn accuracy(preds: &[usize], labels: &[usize], mask: &[usize]) -> Result<f64> {
    if mask.is_empty() {
        return Err(Error::EmptyMask);
    }
    if preds.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: labels.len(),
            actual: preds.len(),
        });
    }
    let correct = mask.iter().filter(|&&i| preds[i] == labels[i]).count();
    Ok(correct as f64 / mask.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MadReport {
    /// Mean average distance, scaled by 100.
    pub value: f64,
    pub pairs_used: usize,
    pub pairs_skipped_zero: usize,
}

const ZERO_DISTANCE: f64 = 1e-12;

/// Mean average cosine distance over ordered row pairs.
///
/// Both levels use the quotient-of-sums form
/// `D_i = Σ_j D_ij / Σ_j 1/D_ij` and `MAD = Σ_i D_i / Σ_i 1/D_i`.
/// Pairs with distance below 1e-12 are skipped, as are rows left with no
/// usable pair. A zero-norm row has distance 1 to everything.
pub fn mad(embeddings: ArrayView2<'_, f64>) -> Result<MadReport> {
    let n = embeddings.nrows();
    let norms: Vec<f64> = embeddings
        .outer_iter()
        .map(|r| r.dot(&r).sqrt())
        .collect();
    let gram = embeddings.dot(&embeddings.t());

    let mut pairs_used = 0;
    let mut pairs_skipped_zero = 0;
    let (mut outer_num, mut outer_den) = (0.0, 0.0);
    let mut usable_rows = 0;
    for i in 0..n {
        let (mut num, mut den) = (0.0, 0.0);
        for j in 0..n {
            if i == j {
                continue;
            }
            let d = norms[i] * norms[j];
            let cos = if d > 0.0 { gram[[i, j]] / d } else { 0.0 };
            let dist = 1.0 - cos;
            if dist < ZERO_DISTANCE {
                pairs_skipped_zero += 1;
                continue;
            }
            pairs_used += 1;
            num += dist;
            den += 1.0 / dist;
        }
        if den > 0.0 {
            let d_i = num / den;
            usable_rows += 1;
            outer_num += d_i;
            outer_den += 1.0 / d_i;
        }
    }
    if usable_rows < 2 {
        return Err(Error::InvalidParameter(format!(
            "MAD needs at least 2 usable rows, found {usable_rows}"
        )));
    }
    Ok(MadReport {
        value: 100.0 * outer_num / outer_den,
        pairs_used,
        pairs_skipped_zero,
    })
}
