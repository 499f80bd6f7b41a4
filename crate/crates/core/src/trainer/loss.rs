use super::TrainError;

/// `(1/|N|) * sum_i max(0, m - (pos - neg_i))`.
pub fn margin_loss(pos: f64, negs: &[f64], margin: f64) -> Result<f64, TrainError> {
    if negs.is_empty() {
        return Err(TrainError::EmptyNegatives);
    }
    // `f64::max` would drop a NaN hinge; keep it so the caller sees it.
    let hinge = |n: f64| {
        let h = margin - (pos - n);
        if h > 0.0 || h.is_nan() {
            h
        } else {
            0.0
        }
    };
    let total: f64 = negs.iter().map(|&n| hinge(n)).sum();
    Ok(total / negs.len() as f64)
}

/// Derivatives of [`margin_loss`] with respect to `pos` and each negative.
/// A hinge counts as active only when strictly positive, so a negative that
/// already satisfies the margin gets exactly zero.
pub fn margin_loss_gradient(pos: f64, negs: &[f64], margin: f64) -> Result<(f64, Vec<f64>), TrainError> {
    if negs.is_empty() {
        return Err(TrainError::EmptyNegatives);
    }
    let n = negs.len() as f64;
    let d_negs: Vec<f64> = negs
        .iter()
        .map(|&neg| if margin - (pos - neg) > 0.0 { 1.0 / n } else { 0.0 })
        .collect();
    let d_pos = -d_negs.iter().sum::<f64>();
    Ok((d_pos, d_negs))
}
