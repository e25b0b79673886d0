use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Root mean-square position error over paired estimates and truths.
pub fn rmse(estimates: &[DVector<f64>], truths: &[DVector<f64>]) -> Result<f64> {
    if estimates.len() != truths.len() {
        return Err(Error::LengthMismatch { left: estimates.len(), right: truths.len() });
    }
    if estimates.is_empty() {
        return Err(Error::InvalidInput("rmse of an empty list".into()));
    }
    let mut total = 0.0;
    for (e, t) in estimates.iter().zip(truths) {
        if e.len() != t.len() {
            return Err(Error::LengthMismatch { left: e.len(), right: t.len() });
        }
        total += (e - t).norm_squared();
    }
    Ok((total / estimates.len() as f64).sqrt())
}

/// Column means of `points` (one point per row).
pub fn centroid(points: &DMatrix<f64>) -> DVector<f64> {
    assert!(points.nrows() > 0, "centroid of an empty point set");
    points.row_mean().transpose()
}
