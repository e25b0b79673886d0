//! Similarity normalization of localization inputs.
//!
//! The relaxations are homogeneous under a common scaling of anchors and
//! ranges, and the Gaussian ones are also translation invariant, so every
//! solver works on centered unit-scale data and maps the estimate back.

use nalgebra::{DMatrix, DVector};

use crate::core::{AnchorSet, RangeVector};

#[derive(Debug, Clone)]
pub(crate) struct Frame {
    pub center: DVector<f64>,
    pub scale: f64,
    pub anchors: DMatrix<f64>,
    pub ranges: DVector<f64>,
}

impl Frame {
    pub fn fit(anchors: &AnchorSet, ranges: &RangeVector) -> Self {
        let a = anchors.positions();
        let center = a.row_mean().transpose();
        let mut shifted = a.clone();
        for mut row in shifted.row_iter_mut() {
            row -= center.transpose();
        }
        let spread = shifted.row_iter().map(|r| r.norm()).fold(0.0, f64::max);
        let scale = spread.max(ranges.values().amax());
        Self { anchors: shifted / scale, ranges: ranges.values() / scale, center, scale }
    }

    pub fn to_world(&self, x: &DVector<f64>) -> DVector<f64> {
        x * self.scale + &self.center
    }
}
