use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::serde_mat;
use crate::error::{Error, Result};
use crate::sdp::SolveStatus;

/// Eigenvalue ratio at or above which a relaxed solution counts as tight.
pub const TIGHT_RATIO: f64 = 1e2;

/// Anchor positions, one anchor per row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "AnchorSetRepr", into = "AnchorSetRepr")]
pub struct AnchorSet {
    positions: DMatrix<f64>,
}

#[derive(Serialize, Deserialize)]
struct AnchorSetRepr {
    positions: Vec<Vec<f64>>,
    m: usize,
    n: usize,
}

impl TryFrom<AnchorSetRepr> for AnchorSet {
    type Error = Error;

    fn try_from(r: AnchorSetRepr) -> Result<Self> {
        let positions = serde_mat::matrix::from_rows(&r.positions).map_err(Error::InvalidInput)?;
        let set = AnchorSet::new(positions)?;
        if set.m() != r.m || set.n() != r.n {
            return Err(Error::DimensionMismatch(format!(
                "declared {}x{} but positions are {}x{}",
                r.m,
                r.n,
                set.m(),
                set.n()
            )));
        }
        Ok(set)
    }
}

impl From<AnchorSet> for AnchorSetRepr {
    fn from(a: AnchorSet) -> Self {
        AnchorSetRepr { positions: serde_mat::matrix::to_rows(&a.positions), m: a.m(), n: a.n() }
    }
}

impl AnchorSet {
    pub fn new(positions: DMatrix<f64>) -> Result<Self> {
        if positions.nrows() < 1 {
            return Err(Error::InvalidInput("at least one anchor is required".into()));
        }
        if positions.ncols() < 2 {
            return Err(Error::InvalidInput(format!(
                "ambient dimension must be at least 2, got {}",
                positions.ncols()
            )));
        }
        if positions.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("anchor coordinates must be finite".into()));
        }
        Ok(Self { positions })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(serde_mat::matrix::from_rows(rows).map_err(Error::InvalidInput)?)
    }

    pub fn positions(&self) -> &DMatrix<f64> {
        &self.positions
    }

    pub fn m(&self) -> usize {
        self.positions.nrows()
    }

    pub fn n(&self) -> usize {
        self.positions.ncols()
    }

    pub fn anchor(&self, i: usize) -> DVector<f64> {
        self.positions.row(i).transpose()
    }
}

/// Measured (or true) ranges, all strictly positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RangeVectorRepr", into = "RangeVectorRepr")]
pub struct RangeVector {
    r: DVector<f64>,
}

#[derive(Serialize, Deserialize)]
struct RangeVectorRepr {
    r: Vec<f64>,
}

impl TryFrom<RangeVectorRepr> for RangeVector {
    type Error = Error;

    fn try_from(v: RangeVectorRepr) -> Result<Self> {
        RangeVector::new(DVector::from_vec(v.r))
    }
}

impl From<RangeVector> for RangeVectorRepr {
    fn from(v: RangeVector) -> Self {
        RangeVectorRepr { r: v.r.iter().copied().collect() }
    }
}

impl RangeVector {
    pub fn new(r: DVector<f64>) -> Result<Self> {
        if r.is_empty() {
            return Err(Error::InvalidInput("range vector is empty".into()));
        }
        if let Some((i, v)) = r.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::InvalidInput(format!("range {i} must be positive and finite, got {v}")));
        }
        Ok(Self { r })
    }

    pub fn from_slice(r: &[f64]) -> Result<Self> {
        Self::new(DVector::from_column_slice(r))
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.r
    }

    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    /// Exact distances from `source` to every anchor.
    pub fn from_geometry(anchors: &AnchorSet, source: &DVector<f64>) -> Result<Self> {
        if source.len() != anchors.n() {
            return Err(Error::DimensionMismatch(format!(
                "source has dimension {}, anchors {}",
                source.len(),
                anchors.n()
            )));
        }
        let r = DVector::from_fn(anchors.m(), |i, _| (anchors.positions.row(i).transpose() - source).norm());
        Self::new(r)
    }
}

/// Range noise distribution. Sigmas are standard deviations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model")]
pub enum NoiseModel {
    Gaussian { sigma: f64 },
    Laplacian { sigma: f64 },
    SelectiveGaussian { sigma_base: f64, sigma_outlier: f64 },
}

impl NoiseModel {
    pub fn validate(&self) -> Result<()> {
        let ok = |s: f64| s.is_finite() && s >= 0.0;
        let valid = match *self {
            NoiseModel::Gaussian { sigma } | NoiseModel::Laplacian { sigma } => ok(sigma),
            NoiseModel::SelectiveGaussian { sigma_base, sigma_outlier } => {
                ok(sigma_base) && ok(sigma_outlier)
            }
        };
        if valid {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("invalid noise parameters {self:?}")))
        }
    }

    /// Short label used in reports, e.g. `gaussian(0.01)`.
    pub fn label(&self) -> String {
        match *self {
            NoiseModel::Gaussian { sigma } => format!("gaussian({sigma})"),
            NoiseModel::Laplacian { sigma } => format!("laplacian({sigma})"),
            NoiseModel::SelectiveGaussian { sigma_base, sigma_outlier } => {
                format!("selective({sigma_base},{sigma_outlier})")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub anchors: AnchorSet,
    #[serde(with = "serde_mat::vector")]
    pub source: DVector<f64>,
    pub true_ranges: RangeVector,
    pub measured_ranges: RangeVector,
    pub noise: NoiseModel,
    pub seed: u64,
    /// Stream index of the generator; the Monte Carlo run index.
    pub stream: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Warning {
    /// Dominant-eigenvalue ratio below [`TIGHT_RATIO`].
    Tightness { eig_ratio: f64 },
    /// Iteration budget exhausted before the stopping rule was met.
    NonConvergence { iterations: usize },
    /// Fewer anchors than the problem needs for a unique fix.
    Underdetermined { m: usize, n: usize },
    /// Bisection did not bracket a root; plain least squares was used.
    BisectionFallback,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalizationResult {
    #[serde(with = "serde_mat::vector")]
    pub position: DVector<f64>,
    #[serde(with = "serde_mat::matrix")]
    pub relaxation_matrix: DMatrix<f64>,
    pub eig_ratio: f64,
    pub objective: f64,
    pub solver_status: SolveStatus,
    pub iterations: usize,
    pub warnings: Vec<Warning>,
}

impl LocalizationResult {
    pub fn is_tight(&self) -> bool {
        self.eig_ratio >= TIGHT_RATIO
    }
}
