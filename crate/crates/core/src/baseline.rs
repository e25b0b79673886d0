//! Squared-range least squares (SR-LS).
//!
//! Minimizes `sum_i (|x - a_i|^2 - r_i^2)^2` exactly by lifting to
//! `y = (x, |x|^2)` and solving the resulting generalized trust-region
//! subproblem `min |My - b|^2  s.t.  y'Dy + 2f'y = 0` by bisection on the
//! multiplier.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::core::{AnchorSet, LocalizationResult, RangeVector, Warning};
use crate::error::{Error, Result};
use crate::frame::Frame;
use crate::sdp::SolveStatus;

pub const BISECTION_TOL: f64 = 1e-10;
pub const BISECTION_MAX_ITERS: usize = 200;
/// Offset from the pole of the admissible multiplier interval.
pub const INTERVAL_MARGIN: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GtrsProblem {
    #[serde(with = "crate::core::serde_mat::matrix")]
    pub m: DMatrix<f64>,
    #[serde(with = "crate::core::serde_mat::vector")]
    pub b: DVector<f64>,
    /// Diagonal of the constraint matrix: `n` ones then a zero.
    #[serde(with = "crate::core::serde_mat::vector")]
    pub d: DVector<f64>,
    #[serde(with = "crate::core::serde_mat::vector")]
    pub f: DVector<f64>,
}

impl GtrsProblem {
    pub fn new(anchors: &DMatrix<f64>, ranges: &DVector<f64>) -> Self {
        let (m, n) = anchors.shape();
        let design = DMatrix::from_fn(m, n + 1, |i, j| if j < n { 2.0 * anchors[(i, j)] } else { -1.0 });
        let b = DVector::from_fn(m, |i, _| anchors.row(i).norm_squared() - ranges[i] * ranges[i]);
        let d = DVector::from_fn(n + 1, |j, _| if j < n { 1.0 } else { 0.0 });
        let mut f = DVector::zeros(n + 1);
        f[n] = -0.5;
        Self { m: design, b, d, f }
    }

    pub fn dim(&self) -> usize {
        self.d.len()
    }

    pub fn constraint(&self, y: &DVector<f64>) -> f64 {
        y.component_mul(&self.d).dot(y) + 2.0 * self.f.dot(y)
    }

    pub fn cost(&self, y: &DVector<f64>) -> f64 {
        (&self.m * y - &self.b).norm_squared()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GtrsSolution {
    pub y: DVector<f64>,
    /// Multiplier at the root, or `None` when the unconstrained fallback
    /// was used.
    pub multiplier: Option<f64>,
    pub iterations: usize,
}

struct Secular<'a> {
    p: &'a GtrsProblem,
    mtm: DMatrix<f64>,
    mtb: DVector<f64>,
}

impl Secular<'_> {
    fn point(&self, nu: f64) -> Option<DVector<f64>> {
        let lhs = &self.mtm + DMatrix::from_diagonal(&(&self.p.d * nu));
        let rhs = &self.mtb - &self.p.f * nu;
        lhs.cholesky().map(|c| c.solve(&rhs))
    }

    fn phi(&self, nu: f64) -> Option<(f64, DVector<f64>)> {
        self.point(nu).map(|y| (self.p.constraint(&y), y))
    }
}

/// Solves the subproblem; falls back to unconstrained least squares when
/// the secular function has no bracketed root.
pub fn solve_gtrs(p: &GtrsProblem) -> Result<GtrsSolution> {
    let k = p.dim();
    if p.m.nrows() < k {
        return Err(Error::RankDeficient);
    }
    let sv = p.m.clone().singular_values();
    let (smax, smin) = (sv.max(), sv.min());
    if !(smin > 1e-12 * smax.max(f64::MIN_POSITIVE)) {
        return Err(Error::RankDeficient);
    }
    let mtm = p.m.transpose() * &p.m;
    let sec = Secular { p, mtb: p.m.transpose() * &p.b, mtm };

    // largest generalized eigenvalue of (D, M'M) sets the pole -1/lambda
    let l = sec.mtm.clone().cholesky().ok_or(Error::RankDeficient)?;
    let linv = l.l().try_inverse().ok_or(Error::RankDeficient)?;
    let sym = &linv * DMatrix::from_diagonal(&p.d) * linv.transpose();
    let lam = sym.symmetric_eigenvalues().max();
    let scale = sec.mtm.diagonal().max();
    let mut lo = -1.0 / lam + INTERVAL_MARGIN;

    let fallback = || -> Result<GtrsSolution> {
        log::warn!("sr-ls secular equation not bracketed; using plain least squares");
        let y = sec.point(0.0).ok_or(Error::RankDeficient)?;
        Ok(GtrsSolution { y, multiplier: None, iterations: 0 })
    };

    let (phi_lo, _) = match sec.phi(lo) {
        Some(v) => v,
        None => return fallback(),
    };
    if phi_lo < 0.0 {
        return fallback();
    }
    let mut hi = scale.max(1.0);
    let mut grow = 0;
    loop {
        match sec.phi(hi) {
            Some((v, _)) if v <= 0.0 => break,
            Some(_) if grow < 200 => {
                lo = hi;
                hi *= 2.0;
                grow += 1;
            }
            _ => return fallback(),
        }
    }

    let mut iterations = 0;
    let mut best = sec.phi(hi).ok_or(Error::RankDeficient)?;
    let mut best_nu = hi;
    while iterations < BISECTION_MAX_ITERS && hi - lo > BISECTION_TOL * hi.abs().max(1.0) {
        iterations += 1;
        let mid = 0.5 * (lo + hi);
        let (v, y) = sec.phi(mid).ok_or_else(|| Error::NumericalFailure("singular secular system".into()))?;
        if v.abs() < best.0.abs() {
            best = (v, y);
            best_nu = mid;
        }
        if v == 0.0 {
            break;
        }
        if v > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(GtrsSolution { y: best.1, multiplier: Some(best_nu), iterations })
}

/// SR-LS position estimate.
pub fn srls(anchors: &AnchorSet, ranges: &RangeVector) -> Result<DVector<f64>> {
    Ok(localize_srls(anchors, ranges)?.position)
}

/// SR-LS wrapped as a [`LocalizationResult`]; the relaxation matrix is the
/// lifted point `y y'` and the ratio is capped, since nothing is relaxed.
pub fn localize_srls(anchors: &AnchorSet, ranges: &RangeVector) -> Result<LocalizationResult> {
    if ranges.len() != anchors.m() {
        return Err(Error::LengthMismatch { left: anchors.m(), right: ranges.len() });
    }
    let n = anchors.n();
    if anchors.m() < n + 1 {
        return Err(Error::RankDeficient);
    }
    let frame = Frame::fit(anchors, ranges);
    let p = GtrsProblem::new(&frame.anchors, &frame.ranges);
    let sol = solve_gtrs(&p)?;
    let mut warnings = Vec::new();
    if sol.multiplier.is_none() {
        warnings.push(Warning::BisectionFallback);
    }
    let s2 = frame.scale * frame.scale;
    Ok(LocalizationResult {
        position: frame.to_world(&sol.y.rows(0, n).into_owned()),
        relaxation_matrix: &sol.y * sol.y.transpose(),
        eig_ratio: crate::sdp::EIG_RATIO_CAP,
        objective: p.cost(&sol.y) * s2 * s2,
        solver_status: SolveStatus::Optimal,
        iterations: sol.iterations,
        warnings,
    })
}
