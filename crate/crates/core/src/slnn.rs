//! n-dimensional Gaussian maximum-likelihood localization through the
//! nuclear-norm relaxation.
//!
//! Each circle projection is `y_i = a_i + r_i V^T u_i` with unit `u_i` and
//! orthogonal `V`. Lifting `W = UU^T` and bounding the inner orthogonal
//! minimization by a nuclear norm gives an SDP in `(W, Z)`.

use nalgebra::{DMatrix, DVector};

use crate::core::{AnchorSet, LocalizationResult, RangeVector, Warning, TIGHT_RATIO};
use crate::error::{Error, Result};
use crate::frame::Frame;
use crate::sdp::{
    solve_sdp, top_k_factor, AffineMatrix, LinExpr, SdpProblem, Sense, SolveStatus, SolverSettings,
    EIG_RATIO_CAP,
};

#[derive(Debug, Clone, PartialEq)]
pub struct SlnnData {
    /// Anchor positions, one per row.
    pub a: DMatrix<f64>,
    /// Measured ranges (the diagonal of `R`).
    pub r: DVector<f64>,
    /// Centering projector `I - 11^T/m`.
    pub pi: DMatrix<f64>,
    /// `R Pi A`.
    pub c: DMatrix<f64>,
}

impl SlnnData {
    pub fn m(&self) -> usize {
        self.a.nrows()
    }

    pub fn n(&self) -> usize {
        self.a.ncols()
    }

    pub fn r_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&self.r)
    }
}

pub(crate) fn check_inputs(anchors: &AnchorSet, ranges: &RangeVector) -> Result<()> {
    if ranges.len() != anchors.m() {
        return Err(Error::LengthMismatch { left: anchors.m(), right: ranges.len() });
    }
    if anchors.m() < 2 {
        return Err(Error::InvalidInput("at least two anchors are required".into()));
    }
    if anchors.m() <= anchors.n() {
        log::warn!("{} anchors in {} dimensions: the position is not identifiable", anchors.m(), anchors.n());
    }
    Ok(())
}

pub fn centering_projector(m: usize) -> DMatrix<f64> {
    DMatrix::identity(m, m) - DMatrix::from_element(m, m, 1.0 / m as f64)
}

pub fn build_slnn(anchors: &AnchorSet, ranges: &RangeVector) -> Result<SlnnData> {
    check_inputs(anchors, ranges)?;
    let a = anchors.positions().clone();
    let r = ranges.values().clone();
    let pi = centering_projector(a.nrows());
    let c = DMatrix::from_diagonal(&r) * &pi * &a;
    Ok(SlnnData { a, r, pi, c })
}

/// Sum of singular values.
pub fn nuclear_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().sum()
}

/// Scales every row to unit length.
pub fn rows_to_unit(u: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let mut out = u.clone();
    for (i, mut row) in out.row_iter_mut().enumerate() {
        let norm = row.norm();
        if !(norm > 1e-300) {
            return Err(Error::DegenerateRow(i));
        }
        row /= norm;
    }
    Ok(out)
}

/// Orthogonal `V` minimizing `tr(C^T U V)`: with `U^T C = P S Q^T`,
/// `V = -P Q^T`.
pub fn inner_rotation(u: &DMatrix<f64>, c: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if u.shape() != c.shape() {
        return Err(Error::DimensionMismatch(format!(
            "U is {}x{} but C is {}x{}",
            u.nrows(),
            u.ncols(),
            c.nrows(),
            c.ncols()
        )));
    }
    let svd = (u.transpose() * c).svd(true, true);
    let mut p = svd.u.expect("left singular vectors requested");
    let mut q = svd.v_t.expect("right singular vectors requested").transpose();
    for k in 0..p.ncols() {
        let lead = p.column(k).iter().copied().fold(0.0f64, |b, v| if v.abs() > b.abs() { v } else { b });
        if lead < 0.0 {
            p.column_mut(k).neg_mut();
            q.column_mut(k).neg_mut();
        }
    }
    Ok(-(p * q.transpose()))
}

/// A (possibly weighted) instance of the relaxation on normalized data.
///
/// `w` holds inverse weights `1/λ_i`; all ones gives the plain problem.
#[derive(Debug, Clone)]
pub(crate) struct Weighted {
    pub a: DMatrix<f64>,
    pub r: DVector<f64>,
    pub w: DVector<f64>,
    pub c: DMatrix<f64>,
    pub rw: DVector<f64>,
    pub kappa: f64,
}

/// `diag(w) - w w^T / sum(w)`; annihilates the ones vector.
pub(crate) fn weighted_projector(w: &DVector<f64>) -> DMatrix<f64> {
    let kappa = w.sum();
    DMatrix::from_diagonal(w) - (w * w.transpose()) / kappa
}

impl Weighted {
    pub fn new(a: &DMatrix<f64>, r: &DVector<f64>, w: &DVector<f64>) -> Self {
        let xi = weighted_projector(w);
        let c = DMatrix::from_diagonal(r) * xi * a;
        let rw = r.component_mul(w);
        Self { a: a.clone(), r: r.clone(), w: w.clone(), c, rw, kappa: w.sum() }
    }

    pub fn problem(&self) -> SdpProblem {
        let (m, n) = self.a.shape();
        let mut p = SdpProblem::new();
        let wb = p.add_psd_block("W", m);
        let zb = p.add_psd_block("Z", n);
        for i in 0..m {
            p.add_eq(LinExpr::var(wb.entry(i, i)), 1.0);
        }
        let mut lmi = AffineMatrix::new(2 * n);
        for k in 0..n {
            for l in k..n {
                let mut e = LinExpr::new();
                for i in 0..m {
                    for j in 0..m {
                        e.add_term(wb.entry(i, j), self.c[(i, k)] * self.c[(j, l)]);
                    }
                }
                e.compact();
                lmi.add_expr(k, l, &e, 1.0);
                lmi.add_var(k, n + l, zb.entry(k, l), 1.0);
                if k != l {
                    lmi.add_var(l, n + k, zb.entry(k, l), 1.0);
                }
            }
            lmi.add_const(n + k, n + k, 1.0);
        }
        p.add_lmi("nuclear", lmi);
        let mut obj = LinExpr::new();
        for k in 0..n {
            obj.add_term(zb.entry(k, k), 2.0);
        }
        for i in 0..m {
            obj.add_term(wb.entry(i, i), self.rw[i] * self.rw[i] / self.kappa);
            for j in (i + 1)..m {
                obj.add_term(wb.entry(i, j), 2.0 * self.rw[i] * self.rw[j] / self.kappa);
            }
        }
        p.set_objective(Sense::Maximize, obj);
        p
    }

    /// `2 tr((C^T W C)^{1/2}) + r_w^T W r_w / κ`.
    pub fn concave_objective(&self, w: &DMatrix<f64>) -> f64 {
        let g = self.c.transpose() * w * &self.c;
        let root: f64 = g.symmetric_eigenvalues().iter().map(|v| v.max(0.0).sqrt()).sum();
        2.0 * root + (self.rw.transpose() * w * &self.rw)[(0, 0)] / self.kappa
    }

    /// Circle projections from a relaxed `W`, their weighted centroid and
    /// the eigenvalue ratio `λ_n / λ_{n+1}` of `W`.
    pub fn recover(&self, w: &DMatrix<f64>) -> Result<(DMatrix<f64>, DVector<f64>, f64)> {
        let (m, n) = self.a.shape();
        // factor in the weighted metric so lightly weighted rows cannot steer
        // the leading subspace
        let sw = self.w.map(f64::sqrt);
        let scaled = DMatrix::from_fn(m, m, |i, j| w[(i, j)] * sw[i] * sw[j]);
        let (raw, ratio) = leading_factor(&scaled, n)?;
        let u = rows_to_unit(&raw)?;
        let v = inner_rotation(&u, &self.c)?;
        let y = &self.a + DMatrix::from_diagonal(&self.r) * u * v;
        let mut x = DVector::zeros(n);
        for i in 0..m {
            x += y.row(i).transpose() * self.w[i];
        }
        Ok((y, x / self.kappa, ratio))
    }
}

/// Top-`n` factor of a PSD matrix, padding with zero columns when the matrix
/// is too small to have an `n+1`-th eigenvalue.
pub(crate) fn leading_factor(w: &DMatrix<f64>, n: usize) -> Result<(DMatrix<f64>, f64)> {
    let m = w.nrows();
    if n < m {
        let f = top_k_factor(w, n)?;
        return Ok((f.factor, f.eig_ratio));
    }
    let eig = w.clone().symmetric_eigen();
    let mut out = DMatrix::zeros(m, n);
    for k in 0..m {
        let s = eig.eigenvalues[k].max(0.0).sqrt();
        out.column_mut(k).copy_from(&(eig.eigenvectors.column(k) * s));
    }
    Ok((out, EIG_RATIO_CAP))
}

#[derive(Debug, Clone)]
pub(crate) struct WeightedSolve {
    pub position: DVector<f64>,
    pub w: DMatrix<f64>,
    pub eig_ratio: f64,
    pub objective: f64,
    pub status: SolveStatus,
    pub iterations: usize,
}

pub(crate) fn solve_weighted(inst: &Weighted, settings: &SolverSettings) -> Result<WeightedSolve> {
    let sol = solve_sdp(&inst.problem(), settings)?;
    let w = sol.block("W").clone();
    let (_, position, eig_ratio) = inst.recover(&w)?;
    Ok(WeightedSolve {
        position,
        w,
        eig_ratio,
        objective: sol.objective_value,
        status: sol.status,
        iterations: sol.iterations,
    })
}

/// Runs the relaxation in a normalized frame with inverse weights `w` and
/// packages the result in world coordinates.
pub(crate) fn localize_weighted(
    anchors: &AnchorSet,
    ranges: &RangeVector,
    w: &DVector<f64>,
    settings: &SolverSettings,
) -> Result<LocalizationResult> {
    check_inputs(anchors, ranges)?;
    let frame = Frame::fit(anchors, ranges);
    let inst = Weighted::new(&frame.anchors, &frame.ranges, w);
    let s = solve_weighted(&inst, settings)?;
    let mut warnings = Vec::new();
    let mut status = s.status;
    let (m, n) = (anchors.m(), anchors.n());
    if m <= n {
        warnings.push(Warning::Underdetermined { m, n });
        if status == SolveStatus::Optimal {
            status = SolveStatus::Inaccurate;
        }
    } else if s.eig_ratio < TIGHT_RATIO {
        warnings.push(Warning::Tightness { eig_ratio: s.eig_ratio });
    }
    Ok(LocalizationResult {
        position: frame.to_world(&s.position),
        relaxation_matrix: s.w,
        eig_ratio: s.eig_ratio,
        objective: s.objective * frame.scale * frame.scale,
        solver_status: status,
        iterations: s.iterations,
        warnings,
    })
}

pub fn solve_slnn(anchors: &AnchorSet, ranges: &RangeVector, settings: &SolverSettings) -> Result<LocalizationResult> {
    localize_weighted(anchors, ranges, &DVector::from_element(anchors.m(), 1.0), settings)
}

/// Solves the relaxation on the data as given and returns the SDP objective
/// together with the concave-program value at the returned `W`.
pub fn objective_pair(data: &SlnnData, settings: &SolverSettings) -> Result<(f64, f64)> {
    let inst = Weighted::new(&data.a, &data.r, &DVector::from_element(data.m(), 1.0));
    let sol = solve_sdp(&inst.problem(), settings)?;
    Ok((sol.objective_value, inst.concave_objective(sol.block("W"))))
}
