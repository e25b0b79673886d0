//! Laplacian maximum-likelihood (outlier-robust) localization.
//!
//! The ℓ1 range cost is rewritten as a weighted ℓ2 cost with simplex weights
//! `λ`. Three solvers are provided: alternating descent over the position and
//! the weights, a joint SDP with a nuclear-norm penalty, and a simplified
//! single-epigraph SDP.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::core::{AnchorSet, LocalizationResult, RangeVector, Warning, TIGHT_RATIO};
use crate::error::{Error, Result};
use crate::frame::Frame;
use crate::sdp::{
    solve_sdp, top_k_factor, AffineMatrix, LinExpr, SdpProblem, Sense, SolveStatus, SolverSettings,
};
use crate::slnn::{check_inputs, rows_to_unit, solve_weighted, weighted_projector, Weighted};

/// Residuals below this are raised to it before normalization.
pub const RESIDUAL_FLOOR: f64 = 1e-8;
/// Lower bound imposed on every `β` entry.
pub const BETA_FLOOR: f64 = 1e-13;

/// Positive weights summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    #[serde(with = "crate::core::serde_mat::vector")]
    lambda: DVector<f64>,
}

impl WeightVector {
    /// Normalizes positive finite entries to sum to one.
    pub fn new(raw: DVector<f64>) -> Result<Self> {
        if raw.is_empty() || raw.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidInput("weights must be positive and finite".into()));
        }
        let total = raw.sum();
        Ok(Self { lambda: raw / total })
    }

    pub fn uniform(m: usize) -> Self {
        Self { lambda: DVector::from_element(m, 1.0 / m as f64) }
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.lambda
    }

    pub fn len(&self) -> usize {
        self.lambda.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambda.is_empty()
    }

    /// `1/λ_i` scaled so the largest entry is one.
    fn inverse_scaled(&self) -> DVector<f64> {
        let min = self.lambda.min();
        self.lambda.map(|l| min / l)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Sll1Settings {
    /// Stop when successive positions differ by less than this.
    pub epsilon: f64,
    pub max_iters: usize,
    /// Weight of the `11^T` term standing in for the projector inverse.
    pub sigma_big: f64,
    /// Nuclear-norm penalty on `β` (joint SDP only).
    pub mu: f64,
    pub solver: SolverSettings,
}

impl Default for Sll1Settings {
    fn default() -> Self {
        Self { epsilon: 1e-2, max_iters: 50, sigma_big: 1e5, mu: 1e-2, solver: SolverSettings::default() }
    }
}

impl Sll1Settings {
    pub fn validate(&self) -> Result<()> {
        let ok = self.epsilon > 0.0 && self.max_iters > 0 && self.sigma_big > 0.0 && self.mu > 0.0;
        if !ok || !(self.epsilon.is_finite() && self.sigma_big.is_finite() && self.mu.is_finite()) {
            return Err(Error::InvalidInput("SL-l1 settings must be positive".into()));
        }
        Ok(())
    }
}

/// `Λ⁻¹ - Λ⁻¹11^TΛ⁻¹ / (1^TΛ⁻¹1)`.
pub fn weights_to_projector(lambda: &WeightVector) -> DMatrix<f64> {
    weighted_projector(&lambda.values().map(|l| 1.0 / l))
}

/// Absolute range residuals `| ‖x - a_i‖ - r_i |`.
pub fn range_residuals(x: &DVector<f64>, anchors: &AnchorSet, ranges: &RangeVector) -> DVector<f64> {
    let a = anchors.positions();
    DVector::from_fn(anchors.m(), |i, _| ((x.transpose() - a.row(i)).norm() - ranges.values()[i]).abs())
}

/// Weights proportional to the absolute range residuals at `x`.
pub fn lambda_update(x: &DVector<f64>, anchors: &AnchorSet, ranges: &RangeVector) -> WeightVector {
    let k = range_residuals(x, anchors, ranges).map(|v| v.max(RESIDUAL_FLOOR));
    WeightVector::new(k).expect("floored residuals are positive")
}

/// `Σ K_i² / λ_i`, the weighted cost minimized by the alternation.
pub fn weighted_cost(x: &DVector<f64>, lambda: &WeightVector, anchors: &AnchorSet, ranges: &RangeVector) -> f64 {
    let k = range_residuals(x, anchors, ranges);
    k.iter().zip(lambda.values().iter()).map(|(k, l)| k * k / l).sum()
}

fn check_weights(anchors: &AnchorSet, lambda: &WeightVector) -> Result<()> {
    if lambda.len() != anchors.m() {
        return Err(Error::LengthMismatch { left: anchors.m(), right: lambda.len() });
    }
    Ok(())
}

/// Weighted relaxation for fixed weights; returns the position only.
pub fn solve_weighted_slnn(
    anchors: &AnchorSet,
    ranges: &RangeVector,
    lambda: &WeightVector,
    settings: &SolverSettings,
) -> Result<DVector<f64>> {
    Ok(weighted_result(anchors, ranges, lambda, settings)?.position)
}

fn weighted_result(
    anchors: &AnchorSet,
    ranges: &RangeVector,
    lambda: &WeightVector,
    settings: &SolverSettings,
) -> Result<LocalizationResult> {
    check_inputs(anchors, ranges)?;
    check_weights(anchors, lambda)?;
    let frame = Frame::fit(anchors, ranges);
    let inst = Weighted::new(&frame.anchors, &frame.ranges, &lambda.inverse_scaled());
    let s = solve_weighted(&inst, settings)?;
    Ok(LocalizationResult {
        position: frame.to_world(&s.position),
        relaxation_matrix: s.w,
        eig_ratio: s.eig_ratio,
        objective: s.objective * frame.scale * frame.scale,
        solver_status: s.status,
        iterations: s.iterations,
        warnings: Vec::new(),
    })
}

/// Alternating descent. `iterations` in the result counts outer passes.
pub fn sll1_ad(anchors: &AnchorSet, ranges: &RangeVector, settings: &Sll1Settings) -> Result<LocalizationResult> {
    settings.validate()?;
    check_inputs(anchors, ranges)?;
    let mut lambda = WeightVector::uniform(anchors.m());
    let mut current = weighted_result(anchors, ranges, &lambda, &settings.solver)?;
    let mut worst_status = current.solver_status;
    for iter in 1..=settings.max_iters {
        if range_residuals(&current.position, anchors, ranges).sum() == 0.0 {
            current.iterations = iter;
            current.solver_status = worst_status;
            return Ok(finish(current));
        }
        lambda = lambda_update(&current.position, anchors, ranges);
        let next = weighted_result(anchors, ranges, &lambda, &settings.solver)?;
        worst_status = worse(worst_status, next.solver_status);
        let step = (&next.position - &current.position).norm();
        current = next;
        if step < settings.epsilon {
            current.iterations = iter;
            current.solver_status = worst_status;
            return Ok(finish(current));
        }
    }
    log::debug!("alternating descent stopped after {} passes", settings.max_iters);
    current.iterations = settings.max_iters;
    current.solver_status = worst_status;
    current.warnings.push(Warning::NonConvergence { iterations: settings.max_iters });
    Ok(finish(current))
}

fn worse(a: SolveStatus, b: SolveStatus) -> SolveStatus {
    let rank = |s: SolveStatus| match s {
        SolveStatus::Optimal => 0,
        SolveStatus::Inaccurate => 1,
        SolveStatus::Failed => 2,
    };
    if rank(b) > rank(a) {
        b
    } else {
        a
    }
}

fn finish(mut res: LocalizationResult) -> LocalizationResult {
    if res.eig_ratio < TIGHT_RATIO {
        res.warnings.push(Warning::Tightness { eig_ratio: res.eig_ratio });
    }
    res
}

/// Weighted centroid of projections `a_i + r_i u_i` with weights `1/λ_i`.
fn weighted_centroid(a: &DMatrix<f64>, r: &DVector<f64>, u: &DMatrix<f64>, lambda: &DVector<f64>) -> DVector<f64> {
    let inv = lambda.map(|l| 1.0 / l);
    let y = a + DMatrix::from_diagonal(r) * u;
    let mut x = DVector::zeros(a.ncols());
    for i in 0..a.nrows() {
        x += y.row(i).transpose() * inv[i];
    }
    x / inv.sum()
}

/// Normalizes a nonnegative vector with the residual floor applied.
fn simplex(v: DVector<f64>) -> DVector<f64> {
    let v = v.map(|e| e.max(RESIDUAL_FLOOR));
    let total = v.sum();
    v / total
}

/// Joint SDP over the lifted unit directions `[1; u_1; ...; u_m]` and the
/// per-coordinate weight matrix `β`, with a nuclear-norm penalty on `β`.
pub fn sll1_md_problem(a: &DMatrix<f64>, r: &DVector<f64>, settings: &Sll1Settings) -> SdpProblem {
    let (m, n) = a.shape();
    let mut p = SdpProblem::new();
    let w = p.add_psd_block("W", m * n + 1);
    let g = p.add_psd_block("G", m + n);
    let beta = |k: usize, i: usize| g.entry(k, m + i);
    let lifted = |k: usize, i: usize| 1 + k * n + i;

    p.add_eq(LinExpr::var(w.entry(0, 0)), 1.0);
    for k in 0..m {
        let mut tr = LinExpr::new();
        for i in 0..n {
            tr.add_term(w.entry(lifted(k, i), lifted(k, i)), 1.0);
        }
        p.add_eq(tr, 1.0);
        for i in 0..n {
            p.add_ge(LinExpr::var(beta(k, i)), BETA_FLOOR);
        }
    }

    let mut obj = LinExpr::new();
    for i in 0..n {
        // t_i = Σ_k β_ki, substituted directly
        let mut t = LinExpr::new();
        for k in 0..m {
            t.add_term(beta(k, i), 1.0);
        }
        obj.add_expr(&t, 1.0);

        // diag(β_:i) + t_i σ 11^T - [α_i R] W_{I_i} [α_i R]^T ⪰ 0
        let idx: Vec<usize> = std::iter::once(0).chain((0..m).map(|k| lifted(k, i))).collect();
        let coef = |row: usize, col: usize| -> f64 {
            // [α_i R] is m x (m+1): column 0 holds α_i, column 1+k holds r_k e_k
            if col == 0 {
                a[(row, i)]
            } else if col - 1 == row {
                r[row]
            } else {
                0.0
            }
        };
        let mut lmi = AffineMatrix::new(m);
        for p_ in 0..m {
            for q in p_..m {
                let mut e = LinExpr::new();
                // (row p_) coef(p_, s) W[idx s, idx t] coef(q, t)
                for s in [0, p_ + 1] {
                    for t_ in [0, q + 1] {
                        let c = coef(p_, s) * coef(q, t_);
                        if c != 0.0 {
                            e.add_term(w.entry(idx[s], idx[t_]), -c);
                        }
                    }
                }
                e.add_expr(&t, settings.sigma_big);
                if p_ == q {
                    e.add_term(beta(p_, i), 1.0);
                }
                e.compact();
                lmi.add_expr(p_, q, &e, 1.0);
            }
        }
        p.add_lmi(format!("coord{i}"), lmi);
    }
    for d in 0..(m + n) {
        obj.add_term(g.entry(d, d), 0.5 * settings.mu);
    }
    obj.compact();
    p.set_objective(Sense::Minimize, obj);
    p
}

fn frame_result(
    frame: &Frame,
    position: DVector<f64>,
    relaxation_matrix: DMatrix<f64>,
    eig_ratio: f64,
    objective: f64,
    status: SolveStatus,
    iterations: usize,
) -> LocalizationResult {
    let mut warnings = Vec::new();
    if eig_ratio < TIGHT_RATIO {
        warnings.push(Warning::Tightness { eig_ratio });
    }
    LocalizationResult {
        position: frame.to_world(&position),
        relaxation_matrix,
        eig_ratio,
        objective: objective * frame.scale * frame.scale,
        solver_status: status,
        iterations,
        warnings,
    }
}

/// Joint (non-iterative) SDP. The eigenvalue ratio reported is the
/// first-to-second ratio of the lifted matrix.
pub fn sll1_md(anchors: &AnchorSet, ranges: &RangeVector, settings: &Sll1Settings) -> Result<LocalizationResult> {
    settings.validate()?;
    check_inputs(anchors, ranges)?;
    let frame = Frame::fit(anchors, ranges);
    let (m, n) = (anchors.m(), anchors.n());
    let sol = solve_sdp(&sll1_md_problem(&frame.anchors, &frame.ranges, settings), &settings.solver)?;
    let w = sol.block("W");
    let g = sol.block("G");
    let raw = DMatrix::from_fn(m, n, |k, i| w[(0, 1 + k * n + i)]);
    let u = rows_to_unit(&raw)?;
    let beta = g.view((0, m), (m, n)).into_owned();
    let lambda = simplex(DVector::from_fn(m, |k, _| beta.row(k).sum()));
    let x = weighted_centroid(&frame.anchors, &frame.ranges, &u, &lambda);
    let eig_ratio = top_k_factor(w, 1)?.eig_ratio;
    Ok(frame_result(&frame, x, w.clone(), eig_ratio, sol.objective_value, sol.status, sol.iterations))
}

/// Simplified SDP over `[[I, U^T], [U, UU^T]]` with a single epigraph
/// variable.
pub fn sll1_sd_problem(a: &DMatrix<f64>, r: &DVector<f64>, settings: &Sll1Settings) -> SdpProblem {
    let (m, n) = a.shape();
    let mut p = SdpProblem::new();
    let w = p.add_psd_block("W", n + m);
    let betas: Vec<usize> = (0..m).map(|k| p.add_free_var(format!("beta{k}"))).collect();
    for i in 0..n {
        for j in i..n {
            p.add_eq(LinExpr::var(w.entry(i, j)), if i == j { 1.0 } else { 0.0 });
        }
    }
    for k in 0..m {
        p.add_eq(LinExpr::var(w.entry(n + k, n + k)), 1.0);
        p.add_ge(LinExpr::var(betas[k]), BETA_FLOOR);
    }
    let mut t = LinExpr::new();
    for &b in &betas {
        t.add_term(b, 1.0);
    }
    // [A R] row p: A[p, :] in columns 0..n, r_p in column n + p
    let coef = |row: usize, col: usize| -> f64 {
        if col < n {
            a[(row, col)]
        } else if col - n == row {
            r[row]
        } else {
            0.0
        }
    };
    let mut lmi = AffineMatrix::new(m);
    for p_ in 0..m {
        for q in p_..m {
            let mut e = LinExpr::new();
            let cols_p: Vec<usize> = (0..n).chain(std::iter::once(n + p_)).collect();
            let cols_q: Vec<usize> = (0..n).chain(std::iter::once(n + q)).collect();
            for &s in &cols_p {
                for &t_ in &cols_q {
                    let c = coef(p_, s) * coef(q, t_);
                    if c != 0.0 {
                        e.add_term(w.entry(s, t_), -c);
                    }
                }
            }
            e.add_expr(&t, settings.sigma_big);
            if p_ == q {
                e.add_term(betas[p_], 1.0);
            }
            e.compact();
            lmi.add_expr(p_, q, &e, 1.0);
        }
    }
    p.add_lmi("epigraph", lmi);
    p.set_objective(Sense::Minimize, t);
    p
}

pub fn sll1_sd(anchors: &AnchorSet, ranges: &RangeVector, settings: &Sll1Settings) -> Result<LocalizationResult> {
    settings.validate()?;
    check_inputs(anchors, ranges)?;
    let frame = Frame::fit(anchors, ranges);
    let (m, n) = (anchors.m(), anchors.n());
    let sol = solve_sdp(&sll1_sd_problem(&frame.anchors, &frame.ranges, settings), &settings.solver)?;
    let w = sol.block("W");
    let raw = w.view((n, 0), (m, n)).into_owned();
    let u = rows_to_unit(&raw)?;
    let beta = DVector::from_fn(m, |k, _| sol.free(&format!("beta{k}")));
    let lambda = simplex(beta);
    let x = weighted_centroid(&frame.anchors, &frame.ranges, &u, &lambda);
    let eig_ratio = top_k_factor(w, n)?.eig_ratio;
    Ok(frame_result(&frame, x, w.clone(), eig_ratio, sol.objective_value, sol.status, sol.iterations))
}
