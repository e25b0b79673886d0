//! Geometry of the two-dimensional relaxation: the image set of unit-modulus
//! phase vectors under `(|c^H θ|^2, |r^T θ|^2)`, its relaxed counterpart traced
//! by supporting hyperplanes, tightness statistics, and an explicit split of
//! unit-diagonal 3x3 PSD matrices into phase dyads.

use std::f64::consts::{FRAC_PI_2, TAU};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::core::{rmse, LocalizationResult, TIGHT_RATIO};
use crate::error::{Error, Result};
use crate::sdp::{complex_from_embedding, solve_sdp, SdpProblem, Sense, SolverSettings};
use crate::slcp::{add_embedded_phase_block, complex_quadratic, real_quadratic};

pub const DEFAULT_BETAS: usize = 200;
/// Gap threshold as a fraction of the traced boundary's diameter.
pub const DEFAULT_GAP_THRESHOLD: f64 = 0.3;

fn inner_c(c: &DVector<Complex64>, theta: &DVector<Complex64>) -> Complex64 {
    c.iter().zip(theta.iter()).map(|(ci, ti)| ci.conj() * ti).sum()
}

fn inner_r(r: &DVector<f64>, theta: &DVector<Complex64>) -> Complex64 {
    r.iter().zip(theta.iter()).map(|(ri, ti)| ti * *ri).sum()
}

fn check_lengths(c: &DVector<Complex64>, r: &DVector<f64>) -> Result<()> {
    if c.len() != r.len() {
        return Err(Error::LengthMismatch { left: c.len(), right: r.len() });
    }
    if c.is_empty() {
        return Err(Error::InvalidInput("empty vectors".into()));
    }
    Ok(())
}

/// Image point of one phase vector.
pub fn image_point(c: &DVector<Complex64>, r: &DVector<f64>, theta: &DVector<Complex64>) -> (f64, f64) {
    (inner_c(c, theta).norm_sqr(), inner_r(r, theta).norm_sqr())
}

/// Random points of the unrelaxed image set; the first phase is fixed to 1.
pub fn sample_set_s<R: Rng + ?Sized>(
    c: &DVector<Complex64>,
    r: &DVector<f64>,
    n_samples: usize,
    rng: &mut R,
) -> Result<Vec<(f64, f64)>> {
    check_lengths(c, r)?;
    let m = c.len();
    let mut theta = DVector::from_element(m, Complex64::new(1.0, 0.0));
    Ok((0..n_samples)
        .map(|_| {
            for t in theta.iter_mut().skip(1) {
                *t = Complex64::from_polar(1.0, rng.random::<f64>() * TAU);
            }
            image_point(c, r, &theta)
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HullSettings {
    pub solver: SolverSettings,
    pub gap_threshold: f64,
    /// Sweep normals around the whole circle instead of the nonnegative
    /// quadrant. The traced curve is then only conjectured to be the hull.
    pub full_boundary: bool,
    /// Trace in axes scaled by `(sum |c_i|)^2` and `(sum r_i)^2`, so both
    /// coordinates of the upper-right boundary span `[0, 1]`.
    pub normalize_axes: bool,
}

impl Default for HullSettings {
    fn default() -> Self {
        Self {
            solver: SolverSettings::default(),
            gap_threshold: DEFAULT_GAP_THRESHOLD,
            full_boundary: false,
            normalize_axes: false,
        }
    }
}

impl HullSettings {
    /// Settings used by the convexity experiment.
    pub fn convexity() -> Self {
        Self { normalize_axes: true, ..Self::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HullTrace {
    pub betas: Vec<f64>,
    pub points: Vec<(f64, f64)>,
    /// `(β, distance)` of consecutive points further apart than the
    /// threshold; β is the angle of the first point of the pair.
    pub gaps: Vec<(f64, f64)>,
    /// Grid angles whose support problem failed, with the error text.
    pub skipped: Vec<(f64, String)>,
    pub conjectural: bool,
    /// Raw `(u, v)` is `(points.0 * axis_scale.0, points.1 * axis_scale.1)`.
    pub axis_scale: (f64, f64),
}

/// Maximizes `cos β · tr(cc^H Φ) + sin β · tr(rr^T Φ)` over unit-diagonal
/// PSD `Φ` and returns the maximizer's image `(u, v)`.
pub fn support_point(
    c: &DVector<Complex64>,
    r: &DVector<f64>,
    beta: f64,
    settings: &SolverSettings,
) -> Result<(f64, f64)> {
    check_lengths(c, r)?;
    let m = c.len();
    // rescale so both forms are O(1) for the solver
    let k = {
        let cu: f64 = c.iter().map(|z| z.norm()).sum();
        let cv: f64 = r.iter().map(|x| x.abs()).sum();
        (cu * cu).max(cv * cv).max(f64::MIN_POSITIVE)
    };
    let cs = c / Complex64::new(k.sqrt(), 0.0);
    let rs: Vec<f64> = r.iter().map(|x| x / k.sqrt()).collect();
    let mut p = SdpProblem::new();
    let s = add_embedded_phase_block(&mut p, "Phi", m);
    let mut obj = complex_quadratic(&s, &cs, beta.cos());
    obj.add_expr(&real_quadratic(&s, &rs, 0, beta.sin()), 1.0);
    obj.compact();
    p.set_objective(Sense::Maximize, obj);
    let sol = solve_sdp(&p, settings)?;
    if sol.status == crate::sdp::SolveStatus::Failed {
        return Err(Error::NumericalFailure(format!("support problem at beta={beta} did not converge")));
    }
    let phi = complex_from_embedding(sol.block("Phi"));
    let u = (c.adjoint() * &phi * c)[(0, 0)].re;
    let rc = r.map(|x| Complex64::new(x, 0.0));
    let v = (rc.transpose() * &phi * &rc)[(0, 0)].re;
    Ok((u.max(0.0), v.max(0.0)))
}

fn distance(p: (f64, f64), q: (f64, f64)) -> f64 {
    (p.0 - q.0).hypot(p.1 - q.1)
}

fn diameter(points: &[(f64, f64)]) -> f64 {
    let mut d = 0.0f64;
    for (i, p) in points.iter().enumerate() {
        for q in &points[i + 1..] {
            d = d.max(distance(*p, *q));
        }
    }
    d
}

fn find_gaps(betas: &[f64], points: &[(f64, f64)], rel_threshold: f64) -> Vec<(f64, f64)> {
    let limit = rel_threshold * diameter(points);
    points
        .windows(2)
        .zip(betas)
        .filter_map(|(w, b)| {
            let d = distance(w[0], w[1]);
            (d > limit).then_some((*b, d))
        })
        .collect()
}

/// Traces the relaxed set's boundary on a uniform angle grid.
pub fn trace_hull(
    c: &DVector<Complex64>,
    r: &DVector<f64>,
    n_betas: usize,
    settings: &HullSettings,
) -> Result<HullTrace> {
    check_lengths(c, r)?;
    if n_betas < 2 {
        return Err(Error::InvalidInput("at least two grid angles are required".into()));
    }
    let grid: Vec<f64> = if settings.full_boundary {
        (0..n_betas).map(|k| TAU * k as f64 / n_betas as f64).collect()
    } else {
        (0..n_betas).map(|k| FRAC_PI_2 * k as f64 / (n_betas - 1) as f64).collect()
    };
    let (su, sv) = if settings.normalize_axes {
        let cu: f64 = c.iter().map(|z| z.norm()).sum();
        let cv: f64 = r.iter().map(|x| x.abs()).sum();
        let guard = |x: f64| if x > 0.0 { x * x } else { 1.0 };
        (guard(cu), guard(cv))
    } else {
        (1.0, 1.0)
    };
    let cs = c / Complex64::new(su.sqrt(), 0.0);
    let rs = r / sv.sqrt();
    let solved: Vec<Result<(f64, f64)>> =
        grid.par_iter().map(|&b| support_point(&cs, &rs, b, &settings.solver)).collect();
    let mut betas = Vec::with_capacity(n_betas);
    let mut points = Vec::with_capacity(n_betas);
    let mut skipped = Vec::new();
    for (b, res) in grid.into_iter().zip(solved) {
        match res {
            Ok(p) => {
                betas.push(b);
                points.push(p);
            }
            Err(e) => skipped.push((b, e.to_string())),
        }
    }
    let gaps = find_gaps(&betas, &points, settings.gap_threshold);
    Ok(HullTrace { betas, points, gaps, skipped, conjectural: settings.full_boundary, axis_scale: (su, sv) })
}

/// Passes when no two consecutive traced points are further apart than
/// `rel_threshold` times the traced boundary's diameter.
pub fn convexity_test(trace: &HullTrace, rel_threshold: f64) -> Result<(bool, Vec<(f64, f64)>)> {
    if trace.points.is_empty() {
        return Err(Error::InvalidInput("empty trace".into()));
    }
    let gaps = find_gaps(&trace.betas, &trace.points, rel_threshold);
    Ok((gaps.is_empty(), gaps))
}

/// CSV rows `beta,u,v,gap` in the traced axes; `gap` is the jump to the
/// next point when it is flagged and 0 otherwise.
pub fn trace_csv(trace: &HullTrace) -> String {
    let mut out = String::from("beta,u,v,gap\n");
    for (b, p) in trace.betas.iter().zip(&trace.points) {
        let gap = trace.gaps.iter().find(|g| g.0 == *b).map_or(0.0, |g| g.1);
        out.push_str(&format!("{b},{},{},{gap}\n", p.0, p.1));
    }
    out
}

pub fn samples_csv(samples: &[(f64, f64)]) -> String {
    let mut out = String::from("u,v\n");
    for (u, v) in samples {
        out.push_str(&format!("{u},{v}\n"));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TightnessStats {
    pub n_total: usize,
    pub n_tight: usize,
    pub rmse_all: f64,
    /// `None` when no run is tight.
    pub rmse_tight: Option<f64>,
}

pub fn tightness_stats(
    results: &[LocalizationResult],
    truths: &[DVector<f64>],
    ratio_threshold: f64,
) -> Result<TightnessStats> {
    if results.is_empty() {
        return Err(Error::InvalidInput("no results".into()));
    }
    if results.len() != truths.len() {
        return Err(Error::LengthMismatch { left: results.len(), right: truths.len() });
    }
    let est: Vec<DVector<f64>> = results.iter().map(|r| r.position.clone()).collect();
    let rmse_all = rmse(&est, truths)?;
    let (te, tt): (Vec<_>, Vec<_>) = results
        .iter()
        .zip(truths)
        .filter(|(r, _)| r.eig_ratio >= ratio_threshold)
        .map(|(r, t)| (r.position.clone(), t.clone()))
        .unzip();
    let rmse_tight = if te.is_empty() { None } else { Some(rmse(&te, &tt)?) };
    Ok(TightnessStats { n_total: results.len(), n_tight: te.len(), rmse_all, rmse_tight })
}

pub fn tightness_stats_default(results: &[LocalizationResult], truths: &[DVector<f64>]) -> Result<TightnessStats> {
    tightness_stats(results, truths, TIGHT_RATIO)
}

/// Intersections of the line through `point` with direction angle `dir`
/// and the unit circle: `(R, S)` with `R` ahead of `point`.
pub fn chord_points(point: Complex64, dir: f64) -> (Complex64, Complex64) {
    let e = Complex64::from_polar(1.0, dir);
    let q = (point.conj() * e).re;
    let disc = (q * q + 1.0 - point.norm_sqr()).max(0.0).sqrt();
    (point + e * (-q + disc), point + e * (-q - disc))
}

const UNIT_DIAG_TOL: f64 = 1e-8;
const PSD_TOL: f64 = 1e-8;
const BOUNDARY_TOL: f64 = 1e-8;
const EDGE_TOL: f64 = 1e-12;

/// `Φ = λ θ1 θ1^H + (1 - λ) θ2 θ2^H` with unit-modulus `θ1`, `θ2`.
#[derive(Debug, Clone, PartialEq)]
pub struct DyadPair {
    pub theta1: DVector<Complex64>,
    pub theta2: DVector<Complex64>,
    pub lambda: f64,
}

impl DyadPair {
    pub fn reconstruct(&self) -> DMatrix<Complex64> {
        let l = Complex64::new(self.lambda, 0.0);
        (&self.theta1 * self.theta1.adjoint()) * l + (&self.theta2 * self.theta2.adjoint()) * (Complex64::new(1.0, 0.0) - l)
    }
}

/// Permutation and diagonal unitary bringing `Φ` to
/// `[[1, a, b], [a, 1, z*], [b, z, 1]]` with `0 ≤ a ≤ b`.
struct Canonical {
    order: [usize; 3],
    phase: [Complex64; 3],
    a: f64,
    b: f64,
    z: Complex64,
}

impl Canonical {
    fn new(phi: &DMatrix<Complex64>) -> Self {
        let (j, k) = if phi[(1, 0)].norm() <= phi[(2, 0)].norm() { (1, 2) } else { (2, 1) };
        let unit = |w: Complex64| if w.norm() > 0.0 { w.conj() / w.norm() } else { Complex64::new(1.0, 0.0) };
        let phase = [Complex64::new(1.0, 0.0), unit(phi[(j, 0)]), unit(phi[(k, 0)])];
        let z = phase[2] * phi[(k, j)] * phase[1].conj();
        Self { order: [0, j, k], phase, a: phi[(j, 0)].norm().min(1.0), b: phi[(k, 0)].norm().min(1.0), z }
    }

    fn matrix(a: f64, b: f64, z: Complex64) -> DMatrix<Complex64> {
        let c = |x: f64| Complex64::new(x, 0.0);
        DMatrix::from_row_slice(3, 3, &[c(1.0), c(a), c(b), c(a), c(1.0), z.conj(), c(b), z, c(1.0)])
    }

    /// Maps a canonical-frame phase vector back to the input's frame.
    fn restore(&self, theta: &DVector<Complex64>) -> DVector<Complex64> {
        let mut v = DVector::zeros(3);
        for s in 0..3 {
            v[self.order[s]] = self.phase[s].conj() * theta[s];
        }
        let p = v[0].conj() / v[0].norm();
        v.map(|w| {
            let w = w * p;
            w / w.norm()
        })
    }

    fn radius_sq(a: f64, b: f64) -> f64 {
        ((1.0 - a * a) * (1.0 - b * b)).max(0.0)
    }
}

fn phase_vec(p: Complex64, q: Complex64) -> DVector<Complex64> {
    DVector::from_vec(vec![Complex64::new(1.0, 0.0), p / p.norm(), q / q.norm()])
}

/// Construction along the chord through `a` at angle `phi1`: returns
/// `(λ, R, S, e^{jβ}, e^{jδ})` and the resulting angle `φ2 - φ1`.
fn chord_construction(a: f64, b: f64, phi1: f64) -> ((f64, Complex64, Complex64, Complex64, Complex64), f64) {
    let ca = Complex64::new(a, 0.0);
    let (rr, ss) = chord_points(ca, phi1);
    let (dr, ds) = ((rr - ca).norm(), (ss - ca).norm());
    let lambda = ds / (dr + ds);
    let rho = ((1.0 - lambda) / lambda * (1.0 - b * b)).sqrt();
    let cos2 = ((1.0 - b * b - rho * rho) / (2.0 * b * rho)).clamp(-1.0, 1.0);
    let phi2 = cos2.acos();
    let eb = Complex64::new(b, 0.0) + Complex64::from_polar(rho, phi2);
    let ed = (Complex64::new(b, 0.0) - eb * lambda) / (1.0 - lambda);
    ((lambda, rr, ss, eb, ed), phi2 - phi1)
}

fn canonical_boundary_pair(a: f64, b: f64, z: Complex64) -> DyadPair {
    let one = Complex64::new(1.0, 0.0);
    if b >= 1.0 - EDGE_TOL {
        // third entry tied to the first; split the 2x2 part symmetrically
        let s = (1.0 - a * a).max(0.0).sqrt();
        let (p, q) = (Complex64::new(a, s), Complex64::new(a, -s));
        return DyadPair { theta1: phase_vec(p, one), theta2: phase_vec(q, one), lambda: 0.5 };
    }
    if b <= EDGE_TOL {
        // z on the unit circle: antipodal pair
        let w = if z.norm() > 0.0 { z / z.norm() } else { one };
        return DyadPair { theta1: phase_vec(one, w), theta2: phase_vec(-one, -w), lambda: 0.5 };
    }
    let target = (z - Complex64::new(a * b, 0.0)).arg();
    let h0 = chord_construction(a, b, 0.0).1;
    let mut t = (target - h0).rem_euclid(TAU) + h0;
    if t > h0 {
        t -= TAU;
    }
    // h(0) - t >= 0 and h(2π) - t = h0 - 2π - t <= 0
    let (mut lo, mut hi) = (0.0, TAU);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if chord_construction(a, b, mid).1 - t >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let ((lambda, rr, ss, eb, ed), _) = chord_construction(a, b, 0.5 * (lo + hi));
    DyadPair { theta1: phase_vec(rr, eb), theta2: phase_vec(ss, ed), lambda }
}

fn validate_unit_psd(phi: &DMatrix<Complex64>) -> Result<()> {
    if phi.nrows() != 3 || phi.ncols() != 3 {
        return Err(Error::DimensionMismatch(format!("expected 3x3, got {}x{}", phi.nrows(), phi.ncols())));
    }
    let mut herm = 0.0f64;
    for i in 0..3 {
        for j in 0..3 {
            herm = herm.max((phi[(i, j)] - phi[(j, i)].conj()).norm());
        }
    }
    if herm > 1e-10 {
        return Err(Error::NotHermitian(herm));
    }
    let diag = (0..3).map(|i| (phi[(i, i)] - Complex64::new(1.0, 0.0)).norm()).fold(0.0, f64::max);
    if diag > UNIT_DIAG_TOL {
        return Err(Error::NotUnitDiagonal(diag));
    }
    let min_eig = crate::sdp::hermitian_embed(phi)?.symmetric_eigenvalues().min();
    if min_eig < -PSD_TOL {
        return Err(Error::NotPsd(min_eig));
    }
    Ok(())
}

/// Splits a singular unit-diagonal 3x3 PSD matrix into two phase dyads.
pub fn dyad_decompose(phi: &DMatrix<Complex64>) -> Result<DyadPair> {
    validate_unit_psd(phi)?;
    let cf = Canonical::new(phi);
    let rad2 = Canonical::radius_sq(cf.a, cf.b);
    let off = cf.z - Complex64::new(cf.a * cf.b, 0.0);
    let det = rad2 - off.norm_sqr();
    if det > BOUNDARY_TOL {
        return Err(Error::NotBoundary(det));
    }
    let pair = canonical_boundary_pair(cf.a, cf.b, cf.z);
    Ok(DyadPair { theta1: cf.restore(&pair.theta1), theta2: cf.restore(&pair.theta2), lambda: pair.lambda })
}

/// Convex combination of at most four phase dyads equal to any unit-diagonal
/// 3x3 PSD matrix. Interior matrices are first split along the horizontal
/// chord of the admissible disc of `z`.
pub fn dyad_hull_decompose(phi: &DMatrix<Complex64>) -> Result<Vec<(f64, DVector<Complex64>)>> {
    validate_unit_psd(phi)?;
    let cf = Canonical::new(phi);
    let rad2 = Canonical::radius_sq(cf.a, cf.b);
    let centre = Complex64::new(cf.a * cf.b, 0.0);
    let off = cf.z - centre;
    let mut parts: Vec<(f64, Complex64)> = Vec::new();
    if rad2 - off.norm_sqr() <= BOUNDARY_TOL {
        parts.push((1.0, cf.z));
    } else {
        let half = (rad2 - off.im * off.im).max(0.0).sqrt();
        let right = centre + Complex64::new(half, off.im);
        let left = centre + Complex64::new(-half, off.im);
        let mu = (cf.z.re - left.re) / (right.re - left.re);
        parts.push((mu, right));
        parts.push((1.0 - mu, left));
    }
    let mut out = Vec::new();
    for (w, z) in parts {
        let pair = canonical_boundary_pair(cf.a, cf.b, z);
        for (l, th) in [(pair.lambda, pair.theta1), (1.0 - pair.lambda, pair.theta2)] {
            if w * l > 0.0 {
                out.push((w * l, cf.restore(&th)));
            }
        }
    }
    Ok(out)
}

/// Canonical-form matrix with `z` on the boundary circle at angle `angle`.
pub fn boundary_matrix(a: f64, b: f64, angle: f64) -> DMatrix<Complex64> {
    let z = Complex64::new(a * b, 0.0) + Complex64::from_polar(Canonical::radius_sq(a, b).sqrt(), angle);
    Canonical::matrix(a, b, z)
}
