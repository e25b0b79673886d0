//! Two-dimensional Gaussian maximum-likelihood localization through the
//! complex-phase semidefinite relaxation.
//!
//! Anchors are packed as complex numbers `a_i`, each projection onto a range
//! circle is `y_i = a_i + r_i θ_i` with `|θ_i| = 1`, and the phase vector is
//! recovered from the relaxed matrix `Φ ≈ θθ^H`.

use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::core::{AnchorSet, LocalizationResult, RangeVector, Warning, TIGHT_RATIO};
use crate::error::{Error, Result};
use crate::frame::Frame;
use crate::sdp::{
    complex_from_embedding, solve_sdp, top_k_factor_hermitian, AffineMatrix, LinExpr, PsdBlock,
    SdpProblem, Sense, SolveStatus, SolverSettings,
};

/// Default grid size of the three-anchor phase search.
pub const DEFAULT_GRID_POINTS: usize = 200_000;

#[derive(Debug, Clone, PartialEq)]
pub struct SlcpData {
    /// `R (I - 11^T/m) a`.
    pub c: DVector<Complex64>,
    /// Measured ranges.
    pub r: DVector<f64>,
    /// Anchors as complex numbers.
    pub a: DVector<Complex64>,
}

impl SlcpData {
    pub fn m(&self) -> usize {
        self.r.len()
    }

    /// Unrelaxed objective `2|c^H θ| + |r^T θ|^2 / m` at a phase vector.
    pub fn objective_at(&self, theta: &DVector<Complex64>) -> f64 {
        let m = self.m() as f64;
        let ch: Complex64 = self.c.iter().zip(theta.iter()).map(|(c, t)| c.conj() * t).sum();
        let rt: Complex64 = self.r.iter().zip(theta.iter()).map(|(r, t)| t * *r).sum();
        2.0 * ch.norm() + rt.norm_sqr() / m
    }
}

/// How the phase vector is extracted from the relaxed matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Factorization {
    /// Dominant eigenvector.
    #[default]
    Eigen,
    /// Exhaustive search over one angle; three anchors only.
    GridSearch { points: usize },
}

fn pack(anchors: &DMatrix<f64>, ranges: &DVector<f64>) -> SlcpData {
    let m = anchors.nrows();
    let a = DVector::from_fn(m, |i, _| Complex64::new(anchors[(i, 0)], anchors[(i, 1)]));
    let mean = a.sum() / m as f64;
    let c = DVector::from_fn(m, |i, _| (a[i] - mean) * ranges[i]);
    SlcpData { c, r: ranges.clone(), a }
}

pub fn build_slcp(anchors: &AnchorSet, ranges: &RangeVector) -> Result<SlcpData> {
    check_inputs(anchors, ranges)?;
    Ok(pack(anchors.positions(), ranges.values()))
}

fn check_inputs(anchors: &AnchorSet, ranges: &RangeVector) -> Result<()> {
    if anchors.n() != 2 {
        return Err(Error::DimensionMismatch(format!(
            "the complex formulation needs 2D anchors, got n = {}",
            anchors.n()
        )));
    }
    if ranges.len() != anchors.m() {
        return Err(Error::LengthMismatch { left: anchors.m(), right: ranges.len() });
    }
    if anchors.m() < 2 {
        return Err(Error::InvalidInput("at least two anchors are required".into()));
    }
    if anchors.m() < 3 {
        log::warn!("fewer than three anchors: the position is not identifiable");
    }
    Ok(())
}

/// Adds a `2m x 2m` block constrained to be the real embedding of a complex
/// Hermitian matrix with unit diagonal.
pub(crate) fn add_embedded_phase_block(p: &mut SdpProblem, name: &str, m: usize) -> PsdBlock {
    let s = p.add_psd_block(name, 2 * m);
    for i in 0..m {
        p.add_eq(LinExpr::var(s.entry(i, i)), 1.0);
        p.add_eq(LinExpr::var(s.entry(m + i, m + i)), 1.0);
        p.add_eq(LinExpr::var(s.entry(m + i, i)), 0.0);
        for j in (i + 1)..m {
            let mut re = LinExpr::var(s.entry(i, j));
            re.add_term(s.entry(m + i, m + j), -1.0);
            p.add_eq(re, 0.0);
            let mut im = LinExpr::var(s.entry(m + i, j));
            im.add_term(s.entry(m + j, i), 1.0);
            p.add_eq(im, 0.0);
        }
    }
    s
}

/// `c^H Φ c` as a linear function of the embedding block.
pub(crate) fn complex_quadratic(s: &PsdBlock, c: &DVector<Complex64>, scale: f64) -> LinExpr {
    let stacked: Vec<f64> = c.iter().map(|z| z.re).chain(c.iter().map(|z| z.im)).collect();
    real_quadratic(s, &stacked, 0, scale)
}

/// `v^T S v` restricted to rows/columns `offset..offset+len(v)`.
pub(crate) fn real_quadratic(s: &PsdBlock, v: &[f64], offset: usize, scale: f64) -> LinExpr {
    let mut e = LinExpr::new();
    for k in 0..v.len() {
        e.add_term(s.entry(offset + k, offset + k), scale * v[k] * v[k]);
        for l in (k + 1)..v.len() {
            e.add_term(s.entry(offset + k, offset + l), 2.0 * scale * v[k] * v[l]);
        }
    }
    e.compact();
    e
}

/// The relaxation as a block SDP; the embedding block is named `Phi`.
pub fn slcp_problem(data: &SlcpData) -> SdpProblem {
    let m = data.m();
    let mut p = SdpProblem::new();
    let s = add_embedded_phase_block(&mut p, "Phi", m);
    let t = p.add_free_var("t");
    p.add_ge(LinExpr::var(t), 0.0);
    let mut hyp = AffineMatrix::new(2);
    hyp.add_expr(0, 0, &complex_quadratic(&s, &data.c, 4.0), 1.0);
    hyp.add_var(0, 1, t, 1.0);
    hyp.add_const(1, 1, 1.0);
    p.add_lmi("hypograph", hyp);
    let mut obj = real_quadratic(&s, data.r.as_slice(), 0, 1.0 / m as f64);
    obj.add_term(t, 1.0);
    p.set_objective(Sense::Maximize, obj);
    p
}

/// Solution of the relaxation.
#[derive(Debug, Clone)]
pub struct SlcpRelaxation {
    pub phi: DMatrix<Complex64>,
    pub embedding: DMatrix<f64>,
    pub objective: f64,
    pub status: SolveStatus,
    pub iterations: usize,
}

/// Solves the relaxation on `data` as given (no normalization).
pub fn solve_relaxation(data: &SlcpData, settings: &SolverSettings) -> Result<SlcpRelaxation> {
    let sol = solve_sdp(&slcp_problem(data), settings)?;
    let embedding = sol.block("Phi").clone();
    Ok(SlcpRelaxation {
        phi: complex_from_embedding(&embedding),
        embedding,
        objective: sol.objective_value,
        status: sol.status,
        iterations: sol.iterations,
    })
}

/// Rotates `theta` by `e^{jγ}` so that `c^H θ` lands on the negative real axis.
pub fn rotate_phase(theta: &DVector<Complex64>, c: &DVector<Complex64>) -> DVector<Complex64> {
    let unit = theta.map(|z| if z.norm() > 0.0 { z / z.norm() } else { Complex64::new(1.0, 0.0) });
    let ch: Complex64 = c.iter().zip(unit.iter()).map(|(ci, ti)| ci.conj() * ti).sum();
    let gamma = if ch.norm() == 0.0 { 0.0 } else { PI - ch.arg() };
    unit * Complex64::from_polar(1.0, gamma)
}

/// Phase vector maximizing `θ^H Φ θ` over a uniform grid of the second
/// phase, with the third phase chosen optimally for each grid angle.
pub fn factor_rank1_search_m3(phi: &DMatrix<Complex64>, grid_points: usize) -> Result<DVector<Complex64>> {
    if phi.nrows() != 3 || phi.ncols() != 3 {
        return Err(Error::DimensionMismatch(format!(
            "grid factorization needs a 3x3 matrix, got {}x{}",
            phi.nrows(),
            phi.ncols()
        )));
    }
    if grid_points == 0 {
        return Err(Error::InvalidInput("grid must have at least one point".into()));
    }
    let (p12, p23, p13) = (phi[(0, 1)], phi[(1, 2)], phi[(0, 2)]);
    let mut best = (f64::NEG_INFINITY, 0.0);
    for k in 0..grid_points {
        let alpha = TAU * k as f64 / grid_points as f64;
        let e = Complex64::from_polar(1.0, alpha);
        let v = (p12 * e).re + (p23 + p13 * e).norm();
        if v > best.0 {
            best = (v, alpha);
        }
    }
    let alpha = best.1;
    let delta = -(p23 + p13 * Complex64::from_polar(1.0, alpha)).arg();
    Ok(DVector::from_vec(vec![
        Complex64::new(1.0, 0.0),
        Complex64::from_polar(1.0, alpha),
        Complex64::from_polar(1.0, alpha + delta),
    ]))
}

/// Dominant eigenvector scaled by the square root of its eigenvalue, with
/// the first entry's phase removed. Returns the eigenvalue ratio too.
pub fn dominant_phase_vector(phi: &DMatrix<Complex64>) -> Result<(DVector<Complex64>, f64)> {
    let f = top_k_factor_hermitian(phi, 1)?;
    let mut theta: DVector<Complex64> = f.factor.column(0).into_owned();
    if theta[0].norm() > 0.0 {
        let ph = theta[0].conj() / theta[0].norm();
        theta *= ph;
    }
    Ok((theta, f.eig_ratio))
}

/// Circle projections `a + Rθ` for a rotated phase vector.
pub fn project(data: &SlcpData, theta: &DVector<Complex64>) -> DVector<Complex64> {
    DVector::from_fn(data.m(), |i, _| data.a[i] + theta[i] * data.r[i])
}

pub fn solve_slcp(anchors: &AnchorSet, ranges: &RangeVector, settings: &SolverSettings) -> Result<LocalizationResult> {
    solve_slcp_with(anchors, ranges, settings, Factorization::Eigen)
}

pub fn solve_slcp_with(
    anchors: &AnchorSet,
    ranges: &RangeVector,
    settings: &SolverSettings,
    factorization: Factorization,
) -> Result<LocalizationResult> {
    check_inputs(anchors, ranges)?;
    let frame = Frame::fit(anchors, ranges);
    let data = pack(&frame.anchors, &frame.ranges);
    let relax = solve_relaxation(&data, settings)?;
    let (eig_theta, eig_ratio) = dominant_phase_vector(&relax.phi)?;
    let theta = match factorization {
        Factorization::Eigen => eig_theta,
        Factorization::GridSearch { points } => factor_rank1_search_m3(&relax.phi, points)?,
    };
    let theta = rotate_phase(&theta, &data.c);
    let y = project(&data, &theta);
    let x = y.sum() / data.m() as f64;
    let position = frame.to_world(&DVector::from_vec(vec![x.re, x.im]));

    let mut warnings = Vec::new();
    if eig_ratio < TIGHT_RATIO {
        warnings.push(Warning::Tightness { eig_ratio });
    }
    Ok(LocalizationResult {
        position,
        relaxation_matrix: relax.embedding,
        eig_ratio,
        objective: relax.objective * frame.scale * frame.scale,
        solver_status: relax.status,
        iterations: relax.iterations,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::{generate_scenario_with, NoiseModel};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cx(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn build_example() {
        let a = AnchorSet::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let r = RangeVector::from_slice(&[1.0, 1.0]).unwrap();
        let d = build_slcp(&a, &r).unwrap();
        assert_eq!(d.a, DVector::from_vec(vec![cx(1.0, 0.0), cx(0.0, 1.0)]));
        assert_abs_diff_eq!((d.c[0] - cx(0.5, -0.5)).norm(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!((d.c[1] - cx(-0.5, 0.5)).norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn equal_ranges_give_zero_sum_c() {
        let a = AnchorSet::from_rows(&[vec![1.0, 0.0], vec![-0.5, 0.866], vec![-0.5, -0.866]]).unwrap();
        let r = RangeVector::from_slice(&[2.0, 2.0, 2.0]).unwrap();
        let d = build_slcp(&a, &r).unwrap();
        assert!(d.c.sum().norm() < 1e-14);
    }

    #[test]
    fn rejects_3d() {
        let a = AnchorSet::from_rows(&[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]]).unwrap();
        let r = RangeVector::from_slice(&[1.0, 1.0, 1.0]).unwrap();
        assert!(matches!(build_slcp(&a, &r), Err(Error::DimensionMismatch(_))));
        assert!(matches!(solve_slcp(&a, &r, &SolverSettings::default()), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn rotate_phase_examples() {
        // c^H θ already real negative
        let c = DVector::from_vec(vec![cx(-1.0, 0.0), cx(0.0, 0.0)]);
        let th = DVector::from_vec(vec![cx(1.0, 0.0), cx(0.0, 1.0)]);
        let rot = rotate_phase(&th, &c);
        assert!((rot - &th).norm() < 1e-12);

        // c^H θ = j
        let c = DVector::from_vec(vec![cx(0.0, -1.0)]);
        let th = DVector::from_vec(vec![cx(1.0, 0.0)]);
        let rot = rotate_phase(&th, &c);
        let ch = c[0].conj() * rot[0];
        assert_abs_diff_eq!(ch.re, -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(rot[0].arg(), PI / 2.0, epsilon = 1e-12);

        let zero = DVector::from_element(2, cx(0.0, 0.0));
        let th = DVector::from_vec(vec![cx(0.0, 1.0), cx(-1.0, 0.0)]);
        assert_eq!(rotate_phase(&th, &zero), th);
    }

    #[test]
    fn rotate_phase_postcondition_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..100 {
            let c = DVector::from_fn(5, |_, _| cx(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
            let th = DVector::from_fn(5, |_, _| Complex64::from_polar(1.0 + 1e-7, rng.random_range(0.0..TAU)));
            let rot = rotate_phase(&th, &c);
            let ch: Complex64 = c.iter().zip(rot.iter()).map(|(a, b)| a.conj() * b).sum();
            assert_abs_diff_eq!(ch.re, -ch.norm(), epsilon = 1e-9);
            assert!(rot.iter().all(|z| (z.norm() - 1.0).abs() < 1e-14));
        }
    }

    #[test]
    fn grid_search_on_exact_dyad() {
        let th = DVector::from_vec(vec![cx(1.0, 0.0), Complex64::from_polar(1.0, 1.1), Complex64::from_polar(1.0, -2.4)]);
        let phi = &th * th.adjoint();
        let got = factor_rank1_search_m3(&phi, DEFAULT_GRID_POINTS).unwrap();
        // grid resolution bounds the error
        let err = (&got - &th).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(err < 1e-4, "{err}");
        let val = (got.adjoint() * &phi * &got)[(0, 0)].re;
        assert_abs_diff_eq!(val, 9.0, epsilon = 1e-8);
    }

    #[test]
    fn grid_search_degenerate_identity() {
        let got = factor_rank1_search_m3(&DMatrix::identity(3, 3), 1000).unwrap();
        assert_eq!(got, DVector::from_element(3, cx(1.0, 0.0)));
        assert!(matches!(factor_rank1_search_m3(&DMatrix::identity(4, 4), 10), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn noiseless_recovery() {
        let settings = SolverSettings::default();
        for k in 0..10 {
            let s = generate_scenario_with(5, 2, 10.0, NoiseModel::Gaussian { sigma: 0.0 }, 21, k).unwrap();
            let res = solve_slcp(&s.anchors, &s.measured_ranges, &settings).unwrap();
            assert_eq!(res.solver_status, SolveStatus::Optimal);
            let err = (&res.position - &s.source).norm();
            assert!(err < 1e-4, "run {k}: error {err}");
            assert!(res.is_tight());
            assert!(res.warnings.is_empty());
        }
    }

    #[test]
    fn projections_lie_on_circles() {
        let s = generate_scenario_with(5, 2, 10.0, NoiseModel::Gaussian { sigma: 0.1 }, 4, 0).unwrap();
        let d = build_slcp(&s.anchors, &s.measured_ranges).unwrap();
        let relax = solve_relaxation(&d, &SolverSettings::default()).unwrap();
        let (th, _) = dominant_phase_vector(&relax.phi).unwrap();
        let y = project(&d, &rotate_phase(&th, &d.c));
        for i in 0..5 {
            assert_abs_diff_eq!((y[i] - d.a[i]).norm(), d.r[i], epsilon = 1e-9 * d.r[i].max(1.0));
        }
    }

    #[test]
    fn relaxation_bounds_sampled_phases() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let s = generate_scenario_with(4, 2, 10.0, NoiseModel::Gaussian { sigma: 0.5 }, 2, 3).unwrap();
        let d = build_slcp(&s.anchors, &s.measured_ranges).unwrap();
        let relax = solve_relaxation(&d, &SolverSettings::default()).unwrap();
        let mut best = 0.0f64;
        for _ in 0..20_000 {
            let th = DVector::from_fn(4, |i, _| {
                if i == 0 { cx(1.0, 0.0) } else { Complex64::from_polar(1.0, rng.random_range(0.0..TAU)) }
            });
            best = best.max(d.objective_at(&th));
        }
        assert!(relax.objective >= best - 1e-6 * best, "{} < {best}", relax.objective);
    }

    #[test]
    fn rigid_motion_invariance() {
        let s = generate_scenario_with(5, 2, 10.0, NoiseModel::Gaussian { sigma: 0.05 }, 6, 1).unwrap();
        let settings = SolverSettings::default();
        let base = solve_slcp(&s.anchors, &s.measured_ranges, &settings).unwrap();
        let (ang, tx, ty) = (0.7f64, 3.0, -2.0);
        let rot = nalgebra::Matrix2::new(ang.cos(), -ang.sin(), ang.sin(), ang.cos());
        let moved = DMatrix::from_fn(5, 2, |i, j| {
            let p = rot * nalgebra::Vector2::new(s.anchors.positions()[(i, 0)], s.anchors.positions()[(i, 1)]);
            p[j] + if j == 0 { tx } else { ty }
        });
        let res = solve_slcp(&AnchorSet::new(moved).unwrap(), &s.measured_ranges, &settings).unwrap();
        let expect = rot * nalgebra::Vector2::new(base.position[0], base.position[1]) + nalgebra::Vector2::new(tx, ty);
        assert!((res.position[0] - expect[0]).abs() < 1e-9 && (res.position[1] - expect[1]).abs() < 1e-9);
    }
}
