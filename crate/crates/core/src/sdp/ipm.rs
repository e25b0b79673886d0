//! Dense primal-dual interior-point method for small block SDPs.
//!
//! Works on the pair
//!
//! ```text
//! (P) minimize <C, X>  s.t. <A_i, X> = b_i, X ⪰ 0
//! (D) maximize b'y     s.t. S = C - sum_i y_i A_i ⪰ 0
//! ```
//!
//! with the Nesterov-Todd search direction, Mehrotra predictor-corrector steps and an
//! infeasible starting point. All blocks are dense; the Schur complement is
//! formed explicitly and factored with Cholesky.

use nalgebra::{DMatrix, DVector};

use super::compile::{Cone, StandardForm, SymTriplets};
use super::SolverSettings;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum IpmOutcome {
    Converged,
    Stalled,
    MaxIterations,
    PrimalUnbounded,
    DualUnbounded,
    Breakdown,
}

#[derive(Debug, Clone)]
pub(crate) struct IpmResult {
    pub y: Vec<f64>,
    pub primal_infeasibility: f64,
    pub dual_infeasibility: f64,
    pub relative_gap: f64,
    pub iterations: usize,
    pub outcome: IpmOutcome,
}

impl IpmResult {
    pub fn worst_residual(&self) -> f64 {
        self.primal_infeasibility
            .max(self.dual_infeasibility)
            .max(self.relative_gap)
    }
}

/// tr(A G) for symmetric sparse A and arbitrary dense G.
fn trace_with(a: &SymTriplets, g: &DMatrix<f64>) -> f64 {
    a.iter().fold(0.0, |acc, &(r, c, v)| {
        if r == c {
            acc + v * g[(r, r)]
        } else {
            acc + v * (g[(r, c)] + g[(c, r)])
        }
    })
}

fn add_scaled_sym(target: &mut DMatrix<f64>, a: &SymTriplets, scale: f64) {
    for &(r, c, v) in a {
        target[(r, c)] += scale * v;
        if r != c {
            target[(c, r)] += scale * v;
        }
    }
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

fn inner(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.dot(b)
}

/// A(G): vector of tr(A_i G) over all cones.
fn apply_a(form: &StandardForm, gs: &[DMatrix<f64>]) -> DVector<f64> {
    let mut out = DVector::zeros(form.n);
    for (cone, g) in form.cones.iter().zip(gs) {
        for (v, a) in &cone.a {
            out[*v] += trace_with(a, g);
        }
    }
    out
}

/// sum_i y_i A_i restricted to one cone.
fn apply_at(cone: &Cone, y: &DVector<f64>) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(cone.size, cone.size);
    for (v, a) in &cone.a {
        add_scaled_sym(&mut m, a, y[*v]);
    }
    m
}

/// Scaling point of a primal-dual pair: `G^T S G = G^-1 X G^-T = diag(d)`
/// and `W = G G^T` satisfies `W S W = X`.
struct NtScaling {
    g: DMatrix<f64>,
    g_inv: DMatrix<f64>,
    w: DMatrix<f64>,
    d: DVector<f64>,
}

impl NtScaling {
    fn new(x: &DMatrix<f64>, s: &DMatrix<f64>) -> Option<Self> {
        let lx = x.clone().cholesky()?.l();
        let ls = s.clone().cholesky()?.l();
        let svd = (ls.transpose() * &lx).svd(true, true);
        let d = svd.singular_values.clone();
        if d.iter().any(|v| !(*v > 0.0)) {
            return None;
        }
        let v = svd.v_t?.transpose();
        let u = svd.u?;
        let g = &lx * &v * DMatrix::from_diagonal(&d.map(|e| 1.0 / e.sqrt()));
        // G^-1 = D^-1/2 U^T Ls^T
        let g_inv = DMatrix::from_diagonal(&d.map(|e| 1.0 / e.sqrt())) * u.transpose() * ls.transpose();
        let mut w = &g * g.transpose();
        symmetrize(&mut w);
        Some(Self { g, g_inv, w, d })
    }
}

/// Largest alpha with M + alpha*D ⪰ 0 (infinite if D ⪰ 0), M ≻ 0.
fn max_step(m: &DMatrix<f64>, d: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    if n == 1 {
        return if d[(0, 0)] < 0.0 { -m[(0, 0)] / d[(0, 0)] } else { f64::INFINITY };
    }
    let Some(chol) = m.clone().cholesky() else {
        return 0.0;
    };
    let l = chol.l();
    let Some(linv) = l.clone().try_inverse() else {
        return 0.0;
    };
    let mut t = &linv * d * linv.transpose();
    symmetrize(&mut t);
    let min_eig = t.symmetric_eigenvalues().min();
    if min_eig >= 0.0 {
        f64::INFINITY
    } else {
        -1.0 / min_eig
    }
}

fn frob(ms: &[DMatrix<f64>]) -> f64 {
    ms.iter().map(|m| m.norm_squared()).sum::<f64>().sqrt()
}

/// After the tolerance is first met, iterate until mu drops below this
/// multiple of the tolerance (or the extra budget runs out). Degenerate
/// problems approach low-rank optima only like sqrt(mu).
const REFINE_MU_FACTOR: f64 = 1e-5;
const REFINE_ITERS: usize = 8;

pub(crate) fn solve(form: &StandardForm, settings: &SolverSettings) -> IpmResult {
    let n = form.n;
    let b = DVector::from_column_slice(&form.b);
    let b_norm = b.norm();
    let c_norm = form.cones.iter().map(|k| k.c.norm_squared()).sum::<f64>().sqrt();
    let total_dim: usize = form.cones.iter().map(|k| k.size).sum();

    // Starting point scaled to the data (per cone).
    let mut x: Vec<DMatrix<f64>> = Vec::with_capacity(form.cones.len());
    let mut s: Vec<DMatrix<f64>> = Vec::with_capacity(form.cones.len());
    for cone in &form.cones {
        let nb = cone.size as f64;
        let mut xi = 10.0f64.max(nb.sqrt());
        let mut eta = 10.0f64.max(nb.sqrt()).max(cone.c.norm());
        for (v, a) in &cone.a {
            let an = a
                .iter()
                .map(|&(r, c, w)| if r == c { w * w } else { 2.0 * w * w })
                .sum::<f64>()
                .sqrt();
            xi = xi.max(nb.sqrt() * (1.0 + form.b[*v].abs()) / (1.0 + an));
            eta = eta.max(an);
        }
        x.push(DMatrix::identity(cone.size, cone.size) * xi);
        s.push(DMatrix::identity(cone.size, cone.size) * eta);
    }
    let mut y = DVector::zeros(n);

    let result = |y: &DVector<f64>, pinf, dinf, gap, it, outcome| IpmResult {
        y: y.iter().copied().collect(),
        primal_infeasibility: pinf,
        dual_infeasibility: dinf,
        relative_gap: gap,
        iterations: it,
        outcome,
    };

    let mut best: Option<IpmResult> = None;
    let mut small_steps = 0;
    let mut refine_iters = 0;
    let mut best_mu = f64::INFINITY;

    for iter in 0..settings.max_iterations {
        // Residuals.
        let ax = apply_a(form, &x);
        let rp = &b - &ax;
        let rd: Vec<DMatrix<f64>> = form
            .cones
            .iter()
            .zip(&s)
            .map(|(cone, sk)| &cone.c - apply_at(cone, &y) - sk)
            .collect();
        let pobj: f64 = form.cones.iter().zip(&x).map(|(k, xk)| inner(&k.c, xk)).sum();
        let dobj = b.dot(&y);
        let xs: f64 = x.iter().zip(&s).map(|(a, bb)| inner(a, bb)).sum();
        let mu = xs / total_dim as f64;

        let pinf = rp.norm() / (1.0 + b_norm);
        let dinf = frob(&rd) / (1.0 + c_norm);
        let gap = (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs());
        log::trace!(
            "ipm it={iter} pobj={pobj:.10e} dobj={dobj:.10e} pinf={pinf:.2e} dinf={dinf:.2e} gap={gap:.2e} mu={mu:.2e}"
        );

        if !(pobj.is_finite() && dobj.is_finite() && mu.is_finite()) {
            return best.unwrap_or_else(|| result(&y, pinf, dinf, gap, iter, IpmOutcome::Breakdown));
        }

        let worst = pinf.max(dinf).max(gap);
        let snapshot = || result(&y, pinf, dinf, gap, iter, IpmOutcome::Stalled);
        // Among iterates meeting the tolerance prefer the smallest mu,
        // otherwise the smallest residual.
        let meets = worst <= settings.tolerance;
        let better = match &best {
            None => true,
            Some(b) => {
                let b_meets = b.worst_residual() <= settings.tolerance;
                match (meets, b_meets) {
                    (true, false) => true,
                    (true, true) => mu < best_mu,
                    (false, false) => worst <= b.worst_residual(),
                    (false, true) => false,
                }
            }
        };
        if better {
            best = Some(snapshot());
            best_mu = mu;
        }
        // Once the target is met, keep refining for a few iterations: the
        // low-rank structure of the optimum sharpens as mu shrinks.
        if best_mu.is_finite() && best.as_ref().is_some_and(|b| b.worst_residual() <= settings.tolerance) {
            refine_iters += 1;
            if best_mu <= settings.tolerance * REFINE_MU_FACTOR || refine_iters > REFINE_ITERS {
                let mut out = best.clone().unwrap_or_else(|| snapshot());
                out.outcome = IpmOutcome::Converged;
                return out;
            }
        }

        // Divergence certificates.
        let unbounded_scale = 1e8 * (1.0 + c_norm);
        if dobj > unbounded_scale && dinf < 1e-4 * (1.0 + dobj.abs()) {
            return result(&y, pinf, dinf, gap, iter, IpmOutcome::DualUnbounded);
        }
        if -pobj > 1e8 * (1.0 + b_norm) && pinf * (1.0 + b_norm) < 1e-4 * pobj.abs() {
            return result(&y, pinf, dinf, gap, iter, IpmOutcome::PrimalUnbounded);
        }

        // Nesterov-Todd scaling per cone: G with G^T S G = G^-1 X G^-T = D.
        let mut scal: Vec<NtScaling> = Vec::with_capacity(s.len());
        for (xk, sk) in x.iter().zip(&s) {
            match NtScaling::new(xk, sk) {
                Some(v) => scal.push(v),
                None => return best.unwrap_or_else(|| snapshot()),
            }
        }

        // Schur complement M_ij = tr(A_i W A_j W) = <G^T A_i G, G^T A_j G>.
        let mut schur = DMatrix::<f64>::zeros(n, n);
        for (cone, sc) in form.cones.iter().zip(&scal) {
            let sz = cone.size;
            let grams: Vec<DMatrix<f64>> = cone
                .a
                .iter()
                .map(|(_, a)| {
                    let mut g = DMatrix::<f64>::zeros(sz, sz);
                    for &(ri, ci, v) in a {
                        let gr = sc.g.row(ri).transpose();
                        let gc = sc.g.row(ci).transpose();
                        g.ger(v, &gr, &gc, 1.0);
                        if ri != ci {
                            g.ger(v, &gc, &gr, 1.0);
                        }
                    }
                    g
                })
                .collect();
            for (jdx, (vj, _)) in cone.a.iter().enumerate() {
                for (idx, (vi, _)) in cone.a.iter().enumerate().take(jdx + 1) {
                    schur[(*vi, *vj)] += grams[idx].dot(&grams[jdx]);
                }
            }
        }
        // Only the upper triangle was accumulated (variables are sorted
        // within each cone).
        for i in 0..n {
            for j in (i + 1)..n {
                schur[(j, i)] = schur[(i, j)];
            }
        }
        let chol = {
            let mut reg = 0.0;
            let diag_max = schur.diagonal().amax().max(1e-300);
            loop {
                let mut mm = schur.clone();
                if reg > 0.0 {
                    for i in 0..n {
                        mm[(i, i)] += reg;
                    }
                }
                if let Some(ch) = mm.cholesky() {
                    break Some(ch);
                }
                reg = if reg == 0.0 { 1e-14 * diag_max } else { reg * 100.0 };
                if reg > 1e-4 * diag_max {
                    break None;
                }
            }
        };
        let Some(chol) = chol else {
            log::debug!("ipm: Schur complement factorization failed at iteration {iter}");
            return best.unwrap_or_else(|| snapshot());
        };

        let w_rd_w: Vec<DMatrix<f64>> = scal.iter().zip(&rd).map(|(sc, rdk)| &sc.w * rdk * &sc.w).collect();
        let base_rhs = &rp + apply_a(form, &w_rd_w);

        // Solves the Newton system for a scaled complementarity target q
        // (dX~ + dS~ = P with D∘P = q).
        let direction = |q: &[DMatrix<f64>]| {
            let ps: Vec<DMatrix<f64>> = scal
                .iter()
                .zip(q)
                .map(|(sc, qk)| DMatrix::from_fn(qk.nrows(), qk.ncols(), |i, j| 2.0 * qk[(i, j)] / (sc.d[i] + sc.d[j])))
                .collect();
            let gpg: Vec<DMatrix<f64>> = scal.iter().zip(&ps).map(|(sc, p)| &sc.g * p * sc.g.transpose()).collect();
            let rhs = &base_rhs - apply_a(form, &gpg);
            let mut dy = chol.solve(&rhs);
            for _ in 0..2 {
                let res = &rhs - &schur * &dy;
                dy += chol.solve(&res);
            }
            let mut dxs = Vec::with_capacity(form.cones.len());
            let mut dss = Vec::with_capacity(form.cones.len());
            for (k, cone) in form.cones.iter().enumerate() {
                let ds = &rd[k] - apply_at(cone, &dy);
                // dX = G (P - G^T dS G) G^T, subtracting in the scaled space
                let g = &scal[k].g;
                let inner_diff = &ps[k] - g.transpose() * &ds * g;
                let mut dx = g * inner_diff * g.transpose();
                symmetrize(&mut dx);
                dxs.push(dx);
                dss.push(ds);
            }
            (dy, dxs, dss)
        };
        let step_lengths = |dxs: &[DMatrix<f64>], dss: &[DMatrix<f64>], frac: f64| {
            let mut ap = f64::INFINITY;
            let mut ad = f64::INFINITY;
            for k in 0..x.len() {
                ap = ap.min(max_step(&x[k], &dxs[k]));
                ad = ad.min(max_step(&s[k], &dss[k]));
            }
            ((frac * ap).min(1.0), (frac * ad).min(1.0))
        };

        // Predictor.
        let q_aff: Vec<DMatrix<f64>> = scal.iter().map(|sc| DMatrix::from_diagonal(&sc.d.map(|v| -v * v))).collect();
        let (_, dxa, dsa) = direction(&q_aff);
        let (apa, ada) = step_lengths(&dxa, &dsa, 1.0);
        let mu_aff: f64 = x
            .iter()
            .zip(&dxa)
            .zip(s.iter().zip(&dsa))
            .map(|((xk, dxk), (sk, dsk))| inner(&(xk + dxk * apa), &(sk + dsk * ada)))
            .sum::<f64>()
            / total_dim as f64;
        let expon = (3.0 * apa.min(ada).powi(2)).max(1.0);
        let sigma = (mu_aff.max(0.0) / mu).powf(expon).clamp(0.0, 1.0);

        // Corrector.
        let q_corr: Vec<DMatrix<f64>> = scal
            .iter()
            .zip(dxa.iter().zip(&dsa))
            .zip(&q_aff)
            .map(|((sc, (dxk, dsk)), qa)| {
                let dxt = &sc.g_inv * dxk * sc.g_inv.transpose();
                let dst = sc.g.transpose() * dsk * &sc.g;
                let prod = &dxt * &dst;
                let mut q = qa - (&prod + prod.transpose()) * 0.5;
                for i in 0..q.nrows() {
                    q[(i, i)] += sigma * mu;
                }
                q
            })
            .collect();
        let (dy, dx, ds) = direction(&q_corr);
        let frac = if worst < 1e-6 { 0.99 } else { 0.95 };
        let (ap, ad) = step_lengths(&dx, &ds, frac);

        if ap < 1e-10 && ad < 1e-10 {
            small_steps += 1;
            if small_steps >= 3 {
                return best.unwrap_or_else(|| snapshot());
            }
        } else {
            small_steps = 0;
        }

        for k in 0..x.len() {
            x[k] += &dx[k] * ap;
            s[k] += &ds[k] * ad;
            symmetrize(&mut x[k]);
            symmetrize(&mut s[k]);
        }
        y += dy * ad;
    }

    let mut out = best.unwrap_or_else(|| result(&y, f64::INFINITY, f64::INFINITY, f64::INFINITY, settings.max_iterations, IpmOutcome::MaxIterations));
    out.outcome = IpmOutcome::MaxIterations;
    out
}
