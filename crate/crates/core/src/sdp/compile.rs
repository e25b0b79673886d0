//! Lowering of an [`SdpProblem`] to the LMI standard form consumed by the
//! interior-point solver:
//!
//! ```text
//! maximize  b'y   subject to   C_k - sum_i y_i A_{k,i}  ⪰ 0   for every cone k
//! ```
//!
//! Linear equalities are removed by substitution (one pivot variable per
//! equality), so the remaining variables are free and every constraint is a
//! cone. Inequalities become 1×1 cones.

use nalgebra::DMatrix;

use super::problem::{AffineMatrix, LinExpr, Relation, Sense, SdpProblem};
use crate::error::{Error, Result};

/// Symmetric sparse coefficient matrix: upper-triangle triplets `(r, c, v)`.
pub(crate) type SymTriplets = Vec<(usize, usize, f64)>;

#[derive(Debug, Clone)]
pub(crate) struct Cone {
    pub size: usize,
    pub c: DMatrix<f64>,
    /// `(variable, A_var)` for every variable touching this cone.
    pub a: Vec<(usize, SymTriplets)>,
}

#[derive(Debug, Clone)]
pub(crate) struct StandardForm {
    pub n: usize,
    pub b: Vec<f64>,
    pub cones: Vec<Cone>,
}

/// Result of lowering: the standard form plus the map back to the original
/// variables.
#[derive(Debug, Clone)]
pub(crate) struct Lowered {
    pub form: StandardForm,
    /// Original variable -> affine expression over standard-form variables.
    pub back: Vec<LinExpr>,
}

const PIVOT_TOL: f64 = 1e-12;

fn substitute(expr: &LinExpr, sub: &[Option<LinExpr>]) -> LinExpr {
    let mut out = LinExpr::constant(expr.constant);
    for &(v, c) in &expr.terms {
        match &sub[v] {
            Some(s) => {
                out.add_expr(s, c);
            }
            None => {
                out.add_term(v, c);
            }
        }
    }
    out.compact();
    out
}

pub(crate) fn lower(problem: &SdpProblem) -> Result<Lowered> {
    problem.validate()?;
    let nv = problem.n_vars;
    let mut sub: Vec<Option<LinExpr>> = vec![None; nv];

    for (k, con) in problem.constraints.iter().enumerate() {
        if con.relation != Relation::Eq {
            continue;
        }
        let mut e = con.expr.clone();
        e.constant -= con.rhs;
        let e = substitute(&e, &sub);
        let scale = e.terms.iter().fold(1.0f64, |s, &(_, c)| s.max(c.abs()));
        let pivot = e
            .terms
            .iter()
            .copied()
            .filter(|&(_, c)| c.abs() > PIVOT_TOL * scale)
            .fold(None::<(usize, f64)>, |best, (v, c)| match best {
                Some((_, bc)) if bc.abs() >= c.abs() => best,
                _ => Some((v, c)),
            });
        let Some((pv, pc)) = pivot else {
            if e.constant.abs() > 1e-9 * (1.0 + con.rhs.abs()) {
                log::debug!("equality {k} is inconsistent");
                return Err(Error::Infeasible);
            }
            continue;
        };
        let mut expr = LinExpr::constant(-e.constant / pc);
        for &(v, c) in &e.terms {
            if v != pv {
                expr.add_term(v, -c / pc);
            }
        }
        expr.compact();
        for s in sub.iter_mut().flatten() {
            if s.terms.iter().any(|&(v, _)| v == pv) {
                *s = substitute(s, &{
                    let mut one = vec![None; nv];
                    one[pv] = Some(expr.clone());
                    one
                });
            }
        }
        sub[pv] = Some(expr);
    }

    // Reduced numbering of surviving variables.
    let mut reduced = vec![usize::MAX; nv];
    let mut n_red = 0;
    for v in 0..nv {
        if sub[v].is_none() {
            reduced[v] = n_red;
            n_red += 1;
        }
    }
    let to_reduced = |e: &LinExpr| -> LinExpr {
        let s = substitute(e, &sub);
        LinExpr {
            terms: s.terms.iter().map(|&(v, c)| (reduced[v], c)).collect(),
            constant: s.constant,
        }
    };

    // Gather every conic constraint as an affine matrix over original vars.
    let mut mats: Vec<AffineMatrix> = Vec::new();
    for blk in &problem.psd_blocks {
        let mut m = AffineMatrix::new(blk.size);
        for i in 0..blk.size {
            for j in i..blk.size {
                m.add_var(i, j, blk.entry(i, j), 1.0);
            }
        }
        mats.push(m);
    }
    for l in &problem.lmi_constraints {
        mats.push(l.matrix.clone());
    }
    for con in &problem.constraints {
        let mut m = AffineMatrix::new(1);
        match con.relation {
            Relation::Eq => continue,
            Relation::Ge => {
                m.add_expr(0, 0, &con.expr, 1.0);
                m.add_const(0, 0, -con.rhs);
            }
            Relation::Le => {
                m.add_expr(0, 0, &con.expr, -1.0);
                m.add_const(0, 0, con.rhs);
            }
        }
        mats.push(m);
    }

    let mut touched = vec![false; n_red];
    let mut raw_cones = Vec::with_capacity(mats.len());
    for m in &mats {
        let mut c = DMatrix::zeros(m.size, m.size);
        let mut per_var: std::collections::BTreeMap<usize, SymTriplets> = Default::default();
        for (&(i, j), e) in &m.entries {
            let r = to_reduced(e);
            c[(i, j)] += r.constant;
            if i != j {
                c[(j, i)] += r.constant;
            }
            for &(v, coef) in &r.terms {
                touched[v] = true;
                // C - sum y A >= 0 with F = C + sum y F_v, so A_v = -F_v
                per_var.entry(v).or_default().push((i, j, -coef));
            }
        }
        raw_cones.push((m.size, c, per_var));
    }

    let obj = to_reduced(&problem.objective);
    let sign = match problem.sense {
        Sense::Maximize => 1.0,
        Sense::Minimize => -1.0,
    };
    let mut b_red = vec![0.0; n_red];
    for &(v, c) in &obj.terms {
        b_red[v] += sign * c;
    }

    // Variables outside every cone are either unbounded directions or
    // irrelevant; pin the irrelevant ones at zero.
    let mut active = vec![usize::MAX; n_red];
    let mut n_act = 0;
    for v in 0..n_red {
        if touched[v] {
            active[v] = n_act;
            n_act += 1;
        } else if b_red[v].abs() > 0.0 {
            return Err(Error::Unbounded);
        }
    }

    let cones = raw_cones
        .into_iter()
        .map(|(size, c, per_var)| Cone {
            size,
            c,
            a: per_var
                .into_iter()
                .map(|(v, t)| (active[v], t))
                .collect(),
        })
        .collect();
    let mut b = vec![0.0; n_act];
    for v in 0..n_red {
        if touched[v] {
            b[active[v]] = b_red[v];
        }
    }

    let back = (0..nv)
        .map(|v| {
            let r = if sub[v].is_some() {
                to_reduced(&LinExpr::var(v))
            } else {
                LinExpr::var(reduced[v])
            };
            LinExpr {
                terms: r
                    .terms
                    .into_iter()
                    .filter(|&(rv, _)| touched[rv])
                    .map(|(rv, c)| (active[rv], c))
                    .collect(),
                constant: r.constant,
            }
        })
        .collect();

    Ok(Lowered {
        form: StandardForm { n: n_act, b, cones },
        back,
    })
}
