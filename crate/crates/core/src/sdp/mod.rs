//! Semidefinite programming: problem model, dense interior-point backend,
//! Hermitian-to-real embedding and low-rank factorization helpers.

mod compile;
mod embed;
mod factor;
mod ipm;
mod problem;

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub use embed::{complex_from_embedding, hermitian_embed};
pub use factor::{top_k_factor, top_k_factor_hermitian, LowRankFactor, EIG_RATIO_CAP};
pub use problem::{
    AffineMatrix, FreeVar, LinExpr, LinearConstraint, NamedLmi, PsdBlock, Relation, SdpProblem,
    Sense, VarId,
};

use crate::error::{Error, Result};

/// Interior-point settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverSettings {
    /// Feasibility and relative-gap target for `Optimal`.
    pub tolerance: f64,
    /// Results with residuals up to this bound are reported as `Inaccurate`.
    pub inaccurate_tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self { tolerance: 1e-8, inaccurate_tolerance: 1e-5, max_iterations: 100 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    Inaccurate,
    Failed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    pub primal_feas: f64,
    pub dual_feas: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdpSolution {
    pub block_values: BTreeMap<String, DMatrix<f64>>,
    pub free_values: BTreeMap<String, f64>,
    pub objective_value: f64,
    pub status: SolveStatus,
    pub residuals: Residuals,
    pub iterations: usize,
    /// Value of every scalar variable, indexed by [`VarId`].
    pub values: Vec<f64>,
}

impl SdpSolution {
    pub fn block(&self, name: &str) -> &DMatrix<f64> {
        &self.block_values[name]
    }

    pub fn free(&self, name: &str) -> f64 {
        self.free_values[name]
    }

    pub fn eval(&self, expr: &LinExpr) -> f64 {
        expr.eval(&self.values)
    }
}

/// Solves `problem` with the built-in interior-point method.
///
/// Infeasible and unbounded problems are reported through the error channel;
/// a run that ends with residuals above `inaccurate_tolerance` still returns
/// its best iterate with status `Failed`.
pub fn solve_sdp(problem: &SdpProblem, settings: &SolverSettings) -> Result<SdpSolution> {
    if !(settings.tolerance > 0.0) {
        return Err(Error::InvalidInput("solver tolerance must be positive".into()));
    }
    let lowered = compile::lower(problem)?;
    let res = ipm::solve(&lowered.form, settings);
    match res.outcome {
        ipm::IpmOutcome::DualUnbounded => return Err(Error::Unbounded),
        ipm::IpmOutcome::PrimalUnbounded => return Err(Error::Infeasible),
        _ => {}
    }
    if res.y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericalFailure("non-finite iterate".into()));
    }

    let values: Vec<f64> = lowered.back.iter().map(|e| e.eval(&res.y)).collect();
    let mut block_values = BTreeMap::new();
    for blk in &problem.psd_blocks {
        let mut m = DMatrix::zeros(blk.size, blk.size);
        for i in 0..blk.size {
            for j in i..blk.size {
                let v = values[blk.entry(i, j)];
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        block_values.insert(blk.name.clone(), m);
    }
    let free_values = problem
        .free_vars
        .iter()
        .map(|f| (f.name.clone(), values[f.id]))
        .collect();

    let worst = res.worst_residual();
    let status = if worst <= settings.tolerance {
        SolveStatus::Optimal
    } else if worst <= settings.inaccurate_tolerance {
        SolveStatus::Inaccurate
    } else {
        SolveStatus::Failed
    };
    if status != SolveStatus::Optimal {
        log::debug!("sdp solve ended {:?} ({:?}, worst residual {worst:.2e})", status, res.outcome);
    }

    Ok(SdpSolution {
        block_values,
        free_values,
        objective_value: problem.objective.eval(&values),
        status,
        residuals: Residuals {
            primal_feas: res.primal_infeasibility,
            dual_feas: res.dual_infeasibility,
            gap: res.relative_gap,
        },
        iterations: res.iterations,
        values,
    })
}
