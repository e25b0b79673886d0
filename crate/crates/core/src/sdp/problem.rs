//! Block-structured semidefinite program model.
//!
//! Scalar decision variables come from two places: the upper-triangular
//! entries of declared PSD blocks, and named free scalars. Everything else
//! (objective, linear constraints, linear matrix inequalities) is an affine
//! expression over those scalars.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Index of a scalar decision variable.
pub type VarId = usize;

/// Sparse affine expression `constant + sum(coef * var)`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LinExpr {
    pub terms: Vec<(VarId, f64)>,
    pub constant: f64,
}

impl LinExpr {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Self { terms: Vec::new(), constant: c }
    }

    pub fn var(v: VarId) -> Self {
        Self { terms: vec![(v, 1.0)], constant: 0.0 }
    }

    pub fn term(v: VarId, coef: f64) -> Self {
        Self { terms: vec![(v, coef)], constant: 0.0 }
    }

    pub fn add_term(&mut self, v: VarId, coef: f64) -> &mut Self {
        if coef != 0.0 {
            self.terms.push((v, coef));
        }
        self
    }

    pub fn add_constant(&mut self, c: f64) -> &mut Self {
        self.constant += c;
        self
    }

    pub fn add_expr(&mut self, other: &LinExpr, scale: f64) -> &mut Self {
        for &(v, c) in &other.terms {
            self.add_term(v, c * scale);
        }
        self.constant += other.constant * scale;
        self
    }

    /// Merge duplicate variables and drop zero coefficients.
    pub fn compact(&mut self) {
        let mut acc: BTreeMap<VarId, f64> = BTreeMap::new();
        for &(v, c) in &self.terms {
            *acc.entry(v).or_insert(0.0) += c;
        }
        self.terms = acc.into_iter().filter(|&(_, c)| c != 0.0).collect();
    }

    pub fn eval(&self, values: &[f64]) -> f64 {
        self.terms
            .iter()
            .fold(self.constant, |s, &(v, c)| s + c * values[v])
    }

    fn max_var(&self) -> Option<VarId> {
        self.terms.iter().map(|&(v, _)| v).max()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Maximize,
    Minimize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    Eq,
    Le,
    Ge,
}

/// `expr (relation) rhs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearConstraint {
    pub expr: LinExpr,
    pub relation: Relation,
    pub rhs: f64,
}

/// Symmetric matrix whose entries are affine in the decision variables.
/// Only the upper triangle is stored; absent entries are zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineMatrix {
    pub size: usize,
    pub entries: BTreeMap<(usize, usize), LinExpr>,
}

impl AffineMatrix {
    pub fn new(size: usize) -> Self {
        Self { size, entries: BTreeMap::new() }
    }

    fn key(i: usize, j: usize) -> (usize, usize) {
        if i <= j {
            (i, j)
        } else {
            (j, i)
        }
    }

    /// Adds `coef * var` to entries (i, j) and (j, i).
    pub fn add_var(&mut self, i: usize, j: usize, var: VarId, coef: f64) {
        self.entries
            .entry(Self::key(i, j))
            .or_default()
            .add_term(var, coef);
    }

    pub fn add_const(&mut self, i: usize, j: usize, value: f64) {
        self.entries
            .entry(Self::key(i, j))
            .or_default()
            .add_constant(value);
    }

    pub fn add_expr(&mut self, i: usize, j: usize, expr: &LinExpr, scale: f64) {
        self.entries
            .entry(Self::key(i, j))
            .or_default()
            .add_expr(expr, scale);
    }

    pub fn get(&self, i: usize, j: usize) -> Option<&LinExpr> {
        self.entries.get(&Self::key(i, j))
    }

    pub fn eval(&self, values: &[f64]) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.size, self.size);
        for (&(i, j), e) in &self.entries {
            let v = e.eval(values);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
        m
    }
}

/// A declared PSD matrix variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsdBlock {
    pub name: String,
    pub size: usize,
    pub first_var: VarId,
}

impl PsdBlock {
    /// Variable holding entry (i, j) (and (j, i)).
    pub fn entry(&self, i: usize, j: usize) -> VarId {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        assert!(j < self.size, "block entry out of range");
        // row-major upper triangle; row i starts after sum_{k<i} (size - k) entries
        self.first_var + i * self.size - i * i.saturating_sub(1) / 2 + (j - i)
    }

    pub fn var_count(&self) -> usize {
        self.size * (self.size + 1) / 2
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FreeVar {
    pub name: String,
    pub id: VarId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedLmi {
    pub name: String,
    pub matrix: AffineMatrix,
}

/// A semidefinite program over PSD blocks and free scalars.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdpProblem {
    pub psd_blocks: Vec<PsdBlock>,
    pub free_vars: Vec<FreeVar>,
    pub sense: Sense,
    pub objective: LinExpr,
    pub constraints: Vec<LinearConstraint>,
    pub lmi_constraints: Vec<NamedLmi>,
    pub n_vars: usize,
}

impl Default for SdpProblem {
    fn default() -> Self {
        Self::new()
    }
}

impl SdpProblem {
    pub fn new() -> Self {
        Self {
            psd_blocks: Vec::new(),
            free_vars: Vec::new(),
            sense: Sense::Maximize,
            objective: LinExpr::new(),
            constraints: Vec::new(),
            lmi_constraints: Vec::new(),
            n_vars: 0,
        }
    }

    pub fn add_psd_block(&mut self, name: impl Into<String>, size: usize) -> PsdBlock {
        let block = PsdBlock { name: name.into(), size, first_var: self.n_vars };
        self.n_vars += block.var_count();
        self.psd_blocks.push(block.clone());
        block
    }

    pub fn add_free_var(&mut self, name: impl Into<String>) -> VarId {
        let id = self.n_vars;
        self.n_vars += 1;
        self.free_vars.push(FreeVar { name: name.into(), id });
        id
    }

    pub fn set_objective(&mut self, sense: Sense, expr: LinExpr) {
        self.sense = sense;
        self.objective = expr;
    }

    pub fn add_constraint(&mut self, expr: LinExpr, relation: Relation, rhs: f64) {
        self.constraints.push(LinearConstraint { expr, relation, rhs });
    }

    pub fn add_eq(&mut self, expr: LinExpr, rhs: f64) {
        self.add_constraint(expr, Relation::Eq, rhs);
    }

    pub fn add_ge(&mut self, expr: LinExpr, rhs: f64) {
        self.add_constraint(expr, Relation::Ge, rhs);
    }

    pub fn add_le(&mut self, expr: LinExpr, rhs: f64) {
        self.add_constraint(expr, Relation::Le, rhs);
    }

    pub fn add_lmi(&mut self, name: impl Into<String>, matrix: AffineMatrix) {
        self.lmi_constraints.push(NamedLmi { name: name.into(), matrix });
    }

    pub fn block(&self, name: &str) -> Option<&PsdBlock> {
        self.psd_blocks.iter().find(|b| b.name == name)
    }

    /// Checks that every expression references declared variables only.
    pub fn validate(&self) -> Result<()> {
        let check = |e: &LinExpr, what: &str| -> Result<()> {
            if let Some(v) = e.max_var() {
                if v >= self.n_vars {
                    return Err(Error::MalformedProblem(format!(
                        "{what} references variable {v} but only {} exist",
                        self.n_vars
                    )));
                }
            }
            if e.terms.iter().any(|&(_, c)| !c.is_finite()) || !e.constant.is_finite() {
                return Err(Error::MalformedProblem(format!("{what} has non-finite data")));
            }
            Ok(())
        };
        check(&self.objective, "objective")?;
        for (k, c) in self.constraints.iter().enumerate() {
            check(&c.expr, &format!("constraint {k}"))?;
            if !c.rhs.is_finite() {
                return Err(Error::MalformedProblem(format!("constraint {k} has non-finite rhs")));
            }
        }
        for l in &self.lmi_constraints {
            for (&(i, j), e) in &l.matrix.entries {
                if i >= l.matrix.size || j >= l.matrix.size {
                    return Err(Error::MalformedProblem(format!(
                        "LMI {} entry ({i},{j}) outside size {}",
                        l.name, l.matrix.size
                    )));
                }
                check(e, &format!("LMI {}", l.name))?;
            }
        }
        Ok(())
    }

    /// JSON dump for cross-checking against external solvers.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("problem serializes")
    }
}
