//! Low-rank factorization of PSD relaxation matrices.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Upper bound reported for the eigenvalue ratio of (numerically) exact
/// low-rank matrices.
pub const EIG_RATIO_CAP: f64 = 1e16;

const NEG_EIG_TOL: f64 = 1e-8;

/// `factor` holds `sqrt(lambda_k) * u_k` in its columns, largest first.
#[derive(Debug, Clone, PartialEq)]
pub struct LowRankFactor<T: nalgebra::Scalar> {
    pub factor: DMatrix<T>,
    /// lambda_k / lambda_{k+1}, capped at [`EIG_RATIO_CAP`].
    pub eig_ratio: f64,
    /// All eigenvalues, descending.
    pub eigenvalues: Vec<f64>,
}

fn sorted_order(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    idx
}

fn check_spectrum(sorted: &[f64], k: usize) -> Result<f64> {
    let m = sorted.len();
    if k == 0 || k >= m {
        return Err(Error::InvalidInput(format!("rank {k} must be in 1..{m}")));
    }
    let top = sorted[0].max(0.0);
    let min = sorted[m - 1];
    if min < -NEG_EIG_TOL * top.max(f64::MIN_POSITIVE) && min < -1e-14 {
        return Err(Error::NotPsd(min));
    }
    let lk = sorted[k - 1];
    let next = sorted[k];
    let ratio = if lk <= 0.0 {
        1.0
    } else if next <= lk / EIG_RATIO_CAP {
        EIG_RATIO_CAP
    } else {
        lk / next
    };
    Ok(ratio.max(1.0))
}

/// Top-`k` factor of a real symmetric PSD matrix.
pub fn top_k_factor(sym: &DMatrix<f64>, k: usize) -> Result<LowRankFactor<f64>> {
    let eig = SymmetricEigen::new(sym.clone());
    let vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    let order = sorted_order(&vals);
    let sorted: Vec<f64> = order.iter().map(|&i| vals[i]).collect();
    let eig_ratio = check_spectrum(&sorted, k)?;
    let m = sym.nrows();
    let mut factor = DMatrix::zeros(m, k);
    for (col, &i) in order.iter().take(k).enumerate() {
        let s = vals[i].max(0.0).sqrt();
        factor.set_column(col, &(eig.eigenvectors.column(i) * s));
    }
    Ok(LowRankFactor { factor, eig_ratio, eigenvalues: sorted })
}

/// Top-`k` factor of a complex Hermitian PSD matrix.
pub fn top_k_factor_hermitian(h: &DMatrix<Complex64>, k: usize) -> Result<LowRankFactor<Complex64>> {
    let eig = SymmetricEigen::new(h.clone());
    let vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    let order = sorted_order(&vals);
    let sorted: Vec<f64> = order.iter().map(|&i| vals[i]).collect();
    let eig_ratio = check_spectrum(&sorted, k)?;
    let m = h.nrows();
    let mut factor = DMatrix::zeros(m, k);
    for (col, &i) in order.iter().take(k).enumerate() {
        let s = Complex64::new(vals[i].max(0.0).sqrt(), 0.0);
        factor.set_column(col, &(eig.eigenvectors.column(i) * s));
    }
    Ok(LowRankFactor { factor, eig_ratio, eigenvalues: sorted })
}
