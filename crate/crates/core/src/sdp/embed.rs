//! Real embedding of complex Hermitian matrices.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

const HERMITIAN_TOL: f64 = 1e-12;

/// `[[Re H, -Im H], [Im H, Re H]]`.
pub fn hermitian_embed(h: &DMatrix<Complex64>) -> Result<DMatrix<f64>> {
    let m = h.nrows();
    if h.ncols() != m {
        return Err(Error::DimensionMismatch(format!(
            "expected a square matrix, got {}x{}",
            m,
            h.ncols()
        )));
    }
    let scale = h.iter().fold(1.0f64, |s, z| s.max(z.norm()));
    let mut dev = 0.0f64;
    for i in 0..m {
        for j in 0..m {
            dev = dev.max((h[(i, j)] - h[(j, i)].conj()).norm());
        }
    }
    if dev > HERMITIAN_TOL * scale {
        return Err(Error::NotHermitian(dev));
    }
    let mut s = DMatrix::zeros(2 * m, 2 * m);
    for i in 0..m {
        for j in 0..m {
            // average with the mirrored entry so the output is exactly symmetric
            let z = 0.5 * (h[(i, j)] + h[(j, i)].conj());
            s[(i, j)] = z.re;
            s[(m + i, m + j)] = z.re;
            s[(i, m + j)] = -z.im;
            s[(m + i, j)] = z.im;
        }
    }
    Ok(s)
}

/// Inverse of [`hermitian_embed`], averaging the redundant copies.
pub fn complex_from_embedding(s: &DMatrix<f64>) -> DMatrix<Complex64> {
    let m = s.nrows() / 2;
    assert_eq!(s.nrows(), 2 * m, "embedding must have even size");
    assert_eq!(s.ncols(), s.nrows(), "embedding must be square");
    DMatrix::from_fn(m, m, |i, j| {
        let re = 0.5 * (s[(i, j)] + s[(m + i, m + j)]);
        let im = 0.5 * (s[(m + i, j)] - s[(i, m + j)]);
        Complex64::new(re, im)
    })
}
