//! C interface to the localization library.
//!
//! Problems and results are opaque handles owned by the caller and released
//! with the matching `_free` function. Every fallible call returns an
//! [`RlStatus`]; the message of the most recent failure on the calling
//! thread is available through [`rl_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use nalgebra::DMatrix;
use rangeloc::core::{AnchorSet, LocalizationResult, RangeVector};
use rangeloc::experiment::{localize, Algorithm, AlgorithmSettings};
use rangeloc::sdp::SolveStatus;
use rangeloc::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RlStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    DimensionMismatch = 3,
    /// The solver ran but could not produce a usable estimate.
    SolverFailure = 4,
    BufferTooSmall = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RlAlgorithm {
    Slcp = 0,
    Slnn = 1,
    Sll1Ad = 2,
    Sll1Md = 3,
    Sll1Sd = 4,
    Srls = 5,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RlSolveStatus {
    Optimal = 0,
    Inaccurate = 1,
    Failed = 2,
}

/// Anchors and measured ranges of one instance.
pub struct RlProblem {
    anchors: AnchorSet,
    ranges: RangeVector,
}

pub struct RlResult {
    inner: LocalizationResult,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let s = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(s).ok());
}

fn status_of(e: &Error) -> RlStatus {
    match e {
        Error::DimensionMismatch(_) | Error::LengthMismatch { .. } => RlStatus::DimensionMismatch,
        Error::InvalidInput(_) | Error::Parse { .. } | Error::NonPositiveRange { .. } => RlStatus::InvalidInput,
        _ => RlStatus::SolverFailure,
    }
}

fn guard(f: impl FnOnce() -> Result<(), RlStatus>) -> RlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => RlStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic");
            RlStatus::Panic
        }
    }
}

fn fail(e: Error) -> RlStatus {
    let s = status_of(&e);
    set_error(e.to_string());
    s
}

impl From<RlAlgorithm> for Algorithm {
    fn from(a: RlAlgorithm) -> Self {
        match a {
            RlAlgorithm::Slcp => Algorithm::Slcp,
            RlAlgorithm::Slnn => Algorithm::Slnn,
            RlAlgorithm::Sll1Ad => Algorithm::Sll1Ad,
            RlAlgorithm::Sll1Md => Algorithm::Sll1Md,
            RlAlgorithm::Sll1Sd => Algorithm::Sll1Sd,
            RlAlgorithm::Srls => Algorithm::Srls,
        }
    }
}

/// Copies `m` anchors of dimension `n` (row-major, `m * n` values) and `m`
/// ranges into a new problem handle stored in `*out`.
///
/// # Safety
/// `anchors` must point to `m * n` readable doubles, `ranges` to `m`, and
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rl_problem_new(
    anchors: *const f64,
    m: usize,
    n: usize,
    ranges: *const f64,
    out: *mut *mut RlProblem,
) -> RlStatus {
    guard(|| {
        if anchors.is_null() || ranges.is_null() || out.is_null() {
            set_error("null pointer argument");
            return Err(RlStatus::NullPointer);
        }
        *out = ptr::null_mut();
        let len = m.checked_mul(n).ok_or_else(|| fail(Error::InvalidInput("size overflow".into())))?;
        let a = std::slice::from_raw_parts(anchors, len);
        let r = std::slice::from_raw_parts(ranges, m);
        let anchors = AnchorSet::new(DMatrix::from_row_slice(m, n, a)).map_err(fail)?;
        let ranges = RangeVector::from_slice(r).map_err(fail)?;
        *out = Box::into_raw(Box::new(RlProblem { anchors, ranges }));
        Ok(())
    })
}

/// # Safety
/// `problem` must be null or a handle from [`rl_problem_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rl_problem_free(problem: *mut RlProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// Solves `problem` with `algorithm` using default settings and stores a new
/// result handle in `*out`.
///
/// # Safety
/// `problem` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rl_localize(
    problem: *const RlProblem,
    algorithm: RlAlgorithm,
    out: *mut *mut RlResult,
) -> RlStatus {
    guard(|| {
        if problem.is_null() || out.is_null() {
            set_error("null pointer argument");
            return Err(RlStatus::NullPointer);
        }
        *out = ptr::null_mut();
        let p = &*problem;
        let res = localize(algorithm.into(), &p.anchors, &p.ranges, &AlgorithmSettings::default()).map_err(fail)?;
        if res.solver_status == SolveStatus::Failed {
            set_error("solver did not converge");
            return Err(RlStatus::SolverFailure);
        }
        *out = Box::into_raw(Box::new(RlResult { inner: res }));
        Ok(())
    })
}

/// # Safety
/// `result` must be null or a handle from [`rl_localize`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rl_result_free(result: *mut RlResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

/// Dimension of the estimated position; 0 for a null handle.
///
/// # Safety
/// `result` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rl_result_dim(result: *const RlResult) -> usize {
    result.as_ref().map_or(0, |r| r.inner.position.len())
}

/// Copies the position into `buf`, which holds `len` doubles.
///
/// # Safety
/// `result` must be a live handle and `buf` must hold `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn rl_result_position(result: *const RlResult, buf: *mut f64, len: usize) -> RlStatus {
    guard(|| {
        let (Some(r), false) = (result.as_ref(), buf.is_null()) else {
            set_error("null pointer argument");
            return Err(RlStatus::NullPointer);
        };
        let x = &r.inner.position;
        if len < x.len() {
            set_error(format!("buffer holds {len} values, need {}", x.len()));
            return Err(RlStatus::BufferTooSmall);
        }
        std::slice::from_raw_parts_mut(buf, x.len()).copy_from_slice(x.as_slice());
        Ok(())
    })
}

/// Dominant-eigenvalue ratio of the relaxed solution; NaN for a null handle.
///
/// # Safety
/// `result` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rl_result_eig_ratio(result: *const RlResult) -> f64 {
    result.as_ref().map_or(f64::NAN, |r| r.inner.eig_ratio)
}

/// # Safety
/// `result` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rl_result_objective(result: *const RlResult) -> f64 {
    result.as_ref().map_or(f64::NAN, |r| r.inner.objective)
}

/// # Safety
/// `result` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rl_result_iterations(result: *const RlResult) -> usize {
    result.as_ref().map_or(0, |r| r.inner.iterations)
}

/// # Safety
/// `result` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rl_result_status(result: *const RlResult) -> RlSolveStatus {
    match result.as_ref().map(|r| r.inner.solver_status) {
        Some(SolveStatus::Optimal) => RlSolveStatus::Optimal,
        Some(SolveStatus::Inaccurate) => RlSolveStatus::Inaccurate,
        _ => RlSolveStatus::Failed,
    }
}

/// Message of the last failure on this thread, or null if none. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn rl_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn rl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_mapping() {
        assert_eq!(status_of(&Error::DimensionMismatch("x".into())), RlStatus::DimensionMismatch);
        assert_eq!(status_of(&Error::LengthMismatch { left: 1, right: 2 }), RlStatus::DimensionMismatch);
        assert_eq!(status_of(&Error::InvalidInput("x".into())), RlStatus::InvalidInput);
        assert_eq!(status_of(&Error::Infeasible), RlStatus::SolverFailure);
    }

    #[test]
    fn algorithm_mapping_is_total() {
        let all = [
            RlAlgorithm::Slcp,
            RlAlgorithm::Slnn,
            RlAlgorithm::Sll1Ad,
            RlAlgorithm::Sll1Md,
            RlAlgorithm::Sll1Sd,
            RlAlgorithm::Srls,
        ];
        for (a, b) in all.into_iter().zip(Algorithm::ALL) {
            assert_eq!(Algorithm::from(a), b);
        }
    }
}
