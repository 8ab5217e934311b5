//! C interface to the `otrank` library.
//!
//! Objects are handed out as opaque pointers and released with the matching
//! `*_free` function. Every fallible call returns an [`OtrStatus`]; on failure
//! a message is available from [`otr_last_error`] on the same thread.
//!
//! Samples are passed as row-major `double` arrays of `n * dim` values.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use otrank::engine::RankTest;
use otrank::engine::{hotelling_test, TestResult};
use otrank::{build_grid, empirical_map, Dataset, Error, Factorization, Grid, ReferenceKind, ScoreKind};

/// Status code returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OtrStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Unsupported = 3,
    Parse = 4,
    Io = 5,
    Internal = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OtrReference {
    CubicUniform = 0,
    GaussianCubic = 1,
    SphericalUniform = 2,
    GaussianSpherical = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OtrScore {
    Wilcoxon = 0,
    VdwSpherical = 1,
    VdwMarginal = 2,
}

/// Outcome of a two-sample test. `reject` is 0 or 1.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct OtrTestResult {
    pub statistic: f64,
    pub critical_value: f64,
    pub p_value: f64,
    pub reject: i32,
}

/// Reference grid handle.
pub struct OtrGrid(Grid);

/// Calibrated rank test handle: a grid, a score and a critical value table.
pub struct OtrRankTest(RankTest);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let msg = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

struct Failure(OtrStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::InvalidArgument(_) => OtrStatus::InvalidArgument,
            Error::Unsupported(_) => OtrStatus::Unsupported,
            Error::Parse(_) | Error::Json(_) => OtrStatus::Parse,
            Error::Io(_) => OtrStatus::Io,
            Error::Internal(_) => OtrStatus::Internal,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(OtrStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> OtrStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => OtrStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            OtrStatus::Panic
        }
    }
}

unsafe fn out_ref<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    unsafe { p.as_mut() }.ok_or_else(|| null(what))
}

unsafe fn dataset(data: *const f64, n: usize, dim: usize, what: &str) -> Result<Dataset, Failure> {
    if data.is_null() {
        return Err(null(what));
    }
    let len = n.checked_mul(dim).ok_or_else(|| Failure(OtrStatus::InvalidArgument, format!("{what}: size overflow")))?;
    let values = unsafe { std::slice::from_raw_parts(data, len) }.to_vec();
    Ok(Dataset::new(dim, values)?)
}

impl From<OtrReference> for ReferenceKind {
    fn from(r: OtrReference) -> Self {
        match r {
            OtrReference::CubicUniform => ReferenceKind::CubicUniform,
            OtrReference::GaussianCubic => ReferenceKind::GaussianCubic,
            OtrReference::SphericalUniform => ReferenceKind::SphericalUniform,
            OtrReference::GaussianSpherical => ReferenceKind::GaussianSpherical,
        }
    }
}

impl From<OtrScore> for ScoreKind {
    fn from(s: OtrScore) -> Self {
        match s {
            OtrScore::Wilcoxon => ScoreKind::Wilcoxon,
            OtrScore::VdwSpherical => ScoreKind::VdwSpherical,
            OtrScore::VdwMarginal => ScoreKind::VdwMarginal,
        }
    }
}

impl From<TestResult> for OtrTestResult {
    fn from(r: TestResult) -> Self {
        OtrTestResult {
            statistic: r.statistic,
            critical_value: r.critical_value,
            p_value: r.p_value,
            reject: r.reject as i32,
        }
    }
}

/// Message describing the last failure on this thread, or null if none.
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn otr_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Frees a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn otr_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(unsafe { CString::from_raw(s) });
    }
}

/// Builds a reference grid of `n` points in dimension `dim`. For spherical
/// references `n_r` fixes the number of shells; pass 0 to search for the
/// optimal factorization.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn otr_grid_build(
    dim: usize,
    n: usize,
    reference: OtrReference,
    n_r: usize,
    out: *mut *mut OtrGrid,
) -> OtrStatus {
    guard(|| {
        let out = unsafe { out_ref(out, "out") }?;
        let fact = if n_r == 0 {
            None
        } else {
            Some(Factorization::with_shells(n, n_r).ok_or_else(|| {
                Failure(OtrStatus::InvalidArgument, format!("no admissible factorization of {n} with {n_r} shells"))
            })?)
        };
        let grid = build_grid(dim, n, reference.into(), fact)?;
        *out = Box::into_raw(Box::new(OtrGrid(grid)));
        Ok(())
    })
}

/// Reads a grid from its JSON form.
///
/// # Safety
/// `json` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn otr_grid_from_json(json: *const c_char, out: *mut *mut OtrGrid) -> OtrStatus {
    guard(|| {
        let out = unsafe { out_ref(out, "out") }?;
        if json.is_null() {
            return Err(null("json"));
        }
        let text = unsafe { CStr::from_ptr(json) }
            .to_str()
            .map_err(|e| Failure(OtrStatus::Parse, format!("json is not UTF-8: {e}")))?;
        *out = Box::into_raw(Box::new(OtrGrid(Grid::from_json(text)?)));
        Ok(())
    })
}

/// Serializes a grid to JSON. Release the string with `otr_string_free`.
///
/// # Safety
/// `grid` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn otr_grid_to_json(grid: *const OtrGrid, out: *mut *mut c_char) -> OtrStatus {
    guard(|| {
        let out = unsafe { out_ref(out, "out") }?;
        let grid = unsafe { grid.as_ref() }.ok_or_else(|| null("grid"))?;
        let json = grid.0.to_json()?;
        *out = CString::new(json).map_err(|e| Failure(OtrStatus::Internal, e.to_string()))?.into_raw();
        Ok(())
    })
}

/// Dimension of the grid, or 0 for a null handle.
///
/// # Safety
/// `grid` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn otr_grid_dim(grid: *const OtrGrid) -> usize {
    unsafe { grid.as_ref() }.map_or(0, |g| g.0.dim())
}

/// Number of grid points, or 0 for a null handle.
///
/// # Safety
/// `grid` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn otr_grid_len(grid: *const OtrGrid) -> usize {
    unsafe { grid.as_ref() }.map_or(0, |g| g.0.len())
}

/// Copies the grid points, row-major, into `out` which holds `capacity`
/// doubles. Fails unless `capacity >= len * dim`.
///
/// # Safety
/// `grid` must be a live handle and `out` must hold `capacity` doubles.
#[no_mangle]
pub unsafe extern "C" fn otr_grid_points(grid: *const OtrGrid, out: *mut f64, capacity: usize) -> OtrStatus {
    guard(|| {
        let grid = unsafe { grid.as_ref() }.ok_or_else(|| null("grid"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let pts = grid.0.flat_points();
        if capacity < pts.len() {
            return Err(Failure(
                OtrStatus::InvalidArgument,
                format!("buffer holds {capacity} values, grid needs {}", pts.len()),
            ));
        }
        unsafe { ptr::copy_nonoverlapping(pts.as_ptr(), out, pts.len()) };
        Ok(())
    })
}

/// Releases a grid. Null is ignored.
///
/// # Safety
/// `grid` must be null or a live handle, not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn otr_grid_free(grid: *mut OtrGrid) {
    if !grid.is_null() {
        drop(unsafe { Box::from_raw(grid) });
    }
}

/// Optimal assignment of `n` observations to the `n` grid points:
/// observation `i` goes to grid point `perm[i]`.
///
/// # Safety
/// `data` must hold `n * dim` doubles with `dim` the grid dimension, and
/// `perm` must hold `n` entries.
#[no_mangle]
pub unsafe extern "C" fn otr_assignment(
    grid: *const OtrGrid,
    data: *const f64,
    n: usize,
    perm: *mut usize,
) -> OtrStatus {
    guard(|| {
        let grid = unsafe { grid.as_ref() }.ok_or_else(|| null("grid"))?;
        if perm.is_null() {
            return Err(null("perm"));
        }
        let data = unsafe { dataset(data, n, grid.0.dim(), "data") }?;
        let map = empirical_map(&data, &grid.0)?;
        let out = unsafe { std::slice::from_raw_parts_mut(perm, n) };
        out.copy_from_slice(&map.assignment().perm);
        Ok(())
    })
}

/// Calibrates a rank test on a copy of `grid` for first-sample size `n1`:
/// the level-`alpha` critical value is estimated from `reps` random splits
/// drawn from `seed`.
///
/// # Safety
/// `grid` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn otr_rank_test_new(
    grid: *const OtrGrid,
    score: OtrScore,
    n1: usize,
    alpha: f64,
    reps: usize,
    seed: u64,
    out: *mut *mut OtrRankTest,
) -> OtrStatus {
    guard(|| {
        let out = unsafe { out_ref(out, "out") }?;
        let grid = unsafe { grid.as_ref() }.ok_or_else(|| null("grid"))?;
        let test = RankTest::new(grid.0.clone(), score.into(), n1, alpha, reps, seed)?;
        *out = Box::into_raw(Box::new(OtrRankTest(test)));
        Ok(())
    })
}

/// Critical value of a calibrated test, or NaN for a null handle.
///
/// # Safety
/// `test` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn otr_rank_test_critical_value(test: *const OtrRankTest) -> f64 {
    unsafe { test.as_ref() }.map_or(f64::NAN, |t| t.0.table().critical_value)
}

/// Runs a calibrated test on two samples whose sizes match the calibration.
///
/// # Safety
/// `data1` and `data2` must hold `n1 * dim` and `n2 * dim` doubles, with
/// `dim` the grid dimension, and `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn otr_rank_test_run(
    test: *const OtrRankTest,
    data1: *const f64,
    n1: usize,
    data2: *const f64,
    n2: usize,
    out: *mut OtrTestResult,
) -> OtrStatus {
    guard(|| {
        let out = unsafe { out_ref(out, "out") }?;
        let test = unsafe { test.as_ref() }.ok_or_else(|| null("test"))?;
        let dim = test.0.grid().dim();
        let d1 = unsafe { dataset(data1, n1, dim, "data1") }?;
        let d2 = unsafe { dataset(data2, n2, dim, "data2") }?;
        *out = test.0.run(&d1, &d2)?.into();
        Ok(())
    })
}

/// Releases a rank test. Null is ignored.
///
/// # Safety
/// `test` must be null or a live handle, not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn otr_rank_test_free(test: *mut OtrRankTest) {
    if !test.is_null() {
        drop(unsafe { Box::from_raw(test) });
    }
}

/// Two-sample Hotelling T² test with its asymptotic χ² calibration.
///
/// # Safety
/// `data1` and `data2` must hold `n1 * dim` and `n2 * dim` doubles and
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn otr_hotelling_test(
    data1: *const f64,
    n1: usize,
    data2: *const f64,
    n2: usize,
    dim: usize,
    alpha: f64,
    out: *mut OtrTestResult,
) -> OtrStatus {
    guard(|| {
        let out = unsafe { out_ref(out, "out") }?;
        let d1 = unsafe { dataset(data1, n1, dim, "data1") }?;
        let d2 = unsafe { dataset(data2, n2, dim, "data2") }?;
        *out = hotelling_test(&d1, &d2, alpha)?.into();
        Ok(())
    })
}

/// Standard normal quantile.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn otr_inv_cdf_normal(p: f64, out: *mut f64) -> OtrStatus {
    guard(|| {
        let out = unsafe { out_ref(out, "out") }?;
        *out = otrank::inv_cdf_normal(p)?;
        Ok(())
    })
}

/// Quantile of the χ² law with `df` degrees of freedom.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn otr_inv_cdf_chisq(p: f64, df: usize, out: *mut f64) -> OtrStatus {
    guard(|| {
        let out = unsafe { out_ref(out, "out") }?;
        *out = otrank::inv_cdf_chisq(p, df)?;
        Ok(())
    })
}
