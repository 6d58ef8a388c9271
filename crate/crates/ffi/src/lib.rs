//! C ABI over the kklab library.
//!
//! Every function returns a [`KkStatus`]; on failure the message is kept in
//! a thread-local slot readable with [`kk_last_error_message`]. Grids and
//! operators are opaque heap handles released with their `_free` function.
//! Panics never cross the boundary; they surface as `KK_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use kklab::deficiency::{deficiency_indices, ContinuumOp, DeficiencyOptions};
use kklab::expr::{parse_fn, parse_operator};
use kklab::finmod::check_lemma_battery;
use kklab::funcspace::Grid;
use kklab::operators::{even_dirac, first_order, schrodinger, Stencil, SymOp};
use kklab::scenario::{load_scenario, run_scenario, write_outputs, OutputPaths};
use kklab::spectrum::eigenvalues;
use kklab::Error;

/// Result code of every exported function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KkStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Parse = 3,
    Numerical = 4,
    Precondition = 5,
    Inconclusive = 6,
    BufferTooSmall = 7,
    Io = 8,
    Panic = 9,
}

/// Opaque uniform grid.
pub struct KkGrid(Grid);

/// Opaque discretized symmetric operator.
pub struct KkSymOp(SymOp);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn status_of(e: &Error) -> KkStatus {
    match e {
        Error::Parse { .. } | Error::Config { .. } => KkStatus::Parse,
        Error::InvalidGrid(_)
        | Error::GridMismatch(_)
        | Error::OutOfRange(_)
        | Error::InvalidArgument(_)
        | Error::DimensionMismatch { .. } => KkStatus::InvalidArgument,
        Error::Precondition(_) | Error::SelectionExhausted(_) | Error::BatteryFailure(_) => KkStatus::Precondition,
        Error::Inconclusive(_) => KkStatus::Inconclusive,
        Error::Io(_) | Error::Json(_) => KkStatus::Io,
        _ => KkStatus::Numerical,
    }
}

/// Runs `f`, converting errors and panics into a status.
fn guard(f: impl FnOnce() -> Result<(), (KkStatus, String)>) -> KkStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            KkStatus::Ok
        }
        Ok(Err((s, m))) => {
            set_error(m);
            s
        }
        Err(p) => {
            let m = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            set_error(format!("panic: {m}"));
            KkStatus::Panic
        }
    }
}

fn lib<T>(r: kklab::Result<T>) -> Result<T, (KkStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (KkStatus, String) {
    (KkStatus::NullPointer, format!("{what} is null"))
}

/// # Safety
/// `s` must be null or a NUL-terminated string.
unsafe fn text<'a>(s: *const c_char, what: &str) -> Result<&'a str, (KkStatus, String)> {
    if s.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| (KkStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `cap`) and returns the full length without the terminator.
///
/// # Safety
/// `buf` must be null or valid for `cap` bytes.
#[no_mangle]
pub unsafe extern "C" fn kk_last_error_message(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        if !buf.is_null() && cap > 0 {
            let n = e.len().min(cap - 1);
            std::ptr::copy_nonoverlapping(e.as_ptr(), buf as *mut u8, n);
            *buf.add(n) = 0;
        }
        e.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn kk_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Grid on `[-half_width, half_width]` with an odd number of points.
///
/// # Safety
/// `out` must be null or valid for a write.
#[no_mangle]
pub unsafe extern "C" fn kk_grid_new(half_width: f64, n_points: usize, out: *mut *mut KkGrid) -> KkStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let g = lib(Grid::new(half_width, n_points))?;
        *out = Box::into_raw(Box::new(KkGrid(g)));
        Ok(())
    })
}

/// # Safety
/// `grid` must be null or a handle from [`kk_grid_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn kk_grid_free(grid: *mut KkGrid) {
    if !grid.is_null() {
        drop(Box::from_raw(grid));
    }
}

/// Number of grid points, 0 for a null handle.
///
/// # Safety
/// `grid` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn kk_grid_n_points(grid: *const KkGrid) -> usize {
    grid.as_ref().map_or(0, |g| g.0.n_points())
}

/// Grid spacing, NaN for a null handle.
///
/// # Safety
/// `grid` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn kk_grid_spacing(grid: *const KkGrid) -> f64 {
    grid.as_ref().map_or(f64::NAN, |g| g.0.spacing())
}

/// Which discretization [`kk_op_new`] builds.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KkOpKind {
    /// `i d/dx + f`.
    FirstOrder = 0,
    /// `-d²/dx² + V`.
    Schrodinger = 1,
    /// Doubled `[[0, -d* + f], [d + f, 0]]` with forward differences.
    EvenDirac = 2,
}

/// Discretizes an operator with potential expression `potential` on `grid`.
///
/// # Safety
/// `grid` must be a live handle, `potential` a NUL-terminated string and
/// `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn kk_op_new(
    grid: *const KkGrid,
    kind: KkOpKind,
    potential: *const c_char,
    out: *mut *mut KkSymOp,
) -> KkStatus {
    guard(|| {
        let g = grid.as_ref().ok_or_else(|| null("grid"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let f = lib(parse_fn(text(potential, "potential")?))?;
        let op = match kind {
            KkOpKind::FirstOrder => first_order(&g.0, &f),
            KkOpKind::Schrodinger => schrodinger(&g.0, &f),
            KkOpKind::EvenDirac => even_dirac(&g.0, &f, Stencil::Forward),
        };
        *out = Box::into_raw(Box::new(KkSymOp(lib(op)?)));
        Ok(())
    })
}

/// # Safety
/// `op` must be null or a handle from [`kk_op_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn kk_op_free(op: *mut KkSymOp) {
    if !op.is_null() {
        drop(Box::from_raw(op));
    }
}

/// Matrix dimension, 0 for a null handle.
///
/// # Safety
/// `op` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn kk_op_dim(op: *const KkSymOp) -> usize {
    op.as_ref().map_or(0, |o| o.0.dim())
}

/// All eigenvalues, ascending. `len` receives the count; when `cap` is too
/// small nothing is written to `values` and `KK_STATUS_BUFFER_TOO_SMALL`
/// is returned.
///
/// # Safety
/// `op` must be a live handle, `values` valid for `cap` doubles and `len`
/// valid for a write.
#[no_mangle]
pub unsafe extern "C" fn kk_op_eigenvalues(
    op: *const KkSymOp,
    values: *mut f64,
    cap: usize,
    len: *mut usize,
) -> KkStatus {
    guard(|| {
        let o = op.as_ref().ok_or_else(|| null("op"))?;
        if len.is_null() {
            return Err(null("len"));
        }
        let w = lib(eigenvalues(&o.0))?;
        *len = w.len();
        if cap < w.len() || values.is_null() {
            return Err((KkStatus::BufferTooSmall, format!("need {} values, have {cap}", w.len())));
        }
        std::ptr::copy_nonoverlapping(w.as_ptr(), values, w.len());
        Ok(())
    })
}

/// Deficiency indices of an operator string such as `"i_d_dx + x"` on
/// `(a, b)`; infinite endpoints are passed as `±INFINITY`.
///
/// # Safety
/// `op_expr` must be a NUL-terminated string; `n_plus` and `n_minus` valid
/// for writes.
#[no_mangle]
pub unsafe extern "C" fn kk_deficiency_indices(
    op_expr: *const c_char,
    a: f64,
    b: f64,
    n_plus: *mut usize,
    n_minus: *mut usize,
) -> KkStatus {
    guard(|| {
        if n_plus.is_null() || n_minus.is_null() {
            return Err(null("output index"));
        }
        let e = lib(parse_operator(text(op_expr, "op_expr")?))?;
        let op = lib(ContinuumOp::from_expr(&e, a, b))?;
        let r = lib(deficiency_indices(&op, &DeficiencyOptions::default()))?;
        *n_plus = r.n_plus;
        *n_minus = r.n_minus;
        Ok(())
    })
}

/// Runs the finite-module identity battery; `passed` receives the verdict.
///
/// # Safety
/// `passed` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn kk_finmod_battery(seed: u64, passed: *mut bool) -> KkStatus {
    guard(|| {
        if passed.is_null() {
            return Err(null("passed"));
        }
        let r = lib(check_lemma_battery(seed))?;
        *passed = r.verdict;
        Ok(())
    })
}

/// Runs a scenario file, writes report.json, spectra.csv and plots.svg into
/// `out_dir` (or the configured directory when null), and stores the
/// overall verdict in `passed`.
///
/// # Safety
/// `config_path` must be a NUL-terminated string, `out_dir` null or a
/// NUL-terminated string, and `passed` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn kk_run_scenario(config_path: *const c_char, out_dir: *const c_char, passed: *mut bool) -> KkStatus {
    guard(|| {
        if passed.is_null() {
            return Err(null("passed"));
        }
        let s = lib(load_scenario(Path::new(text(config_path, "config_path")?)))?;
        let dir = if out_dir.is_null() {
            s.output_dir.clone()
        } else {
            Path::new(text(out_dir, "out_dir")?).to_path_buf()
        };
        let out = lib(run_scenario(&s))?;
        lib(write_outputs(&out, &OutputPaths::in_dir(&dir)))?;
        *passed = out.report.verdict;
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn status_mapping() {
        assert_eq!(status_of(&Error::Parse { column: 1, message: String::new() }), KkStatus::Parse);
        assert_eq!(status_of(&Error::InvalidGrid(String::new())), KkStatus::InvalidArgument);
        assert_eq!(status_of(&Error::Inconclusive(String::new())), KkStatus::Inconclusive);
        assert_eq!(status_of(&Error::NoConvergence { iterations: 1, residual: 1.0 }), KkStatus::Numerical);
    }

    #[test]
    fn panics_are_contained() {
        let s = guard(|| panic!("boom"));
        assert_eq!(s, KkStatus::Panic);
        let mut buf = [0 as c_char; 64];
        let n = unsafe { kk_last_error_message(buf.as_mut_ptr(), buf.len()) };
        let msg = unsafe { CStr::from_ptr(buf.as_ptr()) }.to_str().unwrap();
        assert_eq!(msg, "panic: boom");
        assert_eq!(n, msg.len());
    }
}
