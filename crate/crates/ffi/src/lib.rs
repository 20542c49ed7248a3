//! C interface to `peregrine-core`.
//!
//! Every function returns a [`PgStatus`]; on failure the message is available
//! from [`pg_last_error_message`] on the same thread. Objects are opaque
//! handles created by `pg_*_new` and released by the matching `pg_*_free`.
//! Field buffers are row-major (`x` fastest); vector fields store their
//! components one after another.

// Entry points are called from C with documented pointer contracts.
#![allow(clippy::not_unsafe_ptr_arg_deref)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use peregrine_core::bathymetry::{q_to_zeta, zeta_to_q, Bathymetry, Profile};
use peregrine_core::diagnostics::energy_bp;
use peregrine_core::operators::{OperatorHandle, OperatorKind};
use peregrine_core::scenarios::{run_scenario, ExperimentConfig, RunOptions};
use peregrine_core::spectral::{Field, Grid, VecField};
use peregrine_core::Error;

/// Result codes.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PgStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidGrid = 3,
    LengthMismatch = 4,
    DryState = 5,
    SolverFailure = 6,
    Config = 7,
    Io = 8,
    /// A scenario ran but at least one verdict failed.
    VerdictFailed = 9,
    Internal = 10,
    Panic = 11,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PgOperatorKind {
    /// `I + mu T_b`
    IPlusMuTb = 0,
    /// `h_b B`
    HbB = 1,
    /// `h_b A`
    HbA = 2,
}

impl From<PgOperatorKind> for OperatorKind {
    fn from(k: PgOperatorKind) -> Self {
        match k {
            PgOperatorKind::IPlusMuTb => OperatorKind::IPlusMuTb,
            PgOperatorKind::HbB => OperatorKind::HbB,
            PgOperatorKind::HbA => OperatorKind::HbA,
        }
    }
}

/// Opaque bathymetry on its grid.
pub struct PgBathymetry {
    inner: Bathymetry,
}

/// Opaque prefactorized elliptic operator.
pub struct PgOperator {
    inner: OperatorHandle,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(err: &Error) -> PgStatus {
    match err {
        Error::InvalidGrid(_) | Error::GridMismatch => PgStatus::InvalidGrid,
        Error::NonpositiveDepth { .. } | Error::DryState { .. } | Error::LogDomain { .. } => PgStatus::DryState,
        Error::SolverDivergence { .. } | Error::NotSpd => PgStatus::SolverFailure,
        Error::Config { .. } => PgStatus::Config,
        Error::Io { .. } => PgStatus::Io,
        Error::InvalidArgument(_) | Error::Cfl { .. } | Error::SizeLimit { .. } => PgStatus::InvalidArgument,
        _ => PgStatus::Internal,
    }
}

struct Failure(PgStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn fail(status: PgStatus, msg: impl Into<String>) -> Failure {
    Failure(status, msg.into())
}

/// Runs `f`, converting errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> PgStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            PgStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(&format!("internal panic: {msg}"));
            PgStatus::Panic
        }
    }
}

fn non_null<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    // SAFETY: the caller passes either null or a pointer obtained from this library.
    unsafe { p.as_ref() }.ok_or_else(|| fail(PgStatus::NullPointer, format!("{what} is null")))
}

fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if p.is_null() {
        return Err(fail(PgStatus::NullPointer, format!("{what} is null")));
    }
    // SAFETY: the caller guarantees `len` readable doubles at `p`.
    Ok(unsafe { std::slice::from_raw_parts(p, len) })
}

fn slice_mut<'a>(p: *mut f64, len: usize, what: &str) -> Result<&'a mut [f64], Failure> {
    if p.is_null() {
        return Err(fail(PgStatus::NullPointer, format!("{what} is null")));
    }
    // SAFETY: the caller guarantees `len` writable doubles at `p`.
    Ok(unsafe { std::slice::from_raw_parts_mut(p, len) })
}

fn expect_len(len: usize, expected: usize, what: &str) -> Result<(), Failure> {
    if len != expected {
        return Err(fail(
            PgStatus::LengthMismatch,
            format!("{what} has length {len}, expected {expected}"),
        ));
    }
    Ok(())
}

fn copy_out(src: &[f64], dst: *mut f64, len: usize) -> Result<(), Failure> {
    expect_len(len, src.len(), "output buffer")?;
    slice_mut(dst, len, "output buffer")?.copy_from_slice(src);
    Ok(())
}

fn square_grid(dim: usize, n: usize, length: f64, gamma: f64) -> Result<Grid, Failure> {
    Ok(Grid::new(dim, n, &vec![length; dim], gamma)?)
}

fn emit<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(fail(PgStatus::NullPointer, "output handle is null"));
    }
    // SAFETY: `out` is non-null and points to writable storage for one pointer.
    unsafe { *out = Box::into_raw(Box::new(value)) };
    Ok(())
}

/// Message of the last failure on this thread; empty after a success.
/// The pointer stays valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn pg_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Bottom `b = height * exp(-|x - c|^2 / width^2)` centered in a square domain of side `length`.
#[no_mangle]
pub extern "C" fn pg_bathymetry_new_gaussian(
    dim: usize,
    n: usize,
    length: f64,
    gamma: f64,
    beta: f64,
    width: f64,
    height: f64,
    out: *mut *mut PgBathymetry,
) -> PgStatus {
    guard(|| {
        let grid = square_grid(dim, n, length, gamma)?;
        let profile = Profile::GaussianBump {
            center: None,
            width,
            height,
        };
        emit(out, PgBathymetry {
            inner: Bathymetry::build(&profile, beta, &grid)?,
        })
    })
}

/// Bottom from `n^dim` samples of `b`.
#[no_mangle]
pub extern "C" fn pg_bathymetry_new_samples(
    dim: usize,
    n: usize,
    length: f64,
    gamma: f64,
    beta: f64,
    bottom: *const f64,
    len: usize,
    out: *mut *mut PgBathymetry,
) -> PgStatus {
    guard(|| {
        let grid = square_grid(dim, n, length, gamma)?;
        expect_len(len, grid.len(), "bottom")?;
        let b = Field::from_vec(&grid, slice(bottom, len, "bottom")?.to_vec())?;
        emit(out, PgBathymetry {
            inner: Bathymetry::from_samples(b, beta)?,
        })
    })
}

/// Number of grid points `n^dim`.
#[no_mangle]
pub extern "C" fn pg_bathymetry_points(bath: *const PgBathymetry, out: *mut usize) -> PgStatus {
    guard(|| {
        let bath = non_null(bath, "bathymetry")?;
        if out.is_null() {
            return Err(fail(PgStatus::NullPointer, "output is null"));
        }
        // SAFETY: non-null, and the caller owns the storage.
        unsafe { *out = bath.inner.grid().len() };
        Ok(())
    })
}

/// Minimum still-water depth `min h_b`.
#[no_mangle]
pub extern "C" fn pg_bathymetry_h_min(bath: *const PgBathymetry, out: *mut f64) -> PgStatus {
    guard(|| {
        let bath = non_null(bath, "bathymetry")?;
        copy_out(&[bath.inner.h_min()], out, 1)
    })
}

/// Depth field `h_b` into `out` (`n^dim` values).
#[no_mangle]
pub extern "C" fn pg_bathymetry_depth(bath: *const PgBathymetry, out: *mut f64, len: usize) -> PgStatus {
    guard(|| {
        let bath = non_null(bath, "bathymetry")?;
        copy_out(bath.inner.depth().values(), out, len)
    })
}

#[no_mangle]
pub extern "C" fn pg_bathymetry_free(bath: *mut PgBathymetry) {
    if !bath.is_null() {
        // SAFETY: created by `Box::into_raw` in this library and freed once.
        drop(unsafe { Box::from_raw(bath) });
    }
}

fn transform(
    bath: *const PgBathymetry,
    input: *const f64,
    len: usize,
    out: *mut f64,
    out_len: usize,
    f: impl FnOnce(&Field, &Bathymetry) -> Result<Field, Failure>,
) -> PgStatus {
    guard(|| {
        let bath = &non_null(bath, "bathymetry")?.inner;
        expect_len(len, bath.grid().len(), "input")?;
        let field = Field::from_vec(bath.grid(), slice(input, len, "input")?.to_vec())?;
        copy_out(f(&field, bath)?.values(), out, out_len)
    })
}

/// `q = (1/eps) ln(1 + eps zeta / h_b)`.
#[no_mangle]
pub extern "C" fn pg_zeta_to_q(
    bath: *const PgBathymetry,
    eps: f64,
    zeta: *const f64,
    len: usize,
    q: *mut f64,
    q_len: usize,
) -> PgStatus {
    transform(bath, zeta, len, q, q_len, |z, b| Ok(zeta_to_q(z, eps, b)?))
}

/// Inverse of [`pg_zeta_to_q`].
#[no_mangle]
pub extern "C" fn pg_q_to_zeta(
    bath: *const PgBathymetry,
    eps: f64,
    q: *const f64,
    len: usize,
    zeta: *mut f64,
    zeta_len: usize,
) -> PgStatus {
    transform(bath, q, len, zeta, zeta_len, |q, b| Ok(q_to_zeta(q, eps, b)))
}

/// `1/2 |zeta|^2 + 1/2 (h_b (I + mu T_b) V, V)`; `velocity` holds `dim * n^dim` values.
#[no_mangle]
pub extern "C" fn pg_energy_bp(
    bath: *const PgBathymetry,
    mu: f64,
    zeta: *const f64,
    zeta_len: usize,
    velocity: *const f64,
    velocity_len: usize,
    out: *mut f64,
) -> PgStatus {
    guard(|| {
        let bath = &non_null(bath, "bathymetry")?.inner;
        let grid = bath.grid();
        expect_len(zeta_len, grid.len(), "zeta")?;
        expect_len(velocity_len, grid.dim() * grid.len(), "velocity")?;
        let z = Field::from_vec(grid, slice(zeta, zeta_len, "zeta")?.to_vec())?;
        let v = VecField::from_flat(grid, slice(velocity, velocity_len, "velocity")?)?;
        copy_out(&[energy_bp(&z, &v, mu, bath)], out, 1)
    })
}

/// Prefactorizes an elliptic operator over `bath`.
#[no_mangle]
pub extern "C" fn pg_operator_new(
    bath: *const PgBathymetry,
    kind: PgOperatorKind,
    mu: f64,
    out: *mut *mut PgOperator,
) -> PgStatus {
    guard(|| {
        let bath = &non_null(bath, "bathymetry")?.inner;
        emit(out, PgOperator {
            inner: OperatorHandle::new(kind.into(), mu, bath)?,
        })
    })
}

fn vector_op(
    op: *const PgOperator,
    input: *const f64,
    len: usize,
    out: *mut f64,
    out_len: usize,
    f: impl FnOnce(&OperatorHandle, &VecField) -> Result<VecField, Failure>,
) -> PgStatus {
    guard(|| {
        let op = &non_null(op, "operator")?.inner;
        let grid = op.grid();
        expect_len(len, grid.dim() * grid.len(), "input")?;
        let v = VecField::from_flat(grid, slice(input, len, "input")?)?;
        copy_out(&f(op, &v)?.to_flat(), out, out_len)
    })
}

/// `out = L v` for the operator `L` of the handle.
#[no_mangle]
pub extern "C" fn pg_operator_apply(
    op: *const PgOperator,
    v: *const f64,
    len: usize,
    out: *mut f64,
    out_len: usize,
) -> PgStatus {
    vector_op(op, v, len, out, out_len, |h, v| Ok(h.apply(v)))
}

/// `out = L^{-1} rhs`.
#[no_mangle]
pub extern "C" fn pg_operator_solve(
    op: *const PgOperator,
    rhs: *const f64,
    len: usize,
    out: *mut f64,
    out_len: usize,
) -> PgStatus {
    vector_op(op, rhs, len, out, out_len, |h, v| Ok(h.solve(v)?))
}

#[no_mangle]
pub extern "C" fn pg_operator_free(op: *mut PgOperator) {
    if !op.is_null() {
        // SAFETY: created by `Box::into_raw` in this library and freed once.
        drop(unsafe { Box::from_raw(op) });
    }
}

fn c_path(p: *const c_char, what: &str) -> Result<PathBuf, Failure> {
    if p.is_null() {
        return Err(fail(PgStatus::NullPointer, format!("{what} is null")));
    }
    // SAFETY: the caller passes a NUL-terminated string.
    let s = unsafe { CStr::from_ptr(p) }
        .to_str()
        .map_err(|_| fail(PgStatus::InvalidArgument, format!("{what} is not UTF-8")))?;
    Ok(PathBuf::from(s))
}

/// Runs the experiment in the TOML file `config`.
///
/// `out_dir` may be null (then the config's `output_dir`, if any, is used);
/// `jobs = 0` uses all cores. Returns `VERDICT_FAILED` when the run completed
/// but a verdict failed.
#[no_mangle]
pub extern "C" fn pg_run_config(config: *const c_char, out_dir: *const c_char, jobs: usize) -> PgStatus {
    guard(|| {
        let cfg = ExperimentConfig::load(&c_path(config, "config")?)?;
        let out_dir = if out_dir.is_null() {
            None
        } else {
            Some(c_path(out_dir, "out_dir")?)
        };
        let summary = run_scenario(&cfg, &RunOptions { out_dir, jobs })?;
        if summary.passed {
            Ok(())
        } else {
            let failed: Vec<&str> = summary
                .verdicts
                .iter()
                .filter(|v| !v.passed)
                .map(|v| v.name.as_str())
                .collect();
            Err(fail(PgStatus::VerdictFailed, format!("failed verdicts: {}", failed.join(", "))))
        }
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn pg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}
