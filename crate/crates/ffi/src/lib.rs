//! C ABI over `krylov_rp`.
//!
//! Conventions:
//! - every fallible function returns a [`KrpStatus`]; `KRP_STATUS_OK` is 0,
//! - on failure the message is kept per thread, see [`krp_last_error_message`],
//! - handles are opaque, created by `krp_*_new`/`krp_*_generate`-style calls
//!   and released by the matching `krp_*_free`; freeing NULL is a no-op,
//! - output arrays are caller-allocated; a too-small buffer yields
//!   `KRP_STATUS_BUFFER_TOO_SMALL` with the required length in `*len_out`
//!   when that pointer is provided.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use krylov_rp::ensembles::{generate_rp, DenseSymmetric, EnsembleConfig, Normalization};
use krylov_rp::krylov_dynamics::{tfd_krylov_from_spectrum, KrylovPropagator};
use krylov_rp::lanczos_stats::{fit_ansatz, AnsatzForm};
use krylov_rp::runner::{self, RunManifest};
use krylov_rp::spectral::{eig_tridiagonal, r_statistics};
use krylov_rp::tridiagonalize::{householder_tridiagonalize, TridiagonalForm};
use krylov_rp::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KrpStatus {
    Ok = 0,
    InvalidArgument = 1,
    NonFinite = 2,
    NotNormalized = 3,
    Breakdown = 4,
    NoConvergence = 5,
    FitNoConvergence = 6,
    SingularJacobian = 7,
    OutOfRegime = 8,
    DimensionMismatch = 9,
    TraceTooShort = 10,
    Io = 11,
    Format = 12,
    NullPointer = 13,
    BufferTooSmall = 14,
    /// A run finished but some cells failed or some checks did not pass.
    RunFailed = 15,
    Panic = 16,
}

/// Normalization convention of the generated ensemble.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KrpNormalization {
    Standard = 0,
    UnitBandwidth = 1,
    Heteroskedastic = 2,
}

/// Ansatz family for the Lanczos-profile fit.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KrpAnsatzForm {
    QLog = 0,
    Superposition = 1,
}

/// Fitted ansatz parameters with their standard errors.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct KrpAnsatzFit {
    pub p: f64,
    pub q: f64,
    pub dp: f64,
    pub dq: f64,
    pub epsilon: f64,
    pub x_min: f64,
    pub scale: f64,
}

/// Dense real symmetric matrix.
pub struct KrpMatrix {
    inner: DenseSymmetric,
}

/// Tridiagonal (Lanczos) form with diagonal `a` (length n) and off-diagonal `b` (length n−1).
pub struct KrpTridiagonal {
    inner: TridiagonalForm,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn status_of(e: &Error) -> KrpStatus {
    match e {
        Error::InvalidArgument(_) => KrpStatus::InvalidArgument,
        Error::NonFinite(_) => KrpStatus::NonFinite,
        Error::NotNormalized { .. } => KrpStatus::NotNormalized,
        Error::Breakdown { .. } => KrpStatus::Breakdown,
        Error::NoConvergence { .. } => KrpStatus::NoConvergence,
        Error::FitNoConvergence { .. } => KrpStatus::FitNoConvergence,
        Error::SingularJacobian => KrpStatus::SingularJacobian,
        Error::OutOfRegime(_) => KrpStatus::OutOfRegime,
        Error::DimensionMismatch { .. } => KrpStatus::DimensionMismatch,
        Error::TraceTooShort(_) => KrpStatus::TraceTooShort,
        Error::Io { .. } => KrpStatus::Io,
        Error::Format { .. } => KrpStatus::Format,
    }
}

/// Runs `f`, mapping errors and panics to a status with the message recorded.
fn guarded(f: impl FnOnce() -> Result<(), (KrpStatus, String)>) -> KrpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            KrpStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            KrpStatus::Panic
        }
    }
}

fn lib(e: Error) -> (KrpStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(name: &str) -> (KrpStatus, String) {
    (KrpStatus::NullPointer, format!("{name} is NULL"))
}

/// # Safety
/// `ptr` must be NULL or point to `len` readable values.
unsafe fn slice<'a, T>(ptr: *const T, len: usize, name: &str) -> Result<&'a [T], (KrpStatus, String)> {
    if len == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        return Err(null(name));
    }
    Ok(std::slice::from_raw_parts(ptr, len))
}

/// # Safety
/// `ptr` must be NULL or point to `cap` writable values; `len_out` NULL or writable.
unsafe fn write_out<T: Copy>(
    src: &[T],
    ptr: *mut T,
    cap: usize,
    len_out: *mut usize,
    name: &str,
) -> Result<(), (KrpStatus, String)> {
    if !len_out.is_null() {
        *len_out = src.len();
    }
    if cap < src.len() {
        return Err((
            KrpStatus::BufferTooSmall,
            format!("{name} holds {cap} values, need {}", src.len()),
        ));
    }
    if src.is_empty() {
        return Ok(());
    }
    if ptr.is_null() {
        return Err(null(name));
    }
    std::ptr::copy_nonoverlapping(src.as_ptr(), ptr, src.len());
    Ok(())
}

/// # Safety
/// `s` must be NULL or a NUL-terminated string.
unsafe fn c_str<'a>(s: *const c_char, name: &str) -> Result<&'a str, (KrpStatus, String)> {
    if s.is_null() {
        return Err(null(name));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| (KrpStatus::InvalidArgument, format!("{name} is not UTF-8")))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn krp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the calling thread's last error message (NUL-terminated, truncated
/// to `cap`) and returns its full length in bytes without the terminator.
///
/// # Safety
/// `buf` must be NULL or point to `cap` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn krp_last_error_message(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && cap > 0 {
            let n = msg.len().min(cap - 1);
            std::ptr::copy_nonoverlapping(msg.as_ptr().cast(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Draws one Rosenzweig–Porter realization; `realization` selects an
/// independent stream under `seed`.
///
/// # Safety
/// `out` must be a valid pointer; the handle written there must be released
/// with [`krp_matrix_free`].
#[no_mangle]
pub unsafe extern "C" fn krp_matrix_generate(
    n: usize,
    gamma: f64,
    normalization: KrpNormalization,
    seed: u64,
    realization: u64,
    out: *mut *mut KrpMatrix,
) -> KrpStatus {
    guarded(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let norm = match normalization {
            KrpNormalization::Standard => Normalization::Standard,
            KrpNormalization::UnitBandwidth => Normalization::UnitBandwidth,
            KrpNormalization::Heteroskedastic => Normalization::Heteroskedastic,
        };
        let cfg = EnsembleConfig::new(n, gamma, norm, seed).with_realization(realization);
        let inner = generate_rp(&cfg).map_err(lib)?;
        *out = Box::into_raw(Box::new(KrpMatrix { inner }));
        Ok(())
    })
}

/// Builds a matrix from its row-major `n × n` entries; symmetry is checked.
///
/// # Safety
/// `entries` must point to `n·n` values and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn krp_matrix_from_dense(entries: *const f64, n: usize, out: *mut *mut KrpMatrix) -> KrpStatus {
    guarded(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let len = n.checked_mul(n).ok_or((KrpStatus::InvalidArgument, "n·n overflows".to_string()))?;
        let data = slice(entries, len, "entries")?;
        let inner = DenseSymmetric::from_row_major(n, data.to_vec()).map_err(lib)?;
        *out = Box::into_raw(Box::new(KrpMatrix { inner }));
        Ok(())
    })
}

/// Dimension of the matrix, or 0 for NULL.
///
/// # Safety
/// `m` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn krp_matrix_dim(m: *const KrpMatrix) -> usize {
    m.as_ref().map_or(0, |m| m.inner.dim())
}

/// Reads entry `(i, j)`.
///
/// # Safety
/// `m` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn krp_matrix_get(m: *const KrpMatrix, i: usize, j: usize, out: *mut f64) -> KrpStatus {
    guarded(|| {
        let m = m.as_ref().ok_or_else(|| null("m"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let n = m.inner.dim();
        if i >= n || j >= n {
            return Err((KrpStatus::InvalidArgument, format!("index ({i}, {j}) outside {n} × {n}")));
        }
        *out = m.inner.get(i, j);
        Ok(())
    })
}

/// # Safety
/// `m` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn krp_matrix_free(m: *mut KrpMatrix) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Householder tridiagonalization from the first basis vector.
///
/// # Safety
/// `m` must be a live handle and `out` valid; release the result with
/// [`krp_tridiagonal_free`].
#[no_mangle]
pub unsafe extern "C" fn krp_tridiagonalize(m: *const KrpMatrix, out: *mut *mut KrpTridiagonal) -> KrpStatus {
    guarded(|| {
        let m = m.as_ref().ok_or_else(|| null("m"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let inner = householder_tridiagonalize(&m.inner, false).map_err(lib)?;
        *out = Box::into_raw(Box::new(KrpTridiagonal { inner }));
        Ok(())
    })
}

/// Wraps explicit coefficients: `a` of length `n`, `b` of length `n − 1`.
///
/// # Safety
/// `a`, `b` must point to the stated lengths and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn krp_tridiagonal_new(
    a: *const f64,
    b: *const f64,
    n: usize,
    out: *mut *mut KrpTridiagonal,
) -> KrpStatus {
    guarded(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let a = slice(a, n, "a")?.to_vec();
        let b = slice(b, n.saturating_sub(1), "b")?.to_vec();
        let inner = TridiagonalForm::from_coefficients(a, b).map_err(lib)?;
        *out = Box::into_raw(Box::new(KrpTridiagonal { inner }));
        Ok(())
    })
}

/// Krylov dimension, or 0 for NULL.
///
/// # Safety
/// `t` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn krp_tridiagonal_len(t: *const KrpTridiagonal) -> usize {
    t.as_ref().map_or(0, |t| t.inner.len())
}

/// Copies the coefficients into `a_out` (capacity `a_cap`) and `b_out`
/// (capacity `b_cap`).
///
/// # Safety
/// Buffers must hold their stated capacities.
#[no_mangle]
pub unsafe extern "C" fn krp_tridiagonal_coefficients(
    t: *const KrpTridiagonal,
    a_out: *mut f64,
    a_cap: usize,
    b_out: *mut f64,
    b_cap: usize,
) -> KrpStatus {
    guarded(|| {
        let t = t.as_ref().ok_or_else(|| null("t"))?;
        write_out(&t.inner.a, a_out, a_cap, std::ptr::null_mut(), "a_out")?;
        write_out(&t.inner.b, b_out, b_cap, std::ptr::null_mut(), "b_out")
    })
}

/// Ascending eigenvalues of the tridiagonal form.
///
/// # Safety
/// `out` must hold `cap` values; `len_out` NULL or valid.
#[no_mangle]
pub unsafe extern "C" fn krp_tridiagonal_eigenvalues(
    t: *const KrpTridiagonal,
    out: *mut f64,
    cap: usize,
    len_out: *mut usize,
) -> KrpStatus {
    guarded(|| {
        let t = t.as_ref().ok_or_else(|| null("t"))?;
        let values = eig_tridiagonal(&t.inner, false).map_err(lib)?.values;
        write_out(&values, out, cap, len_out, "out")
    })
}

/// # Safety
/// `t` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn krp_tridiagonal_free(t: *mut KrpTridiagonal) {
    if !t.is_null() {
        drop(Box::from_raw(t));
    }
}

/// Mean adjacent-gap ratio over the central `window` fraction of ascending levels.
///
/// # Safety
/// `values` must point to `len` values and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn krp_r_statistic(values: *const f64, len: usize, window: f64, out: *mut f64) -> KrpStatus {
    guarded(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = r_statistics(slice(values, len, "values")?, window).map_err(lib)?;
        Ok(())
    })
}

/// Fits an ansatz to the profile `(x[i], b[i])`; `x_min ≤ 0` selects `2/n_dim`.
///
/// # Safety
/// `x`, `b` must point to `len` values and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn krp_fit_ansatz(
    x: *const f64,
    b: *const f64,
    len: usize,
    form: KrpAnsatzForm,
    x_min: f64,
    n_dim: usize,
    out: *mut KrpAnsatzFit,
) -> KrpStatus {
    guarded(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let xs = slice(x, len, "x")?;
        let bs = slice(b, len, "b")?;
        let profile: Vec<(f64, f64)> = xs.iter().copied().zip(bs.iter().copied()).collect();
        let x_min = if x_min > 0.0 {
            x_min
        } else if n_dim > 0 {
            krylov_rp::lanczos_stats::default_x_min(n_dim)
        } else {
            return Err((KrpStatus::InvalidArgument, "x_min ≤ 0 needs n_dim > 0".into()));
        };
        let form = match form {
            KrpAnsatzForm::QLog => AnsatzForm::QLog,
            KrpAnsatzForm::Superposition => AnsatzForm::Superposition,
        };
        let f = fit_ansatz(&profile, form, x_min).map_err(lib)?;
        *out = KrpAnsatzFit {
            p: f.p,
            q: f.q,
            dp: f.dp,
            dq: f.dq,
            epsilon: f.epsilon,
            x_min: f.x_min,
            scale: f.scale,
        };
        Ok(())
    })
}

/// Spread complexity K_S(t) of the thermofield double at inverse temperature
/// `beta` for a spectrum `values`, at each of `n_times` times. The largest
/// deviation of the total Krylov occupation from 1 goes to `defect_out` when
/// not NULL.
///
/// # Safety
/// `values` holds `len` values, `times` and `ks_out` hold `n_times` values.
#[no_mangle]
pub unsafe extern "C" fn krp_spread_complexity(
    values: *const f64,
    len: usize,
    beta: f64,
    times: *const f64,
    n_times: usize,
    ks_out: *mut f64,
    defect_out: *mut f64,
) -> KrpStatus {
    guarded(|| {
        let mut spectrum = slice(values, len, "values")?.to_vec();
        spectrum.sort_by(f64::total_cmp);
        let times = slice(times, n_times, "times")?;
        let t = tfd_krylov_from_spectrum(&spectrum, beta).map_err(lib)?;
        let prop = KrylovPropagator::from_spectral_basis(&spectrum, &t).map_err(lib)?;
        let (ks, defect) = prop.complexity_series(times);
        write_out(&ks, ks_out, n_times, std::ptr::null_mut(), "ks_out")?;
        if !defect_out.is_null() {
            *defect_out = defect;
        }
        Ok(())
    })
}

/// Runs the sweep described by a manifest JSON document. Returns
/// `KRP_STATUS_RUN_FAILED` when the run completed with failed cells.
///
/// # Safety
/// `manifest_json` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn krp_run_manifest(manifest_json: *const c_char) -> KrpStatus {
    guarded(|| {
        let text = c_str(manifest_json, "manifest_json")?;
        let m: RunManifest =
            serde_json::from_str(text).map_err(|e| (KrpStatus::Format, format!("manifest: {e}")))?;
        let report = runner::run(&m).map_err(lib)?;
        if report.success() {
            Ok(())
        } else {
            Err((KrpStatus::RunFailed, format!("{} cell(s) failed", report.failed.len())))
        }
    })
}

/// Re-verifies a finished run directory. Returns `KRP_STATUS_RUN_FAILED`
/// when a hash or invariant check fails.
///
/// # Safety
/// `dir` must be a NUL-terminated path.
#[no_mangle]
pub unsafe extern "C" fn krp_verify(dir: *const c_char) -> KrpStatus {
    guarded(|| {
        let dir = c_str(dir, "dir")?;
        let report = runner::verify(Path::new(dir), None).map_err(lib)?;
        if report.success() {
            Ok(())
        } else {
            Err((
                KrpStatus::RunFailed,
                format!("verification failed: [{}]", report.offending_files().join(", ")),
            ))
        }
    })
}
