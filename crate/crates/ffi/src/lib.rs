//! C ABI over `hdbell`.
//!
//! States and density matrices cross the boundary as opaque handles that the
//! caller releases with the matching `*_free` function. Every fallible call
//! returns an [`HdbStatus`]; on failure a message is kept per thread and can be
//! copied out with [`hdb_last_error`]. Complex arrays are interleaved
//! `re, im` pairs; matrices are row-major.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use hdbell::bellbasis::{bell_state_with, BellIndex, Convention};
use hdbell::certify::{entanglement_dimensionality, fidelity, mutual_information, witness_bound};
use hdbell::measurement::joint_settings;
use hdbell::spdc::{group_state, SpdcModel};
use hdbell::tomography::{reconstruct, SolverOptions, TomographyProblem};
use hdbell::{DensityMatrix, Error, PureState, C64};
use nalgebra::DMatrix;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HdbStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    InvalidState = 4,
    Incomplete = 5,
    BufferTooSmall = 6,
    Internal = 7,
}

/// `HDB_CONVENTION_PLUS` pairs `|k⟩|m⊕k⟩`, `HDB_CONVENTION_MINUS` pairs `|k⟩|m⊖k⟩`.
pub const HDB_CONVENTION_PLUS: i32 = 0;
pub const HDB_CONVENTION_MINUS: i32 = 1;

pub struct HdbState(PureState);

pub struct HdbDensity(DensityMatrix);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> HdbStatus {
    match e {
        Error::DimensionMismatch { .. } => HdbStatus::DimensionMismatch,
        Error::InvalidArgument(_) | Error::NonFinite(_) | Error::Format { .. } => HdbStatus::InvalidArgument,
        Error::NotHermitian(_) | Error::InvalidDensityMatrix(_) | Error::EmptyState(_) | Error::Degenerate(_) => {
            HdbStatus::InvalidState
        }
        Error::InformationallyIncomplete { .. } => HdbStatus::Incomplete,
        Error::EigenNoConvergence | Error::Io { .. } => HdbStatus::Internal,
    }
}

struct Fail(HdbStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(HdbStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> HdbStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            HdbStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            HdbStatus::Internal
        }
    }
}

unsafe fn out_ptr<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn in_ref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn in_slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn out_slice<'a>(p: *mut f64, len: usize, needed: usize, what: &str) -> Result<&'a mut [f64], Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    if len < needed {
        return Err(Fail(
            HdbStatus::BufferTooSmall,
            format!("{what} holds {len} values, {needed} needed"),
        ));
    }
    Ok(std::slice::from_raw_parts_mut(p, needed))
}

/// Copies the calling thread's last error message into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length plus one, or 0 when the
/// last call succeeded.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn hdb_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| match e.borrow().as_ref() {
        None => 0,
        Some(msg) => {
            let bytes = msg.as_bytes_with_nul();
            if !buf.is_null() && len > 0 {
                let n = bytes.len().min(len);
                ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
                *buf.add(n - 1) = 0;
            }
            bytes.len()
        }
    })
}

/// Library version, static NUL-terminated string.
#[no_mangle]
pub extern "C" fn hdb_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Ideal Bell state `|ψ_{m,n}⟩` of dimension `d²`.
///
/// # Safety
/// `out` must point to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn hdb_bell_state(
    d: usize,
    m: usize,
    n: usize,
    convention: i32,
    out: *mut *mut HdbState,
) -> HdbStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let conv = match convention {
            HDB_CONVENTION_PLUS => Convention::Plus,
            HDB_CONVENTION_MINUS => Convention::Minus,
            c => return Err(Fail(HdbStatus::InvalidArgument, format!("unknown convention {c}"))),
        };
        let idx = BellIndex::new(d, m, n)?;
        *out = Box::into_raw(Box::new(HdbState(bell_state_with(idx, conv))));
        Ok(())
    })
}

/// Group state for correlation class `m` on the `{−1, 0, 1, 2}` window, prepared
/// from its pump recipe. `sigma ≤ 0` selects flat `c_ℓ`, otherwise Gaussian.
/// `efficiency` (nullable) receives the filter efficiency.
///
/// # Safety
/// `out` must point to writable storage for one handle; `efficiency` must be
/// null or writable.
#[no_mangle]
pub unsafe extern "C" fn hdb_group_state(
    m: usize,
    sigma: f64,
    out: *mut *mut HdbState,
    efficiency: *mut f64,
) -> HdbStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let model = if sigma > 0.0 {
            SpdcModel::gaussian_d4(sigma)?
        } else {
            SpdcModel::flat_d4()
        };
        let g = group_state(m, &model)?;
        if let Some(e) = efficiency.as_mut() {
            *e = g.filter_efficiency;
        }
        *out = Box::into_raw(Box::new(HdbState(g.state)));
        Ok(())
    })
}

/// Dimension of a state, 0 for null.
///
/// # Safety
/// `state` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hdb_state_dim(state: *const HdbState) -> usize {
    state.as_ref().map_or(0, |s| s.0.dim())
}

/// Writes `2·dim` interleaved amplitudes.
///
/// # Safety
/// `state` must be a live handle; `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn hdb_state_amplitudes(state: *const HdbState, out: *mut f64, len: usize) -> HdbStatus {
    guard(|| {
        let s = in_ref(state, "state")?;
        let buf = out_slice(out, len, 2 * s.0.dim(), "out")?;
        for (pair, a) in buf.chunks_exact_mut(2).zip(s.0.amplitudes()) {
            pair[0] = a.re;
            pair[1] = a.im;
        }
        Ok(())
    })
}

/// # Safety
/// `state` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hdb_state_free(state: *mut HdbState) {
    if !state.is_null() {
        drop(Box::from_raw(state));
    }
}

/// `|ψ⟩⟨ψ|/⟨ψ|ψ⟩`.
///
/// # Safety
/// `state` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn hdb_density_from_state(state: *const HdbState, out: *mut *mut HdbDensity) -> HdbStatus {
    guard(|| {
        let s = in_ref(state, "state")?;
        let out = out_ptr(out, "out")?;
        if s.0.norm_sqr() == 0.0 {
            return Err(Fail(HdbStatus::InvalidState, "zero state".into()));
        }
        *out = Box::into_raw(Box::new(HdbDensity(DensityMatrix::from_pure(&s.0))));
        Ok(())
    })
}

/// Validated density matrix from `2·dim²` interleaved row-major entries.
///
/// # Safety
/// `entries` must hold `2·dim²` doubles; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn hdb_density_from_entries(
    dim: usize,
    entries: *const f64,
    out: *mut *mut HdbDensity,
) -> HdbStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        if dim == 0 {
            return Err(Fail(HdbStatus::InvalidArgument, "dim is zero".into()));
        }
        let e = in_slice(entries, 2 * dim * dim, "entries")?;
        let m = DMatrix::from_row_iterator(dim, dim, e.chunks_exact(2).map(|p| C64::new(p[0], p[1])));
        *out = Box::into_raw(Box::new(HdbDensity(DensityMatrix::new(m)?)));
        Ok(())
    })
}

/// # Safety
/// `rho` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hdb_density_dim(rho: *const HdbDensity) -> usize {
    rho.as_ref().map_or(0, |r| r.0.dim())
}

/// Writes `2·dim²` interleaved row-major entries.
///
/// # Safety
/// `rho` must be a live handle; `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn hdb_density_entries(rho: *const HdbDensity, out: *mut f64, len: usize) -> HdbStatus {
    guard(|| {
        let r = in_ref(rho, "rho")?;
        let dim = r.0.dim();
        let buf = out_slice(out, len, 2 * dim * dim, "out")?;
        let m = r.0.matrix();
        for i in 0..dim {
            for j in 0..dim {
                let k = 2 * (i * dim + j);
                buf[k] = m[(i, j)].re;
                buf[k + 1] = m[(i, j)].im;
            }
        }
        Ok(())
    })
}

/// # Safety
/// `rho` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hdb_density_free(rho: *mut HdbDensity) {
    if !rho.is_null() {
        drop(Box::from_raw(rho));
    }
}

/// Number of joint tomography settings for dimension `d`; 0 if `d < 2`.
#[no_mangle]
pub extern "C" fn hdb_num_settings(d: usize) -> usize {
    joint_settings(d).map_or(0, |s| s.len())
}

/// Born probabilities over the standard joint settings, in their canonical order.
///
/// # Safety
/// `rho` must be a live handle; `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn hdb_forward_probabilities(
    rho: *const HdbDensity,
    d: usize,
    out: *mut f64,
    len: usize,
) -> HdbStatus {
    guard(|| {
        let r = in_ref(rho, "rho")?;
        let settings = joint_settings(d)?;
        let buf = out_slice(out, len, settings.len(), "out")?;
        let p = hdbell::tomography::forward_probabilities(&r.0, &settings, d)?;
        buf.copy_from_slice(&p);
        Ok(())
    })
}

/// Reconstructs a density matrix from probabilities over the standard joint
/// settings. `shots = 0` means unknown. `chi_square` (nullable) receives the
/// final χ²; a non-converged fit still returns `Ok` with the best iterate.
///
/// # Safety
/// `probabilities` must hold `len` doubles; `out` writable; `chi_square` null
/// or writable.
#[no_mangle]
pub unsafe extern "C" fn hdb_reconstruct(
    d: usize,
    probabilities: *const f64,
    len: usize,
    shots: u64,
    out: *mut *mut HdbDensity,
    chi_square: *mut f64,
) -> HdbStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let p = in_slice(probabilities, len, "probabilities")?;
        let mut problem = TomographyProblem::new(d, joint_settings(d)?, p.to_vec())?;
        if shots > 0 {
            problem = problem.with_shots(shots);
        }
        let r = reconstruct(&problem, &SolverOptions::default())?;
        if let Some(c) = chi_square.as_mut() {
            *c = r.diagnostics.chi_square;
        }
        *out = Box::into_raw(Box::new(HdbDensity(r.rho)));
        Ok(())
    })
}

/// `⟨ψ|ρ|ψ⟩`.
///
/// # Safety
/// Handles must be live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn hdb_fidelity(rho: *const HdbDensity, target: *const HdbState, out: *mut f64) -> HdbStatus {
    guard(|| {
        let r = in_ref(rho, "rho")?;
        let t = in_ref(target, "target")?;
        let out = out_ptr(out, "out")?;
        *out = fidelity(&r.0, &t.0)?;
        Ok(())
    })
}

/// `(k−1)/d`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hdb_witness_bound(k: usize, d: usize, out: *mut f64) -> HdbStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = witness_bound(k, d)?;
        Ok(())
    })
}

/// Largest `k` with `F > (k−1)/d`, at least 1.
#[no_mangle]
pub extern "C" fn hdb_entanglement_dimensionality(fidelity: f64, d: usize) -> usize {
    entanglement_dimensionality(fidelity, d)
}

/// Mutual information in bits of a row-major `rows × cols` confusion matrix
/// under a uniform prior.
///
/// # Safety
/// `values` must hold `rows·cols` doubles; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn hdb_mutual_information(
    rows: usize,
    cols: usize,
    values: *const f64,
    out: *mut f64,
) -> HdbStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let v = in_slice(values, rows * cols, "values")?;
        *out = mutual_information(&DMatrix::from_row_slice(rows, cols, v))?;
        Ok(())
    })
}
