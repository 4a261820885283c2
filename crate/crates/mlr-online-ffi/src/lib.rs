//! C interface to the streaming estimators: opaque handles, status
//! codes, and flat-array exchange of vectors.
//!
//! Handles are created by the `*_new` functions, drive one model update
//! per `*_step` call, and must be released exactly once with the
//! matching `*_free`. All array arguments are `dim` consecutive doubles
//! in the caller's memory; estimates are written back the same way.
//! Every function checks pointers and dimensions before touching them
//! and reports problems through [`MlrStatus`] instead of crashing.

use std::ffi::{c_char, c_uint};
use std::ptr;
use std::slice;

use mlr_online::asym_em::AsymEm;
use mlr_online::clustering::{classify_asym, classify_sym};
use mlr_online::sym_em::SymEm;
use mlr_online::Error;
use nalgebra::{DMatrix, DVector};

/// Result of a C-interface call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MlrStatus {
    /// The call succeeded.
    Ok = 0,
    /// A required pointer was null.
    NullArgument = 1,
    /// A value was out of range or otherwise unusable.
    InvalidArgument = 2,
    /// An array length disagreed with the handle's dimension.
    DimensionMismatch = 3,
}

fn status_of(error: &Error) -> MlrStatus {
    match error {
        Error::DimensionMismatch { .. } => MlrStatus::DimensionMismatch,
        _ => MlrStatus::InvalidArgument,
    }
}

/// Opaque handle to the sign-symmetric streaming estimator.
pub struct MlrSymEm(SymEm);

/// Opaque handle to the two-branch streaming estimator.
pub struct MlrAsymEm(AsymEm);

unsafe fn read_vector(data: *const f64, dim: usize) -> DVector<f64> {
    DVector::from_column_slice(slice::from_raw_parts(data, dim))
}

unsafe fn write_vector(out: *mut f64, v: &DVector<f64>) {
    slice::from_raw_parts_mut(out, v.len()).copy_from_slice(v.as_slice());
}

/// Version of the library, as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn mlr_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Creates a sign-symmetric estimator with the identity gain prior.
/// `beta0` is the starting estimate and must not be the zero vector;
/// `sigma2` is the assumed noise variance. On success `*out` owns the
/// new handle.
///
/// # Safety
/// `beta0` must point to `dim` readable doubles and `out` to a writable
/// pointer slot. Release the handle with [`mlr_sym_free`].
#[no_mangle]
pub unsafe extern "C" fn mlr_sym_new(
    beta0: *const f64,
    dim: usize,
    sigma2: f64,
    out: *mut *mut MlrSymEm,
) -> MlrStatus {
    if out.is_null() || beta0.is_null() {
        return MlrStatus::NullArgument;
    }
    *out = ptr::null_mut();
    if dim == 0 {
        return MlrStatus::InvalidArgument;
    }
    match SymEm::new(read_vector(beta0, dim), DMatrix::identity(dim, dim), sigma2) {
        Ok(em) => {
            *out = Box::into_raw(Box::new(MlrSymEm(em)));
            MlrStatus::Ok
        }
        Err(e) => status_of(&e),
    }
}

/// Absorbs one observation `(phi, y)`. When `soft_target` is non-null
/// it receives the posterior-weighted regression target the update
/// used.
///
/// # Safety
/// `handle` must be a live handle from [`mlr_sym_new`]; `phi` must
/// point to `dim` readable doubles; `soft_target` is either null or
/// writable.
#[no_mangle]
pub unsafe extern "C" fn mlr_sym_step(
    handle: *mut MlrSymEm,
    phi: *const f64,
    dim: usize,
    y: f64,
    soft_target: *mut f64,
) -> MlrStatus {
    if handle.is_null() || phi.is_null() {
        return MlrStatus::NullArgument;
    }
    match (*handle).0.step(&read_vector(phi, dim), y) {
        Ok(target) => {
            if !soft_target.is_null() {
                *soft_target = target;
            }
            MlrStatus::Ok
        }
        Err(e) => status_of(&e),
    }
}

/// Copies the current estimate into `out`.
///
/// # Safety
/// `handle` must be a live handle from [`mlr_sym_new`] and `out` must
/// point to `dim` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn mlr_sym_estimate(
    handle: *const MlrSymEm,
    out: *mut f64,
    dim: usize,
) -> MlrStatus {
    if handle.is_null() || out.is_null() {
        return MlrStatus::NullArgument;
    }
    let em = &(*handle).0;
    if dim != em.dim() {
        return MlrStatus::DimensionMismatch;
    }
    write_vector(out, em.estimate());
    MlrStatus::Ok
}

/// Releases a handle created by [`mlr_sym_new`]. Null is ignored.
///
/// # Safety
/// `handle` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mlr_sym_free(handle: *mut MlrSymEm) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Creates a two-branch estimator from branch starting guesses with the
/// identity gain prior. The branch guesses must not coincide; `sigma2`
/// is the assumed noise variance. On success `*out` owns the new
/// handle.
///
/// # Safety
/// `beta1_0` and `beta2_0` must point to `dim` readable doubles each
/// and `out` to a writable pointer slot. Release the handle with
/// [`mlr_asym_free`].
#[no_mangle]
pub unsafe extern "C" fn mlr_asym_new(
    beta1_0: *const f64,
    beta2_0: *const f64,
    dim: usize,
    sigma2: f64,
    out: *mut *mut MlrAsymEm,
) -> MlrStatus {
    if out.is_null() || beta1_0.is_null() || beta2_0.is_null() {
        return MlrStatus::NullArgument;
    }
    *out = ptr::null_mut();
    if dim == 0 {
        return MlrStatus::InvalidArgument;
    }
    match AsymEm::from_branch_guesses(
        &read_vector(beta1_0, dim),
        &read_vector(beta2_0, dim),
        DMatrix::identity(dim, dim),
        sigma2,
    ) {
        Ok(em) => {
            *out = Box::into_raw(Box::new(MlrAsymEm(em)));
            MlrStatus::Ok
        }
        Err(e) => status_of(&e),
    }
}

/// Absorbs one observation `(phi, y)`. When `innovation` is non-null it
/// receives the centroid residual the update used.
///
/// # Safety
/// `handle` must be a live handle from [`mlr_asym_new`]; `phi` must
/// point to `dim` readable doubles; `innovation` is either null or
/// writable.
#[no_mangle]
pub unsafe extern "C" fn mlr_asym_step(
    handle: *mut MlrAsymEm,
    phi: *const f64,
    dim: usize,
    y: f64,
    innovation: *mut f64,
) -> MlrStatus {
    if handle.is_null() || phi.is_null() {
        return MlrStatus::NullArgument;
    }
    match (*handle).0.step(&read_vector(phi, dim), y) {
        Ok(residual) => {
            if !innovation.is_null() {
                *innovation = residual;
            }
            MlrStatus::Ok
        }
        Err(e) => status_of(&e),
    }
}

/// Copies the two branch estimates into `beta1_out` and `beta2_out`.
///
/// # Safety
/// `handle` must be a live handle from [`mlr_asym_new`]; both output
/// arrays must point to `dim` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn mlr_asym_estimates(
    handle: *const MlrAsymEm,
    beta1_out: *mut f64,
    beta2_out: *mut f64,
    dim: usize,
) -> MlrStatus {
    if handle.is_null() || beta1_out.is_null() || beta2_out.is_null() {
        return MlrStatus::NullArgument;
    }
    let em = &(*handle).0;
    if dim != em.dim() {
        return MlrStatus::DimensionMismatch;
    }
    write_vector(beta1_out, &em.beta1());
    write_vector(beta2_out, &em.beta2());
    MlrStatus::Ok
}

/// Releases a handle created by [`mlr_asym_new`]. Null is ignored.
///
/// # Safety
/// `handle` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mlr_asym_free(handle: *mut MlrAsymEm) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Assigns an observation to a signed branch of the mirrored model
/// described by `beta`: `*index` becomes 1 for the negative branch and
/// 2 for the positive one, picking the smaller squared residual.
///
/// # Safety
/// `beta` and `phi` must point to `dim` readable doubles each and
/// `index` to a writable slot.
#[no_mangle]
pub unsafe extern "C" fn mlr_classify_sym(
    beta: *const f64,
    phi: *const f64,
    dim: usize,
    y: f64,
    index: *mut c_uint,
) -> MlrStatus {
    if beta.is_null() || phi.is_null() || index.is_null() {
        return MlrStatus::NullArgument;
    }
    if dim == 0 {
        return MlrStatus::InvalidArgument;
    }
    *index = classify_sym(&read_vector(beta, dim), &read_vector(phi, dim), y) as c_uint;
    MlrStatus::Ok
}

/// Assigns an observation to one of two branches: `*index` becomes 1
/// for `beta1` and 2 for `beta2`, picking the smaller squared residual.
///
/// # Safety
/// `beta1`, `beta2`, and `phi` must point to `dim` readable doubles
/// each and `index` to a writable slot.
#[no_mangle]
pub unsafe extern "C" fn mlr_classify_asym(
    beta1: *const f64,
    beta2: *const f64,
    phi: *const f64,
    dim: usize,
    y: f64,
    index: *mut c_uint,
) -> MlrStatus {
    if beta1.is_null() || beta2.is_null() || phi.is_null() || index.is_null() {
        return MlrStatus::NullArgument;
    }
    if dim == 0 {
        return MlrStatus::InvalidArgument;
    }
    *index = classify_asym(
        &read_vector(beta1, dim),
        &read_vector(beta2, dim),
        &read_vector(phi, dim),
        y,
    ) as c_uint;
    MlrStatus::Ok
}
