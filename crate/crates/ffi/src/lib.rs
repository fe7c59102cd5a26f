//! C interface to the hkcenter structures.
//!
//! A structure lives behind an opaque `HkCenter` handle created by
//! `hk_new` and released by `hk_free`. Every fallible call returns an
//! `HkStatus`; results are written through out-pointers only on
//! `HK_STATUS_OK`. Panics never cross the boundary and surface as
//! `HK_STATUS_PANIC`. Strings returned by the library must be released with
//! `hk_string_free`.

use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::slice;

use hkcenter::hierarchy::{export_dendrogram, validate_family};
use hkcenter::{Backend, Config, Error, Family, Point};

/// Opaque handle to one dynamic structure.
pub struct HkCenter {
    inner: Backend,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HkStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidConfig = 3,
    DimensionMismatch = 4,
    OutOfBox = 5,
    NotFound = 6,
    Empty = 7,
    Degenerate = 8,
    Internal = 9,
    Panic = 10,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HkMode {
    Low = 0,
    High = 1,
}

impl From<&Error> for HkStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::DimensionMismatch { .. } => HkStatus::DimensionMismatch,
            Error::OutOfBox { .. } => HkStatus::OutOfBox,
            Error::NotFound | Error::NotAMember(..) => HkStatus::NotFound,
            Error::Empty => HkStatus::Empty,
            Error::InvalidArgument(_) | Error::GuardExceeded { .. } => HkStatus::InvalidArgument,
            Error::InvalidConfig(_) => HkStatus::InvalidConfig,
            Error::Degenerate { .. } => HkStatus::Degenerate,
            Error::Inconsistent(_) => HkStatus::Internal,
        }
    }
}

fn guarded(f: impl FnOnce() -> Result<(), HkStatus>) -> HkStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => HkStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => HkStatus::Panic,
    }
}

fn check<T>(r: hkcenter::Result<T>) -> Result<T, HkStatus> {
    r.map_err(|e| HkStatus::from(&e))
}

unsafe fn handle<'a>(h: *const HkCenter) -> Result<&'a HkCenter, HkStatus> {
    unsafe { h.as_ref() }.ok_or(HkStatus::NullPointer)
}

unsafe fn handle_mut<'a>(h: *mut HkCenter) -> Result<&'a mut HkCenter, HkStatus> {
    unsafe { h.as_mut() }.ok_or(HkStatus::NullPointer)
}

unsafe fn point(coords: *const i64, len: usize) -> Result<Point, HkStatus> {
    if coords.is_null() {
        return Err(HkStatus::NullPointer);
    }
    Ok(Point::from(unsafe { slice::from_raw_parts(coords, len) }))
}

unsafe fn put<T>(out: *mut T, v: T) -> Result<(), HkStatus> {
    if out.is_null() {
        return Err(HkStatus::NullPointer);
    }
    unsafe { out.write(v) };
    Ok(())
}

/// Creates a structure over `{1..delta}^d`. `ell` and `seed` only affect
/// the high-dimensional mode.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn hk_new(
    d: usize,
    delta: i64,
    mode: HkMode,
    ell: usize,
    seed: u64,
    out: *mut *mut HkCenter,
) -> HkStatus {
    guarded(|| {
        if out.is_null() {
            return Err(HkStatus::NullPointer);
        }
        let cfg = match mode {
            HkMode::Low => Config::low_dim(d, delta),
            HkMode::High => Config::high_dim(d, delta, ell, seed),
        };
        let inner = check(Backend::new(&cfg))?;
        unsafe { put(out, Box::into_raw(Box::new(HkCenter { inner }))) }
    })
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `h` must come from `hk_new` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn hk_free(h: *mut HkCenter) {
    if !h.is_null() {
        drop(unsafe { Box::from_raw(h) });
    }
}

/// Inserts a point of `len` coordinates. Writes the id of this copy.
///
/// # Safety
/// `coords` must point to `len` readable values; `out_id` may be null.
#[no_mangle]
pub unsafe extern "C" fn hk_insert(h: *mut HkCenter, coords: *const i64, len: usize, out_id: *mut u64) -> HkStatus {
    guarded(|| {
        let hc = unsafe { handle_mut(h) }?;
        let p = unsafe { point(coords, len) }?;
        let id = check(hc.inner.insert(p))?;
        if !out_id.is_null() {
            unsafe { out_id.write(id.0) };
        }
        Ok(())
    })
}

/// Removes one copy of a point.
///
/// # Safety
/// `coords` must point to `len` readable values.
#[no_mangle]
pub unsafe extern "C" fn hk_delete(h: *mut HkCenter, coords: *const i64, len: usize) -> HkStatus {
    guarded(|| {
        let hc = unsafe { handle_mut(h) }?;
        let p = unsafe { point(coords, len) }?;
        check(hc.inner.delete(&p))
    })
}

/// Representative of a stored point in the `k`-clustering. Writes its id
/// and its `len` coordinates to `out_coords`.
///
/// # Safety
/// `coords` must point to `len` readable values and `out_coords` to `len`
/// writable ones.
#[no_mangle]
pub unsafe extern "C" fn hk_cluster(
    h: *const HkCenter,
    coords: *const i64,
    len: usize,
    k: usize,
    out_id: *mut u64,
    out_coords: *mut i64,
) -> HkStatus {
    guarded(|| {
        let hc = unsafe { handle(h) }?;
        let p = unsafe { point(coords, len) }?;
        if out_id.is_null() || out_coords.is_null() {
            return Err(HkStatus::NullPointer);
        }
        let rep = check(hc.inner.cluster(&p, k))?;
        let dst = unsafe { slice::from_raw_parts_mut(out_coords, len) };
        dst.copy_from_slice(rep.point.coords());
        unsafe { put(out_id, rep.id.0) }
    })
}

/// Number of distinct coordinates and of stored copies.
///
/// # Safety
/// Out-pointers must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn hk_len(h: *const HkCenter, out_distinct: *mut usize, out_total: *mut u64) -> HkStatus {
    guarded(|| {
        let hc = unsafe { handle(h) }?;
        unsafe { put(out_distinct, hc.inner.distinct_len()) }?;
        unsafe { put(out_total, hc.inner.total_len()) }
    })
}

/// Index `M` of the top level; levels are `0..=M`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn hk_max_level(h: *const HkCenter, out: *mut usize) -> HkStatus {
    guarded(|| {
        let hc = unsafe { handle(h) }?;
        unsafe { put(out, hc.inner.max_level()) }
    })
}

/// Number of members of one level.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn hk_level_size(h: *const HkCenter, level: usize, out: *mut usize) -> HkStatus {
    guarded(|| {
        let hc = unsafe { handle(h) }?;
        if level > hc.inner.max_level() {
            return Err(HkStatus::InvalidArgument);
        }
        unsafe { put(out, hc.inner.level_size(level)) }
    })
}

/// Counts violated family conditions at the structure's own parent factor.
/// Quadratic in the number of points.
///
/// # Safety
/// `out_violations` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn hk_validate(h: *const HkCenter, out_violations: *mut usize) -> HkStatus {
    guarded(|| {
        let hc = unsafe { handle(h) }?;
        let report = validate_family(&hc.inner, hc.inner.alpha());
        unsafe { put(out_violations, report.violations.len()) }
    })
}

/// Dendrogram export as a NUL-terminated string owned by the caller.
///
/// # Safety
/// `out` must be valid for writes; release the string with
/// `hk_string_free`.
#[no_mangle]
pub unsafe extern "C" fn hk_export_dendrogram(h: *const HkCenter, out: *mut *mut c_char) -> HkStatus {
    guarded(|| {
        let hc = unsafe { handle(h) }?;
        if out.is_null() {
            return Err(HkStatus::NullPointer);
        }
        let text = check(export_dendrogram(&hc.inner))?.to_text();
        let s = CString::new(text).map_err(|_| HkStatus::Internal)?;
        unsafe { put(out, s.into_raw()) }
    })
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn hk_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(unsafe { CString::from_raw(s) });
    }
}

/// Static description of a status code.
#[no_mangle]
pub extern "C" fn hk_status_string(status: HkStatus) -> *const c_char {
    let s: &'static [u8] = match status {
        HkStatus::Ok => b"ok\0",
        HkStatus::NullPointer => b"null pointer\0",
        HkStatus::InvalidArgument => b"invalid argument\0",
        HkStatus::InvalidConfig => b"invalid configuration\0",
        HkStatus::DimensionMismatch => b"dimension mismatch\0",
        HkStatus::OutOfBox => b"coordinate outside the box\0",
        HkStatus::NotFound => b"point not stored\0",
        HkStatus::Empty => b"structure is empty\0",
        HkStatus::Degenerate => b"no level small enough for k\0",
        HkStatus::Internal => b"internal error\0",
        HkStatus::Panic => b"panic caught at the boundary\0",
    };
    s.as_ptr().cast()
}
