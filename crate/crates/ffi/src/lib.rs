//! C ABI over `orbital-forge`.
//!
//! Handles are opaque and owned by the caller once returned; release them
//! with the matching `_free`. Every fallible call returns an [`OfStatus`];
//! the message of the last failure on the calling thread is available
//! through [`of_last_error_message`]. Points are ambient coordinates, real.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use orbital_forge::closedform::{self, CartanPoint};
use orbital_forge::groups::{self, CompactGroupSpec, GroupFamily};
use orbital_forge::rootsys::{self, Family, RootSystem};
use orbital_forge::Error;

/// Status codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Config = 3,
    Argument = 4,
    Degenerate = 5,
    Resource = 6,
    Numerical = 7,
    Resolution = 8,
    Panic = 9,
}

/// Opaque root system.
pub struct OfRootSystem {
    inner: RootSystem,
}

/// Opaque compact group (SU, SO or USp).
pub struct OfGroup {
    inner: CompactGroupSpec,
}

/// Monte Carlo estimate of a complex mean.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct OfEstimate {
    pub mean_re: f64,
    pub mean_im: f64,
    pub std_error: f64,
    pub n_samples: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> OfStatus {
    match e {
        Error::Config(_) => OfStatus::Config,
        Error::Argument(_) => OfStatus::Argument,
        Error::Degenerate { .. } => OfStatus::Degenerate,
        Error::Resource(_) => OfStatus::Resource,
        Error::Numerical(_) => OfStatus::Numerical,
        Error::Resolution(_) => OfStatus::Resolution,
    }
}

enum Fail {
    Null(&'static str),
    Utf8,
    Lib(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Lib(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> OfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => OfStatus::Ok,
        Ok(Err(Fail::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            OfStatus::NullPointer
        }
        Ok(Err(Fail::Utf8)) => {
            set_error("string argument is not valid UTF-8".into());
            OfStatus::InvalidUtf8
        }
        Ok(Err(Fail::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic".into());
            OfStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &'static str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Fail::Utf8)
}

unsafe fn slice_arg<'a>(p: *const f64, len: usize, what: &'static str) -> Result<&'a [f64], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or(Fail::Null(what))
}

unsafe fn rs_arg<'a>(p: *const OfRootSystem) -> Result<&'a RootSystem, Fail> {
    p.as_ref().map(|h| &h.inner).ok_or(Fail::Null("root system"))
}

fn point(rs: &RootSystem, v: &[f64]) -> Result<CartanPoint, Fail> {
    if v.len() != rs.ambient_dim() {
        return Err(Fail::Lib(Error::Argument(format!(
            "point has {} coordinates, expected {}",
            v.len(),
            rs.ambient_dim()
        ))));
    }
    Ok(CartanPoint::real(rs, v)?)
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length in bytes, without
/// the terminator.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn of_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Builds a root system. `family` is one of "A", "B", "C", "D", "G2"
/// (case-insensitive).
///
/// # Safety
/// `family` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn of_root_system_new(
    family: *const c_char,
    rank: usize,
    out: *mut *mut OfRootSystem,
) -> OfStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let family: Family = str_arg(family, "family")?.parse()?;
        let inner = rootsys::build_root_system(family, rank)?;
        *out = Box::into_raw(Box::new(OfRootSystem { inner }));
        Ok(())
    })
}

/// # Safety
/// `rs` must come from [`of_root_system_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn of_root_system_free(rs: *mut OfRootSystem) {
    if !rs.is_null() {
        drop(Box::from_raw(rs));
    }
}

/// Number of ambient coordinates of a Cartan point.
///
/// # Safety
/// `rs` must be a live handle or null (returns 0).
#[no_mangle]
pub unsafe extern "C" fn of_root_system_ambient_dim(rs: *const OfRootSystem) -> usize {
    rs.as_ref().map_or(0, |h| h.inner.ambient_dim())
}

/// # Safety
/// `rs` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn of_weyl_order(rs: *const OfRootSystem, out: *mut u64) -> OfStatus {
    guard(|| {
        let rs = rs_arg(rs)?;
        let out = out_arg(out, "out")?;
        *out = rs.weyl_group()?.len() as u64;
        Ok(())
    })
}

/// `[[Π, Π]]`, the bracket of the discriminant with itself.
///
/// # Safety
/// `rs` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn of_pi_pi_norm(rs: *const OfRootSystem, out: *mut f64) -> OfStatus {
    guard(|| {
        let rs = rs_arg(rs)?;
        *out_arg(out, "out")? = rootsys::pi_pi_norm(rs);
        Ok(())
    })
}

/// `[[Π, Π]] / |W|`.
///
/// # Safety
/// `rs` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn of_normalization_constant(rs: *const OfRootSystem, out: *mut f64) -> OfStatus {
    guard(|| {
        let rs = rs_arg(rs)?;
        let out = out_arg(out, "out")?;
        *out = rootsys::normalization_constant(rs)?;
        Ok(())
    })
}

/// Closed form of the orbital integral at real points `h1`, `h2`
/// (each `len` ambient coordinates).
///
/// # Safety
/// `rs` must be a live handle; `h1`, `h2` valid for `len` doubles; the
/// outputs writable.
#[no_mangle]
pub unsafe extern "C" fn of_hc_rhs(
    rs: *const OfRootSystem,
    h1: *const f64,
    h2: *const f64,
    len: usize,
    out_re: *mut f64,
    out_im: *mut f64,
) -> OfStatus {
    guard(|| {
        let rs = rs_arg(rs)?;
        let p1 = point(rs, slice_arg(h1, len, "h1")?)?;
        let p2 = point(rs, slice_arg(h2, len, "h2")?)?;
        let re = out_arg(out_re, "out_re")?;
        let im = out_arg(out_im, "out_im")?;
        let v = closedform::hc_rhs(rs, &p1, &p2)?;
        *re = v.re;
        *im = v.im;
        Ok(())
    })
}

/// `∫_{U(n)} e^{tr(A U B U*)} dU` for diagonal `A`, `B` with spectra `a`, `b`.
///
/// # Safety
/// `a`, `b` valid for `n` doubles; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn of_hciz(a: *const f64, b: *const f64, n: usize, out: *mut f64) -> OfStatus {
    guard(|| {
        let a = slice_arg(a, n, "a")?;
        let b = slice_arg(b, n, "b")?;
        let out = out_arg(out, "out")?;
        *out = closedform::hciz(a, b)?;
        Ok(())
    })
}

/// Compact group handle. `family` is "su", "so" or "usp"; `size` the
/// matrix size.
///
/// # Safety
/// `family` must be a NUL-terminated string; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn of_group_new(family: *const c_char, size: usize, out: *mut *mut OfGroup) -> OfStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let family: GroupFamily = str_arg(family, "family")?.parse()?;
        let inner = CompactGroupSpec::new(family, size)?;
        *out = Box::into_raw(Box::new(OfGroup { inner }));
        Ok(())
    })
}

/// # Safety
/// `g` must come from [`of_group_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn of_group_free(g: *mut OfGroup) {
    if !g.is_null() {
        drop(Box::from_raw(g));
    }
}

/// Root system of a group as a new handle.
///
/// # Safety
/// `g` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn of_group_root_system(g: *const OfGroup, out: *mut *mut OfRootSystem) -> OfStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let g = g.as_ref().ok_or(Fail::Null("group"))?;
        *out = Box::into_raw(Box::new(OfRootSystem { inner: g.inner.root_system().clone() }));
        Ok(())
    })
}

/// Haar Monte Carlo estimate of the orbital integral with `n` samples.
/// Deterministic in `seed` regardless of thread count.
///
/// # Safety
/// `g` must be a live handle; `h1`, `h2` valid for `len` doubles; `out`
/// writable.
#[no_mangle]
pub unsafe extern "C" fn of_mc_orbital_integral(
    g: *const OfGroup,
    h1: *const f64,
    h2: *const f64,
    len: usize,
    t: f64,
    n: u64,
    seed: u64,
    out: *mut OfEstimate,
) -> OfStatus {
    guard(|| {
        let g = &g.as_ref().ok_or(Fail::Null("group"))?.inner;
        let rs = g.root_system();
        let p1 = point(rs, slice_arg(h1, len, "h1")?)?;
        let p2 = point(rs, slice_arg(h2, len, "h2")?)?;
        let out = out_arg(out, "out")?;
        let n = usize::try_from(n).map_err(|_| Error::Resource("sample count too large".into()))?;
        let est = groups::mc_orbital_integral(g, &p1, &p2, t, n, seed)?;
        *out = OfEstimate {
            mean_re: est.mean.re,
            mean_im: est.mean.im,
            std_error: est.stderr,
            n_samples: est.n_samples as u64,
        };
        Ok(())
    })
}
