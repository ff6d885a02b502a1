//! C ABI for the Webster curvature prescription toolkit.
//!
//! Conventions:
//! - every fallible entry point returns a [`WcpStatus`]; results travel
//!   through out-pointers;
//! - curvature polynomials are opaque [`WcpK`] handles created by
//!   `wcp_k_load` / `wcp_k_parse` and released by `wcp_k_free`;
//! - JSON reports are heap strings released by `wcp_string_free`;
//! - `wcp_last_error` retrieves the message of the most recent failure on
//!   the calling thread.
//!
//! The matching header is maintained by hand in `include/wcp.h` and
//! checked against this surface by the FFI tests.

use std::cell::RefCell;
use std::ffi::{CStr, CString, c_char};
use std::path::PathBuf;

use wcp_core::cli::{self, Command, RunConfig};
use wcp_core::error::Error;
use wcp_core::heisenberg::{self, HPoint};
use wcp_core::interaction;
use wcp_core::report;
use wcp_core::sphere::ManifoldFn;

/// Status codes mirrored in `include/wcp.h`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WcpStatus {
    Ok = 0,
    /// Internal or numerical failure; message via `wcp_last_error`.
    Error = 1,
    /// A hypothesis of the degree theorem failed (not Morse, vanishing
    /// condition, degenerate least eigenvalue, nonpositive K).
    HypothesisFailed = 2,
    NullArgument = 3,
    InvalidUtf8 = 4,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(e: &Error) -> WcpStatus {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = e.to_string());
    if e.is_hypothesis_failure() {
        WcpStatus::HypothesisFailed
    } else {
        WcpStatus::Error
    }
}

fn clear_error() {
    LAST_ERROR.with(|slot| slot.borrow_mut().clear());
}

/// Opaque curvature polynomial handle.
pub struct WcpK {
    inner: ManifoldFn,
}

/// Copy the last error message of this thread into `buf` (NUL
/// terminated, truncated to `cap`); returns the full message length.
///
/// # Safety
/// `buf` must point to writable memory of at least `cap` bytes, or be
/// null (in which case only the length is returned).
#[no_mangle]
pub unsafe extern "C" fn wcp_last_error(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|slot| {
        let msg = slot.borrow();
        let bytes = msg.as_bytes();
        if !buf.is_null() && cap > 0 {
            let n = bytes.len().min(cap - 1);
            unsafe {
                std::ptr::copy_nonoverlapping(bytes.as_ptr(), buf as *mut u8, n);
                *buf.add(n) = 0;
            }
        }
        bytes.len()
    })
}

/// Load a curvature polynomial from a monomial-format file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be a valid pointer.
/// On success `*out` owns a handle that must go to `wcp_k_free`.
#[no_mangle]
pub unsafe extern "C" fn wcp_k_load(path: *const c_char, out: *mut *mut WcpK) -> WcpStatus {
    if path.is_null() || out.is_null() {
        return WcpStatus::NullArgument;
    }
    let Ok(path) = unsafe { CStr::from_ptr(path) }.to_str() else {
        return WcpStatus::InvalidUtf8;
    };
    match cli::parse_k_spec(std::path::Path::new(path)) {
        Ok(k) => {
            clear_error();
            unsafe { *out = Box::into_raw(Box::new(WcpK { inner: k })) };
            WcpStatus::Ok
        }
        Err(e) => set_error(&e),
    }
}

/// Parse a curvature polynomial from monomial-format text.
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` a valid pointer. The
/// returned handle must go to `wcp_k_free`.
#[no_mangle]
pub unsafe extern "C" fn wcp_k_parse(text: *const c_char, out: *mut *mut WcpK) -> WcpStatus {
    if text.is_null() || out.is_null() {
        return WcpStatus::NullArgument;
    }
    let Ok(text) = unsafe { CStr::from_ptr(text) }.to_str() else {
        return WcpStatus::InvalidUtf8;
    };
    match wcp_core::sphere::parse_k_text(text) {
        Ok(k) => {
            clear_error();
            unsafe { *out = Box::into_raw(Box::new(WcpK { inner: k })) };
            WcpStatus::Ok
        }
        Err(e) => set_error(&e),
    }
}

/// Release a curvature handle. Null is a no-op.
///
/// # Safety
/// `k` must come from `wcp_k_load`/`wcp_k_parse` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn wcp_k_free(k: *mut WcpK) {
    if !k.is_null() {
        drop(unsafe { Box::from_raw(k) });
    }
}

/// Evaluate the curvature polynomial at an ambient point of the sphere.
///
/// # Safety
/// `k` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wcp_k_eval(
    k: *const WcpK,
    x1: f64,
    x2: f64,
    x3: f64,
    x4: f64,
    out: *mut f64,
) -> WcpStatus {
    if k.is_null() || out.is_null() {
        return WcpStatus::NullArgument;
    }
    let k = unsafe { &*k };
    unsafe { *out = k.inner.eval([x1, x2, x3, x4]) };
    WcpStatus::Ok
}

fn json_out(report: &report::Jv, out_json: *mut *mut c_char) -> WcpStatus {
    let text = report::to_string(report);
    match CString::new(text) {
        Ok(c) => {
            unsafe { *out_json = c.into_raw() };
            clear_error();
            WcpStatus::Ok
        }
        Err(_) => WcpStatus::Error,
    }
}

/// Total degree report as a JSON string.
///
/// # Safety
/// `k` must be a live handle; `out_json` valid. The returned string must
/// go to `wcp_string_free`.
#[no_mangle]
pub unsafe extern "C" fn wcp_degree_json(
    k: *const WcpK,
    seed: u64,
    out_json: *mut *mut c_char,
) -> WcpStatus {
    if k.is_null() || out_json.is_null() {
        return WcpStatus::NullArgument;
    }
    let handle = unsafe { &*k };
    let mut cfg = RunConfig::new(Command::Degree);
    cfg.seed = seed;
    match interaction::total_degree_seeded(&handle.inner, seed) {
        Ok(rep) => {
            let mut o = report::Jv::obj();
            o.push("schema", report::Jv::Int(1));
            o.push("total_degree", report::Jv::Int(rep.total_degree));
            o.push("existence", report::Jv::Bool(rep.existence));
            o.push(
                "critical_point_count",
                report::Jv::Int(rep.critical_points.len() as i64),
            );
            let mut subs = Vec::new();
            for s in &rep.admissible {
                let mut e = report::Jv::obj();
                e.push(
                    "indices",
                    report::Jv::ints(&s.indices.iter().map(|&i| i as i64).collect::<Vec<_>>()),
                );
                e.push("mu", report::Jv::Num(s.mu));
                e.push("cluster_sign", report::Jv::Int(s.cluster_sign));
                subs.push(e);
            }
            o.push("admissible_subsets", report::Jv::Arr(subs));
            let _ = cfg;
            json_out(&o, out_json)
        }
        Err(e) => set_error(&e),
    }
}

/// Total degree alone (cheaper to consume than JSON).
///
/// # Safety
/// `k` must be a live handle; `out_degree` and `out_existence` valid.
#[no_mangle]
pub unsafe extern "C" fn wcp_total_degree(
    k: *const WcpK,
    seed: u64,
    out_degree: *mut i64,
    out_existence: *mut bool,
) -> WcpStatus {
    if k.is_null() || out_degree.is_null() || out_existence.is_null() {
        return WcpStatus::NullArgument;
    }
    let handle = unsafe { &*k };
    match interaction::total_degree_seeded(&handle.inner, seed) {
        Ok(rep) => {
            unsafe {
                *out_degree = rep.total_degree;
                *out_existence = rep.existence;
            }
            clear_error();
            WcpStatus::Ok
        }
        Err(e) => set_error(&e),
    }
}

/// The three exact bubble integrals at the given quadrature tolerance.
///
/// # Safety
/// All out-pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn wcp_verify_integrals(
    rel_tol: f64,
    out_i3: *mut f64,
    out_i4: *mut f64,
    out_iw: *mut f64,
) -> WcpStatus {
    if out_i3.is_null() || out_i4.is_null() || out_iw.is_null() {
        return WcpStatus::NullArgument;
    }
    if rel_tol <= 0.0 || rel_tol > 0.1 {
        LAST_ERROR.with(|s| *s.borrow_mut() = "rel_tol out of range (0, 0.1]".into());
        return WcpStatus::Error;
    }
    match cli::verify_integrals(rel_tol) {
        Ok(v) => {
            unsafe {
                *out_i3 = v.i3;
                *out_i4 = v.i4;
                *out_iw = v.iw;
            }
            clear_error();
            WcpStatus::Ok
        }
        Err(e) => set_error(&e),
    }
}

/// Koranyi gauge norm of a Heisenberg point.
#[no_mangle]
pub extern "C" fn wcp_koranyi_norm(x: f64, y: f64, t: f64) -> f64 {
    heisenberg::koranyi_norm(HPoint::new(x, y, t))
}

/// The Jerison-Lee profile `U` at a Heisenberg point.
#[no_mangle]
pub extern "C" fn wcp_bubble_u(x: f64, y: f64, t: f64) -> f64 {
    wcp_core::bubble::eval_u(HPoint::new(x, y, t))
}

/// Release a string returned by this library. Null is a no-op.
///
/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn wcp_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(unsafe { CString::from_raw(s) });
    }
}

/// Run an arbitrary CLI-style command and return its JSON report.
/// `command` is one of the CLI subcommands; `k_path` may be null.
///
/// # Safety
/// Strings must be NUL-terminated; `out_json` valid; result freed with
/// `wcp_string_free`.
#[no_mangle]
pub unsafe extern "C" fn wcp_run_json(
    command: *const c_char,
    k_path: *const c_char,
    seed: u64,
    out_json: *mut *mut c_char,
) -> WcpStatus {
    if command.is_null() || out_json.is_null() {
        return WcpStatus::NullArgument;
    }
    let Ok(cmd) = unsafe { CStr::from_ptr(command) }.to_str() else {
        return WcpStatus::InvalidUtf8;
    };
    let mut args = vec![cmd.to_string()];
    if !k_path.is_null() {
        let Ok(p) = unsafe { CStr::from_ptr(k_path) }.to_str() else {
            return WcpStatus::InvalidUtf8;
        };
        args.push("--k".into());
        args.push(p.into());
    }
    args.push("--seed".into());
    args.push(seed.to_string());
    let cfg = match cli::parse_args(&args) {
        Ok(cfg) => cfg,
        Err(e) => return set_error(&e),
    };
    let cfg = RunConfig { k_file: cfg.k_file.clone().map(PathBuf::from), ..cfg };
    match cli::run(&cfg) {
        Ok(report) => json_out(&report, out_json),
        Err(e) => set_error(&e),
    }
}
