//! C ABI for the projnull toolkit.
//!
//! The surface is small: parse a metric (from a metric-file JSON document
//! or the builtin catalog) into an opaque handle, query the Weyl nullity at
//! a point, and run a full check suite from a configuration JSON document,
//! receiving the report as a JSON string. All functions return an error
//! code; `pn_last_error` gives the message for the most recent failure on
//! the calling thread. Strings returned by the library are freed with
//! `pn_string_free`, handles with `pn_metric_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::ptr;

use projnull::chart::MetricSpec;
use projnull::suite::{run_suite, SuiteConfig};
use projnull::{curvature, nullity, Error};

/// Result codes of every entry point.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum PnStatus {
    PnOk = 0,
    /// A pointer argument was null.
    PnNullArgument = 1,
    /// A string argument was not valid UTF-8.
    PnBadUtf8 = 2,
    /// The input document violated the schema; see `pn_last_error`.
    PnSchema = 3,
    /// The point has no Weyl nullity.
    PnEmptyKernel = 4,
    /// Any other evaluation failure; see `pn_last_error`.
    PnEvaluation = 5,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_error(message: &str) {
    let clean = message.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(clean).unwrap();
    });
}

fn fail(e: &Error) -> PnStatus {
    set_error(&e.to_string());
    match e {
        Error::Schema { .. } | Error::Parse { .. } => PnStatus::PnSchema,
        Error::EmptyKernel => PnStatus::PnEmptyKernel,
        _ => PnStatus::PnEvaluation,
    }
}

/// An opaque parsed metric.
pub struct PnMetric {
    spec: MetricSpec,
}

/// Message for the most recent error on this thread. The pointer stays
/// valid until the next failing call on the same thread; do not free it.
#[no_mangle]
pub extern "C" fn pn_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

unsafe fn read_str<'a>(s: *const c_char) -> Result<&'a str, PnStatus> {
    if s.is_null() {
        set_error("null string argument");
        return Err(PnStatus::PnNullArgument);
    }
    CStr::from_ptr(s).to_str().map_err(|_| {
        set_error("string argument is not valid UTF-8");
        PnStatus::PnBadUtf8
    })
}

fn emit_metric(spec: MetricSpec, out: *mut *mut PnMetric) -> PnStatus {
    let handle = Box::new(PnMetric { spec });
    unsafe { *out = Box::into_raw(handle) };
    PnStatus::PnOk
}

/// Parses a metric-file JSON document into a handle.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pn_metric_parse_json(
    json: *const c_char,
    out: *mut *mut PnMetric,
) -> PnStatus {
    if out.is_null() {
        set_error("null output argument");
        return PnStatus::PnNullArgument;
    }
    let src = match read_str(json) {
        Ok(s) => s,
        Err(code) => return code,
    };
    match projnull::io::parse_metric_json(src) {
        Ok(input) => emit_metric(input.metric, out),
        Err(e) => fail(&e),
    }
}

/// Loads a builtin catalog metric (default parameters) into a handle.
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pn_metric_from_catalog(
    name: *const c_char,
    out: *mut *mut PnMetric,
) -> PnStatus {
    if out.is_null() {
        set_error("null output argument");
        return PnStatus::PnNullArgument;
    }
    let name = match read_str(name) {
        Ok(s) => s,
        Err(code) => return code,
    };
    match projnull::catalog::lookup(name, &Default::default()) {
        Ok(entry) => emit_metric(entry.metric, out),
        Err(e) => fail(&e),
    }
}

/// Frees a metric handle. A null handle is ignored.
///
/// # Safety
/// `metric` must have come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn pn_metric_free(metric: *mut PnMetric) {
    if !metric.is_null() {
        drop(Box::from_raw(metric));
    }
}

/// Chart dimension of the metric; 0 for a null handle.
///
/// # Safety
/// `metric` must be a live handle from this library, or null.
#[no_mangle]
pub unsafe extern "C" fn pn_metric_dim(metric: *const PnMetric) -> usize {
    if metric.is_null() {
        return 0;
    }
    (*metric).spec.dim()
}

/// Weyl nullity at a chart point: writes the kernel dimension and the
/// eigenvalue B (the latter only when the kernel is nonempty).
///
/// # Safety
/// `point` must hold `pn_metric_dim(metric)` doubles; the output pointers
/// must be valid.
#[no_mangle]
pub unsafe extern "C" fn pn_nullity_at(
    metric: *const PnMetric,
    point: *const f64,
    out_dim: *mut usize,
    out_b: *mut f64,
) -> PnStatus {
    if metric.is_null() || point.is_null() || out_dim.is_null() || out_b.is_null() {
        set_error("null argument");
        return PnStatus::PnNullArgument;
    }
    let m = &*metric;
    let point = std::slice::from_raw_parts(point, m.spec.dim());
    let pack = match curvature::pack_at(&m.spec, point) {
        Ok(p) => p,
        Err(e) => return fail(&e),
    };
    let space = nullity::nullity_space(&pack, nullity::DEFAULT_RANK_TOL);
    *out_dim = space.dim();
    if space.dim() == 0 {
        set_error("no Weyl nullity at this point");
        return PnStatus::PnEmptyKernel;
    }
    match nullity::nullity_report(&pack, &space) {
        Ok(report) => {
            *out_b = report.b;
            PnStatus::PnOk
        }
        Err(e) => fail(&e),
    }
}

/// Runs a check suite from a configuration JSON document (the same schema
/// as `projnull run --config`) and returns the report as a JSON string in
/// `out_report`. Free the string with `pn_string_free`. `out_passed`
/// receives 1 when no check failed.
///
/// # Safety
/// `config_json` must be a NUL-terminated string; the output pointers must
/// be valid.
#[no_mangle]
pub unsafe extern "C" fn pn_run_suite_json(
    config_json: *const c_char,
    out_report: *mut *mut c_char,
    out_passed: *mut i32,
) -> PnStatus {
    if out_report.is_null() || out_passed.is_null() {
        set_error("null output argument");
        return PnStatus::PnNullArgument;
    }
    let src = match read_str(config_json) {
        Ok(s) => s,
        Err(code) => return code,
    };
    let config: SuiteConfig = match serde_json::from_str(src) {
        Ok(c) => c,
        Err(e) => {
            set_error(&e.to_string());
            return PnStatus::PnSchema;
        }
    };
    match run_suite(&config) {
        Ok(output) => {
            let json = output.report.to_json().replace('\0', " ");
            *out_report = CString::new(json).unwrap().into_raw();
            *out_passed = output.report.passed() as i32;
            PnStatus::PnOk
        }
        Err(e) => {
            *out_report = ptr::null_mut();
            fail(&e)
        }
    }
}

/// Frees a string returned by this library. A null pointer is ignored.
///
/// # Safety
/// `s` must have come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn pn_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
