//! C interface to `rtlmark`.
//!
//! Keys and detection reports are opaque handles owned by the caller and
//! released with their `_free` function. Strings returned by the library are
//! NUL-terminated, heap-allocated and released with [`rtlmark_string_free`].
//! Every fallible call returns an [`RtlmarkStatus`]; on failure the message is
//! available from [`rtlmark_last_error`] on the same thread.

use rtlmark::detect::{detect, DetectionReport, NullModel, Verdict, DEFAULT_TAU};
use rtlmark::embed::{embed, plan, verify, EmbedError, EmbedObjective};
use rtlmark::key::WatermarkKey;
use rtlmark::payload::{encode_payload, DEFAULT_MAX_PAYLOAD};
use rtlmark::sim::EquivBudget;
use rtlmark::verilog::{parse, SourceText};
use std::cell::RefCell;
use std::ffi::{c_char, c_double, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RtlmarkStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    InvalidKey = 3,
    InvalidArgument = 4,
    ParseError = 5,
    InsufficientCapacity = 6,
    EmbedFailed = 7,
    Internal = 8,
}

/// Opaque key handle.
pub struct RtlmarkKey(WatermarkKey);

/// Opaque detection report handle.
pub struct RtlmarkReport(DetectionReport);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let mut m = msg.into().into_bytes();
    m.retain(|b| *b != 0);
    let c = CString::new(m).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn fail(status: RtlmarkStatus, msg: impl Into<String>) -> RtlmarkStatus {
    set_error(msg);
    status
}

fn guard(f: impl FnOnce() -> RtlmarkStatus) -> RtlmarkStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            fail(RtlmarkStatus::Internal, format!("internal error: {msg}"))
        }
    }
}

/// # Safety
/// `p` is null or a valid NUL-terminated string.
unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, RtlmarkStatus> {
    if p.is_null() {
        return Err(fail(RtlmarkStatus::NullArgument, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(RtlmarkStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

fn into_c(s: String) -> *mut c_char {
    let mut b = s.into_bytes();
    b.retain(|c| *c != 0);
    CString::new(b).expect("interior NULs removed").into_raw()
}

fn tau_or_default(tau: c_double) -> Result<f64, RtlmarkStatus> {
    let t = if tau == 0.0 { DEFAULT_TAU } else { tau };
    if t > 0.0 && t < 1.0 {
        Ok(t)
    } else {
        Err(fail(RtlmarkStatus::InvalidArgument, format!("tau must lie in (0,1), got {tau}")))
    }
}

/// Message of the last failed call on this thread, or null. The pointer stays
/// valid until the next library call on the same thread.
#[no_mangle]
pub extern "C" fn rtlmark_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Parse a hex-encoded key.
///
/// # Safety
/// `hex` is a NUL-terminated string; `out` points to writable storage.
#[no_mangle]
pub unsafe extern "C" fn rtlmark_key_from_hex(hex: *const c_char, out: *mut *mut RtlmarkKey) -> RtlmarkStatus {
    guard(|| {
        if out.is_null() {
            return fail(RtlmarkStatus::NullArgument, "out is null");
        }
        let h = match text(hex, "hex") {
            Ok(h) => h,
            Err(s) => return s,
        };
        match WatermarkKey::from_hex(h) {
            Ok(k) => {
                *out = Box::into_raw(Box::new(RtlmarkKey(k)));
                RtlmarkStatus::Ok
            }
            Err(e) => fail(RtlmarkStatus::InvalidKey, e.to_string()),
        }
    })
}

/// Generate a fresh random key.
///
/// # Safety
/// `out` points to writable storage.
#[no_mangle]
pub unsafe extern "C" fn rtlmark_key_generate(out: *mut *mut RtlmarkKey) -> RtlmarkStatus {
    guard(|| {
        if out.is_null() {
            return fail(RtlmarkStatus::NullArgument, "out is null");
        }
        *out = Box::into_raw(Box::new(RtlmarkKey(WatermarkKey::generate())));
        RtlmarkStatus::Ok
    })
}

/// Hex encoding of the key secret; free with `rtlmark_string_free`.
///
/// # Safety
/// `key` is a live handle.
#[no_mangle]
pub unsafe extern "C" fn rtlmark_key_to_hex(key: *const RtlmarkKey) -> *mut c_char {
    match key.as_ref() {
        Some(k) => into_c(k.0.to_hex()),
        None => {
            set_error("key is null");
            ptr::null_mut()
        }
    }
}

/// Short public identifier of the key; free with `rtlmark_string_free`.
///
/// # Safety
/// `key` is a live handle.
#[no_mangle]
pub unsafe extern "C" fn rtlmark_key_id(key: *const RtlmarkKey) -> *mut c_char {
    match key.as_ref() {
        Some(k) => into_c(k.0.id().to_string()),
        None => {
            set_error("key is null");
            ptr::null_mut()
        }
    }
}

/// # Safety
/// `key` is null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rtlmark_key_free(key: *mut RtlmarkKey) {
    if !key.is_null() {
        drop(Box::from_raw(key));
    }
}

/// Watermark `source`. `tau` of 0 selects the default threshold. On success
/// `*out_source` receives the watermarked text.
///
/// # Safety
/// `key` is a live handle; string arguments are NUL-terminated; `out_source`
/// points to writable storage.
#[no_mangle]
pub unsafe extern "C" fn rtlmark_embed(
    key: *const RtlmarkKey,
    source: *const c_char,
    model: *const c_char,
    developer: *const c_char,
    tau: c_double,
    out_source: *mut *mut c_char,
) -> RtlmarkStatus {
    guard(|| {
        let Some(key) = key.as_ref() else {
            return fail(RtlmarkStatus::NullArgument, "key is null");
        };
        if out_source.is_null() {
            return fail(RtlmarkStatus::NullArgument, "out_source is null");
        }
        let (src, model, dev) = match (text(source, "source"), text(model, "model"), text(developer, "developer")) {
            (Ok(s), Ok(m), Ok(d)) => (s, m, d),
            (Err(e), _, _) | (_, Err(e), _) | (_, _, Err(e)) => return e,
        };
        let tau = match tau_or_default(tau) {
            Ok(t) => t,
            Err(s) => return s,
        };
        let payload = match encode_payload(model, dev, &key.0, DEFAULT_MAX_PAYLOAD) {
            Ok(p) => p,
            Err(e) => return fail(RtlmarkStatus::InvalidArgument, e.to_string()),
        };
        let ast = match parse(&SourceText::new(src, "<ffi>")) {
            Ok(a) => a,
            Err(e) => return fail(RtlmarkStatus::ParseError, e.to_string()),
        };
        let objective = EmbedObjective { tau, ..EmbedObjective::default() };
        let null = NullModel::default();
        let result = plan(&ast, &key.0, &payload, &objective, &null).and_then(|p| embed(&ast, &p, &key.0, &payload, &EquivBudget::default()));
        match result {
            Ok(doc) => {
                if verify(&doc, &key.0, &null, tau).verdict != Verdict::Watermarked {
                    return fail(RtlmarkStatus::EmbedFailed, "embedded output scores below tau");
                }
                *out_source = into_c(doc.source.content);
                RtlmarkStatus::Ok
            }
            Err(e @ EmbedError::InsufficientCapacity { .. }) => fail(RtlmarkStatus::InsufficientCapacity, e.to_string()),
            Err(e) => fail(RtlmarkStatus::EmbedFailed, e.to_string()),
        }
    })
}

/// Score `source` under `key` with the default null model. `tau` of 0 selects
/// the default threshold. Unparsable input yields a clean report.
///
/// # Safety
/// `key` is a live handle; `source` is NUL-terminated; `out` points to
/// writable storage.
#[no_mangle]
pub unsafe extern "C" fn rtlmark_detect(
    key: *const RtlmarkKey,
    source: *const c_char,
    tau: c_double,
    out: *mut *mut RtlmarkReport,
) -> RtlmarkStatus {
    guard(|| {
        let Some(key) = key.as_ref() else {
            return fail(RtlmarkStatus::NullArgument, "key is null");
        };
        if out.is_null() {
            return fail(RtlmarkStatus::NullArgument, "out is null");
        }
        let src = match text(source, "source") {
            Ok(s) => s,
            Err(e) => return e,
        };
        let tau = match tau_or_default(tau) {
            Ok(t) => t,
            Err(s) => return s,
        };
        let r = detect(&SourceText::new(src, "<ffi>"), &key.0, &NullModel::default(), tau);
        *out = Box::into_raw(Box::new(RtlmarkReport(r)));
        RtlmarkStatus::Ok
    })
}

/// 1 watermarked, 0 clean, -1 for a null handle.
///
/// # Safety
/// `report` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rtlmark_report_is_watermarked(report: *const RtlmarkReport) -> c_int {
    match report.as_ref() {
        Some(r) => (r.0.verdict == Verdict::Watermarked) as c_int,
        None => -1,
    }
}

/// Detection confidence in [0,1], NaN for a null handle.
///
/// # Safety
/// `report` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rtlmark_report_confidence(report: *const RtlmarkReport) -> c_double {
    report.as_ref().map_or(f64::NAN, |r| r.0.confidence)
}

/// Full report as JSON; free with `rtlmark_string_free`.
///
/// # Safety
/// `report` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rtlmark_report_json(report: *const RtlmarkReport) -> *mut c_char {
    match report.as_ref() {
        Some(r) => into_c(serde_json::to_string(&r.0).expect("report serializes")),
        None => {
            set_error("report is null");
            ptr::null_mut()
        }
    }
}

/// # Safety
/// `report` is null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rtlmark_report_free(report: *mut RtlmarkReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// # Safety
/// `s` is null or a string returned by this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rtlmark_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const DESIGN: &str = "module ctl(input clk, input rst, input [3:0] d, output reg [23:0] acc);\n\
        always @(posedge clk) begin\n  if (rst) acc <= 24'd0;\n  else acc <= acc + d;\nend\nendmodule\n";

    fn c(s: &str) -> CString {
        CString::new(s).unwrap()
    }

    unsafe fn key(seed: u64) -> *mut RtlmarkKey {
        let hex = c(&WatermarkKey::from_seed(seed).to_hex());
        let mut k = ptr::null_mut();
        assert_eq!(rtlmark_key_from_hex(hex.as_ptr(), &mut k), RtlmarkStatus::Ok);
        k
    }

    unsafe fn take(p: *mut c_char) -> String {
        let s = CStr::from_ptr(p).to_str().unwrap().to_string();
        rtlmark_string_free(p);
        s
    }

    #[test]
    fn embed_then_detect() {
        unsafe {
            let k = key(3);
            let (src, model, dev) = (c(DESIGN), c("m"), c("d"));
            let mut marked = ptr::null_mut();
            assert_eq!(rtlmark_embed(k, src.as_ptr(), model.as_ptr(), dev.as_ptr(), 0.0, &mut marked), RtlmarkStatus::Ok);
            let marked = c(&take(marked));

            let mut r = ptr::null_mut();
            assert_eq!(rtlmark_detect(k, marked.as_ptr(), 0.0, &mut r), RtlmarkStatus::Ok);
            assert_eq!(rtlmark_report_is_watermarked(r), 1);
            assert!(rtlmark_report_confidence(r) >= 0.95);
            assert!(take(rtlmark_report_json(r)).contains("\"verdict\":\"watermarked\""));
            rtlmark_report_free(r);

            let mut r = ptr::null_mut();
            assert_eq!(rtlmark_detect(k, src.as_ptr(), 0.0, &mut r), RtlmarkStatus::Ok);
            assert_eq!(rtlmark_report_is_watermarked(r), 0);
            rtlmark_report_free(r);

            let other = key(4);
            let mut r = ptr::null_mut();
            assert_eq!(rtlmark_detect(other, marked.as_ptr(), 0.0, &mut r), RtlmarkStatus::Ok);
            assert_eq!(rtlmark_report_is_watermarked(r), 0);
            rtlmark_report_free(r);
            rtlmark_key_free(other);
            rtlmark_key_free(k);
        }
    }

    #[test]
    fn errors_are_reported() {
        unsafe {
            let mut k = ptr::null_mut();
            let bad = c("zz");
            assert_eq!(rtlmark_key_from_hex(bad.as_ptr(), &mut k), RtlmarkStatus::InvalidKey);
            assert!(k.is_null());
            assert!(!rtlmark_last_error().is_null());
            assert_eq!(rtlmark_key_from_hex(ptr::null(), &mut k), RtlmarkStatus::NullArgument);

            let k = key(1);
            let (src, m) = (c("module m(input a;"), c("m"));
            let mut out = ptr::null_mut();
            assert_eq!(rtlmark_embed(k, src.as_ptr(), m.as_ptr(), m.as_ptr(), 0.0, &mut out), RtlmarkStatus::ParseError);
            let msg = CStr::from_ptr(rtlmark_last_error()).to_str().unwrap();
            assert!(msg.contains("1:"), "{msg}");
            let tiny = c("module w(input a, output y); assign y = a; endmodule");
            assert_eq!(rtlmark_embed(k, tiny.as_ptr(), m.as_ptr(), m.as_ptr(), 0.0, &mut out), RtlmarkStatus::InsufficientCapacity);
            let mut r = ptr::null_mut();
            assert_eq!(rtlmark_detect(k, tiny.as_ptr(), 1.5, &mut r), RtlmarkStatus::InvalidArgument);
            assert_eq!(rtlmark_detect(ptr::null(), tiny.as_ptr(), 0.0, &mut r), RtlmarkStatus::NullArgument);
            assert_eq!(rtlmark_report_is_watermarked(ptr::null()), -1);
            assert!(rtlmark_report_confidence(ptr::null()).is_nan());

            let id = take(rtlmark_key_id(k));
            assert_eq!(id, WatermarkKey::from_seed(1).id());
            assert_eq!(take(rtlmark_key_to_hex(k)), WatermarkKey::from_seed(1).to_hex());
            rtlmark_key_free(k);
            rtlmark_key_free(ptr::null_mut());
            rtlmark_string_free(ptr::null_mut());
        }
    }

    #[test]
    fn generated_keys_differ() {
        unsafe {
            let (mut a, mut b) = (ptr::null_mut(), ptr::null_mut());
            assert_eq!(rtlmark_key_generate(&mut a), RtlmarkStatus::Ok);
            assert_eq!(rtlmark_key_generate(&mut b), RtlmarkStatus::Ok);
            assert_ne!(take(rtlmark_key_to_hex(a)), take(rtlmark_key_to_hex(b)));
            rtlmark_key_free(a);
            rtlmark_key_free(b);
        }
    }
}
