//! C ABI over the holotrans pipeline.
//!
//! Objects cross the boundary as opaque handles created by `ht_*` functions
//! and released with the matching `*_free`. Every call returns an
//! [`HtStatus`]; on failure the message is available from
//! [`ht_last_error`] until the next failing call on the same thread.
//! Strings returned through `char **` are owned by the caller and released
//! with [`ht_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use holotrans::pipeline::{self, RunConfig, RunRecord};
use holotrans::sections::{evaluate, SectionField};
use holotrans::Error;

/// Status codes; the values match the CLI exit codes.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HtStatus {
    Ok = 0,
    Error = 1,
    TransversalityFailure = 2,
    OracleDisagreement = 3,
    ConfigError = 4,
    NullPointer = 5,
    InvalidUtf8 = 6,
    Panic = 7,
    NotAvailable = 8,
}

/// A validated run configuration.
pub struct HtConfig(RunConfig);

/// A completed run at one degree.
pub struct HtRecord(RunRecord);

/// A section on the torus.
pub struct HtSection(SectionField);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> HtStatus {
    match e.exit_code() {
        2 => HtStatus::TransversalityFailure,
        3 => HtStatus::OracleDisagreement,
        4 => HtStatus::ConfigError,
        _ => HtStatus::Error,
    }
}

fn fail(status: HtStatus, msg: &str) -> HtStatus {
    set_error(msg);
    status
}

/// Run `f`, mapping library errors and panics to status codes.
fn guard(f: impl FnOnce() -> Result<(), HtStatus>) -> HtStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => HtStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => fail(HtStatus::Panic, "panic inside holotrans"),
    }
}

fn lib<T>(r: holotrans::Result<T>) -> Result<T, HtStatus> {
    r.map_err(|e| fail(status_of(&e), &e.to_string()))
}

unsafe fn str_arg<'a>(p: *const c_char) -> Result<&'a str, HtStatus> {
    if p.is_null() {
        return Err(fail(HtStatus::NullPointer, "null string argument"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(HtStatus::InvalidUtf8, "string argument is not UTF-8"))
}

unsafe fn ref_arg<'a, T>(p: *const T) -> Result<&'a T, HtStatus> {
    p.as_ref().ok_or_else(|| fail(HtStatus::NullPointer, "null handle"))
}

unsafe fn write_out<T>(out: *mut T, value: T) -> Result<(), HtStatus> {
    if out.is_null() {
        return Err(fail(HtStatus::NullPointer, "null output pointer"));
    }
    out.write(value);
    Ok(())
}

unsafe fn write_string(out: *mut *mut c_char, s: String) -> Result<(), HtStatus> {
    let c = CString::new(s).map_err(|_| fail(HtStatus::Error, "string contains NUL"))?;
    write_out(out, c.into_raw())
}

/// Message of the last failing call on this thread; empty if none. The
/// pointer stays valid until the next failing call on this thread.
#[no_mangle]
pub extern "C" fn ht_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Release a string returned by this library.
///
/// # Safety
/// `s` is null or was returned through a `char **` of this library.
#[no_mangle]
pub unsafe extern "C" fn ht_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parse a TOML configuration with dotted keys.
///
/// # Safety
/// `toml` is a NUL-terminated string; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn ht_config_parse(toml: *const c_char, out: *mut *mut HtConfig) -> HtStatus {
    guard(|| {
        let cfg = lib(RunConfig::from_toml_str(str_arg(toml)?))?;
        write_out(out, Box::into_raw(Box::new(HtConfig(cfg))))
    })
}

/// Serialize a configuration back to TOML.
///
/// # Safety
/// `cfg` is a live handle; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn ht_config_to_toml(cfg: *const HtConfig, out: *mut *mut c_char) -> HtStatus {
    guard(|| {
        let text = lib(ref_arg(cfg)?.0.to_toml_string())?;
        write_string(out, text)
    })
}

/// # Safety
/// `cfg` is null or a handle from [`ht_config_parse`], not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ht_config_free(cfg: *mut HtConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Run the stratum induction at degree `k` from the zero section. The
/// returned status reflects the run itself; the record's verdict is read
/// with [`ht_record_verdict`].
///
/// # Safety
/// `cfg` is a live handle; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn ht_run(cfg: *const HtConfig, k: u32, out: *mut *mut HtRecord) -> HtStatus {
    guard(|| {
        let rec = lib(pipeline::run_single(&ref_arg(cfg)?.0, k))?;
        write_out(out, Box::into_raw(Box::new(HtRecord(rec))))
    })
}

/// `Ok`, `TransversalityFailure` or `OracleDisagreement`.
///
/// # Safety
/// `rec` is a live handle.
#[no_mangle]
pub unsafe extern "C" fn ht_record_verdict(rec: *const HtRecord) -> HtStatus {
    guard(|| lib(ref_arg(rec)?.0.verdict()))
}

/// Signed zero count of a hypersurface run.
///
/// # Safety
/// `rec` is a live handle; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn ht_record_zero_count(rec: *const HtRecord, out: *mut i32) -> HtStatus {
    guard(|| match &ref_arg(rec)?.0.measurement.counts.zeros {
        Some(z) => write_out(out, z.oracle.count),
        None => Err(fail(HtStatus::NotAvailable, "the run has no zero count")),
    })
}

/// Number of critical points of a pencil run.
///
/// # Safety
/// `rec` is a live handle; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn ht_record_critical_count(rec: *const HtRecord, out: *mut i32) -> HtStatus {
    guard(|| match &ref_arg(rec)?.0.measurement.counts.pencil {
        Some(p) => write_out(out, p.critical.len() as i32),
        None => Err(fail(HtStatus::NotAvailable, "the run has no pencil data")),
    })
}

/// Number of strata carrying a margin report.
///
/// # Safety
/// `rec` is a live handle; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn ht_record_stratum_count(rec: *const HtRecord, out: *mut usize) -> HtStatus {
    guard(|| write_out(out, ref_arg(rec)?.0.measurement.strata.len()))
}

/// Grid and certified margins of stratum `index`.
///
/// # Safety
/// `rec` is a live handle; `eta_grid` and `eta_cert` are writable.
#[no_mangle]
pub unsafe extern "C" fn ht_record_margins(rec: *const HtRecord, index: usize, eta_grid: *mut f64, eta_cert: *mut f64) -> HtStatus {
    guard(|| {
        let strata = &ref_arg(rec)?.0.measurement.strata;
        let r = strata
            .get(index)
            .ok_or_else(|| fail(HtStatus::NotAvailable, &format!("stratum {index} of {}", strata.len())))?;
        write_out(eta_grid, r.eta_grid)?;
        write_out(eta_cert, r.eta_cert)
    })
}

/// The full record as JSON.
///
/// # Safety
/// `rec` is a live handle; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn ht_record_to_json(rec: *const HtRecord, out: *mut *mut c_char) -> HtStatus {
    guard(|| {
        let text = lib(serde_json::to_string(&ref_arg(rec)?.0).map_err(Error::from))?;
        write_string(out, text)
    })
}

/// A copy of the record's final section.
///
/// # Safety
/// `rec` is a live handle; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn ht_record_section(rec: *const HtRecord, out: *mut *mut HtSection) -> HtStatus {
    guard(|| {
        let s = ref_arg(rec)?.0.section.clone();
        write_out(out, Box::into_raw(Box::new(HtSection(s))))
    })
}

/// # Safety
/// `rec` is null or a handle from [`ht_run`], not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ht_record_free(rec: *mut HtRecord) {
    if !rec.is_null() {
        drop(Box::from_raw(rec));
    }
}

/// # Safety
/// `json` is a NUL-terminated string; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn ht_section_from_json(json: *const c_char, out: *mut *mut HtSection) -> HtStatus {
    guard(|| {
        let s = lib(SectionField::from_json(str_arg(json)?))?;
        write_out(out, Box::into_raw(Box::new(HtSection(s))))
    })
}

/// # Safety
/// `s` is a live handle; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn ht_section_to_json(s: *const HtSection, out: *mut *mut c_char) -> HtStatus {
    guard(|| {
        let text = lib(ref_arg(s)?.0.to_json())?;
        write_string(out, text)
    })
}

/// Value at the torus point `x` (length `2n`) written as interleaved
/// real and imaginary parts into `out` (length `2(m+1)`).
///
/// # Safety
/// `s` is a live handle; `x` holds `x_len` doubles; `out` holds `out_len`.
#[no_mangle]
pub unsafe extern "C" fn ht_section_evaluate(s: *const HtSection, x: *const f64, x_len: usize, out: *mut f64, out_len: usize) -> HtStatus {
    guard(|| {
        let s = &ref_arg(s)?.0;
        if x.is_null() || out.is_null() {
            return Err(fail(HtStatus::NullPointer, "null array"));
        }
        let (dim, m1) = (s.spec.ctx.dim(), s.spec.m_plus_1);
        if x_len != dim || out_len != 2 * m1 {
            return Err(fail(
                HtStatus::Error,
                &format!("expected x of length {dim} and out of length {}", 2 * m1),
            ));
        }
        let v = evaluate(s, std::slice::from_raw_parts(x, x_len));
        let out = std::slice::from_raw_parts_mut(out, out_len);
        for (c, z) in v.iter().enumerate() {
            out[2 * c] = z.re;
            out[2 * c + 1] = z.im;
        }
        Ok(())
    })
}

/// Re-measure a section under `cfg`; the measurement is returned as JSON
/// and its verdict as the status.
///
/// # Safety
/// `s` and `cfg` are live handles; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn ht_measure(s: *const HtSection, cfg: *const HtConfig, out: *mut *mut c_char) -> HtStatus {
    guard(|| {
        let m = lib(pipeline::measure(&ref_arg(s)?.0, &ref_arg(cfg)?.0))?;
        let text = lib(serde_json::to_string(&m).map_err(Error::from))?;
        write_string(out, text)?;
        lib(m.verdict())
    })
}

/// # Safety
/// `s` is null or a section handle of this library, not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ht_section_free(s: *mut HtSection) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}
