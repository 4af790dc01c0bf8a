use std::ffi::{c_char, CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use holotrans_ffi::*;

fn take_string(p: *mut c_char) -> String {
    let s = unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_owned();
    unsafe { ht_string_free(p) };
    s
}

fn parse(text: &str) -> (HtStatus, *mut HtConfig) {
    let c = CString::new(text).unwrap();
    let mut cfg = ptr::null_mut();
    let st = unsafe { ht_config_parse(c.as_ptr(), &mut cfg) };
    (st, cfg)
}

#[test]
fn config_round_trip_and_errors() {
    let (st, cfg) = parse("model.k = [3, 5]\njets.r = 1\n");
    assert_eq!(st, HtStatus::Ok);
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { ht_config_to_toml(cfg, &mut out) }, HtStatus::Ok);
    let text = take_string(out);
    assert!(text.contains("r = 1"));
    unsafe { ht_config_free(cfg) };

    let (st, cfg) = parse("perturb.delta = 3.0");
    assert_eq!(st, HtStatus::ConfigError);
    assert!(cfg.is_null());
    let msg = unsafe { CStr::from_ptr(ht_last_error()) }.to_str().unwrap();
    assert!(msg.contains("delta"), "{msg}");
    let bad = [0xffu8, 0];
    let mut cfg = ptr::null_mut();
    assert_eq!(
        unsafe { ht_config_parse(bad.as_ptr() as *const c_char, &mut cfg) },
        HtStatus::InvalidUtf8
    );
    unsafe { ht_config_free(ptr::null_mut()) };
}

#[test]
fn run_measure_and_sections() {
    let (_, cfg) = parse("model.k = 3\n");
    let mut rec = ptr::null_mut();
    assert_eq!(unsafe { ht_run(cfg, 3, &mut rec) }, HtStatus::Ok);
    assert_eq!(unsafe { ht_record_verdict(rec) }, HtStatus::Ok);
    let mut zeros = 0;
    assert_eq!(unsafe { ht_record_zero_count(rec, &mut zeros) }, HtStatus::Ok);
    assert_eq!(zeros, 3);
    let mut crit = 0;
    assert_eq!(unsafe { ht_record_critical_count(rec, &mut crit) }, HtStatus::NotAvailable);
    let mut n = 0usize;
    assert_eq!(unsafe { ht_record_stratum_count(rec, &mut n) }, HtStatus::Ok);
    assert_eq!(n, 1);
    let (mut g, mut c) = (0.0, 0.0);
    assert_eq!(unsafe { ht_record_margins(rec, 0, &mut g, &mut c) }, HtStatus::Ok);
    assert!(c > 0.0 && g >= c);
    assert_eq!(unsafe { ht_record_margins(rec, 1, &mut g, &mut c) }, HtStatus::NotAvailable);

    let mut out = ptr::null_mut();
    assert_eq!(unsafe { ht_record_to_json(rec, &mut out) }, HtStatus::Ok);
    let record: serde_json::Value = serde_json::from_str(&take_string(out)).unwrap();
    assert_eq!(record["k"], 3);

    // section round trip through JSON, then replay
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { ht_record_section(rec, &mut s) }, HtStatus::Ok);
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { ht_section_to_json(s, &mut out) }, HtStatus::Ok);
    let json = CString::new(take_string(out)).unwrap();
    let mut s2 = ptr::null_mut();
    assert_eq!(unsafe { ht_section_from_json(json.as_ptr(), &mut s2) }, HtStatus::Ok);
    let x = [0.3, 0.8];
    let (mut v1, mut v2) = ([0.0; 2], [0.0; 2]);
    assert_eq!(unsafe { ht_section_evaluate(s, x.as_ptr(), 2, v1.as_mut_ptr(), 2) }, HtStatus::Ok);
    assert_eq!(unsafe { ht_section_evaluate(s2, x.as_ptr(), 2, v2.as_mut_ptr(), 2) }, HtStatus::Ok);
    assert_eq!(v1, v2);
    assert_eq!(
        unsafe { ht_section_evaluate(s, x.as_ptr(), 4, v1.as_mut_ptr(), 2) },
        HtStatus::Error
    );
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { ht_measure(s2, cfg, &mut out) }, HtStatus::Ok);
    let m: serde_json::Value = serde_json::from_str(&take_string(out)).unwrap();
    assert_eq!(m, record["measurement"]);

    unsafe {
        ht_section_free(s);
        ht_section_free(s2);
        ht_record_free(rec);
        ht_config_free(cfg);
    }
}

#[test]
fn zero_section_fails_transversality() {
    let (_, cfg) = parse("model.k = 2\n");
    let json =
        CString::new(r#"{"spec":{"ctx":{"n":1,"k":2,"c_k":12.566370614359172},"m_plus_1":1},"atoms":[],"truncation":13.0}"#).unwrap();
    let mut s = ptr::null_mut();
    let st = unsafe { ht_section_from_json(json.as_ptr(), &mut s) };
    assert_eq!(st, HtStatus::Ok, "{:?}", unsafe { CStr::from_ptr(ht_last_error()) });
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { ht_measure(s, cfg, &mut out) }, HtStatus::TransversalityFailure);
    take_string(out);
    unsafe {
        ht_section_free(s);
        ht_config_free(cfg);
    }
}

/// Compile the C smoke program against the generated header and the
/// static library, and run it.
#[test]
fn c_program_links_against_the_header() {
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let profile_dir = std::env::current_exe().unwrap().parent().unwrap().parent().unwrap().to_path_buf();
    // tests link the rlib only, so build the static archive for this profile
    let mut build = Command::new(std::env::var("CARGO").unwrap_or_else(|_| "cargo".into()));
    build.args(["build", "-p", "holotrans-ffi", "--lib"]).current_dir(&manifest);
    if profile_dir.file_name().is_some_and(|p| p == "release") {
        build.arg("--release");
    }
    build.env("CARGO_TARGET_DIR", profile_dir.parent().unwrap());
    assert!(build.status().unwrap().success());
    let lib = profile_dir.join("libholotrans_ffi.a");
    assert!(lib.exists(), "{} missing", lib.display());
    let dir = tempfile::tempdir().unwrap();
    let exe = dir.path().join("smoke");
    let status = Command::new("cc")
        .arg(manifest.join("tests/smoke.c"))
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .expect("a C compiler");
    assert!(status.success());
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("zeros=2"));
}
