use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use loccforge_ffi::*;

const CONFIG: &str = r#"
experiment = "distill-avg"
scheme = "locc"
rounds = 1
copies = 1
[noise]
kinds = ["depolarizing"]
[noise.grid]
values = [0.2]
[optimizer]
restarts = 2
max_iters = 100
"#;

fn objective() -> *mut LfObjective {
    let text = CString::new(CONFIG).unwrap();
    let mut obj = ptr::null_mut();
    assert_eq!(unsafe { lf_objective_from_toml(text.as_ptr(), 0, 0, &mut obj) }, LfStatus::Ok);
    assert!(!obj.is_null());
    obj
}

fn last_error() -> String {
    let mut buf = vec![0 as std::ffi::c_char; 512];
    let n = unsafe { lf_last_error(buf.as_mut_ptr(), buf.len()) };
    assert!(n > 0);
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

#[test]
fn optimize_and_reevaluate_export() {
    let obj = objective();
    let mut parts = 0;
    assert_eq!(unsafe { lf_objective_num_parts(obj, &mut parts) }, LfStatus::Ok);
    assert_eq!(parts, 1);
    let mut base = 0.0;
    assert_eq!(unsafe { lf_objective_identity_value(obj, &mut base) }, LfStatus::Ok);
    assert!((base - (1.0 - 0.75 * 0.2)).abs() < 1e-12);

    let mut opts = lf_optim_options_default();
    opts.restarts = 2;
    opts.seed = 3;
    let mut res = ptr::null_mut();
    assert_eq!(unsafe { lf_objective_optimize(obj, &opts, &mut res) }, LfStatus::Ok);
    let mut value = 0.0;
    assert_eq!(unsafe { lf_result_value(res, &mut value) }, LfStatus::Ok);
    assert!(value >= base - 1e-6);
    let mut p = 0.0;
    assert_eq!(unsafe { lf_result_success_probability(res, &mut p) }, LfStatus::Ok);
    assert_eq!(p, -1.0);
    let (mut st, mut its) = (LfOptimStatus::MaxIters, 0);
    assert_eq!(unsafe { lf_result_status(res, &mut st, &mut its) }, LfStatus::Ok);
    assert!(its >= 1);

    let json = unsafe { lf_result_protocol_json(res) };
    assert!(!json.is_null());
    let mut again = 0.0;
    assert_eq!(unsafe { lf_objective_evaluate_json(obj, json, &mut again) }, LfStatus::Ok);
    assert!((again - value).abs() < 1e-9);
    unsafe {
        lf_result_free(res);
        lf_objective_free(obj);
    }
}

#[test]
fn config_errors_carry_the_field_name() {
    let text = CString::new("experiment = \"distill-avg\"\n[noise.grid]\nvalues = [2.0]\n").unwrap();
    let mut obj = ptr::null_mut();
    assert_eq!(unsafe { lf_objective_from_toml(text.as_ptr(), 0, 0, &mut obj) }, LfStatus::Config);
    assert!(obj.is_null());
    assert!(last_error().contains("noise.grid"));
}

#[test]
fn null_pointers_are_reported() {
    let mut obj = ptr::null_mut();
    assert_eq!(unsafe { lf_objective_from_toml(ptr::null(), 0, 0, &mut obj) }, LfStatus::NullPointer);
    let mut out = 0.0;
    assert_eq!(unsafe { lf_objective_identity_value(ptr::null(), &mut out) }, LfStatus::NullPointer);
    assert!(unsafe { lf_result_protocol_json(ptr::null()) }.is_null());
    unsafe {
        lf_objective_free(ptr::null_mut());
        lf_result_free(ptr::null_mut());
    }
}

fn bell() -> Vec<f64> {
    let mut m = vec![0.0; 16];
    for (i, j) in [(0, 0), (0, 3), (3, 0), (3, 3)] {
        m[i * 4 + j] = 0.5;
    }
    m
}

#[test]
fn quantities_on_a_bell_state() {
    let rho = bell();
    let mut v = 0.0;
    assert_eq!(unsafe { lf_entropy(rho.as_ptr(), ptr::null(), 4, &mut v) }, LfStatus::Ok);
    assert!(v.abs() < 1e-9);
    assert_eq!(unsafe { lf_coherent_information(rho.as_ptr(), ptr::null(), 2, 2, &mut v) }, LfStatus::Ok);
    assert!((v - 1.0).abs() < 1e-9);
    assert_eq!(unsafe { lf_ppt_avg_fidelity_bound(rho.as_ptr(), ptr::null(), 2, 2, 2, &mut v) }, LfStatus::Ok);
    assert!((v - 1.0).abs() < 1e-4);
    assert_eq!(unsafe { lf_ppt_fidelity_bound(rho.as_ptr(), ptr::null(), 2, 2, 2, 2.0, &mut v) }, LfStatus::Infeasible);
    assert!(last_error().contains("success probability"));
    // |0⟩_R |00⟩_AB: Bob already holds everything
    let psi = [1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
    assert_eq!(unsafe { lf_ppt_merging_bound(psi.as_ptr(), ptr::null(), &mut v) }, LfStatus::Ok);
    assert!((v - 1.0).abs() < 1e-4);
}

#[test]
fn non_hermitian_input_is_a_numerical_error() {
    let mut rho = bell();
    rho[1] = 0.3;
    let mut v = 0.0;
    let st = unsafe { lf_entropy(rho.as_ptr(), ptr::null(), 4, &mut v) };
    assert_ne!(st, LfStatus::Ok);
}

fn target_dir() -> PathBuf {
    // .../target/<profile>/deps/<test binary>
    let exe = std::env::current_exe().unwrap();
    exe.parent().and_then(|p| p.parent()).unwrap().to_path_buf()
}

#[test]
fn c_program_links_against_the_header() {
    let lib_dir = target_dir();
    let lib = lib_dir.join("libloccforge_ffi.a");
    assert!(lib.exists(), "static library not found at {}", lib.display());
    let include = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include");
    let tmp = tempfile::tempdir().unwrap();
    let src = tmp.path().join("smoke.c");
    std::fs::write(
        &src,
        r#"
#include <stdio.h>
#include "loccforge.h"
int main(void) {
    double rho[16] = {0};
    rho[0] = rho[3] = rho[12] = rho[15] = 0.5;
    double ci = 0.0;
    if (lf_coherent_information(rho, NULL, 2, 2, &ci) != LF_STATUS_OK) return 1;
    LfObjective *obj = NULL;
    if (lf_objective_from_toml("bogus = 1", 0, 0, &obj) != LF_STATUS_CONFIG) return 2;
    char msg[256];
    if (lf_last_error(msg, sizeof msg) == 0) return 3;
    printf("%s %.6f\n", lf_version(), ci);
    return 0;
}
"#,
    )
    .unwrap();
    let bin = tmp.path().join("smoke");
    let status = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(&include)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .expect("C compiler available");
    assert!(status.success());
    let out = Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.trim().ends_with("1.000000"), "{text}");
}
