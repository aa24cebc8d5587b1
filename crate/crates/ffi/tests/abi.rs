use std::ffi::{CStr, CString};
use std::process::Command;
use std::ptr;

use refsim_ffi::*;

fn last_error() -> String {
    let p = refsim_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn small_config() -> *mut RefsimConfig {
    let text = CString::new(
        "[system]\ncores = 2\nsim_cycles = 20000\n[controller]\npolicy = dsarp\n[dram]\ndensity_gbit = 32\n",
    )
    .unwrap();
    let mut cfg = ptr::null_mut();
    assert_eq!(unsafe { refsim_config_parse(text.as_ptr(), &mut cfg) }, RefsimStatus::Ok);
    cfg
}

#[test]
fn run_round_trip() {
    let cfg = small_config();
    let mut run = ptr::null_mut();
    assert_eq!(unsafe { refsim_run(cfg, &mut run) }, RefsimStatus::Ok);
    assert_eq!(unsafe { refsim_run_cores(run) }, 2);
    let mut ipc = 0.0;
    assert_eq!(unsafe { refsim_run_ipc(run, 1, &mut ipc) }, RefsimStatus::Ok);
    assert!(ipc > 0.0);
    assert_eq!(unsafe { refsim_run_ipc(run, 2, &mut ipc) }, RefsimStatus::OutOfRange);
    let (mut ab, mut pb) = (0u64, 0u64);
    assert_eq!(unsafe { refsim_run_refresh_counts(run, &mut ab, &mut pb) }, RefsimStatus::Ok);
    assert_eq!(ab, 0);
    assert!(pb > 0);
    let mut e = 0.0;
    assert_eq!(unsafe { refsim_run_energy_per_access(run, &mut e) }, RefsimStatus::Ok);
    assert!(e > 0.0);
    assert!(unsafe { refsim_run_command_count(run) } > 0);

    let dir = tempfile::tempdir().unwrap();
    let d = CString::new(dir.path().to_str().unwrap()).unwrap();
    assert_eq!(unsafe { refsim_run_write_outputs(run, d.as_ptr()) }, RefsimStatus::Ok);
    let cmds = CString::new(std::fs::read_to_string(dir.path().join("commands.log")).unwrap()).unwrap();
    let refs = CString::new(std::fs::read_to_string(dir.path().join("refresh.log")).unwrap()).unwrap();
    let mut v = 99;
    assert_eq!(unsafe { refsim_verify_command_log(cfg, cmds.as_ptr(), &mut v) }, RefsimStatus::Ok);
    assert_eq!(v, 0);
    v = 99;
    assert_eq!(unsafe { refsim_audit_refresh_log(cfg, refs.as_ptr(), 20_000, &mut v) }, RefsimStatus::Ok);
    assert_eq!(v, 0);

    // A command log with a garbage line is reported, not rejected.
    let bad = CString::new("5 XYZ 0 0 0 0 0\n").unwrap();
    assert_eq!(unsafe { refsim_verify_command_log(cfg, bad.as_ptr(), &mut v) }, RefsimStatus::Ok);
    assert_eq!(v, 1);

    unsafe {
        refsim_run_free(run);
        refsim_config_free(cfg);
    }
}

#[test]
fn errors_and_nulls() {
    let mut cfg = ptr::null_mut();
    assert_eq!(unsafe { refsim_config_default(&mut cfg) }, RefsimStatus::Ok);
    let k = CString::new("density_gbit").unwrap();
    let v = CString::new("12").unwrap();
    assert_eq!(unsafe { refsim_config_set(cfg, k.as_ptr(), v.as_ptr()) }, RefsimStatus::Config);
    assert!(last_error().contains("12"), "{}", last_error());
    let bad = CString::new("[dram]\nwarp = 9\n").unwrap();
    let mut other = ptr::null_mut();
    assert_eq!(unsafe { refsim_config_parse(bad.as_ptr(), &mut other) }, RefsimStatus::Parse);
    assert!(other.is_null());
    assert!(last_error().contains(":2:"), "{}", last_error());
    assert_eq!(unsafe { refsim_config_parse(ptr::null(), &mut other) }, RefsimStatus::NullPointer);
    assert_eq!(unsafe { refsim_run(ptr::null(), &mut ptr::null_mut()) }, RefsimStatus::NullPointer);
    assert_eq!(unsafe { refsim_run_cores(ptr::null()) }, 0);
    unsafe {
        refsim_config_free(cfg);
        refsim_config_free(ptr::null_mut());
        refsim_run_free(ptr::null_mut());
    }
}

#[test]
fn weighted_speedup_over_abi() {
    let shared = [0.5, 1.0];
    let alone = [1.0, 2.0];
    let mut ws = 0.0;
    let s = unsafe { refsim_weighted_speedup(shared.as_ptr(), alone.as_ptr(), 2, &mut ws) };
    assert_eq!(s, RefsimStatus::Ok);
    assert!((ws - 1.0).abs() < 1e-12);
    let zero = [0.0, 2.0];
    let s = unsafe { refsim_weighted_speedup(shared.as_ptr(), zero.as_ptr(), 2, &mut ws) };
    assert_eq!(s, RefsimStatus::Metric);
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(refsim_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_is_valid_c() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/refsim.h");
    let text = std::fs::read_to_string(header).unwrap();
    for f in ["refsim_run(", "refsim_config_parse(", "refsim_last_error(", "REFSIM_STATUS_VERIFICATION"] {
        assert!(text.contains(f), "{f} missing from header");
    }
    let Ok(cc) = which_cc() else { return };
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("t.c");
    std::fs::write(
        &src,
        format!(
            "#include \"{header}\"\nint main(void) {{ RefsimConfig *c = 0; return refsim_config_default(&c) == REFSIM_STATUS_OK ? 0 : 1; }}\n"
        ),
    )
    .unwrap();
    let st = Command::new(cc).args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only"]).arg(&src).status().unwrap();
    assert!(st.success());
}

fn which_cc() -> Result<&'static str, ()> {
    ["cc", "gcc", "clang"]
        .into_iter()
        .find(|c| Command::new(c).arg("--version").output().is_ok_and(|o| o.status.success()))
        .ok_or(())
}
