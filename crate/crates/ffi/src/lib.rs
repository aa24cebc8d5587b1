//! C ABI over the simulator.
//!
//! Configurations and finished runs are opaque handles owned by the caller
//! and released with their `_free` function. Every fallible call returns a
//! [`RefsimStatus`]; on failure the message is kept per thread and read back
//! with [`refsim_last_error`]. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use refsim::config::SimConfig;
use refsim::dram::{retention_audit_text, verify_command_log_text};
use refsim::metrics::weighted_speedup;
use refsim::sim::{run_single, write_outputs, RunOutput};
use refsim::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RefsimStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Config = 3,
    Parse = 4,
    Io = 5,
    Verification = 6,
    Invariant = 7,
    Metric = 8,
    OutOfRange = 9,
    Panic = 10,
}

/// Simulation configuration.
pub struct RefsimConfig {
    inner: SimConfig,
}

/// A finished, verified run.
pub struct RefsimRun {
    cfg: SimConfig,
    out: RunOutput,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> RefsimStatus {
    match e {
        Error::Config(_) => RefsimStatus::Config,
        Error::Parse { .. } => RefsimStatus::Parse,
        Error::AddressOutOfRange { .. } => RefsimStatus::OutOfRange,
        Error::Metric(_) => RefsimStatus::Metric,
        Error::Verification(_) => RefsimStatus::Verification,
        Error::Invariant { .. } => RefsimStatus::Invariant,
        Error::Io { .. } => RefsimStatus::Io,
    }
}

struct Fail(RefsimStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> RefsimStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => RefsimStatus::Ok,
        Ok(Err(Fail(s, msg))) => {
            set_error(msg);
            s
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            RefsimStatus::Panic
        }
    }
}

fn null(what: &str) -> Fail {
    Fail(RefsimStatus::NullPointer, format!("{what} is null"))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(RefsimStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn out_ptr<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(what))
}

/// Message of the last failed call on this thread, or NULL. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn refsim_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version, a static string.
#[no_mangle]
pub extern "C" fn refsim_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Default configuration.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn refsim_config_default(out: *mut *mut RefsimConfig) -> RefsimStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = Box::into_raw(Box::new(RefsimConfig {
            inner: SimConfig::default(),
        }));
        Ok(())
    })
}

/// Parses configuration text (`key = value` lines with sections). Relative
/// trace paths resolve against the working directory.
///
/// # Safety
/// `config_text` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn refsim_config_parse(
    config_text: *const c_char,
    out: *mut *mut RefsimConfig,
) -> RefsimStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let inner = SimConfig::parse(text(config_text, "config_text")?, "<text>", None)?;
        *out = Box::into_raw(Box::new(RefsimConfig { inner }));
        Ok(())
    })
}

/// Sets one key; the configuration is left unchanged on error.
///
/// # Safety
/// `cfg` must come from this library; `key` and `value` must be
/// NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn refsim_config_set(
    cfg: *mut RefsimConfig,
    key: *const c_char,
    value: *const c_char,
) -> RefsimStatus {
    guard(|| {
        let cfg = out_ptr(cfg, "cfg")?;
        cfg.inner.apply(text(key, "key")?, text(value, "value")?)?;
        Ok(())
    })
}

/// # Safety
/// `cfg` must come from this library or be NULL, and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn refsim_config_free(cfg: *mut RefsimConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Simulates `cfg`, verifying the command and refresh logs. A run that
/// breaks a timing rule or a retention deadline fails with
/// `REFSIM_STATUS_VERIFICATION` and yields no handle.
///
/// # Safety
/// `cfg` must come from this library and `out` be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn refsim_run(cfg: *const RefsimConfig, out: *mut *mut RefsimRun) -> RefsimStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let cfg = cfg.as_ref().ok_or_else(|| null("cfg"))?;
        let res = run_single(&cfg.inner)?;
        *out = Box::into_raw(Box::new(RefsimRun {
            cfg: cfg.inner.clone(),
            out: res,
        }));
        Ok(())
    })
}

/// # Safety
/// `run` must come from this library or be NULL, and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn refsim_run_free(run: *mut RefsimRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// Number of cores in the run; 0 for NULL.
///
/// # Safety
/// `run` must come from this library or be NULL.
#[no_mangle]
pub unsafe extern "C" fn refsim_run_cores(run: *const RefsimRun) -> u32 {
    run.as_ref().map_or(0, |r| r.out.stats.cores.len() as u32)
}

/// # Safety
/// `run` must come from this library and `ipc` be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn refsim_run_ipc(run: *const RefsimRun, core: u32, ipc: *mut f64) -> RefsimStatus {
    guard(|| {
        let r = run.as_ref().ok_or_else(|| null("run"))?;
        let ipc = out_ptr(ipc, "ipc")?;
        let c = r.out.stats.cores.get(core as usize).ok_or_else(|| {
            Fail(
                RefsimStatus::OutOfRange,
                format!("core {core} of {}", r.out.stats.cores.len()),
            )
        })?;
        *ipc = c.ipc;
        Ok(())
    })
}

/// Energy per DRAM access in nJ.
///
/// # Safety
/// `run` must come from this library and `nj` be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn refsim_run_energy_per_access(run: *const RefsimRun, nj: *mut f64) -> RefsimStatus {
    guard(|| {
        let r = run.as_ref().ok_or_else(|| null("run"))?;
        let nj = out_ptr(nj, "nj")?;
        *nj = r
            .out
            .stats
            .energy_per_access()
            .ok_or_else(|| Fail(RefsimStatus::Metric, "run made no accesses".into()))?;
        Ok(())
    })
}

/// Counts of issued all-bank and per-bank refresh commands.
///
/// # Safety
/// `run` must come from this library; `refab` and `refpb` must be valid
/// pointers.
#[no_mangle]
pub unsafe extern "C" fn refsim_run_refresh_counts(
    run: *const RefsimRun,
    refab: *mut u64,
    refpb: *mut u64,
) -> RefsimStatus {
    guard(|| {
        let r = run.as_ref().ok_or_else(|| null("run"))?;
        *out_ptr(refab, "refab")? = r.out.stats.refab_count();
        *out_ptr(refpb, "refpb")? = r.out.stats.refpb_count();
        Ok(())
    })
}

/// Number of DRAM commands in the run's log.
///
/// # Safety
/// `run` must come from this library or be NULL.
#[no_mangle]
pub unsafe extern "C" fn refsim_run_command_count(run: *const RefsimRun) -> u64 {
    run.as_ref().map_or(0, |r| r.out.commands.len() as u64)
}

/// Writes the run's logs and CSV files into `dir`.
///
/// # Safety
/// `run` must come from this library and `dir` be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn refsim_run_write_outputs(run: *const RefsimRun, dir: *const c_char) -> RefsimStatus {
    guard(|| {
        let r = run.as_ref().ok_or_else(|| null("run"))?;
        write_outputs(&r.cfg, &r.out, Path::new(text(dir, "dir")?))?;
        Ok(())
    })
}

/// Replays command-log text under `cfg` and stores the number of
/// violations (malformed lines included).
///
/// # Safety
/// `cfg` must come from this library, `log` be a NUL-terminated string and
/// `violations` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn refsim_verify_command_log(
    cfg: *const RefsimConfig,
    log: *const c_char,
    violations: *mut u64,
) -> RefsimStatus {
    guard(|| {
        let c = &cfg.as_ref().ok_or_else(|| null("cfg"))?.inner;
        let out = out_ptr(violations, "violations")?;
        let v = verify_command_log_text(text(log, "log")?, &c.timing()?, &c.org, c.sarp_active());
        *out = v.len() as u64;
        Ok(())
    })
}

/// Audits refresh-log text under `cfg` over `[0, end)` and stores the
/// number of violations.
///
/// # Safety
/// `cfg` must come from this library, `log` be a NUL-terminated string and
/// `violations` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn refsim_audit_refresh_log(
    cfg: *const RefsimConfig,
    log: *const c_char,
    end: u64,
    violations: *mut u64,
) -> RefsimStatus {
    guard(|| {
        let c = &cfg.as_ref().ok_or_else(|| null("cfg"))?.inner;
        let out = out_ptr(violations, "violations")?;
        let v = retention_audit_text(text(log, "log")?, &c.org, &c.timing()?, c.policy.refresh_mode(), 0, end)
            .map_err(|(line, msg)| Fail(RefsimStatus::Parse, format!("line {line}: {msg}")))?;
        *out = v.len() as u64;
        Ok(())
    })
}

/// Sum over `n` cores of shared / alone IPC.
///
/// # Safety
/// `shared` and `alone` must point to `n` doubles; `ws` must be valid.
#[no_mangle]
pub unsafe extern "C" fn refsim_weighted_speedup(
    shared: *const f64,
    alone: *const f64,
    n: usize,
    ws: *mut f64,
) -> RefsimStatus {
    guard(|| {
        if shared.is_null() || alone.is_null() {
            return Err(null("ipc array"));
        }
        let out = out_ptr(ws, "ws")?;
        let s = std::slice::from_raw_parts(shared, n);
        let a = std::slice::from_raw_parts(alone, n);
        *out = weighted_speedup(s, a)?;
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn status_mapping() {
        assert_eq!(status_of(&Error::Config("x".into())), RefsimStatus::Config);
        assert_eq!(
            status_of(&Error::Invariant { cycle: 1, msg: "m".into() }),
            RefsimStatus::Invariant
        );
    }

    #[test]
    fn panic_is_contained() {
        let s = guard(|| panic!("boom"));
        assert_eq!(s, RefsimStatus::Panic);
        let msg = unsafe { CStr::from_ptr(refsim_last_error()) }.to_str().unwrap();
        assert!(msg.contains("boom"));
    }
}
