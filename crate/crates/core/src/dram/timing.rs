use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::Cycle;

use super::org::REFRESH_COMMANDS_PER_WINDOW;

/// Tolerance absorbed before rounding ns values to cycles, so that values
/// such as 20 x 2.1 do not round up because of binary representation.
const ROUND_EPS: f64 = 1e-9;

/// Refresh granularity the timing set is derived for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RefreshMode {
    AllBank,
    PerBank,
}

/// DDR4 fine-granularity refresh mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum FgrMode {
    #[default]
    Off,
    X2,
    X4,
}

impl FgrMode {
    /// Refresh-rate multiplier relative to the 1x mode.
    pub fn rate_multiplier(self) -> u32 {
        match self {
            FgrMode::Off => 1,
            FgrMode::X2 => 2,
            FgrMode::X4 => 4,
        }
    }

    /// Divisor applied to the 1x refresh latency.
    pub fn latency_divisor(self) -> f64 {
        match self {
            FgrMode::Off => 1.0,
            FgrMode::X2 => 1.35,
            FgrMode::X4 => 1.63,
        }
    }
}

impl fmt::Display for FgrMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FgrMode::Off => "off",
            FgrMode::X2 => "2x",
            FgrMode::X4 => "4x",
        })
    }
}

impl FromStr for FgrMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "off" | "1x" | "none" => Ok(FgrMode::Off),
            "2x" | "x2" => Ok(FgrMode::X2),
            "4x" | "x4" => Ok(FgrMode::X4),
            other => Err(Error::config(format!("unknown FGR mode `{other}`"))),
        }
    }
}

/// All-bank refresh latency per chip density.
pub fn trfc_ab_ns_for_density(density_gbit: u32) -> Result<f64> {
    match density_gbit {
        8 => Ok(350.0),
        16 => Ok(530.0),
        32 => Ok(890.0),
        other => Err(Error::config(format!(
            "unsupported density {other} Gb (expected 8, 16 or 32)"
        ))),
    }
}

/// Ratio between all-bank and per-bank refresh latency.
pub const TRFC_AB_TO_PB_RATIO: f64 = 2.3;

/// DDR timing constraints in controller clock cycles.
///
/// Latencies are rounded up from nanoseconds. Refresh intervals are rounded
/// down: a longer interval than the nominal one would stretch the time
/// between refreshes of a row past the retention time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimingParams {
    pub tck_ns: f64,
    pub t_rcd: Cycle,
    pub t_rp: Cycle,
    pub t_cl: Cycle,
    pub t_cwl: Cycle,
    pub t_ras: Cycle,
    pub t_rc: Cycle,
    pub t_wr: Cycle,
    pub t_wtr: Cycle,
    pub t_rtp: Cycle,
    pub t_burst: Cycle,
    /// Read-to-write data bus turnaround.
    pub t_rtw: Cycle,
    pub t_rrd: Cycle,
    pub t_faw: Cycle,
    pub t_refi: Cycle,
    pub t_refi_pb: Cycle,
    pub t_rfc_ab: Cycle,
    pub t_rfc_pb: Cycle,
    /// tRRD/tFAW enforced while a refresh is in progress in subarray
    /// access-refresh parallelization mode; equal to the base values otherwise.
    pub t_rrd_ref: Cycle,
    pub t_faw_ref: Cycle,
    pub t_refi_ns: f64,
    pub t_rfc_ab_ns: f64,
    pub t_rfc_pb_ns: f64,
    pub retention_ms: u32,
    pub fgr: FgrMode,
    /// Refresh commands needed per bank to cover every row once.
    pub refreshes_per_window: u32,
}

pub fn ns_to_cycles_ceil(ns: f64, tck_ns: f64) -> Cycle {
    (ns / tck_ns - ROUND_EPS).ceil().max(0.0) as Cycle
}

pub fn ns_to_cycles_floor(ns: f64, tck_ns: f64) -> Cycle {
    (ns / tck_ns + ROUND_EPS).floor().max(0.0) as Cycle
}

/// Derives the full timing set for a DDR3-1333 class device.
pub fn derive_timing(
    density_gbit: u32,
    retention_ms: u32,
    mode: RefreshMode,
    fgr: FgrMode,
    tck_ns: f64,
) -> Result<TimingParams> {
    let base_trfc = trfc_ab_ns_for_density(density_gbit)?;
    if !matches!(retention_ms, 32 | 64) {
        return Err(Error::config(format!(
            "unsupported retention {retention_ms} ms (expected 32 or 64)"
        )));
    }
    if fgr != FgrMode::Off && mode != RefreshMode::AllBank {
        return Err(Error::config("fine-granularity refresh requires all-bank refresh"));
    }
    if !(tck_ns.is_finite() && tck_ns > 0.0) {
        return Err(Error::config(format!("invalid clock period {tck_ns} ns")));
    }

    let mult = fgr.rate_multiplier();
    let t_refi_ns = retention_ms as f64 * 1e6 / REFRESH_COMMANDS_PER_WINDOW as f64 / mult as f64;
    let t_rfc_ab_ns = base_trfc / fgr.latency_divisor();
    let t_rfc_pb_ns = t_rfc_ab_ns / TRFC_AB_TO_PB_RATIO;
    let t_refi = ns_to_cycles_floor(t_refi_ns, tck_ns);

    Ok(TimingParams {
        tck_ns,
        t_rcd: 9,
        t_rp: 9,
        t_cl: 9,
        t_cwl: 7,
        t_ras: 24,
        t_rc: 33,
        t_wr: 10,
        t_wtr: 5,
        t_rtp: 5,
        t_burst: 4,
        t_rtw: 2,
        t_rrd: 4,
        t_faw: 20,
        t_refi,
        t_refi_pb: t_refi / 8,
        t_rfc_ab: ns_to_cycles_ceil(t_rfc_ab_ns, tck_ns),
        t_rfc_pb: ns_to_cycles_ceil(t_rfc_pb_ns, tck_ns),
        t_rrd_ref: 4,
        t_faw_ref: 20,
        t_refi_ns,
        t_rfc_ab_ns,
        t_rfc_pb_ns,
        retention_ms,
        fgr,
        refreshes_per_window: REFRESH_COMMANDS_PER_WINDOW * mult,
    })
}

impl TimingParams {
    /// Retention time in cycles (rounded up).
    pub fn retention_cycles(&self) -> Cycle {
        ns_to_cycles_ceil(self.retention_ms as f64 * 1e6, self.tck_ns)
    }

    /// Sets tFAW/tRRD (and resets the refresh-time variants to match).
    pub fn with_act_window(mut self, t_faw: Cycle, t_rrd: Cycle) -> Self {
        self.t_faw = t_faw;
        self.t_rrd = t_rrd;
        self.t_faw_ref = t_faw;
        self.t_rrd_ref = t_rrd;
        self
    }

    /// Installs power-scaled activation constraints for refresh periods.
    pub fn with_sarp_scaling(mut self, currents: &CurrentParams, kind: RefreshMode) -> Self {
        let (faw, rrd) = sarp_scaled_constraints(&self, currents, kind);
        self.t_faw_ref = faw;
        self.t_rrd_ref = rrd;
        self
    }

    pub fn check_invariants(&self) -> Result<()> {
        let fail = |m: String| Err(Error::config(m));
        if self.t_refi / 8 != self.t_refi_pb {
            return fail(format!("tREFIpb {} != tREFI {} / 8", self.t_refi_pb, self.t_refi));
        }
        if self.t_rfc_pb >= self.t_rfc_ab {
            return fail(format!("tRFCpb {} not below tRFCab {}", self.t_rfc_pb, self.t_rfc_ab));
        }
        if self.t_faw < self.t_rrd || self.t_faw_ref < self.t_faw || self.t_rrd_ref < self.t_rrd {
            return fail("activation window constraints out of order".into());
        }
        if self.t_burst == 0 || self.t_refi == 0 {
            return fail("zero burst length or refresh interval".into());
        }
        Ok(())
    }
}

/// Current draw used for the power-overhead scaling of tFAW and tRRD.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurrentParams {
    /// Activation current (mA).
    pub i_act: f64,
    /// All-bank refresh current (mA).
    pub i_ref_ab: f64,
    /// Per-bank refresh current (mA).
    pub i_ref_pb: f64,
}

impl Default for CurrentParams {
    /// I_REF values back-solved so that the overhead is 2.1x for all-bank and
    /// 1.138x for per-bank refresh.
    fn default() -> Self {
        CurrentParams {
            i_act: 25.0,
            i_ref_ab: 110.0,
            i_ref_pb: 13.8,
        }
    }
}

impl CurrentParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.i_act > 0.0 && self.i_ref_ab >= 0.0 && self.i_ref_pb >= 0.0) {
            return Err(Error::config("currents must be positive"));
        }
        Ok(())
    }

    /// (4 I_ACT + I_REF) / (4 I_ACT)
    pub fn power_overhead(&self, kind: RefreshMode) -> f64 {
        let i_ref = match kind {
            RefreshMode::AllBank => self.i_ref_ab,
            RefreshMode::PerBank => self.i_ref_pb,
        };
        (4.0 * self.i_act + i_ref) / (4.0 * self.i_act)
    }
}

/// Returns `(tFAW_ref, tRRD_ref)`.
pub fn sarp_scaled_constraints(
    t: &TimingParams,
    c: &CurrentParams,
    kind: RefreshMode,
) -> (Cycle, Cycle) {
    let overhead = c.power_overhead(kind);
    let scale = |v: Cycle| (v as f64 * overhead - ROUND_EPS).ceil() as Cycle;
    (scale(t.t_faw), scale(t.t_rrd))
}
