//! DRAM energy from command counts and power-state residency, following the
//! usual IDD-based datasheet method.
//!
//! Terms, per rank (currents in mA, times in ns, so V*mA*ns = pJ):
//!
//! ```text
//! background = VDD * (IDD3N * (active + refreshing cycles) + IDD2N * precharged cycles) * tCK
//! activate   = nACT * VDD * (IDD0 * tRC - IDD3N * tRAS - IDD2N * (tRC - tRAS)) * tCK
//! read       = nRD  * VDD * (IDD4R - IDD3N) * tBURST * tCK
//! write      = nWR  * VDD * (IDD4W - IDD3N) * tBURST * tCK
//! refresh    = (nREFab + nREFpb / 8) * VDD * (IDD5B - IDD3N) * tRFCab * tCK
//! ```
//!
//! Every term is multiplied by the number of devices in a rank.

use std::fmt::Write as _;
use std::path::Path;

use crate::controller::RankCounters;
use crate::dram::TimingParams;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerParams {
    pub vdd: f64,
    pub idd0: f64,
    pub idd2n: f64,
    pub idd3n: f64,
    pub idd4r: f64,
    pub idd4w: f64,
    pub idd5b: f64,
    pub devices_per_rank: u32,
}

impl Default for PowerParams {
    /// DDR3-1333 x8 device values in the range of commodity datasheets.
    fn default() -> Self {
        PowerParams {
            vdd: 1.5,
            idd0: 55.0,
            idd2n: 32.0,
            idd3n: 38.0,
            idd4r: 157.0,
            idd4w: 128.0,
            idd5b: 235.0,
            devices_per_rank: 8,
        }
    }
}

impl PowerParams {
    pub fn validate(&self) -> Result<()> {
        let vals = [
            ("VDD", self.vdd),
            ("IDD0", self.idd0),
            ("IDD2N", self.idd2n),
            ("IDD3N", self.idd3n),
            ("IDD4R", self.idd4r),
            ("IDD4W", self.idd4w),
            ("IDD5B", self.idd5b),
        ];
        for (k, v) in vals {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(format!("power parameter {k} must be positive")));
            }
        }
        if self.devices_per_rank == 0 {
            return Err(Error::config("DEVICES must be positive"));
        }
        Ok(())
    }

    /// Parses `KEY=value` lines; keys not given keep their defaults.
    pub fn parse(text: &str, source_name: &str) -> Result<PowerParams> {
        let mut p = PowerParams::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| Error::Parse {
                source_name: source_name.to_string(),
                line: i + 1,
                msg,
            };
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected KEY=value, got `{line}`")))?;
            let (k, v) = (k.trim(), v.trim());
            let num: f64 = v.parse().map_err(|_| err(format!("bad number `{v}`")))?;
            match k.to_ascii_uppercase().as_str() {
                "VDD" => p.vdd = num,
                "IDD0" => p.idd0 = num,
                "IDD2N" => p.idd2n = num,
                "IDD3N" => p.idd3n = num,
                "IDD4R" => p.idd4r = num,
                "IDD4W" => p.idd4w = num,
                "IDD5B" => p.idd5b = num,
                "DEVICES" => {
                    if num.fract() != 0.0 || num < 1.0 {
                        return Err(err(format!("DEVICES must be a positive integer, got {v}")));
                    }
                    p.devices_per_rank = num as u32
                }
                _ => return Err(err(format!("unknown power parameter `{k}`"))),
            }
        }
        p.validate()?;
        Ok(p)
    }

    pub fn load(path: &Path) -> Result<PowerParams> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        PowerParams::parse(&text, &path.display().to_string())
    }

    pub fn to_text(&self) -> String {
        format!(
            "VDD={}\nIDD0={}\nIDD2N={}\nIDD3N={}\nIDD4R={}\nIDD4W={}\nIDD5B={}\nDEVICES={}\n",
            self.vdd, self.idd0, self.idd2n, self.idd3n, self.idd4r, self.idd4w, self.idd5b,
            self.devices_per_rank
        )
    }
}

/// Energy by component, in nJ.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EnergyBreakdown {
    pub background: f64,
    pub activate: f64,
    pub read: f64,
    pub write: f64,
    pub refresh: f64,
}

impl EnergyBreakdown {
    pub fn total(&self) -> f64 {
        self.background + self.activate + self.read + self.write + self.refresh
    }

    /// nJ per serviced access; `None` when nothing was serviced.
    pub fn per_access(&self, accesses: u64) -> Option<f64> {
        (accesses > 0).then(|| self.total() / accesses as f64)
    }

    pub fn add(&mut self, o: &EnergyBreakdown) {
        self.background += o.background;
        self.activate += o.activate;
        self.read += o.read;
        self.write += o.write;
        self.refresh += o.refresh;
    }

    pub const CSV_HEADER: &'static str =
        "background_nj,activate_nj,read_nj,write_nj,refresh_nj,total_nj";

    pub fn csv_fields(&self) -> String {
        let mut s = String::new();
        let _ = write!(
            s,
            "{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
            self.background,
            self.activate,
            self.read,
            self.write,
            self.refresh,
            self.total()
        );
        s
    }
}

/// Energy of one REFab command at the given timing, in pJ per device.
pub fn refab_energy_pj(p: &PowerParams, t: &TimingParams) -> f64 {
    p.vdd * (p.idd5b - p.idd3n) * t.t_rfc_ab as f64 * t.tck_ns
}

/// Energy of one rank.
pub fn rank_energy(c: &RankCounters, p: &PowerParams, t: &TimingParams) -> EnergyBreakdown {
    let tck = t.tck_ns;
    let dev = p.devices_per_rank as f64;
    let pj_to_nj = 1e-3 * dev;
    let busy = (c.cycles_active + c.cycles_refreshing) as f64;
    let background = p.vdd * (p.idd3n * busy + p.idd2n * c.cycles_precharged as f64) * tck;
    let (trc, tras) = (t.t_rc as f64, t.t_ras as f64);
    let per_act = p.vdd * (p.idd0 * trc - p.idd3n * tras - p.idd2n * (trc - tras)) * tck;
    let burst = t.t_burst as f64 * tck;
    let per_ref = refab_energy_pj(p, t);
    EnergyBreakdown {
        background: background * pj_to_nj,
        activate: c.acts as f64 * per_act * pj_to_nj,
        read: c.reads as f64 * p.vdd * (p.idd4r - p.idd3n) * burst * pj_to_nj,
        write: c.writes as f64 * p.vdd * (p.idd4w - p.idd3n) * burst * pj_to_nj,
        refresh: (c.refab as f64 + c.refpb as f64 / 8.0) * per_ref * pj_to_nj,
    }
}

/// Sum of [`rank_energy`] over ranks.
pub fn energy(ranks: &[RankCounters], p: &PowerParams, t: &TimingParams) -> EnergyBreakdown {
    let mut e = EnergyBreakdown::default();
    for c in ranks {
        e.add(&rank_energy(c, p, t));
    }
    e
}
