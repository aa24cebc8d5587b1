//! Experiment configuration: a line-based `key = value` file with optional
//! `[section]` headers.
//!
//! Keys may appear before any header; under a header they must belong to
//! that section. `trace` and `spec` in `[workload]` may repeat, one per core
//! (the list is cycled if shorter than `cores`).

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::controller::QueueConfig;
use crate::cpu::{default_pool, CoreConfig, TraceSpec};
use crate::dram::{derive_timing, AddressMapping, CurrentParams, DramOrg, TimingParams};
use crate::energy::PowerParams;
use crate::error::{Error, Result};
use crate::refresh::PolicyKind;
use crate::Cycle;

#[derive(Debug, Clone, PartialEq)]
pub enum WorkloadSource {
    File(PathBuf),
    Spec(TraceSpec),
}

impl WorkloadSource {
    /// Stable identity used to cache solo runs.
    pub fn key(&self) -> String {
        match self {
            WorkloadSource::File(p) => format!("file:{}", p.display()),
            WorkloadSource::Spec(s) => format!("spec:{s}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub org: DramOrg,
    pub policy: PolicyKind,
    pub retention_ms: u32,
    pub tck_ns: f64,
    /// tFAW/tRRD overrides in cycles.
    pub t_faw: Option<Cycle>,
    pub t_rrd: Option<Cycle>,
    pub currents: CurrentParams,
    pub power: PowerParams,
    pub mapping: AddressMapping,
    pub queue: QueueConfig,
    pub core: CoreConfig,
    pub cores: u32,
    /// Core cycles per controller cycle.
    pub clock_ratio: u32,
    /// Controller cycles to simulate.
    pub sim_cycles: Cycle,
    pub seed: u64,
    pub no_refresh: bool,
    pub scramble_pages: bool,
    pub record_latency: bool,
    pub workload: Vec<WorkloadSource>,
    pub output_dir: Option<PathBuf>,
}

/// Default trace length for generated workloads.
pub const DEFAULT_TRACE_LEN: usize = 50_000;

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            org: DramOrg::default(),
            policy: PolicyKind::RefAb,
            retention_ms: 32,
            tck_ns: 1.5,
            t_faw: None,
            t_rrd: None,
            currents: CurrentParams::default(),
            power: PowerParams::default(),
            mapping: AddressMapping::default(),
            queue: QueueConfig::default(),
            core: CoreConfig::default(),
            cores: 8,
            clock_ratio: 6,
            sim_cycles: 2_000_000,
            seed: 1,
            no_refresh: false,
            scramble_pages: true,
            record_latency: false,
            workload: default_pool(DEFAULT_TRACE_LEN)
                .into_iter()
                .filter(|e| e.intensive())
                .map(|e| WorkloadSource::Spec(e.spec))
                .collect(),
            output_dir: None,
        }
    }
}

const SECTIONS: &[(&str, &[&str])] = &[
    (
        "system",
        &[
            "cores", "clock_ratio", "sim_cycles", "seed", "output_dir", "issue_width", "window",
            "mshrs", "record_latency",
        ],
    ),
    (
        "dram",
        &[
            "channels", "ranks", "banks", "subarrays", "rows", "columns", "column_bytes",
            "density_gbit", "retention_ms", "tck_ns", "tfaw", "trrd", "mapping",
        ],
    ),
    (
        "controller",
        &[
            "policy", "no_refresh", "read_queue", "write_queue", "high_watermark",
            "low_watermark", "scramble_pages",
        ],
    ),
    ("sarp", &["i_act", "i_ref_ab", "i_ref_pb"]),
    ("power", &["vdd", "idd0", "idd2n", "idd3n", "idd4r", "idd4w", "idd5b", "devices", "file"]),
    ("workload", &["trace", "spec"]),
];

fn section_of(key: &str) -> Option<&'static str> {
    SECTIONS.iter().find(|(_, keys)| keys.contains(&key)).map(|(s, _)| *s)
}

fn parse_bool(v: &str) -> Option<bool> {
    match v.to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Some(true),
        "false" | "no" | "off" | "0" => Some(false),
        _ => None,
    }
}

impl SimConfig {
    /// Parses a configuration file body. Relative trace paths resolve
    /// against `base_dir` when given.
    pub fn parse(text: &str, source_name: &str, base_dir: Option<&Path>) -> Result<SimConfig> {
        let mut c = SimConfig::default();
        let mut section: Option<String> = None;
        let mut workload = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let err = |msg: String| Error::Parse {
                source_name: source_name.to_string(),
                line: line_no,
                msg,
            };
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| err(format!("malformed section header `{line}`")))?
                    .trim()
                    .to_ascii_lowercase();
                if !SECTIONS.iter().any(|(s, _)| *s == name) {
                    return Err(err(format!("unknown section `{name}`")));
                }
                section = Some(name);
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected `key = value`, got `{line}`")))?;
            let key = k.trim().to_ascii_lowercase();
            let v = v.trim();
            let home = section_of(&key).ok_or_else(|| err(format!("unknown key `{key}`")))?;
            if let Some(s) = &section {
                if s != home {
                    return Err(err(format!("key `{key}` belongs in [{home}], not [{s}]")));
                }
            }
            c.set(&key, v, base_dir, &mut workload)
                .map_err(|e| match e {
                    Error::Config(m) | Error::Parse { msg: m, .. } => err(m),
                    other => err(other.to_string()),
                })?;
        }
        if !workload.is_empty() {
            c.workload = workload;
        }
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<SimConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        SimConfig::parse(&text, &path.display().to_string(), path.parent())
    }

    /// Sets one key (any section) and revalidates. A `trace` or `spec` key
    /// replaces the whole workload list.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().to_ascii_lowercase();
        if section_of(&key).is_none() {
            return Err(Error::config(format!("unknown key `{key}`")));
        }
        let mut next = self.clone();
        let mut workload = Vec::new();
        next.set(&key, value.trim(), None, &mut workload)?;
        if !workload.is_empty() {
            next.workload = workload;
        }
        next.validate()?;
        *self = next;
        Ok(())
    }

    fn set(
        &mut self,
        key: &str,
        v: &str,
        base_dir: Option<&Path>,
        workload: &mut Vec<WorkloadSource>,
    ) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
            let cleaned = v.replace('_', "");
            cleaned
                .parse()
                .map_err(|_| Error::config(format!("invalid value `{v}` for `{key}`")))
        }
        let flag = |v: &str| {
            parse_bool(v).ok_or_else(|| Error::config(format!("invalid boolean `{v}` for `{key}`")))
        };
        match key {
            "cores" => self.cores = num(key, v)?,
            "clock_ratio" => self.clock_ratio = num(key, v)?,
            "sim_cycles" => self.sim_cycles = num(key, v)?,
            "seed" => self.seed = num(key, v)?,
            "output_dir" => self.output_dir = Some(PathBuf::from(v)),
            "issue_width" => self.core.issue_width = num(key, v)?,
            "window" => self.core.window = num(key, v)?,
            "mshrs" => self.core.mshrs = num(key, v)?,
            "record_latency" => self.record_latency = flag(v)?,
            "channels" => self.org.channels = num(key, v)?,
            "ranks" => self.org.ranks_per_channel = num(key, v)?,
            "banks" => self.org.banks_per_rank = num(key, v)?,
            "subarrays" => self.org.subarrays_per_bank = num(key, v)?,
            "rows" => self.org.rows_per_bank = num(key, v)?,
            "columns" => self.org.columns_per_row = num(key, v)?,
            "column_bytes" => self.org.column_width_bytes = num(key, v)?,
            "density_gbit" => self.org.density_gbit = num(key, v)?,
            "retention_ms" => self.retention_ms = num(key, v)?,
            "tck_ns" => self.tck_ns = num(key, v)?,
            "tfaw" => self.t_faw = Some(num(key, v)?),
            "trrd" => self.t_rrd = Some(num(key, v)?),
            "mapping" => self.mapping = v.parse()?,
            "policy" => self.policy = v.parse()?,
            "no_refresh" => self.no_refresh = flag(v)?,
            "read_queue" => self.queue.read_capacity = num(key, v)?,
            "write_queue" => self.queue.write_capacity = num(key, v)?,
            "high_watermark" => self.queue.high_watermark = num(key, v)?,
            "low_watermark" => self.queue.low_watermark = num(key, v)?,
            "scramble_pages" => self.scramble_pages = flag(v)?,
            "i_act" => self.currents.i_act = num(key, v)?,
            "i_ref_ab" => self.currents.i_ref_ab = num(key, v)?,
            "i_ref_pb" => self.currents.i_ref_pb = num(key, v)?,
            "vdd" => self.power.vdd = num(key, v)?,
            "idd0" => self.power.idd0 = num(key, v)?,
            "idd2n" => self.power.idd2n = num(key, v)?,
            "idd3n" => self.power.idd3n = num(key, v)?,
            "idd4r" => self.power.idd4r = num(key, v)?,
            "idd4w" => self.power.idd4w = num(key, v)?,
            "idd5b" => self.power.idd5b = num(key, v)?,
            "devices" => self.power.devices_per_rank = num(key, v)?,
            "file" => {
                let p = resolve(base_dir, v);
                self.power = PowerParams::load(&p)?;
            }
            "trace" => workload.push(WorkloadSource::File(resolve(base_dir, v))),
            "spec" => workload.push(WorkloadSource::Spec(v.parse()?)),
            _ => unreachable!("key table and setter disagree on `{key}`"),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.org.validate()?;
        self.currents.validate()?;
        self.power.validate()?;
        if self.cores == 0 || self.clock_ratio == 0 || self.sim_cycles == 0 {
            return Err(Error::config("cores, clock_ratio and sim_cycles must be positive"));
        }
        let c = self.core;
        if c.issue_width == 0 || c.window == 0 || c.mshrs == 0 {
            return Err(Error::config("issue_width, window and mshrs must be positive"));
        }
        let q = self.queue;
        if q.read_capacity == 0
            || q.write_capacity == 0
            || q.low_watermark >= q.high_watermark
            || q.high_watermark >= q.write_capacity
        {
            return Err(Error::config(
                "queue sizes need 0 < low_watermark < high_watermark < write_queue",
            ));
        }
        if self.workload.is_empty() {
            return Err(Error::config("no workload given"));
        }
        if self.t_faw.is_some() != self.t_rrd.is_some() {
            return Err(Error::config("tfaw and trrd must be overridden together"));
        }
        self.timing()?.check_invariants()
    }

    /// Subarray access-refresh parallelization is in effect.
    pub fn sarp_active(&self) -> bool {
        self.policy.sarp() && self.org.subarrays_per_bank > 1
    }

    /// Timing for this configuration, including overrides and SARP scaling.
    pub fn timing(&self) -> Result<TimingParams> {
        let p = self.policy;
        let mut t = derive_timing(
            self.org.density_gbit,
            self.retention_ms,
            p.refresh_mode(),
            p.fgr(),
            self.tck_ns,
        )?;
        if let (Some(faw), Some(rrd)) = (self.t_faw, self.t_rrd) {
            t = t.with_act_window(faw, rrd);
        }
        if self.sarp_active() {
            t = t.with_sarp_scaling(&self.currents, p.refresh_mode());
        }
        Ok(t)
    }

    /// Workload of each core.
    pub fn core_workload(&self, core: u32) -> &WorkloadSource {
        &self.workload[core as usize % self.workload.len()]
    }

    /// Serializes to the file format; [`SimConfig::parse`] reads it back to
    /// an equal value.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let o = &self.org;
        let c = &self.core;
        let q = &self.queue;
        let p = &self.power;
        let i = &self.currents;
        let _ = writeln!(s, "[system]");
        let _ = writeln!(s, "cores = {}", self.cores);
        let _ = writeln!(s, "clock_ratio = {}", self.clock_ratio);
        let _ = writeln!(s, "sim_cycles = {}", self.sim_cycles);
        let _ = writeln!(s, "seed = {}", self.seed);
        if let Some(d) = &self.output_dir {
            let _ = writeln!(s, "output_dir = {}", d.display());
        }
        let _ = writeln!(s, "issue_width = {}", c.issue_width);
        let _ = writeln!(s, "window = {}", c.window);
        let _ = writeln!(s, "mshrs = {}", c.mshrs);
        let _ = writeln!(s, "record_latency = {}", self.record_latency);
        let _ = writeln!(s, "[dram]");
        let _ = writeln!(s, "channels = {}", o.channels);
        let _ = writeln!(s, "ranks = {}", o.ranks_per_channel);
        let _ = writeln!(s, "banks = {}", o.banks_per_rank);
        let _ = writeln!(s, "subarrays = {}", o.subarrays_per_bank);
        let _ = writeln!(s, "rows = {}", o.rows_per_bank);
        let _ = writeln!(s, "columns = {}", o.columns_per_row);
        let _ = writeln!(s, "column_bytes = {}", o.column_width_bytes);
        let _ = writeln!(s, "density_gbit = {}", o.density_gbit);
        let _ = writeln!(s, "retention_ms = {}", self.retention_ms);
        let _ = writeln!(s, "tck_ns = {}", self.tck_ns);
        if let (Some(f), Some(r)) = (self.t_faw, self.t_rrd) {
            let _ = writeln!(s, "tfaw = {f}");
            let _ = writeln!(s, "trrd = {r}");
        }
        let _ = writeln!(s, "mapping = {}", self.mapping);
        let _ = writeln!(s, "[controller]");
        let _ = writeln!(s, "policy = {}", self.policy);
        let _ = writeln!(s, "no_refresh = {}", self.no_refresh);
        let _ = writeln!(s, "read_queue = {}", q.read_capacity);
        let _ = writeln!(s, "write_queue = {}", q.write_capacity);
        let _ = writeln!(s, "high_watermark = {}", q.high_watermark);
        let _ = writeln!(s, "low_watermark = {}", q.low_watermark);
        let _ = writeln!(s, "scramble_pages = {}", self.scramble_pages);
        let _ = writeln!(s, "[sarp]");
        let _ = writeln!(s, "i_act = {}", i.i_act);
        let _ = writeln!(s, "i_ref_ab = {}", i.i_ref_ab);
        let _ = writeln!(s, "i_ref_pb = {}", i.i_ref_pb);
        let _ = writeln!(s, "[power]");
        let _ = writeln!(s, "vdd = {}", p.vdd);
        let _ = writeln!(s, "idd0 = {}", p.idd0);
        let _ = writeln!(s, "idd2n = {}", p.idd2n);
        let _ = writeln!(s, "idd3n = {}", p.idd3n);
        let _ = writeln!(s, "idd4r = {}", p.idd4r);
        let _ = writeln!(s, "idd4w = {}", p.idd4w);
        let _ = writeln!(s, "idd5b = {}", p.idd5b);
        let _ = writeln!(s, "devices = {}", p.devices_per_rank);
        let _ = writeln!(s, "[workload]");
        for w in &self.workload {
            match w {
                WorkloadSource::File(p) => {
                    let _ = writeln!(s, "trace = {}", p.display());
                }
                WorkloadSource::Spec(t) => {
                    let _ = writeln!(s, "spec = {t}");
                }
            }
        }
        s
    }
}

fn resolve(base: Option<&Path>, v: &str) -> PathBuf {
    let p = PathBuf::from(v);
    match base {
        Some(b) if p.is_relative() && !b.as_os_str().is_empty() => b.join(p),
        _ => p,
    }
}

/// Prefix of log header lines that carry the run configuration.
pub const HEADER_PREFIX: &str = "#! ";

/// Configuration embedded in a log's `#! ` header lines, if any.
pub fn config_from_log_header(text: &str) -> Option<Result<SimConfig>> {
    let body: String = text
        .lines()
        .take_while(|l| l.starts_with('#'))
        .filter_map(|l| l.strip_prefix(HEADER_PREFIX))
        .map(|l| format!("{l}\n"))
        .collect();
    if body.is_empty() {
        None
    } else {
        Some(SimConfig::parse(&body, "log header", None))
    }
}

/// Header block for a log file.
pub fn log_header(c: &SimConfig) -> String {
    c.to_text().lines().map(|l| format!("{HEADER_PREFIX}{l}\n")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let c = SimConfig::parse("", "e", None).unwrap();
        assert_eq!(c, SimConfig::default());
        assert_eq!(c.cores, 8);
        assert_eq!(c.org.channels, 2);
        assert_eq!(c.org.banks_per_rank, 8);
        assert_eq!(c.workload.len(), 8);
    }

    #[test]
    fn apply_override() {
        let mut c = SimConfig::default();
        c.apply("policy", "dsarp").unwrap();
        assert_eq!(c.policy, crate::refresh::PolicyKind::Dsarp);
        assert!(c.apply("density_gbit", "12").is_err());
        assert_eq!(c.org.density_gbit, SimConfig::default().org.density_gbit);
        assert!(c.apply("nope", "1").is_err());
        c.apply("spec", "mpki=5:footprint=1048576:locality=0.5:wf=0.1:len=100:seed=3").unwrap();
        assert_eq!(c.workload.len(), 1);
    }

    #[test]
    fn policy_key() {
        let c = SimConfig::parse("policy = dsarp\n", "p", None).unwrap();
        assert_eq!(c.policy, PolicyKind::Dsarp);
        let c = SimConfig::parse("[controller]\npolicy = sarp_pb\n", "p", None).unwrap();
        assert_eq!(c.policy, PolicyKind::SarpPb);
    }

    #[test]
    fn errors_have_locations() {
        let e = SimConfig::parse("\n[dram]\ndensity_gbit = 12\n", "x", None).unwrap_err();
        assert!(matches!(e, Error::Config(_) | Error::Parse { .. }), "{e}");
        let e = SimConfig::parse("[dram]\nbogus = 1\n", "x", None).unwrap_err();
        assert!(matches!(e, Error::Parse { line: 2, .. }), "{e}");
        let e = SimConfig::parse("[dram]\npolicy = refab\n", "x", None).unwrap_err();
        assert!(matches!(e, Error::Parse { line: 2, .. }), "{e}");
        let e = SimConfig::parse("[nope]\n", "x", None).unwrap_err();
        assert!(matches!(e, Error::Parse { line: 1, .. }), "{e}");
        assert!(SimConfig::parse("policy = fast\n", "x", None).is_err());
    }

    #[test]
    fn density_12_rejected() {
        assert!(SimConfig::parse("density_gbit = 12", "x", None).is_err());
    }

    #[test]
    fn text_roundtrip() {
        let mut c = SimConfig::default();
        c.policy = PolicyKind::Fgr4x;
        c.t_faw = Some(30);
        c.t_rrd = Some(6);
        c.no_refresh = true;
        c.workload = vec![
            WorkloadSource::Spec(TraceSpec::default()),
            WorkloadSource::File(PathBuf::from("/tmp/a.trace")),
        ];
        assert_eq!(SimConfig::parse(&c.to_text(), "rt", None).unwrap(), c);
        let logged = format!("{}0 ACT 0 0 0 1 0\n", log_header(&c));
        assert_eq!(config_from_log_header(&logged).unwrap().unwrap(), c);
        assert!(config_from_log_header("# plain\n").is_none());
    }

    #[test]
    fn sarp_scaling_only_with_subarrays() {
        let c = SimConfig::parse("policy = sarp_pb", "s", None).unwrap();
        let t = c.timing().unwrap();
        assert_eq!((t.t_faw_ref, t.t_rrd_ref), (23, 5));
        let c = SimConfig::parse("policy = sarp_ab\nsubarrays = 1", "s", None).unwrap();
        let t = c.timing().unwrap();
        assert_eq!((t.t_faw_ref, t.t_rrd_ref), (20, 4));
    }
}
