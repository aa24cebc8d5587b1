//! Multi-run experiments: workload mixes, solo baselines for IPC_alone,
//! policy matrices and parameter sweeps.
//!
//! Independent simulations run on the rayon pool. Results are collected in
//! job order, so every table is identical whatever the thread count.

use std::collections::HashMap;
use std::fmt::{self, Write as _};
use std::str::FromStr;
use std::sync::{Arc, Mutex};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::{SimConfig, WorkloadSource, DEFAULT_TRACE_LEN};
use crate::cpu::{default_pool, PoolEntry, TraceRecord};
use crate::error::{Error, Result};
use crate::metrics::{gmean, harmonic_speedup, max_slowdown, weighted_speedup};
use crate::refresh::PolicyKind;
use crate::sim::{load_source, run_with_traces, RunOptions, RunOutput, RunStats};

/// Share of memory-intensive members, in percent, of each mix category.
pub const CATEGORIES: [u32; 5] = [0, 25, 50, 75, 100];

#[derive(Debug, Clone, PartialEq)]
pub struct Mix {
    pub name: String,
    pub intensive_pct: u32,
    pub members: Vec<PoolEntry>,
}

impl Mix {
    pub fn workload(&self) -> Vec<WorkloadSource> {
        self.members.iter().map(|m| WorkloadSource::Spec(m.spec)).collect()
    }

    pub fn member_names(&self) -> Vec<&str> {
        self.members.iter().map(|m| m.name.as_str()).collect()
    }

    /// Puts this mix on `cfg`, one member per core.
    pub fn apply(&self, cfg: &mut SimConfig) {
        cfg.cores = self.members.len() as u32;
        cfg.workload = self.workload();
    }
}

/// `per_category` mixes of `cores` members for each of [`CATEGORIES`],
/// drawn from the default pool.
pub fn gen_workload_mixes(seed: u64, per_category: usize, cores: u32) -> Result<Vec<Mix>> {
    gen_mixes_from(&default_pool(DEFAULT_TRACE_LEN), seed, per_category, cores, &CATEGORIES)
}

/// Mixes drawn from `pool`: each member is picked uniformly, with
/// replacement, from the intensive or the light part of the pool.
pub fn gen_mixes_from(
    pool: &[PoolEntry],
    seed: u64,
    per_category: usize,
    cores: u32,
    categories: &[u32],
) -> Result<Vec<Mix>> {
    if cores == 0 {
        return Err(Error::config("mixes need at least one core"));
    }
    let (heavy, light): (Vec<&PoolEntry>, Vec<&PoolEntry>) = pool.iter().partition(|e| e.intensive());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mixes = Vec::new();
    for &pct in categories {
        if pct > 100 {
            return Err(Error::config(format!("category {pct}% above 100%")));
        }
        let n_heavy = ((pct as f64 / 100.0) * cores as f64).round() as usize;
        let n_light = cores as usize - n_heavy;
        if (n_heavy > 0 && heavy.is_empty()) || (n_light > 0 && light.is_empty()) {
            return Err(Error::config(format!("pool cannot fill a {pct}% mix")));
        }
        for i in 0..per_category {
            let mut members = Vec::with_capacity(cores as usize);
            for _ in 0..n_heavy {
                members.push(heavy[rng.gen_range(0..heavy.len())].clone());
            }
            for _ in 0..n_light {
                members.push(light[rng.gen_range(0..light.len())].clone());
            }
            members.shuffle(&mut rng);
            mixes.push(Mix {
                name: format!("mix{pct}-{i}"),
                intensive_pct: pct,
                members,
            });
        }
    }
    Ok(mixes)
}

/// Mixes of one category only.
pub fn mixes_of_category(seed: u64, count: usize, cores: u32, pct: u32) -> Result<Vec<Mix>> {
    gen_mixes_from(&default_pool(DEFAULT_TRACE_LEN), seed, count, cores, &[pct])
}

pub fn mixes_text(mixes: &[Mix]) -> String {
    let mut s = String::from("# name intensive_pct members\n");
    for m in mixes {
        let _ = writeln!(s, "{} {} {}", m.name, m.intensive_pct, m.member_names().join(","));
    }
    s
}

/// A refresh policy, or refresh switched off.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    NoRefresh,
    Policy(PolicyKind),
}

impl Scheme {
    pub fn apply(self, cfg: &mut SimConfig) {
        match self {
            Scheme::NoRefresh => cfg.no_refresh = true,
            Scheme::Policy(p) => {
                cfg.policy = p;
                cfg.no_refresh = false;
            }
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scheme::NoRefresh => f.write_str("noref"),
            Scheme::Policy(p) => write!(f, "{p}"),
        }
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "noref" {
            Ok(Scheme::NoRefresh)
        } else {
            s.parse().map(Scheme::Policy)
        }
    }
}

/// Comma-separated scheme list.
pub fn parse_schemes(s: &str) -> Result<Vec<Scheme>> {
    s.split(',').map(|p| p.trim().parse()).collect()
}

/// One shared run with its metrics.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub stats: RunStats,
    pub alone: Vec<f64>,
    pub ws: f64,
    pub hs: f64,
    pub max_slowdown: f64,
}

/// Shared state of an experiment: generated traces and solo baselines,
/// both reused across runs.
#[derive(Debug, Default)]
pub struct Experiment {
    traces: Mutex<HashMap<String, Arc<Vec<TraceRecord>>>>,
    alone: Mutex<HashMap<String, f64>>,
    /// Check every run's command and refresh logs.
    pub verify: bool,
}

/// Configuration of the solo run giving IPC_alone for `src` under `cfg`:
/// one core, refresh off, so the baseline is the same for every policy.
pub fn solo_config(cfg: &SimConfig, src: &WorkloadSource) -> SimConfig {
    let mut c = cfg.clone();
    c.cores = 1;
    c.workload = vec![src.clone()];
    c.no_refresh = true;
    c.policy = PolicyKind::RefAb;
    c.output_dir = None;
    c.record_latency = false;
    c
}

impl Experiment {
    pub fn new(verify: bool) -> Self {
        Experiment {
            verify,
            ..Experiment::default()
        }
    }

    pub fn trace(&self, src: &WorkloadSource) -> Result<Arc<Vec<TraceRecord>>> {
        let key = src.key();
        if let Some(t) = self.traces.lock().expect("trace cache").get(&key) {
            return Ok(Arc::clone(t));
        }
        let t = load_source(src)?;
        self.traces.lock().expect("trace cache").insert(key, Arc::clone(&t));
        Ok(t)
    }

    pub fn traces_for(&self, cfg: &SimConfig) -> Result<Vec<Arc<Vec<TraceRecord>>>> {
        (0..cfg.cores).map(|c| self.trace(cfg.core_workload(c))).collect()
    }

    /// Runs `cfg`, verifying the logs when the experiment asks for it.
    pub fn run(&self, cfg: &SimConfig) -> Result<RunOutput> {
        let traces = self.traces_for(cfg)?;
        let opts = RunOptions {
            record_commands: self.verify,
            verify: self.verify,
            exhaustive_scan: false,
        };
        run_with_traces(cfg, &traces, opts)
    }

    /// IPC of `src` running alone.
    pub fn alone_ipc(&self, cfg: &SimConfig, src: &WorkloadSource) -> Result<f64> {
        let solo = solo_config(cfg, src);
        let key = solo.to_text();
        if let Some(&v) = self.alone.lock().expect("alone cache").get(&key) {
            return Ok(v);
        }
        let traces = self.traces_for(&solo)?;
        let opts = RunOptions {
            record_commands: false,
            verify: false,
            exhaustive_scan: false,
        };
        let ipc = run_with_traces(&solo, &traces, opts)?.stats.cores[0].ipc;
        self.alone.lock().expect("alone cache").insert(key, ipc);
        Ok(ipc)
    }

    /// Fills the solo cache for every distinct workload of `cfgs`, in
    /// parallel.
    pub fn prepare_alone(&self, cfgs: &[SimConfig]) -> Result<()> {
        let mut seen = HashMap::new();
        for c in cfgs {
            for core in 0..c.cores {
                let src = c.core_workload(core);
                seen.entry(solo_config(c, src).to_text()).or_insert((c, src));
            }
        }
        let mut jobs: Vec<(String, (&SimConfig, &WorkloadSource))> = seen.into_iter().collect();
        jobs.sort_by(|a, b| a.0.cmp(&b.0));
        jobs.par_iter()
            .map(|(_, (c, src))| self.alone_ipc(c, src).map(|_| ()))
            .collect::<Result<Vec<()>>>()?;
        Ok(())
    }

    pub fn evaluate(&self, cfg: &SimConfig) -> Result<Evaluation> {
        let alone: Vec<f64> = (0..cfg.cores)
            .map(|c| self.alone_ipc(cfg, cfg.core_workload(c)))
            .collect::<Result<_>>()?;
        let out = self.run(cfg)?;
        let shared = out.stats.ipcs();
        Ok(Evaluation {
            ws: weighted_speedup(&shared, &alone)?,
            hs: harmonic_speedup(&shared, &alone)?,
            max_slowdown: max_slowdown(&shared, &alone)?,
            alone,
            stats: out.stats,
        })
    }

    /// Every mix under every scheme.
    pub fn run_matrix(&self, base: &SimConfig, mixes: &[Mix], schemes: &[Scheme]) -> Result<Matrix> {
        let mut sweep = self.run_sweep(base, mixes, &[SweepPoint::Base], schemes)?;
        Ok(sweep.points.remove(0).1)
    }

    /// A matrix per sweep point.
    pub fn run_sweep(
        &self,
        base: &SimConfig,
        mixes: &[Mix],
        points: &[SweepPoint],
        schemes: &[Scheme],
    ) -> Result<Sweep> {
        if mixes.is_empty() || schemes.is_empty() || points.is_empty() {
            return Err(Error::config("experiment needs mixes, schemes and points"));
        }
        let mut jobs = Vec::new();
        for (pi, point) in points.iter().enumerate() {
            for (mi, mix) in mixes.iter().enumerate() {
                for &scheme in schemes {
                    let mut c = base.clone();
                    point.apply(&mut c);
                    mix.apply(&mut c);
                    scheme.apply(&mut c);
                    c.output_dir = None;
                    c.validate()?;
                    jobs.push((pi, mi, scheme, c));
                }
            }
        }
        let cfgs: Vec<SimConfig> = jobs.iter().map(|j| j.3.clone()).collect();
        self.prepare_alone(&cfgs)?;
        let evals: Vec<Result<Evaluation>> = jobs.par_iter().map(|(_, _, _, c)| self.evaluate(c)).collect();
        let mut out: Vec<(String, Matrix)> = points
            .iter()
            .map(|p| {
                (
                    p.to_string(),
                    Matrix {
                        schemes: schemes.to_vec(),
                        rows: Vec::new(),
                        failures: Vec::new(),
                    },
                )
            })
            .collect();
        for ((pi, mi, scheme, _), e) in jobs.into_iter().zip(evals) {
            let mix = &mixes[mi];
            let e = match e {
                Ok(e) => e,
                Err(err) => {
                    out[pi].1.failures.push(Failure {
                        mix: mix.name.clone(),
                        scheme,
                        error: err.to_string(),
                    });
                    continue;
                }
            };
            out[pi].1.rows.push(MatrixRow {
                mix: mix.name.clone(),
                intensive_pct: mix.intensive_pct,
                scheme,
                ws: e.ws,
                hs: e.hs,
                max_slowdown: e.max_slowdown,
                energy_per_access: e.stats.energy_per_access(),
                energy_nj: e.stats.energy.total(),
                accesses: e.stats.accesses,
                refab: e.stats.refab_count(),
                refpb: e.stats.refpb_count(),
            });
        }
        Ok(Sweep { points: out })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixRow {
    pub mix: String,
    pub intensive_pct: u32,
    pub scheme: Scheme,
    pub ws: f64,
    pub hs: f64,
    pub max_slowdown: f64,
    pub energy_per_access: Option<f64>,
    pub energy_nj: f64,
    pub accesses: u64,
    pub refab: u64,
    pub refpb: u64,
}

/// A cell whose run failed, including failed verification.
#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    pub mix: String,
    pub scheme: Scheme,
    pub error: String,
}

/// Rows ordered by mix, then by scheme in the order given. Failed cells are
/// kept apart and never enter the means.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub schemes: Vec<Scheme>,
    pub rows: Vec<MatrixRow>,
    pub failures: Vec<Failure>,
}

impl Matrix {
    fn of(&self, s: Scheme) -> impl Iterator<Item = &MatrixRow> {
        self.rows.iter().filter(move |r| r.scheme == s)
    }

    /// Arithmetic mean of weighted speedup over the mixes.
    pub fn mean_ws(&self, s: Scheme) -> Option<f64> {
        let v: Vec<f64> = self.of(s).map(|r| r.ws).collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }

    pub fn mean_hs(&self, s: Scheme) -> Option<f64> {
        let v: Vec<f64> = self.of(s).map(|r| r.hs).collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }

    pub fn mean_max_slowdown(&self, s: Scheme) -> Option<f64> {
        let v: Vec<f64> = self.of(s).map(|r| r.max_slowdown).collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }

    /// Total energy over total accesses, across mixes.
    pub fn energy_per_access(&self, s: Scheme) -> Option<f64> {
        let (e, a) = self.of(s).fold((0.0, 0u64), |(e, a), r| (e + r.energy_nj, a + r.accesses));
        (a > 0).then(|| e / a as f64)
    }

    /// Relative change of mean WS of `s` over `base`.
    pub fn improvement(&self, s: Scheme, base: Scheme) -> Option<f64> {
        Some(self.mean_ws(s)? / self.mean_ws(base)? - 1.0)
    }

    fn cell(&self, mix: &str, s: Scheme) -> Option<&MatrixRow> {
        self.rows.iter().find(|r| r.mix == mix && r.scheme == s)
    }

    /// Geometric mean, over mixes where both cells succeeded, of the per-mix
    /// WS ratio `s / base`.
    pub fn gmean_ratio(&self, s: Scheme, base: Scheme) -> Option<f64> {
        let ratios: Vec<f64> = self
            .of(s)
            .filter_map(|a| self.cell(&a.mix, base).map(|b| a.ws / b.ws))
            .collect();
        gmean(&ratios)
    }

    pub const CSV_HEADER: &'static str = "mix,intensive_pct,scheme,ws,hs,max_slowdown,energy_per_access_nj,\
accesses,refab,refpb,ws_vs_refab,ws_vs_refpb";

    /// One row per successful cell; the last two columns are WS relative to
    /// REFab and REFpb on the same mix, empty when that cell is missing.
    pub fn to_csv(&self) -> String {
        let mut s = format!("{}\n", Self::CSV_HEADER);
        let rel = |r: &MatrixRow, p: PolicyKind| {
            self.cell(&r.mix, Scheme::Policy(p))
                .map_or(String::new(), |b| format!("{:.6}", r.ws / b.ws - 1.0))
        };
        for r in &self.rows {
            let epa = r.energy_per_access.map_or(String::new(), |v| format!("{v:.6}"));
            let _ = writeln!(
                s,
                "{},{},{},{:.6},{:.6},{:.6},{},{},{},{},{},{}",
                r.mix,
                r.intensive_pct,
                r.scheme,
                r.ws,
                r.hs,
                r.max_slowdown,
                epa,
                r.accesses,
                r.refab,
                r.refpb,
                rel(r, PolicyKind::RefAb),
                rel(r, PolicyKind::RefPb),
            );
        }
        s
    }

    /// One line per scheme. `gmean_vs_*` is the geometric mean of per-mix WS
    /// ratios minus one; empty when that baseline was not run.
    pub fn summary_csv(&self) -> String {
        let mut s = String::from(
            "scheme,cells,failed,mean_ws,mean_hs,mean_max_slowdown,energy_per_access_nj,gmean_vs_refab,gmean_vs_refpb\n",
        );
        let fmt = |v: Option<f64>| v.map_or(String::new(), |v| format!("{v:.6}"));
        let refab = Scheme::Policy(PolicyKind::RefAb);
        let refpb = Scheme::Policy(PolicyKind::RefPb);
        for &sc in &self.schemes {
            let _ = writeln!(
                s,
                "{sc},{},{},{},{},{},{},{},{}",
                self.of(sc).count(),
                self.failures.iter().filter(|f| f.scheme == sc).count(),
                fmt(self.mean_ws(sc)),
                fmt(self.mean_hs(sc)),
                fmt(self.mean_max_slowdown(sc)),
                fmt(self.energy_per_access(sc)),
                fmt(self.gmean_ratio(sc, refab).map(|g| g - 1.0)),
                fmt(self.gmean_ratio(sc, refpb).map(|g| g - 1.0)),
            );
        }
        s
    }

    /// The rows of mixes in one intensity category.
    pub fn category(&self, pct: u32) -> Matrix {
        Matrix {
            schemes: self.schemes.clone(),
            rows: self.rows.iter().filter(|r| r.intensive_pct == pct).cloned().collect(),
            failures: Vec::new(),
        }
    }

    pub fn failures_text(&self) -> String {
        self.failures
            .iter()
            .map(|f| format!("{} {}: {}\n", f.mix, f.scheme, f.error))
            .collect()
    }
}

/// A parameter setting applied on top of the base configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SweepPoint {
    Base,
    Density(u32),
    /// tFAW / tRRD in cycles.
    ActWindow(u64, u64),
    Subarrays(u32),
    Retention(u32),
}

impl SweepPoint {
    pub fn apply(&self, cfg: &mut SimConfig) {
        match *self {
            SweepPoint::Base => {}
            SweepPoint::Density(d) => cfg.org.density_gbit = d,
            SweepPoint::ActWindow(faw, rrd) => {
                cfg.t_faw = Some(faw);
                cfg.t_rrd = Some(rrd);
            }
            SweepPoint::Subarrays(n) => cfg.org.subarrays_per_bank = n,
            SweepPoint::Retention(ms) => cfg.retention_ms = ms,
        }
    }

    /// Points for `param` (`density`, `tfaw`, `subarrays`, `retention`)
    /// from a comma-separated list; `tfaw` values are `faw/rrd`.
    pub fn parse_list(param: &str, values: &str) -> Result<Vec<SweepPoint>> {
        let bad = |v: &str| Error::config(format!("bad {param} value `{v}`"));
        values
            .split(',')
            .map(str::trim)
            .filter(|v| !v.is_empty())
            .map(|v| {
                Ok(match param {
                    "density" => SweepPoint::Density(v.parse().map_err(|_| bad(v))?),
                    "subarrays" => SweepPoint::Subarrays(v.parse().map_err(|_| bad(v))?),
                    "retention" => SweepPoint::Retention(v.parse().map_err(|_| bad(v))?),
                    "tfaw" => {
                        let (f, r) = v.split_once('/').ok_or_else(|| bad(v))?;
                        SweepPoint::ActWindow(
                            f.trim().parse().map_err(|_| bad(v))?,
                            r.trim().parse().map_err(|_| bad(v))?,
                        )
                    }
                    _ => {
                        return Err(Error::config(format!(
                            "unknown sweep parameter `{param}` (density, tfaw, subarrays, retention)"
                        )))
                    }
                })
            })
            .collect()
    }

    /// The tFAW/tRRD pairs 5/1 through 30/6.
    pub fn act_window_series() -> Vec<SweepPoint> {
        (1..=6).map(|k| SweepPoint::ActWindow(5 * k, k)).collect()
    }
}

impl fmt::Display for SweepPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SweepPoint::Base => f.write_str("base"),
            SweepPoint::Density(d) => write!(f, "density={d}"),
            SweepPoint::ActWindow(a, b) => write!(f, "tfaw={a}/{b}"),
            SweepPoint::Subarrays(n) => write!(f, "subarrays={n}"),
            SweepPoint::Retention(ms) => write!(f, "retention={ms}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub points: Vec<(String, Matrix)>,
}

impl Sweep {
    /// Mean WS per point and scheme, with the relative gain over `reference`.
    pub fn to_csv(&self, reference: Scheme) -> String {
        let mut s = format!("point,scheme,mean_ws,gain_vs_{reference}\n");
        for (label, m) in &self.points {
            for &sc in &m.schemes {
                let ws = m.mean_ws(sc).map_or(String::new(), |v| format!("{v:.6}"));
                let gain = m.improvement(sc, reference).map_or(String::new(), |v| format!("{v:.6}"));
                let _ = writeln!(s, "{label},{sc},{ws},{gain}");
            }
        }
        s
    }

    pub fn failures(&self) -> usize {
        self.points.iter().map(|(_, m)| m.failures.len()).sum()
    }

    /// Gain of `s` over `reference` at each point.
    pub fn gains(&self, s: Scheme, reference: Scheme) -> Vec<Option<f64>> {
        self.points.iter().map(|(_, m)| m.improvement(s, reference)).collect()
    }
}
