//! Whole-system simulation: cores, address mapping and per-channel
//! controllers advanced in lockstep, plus log emission and the automatic
//! protocol and retention checks.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use crate::config::{log_header, SimConfig, WorkloadSource};
use crate::controller::{
    ChannelController, ChannelStats, Completion, ControllerConfig, Enqueue, LatencyRecord,
    RankCounters, ReqKind,
};
use crate::cpu::{generate_trace, read_trace, Core, MemoryPort, PageMapper, TraceRecord};
use crate::dram::{
    decode_address, retention_audit, verify_command_log, AddressMapping, Command, DramOrg,
    RefreshRecord, TimingParams,
};
use crate::energy::{energy, rank_energy, EnergyBreakdown};
use crate::error::{Error, Result};
use crate::Cycle;

/// Loads or generates each core's trace.
pub fn load_traces(cfg: &SimConfig) -> Result<Vec<Arc<Vec<TraceRecord>>>> {
    (0..cfg.cores)
        .map(|c| load_source(cfg.core_workload(c)))
        .collect()
}

pub fn load_source(src: &WorkloadSource) -> Result<Arc<Vec<TraceRecord>>> {
    let t = match src {
        WorkloadSource::File(p) => read_trace(p)?,
        WorkloadSource::Spec(s) => generate_trace(s)?,
    };
    if t.is_empty() {
        return Err(Error::config(format!("workload {} is empty", src.key())));
    }
    Ok(Arc::new(t))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoreStats {
    pub retired: u64,
    pub cycles: u64,
    pub ipc: f64,
    pub reads: u64,
    pub writes: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunStats {
    pub cycles: Cycle,
    pub cores: Vec<CoreStats>,
    pub channels: Vec<ChannelStats>,
    /// Per-rank counters, channel-major.
    pub ranks: Vec<RankCounters>,
    pub energy: EnergyBreakdown,
    /// Reads and writes serviced by DRAM (forwarded reads excluded).
    pub accesses: u64,
    /// Lowest and highest refresh debt seen by any bank.
    pub debt_range: (i32, i32),
}

impl RunStats {
    pub fn ipcs(&self) -> Vec<f64> {
        self.cores.iter().map(|c| c.ipc).collect()
    }

    pub fn energy_per_access(&self) -> Option<f64> {
        self.energy.per_access(self.accesses)
    }

    pub fn refab_count(&self) -> u64 {
        self.ranks.iter().map(|r| r.refab).sum()
    }

    pub fn refpb_count(&self) -> u64 {
        self.ranks.iter().map(|r| r.refpb).sum()
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub stats: RunStats,
    pub timing: TimingParams,
    /// Commands of all channels ordered by cycle, then channel.
    pub commands: Vec<Command>,
    pub refreshes: Vec<RefreshRecord>,
    pub latencies: Vec<LatencyRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    /// Keep the full command log (needed for verification).
    pub record_commands: bool,
    /// Replay the command log and audit refreshes; fail on any violation.
    pub verify: bool,
    /// Disable the scheduler's sleep-until-ready shortcut.
    pub exhaustive_scan: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            record_commands: true,
            verify: true,
            exhaustive_scan: false,
        }
    }
}

struct Port<'a> {
    channels: &'a mut [ChannelController],
    mapper: PageMapper,
    org: DramOrg,
    mapping: AddressMapping,
    line_mask: u64,
    now: Cycle,
}

impl Port<'_> {
    fn send(&mut self, core: u32, tag: u64, kind: ReqKind, addr: u64) -> bool {
        let phys = self.mapper.map(core, addr) & self.line_mask;
        let d = decode_address(phys, &self.org, &self.mapping)
            .expect("mapper keeps addresses inside capacity");
        self.channels[d.channel as usize].enqueue(core, tag, kind, phys, d, self.now)
            != Enqueue::Rejected
    }
}

impl MemoryPort for Port<'_> {
    fn send_read(&mut self, core: u32, tag: u64, addr: u64) -> bool {
        self.send(core, tag, ReqKind::Read, addr)
    }

    fn send_write(&mut self, core: u32, addr: u64) -> bool {
        self.send(core, 0, ReqKind::Write, addr)
    }
}

/// Loads the workload and runs it.
pub fn run_single(cfg: &SimConfig) -> Result<RunOutput> {
    let traces = load_traces(cfg)?;
    run_with_traces(cfg, &traces, RunOptions::default())
}

/// Runs `cfg` with one trace per core.
pub fn run_with_traces(
    cfg: &SimConfig,
    traces: &[Arc<Vec<TraceRecord>>],
    opts: RunOptions,
) -> Result<RunOutput> {
    cfg.validate()?;
    if traces.len() != cfg.cores as usize {
        return Err(Error::config(format!(
            "{} traces for {} cores",
            traces.len(),
            cfg.cores
        )));
    }
    let org = cfg.org;
    let t = cfg.timing()?;
    let mut ccfg = ControllerConfig::new(cfg.policy, &org);
    ccfg.queue = cfg.queue;
    ccfg.refresh_enabled = !cfg.no_refresh;
    ccfg.seed = cfg.seed;
    ccfg.record_commands = opts.record_commands || opts.verify;
    ccfg.record_latency = cfg.record_latency;
    ccfg.exhaustive_scan = opts.exhaustive_scan;
    let mut channels: Vec<ChannelController> = (0..org.channels)
        .map(|ch| ChannelController::new(ch, org, t, ccfg))
        .collect();
    let mut cores: Vec<Core> = traces
        .iter()
        .enumerate()
        .map(|(i, tr)| Core::new(i as u32, cfg.core, Arc::clone(tr)))
        .collect();
    let mapper = PageMapper::new(org.capacity_bytes(), cfg.cores, cfg.scramble_pages);
    let line_mask = !(org.column_width_bytes as u64 - 1);
    let ratio = cfg.clock_ratio as u64;
    let mut done: Vec<Completion> = Vec::new();

    for now in 0..cfg.sim_cycles {
        for ch in channels.iter_mut() {
            ch.drain_completions(now, &mut done);
        }
        for c in done.drain(..) {
            cores[c.core as usize].complete(c.tag);
        }
        {
            let mut port = Port {
                channels: &mut channels,
                mapper,
                org,
                mapping: cfg.mapping,
                line_mask,
                now,
            };
            for core in cores.iter_mut() {
                // A core waiting only on memory cannot move before the next
                // completion, which arrives at a controller cycle boundary.
                if core.stalled && !core.rejected {
                    core.skip_stalled(ratio);
                    continue;
                }
                let mut sub = 0;
                while sub < ratio {
                    let m = core.cruise(ratio - sub);
                    if m > 0 {
                        sub += m;
                        continue;
                    }
                    core.tick(&mut port);
                    sub += 1;
                    if core.stalled {
                        core.skip_stalled(ratio - sub);
                        break;
                    }
                }
                core.check_bounds()
                    .map_err(|msg| Error::Invariant { cycle: now, msg })?;
            }
        }
        for ch in channels.iter_mut() {
            ch.tick(now)?;
        }
    }

    let stats = collect_stats(cfg, &t, &channels, &cores);
    let mut commands: Vec<Command> = Vec::new();
    let mut refreshes = Vec::new();
    let mut latencies = Vec::new();
    for ch in channels.iter_mut() {
        commands.append(&mut ch.commands);
        refreshes.append(&mut ch.refreshes);
        latencies.append(&mut ch.latencies);
    }
    // Stable sorts keep per-channel issue order within a cycle.
    commands.sort_by_key(|c| (c.cycle, c.channel));
    refreshes.sort_by_key(|r| (r.issue, r.channel, r.rank, r.bank));
    latencies.sort_by_key(|l| (l.completion, l.arrival, l.core));
    let out = RunOutput {
        stats,
        timing: t,
        commands,
        refreshes,
        latencies,
    };
    if opts.verify {
        check_run(cfg, &out)?;
    }
    if !opts.record_commands {
        let mut out = out;
        out.commands = Vec::new();
        return Ok(out);
    }
    Ok(out)
}

fn collect_stats(
    cfg: &SimConfig,
    t: &TimingParams,
    channels: &[ChannelController],
    cores: &[Core],
) -> RunStats {
    let ranks: Vec<RankCounters> = channels.iter().flat_map(|c| c.stats.ranks.clone()).collect();
    let debt_range = channels
        .iter()
        .map(|c| c.debt_range())
        .fold((0, 0), |(lo, hi), (a, b)| (lo.min(a), hi.max(b)));
    RunStats {
        cycles: cfg.sim_cycles,
        cores: cores
            .iter()
            .map(|c| CoreStats {
                retired: c.retired,
                cycles: c.cycles,
                ipc: c.ipc(),
                reads: c.reads_sent,
                writes: c.writes_sent,
            })
            .collect(),
        channels: channels.iter().map(|c| c.stats.clone()).collect(),
        energy: energy(&ranks, &cfg.power, t),
        accesses: ranks.iter().map(|r| r.reads + r.writes).sum(),
        ranks,
        debt_range,
    }
}

/// Replays the command log and audits the refresh log.
pub fn check_run(cfg: &SimConfig, out: &RunOutput) -> Result<()> {
    let v = verify_command_log(&out.commands, &out.timing, &cfg.org, cfg.sarp_active());
    if let Some(first) = v.first() {
        return Err(Error::Verification(format!(
            "{} protocol violation(s), first: {first}",
            v.len()
        )));
    }
    if cfg.no_refresh {
        return Ok(());
    }
    let a = retention_audit(
        &out.refreshes,
        &cfg.org,
        &out.timing,
        cfg.policy.refresh_mode(),
        0,
        cfg.sim_cycles,
    );
    if let Some(first) = a.first() {
        return Err(Error::Verification(format!(
            "{} retention violation(s), first: {first}",
            a.len()
        )));
    }
    Ok(())
}

pub fn commands_text(cfg: &SimConfig, cmds: &[Command]) -> String {
    let mut s = log_header(cfg);
    s.push_str("# cycle kind channel rank bank row subarray\n");
    s.reserve(cmds.len() * 24);
    for c in cmds {
        c.write_record(&mut s);
    }
    s
}

pub fn refreshes_text(cfg: &SimConfig, recs: &[RefreshRecord]) -> String {
    let mut s = log_header(cfg);
    s.push_str("# issue kind channel rank bank row_start row_count subarray completion\n");
    for r in recs {
        r.write_record(&mut s);
    }
    s
}

pub fn latency_csv(lat: &[LatencyRecord]) -> String {
    let mut s = String::from("core,kind,arrival,completion\n");
    for l in lat {
        let _ = writeln!(s, "{},{},{},{}", l.core, l.kind.as_str(), l.arrival, l.completion);
    }
    s
}

pub fn stats_csv(cfg: &SimConfig, st: &RunStats) -> String {
    let mut s = String::from("core,workload,retired,cycles,ipc,reads,writes\n");
    for (i, c) in st.cores.iter().enumerate() {
        let _ = writeln!(
            s,
            "{i},{},{},{},{:.6},{},{}",
            cfg.core_workload(i as u32).key(),
            c.retired,
            c.cycles,
            c.ipc,
            c.reads,
            c.writes
        );
    }
    s
}

pub fn energy_csv(cfg: &SimConfig, t: &TimingParams, st: &RunStats) -> String {
    let mut s = format!(
        "channel,rank,acts,reads,writes,refab,refpb,cycles_active,cycles_precharged,cycles_refreshing,{}\n",
        EnergyBreakdown::CSV_HEADER
    );
    let per = cfg.org.ranks_per_channel as usize;
    for (i, r) in st.ranks.iter().enumerate() {
        let e = rank_energy(r, &cfg.power, t);
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{}",
            i / per,
            i % per,
            r.acts,
            r.reads,
            r.writes,
            r.refab,
            r.refpb,
            r.cycles_active,
            r.cycles_precharged,
            r.cycles_refreshing,
            e.csv_fields()
        );
    }
    let _ = writeln!(
        s,
        "all,all,,,,,,,,,{}",
        st.energy.csv_fields()
    );
    s
}

fn write_file(dir: &Path, name: &str, body: &str) -> Result<()> {
    let p = dir.join(name);
    std::fs::write(&p, body).map_err(|e| Error::io(p, e))
}

/// Writes `commands.log`, `refresh.log`, `stats.csv`, `energy.csv` and, when
/// latencies were recorded, `latency.csv`.
pub fn write_outputs(cfg: &SimConfig, out: &RunOutput, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_file(dir, "commands.log", &commands_text(cfg, &out.commands))?;
    write_file(dir, "refresh.log", &refreshes_text(cfg, &out.refreshes))?;
    write_file(dir, "stats.csv", &stats_csv(cfg, &out.stats))?;
    write_file(dir, "energy.csv", &energy_csv(cfg, &out.timing, &out.stats))?;
    if cfg.record_latency {
        write_file(dir, "latency.csv", &latency_csv(&out.latencies))?;
    }
    Ok(())
}
