//! Acceptance gates. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.

use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rayon::prelude::*;

use refsim::config::SimConfig;
use refsim::controller::RankCounters;
use refsim::cpu::TraceRecord;
use refsim::dram::{
    derive_timing, encode_address, retention_audit, sarp_scaled_constraints, verify_command_log, CommandKind,
    CurrentParams, DecodedAddr, FgrMode, RefreshMode, RefreshRecord, RefreshSchedule, TimingParams,
};
use refsim::energy::{rank_energy, PowerParams};
use refsim::experiment::{gen_workload_mixes, mixes_of_category, Experiment, Matrix, Mix, Scheme, SweepPoint};
use refsim::refresh::PolicyKind;
use refsim::sim::{
    commands_text, energy_csv, latency_csv, refreshes_text, run_single, run_with_traces, stats_csv, RunOptions,
    RunOutput,
};
use refsim::Cycle;

const MIX_SEED: u64 = 2024;

struct Gate {
    failed: Vec<u32>,
}

impl Gate {
    fn report(&mut self, id: u32, ok: bool, what: &str, detail: impl AsRef<str>) {
        println!("{} C{id:<2} {what}: {}", if ok { "PASS" } else { "FAIL" }, detail.as_ref());
        if !ok {
            self.failed.push(id);
        }
    }
}

fn p(k: PolicyKind) -> Scheme {
    Scheme::Policy(k)
}

fn base(density: u32) -> SimConfig {
    let mut c = SimConfig::default();
    c.org.density_gbit = density;
    c
}

fn secs(d: Duration) -> String {
    format!("{:.1}s", d.as_secs_f64())
}

fn legality(g: &mut Gate) {
    let exp = Experiment::new(false);
    let mut cfgs = Vec::new();
    for density in [8, 16, 32] {
        for policy in PolicyKind::ALL {
            for seed in 0..10u64 {
                // The seed picks both the run's RNG and a mix; categories
                // cycle so the matrix covers idle and saturated channels.
                let mixes = gen_workload_mixes(seed, 1, 8).expect("mixes");
                let mut c = base(density);
                c.policy = policy;
                c.seed = seed;
                mixes[seed as usize % mixes.len()].apply(&mut c);
                cfgs.push(c);
            }
        }
    }
    let start = Instant::now();
    let opts = RunOptions {
        record_commands: true,
        verify: false,
        exhaustive_scan: false,
    };
    let results: Vec<Result<(usize, usize, (i32, i32)), String>> = cfgs
        .par_iter()
        .map(|c| {
            let traces = exp.traces_for(c).map_err(|e| e.to_string())?;
            let out = run_with_traces(c, &traces, opts).map_err(|e| e.to_string())?;
            let v = verify_command_log(&out.commands, &out.timing, &c.org, c.sarp_active()).len();
            let a = retention_audit(&out.refreshes, &c.org, &out.timing, c.policy.refresh_mode(), 0, c.sim_cycles)
                .len();
            Ok((v, a, out.stats.debt_range))
        })
        .collect();
    let elapsed = start.elapsed();
    let mut errors = Vec::new();
    let (mut viol, mut audit, mut lo, mut hi) = (0, 0, 0, 0);
    for (c, r) in cfgs.iter().zip(&results) {
        match r {
            Ok((v, a, (l, h))) => {
                viol += v;
                audit += a;
                lo = lo.min(*l);
                hi = hi.max(*h);
            }
            Err(e) => errors.push(format!("{}/{}Gb/seed{}: {e}", c.policy, c.org.density_gbit, c.seed)),
        }
    }
    for e in errors.iter().take(5) {
        println!("     run error {e}");
    }
    let budget = Duration::from_secs(300);
    g.report(
        1,
        errors.is_empty() && viol == 0 && elapsed < budget,
        "protocol legality",
        format!(
            "{} runs x {} cycles, {viol} violations, {} run errors, {} (limit {})",
            cfgs.len(),
            cfgs[0].sim_cycles,
            errors.len(),
            secs(elapsed),
            secs(budget)
        ),
    );
    g.report(
        2,
        errors.is_empty() && audit == 0 && lo >= -8 && hi <= 8,
        "retention safety",
        format!("{audit} audit violations, debt range [{lo}, {hi}]"),
    );
}

fn single_bank_stream(c: &SimConfig) -> Vec<TraceRecord> {
    let cols = c.org.columns_per_row;
    (0..50_000u32)
        .map(|i| {
            let d = DecodedAddr {
                channel: 0,
                rank: 0,
                bank: 0,
                row: (i / cols) % c.org.rows_per_bank,
                column: i % cols,
                subarray: 0,
            };
            TraceRecord {
                bubbles: 0,
                read_addr: encode_address(&d, &c.org, &c.mapping),
                writeback: None,
            }
        })
        .collect()
}

/// Length of the union of refresh intervals of each consecutive group of
/// eight REFpb commands to one rank, averaged.
fn busy_per_round(recs: &[RefreshRecord]) -> (f64, usize) {
    let mut r: Vec<&RefreshRecord> = recs
        .iter()
        .filter(|r| r.kind == CommandKind::RefPb && r.channel == 0 && r.rank == 0)
        .collect();
    r.sort_by_key(|r| r.issue);
    let rounds: Vec<Cycle> = r
        .chunks_exact(8)
        .map(|g| {
            let mut busy = 0;
            let mut until = 0;
            for x in g {
                let s = x.issue.max(until);
                if x.completion > s {
                    busy += x.completion - s;
                }
                until = until.max(x.completion);
            }
            busy
        })
        .collect();
    let n = rounds.len();
    (rounds.iter().sum::<Cycle>() as f64 / n.max(1) as f64, n)
}

fn serialization(g: &mut Gate) {
    let mut c = base(32);
    c.cores = 1;
    c.scramble_pages = false;
    c.sim_cycles = 1_000_000;
    let trace = Arc::new(single_bank_stream(&c));
    let run = |policy| {
        let mut c = c.clone();
        c.policy = policy;
        run_with_traces(&c, &[Arc::clone(&trace)], RunOptions::default()).map(|o| (c, o))
    };
    let (pb, ab) = match (run(PolicyKind::RefPb), run(PolicyKind::RefAb)) {
        (Ok(pb), Ok(ab)) => (pb, ab),
        (Err(e), _) | (_, Err(e)) => return g.report(3, false, "REFpb serialization", e.to_string()),
    };
    let t = &pb.1.timing;
    let (busy, rounds) = busy_per_round(&pb.1.refreshes);
    let target = 8.0 / 2.3 * t.t_rfc_ab as f64;
    let err = (busy - target).abs() / target;
    g.report(
        3,
        rounds >= 100 && err <= 0.02,
        "REFpb serialization",
        format!(
            "{rounds} rounds, busy {busy:.1} cycles vs 3.478*tRFCab = {target:.1} (err {:.3}%, 8*tRFCpb = {}); \
             stream IPC refpb {:.4} refab {:.4}",
            err * 100.0,
            8 * t.t_rfc_pb,
            pb.1.stats.cores[0].ipc,
            ab.1.stats.cores[0].ipc
        ),
    );
}

fn timing_table(g: &mut Gate) {
    let mut bad = Vec::new();
    let mut chk = |ok: bool, what: String| {
        if !ok {
            bad.push(what);
        }
    };
    for (d, ns) in [(8, 350.0), (16, 530.0), (32, 890.0)] {
        let ab = derive_timing(d, 32, RefreshMode::AllBank, FgrMode::Off, 1.5).unwrap();
        let pb = derive_timing(d, 32, RefreshMode::PerBank, FgrMode::Off, 1.5).unwrap();
        chk(ab.t_rfc_ab_ns == ns, format!("tRFCab {d}Gb = {}", ab.t_rfc_ab_ns));
        chk(ab.t_refi_ns == 3906.25, format!("tREFI = {}", ab.t_refi_ns));
        let want = ab.t_rfc_ab as f64 / 2.3;
        chk((pb.t_rfc_pb as f64 - want).abs() <= 1.0, format!("tRFCpb {d}Gb = {} vs {want:.2}", pb.t_rfc_pb));
        for (mode, rfc, refi) in [(FgrMode::X2, 1.35, 2.0), (FgrMode::X4, 1.63, 4.0)] {
            let f = derive_timing(d, 32, RefreshMode::AllBank, mode, 1.5).unwrap();
            let rf = ab.t_rfc_ab_ns / f.t_rfc_ab_ns;
            chk((rf - rfc).abs() <= 1e-12 * rfc, format!("FGR {mode} tRFC factor {rf}"));
            chk(ab.t_refi_ns / f.t_refi_ns == refi, format!("FGR {mode} tREFI factor"));
        }
    }
    g.report(
        4,
        bad.is_empty(),
        "timing table",
        if bad.is_empty() {
            "tRFCab 350/530/890 ns, tREFI 3906.25 ns, tRFCpb within 1 cycle, FGR 1.35/1.63 and 2/4".into()
        } else {
            bad.join("; ")
        },
    );
}

fn sarp_scaling(g: &mut Gate) {
    let t = derive_timing(32, 32, RefreshMode::PerBank, FgrMode::Off, 1.5).unwrap();
    let c = CurrentParams::default();
    let ab = sarp_scaled_constraints(&t, &c, RefreshMode::AllBank);
    let pb = sarp_scaled_constraints(&t, &c, RefreshMode::PerBank);
    g.report(
        5,
        (t.t_faw, t.t_rrd) == (20, 4) && ab == (42, 9) && pb == (23, 5),
        "SARP scaling",
        format!(
            "base ({}, {}), all-bank {ab:?} (x{:.3}), per-bank {pb:?} (x{:.3})",
            t.t_faw,
            t.t_rrd,
            c.power_overhead(RefreshMode::AllBank),
            c.power_overhead(RefreshMode::PerBank)
        ),
    );
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn energy_closed_form() -> Result<(), String> {
    let p = PowerParams {
        vdd: 1.5,
        idd0: 55.0,
        idd2n: 32.0,
        idd3n: 38.0,
        idd4r: 157.0,
        idd4w: 128.0,
        idd5b: 235.0,
        devices_per_rank: 8,
    };
    let t: TimingParams = derive_timing(8, 32, RefreshMode::AllBank, FgrMode::Off, 1.5).unwrap();
    let c = RankCounters {
        acts: 10,
        reads: 20,
        writes: 5,
        refab: 2,
        refpb: 8,
        cycles_active: 100,
        cycles_precharged: 50,
        cycles_refreshing: 30,
    };
    let e = rank_energy(&c, &p, &t);
    // 1.5 V, 1.5 ns, 8 devices, tRC 33, tRAS 24, burst 4, tRFCab 234.
    let want = [
        ("background", e.background, 117.72),
        ("activate", e.activate, 110.7),
        ("read", e.read, 171.36),
        ("write", e.write, 32.4),
        ("refresh", e.refresh, 2489.292),
        ("total", e.total(), 2921.472),
        ("per access", e.per_access(25).unwrap(), 2921.472 / 25.0),
    ];
    for (name, got, w) in want {
        if rel(got, w) > 1e-9 {
            return Err(format!("{name}: {got} vs {w}"));
        }
    }
    Ok(())
}

/// Largest `t <= end` at which the bank's debt is zero, with the number of
/// refreshes issued in `[0, t]`.
fn zero_debt_window(issues: &[Cycle], sched: &RefreshSchedule, bank: u32, end: Cycle) -> Option<(Cycle, u64)> {
    let mut cands: Vec<Cycle> = issues.iter().copied().filter(|&t| t <= end).collect();
    let mut k = 0;
    while sched.deadline(bank, k) <= end {
        cands.push(sched.deadline(bank, k));
        k += 1;
    }
    cands.push(end);
    cands.sort_unstable_by(|a, b| b.cmp(a));
    cands.into_iter().find_map(|t| {
        let done = issues.partition_point(|&x| x <= t) as u64;
        (sched.deadlines_through(bank, t) == done).then_some((t, done))
    })
}

fn accounting(g: &mut Gate) {
    let mix = mixes_of_category(MIX_SEED, 1, 8, 25).unwrap().remove(0);
    let mut worst = 0.0f64;
    let mut notes = Vec::new();
    let mut ok = true;
    for policy in [PolicyKind::RefAb, PolicyKind::RefPb, PolicyKind::Darp, PolicyKind::Dsarp] {
        let mut c = base(32);
        c.policy = policy;
        mix.apply(&mut c);
        let out = match run_single(&c) {
            Ok(o) => o,
            Err(e) => {
                ok = false;
                notes.push(format!("{policy}: {e}"));
                continue;
            }
        };
        let mode = policy.refresh_mode();
        let sched = RefreshSchedule::new(mode, &out.timing, c.org.banks_per_rank);
        let kind = match mode {
            RefreshMode::AllBank => CommandKind::RefAb,
            RefreshMode::PerBank => CommandKind::RefPb,
        };
        let mut shortest = Cycle::MAX;
        for ch in 0..c.org.channels {
            for rank in 0..c.org.ranks_per_channel {
                // REFab is counted per rank through bank 0's records.
                let banks = if mode == RefreshMode::AllBank { 1 } else { c.org.banks_per_rank };
                for bank in 0..banks {
                    let mut issues: Vec<Cycle> = out
                        .refreshes
                        .iter()
                        .filter(|r| r.kind == kind && r.channel == ch && r.rank == rank && r.bank == bank)
                        .map(|r| r.issue)
                        .collect();
                    issues.sort_unstable();
                    match zero_debt_window(&issues, &sched, bank, c.sim_cycles - 1) {
                        Some((w, n)) => {
                            let expect = w as f64 / out.timing.t_refi as f64;
                            let dev = (n as f64 - expect).abs();
                            worst = worst.max(dev);
                            shortest = shortest.min(w);
                            if dev > 1.0 || w < c.sim_cycles / 2 {
                                ok = false;
                            }
                        }
                        None => ok = false,
                    }
                }
            }
        }
        notes.push(format!("{policy} window >= {shortest}"));
    }
    g.report(
        11,
        ok,
        "refresh accounting",
        format!("max |count - window/tREFI| = {worst:.3}; {}", notes.join(", ")),
    );
}

fn outputs(c: &SimConfig, o: &RunOutput) -> Vec<String> {
    vec![
        commands_text(c, &o.commands),
        refreshes_text(c, &o.refreshes),
        stats_csv(c, &o.stats),
        energy_csv(c, &o.timing, &o.stats),
        latency_csv(&o.latencies),
    ]
}

fn determinism(g: &mut Gate) {
    let mix = gen_workload_mixes(7, 1, 8).unwrap().remove(3);
    let mut c = base(32);
    c.policy = PolicyKind::Dsarp;
    c.seed = 7;
    c.record_latency = true;
    mix.apply(&mut c);
    let same_run = match (run_single(&c), run_single(&c)) {
        (Ok(a), Ok(b)) => outputs(&c, &a) == outputs(&c, &b),
        _ => false,
    };
    let dirs = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let files_match = [&dirs.0, &dirs.1].iter().all(|d| {
        run_single(&c).and_then(|o| refsim::sim::write_outputs(&c, &o, d.path())).is_ok()
    }) && ["commands.log", "refresh.log", "stats.csv", "energy.csv", "latency.csv"].iter().all(|f| {
        std::fs::read(dirs.0.path().join(f)).ok() == std::fs::read(dirs.1.path().join(f)).ok()
    });
    let mut small = base(32);
    small.sim_cycles = 300_000;
    let mixes: Vec<Mix> = mixes_of_category(MIX_SEED, 2, 8, 50).unwrap();
    let schemes = [p(PolicyKind::RefPb), p(PolicyKind::Dsarp)];
    let m = |_| Experiment::new(true).run_matrix(&small, &mixes, &schemes).map(|m| (m.to_csv(), m.summary_csv()));
    let matrix_match = matches!((m(0), m(1)), (Ok(a), Ok(b)) if a == b);
    g.report(
        13,
        same_run && files_match && matrix_match,
        "determinism",
        format!("in-memory logs {same_run}, written files {files_match}, matrix CSV {matrix_match}"),
    );
}

fn mean(m: &Matrix, s: Scheme) -> f64 {
    m.mean_ws(s).unwrap_or(f64::NAN)
}

fn trends(g: &mut Gate, exp: &Experiment) {
    let mixes = mixes_of_category(MIX_SEED, 16, 8, 100).unwrap();
    let [noref, refab, refpb, darp, sarp_pb, dsarp, fgr2x, fgr4x] = [
        Scheme::NoRefresh,
        p(PolicyKind::RefAb),
        p(PolicyKind::RefPb),
        p(PolicyKind::Darp),
        p(PolicyKind::SarpPb),
        p(PolicyKind::Dsarp),
        p(PolicyKind::Fgr2x),
        p(PolicyKind::Fgr4x),
    ];
    let start = Instant::now();
    let m32 = match exp.run_matrix(&base(32), &mixes, &[noref, refab, refpb, darp, sarp_pb, dsarp, fgr2x, fgr4x]) {
        Ok(m) => m,
        Err(e) => {
            for id in [6, 7, 10, 12] {
                g.report(id, false, "32 Gb matrix", e.to_string());
            }
            return;
        }
    };
    let elapsed = start.elapsed();
    let clean = m32.failures.is_empty();
    if !clean {
        print!("{}", m32.failures_text());
    }
    let ws = |s| mean(&m32, s);
    let gain = m32.improvement(dsarp, refpb).unwrap_or(f64::NAN);
    let budget = Duration::from_secs(900);
    g.report(
        6,
        clean
            && ws(dsarp) >= ws(sarp_pb)
            && ws(sarp_pb) >= ws(refpb)
            && ws(dsarp) >= ws(darp)
            && ws(darp) >= ws(refpb)
            && gain >= 0.03
            && elapsed < budget,
        "trend ordering",
        format!(
            "{} mixes, mean WS refpb {:.4} darp {:.4} sarp_pb {:.4} dsarp {:.4}; dsarp over refpb {:+.2}%; {} (limit {})",
            mixes.len(),
            ws(refpb),
            ws(darp),
            ws(sarp_pb),
            ws(dsarp),
            gain * 100.0,
            secs(elapsed),
            secs(budget)
        ),
    );
    g.report(
        10,
        clean && ws(fgr2x) < ws(refab) && ws(fgr4x) < ws(fgr2x),
        "FGR sign",
        format!("mean WS refab {:.4} fgr2x {:.4} fgr4x {:.4}", ws(refab), ws(fgr2x), ws(fgr4x)),
    );
    let epa = |s| m32.energy_per_access(s).unwrap_or(f64::NAN);
    let closed = energy_closed_form();
    g.report(
        12,
        clean && epa(dsarp) < epa(refab) && closed.is_ok(),
        "energy sign",
        format!(
            "nJ/access refab {:.3} dsarp {:.3}; closed forms {}",
            epa(refab),
            epa(dsarp),
            closed.err().unwrap_or_else(|| "match to 1e-9".into())
        ),
    );

    let degradation = |m: &Matrix| 1.0 - mean(m, refab) / mean(m, noref);
    let lower = exp.run_sweep(&base(32), &mixes, &[SweepPoint::Density(8), SweepPoint::Density(16)], &[noref, refab]);
    match lower {
        Ok(s) => {
            let clean7 = clean && s.failures() == 0;
            let d = [degradation(&s.points[0].1), degradation(&s.points[1].1), degradation(&m32)];
            g.report(
                7,
                clean7 && d[0] < d[1] && d[1] < d[2],
                "density trend",
                format!(
                    "REFab loss vs No-REF: 8 Gb {:.2}%, 16 Gb {:.2}%, 32 Gb {:.2}%",
                    d[0] * 100.0,
                    d[1] * 100.0,
                    d[2] * 100.0
                ),
            );
        }
        Err(e) => g.report(7, false, "density trend", e.to_string()),
    }

    let sweep = |points: Vec<SweepPoint>| exp.run_sweep(&base(32), &mixes, &points, &[refpb, sarp_pb]);
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{:.2}%", x * 100.0)).collect::<Vec<_>>().join(" ");
    let subarrays: Vec<SweepPoint> = [1, 2, 4, 8, 16, 32, 64].map(SweepPoint::Subarrays).to_vec();
    match sweep(subarrays) {
        Ok(s) => {
            let gains: Vec<f64> = s.gains(sarp_pb, refpb).into_iter().map(|x| x.unwrap_or(f64::NAN)).collect();
            g.report(
                8,
                s.failures() == 0 && gains[0] == 0.0 && gains.windows(2).all(|w| w[1] >= w[0]),
                "subarray sweep",
                format!("SARPpb gain over REFpb at 1..64 subarrays: {}", fmt(&gains)),
            );
        }
        Err(e) => g.report(8, false, "subarray sweep", e.to_string()),
    }
    match sweep(SweepPoint::act_window_series()) {
        Ok(s) => {
            let gains: Vec<f64> = s.gains(sarp_pb, refpb).into_iter().map(|x| x.unwrap_or(f64::NAN)).collect();
            g.report(
                9,
                s.failures() == 0 && gains.windows(2).all(|w| w[1] <= w[0]),
                "tFAW sweep",
                format!("SARPpb gain over REFpb at tFAW/tRRD 5/1..30/6: {}", fmt(&gains)),
            );
        }
        Err(e) => g.report(9, false, "tFAW sweep", e.to_string()),
    }
}

fn main() -> ExitCode {
    let start = Instant::now();
    let mut g = Gate { failed: Vec::new() };
    // ACCEPTANCE_ONLY=legality,trends runs a subset while iterating.
    let only = std::env::var("ACCEPTANCE_ONLY").ok();
    let want = |name: &str| only.as_deref().is_none_or(|o| o.split(',').any(|x| x == name));
    let groups: [(&str, fn(&mut Gate)); 7] = [
        ("timing", timing_table),
        ("sarp", sarp_scaling),
        ("serialization", serialization),
        ("accounting", accounting),
        ("determinism", determinism),
        ("legality", legality),
        ("trends", |g| trends(g, &Experiment::new(true))),
    ];
    for (name, f) in groups {
        if want(name) {
            f(&mut g);
        }
    }
    println!("acceptance finished in {}", secs(start.elapsed()));
    if g.failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        g.failed.sort_unstable();
        println!("failed criteria: {:?}", g.failed);
        ExitCode::FAILURE
    }
}
