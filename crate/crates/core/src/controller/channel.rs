use std::cmp::Reverse;
use std::collections::BinaryHeap;

use crate::dram::{
    Command, CommandKind, DecodedAddr, DramChannel, DramOrg, PowerState, RefreshRecord,
    TimingParams,
};
use crate::error::{Error, Result};
use crate::refresh::{Origin, PolicyKind, RankRefresh, RankView, RefreshAction, RefreshIntent};
use crate::Cycle;

use super::queue::{enqueue_request, update_drain_mode, Enqueue, QueueConfig, QueueState, ReqKind, Request};
use super::sched::{frfcfs_scan, fresh_bound, next_command, Block};

/// Builds a [`RankView`] borrowing only the queue and device fields, so the
/// rank's refresh unit can be borrowed mutably alongside it.
macro_rules! rank_view {
    ($s:expr, $rank:expr, $now:expr) => {
        RankView {
            now: $now,
            rank: $rank,
            pending: $s.queues.pending_for_rank($rank),
            busy: $s.queues.busy_banks($rank),
            drain: $s.queues.drain,
            dram: &$s.dram,
        }
    };
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ControllerConfig {
    pub queue: QueueConfig,
    pub policy: PolicyKind,
    /// Subarray parallelism active in the device (policy asks for it and
    /// banks have more than one subarray).
    pub sarp: bool,
    pub refresh_enabled: bool,
    pub seed: u64,
    pub record_commands: bool,
    pub record_latency: bool,
    /// Longest a request may wait before the run is aborted.
    pub watchdog: Cycle,
    /// Rescan the queues every cycle instead of sleeping until the computed
    /// wake-up cycle. Only useful to cross-check the wake-up bound.
    pub exhaustive_scan: bool,
}

impl ControllerConfig {
    pub fn new(policy: PolicyKind, org: &DramOrg) -> Self {
        ControllerConfig {
            queue: QueueConfig::default(),
            policy,
            sarp: policy.sarp() && org.subarrays_per_bank > 1,
            refresh_enabled: true,
            seed: 0,
            record_commands: true,
            record_latency: false,
            watchdog: 1_000_000,
            exhaustive_scan: false,
        }
    }
}

/// Controller-side copies of a bank's refresh position: which subarray and
/// which row inside it the next refresh covers.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ShadowCounter {
    pub subarray: u32,
    pub local_row: u32,
}

impl ShadowCounter {
    pub fn advance(&mut self, rows: u32, rows_per_subarray: u32, subarrays: u32) {
        self.local_row += rows;
        while self.local_row >= rows_per_subarray {
            self.local_row -= rows_per_subarray;
            self.subarray = (self.subarray + 1) % subarrays;
        }
    }

    pub fn row(&self, rows_per_subarray: u32) -> u32 {
        self.subarray * rows_per_subarray + self.local_row
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RankCounters {
    pub acts: u64,
    pub reads: u64,
    pub writes: u64,
    pub refab: u64,
    pub refpb: u64,
    pub cycles_active: u64,
    pub cycles_precharged: u64,
    pub cycles_refreshing: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ChannelStats {
    pub ranks: Vec<RankCounters>,
    pub forwarded_reads: u64,
    pub reads_served: u64,
    pub writes_served: u64,
    pub read_latency_total: u64,
    /// Refreshes by origin: scheduled, postponed, pulled in.
    pub origin_counts: [u64; 3],
    pub wrp_refreshes: u64,
    /// Cycles in which both a demand command and a pull-in refresh issued.
    pub demand_during_pull_in: u64,
    pub max_wait: Cycle,
    pub cycles: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LatencyRecord {
    pub core: u32,
    pub kind: ReqKind,
    pub arrival: Cycle,
    pub completion: Cycle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Completion {
    pub core: u32,
    pub tag: u64,
    pub cycle: Cycle,
}

#[derive(Debug, Clone)]
pub struct ChannelController {
    pub id: u32,
    pub cfg: ControllerConfig,
    pub dram: DramChannel,
    pub queues: QueueState,
    refresh: Vec<RankRefresh>,
    shadow: Vec<ShadowCounter>,
    blocks: Vec<Block>,
    prev_blocks: Vec<Block>,
    /// Some entry of `blocks` is not `Block::None`.
    blocks_any: bool,
    /// No demand command can be ready before this cycle unless something
    /// changes (`sched_dirty`).
    sched_wake: Cycle,
    sched_dirty: bool,
    /// Requests accepted since the last full scan while it was still valid.
    fresh: Vec<usize>,
    returns: BinaryHeap<Reverse<(Cycle, u64, u32, u64)>>,
    return_seq: u64,
    pub stats: ChannelStats,
    pub commands: Vec<Command>,
    pub refreshes: Vec<RefreshRecord>,
    pub latencies: Vec<LatencyRecord>,
    scratch: Vec<RefreshRecord>,
}

impl ChannelController {
    pub fn new(id: u32, org: DramOrg, t: TimingParams, cfg: ControllerConfig) -> Self {
        let ranks = org.ranks_per_channel;
        let banks = org.banks_per_rank;
        ChannelController {
            id,
            cfg,
            dram: DramChannel::new(id, org, t, cfg.sarp),
            queues: QueueState::new(cfg.queue, ranks, banks, org.column_width_bytes as u64),
            refresh: (0..ranks)
                .map(|r| RankRefresh::new(cfg.policy, &t, banks, id, r, cfg.seed, cfg.refresh_enabled))
                .collect(),
            shadow: vec![ShadowCounter::default(); (ranks * banks) as usize],
            blocks: vec![Block::None; (ranks * banks) as usize],
            prev_blocks: vec![Block::None; (ranks * banks) as usize],
            blocks_any: false,
            sched_wake: 0,
            sched_dirty: true,
            fresh: Vec::new(),
            returns: BinaryHeap::new(),
            return_seq: 0,
            stats: ChannelStats {
                ranks: vec![RankCounters::default(); ranks as usize],
                ..ChannelStats::default()
            },
            commands: Vec::new(),
            refreshes: Vec::new(),
            latencies: Vec::new(),
            scratch: Vec::new(),
        }
    }

    pub fn refresh_units(&self) -> &[RankRefresh] {
        &self.refresh
    }

    /// Offers a request from a core. Reads hitting a queued write complete
    /// on the next cycle.
    pub fn enqueue(
        &mut self,
        core: u32,
        tag: u64,
        kind: ReqKind,
        addr: u64,
        decoded: DecodedAddr,
        now: Cycle,
    ) -> Enqueue {
        let req = Request {
            id: 0,
            core,
            tag,
            kind,
            addr,
            decoded,
            arrival: now,
            issue: None,
            completion: None,
        };
        let would_accept = match kind {
            ReqKind::Read => {
                self.queues.has_write_to(addr) || self.queues.reads < self.queues.cfg.read_capacity
            }
            ReqKind::Write => self.queues.writes < self.queues.cfg.write_capacity,
        };
        if !would_accept {
            return Enqueue::Rejected;
        }
        let req = Request {
            id: self.queues.next_id(),
            ..req
        };
        let slot = self.queues.slot(decoded.rank, decoded.bank);
        let res = enqueue_request(&mut self.queues, req);
        if res == Enqueue::Accepted && !self.sched_dirty {
            let idx = *self.queues.queue(kind, slot).back().expect("just queued");
            self.fresh.push(idx);
        }
        if res == Enqueue::Forwarded {
            self.stats.forwarded_reads += 1;
            self.push_return(core, tag, now + 1);
            self.record_latency(core, ReqKind::Read, now, now + 1);
        }
        res
    }

    fn push_return(&mut self, core: u32, tag: u64, cycle: Cycle) {
        self.returns.push(Reverse((cycle, self.return_seq, core, tag)));
        self.return_seq += 1;
    }

    fn record_latency(&mut self, core: u32, kind: ReqKind, arrival: Cycle, completion: Cycle) {
        if kind == ReqKind::Read {
            self.stats.read_latency_total += completion - arrival;
        }
        if self.cfg.record_latency {
            self.latencies.push(LatencyRecord {
                core,
                kind,
                arrival,
                completion,
            });
        }
    }

    /// Pops read completions due at or before `now`.
    pub fn drain_completions(&mut self, now: Cycle, out: &mut Vec<Completion>) {
        while let Some(Reverse((cycle, _, core, tag))) = self.returns.peek().copied() {
            if cycle > now {
                break;
            }
            self.returns.pop();
            out.push(Completion { core, tag, cycle });
        }
    }

    pub fn next_return(&self) -> Option<Cycle> {
        self.returns.peek().map(|Reverse((c, ..))| *c)
    }

    /// True when nothing is queued or in flight in the controller.
    pub fn idle(&self) -> bool {
        self.queues.is_empty() && self.returns.is_empty()
    }

    fn refresh_command(&self, action: RefreshAction, now: Cycle) -> Option<Command> {
        match action {
            RefreshAction::None => None,
            RefreshAction::IssueRefAb { rank } => Some(Command::refab(now, self.id, rank)),
            RefreshAction::IssueRefPb { rank, bank, .. } => {
                Some(self.dram.refpb_command(now, rank, bank))
            }
        }
    }

    fn set_blocks(&mut self, intent: &RefreshIntent) {
        let sarp = self.cfg.sarp;
        let banks = self.dram.org.banks_per_rank;
        if intent.action != RefreshAction::None {
            self.blocks_any = true;
        }
        let hold = |slot: usize, rank: u32, bank: u32, blocks: &mut [Block]| {
            blocks[slot] = if sarp {
                Block::Subarray(self.dram.next_refresh_subarray(rank, bank))
            } else {
                Block::Bank
            };
        };
        match intent.action {
            RefreshAction::None => {}
            RefreshAction::IssueRefAb { rank } => {
                for bank in 0..banks {
                    hold(self.queues.slot(rank, bank), rank, bank, &mut self.blocks);
                }
            }
            RefreshAction::IssueRefPb { rank, bank, .. } => {
                hold(self.queues.slot(rank, bank), rank, bank, &mut self.blocks);
            }
        }
    }

    fn issue_refresh(&mut self, action: RefreshAction, cmd: Command, now: Cycle, wrp: bool) -> Result<()> {
        self.scratch.clear();
        self.dram.apply_command(&cmd, now, &mut self.scratch);
        let rank = cmd.rank;
        self.refresh[rank as usize].issued(action, now)?;
        let org = self.dram.org;
        let rows = self.dram.rows_per_refresh;
        for rec in &self.scratch {
            let slot = self.queues.slot(rec.rank, rec.bank);
            let sh = &mut self.shadow[slot];
            if sh.row(org.rows_per_subarray()) != rec.row_start {
                return Err(Error::Invariant {
                    cycle: now,
                    msg: format!(
                        "shadow refresh counter {sh:?} disagrees with device row {} (rank {} bank {})",
                        rec.row_start, rec.rank, rec.bank
                    ),
                });
            }
            sh.advance(rows, org.rows_per_subarray(), org.subarrays_per_bank);
            let dev = self.dram.bank(rec.rank, rec.bank).refresh_row_counter;
            debug_assert_eq!(sh.row(org.rows_per_subarray()), dev);
        }
        let counters = &mut self.stats.ranks[rank as usize];
        match action {
            RefreshAction::IssueRefAb { .. } => counters.refab += 1,
            RefreshAction::IssueRefPb { origin, .. } => {
                counters.refpb += 1;
                let i = match origin {
                    Origin::Scheduled => 0,
                    Origin::Postponed => 1,
                    Origin::PulledIn => 2,
                };
                self.stats.origin_counts[i] += 1;
            }
            RefreshAction::None => {}
        }
        if wrp {
            self.stats.wrp_refreshes += 1;
        }
        if self.cfg.record_commands {
            self.commands.push(cmd);
        }
        self.refreshes.extend_from_slice(&self.scratch);
        Ok(())
    }

    fn issue_demand(&mut self, idx: usize, now: Cycle) {
        let cmd = next_command(self.queues.get(idx), &self.dram, now);
        let data_end = self.dram.apply_command(&cmd, now, &mut self.scratch);
        let counters = &mut self.stats.ranks[cmd.rank as usize];
        match cmd.kind {
            CommandKind::Act => {
                counters.acts += 1;
                self.queues.activate(idx, now);
            }
            CommandKind::Rd | CommandKind::Wr => {
                let end = data_end.expect("column command has a burst");
                let slot = self.queues.slot(cmd.rank, cmd.bank);
                let req = self.queues.retire_activated(slot, end);
                if cmd.kind == CommandKind::Rd {
                    counters.reads += 1;
                    self.stats.reads_served += 1;
                    self.push_return(req.core, req.tag, end);
                } else {
                    counters.writes += 1;
                    self.stats.writes_served += 1;
                }
                self.record_latency(req.core, req.kind, req.arrival, end);
            }
            _ => unreachable!("demand commands are ACT/RD/WR"),
        }
        if self.cfg.record_commands {
            self.commands.push(cmd);
        }
    }

    /// One controller cycle: drain hysteresis, refresh bookkeeping, then at
    /// most one command on the channel's command bus.
    ///
    /// Bus priority: refreshes the policy must issue (due, forced, write-
    /// refresh parallelization), then demand, then opportunistic pull-ins.
    pub fn tick(&mut self, now: Cycle) -> Result<()> {
        self.stats.cycles += 1;
        let drain_before = self.queues.drain;
        update_drain_mode(&mut self.queues);
        if self.queues.drain != drain_before {
            self.sched_dirty = true;
        }
        let ranks = self.dram.org.ranks_per_channel;

        let had_blocks = self.blocks_any;
        if had_blocks {
            self.blocks.iter_mut().for_each(|b| *b = Block::None);
            self.blocks_any = false;
        }
        let mut chosen: Option<(RefreshAction, Command, bool)> = None;
        let (mut demand_issued, mut pull_in_issued) = (false, false);
        for r in 0..ranks {
            // Ranks are independent, so each can be advanced and asked in turn.
            let v = rank_view!(self, r, now);
            let unit = &mut self.refresh[r as usize];
            unit.tick(&v)?;
            let Some(intent) = unit.mandatory(&v) else { continue };
            if intent.block {
                self.set_blocks(&intent);
            }
            if chosen.is_none() {
                if let Some(cmd) = self.refresh_command(intent.action, now) {
                    if self.dram.command_legal(&cmd, now).is_legal() {
                        chosen = Some((intent.action, cmd, intent.wrp));
                    }
                }
            }
        }

        if (had_blocks || self.blocks_any) && self.blocks != self.prev_blocks {
            self.sched_dirty = true;
            self.prev_blocks.copy_from_slice(&self.blocks);
        }

        if let Some((action, cmd, wrp)) = chosen {
            self.issue_refresh(action, cmd, now, wrp)?;
            self.sched_dirty = true;
        } else if let Some(idx) = self.pick_demand(now) {
            demand_issued = true;
            self.issue_demand(idx, now);
            self.sched_dirty = true;
        } else {
            for r in 0..ranks {
                let v = rank_view!(self, r, now);
                if let Some(action) = self.refresh[r as usize].opportunistic(&v) {
                    let cmd = self.refresh_command(action, now).expect("refresh action");
                    debug_assert!(self.dram.command_legal(&cmd, now).is_legal());
                    self.issue_refresh(action, cmd, now, false)?;
                    self.sched_dirty = true;
                    pull_in_issued = true;
                    break;
                }
            }
        }

        if demand_issued && pull_in_issued {
            self.stats.demand_during_pull_in += 1;
        }

        for (r, rank) in self.dram.ranks.iter().enumerate() {
            let c = &mut self.stats.ranks[r];
            match rank.power_state(now) {
                PowerState::Active => c.cycles_active += 1,
                PowerState::Precharged => c.cycles_precharged += 1,
                PowerState::Refreshing => c.cycles_refreshing += 1,
            }
        }

        if now % 1024 == 0 {
            self.check_watchdog(now)?;
        }
        Ok(())
    }

    fn pick_demand(&mut self, now: Cycle) -> Option<usize> {
        if !self.sched_dirty && now < self.sched_wake && !self.cfg.exhaustive_scan {
            // Nothing old became ready; only new arrivals can change the
            // outcome, and they are the youngest requests in the queue.
            let mut maybe_ready = false;
            for &idx in &self.fresh {
                match fresh_bound(&self.queues, &self.dram, &self.blocks, idx, now) {
                    Some(lb) => self.sched_wake = self.sched_wake.min(lb),
                    None => maybe_ready = true,
                }
            }
            self.fresh.clear();
            if !maybe_ready && now < self.sched_wake {
                return None;
            }
        }
        let (pick, wake) = frfcfs_scan(&self.queues, &self.dram, &self.blocks, now);
        self.sched_dirty = false;
        self.sched_wake = wake;
        self.fresh.clear();
        pick
    }

    fn check_watchdog(&mut self, now: Cycle) -> Result<()> {
        let oldest = self.queues.iter().map(|r| r.arrival).min();
        if let Some(a) = oldest {
            let wait = now - a;
            self.stats.max_wait = self.stats.max_wait.max(wait);
            if wait > self.cfg.watchdog {
                return Err(Error::Invariant {
                    cycle: now,
                    msg: format!("request waited {wait} cycles on channel {}", self.id),
                });
            }
        }
        Ok(())
    }

    /// Debt extremes seen by any rank of this channel.
    pub fn debt_range(&self) -> (i32, i32) {
        self.refresh
            .iter()
            .map(|u| u.debts().observed_range())
            .fold((0, 0), |(lo, hi), (a, b)| (lo.min(a), hi.max(b)))
    }
}
