use std::fmt;

use crate::Cycle;

use super::command::{Command, CommandKind, RefreshRecord};
use super::org::DramOrg;
use super::timing::TimingParams;

/// Timing or protocol rule a command would break.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Rule {
    OutOfRange,
    NonMonotonic,
    CommandBus,
    Malformed,
    BankOpen,
    BankBusy,
    Trc,
    Trcd,
    Tras,
    Trrd,
    Tfaw,
    RowMiss,
    DataBus,
    Twtr,
    Trtw,
    RefreshInProgress,
    SubarrayConflict,
    RefPbOverlap,
    RefAbBanksBusy,
    RefreshRowMismatch,
}

impl Rule {
    pub fn name(self) -> &'static str {
        match self {
            Rule::OutOfRange => "out-of-range",
            Rule::NonMonotonic => "non-monotonic",
            Rule::CommandBus => "command-bus",
            Rule::Malformed => "malformed",
            Rule::BankOpen => "bank-open",
            Rule::BankBusy => "bank-busy",
            Rule::Trc => "tRC",
            Rule::Trcd => "tRCD",
            Rule::Tras => "tRAS",
            Rule::Trrd => "tRRD",
            Rule::Tfaw => "tFAW",
            Rule::RowMiss => "row-miss",
            Rule::DataBus => "data-bus",
            Rule::Twtr => "tWTR",
            Rule::Trtw => "tRTW",
            Rule::RefreshInProgress => "refresh-in-progress",
            Rule::SubarrayConflict => "subarray-conflict",
            Rule::RefPbOverlap => "REFpb-overlap",
            Rule::RefAbBanksBusy => "REFab-banks-busy",
            Rule::RefreshRowMismatch => "refresh-row-mismatch",
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Legality {
    Legal,
    Illegal(Rule),
}

impl Legality {
    pub fn is_legal(self) -> bool {
        self == Legality::Legal
    }
}

macro_rules! require {
    ($cond:expr, $rule:expr) => {
        if !$cond {
            return Legality::Illegal($rule);
        }
    };
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BankPhase {
    Idle,
    Activating,
    Active,
    Precharging,
    Refreshing,
}

#[derive(Debug, Clone, Default)]
pub struct BankState {
    /// Row opened by the last ACT and not yet accessed. Closed-row policy:
    /// the RD/WR that follows carries auto-precharge.
    pub open_row: Option<u32>,
    pub act_cycle: Cycle,
    pub rcd_ready: Cycle,
    /// Cycle at which the access path (activation + precharge) is free.
    pub busy_until: Cycle,
    /// Subarray held by the in-progress access, if any.
    pub access_subarray: Option<u32>,
    pub refresh_until: Cycle,
    pub refreshing_subarray: Option<u32>,
    /// DRAM-side refresh row counter (next row to refresh).
    pub refresh_row_counter: u32,
    pub last_act_cycle: Option<Cycle>,
}

impl BankState {
    pub fn refreshing(&self, now: Cycle) -> Option<u32> {
        if now < self.refresh_until {
            self.refreshing_subarray
        } else {
            None
        }
    }

    pub fn access_busy(&self, now: Cycle) -> bool {
        self.open_row.is_some() || now < self.busy_until
    }

    /// Subarray occupied by an access at `now`.
    pub fn accessing(&self, now: Cycle) -> Option<u32> {
        if self.access_busy(now) {
            self.access_subarray
        } else {
            None
        }
    }

    pub fn phase(&self, now: Cycle) -> BankPhase {
        if self.refreshing(now).is_some() {
            BankPhase::Refreshing
        } else if self.open_row.is_some() {
            if now < self.rcd_ready {
                BankPhase::Activating
            } else {
                BankPhase::Active
            }
        } else if now < self.busy_until {
            BankPhase::Precharging
        } else {
            BankPhase::Idle
        }
    }
}

#[derive(Debug, Clone)]
pub struct RankState {
    pub banks: Vec<BankState>,
    /// Issue cycles of the most recent ACTs (ring, oldest at `act_head`).
    act_window: [Cycle; 4],
    act_count: usize,
    act_head: usize,
    pub last_act_cycle: Option<Cycle>,
    pub refpb_in_flight: Option<(u32, Cycle)>,
    pub refab_until: Cycle,
    /// Banks with an open row, and the latest `busy_until` of any bank;
    /// together they answer "is any bank accessing" without a scan.
    open_banks: u32,
    busy_max: Cycle,
}

impl RankState {
    fn new(banks: u32) -> Self {
        RankState {
            banks: vec![BankState::default(); banks as usize],
            act_window: [0; 4],
            act_count: 0,
            act_head: 0,
            last_act_cycle: None,
            refpb_in_flight: None,
            refab_until: 0,
            open_banks: 0,
            busy_max: 0,
        }
    }

    pub fn refpb_busy(&self, now: Cycle) -> Option<u32> {
        match self.refpb_in_flight {
            Some((bank, end)) if end > now => Some(bank),
            _ => None,
        }
    }

    pub fn refresh_in_progress(&self, now: Cycle) -> bool {
        self.refab_until > now || self.refpb_busy(now).is_some()
    }

    /// Oldest of the last four ACTs, once four have been issued.
    pub fn faw_anchor(&self) -> Option<Cycle> {
        (self.act_count == 4).then(|| self.act_window[self.act_head])
    }

    fn record_act(&mut self, now: Cycle) {
        if self.act_count < 4 {
            self.act_window[(self.act_head + self.act_count) % 4] = now;
            self.act_count += 1;
        } else {
            self.act_window[self.act_head] = now;
            self.act_head = (self.act_head + 1) % 4;
        }
        self.last_act_cycle = Some(now);
    }

    pub fn power_state(&self, now: Cycle) -> PowerState {
        if self.refresh_in_progress(now) {
            PowerState::Refreshing
        } else if self.open_banks > 0 || now < self.busy_max {
            PowerState::Active
        } else {
            PowerState::Precharged
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PowerState {
    Active,
    Precharged,
    Refreshing,
}

#[derive(Debug, Clone, Default)]
pub struct DataBus {
    pub free_at: Cycle,
    pub last_read_end: Option<Cycle>,
    pub last_write_end: Option<Cycle>,
}

/// DRAM-side state of one channel: its ranks, banks and data bus.
#[derive(Debug, Clone)]
pub struct DramChannel {
    pub channel: u32,
    pub org: DramOrg,
    pub t: TimingParams,
    /// Subarray access-refresh parallelization enabled in the device.
    pub sarp: bool,
    pub rows_per_refresh: u32,
    pub ranks: Vec<RankState>,
    pub bus: DataBus,
}

impl DramChannel {
    pub fn new(channel: u32, org: DramOrg, t: TimingParams, sarp: bool) -> Self {
        DramChannel {
            channel,
            org,
            t,
            sarp,
            rows_per_refresh: org.rows_per_refresh(t.refreshes_per_window),
            ranks: (0..org.ranks_per_channel)
                .map(|_| RankState::new(org.banks_per_rank))
                .collect(),
            bus: DataBus::default(),
        }
    }

    pub fn bank(&self, rank: u32, bank: u32) -> &BankState {
        &self.ranks[rank as usize].banks[bank as usize]
    }

    /// Subarray the next refresh of `bank` will occupy.
    pub fn next_refresh_subarray(&self, rank: u32, bank: u32) -> u32 {
        self.org.subarray_of(self.bank(rank, bank).refresh_row_counter)
    }

    /// REFpb command for `bank` with the row/subarray fields filled from the
    /// bank's refresh counter.
    pub fn refpb_command(&self, now: Cycle, rank: u32, bank: u32) -> Command {
        let row = self.bank(rank, bank).refresh_row_counter;
        Command {
            row,
            subarray: self.org.subarray_of(row),
            ..Command::refpb(now, self.channel, rank, bank)
        }
    }

    fn active_act_window(&self, rank: &RankState, now: Cycle) -> (Cycle, Cycle) {
        if self.sarp && rank.refresh_in_progress(now) {
            (self.t.t_rrd_ref, self.t.t_faw_ref)
        } else {
            (self.t.t_rrd, self.t.t_faw)
        }
    }

    /// Lower bound on the first cycle at which the rank's tRRD/tFAW allow an
    /// ACT, using the base (unscaled) values.
    pub fn act_window_bound(&self, rank: u32) -> Cycle {
        let r = &self.ranks[rank as usize];
        let rrd = r.last_act_cycle.map_or(0, |l| l + self.t.t_rrd);
        let faw = r.faw_anchor().map_or(0, |a| a + self.t.t_faw);
        rrd.max(faw)
    }

    /// Lower bound on the first cycle at which an ACT to `subarray` of the
    /// bank could pass the bank-level checks, assuming no further commands.
    /// `Cycle::MAX` when another command must come first.
    pub fn act_bank_bound(&self, rank: u32, bank: u32, subarray: u32, now: Cycle) -> Cycle {
        let mut lb = self.act_bank_ready_at(rank, bank);
        if lb == Cycle::MAX {
            return lb;
        }
        let b = self.bank(rank, bank);
        if let Some(sa) = b.refreshing(now) {
            if !self.sarp || sa == subarray {
                lb = lb.max(b.refresh_until);
            }
        }
        lb
    }

    /// First cycle at which the bank's open-row, precharge and tRC checks
    /// pass for an ACT to any row; `Cycle::MAX` while a row is open.
    pub fn act_bank_ready_at(&self, rank: u32, bank: u32) -> Cycle {
        let b = self.bank(rank, bank);
        if b.open_row.is_some() {
            return Cycle::MAX;
        }
        match b.last_act_cycle {
            Some(last) => b.busy_until.max(last + self.t.t_rc),
            None => b.busy_until,
        }
    }

    /// Lower bound on the first cycle at which the column command of an
    /// activated request could issue, assuming no further commands.
    pub fn column_bound(&self, rank: u32, bank: u32, kind: CommandKind) -> Cycle {
        let t = &self.t;
        let b = self.bank(rank, bank);
        let mut lb = b.rcd_ready;
        if kind == CommandKind::Rd {
            lb = lb.max(self.bus.free_at.saturating_sub(t.t_cl));
            if let Some(we) = self.bus.last_write_end {
                lb = lb.max(we + t.t_wtr);
            }
        } else {
            lb = lb.max(self.bus.free_at.saturating_sub(t.t_cwl));
            if let Some(re) = self.bus.last_read_end {
                lb = lb.max((re + t.t_rtw).saturating_sub(t.t_cwl));
            }
        }
        lb
    }

    /// Rank-level activation constraints (tRRD/tFAW) only.
    pub fn act_window_ok(&self, rank: u32, now: Cycle) -> Legality {
        let r = &self.ranks[rank as usize];
        let (t_rrd, t_faw) = self.active_act_window(r, now);
        if let Some(last) = r.last_act_cycle {
            require!(now >= last + t_rrd, Rule::Trrd);
        }
        if let Some(anchor) = r.faw_anchor() {
            require!(now >= anchor + t_faw, Rule::Tfaw);
        }
        Legality::Legal
    }

    /// Bank-level activation constraints only.
    pub fn act_bank_ok(&self, rank: u32, bank: u32, row: u32, now: Cycle) -> Legality {
        let b = self.bank(rank, bank);
        require!(b.open_row.is_none(), Rule::BankOpen);
        require!(now >= b.busy_until, Rule::BankBusy);
        if let Some(last) = b.last_act_cycle {
            require!(now >= last + self.t.t_rc, Rule::Trc);
        }
        if let Some(sa) = b.refreshing(now) {
            require!(self.sarp, Rule::RefreshInProgress);
            require!(sa != self.org.subarray_of(row), Rule::SubarrayConflict);
        }
        Legality::Legal
    }

    fn in_range(&self, cmd: &Command) -> bool {
        let org = &self.org;
        if cmd.channel != self.channel || cmd.rank >= org.ranks_per_channel {
            return false;
        }
        match cmd.kind {
            CommandKind::RefAb => true,
            CommandKind::RefPb | CommandKind::Pre => cmd.bank < org.banks_per_rank,
            _ => {
                cmd.bank < org.banks_per_rank
                    && cmd.row < org.rows_per_bank
                    && cmd.subarray == org.subarray_of(cmd.row)
            }
        }
    }

    pub fn command_legal(&self, cmd: &Command, now: Cycle) -> Legality {
        require!(self.in_range(cmd), Rule::OutOfRange);
        let t = &self.t;
        let rank = &self.ranks[cmd.rank as usize];
        match cmd.kind {
            CommandKind::Act => {
                if let Legality::Illegal(r) = self.act_bank_ok(cmd.rank, cmd.bank, cmd.row, now) {
                    return Legality::Illegal(r);
                }
                self.act_window_ok(cmd.rank, now)
            }
            CommandKind::Rd | CommandKind::Wr => {
                let b = &rank.banks[cmd.bank as usize];
                require!(b.open_row == Some(cmd.row), Rule::RowMiss);
                require!(now >= b.rcd_ready, Rule::Trcd);
                if cmd.kind == CommandKind::Rd {
                    require!(now + t.t_cl >= self.bus.free_at, Rule::DataBus);
                    if let Some(we) = self.bus.last_write_end {
                        require!(now >= we + t.t_wtr, Rule::Twtr);
                    }
                } else {
                    require!(now + t.t_cwl >= self.bus.free_at, Rule::DataBus);
                    if let Some(re) = self.bus.last_read_end {
                        require!(now + t.t_cwl >= re + t.t_rtw, Rule::Trtw);
                    }
                }
                Legality::Legal
            }
            CommandKind::Pre => {
                let b = &rank.banks[cmd.bank as usize];
                require!(b.open_row.is_some(), Rule::RowMiss);
                require!(now >= b.act_cycle + t.t_ras, Rule::Tras);
                Legality::Legal
            }
            CommandKind::RefPb => {
                require!(rank.refab_until <= now, Rule::RefreshInProgress);
                require!(rank.refpb_busy(now).is_none(), Rule::RefPbOverlap);
                let b = &rank.banks[cmd.bank as usize];
                if self.sarp {
                    let target = self.org.subarray_of(b.refresh_row_counter);
                    require!(b.accessing(now) != Some(target), Rule::SubarrayConflict);
                } else {
                    require!(b.open_row.is_none(), Rule::BankOpen);
                    require!(now >= b.busy_until, Rule::BankBusy);
                }
                if let Some(last) = rank.last_act_cycle {
                    require!(now >= last + t.t_rrd, Rule::Trrd);
                }
                Legality::Legal
            }
            CommandKind::RefAb => {
                require!(rank.refab_until <= now, Rule::RefreshInProgress);
                require!(rank.refpb_busy(now).is_none(), Rule::RefreshInProgress);
                for b in &rank.banks {
                    if self.sarp {
                        let target = self.org.subarray_of(b.refresh_row_counter);
                        require!(b.accessing(now) != Some(target), Rule::SubarrayConflict);
                    } else {
                        require!(!b.access_busy(now), Rule::RefAbBanksBusy);
                    }
                }
                Legality::Legal
            }
        }
    }

    fn refresh_bank(
        &mut self,
        rank: u32,
        bank: u32,
        now: Cycle,
        until: Cycle,
        kind: CommandKind,
        sink: &mut Vec<RefreshRecord>,
    ) {
        let rows_per_bank = self.org.rows_per_bank;
        let count = self.rows_per_refresh;
        let channel = self.channel;
        let sa = self.next_refresh_subarray(rank, bank);
        let b = &mut self.ranks[rank as usize].banks[bank as usize];
        let row_start = b.refresh_row_counter;
        b.refresh_until = until;
        b.refreshing_subarray = Some(sa);
        b.refresh_row_counter = (row_start + count) % rows_per_bank;
        sink.push(RefreshRecord {
            issue: now,
            completion: until,
            kind,
            channel,
            rank,
            bank,
            row_start,
            row_count: count,
            subarray: sa,
        });
    }

    /// Applies `cmd` at `now`. Returns the end of the data burst for RD/WR.
    ///
    /// Callers in the controller check [`Self::command_legal`] first; the
    /// offline verifier replays illegal commands too, so this never panics on
    /// in-range input.
    pub fn apply_command(
        &mut self,
        cmd: &Command,
        now: Cycle,
        refreshes: &mut Vec<RefreshRecord>,
    ) -> Option<Cycle> {
        let t = self.t;
        let subarray_of_row = self.org.subarray_of(cmd.row.min(self.org.rows_per_bank - 1));
        match cmd.kind {
            CommandKind::Act => {
                let rank = &mut self.ranks[cmd.rank as usize];
                rank.record_act(now);
                let b = &mut rank.banks[cmd.bank as usize];
                if b.open_row.is_none() {
                    rank.open_banks += 1;
                }
                b.open_row = Some(cmd.row);
                b.act_cycle = now;
                b.rcd_ready = now + t.t_rcd;
                b.access_subarray = Some(subarray_of_row);
                b.last_act_cycle = Some(now);
                b.busy_until = b.busy_until.max(now + t.t_ras + t.t_rp);
                rank.busy_max = rank.busy_max.max(b.busy_until);
                None
            }
            CommandKind::Rd | CommandKind::Wr => {
                let (data_start, pre_at) = if cmd.kind == CommandKind::Rd {
                    (now + t.t_cl, now + t.t_rtp)
                } else {
                    (now + t.t_cwl, now + t.t_cwl + t.t_burst + t.t_wr)
                };
                let data_end = data_start + t.t_burst;
                self.bus.free_at = self.bus.free_at.max(data_end);
                if cmd.kind == CommandKind::Rd {
                    self.bus.last_read_end = Some(data_end);
                } else {
                    self.bus.last_write_end = Some(data_end);
                }
                let rank = &mut self.ranks[cmd.rank as usize];
                let b = &mut rank.banks[cmd.bank as usize];
                let pre = pre_at.max(b.act_cycle + t.t_ras);
                b.busy_until = b.busy_until.max(pre + t.t_rp);
                rank.busy_max = rank.busy_max.max(b.busy_until);
                if b.open_row.take().is_some() {
                    rank.open_banks -= 1;
                }
                Some(data_end)
            }
            CommandKind::Pre => {
                let rank = &mut self.ranks[cmd.rank as usize];
                let b = &mut rank.banks[cmd.bank as usize];
                if b.open_row.take().is_some() {
                    rank.open_banks -= 1;
                }
                b.busy_until = b.busy_until.max(now + t.t_rp);
                rank.busy_max = rank.busy_max.max(b.busy_until);
                None
            }
            CommandKind::RefPb => {
                let until = now + t.t_rfc_pb;
                self.ranks[cmd.rank as usize].refpb_in_flight = Some((cmd.bank, until));
                self.refresh_bank(cmd.rank, cmd.bank, now, until, CommandKind::RefPb, refreshes);
                None
            }
            CommandKind::RefAb => {
                let until = now + t.t_rfc_ab;
                self.ranks[cmd.rank as usize].refab_until = until;
                for bank in 0..self.org.banks_per_rank {
                    self.refresh_bank(cmd.rank, bank, now, until, CommandKind::RefAb, refreshes);
                }
                None
            }
        }
    }
}
