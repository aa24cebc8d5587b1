use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dram::audit::RefreshSchedule;
use crate::dram::{DramChannel, TimingParams};
use crate::error::Result;
use crate::Cycle;

use super::darp::wrp_origin;
use super::{
    darp_mandatory, darp_pull_in, elastic_schedule, schedule_refab, schedule_refpb_rr,
    wrp_select, DebtCounters, IdlePredictor, PolicyKind, RefreshAction, RefreshIntent,
};

/// What a rank's refresh unit sees of the controller each cycle.
#[derive(Debug, Clone, Copy)]
pub struct RankView<'a> {
    pub now: Cycle,
    pub rank: u32,
    /// Pending demand requests (reads + writes) per bank of this rank.
    pub pending: &'a [u32],
    /// Banks with pending demand, as a bitmask.
    pub busy: u64,
    pub drain: bool,
    pub dram: &'a DramChannel,
}

impl RankView<'_> {
    fn refpb_legal(&self, bank: u32) -> bool {
        let cmd = self.dram.refpb_command(self.now, self.rank, bank);
        self.dram.command_legal(&cmd, self.now).is_legal()
    }
}

/// Refresh state of one rank under one policy.
#[derive(Debug, Clone)]
pub struct RankRefresh {
    policy: PolicyKind,
    rank: u32,
    enabled: bool,
    debts: DebtCounters,
    rr_next: u32,
    /// DARP: banks whose deadline passed with no pending demand.
    scheduled: u64,
    predictor: IdlePredictor,
    rng: ChaCha8Rng,
    t_rfc_ab: Cycle,
}

impl RankRefresh {
    pub fn new(
        policy: PolicyKind,
        t: &TimingParams,
        banks: u32,
        channel: u32,
        rank: u32,
        seed: u64,
        enabled: bool,
    ) -> Self {
        let stream = ((channel as u64) << 32 | rank as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
        RankRefresh {
            policy,
            rank,
            enabled,
            debts: DebtCounters::new(RefreshSchedule::new(policy.refresh_mode(), t, banks)),
            rr_next: 0,
            scheduled: 0,
            predictor: IdlePredictor::default(),
            rng: ChaCha8Rng::seed_from_u64(seed ^ stream),
            t_rfc_ab: t.t_rfc_ab,
        }
    }

    pub fn debts(&self) -> &DebtCounters {
        &self.debts
    }

    pub fn predictor(&self) -> &IdlePredictor {
        &self.predictor
    }

    /// Next cycle at which the unit's state can change without new demand.
    pub fn next_deadline(&self) -> Cycle {
        if self.enabled {
            self.debts.earliest_deadline()
        } else {
            Cycle::MAX
        }
    }

    /// Advances deadlines and per-cycle bookkeeping.
    pub fn tick(&mut self, v: &RankView) -> Result<()> {
        if !self.enabled {
            return Ok(());
        }
        let passed = self.debts.advance(v.now)?;
        if self.policy.darp() && (passed != 0 || self.scheduled != 0) {
            let busy = v.busy;
            let mut fresh = 0u64;
            if passed != 0 {
                for b in 0..self.debts.banks() {
                    if passed & (1 << b) != 0 && self.debts.get(b) > 0 {
                        fresh |= 1 << b;
                    }
                }
            }
            self.scheduled = (self.scheduled | fresh) & !busy;
        }
        if self.policy == PolicyKind::Elastic {
            let idle = v.busy == 0;
            self.predictor.observe(v.now, idle);
        }
        Ok(())
    }

    /// Refresh that takes precedence over demand, if any.
    pub fn mandatory(&mut self, v: &RankView) -> Option<RefreshIntent> {
        if !self.enabled {
            return None;
        }
        match self.policy {
            PolicyKind::RefAb | PolicyKind::SarpAb | PolicyKind::Fgr2x | PolicyKind::Fgr4x => {
                schedule_refab(self.rank, &self.debts)
            }
            PolicyKind::RefPb | PolicyKind::SarpPb => {
                schedule_refpb_rr(self.rank, &self.debts, self.rr_next)
            }
            PolicyKind::Elastic => elastic_schedule(
                v.now,
                self.rank,
                self.debts.get(0),
                &self.predictor,
                self.t_rfc_ab,
            ),
            PolicyKind::Darp | PolicyKind::Dsarp => {
                if let Some(forced) = darp_mandatory(self.rank, &self.debts, 0) {
                    return Some(forced);
                }
                if v.drain {
                    let in_flight = v.dram.ranks[v.rank as usize].refresh_in_progress(v.now);
                    if let Some(bank) =
                        wrp_select(v.pending, &self.debts, in_flight, |b| v.refpb_legal(b))
                    {
                        return Some(RefreshIntent {
                            action: RefreshAction::IssueRefPb {
                                rank: self.rank,
                                bank,
                                origin: wrp_origin(&self.debts, bank),
                            },
                            block: false,
                            wrp: true,
                        });
                    }
                }
                darp_mandatory(self.rank, &self.debts, self.scheduled)
            }
        }
    }

    /// Refresh to issue in a cycle where no demand command can issue.
    pub fn opportunistic(&mut self, v: &RankView) -> Option<RefreshAction> {
        if !self.enabled || !self.policy.darp() {
            return None;
        }
        if v.dram.ranks[v.rank as usize].refresh_in_progress(v.now) {
            return None;
        }
        darp_pull_in(self.rank, v.pending, &self.debts, |b| v.refpb_legal(b), &mut self.rng)
    }

    /// Bookkeeping after the controller issued `action`.
    pub fn issued(&mut self, action: RefreshAction, now: Cycle) -> Result<()> {
        match action {
            RefreshAction::None => {}
            RefreshAction::IssueRefAb { .. } => {
                for b in 0..self.debts.banks() {
                    self.debts.refreshed(b, now)?;
                }
            }
            RefreshAction::IssueRefPb { bank, .. } => {
                self.debts.refreshed(bank, now)?;
                self.scheduled &= !(1 << bank);
                if bank == self.rr_next {
                    self.rr_next = (self.rr_next + 1) % self.debts.banks();
                }
            }
        }
        Ok(())
    }
}
