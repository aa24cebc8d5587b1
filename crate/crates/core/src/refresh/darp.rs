use rand::Rng;

use crate::dram::audit::MAX_DEBT;

use super::{DebtCounters, Origin, RefreshAction, RefreshIntent};
use crate::controller::bits;

fn origin_for(debt: i32) -> Origin {
    if debt > 0 {
        Origin::Postponed
    } else {
        Origin::PulledIn
    }
}

/// Refreshes DARP cannot delay further: a bank at the debt bound (forced),
/// then banks whose deadline passed while they had no pending demand.
pub fn darp_mandatory(rank: u32, debts: &DebtCounters, scheduled: u64) -> Option<RefreshIntent> {
    let forced = if debts.max_debt() < MAX_DEBT {
        None
    } else {
        (0..debts.banks())
            .filter(|&b| debts.get(b) >= MAX_DEBT)
            .max_by_key(|&b| (debts.get(b), std::cmp::Reverse(b)))
    };
    if let Some(bank) = forced {
        return Some(RefreshIntent {
            action: RefreshAction::IssueRefPb {
                rank,
                bank,
                origin: Origin::Postponed,
            },
            block: true,
            wrp: false,
        });
    }
    (scheduled != 0).then(|| {
        let bank = scheduled.trailing_zeros();
        RefreshIntent {
            action: RefreshAction::IssueRefPb {
                rank,
                bank,
                origin: Origin::Scheduled,
            },
            block: false,
            wrp: false,
        }
    })
}

/// Write-refresh parallelization: while the channel drains writes, refresh
/// the bank with the fewest pending requests (lowest index on ties), as long
/// as it can still be pulled in. Nothing while a REFpb is in flight.
pub fn wrp_select(
    pending: &[u32],
    debts: &DebtCounters,
    refresh_in_flight: bool,
    legal: impl Fn(u32) -> bool,
) -> Option<u32> {
    if refresh_in_flight {
        return None;
    }
    (0..pending.len() as u32)
        .filter(|&b| debts.get(b) > -MAX_DEBT && legal(b))
        .min_by_key(|&b| (pending[b as usize], b))
}

/// Opportunistic refresh when no demand command can issue: a uniformly
/// random bank with no pending demand and pull-in budget left.
pub fn darp_pull_in<R: Rng>(
    rank: u32,
    pending: &[u32],
    debts: &DebtCounters,
    legal: impl Fn(u32) -> bool,
    rng: &mut R,
) -> Option<RefreshAction> {
    let mut candidates = 0u64;
    for b in 0..pending.len() as u32 {
        if pending[b as usize] == 0 && debts.get(b) > -MAX_DEBT && legal(b) {
            candidates |= 1 << b;
        }
    }
    if candidates == 0 {
        return None;
    }
    let pick = rng.gen_range(0..candidates.count_ones() as usize);
    let bank = bits(candidates).nth(pick).expect("pick below candidate count");
    Some(RefreshAction::IssueRefPb {
        rank,
        bank,
        origin: origin_for(debts.get(bank)),
    })
}

/// Origin label for a WRP refresh of `bank`.
pub(crate) fn wrp_origin(debts: &DebtCounters, bank: u32) -> Origin {
    origin_for(debts.get(bank))
}
