use crate::dram::{Command, CommandKind, DecodedAddr, DramChannel, Legality};
use crate::Cycle;

use super::queue::{bits, QueueState, ReqKind, Request};

/// Activation hold placed on a bank while a refresh waits for it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Block {
    #[default]
    None,
    Bank,
    Subarray(u32),
}

impl Block {
    pub fn blocks(self, subarray: u32) -> bool {
        match self {
            Block::None => false,
            Block::Bank => true,
            Block::Subarray(s) => s == subarray,
        }
    }
}

/// True iff the request's bank is refreshing the subarray the request needs.
pub fn sarp_conflict(d: &DecodedAddr, dram: &DramChannel, now: Cycle) -> bool {
    dram.bank(d.rank, d.bank).refreshing(now) == Some(d.subarray)
}

/// Next closed-row command for `req`: its RD/WR once its row is open, ACT
/// otherwise.
pub fn next_command(req: &Request, dram: &DramChannel, now: Cycle) -> Command {
    let d = &req.decoded;
    let open = dram.bank(d.rank, d.bank).open_row;
    let kind = if req.issue.is_some() {
        assert_eq!(open, Some(d.row), "activated request lost its row");
        match req.kind {
            ReqKind::Read => CommandKind::Rd,
            ReqKind::Write => CommandKind::Wr,
        }
    } else {
        CommandKind::Act
    };
    Command {
        cycle: now,
        kind,
        channel: d.channel,
        rank: d.rank,
        bank: d.bank,
        row: d.row,
        subarray: d.subarray,
    }
}

/// FR-FCFS under closed-row: requests whose row is already open (their
/// column command is all that is left) come first, oldest first; then the
/// oldest request of the active class (writes while draining, reads
/// otherwise) whose ACT is legal now and not held back by a refresh.
///
/// Returns the slab index of the chosen request.
pub fn frfcfs_pick(
    q: &QueueState,
    dram: &DramChannel,
    blocks: &[Block],
    now: Cycle,
) -> Option<usize> {
    frfcfs_scan(q, dram, blocks, now).0
}

/// [`frfcfs_pick`], also returning, when nothing is ready, a lower bound on
/// the cycle at which some candidate could become ready if no command is
/// issued, no request arrives and the holds in `blocks` stay unchanged.
pub fn frfcfs_scan(
    q: &QueueState,
    dram: &DramChannel,
    blocks: &[Block],
    now: Cycle,
) -> (Option<usize>, Cycle) {
    if q.is_empty() {
        return (None, Cycle::MAX);
    }
    let mut wake = Cycle::MAX;
    let mut best: Option<(u64, usize)> = None;
    for (_, idx) in q.activated_slots() {
        let r = q.get(idx);
        if best.is_some_and(|(id, _)| id < r.id) {
            continue;
        }
        let kind = match r.kind {
            ReqKind::Read => CommandKind::Rd,
            ReqKind::Write => CommandKind::Wr,
        };
        // With the row open, the column bound is exactly the legality test.
        let lb = dram.column_bound(r.decoded.rank, r.decoded.bank, kind);
        if lb > now {
            wake = wake.min(lb);
            continue;
        }
        debug_assert_eq!(dram.command_legal(&next_command(r, dram, now), now), Legality::Legal);
        best = Some((r.id, idx));
    }
    if let Some((_, idx)) = best {
        return (Some(idx), now);
    }

    let class = if q.drain { ReqKind::Write } else { ReqKind::Read };
    let banks = q.banks_per_rank() as usize;
    for rank in 0..dram.ranks.len() as u32 {
        let cand = q.queued_banks(class, rank) & !q.activated_banks(rank);
        if cand == 0 {
            continue;
        }
        if !dram.act_window_ok(rank, now).is_legal() {
            // Every candidate of this rank waits at least for the window.
            wake = wake.min(dram.act_window_bound(rank).max(now + 1));
            continue;
        }
        for bank in bits(cand) {
            let slot = rank as usize * banks + bank as usize;
            if blocks[slot] == Block::Bank {
                continue;
            }
            // Open row, precharge and tRC do not depend on the request.
            let ready = dram.act_bank_ready_at(rank, bank);
            if ready > now {
                wake = wake.min(ready);
                continue;
            }
            let b = dram.bank(rank, bank);
            let refreshing = b.refreshing(now);
            if refreshing.is_some() && !dram.sarp {
                wake = wake.min(b.refresh_until);
                continue;
            }
            let queue = q.queue(class, slot);
            // Without subarray parallelism every request to the bank sees
            // the same readiness, so only the head matters.
            let scan = if dram.sarp { queue.len() } else { 1 };
            for &idx in queue.iter().take(scan) {
                let r = q.get(idx);
                if best.is_some_and(|(id, _)| id < r.id) {
                    break;
                }
                let sa = r.decoded.subarray;
                if blocks[slot].blocks(sa) {
                    continue;
                }
                if refreshing == Some(sa) {
                    wake = wake.min(b.refresh_until);
                    continue;
                }
                debug_assert!(dram.act_bank_ok(rank, bank, r.decoded.row, now).is_legal());
                best = Some((r.id, idx));
                break;
            }
        }
    }
    match best {
        Some((_, idx)) => (Some(idx), now),
        None => (None, wake),
    }
}

/// For a request that joined the queues after the last scan: `None` if its
/// ACT might be issuable now, else a lower bound on when it could be. A bound
/// of `Cycle::MAX` means only a change that forces a rescan (issued command,
/// new holds, drain switch) can make it a candidate.
pub fn fresh_bound(
    q: &QueueState,
    dram: &DramChannel,
    blocks: &[Block],
    idx: usize,
    now: Cycle,
) -> Option<Cycle> {
    let r = q.get(idx);
    let class = if q.drain { ReqKind::Write } else { ReqKind::Read };
    let d = &r.decoded;
    let slot = q.slot(d.rank, d.bank);
    if r.kind != class || q.activated(slot).is_some() || blocks[slot].blocks(d.subarray) {
        return Some(Cycle::MAX);
    }
    if !dram.act_bank_ok(d.rank, d.bank, d.row, now).is_legal() {
        return Some(dram.act_bank_bound(d.rank, d.bank, d.subarray, now).max(now + 1));
    }
    if !dram.act_window_ok(d.rank, now).is_legal() {
        return Some(dram.act_window_bound(d.rank).max(now + 1));
    }
    None
}
