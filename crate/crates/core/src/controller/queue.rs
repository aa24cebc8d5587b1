use std::collections::VecDeque;

use rustc_hash::FxHashMap;

use crate::dram::DecodedAddr;
use crate::Cycle;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ReqKind {
    Read,
    Write,
}

impl ReqKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ReqKind::Read => "R",
            ReqKind::Write => "W",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Request {
    /// Channel-local sequence number; increases with arrival order.
    pub id: u64,
    pub core: u32,
    /// Opaque value handed back to the core on completion.
    pub tag: u64,
    pub kind: ReqKind,
    pub addr: u64,
    pub decoded: DecodedAddr,
    pub arrival: Cycle,
    /// Cycle of the request's ACT.
    pub issue: Option<Cycle>,
    pub completion: Option<Cycle>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QueueConfig {
    pub read_capacity: usize,
    pub write_capacity: usize,
    /// Drain starts when write occupancy exceeds this.
    pub high_watermark: usize,
    /// Drain stops when write occupancy falls to this.
    pub low_watermark: usize,
}

impl Default for QueueConfig {
    fn default() -> Self {
        QueueConfig {
            read_capacity: 64,
            write_capacity: 64,
            high_watermark: 48,
            low_watermark: 32,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Enqueue {
    Accepted,
    /// Read served from a queued write to the same line.
    Forwarded,
    Rejected,
}

/// Read/write request queues of one channel.
///
/// Requests are kept in per-bank FIFOs (arrival order) so the scheduler can
/// look at one candidate per bank. Once a request's row is activated it
/// moves to the bank's `activated` slot; it still counts toward occupancy
/// until its column command issues.
#[derive(Debug, Clone)]
pub struct QueueState {
    pub cfg: QueueConfig,
    slab: Vec<Option<Request>>,
    free: Vec<usize>,
    banks_per_rank: u32,
    bank_reads: Vec<VecDeque<usize>>,
    bank_writes: Vec<VecDeque<usize>>,
    activated: Vec<Option<usize>>,
    pending: Vec<u32>,
    /// Per-rank bank bitmasks: pending demand, activated request, non-empty
    /// read FIFO, non-empty write FIFO.
    busy_mask: Vec<u64>,
    act_mask: Vec<u64>,
    read_mask: Vec<u64>,
    write_mask: Vec<u64>,
    pub reads: usize,
    pub writes: usize,
    pub drain: bool,
    write_lines: FxHashMap<u64, u32>,
    line_bytes: u64,
    next_id: u64,
}

impl QueueState {
    pub fn new(cfg: QueueConfig, ranks: u32, banks_per_rank: u32, line_bytes: u64) -> Self {
        let n = (ranks * banks_per_rank) as usize;
        QueueState {
            cfg,
            slab: Vec::new(),
            free: Vec::new(),
            banks_per_rank,
            bank_reads: vec![VecDeque::new(); n],
            bank_writes: vec![VecDeque::new(); n],
            activated: vec![None; n],
            pending: vec![0; n],
            busy_mask: vec![0; ranks as usize],
            act_mask: vec![0; ranks as usize],
            read_mask: vec![0; ranks as usize],
            write_mask: vec![0; ranks as usize],
            reads: 0,
            writes: 0,
            drain: false,
            write_lines: FxHashMap::default(),
            line_bytes,
            next_id: 0,
        }
    }

    pub fn slot(&self, rank: u32, bank: u32) -> usize {
        (rank * self.banks_per_rank + bank) as usize
    }

    pub fn banks_per_rank(&self) -> u32 {
        self.banks_per_rank
    }

    pub fn bank_count(&self) -> usize {
        self.pending.len()
    }

    /// Pending demand (queued or activated) per bank of `rank`.
    pub fn pending_for_rank(&self, rank: u32) -> &[u32] {
        let s = self.slot(rank, 0);
        &self.pending[s..s + self.banks_per_rank as usize]
    }

    /// Banks of `rank` with pending demand, as a bitmask.
    pub fn busy_banks(&self, rank: u32) -> u64 {
        self.busy_mask[rank as usize]
    }

    /// Banks of `rank` holding an activated request.
    pub fn activated_banks(&self, rank: u32) -> u64 {
        self.act_mask[rank as usize]
    }

    /// Banks of `rank` with a non-empty `kind` FIFO.
    pub fn queued_banks(&self, kind: ReqKind, rank: u32) -> u64 {
        match kind {
            ReqKind::Read => self.read_mask[rank as usize],
            ReqKind::Write => self.write_mask[rank as usize],
        }
    }

    fn split(&self, slot: usize) -> (usize, u64) {
        let bpr = self.banks_per_rank as usize;
        (slot / bpr, 1 << (slot % bpr))
    }

    pub fn is_empty(&self) -> bool {
        self.reads == 0 && self.writes == 0
    }

    pub fn get(&self, idx: usize) -> &Request {
        self.slab[idx].as_ref().expect("live request")
    }

    pub fn queue(&self, kind: ReqKind, slot: usize) -> &VecDeque<usize> {
        match kind {
            ReqKind::Read => &self.bank_reads[slot],
            ReqKind::Write => &self.bank_writes[slot],
        }
    }

    pub fn activated(&self, slot: usize) -> Option<usize> {
        self.activated[slot]
    }

    pub fn activated_slots(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let bpr = self.banks_per_rank as usize;
        self.act_mask.iter().enumerate().flat_map(move |(r, &m)| {
            bits(m).map(move |b| {
                let s = r * bpr + b as usize;
                (s, self.activated[s].expect("mask tracks activated slots"))
            })
        })
    }

    pub fn has_write_to(&self, addr: u64) -> bool {
        self.write_lines.contains_key(&(addr / self.line_bytes))
    }

    fn insert(&mut self, req: Request) -> usize {
        if let Some(i) = self.free.pop() {
            self.slab[i] = Some(req);
            i
        } else {
            self.slab.push(Some(req));
            self.slab.len() - 1
        }
    }

    pub fn next_id(&mut self) -> u64 {
        let id = self.next_id;
        self.next_id += 1;
        id
    }

    /// Iterates live requests, activated ones included.
    pub fn iter(&self) -> impl Iterator<Item = &Request> {
        self.slab.iter().flatten()
    }

    /// Moves a queued request into its bank's activated slot.
    pub fn activate(&mut self, idx: usize, now: Cycle) {
        let (kind, slot) = {
            let r = self.slab[idx].as_mut().expect("live request");
            r.issue = Some(now);
            (r.kind, (r.decoded.rank * self.banks_per_rank + r.decoded.bank) as usize)
        };
        debug_assert!(self.activated[slot].is_none());
        let q = match kind {
            ReqKind::Read => &mut self.bank_reads[slot],
            ReqKind::Write => &mut self.bank_writes[slot],
        };
        let pos = q.iter().position(|&i| i == idx).expect("queued request");
        q.remove(pos);
        let emptied = q.is_empty();
        self.activated[slot] = Some(idx);
        let (r, bit) = self.split(slot);
        self.act_mask[r] |= bit;
        if emptied {
            match kind {
                ReqKind::Read => self.read_mask[r] &= !bit,
                ReqKind::Write => self.write_mask[r] &= !bit,
            }
        }
    }

    /// Removes the activated request of `slot` once its column command issued.
    pub fn retire_activated(&mut self, slot: usize, completion: Cycle) -> Request {
        let idx = self.activated[slot].take().expect("activated request");
        let mut r = self.slab[idx].take().expect("live request");
        self.free.push(idx);
        r.completion = Some(completion);
        self.pending[slot] -= 1;
        let (rank, bit) = self.split(slot);
        self.act_mask[rank] &= !bit;
        if self.pending[slot] == 0 {
            self.busy_mask[rank] &= !bit;
        }
        match r.kind {
            ReqKind::Read => self.reads -= 1,
            ReqKind::Write => {
                self.writes -= 1;
                let line = r.addr / self.line_bytes;
                let e = self.write_lines.get_mut(&line).expect("tracked write line");
                *e -= 1;
                if *e == 0 {
                    self.write_lines.remove(&line);
                }
            }
        }
        r
    }
}

/// Adds `req` to its queue. Reads that hit a queued write are forwarded and
/// never reach the queue.
pub fn enqueue_request(q: &mut QueueState, req: Request) -> Enqueue {
    let slot = q.slot(req.decoded.rank, req.decoded.bank);
    match req.kind {
        ReqKind::Read => {
            if q.has_write_to(req.addr) {
                return Enqueue::Forwarded;
            }
            if q.reads >= q.cfg.read_capacity {
                return Enqueue::Rejected;
            }
            q.reads += 1;
            q.pending[slot] += 1;
            let i = q.insert(req);
            q.bank_reads[slot].push_back(i);
            let (r, bit) = q.split(slot);
            q.busy_mask[r] |= bit;
            q.read_mask[r] |= bit;
        }
        ReqKind::Write => {
            if q.writes >= q.cfg.write_capacity {
                return Enqueue::Rejected;
            }
            q.writes += 1;
            q.pending[slot] += 1;
            *q.write_lines.entry(req.addr / q.line_bytes).or_insert(0) += 1;
            let i = q.insert(req);
            q.bank_writes[slot].push_back(i);
            let (r, bit) = q.split(slot);
            q.busy_mask[r] |= bit;
            q.write_mask[r] |= bit;
        }
    }
    Enqueue::Accepted
}

/// Indices of the set bits of `m`, lowest first.
pub fn bits(mut m: u64) -> impl Iterator<Item = u32> {
    std::iter::from_fn(move || {
        (m != 0).then(|| {
            let b = m.trailing_zeros();
            m &= m - 1;
            b
        })
    })
}

/// Write-drain hysteresis between the two watermarks.
pub fn update_drain_mode(q: &mut QueueState) {
    if !q.drain && q.writes > q.cfg.high_watermark {
        q.drain = true;
    } else if q.drain && q.writes <= q.cfg.low_watermark {
        q.drain = false;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn req(q: &mut QueueState, kind: ReqKind, bank: u32, addr: u64) -> Request {
        Request {
            id: q.next_id(),
            core: 0,
            tag: 0,
            kind,
            addr,
            decoded: DecodedAddr {
                channel: 0,
                rank: 0,
                bank,
                row: 0,
                column: 0,
                subarray: 0,
            },
            arrival: 0,
            issue: None,
            completion: None,
        }
    }

    fn queues() -> QueueState {
        QueueState::new(QueueConfig::default(), 2, 8, 64)
    }

    #[test]
    fn read_into_empty_queue() {
        let mut q = queues();
        let r = req(&mut q, ReqKind::Read, 2, 0);
        assert_eq!(enqueue_request(&mut q, r), Enqueue::Accepted);
        assert_eq!(q.reads, 1);
        assert_eq!(q.pending_for_rank(0)[2], 1);
        assert_eq!(q.busy_banks(0), 0b100);
        assert_eq!(q.queued_banks(ReqKind::Read, 0), 0b100);
    }

    #[test]
    fn bit_iteration() {
        assert_eq!(bits(0b1010_0001).collect::<Vec<_>>(), vec![0, 5, 7]);
        assert_eq!(bits(0).count(), 0);
        assert_eq!(bits(1 << 63).collect::<Vec<_>>(), vec![63]);
    }

    #[test]
    fn write_capacity() {
        let mut q = queues();
        for i in 0..64 {
            let r = req(&mut q, ReqKind::Write, 0, i * 64);
            assert_eq!(enqueue_request(&mut q, r), Enqueue::Accepted);
        }
        let r = req(&mut q, ReqKind::Write, 0, 1 << 20);
        assert_eq!(enqueue_request(&mut q, r), Enqueue::Rejected);
    }

    #[test]
    fn read_hits_queued_write() {
        let mut q = queues();
        let w = req(&mut q, ReqKind::Write, 1, 0x1040);
        enqueue_request(&mut q, w);
        let r = req(&mut q, ReqKind::Read, 1, 0x1050);
        assert_eq!(enqueue_request(&mut q, r), Enqueue::Forwarded);
        assert_eq!(q.reads, 0);
        let r = req(&mut q, ReqKind::Read, 1, 0x1080);
        assert_eq!(enqueue_request(&mut q, r), Enqueue::Accepted);
    }

    #[test]
    fn drain_hysteresis() {
        let mut q = queues();
        q.writes = 49;
        update_drain_mode(&mut q);
        assert!(q.drain);
        q.writes = 40;
        update_drain_mode(&mut q);
        assert!(q.drain);
        q.writes = 32;
        update_drain_mode(&mut q);
        assert!(!q.drain);
        q.writes = 40;
        update_drain_mode(&mut q);
        assert!(!q.drain);
        q.writes = 48;
        update_drain_mode(&mut q);
        assert!(!q.drain);
    }

    #[test]
    fn activation_and_retire() {
        let mut q = queues();
        let w = req(&mut q, ReqKind::Write, 3, 0x80);
        enqueue_request(&mut q, w);
        let idx = q.queue(ReqKind::Write, 3)[0];
        q.activate(idx, 10);
        assert!(q.queue(ReqKind::Write, 3).is_empty());
        assert_eq!(q.pending_for_rank(0)[3], 1);
        assert_eq!((q.activated_banks(0), q.busy_banks(0)), (0b1000, 0b1000));
        assert_eq!(q.queued_banks(ReqKind::Write, 0), 0);
        let r = q.retire_activated(3, 30);
        assert_eq!((q.activated_banks(0), q.busy_banks(0)), (0, 0));
        assert_eq!((r.issue, r.completion), (Some(10), Some(30)));
        assert!(q.is_empty());
        assert!(!q.has_write_to(0x80));
    }
}
