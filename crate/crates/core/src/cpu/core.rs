use std::collections::VecDeque;
use std::sync::Arc;

use super::trace::TraceRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CoreConfig {
    pub issue_width: u32,
    pub window: u32,
    pub mshrs: u32,
}

impl Default for CoreConfig {
    fn default() -> Self {
        CoreConfig {
            issue_width: 3,
            window: 128,
            mshrs: 8,
        }
    }
}

/// Where a core sends its memory requests. Returning `false` means the
/// request was not accepted and must be retried.
pub trait MemoryPort {
    fn send_read(&mut self, core: u32, tag: u64, addr: u64) -> bool;
    fn send_write(&mut self, core: u32, addr: u64) -> bool;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Slot {
    /// A run of completed instructions.
    Ready(u32),
    /// A read waiting for memory.
    Pending(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Step {
    Bubbles(u32),
    Read,
    Write,
}

/// Trace-driven out-of-order window approximation.
#[derive(Debug, Clone)]
pub struct Core {
    pub id: u32,
    cfg: CoreConfig,
    trace: Arc<Vec<TraceRecord>>,
    cursor: usize,
    step: Step,
    window: VecDeque<Slot>,
    occupancy: u32,
    outstanding: u32,
    next_tag: u64,
    pub retired: u64,
    pub cycles: u64,
    pub reads_sent: u64,
    pub writes_sent: u64,
    /// The last tick did nothing and nothing changes until a completion.
    pub stalled: bool,
    /// The last tick was held back by a full request queue.
    pub rejected: bool,
}

impl Core {
    pub fn new(id: u32, cfg: CoreConfig, trace: Arc<Vec<TraceRecord>>) -> Self {
        assert!(!trace.is_empty(), "empty trace");
        let first = trace[0].bubbles;
        Core {
            id,
            cfg,
            trace,
            cursor: 0,
            step: Step::Bubbles(first),
            window: VecDeque::new(),
            occupancy: 0,
            outstanding: 0,
            next_tag: 0,
            retired: 0,
            cycles: 0,
            reads_sent: 0,
            writes_sent: 0,
            stalled: false,
            rejected: false,
        }
    }

    pub fn outstanding(&self) -> u32 {
        self.outstanding
    }

    pub fn occupancy(&self) -> u32 {
        self.occupancy
    }

    pub fn ipc(&self) -> f64 {
        ipc(self.retired, self.cycles)
    }

    fn push_ready(&mut self, n: u32) {
        if let Some(Slot::Ready(k)) = self.window.back_mut() {
            *k += n;
        } else {
            self.window.push_back(Slot::Ready(n));
        }
        self.occupancy += n;
    }

    fn advance_record(&mut self) {
        self.cursor = (self.cursor + 1) % self.trace.len();
        self.step = Step::Bubbles(self.trace[self.cursor].bubbles);
    }

    /// Read data returned for `tag`.
    pub fn complete(&mut self, tag: u64) {
        let slot = self
            .window
            .iter_mut()
            .find(|s| **s == Slot::Pending(tag))
            .expect("completion for unknown read");
        *slot = Slot::Ready(1);
        self.outstanding -= 1;
        self.stalled = false;
    }

    /// One core cycle: retire, then issue up to `issue_width` instructions.
    pub fn tick(&mut self, mem: &mut dyn MemoryPort) {
        self.cycles += 1;
        let width = self.cfg.issue_width;
        let mut progress = false;
        self.rejected = false;

        let mut budget = width;
        while budget > 0 {
            match self.window.front_mut() {
                Some(Slot::Ready(n)) => {
                    let k = (*n).min(budget);
                    *n -= k;
                    budget -= k;
                    self.retired += k as u64;
                    self.occupancy -= k;
                    if *n == 0 {
                        self.window.pop_front();
                    }
                    progress = true;
                }
                _ => break,
            }
        }

        let mut budget = width;
        while budget > 0 && self.occupancy < self.cfg.window {
            let room = self.cfg.window - self.occupancy;
            match self.step {
                Step::Bubbles(0) => self.step = Step::Read,
                Step::Bubbles(n) => {
                    let k = n.min(budget).min(room);
                    self.push_ready(k);
                    budget -= k;
                    self.step = Step::Bubbles(n - k);
                    progress = true;
                }
                Step::Read => {
                    if self.outstanding >= self.cfg.mshrs {
                        break;
                    }
                    let tag = self.next_tag;
                    if !mem.send_read(self.id, tag, self.trace[self.cursor].read_addr) {
                        self.rejected = true;
                        break;
                    }
                    self.next_tag += 1;
                    self.outstanding += 1;
                    self.reads_sent += 1;
                    self.window.push_back(Slot::Pending(tag));
                    self.occupancy += 1;
                    budget -= 1;
                    progress = true;
                    if self.trace[self.cursor].writeback.is_some() {
                        self.step = Step::Write;
                    } else {
                        self.advance_record();
                    }
                }
                Step::Write => {
                    let addr = self.trace[self.cursor].writeback.expect("writeback step");
                    if !mem.send_write(self.id, addr) {
                        self.rejected = true;
                        break;
                    }
                    self.writes_sent += 1;
                    self.push_ready(1);
                    budget -= 1;
                    progress = true;
                    self.advance_record();
                }
            }
        }
        self.stalled = !progress;
    }

    /// Advances up to `max` cycles in one step while every one of them would
    /// retire a full width from a ready front and issue a full width of
    /// bubbles. Returns the cycles covered; 0 means call `tick` instead.
    pub fn cruise(&mut self, max: u64) -> u64 {
        let w = self.cfg.issue_width as u64;
        let Step::Bubbles(n) = self.step else { return 0 };
        let Some(&Slot::Ready(f)) = self.window.front() else { return 0 };
        let mut m = max.min(n as u64 / w);
        if self.window.len() > 1 {
            m = m.min(f as u64 / w);
        } else if (f as u64) < w {
            return 0;
        }
        if m == 0 {
            return 0;
        }
        let k = (m * w) as u32;
        if self.window.len() > 1 {
            if f == k {
                self.window.pop_front();
            } else {
                self.window[0] = Slot::Ready(f - k);
            }
            self.push_ready(k);
            self.occupancy -= k;
        }
        self.step = Step::Bubbles(n - k);
        self.retired += k as u64;
        self.cycles += m;
        self.stalled = false;
        self.rejected = false;
        m
    }

    /// Counts cycles spent stalled without simulating them.
    pub fn skip_stalled(&mut self, cycles: u64) {
        debug_assert!(self.stalled);
        self.cycles += cycles;
    }

    pub fn check_bounds(&self) -> Result<(), String> {
        if self.outstanding > self.cfg.mshrs {
            return Err(format!("core {} has {} outstanding reads", self.id, self.outstanding));
        }
        if self.occupancy > self.cfg.window {
            return Err(format!("core {} window holds {}", self.id, self.occupancy));
        }
        Ok(())
    }
}

pub fn ipc(retired: u64, cycles: u64) -> f64 {
    if cycles == 0 {
        0.0
    } else {
        retired as f64 / cycles as f64
    }
}
