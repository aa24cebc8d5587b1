//! Trace-driven core front end and synthetic trace generation.

mod core;
mod gen;
mod trace;

pub use self::core::{ipc, Core, CoreConfig, MemoryPort};
pub use gen::{default_pool, generate_trace, PoolEntry, TraceSpec, INTENSIVE_MPKI};
pub use trace::{format_trace, parse_trace, parse_trace_line, read_trace, trace_mpki, TraceRecord};

const FRAME_BITS: u32 = 12;

/// Maps a core's trace address to a physical address.
///
/// Each core gets its own slice of the frame space; frames are then
/// permuted by an invertible hash so that footprints spread over all rows
/// (and hence subarrays) instead of piling into the lowest ones. Without
/// scrambling, addresses are only offset per core and wrapped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PageMapper {
    capacity: u64,
    cores: u32,
    scramble: bool,
}

impl PageMapper {
    pub fn new(capacity: u64, cores: u32, scramble: bool) -> Self {
        PageMapper {
            capacity,
            cores: cores.max(1),
            scramble: scramble && capacity.is_power_of_two() && capacity >> FRAME_BITS >= 2,
        }
    }

    pub fn map(&self, core: u32, addr: u64) -> u64 {
        let slice = self.capacity / self.cores as u64;
        let local = addr % slice.max(1);
        let flat = core as u64 * slice + local;
        if !self.scramble {
            return flat % self.capacity;
        }
        let frame_bits = (self.capacity >> FRAME_BITS).trailing_zeros();
        let frame = flat >> FRAME_BITS;
        let offset = flat & ((1 << FRAME_BITS) - 1);
        (permute(frame, frame_bits) << FRAME_BITS) | offset
    }
}

/// Bijection on `bits`-bit integers (xorshift-multiply rounds).
fn permute(mut x: u64, bits: u32) -> u64 {
    let mask = if bits >= 64 { u64::MAX } else { (1u64 << bits) - 1 };
    let half = (bits / 2).max(1);
    for k in [0x9E37_79B9_7F4A_7C15u64, 0xBF58_476D_1CE4_E5B9] {
        x ^= x >> half;
        x = x.wrapping_mul(k | 1) & mask;
    }
    x ^ (x >> half)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn permutation_is_bijective() {
        for bits in [1, 4, 10, 14] {
            let n = 1u64 << bits;
            let seen: HashSet<u64> = (0..n).map(|x| permute(x, bits)).collect();
            assert_eq!(seen.len() as u64, n);
            assert!(seen.iter().all(|&y| y < n));
        }
    }

    #[test]
    fn cores_do_not_collide() {
        let m = PageMapper::new(1 << 34, 8, true);
        let mut seen = HashSet::new();
        for core in 0..8 {
            for page in 0..512u64 {
                assert!(seen.insert(m.map(core, page << 12)));
            }
        }
        assert_eq!(m.map(3, 0x1234) & 0xfff, 0x234);
    }

    #[test]
    fn unscrambled_is_offset() {
        let m = PageMapper::new(1 << 20, 2, false);
        assert_eq!(m.map(0, 64), 64);
        assert_eq!(m.map(1, 64), (1 << 19) + 64);
    }
}
