use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

use super::trace::TraceRecord;

const LINE: u64 = 64;
/// Recent reads a writeback may evict.
const DIRTY_RING: usize = 64;

/// Parameters of a synthetic post-LLC trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceSpec {
    pub mpki: f64,
    pub footprint_bytes: u64,
    /// Probability that the next read is the line after the previous one.
    pub bank_locality: f64,
    /// Probability that a read comes with a writeback.
    pub write_fraction: f64,
    pub len: usize,
    pub seed: u64,
}

impl Default for TraceSpec {
    fn default() -> Self {
        TraceSpec {
            mpki: 20.0,
            footprint_bytes: 64 << 20,
            bank_locality: 0.5,
            write_fraction: 0.3,
            len: 50_000,
            seed: 1,
        }
    }
}

impl TraceSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.mpki > 0.0 && self.mpki <= 1000.0) {
            return Err(Error::config(format!("mpki {} outside (0, 1000]", self.mpki)));
        }
        if self.footprint_bytes < LINE {
            return Err(Error::config("footprint smaller than one line"));
        }
        for (name, p) in [("bank_locality", self.bank_locality), ("write_fraction", self.write_fraction)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::config(format!("{name} {p} outside [0, 1]")));
            }
        }
        if self.len == 0 {
            return Err(Error::config("trace length must be positive"));
        }
        if 1000.0 / self.mpki < 1.0 + self.write_fraction {
            return Err(Error::config(format!(
                "mpki {} too high for write fraction {}",
                self.mpki, self.write_fraction
            )));
        }
        Ok(())
    }

    /// Mean non-memory instructions per record, so that reads per thousand
    /// instructions equals `mpki`.
    pub fn mean_bubbles(&self) -> f64 {
        1000.0 / self.mpki - 1.0 - self.write_fraction
    }
}

impl fmt::Display for TraceSpec {
    /// Compact `key=value` form, parseable by `FromStr`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "mpki={}:footprint={}:locality={}:wf={}:len={}:seed={}",
            self.mpki, self.footprint_bytes, self.bank_locality, self.write_fraction, self.len, self.seed
        )
    }
}

impl FromStr for TraceSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut spec = TraceSpec::default();
        for part in s.split(':').filter(|p| !p.is_empty()) {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| Error::config(format!("trace spec field `{part}` lacks `=`")))?;
            let bad = || Error::config(format!("bad value `{v}` for trace spec field `{k}`"));
            match k {
                "mpki" => spec.mpki = v.parse().map_err(|_| bad())?,
                "footprint" => spec.footprint_bytes = v.parse().map_err(|_| bad())?,
                "locality" => spec.bank_locality = v.parse().map_err(|_| bad())?,
                "wf" => spec.write_fraction = v.parse().map_err(|_| bad())?,
                "len" => spec.len = v.parse().map_err(|_| bad())?,
                "seed" => spec.seed = v.parse().map_err(|_| bad())?,
                _ => return Err(Error::config(format!("unknown trace spec field `{k}`"))),
            }
        }
        spec.validate()?;
        Ok(spec)
    }
}

pub fn generate_trace(spec: &TraceSpec) -> Result<Vec<TraceRecord>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let lines = (spec.footprint_bytes / LINE).max(1);
    let mean = spec.mean_bubbles();
    // Uniform on [0, 2 * mean], drawn as a real and rounded stochastically
    // so the mean holds for small values too.
    let bubbles = |rng: &mut ChaCha8Rng| {
        let x = rng.gen::<f64>() * 2.0 * mean;
        let base = x.floor();
        (base as u32) + (rng.gen::<f64>() < x - base) as u32
    };
    let mut ring = [0u64; DIRTY_RING];
    let mut ring_len = 0usize;
    let mut line = rng.gen_range(0..lines);
    let mut out = Vec::with_capacity(spec.len);
    for i in 0..spec.len {
        if i > 0 {
            line = if rng.gen::<f64>() < spec.bank_locality {
                (line + 1) % lines
            } else {
                rng.gen_range(0..lines)
            };
        }
        let read_addr = line * LINE;
        let writeback = if ring_len > 0 && rng.gen::<f64>() < spec.write_fraction {
            Some(ring[rng.gen_range(0..ring_len)])
        } else {
            None
        };
        ring[i % DIRTY_RING] = read_addr;
        ring_len = (ring_len + 1).min(DIRTY_RING);
        out.push(TraceRecord {
            bubbles: bubbles(&mut rng),
            read_addr,
            writeback,
        });
    }
    Ok(out)
}

/// Named generator spec with its intensity label.
#[derive(Debug, Clone, PartialEq)]
pub struct PoolEntry {
    pub name: String,
    pub spec: TraceSpec,
}

/// Reads-per-kilo-instruction threshold for memory-intensive workloads.
pub const INTENSIVE_MPKI: f64 = 10.0;

impl PoolEntry {
    pub fn intensive(&self) -> bool {
        self.spec.mpki >= INTENSIVE_MPKI
    }
}

/// Default labeled pool of synthetic benchmarks, spanning light to heavy
/// memory intensity with varied locality and write traffic.
pub fn default_pool(len: usize) -> Vec<PoolEntry> {
    let rows: [(&str, f64, u64, f64, f64); 16] = [
        ("stream-a", 45.0, 256 << 20, 0.85, 0.35),
        ("stream-b", 32.0, 192 << 20, 0.75, 0.45),
        ("graph-a", 28.0, 512 << 20, 0.10, 0.20),
        ("graph-b", 22.0, 384 << 20, 0.20, 0.30),
        ("sparse-a", 18.0, 128 << 20, 0.40, 0.25),
        ("sparse-b", 14.0, 96 << 20, 0.55, 0.40),
        ("db-a", 12.0, 320 << 20, 0.15, 0.50),
        ("db-b", 10.5, 256 << 20, 0.30, 0.35),
        ("int-a", 6.0, 48 << 20, 0.50, 0.30),
        ("int-b", 4.0, 32 << 20, 0.35, 0.25),
        ("int-c", 2.5, 24 << 20, 0.60, 0.20),
        ("fp-a", 1.5, 64 << 20, 0.80, 0.30),
        ("fp-b", 1.0, 16 << 20, 0.45, 0.15),
        ("web-a", 0.6, 12 << 20, 0.25, 0.20),
        ("web-b", 0.3, 8 << 20, 0.30, 0.10),
        ("idle-a", 0.15, 4 << 20, 0.50, 0.10),
    ];
    rows.iter()
        .enumerate()
        .map(|(i, &(name, mpki, fp, loc, wf))| PoolEntry {
            name: name.to_string(),
            spec: TraceSpec {
                mpki,
                footprint_bytes: fp,
                bank_locality: loc,
                write_fraction: wf,
                len,
                seed: 0x5eed_0000 + i as u64,
            },
        })
        .collect()
}
