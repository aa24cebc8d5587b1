//! Multi-programmed performance metrics.

use crate::error::{Error, Result};

fn check(shared: &[f64], alone: &[f64]) -> Result<()> {
    if shared.len() != alone.len() || shared.is_empty() {
        return Err(Error::Metric(format!(
            "need matching non-empty IPC vectors (shared {}, alone {})",
            shared.len(),
            alone.len()
        )));
    }
    if let Some(i) = alone.iter().position(|&a| !(a > 0.0)) {
        return Err(Error::Metric(format!("core {i} has alone IPC {}", alone[i])));
    }
    Ok(())
}

/// Sum over cores of IPC_shared / IPC_alone.
pub fn weighted_speedup(shared: &[f64], alone: &[f64]) -> Result<f64> {
    check(shared, alone)?;
    Ok(shared.iter().zip(alone).map(|(s, a)| s / a).sum())
}

fn slowdowns(shared: &[f64], alone: &[f64]) -> Result<Vec<f64>> {
    check(shared, alone)?;
    if let Some(i) = shared.iter().position(|&s| !(s > 0.0)) {
        return Err(Error::Metric(format!("core {i} has shared IPC {}", shared[i])));
    }
    Ok(shared.iter().zip(alone).map(|(s, a)| a / s).collect())
}

/// N / sum over cores of IPC_alone / IPC_shared.
pub fn harmonic_speedup(shared: &[f64], alone: &[f64]) -> Result<f64> {
    let sd = slowdowns(shared, alone)?;
    Ok(sd.len() as f64 / sd.iter().sum::<f64>())
}

/// Largest IPC_alone / IPC_shared.
pub fn max_slowdown(shared: &[f64], alone: &[f64]) -> Result<f64> {
    Ok(slowdowns(shared, alone)?.into_iter().fold(f64::MIN, f64::max))
}

/// Geometric mean; `None` for an empty slice or non-positive values.
pub fn gmean(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() || xs.iter().any(|&x| !(x > 0.0)) {
        return None;
    }
    Some((xs.iter().map(|x| x.ln()).sum::<f64>() / xs.len() as f64).exp())
}
