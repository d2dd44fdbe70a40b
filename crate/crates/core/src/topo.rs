//! Week-over-week Betti increments and the model's Betti-based feature.
//!
//! Increments compare decile indices across weeks: each week has its own
//! epsilon values, so only the index k is commensurable.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::homology::{BettiSequence, DECILE_LEVELS};

/// Left Betti increment: values at week t minus week t-1, per decile index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BettiIncrement {
    pub p: u8,
    pub week: usize,
    pub values: Vec<i64>,
}

/// Componentwise left difference of two consecutive weekly Betti sequences.
pub fn left_increment(seq_t: &BettiSequence, seq_prev: &BettiSequence) -> Result<BettiIncrement> {
    if seq_t.p != seq_prev.p {
        return Err(Error::InvalidArgument(format!(
            "dimension mismatch: p={} vs p={}",
            seq_t.p, seq_prev.p
        )));
    }
    if seq_t.week == 0 || seq_prev.week + 1 != seq_t.week {
        return Err(Error::InvalidArgument(format!(
            "weeks {} and {} are not consecutive",
            seq_prev.week, seq_t.week
        )));
    }
    let values = seq_t
        .values
        .iter()
        .zip(&seq_prev.values)
        .map(|(&a, &b)| a as i64 - b as i64)
        .collect();
    Ok(BettiIncrement {
        p: seq_t.p,
        week: seq_t.week,
        values,
    })
}

/// Extracts the configured decile component (default k = 40, p = 0).
pub fn select_betti_feature(increment: &BettiIncrement, k: u32, p: u8) -> Result<i64> {
    if increment.p != p {
        return Err(Error::InvalidArgument(format!(
            "expected dimension p={p}, increment has p={}",
            increment.p
        )));
    }
    let position = DECILE_LEVELS
        .iter()
        .position(|&level| level == k)
        .ok_or_else(|| Error::InvalidArgument(format!("decile index {k} not in the grid")))?;
    Ok(increment.values[position])
}
