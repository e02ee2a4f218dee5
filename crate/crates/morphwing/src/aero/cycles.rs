//! Hall-trigger cycle segmentation and per-cycle averaging.

use super::{AeroError, ForceRecord};
use std::ops::Range;

/// Mean of a signal over complete wingbeat cycles, plus the spread of the
/// per-cycle means.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct CycleStats {
    /// Grand mean over every sample that falls inside a complete cycle.
    pub mean: f64,
    /// Root-mean-square deviation of the per-cycle means about the grand
    /// mean (population convention, divisor = cycle count).
    pub rmse_across_cycles: f64,
    pub n_cycles: usize,
}

/// Splits records into complete cycles: each Hall trigger opens a cycle
/// that runs up to (not including) the next trigger. Samples before the
/// first trigger and after the last are discarded.
pub fn segment_cycles(records: &[ForceRecord]) -> Result<Vec<Range<usize>>, AeroError> {
    let triggers: Vec<usize> = records
        .iter()
        .enumerate()
        .filter_map(|(i, r)| r.hall.then_some(i))
        .collect();
    if triggers.len() < 2 {
        return Err(AeroError::TooFewTriggers { found: triggers.len() });
    }
    Ok(triggers.windows(2).map(|w| w[0]..w[1]).collect())
}

/// Drops cycles whose duration falls outside [0.5, 2.0] times the median
/// duration. Returns (kept, rejected). `times` must be the per-record
/// timestamps the ranges index into; a range's duration is measured to
/// the trigger that closes it.
pub fn filter_cycles_by_duration(
    cycles: &[Range<usize>],
    times: &[f64],
) -> (Vec<Range<usize>>, Vec<Range<usize>>) {
    if cycles.is_empty() {
        return (Vec::new(), Vec::new());
    }
    let durations: Vec<f64> = cycles.iter().map(|c| times[c.end] - times[c.start]).collect();
    let mut sorted = durations.clone();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let median = if sorted.len() % 2 == 1 {
        sorted[sorted.len() / 2]
    } else {
        0.5 * (sorted[sorted.len() / 2 - 1] + sorted[sorted.len() / 2])
    };
    let mut kept = Vec::new();
    let mut rejected = Vec::new();
    for (cycle, &d) in cycles.iter().zip(&durations) {
        if d >= 0.5 * median && d <= 2.0 * median {
            kept.push(cycle.clone());
        } else {
            rejected.push(cycle.clone());
        }
    }
    (kept, rejected)
}

/// Cycle statistics of one signal channel over the given cycles.
///
/// The grand mean weights every in-cycle sample equally; the spread is
/// computed from the per-cycle means, so it measures cycle-to-cycle
/// repeatability rather than in-cycle waveform shape.
pub fn cycle_average(values: &[f64], cycles: &[Range<usize>]) -> CycleStats {
    let mut sum = 0.0;
    let mut count = 0usize;
    let mut cycle_means = Vec::with_capacity(cycles.len());
    for cycle in cycles {
        let slice = &values[cycle.clone()];
        if slice.is_empty() {
            continue;
        }
        let s: f64 = slice.iter().sum();
        sum += s;
        count += slice.len();
        cycle_means.push(s / slice.len() as f64);
    }
    if count == 0 {
        return CycleStats { mean: 0.0, rmse_across_cycles: 0.0, n_cycles: 0 };
    }
    let mean = sum / count as f64;
    let var: f64 =
        cycle_means.iter().map(|m| (m - mean) * (m - mean)).sum::<f64>() / cycle_means.len() as f64;
    CycleStats { mean, rmse_across_cycles: var.sqrt(), n_cycles: cycle_means.len() }
}
