//! Roll-moment reduction: low-pass the roll channel, average it over
//! wingbeat cycles, and regress the cycle mean against flapping frequency
//! for each angle of attack.

use super::cycles::{cycle_average, filter_cycles_by_duration, segment_cycles, CycleStats};
use super::filter::butterworth_lowpass;
use super::{AeroError, ForceRecord};
use serde::Serialize;

/// One bench run at a fixed angle of attack and commanded frequency.
#[derive(Debug, Clone)]
pub struct RollCondition {
    pub alpha_deg: f64,
    pub freq_hz: f64,
    pub records: Vec<ForceRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RollConditionSummary {
    pub alpha_deg: f64,
    pub freq_hz: f64,
    pub stats: CycleStats,
    /// True when the cycle-to-cycle spread exceeds the repeatability limit.
    pub flagged: bool,
}

/// Least-squares line of cycle-mean roll moment against frequency at one
/// angle of attack.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RollRegression {
    pub alpha_deg: f64,
    pub slope_nm_per_hz: f64,
    pub intercept_nm: f64,
    pub r_squared: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RollAnalysis {
    pub conditions: Vec<RollConditionSummary>,
    pub regressions: Vec<RollRegression>,
    pub rmse_limit_nm: f64,
}

fn linear_regression(points: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for &(x, y) in points {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    for &(x, y) in points {
        let e = y - (intercept + slope * x);
        ss_res += e * e;
        ss_tot += (y - my) * (y - my);
    }
    // a flat response fits its own mean perfectly
    let r_squared = if ss_tot == 0.0 {
        if ss_res < 1e-30 {
            1.0
        } else {
            0.0
        }
    } else {
        1.0 - ss_res / ss_tot
    };
    (slope, intercept, r_squared)
}

/// Runs every condition through the filter/segment/average chain, then
/// fits the per-alpha frequency response lines. Needs at least two
/// distinct frequencies per angle of attack.
pub fn roll_moment_analysis(
    conditions: &[RollCondition],
    sample_rate: f64,
    cutoff_hz: f64,
    order: usize,
    rmse_limit_nm: f64,
) -> Result<RollAnalysis, AeroError> {
    let mut summaries = Vec::with_capacity(conditions.len());
    for cond in conditions {
        let mx: Vec<f64> = cond.records.iter().map(|r| r.mx).collect();
        let filtered = butterworth_lowpass(&mx, sample_rate, cutoff_hz, order)?;
        let cycles = segment_cycles(&cond.records)?;
        let times: Vec<f64> = cond.records.iter().map(|r| r.t).collect();
        let (kept, _) = filter_cycles_by_duration(&cycles, &times);
        let stats = cycle_average(&filtered, &kept);
        summaries.push(RollConditionSummary {
            alpha_deg: cond.alpha_deg,
            freq_hz: cond.freq_hz,
            stats,
            flagged: stats.rmse_across_cycles > rmse_limit_nm,
        });
    }
    summaries.sort_by(|a, b| {
        a.alpha_deg.total_cmp(&b.alpha_deg).then(a.freq_hz.total_cmp(&b.freq_hz))
    });

    let mut regressions = Vec::new();
    let mut start = 0;
    while start < summaries.len() {
        let alpha = summaries[start].alpha_deg;
        let mut end = start;
        while end < summaries.len() && summaries[end].alpha_deg == alpha {
            end += 1;
        }
        let group = &summaries[start..end];
        let mut freqs: Vec<f64> = group.iter().map(|s| s.freq_hz).collect();
        freqs.dedup();
        if freqs.len() < 2 {
            return Err(AeroError::TooFewFrequencies { alpha_deg: alpha, found: freqs.len() });
        }
        let points: Vec<(f64, f64)> = group.iter().map(|s| (s.freq_hz, s.stats.mean)).collect();
        let (slope, intercept, r_squared) = linear_regression(&points);
        regressions.push(RollRegression {
            alpha_deg: alpha,
            slope_nm_per_hz: slope,
            intercept_nm: intercept,
            r_squared,
        });
        start = end;
    }

    Ok(RollAnalysis { conditions: summaries, regressions, rmse_limit_nm })
}
