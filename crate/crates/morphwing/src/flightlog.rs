//! Onboard attitude log analysis: wingbeat-normalized time, roll agility
//! metrics, and cross-trial ensemble statistics for maneuver envelopes.

use crate::util::{g9, split_csv};
use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum FlightLogError {
    #[error("malformed attitude record at line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("time stamps must increase strictly (offending t = {t})")]
    NonMonotonicTime { t: f64 },
    #[error("need at least {need} cycle markers, found {found}")]
    TooFewMarkers { need: usize, found: usize },
    #[error("ensemble statistics need at least 2 trials, found {found}")]
    TooFewTrials { found: usize },
}

/// One recorded flight or bench trial, column-major. Angles in degrees,
/// rates in degrees per second. `markers` holds the timestamps of the
/// wingbeat sync marks, strictly increasing.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AttitudeLog {
    pub t: Vec<f64>,
    pub roll: Vec<f64>,
    pub pitch: Vec<f64>,
    pub yaw: Vec<f64>,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub r: Vec<f64>,
    pub markers: Vec<f64>,
}

impl AttitudeLog {
    /// Parses the logger CSV. Layout is
    /// `t,roll_deg,pitch_deg,yaw_deg,p_dps,q_dps,r_dps` with an optional
    /// trailing `marker` column; rows with marker = 1 define the wingbeat
    /// marks. The header line is optional.
    pub fn from_csv(text: &str) -> Result<Self, FlightLogError> {
        let mut log = AttitudeLog::default();
        let mut last_t = f64::NEG_INFINITY;
        for (idx, line) in text.lines().enumerate() {
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            if idx == 0 && trimmed.starts_with("t,") {
                continue;
            }
            let parse_err =
                |reason: String| FlightLogError::Parse { line: idx + 1, reason };
            let fields = split_csv(line);
            if fields.len() != 7 && fields.len() != 8 {
                return Err(parse_err(format!("expected 7 or 8 fields, got {}", fields.len())));
            }
            let mut nums = [0.0f64; 7];
            for (k, slot) in nums.iter_mut().enumerate() {
                *slot = fields[k]
                    .parse()
                    .map_err(|_| parse_err(format!("unparsable field {}", k + 1)))?;
            }
            let marker = if fields.len() == 8 {
                match fields[7] {
                    "0" => false,
                    "1" => true,
                    other => return Err(parse_err(format!("marker flag must be 0 or 1, got {other}"))),
                }
            } else {
                false
            };
            if nums[0] <= last_t {
                return Err(FlightLogError::NonMonotonicTime { t: nums[0] });
            }
            last_t = nums[0];
            log.t.push(nums[0]);
            log.roll.push(nums[1]);
            log.pitch.push(nums[2]);
            log.yaw.push(nums[3]);
            log.p.push(nums[4]);
            log.q.push(nums[5]);
            log.r.push(nums[6]);
            if marker {
                log.markers.push(nums[0]);
            }
        }
        Ok(log)
    }

    /// Replaces the markers with a uniform train at `freq_hz` starting at
    /// `t0`, for logs recorded without a sync channel. Only marks inside
    /// the recorded time span are kept.
    pub fn with_uniform_markers(mut self, freq_hz: f64, t0: f64) -> Self {
        self.markers.clear();
        let (Some(&first), Some(&last)) = (self.t.first(), self.t.last()) else {
            return self;
        };
        if !(freq_hz > 0.0) {
            return self;
        }
        let period = 1.0 / freq_hz;
        let mut k = ((first - t0) / period).ceil() as i64;
        loop {
            let m = t0 + k as f64 * period;
            if m > last {
                break;
            }
            if m >= first {
                self.markers.push(m);
            }
            k += 1;
        }
        self
    }

    /// Maps every timestamp into wingbeat-normalized time: marker k sits
    /// at tau = k, with linear interpolation between markers and
    /// edge-slope extrapolation outside the marked span.
    pub fn normalize_time(&self) -> Result<Vec<f64>, FlightLogError> {
        let m = &self.markers;
        if m.len() < 2 {
            return Err(FlightLogError::TooFewMarkers { need: 2, found: m.len() });
        }
        for w in m.windows(2) {
            if w[1] <= w[0] {
                return Err(FlightLogError::NonMonotonicTime { t: w[1] });
            }
        }
        Ok(self.t.iter().map(|&t| tau_at(m, t)).collect())
    }
}

fn tau_at(markers: &[f64], t: f64) -> f64 {
    let last = markers.len() - 1;
    // partition_point gives the first marker above t; clamp to a real segment
    let seg = markers.partition_point(|&m| m <= t).clamp(1, last);
    (seg - 1) as f64 + (t - markers[seg - 1]) / (markers[seg] - markers[seg - 1])
}

/// Outcome of the roll agility scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "result", rename_all = "snake_case")]
pub enum AgilityResult {
    /// The roll excursion reached the target this many wingbeats after
    /// the start point.
    Crossing { cycles: f64 },
    NoCrossing,
}

/// Wingbeats needed for the roll angle to move `target_deg` away from its
/// value at `start_tau` (normalized time). The start point is clamped to
/// the sampled span; the crossing is located by linear interpolation
/// between samples.
pub fn agility_metric(
    log: &AttitudeLog,
    target_deg: f64,
    start_tau: f64,
) -> Result<AgilityResult, FlightLogError> {
    let taus = log.normalize_time()?;
    if taus.is_empty() {
        return Ok(AgilityResult::NoCrossing);
    }
    let start = start_tau.clamp(taus[0], taus[taus.len() - 1]);
    let reference = interp(&taus, &log.roll, start);
    if target_deg <= 0.0 {
        return Ok(AgilityResult::Crossing { cycles: 0.0 });
    }
    let mut prev = (start, 0.0);
    for (i, &tau) in taus.iter().enumerate() {
        if tau <= start {
            continue;
        }
        let d = (log.roll[i] - reference).abs();
        if d >= target_deg {
            let (tau_a, d_a) = prev;
            let tau_star = if d > d_a {
                tau_a + (target_deg - d_a) * (tau - tau_a) / (d - d_a)
            } else {
                tau
            };
            return Ok(AgilityResult::Crossing { cycles: tau_star - start });
        }
        prev = (tau, d);
    }
    Ok(AgilityResult::NoCrossing)
}

fn interp(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let last = xs.len() - 1;
    if x <= xs[0] {
        return ys[0];
    }
    if x >= xs[last] {
        return ys[last];
    }
    let hi = xs.partition_point(|&v| v <= x).min(last);
    let lo = hi - 1;
    let w = (x - xs[lo]) / (xs[hi] - xs[lo]);
    ys[lo] + w * (ys[hi] - ys[lo])
}

/// One bin of the maneuver ensemble, centered at `tau` wingbeats after
/// each trial's start marker.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnsembleBin {
    pub tau: f64,
    pub mean_roll: f64,
    pub se_roll: f64,
    pub mean_pitch: f64,
    pub se_pitch: f64,
    pub mean_yaw: f64,
    pub se_yaw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ManeuverEnsemble {
    pub bins: Vec<EnsembleBin>,
    pub bins_per_cycle: usize,
    pub n_trials: usize,
}

/// Cross-trial mean and standard error on a common wingbeat-phase grid.
///
/// Each trial is shifted so its start marker sits at tau = 0, its yaw is
/// zeroed to the first sample, and its samples are dropped into bins of
/// width 1/bins_per_cycle. Only bins populated by every trial survive.
/// The standard error is the population standard deviation of the
/// per-trial bin means divided by sqrt(trial count).
pub fn ensemble_stats(
    trials: &[AttitudeLog],
    start_markers: &[usize],
    bins_per_cycle: usize,
) -> Result<ManeuverEnsemble, FlightLogError> {
    assert_eq!(trials.len(), start_markers.len(), "one start marker per trial");
    assert!(bins_per_cycle >= 1, "bins_per_cycle must be at least 1");
    if trials.len() < 2 {
        return Err(FlightLogError::TooFewTrials { found: trials.len() });
    }

    struct BinAcc {
        sums: [f64; 3],
        count: usize,
    }
    // per trial: bin index -> accumulated (roll, pitch, yaw)
    let mut per_trial: Vec<std::collections::BTreeMap<i64, BinAcc>> = Vec::new();
    for (log, &start) in trials.iter().zip(start_markers) {
        if start >= log.markers.len() {
            return Err(FlightLogError::TooFewMarkers {
                need: start + 1,
                found: log.markers.len(),
            });
        }
        let taus = log.normalize_time()?;
        let yaw0 = log.yaw.first().copied().unwrap_or(0.0);
        let mut bins: std::collections::BTreeMap<i64, BinAcc> = std::collections::BTreeMap::new();
        for (i, &tau) in taus.iter().enumerate() {
            let shifted = tau - start as f64;
            let bin = (shifted * bins_per_cycle as f64).floor() as i64;
            let acc = bins.entry(bin).or_insert(BinAcc { sums: [0.0; 3], count: 0 });
            acc.sums[0] += log.roll[i];
            acc.sums[1] += log.pitch[i];
            acc.sums[2] += log.yaw[i] - yaw0;
            acc.count += 1;
        }
        per_trial.push(bins);
    }

    let common: Vec<i64> = per_trial[0]
        .keys()
        .copied()
        .filter(|bin| per_trial.iter().all(|t| t.contains_key(bin)))
        .collect();

    let n = trials.len() as f64;
    let mut bins = Vec::with_capacity(common.len());
    for bin in common {
        let means: Vec<[f64; 3]> = per_trial
            .iter()
            .map(|t| {
                let acc = &t[&bin];
                [
                    acc.sums[0] / acc.count as f64,
                    acc.sums[1] / acc.count as f64,
                    acc.sums[2] / acc.count as f64,
                ]
            })
            .collect();
        let mut mean = [0.0; 3];
        for m in &means {
            for k in 0..3 {
                mean[k] += m[k] / n;
            }
        }
        let mut se = [0.0; 3];
        for m in &means {
            for k in 0..3 {
                se[k] += (m[k] - mean[k]) * (m[k] - mean[k]);
            }
        }
        for s in &mut se {
            *s = (*s / n).sqrt() / n.sqrt();
        }
        bins.push(EnsembleBin {
            tau: (bin as f64 + 0.5) / bins_per_cycle as f64,
            mean_roll: mean[0],
            se_roll: se[0],
            mean_pitch: mean[1],
            se_pitch: se[1],
            mean_yaw: mean[2],
            se_yaw: se[2],
        });
    }
    Ok(ManeuverEnsemble { bins, bins_per_cycle, n_trials: trials.len() })
}

/// Ensemble as CSV: `tau,mean_roll,se_roll,mean_pitch,se_pitch,mean_yaw,se_yaw`.
pub fn ensemble_to_csv(ensemble: &ManeuverEnsemble) -> String {
    let mut out = String::from("tau,mean_roll,se_roll,mean_pitch,se_pitch,mean_yaw,se_yaw\n");
    for b in &ensemble.bins {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            g9(b.tau),
            g9(b.mean_roll),
            g9(b.se_roll),
            g9(b.mean_pitch),
            g9(b.se_pitch),
            g9(b.mean_yaw),
            g9(b.se_yaw)
        ));
    }
    out
}
