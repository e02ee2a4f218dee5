//! Force-bench reduction chain: raw 6-axis load-cell records to wind-axis
//! lift and net thrust, cycle statistics, quadratic surface fits, trim
//! solving, roll-moment filtering and regression.

pub mod cycles;
pub mod filter;
pub mod roll;
pub mod surface;
pub mod trim;

pub use cycles::{cycle_average, filter_cycles_by_duration, segment_cycles, CycleStats};
pub use filter::{butterworth_design, butterworth_lowpass, sos_magnitude, Sos};
pub use roll::{roll_moment_analysis, RollAnalysis, RollCondition};
pub use surface::{fit_surface, AeroSurface};
pub use trim::{solve_trim, thrust_zero_freq, TrimPoint, TrimSolution};

use crate::util::{g9, split_csv};
use serde::{Deserialize, Serialize};

/// Standard gravity used for newton/gram-force conversion (m/s^2).
pub const G0: f64 = 9.80665;

/// Newtons to gram-force.
pub fn newtons_to_gram_force(n: f64) -> f64 {
    n * 1000.0 / G0
}

/// Gram-force to newtons.
pub fn gram_force_to_newtons(g: f64) -> f64 {
    g * G0 / 1000.0
}

#[derive(Debug, thiserror::Error)]
pub enum AeroError {
    #[error("need at least 2 hall triggers to segment cycles, found {found}")]
    TooFewTriggers { found: usize },
    #[error("surface fit design matrix is rank deficient ({points} points)")]
    RankDeficient { points: usize },
    #[error("net thrust has no zero in the frequency domain for any tested angle of attack")]
    NoThrustZero,
    #[error("lift along the thrust-zero contour never crosses the target weight")]
    NoTrim,
    #[error("invalid filter request: {0}")]
    InvalidCutoff(String),
    #[error("need at least 2 distinct frequencies for alpha = {alpha_deg} deg, found {found}")]
    TooFewFrequencies { alpha_deg: f64, found: usize },
    #[error("malformed force record at line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

/// One sample of the 6-axis load cell, with the Hall flag recorded on the
/// same clock. Nominal rate 1000 Hz.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForceRecord {
    pub t: f64,
    pub fx: f64,
    pub fy: f64,
    pub fz: f64,
    pub mx: f64,
    pub my: f64,
    pub mz: f64,
    pub hall: bool,
}

/// Test-point description tying a force record file to its bench state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    pub alpha_deg: f64,
    pub freq_hint_hz: f64,
    pub airspeed_ms: f64,
    /// Gravity tare (N) measured at this angle of attack.
    pub g_offset_n: f64,
    pub wrist_mount_deg: f64,
}

/// Rotates body-axis forces into wind axes and folds in the gravity tare:
///
/// ```text
/// L     =  sin(a) * F_x + cos(a) * F_z + G * sin(a)
/// T_net =  cos(a) * F_x - sin(a) * F_z + G * cos(a)
/// ```
///
/// The 2x2 rotation block has determinant -1 for every angle, so the map
/// is always invertible (and is its own inverse on the force part). The
/// tare G enters both components through the same rotation, which pins
/// the load-cell mounting convention: at zero incidence the tare adds
/// straight onto the thrust axis.
pub fn to_wind_axes(fx: f64, fz: f64, alpha: f64, g: f64) -> (f64, f64) {
    let (s, c) = alpha.sin_cos();
    let lift = s * fx + c * fz + g * s;
    let t_net = c * fx - s * fz + g * c;
    (lift, t_net)
}

/// Parses the force CSV (`t,fx,fy,fz,mx,my,mz,hall`, hall in {0, 1}).
pub fn force_records_from_csv(text: &str) -> Result<Vec<ForceRecord>, AeroError> {
    let mut out = Vec::new();
    let mut last_t = f64::NEG_INFINITY;
    for (idx, line) in text.lines().enumerate() {
        if idx == 0 && line.trim() == "t,fx,fy,fz,mx,my,mz,hall" {
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |reason: &str| AeroError::Parse { line: idx + 1, reason: reason.into() };
        let fields = split_csv(line);
        if fields.len() != 8 {
            return Err(parse_err(&format!("expected 8 fields, got {}", fields.len())));
        }
        let num = |k: usize, name: &str| -> Result<f64, AeroError> {
            fields[k].parse().map_err(|_| parse_err(&format!("unparsable {name}")))
        };
        let hall = match fields[7] {
            "0" => false,
            "1" => true,
            _ => return Err(parse_err("hall flag must be 0 or 1")),
        };
        let rec = ForceRecord {
            t: num(0, "t")?,
            fx: num(1, "fx")?,
            fy: num(2, "fy")?,
            fz: num(3, "fz")?,
            mx: num(4, "mx")?,
            my: num(5, "my")?,
            mz: num(6, "mz")?,
            hall,
        };
        if rec.t <= last_t {
            return Err(parse_err("time must be strictly increasing"));
        }
        last_t = rec.t;
        out.push(rec);
    }
    Ok(out)
}

/// Serializes force records back to the bench CSV format.
pub fn force_records_to_csv(records: &[ForceRecord]) -> String {
    let mut out = String::from("t,fx,fy,fz,mx,my,mz,hall\n");
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            g9(r.t),
            g9(r.fx),
            g9(r.fy),
            g9(r.fz),
            g9(r.mx),
            g9(r.my),
            g9(r.mz),
            if r.hall { 1 } else { 0 }
        ));
    }
    out
}

/// Reduces one bench condition to a cycle-averaged wind-axis point:
/// segments by Hall trigger, drops jittered cycles, averages body-axis
/// forces, rotates into wind axes, and converts to gram-force. Returns
/// (lift_g, net_thrust_g).
pub fn reduce_condition(
    records: &[ForceRecord],
    alpha_deg: f64,
    g_offset_n: f64,
) -> Result<(f64, f64), AeroError> {
    let cycles = segment_cycles(records)?;
    let times: Vec<f64> = records.iter().map(|r| r.t).collect();
    let (kept, _) = filter_cycles_by_duration(&cycles, &times);
    let cycles = if kept.is_empty() { cycles } else { kept };
    let fx: Vec<f64> = records.iter().map(|r| r.fx).collect();
    let fz: Vec<f64> = records.iter().map(|r| r.fz).collect();
    let fx_mean = cycle_average(&fx, &cycles).mean;
    let fz_mean = cycle_average(&fz, &cycles).mean;
    let (lift_n, thrust_n) = to_wind_axes(fx_mean, fz_mean, alpha_deg.to_radians(), g_offset_n);
    Ok((newtons_to_gram_force(lift_n), newtons_to_gram_force(thrust_n)))
}
