//! Trim solving on a pair of fitted surfaces: find the angle of attack
//! and flapping frequency where net thrust vanishes and lift carries the
//! target weight.

use super::surface::AeroSurface;
use super::AeroError;
use serde::{Deserialize, Serialize};

/// Search domain in angle of attack (degrees).
pub const ALPHA_DOMAIN: (f64, f64) = (0.0, 12.0);
/// Search domain in flapping frequency (Hz).
pub const FREQ_DOMAIN: (f64, f64) = (2.0, 4.0);

const ALPHA_GRID: usize = 481;
const FREQ_SCAN: usize = 64;
const BISECT_TOL: f64 = 1e-13;
const EXACT_HIT: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrimPoint {
    /// Angle of attack at trim (degrees).
    pub alpha_star: f64,
    /// Flapping frequency at trim (Hz).
    pub freq_star: f64,
    /// Lift at the trim point (gram-force); equals the target weight up
    /// to the solver tolerance.
    pub lift_at_trim: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrimSolution {
    pub trim: TrimPoint,
    /// Zero-net-thrust contour sampled on the angle-of-attack grid, as
    /// (alpha_deg, freq_hz) pairs. Grid points with no zero are absent.
    pub contour: Vec<(f64, f64)>,
}

/// Lowest frequency in the search band where net thrust crosses zero at
/// the given angle of attack, or None if it never does. The band is
/// scanned in 64 subintervals and the first bracketing interval is
/// bisected down to 1e-13 Hz.
pub fn thrust_zero_freq(thrust: &AeroSurface, alpha_deg: f64) -> Option<f64> {
    let (f_lo, f_hi) = FREQ_DOMAIN;
    let step = (f_hi - f_lo) / FREQ_SCAN as f64;
    let t_at = |f: f64| thrust.eval(alpha_deg, f);
    let mut prev_f = f_lo;
    let mut prev_t = t_at(f_lo);
    if prev_t.abs() < EXACT_HIT {
        return Some(f_lo);
    }
    for k in 1..=FREQ_SCAN {
        let f = f_lo + step * k as f64;
        let t = t_at(f);
        if t.abs() < EXACT_HIT {
            return Some(f);
        }
        if prev_t.signum() != t.signum() {
            let (mut lo, mut hi, mut t_lo) = (prev_f, f, prev_t);
            while hi - lo > BISECT_TOL {
                let mid = 0.5 * (lo + hi);
                let tm = t_at(mid);
                if tm == 0.0 {
                    return Some(mid);
                }
                if tm.signum() == t_lo.signum() {
                    lo = mid;
                    t_lo = tm;
                } else {
                    hi = mid;
                }
            }
            return Some(0.5 * (lo + hi));
        }
        prev_f = f;
        prev_t = t;
    }
    None
}

/// Zero-net-thrust contour over the full angle-of-attack grid.
pub fn thrust_zero_contour(thrust: &AeroSurface) -> Vec<(f64, f64)> {
    let (a_lo, a_hi) = ALPHA_DOMAIN;
    (0..ALPHA_GRID)
        .filter_map(|i| {
            let alpha = a_lo + (a_hi - a_lo) * i as f64 / (ALPHA_GRID - 1) as f64;
            thrust_zero_freq(thrust, alpha).map(|f| (alpha, f))
        })
        .collect()
}

/// Finds the trim point: walks the zero-thrust contour, takes the first
/// grid point where lift already equals the weight, otherwise bisects the
/// first adjacent pair where the lift residual changes sign.
pub fn solve_trim(
    lift: &AeroSurface,
    thrust: &AeroSurface,
    weight_g: f64,
) -> Result<TrimSolution, AeroError> {
    let contour = thrust_zero_contour(thrust);
    if contour.is_empty() {
        return Err(AeroError::NoThrustZero);
    }
    let residual = |alpha: f64, freq: f64| lift.eval(alpha, freq) - weight_g;

    for &(alpha, freq) in &contour {
        if residual(alpha, freq).abs() < EXACT_HIT {
            return Ok(solution(alpha, freq, lift, contour));
        }
    }

    let grid_step = (ALPHA_DOMAIN.1 - ALPHA_DOMAIN.0) / (ALPHA_GRID - 1) as f64;
    for w in contour.windows(2) {
        let (a0, f0) = w[0];
        let (a1, f1) = w[1];
        // a gap wider than one grid step means the contour has a hole here
        if a1 - a0 > 1.5 * grid_step {
            continue;
        }
        let g0 = residual(a0, f0);
        let g1 = residual(a1, f1);
        if g0.signum() == g1.signum() {
            continue;
        }
        let (mut lo, mut hi, mut g_lo) = (a0, a1, g0);
        let mut freq = f0;
        while hi - lo > BISECT_TOL {
            let mid = 0.5 * (lo + hi);
            let Some(fm) = thrust_zero_freq(thrust, mid) else { break };
            freq = fm;
            let gm = residual(mid, fm);
            if gm == 0.0 {
                lo = mid;
                hi = mid;
                break;
            }
            if gm.signum() == g_lo.signum() {
                lo = mid;
                g_lo = gm;
            } else {
                hi = mid;
            }
        }
        let alpha = 0.5 * (lo + hi);
        let freq = thrust_zero_freq(thrust, alpha).unwrap_or(freq);
        return Ok(solution(alpha, freq, lift, contour));
    }
    Err(AeroError::NoTrim)
}

fn solution(
    alpha: f64,
    freq: f64,
    lift: &AeroSurface,
    contour: Vec<(f64, f64)>,
) -> TrimSolution {
    TrimSolution {
        trim: TrimPoint { alpha_star: alpha, freq_star: freq, lift_at_trim: lift.eval(alpha, freq) },
        contour,
    }
}
