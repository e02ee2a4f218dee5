//! Butterworth low-pass filtering for load-cell channels, realized as
//! cascaded second-order sections.

use super::AeroError;
use num_complex::Complex64;
use std::f64::consts::PI;

/// One second-order section. Transfer function
/// (b0 + b1 z^-1 + b2 z^-2) / (a0 + a1 z^-1 + a2 z^-2) with a0 = 1.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Sos {
    pub b: [f64; 3],
    pub a: [f64; 3],
}

/// Designs a Butterworth low-pass of the given order via the bilinear
/// transform with cutoff prewarping, so the half-power point lands
/// exactly on `cutoff_hz`. Conjugate pole pairs become biquads; an odd
/// order appends one first-order section. Every section is normalized to
/// unit gain at DC.
pub fn butterworth_design(
    sample_rate: f64,
    cutoff_hz: f64,
    order: usize,
) -> Result<Vec<Sos>, AeroError> {
    if !(sample_rate > 0.0 && sample_rate.is_finite()) {
        return Err(AeroError::InvalidCutoff(format!("sample rate {sample_rate} must be positive")));
    }
    if !(cutoff_hz > 0.0 && cutoff_hz < sample_rate / 2.0) {
        return Err(AeroError::InvalidCutoff(format!(
            "cutoff {cutoff_hz} Hz must lie in (0, {}) for sample rate {sample_rate}",
            sample_rate / 2.0
        )));
    }
    if order == 0 || order > 32 {
        return Err(AeroError::InvalidCutoff(format!("order {order} must be in 1..=32")));
    }

    let warped = 2.0 * sample_rate * (PI * cutoff_hz / sample_rate).tan();
    let n = order as f64;
    let mut sections = Vec::with_capacity(order.div_ceil(2));
    for k in 0..order / 2 {
        // analog pole on the left-half Butterworth circle of radius `warped`
        let theta = PI / 2.0 + (2 * k + 1) as f64 * PI / (2.0 * n);
        let s = warped * Complex64::new(theta.cos(), theta.sin());
        let z = (Complex64::new(1.0, 0.0) + s / (2.0 * sample_rate))
            / (Complex64::new(1.0, 0.0) - s / (2.0 * sample_rate));
        let a1 = -2.0 * z.re;
        let a2 = z.norm_sqr();
        let gain = (1.0 + a1 + a2) / 4.0;
        sections.push(Sos { b: [gain, 2.0 * gain, gain], a: [1.0, a1, a2] });
    }
    if order % 2 == 1 {
        // the middle pole is real: s = -warped
        let s = -warped;
        let z = (1.0 + s / (2.0 * sample_rate)) / (1.0 - s / (2.0 * sample_rate));
        let a1 = -z;
        let gain = (1.0 + a1) / 2.0;
        sections.push(Sos { b: [gain, gain, 0.0], a: [1.0, a1, 0.0] });
    }
    Ok(sections)
}

/// Magnitude of the cascade's frequency response at `freq_hz`.
pub fn sos_magnitude(sections: &[Sos], freq_hz: f64, sample_rate: f64) -> f64 {
    let w = 2.0 * PI * freq_hz / sample_rate;
    let zinv = Complex64::new(w.cos(), -w.sin());
    let zinv2 = zinv * zinv;
    let mut h = Complex64::new(1.0, 0.0);
    for s in sections {
        let num = Complex64::new(s.b[0], 0.0) + zinv * s.b[1] + zinv2 * s.b[2];
        let den = Complex64::new(s.a[0], 0.0) + zinv * s.a[1] + zinv2 * s.a[2];
        h *= num / den;
    }
    h.norm()
}

/// Runs the cascade over the signal once, causally, in transposed
/// direct-form II with zero initial state.
pub fn apply_sos(sections: &[Sos], signal: &[f64]) -> Vec<f64> {
    let mut out = signal.to_vec();
    for s in sections {
        let mut w1 = 0.0;
        let mut w2 = 0.0;
        for x in out.iter_mut() {
            let xin = *x;
            let y = s.b[0] * xin + w1;
            w1 = s.b[1] * xin - s.a[1] * y + w2;
            w2 = s.b[2] * xin - s.a[2] * y;
            *x = y;
        }
    }
    out
}

/// Designs and applies a Butterworth low-pass in one step.
pub fn butterworth_lowpass(
    signal: &[f64],
    sample_rate: f64,
    cutoff_hz: f64,
    order: usize,
) -> Result<Vec<f64>, AeroError> {
    Ok(apply_sos(&butterworth_design(sample_rate, cutoff_hz, order)?, signal))
}
