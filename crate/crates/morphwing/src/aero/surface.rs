//! Quadratic response surfaces over angle of attack and flapping
//! frequency, fitted by linear least squares.

use super::AeroError;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// z(alpha, f) = z0 + a*alpha + b*f + c*alpha^2 + d*f^2 + f_ab*alpha*f,
/// with alpha in degrees, f in Hz, and z in gram-force.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AeroSurface {
    pub z0: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub f: f64,
    /// Correlation between measured and fitted values; 1.0 for an exact fit.
    pub r_value: f64,
    /// Root-mean-square residual in gram-force.
    pub rmse_g: f64,
    pub n_points: usize,
}

impl AeroSurface {
    pub fn eval(&self, alpha_deg: f64, freq_hz: f64) -> f64 {
        self.z0
            + self.a * alpha_deg
            + self.b * freq_hz
            + self.c * alpha_deg * alpha_deg
            + self.d * freq_hz * freq_hz
            + self.f * alpha_deg * freq_hz
    }

    /// Coefficients as published, without the fit diagnostics.
    pub fn coefficients(&self) -> [f64; 6] {
        [self.z0, self.a, self.b, self.c, self.d, self.f]
    }
}

/// Fits the six-coefficient surface to (alpha_deg, freq_hz, z_g) points by
/// least squares. Needs at least six points spanning enough of the
/// (alpha, f) plane to make the design matrix full rank.
pub fn fit_surface(points: &[(f64, f64, f64)]) -> Result<AeroSurface, AeroError> {
    let n = points.len();
    if n < 6 {
        return Err(AeroError::RankDeficient { points: n });
    }
    let design = DMatrix::from_fn(n, 6, |r, col| {
        let (alpha, freq, _) = points[r];
        match col {
            0 => 1.0,
            1 => alpha,
            2 => freq,
            3 => alpha * alpha,
            4 => freq * freq,
            _ => alpha * freq,
        }
    });
    let y = DVector::from_fn(n, |r, _| points[r].2);
    let svd = design.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > smax * 1e-10) {
        return Err(AeroError::RankDeficient { points: n });
    }
    let coeffs = svd.solve(&y, smax * 1e-12).expect("svd computed with both factors");

    let fitted = design * &coeffs;
    let residual = &y - &fitted;
    let rmse = (residual.norm_squared() / n as f64).sqrt();
    let y_mean = y.mean();
    let f_mean = fitted.mean();
    let mut syy = 0.0;
    let mut sff = 0.0;
    let mut syf = 0.0;
    for k in 0..n {
        let dy = y[k] - y_mean;
        let df = fitted[k] - f_mean;
        syy += dy * dy;
        sff += df * df;
        syf += dy * df;
    }
    // a perfect or degenerate (constant-response) fit correlates fully
    let r_value = if syy * sff <= 0.0 || rmse < 1e-12 * (1.0 + y_mean.abs()) {
        1.0
    } else {
        syf / (syy * sff).sqrt()
    };

    Ok(AeroSurface {
        z0: coeffs[0],
        a: coeffs[1],
        b: coeffs[2],
        c: coeffs[3],
        d: coeffs[4],
        f: coeffs[5],
        r_value,
        rmse_g: rmse,
        n_points: n,
    })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Independent fit through the normal equations, solved by plain
    /// Gaussian elimination with partial pivoting.
    pub(crate) fn normal_equations_fit(points: &[(f64, f64, f64)]) -> [f64; 6] {
        let mut ata = [[0.0f64; 6]; 6];
        let mut aty = [0.0f64; 6];
        for &(alpha, freq, z) in points {
            let row = [1.0, alpha, freq, alpha * alpha, freq * freq, alpha * freq];
            for i in 0..6 {
                aty[i] += row[i] * z;
                for j in 0..6 {
                    ata[i][j] += row[i] * row[j];
                }
            }
        }
        let mut m = [[0.0f64; 7]; 6];
        for i in 0..6 {
            m[i][..6].copy_from_slice(&ata[i]);
            m[i][6] = aty[i];
        }
        for col in 0..6 {
            let pivot = (col..6)
                .max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))
                .unwrap();
            m.swap(col, pivot);
            assert!(m[col][col].abs() > 1e-12, "oracle pivot vanished");
            for row in col + 1..6 {
                let factor = m[row][col] / m[col][col];
                for k in col..7 {
                    m[row][k] -= factor * m[col][k];
                }
            }
        }
        let mut x = [0.0f64; 6];
        for row in (0..6).rev() {
            let mut acc = m[row][6];
            for k in row + 1..6 {
                acc -= m[row][k] * x[k];
            }
            x[row] = acc / m[row][row];
        }
        x
    }

    fn sample_grid(truth: &[f64; 6], noise: Option<(&mut ChaCha8Rng, f64)>) -> Vec<(f64, f64, f64)> {
        let eval = |alpha: f64, f: f64| {
            truth[0]
                + truth[1] * alpha
                + truth[2] * f
                + truth[3] * alpha * alpha
                + truth[4] * f * f
                + truth[5] * alpha * f
        };
        let mut rng_noise = noise;
        let mut points = Vec::new();
        for ia in 0..7 {
            for i_f in 0..10 {
                let alpha = ia as f64 * 2.0;
                let freq = 2.0 + i_f as f64 * 2.0 / 9.0;
                let mut z = eval(alpha, freq);
                if let Some((rng, sigma)) = rng_noise.as_mut() {
                    // Box-Muller from two uniform draws
                    let u1: f64 = rng.random::<f64>().max(1e-12);
                    let u2: f64 = rng.random();
                    z += *sigma
                        * (-2.0 * u1.ln()).sqrt()
                        * (2.0 * std::f64::consts::PI * u2).cos();
                }
                points.push((alpha, freq, z));
            }
        }
        points
    }

    #[test]
    fn exact_quadratic_data_recovers_coefficients() {
        let truth = [9.94, 22.879, 97.421, -0.095, -0.664, 0.576];
        let points = sample_grid(&truth, None);
        let surface = fit_surface(&points).unwrap();
        for (got, want) in surface.coefficients().iter().zip(&truth) {
            assert_abs_diff_eq!(got, want, epsilon = 1e-9);
        }
        assert_eq!(surface.r_value, 1.0, "noiseless fit must report full correlation");
        assert!(surface.rmse_g < 1e-9, "noiseless rmse {} should vanish", surface.rmse_g);
        assert_eq!(surface.n_points, 70);
    }

    #[test]
    fn svd_solution_matches_normal_equations_oracle() {
        let truth = [-96.6, -4.41, 44.3, 0.018, -1.0, 0.105];
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let points = sample_grid(&truth, Some((&mut rng, 1.2)));
        let surface = fit_surface(&points).unwrap();
        let oracle = normal_equations_fit(&points);
        for (got, want) in surface.coefficients().iter().zip(&oracle) {
            assert_abs_diff_eq!(got, want, epsilon = 1e-8);
        }
        assert!(surface.r_value > 0.99, "r = {}", surface.r_value);
    }

    #[test]
    fn collinear_points_are_rejected_as_rank_deficient() {
        // every point at the same frequency: the f, f^2 columns collide
        let points: Vec<(f64, f64, f64)> =
            (0..12).map(|k| (k as f64, 3.0, 1.0 + k as f64)).collect();
        assert!(matches!(fit_surface(&points), Err(AeroError::RankDeficient { points: 12 })));
        assert!(matches!(fit_surface(&points[..4]), Err(AeroError::RankDeficient { points: 4 })));
    }

    #[test]
    fn constant_response_reports_unit_correlation() {
        let points: Vec<(f64, f64, f64)> = (0..7)
            .flat_map(|ia| (0..3).map(move |i_f| (ia as f64, 2.0 + i_f as f64, 42.0)))
            .collect();
        let surface = fit_surface(&points).unwrap();
        assert_eq!(surface.r_value, 1.0);
        assert_abs_diff_eq!(surface.eval(3.0, 2.5), 42.0, epsilon = 1e-9);
    }

    #[test]
    fn eval_matches_manual_polynomial() {
        let s = AeroSurface {
            z0: 1.0,
            a: 2.0,
            b: 3.0,
            c: 4.0,
            d: 5.0,
            f: 6.0,
            r_value: 1.0,
            rmse_g: 0.0,
            n_points: 0,
        };
        assert_abs_diff_eq!(
            s.eval(2.0, 3.0),
            1.0 + 4.0 + 9.0 + 16.0 + 45.0 + 36.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn surface_serde_uses_published_keys() {
        let s = AeroSurface {
            z0: 9.94,
            a: 22.879,
            b: 97.421,
            c: -0.095,
            d: -0.664,
            f: 0.576,
            r_value: 1.0,
            rmse_g: 0.0,
            n_points: 70,
        };
        let json = serde_json::to_value(&s).unwrap();
        let keys: Vec<&str> = json.as_object().unwrap().keys().map(|k| k.as_str()).collect();
        assert_eq!(keys, ["z0", "a", "b", "c", "d", "f", "r_value", "rmse_g", "n_points"]);
        let back: AeroSurface = serde_json::from_value(json).unwrap();
        assert_eq!(back, s);
    }
}
