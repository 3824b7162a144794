//! Pairwise distances between standardized return series.
//!
//! Two metrics are provided. The correlation distance `sqrt(2 (1 - rho))`
//! only sees same-instant co-movement. The coherence distance
//! `[ (1 / 2 pi) * integral over [-pi, pi] of (1 - C(omega)) ]^(1/2)` is zero
//! for any pair related by a linear time-invariant filter, delays included.

mod matrix;

use crate::error::{Error, Result};
use crate::series::{is_standardized, mean};
use crate::spectral::{CoherenceSpectrum, SegmentSpectra, SpectralConfig};

pub use matrix::{average_matrices, session_distance_matrix, DistanceMatrix, MetricKind};

fn check_pair(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::validation(format!(
            "series lengths differ: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::degenerate(format!(
            "need at least 2 samples, got {}",
            x.len()
        )));
    }
    Ok(())
}

fn centered_norm(x: &[f64]) -> (Vec<f64>, f64) {
    let m = mean(x);
    let c: Vec<f64> = x.iter().map(|v| v - m).collect();
    let ss = c.iter().map(|v| v * v).sum::<f64>();
    (c, ss.sqrt())
}

/// Sample Pearson correlation, clamped into `[-1, 1]`.
pub fn pearson_correlation(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    let (cx, nx) = centered_norm(x);
    let (cy, ny) = centered_norm(y);
    for (c, n) in [(x, nx), (y, ny)] {
        let scale = c.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        if !(n > scale * 1e-12 * (c.len() as f64).sqrt()) {
            return Err(Error::degenerate("constant series has no correlation"));
        }
    }
    let dot: f64 = cx.iter().zip(&cy).map(|(a, b)| a * b).sum();
    Ok((dot / (nx * ny)).clamp(-1.0, 1.0))
}

/// `sqrt(2 (1 - rho))`, in `[0, 2]`.
///
/// Evaluated as the Euclidean distance between the centered, unit-norm
/// versions of `x` and `y`, which is algebraically identical and avoids the
/// cancellation in `1 - rho` when the series are nearly equal.
pub fn correlation_distance(x: &[f64], y: &[f64]) -> Result<f64> {
    pearson_correlation(x, y)?;
    let (cx, nx) = centered_norm(x);
    let (cy, ny) = centered_norm(y);
    let d = cx
        .iter()
        .zip(&cy)
        .map(|(a, b)| (a / nx - b / ny).powi(2))
        .sum::<f64>()
        .sqrt()
        .min(2.0);
    debug_assert!((0.0..=2.0).contains(&d));
    Ok(d)
}

/// Scalar gain `E[x_j^2] / E[x_i^2]` for modeling `x_j` by `x_i`.
pub fn model_gain(x_i: &[f64], x_j: &[f64]) -> Result<f64> {
    check_pair(x_i, x_j)?;
    let p_i = second_moment(x_i);
    if !(p_i > 0.0) {
        return Err(Error::degenerate("modeling series has zero power"));
    }
    Ok(second_moment(x_j) / p_i)
}

fn second_moment(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64
}

/// Power of the residual `x_j - alpha x_i` relative to the power of `x_j`,
/// with `alpha` from [`model_gain`]. Only for standardized inputs, where it
/// equals the squared correlation distance.
pub fn residual_power_ratio(x_i: &[f64], x_j: &[f64]) -> Result<f64> {
    check_pair(x_i, x_j)?;
    if !is_standardized(x_i) || !is_standardized(x_j) {
        return Err(Error::validation(
            "residual power ratio requires zero-mean unit-variance inputs",
        ));
    }
    let alpha = model_gain(x_i, x_j)?;
    let residual: Vec<f64> = x_j.iter().zip(x_i).map(|(j, i)| j - alpha * i).collect();
    Ok(second_moment(&residual) / second_moment(x_j))
}

/// Trapezoidal integral of `1 - C` over the uniform `[0, pi]` grid, doubled
/// for the negative half, divided by `2 pi` and square-rooted.
pub fn coherence_distance_from_spectrum(c: &CoherenceSpectrum) -> Result<f64> {
    let m = c.values.len();
    if m < 2 {
        return Err(Error::InsufficientData(
            "coherence grid needs at least 2 frequencies".to_string(),
        ));
    }
    let step = std::f64::consts::PI / (m - 1) as f64;
    let deficit = |v: f64| 1.0 - v;
    let interior: f64 = c.values[1..m - 1].iter().map(|&v| deficit(v)).sum();
    let integral = step * (0.5 * (deficit(c.values[0]) + deficit(c.values[m - 1])) + interior);
    // 2 * integral / (2 pi)
    let d = (integral / std::f64::consts::PI).clamp(0.0, 1.0).sqrt();
    debug_assert!((0.0..=1.0).contains(&d));
    Ok(d)
}

pub fn coherence_distance(x: &[f64], y: &[f64], cfg: &SpectralConfig) -> Result<f64> {
    check_pair(x, y)?;
    let sx = SegmentSpectra::compute(x, cfg)?;
    let sy = SegmentSpectra::compute(y, cfg)?;
    coherence_distance_from_spectrum(&sx.coherence(&sy)?)
}

/// Triangle-inequality violations over all ordered triples of a distance
/// matrix, as `(i, j, k, excess)` with `d(i,k) - d(i,j) - d(j,k) > slack`.
/// A diagnostic only: the coherence distance is not asserted to be a metric.
pub fn triangle_violations(m: &DistanceMatrix, slack: f64) -> Vec<(usize, usize, usize, f64)> {
    let n = m.len();
    let mut out = Vec::new();
    for i in 0..n {
        for k in (i + 1)..n {
            let Some(dik) = m.get(i, k) else { continue };
            for j in 0..n {
                if j == i || j == k {
                    continue;
                }
                if let (Some(dij), Some(djk)) = (m.get(i, j), m.get(j, k)) {
                    let excess = dik - dij - djk;
                    if excess > slack {
                        out.push((i, j, k, excess));
                    }
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::standardize;
    use crate::synth::{delayed_copy, white_noise};

    #[test]
    fn pearson_extremes() {
        let x = white_noise(200, 1);
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((pearson_correlation(&x, &x).unwrap() - 1.0).abs() < 1e-15);
        assert!((pearson_correlation(&x, &neg).unwrap() + 1.0).abs() < 1e-15);
        assert!(matches!(
            pearson_correlation(&x, &vec![2.5; 200]),
            Err(Error::DegenerateInput(_))
        ));
        assert!(pearson_correlation(&x, &x[..100]).is_err());
    }

    #[test]
    fn correlation_distance_examples() {
        let x = standardize(&white_noise(4096, 11)).unwrap();
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert_eq!(correlation_distance(&x, &x).unwrap(), 0.0);
        assert!((correlation_distance(&x, &neg).unwrap() - 2.0).abs() < 1e-12);
        let d = correlation_distance(&x, &delayed_copy(&x, 1).unwrap()).unwrap();
        assert!((1.35..=1.48).contains(&d), "d = {d}");
    }

    #[test]
    fn correlation_distance_is_euclidean_embedding() {
        let x = white_noise(300, 1);
        let y: Vec<f64> = white_noise(300, 2)
            .iter()
            .zip(&x)
            .map(|(a, b)| a + 0.5 * b)
            .collect();
        let unit = |v: &[f64]| {
            let (c, n) = centered_norm(v);
            c.into_iter().map(|t| t / n).collect::<Vec<_>>()
        };
        let (ux, uy) = (unit(&x), unit(&y));
        let euclid = ux
            .iter()
            .zip(&uy)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        assert!((correlation_distance(&x, &y).unwrap() - euclid).abs() < 1e-12);
    }

    #[test]
    fn model_gain_examples() {
        let x = standardize(&white_noise(128, 3)).unwrap();
        let y = standardize(&white_noise(128, 4)).unwrap();
        assert!((model_gain(&x, &y).unwrap() - 1.0).abs() < 1e-9);
        let xi = [1.0, -1.0, 1.0, -1.0].map(|v: f64| v * 2f64.sqrt());
        let xj = [2.0, 2.0, -2.0, -2.0];
        assert!((model_gain(&xi, &xj).unwrap() - 2.0).abs() < 1e-12);
        assert!(matches!(
            model_gain(&[0.0; 4], &xj),
            Err(Error::DegenerateInput(_))
        ));
    }

    #[test]
    fn residual_power_ratio_examples() {
        let x = standardize(&white_noise(512, 5)).unwrap();
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!(residual_power_ratio(&x, &x).unwrap().abs() < 1e-12);
        assert!((residual_power_ratio(&x, &neg).unwrap() - 4.0).abs() < 1e-12);
        let raw = white_noise(512, 6);
        assert!(matches!(
            residual_power_ratio(&x, &raw),
            Err(Error::Validation(_))
        ));
    }

    fn flat(value: f64, m: usize) -> CoherenceSpectrum {
        CoherenceSpectrum {
            frequencies: (0..m)
                .map(|k| std::f64::consts::PI * k as f64 / (m - 1) as f64)
                .collect(),
            values: vec![value; m],
            segments: 2,
        }
    }

    #[test]
    fn quadrature_endpoints() {
        for m in [2, 9, 257, 1025] {
            assert!(
                coherence_distance_from_spectrum(&flat(1.0, m))
                    .unwrap()
                    .abs()
                    <= 1e-9
            );
            assert!((coherence_distance_from_spectrum(&flat(0.0, m)).unwrap() - 1.0).abs() <= 1e-9);
        }
        // C = 0.75 everywhere leaves a deficit of 1/4, distance 1/2.
        assert!((coherence_distance_from_spectrum(&flat(0.75, 33)).unwrap() - 0.5).abs() < 1e-12);
        assert!(coherence_distance_from_spectrum(&flat(0.0, 1)).is_err());
    }

    #[test]
    fn quadrature_matches_linear_ramp() {
        // C(w) = w / pi integrates to pi / 2 on [0, pi]; trapezoid is exact.
        let m = 65;
        let mut c = flat(0.0, m);
        c.values = c
            .frequencies
            .iter()
            .map(|w| w / std::f64::consts::PI)
            .collect();
        let d = coherence_distance_from_spectrum(&c).unwrap();
        assert!((d - 0.5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn coherence_distance_of_self_is_zero() {
        let cfg = SpectralConfig::new(64, 0.5, Default::default()).unwrap();
        let x = white_noise(1024, 8);
        assert!(coherence_distance(&x, &x, &cfg).unwrap() <= 1e-9);
    }
}
