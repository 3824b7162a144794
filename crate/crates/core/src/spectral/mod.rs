//! Welch estimation of auto-spectra, cross-spectra and magnitude-squared
//! coherence on the one-sided grid `omega_k = 2 pi k / L`, `k = 0..=L/2`.
//!
//! Densities use the two-sided convention in which the mean over the full
//! `[-pi, pi)` grid equals the variance, so unit-variance white noise has a
//! flat spectrum at 1. Each segment has its mean removed before tapering.

mod window;

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

pub use window::Window;

use crate::error::{Error, Result};

/// Densities below this are treated as numerically zero.
pub const MIN_DENSITY: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralConfig {
    segment_length: usize,
    overlap_fraction: f64,
    window: Window,
}

impl Default for SpectralConfig {
    /// 512-sample Hann segments with 50% overlap.
    fn default() -> Self {
        Self {
            segment_length: 512,
            overlap_fraction: 0.5,
            window: Window::Hann,
        }
    }
}

impl SpectralConfig {
    pub fn new(segment_length: usize, overlap_fraction: f64, window: Window) -> Result<Self> {
        if segment_length < 16 || !segment_length.is_power_of_two() {
            return Err(Error::validation(format!(
                "segment length must be a power of two >= 16, got {segment_length}"
            )));
        }
        if !(0.0..1.0).contains(&overlap_fraction) {
            return Err(Error::validation(format!(
                "overlap fraction must be in [0, 1), got {overlap_fraction}"
            )));
        }
        Ok(Self {
            segment_length,
            overlap_fraction,
            window,
        })
    }

    pub fn segment_length(&self) -> usize {
        self.segment_length
    }

    pub fn overlap_fraction(&self) -> f64 {
        self.overlap_fraction
    }

    pub fn window(&self) -> Window {
        self.window
    }

    /// Samples between consecutive segment starts.
    pub fn hop(&self) -> usize {
        let overlap = (self.segment_length as f64 * self.overlap_fraction).floor() as usize;
        (self.segment_length - overlap).max(1)
    }

    /// Number of frequencies on `[0, pi]`.
    pub fn grid_size(&self) -> usize {
        self.segment_length / 2 + 1
    }

    /// Segments averaged for a series of length `n` (0 if `n` is too short).
    pub fn segment_count(&self, n: usize) -> usize {
        if n < self.segment_length {
            0
        } else {
            (n - self.segment_length) / self.hop() + 1
        }
    }

    /// Shortest series length that yields `k` averaged segments.
    pub fn length_for_segments(&self, k: usize) -> usize {
        self.segment_length + (k.max(1) - 1) * self.hop()
    }

    pub fn frequencies(&self) -> Vec<f64> {
        let l = self.segment_length as f64;
        (0..self.grid_size())
            .map(|k| 2.0 * PI * k as f64 / l)
            .collect()
    }
}

/// Mean over the full DFT grid of a one-sided spectrum, i.e. the average of
/// the symmetric extension to `[-pi, pi)`.
pub fn symmetric_grid_mean(values: &[f64]) -> f64 {
    let m = values.len();
    if m < 2 {
        return values.first().copied().unwrap_or(0.0);
    }
    let interior: f64 = values[1..m - 1].iter().sum();
    (values[0] + 2.0 * interior + values[m - 1]) / (2 * (m - 1)) as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumEstimate {
    pub frequencies: Vec<f64>,
    pub values: Vec<f64>,
    pub segments: usize,
}

impl SpectrumEstimate {
    pub fn grid_mean(&self) -> f64 {
        symmetric_grid_mean(&self.values)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossSpectrumEstimate {
    pub frequencies: Vec<f64>,
    pub values: Vec<Complex64>,
    pub segments: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoherenceSpectrum {
    pub frequencies: Vec<f64>,
    pub values: Vec<f64>,
    pub segments: usize,
}

impl CoherenceSpectrum {
    pub fn grid_mean(&self) -> f64 {
        symmetric_grid_mean(&self.values)
    }
}

/// Tapered one-sided DFTs of every Welch segment of one series, plus its
/// averaged auto-spectrum. Computing this once per series lets a distance
/// matrix evaluate all pairs without repeating FFTs.
#[derive(Debug, Clone)]
pub struct SegmentSpectra {
    cfg: SpectralConfig,
    len: usize,
    bins: Vec<Vec<Complex64>>,
    scale: f64,
    auto: Vec<f64>,
}

impl SegmentSpectra {
    pub fn compute(x: &[f64], cfg: &SpectralConfig) -> Result<Self> {
        let l = cfg.segment_length;
        let k = cfg.segment_count(x.len());
        if k == 0 {
            return Err(Error::InsufficientData(format!(
                "series of length {} is shorter than one segment ({l})",
                x.len()
            )));
        }
        let taper = cfg.window.coefficients(l);
        let power: f64 = taper.iter().map(|w| w * w).sum();
        let fft = FftPlanner::<f64>::new().plan_fft_forward(l);
        let mut buf = vec![Complex64::new(0.0, 0.0); l];
        let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        let hop = cfg.hop();
        let bins = (0..k)
            .map(|s| {
                let seg = &x[s * hop..s * hop + l];
                let m = seg.iter().sum::<f64>() / l as f64;
                for ((b, v), w) in buf.iter_mut().zip(seg).zip(&taper) {
                    *b = Complex64::new((v - m) * w, 0.0);
                }
                fft.process_with_scratch(&mut buf, &mut scratch);
                buf[..cfg.grid_size()].to_vec()
            })
            .collect();
        let mut out = Self {
            cfg: *cfg,
            len: x.len(),
            bins,
            scale: 1.0 / (k as f64 * power),
            auto: Vec::new(),
        };
        out.auto = out.cross_values(&out).iter().map(|c| c.re).collect();
        Ok(out)
    }

    pub fn segments(&self) -> usize {
        self.bins.len()
    }

    pub fn series_len(&self) -> usize {
        self.len
    }

    // Averaged conj(X) * Y. With `other == self` the imaginary parts cancel
    // exactly, so the auto-spectrum is the real part of this same sum.
    fn cross_values(&self, other: &SegmentSpectra) -> Vec<Complex64> {
        let mut acc = vec![Complex64::new(0.0, 0.0); self.cfg.grid_size()];
        for (a, b) in self.bins.iter().zip(&other.bins) {
            for ((c, xa), xb) in acc.iter_mut().zip(a).zip(b) {
                *c += xa.conj() * xb;
            }
        }
        acc.iter().map(|c| c * self.scale).collect()
    }

    fn check_compatible(&self, other: &SegmentSpectra) -> Result<()> {
        if self.len != other.len {
            return Err(Error::validation(format!(
                "series lengths differ: {} vs {}",
                self.len, other.len
            )));
        }
        if self.cfg != other.cfg {
            return Err(Error::validation("spectra computed with different configs"));
        }
        Ok(())
    }

    pub fn psd(&self) -> SpectrumEstimate {
        SpectrumEstimate {
            frequencies: self.cfg.frequencies(),
            values: self.auto.clone(),
            segments: self.segments(),
        }
    }

    pub fn csd(&self, other: &SegmentSpectra) -> Result<CrossSpectrumEstimate> {
        self.check_compatible(other)?;
        Ok(CrossSpectrumEstimate {
            frequencies: self.cfg.frequencies(),
            values: self.cross_values(other),
            segments: self.segments(),
        })
    }

    pub fn coherence(&self, other: &SegmentSpectra) -> Result<CoherenceSpectrum> {
        self.check_compatible(other)?;
        if self.segments() < 2 {
            return Err(Error::InsufficientData(format!(
                "coherence needs at least 2 averaged segments, series of length {} gives {}",
                self.len,
                self.segments()
            )));
        }
        let frequencies = self.cfg.frequencies();
        let cross = self.cross_values(other);
        let mut values = Vec::with_capacity(cross.len());
        for (k, c) in cross.iter().enumerate() {
            let denom = self.auto[k] * other.auto[k];
            if self.auto[k] < MIN_DENSITY || other.auto[k] < MIN_DENSITY {
                return Err(Error::NumericalDegeneracy(format!(
                    "spectral density vanishes at omega = {:.6} rad/sample (bin {k})",
                    frequencies[k]
                )));
            }
            let raw = c.norm_sqr() / denom;
            debug_assert!(raw <= 1.0 + 1e-9, "coherence {raw} exceeds 1 at bin {k}");
            values.push(raw.clamp(0.0, 1.0));
        }
        Ok(CoherenceSpectrum {
            frequencies,
            values,
            segments: self.segments(),
        })
    }
}

pub fn welch_psd(x: &[f64], cfg: &SpectralConfig) -> Result<SpectrumEstimate> {
    Ok(SegmentSpectra::compute(x, cfg)?.psd())
}

fn check_equal_len(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::validation(format!(
            "series lengths differ: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    Ok(())
}

/// Cross-spectrum `E[conj(X) Y]`: a delay of `y` by `d` samples shows up as
/// phase `-d * omega`.
pub fn welch_csd(x: &[f64], y: &[f64], cfg: &SpectralConfig) -> Result<CrossSpectrumEstimate> {
    check_equal_len(x, y)?;
    let sx = SegmentSpectra::compute(x, cfg)?;
    let sy = SegmentSpectra::compute(y, cfg)?;
    sx.csd(&sy)
}

/// `|csd|^2 / (psd_x psd_y)` per frequency, clamped into `[0, 1]`.
pub fn coherence(x: &[f64], y: &[f64], cfg: &SpectralConfig) -> Result<CoherenceSpectrum> {
    check_equal_len(x, y)?;
    let sx = SegmentSpectra::compute(x, cfg)?;
    let sy = SegmentSpectra::compute(y, cfg)?;
    sx.coherence(&sy)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn noise(n: usize, seed: u64) -> Vec<f64> {
        crate::synth::white_noise(n, seed)
    }

    #[test]
    fn config_validation() {
        assert!(SpectralConfig::new(8, 0.5, Window::Hann).is_err());
        assert!(SpectralConfig::new(100, 0.5, Window::Hann).is_err());
        assert!(SpectralConfig::new(64, 1.0, Window::Hann).is_err());
        assert!(SpectralConfig::new(64, -0.1, Window::Hann).is_err());
        let cfg = SpectralConfig::default();
        assert_eq!(cfg.hop(), 256);
        assert_eq!(cfg.grid_size(), 257);
        assert_eq!(cfg.segment_count(8192), 31);
        assert_eq!(cfg.segment_count(511), 0);
        assert_eq!(cfg.length_for_segments(15), 4096);
        let f = cfg.frequencies();
        assert_eq!(f[0], 0.0);
        assert!((f[256] - PI).abs() < 1e-15);
    }

    #[test]
    fn too_short_series() {
        let cfg = SpectralConfig::new(64, 0.5, Window::Hann).unwrap();
        assert!(matches!(
            welch_psd(&noise(63, 1), &cfg),
            Err(Error::InsufficientData(_))
        ));
        // One segment: coherence would be identically 1, so it is refused.
        let x = noise(64, 1);
        let y = noise(64, 2);
        assert!(matches!(
            coherence(&x, &y, &cfg),
            Err(Error::InsufficientData(_))
        ));
        assert!(matches!(
            welch_csd(&x, &y[..60], &cfg),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn csd_of_self_is_psd() {
        let cfg = SpectralConfig::new(64, 0.5, Window::Hann).unwrap();
        let x = noise(1000, 7);
        let psd = welch_psd(&x, &cfg).unwrap();
        let csd = welch_csd(&x, &x, &cfg).unwrap();
        for (p, c) in psd.values.iter().zip(&csd.values) {
            assert!((p - c.re).abs() <= 1e-12 && c.im.abs() <= 1e-12);
        }
    }

    #[test]
    fn hermitian_under_swap() {
        let cfg = SpectralConfig::new(128, 0.5, Window::Hann).unwrap();
        let x = noise(2000, 1);
        let y = noise(2000, 2);
        let xy = welch_csd(&x, &y, &cfg).unwrap();
        let yx = welch_csd(&y, &x, &cfg).unwrap();
        for (a, b) in xy.values.iter().zip(&yx.values) {
            assert!((a - b.conj()).norm() <= 1e-12);
        }
    }

    #[test]
    fn cosine_peaks_at_its_frequency() {
        let cfg = SpectralConfig::new(256, 0.5, Window::Hann).unwrap();
        let bin = 37;
        let w = 2.0 * PI * bin as f64 / 256.0;
        let x: Vec<f64> = (0..4096).map(|n| (w * n as f64).cos()).collect();
        let psd = welch_psd(&x, &cfg).unwrap();
        let argmax = psd
            .values
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        assert_eq!(argmax, bin);
        assert!((psd.frequencies[argmax] - w).abs() < 1e-12);
    }

    #[test]
    fn quadratic_homogeneity() {
        let cfg = SpectralConfig::new(64, 0.5, Window::Hann).unwrap();
        let x = noise(700, 3);
        let x2: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        let a = welch_psd(&x, &cfg).unwrap();
        let b = welch_psd(&x2, &cfg).unwrap();
        for (p, q) in a.values.iter().zip(&b.values) {
            assert!((4.0 * p - q).abs() <= 1e-12 * q.max(1.0));
        }
    }

    #[test]
    fn self_coherence_is_one() {
        let cfg = SpectralConfig::new(64, 0.5, Window::Hann).unwrap();
        let x = noise(1024, 5);
        let c = coherence(&x, &x, &cfg).unwrap();
        assert!(c.values.iter().all(|v| (v - 1.0).abs() <= 1e-12));
    }

    #[test]
    fn degenerate_density_names_frequency() {
        // Mean removal wipes out a constant series entirely.
        let cfg = SpectralConfig::new(16, 0.5, Window::Hann).unwrap();
        let x = vec![3.0; 64];
        let y = noise(64, 1);
        let err = coherence(&x, &y, &cfg).unwrap_err();
        assert!(matches!(err, Error::NumericalDegeneracy(_)));
        assert!(err.to_string().contains("omega = 0.000000"));
    }

    #[test]
    fn symmetric_mean_of_flat_spectrum() {
        assert_eq!(symmetric_grid_mean(&[2.0; 33]), 2.0);
        // [a, b, c] extends to [a, b, c, b]
        assert_eq!(symmetric_grid_mean(&[1.0, 2.0, 5.0]), 10.0 / 4.0);
    }
}
