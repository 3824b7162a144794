//! Statistical bands, each checked over 100 fixed seeds.

use cohtree::metrics::{coherence_distance, pearson_correlation};
use cohtree::series::standardize;
use cohtree::spectral::{coherence, welch_psd, SpectralConfig, Window};
use cohtree::synth::{ar1, factor_market, white_noise, FactorMarketSpec};

const SEEDS: u64 = 100;

#[test]
fn white_noise_psd_is_flat() {
    let cfg = SpectralConfig::default();
    for seed in 0..SEEDS {
        let p = welch_psd(&white_noise(8192, seed), &cfg).unwrap();
        let mean = p.grid_mean();
        assert!(
            (0.95..=1.05).contains(&mean),
            "seed {seed}: grid mean {mean}"
        );
        // Per-bin spread at 31 segments is about 0.19, so the narrow band
        // holds for most bins rather than all of them.
        let interior = &p.values[1..p.values.len() - 1];
        let inside = interior.iter().filter(|v| (0.7..=1.3).contains(*v)).count();
        assert!(
            inside as f64 >= 0.8 * interior.len() as f64,
            "seed {seed}: {inside} bins in band"
        );
        assert!(
            interior.iter().all(|v| (0.3..=2.2).contains(v)),
            "seed {seed}"
        );
        // Mean removal suppresses the zero-frequency bin.
        assert!(p.values[0] < 1.0);
    }
}

#[test]
fn standardized_series_have_unit_power() {
    let cfg = SpectralConfig::default();
    for seed in 0..SEEDS {
        for (len, phi) in [(4096, 0.0), (8192, 0.3), (5000, -0.2)] {
            let z = standardize(&ar1(len, phi, seed).unwrap()).unwrap();
            let m = welch_psd(&z, &cfg).unwrap().grid_mean();
            assert!(
                (0.9..=1.1).contains(&m),
                "seed {seed} len {len} phi {phi}: {m}"
            );
        }
    }
}

#[test]
fn white_noise_autocorrelation_is_small() {
    for seed in 0..SEEDS {
        let x = white_noise(4096, seed);
        let n = x.len();
        let m = x.iter().sum::<f64>() / n as f64;
        let var: f64 = x.iter().map(|v| (v - m).powi(2)).sum();
        for tau in 1..=10 {
            let r: f64 = (0..n - tau)
                .map(|i| (x[i] - m) * (x[i + tau] - m))
                .sum::<f64>()
                / var;
            assert!(
                r.abs() < 4.0 / (n as f64).sqrt(),
                "seed {seed} lag {tau}: {r}"
            );
        }
    }
}

#[test]
fn independent_noises_are_uncorrelated() {
    for seed in 0..SEEDS {
        let rho = pearson_correlation(&white_noise(4096, seed), &white_noise(4096, seed + 10_000))
            .unwrap();
        assert!(rho.abs() < 0.08, "seed {seed}: {rho}");
    }
}

#[test]
fn coherence_bias_tracks_segment_count() {
    let cfg = SpectralConfig::new(512, 0.5, Window::Hann).unwrap();
    for k in [8usize, 15, 31] {
        let n = cfg.length_for_segments(k);
        let mut total = 0.0;
        for seed in 0..SEEDS {
            let c = coherence(
                &white_noise(n, 2 * seed),
                &white_noise(n, 2 * seed + 1),
                &cfg,
            )
            .unwrap();
            assert_eq!(c.segments, k);
            total += c.grid_mean();
        }
        let ratio = total / SEEDS as f64 * k as f64;
        assert!(
            (0.9..=1.2).contains(&ratio),
            "K={k}: mean / (1/K) = {ratio}"
        );
    }
}

#[test]
fn separate_groups_are_far_apart() {
    let cfg = SpectralConfig::default();
    let spec = FactorMarketSpec::uniform(2, 2, 0.9, 1);
    for seed in 0..SEEDS {
        let s = factor_market(&spec, 8192, seed).unwrap();
        // s[0..2] group A, s[2..4] group B
        let across = coherence_distance(&s[0].values, &s[2].values, &cfg).unwrap();
        let within = coherence_distance(&s[0].values, &s[1].values, &cfg).unwrap();
        assert!(across >= 0.9, "seed {seed}: {across}");
        assert!(within < across);
    }
}
