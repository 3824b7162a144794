//! Seeded generators with known ground truth.
//!
//! All generators draw from ChaCha8 seeded with a 64-bit seed and are pure
//! functions of `(spec, seed)`. Tests built on them check statistical bands,
//! never exact sample values.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::series::standardize;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn normals(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

/// Independent standard normal samples.
pub fn white_noise(length: usize, seed: u64) -> Vec<f64> {
    normals(&mut rng(seed), length)
}

/// Stationary AR(1) `x[t] = phi x[t-1] + e[t]` with unit-variance innovations,
/// started from the stationary distribution.
pub fn ar1(length: usize, phi: f64, seed: u64) -> Result<Vec<f64>> {
    if !(phi.abs() < 1.0) {
        return Err(Error::validation(format!(
            "AR coefficient must satisfy |phi| < 1, got {phi}"
        )));
    }
    Ok(ar1_from(&mut rng(seed), length, phi))
}

fn ar1_from(rng: &mut ChaCha8Rng, length: usize, phi: f64) -> Vec<f64> {
    let e = normals(rng, length);
    let mut out = Vec::with_capacity(length);
    let mut prev = 0.0;
    for (t, v) in e.into_iter().enumerate() {
        let x = if t == 0 {
            v / (1.0 - phi * phi).sqrt()
        } else {
            phi * prev + v
        };
        out.push(x);
        prev = x;
    }
    out
}

/// Circular delay: `out[t] = base[(t - d) mod n]`.
pub fn delayed_copy(base: &[f64], d: usize) -> Result<Vec<f64>> {
    let n = base.len();
    if d >= n {
        return Err(Error::validation(format!(
            "delay {d} out of range for length {n}"
        )));
    }
    Ok((0..n).map(|t| base[(t + n - d) % n]).collect())
}

/// Time-series driver of a factor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Driver {
    White,
    Ar1(f64),
}

/// One planted cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupSpec {
    pub name: String,
    pub size: usize,
    /// Factor loading in `(0, 1]`.
    pub loading: f64,
    /// Member `k` (0-based) sees the factor delayed by `k * lag` samples.
    pub lag: usize,
    pub driver: Driver,
}

impl GroupSpec {
    pub fn new(name: impl Into<String>, size: usize, loading: f64, lag: usize) -> Self {
        Self {
            name: name.into(),
            size,
            loading,
            lag,
            driver: Driver::White,
        }
    }
}

/// Planted-cluster market: member `k` of group `g` is
/// `loading_g * factor_g(t - k * lag_g) + noise * eps(t)`, then standardized.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorMarketSpec {
    pub groups: Vec<GroupSpec>,
    /// Idiosyncratic noise level, `>= 0`.
    pub noise: f64,
}

impl FactorMarketSpec {
    /// `groups` equal clusters named `A`, `B`, ..., with noise chosen so each
    /// raw series has unit variance.
    pub fn uniform(groups: usize, size: usize, loading: f64, lag: usize) -> Self {
        Self {
            groups: (0..groups)
                .map(|g| GroupSpec::new(group_name(g), size, loading, lag))
                .collect(),
            noise: (1.0 - loading * loading).max(0.0).sqrt(),
        }
    }

    fn validate(&self, length: usize) -> Result<()> {
        if self.groups.is_empty() {
            return Err(Error::validation("factor market needs at least one group"));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(Error::validation(format!(
                "noise level must be >= 0, got {}",
                self.noise
            )));
        }
        let mut names = std::collections::BTreeSet::new();
        for g in &self.groups {
            if !names.insert(g.name.as_str()) {
                return Err(Error::validation(format!(
                    "duplicate group name `{}`",
                    g.name
                )));
            }
            if g.size < 2 {
                return Err(Error::validation(format!(
                    "group `{}` has fewer than 2 members",
                    g.name
                )));
            }
            if !(g.loading > 0.0 && g.loading <= 1.0) {
                return Err(Error::validation(format!(
                    "group `{}`: loading must be in (0, 1], got {}",
                    g.name, g.loading
                )));
            }
            if g.lag * (g.size - 1) >= length {
                return Err(Error::validation(format!(
                    "group `{}`: largest member lag {} does not fit length {length}",
                    g.name,
                    g.lag * (g.size - 1)
                )));
            }
            if let Driver::Ar1(phi) = g.driver {
                if !(phi.abs() < 1.0) {
                    return Err(Error::validation(format!(
                        "group `{}`: AR coefficient must satisfy |phi| < 1, got {phi}",
                        g.name
                    )));
                }
            }
        }
        Ok(())
    }
}

/// `A`..`Z`, then `G26`, `G27`, ...
pub fn group_name(g: usize) -> String {
    if g < 26 {
        ((b'A' + g as u8) as char).to_string()
    } else {
        format!("G{g}")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSeries {
    pub symbol: String,
    pub sector: String,
    pub industry: String,
    pub values: Vec<f64>,
}

pub fn factor_market(
    spec: &FactorMarketSpec,
    length: usize,
    seed: u64,
) -> Result<Vec<LabeledSeries>> {
    if length < 2 {
        return Err(Error::validation(format!(
            "length must be >= 2, got {length}"
        )));
    }
    spec.validate(length)?;
    let mut rng = rng(seed);
    let factors: Vec<Vec<f64>> = spec
        .groups
        .iter()
        .map(|g| match g.driver {
            Driver::White => normals(&mut rng, length),
            Driver::Ar1(phi) => ar1_from(&mut rng, length, phi),
        })
        .collect();
    let mut out = Vec::new();
    for (g, factor) in spec.groups.iter().zip(&factors) {
        for k in 0..g.size {
            let shifted = delayed_copy(factor, k * g.lag)?;
            let eps = normals(&mut rng, length);
            let raw: Vec<f64> = shifted
                .iter()
                .zip(&eps)
                .map(|(f, e)| g.loading * f + spec.noise * e)
                .collect();
            out.push(LabeledSeries {
                symbol: format!("{}{}", g.name, k + 1),
                sector: g.name.clone(),
                industry: g.name.clone(),
                values: standardize(&raw)?,
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub enum GeneratorKind {
    White,
    /// A white base `X` and its circularly delayed copy `XD`.
    DelayedCopy {
        delay: usize,
    },
    Ar1 {
        phi: f64,
    },
    FactorMarket(FactorMarketSpec),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorSpec {
    pub kind: GeneratorKind,
    pub length: usize,
    pub seed: u64,
}

impl GeneratorSpec {
    pub fn generate(&self) -> Result<Vec<LabeledSeries>> {
        if self.length < 2 {
            return Err(Error::validation(format!(
                "length must be >= 2, got {}",
                self.length
            )));
        }
        let single = |symbol: &str, values: Vec<f64>| LabeledSeries {
            symbol: symbol.to_string(),
            sector: "UNKNOWN".to_string(),
            industry: "UNKNOWN".to_string(),
            values,
        };
        match &self.kind {
            GeneratorKind::White => Ok(vec![single("X", white_noise(self.length, self.seed))]),
            GeneratorKind::DelayedCopy { delay } => {
                let base = white_noise(self.length, self.seed);
                let copy = delayed_copy(&base, *delay)?;
                Ok(vec![single("X", base), single("XD", copy)])
            }
            GeneratorKind::Ar1 { phi } => Ok(vec![single("X", ar1(self.length, *phi, self.seed)?)]),
            GeneratorKind::FactorMarket(spec) => factor_market(spec, self.length, self.seed),
        }
    }
}
