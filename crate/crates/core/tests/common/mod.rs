#![allow(dead_code)]

use exact_fpt::harness::sample_batch;
use exact_fpt::{BoundCertificate, DriftModel, SamplerConfig, Variant};
use statrs::distribution::{ContinuousCDF, Normal};

pub fn phi(z: f64) -> f64 {
    Normal::new(0.0, 1.0).unwrap().cdf(z)
}

/// Passage time of `mu t + B_t` to `gap`, `mu > 0`.
pub fn drifted_bm_cdf(t: f64, gap: f64, mu: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    let s = t.sqrt();
    phi((mu * t - gap) / s) + (2.0 * mu * gap).exp() * phi(-(mu * t + gap) / s)
}

/// Reflection principle: `P(tau <= t) = 2 Phi(-gap / sqrt t)`.
pub fn bm_cdf(t: f64, gap: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    2.0 * phi(-gap / t.sqrt())
}

pub fn config(
    model: DriftModel,
    x: f64,
    level: f64,
    kappa: f64,
    variant: Variant,
) -> SamplerConfig {
    SamplerConfig::new(
        model,
        x,
        level,
        BoundCertificate::upper(kappa).unwrap(),
        variant,
    )
}

pub fn values(cfg: &SamplerConfig, n: u64, seed: u64) -> Vec<f64> {
    sample_batch(cfg, n, seed, 1).unwrap().values
}

pub fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}
