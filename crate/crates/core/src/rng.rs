//! Reproducible random streams and the proposal laws used by the samplers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use crate::error::{Error, Result};

/// A seeded ChaCha8 stream. Equal `(seed, stream_id)` pairs give identical
/// sequences on every platform; distinct stream ids select disjoint
/// keystreams of the same key.
#[derive(Clone, Debug)]
pub struct RandomStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
    draws: u64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl RandomStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        RandomStream {
            seed,
            stream_id,
            rng,
            draws: 0,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Scalar variates drawn from this stream so far.
    pub fn draws(&self) -> u64 {
        self.draws
    }

    /// A child stream keyed by `(stream_id, tag)`. Does not depend on how
    /// much of `self` has been consumed.
    pub fn substream(&self, tag: u64) -> RandomStream {
        let id = splitmix64(self.stream_id ^ splitmix64(tag.wrapping_add(0x5851_f42d_4c95_7f2d)));
        RandomStream::new(self.seed, id)
    }

    #[inline]
    pub fn gaussian(&mut self) -> f64 {
        self.draws += 1;
        StandardNormal.sample(&mut self.rng)
    }

    #[inline]
    pub fn gaussian3(&mut self) -> [f64; 3] {
        [self.gaussian(), self.gaussian(), self.gaussian()]
    }

    /// Exponential with mean 1.
    #[inline]
    pub fn unit_exponential(&mut self) -> f64 {
        self.draws += 1;
        Exp1.sample(&mut self.rng)
    }

    /// Exponential parameterised by its mean (rate `1/mean`).
    pub fn exponential(&mut self, mean: f64) -> Result<f64> {
        if !(mean > 0.0) || !mean.is_finite() {
            return Err(Error::Parameter(format!(
                "exponential mean must be > 0, got {mean}"
            )));
        }
        Ok(mean * self.unit_exponential())
    }

    /// Uniform on `[0, 1)`.
    #[inline]
    pub fn unit_uniform(&mut self) -> f64 {
        self.draws += 1;
        self.rng.random::<f64>()
    }

    /// Uniform on `[0, hi)`.
    pub fn uniform(&mut self, hi: f64) -> Result<f64> {
        if !(hi > 0.0) || !hi.is_finite() {
            return Err(Error::Parameter(format!(
                "uniform upper bound must be > 0, got {hi}"
            )));
        }
        Ok(hi * self.unit_uniform())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ProposalLaw {
    /// `gap^2 / G^2`, the Brownian first-passage time.
    BrownianFpt {
        gap: f64,
    },
    InverseGaussian {
        mu: f64,
        lambda: f64,
    },
    /// `gap^2 / G^2` conditioned on being at most `t0`.
    TruncatedBrownianFpt {
        gap: f64,
        t0: f64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProposalDraw {
    pub value: f64,
    pub law: ProposalLaw,
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(Error::Parameter(format!(
            "{name} must be finite and > 0, got {v}"
        )));
    }
    Ok(())
}

/// First-passage time of a standard Brownian motion through a level `gap`
/// above its start.
pub fn draw_brownian_fpt(stream: &mut RandomStream, gap: f64) -> Result<ProposalDraw> {
    check_positive("gap", gap)?;
    loop {
        let g = stream.gaussian();
        if g != 0.0 {
            return Ok(ProposalDraw {
                value: gap * gap / (g * g),
                law: ProposalLaw::BrownianFpt { gap },
            });
        }
    }
}

/// One Michael–Schucany–Haas step from a normal `n` and a uniform `u`.
/// Returns the variate and whether the first root was kept.
pub fn michael_schucany_haas(n: f64, u: f64, mu: f64, lambda: f64) -> (f64, bool) {
    // x = mu + mu^2 n^2/(2 lambda) - mu/(2 lambda) sqrt(4 mu lambda n^2 + mu^2 n^4),
    // rewritten without the cancellation between the last two terms.
    let y = mu * n * n;
    let root = (4.0 * lambda * y + y * y).sqrt();
    let x = mu - 2.0 * mu * y / (root + y);
    if u <= mu / (mu + x) {
        (x, true)
    } else {
        (mu * mu / x, false)
    }
}

/// Inverse Gaussian `IG(mu, lambda)` variate.
pub fn draw_inverse_gaussian(
    stream: &mut RandomStream,
    mu: f64,
    lambda: f64,
) -> Result<ProposalDraw> {
    check_positive("mu", mu)?;
    check_positive("lambda", lambda)?;
    loop {
        let n = stream.gaussian();
        let u = stream.unit_uniform();
        let (x, _) = michael_schucany_haas(n, u, mu, lambda);
        // x underflows to 0 only for |n| beyond ~1e150.
        if x > 0.0 && x.is_finite() {
            return Ok(ProposalDraw {
                value: x,
                law: ProposalLaw::InverseGaussian { mu, lambda },
            });
        }
    }
}

/// Attempt cap for the truncated proposal; unreachable in practice.
pub const TRUNCATED_ATTEMPTS: u32 = 1_000_000;

/// Below this threshold on `gap^2/t0`, plain redraws of `G^2` accept often enough.
const TAIL_SWITCH: f64 = 1.0;

/// `gap^2 / G^2` conditioned on `gap^2 / G^2 <= t0`, i.e. `G^2` conditioned
/// on `G^2 >= a` with `a = gap^2 / t0`.
///
/// For `a > 1` the tail is sampled from the shifted exponential envelope
/// `a + Exp(rate 1/2)`, accepted with probability `sqrt(a / y)`; for smaller
/// `a` plain redraws of `G^2` are cheaper.
pub fn draw_truncated_brownian_fpt(
    stream: &mut RandomStream,
    gap: f64,
    t0: f64,
) -> Result<ProposalDraw> {
    check_positive("gap", gap)?;
    check_positive("t0", t0)?;
    let a = gap * gap / t0;
    let law = ProposalLaw::TruncatedBrownianFpt { gap, t0 };
    for _ in 0..TRUNCATED_ATTEMPTS {
        let y = if a <= TAIL_SWITCH {
            let g = stream.gaussian();
            let y = g * g;
            if y < a || y == 0.0 {
                continue;
            }
            y
        } else {
            let y = a + 2.0 * stream.unit_exponential();
            if stream.unit_uniform() * y.sqrt() > a.sqrt() {
                continue;
            }
            y
        };
        let value = (gap * gap / y).min(t0);
        return Ok(ProposalDraw { value, law });
    }
    Err(Error::Numeric(format!(
        "truncated proposal failed {TRUNCATED_ATTEMPTS} times (gap={gap}, t0={t0})"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mean_var(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
        (m, v)
    }

    #[test]
    fn exponential_mean_convention() {
        let mut s = RandomStream::new(1, 0);
        let xs: Vec<f64> = (0..1_000_000)
            .map(|_| s.exponential(2.0).unwrap())
            .collect();
        let (m, _) = mean_var(&xs);
        assert!((m - 2.0).abs() < 0.01, "{m}");
        let kappa = 4.0;
        let xs: Vec<f64> = (0..1_000_000)
            .map(|_| s.exponential(1.0 / kappa).unwrap())
            .collect();
        assert!((mean_var(&xs).0 - 0.25).abs() < 0.002);
    }

    #[test]
    fn gaussian_moments() {
        let mut s = RandomStream::new(2, 0);
        let xs: Vec<f64> = (0..1_000_000).map(|_| s.gaussian()).collect();
        let (_, v) = mean_var(&xs);
        assert!((v - 1.0).abs() < 0.01, "{v}");
        let sq: f64 = (0..1_000_000)
            .map(|_| s.gaussian3().iter().map(|g| g * g).sum::<f64>())
            .sum::<f64>()
            / 1e6;
        assert!((sq - 3.0).abs() < 0.02, "{sq}");
    }

    #[test]
    fn bad_parameters() {
        let mut s = RandomStream::new(0, 0);
        assert!(s.exponential(0.0).is_err());
        assert!(s.exponential(-1.0).is_err());
        assert!(s.uniform(0.0).is_err());
        assert!(draw_brownian_fpt(&mut s, 0.0).is_err());
        assert!(draw_inverse_gaussian(&mut s, 1.0, -1.0).is_err());
        assert!(draw_truncated_brownian_fpt(&mut s, 1.0, 0.0).is_err());
    }

    #[test]
    fn uniform_range() {
        let mut s = RandomStream::new(3, 9);
        for _ in 0..10_000 {
            let u = s.uniform(2.5).unwrap();
            assert!((0.0..2.5).contains(&u));
        }
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: Vec<f64> = {
            let mut s = RandomStream::new(42, 7);
            (0..100).map(|_| s.unit_uniform()).collect()
        };
        let b: Vec<f64> = {
            let mut s = RandomStream::new(42, 7);
            (0..100).map(|_| s.unit_uniform()).collect()
        };
        let c: Vec<f64> = {
            let mut s = RandomStream::new(42, 8);
            (0..100).map(|_| s.unit_uniform()).collect()
        };
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn substream_ignores_parent_position() {
        let mut s = RandomStream::new(5, 1);
        let before = s.substream(3).unit_uniform();
        s.unit_uniform();
        let after = s.substream(3).unit_uniform();
        assert_eq!(before, after);
        assert_ne!(s.substream(3).unit_uniform(), s.substream(4).unit_uniform());
    }

    #[test]
    fn brownian_fpt_median() {
        // median of 4/G^2 is 4 / q^2, q the 0.75 normal quantile.
        let mut s = RandomStream::new(11, 0);
        let mut xs: Vec<f64> = (0..200_000)
            .map(|_| draw_brownian_fpt(&mut s, 2.0).unwrap().value)
            .collect();
        assert!(xs.iter().all(|&x| x > 0.0));
        xs.sort_by(f64::total_cmp);
        let med = xs[xs.len() / 2];
        let q = 0.674_489_750_196_081_7_f64;
        assert!((med / (4.0 / (q * q)) - 1.0).abs() < 0.02, "{med}");
    }

    #[test]
    fn inverse_gaussian_moments() {
        let mut s = RandomStream::new(12, 0);
        let xs: Vec<f64> = (0..1_000_000)
            .map(|_| draw_inverse_gaussian(&mut s, 2.0, 4.0).unwrap().value)
            .collect();
        let (m, v) = mean_var(&xs);
        assert!((m - 2.0).abs() < 0.01, "{m}");
        assert!((v - 2.0).abs() < 0.05, "{v}");
    }

    #[test]
    fn msh_is_stable_for_large_normals() {
        let (x, _) = michael_schucany_haas(1e6, 0.0, 2.0, 4.0);
        assert!(x > 0.0 && x < 1e-10);
    }

    #[test]
    fn truncated_support() {
        let mut s = RandomStream::new(13, 0);
        for &(gap, t0) in &[(1.0, 1.0), (3.0, 0.5), (0.1, 100.0)] {
            for _ in 0..20_000 {
                let v = draw_truncated_brownian_fpt(&mut s, gap, t0).unwrap().value;
                assert!(v > 0.0 && v <= t0);
            }
        }
    }

    #[test]
    fn reproducible_proposals() {
        let run = || {
            let mut s = RandomStream::new(99, 3);
            (0..50)
                .map(|_| {
                    (
                        draw_brownian_fpt(&mut s, 1.5).unwrap(),
                        draw_inverse_gaussian(&mut s, 1.0, 2.0).unwrap(),
                        draw_truncated_brownian_fpt(&mut s, 2.0, 1.0).unwrap(),
                    )
                })
                .collect::<Vec<_>>()
        };
        let (a, b) = (run(), run());
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.0.value.to_bits(), y.0.value.to_bits());
            assert_eq!(x.1.value.to_bits(), y.1.value.to_bits());
            assert_eq!(x.2.value.to_bits(), y.2.value.to_bits());
        }
    }
}
