//! Exact rejection samplers for the first-passage time `tau_L` of
//! `dX = b(X) dt + dB`, `X_0 = x < L`.
//!
//! Every sampler proposes a time `T` from a Brownian-type law and accepts
//! it when a unit-rate Poisson process on `[0, T] x [0, ceiling]` puts no
//! point below `t -> gamma(L - R_t)`, `R` being a 3-d Bessel bridge from 0
//! to `L - x`. Points are generated either in time order
//! ([`Mechanics::TimeOrdered`]) or in height order
//! ([`Mechanics::HeightOrdered`]); the bridge is only evaluated where a
//! point needs testing.
//!
//! Each rejection-loop iteration `i` draws its proposal and its Poisson
//! points from `streams.proposal.substream(i)`, in the order
//! `T, e_1, v_1, e_2, v_2, ..., e_n`. Time-ordered thinning reads the pair
//! `(e, v)` as the point `(E / ceiling, ceiling v)` and height-ordered
//! thinning as `(v T, E / T)`, `E` the running sum of the unit
//! exponentials. The second is the image of the first under
//! `(t, h) -> (h T / ceiling, t ceiling / T)`, so two samplers run on
//! equal streams consume the same underlying points.

use std::fmt;
use std::str::FromStr;

use crate::bridge::{bessel_norm, BridgeSkeleton, SequentialBridgeState};
use crate::error::{Error, Result};
use crate::model::{truncate_drift, BoundCertificate, DriftModel, GammaField};
use crate::rng::{
    draw_brownian_fpt, draw_inverse_gaussian, draw_truncated_brownian_fpt, RandomStream,
};

pub const DEFAULT_MAX_ITERATIONS: u64 = 100_000_000;

#[derive(Clone, Debug, PartialEq)]
pub enum Variant {
    A1,
    A2,
    A1Shift,
    A2Shift,
    /// Conditional sampler for `tau_L` given `tau_L <= t0`.
    A3,
    /// The inner variant run on the drift truncated below `-rho`.
    Rho {
        inner: Box<Variant>,
        rho: f64,
    },
}

impl Variant {
    pub fn mechanics(&self) -> Mechanics {
        match self {
            Variant::A2 | Variant::A2Shift => Mechanics::HeightOrdered,
            Variant::Rho { inner, .. } => inner.mechanics(),
            _ => Mechanics::TimeOrdered,
        }
    }

    pub fn is_shift(&self) -> bool {
        match self {
            Variant::A1Shift | Variant::A2Shift => true,
            Variant::Rho { inner, .. } => inner.is_shift(),
            _ => false,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Variant::A1 => write!(f, "a1"),
            Variant::A2 => write!(f, "a2"),
            Variant::A1Shift => write!(f, "a1-shift"),
            Variant::A2Shift => write!(f, "a2-shift"),
            Variant::A3 => write!(f, "a3"),
            Variant::Rho { inner, rho } => write!(f, "{inner}-rho{rho}"),
        }
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "a1" => Variant::A1,
            "a2" => Variant::A2,
            "a1-shift" => Variant::A1Shift,
            "a2-shift" => Variant::A2Shift,
            "a3" => Variant::A3,
            other => return Err(Error::Parameter(format!("unknown variant '{other}'"))),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mechanics {
    TimeOrdered,
    HeightOrdered,
}

#[derive(Clone, Debug)]
pub struct SamplerConfig {
    pub x: f64,
    pub level: f64,
    pub model: DriftModel,
    pub cert: BoundCertificate,
    pub variant: Variant,
    pub split_k: u32,
    pub t0: Option<f64>,
    pub max_iterations: u64,
}

impl SamplerConfig {
    pub fn new(
        model: DriftModel,
        x: f64,
        level: f64,
        cert: BoundCertificate,
        variant: Variant,
    ) -> Self {
        SamplerConfig {
            x,
            level,
            model,
            cert,
            variant,
            split_k: 1,
            t0: None,
            max_iterations: DEFAULT_MAX_ITERATIONS,
        }
    }

    pub fn with_split(mut self, k: u32) -> Self {
        self.split_k = k;
        self
    }

    pub fn with_t0(mut self, t0: f64) -> Self {
        self.t0 = Some(t0);
        self
    }

    pub fn with_max_iterations(mut self, n: u64) -> Self {
        self.max_iterations = n;
        self
    }

    pub fn with_variant(mut self, variant: Variant) -> Self {
        self.variant = variant;
        self
    }

    pub fn gap(&self) -> f64 {
        self.level - self.x
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !self.x.is_finite() || !self.level.is_finite() {
            return bad(format!(
                "x = {} and L = {} must be finite",
                self.x, self.level
            ));
        }
        if !(self.level > self.x) {
            return bad(format!(
                "level L = {} must exceed the start x = {}",
                self.level, self.x
            ));
        }
        if !(self.cert.kappa >= 0.0) || !self.cert.kappa.is_finite() {
            return bad(format!(
                "kappa = {} must be finite and >= 0",
                self.cert.kappa
            ));
        }
        if self.cert.gamma0 > self.cert.kappa {
            return bad("gamma0 exceeds kappa".into());
        }
        if self.split_k == 0 {
            return bad("split_k must be >= 1".into());
        }
        if self.max_iterations == 0 {
            return bad("max_iterations must be >= 1".into());
        }
        let variant = match &self.variant {
            Variant::Rho { inner, rho } => {
                if !(*rho > 0.0) || !rho.is_finite() {
                    return bad(format!("rho = {rho} must be finite and > 0"));
                }
                if matches!(**inner, Variant::A3 | Variant::Rho { .. }) {
                    return bad(format!(
                        "{inner} cannot be wrapped by the truncated-drift sampler"
                    ));
                }
                inner.as_ref()
            }
            v => v,
        };
        match variant {
            Variant::A3 => {
                match self.t0 {
                    Some(t0) if t0 > 0.0 && t0.is_finite() => {}
                    _ => return bad("a3 needs a finite t0 > 0".into()),
                }
                if !self.cert.m.is_finite() {
                    return bad("a3 needs a finite m".into());
                }
                if self.split_k != 1 {
                    return bad("a3 cannot be combined with space splitting".into());
                }
            }
            _ => {
                if self.cert.m != 0.0 {
                    return bad(format!(
                        "{variant} requires gamma >= 0 (m = 0), got m = {}",
                        self.cert.m
                    ));
                }
                if variant.is_shift() && !(self.cert.gamma0 > 0.0) {
                    return bad(format!("{variant} requires gamma0 > 0"));
                }
            }
        }
        Ok(())
    }
}

/// The streams one draw consumes: proposals and Poisson points, and bridge
/// Gaussians.
#[derive(Clone, Debug)]
pub struct DrawStreams {
    pub proposal: RandomStream,
    pub bridge: RandomStream,
}

impl DrawStreams {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        Self::from_base(&RandomStream::new(seed, stream_id))
    }

    pub fn from_base(base: &RandomStream) -> Self {
        DrawStreams {
            proposal: base.substream(0),
            bridge: base.substream(1),
        }
    }

    pub fn substream(&self, tag: u64) -> Self {
        DrawStreams {
            proposal: self.proposal.substream(tag),
            bridge: self.bridge.substream(tag),
        }
    }
}

/// Work counters for one draw: `total_points = iterations + sum(points)`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RunStats {
    pub iterations: u64,
    /// Poisson candidates examined per iteration, counting the one that
    /// overshoots the rectangle.
    pub points_per_iteration: Vec<u64>,
    pub total_points: u64,
    /// Scalar random variates consumed: proposal draws, point coordinates
    /// and bridge Gaussians.
    pub variates: u64,
}

impl RunStats {
    fn record(&mut self, points: u64) {
        self.iterations += 1;
        self.points_per_iteration.push(points);
        self.total_points += 1 + points;
    }

    fn merge(&mut self, other: RunStats) {
        self.iterations += other.iterations;
        self.total_points += other.total_points;
        self.variates += other.variates;
        self.points_per_iteration.extend(other.points_per_iteration);
    }

    pub fn is_consistent(&self) -> bool {
        self.iterations as usize == self.points_per_iteration.len()
            && self.total_points == self.iterations + self.points_per_iteration.iter().sum::<u64>()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FptDraw {
    pub value: f64,
    pub stats: RunStats,
}

/// `floor(gap sqrt(2 kappa)) + 1`.
pub fn optimal_split_count(gap: f64, kappa: f64) -> u32 {
    (gap * (2.0 * kappa).sqrt()).floor() as u32 + 1
}

#[derive(Clone, Copy, Debug)]
enum Proposal {
    Brownian,
    InverseGaussian { gamma0: f64 },
    Truncated { t0: f64 },
}

/// One fully specified rejection sampler.
struct Kernel {
    field: GammaField,
    kappa: f64,
    /// Subtracted from `gamma` (shift variants).
    shift: f64,
    /// `m t0`; `lift / T` is added to `gamma` (conditional sampler).
    lift: f64,
    mechanics: Mechanics,
    proposal: Proposal,
    max_iterations: u64,
}

/// Slack allowed when checking thinning-field values against the ceiling.
const BAND_SLACK: f64 = 1e-9;

impl Kernel {
    fn new(
        model: DriftModel,
        config: &SamplerConfig,
        mechanics: Mechanics,
        proposal: Proposal,
    ) -> Self {
        let cert = &config.cert;
        let (shift, lift) = match proposal {
            Proposal::InverseGaussian { gamma0 } => (gamma0, 0.0),
            Proposal::Truncated { t0 } => (0.0, cert.m * t0),
            Proposal::Brownian => (0.0, 0.0),
        };
        let field = if cert.m == 0.0 {
            GammaField::clamped(model)
        } else {
            GammaField::new(model)
        };
        Kernel {
            field,
            kappa: cert.kappa,
            shift,
            lift,
            mechanics,
            proposal,
            max_iterations: config.max_iterations,
        }
    }

    #[inline]
    fn ceiling(&self, horizon: f64) -> f64 {
        self.kappa - self.shift + self.lift / horizon
    }

    /// Thinning field at `y`, checked against `[0, ceiling]`.
    #[inline]
    fn field_at(&self, y: f64, horizon: f64, ceiling: f64) -> Result<f64> {
        let g = self.field.eval(y)?;
        let v = g - self.shift + self.lift / horizon;
        if v > ceiling + BAND_SLACK * (1.0 + ceiling) || v < -BAND_SLACK * (1.0 + ceiling) {
            return Err(Error::Model(format!(
                "gamma({y}) = {g} lies outside the certified band (kappa = {}, shift = {}, lift = {})",
                self.kappa,
                self.shift,
                self.lift / horizon
            )));
        }
        Ok(v)
    }

    fn propose(&self, stream: &mut RandomStream, gap: f64) -> Result<f64> {
        Ok(match self.proposal {
            Proposal::Brownian => draw_brownian_fpt(stream, gap)?.value,
            Proposal::InverseGaussian { gamma0 } => {
                draw_inverse_gaussian(stream, gap / (2.0 * gamma0).sqrt(), gap * gap)?.value
            }
            Proposal::Truncated { t0 } => draw_truncated_brownian_fpt(stream, gap, t0)?.value,
        })
    }

    /// Runs the rejection loop for a passage from `x` to `level`.
    /// `used` iterations count against the budget already.
    fn run(&self, x: f64, level: f64, streams: &mut DrawStreams, used: u64) -> Result<FptDraw> {
        let gap = level - x;
        let mut stats = RunStats::default();
        let bridge_start = streams.bridge.draws();
        loop {
            if used + stats.iterations >= self.max_iterations {
                stats.variates += streams.bridge.draws() - bridge_start;
                return Err(Error::Budget {
                    limit: self.max_iterations,
                    partial: Box::new(stats),
                });
            }
            let mut points = streams.proposal.substream(stats.iterations);
            let horizon = self.propose(&mut points, gap)?;
            let (accepted, n) = match self.mechanics {
                Mechanics::TimeOrdered => {
                    self.thin_time_ordered(horizon, gap, level, &mut points, &mut streams.bridge)?
                }
                Mechanics::HeightOrdered => {
                    self.thin_height_ordered(horizon, gap, level, &mut points, &mut streams.bridge)?
                }
            };
            stats.record(n);
            stats.variates += points.draws();
            if accepted {
                stats.variates += streams.bridge.draws() - bridge_start;
                return Ok(FptDraw {
                    value: horizon,
                    stats,
                });
            }
        }
    }

    /// Points ordered by time: exponential gaps of mean `1/ceiling`,
    /// uniform heights, bridge advanced sequentially.
    fn thin_time_ordered(
        &self,
        horizon: f64,
        gap: f64,
        level: f64,
        points: &mut RandomStream,
        bridge_rng: &mut RandomStream,
    ) -> Result<(bool, u64)> {
        let ceiling = self.ceiling(horizon);
        if !(ceiling > 0.0) {
            return Ok((true, 0));
        }
        let mut bridge = SequentialBridgeState::new(horizon);
        let mut t = points.unit_exponential() / ceiling;
        let mut n = 1;
        while t <= horizon {
            let height = ceiling * points.unit_uniform();
            let beta = if t > bridge.current_time {
                bridge.advance(t, bridge_rng)?
            } else {
                bridge.current_value
            };
            let r = bessel_norm(gap, horizon, t, &beta);
            if height <= self.field_at(level - r, horizon, ceiling)? {
                return Ok((false, n));
            }
            t += points.unit_exponential() / ceiling;
            n += 1;
        }
        Ok((true, n))
    }

    /// Points ordered by height: exponential gaps of mean `1/T`, uniform
    /// times, bridge refined by bisection.
    fn thin_height_ordered(
        &self,
        horizon: f64,
        gap: f64,
        level: f64,
        points: &mut RandomStream,
        bridge_rng: &mut RandomStream,
    ) -> Result<(bool, u64)> {
        let ceiling = self.ceiling(horizon);
        if !(ceiling > 0.0) {
            return Ok((true, 0));
        }
        let mut skeleton = BridgeSkeleton::new(horizon, gap);
        let mut height = points.unit_exponential() / horizon;
        let mut n = 1;
        while height <= ceiling {
            let u = horizon * points.unit_uniform();
            let beta = skeleton.bisect_insert(u, bridge_rng)?;
            let r = bessel_norm(gap, horizon, u, &beta);
            if height <= self.field_at(level - r, horizon, ceiling)? {
                return Ok((false, n));
            }
            height += points.unit_exponential() / horizon;
            n += 1;
        }
        Ok((true, n))
    }
}

fn check_gap(config: &SamplerConfig) -> Result<()> {
    if !(config.level > config.x) {
        return Err(Error::Config(format!(
            "level L = {} must exceed the start x = {}",
            config.level, config.x
        )));
    }
    Ok(())
}

/// Time-ordered sampler with a Brownian first-passage proposal. Requires
/// `0 <= gamma <= kappa` on `(-inf, L]`.
pub fn sample_a1(config: &SamplerConfig, streams: &mut DrawStreams) -> Result<FptDraw> {
    check_gap(config)?;
    Kernel::new(
        config.model.clone(),
        config,
        Mechanics::TimeOrdered,
        Proposal::Brownian,
    )
    .run(config.x, config.level, streams, 0)
}

/// Height-ordered sampler with a Brownian first-passage proposal; same
/// output law as [`sample_a1`].
pub fn sample_a2(config: &SamplerConfig, streams: &mut DrawStreams) -> Result<FptDraw> {
    check_gap(config)?;
    Kernel::new(
        config.model.clone(),
        config,
        Mechanics::HeightOrdered,
        Proposal::Brownian,
    )
    .run(config.x, config.level, streams, 0)
}

/// Thins against `gamma - gamma0` below `kappa - gamma0`, proposing from
/// `IG((L - x)/sqrt(2 gamma0), (L - x)^2)`. Mechanics follow the variant
/// (`a2-shift` is height-ordered, anything else time-ordered).
pub fn sample_shift(config: &SamplerConfig, streams: &mut DrawStreams) -> Result<FptDraw> {
    check_gap(config)?;
    shift_kernel(config.model.clone(), config)?.run(config.x, config.level, streams, 0)
}

fn shift_kernel(model: DriftModel, config: &SamplerConfig) -> Result<Kernel> {
    let gamma0 = config.cert.gamma0;
    if !(gamma0 > 0.0) {
        return Err(Error::Config(format!(
            "shift variants need gamma0 > 0, got {gamma0}"
        )));
    }
    Ok(Kernel::new(
        model,
        config,
        config.variant.mechanics(),
        Proposal::InverseGaussian { gamma0 },
    ))
}

/// Conditional sampler: returns a draw of `tau_L` given `tau_L <= t0`,
/// allowing `-m <= gamma <= kappa`.
pub fn sample_a3(config: &SamplerConfig, streams: &mut DrawStreams) -> Result<FptDraw> {
    check_gap(config)?;
    let t0 = config
        .t0
        .filter(|t| *t > 0.0 && t.is_finite())
        .ok_or_else(|| Error::Config("a3 needs a finite t0 > 0".into()))?;
    Kernel::new(
        config.model.clone(),
        config,
        Mechanics::TimeOrdered,
        Proposal::Truncated { t0 },
    )
    .run(config.x, config.level, streams, 0)
}

/// Runs the inner variant against the drift truncated below `-rho`. The
/// certificate must bound `gamma` of the truncated drift.
pub fn sample_rho(config: &SamplerConfig, streams: &mut DrawStreams) -> Result<FptDraw> {
    check_gap(config)?;
    kernel_for(config)?.run(config.x, config.level, streams, 0)
}

fn kernel_for(config: &SamplerConfig) -> Result<Kernel> {
    let (model, variant) = match &config.variant {
        Variant::Rho { inner, rho } => (truncate_drift(&config.model, *rho)?, inner.as_ref()),
        v => (config.model.clone(), v),
    };
    Ok(match variant {
        Variant::A1 => Kernel::new(model, config, Mechanics::TimeOrdered, Proposal::Brownian),
        Variant::A2 => Kernel::new(model, config, Mechanics::HeightOrdered, Proposal::Brownian),
        Variant::A1Shift | Variant::A2Shift => shift_kernel(model, config)?,
        Variant::A3 => {
            let t0 = config
                .t0
                .ok_or_else(|| Error::Config("a3 needs t0".into()))?;
            Kernel::new(
                model,
                config,
                Mechanics::TimeOrdered,
                Proposal::Truncated { t0 },
            )
        }
        Variant::Rho { .. } => return Err(Error::Config("nested truncation".into())),
    })
}

/// Sum of `k = split_k` independent passages over equal sub-intervals of
/// `[x, L]`, each drawn by the configured variant. Slice `i` consumes
/// `streams.substream(i)`; `k = 1` is the plain sampler on `streams`.
pub fn sample_split(config: &SamplerConfig, streams: &mut DrawStreams) -> Result<FptDraw> {
    check_gap(config)?;
    let kernel = kernel_for(config)?;
    let k = config.split_k.max(1);
    if k == 1 {
        return kernel.run(config.x, config.level, streams, 0);
    }
    let width = config.gap() / k as f64;
    let mut total = 0.0;
    let mut stats = RunStats::default();
    for i in 0..k {
        let start = config.x + i as f64 * width;
        let end = if i + 1 == k {
            config.level
        } else {
            config.x + (i + 1) as f64 * width
        };
        let mut sub = streams.substream(i as u64);
        match kernel.run(start, end, &mut sub, stats.iterations) {
            Ok(d) => {
                total += d.value;
                stats.merge(d.stats);
            }
            Err(Error::Budget { limit, partial }) => {
                stats.merge(*partial);
                return Err(Error::Budget {
                    limit,
                    partial: Box::new(stats),
                });
            }
            Err(e) => return Err(e),
        }
    }
    Ok(FptDraw {
        value: total,
        stats,
    })
}

/// Validates `config` and draws one sample with the configured variant.
pub fn sample(config: &SamplerConfig, streams: &mut DrawStreams) -> Result<FptDraw> {
    config.validate()?;
    sample_split(config, streams)
}
