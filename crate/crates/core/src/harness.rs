//! Reference laws, goodness-of-fit statistics, batch sampling, the coupled
//! A1/A2 comparator and an Euler-Maruyama baseline.

use std::fmt;
use std::io::Write;
use std::path::Path;

use statrs::distribution::{ChiSquared, ContinuousCDF, Discrete, Poisson, StudentsT};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::model::{eval_beta, eval_scale_p, DriftModel};
use crate::rng::RandomStream;
use crate::sampler::{sample, sample_a1, sample_a2, DrawStreams, RunStats, SamplerConfig};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// `ln Phi(z)`, accurate far into the lower tail.
pub fn log_normal_cdf(z: f64) -> f64 {
    if z > -30.0 {
        return normal_cdf(z).ln();
    }
    let w = 1.0 / (z * z);
    -0.5 * z * z - (-z).ln() - LN_SQRT_2PI + (1.0 - w + 3.0 * w * w - 15.0 * w * w * w).ln()
}

/// Density of the first passage of `mu t + B_t` to `gap`.
pub fn ig_pdf(t: f64, gap: f64, mu_drift: f64) -> f64 {
    if !(t > 0.0) {
        return 0.0;
    }
    let d = gap - mu_drift * t;
    gap / (2.0 * std::f64::consts::PI * t * t * t).sqrt() * (-d * d / (2.0 * t)).exp()
}

/// `Phi((mu t - gap)/sqrt t) + exp(2 mu gap) Phi(-(mu t + gap)/sqrt t)`,
/// the second term formed in log space.
pub fn ig_cdf(t: f64, gap: f64, mu_drift: f64) -> f64 {
    if !(t > 0.0) {
        return 0.0;
    }
    let s = t.sqrt();
    let first = normal_cdf((mu_drift * t - gap) / s);
    let second = (2.0 * mu_drift * gap + log_normal_cdf(-(mu_drift * t + gap) / s)).exp();
    (first + second).min(1.0)
}

/// `P(tau <= t) = 2 Phi(-gap / sqrt t)` for driftless Brownian motion.
pub fn brownian_fpt_cdf(t: f64, gap: f64) -> f64 {
    if !(t > 0.0) {
        return 0.0;
    }
    erfc(gap / (2.0 * t).sqrt())
}

fn sorted(values: &[f64]) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::Contract("empty sample".into()));
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    Ok(v)
}

/// `sup |F_n - F|`, evaluated on both sides of every jump.
pub fn ks_statistic<F: Fn(f64) -> f64>(values: &[f64], cdf: F) -> Result<f64> {
    let v = sorted(values)?;
    let n = v.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in v.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    Ok(d)
}

/// Two-sample Kolmogorov distance.
pub fn two_sample_ks(a: &[f64], b: &[f64]) -> Result<f64> {
    let (a, b) = (sorted(a)?, sorted(b)?);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

/// Asymptotic two-sample critical value `c(alpha) sqrt((n + m)/(n m))`.
pub fn ks_critical(alpha: f64, n: usize, m: usize) -> f64 {
    let c = (-0.5 * (alpha / 2.0).ln()).sqrt();
    c * ((n + m) as f64 / (n as f64 * m as f64)).sqrt()
}

/// Identifies the configuration a sample set came from.
#[derive(Clone, Debug, PartialEq)]
pub struct Fingerprint {
    pub model: String,
    pub x: f64,
    pub level: f64,
    pub variant: String,
    pub seed: u64,
}

impl fmt::Display for Fingerprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "model={} x={} L={} variant={} seed={}",
            self.model, self.x, self.level, self.variant, self.seed
        )
    }
}

#[derive(Clone, Debug)]
pub struct SampleSet {
    pub values: Vec<f64>,
    pub stats: Vec<RunStats>,
    pub fingerprint: Fingerprint,
}

impl SampleSet {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn iterations(&self) -> Vec<u64> {
        self.stats.iter().map(|s| s.iterations).collect()
    }

    pub fn total_points(&self) -> Vec<u64> {
        self.stats.iter().map(|s| s.total_points).collect()
    }

    /// Writes `index,value,iterations,total_points`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "index,value,iterations,total_points")?;
        for (i, (v, s)) in self.values.iter().zip(&self.stats).enumerate() {
            writeln!(out, "{i},{v:.16e},{},{}", s.iterations, s.total_points)?;
        }
        Ok(())
    }
}

/// Runs `f(0..n)` on `workers` threads, each owning one contiguous block.
/// The result order is the index order whatever the worker count.
pub fn parallel_map<T, F>(n: u64, workers: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync,
{
    let workers = workers.max(1).min(n.max(1) as usize);
    if workers == 1 {
        return (0..n).map(&f).collect();
    }
    let block = n.div_ceil(workers as u64);
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..workers as u64)
            .map(|w| {
                let f = &f;
                let (lo, hi) = ((w * block).min(n), ((w + 1) * block).min(n));
                scope.spawn(move || (lo..hi).map(f).collect::<Vec<T>>())
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("worker panicked"))
            .collect()
    })
}

/// Draws `n` samples; draw `i` uses the streams `(seed, i)`.
pub fn sample_batch(
    config: &SamplerConfig,
    n: u64,
    seed: u64,
    workers: usize,
) -> Result<SampleSet> {
    sample_batch_from(config, n, seed, 0, workers)
}

/// Draws `n` samples on the stream ids `first_stream..first_stream + n`.
pub fn sample_batch_from(
    config: &SamplerConfig,
    n: u64,
    seed: u64,
    first_stream: u64,
    workers: usize,
) -> Result<SampleSet> {
    config.validate()?;
    let draws = parallel_map(n, workers, |i| {
        sample(config, &mut DrawStreams::new(seed, first_stream + i))
    });
    let mut values = Vec::with_capacity(n as usize);
    let mut stats = Vec::with_capacity(n as usize);
    for d in draws {
        let d = d?;
        values.push(d.value);
        stats.push(d.stats);
    }
    Ok(SampleSet {
        values,
        stats,
        fingerprint: Fingerprint {
            model: config.model.to_string(),
            x: config.x,
            level: config.level,
            variant: config.variant.to_string(),
            seed,
        },
    })
}

pub fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, (var / n).sqrt())
}

#[derive(Clone, Debug)]
pub struct IdentityReport {
    pub mean: f64,
    pub stderr: f64,
    /// Expected iteration count, see [`expected_iterations`].
    pub target: f64,
    pub z: f64,
    /// `k exp((L - x) sqrt(2 kappa) / k)`.
    pub bound: f64,
    pub within_bound: bool,
    pub pass: bool,
}

impl fmt::Display for IdentityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "mean I = {:.4} +/- {:.4}, target {:.4} (z = {:.2}), bound {:.4} ({})",
            self.mean,
            self.stderr,
            self.target,
            self.z,
            self.bound,
            if self.within_bound {
                "holds"
            } else {
                "violated"
            }
        )
    }
}

/// `sum_i exp(beta(l_i) - beta(l_{i-1}) - w sqrt(2 gamma0))` over `k` equal
/// slices `l_0 = x < ... < l_k = L` of width `w`; one slice gives
/// `exp(beta(L) - beta(x) - (L - x) sqrt(2 gamma0))`.
pub fn expected_iterations(
    model: &DriftModel,
    x: f64,
    level: f64,
    gamma0: f64,
    k: u32,
) -> Result<f64> {
    let k = k.max(1);
    let width = (level - x) / k as f64;
    let mut total = 0.0;
    let mut lo = eval_beta(model, x)?;
    for i in 1..=k {
        let end = if i == k { level } else { x + i as f64 * width };
        let hi = eval_beta(model, end)?;
        total += (hi - lo - width * (2.0 * gamma0).sqrt()).exp();
        lo = hi;
    }
    Ok(total)
}

/// Compares the mean iteration count with [`expected_iterations`] and with
/// the `kappa` bound, both at 3 standard errors.
pub fn iteration_identity_check(
    samples: &SampleSet,
    model: &DriftModel,
    x: f64,
    level: f64,
    gamma0: f64,
    kappa: f64,
    split_k: u32,
) -> Result<IdentityReport> {
    let iters: Vec<f64> = samples.stats.iter().map(|s| s.iterations as f64).collect();
    if iters.is_empty() {
        return Err(Error::Contract("empty sample".into()));
    }
    let (mean, stderr) = mean_and_stderr(&iters);
    let target = expected_iterations(model, x, level, gamma0, split_k)?;
    let z = if stderr > 0.0 {
        (mean - target) / stderr
    } else if (mean - target).abs() <= 1e-12 * target {
        0.0
    } else {
        f64::INFINITY
    };
    let k = split_k.max(1) as f64;
    let bound = k * ((level - x) * (2.0 * kappa).sqrt() / k).exp();
    let within_bound = mean <= bound + 3.0 * stderr;
    Ok(IdentityReport {
        mean,
        stderr,
        target,
        z,
        bound,
        within_bound,
        pass: z.abs() <= 3.0 && within_bound,
    })
}

#[derive(Clone, Debug)]
pub struct ChiSquareReport {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

impl ChiSquareReport {
    pub fn passes(&self, alpha: f64) -> bool {
        self.p_value >= alpha
    }
}

/// Pearson statistic over cells whose expected count is at least 5; the
/// remaining mass is pooled into one tail cell.
fn pearson(counts: &[u64], probs: &[f64], n: f64, fitted: usize) -> Result<ChiSquareReport> {
    let mut stat = 0.0;
    let mut cells = 0;
    let (mut obs_tail, mut p_tail) = (0u64, 0.0);
    let mut head_p = 0.0;
    let mut head_obs = 0;
    for (&c, &p) in counts.iter().zip(probs) {
        if p * n >= 5.0 {
            stat += (c as f64 - n * p).powi(2) / (n * p);
            cells += 1;
            head_p += p;
            head_obs += c;
        } else {
            obs_tail += c;
            p_tail += p;
        }
    }
    let total: u64 = counts.iter().sum();
    obs_tail += total - head_obs - obs_tail;
    p_tail = (1.0 - head_p).max(p_tail);
    if p_tail * n > 0.0 {
        stat += (obs_tail as f64 - n * p_tail).powi(2) / (n * p_tail);
        cells += 1;
    }
    if cells <= fitted + 1 {
        return Err(Error::Contract(
            "too few cells for a chi-square test".into(),
        ));
    }
    let dof = cells - 1 - fitted;
    let dist = ChiSquared::new(dof as f64).map_err(|e| Error::Numeric(e.to_string()))?;
    Ok(ChiSquareReport {
        statistic: stat,
        dof,
        p_value: 1.0 - dist.cdf(stat),
    })
}

/// Chi-square fit of iteration counts to `Geometric(1 / mean)` on `{1, 2, ...}`.
pub fn geometric_chi_square(iterations: &[u64]) -> Result<ChiSquareReport> {
    if iterations.is_empty() {
        return Err(Error::Contract("empty sample".into()));
    }
    let n = iterations.len() as f64;
    let mean = iterations.iter().sum::<u64>() as f64 / n;
    let p = 1.0 / mean;
    let max = *iterations.iter().max().unwrap() as usize;
    let mut counts = vec![0u64; max + 1];
    for &i in iterations {
        counts[i as usize] += 1;
    }
    let probs: Vec<f64> = (0..=max)
        .map(|k| {
            if k == 0 {
                0.0
            } else {
                p * (1.0 - p).powi(k as i32 - 1)
            }
        })
        .collect();
    pearson(&counts, &probs, n, 1)
}

#[derive(Clone, Debug)]
pub struct PoissonCountReport {
    pub time_ordered: ChiSquareReport,
    pub height_ordered: ChiSquareReport,
    pub mean_time_ordered: f64,
    pub mean_height_ordered: f64,
}

/// Reads `n` point sequences off the same streams the samplers use and
/// counts the points falling in `[0, horizon] x [0, ceiling]`, once through
/// the time-ordered reading and once through the height-ordered one. Both
/// counts should be `Poisson(ceiling * horizon)`.
pub fn poisson_count_check(
    ceiling: f64,
    horizon: f64,
    n: u64,
    seed: u64,
) -> Result<PoissonCountReport> {
    if !(ceiling > 0.0 && horizon > 0.0) {
        return Err(Error::Parameter("ceiling and horizon must be > 0".into()));
    }
    let mut by_time = Vec::with_capacity(n as usize);
    let mut by_height = Vec::with_capacity(n as usize);
    for i in 0..n {
        for (reading, out) in [(0, &mut by_time), (1, &mut by_height)] {
            let mut s = RandomStream::new(seed, i).substream(0);
            let mut e = s.unit_exponential();
            let mut k = 0u64;
            loop {
                let inside = if reading == 0 {
                    e / ceiling <= horizon
                } else {
                    e / horizon <= ceiling
                };
                if !inside {
                    break;
                }
                s.unit_uniform();
                k += 1;
                e += s.unit_exponential();
            }
            out.push(k);
        }
    }
    let law = Poisson::new(ceiling * horizon).map_err(|e| Error::Numeric(e.to_string()))?;
    let fit = |counts: &[u64]| -> Result<ChiSquareReport> {
        let max = *counts.iter().max().unwrap() as usize;
        let mut hist = vec![0u64; max + 1];
        for &c in counts {
            hist[c as usize] += 1;
        }
        let probs: Vec<f64> = (0..=max as u64).map(|k| law.pmf(k)).collect();
        pearson(&hist, &probs, counts.len() as f64, 0)
    };
    let mean = |v: &[u64]| v.iter().sum::<u64>() as f64 / v.len() as f64;
    Ok(PoissonCountReport {
        time_ordered: fit(&by_time)?,
        height_ordered: fit(&by_height)?,
        mean_time_ordered: mean(&by_time),
        mean_height_ordered: mean(&by_height),
    })
}

/// What a run's cost is measured in.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum CostUnit {
    /// `N_sigma = I + sum N_i`: proposals plus Poisson candidates.
    Points,
    /// Every scalar variate drawn, bridge Gaussians included.
    #[default]
    Variates,
}

impl CostUnit {
    pub fn of(&self, stats: &RunStats) -> u64 {
        match self {
            CostUnit::Points => stats.total_points,
            CostUnit::Variates => stats.variates,
        }
    }
}

impl fmt::Display for CostUnit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CostUnit::Points => "points",
            CostUnit::Variates => "variates",
        })
    }
}

impl std::str::FromStr for CostUnit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "points" => Ok(CostUnit::Points),
            "variates" => Ok(CostUnit::Variates),
            other => Err(Error::Parameter(format!("unknown cost unit '{other}'"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct DeltaReport {
    pub unit: CostUnit,
    pub mean_delta: f64,
    pub std_delta: f64,
    pub n: u64,
    pub t_statistic: f64,
    /// Two-sided p-value of the t statistic.
    pub p_value: f64,
    /// `mean_delta / mean N_1`.
    pub ratio: f64,
    pub mean_n1: f64,
    pub mean_n2: f64,
}

impl DeltaReport {
    pub const CSV_HEADER: &'static str = "n,mean_delta,std_delta,t_stat,ratio";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{:.16e},{:.16e},{:.16e},{:.16e}",
            self.n, self.mean_delta, self.std_delta, self.t_statistic, self.ratio
        )
    }
}

impl fmt::Display for DeltaReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "replicates:   {}", self.n)?;
        writeln!(f, "cost unit:    {}", self.unit)?;
        writeln!(f, "mean N1 (a1): {:.2}", self.mean_n1)?;
        writeln!(f, "mean N2 (a2): {:.2}", self.mean_n2)?;
        writeln!(f, "mean delta:   {:.2}", self.mean_delta)?;
        writeln!(f, "std delta:    {:.2}", self.std_delta)?;
        writeln!(
            f,
            "t statistic:  {:.3} (p = {:.3e})",
            self.t_statistic, self.p_value
        )?;
        write!(f, "ratio:        {:.4}", self.ratio)
    }
}

/// For each replicate runs A1 and A2 on equal streams, so that every
/// iteration of the two sees the same proposal and the same underlying
/// Poisson points (time- resp. height-ordered reading), and records
/// `Delta = N_2 - N_1`, the cost difference in `unit`.
pub fn delta_compare(
    config: &SamplerConfig,
    n: u64,
    seed: u64,
    workers: usize,
    unit: CostUnit,
) -> Result<DeltaReport> {
    if n < 2 {
        return Err(Error::Parameter("delta_compare needs n >= 2".into()));
    }
    config.validate()?;
    let pairs = parallel_map(n, workers, |i| -> Result<(f64, f64)> {
        let streams = DrawStreams::new(seed, i);
        let a1 = sample_a1(config, &mut streams.clone())?;
        let a2 = sample_a2(config, &mut streams.clone())?;
        Ok((unit.of(&a1.stats) as f64, unit.of(&a2.stats) as f64))
    });
    let mut n1 = Vec::with_capacity(n as usize);
    let mut deltas = Vec::with_capacity(n as usize);
    let mut n2_sum = 0.0;
    for p in pairs {
        let (a, b) = p?;
        n1.push(a);
        n2_sum += b;
        deltas.push(b - a);
    }
    let (mean_delta, se) = mean_and_stderr(&deltas);
    let std_delta = se * (n as f64).sqrt();
    let mean_n1 = n1.iter().sum::<f64>() / n as f64;
    let t_statistic = if se > 0.0 { mean_delta / se } else { 0.0 };
    let p_value = if se > 0.0 {
        let t =
            StudentsT::new(0.0, 1.0, (n - 1) as f64).map_err(|e| Error::Numeric(e.to_string()))?;
        2.0 * t.cdf(-t_statistic.abs())
    } else {
        1.0
    };
    Ok(DeltaReport {
        unit,
        mean_delta,
        std_delta,
        n,
        t_statistic,
        p_value,
        ratio: mean_delta / mean_n1,
        mean_n1,
        mean_n2: n2_sum / n as f64,
    })
}

/// Output of [`em_fpt_oracle`]: crossing times of the paths that crossed
/// before `t_max`.
#[derive(Clone, Debug)]
pub struct EmSample {
    pub crossed: Vec<f64>,
    pub censored: u64,
    pub t_max: f64,
}

impl EmSample {
    pub fn censored_fraction(&self) -> f64 {
        self.censored as f64 / (self.censored as f64 + self.crossed.len() as f64)
    }
}

/// Euler-Maruyama passage times with a Brownian-bridge crossing check on
/// every step: a step from `a` to `b < L` crosses with probability
/// `exp(-2 (L - a)(L - b) / step)`. A crossing is dated at the step
/// midpoint. Path `i` uses the stream `(seed, i)`.
#[allow(clippy::too_many_arguments)]
pub fn em_fpt_oracle(
    model: &DriftModel,
    x: f64,
    level: f64,
    t_max: f64,
    step: f64,
    n: u64,
    seed: u64,
    workers: usize,
) -> Result<EmSample> {
    if !(step > 0.0 && t_max > 0.0) {
        return Err(Error::Parameter(format!(
            "step = {step} and t_max = {t_max} must be > 0"
        )));
    }
    if !(level > x) {
        return Err(Error::Parameter("level must exceed the start".into()));
    }
    let max_steps = (t_max / step).ceil() as u64;
    let sd = step.sqrt();
    // Beyond this the crossing probability is below e^-40.
    let far = 20.0 * step;
    let paths = parallel_map(n, workers, |i| -> Result<Option<f64>> {
        let mut s = RandomStream::new(seed, i);
        let mut pos = x;
        for k in 0..max_steps {
            let drift = model.b(pos);
            if !drift.is_finite() {
                return Err(Error::Evaluation(pos));
            }
            let next = pos + drift * step + sd * s.gaussian();
            let crossed = next >= level || {
                let q = (level - pos) * (level - next);
                q < far && s.unit_uniform() < (-2.0 * q / step).exp()
            };
            if crossed {
                let t = (k as f64 + 0.5) * step;
                return Ok(if t <= t_max { Some(t) } else { None });
            }
            pos = next;
        }
        Ok(None)
    });
    let mut crossed = Vec::new();
    let mut censored = 0;
    for p in paths {
        match p? {
            Some(t) => crossed.push(t),
            None => censored += 1,
        }
    }
    Ok(EmSample {
        crossed,
        censored,
        t_max,
    })
}

/// `2 (p(L) - p(x)) / (p(L) - p(-rho))`, a bound on the Kolmogorov
/// distance between the passage times under `b` and under its truncation
/// below `-rho`.
pub fn rho_distance_bound(model: &DriftModel, x: f64, level: f64, rho: f64) -> Result<f64> {
    if !(rho > 0.0) {
        return Err(Error::Parameter(format!("rho must be > 0, got {rho}")));
    }
    if x == level {
        return Ok(0.0);
    }
    let pl = eval_scale_p(model, level)?;
    let px = eval_scale_p(model, x)?;
    let pr = eval_scale_p(model, -rho).map_err(|e| {
        Error::Numeric(format!(
            "{e}; p(-rho) is not representable, try a smaller rho"
        ))
    })?;
    let bound = 2.0 * (pl - px) / (pl - pr);
    if !bound.is_finite() {
        return Err(Error::Numeric(format!(
            "bound is not finite at rho = {rho}; try a smaller rho"
        )));
    }
    Ok(bound)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HistogramBin {
    pub left: f64,
    pub right: f64,
    pub density: f64,
}

/// Equal-width histogram over the sample range, normalised to unit mass.
/// A sample with a single distinct value gets one bin of width 1.
pub fn histogram(values: &[f64], bins: usize) -> Result<Vec<HistogramBin>> {
    if bins == 0 {
        return Err(Error::Parameter("bins must be >= 1".into()));
    }
    let v = sorted(values)?;
    let (mut lo, mut hi) = (v[0], v[v.len() - 1]);
    if hi <= lo {
        lo -= 0.5;
        hi += 0.5;
    }
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0u64; bins];
    for &x in &v {
        let k = (((x - lo) / width) as usize).min(bins - 1);
        counts[k] += 1;
    }
    let n = v.len() as f64;
    Ok(counts
        .iter()
        .enumerate()
        .map(|(k, &c)| HistogramBin {
            left: lo + k as f64 * width,
            right: if k + 1 == bins {
                hi
            } else {
                lo + (k + 1) as f64 * width
            },
            density: c as f64 / (n * width),
        })
        .collect())
}

pub fn write_histogram<W: Write>(bins: &[HistogramBin], mut out: W) -> Result<()> {
    writeln!(out, "bin_left,bin_right,density")?;
    for b in bins {
        writeln!(out, "{:.16e},{:.16e},{:.16e}", b.left, b.right, b.density)?;
    }
    Ok(())
}

/// Writes the histogram of `samples` as `bin_left,bin_right,density`.
pub fn histogram_export(samples: &SampleSet, bins: usize, path: &Path) -> Result<()> {
    let h = histogram(&samples.values, bins)?;
    let file = std::fs::File::create(path)?;
    write_histogram(&h, std::io::BufWriter::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::integrate;

    #[test]
    fn ig_pdf_normalised() {
        for mu in [0.5, 1.0, 3.0] {
            let mass = integrate(|t| ig_pdf(t, 2.0, mu), 1e-12, 400.0, 1e-11).unwrap();
            assert!((mass - 1.0).abs() < 1e-8, "mu={mu}: {mass}");
        }
    }

    #[test]
    fn ig_cdf_matches_pdf() {
        let h = 1e-5;
        let mut worst: f64 = 0.0;
        for k in 1..400 {
            let t = k as f64 * 0.02;
            let fd = (ig_cdf(t + h, 2.0, 1.0) - ig_cdf(t - h, 2.0, 1.0)) / (2.0 * h);
            worst = worst.max((fd - ig_pdf(t, 2.0, 1.0)).abs());
        }
        assert!(worst < 1e-6, "{worst}");
    }

    #[test]
    fn ig_cdf_limits() {
        assert_eq!(ig_cdf(0.0, 2.0, 1.0), 0.0);
        assert!(ig_cdf(1e-4, 2.0, 1.0) < 1e-12);
        assert!((ig_cdf(1e4, 2.0, 1.0) - 1.0).abs() < 1e-12);
        // large 2 mu gap: the log-space term must not overflow
        let c = ig_cdf(50.0, 50.0, 1.0);
        assert!(c.is_finite() && c > 0.4 && c < 0.6, "{c}");
    }

    #[test]
    fn log_normal_cdf_tail() {
        for z in [-29.0, -20.0, -5.0, 0.0, 3.0] {
            assert!((log_normal_cdf(z) - normal_cdf(z).ln()).abs() < 1e-9 * (1.0 + z * z));
        }
        let z: f64 = -31.0;
        let continuity = log_normal_cdf(z) - normal_cdf(z).ln();
        assert!(continuity.abs() < 1e-6, "{continuity}");
        assert!(log_normal_cdf(-1e3).is_finite());
    }

    #[test]
    fn brownian_cdf_values() {
        assert!((brownian_fpt_cdf(1.0, 1.0) - 2.0 * normal_cdf(-1.0)).abs() < 1e-15);
        assert_eq!(brownian_fpt_cdf(0.0, 1.0), 0.0);
    }

    #[test]
    fn ks_trivial_cases() {
        let a = [1.0, 2.0, 3.0];
        assert_eq!(two_sample_ks(&a, &a).unwrap(), 0.0);
        assert_eq!(two_sample_ks(&a, &[4.0, 5.0]).unwrap(), 1.0);
        assert!(ks_statistic(&[], |x| x).is_err());
        assert!(two_sample_ks(&[], &a).is_err());
        let d = ks_statistic(&[0.5], |x| x).unwrap();
        assert!((d - 0.5).abs() < 1e-15);
    }

    #[test]
    fn ks_two_sample_ties() {
        let a = [1.0, 1.0, 2.0, 2.0];
        let b = [1.0, 2.0];
        assert_eq!(two_sample_ks(&a, &b).unwrap(), 0.0);
    }

    #[test]
    fn ks_of_uniform_sample() {
        let mut s = RandomStream::new(11, 0);
        let n = 100_000;
        let v: Vec<f64> = (0..n).map(|_| s.unit_uniform()).collect();
        let d = ks_statistic(&v, |x| x.clamp(0.0, 1.0)).unwrap();
        assert!(d < 1.5 * 1.36 / (n as f64).sqrt(), "{d}");
    }

    #[test]
    fn parallel_map_is_partition_independent() {
        let f = |i: u64| RandomStream::new(3, i).unit_uniform();
        let one = parallel_map(103, 1, f);
        for w in [2, 4, 7, 200] {
            assert_eq!(parallel_map(103, w, f), one);
        }
        assert!(parallel_map(0, 4, f).is_empty());
    }

    #[test]
    fn histogram_cases() {
        let h = histogram(&[3.0], 1).unwrap();
        assert_eq!(h.len(), 1);
        assert!((h[0].density - 1.0 / (h[0].right - h[0].left)).abs() < 1e-15);
        assert!(histogram(&[1.0], 0).is_err());

        let mut s = RandomStream::new(12, 0);
        let v: Vec<f64> = (0..100_000).map(|_| s.unit_uniform()).collect();
        let h = histogram(&v, 10).unwrap();
        let mass: f64 = h.iter().map(|b| b.density * (b.right - b.left)).sum();
        assert!((mass - 1.0).abs() < 1e-12);
        assert!(h.iter().all(|b| (b.density - 1.0).abs() < 0.05));
    }

    #[test]
    fn histogram_csv() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("h.csv");
        let set = SampleSet {
            values: vec![1.0, 2.0, 3.0],
            stats: vec![RunStats::default(); 3],
            fingerprint: Fingerprint {
                model: "constant:mu=1".into(),
                x: 0.0,
                level: 1.0,
                variant: "a1".into(),
                seed: 0,
            },
        };
        histogram_export(&set, 2, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("bin_left,bin_right,density\n"));
        assert_eq!(text.lines().count(), 3);
        assert!(histogram_export(&set, 2, &dir.path().join("missing/h.csv")).is_err());
    }

    #[test]
    fn rho_bound_constant_drift() {
        let m = DriftModel::Constant { mu: 1.0 };
        let e = std::f64::consts::E;
        let want = 2.0 * (1.0 - 1.0 / e) / (e.powi(5) - 1.0 / e);
        let got = rho_distance_bound(&m, 0.0, 1.0, 5.0).unwrap();
        assert!((got - want).abs() < 1e-9 * want, "{got} vs {want}");
        assert!((want - 0.00854).abs() < 1e-5);
        assert_eq!(rho_distance_bound(&m, 1.0, 1.0, 5.0).unwrap(), 0.0);
        assert!(rho_distance_bound(&m, 0.0, 1.0, 30.0).unwrap() < 1e-11);
        assert!(rho_distance_bound(&m, 0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn chi_square_detects_wrong_law() {
        let mut s = RandomStream::new(13, 0);
        let geo: Vec<u64> = (0..20_000)
            .map(|_| {
                let mut k = 1;
                while s.unit_uniform() > 0.3 {
                    k += 1;
                }
                k
            })
            .collect();
        assert!(geometric_chi_square(&geo).unwrap().passes(0.001));
        let fixed: Vec<u64> = (0..20_000).map(|i| 2 + i % 3).collect();
        assert!(!geometric_chi_square(&fixed).unwrap().passes(0.01));
    }

    #[test]
    fn poisson_counts_both_readings() {
        let r = poisson_count_check(5.0, 0.8, 20_000, 14).unwrap();
        assert!(r.time_ordered.passes(0.001), "{:?}", r.time_ordered);
        assert!(r.height_ordered.passes(0.001), "{:?}", r.height_ordered);
        assert!((r.mean_time_ordered - 4.0).abs() < 0.1);
    }
}
