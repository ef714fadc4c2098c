//! Drift models for unit-diffusion SDEs `dX = b(X) dt + dB` and the scalar
//! fields derived from them.
//!
//! ```text
//! beta(y) = int_0^y b(u) du
//! p(y)    = int_0^y exp(-beta(u)) du
//! gamma   = (b^2 + b') / 2
//! ```
//!
//! `gamma` is the quantity the rejection samplers thin against; `beta` fixes
//! the expected number of iterations and `p` decides recurrence.

use std::f64::consts::{E, PI};
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::quad;

/// Absolute tolerance used for quadrature of `b`.
pub const BETA_TOL: f64 = 1e-10;
/// Relative tolerance used for the scale function.
pub const SCALE_TOL: f64 = 1e-10;
/// Negative `gamma` values above this are floating-point noise when a
/// certificate claims `gamma >= 0`.
pub const GAMMA_CLAMP: f64 = -1e-12;

type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A user-supplied drift.
#[derive(Clone)]
pub struct CustomDrift {
    pub name: String,
    pub b: RealFn,
    pub b_prime: RealFn,
    pub beta_closed: Option<RealFn>,
}

/// Catalog of drifts with their analytic derivative and antiderivative.
#[derive(Clone)]
pub enum DriftModel {
    /// `b(x) = mu`
    Constant {
        mu: f64,
    },
    /// `b(x) = offset + sin x`
    Sine {
        offset: f64,
    },
    /// `b(x) = base + arctan(shift - x)`
    ArctanShift {
        base: f64,
        shift: f64,
    },
    /// `b(x) = -arctan x`
    NegArctan,
    /// `b(x) = -alpha x + beta`
    OrnsteinUhlenbeck {
        alpha: f64,
        beta: f64,
    },
    /// The inner drift on `[-rho, inf)`, continued below `-rho` by
    /// `b(-rho) + b'(-rho) (x + rho) e^(x + rho)`.
    Truncated {
        inner: Arc<DriftModel>,
        rho: f64,
    },
    Custom(CustomDrift),
}

impl fmt::Debug for DriftModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DriftModel({self})")
    }
}

impl fmt::Display for DriftModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DriftModel::Constant { mu } => write!(f, "constant:mu={mu}"),
            DriftModel::Sine { offset } => write!(f, "sine:offset={offset}"),
            DriftModel::ArctanShift { base, shift } => {
                write!(f, "arctan-shift:base={base},shift={shift}")
            }
            DriftModel::NegArctan => write!(f, "neg-arctan"),
            DriftModel::OrnsteinUhlenbeck { alpha, beta } => {
                write!(f, "ou:alpha={alpha},beta={beta}")
            }
            DriftModel::Truncated { inner, rho } => write!(f, "truncated[{inner}]:rho={rho}"),
            DriftModel::Custom(c) => write!(f, "custom:{}", c.name),
        }
    }
}

/// `w arctan w - ln(1 + w^2) / 2`, an antiderivative of `arctan`.
fn arctan_antiderivative(w: f64) -> f64 {
    w * w.atan() - 0.5 * w.mul_add(w, 1.0).ln()
}

impl DriftModel {
    /// Parses `kind[:key=value,...]`, e.g. `ou:alpha=0.3,beta=1` or `sine`.
    pub fn parse(spec: &str) -> Result<Self> {
        let (kind, rest) = match spec.split_once(':') {
            Some((k, r)) => (k.trim(), r.trim()),
            None => (spec.trim(), ""),
        };
        let mut params: Vec<(String, f64)> = Vec::new();
        for item in rest.split(',').filter(|s| !s.trim().is_empty()) {
            let (key, value) = item.split_once('=').ok_or_else(|| {
                Error::Parameter(format!("expected key=value in model spec, got '{item}'"))
            })?;
            let value: f64 = value
                .trim()
                .parse()
                .map_err(|_| Error::Parameter(format!("'{}' is not a number", value.trim())))?;
            params.push((key.trim().to_string(), value));
        }
        let allowed: &[&str] = match kind {
            "constant" => &["mu"],
            "sine" => &["offset"],
            "arctan-shift" => &["base", "shift"],
            "neg-arctan" => &[],
            "ou" => &["alpha", "beta"],
            other => return Err(Error::Parameter(format!("unknown drift kind '{other}'"))),
        };
        if let Some((k, _)) = params.iter().find(|(k, _)| !allowed.contains(&k.as_str())) {
            return Err(Error::Parameter(format!(
                "unknown parameter '{k}' for '{kind}'"
            )));
        }
        let get = |name: &str, default: Option<f64>| -> Result<f64> {
            params
                .iter()
                .find(|(k, _)| k == name)
                .map(|(_, v)| *v)
                .or(default)
                .ok_or_else(|| Error::Parameter(format!("'{kind}' needs parameter '{name}'")))
        };
        Ok(match kind {
            "constant" => DriftModel::Constant {
                mu: get("mu", None)?,
            },
            "sine" => DriftModel::Sine {
                offset: get("offset", Some(2.0))?,
            },
            "arctan-shift" => DriftModel::ArctanShift {
                base: get("base", Some(1.0))?,
                shift: get("shift", Some(1.0))?,
            },
            "neg-arctan" => DriftModel::NegArctan,
            _ => DriftModel::OrnsteinUhlenbeck {
                alpha: get("alpha", None)?,
                beta: get("beta", None)?,
            },
        })
    }

    pub fn custom<B, D>(name: &str, b: B, b_prime: D) -> Self
    where
        B: Fn(f64) -> f64 + Send + Sync + 'static,
        D: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        DriftModel::Custom(CustomDrift {
            name: name.to_string(),
            b: Arc::new(b),
            b_prime: Arc::new(b_prime),
            beta_closed: None,
        })
    }

    /// Attaches a closed-form antiderivative to a custom drift.
    pub fn with_beta<F>(self, beta: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        match self {
            DriftModel::Custom(mut c) => {
                c.beta_closed = Some(Arc::new(beta));
                DriftModel::Custom(c)
            }
            other => other,
        }
    }

    #[inline]
    pub fn b(&self, y: f64) -> f64 {
        match self {
            DriftModel::Constant { mu } => *mu,
            DriftModel::Sine { offset } => offset + y.sin(),
            DriftModel::ArctanShift { base, shift } => base + (shift - y).atan(),
            DriftModel::NegArctan => -y.atan(),
            DriftModel::OrnsteinUhlenbeck { alpha, beta } => -alpha * y + beta,
            DriftModel::Truncated { inner, rho } => {
                if y >= -rho {
                    inner.b(y)
                } else {
                    let s = y + rho;
                    inner.b(-rho) + inner.b_prime(-rho) * s * s.exp()
                }
            }
            DriftModel::Custom(c) => (c.b)(y),
        }
    }

    #[inline]
    pub fn b_prime(&self, y: f64) -> f64 {
        match self {
            DriftModel::Constant { .. } => 0.0,
            DriftModel::Sine { .. } => y.cos(),
            DriftModel::ArctanShift { shift, .. } => {
                let w = shift - y;
                -1.0 / w.mul_add(w, 1.0)
            }
            DriftModel::NegArctan => -1.0 / y.mul_add(y, 1.0),
            DriftModel::OrnsteinUhlenbeck { alpha, .. } => -alpha,
            DriftModel::Truncated { inner, rho } => {
                if y >= -rho {
                    inner.b_prime(y)
                } else {
                    let s = y + rho;
                    inner.b_prime(-rho) * (1.0 + s) * s.exp()
                }
            }
            DriftModel::Custom(c) => (c.b_prime)(y),
        }
    }

    /// `gamma(y) = (b(y)^2 + b'(y)) / 2` without finiteness checks.
    #[inline]
    pub fn gamma_unchecked(&self, y: f64) -> f64 {
        let b = self.b(y);
        0.5 * b.mul_add(b, self.b_prime(y))
    }

    /// Closed-form `beta`, when the model has one.
    pub fn beta_closed(&self, y: f64) -> Option<f64> {
        Some(match self {
            DriftModel::Constant { mu } => mu * y,
            DriftModel::Sine { offset } => offset * y + 1.0 - y.cos(),
            DriftModel::ArctanShift { base, shift } => {
                base * y + arctan_antiderivative(*shift) - arctan_antiderivative(shift - y)
            }
            DriftModel::NegArctan => -arctan_antiderivative(y),
            DriftModel::OrnsteinUhlenbeck { alpha, beta } => -0.5 * alpha * y * y + beta * y,
            DriftModel::Truncated { inner, rho } => {
                if y >= -rho {
                    inner.beta_closed(y)?
                } else {
                    let s = y + rho;
                    inner.beta_closed(-rho)?
                        + inner.b(-rho) * s
                        + inner.b_prime(-rho) * ((s - 1.0) * s.exp() + 1.0)
                }
            }
            DriftModel::Custom(c) => (c.beta_closed.as_ref()?)(y),
        })
    }

    /// `(alpha, beta)` of an untruncated OU model.
    pub fn ou_parameters(&self) -> Option<(f64, f64)> {
        match self {
            DriftModel::OrnsteinUhlenbeck { alpha, beta } => Some((*alpha, *beta)),
            _ => None,
        }
    }
}

/// `(b(y)^2 + b'(y)) / 2`, failing when either term is not finite.
pub fn eval_gamma(model: &DriftModel, y: f64) -> Result<f64> {
    let b = model.b(y);
    let db = model.b_prime(y);
    if !b.is_finite() || !db.is_finite() {
        return Err(Error::Evaluation(y));
    }
    Ok(0.5 * (b * b + db))
}

/// `beta(y) = int_0^y b`, closed form when available, else adaptive Simpson.
pub fn eval_beta(model: &DriftModel, y: f64) -> Result<f64> {
    if let Some(v) = model.beta_closed(y) {
        return Ok(v);
    }
    quad::integrate(|u| model.b(u), 0.0, y, BETA_TOL)
}

/// `p(y) = int_0^y exp(-beta(u)) du`.
pub fn eval_scale_p(model: &DriftModel, y: f64) -> Result<f64> {
    let integrand = |u: f64| -> f64 {
        match eval_beta(model, u) {
            Ok(b) => (-b).exp(),
            Err(_) => f64::NAN,
        }
    };
    // Coarse pass sets the scale for the relative tolerance.
    let coarse = quad::integrate(integrand, 0.0, y, 1e-3).map_err(|_| overflow_hint(y))?;
    let tol = SCALE_TOL * coarse.abs().max(1e-300);
    quad::integrate(integrand, 0.0, y, tol).map_err(|_| overflow_hint(y))
}

fn overflow_hint(y: f64) -> Error {
    Error::Numeric(format!(
        "exp(-beta) overflowed while integrating to {y}; try a smaller |y|"
    ))
}

/// The `gamma` field of a drift, optionally clamping round-off negativity.
#[derive(Clone, Debug)]
pub struct GammaField {
    pub source: DriftModel,
    /// Set when a certificate claims `gamma >= 0`.
    pub clamp_nonneg: bool,
}

impl GammaField {
    pub fn new(source: DriftModel) -> Self {
        GammaField {
            source,
            clamp_nonneg: false,
        }
    }

    pub fn clamped(source: DriftModel) -> Self {
        GammaField {
            source,
            clamp_nonneg: true,
        }
    }

    #[inline]
    pub fn eval(&self, y: f64) -> Result<f64> {
        let g = eval_gamma(&self.source, y)?;
        if self.clamp_nonneg && (GAMMA_CLAMP..0.0).contains(&g) {
            Ok(0.0)
        } else {
            Ok(g)
        }
    }
}

/// Claimed bounds `gamma0 <= gamma <= kappa` (or `-m <= gamma <= kappa`)
/// on `(-inf, L]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundCertificate {
    pub kappa: f64,
    pub gamma0: f64,
    pub m: f64,
    /// Left end of the certification scan.
    pub domain_hint: f64,
}

impl BoundCertificate {
    pub fn new(kappa: f64, gamma0: f64, m: f64) -> Result<Self> {
        for (name, v) in [("kappa", kappa), ("gamma0", gamma0), ("m", m)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::Parameter(format!(
                    "{name} must be finite and >= 0, got {v}"
                )));
            }
        }
        if gamma0 > kappa {
            return Err(Error::Parameter(format!(
                "gamma0 = {gamma0} exceeds kappa = {kappa}"
            )));
        }
        Ok(BoundCertificate {
            kappa,
            gamma0,
            m,
            domain_hint: f64::NAN,
        })
    }

    /// Certificate for `0 <= gamma <= kappa`.
    pub fn upper(kappa: f64) -> Result<Self> {
        Self::new(kappa, 0.0, 0.0)
    }

    pub fn with_domain_hint(mut self, hint: f64) -> Self {
        self.domain_hint = hint;
        self
    }

    /// Default scan start `-1000 (1 + |L|)` when no hint was set.
    pub fn scan_start(&self, level: f64) -> f64 {
        if self.domain_hint.is_finite() {
            self.domain_hint
        } else {
            -1e3 * (1.0 + level.abs())
        }
    }

    fn lower(&self) -> f64 {
        if self.m > 0.0 {
            -self.m
        } else {
            self.gamma0
        }
    }
}

/// `kappa` bounding `gamma` of an OU drift `-alpha x + beta` truncated at `rho`.
pub fn ou_truncated_kappa(alpha: f64, beta: f64, rho: f64) -> f64 {
    let a = alpha * rho + beta + alpha / E;
    0.5 * a * a + alpha / (2.0 * E * E)
}

#[derive(Clone, Debug)]
pub struct CertificateReport {
    pub model: String,
    pub claim: BoundCertificate,
    pub pass: bool,
    /// Largest amount by which `gamma` leaves the claimed band (negative
    /// means the band holds with that margin).
    pub worst_violation: f64,
    pub location: f64,
    pub observed_min: f64,
    pub observed_max: f64,
    /// Analytic `kappa` for a truncated OU drift.
    pub analytic_kappa: Option<f64>,
}

impl CertificateReport {
    pub const CSV_HEADER: &'static str = "model,kappa,gamma0,m,pass,worst_violation,location";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{:.16e},{:.16e},{:.16e},{},{:.16e},{:.16e}",
            self.model,
            self.claim.kappa,
            self.claim.gamma0,
            self.claim.m,
            self.pass,
            self.worst_violation,
            self.location
        )
    }
}

impl fmt::Display for CertificateReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "model:           {}", self.model)?;
        writeln!(
            f,
            "claim:           kappa={} gamma0={} m={}",
            self.claim.kappa, self.claim.gamma0, self.claim.m
        )?;
        writeln!(
            f,
            "observed range:  [{}, {}]",
            self.observed_min, self.observed_max
        )?;
        writeln!(
            f,
            "worst violation: {} at y={}",
            self.worst_violation, self.location
        )?;
        if let Some(k) = self.analytic_kappa {
            writeln!(f, "analytic kappa:  {k}")?;
        }
        write!(
            f,
            "result:          {}",
            if self.pass { "pass" } else { "FAIL" }
        )
    }
}

/// Scans `gamma` over `[claim.scan_start(level), level]` and checks the
/// claimed band, refining around every local extremum of the grid.
pub fn certify_bounds(
    gamma: &GammaField,
    claim: &BoundCertificate,
    level: f64,
    grid_step: f64,
) -> Result<CertificateReport> {
    if !(grid_step > 0.0) {
        return Err(Error::Parameter(format!(
            "grid_step must be > 0, got {grid_step}"
        )));
    }
    let start = claim.scan_start(level);
    if !(start < level) {
        return Err(Error::Parameter(format!(
            "scan start {start} is not below the level {level}"
        )));
    }
    let lower = claim.lower();
    let violation = |g: f64| (g - claim.kappa).max(lower - g);
    let model = &gamma.source;

    let n = ((level - start) / grid_step).ceil() as usize;
    let at = |i: usize| {
        if i >= n {
            level
        } else {
            start + i as f64 * grid_step
        }
    };
    let mut state = Scan::new();
    let (mut prev2, mut prev1) = (f64::NAN, f64::NAN);
    for i in 0..=n {
        let y = at(i);
        let g = eval_gamma(model, y)?;
        state.observe(y, g, violation(g));
        if i >= 2 {
            let is_max = prev1 >= prev2 && prev1 >= g;
            let is_min = prev1 <= prev2 && prev1 <= g;
            if is_max || is_min {
                let (a, b) = (at(i - 2), y);
                let sign = if is_max { -1.0 } else { 1.0 };
                let (ye, ge) = golden_min(|t| sign * model.gamma_unchecked(t), a, b);
                let ge = sign * ge;
                if ge.is_finite() {
                    state.observe(ye, ge, violation(ge));
                }
            }
        }
        prev2 = prev1;
        prev1 = g;
    }

    let analytic_kappa = match model {
        DriftModel::Truncated { inner, rho } => inner
            .ou_parameters()
            .map(|(a, b)| ou_truncated_kappa(a, b, *rho)),
        _ => None,
    };
    Ok(CertificateReport {
        model: model.to_string(),
        claim: *claim,
        pass: state.worst <= 1e-9 && claim.gamma0 <= claim.kappa,
        worst_violation: state.worst,
        location: state.worst_at,
        observed_min: state.min,
        observed_max: state.max,
        analytic_kappa,
    })
}

struct Scan {
    worst: f64,
    worst_at: f64,
    min: f64,
    max: f64,
}

impl Scan {
    fn new() -> Self {
        Scan {
            worst: f64::NEG_INFINITY,
            worst_at: f64::NAN,
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
        }
    }

    fn observe(&mut self, y: f64, g: f64, v: f64) {
        self.min = self.min.min(g);
        self.max = self.max.max(g);
        if v > self.worst {
            self.worst = v;
            self.worst_at = y;
        }
    }
}

/// Golden-section minimisation of `f` on `[a, b]`.
fn golden_min<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64) -> (f64, f64) {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..60 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    let y = 0.5 * (a + b);
    (y, f(y))
}

/// Scale function `p` and the Feller function `v` of a drift.
#[derive(Clone, Debug)]
pub struct ScaleFunction {
    pub source: DriftModel,
}

impl ScaleFunction {
    pub fn new(source: DriftModel) -> Self {
        ScaleFunction { source }
    }

    pub fn p(&self, y: f64) -> Result<f64> {
        eval_scale_p(&self.source, y)
    }

    /// `v(y) = int_0^y int_0^u 2 p'(u)/p'(z) dz du`.
    pub fn v(&self, y: f64) -> Result<f64> {
        let profile = LogProfile::build(&self.source, y, 1e-2)?;
        let (log_v, sign) = profile.log_v_at(profile.len() - 1);
        let v = log_v.exp();
        if !v.is_finite() {
            return Err(Error::Numeric(format!("v({y}) overflows")));
        }
        Ok(sign * v)
    }
}

/// `beta`, `log|p|` and `log v` tabulated on a uniform grid from 0 to `end`,
/// kept in log space so deep probes do not overflow.
struct LogProfile {
    grid: Vec<f64>,
    log_p: Vec<f64>,
    log_v: Vec<f64>,
}

impl LogProfile {
    fn build(model: &DriftModel, end: f64, step: f64) -> Result<Self> {
        let n = ((end.abs() / step).ceil() as usize).max(1);
        let h = end / n as f64;
        let mut grid = Vec::with_capacity(n + 1);
        let mut beta = Vec::with_capacity(n + 1);
        let mut acc = 0.0;
        for i in 0..=n {
            let y = i as f64 * h;
            if i > 0 {
                match model.beta_closed(y) {
                    Some(v) => acc = v,
                    None => {
                        let a = y - h;
                        acc += h / 6.0 * (model.b(a) + 4.0 * model.b(a + 0.5 * h) + model.b(y));
                    }
                }
            }
            if !acc.is_finite() {
                return Err(Error::Numeric(format!("beta is not finite at {y}")));
            }
            grid.push(y);
            beta.push(acc);
        }
        // Trapezoid sums of exp(-beta) and exp(beta) accumulated in log space.
        let mut log_p = vec![f64::NEG_INFINITY; n + 1];
        let mut log_inner = vec![f64::NEG_INFINITY; n + 1];
        let mut log_v = vec![f64::NEG_INFINITY; n + 1];
        let lh = (h.abs() * 0.5).ln();
        for i in 1..=n {
            log_p[i] = log_add(log_p[i - 1], lh + log_add(-beta[i - 1], -beta[i]));
            log_inner[i] = log_add(log_inner[i - 1], lh + log_add(beta[i - 1], beta[i]));
            let outer_prev = -beta[i - 1] + log_inner[i - 1];
            let outer_cur = -beta[i] + log_inner[i];
            log_v[i] = log_add(
                log_v[i - 1],
                lh + log_add(outer_prev, outer_cur) + 2f64.ln(),
            );
        }
        Ok(LogProfile { grid, log_p, log_v })
    }

    fn len(&self) -> usize {
        self.grid.len()
    }

    /// `(log|v|, sign of v)` at grid index `i`.
    fn log_v_at(&self, i: usize) -> (f64, f64) {
        // Both integrals change sign together for y < 0, so v >= 0.
        (self.log_v[i], 1.0)
    }

    fn index_of(&self, y: f64) -> usize {
        let h = self.grid.get(1).copied().unwrap_or(1.0);
        ((y / h).round() as usize).min(self.len() - 1)
    }
}

fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Recurrence {
    Yes,
    No,
    Inconclusive,
}

#[derive(Clone, Debug)]
pub struct RecurrenceReport {
    pub depths: Vec<f64>,
    /// `log |p(-d)|` per probe depth.
    pub log_abs_p: Vec<f64>,
    /// `log v(-d)` per probe depth.
    pub log_v: Vec<f64>,
    pub verdict: Recurrence,
}

impl RecurrenceReport {
    pub fn v_deepest(&self) -> f64 {
        self.log_v.last().map_or(f64::NAN, |l| l.exp())
    }
}

impl fmt::Display for RecurrenceReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for ((d, lp), lv) in self.depths.iter().zip(&self.log_abs_p).zip(&self.log_v) {
            writeln!(f, "depth {d:>10}: log|p| = {lp:.6}, log v = {lv:.6}")?;
        }
        let verdict = match self.verdict {
            Recurrence::Yes => "yes",
            Recurrence::No => "no",
            Recurrence::Inconclusive => "inconclusive",
        };
        write!(f, "recurrent: {verdict} (heuristic)")
    }
}

/// Growth of `log|p|` over the last tenfold depth increase above which
/// `p` is treated as diverging.
const DIVERGING: f64 = 0.05;
/// Growth below which it is treated as converged.
const PLATEAU: f64 = 1e-3;

/// Probes `p(-d)` and `v(-d)` at `d = probe_depth * 10^j`, `j = 0, 1, 2`.
///
/// `tau_L < inf` follows if `p(-inf) = -inf` or `v(-inf) < inf`. Neither
/// limit can be decided from finitely many probes, so the verdict is a
/// heuristic and never blocks sampling.
pub fn recurrence_diagnostic(scale: &ScaleFunction, probe_depth: f64) -> Result<RecurrenceReport> {
    if !(probe_depth > 0.0) {
        return Err(Error::Parameter(format!(
            "probe_depth must be > 0, got {probe_depth}"
        )));
    }
    let depths: Vec<f64> = (0..3).map(|j| probe_depth * 10f64.powi(j)).collect();
    let deepest = depths[depths.len() - 1];
    let step = (deepest / 1e5).clamp(1e-4, 1e-2);
    let profile = match LogProfile::build(&scale.source, -deepest, step) {
        Ok(p) => p,
        Err(_) => {
            return Ok(RecurrenceReport {
                depths,
                log_abs_p: vec![],
                log_v: vec![],
                verdict: Recurrence::Inconclusive,
            })
        }
    };
    let idx: Vec<usize> = depths.iter().map(|d| profile.index_of(-d)).collect();
    let log_abs_p: Vec<f64> = idx.iter().map(|&i| profile.log_p[i]).collect();
    let log_v: Vec<f64> = idx.iter().map(|&i| profile.log_v_at(i).0).collect();
    let growth = |s: &[f64]| s[s.len() - 1] - s[s.len() - 2];
    let all_finite = log_abs_p.iter().chain(&log_v).all(|v| v.is_finite());
    let verdict = if !all_finite {
        Recurrence::Inconclusive
    } else {
        let gp = growth(&log_abs_p);
        let gv = growth(&log_v);
        if gp > DIVERGING || gv < PLATEAU {
            Recurrence::Yes
        } else if gp < PLATEAU && gv > DIVERGING {
            Recurrence::No
        } else {
            Recurrence::Inconclusive
        }
    };
    Ok(RecurrenceReport {
        depths,
        log_abs_p,
        log_v,
        verdict,
    })
}

/// Unit-diffusion drift obtained from `dX = b dt + sigma dB` through
/// `eta(y) = int_anchor^y du / sigma(u)`.
pub struct LampertiTransform {
    b: RealFn,
    sigma: RealFn,
    sigma_prime: RealFn,
    anchor: f64,
}

/// Root-finding tolerance for `eta^{-1}`.
const LAMPERTI_TOL: f64 = 1e-10;

impl LampertiTransform {
    fn sigma_checked(&self, y: f64) -> Result<f64> {
        let s = (self.sigma)(y);
        if !(s > 0.0) || !s.is_finite() {
            return Err(Error::Model(format!("sigma({y}) = {s} is not positive")));
        }
        Ok(s)
    }

    pub fn eta(&self, y: f64) -> Result<f64> {
        self.sigma_checked(y)?;
        self.sigma_checked(self.anchor)?;
        quad::integrate(|u| 1.0 / (self.sigma)(u), self.anchor, y, 1e-12)
            .map_err(|e| Error::Model(format!("eta({y}) failed: {e}")))
    }

    pub fn eta_inverse(&self, z: f64) -> Result<f64> {
        quad::solve_increasing(|y| self.eta(y), z, self.anchor, LAMPERTI_TOL)
    }

    /// `b/sigma - sigma'/2` in the original coordinate.
    fn g(&self, y: f64) -> Result<f64> {
        let s = self.sigma_checked(y)?;
        Ok((self.b)(y) / s - 0.5 * (self.sigma_prime)(y))
    }

    pub fn b0(&self, z: f64) -> Result<f64> {
        self.g(self.eta_inverse(z)?)
    }

    /// `d b0 / dz = sigma(y) g'(y)` at `y = eta^{-1}(z)`, with `g'` by a
    /// central difference in the original coordinate.
    pub fn b0_prime(&self, z: f64) -> Result<f64> {
        let y = self.eta_inverse(z)?;
        let h = 1e-5 * (1.0 + y.abs());
        let dg = (self.g(y + h)? - self.g(y - h)?) / (2.0 * h);
        Ok(self.sigma_checked(y)? * dg)
    }
}

/// Drift of the Lamperti-transformed process `Y = eta(X)`. The returned
/// model yields NaN where `sigma <= 0`, which the samplers report as an
/// evaluation error; use [`LampertiTransform`] directly for the cause.
pub fn lamperti_drift<B, S, D>(b: B, sigma: S, sigma_prime: D, x_anchor: f64) -> Result<DriftModel>
where
    B: Fn(f64) -> f64 + Send + Sync + 'static,
    S: Fn(f64) -> f64 + Send + Sync + 'static,
    D: Fn(f64) -> f64 + Send + Sync + 'static,
{
    let t = Arc::new(LampertiTransform {
        b: Arc::new(b),
        sigma: Arc::new(sigma),
        sigma_prime: Arc::new(sigma_prime),
        anchor: x_anchor,
    });
    t.sigma_checked(x_anchor)?;
    let tb = Arc::clone(&t);
    let td = Arc::clone(&t);
    Ok(DriftModel::custom(
        "lamperti",
        move |z| tb.b0(z).unwrap_or(f64::NAN),
        move |z| td.b0_prime(z).unwrap_or(f64::NAN),
    ))
}

/// Same as [`lamperti_drift`] but keeps the transform for error reporting.
pub fn lamperti_transform<B, S, D>(
    b: B,
    sigma: S,
    sigma_prime: D,
    x_anchor: f64,
) -> LampertiTransform
where
    B: Fn(f64) -> f64 + Send + Sync + 'static,
    S: Fn(f64) -> f64 + Send + Sync + 'static,
    D: Fn(f64) -> f64 + Send + Sync + 'static,
{
    LampertiTransform {
        b: Arc::new(b),
        sigma: Arc::new(sigma),
        sigma_prime: Arc::new(sigma_prime),
        anchor: x_anchor,
    }
}

/// Keeps `b` on `[-rho, L]` and continues it below `-rho` with a bounded
/// C^1 extension.
pub fn truncate_drift(model: &DriftModel, rho: f64) -> Result<DriftModel> {
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(Error::Parameter(format!(
            "rho must be finite and > 0, got {rho}"
        )));
    }
    if !model.b(-rho).is_finite() || !model.b_prime(-rho).is_finite() {
        return Err(Error::Evaluation(-rho));
    }
    Ok(DriftModel::Truncated {
        inner: Arc::new(model.clone()),
        rho,
    })
}

/// `pi^2 / 8`, the supremum of `gamma` for `b = -arctan`.
pub const NEG_ARCTAN_KAPPA: f64 = PI * PI / 8.0;
