use std::f64::consts::FRAC_PI_2;
use std::ops::RangeInclusive;

use exact_fpt::model::{certify_bounds, ou_truncated_kappa, truncate_drift, NEG_ARCTAN_KAPPA};
use exact_fpt::{
    optimal_split_count, BoundCertificate, DriftModel, GammaField, SamplerConfig, Variant,
};

use crate::{CliError, Common};

/// Certification grid step.
const CERT_STEP: f64 = 1e-2;

/// A `kappa` bounding `gamma` on the whole line, for catalog drifts.
pub fn default_kappa(model: &DriftModel, rho: Option<f64>) -> Option<f64> {
    Some(match (model, rho) {
        (DriftModel::OrnsteinUhlenbeck { alpha, beta }, Some(rho)) => {
            ou_truncated_kappa(*alpha, *beta, rho)
        }
        (_, Some(_)) => return None,
        (DriftModel::Constant { mu }, None) => 0.5 * mu * mu,
        (DriftModel::Sine { offset }, None) => 0.5 * ((offset.abs() + 1.0).powi(2) + 1.0),
        (DriftModel::ArctanShift { base, .. }, None) => 0.5 * (base.abs() + FRAC_PI_2).powi(2),
        (DriftModel::NegArctan, None) => NEG_ARCTAN_KAPPA,
        _ => return None,
    })
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Parses `--k`: an integer, or `opt` for the iteration-optimal count.
pub fn split_count(c: &Common, gap: f64, kappa: f64) -> Result<u32, CliError> {
    match c.k.as_deref() {
        None => Ok(1),
        Some("opt") => Ok(optimal_split_count(gap, kappa)),
        Some(s) => match s.parse::<u32>() {
            Ok(k) if k >= 1 => Ok(k),
            _ => Err(usage(format!(
                "--k expects an integer >= 1 or 'opt', got '{s}'"
            ))),
        },
    }
}

/// Parses `a..b` (inclusive) or `a..=b`.
pub fn split_range(s: &str) -> Result<RangeInclusive<u32>, CliError> {
    let bad = || usage(format!("--k expects a range like 1..40, got '{s}'"));
    let (a, b) = s.split_once("..").ok_or_else(bad)?;
    let b = b.strip_prefix('=').unwrap_or(b);
    let (a, b): (u32, u32) = (
        a.trim().parse().map_err(|_| bad())?,
        b.trim().parse().map_err(|_| bad())?,
    );
    if a == 0 || b < a {
        return Err(bad());
    }
    Ok(a..=b)
}

/// Builds the sampler configuration from the flags and certifies the bounds
/// it relies on. `k` overrides `--k`.
pub fn build(c: &Common, k: Option<u32>) -> Result<SamplerConfig, CliError> {
    let model = DriftModel::parse(&c.model)?;
    let base: Variant = c.variant.parse()?;
    if let Some(rho) = c.rho {
        if !(rho > 0.0) {
            return Err(usage(format!("--rho must be > 0, got {rho}")));
        }
    }
    let kappa = match c.kappa.or_else(|| default_kappa(&model, c.rho)) {
        Some(k) => k,
        None => return Err(usage(format!("--kappa is required for model '{model}'"))),
    };
    let shift = matches!(base, Variant::A1Shift | Variant::A2Shift);
    let gamma0 = match (c.gamma0, shift) {
        (Some(g), _) if shift && !(g > 0.0) => {
            return Err(usage(format!("{base} requires --gamma0 > 0, got {g}")))
        }
        (Some(g), _) => g,
        (None, true) => return Err(usage(format!("{base} requires --gamma0 > 0"))),
        (None, false) => 0.0,
    };
    let is_a3 = base == Variant::A3;
    let m = match c.m {
        Some(m) if !is_a3 && m != 0.0 => return Err(usage("--m is only meaningful for a3")),
        Some(m) => m,
        None if is_a3 && matches!(model, DriftModel::NegArctan) => 0.5,
        None => 0.0,
    };
    if is_a3 && c.t0.is_none() {
        return Err(usage("a3 requires --t0"));
    }
    if !is_a3 && c.t0.is_some() {
        return Err(usage("--t0 is only meaningful for a3"));
    }
    let cert = BoundCertificate::new(kappa, gamma0, m)?;
    let k = match k {
        Some(k) => k,
        None => split_count(c, c.level - c.x, kappa)?,
    };
    let variant = match c.rho {
        Some(rho) => Variant::Rho {
            inner: Box::new(base),
            rho,
        },
        None => base,
    };
    let mut cfg = SamplerConfig::new(model, c.x, c.level, cert, variant)
        .with_split(k)
        .with_max_iterations(c.max_iterations);
    cfg.t0 = c.t0;
    cfg.validate()?;
    certify(&cfg)?;
    Ok(cfg)
}

/// The drift the sampler actually thins against.
pub fn effective_model(cfg: &SamplerConfig) -> Result<DriftModel, CliError> {
    Ok(match &cfg.variant {
        Variant::Rho { rho, .. } => truncate_drift(&cfg.model, *rho)?,
        _ => cfg.model.clone(),
    })
}

fn certify(cfg: &SamplerConfig) -> Result<(), CliError> {
    let model = effective_model(cfg)?;
    let field = if cfg.cert.m == 0.0 {
        GammaField::clamped(model)
    } else {
        GammaField::new(model)
    };
    let report = certify_bounds(&field, &cfg.cert, cfg.level, CERT_STEP)?;
    if report.pass {
        Ok(())
    } else {
        Err(usage(format!("bounds do not hold on (-inf, L]:\n{report}")))
    }
}
