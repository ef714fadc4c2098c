//! Adaptive Simpson quadrature and a bracketing root finder.

use crate::error::{Error, Result};

/// Maximum recursion depth of the adaptive Simpson rule.
pub const MAX_LEVELS: u32 = 60;

const MAX_EVALS: usize = 20_000_000;

/// Integrates `f` over `[a, b]` (either orientation) to absolute tolerance `tol`.
///
/// The interval is first cut into unit-length panels so that oscillating
/// integrands cannot fool the coarse Simpson estimate on long ranges.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    if !a.is_finite() || !b.is_finite() {
        return Err(Error::Numeric(format!(
            "non-finite integration bounds [{a}, {b}]"
        )));
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let panels = ((hi - lo).ceil() as usize).max(1);
    let width = (hi - lo) / panels as f64;
    let panel_tol = tol / panels as f64;
    let mut evals = 0usize;
    let mut total = 0.0;
    for i in 0..panels {
        let x0 = lo + i as f64 * width;
        let x1 = if i + 1 == panels { hi } else { x0 + width };
        let f0 = f(x0);
        let f1 = f(x1);
        let m = 0.5 * (x0 + x1);
        let fm = f(m);
        evals += 3;
        let whole = simpson(x0, x1, f0, fm, f1);
        total += adapt(
            &f, x0, x1, f0, fm, f1, whole, panel_tol, MAX_LEVELS, &mut evals,
        )?;
    }
    if !total.is_finite() {
        return Err(Error::Numeric(format!(
            "integral over [{a}, {b}] is not finite"
        )));
    }
    Ok(sign * total)
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn adapt<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
    evals: &mut usize,
) -> Result<f64> {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    *evals += 2;
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if !delta.is_finite() {
        return Err(Error::Numeric(format!("non-finite integrand near {m}")));
    }
    if delta.abs() <= 15.0 * tol {
        return Ok(left + right + delta / 15.0);
    }
    if depth == 0 || *evals > MAX_EVALS {
        return Err(Error::Numeric(format!(
            "adaptive quadrature did not converge on [{a}, {b}]"
        )));
    }
    Ok(
        adapt(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1, evals)?
            + adapt(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1, evals)?,
    )
}

/// Solves `f(y) = target` for a non-decreasing `f`, starting from `start`.
///
/// The bracket is grown geometrically from `start`, then bisected to `tol`.
pub fn solve_increasing<F: Fn(f64) -> Result<f64>>(
    f: F,
    target: f64,
    start: f64,
    tol: f64,
) -> Result<f64> {
    let f0 = f(start)?;
    if f0 == target {
        return Ok(start);
    }
    let dir = if f0 < target { 1.0 } else { -1.0 };
    let mut step = 1.0;
    let mut near = start;
    let mut far = start + dir * step;
    let mut grown = 0;
    loop {
        let v = f(far)?;
        if (v - target) * dir >= 0.0 {
            break;
        }
        near = far;
        step *= 2.0;
        far = start + dir * step;
        grown += 1;
        if grown > 200 {
            return Err(Error::Numeric(format!(
                "could not bracket the level {target} from {start}"
            )));
        }
    }
    let (mut lo, mut hi) = if dir > 0.0 { (near, far) } else { (far, near) };
    for _ in 0..400 {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if f(mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let v = integrate(|x| x * x * x - 2.0 * x, -1.0, 3.0, 1e-12).unwrap();
        assert!((v - (20.0 - 8.0)).abs() < 1e-10);
    }

    #[test]
    fn reversed_bounds_flip_sign() {
        let a = integrate(f64::exp, 0.0, -1.0, 1e-12).unwrap();
        assert!((a - (f64::exp(-1.0) - 1.0)).abs() < 1e-11);
    }

    #[test]
    fn long_oscillating_range() {
        let v = integrate(f64::sin, 0.0, 200.0 * std::f64::consts::PI, 1e-10).unwrap();
        assert!(v.abs() < 1e-8);
    }

    #[test]
    fn singular_integrand_errors() {
        assert!(integrate(|x: f64| 1.0 / x, -1.0, 1.0, 1e-10).is_err());
    }

    #[test]
    fn root_of_cubic() {
        let r = solve_increasing(|y| Ok(y * y * y), 8.0, 0.0, 1e-12).unwrap();
        assert!((r - 2.0).abs() < 1e-10);
        let r = solve_increasing(|y| Ok(y.atan()), -1.0, 3.0, 1e-12).unwrap();
        assert!((r - (-1.0f64).tan()).abs() < 1e-10);
    }
}
