//! Three-dimensional Brownian bridges pinned to zero at both ends of `[0, T]`.
//!
//! The Bessel bridge from 0 to `gap` over `[0, T]` is the norm of
//! `(t/T) gap e1 + beta_t` with `beta` such a bridge, so only the 3-vector
//! bridge is ever simulated.

use std::collections::BTreeMap;
use std::io::Write;

use ordered_float::OrderedFloat;

use crate::error::{Error, Result};
use crate::rng::RandomStream;

pub type Vec3 = [f64; 3];

/// Knot times closer than this are treated as equal.
pub const TIME_EPS: f64 = 1e-15;

#[inline]
pub fn norm(v: &Vec3) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

/// `|| (t / horizon) drift_gap e1 + beta_t ||`.
#[inline]
pub fn bessel_norm(drift_gap: f64, horizon: f64, t: f64, beta_t: &Vec3) -> f64 {
    let r = [t / horizon * drift_gap + beta_t[0], beta_t[1], beta_t[2]];
    let n = norm(&r);
    debug_assert!(
        n <= t / horizon * drift_gap + norm(beta_t) + 1e-12 * (1.0 + n),
        "triangle inequality violated"
    );
    n
}

/// Bridge sampled forward in time, one new time at a time.
#[derive(Clone, Debug)]
pub struct SequentialBridgeState {
    pub horizon: f64,
    pub current_time: f64,
    pub current_value: Vec3,
}

impl SequentialBridgeState {
    pub fn new(horizon: f64) -> Self {
        SequentialBridgeState {
            horizon,
            current_time: 0.0,
            current_value: [0.0; 3],
        }
    }

    /// Draws the bridge at `new_time` given the current knot and the pin at
    /// the horizon:
    ///
    /// ```text
    /// beta <- (T - t1)/(T - t0) beta + sqrt((T - t1)(t1 - t0)/(T - t0)) G
    /// ```
    pub fn advance(&mut self, new_time: f64, stream: &mut RandomStream) -> Result<Vec3> {
        let (t0, t1, horizon) = (self.current_time, new_time, self.horizon);
        if !(t1 > t0 && t1 <= horizon) {
            return Err(Error::Contract(format!(
                "bridge advance to {t1} from {t0} outside ({t0}, {horizon}]"
            )));
        }
        let span = horizon - t0;
        let scale = (horizon - t1) / span;
        let sd = ((horizon - t1) * (t1 - t0) / span).sqrt();
        let g = stream.gaussian3();
        let b = &mut self.current_value;
        for k in 0..3 {
            b[k] = scale * b[k] + sd * g[k];
        }
        self.current_time = t1;
        Ok(*b)
    }
}

/// Bridge refined by inserting arbitrary times between existing knots.
#[derive(Clone, Debug)]
pub struct BridgeSkeleton {
    pub horizon: f64,
    pub drift_gap: f64,
    knots: BTreeMap<OrderedFloat<f64>, Vec3>,
}

impl BridgeSkeleton {
    pub fn new(horizon: f64, drift_gap: f64) -> Self {
        let mut knots = BTreeMap::new();
        knots.insert(OrderedFloat(0.0), [0.0; 3]);
        knots.insert(OrderedFloat(horizon), [0.0; 3]);
        BridgeSkeleton {
            horizon,
            drift_gap,
            knots,
        }
    }

    pub fn len(&self) -> usize {
        self.knots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.knots.is_empty()
    }

    pub fn knots(&self) -> impl Iterator<Item = (f64, &Vec3)> {
        self.knots.iter().map(|(t, v)| (t.0, v))
    }

    /// Draws the bridge at `u` conditionally on its two neighbouring knots:
    ///
    /// ```text
    /// beta = b_l + (b_r - b_l)(u - t_l)/(t_r - t_l) + sqrt((t_r - u)(u - t_l)/(t_r - t_l)) G
    /// ```
    ///
    /// A time within [`TIME_EPS`] of an existing knot returns the stored value.
    pub fn bisect_insert(&mut self, u: f64, stream: &mut RandomStream) -> Result<Vec3> {
        let key = OrderedFloat(u);
        let (tl, bl) = match self.knots.range(..=key).next_back() {
            Some((t, v)) => (t.0, *v),
            None => return Err(self.out_of_range(u)),
        };
        if u - tl <= TIME_EPS {
            return Ok(bl);
        }
        let (tr, br) = match self.knots.range(key..).next() {
            Some((t, v)) => (t.0, *v),
            None => return Err(self.out_of_range(u)),
        };
        if tr - u <= TIME_EPS {
            return Ok(br);
        }
        let span = tr - tl;
        let w = (u - tl) / span;
        let sd = ((tr - u) * (u - tl) / span).sqrt();
        let g = stream.gaussian3();
        let mut beta = [0.0; 3];
        for k in 0..3 {
            beta[k] = bl[k] + (br[k] - bl[k]) * w + sd * g[k];
        }
        self.knots.insert(key, beta);
        Ok(beta)
    }

    fn out_of_range(&self, u: f64) -> Error {
        Error::Contract(format!("bridge time {u} outside [0, {}]", self.horizon))
    }

    /// Writes `t,beta_x,beta_y,beta_z,r` rows, `r` being the Bessel norm.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "t,beta_x,beta_y,beta_z,r")?;
        for (t, b) in self.knots() {
            let r = bessel_norm(self.drift_gap, self.horizon, t, b);
            writeln!(
                out,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                t, b[0], b[1], b[2], r
            )?;
        }
        Ok(())
    }
}
