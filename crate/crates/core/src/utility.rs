//! Utility functions of work, expected utility, certainty equivalents and
//! risk-aversion measures.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tolerance::Tolerances;
use crate::work::WorkDistribution;

/// Exponential utility `(1 - e^{-rw}) / r`, or `w` when `|r|` is below the
/// risk-neutral cutoff.
pub fn exp_utility(r: f64, w: f64) -> f64 {
    if r.abs() < Tolerances::current().near_zero_r {
        w
    } else {
        -(-r * w).exp_m1() / r
    }
}

/// Inverse of [`exp_utility`]: `-ln(1 - r·value) / r`.
pub fn exp_certainty_equivalent(r: f64, value: f64) -> Result<f64> {
    if r.abs() < Tolerances::current().near_zero_r {
        return Ok(value);
    }
    let arg = -r * value;
    if !(arg > -1.0) || !arg.is_finite() {
        return Err(Error::OutOfRange { value });
    }
    Ok(-arg.ln_1p() / r)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum UtilitySpec {
    Exponential { r: f64 },
    Linear,
    Tabulated(Tabulated),
}

impl UtilitySpec {
    pub fn exponential(r: f64) -> Result<Self> {
        if !r.is_finite() {
            return Err(Error::InvalidUtility(format!("r = {r} is not finite")));
        }
        Ok(UtilitySpec::Exponential { r })
    }

    pub fn tabulated(knots: Vec<[f64; 2]>) -> Result<Self> {
        Ok(UtilitySpec::Tabulated(Tabulated::new(knots)?))
    }

    /// Re-checks invariants, e.g. after deserialisation.
    pub fn validate(&self) -> Result<()> {
        match self {
            UtilitySpec::Exponential { r } if !r.is_finite() => {
                Err(Error::InvalidUtility(format!("r = {r} is not finite")))
            }
            _ => Ok(()),
        }
    }

    pub fn value(&self, w: f64) -> Result<f64> {
        utility_value(self, w)
    }
}

pub fn utility_value(u: &UtilitySpec, w: f64) -> Result<f64> {
    match u {
        UtilitySpec::Exponential { r } => Ok(exp_utility(*r, w)),
        UtilitySpec::Linear => Ok(w),
        UtilitySpec::Tabulated(t) => t.eval(w),
    }
}

/// `Σ weight·u(w)`; quasiprobabilities are handled the same way.
pub fn expected_utility(dist: &WorkDistribution, u: &UtilitySpec) -> Result<f64> {
    dist.atoms()
        .iter()
        .map(|a| Ok(a.weight * utility_value(u, a.w)?))
        .sum()
}

/// The deterministic work whose utility equals `value`.
pub fn certainty_equivalent(value: f64, u: &UtilitySpec) -> Result<f64> {
    match u {
        UtilitySpec::Exponential { r } => exp_certainty_equivalent(*r, value),
        UtilitySpec::Linear => Ok(value),
        UtilitySpec::Tabulated(t) => t.invert(value),
    }
}

/// Absolute risk aversion `-u''(w) / u'(w)`.
pub fn arrow_pratt(u: &UtilitySpec, w: f64) -> Result<f64> {
    match u {
        UtilitySpec::Exponential { r } => Ok(*r),
        UtilitySpec::Linear => Ok(0.0),
        UtilitySpec::Tabulated(t) => {
            let h = 1e-4 * t.range();
            let (lo, hi) = t.domain();
            if w - h < lo || w + h > hi {
                return Err(Error::NonDifferentiable(w));
            }
            let (um, u0, up) = (t.eval(w - h)?, t.eval(w)?, t.eval(w + h)?);
            let d1 = (up - um) / (2.0 * h);
            let d2 = (up - 2.0 * u0 + um) / (h * h);
            if d1 <= 0.0 {
                return Err(Error::NonDifferentiable(w));
            }
            Ok(-d2 / d1)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preference {
    First,
    Second,
    Indifferent,
}

impl Preference {
    /// Classifies `a - b` with the indifference band.
    pub fn from_difference(diff: f64) -> Self {
        if diff.abs() <= Tolerances::current().indifference {
            Preference::Indifferent
        } else if diff > 0.0 {
            Preference::First
        } else {
            Preference::Second
        }
    }
}

pub fn prefer(first: &WorkDistribution, second: &WorkDistribution, u: &UtilitySpec) -> Result<Preference> {
    let a = expected_utility(first, u)?;
    let b = expected_utility(second, u)?;
    Ok(Preference::from_difference(a - b))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawKnots {
    knots: Vec<[f64; 2]>,
}

/// Strictly increasing utility given by knots, interpolated with monotone
/// piecewise-cubic Hermite (Fritsch–Carlson) slopes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawKnots", into = "RawKnots")]
pub struct Tabulated {
    w: Vec<f64>,
    u: Vec<f64>,
    slopes: Vec<f64>,
}

impl TryFrom<RawKnots> for Tabulated {
    type Error = Error;

    fn try_from(raw: RawKnots) -> Result<Self> {
        Tabulated::new(raw.knots)
    }
}

impl From<Tabulated> for RawKnots {
    fn from(t: Tabulated) -> Self {
        RawKnots {
            knots: t.w.iter().zip(&t.u).map(|(&w, &u)| [w, u]).collect(),
        }
    }
}

impl Tabulated {
    pub fn new(knots: Vec<[f64; 2]>) -> Result<Self> {
        if knots.len() < 2 {
            return Err(Error::InvalidUtility("at least two knots are required".into()));
        }
        if knots.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::InvalidUtility("knots must be finite".into()));
        }
        for pair in knots.windows(2) {
            if !(pair[0][0] < pair[1][0] && pair[0][1] < pair[1][1]) {
                return Err(Error::InvalidUtility(format!(
                    "knots ({}, {}) and ({}, {}) are not strictly increasing",
                    pair[0][0], pair[0][1], pair[1][0], pair[1][1]
                )));
            }
        }
        let w: Vec<f64> = knots.iter().map(|k| k[0]).collect();
        let u: Vec<f64> = knots.iter().map(|k| k[1]).collect();
        let slopes = pchip_slopes(&w, &u);
        Ok(Self { w, u, slopes })
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.w[0], *self.w.last().expect("non-empty"))
    }

    pub fn range(&self) -> f64 {
        let (lo, hi) = self.domain();
        hi - lo
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        let (lo, hi) = self.domain();
        if !(lo..=hi).contains(&x) {
            return Err(Error::OutOfTabulatedRange { w: x, min: lo, max: hi });
        }
        let i = self.interval(x);
        Ok(self.hermite(i, x))
    }

    fn interval(&self, x: f64) -> usize {
        let n = self.w.len();
        self.w.partition_point(|&k| k <= x).clamp(1, n - 1) - 1
    }

    fn hermite(&self, i: usize, x: f64) -> f64 {
        let h = self.w[i + 1] - self.w[i];
        let t = (x - self.w[i]) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * self.u[i] + h10 * h * self.slopes[i] + h01 * self.u[i + 1] + h11 * h * self.slopes[i + 1]
    }

    /// Solves `u(w) = value` by bisection on the bracketing interval.
    fn invert(&self, value: f64) -> Result<f64> {
        let (umin, umax) = (self.u[0], *self.u.last().expect("non-empty"));
        if !(umin..=umax).contains(&value) {
            return Err(Error::OutOfRange { value });
        }
        let n = self.u.len();
        let i = self.u.partition_point(|&k| k <= value).clamp(1, n - 1) - 1;
        let (mut a, mut b) = (self.w[i], self.w[i + 1]);
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if m <= a || m >= b {
                break;
            }
            if self.hermite(i, m) < value {
                a = m;
            } else {
                b = m;
            }
        }
        Ok(0.5 * (a + b))
    }
}

fn pchip_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let h: Vec<f64> = x.windows(2).map(|p| p[1] - p[0]).collect();
    let delta: Vec<f64> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / h[k]).collect();
    if n == 2 {
        return vec![delta[0]; 2];
    }
    let mut d = vec![0.0; n];
    for k in 1..n - 1 {
        // all secants are positive for strictly increasing knots
        let w1 = 2.0 * h[k] + h[k - 1];
        let w2 = h[k] + 2.0 * h[k - 1];
        d[k] = (w1 + w2) / (w1 / delta[k - 1] + w2 / delta[k]);
    }
    d[0] = end_slope(h[0], h[1], delta[0], delta[1]);
    d[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
    d
}

fn end_slope(h0: f64, h1: f64, m0: f64, m1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * m0 - h0 * m1) / (h0 + h1);
    if d.signum() != m0.signum() {
        0.0
    } else if m0.signum() != m1.signum() && d.abs() > 3.0 * m0.abs() {
        3.0 * m0
    } else {
        d
    }
}
