//! Anytime confidence widths `B(n, delta)` for rewards bounded in `[0, b]`.
//!
//! Width families add `B(n, delta)` symmetrically around an empirical mean.
//! The two KL families instead define a divergence budget `d(n, delta)` and
//! invert the Bernoulli KL divergence; their [`ConfidenceSchedule::width`] is
//! the Pinsker envelope `b * sqrt(d / 2n)`, which always contains the KL
//! interval and is what cross indices use when the centre leaves `[0, b]`.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::scalar::Scalar;

const KL_TOLERANCE: f64 = 1e-9;
const KL_MAX_ITERATIONS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum BoundFamily {
    /// `0.85 b sqrt((ln ln(b^2 n / 2) + 0.72 ln(5.2 / delta)) / n)`.
    #[serde(rename = "howard-lil")]
    HowardLil,
    /// `b sqrt(ln(pi^2 n^2 / (3 delta)) / 2n)`.
    #[serde(rename = "succ-elim-union")]
    SuccElimUnion,
    /// `0.85 b sqrt((ln ln(0.2585 n) + 0.96 ln(67.59 / delta)) / n)`.
    #[serde(rename = "lil-jamieson")]
    LilJamieson,
    /// `b sqrt(ln(x ln x) / 2n)` with `x = 405 n^1.1 / delta`.
    #[serde(rename = "kaufmann-union")]
    KaufmannUnion,
    /// KL inversion with `d = 2 ln(405.5 n^1.1 / delta) + ln ln(405.5 n^1.1 / delta)`.
    #[serde(rename = "kl")]
    Kl,
    /// KL inversion with `d = 1.86 ln(kappa log2(2n / delta))`; needs `kappa`.
    #[serde(rename = "lil-kl")]
    LilKl,
}

impl BoundFamily {
    pub const ALL: [BoundFamily; 6] = [
        BoundFamily::HowardLil,
        BoundFamily::SuccElimUnion,
        BoundFamily::LilJamieson,
        BoundFamily::KaufmannUnion,
        BoundFamily::Kl,
        BoundFamily::LilKl,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BoundFamily::HowardLil => "howard-lil",
            BoundFamily::SuccElimUnion => "succ-elim-union",
            BoundFamily::LilJamieson => "lil-jamieson",
            BoundFamily::KaufmannUnion => "kaufmann-union",
            BoundFamily::Kl => "kl",
            BoundFamily::LilKl => "lil-kl",
        }
    }

    /// KL families produce asymmetric intervals around the empirical mean.
    pub fn is_kl(self) -> bool {
        matches!(self, BoundFamily::Kl | BoundFamily::LilKl)
    }
}

impl fmt::Display for BoundFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BoundFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BoundFamily::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::Parameter(format!("unknown bound family {s:?}")))
    }
}

/// A bound family bound to a reward range `[0, b]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceSchedule<T> {
    family: BoundFamily,
    reward_range: T,
    kappa: Option<T>,
    #[serde(default)]
    pub notes: String,
}

impl<T: Scalar> ConfidenceSchedule<T> {
    pub fn new(family: BoundFamily, reward_range: T) -> Result<Self> {
        if family == BoundFamily::LilKl {
            return Err(Error::Parameter(
                "lil-kl has no default kappa; use ConfidenceSchedule::with_kappa".into(),
            ));
        }
        Self::build(family, reward_range, None)
    }

    /// Builds a schedule for any family; `kappa` is required by `lil-kl` and ignored otherwise.
    pub fn with_kappa(family: BoundFamily, reward_range: T, kappa: Option<T>) -> Result<Self> {
        if family == BoundFamily::LilKl {
            match kappa {
                Some(k) if k > T::zero() && k.is_finite() => {}
                _ => return Err(Error::Parameter("lil-kl needs a positive kappa".into())),
            }
        }
        Self::build(family, reward_range, kappa)
    }

    fn build(family: BoundFamily, reward_range: T, kappa: Option<T>) -> Result<Self> {
        if !(reward_range > T::zero()) || !reward_range.is_finite() {
            return Err(Error::Parameter(format!("reward range must be positive, got {reward_range}")));
        }
        Ok(Self { family, reward_range, kappa, notes: String::new() })
    }

    pub fn family(&self) -> BoundFamily {
        self.family
    }

    pub fn reward_range(&self) -> T {
        self.reward_range
    }

    pub fn kappa(&self) -> Option<T> {
        self.kappa
    }

    /// Smallest count at which the family's raw formula is well defined and
    /// non-increasing. Below it [`width`](Self::width) evaluates a clamped form.
    pub fn n_min(&self) -> u64 {
        match self.family {
            BoundFamily::HowardLil => {
                let b2 = self.reward_range.as_f64().powi(2);
                (2.0 * std::f64::consts::E / b2).ceil().max(1.0) as u64
            }
            BoundFamily::SuccElimUnion => 2,
            BoundFamily::LilJamieson => (std::f64::consts::E / 0.2585).ceil() as u64,
            BoundFamily::KaufmannUnion | BoundFamily::Kl | BoundFamily::LilKl => 1,
        }
    }

    /// `B(n, delta)`.
    pub fn width(&self, n: u64, delta: T) -> Result<T> {
        check_args(n, delta)?;
        Ok(self.width_unchecked(n, delta))
    }

    pub(crate) fn width_unchecked(&self, n: u64, delta: T) -> T {
        let b = self.reward_range;
        let nf = T::count(n);
        let e = T::E();
        match self.family {
            BoundFamily::HowardLil => {
                let inner = (b * b * nf / T::lit(2.0)).max(e);
                let num = inner.ln().ln() + T::lit(0.72) * (T::lit(5.2) / delta).ln();
                T::lit(0.85) * b * (num / nf).sqrt()
            }
            BoundFamily::SuccElimUnion => {
                let raw = |m: T| {
                    let pi2 = T::PI() * T::PI();
                    (((pi2 * m * m) / (T::lit(3.0) * delta)).ln() / (T::lit(2.0) * m)).sqrt()
                };
                let w = if n < 2 { raw(nf).max(raw(T::lit(2.0))) } else { raw(nf) };
                b * w
            }
            BoundFamily::LilJamieson => {
                let inner = (T::lit(0.2585) * nf).max(e);
                let num = inner.ln().ln() + T::lit(0.96) * (T::lit(67.59) / delta).ln();
                T::lit(0.85) * b * (num / nf).sqrt()
            }
            BoundFamily::KaufmannUnion => {
                let x = T::lit(405.0) * nf.powf(T::lit(1.1)) / delta;
                b * ((x * x.ln()).ln() / (T::lit(2.0) * nf)).sqrt()
            }
            BoundFamily::Kl | BoundFamily::LilKl => {
                b * (self.threshold_unchecked(n, delta) / (T::lit(2.0) * nf)).sqrt()
            }
        }
    }

    /// Divergence budget `d(n, delta)` of the KL families (in normalised `[0, 1]` units).
    pub fn threshold(&self, n: u64, delta: T) -> Result<T> {
        check_args(n, delta)?;
        if !self.family.is_kl() {
            return Err(Error::Parameter(format!("{} is not a KL family", self.family)));
        }
        Ok(self.threshold_unchecked(n, delta))
    }

    fn threshold_unchecked(&self, n: u64, delta: T) -> T {
        let nf = T::count(n);
        match self.family {
            BoundFamily::LilKl => {
                let kappa = self.kappa.unwrap_or_else(T::one);
                let arg = kappa * (T::lit(2.0) * nf / delta).log2();
                (T::lit(1.86) * arg.max(T::one()).ln()).max(T::zero())
            }
            _ => {
                let x = T::lit(405.5) * nf.powf(T::lit(1.1)) / delta;
                T::lit(2.0) * x.ln() + x.ln().ln()
            }
        }
    }

    /// Upper confidence index around `center` after `n` samples.
    pub fn upper(&self, center: T, n: u64, delta: T) -> Result<T> {
        check_args(n, delta)?;
        Ok(self.upper_unchecked(center, n, delta))
    }

    /// Lower confidence index around `center` after `n` samples.
    pub fn lower(&self, center: T, n: u64, delta: T) -> Result<T> {
        check_args(n, delta)?;
        Ok(self.lower_unchecked(center, n, delta))
    }

    pub(crate) fn upper_unchecked(&self, center: T, n: u64, delta: T) -> T {
        match self.normalised(center) {
            Some(x) if self.family.is_kl() => {
                let d = self.threshold_unchecked(n, delta);
                self.reward_range * kl_upper_unchecked(x, n, d)
            }
            _ => center + self.width_unchecked(n, delta),
        }
    }

    pub(crate) fn lower_unchecked(&self, center: T, n: u64, delta: T) -> T {
        match self.normalised(center) {
            Some(x) if self.family.is_kl() => {
                let d = self.threshold_unchecked(n, delta);
                self.reward_range * kl_lower_unchecked(x, n, d)
            }
            _ => center - self.width_unchecked(n, delta),
        }
    }

    fn normalised(&self, center: T) -> Option<T> {
        let x = center / self.reward_range;
        (x >= T::zero() && x <= T::one()).then_some(x)
    }

    /// Whether `mean` lies in `[lower, upper]` around `mu_hat`.
    ///
    /// KL families are tested through the divergence directly,
    /// `n * kl(mu_hat, mean) <= d`, which is the exact set the bisection
    /// in [`kl_upper_index`] / [`kl_lower_index`] approximates.
    pub fn covers(&self, mean: T, mu_hat: T, n: u64, delta: T) -> bool {
        if self.family.is_kl() {
            if let (Some(x), Some(m)) = (self.normalised(mu_hat), self.normalised(mean)) {
                let d = self.threshold_unchecked(n, delta);
                return T::count(n) * bernoulli_kl(x, m) <= d;
            }
        }
        (mean - mu_hat).abs() <= self.width_unchecked(n, delta)
    }
}

fn check_args<T: Scalar>(n: u64, delta: T) -> Result<()> {
    if n == 0 {
        return Err(Error::Parameter("confidence width needs n >= 1".into()));
    }
    check_delta(delta)
}

pub(crate) fn check_delta<T: Scalar>(delta: T) -> Result<()> {
    if delta > T::zero() && delta < T::one() {
        Ok(())
    } else {
        Err(Error::Parameter(format!("delta must lie in (0, 1), got {delta}")))
    }
}

/// Bernoulli KL divergence `x ln(x/y) + (1-x) ln((1-x)/(1-y))`, with `0 ln 0 = 0`.
pub fn bernoulli_kl<T: Scalar>(x: T, y: T) -> T {
    fn term<T: Scalar>(p: T, q: T) -> T {
        if p <= T::zero() {
            T::zero()
        } else if q <= T::zero() {
            T::infinity()
        } else {
            p * (p / q).ln()
        }
    }
    term(x, y) + term(T::one() - x, T::one() - y)
}

/// `sup { j >= mu_hat : n kl(mu_hat, j) <= threshold }`, by bisection.
pub fn kl_upper_index<T: Scalar>(mu_hat: T, n: u64, threshold: T) -> Result<T> {
    check_kl_args(mu_hat, n, threshold)?;
    Ok(kl_upper_unchecked(mu_hat, n, threshold))
}

/// `inf { j <= mu_hat : n kl(mu_hat, j) <= threshold }`, by bisection.
pub fn kl_lower_index<T: Scalar>(mu_hat: T, n: u64, threshold: T) -> Result<T> {
    check_kl_args(mu_hat, n, threshold)?;
    Ok(kl_lower_unchecked(mu_hat, n, threshold))
}

fn check_kl_args<T: Scalar>(mu_hat: T, n: u64, threshold: T) -> Result<()> {
    if !(mu_hat >= T::zero() && mu_hat <= T::one()) {
        return Err(Error::Parameter(format!("mu_hat must lie in [0, 1], got {mu_hat}")));
    }
    if n == 0 {
        return Err(Error::Parameter("KL index needs n >= 1".into()));
    }
    if !(threshold >= T::zero()) {
        return Err(Error::Parameter(format!("threshold must be non-negative, got {threshold}")));
    }
    Ok(())
}

fn kl_upper_unchecked<T: Scalar>(mu_hat: T, n: u64, threshold: T) -> T {
    let nf = T::count(n);
    let feasible = |j: T| nf * bernoulli_kl(mu_hat, j) <= threshold;
    if threshold <= T::zero() {
        return mu_hat;
    }
    if feasible(T::one()) {
        return T::one();
    }
    bisect(mu_hat, T::one(), feasible)
}

fn kl_lower_unchecked<T: Scalar>(mu_hat: T, n: u64, threshold: T) -> T {
    let nf = T::count(n);
    let feasible = |j: T| nf * bernoulli_kl(mu_hat, j) <= threshold;
    if threshold <= T::zero() {
        return mu_hat;
    }
    if feasible(T::zero()) {
        return T::zero();
    }
    bisect(mu_hat, T::zero(), feasible)
}

/// Moves from a feasible `inside` towards an infeasible `outside`, returning
/// the last feasible point once the bracket is narrower than the tolerance.
fn bisect<T: Scalar>(mut inside: T, mut outside: T, feasible: impl Fn(T) -> bool) -> T {
    let tol = T::lit(KL_TOLERANCE);
    for _ in 0..KL_MAX_ITERATIONS {
        if (outside - inside).abs() <= tol {
            break;
        }
        let mid = (inside + outside) / T::lit(2.0);
        if feasible(mid) {
            inside = mid;
        } else {
            outside = mid;
        }
    }
    inside
}

/// Outcome of an anytime-coverage Monte-Carlo run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub family: BoundFamily,
    pub delta: f64,
    pub streams: usize,
    pub horizon: u64,
    /// Streams in which the mean left the interval at least once.
    pub exceedances: usize,
    pub rate: f64,
    /// `delta + 3 sqrt(delta (1 - delta) / streams)`.
    pub limit: f64,
    pub pass: bool,
}

/// Runs `streams` Bernoulli streams on `{0, b}` with mean `b / 2` for
/// `horizon` samples each and counts the streams in which the mean ever
/// escapes the schedule's interval.
pub fn coverage_check<T: Scalar>(
    schedule: &ConfidenceSchedule<T>,
    delta: T,
    streams: usize,
    horizon: u64,
    master_seed: u64,
) -> Result<CoverageReport> {
    check_delta(delta)?;
    if streams == 0 || horizon == 0 {
        return Err(Error::Parameter("coverage check needs streams >= 1 and horizon >= 1".into()));
    }
    let b = schedule.reward_range();
    let mean = b / T::lit(2.0);
    let exceedances = (0..streams)
        .into_par_iter()
        .filter(|&s| {
            let mut rng = rng::stream(master_seed, s as u64);
            let mut sum = T::zero();
            for n in 1..=horizon {
                if rng.gen::<bool>() {
                    sum = sum + b;
                }
                let mu_hat = sum / T::count(n);
                if !schedule.covers(mean, mu_hat, n, delta) {
                    return true;
                }
            }
            false
        })
        .count();
    let d = delta.as_f64();
    let rate = exceedances as f64 / streams as f64;
    let limit = d + 3.0 * (d * (1.0 - d) / streams as f64).sqrt();
    Ok(CoverageReport {
        family: schedule.family(),
        delta: d,
        streams,
        horizon,
        exceedances,
        rate,
        limit,
        pass: rate <= limit,
    })
}
