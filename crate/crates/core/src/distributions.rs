//! Service-time distributions.
//!
//! Every quantity the solver and simulator consume is exposed here: tail,
//! density, hazard, residual life, the truncated moments `A(θ)` and `J1(θ)`,
//! partial moments on either side of a cut, and an inverse-CDF sampler.
//! Closed forms are used for the three parametric families; the tabulated
//! family is a piecewise-linear empirical CDF and every integral against it
//! is evaluated exactly segment by segment.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::path::Path;
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

/// Tail probabilities at or below this value are treated as zero.
pub const TAIL_FLOOR: f64 = 1e-300;

/// Minimum number of observations accepted by [`ServiceDistribution::from_samples`].
pub const MIN_TRACE_SAMPLES: usize = 100;

#[derive(Debug, Error)]
pub enum DistributionError {
    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("Lomax shape {shape} <= 2 gives an infinite second moment")]
    InfiniteSecondMoment { shape: f64 },
    #[error("hazard undefined at service age {age}: tail probability below {TAIL_FLOOR:e}")]
    BeyondSupport { age: f64 },
    #[error("line {line}: cannot parse `{content}` as a number")]
    Parse { line: usize, content: String },
    #[error("line {line}: negative service time {value}")]
    Negative { line: usize, value: f64 },
    #[error("line {line}: non-finite service time")]
    NonFinite { line: usize },
    #[error("too few samples: found {found}, need at least {required}")]
    TooFewSamples { found: usize, required: usize },
    #[error("cannot read trace: {0}")]
    Io(#[from] std::io::Error),
}

/// First and second moments of a service time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub mean: f64,
    pub second: f64,
}

impl Moments {
    pub fn variance(&self) -> f64 {
        self.second - self.mean * self.mean
    }
}

/// Parameterisation of a [`ServiceDistribution`].
#[derive(Debug, Clone, PartialEq)]
pub enum Family {
    Exponential {
        rate: f64,
    },
    /// Pareto type II with tail `(scale / (scale + t))^shape`.
    Lomax {
        scale: f64,
        shape: f64,
    },
    /// `ln Y ~ N(mu, sigma2)`.
    LogNormal {
        mu: f64,
        sigma2: f64,
    },
    Tabulated(Arc<Tabulated>),
}

/// A validated service-time distribution. Immutable and cheap to clone.
#[derive(Debug, Clone, PartialEq)]
pub struct ServiceDistribution {
    family: Family,
    moments: Moments,
}

fn positive(name: &'static str, value: f64) -> Result<f64, DistributionError> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(DistributionError::InvalidParameter {
            name,
            value,
            reason: "must be finite and > 0",
        })
    }
}

/// Standard normal CDF through `erfc`, accurate in both tails.
fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

fn normal_sf(x: f64) -> f64 {
    0.5 * libm::erfc(x * FRAC_1_SQRT_2)
}

impl ServiceDistribution {
    pub fn exponential(rate: f64) -> Result<Self, DistributionError> {
        let rate = positive("rate", rate)?;
        Ok(Self::with_family(Family::Exponential { rate }))
    }

    pub fn lomax(scale: f64, shape: f64) -> Result<Self, DistributionError> {
        let scale = positive("scale", scale)?;
        let shape = positive("shape", shape)?;
        if shape <= 2.0 {
            return Err(DistributionError::InfiniteSecondMoment { shape });
        }
        Ok(Self::with_family(Family::Lomax { scale, shape }))
    }

    pub fn log_normal(mu: f64, sigma2: f64) -> Result<Self, DistributionError> {
        if !mu.is_finite() {
            return Err(DistributionError::InvalidParameter {
                name: "mu",
                value: mu,
                reason: "must be finite",
            });
        }
        let sigma2 = positive("sigma2", sigma2)?;
        Ok(Self::with_family(Family::LogNormal { mu, sigma2 }))
    }

    /// Empirical distribution from raw observations.
    pub fn from_values(values: Vec<f64>) -> Result<Self, DistributionError> {
        for (k, &v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(DistributionError::NonFinite { line: k + 1 });
            }
            if v < 0.0 {
                return Err(DistributionError::Negative {
                    line: k + 1,
                    value: v,
                });
            }
        }
        if values.len() < MIN_TRACE_SAMPLES {
            return Err(DistributionError::TooFewSamples {
                found: values.len(),
                required: MIN_TRACE_SAMPLES,
            });
        }
        Ok(Self::with_family(Family::Tabulated(Arc::new(
            Tabulated::new(values),
        ))))
    }

    /// Reads a trace file: one nonnegative decimal per line, `#` comments
    /// and blank lines ignored.
    pub fn from_samples(path: impl AsRef<Path>) -> Result<Self, DistributionError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_trace_text(&text)
    }

    pub fn from_trace_text(text: &str) -> Result<Self, DistributionError> {
        let mut values = Vec::new();
        for (k, raw) in text.lines().enumerate() {
            let line = k + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let v: f64 = trimmed.parse().map_err(|_| DistributionError::Parse {
                line,
                content: trimmed.to_string(),
            })?;
            if !v.is_finite() {
                return Err(DistributionError::NonFinite { line });
            }
            if v < 0.0 {
                return Err(DistributionError::Negative { line, value: v });
            }
            values.push(v);
        }
        if values.len() < MIN_TRACE_SAMPLES {
            return Err(DistributionError::TooFewSamples {
                found: values.len(),
                required: MIN_TRACE_SAMPLES,
            });
        }
        Ok(Self::with_family(Family::Tabulated(Arc::new(
            Tabulated::new(values),
        ))))
    }

    fn with_family(family: Family) -> Self {
        let moments = match &family {
            Family::Exponential { rate } => Moments {
                mean: 1.0 / rate,
                second: 2.0 / (rate * rate),
            },
            Family::Lomax { scale, shape } => Moments {
                mean: scale / (shape - 1.0),
                second: 2.0 * scale * scale / ((shape - 1.0) * (shape - 2.0)),
            },
            Family::LogNormal { mu, sigma2 } => Moments {
                mean: (mu + 0.5 * sigma2).exp(),
                second: (2.0 * mu + 2.0 * sigma2).exp(),
            },
            Family::Tabulated(tab) => Moments {
                mean: tab.total[1],
                second: tab.total[2],
            },
        };
        Self { family, moments }
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    /// Short family label used in reports.
    pub fn label(&self) -> String {
        match &self.family {
            Family::Exponential { rate } => format!("Exponential(rate={rate})"),
            Family::Lomax { scale, shape } => format!("Lomax(scale={scale}, shape={shape})"),
            Family::LogNormal { mu, sigma2 } => format!("LogNormal(mu={mu}, sigma2={sigma2})"),
            Family::Tabulated(t) => format!("Tabulated(n={})", t.len()),
        }
    }

    /// `(E[Y], E[Y²])`.
    pub fn moments(&self) -> Moments {
        self.moments
    }

    pub fn mean(&self) -> f64 {
        self.moments.mean
    }

    pub fn cdf(&self, t: f64) -> f64 {
        if t <= 0.0 && !matches!(self.family, Family::Tabulated(_)) {
            return 0.0;
        }
        match &self.family {
            Family::Exponential { rate } => -(-rate * t).exp_m1(),
            Family::Lomax { scale, shape } => -(shape * lomax_log_ratio(*scale, t)).exp_m1(),
            Family::LogNormal { mu, sigma2 } => normal_cdf((t.ln() - mu) / sigma2.sqrt()),
            Family::Tabulated(tab) => tab.lower(0, t),
        }
    }

    /// `F̄(t) = P(Y > t)`, computed without forming `1 - F(t)`.
    pub fn tail(&self, t: f64) -> f64 {
        if t <= 0.0 && !matches!(self.family, Family::Tabulated(_)) {
            return 1.0;
        }
        match &self.family {
            Family::Exponential { rate } => (-rate * t).exp(),
            Family::Lomax { scale, shape } => (shape * lomax_log_ratio(*scale, t)).exp(),
            Family::LogNormal { mu, sigma2 } => normal_sf((t.ln() - mu) / sigma2.sqrt()),
            Family::Tabulated(tab) => tab.upper(0, t),
        }
    }

    pub fn density(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        match &self.family {
            Family::Exponential { rate } => rate * (-rate * t).exp(),
            Family::Lomax { scale, shape } => {
                shape / scale * ((shape + 1.0) * lomax_log_ratio(*scale, t)).exp()
            }
            Family::LogNormal { mu, sigma2 } => {
                if t == 0.0 {
                    return 0.0;
                }
                let z = t.ln() - mu;
                (-(z * z) / (2.0 * sigma2)).exp() / (t * (2.0 * PI * sigma2).sqrt())
            }
            Family::Tabulated(tab) => tab.density(t),
        }
    }

    /// Hazard rate `f(b) / F̄(b)`; a box-kernel smoothed log-tail slope for
    /// the tabulated family.
    pub fn hazard(&self, b: f64) -> Result<f64, DistributionError> {
        let tail = self.tail(b);
        if tail.is_nan() || tail <= TAIL_FLOOR {
            return Err(DistributionError::BeyondSupport { age: b });
        }
        Ok(match &self.family {
            Family::Exponential { rate } => *rate,
            Family::Lomax { scale, shape } => shape / (scale + b.max(0.0)),
            Family::LogNormal { .. } => self.density(b) / tail,
            Family::Tabulated(tab) => tab.smoothed_hazard(b),
        })
    }

    /// CDF of the residual life at service age `b`, evaluated at `t`.
    pub fn residual_cdf(&self, b: f64, t: f64) -> Result<f64, DistributionError> {
        let tail_b = self.tail(b);
        if tail_b.is_nan() || tail_b <= TAIL_FLOOR {
            return Err(DistributionError::BeyondSupport { age: b });
        }
        if t <= 0.0 {
            return Ok(0.0);
        }
        // (F(b+t) - F(b)) / F̄(b) = 1 - F̄(b+t)/F̄(b)
        Ok((1.0 - self.tail(b + t) / tail_b).clamp(0.0, 1.0))
    }

    /// `E[Y^k ; Y <= t]` for `k` in `0..=2`.
    pub fn lower_moment(&self, k: usize, t: f64) -> f64 {
        assert!(k <= 2, "partial moments are provided up to order 2");
        if t <= 0.0 && !matches!(self.family, Family::Tabulated(_)) {
            return 0.0;
        }
        if t == f64::INFINITY {
            return self.full_moment(k);
        }
        match &self.family {
            Family::Exponential { rate } => {
                let x = rate * t;
                let e = (-x).exp();
                match k {
                    0 => -(-x).exp_m1(),
                    1 => (-(-x).exp_m1() - x * e) / rate,
                    _ => (2.0 * -(-x).exp_m1() - e * x * (x + 2.0)) / (rate * rate),
                }
            }
            Family::Lomax { scale, shape } => {
                let lr = lomax_log_ratio(*scale, t);
                let tail = (shape * lr).exp();
                match k {
                    0 => -(shape * lr).exp_m1(),
                    1 => lomax_a(*scale, *shape, lr) - t * tail,
                    _ => 2.0 * lomax_j1(*scale, *shape, lr) - t * t * tail,
                }
            }
            Family::LogNormal { mu, sigma2 } => {
                let s = sigma2.sqrt();
                let kf = k as f64;
                let scale = (kf * mu + 0.5 * kf * kf * sigma2).exp();
                scale * normal_cdf((t.ln() - mu - kf * sigma2) / s)
            }
            Family::Tabulated(tab) => tab.lower(k, t),
        }
    }

    /// `E[Y^k ; Y > t]` for `k` in `0..=2`.
    pub fn upper_moment(&self, k: usize, t: f64) -> f64 {
        assert!(k <= 2, "partial moments are provided up to order 2");
        if t <= 0.0 && !matches!(self.family, Family::Tabulated(_)) {
            return self.full_moment(k);
        }
        if t == f64::INFINITY {
            return 0.0;
        }
        match &self.family {
            Family::Exponential { rate } => {
                let e = (-rate * t).exp();
                match k {
                    0 => e,
                    1 => e * (t + 1.0 / rate),
                    _ => e * (t * t + 2.0 * t / rate + 2.0 / (rate * rate)),
                }
            }
            Family::Lomax { scale, shape } => {
                let tail = (shape * lomax_log_ratio(*scale, t)).exp();
                let st = scale + t;
                match k {
                    0 => tail,
                    1 => t * tail + st * tail / (shape - 1.0),
                    _ => {
                        t * t * tail
                            + 2.0
                                * (st * st * tail / (shape - 2.0)
                                    - scale * st * tail / (shape - 1.0))
                    }
                }
            }
            Family::LogNormal { mu, sigma2 } => {
                let s = sigma2.sqrt();
                let kf = k as f64;
                let scale = (kf * mu + 0.5 * kf * kf * sigma2).exp();
                scale * normal_sf((t.ln() - mu - kf * sigma2) / s)
            }
            Family::Tabulated(tab) => tab.upper(k, t),
        }
    }

    /// `E[Y^k ; a < Y <= b]`, taking the difference on whichever side of the
    /// median keeps it free of cancellation.
    pub fn band_moment(&self, k: usize, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        let d = if self.cdf(a) < 0.5 {
            self.lower_moment(k, b) - self.lower_moment(k, a)
        } else {
            self.upper_moment(k, a) - self.upper_moment(k, b)
        };
        d.max(0.0)
    }

    fn full_moment(&self, k: usize) -> f64 {
        match k {
            0 => 1.0,
            1 => self.moments.mean,
            _ => self.moments.second,
        }
    }

    /// `A(θ) = E[min(Y, θ)]` and `J1(θ) = ∫₀^θ t F̄(t) dt`; `θ = ∞` is allowed.
    pub fn partial_expectations(&self, theta: f64) -> (f64, f64) {
        if theta <= 0.0 {
            return (0.0, 0.0);
        }
        if theta == f64::INFINITY {
            return (self.moments.mean, 0.5 * self.moments.second);
        }
        match &self.family {
            Family::Lomax { scale, shape } => {
                let lr = lomax_log_ratio(*scale, theta);
                (lomax_a(*scale, *shape, lr), lomax_j1(*scale, *shape, lr))
            }
            _ => {
                let tail = self.tail(theta);
                let a = self.lower_moment(1, theta) + theta * tail;
                let j1 = 0.5 * (self.lower_moment(2, theta) + theta * theta * tail);
                (a, j1)
            }
        }
    }

    /// Inverse CDF. `u` is clamped to `[0, 1)`.
    pub fn quantile(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0 - f64::EPSILON / 2.0);
        match &self.family {
            Family::Exponential { rate } => -(-u).ln_1p() / rate,
            Family::Lomax { scale, shape } => scale * ((-(-u).ln_1p() / shape).exp_m1()),
            Family::LogNormal { .. } => {
                if u <= 0.0 {
                    return 0.0;
                }
                bisect_increasing(|t| self.cdf(t), u, self.moments.mean)
            }
            Family::Tabulated(tab) => tab.quantile(u),
        }
    }

    /// Smallest `t` with `F̄(t) <= eps`.
    pub fn tail_quantile(&self, eps: f64) -> f64 {
        match &self.family {
            Family::Exponential { rate } => -eps.ln() / rate,
            Family::Lomax { scale, shape } => scale * ((-eps.ln() / shape).exp_m1()),
            Family::LogNormal { .. } => {
                // decreasing tail: bisect on -tail
                bisect_increasing(|t| -self.tail(t), -eps, self.moments.mean)
            }
            Family::Tabulated(tab) => tab.quantile(1.0 - eps),
        }
    }

    /// One draw of `Y`. Deterministic given the generator state.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match &self.family {
            Family::LogNormal { mu, sigma2 } => {
                let z: f64 = rng.sample(StandardNormal);
                (mu + sigma2.sqrt() * z).exp()
            }
            _ => {
                let u: f64 = rng.random();
                self.quantile(u)
            }
        }
    }
}

/// `ln(scale / (scale + t))`.
fn lomax_log_ratio(scale: f64, t: f64) -> f64 {
    -(t / scale).ln_1p()
}

fn lomax_a(scale: f64, shape: f64, lr: f64) -> f64 {
    scale / (shape - 1.0) * -((shape - 1.0) * lr).exp_m1()
}

fn lomax_j1(scale: f64, shape: f64, lr: f64) -> f64 {
    scale
        * scale
        * (((shape - 2.0) * lr).exp_m1() / (2.0 - shape)
            - ((shape - 1.0) * lr).exp_m1() / (1.0 - shape))
}

/// Solves `g(t) = target` for nondecreasing `g` on `(0, ∞)`.
fn bisect_increasing<G: Fn(f64) -> f64>(g: G, target: f64, scale_hint: f64) -> f64 {
    let mut lo = 0.0;
    let mut hi = scale_hint.max(1e-12);
    let mut guard = 0;
    while g(hi) < target && guard < 2000 {
        lo = hi;
        hi *= 2.0;
        guard += 1;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// Piecewise-linear empirical CDF through `(0, 0)` and the order statistics
/// `(x_(k), k/n)`. Repeated observations become atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct Tabulated {
    knots: Vec<f64>,
    /// cumulative `E[Y^k]` over whole segments before knot `i`, for k = 0..=2
    cum: [Vec<f64>; 3],
    total: [f64; 3],
    bandwidth: f64,
}

impl Tabulated {
    fn new(mut values: Vec<f64>) -> Self {
        values.sort_by(|a, b| a.total_cmp(b));
        let n = values.len();
        let mut knots = Vec::with_capacity(n + 1);
        knots.push(0.0);
        knots.extend_from_slice(&values);
        let mass = 1.0 / n as f64;
        let mut cum = [vec![0.0; n + 1], vec![0.0; n + 1], vec![0.0; n + 1]];
        for i in 0..n {
            let (a, b) = (knots[i], knots[i + 1]);
            let seg = [
                mass,
                mass * 0.5 * (a + b),
                mass * (a * a + a * b + b * b) / 3.0,
            ];
            for k in 0..3 {
                cum[k][i + 1] = cum[k][i] + seg[k];
            }
        }
        let total = [cum[0][n], cum[1][n], cum[2][n]];
        let q = |p: f64| values[((p * (n - 1) as f64).round() as usize).min(n - 1)];
        let iqr = q(0.75) - q(0.25);
        let bandwidth = if iqr > 0.0 {
            iqr / 10.0
        } else if values[n - 1] > 0.0 {
            values[n - 1] / 10.0
        } else {
            1e-3
        };
        Self {
            knots,
            cum,
            total,
            bandwidth,
        }
    }

    pub fn len(&self) -> usize {
        self.knots.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn max_value(&self) -> f64 {
        self.knots[self.knots.len() - 1]
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    /// `E[Y^k ; Y <= t]`.
    fn lower(&self, k: usize, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        let n = self.len();
        let s = self.knots.partition_point(|&x| x <= t) - 1;
        if s >= n {
            return self.total[k];
        }
        let (a, b) = (self.knots[s], self.knots[s + 1]);
        let dens = 1.0 / (n as f64 * (b - a));
        let part = match k {
            0 => dens * (t - a),
            1 => dens * 0.5 * (t * t - a * a),
            _ => dens * (t * t * t - a * a * a) / 3.0,
        };
        self.cum[k][s] + part
    }

    fn upper(&self, k: usize, t: f64) -> f64 {
        (self.total[k] - self.lower(k, t)).max(0.0)
    }

    fn density(&self, t: f64) -> f64 {
        let n = self.len();
        if t < 0.0 || t >= self.max_value() {
            return 0.0;
        }
        let s = self.knots.partition_point(|&x| x <= t) - 1;
        if s >= n {
            return 0.0;
        }
        1.0 / (n as f64 * (self.knots[s + 1] - self.knots[s]))
    }

    fn quantile(&self, u: f64) -> f64 {
        let n = self.len();
        let pos = u * n as f64;
        let s = (pos.floor() as usize).min(n - 1);
        let frac = (pos - s as f64).clamp(0.0, 1.0);
        let (a, b) = (self.knots[s], self.knots[s + 1]);
        a + frac * (b - a)
    }

    fn smoothed_hazard(&self, b: f64) -> f64 {
        let h = self.bandwidth;
        let lo = (b - h).max(0.0);
        let mut hi = b + h;
        if self.upper(0, hi) <= TAIL_FLOOR {
            hi = b + 0.5 * (self.max_value() - b);
        }
        if hi <= lo {
            return 0.0;
        }
        let (t_lo, t_hi) = (self.upper(0, lo), self.upper(0, hi));
        if t_hi.is_nan() || t_hi <= TAIL_FLOOR {
            return self.density(b) / self.upper(0, b);
        }
        (t_lo.ln() - t_hi.ln()) / (hi - lo)
    }
}
