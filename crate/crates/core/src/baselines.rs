//! Benchmark policies without preemption.
//!
//! * ZW-NP: sample immediately after every delivery, never preempt.
//! * AoI-NP: wait until the AoI reaches a threshold `β`, never preempt, with
//!   `β` chosen to minimise the renewal-reward average cost.

use serde::Serialize;
use thiserror::Error;

use crate::distributions::ServiceDistribution;

#[derive(Debug, Error, PartialEq)]
pub enum BaselineError {
    #[error("cost `kappa_s` must be finite and >= 0, got {0}")]
    InvalidCost(f64),
    #[error("no interior minimum of the average cost below beta = {beta_hi} after {doublings} doublings")]
    Bracket { beta_hi: f64, doublings: usize },
    #[error(
        "threshold {beta} violates the fixed point max(0, rho - E[Y]) = {expected} (rho = {rho})"
    )]
    FixedPoint { beta: f64, expected: f64, rho: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BaselineName {
    #[serde(rename = "ZW-NP")]
    ZeroWait,
    #[serde(rename = "AoI-NP")]
    AoiNoPreemption,
}

impl BaselineName {
    pub fn as_str(self) -> &'static str {
        match self {
            BaselineName::ZeroWait => "ZW-NP",
            BaselineName::AoiNoPreemption => "AoI-NP",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BaselineResult {
    pub name: BaselineName,
    pub rho: f64,
    /// sampling threshold on the AoI; 0 for zero-wait
    pub beta: f64,
}

/// Renewal-reward cost of sampling immediately on delivery:
/// `(E[Y]² + E[Y²]/2 + κ_s) / E[Y]`.
pub fn zero_wait_cost(dist: &ServiceDistribution, kappa_s: f64) -> f64 {
    let m = dist.moments();
    (m.mean * m.mean + 0.5 * m.second + kappa_s) / m.mean
}

pub fn zero_wait(dist: &ServiceDistribution, kappa_s: f64) -> BaselineResult {
    BaselineResult {
        name: BaselineName::ZeroWait,
        rho: zero_wait_cost(dist, kappa_s),
        beta: 0.0,
    }
}

/// Average cost of the threshold policy `z(Δ) = max(Δ, β)` without preemption.
///
/// A cycle starts at a delivery with AoI `Y'` (the delivered packet's
/// service time), waits `w = (β − Y')⁺`, then serves a fresh `Y`. Every
/// cross term factors into partial moments of `Y'` because `w` depends on
/// `Y'` only.
pub fn threshold_cost(dist: &ServiceDistribution, kappa_s: f64, beta: f64) -> f64 {
    let m = dist.moments();
    let (f, l1, l2) = if beta > 0.0 {
        (
            dist.lower_moment(0, beta),
            dist.lower_moment(1, beta),
            dist.lower_moment(2, beta),
        )
    } else {
        (0.0, 0.0, 0.0)
    };
    let ew = (beta * f - l1).max(0.0);
    let ew2 = (beta * beta * f - 2.0 * beta * l1 + l2).max(0.0);
    let eyw = (beta * l1 - l2).max(0.0);
    let area = eyw + m.mean * m.mean + 0.5 * (ew2 + 2.0 * ew * m.mean + m.second);
    (area + kappa_s) / (ew + m.mean)
}

const GOLDEN_TOL: f64 = 1e-10;
const MAX_DOUBLINGS: usize = 6;

/// Minimises [`threshold_cost`] over `β >= 0` by golden-section search.
pub fn aoi_np_solve(
    dist: &ServiceDistribution,
    kappa_s: f64,
) -> Result<BaselineResult, BaselineError> {
    if !(kappa_s.is_finite() && kappa_s >= 0.0) {
        return Err(BaselineError::InvalidCost(kappa_s));
    }
    let m = dist.moments();
    let cost = |b: f64| threshold_cost(dist, kappa_s, b);
    let mut hi = 10.0 * (m.mean + m.second.sqrt());
    let mut doublings = 0;
    // the minimiser sits at ρ − E[Y] < ρ(0) − E[Y]; demand a clear interior bracket
    while cost(hi) <= cost(0.5 * hi) {
        if doublings == MAX_DOUBLINGS {
            return Err(BaselineError::Bracket {
                beta_hi: hi,
                doublings,
            });
        }
        hi *= 2.0;
        doublings += 1;
    }
    let beta = golden_section(cost, 0.0, hi, GOLDEN_TOL);
    let (beta, rho) = if cost(0.0) <= cost(beta) {
        (0.0, cost(0.0))
    } else {
        (beta, cost(beta))
    };
    let expected = (rho - m.mean).max(0.0);
    // on a flat stretch of ρ(β) (no mass below β) both thresholds are optimal
    let off = (beta - expected).abs() > 1e-4 * (1.0 + rho);
    if off && cost(expected) - rho > 1e-10 * (1.0 + rho) {
        return Err(BaselineError::FixedPoint {
            beta,
            expected,
            rho,
        });
    }
    Ok(BaselineResult {
        name: BaselineName::AoiNoPreemption,
        rho,
        beta,
    })
}

fn golden_section<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a) > tol * (1.0 + a.abs() + b.abs()) {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}
