//! Distribution tables on the action grid `t_j = j·dt`, `j = 0..=n`.
//!
//! Integrals `∫₀^{t_J} f(t) φ(t) dt` of nodal functions use the product
//! trapezoid rule: `φ` is interpolated linearly on each cell and integrated
//! exactly against `F`. The cell weights only need the cell mass and the
//! cell's first moment, so they are nonnegative and sum to `F(t_J)` exactly.
//! Mass beyond `t_n` is handled analytically by [`QuadratureKernel::far_deliveries`].

use crate::distributions::ServiceDistribution;
use crate::grids::{Grids, Theta};

#[derive(Debug, Clone)]
pub struct QuadratureKernel {
    pub dt: f64,
    /// last action node
    pub n: usize,
    pub mean: f64,
    pub second: f64,
    /// `F̄(t_j)`
    pub tail: Vec<f64>,
    /// `A(t_j)`
    pub a: Vec<f64>,
    /// `J1(t_j)`
    pub j1: Vec<f64>,
    /// weight of cell `j` on its left node
    pub w_left: Vec<f64>,
    /// weight of cell `j` on its right node
    pub w_right: Vec<f64>,
    dist: ServiceDistribution,
}

/// Integrals over deliveries beyond the last action node when the idle
/// target there is `z(t) = max(t, c)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FarDeliveries {
    /// `P(Y > t_n)`
    pub mass: f64,
    /// `∫ f · w`
    pub wait: f64,
    /// `∫ f · (t w + w²/2)`
    pub idle_area: f64,
    /// `∫ f · (z - y_M)` (multiply by the slope for the far-field offset)
    pub overshoot: f64,
}

impl QuadratureKernel {
    pub fn new(dist: &ServiceDistribution, grids: &Grids) -> Self {
        let dt = grids.dt();
        let n = grids.horizon;
        let mut tail = Vec::with_capacity(n + 1);
        let mut a = Vec::with_capacity(n + 1);
        let mut j1 = Vec::with_capacity(n + 1);
        for j in 0..=n {
            let t = j as f64 * dt;
            let (aj, jj) = dist.partial_expectations(t);
            tail.push(if j == 0 { dist.tail(0.0) } else { dist.tail(t) });
            a.push(aj);
            j1.push(jj);
        }
        let mut w_left = Vec::with_capacity(n);
        let mut w_right = Vec::with_capacity(n);
        for j in 0..n {
            let lo = j as f64 * dt;
            let hi = (j + 1) as f64 * dt;
            // cell 0 also carries any atom at zero
            let (mass, first) = if j == 0 {
                (dist.lower_moment(0, hi), dist.lower_moment(1, hi))
            } else {
                (dist.band_moment(0, lo, hi), dist.band_moment(1, lo, hi))
            };
            if mass <= 0.0 {
                w_left.push(0.0);
                w_right.push(0.0);
                continue;
            }
            let centre = (first / mass).clamp(lo, hi);
            let right = mass * (centre - lo) / dt;
            w_left.push(mass - right);
            w_right.push(right);
        }
        let m = dist.moments();
        Self {
            dt,
            n,
            mean: m.mean,
            second: m.second,
            tail,
            a,
            j1,
            w_left,
            w_right,
            dist: dist.clone(),
        }
    }

    pub fn distribution(&self) -> &ServiceDistribution {
        &self.dist
    }

    pub fn t(&self, j: usize) -> f64 {
        j as f64 * self.dt
    }

    /// `(A(θ), J1(θ), F̄(θ))` at a candidate.
    pub fn at(&self, theta: Theta) -> (f64, f64, f64) {
        match theta {
            Theta::Finite(j) => (self.a[j], self.j1[j], self.tail[j]),
            Theta::Never => (self.mean, 0.5 * self.second, 0.0),
        }
    }

    /// `P[J] = ∫₀^{t_J} f φ` for every `J`, for a nodal function `φ` on `0..=n`.
    pub fn prefix(&self, phi: &[f64]) -> Vec<f64> {
        debug_assert_eq!(phi.len(), self.n + 1);
        let mut out = Vec::with_capacity(self.n + 1);
        let mut acc = 0.0;
        out.push(0.0);
        for j in 0..self.n {
            acc += self.w_left[j] * phi[j] + self.w_right[j] * phi[j + 1];
            out.push(acc);
        }
        out
    }

    /// Deliveries after `t_n` under the far-field idle rule `z(t) = max(t, c)`;
    /// `y_m` is the state-grid extent.
    pub fn far_deliveries(&self, c: f64, y_m: f64) -> FarDeliveries {
        let t_n = self.t(self.n);
        let split = c.max(t_n);
        let d = &self.dist;
        // region 1: (t_n, split], target c
        let m0 = d.band_moment(0, t_n, split);
        let m1 = d.band_moment(1, t_n, split);
        let m2 = d.band_moment(2, t_n, split);
        // region 2: (split, ∞), target t
        let q0 = d.upper_moment(0, split);
        let q1 = d.upper_moment(1, split);
        FarDeliveries {
            mass: m0 + q0,
            wait: c * m0 - m1,
            idle_area: 0.5 * (c * c * m0 - m2),
            overshoot: (c - y_m) * m0 + (q1 - y_m * q0),
        }
    }
}
