//! Idle-phase improvement: suffix-minimum envelope of
//! `φ(z) = κ_s + v(z) + z²/2 − ρ z` over `z >= Δ`.

use super::kernel::QuadratureKernel;
use crate::grids::Grids;

/// Where the idle controller samples next.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SampleTarget {
    /// sample when the AoI reaches state node `i`
    Node(usize),
    /// sample at an AoI beyond `y_cut` (far-field region)
    Far(f64),
}

impl SampleTarget {
    pub fn aoi(self, dt: f64) -> f64 {
        match self {
            SampleTarget::Node(i) => i as f64 * dt,
            SampleTarget::Far(z) => z,
        }
    }
}

#[derive(Debug, Clone)]
pub struct IdleEnvelope {
    /// `m_i = min_{z >= y_i} φ(z)` including the analytic tail candidate
    pub m: Vec<f64>,
    /// minimiser of `m_i`
    pub z: Vec<SampleTarget>,
    /// unconstrained far-field minimiser `ρ − s`; beyond `y_cut` the target
    /// is `max(Δ, far_target)`
    pub far_target: f64,
    /// `h_I(t_j)` on every action node `0..=n`
    pub h: Vec<f64>,
    dt: f64,
    far: FarIdle,
}

/// Closed form of `h_I` where the far-field closure applies.
#[derive(Debug, Clone, Copy)]
struct FarIdle {
    rho: f64,
    kappa_s: f64,
    v_last: f64,
    slope: f64,
    y_m: f64,
    target: f64,
}

impl FarIdle {
    fn h(&self, t: f64) -> f64 {
        let z = t.max(self.target);
        self.rho * t - 0.5 * t * t
            + self.kappa_s
            + self.v_last
            + self.slope * (z - self.y_m)
            + 0.5 * z * z
            - self.rho * z
    }
}

impl IdleEnvelope {
    /// `h_I(t)` at any `t >= 0`: linear between action nodes (the
    /// interpolant the quadrature integrates exactly), closed form beyond.
    pub fn h_at(&self, t: f64) -> f64 {
        let n = self.h.len() - 1;
        let x = t / self.dt;
        if x >= n as f64 {
            return self.far.h(t);
        }
        let j = x.floor().max(0.0) as usize;
        let frac = x - j as f64;
        self.h[j] + frac * (self.h[j + 1] - self.h[j])
    }
}

/// Builds the idle envelope from the current `(v, ρ)`.
///
/// `n` is the last action node on which `h_I` is tabulated.
pub fn idle_envelope(v: &[f64], rho: f64, kappa_s: f64, grids: &Grids, n: usize) -> IdleEnvelope {
    let dt = grids.dt();
    let m_last = grids.m();
    debug_assert_eq!(v.len(), m_last + 1);
    let s = grids.slope;
    let y_m = grids.y_cut();
    let phi = |i: usize| {
        let y = i as f64 * dt;
        kappa_s + v[i] + 0.5 * y * y - rho * y
    };

    let far_target = rho - s;
    let z_tail = y_m.max(far_target);
    let phi_tail = kappa_s + v[m_last] + s * (z_tail - y_m) + 0.5 * z_tail * z_tail - rho * z_tail;

    let mut m = vec![0.0; m_last + 1];
    let mut arg = vec![0usize; m_last + 1];
    let mut best = f64::INFINITY;
    let mut best_at = m_last;
    for i in (0..=m_last).rev() {
        let p = phi(i);
        // `<=` keeps the smallest index on ties
        if p <= best {
            best = p;
            best_at = i;
        }
        m[i] = best;
        arg[i] = best_at;
    }
    let z: Vec<SampleTarget> = (0..=m_last)
        .map(|i| {
            if phi_tail < m[i] {
                m[i] = phi_tail;
                SampleTarget::Far(z_tail)
            } else {
                SampleTarget::Node(arg[i])
            }
        })
        .collect();

    let far = FarIdle {
        rho,
        kappa_s,
        v_last: v[m_last],
        slope: s,
        y_m,
        target: far_target,
    };
    let h = (0..=n)
        .map(|j| {
            let t = j as f64 * dt;
            if j <= m_last {
                rho * t - 0.5 * t * t + m[j]
            } else {
                far.h(t)
            }
        })
        .collect();

    IdleEnvelope {
        m,
        z,
        far_target,
        h,
        dt,
        far,
    }
}

/// Cumulative `I_fh(t_j) = ∫₀^{t_j} f h_I`, plus its limit as `t → ∞`.
#[derive(Debug, Clone)]
pub struct IdleIntegral {
    pub prefix: Vec<f64>,
    pub total: f64,
}

pub fn idle_integral(
    kernel: &QuadratureKernel,
    env: &IdleEnvelope,
    v_last: f64,
    rho: f64,
    kappa_s: f64,
    grids: &Grids,
) -> IdleIntegral {
    let prefix = kernel.prefix(&env.h);
    let far = kernel.far_deliveries(env.far_target, grids.y_cut());
    // h_I = κ_s + v(z) + (t w + w²/2) − ρ w, with v(z) = v_M + s (z − y_M)
    let beyond = (kappa_s + v_last) * far.mass + grids.slope * far.overshoot + far.idle_area
        - rho * far.wait;
    IdleIntegral {
        total: prefix[kernel.n] + beyond,
        prefix,
    }
}
