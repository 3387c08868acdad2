//! Busy-phase improvement over the preemption candidates.

use rayon::prelude::*;

use super::idle::IdleIntegral;
use super::kernel::QuadratureKernel;
use crate::grids::{far_field_value, Grids, Theta};

/// Everything `Q(y, θ; ρ)` depends on for one improvement sweep.
#[derive(Debug, Clone, Copy)]
pub struct BusyContext<'a> {
    pub kernel: &'a QuadratureKernel,
    pub grids: &'a Grids,
    pub v: &'a [f64],
    pub rho: f64,
    pub fh: &'a IdleIntegral,
    pub kappa_p: f64,
}

/// `Q(y, θ; ρ) = (y − ρ) A(θ) + J1(θ) + I_fh(θ) + F̄(θ) (κ_p + v̂(y + θ))`.
///
/// `v̂` is the round-to-grid lookup with far-field closure. For
/// `θ = Never` the last term vanishes and the integrals take their limits.
pub fn eval_q(ctx: &BusyContext<'_>, y: f64, theta: Theta) -> f64 {
    let (a, j1, tail) = ctx.kernel.at(theta);
    match theta {
        Theta::Never => (y - ctx.rho) * a + j1 + ctx.fh.total,
        Theta::Finite(j) => {
            let target = y + j as f64 * ctx.kernel.dt;
            let v_next = far_field_value(ctx.v, target, ctx.grids.slope, ctx.kernel.dt)
                .expect("nonnegative busy-start AoI");
            (y - ctx.rho) * a + j1 + ctx.fh.prefix[j] + tail * (ctx.kappa_p + v_next)
        }
    }
}

fn argmin_at(ctx: &BusyContext<'_>, i: usize) -> Theta {
    let y = ctx.grids.state.point(i);
    let mut best = f64::INFINITY;
    let mut best_theta = Theta::Never;
    for &c in &ctx.grids.candidates {
        let q = eval_q(ctx, y, c);
        // strict: earlier (smaller) candidates win ties, Never is last
        if q < best {
            best = q;
            best_theta = c;
        }
    }
    best_theta
}

/// `θ(y_i) = argmin_θ Q(y_i, θ; ρ)` for every state node, in parallel.
pub fn busy_improve(ctx: &BusyContext<'_>) -> Vec<Theta> {
    (0..=ctx.grids.m())
        .into_par_iter()
        .map(|i| argmin_at(ctx, i))
        .collect()
}
