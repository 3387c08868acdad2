//! Average-cost policy iteration for joint sampling and preemption.
//!
//! Each sweep builds the idle envelope from the current `(v, ρ)`, picks the
//! busy-phase threshold minimising `Q(y, θ; ρ)` at every state node, and
//! evaluates the resulting stationary policy by solving its Poisson
//! equation with the far-field slope closure.

mod busy;
mod evaluate;
mod idle;
mod kernel;
mod stopping;

use std::io::{self, Write};

use thiserror::Error;

pub use busy::{busy_improve, eval_q, BusyContext};
pub use evaluate::{assemble, policy_evaluate, residual, Evaluation, PoissonRows, RESIDUAL_TOL};
pub use idle::{idle_envelope, idle_integral, IdleEnvelope, IdleIntegral, SampleTarget};
pub use kernel::{FarDeliveries, QuadratureKernel};
pub use stopping::exp_stopping_objective;

use crate::distributions::ServiceDistribution;
use crate::grids::{GridError, GridSpec, Grids, Theta};
use crate::report::fmt_sig;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("cost `{name}` must be finite and >= 0, got {value}")]
    InvalidCost { name: &'static str, value: f64 },
    #[error("Poisson system is singular or ill-conditioned (pivot ratio {condition:e}); the policy is degenerate")]
    Singular { condition: f64 },
    #[error("Poisson residual {residual:e} exceeds {bound:e} (pivot ratio {condition:e})")]
    Residual {
        residual: f64,
        bound: f64,
        condition: f64,
    },
    #[error("degenerate policy: preempt after one step everywhere with zero idle waiting; costs are too small for dt")]
    DegeneratePolicy,
}

/// Stationary sampling/preemption policy on the state grid.
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryPolicy {
    pub dt: f64,
    /// sampling target per state node, `z(y_i) >= y_i`
    pub z: Vec<SampleTarget>,
    /// beyond `y_cut` the idle target is `max(Δ, far_target)`
    pub far_target: f64,
    /// preemption threshold per state node
    pub theta: Vec<Theta>,
}

impl StationaryPolicy {
    pub fn m(&self) -> usize {
        self.z.len() - 1
    }

    pub fn y_cut(&self) -> f64 {
        self.m() as f64 * self.dt
    }

    fn node(&self, y: f64) -> usize {
        let x = (y / self.dt - 0.5).ceil();
        if x <= 0.0 {
            0
        } else {
            (x as usize).min(self.m())
        }
    }

    /// AoI at which to sample when idle at AoI `aoi` (nearest-node lookup,
    /// far-field rule beyond the grid).
    pub fn sample_at(&self, aoi: f64) -> f64 {
        let z = if aoi <= self.y_cut() {
            self.z[self.node(aoi)].aoi(self.dt)
        } else {
            self.far_target
        };
        z.max(aoi)
    }

    /// Preemption threshold for a busy period started at AoI `y`; `None`
    /// means never preempt. Beyond the grid the last node's rule applies.
    pub fn preempt_after(&self, y: f64) -> Option<f64> {
        match self.theta[self.node(y.min(self.y_cut()))] {
            Theta::Finite(j) => Some(j as f64 * self.dt),
            Theta::Never => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub kappa_s: f64,
    pub kappa_p: f64,
    /// value tolerance, scaled by `1 + |v(y_M)|`
    pub eps_v: f64,
    pub eps_rho: f64,
    pub max_iter: usize,
}

impl SolverConfig {
    pub fn new(kappa_s: f64, kappa_p: f64) -> Self {
        Self {
            kappa_s,
            kappa_p,
            eps_v: 1e-6,
            eps_rho: 1e-8,
            max_iter: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub rho: f64,
    /// `‖v⁽ᵏ⁺¹⁾ − v⁽ᵏ⁾‖∞`
    pub dv: f64,
    /// `|ρ⁽ᵏ⁺¹⁾ − ρ⁽ᵏ⁾|`
    pub drho: f64,
    pub theta_changes: usize,
    pub system_residual: f64,
    pub bands: usize,
}

#[derive(Debug, Clone)]
pub struct SolvedPolicy {
    pub policy: StationaryPolicy,
    pub rho: f64,
    /// relative value on the state grid, `v[0] = 0`
    pub v: Vec<f64>,
    /// idle relative value `h_I(t_j)` on the action nodes
    pub h_idle: Vec<f64>,
    pub iterations: usize,
    pub residuals: Vec<IterationRecord>,
    pub converged: bool,
    pub grids: Grids,
}

impl SolvedPolicy {
    pub fn y(&self, i: usize) -> f64 {
        i as f64 * self.policy.dt
    }

    /// CSV `y,v,z,theta` with 12 significant digits, `inf` for never.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "y,v,z,theta")?;
        let dt = self.policy.dt;
        for i in 0..self.v.len() {
            let theta = match self.policy.theta[i] {
                Theta::Finite(j) => fmt_sig(j as f64 * dt, 12),
                Theta::Never => "inf".to_string(),
            };
            writeln!(
                out,
                "{},{},{},{}",
                fmt_sig(self.y(i), 12),
                fmt_sig(self.v[i], 12),
                fmt_sig(self.policy.z[i].aoi(dt), 12),
                theta
            )?;
        }
        Ok(())
    }
}

fn check_costs(cfg: &SolverConfig) -> Result<(), SolverError> {
    for (name, value) in [("kappa_s", cfg.kappa_s), ("kappa_p", cfg.kappa_p)] {
        if !(value.is_finite() && value >= 0.0) {
            return Err(SolverError::InvalidCost { name, value });
        }
    }
    Ok(())
}

/// Builds the grids for `dist` and runs [`policy_iteration`].
pub fn solve(
    dist: &ServiceDistribution,
    spec: &GridSpec,
    cfg: &SolverConfig,
) -> Result<SolvedPolicy, SolverError> {
    let grids = Grids::build(spec, dist)?;
    policy_iteration(dist, &grids, cfg)
}

/// Policy iteration from `v ≡ 0`, `ρ = 0`, `θ ≡ never`.
///
/// The first evaluation is of the no-preemption policy induced by the
/// initial idle map; every later sweep improves both maps with the
/// previous evaluation's `ρ`. Stops when `v`, `ρ` and the on-grid
/// threshold map have all settled. On `max_iter` the lowest-cost iterate is
/// returned with `converged = false`.
pub fn policy_iteration(
    dist: &ServiceDistribution,
    grids: &Grids,
    cfg: &SolverConfig,
) -> Result<SolvedPolicy, SolverError> {
    check_costs(cfg)?;
    let kernel = QuadratureKernel::new(dist, grids);
    let m = grids.m();
    let dt = grids.dt();

    let v0 = vec![0.0; m + 1];
    let env = idle_envelope(&v0, 0.0, cfg.kappa_s, grids, kernel.n);
    let mut policy = StationaryPolicy {
        dt,
        z: env.z,
        far_target: env.far_target,
        theta: vec![Theta::Never; m + 1],
    };
    let first = policy_evaluate(&policy, &kernel, grids, cfg.kappa_s, cfg.kappa_p)?;
    let mut rho = first.rho;
    let mut v = first.v;
    let mut records = vec![IterationRecord {
        iteration: 0,
        rho,
        dv: v.iter().fold(0.0f64, |a, x| a.max(x.abs())),
        drho: rho.abs(),
        theta_changes: 0,
        system_residual: first.residual,
        bands: first.bands,
    }];
    let mut best: Option<(f64, StationaryPolicy, Vec<f64>)> = None;

    for k in 1..=cfg.max_iter {
        let env = idle_envelope(&v, rho, cfg.kappa_s, grids, kernel.n);
        let fh = idle_integral(&kernel, &env, v[m], rho, cfg.kappa_s, grids);
        let theta = busy_improve(&BusyContext {
            kernel: &kernel,
            grids,
            v: &v,
            rho,
            fh: &fh,
            kappa_p: cfg.kappa_p,
        });
        let churn = theta.iter().all(|t| *t == Theta::Finite(1))
            && env
                .z
                .iter()
                .enumerate()
                .all(|(i, z)| *z == SampleTarget::Node(i));
        if churn {
            return Err(SolverError::DegeneratePolicy);
        }
        let theta_changes = theta
            .iter()
            .zip(&policy.theta)
            .filter(|(a, b)| a != b)
            .count();
        let next = StationaryPolicy {
            dt,
            z: env.z,
            far_target: env.far_target,
            theta,
        };
        let eval = policy_evaluate(&next, &kernel, grids, cfg.kappa_s, cfg.kappa_p)?;
        let dv = eval
            .v
            .iter()
            .zip(&v)
            .fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
        let drho = (eval.rho - rho).abs();
        records.push(IterationRecord {
            iteration: k,
            rho: eval.rho,
            dv,
            drho,
            theta_changes,
            system_residual: eval.residual,
            bands: eval.bands,
        });
        let tol_v = cfg.eps_v * (1.0 + eval.v[m].abs());
        let done = dv <= tol_v && drho <= cfg.eps_rho && theta_changes == 0;
        policy = next;
        rho = eval.rho;
        v = eval.v;
        if done {
            let env = idle_envelope(&v, rho, cfg.kappa_s, grids, kernel.n);
            return Ok(SolvedPolicy {
                policy,
                rho,
                v,
                h_idle: env.h,
                iterations: k,
                residuals: records,
                converged: true,
                grids: grids.clone(),
            });
        }
        if best.as_ref().is_none_or(|b| rho < b.0) {
            best = Some((rho, policy.clone(), v.clone()));
        }
    }
    let (rho, policy, v) = best.unwrap_or((rho, policy, v));
    let env = idle_envelope(&v, rho, cfg.kappa_s, grids, kernel.n);
    Ok(SolvedPolicy {
        policy,
        rho,
        v,
        h_idle: env.h,
        iterations: cfg.max_iter,
        residuals: records,
        converged: false,
        grids: grids.clone(),
    })
}
