//! Event-driven Monte Carlo of the sampling/preemption loop.
//!
//! A cycle runs from one delivery to the next: wait while idle until the
//! policy's sampling AoI, pay `κ_s`, then serve fresh packets, paying `κ_p`
//! and restarting whenever the service time exceeds the preemption
//! threshold, until a packet is delivered and the AoI drops to its service
//! time. The long-run average cost is the ratio of accumulated cost to
//! elapsed time; uncertainty comes from batch means over measured cycles.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::baselines::{aoi_np_solve, zero_wait, BaselineError};
use crate::distributions::ServiceDistribution;
use crate::grids::GridSpec;
use crate::solver::{self, SolverConfig, SolverError, StationaryPolicy};

/// Decision rules the simulator needs from a policy.
pub trait SimPolicy: Sync {
    /// AoI at which the next update is sampled when idle at AoI `aoi`
    /// (must be `>= aoi`).
    fn sample_at(&self, aoi: f64) -> f64;
    /// Preemption threshold for a packet started at AoI `y`; `None` = never.
    fn preempt_after(&self, y: f64) -> Option<f64>;
}

impl SimPolicy for StationaryPolicy {
    fn sample_at(&self, aoi: f64) -> f64 {
        StationaryPolicy::sample_at(self, aoi)
    }

    fn preempt_after(&self, y: f64) -> Option<f64> {
        StationaryPolicy::preempt_after(self, y)
    }
}

/// `z(Δ) = max(Δ, β)` without preemption; `β = 0` is zero-wait.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdPolicy {
    pub beta: f64,
}

impl SimPolicy for ThresholdPolicy {
    fn sample_at(&self, aoi: f64) -> f64 {
        aoi.max(self.beta)
    }

    fn preempt_after(&self, _y: f64) -> Option<f64> {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimConfig {
    /// measured delivery cycles (after warmup)
    pub cycles: u64,
    /// cycles simulated and discarded before measuring
    pub warmup_cycles: u64,
    pub batches: u64,
    pub seed: u64,
    /// RNG stream; distinct replications of one seed use distinct streams
    pub replication: u64,
    pub max_preemptions_per_chain: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self::with_cycles(1_000_000)
    }
}

impl SimConfig {
    /// `cycles` measured cycles, 1% warmup, 50 batches, seed 0.
    pub fn with_cycles(cycles: u64) -> Self {
        Self {
            cycles,
            warmup_cycles: cycles / 100,
            batches: 50,
            seed: 0,
            replication: 0,
            max_preemptions_per_chain: 1_000_000,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.batches < 10 {
            return Err(SimError::InvalidConfig(format!(
                "batches must be >= 10, got {}",
                self.batches
            )));
        }
        if self.cycles < self.batches {
            return Err(SimError::InvalidConfig(format!(
                "cycles ({}) must be >= batches ({})",
                self.cycles, self.batches
            )));
        }
        if self.warmup_cycles >= self.cycles {
            return Err(SimError::InvalidConfig(format!(
                "warmup_cycles ({}) must be < cycles ({})",
                self.warmup_cycles, self.cycles
            )));
        }
        if self.max_preemptions_per_chain == 0 {
            return Err(SimError::InvalidConfig(
                "max_preemptions_per_chain must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("more than {cap} preemptions in one delivery chain (busy-start AoI {aoi}); the policy is degenerate")]
    PreemptionCap { cap: u64, aoi: f64 },
    #[error("policy returned an invalid decision at AoI {aoi}: {what}")]
    BadDecision { aoi: f64, what: &'static str },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimResult {
    pub avg_cost: f64,
    pub stderr: f64,
    pub n_samples: u64,
    pub n_preemptions: u64,
    pub n_deliveries: u64,
    pub aoi_time_integral: f64,
    pub impulse_cost_total: f64,
    pub elapsed_sim_time: f64,
    /// per-batch average cost
    pub batch_means: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Mode {
    #[serde(rename = "idle")]
    Idle,
    #[serde(rename = "busy")]
    Busy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Event {
    #[serde(rename = "start")]
    Start,
    #[serde(rename = "sample")]
    Sample,
    #[serde(rename = "preempt")]
    Preempt,
    #[serde(rename = "deliver")]
    Deliver,
}

/// State right after an event epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub aoi: f64,
    pub mode: Mode,
    pub event: Event,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Idle => "idle",
            Mode::Busy => "busy",
        }
    }
}

impl Event {
    pub fn as_str(self) -> &'static str {
        match self {
            Event::Start => "start",
            Event::Sample => "sample",
            Event::Preempt => "preempt",
            Event::Deliver => "deliver",
        }
    }
}

#[derive(Default, Clone, Copy)]
struct Totals {
    area: f64,
    impulses: f64,
    time: f64,
    samples: u64,
    preemptions: u64,
    deliveries: u64,
}

pub fn simulate<P: SimPolicy + ?Sized>(
    policy: &P,
    dist: &ServiceDistribution,
    kappa_s: f64,
    kappa_p: f64,
    cfg: &SimConfig,
) -> Result<SimResult, SimError> {
    run(policy, dist, kappa_s, kappa_p, cfg, None)
}

/// As [`simulate`], also reporting every event epoch to `sink`.
pub fn simulate_with_trajectory<P: SimPolicy + ?Sized>(
    policy: &P,
    dist: &ServiceDistribution,
    kappa_s: f64,
    kappa_p: f64,
    cfg: &SimConfig,
    sink: &mut dyn FnMut(TrajectoryPoint),
) -> Result<SimResult, SimError> {
    run(policy, dist, kappa_s, kappa_p, cfg, Some(sink))
}

fn run<P: SimPolicy + ?Sized>(
    policy: &P,
    dist: &ServiceDistribution,
    kappa_s: f64,
    kappa_p: f64,
    cfg: &SimConfig,
    mut sink: Option<&mut dyn FnMut(TrajectoryPoint)>,
) -> Result<SimResult, SimError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(cfg.replication);

    let mut emit = |t: f64, aoi: f64, mode: Mode, event: Event| {
        if let Some(s) = sink.as_mut() {
            s(TrajectoryPoint {
                t,
                aoi,
                mode,
                event,
            });
        }
    };

    let mut clock = 0.0;
    let mut aoi = dist.mean();
    emit(clock, aoi, Mode::Idle, Event::Start);

    let total_cycles = cfg.warmup_cycles + cfg.cycles;
    let per_batch = cfg.cycles / cfg.batches;
    let mut totals = Totals::default();
    let mut batch = Totals::default();
    let mut batch_means = Vec::with_capacity(cfg.batches as usize);

    for cycle in 0..total_cycles {
        let measuring = cycle >= cfg.warmup_cycles;
        let mut cyc = Totals::default();

        let z = policy.sample_at(aoi);
        if !(z.is_finite() && z >= aoi) {
            return Err(SimError::BadDecision {
                aoi,
                what: "sampling AoI must be finite and >= current AoI",
            });
        }
        let u = z - aoi;
        cyc.area += aoi * u + 0.5 * u * u;
        cyc.time += u;
        cyc.impulses += kappa_s;
        cyc.samples += 1;
        clock += u;
        aoi = z;
        emit(clock, aoi, Mode::Busy, Event::Sample);

        let mut chain = 0u64;
        loop {
            let y = aoi;
            let service = dist.sample(&mut rng);
            let theta = policy.preempt_after(y);
            if let Some(th) = theta {
                if th.is_nan() || th <= 0.0 {
                    return Err(SimError::BadDecision {
                        aoi: y,
                        what: "preemption threshold must be > 0",
                    });
                }
            }
            match theta {
                Some(th) if service > th => {
                    cyc.area += y * th + 0.5 * th * th;
                    cyc.time += th;
                    cyc.impulses += kappa_p;
                    cyc.preemptions += 1;
                    clock += th;
                    aoi = y + th;
                    emit(clock, aoi, Mode::Busy, Event::Preempt);
                    chain += 1;
                    if chain > cfg.max_preemptions_per_chain {
                        return Err(SimError::PreemptionCap {
                            cap: cfg.max_preemptions_per_chain,
                            aoi,
                        });
                    }
                }
                _ => {
                    cyc.area += y * service + 0.5 * service * service;
                    cyc.time += service;
                    cyc.deliveries += 1;
                    clock += service;
                    debug_assert!(service <= y + service);
                    aoi = service;
                    emit(clock, aoi, Mode::Idle, Event::Deliver);
                    break;
                }
            }
        }

        if measuring {
            add(&mut batch, &cyc);
            let measured = cycle - cfg.warmup_cycles + 1;
            let closes = measured.is_multiple_of(per_batch)
                && (batch_means.len() as u64) < cfg.batches - 1
                || measured == cfg.cycles;
            if closes {
                batch_means.push((batch.area + batch.impulses) / batch.time);
                add(&mut totals, &batch);
                batch = Totals::default();
            }
        }
    }

    let b = batch_means.len() as f64;
    let mean_of_batches = batch_means.iter().sum::<f64>() / b;
    let var = batch_means
        .iter()
        .map(|x| (x - mean_of_batches).powi(2))
        .sum::<f64>()
        / (b - 1.0);
    Ok(SimResult {
        avg_cost: (totals.area + totals.impulses) / totals.time,
        stderr: (var / b).sqrt(),
        n_samples: totals.samples,
        n_preemptions: totals.preemptions,
        n_deliveries: totals.deliveries,
        aoi_time_integral: totals.area,
        impulse_cost_total: totals.impulses,
        elapsed_sim_time: totals.time,
        batch_means,
    })
}

fn add(acc: &mut Totals, x: &Totals) {
    acc.area += x.area;
    acc.impulses += x.impulses;
    acc.time += x.time;
    acc.samples += x.samples;
    acc.preemptions += x.preemptions;
    acc.deliveries += x.deliveries;
}

/// Header of the per-policy simulation CSV.
pub const SIM_CSV_HEADER: &str =
    "scenario,policy,avg_cost,stderr,n_samples,n_preemptions,n_deliveries,sim_time";

/// One scenario for [`compare`].
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub dist: ServiceDistribution,
    pub kappa_s: f64,
    pub kappa_p: f64,
    pub grid: GridSpec,
    pub solver: SolverConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub scenario: String,
    pub tailor_rho: f64,
    pub tailor_sim: f64,
    pub tailor_stderr: f64,
    pub tailor_converged: bool,
    pub aoinp_rho: f64,
    pub aoinp_sim: f64,
    pub aoinp_stderr: f64,
    pub zw_rho: f64,
    pub zw_sim: f64,
    pub zw_stderr: f64,
    /// AoI-NP cost over TAILOR cost
    pub ratio_aoinp: f64,
    /// ZW-NP cost over TAILOR cost
    pub ratio_zw: f64,
}

pub const COMPARISON_CSV_HEADER: &str =
    "scenario,tailor_rho,tailor_sim,tailor_stderr,aoinp_rho,aoinp_sim,zw_rho,zw_sim,ratio_aoinp,ratio_zw";

#[derive(Debug, Error)]
pub enum CompareError {
    #[error("scenario `{scenario}`: {source}")]
    Solver {
        scenario: String,
        #[source]
        source: SolverError,
    },
    #[error("scenario `{scenario}`: {source}")]
    Baseline {
        scenario: String,
        #[source]
        source: BaselineError,
    },
    #[error("scenario `{scenario}`: {source}")]
    Sim {
        scenario: String,
        #[source]
        source: SimError,
    },
}

/// Solves, evaluates the baselines, and simulates all three policies for
/// every scenario. Rows are sorted by scenario name.
pub fn compare(
    scenarios: &[Scenario],
    cfg: &SimConfig,
) -> Result<Vec<ComparisonRow>, CompareError> {
    let mut rows = scenarios
        .par_iter()
        .map(|s| compare_one(s, cfg))
        .collect::<Result<Vec<_>, _>>()?;
    rows.sort_by(|a, b| a.scenario.cmp(&b.scenario));
    Ok(rows)
}

fn compare_one(s: &Scenario, cfg: &SimConfig) -> Result<ComparisonRow, CompareError> {
    let name = || s.name.clone();
    let solved =
        solver::solve(&s.dist, &s.grid, &s.solver).map_err(|source| CompareError::Solver {
            scenario: name(),
            source,
        })?;
    let aoinp = aoi_np_solve(&s.dist, s.kappa_s).map_err(|source| CompareError::Baseline {
        scenario: name(),
        source,
    })?;
    let zw = zero_wait(&s.dist, s.kappa_s);
    let sim = |p: &dyn SimPolicy| {
        simulate(p, &s.dist, s.kappa_s, s.kappa_p, cfg).map_err(|source| CompareError::Sim {
            scenario: name(),
            source,
        })
    };
    let t = sim(&solved.policy)?;
    let a = sim(&ThresholdPolicy { beta: aoinp.beta })?;
    let z = sim(&ThresholdPolicy { beta: 0.0 })?;
    Ok(ComparisonRow {
        scenario: s.name.clone(),
        tailor_rho: solved.rho,
        tailor_sim: t.avg_cost,
        tailor_stderr: t.stderr,
        tailor_converged: solved.converged,
        aoinp_rho: aoinp.rho,
        aoinp_sim: a.avg_cost,
        aoinp_stderr: a.stderr,
        zw_rho: zw.rho,
        zw_sim: z.avg_cost,
        zw_stderr: z.stderr,
        ratio_aoinp: aoinp.rho / solved.rho,
        ratio_zw: zw.rho / solved.rho,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exp() -> ServiceDistribution {
        ServiceDistribution::exponential(1.0).unwrap()
    }

    #[test]
    fn zero_wait_exponential_is_three() {
        let cfg = SimConfig::with_cycles(200_000);
        let r = simulate(&ThresholdPolicy { beta: 0.0 }, &exp(), 1.0, 1.0, &cfg).unwrap();
        assert!(
            (r.avg_cost - 3.0).abs() < 3.0 * r.stderr + 1e-3,
            "{} ± {}",
            r.avg_cost,
            r.stderr
        );
        assert_eq!(r.n_samples, r.n_deliveries);
        assert_eq!(r.n_deliveries, 200_000);
        assert_eq!(r.n_preemptions, 0);
        assert_eq!(r.batch_means.len(), 50);
        let total = (r.aoi_time_integral + r.impulse_cost_total) / r.elapsed_sim_time;
        assert_eq!(total, r.avg_cost);
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let cfg = SimConfig::with_cycles(10_000);
        let a = simulate(&ThresholdPolicy { beta: 1.2 }, &exp(), 1.0, 1.0, &cfg).unwrap();
        let b = simulate(&ThresholdPolicy { beta: 1.2 }, &exp(), 1.0, 1.0, &cfg).unwrap();
        assert_eq!(a, b);
        let other = SimConfig {
            replication: 1,
            ..cfg
        };
        let c = simulate(&ThresholdPolicy { beta: 1.2 }, &exp(), 1.0, 1.0, &other).unwrap();
        assert_ne!(a.avg_cost, c.avg_cost);
    }

    struct FixedPreempt(f64);
    impl SimPolicy for FixedPreempt {
        fn sample_at(&self, aoi: f64) -> f64 {
            aoi
        }
        fn preempt_after(&self, _y: f64) -> Option<f64> {
            Some(self.0)
        }
    }

    #[test]
    fn trajectory_respects_jump_maps() {
        let cfg = SimConfig::with_cycles(2_000);
        let d = ServiceDistribution::lomax(1.0, 2.1).unwrap();
        let mut pts = Vec::new();
        simulate_with_trajectory(&FixedPreempt(0.7), &d, 1.0, 1.0, &cfg, &mut |p| pts.push(p))
            .unwrap();
        for w in pts.windows(2) {
            let (a, b) = (w[0], w[1]);
            let drift = a.aoi + (b.t - a.t);
            match b.event {
                Event::Sample => assert!((b.aoi - drift).abs() < 1e-9),
                Event::Preempt => {
                    assert!((b.aoi - drift).abs() < 1e-9);
                    assert!((b.t - a.t - 0.7).abs() < 1e-12);
                }
                Event::Deliver => {
                    assert!(b.aoi <= drift + 1e-12);
                    assert!((b.aoi - (b.t - a.t)).abs() < 1e-9);
                }
                Event::Start => unreachable!(),
            }
        }
    }

    #[test]
    fn preemption_cap_is_an_error() {
        let cfg = SimConfig {
            max_preemptions_per_chain: 5,
            ..SimConfig::with_cycles(1_000)
        };
        let r = simulate(&FixedPreempt(1e-9), &exp(), 1.0, 1.0, &cfg);
        assert!(matches!(r, Err(SimError::PreemptionCap { cap: 5, .. })));
    }

    #[test]
    fn config_validation() {
        let mut c = SimConfig::with_cycles(100);
        c.batches = 5;
        assert!(c.validate().is_err());
        let mut c = SimConfig::with_cycles(100);
        c.warmup_cycles = 100;
        assert!(c.validate().is_err());
        assert!(SimConfig::with_cycles(100).validate().is_ok());
    }

    #[test]
    fn empty_comparison_is_empty() {
        assert!(compare(&[], &SimConfig::with_cycles(100))
            .unwrap()
            .is_empty());
    }
}
