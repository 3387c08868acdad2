use tailor::baselines::{aoi_np_solve, zero_wait};
use tailor::simulator::{
    simulate, simulate_with_trajectory, Event, Mode, SimConfig, SimPolicy, ThresholdPolicy,
};
use tailor::{GridSpec, ServiceDistribution, SolverConfig};

/// Preempts every attempt after a state-dependent delay.
struct Growing;

impl SimPolicy for Growing {
    fn sample_at(&self, aoi: f64) -> f64 {
        aoi.max(0.5)
    }

    fn preempt_after(&self, y: f64) -> Option<f64> {
        Some(0.3 + 0.1 * y.min(5.0))
    }
}

#[test]
fn accounting_identity_holds() {
    let d = ServiceDistribution::lomax(1.0, 2.1).unwrap();
    let r = simulate(&Growing, &d, 1.0, 2.0, &SimConfig::with_cycles(20_000)).unwrap();
    let avg = (r.aoi_time_integral + r.impulse_cost_total) / r.elapsed_sim_time;
    assert!((avg - r.avg_cost).abs() <= 1e-12 * avg);
    assert_eq!(r.n_samples, r.n_deliveries);
    assert!(r.n_preemptions > 0);
    assert_eq!(r.n_deliveries, 20_000);
    let impulses = r.n_samples as f64 + 2.0 * r.n_preemptions as f64;
    assert!((r.impulse_cost_total - impulses).abs() < 1e-6 * impulses);
}

#[test]
fn busy_chains_advance_by_the_threshold() {
    let d = ServiceDistribution::lomax(1.0, 2.1).unwrap();
    let mut pts = Vec::new();
    simulate_with_trajectory(
        &Growing,
        &d,
        1.0,
        1.0,
        &SimConfig::with_cycles(2_000),
        &mut |p| pts.push(p),
    )
    .unwrap();
    let mut chain_start: Option<f64> = None;
    for w in pts.windows(2) {
        let (a, b) = (w[0], w[1]);
        assert!(b.t >= a.t);
        match b.event {
            Event::Sample => {
                assert_eq!(b.mode, Mode::Busy);
                chain_start = Some(b.aoi);
            }
            Event::Preempt => {
                let y = chain_start.unwrap();
                let theta = Growing.preempt_after(y).unwrap();
                assert!((b.aoi - (y + theta)).abs() < 1e-9);
                assert!(b.aoi > y);
                chain_start = Some(b.aoi);
            }
            Event::Deliver => {
                assert_eq!(b.mode, Mode::Idle);
                assert!(b.aoi <= a.aoi + (b.t - a.t) + 1e-12);
                chain_start = None;
            }
            Event::Start => panic!("start event mid-run"),
        }
    }
}

#[test]
fn baselines_match_their_analytic_cost() {
    let d = ServiceDistribution::exponential(1.0).unwrap();
    let cfg = SimConfig::with_cycles(400_000);
    let zw = zero_wait(&d, 1.0);
    let np = aoi_np_solve(&d, 1.0).unwrap();
    for (beta, rho) in [(0.0, zw.rho), (np.beta, np.rho)] {
        let r = simulate(&ThresholdPolicy { beta }, &d, 1.0, 1.0, &cfg).unwrap();
        assert!(
            (r.avg_cost - rho).abs() < 3.0 * r.stderr,
            "{} ± {} vs {rho}",
            r.avg_cost,
            r.stderr
        );
    }
}

#[test]
fn replications_use_distinct_streams() {
    let d = ServiceDistribution::exponential(1.0).unwrap();
    let base = SimConfig::with_cycles(5_000);
    let a = simulate(&ThresholdPolicy { beta: 0.0 }, &d, 1.0, 1.0, &base).unwrap();
    let b = simulate(
        &ThresholdPolicy { beta: 0.0 },
        &d,
        1.0,
        1.0,
        &SimConfig {
            replication: 1,
            ..base
        },
    )
    .unwrap();
    assert_ne!(a.avg_cost, b.avg_cost);
}

#[test]
fn stderr_shrinks_with_batch_count() {
    // fixed batch length: four times the batches halves the stderr
    let d = ServiceDistribution::exponential(1.0).unwrap();
    let p = ThresholdPolicy { beta: 0.0 };
    let avg = |batches: u64| -> f64 {
        (0..8)
            .map(|r| {
                let cfg = SimConfig {
                    batches,
                    replication: r,
                    ..SimConfig::with_cycles(2_000 * batches)
                };
                simulate(&p, &d, 1.0, 1.0, &cfg).unwrap().stderr
            })
            .sum::<f64>()
            / 8.0
    };
    let ratio = avg(12) / avg(48);
    assert!((ratio - 2.0).abs() < 0.4, "ratio {ratio}");
}

#[test]
fn solved_exponential_policy_simulates_to_its_cost() {
    let d = ServiceDistribution::exponential(1.0).unwrap();
    let grid = GridSpec {
        dt: 0.01,
        y_cut: Some(20.0),
        ..GridSpec::default()
    };
    let s = tailor::solver::solve(&d, &grid, &SolverConfig::new(1.0, 1.0)).unwrap();
    let r = simulate(&s.policy, &d, 1.0, 1.0, &SimConfig::with_cycles(200_000)).unwrap();
    assert!(
        (r.avg_cost - s.rho).abs() < 3.0 * r.stderr,
        "{} ± {} vs {}",
        r.avg_cost,
        r.stderr,
        s.rho
    );
    assert!(r.n_preemptions > 0);
}
