//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on failure.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use tailor::baselines::{aoi_np_solve, zero_wait_cost, BaselineResult};
use tailor::config::table1_scenarios;
use tailor::grids::far_field_value;
use tailor::simulator::{simulate, SimConfig, ThresholdPolicy};
use tailor::solver::{
    busy_improve, eval_q, exp_stopping_objective, idle_envelope, idle_integral, policy_evaluate,
    policy_iteration, solve, BusyContext, QuadratureKernel, SampleTarget, RESIDUAL_TOL,
};
use tailor::{GridSpec, Grids, ServiceDistribution, SolvedPolicy, SolverConfig, Theta, ThetaMax};

type Outcome = Result<String, String>;

struct Case {
    name: String,
    reference: f64,
    tol: f64,
    dist: ServiceDistribution,
    kappa_p: f64,
    solved: SolvedPolicy,
    elapsed: Duration,
    half: SolvedPolicy,
    np: BaselineResult,
}

fn cases() -> Vec<Case> {
    let reference = [(2.06, 0.10), (2.35, 0.10), (1.99, 0.10), (1.77, 0.15)];
    table1_scenarios()
        .into_iter()
        .zip(reference)
        .map(|(cfg, (reference, tol))| {
            let sc = cfg.scenario().unwrap();
            let start = Instant::now();
            let solved = solve(&sc.dist, &sc.grid, &sc.solver).unwrap();
            let elapsed = start.elapsed();
            let half_grid = GridSpec {
                dt: sc.grid.dt / 2.0,
                ..sc.grid.clone()
            };
            let half = solve(&sc.dist, &half_grid, &sc.solver).unwrap();
            let np = aoi_np_solve(&sc.dist, 1.0).unwrap();
            Case {
                name: sc.name,
                reference,
                tol,
                dist: sc.dist,
                kappa_p: sc.kappa_p,
                solved,
                elapsed,
                half,
                np,
            }
        })
        .collect()
}

fn case<'a>(cases: &'a [Case], name: &str) -> &'a Case {
    cases.iter().find(|c| c.name == name).unwrap()
}

fn exp_grid() -> GridSpec {
    GridSpec {
        dt: 0.01,
        y_cut: Some(20.0),
        ..GridSpec::default()
    }
}

fn idx(g: &Grids, t: Theta) -> i64 {
    g.candidates.iter().position(|c| *c == t).unwrap() as i64
}

fn exponential_closed_form() -> Outcome {
    let d = ServiceDistribution::exponential(1.0).unwrap();
    let start = Instant::now();
    let s = solve(&d, &exp_grid(), &SolverConfig::new(1.0, 1.0)).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    let g = &s.grids;
    let dv = (0..s.v.len())
        .map(|i| (s.v[i] - g.state.point(i)).abs())
        .fold(0.0, f64::max);
    let i10 = g.state.nearest(10.0);
    let ks: Vec<i64> = s.policy.theta[..=i10].iter().map(|t| idx(g, *t)).collect();
    let spread = ks.iter().max().unwrap() - ks.iter().min().unwrap();
    let dz = (0..s.v.len())
        .map(|i| {
            let delta = g.state.point(i);
            (s.policy.z[i].aoi(g.dt()) - delta.max(s.rho - 1.0)).abs()
        })
        .fold(0.0, f64::max);
    let detail = format!(
        "max|v-y| {dv:.2e}, theta spread {spread} step(s), max z error {dz:.2e}, {secs:.1}s"
    );
    if dv <= 0.05 && spread <= 1 && dz <= g.dt() + 1e-12 && secs < 60.0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn no_preemption_reduction(cases: &[Case]) -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for name in ["lomax_kp1", "lognormal_l1", "lognormal_l2"] {
        let c = case(cases, name);
        let g = Grids::build(&GridSpec::default(), &c.dist)
            .unwrap()
            .with_candidates(vec![Theta::Never]);
        let s = policy_iteration(&c.dist, &g, &SolverConfig::new(1.0, c.kappa_p))
            .map_err(|e| e.to_string())?;
        let rel = (s.rho - c.np.rho).abs() / c.np.rho;
        let mean = c.dist.mean();
        let slope_err =
            s.v.windows(2)
                .map(|w| ((w[1] - w[0]) / g.dt() - mean).abs() / mean)
                .fold(0.0, f64::max);
        ok &= rel < 0.01 && slope_err < 0.02;
        parts.push(format!(
            "{name}: rho {:.4} vs {:.4}, slope err {slope_err:.1e}",
            s.rho, c.np.rho
        ));
    }
    let detail = parts.join("; ");
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn table_reproduction(cases: &[Case]) -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for c in cases {
        let rho = c.solved.rho;
        let within = (rho - c.reference).abs() <= c.tol * c.reference;
        let refine = (c.half.rho - rho).abs() / rho;
        let fast = c.elapsed < Duration::from_secs(300);
        ok &= within && refine < 0.01 && fast && c.solved.converged;
        parts.push(format!(
            "{} {rho:.4} (table {}, dt/2 change {refine:.1e}, {:.1}s)",
            c.name,
            c.reference,
            c.elapsed.as_secs_f64()
        ));
    }
    let detail = parts.join("; ");
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn baseline_cross_check(cases: &[Case]) -> Outcome {
    let l1 = case(cases, "lognormal_l1");
    let zw_l1 = zero_wait_cost(&l1.dist, 1.0);
    let zw_ok = (zw_l1 - 56.8).abs() <= 0.01 * 56.8;
    let np_ok = (l1.np.rho - 16.0).abs() <= 0.15 * 16.0;
    let mut parts = vec![
        format!("ZW L1 {zw_l1:.3} vs 56.8"),
        format!("AoI-NP L1 {:.3} vs 16.0", l1.np.rho),
    ];
    let mut bias_ok = true;
    for name in ["lomax_kp1", "lognormal_l2"] {
        let c = case(cases, name);
        let analytic = zero_wait_cost(&c.dist, 1.0);
        let short = SimConfig::with_cycles(10_000);
        let sim = simulate(
            &ThresholdPolicy { beta: 0.0 },
            &c.dist,
            1.0,
            c.kappa_p,
            &short,
        )
        .map_err(|e| e.to_string())?;
        bias_ok &= sim.avg_cost < analytic;
        parts.push(format!(
            "ZW {name} short-run {:.2} < analytic {analytic:.2}",
            sim.avg_cost
        ));
    }
    let detail = parts.join("; ");
    if zw_ok && np_ok && bias_ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn ordering_and_reversal(cases: &[Case]) -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for c in cases {
        let zw = zero_wait_cost(&c.dist, 1.0);
        ok &= c.solved.rho <= c.np.rho && c.np.rho <= zw;
        parts.push(format!(
            "{} {:.3} <= {:.3} <= {:.3}",
            c.name, c.solved.rho, c.np.rho, zw
        ));
    }
    let (l1, l2) = (case(cases, "lognormal_l1"), case(cases, "lognormal_l2"));
    let reversal = l2.solved.rho < l1.solved.rho && l2.np.rho > l1.np.rho;
    parts.push(format!(
        "TAILOR L2 {:.3} < L1 {:.3}, AoI-NP L2 {:.3} > L1 {:.3}",
        l2.solved.rho, l1.solved.rho, l2.np.rho, l1.np.rho
    ));
    let detail = parts.join("; ");
    if ok && reversal {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn solver_simulator_consistency(cases: &[Case]) -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    let cfg = SimConfig::with_cycles(1_000_000);
    for c in cases {
        let start = Instant::now();
        let r =
            simulate(&c.solved.policy, &c.dist, 1.0, c.kappa_p, &cfg).map_err(|e| e.to_string())?;
        let secs = start.elapsed().as_secs_f64();
        let z = (r.avg_cost - c.solved.rho) / r.stderr;
        ok &= z.abs() <= 3.0 && secs < 120.0;
        parts.push(format!(
            "{} {:.4}±{:.4} (z {z:+.2}, {secs:.1}s)",
            c.name, r.avg_cost, r.stderr
        ));
    }
    let detail = parts.join("; ");
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn bitwise_busy_improve() -> bool {
    let d = ServiceDistribution::log_normal(-1.31, 4.0).unwrap();
    let grid = GridSpec {
        dt: 0.5,
        y_cut: Some(9.5),
        theta_fine: Some(1.0),
        theta_max: ThetaMax::Value(60.0),
        n_log: 10,
        far_field_slope: None,
    };
    let cands: Vec<Theta> = [1, 2, 3, 4, 6, 8, 11, 15, 20, 27, 36, 48, 64, 100]
        .into_iter()
        .map(Theta::Finite)
        .chain([Theta::Never])
        .collect();
    let g = Grids::build(&grid, &d)
        .unwrap()
        .with_candidates(cands.clone());
    let k = QuadratureKernel::new(&d, &g);
    let v: Vec<f64> = (0..=g.m())
        .map(|i| 2.0 * g.state.point(i) + (0.7 * i as f64).cos())
        .collect();
    let rho = 5.0;
    let env = idle_envelope(&v, rho, 1.0, &g, k.n);
    let fh = idle_integral(&k, &env, v[g.m()], rho, 1.0, &g);
    let ctx = BusyContext {
        kernel: &k,
        grids: &g,
        v: &v,
        rho,
        fh: &fh,
        kappa_p: 1.0,
    };
    let fast = busy_improve(&ctx);
    (0..=g.m()).all(|i| {
        let y = g.state.point(i);
        let mut best = (f64::INFINITY, Theta::Never);
        for &c in &cands {
            let (a, j1, tail) = k.at(c);
            let q = match c {
                Theta::Never => (y - rho) * a + j1 + fh.total,
                Theta::Finite(j) => {
                    let next = far_field_value(&v, y + j as f64 * k.dt, g.slope, k.dt).unwrap();
                    (y - rho) * a + j1 + fh.prefix[j] + tail * (1.0 + next)
                }
            };
            if q < best.0 {
                best = (q, c);
            }
        }
        fast[i] == best.1
    }) && g.m() + 1 == 20
        && cands.len() == 15
}

/// Largest |z| over five (y, θ) points of a direct stochastic busy attempt.
fn stochastic_q(c: &Case) -> f64 {
    let s = &c.solved;
    let g = &s.grids;
    let k = QuadratureKernel::new(&c.dist, g);
    let env = idle_envelope(&s.v, s.rho, 1.0, g, k.n);
    let fh = idle_integral(&k, &env, s.v[g.m()], s.rho, 1.0, g);
    let ctx = BusyContext {
        kernel: &k,
        grids: g,
        v: &s.v,
        rho: s.rho,
        fh: &fh,
        kappa_p: c.kappa_p,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let reps = 1_000_000;
    let mut worst: f64 = 0.0;
    for (y, j) in [(0.0, 50), (0.5, 120), (2.0, 300), (5.0, 800), (12.0, 2000)] {
        let q = eval_q(&ctx, y, Theta::Finite(j));
        let th = j as f64 * g.dt();
        let preempted = c.kappa_p + far_field_value(&s.v, y + th, g.slope, g.dt()).unwrap();
        let (mut sum, mut sum2) = (0.0, 0.0);
        for _ in 0..reps {
            let t = c.dist.sample(&mut rng);
            let x = if t <= th {
                (y - s.rho) * t + 0.5 * t * t + env.h_at(t)
            } else {
                (y - s.rho) * th + 0.5 * th * th + preempted
            };
            sum += x;
            sum2 += x * x;
        }
        let mean = sum / reps as f64;
        let se = ((sum2 / reps as f64 - mean * mean) / reps as f64).sqrt();
        worst = worst.max(((mean - q) / se).abs());
    }
    worst
}

fn max_relative_residual(c: &Case) -> f64 {
    let s = &c.solved;
    let k = QuadratureKernel::new(&c.dist, &s.grids);
    let e = policy_evaluate(&s.policy, &k, &s.grids, 1.0, c.kappa_p).unwrap();
    e.residual / (1.0 + e.rhs_norm)
}

fn stopping_argmin_gap() -> i64 {
    let d = ServiceDistribution::exponential(1.0).unwrap();
    let s = solve(&d, &exp_grid(), &SolverConfig::new(1.0, 1.0)).unwrap();
    let g = &s.grids;
    let k = QuadratureKernel::new(&d, g);
    let env = idle_envelope(&s.v, s.rho, 1.0, g, k.n);
    let mut best = (f64::INFINITY, 0i64);
    for (i, c) in g.candidates.iter().enumerate() {
        if let Theta::Finite(j) = c {
            let val = exp_stopping_objective(*j as f64 * g.dt(), s.rho, |t| env.h_at(t), 1.0, 1.0);
            if val < best.0 {
                best = (val, i as i64);
            }
        }
    }
    (best.1 - idx(g, s.policy.theta[0])).abs()
}

fn oracle_equivalences(cases: &[Case]) -> Outcome {
    let bitwise = bitwise_busy_improve();
    let z = stochastic_q(case(cases, "lomax_kp1"));
    let res = cases.iter().map(max_relative_residual).fold(0.0, f64::max);
    let gap = stopping_argmin_gap();
    let detail = format!(
        "busy_improve bitwise {bitwise}; eval_Q max |z| {z:.2}; residual/(1+|rhs|) {res:.1e}; G(tau) argmin gap {gap} step(s)"
    );
    if bitwise && z <= 3.0 && res <= RESIDUAL_TOL && gap <= 1 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn structural_properties(cases: &[Case]) -> Outcome {
    let d = ServiceDistribution::exponential(1.0).unwrap();
    let exp = solve(&d, &exp_grid(), &SolverConfig::new(1.0, 1.0)).map_err(|e| e.to_string())?;
    let mut runs: Vec<(&str, &ServiceDistribution, &SolvedPolicy)> =
        vec![("exponential", &d, &exp)];
    runs.extend(cases.iter().map(|c| (c.name.as_str(), &c.dist, &c.solved)));
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, dist, s) in runs {
        let v = &s.v;
        let dt = s.grids.dt();
        let scale = 1.0 + v[v.len() - 1].abs();
        let worst_drop = v.windows(2).map(|w| w[0] - w[1]).fold(0.0, f64::max);
        let monotone = worst_drop <= 1e-9 * scale;
        let terminal = (v[v.len() - 1] - v[v.len() - 2]) / dt;
        let slope_ok = terminal <= dist.mean() + 1e-3;
        let k = QuadratureKernel::new(dist, &s.grids);
        let aj = k.a.windows(2).all(|w| w[1] >= w[0]) && k.j1.windows(2).all(|w| w[1] >= w[0]);
        let zs = s.policy.z.iter().enumerate().all(|(i, z)| match z {
            SampleTarget::Node(j) => *j >= i,
            SampleTarget::Far(a) => *a >= s.grids.y_cut(),
        });
        ok &= v[0] == 0.0 && monotone && slope_ok && aj && zs;
        parts.push(format!(
            "{name}: v0 {} drop {worst_drop:.1e} slope {terminal:.4}/{:.4}{}",
            v[0],
            dist.mean(),
            if aj && zs { "" } else { " (A/J1 or z failed)" }
        ));
    }
    let lomax = ServiceDistribution::lomax(1.0, 2.1).unwrap();
    let hs: Vec<f64> = (0..100)
        .map(|i| lomax.hazard(0.5 * i as f64).unwrap())
        .collect();
    let dfr = hs.windows(2).all(|w| w[1] < w[0]);
    ok &= dfr;
    parts.push(format!("Lomax DFR {dfr}"));
    let detail = parts.join("; ");
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn main() -> ExitCode {
    // `cargo test -- --list` and filters must not trigger the full run
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return ExitCode::SUCCESS;
    }
    let cases = cases();
    let criteria: [(&str, Outcome); 8] = [
        ("exponential closed form", exponential_closed_form()),
        ("no-preemption reduction", no_preemption_reduction(&cases)),
        ("table reproduction", table_reproduction(&cases)),
        ("baseline cross-check", baseline_cross_check(&cases)),
        ("ordering and reversal", ordering_and_reversal(&cases)),
        (
            "solver/simulator consistency",
            solver_simulator_consistency(&cases),
        ),
        ("oracle equivalences", oracle_equivalences(&cases)),
        ("structural properties", structural_properties(&cases)),
    ];
    let mut failed = 0;
    for (name, outcome) in &criteria {
        match outcome {
            Ok(d) => println!("PASS {name}: {d}"),
            Err(d) => {
                failed += 1;
                println!("FAIL {name}: {d}");
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
