//! State and action grids.
//!
//! The state grid is `y_i = i·dt`, `i = 0..=M`. Preemption candidates are
//! stored as integer multiples of `dt`: a uniform block up to `θ_fine`, then
//! a geometric block up to `θ_max`, then the `Never` sentinel. Values of the
//! relative value function beyond `y_cut = M·dt` come from the far-field
//! linear closure.

use std::fmt;

use thiserror::Error;

use crate::distributions::ServiceDistribution;

#[derive(Debug, Error, PartialEq)]
pub enum GridError {
    #[error("time step dt must be finite and > 0, got {0}")]
    NonPositiveStep(f64),
    #[error("y_cut = {y_cut} gives fewer than 10 cells at dt = {dt}")]
    TooFewCells { dt: f64, y_cut: f64 },
    #[error("theta_fine = {theta_fine} must lie in [dt, theta_max = {theta_max}]")]
    BadFineSegment { theta_fine: f64, theta_max: f64 },
    #[error("n_log must be >= 1")]
    NoLogPoints,
    #[error("tail_eps must lie in (0, 1), got {0}")]
    BadTailEps(f64),
    #[error("largest finite candidate {theta} leaves tail mass {tail:e} > eps {eps:e}")]
    TailNotCovered { theta: f64, tail: f64, eps: f64 },
    #[error("far-field lookup at negative time {0}")]
    NegativeTime(f64),
}

/// A preemption threshold: a positive multiple of `dt`, or never preempt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Theta {
    /// `θ = steps · dt`, `steps >= 1`.
    Finite(usize),
    Never,
}

impl Theta {
    pub fn time(self, dt: f64) -> f64 {
        match self {
            Theta::Finite(j) => j as f64 * dt,
            Theta::Never => f64::INFINITY,
        }
    }

    pub fn is_never(self) -> bool {
        matches!(self, Theta::Never)
    }
}

impl fmt::Display for Theta {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Theta::Finite(j) => write!(f, "{j}dt"),
            Theta::Never => f.write_str("never"),
        }
    }
}

/// Uniform state grid on `[0, M·dt]`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateGrid {
    pub dt: f64,
    /// index of the last node
    pub m: usize,
}

impl StateGrid {
    pub fn len(&self) -> usize {
        self.m + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn y_cut(&self) -> f64 {
        self.m as f64 * self.dt
    }

    pub fn point(&self, i: usize) -> f64 {
        i as f64 * self.dt
    }

    pub fn points(&self) -> Vec<f64> {
        (0..=self.m).map(|i| self.point(i)).collect()
    }

    /// Nearest node to `y`, ties toward the lower node, clamped to `M`.
    pub fn nearest(&self, y: f64) -> usize {
        let x = (y / self.dt - 0.5).ceil();
        if x <= 0.0 {
            0
        } else {
            (x as usize).min(self.m)
        }
    }
}

pub fn build_state_grid(dt: f64, y_cut: f64) -> Result<StateGrid, GridError> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(GridError::NonPositiveStep(dt));
    }
    let m = (y_cut / dt).round();
    if !(m.is_finite() && m >= 10.0) {
        return Err(GridError::TooFewCells { dt, y_cut });
    }
    Ok(StateGrid { dt, m: m as usize })
}

/// Hybrid preemption candidates, sorted ascending with `Never` last.
pub fn build_hybrid_action_grid(
    dt: f64,
    theta_fine: f64,
    theta_max: f64,
    n_log: usize,
) -> Result<Vec<Theta>, GridError> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(GridError::NonPositiveStep(dt));
    }
    if !(theta_fine >= dt && theta_max >= theta_fine && theta_max.is_finite()) {
        return Err(GridError::BadFineSegment {
            theta_fine,
            theta_max,
        });
    }
    if n_log == 0 {
        return Err(GridError::NoLogPoints);
    }
    let quantize = |t: f64| ((t / dt).round() as usize).max(1);
    let fine_steps = quantize(theta_fine);
    let mut steps: Vec<usize> = (1..=fine_steps).collect();
    let ratio = theta_max / theta_fine;
    for k in 1..=n_log {
        let t = if k == n_log {
            theta_max
        } else {
            theta_fine * ratio.powf(k as f64 / n_log as f64)
        };
        steps.push(quantize(t));
    }
    steps.sort_unstable();
    steps.dedup();
    let mut out: Vec<Theta> = steps.into_iter().map(Theta::Finite).collect();
    out.push(Theta::Never);
    Ok(out)
}

/// Round-to-grid lookup of `v` for `y <= y_cut`, linear closure beyond.
pub fn far_field_value(v: &[f64], y: f64, slope: f64, dt: f64) -> Result<f64, GridError> {
    if y < 0.0 || y.is_nan() {
        return Err(GridError::NegativeTime(y));
    }
    let m = v.len() - 1;
    let y_m = m as f64 * dt;
    if y <= y_m {
        let grid = StateGrid { dt, m };
        Ok(v[grid.nearest(y)])
    } else {
        Ok(v[m] + slope * (y - y_m))
    }
}

/// How `θ_max` is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThetaMax {
    Value(f64),
    /// smallest multiple of `dt` whose tail probability is `<= eps`
    TailEps(f64),
}

/// Scenario-level grid parameters before resolution against a distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub dt: f64,
    pub y_cut: Option<f64>,
    pub theta_fine: Option<f64>,
    pub theta_max: ThetaMax,
    pub n_log: usize,
    pub far_field_slope: Option<f64>,
}

pub const DEFAULT_DT: f64 = 0.01;
pub const DEFAULT_TAIL_EPS: f64 = 1e-4;
pub const DEFAULT_N_LOG: usize = 60;
pub const DEFAULT_Y_CUT_MEANS: f64 = 20.0;
pub const DEFAULT_THETA_FINE_MEANS: f64 = 5.0;

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            dt: DEFAULT_DT,
            y_cut: None,
            theta_fine: None,
            theta_max: ThetaMax::TailEps(DEFAULT_TAIL_EPS),
            n_log: DEFAULT_N_LOG,
            far_field_slope: None,
        }
    }
}

/// Fully resolved grids for one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Grids {
    pub state: StateGrid,
    pub theta_fine: f64,
    pub theta_max: f64,
    pub n_log: usize,
    /// preemption candidates, ascending, `Never` last
    pub candidates: Vec<Theta>,
    /// far-field slope `s`
    pub slope: f64,
    /// last node of the quadrature (action) grid `t_j = j·dt`
    pub horizon: usize,
    /// `F̄` at the largest finite candidate
    pub tail_at_max: f64,
}

impl Grids {
    pub fn build(spec: &GridSpec, dist: &ServiceDistribution) -> Result<Self, GridError> {
        let mean = dist.mean();
        let dt = spec.dt;
        if !(dt.is_finite() && dt > 0.0) {
            return Err(GridError::NonPositiveStep(dt));
        }
        let y_cut = spec.y_cut.unwrap_or(DEFAULT_Y_CUT_MEANS * mean);
        let state = build_state_grid(dt, y_cut)?;
        let theta_fine = spec
            .theta_fine
            .unwrap_or(DEFAULT_THETA_FINE_MEANS * mean)
            .max(dt);
        let (theta_max, eps) = match spec.theta_max {
            ThetaMax::Value(v) => (v, None),
            ThetaMax::TailEps(eps) => {
                if !(eps > 0.0 && eps < 1.0) {
                    return Err(GridError::BadTailEps(eps));
                }
                let q = dist.tail_quantile(eps);
                ((q / dt).ceil().max(1.0) * dt, Some(eps))
            }
        };
        let theta_max = theta_max.max(theta_fine);
        let candidates = build_hybrid_action_grid(dt, theta_fine, theta_max, spec.n_log)?;
        let largest = candidates
            .iter()
            .rev()
            .find_map(|c| match c {
                Theta::Finite(j) => Some(*j),
                Theta::Never => None,
            })
            .expect("at least one finite candidate");
        let tail_at_max = dist.tail(largest as f64 * dt);
        if let Some(eps) = eps {
            if tail_at_max > eps * (1.0 + 1e-9) {
                return Err(GridError::TailNotCovered {
                    theta: largest as f64 * dt,
                    tail: tail_at_max,
                    eps,
                });
            }
        }
        Ok(Self {
            horizon: largest.max(state.m),
            state,
            theta_fine,
            theta_max: largest as f64 * dt,
            n_log: spec.n_log,
            candidates,
            slope: spec.far_field_slope.unwrap_or(mean),
            tail_at_max,
        })
    }

    pub fn dt(&self) -> f64 {
        self.state.dt
    }

    pub fn m(&self) -> usize {
        self.state.m
    }

    pub fn y_cut(&self) -> f64 {
        self.state.y_cut()
    }

    /// Same grids with a replacement candidate set (e.g. `{Never}` only).
    pub fn with_candidates(&self, candidates: Vec<Theta>) -> Self {
        Self {
            candidates,
            ..self.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn state_grid_examples() {
        let g = build_state_grid(0.5, 5.0).unwrap();
        assert_eq!(g.points()[..5], [0.0, 0.5, 1.0, 1.5, 2.0]);
        let g = build_state_grid(0.01, 20.0).unwrap();
        assert_eq!(g.len(), 2001);
        assert!((g.y_cut() - 20.0).abs() < 1e-12);
        assert_eq!(
            build_state_grid(0.0, 2.0),
            Err(GridError::NonPositiveStep(0.0))
        );
        assert!(build_state_grid(-1.0, 2.0).is_err());
        assert!(matches!(
            build_state_grid(0.5, 2.0),
            Err(GridError::TooFewCells { .. })
        ));
    }

    #[test]
    fn degenerate_log_segment_collapses() {
        let c = build_hybrid_action_grid(1.0, 3.0, 3.0, 1).unwrap();
        assert_eq!(
            c,
            vec![
                Theta::Finite(1),
                Theta::Finite(2),
                Theta::Finite(3),
                Theta::Never
            ]
        );
    }

    #[test]
    fn hybrid_grid_properties() {
        let c = build_hybrid_action_grid(0.1, 1.0, 100.0, 20).unwrap();
        let fin: Vec<usize> = c
            .iter()
            .filter_map(|t| match t {
                Theta::Finite(j) => Some(*j),
                Theta::Never => None,
            })
            .collect();
        assert_eq!(&fin[..10], &(1..=10).collect::<Vec<_>>()[..]);
        assert!(fin.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(*fin.last().unwrap(), 1000);
        assert_eq!(*c.last().unwrap(), Theta::Never);
        assert_eq!(c.len(), fin.len() + 1);
        assert!(build_hybrid_action_grid(0.1, 2.0, 1.0, 5).is_err());
        assert!(build_hybrid_action_grid(0.1, 1.0, 2.0, 0).is_err());
    }

    #[test]
    fn tail_eps_covers_lomax_tail() {
        let d = ServiceDistribution::lomax(1.0, 2.1).unwrap();
        let g = Grids::build(&GridSpec::default(), &d).unwrap();
        assert!(g.theta_max >= 1e4f64.powf(1.0 / 2.1) - 1.0);
        assert!(g.theta_max < 79.5);
        assert!(g.tail_at_max <= 1e-4);
        assert_eq!(g.slope, d.mean());
        assert_eq!(g.m(), (20.0 * d.mean() / 0.01).round() as usize);
    }

    #[test]
    fn far_field_examples() {
        let v: Vec<f64> = (0..=10).map(|i| i as f64 * 0.3).collect();
        let dt = 0.5;
        assert_eq!(far_field_value(&v, 5.0, 9.0, dt).unwrap(), v[10]);
        let zeros = vec![0.0; 11];
        assert!((far_field_value(&zeros, 8.0, 2.0, dt).unwrap() - 6.0).abs() < 1e-12);
        assert_eq!(far_field_value(&v, 0.75, 1.0, dt).unwrap(), v[1]);
        assert_eq!(far_field_value(&v, 0.76, 1.0, dt).unwrap(), v[2]);
        assert_eq!(far_field_value(&v, 0.74, 1.0, dt).unwrap(), v[1]);
        assert!(far_field_value(&v, -0.1, 1.0, dt).is_err());
    }

    #[test]
    fn far_field_is_continuous_at_cut() {
        let v: Vec<f64> = (0..=20).map(|i| (i as f64).sqrt()).collect();
        let dt = 0.1;
        let at = far_field_value(&v, 2.0, 0.7, dt).unwrap();
        let after = far_field_value(&v, 2.0 + 1e-9, 0.7, dt).unwrap();
        assert!((at - after).abs() < 1e-8);
    }
}
