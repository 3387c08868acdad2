//! Scenario configuration files (JSON, unknown fields rejected).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distributions::{DistributionError, ServiceDistribution};
use crate::grids::{GridSpec, ThetaMax, DEFAULT_DT, DEFAULT_N_LOG, DEFAULT_TAIL_EPS};
use crate::simulator::{Scenario, SimConfig};
use crate::solver::SolverConfig;

pub const SUPPORTED_FAMILIES: &[&str] = &["exponential", "lomax", "lognormal", "samples"];

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: at `{field}`: {message}")]
    Parse {
        path: String,
        field: String,
        message: String,
    },
    #[error("`{field}`: {message}")]
    Invalid { field: String, message: String },
    #[error("`{field}`: {source}")]
    Distribution {
        field: String,
        #[source]
        source: DistributionError,
    },
}

impl ConfigError {
    fn invalid(field: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError::Invalid {
            field: field.into(),
            message: message.into(),
        }
    }

    pub fn is_io(&self) -> bool {
        match self {
            ConfigError::Io { .. } => true,
            ConfigError::Distribution { source, .. } => matches!(source, DistributionError::Io(_)),
            _ => false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct DistributionConfig {
    pub family: Option<String>,
    pub rate: Option<f64>,
    pub scale: Option<f64>,
    pub shape: Option<f64>,
    pub mu: Option<f64>,
    pub sigma2: Option<f64>,
    /// sample file for the `samples` family, relative to the config file
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub dt: Option<f64>,
    pub y_cut: Option<f64>,
    pub theta_fine: Option<f64>,
    pub theta_max: Option<f64>,
    pub tail_eps: Option<f64>,
    pub n_log: Option<usize>,
    pub far_field_slope: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub eps_v: Option<f64>,
    pub eps_rho: Option<f64>,
    pub max_iter: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    pub cycles: Option<u64>,
    pub warmup_cycles: Option<u64>,
    pub batches: Option<u64>,
    pub seed: Option<u64>,
    pub max_preemptions_per_chain: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    #[serde(default)]
    pub distribution: DistributionConfig,
    pub kappa_s: f64,
    pub kappa_p: f64,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub sim: SimSection,
}

/// A list of scenarios sharing one simulation section.
#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigSet {
    pub scenarios: Vec<ScenarioConfig>,
    #[serde(default)]
    pub sim: SimSection,
}

fn parse_json<T: serde::de::DeserializeOwned>(text: &str, origin: &str) -> Result<T, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| ConfigError::Parse {
        path: origin.to_string(),
        field: e.path().to_string(),
        message: e.inner().to_string(),
    })
}

fn read(path: &Path) -> Result<String, ConfigError> {
    std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        parse_json(text, "<config>")
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let mut cfg: Self = parse_json(&read(path)?, &path.display().to_string())?;
        cfg.resolve_paths(path.parent());
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: Option<&Path>) {
        if let (Some(p), Some(base)) = (&self.distribution.path, base) {
            if p.is_relative() {
                self.distribution.path = Some(base.join(p));
            }
        }
    }

    /// Checks costs, tolerances and grid fields that do not depend on the
    /// distribution.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.name.trim().is_empty() {
            return Err(ConfigError::invalid("name", "must not be empty"));
        }
        for (field, v) in [("kappa_s", self.kappa_s), ("kappa_p", self.kappa_p)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(ConfigError::invalid(field, format!("must be > 0, got {v}")));
            }
        }
        let g = &self.grid;
        if g.theta_max.is_some() && g.tail_eps.is_some() {
            return Err(ConfigError::invalid(
                "grid",
                "give either `theta_max` or `tail_eps`, not both",
            ));
        }
        for (field, v) in [
            ("grid.dt", g.dt),
            ("grid.y_cut", g.y_cut),
            ("grid.theta_fine", g.theta_fine),
            ("grid.theta_max", g.theta_max),
            ("grid.far_field_slope", g.far_field_slope),
            ("solver.eps_v", self.solver.eps_v),
            ("solver.eps_rho", self.solver.eps_rho),
        ] {
            if let Some(v) = v {
                if !(v.is_finite() && v > 0.0) {
                    return Err(ConfigError::invalid(field, format!("must be > 0, got {v}")));
                }
            }
        }
        if let Some(eps) = g.tail_eps {
            if !(eps > 0.0 && eps < 1.0) {
                return Err(ConfigError::invalid(
                    "grid.tail_eps",
                    format!("must lie in (0, 1), got {eps}"),
                ));
            }
        }
        if g.n_log == Some(0) {
            return Err(ConfigError::invalid("grid.n_log", "must be >= 1"));
        }
        if self.solver.max_iter == Some(0) {
            return Err(ConfigError::invalid("solver.max_iter", "must be >= 1"));
        }
        Ok(())
    }

    pub fn service_distribution(&self) -> Result<ServiceDistribution, ConfigError> {
        build_distribution(&self.distribution)
    }

    pub fn grid_spec(&self) -> GridSpec {
        let g = &self.grid;
        GridSpec {
            dt: g.dt.unwrap_or(DEFAULT_DT),
            y_cut: g.y_cut,
            theta_fine: g.theta_fine,
            theta_max: match g.theta_max {
                Some(v) => ThetaMax::Value(v),
                None => ThetaMax::TailEps(g.tail_eps.unwrap_or(DEFAULT_TAIL_EPS)),
            },
            n_log: g.n_log.unwrap_or(DEFAULT_N_LOG),
            far_field_slope: g.far_field_slope,
        }
    }

    pub fn solver_config(&self) -> SolverConfig {
        let mut c = SolverConfig::new(self.kappa_s, self.kappa_p);
        if let Some(v) = self.solver.eps_v {
            c.eps_v = v;
        }
        if let Some(v) = self.solver.eps_rho {
            c.eps_rho = v;
        }
        if let Some(v) = self.solver.max_iter {
            c.max_iter = v;
        }
        c
    }

    pub fn sim_config(&self) -> SimConfig {
        self.sim.apply(SimConfig::default())
    }

    pub fn scenario(&self) -> Result<Scenario, ConfigError> {
        self.validate()?;
        Ok(Scenario {
            name: self.name.clone(),
            dist: self.service_distribution()?,
            kappa_s: self.kappa_s,
            kappa_p: self.kappa_p,
            grid: self.grid_spec(),
            solver: self.solver_config(),
        })
    }
}

impl SimSection {
    pub fn apply(&self, base: SimConfig) -> SimConfig {
        let mut c = match self.cycles {
            Some(n) => SimConfig {
                seed: base.seed,
                ..SimConfig::with_cycles(n)
            },
            None => base,
        };
        if let Some(v) = self.warmup_cycles {
            c.warmup_cycles = v;
        }
        if let Some(v) = self.batches {
            c.batches = v;
        }
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if let Some(v) = self.max_preemptions_per_chain {
            c.max_preemptions_per_chain = v;
        }
        c
    }
}

impl ConfigSet {
    /// Accepts `{"scenarios": [...], "sim": {...}}` or a bare array of
    /// scenarios.
    pub fn from_json(text: &str, origin: &str) -> Result<Self, ConfigError> {
        if text.trim_start().starts_with('[') {
            Ok(ConfigSet {
                scenarios: parse_json(text, origin)?,
                sim: SimSection::default(),
            })
        } else {
            parse_json(text, origin)
        }
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let mut set = Self::from_json(&read(path)?, &path.display().to_string())?;
        for s in &mut set.scenarios {
            s.resolve_paths(path.parent());
        }
        Ok(set)
    }
}

fn need(value: Option<f64>, family: &str, field: &str) -> Result<f64, ConfigError> {
    value.ok_or_else(|| {
        ConfigError::invalid(
            format!("distribution.{field}"),
            format!("required for family `{family}`"),
        )
    })
}

pub fn build_distribution(cfg: &DistributionConfig) -> Result<ServiceDistribution, ConfigError> {
    let family = cfg.family.as_deref().ok_or_else(|| {
        ConfigError::invalid(
            "distribution.family",
            format!(
                "missing; supported families: {}",
                SUPPORTED_FAMILIES.join(", ")
            ),
        )
    })?;
    let allowed: &[&str] = match family {
        "exponential" => &["rate"],
        "lomax" => &["scale", "shape"],
        "lognormal" => &["mu", "sigma2"],
        "samples" => &["path"],
        other => {
            return Err(ConfigError::invalid(
                "distribution.family",
                format!(
                    "unknown family `{other}`; supported families: {}",
                    SUPPORTED_FAMILIES.join(", ")
                ),
            ))
        }
    };
    let given = [
        ("rate", cfg.rate.is_some()),
        ("scale", cfg.scale.is_some()),
        ("shape", cfg.shape.is_some()),
        ("mu", cfg.mu.is_some()),
        ("sigma2", cfg.sigma2.is_some()),
        ("path", cfg.path.is_some()),
    ];
    for (field, present) in given {
        if present && !allowed.contains(&field) {
            return Err(ConfigError::invalid(
                format!("distribution.{field}"),
                format!("not a parameter of family `{family}`"),
            ));
        }
    }
    let wrap = |source| ConfigError::Distribution {
        field: "distribution".into(),
        source,
    };
    match family {
        "exponential" => {
            ServiceDistribution::exponential(need(cfg.rate, family, "rate")?).map_err(wrap)
        }
        "lomax" => ServiceDistribution::lomax(
            need(cfg.scale, family, "scale")?,
            need(cfg.shape, family, "shape")?,
        )
        .map_err(wrap),
        "lognormal" => ServiceDistribution::log_normal(
            need(cfg.mu, family, "mu")?,
            need(cfg.sigma2, family, "sigma2")?,
        )
        .map_err(wrap),
        _ => {
            let path = cfg.path.as_ref().ok_or_else(|| {
                ConfigError::invalid("distribution.path", "required for family `samples`")
            })?;
            ServiceDistribution::from_samples(path).map_err(wrap)
        }
    }
}

/// The four scenarios of the reference comparison table (`κ_s = 1`).
pub fn table1_scenarios() -> Vec<ScenarioConfig> {
    let lomax = DistributionConfig {
        family: Some("lomax".into()),
        scale: Some(1.0),
        shape: Some(2.1),
        ..Default::default()
    };
    let lognormal = |mu: f64, sigma2: f64| DistributionConfig {
        family: Some("lognormal".into()),
        mu: Some(mu),
        sigma2: Some(sigma2),
        ..Default::default()
    };
    let scenario = |name: &str, distribution: DistributionConfig, kappa_p: f64| ScenarioConfig {
        name: name.into(),
        distribution,
        kappa_s: 1.0,
        kappa_p,
        grid: GridConfig::default(),
        solver: SolverSection::default(),
        sim: SimSection::default(),
    };
    vec![
        scenario("lomax_kp1", lomax.clone(), 1.0),
        scenario("lomax_kp5", lomax, 5.0),
        scenario("lognormal_l1", lognormal(-1.31, 4.0), 1.0),
        scenario("lognormal_l2", lognormal(-2.31, 6.0), 1.0),
    ]
}
