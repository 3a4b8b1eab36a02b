//! TOML run configuration: one problem plus path-following settings, and an
//! optional `[bench]` table of value lists expanded as a cartesian product.

use std::path::Path;
use std::time::Duration;

use serde::Deserialize;
use thiserror::Error;

use crate::pathfollow::{Algorithm, PathConfig, StartPolicy};
use crate::problems::{BoundaryData, ProblemSpec};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading config: {0}")]
    Io(#[from] std::io::Error),
    #[error("parsing config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// Flat run configuration. Every key is optional; missing keys take the
/// library defaults.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub dim: usize,
    pub p: f64,
    pub alpha: usize,
    pub levels: usize,
    pub cells0: usize,
    /// `zero`, `linear`, `quadratic`, `sine` or a constant.
    pub boundary: String,
    pub forcing: f64,
    pub quad_degree: Option<usize>,
    pub nu: f64,
    pub algorithm: String,
    pub theta: f64,
    /// Absolute starting `t`; overrides `t0_scale` when present.
    pub t0: Option<f64>,
    /// Starting `t` as a multiple of `h^d`.
    pub t0_scale: f64,
    pub rho0: f64,
    pub c_stp: f64,
    pub t_cap: f64,
    pub tol: f64,
    pub tol_final: f64,
    pub max_newton: usize,
    pub direct_cap: usize,
    pub budget_s: f64,
    pub bench: Option<BenchMatrix>,
}

/// Lists to sweep. An empty or missing list keeps the base value.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchMatrix {
    pub algorithm: Vec<String>,
    pub p: Vec<f64>,
    pub alpha: Vec<usize>,
    pub levels: Vec<usize>,
    pub cells0: Vec<usize>,
    pub theta: Vec<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let spec = ProblemSpec::default();
        let path = PathConfig::default();
        let t0_scale = match path.t0 {
            StartPolicy::MeshScaled(c) => c,
            StartPolicy::Absolute(_) => 1.0,
        };
        Self {
            dim: spec.dim,
            p: spec.p,
            alpha: spec.alpha,
            levels: spec.levels,
            cells0: spec.cells0,
            boundary: spec.boundary.to_string(),
            forcing: spec.forcing,
            quad_degree: spec.quad_degree,
            nu: spec.nu,
            algorithm: path.algorithm.to_string(),
            theta: path.theta,
            t0: None,
            t0_scale,
            rho0: path.rho0,
            c_stp: path.c_stp,
            t_cap: path.t_cap,
            tol: path.tol,
            tol_final: path.tol_final,
            max_newton: path.max_newton,
            direct_cap: path.direct_cap,
            budget_s: path.budget.as_secs_f64(),
            bench: None,
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text)?;
        cfg.problem_spec()?;
        cfg.path_config()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn problem_spec(&self) -> Result<ProblemSpec, ConfigError> {
        let boundary: BoundaryData = self.boundary.parse().map_err(|e| ConfigError::Invalid(format!("{e}")))?;
        let spec = ProblemSpec {
            dim: self.dim,
            p: self.p,
            alpha: self.alpha,
            levels: self.levels,
            cells0: self.cells0,
            boundary,
            forcing: self.forcing,
            quad_degree: self.quad_degree,
            nu: self.nu,
        };
        spec.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(spec)
    }

    pub fn path_config(&self) -> Result<PathConfig, ConfigError> {
        let algorithm: Algorithm = self.algorithm.parse().map_err(ConfigError::Invalid)?;
        if !(self.budget_s >= 0.0) || !self.budget_s.is_finite() {
            return Err(ConfigError::Invalid(format!("budget_s = {}", self.budget_s)));
        }
        let cfg = PathConfig {
            algorithm,
            theta: self.theta,
            t0: match self.t0 {
                Some(t) => StartPolicy::Absolute(t),
                None => StartPolicy::MeshScaled(self.t0_scale),
            },
            rho0: self.rho0,
            c_stp: self.c_stp,
            t_cap: self.t_cap,
            tol: self.tol,
            tol_final: self.tol_final,
            max_newton: self.max_newton,
            direct_cap: self.direct_cap,
            budget: Duration::from_secs_f64(self.budget_s),
        };
        cfg.validate().map_err(ConfigError::Invalid)?;
        Ok(cfg)
    }

    /// Every combination of the `[bench]` lists applied over the base
    /// values, in a fixed order (algorithm slowest, theta fastest). Without a
    /// `[bench]` table this is the single base configuration.
    pub fn bench_cells(&self) -> Result<Vec<RunConfig>, ConfigError> {
        let m = self.bench.clone().unwrap_or_default();
        fn or<T: Clone>(list: &[T], base: T) -> Vec<T> {
            if list.is_empty() {
                vec![base]
            } else {
                list.to_vec()
            }
        }
        let mut cells = Vec::new();
        for algorithm in or(&m.algorithm, self.algorithm.clone()) {
            for &p in &or(&m.p, self.p) {
                for &alpha in &or(&m.alpha, self.alpha) {
                    for &cells0 in &or(&m.cells0, self.cells0) {
                        for &levels in &or(&m.levels, self.levels) {
                            for &theta in &or(&m.theta, self.theta) {
                                let cell = RunConfig {
                                    algorithm: algorithm.clone(),
                                    p,
                                    alpha,
                                    cells0,
                                    levels,
                                    theta,
                                    bench: None,
                                    ..self.clone()
                                };
                                cell.problem_spec()?;
                                cell.path_config()?;
                                cells.push(cell);
                            }
                        }
                    }
                }
            }
        }
        Ok(cells)
    }
}
