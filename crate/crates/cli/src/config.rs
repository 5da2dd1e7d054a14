//! TOML scenario configuration with flat sections `domain`, `data`,
//! `solver`, `game` and `output`. Every key is optional; scenario defaults
//! fill the gaps and the resolved values are echoed into `meta.json`.

use std::path::Path;

use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid `{key}`: {reason}")]
    Invalid { key: &'static str, reason: String },
}

impl ConfigError {
    /// Dotted key of the offending entry, when known.
    pub fn key(&self) -> Option<&'static str> {
        match self {
            ConfigError::Invalid { key, .. } => Some(key),
            _ => None,
        }
    }
}

fn bad(key: &'static str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { key, reason: reason.into() }
}

#[derive(Debug, Clone, Default, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DomainSection {
    pub dim: Option<usize>,
    pub radius: Option<f64>,
    pub center: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    /// Gradient of the affine boundary datum.
    pub affine: Option<Vec<f64>>,
    pub offset: Option<f64>,
    /// Half-space {x·direction > theta}.
    pub direction: Option<Vec<f64>>,
    pub theta: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub epsilon: Option<f64>,
    pub h: Option<f64>,
    pub j: Option<usize>,
    pub horizon: Option<f64>,
    pub resolution: Option<usize>,
    pub tolerance: Option<f64>,
    pub max_sweeps: Option<usize>,
    pub coincidence_tol: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GameSection {
    pub runs: Option<usize>,
    pub tail_runs: Option<usize>,
    pub step_cap: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    /// Number of time levels exported as field CSVs.
    pub levels: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    #[serde(default)]
    pub domain: DomainSection,
    #[serde(default)]
    pub data: DataSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub game: GameSection,
    #[serde(default)]
    pub output: OutputSection,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let raw: RawConfig = toml::from_str(text)?;
        raw.check_given()?;
        Ok(raw)
    }

    /// Checks that only need the keys present in the file.
    fn check_given(&self) -> Result<(), ConfigError> {
        let d = &self.domain;
        if let Some(n) = d.dim {
            if !(1..=lambdaflow::domain::MAX_DIM).contains(&n) {
                return Err(bad("domain.dim", format!("must be in 1..=6, got {n}")));
            }
            if let Some(j) = self.solver.j {
                if j == 0 || j > n {
                    return Err(bad("solver.j", format!("must satisfy 1 <= j <= N = {n}, got {j}")));
                }
            }
        }
        if self.solver.j == Some(0) {
            return Err(bad("solver.j", "must be at least 1"));
        }
        positive("domain.radius", d.radius)?;
        let s = &self.solver;
        positive("solver.epsilon", s.epsilon)?;
        positive("solver.h", s.h)?;
        positive("solver.horizon", s.horizon)?;
        positive("solver.tolerance", s.tolerance)?;
        positive("solver.coincidence_tol", s.coincidence_tol)?;
        if let (Some(e), Some(h)) = (s.epsilon, s.h) {
            if h > e {
                return Err(bad("solver.h", format!("must satisfy h <= epsilon = {e}, got {h}")));
            }
        }
        at_least("solver.resolution", s.resolution, 1)?;
        at_least("solver.max_sweeps", s.max_sweeps, 1)?;
        at_least("game.runs", self.game.runs, 2)?;
        at_least("game.tail_runs", self.game.tail_runs, 2)?;
        at_least("game.step_cap", self.game.step_cap, 1)?;
        at_least("output.levels", self.output.levels, 1)?;
        finite_vec("domain.center", &d.center)?;
        finite_vec("data.affine", &self.data.affine)?;
        finite_vec("data.direction", &self.data.direction)?;
        if let Some(o) = self.data.offset {
            if !o.is_finite() {
                return Err(bad("data.offset", "must be finite"));
            }
        }
        if let Some(t) = self.data.theta {
            if !t.is_finite() {
                return Err(bad("data.theta", "must be finite"));
            }
        }
        Ok(())
    }
}

fn positive(key: &'static str, v: Option<f64>) -> Result<(), ConfigError> {
    match v {
        Some(x) if !(x > 0.0 && x.is_finite()) => Err(bad(key, format!("must be positive and finite, got {x}"))),
        _ => Ok(()),
    }
}

fn at_least(key: &'static str, v: Option<usize>, min: usize) -> Result<(), ConfigError> {
    match v {
        Some(x) if x < min => Err(bad(key, format!("must be at least {min}, got {x}"))),
        _ => Ok(()),
    }
}

fn finite_vec(key: &'static str, v: &Option<Vec<f64>>) -> Result<(), ConfigError> {
    match v {
        Some(x) if x.iter().any(|c| !c.is_finite()) => Err(bad(key, "entries must be finite")),
        _ => Ok(()),
    }
}

pub fn parse_config(path: &Path) -> Result<RawConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
    RawConfig::parse(&text)
}

/// Scenario defaults, overridden key by key by the file.
#[derive(Debug, Clone, PartialEq)]
pub struct Defaults {
    pub dims: &'static [usize],
    pub dim: usize,
    pub radius: f64,
    /// Empty means the origin.
    pub center: &'static [f64],
    pub epsilon: f64,
    /// h as a fraction of epsilon when not given.
    pub h_ratio: f64,
    pub j: usize,
    pub horizon: f64,
    pub resolution: usize,
    pub tolerance: f64,
    pub max_sweeps: usize,
    pub runs: usize,
    pub tail_runs: usize,
    pub levels: usize,
}

impl Default for Defaults {
    fn default() -> Self {
        Self {
            dims: &[2],
            dim: 2,
            radius: 1.0,
            center: &[],
            epsilon: 0.1,
            h_ratio: 0.5,
            j: 1,
            horizon: 1.0,
            resolution: 48,
            tolerance: 1e-9,
            max_sweeps: 200_000,
            runs: 5000,
            tail_runs: 10_000,
            levels: 5,
        }
    }
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Resolved {
    pub dim: usize,
    pub radius: f64,
    pub center: Vec<f64>,
    pub affine: Vec<f64>,
    pub offset: f64,
    pub direction: Vec<f64>,
    pub theta: f64,
    pub epsilon: f64,
    pub h: f64,
    pub j: usize,
    pub horizon: f64,
    pub resolution: usize,
    pub tolerance: f64,
    pub max_sweeps: usize,
    pub coincidence_tol: f64,
    pub runs: usize,
    pub tail_runs: usize,
    pub step_cap: usize,
    pub levels: usize,
}

impl RawConfig {
    pub fn resolve(&self, d: &Defaults) -> Result<Resolved, ConfigError> {
        self.check_given()?;
        let dim = self.domain.dim.unwrap_or(d.dim);
        if !d.dims.contains(&dim) {
            return Err(bad("domain.dim", format!("this scenario supports N in {:?}, got {dim}", d.dims)));
        }
        let center = self.domain.center.clone().unwrap_or_else(|| {
            if d.center.len() == dim {
                d.center.to_vec()
            } else {
                vec![0.0; dim]
            }
        });
        if center.len() != dim {
            return Err(bad("domain.center", format!("needs {dim} entries, got {}", center.len())));
        }
        let j = self.solver.j.unwrap_or(d.j.min(dim));
        if j == 0 || j > dim {
            return Err(bad("solver.j", format!("must satisfy 1 <= j <= N = {dim}, got {j}")));
        }
        let epsilon = self.solver.epsilon.unwrap_or(d.epsilon);
        let h = self.solver.h.unwrap_or(epsilon * d.h_ratio);
        if h > epsilon {
            return Err(bad("solver.h", format!("must satisfy h <= epsilon = {epsilon}, got {h}")));
        }
        let affine = self.data.affine.clone().unwrap_or_else(|| {
            let base = [0.5, -0.3, 0.2, 0.1, -0.1, 0.05];
            base[..dim].to_vec()
        });
        if affine.len() != dim {
            return Err(bad("data.affine", format!("needs {dim} entries, got {}", affine.len())));
        }
        let direction = self.data.direction.clone().unwrap_or_else(|| {
            let mut e = vec![0.0; dim];
            e[0] = 1.0;
            e
        });
        if direction.len() != dim {
            return Err(bad("data.direction", format!("needs {dim} entries, got {}", direction.len())));
        }
        if direction.iter().all(|&c| c == 0.0) {
            return Err(bad("data.direction", "must be nonzero"));
        }
        Ok(Resolved {
            dim,
            radius: self.domain.radius.unwrap_or(d.radius),
            center,
            affine,
            offset: self.data.offset.unwrap_or(0.1),
            direction,
            theta: self.data.theta.unwrap_or(0.0),
            epsilon,
            h,
            j,
            horizon: self.solver.horizon.unwrap_or(d.horizon),
            resolution: self.solver.resolution.unwrap_or(d.resolution),
            tolerance: self.solver.tolerance.unwrap_or(d.tolerance),
            max_sweeps: self.solver.max_sweeps.unwrap_or(d.max_sweeps),
            coincidence_tol: self.solver.coincidence_tol.unwrap_or(f64::max(0.02, 3.0 * epsilon)),
            runs: self.game.runs.unwrap_or(d.runs),
            tail_runs: self.game.tail_runs.unwrap_or(d.tail_runs),
            step_cap: self.game.step_cap.unwrap_or(10_000_000),
            levels: self.output.levels.unwrap_or(d.levels),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let raw = RawConfig::parse("").unwrap();
        assert_eq!(raw, RawConfig::default());
        let r = raw.resolve(&Defaults::default()).unwrap();
        assert_eq!(r.dim, 2);
        assert_eq!(r.h, 0.05);
        assert_eq!(r.coincidence_tol, 0.30000000000000004);
    }

    #[test]
    fn errors_name_the_key() {
        let e = RawConfig::parse("[solver]\nepsilon = 0.1\nh = 0.2\n").unwrap_err();
        assert_eq!(e.key(), Some("solver.h"));
        let e = RawConfig::parse("[domain]\ndim = 2\n[solver]\nj = 4\n").unwrap_err();
        assert_eq!(e.key(), Some("solver.j"));
        let e = RawConfig::parse("[solver]\nj = 4\n").unwrap().resolve(&Defaults::default()).unwrap_err();
        assert_eq!(e.key(), Some("solver.j"));
        let e = RawConfig::parse("[solver]\nh = 0.2\n").unwrap().resolve(&Defaults::default()).unwrap_err();
        assert_eq!(e.key(), Some("solver.h"));
        assert!(matches!(RawConfig::parse("[solver]\nbogus = 1\n"), Err(ConfigError::Parse(_))));
        assert!(matches!(RawConfig::parse("[nope]\n"), Err(ConfigError::Parse(_))));
        let e = RawConfig::parse("[domain]\ncenter = [0.0]\n").unwrap().resolve(&Defaults::default()).unwrap_err();
        assert_eq!(e.key(), Some("domain.center"));
    }
}
