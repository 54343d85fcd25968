//! Study configuration: a flat `key = value` file plus command-line overrides.
//!
//! ```text
//! # Example 1 on the unit square
//! problem = example1_square
//! k = 1, 2
//! levels = 2, 4, 8, 16, 32
//! tau = 1
//! diagonal = right
//! norms = q_Linf, u_Linf, ustar_Linf
//! out = results
//! svg = true
//! ```

use std::path::{Path, PathBuf};
use std::str::FromStr;

use hdglab_core::{Diagonal, Domain, Quantity};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("invalid value for `{key}`: {message}")]
    Value { key: String, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProblemKind {
    Example1Square,
    Example1LShape,
    Example2Control,
    CustomManufactured,
}

impl ProblemKind {
    pub fn name(self) -> &'static str {
        match self {
            ProblemKind::Example1Square => "example1_square",
            ProblemKind::Example1LShape => "example1_lshape",
            ProblemKind::Example2Control => "example2_control",
            ProblemKind::CustomManufactured => "custom-manufactured",
        }
    }

    pub fn default_norms(self) -> Vec<Quantity> {
        use Quantity::*;
        match self {
            ProblemKind::Example2Control => vec![GL2Boundary, UL2, ZL2, PL2, QL2],
            _ => vec![QLinf, ULinf, UstarLinf, QL2Boundary, UL2Boundary, UstarL2Boundary],
        }
    }
}

impl FromStr for ProblemKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        [
            ProblemKind::Example1Square,
            ProblemKind::Example1LShape,
            ProblemKind::Example2Control,
            ProblemKind::CustomManufactured,
        ]
        .into_iter()
        .find(|p| p.name() == s)
        .ok_or_else(|| format!("unknown problem `{s}`"))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StudyConfig {
    pub problem: ProblemKind,
    pub degrees: Vec<usize>,
    pub levels: Vec<usize>,
    pub tau: f64,
    pub diagonal: Diagonal,
    pub gamma: f64,
    pub norms: Vec<Quantity>,
    pub out_dir: Option<PathBuf>,
    pub svg: bool,
    /// Catalog entry and domain for `custom-manufactured`.
    pub solution: String,
    pub domain: Domain,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            problem: ProblemKind::Example1Square,
            degrees: vec![1],
            levels: Vec::new(),
            tau: 1.0,
            diagonal: Diagonal::Right,
            gamma: 1.0,
            norms: ProblemKind::Example1Square.default_norms(),
            out_dir: None,
            svg: false,
            solution: "sinsin".into(),
            domain: Domain::UnitSquare,
        }
    }
}

fn list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<T>().map_err(|e| ConfigError::Value { key: key.into(), message: e.to_string() }))
        .collect()
}

fn scalar<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.parse::<T>().map_err(|e| ConfigError::Value { key: key.into(), message: e.to_string() })
}

impl StudyConfig {
    /// Apply one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let value = value.trim();
        match key.trim() {
            "problem" => {
                let norms_were_default = self.norms == self.problem.default_norms();
                self.problem = scalar(key, value)?;
                if norms_were_default {
                    self.norms = self.problem.default_norms();
                }
            }
            "k" | "degrees" => self.degrees = list(key, value)?,
            "levels" => self.levels = list(key, value)?,
            "tau" => self.tau = scalar(key, value)?,
            "diagonal" => self.diagonal = scalar(key, value)?,
            "gamma" => self.gamma = scalar(key, value)?,
            "norms" => self.norms = list(key, value)?,
            "out" => self.out_dir = Some(PathBuf::from(value)),
            "svg" => self.svg = scalar(key, value)?,
            "solution" => self.solution = value.to_string(),
            "domain" => self.domain = scalar(key, value)?,
            other => return Err(ConfigError::UnknownKey(other.to_string())),
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut config = StudyConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| ConfigError::Syntax { line: i + 1, message: "expected `key = value`".into() })?;
            config.set(key, value)?;
        }
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.into(), source })?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.levels.is_empty() {
            return Err(ConfigError::Invalid("levels must not be empty".into()));
        }
        if self.levels[0] == 0 {
            return Err(ConfigError::Invalid("levels must be positive".into()));
        }
        if let Some(w) = self.levels.windows(2).find(|w| w[1] != 2 * w[0]) {
            return Err(ConfigError::Invalid(format!("levels must double: {} is followed by {}", w[0], w[1])));
        }
        if self.degrees.is_empty() || self.degrees.iter().any(|&k| k > 4) {
            return Err(ConfigError::Invalid("degrees must be a nonempty subset of 0..=4".into()));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(ConfigError::Invalid("tau must be positive".into()));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(ConfigError::Invalid("gamma must be positive".into()));
        }
        if self.norms.is_empty() {
            return Err(ConfigError::Invalid("norms must not be empty".into()));
        }
        let control = self.problem == ProblemKind::Example2Control;
        let allowed = |q: &Quantity| {
            if control {
                matches!(q, Quantity::GL2Boundary | Quantity::UL2 | Quantity::ZL2 | Quantity::PL2 | Quantity::QL2)
            } else {
                !q.is_control()
            }
        };
        if let Some(q) = self.norms.iter().find(|q| !allowed(q)) {
            return Err(ConfigError::Invalid(format!("{q} is not available for {}", self.problem.name())));
        }
        if self.problem == ProblemKind::CustomManufactured && hdglab_core::problems::catalog(&self.solution).is_none() {
            return Err(ConfigError::Invalid(format!(
                "unknown solution `{}`; choose one of {}",
                self.solution,
                hdglab_core::problems::CATALOG.join(", ")
            )));
        }
        let lshape = self.problem == ProblemKind::Example1LShape
            || (self.problem == ProblemKind::CustomManufactured && self.domain == Domain::LShape);
        if lshape && self.levels.iter().any(|n| n % 2 != 0) {
            return Err(ConfigError::Invalid("L-shape levels must be even".into()));
        }
        Ok(())
    }
}
