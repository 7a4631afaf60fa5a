//! Run configuration: defaults, flat `key = value` files and overrides.

use std::path::PathBuf;

use dssa_core::{FitnessConfig, GaConfig};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("config line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("config line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("config line {line}: bad value `{value}` for `{key}`")]
    BadValue {
        line: usize,
        key: String,
        value: String,
    },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub netlist: PathBuf,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub train: usize,
    pub test: usize,
    pub points_per_decade: usize,
    pub max_terms: usize,
    pub ga: GaConfig,
    pub fitness: FitnessConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            netlist: PathBuf::new(),
            output_dir: PathBuf::from("."),
            seed: 1,
            train: 100,
            test: 50,
            points_per_decade: 3,
            max_terms: 15,
            ga: GaConfig::default(),
            fitness: FitnessConfig::default(),
        }
    }
}

fn parse_value<T: std::str::FromStr>(
    line: usize,
    key: &str,
    value: &str,
) -> Result<T, ConfigError> {
    value.parse().map_err(|_| ConfigError::BadValue {
        line,
        key: key.to_string(),
        value: value.to_string(),
    })
}

impl RunConfig {
    /// Applies one `key = value` setting.
    pub fn set(&mut self, line: usize, key: &str, value: &str) -> Result<(), ConfigError> {
        match key {
            "seed" => self.seed = parse_value(line, key, value)?,
            "train" => self.train = parse_value(line, key, value)?,
            "test" => self.test = parse_value(line, key, value)?,
            "points_per_decade" => self.points_per_decade = parse_value(line, key, value)?,
            "max_terms" => self.max_terms = parse_value(line, key, value)?,
            "population" => self.ga.population = parse_value(line, key, value)?,
            "iterations" => self.ga.iterations = parse_value(line, key, value)?,
            "p_r" => self.ga.p_r = parse_value(line, key, value)?,
            "p_c" => self.ga.p_c = parse_value(line, key, value)?,
            "p_m" => self.ga.p_m = parse_value(line, key, value)?,
            "ts_init_zero" => self.ga.ts_init_probs[0] = parse_value(line, key, value)?,
            "ts_init_plus" => self.ga.ts_init_probs[1] = parse_value(line, key, value)?,
            "ts_init_minus" => self.ga.ts_init_probs[2] = parse_value(line, key, value)?,
            "parallel" => self.ga.parallel = parse_value(line, key, value)?,
            "w1" => self.fitness.w1 = parse_value(line, key, value)?,
            "w2" => self.fitness.w2 = parse_value(line, key, value)?,
            "t_dc" => self.fitness.t_dc = parse_value(line, key, value)?,
            "t_root" => self.fitness.t_root = parse_value(line, key, value)?,
            "penalty_lambda" => self.fitness.penalty_lambda = parse_value(line, key, value)?,
            "error_clamp_db" => self.fitness.error_clamp_db = parse_value(line, key, value)?,
            "output_dir" => self.output_dir = PathBuf::from(value),
            _ => {
                return Err(ConfigError::UnknownKey {
                    line,
                    key: key.to_string(),
                })
            }
        }
        Ok(())
    }

    /// Applies a config file body. `#` starts a comment.
    pub fn apply_file(&mut self, text: &str) -> Result<(), ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or(ConfigError::Syntax { line: i + 1 })?;
            self.set(i + 1, key.trim(), value.trim())?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.ga
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.train == 0 || self.test == 0 {
            return Err(ConfigError::Invalid(
                "train and test counts must be positive".into(),
            ));
        }
        if self.max_terms == 0 || self.points_per_decade == 0 {
            return Err(ConfigError::Invalid(
                "max_terms and points_per_decade must be positive".into(),
            ));
        }
        let f = &self.fitness;
        if f.t_dc <= 0.0 || f.t_root <= 0.0 || f.error_clamp_db <= 0.0 || f.penalty_lambda < 0.0 {
            return Err(ConfigError::Invalid("tolerances must be positive".into()));
        }
        Ok(())
    }
}
