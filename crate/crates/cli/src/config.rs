//! Analysis settings: defaults, then the seed environment variable, then an
//! optional `key = value` file, then command-line flags.

use clap::ValueEnum;
use serde::Serialize;
use sizeshare_core::market_structure::{LsBasis, DEFAULT_MIN_CELL_SIZE, MIN_CELL_SIZE_FLOOR};

use crate::error::{CliError, CliResult};

pub const SEED_ENV: &str = "SIZESHARE_SEED";
pub const DEFAULT_SIGMA: f64 = 3.0;
pub const DEFAULT_SEED: u64 = 0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BasisArg {
    #[value(name = "value-added", alias = "value_added", alias = "va")]
    ValueAdded,
    Output,
}

impl From<BasisArg> for LsBasis {
    fn from(b: BasisArg) -> Self {
        match b {
            BasisArg::ValueAdded => LsBasis::ValueAdded,
            BasisArg::Output => LsBasis::Output,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisConfig {
    pub basis: LsBasis,
    pub min_cell_size: usize,
    pub hill_k_fraction: f64,
    pub sigma: f64,
    pub seed: u64,
    pub winsorize: bool,
    pub output_format: OutputFormat,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            basis: LsBasis::ValueAdded,
            min_cell_size: DEFAULT_MIN_CELL_SIZE,
            hill_k_fraction: sizeshare_core::estimation::DEFAULT_HILL_FRACTION,
            sigma: DEFAULT_SIGMA,
            seed: DEFAULT_SEED,
            winsorize: false,
            output_format: OutputFormat::Json,
        }
    }
}

/// Values given on the command line; `None` keeps the lower layer.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub basis: Option<LsBasis>,
    pub min_cell_size: Option<usize>,
    pub hill_k_fraction: Option<f64>,
    pub sigma: Option<f64>,
    pub seed: Option<u64>,
    pub winsorize: bool,
    pub output_format: Option<OutputFormat>,
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str, line: usize) -> CliResult<T> {
    value
        .parse()
        .map_err(|_| CliError::Usage(format!("config line {line}: cannot parse {key} = {value:?}")))
}

fn parse_bool(value: &str, line: usize) -> CliResult<bool> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(CliError::Usage(format!("config line {line}: expected a boolean, got {value:?}"))),
    }
}

impl AnalysisConfig {
    /// Defaults with the seed taken from the environment when set.
    pub fn from_env_seed(env_seed: Option<&str>) -> CliResult<Self> {
        let mut cfg = Self::default();
        if let Some(s) = env_seed {
            cfg.seed = s
                .trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("{SEED_ENV} must be an unsigned integer, got {s:?}")))?;
        }
        Ok(cfg)
    }

    /// Apply a `key = value` file. Blank lines and `#` comments are skipped.
    pub fn apply_file_text(&mut self, text: &str) -> CliResult<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("config line {line}: expected key = value")))?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "basis" => {
                    let b = BasisArg::from_str(value, true)
                        .map_err(|_| CliError::Usage(format!("config line {line}: unknown basis {value:?}")))?;
                    self.basis = b.into();
                }
                "min_cell_size" => self.min_cell_size = parse_value(key, value, line)?,
                "hill_k_fraction" => self.hill_k_fraction = parse_value(key, value, line)?,
                "sigma" => self.sigma = parse_value(key, value, line)?,
                "seed" => self.seed = parse_value(key, value, line)?,
                "winsorize" => self.winsorize = parse_bool(value, line)?,
                "output_format" | "format" => {
                    self.output_format = OutputFormat::from_str(value, true)
                        .map_err(|_| CliError::Usage(format!("config line {line}: unknown format {value:?}")))?;
                }
                other => return Err(CliError::Usage(format!("config line {line}: unknown key {other:?}"))),
            }
        }
        Ok(())
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(b) = o.basis {
            self.basis = b;
        }
        if let Some(m) = o.min_cell_size {
            self.min_cell_size = m;
        }
        if let Some(h) = o.hill_k_fraction {
            self.hill_k_fraction = h;
        }
        if let Some(s) = o.sigma {
            self.sigma = s;
        }
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if o.winsorize {
            self.winsorize = true;
        }
        if let Some(f) = o.output_format {
            self.output_format = f;
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        if !(self.sigma.is_finite() && self.sigma > 1.0) {
            return Err(CliError::Usage(format!("sigma must exceed 1, got {}", self.sigma)));
        }
        if !(self.hill_k_fraction > 0.0 && self.hill_k_fraction <= 0.5) {
            return Err(CliError::Usage(format!(
                "hill_k_fraction must lie in (0, 0.5], got {}",
                self.hill_k_fraction
            )));
        }
        if self.min_cell_size < MIN_CELL_SIZE_FLOOR {
            return Err(CliError::Usage(format!(
                "min_cell_size must be at least {MIN_CELL_SIZE_FLOOR}, got {}",
                self.min_cell_size
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = AnalysisConfig::default();
        assert_eq!(c.basis, LsBasis::ValueAdded);
        assert_eq!(c.min_cell_size, 30);
        assert_eq!(c.hill_k_fraction, 0.10);
        assert_eq!(c.sigma, 3.0);
        assert!(!c.winsorize);
        assert_eq!(c.output_format, OutputFormat::Json);
        assert!(c.validate().is_ok());
    }

    #[test]
    fn layering() {
        let mut c = AnalysisConfig::from_env_seed(Some("17")).unwrap();
        assert_eq!(c.seed, 17);
        c.apply_file_text("# settings\nsigma = 4\nseed=5\nbasis = output\nwinsorize = yes\n\n")
            .unwrap();
        assert_eq!((c.sigma, c.seed, c.basis, c.winsorize), (4.0, 5, LsBasis::Output, true));
        c.apply(&Overrides {
            sigma: Some(2.5),
            ..Default::default()
        });
        assert_eq!((c.sigma, c.seed), (2.5, 5));
    }

    #[test]
    fn bad_input() {
        assert!(AnalysisConfig::from_env_seed(Some("-3")).is_err());
        let mut c = AnalysisConfig::default();
        assert!(c.apply_file_text("colour = blue").is_err());
        assert!(c.apply_file_text("sigma").is_err());
        assert!(c.apply_file_text("sigma = x").is_err());
        c.sigma = 1.0;
        assert!(c.validate().is_err());
    }
}
