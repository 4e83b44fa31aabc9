use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use elcc_core::fixture::FixtureSpec;
use elcc_core::reliability::SearchMode;
use elcc_core::uc::UcParams;
use elcc_milp::SolverOptions;

use crate::error::CliError;

/// Environment variable naming the default config file.
pub const CONFIG_ENV: &str = "ELCC_CONFIG";

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub system: Option<PathBuf>,
    pub weather: Option<PathBuf>,
    pub load: Option<PathBuf>,
    pub hurricanes: Option<PathBuf>,
    /// Fitted trend model; fitted from the archive when absent.
    pub trends: Option<PathBuf>,
    pub output: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Study {
    pub month: u32,
    /// Evaluation year; defaults to the last archive year.
    pub year: Option<i32>,
    pub samples: usize,
    pub seed: u64,
    pub target_lolh: f64,
    pub epsilon_la: f64,
    pub shed_tolerance: f64,
    pub buff_hours: f64,
    pub search_mode: SearchMode,
    /// Resource ids to accredit; all solar, wind and storage when absent.
    pub resources: Option<Vec<String>>,
}

impl Default for Study {
    fn default() -> Self {
        Self {
            month: 12,
            year: None,
            samples: 100,
            seed: 1,
            target_lolh: 0.2,
            epsilon_la: 1.0,
            shed_tolerance: 1e-3,
            buff_hours: 12.0,
            search_mode: SearchMode::MeanLolh,
            resources: None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrendOverrides {
    /// °C/yr applied to every month.
    pub beta_tau: Option<f64>,
    /// events/yr.
    pub beta_hurr: Option<f64>,
    pub buff_hours: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Sensitivity {
    pub parameter: Option<String>,
    pub values: Vec<f64>,
    /// Line ids scaled by `line_capacity_scale`.
    pub lines: Vec<u32>,
}

/// The single study document. Command-line flags override its values.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudyConfig {
    pub paths: Paths,
    pub study: Study,
    pub uc: UcParams,
    pub solver: SolverOptions,
    pub overrides: TrendOverrides,
    pub sensitivity: Sensitivity,
    pub fixture: FixtureSpec,
}

impl StudyConfig {
    /// Reads `path` and resolves relative paths against its directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg: StudyConfig =
            toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.paths.resolve(base);
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let s = &self.study;
        if !(1..=12).contains(&s.month) {
            return Err(CliError::Config(format!("month {} outside 1..12", s.month)));
        }
        if s.samples == 0 {
            return Err(CliError::Config("samples must be at least 1".into()));
        }
        if !(s.target_lolh > 0.0) {
            return Err(CliError::Config(format!("target_lolh must be positive, got {}", s.target_lolh)));
        }
        if !(s.epsilon_la > 0.0) {
            return Err(CliError::Config(format!("epsilon_la must be positive, got {}", s.epsilon_la)));
        }
        if self.solver.abs_gap < 0.0 || self.solver.rel_gap < 0.0 {
            return Err(CliError::Config("solver gaps must be nonnegative".into()));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Study-relevant part of the config: everything but file locations.
    pub fn hash_body(&self) -> String {
        let mut c = self.clone();
        c.paths = Paths::default();
        c.to_toml()
    }
}

impl Paths {
    fn resolve(&mut self, base: &Path) {
        for p in [
            &mut self.system,
            &mut self.weather,
            &mut self.load,
            &mut self.hurricanes,
            &mut self.trends,
            &mut self.output,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }

    pub fn require(&self, which: &'static str) -> Result<&Path, CliError> {
        let p = match which {
            "system" => &self.system,
            "weather" => &self.weather,
            "load" => &self.load,
            _ => &None,
        };
        p.as_deref()
            .ok_or_else(|| CliError::Config(format!("paths.{which} is not set")))
    }
}
