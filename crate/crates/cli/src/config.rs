//! Experiment configuration: one JSON file drives every subcommand.

use std::path::{Path, PathBuf};

use padicwalk_core::walker::{Start, WalkMode};
use padicwalk_core::{HeatKernelModel, Landscape, LandscapeSpec};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Environment variable overriding the config seed.
pub const SEED_ENV: &str = "PADICWALK_SEED";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum KappaSpec {
    Value(f64),
    /// Only `"auto"`: the admissible maximum.
    Named(String),
}

impl Default for KappaSpec {
    fn default() -> Self {
        KappaSpec::Named("auto".into())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub landscape: LandscapeSpec,
    #[serde(default)]
    pub kappa: KappaSpec,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default)]
    pub symbol: SymbolSection,
    #[serde(default)]
    pub kernel: KernelSection,
    #[serde(default)]
    pub cauchy: CauchySection,
    #[serde(default)]
    pub walk: WalkSection,
    #[serde(default)]
    pub fpt: FptSection,
    #[serde(default)]
    pub tolerances: Tolerances,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SymbolSection {
    pub gamma_min: i32,
    pub gamma_max: i32,
}

impl Default for SymbolSection {
    fn default() -> Self {
        SymbolSection { gamma_min: -10, gamma_max: 10 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelSection {
    pub level_min: i32,
    pub level_max: i32,
    pub times: Vec<f64>,
}

impl Default for KernelSection {
    fn default() -> Self {
        KernelSection { level_min: -5, level_max: 10, times: vec![0.1, 1.0, 10.0] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CauchySection {
    pub h: f64,
    pub steps: usize,
    pub level_min: i32,
    pub level_max: i32,
    /// Breakpoints `(level, value)` of the initial datum.
    pub initial: Vec<(i32, f64)>,
    /// Breakpoints of a time-independent forcing term.
    pub forcing: Vec<(i32, f64)>,
}

impl Default for CauchySection {
    fn default() -> Self {
        CauchySection { h: 0.1, steps: 10, level_min: -2, level_max: 6, initial: vec![(0, 1.0)], forcing: Vec::new() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WalkSection {
    pub dt: f64,
    pub horizon: f64,
    pub paths: usize,
    pub mode: WalkMode,
    pub start: Start,
    pub precision: usize,
    /// Histogram bin width in steps.
    pub histogram_bin: usize,
}

impl Default for WalkSection {
    fn default() -> Self {
        WalkSection {
            dt: 0.01,
            horizon: 10.0,
            paths: 10_000,
            mode: WalkMode::NormsOnly,
            start: Start::Uniform,
            precision: padicwalk_core::padic::DEFAULT_PRECISION,
            histogram_bin: 10,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FptSection {
    pub h: f64,
    pub horizon: f64,
    pub laplace_s: Vec<f64>,
}

impl Default for FptSection {
    fn default() -> Self {
        FptSection { h: 0.05, horizon: 100.0, laplace_s: vec![0.5, 1.0, 2.0, 5.0, 10.0] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Relative truncation tolerance of every certified series.
    pub series: f64,
    /// Warning threshold for the Duhamel quadrature error estimate.
    pub cauchy_quadrature: f64,
    /// Tolerance of the `verify` checks.
    pub verify: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { series: 1e-12, cauchy_quadrature: 1e-6, verify: 1e-9 }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| CliError::Validation(format!("malformed config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        let bad = |m: &str| Err(CliError::Validation(m.into()));
        if let KappaSpec::Named(s) = &self.kappa {
            if s != "auto" {
                return bad("kappa must be a number or \"auto\"");
            }
        }
        if self.symbol.gamma_min > self.symbol.gamma_max {
            return bad("symbol.gamma_min exceeds symbol.gamma_max");
        }
        if self.kernel.level_min > self.kernel.level_max {
            return bad("kernel.level_min exceeds kernel.level_max");
        }
        if self.kernel.times.iter().any(|&t| !(t > 0.0 && t.is_finite())) {
            return bad("kernel.times must be positive");
        }
        if self.cauchy.level_min > self.cauchy.level_max {
            return bad("cauchy.level_min exceeds cauchy.level_max");
        }
        if self.fpt.laplace_s.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return bad("fpt.laplace_s must be positive");
        }
        if !(self.fpt.h > 0.0) || !(self.fpt.horizon >= self.fpt.h) {
            return bad("fpt needs h > 0 and horizon >= h");
        }
        if self.walk.histogram_bin == 0 {
            return bad("walk.histogram_bin must be positive");
        }
        let t = &self.tolerances;
        if [t.series, t.cauchy_quadrature, t.verify].iter().any(|&v| !(v > 0.0)) {
            return bad("tolerances must be positive");
        }
        self.landscape()?;
        Ok(())
    }

    pub fn landscape(&self) -> Result<Landscape, CliError> {
        Ok(Landscape::from_spec(&self.landscape)?)
    }

    pub fn kappa(&self, landscape: &Landscape) -> Result<f64, CliError> {
        match self.kappa {
            KappaSpec::Value(k) => Ok(k),
            KappaSpec::Named(_) => Ok(landscape.kappa_admissible_max()?),
        }
    }

    pub fn model(&self) -> Result<HeatKernelModel, CliError> {
        let l = self.landscape()?;
        let k = self.kappa(&l)?;
        Ok(HeatKernelModel::with_tolerance(&l, k, self.tolerances.series)?)
    }

    /// Flag or environment value if given, else the config field, else 0.
    pub fn resolve_seed(&self, cli: Option<u64>) -> u64 {
        cli.or(self.seed).unwrap_or(0)
    }
}
