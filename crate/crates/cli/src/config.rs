use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use macrofc::eval::{model_registry, ExperimentPlan, ModelSettings, ModelSpec};
use macrofc::YearMonth;
use serde::Deserialize;

use crate::InputError;

/// Experiment definition read from TOML. Relative paths resolve against the
/// config file's directory.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub manifest: PathBuf,
    pub data: PathBuf,
    pub output_dir: PathBuf,
    pub targets: Vec<String>,
    #[serde(default = "default_horizons")]
    pub horizons: Vec<usize>,
    /// Model names to run; empty means the whole registry.
    #[serde(default)]
    pub models: Vec<String>,
    #[serde(default)]
    pub exclude_models: Vec<String>,
    #[serde(default = "default_start")]
    pub poos_start: YearMonth,
    #[serde(default = "one")]
    pub retune_every: usize,
    #[serde(default)]
    pub seed: u64,
    /// Worker threads; 0 uses every available core.
    #[serde(default)]
    pub threads: usize,
    #[serde(default = "eight")]
    pub n_factors: usize,
    #[serde(default = "eight")]
    pub em_factors: usize,
    /// Per-target override of the log-change target definition.
    #[serde(default)]
    pub use_log: BTreeMap<String, bool>,
    /// Series kept out of the X and MARX blocks (still used for factors).
    #[serde(default)]
    pub exclude_from_x: Vec<String>,
    #[serde(default)]
    pub settings: ModelSettings,
}

fn default_horizons() -> Vec<usize> {
    vec![1, 2, 3]
}

fn default_start() -> YearMonth {
    YearMonth::new(2008, 1).expect("valid month")
}

fn one() -> usize {
    1
}

fn eight() -> usize {
    8
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| InputError(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: RunConfig =
            toml::from_str(&text).map_err(|e| InputError(format!("invalid config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.manifest, &mut cfg.data, &mut cfg.output_dir] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        for p in [&cfg.manifest, &cfg.data] {
            if !p.is_file() {
                return Err(InputError(format!("missing input file {}", p.display())).into());
            }
        }
        Ok(cfg)
    }

    /// Registry entries after the include list, exclude list and an optional
    /// command-line filter.
    pub fn model_specs(&self, filter: Option<&[String]>) -> Result<Vec<ModelSpec>> {
        let registry = model_registry();
        let known = |n: &str| registry.iter().any(|m| m.name == n);
        for n in self.models.iter().chain(&self.exclude_models).chain(filter.unwrap_or(&[])) {
            if !known(n) {
                bail!(InputError(format!("unknown model {n:?}")));
            }
        }
        let specs: Vec<ModelSpec> = registry
            .into_iter()
            .filter(|m| self.models.is_empty() || self.models.contains(&m.name))
            .filter(|m| !self.exclude_models.contains(&m.name))
            .filter(|m| filter.is_none_or(|f| f.contains(&m.name)))
            .collect();
        if specs.is_empty() {
            bail!(InputError("no models selected".into()));
        }
        Ok(specs)
    }

    pub fn plan(&self, models: Vec<ModelSpec>) -> Result<ExperimentPlan> {
        let plan = ExperimentPlan {
            targets: self.targets.clone(),
            horizons: self.horizons.clone(),
            models,
            poos_start: self.poos_start,
            retune_every: self.retune_every,
            seed: self.seed,
            n_factors: self.n_factors,
            settings: self.settings.clone(),
        };
        plan.validate().context("invalid experiment plan")?;
        Ok(plan)
    }
}
