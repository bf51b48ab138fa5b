//! Experiment configuration: TOML or JSON files, or the `config` block of a
//! previous run's manifest, plus command-line overrides.

use std::fmt;
use std::path::{Path, PathBuf};

use convac_core::info::{DensitySpec, LogBase, MixtureComponent};
use convac_core::model::{BankLayout, Dims, DEFAULT_BUDGET};
use convac_core::scaling::{EnsembleMode, DEFAULT_EPS};
use serde::{Deserialize, Serialize};

use crate::error::{LabError, LabResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    GenModel,
    Entropy,
    VerifyLaw,
    Activation,
    Ensemble,
}

impl Command {
    pub fn as_str(self) -> &'static str {
        match self {
            Command::GenModel => "gen-model",
            Command::Entropy => "entropy",
            Command::VerifyLaw => "verify-law",
            Command::Activation => "activation",
            Command::Ensemble => "ensemble",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Unit {
    #[default]
    Nats,
    Bits,
}

impl From<Unit> for LogBase {
    fn from(u: Unit) -> Self {
        match u {
            Unit::Nats => LogBase::Nats,
            Unit::Bits => LogBase::Bits,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    #[default]
    Ht,
    Cp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    #[default]
    Shared,
    PerSite,
}

impl From<Layout> for BankLayout {
    fn from(l: Layout) -> Self {
        match l {
            Layout::Shared => BankLayout::Shared,
            Layout::PerSite => BankLayout::PerSite,
        }
    }
}

/// Latent priors of generated HT-models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Priors {
    #[default]
    Induced,
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub kind: Kind,
    pub n: usize,
    pub m: usize,
    pub s: usize,
    /// HT only; defaults to `2` on every layer.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ranks: Option<Vec<usize>>,
    /// CP only; defaults to 2.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z: Option<usize>,
    pub layout: Layout,
    pub priors: Priors,
    /// Load this model document instead of generating one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            kind: Kind::Ht,
            n: 8,
            m: 2,
            s: 2,
            ranks: None,
            z: None,
            layout: Layout::Shared,
            priors: Priors::Induced,
            file: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstantsMode {
    #[default]
    InModel,
    External,
    TrainTest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleConfig {
    pub models: usize,
    pub mode: ConstantsMode,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            models: 100,
            mode: ConstantsMode::InModel,
            c: None,
            beta: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentConfig {
    pub weight: f64,
    pub mean: f64,
    pub sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum DensityConfig {
    Uniform { lo: f64, hi: f64 },
    Normal { mean: f64, sd: f64 },
    Laplace { loc: f64, scale: f64 },
    Exponential { rate: f64 },
    GaussianMixture { components: Vec<ComponentConfig> },
}

impl DensityConfig {
    pub fn label(&self) -> String {
        match self {
            DensityConfig::Uniform { lo, hi } => format!("uniform({lo},{hi})"),
            DensityConfig::Normal { mean, sd } => format!("normal({mean},{sd})"),
            DensityConfig::Laplace { loc, scale } => format!("laplace({loc},{scale})"),
            DensityConfig::Exponential { rate } => format!("exponential({rate})"),
            DensityConfig::GaussianMixture { components } => {
                let parts: Vec<String> = components
                    .iter()
                    .map(|c| format!("{}*normal({},{})", c.weight, c.mean, c.sd))
                    .collect();
                format!("mixture({})", parts.join("+"))
            }
        }
    }

    pub fn to_spec(&self) -> convac_core::Result<DensitySpec> {
        match self {
            DensityConfig::Uniform { lo, hi } => DensitySpec::uniform(*lo, *hi),
            DensityConfig::Normal { mean, sd } => DensitySpec::normal(*mean, *sd),
            DensityConfig::Laplace { loc, scale } => DensitySpec::laplace(*loc, *scale),
            DensityConfig::Exponential { rate } => DensitySpec::exponential(*rate),
            DensityConfig::GaussianMixture { components } => DensitySpec::gaussian_mixture(
                components
                    .iter()
                    .map(|c| MixtureComponent {
                        weight: c.weight,
                        mean: c.mean,
                        sd: c.sd,
                    })
                    .collect(),
            ),
        }
    }
}

/// The five densities studied when none are configured.
pub fn default_densities() -> Vec<DensityConfig> {
    vec![
        DensityConfig::Uniform { lo: 0.0, hi: 1.0 },
        DensityConfig::Normal { mean: 0.0, sd: 1.0 },
        DensityConfig::Normal { mean: 1.0, sd: 0.5 },
        DensityConfig::Laplace { loc: 0.0, scale: 1.0 },
        DensityConfig::GaussianMixture {
            components: vec![
                ComponentConfig {
                    weight: 0.3,
                    mean: -1.0,
                    sd: 0.5,
                },
                ComponentConfig {
                    weight: 0.7,
                    mean: 2.0,
                    sd: 1.0,
                },
            ],
        },
    ]
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ActivationConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub densities: Option<Vec<DensityConfig>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub command: Option<Command>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    pub strict: bool,
    pub log_base: Unit,
    pub eps: f64,
    pub budget: usize,
    pub model: ModelConfig,
    pub ensemble: EnsembleConfig,
    pub activation: ActivationConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            command: None,
            seed: None,
            out: None,
            strict: false,
            log_base: Unit::Nats,
            eps: DEFAULT_EPS,
            budget: DEFAULT_BUDGET,
            model: ModelConfig::default(),
            ensemble: EnsembleConfig::default(),
            activation: ActivationConfig::default(),
        }
    }
}

/// Values given on the command line; each one replaces the file's value.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub command: Option<Command>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub strict: bool,
}

/// Default output directory when neither the file nor the flags name one.
pub const DEFAULT_OUT: &str = "out";

impl ExperimentConfig {
    /// Parse a TOML or JSON document. A run manifest is accepted too, in
    /// which case its `config` block is used.
    pub fn parse(text: &str, json: bool) -> LabResult<Self> {
        let value: serde_json::Value = if json {
            serde_json::from_str(text).map_err(|e| LabError::config("<document>", e))?
        } else {
            toml::from_str(text).map_err(|e| LabError::config("<document>", e.message()))?
        };
        let value = match value {
            serde_json::Value::Object(mut map) if map.contains_key("manifest_version") => map
                .remove("config")
                .ok_or_else(|| LabError::config("config", "manifest has no config block"))?,
            other => other,
        };
        serde_path_to_error::deserialize(value).map_err(|e| {
            let path = e.path().to_string();
            let field = if path == "." { "<document>".to_string() } else { path };
            LabError::config(&field, e.into_inner())
        })
    }

    /// Read a config file; relative `model.file` paths resolve against the
    /// file's directory.
    pub fn load(path: &Path) -> LabResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| LabError::io(path, e))?;
        let json = path.extension().is_some_and(|e| e == "json") || text.trim_start().starts_with('{');
        let mut cfg = Self::parse(&text, json)?;
        if let (Some(file), Some(dir)) = (&cfg.model.file, path.parent()) {
            if file.is_relative() {
                cfg.model.file = Some(dir.join(file));
            }
        }
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if o.command.is_some() {
            self.command = o.command;
        }
        if o.seed.is_some() {
            self.seed = o.seed;
        }
        if o.out.is_some() {
            self.out.clone_from(&o.out);
        }
        self.strict |= o.strict;
    }

    /// Fill defaults that depend on other fields and check everything the
    /// chosen command needs.
    pub fn resolve(mut self) -> LabResult<Self> {
        let command = self
            .command
            .ok_or_else(|| LabError::config("command", "no command given"))?;
        if self.out.is_none() {
            self.out = Some(PathBuf::from(DEFAULT_OUT));
        }
        if !(self.eps.is_finite() && self.eps > 0.0) {
            return Err(LabError::config("eps", "must be positive and finite"));
        }
        if self.budget == 0 {
            return Err(LabError::config("budget", "must be at least 1"));
        }
        let uses_model = command != Command::Activation;
        let from_file = self.model.file.is_some() && command != Command::Ensemble;
        if uses_model && !from_file {
            if self.seed.is_none() {
                return Err(LabError::config("seed", format!("required for `{command}`")));
            }
            self.fill_model_defaults();
            self.check_dims()?;
        }
        if command == Command::Ensemble
            || (command == Command::VerifyLaw && self.ensemble.mode == ConstantsMode::External)
        {
            self.check_ensemble()?;
        }
        if command == Command::Activation {
            if let Some(ds) = &self.activation.densities {
                if ds.is_empty() {
                    return Err(LabError::config("activation.densities", "must not be empty"));
                }
                for (k, d) in ds.iter().enumerate() {
                    d.to_spec()
                        .map_err(|e| LabError::config(&format!("activation.densities[{k}]"), e))?;
                }
            }
        }
        Ok(self)
    }

    fn fill_model_defaults(&mut self) {
        let m = &mut self.model;
        match m.kind {
            Kind::Ht => {
                if m.ranks.is_none() && m.n.is_power_of_two() {
                    m.ranks = Some(vec![2; m.n.trailing_zeros() as usize]);
                }
                m.z = None;
            }
            Kind::Cp => {
                m.z.get_or_insert(2);
                m.ranks = None;
            }
        }
    }

    fn check_dims(&self) -> LabResult<()> {
        let m = &self.model;
        for (field, v) in [("model.n", m.n), ("model.m", m.m), ("model.s", m.s)] {
            if v == 0 {
                return Err(LabError::config(field, "must be positive"));
            }
        }
        match m.kind {
            Kind::Ht => {
                if m.n < 2 || !m.n.is_power_of_two() {
                    return Err(LabError::config("model.n", format!("N must be a power of two (got {})", m.n)));
                }
                let ranks = m.ranks.as_deref().unwrap_or_default();
                let want = m.n.trailing_zeros() as usize;
                if ranks.len() != want {
                    return Err(LabError::config(
                        "model.ranks",
                        format!("N = {} needs {want} ranks, got {}", m.n, ranks.len()),
                    ));
                }
                if let Some(k) = ranks.iter().position(|&r| r == 0) {
                    return Err(LabError::config(&format!("model.ranks[{k}]"), "must be positive"));
                }
            }
            Kind::Cp => {
                if m.z == Some(0) {
                    return Err(LabError::config("model.z", "must be positive"));
                }
            }
        }
        Ok(())
    }

    fn check_ensemble(&self) -> LabResult<()> {
        let e = &self.ensemble;
        if e.models == 0 {
            return Err(LabError::config("ensemble.models", "must be at least 1"));
        }
        match e.mode {
            ConstantsMode::TrainTest if e.models < 2 => Err(LabError::config(
                "ensemble.models",
                "train_test needs at least 2 models",
            )),
            ConstantsMode::External => {
                for (field, v) in [("ensemble.c", e.c), ("ensemble.beta", e.beta)] {
                    match v {
                        None => return Err(LabError::config(field, "required when ensemble.mode = external")),
                        Some(x) if !x.is_finite() => return Err(LabError::config(field, "must be finite")),
                        _ => {}
                    }
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn dims(&self) -> Dims {
        let m = &self.model;
        match m.kind {
            Kind::Ht => Dims::Ht {
                n: m.n,
                m: m.m,
                s: m.s,
                ranks: m.ranks.clone().unwrap_or_default(),
            },
            Kind::Cp => Dims::Cp {
                n: m.n,
                m: m.m,
                s: m.s,
                z: m.z.unwrap_or(2),
            },
        }
    }

    pub fn ensemble_mode(&self) -> EnsembleMode {
        match self.ensemble.mode {
            ConstantsMode::InModel => EnsembleMode::InModel,
            ConstantsMode::TrainTest => EnsembleMode::TrainTest,
            ConstantsMode::External => EnsembleMode::External {
                c: self.ensemble.c.unwrap_or(0.0),
                beta: self.ensemble.beta.unwrap_or(1.0),
            },
        }
    }

    pub fn densities(&self) -> Vec<DensityConfig> {
        self.activation.densities.clone().unwrap_or_else(default_densities)
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
    }
}
