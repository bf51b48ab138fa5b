use std::path::Path;

use convac_core::info::{differential_entropy, joint_entropy, pushforward_entropy, sigmoid_entropy_shift, Activation};
use convac_core::model::{random_model_with, LatentPriors, Model};
use convac_core::scaling::{
    ensemble_seeds, layer_entropies, verify_law, ConstantsSource, EnsembleMode, EnsembleReport, VerifyOptions,
};
use convac_core::Error;
use rayon::prelude::*;

use crate::config::{Command, ExperimentConfig, Priors};
use crate::error::{LabError, LabResult};
use crate::format::{read_model, to_json, ModelDoc};
use crate::manifest::{OutputDigest, RunManifest, MANIFEST_FILE};
use crate::report::{
    activation_csv, ensemble_models_csv, mappings_csv, ActivationRow, EnsembleSummary, EntropySummary, LawSummary,
    Units,
};

/// `ln 4`, the minimum entropy loss of the sigmoid.
const LN_4: f64 = 1.386_294_361_119_890_6;

/// A file produced by a command, before it is written.
pub struct Artifact {
    pub name: &'static str,
    pub bytes: Vec<u8>,
}

impl Artifact {
    fn json<T: serde::Serialize>(name: &'static str, value: &T) -> Self {
        Self {
            name,
            bytes: to_json(value).into_bytes(),
        }
    }
}

/// Artifacts of one command plus, for strict runs, a description of any
/// bound violation.
pub struct Products {
    pub artifacts: Vec<Artifact>,
    pub violation: Option<String>,
}

fn generate(cfg: &ExperimentConfig, seed: u64) -> LabResult<Model> {
    let model = random_model_with(&cfg.dims(), seed, cfg.model.layout.into())?;
    Ok(match (model, cfg.model.priors) {
        (Model::Ht(m), Priors::Uniform) => {
            let channels: Vec<usize> = (0..=m.depth()).map(|l| m.channels(l)).collect();
            Model::Ht(m.with_priors(LatentPriors::uniform(&channels)?)?)
        }
        (m, _) => m,
    })
}

/// The configured model: loaded from `model.file`, or drawn from `seed`.
pub fn load_model(cfg: &ExperimentConfig) -> LabResult<(Model, Option<u64>)> {
    match (&cfg.model.file, cfg.seed) {
        (Some(path), _) => read_model(path),
        (None, Some(seed)) => Ok((generate(cfg, seed)?, Some(seed))),
        (None, None) => Err(LabError::config("seed", "required to generate a model")),
    }
}

fn verify_options(cfg: &ExperimentConfig, constants: ConstantsSource) -> VerifyOptions {
    VerifyOptions {
        constants,
        eps: cfg.eps,
        budget: cfg.budget,
    }
}

/// One row of the activation study.
pub fn activation_row(d: &crate::config::DensityConfig) -> LabResult<ActivationRow> {
    let spec = d.to_spec()?;
    let h_x = differential_entropy(&spec)?.value;
    let shift = sigmoid_entropy_shift(&spec)?.value;
    let (h_relu, relu_status) = match pushforward_entropy(&spec, &Activation::Relu) {
        Ok(h) => (Some(h.value), "ok".to_string()),
        Err(e @ Error::ReluSupport { .. }) => (None, format!("rejected: {e}")),
        Err(e) => return Err(e.into()),
    };
    Ok(ActivationRow {
        density: d.label(),
        h_x,
        h_sigmoid: h_x + shift,
        sigmoid_shift: shift,
        sigmoid_bound: h_x - LN_4,
        sigmoid_bound_holds: shift <= -LN_4,
        h_relu,
        relu_status,
    })
}

/// Compute a command's artifacts without touching the file system (except
/// to read `model.file`).
pub fn produce(cfg: &ExperimentConfig) -> LabResult<Products> {
    let command = cfg
        .command
        .ok_or_else(|| LabError::config("command", "no command given"))?;
    let u = Units(cfg.log_base.into());
    let mut violation = None;
    let artifacts = match command {
        Command::GenModel => {
            let (model, seed) = load_model(cfg)?;
            vec![Artifact::json("model.json", &ModelDoc::new(&model, seed))]
        }
        Command::Entropy => {
            let (model, _) = load_model(cfg)?;
            let h_x = joint_entropy(&model.bruteforce_joint(cfg.budget)?);
            let profile = layer_entropies(&model, cfg.budget)?;
            let summary = EntropySummary::new(&model.dims(), h_x, model.leaf_conditional_entropy_sum(), &profile, u);
            vec![
                Artifact::json("entropy.json", &summary),
                Artifact {
                    name: "entropy_layers.csv",
                    bytes: summary.layers_csv(u),
                },
            ]
        }
        Command::VerifyLaw => {
            let (model, _) = load_model(cfg)?;
            let constants = match cfg.ensemble_mode() {
                EnsembleMode::External { c, beta } => ConstantsSource::External { c, beta },
                _ => ConstantsSource::InModel,
            };
            let report = verify_law(&model, &verify_options(cfg, constants))?;
            vec![
                Artifact {
                    name: "mappings.csv",
                    bytes: mappings_csv(&report, u),
                },
                Artifact::json("report.json", &LawSummary::new(&report, u)),
            ]
        }
        Command::Activation => {
            let rows = cfg
                .densities()
                .iter()
                .map(activation_row)
                .collect::<LabResult<Vec<_>>>()?;
            vec![Artifact {
                name: "activation.csv",
                bytes: activation_csv(&rows, u),
            }]
        }
        Command::Ensemble => {
            let seed = cfg.seed.ok_or_else(|| LabError::config("seed", "required for `ensemble`"))?;
            let seeds = ensemble_seeds(seed, cfg.ensemble.models);
            let opts = verify_options(cfg, ConstantsSource::InModel);
            let reports = seeds
                .par_iter()
                .map(|&s| Ok(verify_law(&generate(cfg, s)?, &opts)?))
                .collect::<LabResult<Vec<_>>>()?;
            let mode = cfg.ensemble_mode();
            let ens = EnsembleReport::from_reports(&reports, &seeds, mode)?;
            let checked = !matches!(mode, EnsembleMode::TrainTest);
            if cfg.strict && checked && ens.additive_violations + ens.ratio_violations > 0 {
                violation = Some(format!(
                    "{} additive and {} ratio violations over {} models",
                    ens.additive_violations,
                    ens.ratio_violations,
                    ens.rows.len()
                ));
            }
            vec![
                Artifact {
                    name: "ensemble_models.csv",
                    bytes: ensemble_models_csv(&ens, u),
                },
                Artifact::json("ensemble.json", &EnsembleSummary::new(&cfg.dims(), seed, &ens, u)),
            ]
        }
    };
    Ok(Products { artifacts, violation })
}

fn write(path: &Path, bytes: &[u8]) -> LabResult<()> {
    std::fs::write(path, bytes).map_err(|e| LabError::io(path, e))
}

/// Run a resolved config: write its artifacts and `manifest.json` into the
/// output directory. Strict runs that detect a bound violation still write
/// everything, then fail with [`LabError::Violation`].
pub fn run(cfg: &ExperimentConfig) -> LabResult<RunManifest> {
    let products = produce(cfg)?;
    let out = cfg.out_dir();
    std::fs::create_dir_all(&out).map_err(|e| LabError::io(&out, e))?;
    let mut outputs = Vec::with_capacity(products.artifacts.len());
    for a in &products.artifacts {
        write(&out.join(a.name), &a.bytes)?;
        outputs.push(OutputDigest::of(a.name, &a.bytes));
    }
    let command = cfg.command.expect("checked by produce");
    let manifest = RunManifest::new(command, cfg.clone(), outputs);
    write(&out.join(MANIFEST_FILE), to_json(&manifest).as_bytes())?;
    match products.violation {
        Some(v) => Err(LabError::Violation(v)),
        None => Ok(manifest),
    }
}
