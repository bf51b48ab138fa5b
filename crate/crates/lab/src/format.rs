//! JSON documents for tensors, factor sets and models. Floats are written in
//! shortest round-trip form, so reading a document back reproduces every
//! parameter bit for bit.

use std::path::Path;

use convac_core::info::DiscreteDist;
use convac_core::model::{ComponentBank, CpModel, HtModel, LatentPriors, Model};
use convac_core::tensor::{CpFactors, HtFactors, Mode, Tensor};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, LabResult};

pub const MODEL_FORMAT: &str = "convac-model";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TensorDoc {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl From<&Tensor> for TensorDoc {
    fn from(t: &Tensor) -> Self {
        Self {
            shape: t.shape().to_vec(),
            data: t.data().to_vec(),
        }
    }
}

impl TryFrom<TensorDoc> for Tensor {
    type Error = LabError;
    fn try_from(d: TensorDoc) -> LabResult<Tensor> {
        Tensor::new(d.shape, d.data).map_err(|e| LabError::Format(e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeDoc {
    Unconstrained,
    Probabilistic,
}

impl From<Mode> for ModeDoc {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Unconstrained => ModeDoc::Unconstrained,
            Mode::Probabilistic => ModeDoc::Probabilistic,
        }
    }
}

impl From<ModeDoc> for Mode {
    fn from(m: ModeDoc) -> Self {
        match m {
            ModeDoc::Unconstrained => Mode::Unconstrained,
            ModeDoc::Probabilistic => Mode::Probabilistic,
        }
    }
}

/// `vectors[z][i]` is `a^{z,i}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CpFactorsDoc {
    pub mode: ModeDoc,
    pub top: Vec<f64>,
    pub vectors: Vec<Vec<Vec<f64>>>,
}

impl From<&CpFactors> for CpFactorsDoc {
    fn from(f: &CpFactors) -> Self {
        Self {
            mode: f.mode().into(),
            top: f.top().to_vec(),
            vectors: f.vectors().to_vec(),
        }
    }
}

impl TryFrom<CpFactorsDoc> for CpFactors {
    type Error = LabError;
    fn try_from(d: CpFactorsDoc) -> LabResult<CpFactors> {
        CpFactors::new(d.mode.into(), d.top, d.vectors).map_err(|e| LabError::Format(e.to_string()))
    }
}

/// `weights[l][j][g]` is the weight vector of channel `g` at node `(l, j)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HtFactorsDoc {
    pub mode: ModeDoc,
    pub leaf_dim: usize,
    pub ranks: Vec<usize>,
    pub weights: Vec<Vec<Vec<Vec<f64>>>>,
    pub top: Vec<f64>,
}

impl From<&HtFactors> for HtFactorsDoc {
    fn from(f: &HtFactors) -> Self {
        Self {
            mode: f.mode().into(),
            leaf_dim: f.leaf_dim(),
            ranks: f.ranks().to_vec(),
            weights: f.weights().to_vec(),
            top: f.top().to_vec(),
        }
    }
}

impl TryFrom<HtFactorsDoc> for HtFactors {
    type Error = LabError;
    fn try_from(d: HtFactorsDoc) -> LabResult<HtFactors> {
        HtFactors::new(d.mode.into(), d.leaf_dim, d.ranks, d.weights, d.top).map_err(|e| LabError::Format(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorsDoc {
    Induced,
    PerLayer(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StructureDoc {
    Cp { factors: CpFactorsDoc },
    Ht { factors: HtFactorsDoc, priors: PriorsDoc },
}

/// A complete model: components (one row per site, or a single shared row),
/// factors, and the seed it was drawn from if any.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDoc {
    pub format: String,
    pub version: u32,
    pub seed: Option<u64>,
    pub components: Vec<Vec<Vec<f64>>>,
    pub structure: StructureDoc,
}

impl ModelDoc {
    pub fn new(model: &Model, seed: Option<u64>) -> Self {
        let components = model
            .bank()
            .table()
            .iter()
            .map(|row| row.iter().map(|c| c.pmf().to_vec()).collect())
            .collect();
        let structure = match model {
            Model::Cp(m) => StructureDoc::Cp {
                factors: m.factors().into(),
            },
            Model::Ht(m) => StructureDoc::Ht {
                factors: m.factors().into(),
                priors: match m.latent_priors() {
                    LatentPriors::Induced => PriorsDoc::Induced,
                    LatentPriors::PerLayer(ps) => PriorsDoc::PerLayer(ps.iter().map(|p| p.pmf().to_vec()).collect()),
                },
            },
        };
        Self {
            format: MODEL_FORMAT.to_string(),
            version: FORMAT_VERSION,
            seed,
            components,
            structure,
        }
    }

    pub fn to_model(&self) -> LabResult<Model> {
        if self.format != MODEL_FORMAT || self.version != FORMAT_VERSION {
            return Err(LabError::Format(format!(
                "expected {MODEL_FORMAT} version {FORMAT_VERSION}, found {} version {}",
                self.format, self.version
            )));
        }
        let fmt = |e: convac_core::Error| LabError::Format(e.to_string());
        let table = self
            .components
            .iter()
            .map(|row| row.iter().map(|p| DiscreteDist::new(p.clone())).collect())
            .collect::<Result<Vec<_>, _>>()
            .map_err(fmt)?;
        let bank = ComponentBank::per_site(table).map_err(fmt)?;
        Ok(match &self.structure {
            StructureDoc::Cp { factors } => Model::Cp(CpModel::new(bank, factors.clone().try_into()?).map_err(fmt)?),
            StructureDoc::Ht { factors, priors } => {
                let priors = match priors {
                    PriorsDoc::Induced => LatentPriors::Induced,
                    PriorsDoc::PerLayer(ps) => LatentPriors::PerLayer(
                        ps.iter()
                            .map(|p| DiscreteDist::new(p.clone()))
                            .collect::<Result<_, _>>()
                            .map_err(fmt)?,
                    ),
                };
                Model::Ht(HtModel::new(bank, factors.clone().try_into()?, priors).map_err(fmt)?)
            }
        })
    }
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("documents serialize");
    s.push('\n');
    s
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> LabResult<T> {
    let text = std::fs::read_to_string(path).map_err(|e| LabError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| LabError::Format(format!("{}: {e}", path.display())))
}

pub fn read_model(path: &Path) -> LabResult<(Model, Option<u64>)> {
    let doc: ModelDoc = read_json(path)?;
    Ok((doc.to_model()?, doc.seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use convac_core::model::{random_model, Dims};

    #[test]
    fn model_round_trip() {
        for dims in [
            Dims::Ht {
                n: 4,
                m: 3,
                s: 2,
                ranks: vec![2, 3],
            },
            Dims::Cp { n: 3, m: 2, s: 4, z: 2 },
        ] {
            let m = random_model(&dims, 77).unwrap();
            let text = to_json(&ModelDoc::new(&m, Some(77)));
            let back: ModelDoc = serde_json::from_str(&text).unwrap();
            assert_eq!(back.to_model().unwrap(), m);
            assert_eq!(to_json(&back), text);
        }
    }

    #[test]
    fn tensor_round_trip() {
        let t = Tensor::new(vec![2, 2], vec![0.1, 0.2, 1.0 / 3.0, 1e-300]).unwrap();
        let text = to_json(&TensorDoc::from(&t));
        let back: Tensor = serde_json::from_str::<TensorDoc>(&text).unwrap().try_into().unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn invalid_documents_are_rejected() {
        let m = random_model(&Dims::Cp { n: 2, m: 2, s: 2, z: 1 }, 1).unwrap();
        let mut doc = ModelDoc::new(&m, None);
        doc.components[0][0] = vec![0.5, 0.6];
        assert!(doc.to_model().is_err());
        let mut doc = ModelDoc::new(&m, None);
        doc.version = 99;
        assert!(doc.to_model().is_err());
    }
}
