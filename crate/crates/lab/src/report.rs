//! CSV tables and JSON summaries. Every entropy-valued column carries its
//! unit as a suffix (`_nats` or `_bits`); ratios and flags are unitless.

use convac_core::info::LogBase;
use convac_core::model::{Dims, ModelKind};
use convac_core::scaling::{BoundCheck, EnsembleReport, ScalingReport};
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DimsDoc {
    pub kind: &'static str,
    pub n: usize,
    pub m: usize,
    pub s: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ranks: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z: Option<usize>,
}

impl From<&Dims> for DimsDoc {
    fn from(d: &Dims) -> Self {
        match d {
            Dims::Cp { n, m, s, z } => Self {
                kind: ModelKind::Cp.as_str(),
                n: *n,
                m: *m,
                s: *s,
                ranks: None,
                z: Some(*z),
            },
            Dims::Ht { n, m, s, ranks } => Self {
                kind: ModelKind::Ht.as_str(),
                n: *n,
                m: *m,
                s: *s,
                ranks: Some(ranks.clone()),
                z: None,
            },
        }
    }
}

/// Converts nats to the configured base and names columns accordingly.
#[derive(Debug, Clone, Copy)]
pub struct Units(pub LogBase);

impl Units {
    pub fn v(self, nats: f64) -> f64 {
        self.0.from_nats(nats)
    }

    pub fn col(self, name: &str) -> String {
        format!("{name}_{}", self.0.unit())
    }

    pub fn name(self) -> &'static str {
        self.0.unit()
    }
}

fn csv_bytes(header: Vec<String>, rows: Vec<Vec<String>>) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Labels of the entries of a layer-entropy profile.
pub fn layer_labels(dims: &Dims) -> Vec<String> {
    match dims {
        Dims::Cp { .. } => vec!["leaves".into(), "given_z".into(), "joint".into()],
        Dims::Ht { ranks, .. } => {
            let mut v = vec!["leaves".to_string()];
            v.extend((1..=ranks.len()).map(|l| format!("layer_{l}")));
            v.push("joint".into());
            v
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LayerEntry {
    pub level: usize,
    pub label: String,
    pub entropy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntropySummary {
    pub dims: DimsDoc,
    pub unit: &'static str,
    /// `H(X)` from the enumerated joint.
    pub h_x: f64,
    /// `sum_i H(x_i | d_i)`.
    pub leaf_sum: f64,
    pub gap: f64,
    pub chain_nondecreasing: bool,
    pub layers: Vec<LayerEntry>,
}

impl EntropySummary {
    pub fn new(dims: &Dims, h_x: f64, leaf_sum: f64, profile: &[f64], u: Units) -> Self {
        let layers = layer_labels(dims)
            .into_iter()
            .zip(profile)
            .enumerate()
            .map(|(level, (label, &h))| LayerEntry {
                level,
                label,
                entropy: u.v(h),
            })
            .collect();
        Self {
            dims: dims.into(),
            unit: u.name(),
            h_x: u.v(h_x),
            leaf_sum: u.v(leaf_sum),
            gap: u.v(h_x - leaf_sum),
            chain_nondecreasing: profile.windows(2).all(|w| w[1] >= w[0] - 1e-9),
            layers,
        }
    }

    pub fn layers_csv(&self, u: Units) -> Vec<u8> {
        let rows = self
            .layers
            .iter()
            .map(|l| vec![l.level.to_string(), l.label.clone(), l.entropy.to_string()])
            .collect();
        csv_bytes(vec!["level".into(), "label".into(), u.col("entropy")], rows)
    }
}

/// One row per mapping: address, channel counts, rank of the mixing matrix,
/// entropies on both sides, gap, ratio, and whether the ratio was skipped.
pub fn mappings_csv(r: &ScalingReport, u: Units) -> Vec<u8> {
    let header = vec![
        "layer".into(),
        "node".into(),
        "side".into(),
        "in_channels".into(),
        "out_channels".into(),
        "rank".into(),
        u.col("source_entropy"),
        u.col("mapped_entropy"),
        u.col("gap"),
        "ratio".into(),
        "skipped".into(),
    ];
    let rows = r
        .mappings
        .iter()
        .map(|m| {
            let ratio = m.ratio(r.eps);
            vec![
                m.address.layer.to_string(),
                m.address.node.to_string(),
                m.address.side.as_str().to_string(),
                m.in_channels.to_string(),
                m.out_channels.to_string(),
                m.rank.to_string(),
                u.v(m.source_entropy).to_string(),
                u.v(m.mapped_entropy).to_string(),
                u.v(m.gap()).to_string(),
                opt(ratio),
                ratio.is_none().to_string(),
            ]
        })
        .collect();
    csv_bytes(header, rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundDoc {
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioDoc {
    pub applicable: bool,
    pub lhs: Option<f64>,
    pub rhs: Option<f64>,
    pub pass: Option<bool>,
}

fn ratio_doc(b: Option<BoundCheck>) -> RatioDoc {
    RatioDoc {
        applicable: b.is_some(),
        lhs: b.map(|b| b.lhs),
        rhs: b.map(|b| b.rhs),
        pass: b.map(|b| b.pass),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LawSummary {
    pub dims: DimsDoc,
    pub unit: &'static str,
    pub eps: f64,
    pub h_x: f64,
    pub leaf_sum: f64,
    /// `H(X) - sum_i H(x_i | d_i)`.
    pub gap: f64,
    pub sum_of_gaps: f64,
    pub telescoping_residual: f64,
    pub mapping_count: usize,
    pub zero_gap_mappings: usize,
    pub max_product_defect: f64,
    pub c_hat: f64,
    pub beta_hat: Option<f64>,
    pub skipped: usize,
    pub constants: &'static str,
    pub c: f64,
    pub beta: Option<f64>,
    pub additive: BoundDoc,
    pub ratio: RatioDoc,
    pub pass: bool,
    pub layer_entropies: Vec<f64>,
}

impl LawSummary {
    pub fn new(r: &ScalingReport, u: Units) -> Self {
        use convac_core::scaling::ConstantsSource;
        Self {
            dims: (&r.dims).into(),
            unit: u.name(),
            eps: r.eps,
            h_x: u.v(r.h_x),
            leaf_sum: u.v(r.leaf_sum),
            gap: u.v(r.total_gap()),
            sum_of_gaps: u.v(r.sum_of_gaps()),
            telescoping_residual: u.v(r.telescoping_residual()),
            mapping_count: r.mapping_count(),
            zero_gap_mappings: r.zero_gap_mappings(),
            max_product_defect: u.v(r.max_product_defect()),
            c_hat: u.v(r.estimates.c_hat),
            beta_hat: r.estimates.beta_hat,
            skipped: r.estimates.skipped,
            constants: match r.source {
                ConstantsSource::InModel => "in_model",
                ConstantsSource::External { .. } => "external",
            },
            c: u.v(r.c),
            beta: r.beta,
            additive: BoundDoc {
                lhs: u.v(r.additive.lhs),
                rhs: u.v(r.additive.rhs),
                pass: r.additive.pass,
            },
            ratio: ratio_doc(r.ratio),
            pass: r.pass(),
            layer_entropies: r.layer_entropies.iter().map(|&h| u.v(h)).collect(),
        }
    }
}

pub fn ensemble_models_csv(e: &EnsembleReport, u: Units) -> Vec<u8> {
    let header = vec![
        "index".into(),
        "seed".into(),
        "role".into(),
        u.col("h_x"),
        u.col("leaf_sum"),
        u.col("gap"),
        u.col("c_hat"),
        "beta_hat".into(),
        u.col("additive_lhs"),
        u.col("additive_rhs"),
        "additive_pass".into(),
        "ratio_lhs".into(),
        "ratio_rhs".into(),
        "ratio_pass".into(),
    ];
    let rows = e
        .rows
        .iter()
        .map(|r| {
            vec![
                r.index.to_string(),
                r.seed.to_string(),
                r.role.as_str().to_string(),
                u.v(r.h_x).to_string(),
                u.v(r.leaf_sum).to_string(),
                u.v(r.h_x - r.leaf_sum).to_string(),
                u.v(r.c_hat).to_string(),
                opt(r.beta_hat),
                opt(r.additive.map(|b| u.v(b.lhs))),
                opt(r.additive.map(|b| u.v(b.rhs))),
                r.additive.map(|b| b.pass.to_string()).unwrap_or_default(),
                opt(r.ratio.map(|b| b.lhs)),
                opt(r.ratio.map(|b| b.rhs)),
                r.ratio.map(|b| b.pass.to_string()).unwrap_or_default(),
            ]
        })
        .collect();
    csv_bytes(header, rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateDoc {
    pub checked: usize,
    pub violations: usize,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleSummary {
    pub dims: DimsDoc,
    pub unit: &'static str,
    pub models: usize,
    pub seed: u64,
    pub mode: &'static str,
    pub c: Option<f64>,
    pub beta: Option<f64>,
    pub additive: RateDoc,
    pub ratio: RateDoc,
    pub max_c_hat: f64,
    pub max_beta_hat: Option<f64>,
}

impl EnsembleSummary {
    pub fn new(dims: &Dims, seed: u64, e: &EnsembleReport, u: Units) -> Self {
        Self {
            dims: dims.into(),
            unit: u.name(),
            models: e.rows.len(),
            seed,
            mode: e.mode.as_str(),
            c: e.c.map(|c| u.v(c)),
            beta: e.beta,
            additive: RateDoc {
                checked: e.additive_checked,
                violations: e.additive_violations,
                rate: e.additive_violation_rate(),
            },
            ratio: RateDoc {
                checked: e.ratio_checked,
                violations: e.ratio_violations,
                rate: e.ratio_violation_rate(),
            },
            max_c_hat: u.v(e.rows.iter().map(|r| r.c_hat).fold(f64::NEG_INFINITY, f64::max)),
            max_beta_hat: e.rows.iter().filter_map(|r| r.beta_hat).reduce(f64::max),
        }
    }
}

/// One density of the activation study.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ActivationRow {
    pub density: String,
    pub h_x: f64,
    pub h_sigmoid: f64,
    /// `E[ln sigma'(X)]`, the change of entropy under the sigmoid.
    pub sigmoid_shift: f64,
    /// `h(X) - ln 4`, the upper bound on `h(sigma(X))`.
    pub sigmoid_bound: f64,
    pub sigmoid_bound_holds: bool,
    /// `None` when relu rejects the density.
    pub h_relu: Option<f64>,
    pub relu_status: String,
}

pub fn activation_csv(rows: &[ActivationRow], u: Units) -> Vec<u8> {
    let header = vec![
        "density".into(),
        u.col("h_x"),
        u.col("h_sigmoid"),
        u.col("sigmoid_shift"),
        u.col("h_x_minus_ln4"),
        "sigmoid_bound_holds".into(),
        u.col("h_relu"),
        "relu_status".into(),
    ];
    let rows = rows
        .iter()
        .map(|r| {
            vec![
                r.density.clone(),
                u.v(r.h_x).to_string(),
                u.v(r.h_sigmoid).to_string(),
                u.v(r.sigmoid_shift).to_string(),
                u.v(r.sigmoid_bound).to_string(),
                r.sigmoid_bound_holds.to_string(),
                opt(r.h_relu.map(|h| u.v(h))),
                r.relu_status.clone(),
            ]
        })
        .collect();
    csv_bytes(header, rows)
}
