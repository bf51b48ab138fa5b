//! Entropy gaps along the mappings of a ConvAC and the additive and ratio
//! scaling laws built from them.
//!
//! A mapping mixes a family of child distributions with a row-stochastic
//! matrix `A`: `u_j = sum_a A[j][a] v_a`. Its gap is
//! `H(u | out prior) - H(v | in prior)` and its ratio is the quotient of the
//! same two entropies. With induced priors (`in prior = A^T out prior`) every
//! gap is nonnegative by concavity of entropy.
//!
//! The HT-model has one mapping per non-root node plus the top mixture,
//! `2^{L+1} - 1` in total. The CP-model has one per site plus the top
//! mixture, `N + 1`. Because each fusion's entropy is the sum of its two
//! mapped children, the total gap `H(X) - sum_i H(x_i | d_i)` telescopes into
//! the sum of per-mapping gaps.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::info::{joint_entropy, shannon_nats, ConditionalFamily, DiscreteDist, JointDist};
use crate::model::{check_budget, mix, pull_back, CpModel, Dims, HtModel, Model, DEFAULT_BUDGET};
use crate::tensor::{kron, validate_simplex, Tensor, STRUCTURE_TOL};
use crate::{Error, Result};

/// Mappings whose source entropy is below this are left out of the ratio
/// statistics.
pub const DEFAULT_EPS: f64 = 1e-9;

/// Slack applied to every bound comparison.
pub const CHECK_SLACK: f64 = 1e-9;

const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
    Site,
    Top,
}

impl Side {
    pub fn as_str(self) -> &'static str {
        match self {
            Side::Left => "left",
            Side::Right => "right",
            Side::Site => "site",
            Side::Top => "top",
        }
    }
}

/// Where a mapping sits. For the HT-model `layer` and `node` name the child
/// node being mapped (`L, 0` for the top mixture). For the CP-model site
/// mappings are `0, i` and the top mixture is `1, 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MappingAddress {
    pub layer: usize,
    pub node: usize,
    pub side: Side,
}

impl MappingAddress {
    pub fn new(layer: usize, node: usize, side: Side) -> Self {
        Self { layer, node, side }
    }
}

/// A row-stochastic mixing matrix: row `j` holds the weights of output
/// channel `j` over the input channels.
#[derive(Debug, Clone, PartialEq)]
pub struct MappingMatrix {
    rows: Vec<Vec<f64>>,
    address: Option<MappingAddress>,
}

impl MappingMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.is_empty() || cols == 0 {
            return Err(Error::EmptyVector);
        }
        for (j, row) in rows.iter().enumerate() {
            if row.len() != cols {
                return Err(Error::ShapeMismatch(format!(
                    "row {j} has {} entries, expected {cols}",
                    row.len()
                )));
            }
            if !validate_simplex(row, STRUCTURE_TOL) {
                return Err(Error::NotSimplex(format!("row {j} is not on the simplex")));
            }
        }
        Ok(Self { rows, address: None })
    }

    pub fn identity(k: usize) -> Result<Self> {
        Self::new((0..k).map(|j| unit(k, j)).collect())
    }

    /// Row `j` selects input channel `perm[j]`.
    pub fn permutation(perm: &[usize]) -> Result<Self> {
        let k = perm.len();
        let mut seen = vec![false; k];
        for &p in perm {
            if p >= k || core::mem::replace(&mut seen[p], true) {
                return Err(Error::InvalidAxes(format!("{perm:?} is not a permutation")));
            }
        }
        Self::new(perm.iter().map(|&p| unit(k, p)).collect())
    }

    pub fn with_address(mut self, address: MappingAddress) -> Self {
        self.address = Some(address);
        self
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn address(&self) -> Option<MappingAddress> {
        self.address
    }

    /// Output channel count.
    pub fn out_dim(&self) -> usize {
        self.rows.len()
    }

    /// Input channel count.
    pub fn in_dim(&self) -> usize {
        self.rows[0].len()
    }

    pub fn rank(&self) -> usize {
        matrix_rank(&self.rows)
    }
}

fn unit(k: usize, at: usize) -> Vec<f64> {
    let mut v = vec![0.0; k];
    v[at] = 1.0;
    v
}

/// Numerical rank by Gaussian elimination with partial pivoting.
pub(crate) fn matrix_rank(rows: &[Vec<f64>]) -> usize {
    let mut m: Vec<Vec<f64>> = rows.to_vec();
    let cols = m.first().map_or(0, Vec::len);
    let scale = m
        .iter()
        .flatten()
        .fold(0.0f64, |acc, x| acc.max(x.abs()));
    if scale == 0.0 {
        return 0;
    }
    let tol = RANK_TOL * scale;
    let mut rank = 0;
    for c in 0..cols {
        if rank == m.len() {
            break;
        }
        let pivot = (rank..m.len())
            .max_by(|&a, &b| m[a][c].abs().total_cmp(&m[b][c].abs()))
            .unwrap();
        if m[pivot][c].abs() <= tol {
            continue;
        }
        m.swap(rank, pivot);
        for r in rank + 1..m.len() {
            let f = m[r][c] / m[rank][c];
            if f != 0.0 {
                for k in c..cols {
                    m[r][k] -= f * m[rank][k];
                }
            }
        }
        rank += 1;
    }
    rank
}

/// The mapping out of HT node `(layer, node)` into its parent, `layer < L`.
/// `side` must agree with the node's position under its parent.
pub fn mapping_matrix(m: &HtModel, layer: usize, node: usize, side: Side) -> Result<MappingMatrix> {
    let expected = if node.is_multiple_of(2) { Side::Left } else { Side::Right };
    if layer >= m.depth() || node >= m.nodes(layer) || side != expected {
        return Err(Error::InvalidAddress(format!(
            "no {} mapping out of node ({layer}, {node}) in a tree of depth {}",
            side.as_str(),
            m.depth()
        )));
    }
    Ok(MappingMatrix::new(m.mapping(layer, node).to_vec())?.with_address(MappingAddress::new(layer, node, side)))
}

/// The input prior consistent with `out_prior`: `A^T out_prior`.
pub fn induced_prior(a: &MappingMatrix, out_prior: &DiscreteDist) -> Result<DiscreteDist> {
    if out_prior.len() != a.out_dim() {
        return Err(Error::ShapeMismatch(format!(
            "prior over {} channels for a mapping with {} outputs",
            out_prior.len(),
            a.out_dim()
        )));
    }
    DiscreteDist::new(pull_back(&a.rows, out_prior.pmf()))
}

/// Mixes the members of `v` through `a`; the result carries `out_prior`.
pub fn apply_mapping(a: &MappingMatrix, v: &ConditionalFamily, out_prior: &DiscreteDist) -> Result<ConditionalFamily> {
    if v.members().len() != a.in_dim() {
        return Err(Error::ShapeMismatch(format!(
            "{} members for a mapping with {} inputs",
            v.members().len(),
            a.in_dim()
        )));
    }
    let shape = v.member_shape().to_vec();
    let flat: Vec<Vec<f64>> = v.members().iter().map(|m| m.pmf().to_vec()).collect();
    let members = mix(&a.rows, &flat)
        .into_iter()
        .map(|p| JointDist::new(Tensor::new(shape.clone(), p)?))
        .collect::<Result<Vec<_>>>()?;
    ConditionalFamily::new(out_prior.clone(), members)
}

/// `sum_a prior_a H(member_a)`.
fn family_entropy(prior: &[f64], members: &[Vec<f64>]) -> f64 {
    prior
        .iter()
        .zip(members)
        .map(|(&w, m)| if w > 0.0 { w * shannon_nats(m) } else { 0.0 })
        .sum()
}

/// Entropies on both sides of one mapping, in nats.
#[derive(Debug, Clone, PartialEq)]
pub struct MappingRecord {
    pub address: MappingAddress,
    pub in_channels: usize,
    pub out_channels: usize,
    pub rank: usize,
    pub source_entropy: f64,
    pub mapped_entropy: f64,
}

impl MappingRecord {
    pub fn gap(&self) -> f64 {
        self.mapped_entropy - self.source_entropy
    }

    /// `None` when the source entropy is below `eps`.
    pub fn ratio(&self, eps: f64) -> Option<f64> {
        (self.source_entropy >= eps).then(|| self.mapped_entropy / self.source_entropy)
    }
}

/// One HT fusion: both children mapped into the parent's channels and
/// multiplied.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionRecord {
    pub layer: usize,
    pub node: usize,
    pub left: MappingRecord,
    pub right: MappingRecord,
    pub parent_entropy: f64,
}

impl FusionRecord {
    /// `H(parent) - H(left mapped) - H(right mapped)`; zero up to rounding.
    pub fn product_defect(&self) -> f64 {
        self.parent_entropy - self.left.mapped_entropy - self.right.mapped_entropy
    }
}

fn fuse(
    m: &HtModel,
    priors: &[Vec<DiscreteDist>],
    layer: usize,
    node: usize,
    children: [&[Vec<f64>]; 2],
) -> (FusionRecord, Vec<Vec<f64>>) {
    let parent_prior = priors[layer][node].pmf();
    let mut mapped = Vec::with_capacity(2);
    let mut records = Vec::with_capacity(2);
    for (k, members) in children.into_iter().enumerate() {
        let c = 2 * node + k;
        let w = m.mapping(layer - 1, c);
        let out = mix(w, members);
        records.push(MappingRecord {
            address: MappingAddress::new(layer - 1, c, if k == 0 { Side::Left } else { Side::Right }),
            in_channels: m.channels(layer - 1),
            out_channels: m.channels(layer),
            rank: matrix_rank(w),
            source_entropy: family_entropy(priors[layer - 1][c].pmf(), members),
            mapped_entropy: family_entropy(parent_prior, &out),
        });
        mapped.push(out);
    }
    let parent: Vec<Vec<f64>> = mapped[0].iter().zip(&mapped[1]).map(|(a, b)| kron(a, b)).collect();
    let right = records.pop().unwrap();
    let left = records.pop().unwrap();
    let record = FusionRecord {
        layer,
        node,
        left,
        right,
        parent_entropy: family_entropy(parent_prior, &parent),
    };
    (record, parent)
}

/// The fusion forming internal node `(layer, node)`, `1 <= layer <= L`,
/// computed from the enumerated subtree distributions.
pub fn fusion_record(m: &HtModel, layer: usize, node: usize, budget: usize) -> Result<FusionRecord> {
    if layer == 0 || layer > m.depth() || node >= m.nodes(layer) {
        return Err(Error::InvalidAddress(format!(
            "({layer}, {node}) is not an internal node of a tree of depth {}",
            m.depth()
        )));
    }
    let left = m.node_members(layer - 1, 2 * node, budget)?;
    let right = m.node_members(layer - 1, 2 * node + 1, budget)?;
    check_budget("node subtree", m.alphabet(), 1 << layer, budget)?;
    Ok(fuse(m, &m.node_priors(), layer, node, [&left, &right]).0)
}

/// Everything the laws need from one bottom-up sweep.
#[derive(Debug, Clone, PartialEq)]
struct Sweep {
    mappings: Vec<MappingRecord>,
    fusions: Vec<FusionRecord>,
    /// Conditional entropy summed over each layer's nodes, then `H(X)` as
    /// given by the top mixture.
    layer_entropies: Vec<f64>,
}

fn ht_sweep(m: &HtModel, budget: usize) -> Result<Sweep> {
    check_budget("joint", m.alphabet(), m.order(), budget)?;
    let priors = m.node_priors();
    let mut members: Vec<Vec<Vec<f64>>> = (0..m.order()).map(|j| m.bank().members(j)).collect();
    let mut layer_entropies = vec![members
        .iter()
        .zip(&priors[0])
        .map(|(mm, p)| family_entropy(p.pmf(), mm))
        .sum::<f64>()];
    let mut fusions = Vec::with_capacity(m.order() - 1);
    let mut mappings = Vec::with_capacity(2 * m.order() - 1);
    for layer in 1..=m.depth() {
        let mut next = Vec::with_capacity(m.nodes(layer));
        let mut total = 0.0;
        for i in 0..m.nodes(layer) {
            let (record, parent) = fuse(m, &priors, layer, i, [&members[2 * i], &members[2 * i + 1]]);
            total += record.parent_entropy;
            mappings.push(record.left.clone());
            mappings.push(record.right.clone());
            fusions.push(record);
            next.push(parent);
        }
        layer_entropies.push(total);
        members = next;
    }
    let top = m.factors().top();
    let joint = mix(&[top.to_vec()], &members[0]);
    let h_top = shannon_nats(&joint[0]);
    mappings.push(MappingRecord {
        address: MappingAddress::new(m.depth(), 0, Side::Top),
        in_channels: top.len(),
        out_channels: 1,
        rank: matrix_rank(&[top.to_vec()]),
        source_entropy: family_entropy(priors[m.depth()][0].pmf(), &members[0]),
        mapped_entropy: h_top,
    });
    layer_entropies.push(h_top);
    Ok(Sweep {
        mappings,
        fusions,
        layer_entropies,
    })
}

fn cp_sweep(m: &CpModel, budget: usize) -> Result<Sweep> {
    check_budget("joint", m.alphabet(), m.order(), budget)?;
    let top = m.factors().top();
    let mut mappings = Vec::with_capacity(m.order() + 1);
    let mut channels: Option<Vec<Vec<f64>>> = None;
    for i in 0..m.order() {
        let w = m.site_mapping(i);
        let components = m.bank().members(i);
        let mapped = mix(&w, &components);
        mappings.push(MappingRecord {
            address: MappingAddress::new(0, i, Side::Site),
            in_channels: m.components(),
            out_channels: m.rank(),
            rank: matrix_rank(&w),
            source_entropy: family_entropy(m.site_prior(i).pmf(), &components),
            mapped_entropy: family_entropy(top, &mapped),
        });
        channels = Some(match channels {
            None => mapped,
            Some(acc) => acc.iter().zip(&mapped).map(|(a, b)| kron(a, b)).collect(),
        });
    }
    let channels = channels.expect("at least one site");
    let joint = mix(&[top.to_vec()], &channels);
    let h_top = shannon_nats(&joint[0]);
    let leaf_sum: f64 = mappings.iter().map(|r| r.source_entropy).sum();
    let h_given_z = family_entropy(top, &channels);
    mappings.push(MappingRecord {
        address: MappingAddress::new(1, 0, Side::Top),
        in_channels: m.rank(),
        out_channels: 1,
        rank: matrix_rank(&[top.to_vec()]),
        source_entropy: h_given_z,
        mapped_entropy: h_top,
    });
    Ok(Sweep {
        mappings,
        fusions: Vec::new(),
        layer_entropies: vec![leaf_sum, h_given_z, h_top],
    })
}

fn sweep(m: &Model, budget: usize) -> Result<Sweep> {
    match m {
        Model::Cp(cp) => cp_sweep(cp, budget),
        Model::Ht(ht) => ht_sweep(ht, budget),
    }
}

/// Per-layer conditional entropy totals from the leaves up, ending in `H(X)`.
/// HT: one entry per layer `0..=L`, then `H(X)`. CP: `sum_i H(x_i | d_i)`,
/// `H(X | z)`, `H(X)`.
pub fn layer_entropies(m: &Model, budget: usize) -> Result<Vec<f64>> {
    Ok(sweep(m, budget)?.layer_entropies)
}

/// `2^{L+1} - 1` for the HT-model, `N + 1` for the CP-model.
pub fn expected_mapping_count(dims: &Dims) -> usize {
    match dims {
        Dims::Cp { n, .. } => n + 1,
        Dims::Ht { n, .. } => 2 * n - 1,
    }
}

/// Exponent of `beta` in the ratio law: `L + 1` for HT, 2 for CP.
pub fn ratio_exponent(dims: &Dims) -> u32 {
    match dims {
        Dims::Cp { .. } => 2,
        Dims::Ht { n, .. } => n.trailing_zeros() + 1,
    }
}

/// In-model estimates of the per-mapping constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constants {
    /// Largest gap over all mappings.
    pub c_hat: f64,
    /// Largest ratio over mappings with source entropy at least `eps`;
    /// `None` when every mapping was skipped.
    pub beta_hat: Option<f64>,
    pub skipped: usize,
}

pub fn constants_from_records(records: &[MappingRecord], eps: f64) -> Constants {
    let c_hat = records.iter().map(MappingRecord::gap).fold(f64::NEG_INFINITY, f64::max);
    let ratios: Vec<f64> = records.iter().filter_map(|r| r.ratio(eps)).collect();
    Constants {
        c_hat,
        beta_hat: ratios.iter().copied().reduce(f64::max),
        skipped: records.len() - ratios.len(),
    }
}

pub fn estimate_constants(m: &Model, eps: f64, budget: usize) -> Result<Constants> {
    Ok(constants_from_records(&sweep(m, budget)?.mappings, eps))
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum ConstantsSource {
    /// `C` and `beta` are the model's own maxima.
    #[default]
    InModel,
    External { c: f64, beta: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyOptions {
    pub constants: ConstantsSource,
    pub eps: f64,
    pub budget: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            constants: ConstantsSource::InModel,
            eps: DEFAULT_EPS,
            budget: DEFAULT_BUDGET,
        }
    }
}

/// `lhs <= rhs` up to [`CHECK_SLACK`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

impl BoundCheck {
    fn new(lhs: f64, rhs: f64) -> Self {
        Self {
            lhs,
            rhs,
            pass: lhs <= rhs + CHECK_SLACK,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingReport {
    pub dims: Dims,
    pub eps: f64,
    /// `H(X)` from the enumerated joint.
    pub h_x: f64,
    /// `sum_i H(x_i | d_i)`.
    pub leaf_sum: f64,
    pub layer_entropies: Vec<f64>,
    pub mappings: Vec<MappingRecord>,
    /// Empty for the CP-model.
    pub fusions: Vec<FusionRecord>,
    pub estimates: Constants,
    /// The constants the bounds were checked with.
    pub c: f64,
    pub beta: Option<f64>,
    pub source: ConstantsSource,
    /// `H(X) - leaf_sum <= count * C`.
    pub additive: BoundCheck,
    /// `H(X) / leaf_sum <= beta^k`; `None` when not applicable.
    pub ratio: Option<BoundCheck>,
}

impl ScalingReport {
    pub fn mapping_count(&self) -> usize {
        self.mappings.len()
    }

    pub fn total_gap(&self) -> f64 {
        self.h_x - self.leaf_sum
    }

    pub fn sum_of_gaps(&self) -> f64 {
        self.mappings.iter().map(MappingRecord::gap).sum()
    }

    /// `total_gap - sum_of_gaps`.
    pub fn telescoping_residual(&self) -> f64 {
        self.total_gap() - self.sum_of_gaps()
    }

    pub fn max_product_defect(&self) -> f64 {
        self.fusions
            .iter()
            .map(|f| f.product_defect().abs())
            .fold(0.0, f64::max)
    }

    /// Mappings with `|gap| <= 1e-12`.
    pub fn zero_gap_mappings(&self) -> usize {
        self.mappings.iter().filter(|r| r.gap().abs() <= 1e-12).count()
    }

    pub fn pass(&self) -> bool {
        self.additive.pass && self.ratio.is_none_or(|r| r.pass)
    }

    /// Both bounds for this model's entropies under the given constants.
    pub fn check(&self, c: f64, beta: Option<f64>) -> (BoundCheck, Option<BoundCheck>) {
        let additive = BoundCheck::new(self.total_gap(), self.mapping_count() as f64 * c);
        let ratio = match beta {
            Some(b) if self.leaf_sum >= self.eps => Some(BoundCheck::new(
                self.h_x / self.leaf_sum,
                crate::math::powi(b, ratio_exponent(&self.dims) as i32),
            )),
            _ => None,
        };
        (additive, ratio)
    }
}

fn build_report(m: &Model, opts: &VerifyOptions) -> Result<ScalingReport> {
    let h_x = joint_entropy(&m.bruteforce_joint(opts.budget)?);
    let s = sweep(m, opts.budget)?;
    let estimates = constants_from_records(&s.mappings, opts.eps);
    let (c, beta) = match opts.constants {
        ConstantsSource::InModel => (estimates.c_hat, estimates.beta_hat),
        ConstantsSource::External { c, beta } => (c, Some(beta)),
    };
    let mut report = ScalingReport {
        dims: m.dims(),
        eps: opts.eps,
        h_x,
        leaf_sum: m.leaf_conditional_entropy_sum(),
        layer_entropies: s.layer_entropies,
        mappings: s.mappings,
        fusions: s.fusions,
        estimates,
        c,
        beta,
        source: opts.constants,
        additive: BoundCheck::new(0.0, 0.0),
        ratio: None,
    };
    (report.additive, report.ratio) = report.check(c, beta);
    Ok(report)
}

pub fn verify_ht_law(m: &HtModel, opts: &VerifyOptions) -> Result<ScalingReport> {
    build_report(&Model::Ht(m.clone()), opts)
}

pub fn verify_cp_law(m: &CpModel, opts: &VerifyOptions) -> Result<ScalingReport> {
    build_report(&Model::Cp(m.clone()), opts)
}

pub fn verify_law(m: &Model, opts: &VerifyOptions) -> Result<ScalingReport> {
    build_report(m, opts)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EnsembleMode {
    /// Every model is checked with its own estimates.
    InModel,
    /// Every model is checked with fixed constants.
    External { c: f64, beta: f64 },
    /// Constants are the maxima over the first half; the second half is
    /// checked with them.
    TrainTest,
}

impl EnsembleMode {
    pub fn as_str(self) -> &'static str {
        match self {
            EnsembleMode::InModel => "in_model",
            EnsembleMode::External { .. } => "external",
            EnsembleMode::TrainTest => "train_test",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnsembleRole {
    Checked,
    Train,
    Test,
}

impl EnsembleRole {
    pub fn as_str(self) -> &'static str {
        match self {
            EnsembleRole::Checked => "checked",
            EnsembleRole::Train => "train",
            EnsembleRole::Test => "test",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleRow {
    pub index: usize,
    pub seed: u64,
    pub role: EnsembleRole,
    pub h_x: f64,
    pub leaf_sum: f64,
    pub c_hat: f64,
    pub beta_hat: Option<f64>,
    /// `None` for training rows.
    pub additive: Option<BoundCheck>,
    pub ratio: Option<BoundCheck>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleReport {
    pub mode: EnsembleMode,
    /// Shared constants (external or trained); `None` in in-model mode.
    pub c: Option<f64>,
    pub beta: Option<f64>,
    pub rows: Vec<EnsembleRow>,
    pub additive_checked: usize,
    pub additive_violations: usize,
    pub ratio_checked: usize,
    pub ratio_violations: usize,
}

fn rate(violations: usize, checked: usize) -> f64 {
    if checked == 0 {
        0.0
    } else {
        violations as f64 / checked as f64
    }
}

impl EnsembleReport {
    /// Aggregates reports produced in-model for the models seeded `seeds[k]`.
    pub fn from_reports(reports: &[ScalingReport], seeds: &[u64], mode: EnsembleMode) -> Result<Self> {
        if reports.is_empty() || reports.len() != seeds.len() {
            return Err(Error::InvalidSplit(format!(
                "{} reports for {} seeds",
                reports.len(),
                seeds.len()
            )));
        }
        let train = match mode {
            EnsembleMode::TrainTest if reports.len() < 2 => {
                return Err(Error::InvalidSplit(String::from(
                    "train/test needs at least two models",
                )))
            }
            EnsembleMode::TrainTest => reports.len() / 2,
            _ => 0,
        };
        let (c, beta) = match mode {
            EnsembleMode::InModel => (None, None),
            EnsembleMode::External { c, beta } => (Some(c), Some(beta)),
            EnsembleMode::TrainTest => {
                let fit = &reports[..train];
                let c = fit.iter().map(|r| r.estimates.c_hat).fold(f64::NEG_INFINITY, f64::max);
                (Some(c), fit.iter().filter_map(|r| r.estimates.beta_hat).reduce(f64::max))
            }
        };
        let rows: Vec<EnsembleRow> = reports
            .iter()
            .zip(seeds)
            .enumerate()
            .map(|(index, (r, &seed))| {
                let role = match mode {
                    EnsembleMode::TrainTest if index < train => EnsembleRole::Train,
                    EnsembleMode::TrainTest => EnsembleRole::Test,
                    _ => EnsembleRole::Checked,
                };
                let (additive, ratio) = match (role, c) {
                    (EnsembleRole::Train, _) => (None, None),
                    (_, None) => (Some(r.additive), r.ratio),
                    (_, Some(c)) => {
                        let (a, b) = r.check(c, beta);
                        (Some(a), b)
                    }
                };
                EnsembleRow {
                    index,
                    seed,
                    role,
                    h_x: r.h_x,
                    leaf_sum: r.leaf_sum,
                    c_hat: r.estimates.c_hat,
                    beta_hat: r.estimates.beta_hat,
                    additive,
                    ratio,
                }
            })
            .collect();
        let count = |f: &dyn Fn(&EnsembleRow) -> Option<BoundCheck>| {
            let checks: Vec<BoundCheck> = rows.iter().filter_map(f).collect();
            (checks.len(), checks.iter().filter(|b| !b.pass).count())
        };
        let (additive_checked, additive_violations) = count(&|r| r.additive);
        let (ratio_checked, ratio_violations) = count(&|r| r.ratio);
        Ok(Self {
            mode,
            c,
            beta,
            rows,
            additive_checked,
            additive_violations,
            ratio_checked,
            ratio_violations,
        })
    }

    pub fn additive_violation_rate(&self) -> f64 {
        rate(self.additive_violations, self.additive_checked)
    }

    pub fn ratio_violation_rate(&self) -> f64 {
        rate(self.ratio_violations, self.ratio_checked)
    }
}

/// Model `k` of an ensemble is seeded `seed + k` (wrapping).
pub fn ensemble_seeds(seed: u64, n_models: usize) -> Vec<u64> {
    (0..n_models as u64).map(|k| seed.wrapping_add(k)).collect()
}

/// Sequential ensemble: generates, verifies in-model and aggregates.
pub fn ensemble_study(
    dims: &Dims,
    n_models: usize,
    seed: u64,
    mode: EnsembleMode,
    opts: &VerifyOptions,
) -> Result<EnsembleReport> {
    let seeds = ensemble_seeds(seed, n_models);
    let in_model = VerifyOptions {
        constants: ConstantsSource::InModel,
        ..*opts
    };
    let reports = seeds
        .iter()
        .map(|&s| verify_law(&crate::model::random_model(dims, s)?, &in_model))
        .collect::<Result<Vec<_>>>()?;
    EnsembleReport::from_reports(&reports, &seeds, mode)
}
