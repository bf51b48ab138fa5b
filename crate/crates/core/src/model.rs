//! Generative ConvACs over a finite alphabet.
//!
//! Both models describe `P(X)` for `X = (x_1, ..., x_N)`, `x_i in [S]`, as a
//! mixture over latent component assignments `(d_1, ..., d_N)`, `d_i in [M]`:
//!
//! ```text
//! P(X) = sum_{d} A[d_1..d_N] prod_i P(x_i | d_i; theta)
//! ```
//!
//! where the priors tensor `A` is CP-decomposed (shallow model) or
//! HT-decomposed (deep model).
//!
//! # Layers of the HT-model
//!
//! Layer 0 holds the `N` leaves, each with `M` channels (the components).
//! Layer `l >= 1` holds `N / 2^l` nodes with `r_{l-1}` channels. Every node
//! below the top owns one mapping into its parent, the weight block
//! `a^{l,j,.}` of the HT factors (rows are parent channels). A node's channel
//! distribution is the product of its two children's mapped distributions:
//!
//! ```text
//! P(phi_i^l | g) = prod_{c in children(i)} sum_a a^{l-1,c,g}_a P(phi_c^{l-1} | a)
//! P(X)           = sum_g a^L_g P(phi^L | g)
//! ```
//!
//! # Latent priors
//!
//! Conditional entropies `H(phi | d)` depend on the prior over the channel
//! variable. [`LatentPriors::Induced`] (the default) uses the marginals of the
//! latent tree itself: the top prior is `a^L` and each child's prior is
//! `A^T` times its parent's prior, so leaf priors are the site marginals of
//! the priors tensor. [`LatentPriors::PerLayer`] fixes one prior per layer
//! instead. Only the induced priors make every node's conditional entropy
//! non-decreasing through each mapping.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::info::{self, ConditionalFamily, DiscreteDist, JointDist};
use crate::rng::{flat_dirichlet, Role, StreamId, Streams};
use crate::tensor::{self, CpFactors, HtFactors, Mode, Tensor};
use crate::{Error, Result};

/// Default cap on `M^N` and `S^N` for enumeration paths.
pub const DEFAULT_BUDGET: usize = 1 << 20;

pub(crate) fn check_budget(what: &'static str, base: usize, exp: usize, cap: usize) -> Result<usize> {
    let needed = (0..exp).try_fold(1u128, |acc, _| acc.checked_mul(base as u128));
    match needed {
        Some(n) if n <= cap as u128 => Ok(n as usize),
        Some(n) => Err(Error::BudgetExceeded { what, needed: n, cap }),
        None => Err(Error::BudgetExceeded {
            what,
            needed: u128::MAX,
            cap,
        }),
    }
}

/// `M` categorical components over `[S]`, shared by all sites or one set
/// per site.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentBank {
    alphabet: usize,
    count: usize,
    sites: Vec<Vec<DiscreteDist>>,
}

impl ComponentBank {
    pub fn shared(components: Vec<DiscreteDist>) -> Result<Self> {
        Self::per_site(vec![components])
    }

    /// One row of `M` components per site. A single row is treated as shared.
    pub fn per_site(table: Vec<Vec<DiscreteDist>>) -> Result<Self> {
        let count = table.first().map_or(0, Vec::len);
        if table.is_empty() || count == 0 {
            return Err(Error::InvalidDims("component bank needs at least one component".into()));
        }
        let alphabet = table[0][0].len();
        for row in &table {
            if row.len() != count {
                return Err(Error::InvalidDims(format!(
                    "every site needs {count} components, found {}",
                    row.len()
                )));
            }
            if let Some(c) = row.iter().find(|c| c.len() != alphabet) {
                return Err(Error::InvalidDims(format!(
                    "component over {} symbols in a bank over {alphabet}",
                    c.len()
                )));
            }
        }
        Ok(Self {
            alphabet,
            count,
            sites: table,
        })
    }

    pub fn alphabet(&self) -> usize {
        self.alphabet
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn is_shared(&self) -> bool {
        self.sites.len() == 1
    }

    pub fn table(&self) -> &[Vec<DiscreteDist>] {
        &self.sites
    }

    pub fn site(&self, site: usize) -> &[DiscreteDist] {
        if self.is_shared() {
            &self.sites[0]
        } else {
            &self.sites[site]
        }
    }

    pub fn component(&self, site: usize, d: usize) -> &DiscreteDist {
        &self.site(site)[d]
    }

    fn check_order(&self, n: usize) -> Result<()> {
        if !self.is_shared() && self.sites.len() != n {
            return Err(Error::InvalidDims(format!(
                "per-site bank has {} sites for N = {n}",
                self.sites.len()
            )));
        }
        Ok(())
    }

    /// `M x S` matrix `theta_d(s)` at a site.
    pub(crate) fn matrix(&self, site: usize) -> Vec<Vec<f64>> {
        self.site(site).iter().map(|c| c.pmf().to_vec()).collect()
    }

    pub(crate) fn members(&self, site: usize) -> Vec<Vec<f64>> {
        self.matrix(site)
    }
}

/// A tuple of `N` symbols, each in `[S]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct InputAssignment(Vec<usize>);

impl InputAssignment {
    pub fn new(symbols: Vec<usize>, alphabet: usize) -> Result<Self> {
        if symbols.is_empty() {
            return Err(Error::InvalidDims("empty assignment".into()));
        }
        if let Some(s) = symbols.iter().find(|&&s| s >= alphabet) {
            return Err(Error::InvalidDims(format!("symbol {s} outside alphabet [{alphabet}]")));
        }
        Ok(Self(symbols))
    }

    /// The assignment at row-major position `lin` of `[S]^N`.
    pub fn from_linear(mut lin: usize, n: usize, alphabet: usize) -> Self {
        let mut symbols = vec![0; n];
        for k in (0..n).rev() {
            symbols[k] = lin % alphabet;
            lin /= alphabet;
        }
        Self(symbols)
    }

    pub fn symbols(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

fn require_probabilistic(mode: Mode, what: &str) -> Result<()> {
    if mode != Mode::Probabilistic {
        return Err(Error::NotSimplex(format!("{what} must be built in probabilistic mode")));
    }
    Ok(())
}

fn check_input(x: &InputAssignment, n: usize, s: usize) -> Result<()> {
    if x.len() != n {
        return Err(Error::InvalidDims(format!("assignment of length {} for N = {n}", x.len())));
    }
    if x.0.iter().any(|&v| v >= s) {
        return Err(Error::InvalidDims(format!("symbol outside alphabet [{s}]")));
    }
    Ok(())
}

/// `out[g] = sum_a weights[g][a] * members[a]`.
pub(crate) fn mix(weights: &[Vec<f64>], members: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let len = members[0].len();
    weights
        .iter()
        .map(|row| {
            let mut acc = vec![0.0; len];
            for (&w, m) in row.iter().zip(members) {
                if w != 0.0 {
                    acc.iter_mut().zip(m).for_each(|(a, x)| *a += w * x);
                }
            }
            acc
        })
        .collect()
}

/// `A^T pi` for a row-stochastic `A`.
pub(crate) fn pull_back(weights: &[Vec<f64>], prior: &[f64]) -> Vec<f64> {
    let cols = weights[0].len();
    let mut out = vec![0.0; cols];
    for (row, &p) in weights.iter().zip(prior) {
        out.iter_mut().zip(row).for_each(|(o, w)| *o += p * w);
    }
    out
}

/// Shallow ConvAC: `P(X) = sum_z a_z prod_i sum_d a^{z,i}_d P(x_i | d)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CpModel {
    bank: ComponentBank,
    factors: CpFactors,
}

impl CpModel {
    pub fn new(bank: ComponentBank, factors: CpFactors) -> Result<Self> {
        require_probabilistic(factors.mode(), "CP-model factors")?;
        if factors.leaf_dim() != bank.count() {
            return Err(Error::InvalidDims(format!(
                "factor vectors over {} components, bank has {}",
                factors.leaf_dim(),
                bank.count()
            )));
        }
        bank.check_order(factors.order())?;
        Ok(Self { bank, factors })
    }

    pub fn order(&self) -> usize {
        self.factors.order()
    }

    pub fn components(&self) -> usize {
        self.bank.count()
    }

    pub fn alphabet(&self) -> usize {
        self.bank.alphabet()
    }

    pub fn rank(&self) -> usize {
        self.factors.rank()
    }

    pub fn bank(&self) -> &ComponentBank {
        &self.bank
    }

    pub fn factors(&self) -> &CpFactors {
        &self.factors
    }

    /// Factored evaluation; never touches the priors tensor.
    pub fn forward(&self, x: &InputAssignment) -> Result<f64> {
        check_input(x, self.order(), self.alphabet())?;
        let mut total = 0.0;
        for (z, &az) in self.factors.top().iter().enumerate() {
            let mut prod = az;
            for (i, &xi) in x.symbols().iter().enumerate() {
                let site: f64 = self
                    .factors
                    .vector(z, i)
                    .iter()
                    .enumerate()
                    .map(|(d, &w)| w * self.bank.component(i, d).prob(xi))
                    .sum();
                prod *= site;
            }
            total += prod;
        }
        Ok(total)
    }

    /// `Z x M` matrix `a^{z,i}_d` mapping components to the `z` channels at
    /// site `i`.
    pub fn site_mapping(&self, site: usize) -> Vec<Vec<f64>> {
        (0..self.rank())
            .map(|z| self.factors.vector(z, site).to_vec())
            .collect()
    }

    /// Marginal of `d_i`: `sum_z a_z a^{z,i}`.
    pub fn site_prior(&self, site: usize) -> DiscreteDist {
        let p = pull_back(&self.site_mapping(site), self.factors.top());
        DiscreteDist::new(p).expect("mixture of simplex vectors")
    }

    /// Members `P(x_i | z)` for every `z`.
    pub fn site_channels(&self, site: usize) -> Vec<Vec<f64>> {
        mix(&self.site_mapping(site), &self.bank.members(site))
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub enum LatentPriors {
    /// Marginals of the latent tree (top prior `a^L`, children `A^T pi`).
    #[default]
    Induced,
    /// One prior per layer `0..=L`, over that layer's channels.
    PerLayer(Vec<DiscreteDist>),
}

impl LatentPriors {
    /// Uniform prior on every layer of a model with the given channel counts.
    pub fn uniform(channels: &[usize]) -> Result<Self> {
        channels
            .iter()
            .map(|&c| DiscreteDist::uniform(c))
            .collect::<Result<Vec<_>>>()
            .map(LatentPriors::PerLayer)
    }
}

/// Deep ConvAC over a complete binary tree with `N = 2^L` leaves.
#[derive(Debug, Clone, PartialEq)]
pub struct HtModel {
    bank: ComponentBank,
    factors: HtFactors,
    priors: LatentPriors,
}

impl HtModel {
    pub fn new(bank: ComponentBank, factors: HtFactors, priors: LatentPriors) -> Result<Self> {
        require_probabilistic(factors.mode(), "HT-model factors")?;
        if factors.leaf_dim() != bank.count() {
            return Err(Error::InvalidDims(format!(
                "leaf vectors over {} components, bank has {}",
                factors.leaf_dim(),
                bank.count()
            )));
        }
        bank.check_order(factors.order())?;
        let model = Self {
            bank,
            factors,
            priors,
        };
        if let LatentPriors::PerLayer(layers) = &model.priors {
            if layers.len() != model.depth() + 1 {
                return Err(Error::InvalidDims(format!(
                    "{} latent priors for {} layers",
                    layers.len(),
                    model.depth() + 1
                )));
            }
            for (l, p) in layers.iter().enumerate() {
                if p.len() != model.channels(l) {
                    return Err(Error::InvalidDims(format!(
                        "layer {l} prior over {} values, layer has {} channels",
                        p.len(),
                        model.channels(l)
                    )));
                }
            }
        }
        Ok(model)
    }

    pub fn depth(&self) -> usize {
        self.factors.depth()
    }

    pub fn order(&self) -> usize {
        self.factors.order()
    }

    pub fn components(&self) -> usize {
        self.bank.count()
    }

    pub fn alphabet(&self) -> usize {
        self.bank.alphabet()
    }

    pub fn bank(&self) -> &ComponentBank {
        &self.bank
    }

    pub fn factors(&self) -> &HtFactors {
        &self.factors
    }

    pub fn latent_priors(&self) -> &LatentPriors {
        &self.priors
    }

    pub fn with_priors(&self, priors: LatentPriors) -> Result<Self> {
        Self::new(self.bank.clone(), self.factors.clone(), priors)
    }

    /// Number of nodes on layer `l`.
    pub fn nodes(&self, layer: usize) -> usize {
        self.order() >> layer
    }

    /// Channel count of layer `l`: `M` at the leaves, `r_{l-1}` above.
    pub fn channels(&self, layer: usize) -> usize {
        if layer == 0 {
            self.components()
        } else {
            self.factors.ranks()[layer - 1]
        }
    }

    /// Mapping out of node `(l, j)` into its parent, `l < L`: rows are parent
    /// channels, columns are this node's channels.
    pub fn mapping(&self, layer: usize, node: usize) -> &[Vec<f64>] {
        self.factors.node_weights(layer, node)
    }

    fn check_address(&self, layer: usize, node: usize) -> Result<()> {
        if layer > self.depth() || node >= self.nodes(layer) {
            return Err(Error::InvalidAddress(format!(
                "node ({layer}, {node}) outside a tree of depth {}",
                self.depth()
            )));
        }
        Ok(())
    }

    /// Bottom-up evaluation of the layer recursion; cost
    /// `O(N * sum_l r_l r_{l-1})`.
    pub fn forward(&self, x: &InputAssignment) -> Result<f64> {
        check_input(x, self.order(), self.alphabet())?;
        let mut values: Vec<Vec<f64>> = x
            .symbols()
            .iter()
            .enumerate()
            .map(|(i, &xi)| self.bank.site(i).iter().map(|c| c.prob(xi)).collect())
            .collect();
        for layer in 1..=self.depth() {
            values = (0..self.nodes(layer))
                .map(|i| {
                    let mut out = vec![1.0; self.channels(layer)];
                    for c in [2 * i, 2 * i + 1] {
                        let w = self.mapping(layer - 1, c);
                        for (o, row) in out.iter_mut().zip(w) {
                            *o *= row.iter().zip(&values[c]).map(|(a, v)| a * v).sum::<f64>();
                        }
                    }
                    out
                })
                .collect();
        }
        Ok(self
            .factors
            .top()
            .iter()
            .zip(&values[0])
            .map(|(a, v)| a * v)
            .sum())
    }

    /// Channel priors for every node, indexed `[layer][node]`.
    pub fn node_priors(&self) -> Vec<Vec<DiscreteDist>> {
        let depth = self.depth();
        match &self.priors {
            LatentPriors::PerLayer(layers) => (0..=depth)
                .map(|l| vec![layers[l].clone(); self.nodes(l)])
                .collect(),
            LatentPriors::Induced => {
                let mut raw: Vec<Vec<Vec<f64>>> = (0..=depth).map(|l| vec![Vec::new(); self.nodes(l)]).collect();
                raw[depth][0] = self.factors.top().to_vec();
                for layer in (1..=depth).rev() {
                    for i in 0..self.nodes(layer) {
                        for c in [2 * i, 2 * i + 1] {
                            raw[layer - 1][c] = pull_back(self.mapping(layer - 1, c), &raw[layer][i]);
                        }
                    }
                }
                raw.into_iter()
                    .map(|layer| {
                        layer
                            .into_iter()
                            .map(|p| DiscreteDist::new(p).expect("pull-back of simplex vectors"))
                            .collect()
                    })
                    .collect()
            }
        }
    }

    /// Channel distributions `P(phi_i^l | g)` of a node as flat pmfs over
    /// `[S]^{2^l}`.
    pub fn node_members(&self, layer: usize, node: usize, budget: usize) -> Result<Vec<Vec<f64>>> {
        self.check_address(layer, node)?;
        check_budget("node subtree", self.alphabet(), 1 << layer, budget)?;
        Ok(self.members_unchecked(layer, node))
    }

    fn members_unchecked(&self, layer: usize, node: usize) -> Vec<Vec<f64>> {
        if layer == 0 {
            return self.bank.members(node);
        }
        let left = mix(self.mapping(layer - 1, 2 * node), &self.members_unchecked(layer - 1, 2 * node));
        let right = mix(
            self.mapping(layer - 1, 2 * node + 1),
            &self.members_unchecked(layer - 1, 2 * node + 1),
        );
        left.iter().zip(&right).map(|(a, b)| tensor::kron(a, b)).collect()
    }

    /// The exact family `{P(phi_i^l | d^l = g)}_g` with the node's prior.
    pub fn node_conditional(&self, layer: usize, node: usize, budget: usize) -> Result<ConditionalFamily> {
        let members = self.node_members(layer, node, budget)?;
        let prior = self.node_priors()[layer][node].clone();
        let shape = vec![self.alphabet(); 1 << layer];
        let members = members
            .into_iter()
            .map(|m| JointDist::new(Tensor::new(shape.clone(), m)?))
            .collect::<Result<Vec<_>>>()?;
        ConditionalFamily::new(prior, members)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Cp,
    Ht,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Cp => "cp",
            ModelKind::Ht => "ht",
        }
    }
}

/// Model dimensions for random generation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Dims {
    Cp { n: usize, m: usize, s: usize, z: usize },
    Ht { n: usize, m: usize, s: usize, ranks: Vec<usize> },
}

impl Dims {
    pub fn kind(&self) -> ModelKind {
        match self {
            Dims::Cp { .. } => ModelKind::Cp,
            Dims::Ht { .. } => ModelKind::Ht,
        }
    }

    pub fn order(&self) -> usize {
        match self {
            Dims::Cp { n, .. } | Dims::Ht { n, .. } => *n,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (n, m, s) = match self {
            Dims::Cp { n, m, s, .. } | Dims::Ht { n, m, s, .. } => (*n, *m, *s),
        };
        if n == 0 || m == 0 || s == 0 {
            return Err(Error::InvalidDims("N, M and S must be positive".into()));
        }
        match self {
            Dims::Cp { z, .. } if *z == 0 => Err(Error::InvalidDims("Z must be positive".into())),
            Dims::Ht { ranks, .. } => {
                if n < 2 || !n.is_power_of_two() {
                    return Err(Error::NotPowerOfTwo(n));
                }
                if ranks.len() != n.trailing_zeros() as usize {
                    return Err(Error::RankMismatch(format!(
                        "N = {n} needs {} ranks, got {}",
                        n.trailing_zeros(),
                        ranks.len()
                    )));
                }
                if ranks.contains(&0) {
                    return Err(Error::InvalidDims("ranks must be positive".into()));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

/// How a random model's components are laid out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BankLayout {
    #[default]
    Shared,
    PerSite,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Cp(CpModel),
    Ht(HtModel),
}

impl Model {
    pub fn kind(&self) -> ModelKind {
        match self {
            Model::Cp(_) => ModelKind::Cp,
            Model::Ht(_) => ModelKind::Ht,
        }
    }

    pub fn order(&self) -> usize {
        match self {
            Model::Cp(m) => m.order(),
            Model::Ht(m) => m.order(),
        }
    }

    pub fn components(&self) -> usize {
        self.bank().count()
    }

    pub fn alphabet(&self) -> usize {
        self.bank().alphabet()
    }

    pub fn bank(&self) -> &ComponentBank {
        match self {
            Model::Cp(m) => &m.bank,
            Model::Ht(m) => &m.bank,
        }
    }

    pub fn dims(&self) -> Dims {
        match self {
            Model::Cp(m) => Dims::Cp {
                n: m.order(),
                m: m.components(),
                s: m.alphabet(),
                z: m.rank(),
            },
            Model::Ht(m) => Dims::Ht {
                n: m.order(),
                m: m.components(),
                s: m.alphabet(),
                ranks: m.factors.ranks().to_vec(),
            },
        }
    }

    pub fn forward(&self, x: &InputAssignment) -> Result<f64> {
        match self {
            Model::Cp(m) => m.forward(x),
            Model::Ht(m) => m.forward(x),
        }
    }

    /// Reconstructed `A[d_1..d_N]`; requires `M^N <= budget`.
    pub fn priors_tensor(&self, budget: usize) -> Result<Tensor> {
        check_budget("priors tensor", self.components(), self.order(), budget)?;
        Ok(match self {
            Model::Cp(m) => tensor::cp_reconstruct(&m.factors),
            Model::Ht(m) => tensor::ht_reconstruct(&m.factors),
        })
    }

    /// `P(X)` for every `X in [S]^N` from the priors tensor:
    /// `sum_d A[d] prod_i P(x_i | d_i)`, contracted one site at a time.
    pub fn bruteforce_joint(&self, budget: usize) -> Result<JointDist> {
        check_budget("joint", self.alphabet(), self.order(), budget)?;
        let mut t = self.priors_tensor(budget)?;
        for site in 0..self.order() {
            t = t.mode_product(site, &self.bank().matrix(site))?;
        }
        JointDist::new(t)
    }

    /// `sum_i H(x_i | d_i)` with each site's component prior.
    pub fn leaf_conditional_entropy_sum(&self) -> f64 {
        let priors: Vec<DiscreteDist> = match self {
            Model::Cp(m) => (0..m.order()).map(|i| m.site_prior(i)).collect(),
            Model::Ht(m) => m.node_priors().swap_remove(0),
        };
        priors
            .iter()
            .enumerate()
            .map(|(i, prior)| {
                prior
                    .pmf()
                    .iter()
                    .zip(self.bank().site(i))
                    .map(|(&w, c)| if w > 0.0 { w * info::shannon_nats(c.pmf()) } else { 0.0 })
                    .sum::<f64>()
            })
            .sum()
    }
}

impl From<CpModel> for Model {
    fn from(m: CpModel) -> Self {
        Model::Cp(m)
    }
}

impl From<HtModel> for Model {
    fn from(m: HtModel) -> Self {
        Model::Ht(m)
    }
}

/// Random model with every weight vector and component drawn from the flat
/// Dirichlet, fully determined by `seed`.
pub fn random_model(dims: &Dims, seed: u64) -> Result<Model> {
    random_model_with(dims, seed, BankLayout::Shared)
}

pub fn random_model_with(dims: &Dims, seed: u64, layout: BankLayout) -> Result<Model> {
    dims.validate()?;
    let streams = Streams::new(seed);
    let draw = |id: StreamId, k: usize| flat_dirichlet(&mut streams.stream(id), k);
    let (n, m, s) = match dims {
        Dims::Cp { n, m, s, .. } | Dims::Ht { n, m, s, .. } => (*n, *m, *s),
    };
    let sites = match layout {
        BankLayout::Shared => 1,
        BankLayout::PerSite => n,
    };
    let table = (0..sites)
        .map(|site| {
            (0..m)
                .map(|d| DiscreteDist::new(draw(StreamId::new(Role::Component, site, d, 0), s)))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let bank = ComponentBank::per_site(table)?;
    match dims {
        Dims::Cp { z, .. } => {
            let top = draw(StreamId::new(Role::CpTop, 0, 0, 0), *z);
            let vectors = (0..*z)
                .map(|zz| {
                    (0..n)
                        .map(|i| draw(StreamId::new(Role::CpFactor, zz, i, 0), m))
                        .collect()
                })
                .collect();
            let factors = CpFactors::new(Mode::Probabilistic, top, vectors)?;
            Ok(Model::Cp(CpModel::new(bank, factors)?))
        }
        Dims::Ht { ranks, .. } => {
            let weights = (0..ranks.len())
                .map(|l| {
                    let len = if l == 0 { m } else { ranks[l - 1] };
                    (0..n >> l)
                        .map(|j| {
                            (0..ranks[l])
                                .map(|g| draw(StreamId::new(Role::HtWeight, l, j, g), len))
                                .collect()
                        })
                        .collect()
                })
                .collect();
            let top = draw(StreamId::new(Role::HtTop, 0, 0, 0), ranks[ranks.len() - 1]);
            let factors = HtFactors::new(Mode::Probabilistic, m, ranks.clone(), weights, top)?;
            Ok(Model::Ht(HtModel::new(bank, factors, LatentPriors::Induced)?))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ht_dims(n: usize, m: usize, s: usize, ranks: &[usize]) -> Dims {
        Dims::Ht {
            n,
            m,
            s,
            ranks: ranks.to_vec(),
        }
    }

    fn all_inputs(n: usize, s: usize) -> impl Iterator<Item = InputAssignment> {
        (0..s.pow(n as u32)).map(move |lin| InputAssignment::from_linear(lin, n, s))
    }

    #[test]
    fn random_model_is_deterministic() {
        let d = ht_dims(4, 2, 2, &[1, 1]);
        assert_eq!(random_model(&d, 11).unwrap(), random_model(&d, 11).unwrap());
        assert_ne!(random_model(&d, 11).unwrap(), random_model(&d, 12).unwrap());
        let d = Dims::Cp { n: 3, m: 2, s: 4, z: 2 };
        assert_eq!(random_model(&d, 5).unwrap(), random_model(&d, 5).unwrap());
    }

    #[test]
    fn random_model_rejects_invalid_dims() {
        assert_eq!(random_model(&ht_dims(6, 2, 2, &[1, 1]), 0), Err(Error::NotPowerOfTwo(6)));
        assert!(random_model(&ht_dims(4, 2, 2, &[1]), 0).is_err());
        assert!(random_model(&Dims::Cp { n: 3, m: 0, s: 2, z: 1 }, 0).is_err());
        assert!(random_model(&Dims::Cp { n: 3, m: 2, s: 2, z: 0 }, 0).is_err());
    }

    #[test]
    fn one_hot_cp_is_deterministic() {
        // components: theta_0 = point mass at 1, theta_1 = point mass at 0
        let bank = ComponentBank::shared(vec![
            DiscreteDist::point_mass(2, 1).unwrap(),
            DiscreteDist::point_mass(2, 0).unwrap(),
        ])
        .unwrap();
        let factors = CpFactors::new(
            Mode::Probabilistic,
            vec![1.0],
            vec![vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0]]],
        )
        .unwrap();
        let m = CpModel::new(bank, factors).unwrap();
        for x in all_inputs(3, 2) {
            let p = m.forward(&x).unwrap();
            let expected = if x.symbols() == [1, 0, 1] { 1.0 } else { 0.0 };
            assert_eq!(p, expected, "{x:?}");
        }
    }

    #[test]
    fn uniform_cp_is_uniform() {
        let u = DiscreteDist::uniform(2).unwrap();
        let bank = ComponentBank::shared(vec![u.clone(), u]).unwrap();
        let half = vec![0.5, 0.5];
        let factors = CpFactors::new(
            Mode::Probabilistic,
            half.clone(),
            vec![vec![half.clone(); 3], vec![half.clone(); 3]],
        )
        .unwrap();
        let m = Model::Cp(CpModel::new(bank, factors).unwrap());
        for x in all_inputs(3, 2) {
            assert!((m.forward(&x).unwrap() - 0.125).abs() < 1e-15);
        }
        let joint = m.bruteforce_joint(DEFAULT_BUDGET).unwrap();
        assert!(joint.pmf().iter().all(|&p| (p - 0.125).abs() < 1e-15));
        assert!(m.priors_tensor(DEFAULT_BUDGET).unwrap().data().iter().all(|&p| (p - 0.125).abs() < 1e-15));
    }

    #[test]
    fn unconstrained_factors_are_rejected() {
        let bank = ComponentBank::shared(vec![DiscreteDist::uniform(2).unwrap()]).unwrap();
        let f = CpFactors::new(Mode::Unconstrained, vec![1.0], vec![vec![vec![1.0]]]).unwrap();
        assert!(CpModel::new(bank, f).is_err());
    }

    #[test]
    fn forward_dimension_mismatch() {
        let m = random_model(&ht_dims(4, 2, 3, &[2, 2]), 1).unwrap();
        assert!(m.forward(&InputAssignment(vec![0, 1, 2])).is_err());
        assert!(m.forward(&InputAssignment(vec![0, 1, 2, 3])).is_err());
        assert!(InputAssignment::new(vec![0, 3], 3).is_err());
    }

    #[test]
    fn depth_one_ht_equals_cp() {
        let Model::Ht(ht) = random_model(&ht_dims(2, 3, 2, &[4]), 9).unwrap() else {
            unreachable!()
        };
        let vectors = (0..4)
            .map(|z| (0..2).map(|i| ht.mapping(0, i)[z].clone()).collect())
            .collect();
        let cp = CpModel::new(
            ht.bank().clone(),
            CpFactors::new(Mode::Probabilistic, ht.factors().top().to_vec(), vectors).unwrap(),
        )
        .unwrap();
        for x in all_inputs(2, 2) {
            let (a, b) = (ht.forward(&x).unwrap(), cp.forward(&x).unwrap());
            assert!((a - b).abs() <= 1e-14 * b);
        }
        let (a, b) = (Model::Cp(cp).leaf_conditional_entropy_sum(), Model::Ht(ht).leaf_conditional_entropy_sum());
        assert!((a - b).abs() < 1e-14);
    }

    #[test]
    fn budget_is_enforced() {
        let m = random_model(&Dims::Cp { n: 21, m: 2, s: 2, z: 1 }, 0).unwrap();
        assert!(matches!(m.priors_tensor(DEFAULT_BUDGET), Err(Error::BudgetExceeded { .. })));
        assert!(matches!(m.bruteforce_joint(DEFAULT_BUDGET), Err(Error::BudgetExceeded { .. })));
        assert!(m.priors_tensor(1 << 21).is_ok());
        assert!(check_budget("x", 1000, 1000, 10).is_err());
    }

    #[test]
    fn leaf_nodes_are_components() {
        let Model::Ht(m) = random_model(&ht_dims(4, 3, 2, &[2, 2]), 3).unwrap() else {
            unreachable!()
        };
        let fam = m.node_conditional(0, 2, DEFAULT_BUDGET).unwrap();
        for (member, c) in fam.members().iter().zip(m.bank().site(2)) {
            assert_eq!(member.pmf(), c.pmf());
        }
        assert!(m.node_conditional(3, 0, DEFAULT_BUDGET).is_err());
        assert!(m.node_conditional(1, 2, DEFAULT_BUDGET).is_err());
    }

    #[test]
    fn per_layer_priors_are_validated() {
        let Model::Ht(m) = random_model(&ht_dims(4, 3, 2, &[2, 4]), 3).unwrap() else {
            unreachable!()
        };
        assert!(m.with_priors(LatentPriors::uniform(&[3, 2, 4]).unwrap()).is_ok());
        assert!(m.with_priors(LatentPriors::uniform(&[3, 2]).unwrap()).is_err());
        assert!(m.with_priors(LatentPriors::uniform(&[3, 4, 2]).unwrap()).is_err());
    }

    #[test]
    fn induced_leaf_priors_are_site_marginals() {
        let model = random_model(&ht_dims(4, 3, 2, &[2, 3]), 21).unwrap();
        let Model::Ht(ht) = &model else { unreachable!() };
        let a = model.priors_tensor(DEFAULT_BUDGET).unwrap();
        let joint = JointDist::new(a).unwrap();
        let priors = ht.node_priors();
        for site in 0..4 {
            let marginal = info::marginalize(&joint, &[site]).unwrap();
            for (x, y) in marginal.pmf().iter().zip(priors[0][site].pmf()) {
                assert!((x - y).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn deterministic_components_have_zero_leaf_entropy() {
        let bank = ComponentBank::shared(vec![
            DiscreteDist::point_mass(2, 0).unwrap(),
            DiscreteDist::point_mass(2, 1).unwrap(),
        ])
        .unwrap();
        let Model::Ht(m) = random_model(&ht_dims(4, 2, 2, &[2, 2]), 1).unwrap() else {
            unreachable!()
        };
        let m = Model::Ht(HtModel::new(bank, m.factors().clone(), LatentPriors::Induced).unwrap());
        assert_eq!(m.leaf_conditional_entropy_sum(), 0.0);
    }

    #[test]
    fn uniform_components_give_n_ln_s() {
        let u = DiscreteDist::uniform(3).unwrap();
        let Model::Cp(m) = random_model(&Dims::Cp { n: 4, m: 2, s: 3, z: 2 }, 1).unwrap() else {
            unreachable!()
        };
        let m = Model::Cp(CpModel::new(ComponentBank::shared(vec![u.clone(), u]).unwrap(), m.factors().clone()).unwrap());
        assert!((m.leaf_conditional_entropy_sum() - 4.0 * libm::log(3.0)).abs() < 1e-12);
    }
}
