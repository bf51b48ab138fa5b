//! Dense tensors and the CP / hierarchical Tucker factor containers.
//!
//! Tensors are stored row-major: the last mode varies fastest.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

/// Tolerance for structural (simplex) validation of factor vectors.
pub const STRUCTURE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if shape.is_empty() || shape.contains(&0) {
            return Err(Error::ShapeMismatch(format!(
                "shape must be a nonempty list of positive dimensions, got {shape:?}"
            )));
        }
        let expected = checked_volume(&shape)
            .ok_or_else(|| Error::ShapeMismatch(format!("volume of {shape:?} overflows")))?;
        if data.len() != expected {
            return Err(Error::DataLength {
                expected,
                found: data.len(),
            });
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("tensor data"));
        }
        Ok(Self { shape, data })
    }

    pub fn from_vector(v: Vec<f64>) -> Result<Self> {
        if v.is_empty() {
            return Err(Error::EmptyVector);
        }
        Self::new(vec![v.len()], v)
    }

    pub fn filled(shape: Vec<usize>, value: f64) -> Result<Self> {
        let n = checked_volume(&shape).unwrap_or(0);
        Self::new(shape, vec![value; n])
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn order(&self) -> usize {
        self.shape.len()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn strides(&self) -> Vec<usize> {
        strides(&self.shape)
    }

    pub fn linear_index(&self, index: &[usize]) -> Option<usize> {
        if index.len() != self.shape.len() {
            return None;
        }
        let mut lin = 0;
        for (&i, &d) in index.iter().zip(&self.shape) {
            if i >= d {
                return None;
            }
            lin = lin * d + i;
        }
        Some(lin)
    }

    pub fn get(&self, index: &[usize]) -> Option<f64> {
        self.linear_index(index).map(|i| self.data[i])
    }

    /// Tensor (outer) product; the result's shape is `self.shape ++ other.shape`.
    pub fn outer(&self, other: &Tensor) -> Tensor {
        let mut shape = self.shape.clone();
        shape.extend_from_slice(&other.shape);
        let data = kron(&self.data, &other.data);
        Tensor { shape, data }
    }

    /// `self += scale * other`.
    pub fn add_scaled(&mut self, scale: f64, other: &Tensor) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::ShapeMismatch(format!(
                "{:?} vs {:?}",
                self.shape, other.shape
            )));
        }
        self.data
            .iter_mut()
            .zip(&other.data)
            .for_each(|(a, b)| *a += scale * b);
        Ok(())
    }

    pub fn scaled(&self, scale: f64) -> Tensor {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|x| x * scale).collect(),
        }
    }

    pub fn max_abs_diff(&self, other: &Tensor) -> Option<f64> {
        (self.shape == other.shape).then(|| {
            self.data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        })
    }

    /// Contract mode `mode` with a `rows x cols` matrix whose row count equals
    /// the mode's dimension. The mode's dimension becomes `cols`.
    pub fn mode_product(&self, mode: usize, matrix: &[Vec<f64>]) -> Result<Tensor> {
        if mode >= self.order() {
            return Err(Error::InvalidAxes(format!(
                "mode {mode} out of range for order {}",
                self.order()
            )));
        }
        let rows = self.shape[mode];
        if matrix.len() != rows {
            return Err(Error::ShapeMismatch(format!(
                "matrix has {} rows, mode {mode} has dimension {rows}",
                matrix.len()
            )));
        }
        let cols = matrix.first().map_or(0, Vec::len);
        if cols == 0 || matrix.iter().any(|r| r.len() != cols) {
            return Err(Error::ShapeMismatch("ragged or empty matrix".into()));
        }
        let outer: usize = self.shape[..mode].iter().product();
        let inner: usize = self.shape[mode + 1..].iter().product();
        let mut out = vec![0.0; outer * cols * inner];
        for o in 0..outer {
            for r in 0..rows {
                let src = &self.data[(o * rows + r) * inner..(o * rows + r + 1) * inner];
                for (c, &w) in matrix[r].iter().enumerate() {
                    if w == 0.0 {
                        continue;
                    }
                    let dst = &mut out[(o * cols + c) * inner..(o * cols + c + 1) * inner];
                    dst.iter_mut().zip(src).for_each(|(d, s)| *d += w * s);
                }
            }
        }
        let mut shape = self.shape.clone();
        shape[mode] = cols;
        Ok(Tensor { shape, data: out })
    }
}

pub(crate) fn checked_volume(shape: &[usize]) -> Option<usize> {
    shape.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d))
}

pub(crate) fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1; shape.len()];
    for k in (0..shape.len().saturating_sub(1)).rev() {
        s[k] = s[k + 1] * shape[k + 1];
    }
    s
}

/// Kronecker product of two flat vectors (row-major outer product).
pub(crate) fn kron(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(a.len() * b.len());
    for &x in a {
        out.extend(b.iter().map(|&y| x * y));
    }
    out
}

/// Outer product of a list of vectors; entry `(d_1..d_N)` is `prod_i v_i[d_i]`.
pub fn outer_product<V: AsRef<[f64]>>(factors: &[V]) -> Result<Tensor> {
    if factors.is_empty() {
        return Err(Error::EmptyFactors);
    }
    let mut shape = Vec::with_capacity(factors.len());
    let mut data = vec![1.0];
    for f in factors {
        let f = f.as_ref();
        if f.is_empty() {
            return Err(Error::EmptyVector);
        }
        shape.push(f.len());
        data = kron(&data, f);
    }
    Tensor::new(shape, data)
}

/// True iff every entry is `>= -tol` and the sum is within `tol` of one.
pub fn validate_simplex(v: &[f64], tol: f64) -> bool {
    !v.is_empty()
        && v.iter().all(|x| x.is_finite() && *x >= -tol)
        && (v.iter().sum::<f64>() - 1.0).abs() <= tol
}

/// Whether factor vectors must be probability vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mode {
    #[default]
    Unconstrained,
    Probabilistic,
}

fn check_vector(v: &[f64], len: usize, mode: Mode, what: impl Fn() -> alloc::string::String) -> Result<()> {
    if v.len() != len {
        return Err(Error::RankMismatch(format!(
            "{} has length {}, expected {len}",
            what(),
            v.len()
        )));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("factor vector"));
    }
    if mode == Mode::Probabilistic && !validate_simplex(v, STRUCTURE_TOL) {
        return Err(Error::NotSimplex(what()));
    }
    Ok(())
}

/// Rank-`Z` CP factors: `A = sum_z top[z] * v[z][0] (x) ... (x) v[z][N-1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CpFactors {
    mode: Mode,
    leaf_dim: usize,
    top: Vec<f64>,
    vectors: Vec<Vec<Vec<f64>>>,
}

impl CpFactors {
    /// `vectors[z][i]` is the mode-`i` factor of the `z`-th rank-1 term.
    pub fn new(mode: Mode, top: Vec<f64>, vectors: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        let rank = top.len();
        if rank == 0 {
            return Err(Error::EmptyFactors);
        }
        if vectors.len() != rank {
            return Err(Error::RankMismatch(format!(
                "{} rank-1 terms for {rank} top weights",
                vectors.len()
            )));
        }
        let order = vectors[0].len();
        if order == 0 {
            return Err(Error::EmptyFactors);
        }
        let leaf_dim = vectors[0][0].len();
        if leaf_dim == 0 {
            return Err(Error::EmptyVector);
        }
        check_vector(&top, rank, mode, || "CP top weights".into())?;
        for (z, term) in vectors.iter().enumerate() {
            if term.len() != order {
                return Err(Error::RankMismatch(format!(
                    "term {z} has {} factors, expected {order}",
                    term.len()
                )));
            }
            for (i, v) in term.iter().enumerate() {
                check_vector(v, leaf_dim, mode, || format!("CP factor a^({z},{i})"))?;
            }
        }
        Ok(Self {
            mode,
            leaf_dim,
            top,
            vectors,
        })
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn rank(&self) -> usize {
        self.top.len()
    }

    pub fn order(&self) -> usize {
        self.vectors[0].len()
    }

    pub fn leaf_dim(&self) -> usize {
        self.leaf_dim
    }

    pub fn top(&self) -> &[f64] {
        &self.top
    }

    pub fn vectors(&self) -> &[Vec<Vec<f64>>] {
        &self.vectors
    }

    pub fn vector(&self, z: usize, i: usize) -> &[f64] {
        &self.vectors[z][i]
    }

    /// Concatenate the rank-1 terms of two decompositions of the same shape.
    pub fn concat(&self, other: &CpFactors) -> Result<CpFactors> {
        if self.order() != other.order() || self.leaf_dim != other.leaf_dim {
            return Err(Error::ShapeMismatch("CP factors of different shapes".into()));
        }
        let mut top = self.top.clone();
        top.extend_from_slice(&other.top);
        let mut vectors = self.vectors.clone();
        vectors.extend_from_slice(&other.vectors);
        CpFactors::new(Mode::Unconstrained, top, vectors)
    }
}

/// `A_{d1..dN} = sum_z a_z prod_i a^{z,i}_{d_i}`, shape `M^N`.
pub fn cp_reconstruct(f: &CpFactors) -> Tensor {
    let shape = vec![f.leaf_dim; f.order()];
    let mut acc = vec![0.0; checked_volume(&shape).expect("CP volume overflow")];
    for (weight, term) in f.top.iter().zip(&f.vectors) {
        let rank1 = term
            .iter()
            .fold(vec![1.0], |acc, v| kron(&acc, v));
        acc.iter_mut().zip(rank1).for_each(|(a, r)| *a += weight * r);
    }
    Tensor { shape, data: acc }
}

/// Hierarchical Tucker factors over a complete binary tree with `N = 2^L`
/// leaves.
///
/// `weights[l][j][gamma]` is the vector `a^{l,j,gamma}`: level `l` in
/// `0..L`, node `j` in `0..N/2^l`, channel `gamma` in `0..r_l`, each of
/// length `r_{l-1}` (`M` at level 0). `top` has length `r_{L-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct HtFactors {
    mode: Mode,
    leaf_dim: usize,
    ranks: Vec<usize>,
    weights: Vec<Vec<Vec<Vec<f64>>>>,
    top: Vec<f64>,
}

impl HtFactors {
    pub fn new(
        mode: Mode,
        leaf_dim: usize,
        ranks: Vec<usize>,
        weights: Vec<Vec<Vec<Vec<f64>>>>,
        top: Vec<f64>,
    ) -> Result<Self> {
        let depth = ranks.len();
        if depth == 0 {
            return Err(Error::RankMismatch("at least one level is required".into()));
        }
        if leaf_dim == 0 || ranks.contains(&0) {
            return Err(Error::RankMismatch("ranks and leaf dimension must be positive".into()));
        }
        let n = weights.first().map_or(0, Vec::len);
        if n == 0 || !n.is_power_of_two() {
            return Err(Error::NotPowerOfTwo(n));
        }
        if n.trailing_zeros() as usize != depth {
            return Err(Error::RankMismatch(format!(
                "{n} leaves imply depth {}, but {depth} ranks were given",
                n.trailing_zeros()
            )));
        }
        if weights.len() != depth {
            return Err(Error::RankMismatch(format!(
                "{} weight levels for depth {depth}",
                weights.len()
            )));
        }
        for (l, level) in weights.iter().enumerate() {
            if level.len() != n >> l {
                return Err(Error::RankMismatch(format!(
                    "level {l} has {} nodes, expected {}",
                    level.len(),
                    n >> l
                )));
            }
            let len = if l == 0 { leaf_dim } else { ranks[l - 1] };
            for (j, node) in level.iter().enumerate() {
                if node.len() != ranks[l] {
                    return Err(Error::RankMismatch(format!(
                        "node ({l},{j}) has {} channels, expected r_{l} = {}",
                        node.len(),
                        ranks[l]
                    )));
                }
                for (g, v) in node.iter().enumerate() {
                    check_vector(v, len, mode, || format!("HT weight a^({l},{j},{g})"))?;
                }
            }
        }
        check_vector(&top, ranks[depth - 1], mode, || "HT top vector".into())?;
        Ok(Self {
            mode,
            leaf_dim,
            ranks,
            weights,
            top,
        })
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn depth(&self) -> usize {
        self.ranks.len()
    }

    pub fn order(&self) -> usize {
        self.weights[0].len()
    }

    pub fn leaf_dim(&self) -> usize {
        self.leaf_dim
    }

    pub fn ranks(&self) -> &[usize] {
        &self.ranks
    }

    pub fn weights(&self) -> &[Vec<Vec<Vec<f64>>>] {
        &self.weights
    }

    /// The `r_l x r_{l-1}` block `[a^{l,j,gamma}]_gamma` of node `(l, j)`.
    pub fn node_weights(&self, level: usize, node: usize) -> &[Vec<f64>] {
        &self.weights[level][node]
    }

    pub fn top(&self) -> &[f64] {
        &self.top
    }
}

/// Evaluate the HT recursion
/// `phi^{l,j,g} = sum_a a^{l,j,g}_a phi^{l-1,2j-1,a} (x) phi^{l-1,2j,a}`
/// bottom-up and combine the last two nodes with the top vector.
pub fn ht_reconstruct(f: &HtFactors) -> Tensor {
    // level 0: phi^{0,j,g} = a^{0,j,g}
    let mut level: Vec<Vec<Tensor>> = f.weights[0]
        .iter()
        .map(|node| {
            node.iter()
                .map(|v| Tensor {
                    shape: vec![f.leaf_dim],
                    data: v.clone(),
                })
                .collect()
        })
        .collect();
    for l in 1..f.depth() {
        level = f.weights[l]
            .iter()
            .enumerate()
            .map(|(j, node)| {
                let (left, right) = (&level[2 * j], &level[2 * j + 1]);
                node.iter()
                    .map(|w| combine(w, left, right))
                    .collect()
            })
            .collect();
    }
    combine(&f.top, &level[0], &level[1])
}

fn combine(w: &[f64], left: &[Tensor], right: &[Tensor]) -> Tensor {
    let mut shape = left[0].shape.clone();
    shape.extend_from_slice(&right[0].shape);
    let mut acc = vec![0.0; left[0].len() * right[0].len()];
    for (alpha, &wa) in w.iter().enumerate() {
        if wa == 0.0 {
            continue;
        }
        let prod = kron(&left[alpha].data, &right[alpha].data);
        acc.iter_mut().zip(prod).for_each(|(a, p)| *a += wa * p);
    }
    Tensor { shape, data: acc }
}
