use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::math;
use crate::tensor::{self, Tensor};
use crate::{Error, Result};

/// Mass tolerance for distributions.
pub const MASS_TOL: f64 = 1e-10;

/// Logarithm base for reported entropies. Computation is always in nats.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LogBase {
    #[default]
    Nats,
    Bits,
}

impl LogBase {
    pub fn from_nats(self, nats: f64) -> f64 {
        match self {
            LogBase::Nats => nats,
            LogBase::Bits => nats / math::LN_2,
        }
    }

    pub fn unit(self) -> &'static str {
        match self {
            LogBase::Nats => "nats",
            LogBase::Bits => "bits",
        }
    }
}

fn check_pmf(p: &[f64]) -> Result<()> {
    if p.is_empty() {
        return Err(Error::InvalidPmf("empty".into()));
    }
    if let Some(x) = p.iter().find(|x| !x.is_finite() || **x < 0.0) {
        return Err(Error::InvalidPmf(format!("entry {x} is negative or non-finite")));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > MASS_TOL {
        return Err(Error::InvalidPmf(format!("total mass {total}")));
    }
    Ok(())
}

/// `-sum p ln p` over a raw slice, with `0 ln 0 = 0`.
pub fn shannon_nats(p: &[f64]) -> f64 {
    let h = -p.iter().map(|&x| math::xlnx(x)).sum::<f64>();
    // -0.0 and sub-ulp negatives from rounding
    if h < 0.0 {
        0.0
    } else {
        h
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDist {
    pmf: Vec<f64>,
}

impl DiscreteDist {
    pub fn new(pmf: Vec<f64>) -> Result<Self> {
        check_pmf(&pmf)?;
        Ok(Self { pmf })
    }

    pub fn uniform(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidPmf("empty".into()));
        }
        Ok(Self {
            pmf: vec![1.0 / k as f64; k],
        })
    }

    pub fn point_mass(k: usize, at: usize) -> Result<Self> {
        if at >= k {
            return Err(Error::InvalidPmf(format!("point {at} outside support of size {k}")));
        }
        let mut pmf = vec![0.0; k];
        pmf[at] = 1.0;
        Ok(Self { pmf })
    }

    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    pub fn len(&self) -> usize {
        self.pmf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pmf.is_empty()
    }

    pub fn prob(&self, i: usize) -> f64 {
        self.pmf[i]
    }

    pub fn into_pmf(self) -> Vec<f64> {
        self.pmf
    }
}

pub fn entropy(d: &DiscreteDist, base: LogBase) -> f64 {
    base.from_nats(shannon_nats(&d.pmf))
}

/// Joint distribution over several finite variables, one tensor mode each.
#[derive(Debug, Clone, PartialEq)]
pub struct JointDist {
    pmf: Tensor,
}

impl JointDist {
    pub fn new(pmf: Tensor) -> Result<Self> {
        check_pmf(pmf.data())?;
        Ok(Self { pmf })
    }

    pub fn from_dist(d: &DiscreteDist) -> Self {
        Self {
            pmf: Tensor::new(vec![d.len()], d.pmf.clone()).expect("valid dist has a valid shape"),
        }
    }

    pub fn shape(&self) -> &[usize] {
        self.pmf.shape()
    }

    pub fn tensor(&self) -> &Tensor {
        &self.pmf
    }

    pub fn pmf(&self) -> &[f64] {
        self.pmf.data()
    }

    pub fn flatten(&self) -> DiscreteDist {
        DiscreteDist {
            pmf: self.pmf.data().to_vec(),
        }
    }

    /// Split the axes into `given` (the conditioning variable) and the rest,
    /// returning `p(rest | given)` as a family weighted by `p(given)`.
    ///
    /// Members for zero-probability conditions are uniform; they carry zero
    /// weight.
    pub fn condition_on(&self, given: &[usize]) -> Result<ConditionalFamily> {
        let given = normalize_axes(given, self.shape().len())?;
        let rest: Vec<usize> = (0..self.shape().len())
            .filter(|a| !given.contains(a))
            .collect();
        if rest.is_empty() {
            return Err(Error::InvalidAxes("cannot condition on every axis".into()));
        }
        let g_shape: Vec<usize> = given.iter().map(|&a| self.shape()[a]).collect();
        let r_shape: Vec<usize> = rest.iter().map(|&a| self.shape()[a]).collect();
        let g_len: usize = g_shape.iter().product();
        let r_len: usize = r_shape.iter().product();
        let mut table = vec![vec![0.0; r_len]; g_len];
        for_each_index(self.shape(), |lin, idx| {
            let g = sub_linear(idx, &given, self.shape());
            let r = sub_linear(idx, &rest, self.shape());
            table[g][r] += self.pmf.data()[lin];
        });
        let mut prior = Vec::with_capacity(g_len);
        let mut members = Vec::with_capacity(g_len);
        for row in table {
            let mass: f64 = row.iter().sum();
            prior.push(mass);
            let data = if mass > 0.0 {
                row.iter().map(|x| x / mass).collect()
            } else {
                vec![1.0 / r_len as f64; r_len]
            };
            members.push(JointDist {
                pmf: Tensor::new(r_shape.clone(), data)?,
            });
        }
        ConditionalFamily::new(DiscreteDist::new(prior)?, members)
    }
}

pub fn joint_entropy(j: &JointDist) -> f64 {
    shannon_nats(j.pmf())
}

/// A prior over condition values together with one distribution per value.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalFamily {
    prior: DiscreteDist,
    members: Vec<JointDist>,
}

impl ConditionalFamily {
    pub fn new(prior: DiscreteDist, members: Vec<JointDist>) -> Result<Self> {
        if members.len() != prior.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} members for a prior over {} values",
                members.len(),
                prior.len()
            )));
        }
        if let Some(m) = members.iter().find(|m| m.shape() != members[0].shape()) {
            return Err(Error::ShapeMismatch(format!(
                "member shape {:?} differs from {:?}",
                m.shape(),
                members[0].shape()
            )));
        }
        Ok(Self { prior, members })
    }

    pub fn prior(&self) -> &DiscreteDist {
        &self.prior
    }

    pub fn members(&self) -> &[JointDist] {
        &self.members
    }

    pub fn member_shape(&self) -> &[usize] {
        self.members[0].shape()
    }

    /// The prior-weighted mixture `sum_j p(j) member_j`.
    pub fn mixture(&self) -> JointDist {
        let shape = self.member_shape().to_vec();
        let mut acc = vec![0.0; self.members[0].pmf().len()];
        for (w, m) in self.prior.pmf.iter().zip(&self.members) {
            acc.iter_mut().zip(m.pmf()).for_each(|(a, p)| *a += w * p);
        }
        JointDist {
            pmf: Tensor::new(shape, acc).expect("mixture keeps member shape"),
        }
    }
}

/// `H(X | d) = sum_j p(d = j) H(X | d = j)`.
pub fn conditional_entropy(f: &ConditionalFamily) -> f64 {
    f.prior
        .pmf
        .iter()
        .zip(&f.members)
        .map(|(&w, m)| if w > 0.0 { w * joint_entropy(m) } else { 0.0 })
        .sum()
}

fn normalize_axes(axes: &[usize], order: usize) -> Result<Vec<usize>> {
    if axes.is_empty() {
        return Err(Error::InvalidAxes("empty axis set".into()));
    }
    let mut v = axes.to_vec();
    v.sort_unstable();
    v.dedup();
    if v.len() != axes.len() {
        return Err(Error::InvalidAxes(format!("duplicate axes in {axes:?}")));
    }
    if let Some(&a) = v.iter().find(|&&a| a >= order) {
        return Err(Error::InvalidAxes(format!("axis {a} out of range for order {order}")));
    }
    Ok(v)
}

fn for_each_index(shape: &[usize], mut f: impl FnMut(usize, &[usize])) {
    let total: usize = shape.iter().product();
    let mut idx = vec![0usize; shape.len()];
    for lin in 0..total {
        f(lin, &idx);
        for k in (0..shape.len()).rev() {
            idx[k] += 1;
            if idx[k] < shape[k] {
                break;
            }
            idx[k] = 0;
        }
    }
}

fn sub_linear(idx: &[usize], axes: &[usize], shape: &[usize]) -> usize {
    axes.iter().fold(0, |acc, &a| acc * shape[a] + idx[a])
}

/// Sum out every axis not in `keep_axes`. Kept axes appear in increasing
/// order.
pub fn marginalize(j: &JointDist, keep_axes: &[usize]) -> Result<JointDist> {
    let keep = normalize_axes(keep_axes, j.shape().len())?;
    let shape: Vec<usize> = keep.iter().map(|&a| j.shape()[a]).collect();
    let mut acc = vec![0.0; shape.iter().product()];
    for_each_index(j.shape(), |lin, idx| {
        acc[sub_linear(idx, &keep, j.shape())] += j.pmf()[lin];
    });
    JointDist::new(Tensor::new(shape, acc)?)
}

/// `I(X;Y) = sum p(x,y) ln(p(x,y) / (p(x) p(y)))` where `X` is the group of
/// `x_axes` and `Y` the remaining axes.
pub fn mutual_information(j: &JointDist, x_axes: &[usize]) -> Result<f64> {
    let x_axes = normalize_axes(x_axes, j.shape().len())?;
    let y_axes: Vec<usize> = (0..j.shape().len())
        .filter(|a| !x_axes.contains(a))
        .collect();
    if y_axes.is_empty() {
        return Err(Error::InvalidAxes("Y must contain at least one axis".into()));
    }
    let px = marginalize(j, &x_axes)?;
    let py = marginalize(j, &y_axes)?;
    let mut mi = 0.0;
    for_each_index(j.shape(), |lin, idx| {
        let p = j.pmf()[lin];
        if p > 0.0 {
            let a = px.pmf()[sub_linear(idx, &x_axes, j.shape())];
            let b = py.pmf()[sub_linear(idx, &y_axes, j.shape())];
            mi += p * math::ln(p / (a * b));
        }
    });
    Ok(mi)
}

/// `I(X;Y) = H(X) - H(X|Y)`, computed through marginal and conditional
/// entropies rather than the log-ratio sum.
pub fn mutual_information_by_entropies(j: &JointDist, x_axes: &[usize]) -> Result<f64> {
    let x = normalize_axes(x_axes, j.shape().len())?;
    let y: Vec<usize> = (0..j.shape().len()).filter(|a| !x.contains(a)).collect();
    if y.is_empty() {
        return Err(Error::InvalidAxes("Y must contain at least one axis".into()));
    }
    let hx = joint_entropy(&marginalize(j, &x)?);
    let hx_given_y = conditional_entropy(&j.condition_on(&y)?);
    Ok(hx - hx_given_y)
}

/// Independent joint of the given factors, one axis each.
pub fn product_joint(factors: &[DiscreteDist]) -> Result<JointDist> {
    let t = tensor::outer_product(&factors.iter().map(|f| f.pmf()).collect::<Vec<_>>())?;
    JointDist::new(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn joint(shape: &[usize], data: &[f64]) -> JointDist {
        JointDist::new(Tensor::new(shape.to_vec(), data.to_vec()).unwrap()).unwrap()
    }

    #[test]
    fn entropy_examples() {
        let d = DiscreteDist::new(vec![1.0, 0.0, 0.0]).unwrap();
        assert_eq!(entropy(&d, LogBase::Nats), 0.0);
        let u = DiscreteDist::uniform(4).unwrap();
        assert!(close(entropy(&u, LogBase::Nats), 1.386_294_361_119_89, 1e-12));
        let d = DiscreteDist::new(vec![0.5, 0.25, 0.25]).unwrap();
        assert!(close(entropy(&d, LogBase::Bits), 1.5, 1e-12));
    }

    #[test]
    fn zero_log_zero_is_zero() {
        assert_eq!(math::xlnx(0.0), 0.0);
        assert_eq!(shannon_nats(&[0.0, 1.0]), 0.0);
        let with_zero = DiscreteDist::new(vec![0.5, 0.0, 0.5]).unwrap();
        let without = DiscreteDist::new(vec![0.5, 0.5]).unwrap();
        assert_eq!(entropy(&with_zero, LogBase::Nats), entropy(&without, LogBase::Nats));
    }

    #[test]
    fn invalid_pmfs_are_rejected() {
        assert!(DiscreteDist::new(vec![]).is_err());
        assert!(DiscreteDist::new(vec![0.6, 0.6]).is_err());
        assert!(DiscreteDist::new(vec![1.1, -0.1]).is_err());
        assert!(DiscreteDist::new(vec![f64::NAN, 1.0]).is_err());
        assert!(JointDist::new(Tensor::new(vec![2], vec![0.2, 0.2]).unwrap()).is_err());
    }

    #[test]
    fn joint_entropy_examples() {
        let coins = joint(&[2, 2], &[0.25; 4]);
        assert!(close(joint_entropy(&coins), 2.0 * math::LN_2, 1e-12));
        let diag = joint(&[2, 2], &[0.5, 0.0, 0.0, 0.5]);
        assert!(close(joint_entropy(&diag), math::LN_2, 1e-12));
    }

    #[test]
    fn conditional_entropy_examples() {
        let m = DiscreteDist::new(vec![0.2, 0.8]).unwrap();
        let fam = ConditionalFamily::new(
            DiscreteDist::new(vec![0.3, 0.7]).unwrap(),
            vec![JointDist::from_dist(&m), JointDist::from_dist(&m)],
        )
        .unwrap();
        assert!(close(conditional_entropy(&fam), entropy(&m, LogBase::Nats), 1e-15));

        let fam = ConditionalFamily::new(
            DiscreteDist::uniform(2).unwrap(),
            vec![
                JointDist::from_dist(&DiscreteDist::point_mass(2, 0).unwrap()),
                JointDist::from_dist(&DiscreteDist::point_mass(2, 1).unwrap()),
            ],
        )
        .unwrap();
        assert_eq!(conditional_entropy(&fam), 0.0);

        let fam = ConditionalFamily::new(
            DiscreteDist::uniform(2).unwrap(),
            vec![
                JointDist::from_dist(&DiscreteDist::new(vec![1.0, 0.0]).unwrap()),
                JointDist::from_dist(&DiscreteDist::uniform(2).unwrap()),
            ],
        )
        .unwrap();
        assert!(close(conditional_entropy(&fam), 0.346573590279973, 1e-12));
    }

    #[test]
    fn family_shape_mismatch() {
        let r = ConditionalFamily::new(
            DiscreteDist::uniform(2).unwrap(),
            vec![
                JointDist::from_dist(&DiscreteDist::uniform(2).unwrap()),
                JointDist::from_dist(&DiscreteDist::uniform(3).unwrap()),
            ],
        );
        assert!(matches!(r, Err(Error::ShapeMismatch(_))));
        let r = ConditionalFamily::new(
            DiscreteDist::uniform(3).unwrap(),
            vec![JointDist::from_dist(&DiscreteDist::uniform(2).unwrap())],
        );
        assert!(r.is_err());
    }

    #[test]
    fn mutual_information_examples() {
        let coins = joint(&[2, 2], &[0.25; 4]);
        assert!(mutual_information(&coins, &[0]).unwrap().abs() < 1e-15);
        let diag = joint(&[2, 2], &[0.5, 0.0, 0.0, 0.5]);
        assert!(close(mutual_information(&diag, &[0]).unwrap(), math::LN_2, 1e-12));
        assert!(close(
            mutual_information_by_entropies(&diag, &[0]).unwrap(),
            math::LN_2,
            1e-12
        ));
        assert!(mutual_information(&diag, &[0, 1]).is_err());
    }

    #[test]
    fn marginalize_examples() {
        let a = DiscreteDist::new(vec![0.2, 0.3, 0.5]).unwrap();
        let b = DiscreteDist::new(vec![0.9, 0.1]).unwrap();
        let j = product_joint(&[a.clone(), b.clone()]).unwrap();
        let ma = marginalize(&j, &[0]).unwrap();
        assert!(ma.pmf().iter().zip(a.pmf()).all(|(x, y)| close(*x, *y, 1e-15)));
        let mb = marginalize(&j, &[1]).unwrap();
        assert!(mb.pmf().iter().zip(b.pmf()).all(|(x, y)| close(*x, *y, 1e-15)));

        let diag = joint(&[2, 2], &[0.5, 0.0, 0.0, 0.5]);
        assert_eq!(marginalize(&diag, &[1]).unwrap().pmf(), &[0.5, 0.5]);

        assert!(marginalize(&diag, &[]).is_err());
        assert!(marginalize(&diag, &[2]).is_err());
        assert!(marginalize(&diag, &[0, 0]).is_err());
    }

    #[test]
    fn marginalize_keeps_axis_order() {
        let data: Vec<f64> = (1..=8).map(|x| x as f64 / 36.0).collect();
        let j = joint(&[2, 2, 2], &data);
        let m = marginalize(&j, &[2, 0]).unwrap();
        // axes (0, 2): sum over axis 1
        let expected = [1.0 + 3.0, 2.0 + 4.0, 5.0 + 7.0, 6.0 + 8.0].map(|x| x / 36.0);
        for (x, y) in m.pmf().iter().zip(expected) {
            assert!(close(*x, y, 1e-15));
        }
    }

    #[test]
    fn product_joint_examples() {
        let coin = DiscreteDist::uniform(2).unwrap();
        let j = product_joint(&[coin.clone(), coin.clone()]).unwrap();
        assert!(close(joint_entropy(&j), 2.0 * math::LN_2, 1e-12));
        let d = DiscreteDist::new(vec![0.1, 0.2, 0.7]).unwrap();
        let j = product_joint(core::slice::from_ref(&d)).unwrap();
        assert_eq!(joint_entropy(&j), entropy(&d, LogBase::Nats));
        assert!(product_joint(&[]).is_err());
    }

    #[test]
    fn condition_on_recovers_conditionals() {
        let j = joint(&[2, 2], &[0.1, 0.3, 0.2, 0.4]);
        let fam = j.condition_on(&[0]).unwrap();
        assert!(close(fam.prior().prob(0), 0.4, 1e-15));
        assert!(close(fam.members()[0].pmf()[1], 0.75, 1e-15));
        let mix = fam.mixture();
        assert!(close(mix.pmf()[0], 0.3, 1e-15));
    }
}
