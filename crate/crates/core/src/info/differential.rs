//! Differential entropy of one-dimensional densities and its change under
//! strictly monotone maps: `h(g(X)) = h(X) + E[ln |g'(X)|]`.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use super::quadrature::{self, Integral, DEFAULT_TOL};
use crate::math;
use crate::{Error, Result};

/// Default truncation of unbounded supports, in standard deviations.
pub const DEFAULT_TRUNCATION_SDS: f64 = 10.0;
/// Tail mass an explicit truncation may leave behind.
pub const MAX_TRUNCATION_MASS: f64 = 1e-9;
/// Tail mass the automatic truncation aims for.
const AUTO_TRUNCATION_MASS: f64 = 1e-10;
/// Tolerance on the normalisation check performed at construction.
pub const NORMALIZATION_TOL: f64 = 1e-6;

const SQRT_2: f64 = core::f64::consts::SQRT_2;
const SQRT_2PI: f64 = 2.506_628_274_631_000_5;

pub type PdfFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixtureComponent {
    pub weight: f64,
    pub mean: f64,
    pub sd: f64,
}

#[derive(Clone)]
pub enum Family {
    Uniform { lo: f64, hi: f64 },
    Normal { mean: f64, sd: f64 },
    Laplace { loc: f64, scale: f64 },
    Exponential { rate: f64 },
    GaussianMixture(Vec<MixtureComponent>),
    Custom { name: String, lo: f64, hi: f64, pdf: PdfFn },
}

impl fmt::Debug for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::Uniform { lo, hi } => write!(f, "Uniform({lo}, {hi})"),
            Family::Normal { mean, sd } => write!(f, "Normal({mean}, {sd})"),
            Family::Laplace { loc, scale } => write!(f, "Laplace({loc}, {scale})"),
            Family::Exponential { rate } => write!(f, "Exponential({rate})"),
            Family::GaussianMixture(c) => write!(f, "GaussianMixture({c:?})"),
            Family::Custom { name, lo, hi, .. } => write!(f, "Custom({name}, [{lo}, {hi}])"),
        }
    }
}

fn normal_pdf(x: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    math::exp(-0.5 * z * z) / (sd * SQRT_2PI)
}

/// Mass of `N(mean, sd)` below `lo` plus mass above `hi`.
fn normal_tails(lo: f64, hi: f64, mean: f64, sd: f64) -> f64 {
    let below = 0.5 * math::erfc((mean - lo) / (sd * SQRT_2));
    let above = 0.5 * math::erfc((hi - mean) / (sd * SQRT_2));
    below + above
}

impl Family {
    pub fn name(&self) -> &str {
        match self {
            Family::Uniform { .. } => "uniform",
            Family::Normal { .. } => "normal",
            Family::Laplace { .. } => "laplace",
            Family::Exponential { .. } => "exponential",
            Family::GaussianMixture(_) => "gaussian_mixture",
            Family::Custom { name, .. } => name,
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidDensity(msg));
        match self {
            Family::Uniform { lo, hi } | Family::Custom { lo, hi, .. } => {
                if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                    return bad(format!("support [{lo}, {hi}] must be finite with lo < hi"));
                }
            }
            Family::Normal { mean, sd } => {
                if !(mean.is_finite() && sd.is_finite() && *sd > 0.0) {
                    return bad(format!("normal needs finite mean and sd > 0, got ({mean}, {sd})"));
                }
            }
            Family::Laplace { loc, scale } => {
                if !(loc.is_finite() && scale.is_finite() && *scale > 0.0) {
                    return bad(format!("laplace needs finite loc and scale > 0, got ({loc}, {scale})"));
                }
            }
            Family::Exponential { rate } => {
                if !(rate.is_finite() && *rate > 0.0) {
                    return bad(format!("exponential needs rate > 0, got {rate}"));
                }
            }
            Family::GaussianMixture(cs) => {
                if cs.is_empty() {
                    return bad("mixture needs at least one component".into());
                }
                let total: f64 = cs.iter().map(|c| c.weight).sum();
                if cs.iter().any(|c| !(c.weight >= 0.0 && c.sd > 0.0 && c.mean.is_finite() && c.sd.is_finite()))
                    || (total - 1.0).abs() > 1e-12
                {
                    return bad("mixture weights must be a probability vector and sds positive".into());
                }
            }
        }
        Ok(())
    }

    fn raw_pdf(&self, x: f64) -> f64 {
        match self {
            Family::Uniform { lo, hi } => {
                if x >= *lo && x <= *hi {
                    1.0 / (hi - lo)
                } else {
                    0.0
                }
            }
            Family::Normal { mean, sd } => normal_pdf(x, *mean, *sd),
            Family::Laplace { loc, scale } => math::exp(-(x - loc).abs() / scale) / (2.0 * scale),
            Family::Exponential { rate } => {
                if x >= 0.0 {
                    rate * math::exp(-rate * x)
                } else {
                    0.0
                }
            }
            Family::GaussianMixture(cs) => cs
                .iter()
                .map(|c| c.weight * normal_pdf(x, c.mean, c.sd))
                .sum(),
            Family::Custom { pdf, .. } => pdf(x),
        }
    }

    fn is_bounded(&self) -> bool {
        matches!(self, Family::Uniform { .. } | Family::Custom { .. })
    }

    /// Support truncated at `k` standard deviations (per component for
    /// mixtures); bounded families ignore `k`.
    fn bounds(&self, k: f64) -> (f64, f64) {
        match self {
            Family::Uniform { lo, hi } | Family::Custom { lo, hi, .. } => (*lo, *hi),
            Family::Normal { mean, sd } => (mean - k * sd, mean + k * sd),
            Family::Laplace { loc, scale } => {
                let sd = scale * SQRT_2;
                (loc - k * sd, loc + k * sd)
            }
            Family::Exponential { rate } => (0.0, k / rate),
            Family::GaussianMixture(cs) => cs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), c| {
                (lo.min(c.mean - k * c.sd), hi.max(c.mean + k * c.sd))
            }),
        }
    }

    /// Probability mass outside `[lo, hi]`, in closed form.
    fn tail_mass(&self, lo: f64, hi: f64) -> f64 {
        match self {
            Family::Uniform { .. } | Family::Custom { .. } => 0.0,
            Family::Normal { mean, sd } => normal_tails(lo, hi, *mean, *sd),
            Family::Laplace { loc, scale } => {
                0.5 * math::exp(-(loc - lo).max(0.0) / scale) + 0.5 * math::exp(-(hi - loc).max(0.0) / scale)
            }
            Family::Exponential { rate } => math::exp(-rate * hi),
            Family::GaussianMixture(cs) => cs
                .iter()
                .map(|c| c.weight * normal_tails(lo, hi, c.mean, c.sd))
                .sum(),
        }
    }

    fn breakpoints(&self) -> Vec<f64> {
        match self {
            Family::Laplace { loc, .. } => vec![*loc],
            Family::Normal { mean, .. } => vec![*mean],
            Family::GaussianMixture(cs) => cs.iter().map(|c| c.mean).collect(),
            _ => Vec::new(),
        }
    }
}

/// A one-dimensional density on a finite (possibly truncated) support.
#[derive(Debug, Clone)]
pub struct DensitySpec {
    family: Family,
    lo: f64,
    hi: f64,
    truncation_sds: Option<f64>,
    tail_mass: f64,
}

impl DensitySpec {
    /// Build with the default truncation: `DEFAULT_TRUNCATION_SDS`, widened
    /// in steps of five standard deviations until the tail mass is below
    /// `1e-10`.
    pub fn new(family: Family) -> Result<Self> {
        family.validate()?;
        if family.is_bounded() {
            return Self::finish(family, None);
        }
        let mut k = DEFAULT_TRUNCATION_SDS;
        loop {
            let (lo, hi) = family.bounds(k);
            if family.tail_mass(lo, hi) < AUTO_TRUNCATION_MASS || k > 200.0 {
                break;
            }
            k += 5.0;
        }
        Self::finish(family, Some(k))
    }

    /// Build with an explicit truncation at `sds` standard deviations; the
    /// discarded tail mass must stay below `1e-9`.
    pub fn truncated(family: Family, sds: f64) -> Result<Self> {
        family.validate()?;
        if !(sds.is_finite() && sds > 0.0) {
            return Err(Error::InvalidDensity(format!("truncation must be positive, got {sds}")));
        }
        if family.is_bounded() {
            return Self::finish(family, None);
        }
        Self::finish(family, Some(sds))
    }

    fn finish(family: Family, k: Option<f64>) -> Result<Self> {
        let (lo, hi) = family.bounds(k.unwrap_or(0.0));
        let tail_mass = family.tail_mass(lo, hi);
        if tail_mass >= MAX_TRUNCATION_MASS {
            return Err(Error::TruncationMass { mass: tail_mass });
        }
        let d = Self {
            family,
            lo,
            hi,
            truncation_sds: k,
            tail_mass,
        };
        let mass = quadrature::integrate(|x| d.pdf(x), lo, hi, &d.family.breakpoints(), 1e-9)
            .map_err(|_| Error::NotNormalized { mass: f64::NAN })?
            .value;
        if !((mass - 1.0).abs() <= NORMALIZATION_TOL) {
            return Err(Error::NotNormalized { mass });
        }
        Ok(d)
    }

    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        Self::new(Family::Uniform { lo, hi })
    }

    pub fn normal(mean: f64, sd: f64) -> Result<Self> {
        Self::new(Family::Normal { mean, sd })
    }

    pub fn laplace(loc: f64, scale: f64) -> Result<Self> {
        Self::new(Family::Laplace { loc, scale })
    }

    pub fn exponential(rate: f64) -> Result<Self> {
        Self::new(Family::Exponential { rate })
    }

    pub fn gaussian_mixture(components: Vec<MixtureComponent>) -> Result<Self> {
        Self::new(Family::GaussianMixture(components))
    }

    pub fn custom(name: impl Into<String>, lo: f64, hi: f64, pdf: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Result<Self> {
        Self::new(Family::Custom {
            name: name.into(),
            lo,
            hi,
            pdf: Arc::new(pdf),
        })
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn name(&self) -> &str {
        self.family.name()
    }

    pub fn support(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn truncation_sds(&self) -> Option<f64> {
        self.truncation_sds
    }

    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    /// Density value; zero outside the (truncated) support.
    pub fn pdf(&self, x: f64) -> f64 {
        if x < self.lo || x > self.hi {
            0.0
        } else {
            self.family.raw_pdf(x).max(0.0)
        }
    }

    fn expect<F: Fn(f64) -> f64>(&self, g: F, tol: f64) -> Result<Integral> {
        quadrature::integrate(
            |x| {
                let p = self.pdf(x);
                if p > 0.0 {
                    p * g(x)
                } else {
                    0.0
                }
            },
            self.lo,
            self.hi,
            &self.family.breakpoints(),
            tol,
        )
    }
}

/// `-integral f ln f` over the support (nats; may be negative).
pub fn differential_entropy(d: &DensitySpec) -> Result<Integral> {
    differential_entropy_with_tol(d, DEFAULT_TOL)
}

pub fn differential_entropy_with_tol(d: &DensitySpec, tol: f64) -> Result<Integral> {
    let r = quadrature::integrate(|x| -math::xlnx(d.pdf(x)), d.lo, d.hi, &d.family.breakpoints(), tol)?;
    Ok(r)
}

/// `ln sigma'(x)` evaluated without overflow; `sigma'` is even in `x`.
pub fn ln_sigmoid_derivative(x: f64) -> f64 {
    let a = x.abs();
    -a - 2.0 * math::ln_1p(math::exp(-a))
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + math::exp(-x))
    } else {
        let e = math::exp(x);
        e / (1.0 + e)
    }
}

/// The entropy shift of the sigmoid map,
/// `C = -integral f(x) ln((1 + e^-x)^2 / e^-x) dx = E[ln sigma'(X)]`.
pub fn sigmoid_entropy_shift(d: &DensitySpec) -> Result<Integral> {
    d.expect(ln_sigmoid_derivative, DEFAULT_TOL)
}

/// A user-supplied strictly monotone, differentiable map.
#[derive(Clone)]
pub struct MonotoneMap {
    pub name: String,
    pub forward: PdfFn,
    pub derivative: PdfFn,
}

impl MonotoneMap {
    pub fn new(
        name: impl Into<String>,
        forward: impl Fn(f64) -> f64 + Send + Sync + 'static,
        derivative: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            forward: Arc::new(forward),
            derivative: Arc::new(derivative),
        }
    }

    /// `y = scale * x + shift`.
    pub fn affine(scale: f64, shift: f64) -> Self {
        Self::new("affine", move |x| scale * x + shift, move |_| scale)
    }
}

impl fmt::Debug for MonotoneMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "MonotoneMap({})", self.name)
    }
}

#[derive(Debug, Clone)]
pub enum Activation {
    Sigmoid,
    Relu,
    Monotone(MonotoneMap),
}

impl Activation {
    pub fn apply(&self, x: f64) -> f64 {
        match self {
            Activation::Sigmoid => sigmoid(x),
            Activation::Relu => x.max(0.0),
            Activation::Monotone(m) => (m.forward)(x),
        }
    }
}

const MONOTONE_PROBES: usize = 257;

fn check_monotone(d: &DensitySpec, derivative: &PdfFn) -> Result<()> {
    let (lo, hi) = d.support();
    let mut sign = 0.0f64;
    for k in 0..MONOTONE_PROBES {
        let x = lo + (hi - lo) * k as f64 / (MONOTONE_PROBES - 1) as f64;
        let g = derivative(x);
        if !g.is_finite() || g == 0.0 {
            return Err(Error::NonMonotone);
        }
        let s = if g > 0.0 { 1.0 } else { -1.0 };
        if sign != 0.0 && s != sign {
            return Err(Error::NonMonotone);
        }
        sign = s;
    }
    Ok(())
}

/// Differential entropy of `map(X)` by change of variables,
/// `h(Y) = h(X) + E[ln |map'(X)|]`.
///
/// ReLU is only accepted on a nonnegative support, where it is the identity
/// and `h(X)` is returned unchanged.
pub fn pushforward_entropy(d: &DensitySpec, map: &Activation) -> Result<Integral> {
    match map {
        Activation::Relu => {
            let (lo, _) = d.support();
            if lo < 0.0 {
                return Err(Error::ReluSupport { lo });
            }
            differential_entropy(d)
        }
        Activation::Sigmoid => Ok(differential_entropy(d)? + sigmoid_entropy_shift(d)?),
        Activation::Monotone(m) => {
            check_monotone(d, &m.derivative)?;
            let g = m.derivative.clone();
            let shift = d.expect(move |x| math::ln(g(x).abs()), DEFAULT_TOL)?;
            Ok(differential_entropy(d)? + shift)
        }
    }
}
