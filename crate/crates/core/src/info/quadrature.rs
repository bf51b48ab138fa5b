//! Adaptive Gauss-Kronrod (7, 15) quadrature with interval bisection.

use alloc::vec::Vec;

use crate::{Error, Result};

/// Default absolute error target.
pub const DEFAULT_TOL: f64 = 1e-6;

const MAX_INTERVALS: usize = 50_000;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];

// Gauss weights for the even-indexed Kronrod nodes 1, 3, 5, 7.
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// A quadrature value with its estimated absolute error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub abs_error: f64,
}

impl core::ops::Add for Integral {
    type Output = Integral;
    fn add(self, rhs: Integral) -> Integral {
        Integral {
            value: self.value + rhs.value,
            abs_error: self.abs_error + rhs.abs_error,
        }
    }
}

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for k in 0..7 {
        let dx = h * XGK[k];
        let s = f(c - dx) + f(c + dx);
        kronrod += WGK[k] * s;
        if k % 2 == 1 {
            gauss += WG[k / 2] * s;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

/// Integrate `f` over `[a, b]`, splitting first at the given interior
/// breakpoints, to an absolute error target `tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, breakpoints: &[f64], tol: f64) -> Result<Integral> {
    if !(a.is_finite() && b.is_finite()) || b < a {
        return Err(Error::InvalidDensity("integration bounds must be finite and ordered".into()));
    }
    if a == b {
        return Ok(Integral {
            value: 0.0,
            abs_error: 0.0,
        });
    }
    let width = b - a;
    let mut cuts: Vec<f64> = breakpoints
        .iter()
        .copied()
        .filter(|&x| x > a && x < b)
        .collect();
    cuts.sort_by(f64::total_cmp);
    let mut stack: Vec<(f64, f64)> = Vec::with_capacity(cuts.len() + 1);
    let mut lo = a;
    for &c in &cuts {
        stack.push((lo, c));
        lo = c;
    }
    stack.push((lo, b));

    let mut value = 0.0;
    let mut error = 0.0;
    let mut processed = 0usize;
    while let Some((x0, x1)) = stack.pop() {
        processed += 1;
        let (v, e) = gk15(&f, x0, x1);
        if !v.is_finite() {
            return Err(Error::QuadratureDiverged { error: f64::INFINITY });
        }
        let local_tol = tol * (x1 - x0) / width;
        let mid = 0.5 * (x0 + x1);
        if e <= local_tol || mid <= x0 || mid >= x1 {
            value += v;
            error += e;
            continue;
        }
        if processed + stack.len() > MAX_INTERVALS {
            return Err(Error::QuadratureDiverged { error: error + e });
        }
        stack.push((x0, mid));
        stack.push((mid, x1));
    }
    if error > tol {
        return Err(Error::QuadratureDiverged { error });
    }
    Ok(Integral {
        value,
        abs_error: error,
    })
}
