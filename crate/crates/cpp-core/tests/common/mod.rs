//! Shared helpers for integration tests: an adaptive Gauss-Kronrod
//! quadrature oracle and random-instance generators.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// 7-point Gauss nodes (positive half) and weights.
const G7_NODES: [f64; 4] = [
    0.0,
    0.405_845_151_377_397_2,
    0.741_531_185_599_394_5,
    0.949_107_912_342_758_5,
];
const G7_WEIGHTS: [f64; 4] = [
    0.417_959_183_673_469_4,
    0.381_830_050_505_118_9,
    0.279_705_391_489_276_6,
    0.129_484_966_168_869_7,
];

/// 15-point Kronrod nodes (positive half) and weights; odd entries embed G7.
const K15_NODES: [f64; 8] = [
    0.0,
    0.207_784_955_007_898_5,
    0.405_845_151_377_397_2,
    0.586_087_235_467_691_1,
    0.741_531_185_599_394_5,
    0.864_864_423_359_769_1,
    0.949_107_912_342_758_5,
    0.991_455_371_120_812_6,
];
const K15_WEIGHTS: [f64; 8] = [
    0.209_482_141_084_727_8,
    0.204_432_940_075_298_9,
    0.190_350_578_064_785_4,
    0.169_004_726_639_267_9,
    0.140_653_259_715_525_9,
    0.104_790_010_322_250_2,
    0.063_092_092_629_978_55,
    0.022_935_322_010_529_22,
];

fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut gauss = G7_WEIGHTS[0] * f(mid);
    let mut kronrod = K15_WEIGHTS[0] * f(mid);
    for k in 1..4 {
        let v = f(mid - half * G7_NODES[k]) + f(mid + half * G7_NODES[k]);
        gauss += G7_WEIGHTS[k] * v;
        kronrod += K15_WEIGHTS[2 * k] * v;
    }
    for k in [1, 3, 5, 7] {
        let v = f(mid - half * K15_NODES[k]) + f(mid + half * K15_NODES[k]);
        kronrod += K15_WEIGHTS[k] * v;
    }
    (kronrod * half, (kronrod - gauss).abs() * half)
}

/// Adaptive bisection quadrature of `f` on `[a, b]` to absolute tolerance.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn recurse(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
        let (value, err) = gk15(f, a, b);
        if err <= tol || depth >= 48 {
            value
        } else {
            let mid = 0.5 * (a + b);
            recurse(f, a, mid, 0.5 * tol, depth + 1) + recurse(f, mid, b, 0.5 * tol, depth + 1)
        }
    }
    recurse(&f, a, b, tol, 0)
}

/// Gaussian density.
pub fn normal_pdf(x: f64, mean: f64, var: f64) -> f64 {
    (-(x - mean) * (x - mean) / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var).sqrt()
}

/// Integration range generously covering both Gaussians.
pub fn gaussian_support(m1: f64, v1: f64, m2: f64, v2: f64) -> (f64, f64) {
    let sd = v1.max(v2).sqrt();
    (m1.min(m2) - 12.0 * sd, m1.max(m2) + 12.0 * sd)
}

/// Random matrix with independent standard normal entries.
pub fn randn_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    let mut x = DMatrix::zeros(rows, cols);
    for r in 0..rows {
        for c in 0..cols {
            x[(r, c)] = rng.sample::<f64, _>(StandardNormal);
        }
    }
    x
}

/// Random vector with independent standard normal entries.
pub fn randn_vector(rng: &mut ChaCha8Rng, len: usize) -> DVector<f64> {
    DVector::from_fn(len, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// Uniform draw on `[lo, hi]`.
pub fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}
