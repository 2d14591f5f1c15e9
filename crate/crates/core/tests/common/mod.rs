//! Shared helpers for the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use ampm::{Complex, TransferFunction};
use rand::Rng;

/// Random stable filter whose poles (and zeros) keep at least
/// `10·fm` away from the lines at `fc - fm`, `fc`, `fc + fm`, normalized to
/// unit gain at the carrier.
pub fn random_stable_filter<R: Rng>(rng: &mut R, fc: f64, fm: f64) -> TransferFunction {
    let wc = 2.0 * PI * fc;
    let wm = 2.0 * PI * fm;
    let lines = [wc - wm, wc, wc + wm];
    let clear = |root: Complex| {
        lines
            .iter()
            .all(|&w| (root - Complex::new(0.0, w)).norm() >= 10.0 * wm && (root - Complex::new(0.0, -w)).norm() >= 10.0 * wm)
    };

    let draw_root = |rng: &mut R, stable: bool| -> (Complex, bool) {
        for _ in 0..10_000 {
            let pair = rng.gen_bool(0.5);
            let sigma = wc * 10f64.powf(rng.gen_range(-1.3..0.7));
            let re = if stable || rng.gen_bool(0.5) { -sigma } else { sigma };
            let im = if pair { wc * rng.gen_range(0.2..3.0) } else { 0.0 };
            let root = Complex::new(re, im);
            if clear(root) {
                return (root, pair);
            }
        }
        panic!("no admissible root for fc = {fc}, fm = {fm}");
    };

    let factor = |root: Complex, pair: bool| -> Vec<f64> {
        if pair {
            vec![root.norm_sqr(), -2.0 * root.re, 1.0]
        } else {
            vec![-root.re, 1.0]
        }
    };

    let n_poles = rng.gen_range(1..=3);
    let n_zeros = rng.gen_range(0..=n_poles);
    let mut den = vec![1.0];
    for _ in 0..n_poles {
        let (r, pair) = draw_root(rng, true);
        den = poly_mul(&den, &factor(r, pair));
    }
    let mut num = vec![1.0];
    for _ in 0..n_zeros {
        let (r, pair) = draw_root(rng, false);
        num = poly_mul(&num, &factor(r, pair));
    }
    let tf = TransferFunction::new(num.clone(), den.clone()).unwrap();
    let g = tf.evaluate(fc).unwrap().norm();
    let num = num.iter().map(|c| c / g).collect();
    TransferFunction::new(num, den).unwrap().with_label("random")
}

pub fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Random complex number with magnitude below `max`.
pub fn random_index<R: Rng>(rng: &mut R, max: f64) -> Complex {
    Complex::from_polar(rng.gen_range(0.0..max), rng.gen_range(-PI..PI))
}

/// Componentwise relative difference of two complex values.
pub fn rel_diff(x: Complex, y: Complex) -> f64 {
    let scale = x.norm().max(y.norm());
    if scale == 0.0 {
        0.0
    } else {
        (x - y).norm() / scale
    }
}
