//! Scalar special functions and quadrature rules.

use libm::erfc;
use std::f64::consts::{FRAC_1_SQRT_2, PI};

/// Standard normal CDF.
pub fn phi(z: f64) -> f64 {
    0.5 * erfc(-z * FRAC_1_SQRT_2)
}

/// Standard normal upper tail `1 - phi(z)`.
pub fn phi_upper(z: f64) -> f64 {
    0.5 * erfc(z * FRAC_1_SQRT_2)
}

/// Probability that `Normal(mean, sd^2)` falls in `(lo, hi]`.
///
/// Infinite endpoints are allowed. Uses the tail on the far side of the
/// mean so both tails keep relative accuracy.
pub fn normal_interval(lo: f64, hi: f64, mean: f64, sd: f64) -> f64 {
    let a = (lo - mean) / sd;
    let b = (hi - mean) / sd;
    let p = if a >= 0.0 { phi_upper(a) - phi_upper(b) } else { phi(b) - phi(a) };
    p.max(0.0)
}

/// Shannon entropy in nats, ignoring zero cells.
pub fn entropy(p: &[f64]) -> f64 {
    p.iter().filter(|&&v| v > 0.0).map(|&v| -v * v.ln()).sum()
}

/// Binary entropy in nats.
pub fn h2(p: f64) -> f64 {
    entropy(&[p, 1.0 - p])
}

/// Bessel function of the first kind, order zero, by its power series.
///
/// Accurate to about 1e-13 for `|x| <= 12`, which covers every Doppler
/// product of interest here.
pub fn bessel_j0(x: f64) -> f64 {
    let q = -(x * x) / 4.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        term *= q / (k * k) as f64;
        sum += term;
        if term.abs() < 1e-17 * sum.abs().max(1e-300) {
            break;
        }
    }
    sum
}

/// Orthonormal Hermite functions without the Gaussian factor: `(p_n(z), p_{n-1}(z))`.
fn hermite_pair(n: usize, z: f64) -> (f64, f64) {
    let mut p1 = PI.powf(-0.25);
    let mut p2 = 0.0;
    for j in 0..n {
        let p3 = p2;
        p2 = p1;
        let jf = j as f64;
        p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
    }
    (p1, p2)
}

/// Gauss–Hermite rule for the weight `exp(-t^2)`: `(nodes, weights)` ascending.
///
/// Nonnegative roots are bracketed on a grid finer than the smallest root
/// gap, then polished by safeguarded Newton steps.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "rule needs at least one node");
    let nf = n as f64;
    let top = (2.0 * nf + 1.0).sqrt() + 1.0;
    let cells = (top / (0.1 / nf.sqrt())).ceil() as usize + 1;
    let h = top / cells as f64;
    let mut roots = Vec::with_capacity(n.div_ceil(2));
    if n % 2 == 1 {
        roots.push(0.0);
    }
    let mut lo = if n % 2 == 1 { 0.5 * h } else { 0.0 };
    let mut f_lo = hermite_pair(n, lo).0;
    while lo < top && roots.len() < n.div_ceil(2) {
        let hi = lo + h;
        let f_hi = hermite_pair(n, hi).0;
        if f_lo.signum() != f_hi.signum() {
            let (mut a, mut b, fa) = (lo, hi, f_lo);
            let mut z = 0.5 * (a + b);
            for _ in 0..100 {
                let (p, q) = hermite_pair(n, z);
                if p.signum() == fa.signum() {
                    a = z;
                } else {
                    b = z;
                }
                let step = z - p / ((2.0 * nf).sqrt() * q);
                let next = if step > a && step < b { step } else { 0.5 * (a + b) };
                let done = (next - z).abs() <= 1e-15 * z.abs().max(1.0);
                z = next;
                if done {
                    break;
                }
            }
            roots.push(z);
        }
        lo = hi;
        f_lo = f_hi;
    }
    assert_eq!(roots.len(), n.div_ceil(2), "root bracketing failed");
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for &z in roots.iter().rev() {
        let q = hermite_pair(n, z).1;
        nodes.push(-z);
        weights.push(1.0 / (nf * q * q));
    }
    for &z in roots.iter().skip(n % 2) {
        let q = hermite_pair(n, z).1;
        nodes.push(z);
        weights.push(1.0 / (nf * q * q));
    }
    (nodes, weights)
}

/// Gauss–Hermite rule rescaled to the standard normal density.
pub fn normal_quadrature(n: usize) -> (Vec<f64>, Vec<f64>) {
    let (t, w) = gauss_hermite(n);
    let s = std::f64::consts::SQRT_2;
    let c = 1.0 / PI.sqrt();
    (t.iter().map(|v| v * s).collect(), w.iter().map(|v| v * c).collect())
}
