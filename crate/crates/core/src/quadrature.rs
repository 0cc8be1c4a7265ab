//! Quadrature rules on uniform grids and closed-form exponential moments.

use num_complex::Complex64;

use crate::error::{Error, Result};

const BOOLE: [f64; 5] = [7.0, 32.0, 12.0, 32.0, 7.0];

/// Weights of composite Boole's rule for `intervals` uniform steps of size `dt`.
///
/// When `intervals` is not a multiple of four, the trailing steps are covered
/// by integrating the quartic through the last five nodes.
pub fn boole_weights(intervals: usize, dt: f64) -> Result<Vec<f64>> {
    if intervals < 4 {
        return Err(Error::RefinementRequired {
            needed: 4,
            detail: format!("{intervals} intervals cannot carry a five point rule"),
        });
    }
    let mut w = vec![0.0; intervals + 1];
    let full = intervals / 4;
    for p in 0..full {
        for (j, c) in BOOLE.iter().enumerate() {
            w[4 * p + j] += c * 2.0 * dt / 45.0;
        }
    }
    let rest = intervals - 4 * full;
    if rest > 0 {
        let partial = lagrange_tail_weights(rest);
        let base = intervals - 4;
        for (j, c) in partial.iter().enumerate() {
            w[base + j] += c * dt;
        }
    }
    Ok(w)
}

/// Integrals of the Lagrange basis on nodes `0..=4` over `[4 - rest, 4]`.
fn lagrange_tail_weights(rest: usize) -> [f64; 5] {
    let (xs, ws) = gauss_legendre(4);
    let a = 4.0 - rest as f64;
    let half = rest as f64 / 2.0;
    let mid = a + half;
    let mut out = [0.0; 5];
    for (x, wq) in xs.iter().zip(&ws) {
        let s = mid + half * x;
        for (i, o) in out.iter_mut().enumerate() {
            let mut l = 1.0;
            for j in 0..5 {
                if j != i {
                    l *= (s - j as f64) / (i as f64 - j as f64);
                }
            }
            *o += half * wq * l;
        }
    }
    out
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut xs = vec![0.0; n];
    let mut ws = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        dp = if d != 0.0 { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        xs[i] = -x;
        xs[n - 1 - i] = x;
        ws[i] = w;
        ws[n - 1 - i] = w;
    }
    (xs, ws)
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// `int_0^len tau^n exp(mu tau) dtau` in closed form.
pub fn exp_moment(n: u32, mu: Complex64, len: f64) -> Complex64 {
    let z = mu * len;
    if z.norm() < 2.0 {
        let mut term = Complex64::new(1.0, 0.0);
        let mut sum = Complex64::new(0.0, 0.0);
        for m in 0..60u32 {
            sum += term / f64::from(n + m + 1);
            term = term * z / f64::from(m + 1);
            if term.norm() < 1e-18 * sum.norm() {
                break;
            }
        }
        return sum * len.powi(n as i32 + 1);
    }
    let e = z.exp();
    let mut j = (e - 1.0) / mu;
    for m in 1..=n {
        j = (e * len.powi(m as i32) - j * f64::from(m)) / mu;
    }
    j
}
