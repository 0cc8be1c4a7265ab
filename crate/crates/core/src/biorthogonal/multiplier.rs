//! The multiplier `m(z) = prod_{k>=0} (1 - (z - i)^2 / tau_k^2)`.
//!
//! `tau_k` solves `a tau - b sqrt(tau) = k`. Factors beyond `K_m` enter through
//! `-sum_m u^{2m} S_m / m` with `S_m = sum_{k > K_m} tau_k^{-2m}` from an
//! Euler-Maclaurin expansion.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::products::{ln1p, LogValue};
use crate::error::{Error, Result};
use crate::spectrum::{eigenvalue, Branch};

const I: Complex64 = Complex64::new(0.0, 1.0);
const MAX_TERMS: usize = 64;

/// Positive root of `a tau - b sqrt(tau) = k`.
pub fn tau(a: f64, b: f64, k: f64) -> f64 {
    let r = (b + (b * b + 4.0 * a * k).sqrt()) / (2.0 * a);
    r * r
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiplierParams {
    pub a: f64,
    pub b: f64,
    /// `(b/a)^2 = tau_0`.
    pub big_b: f64,
    /// `tau_0 ..= tau_{K_m}`.
    pub nodes: Vec<f64>,
    /// `tau_{K_m + 1}`.
    tail_start: f64,
    /// `tau_{K_m+1}^{2m} S_m` for `m = 1..`.
    tail_scaled: Vec<f64>,
    /// Euler-Maclaurin remainder estimate for each scaled tail sum.
    tail_error: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MultiplierValue {
    pub ln: LogValue,
    /// Estimate of the absolute error in `ln`.
    pub error: f64,
    /// `z - i` lies within `1e-9` of some `+-tau_k`.
    pub near_zero: bool,
}

/// `tau_k` for `k = 0..=K_m` and the tail sums beyond.
pub fn multiplier_nodes(a: f64, b: f64, km: usize) -> Result<MultiplierParams> {
    if !(a > 0.0) || !a.is_finite() || !(b >= 0.0) {
        return Err(Error::InvalidInput(format!("multiplier needs a > 0, b >= 0; got a = {a}, b = {b}")));
    }
    let nodes: Vec<f64> = (0..=km).map(|k| tau(a, b, k as f64)).collect();
    let kp = (km + 1) as f64;
    let q = (b * b + 4.0 * a * kp).sqrt();
    let r = (b + q) / (2.0 * a);
    let tail_start = r * r;
    // derivatives of g(k) = ln tau(k) = 2 ln r(k) at k = K_m + 1
    let (r1, r2, r3) = (1.0 / q, -2.0 * a / (q * q * q), 12.0 * a * a / q.powi(5));
    let g1 = 2.0 * r1 / r;
    let g2 = 2.0 * (r2 / r - r1 * r1 / (r * r));
    let g3 = 2.0 * (r3 / r - 3.0 * r1 * r2 / (r * r) + 2.0 * r1.powi(3) / r.powi(3));
    let mut tail_scaled = Vec::with_capacity(MAX_TERMS);
    let mut tail_error = Vec::with_capacity(MAX_TERMS);
    for m in 1..=MAX_TERMS {
        let mf = m as f64;
        let integral = 2.0 * a * r * r / (4.0 * mf - 2.0) - b * r / (4.0 * mf - 1.0);
        let d1 = -2.0 * mf * g1;
        let d3 = -8.0 * mf.powi(3) * g1.powi(3) + 12.0 * mf * mf * g1 * g2 - 2.0 * mf * g3;
        tail_scaled.push(integral + 0.5 - d1 / 12.0 + d3 / 720.0);
        tail_error.push((2.0 * mf * g1).powi(5) / 30240.0 + 1e-16 * integral);
    }
    Ok(MultiplierParams {
        a,
        b,
        big_b: (b / a) * (b / a),
        nodes,
        tail_start,
        tail_scaled,
        tail_error,
    })
}

/// Parameters for horizon `T`: `a = T/(2 pi) - 1`, `b = sqrt 2`, with enough
/// explicit factors to evaluate on `|z - i| <= radius`.
pub fn multiplier_for_horizon(horizon: f64, radius: f64) -> Result<MultiplierParams> {
    let a = horizon / (2.0 * PI) - 1.0;
    if !(a > 0.0) {
        return Err(Error::HorizonTooShort { horizon });
    }
    let b = 2f64.sqrt();
    let target = 2.0 * radius.max(1.0) + 1.0;
    let km = (a * target - b * target.sqrt()).ceil().max(64.0) as usize;
    multiplier_nodes(a, b, km)
}

impl MultiplierParams {
    pub fn truncation(&self) -> usize {
        self.nodes.len() - 1
    }

    /// Largest `|z - i|` at which the tail series is used.
    pub fn radius(&self) -> f64 {
        0.5 * self.tail_start
    }

    pub fn eval(&self, z: Complex64) -> Result<MultiplierValue> {
        let u = z - I;
        if u.norm() > self.radius() {
            return Err(Error::Domain(format!(
                "|z - i| = {} exceeds the multiplier radius {}",
                u.norm(),
                self.radius()
            )));
        }
        let u2 = u * u;
        let mut acc = Complex64::new(0.0, 0.0);
        for t in &self.nodes {
            acc += ln1p(-u2 / (t * t));
        }
        let ratio = u2 / (self.tail_start * self.tail_start);
        let mut power = Complex64::new(1.0, 0.0);
        let mut error = 0.0;
        for (m, (s, e)) in self.tail_scaled.iter().zip(&self.tail_error).enumerate() {
            power *= ratio;
            let mf = (m + 1) as f64;
            let term = power * (s / mf);
            acc -= term;
            error += power.norm() * e / mf;
            if term.norm() < 1e-18 * acc.norm().max(1.0) {
                break;
            }
        }
        let near_zero = u.im.abs() < 1e-9 && {
            let x = u.re.abs();
            let i = self.nodes.partition_point(|t| *t < x);
            [i.saturating_sub(1), i.min(self.nodes.len() - 1)]
                .iter()
                .any(|j| (self.nodes[*j] - x).abs() < 1e-9)
        };
        Ok(MultiplierValue {
            ln: acc,
            error: error + 1e-16 * acc.norm() * (self.nodes.len() as f64).sqrt(),
            near_zero,
        })
    }
}

/// `|m(x)| / ((1+|x|) e^{-sqrt2 pi sqrt|x|})`.
pub fn envelope_ratio(params: &MultiplierParams, x: f64) -> Result<f64> {
    let m = params.eval(Complex64::new(x, 0.0))?;
    let env = (1.0 + x.abs()).ln() - 2f64.sqrt() * PI * x.abs().sqrt();
    Ok((m.ln.re - env).exp())
}

/// `|m(i lambda_k^-)| / e^{a pi k^2 - 2 sqrt2 pi |k|}`.
pub fn parabolic_ratio(params: &MultiplierParams, k: i64) -> Result<f64> {
    let z = I * eigenvalue(k, Branch::Minus);
    let m = params.eval(z)?;
    let kf = k.abs() as f64;
    let env = params.a * PI * kf * kf - 2.0 * 2f64.sqrt() * PI * kf;
    Ok((m.ln.re - env).exp())
}

/// Constants fitted on an inner range and checked on the outer range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiplierEstimates {
    /// `max envelope_ratio` over `|x| <= xmax/2`.
    pub real_line_inner: f64,
    /// `max envelope_ratio` over `xmax/2 < |x| <= xmax`.
    pub real_line_outer: f64,
    /// `min parabolic_ratio` over `3 <= |k| <= kmax/2 + 1`.
    pub parabolic_inner: f64,
    /// `min parabolic_ratio` over the remaining `|k| <= kmax`.
    pub parabolic_outer: f64,
}

impl MultiplierEstimates {
    /// Each fitted constant covers the outer range up to a factor of two.
    pub fn holds(&self) -> bool {
        self.real_line_outer <= 2.0 * self.real_line_inner && self.parabolic_outer >= 0.5 * self.parabolic_inner
    }
}

pub fn multiplier_estimates(params: &MultiplierParams, xmax: f64, kmax: i64) -> Result<MultiplierEstimates> {
    let steps = (8.0 * xmax).ceil() as i64;
    let (mut inner, mut outer) = (0f64, 0f64);
    for i in -steps..=steps {
        let x = xmax * i as f64 / steps as f64;
        let r = envelope_ratio(params, x)?;
        if x.abs() <= xmax / 2.0 {
            inner = inner.max(r);
        } else {
            outer = outer.max(r);
        }
    }
    let split = kmax / 2 + 1;
    let (mut p_in, mut p_out) = (f64::INFINITY, f64::INFINITY);
    for k in (3..=kmax).flat_map(|k| [k, -k]) {
        let r = parabolic_ratio(params, k)?;
        if k.abs() <= split {
            p_in = p_in.min(r);
        } else {
            p_out = p_out.min(r);
        }
    }
    Ok(MultiplierEstimates {
        real_line_inner: inner,
        real_line_outer: outer,
        parabolic_inner: p_in,
        parabolic_outer: p_out,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bisect(a: f64, b: f64, k: f64) -> f64 {
        let s = |t: f64| a * t - b * t.sqrt() - k;
        let (mut lo, mut hi) = ((b / a) * (b / a), 1e12);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if s(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn nodes_examples() {
        let p = multiplier_nodes(1.0, 2f64.sqrt(), 10).unwrap();
        assert!((p.nodes[0] - 2.0).abs() < 1e-14);
        assert!((p.big_b - 2.0).abs() < 1e-15);
        let t1 = ((2f64.sqrt() + 6f64.sqrt()) / 2.0).powi(2);
        assert!((p.nodes[1] - t1).abs() < 1e-13);
        assert!((p.nodes[1] - 3.73205).abs() < 1e-5);
        for k in 0..=10 {
            assert!((p.nodes[k] - bisect(1.0, 2f64.sqrt(), k as f64)).abs() < 1e-9);
        }
    }

    #[test]
    fn nodes_satisfy_defining_relation() {
        let (a, b) = (0.159, 2f64.sqrt());
        let p = multiplier_nodes(a, b, 5000).unwrap();
        for (k, t) in p.nodes.iter().enumerate() {
            assert!((a * t - b * t.sqrt() - k as f64).abs() < 1e-12 * (1.0 + k as f64));
        }
        assert!(p.nodes.windows(2).all(|w| w[1] > w[0]));
        let gap = p.nodes[5000] - p.nodes[4999];
        assert!((gap - 1.0 / a).abs() < 0.05 / a);
    }

    #[test]
    fn unit_at_i() {
        let p = multiplier_nodes(1.0, 2f64.sqrt(), 100).unwrap();
        let v = p.eval(I).unwrap();
        assert!(v.ln.norm() < 1e-15);
    }

    #[test]
    fn tail_sums_match_brute_force() {
        let (a, b) = (0.7, 2f64.sqrt());
        let km = 300;
        let p = multiplier_nodes(a, b, km).unwrap();
        let t0 = p.tail_start;
        for m in 1..=4 {
            let brute: f64 = ((km + 1)..3_000_000)
                .map(|k| (t0 / tau(a, b, k as f64)).powi(2 * m as i32))
                .sum();
            // remainder of the brute sum beyond 3e6
            let (tn, mf) = (tau(a, b, 3e6), m as f64);
            let rest = (2.0 * a * tn / (4.0 * mf - 2.0) - b * tn.sqrt() / (4.0 * mf - 1.0) + 0.5)
                * (t0 / tn).powi(2 * m as i32);
            let exact = brute + rest;
            let got = p.tail_scaled[m - 1];
            assert!((got - exact).abs() < 1e-9 * exact, "m = {m}: {got} vs {exact}");
        }
    }

    #[test]
    fn truncation_independent() {
        let short = multiplier_nodes(1.0, 2f64.sqrt(), 400).unwrap();
        let long = multiplier_nodes(1.0, 2f64.sqrt(), 4000).unwrap();
        for z in [Complex64::new(37.0, 0.0), Complex64::new(-120.0, -3.0), Complex64::new(5.0, -40.0)] {
            let a = short.eval(z).unwrap();
            let b = long.eval(z).unwrap();
            assert!((a.ln - b.ln).norm() < 1e-10, "{z}");
            assert!(a.error < 1e-8);
        }
    }

    #[test]
    fn out_of_radius_is_an_error() {
        let p = multiplier_nodes(1.0, 2f64.sqrt(), 64).unwrap();
        assert!(p.eval(Complex64::new(1e4, 0.0)).is_err());
    }

    #[test]
    fn estimates_hold_with_fitted_constants() {
        for t in [2.0 * PI + 1.0, 4.0 * PI] {
            let p = multiplier_for_horizon(t, 400.0).unwrap();
            let e = multiplier_estimates(&p, 400.0, 12).unwrap();
            assert!(e.holds(), "T = {t}: {e:?}");
            assert!(e.real_line_inner > 1.0);
        }
    }

    #[test]
    fn zeros_are_flagged() {
        let p = multiplier_nodes(1.0, 2f64.sqrt(), 64).unwrap();
        let z = I + p.nodes[3];
        let v = p.eval(z).unwrap();
        assert!(v.near_zero);
        assert!(v.ln.re < -20.0);
    }
}
