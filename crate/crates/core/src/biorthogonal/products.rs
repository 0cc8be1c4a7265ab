//! Canonical products with zeros at the rotated eigenvalues, evaluated in log space.
//!
//! A product `f(z) = z prod_{0<|k|<=N} (1 - z/w_k)` is written against the
//! reference `z prod_{k != 0} (1 - z/(k+s))`, which has the closed form
//! `z s sin(pi (z - s)) / ((z - s) sin(pi s))`. Only the ratios of matching
//! factors are multiplied out, so the zeros beyond `N` are accounted for by
//! the reference.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectrum::{eigenvalue, mu, Branch};

/// Natural logarithm of a complex value; the value is `exp` of it.
pub type LogValue = Complex64;

const I: Complex64 = Complex64::new(0.0, 1.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

pub(crate) fn ln1p(w: Complex64) -> Complex64 {
    if w.norm_sqr() < 1e-8 {
        let w2 = w * w;
        w - w2 / 2.0 + w2 * w / 3.0 - w2 * w2 / 4.0
    } else {
        (ONE + w).ln()
    }
}

/// `ln sin(pi v)`, stable for large imaginary parts and near the integers.
pub(crate) fn ln_sin_pi(v: Complex64) -> LogValue {
    let m = v.re.round();
    let w = v - m;
    let x = w * PI;
    let base = if x.im > 20.0 {
        -I * x + Complex64::new(0.5f64.ln(), PI / 2.0) + ln1p(-(I * x * 2.0).exp())
    } else if x.im < -20.0 {
        I * x + Complex64::new(0.5f64.ln(), -PI / 2.0) + ln1p(-(-I * x * 2.0).exp())
    } else {
        x.sin().ln()
    };
    base + I * (PI * m)
}

/// `ln(sin(pi v) / (pi v))`.
pub(crate) fn ln_sinc(v: Complex64) -> LogValue {
    if v.norm() < 1e-3 {
        let y = (v * PI) * (v * PI);
        return ln1p(-y / 6.0 + y * y / 120.0);
    }
    ln_sin_pi(v) - (v * PI).ln()
}

/// Which factor to leave out of a product.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Skip {
    None,
    /// The leading `z`.
    Origin,
    /// The factor `1 - z/w_k`.
    Index(i64),
}

/// Product `z prod_{0<|k|<=N} (1 - z/w_k)` with zeros close to `k + s`.
#[derive(Debug, Clone)]
pub struct SineTypeProduct {
    shift: Complex64,
    n: usize,
    zeros: Vec<Complex64>,
    deltas: Vec<Complex64>,
    /// `ln1p(delta_k / r_k)` for each `k`.
    anchors: Vec<Complex64>,
    anchor_sum: Complex64,
    ln_ref_scale: Complex64,
}

impl SineTypeProduct {
    pub fn new(shift: Complex64, n: usize, zero: impl Fn(i64) -> Complex64) -> Self {
        let nn = n as i64;
        let mut zeros = vec![Complex64::new(0.0, 0.0); 2 * n + 1];
        let mut deltas = zeros.clone();
        let mut anchors = zeros.clone();
        let mut anchor_sum = Complex64::new(0.0, 0.0);
        for k in (-nn..=nn).filter(|k| *k != 0) {
            let i = (k + nn) as usize;
            let r = shift + k as f64;
            zeros[i] = zero(k);
            deltas[i] = zeros[i] - r;
            anchors[i] = ln1p(deltas[i] / r);
            anchor_sum += anchors[i];
        }
        let ln_ref_scale = (shift / (shift * PI).sin()).ln() + PI.ln();
        Self {
            shift,
            n,
            zeros,
            deltas,
            anchors,
            anchor_sum,
            ln_ref_scale,
        }
    }

    pub fn truncation(&self) -> usize {
        self.n
    }

    pub fn shift(&self) -> Complex64 {
        self.shift
    }

    /// The zero `w_k`, `0 < |k| <= N`.
    pub fn zero(&self, k: i64) -> Complex64 {
        self.zeros[(k + self.n as i64) as usize]
    }

    fn reference(&self, k: i64) -> Complex64 {
        self.shift + k as f64
    }

    /// `ln prod_{k != 0} (1 - z/(k+s))`.
    fn ln_reference(&self, u: Complex64) -> LogValue {
        self.ln_ref_scale + ln_sinc(u)
    }

    /// The reference with the factor `j` removed.
    fn ln_reference_without(&self, z: Complex64, u: Complex64, j: i64) -> LogValue {
        let r = self.reference(j);
        let v = u - j as f64;
        if v.norm() >= 0.5 {
            return self.ln_reference(u) - ((r - z) / r).ln();
        }
        let sign = if j % 2 == 0 { Complex64::new(0.0, PI) } else { Complex64::new(0.0, 0.0) };
        self.ln_ref_scale + r.ln() + sign + ln_sinc(v) - u.ln()
    }

    /// `ln f(z)` with one factor optionally removed.
    pub fn ln_eval(&self, z: Complex64, skip: Skip) -> LogValue {
        let nn = self.n as i64;
        let u = z - self.shift;
        let near = u.re.round() as i64;
        let near_ok = near != 0 && near.abs() <= nn && (u - near as f64).norm() < 0.5;
        let removed = match skip {
            Skip::Index(j) => Some(j),
            _ if near_ok => Some(near),
            _ => None,
        };
        let mut acc = match removed {
            Some(j) => self.ln_reference_without(z, u, j),
            None => self.ln_reference(u),
        };
        if skip != Skip::Origin {
            acc += z.ln();
        }
        if let Some(j) = removed {
            if skip != Skip::Index(j) {
                let w = self.zero(j);
                acc += ((w - z) / w).ln();
            }
            acc += self.anchors[(j + nn) as usize];
        }
        acc -= self.anchor_sum;
        for k in (-nn..=nn).filter(|k| *k != 0 && Some(*k) != removed) {
            let i = (k + nn) as usize;
            acc += ln1p(self.deltas[i] / (self.reference(k) - z));
        }
        acc
    }

    /// Direct symmetric partial product, for cross-checks.
    pub fn ln_eval_direct(&self, z: Complex64) -> LogValue {
        let nn = self.n as i64;
        let mut acc = z.ln();
        for k in (-nn..=nn).filter(|k| *k != 0) {
            let w = self.zero(k);
            acc += ((w - z) / w).ln();
        }
        acc
    }
}

/// `P1(z) = z prod (1 + z/(i lambda_k^+))`, zeros `w_k = -i lambda_k^+ ~ k + i`.
pub fn p1_product(n: usize) -> SineTypeProduct {
    SineTypeProduct::new(I, n, |k| -I * eigenvalue(k, Branch::Plus))
}

/// `P4(z) = z prod (1 - z/mu_k)`, zeros `mu_k ~ k - i/2`.
pub fn p4_product(n: usize) -> SineTypeProduct {
    SineTypeProduct::new(Complex64::new(0.0, -0.5), n, mu)
}

/// A zero of `P` attached to the exponential family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "k", rename_all = "snake_case")]
pub enum LedgerZero {
    Origin,
    Plus(i64),
    Minus(i64),
    /// `i lambda_{+-2}`, simple zero of `P`.
    Double(i64),
}

impl LedgerZero {
    pub fn point(self) -> Complex64 {
        match self {
            LedgerZero::Origin => Complex64::new(0.0, 0.0),
            LedgerZero::Plus(k) => I * eigenvalue(k, Branch::Plus),
            LedgerZero::Minus(k) => I * eigenvalue(k, Branch::Minus),
            LedgerZero::Double(k) => I * eigenvalue(k, Branch::Plus),
        }
    }

    /// The exponent `lambda` with `point = i lambda`.
    pub fn lambda(self) -> Complex64 {
        -I * self.point()
    }
}

/// `P(z) = P1(-z) P2(-z) / (z (1 - z/i lambda_2)(1 - z/i lambda_{-2}))`.
#[derive(Debug, Clone)]
pub struct CanonicalProduct {
    p1: SineTypeProduct,
    p4: SineTypeProduct,
}

fn double_point(k: i64) -> Complex64 {
    I * eigenvalue(k, Branch::Plus)
}

impl CanonicalProduct {
    pub fn new(n1: usize, n4: usize) -> Result<Self> {
        if n1 < 64 || n4 < 64 {
            return Err(Error::InvalidInput(format!(
                "canonical truncation must be at least 64, got {n1} and {n4}"
            )));
        }
        Ok(Self {
            p1: p1_product(n1),
            p4: p4_product(n4),
        })
    }

    pub fn p1(&self) -> &SineTypeProduct {
        &self.p1
    }

    pub fn p4(&self) -> &SineTypeProduct {
        &self.p4
    }

    /// `ln P2(w) = ln(-i P4(s) P4(-s))`, `s = e^{-i pi/4} sqrt(w)`.
    ///
    /// `Skip::Index(k)` removes the zero `-i lambda_k^-`; `Skip::Origin` divides by `w`.
    pub fn ln_p2(&self, w: Complex64, skip: Skip) -> LogValue {
        let s = Complex64::from_polar(1.0, -PI / 4.0) * w.sqrt();
        let base = self.p4.ln_eval(s, skip) + self.p4.ln_eval(-s, skip);
        if skip == Skip::Origin {
            base
        } else {
            base + Complex64::new(0.0, -PI / 2.0)
        }
    }

    /// `ln P3(z) = ln(-P4(z) P4(-z))`.
    pub fn ln_p3(&self, z: Complex64) -> LogValue {
        self.p4.ln_eval(z, Skip::None) + self.p4.ln_eval(-z, Skip::None) + Complex64::new(0.0, PI)
    }

    fn ln_d(z: Complex64) -> LogValue {
        let a = double_point(2);
        let b = double_point(-2);
        ((a - z) / a).ln() + ((b - z) / b).ln()
    }

    /// `ln(P(z) D(z)) = ln P1(-z) + ln P2(-z) - ln z`.
    pub fn ln_pd(&self, z: Complex64) -> LogValue {
        self.p1.ln_eval(-z, Skip::None) + self.ln_p2(-z, Skip::None) - z.ln()
    }

    /// `ln P(z)`.
    pub fn ln_p(&self, z: Complex64) -> LogValue {
        self.ln_pd(z) - Self::ln_d(z)
    }

    /// `ln(P(z) / (1 - z/z_j))` for a ledger zero `z_j`, or `ln(P(z)/z)` at the origin.
    pub fn ln_p_without(&self, z: Complex64, zero: LedgerZero) -> Result<LogValue> {
        self.check_index(zero)?;
        Ok(match zero {
            LedgerZero::Origin => {
                self.p1.ln_eval(-z, Skip::Origin) + self.ln_p2(-z, Skip::Origin) - Self::ln_d(z)
            }
            LedgerZero::Plus(k) => {
                self.p1.ln_eval(-z, Skip::Index(k)) + self.ln_p2(-z, Skip::None) - z.ln() - Self::ln_d(z)
            }
            LedgerZero::Minus(k) => {
                self.p1.ln_eval(-z, Skip::None) + self.ln_p2(-z, Skip::Index(k)) - z.ln() - Self::ln_d(z)
            }
            LedgerZero::Double(k) => {
                let other = double_point(-k);
                self.p1.ln_eval(-z, Skip::Index(k)) + self.ln_p2(-z, Skip::Index(k))
                    - z.ln()
                    - ((other - z) / other).ln()
            }
        })
    }

    /// `ln(P1_{\k}(-z) P2_{\k}(-z) / z)` for `k = +-2`; equals `ln(P(z)(1 - z/z_{-k}) / (1 - z/z_k))`.
    pub(crate) fn ln_double_core(&self, z: Complex64, k: i64) -> LogValue {
        self.p1.ln_eval(-z, Skip::Index(k)) + self.ln_p2(-z, Skip::Index(k)) - z.ln()
    }

    fn check_index(&self, zero: LedgerZero) -> Result<()> {
        let (k, ok) = match zero {
            LedgerZero::Origin => return Ok(()),
            LedgerZero::Plus(k) | LedgerZero::Minus(k) => (k, k != 0 && k.abs() != 2),
            LedgerZero::Double(k) => (k, k.abs() == 2),
        };
        let limit = self.p1.truncation().min(self.p4.truncation()) as i64;
        if !ok || k.abs() > limit {
            return Err(Error::Domain(format!("{zero:?} is not a zero of the product")));
        }
        Ok(())
    }

    /// `ln P'(z_j)` from the product with the factor removed: `P'(z_j) = -P_{\j}(z_j) / z_j`.
    pub fn ln_derivative(&self, zero: LedgerZero) -> Result<LogValue> {
        let z = zero.point();
        let rest = self.ln_p_without(z, zero)?;
        Ok(match zero {
            LedgerZero::Origin => rest,
            _ => rest + (-ONE / z).ln(),
        })
    }

    /// `ln P'(z_j)` by a log-space central difference with step `1e-5 (1 + |z_j|)`.
    pub fn ln_derivative_fd(&self, zero: LedgerZero) -> Result<LogValue> {
        self.check_index(zero)?;
        let z = zero.point();
        let h = 1e-5 * (1.0 + z.norm());
        let lp = self.ln_p(z + h);
        let lm = self.ln_p(z - h);
        Ok(lp + ln1p(-(lm - lp).exp()) - (2.0 * h).ln())
    }
}

/// Numerical checks of the sine-type conditions for `P1` or `P4`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SineTypeReport {
    /// `min_{k != l, |k|,|l| <= 200} |w_k - w_l|`.
    pub separation: f64,
    /// `(H, min, max)` of `|f(x + iH)| e^{-pi |H|}` over `x` in `[-300, 300]`.
    pub strip: Vec<(f64, f64, f64)>,
    /// `ln|f(iy)| / y` at `y = 200`.
    pub growth_ratio: f64,
    /// `max |f(x)|` over `x` in `[-300, 300]`.
    pub real_line_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SineKind {
    P1,
    P4,
}

pub fn sine_type_conditions(kind: SineKind) -> SineTypeReport {
    let f = match kind {
        SineKind::P1 => p1_product(2000),
        SineKind::P4 => p4_product(2000),
    };
    let mut zs: Vec<Complex64> = (-200..=200).filter(|k| *k != 0).map(|k| f.zero(k)).collect();
    zs.push(Complex64::new(0.0, 0.0));
    let mut separation = f64::INFINITY;
    for (i, a) in zs.iter().enumerate() {
        for b in &zs[i + 1..] {
            separation = separation.min((a - b).norm());
        }
    }
    let xs: Vec<f64> = (0..=1200).map(|i| -300.0 + 0.5 * i as f64 + 0.123).collect();
    let mut strip = Vec::new();
    for h in [3.0, 5.0, 10.0, -3.0, -5.0, -10.0] {
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for x in &xs {
            let v = (f.ln_eval(Complex64::new(*x, h), Skip::None).re - PI * h.abs()).exp();
            lo = lo.min(v);
            hi = hi.max(v);
        }
        strip.push((h, lo, hi));
    }
    let growth_ratio = f.ln_eval(Complex64::new(0.0, 200.0), Skip::None).re / 200.0;
    let real_line_max = xs
        .iter()
        .map(|x| f.ln_eval(Complex64::new(*x, 0.0), Skip::None).re.exp())
        .fold(0.0, f64::max);
    SineTypeReport {
        separation,
        strip,
        growth_ratio,
        real_line_max,
    }
}
