//! Interpolating entire functions whose inverse Fourier transforms form the family.

use std::collections::HashMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::multiplier::{multiplier_for_horizon, MultiplierParams};
use super::products::{CanonicalProduct, LedgerZero, LogValue, Skip};
use crate::error::{Error, Result};
use crate::spectrum::{eigenvalue, is_double, Branch};

const I: Complex64 = Complex64::new(0.0, 1.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const STENCIL_STEP: f64 = 1e-3;
/// Below this distance to its own ledger point a row is evaluated with the factor removed.
const REMOVAL_RADIUS: f64 = 1e-2;

/// One function of the family, named by the exponential it is dual to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", content = "k", rename_all = "snake_case")]
pub enum Member {
    Plus(i64),
    Minus(i64),
    Zero,
    Double(i64),
    DoubleTilde(i64),
}

impl Member {
    /// All members for `|k| <= kmax`, simple modes first.
    pub fn all(kmax: i64) -> Vec<Member> {
        let mut out = Vec::new();
        for k in -kmax..=kmax {
            if k != 0 && k.abs() != 2 {
                out.push(Member::Plus(k));
                out.push(Member::Minus(k));
            }
        }
        out.push(Member::Zero);
        out.extend([Member::Double(-2), Member::Double(2), Member::DoubleTilde(-2), Member::DoubleTilde(2)]);
        out
    }

    pub fn label(self) -> String {
        match self {
            Member::Plus(k) => format!("psi_plus[{k}]"),
            Member::Minus(k) => format!("psi_minus[{k}]"),
            Member::Zero => "psi_0".to_string(),
            Member::Double(k) => format!("psi[{k}]"),
            Member::DoubleTilde(k) => format!("psi_tilde[{k}]"),
        }
    }

    /// The exponent `lambda` of the dual exponential.
    pub fn lambda(self) -> Complex64 {
        match self {
            Member::Plus(k) => eigenvalue(k, Branch::Plus),
            Member::Minus(k) => eigenvalue(k, Branch::Minus),
            Member::Zero => ZERO,
            Member::Double(k) | Member::DoubleTilde(k) => eigenvalue(k, Branch::Plus),
        }
    }

    /// Polynomial degree of the dual exponential `t^d e^{lambda t}`.
    pub fn degree(self) -> u32 {
        matches!(self, Member::DoubleTilde(_)) as u32
    }

    /// The point `i lambda` where the interpolant is normalized.
    pub fn point(self) -> Complex64 {
        I * self.lambda()
    }

    fn validate(self) -> Result<()> {
        let ok = match self {
            Member::Plus(k) | Member::Minus(k) => k != 0 && !is_double(k),
            Member::Zero => true,
            Member::Double(k) | Member::DoubleTilde(k) => k.abs() == 2,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::IndexCoverage(format!("{self:?} is not a family member")))
        }
    }
}

/// `ln D(z) = ln((1 - z/i lambda_2)(1 - z/i lambda_{-2}))`.
fn ln_d(z: Complex64) -> LogValue {
    ln_one_minus(z, Member::Double(2).point()) + ln_one_minus(z, Member::Double(-2).point())
}

fn ln_one_minus(z: Complex64, w: Complex64) -> LogValue {
    ((w - z) / w).ln()
}

fn exp_or_zero(l: LogValue) -> Complex64 {
    if l.re.is_nan() || l.re < -745.0 {
        ZERO
    } else {
        l.exp()
    }
}

/// The interpolants `I_k^+-`, `I_0`, `I_{+-2}` and `I~_{+-2}` for one horizon.
#[derive(Debug, Clone)]
pub struct InterpolantSet {
    horizon: f64,
    kmax: i64,
    product: CanonicalProduct,
    multiplier: MultiplierParams,
    constants: HashMap<Member, LogValue>,
    /// `K_{+-2}'(i lambda_{+-2})`.
    k_prime: HashMap<i64, Complex64>,
}

impl InterpolantSet {
    /// Interpolants for `|k| <= kmax` that can be evaluated on `|z| <= radius`.
    pub fn new(horizon: f64, kmax: i64, radius: f64, truncation: usize) -> Result<Self> {
        if kmax < 3 {
            return Err(Error::InvalidTruncation { kmax: kmax.max(0) as usize, min: 3 });
        }
        if (kmax as usize) > truncation / 2 {
            return Err(Error::InvalidInput(format!("kmax {kmax} too large for truncation {truncation}")));
        }
        let reach = Member::all(kmax).iter().map(|m| m.point().norm()).fold(radius, f64::max);
        let multiplier = multiplier_for_horizon(horizon, reach + 2.0)?;
        let product = CanonicalProduct::new(truncation, truncation)?;
        let mut set = Self {
            horizon,
            kmax,
            product,
            multiplier,
            constants: HashMap::new(),
            k_prime: HashMap::new(),
        };
        for m in Member::all(kmax) {
            let c = set.constant(m)?;
            set.constants.insert(m, c);
        }
        for k in [-2, 2] {
            let z = Member::Double(k).point();
            let h = STENCIL_STEP;
            let f = |s: f64| -> Result<Complex64> { Ok(exp_or_zero(set.ln_k_double(z + s, k)?)) };
            let d = (f(-2.0 * h)? - f(-h)? * 8.0 + f(h)? * 8.0 - f(2.0 * h)?) / (12.0 * h);
            set.k_prime.insert(k, d);
        }
        Ok(set)
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn kmax(&self) -> i64 {
        self.kmax
    }

    pub fn members(&self) -> Vec<Member> {
        Member::all(self.kmax)
    }

    pub fn product(&self) -> &CanonicalProduct {
        &self.product
    }

    pub fn multiplier(&self) -> &MultiplierParams {
        &self.multiplier
    }

    fn ln_m(&self, z: Complex64) -> Result<LogValue> {
        Ok(self.multiplier.eval(z)?.ln)
    }

    fn ledger(m: Member) -> LedgerZero {
        match m {
            Member::Plus(k) => LedgerZero::Plus(k),
            Member::Minus(k) => LedgerZero::Minus(k),
            Member::Zero => LedgerZero::Origin,
            Member::Double(k) | Member::DoubleTilde(k) => LedgerZero::Double(k),
        }
    }

    fn constant(&self, m: Member) -> Result<LogValue> {
        m.validate()?;
        let z = m.point();
        let base = self.product.ln_derivative(Self::ledger(m))? + self.ln_m(z)?;
        Ok(match m {
            Member::Plus(_) | Member::Minus(_) => base + ln_d(z),
            Member::Zero => base,
            Member::Double(k) | Member::DoubleTilde(k) => {
                base + ln_one_minus(m.lambda(), eigenvalue(-k, Branch::Plus))
            }
        })
    }

    /// `ln K_k(z)` for `k = +-2`, with the factor at `i lambda_k` removed.
    fn ln_k_double(&self, z: Complex64, k: i64) -> Result<LogValue> {
        let zk = Member::Double(k).point();
        let c = self.constants[&Member::Double(k)];
        Ok(self.product.ln_double_core(z, k) + (-1.0 / zk).ln() + self.ln_m(z)? - c)
    }

    fn ln_simple_removed(&self, m: Member, z: Complex64) -> Result<LogValue> {
        let c = self.constants[&m];
        let lm = self.ln_m(z)?;
        Ok(match m {
            Member::Plus(k) => {
                self.product.p1().ln_eval(-z, Skip::Index(k)) + self.product.ln_p2(-z, Skip::None) - z.ln()
                    + (-1.0 / m.point()).ln()
                    + lm
                    - c
            }
            Member::Minus(k) => {
                self.product.p1().ln_eval(-z, Skip::None) + self.product.ln_p2(-z, Skip::Index(k)) - z.ln()
                    + (-1.0 / m.point()).ln()
                    + lm
                    - c
            }
            Member::Zero => self.product.ln_p_without(z, LedgerZero::Origin)? + ln_d(z) + lm - c,
            _ => unreachable!("double members are assembled from K"),
        })
    }

    fn check(&self, m: Member) -> Result<()> {
        m.validate()?;
        if !self.constants.contains_key(&m) {
            return Err(Error::IndexCoverage(format!("{m:?} is outside |k| <= {}", self.kmax)));
        }
        Ok(())
    }

    /// `I(z)` computed with the member's own factor removed; valid at every `z`.
    pub fn eval(&self, m: Member, z: Complex64) -> Result<Complex64> {
        self.check(m)?;
        match m {
            Member::Double(k) | Member::DoubleTilde(k) => {
                let kz = exp_or_zero(self.ln_k_double(z, k)?);
                let tilde = -I * (z - m.point()) * kz;
                Ok(match m {
                    Member::DoubleTilde(_) => tilde,
                    _ => kz - I * self.k_prime[&k] * tilde,
                })
            }
            _ => Ok(exp_or_zero(self.ln_simple_removed(m, z)?)),
        }
    }

    /// `I'(z)` by a five point stencil of step `h`.
    pub fn derivative(&self, m: Member, z: Complex64, h: f64) -> Result<Complex64> {
        let f = |s: f64| self.eval(m, z + s);
        Ok((f(-2.0 * h)? - f(-h)? * 8.0 + f(h)? * 8.0 - f(2.0 * h)?) / (12.0 * h))
    }

    /// Values of every member at each point of `xs`, one row per member.
    ///
    /// `ln(P D m)` is shared by all rows; a row falls back to [`Self::eval`]
    /// within a small distance of its own normalization point.
    pub fn eval_rows(&self, members: &[Member], xs: &[Complex64]) -> Result<Vec<Vec<Complex64>>> {
        for m in members {
            self.check(*m)?;
        }
        let mut rows = vec![Vec::with_capacity(xs.len()); members.len()];
        for &z in xs {
            let common = self.product.ln_pd(z) + self.ln_m(z)?;
            for (row, &m) in rows.iter_mut().zip(members) {
                let zk = m.point();
                if (z - zk).norm() < REMOVAL_RADIUS {
                    row.push(self.eval(m, z)?);
                    continue;
                }
                let c = self.constants[&m];
                let v = match m {
                    Member::Plus(_) | Member::Minus(_) => exp_or_zero(common - (z - zk).ln() - c),
                    Member::Zero => exp_or_zero(common - z.ln() - c),
                    Member::Double(k) | Member::DoubleTilde(k) => {
                        let core = common - 2.0 * ln_one_minus(z, zk);
                        let kz = exp_or_zero(core + (-1.0 / zk).ln() - c);
                        let tilde = -I * (z - zk) * kz;
                        match m {
                            Member::DoubleTilde(_) => tilde,
                            _ => kz - I * self.k_prime[&k] * tilde,
                        }
                    }
                };
                row.push(v);
            }
        }
        Ok(rows)
    }
}
