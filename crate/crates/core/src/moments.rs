//! Moment problems equivalent to null controllability and their minimal norm solution.
//!
//! Pairings are sesquilinear, `<u, e^{ikx}> = int u e^{-ikx} dx = 2 pi u_k`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{boole_weights, exp_moment};
use crate::solver::{control_moment, intervals_needed, FourierState, SampledControl};
use crate::spectrum::{eigenvalue, is_double, Branch};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Relative size below which data or coefficients count as zero.
pub const ZERO_TOL: f64 = 1e-12;

/// Largest accepted condition number of the normalized Gram matrix.
pub const MAX_CONDITION: f64 = 1e14;

/// Spatial control profile `b(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpatialProfile {
    /// Real samples on the uniform grid `x_j = 2 pi j / M`.
    Samples(Vec<f64>),
    /// `beta_k = int b e^{-ikx} dx` for `k = -K'..=K'`.
    Coefficients(Vec<Complex64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ControlShape {
    Distributed { profile: SpatialProfile },
    Dirac,
    Dipole,
    /// `1_[a, a + sigma pi] - 1_[a + sigma pi, a + 2 sigma pi]`.
    IndicatorDifference { offset: f64, sigma: f64 },
}

impl ControlShape {
    pub fn name(&self) -> &'static str {
        match self {
            ControlShape::Distributed { .. } => "distributed",
            ControlShape::Dirac => "dirac",
            ControlShape::Dipole => "dipole",
            ControlShape::IndicatorDifference { .. } => "indicator_difference",
        }
    }
}

/// `beta_k` for `k = -K..=K`.
pub fn beta_coefficients(shape: &ControlShape, kmax: usize) -> Result<Vec<Complex64>> {
    let k = kmax as i64;
    match shape {
        ControlShape::Dirac => Ok(vec![Complex64::new(1.0, 0.0); 2 * kmax + 1]),
        ControlShape::Dipole => Ok((-k..=k).map(|j| Complex64::new(0.0, j as f64)).collect()),
        ControlShape::IndicatorDifference { offset, sigma } => {
            if !(*sigma > 0.0 && *sigma < 1.0) || !offset.is_finite() {
                return Err(Error::InvalidProfile(format!(
                    "indicator difference needs 0 < sigma < 1, got {sigma}"
                )));
            }
            Ok((-k..=k)
                .map(|j| indicator_difference_beta(j, *offset, *sigma))
                .collect())
        }
        ControlShape::Distributed { profile } => distributed_beta(profile, kmax),
    }
}

pub fn indicator_difference_beta(k: i64, offset: f64, sigma: f64) -> Complex64 {
    if k == 0 {
        return ZERO;
    }
    let kf = k as f64;
    let ik = Complex64::new(0.0, kf);
    let shift = Complex64::new(0.0, -kf * offset).exp();
    let gap = Complex64::new(1.0, 0.0) - Complex64::new(0.0, -kf * sigma * PI).exp();
    shift * gap * gap / ik
}

fn distributed_beta(profile: &SpatialProfile, kmax: usize) -> Result<Vec<Complex64>> {
    let k = kmax as i64;
    match profile {
        SpatialProfile::Samples(b) => {
            let m = b.len();
            if m < 8 * kmax.max(1) {
                return Err(Error::InvalidProfile(format!(
                    "{m} samples cannot resolve K = {kmax}, need at least {}",
                    8 * kmax
                )));
            }
            if b.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidProfile("non-finite profile sample".into()));
            }
            if b.iter().all(|v| *v == 0.0) {
                return Err(Error::InvalidProfile("profile has zero norm".into()));
            }
            let dx = 2.0 * PI / m as f64;
            Ok((-k..=k)
                .map(|j| {
                    b.iter()
                        .enumerate()
                        .map(|(i, v)| Complex64::from_polar(*v, -(j as f64) * i as f64 * dx))
                        .sum::<Complex64>()
                        * dx
                })
                .collect())
        }
        SpatialProfile::Coefficients(c) => {
            if c.len() % 2 == 0 {
                return Err(Error::InvalidProfile(
                    "coefficient vector must have odd length 2K'+1".into(),
                ));
            }
            if c.iter().all(|v| v.norm() == 0.0) {
                return Err(Error::InvalidProfile("profile has zero norm".into()));
            }
            let kp = (c.len() / 2) as i64;
            Ok((-k..=k)
                .map(|j| if j.abs() <= kp { c[(j + kp) as usize] } else { ZERO })
                .collect())
        }
    }
}

/// Data of the moment problem: `gamma = 2 pi (v_t(0)_k - lambda^other v(0)_k)`.
///
/// For double modes both branches store `2 pi (v_t(0)_k - lambda v(0)_k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaLedger {
    kmax: usize,
    plus: Vec<Complex64>,
    minus: Vec<Complex64>,
    pos_pairing: Vec<Complex64>,
}

impl GammaLedger {
    fn idx(&self, k: i64) -> usize {
        (k + self.kmax as i64) as usize
    }

    pub fn kmax(&self) -> usize {
        self.kmax
    }

    pub fn gamma(&self, k: i64, branch: Branch) -> Complex64 {
        match branch {
            Branch::Plus => self.plus[self.idx(k)],
            Branch::Minus => self.minus[self.idx(k)],
        }
    }

    /// `<v(0), e^{ikx}> = 2 pi v(0)_k`.
    pub fn position_pairing(&self, k: i64) -> Complex64 {
        self.pos_pairing[self.idx(k)]
    }
}

/// Moving-frame data pairings for every stored mode.
pub fn gamma_coefficients(v0: &FourierState) -> GammaLedger {
    let mut plus = Vec::new();
    let mut minus = Vec::new();
    let mut pos_pairing = Vec::new();
    for k in v0.modes() {
        let (c, d) = (v0.pos(k) * (2.0 * PI), v0.vel(k) * (2.0 * PI));
        let lp = eigenvalue(k, Branch::Plus);
        let lm = eigenvalue(k, Branch::Minus);
        if is_double(k) {
            plus.push(d - lp * c);
            minus.push(d - lp * c);
        } else {
            plus.push(d - lm * c);
            minus.push(d - lp * c);
        }
        pos_pairing.push(c);
    }
    GammaLedger {
        kmax: v0.kmax(),
        plus,
        minus,
        pos_pairing,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintKind {
    Plus,
    Minus,
    /// Degree zero moment at a double eigenvalue.
    Double,
    /// Degree one moment at a double eigenvalue.
    DoubleTilde,
    /// Supplied without a mode label.
    Free,
}

/// `int_0^T (T - t)^degree e^{lambda (T - t)} h(t) dt = rhs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentConstraint {
    pub lambda: Complex64,
    pub degree: u32,
    pub rhs: Complex64,
    #[serde(default)]
    pub k: Option<i64>,
    #[serde(default = "free_kind")]
    pub kind: ConstraintKind,
}

fn free_kind() -> ConstraintKind {
    ConstraintKind::Free
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentSystem {
    #[serde(rename = "T")]
    pub horizon: f64,
    pub constraints: Vec<MomentConstraint>,
}

impl MomentSystem {
    pub fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return Err(Error::InvalidInput(format!("bad horizon {}", self.horizon)));
        }
        if self.constraints.is_empty() {
            return Err(Error::InvalidInput("moment system has no constraints".into()));
        }
        for c in &self.constraints {
            if c.degree > 1 {
                return Err(Error::InvalidInput(format!("unsupported degree {}", c.degree)));
            }
            if !(c.lambda.re.is_finite() && c.lambda.im.is_finite() && c.rhs.re.is_finite() && c.rhs.im.is_finite()) {
                return Err(Error::InvalidInput("non-finite constraint".into()));
            }
        }
        Ok(())
    }

    /// Fewest uniform intervals on `[0, T]` that resolve every exponential.
    pub fn intervals_needed(&self) -> usize {
        self.constraints
            .iter()
            .map(|c| intervals_needed(c.lambda, self.horizon))
            .max()
            .unwrap_or(0)
    }
}

fn data_scale(v0: &FourierState) -> f64 {
    v0.pos_slice()
        .iter()
        .chain(v0.vel_slice())
        .map(|c| c.norm())
        .fold(0.0, f64::max)
}

fn mode_is_zero(v0: &FourierState, k: i64, scale: f64) -> bool {
    v0.pos(k).norm() + v0.vel(k).norm() <= ZERO_TOL * scale.max(1e-300)
}

/// Moment system whose solutions steer the moving-frame state `v0` to rest at time `horizon`.
///
/// Modes with vanishing data and vanishing `beta_k` are dropped. For the Dirac
/// shape the position mean is left free.
pub fn build_moment_system(
    shape: &ControlShape,
    v0: &FourierState,
    horizon: f64,
    kmax: usize,
) -> Result<MomentSystem> {
    if kmax < 3 {
        return Err(Error::InvalidTruncation { kmax, min: 3 });
    }
    if !(horizon > 2.0 * PI) {
        return Err(Error::HorizonTooShort { horizon });
    }
    v0.validate()?;
    if v0.kmax() > kmax {
        let scale = data_scale(v0);
        let k = kmax as i64;
        if v0.modes().any(|j| j.abs() > k && !mode_is_zero(v0, j, scale)) {
            return Err(Error::TruncationMismatch {
                state: v0.kmax(),
                expected: kmax,
            });
        }
    }
    let v0 = v0.resized(kmax);
    let scale = data_scale(&v0);
    let betas = beta_coefficients(shape, kmax)?;
    let beta_scale = betas.iter().map(|b| b.norm()).fold(0.0, f64::max);
    let gammas = gamma_coefficients(&v0);
    let mut constraints = Vec::new();
    for k in v0.modes() {
        let beta = betas[(k + kmax as i64) as usize];
        let empty = mode_is_zero(&v0, k, scale);
        if beta.norm() <= ZERO_TOL * beta_scale {
            if empty {
                continue;
            }
            return Err(if k == 0 {
                Error::MeanObstruction(format!(
                    "{} control cannot move the mean, but the data has mean ({}, {})",
                    shape.name(),
                    v0.position_mean(),
                    v0.velocity_mean()
                ))
            } else {
                Error::UncontrollableMode { k }
            });
        }
        let push = |out: &mut Vec<MomentConstraint>, lambda: Complex64, degree, rhs, kind| {
            out.push(MomentConstraint {
                lambda,
                degree,
                rhs,
                k: Some(k),
                kind,
            })
        };
        if is_double(k) {
            let l = eigenvalue(k, Branch::Plus);
            let e = (l * horizon).exp();
            let g = gammas.gamma(k, Branch::Plus);
            push(&mut constraints, l, 0, -e * g / beta, ConstraintKind::Double);
            let position_free = k == 0 && matches!(shape, ControlShape::Dirac);
            if !position_free {
                let rhs = -e * (g * horizon + gammas.position_pairing(k)) / beta;
                push(&mut constraints, l, 1, rhs, ConstraintKind::DoubleTilde);
            }
        } else {
            for (branch, kind) in [(Branch::Plus, ConstraintKind::Plus), (Branch::Minus, ConstraintKind::Minus)] {
                let l = eigenvalue(k, branch);
                let rhs = -(l * horizon).exp() * gammas.gamma(k, branch) / beta;
                push(&mut constraints, l, 0, rhs, kind);
            }
        }
    }
    Ok(MomentSystem {
        horizon,
        constraints,
    })
}

/// Gram matrix `G_ji = int_0^T tau^{d_i + d_j} e^{(lambda_j + conj lambda_i) tau} dtau`.
pub fn gram_matrix(system: &MomentSystem) -> DMatrix<Complex64> {
    let n = system.constraints.len();
    let c = &system.constraints;
    DMatrix::from_fn(n, n, |j, i| {
        exp_moment(
            c[i].degree + c[j].degree,
            c[j].lambda + c[i].lambda.conj(),
            system.horizon,
        )
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinNormSolution {
    /// Real part of the minimal norm control on `[0, T]`.
    pub control: SampledControl,
    /// `h = sum c_i (T - t)^{d_i} e^{conj(lambda_i) (T - t)}`.
    pub coefficients: Vec<Complex64>,
    pub gram_condition: f64,
    /// `max_j |G c - r|_j / sqrt(G_jj)`.
    pub algebraic_residual: f64,
    /// Largest imaginary part of the complex minimizer relative to its peak.
    pub imaginary_fraction: f64,
}

impl MinNormSolution {
    /// Evaluates the complex minimizer at `t`.
    pub fn evaluate(&self, system: &MomentSystem, t: f64) -> Complex64 {
        let tau = system.horizon - t;
        system
            .constraints
            .iter()
            .zip(&self.coefficients)
            .map(|(c, a)| a * (c.lambda.conj() * tau).exp() * tau.powi(c.degree as i32))
            .sum()
    }
}

/// For a system closed under conjugation, the index of each constraint's conjugate partner.
fn conjugate_pairing(system: &MomentSystem) -> Option<Vec<usize>> {
    let cs = &system.constraints;
    cs.iter()
        .map(|a| {
            cs.iter().position(|b| {
                b.degree == a.degree
                    && (b.lambda - a.lambda.conj()).norm() <= 1e-14 * (1.0 + a.lambda.norm())
                    && (b.rhs - a.rhs.conj()).norm() <= 1e-12 * (a.rhs.norm() + b.rhs.norm()).max(f64::MIN_POSITIVE)
            })
        })
        .collect()
}

/// Minimal `L^2(0, T)` norm control satisfying every constraint, sampled on `grid` intervals.
pub fn solve_min_norm(system: &MomentSystem, grid: usize) -> Result<MinNormSolution> {
    system.validate()?;
    let needed = system.intervals_needed().max(4);
    if grid < needed {
        return Err(Error::RefinementRequired {
            needed,
            detail: format!("{grid} intervals do not resolve the fastest exponential"),
        });
    }
    let g = gram_matrix(system);
    let n = g.nrows();
    let scale: Vec<f64> = (0..n).map(|j| g[(j, j)].re.sqrt()).collect();
    let gn = DMatrix::from_fn(n, n, |j, i| g[(j, i)] / (scale[i] * scale[j]));
    let rn = DVector::from_fn(n, |j, _| system.constraints[j].rhs / scale[j]);

    let eig = gn.clone().symmetric_eigenvalues();
    let lo = eig.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = eig.iter().cloned().fold(0.0, f64::max);
    let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if condition > MAX_CONDITION {
        return Err(Error::IllConditioned { condition });
    }
    let chol = gn.clone().cholesky().ok_or(Error::NotPositiveDefinite)?;
    let mut c = chol.solve(&rn);
    let r1 = &rn - &gn * &c;
    c += chol.solve(&r1);
    if let Some(partner) = conjugate_pairing(system) {
        let sym: Vec<Complex64> = (0..n).map(|i| (c[i] + c[partner[i]].conj()) * 0.5).collect();
        for (i, v) in sym.into_iter().enumerate() {
            c[i] = v;
        }
    }
    let algebraic_residual = (&rn - &gn * &c).camax();

    let coefficients: Vec<Complex64> = (0..n).map(|i| c[i] / scale[i]).collect();
    let mut sol = MinNormSolution {
        control: SampledControl::zeros(0.0, system.horizon, grid),
        coefficients,
        gram_condition: condition,
        algebraic_residual,
        imaginary_fraction: 0.0,
    };
    let complex = SampledControl::from_fn(0.0, system.horizon, grid, |t| sol.evaluate(system, t));
    sol.imaginary_fraction = complex.imaginary_fraction();
    sol.control.samples = complex
        .samples
        .iter()
        .map(|s| Complex64::new(s.re, 0.0))
        .collect();
    Ok(sol)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintResidual {
    pub k: Option<i64>,
    pub kind: ConstraintKind,
    pub degree: u32,
    /// `|M h - r|`
    pub raw: f64,
    /// `|M h - r| / |phi|`, with `|phi|` the `L^2` norm of the moment kernel.
    pub normalized: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub residuals: Vec<ConstraintResidual>,
    pub max_raw: f64,
    pub max_normalized: f64,
    /// Largest normalized right-hand side, `|r| / |phi|`.
    pub rhs_scale: f64,
}

/// Evaluates every moment of `control` by quadrature and compares with the targets.
pub fn verify_moments(control: &SampledControl, system: &MomentSystem) -> Result<MomentReport> {
    system.validate()?;
    control.validate()?;
    if (control.duration() - system.horizon).abs() > 1e-9 * system.horizon {
        return Err(Error::InvalidInput(format!(
            "control spans {} but the system horizon is {}",
            control.duration(),
            system.horizon
        )));
    }
    let needed = system.intervals_needed();
    if control.intervals() < needed {
        return Err(Error::RefinementRequired {
            needed,
            detail: "control grid does not resolve the moment kernels".into(),
        });
    }
    let weights = boole_weights(control.intervals(), control.dt())?;
    let mut residuals = Vec::with_capacity(system.constraints.len());
    let mut rhs_scale: f64 = 0.0;
    for c in &system.constraints {
        let q = control_moment(control, &weights, c.lambda, c.degree);
        let norm = exp_moment(2 * c.degree, c.lambda + c.lambda.conj(), system.horizon)
            .re
            .sqrt();
        let raw = (q - c.rhs).norm();
        rhs_scale = rhs_scale.max(c.rhs.norm() / norm);
        residuals.push(ConstraintResidual {
            k: c.k,
            kind: c.kind,
            degree: c.degree,
            raw,
            normalized: raw / norm,
        });
    }
    let max_raw = residuals.iter().map(|r| r.raw).fold(0.0, f64::max);
    let max_normalized = residuals.iter().map(|r| r.normalized).fold(0.0, f64::max);
    Ok(MomentReport {
        residuals,
        max_raw,
        max_normalized,
        rhs_scale,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrrationalBound {
    pub sigma: f64,
    pub q_max: u64,
    /// `min_{q <= Q} q^2 |sigma - p/q|` with `p` the nearest integer to `q sigma`.
    pub c0: f64,
    pub argmin_q: u64,
    /// `min_{1 <= |k| <= 2Q} |k|^3 |beta_k|` for the indicator difference.
    pub min_scaled_beta: f64,
    /// `4 c0^2`, the lower bound for `|k|^3 |beta_k|`.
    pub bound: f64,
}

/// Brute-force estimate of the Diophantine constant of `sigma`.
pub fn quadratic_irrational_constant(sigma: f64, q_max: u64) -> Result<IrrationalBound> {
    if !(sigma > 0.0 && sigma < 1.0) || q_max == 0 {
        return Err(Error::InvalidInput(format!(
            "need 0 < sigma < 1 and Q >= 1, got sigma = {sigma}, Q = {q_max}"
        )));
    }
    let mut c0 = f64::INFINITY;
    let mut argmin_q = 1;
    for q in 1..=q_max {
        let qf = q as f64;
        let p = (qf * sigma).round();
        let gap = (sigma - p / qf).abs();
        if gap < 1e-15 {
            return Err(Error::DegenerateSigma {
                sigma,
                p: p as i64,
                q: q as i64,
            });
        }
        let v = qf * qf * gap;
        if v < c0 {
            c0 = v;
            argmin_q = q;
        }
    }
    let min_scaled_beta = (1..=2 * q_max as i64)
        .map(|k| {
            let kf = k as f64;
            let s = (PI * kf * sigma / 2.0).sin();
            4.0 * kf * kf * s * s
        })
        .fold(f64::INFINITY, f64::min);
    Ok(IrrationalBound {
        sigma,
        q_max,
        c0,
        argmin_q,
        min_scaled_beta,
        bound: 4.0 * c0 * c0,
    })
}
