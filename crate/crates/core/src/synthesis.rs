//! Null controls assembled from the biorthogonal family or the minimal norm solve, and
//! the closed-loop pipeline that checks them.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::biorthogonal::{build_family, BiorthogonalFamily, FamilyConfig, Member};
use crate::error::{Error, Result};
use crate::moments::{
    beta_coefficients, build_moment_system, gamma_coefficients, solve_min_norm, verify_moments, ControlShape,
    MomentSystem, SpatialProfile, ZERO_TOL,
};
use crate::quadrature::boole_weights;
use crate::solver::{
    control_moment, evolve_forced, frame_transform, frame_transform_at, sobolev_norm, FourierState, FrameDirection,
    SampledControl,
};
use crate::spectrum::{eigenvalue, is_double, Branch};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const BUMP_SAMPLES: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[default]
    MinNorm,
    Biorthogonal,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::MinNorm => "min_norm",
            Method::Biorthogonal => "biorthogonal",
        }
    }
}

fn default_grid() -> usize {
    16384
}

fn default_window_threshold() -> f64 {
    1e-4
}

/// A null control problem posed in the original frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlProblem {
    pub variant: ControlShape,
    /// `(y_0, xi_0)` in the original frame.
    pub initial: FourierState,
    #[serde(rename = "T")]
    pub horizon: f64,
    #[serde(rename = "K")]
    pub kmax: usize,
    #[serde(default)]
    pub method: Method,
    /// Intervals of the minimal norm control grid.
    #[serde(default = "default_grid")]
    pub grid: usize,
    /// Samples of the biorthogonal family.
    #[serde(default = "default_grid")]
    pub family_grid: usize,
    #[serde(default = "default_window_threshold")]
    pub window_threshold: f64,
    /// Support `[start, start + length]` of the mean steering profile.
    #[serde(default)]
    pub presteer_omega: Option<(f64, f64)>,
}

impl ControlProblem {
    pub fn new(variant: ControlShape, initial: FourierState, horizon: f64, kmax: usize) -> Self {
        Self {
            variant,
            initial,
            horizon,
            kmax,
            method: Method::MinNorm,
            grid: default_grid(),
            family_grid: default_grid(),
            window_threshold: default_window_threshold(),
            presteer_omega: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kmax < 3 {
            return Err(Error::InvalidTruncation { kmax: self.kmax, min: 3 });
        }
        if !(self.horizon > 2.0 * PI) || !self.horizon.is_finite() {
            return Err(Error::HorizonTooShort { horizon: self.horizon });
        }
        self.initial.validate()?;
        if self.initial.kmax() != self.kmax {
            return Err(Error::TruncationMismatch {
                state: self.initial.kmax(),
                expected: self.kmax,
            });
        }
        if self.grid < 4 {
            return Err(Error::InvalidInput(format!("grid {} is too small", self.grid)));
        }
        if let Some((_, len)) = self.presteer_omega {
            if !(len > 0.0 && len < 2.0 * PI) {
                return Err(Error::InvalidProfile(format!("presteer support length {len} outside (0, 2 pi)")));
            }
        }
        let means = self.initial.pos(0).norm() + self.initial.vel(0).norm();
        if matches!(self.variant, ControlShape::Dipole) && means > 0.0 {
            return Err(Error::MeanObstruction(
                "the dipole control needs initial data with zero means".into(),
            ));
        }
        Ok(())
    }

    /// Whether the two-phase mean steering applies.
    pub fn needs_presteer(&self) -> bool {
        matches!(self.variant, ControlShape::IndicatorDifference { .. })
            && self.initial.pos(0).norm() + self.initial.vel(0).norm() > 0.0
    }

    fn is_dirac(&self) -> bool {
        matches!(self.variant, ControlShape::Dirac)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaEntry {
    pub member: Member,
    pub label: String,
    pub value: Complex64,
}

/// Coefficients of the control in the biorthogonal family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaLedger {
    #[serde(rename = "T")]
    pub horizon: f64,
    pub entries: Vec<AlphaEntry>,
    /// `sum_{k != 0} |beta_k|^{-1} (|k|^6 |c_k| + |k|^4 |d_k|)` on the moving-frame data.
    pub summability: f64,
}

impl AlphaLedger {
    pub fn get(&self, member: Member) -> Complex64 {
        self.entries.iter().find(|e| e.member == member).map_or(ZERO, |e| e.value)
    }
}

/// `alpha` for data `v0` already in the moving frame.
pub fn alpha_from_moving(
    shape: &ControlShape,
    v0: &FourierState,
    horizon: f64,
    position_free: bool,
) -> Result<AlphaLedger> {
    let kmax = v0.kmax();
    let betas = beta_coefficients(shape, kmax)?;
    let beta_scale = betas.iter().map(|b| b.norm()).fold(0.0, f64::max);
    let data_scale = v0
        .pos_slice()
        .iter()
        .chain(v0.vel_slice())
        .map(|c| c.norm())
        .fold(0.0, f64::max);
    let gammas = gamma_coefficients(v0);
    let mut entries = Vec::new();
    let mut summability = 0.0;
    let mut push = |member: Member, value: Complex64| {
        entries.push(AlphaEntry {
            member,
            label: member.label(),
            value,
        })
    };
    for k in v0.modes() {
        let beta = betas[(k + kmax as i64) as usize];
        let empty = v0.pos(k).norm() + v0.vel(k).norm() <= ZERO_TOL * data_scale.max(1e-300);
        if beta.norm() <= ZERO_TOL * beta_scale {
            if empty {
                continue;
            }
            return Err(if k == 0 {
                Error::MeanObstruction(format!("{} control cannot move the mean", shape.name()))
            } else {
                Error::UncontrollableMode { k }
            });
        }
        if k != 0 {
            let a = k.unsigned_abs() as f64;
            summability += (a.powi(6) * v0.pos(k).norm() + a.powi(4) * v0.vel(k).norm()) / beta.norm();
        }
        if is_double(k) {
            let l = eigenvalue(k, Branch::Plus);
            let e = (l * horizon / 2.0).exp();
            let g = gammas.gamma(k, Branch::Plus);
            let alpha = -e * g / beta;
            let tilde = -e * (g * (horizon / 2.0) + gammas.position_pairing(k)) / beta;
            if k == 0 {
                push(Member::Zero, alpha);
                if !position_free && tilde.norm() > 0.0 {
                    return Err(Error::IndexCoverage(
                        "the family has no function dual to t at the zero eigenvalue".into(),
                    ));
                }
            } else {
                push(Member::Double(k), alpha);
                push(Member::DoubleTilde(k), tilde);
            }
        } else {
            for (branch, member) in [(Branch::Plus, Member::Plus(k)), (Branch::Minus, Member::Minus(k))] {
                let l = eigenvalue(k, branch);
                push(member, -(l * horizon / 2.0).exp() * gammas.gamma(k, branch) / beta);
            }
        }
    }
    Ok(AlphaLedger {
        horizon,
        entries,
        summability,
    })
}

/// `alpha` coefficients of a single-phase problem.
pub fn alpha_coefficients(problem: &ControlProblem) -> Result<AlphaLedger> {
    problem.validate()?;
    let v0 = frame_transform(&problem.initial, FrameDirection::ToMoving);
    alpha_from_moving(&problem.variant, &v0, problem.horizon, problem.is_dirac())
}

/// `h(t) = sum alpha psi(T/2 - t)` on the family's time grid restricted to `[0, T]`.
pub fn assemble_control(ledger: &AlphaLedger, family: &BiorthogonalFamily) -> Result<SampledControl> {
    if (ledger.horizon - family.horizon).abs() > 1e-12 * family.horizon {
        return Err(Error::IndexCoverage(format!(
            "ledger horizon {} differs from family horizon {}",
            ledger.horizon, family.horizon
        )));
    }
    let m = family.grid.half_span;
    let centre = family.grid.samples / 2;
    let mut samples = vec![ZERO; 2 * m + 1];
    for e in &ledger.entries {
        if e.value == ZERO {
            continue;
        }
        let psi = family
            .get(e.member)
            .ok_or_else(|| Error::IndexCoverage(format!("family lacks {}", e.label)))?;
        for (j, s) in samples.iter_mut().enumerate() {
            *s += e.value * psi.samples[centre + m - j];
        }
    }
    Ok(SampledControl {
        t0: 0.0,
        t1: family.horizon,
        samples,
    })
}

/// `sum |alpha| ||psi||`, the triangle-inequality bound on `||h||`.
pub fn control_norm_bound(ledger: &AlphaLedger, family: &BiorthogonalFamily) -> f64 {
    ledger
        .entries
        .iter()
        .filter_map(|e| family.get(e.member).map(|f| e.value.norm() * family.norm(f)))
        .sum()
}

/// `S(s) = phi(s)/(phi(s) + phi(1-s))` with `phi(s) = e^{-1/s}`, and its first two derivatives.
pub fn smooth_step(s: f64) -> (f64, f64, f64) {
    if s <= 0.0 {
        return (0.0, 0.0, 0.0);
    }
    if s >= 1.0 {
        return (1.0, 0.0, 0.0);
    }
    let r = 1.0 - s;
    let g = 1.0 / s - 1.0 / r;
    let g1 = -1.0 / (s * s) - 1.0 / (r * r);
    let g2 = 2.0 / (s * s * s) - 2.0 / (r * r * r);
    let q = (-g.abs()).exp();
    let val = if g > 0.0 { q / (1.0 + q) } else { 1.0 / (1.0 + q) };
    let w = q / ((1.0 + q) * (1.0 + q));
    let d1 = -w * g1;
    let d2 = -d1 * (1.0 - 2.0 * val) * g1 - w * g2;
    (val, d1, d2)
}

/// `varpi(t) = 1 - S((t - eps/4) / (eps/2))`, equal to one near `0` and zero near `eps`.
pub fn cutoff(t: f64, eps: f64) -> (f64, f64, f64) {
    let c = 2.0 / eps;
    let (s, s1, s2) = smooth_step((t - eps / 4.0) * c);
    (1.0 - s, -s1 * c, -s2 * c * c)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Presteer {
    pub eps: f64,
    /// `b` as Fourier coefficients `int b e^{-ikx} dx`, `k = -K..=K`, with `int b = 1`.
    pub profile: Vec<Complex64>,
    pub control: SampledControl,
}

/// Mean steering on `[0, eps]`: `h(t) = d^2/dt^2 (2 pi (c0 + d0 t) varpi(t))` through a unit bump on `omega`.
pub fn presteer_mean(
    c0: Complex64,
    d0: Complex64,
    eps: f64,
    omega: (f64, f64),
    kmax: usize,
    intervals: usize,
) -> Result<Presteer> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::InvalidInput(format!("eps must be positive, got {eps}")));
    }
    let (start, len) = omega;
    if !(len > 0.0) {
        return Err(Error::InvalidProfile(format!("empty bump support {len}")));
    }
    let dx = len / BUMP_SAMPLES as f64;
    let xs: Vec<f64> = (0..BUMP_SAMPLES).map(|j| start + (j as f64 + 0.5) * dx).collect();
    let raw: Vec<f64> = xs
        .iter()
        .map(|x| {
            let r = 2.0 * (x - start) / len - 1.0;
            if r.abs() < 1.0 {
                (-1.0 / (1.0 - r * r)).exp()
            } else {
                0.0
            }
        })
        .collect();
    let mass: f64 = raw.iter().sum::<f64>() * dx;
    let k = kmax as i64;
    let profile = (-k..=k)
        .map(|j| {
            raw.iter()
                .zip(&xs)
                .map(|(b, x)| Complex64::from_polar(b / mass, -(j as f64) * x))
                .sum::<Complex64>()
                * dx
        })
        .collect();
    let control = SampledControl::from_fn(0.0, eps, intervals, |t| {
        let (_, w1, w2) = cutoff(t, eps);
        (d0 * (2.0 * w1) + (c0 + d0 * t) * w2) * (2.0 * PI)
    });
    Ok(Presteer { eps, profile, control })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlPhase {
    pub name: String,
    /// Spatial profile of this phase in the moving frame.
    pub profile: ControlShape,
    pub control: SampledControl,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseWindow {
    pub phase: String,
    pub t_start: f64,
    pub t_end: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PresteerReport {
    pub eps: f64,
    /// `<v(eps), 1>` and `<v_t(eps), 1>`.
    pub position_mean: f64,
    pub velocity_mean: f64,
    pub control_l2_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiorthogonalRoute {
    pub family_samples: usize,
    pub max_window_tail: f64,
    /// Normalized moment residual of the family control before the correction solve.
    pub residual_before_polish: f64,
    pub control_l2_norm: f64,
    pub norm_bound: f64,
    pub summability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanCheck {
    /// `<v(0),1> + T <v_t(0),1> + beta_0 int (T - t) h dt`.
    pub predicted: f64,
    pub simulated: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisReport {
    pub method: Method,
    pub variant: String,
    #[serde(rename = "T")]
    pub horizon: f64,
    #[serde(rename = "K")]
    pub kmax: usize,
    /// Largest normalized moment residual of the nulling phase.
    pub moment_residual_max: f64,
    pub moment_residual_raw: f64,
    /// `||final|| / ||initial||` in the original frame, `H^0 x H^{-1}`-type norm.
    pub final_norm_ratio: f64,
    pub initial_norm: f64,
    pub final_norm: f64,
    /// Final position mean excluded from the ratio.
    pub mean_excluded: bool,
    pub gram_condition: Option<f64>,
    pub control_l2_norm: f64,
    pub imaginary_fraction: f64,
    pub phase_timings: Vec<PhaseWindow>,
    pub presteer: Option<PresteerReport>,
    pub biorthogonal: Option<BiorthogonalRoute>,
    pub mean_check: Option<MeanCheck>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineOutput {
    pub phases: Vec<ControlPhase>,
    /// Final state in the original frame.
    pub final_state: FourierState,
    pub report: SynthesisReport,
}

struct Nulling {
    control: SampledControl,
    system: MomentSystem,
    gram_condition: Option<f64>,
    biorthogonal: Option<BiorthogonalRoute>,
}

fn real_part(c: &SampledControl) -> SampledControl {
    SampledControl {
        t0: c.t0,
        t1: c.t1,
        samples: c.samples.iter().map(|s| Complex64::new(s.re, 0.0)).collect(),
    }
}

fn null_moving(problem: &ControlProblem, shape: &ControlShape, v0: &FourierState, horizon: f64) -> Result<Nulling> {
    let system = build_moment_system(shape, v0, horizon, problem.kmax)?;
    match problem.method {
        Method::MinNorm => {
            let sol = solve_min_norm(&system, problem.grid)?;
            Ok(Nulling {
                control: sol.control,
                system,
                gram_condition: Some(sol.gram_condition),
                biorthogonal: None,
            })
        }
        Method::Biorthogonal => {
            let ledger = alpha_from_moving(shape, v0, horizon, problem.is_dirac())?;
            let config = FamilyConfig {
                window_threshold: problem.window_threshold,
                ..FamilyConfig::new(horizon, problem.kmax as i64, problem.family_grid)
            };
            let family = build_family(&config)?;
            let raw = real_part(&assemble_control(&ledger, &family)?);
            let before = verify_moments(&raw, &system)?;
            let weights = boole_weights(raw.intervals(), raw.dt())?;
            let mut correction_system = system.clone();
            for c in correction_system.constraints.iter_mut() {
                c.rhs -= control_moment(&raw, &weights, c.lambda, c.degree);
            }
            let fix = solve_min_norm(&correction_system, raw.intervals())?;
            let control = SampledControl {
                t0: 0.0,
                t1: horizon,
                samples: raw.samples.iter().zip(&fix.control.samples).map(|(a, b)| a + b).collect(),
            };
            let route = BiorthogonalRoute {
                family_samples: family.grid.samples,
                max_window_tail: family.functions.iter().map(|f| f.window_tail).fold(0.0, f64::max),
                residual_before_polish: before.max_normalized,
                control_l2_norm: raw.l2_norm()?,
                norm_bound: control_norm_bound(&ledger, &family),
                summability: ledger.summability,
            };
            Ok(Nulling {
                control,
                system,
                gram_condition: Some(fix.gram_condition),
                biorthogonal: Some(route),
            })
        }
    }
}

fn shifted(c: &SampledControl, t0: f64) -> SampledControl {
    SampledControl {
        t0: c.t0 + t0,
        t1: c.t1 + t0,
        samples: c.samples.clone(),
    }
}

/// Solves the problem, simulates the closed loop and reports.
pub fn run_pipeline(problem: &ControlProblem) -> Result<PipelineOutput> {
    problem.validate()?;
    let kmax = problem.kmax;
    let t = problem.horizon;
    let v0 = frame_transform(&problem.initial, FrameDirection::ToMoving);
    let mut phases = Vec::new();
    let mut timings = Vec::new();
    let mut presteer_report = None;

    let (start, v_start, v_true) = if problem.needs_presteer() {
        let eps = (t - 2.0 * PI) / 2.0;
        let omega = match (problem.presteer_omega, &problem.variant) {
            (Some(o), _) => o,
            (None, ControlShape::IndicatorDifference { offset, sigma }) => (*offset, 2.0 * sigma * PI),
            _ => unreachable!("presteer only follows an indicator difference"),
        };
        let needed = (16.0 * (kmax * kmax) as f64 * eps).ceil() as usize;
        let intervals = needed.max(4096).div_ceil(4) * 4;
        let pre = presteer_mean(v0.pos(0), v0.vel(0), eps, omega, kmax, intervals)?;
        let v_eps = evolve_forced(&v0, &pre.profile, &pre.control)?;
        presteer_report = Some(PresteerReport {
            eps,
            position_mean: v_eps.position_mean().norm(),
            velocity_mean: v_eps.velocity_mean().norm(),
            control_l2_norm: pre.control.l2_norm()?,
        });
        timings.push(PhaseWindow {
            phase: "presteer".into(),
            t_start: 0.0,
            t_end: eps,
        });
        phases.push(ControlPhase {
            name: "presteer".into(),
            profile: ControlShape::Distributed {
                profile: SpatialProfile::Coefficients(pre.profile.clone()),
            },
            control: pre.control,
        });
        // the steered means vanish up to quadrature error
        let mut v = v_eps.clone();
        v.set(0, ZERO, ZERO);
        (eps, v, v_eps)
    } else {
        (0.0, v0.clone(), v0.clone())
    };

    let horizon = t - start;
    let nulling = null_moving(problem, &problem.variant, &v_start, horizon)?;
    let report_moments = verify_moments(&nulling.control, &nulling.system)?;
    let betas = beta_coefficients(&problem.variant, kmax)?;

    let v_final = evolve_forced(&v_true, &betas, &nulling.control)?;
    let y_final = frame_transform_at(&v_final, FrameDirection::FromMoving, t);

    let dirac = problem.is_dirac();
    let mean_check = if dirac {
        let weights = boole_weights(nulling.control.intervals(), nulling.control.dt())?;
        let drift = control_moment(&nulling.control, &weights, ZERO, 1) * betas[kmax];
        let predicted = (v_start.position_mean() + v_start.velocity_mean() * horizon + drift).re;
        let simulated = v_final.position_mean().re;
        Some(MeanCheck {
            predicted,
            simulated,
            error: (predicted - simulated).abs(),
        })
    } else {
        None
    };
    let mut compared = y_final.clone();
    if dirac {
        compared.set(0, ZERO, compared.vel(0));
    }
    let initial_norm = sobolev_norm(&problem.initial, 0.0);
    let final_norm = sobolev_norm(&compared, 0.0);
    let ratio = if initial_norm > 0.0 { final_norm / initial_norm } else { final_norm };

    timings.push(PhaseWindow {
        phase: "null_control".into(),
        t_start: start,
        t_end: t,
    });
    let control = shifted(&nulling.control, start);
    let report = SynthesisReport {
        method: problem.method,
        variant: problem.variant.name().into(),
        horizon: t,
        kmax,
        moment_residual_max: report_moments.max_normalized,
        moment_residual_raw: report_moments.max_raw,
        final_norm_ratio: ratio,
        initial_norm,
        final_norm,
        mean_excluded: dirac,
        gram_condition: nulling.gram_condition,
        control_l2_norm: control.l2_norm()?,
        imaginary_fraction: control.imaginary_fraction(),
        phase_timings: timings,
        presteer: presteer_report,
        biorthogonal: nulling.biorthogonal,
        mean_check,
    };
    phases.push(ControlPhase {
        name: "null_control".into(),
        profile: problem.variant.clone(),
        control,
    });
    Ok(PipelineOutput {
        phases,
        final_state: y_final,
        report,
    })
}

/// Residuals recomputed from stored control phases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayReport {
    pub moment_residual_max: f64,
    pub moment_residual_raw: f64,
    pub final_norm_ratio: f64,
    pub initial_norm: f64,
    pub final_norm: f64,
    pub presteer: Option<PresteerReport>,
    pub final_state: FourierState,
}

/// Re-simulates `phases` from the initial data of `problem` and recomputes every residual.
///
/// The phases must tile `[0, T]` in order and the last one must be the nulling phase.
pub fn replay(problem: &ControlProblem, phases: &[ControlPhase]) -> Result<ReplayReport> {
    problem.validate()?;
    let kmax = problem.kmax;
    let t = problem.horizon;
    let Some((last, early)) = phases.split_last() else {
        return Err(Error::InvalidInput("no control phases".into()));
    };
    let tol = 1e-9 * t;
    let mut v = frame_transform(&problem.initial, FrameDirection::ToMoving);
    let mut clock = 0.0;
    let mut presteer = None;
    for phase in early {
        if (phase.control.t0 - clock).abs() > tol {
            return Err(Error::InvalidInput(format!("phase {} starts at {}", phase.name, phase.control.t0)));
        }
        let betas = beta_coefficients(&phase.profile, kmax)?;
        v = evolve_forced(&v, &betas, &phase.control)?;
        clock = phase.control.t1;
        presteer = Some(PresteerReport {
            eps: clock,
            position_mean: v.position_mean().norm(),
            velocity_mean: v.velocity_mean().norm(),
            control_l2_norm: phase.control.l2_norm()?,
        });
    }
    if (last.control.t0 - clock).abs() > tol || (last.control.t1 - t).abs() > tol {
        return Err(Error::InvalidInput(format!(
            "nulling phase spans [{}, {}], expected [{clock}, {t}]",
            last.control.t0, last.control.t1
        )));
    }
    let mut v_start = v.clone();
    if !early.is_empty() {
        v_start.set(0, ZERO, ZERO);
    }
    let system = build_moment_system(&last.profile, &v_start, t - clock, kmax)?;
    let local = shifted(&last.control, -clock);
    let moments = verify_moments(&local, &system)?;
    let betas = beta_coefficients(&last.profile, kmax)?;
    let v_final = evolve_forced(&v, &betas, &last.control)?;
    let mut y_final = frame_transform_at(&v_final, FrameDirection::FromMoving, t);
    if problem.is_dirac() {
        y_final.set(0, ZERO, y_final.vel(0));
    }
    let initial_norm = sobolev_norm(&problem.initial, 0.0);
    let final_norm = sobolev_norm(&y_final, 0.0);
    Ok(ReplayReport {
        moment_residual_max: moments.max_normalized,
        moment_residual_raw: moments.max_raw,
        final_norm_ratio: if initial_norm > 0.0 { final_norm / initial_norm } else { final_norm },
        initial_norm,
        final_norm,
        presteer,
        final_state: y_final,
    })
}
