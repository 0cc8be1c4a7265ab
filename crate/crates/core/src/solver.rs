//! Modal solution of the moving-frame equation.
//!
//! Each Fourier mode obeys `u'' + (k^2 - 2ik) u' - i k^3 u = (beta_k / 2 pi) h(t)`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::boole_weights;
use crate::spectrum::{eigenvalue, is_double, Branch};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Truncated Fourier coefficients of position and velocity, indexed `k = -K..=K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FourierState {
    #[serde(rename = "K")]
    kmax: usize,
    pos: Vec<Complex64>,
    vel: Vec<Complex64>,
}

impl FourierState {
    pub fn zeros(kmax: usize) -> Self {
        Self {
            kmax,
            pos: vec![ZERO; 2 * kmax + 1],
            vel: vec![ZERO; 2 * kmax + 1],
        }
    }

    pub fn from_parts(kmax: usize, pos: Vec<Complex64>, vel: Vec<Complex64>) -> Result<Self> {
        let n = 2 * kmax + 1;
        if pos.len() != n || vel.len() != n {
            return Err(Error::InvalidInput(format!(
                "state with K = {kmax} needs {n} coefficients, got {} and {}",
                pos.len(),
                vel.len()
            )));
        }
        Ok(Self { kmax, pos, vel })
    }

    /// Checks the vector lengths after deserialization.
    pub fn validate(&self) -> Result<()> {
        let n = 2 * self.kmax + 1;
        if self.pos.len() != n || self.vel.len() != n {
            return Err(Error::InvalidInput(format!(
                "state with K = {} needs {n} coefficients, got {} and {}",
                self.kmax,
                self.pos.len(),
                self.vel.len()
            )));
        }
        if self.pos.iter().chain(&self.vel).any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::InvalidInput("state has non-finite coefficients".into()));
        }
        Ok(())
    }

    pub fn kmax(&self) -> usize {
        self.kmax
    }

    pub fn modes(&self) -> std::ops::RangeInclusive<i64> {
        let k = self.kmax as i64;
        -k..=k
    }

    fn idx(&self, k: i64) -> usize {
        debug_assert!(k.unsigned_abs() as usize <= self.kmax);
        (k + self.kmax as i64) as usize
    }

    pub fn pos(&self, k: i64) -> Complex64 {
        self.pos[self.idx(k)]
    }

    pub fn vel(&self, k: i64) -> Complex64 {
        self.vel[self.idx(k)]
    }

    pub fn set(&mut self, k: i64, pos: Complex64, vel: Complex64) {
        let i = self.idx(k);
        self.pos[i] = pos;
        self.vel[i] = vel;
    }

    pub fn pos_slice(&self) -> &[Complex64] {
        &self.pos
    }

    pub fn vel_slice(&self) -> &[Complex64] {
        &self.vel
    }

    /// Copy padded with zeros or truncated to `kmax`.
    pub fn resized(&self, kmax: usize) -> Self {
        let mut out = Self::zeros(kmax);
        let common = kmax.min(self.kmax) as i64;
        for k in -common..=common {
            out.set(k, self.pos(k), self.vel(k));
        }
        out
    }

    /// Largest violation of `c_{-k} = conj(c_k)` over both components.
    pub fn reality_defect(&self) -> f64 {
        self.modes()
            .map(|k| {
                (self.pos(-k) - self.pos(k).conj())
                    .norm()
                    .max((self.vel(-k) - self.vel(k).conj()).norm())
            })
            .fold(0.0, f64::max)
    }

    /// `<u, 1>` for position, equal to `2 pi` times the zero coefficient.
    pub fn position_mean(&self) -> Complex64 {
        self.pos(0) * (2.0 * PI)
    }

    pub fn velocity_mean(&self) -> Complex64 {
        self.vel(0) * (2.0 * PI)
    }
}

/// Uniformly sampled scalar control on `[t0, t1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledControl {
    pub t0: f64,
    pub t1: f64,
    pub samples: Vec<Complex64>,
}

impl SampledControl {
    pub fn from_fn(t0: f64, t1: f64, intervals: usize, f: impl Fn(f64) -> Complex64) -> Self {
        let dt = (t1 - t0) / intervals as f64;
        let samples = (0..=intervals).map(|j| f(t0 + j as f64 * dt)).collect();
        Self { t0, t1, samples }
    }

    pub fn zeros(t0: f64, t1: f64, intervals: usize) -> Self {
        Self {
            t0,
            t1,
            samples: vec![ZERO; intervals + 1],
        }
    }

    pub fn intervals(&self) -> usize {
        self.samples.len().saturating_sub(1)
    }

    pub fn duration(&self) -> f64 {
        self.t1 - self.t0
    }

    pub fn dt(&self) -> f64 {
        self.duration() / self.intervals() as f64
    }

    pub fn time(&self, j: usize) -> f64 {
        self.t0 + j as f64 * self.dt()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t1 > self.t0) || self.samples.len() < 5 {
            return Err(Error::InvalidInput(
                "control needs t1 > t0 and at least five samples".into(),
            ));
        }
        Ok(())
    }

    /// Largest imaginary part relative to the largest modulus.
    pub fn imaginary_fraction(&self) -> f64 {
        let m = self.samples.iter().map(|s| s.norm()).fold(0.0, f64::max);
        if m == 0.0 {
            return 0.0;
        }
        self.samples.iter().map(|s| s.im.abs()).fold(0.0, f64::max) / m
    }

    pub fn max_abs(&self) -> f64 {
        self.samples.iter().map(|s| s.norm()).fold(0.0, f64::max)
    }

    /// Discrete L^2 norm with Boole weights.
    pub fn l2_norm(&self) -> Result<f64> {
        let w = boole_weights(self.intervals(), self.dt())?;
        Ok(w.iter()
            .zip(&self.samples)
            .map(|(w, s)| w * s.norm_sqr())
            .sum::<f64>()
            .sqrt())
    }
}

/// Minimum number of intervals for a uniform grid on `len` to resolve the exponential `lambda`.
pub fn intervals_needed(lambda: Complex64, len: f64) -> usize {
    let rate = lambda.re.abs().max(lambda.im.abs() / (2.0 * PI));
    (16.0 * rate * len).ceil() as usize
}

fn check_resolution(lambda: Complex64, control: &SampledControl) -> Result<()> {
    let needed = intervals_needed(lambda, control.duration());
    if control.intervals() < needed {
        return Err(Error::RefinementRequired {
            needed,
            detail: format!(
                "exponential rate {lambda} is under-resolved by {} intervals",
                control.intervals()
            ),
        });
    }
    Ok(())
}

/// `int_{t0}^{t1} (t1 - t)^degree exp(lambda (t1 - t)) h(t) dt` by composite Boole quadrature.
pub fn control_moment(
    control: &SampledControl,
    weights: &[f64],
    lambda: Complex64,
    degree: u32,
) -> Complex64 {
    let dt = control.dt();
    let n = control.intervals();
    let mut acc = ZERO;
    for (j, (w, h)) in weights.iter().zip(&control.samples).enumerate() {
        if *w == 0.0 || (h.re == 0.0 && h.im == 0.0) {
            continue;
        }
        let tau = (n - j) as f64 * dt;
        let kernel = (lambda * tau).exp() * tau.powi(degree as i32);
        acc += kernel * *h * *w;
    }
    acc
}

/// Modal amplitudes of a state in the eigenbasis of each mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModeAmplitudes {
    /// `u = a^+ e^{lambda^+ t} + a^- e^{lambda^- t}`
    Split { plus: Complex64, minus: Complex64 },
    /// `u = a e^{lambda t} + a_tilde t e^{lambda t}`
    Jordan { a: Complex64, a_tilde: Complex64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModalCoefficients {
    kmax: usize,
    modes: Vec<ModeAmplitudes>,
}

impl ModalCoefficients {
    pub fn kmax(&self) -> usize {
        self.kmax
    }

    pub fn get(&self, k: i64) -> ModeAmplitudes {
        self.modes[(k + self.kmax as i64) as usize]
    }
}

/// Expands each mode of `state` in its eigenbasis.
pub fn decompose(state: &FourierState) -> ModalCoefficients {
    let modes = state
        .modes()
        .map(|k| {
            let (c, d) = (state.pos(k), state.vel(k));
            if is_double(k) {
                let l = eigenvalue(k, Branch::Plus);
                ModeAmplitudes::Jordan { a: c, a_tilde: d - l * c }
            } else {
                let lp = eigenvalue(k, Branch::Plus);
                let lm = eigenvalue(k, Branch::Minus);
                ModeAmplitudes::Split {
                    plus: (d - lm * c) / (lp - lm),
                    minus: (d - lp * c) / (lm - lp),
                }
            }
        })
        .collect();
    ModalCoefficients {
        kmax: state.kmax(),
        modes,
    }
}

/// Exact homogeneous evolution over time `t`.
pub fn evolve_free(state: &FourierState, t: f64) -> FourierState {
    let coeffs = decompose(state);
    let mut out = FourierState::zeros(state.kmax());
    for k in state.modes() {
        let (p, v) = match coeffs.get(k) {
            ModeAmplitudes::Split { plus, minus } => {
                let lp = eigenvalue(k, Branch::Plus);
                let lm = eigenvalue(k, Branch::Minus);
                let ep = plus * (lp * t).exp();
                let em = minus * (lm * t).exp();
                (ep + em, ep * lp + em * lm)
            }
            ModeAmplitudes::Jordan { a, a_tilde } => {
                let l = eigenvalue(k, Branch::Plus);
                let e = (l * t).exp();
                (
                    e * (a + a_tilde * t),
                    e * (a * l + a_tilde * (1.0 + l * t)),
                )
            }
        };
        out.set(k, p, v);
    }
    out
}

/// Evolves `state` across the control interval with forcing `(beta_k / 2 pi) h(t)` in mode `k`.
///
/// `betas` holds `beta_k` for `k = -K..=K`.
pub fn evolve_forced(
    state: &FourierState,
    betas: &[Complex64],
    control: &SampledControl,
) -> Result<FourierState> {
    let kmax = state.kmax();
    if betas.len() != 2 * kmax + 1 {
        return Err(Error::TruncationMismatch {
            state: kmax,
            expected: (betas.len().saturating_sub(1)) / 2,
        });
    }
    control.validate()?;
    let len = control.duration();
    let weights = boole_weights(control.intervals(), control.dt())?;
    let mut out = FourierState::zeros(kmax);
    for k in state.modes() {
        let beta = betas[(k + kmax as i64) as usize];
        let scale = beta / (2.0 * PI);
        let forced = beta != ZERO;
        let (c, d) = (state.pos(k), state.vel(k));
        let (p, v) = if is_double(k) {
            let l = eigenvalue(k, Branch::Plus);
            let (m0, m1) = if forced {
                check_resolution(l, control)?;
                (
                    control_moment(control, &weights, l, 0) * scale,
                    control_moment(control, &weights, l, 1) * scale,
                )
            } else {
                (ZERO, ZERO)
            };
            let e = (l * len).exp();
            let e0 = d - l * c;
            let u = e * (c + e0 * len) + m1;
            let ee = e * e0 + m0;
            (u, ee + l * u)
        } else {
            let lp = eigenvalue(k, Branch::Plus);
            let lm = eigenvalue(k, Branch::Minus);
            let (mp, mm) = if forced {
                check_resolution(lp, control)?;
                check_resolution(lm, control)?;
                (
                    control_moment(control, &weights, lp, 0) * scale,
                    control_moment(control, &weights, lm, 0) * scale,
                )
            } else {
                (ZERO, ZERO)
            };
            let ep = (d - lm * c) * (lp * len).exp() + mp;
            let em = (d - lp * c) * (lm * len).exp() + mm;
            let u = (ep - em) / (lp - lm);
            (u, ep + lm * u)
        };
        out.set(k, p, v);
    }
    Ok(out)
}

/// Direction of the change between the fixed frame `y` and the moving frame `v(x, t) = y(x + t, t)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameDirection {
    ToMoving,
    FromMoving,
}

/// Frame change at `t = 0`.
pub fn frame_transform(state: &FourierState, direction: FrameDirection) -> FourierState {
    frame_transform_at(state, direction, 0.0)
}

/// Frame change at time `t`.
pub fn frame_transform_at(state: &FourierState, direction: FrameDirection, t: f64) -> FourierState {
    let mut out = FourierState::zeros(state.kmax());
    for k in state.modes() {
        let ik = Complex64::new(0.0, k as f64);
        let (c, d) = (state.pos(k), state.vel(k));
        let (p, v) = match direction {
            FrameDirection::ToMoving => {
                let ph = (ik * t).exp();
                (c * ph, (d + ik * c) * ph)
            }
            FrameDirection::FromMoving => {
                let ph = (-ik * t).exp();
                (c * ph, (d - ik * c) * ph)
            }
        };
        out.set(k, p, v);
    }
    out
}

/// `sqrt(sum (k^2+1)^s ((k^2+1)|c_k|^2 + |d_k|^2))` over the stored coefficients.
pub fn sobolev_norm(state: &FourierState, s: f64) -> f64 {
    state
        .modes()
        .map(|k| {
            let w = (k * k) as f64 + 1.0;
            w.powf(s) * (w * state.pos(k).norm_sqr() + state.vel(k).norm_sqr())
        })
        .sum::<f64>()
        .sqrt()
}

/// `|c_0| + |d_0| + sum_{k != 0} |k|^9 |c_k| + |k|^7 |d_k|`.
pub fn norm_w(state: &FourierState) -> f64 {
    state
        .modes()
        .map(|k| {
            if k == 0 {
                state.pos(0).norm() + state.vel(0).norm()
            } else {
                let a = k.unsigned_abs() as f64;
                a.powi(9) * state.pos(k).norm() + a.powi(7) * state.vel(k).norm()
            }
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn single_plus_mode_evolves_exactly() {
        let l = eigenvalue(5, Branch::Plus);
        let mut s = FourierState::zeros(6);
        s.set(5, c(1.0, 0.0), l);
        let out = evolve_free(&s, 1.0);
        assert!((out.pos(5) - l.exp()).norm() < 1e-14);
        assert!((out.vel(5) - l * l.exp()).norm() < 1e-14);
    }

    #[test]
    fn jordan_mode_grows_polynomially() {
        let mut s = FourierState::zeros(3);
        s.set(0, c(0.0, 0.0), c(1.0, 0.0));
        let out = evolve_free(&s, 2.5);
        assert!((out.pos(0) - c(2.5, 0.0)).norm() < 1e-15);
        assert!((out.vel(0) - c(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn decompose_reconstructs_state() {
        let mut s = FourierState::zeros(4);
        for k in s.modes() {
            s.set(k, c(k as f64, 0.5), c(1.0, -(k as f64)));
        }
        let m = decompose(&s);
        for k in s.modes() {
            let (p, v) = match m.get(k) {
                ModeAmplitudes::Split { plus, minus } => {
                    let lp = eigenvalue(k, Branch::Plus);
                    let lm = eigenvalue(k, Branch::Minus);
                    (plus + minus, plus * lp + minus * lm)
                }
                ModeAmplitudes::Jordan { a, a_tilde } => {
                    (a, a * eigenvalue(k, Branch::Plus) + a_tilde)
                }
            };
            assert!((p - s.pos(k)).norm() < 1e-13);
            assert!((v - s.vel(k)).norm() < 1e-13);
        }
    }

    #[test]
    fn frame_example() {
        // y0 = cos x, xi0 = sin x
        let mut s = FourierState::zeros(3);
        s.set(1, c(0.5, 0.0), c(0.0, -0.5));
        s.set(-1, c(0.5, 0.0), c(0.0, 0.5));
        let v = frame_transform(&s, FrameDirection::ToMoving);
        assert!(v.vel(1).norm() < 1e-16);
        assert!(v.vel(-1).norm() < 1e-16);
        assert_eq!(v.pos(1), s.pos(1));
    }

    #[test]
    fn norms() {
        let mut s = FourierState::zeros(3);
        s.set(2, c(1.0, 0.0), c(0.0, 0.0));
        assert_eq!(norm_w(&s), 512.0);
        let mut t = FourierState::zeros(3);
        t.set(1, c(1.0, 0.0), c(0.0, 0.0));
        assert_relative_eq!(sobolev_norm(&t, 0.0), 2f64.sqrt());
    }

    #[test]
    fn forced_matches_free_when_control_vanishes() {
        let mut s = FourierState::zeros(4);
        s.set(3, c(1.0, 1.0), c(0.0, 2.0));
        s.set(2, c(0.3, 0.0), c(1.0, 0.0));
        let betas = vec![c(1.0, 0.0); 9];
        let h = SampledControl::zeros(0.0, 1.5, 512);
        let a = evolve_forced(&s, &betas, &h).unwrap();
        let b = evolve_free(&s, 1.5);
        for k in s.modes() {
            assert!((a.pos(k) - b.pos(k)).norm() < 1e-13);
            assert!((a.vel(k) - b.vel(k)).norm() < 1e-13);
        }
    }

    #[test]
    fn constant_forcing_on_mean_mode() {
        // u'' = 1/(2 pi) * 2 pi = 1 for beta_0 = 2 pi
        let s = FourierState::zeros(3);
        let mut betas = vec![c(0.0, 0.0); 7];
        betas[3] = c(2.0 * PI, 0.0);
        let h = SampledControl::from_fn(0.0, 2.0, 64, |_| c(1.0, 0.0));
        let out = evolve_forced(&s, &betas, &h).unwrap();
        assert!((out.pos(0) - c(2.0, 0.0)).norm() < 1e-13);
        assert!((out.vel(0) - c(2.0, 0.0)).norm() < 1e-13);
    }

    #[test]
    fn coarse_grid_is_rejected() {
        let s = FourierState::zeros(6);
        let betas = vec![c(1.0, 0.0); 13];
        let h = SampledControl::zeros(0.0, 7.0, 64);
        assert!(matches!(
            evolve_forced(&s, &betas, &h),
            Err(Error::RefinementRequired { .. })
        ));
    }

    fn arb_state(kmax: usize) -> impl Strategy<Value = FourierState> {
        prop::collection::vec(-1.0f64..1.0, 4 * (2 * kmax + 1)).prop_map(move |v| {
            let n = 2 * kmax + 1;
            let pos = (0..n).map(|i| c(v[2 * i], v[2 * i + 1])).collect();
            let vel = (0..n).map(|i| c(v[2 * n + 2 * i], v[2 * n + 2 * i + 1])).collect();
            FourierState::from_parts(kmax, pos, vel).unwrap()
        })
    }

    proptest! {
        #[test]
        fn semigroup(s in arb_state(5), t1 in 0.0f64..2.0, t2 in 0.0f64..2.0) {
            let a = evolve_free(&evolve_free(&s, t1), t2);
            let b = evolve_free(&s, t1 + t2);
            for k in s.modes() {
                prop_assert!((a.pos(k) - b.pos(k)).norm() < 1e-11);
                prop_assert!((a.vel(k) - b.vel(k)).norm() < 1e-9);
            }
        }

        #[test]
        fn frame_round_trip(s in arb_state(4), t in -5.0f64..5.0) {
            let back = frame_transform_at(
                &frame_transform_at(&s, FrameDirection::ToMoving, t),
                FrameDirection::FromMoving,
                t,
            );
            for k in s.modes() {
                prop_assert!((back.pos(k) - s.pos(k)).norm() < 1e-13);
                prop_assert!((back.vel(k) - s.vel(k)).norm() < 1e-12);
            }
        }

        #[test]
        fn forced_is_affine_in_control(
            s in arb_state(4),
            a in -2.0f64..2.0,
            w in 0.5f64..3.0,
        ) {
            let betas: Vec<Complex64> = (-4..=4).map(|k| c(0.0, k as f64)).collect();
            let zero = FourierState::zeros(4);
            let h1 = SampledControl::from_fn(0.0, 1.0, 1024, |t| c((w * t).sin(), 0.0));
            let h2 = SampledControl::from_fn(0.0, 1.0, 1024, |t| c(a * (w * t).sin(), 0.0));
            let free = evolve_free(&s, 1.0);
            let full = evolve_forced(&s, &betas, &h2).unwrap();
            let unit = evolve_forced(&zero, &betas, &h1).unwrap();
            for k in s.modes() {
                let p = free.pos(k) + unit.pos(k) * a;
                prop_assert!((full.pos(k) - p).norm() < 1e-11);
            }
        }
    }
}
