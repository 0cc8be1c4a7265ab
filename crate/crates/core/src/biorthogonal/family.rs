//! Sampled family `psi` obtained by a band-limited inverse Fourier transform of the interpolants.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::interpolant::{InterpolantSet, Member};
use crate::error::{Error, Result};
use crate::quadrature::exp_moment;
use crate::spectrum::{classify, Branch, SpectralClass};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
/// Extra time covered on each side of `[-T/2, T/2]`.
const MARGIN: f64 = 1.0;
const FIT_BINS: usize = 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyConfig {
    #[serde(rename = "T")]
    pub horizon: f64,
    pub kmax: i64,
    /// Number of samples, a power of two.
    pub grid: usize,
    pub truncation: usize,
    /// Largest admissible fraction of `|I|^2` beyond the spectral window.
    pub window_threshold: f64,
}

impl FamilyConfig {
    pub fn new(horizon: f64, kmax: i64, grid: usize) -> Self {
        Self {
            horizon,
            kmax,
            grid,
            truncation: 2000,
            window_threshold: 1e-4,
        }
    }
}

/// Time and frequency grids shared by every member.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FamilyGrid {
    pub samples: usize,
    pub dt: f64,
    /// `T/2 = half_span * dt`.
    pub half_span: usize,
    /// Spectral window `[-W, W]`, `W = pi/dt`.
    pub window: f64,
}

impl FamilyGrid {
    pub fn new(horizon: f64, samples: usize) -> Result<Self> {
        if samples < 1024 || !samples.is_power_of_two() {
            return Err(Error::InvalidInput(format!("grid must be a power of two >= 1024, got {samples}")));
        }
        if !(horizon > 2.0 * PI) {
            return Err(Error::HorizonTooShort { horizon });
        }
        let period = horizon + 2.0 * MARGIN;
        let half_span = (samples as f64 * horizon / (2.0 * period)).floor() as usize;
        let dt = horizon / (2.0 * half_span as f64);
        Ok(Self {
            samples,
            dt,
            half_span,
            window: PI / dt,
        })
    }

    pub fn dx(&self) -> f64 {
        2.0 * PI / (self.samples as f64 * self.dt)
    }

    /// `x_j = (j - N/2 + 1/2) dx`.
    pub fn frequency(&self, j: usize) -> f64 {
        (j as f64 - self.samples as f64 / 2.0 + 0.5) * self.dx()
    }

    /// `t_n = (n - N/2) dt`.
    pub fn time(&self, n: usize) -> f64 {
        (n as f64 - self.samples as f64 / 2.0) * self.dt
    }

    /// Sample indices of `-T/2` and `T/2`.
    pub fn support(&self) -> (usize, usize) {
        let c = self.samples / 2;
        (c - self.half_span, c + self.half_span)
    }

    fn phase(&self, n: usize) -> Complex64 {
        let nf = self.samples as f64;
        let c = -nf / 2.0 + 0.5;
        let d = -nf / 2.0;
        Complex64::from_polar(1.0, 2.0 * PI * c * (n as f64 + d) / nf)
    }

    /// `psi(t_n) = (1/2pi) sum_j I(x_j) e^{i x_j t_n} dx`.
    pub fn inverse(&self, spectrum: &[Complex64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = spectrum
            .iter()
            .enumerate()
            .map(|(j, v)| if j % 2 == 0 { *v } else { -*v })
            .collect();
        FftPlanner::new().plan_fft_inverse(self.samples).process(&mut buf);
        let scale = self.dx() / (2.0 * PI);
        buf.iter().enumerate().map(|(n, v)| v * self.phase(n) * scale).collect()
    }

    /// `I(x_j) = sum_n psi(t_n) e^{-i x_j t_n} dt`, the inverse of [`Self::inverse`].
    pub fn forward(&self, samples: &[Complex64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = samples
            .iter()
            .enumerate()
            .map(|(n, v)| v * self.phase(n).conj())
            .collect();
        FftPlanner::new().plan_fft_forward(self.samples).process(&mut buf);
        buf.iter()
            .enumerate()
            .map(|(j, v)| if j % 2 == 0 { v * self.dt } else { -v * self.dt })
            .collect()
    }
}

/// Fraction of `int |I|^2` lying beyond `|x| = W`, from power-law fits on `[W/2, W]`.
pub fn window_tail_fraction(grid: &FamilyGrid, spectrum: &[Complex64]) -> f64 {
    let dx = grid.dx();
    let total: f64 = spectrum.iter().map(|v| v.norm_sqr()).sum::<f64>() * dx;
    if total == 0.0 {
        return 0.0;
    }
    let n = grid.samples;
    let quarter = n / 4;
    let bin = quarter / FIT_BINS;
    let mut tails = 0.0;
    for side in [0, 1] {
        let mut pts = Vec::with_capacity(FIT_BINS);
        for b in 0..FIT_BINS {
            let idx = |i: usize| if side == 1 { n - quarter + b * bin + i } else { quarter - (b + 1) * bin + i };
            let e: f64 = (0..bin).map(|i| spectrum[idx(i)].norm_sqr()).sum::<f64>() / bin as f64;
            let x = grid.frequency(idx(bin / 2)).abs();
            if e > 0.0 {
                pts.push((x.ln(), e.ln()));
            }
        }
        if pts.len() < 4 {
            continue;
        }
        let m = pts.len() as f64;
        let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
        let (mx, my) = (sx / m, sy / m);
        let sxx: f64 = pts.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
        let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
        let p = -sxy / sxx;
        if p <= 1.0 {
            return 1.0;
        }
        let ln_a = my + p * mx;
        let w = grid.window;
        tails += (ln_a + (1.0 - p) * w.ln()).exp() / (p - 1.0);
    }
    tails / (total + tails)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledPsi {
    pub member: Member,
    pub label: String,
    pub window_tail: f64,
    /// `psi(t_n)` for every `n` of the grid.
    pub samples: Vec<Complex64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiorthogonalFamily {
    #[serde(rename = "T")]
    pub horizon: f64,
    pub kmax: i64,
    pub truncation: usize,
    pub grid: FamilyGrid,
    pub functions: Vec<SampledPsi>,
}

/// Sample `I` on the spectral grid and transform every member.
pub fn build_family(config: &FamilyConfig) -> Result<BiorthogonalFamily> {
    let grid = FamilyGrid::new(config.horizon, config.grid)?;
    let set = InterpolantSet::new(config.horizon, config.kmax, grid.window + 1.0, config.truncation)?;
    let members = set.members();
    let xs: Vec<Complex64> = (0..grid.samples).map(|j| Complex64::new(grid.frequency(j), 0.0)).collect();
    let rows = set.eval_rows(&members, &xs)?;
    let mut functions = Vec::with_capacity(members.len());
    let mut worst: f64 = 0.0;
    for (m, row) in members.iter().zip(&rows) {
        let tail = window_tail_fraction(&grid, row);
        worst = worst.max(tail);
        functions.push(SampledPsi {
            member: *m,
            label: m.label(),
            window_tail: tail,
            samples: grid.inverse(row),
        });
    }
    if worst > config.window_threshold {
        return Err(Error::WindowTooSmall {
            fraction: worst,
            threshold: config.window_threshold,
        });
    }
    Ok(BiorthogonalFamily {
        horizon: config.horizon,
        kmax: config.kmax,
        truncation: config.truncation,
        grid,
        functions,
    })
}

impl BiorthogonalFamily {
    pub fn get(&self, member: Member) -> Option<&SampledPsi> {
        self.functions.iter().find(|f| f.member == member)
    }

    pub fn validate(&self) -> Result<()> {
        let g = FamilyGrid::new(self.horizon, self.grid.samples)?;
        if (g.dt - self.grid.dt).abs() > 1e-12 * g.dt || g.half_span != self.grid.half_span {
            return Err(Error::InvalidInput("family grid does not match its horizon".into()));
        }
        for f in &self.functions {
            if f.samples.len() != self.grid.samples {
                return Err(Error::InvalidInput(format!("{} has {} samples", f.label, f.samples.len())));
            }
        }
        Ok(())
    }

    /// Energy of `psi` outside `[-T/2, T/2]` relative to its total energy.
    pub fn leakage(&self, f: &SampledPsi) -> f64 {
        let (lo, hi) = self.grid.support();
        let total: f64 = f.samples.iter().map(|v| v.norm_sqr()).sum();
        if total == 0.0 {
            return 0.0;
        }
        let inside: f64 = f.samples[lo..=hi].iter().map(|v| v.norm_sqr()).sum();
        ((total - inside) / total).max(0.0)
    }

    /// `||psi||_{L^2(-T/2, T/2)}` by the trapezoid rule on the samples.
    pub fn norm(&self, f: &SampledPsi) -> f64 {
        let (lo, hi) = self.grid.support();
        let s = &f.samples[lo..=hi];
        let sum: f64 = s.iter().map(|v| v.norm_sqr()).sum::<f64>() - 0.5 * (s[0].norm_sqr() + s[s.len() - 1].norm_sqr());
        (sum * self.grid.dt).sqrt()
    }

    /// `int_{-T/2}^{T/2} psi(t) t^d e^{lambda t} dt` for the band-limited `psi`.
    pub fn moment(&self, spectrum: &[Complex64], lambda: Complex64, degree: u32) -> Complex64 {
        let t = self.horizon;
        let mut acc = ZERO;
        for (j, v) in spectrum.iter().enumerate() {
            if *v == ZERO {
                continue;
            }
            let mu = lambda + Complex64::new(0.0, self.grid.frequency(j));
            let shift = (-mu * (t / 2.0)).exp();
            let m0 = exp_moment(0, mu, t);
            let val = match degree {
                0 => m0,
                _ => exp_moment(1, mu, t) - m0 * (t / 2.0),
            };
            acc += v * shift * val;
        }
        acc * (self.grid.dx() / (2.0 * PI))
    }
}

fn member_class(m: Member) -> SpectralClass {
    match m {
        Member::Plus(k) => classify(k, Branch::Plus),
        Member::Minus(k) => classify(k, Branch::Minus),
        _ => SpectralClass::Double,
    }
}

fn member_k(m: Member) -> i64 {
    match m {
        Member::Plus(k) | Member::Minus(k) | Member::Double(k) | Member::DoubleTilde(k) => k,
        Member::Zero => 0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GramEntry {
    pub row: String,
    pub column: String,
    pub value: Complex64,
    pub expected: f64,
    pub deviation: f64,
    /// `max_t |t^d e^{lambda t}|` on `[-T/2, T/2]` for the column.
    pub amplification: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormRatio {
    pub k: i64,
    pub norm: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GramReport {
    #[serde(rename = "T")]
    pub horizon: f64,
    pub k_test: i64,
    pub entries: Vec<GramEntry>,
    pub max_deviation: f64,
    pub max_diagonal_deviation: f64,
    /// Columns `e^{lambda_k^+ t}` of the hyperbolic branch only.
    pub max_deviation_hyperbolic_columns: f64,
    /// Rows and columns both hyperbolic.
    pub max_deviation_hyperbolic_block: f64,
    pub max_leakage: f64,
    pub max_window_tail: f64,
    /// `||psi_k^+|| / |k|^4`.
    pub plus_norms: Vec<NormRatio>,
    /// `||psi_k^-|| / (|k|^2 e^{-T k^2/2 + 2 sqrt2 pi |k|})`.
    pub minus_norms: Vec<NormRatio>,
}

/// Cross-Gram matrix of the family against its dual exponentials for `|k| <= k_test`.
pub fn verify_family(family: &BiorthogonalFamily, k_test: i64) -> Result<GramReport> {
    family.validate()?;
    if k_test < 3 || k_test > family.kmax {
        return Err(Error::IndexCoverage(format!("k_test {k_test} outside 3..={}", family.kmax)));
    }
    let members: Vec<Member> = Member::all(k_test);
    let mut rows = Vec::with_capacity(members.len());
    for m in &members {
        let f = family
            .get(*m)
            .ok_or_else(|| Error::IndexCoverage(format!("family lacks {}", m.label())))?;
        rows.push(f);
    }
    let half = family.horizon / 2.0;
    let mut entries = Vec::with_capacity(members.len() * members.len());
    let (mut max_dev, mut max_diag, mut max_hyp_col, mut max_hyp_block) = (0f64, 0f64, 0f64, 0f64);
    for (rm, f) in members.iter().zip(&rows) {
        let spectrum = family.grid.forward(&f.samples);
        for cm in &members {
            let lambda = cm.lambda();
            let d = cm.degree();
            let value = family.moment(&spectrum, lambda, d);
            let expected = if rm == cm { 1.0 } else { 0.0 };
            let deviation = (value - expected).norm();
            let amplification = (lambda.re.abs() * half).exp() * if d == 1 { half } else { 1.0 };
            max_dev = max_dev.max(deviation);
            if rm == cm {
                max_diag = max_diag.max(deviation);
            }
            let hyp_col = member_class(*cm) == SpectralClass::Hyperbolic;
            if hyp_col {
                max_hyp_col = max_hyp_col.max(deviation);
                if member_class(*rm) == SpectralClass::Hyperbolic {
                    max_hyp_block = max_hyp_block.max(deviation);
                }
            }
            entries.push(GramEntry {
                row: rm.label(),
                column: cm.label(),
                value,
                expected,
                deviation,
                amplification,
            });
        }
    }
    let max_leakage = rows.iter().map(|f| family.leakage(f)).fold(0.0, f64::max);
    let max_window_tail = rows.iter().map(|f| f.window_tail).fold(0.0, f64::max);
    let mut plus_norms = Vec::new();
    let mut minus_norms = Vec::new();
    for (m, f) in members.iter().zip(&rows) {
        let k = member_k(*m);
        if k.abs() < 3 {
            continue;
        }
        let norm = family.norm(f);
        let kf = k.abs() as f64;
        match m {
            Member::Plus(_) => plus_norms.push(NormRatio { k, norm, ratio: norm / kf.powi(4) }),
            Member::Minus(_) => {
                let ln_env = 2.0 * kf.ln() - family.horizon * kf * kf / 2.0 + 2.0 * 2f64.sqrt() * PI * kf;
                minus_norms.push(NormRatio {
                    k,
                    norm,
                    ratio: (norm.ln() - ln_env).exp(),
                });
            }
            _ => {}
        }
    }
    Ok(GramReport {
        horizon: family.horizon,
        k_test,
        entries,
        max_deviation: max_dev,
        max_diagonal_deviation: max_diag,
        max_deviation_hyperbolic_columns: max_hyp_col,
        max_deviation_hyperbolic_block: max_hyp_block,
        max_leakage,
        max_window_tail,
        plus_norms,
        minus_norms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_places_support_on_samples() {
        let g = FamilyGrid::new(2.0 * PI + 1.0, 4096).unwrap();
        let (lo, hi) = g.support();
        assert!((g.time(lo) + (PI + 0.5)).abs() < 1e-12);
        assert!((g.time(hi) - (PI + 0.5)).abs() < 1e-12);
        assert!(g.time(0) <= -(PI + 0.5) - MARGIN + g.dt);
        assert!((g.window * g.dt - PI).abs() < 1e-12);
    }

    #[test]
    fn grid_rejects_bad_sizes() {
        assert!(FamilyGrid::new(8.0, 1000).is_err());
        assert!(FamilyGrid::new(8.0, 512).is_err());
        assert!(FamilyGrid::new(6.0, 4096).is_err());
    }

    #[test]
    fn transforms_invert_each_other() {
        let g = FamilyGrid::new(9.0, 1024).unwrap();
        let spec: Vec<Complex64> = (0..1024).map(|j| Complex64::new((j as f64 * 0.37).sin(), (j as f64).cos())).collect();
        let back = g.forward(&g.inverse(&spec));
        for (a, b) in spec.iter().zip(&back) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn inverse_matches_direct_sum() {
        let g = FamilyGrid::new(9.0, 1024).unwrap();
        let spec: Vec<Complex64> = (0..1024).map(|j| Complex64::new(1.0 / (1.0 + (j as f64 - 512.0).powi(2)), 0.0)).collect();
        let psi = g.inverse(&spec);
        for n in [0, 100, 512, 1023] {
            let t = g.time(n);
            let direct: Complex64 = spec
                .iter()
                .enumerate()
                .map(|(j, v)| v * Complex64::from_polar(1.0, g.frequency(j) * t))
                .sum::<Complex64>()
                * (g.dx() / (2.0 * PI));
            assert!((psi[n] - direct).norm() < 1e-12, "n = {n}");
        }
    }

    #[test]
    fn box_transform_recovers_moments() {
        // psi = indicator of [-1, 1]: I(x) = 2 sin(x)/x, int psi e^{lambda t} = 2 sinh(lambda)/lambda
        let g = FamilyGrid::new(9.0, 8192).unwrap();
        let spec: Vec<Complex64> = (0..g.samples)
            .map(|j| {
                let x = g.frequency(j);
                Complex64::new(2.0 * x.sin() / x, 0.0)
            })
            .collect();
        let fam = BiorthogonalFamily {
            horizon: 2.0,
            kmax: 3,
            truncation: 64,
            grid: g,
            functions: vec![],
        };
        let lambda = Complex64::new(-0.7, 1.3);
        let got = fam.moment(&spec, lambda, 0);
        let want = lambda.sinh() * 2.0 / lambda;
        assert!((got - want).norm() < 2e-3, "{got} vs {want}");
        let tail = window_tail_fraction(&g, &spec);
        assert!(tail > 0.0 && tail < 1e-3, "{tail}");
    }
}
