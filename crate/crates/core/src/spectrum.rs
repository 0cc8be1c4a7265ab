//! Eigenvalues of the per-mode characteristic polynomial
//! `lambda^2 + (k^2 - 2ik) lambda - i k^3 = 0` and the derived sequences.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Which root of the characteristic quadratic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Plus,
    Minus,
}

impl Branch {
    pub fn other(self) -> Branch {
        match self {
            Branch::Plus => Branch::Minus,
            Branch::Minus => Branch::Plus,
        }
    }
}

/// Spectral class of an eigenvalue.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpectralClass {
    /// Real part tends to -1.
    Hyperbolic,
    /// Real part tends to -infinity like -k^2.
    Parabolic,
    /// Double root, k in {0, 2, -2}.
    Double,
}

/// True when mode `k` has a double eigenvalue.
pub fn is_double(k: i64) -> bool {
    k == 0 || k == 2 || k == -2
}

/// Closed-form eigenvalue for mode `k`.
///
/// For `|k| >= 3` the discriminant is real and positive and the plus root is
/// evaluated without cancellation.
pub fn eigenvalue(k: i64, branch: Branch) -> Complex64 {
    let kf = k as f64;
    let k2 = kf * kf;
    if k.abs() >= 3 {
        let root = (k2 * k2 - 4.0 * k2).sqrt();
        let re = match branch {
            Branch::Plus => -2.0 * k2 / (k2 + root),
            Branch::Minus => -(k2 + root) / 2.0,
        };
        return Complex64::new(re, kf);
    }
    let p = Complex64::new(k2, -2.0 * kf);
    let disc = Complex64::new(k2 * k2 - 4.0 * k2, 0.0).sqrt();
    match branch {
        Branch::Plus => (-p + disc) / 2.0,
        Branch::Minus => (-p - disc) / 2.0,
    }
}

/// Residual of the characteristic polynomial at `lambda`.
pub fn characteristic_residual(k: i64, lambda: Complex64) -> Complex64 {
    let kf = k as f64;
    lambda * lambda + Complex64::new(kf * kf, -2.0 * kf) * lambda - I * kf * kf * kf
}

pub fn classify(k: i64, branch: Branch) -> SpectralClass {
    if is_double(k) {
        return SpectralClass::Double;
    }
    match branch {
        Branch::Plus => SpectralClass::Hyperbolic,
        Branch::Minus => SpectralClass::Parabolic,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumEntry {
    pub k: i64,
    pub branch: Branch,
    pub value: Complex64,
    pub class: SpectralClass,
}

/// All eigenvalues for `|k| <= kmax`, both branches, ordered by `k` then branch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenvalueTable {
    kmax: usize,
    entries: Vec<SpectrumEntry>,
}

impl EigenvalueTable {
    pub fn new(kmax: usize) -> Result<Self> {
        if kmax < 3 {
            return Err(Error::InvalidTruncation { kmax, min: 3 });
        }
        let k = kmax as i64;
        let mut entries = Vec::with_capacity(2 * (2 * kmax + 1));
        for kk in -k..=k {
            for branch in [Branch::Plus, Branch::Minus] {
                entries.push(SpectrumEntry {
                    k: kk,
                    branch,
                    value: eigenvalue(kk, branch),
                    class: classify(kk, branch),
                });
            }
        }
        Ok(Self { kmax, entries })
    }

    pub fn kmax(&self) -> usize {
        self.kmax
    }

    pub fn entries(&self) -> &[SpectrumEntry] {
        &self.entries
    }

    pub fn get(&self, k: i64, branch: Branch) -> Complex64 {
        assert!(k.unsigned_abs() as usize <= self.kmax, "mode {k} outside table");
        let row = (k + self.kmax as i64) as usize;
        let col = match branch {
            Branch::Plus => 0,
            Branch::Minus => 1,
        };
        self.entries[2 * row + col].value
    }

    /// Largest characteristic residual relative to `max(1, |lambda|^2)`.
    pub fn max_relative_residual(&self) -> f64 {
        self.entries
            .iter()
            .map(|e| characteristic_residual(e.k, e.value).norm() / e.value.norm_sqr().max(1.0))
            .fold(0.0, f64::max)
    }
}

/// The sequence `mu_k = sgn(k) sqrt(-lambda_k^-)`, `mu_0 = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct MuSequence {
    kmax: usize,
    values: Vec<Complex64>,
}

impl MuSequence {
    pub fn new(kmax: usize) -> Self {
        let k = kmax as i64;
        let values = (-k..=k).map(mu).collect();
        Self { kmax, values }
    }

    pub fn get(&self, k: i64) -> Complex64 {
        self.values[(k + self.kmax as i64) as usize]
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// Smallest distance between distinct entries.
    pub fn min_separation(&self) -> f64 {
        let mut best = f64::INFINITY;
        for (i, a) in self.values.iter().enumerate() {
            for b in &self.values[i + 1..] {
                best = best.min((a - b).norm());
            }
        }
        best
    }
}

/// `mu_k = sgn(k) sqrt(-lambda_k^-)` with the principal square root.
pub fn mu(k: i64) -> Complex64 {
    if k == 0 {
        return Complex64::new(0.0, 0.0);
    }
    let root = (-eigenvalue(k, Branch::Minus)).sqrt();
    if k > 0 {
        root
    } else {
        -root
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticResidual {
    pub k: i64,
    /// `k^2 |lambda^+ - (-1 + ik)|`
    pub plus: f64,
    /// `|lambda^- - (-k^2 + 1 + ik)|`
    pub minus: f64,
}

/// Scaled deviations from the leading asymptotics for `3 <= k <= kmax`.
pub fn asymptotic_residuals(kmax: usize) -> Vec<AsymptoticResidual> {
    (3..=kmax as i64)
        .map(|k| {
            let kf = k as f64;
            let lp = eigenvalue(k, Branch::Plus);
            let lm = eigenvalue(k, Branch::Minus);
            AsymptoticResidual {
                k,
                plus: kf * kf * (lp - Complex64::new(-1.0, kf)).norm(),
                minus: (lm - Complex64::new(1.0 - kf * kf, kf)).norm(),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn double_roots_are_exact() {
        for b in [Branch::Plus, Branch::Minus] {
            assert_eq!(eigenvalue(0, b), Complex64::new(0.0, 0.0));
            assert_eq!(eigenvalue(2, b), Complex64::new(-2.0, 2.0));
            assert_eq!(eigenvalue(-2, b), Complex64::new(-2.0, -2.0));
        }
    }

    #[test]
    fn mode_one_pair() {
        let s = 3f64.sqrt() / 2.0;
        let p = eigenvalue(1, Branch::Plus);
        let m = eigenvalue(1, Branch::Minus);
        let expected = [Complex64::new(-0.5, 1.0 + s), Complex64::new(-0.5, 1.0 - s)];
        let mut got = [p, m];
        got.sort_by(|a, b| b.im.partial_cmp(&a.im).unwrap());
        for (g, e) in got.iter().zip(expected) {
            assert_abs_diff_eq!(g.re, e.re, epsilon = 1e-14);
            assert_abs_diff_eq!(g.im, e.im, epsilon = 1e-14);
        }
    }

    #[test]
    fn mode_five_plus() {
        let v = eigenvalue(5, Branch::Plus);
        assert_abs_diff_eq!(v.re, (-25.0 + 525f64.sqrt()) / 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(v.im, 5.0, epsilon = 1e-15);
        assert!((v.re + 1.04356).abs() < 1e-5);
    }

    #[test]
    fn mode_one_branches_swap_under_conjugation() {
        assert_eq!(eigenvalue(-1, Branch::Plus), eigenvalue(1, Branch::Minus).conj());
        assert_eq!(eigenvalue(-1, Branch::Minus), eigenvalue(1, Branch::Plus).conj());
    }

    #[test]
    fn table_size_and_guard() {
        assert_eq!(EigenvalueTable::new(3).unwrap().entries().len(), 14);
        assert_eq!(EigenvalueTable::new(30).unwrap().entries().len(), 122);
        assert!(matches!(
            EigenvalueTable::new(2),
            Err(Error::InvalidTruncation { .. })
        ));
    }

    #[test]
    fn table_residuals_small() {
        let t = EigenvalueTable::new(200).unwrap();
        assert!(t.max_relative_residual() < 1e-12);
    }

    #[test]
    fn mu_near_shifted_integers() {
        let m = mu(40);
        let approx = Complex64::new(40.0 - 3.0 / 320.0, -0.5);
        assert!((m - approx).norm() < 1e-3);
        assert_eq!(mu(-7), -mu(7).conj());
        assert!(MuSequence::new(10).min_separation() > 0.45);
    }

    #[test]
    fn asymptotics_bounded() {
        let r = asymptotic_residuals(200);
        let max_plus = r.iter().map(|a| a.plus).fold(0.0, f64::max);
        let max_minus = r.iter().map(|a| a.minus).fold(0.0, f64::max);
        assert!(max_plus < 10.0, "{max_plus}");
        assert!(max_minus < 2.0, "{max_minus}");
    }

    proptest! {
        #[test]
        fn roots_solve_quadratic(k in -400i64..=400) {
            for b in [Branch::Plus, Branch::Minus] {
                let l = eigenvalue(k, b);
                let r = characteristic_residual(k, l).norm();
                prop_assert!(r <= 1e-12 * l.norm_sqr().max(1.0));
            }
        }

        #[test]
        fn vieta_relations(k in -400i64..=400) {
            let kf = k as f64;
            let p = eigenvalue(k, Branch::Plus);
            let m = eigenvalue(k, Branch::Minus);
            let sum = p + m + Complex64::new(kf * kf, -2.0 * kf);
            let prod = p * m + I * kf * kf * kf;
            prop_assert!(sum.norm() <= 1e-12 * (1.0 + kf * kf));
            prop_assert!(prod.norm() <= 1e-12 * (1.0 + kf.abs().powi(3)));
        }

        #[test]
        fn conjugate_symmetry(k in 3i64..=400) {
            for b in [Branch::Plus, Branch::Minus] {
                prop_assert_eq!(eigenvalue(-k, b), eigenvalue(k, b).conj());
            }
        }

        #[test]
        fn left_half_plane(k in -400i64..=400) {
            prop_assume!(k != 0);
            prop_assert!(eigenvalue(k, Branch::Plus).re < 0.0);
            prop_assert!(eigenvalue(k, Branch::Minus).re < 0.0);
        }
    }
}
