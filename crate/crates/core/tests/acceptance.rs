//! Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use dampwave::biorthogonal::multiplier::{multiplier_estimates, multiplier_for_horizon};
use dampwave::biorthogonal::products::Skip;
use dampwave::biorthogonal::{build_family, verify_family, CanonicalProduct, FamilyConfig};
use dampwave::moments::{beta_coefficients, indicator_difference_beta, quadratic_irrational_constant, ControlShape};
use dampwave::solver::{evolve_forced, evolve_free, frame_transform, FrameDirection};
use dampwave::spectrum::{asymptotic_residuals, eigenvalue};
use dampwave::synthesis::{run_pipeline, ControlProblem};
use dampwave::{Branch, EigenvalueTable, FourierState, SampledControl};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

struct Outcome {
    pass: bool,
    detail: String,
}

fn report(n: usize, budget: Duration, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let out = f();
    let took = start.elapsed();
    let in_time = took <= budget;
    let pass = out.pass && in_time;
    let timing = if in_time {
        format!("{:.2}s", took.as_secs_f64())
    } else {
        format!("{:.2}s over budget {:.0}s", took.as_secs_f64(), budget.as_secs_f64())
    };
    println!(
        "criterion {n}: {} {} ({timing})",
        if pass { "PASS" } else { "FAIL" },
        out.detail
    );
    pass
}

/// Real data on `3 <= |k| <= kmax` with zero means.
fn test_data(kmax: usize, seed: u64) -> FourierState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = FourierState::zeros(kmax);
    for k in 3..=kmax as i64 {
        let p = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let v = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        s.set(k, p, v);
        s.set(-k, p.conj(), v.conj());
    }
    s
}

fn criterion_1() -> Outcome {
    let exact = eigenvalue(0, Branch::Plus) == ZERO
        && eigenvalue(0, Branch::Minus) == ZERO
        && eigenvalue(2, Branch::Plus) == Complex64::new(-2.0, 2.0)
        && eigenvalue(2, Branch::Minus) == Complex64::new(-2.0, 2.0)
        && eigenvalue(-2, Branch::Plus) == Complex64::new(-2.0, -2.0)
        && eigenvalue(-2, Branch::Minus) == Complex64::new(-2.0, -2.0);
    let table = EigenvalueTable::new(200).unwrap();
    let residual = table.max_relative_residual();
    let asym: Vec<f64> = asymptotic_residuals(200)
        .into_iter()
        .filter(|r| r.k >= 20)
        .map(|r| r.plus)
        .collect();
    let amax = asym.iter().cloned().fold(0.0, f64::max);
    let settle = (asym[asym.len() - 1] - asym[asym.len() - 2]).abs();
    Outcome {
        pass: exact && residual <= 1e-10 && amax <= 2.0 * asym[0] && settle < 1e-3,
        detail: format!(
            "exact doubles {exact}, quadratic residual {residual:.2e}, max k^2|l+ + 1 - ik| on [20,200] {amax:.4}"
        ),
    }
}

/// Adaptive Dormand-Prince 5(4) for `u' = f(u)` on `[0, t]`.
fn dormand_prince(f: impl Fn(&[Complex64; 2]) -> [Complex64; 2], y0: [Complex64; 2], t: f64, tol: f64) -> [Complex64; 2] {
    const A: [[f64; 6]; 7] = [
        [0.0; 6],
        [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
        [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
        [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
    ];
    const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
    const B4: [f64; 7] = [
        5179.0 / 57600.0,
        0.0,
        7571.0 / 16695.0,
        393.0 / 640.0,
        -92097.0 / 339200.0,
        187.0 / 2100.0,
        1.0 / 40.0,
    ];
    let mut y = y0;
    let mut s = 0.0;
    let mut h: f64 = 1e-3;
    while s < t {
        h = h.min(t - s);
        let mut k = [[ZERO; 2]; 7];
        for i in 0..7 {
            let mut yi = y;
            for (j, kj) in k.iter().enumerate().take(i) {
                for c in 0..2 {
                    yi[c] += kj[c] * (A[i][j] * h);
                }
            }
            k[i] = f(&yi);
        }
        let mut y5 = y;
        let mut err = 0f64;
        for c in 0..2 {
            let mut d5 = ZERO;
            let mut d4 = ZERO;
            for i in 0..7 {
                d5 += k[i][c] * B5[i];
                d4 += k[i][c] * B4[i];
            }
            y5[c] += d5 * h;
            let scale = tol * (1.0 + y[c].norm().max(y5[c].norm()));
            err = err.max(((d5 - d4) * h).norm() / scale);
        }
        if err <= 1.0 {
            s += h;
            y = y5;
        }
        h *= (0.9 * err.max(1e-10).powf(-0.2)).clamp(0.2, 5.0);
    }
    y
}

fn criterion_2() -> Outcome {
    let kmax = 16;
    let t = 2.0 * PI;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut v0 = FourierState::zeros(kmax);
    for k in -(kmax as i64)..=kmax as i64 {
        v0.set(
            k,
            Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
            Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
        );
    }
    let fast = evolve_free(&v0, t);
    let (mut num, mut den) = (0.0, 0.0);
    for k in v0.modes() {
        let kf = k as f64;
        let damp = Complex64::new(kf * kf, -2.0 * kf);
        let stiff = Complex64::new(0.0, kf * kf * kf);
        let rhs = |u: &[Complex64; 2]| [u[1], stiff * u[0] - damp * u[1]];
        let y = dormand_prince(rhs, [v0.pos(k), v0.vel(k)], t, 1e-13);
        num += (y[0] - fast.pos(k)).norm_sqr() + (y[1] - fast.vel(k)).norm_sqr();
        den += y[0].norm_sqr() + y[1].norm_sqr();
    }
    let rel = (num / den).sqrt();
    Outcome {
        pass: rel <= 1e-8,
        detail: format!("K = 16, t = 2 pi, relative error vs adaptive RK45 {rel:.2e}"),
    }
}

fn criterion_3() -> Outcome {
    let p = ControlProblem::new(ControlShape::Dipole, test_data(6, 3), 2.0 * PI + 1.0, 6);
    match run_pipeline(&p) {
        Ok(out) => {
            let r = &out.report;
            Outcome {
                pass: r.moment_residual_max <= 1e-8 && r.final_norm_ratio <= 1e-6,
                detail: format!(
                    "dipole, moment residual {:.2e}, final/initial {:.2e}",
                    r.moment_residual_max, r.final_norm_ratio
                ),
            }
        }
        Err(e) => Outcome {
            pass: false,
            detail: format!("dipole pipeline failed: {e}"),
        },
    }
}

fn criterion_4() -> Outcome {
    let p = ControlProblem::new(ControlShape::Dirac, test_data(6, 4), 2.0 * PI + 1.0, 6);
    match run_pipeline(&p) {
        Ok(out) => {
            let r = &out.report;
            let mean = r.mean_check.as_ref().map(|m| m.error).unwrap_or(f64::INFINITY);
            Outcome {
                pass: r.final_norm_ratio <= 1e-6 && mean <= 1e-10,
                detail: format!(
                    "Dirac, final/initial without mean {:.2e}, mean conservation error {mean:.2e}",
                    r.final_norm_ratio
                ),
            }
        }
        Err(e) => Outcome {
            pass: false,
            detail: format!("Dirac pipeline failed: {e}"),
        },
    }
}

fn criterion_5() -> Outcome {
    let mut y0 = test_data(6, 5);
    y0.set(0, Complex64::new(1.0, 0.0), Complex64::new(0.5, 0.0));
    let shape = ControlShape::IndicatorDifference {
        offset: 0.0,
        sigma: 2f64.sqrt() - 1.0,
    };
    let p = ControlProblem::new(shape, y0, 2.0 * PI + 2.0, 6);
    match run_pipeline(&p) {
        Ok(out) => {
            let r = &out.report;
            let pre = r.presteer.clone().expect("mean steering phase");
            let means = pre.position_mean.max(pre.velocity_mean);
            Outcome {
                pass: means <= 1e-8 && r.final_norm_ratio <= 1e-5,
                detail: format!(
                    "means at eps {means:.2e}, final/initial {:.2e}",
                    r.final_norm_ratio
                ),
            }
        }
        Err(e) => Outcome {
            pass: false,
            detail: format!("two phase pipeline failed: {e}"),
        },
    }
}

fn criterion_6() -> Outcome {
    let sigma = 2f64.sqrt() - 1.0;
    let bound = quadratic_irrational_constant(sigma, 1000).unwrap();
    let scan = (1..=1000i64)
        .flat_map(|k| [k, -k])
        .map(|k| (k.abs() as f64).powi(3) * indicator_difference_beta(k, 0.0, sigma).norm())
        .fold(f64::INFINITY, f64::min);
    let floor = 0.5 * 4.0 * bound.c0 * bound.c0;
    Outcome {
        pass: scan > 0.0 && scan >= floor,
        detail: format!("min |k|^3 |beta_k| = {scan:.4e}, 0.5 * 4 C0^2 = {floor:.4e} (C0 = {:.4e})", bound.c0),
    }
}

fn criterion_7() -> Outcome {
    let config = FamilyConfig {
        window_threshold: 1.0,
        ..FamilyConfig::new(4.0 * PI, 6, 16384)
    };
    let family = match build_family(&config) {
        Ok(f) => f,
        Err(e) => {
            return Outcome {
                pass: false,
                detail: format!("family construction failed: {e}"),
            }
        }
    };
    let g = verify_family(&family, 6).unwrap();
    let fitted = g
        .plus_norms
        .iter()
        .filter(|n| n.k.abs() == 3)
        .map(|n| n.ratio)
        .fold(0.0, f64::max);
    let norms_bounded = fitted > 0.0 && g.plus_norms.iter().all(|n| n.ratio <= fitted * 1.0001);
    Outcome {
        pass: g.max_deviation <= 1e-2 && g.max_leakage <= 1e-3 && norms_bounded,
        detail: format!(
            "T = 4 pi, |k| <= 6: Gram deviation {:.2e} (hyperbolic block {:.2e}, diagonal {:.2e}), leakage {:.2e}, \
             ||psi+||/k^4 bounded {norms_bounded}",
            g.max_deviation, g.max_deviation_hyperbolic_block, g.max_diagonal_deviation, g.max_leakage
        ),
    }
}

/// `ln P3(z)` from its defining product with the first order tail added back.
fn ln_p3_direct(z: Complex64, n: i64) -> Complex64 {
    let z2 = z * z;
    let mut acc = z2.ln();
    for k in 1..=n {
        for kk in [k, -k] {
            acc += (Complex64::new(1.0, 0.0) + z2 / eigenvalue(kk, Branch::Minus)).ln();
        }
    }
    let nf = n as f64;
    acc - z2 * 2.0 * (1.0 / nf - 0.5 / (nf * nf))
}

/// `ln P2(z)` from its defining product with the first order tail added back.
fn ln_p2_direct(z: Complex64, n: i64) -> Complex64 {
    let i = Complex64::new(0.0, 1.0);
    let mut acc = z.ln();
    for k in 1..=n {
        for kk in [k, -k] {
            acc += (Complex64::new(1.0, 0.0) + z / (i * eigenvalue(kk, Branch::Minus))).ln();
        }
    }
    let nf = n as f64;
    acc + z * i * 2.0 * (1.0 / nf - 0.5 / (nf * nf))
}

fn relative_gap(a: Complex64, b: Complex64) -> f64 {
    let d = a - b;
    let d = Complex64::new(d.re, d.im - (d.im / (2.0 * PI)).round() * 2.0 * PI);
    (d.exp() - 1.0).norm()
}

fn criterion_8() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, t) in [("2pi+1", 2.0 * PI + 1.0), ("4pi", 4.0 * PI)] {
        let params = multiplier_for_horizon(t, 400.0).unwrap();
        let e = multiplier_estimates(&params, 400.0, 12).unwrap();
        ok &= e.holds();
        parts.push(format!(
            "T = {name}: real line {:.3e}/{:.3e}, parabolic {:.3e}/{:.3e}",
            e.real_line_inner, e.real_line_outer, e.parabolic_inner, e.parabolic_outer
        ));
    }
    let product = CanonicalProduct::new(4000, 4000).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut worst_b, mut worst_a) = (0f64, 0f64);
    for _ in 0..100 {
        let r = 20.0 * rng.random_range(0.0f64..1.0).sqrt();
        let z = Complex64::from_polar(r, rng.random_range(-PI..PI));
        worst_b = worst_b.max(relative_gap(product.ln_p3(z), ln_p3_direct(z, 100_000)));
        worst_a = worst_a.max(relative_gap(product.ln_p2(z, Skip::None), ln_p2_direct(z, 100_000)));
    }
    ok &= worst_a <= 1e-6 && worst_b <= 1e-6;
    Outcome {
        pass: ok,
        detail: format!(
            "{}; P2 identity {worst_a:.2e}, P3 identity {worst_b:.2e}",
            parts.join("; ")
        ),
    }
}

fn criterion_9() -> Outcome {
    let kmax = 6;
    let t = 2.0 * PI + 1.0;
    let betas = beta_coefficients(&ControlShape::Dipole, kmax).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst = 0f64;
    for _ in 0..20 {
        let mut y0 = test_data(kmax, rng.random());
        y0.set(
            0,
            Complex64::new(rng.random_range(-1.0..1.0), 0.0),
            Complex64::new(rng.random_range(-1.0..1.0), 0.0),
        );
        let v0 = frame_transform(&y0, FrameDirection::ToMoving);
        let coeffs: Vec<(f64, f64, f64)> = (1..=6)
            .map(|j| (j as f64, rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let h = SampledControl::from_fn(0.0, t, 8192, |s| {
            let v: f64 = coeffs.iter().map(|(w, a, b)| a * (w * s).cos() + b * (w * s).sin()).sum();
            Complex64::new(v, 0.0)
        });
        let v = evolve_forced(&v0, &betas, &h).unwrap();
        let pos = v0.position_mean() + v0.velocity_mean() * t;
        let vel = v0.velocity_mean();
        worst = worst
            .max((v.position_mean() - pos).norm())
            .max((v.velocity_mean() - vel).norm());
    }
    Outcome {
        pass: worst <= 1e-8,
        detail: format!("dipole, 20 random controls, worst mean deviation {worst:.2e}"),
    }
}

fn main() -> ExitCode {
    let s = Duration::from_secs;
    let results = [
        report(1, s(1), criterion_1),
        report(2, s(10), criterion_2),
        report(3, s(30), criterion_3),
        report(4, s(30), criterion_4),
        report(5, s(60), criterion_5),
        report(6, s(5), criterion_6),
        report(7, s(300), criterion_7),
        report(8, s(60), criterion_8),
        report(9, s(30), criterion_9),
    ];
    let passed = results.iter().filter(|p| **p).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed == results.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
