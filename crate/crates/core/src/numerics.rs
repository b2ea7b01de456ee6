//! Scalar special functions and log-domain Gaussian arithmetic.
//!
//! Density ratios are always formed as differences of log-densities and
//! exponentiated once; raw complex Gaussian densities underflow for moderate
//! `|x|^2 / var`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Clamping constant for every Bernoulli parameter produced anywhere.
pub const EPS: f64 = 1e-12;

/// Distance from {0, 1} below which odds products switch to log-odds.
const LOG_ODDS_MARGIN: f64 = 1e-9;

/// Natural-log probability density.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct LogDensity(pub f64);

impl LogDensity {
    pub fn value(self) -> f64 {
        self.0
    }
}

impl std::ops::Sub for LogDensity {
    type Output = f64;

    /// Log of the density ratio `self / rhs`.
    fn sub(self, rhs: LogDensity) -> f64 {
        self.0 - rhs.0
    }
}

/// Which function stands in for the digamma `ψ` in expectations of logs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PsiMode {
    /// `ψ(x) = ln x − 1/(2x)`, the two-term asymptotic surrogate.
    #[default]
    #[serde(alias = "paper_psi")]
    Paper,
    /// Full digamma.
    #[serde(alias = "exact_digamma")]
    Exact,
}

impl PsiMode {
    pub fn eval(self, x: f64) -> Result<f64> {
        match self {
            PsiMode::Paper => psi_paper(x),
            PsiMode::Exact => digamma_exact(x),
        }
    }
}

fn require_positive(function: &'static str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain {
            function,
            value: x,
            expected: "finite and > 0",
        })
    }
}

/// Two-term digamma surrogate `ln x − 1/(2x)`.
pub fn psi_paper(x: f64) -> Result<f64> {
    require_positive("psi_paper", x)?;
    Ok(x.ln() - 0.5 / x)
}

/// Digamma function, accurate to about 1e-12 absolute for `x > 0`.
///
/// Shifts the argument up to `x >= 6` with `ψ(x) = ψ(x + 1) − 1/x`, then
/// applies the asymptotic Bernoulli-number series.
pub fn digamma_exact(x: f64) -> Result<f64> {
    require_positive("digamma_exact", x)?;
    let mut x = x;
    let mut shift = 0.0;
    while x < 6.0 {
        shift -= 1.0 / x;
        x += 1.0;
    }
    let inv2 = 1.0 / (x * x);
    // B_{2n} / (2n) for n = 1..7, highest order first.
    let series = inv2
        * (1.0 / 12.0
            - inv2
                * (1.0 / 120.0
                    - inv2
                        * (1.0 / 252.0
                            - inv2
                                * (1.0 / 240.0
                                    - inv2
                                        * (1.0 / 132.0
                                            - inv2 * (691.0 / 32760.0 - inv2 / 12.0))))));
    Ok(shift + x.ln() - 0.5 / x - series)
}

/// Log-density of the circularly symmetric complex Gaussian `CN(x; mean, var)`.
pub fn log_cgauss(x: Complex64, mean: Complex64, var: f64) -> Result<LogDensity> {
    require_positive("log_cgauss", var)?;
    Ok(LogDensity(-(PI * var).ln() - (x - mean).norm_sqr() / var))
}

/// `(⟨ln x⟩, ⟨ln(1 − x)⟩)` under `Be(x; a, b)`.
pub fn beta_log_expectations(a: f64, b: f64, mode: PsiMode) -> Result<(f64, f64)> {
    let total = mode.eval(a + b)?;
    Ok((mode.eval(a)? - total, mode.eval(b)? - total))
}

/// Clamps a probability to `[EPS, 1 − EPS]`; NaN maps to 1/2.
pub fn clamp_prob(p: f64) -> f64 {
    if p.is_nan() {
        0.5
    } else {
        p.clamp(EPS, 1.0 - EPS)
    }
}

fn logit(p: f64) -> f64 {
    p.ln() - (1.0 - p).ln()
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

fn near_boundary(p: f64) -> bool {
    p < LOG_ODDS_MARGIN || p > 1.0 - LOG_ODDS_MARGIN
}

/// Normalised product of two binary beliefs, `pq / (pq + (1−p)(1−q))`.
///
/// Switches to log-odds when either factor sits within 1e-9 of 0 or 1. The
/// result is clamped.
pub fn fuse(p: f64, q: f64) -> f64 {
    let out = if near_boundary(p) || near_boundary(q) {
        sigmoid(logit(clamp_prob(p)) + logit(clamp_prob(q)))
    } else {
        let on = p * q;
        on / (on + (1.0 - p) * (1.0 - q))
    };
    clamp_prob(out)
}

/// `odds / (odds + 1)` computed from a log-odds value, clamped.
pub fn prob_from_log_odds(log_odds: f64) -> f64 {
    clamp_prob(sigmoid(log_odds))
}

#[cfg(test)]
mod tests {
    use super::*;

    const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

    #[test]
    fn psi_paper_values() {
        assert!((psi_paper(1.0).unwrap() + 0.5).abs() < 1e-15);
        assert!((psi_paper(2.0).unwrap() - 0.443_147_180_559_945_3).abs() < 1e-12);
        assert!((psi_paper(0.5).unwrap() + 1.693_147_180_559_945_3).abs() < 1e-12);
    }

    #[test]
    fn psi_rejects_nonpositive() {
        assert!(matches!(psi_paper(0.0), Err(Error::Domain { .. })));
        assert!(matches!(psi_paper(-1.0), Err(Error::Domain { .. })));
        assert!(digamma_exact(0.0).is_err());
        assert!(digamma_exact(f64::NAN).is_err());
    }

    #[test]
    fn digamma_integer_recurrence() {
        // ψ(n) = −γ + Σ_{k<n} 1/k
        let mut harmonic = 0.0;
        for n in 1..=40 {
            let expected = -EULER_GAMMA + harmonic;
            let got = digamma_exact(n as f64).unwrap();
            assert!((got - expected).abs() < 1e-11, "n={n}: {got} vs {expected}");
            harmonic += 1.0 / n as f64;
        }
    }

    #[test]
    fn digamma_reference_values() {
        // mpmath, 17 significant digits
        let cases = [
            (0.5, -1.963_510_026_021_423_5),
            (0.1, -10.423_754_940_411_076),
            (3.7, 1.167_153_539_361_511_4),
            (6.0, 1.706_117_668_431_800_5),
            (25.0, 3.198_742_512_851_974),
            (1e-3, -1_000.575_571_931_810_3),
        ];
        for (x, want) in cases {
            let got = digamma_exact(x).unwrap();
            assert!((got - want).abs() < 1e-10, "x={x}: {got} vs {want}");
        }
    }

    #[test]
    fn surrogate_tracks_digamma_for_large_arguments() {
        for i in 0..200 {
            let x = 10.0 + i as f64 * 0.5;
            let p = psi_paper(x).unwrap();
            let d = digamma_exact(x).unwrap();
            assert!((p - d).abs() < 1e-2);
            assert!(p < d + 0.1);
        }
    }

    #[test]
    fn log_cgauss_values() {
        let z = Complex64::new(0.0, 0.0);
        assert!((log_cgauss(z, z, 1.0).unwrap().0 + 1.144_729_885_849_400_2).abs() < 1e-12);
        assert!((log_cgauss(z, z, 2.0).unwrap().0 + 1.837_877_066_409_345_3).abs() < 1e-12);
        let one = Complex64::new(1.0, 0.0);
        assert!((log_cgauss(one, z, 1.0).unwrap().0 + 2.144_729_885_849_400_2).abs() < 1e-12);
        assert!(log_cgauss(z, z, 0.0).is_err());
    }

    #[test]
    fn log_cgauss_integrates_to_one() {
        // midpoint rule on [-8, 8]^2 for unit variance
        let n = 400;
        let h = 16.0 / n as f64;
        let mut total = 0.0;
        for i in 0..n {
            for j in 0..n {
                let x = Complex64::new(-8.0 + (i as f64 + 0.5) * h, -8.0 + (j as f64 + 0.5) * h);
                total += log_cgauss(x, Complex64::new(0.3, -0.2), 1.7).unwrap().0.exp() * h * h;
            }
        }
        assert!((total - 1.0).abs() < 1e-2, "{total}");
    }

    #[test]
    fn beta_expectations() {
        let (a, b) = beta_log_expectations(1.0, 1.0, PsiMode::Paper).unwrap();
        assert!((a + 0.943_147_180_559_945_3).abs() < 1e-12);
        assert_eq!(a, b);
        let (a, b) = beta_log_expectations(1.0, 1.0, PsiMode::Exact).unwrap();
        assert!((a + 1.0).abs() < 1e-11 && (b + 1.0).abs() < 1e-11);
        let (x, y) = beta_log_expectations(2.5, 0.7, PsiMode::Exact).unwrap();
        let (y2, x2) = beta_log_expectations(0.7, 2.5, PsiMode::Exact).unwrap();
        assert_eq!((x, y), (x2, y2));
    }

    #[test]
    fn fuse_matches_direct_formula_and_clamps() {
        assert!((fuse(0.2, 0.7) - 0.14 / 0.38).abs() < 1e-15);
        assert_eq!(fuse(0.5, 0.5), 0.5);
        assert!(fuse(0.3, 1.0 - EPS) > 1.0 - 1e-11);
        assert!(fuse(0.0, 1.0) >= EPS && fuse(0.0, 1.0) <= 1.0 - EPS);
        // log-odds branch agrees with the direct formula where both are safe
        let direct = 0.3e-9 * 0.6 / (0.3e-9 * 0.6 + (1.0 - 0.3e-9) * 0.4);
        assert!((fuse(0.3e-9, 0.6) - direct).abs() / direct < 1e-6);
    }

    proptest::proptest! {
        #[test]
        fn log_cgauss_shift_invariant(xr in -5.0..5.0f64, xi in -5.0..5.0f64,
                                      mr in -5.0..5.0f64, mi in -5.0..5.0f64,
                                      v in 1e-3..10.0f64) {
            let x = Complex64::new(xr, xi);
            let m = Complex64::new(mr, mi);
            let a = log_cgauss(x, m, v).unwrap().0;
            let b = log_cgauss(x - m, Complex64::new(0.0, 0.0), v).unwrap().0;
            proptest::prop_assert_eq!(a, b);
        }

        #[test]
        fn fuse_stays_in_clamp_range(p in 0.0..=1.0f64, q in 0.0..=1.0f64) {
            let r = fuse(p, q);
            proptest::prop_assert!((EPS..=1.0 - EPS).contains(&r));
        }
    }
}
