//! Oracle comparisons shared by the test suites and the `selftest` command.
//!
//! Each check returns the worst deviation it saw; callers compare against
//! their own tolerance.

use ndarray::Array2;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::bgmc::{
    activation_likelihood, joint_belief, mc_backward, mc_constants, mc_forward,
    pairwise_beliefs, BernoulliMessage, BetaBelief, GammaBelief,
};
use crate::detectors::{BgmcDetector, DetectorConfig, SblDetector};
use crate::gamp::{GampState, GaussianDenoiser, SensingMatrix, VAR_MAX};
use crate::model::{
    generate_channel, generate_instance, noise_precision_from_snr, Scenario, SystemConfig,
};
use crate::numerics::{
    beta_log_expectations, digamma_exact, fuse, psi_paper, PsiMode, EPS,
};
use crate::oracle::{lmmse, ChainEnumeration};
use crate::Result;

/// Largest absolute deviation between the chain sweeps and brute-force
/// enumeration over `cases` random chains of length 2 to 8.
pub fn chain_oracle(cases: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..cases {
        let slots = rng.gen_range(2..=8);
        let evidence: Vec<f64> = (0..slots).map(|_| rng.gen_range(0.01..0.99)).collect();
        let mut beta = || BetaBelief::new(rng.gen_range(0.2..20.0), rng.gen_range(0.2..20.0));
        let (p10, p01) = (beta(), beta());
        let mode = if rng.gen_bool(0.5) { PsiMode::Paper } else { PsiMode::Exact };
        let cst = mc_constants(p10, p01, mode)?;
        let (down, down_post) = mc_forward(&evidence, &cst);
        let (up_post, up) = mc_backward(&evidence, &cst);
        let oracle = ChainEnumeration::new(&evidence, &cst);
        let mut track = |a: f64, b: f64| worst = worst.max((a - b).abs());
        for j in 0..slots {
            track(down[j], oracle.down(j));
            track(down_post[j], oracle.down_post(j));
            track(up[j], oracle.up(j));
            track(up_post[j], oracle.up_post(j));
            track(fuse(down_post[j], up[j]), oracle.marginal(j));
        }
        let pb = pairwise_beliefs(&down_post, &up_post, &up, &cst);
        track(pb.first_active, oracle.marginal(0));
        for (i, t) in pb.transitions.iter().enumerate() {
            let rho = t.rho();
            let want = oracle.pairwise(i + 1);
            let got = [t.b00 / rho, t.b01 / rho, t.b10 / rho, t.b11 / rho];
            for (g, w) in got.iter().zip(want) {
                track(*g, w);
            }
        }
    }
    Ok(worst)
}

/// Largest relative error `‖b̂ − b_lmmse‖ / ‖b_lmmse‖` of GAMP with an i.i.d.
/// `CN(0, 1)` prior after `iters` iterations, over `instances` random
/// `N x K` problems drawn from that prior at 9 dB.
pub fn gamp_lmmse(
    instances: usize,
    rows: usize,
    cols: usize,
    iters: usize,
    damping: f64,
    seed: u64,
) -> Result<f64> {
    let cfg = SystemConfig {
        num_users: cols,
        num_subcarriers: rows,
        ..SystemConfig::default()
    };
    let lambda = noise_precision_from_snr(&cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..instances {
        let h = generate_channel(&cfg, &mut rng);
        let mut cn = |var: f64| {
            let z: Complex64 = Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
            z * (var / 2.0).sqrt()
        };
        let b: Vec<Complex64> = (0..cols).map(|_| cn(1.0)).collect();
        let y: Vec<Complex64> = (0..rows)
            .map(|n| (0..cols).map(|k| h.0[[n, k]] * b[k]).sum::<Complex64>() + cn(1.0 / lambda))
            .collect();
        let prior_mean = vec![Complex64::new(0.0, 0.0); cols];
        let prior_var = vec![1.0; cols];
        let want = lmmse(&h, &y, lambda, &prior_mean, &prior_var);
        let denoiser = GaussianDenoiser {
            mean: prior_mean.clone(),
            var: prior_var.clone(),
        };
        let sensing = SensingMatrix::new(&h);
        let mut state = GampState::new(&prior_mean, &prior_var, rows)?;
        let y = ndarray::Array1::from(y);
        for _ in 0..iters {
            state.iterate(&sensing, y.view(), lambda, &denoiser, damping)?;
        }
        let err: f64 = state.mean.iter().zip(&want).map(|(a, b)| (a - b).norm_sqr()).sum();
        let norm: f64 = want.iter().map(|b| b.norm_sqr()).sum();
        worst = worst.max((err / norm).sqrt());
    }
    Ok(worst)
}

/// One scalar example: the library's value against an independently
/// evaluated reference.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitVector {
    pub name: &'static str,
    pub computed: f64,
    pub expected: f64,
}

impl UnitVector {
    pub fn error(&self) -> f64 {
        (self.computed - self.expected).abs()
    }
}

/// Knobs for negative controls of the unit-vector table.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Perturbation {
    /// Added to the `1/2` coefficient of the surrogate digamma
    /// `ln x − 1/(2x)`.
    pub psi_coefficient: f64,
}

/// Scalar examples with references from closed forms or arbitrary-precision
/// evaluation.
pub fn unit_vectors(perturb: Perturbation) -> Result<Vec<UnitVector>> {
    let zero = Complex64::new(0.0, 0.0);
    let flat = BetaBelief::new(1.0, 1.0);
    let unit = GammaBelief::new(1.0, 1.0);
    let lambda_at = |snr_db: f64| {
        noise_precision_from_snr(&SystemConfig {
            snr_db,
            ..SystemConfig::default()
        })
    };
    let vector = |name, computed, expected| UnitVector { name, computed, expected };
    let psi = |x: f64| Ok::<f64, crate::Error>(psi_paper(x)? - perturb.psi_coefficient / x);
    let surrogate_log_mean = psi(1.0)? - psi(2.0)?;
    let scaled = GammaBelief::new(10.0, 10.0);
    let c_surrogate = mc_constants(flat, flat, PsiMode::Paper)?;
    let c_exact = mc_constants(flat, flat, PsiMode::Exact)?;

    let h = Array2::from_elem((1, 1), Complex64::new(1.0, 0.0));
    let sensing = SensingMatrix::new(&crate::model::ChannelMatrix(h));
    let mut state = GampState::new(&[zero], &[1.0], 1)?;
    let y = ndarray::Array1::from(vec![Complex64::new(1.0, 0.0)]);
    for _ in 0..50 {
        state.iterate(&sensing, y.view(), 1.0, &GaussianDenoiser::iid(1, 1.0), 1.0)?;
    }

    Ok(vec![
        vector("noise precision at 0 dB", lambda_at(0.0), 5.0),
        vector("noise precision at 9 dB", lambda_at(9.0), 39.716_411_736_214_06),
        vector("digamma(1)", digamma_exact(1.0)?, -0.577_215_664_901_532_9),
        vector("digamma(2)", digamma_exact(2.0)?, 0.422_784_335_098_467_1),
        vector("digamma(10)", digamma_exact(10.0)?, 2.251_752_589_066_721),
        vector("surrogate psi(1)", psi(1.0)?, -0.5),
        vector("surrogate psi(1) - psi(2)", surrogate_log_mean, -0.943_147_180_559_945_3),
        vector(
            "beta log-expectation, surrogate",
            beta_log_expectations(1.0, 1.0, PsiMode::Paper)?.0,
            -0.943_147_180_559_945_3,
        ),
        vector(
            "beta log-expectation, exact",
            beta_log_expectations(1.0, 1.0, PsiMode::Exact)?.0,
            -1.0,
        ),
        vector(
            "activation likelihood, unit beliefs",
            activation_likelihood(zero, 1.0, unit, PsiMode::Paper)?.p1(),
            0.232_696_537_618_898_64,
        ),
        vector(
            "activation likelihood, beliefs scaled by 10",
            activation_likelihood(zero, 1.0, scaled, PsiMode::Paper)?.p1(),
            0.322_316_325_733_178_9,
        ),
        vector("chain constant, surrogate", c_surrogate.c1, 0.389_400_391_535_702_44),
        vector("chain constant, exact", c_exact.c1, 0.367_879_441_171_442_33),
        vector(
            "joint activity, flat prior",
            joint_belief(zero, 1.0, BernoulliMessage::new(0.5), unit, PsiMode::Paper)?.active,
            0.232_696_537_618_898_64,
        ),
        vector("scalar GAMP fixed point", state.mean[0].re, 0.5),
    ])
}

/// Outcome of [`invariant_sweep`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct InvariantReport {
    pub iterations: usize,
    /// Descriptions of the first violations seen, at most ten.
    pub violations: Vec<String>,
    pub violation_count: usize,
}

impl InvariantReport {
    fn flag(&mut self, ok: bool, what: impl FnOnce() -> String) {
        if !ok {
            self.violation_count += 1;
            if self.violations.len() < 10 {
                self.violations.push(what());
            }
        }
    }
}

/// Steps BG-MC and SBL detectors on randomized systems (SNR from −10 to
/// 40 dB, varied sizes, activity, burst length, ψ mode and damping) for at
/// least `iterations` outer iterations in total, checking after every
/// iteration that all quantities are finite, probabilities stay within the
/// clamps, Beta and Gamma parameters stay positive and `v_b ≥ 0`.
pub fn invariant_sweep(iterations: usize, seed: u64) -> Result<InvariantReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = InvariantReport::default();
    let prob_ok = |p: f64| (EPS..=1.0 - EPS).contains(&p);
    while report.iterations < iterations {
        let activity_rate = rng.gen_range(0.05..0.5);
        let system = SystemConfig {
            num_users: rng.gen_range(2..=24),
            num_subcarriers: rng.gen_range(4..=40),
            num_slots: rng.gen_range(1..=8),
            activity_rate,
            snr_db: rng.gen_range(-10.0..40.0),
            mean_burst_len: rng.gen_range(1.5..6.0),
            scenario: if rng.gen_bool(0.5) { Scenario::Partial } else { Scenario::Full },
            ..SystemConfig::default()
        };
        let system = match system.markov_rates() {
            Ok(_) => system,
            Err(_) => SystemConfig {
                scenario: Scenario::Full,
                ..system
            },
        };
        let inst = generate_instance(&system, &mut rng)?;
        let cfg = DetectorConfig {
            psi_mode: if rng.gen_bool(0.5) { PsiMode::Paper } else { PsiMode::Exact },
            damping: if rng.gen_bool(0.5) { 1.0 } else { rng.gen_range(0.3..1.0) },
            ..DetectorConfig::default()
        };
        let (y, h) = (&inst.received, &inst.channel);
        let steps = 25;
        let finite = |z: &Complex64| z.re.is_finite() && z.im.is_finite();

        let mut bgmc = BgmcDetector::new(y, h, &cfg)?;
        for _ in 0..steps {
            let change = bgmc.step()?;
            report.iterations += 1;
            report.flag(change.is_finite(), || "non-finite relative change".into());
            let post = bgmc.posterior();
            report.flag(post.mean.iter().all(finite), || "non-finite posterior mean".into());
            report.flag(post.var.iter().all(|v| v.is_finite() && *v >= 0.0), || {
                "posterior variance negative or non-finite".into()
            });
            report.flag(post.activity.iter().all(|&p| prob_ok(p)), || "activity outside clamps".into());
            let m = bgmc.messages();
            for (name, field) in [
                ("likelihood", &m.likelihood),
                ("down", &m.down),
                ("down_post", &m.down_post),
                ("up", &m.up),
                ("up_post", &m.up_post),
                ("prior", &m.prior),
            ] {
                report.flag(field.iter().all(|&p| prob_ok(p)), || format!("{name} message outside clamps"));
            }
            report.flag(
                bgmc.transition_beliefs()
                    .all(|(p10, p01)| [p10.a, p10.b, p01.a, p01.b].iter().all(|x| x.is_finite() && *x > 0.0)),
                || "Beta parameter not positive".into(),
            );
            report.flag(
                bgmc.precision_beliefs()
                    .iter()
                    .all(|g| g.shape.is_finite() && g.rate.is_finite() && g.shape > 0.0 && g.rate > 0.0),
                || "Gamma parameter not positive".into(),
            );
            report.flag(
                bgmc.constants()
                    .iter()
                    .all(|c| [c.c1, c.c2, c.c3, c.c4].iter().all(|x| x.is_finite() && *x > 0.0)),
                || "chain constant not positive".into(),
            );
            report.flag(
                bgmc.gamp_variances().all(|v| v.is_finite() && (0.0..=VAR_MAX).contains(&v)),
                || "GAMP variance outside clamps".into(),
            );
        }

        let mut sbl = SblDetector::new(y, h, &cfg, rng.gen_range(0.0..1.0))?;
        for _ in 0..steps {
            let change = sbl.step()?;
            report.iterations += 1;
            report.flag(change.is_finite(), || "non-finite relative change".into());
            let post = sbl.posterior();
            report.flag(post.mean.iter().all(finite), || "non-finite SBL mean".into());
            report.flag(post.var.iter().all(|v| v.is_finite() && *v >= 0.0), || {
                "SBL variance negative or non-finite".into()
            });
            report.flag(
                sbl.precision_beliefs()
                    .iter()
                    .all(|g| g.shape.is_finite() && g.rate.is_finite() && g.shape > 0.0 && g.rate > 0.0),
                || "SBL Gamma parameter not positive".into(),
            );
        }
    }
    Ok(report)
}

/// Wall time of one BG-MC outer iteration on a `system` instance: the
/// fastest of `repeats` runs of `steps` iterations, divided by `steps`.
pub fn bgmc_iteration_time(
    system: &SystemConfig,
    steps: usize,
    repeats: usize,
    seed: u64,
) -> Result<std::time::Duration> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inst = generate_instance(system, &mut rng)?;
    let cfg = DetectorConfig::default();
    let mut best = std::time::Duration::MAX;
    for _ in 0..repeats.max(1) {
        let mut det = BgmcDetector::new(&inst.received, &inst.channel, &cfg)?;
        let start = std::time::Instant::now();
        for _ in 0..steps {
            det.step()?;
        }
        best = best.min(start.elapsed());
    }
    Ok(best / steps.max(1) as u32)
}
