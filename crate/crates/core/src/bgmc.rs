//! Bernoulli-Gaussian prior with Markov-chain activity (BG-MC).
//!
//! Each entry `b[k][j]` is zero when user `k` is inactive in slot `j` and
//! `CN(0, 1/v[k][j])` otherwise. The activity states of a user form a binary
//! Markov chain with unknown transition probabilities `p10` (inactive to
//! active) and `p01` (active to inactive) under Beta priors; the precisions
//! `v` carry Gamma priors.
//!
//! Messages on the activity chain are all Bernoulli and stored as the
//! probability of the active state:
//!
//! | field        | direction                                          |
//! |--------------|----------------------------------------------------|
//! | `likelihood` | `f_B -> s`, evidence from the GAMP pseudo-observation |
//! | `down`       | transition factor into `s_j` from the past          |
//! | `down_post`  | `s_j` to the next transition, past plus own evidence |
//! | `up`         | transition factor into `s_j` from the future        |
//! | `up_post`    | `s_j` to the previous transition, future plus own evidence |
//! | prior        | `s -> f_B`, `down` fused with `up`                  |
//!
//! The transition factors enter the sweeps through the mean-field constants
//! `c1..c4`, the exponentiated expected logs of the transition probabilities.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::numerics::{
    beta_log_expectations, clamp_prob, fuse, log_cgauss, prob_from_log_odds, PsiMode,
};
use crate::{Error, Result};

/// Probability of the active state, always inside `[EPS, 1 − EPS]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct BernoulliMessage(f64);

impl BernoulliMessage {
    pub fn new(p1: f64) -> Self {
        Self(clamp_prob(p1))
    }

    pub fn p1(self) -> f64 {
        self.0
    }
}

impl Default for BernoulliMessage {
    fn default() -> Self {
        Self(0.5)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaBelief {
    pub a: f64,
    pub b: f64,
}

impl BetaBelief {
    pub fn new(a: f64, b: f64) -> Self {
        Self { a, b }
    }

    pub fn mean(&self) -> f64 {
        self.a / (self.a + self.b)
    }
}

/// `Ga(v; shape, rate)` belief over a signal precision.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaBelief {
    pub shape: f64,
    pub rate: f64,
}

impl GammaBelief {
    pub fn new(shape: f64, rate: f64) -> Self {
        Self { shape, rate }
    }

    /// `1 / E[v]`, the slab variance seen by the denoiser.
    pub fn slab_variance(&self) -> f64 {
        self.rate / self.shape
    }
}

/// Prior parameters shared by all users and entries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HyperpriorConfig {
    /// Gamma prior shape for each precision.
    pub epsilon: f64,
    /// Gamma prior rate for each precision.
    pub eta: f64,
    /// Beta prior of `p10`: `Be(e, f)`.
    pub e: f64,
    pub f: f64,
    /// Beta prior of `p01`: `Be(c, d)`.
    pub c: f64,
    pub d: f64,
}

impl Default for HyperpriorConfig {
    fn default() -> Self {
        Self {
            epsilon: 1.0,
            eta: 1.0,
            e: 1.0,
            f: 1.0,
            c: 1.0,
            d: 1.0,
        }
    }
}

impl HyperpriorConfig {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("epsilon", self.epsilon),
            ("eta", self.eta),
            ("e", self.e),
            ("f", self.f),
            ("c", self.c),
            ("d", self.d),
        ];
        for (name, v) in fields {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(name, format!("hyperprior must be > 0, got {v}")));
            }
        }
        Ok(())
    }

    pub fn precision_prior(&self) -> GammaBelief {
        GammaBelief::new(self.epsilon, self.eta)
    }

    pub fn p10_prior(&self) -> BetaBelief {
        BetaBelief::new(self.e, self.f)
    }

    pub fn p01_prior(&self) -> BetaBelief {
        BetaBelief::new(self.c, self.d)
    }
}

/// Mean-field surrogates of the transition probabilities:
/// `c1 = exp⟨ln(1−p01)⟩`, `c2 = exp⟨ln p10⟩`, `c3 = exp⟨ln(1−p10)⟩`,
/// `c4 = exp⟨ln p01⟩`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McConstants {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
}

impl McConstants {
    /// Weight of the transition `from -> to`.
    pub fn transition(&self, from: bool, to: bool) -> f64 {
        match (from, to) {
            (true, true) => self.c1,
            (true, false) => self.c4,
            (false, true) => self.c2,
            (false, false) => self.c3,
        }
    }

    /// Weight of the initial state.
    pub fn initial(&self, active: bool) -> f64 {
        if active {
            self.c2
        } else {
            self.c3
        }
    }
}

pub fn mc_constants(p10: BetaBelief, p01: BetaBelief, mode: PsiMode) -> Result<McConstants> {
    let (ln_p10, ln_not_p10) = beta_log_expectations(p10.a, p10.b, mode)?;
    let (ln_p01, ln_not_p01) = beta_log_expectations(p01.a, p01.b, mode)?;
    Ok(McConstants {
        c1: ln_not_p01.exp(),
        c2: ln_p10.exp(),
        c3: ln_not_p10.exp(),
        c4: ln_p01.exp(),
    })
}

/// `ln temp`: log-ratio of the active to inactive likelihood of `q̂`,
/// `ψ(ε̂) − ln ε̂ + ln CN(q̂; 0, v_q + η̂/ε̂) − ln CN(q̂; 0, v_q)`.
pub fn log_activation_ratio(
    q: Complex64,
    v_q: f64,
    precision: GammaBelief,
    mode: PsiMode,
) -> Result<f64> {
    let zero = Complex64::new(0.0, 0.0);
    let shape = precision.shape;
    let slab = log_cgauss(q, zero, v_q + precision.slab_variance())?;
    let spike = log_cgauss(q, zero, v_q)?;
    Ok(mode.eval(shape)? - shape.ln() + (slab - spike))
}

/// Message from the signal factor to the activity state.
pub fn activation_likelihood(
    q: Complex64,
    v_q: f64,
    precision: GammaBelief,
    mode: PsiMode,
) -> Result<BernoulliMessage> {
    Ok(BernoulliMessage::new(prob_from_log_odds(log_activation_ratio(
        q, v_q, precision, mode,
    )?)))
}

/// Forward sweep over one user's chain: `(down, down_post)`.
pub fn mc_forward(likelihood: &[f64], cst: &McConstants) -> (Vec<f64>, Vec<f64>) {
    let slots = likelihood.len();
    let mut down = Vec::with_capacity(slots);
    let mut down_post = Vec::with_capacity(slots);
    for (j, &pi) in likelihood.iter().enumerate() {
        let d = if j == 0 {
            cst.c2 / (cst.c2 + cst.c3)
        } else {
            let prev: f64 = down_post[j - 1];
            (prev * cst.c1 + (1.0 - prev) * cst.c2)
                / (prev * (cst.c1 + cst.c4) + (1.0 - prev) * (cst.c2 + cst.c3))
        };
        let d = clamp_prob(d);
        down.push(d);
        down_post.push(fuse(d, pi));
    }
    (down, down_post)
}

/// Backward sweep over one user's chain: `(up_post, up)`. The last slot has
/// no factor above it, so its `up` is fixed to 1/2.
pub fn mc_backward(likelihood: &[f64], cst: &McConstants) -> (Vec<f64>, Vec<f64>) {
    let slots = likelihood.len();
    let mut up = vec![0.5; slots];
    let mut up_post = vec![0.5; slots];
    if slots == 0 {
        return (up_post, up);
    }
    up_post[slots - 1] = clamp_prob(likelihood[slots - 1]);
    for j in (0..slots - 1).rev() {
        let next = up_post[j + 1];
        let u = (next * cst.c1 + (1.0 - next) * cst.c4)
            / (next * (cst.c1 + cst.c2) + (1.0 - next) * (cst.c3 + cst.c4));
        up[j] = clamp_prob(u);
        up_post[j] = fuse(up[j], likelihood[j]);
    }
    (up_post, up)
}

/// Message from the activity state back to the signal factor.
pub fn prior_activity(down: f64, up: f64) -> BernoulliMessage {
    BernoulliMessage::new(fuse(up, down))
}

/// Unnormalised pairwise beliefs of one transition. `b10` is the belief of
/// an inactive-to-active transition, `b01` of active-to-inactive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionBelief {
    pub b00: f64,
    pub b01: f64,
    pub b10: f64,
    pub b11: f64,
}

impl TransitionBelief {
    pub fn rho(&self) -> f64 {
        self.b00 + self.b01 + self.b10 + self.b11
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseBeliefs {
    /// Posterior probability that the first slot is active.
    pub first_active: f64,
    /// Entry `i` covers the transition from slot `i` into slot `i + 1`.
    pub transitions: Vec<TransitionBelief>,
}

pub fn pairwise_beliefs(
    down_post: &[f64],
    up_post: &[f64],
    up: &[f64],
    cst: &McConstants,
) -> PairwiseBeliefs {
    let transitions = (1..down_post.len())
        .map(|j| {
            let (prev, next) = (down_post[j - 1], up_post[j]);
            TransitionBelief {
                b11: prev * cst.c1 * next,
                b10: (1.0 - prev) * cst.c2 * next,
                b01: prev * cst.c4 * (1.0 - next),
                b00: (1.0 - prev) * cst.c3 * (1.0 - next),
            }
        })
        .collect();
    let first_active = if down_post.is_empty() {
        0.5
    } else {
        fuse(down_post[0], up[0]).clamp(0.0, 1.0)
    };
    PairwiseBeliefs {
        first_active,
        transitions,
    }
}

/// Conjugate refresh of the transition beliefs: `(p10, p01)`.
pub fn update_transition_beliefs(
    pb: &PairwiseBeliefs,
    hp: &HyperpriorConfig,
) -> (BetaBelief, BetaBelief) {
    let mut p10 = BetaBelief::new(pb.first_active + hp.e, 1.0 - pb.first_active + hp.f);
    let mut p01 = BetaBelief::new(hp.c, hp.d);
    for t in &pb.transitions {
        let rho = t.rho();
        p10.a += t.b10 / rho;
        p10.b += t.b00 / rho;
        p01.a += t.b01 / rho;
        p01.b += t.b11 / rho;
    }
    (p10, p01)
}

/// Belief over `(b, s)` for one entry: with probability `active` the entry
/// is `CN(mean, var)`, otherwise exactly zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointBelief {
    pub active: f64,
    pub mean: Complex64,
    pub var: f64,
}

pub fn joint_belief(
    q: Complex64,
    v_q: f64,
    prior: BernoulliMessage,
    precision: GammaBelief,
    mode: PsiMode,
) -> Result<JointBelief> {
    let var = 1.0 / (1.0 / v_q + precision.shape / precision.rate);
    let p = prior.p1();
    let log_odds = p.ln() - (1.0 - p).ln() + log_activation_ratio(q, v_q, precision, mode)?;
    Ok(JointBelief {
        active: prob_from_log_odds(log_odds),
        mean: q * (var / v_q),
        var,
    })
}

/// Gamma belief of the entry's precision given its current joint belief.
pub fn update_precision(jb: &JointBelief, hp: &HyperpriorConfig) -> GammaBelief {
    GammaBelief::new(
        hp.epsilon + jb.active,
        hp.eta + jb.active * (jb.mean.norm_sqr() + jb.var),
    )
}

/// Posterior mean, variance and activity of one entry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PosteriorMoments {
    pub mean: Complex64,
    pub var: f64,
    pub activity: f64,
}

pub fn posterior_moments(jb: &JointBelief) -> PosteriorMoments {
    let b = jb.active;
    // B(|μ|² + ϑ) − |Bμ|² rearranged so that it cannot go negative
    let var = b * jb.var + b * (1.0 - b) * jb.mean.norm_sqr();
    PosteriorMoments {
        mean: jb.mean * b,
        var: var.max(0.0),
        activity: b,
    }
}
