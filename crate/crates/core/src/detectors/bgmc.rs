//! GAMP-BG-MC: turbo iteration between per-slot GAMP and the Markov-chain
//! activity prior, with online learning of the transition probabilities and
//! signal precisions.

use ndarray::Array2;
use num_complex::Complex64;

use super::{
    check_inputs, relative_change, DecisionRule, DetectionResult, DetectorConfig,
    PosteriorSummary, SlotBank,
};
use crate::bgmc::{
    activation_likelihood, joint_belief, mc_backward, mc_constants, mc_forward,
    pairwise_beliefs, posterior_moments, prior_activity, update_precision,
    update_transition_beliefs, BernoulliMessage, BetaBelief, GammaBelief, McConstants,
};
use crate::model::{ChannelMatrix, ReceivedFrame};
use crate::Result;

/// Chain messages of every user, `K x J`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainMessages {
    pub likelihood: Array2<f64>,
    pub down: Array2<f64>,
    pub down_post: Array2<f64>,
    pub up: Array2<f64>,
    pub up_post: Array2<f64>,
    /// Prior activity sent back to the signal factor.
    pub prior: Array2<f64>,
}

impl ChainMessages {
    fn new(users: usize, slots: usize) -> Self {
        let half = Array2::from_elem((users, slots), 0.5);
        Self {
            likelihood: half.clone(),
            down: half.clone(),
            down_post: half.clone(),
            up: half.clone(),
            up_post: half.clone(),
            prior: half,
        }
    }
}

/// Stepwise GAMP-BG-MC detector. [`detect_gamp_bgmc`] drives it to
/// convergence; the accessors expose the internal beliefs for inspection.
#[derive(Debug, Clone)]
pub struct BgmcDetector<'a> {
    cfg: DetectorConfig,
    y: &'a ReceivedFrame,
    bank: SlotBank,
    users: usize,
    slots: usize,
    p10: Vec<BetaBelief>,
    p01: Vec<BetaBelief>,
    constants: Vec<McConstants>,
    precision: Array2<GammaBelief>,
    messages: ChainMessages,
    posterior: PosteriorSummary,
    iterations: usize,
}

impl<'a> BgmcDetector<'a> {
    pub fn new(y: &'a ReceivedFrame, h: &ChannelMatrix, cfg: &DetectorConfig) -> Result<Self> {
        cfg.validate()?;
        check_inputs(y, h)?;
        let (users, slots) = (h.num_users(), y.y.ncols());
        let hp = cfg.hyperprior;
        let p10 = vec![hp.p10_prior(); users];
        let p01 = vec![hp.p01_prior(); users];
        let cst = mc_constants(hp.p10_prior(), hp.p01_prior(), cfg.psi_mode)?;
        // prior second moment of b: initial activity times slab variance
        let init_activity = cst.c2 / (cst.c2 + cst.c3);
        let init_var = init_activity * hp.precision_prior().slab_variance();
        Ok(Self {
            cfg: cfg.clone(),
            y,
            bank: SlotBank::new(h, slots, init_var)?,
            users,
            slots,
            p10,
            p01,
            constants: vec![cst; users],
            precision: Array2::from_elem((users, slots), hp.precision_prior()),
            messages: ChainMessages::new(users, slots),
            posterior: PosteriorSummary::zeros(users, slots),
            iterations: 0,
        })
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn posterior(&self) -> &PosteriorSummary {
        &self.posterior
    }

    pub fn messages(&self) -> &ChainMessages {
        &self.messages
    }

    pub fn precision_beliefs(&self) -> &Array2<GammaBelief> {
        &self.precision
    }

    /// Per-user `(p10, p01)` beliefs.
    pub fn transition_beliefs(&self) -> impl Iterator<Item = (BetaBelief, BetaBelief)> + '_ {
        self.p10.iter().copied().zip(self.p01.iter().copied())
    }

    pub fn constants(&self) -> &[McConstants] {
        &self.constants
    }

    pub fn pseudo_observations(&self) -> (Array2<Complex64>, Array2<f64>) {
        let q = Array2::from_shape_fn((self.users, self.slots), |(k, j)| {
            self.bank.slots[j].pseudo_obs[k]
        });
        let v = Array2::from_shape_fn((self.users, self.slots), |(k, j)| {
            self.bank.slots[j].pseudo_var[k]
        });
        (q, v)
    }

    /// GAMP variances `(v_p, v_q, v_b)` flattened over all slots.
    pub fn gamp_variances(&self) -> impl Iterator<Item = f64> + '_ {
        self.bank.slots.iter().flat_map(|s| {
            s.prediction_var
                .iter()
                .chain(&s.pseudo_var)
                .chain(&s.var)
                .copied()
        })
    }

    /// Extra GAMP passes with the activity prior and precisions frozen.
    fn inner_passes(&mut self) -> Result<()> {
        let mode = self.cfg.psi_mode;
        let damping = self.cfg.damping;
        for _ in 1..self.cfg.inner_iters {
            for j in 0..self.slots {
                let prior = self.messages.prior.column(j).to_owned();
                let precision = self.precision.column(j).to_owned();
                let denoiser = |k: usize, q: Complex64, v_q: f64| {
                    let jb = joint_belief(q, v_q, BernoulliMessage::new(prior[k]), precision[k], mode)?;
                    let m = posterior_moments(&jb);
                    Ok((m.mean, m.var))
                };
                self.bank.slots[j].iterate(
                    &self.bank.h,
                    self.y.y.column(j),
                    self.y.noise_precision,
                    &denoiser,
                    damping,
                )?;
            }
        }
        Ok(())
    }

    fn sweep_user(&mut self, k: usize) {
        let cst = self.constants[k];
        let likelihood = self.messages.likelihood.row(k).to_vec();
        let (down, down_post) = mc_forward(&likelihood, &cst);
        let (up_post, up) = mc_backward(&likelihood, &cst);
        for j in 0..self.slots {
            self.messages.down[[k, j]] = down[j];
            self.messages.down_post[[k, j]] = down_post[j];
            self.messages.up[[k, j]] = up[j];
            self.messages.up_post[[k, j]] = up_post[j];
        }
    }

    /// One outer iteration. Returns the relative change of the posterior means.
    pub fn step(&mut self) -> Result<f64> {
        let mode = self.cfg.psi_mode;
        let hp = self.cfg.hyperprior;
        let previous = self.bank.means();

        self.inner_passes()?;
        // Part 1: pseudo-observations and activity likelihoods, using the
        // precision beliefs of the previous iteration
        self.bank
            .propagate(self.y.y.view(), self.y.noise_precision, self.cfg.damping);
        let (q, v_q) = self.pseudo_observations();
        for ((k, j), pi) in self.messages.likelihood.indexed_iter_mut() {
            *pi = activation_likelihood(q[[k, j]], v_q[[k, j]], self.precision[[k, j]], mode)?.p1();
        }

        for k in 0..self.users {
            // Part 2: forward/backward with the current transition beliefs
            self.sweep_user(k);
            // Part 3: learn the transition probabilities, then sweep again
            let row = |a: &Array2<f64>| a.row(k).to_vec();
            let pb = pairwise_beliefs(
                &row(&self.messages.down_post),
                &row(&self.messages.up_post),
                &row(&self.messages.up),
                &self.constants[k],
            );
            let (p10, p01) = update_transition_beliefs(&pb, &hp);
            self.p10[k] = p10;
            self.p01[k] = p01;
            self.constants[k] = mc_constants(p10, p01, mode)?;
            self.sweep_user(k);
        }

        // Part 4: precision learning and posterior moments
        let mut means = vec![Complex64::new(0.0, 0.0); self.users];
        let mut vars = vec![0.0; self.users];
        for j in 0..self.slots {
            for k in 0..self.users {
                let prior = prior_activity(self.messages.down[[k, j]], self.messages.up[[k, j]]);
                self.messages.prior[[k, j]] = prior.p1();
                let (qk, vk) = (q[[k, j]], v_q[[k, j]]);
                let jb = joint_belief(qk, vk, prior, self.precision[[k, j]], mode)?;
                let refreshed = update_precision(&jb, &hp);
                self.precision[[k, j]] = refreshed;
                let jb = joint_belief(qk, vk, prior, refreshed, mode)?;
                let m = posterior_moments(&jb);
                self.posterior.mean[[k, j]] = m.mean;
                self.posterior.var[[k, j]] = m.var;
                self.posterior.activity[[k, j]] = m.activity;
                self.posterior.slab_mean[[k, j]] = jb.mean;
                self.posterior.pseudo_obs[[k, j]] = qk;
                self.posterior.pseudo_var[[k, j]] = vk;
                self.posterior.prior_activity[[k, j]] = prior.p1();
                means[k] = m.mean;
                vars[k] = m.var;
            }
            self.bank.slots[j].apply_estimates(&means, &vars, self.cfg.damping);
        }

        self.iterations += 1;
        Ok(relative_change(&self.bank.means(), &previous))
    }
}

/// Runs GAMP-BG-MC until the relative change drops below the tolerance or
/// `max_iters` outer iterations have run.
pub fn detect_gamp_bgmc(
    y: &ReceivedFrame,
    h: &ChannelMatrix,
    cfg: &DetectorConfig,
) -> Result<DetectionResult> {
    let mut det = BgmcDetector::new(y, h, cfg)?;
    let mut snapshots = Vec::new();
    let mut converged = false;
    while det.iterations() < cfg.max_iters {
        let change = det.step()?;
        if cfg.record_snapshots {
            snapshots.push(det.posterior().clone());
        }
        if change < cfg.convergence_tol {
            converged = true;
            break;
        }
    }
    let posterior = det.posterior().clone();
    Ok(DetectionResult {
        decision: DecisionRule::for_config(cfg).apply(&posterior),
        posterior,
        iterations_used: det.iterations(),
        converged,
        snapshots,
    })
}
