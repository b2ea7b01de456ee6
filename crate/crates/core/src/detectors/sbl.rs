//! GAMP-SBL and a pattern-coupled variant.
//!
//! Each entry has a Gaussian prior `CN(0, 1/γ)` with `γ ~ Ga(ε, η)`. Every
//! outer iteration computes the Gaussian posterior `(μ̂, ϑ)` of each entry
//! from `(q̂, v_q)` under the current mean precision `ε̂/η̂`, hands it back to
//! GAMP, then refreshes `ε̂ = ε + 1`, `η̂ = η + |μ̂|² + ϑ`.
//!
//! The coupled variant pools the second-moment statistic over the temporal
//! neighbours `j − 1` and `j + 1` with weight `β`; `β = 0` is plain SBL.

use ndarray::Array2;
use num_complex::Complex64;

use super::{
    check_inputs, relative_change, DecisionRule, DetectionResult, DetectorConfig,
    PosteriorSummary, SlotBank,
};
use crate::bgmc::GammaBelief;
use crate::model::{ChannelMatrix, ReceivedFrame};
use crate::Result;

#[derive(Debug, Clone)]
pub struct SblDetector<'a> {
    cfg: DetectorConfig,
    y: &'a ReceivedFrame,
    bank: SlotBank,
    coupling: f64,
    precision: Array2<GammaBelief>,
    posterior: PosteriorSummary,
    iterations: usize,
}

impl<'a> SblDetector<'a> {
    /// `coupling = 0` gives GAMP-SBL.
    pub fn new(
        y: &'a ReceivedFrame,
        h: &ChannelMatrix,
        cfg: &DetectorConfig,
        coupling: f64,
    ) -> Result<Self> {
        cfg.validate()?;
        check_inputs(y, h)?;
        let (users, slots) = (h.num_users(), y.y.ncols());
        let prior = GammaBelief::new(cfg.sbl_prior.epsilon, cfg.sbl_prior.eta);
        Ok(Self {
            cfg: cfg.clone(),
            y,
            bank: SlotBank::new(h, slots, prior.slab_variance())?,
            coupling,
            precision: Array2::from_elem((users, slots), prior),
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

    pub fn precision_beliefs(&self) -> &Array2<GammaBelief> {
        &self.precision
    }

    pub fn step(&mut self) -> Result<f64> {
        let previous = self.bank.means();
        let (users, slots) = self.precision.dim();
        let damping = self.cfg.damping;
        for _ in 1..self.cfg.inner_iters {
            for j in 0..slots {
                let precision = self.precision.column(j).to_owned();
                let denoiser = |k: usize, q: Complex64, v_q: f64| {
                    let g = precision[k];
                    let var = 1.0 / (1.0 / v_q + g.shape / g.rate);
                    Ok((q * (var / v_q), var))
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
        self.bank
            .propagate(self.y.y.view(), self.y.noise_precision, damping);

        // Gaussian posterior under the current precision beliefs
        let mut second_moment = Array2::<f64>::zeros((users, slots));
        for j in 0..slots {
            let state = &mut self.bank.slots[j];
            let mut means = vec![Complex64::new(0.0, 0.0); users];
            let mut vars = vec![0.0; users];
            for k in 0..users {
                let g = self.precision[[k, j]];
                let (q, v_q) = (state.pseudo_obs[k], state.pseudo_var[k]);
                let var = 1.0 / (1.0 / v_q + g.shape / g.rate);
                let mean = q * (var / v_q);
                means[k] = mean;
                vars[k] = var;
                second_moment[[k, j]] = mean.norm_sqr() + var;
                self.posterior.mean[[k, j]] = mean;
                self.posterior.slab_mean[[k, j]] = mean;
                self.posterior.var[[k, j]] = var;
                self.posterior.activity[[k, j]] = 1.0;
                self.posterior.pseudo_obs[[k, j]] = q;
                self.posterior.pseudo_var[[k, j]] = v_q;
            }
            state.apply_estimates(&means, &vars, damping);
        }

        // precision refresh, pooled over temporal neighbours
        let prior = self.cfg.sbl_prior;
        let beta = self.coupling;
        for ((k, j), g) in self.precision.indexed_iter_mut() {
            let mut weight = 1.0;
            let mut stat = second_moment[[k, j]];
            if j > 0 {
                weight += beta;
                stat += beta * second_moment[[k, j - 1]];
            }
            if j + 1 < slots {
                weight += beta;
                stat += beta * second_moment[[k, j + 1]];
            }
            *g = GammaBelief::new(prior.epsilon + weight, prior.eta + stat);
        }

        self.iterations += 1;
        Ok(relative_change(&self.bank.means(), &previous))
    }
}

fn run(
    y: &ReceivedFrame,
    h: &ChannelMatrix,
    cfg: &DetectorConfig,
    coupling: f64,
) -> Result<DetectionResult> {
    let mut det = SblDetector::new(y, h, cfg, coupling)?;
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

pub fn detect_gamp_sbl(
    y: &ReceivedFrame,
    h: &ChannelMatrix,
    cfg: &DetectorConfig,
) -> Result<DetectionResult> {
    run(y, h, cfg, 0.0)
}

pub fn detect_gamp_pcsbl(
    y: &ReceivedFrame,
    h: &ChannelMatrix,
    cfg: &DetectorConfig,
) -> Result<DetectionResult> {
    run(y, h, cfg, cfg.pcsbl_beta)
}
