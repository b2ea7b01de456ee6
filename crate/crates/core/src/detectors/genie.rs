//! GAMP with a fixed i.i.d. Bernoulli-Gaussian prior: activity rate known,
//! unit slab variance, nothing learned. Calibration baseline.

use num_complex::Complex64;

use super::{
    check_inputs, relative_change, DecisionRule, DetectionResult, DetectorConfig,
    PosteriorSummary, SlotBank,
};
use crate::model::{ChannelMatrix, ReceivedFrame};
use crate::numerics::{clamp_prob, log_cgauss, prob_from_log_odds};
use crate::Result;

const SLAB_VAR: f64 = 1.0;

/// Spike-and-slab posterior `(activity, slab mean, slab variance)`.
fn spike_slab(q: Complex64, v_q: f64, log_prior_odds: f64) -> Result<(f64, Complex64, f64)> {
    let zero = Complex64::new(0.0, 0.0);
    let log_ratio = log_cgauss(q, zero, v_q + SLAB_VAR)? - log_cgauss(q, zero, v_q)?;
    let active = prob_from_log_odds(log_prior_odds + log_ratio);
    let var = 1.0 / (1.0 / v_q + 1.0 / SLAB_VAR);
    Ok((active, q * (var / v_q), var))
}

pub fn detect_genie_bg(
    y: &ReceivedFrame,
    h: &ChannelMatrix,
    cfg: &DetectorConfig,
) -> Result<DetectionResult> {
    cfg.validate()?;
    check_inputs(y, h)?;
    let (users, slots) = (h.num_users(), y.y.ncols());
    let rate = clamp_prob(cfg.genie_activity_rate);
    let log_prior_odds = rate.ln() - (1.0 - rate).ln();
    let mut bank = SlotBank::new(h, slots, rate * SLAB_VAR)?;
    let mut posterior = PosteriorSummary::zeros(users, slots);
    let mut snapshots = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    let denoiser = |_: usize, q: Complex64, v_q: f64| {
        let (b, mu, var) = spike_slab(q, v_q, log_prior_odds)?;
        Ok((mu * b, b * var + b * (1.0 - b) * mu.norm_sqr()))
    };
    while iterations < cfg.max_iters {
        let previous = bank.means();
        for _ in 0..cfg.inner_iters {
            for (j, state) in bank.slots.iter_mut().enumerate() {
                state.iterate(&bank.h, y.y.column(j), y.noise_precision, &denoiser, cfg.damping)?;
            }
        }
        for (j, state) in bank.slots.iter().enumerate() {
            for k in 0..users {
                let (b, mu, _) = spike_slab(state.pseudo_obs[k], state.pseudo_var[k], log_prior_odds)?;
                posterior.mean[[k, j]] = state.mean[k];
                posterior.var[[k, j]] = state.var[k];
                posterior.activity[[k, j]] = b;
                posterior.slab_mean[[k, j]] = mu;
                posterior.pseudo_obs[[k, j]] = state.pseudo_obs[k];
                posterior.pseudo_var[[k, j]] = state.pseudo_var[k];
                posterior.prior_activity[[k, j]] = rate;
            }
        }
        iterations += 1;
        if cfg.record_snapshots {
            snapshots.push(posterior.clone());
        }
        if relative_change(&bank.means(), &previous) < cfg.convergence_tol {
            converged = true;
            break;
        }
    }
    Ok(DetectionResult {
        decision: DecisionRule::for_config(cfg).apply(&posterior),
        posterior,
        iterations_used: iterations,
        converged,
        snapshots,
    })
}
