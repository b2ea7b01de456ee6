//! Frame-level detectors built on the per-slot GAMP engine.
//!
//! All detectors share the same outer loop: one GAMP output/input pass per
//! slot, a prior-specific update that maps the pseudo-observations `(q̂, v_q)`
//! to posterior moments of `b`, and a relative-change convergence test on
//! the posterior means.

mod bgmc;
mod genie;
mod sbl;

use ndarray::{Array2, ArrayView2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bgmc::HyperpriorConfig;
use crate::gamp::{GampState, SensingMatrix};
use crate::model::{ChannelMatrix, Modulation, ReceivedFrame};
use crate::numerics::{clamp_prob, PsiMode, EPS};
use crate::{Error, Result};

pub use self::bgmc::{detect_gamp_bgmc, BgmcDetector};
pub use self::genie::detect_genie_bg;
pub use self::sbl::{detect_gamp_pcsbl, detect_gamp_sbl, SblDetector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    /// GAMP with the Bernoulli-Gaussian Markov-chain prior.
    #[serde(alias = "gamp_bgmc", alias = "bg-mc")]
    Bgmc,
    #[serde(alias = "gamp_sbl")]
    Sbl,
    #[serde(alias = "gamp_pcsbl")]
    Pcsbl,
    /// Fixed i.i.d. Bernoulli-Gaussian prior with the true activity rate.
    #[serde(alias = "genie_bg")]
    Genie,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Bgmc => "GAMP-BG-MC",
            Algorithm::Sbl => "GAMP-SBL",
            Algorithm::Pcsbl => "GAMP-PCSBL",
            Algorithm::Genie => "GAMP-GenieBG",
        }
    }
}

/// Gamma hyperprior `(ε, η)` of the SBL precisions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SblPrior {
    pub epsilon: f64,
    pub eta: f64,
}

impl Default for SblPrior {
    fn default() -> Self {
        Self {
            epsilon: 1e-6,
            eta: 1e-6,
        }
    }
}

/// Hard-decision rule of the activity-aware detectors (BG-MC, genie).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Slicer {
    /// Most probable of `{0} ∪ constellation` given `(q̂, v_q)` and the prior
    /// activity.
    #[default]
    Map,
    /// Posterior activity above `activity_threshold`, sign of the slab mean.
    Threshold,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    pub algorithm: Algorithm,
    pub max_iters: usize,
    pub convergence_tol: f64,
    /// Blend factor for new GAMP estimates; 1 disables damping.
    pub damping: f64,
    /// GAMP passes per outer iteration.
    pub inner_iters: usize,
    pub psi_mode: PsiMode,
    pub slicer: Slicer,
    /// With [`Slicer::Threshold`]: declare active when the posterior activity
    /// exceeds this.
    pub activity_threshold: f64,
    /// SBL and PCSBL: declare active when `|b̂|²` exceeds this fraction of the
    /// mean symbol energy.
    pub energy_threshold: f64,
    /// PCSBL weight of the neighbouring slots.
    pub pcsbl_beta: f64,
    /// Genie activity rate.
    pub genie_activity_rate: f64,
    pub hyperprior: HyperpriorConfig,
    pub sbl_prior: SblPrior,
    pub modulation: Modulation,
    /// Keep a posterior snapshot after every outer iteration.
    pub record_snapshots: bool,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::Bgmc,
            max_iters: 20,
            convergence_tol: 1e-4,
            damping: 1.0,
            inner_iters: 1,
            psi_mode: PsiMode::Paper,
            slicer: Slicer::Map,
            activity_threshold: 0.5,
            energy_threshold: 0.25,
            pcsbl_beta: 0.5,
            genie_activity_rate: 0.3,
            hyperprior: HyperpriorConfig::default(),
            sbl_prior: SblPrior::default(),
            modulation: Modulation::Bpsk,
            record_snapshots: false,
        }
    }
}

impl DetectorConfig {
    pub fn for_algorithm(algorithm: Algorithm) -> Self {
        Self {
            algorithm,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::invalid("max_iters", "must be at least 1"));
        }
        if !(self.convergence_tol > 0.0) {
            return Err(Error::invalid("convergence_tol", "must be > 0"));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::invalid("damping", "must lie in (0, 1]"));
        }
        if self.inner_iters == 0 {
            return Err(Error::invalid("inner_iters", "must be at least 1"));
        }
        if !(self.activity_threshold > 0.0 && self.activity_threshold < 1.0) {
            return Err(Error::invalid("activity_threshold", "must lie in (0, 1)"));
        }
        if !(self.energy_threshold > 0.0) {
            return Err(Error::invalid("energy_threshold", "must be > 0"));
        }
        if !(self.pcsbl_beta >= 0.0 && self.pcsbl_beta.is_finite()) {
            return Err(Error::invalid("pcsbl_beta", "must be >= 0"));
        }
        if !(self.genie_activity_rate >= 0.0 && self.genie_activity_rate <= 1.0) {
            return Err(Error::invalid("genie_activity_rate", "must lie in [0, 1]"));
        }
        if !(self.sbl_prior.epsilon > 0.0 && self.sbl_prior.eta > 0.0) {
            return Err(Error::invalid("sbl_prior", "epsilon and eta must be > 0"));
        }
        self.hyperprior.validate()
    }
}

/// Posterior summary over the `K x J` frame.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSummary {
    /// Posterior means `b̂`.
    pub mean: Array2<Complex64>,
    /// Posterior variances `v_b`.
    pub var: Array2<f64>,
    /// Posterior activity probability; 1 for detectors without an activity
    /// variable.
    pub activity: Array2<f64>,
    /// Mean of the active component (`b̂` itself for Gaussian priors).
    pub slab_mean: Array2<Complex64>,
    /// GAMP pseudo-observations `q̂` the posterior was computed from.
    pub pseudo_obs: Array2<Complex64>,
    /// Their variances `v_q`.
    pub pseudo_var: Array2<f64>,
    /// Prior activity probability fed to the signal factor.
    pub prior_activity: Array2<f64>,
}

impl PosteriorSummary {
    fn zeros(users: usize, slots: usize) -> Self {
        Self {
            mean: Array2::zeros((users, slots)),
            var: Array2::zeros((users, slots)),
            activity: Array2::zeros((users, slots)),
            slab_mean: Array2::zeros((users, slots)),
            pseudo_obs: Array2::zeros((users, slots)),
            pseudo_var: Array2::from_elem((users, slots), 1.0),
            prior_activity: Array2::from_elem((users, slots), 1.0),
        }
    }
}

/// Hard decisions: `symbols` holds BPSK signs, 0 where inactive.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HardDecision {
    pub symbols: Array2<i8>,
    pub activity: Array2<u8>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DecisionRule {
    /// Active iff posterior activity is strictly above the threshold.
    Activity(f64),
    /// Active iff `|b̂|²` is strictly above the threshold.
    Energy(f64),
    /// Most probable of `{0} ∪ constellation` given `(q̂, v_q)` and the prior
    /// activity.
    Map(Modulation),
}

impl DecisionRule {
    pub fn for_config(cfg: &DetectorConfig) -> Self {
        match cfg.algorithm {
            Algorithm::Bgmc | Algorithm::Genie => match cfg.slicer {
                Slicer::Map => DecisionRule::Map(cfg.modulation),
                Slicer::Threshold => DecisionRule::Activity(cfg.activity_threshold),
            },
            Algorithm::Sbl | Algorithm::Pcsbl => {
                DecisionRule::Energy(cfg.energy_threshold * cfg.modulation.symbol_energy())
            }
        }
    }

    pub fn apply(self, post: &PosteriorSummary) -> HardDecision {
        match self {
            DecisionRule::Activity(threshold) => decide_symbols(post, threshold),
            DecisionRule::Energy(threshold) => decide_by_energy(post, threshold),
            DecisionRule::Map(modulation) => decide_map(post, modulation),
        }
    }
}

fn bpsk_sign(z: Complex64) -> i8 {
    // ties resolve to +1
    if z.re >= 0.0 {
        1
    } else {
        -1
    }
}

/// Threshold the posterior activity; active entries take the sign of the
/// real part of the active-component mean.
pub fn decide_symbols(post: &PosteriorSummary, threshold: f64) -> HardDecision {
    let activity = post.activity.mapv(|b| (b > threshold) as u8);
    let mut symbols = Array2::zeros(activity.dim());
    ndarray::Zip::from(&mut symbols)
        .and(&activity)
        .and(&post.slab_mean)
        .for_each(|x, &s, &mu| *x = if s == 1 { bpsk_sign(mu) } else { 0 });
    HardDecision { symbols, activity }
}

/// Threshold the posterior energy `|b̂|²`.
pub fn decide_by_energy(post: &PosteriorSummary, threshold: f64) -> HardDecision {
    let activity = post.mean.mapv(|b| (b.norm_sqr() > threshold) as u8);
    let mut symbols = Array2::zeros(activity.dim());
    ndarray::Zip::from(&mut symbols)
        .and(&activity)
        .and(&post.mean)
        .for_each(|x, &s, &b| *x = if s == 1 { bpsk_sign(b) } else { 0 });
    HardDecision { symbols, activity }
}

/// Joint MAP decision over `{0} ∪ constellation` from the pseudo-observation
/// `q̂ ~ CN(b, v_q)` and the prior activity, active points equiprobable.
pub fn decide_map(post: &PosteriorSummary, modulation: Modulation) -> HardDecision {
    let points = modulation.constellation();
    let log_points = (points.len() as f64).ln();
    let dim = post.pseudo_obs.dim();
    let mut symbols = Array2::zeros(dim);
    let mut activity = Array2::zeros(dim);
    for ((k, j), &q) in post.pseudo_obs.indexed_iter() {
        let v = post.pseudo_var[[k, j]].max(EPS);
        let p = clamp_prob(post.prior_activity[[k, j]]).clamp(EPS, 1.0 - EPS);
        // common -ln(πv) dropped
        let mut best = ((1.0 - p).ln() - q.norm_sqr() / v, None);
        for &x in points {
            let score = p.ln() - log_points - (q - x).norm_sqr() / v;
            if score > best.0 {
                best = (score, Some(x));
            }
        }
        if let Some(x) = best.1 {
            activity[[k, j]] = 1;
            symbols[[k, j]] = bpsk_sign(x);
        }
    }
    HardDecision { symbols, activity }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionResult {
    pub posterior: PosteriorSummary,
    pub decision: HardDecision,
    pub iterations_used: usize,
    pub converged: bool,
    /// Posterior after each outer iteration, when requested.
    pub snapshots: Vec<PosteriorSummary>,
}

/// Runs the configured detector.
pub fn detect(
    y: &ReceivedFrame,
    h: &ChannelMatrix,
    cfg: &DetectorConfig,
) -> Result<DetectionResult> {
    match cfg.algorithm {
        Algorithm::Bgmc => detect_gamp_bgmc(y, h, cfg),
        Algorithm::Sbl => detect_gamp_sbl(y, h, cfg),
        Algorithm::Pcsbl => detect_gamp_pcsbl(y, h, cfg),
        Algorithm::Genie => detect_genie_bg(y, h, cfg),
    }
}

fn check_inputs(y: &ReceivedFrame, h: &ChannelMatrix) -> Result<()> {
    if y.y.nrows() != h.num_subcarriers() {
        return Err(Error::DimensionMismatch {
            context: "detector: observation rows vs channel rows",
            expected: h.num_subcarriers().to_string(),
            actual: y.y.nrows().to_string(),
        });
    }
    if y.y.ncols() == 0 || h.num_users() == 0 {
        return Err(Error::DimensionMismatch {
            context: "detector: empty frame",
            expected: "at least one user and one slot".into(),
            actual: format!("{} users, {} slots", h.num_users(), y.y.ncols()),
        });
    }
    if !(y.noise_precision > 0.0 && y.noise_precision.is_finite()) {
        return Err(Error::invalid("noise_precision", "must be finite and > 0"));
    }
    let finite = |z: &Complex64| z.re.is_finite() && z.im.is_finite();
    if !y.y.iter().all(finite) {
        return Err(Error::NonFinite("observations"));
    }
    if !h.0.iter().all(finite) {
        return Err(Error::NonFinite("channel matrix"));
    }
    Ok(())
}

/// Per-slot GAMP states and the shared sensing matrix.
#[derive(Debug, Clone)]
struct SlotBank {
    h: SensingMatrix,
    slots: Vec<GampState>,
}

impl SlotBank {
    fn new(h: &ChannelMatrix, slots: usize, prior_var: f64) -> Result<Self> {
        let users = h.num_users();
        let zero = vec![Complex64::new(0.0, 0.0); users];
        let var = vec![prior_var; users];
        let state = GampState::new(&zero, &var, h.num_subcarriers())?;
        Ok(Self {
            h: SensingMatrix::new(h),
            slots: vec![state; slots],
        })
    }

    /// Output and input steps for every slot.
    fn propagate(&mut self, y: ArrayView2<'_, Complex64>, noise_precision: f64, damping: f64) {
        for (j, state) in self.slots.iter_mut().enumerate() {
            state.output_step(&self.h, y.column(j), noise_precision, damping);
            state.input_step(&self.h);
        }
    }

    fn means(&self) -> Array2<Complex64> {
        let users = self.h.cols();
        Array2::from_shape_fn((users, self.slots.len()), |(k, j)| self.slots[j].mean[k])
    }
}

/// `Σ|new − old|² / max(Σ|old|², EPS)`.
fn relative_change(new: &Array2<Complex64>, old: &Array2<Complex64>) -> f64 {
    let diff: f64 = new
        .iter()
        .zip(old.iter())
        .map(|(a, b)| (a - b).norm_sqr())
        .sum();
    let base: f64 = old.iter().map(|z| z.norm_sqr()).sum();
    diff / base.max(EPS)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn summary(activity: f64, mu: f64) -> PosteriorSummary {
        let mut s = PosteriorSummary::zeros(1, 1);
        s.activity[[0, 0]] = activity;
        s.slab_mean[[0, 0]] = Complex64::new(mu, 0.0);
        s.mean[[0, 0]] = Complex64::new(mu * activity, 0.0);
        s
    }

    #[test]
    fn decide_symbols_examples() {
        let d = decide_symbols(&summary(0.9, -0.3), 0.5);
        assert_eq!((d.symbols[[0, 0]], d.activity[[0, 0]]), (-1, 1));
        let d = decide_symbols(&summary(0.4, 0.8), 0.5);
        assert_eq!((d.symbols[[0, 0]], d.activity[[0, 0]]), (0, 0));
        let d = decide_symbols(&summary(0.5, 0.8), 0.5);
        assert_eq!(d.activity[[0, 0]], 0);
        let d = decide_symbols(&summary(0.9, 0.0), 0.5);
        assert_eq!(d.symbols[[0, 0]], 1);
    }

    #[test]
    fn energy_rule() {
        let d = decide_by_energy(&summary(1.0, -0.6), 0.25);
        assert_eq!(d.symbols[[0, 0]], -1);
        let d = decide_by_energy(&summary(1.0, 0.5), 0.25);
        assert_eq!(d.symbols[[0, 0]], 0);
    }

    fn observed(q: f64, v: f64, prior: f64) -> PosteriorSummary {
        let mut s = PosteriorSummary::zeros(1, 1);
        s.pseudo_obs[[0, 0]] = Complex64::new(q, 0.0);
        s.pseudo_var[[0, 0]] = v;
        s.prior_activity[[0, 0]] = prior;
        s
    }

    #[test]
    fn map_rule() {
        let d = decide_map(&observed(0.3, 0.0126, 0.3), Modulation::Bpsk);
        assert_eq!((d.symbols[[0, 0]], d.activity[[0, 0]]), (0, 0));
        let d = decide_map(&observed(-0.8, 0.0126, 0.3), Modulation::Bpsk);
        assert_eq!((d.symbols[[0, 0]], d.activity[[0, 0]]), (-1, 1));
        // equal priors on 0 and +1 put the boundary at q = 1/2
        let p = 2.0 / 3.0;
        assert_eq!(decide_map(&observed(0.49, 0.1, p), Modulation::Bpsk).activity[[0, 0]], 0);
        assert_eq!(decide_map(&observed(0.51, 0.1, p), Modulation::Bpsk).symbols[[0, 0]], 1);
        assert_eq!(decide_map(&observed(0.9, 0.1, 1e-30), Modulation::Bpsk).activity[[0, 0]], 0);
    }

    #[test]
    fn config_validation() {
        assert!(DetectorConfig::default().validate().is_ok());
        let bad = DetectorConfig {
            activity_threshold: 1.0,
            ..DetectorConfig::default()
        };
        assert!(matches!(
            bad.validate(),
            Err(Error::InvalidConfig { field: "activity_threshold", .. })
        ));
        let bad = DetectorConfig {
            max_iters: 0,
            ..DetectorConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    proptest::proptest! {
        #[test]
        fn raising_threshold_shrinks_active_set(acts in proptest::collection::vec(0.0..1.0f64, 12),
                                                t1 in 0.01..0.99f64, dt in 0.0..0.5f64) {
            let mut s = PosteriorSummary::zeros(3, 4);
            for (i, a) in acts.iter().enumerate() {
                s.activity[[i / 4, i % 4]] = *a;
            }
            let lo = decide_symbols(&s, t1);
            let hi = decide_symbols(&s, (t1 + dt).min(0.999));
            for (a, b) in lo.activity.iter().zip(hi.activity.iter()) {
                proptest::prop_assert!(b <= a);
            }
        }
    }
}
