//! Experiment configuration files (TOML or JSON).
//!
//! Every key is optional; missing keys take the defaults of the reference
//! setup (K = 20, N = 30, J = 6, p_a = 0.3, T = 20, 1000 trials, unit
//! hyperpriors). Unknown keys are rejected.

use std::path::Path;

use gfnoma_core::bgmc::HyperpriorConfig;
use gfnoma_core::detectors::{Algorithm, DetectorConfig, SblPrior, Slicer};
use gfnoma_core::harness::{ExperimentSpec, SerDenominator, SweepAxis};
use gfnoma_core::model::{Modulation, Scenario, SystemConfig};
use gfnoma_core::numerics::PsiMode;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Detector settings shared by every detector of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectorSection {
    pub damping: f64,
    pub inner_iters: usize,
    pub psi_mode: PsiMode,
    pub slicer: Slicer,
    pub activity_threshold: f64,
    pub energy_threshold: f64,
    pub pcsbl_beta: f64,
}

impl Default for DetectorSection {
    fn default() -> Self {
        let d = DetectorConfig::default();
        Self {
            damping: d.damping,
            inner_iters: d.inner_iters,
            psi_mode: d.psi_mode,
            slicer: d.slicer,
            activity_threshold: d.activity_threshold,
            energy_threshold: d.energy_threshold,
            pcsbl_beta: d.pcsbl_beta,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub num_users: usize,
    pub num_subcarriers: usize,
    pub num_slots: usize,
    pub activity_rate: f64,
    pub snr_db: f64,
    pub modulation: Modulation,
    pub scenario: Scenario,
    pub mean_burst_len: f64,
    pub max_iters: usize,
    pub convergence_tol: f64,
    pub detectors: Vec<Algorithm>,
    pub num_trials: usize,
    pub master_seed: u64,
    pub ser_denominator: SerDenominator,
    /// Points of `sweep-snr`.
    pub snr_values: Vec<f64>,
    /// Points of `sweep-pa`.
    pub activity_values: Vec<f64>,
    /// Points of `sweep-iter`; empty means `1..=max_iters`.
    pub iteration_values: Vec<f64>,
    pub detector: DetectorSection,
    pub hyperprior: HyperpriorConfig,
    pub sbl_prior: SblPrior,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let s = SystemConfig::default();
        let e = ExperimentSpec::default();
        Self {
            num_users: s.num_users,
            num_subcarriers: s.num_subcarriers,
            num_slots: s.num_slots,
            activity_rate: s.activity_rate,
            snr_db: s.snr_db,
            modulation: s.modulation,
            scenario: s.scenario,
            mean_burst_len: s.mean_burst_len,
            max_iters: s.max_iters,
            convergence_tol: s.convergence_tol,
            detectors: e.detectors,
            num_trials: e.num_trials,
            master_seed: e.master_seed,
            ser_denominator: e.ser_denominator,
            snr_values: vec![6.0, 9.0, 12.0],
            activity_values: vec![0.1, 0.2, 0.3, 0.4, 0.5],
            iteration_values: Vec::new(),
            detector: DetectorSection::default(),
            hyperprior: HyperpriorConfig::default(),
            sbl_prior: SblPrior::default(),
        }
    }
}

/// Which experiment a subcommand runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sweep {
    /// The base configuration only.
    Single,
    Snr,
    Iteration,
    ActivityRate,
}

impl ExperimentConfig {
    pub fn system(&self) -> SystemConfig {
        SystemConfig {
            num_users: self.num_users,
            num_subcarriers: self.num_subcarriers,
            num_slots: self.num_slots,
            activity_rate: self.activity_rate,
            snr_db: self.snr_db,
            modulation: self.modulation,
            scenario: self.scenario,
            mean_burst_len: self.mean_burst_len,
            max_iters: self.max_iters,
            convergence_tol: self.convergence_tol,
        }
    }

    pub fn detector_template(&self) -> DetectorConfig {
        let d = &self.detector;
        DetectorConfig {
            damping: d.damping,
            inner_iters: d.inner_iters,
            psi_mode: d.psi_mode,
            slicer: d.slicer,
            activity_threshold: d.activity_threshold,
            energy_threshold: d.energy_threshold,
            pcsbl_beta: d.pcsbl_beta,
            hyperprior: self.hyperprior,
            sbl_prior: self.sbl_prior,
            ..DetectorConfig::default()
        }
    }

    /// The validated experiment for one subcommand.
    pub fn spec(&self, sweep: Sweep) -> Result<ExperimentSpec, CliError> {
        let (axis, values) = match sweep {
            Sweep::Single => (SweepAxis::SnrDb, vec![self.snr_db]),
            Sweep::Snr => (SweepAxis::SnrDb, self.snr_values.clone()),
            Sweep::ActivityRate => (SweepAxis::ActivityRate, self.activity_values.clone()),
            Sweep::Iteration if self.iteration_values.is_empty() => (
                SweepAxis::Iteration,
                (1..=self.max_iters).map(|t| t as f64).collect(),
            ),
            Sweep::Iteration => (SweepAxis::Iteration, self.iteration_values.clone()),
        };
        let spec = ExperimentSpec {
            system: self.system(),
            detectors: self.detectors.clone(),
            detector: self.detector_template(),
            axis,
            values,
            num_trials: self.num_trials,
            master_seed: self.master_seed,
            ser_denominator: self.ser_denominator,
        };
        spec.validate().map_err(CliError::from_validation)?;
        Ok(spec)
    }
}

/// Parses a TOML document, or JSON when it starts with `{`.
pub fn parse_config_str(text: &str) -> Result<ExperimentConfig, CliError> {
    let cfg: ExperimentConfig = if text.trim_start().starts_with('{') {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("invalid JSON: {e}")))?
    } else {
        toml::from_str(text).map_err(|e| CliError::Config(format!("invalid TOML: {e}")))?
    };
    cfg.system().validate().map_err(CliError::from_validation)?;
    cfg.detector_template().validate().map_err(CliError::from_validation)?;
    if cfg.num_trials == 0 {
        return Err(CliError::Config("num_trials: must be at least 1".into()));
    }
    if cfg.detectors.is_empty() {
        return Err(CliError::Config("detectors: list must not be empty".into()));
    }
    Ok(cfg)
}

pub fn parse_config(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config_str(&text).map_err(|e| match e {
        CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}
