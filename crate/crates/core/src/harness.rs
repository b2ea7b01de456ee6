//! Monte Carlo SER experiments.
//!
//! Every trial draws its instance from its own ChaCha stream keyed by
//! `(master_seed, sweep value, trial index)`, runs all detectors on that same
//! instance, and reports integer error counts. Aggregation is a sum over
//! trials in index order, so results do not depend on the worker count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detectors::{detect, Algorithm, DetectionResult, DetectorConfig, HardDecision};
use crate::model::{generate_instance, Instance, SymbolFrame, SystemConfig};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    /// SER after each outer iteration at the base configuration.
    Iteration,
    SnrDb,
    ActivityRate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SerDenominator {
    /// Errors over `trials · K · J` symbols.
    #[default]
    PerSymbol,
    /// Errors over `trials · K`, as the metric is commonly printed.
    PaperFormula,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub system: SystemConfig,
    pub detectors: Vec<Algorithm>,
    /// Template for every detector; algorithm, iteration budget, tolerance,
    /// modulation and genie rate are overwritten per run.
    pub detector: DetectorConfig,
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub num_trials: usize,
    pub master_seed: u64,
    pub ser_denominator: SerDenominator,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            system: SystemConfig::default(),
            detectors: vec![Algorithm::Bgmc, Algorithm::Sbl, Algorithm::Pcsbl],
            detector: DetectorConfig::default(),
            axis: SweepAxis::SnrDb,
            values: vec![6.0, 9.0, 12.0],
            num_trials: 1000,
            master_seed: 1,
            ser_denominator: SerDenominator::PerSymbol,
        }
    }
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        self.system.validate()?;
        if self.num_trials == 0 {
            return Err(Error::invalid("num_trials", "must be at least 1"));
        }
        if self.detectors.is_empty() {
            return Err(Error::invalid("detectors", "list must not be empty"));
        }
        if self.values.is_empty() {
            return Err(Error::invalid("sweep_values", "must not be empty"));
        }
        if !self.values.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::invalid("sweep_values", "must be strictly increasing"));
        }
        if self.axis == SweepAxis::Iteration
            && !self.values.iter().all(|&v| v >= 1.0 && v.fract() == 0.0)
        {
            return Err(Error::invalid(
                "sweep_values",
                "iteration sweep values must be positive integers",
            ));
        }
        for &v in &self.values {
            let system = self.system_at(v);
            system.validate()?;
            if system.scenario == crate::model::Scenario::Partial {
                system.markov_rates()?;
            }
        }
        self.detector_config(Algorithm::Bgmc, &self.system).validate()
    }

    /// System configuration at one sweep value.
    pub fn system_at(&self, value: f64) -> SystemConfig {
        let mut system = self.system.clone();
        match self.axis {
            SweepAxis::SnrDb => system.snr_db = value,
            SweepAxis::ActivityRate => system.activity_rate = value,
            SweepAxis::Iteration => system.max_iters = system.max_iters.max(value as usize),
        }
        system
    }

    fn detector_config(&self, algorithm: Algorithm, system: &SystemConfig) -> DetectorConfig {
        DetectorConfig {
            algorithm,
            max_iters: system.max_iters,
            convergence_tol: system.convergence_tol,
            modulation: system.modulation,
            genie_activity_rate: system.activity_rate,
            record_snapshots: self.axis == SweepAxis::Iteration,
            ..self.detector.clone()
        }
    }

    /// Sweep points at which trials are drawn; an iteration sweep draws one
    /// set of trials and reads every point from the snapshots.
    fn trial_points(&self) -> Vec<f64> {
        match self.axis {
            SweepAxis::Iteration => vec![self.values[self.values.len() - 1]],
            _ => self.values.clone(),
        }
    }
}

/// Counts for one detector on one trial.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DetectorTrial {
    pub algorithm: Algorithm,
    pub errors: u64,
    pub symbols: u64,
    pub iterations_used: usize,
    /// Errors after each outer iteration, padded with the final count up to
    /// the iteration budget. Empty unless snapshots were recorded.
    pub per_iteration_errors: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrialResult {
    pub trial_index: usize,
    pub detectors: Vec<DetectorTrial>,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Independent random stream for one trial.
pub fn trial_rng(master_seed: u64, sweep_value: f64, trial_index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(splitmix64(sweep_value.to_bits() ^ splitmix64(trial_index as u64)));
    rng
}

/// Hard BPSK labels of the transmitted frame: sign of the real part, 0 when
/// inactive.
pub fn truth_labels(symbols: &SymbolFrame) -> ndarray::Array2<i8> {
    symbols.0.mapv(|b| {
        if b.re > 0.0 {
            1
        } else if b.re < 0.0 {
            -1
        } else {
            0
        }
    })
}

/// Entries where the decision differs from the truth: missed detections,
/// false alarms and sign flips all count.
pub fn count_errors(decision: &HardDecision, truth: &ndarray::Array2<i8>) -> u64 {
    decision
        .symbols
        .iter()
        .zip(truth.iter())
        .filter(|(a, b)| a != b)
        .count() as u64
}

fn score(
    algorithm: Algorithm,
    result: &DetectionResult,
    cfg: &DetectorConfig,
    truth: &ndarray::Array2<i8>,
) -> DetectorTrial {
    let rule = crate::detectors::DecisionRule::for_config(cfg);
    let errors = count_errors(&result.decision, truth);
    let mut per_iteration_errors: Vec<u64> = result
        .snapshots
        .iter()
        .map(|s| count_errors(&rule.apply(s), truth))
        .collect();
    if !per_iteration_errors.is_empty() {
        per_iteration_errors.resize(cfg.max_iters, errors);
    }
    DetectorTrial {
        algorithm,
        errors,
        symbols: truth.len() as u64,
        iterations_used: result.iterations_used,
        per_iteration_errors,
    }
}

/// Draws the instance of one trial.
pub fn trial_instance(spec: &ExperimentSpec, sweep_value: f64, trial_index: usize) -> Result<Instance> {
    let system = spec.system_at(sweep_value);
    let mut rng = trial_rng(spec.master_seed, sweep_value, trial_index);
    generate_instance(&system, &mut rng)
}

pub fn run_trial(spec: &ExperimentSpec, sweep_value: f64, trial_index: usize) -> Result<TrialResult> {
    let system = spec.system_at(sweep_value);
    let instance = trial_instance(spec, sweep_value, trial_index)?;
    let truth = truth_labels(&instance.symbols);
    let detectors = spec
        .detectors
        .iter()
        .map(|&algorithm| {
            let cfg = spec.detector_config(algorithm, &system);
            let result = detect(&instance.received, &instance.channel, &cfg)?;
            Ok(score(algorithm, &result, &cfg, &truth))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TrialResult {
        trial_index,
        detectors,
    })
}

/// All trials of one sweep point, in trial-index order.
pub fn run_point(spec: &ExperimentSpec, sweep_value: f64) -> Result<Vec<TrialResult>> {
    (0..spec.num_trials)
        .into_par_iter()
        .map(|t| run_trial(spec, sweep_value, t))
        .collect()
}

/// `log10` of the error rate; zero errors map to the floor
/// `−log10(denominator) − 1`.
pub fn compute_ser(
    errors: u64,
    trials: usize,
    users: usize,
    slots: usize,
    mode: SerDenominator,
) -> f64 {
    let denominator = match mode {
        SerDenominator::PerSymbol => trials * users * slots,
        SerDenominator::PaperFormula => trials * users,
    } as f64;
    if errors == 0 {
        -denominator.log10() - 1.0
    } else {
        (errors as f64 / denominator).log10()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SerPoint {
    pub sweep_value: f64,
    pub log10_ser: f64,
    pub errors: u64,
    pub symbols: u64,
    pub mean_iters: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SerCurve {
    pub algorithm: Algorithm,
    pub points: Vec<SerPoint>,
}

/// Runs every sweep point. `threads = None` uses the global rayon pool.
pub fn run_experiment(spec: &ExperimentSpec, threads: Option<usize>) -> Result<Vec<SerCurve>> {
    spec.validate()?;
    let run = || -> Result<Vec<(f64, Vec<TrialResult>)>> {
        spec.trial_points()
            .into_iter()
            .map(|v| Ok((v, run_point(spec, v)?)))
            .collect()
    };
    let results = match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::invalid("threads", e.to_string()))?
            .install(run)?,
        None => run()?,
    };
    Ok(aggregate(spec, &results))
}

/// Sums trial counts into curves.
pub fn aggregate(spec: &ExperimentSpec, results: &[(f64, Vec<TrialResult>)]) -> Vec<SerCurve> {
    let trials = spec.num_trials;
    let (users, slots) = (spec.system.num_users, spec.system.num_slots);
    let point = |value: f64, errors: u64, symbols: u64, iters: usize| SerPoint {
        sweep_value: value,
        log10_ser: compute_ser(errors, trials, users, slots, spec.ser_denominator),
        errors,
        symbols,
        mean_iters: iters as f64 / trials as f64,
    };
    spec.detectors
        .iter()
        .enumerate()
        .map(|(d, &algorithm)| {
            let mut points = Vec::new();
            for (value, trial_results) in results {
                let runs = trial_results.iter().map(|t| &t.detectors[d]);
                let symbols: u64 = runs.clone().map(|r| r.symbols).sum();
                let iters: usize = runs.clone().map(|r| r.iterations_used).sum();
                match spec.axis {
                    SweepAxis::Iteration => {
                        for &it in &spec.values {
                            let idx = it as usize - 1;
                            let errors = runs.clone().map(|r| r.per_iteration_errors[idx]).sum();
                            points.push(point(it, errors, symbols, iters));
                        }
                    }
                    _ => {
                        let errors = runs.clone().map(|r| r.errors).sum();
                        points.push(point(*value, errors, symbols, iters));
                    }
                }
            }
            SerCurve { algorithm, points }
        })
        .collect()
}
