//! Synthetic grant-free NOMA instances for the symbol-level linear model
//! `Y = H B + W`.
//!
//! `H` is `N x K` (subcarriers by users), `B` and the activity matrix `S` are
//! `K x J` (users by slots) and `Y` is `N x J`.

use ndarray::{Array2, Axis};
use num_complex::Complex64;
use rand::seq::index::sample;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::numerics::EPS;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modulation {
    #[default]
    Bpsk,
}

impl Modulation {
    /// Mean energy of an active symbol.
    pub fn symbol_energy(self) -> f64 {
        match self {
            Modulation::Bpsk => 1.0,
        }
    }

    /// Constellation points, equiprobable.
    pub fn constellation(self) -> &'static [Complex64] {
        const BPSK: [Complex64; 2] = [Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0)];
        match self {
            Modulation::Bpsk => &BPSK,
        }
    }

    /// Nearest constellation point.
    pub fn slice(self, z: Complex64) -> Complex64 {
        match self {
            Modulation::Bpsk => {
                if z.re >= 0.0 {
                    Complex64::new(1.0, 0.0)
                } else {
                    Complex64::new(-1.0, 0.0)
                }
            }
        }
    }

    fn draw<R: Rng + ?Sized>(self, rng: &mut R) -> Complex64 {
        match self {
            Modulation::Bpsk => {
                if rng.gen::<bool>() {
                    Complex64::new(1.0, 0.0)
                } else {
                    Complex64::new(-1.0, 0.0)
                }
            }
        }
    }
}

/// How user activity evolves over the frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    /// Bursty activity from a stationary two-state Markov chain per user.
    #[default]
    Partial,
    /// Active users stay active for the whole frame.
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    pub num_users: usize,
    pub num_subcarriers: usize,
    pub num_slots: usize,
    pub activity_rate: f64,
    pub snr_db: f64,
    pub modulation: Modulation,
    pub scenario: Scenario,
    /// Mean length of an active burst in slots (Partial only).
    pub mean_burst_len: f64,
    pub max_iters: usize,
    pub convergence_tol: f64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            num_users: 20,
            num_subcarriers: 30,
            num_slots: 6,
            activity_rate: 0.3,
            snr_db: 9.0,
            modulation: Modulation::Bpsk,
            scenario: Scenario::Partial,
            mean_burst_len: 3.0,
            max_iters: 20,
            convergence_tol: 1e-4,
        }
    }
}

impl SystemConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_users == 0 {
            return Err(Error::invalid("num_users", "must be at least 1"));
        }
        if self.num_subcarriers == 0 {
            return Err(Error::invalid("num_subcarriers", "must be at least 1"));
        }
        if self.num_slots == 0 {
            return Err(Error::invalid("num_slots", "must be at least 1"));
        }
        if !(self.activity_rate > 0.0 && self.activity_rate <= 1.0) {
            return Err(Error::invalid(
                "activity_rate",
                format!("must lie in (0, 1], got {}", self.activity_rate),
            ));
        }
        if !self.snr_db.is_finite() {
            return Err(Error::invalid("snr_db", "must be finite"));
        }
        if !(self.mean_burst_len >= 1.0 && self.mean_burst_len.is_finite()) {
            return Err(Error::invalid(
                "mean_burst_len",
                format!("must be a finite value >= 1, got {}", self.mean_burst_len),
            ));
        }
        if self.max_iters == 0 {
            return Err(Error::invalid("max_iters", "must be at least 1"));
        }
        if !(self.convergence_tol > 0.0) {
            return Err(Error::invalid("convergence_tol", "must be > 0"));
        }
        Ok(())
    }

    /// Number of active users in the Full scenario, `round(p_a K)`.
    pub fn active_count(&self) -> usize {
        ((self.activity_rate * self.num_users as f64).round() as usize).min(self.num_users)
    }

    /// `(p10, p01)` of the generating chain: stationary active probability
    /// `p_a` and mean burst length `L`.
    pub fn markov_rates(&self) -> Result<(f64, f64)> {
        let l = self.mean_burst_len;
        let pa = self.activity_rate;
        let p10 = pa / (l * (1.0 - pa));
        if !(p10 < 1.0) {
            return Err(Error::InfeasibleScenario(format!(
                "activity_rate {pa} with mean_burst_len {l} implies an inactive-to-active \
                 transition probability of {p10} (must be < 1)"
            )));
        }
        Ok((p10.clamp(EPS, 1.0 - EPS), (1.0 / l).clamp(EPS, 1.0 - EPS)))
    }
}

/// Spreading signatures, `N x K`, unit-norm columns.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMatrix(pub Array2<Complex64>);

impl ChannelMatrix {
    pub fn num_subcarriers(&self) -> usize {
        self.0.nrows()
    }

    pub fn num_users(&self) -> usize {
        self.0.ncols()
    }

    pub fn matrix(&self) -> &Array2<Complex64> {
        &self.0
    }

    /// `|h[n][k]|^2`, used by every GAMP pass.
    pub fn squared_magnitudes(&self) -> Array2<f64> {
        self.0.mapv(|h| h.norm_sqr())
    }
}

/// Binary activity states `s[k][j]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActivityMatrix(pub Array2<u8>);

impl ActivityMatrix {
    pub fn is_active(&self, k: usize, j: usize) -> bool {
        self.0[[k, j]] == 1
    }

    pub fn dim(&self) -> (usize, usize) {
        self.0.dim()
    }
}

/// Transmitted symbols `b[k][j]`; exactly zero where the user is inactive.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolFrame(pub Array2<Complex64>);

#[derive(Debug, Clone, PartialEq)]
pub struct ReceivedFrame {
    /// Observations `y[n][j]`.
    pub y: Array2<Complex64>,
    /// `1 / noise variance`.
    pub noise_precision: f64,
}

/// One complete draw of the system.
#[derive(Debug, Clone)]
pub struct Instance {
    pub channel: ChannelMatrix,
    pub activity: ActivityMatrix,
    pub symbols: SymbolFrame,
    pub received: ReceivedFrame,
}

fn cgauss<R: Rng + ?Sized>(rng: &mut R, var: f64) -> Complex64 {
    let scale = (0.5 * var).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * scale, im * scale)
}

/// I.i.d. `CN(0, 1)` entries with every column rescaled to unit norm.
pub fn generate_channel<R: Rng + ?Sized>(cfg: &SystemConfig, rng: &mut R) -> ChannelMatrix {
    let (n, k) = (cfg.num_subcarriers, cfg.num_users);
    let mut h = Array2::from_shape_simple_fn((n, k), || cgauss(rng, 1.0));
    for mut col in h.axis_iter_mut(Axis(1)) {
        let norm = col.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        col.mapv_inplace(|z| z / norm);
    }
    ChannelMatrix(h)
}

pub fn generate_activity<R: Rng + ?Sized>(
    cfg: &SystemConfig,
    rng: &mut R,
) -> Result<ActivityMatrix> {
    let (k, j) = (cfg.num_users, cfg.num_slots);
    let mut s = Array2::<u8>::zeros((k, j));
    match cfg.scenario {
        Scenario::Full => {
            for user in sample(rng, k, cfg.active_count()) {
                s.row_mut(user).fill(1);
            }
        }
        Scenario::Partial => {
            let (p10, p01) = cfg.markov_rates()?;
            let stationary = p10 / (p10 + p01);
            for mut row in s.rows_mut() {
                let mut active = rng.gen::<f64>() < stationary;
                for (slot, entry) in row.iter_mut().enumerate() {
                    if slot > 0 {
                        let u = rng.gen::<f64>();
                        active = if active { u >= p01 } else { u < p10 };
                    }
                    *entry = active as u8;
                }
            }
        }
    }
    Ok(ActivityMatrix(s))
}

pub fn modulate<R: Rng + ?Sized>(
    s: &ActivityMatrix,
    modulation: Modulation,
    rng: &mut R,
) -> SymbolFrame {
    SymbolFrame(s.0.mapv(|a| {
        if a == 1 {
            modulation.draw(rng)
        } else {
            Complex64::new(0.0, 0.0)
        }
    }))
}

/// `N x J` matrix of i.i.d. `CN(0, 1/λ)` noise.
pub fn draw_noise<R: Rng + ?Sized>(
    rows: usize,
    cols: usize,
    noise_precision: f64,
    rng: &mut R,
) -> Array2<Complex64> {
    let var = 1.0 / noise_precision;
    Array2::from_shape_simple_fn((rows, cols), || cgauss(rng, var))
}

/// `Y = H B + W` for an explicit noise matrix.
pub fn transmit_with_noise(
    h: &ChannelMatrix,
    b: &SymbolFrame,
    noise: &Array2<Complex64>,
    noise_precision: f64,
) -> Result<ReceivedFrame> {
    if h.num_users() != b.0.nrows() {
        return Err(Error::DimensionMismatch {
            context: "transmit: channel columns vs symbol rows",
            expected: h.num_users().to_string(),
            actual: b.0.nrows().to_string(),
        });
    }
    let expected = (h.num_subcarriers(), b.0.ncols());
    if noise.dim() != expected {
        return Err(Error::DimensionMismatch {
            context: "transmit: noise shape",
            expected: format!("{expected:?}"),
            actual: format!("{:?}", noise.dim()),
        });
    }
    if !(noise_precision > 0.0) {
        return Err(Error::invalid("noise_precision", "must be > 0"));
    }
    Ok(ReceivedFrame {
        y: h.0.dot(&b.0) + noise,
        noise_precision,
    })
}

pub fn transmit<R: Rng + ?Sized>(
    h: &ChannelMatrix,
    b: &SymbolFrame,
    noise_precision: f64,
    rng: &mut R,
) -> Result<ReceivedFrame> {
    let noise = draw_noise(h.num_subcarriers(), b.0.ncols(), noise_precision, rng);
    transmit_with_noise(h, b, &noise, noise_precision)
}

/// Noise precision for `SNR = 10 log10(E‖HB‖² / E‖W‖²)`.
///
/// With unit-norm columns and unit-energy symbols the per-slot signal energy
/// is `p_a K` and the noise energy is `N / λ`.
pub fn noise_precision_from_snr(cfg: &SystemConfig) -> f64 {
    let signal = cfg.activity_rate * cfg.num_users as f64 * cfg.modulation.symbol_energy();
    cfg.num_subcarriers as f64 * 10f64.powf(cfg.snr_db / 10.0) / signal
}

/// Draws channel, activity, symbols and observations in that order.
pub fn generate_instance<R: Rng + ?Sized>(cfg: &SystemConfig, rng: &mut R) -> Result<Instance> {
    cfg.validate()?;
    let channel = generate_channel(cfg, rng);
    let activity = generate_activity(cfg, rng)?;
    let symbols = modulate(&activity, cfg.modulation, rng);
    let received = transmit(&channel, &symbols, noise_precision_from_snr(cfg), rng)?;
    Ok(Instance {
        channel,
        activity,
        symbols,
        received,
    })
}
