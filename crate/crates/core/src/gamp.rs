//! Scalar-variance sum-product GAMP for one slot of `y = H b + w` with an
//! AWGN output channel.
//!
//! One iteration is an output step (Onsager-corrected prediction and scaled
//! residual), an input step (pseudo-observations `q̂` with variance `v_q`)
//! and a denoiser call that turns `(q̂, v_q)` into posterior moments of `b`.
//! Detectors whose prior couples slots run the first two steps here and
//! write the posterior moments back with [`GampState::apply_estimates`].

use ndarray::ArrayView1;
use num_complex::Complex64;

use crate::model::ChannelMatrix;
use crate::{Error, Result};

pub const VAR_MIN: f64 = 1e-12;
pub const VAR_MAX: f64 = 1e12;

fn clamp_var(v: f64) -> f64 {
    if v.is_nan() {
        VAR_MAX
    } else {
        v.clamp(VAR_MIN, VAR_MAX)
    }
}

/// Row-major copy of `H` plus `|H|^2`, laid out for the two GAMP passes.
#[derive(Debug, Clone)]
pub struct SensingMatrix {
    rows: usize,
    cols: usize,
    h: Vec<Complex64>,
    h_sq: Vec<f64>,
}

impl SensingMatrix {
    pub fn new(channel: &ChannelMatrix) -> Self {
        let (rows, cols) = channel.0.dim();
        let h: Vec<Complex64> = channel.0.iter().copied().collect();
        let h_sq = h.iter().map(|z| z.norm_sqr()).collect();
        Self { rows, cols, h, h_sq }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    fn row(&self, n: usize) -> (&[Complex64], &[f64]) {
        let r = n * self.cols..(n + 1) * self.cols;
        (&self.h[r.clone()], &self.h_sq[r])
    }
}

/// Maps a pseudo-observation of user `k` to posterior mean and variance.
pub trait Denoiser {
    fn denoise(&self, user: usize, q: Complex64, v_q: f64) -> Result<(Complex64, f64)>;
}

impl<F> Denoiser for F
where
    F: Fn(usize, Complex64, f64) -> Result<(Complex64, f64)>,
{
    fn denoise(&self, user: usize, q: Complex64, v_q: f64) -> Result<(Complex64, f64)> {
        self(user, q, v_q)
    }
}

/// Per-user complex Gaussian prior `CN(mean_k, var_k)`.
#[derive(Debug, Clone)]
pub struct GaussianDenoiser {
    pub mean: Vec<Complex64>,
    pub var: Vec<f64>,
}

impl GaussianDenoiser {
    pub fn iid(users: usize, var: f64) -> Self {
        Self {
            mean: vec![Complex64::new(0.0, 0.0); users],
            var: vec![var; users],
        }
    }
}

impl Denoiser for GaussianDenoiser {
    fn denoise(&self, user: usize, q: Complex64, v_q: f64) -> Result<(Complex64, f64)> {
        let (m, v) = (self.mean[user], self.var[user]);
        let post_var = 1.0 / (1.0 / v + 1.0 / v_q);
        Ok((post_var * (m / v + q / v_q), post_var))
    }
}

/// GAMP variables for a single slot.
#[derive(Debug, Clone, PartialEq)]
pub struct GampState {
    /// Posterior means `b̂[k]`.
    pub mean: Vec<Complex64>,
    /// Posterior variances `v_b[k]`.
    pub var: Vec<f64>,
    /// Onsager-corrected predictions `p̂[n]`.
    pub prediction: Vec<Complex64>,
    pub prediction_var: Vec<f64>,
    /// Scaled residuals `ŝ[n]`.
    pub residual: Vec<Complex64>,
    pub residual_var: Vec<f64>,
    /// Pseudo-observations `q̂[k]`.
    pub pseudo_obs: Vec<Complex64>,
    pub pseudo_var: Vec<f64>,
    pub iter: usize,
}

impl GampState {
    pub fn new(prior_mean: &[Complex64], prior_var: &[f64], rows: usize) -> Result<Self> {
        if prior_mean.len() != prior_var.len() {
            return Err(Error::DimensionMismatch {
                context: "gamp init: prior mean vs variance",
                expected: prior_mean.len().to_string(),
                actual: prior_var.len().to_string(),
            });
        }
        if let Some(&v) = prior_var.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
            return Err(Error::Domain {
                function: "gamp init",
                value: v,
                expected: "prior variance finite and > 0",
            });
        }
        let cols = prior_mean.len();
        Ok(Self {
            mean: prior_mean.to_vec(),
            var: prior_var.to_vec(),
            prediction: vec![Complex64::new(0.0, 0.0); rows],
            prediction_var: vec![1.0; rows],
            residual: vec![Complex64::new(0.0, 0.0); rows],
            residual_var: vec![1.0; rows],
            pseudo_obs: vec![Complex64::new(0.0, 0.0); cols],
            pseudo_var: vec![1.0; cols],
            iter: 0,
        })
    }

    /// Linear prediction, Onsager correction and AWGN residual update.
    /// `damping = 1` keeps the new residual unblended.
    pub fn output_step(
        &mut self,
        h: &SensingMatrix,
        y: ArrayView1<'_, Complex64>,
        noise_precision: f64,
        damping: f64,
    ) {
        let noise_var = 1.0 / noise_precision;
        for n in 0..h.rows {
            let (row, row_sq) = h.row(n);
            let mut z = Complex64::new(0.0, 0.0);
            let mut v_p = 0.0;
            for k in 0..h.cols {
                z += row[k] * self.mean[k];
                v_p += row_sq[k] * self.var[k];
            }
            let v_p = clamp_var(v_p);
            let p = z - self.residual[n] * v_p;
            let v_s = 1.0 / (v_p + noise_var);
            let s = (y[n] - p) * v_s;
            self.prediction[n] = p;
            self.prediction_var[n] = v_p;
            self.residual_var[n] = v_s;
            self.residual[n] = if damping < 1.0 {
                s * damping + self.residual[n] * (1.0 - damping)
            } else {
                s
            };
        }
    }

    /// Pseudo-observations `q̂ = b̂ + v_q Hᴴ ŝ` with `v_q = 1 / (|H|²)ᵀ v_s`.
    pub fn input_step(&mut self, h: &SensingMatrix) {
        let cols = h.cols;
        let mut precision = vec![0.0; cols];
        let mut correlation = vec![Complex64::new(0.0, 0.0); cols];
        for n in 0..h.rows {
            let (row, row_sq) = h.row(n);
            let (s, v_s) = (self.residual[n], self.residual_var[n]);
            for k in 0..cols {
                precision[k] += row_sq[k] * v_s;
                correlation[k] += row[k].conj() * s;
            }
        }
        for k in 0..cols {
            let v_q = clamp_var(1.0 / precision[k]);
            self.pseudo_var[k] = v_q;
            self.pseudo_obs[k] = self.mean[k] + correlation[k] * v_q;
        }
    }

    /// Writes posterior moments from a denoiser, blending with the previous
    /// values when `damping < 1`.
    pub fn apply_estimates(&mut self, mean: &[Complex64], var: &[f64], damping: f64) {
        for k in 0..self.mean.len() {
            let v = var[k].max(0.0);
            if damping < 1.0 {
                self.mean[k] = mean[k] * damping + self.mean[k] * (1.0 - damping);
                self.var[k] = v * damping + self.var[k] * (1.0 - damping);
            } else {
                self.mean[k] = mean[k];
                self.var[k] = v;
            }
        }
        self.iter += 1;
    }

    /// One full iteration: output step, input step, denoiser.
    pub fn iterate(
        &mut self,
        h: &SensingMatrix,
        y: ArrayView1<'_, Complex64>,
        noise_precision: f64,
        denoiser: &dyn Denoiser,
        damping: f64,
    ) -> Result<()> {
        self.output_step(h, y, noise_precision, damping);
        self.input_step(h);
        let mut mean = Vec::with_capacity(self.mean.len());
        let mut var = Vec::with_capacity(self.mean.len());
        for k in 0..self.mean.len() {
            let (m, v) = denoiser.denoise(k, self.pseudo_obs[k], self.pseudo_var[k])?;
            if !(m.re.is_finite() && m.im.is_finite() && v.is_finite()) {
                return Err(Error::NonFinite("denoiser output"));
            }
            mean.push(m);
            var.push(v);
        }
        self.apply_estimates(&mean, &var, damping);
        Ok(())
    }
}
