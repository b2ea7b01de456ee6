//! Brute-force reference computations.
//!
//! These share no code with the message-passing routines they check: the
//! chain quantities come from enumerating all `2^J` activity sequences, the
//! linear estimate from a dense solve, and detection from exhaustive search.

use nalgebra::{DMatrix, DVector};
use ndarray::Array2;
use num_complex::Complex64;

use crate::bgmc::McConstants;
use crate::model::{ChannelMatrix, Modulation};

/// Exhaustive inference on one user's activity chain.
///
/// The chain weight of a sequence is `init(s_1) Π T(s_{j-1}, s_j)` with the
/// mean-field constants as factors; each slot also carries the evidence
/// `π_j` for the active state and `1 − π_j` for the inactive state.
#[derive(Debug, Clone)]
pub struct ChainEnumeration {
    slots: usize,
    /// `[j][s]` accumulated weight of the past (init, transitions, evidence
    /// before `j`), summed over sequences with `s_j = s`.
    past: Vec<[f64; 2]>,
    /// `[j][s]` accumulated weight of the future (transitions after `j`,
    /// evidence after `j`).
    future: Vec<[f64; 2]>,
    evidence: Vec<f64>,
    /// `[j][a][b]` full weight summed over sequences with `s_{j-1} = a`, `s_j = b`.
    pairs: Vec<[[f64; 2]; 2]>,
    marginals: Vec<[f64; 2]>,
}

impl ChainEnumeration {
    pub fn new(evidence: &[f64], cst: &McConstants) -> Self {
        let slots = evidence.len();
        assert!(slots <= 20, "enumeration is exponential in the slot count");
        let mut past = vec![[0.0; 2]; slots];
        let mut future = vec![[0.0; 2]; slots];
        let mut pairs = vec![[[0.0; 2]; 2]; slots];
        let mut marginals = vec![[0.0; 2]; slots];
        let ev = |j: usize, s: bool| if s { evidence[j] } else { 1.0 - evidence[j] };
        for mask in 0u32..(1 << slots) {
            let state: Vec<bool> = (0..slots).map(|j| mask >> j & 1 == 1).collect();
            // chain factors: factor[0] = init, factor[j] = T(s_{j-1}, s_j)
            let factor: Vec<f64> = (0..slots)
                .map(|j| {
                    if j == 0 {
                        cst.initial(state[0])
                    } else {
                        cst.transition(state[j - 1], state[j])
                    }
                })
                .collect();
            let mut total = 1.0;
            for j in 0..slots {
                total *= factor[j] * ev(j, state[j]);
            }
            for j in 0..slots {
                let s = state[j] as usize;
                let p: f64 = (0..j).map(|i| factor[i] * ev(i, state[i])).product::<f64>() * factor[j];
                let f: f64 = (j + 1..slots).map(|i| factor[i] * ev(i, state[i])).product();
                past[j][s] += p;
                future[j][s] += f;
                marginals[j][s] += total;
                if j > 0 {
                    pairs[j][state[j - 1] as usize][s] += total;
                }
            }
        }
        Self {
            slots,
            past,
            future,
            evidence: evidence.to_vec(),
            pairs,
            marginals,
        }
    }

    fn normalise(w: [f64; 2]) -> f64 {
        w[1] / (w[0] + w[1])
    }

    /// Prior of `s_j = 1` from the past, excluding the evidence at `j`.
    pub fn down(&self, j: usize) -> f64 {
        Self::normalise(self.past[j])
    }

    /// As [`Self::down`] but including the evidence at `j`.
    pub fn down_post(&self, j: usize) -> f64 {
        let w = self.past[j];
        Self::normalise([w[0] * (1.0 - self.evidence[j]), w[1] * self.evidence[j]])
    }

    /// Message into `s_j` from the future. For the last slot the future is
    /// empty and the message is uniform.
    pub fn up(&self, j: usize) -> f64 {
        Self::normalise(self.future[j])
    }

    pub fn up_post(&self, j: usize) -> f64 {
        let w = self.future[j];
        Self::normalise([w[0] * (1.0 - self.evidence[j]), w[1] * self.evidence[j]])
    }

    /// Posterior probability that `s_j = 1`.
    pub fn marginal(&self, j: usize) -> f64 {
        Self::normalise(self.marginals[j])
    }

    /// Posterior of `s_j = 1` with the evidence at `j` removed.
    pub fn prior_excluding_own(&self, j: usize) -> f64 {
        let w = self.marginals[j];
        Self::normalise([w[0] / (1.0 - self.evidence[j]), w[1] / self.evidence[j]])
    }

    /// Normalised pairwise posterior of `(s_{j-1}, s_j)` for `j >= 1`, ordered
    /// `[P(0,0), P(1,0), P(0,1), P(1,1)]`, i.e. `[b00, b01, b10, b11]` with
    /// `b01` the active-to-inactive transition.
    pub fn pairwise(&self, j: usize) -> [f64; 4] {
        assert!(j >= 1 && j < self.slots);
        let w = self.pairs[j];
        let total = w[0][0] + w[0][1] + w[1][0] + w[1][1];
        [w[0][0] / total, w[1][0] / total, w[0][1] / total, w[1][1] / total]
    }
}

fn to_dmatrix(m: &Array2<Complex64>) -> DMatrix<Complex64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |r, c| m[[r, c]])
}

/// `(V⁻¹ + λ HᴴH)⁻¹ (V⁻¹ m + λ Hᴴ y)` for a Gaussian prior `CN(m, diag(V))`,
/// by dense LU.
pub fn lmmse(
    h: &ChannelMatrix,
    y: &[Complex64],
    noise_precision: f64,
    prior_mean: &[Complex64],
    prior_var: &[f64],
) -> Vec<Complex64> {
    let hm = to_dmatrix(&h.0);
    let hh = hm.adjoint();
    let k = hm.ncols();
    let lam = Complex64::new(noise_precision, 0.0);
    let mut a = &hh * &hm * lam;
    for i in 0..k {
        a[(i, i)] += Complex64::new(1.0 / prior_var[i], 0.0);
    }
    let yv = DVector::from_column_slice(y);
    let mut rhs = &hh * yv * lam;
    for i in 0..k {
        rhs[i] += prior_mean[i] / prior_var[i];
    }
    let x = a.lu().solve(&rhs).expect("LMMSE system is positive definite");
    x.iter().copied().collect()
}

/// Exhaustive maximum-likelihood detection over `{0} ∪ constellation` for
/// every entry of a `K x J` frame. Exponential; meant for tiny instances.
pub fn ml_search(h: &ChannelMatrix, y: &Array2<Complex64>, modulation: Modulation) -> Array2<Complex64> {
    let alphabet: Vec<Complex64> = match modulation {
        Modulation::Bpsk => vec![
            Complex64::new(0.0, 0.0),
            Complex64::new(1.0, 0.0),
            Complex64::new(-1.0, 0.0),
        ],
    };
    let (k, j) = (h.num_users(), y.ncols());
    let entries = k * j;
    let total = alphabet.len().pow(entries as u32);
    let mut best = (f64::INFINITY, Array2::zeros((k, j)));
    let mut frame = Array2::<Complex64>::zeros((k, j));
    for index in 0..total {
        let mut code = index;
        for e in 0..entries {
            frame[[e / j, e % j]] = alphabet[code % alphabet.len()];
            code /= alphabet.len();
        }
        let cost: f64 = (y - &h.0.dot(&frame)).iter().map(|z| z.norm_sqr()).sum();
        if cost < best.0 {
            best = (cost, frame.clone());
        }
    }
    best.1
}
