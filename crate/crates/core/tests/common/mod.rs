#![allow(dead_code)]

use gfnoma_core::model::{
    generate_channel, transmit, ActivityMatrix, ChannelMatrix, Modulation, ReceivedFrame,
    SymbolFrame, SystemConfig,
};
use ndarray::Array2;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// K=4, N=8, J=2, one user sending +1 in both slots, λ = 1e6.
pub fn near_noiseless(seed: u64) -> (ChannelMatrix, ReceivedFrame, SymbolFrame) {
    let cfg = SystemConfig {
        num_users: 4,
        num_subcarriers: 8,
        num_slots: 2,
        ..SystemConfig::default()
    };
    let mut rng = rng(seed);
    let h = generate_channel(&cfg, &mut rng);
    let mut b = Array2::zeros((4, 2));
    b[[1, 0]] = Complex64::new(1.0, 0.0);
    b[[1, 1]] = Complex64::new(1.0, 0.0);
    let b = SymbolFrame(b);
    let y = transmit(&h, &b, 1e6, &mut rng).unwrap();
    (h, y, b)
}

/// Instance with every user inactive at the noise level of `snr_db` under
/// the default system.
pub fn all_inactive(snr_db: f64, seed: u64) -> (ChannelMatrix, ReceivedFrame) {
    let cfg = SystemConfig {
        snr_db,
        ..SystemConfig::default()
    };
    let mut rng = rng(seed);
    let h = generate_channel(&cfg, &mut rng);
    let s = ActivityMatrix(Array2::zeros((cfg.num_users, cfg.num_slots)));
    let b = gfnoma_core::model::modulate(&s, Modulation::Bpsk, &mut rng);
    let lambda = gfnoma_core::model::noise_precision_from_snr(&cfg);
    let y = transmit(&h, &b, lambda, &mut rng).unwrap();
    (h, y)
}
