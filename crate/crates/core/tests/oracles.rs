mod common;

use gfnoma_core::checks::{chain_oracle, gamp_lmmse, unit_vectors, Perturbation};
use gfnoma_core::detectors::{detect_genie_bg, Algorithm, DetectorConfig};
use gfnoma_core::model::{generate_instance, SystemConfig};
use gfnoma_core::oracle::lmmse;
use num_complex::Complex64;

#[test]
fn chain_sweeps_match_enumeration() {
    let worst = chain_oracle(1000, 7).unwrap();
    assert!(worst < 1e-10, "worst deviation {worst:e}");
}

#[test]
fn gamp_fixed_point_is_lmmse() {
    let worst = gamp_lmmse(100, 30, 20, 300, 1.0, 11).unwrap();
    assert!(worst < 1e-10, "worst relative error {worst:e}");
}

#[test]
fn gamp_fixed_point_at_other_shapes() {
    assert!(gamp_lmmse(20, 60, 20, 300, 1.0, 12).unwrap() < 1e-10);
    assert!(gamp_lmmse(20, 40, 10, 300, 1.0, 13).unwrap() < 1e-10);
}

#[test]
fn unit_vectors_match_references() {
    for v in unit_vectors(Perturbation::default()).unwrap() {
        assert!(v.error() < 1e-9, "{}: {} vs {}", v.name, v.computed, v.expected);
    }
}

#[test]
fn genie_with_full_activity_is_lmmse() {
    let cfg = DetectorConfig {
        max_iters: 400,
        convergence_tol: 1e-28,
        genie_activity_rate: 1.0,
        ..DetectorConfig::for_algorithm(Algorithm::Genie)
    };
    let mut rng = common::rng(5);
    for _ in 0..10 {
        let inst = generate_instance(&SystemConfig::default(), &mut rng).unwrap();
        let res = detect_genie_bg(&inst.received, &inst.channel, &cfg).unwrap();
        let k = inst.channel.num_users();
        for j in 0..inst.received.y.ncols() {
            let y: Vec<Complex64> = inst.received.y.column(j).to_vec();
            let want = lmmse(
                &inst.channel,
                &y,
                inst.received.noise_precision,
                &vec![Complex64::new(0.0, 0.0); k],
                &vec![1.0; k],
            );
            let err: f64 = (0..k).map(|i| (res.posterior.mean[[i, j]] - want[i]).norm_sqr()).sum();
            let norm: f64 = want.iter().map(|w| w.norm_sqr()).sum();
            assert!((err / norm).sqrt() < 1e-6, "slot {j}: {:e}", (err / norm).sqrt());
        }
    }
}
