mod common;

use gfnoma_core::detectors::{
    detect, detect_gamp_pcsbl, detect_gamp_sbl, detect_genie_bg, Algorithm, DetectorConfig,
    SblDetector,
};
use gfnoma_core::harness::truth_labels;
use gfnoma_core::model::{
    generate_instance, transmit, ChannelMatrix, Modulation, Scenario, SymbolFrame, SystemConfig,
};
use gfnoma_core::oracle::ml_search;
use gfnoma_core::Error;
use ndarray::{Array2, Axis};
use num_complex::Complex64;

const ALL: [Algorithm; 4] = [Algorithm::Bgmc, Algorithm::Sbl, Algorithm::Pcsbl, Algorithm::Genie];

fn config(algorithm: Algorithm) -> DetectorConfig {
    DetectorConfig::for_algorithm(algorithm)
}

#[test]
fn near_noiseless_instance_is_recovered_exactly() {
    for seed in 0..5 {
        let (h, y, b) = common::near_noiseless(seed);
        let ml = ml_search(&h, &y.y, Modulation::Bpsk);
        assert_eq!(ml, b.0, "ML oracle disagrees with the truth, seed {seed}");
        let truth = truth_labels(&b);
        for alg in ALL {
            let cfg = DetectorConfig {
                genie_activity_rate: 0.25,
                ..config(alg)
            };
            let res = detect(&y, &h, &cfg).unwrap();
            assert_eq!(res.decision.symbols, truth, "{} seed {seed}", alg.name());
        }
    }
}

#[test]
fn all_inactive_truth_gives_no_detections() {
    for alg in [Algorithm::Bgmc, Algorithm::Genie, Algorithm::Sbl, Algorithm::Pcsbl] {
        for snr in [9.0, 12.0] {
            let clean = (0..100)
                .filter(|&t| {
                    let (h, y) = common::all_inactive(snr, 1000 + t);
                    let res = detect(&y, &h, &config(alg)).unwrap();
                    res.decision.activity.iter().all(|&s| s == 0)
                })
                .count();
            assert!(clean >= 99, "{} at {snr} dB: {clean}/100 clean", alg.name());
        }
    }
}

fn permuted(h: &ChannelMatrix, perm: &[usize]) -> ChannelMatrix {
    ChannelMatrix(h.0.select(Axis(1), perm))
}

#[test]
fn user_permutation_permutes_the_result() {
    let perm: Vec<usize> = (0..20).rev().collect();
    let mut rng = common::rng(3);
    for _ in 0..5 {
        let inst = generate_instance(&SystemConfig::default(), &mut rng).unwrap();
        let hp = permuted(&inst.channel, &perm);
        for alg in ALL {
            let a = detect(&inst.received, &inst.channel, &config(alg)).unwrap();
            let b = detect(&inst.received, &hp, &config(alg)).unwrap();
            assert_eq!(a.iterations_used, b.iterations_used);
            assert_eq!(a.decision.symbols.select(Axis(0), &perm), b.decision.symbols);
            let diff = &a.posterior.mean.select(Axis(0), &perm) - &b.posterior.mean;
            assert!(diff.iter().all(|z| z.norm() < 1e-9), "{}", alg.name());
        }
    }
}

#[test]
fn detection_is_deterministic() {
    let mut rng = common::rng(4);
    let inst = generate_instance(&SystemConfig::default(), &mut rng).unwrap();
    for alg in ALL {
        let cfg = DetectorConfig {
            record_snapshots: true,
            ..config(alg)
        };
        let a = detect(&inst.received, &inst.channel, &cfg).unwrap();
        let b = detect(&inst.received, &inst.channel, &cfg).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn uncoupled_pcsbl_is_sbl() {
    let mut rng = common::rng(6);
    let cfg = DetectorConfig {
        pcsbl_beta: 0.0,
        ..config(Algorithm::Pcsbl)
    };
    for _ in 0..20 {
        let inst = generate_instance(&SystemConfig::default(), &mut rng).unwrap();
        let a = detect_gamp_sbl(&inst.received, &inst.channel, &cfg).unwrap();
        let b = detect_gamp_pcsbl(&inst.received, &inst.channel, &cfg).unwrap();
        assert_eq!(a, b);
    }
}

/// Rows whose decided support is a single run (or empty).
fn contiguous_rows(activity: &Array2<u8>) -> usize {
    activity
        .rows()
        .into_iter()
        .filter(|row| {
            let ones: Vec<usize> = row.iter().enumerate().filter(|(_, &s)| s == 1).map(|(j, _)| j).collect();
            ones.windows(2).all(|w| w[1] == w[0] + 1)
        })
        .count()
}

#[test]
fn coupling_favours_contiguous_support() {
    let system = SystemConfig {
        scenario: Scenario::Full,
        snr_db: 6.0,
        ..SystemConfig::default()
    };
    let mut rng = common::rng(8);
    let (mut sbl, mut pcsbl) = (0, 0);
    for _ in 0..500 {
        let inst = generate_instance(&system, &mut rng).unwrap();
        let a = detect(&inst.received, &inst.channel, &config(Algorithm::Sbl)).unwrap();
        let b = detect(&inst.received, &inst.channel, &config(Algorithm::Pcsbl)).unwrap();
        sbl += contiguous_rows(&a.decision.activity);
        pcsbl += contiguous_rows(&b.decision.activity);
    }
    assert!(pcsbl > sbl, "pcsbl {pcsbl} vs sbl {sbl}");
}

#[test]
fn genie_with_vanishing_activity_declares_nothing() {
    let (h, y) = common::all_inactive(9.0, 77);
    let cfg = DetectorConfig {
        genie_activity_rate: f64::EPSILON,
        ..config(Algorithm::Genie)
    };
    let res = detect_genie_bg(&y, &h, &cfg).unwrap();
    assert!(res.decision.symbols.iter().all(|&x| x == 0));
}

#[test]
fn sbl_shrinks_inactive_entries() {
    let mut rng = common::rng(9);
    let inst = generate_instance(&SystemConfig::default(), &mut rng).unwrap();
    let mut det = SblDetector::new(&inst.received, &inst.channel, &config(Algorithm::Sbl), 0.0).unwrap();
    for _ in 0..20 {
        det.step().unwrap();
    }
    let mut inactive_var = Vec::new();
    let mut active_var = Vec::new();
    for ((k, j), g) in det.precision_beliefs().indexed_iter() {
        if inst.activity.is_active(k, j) {
            active_var.push(g.slab_variance());
        } else {
            inactive_var.push(g.slab_variance());
            assert!(det.posterior().mean[[k, j]].norm() < 0.5);
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    assert!(mean(&inactive_var) < 0.05 * mean(&active_var));
}

#[test]
fn results_are_consistent() {
    let mut rng = common::rng(10);
    for _ in 0..10 {
        let inst = generate_instance(&SystemConfig::default(), &mut rng).unwrap();
        for alg in ALL {
            let cfg = DetectorConfig {
                max_iters: 7,
                ..config(alg)
            };
            let res = detect(&inst.received, &inst.channel, &cfg).unwrap();
            assert!(res.iterations_used >= 1 && res.iterations_used <= 7);
            for (x, s) in res.decision.symbols.iter().zip(res.decision.activity.iter()) {
                assert_eq!(*x == 0, *s == 0);
            }
        }
    }
}

#[test]
fn converges_within_fifty_iterations() {
    let system = SystemConfig {
        max_iters: 50,
        ..SystemConfig::default()
    };
    let mut rng = common::rng(12);
    let instances: Vec<_> = (0..200)
        .map(|_| generate_instance(&system, &mut rng).unwrap())
        .collect();
    for alg in ALL {
        let cfg = DetectorConfig {
            max_iters: 50,
            ..config(alg)
        };
        let converged = instances
            .iter()
            .filter(|inst| detect(&inst.received, &inst.channel, &cfg).unwrap().converged)
            .count();
        assert!(converged >= 198, "{}: {converged}/200", alg.name());
    }
}

#[test]
fn bad_inputs_are_rejected() {
    let (h, mut y, _) = common::near_noiseless(0);
    let short = ChannelMatrix(h.0.slice(ndarray::s![..4, ..]).to_owned());
    assert!(matches!(
        detect(&y, &short, &config(Algorithm::Bgmc)),
        Err(Error::DimensionMismatch { .. })
    ));
    y.y[[0, 0]] = Complex64::new(f64::NAN, 0.0);
    assert!(matches!(detect(&y, &h, &config(Algorithm::Sbl)), Err(Error::NonFinite(_))));
    let zero = SymbolFrame(Array2::zeros((4, 2)));
    let mut rng = common::rng(1);
    let y = transmit(&h, &zero, 1.0, &mut rng).unwrap();
    let bad = DetectorConfig {
        damping: 0.0,
        ..config(Algorithm::Genie)
    };
    assert!(matches!(detect(&y, &h, &bad), Err(Error::InvalidConfig { field: "damping", .. })));
}
