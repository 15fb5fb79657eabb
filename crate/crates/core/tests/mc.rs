mod common;

use std::sync::Arc;

use common::*;
use nongibbs::exact::enumerate_distribution;
use nongibbs::mc::{
    binder_cumulant, binder_from_magnetizations, chain_rng, coexistence_probe, run_chain, ChainProtocol, ChainState,
    InitialState, UpdateKind,
};
use nongibbs::{BoundaryCondition, Lattice, SpinModel};
use rand::Rng;
use rand_distr::{Distribution, Normal};

fn within(mc: f64, err: f64, exact: f64, sigmas: f64) -> bool {
    (mc - exact).abs() <= sigmas * err + 1e-3
}

#[test]
fn moments_agree_with_enumeration() {
    for (i, (raw, bc)) in mc_test_models().into_iter().enumerate() {
        let model = raw.build();
        let exact = enumerate_distribution(&model, &bc).unwrap().magnetization_moments().unwrap();
        for kind in [UpdateKind::Metropolis, UpdateKind::HeatBath] {
            let p = ChainProtocol::new(40_000, 11 + i as u64).with_kind(kind);
            let s = run_chain(&model, &bc, &p).unwrap();
            for (power, want) in [(1, exact.mean), (2, exact.second), (4, exact.fourth)] {
                let est = s.moment(power);
                assert!(
                    within(est.value, est.error, want, 3.0),
                    "model {i} {kind:?} <m^{power}>: {} ± {} vs {want}",
                    est.value,
                    est.error
                );
            }
        }
    }
}

#[test]
fn square_four_by_four_second_moment_and_binder() {
    let model = SpinModel::ising(Lattice::cube(2, 4).unwrap(), 1.0, 0.0, 0.4).unwrap();
    let bc = BoundaryCondition::Periodic;
    let exact = enumerate_distribution(&model, &bc).unwrap().magnetization_moments().unwrap();
    let s = run_chain(&model, &bc, &ChainProtocol::new(100_000, 3)).unwrap();
    let m2 = s.moment(2);
    assert!(within(m2.value, m2.error, exact.second, 3.0), "{m2:?} vs {}", exact.second);

    let model = model.with_beta(0.4407).unwrap();
    let exact = enumerate_distribution(&model, &bc).unwrap().magnetization_moments().unwrap();
    let s = run_chain(&model, &bc, &ChainProtocol::new(100_000, 4)).unwrap();
    let u = binder_cumulant(&s).unwrap();
    assert!(within(u.value, u.error, exact.binder_cumulant(), 3.0), "{u:?} vs {}", exact.binder_cumulant());
}

#[test]
fn two_site_chain_leaves_gibbs_vector_stationary() {
    let raw = RawModel { lower: vec![0], upper: vec![1], pairs: vec![(vec![1], 0.8)], h: 0.3, beta: 1.0 };
    let model = raw.build();
    let h = Arc::new(model.hamiltonian(&BoundaryCondition::Free).unwrap());
    let pi: Vec<f64> = {
        let w: Vec<f64> = all_configs(2).iter().map(|s| (-raw.energy(s, 0)).exp()).collect();
        let z: f64 = w.iter().sum();
        w.iter().map(|x| x / z).collect()
    };
    let idx = |s: &[i8]| (s[0] == 1) as usize + 2 * (s[1] == 1) as usize;
    for kind in [UpdateKind::Metropolis, UpdateKind::HeatBath] {
        let mut state = ChainState::new(h.clone(), 1.0, 5, 0, InitialState::Random);
        let mut counts = [[0f64; 4]; 4];
        let n = 200_000;
        let mut prev = idx(state.spins());
        for _ in 0..n {
            state.sweep(kind);
            let next = idx(state.spins());
            counts[prev][next] += 1.0;
            prev = next;
        }
        let rows: Vec<f64> = counts.iter().map(|r| r.iter().sum()).collect();
        for b in 0..4 {
            let pushed: f64 = (0..4).map(|a| pi[a] * counts[a][b] / rows[a]).sum();
            assert!((pushed - pi[b]).abs() < 0.01, "{kind:?} state {b}: {pushed} vs {}", pi[b]);
            assert!((rows[b] / n as f64 - pi[b]).abs() < 0.01);
        }
    }
}

#[test]
fn binder_limits_on_synthetic_series() {
    let two_point: Vec<f64> = {
        let mut rng = chain_rng(1, 0);
        (0..10_000).map(|_| if rng.random::<bool>() { 0.7 } else { -0.7 }).collect()
    };
    let u = binder_from_magnetizations(&two_point).unwrap();
    assert!((u.value - 2.0 / 3.0).abs() < 1e-2);

    let mut rng = chain_rng(2, 0);
    let normal = Normal::new(0.0, 0.3).unwrap();
    let gauss: Vec<f64> = (0..200_000).map(|_| normal.sample(&mut rng)).collect();
    let u = binder_from_magnetizations(&gauss).unwrap();
    assert!(u.value.abs() < 1e-2, "{u:?}");

    assert!(binder_from_magnetizations(&[0.1; 99]).is_err());
    assert!(binder_from_magnetizations(&[0.0; 200]).is_err());
}

#[test]
fn periodic_zero_field_mean_is_unbiased() {
    let model = SpinModel::ising(Lattice::cube(2, 6).unwrap(), 1.0, 0.0, 0.3).unwrap();
    let s = run_chain(&model, &BoundaryCondition::Periodic, &ChainProtocol::new(20_000, 9)).unwrap();
    let m = s.mean_m();
    assert!(m.value.abs() <= 3.0 * m.error + 1e-3, "{m:?}");
}

#[test]
fn high_temperature_magnetization_is_small() {
    let model = SpinModel::ising(Lattice::cube(2, 16).unwrap(), 1.0, 0.0, 0.3).unwrap();
    let s = run_chain(&model, &BoundaryCondition::Periodic, &ChainProtocol::new(5_000, 1)).unwrap();
    assert!(s.mean_abs_m().value < 0.2);
    assert!(s.m.iter().all(|m| m.abs() <= 1.0));
}

#[test]
fn identical_seeds_give_identical_csv() {
    let model = SpinModel::ising(Lattice::cube(2, 5).unwrap(), 1.0, 0.1, 0.5).unwrap();
    let p = ChainProtocol::new(500, 42).with_stream(3);
    let a = run_chain(&model, &BoundaryCondition::AllPlus, &p).unwrap();
    let b = run_chain(&model, &BoundaryCondition::AllPlus, &p).unwrap();
    assert_eq!(a.to_csv(), b.to_csv());
    assert_eq!(a.len(), p.measurements());
    let c = run_chain(&model, &BoundaryCondition::AllPlus, &p.clone().with_stream(4)).unwrap();
    assert_ne!(a.to_csv(), c.to_csv());
}

#[test]
fn coexistence_probe_examples() {
    let p = ChainProtocol::new(4_000, 0);
    let free = SpinModel::ising(Lattice::cube(2, 8).unwrap(), 1.0, 0.0, 0.0).unwrap();
    let r = coexistence_probe(&free, &[1, 2], &p).unwrap();
    assert!(r.gap.value.abs() <= 3.0 * r.gap.error, "{r:?}");
    assert!(!r.coexistence);

    let cold = SpinModel::ising(Lattice::cube(2, 16).unwrap(), 1.0, 0.0, 0.6).unwrap();
    let r = coexistence_probe(&cold, &[1, 2], &p).unwrap();
    assert!(r.gap.value > 1.0 && r.coexistence, "{r:?}");

    // At high temperature the gap is a boundary-layer effect of the fixed
    // plus/minus boundaries and shrinks like the surface fraction 1/L.
    let gap = |l: usize| {
        let m = SpinModel::ising(Lattice::cube(2, l).unwrap(), 1.0, 0.0, 0.3).unwrap();
        coexistence_probe(&m, &[1, 2], &p).unwrap().gap.value
    };
    let (g8, g16, g32) = (gap(8), gap(16), gap(32));
    assert!(g16 < 0.6 * g8 && g32 < 0.6 * g16, "{g8} {g16} {g32}");
    assert!((g32 * 32.0 / (g16 * 16.0) - 1.0).abs() < 0.2, "{g16} {g32}");
}
