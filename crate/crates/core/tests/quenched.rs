use nongibbs::exact::enumerate_distribution;
use nongibbs::quenched::{
    bad_disorder_probe, free_energy_increment, joint_weight, occupied_ground_state_degeneracy, quenched_magnetization,
    required_enumeration, two_chain_geometry, DisorderField, DisorderKind, JointModel,
};
use nongibbs::{Alphabet, BoundaryCondition, Configuration, Lattice, Site};
use proptest::prelude::*;

fn configs(sites: &[Site], alphabet: Alphabet, values: [i8; 2]) -> Vec<Configuration> {
    (0..1u32 << sites.len())
        .map(|bits| {
            Configuration::from_pairs(
                alphabet,
                sites.iter().enumerate().map(|(k, s)| (s.clone(), values[(bits >> k & 1) as usize])),
            )
            .unwrap()
        })
        .collect()
}

fn field_model(h: f64, beta: f64, lattice: Lattice) -> JointModel {
    JointModel::new(DisorderKind::RandomField { h, q: 0.5 }, 1.0, beta, lattice).unwrap()
}

#[test]
fn magnetization_is_monotone_in_each_field() {
    for lattice in [Lattice::new(vec![0, 0], vec![1, 1]).unwrap(), Lattice::centered(2, 1).unwrap()] {
        let sites = lattice.sites();
        let jm = field_model(0.6, 0.8, lattice);
        for bc in [BoundaryCondition::Free, BoundaryCondition::AllMinus] {
            for n in configs(&sites, Alphabet::Spin, [-1, 1]) {
                let base = quenched_magnetization(&jm, &n, &bc).unwrap();
                for s in &sites {
                    if n.get(s) == Some(-1) {
                        let mut up = n.clone();
                        up.set(s.clone(), 1).unwrap();
                        assert!(quenched_magnetization(&jm, &up, &bc).unwrap() >= base - 1e-12);
                    }
                }
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn magnetization_is_antisymmetric(bits in any::<u32>(), h in 0.0f64..2.0, beta in 0.0f64..1.5) {
        let lattice = Lattice::centered(2, 1).unwrap();
        let sites = lattice.sites();
        let jm = field_model(h, beta, lattice);
        let n = Configuration::from_pairs(
            Alphabet::Spin,
            sites.iter().enumerate().map(|(k, s)| (s.clone(), if bits >> k & 1 == 1 { 1 } else { -1 })),
        ).unwrap();
        let a = quenched_magnetization(&jm, &n, &BoundaryCondition::AllPlus).unwrap();
        let b = quenched_magnetization(&jm, &n.flipped(), &BoundaryCondition::AllMinus).unwrap();
        prop_assert!((a + b).abs() < 1e-12);
    }

    #[test]
    fn increment_is_translation_invariant(dx in -5i64..5, dy in -5i64..5, connected in prop::bool::ANY, beta in 0.1f64..5.0) {
        let g = two_chain_geometry(3, connected).unwrap();
        let kind = DisorderKind::Dilution { p: 0.5 };
        let jm = JointModel::new(kind, 1.0, beta, g.lattice.clone()).unwrap();
        let base = free_energy_increment(&jm, &g.occupation, &g.bridge, &BoundaryCondition::Free).unwrap();
        let shift = |s: &Site| s.offset(&[dx, dy]);
        let moved = Lattice::new(
            g.lattice.lower().iter().zip([dx, dy]).map(|(a, b)| a + b).collect(),
            g.lattice.upper().iter().zip([dx, dy]).map(|(a, b)| a + b).collect(),
        ).unwrap();
        let jm2 = JointModel::new(kind, 1.0, beta, moved).unwrap();
        let inc = free_energy_increment(&jm2, &g.occupation.map_sites(shift), &shift(&g.bridge), &BoundaryCondition::Free).unwrap();
        prop_assert!((inc - base).abs() < 1e-12);
    }
}

#[test]
fn all_plus_field_golden() {
    let lattice = Lattice::centered(2, 1).unwrap();
    let jm = field_model(0.5, 1.0, lattice.clone());
    let n = Configuration::constant(Alphabet::Spin, &lattice.sites(), 1).unwrap();
    let m = quenched_magnetization(&jm, &n, &BoundaryCondition::Free).unwrap();
    assert!(m > 0.0 && m < 1.0);
    assert!((m - 0.9991791273790802).abs() < 1e-12, "{m}");
}

#[test]
fn zero_beta_gives_zero_magnetization_and_probe() {
    let lattice = Lattice::centered(2, 1).unwrap();
    let jm = field_model(1.3, 0.0, lattice);
    let n = jm.sample(4).unwrap().realization;
    assert_eq!(quenched_magnetization(&jm, &n, &BoundaryCondition::AllPlus).unwrap(), 0.0);
    assert_eq!(bad_disorder_probe(&jm, &n, 0).unwrap(), 0.0);
}

#[test]
fn strong_field_probe_golden_and_trend() {
    let jm = field_model(5.0, 2.0, Lattice::centered(2, 2).unwrap());
    for seed in [1, 2, 3] {
        let n = jm.sample(seed).unwrap().realization;
        let p0 = bad_disorder_probe(&jm, &n, 0).unwrap();
        let p1 = bad_disorder_probe(&jm, &n, 1).unwrap();
        assert!((p0 - 0.035972419924086285).abs() < 1e-12, "{p0}");
        assert!(p1 <= p0 && p1 < 1e-6, "{p1}");
    }
}

#[test]
fn joint_conditional_is_the_induced_gibbs_measure() {
    let lattice = Lattice::new(vec![0, 0], vec![1, 1]).unwrap();
    let sites = lattice.sites();
    let bc = BoundaryCondition::AllPlus;
    for (kind, values) in [
        (DisorderKind::Dilution { p: 0.3 }, [0, 1]),
        (DisorderKind::RandomField { h: 0.7, q: 0.4 }, [-1, 1]),
    ] {
        let alphabet = kind.alphabet();
        let jm = JointModel::new(kind, 1.0, 0.9, lattice.clone()).unwrap();
        let mut total = 0.0;
        for n in configs(&sites, alphabet, values) {
            let dist = enumerate_distribution(&jm.induced_model(&n).unwrap(), &bc).unwrap();
            let ws: Vec<f64> = configs(&sites, Alphabet::Spin, [-1, 1])
                .iter()
                .map(|s| joint_weight(&jm, &n, s, &bc).unwrap())
                .collect();
            let mass: f64 = ws.iter().sum();
            total += mass;
            for (s, w) in configs(&sites, Alphabet::Spin, [-1, 1]).iter().zip(&ws) {
                assert!((w / mass - dist.probability(s).unwrap()).abs() < 1e-12);
            }
            let pn = DisorderField::from_realization(kind, n.clone()).unwrap().log_probability().exp();
            assert!((mass - pn).abs() < 1e-12);
        }
        assert!((total - 1.0).abs() < 1e-10);
    }
}

#[test]
fn fully_empty_dilution_has_free_spins() {
    let lattice = Lattice::new(vec![0, 0], vec![1, 1]).unwrap();
    let sites = lattice.sites();
    let jm = JointModel::new(DisorderKind::Dilution { p: 1.0 }, 1.0, 1.3, lattice).unwrap();
    let empty = Configuration::constant(Alphabet::Occupation, &sites, 0).unwrap();
    for s in configs(&sites, Alphabet::Spin, [-1, 1]) {
        let w = joint_weight(&jm, &empty, &s, &BoundaryCondition::AllPlus).unwrap();
        assert!((w - 0.0625).abs() < 1e-15);
    }
}

#[test]
fn increments_vanish_for_decoupled_sites_and_zero_beta() {
    let g = two_chain_geometry(4, true).unwrap();
    let kind = DisorderKind::Dilution { p: 0.5 };
    let jm = JointModel::new(kind, 1.0, 0.0, g.lattice.clone()).unwrap();
    assert_eq!(free_energy_increment(&jm, &g.occupation, &g.bridge, &BoundaryCondition::Free).unwrap(), 0.0);

    let lattice = Lattice::new(vec![0, 0], vec![4, 2]).unwrap();
    let n = Configuration::from_pairs(
        Alphabet::Occupation,
        lattice.sites().into_iter().map(|s| {
            let occ = s.coords()[0] == 4;
            (s, i8::from(occ))
        }),
    )
    .unwrap();
    let jm = JointModel::new(kind, 1.0, 2.0, lattice).unwrap();
    let inc = free_energy_increment(&jm, &n, &Site::new([1, 1]), &BoundaryCondition::Free).unwrap();
    assert_eq!(inc, 0.0);
    assert!(free_energy_increment(&jm, &n, &Site::new([4, 1]), &BoundaryCondition::Free).is_err());
}

#[test]
fn bridged_chains_lose_a_factor_two() {
    let kind = DisorderKind::Dilution { p: 0.5 };
    let inc = |connected: bool| {
        let g = two_chain_geometry(4, connected).unwrap();
        let jm = JointModel::new(kind, 1.0, 20.0, g.lattice.clone()).unwrap();
        let before = occupied_ground_state_degeneracy(&jm, &g.occupation, &BoundaryCondition::Free).unwrap();
        let value = free_energy_increment(&jm, &g.occupation, &g.bridge, &BoundaryCondition::Free).unwrap();
        (value, before)
    };
    let (open, d_open) = inc(false);
    let (closed, d_closed) = inc(true);
    assert_eq!((d_open, d_closed), (4, 2));
    // with a far connection already present, the bridge adds no entropy loss
    assert!(((closed - open) - 2f64.ln()).abs() < 1e-3, "{}", closed - open);
}

#[test]
fn required_enumeration_predicts_the_cap() {
    // independent-set elimination halves a bipartite 5x5 box
    let jm = field_model(0.5, 1.0, Lattice::centered(2, 2).unwrap());
    assert_eq!(required_enumeration(&jm, &BoundaryCondition::Free).unwrap(), 12);
    let jm = field_model(0.5, 1.0, Lattice::centered(2, 4).unwrap());
    let need = required_enumeration(&jm, &BoundaryCondition::Free).unwrap();
    assert!(need > 25);
    let n = jm.sample(1).unwrap().realization;
    assert!(quenched_magnetization(&jm, &n, &BoundaryCondition::Free).is_err());
}
