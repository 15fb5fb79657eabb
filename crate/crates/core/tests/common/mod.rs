#![allow(dead_code)]

use std::collections::BTreeSet;

use nongibbs::exact::enumerate_distribution;
use nongibbs::mc::chain_rng;
use nongibbs::transform::{decimation_constrained_model, evolution_constrained_model};
use nongibbs::{Alphabet, BoundaryCondition, Configuration, Interaction, Lattice, Site, SpinModel, Sublattice};
use proptest::prelude::*;
use rand::Rng;

/// Translation-invariant pair couplings plus a uniform field, kept separately
/// so the oracles below never go through the library's compiled Hamiltonian.
#[derive(Clone, Debug)]
pub struct RawModel {
    pub lower: Vec<i64>,
    pub upper: Vec<i64>,
    pub pairs: Vec<(Vec<i64>, f64)>,
    pub h: f64,
    pub beta: f64,
}

impl RawModel {
    pub fn build(&self) -> SpinModel {
        let lattice = Lattice::new(self.lower.clone(), self.upper.clone()).unwrap();
        let int = Interaction::new(self.lower.len(), self.pairs.clone())
            .unwrap()
            .with_uniform_field(self.h);
        SpinModel::new(lattice, int, self.beta).unwrap()
    }

    pub fn sites(&self) -> Vec<Site> {
        Lattice::new(self.lower.clone(), self.upper.clone()).unwrap().sites()
    }

    fn inside(&self, s: &[i64]) -> bool {
        s.iter().zip(self.lower.iter().zip(&self.upper)).all(|(c, (l, u))| c >= l && c <= u)
    }

    fn coupling(&self, o: &[i64]) -> f64 {
        let neg: Vec<i64> = o.iter().map(|c| -c).collect();
        self.pairs
            .iter()
            .filter(|(p, _)| p.as_slice() == o || *p == neg)
            .map(|(_, j)| *j)
            .next()
            .unwrap_or(0.0)
    }

    fn signed_offsets(&self) -> Vec<Vec<i64>> {
        let mut out = Vec::new();
        for (p, _) in &self.pairs {
            out.push(p.clone());
            out.push(p.iter().map(|c| -c).collect());
        }
        out
    }

    /// Energy from the definition: each unordered pair inside the window once,
    /// each window/exterior pair once with the exterior spin fixed at `ext`
    /// (`0` for free boundary).
    pub fn energy(&self, sigma: &[i8], ext: i8) -> f64 {
        let sites = self.sites();
        let pos = |s: &[i64]| sites.iter().position(|x| x.coords() == s);
        let mut e = 0.0;
        for (a, sa) in sites.iter().enumerate() {
            e -= self.h * f64::from(sigma[a]);
            for o in self.signed_offsets() {
                let b: Vec<i64> = sa.coords().iter().zip(&o).map(|(x, y)| x + y).collect();
                let j = self.coupling(&o);
                if self.inside(&b) {
                    let kb = pos(&b).unwrap();
                    if a < kb {
                        e -= j * f64::from(sigma[a]) * f64::from(sigma[kb]);
                    }
                } else {
                    e -= j * f64::from(sigma[a]) * f64::from(ext);
                }
            }
        }
        e
    }

    /// `Σ_{a ∈ Λ, b ∉ Λ} J(b - a) σ_a`.
    pub fn boundary_sum(&self, sigma: &[i8]) -> f64 {
        let sites = self.sites();
        let mut out = 0.0;
        for (a, sa) in sites.iter().enumerate() {
            for o in self.signed_offsets() {
                let b: Vec<i64> = sa.coords().iter().zip(&o).map(|(x, y)| x + y).collect();
                if !self.inside(&b) {
                    out += self.coupling(&o) * f64::from(sigma[a]);
                }
            }
        }
        out
    }
}

pub fn ext_of(bc: &BoundaryCondition) -> i8 {
    match bc {
        BoundaryCondition::AllPlus => 1,
        BoundaryCondition::AllMinus => -1,
        _ => 0,
    }
}

/// Every spin configuration on `n` sites, as vectors in enumeration order.
pub fn all_configs(n: usize) -> Vec<Vec<i8>> {
    (0..1u64 << n)
        .map(|mask| (0..n).map(|k| if mask >> k & 1 == 1 { 1 } else { -1 }).collect())
        .collect()
}

pub fn to_config(sites: &[Site], spins: &[i8]) -> Configuration {
    Configuration::from_pairs(Alphabet::Spin, sites.iter().cloned().zip(spins.iter().copied())).unwrap()
}

/// Log-partition function by direct summation of the oracle energy.
pub fn brute_log_z(raw: &RawModel, ext: i8) -> f64 {
    let n = raw.sites().len();
    let logs: Vec<f64> = all_configs(n).iter().map(|s| -raw.beta * raw.energy(s, ext)).collect();
    let mx = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    mx + logs.iter().map(|l| (l - mx).exp()).sum::<f64>().ln()
}

pub fn bc_strategy() -> impl Strategy<Value = BoundaryCondition> {
    prop_oneof![
        Just(BoundaryCondition::Free),
        Just(BoundaryCondition::AllPlus),
        Just(BoundaryCondition::AllMinus),
    ]
}

/// Random small models: 1D chains of up to 16 sites with range ≤ 3, or 2D
/// boxes of up to 4×4 with nearest and diagonal neighbours.
pub fn raw_model() -> impl Strategy<Value = RawModel> {
    let one_d = (1usize..=16, prop::collection::vec(-1.0f64..1.0, 3), -1.0f64..1.0, 0.05f64..1.5).prop_map(
        |(len, js, h, beta)| RawModel {
            lower: vec![0],
            upper: vec![len as i64 - 1],
            pairs: js.iter().enumerate().map(|(k, j)| (vec![k as i64 + 1], *j)).collect(),
            h,
            beta,
        },
    );
    let two_d = (1i64..=4, 1i64..=4, prop::collection::vec(-1.0f64..1.0, 4), -1.0f64..1.0, 0.05f64..1.5).prop_map(
        |(a, b, js, h, beta)| RawModel {
            lower: vec![0, 0],
            upper: vec![a - 1, b - 1],
            pairs: vec![vec![1, 0], vec![0, 1], vec![1, 1], vec![1, -1]].into_iter().zip(js).collect(),
            h,
            beta,
        },
    );
    prop_oneof![one_d, two_d]
}

pub fn spins_from_bits(bits: u64, n: usize) -> Vec<i8> {
    (0..n).map(|k| if bits >> k & 1 == 1 { 1 } else { -1 }).collect()
}

/// Largest deviation between the Gibbs distribution of the evolution model and
/// the normalized joint weight μ(σ) Π p_t(σ_i, η_i).
pub fn evolution_deviation(raw: &RawModel, bc: &BoundaryCondition, t: f64, bits: u64) -> f64 {
    let sites = raw.sites();
    let n = sites.len();
    let eta = spins_from_bits(bits, n);
    let constrained = evolution_constrained_model(&raw.build(), t, &to_config(&sites, &eta)).unwrap();
    let dist = enumerate_distribution(&constrained.model, bc).unwrap();
    let decay = (-2.0 * t).exp();
    let ext = ext_of(bc);
    let joint: Vec<f64> = all_configs(n)
        .iter()
        .map(|s| {
            let kernel: f64 = s.iter().zip(&eta).map(|(a, b)| 0.5 * (1.0 + decay * f64::from(a * b))).product();
            (-raw.beta * raw.energy(s, ext)).exp() * kernel
        })
        .collect();
    let total: f64 = joint.iter().sum();
    all_configs(n)
        .iter()
        .zip(&joint)
        .map(|(s, w)| (dist.probability(&to_config(&sites, s)).unwrap() - w / total).abs())
        .fold(0.0, f64::max)
}

/// Largest deviation between the decimation model and conditioning the full
/// enumeration on the kept spins. `None` when the mask keeps all or no sites.
pub fn decimation_deviation(raw: &RawModel, bc: &BoundaryCondition, mask: u64, bits: u64) -> Option<f64> {
    let sites = raw.sites();
    let n = sites.len();
    let in_s: Vec<bool> = (0..n).map(|k| mask >> k & 1 == 1).collect();
    if n < 2 || !in_s.iter().any(|&x| x) || in_s.iter().all(|&x| x) {
        return None;
    }
    let omega = spins_from_bits(bits, n);
    let kept: BTreeSet<Site> = sites.iter().zip(&in_s).filter(|(_, &k)| k).map(|(s, _)| s.clone()).collect();
    let kept_sites: Vec<Site> = kept.iter().cloned().collect();
    let kept_spins: Vec<i8> = (0..n).filter(|&k| in_s[k]).map(|k| omega[k]).collect();
    let constrained =
        decimation_constrained_model(&raw.build(), &Sublattice::Sites(kept), &to_config(&kept_sites, &kept_spins), bc)
            .unwrap();
    let dist = enumerate_distribution(&constrained.model, bc).unwrap();
    let free_idx: Vec<usize> = (0..n).filter(|&k| !in_s[k]).collect();
    let free_sites: Vec<Site> = free_idx.iter().map(|&k| sites[k].clone()).collect();
    let ext = ext_of(bc);
    let weights: Vec<(Vec<i8>, f64)> = all_configs(free_idx.len())
        .into_iter()
        .map(|sub| {
            let mut full = omega.clone();
            for (j, &k) in free_idx.iter().enumerate() {
                full[k] = sub[j];
            }
            let w = (-raw.beta * raw.energy(&full, ext)).exp();
            (sub, w)
        })
        .collect();
    let total: f64 = weights.iter().map(|(_, w)| w).sum();
    Some(
        weights
            .iter()
            .map(|(sub, w)| (dist.probability(&to_config(&free_sites, sub)).unwrap() - w / total).abs())
            .fold(0.0, f64::max),
    )
}

/// Small models with random couplings drawn from a fixed seed, each with the
/// boundary condition it is checked under.
pub fn mc_test_models() -> Vec<(RawModel, BoundaryCondition)> {
    let mut rng = chain_rng(2024, 7);
    let mut out = Vec::new();
    for k in 0..6 {
        let raw = if k % 2 == 0 {
            RawModel {
                lower: vec![0, 0],
                upper: vec![3, 3],
                pairs: vec![(vec![1, 0], rng.random_range(0.0..0.5)), (vec![0, 1], rng.random_range(-0.5..0.5))],
                h: rng.random_range(-0.3..0.3),
                beta: 1.0,
            }
        } else {
            RawModel {
                lower: vec![0],
                upper: vec![11],
                pairs: vec![(vec![1], rng.random_range(-1.0..1.0)), (vec![2], rng.random_range(-0.5..0.5))],
                h: rng.random_range(-0.3..0.3),
                beta: rng.random_range(0.3..1.0),
            }
        };
        let bc = [BoundaryCondition::Free, BoundaryCondition::AllPlus, BoundaryCondition::Periodic][k % 3].clone();
        out.push((raw, bc));
    }
    out
}
