//! Exact finite-volume computations: enumeration of Gibbs distributions,
//! single-site conditional probabilities, ground-state counting and 1D
//! transfer matrices.

mod transfer;
pub(crate) mod walker;

pub use transfer::{transfer_matrix_free_energy, TransferMatrix, MAX_TRANSFER_RANGE};

use crate::config::{BoundaryCondition, Configuration};
use crate::error::{Error, Result};
use crate::hamiltonian::Hamiltonian;
use crate::lattice::Site;
use crate::model::SpinModel;
use walker::{LogSumExp, Plan};

/// Default ceiling on the number of enumerated sites.
pub const DEFAULT_ENUMERATION_CAP: usize = 25;

fn checked_plan(h: &Hamiltonian, eliminate: bool, cap: usize) -> Result<Plan> {
    let plan = Plan::new(h, eliminate);
    if plan.num_enumerated() > cap {
        return Err(Error::EnumerationCap {
            required: plan.num_enumerated(),
            cap,
        });
    }
    Ok(plan)
}

/// Number of sites enumeration would visit for `h`, after the independent
/// set is summed out. Nothing is computed.
pub fn enumerated_sites(h: &Hamiltonian) -> usize {
    Plan::new(h, true).num_enumerated()
}

/// `log Σ_σ exp(-beta · E(σ))` over every configuration of the free sites.
///
/// Sites of an independent set are summed analytically, so the cap bounds
/// only the sites that are actually enumerated.
pub fn log_partition(h: &Hamiltonian, beta: f64, cap: usize) -> Result<f64> {
    let plan = checked_plan(h, true, cap)?;
    let blocks = plan.walk(beta, LogSumExp::new, |acc, w| acc.add(w.log_weight()));
    let mut total = LogSumExp::new();
    for b in &blocks {
        total.merge(b);
    }
    Ok(total.value())
}

/// `P(σ_k = +1)` under `h` at inverse temperature `beta`, by clamping.
pub fn spin_up_probability(h: &Hamiltonian, k: usize, beta: f64, cap: usize) -> Result<f64> {
    let up = log_partition(&h.clamp(&[(k, 1)]), beta, cap)?;
    let down = log_partition(&h.clamp(&[(k, -1)]), beta, cap)?;
    Ok(logistic(up - down))
}

/// `1 / (1 + e^{-x})`, stable for large `|x|`.
pub(crate) fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Exact Gibbs distribution of a model on its window.
#[derive(Clone, Debug)]
pub struct ExactDistribution {
    hamiltonian: Hamiltonian,
    beta: f64,
    cap: usize,
    log_z: f64,
}

impl ExactDistribution {
    pub fn new(model: &SpinModel, bc: &BoundaryCondition, cap: usize) -> Result<Self> {
        let hamiltonian = model.hamiltonian(bc)?;
        let log_z = log_partition(&hamiltonian, model.beta(), cap)?;
        Ok(ExactDistribution {
            hamiltonian,
            beta: model.beta(),
            cap,
            log_z,
        })
    }

    pub fn from_hamiltonian(hamiltonian: Hamiltonian, beta: f64, cap: usize) -> Result<Self> {
        let log_z = log_partition(&hamiltonian, beta, cap)?;
        Ok(ExactDistribution {
            hamiltonian,
            beta,
            cap,
            log_z,
        })
    }

    pub fn log_partition(&self) -> f64 {
        self.log_z
    }

    pub fn hamiltonian(&self) -> &Hamiltonian {
        &self.hamiltonian
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn log_probability(&self, sigma: &Configuration) -> Result<f64> {
        let spins = self.hamiltonian.spins_of(sigma)?;
        Ok(-self.beta * self.hamiltonian.energy(&spins) - self.log_z)
    }

    pub fn probability(&self, sigma: &Configuration) -> Result<f64> {
        Ok(self.log_probability(sigma)?.exp())
    }

    /// Probability of a partial configuration (marginal over the other sites).
    pub fn marginal(&self, partial: &Configuration) -> Result<f64> {
        let clamped = self.hamiltonian.clamp_config(partial)?;
        Ok((log_partition(&clamped, self.beta, self.cap)? - self.log_z).exp())
    }

    fn index(&self, site: &Site) -> Result<usize> {
        self.hamiltonian
            .index_of(site)
            .ok_or_else(|| Error::SiteNotInWindow(site.clone()))
    }

    /// `⟨σ_site⟩`.
    pub fn spin_expectation(&self, site: &Site) -> Result<f64> {
        let k = self.index(site)?;
        Ok(2.0 * spin_up_probability(&self.hamiltonian, k, self.beta, self.cap)? - 1.0)
    }

    /// Distribution of the total magnetization `M = Σ σ`, as `(M, P(M))`
    /// with `M` ascending. Enumerates every site.
    pub fn magnetization_distribution(&self) -> Result<Vec<(i64, f64)>> {
        let plan = checked_plan(&self.hamiltonian, false, self.cap)?;
        let n = self.hamiltonian.len();
        let blocks = plan.walk(
            self.beta,
            || vec![LogSumExp::new(); n + 1],
            |acc, w| acc[((w.magnetization() + n as i64) / 2) as usize].add(w.log_weight()),
        );
        let mut hist = vec![LogSumExp::new(); n + 1];
        for b in &blocks {
            for (h, x) in hist.iter_mut().zip(b) {
                h.merge(x);
            }
        }
        Ok(hist
            .iter()
            .enumerate()
            .map(|(k, h)| (2 * k as i64 - n as i64, (h.value() - self.log_z).exp()))
            .collect())
    }

    /// Exact moments of the magnetization per site `m = M / N`.
    pub fn magnetization_moments(&self) -> Result<MagnetizationMoments> {
        let n = self.hamiltonian.len() as f64;
        let mut out = MagnetizationMoments::default();
        for (big_m, p) in self.magnetization_distribution()? {
            let m = big_m as f64 / n;
            out.mean += p * m;
            out.mean_abs += p * m.abs();
            out.second += p * m * m;
            out.fourth += p * m.powi(4);
        }
        Ok(out)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct MagnetizationMoments {
    pub mean: f64,
    pub mean_abs: f64,
    pub second: f64,
    pub fourth: f64,
}

impl MagnetizationMoments {
    pub fn binder_cumulant(&self) -> f64 {
        1.0 - self.fourth / (3.0 * self.second * self.second)
    }
}

/// Exact Gibbs distribution on the model's active sites with the default cap.
pub fn enumerate_distribution(model: &SpinModel, bc: &BoundaryCondition) -> Result<ExactDistribution> {
    ExactDistribution::new(model, bc, DEFAULT_ENUMERATION_CAP)
}

/// `P(σ_site = +1 | conditioning, bc)` from the single-site Gibbs kernel.
/// `conditioning` must cover every other active site.
pub fn conditional_probability(
    model: &SpinModel,
    site: &Site,
    conditioning: &Configuration,
    bc: &BoundaryCondition,
) -> Result<f64> {
    let h = model.hamiltonian(bc)?;
    let k = h.index_of(site).ok_or_else(|| Error::SiteNotInWindow(site.clone()))?;
    let mut spins = Vec::with_capacity(h.len());
    for (j, s) in h.sites().iter().enumerate() {
        spins.push(if j == k { 1 } else { conditioning.value(s)? });
    }
    let e_up = h.energy(&spins);
    spins[k] = -1;
    let e_down = h.energy(&spins);
    Ok(logistic(model.beta() * (e_down - e_up)))
}

/// Number of configurations attaining the minimum energy.
pub fn ground_state_degeneracy(model: &SpinModel, bc: &BoundaryCondition) -> Result<u128> {
    ground_state_degeneracy_capped(model, bc, DEFAULT_ENUMERATION_CAP)
}

pub fn ground_state_degeneracy_capped(model: &SpinModel, bc: &BoundaryCondition, cap: usize) -> Result<u128> {
    let h = model.hamiltonian(bc)?;
    let plan = checked_plan(&h, true, cap)?;
    const ZERO: f64 = 1e-9;
    let tie = |a: f64, b: f64| b.is_finite() && (a - b).abs() <= 1e-9 * (1.0 + a.abs().max(b.abs()));
    let blocks = plan.walk(
        1.0,
        || (f64::INFINITY, 0u128),
        |acc, w| {
            let (e, zeros) = w.min_energy(ZERO);
            let count = 1u128 << zeros;
            if tie(e, acc.0) {
                acc.1 += count;
            } else if e < acc.0 {
                *acc = (e, count);
            }
        },
    );
    let mut best = (f64::INFINITY, 0u128);
    for (e, c) in blocks {
        if tie(e, best.0) {
            best.1 += c;
        } else if e < best.0 {
            best = (e, c);
        }
    }
    Ok(best.1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Alphabet;
    use crate::lattice::Lattice;
    use approx::assert_abs_diff_eq;

    /// Independent oracle: sum `exp(-beta E)` over all configurations using
    /// the model's own energy function.
    fn brute_log_z(model: &SpinModel, bc: &BoundaryCondition) -> f64 {
        let sites = model.lattice().sites();
        let n = sites.len();
        let mut z = 0.0;
        for bits in 0..1u32 << n {
            let c = Configuration::from_pairs(
                Alphabet::Spin,
                sites.iter().enumerate().map(|(k, s)| (s.clone(), if bits >> k & 1 == 1 { 1 } else { -1 })),
            )
            .unwrap();
            z += model.gibbs_weight(&c, bc).unwrap();
        }
        z.ln()
    }

    #[test]
    fn infinite_temperature_is_uniform() {
        let m = SpinModel::ising(Lattice::cube(2, 3).unwrap(), 1.0, 0.3, 0.0).unwrap();
        let d = enumerate_distribution(&m, &BoundaryCondition::AllPlus).unwrap();
        let c = Configuration::constant(Alphabet::Spin, &m.lattice().sites(), 1).unwrap();
        assert_abs_diff_eq!(d.probability(&c).unwrap(), 2f64.powi(-9), epsilon = 1e-15);
    }

    #[test]
    fn two_site_chain_probabilities() {
        let m = SpinModel::ising(Lattice::chain(2).unwrap(), 1.0, 0.0, 1.0).unwrap();
        let d = enumerate_distribution(&m, &BoundaryCondition::Free).unwrap();
        let e = std::f64::consts::E;
        let expected = e / (2.0 * e + 2.0 / e);
        let sites = m.lattice().sites();
        let pp = Configuration::constant(Alphabet::Spin, &sites, 1).unwrap();
        assert_abs_diff_eq!(d.probability(&pp).unwrap(), expected, epsilon = 1e-14);
        assert_abs_diff_eq!(d.probability(&pp.flipped()).unwrap(), expected, epsilon = 1e-14);
        assert_abs_diff_eq!(expected, 0.44039, epsilon = 1e-5);
    }

    #[test]
    fn log_z_matches_brute_force() {
        let m = SpinModel::ising(Lattice::cube(2, 2).unwrap(), 1.0, 0.0, 0.4).unwrap();
        let d = enumerate_distribution(&m, &BoundaryCondition::Free).unwrap();
        assert_abs_diff_eq!(d.log_partition(), brute_log_z(&m, &BoundaryCondition::Free), epsilon = 1e-12);

        // frustrated, fielded, non-bipartite: exercises the greedy elimination path
        let i = crate::Interaction::new(2, [(vec![1, 0], 0.7), (vec![0, 1], -0.4), (vec![1, 1], 0.3)])
            .unwrap()
            .with_uniform_field(0.2);
        let m = SpinModel::new(Lattice::cube(2, 3).unwrap(), i, 0.9).unwrap();
        for bc in [BoundaryCondition::Free, BoundaryCondition::AllMinus, BoundaryCondition::Periodic] {
            let d = enumerate_distribution(&m, &bc).unwrap();
            assert_abs_diff_eq!(d.log_partition(), brute_log_z(&m, &bc), epsilon = 1e-12);
        }
    }

    #[test]
    fn normalization() {
        let m = SpinModel::ising(Lattice::cube(2, 3).unwrap(), 1.0, 0.1, 0.5).unwrap();
        let d = enumerate_distribution(&m, &BoundaryCondition::AllPlus).unwrap();
        let total: f64 = d.magnetization_distribution().unwrap().iter().map(|(_, p)| p).sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn cap_is_enforced() {
        let m = SpinModel::ising(Lattice::cube(1, 30).unwrap(), 1.0, 0.0, 0.5).unwrap();
        // a chain is bipartite so 15 sites remain enumerated
        assert!(enumerate_distribution(&m, &BoundaryCondition::Free).is_ok());
        let d = ExactDistribution::new(&m, &BoundaryCondition::Free, 10);
        assert!(matches!(d, Err(Error::EnumerationCap { required: 15, cap: 10 })));
    }

    #[test]
    fn conditional_probability_examples() {
        let m = SpinModel::ising(Lattice::chain(3).unwrap(), 1.0, 0.0, 1.0).unwrap();
        let cond = Configuration::from_pairs(Alphabet::Spin, [(Site::new([0]), 1), (Site::new([2]), 1)]).unwrap();
        let p = conditional_probability(&m, &Site::new([1]), &cond, &BoundaryCondition::Free).unwrap();
        let e2 = 2f64.exp();
        assert_abs_diff_eq!(p, e2 / (e2 + 1.0 / e2), epsilon = 1e-14);
        assert_abs_diff_eq!(p, 0.98201, epsilon = 1e-5);

        let hot = m.clone().with_beta(0.0).unwrap();
        assert_eq!(conditional_probability(&hot, &Site::new([1]), &cond, &BoundaryCondition::Free).unwrap(), 0.5);
        assert!(matches!(
            conditional_probability(&m, &Site::new([7]), &cond, &BoundaryCondition::Free),
            Err(Error::SiteNotInWindow(_))
        ));
    }

    #[test]
    fn chain_degeneracy() {
        let m = SpinModel::ising(Lattice::chain(4).unwrap(), 1.0, 0.0, 1.0).unwrap();
        assert_eq!(ground_state_degeneracy(&m, &BoundaryCondition::Free).unwrap(), 2);
        let free = SpinModel::new(Lattice::chain(3).unwrap(), crate::Interaction::free(1).unwrap(), 1.0).unwrap();
        assert_eq!(ground_state_degeneracy(&free, &BoundaryCondition::Free).unwrap(), 8);
    }
}
