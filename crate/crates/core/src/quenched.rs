//! Quenched joint measures on disorder × spin space for the site-diluted
//! Ising model and the random field Ising model.

use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::badness::{McFallback, Method};
use crate::config::{Alphabet, BoundaryCondition, Configuration};
use crate::error::{invalid, Error, Result};
use crate::exact::{enumerated_sites, ground_state_degeneracy_capped, log_partition, ExactDistribution, DEFAULT_ENUMERATION_CAP};
use crate::lattice::{Lattice, Site, Sublattice};
use crate::mc::{chain_rng, observable_average};
use crate::model::{CouplingRule, QuenchedOverlay, SpinModel};
use crate::stats::Estimate;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DisorderKind {
    /// `n_i = 0` with probability `p`, `1` otherwise.
    Dilution { p: f64 },
    /// Field `h · n_i` with `n_i = +1` with probability `q`, `-1` otherwise.
    RandomField { h: f64, q: f64 },
}

impl DisorderKind {
    pub fn validate(&self) -> Result<()> {
        let unit = |name: &'static str, x: f64| {
            if (0.0..=1.0).contains(&x) {
                Ok(())
            } else {
                Err(invalid(name, format!("must lie in [0, 1], got {x}")))
            }
        };
        match *self {
            DisorderKind::Dilution { p } => unit("p", p),
            DisorderKind::RandomField { h, q } => {
                if !h.is_finite() {
                    return Err(invalid("h", "field strength must be finite"));
                }
                unit("q", q)
            }
        }
    }

    pub fn alphabet(&self) -> Alphabet {
        match self {
            DisorderKind::Dilution { .. } => Alphabet::Occupation,
            DisorderKind::RandomField { .. } => Alphabet::Spin,
        }
    }

    /// Single-site probability of the value `v`.
    pub fn site_probability(&self, v: i8) -> f64 {
        match *self {
            DisorderKind::Dilution { p } => {
                if v == 0 {
                    p
                } else {
                    1.0 - p
                }
            }
            DisorderKind::RandomField { q, .. } => {
                if v == 1 {
                    q
                } else {
                    1.0 - q
                }
            }
        }
    }

    fn rule(&self) -> CouplingRule {
        match *self {
            DisorderKind::Dilution { .. } => CouplingRule::Dilution,
            DisorderKind::RandomField { h, .. } => CouplingRule::Field { strength: h },
        }
    }
}

/// A disorder realization over a window, with the seed that drew it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisorderField {
    pub kind: DisorderKind,
    pub realization: Configuration,
    pub seed: Option<u64>,
}

impl DisorderField {
    /// Sitewise independent draw in lexicographic order from stream 0 of `seed`.
    pub fn sample(kind: DisorderKind, window: &Lattice, seed: u64) -> Result<Self> {
        kind.validate()?;
        let mut rng = chain_rng(seed, 0);
        let values = window.sites().into_iter().map(|s| {
            let u: f64 = rng.random();
            let v = match kind {
                DisorderKind::Dilution { p } => i8::from(u >= p),
                DisorderKind::RandomField { q, .. } => {
                    if u < q {
                        1
                    } else {
                        -1
                    }
                }
            };
            (s, v)
        });
        Ok(DisorderField {
            kind,
            realization: Configuration::from_pairs(kind.alphabet(), values.collect::<Vec<_>>())?,
            seed: Some(seed),
        })
    }

    pub fn from_realization(kind: DisorderKind, realization: Configuration) -> Result<Self> {
        kind.validate()?;
        if realization.alphabet() != kind.alphabet() {
            return Err(invalid("realization", "values do not match the disorder kind"));
        }
        Ok(DisorderField {
            kind,
            realization,
            seed: None,
        })
    }

    /// `log P(n)` under the product measure.
    pub fn log_probability(&self) -> f64 {
        self.realization
            .iter()
            .map(|(_, v)| self.kind.site_probability(v).ln())
            .sum()
    }
}

/// Disorder law, nearest-neighbour coupling `J` and inverse temperature on a
/// window. For fixed `n` it induces an ordinary [`SpinModel`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointModel {
    pub kind: DisorderKind,
    pub coupling: f64,
    pub beta: f64,
    pub lattice: Lattice,
}

impl JointModel {
    pub fn new(kind: DisorderKind, coupling: f64, beta: f64, lattice: Lattice) -> Result<Self> {
        kind.validate()?;
        if !coupling.is_finite() {
            return Err(invalid("coupling", "must be finite"));
        }
        SpinModel::ising(lattice.clone(), coupling, 0.0, beta)?;
        Ok(JointModel {
            kind,
            coupling,
            beta,
            lattice,
        })
    }

    /// Dilution: couplings `J n_i n_j`. Random field: couplings `J` and field
    /// `h n_i`. Empty sites keep a free spin.
    pub fn induced_model(&self, n: &Configuration) -> Result<SpinModel> {
        if n.alphabet() != self.kind.alphabet() {
            return Err(invalid("n", "values do not match the disorder kind"));
        }
        SpinModel::ising(self.lattice.clone(), self.coupling, 0.0, self.beta)?.with_quenched(QuenchedOverlay {
            disorder: n.restrict(|s| self.lattice.is_active(s)),
            rule: self.kind.rule(),
        })
    }

    pub fn sample(&self, seed: u64) -> Result<DisorderField> {
        DisorderField::sample(self.kind, &self.lattice, seed)
    }

    fn log_disorder_probability(&self, n: &Configuration) -> Result<f64> {
        let mut lp = 0.0;
        for s in self.lattice.sites() {
            lp += self.kind.site_probability(n.value(&s)?).ln();
        }
        Ok(lp)
    }
}

/// `P(n) exp(-β H(n, σ)) / Z(n)`.
pub fn joint_weight(jm: &JointModel, n: &Configuration, sigma: &Configuration, bc: &BoundaryCondition) -> Result<f64> {
    let model = jm.induced_model(n)?;
    let dist = ExactDistribution::new(&model, bc, DEFAULT_ENUMERATION_CAP)?;
    Ok((jm.log_disorder_probability(n)? + dist.log_probability(sigma)?).exp())
}

/// `log Z(n + add_site) - log Z(n)` for dilution, with empty sites carrying
/// free spins (`ln 2` each).
pub fn free_energy_increment(
    jm: &JointModel,
    n: &Configuration,
    add_site: &Site,
    bc: &BoundaryCondition,
) -> Result<f64> {
    if !matches!(jm.kind, DisorderKind::Dilution { .. }) {
        return Err(invalid("kind", "free-energy increments are defined for dilution"));
    }
    if !jm.lattice.is_active(add_site) {
        return Err(Error::SiteNotInWindow(add_site.clone()));
    }
    if n.value(add_site)? != 0 {
        return Err(invalid("add_site", format!("site {add_site} is already occupied")));
    }
    let mut added = n.clone();
    added.set(add_site.clone(), 1)?;
    let before = jm.induced_model(n)?.hamiltonian(bc)?;
    let after = jm.induced_model(&added)?.hamiltonian(bc)?;
    Ok(log_partition(&after, jm.beta, DEFAULT_ENUMERATION_CAP)? - log_partition(&before, jm.beta, DEFAULT_ENUMERATION_CAP)?)
}

/// Ground-state degeneracy of the occupied sites only (empty sites, whose
/// free spins would double every count, are left out).
pub fn occupied_ground_state_degeneracy(jm: &JointModel, n: &Configuration, bc: &BoundaryCondition) -> Result<u128> {
    let occupied = Sublattice::Sites(n.iter().filter(|(_, v)| *v == 1).map(|(s, _)| s.clone()).collect());
    let model = jm.induced_model(n)?;
    let lattice = model.lattice().clone().with_mask(occupied);
    ground_state_degeneracy_capped(&model.with_lattice(lattice)?, bc, DEFAULT_ENUMERATION_CAP)
}

/// Enumerated sites for the worst realization (every site occupied or
/// carrying a field), without computing anything.
pub fn required_enumeration(jm: &JointModel, bc: &BoundaryCondition) -> Result<usize> {
    let n = Configuration::constant(jm.kind.alphabet(), &jm.lattice.sites(), 1)?;
    Ok(enumerated_sites(&jm.induced_model(&n)?.hamiltonian(bc)?))
}

/// `⟨σ₀⟩` under the Gibbs measure for fixed `n`, exact.
pub fn quenched_magnetization(jm: &JointModel, n: &Configuration, bc: &BoundaryCondition) -> Result<f64> {
    let model = jm.induced_model(n)?;
    ExactDistribution::new(&model, bc, DEFAULT_ENUMERATION_CAP)?.spin_expectation(&Site::origin(jm.lattice.dim()))
}

/// As [`quenched_magnetization`], switching to Monte Carlo when the window
/// is over the enumeration cap and a fallback is given.
pub fn quenched_magnetization_with(
    jm: &JointModel,
    n: &Configuration,
    bc: &BoundaryCondition,
    fallback: Option<&McFallback>,
) -> Result<(Estimate, Method)> {
    match (quenched_magnetization(jm, n, bc), fallback) {
        (Ok(m), _) => Ok((Estimate { value: m, error: 0.0 }, Method::Exact)),
        (Err(Error::EnumerationCap { .. }), Some(f)) => {
            let model = jm.induced_model(n)?;
            let h = model.hamiltonian(bc)?;
            let origin = Site::origin(jm.lattice.dim());
            let o = h.index_of(&origin).ok_or(Error::SiteNotInWindow(origin))?;
            let est = observable_average(Arc::new(h), jm.beta, &f.protocol, |s| f64::from(s[o]))?;
            Ok((est, Method::MonteCarlo))
        }
        (Err(e), _) => Err(e),
    }
}

/// `|⟨σ₀⟩(n on Λ, +1 outside) - ⟨σ₀⟩(n on Λ, -1 outside)|` for a random
/// field model, with `Λ` the box of radius `radius` and free spin boundary
/// beyond the window.
pub fn bad_disorder_probe(jm: &JointModel, n: &Configuration, radius: usize) -> Result<f64> {
    if !matches!(jm.kind, DisorderKind::RandomField { .. }) {
        return Err(invalid("kind", "the disorder probe needs a random field model"));
    }
    let r = radius as i64;
    let sites = jm.lattice.sites();
    let inside = |s: &Site| s.sup_norm() <= r;
    if !sites.iter().any(|s| !inside(s)) {
        return Err(invalid("radius", "Λ must be a proper subset of the window"));
    }
    let mut values = [0.0; 2];
    let outside = [1i8, -1];
    let results: Vec<f64> = outside
        .par_iter()
        .map(|&v| {
            let mut m = Configuration::empty(Alphabet::Spin);
            for s in &sites {
                m.set(s.clone(), if inside(s) { n.value(s)? } else { v })?;
            }
            quenched_magnetization(jm, &m, &BoundaryCondition::Free)
        })
        .collect::<Result<_>>()?;
    values.copy_from_slice(&results);
    Ok((values[0] - values[1]).abs())
}

/// Two parallel occupied chains of `length` sites on rows `y = 0` and
/// `y = 2` with an empty row between them; with `connected`, the far end
/// `(length - 1, 1)` is occupied and links the chains. The bridging site is
/// `(0, 1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct TwoChainGeometry {
    pub lattice: Lattice,
    pub occupation: Configuration,
    pub bridge: Site,
}

pub fn two_chain_geometry(length: usize, connected: bool) -> Result<TwoChainGeometry> {
    if length < 2 {
        return Err(invalid("length", "chains need at least two sites"));
    }
    let l = length as i64;
    let lattice = Lattice::new(vec![0, 0], vec![l - 1, 2])?;
    let occupation = Configuration::from_pairs(
        Alphabet::Occupation,
        lattice.sites().into_iter().map(|s| {
            let (x, y) = (s.0[0], s.0[1]);
            let v = y != 1 || (connected && x == l - 1);
            (s, i8::from(v))
        }),
    )?;
    Ok(TwoChainGeometry {
        lattice,
        occupation,
        bridge: Site::new([0, 1]),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn all_configs(sites: &[Site], alphabet: Alphabet, values: [i8; 2]) -> Vec<Configuration> {
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

    #[test]
    fn joint_measure_is_normalized() {
        let lattice = Lattice::cube(2, 2).unwrap();
        let sites = lattice.sites();
        for kind in [DisorderKind::Dilution { p: 0.3 }, DisorderKind::RandomField { h: 0.7, q: 0.4 }] {
            let jm = JointModel::new(kind, 1.0, 0.9, lattice.clone()).unwrap();
            let mut total = 0.0;
            for n in all_configs(&sites, kind.alphabet(), if kind.alphabet() == Alphabet::Spin { [-1, 1] } else { [0, 1] }) {
                for s in all_configs(&sites, Alphabet::Spin, [-1, 1]) {
                    total += joint_weight(&jm, &n, &s, &BoundaryCondition::AllPlus).unwrap();
                }
            }
            assert_abs_diff_eq!(total, 1.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn fully_diluted_window_has_free_spins() {
        let lattice = Lattice::cube(2, 2).unwrap();
        let jm = JointModel::new(DisorderKind::Dilution { p: 1.0 }, 1.0, 1.0, lattice.clone()).unwrap();
        let n = Configuration::constant(Alphabet::Occupation, &lattice.sites(), 0).unwrap();
        let s = Configuration::constant(Alphabet::Spin, &lattice.sites(), 1).unwrap();
        assert_abs_diff_eq!(joint_weight(&jm, &n, &s, &BoundaryCondition::Free).unwrap(), 1.0 / 16.0, epsilon = 1e-15);
    }

    #[test]
    fn increment_examples() {
        let lattice = Lattice::cube(2, 3).unwrap();
        let jm = JointModel::new(DisorderKind::Dilution { p: 0.5 }, 1.0, 1.3, lattice.clone()).unwrap();
        let n = Configuration::constant(Alphabet::Occupation, &lattice.sites(), 0).unwrap();
        let d = free_energy_increment(&jm, &n, &Site::new([1, 1]), &BoundaryCondition::Free).unwrap();
        assert_eq!(d, 0.0);
        let jm0 = JointModel { beta: 0.0, ..jm.clone() };
        let mut n2 = Configuration::constant(Alphabet::Occupation, &lattice.sites(), 1).unwrap();
        n2.set(Site::new([1, 1]), 0).unwrap();
        let d = free_energy_increment(&jm0, &n2, &Site::new([1, 1]), &BoundaryCondition::AllPlus).unwrap();
        assert_abs_diff_eq!(d, 0.0, epsilon = 1e-12);
        assert!(free_energy_increment(&jm, &n2, &Site::new([0, 0]), &BoundaryCondition::Free).is_err());
    }

    #[test]
    fn infinite_temperature_magnetization_vanishes() {
        let lattice = Lattice::centered(2, 1).unwrap();
        let jm = JointModel::new(DisorderKind::RandomField { h: 0.5, q: 0.5 }, 1.0, 0.0, lattice.clone()).unwrap();
        let n = Configuration::constant(Alphabet::Spin, &lattice.sites(), 1).unwrap();
        assert_eq!(quenched_magnetization(&jm, &n, &BoundaryCondition::Free).unwrap(), 0.0);
        assert_eq!(bad_disorder_probe(&jm, &n, 0).unwrap(), 0.0);
    }

    #[test]
    fn two_chain_geometry_layout() {
        let g = two_chain_geometry(4, true).unwrap();
        assert_eq!(g.occupation.iter().filter(|(_, v)| *v == 1).count(), 9);
        assert_eq!(g.occupation.get(&Site::new([3, 1])), Some(1));
        assert_eq!(g.occupation.get(&g.bridge), Some(0));
        let g = two_chain_geometry(4, false).unwrap();
        assert_eq!(g.occupation.iter().filter(|(_, v)| *v == 1).count(), 8);
    }

    #[test]
    fn sampling_respects_extremes() {
        let w = Lattice::cube(2, 3).unwrap();
        let f = DisorderField::sample(DisorderKind::Dilution { p: 1.0 }, &w, 5).unwrap();
        assert!(f.realization.iter().all(|(_, v)| v == 0));
        let f = DisorderField::sample(DisorderKind::RandomField { h: 1.0, q: 1.0 }, &w, 5).unwrap();
        assert!(f.realization.iter().all(|(_, v)| v == 1));
        assert!(DisorderKind::Dilution { p: 1.2 }.validate().is_err());
    }

    #[test]
    fn far_connection_changes_the_bridge_increment_by_ln2() {
        let mut inc = Vec::new();
        let mut deg = Vec::new();
        for connected in [false, true] {
            let g = two_chain_geometry(4, connected).unwrap();
            let jm = JointModel::new(DisorderKind::Dilution { p: 0.5 }, 1.0, 20.0, g.lattice.clone()).unwrap();
            inc.push(free_energy_increment(&jm, &g.occupation, &g.bridge, &BoundaryCondition::Free).unwrap());
            let unbridged = two_chain_geometry(4, false).unwrap();
            let mut bridged = unbridged.occupation.clone();
            bridged.set(g.bridge.clone(), 1).unwrap();
            if !connected {
                deg.push(occupied_ground_state_degeneracy(&jm, &unbridged.occupation, &BoundaryCondition::Free).unwrap());
                deg.push(occupied_ground_state_degeneracy(&jm, &bridged, &BoundaryCondition::Free).unwrap());
            }
        }
        assert_abs_diff_eq!(inc[1] - inc[0], 2f64.ln(), epsilon = 1e-3);
        assert_eq!(deg, vec![4, 2]);
    }
}
