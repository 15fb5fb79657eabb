//! The spin model consumed by every engine, and its finite-volume energy.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{Alphabet, BoundaryCondition, Configuration};
use crate::error::{invalid, Error, Result};
use crate::hamiltonian::{Bond, Hamiltonian};
use crate::interaction::Interaction;
use crate::lattice::{Lattice, Site};

/// How quenched disorder variables enter the energy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule")]
pub enum CouplingRule {
    /// Site dilution: the pair coupling between `i` and `j` is multiplied by
    /// `n_i n_j`, `n ∈ {0, 1}`.
    Dilution,
    /// Random field: adds `strength · n_i` to the field at `i`, `n ∈ {-1, +1}`.
    Field { strength: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuenchedOverlay {
    pub disorder: Configuration,
    pub rule: CouplingRule,
}

impl QuenchedOverlay {
    /// Disorder value at a site. Unlisted sites are occupied under dilution
    /// and carry no field otherwise.
    fn value(&self, site: &Site) -> i8 {
        match (self.disorder.get(site), &self.rule) {
            (Some(v), _) => v,
            (None, CouplingRule::Dilution) => 1,
            (None, CouplingRule::Field { .. }) => 0,
        }
    }
}

/// Lattice window, interaction, inverse temperature and optional quenched
/// disorder. Probabilities are proportional to `exp(-beta · E)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpinModel {
    lattice: Lattice,
    interaction: Interaction,
    beta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    quenched: Option<QuenchedOverlay>,
}

impl SpinModel {
    pub fn new(lattice: Lattice, interaction: Interaction, beta: f64) -> Result<Self> {
        if lattice.dim() != interaction.dim() {
            return Err(invalid(
                "interaction",
                format!("{}-dimensional interaction on a {}-dimensional lattice", interaction.dim(), lattice.dim()),
            ));
        }
        check_beta(beta)?;
        Ok(SpinModel {
            lattice,
            interaction,
            beta,
            quenched: None,
        })
    }

    /// Nearest-neighbour Ising model with coupling `j` and uniform field `h`.
    pub fn ising(lattice: Lattice, j: f64, h: f64, beta: f64) -> Result<Self> {
        let d = lattice.dim();
        SpinModel::new(lattice, Interaction::nearest_neighbor(d, j)?.with_uniform_field(h), beta)
    }

    pub fn with_quenched(mut self, overlay: QuenchedOverlay) -> Result<Self> {
        let expected = match overlay.rule {
            CouplingRule::Dilution => Alphabet::Occupation,
            CouplingRule::Field { .. } => Alphabet::Spin,
        };
        if overlay.disorder.alphabet() != expected {
            return Err(invalid("quenched", "disorder alphabet does not match the coupling rule"));
        }
        if let CouplingRule::Field { strength } = overlay.rule {
            if !strength.is_finite() {
                return Err(invalid("quenched", "field strength must be finite"));
            }
        }
        overlay.disorder.require_covers(&self.lattice.sites())?;
        self.quenched = Some(overlay);
        Ok(self)
    }

    pub fn with_beta(mut self, beta: f64) -> Result<Self> {
        check_beta(beta)?;
        self.beta = beta;
        Ok(self)
    }

    pub fn with_lattice(mut self, lattice: Lattice) -> Result<Self> {
        if lattice.dim() != self.interaction.dim() {
            return Err(invalid("lattice", "dimension mismatch"));
        }
        if let Some(q) = &self.quenched {
            q.disorder.require_covers(&lattice.sites())?;
        }
        self.lattice = lattice;
        Ok(self)
    }

    pub fn with_interaction(mut self, interaction: Interaction) -> Result<Self> {
        if interaction.dim() != self.lattice.dim() {
            return Err(invalid("interaction", "dimension mismatch"));
        }
        self.interaction = interaction;
        Ok(self)
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn interaction(&self) -> &Interaction {
        &self.interaction
    }

    pub(crate) fn interaction_mut(&mut self) -> &mut Interaction {
        &mut self.interaction
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn quenched(&self) -> Option<&QuenchedOverlay> {
        self.quenched.as_ref()
    }

    pub fn dim(&self) -> usize {
        self.lattice.dim()
    }

    /// Effective coupling of the pair `{a, b}` with offset `b - a`,
    /// including dilution factors.
    pub fn pair_coupling(&self, a: &Site, b: &Site) -> f64 {
        let offset = Site(b.0.iter().zip(&a.0).map(|(x, y)| x - y).collect());
        self.coupling_via(a, b, &offset)
    }

    /// Coupling for offset `offset` between sites `a` and `b`, where `b` may
    /// be a periodic image rather than `a + offset`.
    pub(crate) fn coupling_via(&self, a: &Site, b: &Site, offset: &Site) -> f64 {
        let j = self.interaction.coupling(offset);
        match &self.quenched {
            Some(q @ QuenchedOverlay { rule: CouplingRule::Dilution, .. }) => {
                j * f64::from(q.value(a)) * f64::from(q.value(b))
            }
            _ => j,
        }
    }

    /// Single-site field, including any random-field contribution.
    pub fn site_field(&self, site: &Site) -> f64 {
        let h = self.interaction.field_at(site);
        match &self.quenched {
            Some(q @ QuenchedOverlay { rule: CouplingRule::Field { strength }, .. }) => {
                h + strength * f64::from(q.value(site))
            }
            _ => h,
        }
    }

    /// Compile the finite-volume Hamiltonian on the active sites with the
    /// given boundary condition.
    ///
    /// Window sites that are masked out contribute nothing (their effect, if
    /// any, lives in the fields). Exterior sites are resolved through `bc`.
    pub fn hamiltonian(&self, bc: &BoundaryCondition) -> Result<Hamiltonian> {
        let sites = self.lattice.sites();
        let index: std::collections::HashMap<&Site, usize> =
            sites.iter().enumerate().map(|(k, s)| (s, k)).collect();
        let mut field: Vec<f64> = sites.iter().map(|s| self.site_field(s)).collect();
        let mut bonds = Vec::new();
        let mut constant = 0.0;
        let canonical: Vec<&Site> = self.interaction.pairs().iter().map(|p| &p.offset).collect();

        for (k, site) in sites.iter().enumerate() {
            for (offset, _) in self.interaction.signed_offsets() {
                let is_canonical = canonical.contains(&&offset);
                let other = site.offset(&offset.0);
                if self.lattice.in_window(&other) {
                    if is_canonical {
                        if let Some(&m) = index.get(&other) {
                            let j = self.pair_coupling(site, &other);
                            bonds.push(Bond { a: k, b: m, coupling: j });
                        }
                    }
                    continue;
                }
                let j = self.pair_coupling(site, &other);
                match bc {
                    BoundaryCondition::Free => {}
                    BoundaryCondition::AllPlus => field[k] += j,
                    BoundaryCondition::AllMinus => field[k] -= j,
                    BoundaryCondition::Explicit(eta) => {
                        let v = eta.get(&other).ok_or_else(|| Error::UnresolvedBoundary(other.clone()))?;
                        field[k] += j * f64::from(v);
                    }
                    BoundaryCondition::Periodic => {
                        if !is_canonical {
                            continue;
                        }
                        let wrapped = self.lattice.wrap(&other);
                        if &wrapped == site {
                            // A bond onto its own periodic image only shifts the energy.
                            constant -= self.coupling_via(site, site, &offset);
                            continue;
                        }
                        if let Some(&m) = index.get(&wrapped) {
                            let j = self.coupling_via(site, &wrapped, &offset);
                            bonds.push(Bond { a: k, b: m, coupling: j });
                        }
                    }
                }
            }
        }
        Ok(Hamiltonian::from_parts(sites, field, bonds, constant))
    }

    /// `H^Λ(σ, η)` for a configuration covering every active site.
    pub fn energy(&self, sigma: &Configuration, bc: &BoundaryCondition) -> Result<f64> {
        let h = self.hamiltonian(bc)?;
        let spins = h.spins_of(sigma)?;
        Ok(h.energy(&spins))
    }

    /// `-beta · H^Λ(σ, η)`.
    pub fn log_gibbs_weight(&self, sigma: &Configuration, bc: &BoundaryCondition) -> Result<f64> {
        Ok(-self.beta * self.energy(sigma, bc)?)
    }

    /// Unnormalized Boltzmann weight `exp(-beta · H^Λ(σ, η))`. Use
    /// [`SpinModel::log_gibbs_weight`] when this may overflow.
    pub fn gibbs_weight(&self, sigma: &Configuration, bc: &BoundaryCondition) -> Result<f64> {
        Ok(self.log_gibbs_weight(sigma, bc)?.exp())
    }

    /// `Σ_{X ∋ 0} ||Φ_X||_∞`: every coupling touching the origin (both
    /// partner directions) plus the field magnitude at the origin.
    pub fn interaction_norm(&self) -> f64 {
        let origin = Site::origin(self.dim());
        let pairs: f64 = self
            .interaction
            .signed_offsets()
            .map(|(o, _)| self.pair_coupling(&origin, &o).abs())
            .sum();
        pairs + self.site_field(&origin).abs()
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn content_hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("model serializes");
        hex::encode(Sha256::digest(&json))
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if !beta.is_finite() || beta < 0.0 {
        return Err(invalid("beta", format!("must be finite and non-negative, got {beta}")));
    }
    Ok(())
}
