//! Decimation and infinite-temperature Glauber evolution, represented by the
//! constrained ("first-layer") models obtained by conditioning on an image
//! configuration.

use serde::{Deserialize, Serialize};

use crate::config::{Alphabet, BoundaryCondition, Configuration};
use crate::error::{invalid, Result};
use crate::lattice::{Site, Sublattice};
use crate::model::SpinModel;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TransformSpec {
    /// Keep only the spins on `sublattice`.
    Decimation { sublattice: Sublattice },
    /// Independent rate-1 spin flips for time `t`.
    Glauber { t: f64 },
}

impl TransformSpec {
    pub fn decimation(sublattice: Sublattice) -> Result<Self> {
        if let Sublattice::Sites(s) = &sublattice {
            if s.is_empty() {
                return Err(invalid("sublattice", "decimation set is empty"));
            }
        }
        Ok(TransformSpec::Decimation { sublattice })
    }

    pub fn glauber(t: f64) -> Result<Self> {
        check_time(t)?;
        Ok(TransformSpec::Glauber { t })
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            TransformSpec::Decimation { sublattice } => TransformSpec::decimation(sublattice.clone()).map(|_| ()),
            TransformSpec::Glauber { t } => check_time(*t),
        }
    }

    /// Rejects sublattices that leave nothing or everything of `window`.
    pub fn check_window(&self, window: &crate::Lattice) -> Result<()> {
        if let TransformSpec::Decimation { sublattice } = self {
            let sites = window.sites();
            let kept = sites.iter().filter(|s| sublattice.contains(s)).count();
            if kept == 0 || kept == sites.len() {
                return Err(invalid("sublattice", "decimation mask must be neither empty nor full on the window"));
            }
        }
        Ok(())
    }

    pub fn description(&self) -> String {
        match self {
            TransformSpec::Decimation { sublattice } => match sublattice {
                Sublattice::Even => "decimation to (2Z)^d".to_string(),
                Sublattice::Complement(_) => "decimation to a complement set".to_string(),
                Sublattice::Sites(s) => format!("decimation to {} sites", s.len()),
            },
            TransformSpec::Glauber { t } => format!("glauber t={t}"),
        }
    }
}

fn check_time(t: f64) -> Result<()> {
    if !(t >= 0.0) || t.is_infinite() {
        return Err(invalid("t", format!("time must be finite and ≥ 0, got {t}")));
    }
    Ok(())
}

/// Single-site Glauber kernel `p_t(σ, η) = (1 + e^{-2t} σ η) / 2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GlauberKernel {
    t: f64,
    decay: f64,
}

impl GlauberKernel {
    pub fn t(&self) -> f64 {
        self.t
    }

    /// `e^{-2t}`.
    pub fn decay(&self) -> f64 {
        self.decay
    }

    pub fn prob(&self, sigma: i8, eta: i8) -> f64 {
        0.5 * (1.0 + self.decay * f64::from(sigma) * f64::from(eta))
    }

    pub fn log_prob(&self, sigma: i8, eta: i8) -> f64 {
        self.prob(sigma, eta).ln()
    }
}

pub fn glauber_kernel(t: f64) -> Result<GlauberKernel> {
    check_time(t)?;
    Ok(GlauberKernel {
        t,
        decay: (-2.0 * t).exp(),
    })
}

/// `h_t = atanh(e^{-2t})`; `t = 0` yields `f64::INFINITY`.
pub fn dynamical_field(t: f64) -> Result<f64> {
    check_time(t)?;
    if t == 0.0 {
        return Ok(f64::INFINITY);
    }
    // atanh(e^{-2t}) = -½ ln tanh t, accurate for both small and large t
    Ok(-0.5 * t.tanh().ln())
}

/// Where a constrained model came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub transform: TransformSpec,
    pub image_hash: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstrainedModel {
    pub model: SpinModel,
    pub provenance: Provenance,
}

/// Base model with `h_t η_i / β` added to the field at every window site, so
/// that the Boltzmann weight gains `exp(h_t η_i σ_i)`.
pub fn evolution_constrained_model(model: &SpinModel, t: f64, eta: &Configuration) -> Result<ConstrainedModel> {
    let h_t = dynamical_field(t)?;
    if h_t.is_infinite() {
        return Err(invalid("t", "t = 0 gives an infinite dynamical field"));
    }
    if !(model.beta() > 0.0) {
        return Err(invalid("beta", "evolution constraint needs beta > 0"));
    }
    check_spins(eta)?;
    let sites = model.lattice().sites();
    eta.require_covers(&sites)?;
    let mut out = model.clone();
    for s in &sites {
        let v = eta.value(s)?;
        out.interaction_mut().add_site_field(s.clone(), h_t * f64::from(v) / model.beta());
    }
    Ok(ConstrainedModel {
        model: out,
        provenance: Provenance {
            transform: TransformSpec::Glauber { t },
            image_hash: eta.content_hash(),
        },
    })
}

/// The model on the unobserved sites `S^c ∩ window`: couplings touching `S`
/// are removed and the field at `i` gains `Σ_{j ∈ S ∩ window} J(i - j) ω_j`.
/// With periodic `bc` the sum runs over periodic images. Sites of `S` beyond
/// the window are still resolved by `bc` when the Hamiltonian is compiled.
pub fn decimation_constrained_model(
    model: &SpinModel,
    sublattice: &Sublattice,
    omega: &Configuration,
    bc: &BoundaryCondition,
) -> Result<ConstrainedModel> {
    check_spins(omega)?;
    let lattice = model.lattice();
    let kept: Vec<Site> = lattice.sites().into_iter().filter(|s| sublattice.contains(s)).collect();
    omega.require_covers(&kept)?;
    let free: Vec<Site> = lattice.sites().into_iter().filter(|s| !sublattice.contains(s)).collect();
    if kept.is_empty() || free.is_empty() {
        return Err(invalid("sublattice", "decimation mask must be neither empty nor full on the window"));
    }
    let periodic = matches!(bc, BoundaryCondition::Periodic);
    let mut induced = Vec::new();
    for i in &free {
        let mut f = 0.0;
        for (offset, _) in model.interaction().signed_offsets() {
            let j = i.offset(&offset.0);
            let target = if lattice.in_window(&j) {
                j
            } else if periodic {
                lattice.wrap(&j)
            } else {
                continue;
            };
            if target == *i || !lattice.is_active(&target) || !sublattice.contains(&target) {
                continue;
            }
            f += model.coupling_via(i, &target, &offset) * f64::from(omega.value(&target)?);
        }
        if f != 0.0 {
            induced.push((i.clone(), f));
        }
    }
    let mut out = model.clone().with_lattice(lattice.clone().with_mask(sublattice.clone().complement()))?;
    for (s, f) in induced {
        out.interaction_mut().add_site_field(s, f);
    }
    Ok(ConstrainedModel {
        model: out,
        provenance: Provenance {
            transform: TransformSpec::Decimation {
                sublattice: sublattice.clone(),
            },
            image_hash: omega.content_hash(),
        },
    })
}

fn check_spins(c: &Configuration) -> Result<()> {
    if c.alphabet() != Alphabet::Spin {
        return Err(invalid("configuration", "image configurations must be spin-valued"));
    }
    Ok(())
}
