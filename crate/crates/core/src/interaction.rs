//! Translation-invariant pair couplings plus single-site fields.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::lattice::Site;

/// One pair term `-J(r) σ_x σ_{x+r}`, stored under the canonical offset
/// (first non-zero coordinate positive).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairTerm {
    pub offset: Site,
    pub coupling: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "InteractionRepr", into = "InteractionRepr")]
pub struct Interaction {
    dim: usize,
    pairs: Vec<PairTerm>,
    uniform_field: f64,
    site_fields: BTreeMap<Site, f64>,
}

#[derive(Serialize, Deserialize)]
struct InteractionRepr {
    dim: usize,
    pairs: Vec<PairTerm>,
    #[serde(default)]
    uniform_field: f64,
    #[serde(default)]
    site_fields: Vec<(Site, f64)>,
}

impl From<Interaction> for InteractionRepr {
    fn from(i: Interaction) -> Self {
        InteractionRepr {
            dim: i.dim,
            pairs: i.pairs,
            uniform_field: i.uniform_field,
            site_fields: i.site_fields.into_iter().collect(),
        }
    }
}

impl TryFrom<InteractionRepr> for Interaction {
    type Error = crate::error::Error;

    fn try_from(r: InteractionRepr) -> Result<Self> {
        let mut i = Interaction::new(
            r.dim,
            r.pairs.into_iter().map(|p| (p.offset.0, p.coupling)),
        )?
        .with_uniform_field(r.uniform_field);
        for (s, h) in r.site_fields {
            i.add_site_field(s, h);
        }
        Ok(i)
    }
}

fn is_canonical(offset: &[i64]) -> bool {
    offset.iter().find(|&&c| c != 0).is_some_and(|&c| c > 0)
}

impl Interaction {
    /// Builds from `(offset, coupling)` pairs. Offsets may be given in either
    /// sign; when both `r` and `-r` appear their couplings must agree and the
    /// pair is counted once.
    pub fn new(dim: usize, pairs: impl IntoIterator<Item = (Vec<i64>, f64)>) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("dimension", "must be at least 1"));
        }
        let mut merged: BTreeMap<Vec<i64>, f64> = BTreeMap::new();
        for (offset, j) in pairs {
            if offset.len() != dim {
                return Err(invalid("pairs", format!("offset {offset:?} is not {dim}-dimensional")));
            }
            if offset.iter().all(|&c| c == 0) {
                return Err(invalid("pairs", "zero offset (self-interaction) is not a pair term"));
            }
            if !j.is_finite() {
                return Err(invalid("pairs", format!("coupling {j} for offset {offset:?} is not finite")));
            }
            let canon = if is_canonical(&offset) {
                offset
            } else {
                offset.iter().map(|c| -c).collect()
            };
            match merged.get(&canon) {
                Some(&prev) if (prev - j).abs() > 1e-12 * (1.0 + prev.abs()) => {
                    return Err(invalid(
                        "pairs",
                        format!("coupling for offset {canon:?} is not symmetric under negation ({prev} vs {j})"),
                    ));
                }
                Some(_) => {}
                None => {
                    merged.insert(canon, j);
                }
            }
        }
        Ok(Interaction {
            dim,
            pairs: merged
                .into_iter()
                .filter(|(_, j)| *j != 0.0)
                .map(|(o, j)| PairTerm {
                    offset: Site(o),
                    coupling: j,
                })
                .collect(),
            uniform_field: 0.0,
            site_fields: BTreeMap::new(),
        })
    }

    /// Nearest-neighbour ferromagnet (`coupling > 0`) on `Z^dim`.
    pub fn nearest_neighbor(dim: usize, coupling: f64) -> Result<Self> {
        Interaction::new(
            dim,
            (0..dim).map(|k| {
                let mut o = vec![0; dim];
                o[k] = 1;
                (o, coupling)
            }),
        )
    }

    /// No couplings at all.
    pub fn free(dim: usize) -> Result<Self> {
        Interaction::new(dim, std::iter::empty())
    }

    pub fn with_uniform_field(mut self, h: f64) -> Self {
        self.uniform_field = h;
        self
    }

    pub fn add_site_field(&mut self, site: Site, h: f64) {
        *self.site_fields.entry(site).or_insert(0.0) += h;
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Canonical pair terms (one per `{r, -r}`).
    pub fn pairs(&self) -> &[PairTerm] {
        &self.pairs
    }

    /// Every offset in both signs with its coupling.
    pub fn signed_offsets(&self) -> impl Iterator<Item = (Site, f64)> + '_ {
        self.pairs
            .iter()
            .flat_map(|p| [(p.offset.clone(), p.coupling), (p.offset.neg(), p.coupling)])
    }

    pub fn coupling(&self, offset: &Site) -> f64 {
        let canon = if is_canonical(&offset.0) {
            offset.clone()
        } else {
            offset.neg()
        };
        self.pairs
            .iter()
            .find(|p| p.offset == canon)
            .map_or(0.0, |p| p.coupling)
    }

    pub fn uniform_field(&self) -> f64 {
        self.uniform_field
    }

    pub fn site_fields(&self) -> &BTreeMap<Site, f64> {
        &self.site_fields
    }

    pub fn field_at(&self, site: &Site) -> f64 {
        self.uniform_field + self.site_fields.get(site).copied().unwrap_or(0.0)
    }

    /// Largest sup-norm of an offset; 0 without pair terms.
    pub fn range(&self) -> usize {
        self.pairs.iter().map(|p| p.offset.sup_norm() as usize).max().unwrap_or(0)
    }

    pub fn is_ferromagnetic(&self) -> bool {
        self.pairs.iter().all(|p| p.coupling >= 0.0)
    }

    /// Same couplings, all fields removed.
    pub fn without_fields(&self) -> Interaction {
        Interaction {
            dim: self.dim,
            pairs: self.pairs.clone(),
            uniform_field: 0.0,
            site_fields: BTreeMap::new(),
        }
    }
}
