//! Spin and occupation configurations and boundary conditions.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::lattice::Site;

/// Single-site value set: `{-1, +1}` for spins, `{0, 1}` for occupations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Alphabet {
    Spin,
    Occupation,
}

impl Alphabet {
    pub fn admits(self, v: i8) -> bool {
        match self {
            Alphabet::Spin => v == 1 || v == -1,
            Alphabet::Occupation => v == 0 || v == 1,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Alphabet::Spin => "spin",
            Alphabet::Occupation => "occupation",
        }
    }
}

/// An assignment of single-site values to a finite set of sites.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "ConfigRepr", try_from = "ConfigRepr")]
pub struct Configuration {
    alphabet: Alphabet,
    values: BTreeMap<Site, i8>,
}

#[derive(Serialize, Deserialize)]
struct ConfigRepr {
    alphabet: Alphabet,
    sites: Vec<Site>,
    values: Vec<i8>,
}

impl From<Configuration> for ConfigRepr {
    fn from(c: Configuration) -> Self {
        let (sites, values) = c.values.into_iter().unzip();
        ConfigRepr {
            alphabet: c.alphabet,
            sites,
            values,
        }
    }
}

impl TryFrom<ConfigRepr> for Configuration {
    type Error = Error;

    fn try_from(r: ConfigRepr) -> Result<Self> {
        if r.sites.len() != r.values.len() {
            return Err(crate::error::invalid(
                "configuration",
                "sites and values have different lengths",
            ));
        }
        Configuration::from_pairs(r.alphabet, r.sites.into_iter().zip(r.values))
    }
}

impl Configuration {
    pub fn empty(alphabet: Alphabet) -> Self {
        Configuration {
            alphabet,
            values: BTreeMap::new(),
        }
    }

    pub fn from_pairs(alphabet: Alphabet, pairs: impl IntoIterator<Item = (Site, i8)>) -> Result<Self> {
        let mut c = Configuration::empty(alphabet);
        for (s, v) in pairs {
            c.set(s, v)?;
        }
        Ok(c)
    }

    /// Spin configuration from `f(site)`; `f` must return `±1`.
    pub fn spins_from_fn<'a>(sites: impl IntoIterator<Item = &'a Site>, mut f: impl FnMut(&Site) -> i8) -> Result<Self> {
        Configuration::from_pairs(Alphabet::Spin, sites.into_iter().map(|s| (s.clone(), f(s))))
    }

    pub fn constant<'a>(alphabet: Alphabet, sites: impl IntoIterator<Item = &'a Site>, value: i8) -> Result<Self> {
        Configuration::from_pairs(alphabet, sites.into_iter().map(|s| (s.clone(), value)))
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    pub fn set(&mut self, site: Site, value: i8) -> Result<()> {
        if !self.alphabet.admits(value) {
            return Err(Error::InvalidSpinValue {
                site,
                value,
                alphabet: self.alphabet.name(),
            });
        }
        self.values.insert(site, value);
        Ok(())
    }

    pub fn get(&self, site: &Site) -> Option<i8> {
        self.values.get(site).copied()
    }

    pub fn value(&self, site: &Site) -> Result<i8> {
        self.get(site).ok_or_else(|| Error::MissingSite(site.clone()))
    }

    pub fn remove(&mut self, site: &Site) -> Option<i8> {
        self.values.remove(site)
    }

    pub fn contains(&self, site: &Site) -> bool {
        self.values.contains_key(site)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Site, i8)> {
        self.values.iter().map(|(s, v)| (s, *v))
    }

    pub fn domain(&self) -> impl Iterator<Item = &Site> {
        self.values.keys()
    }

    /// First site of `sites` missing from the configuration, as an error.
    pub fn require_covers<'a>(&self, sites: impl IntoIterator<Item = &'a Site>) -> Result<()> {
        for s in sites {
            if !self.contains(s) {
                return Err(Error::MissingSite(s.clone()));
            }
        }
        Ok(())
    }

    /// Global spin flip. Occupations are returned unchanged.
    pub fn flipped(&self) -> Configuration {
        match self.alphabet {
            Alphabet::Spin => Configuration {
                alphabet: self.alphabet,
                values: self.values.iter().map(|(s, v)| (s.clone(), -v)).collect(),
            },
            Alphabet::Occupation => self.clone(),
        }
    }

    /// Values of `other` take precedence.
    pub fn overlay(&self, other: &Configuration) -> Configuration {
        let mut out = self.clone();
        for (s, v) in other.iter() {
            out.values.insert(s.clone(), v);
        }
        out
    }

    pub fn restrict(&self, mut keep: impl FnMut(&Site) -> bool) -> Configuration {
        Configuration {
            alphabet: self.alphabet,
            values: self
                .values
                .iter()
                .filter(|(s, _)| keep(s))
                .map(|(s, v)| (s.clone(), *v))
                .collect(),
        }
    }

    pub fn map_sites(&self, mut f: impl FnMut(&Site) -> Site) -> Configuration {
        Configuration {
            alphabet: self.alphabet,
            values: self.values.iter().map(|(s, v)| (f(s), *v)).collect(),
        }
    }

    /// Stable content hash (hex SHA-256 of the canonical JSON form).
    pub fn content_hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("configuration serializes");
        hex::encode(Sha256::digest(&json))
    }
}

/// What lies outside a finite window.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryCondition {
    Free,
    AllPlus,
    AllMinus,
    /// Spins on the exterior annulus; must cover every exterior site within
    /// interaction range of the window.
    Explicit(Configuration),
    Periodic,
}

impl BoundaryCondition {
    pub fn flipped(&self) -> BoundaryCondition {
        match self {
            BoundaryCondition::AllPlus => BoundaryCondition::AllMinus,
            BoundaryCondition::AllMinus => BoundaryCondition::AllPlus,
            BoundaryCondition::Explicit(c) => BoundaryCondition::Explicit(c.flipped()),
            other => other.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alphabet_is_enforced() {
        let mut c = Configuration::empty(Alphabet::Spin);
        assert!(c.set(Site::new([0]), 0).is_err());
        assert!(c.set(Site::new([0]), -1).is_ok());
        let mut n = Configuration::empty(Alphabet::Occupation);
        assert!(n.set(Site::new([0]), -1).is_err());
        assert!(n.set(Site::new([0]), 0).is_ok());
    }

    #[test]
    fn json_round_trip_validates() {
        let c = Configuration::from_pairs(
            Alphabet::Spin,
            [(Site::new([0, 1]), 1), (Site::new([-1, 0]), -1)],
        )
        .unwrap();
        let s = serde_json::to_string(&c).unwrap();
        let back: Configuration = serde_json::from_str(&s).unwrap();
        assert_eq!(back, c);
        let bad = r#"{"alphabet":"spin","sites":[[0]],"values":[2]}"#;
        assert!(serde_json::from_str::<Configuration>(bad).is_err());
    }

    #[test]
    fn hash_depends_on_content() {
        let sites = [Site::new([0]), Site::new([1])];
        let a = Configuration::constant(Alphabet::Spin, &sites, 1).unwrap();
        let b = a.flipped();
        assert_ne!(a.content_hash(), b.content_hash());
        assert_eq!(a.content_hash(), a.clone().content_hash());
    }
}
