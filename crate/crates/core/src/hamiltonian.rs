//! Index-based Hamiltonian compiled from a [`SpinModel`](crate::SpinModel)
//! and a boundary condition. Every engine runs on this form:
//!
//! `E(σ) = constant - Σ_bonds J σ_i σ_j - Σ_i h_i σ_i`
//!
//! with boundary spins and frozen sites already folded into `h` and `constant`.

use std::collections::HashMap;

use crate::config::{Alphabet, Configuration};
use crate::error::{Error, Result};
use crate::lattice::Site;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bond {
    pub a: usize,
    pub b: usize,
    pub coupling: f64,
}

#[derive(Clone, Debug)]
pub struct Hamiltonian {
    sites: Vec<Site>,
    index: HashMap<Site, usize>,
    field: Vec<f64>,
    bonds: Vec<Bond>,
    adjacency: Vec<Vec<(usize, f64)>>,
    constant: f64,
}

impl Hamiltonian {
    /// `bonds` may contain repeated pairs (periodic images); they are summed.
    pub(crate) fn from_parts(sites: Vec<Site>, field: Vec<f64>, bonds: Vec<Bond>, constant: f64) -> Self {
        let n = sites.len();
        let mut merged: HashMap<(usize, usize), f64> = HashMap::new();
        let mut order = Vec::new();
        for b in bonds {
            let key = (b.a.min(b.b), b.a.max(b.b));
            debug_assert!(key.0 != key.1);
            if !merged.contains_key(&key) {
                order.push(key);
            }
            *merged.entry(key).or_insert(0.0) += b.coupling;
        }
        order.sort_unstable();
        let bonds: Vec<Bond> = order
            .into_iter()
            .map(|(a, b)| Bond {
                a,
                b,
                coupling: merged[&(a, b)],
            })
            .filter(|b| b.coupling != 0.0)
            .collect();
        let mut adjacency = vec![Vec::new(); n];
        for b in &bonds {
            adjacency[b.a].push((b.b, b.coupling));
            adjacency[b.b].push((b.a, b.coupling));
        }
        let index = sites.iter().cloned().enumerate().map(|(k, s)| (s, k)).collect();
        Hamiltonian {
            sites,
            index,
            field,
            bonds,
            adjacency,
            constant,
        }
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    pub fn index_of(&self, site: &Site) -> Option<usize> {
        self.index.get(site).copied()
    }

    pub fn fields(&self) -> &[f64] {
        &self.field
    }

    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    pub fn neighbors(&self, k: usize) -> &[(usize, f64)] {
        &self.adjacency[k]
    }

    pub fn constant(&self) -> f64 {
        self.constant
    }

    pub fn energy(&self, spins: &[i8]) -> f64 {
        debug_assert_eq!(spins.len(), self.len());
        let mut e = self.constant;
        for b in &self.bonds {
            e -= b.coupling * f64::from(spins[b.a]) * f64::from(spins[b.b]);
        }
        for (h, s) in self.field.iter().zip(spins) {
            e -= h * f64::from(*s);
        }
        e
    }

    /// `h_k + Σ_j J_kj σ_j`; flipping site `k` changes the energy by
    /// `2 σ_k · local_field(k)`.
    pub fn local_field(&self, k: usize, spins: &[i8]) -> f64 {
        self.field[k]
            + self.adjacency[k]
                .iter()
                .map(|&(j, c)| c * f64::from(spins[j]))
                .sum::<f64>()
    }

    /// Spin vector in site order; the configuration must cover every site.
    pub fn spins_of(&self, config: &Configuration) -> Result<Vec<i8>> {
        if config.alphabet() != Alphabet::Spin {
            return Err(crate::error::invalid("configuration", "expected a spin configuration"));
        }
        self.sites.iter().map(|s| config.value(s)).collect()
    }

    pub fn configuration_of(&self, spins: &[i8]) -> Configuration {
        Configuration::from_pairs(Alphabet::Spin, self.sites.iter().cloned().zip(spins.iter().copied()))
            .expect("spins are ±1")
    }

    /// Freezes the given sites, folding their couplings into the fields and
    /// constant of the remaining sites. Site order of the survivors is kept.
    pub fn clamp(&self, fixed: &[(usize, i8)]) -> Hamiltonian {
        let mut value: Vec<Option<i8>> = vec![None; self.len()];
        for &(k, v) in fixed {
            value[k] = Some(v);
        }
        let mut new_index = vec![usize::MAX; self.len()];
        let mut sites = Vec::new();
        let mut field = Vec::new();
        let mut constant = self.constant;
        for k in 0..self.len() {
            match value[k] {
                None => {
                    new_index[k] = sites.len();
                    sites.push(self.sites[k].clone());
                    field.push(self.field[k]);
                }
                Some(v) => constant -= self.field[k] * f64::from(v),
            }
        }
        let mut bonds = Vec::new();
        for b in &self.bonds {
            match (value[b.a], value[b.b]) {
                (None, None) => bonds.push(Bond {
                    a: new_index[b.a],
                    b: new_index[b.b],
                    coupling: b.coupling,
                }),
                (Some(va), None) => field[new_index[b.b]] += b.coupling * f64::from(va),
                (None, Some(vb)) => field[new_index[b.a]] += b.coupling * f64::from(vb),
                (Some(va), Some(vb)) => constant -= b.coupling * f64::from(va) * f64::from(vb),
            }
        }
        Hamiltonian::from_parts(sites, field, bonds, constant)
    }

    /// Every term multiplied by `factor`; `scaled(beta)` evaluated at
    /// inverse temperature 1 is the same distribution.
    pub fn scaled(&self, factor: f64) -> Hamiltonian {
        let bonds = self
            .bonds
            .iter()
            .map(|b| Bond {
                coupling: b.coupling * factor,
                ..*b
            })
            .collect();
        let field = self.field.iter().map(|h| h * factor).collect();
        Hamiltonian::from_parts(self.sites.clone(), field, bonds, self.constant * factor)
    }

    /// Adds `extra[k]` to the field of site `k`.
    pub fn with_added_fields(&self, extra: &[f64]) -> Hamiltonian {
        assert_eq!(extra.len(), self.len());
        let mut h = self.clone();
        for (f, e) in h.field.iter_mut().zip(extra) {
            *f += e;
        }
        h
    }

    /// Clamp by site labels.
    pub fn clamp_config(&self, fixed: &Configuration) -> Result<Hamiltonian> {
        let mut pairs = Vec::with_capacity(fixed.len());
        for (s, v) in fixed.iter() {
            let k = self.index_of(s).ok_or_else(|| Error::SiteNotInWindow(s.clone()))?;
            if v != 1 && v != -1 {
                return Err(Error::InvalidSpinValue {
                    site: s.clone(),
                    value: v,
                    alphabet: "spin",
                });
            }
            pairs.push((k, v));
        }
        Ok(self.clamp(&pairs))
    }
}
