//! Lattice sites, finite windows and sublattice masks.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// A point of `Z^d`. Ordering is lexicographic in the coordinates.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Site(pub Vec<i64>);

impl Site {
    pub fn new(coords: impl Into<Vec<i64>>) -> Self {
        Site(coords.into())
    }

    pub fn origin(dim: usize) -> Self {
        Site(vec![0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[i64] {
        &self.0
    }

    pub fn offset(&self, by: &[i64]) -> Site {
        Site(self.0.iter().zip(by).map(|(a, b)| a + b).collect())
    }

    pub fn neg(&self) -> Site {
        Site(self.0.iter().map(|a| -a).collect())
    }

    pub fn sup_norm(&self) -> i64 {
        self.0.iter().map(|a| a.abs()).max().unwrap_or(0)
    }

    pub fn coord_sum(&self) -> i64 {
        self.0.iter().sum()
    }
}

impl fmt::Display for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (k, c) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// A subset of `Z^d` used for decimation and for masking windows.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sublattice {
    /// `(2Z)^d`: every coordinate even.
    Even,
    Complement(Box<Sublattice>),
    Sites(BTreeSet<Site>),
}

impl Sublattice {
    pub fn complement(self) -> Sublattice {
        match self {
            Sublattice::Complement(inner) => *inner,
            other => Sublattice::Complement(Box::new(other)),
        }
    }

    pub fn contains(&self, site: &Site) -> bool {
        match self {
            Sublattice::Even => site.0.iter().all(|c| c.rem_euclid(2) == 0),
            Sublattice::Complement(inner) => !inner.contains(site),
            Sublattice::Sites(set) => set.contains(site),
        }
    }

    /// Lattice spacing of the image lattice, when the set is a regular sublattice.
    pub fn stride(&self) -> i64 {
        match self {
            Sublattice::Even => 2,
            _ => 1,
        }
    }

    /// Coordinates of `site` on the image lattice: `x / 2` for `(2Z)^d`,
    /// unchanged otherwise. `None` when the site is not in the set.
    pub fn image_coords(&self, site: &Site) -> Option<Site> {
        if !self.contains(site) {
            return None;
        }
        let s = self.stride();
        Some(Site(site.0.iter().map(|c| c.div_euclid(s)).collect()))
    }

    /// Inverse of [`Sublattice::image_coords`].
    pub fn original_coords(&self, image: &Site) -> Site {
        let s = self.stride();
        Site(image.0.iter().map(|c| c * s).collect())
    }
}

/// A finite axis-aligned window of `Z^d` with an optional mask selecting the
/// active sites.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lattice {
    lower: Vec<i64>,
    upper: Vec<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mask: Option<Sublattice>,
}

impl Lattice {
    /// Window `lower[k] ..= upper[k]` along each axis.
    pub fn new(lower: Vec<i64>, upper: Vec<i64>) -> Result<Self> {
        if lower.is_empty() {
            return Err(invalid("dimension", "must be at least 1"));
        }
        if lower.len() != upper.len() {
            return Err(invalid("window", "lower and upper bounds differ in dimension"));
        }
        if lower.iter().zip(&upper).any(|(l, u)| l > u) {
            return Err(invalid("window", "empty window (lower bound above upper bound)"));
        }
        Ok(Lattice {
            lower,
            upper,
            mask: None,
        })
    }

    /// `{0, ..., side-1}^dim`.
    pub fn cube(dim: usize, side: usize) -> Result<Self> {
        if side == 0 {
            return Err(invalid("side", "must be positive"));
        }
        Lattice::new(vec![0; dim], vec![side as i64 - 1; dim])
    }

    /// `{-radius, ..., radius}^dim`.
    pub fn centered(dim: usize, radius: usize) -> Result<Self> {
        let r = radius as i64;
        Lattice::new(vec![-r; dim], vec![r; dim])
    }

    /// A 1D chain `{0, ..., len-1}`.
    pub fn chain(len: usize) -> Result<Self> {
        Lattice::cube(1, len)
    }

    pub fn with_mask(mut self, mask: Sublattice) -> Self {
        self.mask = Some(match self.mask.take() {
            None => mask,
            Some(existing) => intersect(existing, mask, &self),
        });
        self
    }

    pub fn mask(&self) -> Option<&Sublattice> {
        self.mask.as_ref()
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[i64] {
        &self.lower
    }

    pub fn upper(&self) -> &[i64] {
        &self.upper
    }

    pub fn extent(&self, axis: usize) -> i64 {
        self.upper[axis] - self.lower[axis] + 1
    }

    pub fn in_window(&self, site: &Site) -> bool {
        site.dim() == self.dim()
            && site
                .0
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(c, (l, u))| c >= l && c <= u)
    }

    pub fn is_active(&self, site: &Site) -> bool {
        self.in_window(site) && self.mask.as_ref().is_none_or(|m| m.contains(site))
    }

    /// Every window site, lexicographic order, ignoring the mask.
    pub fn window_sites(&self) -> Vec<Site> {
        let d = self.dim();
        let total: i64 = (0..d).map(|k| self.extent(k)).product();
        let mut out = Vec::with_capacity(total as usize);
        let mut cur = self.lower.clone();
        loop {
            out.push(Site(cur.clone()));
            let mut axis = d;
            loop {
                if axis == 0 {
                    return out;
                }
                axis -= 1;
                if cur[axis] < self.upper[axis] {
                    cur[axis] += 1;
                    break;
                }
                cur[axis] = self.lower[axis];
            }
        }
    }

    /// Active sites, lexicographic order.
    pub fn sites(&self) -> Vec<Site> {
        let all = self.window_sites();
        match &self.mask {
            None => all,
            Some(m) => all.into_iter().filter(|s| m.contains(s)).collect(),
        }
    }

    pub fn num_sites(&self) -> usize {
        self.sites().len()
    }

    /// Reduce a site into the window with periodic identification.
    pub fn wrap(&self, site: &Site) -> Site {
        Site(
            site.0
                .iter()
                .enumerate()
                .map(|(k, c)| self.lower[k] + (c - self.lower[k]).rem_euclid(self.extent(k)))
                .collect(),
        )
    }

    pub fn contains_origin(&self) -> bool {
        self.is_active(&Site::origin(self.dim()))
    }
}

fn intersect(a: Sublattice, b: Sublattice, window: &Lattice) -> Sublattice {
    let sites = window
        .window_sites()
        .into_iter()
        .filter(|s| a.contains(s) && b.contains(s))
        .collect();
    Sublattice::Sites(sites)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lexicographic_enumeration() {
        let l = Lattice::new(vec![0, 0], vec![1, 2]).unwrap();
        let s = l.sites();
        assert_eq!(s.len(), 6);
        assert_eq!(s[0], Site::new([0, 0]));
        assert_eq!(s[1], Site::new([0, 1]));
        assert_eq!(s[3], Site::new([1, 0]));
        let mut sorted = s.clone();
        sorted.sort();
        assert_eq!(s, sorted);
    }

    #[test]
    fn empty_window_rejected() {
        assert!(Lattice::new(vec![1], vec![0]).is_err());
        assert!(Lattice::new(vec![], vec![]).is_err());
    }

    #[test]
    fn even_sublattice_and_image() {
        let s = Sublattice::Even;
        assert!(s.contains(&Site::new([-2, 4])));
        assert!(!s.contains(&Site::new([-1, 4])));
        assert_eq!(s.image_coords(&Site::new([-2, 4])), Some(Site::new([-1, 2])));
        assert_eq!(s.original_coords(&Site::new([-1, 2])), Site::new([-2, 4]));
        let c = s.clone().complement();
        assert!(c.contains(&Site::new([1, 0])));
        assert_eq!(c.complement(), Sublattice::Even);
    }

    #[test]
    fn mask_selects_subset() {
        let l = Lattice::centered(2, 2).unwrap().with_mask(Sublattice::Even);
        assert_eq!(l.sites().len(), 9);
        assert_eq!(l.window_sites().len(), 25);
        let l2 = l.with_mask(Sublattice::Sites([Site::new([0, 0])].into_iter().collect()));
        assert_eq!(l2.sites(), vec![Site::new([0, 0])]);
    }

    #[test]
    fn periodic_wrap() {
        let l = Lattice::cube(2, 3).unwrap();
        assert_eq!(l.wrap(&Site::new([3, -1])), Site::new([0, 2]));
    }
}
