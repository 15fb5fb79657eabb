//! Kac-scaled interactions `J_γ(r) = γ^d J(γ r)`, checkerboard-induced
//! fields on the three-quarter lattice, the 1D Lebowitz-Penrose comparison
//! and a Binder-crossing pipeline for the critical inverse temperature.
//!
//! Profiles are radial in the Euclidean norm and normalized so that
//! `∫ J(x) dx = 1`.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::badness::{generate, ConfigGenerator};
use crate::config::{BoundaryCondition, Configuration};
use crate::error::{invalid, Result};
use crate::exact::{TransferMatrix, MAX_TRANSFER_RANGE};
use crate::interaction::Interaction;
use crate::lattice::{Lattice, Site, Sublattice};
use crate::mc::{binder_from_magnetizations, run_chain_on, ChainProtocol};
use crate::meanfield::neg_entropy;
use crate::model::SpinModel;
use crate::output::{Cell, Csv};
use crate::stats::Estimate;
use crate::transform::{decimation_constrained_model, ConstrainedModel};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KacShape {
    /// `c · 1[|x| ≤ 1]`.
    TopHat,
    /// `c · max(0, 1 - |x|)`.
    Triangle,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KacProfile {
    pub shape: KacShape,
    pub gamma: f64,
    pub dim: usize,
}

/// Volume of the Euclidean unit ball in `d` dimensions.
fn unit_ball_volume(d: usize) -> f64 {
    match d {
        0 => 1.0,
        1 => 2.0,
        _ => 2.0 * PI / d as f64 * unit_ball_volume(d - 2),
    }
}

impl KacProfile {
    pub fn new(shape: KacShape, gamma: f64, dim: usize) -> Result<Self> {
        let p = KacProfile { shape, gamma, dim };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(invalid("gamma", format!("must lie in (0, 1], got {}", self.gamma)));
        }
        if self.dim == 0 {
            return Err(invalid("dim", "must be positive"));
        }
        Ok(())
    }

    /// Normalization constant `c`.
    pub fn normalization(&self) -> f64 {
        let v = unit_ball_volume(self.dim);
        match self.shape {
            KacShape::TopHat => 1.0 / v,
            KacShape::Triangle => (self.dim as f64 + 1.0) / v,
        }
    }

    /// Constant `C` in `|Σ_r J_γ(r) - 1| ≤ C γ`.
    pub fn sum_constant(&self) -> f64 {
        2f64.powi(self.dim as i32)
    }

    /// `J(x)` at Euclidean distance `x`.
    pub fn profile(&self, x: f64) -> f64 {
        let c = self.normalization();
        match self.shape {
            KacShape::TopHat => {
                if x <= 1.0 {
                    c
                } else {
                    0.0
                }
            }
            KacShape::Triangle => c * (1.0 - x).max(0.0),
        }
    }

    /// `J_γ(r)` for an integer offset; zero at `r = 0`.
    pub fn coupling(&self, offset: &[i64]) -> f64 {
        if offset.iter().all(|&c| c == 0) {
            return 0.0;
        }
        let norm = offset.iter().map(|&c| (c * c) as f64).sum::<f64>().sqrt();
        self.gamma.powi(self.dim as i32) * self.profile(self.gamma * norm)
    }

    /// Largest sup-norm offset with a nonzero coupling.
    pub fn range(&self) -> usize {
        let r = (1.0 / self.gamma + 1e-9).floor() as usize;
        match self.shape {
            KacShape::TopHat => r,
            // J vanishes at |x| = 1
            KacShape::Triangle => {
                if (r as f64 * self.gamma - 1.0).abs() < 1e-9 {
                    r.saturating_sub(1)
                } else {
                    r
                }
            }
        }
    }

    fn offsets(&self) -> Vec<Vec<i64>> {
        let r = self.range() as i64;
        let mut out = vec![Vec::new()];
        for _ in 0..self.dim {
            out = out
                .into_iter()
                .flat_map(|o| {
                    (-r..=r).map(move |c| {
                        let mut o = o.clone();
                        o.push(c);
                        o
                    })
                })
                .collect();
        }
        out
    }

    /// `Σ_{r ≠ 0} J_γ(r)`.
    pub fn kernel_sum(&self) -> f64 {
        self.offsets().iter().map(|o| self.coupling(o)).sum()
    }
}

/// Pair terms `J_γ(r)` for every integer `r ≠ 0` in the support.
pub fn kac_kernel(profile: &KacProfile) -> Result<Interaction> {
    profile.validate()?;
    let pairs: Vec<(Vec<i64>, f64)> = profile
        .offsets()
        .into_iter()
        .filter_map(|o| {
            let j = profile.coupling(&o);
            (j != 0.0).then_some((o, j))
        })
        .collect();
    Interaction::new(profile.dim, pairs)
}

/// `(-1)^{Σ image coordinates}` on the sites of `sublattice`.
pub fn checkerboard_value(sublattice: &Sublattice, site: &Site) -> Option<i8> {
    sublattice
        .image_coords(site)
        .map(|s| if s.coord_sum().rem_euclid(2) == 0 { 1 } else { -1 })
}

/// `Σ_{j ∈ S} J_γ(i - j) η(j)` for the checkerboard `η` on `S`.
pub fn checkerboard_effective_field(profile: &KacProfile, sublattice: &Sublattice, site: &Site) -> Result<f64> {
    profile.validate()?;
    if site.dim() != profile.dim {
        return Err(invalid("site", "dimension mismatch"));
    }
    if sublattice.contains(site) {
        return Err(invalid("site", format!("{site} lies in the decimated set")));
    }
    let mut f = 0.0;
    for o in profile.offsets() {
        let j = site.offset(&o);
        if let Some(v) = checkerboard_value(sublattice, &j) {
            f += profile.coupling(&o) * f64::from(v);
        }
    }
    Ok(f)
}

/// `max_i |field(i)|` over `S^c` for `S = (2Z)^d`, using the period 4 of
/// the checkerboard.
pub fn checkerboard_max_field(profile: &KacProfile) -> Result<f64> {
    let period = Lattice::cube(profile.dim, 4)?;
    let mut best = 0.0f64;
    for s in period.sites() {
        if Sublattice::Even.contains(&s) {
            continue;
        }
        best = best.max(checkerboard_effective_field(profile, &Sublattice::Even, &s)?.abs());
    }
    Ok(best)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LpGap {
    pub gamma: f64,
    pub f_gamma: f64,
    pub f_cw: f64,
    pub gap: f64,
}

/// `min_m [-m²/2 - h m + I(m)/β]`: for `f` with a single minimum this is
/// its convex envelope at the same point.
pub fn cw_envelope_free_energy(beta: f64, h: f64) -> Result<f64> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(invalid("beta", "must be finite and > 0"));
    }
    let sol = crate::meanfield::cw_magnetization(beta, beta * h)?;
    Ok(sol
        .minima
        .iter()
        .map(|&m| -0.5 * m * m - h * m + neg_entropy(m) / beta)
        .fold(f64::INFINITY, f64::min))
}

/// Transfer-matrix free energy of the 1D Kac chain against the mean-field
/// envelope.
pub fn lp_free_energy_gap(profile: &KacProfile, beta: f64, h: f64) -> Result<LpGap> {
    profile.validate()?;
    if profile.dim != 1 {
        return Err(invalid("profile", "the Lebowitz-Penrose comparison is one-dimensional"));
    }
    let range = profile.range();
    if range > MAX_TRANSFER_RANGE {
        return Err(crate::Error::TransferRangeCap {
            range,
            cap: MAX_TRANSFER_RANGE,
        });
    }
    let couplings: Vec<f64> = (1..=range as i64).map(|r| profile.coupling(&[r])).collect();
    let f_gamma = TransferMatrix::new(&couplings, h, beta)?.free_energy()?;
    let f_cw = cw_envelope_free_energy(beta, h)?;
    Ok(LpGap {
        gamma: profile.gamma,
        f_gamma,
        f_cw,
        gap: (f_gamma - f_cw).abs(),
    })
}

/// Decimation of a 2D Kac model to `S^c` for `S = (2Z)²`, conditioned on `ω`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThreeQuarterModel {
    pub constrained: ConstrainedModel,
    pub profile: KacProfile,
    /// Fraction of sites kept free.
    pub p: f64,
    /// `p · β`.
    pub effective_beta: f64,
}

pub fn quenched_threequarter_model(
    profile: &KacProfile,
    beta: f64,
    window: &Lattice,
    omega: &Configuration,
    bc: &BoundaryCondition,
) -> Result<ThreeQuarterModel> {
    if profile.dim != 2 {
        return Err(invalid("profile", "the three-quarter lattice is two-dimensional"));
    }
    let model = SpinModel::new(window.clone(), kac_kernel(profile)?, beta)?;
    let constrained = decimation_constrained_model(&model, &Sublattice::Even, omega, bc)?;
    Ok(ThreeQuarterModel {
        constrained,
        profile: *profile,
        p: 0.75,
        effective_beta: 0.75 * beta,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BetacConfig {
    pub profile: KacProfile,
    /// `ω` in image coordinates.
    pub omega: ConfigGenerator,
    /// Side lengths, multiples of 4.
    pub sizes: Vec<usize>,
    pub betas: Vec<f64>,
    pub seeds: Vec<u64>,
    pub protocol: ChainProtocol,
    pub bootstrap_samples: usize,
    pub bootstrap_seed: u64,
}

impl BetacConfig {
    pub fn validate(&self) -> Result<()> {
        self.profile.validate()?;
        if self.profile.dim != 2 {
            return Err(invalid("profile", "the three-quarter model is two-dimensional"));
        }
        if self.sizes.len() < 2 {
            return Err(invalid("sizes", "need at least two sizes"));
        }
        for &l in &self.sizes {
            periodic_window(l)?;
        }
        if self.betas.len() < 2 || self.betas.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("betas", "need a strictly increasing grid of at least two points"));
        }
        if self.betas.iter().any(|b| !(b.is_finite() && *b > 0.0)) {
            return Err(invalid("betas", "every beta must be finite and > 0"));
        }
        if self.seeds.is_empty() {
            return Err(invalid("seeds", "need at least one seed"));
        }
        self.omega.validate()?;
        self.protocol.validate()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinderCell {
    pub size: usize,
    pub beta: f64,
    pub binder: Estimate,
    pub measurements: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum CrossingResult {
    Crossing { beta: f64, error: f64 },
    NoCrossing,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    pub sizes: (usize, usize),
    pub result: CrossingResult,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BetacReport {
    pub profile: KacProfile,
    pub cells: Vec<BinderCell>,
    pub crossings: Vec<Crossing>,
    /// Mean-field reference `1/p`.
    pub reference: f64,
}

impl BetacReport {
    pub fn table_csv(&self) -> String {
        let mut csv = Csv::new(&["size", "beta", "binder", "error"]);
        for c in &self.cells {
            csv.row(vec![Cell::from(c.size), c.beta.into(), c.binder.value.into(), c.binder.error.into()]);
        }
        csv.into_string()
    }

    pub fn summary_json(&self) -> String {
        serde_json::to_string_pretty(&serde_json::json!({
            "profile": self.profile,
            "crossings": self.crossings,
            "reference": self.reference,
        }))
        .expect("report serializes")
    }
}

/// First sign change of `b - a` along the grid, linearly interpolated.
pub fn interpolate_crossing(betas: &[f64], a: &[f64], b: &[f64]) -> Option<f64> {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| y - x).collect();
    (1..d.len()).find_map(|k| {
        let (d0, d1) = (d[k - 1], d[k]);
        if d0 == 0.0 {
            Some(betas[k - 1])
        } else if d0.signum() != d1.signum() || d1 == 0.0 {
            Some(betas[k - 1] + (betas[k] - betas[k - 1]) * d0 / (d0 - d1))
        } else {
            None
        }
    })
}

fn periodic_window(size: usize) -> Result<Lattice> {
    if size == 0 || size % 4 != 0 {
        return Err(invalid("sizes", format!("side {size} must be a positive multiple of 4")));
    }
    Lattice::new(vec![0, 0], vec![size as i64 - 1; 2])
}

/// Binder cumulant of the three-quarter model on periodic `L × L` windows
/// for every `(L, β)`, and the crossing of consecutive sizes.
pub fn betac_pipeline(config: &BetacConfig) -> Result<BetacReport> {
    config.validate()?;
    let jobs: Vec<(usize, f64)> = config
        .sizes
        .iter()
        .flat_map(|&l| config.betas.iter().map(move |&b| (l, b)))
        .collect();
    let cells: Vec<BinderCell> = jobs
        .par_iter()
        .map(|&(size, beta)| {
            let window = periodic_window(size)?;
            let image_window = Lattice::new(vec![0, 0], vec![size as i64 / 2 - 1; 2])?;
            let omega = generate(&config.omega, &image_window)?.map_sites(|s| Sublattice::Even.original_coords(s));
            let tq = quenched_threequarter_model(&config.profile, beta, &window, &omega, &BoundaryCondition::Periodic)?;
            let model = &tq.constrained.model;
            let h = Arc::new(model.hamiltonian(&BoundaryCondition::Periodic)?);
            let mut m = Vec::new();
            for (k, &seed) in config.seeds.iter().enumerate() {
                let p = ChainProtocol {
                    seed,
                    stream: k as u64,
                    ..config.protocol.clone()
                };
                m.extend(run_chain_on(h.clone(), beta, model.content_hash(), &p)?.m);
            }
            Ok(BinderCell {
                size,
                beta,
                binder: binder_from_magnetizations(&m)?,
                measurements: m.len(),
            })
        })
        .collect::<Result<_>>()?;

    let row = |l: usize| -> Vec<Estimate> { cells.iter().filter(|c| c.size == l).map(|c| c.binder).collect() };
    let mut crossings = Vec::new();
    for (i, w) in config.sizes.windows(2).enumerate() {
        let (a, b) = (row(w[0]), row(w[1]));
        let va: Vec<f64> = a.iter().map(|e| e.value).collect();
        let vb: Vec<f64> = b.iter().map(|e| e.value).collect();
        let result = match interpolate_crossing(&config.betas, &va, &vb) {
            None => CrossingResult::NoCrossing,
            Some(beta) => {
                let mut rng = ChaCha8Rng::seed_from_u64(config.bootstrap_seed);
                rng.set_stream(i as u64);
                let noise = |e: &Estimate| if e.error.is_finite() { e.error } else { 0.0 };
                let mut samples = Vec::new();
                for _ in 0..config.bootstrap_samples {
                    let mut draw = |v: &[Estimate]| -> Vec<f64> {
                        v.iter()
                            .map(|e| e.value + noise(e) * Normal::new(0.0, 1.0).expect("unit normal").sample(&mut rng))
                            .collect()
                    };
                    let (sa, sb) = (draw(&a), draw(&b));
                    if let Some(x) = interpolate_crossing(&config.betas, &sa, &sb) {
                        samples.push(x);
                    }
                }
                let error = if samples.len() >= 2 {
                    let mean = samples.iter().sum::<f64>() / samples.len() as f64;
                    (samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (samples.len() - 1) as f64).sqrt()
                } else {
                    f64::NAN
                };
                CrossingResult::Crossing { beta, error }
            }
        };
        crossings.push(Crossing {
            sizes: (w[0], w[1]),
            result,
        });
    }
    Ok(BetacReport {
        profile: config.profile,
        cells,
        crossings,
        reference: 4.0 / 3.0,
    })
}
