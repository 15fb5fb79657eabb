//! Finite-volume quasilocality variation of transformed measures.
//!
//! For an image configuration `ω` and a radius `r`, the single-site
//! conditional `P(σ'₀ = + | ω on Λ_r \ {0}, η outside Λ_r)` is computed by
//! exact enumeration of the original spins in an image window of radius
//! `r + margin`, and the variation is its spread over a finite set of
//! outside configurations `η`.

use std::collections::BTreeSet;
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Alphabet, BoundaryCondition, Configuration};
use crate::error::{invalid, Error, Result};
use crate::exact::{enumerated_sites, log_partition, DEFAULT_ENUMERATION_CAP};
use crate::hamiltonian::Hamiltonian;
use crate::lattice::{Lattice, Site, Sublattice};
use crate::mc::{chain_rng, observable_average, ChainProtocol};
use crate::model::SpinModel;
use crate::output::{Cell, Csv};
use crate::transform::{dynamical_field, glauber_kernel, TransformSpec};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConfigGenerator {
    /// `(-1)^{x₁ + ... + x_d}`.
    Checkerboard,
    /// Independent `+1` with probability `q`, drawn in lexicographic site order.
    Bernoulli { q: f64, seed: u64 },
    /// `base` with the spins at `flips` reversed.
    Perturbation {
        base: Box<ConfigGenerator>,
        flips: BTreeSet<Site>,
    },
    Constant { value: i8 },
    /// Global flip of `base`.
    Flipped { base: Box<ConfigGenerator> },
}

impl ConfigGenerator {
    pub fn plus() -> Self {
        ConfigGenerator::Constant { value: 1 }
    }

    pub fn minus() -> Self {
        ConfigGenerator::Constant { value: -1 }
    }

    pub fn flipped_checkerboard() -> Self {
        ConfigGenerator::Flipped {
            base: Box::new(ConfigGenerator::Checkerboard),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ConfigGenerator::Checkerboard => Ok(()),
            ConfigGenerator::Bernoulli { q, .. } => {
                if (0.0..=1.0).contains(q) {
                    Ok(())
                } else {
                    Err(invalid("q", format!("must lie in [0, 1], got {q}")))
                }
            }
            ConfigGenerator::Perturbation { base, .. } | ConfigGenerator::Flipped { base } => base.validate(),
            ConfigGenerator::Constant { value } => {
                if *value == 1 || *value == -1 {
                    Ok(())
                } else {
                    Err(invalid("value", "constant configuration must be ±1"))
                }
            }
        }
    }

    pub fn label(&self) -> String {
        match self {
            ConfigGenerator::Checkerboard => "checkerboard".into(),
            ConfigGenerator::Bernoulli { q, seed } => format!("bernoulli(q={q},seed={seed})"),
            ConfigGenerator::Perturbation { base, flips } => format!("perturbation({},{} sites)", base.label(), flips.len()),
            ConfigGenerator::Constant { value: 1 } => "all-plus".into(),
            ConfigGenerator::Constant { .. } => "all-minus".into(),
            ConfigGenerator::Flipped { base } => format!("flipped-{}", base.label()),
        }
    }
}

/// Deterministic spin configuration on the active sites of `window`.
pub fn generate(gen: &ConfigGenerator, window: &Lattice) -> Result<Configuration> {
    gen.validate()?;
    let sites = window.sites();
    match gen {
        ConfigGenerator::Checkerboard => {
            Configuration::spins_from_fn(&sites, |s| if s.coord_sum().rem_euclid(2) == 0 { 1 } else { -1 })
        }
        ConfigGenerator::Bernoulli { q, seed } => {
            let mut rng = chain_rng(*seed, 0);
            Configuration::spins_from_fn(&sites, |_| if rng.random::<f64>() < *q { 1 } else { -1 })
        }
        ConfigGenerator::Perturbation { base, flips } => {
            let mut c = generate(base, window)?;
            for s in flips {
                if let Some(v) = c.get(s) {
                    c.set(s.clone(), -v)?;
                }
            }
            Ok(c)
        }
        ConfigGenerator::Constant { value } => Configuration::constant(Alphabet::Spin, &sites, *value),
        ConfigGenerator::Flipped { base } => Ok(generate(base, window)?.flipped()),
    }
}

/// Monte Carlo settings used when a window exceeds the enumeration cap.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McFallback {
    pub protocol: ChainProtocol,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BadnessOptions {
    /// In image-lattice units; defaults to interaction range + 2.
    pub margin: Option<usize>,
    /// Original-spin boundary condition beyond the window.
    pub bc: BoundaryCondition,
    pub candidates: Vec<ConfigGenerator>,
    pub cap: usize,
    pub mc_fallback: Option<McFallback>,
}

impl Default for BadnessOptions {
    fn default() -> Self {
        BadnessOptions {
            margin: None,
            bc: BoundaryCondition::AllPlus,
            candidates: default_candidates(),
            cap: DEFAULT_ENUMERATION_CAP,
            mc_fallback: None,
        }
    }
}

impl BadnessOptions {
    pub fn margin_for(&self, model: &SpinModel) -> usize {
        self.margin.unwrap_or(model.interaction().range() + 2)
    }
}

/// All-plus, all-minus, checkerboard and flipped checkerboard.
pub fn default_candidates() -> Vec<ConfigGenerator> {
    vec![
        ConfigGenerator::plus(),
        ConfigGenerator::minus(),
        ConfigGenerator::Checkerboard,
        ConfigGenerator::flipped_checkerboard(),
    ]
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Exact,
    MonteCarlo,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateProbability {
    pub eta: String,
    pub probability: f64,
    /// Zero for exact values.
    pub error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Variation {
    pub radius: usize,
    pub variation: f64,
    pub eta1: String,
    pub eta2: String,
    pub method: Method,
    pub probabilities: Vec<CandidateProbability>,
}

/// Original-spin window and image bookkeeping for one radius.
struct Geometry {
    window: Lattice,
    image_radius: i64,
    sublattice: Option<Sublattice>,
}

impl Geometry {
    fn new(dim: usize, transform: &TransformSpec, image_radius: usize) -> Result<Self> {
        let r = image_radius as i64;
        match transform {
            TransformSpec::Glauber { .. } => Ok(Geometry {
                window: Lattice::new(vec![-r; dim], vec![r; dim])?,
                image_radius: r,
                sublattice: None,
            }),
            TransformSpec::Decimation { sublattice } => {
                let s = sublattice.stride();
                if !sublattice.contains(&Site::origin(dim)) {
                    return Err(invalid("sublattice", "the origin must belong to the decimation set"));
                }
                Ok(Geometry {
                    window: Lattice::new(vec![-s * r; dim], vec![s * r; dim])?,
                    image_radius: r,
                    sublattice: Some(sublattice.clone()),
                })
            }
        }
    }

    /// Image sites of the window, in image coordinates.
    fn image_sites(&self) -> Vec<Site> {
        match &self.sublattice {
            None => self.window.sites(),
            Some(s) => self.window.sites().iter().filter_map(|x| s.image_coords(x)).collect(),
        }
    }

    fn to_original(&self, image: &Site) -> Site {
        match &self.sublattice {
            None => image.clone(),
            Some(s) => s.original_coords(image),
        }
    }
}

/// `P(σ'₀ = +)` given the image configuration `image` (image coordinates,
/// origin excluded), together with the method used.
fn origin_probability(
    model: &SpinModel,
    transform: &TransformSpec,
    geometry: &Geometry,
    image: &Configuration,
    options: &BadnessOptions,
) -> Result<(f64, f64, Method)> {
    let local = model.clone().with_lattice(geometry.window.clone())?;
    let base = local.hamiltonian(&options.bc)?.scaled(model.beta());
    let origin = Site::origin(model.dim());
    let o = base.index_of(&origin).ok_or_else(|| Error::SiteNotInWindow(origin.clone()))?;
    let (conditioned, up_given): (Hamiltonian, [f64; 2]) = match transform {
        TransformSpec::Glauber { t } => {
            let h_t = dynamical_field(*t)?;
            if h_t.is_infinite() {
                return Err(invalid("t", "t = 0 makes the image spin deterministic"));
            }
            let mut extra = vec![0.0; base.len()];
            for (s, v) in image.iter() {
                let k = base.index_of(s).ok_or_else(|| Error::SiteNotInWindow(s.clone()))?;
                extra[k] = h_t * f64::from(v);
            }
            let kernel = glauber_kernel(*t)?;
            (base.with_added_fields(&extra), [kernel.prob(1, 1), kernel.prob(-1, 1)])
        }
        TransformSpec::Decimation { .. } => {
            let mut fixed = Vec::with_capacity(image.len());
            for (s, v) in image.iter() {
                let x = geometry.to_original(s);
                let k = base.index_of(&x).ok_or_else(|| Error::SiteNotInWindow(x.clone()))?;
                fixed.push((k, v));
            }
            (base.clamp(&fixed), [1.0, 0.0])
        }
    };
    let o = conditioned.index_of(&origin).unwrap_or(o);
    let plus = log_partition(&conditioned.clamp(&[(o, 1)]), 1.0, options.cap);
    let minus = log_partition(&conditioned.clamp(&[(o, -1)]), 1.0, options.cap);
    match (plus, minus, &options.mc_fallback) {
        (Ok(lp), Ok(lm), _) => {
            if lp == f64::NEG_INFINITY && lm == f64::NEG_INFINITY {
                return Err(Error::ZeroProbability);
            }
            // weight of σ₀ = + relative to the total
            let w_plus = 1.0 / (1.0 + (lm - lp).exp());
            let p = up_given[0] * w_plus + up_given[1] * (1.0 - w_plus);
            Ok((p, 0.0, Method::Exact))
        }
        (Err(Error::EnumerationCap { .. }), _, Some(fallback)) | (_, Err(Error::EnumerationCap { .. }), Some(fallback)) => {
            let est = observable_average(Arc::new(conditioned), 1.0, &fallback.protocol, |spins| {
                if spins[o] == 1 {
                    up_given[0]
                } else {
                    up_given[1]
                }
            })?;
            Ok((est.value, est.error, Method::MonteCarlo))
        }
        (Err(e), _, _) | (_, Err(e), _) => Err(e),
    }
}

/// Sites the exact engine would enumerate for the origin conditional at
/// `radius`, without computing it. The count does not depend on `ω`.
pub fn required_enumeration(
    model: &SpinModel,
    transform: &TransformSpec,
    radius: usize,
    options: &BadnessOptions,
) -> Result<usize> {
    transform.validate()?;
    let geometry = Geometry::new(model.dim(), transform, radius + options.margin_for(model))?;
    let local = model.clone().with_lattice(geometry.window.clone())?;
    let base = local.hamiltonian(&options.bc)?;
    let origin = Site::origin(model.dim());
    let mut fixed = Vec::new();
    if geometry.sublattice.is_some() {
        for s in geometry.image_sites() {
            let x = geometry.to_original(&s);
            if let Some(k) = base.index_of(&x) {
                fixed.push((k, 1));
            }
        }
    } else if let Some(k) = base.index_of(&origin) {
        fixed.push((k, 1));
    }
    Ok(enumerated_sites(&base.clamp(&fixed)))
}

/// Variation of the origin conditional over `options.candidates` for
/// `ω` fixed on the image box of radius `radius`.
///
/// `omega` is indexed by image coordinates and must cover that box except
/// the origin. Spins of `ω` outside the box are ignored.
pub fn variation_at_volume(
    model: &SpinModel,
    transform: &TransformSpec,
    omega: &Configuration,
    radius: usize,
    options: &BadnessOptions,
) -> Result<Variation> {
    transform.validate()?;
    if options.candidates.is_empty() {
        return Err(invalid("candidates", "need at least one outside configuration"));
    }
    let margin = options.margin_for(model);
    let geometry = Geometry::new(model.dim(), transform, radius + margin)?;
    let origin = Site::origin(model.dim());
    let r = radius as i64;
    let inner: Vec<Site> = geometry
        .image_sites()
        .into_iter()
        .filter(|s| s.sup_norm() <= r && *s != origin)
        .collect();
    omega.require_covers(&inner)?;
    let image_lattice = Lattice::new(
        vec![-geometry.image_radius; model.dim()],
        vec![geometry.image_radius; model.dim()],
    )?;
    let results: Vec<(String, f64, f64, Method)> = options
        .candidates
        .par_iter()
        .map(|gen| {
            let eta = generate(gen, &image_lattice)?;
            let image = eta
                .restrict(|s| s.sup_norm() > r)
                .overlay(&omega.restrict(|s| inner.contains(s)));
            let (p, err, method) = origin_probability(model, transform, &geometry, &image, options)?;
            Ok((gen.label(), p, err, method))
        })
        .collect::<Result<_>>()?;
    let (mut lo, mut hi) = (0, 0);
    for (k, r) in results.iter().enumerate() {
        if r.1 < results[lo].1 {
            lo = k;
        }
        if r.1 > results[hi].1 {
            hi = k;
        }
    }
    let method = if results.iter().any(|r| r.3 == Method::MonteCarlo) {
        Method::MonteCarlo
    } else {
        Method::Exact
    };
    Ok(Variation {
        radius,
        variation: (results[hi].1 - results[lo].1).clamp(0.0, 1.0),
        eta1: results[hi].0.clone(),
        eta2: results[lo].0.clone(),
        method,
        probabilities: results
            .into_iter()
            .map(|(eta, probability, error, _)| CandidateProbability { eta, probability, error })
            .collect(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrendSummary {
    /// Least-squares slope of variation against radius.
    pub slope: f64,
    pub min: f64,
    pub max: f64,
    pub non_increasing: bool,
    pub strictly_decreasing: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariationCurve {
    pub points: Vec<Variation>,
    pub margin: usize,
    pub bc: BoundaryCondition,
    pub transform: TransformSpec,
    pub model_hash: String,
    pub generator: ConfigGenerator,
    pub candidates: Vec<String>,
    pub summary: TrendSummary,
}

impl VariationCurve {
    pub fn to_csv(&self) -> String {
        let mut csv = Csv::new(&["radius", "variation", "eta1", "eta2"]);
        for p in &self.points {
            csv.row(vec![
                Cell::from(p.radius),
                p.variation.into(),
                p.eta1.as_str().into(),
                p.eta2.as_str().into(),
            ]);
        }
        csv.into_string()
    }

    pub fn summary_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("curve serializes")
    }

    pub fn radii(&self) -> Vec<usize> {
        self.points.iter().map(|p| p.radius).collect()
    }

    pub fn variations(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.variation).collect()
    }
}

fn summarize(points: &[Variation]) -> TrendSummary {
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.radius as f64).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.variation).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    TrendSummary {
        slope: if sxx > 0.0 { sxy / sxx } else { 0.0 },
        min: ys.iter().copied().fold(f64::INFINITY, f64::min),
        max: ys.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        non_increasing: ys.windows(2).all(|w| w[1] <= w[0]),
        strictly_decreasing: ys.windows(2).all(|w| w[1] < w[0]),
    }
}

/// Variation at each radius for one fixed output of `gen`, generated on the
/// image box of the largest radius.
pub fn badness_profile(
    model: &SpinModel,
    transform: &TransformSpec,
    gen: &ConfigGenerator,
    radii: &[usize],
    options: &BadnessOptions,
) -> Result<VariationCurve> {
    if radii.is_empty() {
        return Err(invalid("radii", "need at least one radius"));
    }
    if radii.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("radii", "must be strictly increasing"));
    }
    let r_max = *radii.last().expect("non-empty") as i64;
    let omega = generate(gen, &Lattice::new(vec![-r_max; model.dim()], vec![r_max; model.dim()])?)?;
    let points: Vec<Variation> = radii
        .par_iter()
        .map(|&r| variation_at_volume(model, transform, &omega, r, options))
        .collect::<Result<_>>()?;
    Ok(VariationCurve {
        summary: summarize(&points),
        points,
        margin: options.margin_for(model),
        bc: options.bc.clone(),
        transform: transform.clone(),
        model_hash: model.content_hash(),
        generator: gen.clone(),
        candidates: options.candidates.iter().map(|c| c.label()).collect(),
    })
}
