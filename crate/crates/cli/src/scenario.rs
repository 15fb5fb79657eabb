//! Scenario files: TOML with a fixed header and a `[params]` table whose
//! shape depends on `kind`.
//!
//! ```toml
//! schema = 1
//! name = "cw_threshold"
//! kind = "cw_scan"
//!
//! [params]
//! p = 0.75
//! beta = { start = 1.0, stop = 2.0, step = 0.01 }
//! ```

use std::fmt;

use nongibbs::badness::{required_enumeration as badness_required, BadnessOptions, ConfigGenerator, McFallback};
use nongibbs::exact::{enumerated_sites, DEFAULT_ENUMERATION_CAP};
use nongibbs::kac::{BetacConfig, KacProfile, KacShape};
use nongibbs::mc::{ChainProtocol, UpdateKind};
use nongibbs::meanfield::{validate_extrapolated_oracle, CwParams};
use nongibbs::quenched::{required_enumeration as quenched_required, two_chain_geometry, DisorderKind, JointModel};
use nongibbs::transform::TransformSpec;
use nongibbs::{BoundaryCondition, Interaction, Lattice, SpinModel};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    BadnessProfile,
    QuenchedProbe,
    CwScan,
    LpCheck,
    BetacPipeline,
    Degeneracy,
    OracleCrosscheck,
}

impl Kind {
    pub const ALL: [Kind; 7] = [
        Kind::BadnessProfile,
        Kind::QuenchedProbe,
        Kind::CwScan,
        Kind::LpCheck,
        Kind::BetacPipeline,
        Kind::Degeneracy,
        Kind::OracleCrosscheck,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Kind::BadnessProfile => "badness_profile",
            Kind::QuenchedProbe => "quenched_probe",
            Kind::CwScan => "cw_scan",
            Kind::LpCheck => "lp_check",
            Kind::BetacPipeline => "betac_pipeline",
            Kind::Degeneracy => "degeneracy",
            Kind::OracleCrosscheck => "oracle_crosscheck",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            Kind::BadnessProfile => "variation of the transformed origin conditional against radius",
            Kind::QuenchedProbe => "quenched magnetization and boundary sensitivity for sampled disorder",
            Kind::CwScan => "jump of the decimated Curie-Weiss conditional across a beta grid",
            Kind::LpCheck => "1D Kac free energy against the mean-field convex envelope",
            Kind::BetacPipeline => "Binder crossings of the three-quarter Kac model",
            Kind::Degeneracy => "two-chain dilution ground states and bridge free-energy increments",
            Kind::OracleCrosscheck => "mean-field limit against the finite-N oracle, Monte Carlo against enumeration",
        }
    }

    /// Parameter keys, required ones first.
    pub fn parameters(self) -> &'static str {
        match self {
            Kind::BadnessProfile => {
                "model, transform, radii; generators, margin, bc, cap, candidates, mc_fallback"
            }
            Kind::QuenchedProbe => "disorder, beta, radius, seeds; coupling, probe_radii, bc",
            Kind::CwScan => "p, beta{start,stop,step}; h",
            Kind::LpCheck => "gammas, betas; shape, h",
            Kind::BetacPipeline => {
                "gamma, sizes, betas, seeds, sweeps; shape, omega, burn_in, update, bootstrap_samples, bootstrap_seed"
            }
            Kind::Degeneracy => "length; beta, coupling",
            Kind::OracleCrosscheck => "meanfield{p, n, betas, alphas, h} and/or mc[]{model, size, bc, sweeps, seed}",
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Pair-interaction model on `Z^dim`: nearest-neighbour coupling `j` unless
/// explicit `pairs` are given.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub dim: usize,
    pub beta: f64,
    #[serde(default)]
    pub h: f64,
    #[serde(default = "one")]
    pub j: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pairs: Option<Vec<PairSpec>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairSpec {
    pub offset: Vec<i64>,
    pub j: f64,
}

fn one() -> f64 {
    1.0
}

impl ModelSpec {
    pub fn build(&self, lattice: Lattice) -> Result<SpinModel, String> {
        let interaction = match &self.pairs {
            None => Interaction::nearest_neighbor(self.dim, self.j),
            Some(p) => Interaction::new(self.dim, p.iter().map(|t| (t.offset.clone(), t.j)).collect::<Vec<_>>()),
        }
        .map_err(|e| e.to_string())?
        .with_uniform_field(self.h);
        SpinModel::new(lattice, interaction, self.beta).map_err(|e| e.to_string())
    }

    fn check(&self, field: &str) -> Result<SpinModel, String> {
        if self.dim == 0 || self.dim > 3 {
            return Err(format!("{field}.dim = {} must be 1, 2 or 3", self.dim));
        }
        let lattice = Lattice::cube(self.dim, 1).map_err(|e| e.to_string())?;
        self.build(lattice).map_err(|e| format!("{field}: {e}"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BadnessParams {
    pub model: ModelSpec,
    pub transform: TransformSpec,
    pub radii: Vec<usize>,
    #[serde(default = "default_generators")]
    pub generators: Vec<ConfigGenerator>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub margin: Option<usize>,
    #[serde(default = "all_plus")]
    pub bc: BoundaryCondition,
    #[serde(default = "default_cap")]
    pub cap: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidates: Option<Vec<ConfigGenerator>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mc_fallback: Option<ChainProtocol>,
}

fn default_generators() -> Vec<ConfigGenerator> {
    vec![ConfigGenerator::Checkerboard]
}

fn all_plus() -> BoundaryCondition {
    BoundaryCondition::AllPlus
}

fn default_cap() -> usize {
    DEFAULT_ENUMERATION_CAP
}

impl BadnessParams {
    pub fn options(&self) -> BadnessOptions {
        let mut o = BadnessOptions { margin: self.margin, bc: self.bc.clone(), cap: self.cap, ..Default::default() };
        if let Some(c) = &self.candidates {
            o.candidates = c.clone();
        }
        o.mc_fallback = self.mc_fallback.clone().map(|protocol| McFallback { protocol });
        o
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuenchedParams {
    pub disorder: DisorderKind,
    pub beta: f64,
    /// The window is the centered box of this radius in 2D.
    pub radius: usize,
    pub seeds: Vec<u64>,
    #[serde(default = "one")]
    pub coupling: f64,
    #[serde(default)]
    pub probe_radii: Vec<usize>,
    #[serde(default = "all_plus")]
    pub bc: BoundaryCondition,
}

impl QuenchedParams {
    pub fn joint_model(&self) -> Result<JointModel, String> {
        let lattice = Lattice::centered(2, self.radius).map_err(|e| e.to_string())?;
        JointModel::new(self.disorder, self.coupling, self.beta, lattice).map_err(|e| e.to_string())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Grid {
    pub fn points(&self) -> Vec<f64> {
        let n = ((self.stop - self.start) / self.step + 1e-9).floor() as usize;
        (0..=n).map(|k| self.start + self.step * k as f64).collect()
    }

    fn check(&self, field: &str) -> Result<(), String> {
        let ok = [self.start, self.stop, self.step].iter().all(|x| x.is_finite());
        if !ok || self.step <= 0.0 || self.stop < self.start {
            return Err(format!("{field}: need finite start ≤ stop and step > 0"));
        }
        if (self.stop - self.start) / self.step > 1e6 {
            return Err(format!("{field}: more than 10^6 grid points"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CwScanParams {
    pub p: f64,
    pub beta: Grid,
    #[serde(default)]
    pub h: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LpParams {
    pub gammas: Vec<f64>,
    pub betas: Vec<f64>,
    #[serde(default = "top_hat")]
    pub shape: KacShape,
    #[serde(default = "zero_list")]
    pub h: Vec<f64>,
}

fn top_hat() -> KacShape {
    KacShape::TopHat
}

fn zero_list() -> Vec<f64> {
    vec![0.0]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BetacParams {
    pub gamma: f64,
    pub sizes: Vec<usize>,
    pub betas: Vec<f64>,
    pub seeds: Vec<u64>,
    pub sweeps: usize,
    #[serde(default = "top_hat")]
    pub shape: KacShape,
    #[serde(default = "checkerboard")]
    pub omega: ConfigGenerator,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub burn_in: Option<usize>,
    #[serde(default = "heat_bath")]
    pub update: UpdateKind,
    #[serde(default = "default_bootstrap")]
    pub bootstrap_samples: usize,
    #[serde(default)]
    pub bootstrap_seed: u64,
}

fn checkerboard() -> ConfigGenerator {
    ConfigGenerator::Checkerboard
}

fn heat_bath() -> UpdateKind {
    UpdateKind::HeatBath
}

fn default_bootstrap() -> usize {
    200
}

impl BetacParams {
    pub fn config(&self) -> Result<BetacConfig, String> {
        let profile = KacProfile::new(self.shape, self.gamma, 2).map_err(|e| e.to_string())?;
        let mut protocol = ChainProtocol::new(self.sweeps, 0).with_kind(self.update);
        protocol.burn_in = self.burn_in;
        Ok(BetacConfig {
            profile,
            omega: self.omega.clone(),
            sizes: self.sizes.clone(),
            betas: self.betas.clone(),
            seeds: self.seeds.clone(),
            protocol,
            bootstrap_samples: self.bootstrap_samples,
            bootstrap_seed: self.bootstrap_seed,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DegeneracyParams {
    pub length: usize,
    #[serde(default = "cold")]
    pub beta: f64,
    #[serde(default = "one")]
    pub coupling: f64,
}

fn cold() -> f64 {
    20.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meanfield: Option<MeanFieldCheck>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub mc: Vec<McCheck>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeanFieldCheck {
    pub p: f64,
    /// Smaller oracle size; the extrapolation also uses `2n`.
    pub n: usize,
    pub betas: Vec<f64>,
    pub alphas: Vec<f64>,
    #[serde(default)]
    pub h: f64,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
}

fn default_tolerance() -> f64 {
    5e-3
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McCheck {
    pub model: ModelSpec,
    /// Side of the cubic window `[0, size)^dim`.
    pub size: usize,
    pub sweeps: usize,
    pub seed: u64,
    #[serde(default = "free")]
    pub bc: BoundaryCondition,
    #[serde(default = "heat_bath")]
    pub update: UpdateKind,
}

fn free() -> BoundaryCondition {
    BoundaryCondition::Free
}

impl McCheck {
    pub fn model(&self) -> Result<SpinModel, String> {
        let lattice = Lattice::cube(self.model.dim, self.size).map_err(|e| e.to_string())?;
        self.model.build(lattice)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Params {
    Badness(BadnessParams),
    Quenched(QuenchedParams),
    CwScan(CwScanParams),
    Lp(LpParams),
    Betac(BetacParams),
    Degeneracy(DegeneracyParams),
    Oracle(OracleParams),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    schema: u32,
    name: String,
    kind: Kind,
    params: toml::Table,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(dead_code)]
struct Typed<P> {
    schema: u32,
    name: String,
    kind: Kind,
    params: P,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Scenario {
    pub schema: u32,
    pub name: String,
    pub kind: Kind,
    pub params: Params,
}

fn typed<P: DeserializeOwned>(text: &str) -> Result<P, String> {
    toml::from_str::<Typed<P>>(text).map(|t| t.params).map_err(|e| e.to_string())
}

impl Scenario {
    /// Parses and validates. Errors carry line and field information from
    /// the parser, or the offending key for range checks.
    pub fn parse(text: &str) -> Result<Scenario, Vec<String>> {
        let header: Header = toml::from_str(text).map_err(|e| vec![e.to_string()])?;
        if header.schema != SCHEMA_VERSION {
            return Err(vec![format!("schema = {} is not supported (expected {SCHEMA_VERSION})", header.schema)]);
        }
        if header.name.is_empty() || !header.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
            return Err(vec![format!("name = {:?}: use ASCII letters, digits, '_' or '-'", header.name)]);
        }
        let params = match header.kind {
            Kind::BadnessProfile => typed(text).map(Params::Badness),
            Kind::QuenchedProbe => typed(text).map(Params::Quenched),
            Kind::CwScan => typed(text).map(Params::CwScan),
            Kind::LpCheck => typed(text).map(Params::Lp),
            Kind::BetacPipeline => typed(text).map(Params::Betac),
            Kind::Degeneracy => typed(text).map(Params::Degeneracy),
            Kind::OracleCrosscheck => typed(text).map(Params::Oracle),
        }
        .map_err(|e| vec![e])?;
        let scenario = Scenario { schema: header.schema, name: header.name, kind: header.kind, params };
        let errors = scenario.check();
        if errors.is_empty() {
            Ok(scenario)
        } else {
            Err(errors)
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    /// Every precondition the run will rely on; no computation.
    fn check(&self) -> Vec<String> {
        let mut errs = Vec::new();
        match &self.params {
            Params::Badness(b) => check_badness(b, &mut errs),
            Params::Quenched(q) => check_quenched(q, &mut errs),
            Params::CwScan(c) => {
                if !(c.p > 0.0 && c.p < 1.0) {
                    errs.push(format!("params.p = {} is out of range (0, 1)", c.p));
                }
                if !c.h.is_finite() {
                    errs.push("params.h must be finite".into());
                }
                if let Err(e) = c.beta.check("params.beta") {
                    errs.push(e);
                } else if c.beta.start < 0.0 {
                    errs.push("params.beta.start must be ≥ 0".into());
                }
            }
            Params::Lp(l) => check_lp(l, &mut errs),
            Params::Betac(b) => match b.config() {
                Ok(cfg) => {
                    if let Err(e) = cfg.validate() {
                        errs.push(format!("params: {e}"));
                    }
                }
                Err(e) => errs.push(format!("params.gamma: {e}")),
            },
            Params::Degeneracy(d) => {
                if d.length < 2 {
                    errs.push(format!("params.length = {} must be ≥ 2", d.length));
                }
                if !(d.beta > 0.0 && d.beta.is_finite()) {
                    errs.push(format!("params.beta = {} must be finite and > 0", d.beta));
                }
                if d.length >= 2 {
                    // ground states are counted over every occupied site plus the bridge
                    let need = two_chain_geometry(d.length, true)
                        .map(|g| g.occupation.iter().filter(|(_, v)| *v == 1).count() + 1)
                        .unwrap_or(0);
                    if need > DEFAULT_ENUMERATION_CAP {
                        errs.push(format!(
                            "params.length = {}: needs {need} enumerated sites, above the cap of {DEFAULT_ENUMERATION_CAP}",
                            d.length
                        ));
                    }
                }
            }
            Params::Oracle(o) => check_oracle(o, &mut errs),
        }
        errs
    }

    /// Seeds the run depends on, for the manifest.
    pub fn seeds(&self) -> Vec<u64> {
        match &self.params {
            Params::Quenched(q) => q.seeds.clone(),
            Params::Betac(b) => {
                let mut s = b.seeds.clone();
                s.push(b.bootstrap_seed);
                s
            }
            Params::Oracle(o) => o.mc.iter().map(|m| m.seed).collect(),
            Params::Badness(b) => {
                let mut s: Vec<u64> = b.mc_fallback.iter().map(|p| p.seed).collect();
                for g in b.generators.iter().chain(b.candidates.iter().flatten()) {
                    collect_generator_seeds(g, &mut s);
                }
                s
            }
            _ => Vec::new(),
        }
    }
}

fn collect_generator_seeds(g: &ConfigGenerator, out: &mut Vec<u64>) {
    match g {
        ConfigGenerator::Bernoulli { seed, .. } => out.push(*seed),
        ConfigGenerator::Perturbation { base, .. } | ConfigGenerator::Flipped { base } => {
            collect_generator_seeds(base, out)
        }
        _ => {}
    }
}

fn check_badness(b: &BadnessParams, errs: &mut Vec<String>) {
    let model = match b.model.check("params.model") {
        Ok(m) => m,
        Err(e) => {
            errs.push(e);
            return;
        }
    };
    if let Err(e) = b.transform.validate() {
        errs.push(format!("params.transform: {e}"));
    }
    if b.radii.is_empty() {
        errs.push("params.radii must not be empty".into());
    }
    if b.radii.windows(2).any(|w| w[1] <= w[0]) {
        errs.push("params.radii must be strictly increasing".into());
    }
    if b.generators.is_empty() {
        errs.push("params.generators must not be empty".into());
    }
    for (k, g) in b.generators.iter().chain(b.candidates.iter().flatten()).enumerate() {
        if let Err(e) = g.validate() {
            errs.push(format!("params.generators/candidates[{k}]: {e}"));
        }
    }
    if let Some(c) = &b.candidates {
        if c.is_empty() {
            errs.push("params.candidates must not be empty when given".into());
        }
    }
    if let Some(p) = &b.mc_fallback {
        if let Err(e) = p.validate() {
            errs.push(format!("params.mc_fallback: {e}"));
        }
    }
    if !errs.is_empty() {
        return;
    }
    if b.mc_fallback.is_none() {
        if let Some(&r) = b.radii.last() {
            match badness_required(&model, &b.transform, r, &b.options()) {
                Ok(need) if need > b.cap => errs.push(format!(
                    "params.radii: radius {r} needs {need} enumerated sites but params.cap = {}; \
                     lower the radius or margin, raise the cap, or add mc_fallback",
                    b.cap
                )),
                Ok(_) => {}
                Err(e) => errs.push(format!("params: {e}")),
            }
        }
    }
}

fn check_quenched(q: &QuenchedParams, errs: &mut Vec<String>) {
    if q.seeds.is_empty() {
        errs.push("params.seeds must not be empty".into());
    }
    let jm = match q.joint_model() {
        Ok(jm) => jm,
        Err(e) => {
            errs.push(format!("params: {e}"));
            return;
        }
    };
    if !q.probe_radii.is_empty() && !matches!(q.disorder, DisorderKind::RandomField { .. }) {
        errs.push("params.probe_radii: the boundary probe needs a random_field disorder".into());
    }
    if let Some(&r) = q.probe_radii.iter().find(|&&r| r >= q.radius) {
        errs.push(format!("params.probe_radii: {r} must be smaller than params.radius = {}", q.radius));
    }
    for bc in [q.bc.clone(), BoundaryCondition::Free] {
        match quenched_required(&jm, &bc) {
            Ok(need) if need > DEFAULT_ENUMERATION_CAP => {
                errs.push(format!(
                    "params.radius = {}: window needs {need} enumerated sites, above the cap of {DEFAULT_ENUMERATION_CAP}",
                    q.radius
                ));
                break;
            }
            Ok(_) => {}
            Err(e) => {
                errs.push(format!("params: {e}"));
                break;
            }
        }
    }
}

fn check_lp(l: &LpParams, errs: &mut Vec<String>) {
    if l.gammas.is_empty() || l.betas.is_empty() || l.h.is_empty() {
        errs.push("params.gammas, params.betas and params.h must not be empty".into());
    }
    for &g in &l.gammas {
        match KacProfile::new(l.shape, g, 1) {
            Ok(p) if p.range() > nongibbs::exact::MAX_TRANSFER_RANGE => errs.push(format!(
                "params.gammas: γ = {g} has range {}, above the transfer-matrix limit of {}",
                p.range(),
                nongibbs::exact::MAX_TRANSFER_RANGE
            )),
            Ok(_) => {}
            Err(e) => errs.push(format!("params.gammas: {e}")),
        }
    }
    if let Some(b) = l.betas.iter().find(|b| !(b.is_finite() && **b > 0.0)) {
        errs.push(format!("params.betas: {b} must be finite and > 0"));
    }
    if l.h.iter().any(|h| !h.is_finite()) {
        errs.push("params.h must be finite".into());
    }
}

fn check_oracle(o: &OracleParams, errs: &mut Vec<String>) {
    if o.meanfield.is_none() && o.mc.is_empty() {
        errs.push("params: give a meanfield table, mc entries, or both".into());
    }
    if let Some(m) = &o.meanfield {
        if m.betas.is_empty() || m.alphas.is_empty() {
            errs.push("params.meanfield: betas and alphas must not be empty".into());
        }
        if !(m.tolerance > 0.0) {
            errs.push("params.meanfield.tolerance must be > 0".into());
        }
        'outer: for &beta in &m.betas {
            for &alpha in &m.alphas {
                let checked = CwParams::new(beta, m.h, m.p, alpha)
                    .and_then(|c| validate_extrapolated_oracle(m.n, &c));
                if let Err(e) = checked {
                    errs.push(format!("params.meanfield (beta = {beta}, alpha = {alpha}): {e}"));
                    break 'outer;
                }
            }
        }
    }
    for (k, c) in o.mc.iter().enumerate() {
        let model = match c.model.check(&format!("params.mc[{k}].model")).and_then(|_| c.model()) {
            Ok(m) => m,
            Err(e) => {
                errs.push(e);
                continue;
            }
        };
        if let Err(e) = ChainProtocol::new(c.sweeps, c.seed).validate() {
            errs.push(format!("params.mc[{k}]: {e}"));
        }
        match model.hamiltonian(&c.bc) {
            Ok(h) => {
                let need = enumerated_sites(&h);
                if need > DEFAULT_ENUMERATION_CAP {
                    errs.push(format!(
                        "params.mc[{k}].size = {}: exact reference needs {need} enumerated sites, above the cap of {DEFAULT_ENUMERATION_CAP}",
                        c.size
                    ));
                }
            }
            Err(e) => errs.push(format!("params.mc[{k}]: {e}")),
        }
    }
}
