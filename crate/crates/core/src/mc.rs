//! Markov-chain Monte Carlo for models too large to enumerate.
//!
//! Random numbers come from ChaCha8 seeded with the 64-bit master seed and
//! positioned on a 64-bit stream id, so each chain owns an independent,
//! reproducible stream. Sweeps visit sites in the Hamiltonian's
//! (lexicographic) order and draw exactly one uniform per site.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::BoundaryCondition;
use crate::error::{invalid, Error, Result};
use crate::exact::logistic;
use crate::hamiltonian::Hamiltonian;
use crate::model::SpinModel;
use crate::output::{Cell, Csv};
use crate::stats::{block_jackknife, default_block, mean_estimate, Estimate};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateKind {
    Metropolis,
    HeatBath,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialState {
    #[default]
    Random,
    AllPlus,
    AllMinus,
}

/// Everything that determines a chain besides the model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainProtocol {
    pub sweeps: usize,
    /// Defaults to 20% of `sweeps`.
    #[serde(default)]
    pub burn_in: Option<usize>,
    #[serde(default = "one")]
    pub measure_every: usize,
    pub kind: UpdateKind,
    pub seed: u64,
    #[serde(default)]
    pub stream: u64,
    #[serde(default)]
    pub initial: InitialState,
}

fn one() -> usize {
    1
}

impl ChainProtocol {
    pub fn new(sweeps: usize, seed: u64) -> Self {
        ChainProtocol {
            sweeps,
            burn_in: None,
            measure_every: 1,
            kind: UpdateKind::HeatBath,
            seed,
            stream: 0,
            initial: InitialState::Random,
        }
    }

    pub fn with_kind(mut self, kind: UpdateKind) -> Self {
        self.kind = kind;
        self
    }

    pub fn with_burn_in(mut self, burn_in: usize) -> Self {
        self.burn_in = Some(burn_in);
        self
    }

    pub fn with_stream(mut self, stream: u64) -> Self {
        self.stream = stream;
        self
    }

    pub fn with_initial(mut self, initial: InitialState) -> Self {
        self.initial = initial;
        self
    }

    pub fn burn_in(&self) -> usize {
        self.burn_in.unwrap_or(self.sweeps / 5)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sweeps <= self.burn_in() {
            return Err(invalid("sweeps", format!("must exceed burn-in ({} ≤ {})", self.sweeps, self.burn_in())));
        }
        if self.measure_every == 0 {
            return Err(invalid("measure_every", "must be positive"));
        }
        Ok(())
    }

    pub fn measurements(&self) -> usize {
        (self.sweeps - self.burn_in()) / self.measure_every
    }
}

pub fn chain_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// A running chain: configuration, random stream and sweep counter.
#[derive(Clone, Debug)]
pub struct ChainState {
    hamiltonian: Arc<Hamiltonian>,
    beta: f64,
    spins: Vec<i8>,
    rng: ChaCha8Rng,
    stream: u64,
    sweeps: u64,
}

impl ChainState {
    pub fn new(hamiltonian: Arc<Hamiltonian>, beta: f64, seed: u64, stream: u64, initial: InitialState) -> Self {
        let mut rng = chain_rng(seed, stream);
        let spins = (0..hamiltonian.len())
            .map(|_| match initial {
                InitialState::Random => {
                    if rng.random::<bool>() {
                        1
                    } else {
                        -1
                    }
                }
                InitialState::AllPlus => 1,
                InitialState::AllMinus => -1,
            })
            .collect();
        ChainState {
            hamiltonian,
            beta,
            spins,
            rng,
            stream,
            sweeps: 0,
        }
    }

    pub fn spins(&self) -> &[i8] {
        &self.spins
    }

    pub fn sweeps_done(&self) -> u64 {
        self.sweeps
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Words consumed from the random stream so far.
    pub fn rng_position(&self) -> u128 {
        self.rng.get_word_pos()
    }

    pub fn hamiltonian(&self) -> &Hamiltonian {
        &self.hamiltonian
    }

    /// One pass over every site in order.
    pub fn sweep(&mut self, kind: UpdateKind) {
        let h = &*self.hamiltonian;
        for k in 0..self.spins.len() {
            let local = h.local_field(k, &self.spins);
            let u: f64 = self.rng.random();
            match kind {
                UpdateKind::Metropolis => {
                    let cost = 2.0 * f64::from(self.spins[k]) * local;
                    if cost <= 0.0 || u < (-self.beta * cost).exp() {
                        self.spins[k] = -self.spins[k];
                    }
                }
                UpdateKind::HeatBath => {
                    self.spins[k] = if u < logistic(2.0 * self.beta * local) { 1 } else { -1 };
                }
            }
        }
        self.sweeps += 1;
    }

    pub fn magnetization(&self) -> f64 {
        self.spins.iter().map(|&s| f64::from(s)).sum::<f64>() / self.spins.len() as f64
    }

    pub fn energy_per_site(&self) -> f64 {
        self.hamiltonian.energy(&self.spins) / self.spins.len() as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesMetadata {
    pub seed: u64,
    pub stream: u64,
    pub model_hash: String,
    pub kind: UpdateKind,
    pub sweeps: usize,
    pub burn_in: usize,
    pub measure_every: usize,
}

/// Post-burn-in measurements of one chain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservableSeries {
    pub sweep: Vec<u64>,
    /// Magnetization per site.
    pub m: Vec<f64>,
    /// Energy per site.
    pub e: Vec<f64>,
    pub metadata: SeriesMetadata,
}

impl ObservableSeries {
    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }

    /// `sweep,m,e` with 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut csv = Csv::new(&["sweep", "m", "e"]);
        for i in 0..self.len() {
            csv.row(vec![Cell::from(self.sweep[i]), self.m[i].into(), self.e[i].into()]);
        }
        csv.into_string()
    }

    pub fn mean_m(&self) -> Estimate {
        mean_estimate(&self.m)
    }

    pub fn mean_abs_m(&self) -> Estimate {
        mean_estimate(&self.m.iter().map(|m| m.abs()).collect::<Vec<_>>())
    }

    pub fn moment(&self, power: i32) -> Estimate {
        mean_estimate(&self.m.iter().map(|m| m.powi(power)).collect::<Vec<_>>())
    }
}

/// Run a chain on `model` with boundary condition `bc`.
pub fn run_chain(model: &SpinModel, bc: &BoundaryCondition, protocol: &ChainProtocol) -> Result<ObservableSeries> {
    let h = Arc::new(model.hamiltonian(bc)?);
    run_chain_on(h, model.beta(), model.content_hash(), protocol)
}

pub fn run_chain_on(
    hamiltonian: Arc<Hamiltonian>,
    beta: f64,
    model_hash: String,
    protocol: &ChainProtocol,
) -> Result<ObservableSeries> {
    protocol.validate()?;
    if hamiltonian.is_empty() {
        return Err(invalid("model", "no active sites"));
    }
    let mut state = ChainState::new(hamiltonian, beta, protocol.seed, protocol.stream, protocol.initial);
    let burn_in = protocol.burn_in();
    let capacity = protocol.measurements();
    let mut series = ObservableSeries {
        sweep: Vec::with_capacity(capacity),
        m: Vec::with_capacity(capacity),
        e: Vec::with_capacity(capacity),
        metadata: SeriesMetadata {
            seed: protocol.seed,
            stream: protocol.stream,
            model_hash,
            kind: protocol.kind,
            sweeps: protocol.sweeps,
            burn_in,
            measure_every: protocol.measure_every,
        },
    };
    for s in 1..=protocol.sweeps {
        state.sweep(protocol.kind);
        if s > burn_in && (s - burn_in) % protocol.measure_every == 0 {
            series.sweep.push(s as u64);
            series.m.push(state.magnetization());
            series.e.push(state.energy_per_site());
        }
    }
    Ok(series)
}

/// Independent chains in parallel; results keep the order of `protocols`.
pub fn run_chains(
    model: &SpinModel,
    bc: &BoundaryCondition,
    protocols: &[ChainProtocol],
) -> Result<Vec<ObservableSeries>> {
    let h = Arc::new(model.hamiltonian(bc)?);
    let hash = model.content_hash();
    protocols
        .par_iter()
        .map(|p| run_chain_on(h.clone(), model.beta(), hash.clone(), p))
        .collect()
}

/// Post-burn-in average of `observable(spins)` with a block-jackknife error.
pub fn observable_average(
    hamiltonian: Arc<Hamiltonian>,
    beta: f64,
    protocol: &ChainProtocol,
    observable: impl Fn(&[i8]) -> f64,
) -> Result<Estimate> {
    protocol.validate()?;
    if hamiltonian.is_empty() {
        return Err(invalid("model", "no active sites"));
    }
    let mut state = ChainState::new(hamiltonian, beta, protocol.seed, protocol.stream, protocol.initial);
    let burn_in = protocol.burn_in();
    let mut xs = Vec::with_capacity(protocol.measurements());
    for s in 1..=protocol.sweeps {
        state.sweep(protocol.kind);
        if s > burn_in && (s - burn_in) % protocol.measure_every == 0 {
            xs.push(observable(state.spins()));
        }
    }
    Ok(mean_estimate(&xs))
}

/// Binder cumulant `1 - ⟨m⁴⟩ / (3⟨m²⟩²)` with a block-jackknife error
/// (block length `√n`).
pub fn binder_cumulant(series: &ObservableSeries) -> Result<Estimate> {
    binder_from_magnetizations(&series.m)
}

pub fn binder_from_magnetizations(m: &[f64]) -> Result<Estimate> {
    if m.len() < 100 {
        return Err(invalid("series", format!("need at least 100 measurements, got {}", m.len())));
    }
    let samples: Vec<[f64; 2]> = m.iter().map(|&x| [x * x, x.powi(4)]).collect();
    let m2 = samples.iter().map(|s| s[0]).sum::<f64>();
    if m2 == 0.0 {
        return Err(Error::Degenerate("⟨m²⟩ = 0: Binder cumulant undefined".into()));
    }
    Ok(block_jackknife(&samples, default_block(m.len()), |a| {
        1.0 - a[1] / (3.0 * a[0] * a[0])
    }))
}

/// Outcome of paired plus/minus-boundary runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoexistenceRecord {
    pub plus: Estimate,
    pub minus: Estimate,
    /// `⟨m⟩₊ - ⟨m⟩₋`.
    pub gap: Estimate,
    /// Gap in units of its joint standard error.
    pub significance: f64,
    /// `gap > 5` joint standard errors.
    pub coexistence: bool,
    pub seeds: Vec<u64>,
}

pub const COEXISTENCE_SIGMAS: f64 = 5.0;

/// Runs one plus-boundary and one minus-boundary chain per seed (streams
/// `2k` and `2k+1`), each started aligned with its boundary.
pub fn coexistence_probe(model: &SpinModel, seeds: &[u64], protocol: &ChainProtocol) -> Result<CoexistenceRecord> {
    if seeds.is_empty() {
        return Err(invalid("seeds", "need at least one seed"));
    }
    let plus_h = Arc::new(model.hamiltonian(&BoundaryCondition::AllPlus)?);
    let minus_h = Arc::new(model.hamiltonian(&BoundaryCondition::AllMinus)?);
    let hash = model.content_hash();
    let jobs: Vec<(bool, ChainProtocol)> = seeds
        .iter()
        .enumerate()
        .flat_map(|(k, &seed)| {
            let base = ChainProtocol {
                seed,
                ..protocol.clone()
            };
            [
                (true, base.clone().with_stream(2 * k as u64).with_initial(InitialState::AllPlus)),
                (false, base.with_stream(2 * k as u64 + 1).with_initial(InitialState::AllMinus)),
            ]
        })
        .collect();
    let results: Vec<(bool, Estimate)> = jobs
        .par_iter()
        .map(|(plus, p)| {
            let h = if *plus { plus_h.clone() } else { minus_h.clone() };
            run_chain_on(h, model.beta(), hash.clone(), p).map(|s| (*plus, s.mean_m()))
        })
        .collect::<Result<_>>()?;
    let combine = |want: bool| {
        let picked: Vec<Estimate> = results.iter().filter(|(p, _)| *p == want).map(|(_, e)| *e).collect();
        let n = picked.len() as f64;
        Estimate {
            value: picked.iter().map(|e| e.value).sum::<f64>() / n,
            error: picked.iter().map(|e| e.error * e.error).sum::<f64>().sqrt() / n,
        }
    };
    let plus = combine(true);
    let minus = combine(false);
    let gap = Estimate {
        value: plus.value - minus.value,
        error: (plus.error.powi(2) + minus.error.powi(2)).sqrt(),
    };
    let significance = if gap.error > 0.0 {
        gap.value / gap.error
    } else if gap.value > 0.0 {
        f64::INFINITY
    } else {
        0.0
    };
    Ok(CoexistenceRecord {
        plus,
        minus,
        gap,
        significance,
        coexistence: significance > COEXISTENCE_SIGMAS,
        seeds: seeds.to_vec(),
    })
}
