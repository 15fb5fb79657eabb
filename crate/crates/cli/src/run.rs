//! Scenario execution: independent cells on a rayon pool, optional on-disk
//! cell cache, result files written in cell order, manifest written last.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nongibbs::badness::badness_profile;
use nongibbs::exact::{ExactDistribution, DEFAULT_ENUMERATION_CAP};
use nongibbs::kac::{betac_pipeline, lp_free_energy_gap, BetacReport, KacProfile, LpGap};
use nongibbs::mc::{run_chain, ChainProtocol};
use nongibbs::meanfield::{cw_decimated_conditional, cw_finite_n_oracle, cw_jump_scan, Branch, CwParams, JumpScan};
use nongibbs::output::{Cell, Csv};
use nongibbs::quenched::{
    bad_disorder_probe, free_energy_increment, occupied_ground_state_degeneracy, quenched_magnetization,
    two_chain_geometry, DisorderKind, JointModel,
};
use nongibbs::Lattice;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::scenario::{Params, Scenario};

pub const CACHE_ENV: &str = "NONGIBBS_CACHE_DIR";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub out: PathBuf,
    /// Worker threads; `None` uses every available core.
    pub jobs: Option<usize>,
    pub cache: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CellRecord {
    pub id: String,
    pub status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Manifest {
    pub name: String,
    pub kind: String,
    pub schema: u32,
    pub tool_version: &'static str,
    pub config_sha256: String,
    pub seeds: Vec<u64>,
    pub jobs: usize,
    pub wall_time_seconds: f64,
    pub cells: Vec<CellRecord>,
    pub failed_cells: usize,
    pub outputs: Vec<String>,
}

impl Manifest {
    pub fn failed(&self) -> bool {
        self.failed_cells > 0
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Runs `scenario`, writing payload files and `manifest.json` into
/// `options.out`. `Err` is an I/O or pool failure; cell failures are in the
/// returned manifest.
pub fn run(scenario: &Scenario, config_text: &str, options: &RunOptions) -> Result<Manifest, String> {
    let start = Instant::now();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = options.jobs {
        if n == 0 {
            return Err("--jobs must be at least 1".into());
        }
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| e.to_string())?;
    let cells = cells(scenario);
    let params_json = serde_json::to_string(&scenario.params).map_err(|e| e.to_string())?;
    let results: Vec<(Result<Value, String>, bool)> = pool.install(|| {
        cells
            .par_iter()
            .map(|cell| cached_cell(scenario, &params_json, cell, options.cache.as_deref()))
            .collect()
    });

    let records: Vec<CellRecord> = cells
        .iter()
        .zip(&results)
        .map(|(cell, (r, hit))| CellRecord {
            id: cell_id(cell),
            status: match (r, hit) {
                (Err(_), _) => "failed",
                (Ok(_), true) => "cached",
                (Ok(_), false) => "ok",
            },
            error: r.as_ref().err().cloned(),
        })
        .collect();
    let outcomes: Vec<(&Value, Option<&Value>)> = cells.iter().zip(&results).map(|(c, (r, _))| (c, r.as_ref().ok())).collect();
    let files = assemble(scenario, &outcomes);

    fs::create_dir_all(&options.out).map_err(|e| format!("{}: {e}", options.out.display()))?;
    for (name, body) in &files {
        let path = options.out.join(name);
        fs::write(&path, body).map_err(|e| format!("{}: {e}", path.display()))?;
    }
    let failed_cells = records.iter().filter(|r| r.status == "failed").count();
    let manifest = Manifest {
        name: scenario.name.clone(),
        kind: scenario.kind.to_string(),
        schema: scenario.schema,
        tool_version: TOOL_VERSION,
        config_sha256: sha256_hex(config_text.as_bytes()),
        seeds: scenario.seeds(),
        jobs: pool.current_num_threads(),
        wall_time_seconds: start.elapsed().as_secs_f64(),
        cells: records,
        failed_cells,
        outputs: files.keys().cloned().collect(),
    };
    let path = options.out.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| e.to_string())? + "\n";
    fs::write(&path, text).map_err(|e| format!("{}: {e}", path.display()))?;
    Ok(manifest)
}

fn cell_id(cell: &Value) -> String {
    let Value::Object(map) = cell else { return cell.to_string() };
    map.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(",")
}

fn cached_cell(scenario: &Scenario, params_json: &str, cell: &Value, cache: Option<&Path>) -> (Result<Value, String>, bool) {
    let Some(dir) = cache else { return (run_cell(scenario, cell), false) };
    let key = sha256_hex(format!("{TOOL_VERSION}\n{}\n{params_json}\n{cell}", scenario.kind).as_bytes());
    let path = dir.join(format!("{key}.json"));
    if let Ok(text) = fs::read_to_string(&path) {
        if let Ok(v) = serde_json::from_str(&text) {
            return (Ok(v), true);
        }
    }
    let result = run_cell(scenario, cell);
    if let Ok(v) = &result {
        // a failed cache write only costs a recomputation next time
        let tmp = dir.join(format!("{key}.tmp{}", std::process::id()));
        if fs::create_dir_all(dir).is_ok() && fs::write(&tmp, v.to_string()).is_ok() {
            let _ = fs::rename(&tmp, &path);
        }
    }
    (result, false)
}

fn cells(scenario: &Scenario) -> Vec<Value> {
    match &scenario.params {
        Params::Badness(b) => (0..b.generators.len()).map(|k| json!({ "generator": k })).collect(),
        Params::Quenched(q) => q.seeds.iter().map(|s| json!({ "seed": s })).collect(),
        Params::CwScan(_) | Params::Betac(_) => vec![json!({ "all": true })],
        Params::Lp(l) => {
            let mut out = Vec::new();
            for &beta in &l.betas {
                for &h in &l.h {
                    for &gamma in &l.gammas {
                        out.push(json!({ "beta": beta, "h": h, "gamma": gamma }));
                    }
                }
            }
            out
        }
        Params::Degeneracy(_) => vec![json!({ "connected": false }), json!({ "connected": true })],
        Params::Oracle(o) => {
            let mut out = Vec::new();
            if let Some(m) = &o.meanfield {
                for &beta in &m.betas {
                    for &alpha in &m.alphas {
                        out.push(json!({ "beta": beta, "alpha": alpha }));
                    }
                }
            }
            out.extend((0..o.mc.len()).map(|k| json!({ "mc": k })));
            out
        }
    }
}

fn f(cell: &Value, key: &str) -> f64 {
    cell[key].as_f64().expect("cell key")
}

fn u(cell: &Value, key: &str) -> usize {
    cell[key].as_u64().expect("cell key") as usize
}

fn err<E: ToString>(e: E) -> String {
    e.to_string()
}

fn run_cell(scenario: &Scenario, cell: &Value) -> Result<Value, String> {
    match &scenario.params {
        Params::Badness(b) => {
            let gen = &b.generators[u(cell, "generator")];
            let model = b.model.build(Lattice::cube(b.model.dim, 1).map_err(err)?)?;
            let curve = badness_profile(&model, &b.transform, gen, &b.radii, &b.options()).map_err(err)?;
            serde_json::to_value(&curve).map_err(err)
        }
        Params::Quenched(q) => {
            let seed = cell["seed"].as_u64().expect("seed");
            let jm = q.joint_model()?;
            let n = jm.sample(seed).map_err(err)?.realization;
            let m = quenched_magnetization(&jm, &n, &q.bc).map_err(err)?;
            let probes: Vec<(usize, f64)> = q
                .probe_radii
                .iter()
                .map(|&r| bad_disorder_probe(&jm, &n, r).map(|v| (r, v)))
                .collect::<Result<_, _>>()
                .map_err(err)?;
            Ok(json!({ "seed": seed, "magnetization": m, "probes": probes }))
        }
        Params::CwScan(c) => serde_json::to_value(cw_jump_scan(&c.beta.points(), c.p, c.h).map_err(err)?).map_err(err),
        Params::Lp(l) => {
            let profile = KacProfile::new(l.shape, f(cell, "gamma"), 1).map_err(err)?;
            serde_json::to_value(lp_free_energy_gap(&profile, f(cell, "beta"), f(cell, "h")).map_err(err)?).map_err(err)
        }
        Params::Betac(b) => serde_json::to_value(betac_pipeline(&b.config()?).map_err(err)?).map_err(err),
        Params::Degeneracy(d) => {
            let connected = cell["connected"].as_bool().expect("connected");
            let g = two_chain_geometry(d.length, connected).map_err(err)?;
            let jm = JointModel::new(DisorderKind::Dilution { p: 0.5 }, d.coupling, d.beta, g.lattice.clone()).map_err(err)?;
            let bc = nongibbs::BoundaryCondition::Free;
            let degeneracy = occupied_ground_state_degeneracy(&jm, &g.occupation, &bc).map_err(err)?;
            let increment = free_energy_increment(&jm, &g.occupation, &g.bridge, &bc).map_err(err)?;
            Ok(json!({ "connected": connected, "degeneracy": degeneracy as u64, "increment": increment }))
        }
        Params::Oracle(o) => {
            if let Some(k) = cell.get("mc") {
                let c = &o.mc[k.as_u64().expect("mc") as usize];
                let model = c.model()?;
                let exact = ExactDistribution::new(&model, &c.bc, DEFAULT_ENUMERATION_CAP)
                    .and_then(|d| d.magnetization_moments())
                    .map_err(err)?;
                let s = run_chain(&model, &c.bc, &ChainProtocol::new(c.sweeps, c.seed).with_kind(c.update)).map_err(err)?;
                let rows: Vec<Value> = [(1, exact.mean), (2, exact.second), (4, exact.fourth)]
                    .iter()
                    .map(|&(power, want)| {
                        let est = s.moment(power);
                        json!({ "power": power, "exact": want, "estimate": est.value, "error": est.error })
                    })
                    .collect();
                Ok(Value::Array(rows))
            } else {
                let m = o.meanfield.as_ref().expect("meanfield cell");
                let params = CwParams::new(f(cell, "beta"), m.h, m.p, f(cell, "alpha")).map_err(err)?;
                let limit = cw_decimated_conditional(&params, Branch::Auto).map_err(err)?;
                let small = cw_finite_n_oracle(m.n, &params).map_err(err)?;
                let large = cw_finite_n_oracle(2 * m.n, &params).map_err(err)?;
                Ok(json!({ "limit": limit, "oracle_n": small, "oracle_2n": large, "extrapolated": 2.0 * large - small }))
            }
        }
    }
}

fn pretty(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("json") + "\n"
}

fn from<T: serde::de::DeserializeOwned>(v: &Value) -> T {
    serde_json::from_value(v.clone()).expect("cell payload round-trips")
}

/// Output files by name. Cells that failed are left out.
fn assemble(scenario: &Scenario, outcomes: &[(&Value, Option<&Value>)]) -> BTreeMap<String, String> {
    let mut files = BTreeMap::new();
    match &scenario.params {
        Params::Badness(b) => {
            let mut profiles = Vec::new();
            for (cell, r) in outcomes {
                let Some(r) = r else { continue };
                let k = u(cell, "generator");
                let curve: nongibbs::badness::VariationCurve = from(r);
                let file = format!("profile_{k}.csv");
                files.insert(file.clone(), curve.to_csv());
                profiles.push(json!({
                    "generator": b.generators[k].label(),
                    "file": file,
                    "radii": curve.radii(),
                    "variations": curve.variations(),
                    "trend": curve.summary,
                    "candidates": curve.candidates,
                    "margin": curve.margin,
                }));
            }
            files.insert("summary.json".into(), pretty(&json!({ "profiles": profiles })));
        }
        Params::Quenched(q) => {
            let mut mags = Csv::new(&["seed", "magnetization"]);
            let mut probes = Csv::new(&["seed", "radius", "probe"]);
            let mut max_probe: BTreeMap<usize, f64> = BTreeMap::new();
            let mut ms = Vec::new();
            for (_, r) in outcomes {
                let Some(r) = r else { continue };
                let seed = r["seed"].as_u64().expect("seed");
                let m = r["magnetization"].as_f64().expect("m");
                ms.push(m);
                mags.row(vec![Cell::from(seed), m.into()]);
                for p in r["probes"].as_array().expect("probes") {
                    let (radius, v) = (p[0].as_u64().expect("r") as usize, p[1].as_f64().expect("v"));
                    probes.row(vec![Cell::from(seed), radius.into(), v.into()]);
                    let e = max_probe.entry(radius).or_insert(0.0);
                    *e = e.max(v);
                }
            }
            files.insert("magnetization.csv".into(), mags.into_string());
            if !q.probe_radii.is_empty() {
                files.insert("probe.csv".into(), probes.into_string());
            }
            let mean = if ms.is_empty() { None } else { Some(ms.iter().sum::<f64>() / ms.len() as f64) };
            let max: Vec<Value> = max_probe.iter().map(|(r, v)| json!({ "radius": r, "max_probe": v })).collect();
            files.insert(
                "summary.json".into(),
                pretty(&json!({ "samples": ms.len(), "mean_magnetization": mean, "probe": max })),
            );
        }
        Params::CwScan(c) => {
            if let Some(r) = outcomes[0].1 {
                let scan: JumpScan = from(r);
                let mut csv = Csv::new(&["beta", "jump", "raw"]);
                for pt in &scan.points {
                    csv.row(vec![Cell::from(pt.beta), pt.jump.into(), pt.raw.into()]);
                }
                files.insert("scan.csv".into(), csv.into_string());
                let reference = 1.0 / c.p;
                files.insert(
                    "threshold.json".into(),
                    pretty(&json!({
                        "p": c.p,
                        "h": c.h,
                        "step": c.beta.step,
                        "threshold": scan.threshold,
                        "reference": reference,
                        "within_step": scan.threshold.map(|t| (t - reference).abs() <= c.beta.step + 1e-12),
                        "detection": scan.detection,
                        "offset": scan.offset,
                    })),
                );
            }
        }
        Params::Lp(l) => {
            let mut csv = Csv::new(&["gamma", "beta", "h", "f_gamma", "f_cw", "gap"]);
            let mut series: BTreeMap<(usize, usize), Vec<(f64, f64)>> = BTreeMap::new();
            for (cell, r) in outcomes {
                let Some(r) = r else { continue };
                let g: LpGap = from(r);
                let (beta, h) = (f(cell, "beta"), f(cell, "h"));
                csv.row(vec![Cell::from(g.gamma), beta.into(), h.into(), g.f_gamma.into(), g.f_cw.into(), g.gap.into()]);
                let bi = l.betas.iter().position(|x| *x == beta).expect("beta");
                let hi = l.h.iter().position(|x| *x == h).expect("h");
                series.entry((bi, hi)).or_default().push((g.gamma, g.gap));
            }
            let summary: Vec<Value> = series
                .into_iter()
                .map(|((bi, hi), mut pts)| {
                    pts.sort_by(|a, b| b.0.total_cmp(&a.0));
                    let gaps: Vec<f64> = pts.iter().map(|p| p.1).collect();
                    json!({
                        "beta": l.betas[bi],
                        "h": l.h[hi],
                        "gammas": pts.iter().map(|p| p.0).collect::<Vec<_>>(),
                        "gaps": gaps,
                        "strictly_decreasing": gaps.windows(2).all(|w| w[1] < w[0]),
                    })
                })
                .collect();
            files.insert("gaps.csv".into(), csv.into_string());
            files.insert("summary.json".into(), pretty(&json!({ "series": summary })));
        }
        Params::Betac(_) => {
            if let Some(r) = outcomes[0].1 {
                let report: BetacReport = from(r);
                files.insert("binder.csv".into(), report.table_csv());
                let summary: Value = serde_json::from_str(&report.summary_json()).expect("json");
                files.insert("crossing.json".into(), pretty(&summary));
            }
        }
        Params::Degeneracy(_) => {
            let mut csv = Csv::new(&["geometry", "degeneracy", "increment"]);
            let mut by = BTreeMap::new();
            for (_, r) in outcomes {
                let Some(r) = r else { continue };
                let name = if r["connected"].as_bool().expect("connected") { "connected" } else { "disconnected" };
                csv.row(vec![
                    Cell::from(name),
                    (r["degeneracy"].as_u64().expect("deg") as usize).into(),
                    r["increment"].as_f64().expect("inc").into(),
                ]);
                by.insert(name, (*r).clone());
            }
            let diff = match (by.get("connected"), by.get("disconnected")) {
                (Some(c), Some(d)) => Some(c["increment"].as_f64().unwrap() - d["increment"].as_f64().unwrap()),
                _ => None,
            };
            files.insert("degeneracy.csv".into(), csv.into_string());
            files.insert(
                "degeneracy.json".into(),
                pretty(&json!({
                    "disconnected": by.get("disconnected"),
                    "connected": by.get("connected"),
                    "increment_difference": diff,
                    "ln2": std::f64::consts::LN_2,
                })),
            );
        }
        Params::Oracle(o) => {
            let mut mf = Csv::new(&["beta", "alpha", "limit", "oracle_n", "oracle_2n", "extrapolated", "difference"]);
            let mut mc = Csv::new(&["entry", "power", "exact", "estimate", "error", "z"]);
            let (mut worst_mf, mut worst_z) = (0.0f64, 0.0f64);
            let mut mc_ok = true;
            for (cell, r) in outcomes {
                let Some(r) = r else { continue };
                if let Some(k) = cell.get("mc") {
                    for row in r.as_array().expect("rows") {
                        let (want, est, e) = (row["exact"].as_f64().unwrap(), row["estimate"].as_f64().unwrap(), row["error"].as_f64().unwrap());
                        let z = if e > 0.0 { (est - want) / e } else { 0.0 };
                        worst_z = worst_z.max(z.abs());
                        mc_ok &= (est - want).abs() <= 3.0 * e + 1e-3;
                        mc.row(vec![
                            Cell::from(k.as_u64().unwrap()),
                            (row["power"].as_u64().unwrap() as usize).into(),
                            want.into(),
                            est.into(),
                            e.into(),
                            z.into(),
                        ]);
                    }
                } else {
                    let diff = (r["limit"].as_f64().unwrap() - r["extrapolated"].as_f64().unwrap()).abs();
                    worst_mf = worst_mf.max(diff);
                    mf.row(vec![
                        Cell::from(f(cell, "beta")),
                        f(cell, "alpha").into(),
                        r["limit"].as_f64().unwrap().into(),
                        r["oracle_n"].as_f64().unwrap().into(),
                        r["oracle_2n"].as_f64().unwrap().into(),
                        r["extrapolated"].as_f64().unwrap().into(),
                        diff.into(),
                    ]);
                }
            }
            let mut summary = serde_json::Map::new();
            if let Some(m) = &o.meanfield {
                files.insert("meanfield.csv".into(), mf.into_string());
                summary.insert(
                    "meanfield".into(),
                    json!({ "max_difference": worst_mf, "tolerance": m.tolerance, "within_tolerance": worst_mf <= m.tolerance }),
                );
            }
            if !o.mc.is_empty() {
                files.insert("mc.csv".into(), mc.into_string());
                summary.insert("mc".into(), json!({ "max_abs_z": worst_z, "within_three_sigma": mc_ok }));
            }
            files.insert("summary.json".into(), pretty(&Value::Object(summary)));
        }
    }
    files
}
