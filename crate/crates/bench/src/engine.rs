//! Execution engine: every (dataset, method, run) cell gets a seed derived
//! purely from (master_seed, dataset name, method name, run index), so
//! scheduling and thread count can never change a reported number.

use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use cadclust::dataset::Dataset;
use cadclust::kbc::{self, ClusteringResult, MethodParams};
use cadclust::kmeans::kmeans_fit;
use cadclust::metrics;

use crate::config::{BenchConfig, DatasetEntry, MethodEntry, MethodSpec};
use crate::plot;

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error(transparent)]
    Config(#[from] crate::config::ConfigError),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("{failed} of {total} benchmark cells failed:\n{report}")]
    CellFailures { failed: usize, total: usize, report: String },
}

/// One executed run.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RunRecord {
    pub dataset: String,
    pub method: String,
    pub params: MethodParams,
    pub run: usize,
    pub seed: u64,
    /// Against ground truth; absent when the dataset has no labels.
    pub nmi: Option<f64>,
    pub ari: Option<f64>,
    pub objective: f64,
    pub wall_time_ms: f64,
}

/// The results.json document.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ResultsBundle {
    pub config_digest: String,
    pub records: Vec<RunRecord>,
}

/// Stable per-run seed: the first eight bytes (little-endian) of
/// `SHA-256(master_seed LE || 0x1f || dataset || 0x1f || method || 0x1f || run LE)`.
pub fn derive_seed(master_seed: u64, dataset: &str, method: &str, run: usize) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(master_seed.to_le_bytes());
    hasher.update([0x1f]);
    hasher.update(dataset.as_bytes());
    hasher.update([0x1f]);
    hasher.update(method.as_bytes());
    hasher.update([0x1f]);
    hasher.update((run as u64).to_le_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest >= 8 bytes"))
}

struct CellOutcome {
    records: Vec<RunRecord>,
    /// Labels and data of the run plotted for this cell.
    best_run: Option<(Dataset, ClusteringResult, usize)>,
    failure: Option<String>,
}

fn execute_method(data: &Dataset, spec: &MethodSpec, seed: u64) -> Result<ClusteringResult, cadclust::Error> {
    match spec {
        MethodSpec::Kbc { .. } => {
            let params = spec.kbc_params(data.n(), seed).expect("kbc spec");
            kbc::fit(data, &params)
        }
        MethodSpec::Kmeans { .. } => {
            let params = spec.kmeans_params(seed).expect("kmeans spec");
            kmeans_fit(data, &params)
        }
    }
}

/// Resolve tunable KBC parameters once per cell: tune on the run-0 dataset
/// with the run-0 seed, by objective only, then pin the winner for all runs.
fn resolve_spec(
    entry: &DatasetEntry,
    method: &MethodEntry,
    master_seed: u64,
) -> Result<MethodSpec, cadclust::Error> {
    match &method.spec {
        MethodSpec::Kbc { k, s, t, max_refine_iters, psi, tau, psi_grid, tau_grid } => {
            if psi.is_some() && tau.is_some() {
                return Ok(method.spec.clone());
            }
            let seed0 = derive_seed(master_seed, &entry.name(), &method.name(), 0);
            let data = entry.load(seed0)?;
            let base = method.spec.kbc_params(data.n(), seed0).expect("kbc spec");
            let psi_candidates: Vec<usize> = match psi {
                Some(p) => vec![*p],
                None => psi_grid.clone(),
            };
            let tau_candidates: Vec<f64> = match tau {
                Some(t) => vec![*t],
                None => tau_grid.clone(),
            };
            let (best, _) = kbc::tune(&data, &psi_candidates, &tau_candidates, &base)?;
            Ok(MethodSpec::Kbc {
                k: *k,
                s: *s,
                t: *t,
                max_refine_iters: *max_refine_iters,
                psi: Some(best.psi),
                tau: Some(best.tau),
                psi_grid: psi_grid.clone(),
                tau_grid: tau_grid.clone(),
            })
        }
        MethodSpec::Kmeans { .. } => Ok(method.spec.clone()),
    }
}

fn execute_cell(entry: &DatasetEntry, method: &MethodEntry, config: &BenchConfig) -> CellOutcome {
    let dataset_name = entry.name();
    let method_name = method.name();
    let resolved = match resolve_spec(entry, method, config.master_seed) {
        Ok(spec) => spec,
        Err(e) => {
            return CellOutcome {
                records: Vec::new(),
                best_run: None,
                failure: Some(format!("{dataset_name} / {method_name}: tuning failed: {e}")),
            }
        }
    };
    let mut records = Vec::new();
    let mut best: Option<(Dataset, ClusteringResult, usize, f64)> = None;
    for run in 0..config.runs {
        let seed = derive_seed(config.master_seed, &dataset_name, &method_name, run);
        let data = match entry.load(seed) {
            Ok(d) => d,
            Err(e) => {
                return CellOutcome {
                    records,
                    best_run: None,
                    failure: Some(format!("{dataset_name} / {method_name} run {run}: dataset: {e}")),
                }
            }
        };
        let start = Instant::now();
        let result = match execute_method(&data, &resolved, seed) {
            Ok(r) => r,
            Err(e) => {
                return CellOutcome {
                    records,
                    best_run: None,
                    failure: Some(format!("{dataset_name} / {method_name} run {run}: {e}")),
                }
            }
        };
        let wall_time_ms = start.elapsed().as_secs_f64() * 1e3;
        let (nmi, ari) = match &data.labels {
            Some(truth) => (
                Some(metrics::nmi(truth, &result.labels).expect("equal lengths")),
                Some(metrics::ari(truth, &result.labels).expect("equal lengths")),
            ),
            None => (None, None),
        };
        // Plot the best run: highest NMI (ties to the lowest run index);
        // without ground truth, highest objective.
        let score = nmi.unwrap_or(result.objective);
        if best.as_ref().is_none_or(|(_, _, _, s)| score > *s) {
            best = Some((data, result.clone(), run, score));
        }
        records.push(RunRecord {
            dataset: dataset_name.clone(),
            method: method_name.clone(),
            params: result.params.clone(),
            run,
            seed,
            nmi,
            ari,
            objective: result.objective,
            wall_time_ms,
        });
    }
    CellOutcome {
        records,
        best_run: best.map(|(d, r, run, _)| (d, r, run)),
        failure: None,
    }
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> BenchError + '_ {
    move |source| BenchError::Io { path: path.display().to_string(), source }
}

/// Execute the full benchmark and write `results.json`, `summary.csv`, and
/// per-cell SVG plots under `out_dir`. Cells run in a work pool of
/// `threads` workers (0 = all cores); every number is derived from seeds
/// alone, so the thread count never changes the output. Failures are
/// isolated per cell and reported together at the end.
pub fn run(config: &BenchConfig, out_dir: &Path, threads: usize) -> Result<ResultsBundle, BenchError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .expect("thread pool");
    pool.install(|| run_inner(config, out_dir))
}

fn run_inner(config: &BenchConfig, out_dir: &Path) -> Result<ResultsBundle, BenchError> {
    config.validate()?;
    std::fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let plots_dir = out_dir.join("plots");
    std::fs::create_dir_all(&plots_dir).map_err(io_err(&plots_dir))?;

    let cells: Vec<(usize, &DatasetEntry, usize, &MethodEntry)> = config
        .datasets
        .iter()
        .enumerate()
        .flat_map(|(di, d)| config.methods.iter().enumerate().map(move |(mi, m)| (di, d, mi, m)))
        .collect();

    let outcomes: Vec<CellOutcome> = cells
        .par_iter()
        .map(|(_, entry, _, method)| execute_cell(entry, method, config))
        .collect();

    let mut records = Vec::new();
    let mut failures = Vec::new();
    for ((_, entry, _, method), outcome) in cells.iter().zip(&outcomes) {
        records.extend(outcome.records.iter().cloned());
        if let Some(f) = &outcome.failure {
            failures.push(f.clone());
        }
        if let Some((data, result, _)) = &outcome.best_run {
            let file = plots_dir.join(format!("{}__{}.svg", sanitize(&entry.name()), sanitize(&method.name())));
            let part = result.partition().expect("valid result labels");
            if let Err(e) = plot::save_scatter(data, &part, &file) {
                failures.push(format!("{} / {} plot: {e}", entry.name(), method.name()));
            }
        }
    }
    records.sort_by(|a, b| {
        (&a.dataset, &a.method, a.run).cmp(&(&b.dataset, &b.method, b.run))
    });

    let bundle = ResultsBundle { config_digest: config.digest(), records };
    let results_path = out_dir.join("results.json");
    let json = serde_json::to_string_pretty(&bundle)?;
    std::fs::write(&results_path, json).map_err(io_err(&results_path))?;

    let summary_path = out_dir.join("summary.csv");
    std::fs::write(&summary_path, summary_csv(&bundle)).map_err(io_err(&summary_path))?;

    if failures.is_empty() {
        Ok(bundle)
    } else {
        Err(BenchError::CellFailures {
            failed: failures.len(),
            total: cells.len(),
            report: failures.join("\n"),
        })
    }
}

fn sanitize(name: &str) -> String {
    name.chars().map(|c| if c.is_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect()
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Aggregate per (dataset, method) cell: mean and sample std over runs.
pub fn summary_csv(bundle: &ResultsBundle) -> String {
    let mut out = String::from(
        "dataset,method,nmi_mean,nmi_std,ari_mean,ari_std,objective_mean,wall_ms_mean\n",
    );
    let mut seen: Vec<(String, String)> = Vec::new();
    for r in &bundle.records {
        let key = (r.dataset.clone(), r.method.clone());
        if !seen.contains(&key) {
            seen.push(key);
        }
    }
    for (dataset, method) in seen {
        let cell: Vec<&RunRecord> = bundle
            .records
            .iter()
            .filter(|r| r.dataset == dataset && r.method == method)
            .collect();
        let nmis: Vec<f64> = cell.iter().filter_map(|r| r.nmi).collect();
        let aris: Vec<f64> = cell.iter().filter_map(|r| r.ari).collect();
        let objs: Vec<f64> = cell.iter().map(|r| r.objective).collect();
        let walls: Vec<f64> = cell.iter().map(|r| r.wall_time_ms).collect();
        let fmt = |vals: &[f64]| -> (String, String) {
            if vals.is_empty() {
                ("".into(), "".into())
            } else {
                let (m, s) = mean_std(vals);
                (format!("{m:.6}"), format!("{s:.6}"))
            }
        };
        let (nmi_m, nmi_s) = fmt(&nmis);
        let (ari_m, ari_s) = fmt(&aris);
        let (obj_m, _) = fmt(&objs);
        let (wall_m, _) = fmt(&walls);
        out.push_str(&format!(
            "{dataset},{method},{nmi_m},{nmi_s},{ari_m},{ari_s},{obj_m},{wall_m}\n"
        ));
    }
    out
}

/// Mean per-run metric values for one (dataset, method) cell.
pub fn cell_means(bundle: &ResultsBundle, dataset: &str, method: &str) -> (f64, f64) {
    let nmis: Vec<f64> = bundle
        .records
        .iter()
        .filter(|r| r.dataset == dataset && r.method == method)
        .filter_map(|r| r.nmi)
        .collect();
    let aris: Vec<f64> = bundle
        .records
        .iter()
        .filter(|r| r.dataset == dataset && r.method == method)
        .filter_map(|r| r.ari)
        .collect();
    (mean_std(&nmis).0, mean_std(&aris).0)
}
