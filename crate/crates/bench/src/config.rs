//! Benchmark configuration: a JSON document listing datasets, methods, and
//! the run protocol.
//!
//! ```json
//! {
//!   "runs": 10,
//!   "master_seed": 7,
//!   "datasets": [
//!     {"name": "2Crescents",
//!      "generator": {"family": "two_crescents", "n_total": 1200, "noise": 0.08, "seed": 0}},
//!     {"name": "complex9", "csv": {"path": "complex9.csv", "label_column": "label"}}
//!   ],
//!   "methods": [
//!     {"method": "kbc", "k": 2},
//!     {"method": "kmeans", "k": 2}
//!   ]
//! }
//! ```
//!
//! KBC methods may pin `psi`/`tau` directly; otherwise the harness tunes
//! them once per (dataset, method) cell over `psi_grid` x `tau_grid` by the
//! objective (never by ground truth) and fixes the winner across runs.

use serde::{Deserialize, Serialize};

use cadclust::dataset::{load_csv, Dataset, GenSpec};
use cadclust::{KbcParams, KmeansParams};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("config {path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("config field {field}: {message}")]
    Invalid { field: String, message: String },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    pub datasets: Vec<DatasetEntry>,
    pub methods: Vec<MethodEntry>,
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default)]
    pub master_seed: u64,
}

fn default_runs() -> usize {
    10
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct DatasetEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(flatten)]
    pub source: DatasetSource,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "snake_case")]
pub enum DatasetSource {
    /// Synthetic dataset, regenerated per run with the run's derived seed.
    Generator(GenSpec),
    /// CSV file on disk, fixed across runs.
    Csv(CsvSource),
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct CsvSource {
    pub path: String,
    #[serde(default = "default_true")]
    pub has_header: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label_column: Option<String>,
}

fn default_true() -> bool {
    true
}

impl DatasetEntry {
    /// Display name: explicit `name`, else the generator family name or the
    /// CSV file stem.
    pub fn name(&self) -> String {
        if let Some(name) = &self.name {
            return name.clone();
        }
        match &self.source {
            DatasetSource::Generator(spec) => spec
                .with_seed(0)
                .generate()
                .map(|d| d.name)
                .unwrap_or_else(|_| "generator".to_string()),
            DatasetSource::Csv(csv) => std::path::Path::new(&csv.path)
                .file_stem()
                .map_or_else(|| "csv".to_string(), |s| s.to_string_lossy().into_owned()),
        }
    }

    /// Materialize the dataset for one run.
    pub fn load(&self, run_seed: u64) -> Result<Dataset, cadclust::Error> {
        match &self.source {
            DatasetSource::Generator(spec) => spec.with_seed(run_seed).generate(),
            DatasetSource::Csv(csv) => load_csv(&csv.path, csv.has_header, csv.label_column.as_deref()),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MethodEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(flatten)]
    pub spec: MethodSpec,
}

impl MethodEntry {
    pub fn name(&self) -> String {
        self.name.clone().unwrap_or_else(|| match self.spec {
            MethodSpec::Kbc { .. } => "kbc".to_string(),
            MethodSpec::Kmeans { .. } => "kmeans".to_string(),
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum MethodSpec {
    #[serde(rename_all = "snake_case")]
    Kbc {
        k: usize,
        /// Sample size; defaults to min(n, 512) at run time.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        s: Option<usize>,
        #[serde(default = "default_t")]
        t: usize,
        #[serde(default = "default_refine")]
        max_refine_iters: usize,
        /// Pinned sharpness; when absent, tuned over `psi_grid`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        psi: Option<usize>,
        /// Pinned chaining threshold; when absent, tuned over `tau_grid`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        tau: Option<f64>,
        #[serde(default = "default_psi_grid")]
        psi_grid: Vec<usize>,
        #[serde(default = "default_tau_grid")]
        tau_grid: Vec<f64>,
    },
    #[serde(rename_all = "snake_case")]
    Kmeans {
        k: usize,
        #[serde(default = "default_n_init")]
        n_init: usize,
        #[serde(default = "default_max_iters")]
        max_iters: usize,
        #[serde(default = "default_tol")]
        tol: f64,
    },
}

fn default_t() -> usize {
    200
}

fn default_refine() -> usize {
    50
}

pub fn default_psi_grid() -> Vec<usize> {
    vec![2, 4, 8, 16, 32, 64, 128]
}

pub fn default_tau_grid() -> Vec<f64> {
    (1..10).map(|i| i as f64 / 10.0).collect()
}

fn default_n_init() -> usize {
    10
}

fn default_max_iters() -> usize {
    300
}

fn default_tol() -> f64 {
    1e-6
}

impl MethodSpec {
    /// KBC parameters for one run of size-`n` data, with the sample size
    /// clamped to the dataset.
    pub fn kbc_params(&self, n: usize, seed: u64) -> Option<KbcParams> {
        match self {
            MethodSpec::Kbc { k, s, t, max_refine_iters, psi, tau, .. } => Some(KbcParams {
                k: *k,
                s: s.unwrap_or(512).min(n),
                tau: tau.unwrap_or(0.5),
                psi: psi.unwrap_or(16),
                t: *t,
                max_refine_iters: *max_refine_iters,
                seed,
            }),
            MethodSpec::Kmeans { .. } => None,
        }
    }

    pub fn kmeans_params(&self, seed: u64) -> Option<KmeansParams> {
        match self {
            MethodSpec::Kmeans { k, n_init, max_iters, tol } => {
                Some(KmeansParams { k: *k, n_init: *n_init, max_iters: *max_iters, tol: *tol, seed })
            }
            MethodSpec::Kbc { .. } => None,
        }
    }
}

impl BenchConfig {
    pub fn from_path(path: &str) -> Result<BenchConfig, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.to_string(), source })?;
        let config: BenchConfig = serde_json::from_str(&text)
            .map_err(|source| ConfigError::Json { path: path.to_string(), source })?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.runs == 0 {
            return Err(ConfigError::Invalid { field: "runs".into(), message: "must be >= 1".into() });
        }
        if self.datasets.is_empty() {
            return Err(ConfigError::Invalid {
                field: "datasets".into(),
                message: "at least one dataset required".into(),
            });
        }
        if self.methods.is_empty() {
            return Err(ConfigError::Invalid {
                field: "methods".into(),
                message: "at least one method required".into(),
            });
        }
        for (i, m) in self.methods.iter().enumerate() {
            match &m.spec {
                MethodSpec::Kbc { k, psi_grid, tau_grid, .. } => {
                    if *k < 2 {
                        return Err(ConfigError::Invalid {
                            field: format!("methods[{i}].k"),
                            message: "kbc needs k >= 2".into(),
                        });
                    }
                    if psi_grid.is_empty() || tau_grid.is_empty() {
                        return Err(ConfigError::Invalid {
                            field: format!("methods[{i}]"),
                            message: "psi_grid and tau_grid must be non-empty".into(),
                        });
                    }
                }
                MethodSpec::Kmeans { k, n_init, .. } => {
                    if *k == 0 || *n_init == 0 {
                        return Err(ConfigError::Invalid {
                            field: format!("methods[{i}]"),
                            message: "kmeans needs k >= 1 and n_init >= 1".into(),
                        });
                    }
                }
            }
        }
        Ok(())
    }

    /// Canonical digest of the config document, recorded in results.json.
    pub fn digest(&self) -> String {
        use sha2::{Digest, Sha256};
        let canonical = serde_json::to_vec(self).expect("config serializes");
        let hash = Sha256::digest(&canonical);
        hash.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal_json() -> &'static str {
        r#"{
            "datasets": [
                {"name": "moons",
                 "generator": {"family": "two_crescents", "n_total": 40, "noise": 0.05, "seed": 1}},
                {"csv": {"path": "data/things.csv", "label_column": "label"}}
            ],
            "methods": [
                {"method": "kbc", "k": 2},
                {"method": "kmeans", "k": 2, "n_init": 3}
            ]
        }"#
    }

    #[test]
    fn defaults_fill_in() {
        let config: BenchConfig = serde_json::from_str(minimal_json()).unwrap();
        config.validate().unwrap();
        assert_eq!(config.runs, 10);
        assert_eq!(config.master_seed, 0);
        assert_eq!(config.datasets[0].name(), "moons");
        assert_eq!(config.datasets[1].name(), "things");
        assert_eq!(config.methods[0].name(), "kbc");
        match &config.methods[0].spec {
            MethodSpec::Kbc { t, psi_grid, tau_grid, psi, tau, .. } => {
                assert_eq!(*t, 200);
                assert_eq!(psi_grid, &default_psi_grid());
                assert_eq!(tau_grid.len(), 9);
                assert!(psi.is_none() && tau.is_none());
            }
            other => panic!("expected kbc, got {other:?}"),
        }
        match &config.methods[1].spec {
            MethodSpec::Kmeans { n_init, max_iters, tol, .. } => {
                assert_eq!(*n_init, 3);
                assert_eq!(*max_iters, 300);
                assert_eq!(*tol, 1e-6);
            }
            other => panic!("expected kmeans, got {other:?}"),
        }
    }

    #[test]
    fn generator_dataset_loads_with_run_seed() {
        let config: BenchConfig = serde_json::from_str(minimal_json()).unwrap();
        let a = config.datasets[0].load(5).unwrap();
        let b = config.datasets[0].load(5).unwrap();
        let c = config.datasets[0].load(6).unwrap();
        assert_eq!(a.points, b.points);
        assert_ne!(a.points, c.points);
        assert_eq!(a.n(), 40);
    }

    #[test]
    fn unknown_top_level_field_rejected() {
        let err = serde_json::from_str::<BenchConfig>(
            r#"{"datasets": [], "methods": [], "output": "x"}"#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("output"), "{err}");
    }

    #[test]
    fn validation_errors_name_the_field() {
        let mut config: BenchConfig = serde_json::from_str(minimal_json()).unwrap();
        config.runs = 0;
        let err = config.validate().unwrap_err();
        assert!(matches!(err, ConfigError::Invalid { ref field, .. } if field == "runs"), "{err}");

        let bad: BenchConfig = serde_json::from_str(
            r#"{
                "datasets": [{"generator": {"family": "spiral", "n_per_arm": 5, "arms": 2, "noise": 0.0, "seed": 0}}],
                "methods": [{"method": "kbc", "k": 1}]
            }"#,
        )
        .unwrap();
        let err = bad.validate().unwrap_err();
        assert!(matches!(err, ConfigError::Invalid { ref field, .. } if field == "methods[0].k"), "{err}");
    }

    #[test]
    fn digest_is_stable_and_content_sensitive() {
        let a: BenchConfig = serde_json::from_str(minimal_json()).unwrap();
        let b: BenchConfig = serde_json::from_str(minimal_json()).unwrap();
        assert_eq!(a.digest(), b.digest());
        assert_eq!(a.digest().len(), 64);
        let mut c = a.clone();
        c.master_seed = 1;
        assert_ne!(a.digest(), c.digest());
    }

    #[test]
    fn kbc_params_clamp_sample_to_n() {
        let config: BenchConfig = serde_json::from_str(minimal_json()).unwrap();
        let params = config.methods[0].spec.kbc_params(100, 7).unwrap();
        assert_eq!(params.s, 100);
        assert_eq!(params.seed, 7);
        let params = config.methods[0].spec.kbc_params(5000, 7).unwrap();
        assert_eq!(params.s, 512);
        assert!(config.methods[0].spec.kmeans_params(7).is_none());
    }
}
