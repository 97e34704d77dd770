//! Datasets, synthetic benchmark generators, and CSV I/O.
//!
//! Every generator is a pure function of its parameters and seed: identical
//! inputs produce bit-identical point matrices (see [`crate::rng`] for the
//! generator contract).

use std::fmt::Write as _;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// A point matrix with optional ground-truth labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    /// n x d matrix of finite reals.
    pub points: Array2<f64>,
    /// When present: length-n dense cluster ids in `[0, c)`.
    pub labels: Option<Vec<usize>>,
}

impl Dataset {
    pub fn new(name: impl Into<String>, points: Array2<f64>, labels: Option<Vec<usize>>) -> Result<Self> {
        let ds = Dataset { name: name.into(), points, labels };
        ds.validate()?;
        Ok(ds)
    }

    pub fn n(&self) -> usize {
        self.points.nrows()
    }

    pub fn d(&self) -> usize {
        self.points.ncols()
    }

    /// Number of distinct label ids, when labels are present.
    pub fn n_clusters(&self) -> Option<usize> {
        self.labels.as_ref().map(|ls| ls.iter().copied().max().map_or(0, |m| m + 1))
    }

    fn validate(&self) -> Result<()> {
        if self.n() == 0 || self.d() == 0 {
            return Err(Error::InvalidSpec("dataset must have n >= 1 and d >= 1".into()));
        }
        if self.points.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidSpec("dataset contains a non-finite coordinate".into()));
        }
        if let Some(labels) = &self.labels {
            if labels.len() != self.n() {
                return Err(Error::Shape { expected: self.n(), found: labels.len() });
            }
            let c = labels.iter().copied().max().unwrap() + 1;
            let mut seen = vec![false; c];
            for &l in labels {
                seen[l] = true;
            }
            if seen.iter().any(|s| !s) {
                return Err(Error::InvalidSpec("label ids in [0, c) must all appear".into()));
            }
        }
        Ok(())
    }
}

/// An isotropic Gaussian component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlobSpec {
    pub center: Vec<f64>,
    pub stddev: f64,
    pub count: usize,
}

/// A 2-D annulus: uniform angle, Gaussian radial jitter around `radius`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RingSpec {
    pub center: Vec<f64>,
    pub radius: f64,
    pub jitter: f64,
    pub count: usize,
}

/// A parametric description of one synthetic dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum GenSpec {
    TwoCrescents { n_total: usize, noise: f64, seed: u64 },
    Blobs { specs: Vec<BlobSpec>, seed: u64 },
    Spiral { n_per_arm: usize, arms: usize, noise: f64, seed: u64 },
    RingsGaussians { rings: Vec<RingSpec>, blobs: Vec<BlobSpec>, seed: u64 },
    SubspaceGaussians { dim_total: usize, dim_sub: usize, n_per_cluster: usize, stddev: f64, seed: u64 },
}

impl GenSpec {
    pub fn generate(&self) -> Result<Dataset> {
        match self {
            GenSpec::TwoCrescents { n_total, noise, seed } => gen_two_crescents(*n_total, *noise, *seed),
            GenSpec::Blobs { specs, seed } => gen_blobs(specs, *seed),
            GenSpec::Spiral { n_per_arm, arms, noise, seed } => gen_spiral(*n_per_arm, *arms, *noise, *seed),
            GenSpec::RingsGaussians { rings, blobs, seed } => gen_rings_gaussians(rings, blobs, *seed),
            GenSpec::SubspaceGaussians { dim_total, dim_sub, n_per_cluster, stddev, seed } => {
                gen_subspace_gaussians(*dim_total, *dim_sub, *n_per_cluster, *stddev, *seed)
            }
        }
    }

    /// The same spec with its seed replaced (used by the bench harness to
    /// redraw a dataset per run).
    pub fn with_seed(&self, new_seed: u64) -> GenSpec {
        let mut spec = self.clone();
        match &mut spec {
            GenSpec::TwoCrescents { seed, .. }
            | GenSpec::Blobs { seed, .. }
            | GenSpec::Spiral { seed, .. }
            | GenSpec::RingsGaussians { seed, .. }
            | GenSpec::SubspaceGaussians { seed, .. } => *seed = new_seed,
        }
        spec
    }
}

fn check_noise(noise: f64) -> Result<()> {
    if !(noise >= 0.0) || !noise.is_finite() {
        return Err(Error::InvalidSpec(format!("noise/stddev must be finite and >= 0, got {noise}")));
    }
    Ok(())
}

/// Two interleaved half-circle arcs ("two moons").
///
/// Arm 0 runs along the upper unit semicircle centred at the origin; arm 1 is
/// its reflection shifted to (1, 0.5). Arc positions are the midpoints
/// `theta_i = pi (i + 1/2) / m`, so every point lies exactly on its arc when
/// `noise` is zero. Gaussian jitter of the given stddev is added per
/// coordinate.
pub fn gen_two_crescents(n_total: usize, noise: f64, seed: u64) -> Result<Dataset> {
    if n_total < 2 {
        return Err(Error::InvalidSpec(format!("two_crescents needs n_total >= 2, got {n_total}")));
    }
    if n_total % 2 != 0 {
        return Err(Error::InvalidSpec(format!("two_crescents splits evenly; n_total = {n_total} is odd")));
    }
    check_noise(noise)?;
    let m = n_total / 2;
    let mut points = Array2::zeros((n_total, 2));
    let mut labels = Vec::with_capacity(n_total);
    for arm in 0..2usize {
        let mut rng = rng::stream(seed, arm as u64);
        for i in 0..m {
            let theta = std::f64::consts::PI * (i as f64 + 0.5) / m as f64;
            let (mut x, mut y) = if arm == 0 {
                (theta.cos(), theta.sin())
            } else {
                (1.0 - theta.cos(), 0.5 - theta.sin())
            };
            x += noise * rng::normal(&mut rng);
            y += noise * rng::normal(&mut rng);
            let row = arm * m + i;
            points[[row, 0]] = x;
            points[[row, 1]] = y;
            labels.push(arm);
        }
    }
    Dataset::new("2Crescents", points, Some(labels))
}

/// Isotropic Gaussian blobs, one per spec; labels follow spec order.
pub fn gen_blobs(specs: &[BlobSpec], seed: u64) -> Result<Dataset> {
    if specs.is_empty() {
        return Err(Error::InvalidSpec("blobs need at least one component spec".into()));
    }
    let d = specs[0].center.len();
    for (j, s) in specs.iter().enumerate() {
        if s.center.len() != d {
            return Err(Error::Shape { expected: d, found: s.center.len() });
        }
        if s.count == 0 {
            return Err(Error::InvalidSpec(format!("blob {j} has count 0")));
        }
        check_noise(s.stddev)?;
    }
    let n: usize = specs.iter().map(|s| s.count).sum();
    let mut points = Array2::zeros((n, d));
    let mut labels = Vec::with_capacity(n);
    let mut row = 0;
    for (j, s) in specs.iter().enumerate() {
        let mut rng = rng::stream(seed, j as u64);
        for _ in 0..s.count {
            for (c, &ctr) in s.center.iter().enumerate() {
                points[[row, c]] = ctr + s.stddev * rng::normal(&mut rng);
            }
            labels.push(j);
            row += 1;
        }
    }
    Dataset::new("Blobs", points, Some(labels))
}

/// Archimedean spiral arms rotated by `2 pi / arms` each.
///
/// Along one arm, `t` runs 0..1 inclusive, the angle is `1.5 pi t`
/// (three-quarters of a revolution) and the radius `0.1 + 0.9 t`; arm `a`
/// adds a phase of `2 pi a / arms`. Gaussian jitter of the given stddev is
/// added per coordinate.
pub fn gen_spiral(n_per_arm: usize, arms: usize, noise: f64, seed: u64) -> Result<Dataset> {
    if arms == 0 || n_per_arm == 0 {
        return Err(Error::InvalidSpec("spiral needs arms >= 1 and n_per_arm >= 1".into()));
    }
    check_noise(noise)?;
    let n = n_per_arm * arms;
    let mut points = Array2::zeros((n, 2));
    let mut labels = Vec::with_capacity(n);
    let denom = (n_per_arm - 1).max(1) as f64;
    for arm in 0..arms {
        let phase = 2.0 * std::f64::consts::PI * arm as f64 / arms as f64;
        let mut rng = rng::stream(seed, arm as u64);
        for i in 0..n_per_arm {
            let t = i as f64 / denom;
            let theta = 1.5 * std::f64::consts::PI * t + phase;
            let r = 0.1 + 0.9 * t;
            let row = arm * n_per_arm + i;
            points[[row, 0]] = r * theta.cos() + noise * rng::normal(&mut rng);
            points[[row, 1]] = r * theta.sin() + noise * rng::normal(&mut rng);
            labels.push(arm);
        }
    }
    Dataset::new("spiral", points, Some(labels))
}

/// Concentric annuli plus optional Gaussian blobs; one label per component,
/// rings first in spec order, then blobs.
pub fn gen_rings_gaussians(rings: &[RingSpec], blobs: &[BlobSpec], seed: u64) -> Result<Dataset> {
    if rings.is_empty() && blobs.is_empty() {
        return Err(Error::InvalidSpec("rings_gaussians needs at least one component".into()));
    }
    for (j, r) in rings.iter().enumerate() {
        if r.center.len() != 2 {
            return Err(Error::Shape { expected: 2, found: r.center.len() });
        }
        if r.count == 0 {
            return Err(Error::InvalidSpec(format!("ring {j} has count 0")));
        }
        check_noise(r.jitter)?;
        if !(r.radius >= 0.0) {
            return Err(Error::InvalidSpec(format!("ring {j} has negative radius")));
        }
    }
    for (j, b) in blobs.iter().enumerate() {
        if b.center.len() != 2 {
            return Err(Error::Shape { expected: 2, found: b.center.len() });
        }
        if b.count == 0 {
            return Err(Error::InvalidSpec(format!("blob {j} has count 0")));
        }
        check_noise(b.stddev)?;
    }
    let n: usize = rings.iter().map(|r| r.count).sum::<usize>() + blobs.iter().map(|b| b.count).sum::<usize>();
    let mut points = Array2::zeros((n, 2));
    let mut labels = Vec::with_capacity(n);
    let mut row = 0;
    let mut comp = 0usize;
    for r in rings {
        let mut rng = rng::stream(seed, comp as u64);
        for _ in 0..r.count {
            let angle = 2.0 * std::f64::consts::PI * rng::uniform_f64(&mut rng);
            let radius = r.radius + r.jitter * rng::normal(&mut rng);
            points[[row, 0]] = r.center[0] + radius * angle.cos();
            points[[row, 1]] = r.center[1] + radius * angle.sin();
            labels.push(comp);
            row += 1;
        }
        comp += 1;
    }
    for b in blobs {
        let mut rng = rng::stream(seed, comp as u64);
        for _ in 0..b.count {
            points[[row, 0]] = b.center[0] + b.stddev * rng::normal(&mut rng);
            points[[row, 1]] = b.center[1] + b.stddev * rng::normal(&mut rng);
            labels.push(comp);
            row += 1;
        }
        comp += 1;
    }
    Dataset::new("RingG", points, Some(labels))
}

/// Two Gaussian clusters living in disjoint coordinate blocks that only
/// overlap at the origin: cluster 0 occupies dimensions `[0, dim_sub)`,
/// cluster 1 occupies `[dim_sub, dim_total)`, and each is exactly zero
/// outside its block.
pub fn gen_subspace_gaussians(
    dim_total: usize,
    dim_sub: usize,
    n_per_cluster: usize,
    stddev: f64,
    seed: u64,
) -> Result<Dataset> {
    if dim_sub == 0 || 2 * dim_sub != dim_total {
        return Err(Error::InvalidSpec(format!(
            "subspace_gaussians needs dim_total = 2 * dim_sub, got {dim_total} and {dim_sub}"
        )));
    }
    if n_per_cluster == 0 {
        return Err(Error::InvalidSpec("subspace_gaussians needs n_per_cluster >= 1".into()));
    }
    check_noise(stddev)?;
    let n = 2 * n_per_cluster;
    let mut points = Array2::zeros((n, dim_total));
    let mut labels = Vec::with_capacity(n);
    for cluster in 0..2usize {
        let mut rng = rng::stream(seed, cluster as u64);
        let offset = cluster * dim_sub;
        for i in 0..n_per_cluster {
            let row = cluster * n_per_cluster + i;
            for c in 0..dim_sub {
                points[[row, offset + c]] = stddev * rng::normal(&mut rng);
            }
            labels.push(cluster);
        }
    }
    Dataset::new("w100Gaussians", points, Some(labels))
}

/// Write a dataset as CSV: header `f0,...,f{d-1}[,label]`, '.' radix, ','
/// delimiter. Floats use the shortest decimal that round-trips, so
/// save-then-load reproduces coordinates bit-exactly.
pub fn save_csv(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let io_err = |e: std::io::Error| Error::Io { path: path.display().to_string(), source: e };
    let mut out = String::new();
    for c in 0..dataset.d() {
        if c > 0 {
            out.push(',');
        }
        let _ = write!(out, "f{c}");
    }
    if dataset.labels.is_some() {
        out.push_str(",label");
    }
    out.push('\n');
    for i in 0..dataset.n() {
        for c in 0..dataset.d() {
            if c > 0 {
                out.push(',');
            }
            let _ = write!(out, "{}", dataset.points[[i, c]]);
        }
        if let Some(labels) = &dataset.labels {
            let _ = write!(out, ",{}", labels[i]);
        }
        out.push('\n');
    }
    std::fs::write(path, out).map_err(io_err)
}

/// Read a dataset from CSV.
///
/// `label_column` names a header column to map to dense label ids in
/// first-appearance order; it requires `has_header`. Data rows are numbered
/// from 1 in error messages (the header row is not counted).
pub fn load_csv(path: impl AsRef<Path>, has_header: bool, label_column: Option<&str>) -> Result<Dataset> {
    let path = path.as_ref();
    let io_err = |e: std::io::Error| Error::Io { path: path.display().to_string(), source: e };
    if label_column.is_some() && !has_header {
        return Err(Error::InvalidSpec("label_column requires a header row".into()));
    }
    let file = std::fs::File::open(path).map_err(io_err)?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .flexible(true)
        .from_reader(file);

    let mut label_idx: Option<usize> = None;
    let mut width: Option<usize> = None;
    if has_header {
        let headers = reader
            .headers()
            .map_err(|e| Error::Parse(format!("header: {e}")))?
            .clone();
        width = Some(headers.len());
        if let Some(name) = label_column {
            label_idx = Some(
                headers
                    .iter()
                    .position(|h| h == name)
                    .ok_or_else(|| Error::Parse(format!("header: no column named {name:?}")))?,
            );
        }
    }

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut raw_labels: Vec<String> = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let row_no = idx + 1;
        let record = record.map_err(|e| Error::Parse(format!("row {row_no}: {e}")))?;
        let expected = *width.get_or_insert(record.len());
        if record.len() != expected {
            return Err(Error::Parse(format!(
                "row {row_no}: expected {expected} fields, found {}",
                record.len()
            )));
        }
        let mut row = Vec::with_capacity(expected);
        for (col, field) in record.iter().enumerate() {
            if Some(col) == label_idx {
                raw_labels.push(field.to_string());
                continue;
            }
            let v: f64 = field.trim().parse().map_err(|_| {
                Error::Parse(format!("row {row_no}, column {col}: non-numeric value {field:?}"))
            })?;
            row.push(v);
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse("file has no data rows".into()));
    }
    let d = rows[0].len();
    let mut points = Array2::zeros((rows.len(), d));
    for (i, row) in rows.iter().enumerate() {
        for (c, &v) in row.iter().enumerate() {
            points[[i, c]] = v;
        }
    }
    let labels = if label_idx.is_some() {
        // Dense ids in first-appearance order.
        let mut order: Vec<String> = Vec::new();
        let mut ids = Vec::with_capacity(raw_labels.len());
        for raw in &raw_labels {
            let id = match order.iter().position(|o| o == raw) {
                Some(p) => p,
                None => {
                    order.push(raw.clone());
                    order.len() - 1
                }
            };
            ids.push(id);
        }
        Some(ids)
    } else {
        None
    };
    let name = path.file_stem().map_or_else(|| "csv".to_string(), |s| s.to_string_lossy().into_owned());
    Dataset::new(name, points, labels)
}
