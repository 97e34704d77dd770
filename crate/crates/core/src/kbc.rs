//! Kernel Bounded Clustering.
//!
//! Three steps over a fitted Isolation Kernel:
//! 1. seed groups: threshold-chained components on a uniform sample — two
//!    sample points are chained when their kernel value exceeds `tau`, and
//!    the `k` largest connected components become the initial groups;
//! 2. assignment: every point goes to the group whose distribution it is
//!    most similar to (argmax of point-to-distribution similarity);
//! 3. refinement: alternate recomputing cluster mean embeddings and
//!    reassigning, accepting a pass only when the objective strictly
//!    improves.

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::dkernel::{self, MeanMap, Partition};
use crate::error::{Error, Result};
use crate::ikernel::{FeatureVector, IsolationModel};
use crate::kmeans::KmeansParams;
use crate::rng;

const TAG_SAMPLE: u64 = 0x5341_4d50;

/// Minimum objective gain for a refine pass to be accepted.
const REFINE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KbcParams {
    /// Number of clusters.
    pub k: usize,
    /// Sample size for seeding.
    pub s: usize,
    /// Chaining threshold in `[-1, 1)`.
    pub tau: f64,
    /// Anchors per partition.
    pub psi: usize,
    /// Number of partitions.
    pub t: usize,
    pub max_refine_iters: usize,
    pub seed: u64,
}

impl KbcParams {
    pub fn new(k: usize) -> KbcParams {
        KbcParams { k, s: 512, tau: 0.5, psi: 16, t: 200, max_refine_iters: 50, seed: 0 }
    }

    fn validate(&self, n: usize) -> Result<()> {
        if self.k < 2 {
            return Err(Error::InvalidSpec(format!("k must be >= 2, got {}", self.k)));
        }
        if self.s < self.k {
            return Err(Error::InvalidSpec(format!("sample size {} < k {}", self.s, self.k)));
        }
        if self.s > n {
            return Err(Error::InsufficientData { needed: self.s, available: n });
        }
        if !(self.tau < 1.0) || !(self.tau >= -1.0) {
            return Err(Error::InvalidSpec(format!("tau must lie in [-1, 1), got {}", self.tau)));
        }
        Ok(())
    }
}

/// Parameters actually used by a clustering run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum MethodParams {
    Kbc(KbcParams),
    Kmeans(KmeansParams),
}

/// Outcome of one clustering run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringResult {
    pub labels: Vec<usize>,
    pub k: usize,
    /// Final objective value (for k-means: negated SSE, so higher is better).
    pub objective: f64,
    pub params: MethodParams,
    pub seed: u64,
    /// Accepted refinement passes (for k-means: Lloyd iterations of the
    /// winning restart).
    pub n_refine_iters: usize,
    /// Objective after each accepted pass, starting from the initial value.
    pub objective_trace: Vec<f64>,
    /// Initial seed groups (dataset point indices), recorded for audit.
    pub seed_groups: Option<Vec<Vec<usize>>>,
    /// Whether refinement stopped because a pass emptied a cluster.
    pub refine_stopped_on_empty: bool,
}

impl ClusteringResult {
    pub fn partition(&self) -> Result<Partition> {
        Partition::new(self.labels.clone(), self.k)
    }
}

struct DisjointSet {
    parent: Vec<usize>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        DisjointSet { parent: (0..n).collect() }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // Deterministic: smaller root wins.
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

/// Step 1: threshold-chained seed groups on a sample.
///
/// Builds the graph on the sample with an edge wherever the kernel value
/// exceeds `tau`; its connected components are the chained groups. Returns
/// the `k` largest (ties broken by smallest minimum dataset index), as sets
/// of dataset point indices.
pub fn init_clusters(
    model: &IsolationModel,
    data: &Dataset,
    sample: &[usize],
    k: usize,
    tau: f64,
) -> Result<Vec<Vec<usize>>> {
    let feats: Vec<FeatureVector> = sample
        .iter()
        .map(|&i| model.transform(data.points.row(i).as_slice().expect("row-major layout")))
        .collect::<Result<_>>()?;
    init_clusters_from_features(&feats, sample, k, tau)
}

fn init_clusters_from_features(
    feats: &[FeatureVector],
    sample: &[usize],
    k: usize,
    tau: f64,
) -> Result<Vec<Vec<usize>>> {
    let s = sample.len();
    if s < k {
        return Err(Error::InvalidSpec(format!("sample of {s} points cannot seed {k} groups")));
    }
    let mut dsu = DisjointSet::new(s);
    for i in 0..s {
        for j in (i + 1)..s {
            if feats[i].dot(&feats[j]) > tau {
                dsu.union(i, j);
            }
        }
    }
    let mut components: Vec<Vec<usize>> = Vec::new();
    let mut root_to_comp: std::collections::HashMap<usize, usize> = std::collections::HashMap::new();
    for i in 0..s {
        let root = dsu.find(i);
        let comp = *root_to_comp.entry(root).or_insert_with(|| {
            components.push(Vec::new());
            components.len() - 1
        });
        components[comp].push(sample[i]);
    }
    if components.len() < k {
        return Err(Error::TauTooSmall { components: components.len(), k });
    }
    components.sort_by_key(|c| {
        (
            std::cmp::Reverse(c.len()),
            c.iter().copied().min().expect("non-empty component"),
        )
    });
    components.truncate(k);
    Ok(components)
}

/// Step 2: assign every point to the group with the most similar
/// distribution; ties go to the lowest group index.
pub fn assign(model: &IsolationModel, data: &Dataset, groups: &[Vec<usize>]) -> Result<Partition> {
    if groups.len() < 2 {
        return Err(Error::InvalidSpec("assignment needs at least 2 groups".into()));
    }
    let features = model.transform_all(data)?;
    let maps = group_mean_maps(model, &features, groups)?;
    let labels = assign_features(&features, &maps)?;
    Partition::new(labels, groups.len())
}

fn group_mean_maps(
    model: &IsolationModel,
    features: &[FeatureVector],
    groups: &[Vec<usize>],
) -> Result<Vec<MeanMap>> {
    groups
        .iter()
        .map(|g| MeanMap::from_features(model.psi, model.t, g.iter().map(|&i| &features[i])))
        .collect()
}

fn assign_features(features: &[FeatureVector], maps: &[MeanMap]) -> Result<Vec<usize>> {
    let k = maps.len();
    let mut counts = vec![0usize; k];
    let mut labels = Vec::with_capacity(features.len());
    for fv in features {
        let mut best = 0usize;
        let mut best_sim = f64::NEG_INFINITY;
        for (j, mm) in maps.iter().enumerate() {
            let sim = mm.dot_feature(fv)?;
            if sim > best_sim {
                best_sim = sim;
                best = j;
            }
        }
        counts[best] += 1;
        labels.push(best);
    }
    if let Some(group) = counts.iter().position(|&c| c == 0) {
        return Err(Error::DegenerateAssignment { group });
    }
    Ok(labels)
}

/// Result of the refinement loop.
#[derive(Debug, Clone, PartialEq)]
pub struct RefineOutcome {
    pub partition: Partition,
    /// Objective before refinement followed by each accepted pass.
    pub objective_trace: Vec<f64>,
    pub n_iters: usize,
    pub stopped_on_empty: bool,
}

/// Step 3: greedy coordinate ascent on the objective. Each pass recomputes
/// all cluster mean embeddings and reassigns every point; the pass is
/// accepted only if the objective strictly increases.
pub fn refine(
    model: &IsolationModel,
    data: &Dataset,
    part: Partition,
    max_iters: usize,
) -> Result<RefineOutcome> {
    let features = model.transform_all(data)?;
    refine_features(model, &features, part, max_iters)
}

fn refine_features(
    model: &IsolationModel,
    features: &[FeatureVector],
    part: Partition,
    max_iters: usize,
) -> Result<RefineOutcome> {
    let mut current = part;
    let mut cur_obj = dkernel::objective_from_features(model, features, &current)?;
    let mut trace = vec![cur_obj];
    let mut n_iters = 0;
    let mut stopped_on_empty = false;
    for _ in 0..max_iters {
        let groups = current.members();
        let maps = group_mean_maps(model, features, &groups)?;
        let new_labels = match assign_features(features, &maps) {
            Ok(labels) => labels,
            Err(Error::DegenerateAssignment { .. }) => {
                stopped_on_empty = true;
                break;
            }
            Err(e) => return Err(e),
        };
        if new_labels == current.labels {
            break;
        }
        let candidate = Partition::new(new_labels, current.k)?;
        let new_obj = dkernel::objective_from_features(model, features, &candidate)?;
        if new_obj > cur_obj + REFINE_EPS {
            current = candidate;
            cur_obj = new_obj;
            trace.push(cur_obj);
            n_iters += 1;
        } else {
            break;
        }
    }
    Ok(RefineOutcome { partition: current, objective_trace: trace, n_iters, stopped_on_empty })
}

/// Run the full pipeline: fit the kernel, sample, seed, assign, refine.
/// Deterministic in `(data, params)`.
pub fn fit(data: &Dataset, params: &KbcParams) -> Result<ClusteringResult> {
    params.validate(data.n())?;
    let model = IsolationModel::fit(data, params.psi, params.t, params.seed)?;
    let features = model.transform_all(data)?;
    fit_prepared(&model, &features, data, params)
}

/// The pipeline over an already fitted model and precomputed features
/// (shared across tau values during tuning). The model must have been fitted
/// with `params.psi`, `params.t`, `params.seed`.
pub fn fit_prepared(
    model: &IsolationModel,
    features: &[FeatureVector],
    data: &Dataset,
    params: &KbcParams,
) -> Result<ClusteringResult> {
    params.validate(data.n())?;
    let mut rng = rng::stream(rng::mix(params.seed, TAG_SAMPLE), 0);
    let sample = rng::sample_indices(&mut rng, data.n(), params.s);
    let sample_feats: Vec<FeatureVector> = sample.iter().map(|&i| features[i].clone()).collect();
    let groups = init_clusters_from_features(&sample_feats, &sample, params.k, params.tau)?;
    let maps = group_mean_maps(model, features, &groups)?;
    let initial = Partition::new(assign_features(features, &maps)?, params.k)?;
    let outcome = refine_features(model, features, initial, params.max_refine_iters)?;
    let objective = *outcome.objective_trace.last().expect("non-empty trace");
    Ok(ClusteringResult {
        labels: outcome.partition.labels,
        k: params.k,
        objective,
        params: MethodParams::Kbc(params.clone()),
        seed: params.seed,
        n_refine_iters: outcome.n_iters,
        objective_trace: outcome.objective_trace,
        seed_groups: Some(groups),
        refine_stopped_on_empty: outcome.stopped_on_empty,
    })
}

/// Grid search over `(psi, tau)`, selecting — never by ground truth — on
/// two unsupervised signals, in order:
///
/// 1. chaining coverage: the fraction of the sample captured by the `k`
///    kept components. Full coverage means tau sits in the band where each
///    cluster chains into one component; fragmented seeding (tau too large)
///    or a kernel too smooth to separate clusters both lose coverage.
/// 2. the objective normalized by the single-cluster objective under the
///    same kernel. The raw objective scales with kernel smoothness (smaller
///    psi inflates every kernel value), so raw comparison across psi
///    degenerately prefers the smoothest kernel; the trivial-partition
///    baseline carries the same scale and divides it out, leaving
///    "improvement over not clustering at all".
///
/// Coverage is maximal right at the feasibility boundary (the smallest tau
/// that still yields k components), but a boundary tau generalizes poorly:
/// on a redrawn sample of the same data it can collapse to fewer than k
/// components. So for each psi the smallest feasible tau is set aside and
/// only consulted when no combination with a one-step margin exists.
///
/// Combinations whose chaining fails are skipped; remaining ties go to
/// smaller psi, then smaller tau.
pub fn tune(
    data: &Dataset,
    psi_grid: &[usize],
    tau_grid: &[f64],
    base: &KbcParams,
) -> Result<(KbcParams, ClusteringResult)> {
    if psi_grid.is_empty() || tau_grid.is_empty() {
        return Err(Error::InvalidSpec("tuning grids must be non-empty".into()));
    }
    let n = data.n() as f64;
    let mut candidates: Vec<(f64, f64, bool, KbcParams, ClusteringResult)> = Vec::new();
    let mut failures: Vec<String> = Vec::new();
    for &psi in psi_grid {
        let params_for_model = KbcParams { psi, ..base.clone() };
        let model = match IsolationModel::fit(data, psi, base.t, base.seed) {
            Ok(m) => m,
            Err(e) => {
                for &tau in tau_grid {
                    failures.push(format!("psi={psi} tau={tau}: {e}"));
                }
                continue;
            }
        };
        let features = model.transform_all(data)?;
        // Single-cluster objective: n * K(P_D, P_D).
        let global = MeanMap::from_features(model.psi, model.t, features.iter())?;
        let baseline = n * global.dot(&global)?;
        let mut per_psi: Vec<(f64, f64, bool, KbcParams, ClusteringResult)> = Vec::new();
        for &tau in tau_grid {
            let params = KbcParams { tau, ..params_for_model.clone() };
            match fit_prepared(&model, &features, data, &params) {
                Ok(result) => {
                    let seeded: usize = result
                        .seed_groups
                        .as_ref()
                        .expect("kbc records seed groups")
                        .iter()
                        .map(Vec::len)
                        .sum();
                    let coverage = seeded as f64 / params.s as f64;
                    let ratio = result.objective / baseline;
                    per_psi.push((coverage, ratio, false, params, result));
                }
                Err(e) => failures.push(format!("psi={psi} tau={tau}: {e}")),
            }
        }
        // Mark this psi's feasibility-boundary tau.
        if let Some(min_tau) = per_psi
            .iter()
            .map(|(_, _, _, p, _)| p.tau)
            .min_by(|a, b| a.partial_cmp(b).expect("finite tau"))
        {
            for cell in &mut per_psi {
                cell.2 = cell.3.tau == min_tau;
            }
        }
        candidates.extend(per_psi);
    }
    let with_margin = candidates.iter().any(|(_, _, boundary, _, _)| !boundary);
    let mut best: Option<(f64, f64, KbcParams, ClusteringResult)> = None;
    for (coverage, ratio, boundary, params, result) in candidates {
        if boundary && with_margin {
            continue;
        }
        let better = match &best {
            None => true,
            Some((bc, br, bp, _)) => {
                (coverage, ratio) > (*bc, *br)
                    || ((coverage, ratio) == (*bc, *br) && (params.psi, params.tau) < (bp.psi, bp.tau))
            }
        };
        if better {
            best = Some((coverage, ratio, params, result));
        }
    }
    match best {
        Some((_, _, params, result)) => Ok((params, result)),
        None => Err(Error::AllFailed(failures.len(), failures.join("\n"))),
    }
}
