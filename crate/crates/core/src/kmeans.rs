//! Lloyd's k-means with k-means++ initialization, the centroid baseline.

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::kbc::{ClusteringResult, MethodParams};
use crate::rng;

const TAG_RESTART: u64 = 0x4b4d_4e53;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KmeansParams {
    pub k: usize,
    /// Independent restarts; the lowest-SSE one wins.
    pub n_init: usize,
    pub max_iters: usize,
    /// Convergence threshold on the maximum centroid displacement.
    pub tol: f64,
    pub seed: u64,
}

impl KmeansParams {
    pub fn new(k: usize) -> KmeansParams {
        KmeansParams { k, n_init: 10, max_iters: 300, tol: 1e-6, seed: 0 }
    }
}

struct RestartOutcome {
    labels: Vec<usize>,
    sse: f64,
    iters: usize,
    sse_trace: Vec<f64>,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        acc += d * d;
    }
    acc
}

fn row(data: &Dataset, i: usize) -> &[f64] {
    data.points.row(i).to_slice().expect("row-major layout")
}

/// k-means++ seeding: first centroid uniform, each next drawn with
/// probability proportional to squared distance from the chosen set.
fn plus_plus_init(data: &Dataset, k: usize, rng: &mut rand_chacha::ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = data.n();
    let mut centroids: Vec<Vec<f64>> = Vec::with_capacity(k);
    let first = rng::index(rng, n);
    centroids.push(row(data, first).to_vec());
    let mut dist2: Vec<f64> = (0..n).map(|i| sq_dist(row(data, i), &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = dist2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng::uniform_f64(rng) * total;
            let mut chosen = n - 1;
            for (i, &d) in dist2.iter().enumerate() {
                if target < d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            chosen
        } else {
            // All remaining points coincide with a centroid.
            rng::index(rng, n)
        };
        centroids.push(row(data, next).to_vec());
        let last = centroids.last().unwrap();
        for i in 0..n {
            let d = sq_dist(row(data, i), last);
            if d < dist2[i] {
                dist2[i] = d;
            }
        }
    }
    centroids
}

fn assign_labels(data: &Dataset, centroids: &[Vec<f64>]) -> (Vec<usize>, f64) {
    let n = data.n();
    let mut labels = Vec::with_capacity(n);
    let mut sse = 0.0;
    for i in 0..n {
        let p = row(data, i);
        let mut best = 0usize;
        let mut best_d = f64::INFINITY;
        for (j, c) in centroids.iter().enumerate() {
            let d = sq_dist(p, c);
            if d < best_d {
                best_d = d;
                best = j;
            }
        }
        labels.push(best);
        sse += best_d;
    }
    (labels, sse)
}

fn lloyd(data: &Dataset, params: &KmeansParams, restart: u64) -> RestartOutcome {
    let mut rng = rng::stream(rng::mix(params.seed, TAG_RESTART), restart);
    let d = data.d();
    let n = data.n();
    let mut centroids = plus_plus_init(data, params.k, &mut rng);
    let (mut labels, mut sse) = assign_labels(data, &centroids);
    let mut sse_trace = vec![sse];
    let mut iters = 0;
    for _ in 0..params.max_iters {
        iters += 1;
        // Means of assigned points.
        let mut sums = vec![vec![0.0; d]; params.k];
        let mut counts = vec![0usize; params.k];
        for (i, &l) in labels.iter().enumerate() {
            counts[l] += 1;
            let p = row(data, i);
            for c in 0..d {
                sums[l][c] += p[c];
            }
        }
        let mut new_centroids: Vec<Vec<f64>> = Vec::with_capacity(params.k);
        for j in 0..params.k {
            if counts[j] > 0 {
                new_centroids.push(sums[j].iter().map(|s| s / counts[j] as f64).collect());
            } else {
                new_centroids.push(centroids[j].clone());
            }
        }
        // Reseed each empty cluster at the point farthest from its assigned
        // centroid, excluding points already taken by an earlier reseed.
        let mut taken: Vec<usize> = Vec::new();
        for j in 0..params.k {
            if counts[j] > 0 {
                continue;
            }
            let mut far = 0usize;
            let mut far_d = f64::NEG_INFINITY;
            for i in 0..n {
                if taken.contains(&i) {
                    continue;
                }
                let dist = sq_dist(row(data, i), &new_centroids[labels[i]]);
                if dist > far_d {
                    far_d = dist;
                    far = i;
                }
            }
            new_centroids[j] = row(data, far).to_vec();
            taken.push(far);
        }
        let shift = centroids
            .iter()
            .zip(&new_centroids)
            .map(|(a, b)| sq_dist(a, b).sqrt())
            .fold(0.0f64, f64::max);
        centroids = new_centroids;
        let (new_labels, new_sse) = assign_labels(data, &centroids);
        labels = new_labels;
        sse = new_sse;
        sse_trace.push(sse);
        if shift < params.tol {
            break;
        }
    }
    RestartOutcome { labels, sse, iters, sse_trace }
}

/// Fit k-means: `n_init` restarts, the lowest-SSE one wins (ties go to the
/// lowest restart index). The result's objective is the negated SSE so that
/// higher is better, as for the kernel method.
pub fn kmeans_fit(data: &Dataset, params: &KmeansParams) -> Result<ClusteringResult> {
    if params.k == 0 || params.n_init == 0 || params.max_iters == 0 {
        return Err(Error::InvalidSpec("k, n_init, and max_iters must be >= 1".into()));
    }
    if params.k > data.n() {
        return Err(Error::InvalidSpec(format!("k = {} exceeds n = {}", params.k, data.n())));
    }
    if !(params.tol >= 0.0) {
        return Err(Error::InvalidSpec("tol must be >= 0".into()));
    }
    let mut best: Option<RestartOutcome> = None;
    for restart in 0..params.n_init {
        let outcome = lloyd(data, params, restart as u64);
        let better = best.as_ref().is_none_or(|b| outcome.sse < b.sse);
        if better {
            best = Some(outcome);
        }
    }
    let best = best.expect("n_init >= 1");
    // Labels may use fewer than k ids if some cluster stayed empty at k = n
    // duplicates; compact to dense ids.
    let k_used = best.labels.iter().copied().max().unwrap() + 1;
    Ok(ClusteringResult {
        labels: best.labels,
        k: k_used,
        objective: -best.sse,
        params: MethodParams::Kmeans(params.clone()),
        seed: params.seed,
        n_refine_iters: best.iters,
        objective_trace: best.sse_trace.iter().map(|s| -s).collect(),
        seed_groups: None,
        refine_stopped_on_empty: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{gen_blobs, BlobSpec};
    use crate::metrics;
    use ndarray::array;

    #[test]
    fn single_cluster_centroid_is_mean() {
        let data = Dataset::new("line", array![[0.0, 0.0], [2.0, 0.0], [4.0, 6.0]], None).unwrap();
        let params = KmeansParams { k: 1, n_init: 1, ..KmeansParams::new(1) };
        let result = kmeans_fit(&data, &params).unwrap();
        assert_eq!(result.labels, vec![0, 0, 0]);
        // SSE about the mean (2, 2): 4+4 + 0+4 + 4+16 = 32.
        assert!((result.objective + 32.0).abs() < 1e-9);
    }

    #[test]
    fn two_points_two_clusters_zero_sse() {
        let data = Dataset::new("pair", array![[0.0, 0.0], [10.0, 10.0]], None).unwrap();
        let result = kmeans_fit(&data, &KmeansParams::new(2)).unwrap();
        assert_eq!(result.objective, 0.0);
        assert_ne!(result.labels[0], result.labels[1]);
    }

    #[test]
    fn k_larger_than_n_errors() {
        let data = Dataset::new("pair", array![[0.0], [1.0]], None).unwrap();
        assert!(matches!(kmeans_fit(&data, &KmeansParams::new(3)), Err(Error::InvalidSpec(_))));
    }

    #[test]
    fn separated_blobs_recovered() {
        let data = gen_blobs(
            &[
                BlobSpec { center: vec![0.0, 0.0], stddev: 0.5, count: 40 },
                BlobSpec { center: vec![10.0, 0.0], stddev: 0.5, count: 40 },
                BlobSpec { center: vec![0.0, 10.0], stddev: 0.5, count: 40 },
            ],
            5,
        )
        .unwrap();
        let result = kmeans_fit(&data, &KmeansParams::new(3)).unwrap();
        let nmi = metrics::nmi(data.labels.as_ref().unwrap(), &result.labels).unwrap();
        assert_eq!(nmi, 1.0);
    }

    #[test]
    fn deterministic_per_params() {
        let data = gen_blobs(
            &[
                BlobSpec { center: vec![0.0, 0.0], stddev: 1.5, count: 60 },
                BlobSpec { center: vec![4.0, 0.0], stddev: 1.5, count: 60 },
            ],
            9,
        )
        .unwrap();
        let params = KmeansParams { seed: 42, ..KmeansParams::new(2) };
        let a = kmeans_fit(&data, &params).unwrap();
        let b = kmeans_fit(&data, &params).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sse_non_increasing_within_restart() {
        let data = gen_blobs(
            &[
                BlobSpec { center: vec![0.0, 0.0], stddev: 2.0, count: 80 },
                BlobSpec { center: vec![3.0, 1.0], stddev: 2.0, count: 80 },
            ],
            13,
        )
        .unwrap();
        let params = KmeansParams { k: 4, ..KmeansParams::new(4) };
        for restart in 0..5 {
            let outcome = lloyd(&data, &params, restart);
            for w in outcome.sse_trace.windows(2) {
                assert!(w[1] <= w[0] + 1e-9, "SSE increased: {:?}", outcome.sse_trace);
            }
        }
    }

    #[test]
    fn row_permutation_invariant_up_to_relabeling() {
        // On a well-separated dataset the optimum is unique, so shuffling
        // rows changes labels only by permutation.
        let data = gen_blobs(
            &[
                BlobSpec { center: vec![0.0, 0.0], stddev: 0.4, count: 30 },
                BlobSpec { center: vec![8.0, 0.0], stddev: 0.4, count: 30 },
                BlobSpec { center: vec![0.0, 8.0], stddev: 0.4, count: 30 },
            ],
            3,
        )
        .unwrap();
        let n = data.n();
        let mut rng = rng::stream(7, 0);
        let perm = rng::sample_indices(&mut rng, n, n);
        let mut shuffled_points = ndarray::Array2::zeros((n, data.d()));
        for (new_i, &old_i) in perm.iter().enumerate() {
            shuffled_points.row_mut(new_i).assign(&data.points.row(old_i));
        }
        let shuffled = Dataset::new("shuffled", shuffled_points, None).unwrap();
        let params = KmeansParams::new(3);
        let orig = kmeans_fit(&data, &params).unwrap();
        let shuf = kmeans_fit(&shuffled, &params).unwrap();
        let unshuffled_pred: Vec<usize> = {
            let mut v = vec![0usize; n];
            for (new_i, &old_i) in perm.iter().enumerate() {
                v[old_i] = shuf.labels[new_i];
            }
            v
        };
        let ari = metrics::ari(&orig.labels, &unshuffled_pred).unwrap();
        assert_eq!(ari, 1.0);
    }
}
