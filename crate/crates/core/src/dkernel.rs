//! The distributional kernel layer.
//!
//! A point set is represented by its kernel mean embedding: the arithmetic
//! mean of its members' feature vectors. The similarity of two sets is the
//! inner product of their embeddings, which equals the average pairwise
//! kernel value over the two sets. On top of that sit the clustering
//! objective (each point's similarity to its own cluster's distribution,
//! summed) and the graph-weight identities relating within-cluster
//! association, between-cluster cut, and the constant total weight.

use ndarray::ArrayView2;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::ikernel::{FeatureVector, IsolationModel};

/// Kernel mean embedding of a non-empty point set.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanMap {
    /// Dense length `t * psi` weights, partition-major.
    pub weights: Vec<f64>,
    pub member_count: usize,
    pub psi: usize,
    pub t: usize,
}

impl MeanMap {
    /// Mean of the given feature vectors.
    pub fn from_features<'a, I>(psi: usize, t: usize, features: I) -> Result<MeanMap>
    where
        I: IntoIterator<Item = &'a FeatureVector>,
    {
        let mut weights = vec![0.0; t * psi];
        let w = 1.0 / (t as f64).sqrt();
        let mut count = 0usize;
        for fv in features {
            debug_assert_eq!(fv.cell_ids.len(), t);
            for (p, &cell) in fv.cell_ids.iter().enumerate() {
                weights[p * psi + cell as usize] += w;
            }
            count += 1;
        }
        if count == 0 {
            return Err(Error::EmptyCluster("mean map of an empty point set".into()));
        }
        let inv = 1.0 / count as f64;
        for v in &mut weights {
            *v *= inv;
        }
        Ok(MeanMap { weights, member_count: count, psi, t })
    }

    /// Inner product of two mean embeddings; equals the average pairwise
    /// kernel value between the underlying sets.
    pub fn dot(&self, other: &MeanMap) -> Result<f64> {
        if self.weights.len() != other.weights.len() {
            return Err(Error::Shape { expected: self.weights.len(), found: other.weights.len() });
        }
        Ok(self.weights.iter().zip(&other.weights).map(|(a, b)| a * b).sum())
    }

    /// Inner product with a single point's feature vector.
    pub fn dot_feature(&self, fv: &FeatureVector) -> Result<f64> {
        if fv.cell_ids.len() != self.t {
            return Err(Error::Shape { expected: self.t, found: fv.cell_ids.len() });
        }
        let w = 1.0 / (self.t as f64).sqrt();
        let mut acc = 0.0;
        for (p, &cell) in fv.cell_ids.iter().enumerate() {
            acc += self.weights[p * self.psi + cell as usize];
        }
        Ok(acc * w)
    }
}

/// Mean embedding of a set of points given as matrix rows.
pub fn mean_map(model: &IsolationModel, points: ArrayView2<f64>) -> Result<MeanMap> {
    if points.nrows() == 0 {
        return Err(Error::EmptyCluster("mean map of an empty point set".into()));
    }
    let features: Vec<FeatureVector> = points
        .rows()
        .into_iter()
        .map(|row| model.transform(row.as_slice().expect("row-major layout")))
        .collect::<Result<_>>()?;
    MeanMap::from_features(model.psi, model.t, features.iter())
}

/// Distribution-to-distribution similarity.
pub fn k_dist(mm_x: &MeanMap, mm_y: &MeanMap) -> Result<f64> {
    mm_x.dot(mm_y)
}

/// Point-to-distribution similarity: the average kernel value between `x`
/// and the set's members.
pub fn point_to_dist(model: &IsolationModel, x: &[f64], mm: &MeanMap) -> Result<f64> {
    mm.dot_feature(&model.transform(x)?)
}

/// A hard partition of `n` points into `k` non-empty clusters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    pub labels: Vec<usize>,
    pub k: usize,
}

impl Partition {
    pub fn new(labels: Vec<usize>, k: usize) -> Result<Partition> {
        if k == 0 || labels.is_empty() {
            return Err(Error::InvalidSpec("partition needs k >= 1 and n >= 1".into()));
        }
        let mut seen = vec![false; k];
        for &l in &labels {
            if l >= k {
                return Err(Error::InvalidSpec(format!("label {l} out of range [0, {k})")));
            }
            seen[l] = true;
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::EmptyCluster(format!("cluster {missing} has no members")));
        }
        Ok(Partition { labels, k })
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    /// Member indices per cluster.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut members = vec![Vec::new(); self.k];
        for (i, &l) in self.labels.iter().enumerate() {
            members[l].push(i);
        }
        members
    }
}

fn cluster_mean_maps(
    model: &IsolationModel,
    features: &[FeatureVector],
    part: &Partition,
) -> Result<Vec<MeanMap>> {
    part.members()
        .iter()
        .map(|idx| MeanMap::from_features(model.psi, model.t, idx.iter().map(|&i| &features[i])))
        .collect()
}

/// The clustering objective: the sum over clusters of each member's
/// similarity to its own cluster's distribution. Algebraically equal to the
/// sum over clusters of self-similarity times cluster size; both forms are
/// checked against each other in debug builds.
pub fn objective(model: &IsolationModel, data: &Dataset, part: &Partition) -> Result<f64> {
    if part.n() != data.n() {
        return Err(Error::Shape { expected: data.n(), found: part.n() });
    }
    let features = model.transform_all(data)?;
    objective_from_features(model, &features, part)
}

/// Objective over precomputed feature vectors.
pub fn objective_from_features(
    model: &IsolationModel,
    features: &[FeatureVector],
    part: &Partition,
) -> Result<f64> {
    let maps = cluster_mean_maps(model, features, part)?;
    let mut point_form = 0.0;
    for (i, &l) in part.labels.iter().enumerate() {
        point_form += maps[l].dot_feature(&features[i])?;
    }
    #[cfg(debug_assertions)]
    {
        let mut size_form = 0.0;
        for mm in &maps {
            size_form += mm.dot(mm)? * mm.member_count as f64;
        }
        debug_assert!(
            (point_form - size_form).abs() < 1e-9,
            "objective forms diverged: {point_form} vs {size_form}"
        );
    }
    Ok(point_form)
}

/// Total graph weight between two point sets: `|X| * |Y|` times their
/// distribution similarity, i.e. the full pairwise kernel double sum.
pub fn total_weight(model: &IsolationModel, x: ArrayView2<f64>, y: ArrayView2<f64>) -> Result<f64> {
    let mx = mean_map(model, x)?;
    let my = mean_map(model, y)?;
    Ok(x.nrows() as f64 * y.nrows() as f64 * k_dist(&mx, &my)?)
}

/// Split the constant total graph weight into within-cluster association and
/// between-cluster cut: `within + cut = total`.
pub fn cut_association_decompose(
    model: &IsolationModel,
    data: &Dataset,
    part: &Partition,
) -> Result<(f64, f64, f64)> {
    if part.n() != data.n() {
        return Err(Error::Shape { expected: data.n(), found: part.n() });
    }
    let features = model.transform_all(data)?;
    let maps = cluster_mean_maps(model, &features, part)?;
    let global = MeanMap::from_features(model.psi, model.t, features.iter())?;
    let n = data.n() as f64;
    let total = n * n * global.dot(&global)?;
    let mut within = 0.0;
    let mut cut = 0.0;
    for mm in &maps {
        let size = mm.member_count as f64;
        let self_w = size * size * mm.dot(mm)?;
        within += self_w;
        // W(C, complement) = W(C, X) - W(C, C).
        cut += size * n * mm.dot(&global)? - self_w;
    }
    Ok((within, cut, total))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{gen_blobs, BlobSpec};
    use crate::ikernel::IsolationModel;
    use crate::rng;
    use ndarray::{array, Array2};

    fn cross_model() -> IsolationModel {
        IsolationModel::from_anchors(vec![0.0, 0.0, 10.0, 10.0, 0.0, 10.0, 10.0, 0.0], 2, 2, 2, 0).unwrap()
    }

    /// Exhaustive pairwise-kappa double sum, the independent oracle.
    fn brute_double_sum(model: &IsolationModel, xs: &Array2<f64>, ys: &Array2<f64>) -> f64 {
        let mut acc = 0.0;
        for i in 0..xs.nrows() {
            for j in 0..ys.nrows() {
                acc += model
                    .kappa(xs.row(i).as_slice().unwrap(), ys.row(j).as_slice().unwrap())
                    .unwrap();
            }
        }
        acc
    }

    fn random_points(model_d: usize, n: usize, seed: u64) -> Array2<f64> {
        let mut rng = rng::stream(seed, 0xd15e);
        Array2::from_shape_fn((n, model_d), |_| 10.0 * rng::uniform_f64(&mut rng) - 5.0)
    }

    fn fitted_model(seed: u64) -> IsolationModel {
        let data = gen_blobs(
            &[
                BlobSpec { center: vec![0.0, 0.0], stddev: 2.0, count: 30 },
                BlobSpec { center: vec![3.0, -2.0], stddev: 2.0, count: 30 },
            ],
            seed,
        )
        .unwrap();
        IsolationModel::fit(&data, 4, 16, seed).unwrap()
    }

    #[test]
    fn singleton_mean_map_is_feature_vector() {
        let model = cross_model();
        let x = [1.0, 2.0];
        let mm = mean_map(&model, array![[1.0, 2.0]].view()).unwrap();
        let fv = model.transform(&x).unwrap();
        assert_eq!(mm.weights, fv.to_dense(model.psi));
        assert_eq!(mm.member_count, 1);
    }

    #[test]
    fn two_point_self_similarity_hand_case() {
        let model = cross_model();
        let pts = array![[1.0, 2.0], [2.0, 1.0]];
        let mm = mean_map(&model, pts.view()).unwrap();
        let s = k_dist(&mm, &mm).unwrap();
        assert!((s - 0.75).abs() < 1e-12);
    }

    #[test]
    fn identical_members_give_unit_self_similarity() {
        let model = cross_model();
        let pts = array![[3.0, 4.0], [3.0, 4.0], [3.0, 4.0]];
        let mm = mean_map(&model, pts.view()).unwrap();
        assert!((k_dist(&mm, &mm).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn empty_set_error() {
        let model = cross_model();
        let pts = Array2::<f64>::zeros((0, 2));
        assert!(matches!(mean_map(&model, pts.view()), Err(Error::EmptyCluster(_))));
    }

    #[test]
    fn mean_map_block_sums() {
        let model = fitted_model(3);
        let pts = random_points(2, 7, 4);
        let mm = mean_map(&model, pts.view()).unwrap();
        let expect = 1.0 / (model.t as f64).sqrt();
        for p in 0..model.t {
            let block: f64 = mm.weights[p * model.psi..(p + 1) * model.psi].iter().sum();
            assert!((block - expect).abs() < 1e-12);
        }
        assert!(mm.weights.iter().all(|&v| v >= 0.0));
        let self_sim = mm.dot(&mm).unwrap();
        assert!(self_sim > 0.0 && self_sim <= 1.0 + 1e-12);
    }

    #[test]
    fn singleton_k_dist_is_kappa() {
        let model = fitted_model(5);
        let x = [0.5, -0.5];
        let y = [1.5, 2.0];
        let mx = mean_map(&model, array![[0.5, -0.5]].view()).unwrap();
        let my = mean_map(&model, array![[1.5, 2.0]].view()).unwrap();
        assert!((k_dist(&mx, &my).unwrap() - model.kappa(&x, &y).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn k_dist_matches_brute_force_on_random_sets() {
        for seed in 0..30u64 {
            let model = fitted_model(seed);
            let mut rng = rng::stream(seed, 1);
            let nx = 1 + rng::index(&mut rng, 8);
            let ny = 1 + rng::index(&mut rng, 8);
            let xs = random_points(2, nx, seed * 2 + 1);
            let ys = random_points(2, ny, seed * 2 + 2);
            let got = k_dist(&mean_map(&model, xs.view()).unwrap(), &mean_map(&model, ys.view()).unwrap()).unwrap();
            let want = brute_double_sum(&model, &xs, &ys) / (nx * ny) as f64;
            assert!((got - want).abs() < 1e-12, "seed {seed}: {got} vs {want}");
        }
    }

    #[test]
    fn point_to_dist_hand_case_and_oracle() {
        let model = cross_model();
        let pts = array![[1.0, 2.0], [2.0, 1.0]];
        let mm = mean_map(&model, pts.view()).unwrap();
        let got = point_to_dist(&model, &[1.0, 2.0], &mm).unwrap();
        assert!((got - 0.75).abs() < 1e-12);

        for seed in 0..30u64 {
            let model = fitted_model(seed);
            let mut rng = rng::stream(seed, 2);
            let nc = 1 + rng::index(&mut rng, 8);
            let cluster = random_points(2, nc, seed + 100);
            let x = [4.0 * rng::uniform_f64(&mut rng), 4.0 * rng::uniform_f64(&mut rng)];
            let mm = mean_map(&model, cluster.view()).unwrap();
            let got = point_to_dist(&model, &x, &mm).unwrap();
            let want: f64 = (0..nc)
                .map(|j| model.kappa(&x, cluster.row(j).as_slice().unwrap()).unwrap())
                .sum::<f64>()
                / nc as f64;
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn point_in_singleton_cluster_similarity_one() {
        let model = fitted_model(7);
        let mm = mean_map(&model, array![[1.0, 1.0]].view()).unwrap();
        assert!((point_to_dist(&model, &[1.0, 1.0], &mm).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn objective_single_cluster_and_singletons() {
        let model = fitted_model(9);
        let data = gen_blobs(
            &[BlobSpec { center: vec![0.0, 0.0], stddev: 2.0, count: 12 }],
            9,
        )
        .unwrap();
        // Single cluster: n * K(P, P).
        let part = Partition::new(vec![0; 12], 1).unwrap();
        let mm = mean_map(&model, data.points.view()).unwrap();
        let got = objective(&model, &data, &part).unwrap();
        assert!((got - 12.0 * mm.dot(&mm).unwrap()).abs() < 1e-9);

        // All singleton clusters: objective = n.
        let part = Partition::new((0..12).collect(), 12).unwrap();
        let got = objective(&model, &data, &part).unwrap();
        assert!((got - 12.0).abs() < 1e-12);
    }

    #[test]
    fn objective_two_point_hand_case() {
        let model = cross_model();
        let data = Dataset::new("pair", array![[1.0, 2.0], [2.0, 1.0]], None).unwrap();
        let part = Partition::new(vec![0, 0], 1).unwrap();
        let got = objective(&model, &data, &part).unwrap();
        assert!((got - 1.5).abs() < 1e-12);
    }

    #[test]
    fn total_weight_identities() {
        let model = cross_model();
        let pts = array![[1.0, 2.0], [2.0, 1.0]];
        let w = total_weight(&model, pts.view(), pts.view()).unwrap();
        assert!((w - 3.0).abs() < 1e-12);

        // Singletons reduce to kappa; symmetry on random sets.
        for seed in 0..20u64 {
            let model = fitted_model(seed);
            let xs = random_points(2, 5, seed + 300);
            let ys = random_points(2, 4, seed + 400);
            let wxy = total_weight(&model, xs.view(), ys.view()).unwrap();
            let wyx = total_weight(&model, ys.view(), xs.view()).unwrap();
            assert!((wxy - wyx).abs() < 1e-9);
            let want = brute_double_sum(&model, &xs, &ys);
            assert!((wxy - want).abs() < 1e-9);
        }
    }

    #[test]
    fn decompose_single_cluster_and_singletons() {
        let model = fitted_model(11);
        let data = gen_blobs(&[BlobSpec { center: vec![0.0, 0.0], stddev: 2.0, count: 10 }], 11).unwrap();
        let single = Partition::new(vec![0; 10], 1).unwrap();
        let (within, cut, total) = cut_association_decompose(&model, &data, &single).unwrap();
        assert!(cut.abs() < 1e-9);
        assert!((within - total).abs() < 1e-9);

        let singletons = Partition::new((0..10).collect(), 10).unwrap();
        let (within, cut, total) = cut_association_decompose(&model, &data, &singletons).unwrap();
        assert!((within - 10.0).abs() < 1e-9);
        assert!((within + cut - total).abs() < 1e-9);
    }

    #[test]
    fn decompose_conservation_random_partitions() {
        for seed in 0..30u64 {
            let data = gen_blobs(
                &[
                    BlobSpec { center: vec![0.0, 0.0], stddev: 1.5, count: 15 },
                    BlobSpec { center: vec![3.0, 3.0], stddev: 1.5, count: 15 },
                ],
                seed,
            )
            .unwrap();
            let model = IsolationModel::fit(&data, 4, 16, seed).unwrap();
            let mut rng = rng::stream(seed, 3);
            let k = 2 + rng::index(&mut rng, 3);
            let mut labels: Vec<usize> = (0..data.n()).map(|_| rng::index(&mut rng, k)).collect();
            for c in 0..k {
                labels[c] = c; // ensure non-empty
            }
            let part = Partition::new(labels, k).unwrap();
            let (within, cut, total) = cut_association_decompose(&model, &data, &part).unwrap();
            // Independent oracle: exhaustive pairwise sums.
            let mut o_within = 0.0;
            let mut o_cut = 0.0;
            for i in 0..data.n() {
                for j in 0..data.n() {
                    let kv = model
                        .kappa(data.points.row(i).as_slice().unwrap(), data.points.row(j).as_slice().unwrap())
                        .unwrap();
                    if part.labels[i] == part.labels[j] {
                        o_within += kv;
                    } else {
                        o_cut += kv;
                    }
                }
            }
            assert!((within - o_within).abs() < 1e-9, "within {within} vs {o_within}");
            assert!((cut - o_cut).abs() < 1e-9, "cut {cut} vs {o_cut}");
            assert!((within + cut - total).abs() < 1e-9);
        }
    }

    #[test]
    fn partition_validation() {
        assert!(Partition::new(vec![0, 1, 0], 2).is_ok());
        assert!(matches!(Partition::new(vec![0, 0, 0], 2), Err(Error::EmptyCluster(_))));
        assert!(matches!(Partition::new(vec![0, 2], 2), Err(Error::InvalidSpec(_))));
    }
}
