//! The Isolation Kernel.
//!
//! A model is `t` independent random Voronoi partitions, each induced by
//! `psi` anchor points sampled without replacement from the fitted data.
//! The kernel value of two points is the fraction of partitions in which
//! they fall into the same cell, which equals the inner product of their
//! explicit feature maps: a point maps to a sparse vector in R^(t*psi) with
//! value `1/sqrt(t)` at the cell it occupies in each partition.

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::rng;

const TAG_ANCHORS: u64 = 0x414e_4348;

/// Sparse feature map of one point: the occupied cell per partition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureVector {
    /// `cell_ids[p]` is the index of the nearest anchor in partition `p`.
    pub cell_ids: Vec<u32>,
}

impl FeatureVector {
    /// Inner product with another feature vector: shared cells over `t`.
    pub fn dot(&self, other: &FeatureVector) -> f64 {
        debug_assert_eq!(self.cell_ids.len(), other.cell_ids.len());
        let matches = self
            .cell_ids
            .iter()
            .zip(&other.cell_ids)
            .filter(|(a, b)| a == b)
            .count();
        matches as f64 / self.cell_ids.len() as f64
    }

    /// The implied dense vector in R^(t*psi): `1/sqrt(t)` per occupied cell.
    pub fn to_dense(&self, psi: usize) -> Vec<f64> {
        let t = self.cell_ids.len();
        let mut dense = vec![0.0; t * psi];
        let w = 1.0 / (t as f64).sqrt();
        for (p, &cell) in self.cell_ids.iter().enumerate() {
            dense[p * psi + cell as usize] = w;
        }
        dense
    }
}

/// A fitted Isolation Kernel: `t` partitions of `psi` anchors each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsolationModel {
    /// Schema version of the serialized document.
    pub version: u32,
    pub psi: usize,
    pub t: usize,
    pub d: usize,
    /// Seed the model was fitted with, recorded for provenance.
    pub seed: u64,
    /// Flat `t * psi * d` anchor coordinates, partition-major.
    anchors: Vec<f64>,
}

impl IsolationModel {
    /// Fit a model by sampling `psi` distinct anchor points per partition,
    /// uniformly without replacement from the data rows. Each partition uses
    /// an independent stream derived from `(seed, partition index)`, so the
    /// result is independent of evaluation order.
    pub fn fit(data: &Dataset, psi: usize, t: usize, seed: u64) -> Result<IsolationModel> {
        if psi == 0 || t == 0 {
            return Err(Error::InvalidSpec(format!("psi and t must be >= 1, got psi={psi}, t={t}")));
        }
        let n = data.n();
        let d = data.d();
        if psi > n {
            return Err(Error::InsufficientData { needed: psi, available: n });
        }
        let mut anchors = vec![0.0; t * psi * d];
        for p in 0..t {
            let mut stream = rng::stream(rng::mix(seed, TAG_ANCHORS), p as u64);
            // Walk a full shuffle, skipping rows that duplicate an anchor
            // already chosen for this partition.
            let order = rng::sample_indices(&mut stream, n, n);
            let mut chosen: Vec<usize> = Vec::with_capacity(psi);
            for &row in &order {
                let candidate = data.points.row(row);
                let duplicate = chosen.iter().any(|&c| data.points.row(c) == candidate);
                if !duplicate {
                    chosen.push(row);
                    if chosen.len() == psi {
                        break;
                    }
                }
            }
            if chosen.len() < psi {
                return Err(Error::DegenerateData { needed: psi });
            }
            for (a, &row) in chosen.iter().enumerate() {
                let base = (p * psi + a) * d;
                for c in 0..d {
                    anchors[base + c] = data.points[[row, c]];
                }
            }
        }
        Ok(IsolationModel { version: 1, psi, t, d, seed, anchors })
    }

    /// Build a model from explicit anchors (`t * psi * d`, partition-major).
    pub fn from_anchors(anchors: Vec<f64>, psi: usize, t: usize, d: usize, seed: u64) -> Result<IsolationModel> {
        if anchors.len() != t * psi * d {
            return Err(Error::Shape { expected: t * psi * d, found: anchors.len() });
        }
        let model = IsolationModel { version: 1, psi, t, d, seed, anchors };
        for p in 0..t {
            for a in 0..psi {
                for b in (a + 1)..psi {
                    if model.anchor(p, a) == model.anchor(p, b) {
                        return Err(Error::DegenerateData { needed: psi });
                    }
                }
            }
        }
        Ok(model)
    }

    /// Anchor `a` of partition `p` as a coordinate slice.
    pub fn anchor(&self, p: usize, a: usize) -> &[f64] {
        let base = (p * self.psi + a) * self.d;
        &self.anchors[base..base + self.d]
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.d {
            return Err(Error::Shape { expected: self.d, found: x.len() });
        }
        Ok(())
    }

    /// Map a point to its feature vector: per partition, the index of the
    /// nearest anchor in Euclidean distance, ties broken by lowest index.
    pub fn transform(&self, x: &[f64]) -> Result<FeatureVector> {
        self.check_dim(x)?;
        let mut cell_ids = Vec::with_capacity(self.t);
        for p in 0..self.t {
            let mut best = 0u32;
            let mut best_dist = f64::INFINITY;
            for a in 0..self.psi {
                let anchor = self.anchor(p, a);
                let mut dist = 0.0;
                for c in 0..self.d {
                    let dv = x[c] - anchor[c];
                    dist += dv * dv;
                }
                if dist < best_dist {
                    best_dist = dist;
                    best = a as u32;
                }
            }
            cell_ids.push(best);
        }
        Ok(FeatureVector { cell_ids })
    }

    /// Feature vectors of every row of a dataset.
    pub fn transform_all(&self, data: &Dataset) -> Result<Vec<FeatureVector>> {
        (0..data.n())
            .map(|i| self.transform(data.points.row(i).as_slice().expect("row-major layout")))
            .collect()
    }

    /// Kernel value: the fraction of partitions in which `x` and `y` share
    /// a Voronoi cell. Always a multiple of `1/t` in `[0, 1]`.
    pub fn kappa(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        Ok(self.transform(x)?.dot(&self.transform(y)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{gen_blobs, BlobSpec};
    use ndarray::array;
    use proptest::prelude::*;

    /// t=2 model over R^2: partition 0 anchors {(0,0),(10,10)},
    /// partition 1 anchors {(0,10),(10,0)}.
    pub(crate) fn cross_model() -> IsolationModel {
        IsolationModel::from_anchors(
            vec![0.0, 0.0, 10.0, 10.0, 0.0, 10.0, 10.0, 0.0],
            2,
            2,
            2,
            0,
        )
        .unwrap()
    }

    fn blob_data(n: usize, seed: u64) -> Dataset {
        gen_blobs(
            &[
                BlobSpec { center: vec![0.0, 0.0], stddev: 1.0, count: n / 2 },
                BlobSpec { center: vec![4.0, 4.0], stddev: 1.0, count: n - n / 2 },
            ],
            seed,
        )
        .unwrap()
    }

    #[test]
    fn transform_hand_case() {
        let model = cross_model();
        let fv = model.transform(&[1.0, 2.0]).unwrap();
        assert_eq!(fv.cell_ids, vec![0, 0]);
    }

    #[test]
    fn kappa_hand_case() {
        let model = cross_model();
        let k = model.kappa(&[1.0, 2.0], &[2.0, 1.0]).unwrap();
        assert_eq!(k, 0.5);
    }

    #[test]
    fn kappa_self_is_one() {
        let model = IsolationModel::fit(&blob_data(50, 1), 8, 20, 9).unwrap();
        for i in 0..5 {
            let x: Vec<f64> = blob_data(50, 1).points.row(i).to_vec();
            assert_eq!(model.kappa(&x, &x).unwrap(), 1.0);
        }
    }

    #[test]
    fn anchor_point_selects_own_cell() {
        let data = blob_data(40, 2);
        let model = IsolationModel::fit(&data, 4, 10, 3).unwrap();
        for p in 0..model.t {
            for a in 0..model.psi {
                let fv = model.transform(model.anchor(p, a)).unwrap();
                assert_eq!(fv.cell_ids[p], a as u32);
            }
        }
    }

    #[test]
    fn tie_break_lowest_anchor_index() {
        // Anchors at (-1,0) [idx 0], (2,0) [idx 1], (1,0) [idx 2], (-2,0) [idx 3];
        // x = (1.5, 0) is equidistant to anchors 1 and 2.
        let model = IsolationModel::from_anchors(
            vec![-1.0, 0.0, 2.0, 0.0, 1.0, 0.0, -2.0, 0.0],
            4,
            1,
            2,
            0,
        )
        .unwrap();
        let fv = model.transform(&[1.5, 0.0]).unwrap();
        assert_eq!(fv.cell_ids, vec![1]);
    }

    #[test]
    fn psi_one_makes_kappa_constant_one() {
        let data = blob_data(30, 4);
        let model = IsolationModel::fit(&data, 1, 5, 7).unwrap();
        let k = model.kappa(&[0.0, 0.0], &[100.0, -50.0]).unwrap();
        assert_eq!(k, 1.0);
    }

    #[test]
    fn insufficient_data_error() {
        let data = blob_data(4, 5);
        assert!(matches!(
            IsolationModel::fit(&data, 8, 5, 0),
            Err(Error::InsufficientData { needed: 8, available: 4 })
        ));
    }

    #[test]
    fn degenerate_data_error() {
        // Five identical points: cannot find 2 distinct anchors.
        let data = gen_blobs(&[BlobSpec { center: vec![0.0, 0.0], stddev: 0.0, count: 5 }], 0).unwrap();
        assert!(matches!(IsolationModel::fit(&data, 2, 3, 0), Err(Error::DegenerateData { needed: 2 })));
    }

    #[test]
    fn fit_is_deterministic() {
        let data = blob_data(60, 6);
        let a = IsolationModel::fit(&data, 8, 25, 42).unwrap();
        let b = IsolationModel::fit(&data, 8, 25, 42).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn dimension_mismatch_error() {
        let model = cross_model();
        assert!(matches!(model.transform(&[1.0, 2.0, 3.0]), Err(Error::Shape { expected: 2, found: 3 })));
        assert!(matches!(model.kappa(&[1.0], &[1.0, 2.0]), Err(Error::Shape { .. })));
    }

    #[test]
    fn serialization_round_trip_exact() {
        let data = blob_data(50, 8);
        let model = IsolationModel::fit(&data, 8, 30, 11).unwrap();
        let json = serde_json::to_string(&model).unwrap();
        let back: IsolationModel = serde_json::from_str(&json).unwrap();
        assert_eq!(model, back);
    }

    #[test]
    fn data_dependence_dense_vs_sparse_anchors() {
        // With anchors drawn from a tight (dense) cloud around two probe
        // points, the probes are separated more often than with anchors drawn
        // from a wide (sparse) cloud. Monotone trend over many seeds.
        let probes = (array![[0.0, 0.0], [0.6, 0.0]], ());
        let mut dense_sum = 0.0;
        let mut sparse_sum = 0.0;
        let n_seeds = 40;
        for seed in 0..n_seeds {
            let dense = gen_blobs(&[BlobSpec { center: vec![0.3, 0.0], stddev: 0.5, count: 200 }], seed).unwrap();
            let sparse = gen_blobs(&[BlobSpec { center: vec![0.3, 0.0], stddev: 5.0, count: 200 }], seed).unwrap();
            let md = IsolationModel::fit(&dense, 8, 50, seed).unwrap();
            let ms = IsolationModel::fit(&sparse, 8, 50, seed).unwrap();
            dense_sum += md.kappa(probes.0.row(0).as_slice().unwrap(), probes.0.row(1).as_slice().unwrap()).unwrap();
            sparse_sum += ms.kappa(probes.0.row(0).as_slice().unwrap(), probes.0.row(1).as_slice().unwrap()).unwrap();
        }
        assert!(
            dense_sum < sparse_sum,
            "mean kappa dense {} should be below sparse {}",
            dense_sum / n_seeds as f64,
            sparse_sum / n_seeds as f64
        );
    }

    proptest! {
        #[test]
        fn kappa_symmetric_bounded_and_quantized(seed in 0u64..200, xi in 0usize..20, yi in 0usize..20) {
            let data = blob_data(20, seed);
            let model = IsolationModel::fit(&data, 4, 16, seed).unwrap();
            let x: Vec<f64> = data.points.row(xi).to_vec();
            let y: Vec<f64> = data.points.row(yi).to_vec();
            let kxy = model.kappa(&x, &y).unwrap();
            let kyx = model.kappa(&y, &x).unwrap();
            prop_assert_eq!(kxy, kyx);
            prop_assert!((0.0..=1.0).contains(&kxy));
            let scaled = kxy * model.t as f64;
            prop_assert!((scaled - scaled.round()).abs() < 1e-12);
        }

        #[test]
        fn feature_inner_product_equals_kappa(seed in 0u64..100, xi in 0usize..20, yi in 0usize..20) {
            let data = blob_data(20, seed);
            let model = IsolationModel::fit(&data, 4, 16, seed).unwrap();
            let fx = model.transform(data.points.row(xi).as_slice().unwrap()).unwrap();
            let fy = model.transform(data.points.row(yi).as_slice().unwrap()).unwrap();
            let dense_dot: f64 = fx
                .to_dense(model.psi)
                .iter()
                .zip(fy.to_dense(model.psi))
                .map(|(a, b)| a * b)
                .sum();
            let kappa = model.kappa(
                data.points.row(xi).as_slice().unwrap(),
                data.points.row(yi).as_slice().unwrap(),
            ).unwrap();
            prop_assert!((dense_dot - kappa).abs() < 1e-12);
            // Unit norm of the implied vector.
            let norm2: f64 = fx.to_dense(model.psi).iter().map(|v| v * v).sum();
            prop_assert!((norm2 - 1.0).abs() < 1e-12);
        }
    }
}
