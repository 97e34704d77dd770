//! Cluster-as-Distribution clustering toolkit.
//!
//! A cluster is treated as a set of i.i.d. samples from an unknown
//! distribution, represented in feature space by its kernel mean embedding.
//! The point-to-point kernel underneath is the Isolation Kernel: the fraction
//! of random Voronoi partitions in which two points share a cell.
//!
//! The crate provides:
//! - [`dataset`]: deterministic synthetic benchmark generators and CSV I/O,
//! - [`ikernel`]: the Isolation Kernel and its explicit sparse feature map,
//! - [`dkernel`]: kernel mean embeddings, distribution-level similarities,
//!   the clustering objective, and graph-weight identities,
//! - [`kbc`]: Kernel Bounded Clustering (threshold-chained seeding, argmax
//!   assignment, greedy refinement),
//! - [`kmeans`]: the Lloyd/k-means++ baseline,
//! - [`metrics`]: NMI and ARI external evaluation.
//!
//! All randomized procedures take explicit seeds and are bit-reproducible;
//! see [`rng`] for the exact generator contract.

pub mod dataset;
pub mod dkernel;
pub mod error;
pub mod ikernel;
pub mod kbc;
pub mod kmeans;
pub mod metrics;
pub mod rng;

pub use dataset::Dataset;
pub use dkernel::{MeanMap, Partition};
pub use error::{Error, Result};
pub use ikernel::{FeatureVector, IsolationModel};
pub use kbc::{ClusteringResult, KbcParams};
pub use kmeans::KmeansParams;
