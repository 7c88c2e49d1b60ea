//! Layer-wise topological robustness analysis.
//!
//! The crate turns per-layer activation point clouds into persistence
//! diagrams, measures how far adjacent layers move in diagram space, and
//! summarizes the resulting change-rate landscape as a single TopoLip score.
//! Alongside the measurement pipeline it carries closed-form
//! Wasserstein-Lipschitz bounds for attention and convolution layers and a
//! small reference lab of the corresponding forward and mean-field maps used
//! to check those bounds empirically.

pub mod assignment;
pub mod bounds;
pub mod cloud;
pub mod diagram_io;
pub mod error;
pub mod meanfield;
pub mod metrics;
pub mod persistence;
pub mod pipeline;

pub use cloud::{pairwise_distances, subsample_cloud, DistanceMatrix, PointCloud};
pub use error::{Error, Result};
pub use metrics::{
    bottleneck_distance, cloud_wasserstein, diagram_wasserstein, DistanceKind, DistanceValue,
    EssentialPolicy, HomCombine,
};
pub use persistence::{rips_persistence, DiagramPoint, PersistenceDiagram};
