//! Reference forward maps and a Monte-Carlo estimator of empirical
//! Wasserstein-Lipschitz constants, used to check the closed-form bounds.

mod estimate;
pub mod layers;
mod maps;
mod sampling;

use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;
use crate::error::Result;

pub use estimate::{estimate_lipschitz_w1, LipschitzEstimate, PAIR_RETRIES};
pub use maps::{attention_matrix, mean_field_attention_map, mean_field_conv_map, ConvKernel};
pub use sampling::{
    sample_attention_weights, sample_conv_kernel, sample_conv_weights, sample_measure,
    sample_measure_pair, Support,
};

/// Uniform empirical measure `(1/n) sum_i delta_{x_i}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EmpiricalMeasure(pub PointCloud);

impl EmpiricalMeasure {
    pub fn from_points<P: AsRef<[f64]>>(points: &[P]) -> Result<Self> {
        PointCloud::from_points(points).map(Self)
    }

    pub fn atoms(&self) -> &PointCloud {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    /// Applies `f` to every atom.
    pub fn push_forward(&self, f: impl FnMut(&[f64]) -> Vec<f64>) -> Result<Self> {
        self.0.map_points(f).map(Self)
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim()];
        for p in self.0.points() {
            for (a, v) in m.iter_mut().zip(p) {
                *a += v;
            }
        }
        let n = self.len() as f64;
        m.iter_mut().for_each(|a| *a /= n);
        m
    }

    pub fn max_norm(&self) -> f64 {
        self.0
            .points()
            .map(|p| p.iter().map(|v| v * v).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.0.as_flat().iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}
