//! The layer-wise measurement procedure: per-layer persistence diagrams,
//! adjacent-layer diagram distances, change rates and their maximum.

pub mod landscape;
pub mod trace;

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cloud::{pairwise_distances, subsample_cloud};
use crate::error::{ensure_param, Error, Result};
use crate::metrics::{combined_wasserstein, EssentialPolicy, HomCombine};
use crate::persistence::{rips_persistence, PersistenceDiagram};

pub use landscape::{
    change_rates, cumulative_rates, normalize_depth, topo_lip, ChangeRateLandscape,
    DEFAULT_EPSILON,
};
pub use trace::{load_trace, Layer, LayerEntry, LayerFormat, LayerTrace, Manifest};

/// Diagrams of one layer, indexed by homology dimension.
pub type DiagramSet = Vec<PersistenceDiagram>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub p: f64,
    pub max_points: usize,
    pub seed: u64,
    pub max_dim: usize,
    pub epsilon: f64,
    pub grid_size: usize,
    pub essential: EssentialPolicy,
    pub combine: HomCombine,
    /// Filtration cap; `None` uses each layer's diameter.
    pub max_scale: Option<f64>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            p: 1.0,
            max_points: 256,
            seed: 0,
            max_dim: 1,
            epsilon: DEFAULT_EPSILON,
            grid_size: 101,
            essential: EssentialPolicy::Drop,
            combine: HomCombine::Sum,
            max_scale: None,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        ensure_param(self.p >= 1.0 && self.p.is_finite(), || {
            format!("p must be a finite value >= 1, got {}", self.p)
        })?;
        ensure_param(self.max_points >= 1, || "max_points must be >= 1".into())?;
        ensure_param(self.max_dim <= 1, || "max_dim must be 0 or 1".into())?;
        ensure_param(self.epsilon > 0.0, || "epsilon must be positive".into())?;
        ensure_param(self.grid_size >= 2, || "grid_size must be >= 2".into())?;
        if let Some(s) = self.max_scale {
            ensure_param(s > 0.0, || format!("max_scale must be positive, got {s}"))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopoLipReport {
    pub model_name: String,
    pub p: f64,
    pub distances: Vec<f64>,
    pub rates: Vec<f64>,
    pub cumulative: Vec<f64>,
    pub topolip: f64,
    pub normalized_curve: Vec<f64>,
    pub config: PipelineConfig,
    pub seed: u64,
}

impl TopoLipReport {
    pub fn landscape(&self) -> ChangeRateLandscape {
        ChangeRateLandscape {
            distances: self.distances.clone(),
            rates: self.rates.clone(),
            cumulative: self.cumulative.clone(),
            p: self.p,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }
}

/// Diagrams of a single cloud, after subsampling.
pub fn cloud_diagrams(
    cloud: &crate::cloud::PointCloud,
    max_points: usize,
    seed: u64,
    max_dim: usize,
    max_scale: Option<f64>,
) -> Result<DiagramSet> {
    let sample = subsample_cloud(cloud, max_points, seed)?;
    let dist = pairwise_distances(&sample);
    let scale = match max_scale {
        Some(s) => s,
        // A single point (or coincident points) has diameter 0; any positive
        // cap gives the same diagrams.
        None => {
            let d = dist.diameter();
            if d > 0.0 {
                d
            } else {
                1.0
            }
        }
    };
    rips_persistence(&dist, max_dim, scale)
}

/// Persistence diagrams for every layer, in layer order. Every layer is
/// subsampled with the same seed, so equally sized layers keep the same rows.
pub fn layer_diagrams(
    trace: &LayerTrace,
    max_points: usize,
    seed: u64,
    max_dim: usize,
    max_scale: Option<f64>,
) -> Result<Vec<DiagramSet>> {
    trace
        .layers
        .par_iter()
        .map(|layer| cloud_diagrams(&layer.cloud, max_points, seed, max_dim, max_scale))
        .collect()
}

/// Combined diagram distance between each pair of adjacent layers.
pub fn adjacent_distances(
    sets: &[DiagramSet],
    p: f64,
    essential: EssentialPolicy,
    combine: HomCombine,
) -> Result<Vec<f64>> {
    if sets.len() < 2 {
        return Err(Error::Usage(format!(
            "adjacent distances need at least 2 diagram sets, got {}",
            sets.len()
        )));
    }
    (0..sets.len() - 1)
        .into_par_iter()
        .map(|i| combined_wasserstein(&sets[i], &sets[i + 1], p, essential, combine))
        .collect()
}

/// Builds the report from precomputed layer diagrams.
pub fn report_from_diagrams(
    model_name: &str,
    sets: &[DiagramSet],
    config: &PipelineConfig,
) -> Result<TopoLipReport> {
    config.validate()?;
    let distances = adjacent_distances(sets, config.p, config.essential, config.combine)?;
    if distances.len() < 2 {
        return Err(Error::Usage(format!(
            "change rates need at least 3 layers, trace has {}",
            sets.len()
        )));
    }
    let landscape = ChangeRateLandscape::from_distances(distances, config.p, config.epsilon)?;
    let normalized_curve = normalize_depth(&landscape.rates, config.grid_size)?;
    Ok(TopoLipReport {
        model_name: model_name.to_string(),
        p: config.p,
        topolip: landscape.topo_lip(),
        distances: landscape.distances,
        rates: landscape.rates,
        cumulative: landscape.cumulative,
        normalized_curve,
        config: config.clone(),
        seed: config.seed,
    })
}

pub fn run_on_trace(trace: &LayerTrace, config: &PipelineConfig) -> Result<TopoLipReport> {
    config.validate()?;
    trace.validate()?;
    let sets = layer_diagrams(
        trace,
        config.max_points,
        config.seed,
        config.max_dim,
        config.max_scale,
    )?;
    report_from_diagrams(&trace.model_name, &sets, config)
}

/// Loads the trace at `trace_path` and runs the full procedure.
pub fn run_pipeline(trace_path: &Path, config: &PipelineConfig) -> Result<TopoLipReport> {
    config.validate()?;
    let trace = load_trace(trace_path)?;
    run_on_trace(&trace, config)
}
