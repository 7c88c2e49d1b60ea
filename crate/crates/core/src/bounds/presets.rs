//! Architecture configurations, including the built-in preset table.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::{ArchKind, AttnParams, Block};
use crate::error::{ensure_param, Error, Result};

pub(crate) const DEFAULT_K: usize = 1;
pub(crate) const DEFAULT_CONV_T: f64 = 2.0;
const DEFAULT_MLP_RATIO: f64 = 4.0;

const PRESETS_JSON: &str = include_str!("../../data/presets.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stage {
    pub channels: usize,
    #[serde(default = "one")]
    pub repeat: usize,
}

fn one() -> usize {
    1
}

/// One architecture to evaluate. Unset optional fields take defaults:
/// `t = 2 sqrt(d)` (attention) or `2` (convolution), `s = 3 sigma`,
/// `k = 1`, MLP ratio 4, `gamma_inf = 1`, `bn_lip = gamma_inf`, and MLP
/// operator norms from the Gaussian tail bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchitectureConfig {
    pub name: String,
    pub kind: ArchKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub block: Option<Block>,
    pub sigma: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub heads: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_channels: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub stages: Vec<Stage>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mlp_ratio: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_inf: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bn_lip: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w1_norm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w2_norm: Option<f64>,
}

impl ArchitectureConfig {
    pub fn attention(name: &str, sigma: f64, d: usize, heads: usize) -> Self {
        Self {
            name: name.to_string(),
            kind: ArchKind::Attention,
            block: None,
            sigma,
            d: Some(d),
            heads: Some(heads),
            t: None,
            s: None,
            k: None,
            input_channels: None,
            stages: Vec::new(),
            mlp_ratio: None,
            gamma_inf: None,
            bn_lip: None,
            w1_norm: None,
            w2_norm: None,
        }
    }

    pub fn convolution(name: &str, sigma: f64, k: usize, stages: Vec<Stage>) -> Self {
        Self {
            kind: ArchKind::Convolution,
            d: None,
            heads: None,
            k: Some(k),
            stages,
            ..Self::attention(name, sigma, 1, 1)
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure_param(self.sigma > 0.0 && self.sigma.is_finite(), || {
            format!("sigma must be positive, got {}", self.sigma)
        })?;
        if let Some(t) = self.t {
            ensure_param(t > 0.0 && t.is_finite(), || format!("t must be positive, got {t}"))?;
        }
        for (name, v) in [
            ("s", self.s),
            ("mlp_ratio", self.mlp_ratio),
            ("gamma_inf", self.gamma_inf),
            ("bn_lip", self.bn_lip),
            ("w1_norm", self.w1_norm),
            ("w2_norm", self.w2_norm),
        ] {
            if let Some(v) = v {
                ensure_param(v >= 0.0 && v.is_finite(), || {
                    format!("{name} must be non-negative, got {v}")
                })?;
            }
        }
        match self.kind {
            ArchKind::Attention => {
                ensure_param(self.d.is_some_and(|d| d >= 1), || {
                    format!("{}: attention needs d >= 1", self.name)
                })?;
                ensure_param(self.heads.is_some_and(|m| m >= 1), || {
                    format!("{}: attention needs M >= 1", self.name)
                })?;
                if self.block == Some(Block::Bottleneck) {
                    return Err(Error::Parameter(format!(
                        "{}: bottleneck blocks need a convolution architecture",
                        self.name
                    )));
                }
            }
            ArchKind::Convolution => {
                ensure_param(!self.stages.is_empty(), || {
                    format!("{}: convolution needs at least one stage", self.name)
                })?;
                ensure_param(
                    self.stages.iter().all(|s| s.channels >= 1 && s.repeat >= 1),
                    || format!("{}: stage channels and repeats must be >= 1", self.name),
                )?;
                if self.block == Some(Block::Transformer) {
                    return Err(Error::Parameter(format!(
                        "{}: transformer blocks need an attention architecture",
                        self.name
                    )));
                }
            }
        }
        Ok(())
    }

    /// Attention parameters with defaults filled in.
    pub fn attn_params(&self) -> Result<AttnParams> {
        let (Some(d), Some(heads)) = (self.d, self.heads) else {
            return Err(Error::Parameter(format!(
                "{}: attention parameters need d and M",
                self.name
            )));
        };
        let mut p = AttnParams::with_defaults(self.sigma, d, heads);
        if let Some(t) = self.t {
            p.t = t;
        }
        if let Some(s) = self.s {
            p.s = s;
        }
        p.validate()?;
        Ok(p)
    }

    /// Layer widths in order, with repeats expanded. The input channel count
    /// is not a layer width and is left out.
    pub fn channel_ladder(&self) -> Vec<usize> {
        self.stages
            .iter()
            .flat_map(|s| std::iter::repeat_n(s.channels, s.repeat))
            .collect()
    }

    pub fn gamma_inf(&self) -> f64 {
        self.gamma_inf.unwrap_or(1.0)
    }

    pub fn bn_lip(&self) -> f64 {
        self.bn_lip.unwrap_or_else(|| self.gamma_inf())
    }

    pub fn mlp_ratio(&self) -> f64 {
        self.mlp_ratio.unwrap_or(DEFAULT_MLP_RATIO)
    }
}

pub fn presets() -> &'static [ArchitectureConfig] {
    static TABLE: OnceLock<Vec<ArchitectureConfig>> = OnceLock::new();
    TABLE.get_or_init(|| serde_json::from_str(PRESETS_JSON).expect("bundled preset table parses"))
}

pub fn preset_names() -> Vec<&'static str> {
    presets().iter().map(|p| p.name.as_str()).collect()
}

pub fn preset(name: &str) -> Result<ArchitectureConfig> {
    presets()
        .iter()
        .find(|p| p.name.eq_ignore_ascii_case(name))
        .cloned()
        .ok_or_else(|| {
            Error::Parameter(format!(
                "unknown preset {name:?}; known: {}",
                preset_names().join(", ")
            ))
        })
}
