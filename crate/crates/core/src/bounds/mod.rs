//! Closed-form Wasserstein-Lipschitz bounds for mean-field attention and
//! convolution layers, their asymptotic orders, and the composite bounds for
//! Pre-LN Transformer and ResNet bottleneck blocks.
//!
//! Attention weights are taken i.i.d. `N(0, sigma^2)`; convolution weights
//! i.i.d. `N(0, sigma^2 / (C (2k+1)^2))`. Inputs are restricted to the ball
//! of radius `t * sigma`. Every bound holds only with the probability
//! reported next to it; callers decide what to do with that.

mod compare;
mod presets;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_param, Result};

pub use compare::{compare_architectures, CategoryComparison, Comparison, Side};
pub use presets::{preset, preset_names, presets, ArchitectureConfig, Stage};

/// The bound formulas with no argument checking. Degenerate inputs such as
/// `sigma = 0` evaluate to whatever the formula gives.
pub mod formulas {
    /// `2 t s (2 s sqrt(d) + slack) (1 + t s d^{-1/2} (2 s sqrt(d) + slack)^2)`
    /// with `s = sigma`.
    pub fn attn_single_head(sigma: f64, d: f64, t: f64, slack: f64) -> f64 {
        let op = 2.0 * sigma * d.sqrt() + slack;
        2.0 * t * sigma * op * (1.0 + t * sigma / d.sqrt() * op * op)
    }

    pub fn attn_multi_head(sigma: f64, d: f64, heads: f64, t: f64, slack: f64) -> f64 {
        let op = 2.0 * sigma * d.sqrt() + slack;
        let op2 = op * op;
        2.0 * t * sigma * heads.sqrt() * op2 * (1.0 + t * sigma * (heads / d).sqrt() * op2)
    }

    /// `(2k+1) sqrt(t sigma C (1 + 1 / ((2k+1) sqrt(C))))`
    pub fn conv(sigma: f64, channels: f64, k: f64, t: f64) -> f64 {
        let side = 2.0 * k + 1.0;
        side * (t * sigma * channels * (1.0 + 1.0 / (side * channels.sqrt()))).sqrt()
    }

    /// `(|W1| |W2| |gamma|_inf + 1)(1 + |gamma|_inf Lip(MHAttn))`
    pub fn transformer_block(mhattn: f64, w1: f64, w2: f64, gamma_inf: f64) -> f64 {
        (w1 * w2 * gamma_inf + 1.0) * (1.0 + gamma_inf * mhattn)
    }

    /// `1 + Lip(Conv)^3 Lip(BN)^3`
    pub fn bottleneck_block(conv: f64, bn_lip: f64) -> f64 {
        1.0 + conv.powi(3) * bn_lip.powi(3)
    }

    pub fn attn_order(sigma: f64, d: f64) -> f64 {
        sigma.powi(5) * d * d
    }

    pub fn mhattn_order(sigma: f64, d: f64, heads: f64) -> f64 {
        sigma.powi(6) * d.powf(2.5) * heads
    }

    pub fn conv_order(sigma: f64, channels: f64, k: f64) -> f64 {
        k * (sigma * channels).sqrt()
    }

    /// `max{1, sigma^3 d^{3/2} M, sigma^7 d^3 M, sigma^10 d^{9/2} M}`
    pub fn transformer_order(sigma: f64, d: f64, heads: f64) -> f64 {
        [
            1.0,
            sigma.powi(3) * d.powf(1.5) * heads,
            sigma.powi(7) * d.powi(3) * heads,
            sigma.powi(10) * d.powf(4.5) * heads,
        ]
        .into_iter()
        .fold(f64::MIN, f64::max)
    }

    /// `max{1, k^3 sigma^{5/2} C^3}`
    pub fn bottleneck_order(sigma: f64, channels: f64, k: f64) -> f64 {
        (k.powi(3) * sigma.powf(2.5) * channels.powi(3)).max(1.0)
    }

    /// Operator-norm tail bound for a `rows x cols` Gaussian matrix with entry
    /// std `sigma`: `sigma (sqrt(rows) + sqrt(cols)) + slack`. For square
    /// matrices this is `2 sigma sqrt(d) + slack`.
    pub fn gaussian_op_norm(sigma: f64, rows: f64, cols: f64, slack: f64) -> f64 {
        sigma * (rows.sqrt() + cols.sqrt()) + slack
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttnParams {
    pub sigma: f64,
    pub d: usize,
    pub heads: usize,
    /// Ball radius multiplier: inputs satisfy `|x| <= t sigma`.
    pub t: f64,
    /// Slack in the operator-norm tail bound.
    pub s: f64,
}

impl AttnParams {
    /// Parameters with the default choices `t = 2 sqrt(d)` and `s = 3 sigma`.
    pub fn with_defaults(sigma: f64, d: usize, heads: usize) -> Self {
        Self {
            sigma,
            d,
            heads,
            t: 2.0 * (d as f64).sqrt(),
            s: 3.0 * sigma,
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure_param(self.sigma > 0.0 && self.sigma.is_finite(), || {
            format!("sigma must be positive, got {}", self.sigma)
        })?;
        ensure_param(self.d >= 1, || "embedding dimension d must be >= 1".into())?;
        ensure_param(self.heads >= 1, || "head count M must be >= 1".into())?;
        ensure_param(self.t > 0.0 && self.t.is_finite(), || {
            format!("t must be positive, got {}", self.t)
        })?;
        ensure_param(self.s >= 0.0 && self.s.is_finite(), || {
            format!("s must be non-negative, got {}", self.s)
        })
    }

    /// `min{1 - d/t^2, 1 - 2 exp(-s^2 / (2 sigma^2))}`, floored at 0.
    pub fn probability(&self) -> f64 {
        let chebyshev = 1.0 - self.d as f64 / (self.t * self.t);
        let tail = 1.0 - 2.0 * (-(self.s * self.s) / (2.0 * self.sigma * self.sigma)).exp();
        chebyshev.min(tail).max(0.0)
    }

    /// Upper bound on `|A|_op` implied by the operator-norm tail bounds.
    pub fn certified_a_norm(&self) -> f64 {
        let op = 2.0 * self.sigma * (self.d as f64).sqrt() + self.s;
        (self.heads as f64 / self.d as f64).sqrt() * op * op
    }

    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        let sqrt_d = (self.d as f64).sqrt();
        if self.t <= sqrt_d {
            out.push(format!(
                "t = {} does not exceed sqrt(d) = {sqrt_d}; the ball qualifier is vacuous",
                self.t
            ));
        }
        let min_s = self.sigma * (2.0 * std::f64::consts::LN_2).sqrt();
        if self.s < min_s {
            out.push(format!(
                "s = {} is below sigma*sqrt(2 ln 2) = {min_s}",
                self.s
            ));
        }
        let needed = 2.0 / (self.sigma * self.sigma);
        let cert = self.certified_a_norm();
        if cert < needed {
            out.push(format!(
                "assumption |A|_op >= 2/sigma^2 = {needed} cannot be certified (certified upper bound {cert})"
            ));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvParams {
    pub sigma: f64,
    pub channels: usize,
    /// Half filter width; the filter side is `2k + 1`.
    pub k: usize,
    pub t: f64,
}

impl ConvParams {
    pub fn validate(&self) -> Result<()> {
        ensure_param(self.sigma > 0.0 && self.sigma.is_finite(), || {
            format!("sigma must be positive, got {}", self.sigma)
        })?;
        ensure_param(self.channels >= 1, || "channel count C must be >= 1".into())?;
        ensure_param(self.t > 0.0 && self.t.is_finite(), || {
            format!("t must be positive, got {}", self.t)
        })
    }

    /// `1 - 1/t^2`, floored at 0.
    pub fn probability(&self) -> f64 {
        (1.0 - 1.0 / (self.t * self.t)).max(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompositeInputs {
    pub w1_norm: f64,
    pub w2_norm: f64,
    pub gamma_inf: f64,
    pub bn_lip: f64,
}

impl CompositeInputs {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("w1_norm", self.w1_norm),
            ("w2_norm", self.w2_norm),
            ("gamma_inf", self.gamma_inf),
            ("bn_lip", self.bn_lip),
        ] {
            ensure_param(v >= 0.0 && v.is_finite(), || {
                format!("{name} must be non-negative, got {v}")
            })?;
        }
        Ok(())
    }
}

pub fn attn_single_head_bound(p: &AttnParams) -> Result<f64> {
    p.validate()?;
    Ok(formulas::attn_single_head(p.sigma, p.d as f64, p.t, p.s))
}

pub fn attn_multi_head_bound(p: &AttnParams) -> Result<f64> {
    p.validate()?;
    Ok(formulas::attn_multi_head(
        p.sigma,
        p.d as f64,
        p.heads as f64,
        p.t,
        p.s,
    ))
}

pub fn conv_bound(p: &ConvParams) -> Result<f64> {
    p.validate()?;
    Ok(formulas::conv(p.sigma, p.channels as f64, p.k as f64, p.t))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticOrders {
    /// `sigma^5 d^2`
    pub attn: f64,
    /// `sigma^6 d^{5/2} M`
    pub mhattn: f64,
    /// `k sqrt(sigma C)`
    pub conv: f64,
}

pub fn asymptotic_orders(
    sigma: f64,
    d: usize,
    heads: usize,
    k: usize,
    channels: usize,
) -> Result<AsymptoticOrders> {
    ensure_param(sigma > 0.0 && sigma.is_finite(), || {
        format!("sigma must be positive, got {sigma}")
    })?;
    ensure_param(d >= 1 && heads >= 1 && channels >= 1, || {
        "d, M and C must be positive".into()
    })?;
    let (d, heads, k, channels) = (d as f64, heads as f64, k as f64, channels as f64);
    Ok(AsymptoticOrders {
        attn: formulas::attn_order(sigma, d),
        mhattn: formulas::mhattn_order(sigma, d, heads),
        conv: formulas::conv_order(sigma, channels, k),
    })
}

pub fn tf_bound(mhattn: f64, c: &CompositeInputs) -> Result<f64> {
    c.validate()?;
    ensure_param(mhattn >= 0.0 && mhattn.is_finite(), || {
        format!("attention bound must be non-negative, got {mhattn}")
    })?;
    Ok(formulas::transformer_block(
        mhattn,
        c.w1_norm,
        c.w2_norm,
        c.gamma_inf,
    ))
}

pub fn res_bound(conv: f64, bn_lip: f64) -> Result<f64> {
    ensure_param(conv >= 0.0 && conv.is_finite(), || {
        format!("convolution bound must be non-negative, got {conv}")
    })?;
    ensure_param(bn_lip >= 0.0 && bn_lip.is_finite(), || {
        format!("batch-norm Lipschitz input must be non-negative, got {bn_lip}")
    })?;
    Ok(formulas::bottleneck_block(conv, bn_lip))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArchKind {
    Attention,
    Convolution,
}

impl ArchKind {
    pub fn label(self) -> &'static str {
        match self {
            ArchKind::Attention => "attention",
            ArchKind::Convolution => "convolution",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Block {
    /// Pre-LN Transformer block.
    Transformer,
    /// ResNet bottleneck block.
    Bottleneck,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionBounds {
    pub params: AttnParams,
    pub single_head: f64,
    pub multi_head: f64,
    pub probability: f64,
    pub orders: AttentionOrders,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttentionOrders {
    pub single_head: f64,
    pub multi_head: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelBound {
    pub channels: usize,
    pub bound: f64,
    pub order: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvolutionBounds {
    pub sigma: f64,
    pub k: usize,
    pub t: f64,
    /// One entry per distinct channel count, ascending.
    pub per_channel: Vec<ChannelBound>,
    pub max_bound: f64,
    pub max_order: f64,
    pub probability: f64,
}

impl ConvolutionBounds {
    pub fn max_channels(&self) -> usize {
        self.per_channel.iter().map(|c| c.channels).max().unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositeBounds {
    pub block: Block,
    pub inputs: CompositeInputs,
    pub bound: f64,
    pub order: f64,
}

/// Everything computed for one architecture configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub name: String,
    pub kind: ArchKind,
    pub sigma: f64,
    pub attention: Option<AttentionBounds>,
    pub convolution: Option<ConvolutionBounds>,
    pub composite: Option<CompositeBounds>,
    pub warnings: Vec<String>,
    pub config: ArchitectureConfig,
}

impl BoundReport {
    /// Layer-level bound: multi-head attention or the largest convolution
    /// bound over the channel ladder.
    pub fn layer_bound(&self) -> f64 {
        match self.kind {
            ArchKind::Attention => self.attention.as_ref().map_or(0.0, |a| a.multi_head),
            ArchKind::Convolution => self.convolution.as_ref().map_or(0.0, |c| c.max_bound),
        }
    }

    pub fn layer_order(&self) -> f64 {
        match self.kind {
            ArchKind::Attention => self.attention.as_ref().map_or(0.0, |a| a.orders.multi_head),
            ArchKind::Convolution => self.convolution.as_ref().map_or(0.0, |c| c.max_order),
        }
    }

    pub fn to_json(&self) -> crate::Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }
}

/// Evaluates every bound that applies to `arch`.
pub fn bound_report(arch: &ArchitectureConfig) -> Result<BoundReport> {
    arch.validate()?;
    let sigma = arch.sigma;
    let mut warnings = Vec::new();
    let gamma_inf = arch.gamma_inf();
    let bn_lip = arch.bn_lip();

    let (attention, convolution, composite) = match arch.kind {
        ArchKind::Attention => {
            let p = arch.attn_params()?;
            warnings.extend(p.warnings());
            let single = attn_single_head_bound(&p)?;
            let multi = attn_multi_head_bound(&p)?;
            let (d, m) = (p.d as f64, p.heads as f64);
            let attention = AttentionBounds {
                params: p,
                single_head: single,
                multi_head: multi,
                probability: p.probability(),
                orders: AttentionOrders {
                    single_head: formulas::attn_order(sigma, d),
                    multi_head: formulas::mhattn_order(sigma, d, m),
                },
            };
            let composite = match arch.block {
                Some(Block::Transformer) => {
                    let hidden = d * arch.mlp_ratio();
                    let w = formulas::gaussian_op_norm(sigma, d, hidden, p.s);
                    let inputs = CompositeInputs {
                        w1_norm: arch.w1_norm.unwrap_or(w),
                        w2_norm: arch.w2_norm.unwrap_or(w),
                        gamma_inf,
                        bn_lip,
                    };
                    Some(CompositeBounds {
                        block: Block::Transformer,
                        bound: tf_bound(multi, &inputs)?,
                        order: formulas::transformer_order(sigma, d, m),
                        inputs,
                    })
                }
                _ => None,
            };
            (Some(attention), None, composite)
        }
        ArchKind::Convolution => {
            let k = arch.k.unwrap_or(presets::DEFAULT_K);
            let t = arch.t.unwrap_or(presets::DEFAULT_CONV_T);
            let mut ladder = arch.channel_ladder();
            ladder.sort_unstable();
            ladder.dedup();
            let per_channel = ladder
                .iter()
                .map(|&c| {
                    let p = ConvParams {
                        sigma,
                        channels: c,
                        k,
                        t,
                    };
                    Ok(ChannelBound {
                        channels: c,
                        bound: conv_bound(&p)?,
                        order: formulas::conv_order(sigma, c as f64, k as f64),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let max_bound = per_channel.iter().map(|c| c.bound).fold(0.0, f64::max);
            let max_order = per_channel.iter().map(|c| c.order).fold(0.0, f64::max);
            let probability = ConvParams {
                sigma,
                channels: 1,
                k,
                t,
            }
            .probability();
            if t <= 1.0 {
                warnings.push(format!("t = {t} <= 1; the 1 - 1/t^2 qualifier is vacuous"));
            }
            let conv = ConvolutionBounds {
                sigma,
                k,
                t,
                max_bound,
                max_order,
                probability,
                per_channel,
            };
            let composite = match arch.block {
                Some(Block::Bottleneck) => {
                    let inputs = CompositeInputs {
                        w1_norm: 0.0,
                        w2_norm: 0.0,
                        gamma_inf,
                        bn_lip,
                    };
                    Some(CompositeBounds {
                        block: Block::Bottleneck,
                        bound: res_bound(max_bound, bn_lip)?,
                        order: formulas::bottleneck_order(
                            sigma,
                            conv.max_channels() as f64,
                            k as f64,
                        ),
                        inputs,
                    })
                }
                _ => None,
            };
            (None, Some(conv), composite)
        }
    };

    Ok(BoundReport {
        name: arch.name.clone(),
        kind: arch.kind,
        sigma,
        attention,
        convolution,
        composite,
        warnings,
        config: arch.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    #[test]
    fn single_head_examples() {
        assert_eq!(formulas::attn_single_head(0.0, 16.0, 3.0, 0.0), 0.0);
        let p = AttnParams {
            sigma: 1.0,
            d: 1,
            heads: 1,
            t: 1.0,
            s: 0.0,
        };
        assert_eq!(attn_single_head_bound(&p).unwrap(), 20.0);
        // independent high-precision evaluation
        let p = AttnParams {
            sigma: 0.05,
            d: 512,
            heads: 1,
            t: 512f64.sqrt(),
            s: 0.05,
        };
        let v = attn_single_head_bound(&p).unwrap();
        assert!((v - 6.632_680_508_397_674).abs() < 1e-12, "{v}");
    }

    #[test]
    fn multi_head_examples() {
        assert_eq!(formulas::attn_multi_head(0.0, 16.0, 4.0, 3.0, 0.0), 0.0);
        let p = AttnParams {
            sigma: 1.0,
            d: 1,
            heads: 1,
            t: 1.0,
            s: 0.0,
        };
        assert_eq!(attn_multi_head_bound(&p).unwrap(), 40.0);
        let p = AttnParams {
            sigma: 0.05,
            d: 512,
            heads: 8,
            t: 512f64.sqrt(),
            s: 0.05,
        };
        let v = attn_multi_head_bound(&p).unwrap();
        assert!((v - 60.126_414_175_804_95).abs() < 1e-10, "{v}");
    }

    #[test]
    fn single_and_multi_head_agree_at_one_head() {
        for &(sigma, d, t, s) in &[(0.05, 64usize, 9.0, 0.1), (0.3, 7, 4.0, 0.5), (1.0, 1, 1.0, 0.0)] {
            let p = AttnParams {
                sigma,
                d,
                heads: 1,
                t,
                s,
            };
            let single = attn_single_head_bound(&p).unwrap();
            let multi = attn_multi_head_bound(&p).unwrap();
            let op = 2.0 * sigma * (d as f64).sqrt() + s;
            assert!((multi - single * op).abs() <= 1e-12 * multi.abs().max(1.0));
        }
    }

    #[test]
    fn conv_examples() {
        let p = ConvParams {
            sigma: 1.0,
            channels: 1,
            k: 0,
            t: 1.0,
        };
        assert_eq!(conv_bound(&p).unwrap(), 2f64.sqrt());
        assert_eq!(formulas::conv(0.0, 512.0, 3.0, 2.0), 0.0);
        let p = ConvParams {
            sigma: 0.05,
            channels: 512,
            k: 3,
            t: 2.0,
        };
        assert!((conv_bound(&p).unwrap() - 50.245_787_802_546_98).abs() < 1e-10);
    }

    #[test]
    fn worked_orders() {
        let o = asymptotic_orders(0.05, 512, 8, 3, 512).unwrap();
        assert!((o.attn - 0.08192).abs() < 1e-12);
        assert!((o.mhattn - 0.741_455_200_189_465_3).abs() < 1e-12);
        assert!((o.conv - 15.178_932_768_808_22).abs() < 1e-12);
        assert!(asymptotic_orders(-0.05, 512, 8, 3, 512).is_err());
        assert!(asymptotic_orders(0.05, 0, 8, 3, 512).is_err());
    }

    #[test]
    fn composite_examples() {
        let zero = CompositeInputs {
            w1_norm: 0.0,
            w2_norm: 0.0,
            gamma_inf: 0.0,
            bn_lip: 0.0,
        };
        assert_eq!(tf_bound(0.0, &zero).unwrap(), 1.0);
        let ones = CompositeInputs {
            w1_norm: 1.0,
            w2_norm: 1.0,
            gamma_inf: 1.0,
            bn_lip: 1.0,
        };
        assert_eq!(tf_bound(2.0, &ones).unwrap(), 6.0);
        let no_gamma = CompositeInputs {
            w1_norm: 7.0,
            w2_norm: 3.0,
            gamma_inf: 0.0,
            bn_lip: 1.0,
        };
        assert_eq!(tf_bound(1e6, &no_gamma).unwrap(), 1.0);

        assert_eq!(res_bound(0.0, 5.0).unwrap(), 1.0);
        assert_eq!(res_bound(1.0, 1.0).unwrap(), 2.0);
        assert_eq!(res_bound(2.0, 1.0).unwrap(), 9.0);
        assert!(matches!(res_bound(-1.0, 1.0), Err(Error::Parameter(_))));
        assert!(tf_bound(-1.0, &ones).is_err());
    }

    #[test]
    fn parameter_errors() {
        let mut p = AttnParams::with_defaults(0.05, 64, 4);
        p.sigma = -1.0;
        assert!(matches!(attn_single_head_bound(&p), Err(Error::Parameter(_))));
        let p = ConvParams {
            sigma: 0.05,
            channels: 0,
            k: 1,
            t: 2.0,
        };
        assert!(conv_bound(&p).is_err());
    }

    #[test]
    fn probabilities_and_warnings() {
        let p = AttnParams::with_defaults(0.05, 64, 4);
        assert!((p.probability() - 0.75).abs() < 1e-12);
        assert!(p.warnings().iter().any(|w| w.contains("|A|_op")));
        let p = AttnParams {
            sigma: 1.0,
            d: 4,
            heads: 1,
            t: 1.0,
            s: 0.1,
        };
        assert_eq!(p.probability(), 0.0);
        assert_eq!(p.warnings().len(), 2);
        let c = ConvParams {
            sigma: 1.0,
            channels: 4,
            k: 1,
            t: 2.0,
        };
        assert_eq!(c.probability(), 0.75);
    }
}
