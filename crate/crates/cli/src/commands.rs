use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;
use topolip_core::bounds::{
    self, bound_report, compare_architectures, ArchKind, ArchitectureConfig, AttnParams, Block,
    BoundReport, ConvParams, Stage,
};
use topolip_core::diagram_io;
use topolip_core::meanfield::{
    attention_matrix, estimate_lipschitz_w1, mean_field_attention_map, mean_field_conv_map,
    sample_attention_weights, sample_conv_kernel, sample_measure_pair, Support,
};
use topolip_core::metrics::apply_essential_policy;
use topolip_core::pipeline::trace::sanitize;
use topolip_core::pipeline::{layer_diagrams, load_trace, report_from_diagrams, PipelineConfig, TopoLipReport};
use topolip_core::{
    bottleneck_distance, diagram_wasserstein, EssentialPolicy, Error, HomCombine,
    PersistenceDiagram, Result,
};

use crate::{
    BlockArg, BoundsArgs, Combine, CompareArgs, DistArgs, Essential, Kind, MapKind, Output, PhArgs,
    RunArgs, SamplingArgs, SimulateArgs,
};

const DEFAULT_PS: [f64; 2] = [1.0, 2.0];

impl From<Essential> for EssentialPolicy {
    fn from(e: Essential) -> Self {
        match e {
            Essential::Drop => EssentialPolicy::Drop,
            Essential::Cap => EssentialPolicy::Cap,
        }
    }
}

impl From<Combine> for HomCombine {
    fn from(c: Combine) -> Self {
        match c {
            Combine::Sum => HomCombine::Sum,
            Combine::Max => HomCombine::Max,
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

fn emit(output: &Output, json: &str, file_name: &str) -> Result<()> {
    let path = match (&output.out, &output.out_dir) {
        (Some(p), _) => p.clone(),
        (None, Some(dir)) => {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            dir.join(file_name)
        }
        (None, None) => {
            print!("{json}");
            return Ok(());
        }
    };
    std::fs::write(&path, json).map_err(|e| Error::io(&path, e))
}

fn read_json(path: &Path) -> Result<Value> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::ingestion(path, format!("invalid JSON: {e}")))
}

/// Pipeline config and exponent list from a config file. The file may be a
/// bare config or a report embedding one under "config" (and the exponent
/// list under "ps").
fn config_file(path: &Path) -> Result<(PipelineConfig, Option<Vec<f64>>)> {
    let value = read_json(path)?;
    let (cfg, ps) = match value {
        Value::Object(mut map) if map.contains_key("config") => {
            (map.remove("config").unwrap_or_default(), map.remove("ps"))
        }
        other => (other, None),
    };
    let cfg: PipelineConfig = serde_json::from_value(cfg)
        .map_err(|e| Error::ingestion(path, format!("invalid config: {e}")))?;
    let ps = ps
        .map(serde_json::from_value::<Vec<f64>>)
        .transpose()
        .map_err(|e| Error::ingestion(path, format!("invalid \"ps\": {e}")))?;
    Ok((cfg, ps))
}

fn resolve_sampling(args: &SamplingArgs) -> Result<(PipelineConfig, Option<Vec<f64>>)> {
    let (mut cfg, ps) = match &args.config {
        Some(path) => {
            let (cfg, ps) = config_file(path)?;
            let ps = ps.unwrap_or_else(|| vec![cfg.p]);
            (cfg, Some(ps))
        }
        None => (PipelineConfig::default(), None),
    };
    if let Some(v) = args.max_points {
        cfg.max_points = v;
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = args.max_dim {
        cfg.max_dim = v;
    }
    if args.max_scale.is_some() {
        cfg.max_scale = args.max_scale;
    }
    cfg.validate()?;
    Ok((cfg, ps))
}

#[derive(Serialize)]
struct PhLayer {
    name: String,
    file: String,
    /// Finite pairs per homology dimension.
    finite_pairs: Vec<usize>,
    /// Essential pairs per homology dimension.
    essential_pairs: Vec<usize>,
}

#[derive(Serialize)]
struct PhIndex {
    model_name: String,
    seed: u64,
    config: PipelineConfig,
    layers: Vec<PhLayer>,
}

pub fn ph(args: PhArgs) -> Result<()> {
    let (config, _) = resolve_sampling(&args.sampling)?;
    let Some(dir) = args.output.out_dir.clone() else {
        return Err(Error::Usage("ph writes several files; pass --out-dir".into()));
    };
    let trace = load_trace(&args.trace)?;
    let sets = layer_diagrams(
        &trace,
        config.max_points,
        config.seed,
        config.max_dim,
        config.max_scale,
    )?;
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let mut layers = Vec::with_capacity(sets.len());
    for (idx, (layer, set)) in trace.layers.iter().zip(&sets).enumerate() {
        let file = format!("{idx:03}_{}.csv", sanitize(&layer.name));
        diagram_io::write_csv(&dir.join(&file), set)?;
        layers.push(PhLayer {
            name: layer.name.clone(),
            file,
            finite_pairs: set.iter().map(|d| d.finite().count()).collect(),
            essential_pairs: set.iter().map(|d| d.essential_count()).collect(),
        });
    }
    let index = PhIndex {
        model_name: trace.model_name.clone(),
        seed: config.seed,
        config,
        layers,
    };
    let path = dir.join("index.json");
    std::fs::write(&path, to_json(&index)?).map_err(|e| Error::io(&path, e))
}

#[derive(Serialize)]
struct WassersteinResult {
    p: f64,
    per_dim: Vec<f64>,
    value: f64,
}

#[derive(Serialize)]
struct BottleneckResult {
    per_dim: Vec<f64>,
    value: f64,
}

#[derive(Serialize)]
struct DistOutput {
    a: PathBuf,
    b: PathBuf,
    essential: EssentialPolicy,
    combine: HomCombine,
    wasserstein: Vec<WassersteinResult>,
    bottleneck: BottleneckResult,
}

fn pad(mut set: Vec<PersistenceDiagram>, len: usize) -> Vec<PersistenceDiagram> {
    while set.len() < len {
        set.push(PersistenceDiagram::empty(set.len(), 0.0));
    }
    set
}

fn fold(combine: HomCombine, values: &[f64]) -> f64 {
    match combine {
        HomCombine::Sum => values.iter().sum(),
        HomCombine::Max => values.iter().copied().fold(0.0, f64::max),
    }
}

pub fn dist(args: DistArgs) -> Result<()> {
    let essential = EssentialPolicy::from(args.essential);
    let combine = HomCombine::from(args.combine);
    for &p in &args.p {
        if !(p >= 1.0 && p.is_finite()) {
            return Err(Error::Parameter(format!(
                "Wasserstein exponent must be a finite p >= 1, got {p}"
            )));
        }
    }
    let a = diagram_io::read_csv(&args.diagram_a)?;
    let b = diagram_io::read_csv(&args.diagram_b)?;
    let dims = a.len().max(b.len());
    let prepare = |set: Vec<PersistenceDiagram>| -> Vec<PersistenceDiagram> {
        pad(set, dims)
            .iter()
            .map(|d| apply_essential_policy(d, essential))
            .collect()
    };
    let (a, b) = (prepare(a), prepare(b));
    let wasserstein = args
        .p
        .iter()
        .map(|&p| {
            let per_dim = a
                .iter()
                .zip(&b)
                .map(|(x, y)| diagram_wasserstein(x, y, p).map(|v| v.value))
                .collect::<Result<Vec<_>>>()?;
            let value = match combine {
                HomCombine::Sum => per_dim.iter().map(|v| v.powf(p)).sum::<f64>().powf(1.0 / p),
                HomCombine::Max => fold(combine, &per_dim),
            };
            Ok(WassersteinResult { p, per_dim, value })
        })
        .collect::<Result<Vec<_>>>()?;
    let per_dim = a
        .iter()
        .zip(&b)
        .map(|(x, y)| bottleneck_distance(x, y).map(|v| v.value))
        .collect::<Result<Vec<_>>>()?;
    let bottleneck = BottleneckResult {
        value: per_dim.iter().copied().fold(0.0, f64::max),
        per_dim,
    };
    let out = DistOutput {
        a: args.diagram_a,
        b: args.diagram_b,
        essential,
        combine,
        wasserstein,
        bottleneck,
    };
    emit(&args.output, &to_json(&out)?, "distance.json")
}

#[derive(Serialize)]
struct RunOutput {
    model_name: String,
    seed: u64,
    ps: Vec<f64>,
    config: PipelineConfig,
    reports: Vec<TopoLipReport>,
}

pub fn run(args: RunArgs) -> Result<()> {
    let (mut config, file_ps) = resolve_sampling(&args.sampling)?;
    if let Some(v) = args.epsilon {
        config.epsilon = v;
    }
    if let Some(v) = args.grid_size {
        config.grid_size = v;
    }
    if let Some(v) = args.essential {
        config.essential = v.into();
    }
    if let Some(v) = args.combine {
        config.combine = v.into();
    }
    let ps = if !args.p.is_empty() {
        args.p.clone()
    } else {
        file_ps.unwrap_or_else(|| DEFAULT_PS.to_vec())
    };
    if ps.is_empty() {
        return Err(Error::Usage("need at least one exponent".into()));
    }
    config.p = ps[0];
    for &p in &ps {
        PipelineConfig { p, ..config.clone() }.validate()?;
    }
    let trace = load_trace(&args.trace)?;
    let sets = layer_diagrams(
        &trace,
        config.max_points,
        config.seed,
        config.max_dim,
        config.max_scale,
    )?;
    let reports = ps
        .iter()
        .map(|&p| report_from_diagrams(&trace.model_name, &sets, &PipelineConfig { p, ..config.clone() }))
        .collect::<Result<Vec<_>>>()?;
    let out = RunOutput {
        model_name: trace.model_name.clone(),
        seed: config.seed,
        ps,
        config,
        reports,
    };
    emit(&args.output, &to_json(&out)?, "report.json")
}

fn bounds_config(args: &BoundsArgs) -> Result<ArchitectureConfig> {
    let mut arch = match &args.preset {
        Some(name) => bounds::preset(name)?,
        None => {
            let kind = match args.kind {
                Some(k) => k,
                None if args.d.is_some() || args.heads.is_some() => Kind::Attention,
                None if !args.channels.is_empty() => Kind::Convolution,
                None => {
                    return Err(Error::Usage(
                        "give --preset, or --d/--M for attention, or --C for convolution".into(),
                    ))
                }
            };
            let sigma = args.sigma.unwrap_or(0.05);
            match kind {
                Kind::Attention => ArchitectureConfig::attention(
                    "custom",
                    sigma,
                    args.d.unwrap_or(0),
                    args.heads.unwrap_or(1),
                ),
                Kind::Convolution => ArchitectureConfig::convolution("custom", sigma, 1, Vec::new()),
            }
        }
    };
    if let Some(k) = args.kind {
        arch.kind = match k {
            Kind::Attention => ArchKind::Attention,
            Kind::Convolution => ArchKind::Convolution,
        };
    }
    if let Some(b) = args.block {
        arch.block = Some(match b {
            BlockArg::Transformer => Block::Transformer,
            BlockArg::Bottleneck => Block::Bottleneck,
        });
    }
    if let Some(v) = args.sigma {
        arch.sigma = v;
    }
    if args.d.is_some() {
        arch.d = args.d;
    }
    if args.heads.is_some() {
        arch.heads = args.heads;
    }
    if args.t.is_some() {
        arch.t = args.t;
    }
    if args.s.is_some() {
        arch.s = args.s;
    }
    if args.k.is_some() {
        arch.k = args.k;
    }
    if !args.channels.is_empty() {
        arch.stages = args
            .channels
            .iter()
            .map(|&channels| Stage { channels, repeat: 1 })
            .collect();
    }
    if args.gamma_inf.is_some() {
        arch.gamma_inf = args.gamma_inf;
    }
    if args.bn_lip.is_some() {
        arch.bn_lip = args.bn_lip;
    }
    if args.w1_norm.is_some() {
        arch.w1_norm = args.w1_norm;
    }
    if args.w2_norm.is_some() {
        arch.w2_norm = args.w2_norm;
    }
    Ok(arch)
}

pub fn bounds(args: BoundsArgs) -> Result<()> {
    if args.list {
        return emit(&args.output, &to_json(&bounds::presets())?, "presets.json");
    }
    let report = bound_report(&bounds_config(&args)?)?;
    emit(&args.output, &report.to_json()?, "bounds.json")
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct SimParams {
    map: MapKind,
    dim: usize,
    n: usize,
    sigma: f64,
    t: f64,
    support: Support,
    #[serde(skip_serializing_if = "Option::is_none")]
    s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    channels: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    grid: Option<usize>,
    pairs: usize,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct SimOutput {
    params: SimParams,
    sup_ratio: f64,
    theoretical_bound: f64,
    probability: f64,
    ratios: Vec<f64>,
    seed: u64,
}

pub fn simulate(args: SimulateArgs) -> Result<()> {
    let pairs = usize::try_from(args.pairs)
        .ok()
        .filter(|&p| p >= 1)
        .ok_or_else(|| Error::Parameter(format!("--pairs must be >= 1, got {}", args.pairs)))?;
    if !(args.sigma > 0.0 && args.sigma.is_finite()) {
        return Err(Error::Parameter(format!("sigma must be positive, got {}", args.sigma)));
    }
    let seed = args.seed;
    let (params, estimate, bound, probability) = match args.map {
        MapKind::Identity | MapKind::Attention => {
            let d = args.d;
            let t = args.t.unwrap_or(2.0 * (d as f64).sqrt());
            let sampler = |s| sample_measure_pair(d, args.n, args.sigma, t, Support::Ball, s);
            let mut params = SimParams {
                map: args.map,
                dim: d,
                n: args.n,
                sigma: args.sigma,
                t,
                support: Support::Ball,
                s: None,
                channels: None,
                k: None,
                grid: None,
                pairs,
            };
            if args.map == MapKind::Identity {
                let est = estimate_lipschitz_w1(|m| Ok(m.clone()), sampler, pairs, seed)?;
                (params, est, 1.0, 1.0)
            } else {
                let p = AttnParams {
                    sigma: args.sigma,
                    d,
                    heads: 1,
                    t,
                    s: args.s.unwrap_or(3.0 * args.sigma),
                };
                let bound = bounds::attn_single_head_bound(&p)?;
                let w = sample_attention_weights(d, 1, args.sigma, seed)?;
                let a = attention_matrix(&w.q[0], &w.k[0], 1)?;
                let v = &w.v[0];
                let est = estimate_lipschitz_w1(
                    |m| mean_field_attention_map(m, &a, v),
                    sampler,
                    pairs,
                    seed,
                )?;
                params.s = Some(p.s);
                (params, est, bound, p.probability())
            }
        }
        MapKind::Conv => {
            let t = args.t.unwrap_or(2.0);
            let cp = ConvParams {
                sigma: args.sigma,
                channels: args.channels,
                k: args.k,
                t,
            };
            let bound = bounds::conv_bound(&cp)?;
            let g = args.grid;
            let kernel = sample_conv_kernel(args.channels, args.k, args.sigma, g, g, seed)?;
            let est = estimate_lipschitz_w1(
                |m| mean_field_conv_map(m, &kernel),
                |s| sample_measure_pair(g * g, args.n, args.sigma, t, Support::Box, s),
                pairs,
                seed,
            )?;
            let params = SimParams {
                map: args.map,
                dim: g * g,
                n: args.n,
                sigma: args.sigma,
                t,
                support: Support::Box,
                s: None,
                channels: Some(args.channels),
                k: Some(args.k),
                grid: Some(g),
                pairs,
            };
            (params, est, bound, cp.probability())
        }
    };
    let out = SimOutput {
        params,
        sup_ratio: estimate.sup_ratio,
        theoretical_bound: bound,
        probability,
        ratios: estimate.ratios,
        seed,
    };
    emit(&args.output, &to_json(&out)?, "simulation.json")
}

fn load_report(arg: &str) -> Result<BoundReport> {
    let path = Path::new(arg);
    if path.is_file() {
        let value = read_json(path)?;
        return serde_json::from_value(value)
            .map_err(|e| Error::ingestion(path, format!("not a bound report: {e}")));
    }
    match bounds::preset(arg) {
        Ok(arch) => bound_report(&arch),
        Err(_) => Err(Error::Usage(format!(
            "{arg:?} is neither a bound report file nor a preset name"
        ))),
    }
}

pub fn compare(args: CompareArgs) -> Result<()> {
    let a = load_report(&args.a)?;
    let b = load_report(&args.b)?;
    let cmp = compare_architectures(&a, &b);
    emit(&args.output, &to_json(&cmp)?, "comparison.json")
}
