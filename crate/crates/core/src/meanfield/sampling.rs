use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::layers::{AttnWeights, ConvWeights};
use super::maps::ConvKernel;
use super::EmpiricalMeasure;
use crate::cloud::PointCloud;
use crate::error::{ensure_param, Error, Result};

const MAX_REJECTIONS: usize = 100_000;

/// Region the sampled atoms are certified to lie in, with radius `t sigma`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Support {
    /// Euclidean ball: `|x| <= t sigma`.
    Ball,
    /// Every coordinate: `|x_j| <= t sigma`.
    Box,
}

fn normal(sigma: f64) -> Result<Normal<f64>> {
    Normal::new(0.0, sigma).map_err(|e| Error::Parameter(format!("sigma = {sigma}: {e}")))
}

/// `n` atoms with i.i.d. `N(0, sigma^2)` coordinates, rejection-sampled into
/// the support.
pub fn sample_measure<R: Rng>(
    rng: &mut R,
    dim: usize,
    n: usize,
    sigma: f64,
    t: f64,
    support: Support,
) -> Result<EmpiricalMeasure> {
    ensure_param(dim >= 1 && n >= 1, || "measures need dim >= 1 and n >= 1".into())?;
    ensure_param(sigma >= 0.0 && sigma.is_finite(), || {
        format!("sigma must be non-negative, got {sigma}")
    })?;
    ensure_param(t > 0.0 && t.is_finite(), || format!("t must be positive, got {t}"))?;
    if sigma == 0.0 {
        return PointCloud::from_flat(dim, vec![0.0; dim * n]).map(EmpiricalMeasure);
    }
    let dist = normal(sigma)?;
    let radius = t * sigma;
    let mut coords = Vec::with_capacity(dim * n);
    let mut atom = vec![0.0; dim];
    for _ in 0..n {
        let mut tries = 0;
        loop {
            match support {
                Support::Ball => {
                    atom.iter_mut().for_each(|v| *v = dist.sample(rng));
                    if atom.iter().map(|v| v * v).sum::<f64>().sqrt() <= radius {
                        break;
                    }
                }
                Support::Box => {
                    for v in atom.iter_mut() {
                        *v = loop {
                            let s = dist.sample(rng);
                            if s.abs() <= radius {
                                break s;
                            }
                            tries += 1;
                            if tries > MAX_REJECTIONS {
                                return Err(rejection_error(t));
                            }
                        };
                    }
                    break;
                }
            }
            tries += 1;
            if tries > MAX_REJECTIONS {
                return Err(rejection_error(t));
            }
        }
        coords.extend_from_slice(&atom);
    }
    PointCloud::from_flat(dim, coords).map(EmpiricalMeasure)
}

fn rejection_error(t: f64) -> Error {
    Error::Parameter(format!("t = {t} leaves almost no mass inside the support"))
}

/// Two independent `n`-atom measures, deterministic per seed.
pub fn sample_measure_pair(
    dim: usize,
    n: usize,
    sigma: f64,
    t: f64,
    support: Support,
    seed: u64,
) -> Result<(EmpiricalMeasure, EmpiricalMeasure)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mu = sample_measure(&mut rng, dim, n, sigma, t, support)?;
    let nu = sample_measure(&mut rng, dim, n, sigma, t, support)?;
    Ok((mu, nu))
}

fn gaussian_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize, dist: &Normal<f64>) -> DMatrix<f64> {
    // column-major fill order, fixed so seeds stay reproducible
    DMatrix::from_iterator(rows, cols, (0..rows * cols).map(|_| dist.sample(rng)))
}

/// Attention weights with i.i.d. `N(0, sigma^2)` entries.
pub fn sample_attention_weights(d: usize, heads: usize, sigma: f64, seed: u64) -> Result<AttnWeights> {
    ensure_param(d >= 1 && heads >= 1, || "need d >= 1 and M >= 1".into())?;
    ensure_param(sigma > 0.0, || format!("sigma must be positive, got {sigma}"))?;
    let dist = normal(sigma)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut q = Vec::with_capacity(heads);
    let mut k = Vec::with_capacity(heads);
    let mut v = Vec::with_capacity(heads);
    for _ in 0..heads {
        q.push(gaussian_matrix(&mut rng, d, d, &dist));
        k.push(gaussian_matrix(&mut rng, d, d, &dist));
        v.push(gaussian_matrix(&mut rng, d, d, &dist));
    }
    let wo = gaussian_matrix(&mut rng, d, heads * d, &dist);
    Ok(AttnWeights { q, k, v, wo })
}

fn conv_std(sigma: f64, channels: usize, k: usize) -> f64 {
    let side = (2 * k + 1) as f64;
    sigma / ((channels as f64).sqrt() * side)
}

/// Convolution weights with i.i.d. `N(0, sigma^2 / (C (2k+1)^2))` entries
/// and zero bias.
pub fn sample_conv_weights(channels: usize, k: usize, sigma: f64, seed: u64) -> Result<ConvWeights> {
    ensure_param(channels >= 1, || "need C >= 1".into())?;
    ensure_param(sigma > 0.0, || format!("sigma must be positive, got {sigma}"))?;
    let dist = normal(conv_std(sigma, channels, k))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let side = 2 * k + 1;
    let w = (0..side * side)
        .map(|_| gaussian_matrix(&mut rng, channels, channels, &dist))
        .collect();
    Ok(ConvWeights {
        k,
        w,
        b: DVector::zeros(channels),
    })
}

/// Scalar shared filter for the mean-field convolution, same variance as
/// [`sample_conv_weights`], zero bias.
pub fn sample_conv_kernel(
    channels: usize,
    k: usize,
    sigma: f64,
    height: usize,
    width: usize,
    seed: u64,
) -> Result<ConvKernel> {
    ensure_param(channels >= 1, || "need C >= 1".into())?;
    ensure_param(sigma > 0.0, || format!("sigma must be positive, got {sigma}"))?;
    let dist = normal(conv_std(sigma, channels, k))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let side = 2 * k + 1;
    Ok(ConvKernel {
        k,
        height,
        width,
        w: (0..side * side).map(|_| dist.sample(&mut rng)).collect(),
        b: 0.0,
    })
}
