use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::EmpiricalMeasure;
use crate::error::{ensure_param, Error, Result};
use crate::metrics::cloud_wasserstein;

/// Draws per pair before giving up on a sampler that keeps returning
/// (numerically) identical measures.
pub const PAIR_RETRIES: usize = 64;

const MIN_W1: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LipschitzEstimate {
    pub sup_ratio: f64,
    /// `W1(F mu, F nu) / W1(mu, nu)` for every pair, in pair order.
    pub ratios: Vec<f64>,
}

/// Empirical `sup W1(F(mu), F(nu)) / W1(mu, nu)` over `num_pairs` sampled
/// pairs. `sampler` receives a per-draw seed derived from `seed`, the pair
/// index and the retry count; pairs closer than 1e-12 are redrawn. Pairs are
/// evaluated in parallel and reduced in index order.
pub fn estimate_lipschitz_w1<F, S>(
    map: F,
    sampler: S,
    num_pairs: usize,
    seed: u64,
) -> Result<LipschitzEstimate>
where
    F: Fn(&EmpiricalMeasure) -> Result<EmpiricalMeasure> + Sync,
    S: Fn(u64) -> Result<(EmpiricalMeasure, EmpiricalMeasure)> + Sync,
{
    ensure_param(num_pairs >= 1, || "need at least one pair".into())?;
    let ratios = (0..num_pairs)
        .into_par_iter()
        .map(|i| pair_ratio(&map, &sampler, seed, i as u64))
        .collect::<Result<Vec<f64>>>()?;
    let sup_ratio = ratios.iter().copied().fold(0.0, f64::max);
    Ok(LipschitzEstimate { sup_ratio, ratios })
}

fn pair_ratio<F, S>(map: &F, sampler: &S, seed: u64, index: u64) -> Result<f64>
where
    F: Fn(&EmpiricalMeasure) -> Result<EmpiricalMeasure>,
    S: Fn(u64) -> Result<(EmpiricalMeasure, EmpiricalMeasure)>,
{
    let mut seeds = ChaCha8Rng::seed_from_u64(seed);
    seeds.set_stream(index);
    for _ in 0..PAIR_RETRIES {
        let (mu, nu) = sampler(seeds.next_u64())?;
        let base = cloud_wasserstein(mu.atoms(), nu.atoms(), 1.0)?.value;
        if base < MIN_W1 {
            continue;
        }
        let (fmu, fnu) = (map(&mu)?, map(&nu)?);
        if fmu.len() != mu.len() || fnu.len() != nu.len() {
            return Err(Error::Usage(format!(
                "map changed the atom count ({} -> {}, {} -> {})",
                mu.len(),
                fmu.len(),
                nu.len(),
                fnu.len()
            )));
        }
        let image = cloud_wasserstein(fmu.atoms(), fnu.atoms(), 1.0)?.value;
        return Ok(image / base);
    }
    Err(Error::Usage(format!(
        "sampler returned coincident measures {PAIR_RETRIES} times for pair {index}"
    )))
}
