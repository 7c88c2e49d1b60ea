//! Change-rate landscape over adjacent-layer diagram distances.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_param, Error, Result};

pub const DEFAULT_EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChangeRateLandscape {
    /// `WD_i` between layers `i` and `i + 1`.
    pub distances: Vec<f64>,
    pub rates: Vec<f64>,
    pub cumulative: Vec<f64>,
    pub p: f64,
}

impl ChangeRateLandscape {
    pub fn from_distances(distances: Vec<f64>, p: f64, epsilon: f64) -> Result<Self> {
        let rates = change_rates(&distances, epsilon)?;
        let cumulative = cumulative_rates(&rates);
        Ok(Self {
            distances,
            rates,
            cumulative,
            p,
        })
    }

    pub fn topo_lip(&self) -> f64 {
        // from_distances guarantees at least one rate
        topo_lip(&self.rates).unwrap_or(0.0)
    }
}

/// `|WD_{i+1} - WD_i| / max(WD_i, epsilon)` for each adjacent pair.
pub fn change_rates(distances: &[f64], epsilon: f64) -> Result<Vec<f64>> {
    if distances.len() < 2 {
        return Err(Error::Usage(format!(
            "change rates need at least 2 distances, got {}",
            distances.len()
        )));
    }
    ensure_param(epsilon > 0.0, || format!("epsilon must be positive, got {epsilon}"))?;
    Ok(distances
        .windows(2)
        .map(|w| (w[1] - w[0]).abs() / w[0].max(epsilon))
        .collect())
}

/// The largest change rate.
pub fn topo_lip(rates: &[f64]) -> Result<f64> {
    rates
        .iter()
        .copied()
        .reduce(f64::max)
        .ok_or_else(|| Error::Usage("TopoLip of an empty rate list".into()))
}

pub fn cumulative_rates(rates: &[f64]) -> Vec<f64> {
    rates
        .iter()
        .scan(0.0, |acc, r| {
            *acc += r;
            Some(*acc)
        })
        .collect()
}

/// Resamples `curve` (abscissae evenly spaced on [0, 1]) at `grid_size`
/// evenly spaced points by linear interpolation, so models of different
/// depth line up on one axis.
pub fn normalize_depth(curve: &[f64], grid_size: usize) -> Result<Vec<f64>> {
    ensure_param(grid_size >= 2, || format!("grid size must be >= 2, got {grid_size}"))?;
    match curve {
        [] => Err(Error::Usage("cannot normalize an empty curve".into())),
        [only] => Ok(vec![*only; grid_size]),
        _ => {
            let segments = (curve.len() - 1) as f64;
            Ok((0..grid_size)
                .map(|g| {
                    let x = g as f64 / (grid_size - 1) as f64 * segments;
                    let k = (x.floor() as usize).min(curve.len() - 2);
                    let frac = x - k as f64;
                    if frac == 0.0 {
                        curve[k]
                    } else if frac == 1.0 {
                        curve[k + 1]
                    } else {
                        curve[k] + (curve[k + 1] - curve[k]) * frac
                    }
                })
                .collect())
        }
    }
}
