//! Wasserstein and bottleneck distances between persistence diagrams, and
//! the p-Wasserstein distance between equal-size empirical measures.
//!
//! Diagram points are compared in the sup-norm on R^2, so moving `(b, d)` to
//! the diagonal costs `(d - b) / 2`.

use serde::{Deserialize, Serialize};

use crate::assignment;
use crate::cloud::{euclidean, PointCloud};
use crate::error::{ensure_param, Error, Result};
use crate::persistence::{DiagramPoint, PersistenceDiagram};

/// What to do with infinite-death pairs before comparing diagrams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EssentialPolicy {
    #[default]
    Drop,
    /// Replace an infinite death with the diagram's `max_scale`.
    Cap,
}

/// How per-dimension distances fold into one number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HomCombine {
    #[default]
    Sum,
    Max,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceKind {
    Diagram,
    Cloud,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistanceValue {
    pub value: f64,
    /// Cost exponent; `f64::INFINITY` for the bottleneck distance.
    pub p: f64,
    pub kind: DistanceKind,
}

/// Returns a copy of `diagram` with its essential pairs dropped or capped.
pub fn apply_essential_policy(
    diagram: &PersistenceDiagram,
    policy: EssentialPolicy,
) -> PersistenceDiagram {
    let pairs = diagram
        .pairs
        .iter()
        .filter_map(|p| match (p.is_essential(), policy) {
            (false, _) => Some(*p),
            (true, EssentialPolicy::Drop) => None,
            (true, EssentialPolicy::Cap) => (diagram.max_scale > p.birth)
                .then(|| DiagramPoint::new(p.birth, diagram.max_scale)),
        })
        .collect();
    PersistenceDiagram {
        hom_dim: diagram.hom_dim,
        pairs,
        max_scale: diagram.max_scale,
    }
}

fn sup_dist(a: &DiagramPoint, b: &DiagramPoint) -> f64 {
    (a.birth - b.birth).abs().max((a.death - b.death).abs())
}

fn diagonal_dist(a: &DiagramPoint) -> f64 {
    (a.death - a.birth) / 2.0
}

/// Square matching problem: rows are the points of `a` followed by one
/// diagonal slot per point of `b`; columns are the points of `b` followed by
/// one diagonal slot per point of `a`. Diagonal-to-diagonal costs nothing.
fn matching_costs(a: &[DiagramPoint], b: &[DiagramPoint], exponent: Option<f64>) -> Vec<f64> {
    let (n1, n2) = (a.len(), b.len());
    let n = n1 + n2;
    let pow = |c: f64| match exponent {
        Some(1.0) => c,
        Some(p) => c.powf(p),
        None => c,
    };
    let mut cost = vec![0.0; n * n];
    for i in 0..n1 {
        let diag = pow(diagonal_dist(&a[i]));
        for j in 0..n2 {
            cost[i * n + j] = pow(sup_dist(&a[i], &b[j]));
        }
        for j in n2..n {
            cost[i * n + j] = diag;
        }
    }
    for j in 0..n2 {
        let diag = pow(diagonal_dist(&b[j]));
        for i in n1..n {
            cost[i * n + j] = diag;
        }
    }
    cost
}

fn check_pair(d1: &PersistenceDiagram, d2: &PersistenceDiagram) -> Result<()> {
    if d1.hom_dim != d2.hom_dim {
        return Err(Error::Usage(format!(
            "cannot compare H{} with H{} diagrams",
            d1.hom_dim, d2.hom_dim
        )));
    }
    Ok(())
}

fn finite_points(d: &PersistenceDiagram) -> Vec<DiagramPoint> {
    d.finite().copied().collect()
}

/// p-Wasserstein distance between two diagrams of the same homology
/// dimension. Essential pairs are ignored; cap them first with
/// [`apply_essential_policy`] to include them.
pub fn diagram_wasserstein(
    d1: &PersistenceDiagram,
    d2: &PersistenceDiagram,
    p: f64,
) -> Result<DistanceValue> {
    check_pair(d1, d2)?;
    ensure_param(p >= 1.0 && p.is_finite(), || {
        format!("Wasserstein exponent must be a finite p >= 1, got {p}")
    })?;
    let (a, b) = (finite_points(d1), finite_points(d2));
    let n = a.len() + b.len();
    let cost = matching_costs(&a, &b, Some(p));
    let total = assignment::min_cost(n, &cost).max(0.0);
    Ok(DistanceValue {
        value: if p == 1.0 { total } else { total.powf(1.0 / p) },
        p,
        kind: DistanceKind::Diagram,
    })
}

/// Bottleneck distance: the smallest achievable largest single-pair cost.
/// Essential pairs are ignored as in [`diagram_wasserstein`].
pub fn bottleneck_distance(d1: &PersistenceDiagram, d2: &PersistenceDiagram) -> Result<DistanceValue> {
    check_pair(d1, d2)?;
    let (a, b) = (finite_points(d1), finite_points(d2));
    let n = a.len() + b.len();
    let cost = matching_costs(&a, &b, None);
    Ok(DistanceValue {
        value: assignment::min_bottleneck(n, &cost),
        p: f64::INFINITY,
        kind: DistanceKind::Diagram,
    })
}

/// p-Wasserstein distance between the uniform empirical measures on two
/// clouds of equal size, with Euclidean ground metric.
pub fn cloud_wasserstein(mu: &PointCloud, nu: &PointCloud, p: f64) -> Result<DistanceValue> {
    ensure_param(p >= 1.0 && p.is_finite(), || {
        format!("Wasserstein exponent must be a finite p >= 1, got {p}")
    })?;
    if mu.len() != nu.len() {
        return Err(Error::Usage(format!(
            "measures must have the same number of atoms ({} vs {})",
            mu.len(),
            nu.len()
        )));
    }
    if mu.dim() != nu.dim() {
        return Err(Error::Dimension(format!(
            "measures live in R^{} and R^{}",
            mu.dim(),
            nu.dim()
        )));
    }
    let n = mu.len();
    let mut cost = Vec::with_capacity(n * n);
    for x in mu.points() {
        for y in nu.points() {
            let c = euclidean(x, y);
            cost.push(if p == 1.0 { c } else { c.powf(p) });
        }
    }
    let mean = assignment::min_cost(n, &cost).max(0.0) / n as f64;
    Ok(DistanceValue {
        value: if p == 1.0 { mean } else { mean.powf(1.0 / p) },
        p,
        kind: DistanceKind::Cloud,
    })
}

/// Distance between two per-dimension diagram sets (index = homology
/// dimension), folding the per-dimension p-Wasserstein values with `combine`.
pub fn combined_wasserstein(
    a: &[PersistenceDiagram],
    b: &[PersistenceDiagram],
    p: f64,
    policy: EssentialPolicy,
    combine: HomCombine,
) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Usage(format!(
            "diagram sets cover {} and {} homology dimensions",
            a.len(),
            b.len()
        )));
    }
    let mut acc: f64 = 0.0;
    for (x, y) in a.iter().zip(b) {
        let w = diagram_wasserstein(
            &apply_essential_policy(x, policy),
            &apply_essential_policy(y, policy),
            p,
        )?
        .value;
        acc = match combine {
            HomCombine::Sum => acc + w,
            HomCombine::Max => acc.max(w),
        };
    }
    Ok(acc)
}
