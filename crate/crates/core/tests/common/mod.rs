//! Slow, obviously-correct reference implementations used as test oracles.
#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use topolip_core::cloud::euclidean;
use topolip_core::pipeline::LayerTrace;
use topolip_core::{pairwise_distances, DistanceMatrix, PersistenceDiagram, PointCloud};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_cloud(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> PointCloud {
    let coords = (0..n * dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    PointCloud::from_flat(dim, coords).unwrap()
}

/// Cloud with coordinates on a coarse grid, so equal distances (ties) occur.
pub fn random_grid_cloud(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> PointCloud {
    let coords = (0..n * dim).map(|_| rng.random_range(0..4) as f64).collect();
    PointCloud::from_flat(dim, coords).unwrap()
}

/// Sorted `(birth, death)` pairs of one diagram.
pub fn pairs_of(d: &PersistenceDiagram) -> Vec<(f64, f64)> {
    let mut v: Vec<(f64, f64)> = d.pairs.iter().map(|p| (p.birth, p.death)).collect();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v
}

/// Rips persistence by standard column reduction of the full boundary
/// matrix over Z/2. Simplices are ordered by (value, dimension, vertices).
/// Pairs with zero persistence are dropped; unpaired simplices of dimension
/// at most `max_dim` give essential classes.
pub fn naive_rips(dist: &DistanceMatrix, max_dim: usize, max_scale: f64) -> Vec<Vec<(f64, f64)>> {
    let n = dist.len();
    let mut simplices: Vec<(f64, Vec<usize>)> = Vec::new();
    for i in 0..n {
        simplices.push((0.0, vec![i]));
    }
    for i in 0..n {
        for j in i + 1..n {
            let v = dist.get(i, j);
            if v <= max_scale {
                simplices.push((v, vec![i, j]));
            }
        }
    }
    if max_dim >= 1 {
        for i in 0..n {
            for j in i + 1..n {
                for k in j + 1..n {
                    let v = dist.get(i, j).max(dist.get(i, k)).max(dist.get(j, k));
                    if v <= max_scale {
                        simplices.push((v, vec![i, j, k]));
                    }
                }
            }
        }
    }
    simplices.sort_by(|a, b| {
        a.0.partial_cmp(&b.0)
            .unwrap()
            .then(a.1.len().cmp(&b.1.len()))
            .then(a.1.cmp(&b.1))
    });
    let index: BTreeMap<Vec<usize>, usize> = simplices
        .iter()
        .enumerate()
        .map(|(i, s)| (s.1.clone(), i))
        .collect();
    let mut columns: Vec<Vec<usize>> = simplices
        .iter()
        .map(|(_, s)| {
            if s.len() == 1 {
                return Vec::new();
            }
            let mut col: Vec<usize> = (0..s.len())
                .map(|drop| {
                    let face: Vec<usize> = s
                        .iter()
                        .enumerate()
                        .filter(|&(i, _)| i != drop)
                        .map(|(_, &v)| v)
                        .collect();
                    index[&face]
                })
                .collect();
            col.sort_unstable();
            col
        })
        .collect();
    let mut low_owner: BTreeMap<usize, usize> = BTreeMap::new();
    let mut paired = vec![false; simplices.len()];
    let mut out = vec![Vec::new(); max_dim + 1];
    for j in 0..columns.len() {
        while let Some(&low) = columns[j].last() {
            match low_owner.get(&low) {
                Some(&other) => {
                    let mut merged = columns[j].clone();
                    for &r in &columns[other] {
                        match merged.binary_search(&r) {
                            Ok(pos) => {
                                merged.remove(pos);
                            }
                            Err(pos) => merged.insert(pos, r),
                        }
                    }
                    columns[j] = merged;
                }
                None => {
                    low_owner.insert(low, j);
                    paired[low] = true;
                    paired[j] = true;
                    let dim = simplices[low].1.len() - 1;
                    let (b, d) = (simplices[low].0, simplices[j].0);
                    if dim <= max_dim && d > b {
                        out[dim].push((b, d));
                    }
                    break;
                }
            }
        }
    }
    for (i, (v, s)) in simplices.iter().enumerate() {
        let dim = s.len() - 1;
        if !paired[i] && dim <= max_dim {
            out[dim].push((*v, f64::INFINITY));
        }
    }
    for d in &mut out {
        d.sort_by(|a, b| a.partial_cmp(b).unwrap());
    }
    out
}

fn point_cost(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).abs().max((a.1 - b.1).abs())
}

fn diag_cost(a: (f64, f64)) -> f64 {
    (a.1 - a.0) / 2.0
}

/// Every partial matching of `a` into `b`; unmatched points go to the
/// diagonal. Calls `visit` with the list of costs of each matching.
fn for_each_matching(a: &[(f64, f64)], b: &[(f64, f64)], visit: &mut dyn FnMut(&[f64])) {
    fn rec(
        i: usize,
        a: &[(f64, f64)],
        b: &[(f64, f64)],
        used: &mut Vec<bool>,
        costs: &mut Vec<f64>,
        visit: &mut dyn FnMut(&[f64]),
    ) {
        if i == a.len() {
            let base = costs.len();
            for (j, &p) in b.iter().enumerate() {
                if !used[j] {
                    costs.push(diag_cost(p));
                }
            }
            visit(costs);
            costs.truncate(base);
            return;
        }
        costs.push(diag_cost(a[i]));
        rec(i + 1, a, b, used, costs, visit);
        costs.pop();
        for j in 0..b.len() {
            if !used[j] {
                used[j] = true;
                costs.push(point_cost(a[i], b[j]));
                rec(i + 1, a, b, used, costs, visit);
                costs.pop();
                used[j] = false;
            }
        }
    }
    rec(0, a, b, &mut vec![false; b.len()], &mut Vec::new(), visit);
}

pub fn brute_wasserstein(a: &[(f64, f64)], b: &[(f64, f64)], p: f64) -> f64 {
    let mut best = f64::INFINITY;
    for_each_matching(a, b, &mut |costs| {
        let total: f64 = costs.iter().map(|c| c.powf(p)).sum();
        best = best.min(total);
    });
    best.powf(1.0 / p)
}

pub fn brute_bottleneck(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    let mut best = f64::INFINITY;
    for_each_matching(a, b, &mut |costs| {
        best = best.min(costs.iter().copied().fold(0.0, f64::max));
    });
    best
}

pub fn hausdorff(x: &PointCloud, y: &PointCloud) -> f64 {
    let directed = |a: &PointCloud, b: &PointCloud| {
        a.points()
            .map(|p| b.points().map(|q| euclidean(p, q)).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    };
    directed(x, y).max(directed(y, x))
}

/// Edge weights of a minimum spanning tree, ascending (Prim).
pub fn mst_weights(cloud: &PointCloud) -> Vec<f64> {
    let dist = pairwise_distances(cloud);
    let n = dist.len();
    let mut in_tree = vec![false; n];
    let mut best = vec![f64::INFINITY; n];
    best[0] = 0.0;
    let mut out = Vec::new();
    for step in 0..n {
        let u = (0..n)
            .filter(|&v| !in_tree[v])
            .min_by(|&a, &b| best[a].partial_cmp(&best[b]).unwrap())
            .unwrap();
        in_tree[u] = true;
        if step > 0 {
            out.push(best[u]);
        }
        for v in 0..n {
            if !in_tree[v] {
                best[v] = best[v].min(dist.get(u, v));
            }
        }
    }
    out.sort_by(|a, b| a.partial_cmp(b).unwrap());
    out
}

/// Two-point clouds whose H0 diagrams are `{(0, a)}` for a = 10, 12, 13, 16,
/// giving adjacent diagram distances [2, 1, 3].
pub fn staircase_trace() -> LayerTrace {
    let layers = [10.0, 12.0, 13.0, 16.0]
        .iter()
        .enumerate()
        .map(|(k, &a)| {
            let dim = k + 1;
            let mut far = vec![0.0; dim];
            far[0] = a;
            (
                format!("block{k}"),
                PointCloud::from_points(&[vec![0.0; dim], far]).unwrap(),
            )
        })
        .collect();
    LayerTrace::new("staircase", layers, BTreeMap::new()).unwrap()
}
