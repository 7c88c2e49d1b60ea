//! Vietoris-Rips persistent homology in dimensions 0 and 1 over Z/2.
//!
//! The filtration value of a simplex is its diameter (longest edge), not a
//! radius. Dimension 0 is computed with a union-find sweep over the sorted
//! edges. Dimension 1 is computed by reducing the coboundary matrix of the
//! edges in reverse filtration order, which produces the same persistence
//! pairs as reducing the boundary matrix of the triangles while skipping the
//! edges already paired in dimension 0.
//!
//! Pairs with `death == birth` are never reported.

use std::cmp::Ordering;
use std::collections::HashMap;

use crate::cloud::DistanceMatrix;
use crate::error::{ensure_param, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagramPoint {
    pub birth: f64,
    /// `f64::INFINITY` for classes still alive at the end of the filtration.
    pub death: f64,
}

impl DiagramPoint {
    pub fn new(birth: f64, death: f64) -> Self {
        Self { birth, death }
    }

    pub fn is_essential(&self) -> bool {
        self.death.is_infinite()
    }

    pub fn persistence(&self) -> f64 {
        self.death - self.birth
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PersistenceDiagram {
    pub hom_dim: usize,
    pub pairs: Vec<DiagramPoint>,
    /// Filtration cap the diagram was computed with.
    pub max_scale: f64,
}

impl PersistenceDiagram {
    /// Builds a diagram after checking `0 <= birth <= death` and that finite
    /// deaths do not exceed `max_scale`. Pairs are stored sorted.
    pub fn new(hom_dim: usize, mut pairs: Vec<DiagramPoint>, max_scale: f64) -> Result<Self> {
        for p in &pairs {
            if !(p.birth >= 0.0 && p.birth.is_finite()) || p.death.is_nan() || p.death < p.birth {
                return Err(Error::Parameter(format!(
                    "invalid diagram point ({}, {})",
                    p.birth, p.death
                )));
            }
            if p.death.is_finite() && p.death > max_scale {
                return Err(Error::Parameter(format!(
                    "death {} exceeds max scale {max_scale}",
                    p.death
                )));
            }
        }
        sort_pairs(&mut pairs);
        Ok(Self {
            hom_dim,
            pairs,
            max_scale,
        })
    }

    pub fn empty(hom_dim: usize, max_scale: f64) -> Self {
        Self {
            hom_dim,
            pairs: Vec::new(),
            max_scale,
        }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn finite(&self) -> impl Iterator<Item = &DiagramPoint> {
        self.pairs.iter().filter(|p| !p.is_essential())
    }

    pub fn essential_count(&self) -> usize {
        self.pairs.iter().filter(|p| p.is_essential()).count()
    }
}

fn sort_pairs(pairs: &mut [DiagramPoint]) {
    pairs.sort_by(|a, b| {
        a.birth
            .total_cmp(&b.birth)
            .then_with(|| a.death.total_cmp(&b.death))
    });
}

/// Computes the H0 (and, for `max_dim == 1`, H1) diagrams of the Rips
/// filtration of `dist` truncated at `max_scale`.
///
/// H0 holds one `(0, inf)` pair per connected component of the complex at
/// `max_scale`; finite H0 deaths are the minimum-spanning-forest edge
/// weights. H1 classes alive at `max_scale` are reported with an infinite
/// death.
pub fn rips_persistence(
    dist: &DistanceMatrix,
    max_dim: usize,
    max_scale: f64,
) -> Result<Vec<PersistenceDiagram>> {
    ensure_param(max_scale > 0.0 && !max_scale.is_nan(), || {
        format!("max_scale must be positive, got {max_scale}")
    })?;
    ensure_param(max_dim <= 1, || {
        format!("only homology dimensions 0 and 1 are supported, got {max_dim}")
    })?;

    // Past the enclosing radius the complex is a cone, so nothing with
    // positive persistence happens there.
    let threshold = max_scale.min(dist.enclosing_radius());
    let edges = sorted_edges(dist, threshold);

    let (h0, paired_edges) = zero_dimensional(dist.len(), &edges);
    let mut out = vec![PersistenceDiagram::new(0, h0, max_scale)?];
    if max_dim == 1 {
        let h1 = one_dimensional(dist, threshold, &edges, &paired_edges);
        out.push(PersistenceDiagram::new(1, h1, max_scale)?);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy)]
struct Edge {
    value: f64,
    i: u32,
    j: u32,
}

fn sorted_edges(dist: &DistanceMatrix, threshold: f64) -> Vec<Edge> {
    let n = dist.len();
    let mut edges = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            let value = dist.get(i, j);
            if value <= threshold {
                edges.push(Edge {
                    value,
                    i: i as u32,
                    j: j as u32,
                });
            }
        }
    }
    edges.sort_by(|a, b| {
        a.value
            .total_cmp(&b.value)
            .then(a.i.cmp(&b.i))
            .then(a.j.cmp(&b.j))
    });
    edges
}

struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            Ordering::Less => self.parent[ra] = rb,
            Ordering::Greater => self.parent[rb] = ra,
            Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
        true
    }
}

/// Returns the H0 pairs and a flag per sorted edge marking the edges that
/// merge two components.
fn zero_dimensional(n: usize, edges: &[Edge]) -> (Vec<DiagramPoint>, Vec<bool>) {
    let mut uf = UnionFind::new(n);
    let mut paired = vec![false; edges.len()];
    let mut pairs = Vec::new();
    let mut components = n;
    for (idx, e) in edges.iter().enumerate() {
        if uf.union(e.i as usize, e.j as usize) {
            paired[idx] = true;
            components -= 1;
            if e.value > 0.0 {
                pairs.push(DiagramPoint::new(0.0, e.value));
            }
        }
    }
    pairs.extend(std::iter::repeat_n(DiagramPoint::new(0.0, f64::INFINITY), components));
    (pairs, paired)
}

/// A triangle `{i < j < k}` keyed for the filtration order: diameter first,
/// then the combinatorial index as a tie-break.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Simplex2 {
    value: f64,
    code: u64,
}

impl Simplex2 {
    fn cmp_order(&self, other: &Self) -> Ordering {
        self.value
            .total_cmp(&other.value)
            .then(self.code.cmp(&other.code))
    }
}

fn binom2(x: u64) -> u64 {
    x * x.saturating_sub(1) / 2
}

fn binom3(x: u64) -> u64 {
    if x < 3 {
        0
    } else {
        x * (x - 1) * (x - 2) / 6
    }
}

fn triangle_code(a: usize, b: usize, c: usize) -> u64 {
    let mut v = [a as u64, b as u64, c as u64];
    v.sort_unstable();
    binom3(v[2]) + binom2(v[1]) + v[0]
}

/// Cofacets of edge `e` that are present at `threshold`, sorted in
/// filtration order.
fn coboundary(dist: &DistanceMatrix, threshold: f64, e: &Edge) -> Vec<Simplex2> {
    let (i, j) = (e.i as usize, e.j as usize);
    let (ri, rj) = (dist.row(i), dist.row(j));
    let mut col: Vec<Simplex2> = (0..dist.len())
        .filter(|&v| v != i && v != j && ri[v] <= threshold && rj[v] <= threshold)
        .map(|v| Simplex2 {
            value: e.value.max(ri[v]).max(rj[v]),
            code: triangle_code(i, j, v),
        })
        .collect();
    col.sort_by(Simplex2::cmp_order);
    col
}

/// Z/2 sum of a sorted column with the sorted columns in `others`.
fn add_columns(column: &mut Vec<Simplex2>, others: impl Iterator<Item = Vec<Simplex2>>) {
    for other in others {
        column.extend(other);
    }
    column.sort_by(Simplex2::cmp_order);
    let mut out: Vec<Simplex2> = Vec::with_capacity(column.len());
    let mut k = 0;
    while k < column.len() {
        let mut run = 1;
        while k + run < column.len() && column[k + run].code == column[k].code {
            run += 1;
        }
        if run % 2 == 1 {
            out.push(column[k]);
        }
        k += run;
    }
    *column = out;
}

fn one_dimensional(
    dist: &DistanceMatrix,
    threshold: f64,
    edges: &[Edge],
    paired_in_h0: &[bool],
) -> Vec<DiagramPoint> {
    let mut pairs = Vec::new();
    // pivot triangle code -> index into `reductions`
    let mut pivot_owner: HashMap<u64, usize> = HashMap::new();
    // For each reduced column: the edges whose coboundaries sum to it.
    let mut reductions: Vec<Vec<usize>> = Vec::new();

    for idx in (0..edges.len()).rev() {
        if paired_in_h0[idx] {
            continue;
        }
        let edge = &edges[idx];
        let mut column = coboundary(dist, threshold, edge);
        let mut sources = vec![idx];
        loop {
            let Some(pivot) = column.first().copied() else {
                pairs.push(DiagramPoint::new(edge.value, f64::INFINITY));
                break;
            };
            match pivot_owner.get(&pivot.code) {
                Some(&owner) => {
                    let owner_sources = &reductions[owner];
                    add_columns(
                        &mut column,
                        owner_sources
                            .iter()
                            .map(|&f| coboundary(dist, threshold, &edges[f])),
                    );
                    sources.extend_from_slice(owner_sources);
                    sources.sort_unstable();
                    dedup_mod2(&mut sources);
                }
                None => {
                    pivot_owner.insert(pivot.code, reductions.len());
                    reductions.push(sources);
                    if pivot.value > edge.value {
                        pairs.push(DiagramPoint::new(edge.value, pivot.value));
                    }
                    break;
                }
            }
        }
    }
    pairs
}

fn dedup_mod2(sorted: &mut Vec<usize>) {
    let mut out = Vec::with_capacity(sorted.len());
    let mut k = 0;
    while k < sorted.len() {
        let mut run = 1;
        while k + run < sorted.len() && sorted[k + run] == sorted[k] {
            run += 1;
        }
        if run % 2 == 1 {
            out.push(sorted[k]);
        }
        k += run;
    }
    *sorted = out;
}
