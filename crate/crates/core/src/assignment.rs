//! Dense assignment solvers used by the transport distances.

/// Solves the square linear assignment problem on a row-major `n x n` cost
/// matrix with the O(n^3) shortest-augmenting-path Hungarian method.
///
/// Returns `assignment[row] = column`.
pub fn hungarian(n: usize, cost: &[f64]) -> Vec<usize> {
    debug_assert_eq!(cost.len(), n * n);
    if n == 0 {
        return Vec::new();
    }
    // 1-based potentials; column 0 is the virtual root of each search.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut row_of = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut minv = vec![f64::INFINITY; n + 1];
    let mut used = vec![false; n + 1];

    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0usize;
        minv.fill(f64::INFINITY);
        used.fill(false);
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let row = &cost[(i0 - 1) * n..i0 * n];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = row[j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut assignment = vec![0usize; n];
    for j in 1..=n {
        if row_of[j] > 0 {
            assignment[row_of[j] - 1] = j - 1;
        }
    }
    assignment
}

/// Minimum total cost of a perfect matching.
pub fn min_cost(n: usize, cost: &[f64]) -> f64 {
    hungarian(n, cost)
        .iter()
        .enumerate()
        .map(|(i, &j)| cost[i * n + j])
        .sum()
}

/// Whether the bipartite graph with an edge `(i, j)` wherever
/// `cost[i * n + j] <= limit` has a perfect matching (Hopcroft-Karp).
pub fn has_perfect_matching(n: usize, cost: &[f64], limit: f64) -> bool {
    const FREE: usize = usize::MAX;
    let adj: Vec<Vec<usize>> = (0..n)
        .map(|i| (0..n).filter(|&j| cost[i * n + j] <= limit).collect())
        .collect();
    if adj.iter().any(Vec::is_empty) {
        return false;
    }
    let mut match_row = vec![FREE; n];
    let mut match_col = vec![FREE; n];
    let mut layer = vec![0usize; n];
    let mut matched = 0;

    loop {
        // BFS layering from free rows.
        let mut queue = std::collections::VecDeque::new();
        for i in 0..n {
            if match_row[i] == FREE {
                layer[i] = 0;
                queue.push_back(i);
            } else {
                layer[i] = usize::MAX;
            }
        }
        let mut found = false;
        while let Some(i) = queue.pop_front() {
            for &j in &adj[i] {
                let r = match_col[j];
                if r == FREE {
                    found = true;
                } else if layer[r] == usize::MAX {
                    layer[r] = layer[i] + 1;
                    queue.push_back(r);
                }
            }
        }
        if !found {
            break;
        }
        let mut next = vec![0usize; n];
        for i in 0..n {
            if match_row[i] == FREE
                && augment(i, &adj, &mut match_row, &mut match_col, &mut layer, &mut next)
            {
                matched += 1;
            }
        }
    }
    matched == n
}

fn augment(
    i: usize,
    adj: &[Vec<usize>],
    match_row: &mut [usize],
    match_col: &mut [usize],
    layer: &mut [usize],
    next: &mut [usize],
) -> bool {
    while next[i] < adj[i].len() {
        let j = adj[i][next[i]];
        next[i] += 1;
        let r = match_col[j];
        let ok = r == usize::MAX
            || (layer[r] == layer[i] + 1 && augment(r, adj, match_row, match_col, layer, next));
        if ok {
            match_row[i] = j;
            match_col[j] = i;
            return true;
        }
    }
    layer[i] = usize::MAX;
    false
}

/// Smallest `c` among the matrix entries such that a perfect matching using
/// only entries `<= c` exists.
pub fn min_bottleneck(n: usize, cost: &[f64]) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let mut candidates: Vec<f64> = cost.to_vec();
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();
    let (mut lo, mut hi) = (0usize, candidates.len() - 1);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if has_perfect_matching(n, cost, candidates[mid]) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    candidates[lo]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute(n: usize, cost: &[f64], fold: impl Fn(f64, f64) -> f64, init: f64) -> f64 {
        fn rec(
            row: usize,
            n: usize,
            used: &mut Vec<bool>,
            acc: f64,
            cost: &[f64],
            fold: &dyn Fn(f64, f64) -> f64,
            best: &mut f64,
        ) {
            if row == n {
                *best = best.min(acc);
                return;
            }
            for j in 0..n {
                if !used[j] {
                    used[j] = true;
                    rec(row + 1, n, used, fold(acc, cost[row * n + j]), cost, fold, best);
                    used[j] = false;
                }
            }
        }
        let mut best = f64::INFINITY;
        rec(0, n, &mut vec![false; n], init, cost, &fold, &mut best);
        best
    }

    #[test]
    fn small_assignment() {
        let cost = [4.0, 1.0, 3.0, 2.0, 0.0, 5.0, 3.0, 2.0, 2.0];
        assert_eq!(min_cost(3, &cost), 5.0);
        let a = hungarian(3, &cost);
        let mut seen = a.clone();
        seen.sort_unstable();
        assert_eq!(seen, vec![0, 1, 2]);
    }

    #[test]
    fn empty_problem() {
        assert!(hungarian(0, &[]).is_empty());
        assert_eq!(min_bottleneck(0, &[]), 0.0);
    }

    #[test]
    fn matches_enumeration_on_pseudo_random_matrices() {
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut next = || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state % 1000) as f64 / 37.0
        };
        for n in 1..=6 {
            for _ in 0..20 {
                let cost: Vec<f64> = (0..n * n).map(|_| next()).collect();
                let sum = brute(n, &cost, |a, b| a + b, 0.0);
                assert!((min_cost(n, &cost) - sum).abs() < 1e-9);
                let max = brute(n, &cost, f64::max, 0.0);
                assert_eq!(min_bottleneck(n, &cost), max);
            }
        }
    }

    #[test]
    fn matching_feasibility() {
        let cost = [0.0, 5.0, 5.0, 0.0];
        assert!(has_perfect_matching(2, &cost, 0.0));
        let cost = [0.0, 5.0, 0.0, 5.0];
        assert!(!has_perfect_matching(2, &cost, 1.0));
        assert!(has_perfect_matching(2, &cost, 5.0));
    }
}
