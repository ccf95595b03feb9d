//! Independent oracles shared by integration tests.
#![allow(dead_code)]

/// Exact transportation optimum by enumerating every basic solution: each
/// spanning tree of `m + n - 1` cells in the bipartite row/column graph
/// determines a unique flow; the feasible ones include every vertex of the
/// polytope, so the cheapest is the optimum. Only for tiny instances.
pub fn vertex_enumeration_emd(supply: &[f64], demand: &[f64], cost: &[f64]) -> f64 {
    let (m, n) = (supply.len(), demand.len());
    let cells: Vec<(usize, usize)> = (0..m).flat_map(|i| (0..n).map(move |j| (i, j))).collect();
    let k = m + n - 1;
    let mut best = f64::INFINITY;
    let mut pick = Vec::with_capacity(k);
    subsets(&cells, k, 0, &mut pick, &mut |chosen| {
        if let Some(flows) = tree_flows(supply, demand, chosen) {
            if flows.iter().all(|&f| f >= -1e-12) {
                let c: f64 = chosen.iter().zip(&flows).map(|(&(i, j), f)| f * cost[i * n + j]).sum();
                best = best.min(c);
            }
        }
    });
    best
}

fn subsets<F: FnMut(&[(usize, usize)])>(
    cells: &[(usize, usize)],
    k: usize,
    start: usize,
    pick: &mut Vec<(usize, usize)>,
    visit: &mut F,
) {
    if pick.len() == k {
        visit(pick);
        return;
    }
    for idx in start..cells.len() {
        if cells.len() - idx < k - pick.len() {
            break;
        }
        pick.push(cells[idx]);
        subsets(cells, k, idx + 1, pick, visit);
        pick.pop();
    }
}

/// Flows on a spanning tree by peeling leaves; `None` if the cells contain a
/// cycle (and hence do not span).
fn tree_flows(supply: &[f64], demand: &[f64], cells: &[(usize, usize)]) -> Option<Vec<f64>> {
    let m = supply.len();
    let nodes = m + demand.len();
    let mut remaining: Vec<f64> = supply.iter().chain(demand).copied().collect();
    let mut degree = vec![0usize; nodes];
    for &(i, j) in cells {
        degree[i] += 1;
        degree[m + j] += 1;
    }
    let mut flows = vec![f64::NAN; cells.len()];
    let mut done = vec![false; cells.len()];
    for _ in 0..cells.len() {
        let (e, leaf) = cells.iter().enumerate().filter(|(e, _)| !done[*e]).find_map(|(e, &(i, j))| {
            if degree[i] == 1 {
                Some((e, i))
            } else if degree[m + j] == 1 {
                Some((e, m + j))
            } else {
                None
            }
        })?;
        let (i, j) = cells[e];
        let other = if leaf == i { m + j } else { i };
        let f = remaining[leaf];
        flows[e] = f;
        remaining[leaf] = 0.0;
        remaining[other] -= f;
        degree[i] -= 1;
        degree[m + j] -= 1;
        done[e] = true;
    }
    Some(flows)
}

/// `(n Σxy - Σx Σy) / sqrt((n Σx² - (Σx)²)(n Σy² - (Σy)²))`.
pub fn pearson_raw(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (sx, sy) = (x.iter().sum::<f64>(), y.iter().sum::<f64>());
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let sxx: f64 = x.iter().map(|a| a * a).sum();
    let syy: f64 = y.iter().map(|b| b * b).sum();
    (n * sxy - sx * sy) / ((n * sxx - sx * sx) * (n * syy - sy * sy)).sqrt()
}

/// Average rank: `#{less} + (#{equal} + 1) / 2`.
pub fn rank_by_counting(x: &[f64]) -> Vec<f64> {
    x.iter()
        .map(|&v| {
            let less = x.iter().filter(|&&w| w < v).count() as f64;
            let equal = x.iter().filter(|&&w| w == v).count() as f64;
            less + (equal + 1.0) / 2.0
        })
        .collect()
}

pub fn spearman_oracle(x: &[f64], y: &[f64]) -> f64 {
    pearson_raw(&rank_by_counting(x), &rank_by_counting(y))
}

/// Tau-b from explicit concordant / discordant / tied pair classes.
pub fn kendall_oracle(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len();
    let (mut c, mut d, mut tx, mut ty) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..n {
        for j in (i + 1)..n {
            let (px, py) = (x[i] - x[j], y[i] - y[j]);
            if px == 0.0 {
                tx += 1.0;
            }
            if py == 0.0 {
                ty += 1.0;
            }
            if px * py > 0.0 {
                c += 1.0;
            } else if px * py < 0.0 {
                d += 1.0;
            }
        }
    }
    let total = (n * (n - 1)) as f64 / 2.0;
    (c - d) / ((total - tx) * (total - ty)).sqrt()
}
