//! Exact solver for the balanced transportation problem.
//!
//! Primal simplex on the spanning-tree basis (the MODI / u-v method): a
//! north-west-corner start, duals from the basis tree, Bland's rule for the
//! entering and leaving cells. Termination is certified by checking dual
//! feasibility and complementary slackness of the final solution.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransportError {
    #[error("supplies and demands must be non-empty")]
    Empty,
    #[error("cost matrix is {rows}x{cols}, expected {expected_rows}x{expected_cols}")]
    Shape { rows: usize, cols: usize, expected_rows: usize, expected_cols: usize },
    #[error("masses must be finite and non-negative")]
    BadMass,
    #[error("supply total {supply} differs from demand total {demand}")]
    Unbalanced { supply: f64, demand: f64 },
    #[error("costs must be finite")]
    BadCost,
    #[error("simplex exceeded {0} pivots without reaching optimality")]
    IterationLimit(usize),
    #[error("optimality certificate failed: residual {residual:e}, most negative reduced cost {min_reduced:e}")]
    Certificate { residual: f64, min_reduced: f64 },
}

/// Optimal plan with its dual certificate.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportSolution {
    /// Non-zero flows `(row, col, amount)` in row-major order.
    pub flows: Vec<(usize, usize, f64)>,
    pub cost: f64,
    /// Row potentials `u` and column potentials `v` with `u_i + v_j <= c_ij`.
    pub row_potentials: Vec<f64>,
    pub col_potentials: Vec<f64>,
    /// `Σ T_ij |c_ij - u_i - v_j|`, zero at an exact optimum.
    pub slackness_residual: f64,
    pub pivots: usize,
}

pub const CERTIFICATE_TOLERANCE: f64 = 1e-9;

/// Minimizes `Σ T_ij c_ij` subject to row sums `supply`, column sums
/// `demand`, `T >= 0`. `cost` is row-major `supply.len() x demand.len()`.
pub fn solve_transport(supply: &[f64], demand: &[f64], cost: &[f64]) -> Result<TransportSolution, TransportError> {
    let (m, n) = (supply.len(), demand.len());
    if m == 0 || n == 0 {
        return Err(TransportError::Empty);
    }
    if cost.len() != m * n {
        return Err(TransportError::Shape { rows: cost.len() / n.max(1), cols: n, expected_rows: m, expected_cols: n });
    }
    if supply.iter().chain(demand).any(|x| !x.is_finite() || *x < 0.0) {
        return Err(TransportError::BadMass);
    }
    if cost.iter().any(|c| !c.is_finite()) {
        return Err(TransportError::BadCost);
    }
    let (total_s, total_d) = (supply.iter().sum::<f64>(), demand.iter().sum::<f64>());
    if (total_s - total_d).abs() > 1e-9 * total_s.max(total_d).max(1.0) {
        return Err(TransportError::Unbalanced { supply: total_s, demand: total_d });
    }

    let scale = cost.iter().fold(0.0f64, |a, c| a.max(c.abs()));
    let eps = 1e-12 * (1.0 + scale);
    let mut tableau = Tableau::north_west(supply, demand, m, n);

    let limit = 50 * (m * n) + 1000;
    let mut pivots = 0;
    loop {
        let (u, v) = tableau.potentials(cost);
        let entering = (0..m * n).find(|&k| {
            let (i, j) = (k / n, k % n);
            !tableau.basic[k] && cost[k] - u[i] - v[j] < -eps
        });
        let Some(k) = entering else {
            return certify(&tableau, cost, u, v, pivots);
        };
        if pivots == limit {
            return Err(TransportError::IterationLimit(limit));
        }
        tableau.pivot(k / n, k % n);
        pivots += 1;
    }
}

struct Tableau {
    m: usize,
    n: usize,
    flow: Vec<f64>,
    basic: Vec<bool>,
}

impl Tableau {
    /// North-west-corner start; exactly `m + n - 1` basic cells forming a
    /// spanning tree, zero-flow cells included when a row and column empty
    /// together.
    fn north_west(supply: &[f64], demand: &[f64], m: usize, n: usize) -> Self {
        let mut flow = vec![0.0; m * n];
        let mut basic = vec![false; m * n];
        let (mut rem_s, mut rem_d) = (supply.to_vec(), demand.to_vec());
        let (mut i, mut j) = (0, 0);
        loop {
            let k = i * n + j;
            basic[k] = true;
            if i == m - 1 && j == n - 1 {
                // Absorb rounding differences between the two totals.
                flow[k] = rem_s[i].max(rem_d[j]).max(0.0);
                break;
            }
            let x = rem_s[i].min(rem_d[j]).max(0.0);
            flow[k] = x;
            rem_s[i] -= x;
            rem_d[j] -= x;
            if j == n - 1 || (i < m - 1 && rem_s[i] <= rem_d[j]) {
                i += 1;
            } else {
                j += 1;
            }
        }
        Self { m, n, flow, basic }
    }

    /// Tree adjacency over nodes `0..m` (rows) and `m..m+n` (columns).
    fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.m + self.n];
        for k in (0..self.m * self.n).filter(|&k| self.basic[k]) {
            let (i, j) = (k / self.n, k % self.n);
            adj[i].push(self.m + j);
            adj[self.m + j].push(i);
        }
        adj
    }

    /// Solves `u_i + v_j = c_ij` on basic cells with `u_0 = 0`.
    fn potentials(&self, cost: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let (m, n) = (self.m, self.n);
        let adj = self.adjacency();
        let mut pot = vec![f64::NAN; m + n];
        pot[0] = 0.0;
        let mut stack = vec![0];
        while let Some(node) = stack.pop() {
            for &next in &adj[node] {
                if pot[next].is_nan() {
                    let (i, j) = if node < m { (node, next - m) } else { (next, node - m) };
                    pot[next] = cost[i * n + j] - pot[node];
                    stack.push(next);
                }
            }
        }
        debug_assert!(pot.iter().all(|p| !p.is_nan()), "basis is not a spanning tree");
        (pot[..m].to_vec(), pot[m..].to_vec())
    }

    /// Tree path from row node `i` to column node `m + j`, as cell indices.
    fn path(&self, i: usize, j: usize) -> Vec<usize> {
        let (m, n) = (self.m, self.n);
        let adj = self.adjacency();
        let mut parent = vec![usize::MAX; m + n];
        parent[i] = i;
        let mut stack = vec![i];
        while let Some(node) = stack.pop() {
            if node == m + j {
                break;
            }
            for &next in &adj[node] {
                if parent[next] == usize::MAX {
                    parent[next] = node;
                    stack.push(next);
                }
            }
        }
        let mut cells = Vec::new();
        let mut node = m + j;
        while node != i {
            let prev = parent[node];
            let (r, c) = if node < m { (node, prev - m) } else { (prev, node - m) };
            cells.push(r * n + c);
            node = prev;
        }
        cells.reverse();
        cells
    }

    fn pivot(&mut self, i: usize, j: usize) {
        let entering = i * self.n + j;
        let path = self.path(i, j);
        // Along the path from row i, cells alternate -, +, -, ...
        let minus: Vec<usize> = path.iter().copied().step_by(2).collect();
        let plus: Vec<usize> = path.iter().copied().skip(1).step_by(2).collect();
        let theta = minus.iter().map(|&k| self.flow[k]).fold(f64::INFINITY, f64::min);
        let leaving = *minus.iter().filter(|&&k| self.flow[k] <= theta).min().expect("cycle has a decreasing cell");

        for &k in &minus {
            self.flow[k] = (self.flow[k] - theta).max(0.0);
        }
        for &k in &plus {
            self.flow[k] += theta;
        }
        self.flow[entering] = theta;
        self.flow[leaving] = 0.0;
        self.basic[entering] = true;
        self.basic[leaving] = false;
    }
}

fn certify(
    tableau: &Tableau,
    cost: &[f64],
    u: Vec<f64>,
    v: Vec<f64>,
    pivots: usize,
) -> Result<TransportSolution, TransportError> {
    let n = tableau.n;
    let mut residual = 0.0;
    let mut min_reduced = 0.0f64;
    let mut flows = Vec::new();
    let mut total = 0.0;
    for (k, &c) in cost.iter().enumerate() {
        let (i, j) = (k / n, k % n);
        let reduced = c - u[i] - v[j];
        min_reduced = min_reduced.min(reduced);
        let t = tableau.flow[k];
        if t > 0.0 {
            residual += t * reduced.abs();
            flows.push((i, j, t));
            total += t * c;
        }
    }
    let scale = 1.0 + cost.iter().fold(0.0f64, |a, c| a.max(c.abs()));
    if residual > CERTIFICATE_TOLERANCE || min_reduced < -CERTIFICATE_TOLERANCE * scale {
        return Err(TransportError::Certificate { residual, min_reduced });
    }
    Ok(TransportSolution {
        flows,
        cost: total,
        row_potentials: u,
        col_potentials: v,
        slackness_residual: residual,
        pivots,
    })
}
