//! Empirical center-outward and vector-rank maps: the optimal pairing of
//! observations with gridpoints under squared Euclidean cost.

use crate::dataset::Dataset;
use crate::error::{invalid, Result};
use crate::grids::Grid;

/// Dense square cost matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    n: usize,
    data: Vec<f64>,
}

impl CostMatrix {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return invalid("cost matrix must be square");
        }
        Ok(CostMatrix { n, data: rows.concat() })
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }
}

/// Optimal pairing: observation `i` goes to gridpoint `perm[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub perm: Vec<usize>,
    pub total_cost: f64,
}

/// Squared distances between every observation and every gridpoint.
pub fn cost_matrix(data: &Dataset, grid: &Grid) -> Result<CostMatrix> {
    if data.len() != grid.len() {
        return invalid(format!(
            "sample has {} observations but the grid has {} points",
            data.len(),
            grid.len()
        ));
    }
    if data.dim() != grid.dim() {
        return invalid(format!(
            "sample dimension {} does not match grid dimension {}",
            data.dim(),
            grid.dim()
        ));
    }
    let n = data.len();
    let mut out = Vec::with_capacity(n * n);
    for z in data.rows() {
        out.extend(grid.points().map(|g| {
            z.iter().zip(g).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
        }));
    }
    Ok(CostMatrix { n, data: out })
}

/// Exact linear assignment by shortest augmenting paths (Hungarian method
/// with row and column potentials), `O(n^3)`.
///
/// Rows are inserted in index order and columns scanned in index order with
/// strict comparisons, so the result is deterministic.
pub fn solve_assignment(cost: &CostMatrix) -> Result<Assignment> {
    let n = cost.n;
    if n == 0 {
        return invalid("empty cost matrix");
    }
    if cost.data.iter().any(|x| !x.is_finite()) {
        return invalid("cost matrix contains non-finite entries");
    }

    // 1-based potentials; column 0 is the virtual start of each search.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut minv = vec![f64::INFINITY; n + 1];
    let mut used = vec![false; n + 1];

    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0usize;
        minv.fill(f64::INFINITY);
        used.fill(false);
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let row = cost.row(i0 - 1);
            let ui0 = u[i0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = row[j - 1] - ui0 - v[j];
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
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut perm = vec![0usize; n];
    for j in 1..=n {
        perm[owner[j] - 1] = j - 1;
    }
    let total_cost = perm.iter().enumerate().map(|(i, &j)| cost.get(i, j)).sum();
    Ok(Assignment { perm, total_cost })
}

/// The empirical transport map of a sample onto a grid.
#[derive(Debug, Clone)]
pub struct EmpiricalMap<'g> {
    grid: &'g Grid,
    assignment: Assignment,
}

impl<'g> EmpiricalMap<'g> {
    pub fn grid(&self) -> &'g Grid {
        self.grid
    }

    pub fn assignment(&self) -> &Assignment {
        &self.assignment
    }

    pub fn len(&self) -> usize {
        self.assignment.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.perm.is_empty()
    }

    /// Vector rank of observation `i`.
    pub fn image(&self, i: usize) -> &'g [f64] {
        self.grid.point(self.assignment.perm[i])
    }

    pub fn images(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|i| self.image(i).to_vec()).collect()
    }
}

/// Pairs each observation with a distinct gridpoint so that the total
/// squared distance is minimal.
pub fn empirical_map<'g>(data: &Dataset, grid: &'g Grid) -> Result<EmpiricalMap<'g>> {
    let cost = cost_matrix(data, grid)?;
    let assignment = solve_assignment(&cost)?;
    Ok(EmpiricalMap { grid, assignment })
}
