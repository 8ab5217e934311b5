//! Exact 2-Wasserstein distance between a grid measure and a QMC
//! discretization of its reference law.
//!
//! Both measures are uniform over their atoms, and the number of target
//! points is a multiple of the number of grid points, so the problem is a
//! balanced transportation problem with integer capacities: every target
//! point carries one unit and every grid point accepts `m / n` units. It is
//! solved by successive shortest augmenting paths over the grid points
//! (a capacitated Jonker-Volgenant scheme with column potentials).

use super::{reference_qmc, Grid};
use crate::error::{invalid, Error, Result};

const NONE: usize = usize::MAX;

/// Default size of the reference discretization: `max(2000, 30 n)`,
/// rounded up to a multiple of `n`. The Gaussian tail needs the finer end.
pub fn default_discretization_size(n: usize) -> usize {
    round_to_multiple(2000.max(30 * n), n)
}

fn round_to_multiple(m: usize, n: usize) -> usize {
    m.div_ceil(n) * n
}

/// 2-Wasserstein distance between the grid measure (mass `1/n` per point,
/// origin copies adding up) and the `m`-point QMC discretization of the
/// grid's reference law. `m` is rounded up to a multiple of `n`.
pub fn w2_to_reference(grid: &Grid, m: usize) -> Result<f64> {
    if !grid.kind().is_spherical() {
        return invalid(format!("w2_to_reference needs a spherical grid, got {}", grid.kind()));
    }
    let n = grid.len();
    if m < 10 * n {
        return invalid(format!("discretization size {m} is below 10 n = {}", 10 * n));
    }
    let m = round_to_multiple(m, n);
    let targets = reference_qmc(grid.dim(), m, grid.kind());
    uniform_w2(grid.flat_points(), &targets, grid.dim())
}

/// Exact 2-Wasserstein distance between the uniform measures on `sources`
/// and `targets`, where `targets.len()` is a multiple of `sources.len()`.
pub fn transport_w2(sources: &[Vec<f64>], targets: &[Vec<f64>]) -> Result<f64> {
    let dim = match sources.first() {
        Some(p) => p.len(),
        None => return invalid("transport_w2: no source points"),
    };
    if targets.is_empty() || !targets.len().is_multiple_of(sources.len()) {
        return invalid(format!(
            "transport_w2: {} targets is not a positive multiple of {} sources",
            targets.len(),
            sources.len()
        ));
    }
    if sources.iter().chain(targets).any(|p| p.len() != dim) {
        return invalid("transport_w2: points of mixed dimension");
    }
    uniform_w2(&sources.concat(), &targets.concat(), dim)
}

pub(crate) fn uniform_w2(sources: &[f64], targets: &[f64], dim: usize) -> Result<f64> {
    let n = sources.len() / dim;
    let m = targets.len() / dim;
    let cap = m / n;
    if cap * n != m {
        return Err(Error::Internal(format!(
            "unbalanced transport: {m} target units cannot be split evenly over {n} sources"
        )));
    }
    let mut cost = Vec::with_capacity(m * n);
    for t in targets.chunks(dim) {
        cost.extend(sources.chunks(dim).map(|s| {
            s.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
        }));
    }
    let total = capacitated_assignment(&cost, m, n, cap);
    Ok((total / m as f64).max(0.0).sqrt())
}

/// Minimum-cost assignment of `rows` unit demands to `cols` columns, each
/// accepting exactly `cap` rows (`rows == cols * cap`). `cost` is row-major.
/// Returns the optimal total cost.
fn capacitated_assignment(cost: &[f64], rows: usize, cols: usize, cap: usize) -> f64 {
    debug_assert_eq!(rows, cols * cap);
    let mut v = vec![0.0f64; cols];
    let mut members: Vec<Vec<usize>> = vec![Vec::with_capacity(cap); cols];
    let mut col_of = vec![NONE; rows];
    let mut slot = vec![0usize; rows];

    let mut dist = vec![0.0f64; cols];
    let mut pred = vec![NONE; cols];
    let mut settled_list = Vec::with_capacity(cols);
    let mut open: Vec<usize> = Vec::with_capacity(cols);

    for s in 0..rows {
        let row = &cost[s * cols..(s + 1) * cols];
        for j in 0..cols {
            dist[j] = row[j] - v[j];
            pred[j] = NONE;
        }
        settled_list.clear();
        open.clear();
        open.extend(0..cols);

        // Dijkstra over columns; a full column is expanded through the rows
        // it currently holds.
        let target = loop {
            let (pos, &j) = open
                .iter()
                .enumerate()
                .min_by(|a, b| dist[*a.1].total_cmp(&dist[*b.1]))
                .expect("a column with spare capacity always exists");
            if members[j].len() < cap {
                break j;
            }
            open.swap_remove(pos);
            settled_list.push(j);
            let dj = dist[j];
            for &r in &members[j] {
                let rr = &cost[r * cols..(r + 1) * cols];
                let base = dj - (rr[j] - v[j]);
                for &k in &open {
                    let nd = base + rr[k] - v[k];
                    if nd < dist[k] {
                        dist[k] = nd;
                        pred[k] = r;
                    }
                }
            }
        };

        let reach = dist[target];
        for &j in &settled_list {
            v[j] -= reach - dist[j];
        }

        // Shift rows along the alternating path, ending with `s`.
        let mut j = target;
        loop {
            let r = pred[j];
            if r == NONE {
                attach(s, j, &mut members, &mut col_of, &mut slot);
                break;
            }
            let from = col_of[r];
            detach(r, &mut members, &mut col_of, &mut slot);
            attach(r, j, &mut members, &mut col_of, &mut slot);
            j = from;
        }
    }

    (0..rows).map(|r| cost[r * cols + col_of[r]]).sum()
}

fn attach(r: usize, j: usize, members: &mut [Vec<usize>], col_of: &mut [usize], slot: &mut [usize]) {
    slot[r] = members[j].len();
    members[j].push(r);
    col_of[r] = j;
}

fn detach(r: usize, members: &mut [Vec<usize>], col_of: &mut [usize], slot: &mut [usize]) {
    let j = col_of[r];
    let pos = slot[r];
    members[j].swap_remove(pos);
    if let Some(&moved) = members[j].get(pos) {
        slot[moved] = pos;
    }
    col_of[r] = NONE;
}
