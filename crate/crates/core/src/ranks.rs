//! Center-outward ranks and signs, and the score functions applied to
//! vector ranks before forming test statistics.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grids::{Grid, ReferenceKind};
use crate::special::{chisq_quantile, normal_quantile};
use crate::transport::EmpiricalMap;

pub use crate::special::{inv_cdf_chisq, inv_cdf_normal};

/// Center-outward rank and sign of one observation. Observations mapped to
/// the origin get rank 0 and a zero sign.
#[derive(Debug, Clone, PartialEq)]
pub struct RankSign {
    pub rank: usize,
    pub sign: Vec<f64>,
}

/// Extracts ranks (shell indices) and signs (unit directions) from a map
/// onto a spherical grid.
pub fn extract_rank_sign(map: &EmpiricalMap<'_>) -> Result<Vec<RankSign>> {
    let grid = map.grid();
    if !grid.kind().is_spherical() {
        return Err(Error::Unsupported(format!(
            "{} vector ranks do not factorize into ranks and signs",
            grid.kind()
        )));
    }
    let perm = &map.assignment().perm;
    Ok(perm
        .iter()
        .map(|&j| {
            let rank = grid.shell_of(j).unwrap_or(0);
            let p = grid.point(j);
            let norm = p.iter().map(|x| x * x).sum::<f64>().sqrt();
            let sign = if rank == 0 || norm == 0.0 {
                vec![0.0; p.len()]
            } else {
                p.iter().map(|x| x / norm).collect()
            };
            RankSign { rank, sign }
        })
        .collect())
}

/// Score function applied to vector ranks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScoreKind {
    /// Identity scores.
    Wilcoxon,
    /// `sqrt(F_chi2_d^{-1}(|u|)) u / |u|`, for spherical-uniform grids.
    VdwSpherical,
    /// Componentwise normal quantiles, for cubic-uniform grids.
    VdwMarginal,
}

impl ScoreKind {
    pub const ALL: [ScoreKind; 3] = [ScoreKind::Wilcoxon, ScoreKind::VdwSpherical, ScoreKind::VdwMarginal];

    pub fn as_str(self) -> &'static str {
        match self {
            ScoreKind::Wilcoxon => "wilcoxon",
            ScoreKind::VdwSpherical => "vdw-spherical",
            ScoreKind::VdwMarginal => "vdw-marginal",
        }
    }

    /// Whether this score can be applied to vector ranks on `reference`.
    pub fn compatible_with(self, reference: ReferenceKind) -> bool {
        match self {
            ScoreKind::Wilcoxon => true,
            ScoreKind::VdwSpherical => reference == ReferenceKind::SphericalUniform,
            ScoreKind::VdwMarginal => reference == ReferenceKind::CubicUniform,
        }
    }
}

impl fmt::Display for ScoreKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScoreKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ScoreKind::ALL.into_iter().find(|k| k.as_str() == s).ok_or_else(|| {
            Error::InvalidArgument(format!(
                "unknown score `{s}` (expected wilcoxon, vdw-spherical or vdw-marginal)"
            ))
        })
    }
}

/// Evaluates the score function at `u`.
pub fn score(u: &[f64], kind: ScoreKind) -> Result<Vec<f64>> {
    let mut out = vec![0.0; u.len()];
    score_into(u, kind, &mut out)?;
    Ok(out)
}

fn score_into(u: &[f64], kind: ScoreKind, out: &mut [f64]) -> Result<()> {
    match kind {
        ScoreKind::Wilcoxon => out.copy_from_slice(u),
        ScoreKind::VdwSpherical => {
            let norm = u.iter().map(|x| x * x).sum::<f64>().sqrt();
            if !(norm < 1.0) {
                return invalid(format!("spherical van der Waerden score needs |u| < 1, got {norm}"));
            }
            if norm == 0.0 {
                out.fill(0.0);
            } else {
                let scale = chisq_quantile(norm, u.len()).sqrt() / norm;
                out.iter_mut().zip(u).for_each(|(o, x)| *o = scale * x);
            }
        }
        ScoreKind::VdwMarginal => {
            for (o, &x) in out.iter_mut().zip(u) {
                if !(x > 0.0 && x < 1.0) {
                    return invalid(format!("marginal van der Waerden score needs coordinates in (0,1), got {x}"));
                }
                *o = normal_quantile(x);
            }
        }
    }
    Ok(())
}

/// Scores of every gridpoint, row-major. Data only permutes these values.
pub fn grid_scores(grid: &Grid, kind: ScoreKind) -> Result<Vec<f64>> {
    if !kind.compatible_with(grid.kind()) {
        return invalid(format!("{kind} scores cannot be used with a {} grid", grid.kind()));
    }
    let mut out = vec![0.0; grid.flat_points().len()];
    for (u, o) in grid.points().zip(out.chunks_mut(grid.dim())) {
        score_into(u, kind, o)?;
    }
    Ok(out)
}

/// Per-observation scores `J(F^(n)(Z_i))`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredSample {
    pub dim: usize,
    pub values: Vec<f64>,
    pub score: ScoreKind,
    pub grid_id: String,
}

impl ScoredSample {
    pub fn len(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn value(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }
}

/// Applies the score function to every vector rank of `map`.
pub fn scored_sample(map: &EmpiricalMap<'_>, kind: ScoreKind) -> Result<ScoredSample> {
    let grid = map.grid();
    let scores = grid_scores(grid, kind)?;
    Ok(permuted_scores(&scores, grid, &map.assignment().perm, kind))
}

pub(crate) fn permuted_scores(scores: &[f64], grid: &Grid, perm: &[usize], kind: ScoreKind) -> ScoredSample {
    let d = grid.dim();
    let mut values = Vec::with_capacity(scores.len());
    for &j in perm {
        values.extend_from_slice(&scores[j * d..(j + 1) * d]);
    }
    ScoredSample { dim: d, values, score: kind, grid_id: grid.id() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Dataset;
    use crate::grids::{build_grid, Factorization};
    use crate::transport::empirical_map;

    fn sorted_rows(values: &[f64], d: usize) -> Vec<Vec<f64>> {
        let mut rows: Vec<Vec<f64>> = values.chunks(d).map(<[f64]>::to_vec).collect();
        rows.sort_by(|a, b| a.iter().zip(b).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal));
        rows
    }

    fn sample(n: usize, d: usize, seed: u64) -> Dataset {
        let mut s = seed;
        let vals = (0..n * d)
            .map(|_| {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                ((s >> 11) as f64 / (1u64 << 53) as f64) * 4.0 - 2.0
            })
            .collect();
        Dataset::new(d, vals).unwrap()
    }

    #[test]
    fn wilcoxon_is_identity() {
        assert_eq!(score(&[0.3, -0.4], ScoreKind::Wilcoxon).unwrap(), vec![0.3, -0.4]);
    }

    #[test]
    fn spherical_vdw_closed_form() {
        let s = score(&[0.5, 0.0], ScoreKind::VdwSpherical).unwrap();
        assert!((s[0] - (-2.0f64 * 0.5f64.ln()).sqrt()).abs() < 1e-12);
        assert!((s[0] - 1.17741).abs() < 1e-5);
        assert_eq!(s[1], 0.0);
        assert_eq!(score(&[0.0, 0.0], ScoreKind::VdwSpherical).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn marginal_vdw_at_median() {
        assert_eq!(score(&[0.5, 0.5], ScoreKind::VdwMarginal).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn score_domain_errors() {
        assert!(score(&[0.8, 0.8], ScoreKind::VdwSpherical).is_err());
        assert!(score(&[0.0, 0.5], ScoreKind::VdwMarginal).is_err());
        assert!(score(&[1.0], ScoreKind::VdwMarginal).is_err());
    }

    #[test]
    fn ranks_count_shell_multiplicities() {
        let f = Factorization::new(6, 16, 4).unwrap();
        let grid = build_grid(2, 100, ReferenceKind::SphericalUniform, Some(f)).unwrap();
        let map = empirical_map(&sample(100, 2, 3), &grid).unwrap();
        let rs = extract_rank_sign(&map).unwrap();
        for j in 1..=6 {
            assert_eq!(rs.iter().filter(|r| r.rank == j).count(), 16);
        }
        assert_eq!(rs.iter().filter(|r| r.rank == 0).count(), 4);
        for (i, r) in rs.iter().enumerate() {
            let img = map.image(i);
            if r.rank == 0 {
                assert!(r.sign.iter().all(|&x| x == 0.0));
                assert!(img.iter().all(|&x| x == 0.0));
            } else {
                let n: f64 = r.sign.iter().map(|x| x * x).sum::<f64>().sqrt();
                assert!((n - 1.0).abs() < 1e-12);
                for k in 0..2 {
                    assert!((r.rank as f64 / 7.0 * r.sign[k] - img[k]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn cubic_grids_have_no_ranks_and_signs() {
        let grid = build_grid(2, 20, ReferenceKind::CubicUniform, None).unwrap();
        let map = empirical_map(&sample(20, 2, 1), &grid).unwrap();
        assert!(matches!(extract_rank_sign(&map), Err(Error::Unsupported(_))));
    }

    #[test]
    fn incompatible_pairs_are_rejected() {
        let grid = build_grid(2, 20, ReferenceKind::CubicUniform, None).unwrap();
        let map = empirical_map(&sample(20, 2, 1), &grid).unwrap();
        assert!(scored_sample(&map, ScoreKind::VdwSpherical).is_err());
        let f = Factorization::new(4, 5, 0).unwrap();
        let grid = build_grid(2, 20, ReferenceKind::GaussianSpherical, Some(f)).unwrap();
        let map = empirical_map(&sample(20, 2, 1), &grid).unwrap();
        assert!(scored_sample(&map, ScoreKind::VdwMarginal).is_err());
        assert!(scored_sample(&map, ScoreKind::VdwSpherical).is_err());
    }

    #[test]
    fn score_multiset_is_data_free() {
        let f = Factorization::new(3, 10, 2).unwrap();
        let grid = build_grid(3, 32, ReferenceKind::SphericalUniform, Some(f)).unwrap();
        let a = scored_sample(&empirical_map(&sample(32, 3, 5), &grid).unwrap(), ScoreKind::VdwSpherical).unwrap();
        let b = scored_sample(&empirical_map(&sample(32, 3, 9), &grid).unwrap(), ScoreKind::VdwSpherical).unwrap();
        assert_eq!(sorted_rows(&a.values, 3), sorted_rows(&b.values, 3));
        let sum = |s: &ScoredSample| (0..3).map(|k| s.values.iter().skip(k).step_by(3).sum::<f64>()).collect::<Vec<_>>();
        for (x, y) in sum(&a).iter().zip(sum(&b)) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn spherical_vdw_matches_gaussian_grid() {
        let f = Factorization::new(5, 12, 3).unwrap();
        let uni = build_grid(2, 63, ReferenceKind::SphericalUniform, Some(f)).unwrap();
        let gau = build_grid(2, 63, ReferenceKind::GaussianSpherical, Some(f)).unwrap();
        let a = grid_scores(&uni, ScoreKind::VdwSpherical).unwrap();
        let b = grid_scores(&gau, ScoreKind::Wilcoxon).unwrap();
        for (x, y) in sorted_rows(&a, 2).iter().zip(sorted_rows(&b, 2)) {
            for (p, q) in x.iter().zip(&y) {
                assert!((p - q).abs() < 1e-12);
            }
        }
        for j in 1..=5 {
            let want = chisq_quantile(j as f64 / 6.0, 2).sqrt();
            let i = (j - 1) * 12;
            let norm = a[2 * i].hypot(a[2 * i + 1]);
            assert!((norm - want).abs() < 1e-12);
        }
    }

    #[test]
    fn univariate_marginal_scores_are_monotone() {
        let grid = build_grid(1, 13, ReferenceKind::CubicUniform, None).unwrap();
        let map = empirical_map(&sample(13, 1, 2), &grid).unwrap();
        let s = scored_sample(&map, ScoreKind::VdwMarginal).unwrap();
        let mut got = s.values.clone();
        got.sort_by(f64::total_cmp);
        let mut pts: Vec<f64> = grid.flat_points().to_vec();
        pts.sort_by(f64::total_cmp);
        for (g, u) in got.iter().zip(pts) {
            assert_eq!(*g, normal_quantile(u));
        }
    }
}
