//! Quadratic two-sample statistics on scored vector ranks, Hotelling's T²
//! baseline, and distribution-free Monte-Carlo calibration.

mod cache;
mod critical;

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{invalid, Error, Result};
use crate::grids::ReferenceKind;
use crate::ranks::{ScoreKind, ScoredSample};
use crate::special::{chisq_quantile, chisq_sf};

pub use cache::CriticalValueCache;
pub use critical::{
    mc_critical_value, order_statistic_index, two_sample_test, CriticalValueKey, CriticalValueTable, RankTest,
    TwoSampleConfig,
};

/// Eigenvalues below this fraction of the largest one are dropped when
/// pseudo-inverting a covariance matrix.
pub const PINV_RELATIVE_TOLERANCE: f64 = 1e-10;

/// Relative slack in comparisons between statistics. Values that agree in
/// exact arithmetic can differ by a few ulps after different summation orders.
pub(crate) const TIE_TOLERANCE: f64 = 1e-9;

pub(crate) fn exceeds(statistic: f64, threshold: f64) -> bool {
    statistic > threshold + TIE_TOLERANCE * threshold.abs().max(1.0)
}

/// Outcome of one two-sample test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub critical_value: f64,
    pub p_value: f64,
    pub reject: bool,
}

/// Identifiers of the tests compared in simulations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestKind {
    Hotelling,
    WilcoxonSpherical,
    WilcoxonCubic,
    VdwSpherical,
    VdwCubic,
    VdwGaussianSpherical,
    VdwGaussianCubic,
}

impl TestKind {
    pub const ALL: [TestKind; 7] = [
        TestKind::Hotelling,
        TestKind::WilcoxonSpherical,
        TestKind::WilcoxonCubic,
        TestKind::VdwSpherical,
        TestKind::VdwCubic,
        TestKind::VdwGaussianSpherical,
        TestKind::VdwGaussianCubic,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TestKind::Hotelling => "hotelling",
            TestKind::WilcoxonSpherical => "wilcoxon-spherical",
            TestKind::WilcoxonCubic => "wilcoxon-cubic",
            TestKind::VdwSpherical => "vdw-spherical",
            TestKind::VdwCubic => "vdw-cubic",
            TestKind::VdwGaussianSpherical => "vdw-gaussian-spherical",
            TestKind::VdwGaussianCubic => "vdw-gaussian-cubic",
        }
    }

    /// Reference grid and score of a rank test; `None` for Hotelling.
    pub fn rank_setup(self) -> Option<(ReferenceKind, ScoreKind)> {
        use ReferenceKind::*;
        Some(match self {
            TestKind::Hotelling => return None,
            TestKind::WilcoxonSpherical => (SphericalUniform, ScoreKind::Wilcoxon),
            TestKind::WilcoxonCubic => (CubicUniform, ScoreKind::Wilcoxon),
            TestKind::VdwSpherical => (SphericalUniform, ScoreKind::VdwSpherical),
            TestKind::VdwCubic => (CubicUniform, ScoreKind::VdwMarginal),
            TestKind::VdwGaussianSpherical => (GaussianSpherical, ScoreKind::Wilcoxon),
            TestKind::VdwGaussianCubic => (GaussianCubic, ScoreKind::Wilcoxon),
        })
    }
}

impl fmt::Display for TestKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TestKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TestKind::ALL.into_iter().find(|k| k.as_str() == s).ok_or_else(|| {
            let names: Vec<&str> = TestKind::ALL.iter().map(|k| k.as_str()).collect();
            Error::InvalidArgument(format!("unknown test `{s}` (expected one of {})", names.join(", ")))
        })
    }
}

fn check_split(n: usize, n1: usize) -> Result<()> {
    if n1 == 0 || n1 >= n {
        return invalid(format!("sample-1 size must be in 1..{n}, got {n1}"));
    }
    Ok(())
}

/// `mean(values[..n1]) - mean(values)`.
pub fn delta_statistic(scored: &ScoredSample, n1: usize) -> Result<Vec<f64>> {
    check_split(scored.len(), n1)?;
    let d = scored.dim;
    let mut first = vec![0.0; d];
    let mut all = vec![0.0; d];
    for (i, v) in scored.values.chunks(d).enumerate() {
        for k in 0..d {
            all[k] += v[k];
            if i < n1 {
                first[k] += v[k];
            }
        }
    }
    let n = scored.len() as f64;
    Ok(first.iter().zip(&all).map(|(f, a)| f / n1 as f64 - a / n).collect())
}

/// Covariance of the delta statistic when sample 1 is a uniformly random
/// `n1`-subset of the score multiset `values` (flat, `dim` per score).
pub fn exact_null_covariance(values: &[f64], dim: usize, n1: usize) -> Result<DMatrix<f64>> {
    if dim == 0 || !values.len().is_multiple_of(dim) {
        return invalid("score values do not split into vectors of the given dimension");
    }
    let n = values.len() / dim;
    check_split(n, n1)?;
    let scores = DMatrix::from_row_slice(n, dim, values);
    let mean = scores.row_mean();
    let mut centered = scores;
    for mut row in centered.row_iter_mut() {
        row -= &mean;
    }
    let s = centered.transpose() * &centered / (n - 1) as f64;
    Ok(s * ((n - n1) as f64 / (n * n1) as f64))
}

/// Pseudo-inverse of a symmetric positive semidefinite matrix, dropping
/// eigenvalues below [`PINV_RELATIVE_TOLERANCE`] times the largest.
pub fn pseudo_inverse(m: &DMatrix<f64>) -> DMatrix<f64> {
    let w = whitening(m);
    w.transpose() * w
}

/// Rows `v_k / sqrt(lambda_k)` over retained eigenpairs, so that
/// `x' pinv(m) x = |W x|^2`.
fn whitening(m: &DMatrix<f64>) -> DMatrix<f64> {
    let d = m.nrows();
    let eig = m.clone().symmetric_eigen();
    let top = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    let keep: Vec<usize> = if top > 0.0 {
        (0..d).filter(|&k| eig.eigenvalues[k] > PINV_RELATIVE_TOLERANCE * top).collect()
    } else {
        Vec::new()
    };
    let mut w = DMatrix::zeros(keep.len(), d);
    for (row, &k) in keep.iter().enumerate() {
        let scale = eig.eigenvalues[k].sqrt();
        for c in 0..d {
            w[(row, c)] = eig.eigenvectors[(c, k)] / scale;
        }
    }
    w
}

/// Precomputed null structure of a rank statistic: the grid scores, their
/// mean and the whitened pseudo-inverse of the exact null covariance. It
/// depends on the grid, the score and `n1` only.
#[derive(Debug, Clone)]
pub struct NullModel {
    dim: usize,
    n1: usize,
    scores: Vec<f64>,
    mean: Vec<f64>,
    whitening: DMatrix<f64>,
}

impl NullModel {
    pub fn new(scores: Vec<f64>, dim: usize, n1: usize) -> Result<Self> {
        let cov = exact_null_covariance(&scores, dim, n1)?;
        let n = scores.len() / dim;
        let mut mean = vec![0.0; dim];
        for v in scores.chunks(dim) {
            mean.iter_mut().zip(v).for_each(|(m, x)| *m += x);
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        Ok(NullModel { dim, n1, scores, mean, whitening: whitening(&cov) })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.scores.len() / self.dim
    }

    pub fn n1(&self) -> usize {
        self.n1
    }

    /// `delta' pinv(Sigma) delta`.
    pub fn quadratic_form(&self, delta: &[f64]) -> f64 {
        let delta = DVector::from_column_slice(delta);
        (&self.whitening * delta).norm_squared()
    }

    /// Statistic when sample 1 holds the grid scores at `members`.
    pub fn statistic_for(&self, members: &[usize]) -> f64 {
        let d = self.dim;
        let mut delta = vec![0.0; d];
        for &j in members {
            delta.iter_mut().zip(&self.scores[j * d..(j + 1) * d]).for_each(|(s, x)| *s += x);
        }
        let m = members.len() as f64;
        delta.iter_mut().zip(&self.mean).for_each(|(s, mu)| *s = *s / m - mu);
        self.quadratic_form(&delta)
    }
}

/// `delta' pinv(Sigma_delta) delta` with the exact permutation covariance
/// of the delta statistic.
pub fn rank_statistic(scored: &ScoredSample, n1: usize) -> Result<f64> {
    let delta = delta_statistic(scored, n1)?;
    let cov = exact_null_covariance(&scored.values, scored.dim, n1)?;
    Ok((whitening(&cov) * DVector::from_vec(delta)).norm_squared())
}

fn covariance_sum(data: &Dataset, mean: &[f64]) -> DMatrix<f64> {
    let d = data.dim();
    let mut s = DMatrix::zeros(d, d);
    for row in data.rows() {
        let c = DVector::from_iterator(d, row.iter().zip(mean).map(|(x, m)| x - m));
        s += &c * c.transpose();
    }
    s
}

/// Hotelling's two-sample T² with pooled, bias-corrected covariance.
pub fn hotelling(data1: &Dataset, data2: &Dataset) -> Result<f64> {
    let d = data1.dim();
    if data2.dim() != d {
        return invalid(format!("samples have dimensions {d} and {}", data2.dim()));
    }
    let (n1, n2) = (data1.len(), data2.len());
    if n1 < d + 1 || n2 < d + 1 {
        return invalid(format!("Hotelling's T² needs at least {} observations per sample", d + 1));
    }
    let (m1, m2) = (data1.mean(), data2.mean());
    let pooled = (covariance_sum(data1, &m1) + covariance_sum(data2, &m2)) / (n1 + n2 - 2) as f64;
    let sigma = pooled * (1.0 / n1 as f64 + 1.0 / n2 as f64);
    let delta = DVector::from_iterator(d, m1.iter().zip(&m2).map(|(a, b)| a - b));
    Ok((whitening(&sigma) * delta).norm_squared())
}

/// Hotelling's test calibrated by the asymptotic chi-square law.
pub fn hotelling_test(data1: &Dataset, data2: &Dataset, alpha: f64) -> Result<TestResult> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return invalid(format!("alpha must lie in (0, 1), got {alpha}"));
    }
    let statistic = hotelling(data1, data2)?;
    let d = data1.dim();
    let critical_value = chisq_quantile(1.0 - alpha, d);
    Ok(TestResult {
        statistic,
        critical_value,
        p_value: chisq_sf(statistic, d).max(f64::MIN_POSITIVE),
        reject: statistic > critical_value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamRng;

    fn scored(dim: usize, values: Vec<f64>) -> ScoredSample {
        ScoredSample { dim, values, score: ScoreKind::Wilcoxon, grid_id: String::new() }
    }

    fn normals(rng: &mut StreamRng, count: usize) -> Vec<f64> {
        (0..count).map(|_| rng.normal()).collect()
    }

    /// All `k`-subsets of `0..n`.
    fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
        if k == 0 {
            return vec![vec![]];
        }
        if n < k {
            return vec![];
        }
        let mut out = subsets(n - 1, k);
        for mut s in subsets(n - 1, k - 1) {
            s.push(n - 1);
            out.push(s);
        }
        out
    }

    #[test]
    fn delta_of_constant_scores_vanishes() {
        let s = scored(2, [0.3, -1.0].repeat(5));
        assert!(delta_statistic(&s, 2).unwrap().iter().all(|x| x.abs() < 1e-15));
    }

    #[test]
    fn delta_two_points() {
        let s = scored(1, vec![3.0, 1.0]);
        assert_eq!(delta_statistic(&s, 1).unwrap(), vec![1.0]);
    }

    #[test]
    fn delta_is_scaled_mean_difference() {
        let mut rng = StreamRng::new(4, 0, 0);
        let (n, n1, d) = (11, 4, 3);
        let values = normals(&mut rng, n * d);
        let delta = delta_statistic(&scored(d, values.clone()), n1).unwrap();
        for k in 0..d {
            let col: Vec<f64> = values.iter().skip(k).step_by(d).cloned().collect();
            let m1 = col[..n1].iter().sum::<f64>() / n1 as f64;
            let m2 = col[n1..].iter().sum::<f64>() / (n - n1) as f64;
            assert!((delta[k] - (n - n1) as f64 / n as f64 * (m1 - m2)).abs() < 1e-12);
        }
    }

    #[test]
    fn delta_rejects_bad_split() {
        let s = scored(1, vec![1.0, 2.0, 3.0]);
        assert!(delta_statistic(&s, 0).is_err());
        assert!(delta_statistic(&s, 3).is_err());
    }

    #[test]
    fn covariance_of_two_signs() {
        let c = exact_null_covariance(&[-1.0, 1.0], 1, 1).unwrap();
        assert!((c[(0, 0)] - 1.0).abs() < 1e-15);
        assert_eq!(exact_null_covariance(&[2.0; 8], 2, 1).unwrap(), DMatrix::zeros(2, 2));
        assert!(exact_null_covariance(&[1.0, 2.0], 1, 2).is_err());
    }

    fn subset_delta(values: &[f64], d: usize, members: &[usize]) -> Vec<f64> {
        let n = values.len() / d;
        (0..d)
            .map(|k| {
                let all = values.iter().skip(k).step_by(d).sum::<f64>() / n as f64;
                members.iter().map(|&j| values[j * d + k]).sum::<f64>() / members.len() as f64 - all
            })
            .collect()
    }

    #[test]
    fn covariance_matches_enumeration() {
        let mut rng = StreamRng::new(8, 0, 0);
        let (n, n1, d) = (6, 3, 2);
        let values = normals(&mut rng, n * d);
        let c = exact_null_covariance(&values, d, n1).unwrap();
        let subs = subsets(n, n1);
        assert_eq!(subs.len(), 20);
        let mut e = [[0.0; 2]; 2];
        for s in &subs {
            let delta = subset_delta(&values, d, s);
            for a in 0..2 {
                for b in 0..2 {
                    e[a][b] += delta[a] * delta[b] / subs.len() as f64;
                }
            }
        }
        for a in 0..2 {
            for b in 0..2 {
                assert!((c[(a, b)] - e[a][b]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn covariance_matches_monte_carlo() {
        let mut rng = StreamRng::new(15, 0, 0);
        let (n, n1, d) = (6, 3, 2);
        let values = normals(&mut rng, n * d);
        let c = exact_null_covariance(&values, d, n1).unwrap();
        let reps = 1_000_000;
        let mut idx: Vec<usize> = (0..n).collect();
        let mut sum = [[0.0; 2]; 2];
        let mut sq = [[0.0; 2]; 2];
        for _ in 0..reps {
            for i in 0..n1 {
                let j = i + rng.below(n - i);
                idx.swap(i, j);
            }
            let delta = subset_delta(&values, d, &idx[..n1]);
            for a in 0..2 {
                for b in 0..2 {
                    let p = delta[a] * delta[b];
                    sum[a][b] += p;
                    sq[a][b] += p * p;
                }
            }
        }
        for a in 0..2 {
            for b in 0..2 {
                let mean = sum[a][b] / reps as f64;
                let se = ((sq[a][b] / reps as f64 - mean * mean) / reps as f64).sqrt();
                assert!((mean - c[(a, b)]).abs() < 3.0 * se + 1e-12, "{mean} vs {}", c[(a, b)]);
            }
        }
    }

    #[test]
    fn statistic_vanishes_at_zero_delta() {
        let s = scored(1, vec![1.0, -1.0, -1.0, 1.0]);
        assert_eq!(rank_statistic(&s, 2).unwrap(), 0.0);
        let s = scored(2, vec![0.0; 8]);
        assert_eq!(rank_statistic(&s, 2).unwrap(), 0.0);
    }

    #[test]
    fn statistic_is_affine_invariant() {
        let mut rng = StreamRng::new(21, 0, 0);
        let (n, d) = (30, 3);
        let values = normals(&mut rng, n * d);
        let a = DMatrix::from_row_slice(d, d, &normals(&mut rng, d * d));
        assert!(a.determinant().abs() > 1e-3);
        let mut mapped = Vec::with_capacity(values.len());
        for v in values.chunks(d) {
            let y = &a * DVector::from_column_slice(v);
            mapped.extend(y.iter().map(|x| x + 2.5));
        }
        let t0 = rank_statistic(&scored(d, values), 12).unwrap();
        let t1 = rank_statistic(&scored(d, mapped), 12).unwrap();
        assert!((t0 - t1).abs() < 1e-8 * t0.max(1.0), "{t0} vs {t1}");
    }

    #[test]
    fn null_model_agrees_with_direct_statistic() {
        let mut rng = StreamRng::new(2, 0, 0);
        let values = normals(&mut rng, 40);
        let model = NullModel::new(values.clone(), 2, 7).unwrap();
        let members: Vec<usize> = (0..7).collect();
        let direct = rank_statistic(&scored(2, values), 7).unwrap();
        assert!((model.statistic_for(&members) - direct).abs() < 1e-10 * direct.max(1.0));
    }

    #[test]
    fn degenerate_direction_is_dropped() {
        // scores on a line in the plane: covariance has rank one
        let values: Vec<f64> = (0..10).flat_map(|i| [i as f64, 2.0 * i as f64]).collect();
        let t = rank_statistic(&scored(2, values.clone()), 5).unwrap();
        let line: Vec<f64> = values.iter().step_by(2).cloned().collect();
        let t1 = rank_statistic(&scored(1, line), 5).unwrap();
        assert!((t - t1).abs() < 1e-9 * t1);
    }

    #[test]
    fn hotelling_of_identical_samples() {
        let mut rng = StreamRng::new(1, 0, 0);
        let d = Dataset::new(2, normals(&mut rng, 40)).unwrap();
        assert!(hotelling(&d, &d).unwrap() < 1e-20);
    }

    #[test]
    fn hotelling_reduces_to_squared_t() {
        let mut rng = StreamRng::new(3, 0, 0);
        let x = normals(&mut rng, 13);
        let y: Vec<f64> = normals(&mut rng, 9).iter().map(|v| v + 0.4).collect();
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let ss = |v: &[f64]| {
            let m = mean(v);
            v.iter().map(|a| (a - m) * (a - m)).sum::<f64>()
        };
        let sp2 = (ss(&x) + ss(&y)) / (13 + 9 - 2) as f64;
        let t = (mean(&x) - mean(&y)) / (sp2 * (1.0 / 13.0 + 1.0 / 9.0)).sqrt();
        let h = hotelling(&Dataset::new(1, x).unwrap(), &Dataset::new(1, y).unwrap()).unwrap();
        assert!((h - t * t).abs() < 1e-10 * h.max(1.0));
    }

    #[test]
    fn hotelling_null_calibration() {
        let reps = 2000;
        let mut rejections = 0;
        for r in 0..reps {
            let mut rng = StreamRng::new(77, r, 0);
            let a = Dataset::new(2, normals(&mut rng, 100)).unwrap();
            let b = Dataset::new(2, normals(&mut rng, 100)).unwrap();
            let res = hotelling_test(&a, &b, 0.05).unwrap();
            assert!(res.p_value > 0.0 && res.p_value <= 1.0);
            assert_eq!(res.reject, res.p_value < 0.05);
            rejections += res.reject as usize;
        }
        let rate = rejections as f64 / reps as f64;
        assert!((0.035..=0.065).contains(&rate), "rate {rate}");
    }

    #[test]
    fn hotelling_input_checks() {
        let a = Dataset::new(2, vec![0.0; 4]).unwrap();
        let b = Dataset::new(2, vec![0.0; 20]).unwrap();
        assert!(hotelling(&a, &b).is_err());
        let c = Dataset::new(1, vec![0.0; 10]).unwrap();
        assert!(hotelling(&b, &c).is_err());
    }

    #[test]
    fn test_kinds_round_trip() {
        for k in TestKind::ALL {
            assert_eq!(k.as_str().parse::<TestKind>().unwrap(), k);
            if let Some((grid, score)) = k.rank_setup() {
                assert!(score.compatible_with(grid));
            }
        }
        assert!("wilcoxon".parse::<TestKind>().is_err());
    }
}
