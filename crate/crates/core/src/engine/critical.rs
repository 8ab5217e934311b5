use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{exceeds, NullModel, TestResult};
use crate::dataset::Dataset;
use crate::error::{invalid, Result};
use crate::grids::{Grid, ReferenceKind};
use crate::ranks::{grid_scores, ScoreKind};
use crate::rng::{stream, StreamRng};
use crate::transport::empirical_map;

/// Smallest admissible number of Monte-Carlo replications.
pub const MIN_REPLICATIONS: usize = 1000;

/// Configuration of a rank-based two-sample test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoSampleConfig {
    pub n1: usize,
    pub n2: usize,
    pub alpha: f64,
    pub reference: ReferenceKind,
    pub score: ScoreKind,
    pub mc_reps: usize,
    pub seed: u64,
}

impl TwoSampleConfig {
    pub fn n(&self) -> usize {
        self.n1 + self.n2
    }

    pub fn validate(&self) -> Result<()> {
        check_alpha(self.alpha)?;
        check_reps(self.mc_reps)?;
        if self.n1 == 0 || self.n2 == 0 {
            return invalid("both samples must be nonempty");
        }
        if !self.score.compatible_with(self.reference) {
            return invalid(format!("{} scores cannot be used with a {} grid", self.score, self.reference));
        }
        Ok(())
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return invalid(format!("alpha must lie in (0, 1), got {alpha}"));
    }
    Ok(())
}

fn check_reps(reps: usize) -> Result<()> {
    if reps < MIN_REPLICATIONS {
        return invalid(format!("at least {MIN_REPLICATIONS} Monte-Carlo replications are required, got {reps}"));
    }
    Ok(())
}

/// Everything the null distribution of a rank statistic depends on.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CriticalValueKey {
    pub dim: usize,
    pub n: usize,
    pub n1: usize,
    pub reference: ReferenceKind,
    pub score: ScoreKind,
    pub reps: usize,
    pub seed: u64,
    pub grid_id: String,
}

/// Monte-Carlo null distribution of a rank statistic with the critical
/// value at one level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalValueTable {
    pub key: CriticalValueKey,
    pub alpha: f64,
    pub critical_value: f64,
    /// Sorted null statistics.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub null_sample: Option<Vec<f64>>,
}

/// 1-based rank of the `1 - alpha` order statistic among `reps` draws:
/// `ceil((1 - alpha) (reps + 1))`, clamped to `reps`.
pub fn order_statistic_index(alpha: f64, reps: usize) -> usize {
    let x = (1.0 - alpha) * (reps + 1) as f64;
    ((x - 1e-9).ceil() as usize).clamp(1, reps)
}

impl CriticalValueTable {
    fn sample(&self) -> Result<&[f64]> {
        match &self.null_sample {
            Some(s) if s.len() == self.key.reps => Ok(s),
            _ => invalid("critical-value table carries no null sample"),
        }
    }

    /// Critical value at another level, from the stored null sample.
    pub fn at_alpha(&self, alpha: f64) -> Result<f64> {
        check_alpha(alpha)?;
        let s = self.sample()?;
        Ok(s[order_statistic_index(alpha, s.len()) - 1])
    }

    /// Same table recalibrated to `alpha`.
    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        Ok(CriticalValueTable { alpha, critical_value: self.at_alpha(alpha)?, ..self.clone() })
    }

    /// `(#{null >= statistic} + 1) / (B + 1)`.
    pub fn p_value(&self, statistic: f64) -> Result<f64> {
        let s = self.sample()?;
        let below = s.partition_point(|&x| exceeds(statistic, x));
        Ok((s.len() - below + 1) as f64 / (s.len() + 1) as f64)
    }

    pub fn decide(&self, statistic: f64) -> Result<TestResult> {
        Ok(TestResult {
            statistic,
            critical_value: self.critical_value,
            p_value: self.p_value(statistic)?,
            reject: exceeds(statistic, self.critical_value),
        })
    }
}

fn null_sample(model: &NullModel, reps: usize, seed: u64) -> Vec<f64> {
    let n = model.n();
    let n1 = model.n1();
    let mut sample: Vec<f64> = (0..reps as u64)
        .into_par_iter()
        .map_init(
            || Vec::with_capacity(n),
            |idx, r| {
                idx.clear();
                idx.extend(0..n);
                let mut rng = StreamRng::new(seed, r, stream::NULL_SUBSET);
                let (members, _) = idx.partial_shuffle(rng.inner(), n1);
                model.statistic_for(members)
            },
        )
        .collect();
    sample.sort_by(f64::total_cmp);
    sample
}

/// Distribution-free critical value of the rank statistic for `grid` and
/// `score`: the statistic is evaluated on `reps` uniformly random
/// `n1`-subsets of the grid scores.
pub fn mc_critical_value(
    grid: &Grid,
    score: ScoreKind,
    n1: usize,
    alpha: f64,
    reps: usize,
    seed: u64,
) -> Result<CriticalValueTable> {
    check_alpha(alpha)?;
    check_reps(reps)?;
    let model = NullModel::new(grid_scores(grid, score)?, grid.dim(), n1)?;
    Ok(table_for(grid, score, &model, alpha, reps, seed))
}

fn key_for(grid: &Grid, score: ScoreKind, n1: usize, reps: usize, seed: u64) -> CriticalValueKey {
    CriticalValueKey {
        dim: grid.dim(),
        n: grid.len(),
        n1,
        reference: grid.kind(),
        score,
        reps,
        seed,
        grid_id: grid.id(),
    }
}

fn table_for(grid: &Grid, score: ScoreKind, model: &NullModel, alpha: f64, reps: usize, seed: u64) -> CriticalValueTable {
    let sample = null_sample(model, reps, seed);
    CriticalValueTable {
        key: key_for(grid, score, model.n1(), reps, seed),
        alpha,
        critical_value: sample[order_statistic_index(alpha, reps) - 1],
        null_sample: Some(sample),
    }
}

/// A calibrated rank test on a fixed grid.
#[derive(Debug, Clone)]
pub struct RankTest {
    grid: Grid,
    score: ScoreKind,
    model: NullModel,
    table: CriticalValueTable,
}

impl RankTest {
    /// Builds the test, computing its critical value.
    pub fn new(grid: Grid, score: ScoreKind, n1: usize, alpha: f64, reps: usize, seed: u64) -> Result<Self> {
        check_alpha(alpha)?;
        check_reps(reps)?;
        let model = NullModel::new(grid_scores(&grid, score)?, grid.dim(), n1)?;
        let table = table_for(&grid, score, &model, alpha, reps, seed);
        Ok(RankTest { grid, score, model, table })
    }

    /// Builds the test from a previously computed table.
    pub fn with_table(grid: Grid, score: ScoreKind, table: CriticalValueTable) -> Result<Self> {
        let key = &table.key;
        if *key != key_for(&grid, score, key.n1, key.reps, key.seed) {
            return invalid("critical-value table was computed for a different grid or score");
        }
        table.sample()?;
        let model = NullModel::new(grid_scores(&grid, score)?, grid.dim(), key.n1)?;
        Ok(RankTest { grid, score, model, table })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn score(&self) -> ScoreKind {
        self.score
    }

    pub fn n1(&self) -> usize {
        self.model.n1()
    }

    pub fn table(&self) -> &CriticalValueTable {
        &self.table
    }

    /// Statistic of the pooled sample whose first `n1` rows form sample 1.
    pub fn statistic(&self, pooled: &Dataset) -> Result<f64> {
        if pooled.len() != self.grid.len() {
            return invalid(format!(
                "the grid has n = {} points but the samples hold {} observations",
                self.grid.len(),
                pooled.len()
            ));
        }
        let map = empirical_map(pooled, &self.grid)?;
        Ok(self.model.statistic_for(&map.assignment().perm[..self.n1()]))
    }

    pub fn run_pooled(&self, pooled: &Dataset) -> Result<TestResult> {
        self.table.decide(self.statistic(pooled)?)
    }

    pub fn run(&self, data1: &Dataset, data2: &Dataset) -> Result<TestResult> {
        if data1.len() != self.n1() {
            return invalid(format!("sample 1 must hold n1 = {} observations, got {}", self.n1(), data1.len()));
        }
        self.run_pooled(&Dataset::pooled(data1, data2)?)
    }
}

/// Full pipeline: pool, map onto `grid`, score, and compare with a freshly
/// computed Monte-Carlo critical value.
pub fn two_sample_test(data1: &Dataset, data2: &Dataset, grid: &Grid, cfg: &TwoSampleConfig) -> Result<TestResult> {
    cfg.validate()?;
    if grid.kind() != cfg.reference {
        return invalid(format!("configured for a {} grid, got a {} grid", cfg.reference, grid.kind()));
    }
    if grid.len() != cfg.n() {
        return invalid(format!("configured for n = {}, the grid has n = {}", cfg.n(), grid.len()));
    }
    if data1.len() != cfg.n1 || data2.len() != cfg.n2 {
        return invalid(format!(
            "expected samples of sizes {} and {}, got {} and {}",
            cfg.n1,
            cfg.n2,
            data1.len(),
            data2.len()
        ));
    }
    RankTest::new(grid.clone(), cfg.score, cfg.n1, cfg.alpha, cfg.mc_reps, cfg.seed)?.run(data1, data2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grids::{build_grid, Factorization};

    fn gaussian(seed: u64, n: usize, d: usize, shift: f64) -> Dataset {
        let mut rng = StreamRng::new(seed, 0, 9);
        Dataset::new(d, (0..n * d).map(|_| rng.normal() + shift).collect()).unwrap()
    }

    fn grid100() -> Grid {
        build_grid(2, 100, ReferenceKind::SphericalUniform, Some(Factorization::new(6, 16, 4).unwrap())).unwrap()
    }

    #[test]
    fn order_statistic_rank() {
        assert_eq!(order_statistic_index(0.05, 39999), 38000);
        assert_eq!(order_statistic_index(0.05, 1000), 951);
        assert_eq!(order_statistic_index(1e-6, 1000), 1000);
    }

    #[test]
    fn small_grid_matches_exhaustive_quantile() {
        let g = Grid::from_points(
            1,
            ReferenceKind::CubicUniform,
            vec![vec![0.1], vec![0.9], vec![0.35], vec![0.6], vec![0.2], vec![0.75]],
            None,
        )
        .unwrap();
        let model = NullModel::new(grid_scores(&g, ScoreKind::Wilcoxon).unwrap(), 1, 3).unwrap();
        let mut exact = Vec::new();
        for a in 0..6 {
            for b in a + 1..6 {
                for c in b + 1..6 {
                    exact.push(model.statistic_for(&[a, b, c]));
                }
            }
        }
        exact.sort_by(f64::total_cmp);
        assert_eq!(exact.len(), 20);
        let t = mc_critical_value(&g, ScoreKind::Wilcoxon, 3, 0.05, 100_000, 3).unwrap();
        // P(T < max) = 18/20 < 0.95, so the quantile is the largest value
        assert!((t.critical_value - exact[19]).abs() < 1e-12);
        let t = t.with_alpha(0.25).unwrap();
        let cdf_below = exact.iter().filter(|&&x| x < t.critical_value - 1e-12).count() as f64 / 20.0;
        let cdf_at = exact.iter().filter(|&&x| x <= t.critical_value + 1e-12).count() as f64 / 20.0;
        assert!(cdf_below <= 0.75 + 0.01 && cdf_at >= 0.75 - 0.01);
    }

    #[test]
    fn tables_are_reproducible_and_stable_across_seeds() {
        let g = grid100();
        let a = mc_critical_value(&g, ScoreKind::Wilcoxon, 50, 0.05, 40_000, 1).unwrap();
        let b = mc_critical_value(&g, ScoreKind::Wilcoxon, 50, 0.05, 40_000, 1).unwrap();
        assert_eq!(a, b);
        let c = mc_critical_value(&g, ScoreKind::Wilcoxon, 50, 0.05, 40_000, 2).unwrap();
        assert!((a.critical_value - c.critical_value).abs() < 0.02 * a.critical_value);
        // chi-square(2) limit of the permutation statistic
        assert!((a.critical_value - 5.991).abs() < 0.3);
    }

    #[test]
    fn replication_floor() {
        let g = grid100();
        assert!(mc_critical_value(&g, ScoreKind::Wilcoxon, 50, 0.05, 999, 1).is_err());
        assert!(mc_critical_value(&g, ScoreKind::VdwMarginal, 50, 0.05, 1000, 1).is_err());
    }

    #[test]
    fn p_values_follow_the_null_sample() {
        let g = grid100();
        let t = mc_critical_value(&g, ScoreKind::Wilcoxon, 50, 0.05, 1999, 5).unwrap();
        assert_eq!(t.p_value(-1.0).unwrap(), 1.0);
        assert_eq!(t.p_value(1e9).unwrap(), 1.0 / 2000.0);
        let r = t.decide(t.critical_value).unwrap();
        assert!(!r.reject);
        assert!(r.p_value > 0.05);
    }

    #[test]
    fn shift_is_detected_and_results_are_deterministic() {
        let g = grid100();
        let cfg = TwoSampleConfig {
            n1: 50,
            n2: 50,
            alpha: 0.05,
            reference: ReferenceKind::SphericalUniform,
            score: ScoreKind::Wilcoxon,
            mc_reps: 2000,
            seed: 11,
        };
        let x = gaussian(1, 50, 2, 0.0);
        let y = gaussian(2, 50, 2, 1.5);
        let r = two_sample_test(&x, &y, &g, &cfg).unwrap();
        assert!(r.reject && r.p_value < 0.01);
        assert_eq!(r, two_sample_test(&x, &y, &g, &cfg).unwrap());
    }

    #[test]
    fn pipeline_checks_configuration() {
        let g = grid100();
        let mut cfg = TwoSampleConfig {
            n1: 50,
            n2: 50,
            alpha: 0.05,
            reference: ReferenceKind::CubicUniform,
            score: ScoreKind::Wilcoxon,
            mc_reps: 1000,
            seed: 1,
        };
        let x = gaussian(1, 50, 2, 0.0);
        assert!(two_sample_test(&x, &x, &g, &cfg).is_err());
        cfg.reference = ReferenceKind::SphericalUniform;
        cfg.n2 = 40;
        assert!(two_sample_test(&x, &gaussian(3, 40, 2, 0.0), &g, &cfg).is_err());
        cfg.n2 = 50;
        cfg.alpha = 1.0;
        assert!(two_sample_test(&x, &x, &g, &cfg).is_err());
    }

    #[test]
    fn tables_bind_to_their_grid() {
        let g = grid100();
        let t = mc_critical_value(&g, ScoreKind::Wilcoxon, 50, 0.05, 1000, 1).unwrap();
        assert!(RankTest::with_table(g.clone(), ScoreKind::Wilcoxon, t.clone()).is_ok());
        let other = build_grid(2, 100, ReferenceKind::SphericalUniform, Some(Factorization::new(4, 25, 0).unwrap())).unwrap();
        assert!(RankTest::with_table(other, ScoreKind::Wilcoxon, t).is_err());
    }
}
