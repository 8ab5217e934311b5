//! Simulation scenarios and rejection-frequency power curves.

use std::fmt::Write as _;
use std::sync::atomic::{AtomicUsize, Ordering};

use nalgebra::{DMatrix, DVector};
use rand_distr::{ChiSquared, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::engine::{hotelling_test, CriticalValueCache, RankTest, TestKind, TestResult};
use crate::error::{invalid, Error, Result};
use crate::grids::{build_grid, optimal_factorization};
use crate::rng::{stream, StreamRng};

/// Data-generating law of both samples (before the shift).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "kebab-case")]
pub enum Variant {
    GaussSpherical,
    GaussCorrelated { sigma: Vec<Vec<f64>> },
    StudentSpherical { df: f64 },
    CauchyIndependent,
    CauchySpherical,
    Banana,
}

const BANANA_WEIGHTS: [f64; 3] = [0.3, 0.35, 0.35];
const BANANA_MEANS: [[f64; 2]; 3] = [[0.0, -0.7], [-0.9, 0.3], [0.9, 0.3]];
const BANANA_COVS: [[f64; 4]; 3] = [
    [0.35 * 0.35, 0.0, 0.0, 0.35 * 0.35],
    [0.358, -0.55, -0.55, 1.02],
    [0.358, 0.55, 0.55, 1.02],
];

/// A simulation scenario: a law and a dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(flatten)]
    pub variant: Variant,
    pub dim: usize,
}

impl Scenario {
    pub fn new(variant: Variant, dim: usize) -> Result<Self> {
        let sc = Scenario { variant, dim };
        sc.validate()?;
        Ok(sc)
    }

    pub fn gauss_spherical(dim: usize) -> Result<Self> {
        Self::new(Variant::GaussSpherical, dim)
    }

    /// Correlated Gaussian with unit variances: correlation 0.8 in the plane,
    /// equicorrelation 0.5 otherwise.
    pub fn gauss_correlated(dim: usize) -> Result<Self> {
        let rho = if dim == 2 { 0.8 } else { 0.5 };
        let sigma = (0..dim).map(|i| (0..dim).map(|j| if i == j { 1.0 } else { rho }).collect()).collect();
        Self::new(Variant::GaussCorrelated { sigma }, dim)
    }

    pub fn student_spherical(dim: usize, df: f64) -> Result<Self> {
        Self::new(Variant::StudentSpherical { df }, dim)
    }

    pub fn cauchy_independent(dim: usize) -> Result<Self> {
        Self::new(Variant::CauchyIndependent, dim)
    }

    pub fn cauchy_spherical(dim: usize) -> Result<Self> {
        Self::new(Variant::CauchySpherical, dim)
    }

    pub fn banana() -> Result<Self> {
        Self::new(Variant::Banana, 2)
    }

    pub fn name(&self) -> &'static str {
        match self.variant {
            Variant::GaussSpherical => "gauss-spherical",
            Variant::GaussCorrelated { .. } => "gauss-correlated",
            Variant::StudentSpherical { .. } => "student-spherical",
            Variant::CauchyIndependent => "cauchy-independent",
            Variant::CauchySpherical => "cauchy-spherical",
            Variant::Banana => "banana",
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return invalid("scenario dimension must be at least 1");
        }
        match &self.variant {
            Variant::Banana if self.dim != 2 => invalid("the banana mixture is bivariate"),
            Variant::StudentSpherical { df } if !(*df > 0.0 && df.is_finite()) => {
                invalid(format!("degrees of freedom must be positive, got {df}"))
            }
            Variant::GaussCorrelated { sigma } => cholesky(sigma, self.dim).map(|_| ()),
            _ => Ok(()),
        }
    }
}

fn cholesky(sigma: &[Vec<f64>], dim: usize) -> Result<DMatrix<f64>> {
    if sigma.len() != dim || sigma.iter().any(|r| r.len() != dim) {
        return invalid(format!("covariance must be {dim} x {dim}"));
    }
    let m = DMatrix::from_fn(dim, dim, |i, j| sigma[i][j]);
    if (0..dim).any(|i| (0..i).any(|j| (m[(i, j)] - m[(j, i)]).abs() > 1e-12)) {
        return invalid("covariance must be symmetric");
    }
    m.cholesky()
        .map(|c| c.l())
        .ok_or_else(|| Error::InvalidArgument("covariance must be positive definite".into()))
}

fn chi_square(df: f64, rng: &mut StreamRng) -> f64 {
    if df.fract() == 0.0 && df <= 64.0 {
        (0..df as usize).map(|_| rng.normal().powi(2)).sum()
    } else {
        ChiSquared::new(df).expect("validated degrees of freedom").sample(rng.inner())
    }
}

/// Draws `count` observations from the scenario law shifted by `shift` in
/// every coordinate.
pub fn sample_scenario(sc: &Scenario, count: usize, shift: f64, rng: &mut StreamRng) -> Result<Dataset> {
    sc.validate()?;
    if count == 0 {
        return invalid("sample size must be at least 1");
    }
    if !(shift >= 0.0 && shift.is_finite()) {
        return invalid(format!("shift must be nonnegative, got {shift}"));
    }
    let d = sc.dim;
    let mut values = Vec::with_capacity(count * d);
    match &sc.variant {
        Variant::GaussSpherical => values.extend((0..count * d).map(|_| rng.normal())),
        Variant::GaussCorrelated { sigma } => {
            let l = cholesky(sigma, d)?;
            for _ in 0..count {
                let z = DVector::from_fn(d, |_, _| rng.normal());
                values.extend((&l * z).iter());
            }
        }
        Variant::StudentSpherical { df } => spherical_student(*df, d, count, rng, &mut values),
        Variant::CauchySpherical => spherical_student(1.0, d, count, rng, &mut values),
        Variant::CauchyIndependent => {
            values.extend((0..count * d).map(|_| (std::f64::consts::PI * (rng.uniform() - 0.5)).tan()))
        }
        Variant::Banana => {
            let factors: Vec<DMatrix<f64>> = BANANA_COVS
                .iter()
                .map(|c| DMatrix::from_row_slice(2, 2, c).cholesky().expect("positive definite").l())
                .collect();
            for _ in 0..count {
                let u = rng.uniform();
                let k = if u < BANANA_WEIGHTS[0] {
                    0
                } else if u < BANANA_WEIGHTS[0] + BANANA_WEIGHTS[1] {
                    1
                } else {
                    2
                };
                let z = DVector::from_fn(2, |_, _| rng.normal());
                let x = &factors[k] * z;
                values.extend([x[0] + BANANA_MEANS[k][0], x[1] + BANANA_MEANS[k][1]]);
            }
        }
    }
    Ok(Dataset::new(d, values)?.shifted(shift))
}

fn spherical_student(df: f64, d: usize, count: usize, rng: &mut StreamRng, out: &mut Vec<f64>) {
    for _ in 0..count {
        let g: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
        let scale = (chi_square(df, rng) / df).sqrt();
        out.extend(g.iter().map(|x| x / scale));
    }
}

/// A calibrated two-sample test as seen by the simulation harness.
pub trait TwoSampleTest: Sync {
    fn name(&self) -> &str;
    fn run(&self, data1: &Dataset, data2: &Dataset) -> Result<TestResult>;
}

/// Hotelling's T² with asymptotic chi-square calibration.
#[derive(Debug, Clone, Copy)]
pub struct HotellingTest {
    pub alpha: f64,
}

impl TwoSampleTest for HotellingTest {
    fn name(&self) -> &str {
        TestKind::Hotelling.as_str()
    }

    fn run(&self, data1: &Dataset, data2: &Dataset) -> Result<TestResult> {
        hotelling_test(data1, data2, self.alpha)
    }
}

/// A rank test labelled with its identifier.
#[derive(Debug, Clone)]
pub struct NamedRankTest {
    pub kind: TestKind,
    pub test: RankTest,
}

impl TwoSampleTest for NamedRankTest {
    fn name(&self) -> &str {
        self.kind.as_str()
    }

    fn run(&self, data1: &Dataset, data2: &Dataset) -> Result<TestResult> {
        self.test.run(data1, data2)
    }
}

/// Parameters shared by the tests of one simulation.
#[derive(Debug, Clone, Copy)]
pub struct Calibration {
    pub alpha: f64,
    pub mc_reps: usize,
    pub seed: u64,
}

/// Builds test `kind` for `dim`-variate samples of sizes `n1` and `n - n1`.
/// Spherical grids use the optimal factorization; critical values come from
/// `cache` when given.
pub fn build_test(
    kind: TestKind,
    dim: usize,
    n: usize,
    n1: usize,
    cal: Calibration,
    cache: Option<&CriticalValueCache>,
) -> Result<Box<dyn TwoSampleTest>> {
    let Some((reference, score)) = kind.rank_setup() else {
        return Ok(Box::new(HotellingTest { alpha: cal.alpha }));
    };
    let fact = if reference.is_spherical() { Some(optimal_factorization(n, dim, reference)?) } else { None };
    let grid = build_grid(dim, n, reference, fact)?;
    let test = match cache {
        Some(c) => {
            let table = c.get_or_compute(&grid, score, n1, cal.alpha, cal.mc_reps, cal.seed)?;
            RankTest::with_table(grid, score, table)?
        }
        None => RankTest::new(grid, score, n1, cal.alpha, cal.mc_reps, cal.seed)?,
    };
    Ok(Box::new(NamedRankTest { kind, test }))
}

/// Rejection frequencies per test and shift.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerCurve {
    pub scenario: Scenario,
    pub n: usize,
    pub n1: usize,
    pub tests: Vec<String>,
    pub shifts: Vec<f64>,
    /// `rates[t][s]` for test `t` at shift `s`.
    pub rates: Vec<Vec<f64>>,
    pub reps: usize,
    pub seed: u64,
}

impl PowerCurve {
    pub fn rate(&self, test: &str, shift_index: usize) -> Option<f64> {
        let t = self.tests.iter().position(|name| name == test)?;
        self.rates[t].get(shift_index).copied()
    }

    /// CSV with columns `scenario,test,n,eta,rate,reps,seed`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("scenario,test,n,eta,rate,reps,seed\n");
        for (name, rates) in self.tests.iter().zip(&self.rates) {
            for (eta, rate) in self.shifts.iter().zip(rates) {
                let _ = writeln!(out, "{},{},{},{},{},{},{}", self.scenario.name(), name, self.n, eta, rate, self.reps, self.seed);
            }
        }
        out
    }
}

/// Rejection frequencies over `reps` replications. In every replication
/// the two base samples are drawn once; sample 2 is shifted by each `eta`
/// and every test sees the same pair of datasets.
pub fn power_curve(
    sc: &Scenario,
    n: usize,
    tests: &[&dyn TwoSampleTest],
    shifts: &[f64],
    reps: usize,
    seed: u64,
) -> Result<PowerCurve> {
    power_curve_with_progress(sc, n, tests, shifts, reps, seed, &|_, _| {})
}

/// [`power_curve`] reporting `(completed, total)` replications.
pub fn power_curve_with_progress(
    sc: &Scenario,
    n: usize,
    tests: &[&dyn TwoSampleTest],
    shifts: &[f64],
    reps: usize,
    seed: u64,
    progress: &(dyn Fn(usize, usize) + Sync),
) -> Result<PowerCurve> {
    sc.validate()?;
    if n < 2 || !n.is_multiple_of(2) {
        return invalid(format!("total sample size must be even, got {n}"));
    }
    if reps == 0 {
        return invalid("at least one replication is required");
    }
    if let Some(eta) = shifts.iter().find(|e| !(**e >= 0.0 && e.is_finite())) {
        return invalid(format!("shifts must be nonnegative, got {eta}"));
    }
    let n1 = n / 2;
    let done = AtomicUsize::new(0);
    let per_rep: Vec<Vec<u32>> = (0..reps as u64)
        .into_par_iter()
        .map(|r| {
            let base1 = sample_scenario(sc, n1, 0.0, &mut StreamRng::new(seed, r, stream::SAMPLE_FIRST))?;
            let base2 = sample_scenario(sc, n - n1, 0.0, &mut StreamRng::new(seed, r, stream::SAMPLE_SECOND))?;
            let mut hits = vec![0u32; tests.len() * shifts.len()];
            for (s, &eta) in shifts.iter().enumerate() {
                let data2 = base2.clone().shifted(eta);
                for (t, test) in tests.iter().enumerate() {
                    hits[t * shifts.len() + s] = test.run(&base1, &data2)?.reject as u32;
                }
            }
            progress(done.fetch_add(1, Ordering::Relaxed) + 1, reps);
            Ok(hits)
        })
        .collect::<Result<_>>()?;
    let mut counts = vec![0u32; tests.len() * shifts.len()];
    for hits in &per_rep {
        counts.iter_mut().zip(hits).for_each(|(c, h)| *c += h);
    }
    let rates = (0..tests.len())
        .map(|t| (0..shifts.len()).map(|s| counts[t * shifts.len() + s] as f64 / reps as f64).collect())
        .collect();
    Ok(PowerCurve {
        scenario: sc.clone(),
        n,
        n1,
        tests: tests.iter().map(|t| t.name().to_string()).collect(),
        shifts: shifts.to_vec(),
        rates,
        reps,
        seed,
    })
}
