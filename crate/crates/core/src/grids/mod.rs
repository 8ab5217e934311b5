//! Reference grids: spherical-uniform shells, cubic Halton points, and
//! their Gaussian counterparts.

mod factorization;
mod halton;
mod sphere;
mod wasserstein;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{invalid, Error, Result};
use crate::special::{chisq_quantile, normal_quantile};

pub use factorization::{factorization_candidates, factorization_profile, optimal_factorization};
pub use halton::halton;
pub use sphere::{sphere_directions, spherical_uniform_qmc};
pub use wasserstein::{default_discretization_size, transport_w2, w2_to_reference};

pub(crate) use sphere::reference_qmc;

/// The reference distribution a grid discretizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReferenceKind {
    /// Spherical uniform law on the unit ball (shells times directions).
    SphericalUniform,
    /// Lebesgue uniform on the unit cube (Halton points).
    CubicUniform,
    /// Standard Gaussian, built as chi-quantile shells times directions.
    GaussianSpherical,
    /// Standard Gaussian, built as normal quantiles of Halton points.
    GaussianCubic,
}

impl ReferenceKind {
    pub const ALL: [ReferenceKind; 4] = [
        ReferenceKind::SphericalUniform,
        ReferenceKind::CubicUniform,
        ReferenceKind::GaussianSpherical,
        ReferenceKind::GaussianCubic,
    ];

    pub fn is_spherical(self) -> bool {
        matches!(self, ReferenceKind::SphericalUniform | ReferenceKind::GaussianSpherical)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ReferenceKind::SphericalUniform => "spherical-uniform",
            ReferenceKind::CubicUniform => "cubic-uniform",
            ReferenceKind::GaussianSpherical => "gaussian-spherical",
            ReferenceKind::GaussianCubic => "gaussian-cubic",
        }
    }
}

impl fmt::Display for ReferenceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ReferenceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ReferenceKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "unknown reference `{s}` (expected one of spherical-uniform, cubic-uniform, gaussian-spherical, gaussian-cubic)"
                ))
            })
    }
}

/// Decomposition `n = n_r * n_s + n_0` of the grid size into radial shells,
/// directions per shell, and copies of the origin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Factorization {
    pub n: usize,
    pub n_r: usize,
    pub n_s: usize,
    pub n_0: usize,
}

impl Factorization {
    /// Validated constructor; requires `n_0 < min(n_r, n_s)`.
    pub fn new(n_r: usize, n_s: usize, n_0: usize) -> Result<Self> {
        if n_r == 0 || n_s == 0 {
            return invalid("factorization needs at least one shell and one direction");
        }
        if n_0 >= n_r.min(n_s) {
            return invalid(format!(
                "factorization requires n_0 < min(n_r, n_s), got n_r={n_r}, n_s={n_s}, n_0={n_0}"
            ));
        }
        Ok(Factorization { n: n_r * n_s + n_0, n_r, n_s, n_0 })
    }

    /// The candidate with `n_r` shells: `n_s = floor(n / n_r)` and the
    /// remainder at the origin, if it satisfies the constraint.
    pub fn with_shells(n: usize, n_r: usize) -> Option<Self> {
        if n_r == 0 || n_r > n {
            return None;
        }
        let n_s = n / n_r;
        Factorization::new(n_r, n_s, n - n_r * n_s).ok()
    }

    /// The only factorization available on the line: two directions, `n/2`
    /// shells, and the origin when `n` is odd.
    pub fn univariate(n: usize) -> Self {
        Factorization { n, n_r: n / 2, n_s: 2, n_0: n % 2 }
    }
}

/// A reference grid of `n` points in `R^dim`.
///
/// Spherical grids keep their points in shell-major, direction-minor order
/// with the origin copies last; rank extraction relies on that layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    dim: usize,
    kind: ReferenceKind,
    points: Vec<f64>,
    factorization: Option<Factorization>,
}

impl Grid {
    /// Wraps explicit points. Spherical kinds must carry a factorization
    /// whose size matches the number of points.
    pub fn from_points(
        dim: usize,
        kind: ReferenceKind,
        points: Vec<Vec<f64>>,
        factorization: Option<Factorization>,
    ) -> Result<Self> {
        if dim == 0 {
            return invalid("grid dimension must be at least 1");
        }
        if points.is_empty() {
            return invalid("grid must contain at least one point");
        }
        if let Some((i, _)) = points.iter().enumerate().find(|(_, p)| p.len() != dim) {
            return invalid(format!("grid point {i} does not have dimension {dim}"));
        }
        if points.iter().flatten().any(|x| !x.is_finite()) {
            return invalid("grid points must be finite");
        }
        if let Some(f) = factorization {
            if f.n != points.len() || f.n_r * f.n_s + f.n_0 != f.n {
                return invalid(format!(
                    "factorization (n={}, n_r={}, n_s={}, n_0={}) does not describe {} points",
                    f.n,
                    f.n_r,
                    f.n_s,
                    f.n_0,
                    points.len()
                ));
            }
        } else if kind.is_spherical() {
            return invalid(format!("{kind} grids need a factorization"));
        }
        Ok(Grid { dim, kind, points: points.concat(), factorization })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn kind(&self) -> ReferenceKind {
        self.kind
    }

    pub fn factorization(&self) -> Option<Factorization> {
        self.factorization
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    /// Row-major coordinates of all points.
    pub fn flat_points(&self) -> &[f64] {
        &self.points
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.points.chunks(self.dim)
    }

    /// Shell index of point `i` for spherical grids: `1..=n_r` for shell
    /// points, `0` for origin copies. `None` for cubic grids.
    pub fn shell_of(&self, i: usize) -> Option<usize> {
        let f = self.factorization?;
        Some(if i < f.n_r * f.n_s { i / f.n_s + 1 } else { 0 })
    }

    /// Short content digest identifying this grid (kind, dimension and the
    /// exact bit patterns of the points).
    pub fn id(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.kind.as_str().as_bytes());
        h.update((self.dim as u64).to_le_bytes());
        for x in &self.points {
            h.update(x.to_bits().to_le_bytes());
        }
        hex::encode(&h.finalize()[..8])
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&GridFile::from(self))?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let file: GridFile = serde_json::from_str(s)?;
        file.try_into()
    }
}

/// On-disk layout of a grid.
#[derive(Debug, Serialize, Deserialize)]
struct GridFile {
    dim: usize,
    kind: ReferenceKind,
    n: usize,
    n_r: Option<usize>,
    n_s: Option<usize>,
    n_0: Option<usize>,
    points: Vec<Vec<f64>>,
}

impl From<&Grid> for GridFile {
    fn from(g: &Grid) -> Self {
        let f = g.factorization;
        GridFile {
            dim: g.dim,
            kind: g.kind,
            n: g.len(),
            n_r: f.map(|f| f.n_r),
            n_s: f.map(|f| f.n_s),
            n_0: f.map(|f| f.n_0),
            points: g.points().map(<[f64]>::to_vec).collect(),
        }
    }
}

impl TryFrom<GridFile> for Grid {
    type Error = Error;

    fn try_from(file: GridFile) -> Result<Self> {
        if file.points.len() != file.n {
            return invalid(format!(
                "grid file declares n={} but lists {} points",
                file.n,
                file.points.len()
            ));
        }
        let factorization = match (file.n_r, file.n_s, file.n_0) {
            (Some(n_r), Some(n_s), Some(n_0)) => {
                Some(Factorization { n: file.n, n_r, n_s, n_0 })
            }
            (None, None, None) => None,
            _ => return invalid("grid file must give all or none of n_r, n_s, n_0"),
        };
        Grid::from_points(file.dim, file.kind, file.points, factorization)
    }
}

/// Radius of shell `j` (1-based) of the spherical-uniform grid.
///
/// On the line the grid is the classical `{2i/(n+1) - 1}`, whose positive
/// half sits at `(2j - 1 + n_0)/(n + 1)`.
fn uniform_shell_radius(dim: usize, f: &Factorization, j: usize) -> f64 {
    if dim == 1 {
        (2 * j - 1 + f.n_0) as f64 / (f.n + 1) as f64
    } else {
        j as f64 / (f.n_r + 1) as f64
    }
}

/// Builds the reference grid of size `n` for `kind`.
///
/// Spherical kinds use `fact` when given and otherwise search for the
/// factorization closest (in 2-Wasserstein distance) to the reference law.
pub fn build_grid(
    dim: usize,
    n: usize,
    kind: ReferenceKind,
    fact: Option<Factorization>,
) -> Result<Grid> {
    if dim == 0 {
        return invalid("grid dimension must be at least 1");
    }
    if n < dim + 1 {
        return invalid(format!("a grid in dimension {dim} needs at least {} points, got {n}", dim + 1));
    }
    match kind {
        ReferenceKind::CubicUniform | ReferenceKind::GaussianCubic => {
            if fact.is_some() {
                return invalid(format!("{kind} grids do not take a factorization"));
            }
            let mut points = halton::halton(dim, n, 1)?;
            if kind == ReferenceKind::GaussianCubic {
                points.iter_mut().flatten().for_each(|x| *x = normal_quantile(*x));
            }
            Grid::from_points(dim, kind, points, None)
        }
        ReferenceKind::SphericalUniform | ReferenceKind::GaussianSpherical => {
            let f = match fact {
                Some(f) => f,
                None => optimal_factorization(n, dim, kind)?,
            };
            spherical_grid(dim, n, kind, f)
        }
    }
}

pub(crate) fn spherical_grid(dim: usize, n: usize, kind: ReferenceKind, f: Factorization) -> Result<Grid> {
    if f.n != n {
        return invalid(format!("factorization is for n={}, grid requested for n={n}", f.n));
    }
    if dim == 1 && f != Factorization::univariate(n) {
        return invalid("on the line the spherical grid has two directions per shell");
    }
    let dirs = sphere::directions_flat(dim, f.n_s);
    Grid::from_points(dim, kind, shell_points(dim, kind, f, &dirs), Some(f))
}

/// Shell-major points of a spherical grid built on the unit directions `dirs`.
pub(crate) fn shell_points(dim: usize, kind: ReferenceKind, f: Factorization, dirs: &[f64]) -> Vec<Vec<f64>> {
    let mut points = Vec::with_capacity(f.n);
    for j in 1..=f.n_r {
        let mut r = uniform_shell_radius(dim, &f, j);
        if kind == ReferenceKind::GaussianSpherical {
            r = chisq_quantile(r, dim).sqrt();
        }
        points.extend(dirs.chunks(dim).map(|v| v.iter().map(|x| r * x).collect::<Vec<f64>>()));
    }
    points.extend(std::iter::repeat_n(vec![0.0; dim], f.n_0));
    points
}

#[cfg(test)]
mod tests {
    use super::*;

    fn norm(p: &[f64]) -> f64 {
        p.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    #[test]
    fn univariate_spherical_grid_is_classical() {
        let g = build_grid(1, 4, ReferenceKind::SphericalUniform, None).unwrap();
        let mut pts: Vec<f64> = g.points().map(|p| p[0]).collect();
        pts.sort_by(f64::total_cmp);
        let expected = [-0.6, -0.2, 0.2, 0.6];
        for (a, b) in pts.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn univariate_odd_grid_has_origin() {
        for n in [3, 5, 9, 11] {
            let g = build_grid(1, n, ReferenceKind::SphericalUniform, None).unwrap();
            let mut pts: Vec<f64> = g.points().map(|p| p[0]).collect();
            pts.sort_by(f64::total_cmp);
            for (i, x) in pts.iter().enumerate() {
                let want = 2.0 * (i + 1) as f64 / (n + 1) as f64 - 1.0;
                assert!((x - want).abs() < 1e-14, "n={n}");
            }
        }
    }

    #[test]
    fn shells_follow_factorization() {
        let f = Factorization::new(6, 16, 4).unwrap();
        let g = build_grid(2, 100, ReferenceKind::SphericalUniform, Some(f)).unwrap();
        assert_eq!(g.len(), 100);
        for i in 0..100 {
            let shell = g.shell_of(i).unwrap();
            let want = shell as f64 / 7.0;
            assert!((norm(g.point(i)) - want).abs() < 1e-12);
        }
        assert_eq!((0..100).filter(|&i| g.shell_of(i) == Some(0)).count(), 4);
    }

    #[test]
    fn gaussian_shells_use_chi_quantiles() {
        let f = Factorization::new(2, 4, 0).unwrap();
        let g = build_grid(2, 8, ReferenceKind::GaussianSpherical, Some(f)).unwrap();
        let r1 = (-2.0 * (1.0f64 - 1.0 / 3.0).ln()).sqrt();
        let r2 = (-2.0 * (1.0f64 - 2.0 / 3.0).ln()).sqrt();
        for i in 0..4 {
            assert!((norm(g.point(i)) - r1).abs() < 1e-12);
            assert!((norm(g.point(i + 4)) - r2).abs() < 1e-12);
        }
    }

    #[test]
    fn cubic_grid_is_halton() {
        let g = build_grid(2, 50, ReferenceKind::CubicUniform, None).unwrap();
        let h = halton(2, 50, 1).unwrap();
        assert!(g.points().zip(&h).all(|(a, b)| a == b.as_slice()));
        assert!(g.flat_points().iter().all(|&x| x > 0.0 && x < 1.0));
    }

    #[test]
    fn gaussian_cubic_is_transformed_halton() {
        let g = build_grid(3, 40, ReferenceKind::GaussianCubic, None).unwrap();
        let h = halton(3, 40, 1).unwrap();
        for (p, u) in g.points().zip(&h) {
            for (x, v) in p.iter().zip(u) {
                assert!((crate::special::normal_cdf(*x) - v).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn construction_is_deterministic() {
        let f = Factorization::new(3, 10, 2).unwrap();
        let a = build_grid(3, 32, ReferenceKind::SphericalUniform, Some(f)).unwrap();
        let b = build_grid(3, 32, ReferenceKind::SphericalUniform, Some(f)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.id(), b.id());
    }

    #[test]
    fn rejects_bad_sizes() {
        assert!(build_grid(2, 2, ReferenceKind::CubicUniform, None).is_err());
        let f = Factorization::new(2, 4, 0).unwrap();
        assert!(build_grid(2, 9, ReferenceKind::SphericalUniform, Some(f)).is_err());
        assert!(Factorization::new(3, 3, 3).is_err());
    }

    #[test]
    fn json_round_trip_keeps_order() {
        let f = Factorization::new(2, 5, 1).unwrap();
        let g = build_grid(2, 11, ReferenceKind::SphericalUniform, Some(f)).unwrap();
        let json = g.to_json().unwrap();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v["n_r"], 2);
        assert_eq!(v["kind"], "spherical-uniform");
        assert_eq!(Grid::from_json(&json).unwrap(), g);
    }

    #[test]
    fn reference_kind_parses() {
        for k in ReferenceKind::ALL {
            assert_eq!(k.as_str().parse::<ReferenceKind>().unwrap(), k);
        }
        assert!("spherical".parse::<ReferenceKind>().is_err());
    }
}
