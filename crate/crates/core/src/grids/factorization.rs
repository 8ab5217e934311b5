use rayon::prelude::*;

use super::wasserstein::{default_discretization_size, uniform_w2};
use super::sphere::{directions_flat, regular_circle};
use super::{reference_qmc, shell_points, Factorization, ReferenceKind};
use crate::error::{invalid, Result};

/// All admissible factorizations of `n`, by increasing number of shells.
pub fn factorization_candidates(n: usize) -> Vec<Factorization> {
    (1..=n).filter_map(|n_r| Factorization::with_shells(n, n_r)).collect()
}

/// Every admissible factorization of `n` with its 2-Wasserstein distance to
/// the reference law (discretized with `m` points, rounded up to a multiple
/// of `n`). Candidates are evaluated in parallel and returned in order.
///
/// In the plane the distance is evaluated on regular polygons of directions,
/// which makes it a function of the number of shells alone. In higher
/// dimensions it is evaluated on the Halton directions the grid uses.
pub fn factorization_profile(
    n: usize,
    dim: usize,
    kind: ReferenceKind,
    m: usize,
) -> Result<Vec<(Factorization, f64)>> {
    if !kind.is_spherical() {
        return invalid(format!("{kind} grids are not factorized"));
    }
    if dim < 2 {
        return invalid("factorization search needs dimension >= 2");
    }
    if n < 2 {
        return invalid(format!("cannot factorize n = {n}"));
    }
    let m = m.max(10 * n).div_ceil(n) * n;
    let targets = reference_qmc(dim, m, kind);
    factorization_candidates(n)
        .into_par_iter()
        .map(|f| {
            let dirs = if dim == 2 { regular_circle(f.n_s) } else { directions_flat(dim, f.n_s) };
            let points = shell_points(dim, kind, f, &dirs).concat();
            Ok((f, uniform_w2(&points, &targets, dim)?))
        })
        .collect()
}

/// The factorization minimizing the 2-Wasserstein distance between the
/// spherical grid and its reference law; ties go to fewer shells.
///
/// On the line there is nothing to search: the grid has two directions.
pub fn optimal_factorization(n: usize, dim: usize, kind: ReferenceKind) -> Result<Factorization> {
    if !kind.is_spherical() {
        return invalid(format!("{kind} grids are not factorized"));
    }
    if n < 2 {
        return invalid(format!("cannot factorize n = {n}"));
    }
    if dim == 1 {
        return Ok(Factorization::univariate(n));
    }
    let profile = factorization_profile(n, dim, kind, default_discretization_size(n))?;
    let mut best: Option<(Factorization, f64)> = None;
    for (f, w) in profile {
        if best.is_none_or(|(_, bw)| w < bw) {
            best = Some((f, w));
        }
    }
    best.map(|(f, _)| f)
        .ok_or_else(|| crate::Error::InvalidArgument(format!("no admissible factorization of {n}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn candidates_satisfy_constraints() {
        for n in [2, 7, 50, 101, 400] {
            let c = factorization_candidates(n);
            assert!(!c.is_empty());
            for f in c {
                assert_eq!(f.n_r * f.n_s + f.n_0, n);
                assert!(f.n_0 < f.n_r.min(f.n_s));
            }
        }
    }

    #[test]
    fn degenerate_single_direction_only_without_origin() {
        let c = factorization_candidates(12);
        assert!(c.contains(&Factorization { n: 12, n_r: 12, n_s: 1, n_0: 0 }));
        assert!(factorization_candidates(13).iter().all(|f| f.n_s > 1 || f.n_0 == 0));
    }

    #[test]
    fn univariate_needs_no_search() {
        let f = optimal_factorization(9, 1, ReferenceKind::SphericalUniform).unwrap();
        assert_eq!((f.n_r, f.n_s, f.n_0), (4, 2, 1));
    }

    #[test]
    fn planar_profile_ignores_direction_placement() {
        let profile = factorization_profile(40, 2, ReferenceKind::SphericalUniform, 2000).unwrap();
        let (f, w) = profile.iter().find(|(f, _)| f.n_r == 4).unwrap();
        let mut rotated = shell_points(2, ReferenceKind::SphericalUniform, *f, &regular_circle(f.n_s));
        let (c, s) = (0.3f64.cos(), 0.3f64.sin());
        for p in &mut rotated {
            *p = vec![c * p[0] - s * p[1], s * p[0] + c * p[1]];
        }
        let targets = reference_qmc(2, 2000, ReferenceKind::SphericalUniform);
        let w_rot = uniform_w2(&rotated.concat(), &targets, 2).unwrap();
        assert!((w - w_rot).abs() < 0.01 * w);
    }

    #[test]
    fn planar_optimum_at_one_hundred() {
        let f = optimal_factorization(100, 2, ReferenceKind::SphericalUniform).unwrap();
        assert_eq!((f.n_r, f.n_s, f.n_0), (6, 16, 4));
        let f = optimal_factorization(100, 2, ReferenceKind::GaussianSpherical).unwrap();
        assert_eq!((f.n_r, f.n_s, f.n_0), (7, 14, 2));
    }

    #[test]
    fn cubic_kinds_are_rejected() {
        assert!(optimal_factorization(50, 2, ReferenceKind::CubicUniform).is_err());
    }
}
