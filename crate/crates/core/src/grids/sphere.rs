use super::halton::{first_primes, halton_point};
use super::ReferenceKind;
use crate::error::{invalid, Result};
use crate::special::{chisq_quantile, normal_quantile};

const DEGENERATE_NORM: f64 = 1e-12;

/// Maps uniforms to a unit vector through componentwise normal quantiles.
/// Returns `false` when the Gaussian vector is (numerically) zero.
fn direction_from_uniforms(u: &[f64], out: &mut [f64]) -> bool {
    let mut norm2 = 0.0;
    for (o, &x) in out.iter_mut().zip(u) {
        *o = normal_quantile(x);
        norm2 += *o * *o;
    }
    let norm = norm2.sqrt();
    if norm < DEGENERATE_NORM {
        return false;
    }
    out.iter_mut().for_each(|o| *o /= norm);
    true
}

/// Walks the Halton sequence in `dim + lead` coordinates and yields, for
/// every non-degenerate point, the leading coordinates together with the
/// unit direction built from the trailing `dim` coordinates.
fn halton_directions(dim: usize, lead: usize, count: usize, mut f: impl FnMut(&[f64], &[f64])) {
    let bases = first_primes(dim + lead);
    let mut u = vec![0.0; dim + lead];
    let mut dir = vec![0.0; dim];
    let mut index = 1u64;
    let mut produced = 0;
    while produced < count {
        halton_point(index, &bases, &mut u);
        index += 1;
        if direction_from_uniforms(&u[lead..], &mut dir) {
            f(&u[..lead], &dir);
            produced += 1;
        }
    }
}

/// Quasi-uniform unit vectors on the sphere `S^{dim-1}`: Halton points in
/// `(0,1)^dim`, sent through the normal quantile and normalized.
pub fn sphere_directions(dim: usize, count: usize) -> Result<Vec<Vec<f64>>> {
    if dim < 2 {
        return invalid("sphere_directions: dimension must be at least 2");
    }
    let mut out = Vec::with_capacity(count);
    halton_directions(dim, 0, count, |_, d| out.push(d.to_vec()));
    Ok(out)
}

/// Flat version of [`sphere_directions`] that also accepts `dim == 1`
/// (directions are then `-1` or `+1`).
pub(crate) fn directions_flat(dim: usize, count: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(count * dim);
    halton_directions(dim, 0, count, |_, d| out.extend_from_slice(d));
    out
}

/// `count` equally spaced unit vectors on the circle, flat.
pub(crate) fn regular_circle(count: usize) -> Vec<f64> {
    (0..count)
        .flat_map(|k| {
            let a = std::f64::consts::TAU * k as f64 / count as f64;
            [a.cos(), a.sin()]
        })
        .collect()
}

/// QMC discretization of the spherical uniform law on the unit ball: the
/// radius is the first Halton coordinate and the direction comes from the
/// remaining `dim` coordinates.
pub fn spherical_uniform_qmc(dim: usize, count: usize) -> Result<Vec<Vec<f64>>> {
    if dim == 0 {
        return invalid("spherical_uniform_qmc: dimension must be at least 1");
    }
    let flat = reference_qmc(dim, count, ReferenceKind::SphericalUniform);
    Ok(flat.chunks(dim).map(<[f64]>::to_vec).collect())
}

/// QMC discretization of a spherical reference law, as a flat row-major
/// array. For the Gaussian reference the uniform radius `r` is replaced by
/// the `r`-quantile of the chi distribution with `dim` degrees of freedom.
pub(crate) fn reference_qmc(dim: usize, count: usize, kind: ReferenceKind) -> Vec<f64> {
    let gaussian = matches!(kind, ReferenceKind::GaussianSpherical);
    let mut out = Vec::with_capacity(count * dim);
    halton_directions(dim, 1, count, |lead, d| {
        let r = if gaussian {
            chisq_quantile(lead[0], dim).sqrt()
        } else {
            lead[0]
        };
        out.extend(d.iter().map(|x| r * x));
    });
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ks_against(mut sample: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
        sample.sort_by(f64::total_cmp);
        let m = sample.len() as f64;
        sample
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = cdf(x);
                (f - i as f64 / m).abs().max(((i + 1) as f64 / m - f).abs())
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn directions_have_unit_norm() {
        for dim in [2, 3, 5] {
            for v in sphere_directions(dim, 300).unwrap() {
                let n: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                assert!((n - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn circle_directions_have_uniform_angles() {
        let angles = sphere_directions(2, 500)
            .unwrap()
            .iter()
            .map(|v| v[1].atan2(v[0]))
            .collect();
        let ks = ks_against(angles, |a| (a + std::f64::consts::PI) / (2.0 * std::f64::consts::PI));
        assert!(ks < 0.08, "ks = {ks}");
    }

    #[test]
    fn sphere_directions_are_balanced() {
        let dirs = sphere_directions(3, 1000).unwrap();
        let mut mean = [0.0; 3];
        for v in &dirs {
            for k in 0..3 {
                mean[k] += v[k] / 1000.0;
            }
        }
        let norm = mean.iter().map(|x| x * x).sum::<f64>().sqrt();
        // A uniform random sample of 1000 directions has mean norm of order
        // sqrt(1/1000) ~ 0.03; 0.1 is beyond its 99.99% quantile.
        assert!(norm < 0.1, "mean norm {norm}");
    }

    #[test]
    fn rejects_dimension_one() {
        assert!(sphere_directions(1, 3).is_err());
    }

    #[test]
    fn uniform_ball_points_stay_in_ball() {
        for p in spherical_uniform_qmc(3, 1000).unwrap() {
            assert!(p.iter().map(|x| x * x).sum::<f64>() <= 1.0);
        }
    }

    #[test]
    fn uniform_ball_radii_are_uniform() {
        let pts = spherical_uniform_qmc(2, 2000).unwrap();
        let radii: Vec<f64> = pts.iter().map(|p| p[0].hypot(p[1])).collect();
        let inner = radii.iter().filter(|&&r| r <= 0.5).count() as f64 / 2000.0;
        assert!((0.45..=0.55).contains(&inner), "inner fraction {inner}");
        let ks = ks_against(radii, |r| r.clamp(0.0, 1.0));
        assert!(ks < 0.05, "ks = {ks}");
    }
}
