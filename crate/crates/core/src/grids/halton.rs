use crate::error::{invalid, Result};

/// The first `k` primes, used as Halton bases.
pub(crate) fn first_primes(k: usize) -> Vec<u64> {
    let mut primes = Vec::with_capacity(k);
    let mut candidate = 2u64;
    while primes.len() < k {
        if primes
            .iter()
            .take_while(|&&p| p * p <= candidate)
            .all(|&p| !candidate.is_multiple_of(p))
        {
            primes.push(candidate);
        }
        candidate += 1;
    }
    primes
}

/// Van der Corput radical inverse of `index` in `base`.
pub(crate) fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let inv_base = 1.0 / base as f64;
    let mut factor = inv_base;
    let mut value = 0.0;
    while index > 0 {
        value += (index % base) as f64 * factor;
        index /= base;
        factor *= inv_base;
    }
    value
}

pub(crate) fn halton_point(index: u64, bases: &[u64], out: &mut [f64]) {
    for (slot, &base) in out.iter_mut().zip(bases) {
        *slot = radical_inverse(index, base);
    }
}

/// Plain (unscrambled) Halton points in `(0,1)^dim`.
///
/// Point `i` is the radical-inverse vector at index `skip + i`, with the
/// first `dim` primes as bases. Index 0 is the all-zeros point, so any
/// `skip >= 1` keeps every coordinate strictly inside the unit interval.
pub fn halton(dim: usize, count: usize, skip: u64) -> Result<Vec<Vec<f64>>> {
    if dim == 0 {
        return invalid("halton: dimension must be at least 1");
    }
    if count == 0 {
        return invalid("halton: count must be at least 1");
    }
    let bases = first_primes(dim);
    Ok((0..count as u64)
        .map(|i| {
            let mut p = vec![0.0; dim];
            halton_point(skip + i, &bases, &mut p);
            p
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn primes() {
        assert_eq!(first_primes(6), vec![2, 3, 5, 7, 11, 13]);
    }

    #[test]
    fn base_two_prefix() {
        let pts = halton(1, 3, 1).unwrap();
        assert_eq!(pts, vec![vec![0.5], vec![0.25], vec![0.75]]);
    }

    #[test]
    fn first_two_dimensional_point() {
        let pts = halton(2, 1, 1).unwrap();
        assert_eq!(pts[0][0], 0.5);
        assert!((pts[0][1] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn coordinates_strictly_inside_unit_cube() {
        for p in halton(5, 2000, 1).unwrap() {
            assert!(p.iter().all(|&x| x > 0.0 && x < 1.0));
        }
    }

    #[test]
    fn rejects_empty_requests() {
        assert!(halton(0, 5, 1).is_err());
        assert!(halton(2, 0, 1).is_err());
    }
}
