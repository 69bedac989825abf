//! Halton low-discrepancy points in the unit cube.

const PRIMES: [u32; 8] = [2, 3, 5, 7, 11, 13, 17, 19];

/// Radical inverse of `i` in base `b`.
pub fn radical_inverse(mut i: u64, b: u32) -> f64 {
    let b = b as u64;
    let inv = 1.0 / b as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += f * (i % b) as f64;
        i /= b;
        f *= inv;
    }
    r
}

/// `count` Halton points in `[0,1)^dim`, skipping index 0.
pub fn halton(count: usize, dim: usize) -> Vec<Vec<f64>> {
    assert!(dim <= PRIMES.len(), "at most {} dimensions", PRIMES.len());
    (1..=count as u64)
        .map(|i| PRIMES[..dim].iter().map(|&p| radical_inverse(i, p)).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_points() {
        let p = halton(3, 2);
        assert_eq!(p[0], vec![0.5, 1.0 / 3.0]);
        assert_eq!(p[1], vec![0.25, 2.0 / 3.0]);
        assert_eq!(p[2][0], 0.75);
    }
}
