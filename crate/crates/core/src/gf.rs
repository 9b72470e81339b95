//! Arithmetic over prime fields GF(q).

use crate::error::{Error, Result};

pub fn is_prime(q: u32) -> bool {
    if q < 2 {
        return false;
    }
    let mut d = 2u32;
    while d * d <= q {
        if q % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

fn inverse(a: u32, q: u32) -> u32 {
    // Fermat: a^(q-2)
    let mut result = 1u64;
    let mut base = a as u64 % q as u64;
    let mut e = q - 2;
    while e > 0 {
        if e & 1 == 1 {
            result = result * base % q as u64;
        }
        base = base * base % q as u64;
        e >>= 1;
    }
    result as u32
}

/// Rank of a matrix over GF(q) by Gaussian elimination.
pub fn rank(matrix: &[Vec<u32>], q: u32) -> Result<usize> {
    if !is_prime(q) {
        return Err(Error::NotPrime(q));
    }
    let mut m: Vec<Vec<u32>> = matrix.iter().map(|r| r.iter().map(|v| v % q).collect()).collect();
    let rows = m.len();
    let cols = m.first().map_or(0, |r| r.len());
    let mut rank = 0;
    for col in 0..cols {
        let Some(pivot) = (rank..rows).find(|&r| m[r][col] != 0) else {
            continue;
        };
        m.swap(rank, pivot);
        let inv = inverse(m[rank][col], q);
        for c in col..cols {
            m[rank][c] = (m[rank][c] as u64 * inv as u64 % q as u64) as u32;
        }
        for r in 0..rows {
            if r != rank && m[r][col] != 0 {
                let f = m[r][col] as u64;
                for c in col..cols {
                    let sub = f * m[rank][c] as u64 % q as u64;
                    m[r][c] = ((m[r][c] as u64 + q as u64 - sub) % q as u64) as u32;
                }
            }
        }
        rank += 1;
        if rank == rows {
            break;
        }
    }
    Ok(rank)
}

/// Matrix-vector product over GF(q).
pub fn mat_vec(matrix: &[Vec<u32>], x: &[u32], q: u32) -> Vec<u32> {
    matrix
        .iter()
        .map(|row| {
            (row.iter().zip(x).map(|(&a, &b)| a as u64 * b as u64).sum::<u64>() % q as u64) as u32
        })
        .collect()
}

/// Digits of `index` in base `q`, most significant first.
pub fn to_digits(mut index: usize, q: u32, len: usize) -> Vec<u32> {
    let mut out = vec![0u32; len];
    for d in out.iter_mut().rev() {
        *d = (index % q as usize) as u32;
        index /= q as usize;
    }
    out
}

pub fn from_digits(digits: &[u32], q: u32) -> usize {
    digits.iter().fold(0usize, |acc, &d| acc * q as usize + d as usize)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn primes() {
        assert!(is_prime(2) && is_prime(3) && is_prime(7) && is_prime(13));
        assert!(!is_prime(0) && !is_prime(1) && !is_prime(4) && !is_prime(9));
    }

    #[test]
    fn rank_examples() {
        assert_eq!(rank(&[vec![1, 0], vec![0, 1]], 2).unwrap(), 2);
        assert_eq!(rank(&[vec![1, 1], vec![1, 1]], 2).unwrap(), 1);
        assert_eq!(rank(&[vec![0, 0], vec![0, 0]], 3).unwrap(), 0);
        // 1 2 / 2 1 over GF(3): det = 1 - 4 = -3 = 0
        assert_eq!(rank(&[vec![1, 2], vec![2, 1]], 3).unwrap(), 1);
        assert_eq!(rank(&[vec![1, 2], vec![2, 1]], 2).unwrap(), 2);
        assert_eq!(rank(&[], 2).unwrap(), 0);
        assert_eq!(rank(&[vec![1]], 4), Err(Error::NotPrime(4)));
    }

    #[test]
    fn digits_round_trip() {
        for i in 0..27 {
            let d = to_digits(i, 3, 3);
            assert_eq!(from_digits(&d, 3), i);
        }
        assert_eq!(to_digits(5, 2, 3), vec![1, 0, 1]);
    }
}
