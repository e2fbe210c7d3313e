//! Dense Gaussian elimination with partial pivoting.
//!
//! The numeric oracles solve their linear systems in exact rational arithmetic
//! on the (exactly representable) `f64` rates, so tiny stationary weights and
//! escape probabilities keep full relative accuracy even when rates span many
//! orders of magnitude.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Solves `a x = b` in place. `a` is row-major `n x n`.
pub fn solve<T: Clone + Signed + PartialOrd>(mut a: Vec<Vec<T>>, mut b: Vec<T>) -> Result<Vec<T>> {
    let n = b.len();
    assert!(a.len() == n && a.iter().all(|row| row.len() == n));
    for col in 0..n {
        let pivot = (col..n)
            .filter(|&r| !a[r][col].is_zero())
            .max_by(|&r, &s| {
                a[r][col]
                    .abs()
                    .partial_cmp(&a[s][col].abs())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .ok_or(Error::Singular)?;
        a.swap(col, pivot);
        b.swap(col, pivot);
        for r in col + 1..n {
            if a[r][col].is_zero() {
                continue;
            }
            let factor = a[r][col].clone() / a[col][col].clone();
            for c in col..n {
                let delta = factor.clone() * a[col][c].clone();
                a[r][c] = a[r][c].clone() - delta;
            }
            let delta = factor * b[col].clone();
            b[r] = b[r].clone() - delta;
        }
    }
    let mut x = vec![T::zero(); n];
    for row in (0..n).rev() {
        let mut acc = b[row].clone();
        for c in row + 1..n {
            acc = acc - a[row][c].clone() * x[c].clone();
        }
        x[row] = acc / a[row][row].clone();
    }
    Ok(x)
}

/// Exact rational image of a finite float.
pub fn exact(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite value")
}

/// Nearest float to an exact rational.
pub fn to_f64(x: &BigRational) -> f64 {
    if x.is_zero() {
        return 0.0;
    }
    if let Some(v) = x.to_f64() {
        if v.is_finite() && v != 0.0 {
            return v;
        }
    }
    // fall back on a scaled quotient when the direct conversion under/overflows
    let (numer, denom) = (x.numer(), x.denom());
    let shift = numer.bits() as i64 - denom.bits() as i64;
    let scaled = if shift >= 0 {
        BigRational::new(numer.clone(), denom.clone() << shift as usize)
    } else {
        BigRational::new(numer.clone() << (-shift) as usize, denom.clone())
    };
    scaled.to_f64().unwrap_or(f64::NAN) * 2f64.powi(shift as i32)
}

pub fn rational_zero() -> BigRational {
    BigRational::from_integer(BigInt::from(0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_float_system() {
        let a = vec![vec![0.0, 2.0], vec![1.0, 1.0]];
        let x = solve(a, vec![4.0, 3.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-15 && (x[1] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn singular_is_reported() {
        let a = vec![vec![1.0, 2.0], vec![2.0, 4.0]];
        assert!(matches!(solve(a, vec![1.0, 2.0]), Err(Error::Singular)));
    }

    #[test]
    fn exact_round_trip() {
        for v in [1e-300, 0.1, 3.0, 1e300, 2.5e-200] {
            assert_eq!(to_f64(&exact(v)), v);
        }
        let small = exact(1e-150) * exact(1e-150);
        assert!((to_f64(&small) / 1e-300 - 1.0).abs() < 1e-14);
    }

    #[test]
    fn rational_solve_is_exact() {
        let third = exact(1.0) / exact(3.0);
        let a = vec![vec![exact(3.0), exact(0.0)], vec![exact(1.0), exact(1.0)]];
        let x = solve(a, vec![exact(1.0), exact(1.0)]).unwrap();
        assert_eq!(x[0], third);
        assert_eq!(x[1], exact(1.0) - third);
    }
}
