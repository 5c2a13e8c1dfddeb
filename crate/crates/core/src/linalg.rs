//! Small dense symmetric linear algebra: Jacobi eigendecomposition,
//! Gauss-Jordan inversion, determinants. Matrices are row-major slices;
//! dimensions here are the state dimension or a subset of it, so nothing
//! fancier is warranted.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues in ascending order and the matching eigenvectors
/// as columns of a row-major orthogonal matrix.
pub fn sym_eigen<T: Scalar>(a: &[T], n: usize) -> Result<(Vec<T>, Vec<T>)> {
    if a.len() != n * n {
        return Err(Error::dims("sym_eigen: matrix is not n×n"));
    }
    let tol = T::from_f64_lit(1e-14);
    let mut m = a.to_vec();
    let mut v = vec![T::zero(); n * n];
    for i in 0..n {
        v[i * n + i] = T::one();
    }
    let frob = m
        .iter()
        .fold(T::zero(), |acc, &x| acc + x * x)
        .sqrt()
        .max(T::one());
    for _sweep in 0..100 {
        let mut off = T::zero();
        for p in 0..n {
            for q in (p + 1)..n {
                off += m[p * n + q] * m[p * n + q];
            }
        }
        if off.sqrt() <= tol * frob {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[p * n + q];
                if apq.abs() <= tol * frob * T::from_f64_lit(1e-3) {
                    continue;
                }
                let app = m[p * n + p];
                let aqq = m[q * n + q];
                let theta = (aqq - app) / (T::from_f64_lit(2.0) * apq);
                let t = {
                    let sign = if theta >= T::zero() {
                        T::one()
                    } else {
                        -T::one()
                    };
                    sign / (theta.abs() + (theta * theta + T::one()).sqrt())
                };
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = m[k * n + p];
                    let akq = m[k * n + q];
                    m[k * n + p] = c * akp - s * akq;
                    m[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = m[p * n + k];
                    let aqk = m[q * n + k];
                    m[p * n + k] = c * apk - s * aqk;
                    m[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    let diag: Vec<T> = (0..n).map(|i| m[i * n + i]).collect();
    order.sort_by(|&i, &j| diag[i].partial_cmp(&diag[j]).expect("finite eigenvalues"));
    let vals: Vec<T> = order.iter().map(|&i| diag[i]).collect();
    let mut vecs = vec![T::zero(); n * n];
    for (new, &old) in order.iter().enumerate() {
        for k in 0..n {
            vecs[k * n + new] = v[k * n + old];
        }
    }
    Ok((vals, vecs))
}

/// Largest eigenvalue of a symmetric matrix; closed form for n ≤ 2.
pub fn max_eigenvalue<T: Scalar>(a: &[T], n: usize) -> Result<T> {
    match n {
        1 => Ok(a[0]),
        2 => {
            let tr = a[0] + a[3];
            let det = a[0] * a[3] - a[1] * a[2];
            let half = T::from_f64_lit(0.5);
            let disc = (tr * tr - T::from_f64_lit(4.0) * det).max(T::zero()).sqrt();
            Ok(half * (tr + disc))
        }
        _ => {
            let (vals, _) = sym_eigen(a, n)?;
            Ok(*vals.last().expect("nonempty spectrum"))
        }
    }
}

/// Gauss-Jordan inversion with partial pivoting.
pub fn invert<T: Scalar>(a: &[T], n: usize) -> Result<Vec<T>> {
    if a.len() != n * n {
        return Err(Error::dims("invert: matrix is not n×n"));
    }
    let mut aug = vec![T::zero(); n * 2 * n];
    for r in 0..n {
        for c in 0..n {
            aug[r * 2 * n + c] = a[r * n + c];
        }
        aug[r * 2 * n + n + r] = T::one();
    }
    for col in 0..n {
        let mut piv = col;
        for r in (col + 1)..n {
            if aug[r * 2 * n + col].abs() > aug[piv * 2 * n + col].abs() {
                piv = r;
            }
        }
        if aug[piv * 2 * n + col].abs() < T::from_f64_lit(1e-300) {
            return Err(Error::numeric("invert: singular matrix"));
        }
        if piv != col {
            for c in 0..2 * n {
                aug.swap(col * 2 * n + c, piv * 2 * n + c);
            }
        }
        let d = aug[col * 2 * n + col];
        for c in 0..2 * n {
            aug[col * 2 * n + c] = aug[col * 2 * n + c] / d;
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let f = aug[r * 2 * n + col];
            if f == T::zero() {
                continue;
            }
            for c in 0..2 * n {
                let v = aug[col * 2 * n + c];
                aug[r * 2 * n + c] -= f * v;
            }
        }
    }
    let mut out = vec![T::zero(); n * n];
    for r in 0..n {
        for c in 0..n {
            out[r * n + c] = aug[r * 2 * n + n + c];
        }
    }
    Ok(out)
}

/// Determinant via LU with partial pivoting.
pub fn determinant<T: Scalar>(a: &[T], n: usize) -> T {
    let mut m = a.to_vec();
    let mut det = T::one();
    for col in 0..n {
        let mut piv = col;
        for r in (col + 1)..n {
            if m[r * n + col].abs() > m[piv * n + col].abs() {
                piv = r;
            }
        }
        if m[piv * n + col] == T::zero() {
            return T::zero();
        }
        if piv != col {
            for c in 0..n {
                m.swap(col * n + c, piv * n + c);
            }
            det = -det;
        }
        det *= m[col * n + col];
        for r in (col + 1)..n {
            let f = m[r * n + col] / m[col * n + col];
            for c in col..n {
                let v = m[col * n + c];
                m[r * n + c] -= f * v;
            }
        }
    }
    det
}

/// `U diag(λ^p) Uᵀ` for a symmetric positive-semidefinite matrix;
/// used with `p = ±1/2` for ellipsoid boundary sampling.
pub fn sym_power<T: Scalar>(a: &[T], n: usize, p: f64) -> Result<Vec<T>> {
    let (vals, vecs) = sym_eigen(a, n)?;
    let pw = T::from_f64_lit(p);
    let mut out = vec![T::zero(); n * n];
    for k in 0..n {
        let lk = vals[k];
        if lk < T::zero() && lk.abs() > T::from_f64_lit(1e-12) {
            return Err(Error::numeric("sym_power: negative eigenvalue"));
        }
        let f = lk.max(T::zero()).powf(pw);
        for r in 0..n {
            for c in 0..n {
                out[r * n + c] += f * vecs[r * n + k] * vecs[c * n + k];
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigen_of_diagonal() {
        let (vals, _) = sym_eigen::<f64>(&[3.0, 0.0, 0.0, 1.0], 2).unwrap();
        assert!((vals[0] - 1.0).abs() < 1e-12);
        assert!((vals[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn eigen_reconstructs_matrix() {
        let a: [f64; 9] = [2.0, 0.5, 0.1, 0.5, 1.5, -0.2, 0.1, -0.2, 0.8];
        let (vals, vecs) = sym_eigen(&a, 3).unwrap();
        let mut rec = [0.0f64; 9];
        for k in 0..3 {
            for r in 0..3 {
                for c in 0..3 {
                    rec[r * 3 + c] += vals[k] * vecs[r * 3 + k] * vecs[c * 3 + k];
                }
            }
        }
        for i in 0..9 {
            assert!((rec[i] - a[i]).abs() < 1e-10, "entry {i}");
        }
    }

    #[test]
    fn max_eigenvalue_2x2_closed_form() {
        let l = max_eigenvalue::<f64>(&[1.25, 0.0, 0.0, 5.0], 2).unwrap();
        assert!((l - 5.0).abs() < 1e-14);
    }

    #[test]
    fn invert_round_trip() {
        let a: [f64; 4] = [2.0, 1.0, 1.0, 3.0];
        let inv = invert(&a, 2).unwrap();
        let mut prod = [0.0f64; 4];
        for r in 0..2 {
            for c in 0..2 {
                for k in 0..2 {
                    prod[r * 2 + c] += a[r * 2 + k] * inv[k * 2 + c];
                }
            }
        }
        assert!((prod[0] - 1.0).abs() < 1e-12);
        assert!((prod[3] - 1.0).abs() < 1e-12);
        assert!(prod[1].abs() < 1e-12 && prod[2].abs() < 1e-12);
    }

    #[test]
    fn determinant_matches_cofactor() {
        let a: [f64; 4] = [2.0, 1.0, 1.0, 3.0];
        assert!((determinant(&a, 2) - 5.0).abs() < 1e-12);
    }

    #[test]
    fn singular_matrix_is_rejected() {
        assert!(invert::<f64>(&[1.0, 2.0, 2.0, 4.0], 2).is_err());
    }
}
