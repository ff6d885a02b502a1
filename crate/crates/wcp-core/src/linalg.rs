//! Dense linear algebra for small symmetric problems: cyclic Jacobi
//! eigendecomposition, LU solves, and determinants.

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
///
/// Returns eigenvalues in ascending order and the matching eigenvectors as
/// rows of the second output. Converges to machine precision for the small
/// matrices used here (interaction matrices, Hessians, dense oracles).
pub fn jacobi_eigen(a: &[f64], n: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    assert_eq!(a.len(), n * n);
    let mut m = a.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let max_sweeps = 60;
    for _ in 0..max_sweeps {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += m[i * n + j] * m[i * n + j];
            }
        }
        let scale: f64 = (0..n).map(|i| m[i * n + i].abs()).fold(0.0, f64::max).max(1e-300);
        if off.sqrt() <= 1e-15 * scale * n as f64 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = m[p * n + p];
                let aqq = m[q * n + q];
                let theta = 0.5 * (aqq - app) / apq;
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    1.0 / (theta - (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // Apply the rotation on rows/columns p, q.
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
                    let vkp = v[p * n + k];
                    let vkq = v[q * n + k];
                    v[p * n + k] = c * vkp - s * vkq;
                    v[q * n + k] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut pairs: Vec<(f64, Vec<f64>)> = (0..n)
        .map(|i| (m[i * n + i], v[i * n..(i + 1) * n].to_vec()))
        .collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let evals = pairs.iter().map(|p| p.0).collect();
    let evecs = pairs.into_iter().map(|p| p.1).collect();
    (evals, evecs)
}

/// Least eigenvalue and eigenvector of a symmetric matrix, with the
/// canonical componentwise-nonnegative representative when all
/// off-diagonal entries are negative (Perron-type normalization: the sign
/// is flipped so the largest-magnitude component is positive).
pub fn least_eigenpair(a: &[f64], n: usize) -> (f64, Vec<f64>) {
    let (evals, evecs) = jacobi_eigen(a, n);
    let mut v = evecs[0].clone();
    let mut idx = 0;
    for (k, x) in v.iter().enumerate() {
        if x.abs() > v[idx].abs() {
            idx = k;
        }
    }
    if v[idx] < 0.0 {
        for x in &mut v {
            *x = -*x;
        }
    }
    (evals[0], v)
}

/// Solve `A x = b` by LU with partial pivoting. Returns `None` when the
/// pivot collapses (singular to working precision).
pub fn lu_solve(a: &[f64], b: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut m = a.to_vec();
    let mut x = b.to_vec();
    let mut piv: Vec<usize> = (0..n).collect();
    for k in 0..n {
        let mut p = k;
        for i in (k + 1)..n {
            if m[i * n + k].abs() > m[p * n + k].abs() {
                p = i;
            }
        }
        if m[p * n + k].abs() < 1e-300 {
            return None;
        }
        if p != k {
            for j in 0..n {
                m.swap(k * n + j, p * n + j);
            }
            x.swap(k, p);
            piv.swap(k, p);
        }
        for i in (k + 1)..n {
            let f = m[i * n + k] / m[k * n + k];
            m[i * n + k] = f;
            for j in (k + 1)..n {
                m[i * n + j] -= f * m[k * n + j];
            }
            x[i] -= f * x[k];
        }
    }
    for i in (0..n).rev() {
        for j in (i + 1)..n {
            x[i] -= m[i * n + j] * x[j];
        }
        x[i] /= m[i * n + i];
    }
    Some(x)
}

/// Determinant via LU with partial pivoting.
pub fn determinant(a: &[f64], n: usize) -> f64 {
    let mut m = a.to_vec();
    let mut det = 1.0;
    for k in 0..n {
        let mut p = k;
        for i in (k + 1)..n {
            if m[i * n + k].abs() > m[p * n + k].abs() {
                p = i;
            }
        }
        if m[p * n + k] == 0.0 {
            return 0.0;
        }
        if p != k {
            for j in 0..n {
                m.swap(k * n + j, p * n + j);
            }
            det = -det;
        }
        det *= m[k * n + k];
        for i in (k + 1)..n {
            let f = m[i * n + k] / m[k * n + k];
            for j in (k + 1)..n {
                m[i * n + j] -= f * m[k * n + j];
            }
        }
    }
    det
}

/// Frobenius norm.
pub fn frobenius(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    fn at(a: &[f64], n: usize, i: usize, j: usize) -> f64 {
        a[i * n + j]
    }

    #[test]
    fn analytic_two_by_two() {
        let a = [2.0, -1.0, -1.0, 2.0];
        let (mu, v) = least_eigenpair(&a, 2);
        assert!((mu - 1.0).abs() < 1e-14);
        let s = 1.0 / 2.0_f64.sqrt();
        assert!((v[0] - s).abs() < 1e-12 && (v[1] - s).abs() < 1e-12);
    }

    #[test]
    fn diagonal_matrix() {
        let a = [3.0, 0.0, 0.0, 5.0];
        let (mu, v) = least_eigenpair(&a, 2);
        assert!((mu - 3.0).abs() < 1e-15);
        assert!((v[0].abs() - 1.0).abs() < 1e-14 && v[1].abs() < 1e-14);
    }

    #[test]
    fn reconstruction_and_orthogonality() {
        let mut rng = Rng::new(21);
        for n in [3usize, 5, 8] {
            let mut a = vec![0.0; n * n];
            for i in 0..n {
                for j in i..n {
                    let x = rng.range(-1.0, 1.0);
                    a[i * n + j] = x;
                    a[j * n + i] = x;
                }
            }
            let (evals, evecs) = jacobi_eigen(&a, n);
            for (k, v) in evecs.iter().enumerate() {
                // A v = lambda v
                for i in 0..n {
                    let av: f64 = (0..n).map(|j| at(&a, n, i, j) * v[j]).sum();
                    assert!((av - evals[k] * v[i]).abs() < 1e-12, "residual row {i}");
                }
            }
            for i in 0..n {
                for j in 0..n {
                    let dot: f64 = (0..n).map(|k| evecs[i][k] * evecs[j][k]).sum();
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert!((dot - expect).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn perron_sign_constant_for_negative_off_diagonals() {
        let mut rng = Rng::new(22);
        for _ in 0..500 {
            let n = 2 + rng.usize_below(5);
            let mut a = vec![0.0; n * n];
            for i in 0..n {
                a[i * n + i] = rng.range(-1.0, 1.0);
                for j in (i + 1)..n {
                    let x = -rng.range(1e-3, 1.0);
                    a[i * n + j] = x;
                    a[j * n + i] = x;
                }
            }
            let (_, v) = least_eigenpair(&a, n);
            for &x in &v {
                assert!(x >= -1e-12, "component {x} of least eigenvector");
            }
        }
    }

    #[test]
    fn lu_solves_and_determinant() {
        let a = [4.0, 1.0, 0.0, 1.0, 3.0, -1.0, 0.0, -1.0, 2.0];
        let b = [1.0, 2.0, 3.0];
        let x = lu_solve(&a, &b, 3).unwrap();
        for i in 0..3 {
            let r: f64 = (0..3).map(|j| a[i * 3 + j] * x[j]).sum();
            assert!((r - b[i]).abs() < 1e-13);
        }
        // det by cofactor: 4*(6-1) - 1*(2-0) + 0 = 18
        assert!((determinant(&a, 3) - 18.0).abs() < 1e-12);
        let singular = [1.0, 2.0, 2.0, 4.0];
        assert!(lu_solve(&singular, &[1.0, 1.0], 2).is_none());
    }
}
