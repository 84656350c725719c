//! Dense reference solvers.
//!
//! These run on materialized dense matrices with textbook algorithms and
//! share no code with the structured kernels or the cloud eigensolver. The
//! test suites compare protocol outputs against them.

use crate::error::{dim_err, Result};
use crate::matcore::DenseMatrix;

/// LU factorization with partial pivoting, `PA = LU`.
#[derive(Clone, Debug)]
pub struct Lu {
    lu: DenseMatrix,
    piv: Vec<usize>,
    swaps: usize,
    min_pivot: f64,
}

impl Lu {
    pub fn new(a: &DenseMatrix) -> Result<Self> {
        if !a.is_square() {
            return dim_err("LU of non-square matrix");
        }
        let n = a.rows();
        let mut lu = a.clone();
        let mut piv: Vec<usize> = (0..n).collect();
        let mut swaps = 0;
        let mut min_pivot = f64::INFINITY;
        for k in 0..n {
            let (p, _) = (k..n)
                .map(|i| (i, lu[(i, k)].abs()))
                .fold((k, -1.0), |best, c| if c.1 > best.1 { c } else { best });
            if p != k {
                for j in 0..n {
                    let t = lu[(k, j)];
                    lu[(k, j)] = lu[(p, j)];
                    lu[(p, j)] = t;
                }
                piv.swap(k, p);
                swaps += 1;
            }
            let pivot = lu[(k, k)];
            min_pivot = min_pivot.min(pivot.abs());
            if pivot == 0.0 {
                continue;
            }
            for i in k + 1..n {
                let f = lu[(i, k)] / pivot;
                lu[(i, k)] = f;
                for j in k + 1..n {
                    lu[(i, j)] -= f * lu[(k, j)];
                }
            }
        }
        Ok(Self {
            lu,
            piv,
            swaps,
            min_pivot,
        })
    }

    pub fn det(&self) -> f64 {
        let sign = if self.swaps % 2 == 0 { 1.0 } else { -1.0 };
        (0..self.lu.rows()).map(|i| self.lu[(i, i)]).product::<f64>() * sign
    }

    /// Smallest absolute pivot encountered.
    pub fn min_pivot(&self) -> f64 {
        self.min_pivot
    }

    pub fn solve_vec(&self, b: &[f64]) -> Vec<f64> {
        let n = self.lu.rows();
        let mut x: Vec<f64> = self.piv.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for k in 0..i {
                x[i] -= self.lu[(i, k)] * x[k];
            }
        }
        for i in (0..n).rev() {
            for k in i + 1..n {
                x[i] -= self.lu[(i, k)] * x[k];
            }
            x[i] /= self.lu[(i, i)];
        }
        x
    }

    pub fn inverse(&self) -> DenseMatrix {
        let n = self.lu.rows();
        let mut inv = DenseMatrix::zeros(n, n).expect("n > 0");
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            for (i, v) in self.solve_vec(&e).into_iter().enumerate() {
                inv[(i, j)] = v;
            }
        }
        inv
    }
}

pub fn det(a: &DenseMatrix) -> Result<f64> {
    Ok(Lu::new(a)?.det())
}

pub fn inverse(a: &DenseMatrix) -> Result<DenseMatrix> {
    Ok(Lu::new(a)?.inverse())
}

/// Plaintext least squares `(XᵀX)⁻¹Xᵀy` solved by LU on the normal equations.
pub fn least_squares(x: &DenseMatrix, y: &[f64]) -> Result<Vec<f64>> {
    let xt = x.transpose();
    let gram = xt.matmul(x)?;
    let rhs = xt.mul_vec(y)?;
    Ok(Lu::new(&gram)?.solve_vec(&rhs))
}

/// Cyclic Jacobi eigensolver for symmetric matrices.
///
/// Returns eigenvalues sorted descending and the matching unit eigenvectors
/// as columns.
pub fn jacobi_eigen(a: &DenseMatrix) -> Result<(Vec<f64>, DenseMatrix)> {
    if !a.is_square() {
        return dim_err("Jacobi on non-square matrix");
    }
    let n = a.rows();
    let mut m = a.clone();
    let mut v = DenseMatrix::identity(n)?;
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)] * m[(i, j)])
            .sum();
        let total: f64 = m.data().iter().map(|x| x * x).sum();
        if off <= 1e-30 * total || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(j, j)].total_cmp(&m[(i, i)]));
    let values = order.iter().map(|&i| m[(i, i)]).collect();
    let vectors = DenseMatrix::from_rows(
        &(0..n)
            .map(|r| order.iter().map(|&c| v[(r, c)]).collect())
            .collect::<Vec<_>>(),
    )?;
    Ok((values, vectors))
}

/// Householder reduction of a symmetric matrix to tridiagonal form,
/// returning `(diagonal, off_diagonal)`.
fn tridiagonalize(a: &DenseMatrix) -> (Vec<f64>, Vec<f64>) {
    let n = a.rows();
    let mut m = a.clone();
    for k in 0..n.saturating_sub(2) {
        let alpha_sq: f64 = (k + 1..n).map(|i| m[(i, k)] * m[(i, k)]).sum();
        if alpha_sq == 0.0 {
            continue;
        }
        let x0 = m[(k + 1, k)];
        let alpha = -x0.signum() * alpha_sq.sqrt();
        let alpha = if x0 == 0.0 { -alpha_sq.sqrt() } else { alpha };
        let mut u = vec![0.0; n];
        u[k + 1] = x0 - alpha;
        for i in k + 2..n {
            u[i] = m[(i, k)];
        }
        let unorm_sq: f64 = u.iter().map(|x| x * x).sum();
        if unorm_sq == 0.0 {
            continue;
        }
        // m := (I − 2uuᵀ/|u|²) m (I − 2uuᵀ/|u|²)
        let mu = m.mul_vec(&u).unwrap();
        let scale = 2.0 / unorm_sq;
        let utmu: f64 = u.iter().zip(&mu).map(|(a, b)| a * b).sum();
        let w: Vec<f64> = mu
            .iter()
            .zip(&u)
            .map(|(p, ui)| scale * p - scale * scale * 0.5 * utmu * ui)
            .collect();
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] -= u[i] * w[j] + w[i] * u[j];
            }
        }
    }
    let d = (0..n).map(|i| m[(i, i)]).collect();
    let e = (0..n.saturating_sub(1)).map(|i| m[(i + 1, i)]).collect();
    (d, e)
}

/// Number of eigenvalues of the tridiagonal matrix strictly below `x`.
fn sturm_count(d: &[f64], e: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut q = d[0] - x;
    if q < 0.0 {
        count += 1;
    }
    for i in 1..d.len() {
        let denom = if q == 0.0 { f64::EPSILON * (e[i - 1].abs() + 1.0) } else { q };
        q = d[i] - x - e[i - 1] * e[i - 1] / denom;
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// Eigenvalues of a symmetric matrix by Sturm-sequence bisection, sorted
/// descending.
pub fn sturm_eigenvalues(a: &DenseMatrix) -> Result<Vec<f64>> {
    if !a.is_square() {
        return dim_err("Sturm bisection on non-square matrix");
    }
    let n = a.rows();
    let (d, e) = tridiagonalize(a);
    // Gershgorin bounds
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let r = if i > 0 { e[i - 1].abs() } else { 0.0 } + if i + 1 < n { e[i].abs() } else { 0.0 };
        lo = lo.min(d[i] - r);
        hi = hi.max(d[i] + r);
    }
    let pad = 1e-12 * (hi - lo).abs().max(1.0);
    lo -= pad;
    hi += pad;
    let mut values = Vec::with_capacity(n);
    for k in 0..n {
        // k-th smallest eigenvalue: smallest x with count(x) > k
        let (mut a_lo, mut a_hi) = (lo, hi);
        for _ in 0..200 {
            let mid = 0.5 * (a_lo + a_hi);
            if mid <= a_lo || mid >= a_hi {
                break;
            }
            if sturm_count(&d, &e, mid) > k {
                a_hi = mid;
            } else {
                a_lo = mid;
            }
        }
        values.push(0.5 * (a_lo + a_hi));
    }
    values.reverse();
    Ok(values)
}
