//! Outsourced least-squares regression.
//!
//! The client centers the design, sends `𝒳' = A𝒳M` and `𝒴' = A(𝒴 + 𝒳R)`
//! with `A = diag(±k)`. Because `AᵀA = k²I`, the server's normal-equations
//! solution is `β' = M⁻¹(β + R)`. The client checks `𝒳'ᵀ(𝒳'β' − 𝒴') = 0`
//! and recovers `β = Mβ' − R`, `β₀ = ȳ − x̄β`.

use crate::error::{dim_err, Error, Result};
use crate::fastmul::{apply_secret, apply_secret_vec, Side};
use crate::keyforge::LrKey;
use crate::matcore::DenseMatrix;
use crate::Verdict;

/// Default relative tolerance for [`lr_verify`].
pub const LR_TOL: f64 = 1e-7;
/// Cholesky pivots below `SINGULAR_REL · trace(G)/n` mark a singular design.
pub const SINGULAR_REL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct CenteredDesign {
    pub x_centered: DenseMatrix,
    pub y_centered: Vec<f64>,
    pub x_mean: Vec<f64>,
    pub y_mean: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LrSolution {
    pub beta: Vec<f64>,
    pub beta0: f64,
}

pub fn lr_center(x: &DenseMatrix, y: &[f64]) -> Result<CenteredDesign> {
    let (m, n) = x.shape();
    if m <= n {
        return Err(Error::UnderdeterminedDesign { rows: m, cols: n });
    }
    if y.len() != m {
        return dim_err(format!("{m} design rows with {} responses", y.len()));
    }
    let x_mean: Vec<f64> = x.col_sums().into_iter().map(|s| s / m as f64).collect();
    let y_mean = y.iter().sum::<f64>() / m as f64;
    let mut x_centered = x.clone();
    for i in 0..m {
        for (v, mu) in x_centered.row_mut(i).iter_mut().zip(&x_mean) {
            *v -= mu;
        }
    }
    let y_centered = y.iter().map(|v| v - y_mean).collect();
    Ok(CenteredDesign {
        x_centered,
        y_centered,
        x_mean,
        y_mean,
    })
}

fn scale_rows(t: &DenseMatrix, diag: &[f64]) -> DenseMatrix {
    let mut out = t.clone();
    for (i, d) in diag.iter().enumerate() {
        for v in out.row_mut(i) {
            *v *= d;
        }
    }
    out
}

/// Returns `(𝒳', 𝒴')`.
pub fn lr_encrypt(key: &LrKey, d: &CenteredDesign) -> Result<(DenseMatrix, Vec<f64>)> {
    let (m, n) = key.dims();
    if d.x_centered.shape() != (m, n) || d.y_centered.len() != m {
        return dim_err(format!(
            "LR key for {m}x{n} with design {}x{}",
            d.x_centered.rows(),
            d.x_centered.cols()
        ));
    }
    let a = key.a_diag();
    let xm = apply_secret(key.m_key(), &d.x_centered, Side::Right, false)?;
    let x_enc = scale_rows(&xm, &a);
    let xr = d.x_centered.mul_vec(key.r_vec())?;
    let y_enc = d
        .y_centered
        .iter()
        .zip(&xr)
        .zip(&a)
        .map(|((y, xr), a)| a * (y + xr))
        .collect();
    Ok((x_enc, y_enc))
}

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
fn cholesky(g: &DenseMatrix) -> Result<DenseMatrix> {
    let n = g.rows();
    let threshold = SINGULAR_REL * g.trace().abs() / n as f64;
    let mut l = DenseMatrix::zeros(n, n)?;
    for j in 0..n {
        let mut d = g[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > threshold) {
            return Err(Error::SingularDesign { pivot: d, threshold });
        }
        let ljj = d.sqrt();
        l[(j, j)] = ljj;
        for i in j + 1..n {
            let mut s = g[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / ljj;
        }
    }
    Ok(l)
}

fn cholesky_solve(l: &DenseMatrix, b: &[f64]) -> Vec<f64> {
    let n = l.rows();
    let mut z = b.to_vec();
    for i in 0..n {
        for k in 0..i {
            z[i] -= l[(i, k)] * z[k];
        }
        z[i] /= l[(i, i)];
    }
    for i in (0..n).rev() {
        for k in i + 1..n {
            z[i] -= l[(k, i)] * z[k];
        }
        z[i] /= l[(i, i)];
    }
    z
}

/// `(XᵀX)⁻¹Xᵀy` through the Gram matrix and a Cholesky factorization.
pub fn solve_normal_equations(x: &DenseMatrix, y: &[f64]) -> Result<Vec<f64>> {
    if y.len() != x.rows() {
        return dim_err(format!("{} rows with {} responses", x.rows(), y.len()));
    }
    let xt = x.transpose();
    let gram = xt.matmul(x)?;
    let rhs = x.vec_mul(y)?;
    let l = cholesky(&gram)?;
    Ok(cholesky_solve(&l, &rhs))
}

/// Server side: least squares on the masked design.
pub fn cloud_lr(x_enc: &DenseMatrix, y_enc: &[f64]) -> Result<Vec<f64>> {
    solve_normal_equations(x_enc, y_enc)
}

/// Checks the normal-equation residual `𝒳'ᵀ(𝒳'β' − 𝒴')`.
///
/// Accepts when its largest entry is at most
/// `tol · ‖𝒳'‖∞² · ‖β'‖∞ · m`.
pub fn lr_verify(x_enc: &DenseMatrix, y_enc: &[f64], beta_enc: &[f64], tol: f64) -> Result<Verdict> {
    let (m, n) = x_enc.shape();
    if y_enc.len() != m || beta_enc.len() != n {
        return dim_err(format!(
            "verify {m}x{n} design with {} responses and {} coefficients",
            y_enc.len(),
            beta_enc.len()
        ));
    }
    let fitted = x_enc.mul_vec(beta_enc)?;
    let resid: Vec<f64> = fitted.iter().zip(y_enc).map(|(f, y)| f - y).collect();
    let normal = x_enc.vec_mul(&resid)?;
    let worst = normal.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let beta_max = beta_enc.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let xmax = x_enc.norm_max();
    let threshold = tol * xmax * xmax * beta_max * m as f64;
    Ok(if worst <= threshold {
        Verdict::Accept
    } else {
        Verdict::Reject
    })
}

pub fn lr_decrypt(key: &LrKey, beta_enc: &[f64], d: &CenteredDesign) -> Result<LrSolution> {
    let (_, n) = key.dims();
    if beta_enc.len() != n || d.x_mean.len() != n {
        return dim_err(format!("LR key of size {n} with {} coefficients", beta_enc.len()));
    }
    let mb = apply_secret_vec(key.m_key(), beta_enc, false)?;
    let beta: Vec<f64> = mb.iter().zip(key.r_vec()).map(|(a, r)| a - r).collect();
    let beta0 = d.y_mean - d.x_mean.iter().zip(&beta).map(|(x, b)| x * b).sum::<f64>();
    Ok(LrSolution { beta, beta0 })
}

/// Plaintext solve on the same centered design, for comparison and timing.
pub fn lr_plain(d: &CenteredDesign) -> Result<LrSolution> {
    let beta = solve_normal_equations(&d.x_centered, &d.y_centered)?;
    let beta0 = d.y_mean - d.x_mean.iter().zip(&beta).map(|(x, b)| x * b).sum::<f64>();
    Ok(LrSolution { beta, beta0 })
}
