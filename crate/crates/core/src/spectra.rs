//! Outsourced PCA.
//!
//! The covariance `A = XXᵀ` is formed (optionally through the matrix
//! multiplication protocol), masked as `B = M(αA + sI)M⁻¹`, and decomposed
//! by the server with a general real eigensolver. `B` is similar to a
//! symmetric matrix, so its spectrum is real. The client checks
//! `(rB)V' − (rV')Λ' = 0` for random 0/1 rows `r`, then unmasks
//! `λ = (λ' − s)/α` and `v = M⁻¹v'`.

use crate::error::{dim_err, Error, Result};
use crate::fastmul::{apply_secret, apply_secret_in_place, Side};
use crate::keyforge::{keygen_mmc, EvdKey};
use crate::matcore::{DenseMatrix, Rng};
use crate::mmc::{cloud_mmc, mmc_decrypt, mmc_encrypt, mmc_verify, TAU_VER};
use crate::Verdict;

/// Imaginary parts up to `COMPLEX_TOL · ‖B‖∞` are rounding noise.
pub const COMPLEX_TOL: f64 = 1e-7;
/// Eigenvalues closer than `CLUSTER_TOL · scale` are treated as one cluster.
pub const CLUSTER_TOL: f64 = 1e-8;
/// Required eigenpair residual `‖Bv − λv‖₂ / ‖B‖∞`.
pub const RESIDUAL_TOL: f64 = 1e-7;
/// Input asymmetry tolerated by [`evd_encrypt`], relative to `‖A‖∞`.
pub const SYMMETRY_TOL: f64 = 1e-8;

/// Eigenvalues sorted descending with matching unit eigenvectors as columns.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    eigenvalues: Vec<f64>,
    eigenvectors: DenseMatrix,
}

fn unit(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
}

impl Spectrum {
    /// Validates shape, ordering and normalization (to 1e-8).
    pub fn new(eigenvalues: Vec<f64>, eigenvectors: DenseMatrix) -> Result<Self> {
        let n = eigenvalues.len();
        if eigenvectors.shape() != (n, n) {
            return dim_err(format!(
                "{n} eigenvalues with {}x{} eigenvectors",
                eigenvectors.rows(),
                eigenvectors.cols()
            ));
        }
        if eigenvalues.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::Parameter("eigenvalues must be sorted descending".into()));
        }
        for j in 0..n {
            let norm = eigenvectors.col(j).iter().map(|x| x * x).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > 1e-8 {
                return Err(Error::Parameter(format!("eigenvector {j} has norm {norm}")));
            }
        }
        Ok(Self {
            eigenvalues,
            eigenvectors,
        })
    }

    /// Sorts the pairs descending and normalizes every column.
    pub fn from_unsorted(values: Vec<f64>, vectors: &DenseMatrix) -> Result<Self> {
        let n = values.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| values[j].total_cmp(&values[i]));
        let mut out = DenseMatrix::zeros(n, n)?;
        for (dst, &src) in order.iter().enumerate() {
            let mut v = vectors.col(src);
            unit(&mut v);
            for (i, x) in v.into_iter().enumerate() {
                out[(i, dst)] = x;
            }
        }
        Self::new(order.iter().map(|&i| values[i]).collect(), out)
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &DenseMatrix {
        &self.eigenvectors
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn into_parts(self) -> (Vec<f64>, DenseMatrix) {
        (self.eigenvalues, self.eigenvectors)
    }
}

/// How the covariance product is computed.
pub enum Covariance<'a> {
    Local,
    /// Through the matrix multiplication protocol with fresh keys.
    Outsourced { kappa: u32, loops: usize, rng: &'a mut Rng },
}

/// Centers the columns of the `n×m` data matrix and returns `(X, XXᵀ)`.
pub fn cov_matrix(d: &DenseMatrix, how: Covariance<'_>) -> Result<(DenseMatrix, DenseMatrix)> {
    let (n, m) = d.shape();
    if m < 2 {
        return dim_err(format!("covariance of {m} sample(s)"));
    }
    let means: Vec<f64> = d.row_sums().into_iter().map(|s| s / m as f64).collect();
    let mut x = d.clone();
    for (i, mu) in means.iter().enumerate() {
        x.row_mut(i).iter_mut().for_each(|v| *v -= mu);
    }
    let xt = x.transpose();
    let a = match how {
        Covariance::Local => x.matmul(&xt)?,
        Covariance::Outsourced { kappa, loops, rng } => {
            let key = keygen_mmc(n, m, n, kappa, rng)?;
            let task = mmc_encrypt(&key, &x, &xt)?;
            let z = mmc_decrypt(&key, &cloud_mmc(&task)?)?;
            if mmc_verify(&x, &xt, &z, loops, rng)? == Verdict::Reject {
                return Err(Error::VerificationFailed("covariance product".into()));
            }
            symmetrize(&z)
        }
    };
    Ok((x, a))
}

fn symmetrize(a: &DenseMatrix) -> DenseMatrix {
    DenseMatrix::from_rows(
        &(0..a.rows())
            .map(|i| (0..a.cols()).map(|j| 0.5 * (a[(i, j)] + a[(j, i)])).collect())
            .collect::<Vec<_>>(),
    )
    .expect("square input")
}

/// `B = M(αA + sI)M⁻¹`.
pub fn evd_encrypt(key: &EvdKey, a: &DenseMatrix) -> Result<DenseMatrix> {
    if !a.is_square() {
        return dim_err(format!("EVD of {}x{} matrix", a.rows(), a.cols()));
    }
    if a.rows() != key.len() {
        return dim_err(format!("EVD key of size {} for {}x{} matrix", key.len(), a.rows(), a.cols()));
    }
    let asym = a.sub(&a.transpose())?.norm_max();
    if asym > SYMMETRY_TOL * a.norm_max() {
        return Err(Error::Parameter(format!("input is not symmetric (asymmetry {asym:e})")));
    }
    let mut shifted = a.scale(key.alpha());
    for i in 0..a.rows() {
        shifted[(i, i)] += key.s_shift();
    }
    apply_secret_in_place(key.m_key(), &mut shifted, Side::Left, false)?;
    apply_secret_in_place(key.m_key(), &mut shifted, Side::Right, true)?;
    Ok(shifted)
}

/// Householder reduction to upper Hessenberg form.
///
/// Returns the Hessenberg matrix (1-indexed rows/cols, index 0 unused) and
/// the unit reflector vectors, reflector `k` acting on indices `k+1..n`.
fn hessenberg(b: &DenseMatrix) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let n = b.rows();
    let mut a = vec![vec![0.0; n + 1]; n + 1];
    for i in 0..n {
        for j in 0..n {
            a[i + 1][j + 1] = b[(i, j)];
        }
    }
    let mut reflectors = Vec::new();
    for k in 1..n.saturating_sub(1) {
        // annihilate a[k+2..=n][k]
        let norm = (k + 1..=n).map(|i| a[i][k] * a[i][k]).sum::<f64>().sqrt();
        let mut v = vec![0.0; n + 1];
        if norm == 0.0 {
            reflectors.push(v);
            continue;
        }
        let alpha = if a[k + 1][k] > 0.0 { -norm } else { norm };
        for i in k + 1..=n {
            v[i] = a[i][k];
        }
        v[k + 1] -= alpha;
        let vnorm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if vnorm == 0.0 {
            reflectors.push(vec![0.0; n + 1]);
            continue;
        }
        v.iter_mut().for_each(|x| *x /= vnorm);
        // A := (I − 2vvᵀ) A (I − 2vvᵀ)
        for j in 1..=n {
            let dot: f64 = (k + 1..=n).map(|i| v[i] * a[i][j]).sum();
            for i in k + 1..=n {
                a[i][j] -= 2.0 * v[i] * dot;
            }
        }
        for row in a.iter_mut().skip(1) {
            let dot: f64 = (k + 1..=n).map(|j| row[j] * v[j]).sum();
            for j in k + 1..=n {
                row[j] -= 2.0 * dot * v[j];
            }
        }
        for i in k + 2..=n {
            a[i][k] = 0.0;
        }
        reflectors.push(v);
    }
    (a, reflectors)
}

/// Eigenvalues of a 1-indexed upper Hessenberg matrix by Francis
/// double-shift QR. Returns `(real, imag)` parts.
fn hqr(mut a: Vec<Vec<f64>>, n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut wr = vec![0.0; n + 1];
    let mut wi = vec![0.0; n + 1];
    let mut anorm = 0.0;
    for i in 1..=n {
        for j in (i.max(2) - 1)..=n {
            anorm += a[i][j].abs();
        }
    }
    let max_sweeps = 100 * n;
    let mut sweeps = 0;
    let mut nn = n;
    let mut t = 0.0;
    let (mut p, mut q, mut r): (f64, f64, f64);
    let (mut x, mut y, mut z, mut w);
    while nn >= 1 {
        let mut its = 0;
        loop {
            let mut l = nn;
            while l >= 2 {
                let mut s = a[l - 1][l - 1].abs() + a[l][l].abs();
                if s == 0.0 {
                    s = anorm;
                }
                if a[l][l - 1].abs() + s == s {
                    a[l][l - 1] = 0.0;
                    break;
                }
                l -= 1;
            }
            x = a[nn][nn];
            if l == nn {
                wr[nn] = x + t;
                wi[nn] = 0.0;
                nn -= 1;
            } else {
                y = a[nn - 1][nn - 1];
                w = a[nn][nn - 1] * a[nn - 1][nn];
                if l == nn - 1 {
                    p = 0.5 * (y - x);
                    q = p * p + w;
                    z = q.abs().sqrt();
                    x += t;
                    if q >= 0.0 {
                        z = p + z.copysign(p);
                        wr[nn - 1] = x + z;
                        wr[nn] = x + z;
                        if z != 0.0 {
                            wr[nn] = x - w / z;
                        }
                        wi[nn - 1] = 0.0;
                        wi[nn] = 0.0;
                    } else {
                        wr[nn - 1] = x + p;
                        wr[nn] = x + p;
                        wi[nn - 1] = -z;
                        wi[nn] = z;
                    }
                    nn = nn.saturating_sub(2);
                } else {
                    if sweeps >= max_sweeps {
                        return Err(Error::ConvergenceFailure(max_sweeps));
                    }
                    if its > 0 && its % 10 == 0 {
                        // exceptional shift
                        t += x;
                        for i in 1..=nn {
                            a[i][i] -= x;
                        }
                        let s = a[nn][nn - 1].abs() + a[nn - 1][nn - 2].abs();
                        x = 0.75 * s;
                        y = x;
                        w = -0.4375 * s * s;
                    }
                    its += 1;
                    sweeps += 1;
                    let mut m = nn - 2;
                    loop {
                        z = a[m][m];
                        r = x - z;
                        let s = y - z;
                        p = (r * s - w) / a[m + 1][m] + a[m][m + 1];
                        q = a[m + 1][m + 1] - z - r - s;
                        r = a[m + 2][m + 1];
                        let s = p.abs() + q.abs() + r.abs();
                        p /= s;
                        q /= s;
                        r /= s;
                        if m == l {
                            break;
                        }
                        let u = a[m][m - 1].abs() * (q.abs() + r.abs());
                        let v = p.abs() * (a[m - 1][m - 1].abs() + z.abs() + a[m + 1][m + 1].abs());
                        if u + v == v {
                            break;
                        }
                        m -= 1;
                    }
                    for i in m + 2..=nn {
                        a[i][i - 2] = 0.0;
                        if i != m + 2 {
                            a[i][i - 3] = 0.0;
                        }
                    }
                    let mut k = m;
                    while k < nn {
                        if k != m {
                            p = a[k][k - 1];
                            q = a[k + 1][k - 1];
                            r = 0.0;
                            if k != nn - 1 {
                                r = a[k + 2][k - 1];
                            }
                            x = p.abs() + q.abs() + r.abs();
                            if x != 0.0 {
                                p /= x;
                                q /= x;
                                r /= x;
                            }
                        }
                        let s = (p * p + q * q + r * r).sqrt().copysign(p);
                        if s != 0.0 {
                            if k == m {
                                if l != m {
                                    a[k][k - 1] = -a[k][k - 1];
                                }
                            } else {
                                a[k][k - 1] = -s * x;
                            }
                            p += s;
                            x = p / s;
                            y = q / s;
                            z = r / s;
                            q /= p;
                            r /= p;
                            for j in k..=nn {
                                p = a[k][j] + q * a[k + 1][j];
                                if k != nn - 1 {
                                    p += r * a[k + 2][j];
                                    a[k + 2][j] -= p * z;
                                }
                                a[k + 1][j] -= p * y;
                                a[k][j] -= p * x;
                            }
                            let mmin = if nn < k + 3 { nn } else { k + 3 };
                            for i in l..=mmin {
                                p = x * a[i][k] + y * a[i][k + 1];
                                if k != nn - 1 {
                                    p += z * a[i][k + 2];
                                    a[i][k + 2] -= p * r;
                                }
                                a[i][k + 1] -= p * q;
                                a[i][k] -= p;
                            }
                        }
                        k += 1;
                    }
                }
            }
            if nn == 0 || l + 1 >= nn {
                break;
            }
        }
    }
    Ok((wr[1..].to_vec(), wi[1..].to_vec()))
}

/// LU of the Hessenberg matrix `H − σI` with adjacent-row pivoting.
struct HessLu {
    u: Vec<Vec<f64>>,
    mult: Vec<f64>,
    swapped: Vec<bool>,
}

impl HessLu {
    fn new(h: &[Vec<f64>], n: usize, sigma: f64, floor: f64) -> Self {
        let mut u: Vec<Vec<f64>> = (1..=n).map(|i| (1..=n).map(|j| h[i][j]).collect()).collect();
        for (i, row) in u.iter_mut().enumerate() {
            row[i] -= sigma;
        }
        let mut mult = vec![0.0; n];
        let mut swapped = vec![false; n];
        for k in 0..n.saturating_sub(1) {
            if u[k + 1][k].abs() > u[k][k].abs() {
                u.swap(k, k + 1);
                swapped[k] = true;
            }
            if u[k][k] == 0.0 {
                u[k][k] = floor;
            }
            let f = u[k + 1][k] / u[k][k];
            mult[k] = f;
            u[k + 1][k] = 0.0;
            for j in k + 1..n {
                u[k + 1][j] -= f * u[k][j];
            }
        }
        if n > 0 && u[n - 1][n - 1] == 0.0 {
            u[n - 1][n - 1] = floor;
        }
        Self { u, mult, swapped }
    }

    fn solve(&self, b: &mut [f64]) {
        let n = b.len();
        for k in 0..n.saturating_sub(1) {
            if self.swapped[k] {
                b.swap(k, k + 1);
            }
            b[k + 1] -= self.mult[k] * b[k];
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for j in i + 1..n {
                s -= self.u[i][j] * b[j];
            }
            b[i] = s / self.u[i][i];
        }
    }
}

fn hess_residual(h: &[Vec<f64>], n: usize, lambda: f64, y: &[f64]) -> f64 {
    (1..=n)
        .map(|i| {
            let hy: f64 = (i.max(2) - 1..=n).map(|j| h[i][j] * y[j - 1]).sum();
            (hy - lambda * y[i - 1]).powi(2)
        })
        .sum::<f64>()
        .sqrt()
}

/// Server side: all eigenpairs of a real matrix with real spectrum.
///
/// Hessenberg reduction, Francis QR for the eigenvalues, then inverse
/// iteration on the Hessenberg matrix for each vector. Vectors within a
/// cluster of nearly equal eigenvalues are kept mutually orthogonal so the
/// cluster's invariant subspace is spanned.
pub fn cloud_evd(b: &DenseMatrix) -> Result<Spectrum> {
    if !b.is_square() {
        return dim_err(format!("EVD of {}x{} matrix", b.rows(), b.cols()));
    }
    b.ensure_finite()?;
    let n = b.rows();
    let bnorm = b.norm_max();
    let (h, reflectors) = hessenberg(b);
    let (wr, wi) = hqr(h.clone(), n)?;
    let worst_imag = wi.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if worst_imag > COMPLEX_TOL * bnorm {
        return Err(Error::SpectrumAssumption(worst_imag));
    }
    let mut values = wr;
    values.sort_by(|a, b| b.total_cmp(a));

    let scale = bnorm.max(f64::MIN_POSITIVE);
    let floor = f64::EPSILON * scale;
    let mut ys: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut cluster_start = 0;
    for (k, &lambda) in values.iter().enumerate() {
        if k > 0 && (values[k - 1] - lambda).abs() >= CLUSTER_TOL * scale {
            cluster_start = k;
        }
        let lu = HessLu::new(&h, n, lambda, floor);
        let mut start = Rng::new(0x5eed_0000 + k as u64);
        let mut y: Vec<f64> = (0..n).map(|_| start.uniform_range(-1.0, 1.0)).collect();
        unit(&mut y);
        let mut converged = false;
        for iter in 0..12 {
            lu.solve(&mut y);
            for prev in &ys[cluster_start..k] {
                let dot: f64 = prev.iter().zip(&y).map(|(a, b)| a * b).sum();
                y.iter_mut().zip(prev).for_each(|(v, p)| *v -= dot * p);
            }
            if y.iter().any(|v| !v.is_finite()) {
                y = (0..n).map(|_| start.uniform_range(-1.0, 1.0)).collect();
            }
            unit(&mut y);
            if iter >= 1 && hess_residual(&h, n, lambda, &y) <= 0.01 * RESIDUAL_TOL * scale {
                converged = true;
                break;
            }
        }
        if !converged && hess_residual(&h, n, lambda, &y) > RESIDUAL_TOL * scale {
            return Err(Error::ConvergenceFailure(12));
        }
        ys.push(y);
    }

    let mut vectors = DenseMatrix::zeros(n, n)?;
    for (col, y) in ys.iter().enumerate() {
        // v = Q y with Q = R₁R₂⋯; apply the last reflector first
        let mut v = vec![0.0; n + 1];
        v[1..].copy_from_slice(y);
        for refl in reflectors.iter().rev() {
            let dot: f64 = refl.iter().zip(&v).map(|(a, b)| a * b).sum();
            if dot != 0.0 {
                v.iter_mut().zip(refl).for_each(|(x, r)| *x -= 2.0 * dot * r);
            }
        }
        let mut v = v[1..].to_vec();
        unit(&mut v);
        for (i, x) in v.into_iter().enumerate() {
            vectors[(i, col)] = x;
        }
    }
    Spectrum::new(values, vectors)
}

/// Monte-Carlo check of `BV' = V'Λ'` using `loops` random 0/1 rows.
pub fn evd_verify(b: &DenseMatrix, spec: &Spectrum, loops: usize, rng: &mut Rng) -> Result<Verdict> {
    if loops == 0 {
        return Err(Error::Parameter("verification needs at least one loop".into()));
    }
    let n = b.rows();
    if !b.is_square() || spec.len() != n {
        return dim_err(format!("verify {}x{} matrix against {} eigenpairs", b.rows(), b.cols(), spec.len()));
    }
    let threshold = TAU_VER * b.norm_max() * n as f64;
    let v = spec.eigenvectors();
    let mut verdict = Verdict::Accept;
    for _ in 0..loops {
        let r: Vec<f64> = (0..n).map(|_| if rng.bit() { 1.0 } else { 0.0 }).collect();
        let rb = b.vec_mul(&r)?;
        let rbv = v.vec_mul(&rb)?;
        let rv = v.vec_mul(&r)?;
        let worst = rbv
            .iter()
            .zip(&rv)
            .zip(spec.eigenvalues())
            .fold(0.0f64, |m, ((a, b), l)| m.max((a - b * l).abs()));
        if !(worst <= threshold) {
            verdict = Verdict::Reject;
        }
    }
    Ok(verdict)
}

/// Flips each column so its first entry that is not negligible is positive.
pub fn fix_signs(v: &mut DenseMatrix) {
    for j in 0..v.cols() {
        let col = v.col(j);
        let cut = 1e-12 * col.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if let Some(first) = col.iter().find(|x| x.abs() > cut) {
            if *first < 0.0 {
                for i in 0..v.rows() {
                    v[(i, j)] = -v[(i, j)];
                }
            }
        }
    }
}

/// Unmasks the server's spectrum: `λ = (λ' − s)/α`, `v = M⁻¹v'`.
///
/// Vectors are renormalized, sorted by eigenvalue, orthonormalized inside
/// clusters of nearly equal eigenvalues, and sign-fixed.
pub fn evd_decrypt(key: &EvdKey, spec_enc: &Spectrum) -> Result<Spectrum> {
    if spec_enc.len() != key.len() {
        return dim_err(format!("EVD key of size {} for {} eigenpairs", key.len(), spec_enc.len()));
    }
    let values: Vec<f64> = spec_enc
        .eigenvalues()
        .iter()
        .map(|l| (l - key.s_shift()) / key.alpha())
        .collect();
    let raw = apply_secret(key.m_key(), spec_enc.eigenvectors(), Side::Left, true)?;
    let sorted = Spectrum::from_unsorted(values, &raw)?;
    let (values, mut vectors) = sorted.into_parts();
    let n = values.len();
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let mut start = 0;
    for k in 0..n {
        if k > 0 && (values[k - 1] - values[k]).abs() >= CLUSTER_TOL * scale {
            start = k;
        }
        let mut v = vectors.col(k);
        for j in start..k {
            let prev = vectors.col(j);
            let dot: f64 = prev.iter().zip(&v).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(&prev).for_each(|(x, p)| *x -= dot * p);
        }
        unit(&mut v);
        for (i, x) in v.into_iter().enumerate() {
            vectors[(i, k)] = x;
        }
    }
    fix_signs(&mut vectors);
    Spectrum::new(values, vectors)
}

/// `(Vᴸ)ᵀX` with `Vᴸ` the leading `d_keep` eigenvectors.
pub fn pca_project(spec: &Spectrum, d_keep: usize, x_centered: &DenseMatrix) -> Result<DenseMatrix> {
    let n = spec.len();
    if d_keep == 0 || d_keep > n {
        return Err(Error::Parameter(format!("keep {d_keep} of {n} components")));
    }
    if x_centered.rows() != n {
        return dim_err(format!("{n} eigenvectors for {} data rows", x_centered.rows()));
    }
    let v = spec.eigenvectors();
    let vl_t = DenseMatrix::from_rows(&(0..d_keep).map(|j| v.col(j)).collect::<Vec<_>>())?;
    vl_t.matmul(x_centered)
}
