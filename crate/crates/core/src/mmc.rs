//! Outsourced matrix multiplication `Z = X·Y`.
//!
//! Client: `X' = M₁XM₂⁻¹`, `Y' = M₂YM₃⁻¹`. Server: `Z' = X'Y'`.
//! Client: `Z = M₁⁻¹Z'M₃`, then a Freivalds check of `Z` against `X`, `Y`.
//! The permutation-only baseline uses `P₁, P₂, P₃` in place of the `Mᵢ`.

use crate::error::{dim_err, Error, Result};
use crate::fastmul::{apply_perm, apply_perm_in_place, apply_secret, apply_secret_in_place, Side};
use crate::keyforge::{LeiKey, MmcKey};
use crate::matcore::{DenseMatrix, Rng};
use crate::Verdict;

/// Relative residual threshold for the Freivalds check.
pub const TAU_VER: f64 = 1e-7;

/// The two ciphertexts sent to the server. Holds no key material.
#[derive(Clone, Debug, PartialEq)]
pub struct MmcTask {
    x_enc: DenseMatrix,
    y_enc: DenseMatrix,
}

impl MmcTask {
    pub fn new(x_enc: DenseMatrix, y_enc: DenseMatrix) -> Result<Self> {
        if x_enc.cols() != y_enc.rows() {
            return dim_err(format!(
                "task {}x{} by {}x{}",
                x_enc.rows(),
                x_enc.cols(),
                y_enc.rows(),
                y_enc.cols()
            ));
        }
        Ok(Self { x_enc, y_enc })
    }

    pub fn x_enc(&self) -> &DenseMatrix {
        &self.x_enc
    }

    pub fn y_enc(&self) -> &DenseMatrix {
        &self.y_enc
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MmcResult {
    pub z_enc: DenseMatrix,
}

fn check_inputs(dims: (usize, usize, usize), x: &DenseMatrix, y: &DenseMatrix) -> Result<()> {
    let (m, n, s) = dims;
    if x.shape() != (m, n) || y.shape() != (n, s) {
        return dim_err(format!(
            "key for ({m},{n},{s}) with X {}x{} and Y {}x{}",
            x.rows(),
            x.cols(),
            y.rows(),
            y.cols()
        ));
    }
    Ok(())
}

pub fn mmc_encrypt(key: &MmcKey, x: &DenseMatrix, y: &DenseMatrix) -> Result<MmcTask> {
    check_inputs(key.dims(), x, y)?;
    let mut x_enc = apply_secret(&key.m1, x, Side::Left, false)?;
    apply_secret_in_place(&key.m2, &mut x_enc, Side::Right, true)?;
    let mut y_enc = apply_secret(&key.m2, y, Side::Left, false)?;
    apply_secret_in_place(&key.m3, &mut y_enc, Side::Right, true)?;
    MmcTask::new(x_enc, y_enc)
}

/// Server side: multiplies the ciphertexts. Takes no key.
pub fn cloud_mmc(task: &MmcTask) -> Result<MmcResult> {
    Ok(MmcResult {
        z_enc: task.x_enc.matmul(&task.y_enc)?,
    })
}

pub fn mmc_decrypt(key: &MmcKey, res: &MmcResult) -> Result<DenseMatrix> {
    let (m, _, s) = key.dims();
    if res.z_enc.shape() != (m, s) {
        return dim_err(format!("result {}x{} for key ({m},·,{s})", res.z_enc.rows(), res.z_enc.cols()));
    }
    let mut z = apply_secret(&key.m1, &res.z_enc, Side::Left, true)?;
    apply_secret_in_place(&key.m3, &mut z, Side::Right, false)?;
    Ok(z)
}

pub fn lei_encrypt(key: &LeiKey, x: &DenseMatrix, y: &DenseMatrix) -> Result<MmcTask> {
    check_inputs(key.dims(), x, y)?;
    let mut x_enc = apply_perm(&key.p1, x, Side::Left, false)?;
    apply_perm_in_place(&key.p2, &mut x_enc, Side::Right, true)?;
    let mut y_enc = apply_perm(&key.p2, y, Side::Left, false)?;
    apply_perm_in_place(&key.p3, &mut y_enc, Side::Right, true)?;
    MmcTask::new(x_enc, y_enc)
}

pub fn lei_decrypt(key: &LeiKey, res: &MmcResult) -> Result<DenseMatrix> {
    let (m, _, s) = key.dims();
    if res.z_enc.shape() != (m, s) {
        return dim_err(format!("result {}x{} for key ({m},·,{s})", res.z_enc.rows(), res.z_enc.cols()));
    }
    let mut z = apply_perm(&key.p1, &res.z_enc, Side::Left, true)?;
    apply_perm_in_place(&key.p3, &mut z, Side::Right, false)?;
    Ok(z)
}

/// Freivalds check of `Z = X·Y` with `loops` independent 0/1 vectors.
///
/// Each round computes `X(Yr) − Zr` and fails if its largest entry exceeds
/// `TAU_VER · ‖X‖∞ · ‖Y‖∞ · n`. A wrong `Z` survives one round with
/// probability at most 1/2.
pub fn mmc_verify(x: &DenseMatrix, y: &DenseMatrix, z: &DenseMatrix, loops: usize, rng: &mut Rng) -> Result<Verdict> {
    if loops == 0 {
        return Err(Error::Parameter("verification needs at least one loop".into()));
    }
    if x.cols() != y.rows() || z.shape() != (x.rows(), y.cols()) {
        return dim_err(format!(
            "verify X {}x{}, Y {}x{}, Z {}x{}",
            x.rows(),
            x.cols(),
            y.rows(),
            y.cols(),
            z.rows(),
            z.cols()
        ));
    }
    let threshold = TAU_VER * x.norm_max() * y.norm_max() * x.cols() as f64;
    // all rounds at once: column l of `r` is round l's vector
    let mut r = DenseMatrix::zeros(y.cols(), loops)?;
    for l in 0..loops {
        for j in 0..y.cols() {
            r[(j, l)] = if rng.bit() { 1.0 } else { 0.0 };
        }
    }
    let xyr = x.matmul(&y.matmul(&r)?)?;
    let zr = z.matmul(&r)?;
    let mut worst = vec![0.0f64; loops];
    for (a, b) in xyr.data().chunks(loops).zip(zr.data().chunks(loops)) {
        for ((w, p), q) in worst.iter_mut().zip(a).zip(b) {
            let d = (p - q).abs();
            *w = if d.is_nan() { f64::INFINITY } else { w.max(d) };
        }
    }
    Ok(if worst.iter().all(|w| *w <= threshold) {
        Verdict::Accept
    } else {
        Verdict::Reject
    })
}
