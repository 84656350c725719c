//! Structured multiplication by `P`, `P⁻¹`, `H`, `M` and `M⁻¹` on either
//! side of a dense matrix, in time linear in the size of the dense operand.
//! Keys are never materialized.
//!
//! Index conventions, for `P(i,j) = pᵢ·δ(π(i), j)`:
//!
//! ```text
//! (P·T)(i,j)   = pᵢ · t(π(i), j)
//! (P⁻¹·T)(i,j) = t(π⁻¹(i), j) / p_{π⁻¹(i)}
//! (T·P)(i,j)   = t(i, π⁻¹(j)) · p_{π⁻¹(j)}
//! (T·P⁻¹)(i,j) = t(i, π(j)) / pⱼ
//! ```

use std::cell::Cell;

use crate::error::{dim_err, Error, Result};
use crate::keyforge::{eps_inv, RankOnePerturbation, ScaledPermutation, SecretMatrix};
use crate::matcore::DenseMatrix;

/// Which side of the dense operand the key multiplies from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    /// `K·T`
    Left,
    /// `T·K`
    Right,
}

thread_local! {
    static MULS: Cell<u64> = const { Cell::new(0) };
}

fn tally(n: usize) {
    MULS.with(|c| c.set(c.get() + n as u64));
}

/// Scalar multiplications and divisions performed by the kernels on this
/// thread since the last [`reset_mul_count`].
pub fn mul_count() -> u64 {
    MULS.with(Cell::get)
}

pub fn reset_mul_count() {
    MULS.with(|c| c.set(0));
}

fn contracted(t: &DenseMatrix, side: Side) -> usize {
    match side {
        Side::Left => t.rows(),
        Side::Right => t.cols(),
    }
}

fn check(key_len: usize, t: &DenseMatrix, side: Side, what: &str) -> Result<()> {
    if key_len != contracted(t, side) {
        return dim_err(format!(
            "{what} of size {key_len} on the {side:?} of a {}x{} matrix",
            t.rows(),
            t.cols()
        ));
    }
    Ok(())
}

/// Rearranges rows so that new row `i` is old row `src(i)`, following the
/// cycles of the permutation with a single scratch row.
fn gather_rows(t: &mut DenseMatrix, src: impl Fn(usize) -> usize) {
    let (rows, cols) = t.shape();
    let mut done = vec![false; rows];
    let mut scratch = vec![0.0; cols];
    let data = t.data_mut();
    for start in 0..rows {
        if done[start] || src(start) == start {
            done[start] = true;
            continue;
        }
        scratch.copy_from_slice(&data[start * cols..(start + 1) * cols]);
        let mut i = start;
        loop {
            done[i] = true;
            let j = src(i);
            if j == start {
                data[i * cols..(i + 1) * cols].copy_from_slice(&scratch);
                break;
            }
            data.copy_within(j * cols..(j + 1) * cols, i * cols);
            i = j;
        }
    }
}

/// Multiplies `t` by `P` or `P⁻¹` in place.
pub fn apply_perm_in_place(p: &ScaledPermutation, t: &mut DenseMatrix, side: Side, inverse: bool) -> Result<()> {
    check(p.len(), t, side, "P")?;
    let perm = p.perm();
    let scale = p.scale();
    let (rows, cols) = t.shape();
    match (side, inverse) {
        (Side::Left, false) => {
            gather_rows(t, |i| perm.apply(i));
            for (i, &s) in scale.iter().enumerate() {
                t.row_mut(i).iter_mut().for_each(|v| *v *= s);
            }
        }
        (Side::Left, true) => {
            for (k, &s) in scale.iter().enumerate() {
                t.row_mut(k).iter_mut().for_each(|v| *v /= s);
            }
            gather_rows(t, |i| perm.apply_inv(i));
        }
        (Side::Right, false) => {
            let mut scratch = vec![0.0; cols];
            for i in 0..rows {
                let row = t.row_mut(i);
                scratch.copy_from_slice(row);
                for (j, o) in row.iter_mut().enumerate() {
                    let k = perm.apply_inv(j);
                    *o = scratch[k] * scale[k];
                }
            }
        }
        (Side::Right, true) => {
            let mut scratch = vec![0.0; cols];
            for i in 0..rows {
                let row = t.row_mut(i);
                scratch.copy_from_slice(row);
                for (j, o) in row.iter_mut().enumerate() {
                    *o = scratch[perm.apply(j)] / scale[j];
                }
            }
        }
    }
    tally(rows * cols);
    Ok(())
}

/// Multiplies `t` by `P` or `P⁻¹`.
pub fn apply_perm(p: &ScaledPermutation, t: &DenseMatrix, side: Side, inverse: bool) -> Result<DenseMatrix> {
    let mut out = t.clone();
    apply_perm_in_place(p, &mut out, side, inverse)?;
    Ok(out)
}

/// Multiplies `t` by `H = h·1ᵀ`.
///
/// Left: `H·T = h·(1ᵀT)`, the column-sum row replicated and scaled by `hᵢ`.
/// Right: `T·H = (T·h)·1ᵀ`, each row filled with its dot product with `h`.
pub fn apply_rank_one(h: &RankOnePerturbation, t: &DenseMatrix, side: Side) -> Result<DenseMatrix> {
    check(h.len(), t, side, "H")?;
    let hv = h.values();
    let (rows, cols) = t.shape();
    let mut out = DenseMatrix::zeros(rows, cols)?;
    match side {
        Side::Left => {
            let sums = t.col_sums();
            for (i, &hi) in hv.iter().enumerate() {
                for (o, s) in out.row_mut(i).iter_mut().zip(&sums) {
                    *o = hi * s;
                }
            }
            tally(rows * cols);
        }
        Side::Right => {
            let th = t.mul_vec(hv)?;
            for (i, v) in th.into_iter().enumerate() {
                out.row_mut(i).fill(v);
            }
            tally(rows * cols);
        }
    }
    Ok(out)
}

/// `out += a·bᵀ`.
fn add_outer(out: &mut DenseMatrix, a: &[f64], b: &[f64]) {
    for (i, &ai) in a.iter().enumerate() {
        for (o, bj) in out.row_mut(i).iter_mut().zip(b) {
            *o += ai * bj;
        }
    }
    tally(a.len() * b.len());
}

/// Multiplies `t` by `M = P + H` or by `M⁻¹` in place.
///
/// ```text
/// M·T    = P·T + h·(1ᵀT)
/// T·M    = T·P + (T·h)·1ᵀ
/// M⁻¹·T  = U − (P⁻¹h)·(1ᵀU) / d,      U = P⁻¹T
/// T·M⁻¹  = V − (V·h)·(1ᵀP⁻¹) / d,     V = TP⁻¹
/// ```
///
/// with `d = 1 + tr(HP⁻¹)` taken from the key's cached trace sum. Every
/// path is one permutation pass, one reduction and one rank-one update.
pub fn apply_secret_in_place(m: &SecretMatrix, t: &mut DenseMatrix, side: Side, inverse: bool) -> Result<()> {
    check(m.len(), t, side, "M")?;
    if inverse {
        let threshold = eps_inv(m.trace_sum());
        if !(m.margin() > threshold) {
            return Err(Error::IllConditionedKey {
                margin: m.margin(),
                threshold,
            });
        }
    }
    let p = m.p();
    let h = m.h().values();
    let cells = t.data().len();
    match (side, inverse) {
        (Side::Left, false) => {
            let sums = t.col_sums();
            apply_perm_in_place(p, t, side, false)?;
            add_outer(t, h, &sums);
        }
        (Side::Right, false) => {
            let th = t.mul_vec(h)?;
            tally(cells);
            apply_perm_in_place(p, t, side, false)?;
            for (i, v) in th.into_iter().enumerate() {
                t.row_mut(i).iter_mut().for_each(|o| *o += v);
            }
        }
        (Side::Left, true) => {
            apply_perm_in_place(p, t, side, true)?;
            let d = m.denominator();
            let u: Vec<f64> = (0..p.len())
                .map(|i| {
                    let k = p.perm().apply_inv(i);
                    -(h[k] / p.scale()[k]) / d
                })
                .collect();
            let sums = t.col_sums();
            add_outer(t, &u, &sums);
        }
        (Side::Right, true) => {
            apply_perm_in_place(p, t, side, true)?;
            let d = m.denominator();
            let vh: Vec<f64> = t.mul_vec(h)?.into_iter().map(|v| -v / d).collect();
            tally(cells);
            let inv_p: Vec<f64> = p.scale().iter().map(|s| 1.0 / s).collect();
            add_outer(t, &vh, &inv_p);
        }
    }
    Ok(())
}

/// Multiplies `t` by `M = P + H` or by `M⁻¹`; see [`apply_secret_in_place`].
pub fn apply_secret(m: &SecretMatrix, t: &DenseMatrix, side: Side, inverse: bool) -> Result<DenseMatrix> {
    let mut out = t.clone();
    apply_secret_in_place(m, &mut out, side, inverse)?;
    Ok(out)
}

/// `M·v` or `M⁻¹·v` for a column vector.
pub fn apply_secret_vec(m: &SecretMatrix, v: &[f64], inverse: bool) -> Result<Vec<f64>> {
    let col = DenseMatrix::column(v)?;
    Ok(apply_secret(m, &col, Side::Left, inverse)?.into_data())
}

impl ScaledPermutation {
    /// `Pᵀ`, itself a scaled permutation: `Pᵀ(j,i) = pᵢ` where `j = π(i)`.
    pub fn transpose(&self) -> ScaledPermutation {
        let perm = self.perm();
        let scale = (0..self.len()).map(|j| self.scale()[perm.apply_inv(j)]).collect();
        let inv = crate::matcore::Permutation::from_forward(perm.inverse().to_vec())
            .expect("inverse of a bijection");
        ScaledPermutation::new(inv, scale).expect("nonzero scales")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::keyforge::tests::{toy_p, toy_secret};
    use crate::keyforge::{keygen_secret, RankOnePerturbation};
    use crate::matcore::{mat_mul_naive, Permutation, Rng};
    use crate::oracle;

    fn frac(a: f64, b: f64) -> f64 {
        a / b
    }

    fn product(k: &DenseMatrix, t: &DenseMatrix, side: Side) -> DenseMatrix {
        match side {
            Side::Left => mat_mul_naive(k, t).unwrap(),
            Side::Right => mat_mul_naive(t, k).unwrap(),
        }
    }

    fn operand(n: usize, other: usize, side: Side, rng: &mut Rng) -> DenseMatrix {
        match side {
            Side::Left => DenseMatrix::random(n, other, -10.0, 10.0, rng).unwrap(),
            Side::Right => DenseMatrix::random(other, n, -10.0, 10.0, rng).unwrap(),
        }
    }

    #[test]
    fn worked_lei_ciphertext() {
        let p1 = ScaledPermutation::new(Permutation::from_forward(vec![1, 0]).unwrap(), vec![1.0, 2.0]).unwrap();
        let p2 = ScaledPermutation::new(Permutation::from_forward(vec![2, 0, 1]).unwrap(), vec![3.0, 4.0, 5.0])
            .unwrap();
        let x = DenseMatrix::from_rows(&[vec![1.0, 0.0, 2.0], vec![0.0, 3.0, 4.0]]).unwrap();
        let p1x = apply_perm(&p1, &x, Side::Left, false).unwrap();
        assert_eq!(p1x, DenseMatrix::from_rows(&[vec![0.0, 3.0, 4.0], vec![2.0, 0.0, 4.0]]).unwrap());
        let xe = apply_perm(&p2, &p1x, Side::Right, true).unwrap();
        let expected = DenseMatrix::from_rows(&[
            vec![frac(4.0, 3.0), 0.0, frac(3.0, 5.0)],
            vec![frac(4.0, 3.0), frac(1.0, 2.0), 0.0],
        ])
        .unwrap();
        assert!(xe.sub(&expected).unwrap().norm_max() <= 1e-12);
    }

    #[test]
    fn identity_perm_is_noop() {
        let id = ScaledPermutation::identity(4).unwrap();
        let t = DenseMatrix::random(4, 4, -1.0, 1.0, &mut Rng::new(1)).unwrap();
        for side in [Side::Left, Side::Right] {
            for inv in [false, true] {
                assert_eq!(apply_perm(&id, &t, side, inv).unwrap(), t);
            }
        }
    }

    #[test]
    fn perm_then_inverse_restores() {
        let mut rng = Rng::new(2);
        let p = ScaledPermutation::random(9, 20, &mut rng).unwrap();
        for side in [Side::Left, Side::Right] {
            let t = operand(9, 5, side, &mut rng);
            let back = apply_perm(&p, &apply_perm(&p, &t, side, false).unwrap(), side, true).unwrap();
            assert!(back.rel_fro_err(&t) <= 1e-12);
        }
    }

    #[test]
    fn rank_one_examples() {
        let h = RankOnePerturbation::new(vec![1.0, 1.0]).unwrap();
        let t = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(
            apply_rank_one(&h, &t, Side::Left).unwrap(),
            DenseMatrix::from_rows(&[vec![4.0, 6.0], vec![4.0, 6.0]]).unwrap()
        );
        assert_eq!(
            apply_rank_one(&h, &t, Side::Right).unwrap(),
            DenseMatrix::from_rows(&[vec![3.0, 3.0], vec![7.0, 7.0]]).unwrap()
        );
    }

    #[test]
    fn toy_secret_dense_form() {
        let m = toy_secret();
        let i3 = DenseMatrix::identity(3).unwrap();
        assert_eq!(
            apply_secret(&m, &i3, Side::Left, false).unwrap(),
            DenseMatrix::from_rows(&[vec![4.0, 4.0, 5.0], vec![5.0, 7.0, 5.0], vec![9.0, 6.0, 6.0]]).unwrap()
        );
    }

    #[test]
    fn inverse_undoes_forward() {
        let mut rng = Rng::new(3);
        for n in [1, 2, 5, 17, 64] {
            let m = keygen_secret(n, 16, &mut rng).unwrap();
            for side in [Side::Left, Side::Right] {
                let t = operand(n, 7, side, &mut rng);
                let mt = apply_secret(&m, &t, side, false).unwrap();
                let back = apply_secret(&m, &mt, side, true).unwrap();
                assert!(back.rel_fro_err(&t) <= 1e-9, "n={n} {side:?}");
            }
        }
    }

    #[test]
    fn inverse_matches_lu_inverse() {
        let mut rng = Rng::new(4);
        for n in [3, 10, 33] {
            let m = keygen_secret(n, 16, &mut rng).unwrap();
            let inv = oracle::inverse(&m.to_dense()).unwrap();
            let t = operand(n, 6, Side::Left, &mut rng);
            let fast = apply_secret(&m, &t, Side::Left, true).unwrap();
            assert!(fast.rel_fro_err(&mat_mul_naive(&inv, &t).unwrap()) <= 1e-8);
        }
    }

    #[test]
    fn all_eight_paths_match_dense() {
        let mut rng = Rng::new(5);
        for trial in 0..40 {
            let n = 1 + trial % 23;
            let m = keygen_secret(n, 12, &mut rng).unwrap();
            let dense_p = m.p().to_dense();
            let dense_pinv = m.p().inverse_dense();
            let dense_h = m.h().to_dense();
            let dense_m = m.to_dense();
            let dense_minv = oracle::inverse(&dense_m).unwrap();
            for side in [Side::Left, Side::Right] {
                let t = operand(n, 1 + trial % 7, side, &mut rng);
                let cases = [
                    (apply_perm(m.p(), &t, side, false).unwrap(), product(&dense_p, &t, side)),
                    (apply_perm(m.p(), &t, side, true).unwrap(), product(&dense_pinv, &t, side)),
                    (apply_rank_one(m.h(), &t, side).unwrap(), product(&dense_h, &t, side)),
                    (apply_secret(&m, &t, side, false).unwrap(), product(&dense_m, &t, side)),
                    (apply_secret(&m, &t, side, true).unwrap(), product(&dense_minv, &t, side)),
                ];
                for (k, (fast, slow)) in cases.iter().enumerate() {
                    assert!(fast.rel_fro_err(slow) <= 1e-9, "case {k} {side:?} n={n}");
                }
            }
        }
    }

    #[test]
    fn transpose_duality() {
        let mut rng = Rng::new(6);
        let m = keygen_secret(11, 16, &mut rng).unwrap();
        let t = DenseMatrix::random(11, 4, -5.0, 5.0, &mut rng).unwrap();
        let pt = m.p().transpose();
        assert_eq!(pt.to_dense(), m.p().to_dense().transpose());
        for inv in [false, true] {
            let right = apply_perm(m.p(), &t.transpose(), Side::Right, inv).unwrap().transpose();
            let left = apply_perm(&pt, &t, Side::Left, inv).unwrap();
            assert!(right.rel_fro_err(&left) <= 1e-12);
        }
        let mt = m.to_dense().transpose();
        let right = apply_secret(&m, &t.transpose(), Side::Right, false).unwrap().transpose();
        assert!(right.rel_fro_err(&mat_mul_naive(&mt, &t).unwrap()) <= 1e-12);
    }

    #[test]
    fn multiplication_count_is_linear() {
        let mut rng = Rng::new(7);
        for n in [8, 32, 128] {
            let m = keygen_secret(n, 16, &mut rng).unwrap();
            let t = DenseMatrix::random(n, n, -1.0, 1.0, &mut rng).unwrap();
            for side in [Side::Left, Side::Right] {
                for inv in [false, true] {
                    reset_mul_count();
                    apply_secret(&m, &t, side, inv).unwrap();
                    let c = mul_count();
                    assert!(c <= 8 * (n * n) as u64, "n={n} count={c}");
                }
            }
        }
    }

    #[test]
    fn errors() {
        let m = toy_secret();
        let t = DenseMatrix::zeros(2, 3).unwrap();
        assert!(matches!(apply_secret(&m, &t, Side::Left, false), Err(Error::InvalidDimension(_))));
        assert!(apply_secret(&m, &t, Side::Right, true).is_ok());
        assert!(matches!(apply_perm(&toy_p(), &t, Side::Left, true), Err(Error::InvalidDimension(_))));
    }
}
