//! Security experiments: the zero-element distinguishing game against both
//! schemes, and result tampering for the verifier experiments.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::fastmul::{apply_perm, apply_secret, Side};
use crate::keyforge::{keygen_secret, ScaledPermutation};
use crate::matcore::{DenseMatrix, Rng};

/// Entries with `|v| ≤ TAU_ZERO·‖T‖∞` count as zero.
pub const TAU_ZERO: f64 = 1e-12;
/// Fraction of zero entries in the adversary's sparse challenge matrix.
pub const SPARSE_FRACTION: f64 = 0.3;
/// Key magnitude parameter used for the game's fresh keys.
pub const GAME_KAPPA: u32 = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scheme {
    /// Permutation-only baseline `P₁XP₂⁻¹`.
    Lei,
    /// `M₁XM₂⁻¹` with `M = P + H`.
    Proposed,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Lei => "lei",
            Scheme::Proposed => "proposed",
        })
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lei" => Ok(Scheme::Lei),
            "proposed" => Ok(Scheme::Proposed),
            other => Err(Error::Parameter(format!("unknown scheme {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ZeaTrialReport {
    pub scheme: Scheme,
    pub rows: usize,
    pub cols: usize,
    pub trials: usize,
    pub wins: usize,
    pub advantage: f64,
}

impl fmt::Display for ZeaTrialReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "scheme={} dims={}x{} trials={} wins={} advantage={:.4}",
            self.scheme, self.rows, self.cols, self.trials, self.wins, self.advantage
        )
    }
}

/// Number of entries with `|v| ≤ tau·‖t‖∞`; for the zero matrix the
/// threshold is the absolute `tau`.
pub fn zero_count(t: &DenseMatrix, tau: f64) -> usize {
    let scale = t.norm_max();
    let threshold = if scale == 0.0 { tau } else { tau * scale };
    t.data().iter().filter(|v| v.abs() <= threshold).count()
}

/// Encrypts a single `rows×cols` matrix under a fresh key of `scheme`.
pub fn encrypt_one(scheme: Scheme, t: &DenseMatrix, rng: &mut Rng) -> Result<DenseMatrix> {
    let (m, n) = t.shape();
    match scheme {
        Scheme::Lei => {
            let p1 = ScaledPermutation::random(m, GAME_KAPPA, rng)?;
            let p2 = ScaledPermutation::random(n, GAME_KAPPA, rng)?;
            apply_perm(&p2, &apply_perm(&p1, t, Side::Left, false)?, Side::Right, true)
        }
        Scheme::Proposed => {
            let m1 = keygen_secret(m, GAME_KAPPA, rng)?;
            let m2 = keygen_secret(n, GAME_KAPPA, rng)?;
            apply_secret(&m2, &apply_secret(&m1, t, Side::Left, false)?, Side::Right, true)
        }
    }
}

fn dense_entry(rng: &mut Rng) -> f64 {
    rng.sign() * rng.uniform_range(1.0, 2.0)
}

/// The adversary's pair: `T₀` with a fixed share of zeros, `T₁` fully dense.
pub fn challenge_pair(rows: usize, cols: usize, rng: &mut Rng) -> Result<(DenseMatrix, DenseMatrix)> {
    let total = rows * cols;
    let zeros = ((SPARSE_FRACTION * total as f64).round() as usize).clamp(1, total);
    let mut t0 = DenseMatrix::new(rows, cols, (0..total).map(|_| dense_entry(rng)).collect())?;
    let mut idx: Vec<usize> = (0..total).collect();
    for k in 0..zeros {
        let j = k + rng.below(total - k);
        idx.swap(k, j);
        t0[(idx[k] / cols, idx[k] % cols)] = 0.0;
    }
    let t1 = DenseMatrix::new(rows, cols, (0..total).map(|_| dense_entry(rng)).collect())?;
    Ok((t0, t1))
}

/// Runs the zero-element distinguishing game.
///
/// Each trial draws the challenge pair, a uniform bit `b`, and a fresh key,
/// then hands `Enc(T_b)` to an adversary that guesses `b' = 0` exactly when
/// the ciphertext contains a zero. Trial `t` uses `rng.split(t)` so the
/// report depends only on the generator's seed.
pub fn ind_zea_game(scheme: Scheme, rows: usize, cols: usize, trials: usize, rng: &Rng) -> Result<ZeaTrialReport> {
    if trials == 0 {
        return Err(Error::Parameter("game needs at least one trial".into()));
    }
    let mut wins = 0;
    for t in 0..trials {
        let mut trial_rng = rng.split(t as u64);
        let (t0, t1) = challenge_pair(rows, cols, &mut trial_rng)?;
        let b = trial_rng.bit() as usize;
        let challenge = if b == 0 { &t0 } else { &t1 };
        let ct = encrypt_one(scheme, challenge, &mut trial_rng)?;
        let guess = if zero_count(&ct, TAU_ZERO) >= 1 { 0 } else { 1 };
        if guess == b {
            wins += 1;
        }
    }
    let advantage = (wins as f64 / trials as f64 - 0.5).abs();
    Ok(ZeaTrialReport {
        scheme,
        rows,
        cols,
        trials,
        wins,
        advantage,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TamperMode {
    /// One random entry shifted by `magnitude·‖T‖∞`.
    SingleEntry,
    /// Every entry of one random row shifted by `±magnitude·‖T‖∞`.
    Row,
    /// All entries multiplied by `1 + magnitude`.
    Scale,
}

impl FromStr for TamperMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "single-entry" => Ok(TamperMode::SingleEntry),
            "row" => Ok(TamperMode::Row),
            "scale" => Ok(TamperMode::Scale),
            other => Err(Error::Parameter(format!("unknown tamper mode {other:?}"))),
        }
    }
}

fn shifted(v: f64, delta: f64) -> f64 {
    let out = v + delta;
    if out != v {
        out
    } else {
        // delta below half an ulp of v
        let bump = v.abs().max(f64::MIN_POSITIVE) * f64::EPSILON * 2.0;
        v + bump.copysign(delta)
    }
}

/// Returns a corrupted copy of `t`; the copy always differs from `t`.
pub fn tamper(t: &DenseMatrix, mode: TamperMode, magnitude: f64, rng: &mut Rng) -> Result<DenseMatrix> {
    if !(magnitude > 0.0 && magnitude.is_finite()) {
        return Err(Error::Parameter(format!("tamper magnitude {magnitude}")));
    }
    let scale = t.norm_max();
    let unit = if scale == 0.0 { 1.0 } else { scale };
    let mut out = t.clone();
    let mode = if mode == TamperMode::Scale && scale == 0.0 {
        TamperMode::SingleEntry
    } else {
        mode
    };
    match mode {
        TamperMode::SingleEntry => {
            let (i, j) = (rng.below(t.rows()), rng.below(t.cols()));
            out[(i, j)] = shifted(t[(i, j)], rng.sign() * magnitude * unit);
        }
        TamperMode::Row => {
            let i = rng.below(t.rows());
            for v in out.row_mut(i) {
                *v = shifted(*v, rng.sign() * magnitude * unit);
            }
        }
        TamperMode::Scale => {
            out = t.scale(1.0 + magnitude);
            if out == *t {
                let (i, j) = (rng.below(t.rows()), rng.below(t.cols()));
                out[(i, j)] = shifted(t[(i, j)], magnitude * unit);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::keyforge::keygen_mmc;
    use crate::matcore::mat_mul_naive;
    use crate::mmc::{lei_encrypt, mmc_encrypt, mmc_verify};
    use crate::Verdict;

    fn example_x() -> DenseMatrix {
        DenseMatrix::from_rows(&[vec![1.0, 0.0, 2.0], vec![0.0, 3.0, 4.0]]).unwrap()
    }

    #[test]
    fn counts_example_zeros() {
        assert_eq!(zero_count(&example_x(), TAU_ZERO), 2);
        assert_eq!(zero_count(&DenseMatrix::zeros(2, 2).unwrap(), TAU_ZERO), 4);
    }

    #[test]
    fn lei_keeps_and_proposed_destroys_zeros() {
        let key = crate::mmc::tests::worked_lei_key();
        let y = DenseMatrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        assert_eq!(zero_count(lei_encrypt(&key, &example_x(), &y).unwrap().x_enc(), TAU_ZERO), 2);
        let mut rng = Rng::new(1);
        for _ in 0..100 {
            let key = keygen_mmc(2, 3, 2, 16, &mut rng).unwrap();
            let task = mmc_encrypt(&key, &example_x(), &y).unwrap();
            assert_eq!(zero_count(task.x_enc(), TAU_ZERO), 0);
        }
    }

    #[test]
    fn challenge_pair_shape() {
        let (t0, t1) = challenge_pair(10, 10, &mut Rng::new(2)).unwrap();
        assert_eq!(zero_count(&t0, TAU_ZERO), 30);
        assert_eq!(zero_count(&t1, TAU_ZERO), 0);
    }

    #[test]
    fn game_separates_schemes() {
        let rng = Rng::new(3);
        let lei = ind_zea_game(Scheme::Lei, 8, 8, 100, &rng).unwrap();
        assert_eq!(lei.wins, 100);
        assert_eq!(lei.advantage, 0.5);
        let ours = ind_zea_game(Scheme::Proposed, 8, 8, 100, &rng).unwrap();
        assert!(ours.advantage <= 0.15, "{ours}");
    }

    #[test]
    fn single_trial_advantage_is_half_or_zero() {
        for seed in 0..10 {
            let r = ind_zea_game(Scheme::Proposed, 4, 4, 1, &Rng::new(seed)).unwrap();
            assert_eq!(r.advantage, 0.5);
        }
        assert!(ind_zea_game(Scheme::Lei, 4, 4, 0, &Rng::new(0)).is_err());
    }

    #[test]
    fn game_is_deterministic() {
        let a = ind_zea_game(Scheme::Proposed, 6, 5, 50, &Rng::new(9)).unwrap();
        let b = ind_zea_game(Scheme::Proposed, 6, 5, 50, &Rng::new(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn tamper_modes() {
        let mut rng = Rng::new(4);
        let t = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let one = tamper(&t, TamperMode::SingleEntry, 0.01, &mut rng).unwrap();
        let diffs = one.data().iter().zip(t.data()).filter(|(a, b)| a != b).count();
        assert_eq!(diffs, 1);
        let scaled = tamper(&t, TamperMode::Scale, 0.25, &mut rng).unwrap();
        assert!((scaled.norm_fro() / t.norm_fro() - 1.25).abs() < 1e-15);
        let row = tamper(&t, TamperMode::Row, 0.1, &mut rng).unwrap();
        assert_ne!(row, t);
        let tiny = tamper(&t, TamperMode::SingleEntry, 1e-30, &mut rng).unwrap();
        assert_ne!(tiny, t);
        let z = DenseMatrix::zeros(2, 2).unwrap();
        assert_ne!(tamper(&z, TamperMode::Scale, 0.1, &mut rng).unwrap(), z);
        assert!(tamper(&t, TamperMode::Row, 0.0, &mut rng).is_err());
    }

    #[test]
    fn tampered_products_rejected() {
        let mut rng = Rng::new(5);
        let x = DenseMatrix::random(10, 12, -1.0, 1.0, &mut rng).unwrap();
        let y = DenseMatrix::random(12, 8, -1.0, 1.0, &mut rng).unwrap();
        let z = mat_mul_naive(&x, &y).unwrap();
        for _ in 0..200 {
            let bad = tamper(&z, TamperMode::SingleEntry, 1e-3, &mut rng).unwrap();
            assert_eq!(mmc_verify(&x, &y, &bad, 20, &mut rng).unwrap(), Verdict::Reject);
        }
    }
}
