//! Secret key construction: scaled permutations `P`, rank-one perturbations
//! `H = h·1ᵀ`, their sum `M = P + H`, and the per-protocol key bundles.
//!
//! `M` is invertible exactly when every `pᵢ` and `hᵢ` is nonzero and
//! `1 + Σ hᵢ/pᵢ ≠ 0`; in that case `det(M) = ±Πpᵢ · (1 + Σ hᵢ/pᵢ)` and the
//! inverse has the closed form `P⁻¹ − P⁻¹HP⁻¹ / (1 + Σ hᵢ/pᵢ)`.

use std::fmt::Write as _;

use crate::error::{dim_err, Error, ParseError, Result};
use crate::matcore::io::format_f64;
use crate::matcore::{gen_permutation, DenseMatrix, Permutation, Rng};

pub const KAPPA_MIN: u32 = 8;
pub const KAPPA_MAX: u32 = 52;
/// Consecutive rejected `h` draws before key generation gives up.
pub const MAX_RESAMPLES: usize = 64;
/// Relative invertibility threshold: a key needs `|1 + Σ| > 1e-6·(1 + |Σ|)`.
pub const EPS_INV_REL: f64 = 1e-6;

/// Margin floor applied by key generation on top of [`eps_inv`]. Keys with
/// `|1 + Σ|` below one inflate the condition number of `M` roughly as
/// `n²/|1 + Σ|`, which the protocols' rounding error then inherits.
pub const KEYGEN_MARGIN: f64 = 1.0;

pub fn eps_inv(trace_sum: f64) -> f64 {
    EPS_INV_REL * (1.0 + trace_sum.abs())
}

/// Random nonzero scalar with `|v|` uniform in `[2^(κ−1), 2^κ)` and a random
/// sign.
pub fn sample_nonzero(kappa: u32, rng: &mut Rng) -> Result<f64> {
    if !(KAPPA_MIN..=KAPPA_MAX).contains(&kappa) {
        return Err(Error::Parameter(format!(
            "kappa {kappa} outside [{KAPPA_MIN}, {KAPPA_MAX}]"
        )));
    }
    let lo = (1u64 << (kappa - 1)) as f64;
    let mag = lo + lo * rng.uniform();
    Ok(rng.sign() * mag)
}

fn sample_vec(n: usize, kappa: u32, rng: &mut Rng) -> Result<Vec<f64>> {
    (0..n).map(|_| sample_nonzero(kappa, rng)).collect()
}

fn check_nonzero(values: &[f64], what: &str) -> Result<()> {
    match values.iter().position(|v| *v == 0.0 || !v.is_finite()) {
        None => Ok(()),
        Some(i) => Err(Error::InvalidKey(format!("{what}[{i}] = {} is not a nonzero finite value", values[i]))),
    }
}

/// `P(i,j) = pᵢ·δ(π(i), j)`: one nonzero per row and column.
#[derive(Clone, Debug, PartialEq)]
pub struct ScaledPermutation {
    perm: Permutation,
    scale: Vec<f64>,
}

impl ScaledPermutation {
    pub fn new(perm: Permutation, scale: Vec<f64>) -> Result<Self> {
        if perm.len() != scale.len() {
            return dim_err(format!(
                "permutation of size {} with {} scales",
                perm.len(),
                scale.len()
            ));
        }
        check_nonzero(&scale, "scale")?;
        Ok(Self { perm, scale })
    }

    pub fn random(n: usize, kappa: u32, rng: &mut Rng) -> Result<Self> {
        let perm = gen_permutation(n, rng)?;
        let scale = sample_vec(n, kappa, rng)?;
        Self::new(perm, scale)
    }

    pub fn identity(n: usize) -> Result<Self> {
        Self::new(Permutation::identity(n)?, vec![1.0; n])
    }

    pub fn len(&self) -> usize {
        self.scale.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scale.is_empty()
    }

    pub fn perm(&self) -> &Permutation {
        &self.perm
    }

    pub fn scale(&self) -> &[f64] {
        &self.scale
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let n = self.len();
        let mut d = DenseMatrix::zeros(n, n).expect("n > 0");
        for i in 0..n {
            d[(i, self.perm.apply(i))] = self.scale[i];
        }
        d
    }

    pub fn inverse_dense(&self) -> DenseMatrix {
        let n = self.len();
        let mut d = DenseMatrix::zeros(n, n).expect("n > 0");
        for i in 0..n {
            d[(self.perm.apply(i), i)] = 1.0 / self.scale[i];
        }
        d
    }
}

/// `H = h·1ᵀ`: every column equals `h`.
#[derive(Clone, Debug, PartialEq)]
pub struct RankOnePerturbation {
    h: Vec<f64>,
}

impl RankOnePerturbation {
    pub fn new(h: Vec<f64>) -> Result<Self> {
        if h.is_empty() {
            return dim_err("empty perturbation");
        }
        check_nonzero(&h, "h")?;
        Ok(Self { h })
    }

    pub fn random(n: usize, kappa: u32, rng: &mut Rng) -> Result<Self> {
        Self::new(sample_vec(n, kappa, rng)?)
    }

    pub fn len(&self) -> usize {
        self.h.len()
    }

    pub fn is_empty(&self) -> bool {
        self.h.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.h
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let n = self.len();
        DenseMatrix::new(n, n, self.h.iter().flat_map(|&v| std::iter::repeat(v).take(n)).collect())
            .expect("n > 0")
    }

    /// All-zero perturbation, only for identity-key tests.
    #[cfg(test)]
    pub(crate) fn zero(n: usize) -> Self {
        Self { h: vec![0.0; n] }
    }
}

/// `|1 + Σ hᵢ/pᵢ|`; zero exactly when `P + H` is singular.
pub fn invertibility_margin(p: &ScaledPermutation, h: &RankOnePerturbation) -> Result<f64> {
    Ok((1.0 + trace_sum(p, h)?).abs())
}

/// `tr(H·P⁻¹) = Σ hᵢ/pᵢ` in O(n).
fn trace_sum(p: &ScaledPermutation, h: &RankOnePerturbation) -> Result<f64> {
    if p.len() != h.len() {
        return dim_err(format!("P of size {} with h of size {}", p.len(), h.len()));
    }
    check_nonzero(&p.scale, "p")?;
    check_nonzero(&h.h, "h")?;
    Ok(h.h.iter().zip(&p.scale).map(|(hi, pi)| hi / pi).sum())
}

/// The secret matrix `M = P + H` with its cached Sherman–Morrison
/// denominator.
#[derive(Clone, Debug, PartialEq)]
pub struct SecretMatrix {
    p: ScaledPermutation,
    h: RankOnePerturbation,
    trace_sum: f64,
    margin: f64,
}

impl SecretMatrix {
    /// Accepts `(P, h)` only if the invertibility margin clears
    /// [`eps_inv`].
    pub fn from_parts(p: ScaledPermutation, h: RankOnePerturbation) -> Result<Self> {
        let trace_sum = trace_sum(&p, &h)?;
        let margin = (1.0 + trace_sum).abs();
        let threshold = eps_inv(trace_sum);
        if !(margin > threshold) {
            return Err(Error::IllConditionedKey { margin, threshold });
        }
        Ok(Self {
            p,
            h,
            trace_sum,
            margin,
        })
    }

    /// `M = I` (scaled identity permutation, zero perturbation). Test builds
    /// only: production keys always carry a nonzero `h`.
    #[cfg(test)]
    pub(crate) fn identity(n: usize) -> Self {
        Self {
            p: ScaledPermutation::identity(n).unwrap(),
            h: RankOnePerturbation::zero(n),
            trace_sum: 0.0,
            margin: 1.0,
        }
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    pub fn p(&self) -> &ScaledPermutation {
        &self.p
    }

    pub fn h(&self) -> &RankOnePerturbation {
        &self.h
    }

    /// Cached `Σ hᵢ/pᵢ = tr(H·P⁻¹)`.
    pub fn trace_sum(&self) -> f64 {
        self.trace_sum
    }

    /// Cached `|1 + Σ hᵢ/pᵢ|`.
    pub fn margin(&self) -> f64 {
        self.margin
    }

    /// `1 + tr(H·P⁻¹)`, the Sherman–Morrison denominator.
    pub fn denominator(&self) -> f64 {
        1.0 + self.trace_sum
    }

    pub fn to_dense(&self) -> DenseMatrix {
        self.p.to_dense().add(&self.h.to_dense()).expect("matching sizes")
    }
}

/// Fresh `M = P + H` of size `n`; `h` is redrawn until the margin exceeds
/// both [`eps_inv`] and [`KEYGEN_MARGIN`].
pub fn keygen_secret(n: usize, kappa: u32, rng: &mut Rng) -> Result<SecretMatrix> {
    let p = ScaledPermutation::random(n, kappa, rng)?;
    for _ in 0..MAX_RESAMPLES {
        let h = RankOnePerturbation::random(n, kappa, rng)?;
        match SecretMatrix::from_parts(p.clone(), h) {
            Ok(m) if m.margin() >= KEYGEN_MARGIN => return Ok(m),
            Ok(_) => continue,
            Err(Error::IllConditionedKey { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::KeygenFailure(MAX_RESAMPLES))
}

/// Baseline permutation-only key `{P₁, P₂, P₃}`.
#[derive(Clone, Debug, PartialEq)]
pub struct LeiKey {
    pub p1: ScaledPermutation,
    pub p2: ScaledPermutation,
    pub p3: ScaledPermutation,
}

impl LeiKey {
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.p1.len(), self.p2.len(), self.p3.len())
    }
}

pub fn keygen_lei(m: usize, n: usize, s: usize, kappa: u32, rng: &mut Rng) -> Result<LeiKey> {
    Ok(LeiKey {
        p1: ScaledPermutation::random(m, kappa, rng)?,
        p2: ScaledPermutation::random(n, kappa, rng)?,
        p3: ScaledPermutation::random(s, kappa, rng)?,
    })
}

/// Matrix-multiplication key `{M₁, M₂, M₃}` for an `m×n · n×s` task.
#[derive(Clone, Debug, PartialEq)]
pub struct MmcKey {
    pub m1: SecretMatrix,
    pub m2: SecretMatrix,
    pub m3: SecretMatrix,
}

impl MmcKey {
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.m1.len(), self.m2.len(), self.m3.len())
    }
}

pub fn keygen_mmc(m: usize, n: usize, s: usize, kappa: u32, rng: &mut Rng) -> Result<MmcKey> {
    Ok(MmcKey {
        m1: keygen_secret(m, kappa, rng)?,
        m2: keygen_secret(n, kappa, rng)?,
        m3: keygen_secret(s, kappa, rng)?,
    })
}

/// Linear-regression key: `A = diag(signs·k)`, `M`, and the offset `R`.
#[derive(Clone, Debug, PartialEq)]
pub struct LrKey {
    k: f64,
    signs: Vec<f64>,
    m_key: SecretMatrix,
    r_vec: Vec<f64>,
}

impl LrKey {
    pub fn new(k: f64, signs: Vec<f64>, m_key: SecretMatrix, r_vec: Vec<f64>) -> Result<Self> {
        if !(k > 0.0 && k.is_finite()) {
            return Err(Error::InvalidKey(format!("k = {k} must be positive")));
        }
        if signs.is_empty() {
            return dim_err("empty sign vector");
        }
        if let Some(i) = signs.iter().position(|&s| s != 1.0 && s != -1.0) {
            return Err(Error::InvalidKey(format!("sign[{i}] = {} is not ±1", signs[i])));
        }
        if r_vec.len() != m_key.len() {
            return dim_err(format!("R of size {} for M of size {}", r_vec.len(), m_key.len()));
        }
        if r_vec.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidKey("non-finite R entry".into()));
        }
        Ok(Self {
            k,
            signs,
            m_key,
            r_vec,
        })
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn signs(&self) -> &[f64] {
        &self.signs
    }

    pub fn m_key(&self) -> &SecretMatrix {
        &self.m_key
    }

    pub fn r_vec(&self) -> &[f64] {
        &self.r_vec
    }

    /// Diagonal of `A`: `signᵢ·k`.
    pub fn a_diag(&self) -> Vec<f64> {
        self.signs.iter().map(|s| s * self.k).collect()
    }

    /// `(m, n)`
    pub fn dims(&self) -> (usize, usize) {
        (self.signs.len(), self.m_key.len())
    }
}

pub fn keygen_lr(m: usize, n: usize, kappa: u32, rng: &mut Rng) -> Result<LrKey> {
    if m == 0 || n == 0 {
        return dim_err(format!("LR key for {m}x{n}"));
    }
    let k = sample_nonzero(kappa, rng)?.abs();
    let signs = (0..m).map(|_| rng.sign()).collect();
    let m_key = keygen_secret(n, kappa, rng)?;
    let r_vec = sample_vec(n, kappa, rng)?;
    LrKey::new(k, signs, m_key, r_vec)
}

/// Eigendecomposition key: the affine mask `(α, s)` and similarity `M`.
#[derive(Clone, Debug, PartialEq)]
pub struct EvdKey {
    alpha: f64,
    s_shift: f64,
    m_key: SecretMatrix,
}

impl EvdKey {
    pub fn new(alpha: f64, s_shift: f64, m_key: SecretMatrix) -> Result<Self> {
        if alpha == 0.0 || !alpha.is_finite() || !s_shift.is_finite() {
            return Err(Error::InvalidKey(format!("alpha = {alpha}, s = {s_shift}")));
        }
        Ok(Self {
            alpha,
            s_shift,
            m_key,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn s_shift(&self) -> f64 {
        self.s_shift
    }

    pub fn m_key(&self) -> &SecretMatrix {
        &self.m_key
    }

    pub fn len(&self) -> usize {
        self.m_key.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m_key.is_empty()
    }
}

pub fn keygen_evd(n: usize, kappa: u32, rng: &mut Rng) -> Result<EvdKey> {
    let alpha = sample_nonzero(kappa, rng)?;
    let s_shift = sample_nonzero(kappa, rng)?;
    let m_key = keygen_secret(n, kappa, rng)?;
    EvdKey::new(alpha, s_shift, m_key)
}

/// Any protocol key, as stored in a key file.
#[derive(Clone, Debug, PartialEq)]
pub enum KeyBundle {
    Lei(LeiKey),
    Mmc(MmcKey),
    Lr(LrKey),
    Evd(EvdKey),
}

impl KeyBundle {
    pub fn kind(&self) -> &'static str {
        match self {
            KeyBundle::Lei(_) => "lei",
            KeyBundle::Mmc(_) => "mmc",
            KeyBundle::Lr(_) => "lr",
            KeyBundle::Evd(_) => "evd",
        }
    }

    /// Text key file.
    ///
    /// ```text
    /// <kind>
    /// dims <d1> [<d2> <d3>]
    /// perm <π(0)> ... ; scale <p0> ... ; [h <h0> ...]   (one line each, per factor)
    /// k <k> ; signs ... ; r ...                          (lr)
    /// alpha <α> ; shift <s>                              (evd)
    /// ```
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{}", self.kind());
        match self {
            KeyBundle::Lei(k) => {
                let (m, n, s) = k.dims();
                let _ = writeln!(out, "dims {m} {n} {s}");
                for p in [&k.p1, &k.p2, &k.p3] {
                    write_perm(&mut out, p);
                }
            }
            KeyBundle::Mmc(k) => {
                let (m, n, s) = k.dims();
                let _ = writeln!(out, "dims {m} {n} {s}");
                for sm in [&k.m1, &k.m2, &k.m3] {
                    write_secret(&mut out, sm);
                }
            }
            KeyBundle::Lr(k) => {
                let (m, n) = k.dims();
                let _ = writeln!(out, "dims {m} {n}");
                write_secret(&mut out, &k.m_key);
                write_values(&mut out, "k", &[k.k]);
                write_values(&mut out, "signs", &k.signs);
                write_values(&mut out, "r", &k.r_vec);
            }
            KeyBundle::Evd(k) => {
                let _ = writeln!(out, "dims {}", k.len());
                write_secret(&mut out, &k.m_key);
                write_values(&mut out, "alpha", &[k.alpha]);
                write_values(&mut out, "shift", &[k.s_shift]);
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = KeyLines::new(text);
        let kind = lines.next_line()?.trim().to_string();
        let dims: Vec<usize> = lines
            .field("dims")?
            .iter()
            .map(|t| t.parse().map_err(|_| bad(format!("dimension {t:?}"))))
            .collect::<Result<_>>()?;
        let expect_dims = |n: usize| -> Result<()> {
            if dims.len() == n {
                Ok(())
            } else {
                Err(bad(format!("{kind} key needs {n} dimensions, found {}", dims.len())))
            }
        };
        let bundle = match kind.as_str() {
            "lei" => {
                expect_dims(3)?;
                KeyBundle::Lei(LeiKey {
                    p1: lines.perm(dims[0])?,
                    p2: lines.perm(dims[1])?,
                    p3: lines.perm(dims[2])?,
                })
            }
            "mmc" => {
                expect_dims(3)?;
                KeyBundle::Mmc(MmcKey {
                    m1: lines.secret(dims[0])?,
                    m2: lines.secret(dims[1])?,
                    m3: lines.secret(dims[2])?,
                })
            }
            "lr" => {
                expect_dims(2)?;
                let m_key = lines.secret(dims[1])?;
                let k = lines.values("k", 1)?[0];
                let signs = lines.values("signs", dims[0])?;
                let r = lines.values("r", dims[1])?;
                KeyBundle::Lr(LrKey::new(k, signs, m_key, r)?)
            }
            "evd" => {
                expect_dims(1)?;
                let m_key = lines.secret(dims[0])?;
                let alpha = lines.values("alpha", 1)?[0];
                let shift = lines.values("shift", 1)?[0];
                KeyBundle::Evd(EvdKey::new(alpha, shift, m_key)?)
            }
            other => return Err(bad(format!("unknown key kind {other:?}"))),
        };
        Ok(bundle)
    }
}

fn bad(msg: String) -> Error {
    ParseError::MalformedHeader(msg).into()
}

fn write_values(out: &mut String, tag: &str, values: &[f64]) {
    let body: Vec<String> = values.iter().map(|&v| format_f64(v)).collect();
    let _ = writeln!(out, "{tag} {}", body.join(" "));
}

fn write_perm(out: &mut String, p: &ScaledPermutation) {
    let idx: Vec<String> = p.perm.forward().iter().map(usize::to_string).collect();
    let _ = writeln!(out, "perm {}", idx.join(" "));
    write_values(out, "scale", &p.scale);
}

fn write_secret(out: &mut String, m: &SecretMatrix) {
    write_perm(out, &m.p);
    write_values(out, "h", &m.h.h);
}

struct KeyLines<'a> {
    inner: std::iter::Filter<std::str::Lines<'a>, fn(&&str) -> bool>,
}

impl<'a> KeyLines<'a> {
    fn new(text: &'a str) -> Self {
        fn keep(l: &&str) -> bool {
            !l.trim().is_empty()
        }
        Self {
            inner: text.lines().filter(keep as fn(&&str) -> bool),
        }
    }

    fn next_line(&mut self) -> Result<&'a str> {
        self.inner
            .next()
            .ok_or_else(|| bad("unexpected end of key file".into()))
    }

    fn field(&mut self, tag: &str) -> Result<Vec<&'a str>> {
        let line = self.next_line()?;
        let mut parts = line.split_whitespace();
        match parts.next() {
            Some(t) if t == tag => Ok(parts.collect()),
            other => Err(bad(format!("expected {tag:?}, found {other:?}"))),
        }
    }

    fn values(&mut self, tag: &str, n: usize) -> Result<Vec<f64>> {
        let raw = self.field(tag)?;
        if raw.len() != n {
            return Err(ParseError::Truncated {
                expected: n,
                found: raw.len(),
            }
            .into());
        }
        raw.iter()
            .enumerate()
            .map(|(i, t)| {
                let v: f64 = t.parse().map_err(|_| ParseError::BadValue(format!("{tag}: {t:?}")))?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(ParseError::NonFinite(i).into())
                }
            })
            .collect()
    }

    fn perm(&mut self, n: usize) -> Result<ScaledPermutation> {
        let raw = self.field("perm")?;
        if raw.len() != n {
            return Err(ParseError::Truncated {
                expected: n,
                found: raw.len(),
            }
            .into());
        }
        let forward = raw
            .iter()
            .map(|t| t.parse().map_err(|_| ParseError::BadValue(format!("perm: {t:?}")).into()))
            .collect::<Result<Vec<usize>>>()?;
        let scale = self.values("scale", n)?;
        ScaledPermutation::new(Permutation::from_forward(forward)?, scale)
    }

    fn secret(&mut self, n: usize) -> Result<SecretMatrix> {
        let p = self.perm(n)?;
        let h = RankOnePerturbation::new(self.values("h", n)?)?;
        SecretMatrix::from_parts(p, h)
    }
}
