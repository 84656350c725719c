use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::keyforge::{keygen_evd, keygen_lr, keygen_mmc};
use crate::matcore::{DenseMatrix, Rng};
use crate::mmc::{cloud_mmc, mmc_decrypt, mmc_encrypt, mmc_verify};
use crate::regress::{cloud_lr, lr_center, lr_decrypt, lr_encrypt, lr_plain, lr_verify, LR_TOL};
use crate::spectra::{cloud_evd, cov_matrix, evd_decrypt, evd_encrypt, evd_verify, Covariance};
use crate::Verdict;

pub const CSV_HEADER: &str = "protocol,dims,loops,t_o,t_cs,t_c1,t_c2,i_c,i_cs,i_ec";

const MMC_KAPPA: u32 = 16;
const LR_KAPPA: u32 = 8;
const EVD_KAPPA: u32 = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BenchProtocol {
    Mmc,
    Lr,
    Evd,
}

impl BenchProtocol {
    /// Number of dimensions the protocol takes: `m,n,s`, `m,n` or `n`.
    pub fn arity(self) -> usize {
        match self {
            BenchProtocol::Mmc => 3,
            BenchProtocol::Lr => 2,
            BenchProtocol::Evd => 1,
        }
    }
}

impl fmt::Display for BenchProtocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BenchProtocol::Mmc => "mmc",
            BenchProtocol::Lr => "lr",
            BenchProtocol::Evd => "evd",
        })
    }
}

impl FromStr for BenchProtocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mmc" => Ok(BenchProtocol::Mmc),
            "lr" => Ok(BenchProtocol::Lr),
            "evd" => Ok(BenchProtocol::Evd),
            other => Err(Error::Parameter(format!("unknown protocol {other:?}"))),
        }
    }
}

/// Parses `a,b,c` or `axbxc`.
pub fn parse_dims(s: &str) -> Result<Vec<usize>> {
    s.split([',', 'x'])
        .map(|t| {
            t.trim()
                .parse::<usize>()
                .ok()
                .filter(|&d| d > 0)
                .ok_or_else(|| Error::Parameter(format!("bad dimension {t:?} in {s:?}")))
        })
        .collect()
}

/// Mean phase timings in milliseconds and the derived indicators.
#[derive(Clone, Debug, PartialEq)]
pub struct BenchRow {
    pub protocol: BenchProtocol,
    pub dims: Vec<usize>,
    pub loops: usize,
    pub t_o: f64,
    pub t_cs: f64,
    pub t_c1: f64,
    pub t_c2: f64,
}

impl BenchRow {
    pub fn t_c(&self) -> f64 {
        self.t_c1 + self.t_c2
    }

    /// Client speedup.
    pub fn i_c(&self) -> f64 {
        self.t_o / self.t_c()
    }

    /// Cloud efficiency.
    pub fn i_cs(&self) -> f64 {
        self.t_o / self.t_cs
    }

    /// Relative extra cost.
    pub fn i_ec(&self) -> f64 {
        (self.t_c() + self.t_cs - self.t_o) / self.t_o
    }

    pub fn to_csv(&self) -> String {
        let dims: Vec<String> = self.dims.iter().map(|d| d.to_string()).collect();
        format!(
            "{},{},{},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4}",
            self.protocol,
            dims.join("x"),
            self.loops,
            self.t_o,
            self.t_cs,
            self.t_c1,
            self.t_c2,
            self.i_c(),
            self.i_cs(),
            self.i_ec()
        )
    }
}

#[derive(Default)]
struct Phases {
    t_o: f64,
    t_cs: f64,
    t_c1: f64,
    t_c2: f64,
}

fn timed<T>(acc: &mut f64, f: impl FnOnce() -> Result<T>) -> Result<T> {
    let start = Instant::now();
    let out = f();
    *acc += start.elapsed().as_secs_f64() * 1e3;
    out
}

fn require_accept(v: Verdict, what: &str) -> Result<()> {
    match v {
        Verdict::Accept => Ok(()),
        Verdict::Reject => Err(Error::VerificationFailed(what.into())),
    }
}

fn mmc_once(d: &[usize], loops: usize, rng: &mut Rng, ph: &mut Phases) -> Result<()> {
    let (m, n, s) = (d[0], d[1], d[2]);
    let x = DenseMatrix::random(m, n, -1.0, 1.0, rng)?;
    let y = DenseMatrix::random(n, s, -1.0, 1.0, rng)?;
    timed(&mut ph.t_o, || x.matmul(&y))?;
    let (key, task) = timed(&mut ph.t_c1, || {
        let key = keygen_mmc(m, n, s, MMC_KAPPA, rng)?;
        let task = mmc_encrypt(&key, &x, &y)?;
        Ok((key, task))
    })?;
    let res = timed(&mut ph.t_cs, || cloud_mmc(&task))?;
    let verdict = timed(&mut ph.t_c2, || {
        let z = mmc_decrypt(&key, &res)?;
        mmc_verify(&x, &y, &z, loops, rng)
    })?;
    require_accept(verdict, "product")
}

fn lr_once(d: &[usize], rng: &mut Rng, ph: &mut Phases) -> Result<()> {
    let (m, n) = (d[0], d[1]);
    let x = DenseMatrix::random(m, n, -1.0, 1.0, rng)?;
    let y: Vec<f64> = (0..m).map(|_| rng.uniform_range(-1.0, 1.0)).collect();
    let design = lr_center(&x, &y)?;
    timed(&mut ph.t_o, || lr_plain(&design))?;
    let (key, (x_enc, y_enc)) = timed(&mut ph.t_c1, || {
        let key = keygen_lr(m, n, LR_KAPPA, rng)?;
        let enc = lr_encrypt(&key, &design)?;
        Ok((key, enc))
    })?;
    let beta_enc = timed(&mut ph.t_cs, || cloud_lr(&x_enc, &y_enc))?;
    let verdict = timed(&mut ph.t_c2, || {
        let v = lr_verify(&x_enc, &y_enc, &beta_enc, LR_TOL)?;
        lr_decrypt(&key, &beta_enc, &design)?;
        Ok(v)
    })?;
    require_accept(verdict, "regression")
}

fn evd_once(d: &[usize], loops: usize, rng: &mut Rng, ph: &mut Phases) -> Result<()> {
    let n = d[0];
    let data = DenseMatrix::random(n, 2 * n + 1, -1.0, 1.0, rng)?;
    let (_, a) = cov_matrix(&data, Covariance::Local)?;
    timed(&mut ph.t_o, || cloud_evd(&a))?;
    let (key, b) = timed(&mut ph.t_c1, || {
        let key = keygen_evd(n, EVD_KAPPA, rng)?;
        let b = evd_encrypt(&key, &a)?;
        Ok((key, b))
    })?;
    let spec = timed(&mut ph.t_cs, || cloud_evd(&b))?;
    let verdict = timed(&mut ph.t_c2, || {
        let v = evd_verify(&b, &spec, loops, rng)?;
        evd_decrypt(&key, &spec)?;
        Ok(v)
    })?;
    require_accept(verdict, "eigendecomposition")
}

/// Runs the protocol `repetitions` times on fresh random inputs and reports
/// mean phase times. The plaintext time `t_o` uses the same solver as the
/// cloud on the unmasked input.
pub fn bench_run(protocol: BenchProtocol, dims: &[usize], loops: usize, repetitions: usize, rng: &mut Rng) -> Result<BenchRow> {
    if repetitions < 3 {
        return Err(Error::Parameter(format!("{repetitions} repetitions, need at least 3")));
    }
    if dims.len() != protocol.arity() || dims.contains(&0) {
        return Err(Error::InvalidDimension(format!("{protocol} takes {} positive dimensions, got {dims:?}", protocol.arity())));
    }
    if loops == 0 && protocol != BenchProtocol::Lr {
        return Err(Error::Parameter("verification needs at least one loop".into()));
    }
    let mut ph = Phases::default();
    for _ in 0..repetitions {
        match protocol {
            BenchProtocol::Mmc => mmc_once(dims, loops, rng, &mut ph)?,
            BenchProtocol::Lr => lr_once(dims, rng, &mut ph)?,
            BenchProtocol::Evd => evd_once(dims, loops, rng, &mut ph)?,
        }
    }
    let r = repetitions as f64;
    Ok(BenchRow {
        protocol,
        dims: dims.to_vec(),
        loops,
        t_o: ph.t_o / r,
        t_cs: ph.t_cs / r,
        t_c1: ph.t_c1 / r,
        t_c2: ph.t_c2 / r,
    })
}
