use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use super::bench::{bench_run, parse_dims, BenchProtocol, CSV_HEADER};
use super::envelope::{Envelope, EnvelopeKind};
use crate::error::{Error, Result};
use crate::gauntlet::{ind_zea_game, Scheme};
use crate::keyforge::{keygen_evd, keygen_lei, keygen_lr, keygen_mmc, KeyBundle};
use crate::matcore::io::{format_f64, load, save};
use crate::matcore::{DenseMatrix, Rng};
use crate::mmc::{lei_decrypt, lei_encrypt, mmc_decrypt, mmc_encrypt, mmc_verify, MmcResult};
use crate::regress::{cloud_lr, lr_center, lr_decrypt, lr_encrypt, lr_verify, CenteredDesign, LR_TOL};
use crate::spectra::{cloud_evd, cov_matrix, evd_decrypt, evd_encrypt, evd_verify, pca_project, Covariance, Spectrum};
use crate::Verdict;

#[derive(Parser, Debug)]
#[command(name = "matveil", version, about = "Masked outsourcing of matrix products, regression and PCA")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum KeyKind {
    Mmc,
    Lei,
    Lr,
    Evd,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a key file.
    Keygen {
        #[arg(long, value_enum)]
        protocol: KeyKind,
        /// `m,n,s` (mmc, lei), `m,n` (lr) or `n` (evd).
        #[arg(long)]
        dims: String,
        #[arg(long, default_value_t = 16)]
        kappa: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Mask the inputs into a task envelope.
    Encrypt {
        #[arg(long)]
        key: PathBuf,
        /// Left factor, design matrix, or symmetric matrix.
        #[arg(long)]
        x: PathBuf,
        /// Right factor or response column; unused for evd.
        #[arg(long)]
        y: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Server side: solve a task envelope. Takes no key.
    Cloud {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Unmask a result envelope.
    Decrypt {
        #[arg(long)]
        key: PathBuf,
        #[arg(long)]
        input: PathBuf,
        /// Design and responses, needed to recover the lr intercept.
        #[arg(long)]
        x: Option<PathBuf>,
        #[arg(long)]
        y: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check a result: `--x --y --z` for a product, or `--task --result` for a cloud transcript.
    Verify {
        #[arg(long)]
        x: Option<PathBuf>,
        #[arg(long)]
        y: Option<PathBuf>,
        #[arg(long)]
        z: Option<PathBuf>,
        #[arg(long)]
        task: Option<PathBuf>,
        #[arg(long)]
        result: Option<PathBuf>,
        #[arg(long, default_value_t = 20)]
        loops: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Full outsourced regression in one process.
    Lr {
        #[arg(long)]
        x: PathBuf,
        #[arg(long)]
        y: PathBuf,
        #[arg(long, default_value_t = 8)]
        kappa: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Full outsourced PCA in one process.
    Pca {
        /// `n×m` data, one sample per column.
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        keep: usize,
        #[arg(long, default_value_t = 10)]
        kappa: u32,
        #[arg(long, default_value_t = 20)]
        loops: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Zero-element distinguishing game.
    Zea {
        #[arg(long)]
        scheme: String,
        /// `RxC`.
        #[arg(long)]
        dims: String,
        #[arg(long, default_value_t = 500)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Time one protocol and print a CSV row.
    Bench {
        #[arg(long)]
        protocol: String,
        #[arg(long)]
        dims: String,
        #[arg(long, default_value_t = 20)]
        loops: usize,
        #[arg(long, default_value_t = 3)]
        reps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Omit the CSV header line.
        #[arg(long)]
        no_header: bool,
    },
}

fn read_key(path: &Path) -> Result<KeyBundle> {
    KeyBundle::from_text(&fs::read_to_string(path)?)
}

fn need<'a>(p: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
    p.as_deref().ok_or_else(|| Error::Parameter(format!("--{flag} is required here")))
}

fn as_vector(m: &DenseMatrix, what: &str) -> Result<Vec<f64>> {
    if m.cols() == 1 {
        Ok(m.col(0))
    } else if m.rows() == 1 {
        Ok(m.row(0).to_vec())
    } else {
        Err(Error::InvalidDimension(format!("{what} must be a row or column, got {}x{}", m.rows(), m.cols())))
    }
}

fn design(x: &Path, y: &Path) -> Result<CenteredDesign> {
    lr_center(&load(x)?, &as_vector(&load(y)?, "response")?)
}

fn spectrum_from(values: &DenseMatrix, vectors: DenseMatrix) -> Result<Spectrum> {
    Spectrum::new(as_vector(values, "eigenvalues")?, vectors)
}

/// Eigenvalues on the first row, eigenvectors below.
fn spectrum_table(s: &Spectrum) -> Result<DenseMatrix> {
    let n = s.len();
    let mut rows = vec![s.eigenvalues().to_vec()];
    rows.extend((0..n).map(|i| s.eigenvectors().row(i).to_vec()));
    DenseMatrix::from_rows(&rows)
}

fn print_verdict(v: Verdict, what: &str) -> Result<()> {
    println!("{}", v.as_str());
    match v {
        Verdict::Accept => Ok(()),
        Verdict::Reject => Err(Error::VerificationFailed(what.into())),
    }
}

/// Server computation for any task envelope.
pub fn solve_task(task: &Envelope) -> Result<Envelope> {
    let m = task.matrices();
    match task.kind() {
        EnvelopeKind::MmcTask => Envelope::new(EnvelopeKind::MmcResult, vec![m[0].matmul(&m[1])?]),
        EnvelopeKind::LrTask => {
            let beta = cloud_lr(&m[0], &as_vector(&m[1], "masked response")?)?;
            Envelope::new(EnvelopeKind::LrResult, vec![DenseMatrix::column(&beta)?])
        }
        EnvelopeKind::EvdTask => {
            let (values, vectors) = cloud_evd(&m[0])?.into_parts();
            Envelope::new(EnvelopeKind::EvdResult, vec![DenseMatrix::row_vector(&values)?, vectors])
        }
        other => Err(Error::Parameter(format!("{other:?} is not a task envelope"))),
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Keygen {
            protocol,
            dims,
            kappa,
            seed,
            out,
        } => {
            let d = parse_dims(&dims)?;
            let mut rng = Rng::new(seed);
            let arity = match protocol {
                KeyKind::Mmc | KeyKind::Lei => 3,
                KeyKind::Lr => 2,
                KeyKind::Evd => 1,
            };
            if d.len() != arity {
                return Err(Error::InvalidDimension(format!("{protocol:?} key takes {arity} dimensions")));
            }
            let bundle = match protocol {
                KeyKind::Mmc => KeyBundle::Mmc(keygen_mmc(d[0], d[1], d[2], kappa, &mut rng)?),
                KeyKind::Lei => KeyBundle::Lei(keygen_lei(d[0], d[1], d[2], kappa, &mut rng)?),
                KeyKind::Lr => KeyBundle::Lr(keygen_lr(d[0], d[1], kappa, &mut rng)?),
                KeyKind::Evd => KeyBundle::Evd(keygen_evd(d[0], kappa, &mut rng)?),
            };
            fs::write(&out, bundle.to_text())?;
        }
        Command::Encrypt { key, x, y, out } => {
            let env = match read_key(&key)? {
                KeyBundle::Mmc(k) => {
                    let t = mmc_encrypt(&k, &load(&x)?, &load(need(&y, "y")?)?)?;
                    Envelope::new(EnvelopeKind::MmcTask, vec![t.x_enc().clone(), t.y_enc().clone()])?
                }
                KeyBundle::Lei(k) => {
                    let t = lei_encrypt(&k, &load(&x)?, &load(need(&y, "y")?)?)?;
                    Envelope::new(EnvelopeKind::MmcTask, vec![t.x_enc().clone(), t.y_enc().clone()])?
                }
                KeyBundle::Lr(k) => {
                    let (xe, ye) = lr_encrypt(&k, &design(&x, need(&y, "y")?)?)?;
                    Envelope::new(EnvelopeKind::LrTask, vec![xe, DenseMatrix::column(&ye)?])?
                }
                KeyBundle::Evd(k) => Envelope::new(EnvelopeKind::EvdTask, vec![evd_encrypt(&k, &load(&x)?)?])?,
            };
            env.write(&out)?;
        }
        Command::Cloud { input, output } => solve_task(&Envelope::read(&input)?)?.write(&output)?,
        Command::Decrypt { key, input, x, y, out } => {
            let env = Envelope::read(&input)?;
            let m = env.matrices();
            let plain = match (read_key(&key)?, env.kind()) {
                (KeyBundle::Mmc(k), EnvelopeKind::MmcResult) => mmc_decrypt(&k, &MmcResult { z_enc: m[0].clone() })?,
                (KeyBundle::Lei(k), EnvelopeKind::MmcResult) => lei_decrypt(&k, &MmcResult { z_enc: m[0].clone() })?,
                (KeyBundle::Lr(k), EnvelopeKind::LrResult) => {
                    let d = design(need(&x, "x")?, need(&y, "y")?)?;
                    let sol = lr_decrypt(&k, &as_vector(&m[0], "coefficients")?, &d)?;
                    let mut col = sol.beta;
                    col.push(sol.beta0);
                    DenseMatrix::column(&col)?
                }
                (KeyBundle::Evd(k), EnvelopeKind::EvdResult) => {
                    spectrum_table(&evd_decrypt(&k, &spectrum_from(&m[0], m[1].clone())?)?)?
                }
                (b, kind) => return Err(Error::Parameter(format!("{} key cannot open {kind:?} envelope", b.kind()))),
            };
            save(&out, &plain)?;
        }
        Command::Verify {
            x,
            y,
            z,
            task,
            result,
            loops,
            seed,
        } => {
            let mut rng = Rng::new(seed);
            if let Some(task) = task {
                let t = Envelope::read(&task)?;
                let r = Envelope::read(need(&result, "result")?)?;
                let (tm, rm) = (t.matrices(), r.matrices());
                let v = match (t.kind(), r.kind()) {
                    (EnvelopeKind::MmcTask, EnvelopeKind::MmcResult) => mmc_verify(&tm[0], &tm[1], &rm[0], loops, &mut rng)?,
                    (EnvelopeKind::LrTask, EnvelopeKind::LrResult) => lr_verify(
                        &tm[0],
                        &as_vector(&tm[1], "masked response")?,
                        &as_vector(&rm[0], "coefficients")?,
                        LR_TOL,
                    )?,
                    (EnvelopeKind::EvdTask, EnvelopeKind::EvdResult) => {
                        evd_verify(&tm[0], &spectrum_from(&rm[0], rm[1].clone())?, loops, &mut rng)?
                    }
                    (a, b) => return Err(Error::Parameter(format!("{b:?} does not answer {a:?}"))),
                };
                print_verdict(v, "cloud result")?;
            } else {
                let xm = load(need(&x, "x")?)?;
                let ym = load(need(&y, "y")?)?;
                let zm = load(need(&z, "z")?)?;
                print_verdict(mmc_verify(&xm, &ym, &zm, loops, &mut rng)?, "product")?;
            }
        }
        Command::Lr { x, y, kappa, seed } => {
            let mut rng = Rng::new(seed);
            let d = design(&x, &y)?;
            let (m, n) = d.x_centered.shape();
            let key = keygen_lr(m, n, kappa, &mut rng)?;
            let (xe, ye) = lr_encrypt(&key, &d)?;
            let beta_enc = cloud_lr(&xe, &ye)?;
            print_verdict(lr_verify(&xe, &ye, &beta_enc, LR_TOL)?, "regression")?;
            let sol = lr_decrypt(&key, &beta_enc, &d)?;
            let beta: Vec<String> = sol.beta.iter().map(|v| format_f64(*v)).collect();
            println!("beta {}", beta.join(" "));
            println!("beta0 {}", format_f64(sol.beta0));
        }
        Command::Pca {
            data,
            keep,
            kappa,
            loops,
            seed,
            out,
        } => {
            let mut rng = Rng::new(seed);
            let d = load(&data)?;
            let (x, a) = cov_matrix(
                &d,
                Covariance::Outsourced {
                    kappa: 16,
                    loops,
                    rng: &mut rng,
                },
            )?;
            let key = keygen_evd(a.rows(), kappa, &mut rng)?;
            let b = evd_encrypt(&key, &a)?;
            let spec_enc = cloud_evd(&b)?;
            print_verdict(evd_verify(&b, &spec_enc, loops, &mut rng)?, "eigendecomposition")?;
            let spec = evd_decrypt(&key, &spec_enc)?;
            let vals: Vec<String> = spec.eigenvalues().iter().map(|v| format_f64(*v)).collect();
            println!("eigenvalues {}", vals.join(" "));
            let proj = pca_project(&spec, keep, &x)?;
            if let Some(out) = out {
                save(&out, &proj)?;
            }
        }
        Command::Zea {
            scheme,
            dims,
            trials,
            seed,
        } => {
            let d = parse_dims(&dims)?;
            if d.len() != 2 {
                return Err(Error::InvalidDimension(format!("game dims {dims:?} must be RxC")));
            }
            let report = ind_zea_game(scheme.parse::<Scheme>()?, d[0], d[1], trials, &Rng::new(seed))?;
            println!("{report}");
        }
        Command::Bench {
            protocol,
            dims,
            loops,
            reps,
            seed,
            no_header,
        } => {
            let row = bench_run(protocol.parse::<BenchProtocol>()?, &parse_dims(&dims)?, loops, reps, &mut Rng::new(seed))?;
            if !no_header {
                println!("{CSV_HEADER}");
            }
            println!("{}", row.to_csv());
        }
    }
    Ok(())
}
