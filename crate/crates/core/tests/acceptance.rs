//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each,
//! and exits nonzero if any criterion fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use matveil::fastmul::{apply_perm, apply_secret, Side};
use matveil::gauntlet::{ind_zea_game, tamper, Scheme, TamperMode};
use matveil::harness::{bench_run, BenchProtocol};
use matveil::keyforge::{
    eps_inv, invertibility_margin, keygen_evd, keygen_lr, keygen_mmc, keygen_secret, RankOnePerturbation,
    ScaledPermutation,
};
use matveil::matcore::mat_mul_naive;
use matveil::mmc::{cloud_mmc, mmc_decrypt, mmc_encrypt, mmc_verify};
use matveil::regress::{cloud_lr, lr_center, lr_decrypt, lr_encrypt, lr_plain, lr_verify, LR_TOL};
use matveil::spectra::{cloud_evd, evd_decrypt, evd_encrypt, evd_verify};
use matveil::{oracle, DenseMatrix, Permutation, Rng, Verdict};

const MMC_KAPPA: u32 = 16;
const LR_KAPPA: u32 = 8;
const EVD_KAPPA: u32 = 10;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn rel_vec(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let norm: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    diff / norm.max(f64::MIN_POSITIVE)
}

fn worked_example() -> Outcome {
    let x = DenseMatrix::from_rows(&[vec![1.0, 0.0, 2.0], vec![0.0, 3.0, 4.0]]).unwrap();
    let p1 = ScaledPermutation::new(Permutation::from_forward(vec![1, 0]).unwrap(), vec![1.0, 2.0]).unwrap();
    let p2 = ScaledPermutation::new(Permutation::from_forward(vec![2, 0, 1]).unwrap(), vec![3.0, 4.0, 5.0]).unwrap();
    let enc = apply_perm(&p2, &apply_perm(&p1, &x, Side::Left, false).unwrap(), Side::Right, true).unwrap();
    let expected = DenseMatrix::from_rows(&[vec![4.0 / 3.0, 0.0, 0.6], vec![4.0 / 3.0, 0.5, 0.0]]).unwrap();
    let err = enc.sub(&expected).unwrap().norm_max();
    check(err <= 1e-12, format!("max entry error {err:.2e}"))
}

fn invertibility_boundary() -> Outcome {
    let mut rng = Rng::new(0xA2);
    let mut random_ok = 0;
    let mut constructed_ok = 0;
    let mut total = 0;
    for n in 2..=16 {
        for _ in 0..1000 {
            total += 1;
            let p = ScaledPermutation::random(n, 10, &mut rng).unwrap();
            let h = RankOnePerturbation::random(n, 10, &mut rng).unwrap();
            let scale: f64 = p.scale().iter().map(|v| v.abs()).product();
            let margin = invertibility_margin(&p, &h).unwrap();
            let ts = margin_trace(&p, &h);
            let dense = p.to_dense().add(&h.to_dense()).unwrap();
            let det = oracle::det(&dense).unwrap();
            if (margin > eps_inv(ts)) == (det.abs() > 1e-6 * scale) {
                random_ok += 1;
            }

            // force 1 + Σ hᵢ/pᵢ = 0 through the last entry
            let mut hv = h.values().to_vec();
            let partial: f64 = hv[..n - 1].iter().zip(p.scale()).map(|(a, b)| a / b).sum();
            hv[n - 1] = p.scale()[n - 1] * (-1.0 - partial);
            if hv[n - 1] == 0.0 {
                constructed_ok += 1;
                continue;
            }
            let hs = RankOnePerturbation::new(hv).unwrap();
            let margin = invertibility_margin(&p, &hs).unwrap();
            let dense = p.to_dense().add(&hs.to_dense()).unwrap();
            let det = oracle::det(&dense).unwrap();
            if margin <= eps_inv(margin_trace(&p, &hs)) && det.abs() <= 1e-6 * scale {
                constructed_ok += 1;
            }
        }
    }
    check(
        random_ok == total && constructed_ok == total,
        format!("random agree {random_ok}/{total}, singular agree {constructed_ok}/{total}"),
    )
}

fn margin_trace(p: &ScaledPermutation, h: &RankOnePerturbation) -> f64 {
    h.values().iter().zip(p.scale()).map(|(a, b)| a / b).sum()
}

fn sherman_morrison() -> Outcome {
    let mut rng = Rng::new(0xA3);
    let mut worst = 0.0f64;
    for i in 0..200 {
        let n = 1 + (i % 64);
        let cols = 1 + rng.below(64);
        let m = keygen_secret(n, MMC_KAPPA, &mut rng).unwrap();
        let t = DenseMatrix::random(n, cols, -1.0, 1.0, &mut rng).unwrap();
        let fwd = apply_secret(&m, &t, Side::Left, false).unwrap();
        let back = apply_secret(&m, &fwd, Side::Left, true).unwrap();
        worst = worst.max(back.sub(&t).unwrap().norm_fro() / t.norm_fro());
    }
    check(worst <= 1e-9, format!("worst relative Frobenius error {worst:.2e}"))
}

fn kernel_oracle() -> Outcome {
    let mut rng = Rng::new(0xA4);
    let mut worst = [0.0f64; 8];
    for i in 0..200 {
        let n = 1 + (i % 48);
        let other = 1 + rng.below(40);
        let p = ScaledPermutation::random(n, MMC_KAPPA, &mut rng).unwrap();
        let m = keygen_secret(n, MMC_KAPPA, &mut rng).unwrap();
        let dense_p = p.to_dense();
        let dense_pi = p.inverse_dense();
        let dense_m = m.to_dense();
        let dense_mi = oracle::inverse(&dense_m).unwrap();
        let tl = DenseMatrix::random(n, other, -1.0, 1.0, &mut rng).unwrap();
        let tr = DenseMatrix::random(other, n, -1.0, 1.0, &mut rng).unwrap();
        let cases: [(DenseMatrix, DenseMatrix); 8] = [
            (apply_perm(&p, &tl, Side::Left, false).unwrap(), mat_mul_naive(&dense_p, &tl).unwrap()),
            (apply_perm(&p, &tl, Side::Left, true).unwrap(), mat_mul_naive(&dense_pi, &tl).unwrap()),
            (apply_perm(&p, &tr, Side::Right, false).unwrap(), mat_mul_naive(&tr, &dense_p).unwrap()),
            (apply_perm(&p, &tr, Side::Right, true).unwrap(), mat_mul_naive(&tr, &dense_pi).unwrap()),
            (apply_secret(&m, &tl, Side::Left, false).unwrap(), mat_mul_naive(&dense_m, &tl).unwrap()),
            (apply_secret(&m, &tl, Side::Left, true).unwrap(), mat_mul_naive(&dense_mi, &tl).unwrap()),
            (apply_secret(&m, &tr, Side::Right, false).unwrap(), mat_mul_naive(&tr, &dense_m).unwrap()),
            (apply_secret(&m, &tr, Side::Right, true).unwrap(), mat_mul_naive(&tr, &dense_mi).unwrap()),
        ];
        for (k, (fast, dense)) in cases.iter().enumerate() {
            worst[k] = worst[k].max(fast.rel_fro_err(dense));
        }
    }
    let max = worst.iter().fold(0.0f64, |a, b| a.max(*b));
    check(max <= 1e-9, format!("worst relative error per path {:?}", worst.map(|w| format!("{w:.1e}"))))
}

fn mmc_end_to_end() -> Outcome {
    let mut rng = Rng::new(0xA5);
    let mut worst = 0.0f64;
    for (m, n, s) in [(8, 9, 10), (32, 40, 48), (128, 160, 192)] {
        for _ in 0..100 {
            let x = DenseMatrix::random(m, n, -1.0, 1.0, &mut rng).unwrap();
            let y = DenseMatrix::random(n, s, -1.0, 1.0, &mut rng).unwrap();
            let key = keygen_mmc(m, n, s, MMC_KAPPA, &mut rng).unwrap();
            let z = mmc_decrypt(&key, &cloud_mmc(&mmc_encrypt(&key, &x, &y).unwrap()).unwrap()).unwrap();
            worst = worst.max(z.rel_fro_err(&mat_mul_naive(&x, &y).unwrap()));
        }
    }
    check(worst <= 1e-9, format!("worst relative Frobenius error {worst:.2e}"))
}

fn freivalds() -> Outcome {
    let mut rng = Rng::new(0xA6);
    let (mut honest, mut caught) = (0, 0);
    for _ in 0..200 {
        let x = DenseMatrix::random(32, 40, -1.0, 1.0, &mut rng).unwrap();
        let y = DenseMatrix::random(40, 48, -1.0, 1.0, &mut rng).unwrap();
        let key = keygen_mmc(32, 40, 48, MMC_KAPPA, &mut rng).unwrap();
        let z = mmc_decrypt(&key, &cloud_mmc(&mmc_encrypt(&key, &x, &y).unwrap()).unwrap()).unwrap();
        if mmc_verify(&x, &y, &z, 20, &mut rng).unwrap() == Verdict::Accept {
            honest += 1;
        }
        let bad = tamper(&z, TamperMode::SingleEntry, 1e-3, &mut rng).unwrap();
        if mmc_verify(&x, &y, &bad, 20, &mut rng).unwrap() == Verdict::Reject {
            caught += 1;
        }
    }
    check(
        honest == 200 && caught == 200,
        format!("honest accepted {honest}/200, tampered accepted {}/200", 200 - caught),
    )
}

fn zea_separation() -> Outcome {
    let lei = ind_zea_game(Scheme::Lei, 16, 16, 500, &Rng::new(0xA7)).unwrap();
    let prop = ind_zea_game(Scheme::Proposed, 16, 16, 500, &Rng::new(0xA7)).unwrap();
    check(
        lei.advantage >= 0.49 && prop.advantage <= 0.05,
        format!("lei advantage {:.4}, proposed advantage {:.4}", lei.advantage, prop.advantage),
    )
}

fn lr_transparency() -> Outcome {
    let mut rng = Rng::new(0xA8);
    let mut worst = 0.0f64;
    for i in 0..100 {
        let n = 1 + (i % 25);
        let m = n + 2 + rng.below(200 - n - 1);
        let x = DenseMatrix::random(m, n, -1.0, 1.0, &mut rng).unwrap();
        let beta: Vec<f64> = (0..n).map(|_| rng.uniform_range(-5.0, 5.0)).collect();
        let y: Vec<f64> = x
            .mul_vec(&beta)
            .unwrap()
            .into_iter()
            .map(|v| v + 2.0 + 0.1 * rng.uniform_range(-1.0, 1.0))
            .collect();
        let d = lr_center(&x, &y).unwrap();
        let key = keygen_lr(m, n, LR_KAPPA, &mut rng).unwrap();
        let (xe, ye) = lr_encrypt(&key, &d).unwrap();
        let be = cloud_lr(&xe, &ye).unwrap();
        if lr_verify(&xe, &ye, &be, LR_TOL).unwrap() != Verdict::Accept {
            return Err(format!("honest transcript rejected at {m}x{n}"));
        }
        let out = lr_decrypt(&key, &be, &d).unwrap();
        let plain = lr_plain(&d).unwrap();
        let mut a = out.beta.clone();
        a.push(out.beta0);
        let mut b = plain.beta.clone();
        b.push(plain.beta0);
        worst = worst.max(rel_vec(&a, &b));
    }

    let x = DenseMatrix::random(60, 3, -2.0, 2.0, &mut rng).unwrap();
    let truth = [1.0, -2.0, 3.0];
    let y: Vec<f64> = x.mul_vec(&truth).unwrap().into_iter().map(|v| v + 5.0).collect();
    let d = lr_center(&x, &y).unwrap();
    let key = keygen_lr(60, 3, LR_KAPPA, &mut rng).unwrap();
    let (xe, ye) = lr_encrypt(&key, &d).unwrap();
    let out = lr_decrypt(&key, &cloud_lr(&xe, &ye).unwrap(), &d).unwrap();
    let gt_err = out
        .beta
        .iter()
        .zip(truth)
        .map(|(a, b)| (a - b).abs())
        .fold((out.beta0 - 5.0).abs(), f64::max);
    check(
        worst <= 1e-7 && gt_err <= 1e-8,
        format!("worst relative error {worst:.2e}, ground-truth error {gt_err:.2e}"),
    )
}

fn evd_end_to_end() -> Outcome {
    let mut rng = Rng::new(0xA9);
    let (mut worst_val, mut worst_cos, mut worst_affine, mut worst_sub) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let mut clustered = 0;
    for i in 0..60 {
        let n = 2 + (i % 31);
        let c = DenseMatrix::random(n, n, -1.0, 1.0, &mut rng).unwrap();
        let a = c.add(&c.transpose()).unwrap().scale(0.5);
        let key = keygen_evd(n, EVD_KAPPA, &mut rng).unwrap();
        let b = evd_encrypt(&key, &a).unwrap();
        let spec_b = cloud_evd(&b).unwrap();
        if evd_verify(&b, &spec_b, 20, &mut rng).unwrap() != Verdict::Accept {
            return Err(format!("honest spectrum rejected at n={n}"));
        }
        let (ref_vals, ref_vecs) = oracle::jacobi_eigen(&a).unwrap();
        let radius = ref_vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));

        let mut mapped: Vec<f64> = ref_vals.iter().map(|l| key.alpha() * l + key.s_shift()).collect();
        mapped.sort_by(|p, q| q.total_cmp(p));
        let mapped_radius = mapped.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (got, want) in spec_b.eigenvalues().iter().zip(&mapped) {
            worst_affine = worst_affine.max((got - want).abs() / mapped_radius);
        }

        let spec = evd_decrypt(&key, &spec_b).unwrap();
        for k in 0..n {
            worst_val = worst_val.max((spec.eigenvalues()[k] - ref_vals[k]).abs() / radius);
            let gap = [k.checked_sub(1), Some(k + 1)]
                .into_iter()
                .flatten()
                .filter(|&j| j < n)
                .map(|j| (ref_vals[j] - ref_vals[k]).abs())
                .fold(f64::INFINITY, f64::min);
            let v = spec.eigenvectors().col(k);
            if gap < 1e-6 * radius {
                // near-degenerate: check the invariant-subspace residual
                clustered += 1;
                let av = a.mul_vec(&v).unwrap();
                let res: f64 = av
                    .iter()
                    .zip(&v)
                    .map(|(p, q)| (p - spec.eigenvalues()[k] * q).powi(2))
                    .sum::<f64>()
                    .sqrt();
                worst_sub = worst_sub.max(res / radius);
            } else {
                let cos: f64 = v.iter().zip(ref_vecs.col(k)).map(|(p, q)| p * q).sum();
                worst_cos = worst_cos.max(1.0 - cos.abs());
            }
        }
    }
    check(
        worst_val <= 1e-7 && worst_cos <= 1e-8 && worst_affine <= 1e-7 && worst_sub <= 1e-7,
        format!(
            "eigenvalue {worst_val:.2e}, 1-|cos| {worst_cos:.2e}, affine law {worst_affine:.2e}, \
             clustered pairs {clustered} (residual {worst_sub:.2e})"
        ),
    )
}

fn performance_trend() -> Outcome {
    let mut rng = Rng::new(0xAA);
    let row = bench_run(BenchProtocol::Mmc, &[400, 500, 600], 20, 5, &mut rng).map_err(|e| e.to_string())?;
    let mut ladder = Vec::new();
    for dims in [[128, 160, 192], [256, 320, 384], [512, 640, 768]] {
        ladder.push(bench_run(BenchProtocol::Mmc, &dims, 20, 3, &mut rng).map_err(|e| e.to_string())?.i_c());
    }
    let rising = ladder.windows(2).all(|w| w[1] >= 0.9 * w[0]);
    let detail = format!(
        "(400,500,600): i_c {:.2}, i_cs {:.3}; ladder i_c {:?}",
        row.i_c(),
        row.i_cs(),
        ladder.iter().map(|v| format!("{v:.2}")).collect::<Vec<_>>()
    );
    check(
        row.i_c() > 1.0 && (0.8..=1.2).contains(&row.i_cs()) && rising && ladder[2] > 1.0,
        detail,
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome, Duration); 10] = [
        ("1 worked Lei example", worked_example, Duration::from_millis(1)),
        ("2 invertibility boundary", invertibility_boundary, Duration::from_secs(5)),
        ("3 Sherman-Morrison inverse", sherman_morrison, Duration::from_secs(5)),
        ("4 kernel-oracle equivalence", kernel_oracle, Duration::from_secs(10)),
        ("5 MMC end to end", mmc_end_to_end, Duration::from_secs(60)),
        ("6 Freivalds soundness", freivalds, Duration::from_secs(60)),
        ("7 IND-ZEA separation", zea_separation, Duration::from_secs(30)),
        ("8 LR transparency", lr_transparency, Duration::from_secs(30)),
        ("9 EVD end to end", evd_end_to_end, Duration::from_secs(60)),
        ("10 performance trend", performance_trend, Duration::from_secs(300)),
    ];
    let mut failed = 0;
    for (name, run, limit) in criteria {
        let start = Instant::now();
        let outcome = run();
        let elapsed = start.elapsed();
        let (ok, detail) = match outcome {
            Ok(d) => (elapsed <= limit, d),
            Err(d) => (false, d),
        };
        if !ok {
            failed += 1;
        }
        println!(
            "criterion {name}: {} ({detail}; {:.3} s, limit {} s)",
            if ok { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            limit.as_secs_f64()
        );
    }
    println!("acceptance: {} of 10 criteria passed", 10 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
