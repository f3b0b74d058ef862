//! Acceptance suite: one test per criterion, each printing a single
//! `criterion N: pass — ...` line (visible with `--nocapture`; a failed
//! assertion is the corresponding fail line).

use ndarray::{Array2, Array3, Array4, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use polarlens::forward::{adjoint_apply, build_dense_operator, estimate_lipschitz, forward_apply, ForwardOperator};
use polarlens::metrics::{evaluate_stack, psnr, ssim};
use polarlens::prox::{haar_tv_prox_raw, TvWeights};
use polarlens::sim::{generate_stripe_mask, simulate_measurement, smooth_synthetic_scene, MaskSpec, SimConfig};
use polarlens::solver::{admm_reconstruct, fista_reconstruct, SolverConfig};
use polarlens::tensor::{normalize_psf, Measurement, PolarizationMask, PolarizationStack, Psf};

fn random_psf(rng: &mut ChaCha8Rng, c: usize, hk: usize) -> Psf {
    let data = Array3::from_shape_fn((c, hk, hk), |_| rng.gen::<f64>());
    normalize_psf(&Psf::new(data).unwrap()).unwrap()
}

/// Per-pixel random assignment to one of `p` angles: a valid partition mask.
fn random_mask(rng: &mut ChaCha8Rng, p: usize, h: usize, w: usize) -> PolarizationMask {
    let mut data = Array3::<f64>::zeros((p, h, w));
    for i in 0..h {
        for j in 0..w {
            data[(rng.gen_range(0..p), i, j)] = 1.0;
        }
    }
    PolarizationMask::new(data).unwrap()
}

fn random_stack(rng: &mut ChaCha8Rng, p: usize, c: usize, h: usize, w: usize) -> PolarizationStack {
    let labels = if p == 3 { vec![0, 45, 90] } else { vec![0, 45, 90, 135] };
    let data = Array4::from_shape_fn((p, c, h, w), |_| rng.gen::<f64>());
    PolarizationStack::new(data, labels).unwrap()
}

fn dot3(a: &Array3<f64>, b: &Array3<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

fn dot4(a: &Array4<f64>, b: &Array4<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

#[test]
fn criterion_01_adjoint_identity() {
    for seed in 0..200u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = rng.gen_range(6..=16);
        let w = rng.gen_range(6..=16);
        let c = if rng.gen::<bool>() { 1 } else { 3 };
        let p = if rng.gen::<bool>() { 3 } else { 4 };
        let op = ForwardOperator::new(
            random_psf(&mut rng, c, 5),
            random_mask(&mut rng, p, h, w),
        )
        .unwrap();
        let x = random_stack(&mut rng, p, c, h, w);
        let y_arr = Array3::from_shape_fn((c, h, w), |_| rng.gen::<f64>() - 0.5);
        let y = Measurement::new(y_arr, 0.0).unwrap();
        let ax = forward_apply(&op, &x).unwrap();
        let aty = adjoint_apply(&op, &y).unwrap();
        let lhs = dot3(ax.data(), y.data());
        let rhs = dot4(x.data(), aty.data());
        let bound = 1e-10 * dot3(ax.data(), ax.data()).sqrt() * dot3(y.data(), y.data()).sqrt();
        assert!(
            (lhs - rhs).abs() <= bound,
            "criterion 1: fail — seed {seed}: |<Ax,y> - <x,A'y>| = {} > {bound}",
            (lhs - rhs).abs()
        );
    }
    println!("criterion 1: pass — adjoint identity holds on 200 random instances");
}

fn dense_test_operator() -> ForwardOperator {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let psf = random_psf(&mut rng, 1, 5);
    let mask = generate_stripe_mask(&MaskSpec::new(8, 8, vec![0, 45, 90], 2).unwrap()).unwrap();
    ForwardOperator::new(psf, mask).unwrap()
}

#[test]
fn criterion_02_dense_oracle_equivalence() {
    let op = dense_test_operator();
    let a = build_dense_operator(&op).unwrap();
    let (m, n) = a.dim();
    assert_eq!((m, n), (64, 192));

    let mut rng = ChaCha8Rng::seed_from_u64(78);
    let x = random_stack(&mut rng, 3, 1, 8, 8);
    let xv = Array2::from_shape_vec((n, 1), x.data().iter().copied().collect()).unwrap();
    let dense_fwd = a.dot(&xv);
    let fft_fwd = forward_apply(&op, &x).unwrap();
    for (k, v) in fft_fwd.data().iter().enumerate() {
        assert!(
            (v - dense_fwd[(k, 0)]).abs() <= 1e-12,
            "criterion 2: fail — forward mismatch at {k}: {v} vs {}",
            dense_fwd[(k, 0)]
        );
    }

    let y_arr = Array3::from_shape_fn((1, 8, 8), |_| rng.gen::<f64>() - 0.5);
    let y = Measurement::new(y_arr, 0.0).unwrap();
    let yv = Array2::from_shape_vec((m, 1), y.data().iter().copied().collect()).unwrap();
    let dense_adj = a.t().dot(&yv);
    let fft_adj = adjoint_apply(&op, &y).unwrap();
    for (k, v) in fft_adj.data().iter().enumerate() {
        assert!(
            (v - dense_adj[(k, 0)]).abs() <= 1e-12,
            "criterion 2: fail — adjoint mismatch at {k}: {v} vs {}",
            dense_adj[(k, 0)]
        );
    }

    // top eigenvalue of A'A via a dense symmetric eigensolve
    let ata_nd = a.t().dot(&a);
    let ata = nalgebra::DMatrix::from_fn(n, n, |i, j| ata_nd[(i, j)]);
    let eig = nalgebra::SymmetricEigen::new(ata);
    let top = eig.eigenvalues.iter().cloned().fold(f64::MIN, f64::max);
    let l = estimate_lipschitz(&op, 2000, 5);
    assert!(
        (l - top).abs() <= 1e-6 * top,
        "criterion 2: fail — Lipschitz {l} vs dense eigenvalue {top}"
    );
    println!("criterion 2: pass — FFT operator matches dense oracle; Lipschitz within 1e-6");
}

fn residual_norm(a: &Array2<f64>, x: &Array2<f64>, y: &Array2<f64>) -> f64 {
    let r = &a.dot(x) - y;
    r.iter().map(|v| v * v).sum::<f64>().sqrt()
}

#[test]
fn criterion_03_solver_vs_nnls_oracle() {
    let op = dense_test_operator();
    let a = build_dense_operator(&op).unwrap();
    let (m, n) = a.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(300);
    // negative entries keep the NNLS residual bounded away from zero: the
    // operator is entrywise nonnegative, so no feasible x can match them
    let y_arr = Array3::from_shape_fn((1, 8, 8), |_| rng.gen::<f64>() - 0.4);
    let y = Measurement::new(y_arr, 0.0).unwrap();
    let yv = Array2::from_shape_vec((m, 1), y.data().iter().copied().collect()).unwrap();

    // long-run projected-gradient NNLS oracle on the dense system
    let l = estimate_lipschitz(&op, 2000, 5);
    let step = 1.0 / l;
    let mut x = Array2::<f64>::zeros((n, 1));
    for _ in 0..30_000 {
        let grad = a.t().dot(&(&a.dot(&x) - &yv));
        x = (&x - &(step * &grad)).mapv(|v| v.max(0.0));
    }
    let oracle = residual_norm(&a, &x, &yv);
    assert!(oracle > 1e-3, "oracle residual unexpectedly near zero: {oracle}");

    let fista_cfg = SolverConfig {
        lambda: 0.0,
        lambda_w: 0.0,
        step_factor: 200.0,
        iterations: 2000,
        ..SolverConfig::fista_simulation()
    };
    let rep = fista_reconstruct(&y, &op, &fista_cfg).unwrap();
    let xv = Array2::from_shape_vec((n, 1), rep.estimate.data().iter().copied().collect()).unwrap();
    let res_f = residual_norm(&a, &xv, &yv);
    assert!(
        (res_f - oracle).abs() <= 0.01 * oracle,
        "criterion 3: fail — FISTA residual {res_f} vs oracle {oracle}"
    );

    let admm_cfg = SolverConfig {
        lambda: 0.0,
        lambda_w: 0.0,
        iterations: 500,
        ..SolverConfig::admm_defaults()
    };
    let rep = admm_reconstruct(&y, &op, &admm_cfg).unwrap();
    let zv = Array2::from_shape_vec((n, 1), rep.estimate.data().iter().copied().collect()).unwrap();
    let res_a = residual_norm(&a, &zv, &yv);
    assert!(
        (res_a - oracle).abs() <= 0.02 * oracle,
        "criterion 3: fail — ADMM residual {res_a} vs oracle {oracle}"
    );
    println!(
        "criterion 3: pass — FISTA residual {res_f:.6} / ADMM {res_a:.6} vs NNLS oracle {oracle:.6}"
    );
}

#[test]
fn criterion_04_end_to_end_recovery() {
    // pre-registered threshold for this exact pipeline (bundled speckle PSF,
    // 64x64 smooth target, noiseless, FISTA defaults at 2000 iterations),
    // fixed before any solver tuning; must stay >= 20 dB
    const PSNR_THRESHOLD_DB: f64 = 26.0;

    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("assets");
    let psf = normalize_psf(&polarlens::ptf::load_psf(dir.join("speckle_psf_gray.ptf")).unwrap()).unwrap();
    let scene = smooth_synthetic_scene(3, 1, 64, 64).unwrap();
    let mask = generate_stripe_mask(&MaskSpec::new(64, 64, vec![0, 45, 90], 4).unwrap()).unwrap();
    let op = ForwardOperator::new(psf, mask).unwrap();
    let y = simulate_measurement(&scene, &op, &SimConfig { noise_sigma: 0.0, seed: 7 }).unwrap();
    let cfg = SolverConfig { iterations: 2000, ..SolverConfig::fista_simulation() };
    let rep = fista_reconstruct(&y, &op, &cfg).unwrap();
    let report = evaluate_stack(&rep.estimate, &scene, 1.0).unwrap();
    assert!(
        report.aggregate_psnr >= PSNR_THRESHOLD_DB,
        "criterion 4: fail — end-to-end PSNR {:.2} dB below threshold {PSNR_THRESHOLD_DB}",
        report.aggregate_psnr
    );
    println!(
        "criterion 4: pass — end-to-end reconstruction PSNR {:.2} dB (threshold {PSNR_THRESHOLD_DB} dB)",
        report.aggregate_psnr
    );
}

#[test]
fn criterion_05_prox_suite() {
    let w = TvWeights { lambda: 5e-5, lambda_w: 5e-5 };
    let mut rng = ChaCha8Rng::seed_from_u64(500);
    let x = Array4::from_shape_fn((3, 1, 12, 12), |_| rng.gen::<f64>());

    // tau = 0 is a bit-exact identity
    let id = haar_tv_prox_raw(&x, 0.0, &w);
    assert!(x.iter().zip(id.iter()).all(|(a, b)| a.to_bits() == b.to_bits()));

    // soft-thresholding only touches detail coefficients: mean preserved
    let tv = haar_tv_prox_raw(&x, 0.05, &w);
    assert!((tv.mean().unwrap() - x.mean().unwrap()).abs() <= 1e-9);

    // 1-Lipschitz (non-expansive) on 200 random pairs
    for seed in 0..200u64 {
        let mut r = ChaCha8Rng::seed_from_u64(1000 + seed);
        let a = Array4::from_shape_fn((3, 1, 8, 8), |_| r.gen::<f64>() * 2.0 - 1.0);
        let b = Array4::from_shape_fn((3, 1, 8, 8), |_| r.gen::<f64>() * 2.0 - 1.0);
        let tau = r.gen::<f64>() * 0.2;
        let pa = haar_tv_prox_raw(&a, tau, &w);
        let pb = haar_tv_prox_raw(&b, tau, &w);
        let num = dot4(&(&pa - &pb), &(&pa - &pb)).sqrt();
        let den = dot4(&(&a - &b), &(&a - &b)).sqrt();
        assert!(num <= den + 1e-12, "criterion 5: fail — expansive at seed {seed}: {num} > {den}");
    }

    // per-axis total variation does not increase
    let tv_along = |arr: &Array4<f64>, axis: Axis| -> f64 {
        let n = arr.len_of(axis);
        (1..n)
            .map(|k| {
                let d = &arr.index_axis(axis, k) - &arr.index_axis(axis, k - 1);
                d.iter().map(|v| v.abs()).sum::<f64>()
            })
            .sum()
    };
    for seed in 0..50u64 {
        let mut r = ChaCha8Rng::seed_from_u64(2000 + seed);
        let a = Array4::from_shape_fn((4, 1, 10, 10), |_| r.gen::<f64>());
        let p = haar_tv_prox_raw(&a, 0.08, &w);
        for axis in [Axis(0), Axis(2), Axis(3)] {
            assert!(
                tv_along(&p, axis) <= tv_along(&a, axis) + 1e-12,
                "criterion 5: fail — TV increased along {axis:?} at seed {seed}"
            );
        }
    }
    println!("criterion 5: pass — prox identity, mean preservation, non-expansiveness, TV non-increase");
}

#[test]
fn criterion_06_solver_progress() {
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(6000 + seed);
        let h = rng.gen_range(6..=10);
        let w = rng.gen_range(6..=10);
        let op = ForwardOperator::new(
            random_psf(&mut rng, 1, 3),
            random_mask(&mut rng, 3, h, w),
        )
        .unwrap();
        let scene = random_stack(&mut rng, 3, 1, h, w);
        let y = forward_apply(&op, &scene).unwrap();

        let fc = SolverConfig { iterations: 300, log_every: 1, ..SolverConfig::fista_simulation() };
        let rep = fista_reconstruct(&y, &op, &fc).unwrap();
        let first = rep.objective_trace.first().unwrap().1;
        let last = rep.objective_trace.last().unwrap().1;
        assert!(
            last < first,
            "criterion 6: fail — FISTA objective did not improve at seed {seed}: {first} -> {last}"
        );

        // a tight inner CG keeps the consensus residual from flooring at the
        // inner-solve tolerance
        let ac = SolverConfig {
            iterations: 800,
            cg_tol: 1e-10,
            cg_max_iter: 200,
            ..SolverConfig::admm_defaults()
        };
        let rep = admm_reconstruct(&y, &op, &ac).unwrap();
        let r1 = rep.residual_trace[0];
        let rn = *rep.residual_trace.last().unwrap();
        assert!(
            rn <= 1e-2 * r1,
            "criterion 6: fail — ADMM residual at seed {seed}: {rn} vs first {r1}"
        );
    }
    println!("criterion 6: pass — FISTA endpoint improvement and ADMM residual decay on 20 instances");
}

#[test]
fn criterion_07_metric_conventions() {
    // MSE = 0.01 with peak 1 is exactly 20 dB
    let a = Array2::<f64>::zeros((16, 16));
    let b = Array2::from_elem((16, 16), 0.1);
    assert!((psnr(a.view(), b.view(), 1.0).unwrap() - 20.0).abs() <= 1e-12);

    let mut rng = ChaCha8Rng::seed_from_u64(700);
    let img = Array2::from_shape_fn((24, 24), |_| rng.gen::<f64>());
    assert!((ssim(img.view(), img.view(), 1.0).unwrap() - 1.0).abs() <= 1e-12);

    for (p, c) in [(3usize, 1usize), (4, 3)] {
        let pred = random_stack(&mut rng, p, c, 16, 16);
        let gt = random_stack(&mut rng, p, c, 16, 16);
        let rep = evaluate_stack(&pred, &gt, 1.0).unwrap();
        assert_eq!(rep.planes.len(), p * c);
        let mean_psnr = rep.planes.iter().map(|(_, v, _)| v).sum::<f64>() / (p * c) as f64;
        let mean_ssim = rep.planes.iter().map(|(_, _, v)| v).sum::<f64>() / (p * c) as f64;
        assert!((rep.aggregate_psnr - mean_psnr).abs() <= 1e-12);
        assert!((rep.aggregate_ssim - mean_ssim).abs() <= 1e-12);
    }
    println!("criterion 7: pass — PSNR/SSIM analytic cases and plane-mean aggregation");
}

#[test]
fn criterion_08_stokes_analytic() {
    // rows of (I0, I45, I90, I135) with expected (dolp, aolp)
    let cases: [([f64; 4], f64, f64); 3] = [
        ([1.0, 0.5, 0.0, 0.5], 1.0, 0.0),    // horizontally polarized
        ([0.5, 1.0, 0.5, 0.0], 1.0, 45.0),   // 45-degree polarized
        ([0.5, 0.5, 0.5, 0.5], 0.0, 0.0),    // unpolarized
    ];
    for (k, (intensities, dolp, aolp)) in cases.iter().enumerate() {
        let mut data = Array4::<f64>::zeros((4, 1, 2, 2));
        for (p, &v) in intensities.iter().enumerate() {
            data.index_axis_mut(Axis(0), p).fill(v);
        }
        let stack = PolarizationStack::new(data, vec![0, 45, 90, 135]).unwrap();
        let s = polarlens::polarimetry::stokes_from_intensities(&stack).unwrap();
        assert!(
            (s.dolp[(0, 0, 0)] - dolp).abs() <= 1e-12,
            "criterion 8: fail — case {k} dolp {} vs {dolp}",
            s.dolp[(0, 0, 0)]
        );
        assert!(
            (s.aolp[(0, 0, 0)] - aolp).abs() <= 1e-12,
            "criterion 8: fail — case {k} aolp {} vs {aolp}",
            s.aolp[(0, 0, 0)]
        );
    }
    println!("criterion 8: pass — analytic polarization states reproduce (dolp, aolp) exactly");
}

#[test]
fn criterion_09_geometry() {
    use polarlens::geom::{estimate_homography, warp_image, Homography};
    let truth = Homography::from_matrix(nalgebra::Matrix3::new(
        1.05, 0.02, -3.0, -0.01, 0.97, 2.0, 1e-4, -5e-5, 1.0,
    ))
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(900);
    let src: Vec<(f64, f64)> =
        (0..12).map(|_| (rng.gen::<f64>() * 100.0, rng.gen::<f64>() * 100.0)).collect();
    let dst: Vec<(f64, f64)> = src.iter().map(|&(x, y)| truth.apply(x, y)).collect();
    let est = estimate_homography(&src, &dst).unwrap();
    for i in 0..3 {
        for j in 0..3 {
            assert!(
                (est.matrix()[(i, j)] - truth.matrix()[(i, j)]).abs() <= 1e-6,
                "criterion 9: fail — homography entry ({i},{j})"
            );
        }
    }

    // warp round-trip on a smooth image: forward then inverse, compare interior
    let img = Array3::from_shape_fn((1, 64, 64), |(_, i, j)| {
        0.5 + 0.4 * ((i as f64 / 9.0).sin() * (j as f64 / 7.0).cos())
    });
    let h = Homography::from_matrix(nalgebra::Matrix3::new(
        1.0, 0.03, 2.5, -0.02, 1.0, -1.5, 0.0, 0.0, 1.0,
    ))
    .unwrap();
    let (fwd, _) = warp_image(&img, &h, (64, 64)).unwrap();
    let (back, cover) = warp_image(&fwd, &h.inverse().unwrap(), (64, 64)).unwrap();
    let margin = 8;
    let mut se = 0.0;
    let mut n = 0usize;
    for i in margin..64 - margin {
        for j in margin..64 - margin {
            if cover[(i, j)] {
                se += (back[(0, i, j)] - img[(0, i, j)]).powi(2);
                n += 1;
            }
        }
    }
    let p = 10.0 * (1.0f64 / (se / n as f64)).log10();
    assert!(p >= 40.0, "criterion 9: fail — round-trip interior PSNR {p:.2} dB");
    println!("criterion 9: pass — homography recovery 1e-6, warp round-trip {p:.1} dB");
}

#[test]
fn criterion_10_cli_determinism() {
    use std::process::Command;
    let bin = env!("CARGO_BIN_EXE_polarlens");
    let tmp = tempfile::tempdir().unwrap();
    let scene = smooth_synthetic_scene(4, 3, 32, 32).unwrap();
    let scene_path = tmp.path().join("scene.ptf");
    polarlens::ptf::save_stack(&scene, &scene_path).unwrap();
    let psf = polarlens::sim::synthetic_speckle_psf(3, 9, 9, 3).unwrap();
    let psf_path = tmp.path().join("psf.ptf");
    polarlens::ptf::save_psf(&psf, &psf_path).unwrap();

    let run = |out: &std::path::Path, threads: &str| {
        let st = Command::new(bin)
            .args(["simulate", "--mode", "color4", "--noise-sigma", "0.01", "--seed", "11"])
            .arg("--scene").arg(&scene_path)
            .arg("--psf").arg(&psf_path)
            .arg("--out").arg(out)
            .env("POLARLENS_THREADS", threads)
            .status()
            .unwrap();
        assert!(st.success());
        let st = Command::new(bin)
            .args(["reconstruct", "--mode", "color4", "--solver", "fista", "--iters", "40", "--seed", "11"])
            .arg("--measurement").arg(out.join("measurement.ptf"))
            .arg("--psf").arg(&psf_path)
            .arg("--out").arg(out)
            .env("POLARLENS_THREADS", threads)
            .status()
            .unwrap();
        assert!(st.success());
    };
    let (d1, d2, d3) = (tmp.path().join("a"), tmp.path().join("b"), tmp.path().join("c"));
    run(&d1, "1");
    run(&d2, "1");
    run(&d3, "4");
    for name in ["measurement.ptf", "estimate.ptf"] {
        let b1 = std::fs::read(d1.join(name)).unwrap();
        let b2 = std::fs::read(d2.join(name)).unwrap();
        let b3 = std::fs::read(d3.join(name)).unwrap();
        assert!(b1 == b2, "criterion 10: fail — {name} differs across identical runs");
        assert!(b1 == b3, "criterion 10: fail — {name} differs across POLARLENS_THREADS");
    }
    println!("criterion 10: pass — simulate + reconstruct byte-identical across reruns and thread counts");
}
