//! Acceptance suite: one test per release criterion, each printing an
//! `ACCEPTANCE <n> PASS|FAIL` line (visible with `--nocapture`).
//!
//! Run with `cargo test -p polar-cli --test acceptance -- --nocapture`.
//! Criterion 8 trains nine small models and needs roughly 25 minutes on one
//! desktop core; everything else finishes in seconds.

use std::f64::consts::{FRAC_PI_2, PI};
use std::path::Path;
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use polar_core::diffusion::{
    ablation_harness, forward_diffuse, loss_and_gradients, training_loss, AblationConfig,
    DiffusionModel, ModelConfig, NoiseSchedule, TargetRepresentation, Tensor,
};
use polar_core::image::{Mask, Plane, RadianceImage};
use polar_core::metrics::{ang_e, mange, psnr};
use polar_core::mosaic::{demosaic, mosaic, AnalyzerAngle, MosaicPattern};
use polar_core::oracle::{
    invert_diffuse, make_sphere, render_polar, rho_diffuse, Material, ReflectionMode, SceneLight,
};
use polar_core::stokes::{
    consistency_residual, decode, decompose_stack, encode, synthesize_stack, wrap_aolp,
    PolarStateMap, PolarizationStack,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use tempfile::tempdir;

fn criterion(n: u32, what: &str, body: impl FnOnce() + std::panic::UnwindSafe) {
    match std::panic::catch_unwind(body) {
        Ok(()) => println!("ACCEPTANCE {n} PASS {what}"),
        Err(payload) => {
            println!("ACCEPTANCE {n} FAIL {what}");
            std::panic::resume_unwind(payload);
        }
    }
}

/// Random fully-valid state on a w x h grid; P spans the full supported
/// range, angles stay inside the canonical interval.
fn random_state(w: usize, h: usize, seed: u64) -> PolarStateMap {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = w * h;
    let s0: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
    let dolp: Vec<f64> = (0..n).map(|_| rng.gen_range(1e-6..=1.0)).collect();
    let aolp: Vec<f64> = (0..n).map(|_| rng.gen_range(-FRAC_PI_2..FRAC_PI_2)).collect();
    PolarStateMap::new(
        RadianceImage::new(w, h, 1, s0).unwrap(),
        Plane::new(w, h, dolp).unwrap(),
        Plane::new(w, h, aolp).unwrap(),
        Mask::filled(w, h, true),
    )
    .unwrap()
}

#[test]
fn acceptance_1_intensity_model_round_trip() {
    criterion(1, "analyzer-model round trip on 1e5 random states", || {
        let (w, h) = (500, 200); // 100_000 states
        let state = random_state(w, h, 101);
        let start = Instant::now();
        let stack = synthesize_stack(&state).unwrap();
        let back = decompose_stack(&stack).unwrap();
        for px in 0..w * h {
            assert!(back.valid.data()[px], "pixel {px} lost validity");
            let dp = (back.dolp.data()[px] - state.dolp.data()[px]).abs();
            assert!(dp < 1e-9, "pixel {px}: DoLP error {dp}");
            let da = ang_e(state.aolp.data()[px], back.aolp.data()[px]).unwrap();
            assert!(da < 1e-9, "pixel {px}: AoLP error {da} rad");
        }
        assert!(start.elapsed() < Duration::from_secs(5), "took {:?}", start.elapsed());
    });
}

#[test]
fn acceptance_2_redundancy_identity() {
    criterion(2, "i0+i90 = i45+i135 within 4 ulp, residual <= 1e-12", || {
        let ulps = |a: f64, b: f64| (a.to_bits() as i64 - b.to_bits() as i64).unsigned_abs();
        for seed in [7, 8] {
            let state = random_state(160, 90, seed);
            let stack = synthesize_stack(&state).unwrap();
            for px in 0..160 * 90 {
                let lhs = stack.i0.data()[px] + stack.i90.data()[px];
                let rhs = stack.i45.data()[px] + stack.i135.data()[px];
                assert!(ulps(lhs, rhs) <= 4, "pixel {px}: {lhs} vs {rhs}");
            }
            assert!(consistency_residual(&stack) <= 1e-12);
        }
        // Color stacks satisfy the identity per channel too.
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 64 * 64;
        let s0 = RadianceImage::new(64, 64, 3, (0..3 * n).map(|_| rng.gen_range(0.0..1.0)).collect())
            .unwrap();
        let state = PolarStateMap::new(
            s0,
            Plane::new(64, 64, (0..n).map(|_| rng.gen_range(0.0..1.0)).collect()).unwrap(),
            Plane::new(64, 64, (0..n).map(|_| rng.gen_range(-1.5..1.5)).collect()).unwrap(),
            Mask::filled(64, 64, true),
        )
        .unwrap();
        let stack = synthesize_stack(&state).unwrap();
        for i in 0..3 * n {
            let lhs = stack.i0.data()[i] + stack.i90.data()[i];
            let rhs = stack.i45.data()[i] + stack.i135.data()[i];
            assert!(ulps(lhs, rhs) <= 4, "channel value {i}: {lhs} vs {rhs}");
        }
    });
}

#[test]
fn acceptance_3_encoding_identity_and_periodicity() {
    criterion(3, "sinusoidal encoding: identity, periodicity, pi-shift bits", || {
        // decode ∘ encode identity on random recoverable states.
        let state = random_state(128, 64, 31);
        let enc = encode(&state);
        let back = decode(&enc, state.s0.clone()).unwrap();
        for px in 0..128 * 64 {
            if state.dolp.data()[px] < 2e-3 {
                continue; // below the encoder's validity floor the angle is free
            }
            assert!(back.valid.data()[px]);
            let da = ang_e(state.aolp.data()[px], back.aolp.data()[px]).unwrap();
            assert!(da < 1e-9, "pixel {px}: angle error {da}");
            let dp = (back.dolp.data()[px] - state.dolp.data()[px]).abs();
            assert!(dp < 1e-9, "pixel {px}: DoLP error {dp}");
        }

        let single = |phi: f64| {
            PolarStateMap::new(
                RadianceImage::new(1, 1, 1, vec![1.0]).unwrap(),
                Plane::new(1, 1, vec![0.5]).unwrap(),
                Plane::new(1, 1, vec![phi]).unwrap(),
                Mask::filled(1, 1, true),
            )
            .unwrap()
        };

        // Periodicity to 1e-9 for arbitrary angles.
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        for _ in 0..10_000 {
            let phi = rng.gen_range(-FRAC_PI_2..FRAC_PI_2);
            let a = encode(&single(wrap_aolp(phi).unwrap()));
            let b = encode(&single(wrap_aolp(phi + PI).unwrap()));
            assert!((a.c.get(0, 0) - b.c.get(0, 0)).abs() < 1e-9);
            assert!((a.s.get(0, 0) - b.s.get(0, 0)).abs() < 1e-9);
        }

        // Bit-identical after canonicalization when φ + π is exactly
        // representable: sample the 2^-50 grid, where adding π is lossless.
        let step = 2f64.powi(-50);
        let limit = (FRAC_PI_2 / step) as i64;
        for _ in 0..100_000 {
            let phi = rng.gen_range(-limit + 1..=limit) as f64 * step;
            let shifted = phi + PI;
            assert_eq!(shifted - PI, phi, "grid point not exact");
            let (a, b) = (wrap_aolp(phi).unwrap(), wrap_aolp(shifted).unwrap());
            assert_eq!(a.to_bits(), b.to_bits());
            let ea = encode(&single(a));
            let eb = encode(&single(b));
            assert_eq!(ea.c.get(0, 0).to_bits(), eb.c.get(0, 0).to_bits());
            assert_eq!(ea.s.get(0, 0).to_bits(), eb.s.get(0, 0).to_bits());
            assert_eq!(ea.p_norm.get(0, 0).to_bits(), eb.p_norm.get(0, 0).to_bits());
        }
    });
}

#[test]
fn acceptance_4_angular_error_calibration() {
    criterion(4, "MAngE: 0 on identical, 45 deg on random, exact on offsets", || {
        let (w, h) = (1000, 1000);
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let draw = |rng: &mut ChaCha8Rng| -> Vec<f64> {
            (0..w * h).map(|_| rng.gen_range(-FRAC_PI_2..FRAC_PI_2)).collect()
        };
        let a = Plane::new(w, h, draw(&mut rng)).unwrap();
        let b = Plane::new(w, h, draw(&mut rng)).unwrap();
        let full = Mask::filled(w, h, true);

        assert_eq!(mange(&a, &a, &full).unwrap(), 0.0);

        // Independent uniforms: the wrap distance averages exactly 45°.
        let random_pair = mange(&a, &b, &full).unwrap();
        assert!((random_pair - 45.0).abs() < 0.5, "got {random_pair}");

        // A constant 10° offset survives the wrap exactly.
        let offset = 10f64.to_radians();
        let shifted: Vec<f64> =
            a.data().iter().map(|&phi| wrap_aolp(phi + offset).unwrap()).collect();
        let shifted = Plane::new(w, h, shifted).unwrap();
        let measured = mange(&a, &shifted, &full).unwrap();
        assert!((measured - 10.0).abs() < 1e-9, "got {measured}");
    });
}

#[test]
fn acceptance_5_fresnel_oracle_inversion() {
    criterion(5, "diffuse sphere normals invert within 0.5 deg; rho_d monotone", || {
        let start = Instant::now();
        let light = SceneLight { direction: [0.0, 0.0, 1.0], ambient: 0.05 };
        for eta in [1.3, 1.5, 1.8] {
            let normals = make_sphere(96, 0.9).unwrap();
            let material = Material { eta, mode: ReflectionMode::Diffuse, albedo: 0.8 };
            let state = render_polar(&normals, &material, &light).unwrap();
            let recovered = invert_diffuse(&state, &material).unwrap();
            let cos80 = 80f64.to_radians().cos();
            let mut sum = 0.0;
            let mut checked = 0usize;
            for i in 0..96 * 96 {
                if !recovered.mask.data()[i] || !normals.mask.data()[i] {
                    continue;
                }
                if normals.nz.data()[i] < cos80 {
                    continue; // audit zeniths up to 80 degrees
                }
                let dot = normals.nx.data()[i] * recovered.nx.data()[i]
                    + normals.ny.data()[i] * recovered.ny.data()[i]
                    + normals.nz.data()[i] * recovered.nz.data()[i];
                sum += dot.clamp(-1.0, 1.0).acos().to_degrees();
                checked += 1;
            }
            assert!(checked > 1000, "only {checked} pixels audited");
            let mean = sum / checked as f64;
            assert!(mean < 0.5, "eta {eta}: mean normal error {mean} deg");

            // Diffuse DoLP rises monotonically with zenith on a dense grid.
            let theta_max = 89.9f64.to_radians();
            let mut prev = -1.0;
            for k in 0..10_000 {
                let theta = theta_max * k as f64 / 9_999.0;
                let rho = rho_diffuse(theta, eta).unwrap();
                assert!(rho >= prev, "eta {eta}: rho_d dips at theta {theta}");
                prev = rho;
            }
        }
        assert!(start.elapsed() < Duration::from_secs(30), "took {:?}", start.elapsed());
    });
}

/// Separable Gaussian blur with edge replication; keeps values in [0, 1].
fn blur(plane: &[f64], w: usize, h: usize, sigma: f64) -> Vec<f64> {
    let radius = (4.0 * sigma).ceil() as i64;
    let kernel: Vec<f64> = (-radius..=radius)
        .map(|k| (-(k * k) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let norm: f64 = kernel.iter().sum();
    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (ki, kv) in kernel.iter().enumerate() {
                let sx = (x as i64 + ki as i64 - radius).clamp(0, w as i64 - 1) as usize;
                acc += kv * plane[y * w + sx];
            }
            tmp[y * w + x] = acc / norm;
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (ki, kv) in kernel.iter().enumerate() {
                let sy = (y as i64 + ki as i64 - radius).clamp(0, h as i64 - 1) as usize;
                acc += kv * tmp[sy * w + x];
            }
            out[y * w + x] = acc / norm;
        }
    }
    out
}

fn crop_interior(img: &RadianceImage, margin: usize) -> RadianceImage {
    let (w, h) = (img.width() - 2 * margin, img.height() - 2 * margin);
    let mut data = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            data.push(img.get(x + margin, y + margin, 0));
        }
    }
    RadianceImage::new(w, h, 1, data).unwrap()
}

#[test]
fn acceptance_6_demosaic_quality() {
    criterion(6, "demosaic: >40 dB on band-limited fields, exact knots/affine", || {
        let (w, h) = (96, 96);
        let pattern = MosaicPattern::default();

        // Band-limited random stack: white noise smoothed to sigma = 2 px.
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        let mut noise_channel = || {
            let raw: Vec<f64> = (0..w * h).map(|_| rng.gen_range(0.0..1.0)).collect();
            RadianceImage::new(w, h, 1, blur(&raw, w, h, 2.0)).unwrap()
        };
        let stack = PolarizationStack::new(
            noise_channel(),
            noise_channel(),
            noise_channel(),
            noise_channel(),
        )
        .unwrap();
        let frame = mosaic(&stack, pattern).unwrap();
        let est = demosaic(&frame).unwrap();
        for (got, want) in est.images().iter().zip(stack.images()) {
            let db =
                psnr(&crop_interior(got, 8), &crop_interior(want, 8), 1.0, None).unwrap();
            assert!(db > 40.0, "interior PSNR {db} dB");
        }

        // At its own lattice sites every channel reproduces the sample
        // exactly.
        for (angle, img) in
            [AnalyzerAngle::A0, AnalyzerAngle::A45, AnalyzerAngle::A90, AnalyzerAngle::A135]
                .into_iter()
                .zip(est.images())
        {
            let (prow, pcol) = pattern.position_of(angle);
            for y in (prow..h).step_by(2) {
                for x in (pcol..w).step_by(2) {
                    assert_eq!(img.get(x, y, 0), frame.get(x, y), "knot ({x},{y})");
                }
            }
        }

        // Bilinear interpolation reproduces affine fields exactly away from
        // the replicated border.
        let affine = |a: f64, bx: f64, by: f64| {
            let data =
                (0..w * h).map(|i| a + bx * (i % w) as f64 + by * (i / w) as f64).collect();
            RadianceImage::new(w, h, 1, data).unwrap()
        };
        let stack = PolarizationStack::new(
            affine(0.2, 0.003, 0.001),
            affine(0.1, 0.001, 0.004),
            affine(0.3, 0.002, 0.002),
            affine(0.25, 0.0005, 0.003),
        )
        .unwrap();
        let est = demosaic(&mosaic(&stack, pattern).unwrap()).unwrap();
        for (got, want) in est.images().iter().zip(stack.images()) {
            for y in 2..h - 2 {
                for x in 2..w - 2 {
                    let d = (got.get(x, y, 0) - want.get(x, y, 0)).abs();
                    assert!(d < 1e-12, "({x},{y}): affine error {d}");
                }
            }
        }
    });
}

#[test]
fn acceptance_7_diffusion_numerics() {
    criterion(7, "gradients vs finite differences, terminal marginals, unit loss", || {
        let schedule = NoiseSchedule::default_toy();

        // Full-model gradient check on a small instance covering every layer
        // type. The zero-initialized head is randomized so upstream
        // gradients stay alive.
        let config = ModelConfig {
            representation: TargetRepresentation::EncodedAolpDolp,
            width: 4,
            time_embed_dim: 4,
        };
        let mut model = DiffusionModel::new(config, 71).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(72);
        let randomized: Vec<f64> =
            (0..model.param_count()).map(|_| rng.gen_range(-0.3..0.3)).collect();
        model.set_param_values(&randomized).unwrap();

        let uniform = |rng: &mut ChaCha8Rng, n: usize, c: usize, s: usize| {
            let data = (0..n * c * s * s).map(|_| rng.gen_range(-1.0..1.0)).collect();
            Tensor::new(n, c, s, s, data).unwrap()
        };
        let cond = uniform(&mut rng, 2, 1, 6);
        let z0 = uniform(&mut rng, 2, 3, 6);
        let noise = {
            let data = (0..2 * 3 * 36).map(|_| rng.sample(StandardNormal)).collect();
            Tensor::new(2, 3, 6, 6, data).unwrap()
        };
        let ts = [3usize, 150];

        model.zero_grads();
        loss_and_gradients(&mut model, &cond, &z0, &ts, &noise, &schedule).unwrap();
        let analytic = model.grad_values();
        let base = model.param_values();
        let h = 1e-4;
        let mut worst = 0.0f64;
        for i in 0..base.len() {
            let mut probe = base.clone();
            probe[i] += h;
            model.set_param_values(&probe).unwrap();
            let lp = training_loss(&model, &cond, &z0, &ts, &noise, &schedule).unwrap();
            probe[i] = base[i] - h;
            model.set_param_values(&probe).unwrap();
            let lm = training_loss(&model, &cond, &z0, &ts, &noise, &schedule).unwrap();
            probe[i] = base[i];
            let fd = (lp - lm) / (2.0 * h);
            let denom = analytic[i].abs().max(fd.abs()).max(1e-6);
            worst = worst.max((analytic[i] - fd).abs() / denom);
        }
        assert!(worst < 1e-4, "worst relative gradient error {worst}");

        // Terminal marginal over 1e5 draws of (z0 ~ U(-1,1), eps ~ N(0,1)).
        let t = schedule.t_count();
        let mut rng = ChaCha8Rng::seed_from_u64(73);
        let n = 100_000;
        let (mut sum, mut sum_sq) = (0.0, 0.0);
        for _ in 0..n {
            let z0 = Tensor::new(1, 1, 1, 1, vec![rng.gen_range(-1.0..1.0)]).unwrap();
            let eps = Tensor::new(1, 1, 1, 1, vec![rng.sample(StandardNormal)]).unwrap();
            let zt = forward_diffuse(&z0, t, &eps, &schedule).unwrap();
            sum += zt.data()[0];
            sum_sq += zt.data()[0] * zt.data()[0];
        }
        let mean = sum / n as f64;
        let var = sum_sq / n as f64 - mean * mean;
        assert!(mean.abs() < 0.02, "terminal mean {mean}");
        assert!((0.95..=1.05).contains(&var), "terminal variance {var}");

        // The fresh model's zero head predicts 0, so the first loss is the
        // mean of squared standard normals: 1 within 2%.
        let fresh = DiffusionModel::new(
            ModelConfig::new(TargetRepresentation::EncodedAolpDolp),
            74,
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(75);
        let b = 32;
        let cond = uniform(&mut rng, b, 1, 16);
        let z0 = uniform(&mut rng, b, 3, 16);
        let noise = {
            let data = (0..b * 3 * 256).map(|_| rng.sample(StandardNormal)).collect();
            Tensor::new(b, 3, 16, 16, data).unwrap()
        };
        let ts: Vec<usize> = (0..b).map(|_| rng.gen_range(1..=t)).collect();
        let loss = training_loss(&fresh, &cond, &z0, &ts, &noise, &schedule).unwrap();
        assert!((loss - 1.0).abs() < 0.02, "zero-head loss {loss}");
    });
}

#[test]
fn acceptance_8_representation_ordering() {
    criterion(8, "equal-budget training orders encoded <= raw <= images4", || {
        let config = AblationConfig::default();
        let start = Instant::now();
        let mut progress = |line: &str| eprintln!("[acceptance 8] {line}");
        let table = ablation_harness(&config, &mut progress).unwrap();
        let elapsed = start.elapsed();

        let median = |repr| table.median_for(repr).expect("median present").mange_deg;
        let encoded = median(TargetRepresentation::EncodedAolpDolp);
        let raw = median(TargetRepresentation::RawAolpDolp);
        let images4 = median(TargetRepresentation::PolarImages4);
        eprintln!(
            "[acceptance 8] medians: encoded {encoded:.2} <= raw {raw:.2} <= images4 \
             {images4:.2}; untrained {:.2}; {elapsed:?}",
            table.untrained.mange_deg
        );
        assert!(
            encoded <= raw && raw <= images4,
            "ordering violated: {encoded} / {raw} / {images4}"
        );
        assert!(
            table.untrained.mange_deg - encoded >= 20.0,
            "trained gain only {} deg",
            table.untrained.mange_deg - encoded
        );
        assert!(elapsed < Duration::from_secs(1800), "took {elapsed:?}");
    });
}

fn polarcli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_polarcli"))
        .args(args)
        .output()
        .expect("binary launches")
}

fn run_ok(args: &[&str]) -> String {
    let out = polarcli(args);
    assert!(
        out.status.code() == Some(0),
        "{args:?} exited {:?}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).expect("utf8 stdout")
}

fn kv(stdout: &str, key: &str) -> String {
    stdout
        .lines()
        .find_map(|line| line.strip_prefix(&format!("{key}=")))
        .unwrap_or_else(|| panic!("no {key}= line in:\n{stdout}"))
        .to_string()
}

#[test]
fn acceptance_9_cli_round_trip() {
    criterion(9, "oracle -> synthesize -> decompose -> exact metrics via files", || {
        let tmp = tempdir().unwrap();
        let path = |name: &str| tmp.path().join(name).display().to_string();
        let (truth, stack, maps) = (path("truth"), path("stack"), path("maps"));

        run_ok(&["oracle", "--out", &truth, "--resolution", "64"]);
        run_ok(&["synthesize", &truth, "--stack", "--out", &stack]);
        run_ok(&["decompose", &stack, "--out", &maps]);

        // A scene measured against itself reports the exact sentinels.
        let report = run_ok(&["metrics", &maps, &maps]);
        assert_eq!(kv(&report, "mange"), "0.000000");
        assert_eq!(kv(&report, "mabse"), "0.000000");
        assert_eq!(kv(&report, "psnr_mean"), "inf");
        assert_eq!(kv(&report, "ssim_mean"), "1.000000");
        for angle in ["0", "45", "90", "135"] {
            assert_eq!(kv(&report, &format!("psnr_{angle}")), "inf");
            assert_eq!(kv(&report, &format!("ssim_{angle}")), "1.000000");
        }

        // The full loop only loses 32-bit storage precision.
        let loop_report = run_ok(&["metrics", &maps, &truth]);
        let drift: f64 = kv(&loop_report, "mange").parse().unwrap();
        assert!(drift < 1e-3, "round-trip MAngE {drift} deg");

        // File-format round trips are bit-exact.
        let pfm_path = Path::new(&stack).join("I000.pfm");
        let original = std::fs::read(&pfm_path).unwrap();
        let reread = polar_cli::io::pfm::read_pfm(&pfm_path).unwrap();
        let copy = tmp.path().join("copy.pfm");
        polar_cli::io::pfm::write_pfm(&copy, &reread).unwrap();
        assert_eq!(std::fs::read(&copy).unwrap(), original, "PFM bytes changed");

        let pgm_path = Path::new(&maps).join("valid.pgm");
        let original = std::fs::read(&pgm_path).unwrap();
        let reread = polar_cli::io::pnm::read_pnm(&pgm_path).unwrap();
        let copy = tmp.path().join("copy.pgm");
        polar_cli::io::pnm::write_pnm(&copy, &reread).unwrap();
        assert_eq!(std::fs::read(&copy).unwrap(), original, "PGM bytes changed");
    });
}
