//! Acceptance criteria 1–7. Each prints one PASS/FAIL line; the binary exits
//! non-zero if any fails. A name fragment on the command line runs only the
//! matching criteria, e.g. `cargo test --test acceptance -- segmentation`.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use common::oracle::{closed_form_log_likelihood, log_value_error, riemann_log_likelihood};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rotcomp::io::*;
use rotcomp::likelihood::{
    build_table, calibrate_depth_prior, calibrate_noise, log_likelihood, TableAxes,
};
use rotcomp::metrics::rotation_error;
use rotcomp::motion_field::{angle_field, rotational_flow, to_angle_magnitude, translational_flow};
use rotcomp::synth::{corpus, depth_map, generate, sequence, CorpusParams, SceneSpec};
use rotcomp::{
    compensate, estimate, iou, segment, CameraIntrinsics, DepthMap, Error, EstimatorConfig, FloError, FlowField,
    FlowKind, IntegrationScheme, InverseDepthPrior, LikelihoodModel, Models, MotionMask, NoiseModel, PfmError,
    Pipeline, PipelineConfig, Rotation, RotationMode, ScalarMap, TableFileError, TableResolution, Translation,
};

// Criterion 1: noiseless recovery.
const CORPUS_SCENES: usize = 200;
const CORPUS_SEED: u64 = 20_240_601;
const ROTATION_TOL_DEG: f64 = 0.02;
const TRANSLATION_TOL_DEG: f64 = 0.5;
const MAX_SECONDS_PER_FRAME: f64 = 2.0;
// Criterion 2: noisy recovery.
const NOISY_ROTATION_TOL_DEG: f64 = 0.15;
// Criterion 3: moving objects.
const OBJECT_SCENES: usize = 50;
const OBJECT_SEED: u64 = 31;
const MAX_OBJECT_AREA: f64 = 0.30;
const LOOP_SEQUENCES: usize = 10;
const LOOP_FRAMES: usize = 10;
const LOOP_SETTLED_FROM: usize = 5;
const LOOP_SEED: u64 = 47;
const CLOSED_LOOP_FACTOR: f64 = 2.0;
// Criterion 4: likelihood oracles.
const ORACLE_TOL: f64 = 1e-4;
const ORACLE_STEPS: usize = 1_000_000;
const ORACLE_LATTICE_STEP: usize = 7;
const INTERP_TOL: f64 = 1e-2;
const INTERP_POINTS: usize = 1000;
/// Million-step midpoint value at (m = 0.01, Δθ = 0.3, g = 0.5) under the
/// default σ² and λ.
const FROZEN_REFERENCE: f64 = 3.378_193_165_849_350_7;
const FROZEN_TOL: f64 = 1e-6;
// Criterion 5: geometric invariants.
const PROPERTY_CASES: u32 = 64;
const ANGLE_TOL_RAD: f64 = 1e-9;
const SCALE_TOL: f64 = 1e-12;
const RATIO_RANGE: (f64, f64) = (3.5, 4.5);
// Criterion 6: segmentation.
const SEGMENT_SCENES: usize = 50;
const SEGMENT_SEED: u64 = 59;
const IOU_NOISELESS: f64 = 0.7;
const IOU_NOISY: f64 = 0.5;

struct Outcome {
    pass: bool,
    detail: String,
}

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.iter().any(|a| a == "--list") {
        return;
    }
    let filters: Vec<&String> = args.iter().filter(|a| !a.starts_with('-')).collect();
    let criteria: [(&str, fn() -> Outcome); 7] = [
        ("noiseless_recovery", noiseless_recovery),
        ("noisy_recovery", noisy_recovery),
        ("moving_object_robustness", moving_object_robustness),
        ("likelihood_oracles", likelihood_oracles),
        ("geometric_invariants", geometric_invariants),
        ("segmentation_sanity", segmentation_sanity),
        ("format_fidelity", format_fidelity),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        if !filters.is_empty() && !filters.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let out = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| Outcome {
            pass: false,
            detail: format!(
                "panicked: {}",
                e.downcast_ref::<String>().map(String::as_str).or(e.downcast_ref::<&str>().copied()).unwrap_or("?")
            ),
        });
        failed += usize::from(!out.pass);
        println!(
            "criterion {} {name}: {} [{:.0} s] {}",
            i + 1,
            if out.pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64(),
            out.detail
        );
    }
    if failed > 0 {
        std::process::exit(1);
    }
}

/// Mean per-axis rotation errors, mean translation error and worst axis, degrees.
#[derive(Debug, Default)]
struct ErrorStats {
    n: usize,
    sum: [f64; 4],
    worst: [f64; 4],
}

impl ErrorStats {
    fn add(&mut self, est: &rotcomp::CameraMotion, truth: &rotcomp::CameraMotion) {
        let e = rotation_error(est, truth);
        let v = [e.axes_deg[0], e.axes_deg[1], e.axes_deg[2], e.translation_deg];
        for k in 0..4 {
            self.sum[k] += v[k];
            self.worst[k] = self.worst[k].max(v[k]);
        }
        self.n += 1;
    }

    fn mean(&self) -> [f64; 4] {
        self.sum.map(|s| s / self.n as f64)
    }

    fn within(&self, rot: f64, trans: f64) -> bool {
        let m = self.mean();
        m[..3].iter().all(|&e| e <= rot) && m[3] <= trans
    }

    fn describe(&self) -> String {
        let m = self.mean();
        format!(
            "mean |ΔA| {:.5}° |ΔB| {:.5}° |ΔC| {:.5}° translation {:.4}° (worst {:.4}° / {:.3}°, n = {})",
            m[0],
            m[1],
            m[2],
            m[3],
            self.worst[..3].iter().copied().fold(0.0, f64::max),
            self.worst[3],
            self.n
        )
    }
}

/// Maximum-likelihood prior rate over the depth maps of `specs`.
fn corpus_rate(specs: &[SceneSpec]) -> f64 {
    let (mut pixels, mut inv_sum) = (0.0, 0.0);
    for s in specs {
        let d = depth_map(s).unwrap();
        let n = d.map().data().len() as f64;
        inv_sum += n / calibrate_depth_prior(&[d]).unwrap().rate;
        pixels += n;
    }
    pixels / inv_sum
}

/// Noise variance measured against ground truth on the first few scenes.
fn corpus_variance(specs: &[SceneSpec]) -> f64 {
    let (gt, noisy): (Vec<_>, Vec<_>) = specs
        .iter()
        .take(10)
        .map(|s| {
            let t = generate(s).unwrap();
            (t.gt_flow, t.noisy_flow)
        })
        .unzip();
    calibrate_noise(&gt, &noisy, specs[0].intr.diagonal()).unwrap().covariance_scale
}

fn models(intr: &CameraIntrinsics, var: f64, rate: f64) -> Models {
    let model = LikelihoodModel {
        noise: NoiseModel::new(var, intr.diagonal()).unwrap(),
        prior: InverseDepthPrior::new(rate).unwrap(),
        scheme: IntegrationScheme::default(),
    };
    Models::tabulated(model, TableResolution::default()).unwrap()
}

fn default_sigma() -> f64 {
    NoiseModel::DEFAULT_COVARIANCE_SCALE.sqrt()
}

/// Single-frame estimates with the given weights over `specs`.
fn recover(specs: &[SceneSpec], models: &Models, gt_masks: bool) -> (ErrorStats, f64) {
    let config = EstimatorConfig::default();
    let mut stats = ErrorStats::default();
    let mut seconds = 0.0;
    for s in specs {
        let t = generate(s).unwrap();
        let (w, h) = s.intr.dims();
        let mask = if gt_masks {
            MotionMask::from_moving_pixels(w, h, &t.gt_mask).unwrap()
        } else {
            MotionMask::uniform(w, h)
        };
        let start = Instant::now();
        let est = estimate(&t.noisy_flow, &s.intr, None, None, &mask, models, &config).unwrap();
        seconds += start.elapsed().as_secs_f64();
        stats.add(&est.motion, &s.motion);
    }
    let per_frame = seconds / specs.len() as f64;
    (stats, per_frame)
}

fn noiseless_corpus() -> Vec<SceneSpec> {
    corpus(CORPUS_SCENES, &CorpusParams::default(), CORPUS_SEED).unwrap()
}

fn noiseless_recovery() -> Outcome {
    let specs = noiseless_corpus();
    assert!(specs.iter().all(|s| s.objects.is_empty() && s.noise_sigma == 0.0));
    let intr = specs[0].intr;
    assert_eq!(intr.dims(), (320, 240));
    let m = models(&intr, corpus_variance(&specs), corpus_rate(&specs));
    let (stats, per_frame) = recover(&specs, &m, false);
    Outcome {
        pass: stats.within(ROTATION_TOL_DEG, TRANSLATION_TOL_DEG) && per_frame <= MAX_SECONDS_PER_FRAME,
        detail: format!(
            "{}; ≤ {ROTATION_TOL_DEG}° / {TRANSLATION_TOL_DEG}° required; {per_frame:.2} s/frame at 320x240, stride 2 (≤ {MAX_SECONDS_PER_FRAME} s)",
            stats.describe()
        ),
    }
}

fn noisy_recovery() -> Outcome {
    let sigma = default_sigma();
    let specs: Vec<SceneSpec> = noiseless_corpus()
        .into_iter()
        .map(|s| SceneSpec { noise_sigma: sigma, ..s })
        .collect();
    let intr = specs[0].intr;
    let m = models(&intr, NoiseModel::DEFAULT_COVARIANCE_SCALE, corpus_rate(&specs));
    let measured = corpus_variance(&specs);
    let (stats, _) = recover(&specs, &m, false);
    Outcome {
        pass: stats.within(NOISY_ROTATION_TOL_DEG, f64::INFINITY),
        detail: format!(
            "σ = {sigma:.5} (measured σ² {measured:.3e}); {}; rotation ≤ {NOISY_ROTATION_TOL_DEG}° required",
            stats.describe()
        ),
    }
}

fn one_object(seed: u64, n: usize) -> Vec<SceneSpec> {
    let params = CorpusParams { objects: (1, 1), ..CorpusParams::default() };
    corpus(n, &params, seed).unwrap()
}

fn moving_object_robustness() -> Outcome {
    let specs = one_object(OBJECT_SEED, OBJECT_SCENES);
    let intr = specs[0].intr;
    let area = |s: &SceneSpec| s.objects[0].area() as f64 / intr.pixel_count() as f64;
    let largest = specs.iter().map(area).fold(0.0, f64::max);
    let m = models(&intr, corpus_variance(&specs), corpus_rate(&specs));
    let (gt_stats, _) = recover(&specs, &m, true);

    let seqs = one_object(LOOP_SEED, LOOP_SEQUENCES);
    let lm = models(&intr, corpus_variance(&seqs), corpus_rate(&seqs));
    let config = PipelineConfig::default();
    let mut loop_stats = ErrorStats::default();
    for first in &seqs {
        let mut p = Pipeline::new();
        for (k, s) in sequence(first, LOOP_FRAMES).unwrap().iter().enumerate() {
            let t = generate(s).unwrap();
            let out = p.step(&t.noisy_flow, &s.intr, &lm, &config).unwrap();
            if k >= LOOP_SETTLED_FROM {
                loop_stats.add(&out.estimate.motion, &s.motion);
            }
        }
    }
    let (rot, trans) = (CLOSED_LOOP_FACTOR * ROTATION_TOL_DEG, CLOSED_LOOP_FACTOR * TRANSLATION_TOL_DEG);
    Outcome {
        pass: largest <= MAX_OBJECT_AREA
            && gt_stats.within(ROTATION_TOL_DEG, TRANSLATION_TOL_DEG)
            && loop_stats.within(rot, trans),
        detail: format!(
            "largest object {:.1}% of pixels; gt masks: {}; closed loop, frames {LOOP_SETTLED_FROM}-{}: {} (≤ {rot}° / {trans}°)",
            100.0 * largest,
            gt_stats.describe(),
            LOOP_FRAMES - 1,
            loop_stats.describe()
        ),
    }
}

fn likelihood_oracles() -> Outcome {
    let var = NoiseModel::DEFAULT_COVARIANCE_SCALE;
    let rate = InverseDepthPrior::DEFAULT_RATE;
    let scheme = IntegrationScheme::default();
    let direct = |m: f64, dt: f64, g: f64| log_likelihood(m, dt.cos(), g, var, rate, &scheme);
    let axes = TableAxes::standard(TableResolution::default()).unwrap();

    // Every node of the default grid against the closed form.
    let mut grid_worst: f64 = 0.0;
    for &m in &axes.m {
        for &dt in &axes.dtheta {
            for &g in &axes.g {
                grid_worst = grid_worst.max(log_value_error(direct(m, dt, g), closed_form_log_likelihood(m, dt, g, var, rate)));
            }
        }
    }
    // A sub-lattice against million-step quadrature, which also vouches for
    // the closed form.
    let (mut quad_worst, mut closed_vs_quad): (f64, f64) = (0.0, 0.0);
    for m in axes.m.iter().step_by(ORACLE_LATTICE_STEP) {
        for dt in axes.dtheta.iter().step_by(ORACLE_LATTICE_STEP) {
            for g in axes.g.iter().step_by(ORACLE_LATTICE_STEP) {
                let quad = riemann_log_likelihood(*m, *dt, *g, var, rate, ORACLE_STEPS);
                quad_worst = quad_worst.max(log_value_error(direct(*m, *dt, *g), quad));
                closed_vs_quad = closed_vs_quad.max(log_value_error(closed_form_log_likelihood(*m, *dt, *g, var, rate), quad));
            }
        }
    }
    let frozen = direct(0.01, 0.3, 0.5);
    let frozen_err = (frozen - FROZEN_REFERENCE).abs() / FROZEN_REFERENCE.abs();

    let noise = NoiseModel::new(var, 400.0).unwrap();
    let table = build_table(&noise, &InverseDepthPrior::new(rate).unwrap(), &scheme, TableResolution::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let lo = TableAxes::DEFAULT_MIN.log10();
    let hi = TableAxes::DEFAULT_MAX.log10();
    let mut interp_worst: f64 = 0.0;
    for _ in 0..INTERP_POINTS {
        let m = 10f64.powf(rng.random_range(lo..hi));
        let dt = rng.random_range(0.0..std::f64::consts::PI);
        let g = 10f64.powf(rng.random_range(lo..hi));
        interp_worst = interp_worst.max(log_value_error(table.query(m, dt, g), direct(m, dt, g)));
    }
    Outcome {
        pass: grid_worst <= ORACLE_TOL
            && quad_worst <= ORACLE_TOL
            && closed_vs_quad <= ORACLE_TOL
            && frozen_err <= FROZEN_TOL
            && interp_worst <= INTERP_TOL,
        detail: format!(
            "64^3 grid vs closed form {grid_worst:.2e}; {}^3 sub-lattice vs 10^6-step quadrature {quad_worst:.2e} (closed form {closed_vs_quad:.2e}); ≤ {ORACLE_TOL:e} required; frozen value {frozen:.10} (rel. {frozen_err:.1e}); interpolation at {INTERP_POINTS} points {interp_worst:.2e} (≤ {INTERP_TOL:e})",
            axes.m.iter().step_by(ORACLE_LATTICE_STEP).count()
        ),
    }
}

fn runner(seed: u8) -> TestRunner {
    let config = Config { cases: PROPERTY_CASES, failure_persistence: None, ..Config::default() };
    TestRunner::new_with_rng(config, TestRng::from_seed(RngAlgorithm::ChaCha, &[seed; 32]))
}

fn check<S: Strategy>(
    name: &str,
    seed: u8,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<(), String> {
    runner(seed).run(&strategy, test).map_err(|e| format!("{name}: {e}"))
}

const PW: usize = 24;
const PH: usize = 18;

fn any_intrinsics() -> impl Strategy<Value = CameraIntrinsics> {
    (20.0f64..400.0, 0.0f64..(PW - 1) as f64, 0.0f64..(PH - 1) as f64)
        .prop_map(|(f, cx, cy)| CameraIntrinsics::new(f, (cx, cy), PW, PH).unwrap())
}

fn any_translation() -> impl Strategy<Value = Translation> {
    (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0)
        .prop_filter("non-zero", |(u, v, w)| u * u + v * v + w * w > 1e-4)
        .prop_map(|(u, v, w)| Translation::from_vector(u, v, w).unwrap())
}

fn any_depth() -> impl Strategy<Value = DepthMap> {
    proptest::collection::vec(0.05f64..500.0, PW * PH)
        .prop_map(|z| DepthMap::new(ScalarMap::from_vec(PW, PH, z).unwrap()).unwrap())
}

fn geometric_invariants() -> Outcome {
    let angle = check(
        "angle field",
        1,
        (any_intrinsics(), any_translation(), any_depth()),
        |(intr, t, z)| {
            let dirs = angle_field(&intr, t).unwrap();
            let vt = to_angle_magnitude(&translational_flow(&intr, t, &z).unwrap());
            for i in 0..PW * PH {
                if dirs.magnitude[i] < 1e-6 * intr.focal_length {
                    continue;
                }
                let d = (dirs.angle(i).unwrap() - vt.angle(i).unwrap()).rem_euclid(std::f64::consts::TAU);
                prop_assert!(d.min(std::f64::consts::TAU - d) <= ANGLE_TOL_RAD);
            }
            Ok(())
        },
    );
    let round_trip = check(
        "compensation round trip",
        2,
        (any_intrinsics(), any_translation(), any_depth(), (-0.05f64..0.05, -0.05f64..0.05, -0.05f64..0.05)),
        |(intr, t, z, (a, b, c))| {
            let rot = Rotation::new(a, b, c);
            let vt = translational_flow(&intr, t, &z).unwrap();
            let vr = rotational_flow(&intr, rot, RotationMode::Approx).unwrap();
            let back = compensate(&vr.add(&vt, FlowKind::Full).unwrap(), &intr, rot, RotationMode::Approx).unwrap();
            // Exact up to the rounding of the one addition and one subtraction.
            for ((p, q), r) in back.data().iter().zip(vt.data()).zip(vr.data()) {
                for k in 0..2 {
                    prop_assert!((p[k] - q[k]).abs() <= 2.0 * f64::EPSILON * (q[k].abs() + r[k].abs()));
                }
            }
            Ok(())
        },
    );
    let ratio = check(
        "small-angle ratio",
        3,
        (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0).prop_filter("non-zero", |(a, b, c)| a * a + b * b + c * c > 1e-2),
        |(a, b, c)| {
            let intr = CameraIntrinsics::centered(500.0, 640, 480).unwrap();
            let n = (a * a + b * b + c * c).sqrt();
            let err = |deg: f64| {
                let r = deg.to_radians() / n;
                let rot = Rotation::new(a * r, b * r, c * r);
                let x = rotational_flow(&intr, rot, RotationMode::Approx).unwrap();
                let y = rotational_flow(&intr, rot, RotationMode::Exact).unwrap();
                x.data().iter().zip(y.data()).map(|(p, q)| (p[0] - q[0]).hypot(p[1] - q[1])).fold(0.0, f64::max)
            };
            let e = [err(0.4), err(0.2), err(0.1)];
            for w in e.windows(2) {
                prop_assert!((RATIO_RANGE.0..=RATIO_RANGE.1).contains(&(w[0] / w[1])), "{e:?}");
            }
            Ok(())
        },
    );
    let scale = check(
        "scale ambiguity",
        4,
        (any_intrinsics(), any_translation(), any_depth(), 0.01f64..100.0),
        |(intr, t, z, s)| {
            let base = translational_flow(&intr, t, &z).unwrap().scaled(s);
            let near = translational_flow(&intr, t, &z.scaled(1.0 / s).unwrap()).unwrap();
            for (p, q) in near.data().iter().zip(base.data()) {
                for k in 0..2 {
                    prop_assert!((p[k] - q[k]).abs() <= SCALE_TOL * p[k].abs().max(q[k].abs()).max(1.0));
                }
            }
            Ok(())
        },
    );
    let results = [angle, round_trip, ratio, scale];
    let failures: Vec<&String> = results.iter().filter_map(|r| r.as_ref().err()).collect();
    Outcome {
        pass: failures.is_empty(),
        detail: if failures.is_empty() {
            format!(
                "{PROPERTY_CASES} seeded cases each: angle field ≤ {ANGLE_TOL_RAD:e} rad, compensation exact to rounding, error ratio in [{}, {}], scale identity ≤ {SCALE_TOL:e}",
                RATIO_RANGE.0, RATIO_RANGE.1
            )
        } else {
            failures.iter().map(|s| s.as_str()).collect::<Vec<_>>().join("; ")
        },
    }
}

/// Per-scene IoU of segmentation at the true motion.
fn segmentation_ious(specs: &[SceneSpec], m: &Models) -> Vec<f64> {
    specs
        .iter()
        .map(|s| {
            let t = generate(s).unwrap();
            let comp = compensate(&t.noisy_flow, &s.intr, s.motion.rotation, s.rotation_mode).unwrap();
            let seg = segment(&comp, &s.intr, s.motion.translation, m, 0.5).unwrap();
            iou(&seg.binary, &t.gt_mask).unwrap()
        })
        .collect()
}

fn segmentation_sanity() -> Outcome {
    let params = CorpusParams::default();
    assert!(params.object_min_offset_deg >= 30.0 && params.object_speed_sigmas.0 >= 10.0);
    let clean = one_object(SEGMENT_SEED, SEGMENT_SCENES);
    let intr = clean[0].intr;
    let rate = corpus_rate(&clean);
    let clean_ious = segmentation_ious(&clean, &models(&intr, corpus_variance(&clean), rate));
    let noisy: Vec<SceneSpec> = clean
        .iter()
        .map(|s| SceneSpec { noise_sigma: default_sigma(), ..s.clone() })
        .collect();
    let noisy_ious = segmentation_ious(&noisy, &models(&intr, NoiseModel::DEFAULT_COVARIANCE_SCALE, rate));
    let min = |v: &[f64]| v.iter().copied().fold(f64::INFINITY, f64::min);
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    Outcome {
        pass: min(&clean_ious) >= IOU_NOISELESS && min(&noisy_ious) >= IOU_NOISY,
        detail: format!(
            "{SEGMENT_SCENES} scenes at the true motion: noiseless IoU min {:.3} mean {:.3} (≥ {IOU_NOISELESS}); default noise IoU min {:.3} mean {:.3} (≥ {IOU_NOISY})",
            min(&clean_ious),
            mean(&clean_ious),
            min(&noisy_ious),
            mean(&noisy_ious)
        ),
    }
}

/// Values exactly representable in f32, so `.flo` and PFM can hold them.
fn f32_values(n: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(any::<f32>().prop_filter("finite", |v| v.is_finite()), n)
        .prop_map(|v| v.into_iter().map(f64::from).collect())
}

fn format_fidelity() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let flo = check("flo round trip", 5, (1usize..16, 1usize..16).prop_flat_map(|(w, h)| (Just(w), Just(h), f32_values(2 * w * h))), |(w, h, v)| {
        let field = FlowField::from_vec(w, h, v.chunks(2).map(|c| [c[0], c[1]]).collect(), FlowKind::Observed).unwrap();
        let path = d.join("a.flo");
        write_flo(&field, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        let back = read_flo(&path).unwrap();
        prop_assert_eq!(back.data(), field.data());
        prop_assert_eq!(encode_flo(&back).unwrap(), bytes);
        Ok(())
    });
    let pfm = check("pfm round trip", 6, (1usize..16, 1usize..16).prop_flat_map(|(w, h)| (Just(w), Just(h), proptest::collection::vec(0.001f32..1e6, w * h))), |(w, h, z)| {
        let depth = DepthMap::new(ScalarMap::from_vec(w, h, z.into_iter().map(f64::from).collect()).unwrap()).unwrap();
        let path = d.join("a.pfm");
        write_pfm(&depth, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        let back = read_pfm(&path).unwrap();
        prop_assert_eq!(back.map().data(), depth.map().data());
        prop_assert_eq!(encode_pfm(&back, ByteOrder::Little), bytes);
        Ok(())
    });
    let table = {
        let t = build_table(
            &NoiseModel::new(NoiseModel::DEFAULT_COVARIANCE_SCALE, 400.0).unwrap(),
            &InverseDepthPrior::default(),
            &IntegrationScheme::default(),
            TableResolution { n_m: 12, n_dtheta: 10, n_g: 9 },
        )
        .unwrap();
        let path = d.join("t.bin");
        write_table(&t, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        let back = read_table(&path).unwrap();
        if back == t && encode_table(&back) == bytes {
            Ok(())
        } else {
            Err("table round trip: bytes differ".to_string())
        }
    };

    // Malformed inputs map to their error classes.
    let good_flo = encode_flo(&FlowField::zeros(3, 2, FlowKind::Observed)).unwrap();
    let mut huge_flo = FLO_MAGIC.to_le_bytes().to_vec();
    huge_flo.extend_from_slice(&1_000_000i32.to_le_bytes());
    huge_flo.extend_from_slice(&1_000_000i32.to_le_bytes());
    let good_table = encode_table(&read_table(&d.join("t.bin")).unwrap());
    let mut bad_magic_table = good_table.clone();
    bad_magic_table[0] ^= 0xff;
    let classified = [
        ("flo magic", matches!(decode_flo(&[0u8; 20]), Err(Error::Flo(FloError::BadMagic(_))))),
        ("flo truncated", matches!(decode_flo(&good_flo[..good_flo.len() - 1]), Err(Error::Flo(FloError::Truncated { .. })))),
        ("flo oversize", matches!(decode_flo(&huge_flo), Err(Error::Flo(FloError::DimensionOverflow { .. })))),
        ("pfm colour", matches!(decode_pfm(b"PF\n1 1\n-1.0\n\0\0\0\0\0\0\0\0\0\0\0\0"), Err(Error::Pfm(PfmError::NotGrayscale(_))))),
        ("pfm header", matches!(decode_pfm(b"Pf\n1 x\n-1.0\n"), Err(Error::Pfm(PfmError::MalformedHeader(_))))),
        ("pfm truncated", matches!(decode_pfm(b"Pf\n2 2\n-1.0\n\0\0\0\0"), Err(Error::Pfm(PfmError::Truncated { .. })))),
        ("table magic", matches!(decode_table(&bad_magic_table), Err(Error::Table(TableFileError::BadMagic)))),
        ("table truncated", matches!(decode_table(&good_table[..good_table.len() - 8]), Err(Error::Table(TableFileError::Truncated { .. })))),
    ];
    let misclassified: Vec<&str> = classified.iter().filter(|(_, ok)| !ok).map(|(n, _)| *n).collect();

    // Arbitrary bytes never panic a decoder.
    let fuzz = check("decoders on arbitrary bytes", 7, proptest::collection::vec(any::<u8>(), 0..96), |b| {
        let _ = decode_flo(&b);
        let _ = decode_pfm(&b);
        let _ = decode_table(&b);
        let mut flo = FLO_MAGIC.to_le_bytes().to_vec();
        flo.extend_from_slice(&b);
        let _ = decode_flo(&flo);
        let mut pfm = b"Pf\n".to_vec();
        pfm.extend_from_slice(&b);
        let _ = decode_pfm(&pfm);
        Ok(())
    });

    // Failed writes leave nothing behind; successful ones leave only the file.
    let before: Vec<_> = std::fs::read_dir(d).unwrap().map(|e| e.unwrap().file_name()).collect();
    let failed_writes = [
        write_flo(&FlowField::zeros(2, 2, FlowKind::Observed), &d.join("missing/a.flo")).is_err(),
        write_flo(&FlowField::zeros(0, 0, FlowKind::Observed), &d.join("empty.flo")).is_err(),
        write_pfm(&DepthMap::constant(2, 2, 1.0).unwrap(), &d.join("missing/a.pfm")).is_err(),
    ];
    let after: Vec<_> = std::fs::read_dir(d).unwrap().map(|e| e.unwrap().file_name()).collect();
    let clean = failed_writes.iter().all(|&e| e) && before == after;

    let mut problems: Vec<String> = [flo, pfm, table, fuzz].into_iter().filter_map(Result::err).collect();
    if !misclassified.is_empty() {
        problems.push(format!("misclassified: {}", misclassified.join(", ")));
    }
    if !clean {
        problems.push("a failed write left files behind".into());
    }
    Outcome {
        pass: problems.is_empty(),
        detail: if problems.is_empty() {
            format!(
                ".flo and PFM bit-exact over {PROPERTY_CASES} random fields, table bit-exact; {} malformed inputs classified; arbitrary bytes never panic; failed writes leave no files",
                classified.len()
            )
        } else {
            problems.join("; ")
        },
    }
}
