//! Acceptance suite: one test per release criterion, covering estimation
//! quality across sensor combinations, association robustness under clutter,
//! exactness of the assignment solver, Jacobian correctness, angle algebra,
//! detector equivariance, filter consistency and run determinism.
//!
//! Each test asserts its criterion at the stated tolerance and prints one
//! `PASS` line with the measured numbers (visible with `--nocapture`).

use nalgebra::{DMatrix, DVector, Point2, Point3, Vector2};
use poleloc::association::{hungarian_solve, CostMatrix};
use poleloc::filter::{
    bearing_model, gnss_model, gyro_model, lidar_pair_model, process_model, wheel_model,
    VehicleState,
};
use poleloc::geometry::{angular_diff, wrap_angle, Extrinsics};
use poleloc::lidar::{detect_poles, DetectorParams, PointCloud};
use poleloc::metrics::quantile;
use poleloc::run::{run_on_sim, run_scenario, summary_json, RunConfig, RunOutput, SensorCombo};
use poleloc::sim::scenario::{LidarMode, Scenario};
use poleloc::sim::synth::synthesize;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use std::time::Instant;

const SEEDS: std::ops::RangeInclusive<u64> = 1..=10;

fn run(sc: &Scenario, sensors: SensorCombo, seed: u64, gating: bool) -> RunOutput {
    run_scenario(sc, &RunConfig { sensors, seed: Some(seed), gating }).expect("run failed")
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Mean position RMS of one sensor combination over all seeds.
fn mean_rms(sc: &Scenario, sensors: SensorCombo) -> f64 {
    let rms: Vec<f64> =
        SEEDS.map(|s| run(sc, sensors, s, true).summary.errors.rms_position_m).collect();
    mean(&rms)
}

#[test]
fn sensor_combinations_rank_as_expected() {
    let sc = Scenario::builtin("compiegne-mini").unwrap();
    let start = Instant::now();
    let dr = mean_rms(&sc, SensorCombo::GnssDr);
    let front = mean_rms(&sc, SensorCombo::Front);
    let all = mean_rms(&sc, SensorCombo::AllCameras);
    let lidar = mean_rms(&sc, SensorCombo::Lidar);
    let elapsed = start.elapsed().as_secs_f64();
    assert!(front < dr, "front {front:.3} must beat gnss_dr {dr:.3}");
    assert!(all < dr, "all_cameras {all:.3} must beat gnss_dr {dr:.3}");
    assert!(lidar < dr, "lidar {lidar:.3} must beat gnss_dr {dr:.3}");
    assert!(all <= 0.5 * dr, "all_cameras {all:.3} must at least halve gnss_dr {dr:.3}");
    assert!(elapsed < 60.0, "40 runs took {elapsed:.1} s, budget is 60 s");
    println!(
        "PASS: mean position RMS over 10 seeds [m]: gnss_dr {dr:.3} > front {front:.3}, \
         all_cameras {all:.3} (<= {:.3}), lidar {lidar:.3}; elapsed {elapsed:.1} s < 60 s",
        0.5 * dr
    );
}

/// Median of `|f(sample)|` over an error series.
fn median_abs(out: &RunOutput, f: impl Fn(&poleloc::metrics::ErrorSample) -> f64) -> f64 {
    let mut v: Vec<f64> = out.errors.samples.iter().map(|s| f(s).abs()).collect();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    quantile(&v, 0.5)
}

#[test]
fn camera_geometry_targets_the_matching_error_axis() {
    let sc = Scenario::builtin("compiegne-mini").unwrap();
    let (mut dr_ct, mut dr_at, mut front_ct, mut lr_at) = (vec![], vec![], vec![], vec![]);
    for seed in SEEDS {
        let dr = run(&sc, SensorCombo::GnssDr, seed, true);
        dr_ct.push(median_abs(&dr, |s| s.cross_track));
        dr_at.push(median_abs(&dr, |s| s.along_track));
        front_ct.push(median_abs(&run(&sc, SensorCombo::Front, seed, true), |s| s.cross_track));
        lr_at.push(median_abs(&run(&sc, SensorCombo::LeftRight, seed, true), |s| s.along_track));
    }
    let (dr_ct, dr_at) = (mean(&dr_ct), mean(&dr_at));
    let (front_ct, lr_at) = (mean(&front_ct), mean(&lr_at));
    assert!(
        front_ct <= 0.6 * dr_ct,
        "front median |cross-track| {front_ct:.3} must be <= 60% of gnss_dr {dr_ct:.3}"
    );
    assert!(
        lr_at <= 0.6 * dr_at,
        "left_right median |along-track| {lr_at:.3} must be <= 60% of gnss_dr {dr_at:.3}"
    );
    println!(
        "PASS: front cuts median |cross-track| {dr_ct:.3} -> {front_ct:.3} m ({:.0}%), \
         left_right cuts median |along-track| {dr_at:.3} -> {lr_at:.3} m ({:.0}%)",
        100.0 * (1.0 - front_ct / dr_ct),
        100.0 * (1.0 - lr_at / dr_at)
    );
}

#[test]
fn gnss_bias_is_recovered_by_cameras() {
    let sc = Scenario::builtin("compiegne-mini").unwrap();
    let truth = (sc.gnss.bias[0], sc.gnss.bias[1]);
    let mut converged = 0;
    let mut worst: f64 = 0.0;
    for seed in SEEDS {
        let out = run(&sc, SensorCombo::AllCameras, seed, true);
        let last = out.estimates.last().unwrap().state;
        let (ex, ey) = ((last.bias_x - truth.0).abs(), (last.bias_y - truth.1).abs());
        worst = worst.max(ex.max(ey));
        if ex <= 0.5 && ey <= 0.5 {
            converged += 1;
        }
    }
    assert!(converged >= 8, "bias converged on only {converged}/10 seeds");
    println!(
        "PASS: bias ({}, {}) m recovered within 0.5 m/axis on {converged}/10 seeds \
         (worst axis error {worst:.2} m)",
        truth.0, truth.1
    );
}

#[test]
fn gating_prevents_clutter_miss_association() {
    let sc = Scenario::builtin("compiegne-mini-clutter").unwrap();
    let (mut worse_ungated, mut worse_gated) = (0, 0);
    for seed in SEEDS {
        let sim = synthesize(&sc, Some(seed)).unwrap();
        let rms = |sensors, gating| {
            run_on_sim(sim.clone(), &RunConfig { sensors, seed: Some(seed), gating })
                .map_or(f64::INFINITY, |o| o.summary.errors.rms_position_m)
        };
        let dr = rms(SensorCombo::GnssDr, true);
        assert!(dr.is_finite(), "dead-reckoning baseline failed on seed {seed}");
        if rms(SensorCombo::Lidar, false) > dr {
            worse_ungated += 1;
        }
        if rms(SensorCombo::Lidar, true) > dr {
            worse_gated += 1;
        }
    }
    assert!(worse_ungated >= 1, "ungated clutter never hurt: 0/10 seeds worse than gnss_dr");
    assert_eq!(worse_gated, 0, "gated lidar lost to gnss_dr on {worse_gated}/10 seeds");
    println!(
        "PASS: under clutter, ungated lidar is worse than gnss_dr on {worse_ungated}/10 seeds, \
         gated on {worse_gated}/10"
    );
}

/// Minimum assignment cost by enumerating every injective mapping of the
/// smaller dimension, summing matched costs in row order.
fn brute_force_min(c: &CostMatrix) -> f64 {
    let (n, m) = (c.rows(), c.cols());
    let row_major = n <= m;
    let (small, large) = if row_major { (n, m) } else { (m, n) };
    let mut used = vec![false; large];
    let mut pairs = Vec::with_capacity(small);
    let mut best = f64::INFINITY;
    fn recurse(
        i: usize,
        small: usize,
        large: usize,
        row_major: bool,
        c: &CostMatrix,
        used: &mut [bool],
        pairs: &mut Vec<(usize, usize)>,
        best: &mut f64,
    ) {
        if i == small {
            let mut by_row = pairs.clone();
            by_row.sort_unstable_by_key(|p| p.0);
            let total: f64 = by_row.iter().map(|&(r, col)| c.at(r, col)).sum();
            if total < *best {
                *best = total;
            }
            return;
        }
        for j in 0..large {
            if !used[j] {
                used[j] = true;
                pairs.push(if row_major { (i, j) } else { (j, i) });
                recurse(i + 1, small, large, row_major, c, used, pairs, best);
                pairs.pop();
                used[j] = false;
            }
        }
    }
    recurse(0, small, large, row_major, c, &mut used, &mut pairs, &mut best);
    best
}

#[test]
fn assignment_matches_brute_force() {
    let mut rng = StdRng::seed_from_u64(0xA55160);
    for case in 0..1000 {
        let rows = rng.random_range(1..=6);
        let cols = rng.random_range(1..=6);
        let mut c = CostMatrix::new(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                c.set(i, j, rng.random_range(0.0..10.0));
            }
        }
        let solved = hungarian_solve(&c);
        let expected = brute_force_min(&c);
        assert_eq!(
            solved.total_cost, expected,
            "case {case} ({rows}x{cols}): solver {} vs brute force {expected}",
            solved.total_cost
        );
        assert_eq!(solved.pairs.len(), rows.min(cols), "case {case}: not a full matching");
    }
    println!("PASS: 1000 random assignments up to 6x6 match the brute-force minimum exactly");
}

fn random_state(rng: &mut StdRng) -> VehicleState {
    VehicleState {
        x: rng.random_range(-100.0..100.0),
        y: rng.random_range(-100.0..100.0),
        theta: rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
        v: rng.random_range(0.0..25.0),
        yaw_rate: rng.random_range(-1.0..1.0),
        bias_x: rng.random_range(-5.0..5.0),
        bias_y: rng.random_range(-5.0..5.0),
    }
}

/// Central finite-difference Jacobian of `f`, with angular rows differenced
/// on the circle.
fn fd_jacobian(
    f: &dyn Fn(&VehicleState) -> DVector<f64>,
    x: &VehicleState,
    angular: &[bool],
    h: f64,
) -> DMatrix<f64> {
    let rows = angular.len();
    let mut jac = DMatrix::zeros(rows, 7);
    for j in 0..7 {
        let mut plus = x.as_vector();
        let mut minus = x.as_vector();
        plus[j] += h;
        minus[j] -= h;
        let fp = f(&VehicleState::from_vector(&plus));
        let fm = f(&VehicleState::from_vector(&minus));
        for i in 0..rows {
            let d = if angular[i] { angular_diff(fp[i], fm[i]) } else { fp[i] - fm[i] };
            jac[(i, j)] = d / (2.0 * h);
        }
    }
    jac
}

/// Largest entry deviation relative to the Jacobian's own scale (floored
/// at 1 so near-zero matrices are judged absolutely).
fn jac_error(analytic: &DMatrix<f64>, fd: &DMatrix<f64>) -> f64 {
    let scale = analytic.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    (analytic - fd).iter().fold(0.0f64, |m, v| m.max(v.abs())) / scale
}

#[test]
fn model_jacobians_match_finite_differences() {
    let mut rng = StdRng::seed_from_u64(0x1ACB);
    let h = 1e-5;
    let tol = 1e-6;
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let s = random_state(&mut rng);
        let dt = rng.random_range(0.01..0.2);
        let lever = Vector2::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
        let track = rng.random_range(1.0..2.5);
        let ext = Extrinsics::new(
            rng.random_range(-2.0..2.0),
            rng.random_range(-2.0..2.0),
            rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
        );
        let range = rng.random_range(5.0..40.0);
        let azimuth = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
        let lm = Point2::new(s.x + range * azimuth.cos(), s.y + range * azimuth.sin());

        let (_, f_jac) = process_model(&s, dt);
        let fd = fd_jacobian(
            &|x| DVector::from_column_slice(process_model(x, dt).0.as_vector().as_slice()),
            &s,
            &[false, false, true, false, false, false, false],
            h,
        );
        worst = worst.max(jac_error(&DMatrix::from_fn(7, 7, |i, j| f_jac[(i, j)]), &fd));

        let (_, jac) = gnss_model(&s, lever);
        let fd = fd_jacobian(
            &|x| {
                let (p, _) = gnss_model(x, lever);
                DVector::from_column_slice(&[p.x, p.y])
            },
            &s,
            &[false, false],
            h,
        );
        worst = worst.max(jac_error(&jac, &fd));

        let (_, jac) = wheel_model(&s, track);
        let fd = fd_jacobian(
            &|x| {
                let (w, _) = wheel_model(x, track);
                DVector::from_column_slice(&[w.x, w.y])
            },
            &s,
            &[false, false],
            h,
        );
        worst = worst.max(jac_error(&jac, &fd));

        let (_, jac) = gyro_model(&s);
        let fd = fd_jacobian(&|x| DVector::from_element(1, gyro_model(x).0), &s, &[false], h);
        worst = worst.max(jac_error(&jac, &fd));

        let (_, jac) = lidar_pair_model(&s, &ext, lm);
        let fd = fd_jacobian(
            &|x| {
                let (p, _) = lidar_pair_model(x, &ext, lm);
                DVector::from_column_slice(&[p.x, p.y])
            },
            &s,
            &[false, false],
            h,
        );
        worst = worst.max(jac_error(&jac, &fd));

        let (_, jac) = bearing_model(&s, &ext, lm).unwrap();
        let fd = fd_jacobian(
            &|x| DVector::from_element(1, bearing_model(x, &ext, lm).unwrap().0),
            &s,
            &[true],
            h,
        );
        worst = worst.max(jac_error(&jac, &fd));
    }
    assert!(worst <= tol, "worst Jacobian deviation {worst:.2e} exceeds {tol:.0e}");
    println!(
        "PASS: process + 5 observation Jacobians match central differences at 100 states each \
         (worst relative deviation {worst:.2e} <= 1e-6)"
    );
}

#[test]
fn angle_identities_hold() {
    let mut rng = StdRng::seed_from_u64(0x47412E5);
    for i in 0..10_000 {
        // Mix broad magnitudes with values hugging the wrap seam.
        let a = match i % 3 {
            0 => rng.random_range(-1e4..1e4),
            1 => rng.random_range(-10.0..10.0),
            _ => std::f64::consts::PI * (1.0 + rng.random_range(-1e-9..1e-9)),
        };
        let w = wrap_angle(a);
        assert!(
            (-std::f64::consts::PI..=std::f64::consts::PI).contains(&w),
            "wrap_angle({a}) = {w} out of range"
        );
        assert_eq!(wrap_angle(w), w, "wrap_angle not idempotent at {a}");
        assert_eq!(angular_diff(a, a), 0.0, "self-difference nonzero at {a}");
    }
    println!("PASS: 10000 angle checks: wrapped range, idempotence and zero self-difference hold exactly");
}

#[test]
fn detector_centroids_rotate_with_the_cloud() {
    let mut sc = Scenario::builtin("compiegne-mini").unwrap();
    sc.lidar.mode = LidarMode::Cloud;
    sc.lidar.sigma = 0.02;
    let sim = synthesize(&sc, None).unwrap();
    let cloud = match &sim.log.lidar[120].data {
        poleloc::sim::synth::LidarData::Cloud(c) => c.clone(),
        _ => unreachable!("cloud mode"),
    };
    let params = DetectorParams::default();
    let (base, _) = detect_poles(&cloud, &params).unwrap();
    assert!(base.detections.len() >= 2, "frame must contain several poles");

    let mut rng = StdRng::seed_from_u64(0xD07);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let theta: f64 = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
        let (sin_t, cos_t) = theta.sin_cos();
        let rotated = PointCloud {
            points: cloud
                .points
                .iter()
                .map(|p| Point3::new(cos_t * p.x - sin_t * p.y, sin_t * p.x + cos_t * p.y, p.z))
                .collect(),
        };
        let (found, _) = detect_poles(&rotated, &params).unwrap();
        assert_eq!(found.detections.len(), base.detections.len(), "count changed at {theta}");
        for b in &base.detections {
            let target =
                Point2::new(cos_t * b.position.x - sin_t * b.position.y, sin_t * b.position.x + cos_t * b.position.y);
            let nearest = found
                .detections
                .iter()
                .map(|d| (d.position - target).norm())
                .fold(f64::INFINITY, f64::min);
            worst = worst.max(nearest);
        }
    }
    assert!(worst < 1e-9, "worst centroid drift {worst:.2e} m over 20 rotations");
    println!("PASS: detector centroids follow 20 random cloud rotations within {worst:.2e} m < 1e-9 m");
}

#[test]
fn nees_stays_inside_the_consistency_band() {
    let sc = Scenario::builtin("nees-gentle").unwrap();
    let fractions: Vec<f64> = SEEDS
        .map(|s| run(&sc, SensorCombo::AllCameras, s, true).summary.errors.nees_in_band_fraction)
        .collect();
    let avg = mean(&fractions);
    assert!(
        (0.90..=0.99).contains(&avg),
        "mean in-band NEES fraction {avg:.3} outside [0.90, 0.99]; per-seed {fractions:.3?}"
    );
    println!("PASS: mean 2-dof NEES in-band fraction over 10 seeds is {avg:.3}, inside [0.90, 0.99]");
}

#[test]
fn summaries_are_deterministic() {
    let cases = [
        ("compiegne-mini", SensorCombo::LidarCameras, 5),
        ("compiegne-mini-clutter", SensorCombo::Lidar, 3),
        ("nees-gentle", SensorCombo::AllCameras, 11),
    ];
    for (name, sensors, seed) in cases {
        let sc = Scenario::builtin(name).unwrap();
        let a = summary_json(&run(&sc, sensors, seed, true).summary).unwrap();
        let b = summary_json(&run(&sc, sensors, seed, true).summary).unwrap();
        assert_eq!(a, b, "{name}/{} seed {seed} not byte-identical", sensors.label());
    }
    println!("PASS: repeated runs of 3 configurations produce byte-identical summary JSON");
}
