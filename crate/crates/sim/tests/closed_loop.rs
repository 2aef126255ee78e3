mod common;

use common::{reference, reference_path};
use ibvs_sim::engine::{observe, run, true_state, SceneState, StepStatus, Summary};
use ibvs_sim::export::trajectory_csv;
use ibvs_sim::rng::trial_rng;
use ibvs_sim::scenario::{self, ScenarioSpec};
use ibvs_sim::Mode;
use nalgebra::Matrix2;

fn sample_cov(xs: &[(f64, f64)]) -> Matrix2<f64> {
    let n = xs.len() as f64;
    let (ma, mb) = xs.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x / n, b + y / n));
    let mut c = Matrix2::zeros();
    for (x, y) in xs {
        let d = nalgebra::Vector2::new(x - ma, y - mb);
        c += d * d.transpose() / (n - 1.0);
    }
    c
}

#[test]
fn pixel_noise_has_the_configured_covariance() {
    let text = std::fs::read_to_string(reference_path()).unwrap().replace(
        "pixel_variance = 10.0",
        "feature_cov = [[10.0, 3.0], [3.0, 5.0]]\nobstacle_cov = [[4.0, -1.0], [-1.0, 8.0]]",
    );
    let scn = scenario::validate(&ScenarioSpec::from_toml_str(&text).unwrap()).unwrap();
    let truth = true_state(&scn, &SceneState::initial(&scn)).unwrap();
    let f = scn.intrinsics.f;
    let mut rng = trial_rng(11, 0);
    let (mut feat, mut obst, mut cross) = (Vec::new(), Vec::new(), Vec::new());
    for _ in 0..100_000 {
        let obs = observe(&scn, &truth, 0.0, &mut rng).unwrap();
        let d0 = (
            (obs.features[0].a - truth.features[0].a) * f,
            (obs.features[0].b - truth.features[0].b) * f,
        );
        let d1 = (obs.features[1].a - truth.features[1].a) * f;
        let o = obs.obstacle.unwrap().state.center;
        let t = truth.obstacle.unwrap().center;
        feat.push(d0);
        obst.push(((o.a - t.a) * f, (o.b - t.b) * f));
        cross.push((d0.0, d1));
    }
    let expect_f = Matrix2::new(10.0, 3.0, 3.0, 5.0);
    let expect_o = Matrix2::new(4.0, -1.0, -1.0, 8.0);
    let (cf, co) = (sample_cov(&feat), sample_cov(&obst));
    for (got, want) in [(cf, expect_f), (co, expect_o)] {
        for (g, w) in got.iter().zip(want.iter()) {
            assert!((g - w).abs() <= 0.03 * w.abs(), "{got} vs {want}");
        }
    }
    // Features draw independent noise.
    assert!(sample_cov(&cross)[(0, 1)].abs() < 0.1, "{}", sample_cov(&cross));
}

#[test]
fn noiseless_observation_is_the_true_state() {
    let scn = reference(Mode::Cbc, false);
    let truth = true_state(&scn, &SceneState::initial(&scn)).unwrap();
    let obs = observe(&scn, &truth, 0.0, &mut trial_rng(0, 0)).unwrap();
    assert_eq!(obs.features, truth.features);
    assert_eq!(obs.obstacle.unwrap().state, truth.obstacle.unwrap());
}

#[test]
fn runs_are_reproducible_from_the_seed() {
    let scn = reference(Mode::Cbc, true).with_seed(5);
    let a = trajectory_csv(&run(&scn));
    let b = trajectory_csv(&run(&scn));
    assert_eq!(a, b);
    let c = trajectory_csv(&run(&scn.with_seed(6)));
    assert_ne!(a, c);
}

#[test]
fn pixel_distance_and_barrier_agree_in_sign() {
    let log = run(&reference(Mode::Unfiltered, true));
    let f = 800.0;
    let mut seen_negative = false;
    for r in &log.records {
        let (Some(h), Some(dis), Some(dist)) = (r.min_h(), r.dis_px, r.min_dist) else {
            continue;
        };
        assert_eq!(h < 0.0, dis < 0.0, "step {}: h {h}, Dis {dis}", r.step);
        assert!((dis - f * dist).abs() <= 1e-9 * (1.0 + dis.abs()));
        seen_negative |= h < 0.0;
    }
    assert!(seen_negative, "the unfiltered reference run should occlude");
}

#[test]
fn summary_is_recomputable_from_the_records() {
    let log = run(&reference(Mode::Prcbc, true));
    let again = Summary::from_records(&log.records, log.summary.converged, log.summary.aborted.clone());
    assert_eq!(again, log.summary);
    let last = log.records.last().unwrap();
    assert_eq!(last.status, StepStatus::Terminal);
    assert_eq!(last.e_norm, log.summary.final_e_norm);
    assert_eq!(log.summary.steps + 1, log.records.len());
    assert!(log.summary.aborted.is_none());
}

#[test]
fn converges_without_obstacle_or_noise() {
    let mut spec = common::reference_spec();
    spec.obstacle = None;
    spec.noise = None;
    let scn = scenario::validate(&spec).unwrap();
    let log = run(&scn);
    assert!(log.summary.converged, "final |e| {}", log.summary.final_e_norm);
    assert!(log.summary.final_e_norm < spec.convergence_tol);
    assert!(log.summary.steps < spec.max_steps);
    assert!(log.records.iter().all(|r| r.h.is_none()));
}
