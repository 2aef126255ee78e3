use approx::assert_relative_eq;
use ibvs_core::geometry::{
    camera_to_world, denormalize, integrate_twist, normalize, project_normalized,
    project_to_pixel, world_to_camera, CameraIntrinsics, CameraPose, ImagePoint, Point3,
};
use ibvs_core::jacobians::feature_interaction;
use ibvs_core::Twist6;
use nalgebra::{Vector3, Vector6};
use proptest::prelude::*;

fn twist() -> impl Strategy<Value = Twist6> {
    prop::array::uniform6(-1.0..1.0f64).prop_map(Twist6::from)
}

fn pose() -> impl Strategy<Value = CameraPose> {
    (
        prop::array::uniform3(-3.0..3.0f64),
        prop::array::uniform3(-2.0..2.0f64),
    )
        .prop_map(|(rpy, t)| CameraPose::from_rpy(rpy[0], rpy[1], rpy[2], Vector3::from(t)))
}

proptest! {
    #![proptest_config(ProptestConfig {
        cases: 256,
        failure_persistence: None,
        ..ProptestConfig::default()
    })]

    #[test]
    fn pixel_round_trip(u in -2000.0..2000.0f64, v in -2000.0..2000.0f64,
                        f in 100.0..2000.0f64, px in 0.0..1000.0f64, py in 0.0..1000.0f64) {
        let k = CameraIntrinsics::new(f, px, py).unwrap();
        let back = denormalize(&normalize(&ImagePoint::new(u, v), &k), &k);
        prop_assert!((back.u - u).abs() <= 1e-9 * (1.0 + u.abs()));
        prop_assert!((back.v - v).abs() <= 1e-9 * (1.0 + v.abs()));
    }

    #[test]
    fn frame_round_trip(pose in pose(), p in prop::array::uniform3(-5.0..5.0f64)) {
        let p = Point3::from(p);
        let back = camera_to_world(&pose, &world_to_camera(&pose, &p));
        prop_assert!((back - p).norm() <= 1e-12 * (1.0 + p.coords.norm()));
    }

    #[test]
    fn projection_agrees_with_pixels(x in -1.0..1.0f64, y in -1.0..1.0f64, z in 0.1..5.0f64) {
        let k = CameraIntrinsics::new(800.0, 512.0, 512.0).unwrap();
        let p = Point3::new(x, y, z);
        let (s, depth) = project_normalized(&p).unwrap();
        let (q, _) = project_to_pixel(&p, &k).unwrap();
        prop_assert_eq!(depth, z);
        let n = normalize(&q, &k);
        prop_assert!((n.a - s.a).abs() <= 1e-12 && (n.b - s.b).abs() <= 1e-12);
    }

    /// A constant body twist is a one-parameter subgroup: two steps of `dt`
    /// land where one step of `2·dt` does.
    #[test]
    fn constant_twist_composes(pose in pose(), v in twist(), dt in 0.0..0.5f64) {
        let two = integrate_twist(&integrate_twist(&pose, &v, dt), &v, dt);
        let one = integrate_twist(&pose, &v, 2.0 * dt);
        prop_assert!((two.rotation() - one.rotation()).amax() <= 1e-12);
        prop_assert!((two.translation() - one.translation()).amax() <= 1e-12);
    }

    #[test]
    fn opposite_twist_returns(pose in pose(), v in twist(), dt in 0.0..1.0f64) {
        let neg = Twist6(-v.0);
        let back = integrate_twist(&integrate_twist(&pose, &v, dt), &neg, dt);
        prop_assert!((back.rotation() - pose.rotation()).amax() <= 1e-12);
        prop_assert!((back.translation() - pose.translation()).amax() <= 1e-12);
    }
}

#[test]
fn rotation_stays_orthonormal_over_long_runs() {
    let v = Twist6::from([0.3, -0.2, 0.1, 0.7, -1.3, 0.9]);
    let mut pose = CameraPose::identity();
    for k in 0..10_000 {
        let w = Twist6(v.0 * (1.0 + 0.5 * (k as f64 * 0.01).sin()));
        pose = integrate_twist(&pose, &w, 0.05);
    }
    assert!(pose.orthonormality_error() <= 1e-12, "{}", pose.orthonormality_error());
    assert_relative_eq!(pose.rotation().determinant(), 1.0, epsilon = 1e-12);
}

/// The first-order prediction `s + dt·L·V` of a projected point is off by
/// O(dt²), so halving the step quarters the error.
#[test]
fn feature_prediction_is_first_order() {
    let p_world = Point3::new(0.15, -0.1, 0.9);
    let v = Twist6(Vector6::new(0.2, -0.1, 0.3, 0.4, -0.2, 0.5));
    let pose = CameraPose::identity();
    let (s0, z0) = project_normalized(&world_to_camera(&pose, &p_world)).unwrap();
    let l = feature_interaction(&s0, z0).unwrap();
    let rate = l * v.0;
    let err = |dt: f64| {
        let moved = integrate_twist(&pose, &v, dt);
        let (s, _) = project_normalized(&world_to_camera(&moved, &p_world)).unwrap();
        ((s.a - s0.a - dt * rate[0]).powi(2) + (s.b - s0.b - dt * rate[1]).powi(2)).sqrt()
    };
    for dt in [1e-2, 5e-3, 2.5e-3] {
        let ratio = err(dt) / err(dt / 2.0);
        assert!((ratio - 4.0).abs() < 0.2, "dt {dt}: ratio {ratio}");
    }
}
