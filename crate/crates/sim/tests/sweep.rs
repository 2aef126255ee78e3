mod common;

use ibvs_core::geometry::Point3;
use ibvs_sim::export::trajectory_csv;
use ibvs_sim::scenario;
use ibvs_sim::sweep::{aggregate_csv, report, sweep_logs, trials_csv};
use ibvs_sim::{Mode, Scenario, SimError};

fn short_template() -> Scenario {
    let mut spec = common::reference_spec();
    spec.mode = Mode::Prcbc;
    spec.max_steps = 60;
    scenario::validate(&spec).unwrap().with_sigma(0.9).unwrap()
}

fn locations() -> Vec<Point3> {
    vec![Point3::new(0.43, 0.23, 0.10), Point3::new(0.40, 0.22, 0.09)]
}

#[test]
fn worker_count_does_not_change_results() {
    let template = short_template();
    let locs = locations();
    let one = sweep_logs(&template, &locs, 3, 1).unwrap();
    let four = sweep_logs(&template, &locs, 3, 4).unwrap();
    let (r1, r4) = (report(&one, &locs, 3), report(&four, &locs, 3));
    assert_eq!(aggregate_csv(&r1), aggregate_csv(&r4));
    assert_eq!(trials_csv(&r1), trials_csv(&r4));
    for (a, b) in one.iter().zip(&four) {
        assert_eq!(trajectory_csv(a), trajectory_csv(b));
    }
}

#[test]
fn trial_seeds_follow_the_global_index() {
    let template = short_template().with_seed(100);
    let locs = locations();
    let logs = sweep_logs(&template, &locs, 2, 2).unwrap();
    let seeds: Vec<u64> = logs.iter().map(|l| l.seed).collect();
    assert_eq!(seeds, vec![100, 101, 102, 103]);
}

#[test]
fn aggregates_match_the_trials() {
    let locs = locations();
    let logs = sweep_logs(&short_template(), &locs, 3, 2).unwrap();
    let rep = report(&logs, &locs, 3);
    for (l, agg) in rep.locations.iter().enumerate() {
        let dis: Vec<f64> = rep.trials[l * 3..(l + 1) * 3].iter().map(|t| t.dis.unwrap()).collect();
        let mean = dis.iter().sum::<f64>() / 3.0;
        let var = dis.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / 2.0;
        assert!((agg.mean_dis - mean).abs() <= 1e-12 * mean.abs().max(1.0));
        assert!((agg.var_dis - var).abs() <= 1e-9 * var.max(1.0));
        assert_eq!(agg.min_dis, dis.iter().copied().fold(f64::INFINITY, f64::min));
        assert_eq!(agg.trials, 3);
    }
}

#[test]
fn rejects_bad_requests() {
    let template = short_template();
    assert!(matches!(sweep_logs(&template, &locations(), 0, 1), Err(SimError::Config(_))));
    assert!(matches!(sweep_logs(&template, &[], 2, 1), Err(SimError::Config(_))));
    // A start that already hides a feature.
    let err = sweep_logs(&template, &[Point3::new(0.45, 0.25, 0.08)], 1, 1).unwrap_err();
    assert!(err.to_string().contains("not occlusion-free"), "{err}");
}
