//! Repeated noisy trials over several obstacle start locations.

use std::fs;
use std::path::Path;

use ibvs_core::geometry::Point3;
use rayon::prelude::*;
use serde::Serialize;

use crate::engine::{run, TrajectoryLog};
use crate::error::SimError;
use crate::export::{fmt_f64, write_log};
use crate::scenario::Scenario;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialOutcome {
    pub location: usize,
    pub trial: usize,
    pub seed: u64,
    /// `min_t min_i Dis_i(t)` in pixels; `None` if the obstacle was never in
    /// front of the camera.
    pub dis: Option<f64>,
    pub violated: bool,
    pub converged: bool,
    pub aborted: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocationAggregate {
    pub location: usize,
    pub start: [f64; 3],
    pub trials: usize,
    pub mean_dis: f64,
    /// Sample variance (zero for a single trial).
    pub var_dis: f64,
    pub min_dis: f64,
    pub violations: usize,
    pub aborted: usize,
    pub converged: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub locations: Vec<LocationAggregate>,
    pub trials: Vec<TrialOutcome>,
}

impl SweepReport {
    /// Trials whose minimum distance to the obstacle edge stayed positive.
    pub fn trials_clear(&self) -> usize {
        self.trials.iter().filter(|t| t.dis.is_some_and(|d| d > 0.0)).count()
    }
}

fn outcome(log: &TrajectoryLog, location: usize, trial: usize) -> TrialOutcome {
    TrialOutcome {
        location,
        trial,
        seed: log.seed,
        dis: log.summary.min_dis_px,
        violated: log.summary.occlusion_steps > 0,
        converged: log.summary.converged,
        aborted: log.summary.aborted.clone(),
    }
}

/// Mean and sample variance of the per-trial `Dis`.
pub fn aggregate(location: usize, start: &Point3, trials: &[TrialOutcome]) -> LocationAggregate {
    let dis: Vec<f64> = trials.iter().filter_map(|t| t.dis).collect();
    let n = dis.len() as f64;
    let mean = if dis.is_empty() { f64::NAN } else { dis.iter().sum::<f64>() / n };
    let var = if dis.len() > 1 {
        dis.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (n - 1.0)
    } else if dis.len() == 1 {
        0.0
    } else {
        f64::NAN
    };
    LocationAggregate {
        location,
        start: [start.x, start.y, start.z],
        trials: trials.len(),
        mean_dis: mean,
        var_dis: var,
        min_dis: dis.iter().copied().fold(f64::INFINITY, f64::min),
        violations: trials.iter().filter(|t| t.violated).count(),
        aborted: trials.iter().filter(|t| t.aborted.is_some()).count(),
        converged: trials.iter().filter(|t| t.converged).count(),
    }
}

/// The scenario of trial `trial` at `location`; its seed is the template
/// seed plus the global trial index.
pub fn trial_scenario(
    template: &Scenario,
    locations: &[Point3],
    trials: usize,
    location: usize,
    trial: usize,
) -> Scenario {
    let index = (location * trials + trial) as u64;
    template
        .with_obstacle_start(locations[location])
        .with_seed(template.seed().wrapping_add(index))
}

/// Runs `trials` trials per location on `jobs` threads. Results are merged
/// by trial index, so the report does not depend on `jobs`.
pub fn sweep_logs(
    template: &Scenario,
    locations: &[Point3],
    trials: usize,
    jobs: usize,
) -> Result<Vec<TrajectoryLog>, SimError> {
    if trials == 0 {
        return Err(SimError::Config("trials per location must be at least 1".into()));
    }
    if locations.is_empty() {
        return Err(SimError::Config("at least one location is needed".into()));
    }
    if template.obstacle.is_none() {
        return Err(SimError::Config("a sweep needs an [obstacle] section".into()));
    }
    let occluded: Vec<String> = locations
        .iter()
        .enumerate()
        .filter(|(_, start)| template.with_obstacle_start(**start).starts_occluded())
        .map(|(l, _)| l.to_string())
        .collect();
    if !occluded.is_empty() {
        return Err(SimError::Config(format!(
            "initial state not occlusion-free at location(s) {}",
            occluded.join(", ")
        )));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| SimError::Config(e.to_string()))?;
    let total = locations.len() * trials;
    Ok(pool.install(|| {
        (0..total)
            .into_par_iter()
            .map(|g| run(&trial_scenario(template, locations, trials, g / trials, g % trials)))
            .collect()
    }))
}

pub fn report(logs: &[TrajectoryLog], locations: &[Point3], trials: usize) -> SweepReport {
    let outcomes: Vec<TrialOutcome> = logs
        .iter()
        .enumerate()
        .map(|(g, log)| outcome(log, g / trials, g % trials))
        .collect();
    let aggregates = locations
        .iter()
        .enumerate()
        .map(|(l, start)| aggregate(l, start, &outcomes[l * trials..(l + 1) * trials]))
        .collect();
    SweepReport {
        locations: aggregates,
        trials: outcomes,
    }
}

pub fn sweep(
    template: &Scenario,
    locations: &[Point3],
    trials: usize,
    jobs: usize,
) -> Result<SweepReport, SimError> {
    let logs = sweep_logs(template, locations, trials, jobs)?;
    Ok(report(&logs, locations, trials))
}

pub fn aggregate_csv(report: &SweepReport) -> String {
    let mut out = String::from(
        "location,x,y,z,trials,mean_dis,var_dis,min_dis,violations,aborted,converged\n",
    );
    for a in &report.locations {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            a.location,
            fmt_f64(a.start[0]),
            fmt_f64(a.start[1]),
            fmt_f64(a.start[2]),
            a.trials,
            fmt_f64(a.mean_dis),
            fmt_f64(a.var_dis),
            fmt_f64(a.min_dis),
            a.violations,
            a.aborted,
            a.converged
        ));
    }
    out
}

pub fn trials_csv(report: &SweepReport) -> String {
    let mut out = String::from("location,trial,seed,dis,violated,converged,aborted\n");
    for t in &report.trials {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            t.location,
            t.trial,
            t.seed,
            t.dis.map(fmt_f64).unwrap_or_default(),
            t.violated,
            t.converged,
            t.aborted.as_deref().unwrap_or("").replace(',', ";")
        ));
    }
    out
}

/// Writes the aggregate table, the per-trial table and every raw log.
pub fn write_sweep(
    logs: &[TrajectoryLog],
    report: &SweepReport,
    trials: usize,
    dir: &Path,
) -> Result<(), SimError> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("aggregate.csv"), aggregate_csv(report))?;
    fs::write(dir.join("trials.csv"), trials_csv(report))?;
    fs::write(
        dir.join("sweep.json"),
        serde_json::to_string_pretty(report).expect("report serializes"),
    )?;
    let raw = dir.join("trials");
    for (g, log) in logs.iter().enumerate() {
        write_log(log, &raw, &format!("loc{}_trial{:02}", g / trials, g % trials))?;
    }
    Ok(())
}
