//! CSV trajectories and JSON summaries.
//!
//! Floats are written with 17 significant digits so a log read back parses
//! to the same bits.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::engine::{Summary, TrajectoryLog};
use crate::error::SimError;
use crate::scenario::Scenario;

/// Shortest round-trip-safe text for a float (17 significant digits).
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

/// SHA-256 of the resolved scenario (with the effective seed and obstacle
/// schedule), hex encoded.
pub fn digest(scn: &Scenario) -> String {
    let mut hasher = Sha256::new();
    hasher.update(scn.spec.to_toml_string().as_bytes());
    if let Some(obs) = &scn.obstacle {
        for w in obs.waypoints() {
            hasher.update(fmt_f64(w.time).as_bytes());
            for c in w.center.iter() {
                hasher.update(fmt_f64(*c).as_bytes());
            }
        }
    }
    hasher
        .finalize()
        .iter()
        .fold(String::with_capacity(64), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
}

pub fn csv_header(features: usize) -> String {
    let mut cols = vec!["step".to_string(), "t".into(), "e_norm".into()];
    cols.extend((1..=features).map(|i| format!("h_{i}")));
    cols.push("min_dist".into());
    cols.push("dis_px".into());
    cols.extend((1..=6).map(|i| format!("vstar_{i}")));
    cols.extend((1..=6).map(|i| format!("vmpc_{i}")));
    cols.push("filter_status".into());
    cols.join(",")
}

pub fn trajectory_csv(log: &TrajectoryLog) -> String {
    let mut out = csv_header(log.features);
    out.push('\n');
    for r in &log.records {
        let mut row = vec![r.step.to_string(), fmt_f64(r.t), fmt_f64(r.e_norm)];
        match &r.h {
            Some(h) => row.extend(h.iter().copied().map(fmt_f64)),
            None => row.extend(std::iter::repeat_n(String::new(), log.features)),
        }
        row.push(fmt_opt(r.min_dist));
        row.push(fmt_opt(r.dis_px));
        row.extend(r.v_star.0.iter().copied().map(fmt_f64));
        row.extend(r.v_mpc.0.iter().copied().map(fmt_f64));
        row.push(r.status.as_str().into());
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

#[derive(Serialize)]
struct SummaryDocument<'a> {
    scenario: &'a str,
    digest: &'a str,
    mode: String,
    seed: u64,
    features: usize,
    summary: &'a Summary,
}

pub fn summary_json(log: &TrajectoryLog) -> String {
    let doc = SummaryDocument {
        scenario: &log.scenario,
        digest: &log.digest,
        mode: log.mode.to_string(),
        seed: log.seed,
        features: log.features,
        summary: &log.summary,
    };
    serde_json::to_string_pretty(&doc).expect("summary serializes")
}

/// Writes `<stem>.csv` and `<stem>.json` into `dir`.
pub fn write_log(log: &TrajectoryLog, dir: &Path, stem: &str) -> Result<(), SimError> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(format!("{stem}.csv")), trajectory_csv(log))?;
    fs::write(dir.join(format!("{stem}.json")), summary_json(log))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 123456.789, 0.0] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits(), "{s}");
        }
        assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
    }

    #[test]
    fn header_layout() {
        assert_eq!(
            csv_header(3),
            "step,t,e_norm,h_1,h_2,h_3,min_dist,dis_px,vstar_1,vstar_2,vstar_3,vstar_4,vstar_5,vstar_6,\
vmpc_1,vmpc_2,vmpc_3,vmpc_4,vmpc_5,vmpc_6,filter_status"
        );
    }
}
