//! End-to-end acceptance checks. Runs without the libtest harness so that
//! every criterion prints its verdict; exits non-zero if any fails.

mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use common::{locations_path, reference, reference_path};
use ibvs_sim::oracle::{
    chance_suite, jacobian_suite, quantile_suite, solver_suite, ChanceSetup, OracleCheck,
    QUANTILE_NUS, QUANTILE_SIGMAS,
};
use ibvs_sim::scenario::load_locations;
use ibvs_sim::sweep::sweep;
use ibvs_sim::{run, Mode};

struct Verdict {
    passed: bool,
    detail: String,
}

fn within(limit: Duration, elapsed: Duration, passed: bool, detail: String) -> Verdict {
    let on_time = elapsed <= limit;
    Verdict {
        passed: passed && on_time,
        detail: format!("{detail}; {:.1} s of {} s allowed", elapsed.as_secs_f64(), limit.as_secs()),
    }
}

fn oracle_verdict(checks: &[OracleCheck]) -> Verdict {
    let failed: Vec<String> = checks.iter().filter(|c| !c.passed).map(|c| c.to_string()).collect();
    let worst: Vec<String> = checks
        .iter()
        .map(|c| format!("{} {:.3e}/{:.1e}", c.name, c.measured, c.tolerance))
        .collect();
    Verdict {
        passed: failed.is_empty() && !checks.is_empty(),
        detail: if failed.is_empty() { worst.join(", ") } else { failed.join("; ") },
    }
}

fn noiseless_invariance() -> Verdict {
    let start = Instant::now();
    let cbc = run(&reference(Mode::Cbc, false));
    let open = run(&reference(Mode::Unfiltered, false));
    let min_cbc = cbc.summary.min_h.unwrap_or(f64::NAN);
    let min_open = open.summary.min_h.unwrap_or(f64::NAN);
    within(
        Duration::from_secs(10),
        start.elapsed(),
        min_cbc >= -1e-6 && min_open < 0.0,
        format!("filtered min h {min_cbc:.3e}, unfiltered min h {min_open:.3e}"),
    )
}

fn seeds(n: u64) -> impl Iterator<Item = u64> {
    let base = common::reference_spec().seed;
    (0..n).map(move |j| base + j)
}

fn noisy_cbc_occludes() -> Verdict {
    let start = Instant::now();
    let scn = reference(Mode::Cbc, true);
    let occluded = seeds(20).filter(|&s| run(&scn.with_seed(s)).summary.occlusion_steps > 0).count();
    within(
        Duration::from_secs(60),
        start.elapsed(),
        occluded >= 1,
        format!("{occluded}/20 noisy trials with an occlusion event"),
    )
}

fn probabilistic_filter_holds() -> Verdict {
    let start = Instant::now();
    let scn = reference(Mode::Prcbc, true).with_sigma(0.8).expect("noise section present");
    let good = seeds(20)
        .filter(|&s| {
            let log = run(&scn.with_seed(s));
            log.summary.occlusion_steps == 0 && log.summary.final_e_norm < 1e-2
        })
        .count();
    within(
        Duration::from_secs(120),
        start.elapsed(),
        good >= 18,
        format!("{good}/20 trials occlusion-free with final |e| < 1e-2"),
    )
}

fn sweep_protocol() -> Verdict {
    let start = Instant::now();
    let template = reference(Mode::Prcbc, true).with_sigma(0.9).expect("noise section present");
    let locs = load_locations(&locations_path()).expect("locations file");
    let rep = sweep(&template, &locs, 10, 1).expect("sweep runs");
    let means: Vec<f64> = rep.locations.iter().map(|a| a.mean_dis).collect();
    let clear = rep.trials_clear();
    within(
        Duration::from_secs(300),
        start.elapsed(),
        locs.len() == 5 && rep.trials.len() == 50 && means.iter().all(|m| *m > 0.0) && clear >= 45,
        format!(
            "mean Dis per location [{}] px, {clear}/50 trials clear",
            means.iter().map(|m| format!("{m:.2}")).collect::<Vec<_>>().join(", ")
        ),
    )
}

fn chance_oracle() -> Verdict {
    let setup = ChanceSetup::default();
    assert!(setup.draws >= 10_000 && setup.states >= 50);
    oracle_verdict(&chance_suite(0, &setup))
}

fn jacobian_oracle() -> Verdict {
    oracle_verdict(&jacobian_suite(0, 100, 1e-5))
}

fn solver_oracle() -> Verdict {
    oracle_verdict(&solver_suite(0, 1000, 200))
}

fn quantile_oracle() -> Verdict {
    oracle_verdict(&quantile_suite(&QUANTILE_SIGMAS, &QUANTILE_NUS))
}

fn ibvs(args: &[&str]) -> bool {
    Command::new(env!("CARGO_BIN_EXE_ibvs"))
        .args(args)
        .env_remove("IBVS_OUT_DIR")
        .output()
        .map(|o| o.status.success())
        .unwrap_or(false)
}

/// Every CSV below `dir`, keyed by relative path.
fn csv_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).into_iter().flatten().flatten() {
            let p = entry.path();
            if p.is_dir() {
                stack.push(p);
            } else if p.extension().is_some_and(|e| e == "csv") {
                let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.push((rel, fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn determinism() -> Verdict {
    let tmp = tempfile::tempdir().expect("temporary directory");
    let dir = |name: &str| tmp.path().join(name).to_string_lossy().into_owned();
    let scn = reference_path().to_string_lossy().into_owned();
    let locs = locations_path().to_string_lossy().into_owned();

    let mut ok = true;
    for name in ["run_a", "run_b"] {
        ok &= ibvs(&["run", "--scenario", &scn, "--mode", "prcbc", "--seed", "7", "--out", &dir(name)]);
    }
    for (name, jobs) in [("sweep_a", "1"), ("sweep_b", "1"), ("sweep_c", "4")] {
        ok &= ibvs(&[
            "sweep", "--scenario", &scn, "--locations", &locs, "--trials", "2", "--mode", "prcbc",
            "--sigma", "0.9", "--jobs", jobs, "--out", &dir(name),
        ]);
    }
    let read = |name: &str| csv_files(&tmp.path().join(name));
    let runs_equal = !read("run_a").is_empty() && read("run_a") == read("run_b");
    let repeat_equal = read("sweep_a") == read("sweep_b");
    let jobs_equal = read("sweep_a") == read("sweep_c");
    let files = read("sweep_a").len();
    Verdict {
        passed: ok && runs_equal && repeat_equal && jobs_equal && files == 12,
        detail: format!(
            "run repeat identical {runs_equal}, sweep repeat identical {repeat_equal}, \
             sweep --jobs 1 vs 4 identical {jobs_equal} ({files} CSV files)"
        ),
    }
}

type Criterion = (&'static str, fn() -> Verdict);

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("noiseless certificate keeps the features visible", noiseless_invariance),
        ("certificate without noise model occludes under noise", noisy_cbc_occludes),
        ("probabilistic certificate at 0.8 stays clear and converges", probabilistic_filter_holds),
        ("sweep at 0.9 over five obstacle starts", sweep_protocol),
        ("chance-constraint sampling oracle", chance_oracle),
        ("interaction matrices against finite differences", jacobian_oracle),
        ("filter programs against independent solvers", solver_oracle),
        ("probability-square quantile against quadrature", quantile_oracle),
        ("byte-identical outputs for identical inputs", determinism),
    ];
    let mut failures = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let v = check();
        failures += usize::from(!v.passed);
        println!(
            "[{}] criterion {}: {name}: {}",
            if v.passed { "PASS" } else { "FAIL" },
            i + 1,
            v.detail
        );
    }
    println!("acceptance: {}/{} passed", criteria.len() - failures, criteria.len());
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
