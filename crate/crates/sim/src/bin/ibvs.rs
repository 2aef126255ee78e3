use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use ibvs_sim::oracle::{run_suite, Suite};
use ibvs_sim::scenario::{self, load_locations, ScenarioSpec};
use ibvs_sim::sweep::{report, sweep_logs, write_sweep};
use ibvs_sim::{export, run, Mode, SimError};

const EXIT_OK: u8 = 0;
const EXIT_CONFIG: u8 = 1;
const EXIT_ABORT: u8 = 2;
const EXIT_ORACLE: u8 = 3;

#[derive(Parser)]
#[command(name = "ibvs", version, about = "Occlusion-free visual servoing simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Cbc,
    Prcbc,
    Unfiltered,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Cbc => Mode::Cbc,
            ModeArg::Prcbc => Mode::Prcbc,
            ModeArg::Unfiltered => Mode::Unfiltered,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run one trial and write its trajectory CSV and summary JSON.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        /// Overrides the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, env = "IBVS_OUT_DIR", default_value = "out")]
        out: PathBuf,
        /// Overrides the scenario mode.
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
    },
    /// Repeat noisy trials over several obstacle start locations.
    Sweep {
        #[arg(long)]
        scenario: PathBuf,
        /// TOML file with `locations = [[x, y, z], ...]`.
        #[arg(long)]
        locations: PathBuf,
        #[arg(long, default_value_t = 10)]
        trials: usize,
        /// Confidence level of the probabilistic certificate.
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        #[arg(long, env = "IBVS_OUT_DIR", default_value = "out")]
        out: PathBuf,
    },
    /// Validate a scenario file and report every violated invariant.
    Check {
        #[arg(long)]
        scenario: PathBuf,
    },
    /// Run numerical cross-check suites.
    Oracle {
        /// jacobians, chance, solvers, quantile or all.
        #[arg(long)]
        suite: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn load(path: &Path, seed: Option<u64>, mode: Option<ModeArg>) -> Result<ibvs_sim::Scenario, SimError> {
    let mut scn = scenario::load(path)?;
    if let Some(seed) = seed {
        scn = scn.with_seed(seed);
    }
    if let Some(mode) = mode {
        let mut spec = scn.spec.clone();
        spec.mode = mode.into();
        scn = scenario::validate(&spec).map_err(SimError::Invalid)?.with_seed(scn.seed());
    }
    Ok(scn)
}

fn config_error(e: SimError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(EXIT_CONFIG)
}

fn cmd_run(path: &Path, seed: Option<u64>, out: &Path, mode: Option<ModeArg>) -> ExitCode {
    let scn = match load(path, seed, mode) {
        Ok(s) => s,
        Err(e) => return config_error(e),
    };
    let log = run(&scn);
    let stem = format!("{}_{}_seed{}", scn.spec.name, scn.mode(), scn.seed());
    if let Err(e) = export::write_log(&log, out, &stem) {
        eprintln!("error: {e}");
        return ExitCode::from(EXIT_CONFIG);
    }
    let s = &log.summary;
    println!(
        "{stem}: steps {} converged {} final |e| {:.3e} min Dis {} px occluded steps {} holds {}",
        s.steps,
        s.converged,
        s.final_e_norm,
        s.min_dis_px.map_or("n/a".into(), |d| format!("{d:.3}")),
        s.occlusion_steps,
        s.hold_steps
    );
    match &s.aborted {
        Some(reason) => {
            eprintln!("trial aborted: {reason}");
            ExitCode::from(EXIT_ABORT)
        }
        None => ExitCode::from(EXIT_OK),
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_sweep(
    path: &Path,
    locations: &Path,
    trials: usize,
    sigma: Option<f64>,
    jobs: usize,
    seed: Option<u64>,
    mode: Option<ModeArg>,
    out: &Path,
) -> ExitCode {
    if trials == 0 {
        return config_error(SimError::Config("--trials must be at least 1".into()));
    }
    if jobs == 0 {
        return config_error(SimError::Config("--jobs must be at least 1".into()));
    }
    let mut scn = match load(path, seed, mode) {
        Ok(s) => s,
        Err(e) => return config_error(e),
    };
    if let Some(sigma) = sigma {
        scn = match scn.with_sigma(sigma) {
            Ok(s) => s,
            Err(e) => return config_error(e),
        };
    }
    let locs = match load_locations(locations) {
        Ok(l) => l,
        Err(e) => return config_error(e),
    };
    let logs = match sweep_logs(&scn, &locs, trials, jobs) {
        Ok(l) => l,
        Err(e) => return config_error(e),
    };
    let rep = report(&logs, &locs, trials);
    if let Err(e) = write_sweep(&logs, &rep, trials, out) {
        eprintln!("error: {e}");
        return ExitCode::from(EXIT_CONFIG);
    }
    print!("{}", ibvs_sim::sweep::aggregate_csv(&rep));
    let aborted: Vec<_> = rep.trials.iter().filter(|t| t.aborted.is_some()).collect();
    for t in &aborted {
        eprintln!(
            "location {} trial {} aborted: {}",
            t.location,
            t.trial,
            t.aborted.as_deref().unwrap_or_default()
        );
    }
    if aborted.is_empty() {
        ExitCode::from(EXIT_OK)
    } else {
        ExitCode::from(EXIT_ABORT)
    }
}

fn cmd_check(path: &Path) -> ExitCode {
    let spec = match ScenarioSpec::load(path) {
        Ok(s) => s,
        Err(e) => return config_error(e),
    };
    match scenario::validate(&spec) {
        Ok(scn) => {
            println!(
                "{}: ok ({} features, mode {}, {} steps of {} s)",
                path.display(),
                scn.feature_count(),
                scn.mode(),
                scn.spec.max_steps,
                scn.dt()
            );
            ExitCode::from(EXIT_OK)
        }
        Err(problems) => {
            println!("{}: {} problem(s)", path.display(), problems.len());
            for p in problems {
                println!("  - {p}");
            }
            ExitCode::from(EXIT_CONFIG)
        }
    }
}

fn cmd_oracle(suite: &str, seed: u64) -> ExitCode {
    let suite: Suite = match suite.parse() {
        Ok(s) => s,
        Err(e) => return config_error(SimError::Config(e)),
    };
    let checks = run_suite(suite, seed);
    for c in &checks {
        println!("{c}");
    }
    if checks.iter().all(|c| c.passed) {
        ExitCode::from(EXIT_OK)
    } else {
        ExitCode::from(EXIT_ORACLE)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    ExitCode::from(EXIT_OK)
                }
                _ => ExitCode::from(EXIT_CONFIG),
            };
        }
    };
    match cli.command {
        Command::Run {
            scenario,
            seed,
            out,
            mode,
        } => cmd_run(&scenario, seed, &out, mode),
        Command::Sweep {
            scenario,
            locations,
            trials,
            sigma,
            jobs,
            seed,
            mode,
            out,
        } => cmd_sweep(&scenario, &locations, trials, sigma, jobs, seed, mode, &out),
        Command::Check { scenario } => cmd_check(&scenario),
        Command::Oracle { suite, seed } => cmd_oracle(&suite, seed),
    }
}
