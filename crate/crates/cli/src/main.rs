//! `prioreplay`: run the synthetic-learner simulation or the self-check suites.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use problem_replay::{emit_csv, verify, Error, LearnerConfig, SchedulerConfig, Simulation};

const EXIT_FAILURE: u8 = 1;
const EXIT_IO: u8 = 2;

#[derive(Parser)]
#[command(
    name = "prioreplay",
    version,
    about = "Problem-level prioritized replay scheduler"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a training run and write telemetry.csv, checkpoint.txt and
    /// summary.txt to the output directory.
    ///
    /// Flags override values from --config, which override built-in
    /// defaults.
    Run(RunArgs),
    /// Run the brute-force self-check suites.
    Verify {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Prioritized,
    /// Identical settings with every batch drawn uniformly.
    UniformBaseline,
    Verify,
}

impl Mode {
    fn name(self) -> &'static str {
        match self {
            Mode::Prioritized => "prioritized",
            Mode::UniformBaseline => "uniform-baseline",
            Mode::Verify => "verify",
        }
    }
}

#[derive(clap::Args)]
struct RunArgs {
    /// Scheduler settings, `key = value` per line.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Learner and population settings, `key = value` per line.
    #[arg(long, value_name = "PATH")]
    learner_config: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Mode::Prioritized)]
    mode: Mode,
    #[arg(long, default_value_t = 250)]
    steps: u64,
    /// Overrides `rng_seed` from --config.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_name = "DIR", default_value = "out")]
    out: PathBuf,
    /// Write into an output directory that already has files.
    #[arg(long)]
    force: bool,
}

/// Exit code for a library error: I/O problems are 2, everything else 1.
fn code_for(err: &Error) -> u8 {
    if err.is_io() {
        EXIT_IO
    } else {
        EXIT_FAILURE
    }
}

fn fail(code: u8, msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(code)
}

fn cmd_verify(seed: u64) -> ExitCode {
    let results = verify::run_all(seed);
    let width = results.iter().map(|r| r.name.len()).max().unwrap_or(0);
    for r in &results {
        println!(
            "{:<width$}  {}  {:>8.2?}  {}",
            r.name,
            if r.passed { "pass" } else { "FAIL" },
            r.elapsed,
            r.detail
        );
    }
    if results.iter().all(|r| r.passed) {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_FAILURE)
    }
}

fn prepare_out(dir: &Path, force: bool) -> Result<(), String> {
    match fs::read_dir(dir) {
        Ok(mut entries) => {
            if entries.next().is_some() && !force {
                return Err(format!(
                    "{} is not empty; pass --force or choose a fresh path",
                    dir.display()
                ));
            }
            Ok(())
        }
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            fs::create_dir_all(dir).map_err(|e| format!("{}: {e}", dir.display()))
        }
        Err(e) => Err(format!("{}: {e}", dir.display())),
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), ExitCode> {
    fs::write(path, text).map_err(|e| fail(EXIT_IO, format!("{}: {e}", path.display())))
}

fn cmd_run(args: RunArgs) -> ExitCode {
    if args.mode == Mode::Verify {
        return cmd_verify(args.seed.unwrap_or(0));
    }
    let mut scfg = match &args.config {
        Some(path) => match SchedulerConfig::load(path) {
            Ok(c) => c,
            Err(e) => return fail(code_for(&e), e),
        },
        None => SchedulerConfig::default(),
    };
    let lcfg = match &args.learner_config {
        Some(path) => match LearnerConfig::load(path) {
            Ok(c) => c,
            Err(e) => return fail(code_for(&e), e),
        },
        None => LearnerConfig::default(),
    };
    if let Some(seed) = args.seed {
        scfg.rng_seed = seed;
    }
    if args.mode == Mode::UniformBaseline {
        scfg.exploration_rate = 1.0;
    }
    if let Err(errs) = scfg.validate() {
        for e in &errs {
            eprintln!("error: {e}");
        }
        return ExitCode::from(EXIT_FAILURE);
    }
    if let Err(e) = prepare_out(&args.out, args.force) {
        return fail(EXIT_IO, e);
    }

    let mut sim = match Simulation::new(scfg.clone(), lcfg.clone()) {
        Ok(s) => s,
        Err(e) => return fail(code_for(&e), e),
    };
    if let Err(e) = sim.run(args.steps) {
        return fail(code_for(&e), e);
    }

    if let Err(e) = emit_csv(sim.telemetry().samples(), &args.out.join("telemetry.csv")) {
        return fail(code_for(&e), e);
    }
    if let Err(code) = write_file(
        &args.out.join("checkpoint.txt"),
        &sim.scheduler().checkpoint_string(),
    ) {
        return code;
    }
    let s = sim.scheduler();
    let summary = format!(
        "mode = {}\nsteps = {}\nseed = {}\nproblems = {}\nactive = {}\nsolved = {}\nunsolved = {}\nunseen = {}\nvisited = {}\n",
        args.mode.name(),
        s.step(),
        scfg.rng_seed,
        s.num_problems(),
        s.active().len(),
        s.solved_pool().len(),
        s.unsolved_pool().len(),
        s.unseen_count(),
        sim.distinct_visited(),
    );
    if let Err(code) = write_file(&args.out.join("summary.txt"), &summary) {
        return code;
    }
    print!("{summary}");
    ExitCode::SUCCESS
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run(args) => cmd_run(args),
        Command::Verify { seed } => cmd_verify(seed),
    }
}
