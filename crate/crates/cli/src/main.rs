mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use wfl_core::acceptance::CRITERIA;
use wfl_core::{Error, Result};

use config::{RunConfig, Scenario};
use output::{close, row, Output};

#[derive(Parser)]
#[command(name = "wfl", version, about = "Quantile-particle measure-valued diffusion runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML run configuration.
    #[arg(long, global = true, env = "WFL_CONFIG")]
    config: Option<PathBuf>,

    /// Overrides the configured seed.
    #[arg(long, global = true, env = "WFL_SEED")]
    seed: Option<u64>,

    /// Overrides the configured number of paths.
    #[arg(long, global = true, env = "WFL_PATHS")]
    paths: Option<usize>,

    /// Worker threads (defaults to all cores).
    #[arg(long, global = true, env = "WFL_THREADS")]
    threads: Option<usize>,

    /// Output directory.
    #[arg(long, global = true, env = "WFL_OUT")]
    out: Option<PathBuf>,

    /// Run the built-in acceptance checks for this subcommand instead of a config.
    #[arg(long, global = true)]
    check: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Simulate trajectories and write per-particle summaries.
    Simulate,
    /// Compare empirical increment covariance with the kernel.
    Covariance,
    /// Invert a drift through the noise coefficients.
    Invert,
    /// Sweep the inf-convolution regularizer over ε.
    Regularize,
    /// Picard iteration for the conditional-law fixed point.
    Picard,
    /// Deterministic vs noisy Peano drift.
    Peano,
    /// Coalescing reference flow and its covariation.
    Arratia,
}

impl Command {
    fn scenario(self) -> Scenario {
        match self {
            Command::Simulate => Scenario::Simulate,
            Command::Covariance => Scenario::Covariance,
            Command::Invert => Scenario::Invert,
            Command::Regularize => Scenario::Regularize,
            Command::Picard => Scenario::Picard,
            Command::Peano => Scenario::Peano,
            Command::Arratia => Scenario::Arratia,
        }
    }

    fn criteria(self) -> &'static [usize] {
        match self {
            Command::Simulate => &[2, 3],
            Command::Covariance | Command::Arratia => &[1],
            Command::Invert => &[5, 6],
            Command::Regularize => &[7],
            Command::Picard => &[8, 10],
            Command::Peano => &[9],
        }
    }
}

const CHECK_SEED: u64 = 20240601;

fn check(cmd: Command, seed: Option<u64>) -> ExitCode {
    let seed = seed.unwrap_or(CHECK_SEED);
    let mut ok = true;
    for &id in cmd.criteria() {
        let c = CRITERIA[id - 1](seed);
        println!("{c}");
        ok &= c.passed;
    }
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(4)
    }
}

fn load(cli: &Cli) -> Result<RunConfig> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::Config("--config is required (or WFL_CONFIG)".into()))?;
    let mut run = RunConfig::load(path)?;
    let want = cli.command.scenario();
    if run.scenario != want {
        return Err(Error::Config(format!(
            "config scenario is {:?} but the subcommand is {:?}",
            run.scenario.name(),
            want.name()
        )));
    }
    if let Some(s) = cli.seed {
        run.seed = s;
    }
    if let Some(p) = cli.paths {
        run.paths = p;
    }
    run.validate()?;
    Ok(run)
}

fn execute(cmd: Command, run: &RunConfig, out: &Output) -> Result<()> {
    match cmd {
        Command::Simulate => commands::simulate(run, out),
        Command::Covariance => commands::covariance(run, out),
        Command::Invert => commands::invert(run, out),
        Command::Regularize => commands::regularize(run, out),
        Command::Picard => commands::picard(run, out),
        Command::Peano => commands::peano(run, out),
        Command::Arratia => commands::arratia(run, out),
    }
}

fn write_diagnostic(out: &Output, e: &Error) {
    let kind = format!("{e:?}");
    let kind = kind.split(|c: char| !c.is_alphanumeric()).next().unwrap_or("").to_string();
    let written = out
        .table("diagnostic.csv", &["kind", "detail"])
        .and_then(|mut w| row(&mut w, &[&kind, &e]).and_then(|_| close(w)));
    if let Err(w) = written {
        eprintln!("error: could not write diagnostic.csv: {w}");
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    if cli.check {
        return check(cli.command, cli.seed);
    }
    let run = match load(&cli) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let dir = cli.out.clone().or_else(|| run.out.clone()).unwrap_or_else(|| PathBuf::from("wfl-out"));
    let out = match Output::new(dir, &run.hash(), run.seed) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match execute(cli.command, &run, &out) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is_numerical() => {
            eprintln!("error: {e}");
            write_diagnostic(&out, &e);
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
