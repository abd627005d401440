use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anneal_core::experiments::setup::ProblemSetup;
use anneal_core::experiments::{run_experiment, Config, ExperimentName, ExperimentSpec};
use anneal_core::schedule::validate_schedule;
use anneal_core::{build_admissible_schedule, Error};
use clap::{Args, Parser, Subcommand};

/// Annealed Langevin posterior sampling for linear inverse problems.
#[derive(Parser)]
#[command(name = "sampler", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build an admissible noise schedule and write `schedule.csv`.
    Schedule(Common),
    /// Run the configured sampler and write `run.json` plus `run_samples.csv`.
    Run(Common),
    /// Run a named experiment and write its tables and manifest.
    Experiment {
        /// One of: variance-curve, gaussian-posterior, rung-stability, ring,
        /// amplification, compressed-sensing, schedule-report.
        name: String,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    /// Flat `key = value` config file.
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
    /// Worker threads; defaults to one per core.
    #[arg(long)]
    threads: Option<usize>,
}

const EXIT_VALIDATION: u8 = 2;
const EXIT_DIVERGENCE: u8 = 3;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::from(if e.is_divergence() { EXIT_DIVERGENCE } else { EXIT_VALIDATION })
        }
    }
}

fn dispatch(command: Command) -> anneal_core::Result<()> {
    match command {
        Command::Schedule(c) => {
            init_threads(c.threads)?;
            schedule(&c)
        }
        Command::Run(c) => {
            init_threads(c.threads)?;
            run(&c)
        }
        Command::Experiment { name, common } => {
            init_threads(common.threads)?;
            let report = run_experiment(ExperimentSpec {
                name: name.parse::<ExperimentName>()?,
                config: Config::from_file(&common.config)?,
                seed: common.seed,
                out: common.out.clone(),
            })?;
            println!("{}", report.manifest.display());
            for t in &report.tables {
                println!("{}", t.display());
            }
            Ok(())
        }
    }
}

fn init_threads(threads: Option<usize>) -> anneal_core::Result<()> {
    if let Some(k) = threads {
        if k == 0 {
            return Err(Error::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .map_err(|e| Error::Config(format!("cannot start thread pool: {e}")))?;
    }
    Ok(())
}

fn load(c: &Common) -> anneal_core::Result<ProblemSetup> {
    let mut config = Config::from_file(&c.config)?;
    let setup = ProblemSetup::from_config(&mut config, c.seed)?;
    config.finish()?;
    Ok(setup)
}

fn write(dir: &Path, name: &str, body: &str) -> anneal_core::Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    std::fs::write(&path, body)?;
    println!("{}", path.display());
    Ok(path)
}

fn schedule(c: &Common) -> anneal_core::Result<()> {
    let setup = load(c)?;
    let ladder = build_admissible_schedule(&setup.model, &setup.run.schedule)?;
    let report = validate_schedule(&ladder);
    write(&c.out, "schedule.csv", &ladder.to_csv())?;
    let summary = serde_json::json!({
        "rungs": ladder.len(),
        "total_time": ladder.total_time(),
        "op_norm": ladder.op_norm(),
        "params": ladder.params(),
        "admissible": report.passes(),
        "clauses": report.clauses,
    });
    write(&c.out, "schedule.json", &serde_json::to_string_pretty(&summary)?)?;
    Ok(())
}

fn run(c: &Common) -> anneal_core::Result<()> {
    let setup = load(c)?;
    let (mut artifact, reconstruction) = setup.execute()?;
    std::fs::create_dir_all(&c.out)?;
    println!("{}", artifact.write(&c.out, "run")?.display());
    if let Some(x) = reconstruction {
        let header: Vec<String> = (1..=x.len()).map(|j| format!("x_{j}")).collect();
        let row: Vec<String> = x.iter().map(|v| format!("{v:.17e}")).collect();
        write(&c.out, "run_reconstruction.csv", &format!("{}\n{}\n", header.join(","), row.join(",")))?;
    }
    Ok(())
}
