mod commands;
mod config;

use std::collections::HashMap;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use noether_lab::{ModelKind, SamplingConfig};
use rayon::prelude::*;

use commands::{Outcome, CONFIG};
use config::Scenario;

const SEED_ENV: &str = "NOETHER_LAB_SEED";

#[derive(Parser)]
#[command(name = "noether-lab", version, about = "Symmetry certification and stationary-action scenarios")]
struct Cli {
    /// Seed for sampling and perturbations; overrides the scenario file.
    /// Falls back to $NOETHER_LAB_SEED when neither is given.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Root output directory; each scenario writes to `<out>/<name>/`.
    #[arg(long, global = true, default_value = "noether-out")]
    out: PathBuf,

    /// Scenario files processed in parallel.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check every generator direction of the symmetry group.
    Certify {
        #[arg(long = "config", required = true)]
        configs: Vec<PathBuf>,
    },
    /// Solve the fixed-endpoint stationarity problem.
    Solve {
        #[arg(long = "config", required = true)]
        configs: Vec<PathBuf>,
    },
    /// Decide whether two Lagrangians differ by a full time-derivative.
    Equiv {
        #[arg(long = "config", required = true)]
        configs: Vec<PathBuf>,
    },
    /// Exponentiate a generator literal, e.g. `rotation axis=3`.
    Exp {
        generator: String,
        #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
        s: f64,
        #[arg(long, default_value = "rel")]
        model: ModelKind,
    },
    /// Proper time along the polyline through the given events.
    ProperTime {
        #[arg(required = true, num_args = 2..)]
        events: Vec<String>,
    },
}

type Runner = fn(&Scenario, u64, &std::path::Path) -> Outcome;

fn env_seed() -> Result<Option<u64>, String> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v.trim().parse().map(Some).map_err(|_| format!("{SEED_ENV}='{v}' is not an unsigned integer")),
        Err(_) => Ok(None),
    }
}

fn run_scenarios(cli: &Cli, configs: &[PathBuf], run: Runner) -> u8 {
    let fallback = match env_seed() {
        Ok(s) => s.unwrap_or(SamplingConfig::default().seed),
        Err(e) => {
            eprintln!("{e}");
            return CONFIG;
        }
    };
    let mut parsed = Vec::new();
    let mut code = 0;
    for path in configs {
        let file = path.display().to_string();
        let parsed_one = std::fs::read_to_string(path)
            .map_err(|e| format!("{file}: {e}"))
            .and_then(|src| config::parse(&file, &src).map_err(|e| e.to_string()));
        match parsed_one {
            Ok(sc) => parsed.push(sc),
            Err(e) => {
                eprintln!("{e}");
                code = CONFIG;
            }
        }
    }
    let dirs: Vec<PathBuf> = parsed
        .iter()
        .map(|sc| sc.out.as_ref().map_or_else(|| cli.out.join(&sc.name), PathBuf::from))
        .collect();
    let mut seen = HashMap::new();
    for (sc, d) in parsed.iter().zip(&dirs) {
        if let Some(other) = seen.insert(d.clone(), &sc.name) {
            eprintln!("scenarios '{other}' and '{}' would both write to {}", sc.name, d.display());
            return CONFIG;
        }
    }
    if code != 0 {
        return code;
    }

    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.jobs.max(1)).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("cannot start workers: {e}");
            return CONFIG;
        }
    };
    let outcomes: Vec<Outcome> = pool.install(|| {
        parsed
            .par_iter()
            .zip(&dirs)
            .with_max_len(1)
            .map(|(sc, dir)| run(sc, cli.seed.or(sc.seed).unwrap_or(fallback), dir))
            .collect()
    });
    emit(&outcomes)
}

fn emit(outcomes: &[Outcome]) -> u8 {
    let (mut out, mut err) = (std::io::stdout().lock(), std::io::stderr().lock());
    let mut code = 0;
    for (i, o) in outcomes.iter().enumerate() {
        if i > 0 && !o.stdout.is_empty() {
            let _ = writeln!(out);
        }
        let _ = write!(out, "{}", o.stdout);
        if !o.stderr.is_empty() {
            let _ = writeln!(err, "{}", o.stderr);
        }
        code = code.max(o.code);
    }
    code
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match &cli.command {
        Command::Certify { configs } => run_scenarios(&cli, configs, commands::certify),
        Command::Solve { configs } => run_scenarios(&cli, configs, commands::solve),
        Command::Equiv { configs } => run_scenarios(&cli, configs, commands::equiv),
        Command::Exp { generator, s, model } => emit(&[commands::exp(*model, generator, *s)]),
        Command::ProperTime { events } => emit(&[commands::proper_time_of(ModelKind::Relativistic, events)]),
    };
    ExitCode::from(code)
}
