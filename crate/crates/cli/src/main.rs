use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use wanelab::bundle_models::{bundle_by_name, make_builtin_bundle, BUILTIN_BUNDLE_NAMES};
use wanelab::collapse_lab::CollapseSchedule;
use wanelab_cli::output::{self, HASHED_BUILTINS};
use wanelab_cli::{run_experiment, validate_config, ExperimentConfig};

const EXIT_CONFIG: u8 = 1;
const EXIT_NUMERICAL: u8 = 2;

#[derive(Parser)]
#[command(name = "wanelab", version, about = "Collapse experiments on connection metrics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write results.json and results.csv.
    Run {
        config: PathBuf,
        #[arg(long)]
        output_dir: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Check a config and print it with defaults filled in.
    Validate { config: PathBuf },
    /// List the builtin bundle models.
    ListModels,
}

fn load(path: &Path) -> Result<ExperimentConfig, Vec<String>> {
    let text = fs::read_to_string(path).map_err(|e| vec![format!("{}: {e}", path.display())])?;
    validate_config(&text)
}

fn report(errors: &[String]) -> ExitCode {
    for e in errors {
        eprintln!("error: {e}");
    }
    ExitCode::from(EXIT_CONFIG)
}

fn run(cfg: ExperimentConfig) -> ExitCode {
    let errors = cfg.check_overrides();
    if !errors.is_empty() {
        return report(&errors);
    }
    let b = match bundle_by_name(&cfg.model) {
        Ok(b) => b,
        Err(e) => return report(&[e.to_string()]),
    };
    let out = match run_experiment(&cfg, &b) {
        Ok(out) => out,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_NUMERICAL);
        }
    };
    let s = &cfg.schedule;
    let eps = CollapseSchedule::geometric(s.eps0, s.ratio, s.count).expect("validated schedule");
    let json = output::results_json(&cfg, &b, eps.eps_list(), &out);
    let csv = output::results_csv(&out).expect("in-memory csv");
    let written = fs::create_dir_all(&cfg.output_dir)
        .and_then(|_| output::write_atomic(&cfg.output_dir, "results.json", &json))
        .and_then(|_| output::write_atomic(&cfg.output_dir, "results.csv", &csv));
    if let Err(e) = written {
        return report(&[format!("cannot write to {}: {e}", cfg.output_dir.display())]);
    }
    println!("{}", output::summary_line(&cfg, &out));
    ExitCode::SUCCESS
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match cli.command {
        Command::Run { config, output_dir, seed, steps } => match load(&config) {
            Ok(mut cfg) => {
                cfg.output_dir = output_dir.unwrap_or(cfg.output_dir);
                cfg.seed = seed.unwrap_or(cfg.seed);
                cfg.steps = steps.unwrap_or(cfg.steps);
                run(cfg)
            }
            Err(errors) => report(&errors),
        },
        Command::Validate { config } => match load(&config) {
            Ok(cfg) => {
                println!("{}", serde_json::to_string_pretty(&cfg).expect("config serialises"));
                ExitCode::SUCCESS
            }
            Err(errors) => report(&errors),
        },
        Command::ListModels => {
            for name in BUILTIN_BUNDLE_NAMES {
                println!("{name}");
            }
            for b in HASHED_BUILTINS {
                println!("  {}", make_builtin_bundle(b).describe());
            }
            println!("file:<path> loads a wanelab-bundle/1 JSON file");
            println!("builtin_models_hash={}", output::builtin_models_hash());
            ExitCode::SUCCESS
        }
    }
}
