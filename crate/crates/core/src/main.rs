use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lma_core::harness::{default_config, emit_report, list_scenarios, run_scenario, ScenarioConfig};
use lma_core::LabError;

#[derive(Parser)]
#[command(name = "lma", version, about = "Verification scenarios for linearized Monge-Ampere equations with measure data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write report.json and tables/*.csv
    Run {
        scenario: String,
        /// TOML configuration; defaults to the scenario's built-in configuration
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory (overrides `output` in the config)
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// List registered scenarios with their anchors
    List,
    /// Check a configuration file and print the resolved configuration
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Print the built-in configuration of a scenario as TOML
    Template { scenario: String },
}

fn exit_for(err: &LabError) -> ExitCode {
    eprintln!("error: {err}");
    match err {
        LabError::Config(_) => ExitCode::from(2),
        _ => ExitCode::from(1),
    }
}

fn load(scenario: &str, path: Option<&PathBuf>) -> Result<ScenarioConfig, LabError> {
    match path {
        Some(p) => {
            let c = ScenarioConfig::load(p)?;
            if c.scenario != scenario {
                return Err(LabError::Config(format!(
                    "{} configures scenario `{}`, not `{scenario}`",
                    p.display(),
                    c.scenario
                )));
            }
            Ok(c)
        }
        None => default_config(scenario),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::List => {
            for (id, anchor) in list_scenarios() {
                println!("{id:<26} {anchor}");
            }
            ExitCode::SUCCESS
        }
        Command::Template { scenario } => match default_config(&scenario) {
            Ok(c) => {
                print!("{}", c.to_toml());
                ExitCode::SUCCESS
            }
            Err(e) => exit_for(&e),
        },
        Command::Validate { config } => match ScenarioConfig::load(&config).and_then(|c| {
            c.validate()?;
            default_config(&c.scenario)?;
            Ok(c)
        }) {
            Ok(c) => {
                print!("{}", c.to_toml());
                ExitCode::SUCCESS
            }
            Err(e) => exit_for(&e),
        },
        Command::Run {
            scenario,
            config,
            out,
            seed,
        } => {
            let mut c = match load(&scenario, config.as_ref()) {
                Ok(c) => c,
                Err(e) => return exit_for(&e),
            };
            if let Some(s) = seed {
                c.seed = s;
            }
            if let Some(o) = out {
                c.output = Some(o);
            }
            let dir = c.output.clone().unwrap_or_else(|| PathBuf::from("out").join(&c.scenario));
            let bundle = match run_scenario(&c) {
                Ok(b) => b,
                Err(e) => return exit_for(&e),
            };
            if let Err(e) = emit_report(&bundle, &dir) {
                return exit_for(&e);
            }
            for r in &bundle.results {
                println!(
                    "{:<22} {:<40} C = {:<12.4e} {}",
                    r.status.as_str(),
                    r.inequality_id,
                    r.min_constant,
                    r.note.as_deref().unwrap_or("")
                );
            }
            println!("report written to {}", dir.join("report.json").display());
            if bundle.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
    }
}
