use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pctc::model::ScenarioConfig;
use pctc::sim::{properties_suite, run_preset, ExperimentPreset, PresetName};
use pctc::SimError;

#[derive(Parser)]
#[command(name = "pctc", version, about = "Prediction-based cognitive topology control experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a preset experiment and write CSV outputs.
    Run {
        /// fig2_prediction, fig3_topology, fig4_endtoend or properties_suite.
        preset: PresetName,
        /// Scenario file of `key = value` lines.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        trials: Option<usize>,
        /// Extra `key=value` overrides, applied after the config file.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Check connectivity, symmetry and spanner properties on random graphs.
    CheckProperties {
        #[arg(long, default_value_t = 200)]
        graphs: usize,
        #[arg(long, default_value_t = 30)]
        max_nodes: usize,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Validate a scenario file and print the resolved configuration.
    Validate { config: PathBuf },
    /// Print the version.
    Version,
}

fn load(config: Option<&PathBuf>, seed: Option<u64>) -> Result<ScenarioConfig, SimError> {
    let mut cfg = match config {
        Some(path) => ScenarioConfig::from_kv_str(&std::fs::read_to_string(path)?)?,
        None => ScenarioConfig::default(),
    };
    if let Some(seed) = seed {
        cfg.rng_seed = seed;
    }
    Ok(cfg)
}

fn split_override(s: &str) -> Result<(String, String), String> {
    s.split_once('=')
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .ok_or_else(|| format!("expected KEY=VALUE, got `{s}`"))
}

fn run(cli: Cli) -> Result<bool, Box<dyn std::error::Error>> {
    match cli.command {
        Command::Run {
            preset,
            config,
            seed,
            trials,
            overrides,
            out,
        } => {
            let cfg = load(config.as_ref(), seed)?;
            let mut p = ExperimentPreset::standard(preset);
            if let Some(k) = trials {
                p.trials = k;
            }
            for o in &overrides {
                p.overrides.push(split_override(o)?);
            }
            let report = run_preset(&p, &cfg)?;
            report.write_outputs(&out)?;
            println!("{preset}: {} trials written to {}", p.trials, out.display());
            if preset == PresetName::PropertiesSuite {
                let failed = report.properties.iter().filter(|r| !r.ok()).count();
                println!("{failed} of {} graphs failed", report.properties.len());
                return Ok(failed == 0);
            }
            Ok(true)
        }
        Command::CheckProperties {
            graphs,
            max_nodes,
            config,
            seed,
        } => {
            let cfg = load(config.as_ref(), seed)?;
            let violations = cfg.validate();
            if !violations.is_empty() {
                return Err(pctc::ConfigError::Invalid(violations).into());
            }
            let rows = properties_suite(graphs, max_nodes, &cfg);
            let count = |f: fn(&pctc::sim::PropertyRow) -> bool| rows.iter().filter(|r| f(r)).count();
            println!("connectivity: {}/{graphs}", count(|r| r.connectivity_ok));
            println!("symmetry:     {}/{graphs}", count(|r| r.symmetry_ok));
            println!("spanner:      {}/{graphs}", count(|r| r.spanner_ok));
            println!("one-sided decisions reconciled on {} graphs", count(|r| r.one_sided > 0));
            Ok(rows.iter().all(|r| r.ok()))
        }
        Command::Validate { config } => {
            let cfg = ScenarioConfig::from_kv_str(&std::fs::read_to_string(&config)?)?;
            let violations = cfg.validate();
            if !violations.is_empty() {
                return Err(pctc::ConfigError::Invalid(violations).into());
            }
            print!("{}", cfg.to_kv_string());
            Ok(true)
        }
        Command::Version => {
            println!("pctc {}", env!("CARGO_PKG_VERSION"));
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
