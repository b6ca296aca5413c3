use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use wanframe_cli::config::{parse_grid, ConfigError, ConstructionMode, PipelineConfig};
use wanframe_cli::pipeline::{run_pipeline, PipelineError};
use wanframe_cli::report::write_artifacts;
use wanframe_cli::scenarios::{scenario_config, SCENARIOS};

#[derive(Parser)]
#[command(name = "wanframe", version, about = "Wannier bases and tight frames for Bloch operator families")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the pipeline on a TOML config file or a bundled scenario name.
    Run {
        target: String,
        /// auto, orthonormal, tight-frame or control.
        #[arg(long)]
        construction: Option<ConstructionMode>,
        /// Grid sizes such as 48x48.
        #[arg(long, value_parser = |s: &str| parse_grid(s).map(GridSizes))]
        grid: Option<GridSizes>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Seed for the Parseval trials.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the frame size.
        #[arg(long)]
        l: Option<usize>,
    },
    /// Print the bundled scenarios.
    ListScenarios,
    /// Print the TOML config of a bundled scenario.
    ShowConfig { scenario: String },
}

#[derive(Debug, Clone)]
struct GridSizes(Vec<usize>);

fn load(target: &str) -> Result<(PipelineConfig, Option<String>), ConfigError> {
    if let Some(cfg) = scenario_config(target) {
        return Ok((cfg, Some(target.to_string())));
    }
    let path = PathBuf::from(target);
    if !path.exists() {
        return Err(ConfigError::invalid(
            "target",
            format!("'{target}' is neither a config file nor a bundled scenario (see list-scenarios)"),
        ));
    }
    PipelineConfig::load(&path).map(|c| (c, None))
}

fn run(
    target: &str,
    construction: Option<ConstructionMode>,
    grid: Option<GridSizes>,
    out: Option<PathBuf>,
    seed: Option<u64>,
    l: Option<usize>,
) -> Result<bool, PipelineError> {
    let (mut config, scenario) = load(target)?;
    if let Some(mode) = construction {
        config.construction.mode = mode;
    }
    if let Some(GridSizes(sizes)) = grid {
        config.grid.sizes = sizes;
    }
    if let Some(dir) = out {
        config.output.dir = dir;
    }
    if let Some(seed) = seed {
        config.checks.rng_seed = seed;
    }
    if l.is_some() {
        config.construction.l = l;
    }
    let outcome = run_pipeline(&config, scenario.as_deref())?;
    let written = write_artifacts(&outcome, &config.output.dir, config.output.sections)?;
    let report = &outcome.report;
    println!(
        "verdict {:?}, chern {}, l = {} ({:?})",
        report.frame.topology.verdict,
        report.frame.topology.chern.map_or("n/a".to_string(), |c| c.to_string()),
        report.frame.achieved_l,
        report.frame.construction,
    );
    for check in &report.checks {
        let status = match (check.passed, check.enforced) {
            (true, _) => "ok",
            (false, true) => "FAIL",
            (false, false) => "fail (not enforced)",
        };
        match (check.value, check.threshold) {
            (Some(v), Some(t)) => println!("  {:<40} {status:<6} {v:.3e} (threshold {t:.1e})", check.name),
            _ => println!("  {:<40} {status}", check.name),
        }
    }
    println!("wrote {} files to {}", written.len(), config.output.dir.display());
    Ok(report.passed)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::ListScenarios => {
            for s in SCENARIOS {
                println!("{:<28} {}\n{:<28} expected: {}", s.name, s.description, "", s.expected);
            }
            ExitCode::SUCCESS
        }
        Command::ShowConfig { scenario } => match scenario_config(&scenario) {
            Some(cfg) => {
                print!("{}", cfg.to_toml());
                ExitCode::SUCCESS
            }
            None => {
                eprintln!("error: unknown scenario '{scenario}'");
                ExitCode::from(2)
            }
        },
        Command::Run { target, construction, grid, out, seed, l } => {
            match run(&target, construction, grid, out, seed, l) {
                Ok(true) => ExitCode::SUCCESS,
                Ok(false) => {
                    eprintln!("error: one or more checks failed");
                    ExitCode::from(1)
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(e.exit_code() as u8)
                }
            }
        }
    }
}
