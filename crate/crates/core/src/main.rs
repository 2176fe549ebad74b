use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use lambda_beam::config::{self, Scenario};
use lambda_beam::run;

/// Double-Λ light-to-matter-wave transfer simulator.
#[derive(Parser, Debug)]
#[command(version, about)]
struct Cli {
    /// One of: pde, adiabatic, compare, measure, sweep.
    scenario: Scenario,
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, env = run::OUT_ENV)]
    out: Option<PathBuf>,
    /// Overrides `measurement.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Dotted-key override, e.g. `--set params.v0=0.3`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let mut overrides = cli.set.clone();
    overrides.push(format!("scenario=\"{}\"", cli.scenario.name()));
    if let Some(seed) = cli.seed {
        overrides.push(format!("measurement.seed={seed}"));
    }
    let out = cli.out.unwrap_or_else(run::default_out_dir);
    let cfg = match config::load_config(&cli.config, &overrides) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            let text = std::fs::read_to_string(&cli.config).unwrap_or_default();
            if let Err(w) = run::write_failure_manifest(&out, cli.scenario.name(), &text, &e) {
                eprintln!("could not write manifest: {w}");
            }
            return ExitCode::FAILURE;
        }
    };
    match run::run_scenario(&cfg, &out) {
        Ok(m) => {
            for w in &m.warnings {
                eprintln!("warning: {w}");
            }
            for (k, v) in &m.metrics {
                println!("{k} = {v}");
            }
            println!("wrote {} files to {}", m.files.len() + 1, out.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            eprintln!("manifest written to {}", out.join(run::MANIFEST_NAME).display());
            ExitCode::FAILURE
        }
    }
}
