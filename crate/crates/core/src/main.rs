use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use ctxmatch::config::{defaults_text, parse_config, Config};
use ctxmatch::experiment::{run_experiment, ScenarioSource};
use ctxmatch::matching::Policy;
use ctxmatch::mobility::JunctionConfig;
use ctxmatch::SimError;

/// Sweeps matching policies, beamwidths and receiver quotas over seeded
/// scenarios and writes per-run CSVs plus summary.json.
#[derive(Debug, Parser)]
#[command(name = "ctxmatch", version)]
struct Cli {
    /// Flat key = value config file; omitted keys take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Seeds, comma separated.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Policies, comma separated (MINDist, DELAYfair, CONTEXTaware).
    #[arg(long, value_delimiter = ',')]
    policy: Option<Vec<Policy>>,
    /// Beamwidths in degrees, comma separated.
    #[arg(long = "phi-deg", value_delimiter = ',')]
    phi_deg: Option<Vec<f64>>,
    /// Receiver quotas, comma separated.
    #[arg(long = "quota-rx", value_delimiter = ',')]
    quota_rx: Option<Vec<usize>>,
    /// Use the generated junction even if the config names trace files.
    #[arg(long)]
    synthetic: bool,
    /// Parse and check the configuration, then exit.
    #[arg(long)]
    validate_only: bool,
    /// Print the default configuration file and exit.
    #[arg(long)]
    print_defaults: bool,
}

fn load(cli: &Cli) -> Result<Config, SimError> {
    let mut cfg = match &cli.config {
        Some(p) => parse_config(p)?,
        None => Config::default(),
    };
    let exp = &mut cfg.experiment;
    if let Some(s) = &cli.seeds {
        exp.seeds = s.clone();
    }
    if let Some(p) = &cli.policy {
        exp.policies = p.clone();
    }
    if let Some(p) = &cli.phi_deg {
        exp.beamwidths_deg = p.clone();
    }
    if let Some(q) = &cli.quota_rx {
        exp.quotas_rx = q.clone();
    }
    if cli.synthetic && !matches!(exp.scenario, ScenarioSource::Synthetic(_)) {
        let sim = &cfg.sim;
        exp.scenario = ScenarioSource::Synthetic(JunctionConfig {
            slot: sim.slot,
            duration: sim.duration,
            quality_levels: sim.quality_levels(),
            ..JunctionConfig::default()
        });
    }
    exp.out = cli.out.clone();
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.print_defaults {
        print!("{}", defaults_text());
        return ExitCode::SUCCESS;
    }
    let cfg = match load(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if cli.validate_only {
        let n = cfg.experiment.runs().len();
        println!("configuration ok: {n} runs");
        return ExitCode::SUCCESS;
    }
    match run_experiment(&cfg.experiment, &cfg.sim) {
        Ok(summary) => {
            for r in &summary.runs {
                eprintln!("ok     {}", r.id);
            }
            for f in &summary.failed {
                eprintln!("FAILED {}: {}", f.id, f.error);
            }
            println!("{}", cfg.experiment.out.join("summary.json").display());
            if summary.is_success() {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
