use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::Parser;
use hcmr::experiment::{run, ExperimentConfig};

/// Shuffle cost tables, end-to-end shuffle verification and Map-task locality experiments.
#[derive(Debug, Parser)]
#[command(name = "hcmr", version)]
struct Args {
    /// costs, shuffle-verify or locality
    #[arg(long)]
    mode: Option<String>,
    /// key=value settings file; flags override it
    #[arg(long)]
    config: Option<PathBuf>,
    /// Tuples separated by ';': K,P,Q,N,r (costs, shuffle-verify) or K,P,r_f,N (locality)
    #[arg(long, allow_hyphen_values = true)]
    tuples: Option<String>,
    #[arg(long)]
    lambda: Option<String>,
    /// Comma-separated seeds; trials past the list continue from the last seed
    #[arg(long)]
    seeds: Option<String>,
    #[arg(long)]
    trials: Option<String>,
    /// Structured-solver restarts, or "exhaustive"
    #[arg(long, allow_hyphen_values = true)]
    budget: Option<String>,
    /// csv or table
    #[arg(long)]
    format: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Flip one delivered bit per shuffle in shuffle-verify mode
    #[arg(long)]
    fault_inject: bool,
    /// Comma-separated payload widths in bytes
    #[arg(long)]
    widths: Option<String>,
    /// Skip shuffle meters in costs mode
    #[arg(long)]
    no_meter: bool,
    /// Rejected tuples do not fail the run
    #[arg(long)]
    warn_rejected: bool,
    /// rack-spread or uniform replica placement
    #[arg(long)]
    placement: Option<String>,
    /// Skip the brute-force oracle in locality mode
    #[arg(long)]
    no_oracle: bool,
}

fn main() -> anyhow::Result<ExitCode> {
    let args = Args::parse();
    let mut config = ExperimentConfig::default();
    if let Some(path) = &args.config {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        config.apply_text(&text)?;
    }
    let overrides = [
        ("mode", args.mode),
        ("tuples", args.tuples),
        ("lambda", args.lambda),
        ("seeds", args.seeds),
        ("trials", args.trials),
        ("budget", args.budget),
        ("format", args.format),
        ("widths", args.widths),
        ("placement", args.placement),
    ];
    for (key, value) in overrides {
        if let Some(v) = value {
            config.set(key, &v).with_context(|| format!("--{key}"))?;
        }
    }
    if let Some(out) = args.out {
        config.out = Some(out);
    }
    config.fault_inject |= args.fault_inject;
    config.warn_rejected |= args.warn_rejected;
    config.meter &= !args.no_meter;
    config.oracle &= !args.no_oracle;

    let outcome = run(&config)?;
    if config.out.is_none() {
        std::io::stdout().write_all(outcome.text.as_bytes())?;
    }
    Ok(ExitCode::from(outcome.exit_code() as u8))
}
