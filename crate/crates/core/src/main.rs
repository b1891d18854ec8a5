use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use harnack_lab::report::fmt_real;
use harnack_lab::runner::run;
use harnack_lab::scenario::parse_scenario;

/// Runs one scenario file and writes its reports.
#[derive(Parser, Debug)]
#[command(name = "harnack-lab", version, about)]
struct Cli {
    /// Scenario file (`key = value` lines, optional `[section]` headers).
    scenario: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Suppress the per-row summary.
    #[arg(long)]
    quiet: bool,
}

fn init_threads() -> anyhow::Result<()> {
    if let Ok(raw) = std::env::var("HARNACK_LAB_THREADS") {
        let k: usize = raw.trim().parse().map_err(|_| anyhow::anyhow!("HARNACK_LAB_THREADS={raw:?} is not a count"))?;
        if k == 0 {
            anyhow::bail!("HARNACK_LAB_THREADS must be positive");
        }
        rayon::ThreadPoolBuilder::new().num_threads(k).build_global()?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = init_threads().and_then(|_| {
        let scenario = parse_scenario(&cli.scenario)?;
        run(&scenario, &cli.out)
    });
    match result {
        Ok(outcome) => {
            if !cli.quiet {
                for r in &outcome.rows {
                    let status = if r.pass { "pass" } else { "FAIL" };
                    println!("{status} {} {} = {}", r.scenario, r.quantity, fmt_real(r.value));
                }
                for f in &outcome.files {
                    println!("wrote {}", f.display());
                }
            }
            ExitCode::from(outcome.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("harnack-lab: {e:#}");
            ExitCode::from(2)
        }
    }
}
