use std::io::Read;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::Parser;
use effhom_cli::{run_script, Config};

/// Runs an effhom script and prints the query results.
#[derive(Parser)]
#[command(name = "effhom", version)]
struct Cli {
    /// Script file; standard input when absent.
    #[arg(long, env = "SCRIPT")]
    script: Option<PathBuf>,
    /// One JSON object per output line.
    #[arg(long, env = "JSON")]
    json: bool,
    /// Seed of the sampler used by probes and checks.
    #[arg(long, env = "SEED", default_value_t = 0)]
    seed: u64,
    /// Largest degree a query may ask for.
    #[arg(long, env = "DEGREE_BOUND", default_value_t = 12)]
    degree_bound: i32,
    /// Iterations a perturbation series may run beyond twice the degree.
    #[arg(long, env = "BPL_CAP")]
    bpl_cap: Option<usize>,
    /// Wall-clock budget in seconds.
    #[arg(long, env = "TIME_BUDGET")]
    time_budget: Option<f64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (src, base_dir) = match &cli.script {
        Some(p) => match std::fs::read_to_string(p) {
            Ok(s) => (s, p.parent().map(PathBuf::from).unwrap_or_default()),
            Err(e) => {
                eprintln!("error: cannot read {}: {e}", p.display());
                return ExitCode::from(3);
            }
        },
        None => {
            let mut s = String::new();
            if let Err(e) = std::io::stdin().read_to_string(&mut s) {
                eprintln!("error: cannot read standard input: {e}");
                return ExitCode::from(3);
            }
            (s, PathBuf::from("."))
        }
    };
    let cfg = Config {
        seed: cli.seed,
        json: cli.json,
        degree_bound: cli.degree_bound,
        bpl_cap: cli.bpl_cap,
        time_budget: cli.time_budget.filter(|t| *t > 0.0).map(Duration::from_secs_f64),
        base_dir,
        ..Config::default()
    };
    let code = run_script(&src, &cfg, &mut std::io::stdout().lock(), &mut std::io::stderr().lock());
    ExitCode::from(code as u8)
}
