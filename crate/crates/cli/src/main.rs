use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use srgeo::scenario::usage;
use srgeo::{load_manifold, run_scenario, CliError, ScenarioConfig, Task};

#[derive(Parser, Debug)]
#[command(name = "srgeo", version, about = "Sub-Riemannian geometry scenarios")]
struct Args {
    /// One of: flag, nilpotent, distance, ball, blowup, isometry, factor, density, area-check, diameter
    task: String,
    /// Builtin manifold name or path to a spec file
    #[arg(long)]
    manifold: String,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    radii: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    point: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    target: Option<Vec<f64>>,
    /// Rotation angle in degrees (isometry)
    #[arg(long)]
    angle: Option<f64>,
    /// Sample-size override
    #[arg(long)]
    samples: Option<usize>,
    /// Output directory for report files
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print the JSON report to stdout
    #[arg(long)]
    json: bool,
    /// Also write the CSV table (blowup, diameter)
    #[arg(long)]
    csv: bool,
    /// Record wall-clock runtime in the report
    #[arg(long)]
    timing: bool,
}

fn run(args: Args) -> Result<i32, CliError> {
    if let Some(k) = std::env::var("SRGEO_THREADS").ok().and_then(|s| s.parse::<usize>().ok()) {
        rayon::ThreadPoolBuilder::new().num_threads(k.max(1)).build_global().map_err(|e| CliError::Invalid(e.to_string()))?;
    }
    let task: Task = args.task.parse()?;
    let manifold = load_manifold(&args.manifold)?;
    let cfg = ScenarioConfig {
        seed: args.seed,
        radii: args.radii,
        point: args.point,
        target: args.target,
        angle: args.angle,
        samples: args.samples,
        timing: args.timing,
        ..ScenarioConfig::new(manifold, task)
    };
    let out = run_scenario(&cfg)?;
    if let Some(dir) = &args.out {
        out.write(dir, args.csv)?;
    }
    if args.json || args.out.is_none() {
        print!("{}", out.report.to_json());
    }
    if args.csv && args.out.is_none() {
        if let Some(c) = &out.csv {
            print!("{c}");
        }
    }
    Ok(out.exit_code())
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(args) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            if matches!(e, CliError::Invalid(ref m) if m.starts_with("unknown task")) {
                // usage is already part of the message
            } else if matches!(e, CliError::Parse(_)) {
                eprintln!("{}", usage());
            }
            ExitCode::from(1)
        }
    }
}
