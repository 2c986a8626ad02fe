use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use qplab_cli::config::TASKS;
use qplab_cli::{run, CliError, RunConfig, RunOptions};

#[derive(Parser, Debug)]
#[command(name = "qplab", version, about = "Quasiperiodic Schrodinger operators and their dual cocycles")]
struct Args {
    /// One of: freq, lyap, accel, classify, ids, holder, localize, dual-spectrum, jensen,
    /// haro-puig, dominated, center, rotation, duality-check, truncation-study, bloch, sweep
    task: String,
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    jobs: Option<usize>,
    /// Output prefix; files are <prefix>.csv, <prefix>.json and <prefix>.svg.
    #[arg(long)]
    out: Option<String>,
    #[arg(long)]
    no_cache: bool,
    /// No progress lines on standard error.
    #[arg(long)]
    quiet: bool,
}

fn load(args: &Args) -> Result<RunConfig, CliError> {
    if !TASKS.contains(&args.task.as_str()) {
        return Err(CliError::Config(format!("task: unknown task '{}'", args.task)));
    }
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", args.config.display())))?;
    let mut value: serde_json::Value = serde_json::from_str(&text).map_err(|e| CliError::Config(e.to_string()))?;
    // the task on the command line wins over the one in the file
    if let Some(obj) = value.as_object_mut() {
        obj.insert("task".into(), serde_json::Value::String(args.task.clone()));
    }
    RunConfig::from_json(&value.to_string())
}

fn main() -> ExitCode {
    let args = Args::parse();
    let result = load(&args).and_then(|cfg| {
        let opts = RunOptions { jobs: args.jobs, out: args.out.clone(), no_cache: args.no_cache, cache_dir: None, quiet: args.quiet };
        run(&cfg, &opts)
    });
    match result {
        Ok(env) => {
            let failed: Vec<String> = env.checks().into_iter().filter(|c| !c.1).map(|c| c.0).collect();
            eprintln!(
                "{}: {} rows -> {} ({}{:.2} s){}",
                env.task,
                env.summary["rows"],
                env.csv_path.display(),
                if env.cache_hit { "cache hit, " } else { "" },
                env.wall_time_s,
                if failed.is_empty() { String::new() } else { format!("; failed checks: {}", failed.join(", ")) }
            );
            if env.has_point_errors() {
                eprintln!("some grid points failed; see the errors list in the JSON summary");
                ExitCode::from(4)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(err) => {
            eprintln!("qplab: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
