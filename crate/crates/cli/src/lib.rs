//! Configuration, dispatch, caching and file emission for the `qplab` tool.

pub mod config;
pub mod output;
pub mod tasks;

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

pub use config::{EnergyGrid, PotentialSpec, RunConfig, TaskParams};
pub use output::{Cell, Check, PointError, TaskOutput};

pub const TOOL: &str = "qplab";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const CACHE_ENV: &str = "QPLAB_CACHE";
pub const DEFAULT_CACHE_DIR: &str = ".qplab-cache";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("task error: {0}")]
    Task(#[from] qplab_core::Error),
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Task(_) | CliError::Io { .. } => 3,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.to_path_buf(), source }
}

/// Command-line overrides of the config file.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub jobs: Option<usize>,
    pub out: Option<String>,
    pub no_cache: bool,
    pub cache_dir: Option<PathBuf>,
    /// Suppress progress lines on standard error.
    pub quiet: bool,
}

/// What a task produced, independent of how long it took or whether it came
/// from the cache. Cached and fresh payloads compare equal bitwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Payload {
    pub csv: String,
    pub svg: Option<String>,
    pub summary: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultEnvelope {
    pub tool: String,
    pub version: String,
    pub task: String,
    pub config_hash: String,
    pub wall_time_s: f64,
    pub cache_hit: bool,
    pub jobs: usize,
    pub csv_path: PathBuf,
    pub csv_sha256: String,
    pub svg_path: Option<PathBuf>,
    pub summary: Value,
}

impl ResultEnvelope {
    pub fn has_point_errors(&self) -> bool {
        self.summary["errors"].as_array().is_some_and(|e| !e.is_empty())
    }

    /// Checks recorded in the summary, as (name, pass).
    pub fn checks(&self) -> Vec<(String, bool)> {
        self.summary["checks"]
            .as_array()
            .map(|a| {
                a.iter()
                    .map(|c| (c["name"].as_str().unwrap_or_default().to_string(), c["pass"].as_bool().unwrap_or(false)))
                    .collect()
            })
            .unwrap_or_default()
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Hash of the result-determining part of the config and the tool version.
pub fn config_hash(cfg: &RunConfig) -> String {
    let key = json!({"tool": TOOL, "version": VERSION, "content": cfg.content()});
    sha256_hex(serde_json::to_string(&key).expect("json").as_bytes())
}

/// QPLAB_CACHE, then the config, then the default.
pub fn cache_dir(cfg: &RunConfig, opts: &RunOptions) -> PathBuf {
    if let Some(d) = &opts.cache_dir {
        return d.clone();
    }
    if let Some(d) = std::env::var_os(CACHE_ENV) {
        return PathBuf::from(d);
    }
    cfg.cache_dir.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_CACHE_DIR))
}

fn cache_lookup(dir: &Path, hash: &str) -> Option<Payload> {
    let text = fs::read_to_string(dir.join(format!("{hash}.json"))).ok()?;
    serde_json::from_str(&text).ok()
}

fn cache_store(dir: &Path, hash: &str, payload: &Payload) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let path = dir.join(format!("{hash}.json"));
    let tmp = dir.join(format!("{hash}.json.{}.tmp", std::process::id()));
    fs::write(&tmp, serde_json::to_string(payload).expect("json")).map_err(io_err(&tmp))?;
    fs::rename(&tmp, &path).map_err(io_err(&path))
}

fn payload_of(out: &TaskOutput, hash: &str) -> Payload {
    let summary = json!({
        "inputs_hash": hash,
        "columns": out.columns,
        "rows": out.rows.len(),
        "quantities": out.quantities,
        "checks": out.checks,
        "errors": out.errors,
        "pass": out.checks.iter().all(|c| c.pass),
    });
    // normalize through the JSON value model so fresh and cached summaries
    // are built from the same representation (non-finite numbers become null)
    let summary: Value = serde_json::from_str(&serde_json::to_string(&summary).expect("json")).expect("json");
    Payload { csv: out.to_csv(), svg: out.to_svg(), summary }
}

fn compute(cfg: &RunConfig, hash: &str, opts: &RunOptions) -> Result<Payload, CliError> {
    let out = if cfg.task == "sweep" {
        sweep(cfg, opts)?
    } else {
        let ctx = tasks::Context::new(cfg)?;
        tasks::dispatch(&cfg.task, &ctx)?
    };
    if out.rows.is_empty() {
        if let Some(first) = out.errors.first() {
            return Err(CliError::Task(qplab_core::Error::InvalidArgument(format!(
                "every grid point failed; first: {}",
                first.error
            ))));
        }
    }
    Ok(payload_of(&out, hash))
}

/// Payload for a config, from the cache when possible.
pub fn evaluate(cfg: &RunConfig, opts: &RunOptions) -> Result<(Payload, bool), CliError> {
    cfg.validate()?;
    let hash = config_hash(cfg);
    let dir = cache_dir(cfg, opts);
    if !opts.no_cache {
        if let Some(p) = cache_lookup(&dir, &hash) {
            return Ok((p, true));
        }
    }
    let payload = compute(cfg, &hash, opts)?;
    if !opts.no_cache {
        cache_store(&dir, &hash, &payload)?;
    }
    Ok((payload, false))
}

fn pool(jobs: Option<usize>) -> Result<rayon::ThreadPool, CliError> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        b = b.num_threads(j);
    }
    b.build().map_err(|e| CliError::Config(format!("jobs: {e}")))
}

/// Runs a config and writes `<prefix>.csv`, `<prefix>.json` and, when the
/// task has a primary curve, `<prefix>.svg`.
pub fn run(cfg: &RunConfig, opts: &RunOptions) -> Result<ResultEnvelope, CliError> {
    let start = Instant::now();
    let jobs = opts.jobs.or(cfg.jobs);
    let pool = pool(jobs)?;
    let threads = pool.current_num_threads();
    let (payload, cache_hit) = pool.install(|| evaluate(cfg, opts))?;
    let prefix = opts.out.clone().or_else(|| cfg.out.clone()).unwrap_or_else(|| cfg.task.clone());
    let csv_path = PathBuf::from(format!("{prefix}.csv"));
    let json_path = PathBuf::from(format!("{prefix}.json"));
    if let Some(parent) = csv_path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    fs::write(&csv_path, &payload.csv).map_err(io_err(&csv_path))?;
    let svg_path = match &payload.svg {
        Some(svg) => {
            let p = PathBuf::from(format!("{prefix}.svg"));
            fs::write(&p, svg).map_err(io_err(&p))?;
            Some(p)
        }
        None => None,
    };
    let envelope = ResultEnvelope {
        tool: TOOL.into(),
        version: VERSION.into(),
        task: cfg.task.clone(),
        config_hash: config_hash(cfg),
        wall_time_s: start.elapsed().as_secs_f64(),
        cache_hit,
        jobs: threads,
        csv_sha256: sha256_hex(payload.csv.as_bytes()),
        csv_path,
        svg_path,
        summary: payload.summary,
    };
    fs::write(&json_path, output::to_json(&envelope)).map_err(io_err(&json_path))?;
    Ok(envelope)
}

/// Maps `params.sweep_task` over the energy axis, one sub-run per point.
/// Sub-runs are cached individually; failed points become error records.
pub fn sweep(cfg: &RunConfig, opts: &RunOptions) -> Result<TaskOutput, CliError> {
    let inner = cfg.params.sweep_task.clone().ok_or_else(|| CliError::Config("params.sweep_task: required".into()))?;
    let ctx = tasks::Context::new(cfg)?;
    let energies = ctx.energies("sweep")?;
    let total = energies.len();
    let done = AtomicUsize::new(0);
    let results: Vec<Result<Payload, CliError>> = energies
        .par_iter()
        .map(|&e| {
            let mut sub = cfg.clone();
            sub.task = inner.clone();
            sub.params.sweep_task = None;
            sub.params.energies = Some(EnergyGrid::Values(vec![e]));
            let r = evaluate(&sub, opts).map(|(p, _)| p);
            let k = done.fetch_add(1, Ordering::SeqCst) + 1;
            if !opts.quiet {
                let status = match &r {
                    Ok(_) => "ok".to_string(),
                    Err(err) => format!("failed: {err}"),
                };
                eprintln!("[sweep {inner}] {k}/{total} E = {e}: {status}");
            }
            r
        })
        .collect();
    let mut out = TaskOutput::default();
    let mut header: Option<String> = None;
    let mut body = Vec::new();
    let mut points = Vec::new();
    for (i, (r, &e)) in results.into_iter().zip(&energies).enumerate() {
        let payload = match r {
            Ok(p) => p,
            Err(err) => {
                out.errors.push(PointError { index: i, energy: Some(e), error: err.to_string() });
                continue;
            }
        };
        for err in payload.summary["errors"].as_array().into_iter().flatten() {
            out.errors.push(PointError {
                index: i,
                energy: Some(e),
                error: err["error"].as_str().unwrap_or_default().to_string(),
            });
        }
        let mut lines = payload.csv.lines();
        let head = lines.next().unwrap_or_default().to_string();
        header.get_or_insert(head);
        body.extend(lines.map(str::to_string));
        for c in payload.summary["checks"].as_array().into_iter().flatten() {
            out.checks.push(Check {
                name: format!("{}@{e}", c["name"].as_str().unwrap_or_default()),
                value: c["value"].as_f64().unwrap_or(f64::NAN),
                relation: c["relation"].as_str().unwrap_or_default().to_string(),
                threshold: c["threshold"].as_array().into_iter().flatten().map(|t| t.as_f64().unwrap_or(f64::NAN)).collect(),
                pass: c["pass"].as_bool().unwrap_or(false),
            });
        }
        points.push(json!({"energy": e, "summary": payload.summary}));
    }
    if let Some(h) = header {
        out.columns = h.split(',').map(str::to_string).collect();
    }
    out.set("sweep_task", &inner);
    out.set("points", points);
    out.set("failed", out.errors.len());
    out.rows = body.into_iter().map(|l| vec![Cell::Text(l)]).collect();
    out.raw_rows = true;
    Ok(out)
}
