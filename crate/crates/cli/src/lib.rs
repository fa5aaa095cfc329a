//! Batch front-end for wildtrack missions: config ingestion, Monte-Carlo
//! orchestration and CSV/JSON output.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use serde_json::Value;
use thiserror::Error;
use wildtrack_core::scenario::{
    trial_seed, ConfigError, MissionResult, MonteCarloSummary, Scenario, ScenarioConfig, ScenarioError,
};

pub mod config;
pub mod detector;

pub use config::{apply_override, load_config, parse_config};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config{}: {message}", if path.is_empty() || path == "." { String::new() } else { format!(" key `{path}`") })]
    Parse { path: String, message: String },
    #[error("override `{spec}`: {message}")]
    Override { spec: String, message: String },
    #[error("invalid config: {0}")]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("sweep axis `{0}` has no values")]
    EmptyAxis(String),
    #[error("malformed axis `{0}`: expected key=v1,v2,...")]
    BadAxis(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Bearing(#[from] wildtrack_core::bearing::BearingError),
    #[error(transparent)]
    Propagation(#[from] wildtrack_core::propagation::PropagationError),
}

impl CliError {
    /// 2 for bad input (config, overrides, axes), 1 for runtime failures.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Parse { .. }
            | CliError::Override { .. }
            | CliError::Config(_)
            | CliError::Scenario(ScenarioError::Config(_))
            | CliError::EmptyAxis(_)
            | CliError::BadAxis(_) => 2,
            _ => 1,
        }
    }
}

pub fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Column names of `results.csv`, after any sweep axis columns.
pub const RESULT_COLUMNS: [&str; 9] = [
    "trial",
    "method",
    "terrain",
    "reward_kind",
    "tag_id",
    "loc_time_s",
    "error_m",
    "det_m4",
    "seed",
];

/// One swept configuration: its axis assignments and the prepared scenario.
#[derive(Debug, Clone)]
pub struct Cell {
    pub axes: Vec<(String, Value)>,
    pub scenario: Scenario,
}

impl Cell {
    pub fn new(axes: Vec<(String, Value)>, config: &ScenarioConfig) -> Result<Self, CliError> {
        Ok(Self {
            axes,
            scenario: Scenario::prepare(config)?,
        })
    }

    fn label(&self) -> String {
        let c = &self.scenario.config;
        let mut s = format!("{} {} {}", c.method.name(), c.terrain.class().name(), c.planner.reward.name());
        for (k, v) in &self.axes {
            s.push_str(&format!(" {k}={}", axis_text(v)));
        }
        s
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RunOptions {
    pub trials: usize,
    pub base_seed: u64,
    pub jobs: usize,
    pub traces: bool,
}

/// Results of every cell, each in trial order.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub results: Vec<Vec<MissionResult>>,
}

/// Runs every (cell, trial) pair on at most `jobs` threads. The returned
/// order is canonical regardless of completion order.
pub fn run_cells(cells: &[Cell], opts: &RunOptions) -> Result<Outcome, CliError> {
    let work: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..opts.trials).map(move |t| (c, t)))
        .collect();
    let run = |&(c, t): &(usize, usize)| {
        let seed = trial_seed(opts.base_seed, t);
        let s = &cells[c].scenario;
        if opts.traces {
            s.run_mission_with_trace(seed)
        } else {
            s.run_mission(seed)
        }
    };
    let flat: Vec<Result<MissionResult, ScenarioError>> = if opts.jobs <= 1 {
        work.iter().map(run).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(opts.jobs)
            .build()
            .expect("thread pool");
        pool.install(|| work.par_iter().map(run).collect())
    };
    let mut results: Vec<Vec<MissionResult>> = vec![Vec::with_capacity(opts.trials); cells.len()];
    for ((c, _), r) in work.iter().zip(flat) {
        results[*c].push(r?);
    }
    Ok(Outcome { results })
}

fn axis_text(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes `results.csv` (long format, one row per tag per trial). Sweeps
/// prepend `cell` and one `axis.<key>` column per axis.
pub fn write_results<W: Write>(out: W, cells: &[Cell], outcome: &Outcome) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    let axis_keys: Vec<String> = cells
        .first()
        .map(|c| c.axes.iter().map(|(k, _)| format!("axis.{k}")).collect())
        .unwrap_or_default();
    let mut header: Vec<String> = Vec::new();
    if !axis_keys.is_empty() {
        header.push("cell".into());
        header.extend(axis_keys.iter().cloned());
    }
    header.extend(RESULT_COLUMNS.map(String::from));
    w.write_record(&header)?;
    for (ci, (cell, runs)) in cells.iter().zip(&outcome.results).enumerate() {
        let c = &cell.scenario.config;
        let prefix: Vec<String> = if axis_keys.is_empty() {
            Vec::new()
        } else {
            std::iter::once(ci.to_string())
                .chain(cell.axes.iter().map(|(_, v)| axis_text(v)))
                .collect()
        };
        for (trial, r) in runs.iter().enumerate() {
            for tag in &r.tags {
                let mut row = prefix.clone();
                row.extend([
                    trial.to_string(),
                    c.method.name().to_string(),
                    c.terrain.class().name().to_string(),
                    c.planner.reward.name().to_string(),
                    tag.id.to_string(),
                    opt(tag.loc_time_s),
                    tag.error_m.to_string(),
                    tag.det_m4.to_string(),
                    r.seed.to_string(),
                ]);
                w.write_record(&row)?;
            }
        }
    }
    w.flush().map_err(|e| CliError::Csv(e.into()))?;
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct CellSummary {
    pub axes: serde_json::Map<String, Value>,
    pub method: String,
    pub terrain: String,
    pub reward_kind: String,
    pub base_seed: u64,
    pub summary: MonteCarloSummary,
}

pub fn summarize(cells: &[Cell], outcome: &Outcome, base_seed: u64) -> Vec<CellSummary> {
    cells
        .iter()
        .zip(&outcome.results)
        .map(|(cell, runs)| {
            let c = &cell.scenario.config;
            CellSummary {
                axes: cell.axes.iter().cloned().collect(),
                method: c.method.name().into(),
                terrain: c.terrain.class().name().into(),
                reward_kind: c.planner.reward.name().into(),
                base_seed,
                summary: MonteCarloSummary::from_results(runs),
            }
        })
        .collect()
}

/// One human-readable line per cell.
pub fn summary_line(cell: &Cell, s: &MonteCarloSummary) -> String {
    let stat = |x: &Option<wildtrack_core::scenario::Stats>| match x {
        Some(v) => format!("{:.1} ± {:.1} (median {:.1})", v.mean, v.std, v.median),
        None => "n/a".into(),
    };
    format!(
        "{}: {}/{} completed, time {} s, error {} m, silent void violations {}",
        cell.label(),
        s.completed,
        s.trials,
        stat(&s.mission_time_s),
        stat(&s.tag_error_m),
        s.silent_violations
    )
}

/// Writes results.csv, summary.json and, when requested, per-trial traces.
pub fn write_outputs(dir: &Path, cells: &[Cell], outcome: &Outcome, base_seed: u64) -> Result<Vec<CellSummary>, CliError> {
    fs::create_dir_all(dir).map_err(io_error(dir))?;
    let results = dir.join("results.csv");
    let file = fs::File::create(&results).map_err(io_error(&results))?;
    write_results(std::io::BufWriter::new(file), cells, outcome)?;

    let summaries = summarize(cells, outcome, base_seed);
    let path = dir.join("summary.json");
    let text = serde_json::to_string_pretty(&summaries).expect("summary serializes");
    fs::write(&path, text + "\n").map_err(io_error(&path))?;

    for (ci, runs) in outcome.results.iter().enumerate() {
        for (trial, r) in runs.iter().enumerate() {
            let Some(trace) = &r.trace else { continue };
            let tdir = dir.join("traces");
            fs::create_dir_all(&tdir).map_err(io_error(&tdir))?;
            let stem = if cells.len() > 1 {
                format!("cell{ci:03}_trial{trial:04}")
            } else {
                format!("trial{trial:04}")
            };
            let p = tdir.join(format!("{stem}.csv"));
            let mut w = csv::Writer::from_path(&p)?;
            for row in trace {
                w.serialize(row)?;
            }
            w.flush().map_err(io_error(&p))?;
            let p = tdir.join(format!("{stem}_decisions.csv"));
            let mut w = csv::Writer::from_path(&p)?;
            for d in &r.decisions {
                w.serialize(d)?;
            }
            w.flush().map_err(io_error(&p))?;
        }
    }
    Ok(summaries)
}

/// Parses `key=v1,v2,...`. Commas inside brackets or braces stay with
/// their value, so `filter.imprecision=[-5,1],[-20,8]` has two values.
pub fn parse_axis(spec: &str) -> Result<(String, Vec<Value>), CliError> {
    let (key, list) = spec.split_once('=').ok_or_else(|| CliError::BadAxis(spec.into()))?;
    let key = key.trim();
    if key.is_empty() {
        return Err(CliError::BadAxis(spec.into()));
    }
    let mut values = Vec::new();
    let mut depth = 0i32;
    let mut cur = String::new();
    for ch in list.chars() {
        match ch {
            '[' | '{' => depth += 1,
            ']' | '}' => depth -= 1,
            ',' if depth == 0 => {
                values.push(std::mem::take(&mut cur));
                continue;
            }
            _ => {}
        }
        cur.push(ch);
    }
    values.push(cur);
    let values: Vec<Value> = values
        .into_iter()
        .map(|v| v.trim().to_string())
        .filter(|v| !v.is_empty())
        .map(|v| serde_json::from_str(&v).unwrap_or(Value::String(v)))
        .collect();
    if values.is_empty() {
        return Err(CliError::EmptyAxis(key.into()));
    }
    Ok((key.into(), values))
}

/// Cross product of the axes, first axis outermost.
pub fn expand_axes(axes: &[(String, Vec<Value>)]) -> Vec<Vec<(String, Value)>> {
    let mut cells: Vec<Vec<(String, Value)>> = vec![Vec::new()];
    for (key, values) in axes {
        cells = cells
            .into_iter()
            .flat_map(|prefix| {
                values.iter().map(move |v| {
                    let mut c = prefix.clone();
                    c.push((key.clone(), v.clone()));
                    c
                })
            })
            .collect();
    }
    cells
}

/// Builds the sweep cells from a config file, base overrides and axis specs.
pub fn sweep_cells(config: &Path, overrides: &[String], axes: &[String]) -> Result<Vec<Cell>, CliError> {
    if axes.is_empty() {
        return Err(CliError::BadAxis("no --axis given".into()));
    }
    let axes = axes.iter().map(|a| parse_axis(a)).collect::<Result<Vec<_>, _>>()?;
    let mut cells = Vec::new();
    for assignment in expand_axes(&axes) {
        let mut all = overrides.to_vec();
        all.extend(assignment.iter().map(|(k, v)| format!("{k}={v}")));
        let cfg = load_config(config, &all)?;
        cells.push(Cell::new(assignment, &cfg)?);
    }
    Ok(cells)
}
