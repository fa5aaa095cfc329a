use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;
use wildtrack_cli::detector::{bearings_from_log, synthetic_study, write_study_errors};
use wildtrack_cli::{io_error, load_config, run_cells, summary_line, sweep_cells, write_outputs, Cell, CliError, RunOptions};
use wildtrack_core::bearing::{AoaDetector, BearingConfig, RotationSynth};
use wildtrack_core::scenario::{load_pattern, AntennaSource};

#[derive(Parser)]
#[command(name = "wildtrack", version, about = "UAV radio-tag localization missions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run Monte-Carlo missions for one configuration.
    Run(RunArgs),
    /// Run the cross product of one or more config axes.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// `key=v1,v2,...`; repeat for more axes.
        #[arg(long = "axis", required = true)]
        axes: Vec<String>,
    },
    /// Parse, override and validate a config, then print the resolved form.
    ValidateConfig {
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "override", short = 'o')]
        overrides: Vec<String>,
    },
    /// Bearings from a rotation log, or a synthetic detector comparison.
    DetectorStudy(StudyArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// `key.path=value`, applied in order.
    #[arg(long = "override", short = 'o')]
    overrides: Vec<String>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; defaults to the available cores.
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long, env = "WILDTRACK_OUT_DIR", default_value = "wildtrack-out")]
    out: PathBuf,
    /// Also write per-trial state and decision traces.
    #[arg(long)]
    traces: bool,
}

#[derive(Args)]
struct StudyArgs {
    /// Rotation log CSV (`timestamp,tag_id,rssi_dbm,heading_rad`). Without
    /// it, rotations are synthesized.
    #[arg(long)]
    log: Option<PathBuf>,
    /// Pulses a full rotation would carry, for the detection fraction.
    #[arg(long, default_value_t = 20)]
    expected_pulses: usize,
    /// Antenna pattern table; the built-in two-lobe pattern otherwise.
    #[arg(long)]
    pattern: Option<PathBuf>,
    #[arg(long, default_value_t = 500)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    pulses: Option<usize>,
    #[arg(long)]
    detection_rate: Option<f64>,
    #[arg(long)]
    sigma_db: Option<f64>,
    #[arg(long, env = "WILDTRACK_OUT_DIR", default_value = "wildtrack-out")]
    out: PathBuf,
}

fn jobs(requested: Option<usize>) -> usize {
    requested.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn execute(cells: Vec<Cell>, args: &RunArgs) -> Result<(), CliError> {
    let first = &cells[0].scenario.config;
    let opts = RunOptions {
        trials: args.trials.unwrap_or(first.trials),
        base_seed: args.seed.unwrap_or(first.seed),
        jobs: jobs(args.jobs),
        traces: args.traces,
    };
    info!(
        "{} cell(s) x {} trial(s), base seed {}, {} job(s)",
        cells.len(),
        opts.trials,
        opts.base_seed,
        opts.jobs
    );
    let outcome = run_cells(&cells, &opts)?;
    let summaries = write_outputs(&args.out, &cells, &outcome, opts.base_seed)?;
    for (cell, s) in cells.iter().zip(&summaries) {
        println!("{}", summary_line(cell, &s.summary));
    }
    println!("results written to {}", args.out.display());
    Ok(())
}

fn study(args: &StudyArgs) -> Result<(), CliError> {
    let pattern = match &args.pattern {
        Some(path) => load_pattern(&AntennaSource::File { path: path.clone() })?,
        None => load_pattern(&AntennaSource::TwoLobe)?,
    };
    let detector = AoaDetector::new(&pattern, BearingConfig::default());
    if let Some(log) = &args.log {
        let stdout = io::stdout();
        bearings_from_log(log, args.expected_pulses, &detector, stdout.lock())?;
        return Ok(());
    }
    let mut synth = RotationSynth::default();
    if let Some(n) = args.pulses {
        synth.pulses = n;
    }
    if let Some(r) = args.detection_rate {
        synth.detection_rate = r;
    }
    if let Some(s) = args.sigma_db {
        synth.sigma_db = s;
    }
    let (errors, summary) = synthetic_study(&pattern, &detector, &synth, args.trials, args.seed);
    fs::create_dir_all(&args.out).map_err(io_error(&args.out))?;
    let path = args.out.join("detector_errors.csv");
    let file = fs::File::create(&path).map_err(io_error(&path))?;
    write_study_errors(io::BufWriter::new(file), &errors)?;
    let path = args.out.join("detector_study.json");
    let text = serde_json::to_string_pretty(&summary).expect("summary serializes");
    fs::write(&path, text + "\n").map_err(io_error(&path))?;
    let line = |name: &str, d: &wildtrack_cli::detector::DetectorSummary| {
        println!(
            "{name:<12} >90° errors {:5.1}%  median {:.1}°",
            100.0 * d.fraction_above_90deg,
            d.median_error_deg.unwrap_or(f64::NAN)
        )
    };
    println!("{} rotations, {} rejected", summary.trials, summary.rejected);
    line("corr_coef", &summary.corr_coef);
    line("cross_corr", &summary.cross_corr);
    line("compensated", &summary.compensated);
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run(args) => {
            let cfg = load_config(&args.config, &args.overrides)?;
            let cell = Cell::new(Vec::new(), &cfg)?;
            execute(vec![cell], &args)
        }
        Command::Sweep { run, axes } => {
            let cells = sweep_cells(&run.config, &run.overrides, &axes)?;
            execute(cells, &run)
        }
        Command::ValidateConfig { config, overrides } => {
            let cfg = load_config(&config, &overrides)?;
            let text = serde_json::to_string_pretty(&cfg).expect("config serializes");
            writeln!(io::stdout(), "{text}").map_err(io_error(&config))?;
            Ok(())
        }
        Command::DetectorStudy(args) => study(&args),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
