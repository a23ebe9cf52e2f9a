//! Command-line campaigns: argument handling, result files and exit codes.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};

use dualris::config::{parse_schemes, Scheme, SimConfig, SweepAxis};
use dualris::simulation::{convergence_study, monte_carlo_sweep, AggregateReport, ConvergenceReport};
use dualris::Error;

pub mod checks;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_PARSE: i32 = 3;
pub const EXIT_VALIDATION: i32 = 4;
pub const EXIT_IO: i32 = 5;
pub const EXIT_TRIAL: i32 = 6;
pub const EXIT_CHECKS: i32 = 7;
pub const EXIT_OTHER: i32 = 1;

#[derive(Debug, Parser)]
#[command(name = "dualris", version, about = "Dual-tier RIS downlink simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Iteration trace of the joint scheme (K = 50 unless configured).
    Converge(CommonArgs),
    /// Sum rate versus AP power budget.
    SweepPower(CommonArgs),
    /// Sum rate versus number of devices; exhaustive search is left out.
    SweepDevices(CommonArgs),
    /// Sum rate versus number of AP antennas.
    SweepAntennas(CommonArgs),
    /// Runs the built-in invariant checks.
    Validate {
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Key-value config file; missing keys take the defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub trials: Option<usize>,
    /// Output directory.
    #[arg(long, default_value = "results")]
    pub out: PathBuf,
    /// Comma-separated subset of jbpda,es,gs,rs.
    #[arg(long)]
    pub schemes: Option<String>,
    /// Overrides the number of devices.
    #[arg(long)]
    pub devices: Option<usize>,
    /// Comma-separated sweep values replacing the default grid.
    #[arg(long, value_delimiter = ',')]
    pub grid: Option<Vec<f64>>,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Usage(String),
    #[error("{failed} of {total} checks failed")]
    Checks { failed: usize, total: usize },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(Error::Parse { .. }) => EXIT_PARSE,
            CliError::Core(Error::Validation { .. }) => EXIT_VALIDATION,
            CliError::Core(Error::TrialFailed { .. }) => EXIT_TRIAL,
            CliError::Core(_) => EXIT_OTHER,
            CliError::Io { .. } => EXIT_IO,
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Checks { .. } => EXIT_CHECKS,
        }
    }
}

fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Reads and validates a config file.
pub fn parse_config(path: &Path) -> Result<SimConfig, CliError> {
    let text = fs::read_to_string(path).map_err(io_error(path))?;
    Ok(SimConfig::parse(&text)?)
}

pub fn default_grid(axis: SweepAxis) -> Vec<f64> {
    match axis {
        SweepAxis::None => Vec::new(),
        SweepAxis::Power => (0..=23).map(f64::from).collect(),
        SweepAxis::Devices => vec![25.0, 50.0, 100.0, 200.0],
        SweepAxis::Antennas => vec![64.0, 128.0, 256.0],
    }
}

/// Builds the campaign config for a subcommand. Returns the config and
/// notes for stderr.
pub fn build_config(command: &str, args: &CommonArgs) -> Result<(SimConfig, Vec<String>), CliError> {
    let mut notes = Vec::new();
    let mut config = match &args.config {
        Some(path) => parse_config(path)?,
        None => {
            let mut c = SimConfig::default();
            if command == "converge" {
                c.devices = 50;
            }
            c
        }
    };
    let axis = match command {
        "converge" => SweepAxis::None,
        "sweep-power" => SweepAxis::Power,
        "sweep-devices" => SweepAxis::Devices,
        "sweep-antennas" => SweepAxis::Antennas,
        other => return Err(CliError::Usage(format!("unknown command `{other}`"))),
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(trials) = args.trials {
        config.trials = trials;
    }
    if let Some(devices) = args.devices {
        if axis == SweepAxis::Devices {
            return Err(CliError::Usage("--devices conflicts with sweep-devices".into()));
        }
        config.devices = devices;
    }
    if let Some(list) = &args.schemes {
        config.schemes = parse_schemes(list).map_err(CliError::Usage)?;
    }
    if axis == SweepAxis::None && args.grid.is_some() {
        return Err(CliError::Usage("--grid has no meaning for converge".into()));
    }
    if config.sweep != axis {
        config.sweep = axis;
        config.grid = default_grid(axis);
    }
    if let Some(grid) = &args.grid {
        config.grid = grid.clone();
    }
    if command == "converge" {
        config.schemes = vec![Scheme::Jbpda];
    }
    if axis == SweepAxis::Devices && config.has(Scheme::Exhaustive) {
        config.schemes.retain(|s| *s != Scheme::Exhaustive);
        notes.push("exhaustive search excluded from the device sweep".into());
        if config.schemes.is_empty() {
            return Err(CliError::Usage(
                "no scheme left after excluding exhaustive search".into(),
            ));
        }
    }
    config.validate()?;
    Ok((config, notes))
}

pub fn sweep_csv(report: &AggregateReport) -> String {
    let mut s = String::from("sweep_value,scheme,mean_sum_rate_bps_hz,stderr,trials,gap_vs_jbpda_percent\n");
    for point in &report.points {
        for st in &point.stats {
            let gap = st.gap_vs_jbpda_percent.map_or_else(String::new, |g| format!("{g:.6}"));
            let _ = writeln!(
                s,
                "{},{},{:.6},{:.6},{},{}",
                point.value,
                st.scheme.as_str(),
                st.mean,
                st.stderr,
                st.trials,
                gap
            );
        }
    }
    s
}

pub fn trace_csv(report: &ConvergenceReport) -> String {
    let mut s = String::from("iteration,mean_sum_rate_bps_hz\n");
    for (i, v) in report.mean_trace.iter().enumerate() {
        let _ = writeln!(s, "{},{:.6}", i + 1, v);
    }
    s
}

pub fn config_hash(config: &SimConfig) -> String {
    Sha256::digest(config.to_text().as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub seed: u64,
    pub trials: usize,
    pub config_sha256: String,
    pub config: String,
    pub outputs: Vec<String>,
    pub created_unix_s: u64,
    pub wall_time_s: f64,
}

impl Manifest {
    pub fn new(command: &str, config: &SimConfig, outputs: Vec<String>, wall_time_s: f64) -> Self {
        Self {
            tool: "dualris",
            version: env!("CARGO_PKG_VERSION"),
            command: command.into(),
            seed: config.seed,
            trials: config.trials,
            config_sha256: config_hash(config),
            config: config.to_text(),
            outputs,
            created_unix_s: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map_or(0, |d| d.as_secs()),
            wall_time_s,
        }
    }
}

/// Writes `<stem>.csv` and `<stem>.manifest.json` under `dir`.
pub fn emit_results(dir: &Path, stem: &str, csv: &str, manifest: &Manifest) -> Result<Vec<PathBuf>, CliError> {
    fs::create_dir_all(dir).map_err(io_error(dir))?;
    let csv_path = dir.join(format!("{stem}.csv"));
    fs::write(&csv_path, csv).map_err(io_error(&csv_path))?;
    let json_path = dir.join(format!("{stem}.manifest.json"));
    let json = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    fs::write(&json_path, json + "\n").map_err(io_error(&json_path))?;
    Ok(vec![csv_path, json_path])
}

/// Runs one parsed command line, printing progress to stderr.
pub fn run(cli: Cli) -> Result<(), CliError> {
    let (name, args) = match &cli.command {
        Command::Validate { seed } => {
            let results = checks::run_all(*seed);
            for r in &results {
                println!("{} {}: {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
            }
            let failed = results.iter().filter(|r| !r.passed).count();
            return if failed == 0 {
                Ok(())
            } else {
                Err(CliError::Checks {
                    failed,
                    total: results.len(),
                })
            };
        }
        Command::Converge(a) => ("converge", a),
        Command::SweepPower(a) => ("sweep-power", a),
        Command::SweepDevices(a) => ("sweep-devices", a),
        Command::SweepAntennas(a) => ("sweep-antennas", a),
    };
    let (config, notes) = build_config(name, args)?;
    for n in notes {
        eprintln!("note: {n}");
    }
    let start = std::time::Instant::now();
    let stem = name.replace('-', "_");
    let csv = if name == "converge" {
        trace_csv(&convergence_study(&config)?)
    } else {
        sweep_csv(&monte_carlo_sweep(&config)?)
    };
    let outputs = vec![format!("{stem}.csv")];
    let manifest = Manifest::new(name, &config, outputs, start.elapsed().as_secs_f64());
    for path in emit_results(&args.out, &stem, &csv, &manifest)? {
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}
