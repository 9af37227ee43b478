//! Command-line front end.
//!
//! Exit codes: 0 on success, 2 for usage and configuration errors, 3 for I/O
//! failures. Standard output carries one summary line per run; diagnostics go
//! to standard error.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::harness::{
    annotate_summary, demo_oco_counterexample, demo_shared_controls, measure_regret_terms, parse_config_with,
    run_experiment, run_replicas, ConfigError, ConstantStrategy, ExperimentConfig, ExperimentLog, HarnessError,
    OfflineComparator, OgdStrategy, Scenario, Strategy, Summary,
};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "MAGPC_OUT_DIR";
const DEFAULT_OUT_DIR: &str = "results";

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "magpc", version, about = "Multi-agent online control experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the experiment described by a config file.
    Run(Common),
    /// ADMIRE aircraft preset.
    Admire(Common),
    /// Two-player OCO counterexample.
    DemoOco(Common),
    /// Shared-controls lower bound against one strategy.
    DemoSharedControls {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = StrategyChoice::Ogd)]
        strategy: StrategyChoice,
    },
    /// Regret decomposition against the best fixed joint policy (desk plant by default).
    RegretReport(Common),
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Flat `key = value` config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override one key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", value_parser = parse_override)]
    pub overrides: Vec<(String, String)>,
    /// Output directory (default: $MAGPC_OUT_DIR or ./results).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Seed-varied copies run in parallel, seeds `seed, seed + 1, …`.
    #[arg(long, default_value_t = 1)]
    pub replicas: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StrategyChoice {
    Zero,
    One,
    Half,
    Ogd,
}

impl StrategyChoice {
    pub fn build(self) -> Box<dyn Strategy> {
        match self {
            Self::Zero => Box::new(ConstantStrategy(0.0)),
            Self::One => Box::new(ConstantStrategy(1.0)),
            Self::Half => Box::new(ConstantStrategy(0.5)),
            Self::Ogd => Box::new(OgdStrategy::default()),
        }
    }
}

fn parse_override(s: &str) -> Result<(String, String), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected KEY=VALUE, got `{s}`"))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

/// Failure of a command, already classified by exit code.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Io(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            Self::Usage(_) => EXIT_USAGE,
            Self::Io(_) => EXIT_IO,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Usage(m) | Self::Io(m) => f.write_str(m),
        }
    }
}

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Io(e) => Self::Io(e.to_string()),
            other => Self::Usage(other.to_string()),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        Self::Usage(e.to_string())
    }
}

fn io_err(path: &Path, e: io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

/// Parse `args` (program name first), run, and return the exit code.
pub fn main_with<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK { stdout.write_all(text.as_bytes()) } else { stderr.write_all(text.as_bytes()) };
            return code;
        }
    };
    match dispatch(&cli.command) {
        Ok(lines) => {
            for line in lines {
                if writeln!(stdout, "{line}").is_err() {
                    return EXIT_IO;
                }
            }
            EXIT_OK
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.code()
        }
    }
}

fn load_config(common: &Common, fallback: Option<Scenario>, require_file: bool) -> Result<ExperimentConfig, CliError> {
    let text = match &common.config {
        // an unreadable config is bad input, not an output failure
        Some(path) => fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?,
        None if require_file => return Err(CliError::Usage("`run` needs --config <path>".into())),
        None => String::new(),
    };
    let mut overrides = common.overrides.clone();
    if let Some(seed) = common.seed {
        overrides.push(("seed".into(), seed.to_string()));
    }
    if let Some(s) = fallback {
        if common.config.is_none() && !overrides.iter().any(|(k, _)| k == "scenario") {
            overrides.insert(0, ("scenario".into(), s.to_string()));
        }
    }
    Ok(parse_config_with(&text, fallback, &overrides)?)
}

fn out_dir(common: &Common) -> PathBuf {
    common
        .out
        .clone()
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
}

fn write_files(dir: &Path, stem: &str, csv: &str, summary: &Summary) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let csv_path = dir.join(format!("{stem}.csv"));
    fs::write(&csv_path, csv).map_err(|e| io_err(&csv_path, e))?;
    let sum_path = dir.join(format!("{stem}.summary.txt"));
    fs::write(&sum_path, summary.to_text()).map_err(|e| io_err(&sum_path, e))?;
    Ok(csv_path)
}

fn run_stem(cfg: &ExperimentConfig) -> String {
    format!("{}-{}-seed{}", cfg.scenario, cfg.controller, cfg.seed)
}

fn summary_line(log: &ExperimentLog, csv: &Path) -> String {
    let s = &log.summary;
    let mut line = String::new();
    for key in ["scenario", "controller", "seed", "T", "total_cost", "average_cost", "max_state_norm"] {
        if let Some(v) = s.get(key) {
            let _ = write!(line, "{key}={v} ");
        }
    }
    let _ = write!(line, "csv={}", csv.display());
    line
}

/// Run one subcommand; returns the stdout lines.
pub fn dispatch(command: &Command) -> Result<Vec<String>, CliError> {
    match command {
        Command::Run(c) => simulate(c, load_config(c, None, true)?),
        Command::Admire(c) => simulate(c, load_config(c, Some(Scenario::Admire), false)?),
        Command::DemoOco(c) => {
            let cfg = load_config(c, Some(Scenario::DemoOco), false)?;
            let report = demo_oco_counterexample(cfg.horizon);
            let mut s = Summary::default();
            s.set("scenario", cfg.scenario);
            s.set("T", cfg.horizon);
            s.set("config_hash", cfg.hash());
            for (name, run) in [("scripted", &report.scripted), ("ogd", &report.ogd)] {
                s.set(&format!("{name}_multi_agent_regret"), run.multi_agent_regret);
                for (i, r) in run.player_regret.iter().enumerate() {
                    s.set(&format!("{name}_player{}_regret", i + 1), r);
                    s.set(&format!("{name}_player{}_best_loss", i + 1), run.best_response_loss[i]);
                }
            }
            let csv = write_files(&out_dir(c), "demo-oco", &report.to_csv(), &s)?;
            Ok(vec![format!(
                "demo-oco T={} scripted_regret={} ogd_regret={} csv={}",
                cfg.horizon,
                report.scripted.multi_agent_regret,
                report.ogd.multi_agent_regret,
                csv.display()
            )])
        }
        Command::DemoSharedControls { common, strategy } => {
            let cfg = load_config(common, Some(Scenario::SharedControls), false)?;
            let mut strat = strategy.build();
            let report = demo_shared_controls(strat.as_mut(), cfg.horizon);
            let mut s = Summary::default();
            s.set("scenario", cfg.scenario);
            s.set("strategy", &report.strategy);
            s.set("T", cfg.horizon);
            s.set("config_hash", cfg.hash());
            s.set("regret_u2_zero", report.regrets[0]);
            s.set("regret_u2_one", report.regrets[1]);
            s.set("max_regret", report.max_regret);
            s.set("clamped", report.clamped);
            let stem = format!("shared-controls-{}", report.strategy);
            let csv = write_files(&out_dir(common), &stem, &report.to_csv(), &s)?;
            Ok(vec![format!(
                "shared-controls strategy={} T={} max_regret={} csv={}",
                report.strategy,
                cfg.horizon,
                report.max_regret,
                csv.display()
            )])
        }
        Command::RegretReport(c) => {
            let cfg = load_config(c, Some(Scenario::Desk), false)?;
            let mut log = run_experiment(&cfg)?;
            let terms = measure_regret_terms(&log, &OfflineComparator { radius: cfg.radius, ..Default::default() })?;
            if !terms.comparator_converged {
                log::warn!("offline comparator did not converge (residual {:e})", terms.comparator_residual);
            }
            annotate_summary(&mut log, &terms);
            let csv = write_files(&out_dir(c), &format!("regret-{}", run_stem(&cfg)), &log.to_csv(), &log.summary)?;
            Ok(vec![format!(
                "regret-report T={} regret={} terms_sum={} csv={}",
                cfg.horizon,
                terms.total,
                terms.sum(),
                csv.display()
            )])
        }
    }
}

fn simulate(common: &Common, cfg: ExperimentConfig) -> Result<Vec<String>, CliError> {
    if cfg.scenario.agents().is_none() {
        return Err(CliError::Usage(format!("scenario {} is a demo; use its own subcommand", cfg.scenario)));
    }
    let dir = out_dir(common);
    let logs = if common.replicas <= 1 {
        vec![run_experiment(&cfg)]
    } else {
        run_replicas(&cfg, common.replicas)
    };
    let mut lines = Vec::with_capacity(logs.len());
    for log in logs {
        let log = log?;
        let csv = write_files(&dir, &run_stem(&log.config), &log.to_csv(), &log.summary)?;
        lines.push(summary_line(&log, &csv));
    }
    Ok(lines)
}
