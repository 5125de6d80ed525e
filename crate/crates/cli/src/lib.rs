//! Command implementations behind the `tfqkd` binary.

mod config;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use tfqkd::keyrate::{analytic_report, analyze_observations, KeyRateReport};
use tfqkd::model::{ChannelParams, IntensitySet};
use tfqkd::optics::timing::{check_modulation_windows, LoopGeometry};
use tfqkd::sim::{simulate_run, tallies_to_observations, ObservedStats};
use tfqkd::strategy::{apply_strategy, optimize_intensities, scan_losses, scan_to_csv};

use config::{read_json, IntensitySpec, RunConfig};

#[derive(Debug)]
pub enum CliError {
    /// Ran correctly but the outcome fails a requested check.
    Domain(String),
    Config(String),
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Domain(_) => 1,
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Domain(m) => write!(f, "{m}"),
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<tfqkd::Error> for CliError {
    fn from(e: tfqkd::Error) -> Self {
        CliError::Config(e.to_string())
    }
}

#[derive(Parser, Debug)]
#[command(name = "tfqkd", version, about = "Twin-field QKD rates over asymmetric channels")]
struct Cli {
    /// Worker threads (defaults to all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Run configuration (JSON)
    #[arg(long)]
    config: PathBuf,

    /// Output directory, overrides the config
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Monte Carlo emulation; writes tally.json and observations.json
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Seed, overrides the config
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Key rates from observations or from the analytic model; writes report.json
    Keyrate {
        #[command(flatten)]
        common: Common,
        /// Observations file written by `simulate`
        #[arg(long, conflicts_with = "analytic", required_unless_present = "analytic")]
        observations: Option<PathBuf>,
        /// Use expected counts instead of observations
        #[arg(long)]
        analytic: bool,
        /// Exit with status 1 if either rate is zero
        #[arg(long)]
        require_positive: bool,
    },
    /// Optimized loss sweep; writes scan.csv
    Scan {
        #[command(flatten)]
        common: Common,
        /// Exit with status 1 if any row has zero rate
        #[arg(long)]
        require_positive: bool,
    },
    /// Check that counter-propagating pulses never meet inside a modulator
    Timing {
        /// Loop geometry (JSON)
        #[arg(long)]
        config: PathBuf,
    },
}

fn output_dir(common: &Common, cfg: &RunConfig) -> PathBuf {
    common
        .out
        .clone()
        .or_else(|| cfg.output.as_ref().map(|o| o.dir.clone()))
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    Ok(path)
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<PathBuf, CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    text.push('\n');
    write_file(dir, name, &text)
}

/// Effective channel and intensities after applying the strategy and, if
/// requested, optimizing.
fn resolve_setting(cfg: &RunConfig) -> Result<(ChannelParams, IntensitySet), CliError> {
    let channel = cfg.channel.resolve()?;
    match cfg.intensities()? {
        IntensitySpec::Explicit(set) => {
            set.validate()?;
            let applied = apply_strategy(&channel, cfg.strategy)?;
            if let Some(w) = &applied.warning {
                eprintln!("warning: {w}");
            }
            if applied.equal_signals && set.s_a != set.s_b {
                return Err(CliError::Config(format!(
                    "intensities: strategy {} requires s_a = s_b",
                    cfg.strategy
                )));
            }
            Ok((applied.channel, set))
        }
        IntensitySpec::Directive(_) => {
            let opt = optimize_intensities(&channel, cfg.strategy, &cfg.protocol, cfg.objective)?;
            if let Some(w) = &opt.warning {
                eprintln!("warning: {w}");
            }
            if !opt.informative {
                eprintln!("warning: optimization found no positive rate");
            }
            let effective = opt.report.channel.unwrap_or(channel);
            Ok((effective, opt.intensities))
        }
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.6e}"))
}

fn print_observations(obs: &ObservedStats) {
    println!("{:<14} {:>14} {:>14} {:>14}", "setting", "events", "trials", "ratio");
    println!(
        "{:<14} {:>14} {:>14} {:>14}",
        "x gain",
        obs.q_x.events,
        obs.q_x.trials,
        fmt_opt(obs.q_x.estimate)
    );
    println!(
        "{:<14} {:>14} {:>14} {:>14}",
        "x qber",
        obs.e_x.events,
        obs.e_x.trials,
        fmt_opt(obs.e_x.estimate)
    );
    const LABELS: [&str; 3] = ["mu", "nu", "omega"];
    for (i, row) in obs.q_z.iter().enumerate() {
        for (j, c) in row.iter().enumerate() {
            let label = format!("z {}/{}", LABELS[i], LABELS[j]);
            println!("{label:<14} {:>14} {:>14} {:>14}", c.events, c.trials, fmt_opt(c.estimate));
        }
    }
}

fn print_report(report: &KeyRateReport) {
    println!("q_x    {:.6e}", report.q_x);
    println!("e_x    {:.6e}", report.e_x);
    println!("e_ph   {:.6e}", report.e_ph_up);
    println!("r_inf  {:.6e}", report.r_inf);
    println!("r_fin  {:.6e}", report.r_fin);
}

fn cmd_simulate(common: &Common, seed: Option<u64>) -> Result<(), CliError> {
    let cfg: RunConfig = read_json(&common.config)?;
    let (channel, intensities) = resolve_setting(&cfg)?;
    let seed = seed.unwrap_or(cfg.seed);
    let tally = simulate_run(&cfg.protocol, &channel, &intensities, seed)?;
    let obs = tallies_to_observations(&tally)?;
    let dir = output_dir(common, &cfg);
    write_json(&dir, "tally.json", &tally)?;
    let path = write_json(&dir, "observations.json", &obs)?;
    print_observations(&obs);
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn cmd_keyrate(
    common: &Common,
    observations: Option<&Path>,
    require_positive: bool,
) -> Result<(), CliError> {
    let cfg: RunConfig = read_json(&common.config)?;
    let report = match observations {
        Some(path) => {
            let obs: ObservedStats = read_json(path)?;
            let channel = cfg.channel.resolve().ok();
            analyze_observations(&obs, &cfg.protocol, channel)?
        }
        None => {
            let (channel, intensities) = resolve_setting(&cfg)?;
            analytic_report(&channel, &intensities, &cfg.protocol)?
        }
    };
    let dir = output_dir(common, &cfg);
    let path = write_json(&dir, "report.json", &report)?;
    print_report(&report);
    for (regime, b) in [("infinite", &report.infinite), ("finite", &report.finite)] {
        if b.yields_fallback {
            eprintln!("warning: {regime}-data gains admit no consistent yields; trivial bounds used");
        }
    }
    eprintln!("wrote {}", path.display());
    if require_positive && !(report.r_inf > 0.0 && report.r_fin > 0.0) {
        return Err(CliError::Domain(format!(
            "rate not positive (r_inf = {:e}, r_fin = {:e})",
            report.r_inf, report.r_fin
        )));
    }
    Ok(())
}

fn cmd_scan(common: &Common, require_positive: bool) -> Result<(), CliError> {
    let cfg: RunConfig = read_json(&common.config)?;
    let block = cfg
        .scan
        .as_ref()
        .ok_or_else(|| CliError::Config("scan: missing block".into()))?;
    let conditions = cfg.scan_conditions(block);
    let rows = scan_losses(&block.losses_db, &block.strategies, &cfg.protocol, &conditions)?;
    let csv = scan_to_csv(&rows);
    let dir = output_dir(common, &cfg);
    let path = write_file(&dir, "scan.csv", &csv)?;
    print!("{csv}");
    let empty: Vec<String> = rows
        .iter()
        .filter(|r| !r.informative)
        .map(|r| format!("{} dB {}", r.total_loss_db, r.strategy))
        .collect();
    if !empty.is_empty() {
        eprintln!("zero-rate rows: {}", empty.join(", "));
    }
    eprintln!("wrote {}", path.display());
    if require_positive && !empty.is_empty() {
        return Err(CliError::Domain(format!("{} rows have zero rate", empty.len())));
    }
    Ok(())
}

fn cmd_timing(path: &Path) -> Result<(), CliError> {
    let geometry: LoopGeometry = read_json(path)?;
    let report = check_modulation_windows(&geometry)?;
    println!(
        "{:<16} {:>14} {:>14} {:>14} {:>12}",
        "modulator", "cw_ns", "ccw_ns", "separation_ns", "margin_ns"
    );
    for m in &report.modulators {
        println!(
            "{:<16} {:>14.3} {:>14.3} {:>14.3} {:>12.3}",
            m.name, m.cw_arrival_ns, m.ccw_arrival_ns, m.separation_ns, m.margin_ns
        );
    }
    if report.pass {
        println!("PASS");
        Ok(())
    } else {
        println!("FAIL");
        Err(CliError::Domain(format!("pulses overlap in: {}", report.conflicts.join(", "))))
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Simulate { common, seed } => cmd_simulate(common, *seed),
        Command::Keyrate {
            common,
            observations,
            require_positive,
            ..
        } => cmd_keyrate(common, observations.as_deref(), *require_positive),
        Command::Scan {
            common,
            require_positive,
        } => cmd_scan(common, *require_positive),
        Command::Timing { config } => cmd_timing(config),
    }
}

/// Parses `args` (program name first) and runs the command. Returns the
/// process exit code.
pub fn run_from<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code().clamp(0, 255) as u8;
        }
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        pool = pool.num_threads(n);
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("config error: {e}");
            return 2;
        }
    };
    match pool.install(|| run(cli)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::run_from;

    #[test]
    fn parse_failures_map_to_usage_exit_code() {
        assert_eq!(run_from(["tfqkd", "frobnicate"]), 2);
        assert_eq!(run_from(["tfqkd", "keyrate", "--analytic", "--observations", "x", "--config", "y"]), 2);
        assert_eq!(run_from(["tfqkd", "--help"]), 0);
    }

    #[test]
    fn missing_config_file_is_io() {
        assert_eq!(run_from(["tfqkd", "timing", "--config", "/nonexistent/loop.json"]), 3);
    }
}
