use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use dyps::pipeline::write_bus_log;
use dyps::{compare, export_trace, simulate, DecodeProfile, EnergyReport, Policy, ProcessorId, Scenario, TraceFormat};

#[derive(Debug, Parser)]
#[command(name = "dyps", version, about = "Simulate chunk-level GPP/DSP decoder switching and its energy")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a scenario and write its power trace and energy report.
    Run(RunConfig),
    /// Print the energy saving of REPORT_B relative to REPORT_A.
    Compare { report_a: PathBuf, report_b: PathBuf },
    /// Check a decode profile and print real-time capability per entry.
    ValidateProfile {
        #[arg(env = "DYPS_PROFILE")]
        profile: PathBuf,
        #[arg(long, default_value_t = 30.0)]
        framerate: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PolicyArg {
    Threshold,
    Argmin,
    Forced,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Csv,
    Json,
}

#[derive(Debug, clap::Args)]
pub struct RunConfig {
    #[arg(long)]
    pub scenario: PathBuf,
    #[arg(long, env = "DYPS_PROFILE")]
    pub profile: PathBuf,
    /// Overrides the scenario's policy field. Defaults to threshold.
    #[arg(long, value_enum)]
    pub policy: Option<PolicyArg>,
    /// Processor for `--policy forced`.
    #[arg(long, value_parser = parse_proc)]
    pub proc: Option<ProcessorId>,
    /// Decode everything on the DSP.
    #[arg(long, conflicts_with_all = ["policy", "proc"])]
    pub disable_switching: bool,
    #[arg(long)]
    pub out_trace: Option<PathBuf>,
    #[arg(long)]
    pub out_report: Option<PathBuf>,
    /// Bus log as JSON lines.
    #[arg(long)]
    pub bus_log: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
    pub format: FormatArg,
}

fn parse_proc(s: &str) -> Result<ProcessorId, String> {
    s.parse()
}

pub fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(cfg) => cmd_run(&cfg),
        Command::Compare { report_a, report_b } => cmd_compare(&report_a, &report_b),
        Command::ValidateProfile { profile, framerate } => cmd_validate_profile(&profile, framerate),
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load_profile(path: &Path) -> Result<DecodeProfile> {
    DecodeProfile::from_json(&read(path)?).with_context(|| format!("loading profile {}", path.display()))
}

fn resolve_policy(cfg: &RunConfig, scenario: &Scenario) -> Result<Policy> {
    if cfg.disable_switching {
        if matches!(scenario.policy, Some(Policy::ForcedProcessor { .. })) && cfg.policy.is_none() {
            bail!("--disable-switching conflicts with the scenario's forced policy");
        }
        return Ok(Policy::forced(ProcessorId::Dsp));
    }
    Ok(match (cfg.policy, cfg.proc) {
        (Some(PolicyArg::Forced), Some(proc)) => Policy::forced(proc),
        (Some(PolicyArg::Forced), None) => bail!("--policy forced requires --proc GPP|DSP"),
        (_, Some(_)) => bail!("--proc is only valid with --policy forced"),
        (Some(PolicyArg::Threshold), None) => Policy::threshold(),
        (Some(PolicyArg::Argmin), None) => Policy::EnergyArgmin,
        (None, None) => scenario.policy.clone().unwrap_or_default(),
    })
}

pub fn cmd_run(cfg: &RunConfig) -> Result<()> {
    let scenario = Scenario::from_json(&read(&cfg.scenario)?)
        .with_context(|| format!("parsing scenario {}", cfg.scenario.display()))?;
    let profile = load_profile(&cfg.profile)?;
    let policy = resolve_policy(cfg, &scenario)?;
    let manifest = scenario.manifest()?;
    let out = simulate(&manifest, &policy, &profile)?;

    if let Some(path) = &cfg.out_trace {
        let format = match cfg.format {
            FormatArg::Csv => TraceFormat::Csv,
            FormatArg::Json => TraceFormat::Json,
        };
        export_trace(&out.trace, format, path).with_context(|| format!("writing {}", path.display()))?;
    }
    if let Some(path) = &cfg.out_report {
        fs::write(path, out.report.to_json() + "\n").with_context(|| format!("writing {}", path.display()))?;
    }
    if let Some(path) = &cfg.bus_log {
        let file = fs::File::create(path).with_context(|| format!("writing {}", path.display()))?;
        write_bus_log(&out.bus, std::io::BufWriter::new(file))?;
    }

    let r = &out.report;
    println!(
        "total {:.6} J, switches {}, deadline misses {}",
        r.total_energy_j, r.switch_count, r.deadline_misses
    );
    Ok(())
}

pub fn cmd_compare(a: &Path, b: &Path) -> Result<()> {
    let base = EnergyReport::from_json(&read(a)?).with_context(|| format!("parsing {}", a.display()))?;
    let variant = EnergyReport::from_json(&read(b)?).with_context(|| format!("parsing {}", b.display()))?;
    println!("{}", compare(&base, &variant)?);
    Ok(())
}

pub fn cmd_validate_profile(path: &Path, framerate: f64) -> Result<()> {
    let profile = load_profile(path)?;
    println!("valid profile: {} entries", profile.entries.len());
    for cap in profile.real_time_report(framerate) {
        println!(
            "{} {} [{}, {}) kbps @ {} MHz: span {:.3} ms, {}",
            cap.proc,
            cap.resolution,
            cap.bitrate_kbps.lo,
            cap.bitrate_kbps.hi,
            cap.clock_mhz,
            cap.span_ms,
            if cap.real_time {
                format!("real-time at {framerate} Hz")
            } else {
                format!("not real-time at {framerate} Hz")
            }
        );
    }
    Ok(())
}
