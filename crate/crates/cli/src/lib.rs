//! Command-line front end for the mimo-sic BER sweeps: argument parsing,
//! figure presets, and CSV / JSON / SVG output.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use mimo_sic::detectors::{DetectorConfig, DetectorKind, LlrReference};
use mimo_sic::harness::{
    run_sweep_with_threads, HarnessError, SweepConfig, SweepReport, DEFAULT_ML_BUDGET,
};
use thiserror::Error;

pub mod output;
pub mod plot;
pub mod preset;

pub use output::RunManifest;
pub use preset::Figure;

pub const THREADS_ENV: &str = "MIMO_SIC_THREADS";

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Clap(#[from] clap::Error),
    #[error("usage: {0}")]
    Usage(String),
    #[error("{0}")]
    Io(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Harness(#[from] HarnessError),
}

impl CliError {
    fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Io(format!("{}: {e}", path.display()))
    }

    /// 2 for usage errors, 1 for anything that went wrong while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Clap(e) => e.exit_code(),
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Parser)]
#[command(
    name = "mimo-sic",
    version,
    about = "Monte-Carlo BER sweeps for SIC-family MIMO detectors"
)]
pub struct Cli {
    /// Transmit antennas
    #[arg(long)]
    pub nt: Option<usize>,
    /// Receive antennas (defaults to --nt)
    #[arg(long)]
    pub nr: Option<usize>,
    /// QAM order
    #[arg(long = "mod", value_parser = ["4", "16"])]
    pub modulation: Option<String>,
    /// Comma-separated detectors: ZF,MMSE,SIC,MF-SIC,IMF-SIC,OIMF-SIC,ML
    #[arg(long)]
    pub detectors: Option<String>,
    /// SNR grid in dB as start:step:stop (inclusive)
    #[arg(long)]
    pub snr: Option<String>,
    /// Trials per SNR point
    #[arg(long)]
    pub trials: Option<u64>,
    /// Shadow-area radius
    #[arg(long)]
    pub dth: Option<f64>,
    /// Candidates per unreliable layer
    #[arg(long = "S")]
    pub s: Option<usize>,
    /// Recursion budget
    #[arg(long = "L")]
    pub l: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output file (stdout when absent)
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Figure preset
    #[arg(long, value_enum, conflicts_with = "manifest")]
    pub figure: Option<Figure>,
    /// Replay the configuration of a run manifest
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Also write an SVG plot
    #[arg(long)]
    pub svg: Option<PathBuf>,
    /// Zero the noise vector (filters still use each point's SNR)
    #[arg(long)]
    pub noiseless: bool,
    /// OIMF-SIC ordering with the full-channel R instead of the remaining columns
    #[arg(long)]
    pub llr_fixed_r: bool,
}

/// A resolved invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct RunPlan {
    pub config: SweepConfig,
    pub format: Format,
    pub out: Option<PathBuf>,
    pub svg: Option<PathBuf>,
    pub title: String,
}

pub fn parse_snr_range(text: &str) -> Result<Vec<f64>, CliError> {
    let bad = || {
        CliError::Usage(format!(
            "malformed SNR range '{text}', expected start:step:stop"
        ))
    };
    let parts: Vec<f64> = text
        .split(':')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| bad())?;
    let [start, step, stop] = parts[..] else {
        return Err(bad());
    };
    if !(start.is_finite() && stop.is_finite() && step.is_finite()) || step <= 0.0 || stop < start {
        return Err(bad());
    }
    Ok(preset::grid(start, step, stop))
}

pub fn parse_detectors(text: &str) -> Result<Vec<DetectorKind>, CliError> {
    let kinds: Vec<DetectorKind> = text
        .split(',')
        .map(|s| s.parse::<DetectorKind>())
        .collect::<Result<_, _>>()
        .map_err(CliError::Usage)?;
    if kinds.is_empty() {
        return Err(CliError::Usage("empty detector list".into()));
    }
    Ok(kinds)
}

fn default_config() -> SweepConfig {
    SweepConfig {
        nt: 4,
        nr: 4,
        m: 4,
        detectors: DetectorKind::ALL
            .iter()
            .map(|&k| DetectorConfig::new(k))
            .collect(),
        snr_grid_db: preset::grid(0.0, 2.0, 14.0),
        trials: preset::FIGURE_TRIALS,
        base_seed: preset::DEFAULT_SEED,
        noiseless: false,
        ml_budget: DEFAULT_ML_BUDGET,
    }
}

pub fn parse_args<I, T>(argv: I) -> Result<RunPlan, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    resolve(Cli::try_parse_from(argv)?)
}

pub fn resolve(cli: Cli) -> Result<RunPlan, CliError> {
    let (mut cfg, base, title) = match (&cli.figure, &cli.manifest) {
        (Some(f), _) => {
            let name = f
                .to_possible_value()
                .expect("no skipped variants")
                .get_name()
                .to_string();
            (f.config(), Some(name.clone()), name)
        }
        (None, Some(path)) => {
            let m = RunManifest::load(path)?;
            (
                m.config,
                Some("manifest".to_string()),
                format!("replay of {}", path.display()),
            )
        }
        (None, None) => (default_config(), None, String::new()),
    };

    let m = cli
        .modulation
        .as_deref()
        .map(|s| s.parse::<usize>().expect("restricted by clap"));
    let system = [
        ("--nt", cli.nt, cfg.nt),
        ("--nr", cli.nr, cfg.nr),
        ("--mod", m, cfg.m),
    ];
    if let Some(base) = &base {
        for (flag, given, preset) in system {
            if given.is_some_and(|g| g != preset) {
                return Err(CliError::Usage(format!(
                    "{flag} conflicts with the {base} setup"
                )));
            }
        }
    } else {
        if let Some(nt) = cli.nt {
            cfg.nt = nt;
            cfg.nr = nt;
        }
        if let Some(nr) = cli.nr {
            cfg.nr = nr;
        }
        if let Some(m) = m {
            cfg.m = m;
        }
    }

    if let Some(list) = &cli.detectors {
        let kinds = parse_detectors(list)?;
        let mut picked = Vec::with_capacity(kinds.len());
        for k in kinds {
            if picked.iter().any(|d: &DetectorConfig| d.kind == k) {
                return Err(CliError::Usage(format!("detector {k} listed twice")));
            }
            let from_base = cfg.detectors.iter().find(|d| d.kind == k).copied();
            picked.push(from_base.unwrap_or_else(|| DetectorConfig::new(k)));
        }
        cfg.detectors = picked;
    }
    if base.is_none() && cfg.m == 16 && cli.s.is_none() {
        for d in &mut cfg.detectors {
            d.s = 8;
        }
    }
    for d in &mut cfg.detectors {
        if let Some(v) = cli.dth {
            d.d_th = v;
        }
        if let Some(v) = cli.s {
            d.s = v;
        }
        if let Some(v) = cli.l {
            d.l = v;
        }
        if cli.llr_fixed_r {
            d.llr_reference = LlrReference::Full;
        }
    }
    if let Some(snr) = &cli.snr {
        cfg.snr_grid_db = parse_snr_range(snr)?;
    }
    if let Some(t) = cli.trials {
        cfg.trials = t;
    }
    if let Some(seed) = cli.seed {
        cfg.base_seed = seed;
    }
    if cli.noiseless {
        cfg.noiseless = true;
    }
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;

    let title = if title.is_empty() {
        format!("{}x{} {}-QAM", cfg.nt, cfg.nr, cfg.m)
    } else {
        format!("{title}: {}x{} {}-QAM", cfg.nt, cfg.nr, cfg.m)
    };
    Ok(RunPlan {
        config: cfg,
        format: cli.format,
        out: cli.out,
        svg: cli.svg,
        title,
    })
}

/// Worker count from `MIMO_SIC_THREADS`; unset means 0 (rayon decides).
pub fn threads_from_env() -> Result<usize, CliError> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => v.trim().parse().map_err(|_| {
            CliError::Usage(format!(
                "{THREADS_ENV} must be a non-negative integer, got '{v}'"
            ))
        }),
        Err(_) => Ok(0),
    }
}

/// Runs the sweep and writes every requested file. Returns the report.
pub fn execute(plan: &RunPlan, threads: usize) -> Result<SweepReport, CliError> {
    let report = run_sweep_with_threads(&plan.config, threads)?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    let mut outputs: Vec<PathBuf> = plan.out.iter().cloned().collect();
    outputs.extend(plan.svg.iter().cloned());
    let manifest = RunManifest::new(plan.config.clone(), outputs, report.warnings.clone());

    let body = match plan.format {
        Format::Csv => output::csv_string(&report.curves)?,
        Format::Json => output::json_string(&report.curves, &report.diagnostics, &manifest)?,
    };
    match &plan.out {
        Some(path) => {
            output::write_file(path, &body)?;
            let text =
                serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Io(e.to_string()))?;
            output::write_file(&output::manifest_path(path), &(text + "\n"))?;
        }
        None => print!("{body}"),
    }
    if let Some(path) = &plan.svg {
        output::write_file(path, &plot::render_svg(&report.curves, &plan.title))?;
    }
    Ok(report)
}

/// Full command-line entry point; returns the process exit code.
pub fn main_with<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let result = parse_args(argv).and_then(|plan| {
        let threads = threads_from_env()?;
        execute(&plan, threads)
    });
    match result {
        Ok(_) => 0,
        Err(CliError::Clap(e)) => {
            let _ = e.print();
            e.exit_code()
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Result<RunPlan, CliError> {
        parse_args(std::iter::once("mimo-sic").chain(args.iter().copied()))
    }

    #[test]
    fn fig2_preset() {
        let plan = parse(&["--figure", "fig2"]).unwrap();
        let c = &plan.config;
        assert_eq!((c.nt, c.nr, c.m, c.trials), (4, 4, 4, 10_000));
        assert_eq!(c.detectors.len(), 7);
        assert!(c
            .detectors
            .iter()
            .all(|d| (d.d_th, d.s, d.l) == (0.2, 4, 2)));
    }

    #[test]
    fn fig4_oimf_variant() {
        let plan = parse(&["--figure", "fig4"]).unwrap();
        let o = plan
            .config
            .detectors
            .iter()
            .find(|d| d.kind == DetectorKind::OimfSic)
            .unwrap();
        assert_eq!((o.l, o.d_th), (3, 0.5));
    }

    #[test]
    fn usage_errors() {
        for args in [
            &["--mod", "8"][..],
            &["--detectors", "SIC,FOO"],
            &["--snr", "0:2"],
            &["--snr", "0:-1:10"],
            &["--snr", "10:1:0"],
            &["--snr", "a:b:c"],
            &["--figure", "fig2", "--figure", "fig3"],
            &["--figure", "fig2", "--nt", "8"],
            &["--figure", "fig2", "--manifest", "x.json"],
            &["--detectors", "SIC,SIC"],
            &["--S", "5"],
            &["--L", "0"],
            &["--trials", "0"],
        ] {
            let err = parse(args).unwrap_err();
            assert_eq!(err.exit_code(), 2, "{args:?}: {err}");
        }
    }

    #[test]
    fn explicit_flags() {
        let plan = parse(&[
            "--nt",
            "2",
            "--nr",
            "3",
            "--mod",
            "16",
            "--detectors",
            "mf-sic,ML",
            "--snr",
            "0:5:10",
            "--trials",
            "7",
            "--dth",
            "0.4",
            "--S",
            "6",
            "--L",
            "3",
            "--seed",
            "9",
            "--format",
            "json",
            "--llr-fixed-r",
        ])
        .unwrap();
        let c = &plan.config;
        assert_eq!((c.nt, c.nr, c.m, c.trials, c.base_seed), (2, 3, 16, 7, 9));
        assert_eq!(c.snr_grid_db, vec![0.0, 5.0, 10.0]);
        assert_eq!(c.detectors.len(), 2);
        assert!(c
            .detectors
            .iter()
            .all(|d| (d.d_th, d.s, d.l, d.llr_reference) == (0.4, 6, 3, LlrReference::Full)));
        assert_eq!(plan.format, Format::Json);
    }

    #[test]
    fn preset_allows_run_size_overrides() {
        let plan = parse(&[
            "--figure", "fig3", "--nt", "8", "--trials", "10", "--snr", "0:1:2",
        ])
        .unwrap();
        assert_eq!(plan.config.trials, 10);
        assert_eq!(plan.config.nt, 8);
    }
}
