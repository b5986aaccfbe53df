//! Command-line front end for the experiments.
//!
//! Settings come from an optional JSON config file; any flag given on the
//! command line overrides the corresponding file value.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use succrelay::channel::GeometryCase;
use succrelay::config::{ExperimentConfig, ExperimentKind, GeometrySpec, OutputFormat};
use succrelay::experiments::{self, ExperimentResult};
use succrelay::output;
use succrelay::protocols::{AdaptiveRule, Scheme};

#[derive(Parser, Debug)]
#[command(name = "simulate", about = "Successive-relaying rate and outage experiments")]
struct Cli {
    /// JSON config file (fields mirror the CLI flags).
    #[arg(long)]
    config: Option<PathBuf>,

    /// gain_curve | geometry_sweep | dmt_slope | vblast_gap | single_realization
    #[arg(long)]
    experiment: Option<ExperimentKind>,

    /// I | II | III, or `custom` to keep the distances from the config file.
    #[arg(long)]
    geometry: Option<String>,

    /// Codewords per frame.
    #[arg(long)]
    l: Option<usize>,

    /// Frame lengths for the gain curve, comma separated.
    #[arg(long, value_delimiter = ',')]
    l_values: Option<Vec<usize>>,

    /// SNR points in dB, comma separated.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    snr: Option<Vec<f64>>,

    #[arg(long)]
    trials: Option<u64>,

    #[arg(long)]
    seed: Option<u64>,

    /// Comma separated: direct, classic1, classic2, successive_genie,
    /// successive_vblast, theorem1.
    #[arg(long, value_delimiter = ',')]
    protocols: Option<Vec<Scheme>>,

    /// none | a | b | c
    #[arg(long)]
    adaptive: Option<AdaptiveRule>,

    /// Multiplexing gain for dmt_slope (0 = fixed rate).
    #[arg(long)]
    multiplexing_gain: Option<f64>,

    /// Relay spacing for geometry case III.
    #[arg(long)]
    relay_spacing: Option<f64>,

    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long)]
    threads: Option<usize>,

    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,

    /// csv | json
    #[arg(long)]
    format: Option<OutputFormat>,
}

fn build_config(cli: Cli) -> Result<ExperimentConfig, String> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
            ExperimentConfig::from_json(&text).map_err(|e| e.to_string())?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(v) = cli.experiment {
        cfg.experiment = v;
    }
    match cli.geometry.as_deref() {
        None => {}
        Some(g) if g.eq_ignore_ascii_case("custom") => {
            if !matches!(cfg.geometry, GeometrySpec::Custom(_)) {
                return Err("--geometry custom needs explicit distances in the config file".into());
            }
        }
        Some(g) => cfg.geometry = GeometrySpec::Case(g.parse::<GeometryCase>()?),
    }
    if let Some(v) = cli.l {
        cfg.l = v;
    }
    if let Some(v) = cli.l_values {
        cfg.l_values = v;
    }
    if let Some(v) = cli.snr {
        cfg.snr_grid_db = Some(v);
    }
    if let Some(v) = cli.trials {
        cfg.trials = v;
    }
    if let Some(v) = cli.seed {
        cfg.seed = v;
    }
    if let Some(v) = cli.protocols {
        cfg.protocols = v;
    }
    if let Some(v) = cli.adaptive {
        cfg.adaptive_rule = v;
    }
    if let Some(v) = cli.multiplexing_gain {
        cfg.multiplexing_gain = v;
    }
    if let Some(v) = cli.relay_spacing {
        cfg.case_iii_relay_spacing = v;
    }
    if let Some(v) = cli.threads {
        cfg.threads = Some(v);
    }
    if let Some(v) = cli.out {
        cfg.output_path = Some(v);
    }
    if let Some(v) = cli.format {
        cfg.output_format = v;
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let cfg = match build_config(Cli::parse()) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if let Err(e) = cfg.validate() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    let result = match experiments::run(&cfg) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    };
    if let ExperimentResult::DmtSlope(report) = &result {
        if !report.low_event_points.is_empty() {
            eprintln!(
                "warning: fewer than {} outage events at {:?} dB; slope estimates there are unreliable",
                succrelay::outage::MIN_OUTAGE_EVENTS,
                report.low_event_points
            );
        }
    }
    if let Err(e) = output::write_result(&cfg, &result, cfg.output_path.as_deref()) {
        eprintln!("error: {e}");
        return ExitCode::FAILURE;
    }
    ExitCode::SUCCESS
}
