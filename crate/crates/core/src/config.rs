//! Experiment configuration, read from JSON and overridable from the CLI.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::channel::{GeometryCase, NetworkGeometry, DEFAULT_CASE_III_RELAY_SPACING};
use crate::error::{Error, Result};
use crate::outage::{validate_dmt_grid, DmtTarget, Sampler};
use crate::protocols::{AdaptiveRule, Scheme};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    GainCurve,
    GeometrySweep,
    DmtSlope,
    SingleRealization,
    VblastGap,
}

impl std::str::FromStr for ExperimentKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.replace('-', "_").as_str() {
            "gain_curve" => Ok(ExperimentKind::GainCurve),
            "geometry_sweep" => Ok(ExperimentKind::GeometrySweep),
            "dmt_slope" | "dmt" => Ok(ExperimentKind::DmtSlope),
            "single_realization" => Ok(ExperimentKind::SingleRealization),
            "vblast_gap" => Ok(ExperimentKind::VblastGap),
            other => Err(format!("unknown experiment `{other}`")),
        }
    }
}

/// A preset case (`"I"`, `"II"`, `"III"`) or explicit distances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GeometrySpec {
    Case(GeometryCase),
    Custom(NetworkGeometry),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl std::str::FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(format!("unknown output format `{other}`")),
        }
    }
}

/// Default SNR grid: 0 to 40 dB in 5 dB steps.
pub fn default_snr_grid() -> Vec<f64> {
    (0..=8).map(|k| 5.0 * k as f64).collect()
}

/// Default grid for diversity slopes.
pub fn default_dmt_grid() -> Vec<f64> {
    vec![20.0, 30.0, 40.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub geometry: GeometrySpec,
    /// Relay spacing for geometry case III.
    pub case_iii_relay_spacing: f64,
    /// Codewords per frame.
    pub l: usize,
    /// Frame lengths compared by the gain curve.
    pub l_values: Vec<usize>,
    /// SNR points in dB. `None` picks the experiment's default grid.
    pub snr_grid_db: Option<Vec<f64>>,
    pub trials: u64,
    pub seed: u64,
    pub protocols: Vec<Scheme>,
    pub adaptive_rule: AdaptiveRule,
    /// Only used by the gain curve: average each scheme over the
    /// realizations where it reaches its best-case rate.
    pub conditioned_gain: bool,
    /// Multiplexing gain for the DMT experiment; 0 switches to `fixed_rate`.
    pub multiplexing_gain: f64,
    /// Per-slot target (bits) for the DMT experiment at multiplexing gain 0.
    pub fixed_rate: f64,
    /// Also estimate the distributed-Alamouti outage slope.
    pub dmt_classic_comparator: bool,
    pub sampler: Sampler,
    // Where and how fast the run happens is not part of the result, so these
    // two are read from config files but never echoed into output.
    #[serde(skip_serializing)]
    pub threads: Option<usize>,
    #[serde(skip_serializing)]
    pub output_path: Option<PathBuf>,
    pub output_format: OutputFormat,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            experiment: ExperimentKind::GeometrySweep,
            geometry: GeometrySpec::Case(GeometryCase::III),
            case_iii_relay_spacing: DEFAULT_CASE_III_RELAY_SPACING,
            l: 7,
            l_values: vec![3, 7],
            snr_grid_db: None,
            trials: 10_000,
            seed: 1,
            protocols: vec![
                Scheme::Direct,
                Scheme::Classic2,
                Scheme::SuccessiveGenie,
                Scheme::SuccessiveVblast,
            ],
            adaptive_rule: AdaptiveRule::A,
            conditioned_gain: false,
            multiplexing_gain: 0.0,
            fixed_rate: 1.0,
            dmt_classic_comparator: true,
            sampler: Sampler::Importance,
            threads: None,
            output_path: None,
            output_format: OutputFormat::Csv,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn network_geometry(&self) -> NetworkGeometry {
        match self.geometry {
            GeometrySpec::Case(case) => {
                NetworkGeometry::preset_with_relay_spacing(case, self.case_iii_relay_spacing)
            }
            GeometrySpec::Custom(g) => g,
        }
    }

    pub fn snr_grid(&self) -> Vec<f64> {
        match (&self.snr_grid_db, self.experiment) {
            (Some(grid), _) => grid.clone(),
            (None, ExperimentKind::DmtSlope) => default_dmt_grid(),
            (None, _) => default_snr_grid(),
        }
    }

    pub fn dmt_target(&self) -> DmtTarget {
        if self.multiplexing_gain > 0.0 {
            DmtTarget::Multiplexing(self.multiplexing_gain)
        } else {
            DmtTarget::FixedRate(self.fixed_rate)
        }
    }

    /// Protocols in canonical order without duplicates.
    pub fn selected_protocols(&self) -> Vec<Scheme> {
        Scheme::ALL
            .into_iter()
            .filter(|s| self.protocols.contains(s))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::config("trials", "must be >= 1"));
        }
        if self.l == 0 {
            return Err(Error::config("l", "must be >= 1"));
        }
        let grid = self.snr_grid();
        if grid.is_empty() {
            return Err(Error::config("snr_grid_db", "must not be empty"));
        }
        if grid.iter().any(|x| !x.is_finite()) {
            return Err(Error::config("snr_grid_db", "all points must be finite"));
        }
        if !(self.case_iii_relay_spacing.is_finite() && self.case_iii_relay_spacing > 0.0) {
            return Err(Error::config("case_iii_relay_spacing", "must be > 0"));
        }
        self.network_geometry()
            .validate()
            .map_err(|e| Error::config("geometry", e.to_string()))?;
        if self.threads == Some(0) {
            return Err(Error::config("threads", "must be >= 1"));
        }

        match self.experiment {
            ExperimentKind::GeometrySweep | ExperimentKind::SingleRealization => {
                if self.protocols.is_empty() {
                    return Err(Error::config("protocols", "must select at least one protocol"));
                }
            }
            ExperimentKind::GainCurve => {
                if self.l_values.is_empty() || self.l_values.contains(&0) {
                    return Err(Error::config("l_values", "must be a non-empty list of values >= 1"));
                }
            }
            ExperimentKind::DmtSlope => {
                validate_dmt_grid(&grid).map_err(|e| Error::config("snr_grid_db", e.to_string()))?;
                if !(self.multiplexing_gain >= 0.0 && self.multiplexing_gain.is_finite()) {
                    return Err(Error::config("multiplexing_gain", "must be a finite value >= 0"));
                }
                if self.multiplexing_gain == 0.0 && !(self.fixed_rate > 0.0 && self.fixed_rate.is_finite()) {
                    return Err(Error::config("fixed_rate", "must be > 0"));
                }
            }
            ExperimentKind::VblastGap => {}
        }
        Ok(())
    }
}
