//! Seeded Monte Carlo experiments.
//!
//! Trial `t` always draws its channel from `trial_rng(seed, t)` and the same
//! draw is reused at every SNR point, so curves are smooth in SNR and
//! results do not depend on the number of worker threads.

use serde::{Deserialize, Serialize};

use crate::channel::{sample_realization, trial_rng, ChannelRealization};
use crate::config::{ExperimentConfig, ExperimentKind};
use crate::db_to_linear;
use crate::error::Result;
use crate::montecarlo::{run_batched, with_threads};
use crate::outage::{dmt_formula, estimate_dmt, DmtPoint, OutageModel};
use crate::protocols::{
    apply_adaptive_fallback, capacity_gain_curve, check_interference_free, evaluate,
    rate_successive_genie, rate_successive_vblast, RateReport, Scheme,
};
use crate::stats::MeanAcc;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolStats {
    pub scheme: Scheme,
    /// Mean rate in bits per slot.
    pub mean: f64,
    pub std_err: f64,
    /// Share of realizations where the adaptive rule fell back to direct.
    pub fallback_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub snr_db: f64,
    pub protocols: Vec<ProtocolStats>,
    /// Share of realizations meeting the inter-relay condition.
    pub interference_decodable_fraction: f64,
    /// Share of realizations meeting the source-relay dominance condition.
    pub source_links_dominate_fraction: f64,
}

impl SweepRow {
    pub fn stats(&self, scheme: Scheme) -> Option<&ProtocolStats> {
        self.protocols.iter().find(|p| p.scheme == scheme)
    }

    pub fn mean(&self, scheme: Scheme) -> Option<f64> {
        self.stats(scheme).map(|p| p.mean)
    }
}

#[derive(Clone, Default)]
struct PointAcc {
    rates: Vec<MeanAcc>,
    fallbacks: Vec<u64>,
    decodable: u64,
    dominate: u64,
}

impl PointAcc {
    fn new(n: usize) -> Self {
        PointAcc {
            rates: vec![MeanAcc::default(); n],
            fallbacks: vec![0; n],
            decodable: 0,
            dominate: 0,
        }
    }

    fn merge(&mut self, other: PointAcc) {
        for (a, b) in self.rates.iter_mut().zip(&other.rates) {
            a.merge(b);
        }
        for (a, b) in self.fallbacks.iter_mut().zip(&other.fallbacks) {
            *a += b;
        }
        self.decodable += other.decodable;
        self.dominate += other.dominate;
    }
}

/// Every selected protocol on one realization, with the adaptive rule
/// applied to the relaying schemes.
pub fn evaluate_protocols(
    cfg: &ExperimentConfig,
    schemes: &[Scheme],
    real: &ChannelRealization,
    snr: f64,
) -> Result<Vec<RateReport>> {
    schemes
        .iter()
        .map(|&s| {
            let rep = evaluate(s, real, snr, cfg.l)?;
            Ok(apply_adaptive_fallback(rep, real, snr, cfg.adaptive_rule))
        })
        .collect()
}

/// Mean rate of each selected protocol per SNR point over `cfg.trials`
/// realizations of `cfg`'s geometry.
pub fn run_geometry_sweep(cfg: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    let geom = cfg.network_geometry();
    let schemes = cfg.selected_protocols();
    let grid = cfg.snr_grid();
    let snrs: Vec<f64> = grid.iter().map(|&db| db_to_linear(db)).collect();

    let acc = with_threads(cfg.threads, || {
        run_batched(
            cfg.trials,
            || vec![PointAcc::new(schemes.len()); snrs.len()],
            |acc, t| {
                let real = sample_realization(&geom, &mut trial_rng(cfg.seed, t));
                for (point, &snr) in acc.iter_mut().zip(&snrs) {
                    let reports = evaluate_protocols(cfg, &schemes, &real, snr).expect("validated config");
                    for (k, rep) in reports.iter().enumerate() {
                        point.rates[k].push(rep.rate_per_slot);
                        point.fallbacks[k] += rep.branch_log.fallback as u64;
                    }
                    let cond = check_interference_free(&real, snr, cfg.l);
                    point.decodable += cond.interference_decodable as u64;
                    point.dominate += cond.source_links_dominate as u64;
                }
            },
            |a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    x.merge(y);
                }
            },
        )
    });

    let n = cfg.trials as f64;
    Ok(grid
        .iter()
        .zip(acc)
        .map(|(&snr_db, point)| SweepRow {
            snr_db,
            protocols: schemes
                .iter()
                .enumerate()
                .map(|(k, &scheme)| ProtocolStats {
                    scheme,
                    mean: point.rates[k].mean,
                    std_err: point.rates[k].std_err(),
                    fallback_fraction: point.fallbacks[k] as f64 / n,
                })
                .collect(),
            interference_decodable_fraction: point.decodable as f64 / n,
            source_links_dominate_fraction: point.dominate as f64 / n,
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainRow {
    pub l: usize,
    pub snr_db: f64,
    pub gain: f64,
    pub successive_mean: f64,
    pub classic2_mean: f64,
    /// `2L / (L + 1)`, the high-SNR limit of the gain.
    pub asymptote: f64,
}

/// Capacity gain of successive relaying over distributed Alamouti for each
/// configured frame length.
pub fn run_gain_curve(cfg: &ExperimentConfig) -> Result<Vec<GainRow>> {
    cfg.validate()?;
    let grid = cfg.snr_grid();
    let snrs: Vec<f64> = grid.iter().map(|&db| db_to_linear(db)).collect();
    let mut rows = Vec::new();
    for &l in &cfg.l_values {
        let curve = with_threads(cfg.threads, || {
            capacity_gain_curve(&snrs, l, cfg.trials, cfg.seed, cfg.conditioned_gain)
        })?;
        for (&snr_db, est) in grid.iter().zip(curve) {
            rows.push(GainRow {
                l,
                snr_db,
                gain: est.gain,
                successive_mean: est.successive_mean,
                classic2_mean: est.classic2_mean,
                asymptote: 2.0 * l as f64 / (l + 1) as f64,
            });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DmtReport {
    pub l: usize,
    /// Diversity predicted by the closed-form tradeoff at this `r`.
    pub formula: f64,
    pub successive: DmtPoint,
    pub classic2: Option<DmtPoint>,
    /// Grid points (dB) of any curve with too few outage events.
    pub low_event_points: Vec<f64>,
}

/// Diversity slope of the conditioned successive scheme (and optionally of
/// the distributed-Alamouti comparator) next to the closed-form value.
pub fn run_dmt(cfg: &ExperimentConfig) -> Result<DmtReport> {
    cfg.validate()?;
    let grid = cfg.snr_grid();
    let target = cfg.dmt_target();
    let run = |model| {
        with_threads(cfg.threads, || {
            estimate_dmt(model, target, &grid, cfg.trials, cfg.seed, cfg.sampler)
        })
    };
    let successive = run(OutageModel::Successive { l: cfg.l })?;
    let classic2 = if cfg.dmt_classic_comparator {
        Some(run(OutageModel::Classic2)?)
    } else {
        None
    };
    let mut low_event_points = successive.low_event_points.clone();
    if let Some(c) = &classic2 {
        for p in &c.low_event_points {
            if !low_event_points.contains(p) {
                low_event_points.push(*p);
            }
        }
    }
    Ok(DmtReport {
        l: cfg.l,
        formula: dmt_formula(target.multiplexing_gain(), cfg.l),
        successive,
        classic2,
        low_event_points,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapRow {
    pub snr_db: f64,
    pub mean_genie: f64,
    pub mean_vblast: f64,
    /// Mean of the per-realization difference genie - V-BLAST.
    pub mean_gap: f64,
    /// Smallest per-realization difference seen.
    pub min_gap: f64,
    /// `mean_gap / mean_genie` (0 when the genie mean is 0).
    pub relative_gap: f64,
}

/// How far the MMSE-SIC detector falls short of the genie bound.
pub fn vblast_gap_report(cfg: &ExperimentConfig) -> Result<Vec<GapRow>> {
    cfg.validate()?;
    let geom = cfg.network_geometry();
    let grid = cfg.snr_grid();
    let snrs: Vec<f64> = grid.iter().map(|&db| db_to_linear(db)).collect();

    #[derive(Clone)]
    struct Acc {
        genie: MeanAcc,
        vblast: MeanAcc,
        gap: MeanAcc,
        min_gap: f64,
    }
    let fresh = Acc {
        genie: MeanAcc::default(),
        vblast: MeanAcc::default(),
        gap: MeanAcc::default(),
        min_gap: f64::INFINITY,
    };

    let acc = with_threads(cfg.threads, || {
        run_batched(
            cfg.trials,
            || vec![fresh.clone(); snrs.len()],
            |acc, t| {
                let real = sample_realization(&geom, &mut trial_rng(cfg.seed, t));
                for (a, &snr) in acc.iter_mut().zip(&snrs) {
                    let genie = rate_successive_genie(&real, snr, cfg.l).expect("validated l");
                    let vblast = rate_successive_vblast(&real, snr, cfg.l).expect("validated l");
                    let g = apply_adaptive_fallback(genie, &real, snr, cfg.adaptive_rule).rate_per_slot;
                    let v = apply_adaptive_fallback(vblast, &real, snr, cfg.adaptive_rule).rate_per_slot;
                    a.genie.push(g);
                    a.vblast.push(v);
                    a.gap.push(g - v);
                    a.min_gap = a.min_gap.min(g - v);
                }
            },
            |a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    x.genie.merge(&y.genie);
                    x.vblast.merge(&y.vblast);
                    x.gap.merge(&y.gap);
                    x.min_gap = x.min_gap.min(y.min_gap);
                }
            },
        )
    });

    Ok(grid
        .iter()
        .zip(acc)
        .map(|(&snr_db, a)| GapRow {
            snr_db,
            mean_genie: a.genie.mean,
            mean_vblast: a.vblast.mean,
            mean_gap: a.gap.mean,
            min_gap: a.min_gap,
            relative_gap: if a.genie.mean > 0.0 { a.gap.mean / a.genie.mean } else { 0.0 },
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SinglePoint {
    pub snr_db: f64,
    pub reports: Vec<RateReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingleRealizationReport {
    /// Trial index the realization was drawn with (the configured seed's
    /// stream 0).
    pub trial: u64,
    pub realization: ChannelRealization,
    pub points: Vec<SinglePoint>,
}

/// Full per-protocol diagnostics (branch log, per-codeword caps, conditions)
/// for one realization.
pub fn run_single_realization(cfg: &ExperimentConfig) -> Result<SingleRealizationReport> {
    cfg.validate()?;
    let real = sample_realization(&cfg.network_geometry(), &mut trial_rng(cfg.seed, 0));
    let schemes = cfg.selected_protocols();
    let points = cfg
        .snr_grid()
        .into_iter()
        .map(|snr_db| {
            Ok(SinglePoint {
                snr_db,
                reports: evaluate_protocols(cfg, &schemes, &real, db_to_linear(snr_db))?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(SingleRealizationReport {
        trial: 0,
        realization: real,
        points,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "data", rename_all = "snake_case")]
pub enum ExperimentResult {
    GeometrySweep(Vec<SweepRow>),
    GainCurve(Vec<GainRow>),
    DmtSlope(DmtReport),
    VblastGap(Vec<GapRow>),
    SingleRealization(SingleRealizationReport),
}

pub fn run(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    Ok(match cfg.experiment {
        ExperimentKind::GeometrySweep => ExperimentResult::GeometrySweep(run_geometry_sweep(cfg)?),
        ExperimentKind::GainCurve => ExperimentResult::GainCurve(run_gain_curve(cfg)?),
        ExperimentKind::DmtSlope => ExperimentResult::DmtSlope(run_dmt(cfg)?),
        ExperimentKind::VblastGap => ExperimentResult::VblastGap(vblast_gap_report(cfg)?),
        ExperimentKind::SingleRealization => {
            ExperimentResult::SingleRealization(run_single_realization(cfg)?)
        }
    })
}
