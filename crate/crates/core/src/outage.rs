//! Outage probabilities and diversity-multiplexing slopes with the relays
//! assumed to decode correctly.
//!
//! Only the links into the destination are random here (`h_SD`, `h_R1D`,
//! `h_R2D`). A frame is in outage when the per-codeword rate `R` exceeds the
//! combining capacity of some codeword, or when `L * R` exceeds the MAC sum
//! capacity of the equivalent channel.
//!
//! At high SNR outage becomes too rare for plain Monte Carlo (around 1e-8 at
//! 40 dB for the successive scheme), so an importance sampler is available:
//! each gain is drawn from a defensive mixture of its nominal exponential law
//! and an exponential shrunk to the outage threshold, and every trial carries
//! its likelihood ratio. The ratio is bounded by `1 / MIXTURE_NOMINAL^3`, so
//! the estimator is never much worse than plain sampling.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{complex_gaussian, sample_link, trial_rng, ChannelRealization, NetworkGeometry, RelayId};
use crate::error::{Error, Result};
use crate::log2_1p;
use crate::mimo::{logdet_capacity, EquivalentChannel};
use crate::montecarlo::run_batched;
use crate::stats::{ls_slope, MeanAcc};

/// Fewer outage events than this at a grid point makes its estimate unusable
/// for slope fitting.
pub const MIN_OUTAGE_EVENTS: u64 = 20;

/// Probability of drawing a gain from its nominal law in the importance
/// sampler.
const MIXTURE_NOMINAL: f64 = 0.5;

/// `d(r) = 2 (1 - (L+1) r / L)^+`.
pub fn dmt_formula(r: f64, l: usize) -> f64 {
    let l = l as f64;
    2.0 * (1.0 - (l + 1.0) * r / l).max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutageModel {
    /// Successive relaying with `l` codewords per frame.
    Successive { l: usize },
    /// Distributed-Alamouti comparator: outage when half the three-branch
    /// combining capacity falls below the per-slot target.
    Classic2,
}

/// Distribution of the destination-side gains.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GainModel {
    /// Unit-variance i.i.d. Rayleigh.
    Iid,
    /// Pathloss and shadowing from a geometry.
    Geometry(NetworkGeometry),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampler {
    #[default]
    Plain,
    Importance,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutageEstimate {
    pub probability: f64,
    pub std_err: f64,
    /// Trials that landed in outage (unweighted).
    pub events: u64,
    pub trials: u64,
}

impl OutageModel {
    fn validate(&self) -> Result<()> {
        match *self {
            OutageModel::Successive { l: 0 } => Err(Error::ZeroFrameLength),
            _ => Ok(()),
        }
    }

    /// Combined-gain threshold `x` below which a single codeword fails; used
    /// to scale the importance sampler.
    fn gain_threshold(&self, snr: f64, rate_per_slot: f64) -> f64 {
        let per_codeword = match *self {
            OutageModel::Successive { l } => (l + 1) as f64 * rate_per_slot / l as f64,
            OutageModel::Classic2 => 2.0 * rate_per_slot,
        };
        (2f64.powf(per_codeword) - 1.0) / snr
    }

    /// Whether the destination-side draw `real` cannot support the target.
    pub fn in_outage(&self, real: &ChannelRealization, snr: f64, rate_per_slot: f64) -> bool {
        if rate_per_slot <= 0.0 {
            return false;
        }
        match *self {
            OutageModel::Successive { l } => {
                let per_codeword = (l + 1) as f64 * rate_per_slot / l as f64;
                let relays: &[RelayId] = if l == 1 { &[RelayId::R1] } else { &[RelayId::R1, RelayId::R2] };
                let codeword_fails = relays
                    .iter()
                    .any(|&r| log2_1p((real.g_sd() + real.g_rd(r)) * snr) < per_codeword);
                if codeword_fails {
                    return true;
                }
                let h = EquivalentChannel::build(real, l).expect("l >= 1");
                logdet_capacity(&h, snr) < l as f64 * per_codeword
            }
            OutageModel::Classic2 => {
                let combined = real.g_sd() + real.g_rd(RelayId::R1) + real.g_rd(RelayId::R2);
                0.5 * log2_1p(combined * snr) < rate_per_slot
            }
        }
    }
}

fn destination_links(h_sd: Complex64, h_r1d: Complex64, h_r2d: Complex64) -> ChannelRealization {
    ChannelRealization {
        h_sd,
        h_r1d,
        h_r2d,
        ..ChannelRealization::zero()
    }
}

/// Draws one unit-mean exponential gain from the defensive mixture and
/// returns the coefficient together with its likelihood ratio.
fn mixture_draw<R: Rng + ?Sized>(rng: &mut R, shrink: f64) -> (Complex64, f64) {
    let pick_nominal = rng.random::<f64>() < MIXTURE_NOMINAL;
    let mut v = complex_gaussian(rng);
    if !pick_nominal {
        v *= shrink.sqrt();
    }
    let g = v.norm_sqr();
    // nominal density e^-g over the mixture density
    let scaled = (1.0 - MIXTURE_NOMINAL) / shrink * (-g * (1.0 / shrink - 1.0)).exp();
    (v, 1.0 / (MIXTURE_NOMINAL + scaled))
}

/// Outage probability of `model` at one SNR and per-slot target rate.
pub fn outage_prob_conditioned(
    model: OutageModel,
    gains: &GainModel,
    snr: f64,
    rate_per_slot: f64,
    trials: u64,
    seed: u64,
    sampler: Sampler,
) -> Result<OutageEstimate> {
    model.validate()?;
    if trials == 0 {
        return Err(Error::config("trials", "must be >= 1"));
    }
    if sampler == Sampler::Importance && !matches!(gains, GainModel::Iid) {
        return Err(Error::ImportanceSamplingNeedsIid);
    }
    let shrink = model.gain_threshold(snr, rate_per_slot).clamp(1e-300, 1.0);

    let (acc, events) = run_batched(
        trials,
        || (MeanAcc::default(), 0u64),
        |(acc, events), t| {
            let mut rng = trial_rng(seed, t);
            let (real, weight) = match (sampler, gains) {
                (Sampler::Plain, GainModel::Iid) => {
                    let sd = complex_gaussian(&mut rng);
                    let r1 = complex_gaussian(&mut rng);
                    let r2 = complex_gaussian(&mut rng);
                    (destination_links(sd, r1, r2), 1.0)
                }
                (Sampler::Plain, GainModel::Geometry(geom)) => {
                    let sd = sample_link(&mut rng, geom, geom.d_sd);
                    let r1 = sample_link(&mut rng, geom, geom.d_r1d);
                    let r2 = sample_link(&mut rng, geom, geom.d_r2d);
                    (destination_links(sd, r1, r2), 1.0)
                }
                (Sampler::Importance, _) => {
                    let (sd, w0) = mixture_draw(&mut rng, shrink);
                    let (r1, w1) = mixture_draw(&mut rng, shrink);
                    let (r2, w2) = mixture_draw(&mut rng, shrink);
                    (destination_links(sd, r1, r2), w0 * w1 * w2)
                }
            };
            if model.in_outage(&real, snr, rate_per_slot) {
                *events += 1;
                acc.push(weight);
            } else {
                acc.push(0.0);
            }
        },
        |(a, ea), (b, eb)| {
            a.merge(&b);
            *ea += eb;
        },
    );

    Ok(OutageEstimate {
        probability: acc.mean.clamp(0.0, 1.0),
        std_err: acc.std_err(),
        events,
        trials,
    })
}

/// How the target rate scales with SNR along a DMT curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DmtTarget {
    /// `R = r * log2(snr)` bits per slot.
    Multiplexing(f64),
    /// Fixed bits per slot (multiplexing gain 0).
    FixedRate(f64),
}

impl DmtTarget {
    pub fn multiplexing_gain(&self) -> f64 {
        match *self {
            DmtTarget::Multiplexing(r) => r,
            DmtTarget::FixedRate(_) => 0.0,
        }
    }

    pub fn rate_at(&self, snr: f64) -> f64 {
        match *self {
            DmtTarget::Multiplexing(r) => r * snr.log2(),
            DmtTarget::FixedRate(rate) => rate,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DmtPoint {
    pub model: OutageModel,
    pub multiplexing_r: f64,
    pub snr_grid_db: Vec<f64>,
    pub target_rate: Vec<f64>,
    pub outage_prob: Vec<f64>,
    pub std_err: Vec<f64>,
    pub events: Vec<u64>,
    /// Slope of `-log10(P_out)` against `SNR_dB / 10` over the top two grid
    /// points.
    pub diversity_estimate: f64,
    /// Same slope, least squares over the whole grid.
    pub diversity_lsq: f64,
    /// Grid points (dB) with fewer than [`MIN_OUTAGE_EVENTS`] outage events.
    pub low_event_points: Vec<f64>,
}

/// Checks that a DMT grid is usable: at least three points, sorted, all in
/// the high-SNR region (>= 20 dB) and spanning at least 20 dB.
pub fn validate_dmt_grid(grid_db: &[f64]) -> Result<()> {
    if grid_db.len() < 3 {
        return Err(Error::InvalidGrid("need at least 3 SNR points".into()));
    }
    if grid_db.windows(2).any(|w| w[1].partial_cmp(&w[0]) != Some(std::cmp::Ordering::Greater)) {
        return Err(Error::InvalidGrid("SNR points must be strictly increasing".into()));
    }
    if grid_db[0] < 20.0 {
        return Err(Error::InvalidGrid("all SNR points must be >= 20 dB".into()));
    }
    if grid_db[grid_db.len() - 1] - grid_db[0] < 20.0 {
        return Err(Error::InvalidGrid("grid must span at least 20 dB".into()));
    }
    Ok(())
}

/// Estimates the diversity order at one multiplexing gain by fitting the
/// outage curve over an SNR grid.
pub fn estimate_dmt(
    model: OutageModel,
    target: DmtTarget,
    grid_db: &[f64],
    trials_per_point: u64,
    seed: u64,
    sampler: Sampler,
) -> Result<DmtPoint> {
    validate_dmt_grid(grid_db)?;
    let mut target_rate = Vec::with_capacity(grid_db.len());
    let mut estimates = Vec::with_capacity(grid_db.len());
    for &db in grid_db {
        let snr = crate::db_to_linear(db);
        let rate = target.rate_at(snr);
        target_rate.push(rate);
        estimates.push(outage_prob_conditioned(
            model,
            &GainModel::Iid,
            snr,
            rate,
            trials_per_point,
            seed,
            sampler,
        )?);
    }

    let xs: Vec<f64> = grid_db.iter().map(|db| db / 10.0).collect();
    let ys: Vec<f64> = estimates.iter().map(|e| -e.probability.log10()).collect();
    let n = xs.len();
    let diversity_estimate = (ys[n - 1] - ys[n - 2]) / (xs[n - 1] - xs[n - 2]);
    let diversity_lsq = ls_slope(&xs, &ys);

    Ok(DmtPoint {
        model,
        multiplexing_r: target.multiplexing_gain(),
        snr_grid_db: grid_db.to_vec(),
        target_rate,
        outage_prob: estimates.iter().map(|e| e.probability).collect(),
        std_err: estimates.iter().map(|e| e.std_err).collect(),
        events: estimates.iter().map(|e| e.events).collect(),
        diversity_estimate,
        diversity_lsq,
        low_event_points: grid_db
            .iter()
            .zip(&estimates)
            .filter(|(_, e)| e.events < MIN_OUTAGE_EVENTS)
            .map(|(&db, _)| db)
            .collect(),
    })
}

/// Closed-form outage of a two-branch combiner: `P(g0 + g1 < x)` for i.i.d.
/// unit exponentials, `1 - e^-x (1 + x)`.
pub fn miso2_outage(snr: f64, per_codeword_rate: f64) -> f64 {
    let x = (2f64.powf(per_codeword_rate) - 1.0) / snr;
    -(-x).exp_m1() - x * (-x).exp()
}
