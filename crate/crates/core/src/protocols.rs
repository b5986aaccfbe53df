//! Per-realization achievable rates of the transmission schemes.
//!
//! All rates are in bits per transmission slot unless stated otherwise.
//! The successive schemes work on a frame of `L` codewords sent in `L + 1`
//! slots; codeword `i` is forwarded by relay `r_i` (R1 for odd `i`, R2 for
//! even `i`) while the other relay listens to the source and hears the
//! forwarding relay as interference.

use serde::{Deserialize, Serialize};

use crate::channel::{sample_realization, trial_rng, ChannelRealization, NetworkGeometry, RelayId};
use crate::error::{Error, Result};
use crate::log2_1p;
use crate::mimo::{logdet_capacity, mmse_sic_sinrs, EquivalentChannel, SicOrdering};
use crate::montecarlo::run_batched;
use crate::stats::MeanAcc;

/// `C(x) = log2(1 + x)`.
pub fn capacity(x: f64) -> Result<f64> {
    if x < 0.0 || x.is_nan() {
        return Err(Error::NegativeCapacityArgument(x));
    }
    Ok(log2_1p(x))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Direct,
    Classic1,
    Classic2,
    SuccessiveGenie,
    SuccessiveVblast,
    Theorem1,
}

impl Scheme {
    pub const ALL: [Scheme; 6] = [
        Scheme::Direct,
        Scheme::Classic1,
        Scheme::Classic2,
        Scheme::SuccessiveGenie,
        Scheme::SuccessiveVblast,
        Scheme::Theorem1,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Direct => "direct",
            Scheme::Classic1 => "classic1",
            Scheme::Classic2 => "classic2",
            Scheme::SuccessiveGenie => "successive_genie",
            Scheme::SuccessiveVblast => "successive_vblast",
            Scheme::Theorem1 => "theorem1",
        }
    }

    pub fn is_relaying(self) -> bool {
        self != Scheme::Direct
    }

    fn is_successive(self) -> bool {
        matches!(
            self,
            Scheme::SuccessiveGenie | Scheme::SuccessiveVblast | Scheme::Theorem1
        )
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Scheme::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| format!("unknown protocol `{s}`"))
    }
}

/// How a listening relay handles the other relay's transmission.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    /// Inter-relay link stronger: decode the interfering codeword, subtract
    /// it, then decode the source.
    DecodeInterference,
    /// Decode the source directly with the interference as Gaussian noise.
    TreatAsNoise,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotBranch {
    /// 1-based slot index, `2..=L`.
    pub slot: usize,
    pub branch: Branch,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BranchLog {
    pub slots: Vec<SlotBranch>,
    /// The adaptive rule rejected relaying and the direct rate was used.
    pub fallback: bool,
}

/// Whether the frame can run interference-free with the best relay choice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InterferenceFreeCheck {
    /// Inter-relay link strong enough that decoding the interference first
    /// never limits the rate, in every slot that has interference.
    pub interference_decodable: bool,
    /// `|h_S,r_i|^2 >= |h_SD|^2 + |h_r_i,D|^2` for every codeword.
    pub source_links_dominate: bool,
}

impl InterferenceFreeCheck {
    pub fn both(&self) -> bool {
        self.interference_decodable && self.source_links_dominate
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub scheme: Scheme,
    /// Codewords per frame (1 for direct and the classic protocols).
    pub frame_len: usize,
    pub rate_per_slot: f64,
    /// Upper bound on each codeword's rate in bits per codeword.
    pub per_codeword_rates: Vec<f64>,
    pub branch_log: BranchLog,
    pub conditions: Option<InterferenceFreeCheck>,
}

impl RateReport {
    fn simple(scheme: Scheme, rate_per_slot: f64, codeword_rate: f64) -> Self {
        RateReport {
            scheme,
            frame_len: 1,
            rate_per_slot,
            per_codeword_rates: vec![codeword_rate],
            branch_log: BranchLog::default(),
            conditions: None,
        }
    }
}

fn c(x: f64) -> f64 {
    log2_1p(x.max(0.0))
}

fn check_snr(snr: f64) {
    debug_assert!(snr >= 0.0 && !snr.is_nan(), "snr must be >= 0");
}

pub fn rate_direct(real: &ChannelRealization, snr: f64) -> RateReport {
    check_snr(snr);
    let r = c(real.g_sd() * snr);
    RateReport::simple(Scheme::Direct, r, r)
}

/// Rate of the broadcast-then-relay schemes before the multiplexing prefactor:
/// both relays must decode, then the destination combines three copies.
fn classic_codeword_rate(real: &ChannelRealization, snr: f64) -> f64 {
    let combined = real.g_sd() + real.g_rd(RelayId::R1) + real.g_rd(RelayId::R2);
    c(real.g_sr(RelayId::R1) * snr)
        .min(c(real.g_sr(RelayId::R2) * snr))
        .min(c(combined * snr))
}

/// Orthogonal relaying over three slots.
pub fn rate_classic1(real: &ChannelRealization, snr: f64) -> RateReport {
    check_snr(snr);
    let r = classic_codeword_rate(real, snr);
    RateReport::simple(Scheme::Classic1, r / 3.0, r)
}

/// Distributed Alamouti relaying: two codewords over four slots.
pub fn rate_classic2(real: &ChannelRealization, snr: f64) -> RateReport {
    check_snr(snr);
    let r = classic_codeword_rate(real, snr);
    RateReport::simple(Scheme::Classic2, r / 2.0, r)
}

/// Squared-magnitude comparison deciding the relay decoding order for the
/// slot in which codeword `next` is heard. Ties treat interference as noise.
fn branch_for(real: &ChannelRealization, next: usize) -> Branch {
    if real.g_r1r2() > real.g_sr(RelayId::for_codeword(next)) {
        Branch::DecodeInterference
    } else {
        Branch::TreatAsNoise
    }
}

/// Sequential per-codeword rate caps.
///
/// `dest_caps[i]` is the destination-side cap on codeword `i + 1`. Slot 1
/// initialises the source-relay rate of codeword 1; slot `i + 1` (for
/// `1 <= i <= L - 1`) finalises codeword `i` and sets the source-relay rate
/// of codeword `i + 1` according to the relay decoding branch; slot `L + 1`
/// finalises codeword `L`.
fn successive_caps(
    real: &ChannelRealization,
    snr: f64,
    dest_caps: &[f64],
) -> (Vec<f64>, Vec<SlotBranch>) {
    let l = dest_caps.len();
    let g_rr = real.g_r1r2();
    let mut rates = Vec::with_capacity(l);
    let mut slots = Vec::with_capacity(l.saturating_sub(1));
    let mut source_relay = c(real.g_sr(RelayId::for_codeword(1)) * snr);

    for i in 1..l {
        let g_next = real.g_sr(RelayId::for_codeword(i + 1));
        let branch = branch_for(real, i + 1);
        let finished = match branch {
            Branch::DecodeInterference => {
                let interference_rate = c(g_rr * snr / (1.0 + g_next * snr));
                let r = interference_rate.min(source_relay).min(dest_caps[i - 1]);
                source_relay = c(g_next * snr);
                r
            }
            Branch::TreatAsNoise => {
                let r = source_relay.min(dest_caps[i - 1]);
                source_relay = c(g_next * snr / (1.0 + g_rr * snr));
                r
            }
        };
        rates.push(finished);
        slots.push(SlotBranch { slot: i + 1, branch });
    }
    rates.push(source_relay.min(dest_caps[l - 1]));
    (rates, slots)
}

fn combining_caps(real: &ChannelRealization, snr: f64, l: usize) -> Vec<f64> {
    (1..=l)
        .map(|i| c((real.g_sd() + real.g_rd(RelayId::for_codeword(i))) * snr))
        .collect()
}

/// Checks the two interference-free conditions for a frame of length `l`.
///
/// The inter-relay condition is evaluated for the slots that actually carry
/// interference (`i = 1..L-1`); slot `L + 1` has no source transmission.
pub fn check_interference_free(real: &ChannelRealization, snr: f64, l: usize) -> InterferenceFreeCheck {
    check_snr(snr);
    let g_rr = real.g_r1r2();
    let g_sd = real.g_sd();
    let interference_decodable = (1..l).all(|i| {
        let cur = RelayId::for_codeword(i);
        let next = RelayId::for_codeword(i + 1);
        let lhs = g_rr * snr / (1.0 + real.g_sr(next) * snr);
        let rhs = (real.g_sr(cur) * snr).min((g_sd + real.g_rd(cur)) * snr);
        lhs >= rhs
    });
    let source_links_dominate = (1..=l).all(|i| {
        let r = RelayId::for_codeword(i);
        real.g_sr(r) >= g_sd + real.g_rd(r)
    });
    InterferenceFreeCheck {
        interference_decodable,
        source_links_dominate,
    }
}

/// Achievable rate with ideal rate adaptation: the smaller of the summed
/// per-codeword caps and the MAC sum capacity, spread over `L + 1` slots.
pub fn rate_successive_genie(real: &ChannelRealization, snr: f64, l: usize) -> Result<RateReport> {
    check_snr(snr);
    let h = EquivalentChannel::build(real, l)?;
    let (rates, slots) = successive_caps(real, snr, &combining_caps(real, snr, l));
    let sum: f64 = rates.iter().sum();
    let rate = sum.min(logdet_capacity(&h, snr)) / (l + 1) as f64;
    Ok(RateReport {
        scheme: Scheme::SuccessiveGenie,
        frame_len: l,
        rate_per_slot: rate,
        per_codeword_rates: rates,
        branch_log: BranchLog { slots, fallback: false },
        conditions: Some(check_interference_free(real, snr, l)),
    })
}

/// MAC sum capacity with the `L / (L + 1)` multiplexing factor.
pub fn rate_theorem1(real: &ChannelRealization, snr: f64, l: usize) -> Result<f64> {
    check_snr(snr);
    let h = EquivalentChannel::build(real, l)?;
    Ok(logdet_capacity(&h, snr) / (l + 1) as f64)
}

fn theorem1_report(real: &ChannelRealization, snr: f64, l: usize) -> Result<RateReport> {
    let rate = rate_theorem1(real, snr, l)?;
    Ok(RateReport {
        scheme: Scheme::Theorem1,
        frame_len: l,
        rate_per_slot: rate,
        per_codeword_rates: combining_caps(real, snr, l),
        branch_log: BranchLog::default(),
        conditions: Some(check_interference_free(real, snr, l)),
    })
}

/// Same recursion as the genie bound, with the destination caps replaced by
/// the per-stream rates of a strongest-first MMSE-SIC detector.
pub fn rate_successive_vblast(real: &ChannelRealization, snr: f64, l: usize) -> Result<RateReport> {
    check_snr(snr);
    let h = EquivalentChannel::build(real, l)?;
    let chain = mmse_sic_sinrs(&h, snr, SicOrdering::StrongestFirst);
    let (rates, slots) = successive_caps(real, snr, &chain.stream_rates());
    let rate = rates.iter().sum::<f64>() / (l + 1) as f64;
    Ok(RateReport {
        scheme: Scheme::SuccessiveVblast,
        frame_len: l,
        rate_per_slot: rate,
        per_codeword_rates: rates,
        branch_log: BranchLog { slots, fallback: false },
        conditions: Some(check_interference_free(real, snr, l)),
    })
}

/// Evaluates one scheme. `l` only matters for the successive schemes.
pub fn evaluate(scheme: Scheme, real: &ChannelRealization, snr: f64, l: usize) -> Result<RateReport> {
    match scheme {
        Scheme::Direct => Ok(rate_direct(real, snr)),
        Scheme::Classic1 => Ok(rate_classic1(real, snr)),
        Scheme::Classic2 => Ok(rate_classic2(real, snr)),
        Scheme::SuccessiveGenie => rate_successive_genie(real, snr, l),
        Scheme::SuccessiveVblast => rate_successive_vblast(real, snr, l),
        Scheme::Theorem1 => theorem1_report(real, snr, l),
    }
}

/// When to abandon relaying for direct transmission.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AdaptiveRule {
    /// Always relay.
    None,
    /// Relay only if both source-relay links are at least as strong as the
    /// direct link.
    #[default]
    A,
    /// Relay only if every used relay satisfies
    /// `|h_S,r|^2 >= |h_SD|^2 + |h_r,D|^2`.
    B,
    /// Relay only if the weaker source-relay capacity is at least the
    /// three-branch combining capacity.
    C,
}

impl std::str::FromStr for AdaptiveRule {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(AdaptiveRule::None),
            "a" => Ok(AdaptiveRule::A),
            "b" => Ok(AdaptiveRule::B),
            "c" => Ok(AdaptiveRule::C),
            other => Err(format!("unknown adaptive rule `{other}`")),
        }
    }
}

impl AdaptiveRule {
    /// Whether relaying is allowed. `relays` are the relays the scheme uses.
    pub fn allows_relaying(self, real: &ChannelRealization, snr: f64, relays: &[RelayId]) -> bool {
        match self {
            AdaptiveRule::None => true,
            AdaptiveRule::A => {
                let g_sd = real.g_sd();
                real.g_sr(RelayId::R1).min(real.g_sr(RelayId::R2)) >= g_sd
            }
            AdaptiveRule::B => relays
                .iter()
                .all(|&r| real.g_sr(r) >= real.g_sd() + real.g_rd(r)),
            AdaptiveRule::C => {
                let combined = real.g_sd() + real.g_rd(RelayId::R1) + real.g_rd(RelayId::R2);
                c(real.g_sr(RelayId::R1) * snr).min(c(real.g_sr(RelayId::R2) * snr))
                    >= c(combined * snr)
            }
        }
    }
}

/// Replaces a relaying report by the direct-transmission rate when `rule`
/// rejects relaying for this realization.
pub fn apply_adaptive_fallback(
    report: RateReport,
    real: &ChannelRealization,
    snr: f64,
    rule: AdaptiveRule,
) -> RateReport {
    if !report.scheme.is_relaying() {
        return report;
    }
    let relays: &[RelayId] = if report.scheme.is_successive() && report.frame_len == 1 {
        &[RelayId::R1]
    } else {
        &[RelayId::R1, RelayId::R2]
    };
    if rule.allows_relaying(real, snr, relays) {
        return report;
    }
    let direct = rate_direct(real, snr);
    RateReport {
        rate_per_slot: direct.rate_per_slot,
        per_codeword_rates: direct.per_codeword_rates,
        branch_log: BranchLog {
            slots: report.branch_log.slots,
            fallback: true,
        },
        ..report
    }
}

/// Monte Carlo estimate of the successive-over-Alamouti capacity gain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainEstimate {
    pub snr: f64,
    pub gain: f64,
    /// `E[logdet] / (L + 1)`.
    pub successive_mean: f64,
    /// `0.5 * E[C(combined * snr)]`.
    pub classic2_mean: f64,
    pub successive_samples: u64,
    pub classic2_samples: u64,
}

/// Ratio of the mean best-case successive rate to the mean best-case
/// distributed-Alamouti rate, over i.i.d. unit-variance Rayleigh links.
///
/// Every SNR point reuses the same `trials` realizations. With
/// `conditioned`, each mean only averages the realizations in which its
/// scheme reaches its best-case expression (source links dominate for the
/// successive scheme, adaptive rule C for the classic one).
pub fn capacity_gain_curve(
    snrs: &[f64],
    l: usize,
    trials: u64,
    seed: u64,
    conditioned: bool,
) -> Result<Vec<GainEstimate>> {
    if l == 0 {
        return Err(Error::ZeroFrameLength);
    }
    let geom = NetworkGeometry::iid_rayleigh();
    let n = snrs.len();
    let sums = run_batched(
        trials,
        || vec![(MeanAcc::default(), MeanAcc::default()); n],
        |acc, t| {
            let real = sample_realization(&geom, &mut trial_rng(seed, t));
            let h = EquivalentChannel::build(&real, l).expect("l >= 1");
            let combined = real.g_sd() + real.g_rd(RelayId::R1) + real.g_rd(RelayId::R2);
            let relays = [RelayId::R1, RelayId::R2];
            let succ_ok = !conditioned
                || check_interference_free(&real, 1.0, l).source_links_dominate;
            for (k, &snr) in snrs.iter().enumerate() {
                if succ_ok {
                    acc[k].0.push(logdet_capacity(&h, snr) / (l + 1) as f64);
                }
                if !conditioned || AdaptiveRule::C.allows_relaying(&real, snr, &relays) {
                    acc[k].1.push(0.5 * c(combined * snr));
                }
            }
        },
        |a, b| {
            for (x, y) in a.iter_mut().zip(b) {
                x.0.merge(&y.0);
                x.1.merge(&y.1);
            }
        },
    );
    Ok(snrs
        .iter()
        .zip(sums)
        .map(|(&snr, (s, cl))| GainEstimate {
            snr,
            gain: s.mean / cl.mean,
            successive_mean: s.mean,
            classic2_mean: cl.mean,
            successive_samples: s.n,
            classic2_samples: cl.n,
        })
        .collect())
}

pub fn capacity_gain(snr: f64, l: usize, trials: u64, seed: u64) -> Result<f64> {
    Ok(capacity_gain_curve(&[snr], l, trials, seed, false)?[0].gain)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::GeometryCase;
    use proptest::prelude::*;

    const EPS: f64 = 1e-12;

    fn gains(sd: f64, sr1: f64, sr2: f64, rr: f64, r1d: f64, r2d: f64) -> ChannelRealization {
        ChannelRealization::from_gains(sd, sr1, sr2, rr, r1d, r2d)
    }

    #[test]
    fn capacity_function() {
        assert_eq!(capacity(0.0).unwrap(), 0.0);
        assert!((capacity(1.0).unwrap() - 1.0).abs() < EPS);
        assert!((capacity(3.0).unwrap() - 2.0).abs() < EPS);
        assert!(matches!(capacity(-0.5), Err(Error::NegativeCapacityArgument(_))));
    }

    #[test]
    fn direct_examples() {
        assert!((rate_direct(&gains(1.0, 0., 0., 0., 0., 0.), 1.0).rate_per_slot - 1.0).abs() < EPS);
        assert_eq!(rate_direct(&ChannelRealization::zero(), 5.0).rate_per_slot, 0.0);
        assert!((rate_direct(&gains(3.0, 0., 0., 0., 0., 0.), 1.0).rate_per_slot - 2.0).abs() < EPS);
    }

    #[test]
    fn classic_examples() {
        let ones = gains(1., 1., 1., 1., 1., 1.);
        assert!((rate_classic1(&ones, 1.0).rate_per_slot - 1.0 / 3.0).abs() < EPS);
        assert!((rate_classic2(&ones, 1.0).rate_per_slot - 0.5).abs() < EPS);

        let weak = gains(1., 0., 1., 1., 1., 1.);
        assert_eq!(rate_classic1(&weak, 1.0).rate_per_slot, 0.0);

        // strong source-relay links: min is the combining term log2(1 + 3) = 2
        let strong = gains(1., 1e3, 1e3, 1., 1., 1.);
        assert!((rate_classic1(&strong, 1.0).rate_per_slot - 2.0 / 3.0).abs() < EPS);
        assert!((rate_classic2(&strong, 1.0).rate_per_slot - 1.0).abs() < EPS);
    }

    #[test]
    fn genie_hand_worked_example() {
        // h_SD = 0, huge inter-relay link, unit elsewhere, L = 2:
        // R_1 = R_2 = 1, logdet = log2((1 + 1)(1 + 1)) = 2 -> rate 2/3.
        let real = gains(0., 1., 1., 1e9, 1., 1.);
        let rep = rate_successive_genie(&real, 1.0, 2).unwrap();
        assert!((rep.per_codeword_rates[0] - 1.0).abs() < EPS);
        assert!((rep.per_codeword_rates[1] - 1.0).abs() < EPS);
        let h = EquivalentChannel::build(&real, 2).unwrap();
        assert!((logdet_capacity(&h, 1.0) - 2.0).abs() < 1e-12);
        assert!((rep.rate_per_slot - 2.0 / 3.0).abs() < EPS);
        assert_eq!(
            rep.branch_log.slots,
            vec![SlotBranch { slot: 2, branch: Branch::DecodeInterference }]
        );
    }

    #[test]
    fn all_zero_links() {
        let z = ChannelRealization::zero();
        for l in [1, 3, 7] {
            assert_eq!(rate_successive_genie(&z, 10.0, l).unwrap().rate_per_slot, 0.0);
            assert_eq!(rate_successive_vblast(&z, 10.0, l).unwrap().rate_per_slot, 0.0);
            assert_eq!(rate_theorem1(&z, 10.0, l).unwrap(), 0.0);
        }
        assert!(rate_successive_genie(&z, 1.0, 0).is_err());
    }

    #[test]
    fn branch_tie_treats_interference_as_noise() {
        let real = gains(1., 2., 2., 2., 1., 1.);
        let rep = rate_successive_genie(&real, 10.0, 3).unwrap();
        assert!(rep.branch_log.slots.iter().all(|s| s.branch == Branch::TreatAsNoise));
    }

    #[test]
    fn relay_alternation_in_destination_caps() {
        // Strong everything except distinct relay-destination gains, so the
        // per-codeword rates equal the combining caps.
        let real = gains(1., 1e6, 1e6, 1e12, 2., 5.);
        let rep = rate_successive_genie(&real, 1.0, 4).unwrap();
        let want = [c(3.0), c(6.0), c(3.0), c(6.0)];
        for (got, want) in rep.per_codeword_rates.iter().zip(want) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn interference_free_examples() {
        let strong = gains(1., 1., 1., 1e15, 1., 1.);
        assert!(check_interference_free(&strong, 10.0, 5).interference_decodable);
        // boundary: |h_SR|^2 = |h_SD|^2 + |h_RD|^2 exactly
        let edge = gains(9., 25., 25., 1., 16., 16.);
        assert!(check_interference_free(&edge, 10.0, 4).source_links_dominate);
        let below = gains(9., 24., 25., 1., 16., 16.);
        assert!(!check_interference_free(&below, 10.0, 4).source_links_dominate);
        // L = 1 has no interference slot
        assert!(check_interference_free(&gains(1., 1., 1., 0., 1., 1.), 10.0, 1).interference_decodable);
    }

    #[test]
    fn case_iii_interference_decodable_frequency() {
        // regression values measured with 1e5 draws: 0.824 (L = 2), 0.765 (L >= 3)
        let geom = NetworkGeometry::preset(GeometryCase::III);
        let n = 20_000u64;
        let (mut two, mut seven) = (0u64, 0u64);
        for t in 0..n {
            let real = sample_realization(&geom, &mut trial_rng(5, t));
            two += check_interference_free(&real, 100.0, 2).interference_decodable as u64;
            seven += check_interference_free(&real, 100.0, 7).interference_decodable as u64;
        }
        let (two, seven) = (two as f64 / n as f64, seven as f64 / n as f64);
        assert!((two - 0.824).abs() < 0.015, "{two}");
        assert!((seven - 0.765).abs() < 0.015, "{seven}");
    }

    #[test]
    fn theorem1_two_by_one() {
        // column [1; 1]: det(I + h h^H) = 3
        let real = gains(1., 0., 0., 0., 1., 0.);
        assert!((rate_theorem1(&real, 1.0, 1).unwrap() - 0.5 * 3f64.log2()).abs() < 1e-12);
        assert_eq!(rate_theorem1(&real, 0.0, 1).unwrap(), 0.0);
    }

    #[test]
    fn adaptive_rule_a() {
        let weak = gains(2., 1., 5., 1., 1., 1.);
        let rep = apply_adaptive_fallback(rate_successive_genie(&weak, 10.0, 3).unwrap(), &weak, 10.0, AdaptiveRule::A);
        assert!(rep.branch_log.fallback);
        assert_eq!(rep.rate_per_slot, rate_direct(&weak, 10.0).rate_per_slot);

        let edge = gains(2., 2., 2., 1., 1., 1.);
        let rep = apply_adaptive_fallback(rate_classic2(&edge, 10.0), &edge, 10.0, AdaptiveRule::A);
        assert!(!rep.branch_log.fallback);
        assert_eq!(rep.rate_per_slot, rate_classic2(&edge, 10.0).rate_per_slot);

        let rep = apply_adaptive_fallback(rate_direct(&weak, 10.0), &weak, 10.0, AdaptiveRule::A);
        assert!(!rep.branch_log.fallback);
    }

    #[test]
    fn adaptive_rule_c_gives_combining_rate() {
        let real = gains(1., 10., 12., 1., 2., 3.);
        let snr = 4.0;
        assert!(AdaptiveRule::C.allows_relaying(&real, snr, &[RelayId::R1, RelayId::R2]));
        let rep = apply_adaptive_fallback(rate_classic2(&real, snr), &real, snr, AdaptiveRule::C);
        assert!((rep.rate_per_slot - 0.5 * c(6.0 * snr)).abs() < 1e-12);
        assert!(!rep.branch_log.fallback);
    }

    #[test]
    fn adaptive_rule_b_uses_relays_in_frame() {
        // R2 fails the dominance test but an L = 1 frame never uses R2.
        let real = gains(1., 5., 0.5, 1., 1., 1.);
        let single = rate_successive_genie(&real, 1.0, 1).unwrap();
        assert!(!apply_adaptive_fallback(single, &real, 1.0, AdaptiveRule::B).branch_log.fallback);
        let multi = rate_successive_genie(&real, 1.0, 2).unwrap();
        assert!(apply_adaptive_fallback(multi, &real, 1.0, AdaptiveRule::B).branch_log.fallback);
    }

    #[test]
    fn scheme_names_round_trip() {
        for s in Scheme::ALL {
            assert_eq!(s.name().parse::<Scheme>().unwrap(), s);
        }
        assert!("bogus".parse::<Scheme>().is_err());
    }

    #[test]
    fn gain_low_snr_limit() {
        // First-order expansion: E[logdet] ~ snr tr(H H^H) / ln 2 with
        // E tr = 2L, and E[C(combined snr)] ~ 3 snr / ln 2.
        for l in [3usize, 7] {
            let want = 4.0 * l as f64 / (3.0 * (l + 1) as f64);
            let g = capacity_gain(1e-6, l, 10_000, 3).unwrap();
            assert!((g / want - 1.0).abs() < 0.02, "l={l}: {g} vs {want}");
        }
    }

    #[test]
    fn conditioned_gain_uses_subsets() {
        let est = capacity_gain_curve(&[10.0], 3, 2048, 9, true).unwrap()[0];
        assert!(est.successive_samples < 2048 && est.successive_samples > 0);
        assert!(est.classic2_samples < 2048 && est.classic2_samples > 0);
    }

    fn realization_strategy() -> impl Strategy<Value = (u64, usize, f64)> {
        (0u64..10_000, 1usize..9, prop::sample::select(vec![0.0, 0.1, 1.0, 10.0, 100.0, 1e4]))
    }

    proptest! {
        #[test]
        fn rate_ordering_and_bounds((trial, l, snr) in realization_strategy(),
                                    case in prop::sample::select(vec![GeometryCase::I, GeometryCase::II, GeometryCase::III])) {
            let real = sample_realization(&NetworkGeometry::preset(case), &mut trial_rng(77, trial));
            let genie = rate_successive_genie(&real, snr, l).unwrap();
            let vblast = rate_successive_vblast(&real, snr, l).unwrap();
            let thm = rate_theorem1(&real, snr, l).unwrap();
            let c1 = rate_classic1(&real, snr).rate_per_slot;
            let c2 = rate_classic2(&real, snr).rate_per_slot;

            prop_assert!(c1 <= c2);
            prop_assert!(vblast.rate_per_slot <= genie.rate_per_slot + 1e-9);
            prop_assert!(genie.rate_per_slot <= thm + 1e-12);
            for rep in [&genie, &vblast] {
                prop_assert!(rep.rate_per_slot.is_finite() && rep.rate_per_slot >= 0.0);
                prop_assert!(rep.per_codeword_rates.iter().all(|&r| r.is_finite() && r >= 0.0));
                prop_assert_eq!(rep.branch_log.slots.len(), l - 1);
                for s in &rep.branch_log.slots {
                    let g_next = real.g_sr(RelayId::for_codeword(s.slot));
                    let want = if real.g_r1r2() > g_next { Branch::DecodeInterference } else { Branch::TreatAsNoise };
                    prop_assert_eq!(s.branch, want);
                }
            }
            // dropping the sum-capacity term never lowers the rate
            let caps_only = genie.per_codeword_rates.iter().sum::<f64>() / (l + 1) as f64;
            prop_assert!(caps_only >= genie.rate_per_slot);

            if genie.conditions.unwrap().both() {
                prop_assert!((genie.rate_per_slot - thm).abs() <= 1e-9 * thm.max(1.0));
            }
        }
    }
}
