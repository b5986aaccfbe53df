//! Rate and outage analysis for a two-relay half-duplex network using
//! successive decode-and-forward relaying with repetition coding.
//!
//! The source sends `L` codewords over `L + 1` slots while two relays take
//! turns listening and forwarding. At the destination the frame looks like a
//! multiple-access MIMO channel with an `(L+1) x L` bidiagonal matrix, which
//! is what [`mimo`] builds and analyses. [`protocols`] turns a channel draw
//! into per-scheme achievable rates, [`outage`] estimates outage
//! probabilities and diversity slopes, and [`experiments`] drives the
//! seeded Monte Carlo sweeps behind the `simulate` binary.

pub mod channel;
pub mod config;
pub mod error;
pub mod experiments;
pub mod mimo;
pub mod montecarlo;
pub mod outage;
pub mod output;
pub mod protocols;
pub(crate) mod stats;

pub use channel::{ChannelRealization, GeometryCase, NetworkGeometry, RelayId};
pub use config::{ExperimentConfig, ExperimentKind};
pub use error::{Error, Result};
pub use mimo::{EquivalentChannel, SicOrdering, SinrChain};
pub use protocols::{AdaptiveRule, RateReport, Scheme};

/// Converts an SNR given in dB to a linear power ratio, `10^(dB/10)`.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// `log2(1 + x)`, computed through `ln_1p` so tiny arguments keep their
/// relative precision.
#[inline]
pub(crate) fn log2_1p(x: f64) -> f64 {
    x.ln_1p() / std::f64::consts::LN_2
}
