//! Network geometries and the composite fading model.
//!
//! Every link gain is `v * sqrt(d^-gamma * 10^(zeta/10))` with `v` a
//! unit-variance circularly-symmetric complex Gaussian (Rayleigh amplitude)
//! and `zeta ~ N(0, sigma_dB^2)` an independent lognormal shadowing term,
//! drawn afresh for every link of every realization. One realization covers
//! a whole frame (block fading).

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_1_SQRT_2;

use crate::error::{Error, Result};

/// Pathloss exponent used by all presets.
pub const DEFAULT_PATHLOSS_EXPONENT: f64 = 4.0;
/// Shadowing standard deviation (dB) used by all presets.
pub const DEFAULT_SHADOW_SIGMA_DB: f64 = 8.0;
/// Relay-to-relay distance for case III when no override is given.
pub const DEFAULT_CASE_III_RELAY_SPACING: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GeometryCase {
    /// Relays at unit distance from both source and destination.
    I,
    /// Relays at unit distance from each other, `1/sqrt(2)` from the ends.
    II,
    /// Relays clustered halfway between source and destination.
    III,
}

impl std::str::FromStr for GeometryCase {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "I" | "1" => Ok(GeometryCase::I),
            "II" | "2" => Ok(GeometryCase::II),
            "III" | "3" => Ok(GeometryCase::III),
            other => Err(format!("unknown geometry case `{other}`")),
        }
    }
}

/// Node distances (normalized so that source-destination is 1) plus the
/// large-scale propagation parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetworkGeometry {
    pub d_sd: f64,
    pub d_sr1: f64,
    pub d_sr2: f64,
    pub d_r1d: f64,
    pub d_r2d: f64,
    pub d_r1r2: f64,
    /// Pathloss exponent.
    pub gamma: f64,
    /// Lognormal shadowing standard deviation in dB.
    pub shadow_sigma_db: f64,
}

impl NetworkGeometry {
    pub fn preset(case: GeometryCase) -> Self {
        Self::preset_with_relay_spacing(case, DEFAULT_CASE_III_RELAY_SPACING)
    }

    /// Like [`preset`](Self::preset) but with an explicit relay spacing for
    /// case III. The spacing is ignored for cases I and II, where it follows
    /// from the layout.
    pub fn preset_with_relay_spacing(case: GeometryCase, case_iii_spacing: f64) -> Self {
        let (d_sr, d_rr) = match case {
            GeometryCase::I => (1.0, 3f64.sqrt()),
            GeometryCase::II => (FRAC_1_SQRT_2, 1.0),
            GeometryCase::III => (0.5, case_iii_spacing),
        };
        NetworkGeometry {
            d_sd: 1.0,
            d_sr1: d_sr,
            d_sr2: d_sr,
            d_r1d: d_sr,
            d_r2d: d_sr,
            d_r1r2: d_rr,
            gamma: DEFAULT_PATHLOSS_EXPONENT,
            shadow_sigma_db: DEFAULT_SHADOW_SIGMA_DB,
        }
    }

    /// Unit distances, no pathloss and no shadowing: every coefficient is a
    /// plain unit-variance Rayleigh draw.
    pub fn iid_rayleigh() -> Self {
        NetworkGeometry {
            d_sd: 1.0,
            d_sr1: 1.0,
            d_sr2: 1.0,
            d_r1d: 1.0,
            d_r2d: 1.0,
            d_r1r2: 1.0,
            gamma: 0.0,
            shadow_sigma_db: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let distances = [
            ("d_sd", self.d_sd),
            ("d_sr1", self.d_sr1),
            ("d_sr2", self.d_sr2),
            ("d_r1d", self.d_r1d),
            ("d_r2d", self.d_r2d),
            ("d_r1r2", self.d_r1r2),
        ];
        for (name, d) in distances {
            if !(d.is_finite() && d > 0.0) {
                return Err(Error::InvalidGeometry(format!("{name} must be > 0, got {d}")));
            }
        }
        // gamma = 0 is the degenerate "no pathloss" model used for i.i.d. draws.
        if !(self.gamma.is_finite() && self.gamma >= 0.0) {
            return Err(Error::InvalidGeometry(format!(
                "gamma must be >= 0, got {}",
                self.gamma
            )));
        }
        if !(self.shadow_sigma_db.is_finite() && self.shadow_sigma_db >= 0.0) {
            return Err(Error::InvalidGeometry(format!(
                "shadow_sigma_db must be >= 0, got {}",
                self.shadow_sigma_db
            )));
        }
        Ok(())
    }

    /// Mean pathloss gain `d^-gamma` for one distance.
    fn pathloss(&self, d: f64) -> f64 {
        d.powf(-self.gamma)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RelayId {
    R1,
    R2,
}

impl RelayId {
    /// Relay that handles codeword `i` (1-based): R1, R2, R1, ...
    pub fn for_codeword(i: usize) -> Self {
        debug_assert!(i >= 1, "codeword indices are 1-based");
        if i % 2 == 1 {
            RelayId::R1
        } else {
            RelayId::R2
        }
    }
}

/// The six link coefficients of one frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelRealization {
    pub h_sd: Complex64,
    pub h_sr1: Complex64,
    pub h_sr2: Complex64,
    pub h_r1r2: Complex64,
    pub h_r1d: Complex64,
    pub h_r2d: Complex64,
}

impl ChannelRealization {
    pub fn zero() -> Self {
        Self::from_gains(0.0, 0.0, 0.0, 0.0, 0.0, 0.0)
    }

    /// Builds a realization with real, non-negative coefficients whose squared
    /// magnitudes are the given power gains. Mostly useful for tests and
    /// hand-worked examples.
    pub fn from_gains(sd: f64, sr1: f64, sr2: f64, r1r2: f64, r1d: f64, r2d: f64) -> Self {
        let c = |g: f64| Complex64::new(g.sqrt(), 0.0);
        ChannelRealization {
            h_sd: c(sd),
            h_sr1: c(sr1),
            h_sr2: c(sr2),
            h_r1r2: c(r1r2),
            h_r1d: c(r1d),
            h_r2d: c(r2d),
        }
    }

    pub fn g_sd(&self) -> f64 {
        self.h_sd.norm_sqr()
    }
    pub fn g_r1r2(&self) -> f64 {
        self.h_r1r2.norm_sqr()
    }

    /// Source-to-relay coefficient.
    pub fn h_sr(&self, relay: RelayId) -> Complex64 {
        match relay {
            RelayId::R1 => self.h_sr1,
            RelayId::R2 => self.h_sr2,
        }
    }

    /// Relay-to-destination coefficient.
    pub fn h_rd(&self, relay: RelayId) -> Complex64 {
        match relay {
            RelayId::R1 => self.h_r1d,
            RelayId::R2 => self.h_r2d,
        }
    }

    pub fn g_sr(&self, relay: RelayId) -> f64 {
        self.h_sr(relay).norm_sqr()
    }

    pub fn g_rd(&self, relay: RelayId) -> f64 {
        self.h_rd(relay).norm_sqr()
    }

    pub fn coefficients(&self) -> [Complex64; 6] {
        [
            self.h_sd, self.h_sr1, self.h_sr2, self.h_r1r2, self.h_r1d, self.h_r2d,
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.coefficients().iter().all(|h| h.re.is_finite() && h.im.is_finite())
    }
}

/// Random stream for one trial.
///
/// ChaCha8 keyed by the global seed with the trial index as stream id, so a
/// trial's draws depend only on `(seed, trial)` and never on scheduling.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Unit-variance circularly-symmetric complex Gaussian.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * FRAC_1_SQRT_2, im * FRAC_1_SQRT_2)
}

/// One composite-fading coefficient for a link of length `d`.
pub fn sample_link<R: Rng + ?Sized>(rng: &mut R, geom: &NetworkGeometry, d: f64) -> Complex64 {
    let v = complex_gaussian(rng);
    let z: f64 = rng.sample(StandardNormal);
    let shadow_db = z * geom.shadow_sigma_db;
    let power = geom.pathloss(d) * 10f64.powf(shadow_db / 10.0);
    v * power.sqrt()
}

/// Draws one frame's coefficients. Links are drawn in a fixed order
/// (SD, SR1, SR2, R1R2, R1D, R2D), each consuming three normals.
pub fn sample_realization<R: Rng + ?Sized>(
    geom: &NetworkGeometry,
    rng: &mut R,
) -> ChannelRealization {
    ChannelRealization {
        h_sd: sample_link(rng, geom, geom.d_sd),
        h_sr1: sample_link(rng, geom, geom.d_sr1),
        h_sr2: sample_link(rng, geom, geom.d_sr2),
        h_r1r2: sample_link(rng, geom, geom.d_r1r2),
        h_r1d: sample_link(rng, geom, geom.d_r1d),
        h_r2d: sample_link(rng, geom, geom.d_r2d),
    }
}
