//! The destination-side view of a frame as a multiple-access MIMO channel.
//!
//! Codeword `k` reaches the destination twice: directly from the source in
//! slot `k` and from relay `r_k` in slot `k + 1`. Stacking the `L + 1`
//! received slots gives `y = sqrt(snr) * H s + n` with `H` lower bidiagonal,
//! `h_SD` on the diagonal and the alternating relay coefficients below it.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::{ChannelRealization, RelayId};
use crate::error::{Error, Result};
use crate::log2_1p;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// The `(L+1) x L` equivalent channel matrix, stored column-major.
#[derive(Debug, Clone, PartialEq)]
pub struct EquivalentChannel {
    l: usize,
    entries: Vec<Complex64>,
}

impl EquivalentChannel {
    pub fn build(real: &ChannelRealization, l: usize) -> Result<Self> {
        if l == 0 {
            return Err(Error::ZeroFrameLength);
        }
        let rows = l + 1;
        let mut entries = vec![ZERO; rows * l];
        for k in 0..l {
            entries[k * rows + k] = real.h_sd;
            entries[k * rows + k + 1] = real.h_rd(RelayId::for_codeword(k + 1));
        }
        Ok(EquivalentChannel { l, entries })
    }

    /// Frame length `L` (number of columns).
    pub fn l(&self) -> usize {
        self.l
    }

    pub fn rows(&self) -> usize {
        self.l + 1
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.entries[col * self.rows() + row]
    }

    /// Column `k` (0-based): the signature of codeword `k + 1`.
    pub fn column(&self, k: usize) -> &[Complex64] {
        let rows = self.rows();
        &self.entries[k * rows..(k + 1) * rows]
    }

    pub fn column_norm_sqr(&self, k: usize) -> f64 {
        self.column(k).iter().map(|h| h.norm_sqr()).sum()
    }
}

/// Small dense Hermitian matrix of the form `I + X` with `X` positive
/// semidefinite, kept as `X` so the Cholesky pivots can be formed as
/// `1 + (pivot - 1)` without cancellation.
struct IdentityPlus {
    n: usize,
    x: Vec<Complex64>,
}

impl IdentityPlus {
    /// `I + snr * sum_j h_j h_j^H` over the selected columns.
    fn from_columns<'a>(n: usize, snr: f64, cols: impl Iterator<Item = &'a [Complex64]>) -> Self {
        let mut x = vec![ZERO; n * n];
        for h in cols {
            for i in 0..n {
                if h[i] == ZERO {
                    continue;
                }
                let hi = h[i] * snr;
                for j in 0..=i {
                    x[i * n + j] += hi * h[j].conj();
                }
            }
        }
        for i in 0..n {
            for j in 0..i {
                x[j * n + i] = x[i * n + j].conj();
            }
        }
        IdentityPlus { n, x }
    }

    /// Lower Cholesky factor of `I + X` together with `ln det(I + X)`.
    fn cholesky(&self) -> (Vec<Complex64>, f64) {
        let n = self.n;
        let mut l = vec![ZERO; n * n];
        let mut ln_det = 0.0;
        for i in 0..n {
            let mut excess = self.x[i * n + i].re;
            for k in 0..i {
                excess -= l[i * n + k].norm_sqr();
            }
            // Schur complements of I + X are >= 1 when X is PSD.
            let excess = excess.max(0.0);
            ln_det += excess.ln_1p();
            let d = (1.0 + excess).sqrt();
            l[i * n + i] = Complex64::new(d, 0.0);
            for j in (i + 1)..n {
                let mut s = self.x[j * n + i];
                for k in 0..i {
                    s -= l[j * n + k] * l[i * n + k].conj();
                }
                l[j * n + i] = s / d;
            }
        }
        (l, ln_det)
    }

    /// Solves `(I + X) z = b` through the Cholesky factor.
    fn solve(&self, b: &[Complex64]) -> Vec<Complex64> {
        let n = self.n;
        let (l, _) = self.cholesky();
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s -= l[i * n + k] * y[k];
            }
            y[i] = s / l[i * n + i].re;
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in (i + 1)..n {
                s -= l[k * n + i].conj() * y[k];
            }
            y[i] = s / l[i * n + i].re;
        }
        y
    }
}

/// Sum capacity `log2 det(I + snr * H H^H)` in bits per frame (all `L + 1`
/// slots together).
pub fn logdet_capacity(h: &EquivalentChannel, snr: f64) -> f64 {
    debug_assert!(snr >= 0.0);
    let m = IdentityPlus::from_columns(h.rows(), snr, (0..h.l()).map(|k| h.column(k)));
    let (_, ln_det) = m.cholesky();
    (ln_det / std::f64::consts::LN_2).max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SicOrdering {
    /// Detect the stream with the largest post-MMSE SINR first (V-BLAST).
    /// Ties go to the lowest stream index.
    StrongestFirst,
    /// Detect in time order: codeword 1 first.
    Natural,
}

/// Outcome of MMSE successive interference cancellation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SinrChain {
    /// Detection order as 0-based stream indices.
    pub order: Vec<usize>,
    /// Post-detection SINR of each stream, indexed by stream (not by
    /// detection position).
    pub sinr: Vec<f64>,
}

impl SinrChain {
    /// `log2(1 + sinr_k)` for each stream.
    pub fn stream_rates(&self) -> Vec<f64> {
        self.sinr.iter().map(|&s| log2_1p(s)).collect()
    }

    pub fn sum_rate(&self) -> f64 {
        self.sinr.iter().map(|&s| log2_1p(s)).sum()
    }
}

/// Relative slack used when deciding that one SINR beats another, so that
/// streams equal up to rounding are treated as tied.
const TIE_TOLERANCE: f64 = 1e-12;

fn mmse_sinr(h: &EquivalentChannel, snr: f64, k: usize, remaining: &[usize]) -> f64 {
    let hk = h.column(k);
    let interferers = remaining.iter().filter(|&&j| j != k).map(|&j| h.column(j));
    let cov = IdentityPlus::from_columns(h.rows(), snr, interferers);
    let z = cov.solve(hk);
    let q: f64 = hk.iter().zip(&z).map(|(a, b)| (a.conj() * b).re).sum();
    (snr * q).max(0.0)
}

/// Per-stream SINRs of an MMSE-SIC receiver.
///
/// At each stage every undetected stream is MMSE-filtered against the other
/// undetected streams plus unit noise; one stream is then fixed (the strongest
/// or the earliest, depending on `ordering`) and cancelled.
pub fn mmse_sic_sinrs(h: &EquivalentChannel, snr: f64, ordering: SicOrdering) -> SinrChain {
    debug_assert!(snr >= 0.0);
    let l = h.l();
    let mut remaining: Vec<usize> = (0..l).collect();
    let mut order = Vec::with_capacity(l);
    let mut sinr = vec![0.0; l];

    while !remaining.is_empty() {
        let (pos, value) = match ordering {
            SicOrdering::Natural => (0, mmse_sinr(h, snr, remaining[0], &remaining)),
            SicOrdering::StrongestFirst => {
                let mut best = (0, mmse_sinr(h, snr, remaining[0], &remaining));
                for (p, &k) in remaining.iter().enumerate().skip(1) {
                    let s = mmse_sinr(h, snr, k, &remaining);
                    if s > best.1 * (1.0 + TIE_TOLERANCE) {
                        best = (p, s);
                    }
                }
                best
            }
        };
        let k = remaining.remove(pos);
        debug_assert!(
            value <= snr * h.column_norm_sqr(k) * (1.0 + 1e-9) + 1e-300,
            "post-MMSE SINR exceeds matched-filter bound"
        );
        sinr[k] = value;
        order.push(k);
    }

    SinrChain { order, sinr }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{sample_realization, trial_rng, NetworkGeometry};
    use proptest::prelude::*;

    /// Determinant by Gaussian elimination with partial pivoting, applied to
    /// an explicitly formed `I + snr H H^H`. Independent of the Cholesky path.
    fn det_oracle(h: &EquivalentChannel, snr: f64) -> f64 {
        let n = h.rows();
        let mut a = vec![vec![ZERO; n]; n];
        for i in 0..n {
            for j in 0..n {
                let mut s = if i == j { Complex64::new(1.0, 0.0) } else { ZERO };
                for k in 0..h.l() {
                    s += h.get(i, k) * h.get(j, k).conj() * snr;
                }
                a[i][j] = s;
            }
        }
        let mut det = Complex64::new(1.0, 0.0);
        for c in 0..n {
            let p = (c..n).max_by(|&x, &y| a[x][c].norm().total_cmp(&a[y][c].norm())).unwrap();
            if p != c {
                a.swap(p, c);
                det = -det;
            }
            det *= a[c][c];
            for r in (c + 1)..n {
                let f = a[r][c] / a[c][c];
                for k in c..n {
                    let v = a[c][k];
                    a[r][k] -= f * v;
                }
            }
        }
        assert!(det.im.abs() <= 1e-9 * det.re.abs());
        det.re
    }

    fn random_channel(seed: u64, trial: u64, l: usize) -> EquivalentChannel {
        let real = sample_realization(&NetworkGeometry::iid_rayleigh(), &mut trial_rng(seed, trial));
        EquivalentChannel::build(&real, l).unwrap()
    }

    fn rel_close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
    }

    #[test]
    fn structure_is_bidiagonal_with_alternating_relays() {
        let real = ChannelRealization {
            h_sd: Complex64::new(1.0, 2.0),
            h_r1d: Complex64::new(3.0, 0.0),
            h_r2d: Complex64::new(0.0, -4.0),
            ..ChannelRealization::zero()
        };
        let h = EquivalentChannel::build(&real, 3).unwrap();
        assert_eq!((h.rows(), h.l()), (4, 3));
        for r in 0..4 {
            for c in 0..3 {
                let expect = if r == c {
                    real.h_sd
                } else if r == c + 1 {
                    if c % 2 == 0 { real.h_r1d } else { real.h_r2d }
                } else {
                    ZERO
                };
                assert_eq!(h.get(r, c), expect, "({r},{c})");
            }
        }
        let h1 = EquivalentChannel::build(&real, 1).unwrap();
        assert_eq!(h1.column(0), &[real.h_sd, real.h_r1d]);
    }

    #[test]
    fn zero_frame_rejected() {
        assert!(matches!(
            EquivalentChannel::build(&ChannelRealization::zero(), 0),
            Err(Error::ZeroFrameLength)
        ));
    }

    #[test]
    fn zero_channel() {
        let h = EquivalentChannel::build(&ChannelRealization::zero(), 2).unwrap();
        assert!(h.column(0).iter().chain(h.column(1)).all(|&x| x == ZERO));
        assert_eq!(logdet_capacity(&h, 10.0), 0.0);
        let chain = mmse_sic_sinrs(&h, 10.0, SicOrdering::StrongestFirst);
        assert_eq!(chain.sinr, vec![0.0, 0.0]);
    }

    #[test]
    fn logdet_small_cases() {
        let h = random_channel(1, 0, 4);
        assert_eq!(logdet_capacity(&h, 0.0), 0.0);

        // 2x1 vector channel: det(I + snr h h^H) = 1 + snr |h|^2 (direct 2x2 expansion:
        // (1 + a)(1 + b) - ab with a = |h1|^2, b = |h2|^2).
        let real = ChannelRealization::from_gains(1.0, 0.0, 0.0, 0.0, 3.0, 0.0);
        let h = EquivalentChannel::build(&real, 1).unwrap();
        let (a, b) = (1.0f64, 3.0f64);
        let det = (1.0 + a) * (1.0 + b) - a * b;
        assert!((logdet_capacity(&h, 1.0) - det.log2()).abs() < 1e-12);
        assert!((logdet_capacity(&h, 1.0) - 5f64.log2()).abs() < 1e-12);
    }

    #[test]
    fn logdet_matches_elimination_oracle() {
        for t in 0..50 {
            let h = random_channel(2, t, 7);
            let got = logdet_capacity(&h, 100.0);
            let want = det_oracle(&h, 100.0).log2();
            assert!(rel_close(got, want, 1e-9), "trial {t}: {got} vs {want}");
        }
    }

    #[test]
    fn single_stream_sinr_is_matched_filter() {
        let h = random_channel(3, 0, 1);
        let chain = mmse_sic_sinrs(&h, 4.0, SicOrdering::StrongestFirst);
        let expect = 4.0 * h.column_norm_sqr(0);
        assert!(rel_close(chain.sinr[0], expect, 1e-12));
        assert_eq!(chain.order, vec![0]);
    }

    #[test]
    fn natural_order_is_time_order() {
        let h = random_channel(4, 0, 5);
        let chain = mmse_sic_sinrs(&h, 10.0, SicOrdering::Natural);
        assert_eq!(chain.order, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn strongest_first_picks_largest_sinr() {
        for t in 0..20 {
            let h = random_channel(5, t, 4);
            let chain = mmse_sic_sinrs(&h, 10.0, SicOrdering::StrongestFirst);
            let all: Vec<usize> = (0..4).collect();
            let first: Vec<f64> = all.iter().map(|&k| mmse_sinr(&h, 10.0, k, &all)).collect();
            let best = first.iter().cloned().fold(f64::MIN, f64::max);
            assert_eq!(first[chain.order[0]], best);
        }
    }

    #[test]
    fn ties_go_to_lowest_index() {
        // l = 2 with equal relay gains is symmetric under slot reversal, so
        // both streams start with the same SINR.
        let real = ChannelRealization::from_gains(1.0, 0.0, 0.0, 0.0, 1.0, 1.0);
        let h = EquivalentChannel::build(&real, 2).unwrap();
        let chain = mmse_sic_sinrs(&h, 3.0, SicOrdering::StrongestFirst);
        assert_eq!(chain.order, vec![0, 1]);
    }

    #[test]
    fn chain_rule_both_orders() {
        for l in 1..=8 {
            for t in 0..10 {
                let h = random_channel(6, t, l);
                for snr in [0.1, 1.0, 10.0, 1000.0] {
                    let cap = logdet_capacity(&h, snr);
                    for ord in [SicOrdering::StrongestFirst, SicOrdering::Natural] {
                        let chain = mmse_sic_sinrs(&h, snr, ord);
                        assert!(rel_close(chain.sum_rate(), cap, 1e-9));
                        for k in 0..l {
                            assert!(chain.sinr[k] >= 0.0);
                            assert!(chain.sinr[k] <= snr * h.column_norm_sqr(k) * (1.0 + 1e-9));
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn appendix_determinant_lower_bound() {
        // det(I + a H_m H_m^H) >= (a |h_SD|^2)^m + prod_k (1 + a |h_{r_k,D}|^2)
        for m in 1..=3 {
            for t in 0..200 {
                let real = sample_realization(&NetworkGeometry::iid_rayleigh(), &mut trial_rng(8, t));
                let h = EquivalentChannel::build(&real, m).unwrap();
                for rho in [1.0, 10.0, 1000.0] {
                    let a = 0.5 * rho;
                    let det = 2f64.powf(logdet_capacity(&h, a));
                    let prod: f64 = (1..=m)
                        .map(|k| 1.0 + a * real.g_rd(RelayId::for_codeword(k)))
                        .product();
                    let bound = (a * real.g_sd()).powi(m as i32) + prod;
                    assert!(det >= bound * (1.0 - 1e-9), "m={m} t={t}: {det} < {bound}");
                }
            }
        }
    }

    proptest! {
        #[test]
        fn logdet_monotone_in_snr(seed in 0u64..1000, l in 1usize..8, s1 in 0.0f64..100.0, s2 in 0.0f64..100.0) {
            let h = random_channel(seed, 0, l);
            let (lo, hi) = if s1 <= s2 { (s1, s2) } else { (s2, s1) };
            prop_assert!(logdet_capacity(&h, lo) <= logdet_capacity(&h, hi) + 1e-12);
        }
    }
}
