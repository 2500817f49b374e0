//! Channel synthesis and validation.
//!
//! Gains are linear power gains with noise normalized to unit variance, so a
//! link with gain `g` and transmit power `P` has receive SNR `g * P`. The
//! index convention is `g_jk`: gain from BTS `k` to mobile `j` (`g12` is the
//! cross link from BTS 2 to mobile 1).
//!
//! Wideband channels are `L` parallel sub-carriers whose per-link complex
//! amplitudes follow a first-order Gauss-Markov (AR(1)) sequence across
//! sub-carriers: `c(l) = rho * c(l-1) + sqrt(1 - rho^2) * w(l)` with CSCG
//! innovations `w(l)`, giving Rayleigh-distributed amplitudes with lag-1
//! correlation `rho` and stationary mean power equal to the configured link
//! mean. Generation is deterministic: innovation `(link, antenna, l)` is
//! drawn from a `ChaCha8` stream with id
//! `link << 56 | antenna << 40 | l`, all seeded from the channel seed.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ChannelError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("channel document error: {0}")]
    Document(String),
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

/// The four link power gains of one (sub-)channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NarrowbandGains {
    pub g11: f64,
    pub g21: f64,
    pub g12: f64,
    pub g22: f64,
}

impl NarrowbandGains {
    pub fn new(g11: f64, g21: f64, g12: f64, g22: f64) -> Result<Self, ChannelError> {
        let g = Self { g11, g21, g12, g22 };
        for (name, v) in g.named() {
            if !v.is_finite() || v < 0.0 {
                return Err(ChannelError::InvalidParameter(format!(
                    "gain {name} must be finite and nonnegative, got {v}"
                )));
            }
        }
        Ok(g)
    }

    fn named(&self) -> [(&'static str, f64); 4] {
        [
            ("g11", self.g11),
            ("g21", self.g21),
            ("g12", self.g12),
            ("g22", self.g22),
        ]
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.g11, self.g21, self.g12, self.g22]
    }

    pub fn max_gain(&self) -> f64 {
        self.as_array().into_iter().fold(0.0, f64::max)
    }
}

/// Per-BTS transmit power constraints (totals in the wideband case).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerBudget {
    pub p1: f64,
    pub p2: f64,
}

impl PowerBudget {
    pub fn new(p1: f64, p2: f64) -> Result<Self, ChannelError> {
        if !(p1.is_finite() && p2.is_finite()) || p1 < 0.0 || p2 < 0.0 {
            return Err(ChannelError::InvalidParameter(format!(
                "power budget must be finite and nonnegative, got ({p1}, {p2})"
            )));
        }
        Ok(Self { p1, p2 })
    }

    /// Both BTSs at the same budget; handy for SNR sweeps.
    pub fn symmetric(p: f64) -> Result<Self, ChannelError> {
        Self::new(p, p)
    }
}

/// MISO channel vectors from both BTSs to both mobiles (single receive
/// antenna each). `h_jk` runs from BTS `k` to mobile `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct MisoChannel {
    pub h11: Vec<Complex64>,
    pub h21: Vec<Complex64>,
    pub h12: Vec<Complex64>,
    pub h22: Vec<Complex64>,
}

impl MisoChannel {
    pub fn new(
        h11: Vec<Complex64>,
        h21: Vec<Complex64>,
        h12: Vec<Complex64>,
        h22: Vec<Complex64>,
    ) -> Result<Self, ChannelError> {
        let nt = h11.len();
        if nt < 2 {
            return Err(ChannelError::InvalidParameter(format!(
                "MISO channel needs Nt >= 2 antennas, got {nt}"
            )));
        }
        if h21.len() != nt || h12.len() != nt || h22.len() != nt {
            return Err(ChannelError::InvalidParameter(
                "all four channel vectors must have the same length".into(),
            ));
        }
        Ok(Self { h11, h21, h12, h22 })
    }

    pub fn nt(&self) -> usize {
        self.h11.len()
    }

    /// Squared norms `g_jk = ||h_jk||^2` as scalar gains.
    pub fn scalar_gains(&self) -> NarrowbandGains {
        NarrowbandGains {
            g11: norm_sq(&self.h11),
            g21: norm_sq(&self.h21),
            g12: norm_sq(&self.h12),
            g22: norm_sq(&self.h22),
        }
    }

    /// Angle between the normalized channels from BTS 1 to the two mobiles.
    pub fn alpha1(&self) -> f64 {
        alignment_angle(&self.h11, &self.h21).expect("validated nonzero vectors")
    }

    /// Angle between the normalized channels from BTS 2 to the two mobiles.
    pub fn alpha2(&self) -> f64 {
        alignment_angle(&self.h12, &self.h22).expect("validated nonzero vectors")
    }
}

fn norm_sq(v: &[Complex64]) -> f64 {
    v.iter().map(|c| c.norm_sqr()).sum()
}

/// Conjugating inner product `a^dagger b` (first argument conjugated).
pub fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Angle `arccos(|a^dagger b| / (||a|| ||b||))` in `[0, pi/2]`.
pub fn alignment_angle(a: &[Complex64], b: &[Complex64]) -> Result<f64, ChannelError> {
    if a.len() != b.len() {
        return Err(ChannelError::InvalidParameter(format!(
            "vector lengths differ: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let na = norm_sq(a).sqrt();
    let nb = norm_sq(b).sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(ChannelError::DegenerateInput(
            "alignment angle of a zero vector".into(),
        ));
    }
    let cos = (inner(a, b).norm() / (na * nb)).clamp(0.0, 1.0);
    Ok(cos.acos())
}

/// Generation metadata kept with a synthesized channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelMeta {
    pub mean_gains: [f64; 4],
    pub rho: f64,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nt: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum WidebandEntries {
    Scalar(Vec<NarrowbandGains>),
    Miso(Vec<MisoChannel>),
}

/// `L` parallel sub-carriers, scalar gains or MISO vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct WidebandChannel {
    pub entries: WidebandEntries,
    pub meta: ChannelMeta,
}

impl WidebandChannel {
    pub fn len(&self) -> usize {
        match &self.entries {
            WidebandEntries::Scalar(v) => v.len(),
            WidebandEntries::Miso(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_miso(&self) -> bool {
        matches!(self.entries, WidebandEntries::Miso(_))
    }

    pub fn scalar_entries(&self) -> Result<&[NarrowbandGains], ChannelError> {
        match &self.entries {
            WidebandEntries::Scalar(v) => Ok(v),
            WidebandEntries::Miso(_) => Err(ChannelError::InvalidParameter(
                "expected a scalar-mode channel, got MISO".into(),
            )),
        }
    }

    pub fn miso_entries(&self) -> Result<&[MisoChannel], ChannelError> {
        match &self.entries {
            WidebandEntries::Miso(v) => Ok(v),
            WidebandEntries::Scalar(_) => Err(ChannelError::InvalidParameter(
                "expected a MISO-mode channel, got scalar".into(),
            )),
        }
    }

    /// Largest scalar link gain across all sub-carriers (MISO entries use
    /// their squared norms).
    pub fn max_gain(&self) -> f64 {
        match &self.entries {
            WidebandEntries::Scalar(v) => v.iter().map(|g| g.max_gain()).fold(0.0, f64::max),
            WidebandEntries::Miso(v) => v
                .iter()
                .map(|m| m.scalar_gains().max_gain())
                .fold(0.0, f64::max),
        }
    }

    pub fn to_json(&self) -> Result<String, ChannelError> {
        Ok(serde_json::to_string_pretty(&ChannelDoc::from(self))?)
    }

    pub fn from_json(s: &str) -> Result<Self, ChannelError> {
        let doc: ChannelDoc = serde_json::from_str(s)?;
        doc.into_channel()
    }
}

fn validate_common(l: usize, mean_gains: [f64; 4], rho: f64) -> Result<(), ChannelError> {
    if l < 1 {
        return Err(ChannelError::InvalidParameter(
            "sub-carrier count L must be >= 1".into(),
        ));
    }
    if !(0.0..1.0).contains(&rho) {
        return Err(ChannelError::InvalidParameter(format!(
            "correlation rho must lie in [0, 1), got {rho}"
        )));
    }
    for (i, m) in mean_gains.iter().enumerate() {
        if !m.is_finite() || *m < 0.0 {
            return Err(ChannelError::InvalidParameter(format!(
                "mean gain {i} must be finite and nonnegative, got {m}"
            )));
        }
    }
    Ok(())
}

// Stream-splitting rule: one ChaCha8 stream per (link, antenna, sub-carrier).
fn innovation(seed: u64, link: usize, antenna: usize, l: usize) -> Complex64 {
    let stream = ((link as u64) << 56) | ((antenna as u64) << 40) | (l as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im)
}

fn gauss_markov_sequence(
    seed: u64,
    link: usize,
    antenna: usize,
    l: usize,
    mean_power: f64,
    rho: f64,
) -> Vec<Complex64> {
    // Innovations scaled so each sample has E|c|^2 = mean_power.
    let scale = (mean_power / 2.0).sqrt();
    let innov_gain = (1.0 - rho * rho).sqrt();
    let mut out = Vec::with_capacity(l);
    let mut prev = innovation(seed, link, antenna, 0) * scale;
    out.push(prev);
    for idx in 1..l {
        prev = prev * rho + innovation(seed, link, antenna, idx) * scale * innov_gain;
        out.push(prev);
    }
    out
}

/// Synthesize a scalar-mode wideband channel: four independently fading
/// links, each an AR(1) complex-Gaussian sequence across sub-carriers with
/// per-sample mean power `mean_gains[i]`.
pub fn generate_wideband_scalar(
    l: usize,
    mean_gains: [f64; 4],
    rho: f64,
    seed: u64,
) -> Result<WidebandChannel, ChannelError> {
    validate_common(l, mean_gains, rho)?;
    let links: Vec<Vec<Complex64>> = (0..4)
        .map(|link| gauss_markov_sequence(seed, link, 0, l, mean_gains[link], rho))
        .collect();
    let entries = (0..l)
        .map(|idx| NarrowbandGains {
            g11: links[0][idx].norm_sqr(),
            g21: links[1][idx].norm_sqr(),
            g12: links[2][idx].norm_sqr(),
            g22: links[3][idx].norm_sqr(),
        })
        .collect();
    Ok(WidebandChannel {
        entries: WidebandEntries::Scalar(entries),
        meta: ChannelMeta {
            mean_gains,
            rho,
            seed,
            nt: None,
        },
    })
}

/// Synthesize a MISO-mode wideband channel. Each antenna coefficient of each
/// link is an independent AR(1) sequence with per-entry mean power
/// `mean_gains[i]`, so `E[g_jk] = Nt * mean_gains[i]`. To match unit-mean
/// link gains use `mean_gains = 1/Nt`.
pub fn generate_wideband_miso(
    l: usize,
    nt: usize,
    mean_gains: [f64; 4],
    rho: f64,
    seed: u64,
) -> Result<WidebandChannel, ChannelError> {
    validate_common(l, mean_gains, rho)?;
    if nt < 2 {
        return Err(ChannelError::InvalidParameter(format!(
            "Nt must be >= 2, got {nt}"
        )));
    }
    // per link, per antenna: one AR(1) sequence across sub-carriers
    let mut seqs: Vec<Vec<Vec<Complex64>>> = Vec::with_capacity(4);
    for link in 0..4 {
        let per_antenna = (0..nt)
            .map(|a| gauss_markov_sequence(seed, link, a + 1, l, mean_gains[link], rho))
            .collect();
        seqs.push(per_antenna);
    }
    let vector_at = |link: usize, idx: usize| -> Vec<Complex64> {
        (0..nt).map(|a| seqs[link][a][idx]).collect()
    };
    let entries = (0..l)
        .map(|idx| {
            MisoChannel::new(
                vector_at(0, idx),
                vector_at(1, idx),
                vector_at(2, idx),
                vector_at(3, idx),
            )
            .expect("generated vectors share Nt >= 2")
        })
        .collect();
    Ok(WidebandChannel {
        entries: WidebandEntries::Miso(entries),
        meta: ChannelMeta {
            mean_gains,
            rho,
            seed,
            nt: Some(nt),
        },
    })
}

// ---------------------------------------------------------------------------
// JSON document form
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct ChannelDoc {
    #[serde(rename = "L")]
    l: usize,
    mode: String,
    #[serde(rename = "Nt", default, skip_serializing_if = "Option::is_none")]
    nt: Option<usize>,
    subcarriers: Vec<SubcarrierDoc>,
    meta: ChannelMeta,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum SubcarrierDoc {
    Scalar {
        g11: f64,
        g21: f64,
        g12: f64,
        g22: f64,
    },
    Miso {
        h11: Vec<[f64; 2]>,
        h21: Vec<[f64; 2]>,
        h12: Vec<[f64; 2]>,
        h22: Vec<[f64; 2]>,
    },
}

fn to_pairs(v: &[Complex64]) -> Vec<[f64; 2]> {
    v.iter().map(|c| [c.re, c.im]).collect()
}

fn from_pairs(v: &[[f64; 2]]) -> Vec<Complex64> {
    v.iter().map(|p| Complex64::new(p[0], p[1])).collect()
}

impl From<&WidebandChannel> for ChannelDoc {
    fn from(ch: &WidebandChannel) -> Self {
        let (mode, nt, subcarriers) = match &ch.entries {
            WidebandEntries::Scalar(v) => (
                "scalar".to_string(),
                None,
                v.iter()
                    .map(|g| SubcarrierDoc::Scalar {
                        g11: g.g11,
                        g21: g.g21,
                        g12: g.g12,
                        g22: g.g22,
                    })
                    .collect(),
            ),
            WidebandEntries::Miso(v) => (
                "miso".to_string(),
                Some(v.first().map(|m| m.nt()).unwrap_or(0)),
                v.iter()
                    .map(|m| SubcarrierDoc::Miso {
                        h11: to_pairs(&m.h11),
                        h21: to_pairs(&m.h21),
                        h12: to_pairs(&m.h12),
                        h22: to_pairs(&m.h22),
                    })
                    .collect(),
            ),
        };
        ChannelDoc {
            l: ch.len(),
            mode,
            nt,
            subcarriers,
            meta: ch.meta.clone(),
        }
    }
}

impl ChannelDoc {
    fn into_channel(self) -> Result<WidebandChannel, ChannelError> {
        if self.subcarriers.len() != self.l {
            return Err(ChannelError::Document(format!(
                "L = {} but {} subcarriers listed",
                self.l,
                self.subcarriers.len()
            )));
        }
        let entries = match self.mode.as_str() {
            "scalar" => {
                let mut v = Vec::with_capacity(self.l);
                for (i, s) in self.subcarriers.into_iter().enumerate() {
                    match s {
                        SubcarrierDoc::Scalar { g11, g21, g12, g22 } => {
                            v.push(NarrowbandGains::new(g11, g21, g12, g22).map_err(|e| {
                                ChannelError::Document(format!("subcarrier {i}: {e}"))
                            })?)
                        }
                        SubcarrierDoc::Miso { .. } => {
                            return Err(ChannelError::Document(format!(
                                "subcarrier {i} is MISO in a scalar document"
                            )))
                        }
                    }
                }
                WidebandEntries::Scalar(v)
            }
            "miso" => {
                let mut v = Vec::with_capacity(self.l);
                for (i, s) in self.subcarriers.into_iter().enumerate() {
                    match s {
                        SubcarrierDoc::Miso { h11, h21, h12, h22 } => v.push(
                            MisoChannel::new(
                                from_pairs(&h11),
                                from_pairs(&h21),
                                from_pairs(&h12),
                                from_pairs(&h22),
                            )
                            .map_err(|e| ChannelError::Document(format!("subcarrier {i}: {e}")))?,
                        ),
                        SubcarrierDoc::Scalar { .. } => {
                            return Err(ChannelError::Document(format!(
                                "subcarrier {i} is scalar in a MISO document"
                            )))
                        }
                    }
                }
                WidebandEntries::Miso(v)
            }
            other => {
                return Err(ChannelError::Document(format!(
                    "unknown mode {other:?}, expected \"scalar\" or \"miso\""
                )))
            }
        };
        let ch = WidebandChannel {
            entries,
            meta: self.meta,
        };
        if !(0.0..1.0).contains(&ch.meta.rho) {
            return Err(ChannelError::Document(format!(
                "meta.rho = {} outside [0, 1)",
                ch.meta.rho
            )));
        }
        Ok(ch)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gains_reject_negative_and_nonfinite() {
        assert!(NarrowbandGains::new(1.0, 1.0, -0.1, 1.0).is_err());
        assert!(NarrowbandGains::new(f64::NAN, 1.0, 1.0, 1.0).is_err());
        assert!(NarrowbandGains::new(0.0, 0.0, 0.0, 0.0).is_ok());
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate_wideband_scalar(16, [1.0, 0.5, 0.5, 1.0], 0.9, 123).unwrap();
        let b = generate_wideband_scalar(16, [1.0, 0.5, 0.5, 1.0], 0.9, 123).unwrap();
        assert_eq!(a, b);
        let c = generate_wideband_scalar(16, [1.0, 0.5, 0.5, 1.0], 0.9, 124).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn shared_prefix_across_lengths() {
        // Stream splitting per (link, subcarrier) makes shorter channels a
        // prefix of longer ones with the same seed.
        let a = generate_wideband_scalar(8, [1.0; 4], 0.95, 7).unwrap();
        let b = generate_wideband_scalar(16, [1.0; 4], 0.95, 7).unwrap();
        let ga = a.scalar_entries().unwrap();
        let gb = b.scalar_entries().unwrap();
        assert_eq!(&ga[..8], &gb[..8]);
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(generate_wideband_scalar(0, [1.0; 4], 0.5, 1).is_err());
        assert!(generate_wideband_scalar(4, [1.0; 4], 1.0, 1).is_err());
        assert!(generate_wideband_scalar(4, [1.0; 4], -0.1, 1).is_err());
        assert!(generate_wideband_scalar(4, [-1.0, 1.0, 1.0, 1.0], 0.5, 1).is_err());
        assert!(generate_wideband_miso(4, 1, [1.0; 4], 0.5, 1).is_err());
    }

    #[test]
    fn single_carrier_gain_is_exponential_draw() {
        // L=1 reduces to an i.i.d. Rayleigh power draw; check the mean over
        // many seeds rather than one sample.
        let n = 20_000;
        let mut acc = 0.0;
        for seed in 0..n {
            let ch = generate_wideband_scalar(1, [1.0; 4], 0.95, seed).unwrap();
            acc += ch.scalar_entries().unwrap()[0].g11;
        }
        let mean = acc / n as f64;
        assert!((mean - 1.0).abs() < 0.03, "mean {mean}");
    }

    #[test]
    fn lag1_autocorrelation_matches_rho() {
        // Pool the lag-1 sample autocorrelation of the underlying complex
        // sequence across seeds and links.
        let l = 128;
        let mut num = Complex64::new(0.0, 0.0);
        let mut den = 0.0;
        for seed in 0..40 {
            for link in 0..4 {
                let seq = gauss_markov_sequence(seed, link, 0, l, 1.0, 0.95);
                for i in 0..l - 1 {
                    num += seq[i + 1] * seq[i].conj();
                    den += seq[i].norm_sqr();
                }
            }
        }
        let rho_hat = (num / den).re;
        assert!(
            (rho_hat - 0.95).abs() < 0.05,
            "lag-1 autocorrelation {rho_hat}, expected 0.95 +- 0.05"
        );
    }

    #[test]
    fn uncorrelated_mean_gain_matches_configuration() {
        // Monte Carlo estimate of the configured mean for g12 at rho = 0.
        let trials = 100_000;
        let mut acc = 0.0;
        for seed in 0..trials {
            let ch = generate_wideband_scalar(4, [1.0, 0.5, 0.5, 1.0], 0.0, seed).unwrap();
            acc += ch.scalar_entries().unwrap()[0].g12;
        }
        let mean = acc / trials as f64;
        assert!(
            (mean - 0.5).abs() < 0.01,
            "E[g12] = {mean}, expected 0.5 +- 0.01"
        );
    }

    #[test]
    fn exponential_distribution_ks_test() {
        // At rho = 0 per-subcarrier gains on one link are i.i.d. Exp(mean).
        // Kolmogorov-Smirnov at the 1% level should pass for nearly all
        // seeds; allow the expected handful of failures.
        let n = 10_000usize;
        let crit = 1.62762 / (n as f64).sqrt();
        let mut failures = 0;
        let seeds = 40;
        for seed in 0..seeds {
            let ch = generate_wideband_scalar(n, [2.0, 1.0, 1.0, 1.0], 0.0, 2000 + seed).unwrap();
            let mut xs: Vec<f64> = ch
                .scalar_entries()
                .unwrap()
                .iter()
                .map(|g| g.g11)
                .collect();
            xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mut d: f64 = 0.0;
            for (i, x) in xs.iter().enumerate() {
                let cdf = 1.0 - (-x / 2.0).exp();
                let hi = (i + 1) as f64 / n as f64 - cdf;
                let lo = cdf - i as f64 / n as f64;
                d = d.max(hi.max(lo));
            }
            if d > crit {
                failures += 1;
            }
        }
        assert!(
            failures * 20 <= seeds,
            "{failures}/{seeds} KS failures at the 1% level"
        );
    }

    #[test]
    fn miso_alignment_angles_in_range() {
        let ch = generate_wideband_miso(1, 2, [1.0; 4], 0.95, 1).unwrap();
        let m = &ch.miso_entries().unwrap()[0];
        for a in [m.alpha1(), m.alpha2()] {
            assert!((0.0..=std::f64::consts::FRAC_PI_2).contains(&a));
        }
    }

    #[test]
    fn miso_mean_gain_normalization() {
        // E[g_jk] = Nt * mean_gain under the per-antenna convention.
        let trials = 4_000;
        let nt = 3;
        let mut acc = 0.0;
        for seed in 0..trials {
            let ch = generate_wideband_miso(1, nt, [0.5; 4], 0.0, seed).unwrap();
            acc += ch.miso_entries().unwrap()[0].scalar_gains().g11;
        }
        let mean = acc / trials as f64;
        assert!((mean - 1.5).abs() < 0.1, "E[g11] = {mean}, expected 1.5");
    }

    #[test]
    fn alignment_angle_special_cases() {
        let v = vec![Complex64::new(1.0, 0.5), Complex64::new(-0.3, 2.0)];
        assert!(alignment_angle(&v, &v).unwrap() < 1e-7);

        let e1 = vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
        let e2 = vec![Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)];
        assert!((alignment_angle(&e1, &e2).unwrap() - std::f64::consts::FRAC_PI_2).abs() < 1e-12);

        let diag = vec![
            Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0),
            Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0),
        ];
        assert!((alignment_angle(&e1, &diag).unwrap() - std::f64::consts::FRAC_PI_4).abs() < 1e-12);

        let zero = vec![Complex64::new(0.0, 0.0); 2];
        assert!(alignment_angle(&e1, &zero).is_err());
    }

    #[test]
    fn alignment_angle_scale_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let v: Vec<Complex64> = (0..3)
                .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
                .collect();
            let w: Vec<Complex64> = (0..3)
                .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
                .collect();
            let s = Complex64::new(-2.3, 0.7);
            let vs: Vec<Complex64> = v.iter().map(|x| x * s).collect();
            let a = alignment_angle(&v, &w).unwrap();
            let b = alignment_angle(&vs, &w).unwrap();
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn json_round_trip_scalar_and_miso() {
        let ch = generate_wideband_scalar(4, [1.0, 0.5, 0.5, 1.0], 0.9, 11).unwrap();
        let back = WidebandChannel::from_json(&ch.to_json().unwrap()).unwrap();
        assert_eq!(ch, back);

        let ch = generate_wideband_miso(3, 2, [0.5; 4], 0.9, 11).unwrap();
        let back = WidebandChannel::from_json(&ch.to_json().unwrap()).unwrap();
        assert_eq!(ch, back);
    }

    #[test]
    fn json_rejects_inconsistent_documents() {
        let ch = generate_wideband_scalar(2, [1.0; 4], 0.5, 3).unwrap();
        let mut doc: serde_json::Value = serde_json::from_str(&ch.to_json().unwrap()).unwrap();
        doc["L"] = serde_json::json!(5);
        assert!(WidebandChannel::from_json(&doc.to_string()).is_err());
    }
}
