//! Cooperative MISO beamforming (`Nt >= 2` transmit antennas per BTS, one
//! receive antenna per mobile).
//!
//! The useful beamformer for the stream from BTS `k` to mobile `j` lives in
//! the plane spanned by the two normalized channels out of BTS `k`, so it
//! is parameterized by a single angle `beta_jk` measured from the other
//! mobile's channel:
//!
//! ```text
//! v = (cos b / cos a) Proj_cross(h_own) + (sin b / sin a) Perp_cross(h_own)
//! |h_own^H v|^2   = g_own  cos^2(b - a)
//! |h_cross^H v|^2 = g_cross cos^2(b)
//! ```
//!
//! where `a` is the angle between the two channels. `b = a` is the
//! maximum-ratio beamformer, `b = pi/2` zero-forcing, and the optimum moves
//! from the former to the latter as SNR grows. Rates then depend only on
//! angles and powers, which keeps the weighted-sum-rate search
//! six-dimensional (four angles plus two power splits, since full transmit
//! power is optimal at the boundary of the region).

use crate::channel::{
    alignment_angle, inner, ChannelError, MisoChannel, PowerBudget, WidebandChannel,
};
use crate::narrowband::RatePair;
use crate::wideband::DualIterate;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

const LN2: f64 = std::f64::consts::LN_2;
const FRAC_PI_2: f64 = std::f64::consts::FRAC_PI_2;

/// Below this angle the two channels count as parallel, above `pi/2` minus
/// it as orthogonal; the beamformer formula divides by `cos a` and `sin a`.
const DEGENERATE_ALPHA: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum BeamformingError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Channel(#[from] ChannelError),
}

/// Angles and powers parameterizing the four streams of one sub-carrier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeamConfig {
    pub beta11: f64,
    pub beta21: f64,
    pub beta12: f64,
    pub beta22: f64,
    pub p11: f64,
    pub p21: f64,
    pub p12: f64,
    pub p22: f64,
    pub alpha1: f64,
    pub alpha2: f64,
}

impl BeamConfig {
    pub fn zero_forcing(ch: &MisoChannel) -> Self {
        BeamConfig {
            beta11: FRAC_PI_2,
            beta21: FRAC_PI_2,
            beta12: FRAC_PI_2,
            beta22: FRAC_PI_2,
            p11: 0.0,
            p21: 0.0,
            p12: 0.0,
            p22: 0.0,
            alpha1: ch.alpha1(),
            alpha2: ch.alpha2(),
        }
    }

    pub fn bts_sums(&self) -> (f64, f64) {
        (self.p11 + self.p21, self.p12 + self.p22)
    }
}

/// Construct the unit-norm beamformer at angle `beta` from the cross
/// channel. Parallel channels (`alpha ~ 0`) collapse to the own-channel
/// direction; orthogonal ones use the closed form with the projection term
/// dropped.
pub fn beamformer_from_angle(
    h_own: &[Complex64],
    h_cross: &[Complex64],
    beta: f64,
) -> Result<Vec<Complex64>, BeamformingError> {
    if !(0.0..=FRAC_PI_2 + 1e-12).contains(&beta) {
        return Err(BeamformingError::InvalidParameter(format!(
            "beta must lie in [0, pi/2], got {beta}"
        )));
    }
    let alpha = alignment_angle(h_own, h_cross)?;
    let n_own = norm(h_own);
    let n_cross = norm(h_cross);
    let own: Vec<Complex64> = h_own.iter().map(|c| c / n_own).collect();
    let cross: Vec<Complex64> = h_cross.iter().map(|c| c / n_cross).collect();

    if alpha < DEGENERATE_ALPHA {
        return Ok(own);
    }
    let c = inner(&cross, &own); // cross^H own, |c| = cos(alpha)
    if FRAC_PI_2 - alpha < DEGENERATE_ALPHA {
        // orthogonal channels: the projection vanishes with cos(alpha)
        return Ok(own
            .iter()
            .zip(&cross)
            .map(|(o, x)| x * beta.cos() + o * beta.sin())
            .collect());
    }
    let proj_scale = beta.cos() / alpha.cos();
    let perp_scale = beta.sin() / alpha.sin();
    let v: Vec<Complex64> = own
        .iter()
        .zip(&cross)
        .map(|(o, x)| {
            let proj = x * c;
            let perp = o - proj;
            proj * proj_scale + perp * perp_scale
        })
        .collect();
    Ok(v)
}

fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

fn cos2(x: f64) -> f64 {
    let c = x.cos();
    c * c
}

/// Achieved rates from the angle parameterization.
pub fn rate_pair_bf(ch: &MisoChannel, cfg: &BeamConfig) -> RatePair {
    let g = ch.scalar_gains();
    let (a1, a2) = (cfg.alpha1, cfg.alpha2);
    let s1 = g.g11 * cos2(cfg.beta11 - a1) * cfg.p11 + g.g12 * cos2(cfg.beta12 - a2) * cfg.p12;
    let i1 = g.g11 * cos2(cfg.beta21) * cfg.p21 + g.g12 * cos2(cfg.beta22) * cfg.p22;
    let s2 = g.g21 * cos2(cfg.beta21 - a1) * cfg.p21 + g.g22 * cos2(cfg.beta22 - a2) * cfg.p22;
    let i2 = g.g21 * cos2(cfg.beta11) * cfg.p11 + g.g22 * cos2(cfg.beta12) * cfg.p12;
    RatePair {
        r1: (1.0 + s1 / (1.0 + i1)).log2(),
        r2: (1.0 + s2 / (1.0 + i2)).log2(),
    }
}

/// Same rates computed from explicit beamforming vectors; the oracle route
/// for the angle formula.
pub fn rate_pair_bf_vectors(
    ch: &MisoChannel,
    cfg: &BeamConfig,
) -> Result<RatePair, BeamformingError> {
    let v11 = beamformer_from_angle(&ch.h11, &ch.h21, cfg.beta11)?;
    let v21 = beamformer_from_angle(&ch.h21, &ch.h11, cfg.beta21)?;
    let v12 = beamformer_from_angle(&ch.h12, &ch.h22, cfg.beta12)?;
    let v22 = beamformer_from_angle(&ch.h22, &ch.h12, cfg.beta22)?;
    let pow2 = |h: &[Complex64], v: &[Complex64]| inner(h, v).norm_sqr();
    let s1 = pow2(&ch.h11, &v11) * cfg.p11 + pow2(&ch.h12, &v12) * cfg.p12;
    let i1 = pow2(&ch.h11, &v21) * cfg.p21 + pow2(&ch.h12, &v22) * cfg.p22;
    let s2 = pow2(&ch.h21, &v21) * cfg.p21 + pow2(&ch.h22, &v22) * cfg.p22;
    let i2 = pow2(&ch.h21, &v11) * cfg.p11 + pow2(&ch.h22, &v12) * cfg.p12;
    Ok(RatePair {
        r1: (1.0 + s1 / (1.0 + i1)).log2(),
        r2: (1.0 + s2 / (1.0 + i2)).log2(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BfMethod {
    /// Coarse 6-D grid plus refinement; documented as exhaustive-coarse.
    Exhaustive,
    /// Alternate power-split and angle line searches from a zero-forcing
    /// start until converged. Fast, not provably global.
    Iterative,
}

#[derive(Debug, Clone, Copy)]
pub struct BfSearchCfg {
    /// Grid points per dimension for the exhaustive-coarse pass.
    pub grid: usize,
    /// Line-search points for 1-D optimizations.
    pub line: usize,
    pub refine_rounds: usize,
    /// Convergence threshold for the iterative sweep.
    pub tol: f64,
}

impl Default for BfSearchCfg {
    fn default() -> Self {
        BfSearchCfg {
            grid: 13,
            line: 31,
            refine_rounds: 2,
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BfSolution {
    pub rate: f64,
    pub rates: RatePair,
    pub config: BeamConfig,
    /// Set on iterative results: convergence to the global optimum is not
    /// guaranteed.
    pub heuristic: bool,
}

/// Full power at both BTSs (optimal on the region boundary): splits `s`
/// map to `p_1k = s_k P_k`, `p_2k = (1 - s_k) P_k`.
fn config_from(
    ch: &MisoChannel,
    angles: [f64; 4],
    splits: [f64; 2],
    budget: &PowerBudget,
) -> BeamConfig {
    BeamConfig {
        beta11: angles[0],
        beta21: angles[1],
        beta12: angles[2],
        beta22: angles[3],
        p11: splits[0] * budget.p1,
        p21: (1.0 - splits[0]) * budget.p1,
        p12: splits[1] * budget.p2,
        p22: (1.0 - splits[1]) * budget.p2,
        alpha1: ch.alpha1(),
        alpha2: ch.alpha2(),
    }
}

fn line_maximize(f: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize, rounds: usize) -> (f64, f64) {
    let mut best = (lo, f(lo));
    let mut a = lo;
    let mut b = hi;
    for _ in 0..=rounds {
        for i in 0..n {
            let x = a + (b - a) * i as f64 / (n - 1) as f64;
            let v = f(x);
            if v > best.1 {
                best = (x, v);
            }
        }
        let span = (b - a) / (n - 1) as f64 * 2.0;
        a = (best.0 - span).max(lo);
        b = (best.0 + span).min(hi);
    }
    best
}

/// Maximize `R1 + mu R2` over the four angles and two power splits.
pub fn max_weighted_sum_rate_bf(
    ch: &MisoChannel,
    budget: &PowerBudget,
    mu: f64,
    method: BfMethod,
    cfg: &BfSearchCfg,
) -> Result<BfSolution, BeamformingError> {
    if ch.nt() < 2 {
        return Err(BeamformingError::InvalidParameter(
            "beamforming needs Nt >= 2".into(),
        ));
    }
    let value = |angles: [f64; 4], splits: [f64; 2]| -> f64 {
        rate_pair_bf(ch, &config_from(ch, angles, splits, budget)).weighted(mu)
    };

    let (angles, splits) = match method {
        BfMethod::Exhaustive => {
            let n = cfg.grid;
            let ticks: Vec<f64> = (0..n)
                .map(|i| FRAC_PI_2 * i as f64 / (n - 1) as f64)
                .collect();
            let fracs: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
            // parallelize over the first angle's slice of the 6-D grid
            let slices: Vec<(f64, [f64; 4], [f64; 2])> = ticks
                .par_iter()
                .map(|&b11| {
                    let mut local = (f64::NEG_INFINITY, [0.0; 4], [0.0; 2]);
                    for &b21 in &ticks {
                        for &b12 in &ticks {
                            for &b22 in &ticks {
                                for &s1 in &fracs {
                                    for &s2 in &fracs {
                                        let v = value([b11, b21, b12, b22], [s1, s2]);
                                        if v > local.0 {
                                            local = (v, [b11, b21, b12, b22], [s1, s2]);
                                        }
                                    }
                                }
                            }
                        }
                    }
                    local
                })
                .collect();
            let mut best = (f64::NEG_INFINITY, [0.0; 4], [0.0; 2]);
            for s in slices {
                if s.0 > best.0 {
                    best = s;
                }
            }
            let (mut angles, mut splits) = (best.1, best.2);
            // coordinate refinement around the best cell
            for round in 0..cfg.refine_rounds {
                let span_a = FRAC_PI_2 / (n - 1) as f64 / (round + 1) as f64 * 2.0;
                let span_s = 1.0 / (n - 1) as f64 / (round + 1) as f64 * 2.0;
                for i in 0..4 {
                    let (x, _) = line_maximize(
                        |x| {
                            let mut a = angles;
                            a[i] = x;
                            value(a, splits)
                        },
                        (angles[i] - span_a).max(0.0),
                        (angles[i] + span_a).min(FRAC_PI_2),
                        cfg.line,
                        0,
                    );
                    angles[i] = x;
                }
                for i in 0..2 {
                    let (x, _) = line_maximize(
                        |x| {
                            let mut s = splits;
                            s[i] = x;
                            value(angles, s)
                        },
                        (splits[i] - span_s).max(0.0),
                        (splits[i] + span_s).min(1.0),
                        cfg.line,
                        0,
                    );
                    splits[i] = x;
                }
            }
            (angles, splits)
        }
        BfMethod::Iterative => {
            // zero-forcing start with even splits
            let mut angles = [FRAC_PI_2; 4];
            let mut splits = [0.5; 2];
            let mut current = value(angles, splits);
            for _ in 0..200 {
                let before = current;
                for i in 0..2 {
                    let (x, v) = line_maximize(
                        |x| {
                            let mut s = splits;
                            s[i] = x;
                            value(angles, s)
                        },
                        0.0,
                        1.0,
                        cfg.line,
                        cfg.refine_rounds,
                    );
                    splits[i] = x;
                    current = v;
                }
                for i in 0..4 {
                    let (x, v) = line_maximize(
                        |x| {
                            let mut a = angles;
                            a[i] = x;
                            value(a, splits)
                        },
                        0.0,
                        FRAC_PI_2,
                        cfg.line,
                        cfg.refine_rounds,
                    );
                    angles[i] = x;
                    current = v;
                }
                if current - before < cfg.tol {
                    break;
                }
            }
            (angles, splits)
        }
    };

    let config = config_from(ch, angles, splits, budget);
    let rates = rate_pair_bf(ch, &config);
    Ok(BfSolution {
        rate: rates.weighted(mu),
        rates,
        config,
        heuristic: matches!(method, BfMethod::Iterative),
    })
}

/// Boundary points of the beamforming rate region: one weighted-sum-rate
/// maximizer per `mu`.
pub fn frontier_bf(
    ch: &MisoChannel,
    budget: &PowerBudget,
    mu_list: &[f64],
    method: BfMethod,
    cfg: &BfSearchCfg,
) -> Result<Vec<(f64, RatePair, BeamConfig)>, BeamformingError> {
    if mu_list.is_empty() {
        return Err(BeamformingError::InvalidParameter(
            "mu_list must not be empty".into(),
        ));
    }
    mu_list
        .iter()
        .map(|&mu| {
            if mu < 0.0 {
                return Err(BeamformingError::InvalidParameter(format!(
                    "mu must be nonnegative, got {mu}"
                )));
            }
            let s = max_weighted_sum_rate_bf(ch, budget, mu, method, cfg)?;
            Ok((mu, s.rates, s.config))
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Wideband beamforming dual
// ---------------------------------------------------------------------------

/// Wideband beamforming allocation: per-sub-carrier stream powers and
/// angles, with the dual diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct BfWidebandAllocation {
    pub configs: Vec<BeamConfig>,
    pub weighted_sum_rate: f64,
    pub lambda: (f64, f64),
    pub duality_gap: f64,
    pub trace: Vec<DualIterate>,
}

impl BfWidebandAllocation {
    pub fn total_p1(&self) -> f64 {
        self.configs.iter().map(|c| c.p11 + c.p21).sum()
    }

    pub fn total_p2(&self) -> f64 {
        self.configs.iter().map(|c| c.p12 + c.p22).sum()
    }
}

pub(crate) struct CarrierData {
    pub gains: [f64; 4], // g11 g21 g12 g22
    pub alpha1: f64,
    pub alpha2: f64,
}

impl CarrierData {
    pub(crate) fn weighted_rate(&self, angles: [f64; 4], powers: [f64; 4], mu: f64) -> f64 {
        let [g11, g21, g12, g22] = self.gains;
        let (a1, a2) = (self.alpha1, self.alpha2);
        let [p11, p21, p12, p22] = powers;
        let s1 = g11 * cos2(angles[0] - a1) * p11 + g12 * cos2(angles[2] - a2) * p12;
        let i1 = g11 * cos2(angles[1]) * p21 + g12 * cos2(angles[3]) * p22;
        let s2 = g21 * cos2(angles[1] - a1) * p21 + g22 * cos2(angles[3] - a2) * p22;
        let i2 = g21 * cos2(angles[0]) * p11 + g22 * cos2(angles[2]) * p12;
        (1.0 + s1 / (1.0 + i1)).log2() + mu * (1.0 + s2 / (1.0 + i2)).log2()
    }
}

#[derive(Clone, Copy)]
struct CarrierSolution {
    angles: [f64; 4],
    powers: [f64; 4],
    lagrangian: f64,
}

/// Per-sub-carrier Lagrangian maximization over four angles and four
/// powers: closed-form zero-forcing and full-cooperation starts, then
/// coordinate ascent; warm-started from the previous iterate's solution.
fn bf_inner_maximize(
    c: &CarrierData,
    l1: f64,
    l2: f64,
    mu: f64,
    warm: Option<&CarrierSolution>,
) -> CarrierSolution {
    let [g11, g21, g12, g22] = c.gains;
    let penal = |powers: [f64; 4]| l1 * (powers[0] + powers[1]) + l2 * (powers[2] + powers[3]);
    let f =
        |angles: [f64; 4], powers: [f64; 4]| c.weighted_rate(angles, powers, mu) - penal(powers);

    // single concave stream: w log2(1 + g x) - lam x
    let axis = |g: f64, w: f64, lam: f64| -> f64 {
        if g <= 0.0 || w <= 0.0 {
            return 0.0;
        }
        (w / (lam * LN2) - 1.0 / g).max(0.0)
    };

    let zf = FRAC_PI_2;
    let mut starts: Vec<([f64; 4], [f64; 4])> = Vec::with_capacity(4);
    if let Some(w) = warm {
        starts.push((w.angles, w.powers));
    }
    // zero-forcing: no interference, each mobile served by its better
    // effective gain-to-price stream
    {
        let e11 = g11 * cos2(zf - c.alpha1);
        let e12 = g12 * cos2(zf - c.alpha2);
        let e21 = g21 * cos2(zf - c.alpha1);
        let e22 = g22 * cos2(zf - c.alpha2);
        let mut powers = [0.0; 4];
        if e11 / l1 >= e12 / l2 {
            powers[0] = axis(e11, 1.0, l1);
        } else {
            powers[2] = axis(e12, 1.0, l2);
        }
        if e21 / l1 >= e22 / l2 {
            powers[1] = axis(e21, mu, l1);
        } else {
            powers[3] = axis(e22, mu, l2);
        }
        starts.push(([zf; 4], powers));
    }
    // full cooperation toward one mobile with maximum-ratio beams
    {
        let mut powers = [0.0; 4];
        if g11 / l1 >= g12 / l2 {
            powers[0] = axis(g11, 1.0, l1);
        } else {
            powers[2] = axis(g12, 1.0, l2);
        }
        starts.push(([c.alpha1, zf, c.alpha2, zf], powers));
    }
    if mu > 0.0 {
        let mut powers = [0.0; 4];
        if g21 / l1 >= g22 / l2 {
            powers[1] = axis(g21, mu, l1);
        } else {
            powers[3] = axis(g22, mu, l2);
        }
        starts.push(([zf, c.alpha1, zf, c.alpha2], powers));
    }

    let mut best = CarrierSolution {
        angles: [zf; 4],
        powers: [0.0; 4],
        lagrangian: 0.0,
    };
    for (mut angles, mut powers) in starts {
        let mut v = f(angles, powers);
        let sweeps = if warm.is_some() { 2 } else { 3 };
        for _ in 0..sweeps {
            for i in 0..4 {
                let (x, nv) = line_maximize(
                    |x| {
                        let mut a = angles;
                        a[i] = x;
                        f(a, powers)
                    },
                    0.0,
                    FRAC_PI_2,
                    13,
                    2,
                );
                angles[i] = x;
                v = nv;
            }
            for i in 0..4 {
                let hi = (powers[i] * 2.0).max(2.0 / (l1.min(l2) * LN2));
                let (x, nv) = line_maximize(
                    |x| {
                        let mut p = powers;
                        p[i] = x;
                        f(angles, p)
                    },
                    0.0,
                    hi,
                    13,
                    2,
                );
                powers[i] = x;
                v = nv;
            }
        }
        if v > best.lagrangian {
            best = CarrierSolution {
                angles,
                powers,
                lagrangian: v,
            };
        }
    }
    best
}

/// Nested-bisection dual for the wideband cooperative beamforming problem:
/// outer loop on `lambda1`, inner on `lambda2`, per-sub-carrier angle and
/// power maximization of the Lagrangian in between.
pub fn wideband_bf_dual_solve(
    ch: &WidebandChannel,
    budgets: &PowerBudget,
    mu: f64,
    eps_lambda: f64,
) -> Result<BfWidebandAllocation, BeamformingError> {
    let entries = ch.miso_entries()?;
    if budgets.p1 <= 0.0 || budgets.p2 <= 0.0 {
        return Err(BeamformingError::InvalidParameter(
            "total power budgets must be positive".into(),
        ));
    }
    let carriers: Vec<CarrierData> = entries
        .iter()
        .map(|m| {
            let g = m.scalar_gains();
            CarrierData {
                gains: [g.g11, g.g21, g.g12, g.g22],
                alpha1: m.alpha1(),
                alpha2: m.alpha2(),
            }
        })
        .collect();
    let l = carriers.len();
    let max_gain = carriers
        .iter()
        .flat_map(|c| c.gains)
        .fold(0.0_f64, f64::max);
    let lambda_max = 1.001 * (1.0 + mu) * max_gain / LN2 + 1e-9;
    let power_tol = 1e-4;

    let mut warm: Vec<Option<CarrierSolution>> = vec![None; l];
    let mut best: Option<(f64, Vec<CarrierSolution>)> = None;
    let mut min_dual = f64::INFINITY;
    let mut trace = Vec::new();

    let evaluate = |l1: f64,
                        l2: f64,
                        warm: &mut Vec<Option<CarrierSolution>>,
                        best: &mut Option<(f64, Vec<CarrierSolution>)>,
                        min_dual: &mut f64,
                        trace: &mut Vec<DualIterate>|
     -> (f64, f64) {
        let sols: Vec<CarrierSolution> = carriers
            .par_iter()
            .zip(warm.par_iter())
            .map(|(c, w)| bf_inner_maximize(c, l1, l2, mu, w.as_ref()))
            .collect();
        for (w, s) in warm.iter_mut().zip(&sols) {
            *w = Some(*s);
        }
        let s1: f64 = sols.iter().map(|s| s.powers[0] + s.powers[1]).sum();
        let s2: f64 = sols.iter().map(|s| s.powers[2] + s.powers[3]).sum();
        let dual_value = sols.iter().map(|s| s.lagrangian).sum::<f64>()
            + l1 * budgets.p1
            + l2 * budgets.p2;
        // feasible recovery: scale each BTS's streams onto its budget
        let f1 = if s1 > 0.0 { budgets.p1 / s1 } else { 1.0 };
        let f2 = if s2 > 0.0 { budgets.p2 / s2 } else { 1.0 };
        let mut primal = 0.0;
        let mut scaled = Vec::with_capacity(l);
        for (c, s) in carriers.iter().zip(&sols) {
            let powers = [
                s.powers[0] * f1,
                s.powers[1] * f1,
                s.powers[2] * f2,
                s.powers[3] * f2,
            ];
            primal += c.weighted_rate(s.angles, powers, mu);
            scaled.push(CarrierSolution {
                angles: s.angles,
                powers,
                lagrangian: 0.0,
            });
        }
        if best.as_ref().is_none_or(|(v, _)| primal > *v) {
            *best = Some((primal, scaled));
        }
        if dual_value < *min_dual {
            *min_dual = dual_value;
        }
        trace.push(DualIterate {
            lambda1: l1,
            lambda2: l2,
            dual_value,
            primal_feasible: primal,
            p1_sum: s1,
            p2_sum: s2,
        });
        (s1, s2)
    };

    let (mut lo, mut hi) = (0.0_f64, lambda_max);
    let mut final_lambda = (lambda_max, lambda_max);
    for _ in 0..200 {
        if hi - lo <= eps_lambda {
            break;
        }
        let mid = 0.5 * (lo + hi);
        // inner bisection on lambda2
        let (mut lo2, mut hi2) = (0.0_f64, lambda_max);
        let mut inner_s1 = 0.0;
        let mut inner_l2 = lambda_max;
        while hi2 - lo2 > eps_lambda {
            let mid2 = 0.5 * (lo2 + hi2);
            let (s1, s2) = evaluate(mid, mid2, &mut warm, &mut best, &mut min_dual, &mut trace);
            if s2 > budgets.p2 {
                lo2 = mid2;
            } else {
                hi2 = mid2;
                inner_s1 = s1;
                inner_l2 = mid2;
                if (s2 - budgets.p2).abs() <= power_tol * budgets.p2 {
                    break;
                }
            }
        }
        if inner_s1 > budgets.p1 {
            lo = mid;
        } else {
            hi = mid;
            final_lambda = (mid, inner_l2);
            if (inner_s1 - budgets.p1).abs() <= power_tol * budgets.p1 {
                break;
            }
        }
    }

    let (value, sols) = best.expect("at least one iterate");
    let configs: Vec<BeamConfig> = carriers
        .iter()
        .zip(&sols)
        .map(|(c, s)| BeamConfig {
            beta11: s.angles[0],
            beta21: s.angles[1],
            beta12: s.angles[2],
            beta22: s.angles[3],
            p11: s.powers[0],
            p21: s.powers[1],
            p12: s.powers[2],
            p22: s.powers[3],
            alpha1: c.alpha1,
            alpha2: c.alpha2,
        })
        .collect();
    Ok(BfWidebandAllocation {
        configs,
        weighted_sum_rate: value,
        lambda: final_lambda,
        duality_gap: min_dual - value,
        trace,
    })
}

/// Weighted sum rate of a wideband beamforming allocation, re-evaluated
/// from its per-carrier configs.
pub fn bf_sum_rate(ch: &WidebandChannel, alloc: &BfWidebandAllocation, mu: f64) -> f64 {
    let entries = ch.miso_entries().expect("MISO-mode channel");
    entries
        .iter()
        .zip(&alloc.configs)
        .map(|(m, cfg)| rate_pair_bf(m, cfg).weighted(mu))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::generate_wideband_miso;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn random_channel(rng: &mut ChaCha8Rng, nt: usize) -> MisoChannel {
        let v = |rng: &mut ChaCha8Rng| -> Vec<Complex64> {
            (0..nt)
                .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
                .collect()
        };
        MisoChannel::new(v(rng), v(rng), v(rng), v(rng)).unwrap()
    }

    #[test]
    fn beamformer_unit_norm_and_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let nt = rng.random_range(2..=4);
            let ch = random_channel(&mut rng, nt);
            let beta = rng.random_range(0.0..FRAC_PI_2);
            let v = beamformer_from_angle(&ch.h11, &ch.h21, beta).unwrap();
            assert!((norm(&v) - 1.0).abs() < 1e-12);
            let alpha = ch.alpha1();
            let g = ch.scalar_gains();
            let own = inner(&ch.h11, &v).norm_sqr();
            let cross = inner(&ch.h21, &v).norm_sqr();
            assert!(
                (own - g.g11 * cos2(beta - alpha)).abs() < 1e-10 * (1.0 + g.g11),
                "own-gain identity"
            );
            assert!(
                (cross - g.g21 * cos2(beta)).abs() < 1e-10 * (1.0 + g.g21),
                "cross-gain identity"
            );
        }
    }

    #[test]
    fn beamformer_mrt_and_zf_special_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let ch = random_channel(&mut rng, 3);
        let g = ch.scalar_gains();
        let alpha = ch.alpha1();
        let mrt = beamformer_from_angle(&ch.h11, &ch.h21, alpha).unwrap();
        assert!((inner(&ch.h11, &mrt).norm_sqr() - g.g11).abs() < 1e-10 * (1.0 + g.g11));
        let zf = beamformer_from_angle(&ch.h11, &ch.h21, FRAC_PI_2).unwrap();
        assert!(inner(&ch.h21, &zf).norm_sqr() < 1e-12);
    }

    #[test]
    fn beamformer_lies_in_channel_span() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let ch = random_channel(&mut rng, 4);
        let v = beamformer_from_angle(&ch.h11, &ch.h21, 0.7).unwrap();
        // subtract projections onto an orthonormal basis of span{h11, h21}
        let u1: Vec<Complex64> = {
            let n = norm(&ch.h11);
            ch.h11.iter().map(|c| c / n).collect()
        };
        let mut u2: Vec<Complex64> = {
            let c = inner(&u1, &ch.h21);
            ch.h21.iter().zip(&u1).map(|(h, u)| h - u * c).collect()
        };
        let n2 = norm(&u2);
        for c in u2.iter_mut() {
            *c /= n2;
        }
        let c1 = inner(&u1, &v);
        let c2 = inner(&u2, &v);
        let resid: f64 = v
            .iter()
            .zip(u1.iter().zip(&u2))
            .map(|(vi, (a, b))| (vi - a * c1 - b * c2).norm_sqr())
            .sum();
        assert!(resid < 1e-20, "out-of-span residual {resid}");
    }

    #[test]
    fn beamformer_degenerate_parallel() {
        let h = vec![Complex64::new(1.0, 0.5), Complex64::new(-0.2, 0.8)];
        let scaled: Vec<Complex64> = h.iter().map(|c| c * Complex64::new(0.0, 2.0)).collect();
        let v = beamformer_from_angle(&h, &scaled, 0.3).unwrap();
        let n = norm(&h);
        for (a, b) in v.iter().zip(&h) {
            assert!((a - b / n).norm() < 1e-12);
        }
    }

    #[test]
    fn angle_formula_matches_vector_route() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..300 {
            let nt = rng.random_range(2..=4);
            let ch = random_channel(&mut rng, nt);
            let cfg = BeamConfig {
                beta11: rng.random_range(0.0..FRAC_PI_2),
                beta21: rng.random_range(0.0..FRAC_PI_2),
                beta12: rng.random_range(0.0..FRAC_PI_2),
                beta22: rng.random_range(0.0..FRAC_PI_2),
                p11: rng.random_range(0.0..3.0),
                p21: rng.random_range(0.0..3.0),
                p12: rng.random_range(0.0..3.0),
                p22: rng.random_range(0.0..3.0),
                alpha1: ch.alpha1(),
                alpha2: ch.alpha2(),
            };
            let a = rate_pair_bf(&ch, &cfg);
            let b = rate_pair_bf_vectors(&ch, &cfg).unwrap();
            assert!((a.r1 - b.r1).abs() < 1e-10, "{} vs {}", a.r1, b.r1);
            assert!((a.r2 - b.r2).abs() < 1e-10, "{} vs {}", a.r2, b.r2);
        }
    }

    #[test]
    fn all_zf_angles_remove_interference() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let ch = random_channel(&mut rng, 2);
        let g = ch.scalar_gains();
        let mut cfg = BeamConfig::zero_forcing(&ch);
        cfg.p11 = 2.0;
        cfg.p22 = 3.0;
        let r = rate_pair_bf(&ch, &cfg);
        let expect1 = (1.0 + g.g11 * cos2(FRAC_PI_2 - cfg.alpha1) * 2.0).log2();
        let expect2 = (1.0 + g.g22 * cos2(FRAC_PI_2 - cfg.alpha2) * 3.0).log2();
        assert!((r.r1 - expect1).abs() < 1e-12);
        assert!((r.r2 - expect2).abs() < 1e-12);
    }

    #[test]
    fn zero_powers_zero_rates() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let ch = random_channel(&mut rng, 2);
        let cfg = BeamConfig::zero_forcing(&ch);
        let r = rate_pair_bf(&ch, &cfg);
        assert_eq!((r.r1, r.r2), (0.0, 0.0));
    }

    #[test]
    fn wsr_bf_mu_zero_serves_mobile_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let ch = random_channel(&mut rng, 2);
        let g = ch.scalar_gains();
        let budget = PowerBudget::new(5.0, 5.0).unwrap();
        let s = max_weighted_sum_rate_bf(
            &ch,
            &budget,
            0.0,
            BfMethod::Iterative,
            &BfSearchCfg::default(),
        )
        .unwrap();
        // with mu = 0 the MRT-everything bound for mobile 1 is attainable
        let bound = (1.0 + g.g11 * 5.0 + g.g12 * 5.0).log2();
        assert!(
            s.rate >= bound - 1e-3,
            "mu=0 rate {} vs MRT bound {}",
            s.rate,
            bound
        );
    }

    #[test]
    fn wsr_bf_iterative_close_to_exhaustive() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        let budget = PowerBudget::new(3.0, 3.0).unwrap();
        for _ in 0..3 {
            let ch = random_channel(&mut rng, 2);
            let cfg = BfSearchCfg::default();
            let it =
                max_weighted_sum_rate_bf(&ch, &budget, 1.0, BfMethod::Iterative, &cfg).unwrap();
            let ex =
                max_weighted_sum_rate_bf(&ch, &budget, 1.0, BfMethod::Exhaustive, &cfg).unwrap();
            assert!(it.heuristic && !ex.heuristic);
            assert!(
                it.rate >= ex.rate - 1e-2,
                "iterative {} vs exhaustive {}",
                it.rate,
                ex.rate
            );
        }
    }

    #[test]
    fn wsr_bf_full_power_is_optimal() {
        // scaling either BTS's powers down never helps at the optimum
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let ch = random_channel(&mut rng, 2);
        let budget = PowerBudget::new(3.0, 3.0).unwrap();
        let s = max_weighted_sum_rate_bf(
            &ch,
            &budget,
            1.0,
            BfMethod::Iterative,
            &BfSearchCfg::default(),
        )
        .unwrap();
        for bts in 0..2 {
            let mut cfg = s.config;
            if bts == 0 {
                cfg.p11 *= 0.99;
                cfg.p21 *= 0.99;
            } else {
                cfg.p12 *= 0.99;
                cfg.p22 *= 0.99;
            }
            let r = rate_pair_bf(&ch, &cfg).weighted(1.0);
            assert!(
                r <= s.rate + 1e-9,
                "power reduction helped: {} > {}",
                r,
                s.rate
            );
        }
    }

    #[test]
    fn wsr_bf_angles_track_snr_regime() {
        // high SNR pushes the optimizer toward zero-forcing, low SNR
        // toward maximum-ratio on the streams that carry power
        let mut rng = ChaCha8Rng::seed_from_u64(47);
        let ch = random_channel(&mut rng, 2);
        let cfg = BfSearchCfg::default();

        let high = max_weighted_sum_rate_bf(
            &ch,
            &PowerBudget::new(1e4, 1e4).unwrap(),
            1.0,
            BfMethod::Iterative,
            &cfg,
        )
        .unwrap();
        // idle streams leave their angle unconstrained, so judge only the
        // streams that carry power
        let served = |c: &BeamConfig| -> Vec<(f64, f64, f64)> {
            [
                (c.p11, c.beta11, c.alpha1),
                (c.p21, c.beta21, c.alpha1),
                (c.p12, c.beta12, c.alpha2),
                (c.p22, c.beta22, c.alpha2),
            ]
            .into_iter()
            .filter(|(p, _, _)| *p > 1e-4)
            .collect()
        };
        for (_, beta, _) in served(&high.config) {
            assert!(
                beta > FRAC_PI_2 - 0.2,
                "high-SNR served angle {beta} should be near zero-forcing"
            );
        }

        let low = max_weighted_sum_rate_bf(
            &ch,
            &PowerBudget::new(1e-2, 1e-2).unwrap(),
            1.0,
            BfMethod::Iterative,
            &cfg,
        )
        .unwrap();
        for (_, beta, alpha) in served(&low.config) {
            assert!(
                (beta - alpha).abs() < 0.2,
                "low-SNR served stream angle {beta} far from maximum-ratio {alpha}"
            );
        }
    }

    #[test]
    fn frontier_bf_supporting_points_not_dominated() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let ch = random_channel(&mut rng, 2);
        let budget = PowerBudget::new(3.0, 3.0).unwrap();
        let mu_list = [0.0, 0.5, 1.0, 2.0, 8.0];
        let pts = frontier_bf(
            &ch,
            &budget,
            &mu_list,
            BfMethod::Iterative,
            &BfSearchCfg::default(),
        )
        .unwrap();
        let r1_at_mu0 = pts[0].1.r1;
        let r2_at_big_mu = pts.last().unwrap().1.r2;
        for (_, r, _) in &pts {
            assert!(r.r1 <= r1_at_mu0 + 1e-6);
            assert!(r.r2 <= r2_at_big_mu + 1e-6);
        }
        for (i, (_, a, _)) in pts.iter().enumerate() {
            for (j, (_, b, _)) in pts.iter().enumerate() {
                if i != j {
                    let dominated = b.r1 > a.r1 + 1e-9 && b.r2 > a.r2 + 1e-9;
                    assert!(!dominated, "point {i} strictly dominated by {j}");
                }
            }
        }
    }

    #[test]
    fn bf_dual_single_carrier_matches_narrowband() {
        let ch = generate_wideband_miso(1, 2, [0.5; 4], 0.0, 3).unwrap();
        let budgets = PowerBudget::new(4.0, 4.0).unwrap();
        let a = wideband_bf_dual_solve(&ch, &budgets, 1.0, 1e-5).unwrap();
        let m = &ch.miso_entries().unwrap()[0];
        let nb = max_weighted_sum_rate_bf(
            m,
            &budgets,
            1.0,
            BfMethod::Exhaustive,
            &BfSearchCfg::default(),
        )
        .unwrap();
        assert!(
            (a.weighted_sum_rate - nb.rate).abs() < 5e-2,
            "wideband L=1 {} vs narrowband {}",
            a.weighted_sum_rate,
            nb.rate
        );
        assert!(a.total_p1() <= budgets.p1 * (1.0 + 1e-3));
        assert!(a.total_p2() <= budgets.p2 * (1.0 + 1e-3));
    }

    #[test]
    fn bf_dual_orthogonal_channels_match_stream_waterfill() {
        // orthogonal own/cross channels make zero-forcing lossless, so the
        // dual should match interference-free water-filling over the 2L
        // per-mobile streams with per-BTS prices
        let l = 8;
        let mut entries = Vec::new();
        for i in 0..l {
            let a = 0.6 + 0.1 * i as f64;
            let b = 1.2 - 0.05 * i as f64;
            let c = 0.9 - 0.03 * i as f64;
            let d = 0.4 + 0.08 * i as f64;
            let h11 = vec![Complex64::new(a, 0.0), Complex64::new(0.0, 0.0)];
            let h21 = vec![Complex64::new(0.0, 0.0), Complex64::new(b, 0.0)];
            let h12 = vec![Complex64::new(c, 0.0), Complex64::new(0.0, 0.0)];
            let h22 = vec![Complex64::new(0.0, 0.0), Complex64::new(d, 0.0)];
            entries.push(MisoChannel::new(h11, h21, h12, h22).unwrap());
        }
        let ch = WidebandChannel {
            entries: crate::channel::WidebandEntries::Miso(entries),
            meta: crate::channel::ChannelMeta {
                mean_gains: [1.0; 4],
                rho: 0.0,
                seed: 0,
                nt: Some(2),
            },
        };
        let budgets = PowerBudget::new(6.0, 6.0).unwrap();
        let a = wideband_bf_dual_solve(&ch, &budgets, 1.0, 1e-5).unwrap();

        // oracle: per (mobile, carrier) stream pick the cheaper BTS by
        // gain-to-price ratio, then water-fill each BTS budget; scan a 2-D
        // price lattice and keep the best feasible primal value
        let carriers = ch.miso_entries().unwrap();
        let stream_gains: Vec<[f64; 4]> = carriers
            .iter()
            .map(|m| {
                let g = m.scalar_gains();
                [g.g11, g.g21, g.g12, g.g22]
            })
            .collect();
        let mut best_oracle = 0.0_f64;
        for i in 1..150 {
            for j in 1..150 {
                let l1 = 0.015 * i as f64;
                let l2 = 0.015 * j as f64;
                let mut s1 = 0.0;
                let mut s2 = 0.0;
                let mut picks = Vec::new();
                for g in &stream_gains {
                    for (own, cross) in [(g[0], g[2]), (g[1], g[3])] {
                        let (gain, lam, into1) = if own / l1 >= cross / l2 {
                            (own, l1, true)
                        } else {
                            (cross, l2, false)
                        };
                        let x = (1.0 / (lam * LN2) - 1.0 / gain).max(0.0);
                        if into1 {
                            s1 += x;
                        } else {
                            s2 += x;
                        }
                        picks.push((gain, x, into1));
                    }
                }
                if s1 <= 0.0 || s2 <= 0.0 {
                    continue;
                }
                let f1 = budgets.p1 / s1;
                let f2 = budgets.p2 / s2;
                let v: f64 = picks
                    .iter()
                    .map(|&(gain, x, into1)| {
                        let scale = if into1 { f1 } else { f2 };
                        (1.0 + gain * x * scale).log2()
                    })
                    .sum();
                best_oracle = best_oracle.max(v);
            }
        }
        assert!(
            a.weighted_sum_rate >= best_oracle - 0.05,
            "bf dual {} vs zf water-filling oracle {}",
            a.weighted_sum_rate,
            best_oracle
        );
    }
}
