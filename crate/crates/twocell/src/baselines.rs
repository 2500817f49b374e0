//! Comparison schemes: what the cooperative solvers are measured against.
//!
//! - Non-cooperative joint power control: both BTSs adapt their powers to
//!   the channel but do not share messages, narrowband and wideband.
//! - Equal-power cooperation: message sharing with the budget spread
//!   uniformly across sub-carriers.
//! - Non-cooperative joint beamforming and per-BTS null-space (zero
//!   forcing) transmission for the MISO case.
//! - An approximate phase-aligned upper baseline: both BTSs as one
//!   coherent transmitter, zero-forcing channel inversion per sub-carrier
//!   and water-filling over the resulting parallel streams under a pooled
//!   power budget. The real phase-aligned optimum is at least this good;
//!   the curve is labeled approximate and carries the coherent slope (two
//!   degrees of freedom).

use crate::beamforming::{BeamConfig, BeamformingError, BfSearchCfg};
use crate::channel::{
    inner, MisoChannel, NarrowbandGains, PowerBudget, WidebandChannel, WidebandEntries,
};
use crate::narrowband::RatePair;
use crate::wideband::{
    dual_solve_masked, rate_options, subcarrier_best_rate, waterfill_level, SchemeTag, SearchCfg,
    WidebandAllocation, WidebandError,
};
use num_complex::Complex64;
use thiserror::Error;

const LN2: f64 = std::f64::consts::LN_2;
const FRAC_PI_2: f64 = std::f64::consts::FRAC_PI_2;

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("rate target {target} outside the non-cooperative range [0, {max}]")]
    TargetOutOfRange { target: f64, max: f64 },
    #[error(transparent)]
    Channel(#[from] crate::channel::ChannelError),
    #[error(transparent)]
    Wideband(#[from] WidebandError),
    #[error(transparent)]
    Beamforming(#[from] BeamformingError),
}

/// Outcome of a narrowband non-cooperative optimization.
#[derive(Debug, Clone, Copy)]
pub struct NoncoopResult {
    pub rates: RatePair,
    /// Power BTS 1 spends on its own mobile (the only stream it has).
    pub p1_use: f64,
    pub p2_use: f64,
    pub weighted: f64,
}

fn noncoop_rates(g: &NarrowbandGains, p1: f64, p2: f64) -> RatePair {
    RatePair {
        r1: (1.0 + g.g11 * p1 / (1.0 + g.g12 * p2)).log2(),
        r2: (1.0 + g.g22 * p2 / (1.0 + g.g21 * p1)).log2(),
    }
}

/// Narrowband joint power control without message sharing: maximize
/// `R1 + mu R2` over the two transmit powers by grid search plus
/// refinement.
pub fn noncoop_power_control_sumrate(
    g: &NarrowbandGains,
    budget: &PowerBudget,
    mu: f64,
    n_grid: usize,
) -> NoncoopResult {
    let n = n_grid.max(8);
    let value = |p1: f64, p2: f64| noncoop_rates(g, p1, p2).weighted(mu);
    let mut best = (f64::NEG_INFINITY, 0.0, 0.0);
    for i in 0..n {
        let p1 = budget.p1 * i as f64 / (n - 1) as f64;
        for j in 0..n {
            let p2 = budget.p2 * j as f64 / (n - 1) as f64;
            let v = value(p1, p2);
            if v > best.0 {
                best = (v, p1, p2);
            }
        }
    }
    // pattern refinement
    let (mut v, mut p1, mut p2) = best;
    let mut step1 = budget.p1 / (n - 1) as f64;
    let mut step2 = budget.p2 / (n - 1) as f64;
    for _ in 0..3 {
        for &(dx, dy) in &[(1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0)] {
            for scale in [1.0, 0.5, 0.25] {
                let q1 = (p1 + dx * step1 * scale).clamp(0.0, budget.p1);
                let q2 = (p2 + dy * step2 * scale).clamp(0.0, budget.p2);
                let w = value(q1, q2);
                if w > v {
                    v = w;
                    p1 = q1;
                    p2 = q2;
                }
            }
        }
        step1 *= 0.25;
        step2 *= 0.25;
    }
    NoncoopResult {
        rates: noncoop_rates(g, p1, p2),
        p1_use: p1,
        p2_use: p2,
        weighted: v,
    }
}

/// Non-cooperative frontier point: maximize `R2` subject to `R1 = target`.
/// The `R1` equality pins `p1` for each `p2`, leaving a 1-D sweep.
pub fn noncoop_power_control_frontier(
    g: &NarrowbandGains,
    budget: &PowerBudget,
    r1_target: f64,
    n_grid: usize,
) -> Result<NoncoopResult, BaselineError> {
    let max = (1.0 + g.g11 * budget.p1).log2();
    if !r1_target.is_finite() || r1_target < 0.0 || r1_target > max + 1e-12 {
        return Err(BaselineError::TargetOutOfRange {
            target: r1_target,
            max,
        });
    }
    let t = r1_target.exp2() - 1.0;
    let n = n_grid.max(16);
    let mut best: Option<(f64, f64, f64)> = None;
    for j in 0..n {
        let p2 = budget.p2 * j as f64 / (n - 1) as f64;
        let p1 = if g.g11 > 0.0 {
            t * (1.0 + g.g12 * p2) / g.g11
        } else if t == 0.0 {
            0.0
        } else {
            continue;
        };
        if p1 > budget.p1 * (1.0 + 1e-12) {
            continue;
        }
        let r = noncoop_rates(g, p1, p2);
        if best.is_none_or(|(r2, _, _)| r.r2 > r2) {
            best = Some((r.r2, p1, p2));
        }
    }
    let (_, p1, p2) = best.ok_or_else(|| BaselineError::InvalidParameter(
        "no feasible non-cooperative power meets the rate target".into(),
    ))?;
    let rates = noncoop_rates(g, p1, p2);
    Ok(NoncoopResult {
        rates,
        p1_use: p1,
        p2_use: p2,
        weighted: rates.r1 + rates.r2,
    })
}

/// Wideband joint power control without message sharing, with full
/// cross-carrier power reallocation: the dual solver restricted to the
/// non-cooperative per-carrier rate. A stronger reference than
/// [`noncoop_binary_wideband`]; it can silence carriers and water-fill.
pub fn noncoop_wideband(
    ch: &WidebandChannel,
    budgets: &PowerBudget,
    mu: f64,
    eps_lambda: f64,
    cfg: &SearchCfg,
) -> Result<WidebandAllocation, WidebandError> {
    dual_solve_masked(ch, budgets, mu, eps_lambda, cfg, &[SchemeTag::NonCoop])
}

/// Binary per-carrier power control without message sharing: each BTS is
/// on or off per sub-carrier at the fixed level `Ptot_k / L`, the on/off
/// pattern chosen per carrier; unused power is not reallocated. This is
/// the classic sum-rate reference for interfering links and the
/// non-cooperative comparison curve for the wideband figures.
pub fn noncoop_binary_wideband(
    ch: &WidebandChannel,
    budgets: &PowerBudget,
    mu: f64,
) -> Result<WidebandAllocation, WidebandError> {
    let gains = ch.scalar_entries()?;
    let l = gains.len();
    let (lvl1, lvl2) = (budgets.p1 / l as f64, budgets.p2 / l as f64);
    let mut p1 = Vec::with_capacity(l);
    let mut p2 = Vec::with_capacity(l);
    let mut total = 0.0;
    for g in gains {
        let mut best = (f64::NEG_INFINITY, 0.0, 0.0);
        for (a, b) in [(lvl1, lvl2), (lvl1, 0.0), (0.0, lvl2), (0.0, 0.0)] {
            let v = rate_options(g, a, b, mu).rnc;
            if v > best.0 {
                best = (v, a, b);
            }
        }
        total += best.0;
        p1.push(best.1);
        p2.push(best.2);
    }
    Ok(WidebandAllocation {
        p1,
        p2,
        schemes: vec![SchemeTag::NonCoop; l],
        weighted_sum_rate: total,
        lambda: (0.0, 0.0),
        duality_gap: f64::NAN,
        trace: Vec::new(),
    })
}

/// Cooperation with the budget spread evenly over sub-carriers; each
/// carrier still picks its best scheme.
pub fn equal_power_coop(
    ch: &WidebandChannel,
    budgets: &PowerBudget,
    mu: f64,
) -> Result<WidebandAllocation, WidebandError> {
    let gains = ch.scalar_entries()?;
    let l = gains.len();
    let p1 = budgets.p1 / l as f64;
    let p2 = budgets.p2 / l as f64;
    let mut schemes = Vec::with_capacity(l);
    let mut total = 0.0;
    for g in gains {
        let (v, tag) = subcarrier_best_rate(g, p1, p2, mu);
        schemes.push(tag);
        total += v;
    }
    Ok(WidebandAllocation {
        p1: vec![p1; l],
        p2: vec![p2; l],
        schemes,
        weighted_sum_rate: total,
        lambda: (0.0, 0.0),
        duality_gap: f64::NAN, // no dual certificate for a fixed allocation
        trace: Vec::new(),
    })
}

/// Narrowband joint beamforming without message sharing: each BTS serves
/// only its own mobile; two angles and two powers, grid plus refinement.
pub fn noncoop_joint_beamforming(
    ch: &MisoChannel,
    budget: &PowerBudget,
    mu: f64,
    cfg: &BfSearchCfg,
) -> Result<NoncoopResult, BaselineError> {
    if ch.nt() < 2 {
        return Err(BaselineError::InvalidParameter(
            "beamforming needs Nt >= 2".into(),
        ));
    }
    let g = ch.scalar_gains();
    let (a1, a2) = (ch.alpha1(), ch.alpha2());
    let rates = |b11: f64, b22: f64, p1: f64, p2: f64| -> RatePair {
        let s1 = g.g11 * (b11 - a1).cos().powi(2) * p1;
        let i1 = g.g12 * b22.cos().powi(2) * p2;
        let s2 = g.g22 * (b22 - a2).cos().powi(2) * p2;
        let i2 = g.g21 * b11.cos().powi(2) * p1;
        RatePair {
            r1: (1.0 + s1 / (1.0 + i1)).log2(),
            r2: (1.0 + s2 / (1.0 + i2)).log2(),
        }
    };
    let value = |x: [f64; 4]| rates(x[0], x[1], x[2], x[3]).weighted(mu);

    let n = cfg.grid.max(9);
    let mut best = (f64::NEG_INFINITY, [0.0; 4]);
    for i in 0..n {
        let b11 = FRAC_PI_2 * i as f64 / (n - 1) as f64;
        for j in 0..n {
            let b22 = FRAC_PI_2 * j as f64 / (n - 1) as f64;
            for k in 0..n {
                let p1 = budget.p1 * k as f64 / (n - 1) as f64;
                for m in 0..n {
                    let p2 = budget.p2 * m as f64 / (n - 1) as f64;
                    let v = value([b11, b22, p1, p2]);
                    if v > best.0 {
                        best = (v, [b11, b22, p1, p2]);
                    }
                }
            }
        }
    }
    let (mut v, mut x) = best;
    let caps = [FRAC_PI_2, FRAC_PI_2, budget.p1, budget.p2];
    let mut steps: Vec<f64> = caps.iter().map(|c| c / (n - 1) as f64).collect();
    for _ in 0..4 {
        for d in 0..4 {
            for sign in [1.0, -1.0] {
                for scale in [1.0, 0.5, 0.25] {
                    let mut y = x;
                    y[d] = (y[d] + sign * steps[d] * scale).clamp(0.0, caps[d]);
                    let w = value(y);
                    if w > v {
                        v = w;
                        x = y;
                    }
                }
            }
        }
        for s in steps.iter_mut() {
            *s *= 0.25;
        }
    }
    Ok(NoncoopResult {
        rates: rates(x[0], x[1], x[2], x[3]),
        p1_use: x[2],
        p2_use: x[3],
        weighted: v,
    })
}

/// Per-BTS zero-forcing point: each BTS beams to its own mobile in the
/// null space of the cross channel at full power.
pub fn zf_rate_pair(ch: &MisoChannel, budget: &PowerBudget) -> Result<RatePair, BaselineError> {
    if ch.nt() < 2 {
        return Err(BaselineError::InvalidParameter(
            "zero-forcing needs Nt >= 2".into(),
        ));
    }
    let g = ch.scalar_gains();
    let (a1, a2) = (ch.alpha1(), ch.alpha2());
    Ok(RatePair {
        r1: (1.0 + g.g11 * a1.sin().powi(2) * budget.p1).log2(),
        r2: (1.0 + g.g22 * a2.sin().powi(2) * budget.p2).log2(),
    })
}

/// Wideband null-space transmission: each BTS zero-forces toward its own
/// mobile on every sub-carrier and water-fills its own budget over the
/// effective gains `g_kk(l) sin^2(alpha_k(l))`.
pub fn noncoop_nullspace_waterfill(
    ch: &WidebandChannel,
    budgets: &PowerBudget,
    mu: f64,
) -> Result<BaselineBfAllocation, BaselineError> {
    let entries = ch.miso_entries()?;
    let l = entries.len();
    let eff1: Vec<f64> = entries
        .iter()
        .map(|m| m.scalar_gains().g11 * m.alpha1().sin().powi(2))
        .collect();
    let eff2: Vec<f64> = entries
        .iter()
        .map(|m| m.scalar_gains().g22 * m.alpha2().sin().powi(2))
        .collect();
    let y1: Vec<f64> = eff1.iter().map(|&g| 1.0 / g).collect();
    let y2: Vec<f64> = eff2.iter().map(|&g| 1.0 / g).collect();
    let w1 = waterfill_level(&y1, budgets.p1);
    let w2 = waterfill_level(&y2, budgets.p2);
    let mut configs = Vec::with_capacity(l);
    let mut total = 0.0;
    for i in 0..l {
        let p11 = if y1[i].is_finite() { (w1 - y1[i]).max(0.0) } else { 0.0 };
        let p22 = if y2[i].is_finite() { (w2 - y2[i]).max(0.0) } else { 0.0 };
        total += (1.0 + eff1[i] * p11).log2() + mu * (1.0 + eff2[i] * p22).log2();
        configs.push(BeamConfig {
            beta11: FRAC_PI_2,
            beta21: FRAC_PI_2,
            beta12: FRAC_PI_2,
            beta22: FRAC_PI_2,
            p11,
            p21: 0.0,
            p12: 0.0,
            p22,
            alpha1: entries[i].alpha1(),
            alpha2: entries[i].alpha2(),
        });
    }
    Ok(BaselineBfAllocation {
        configs,
        weighted_sum_rate: total,
    })
}

/// Null-space transmission with uniform per-carrier power instead of
/// water-filling, matching a reference that adapts beams but not the
/// power spectrum.
pub fn noncoop_nullspace_equal_power(
    ch: &WidebandChannel,
    budgets: &PowerBudget,
    mu: f64,
) -> Result<BaselineBfAllocation, BaselineError> {
    let entries = ch.miso_entries()?;
    let l = entries.len();
    let (p1, p2) = (budgets.p1 / l as f64, budgets.p2 / l as f64);
    let mut configs = Vec::with_capacity(l);
    let mut total = 0.0;
    for m in entries {
        let g = m.scalar_gains();
        let (a1, a2) = (m.alpha1(), m.alpha2());
        total += (1.0 + g.g11 * a1.sin().powi(2) * p1).log2()
            + mu * (1.0 + g.g22 * a2.sin().powi(2) * p2).log2();
        configs.push(BeamConfig {
            beta11: FRAC_PI_2,
            beta21: FRAC_PI_2,
            beta12: FRAC_PI_2,
            beta22: FRAC_PI_2,
            p11: p1,
            p21: 0.0,
            p12: 0.0,
            p22: p2,
            alpha1: a1,
            alpha2: a2,
        });
    }
    Ok(BaselineBfAllocation {
        configs,
        weighted_sum_rate: total,
    })
}

/// Beamforming baseline allocation without dual diagnostics.
#[derive(Debug, Clone)]
pub struct BaselineBfAllocation {
    pub configs: Vec<BeamConfig>,
    pub weighted_sum_rate: f64,
}

// ---------------------------------------------------------------------------
// Approximate phase-aligned upper baseline
// ---------------------------------------------------------------------------

/// Per-sub-carrier stream options for the coherent baseline.
struct CoherentCarrier {
    /// Zero-forcing pair: effective gains for (mobile 1, mobile 2); `None`
    /// when the stacked channel is rank deficient.
    zf: Option<(f64, f64)>,
    /// Maximum-ratio single-mobile gains `||h_j||^2` over the stacked
    /// transmit dimensions.
    mrt: (f64, f64),
}

fn coherent_carriers(ch: &WidebandChannel) -> Result<Vec<CoherentCarrier>, BaselineError> {
    let stack = |a: &[Complex64], b: &[Complex64]| -> Vec<Complex64> {
        a.iter().chain(b.iter()).copied().collect()
    };
    let rows: Vec<(Vec<Complex64>, Vec<Complex64>)> = match &ch.entries {
        WidebandEntries::Scalar(v) => {
            // Scalar channels carry only power gains; the noncoherent rates
            // never see phases. A phase-aligned transmitter does, so attach
            // seed-derived uniform phases to keep the stacked channel
            // generic (zero phases would make the rows near-parallel).
            use rand::{Rng, SeedableRng};
            let phase = |link: u64, l: u64| -> Complex64 {
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(ch.meta.seed);
                rng.set_stream((1u64 << 63) | (link << 56) | l);
                Complex64::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU))
            };
            v.iter()
                .enumerate()
                .map(|(l, g)| {
                    let l = l as u64;
                    (
                        vec![
                            g.g11.sqrt() * phase(0, l),
                            g.g12.sqrt() * phase(2, l),
                        ],
                        vec![
                            g.g21.sqrt() * phase(1, l),
                            g.g22.sqrt() * phase(3, l),
                        ],
                    )
                })
                .collect()
        }
        WidebandEntries::Miso(v) => v
            .iter()
            .map(|m| (stack(&m.h11, &m.h12), stack(&m.h21, &m.h22)))
            .collect(),
    };
    Ok(rows
        .into_iter()
        .map(|(h1, h2)| {
            let g1: f64 = h1.iter().map(|c| c.norm_sqr()).sum();
            let g2: f64 = h2.iter().map(|c| c.norm_sqr()).sum();
            // ZF effective gains 1/[(H H^+)^-1]_jj for the 2-row stacked
            // channel: e_j = g_j (1 - |<h1, h2>|^2 / (g1 g2))
            let c = inner(&h1, &h2).norm_sqr();
            let det = g1 * g2 - c;
            let zf = if det > 1e-12 * g1 * g2 {
                Some((g1 * (1.0 - c / (g1 * g2)), g2 * (1.0 - c / (g1 * g2))))
            } else {
                None
            };
            CoherentCarrier { zf, mrt: (g1, g2) }
        })
        .collect())
}

/// Result of the approximate coherent baseline.
#[derive(Debug, Clone)]
pub struct CoherentResult {
    /// Weighted sum rate across sub-carriers.
    pub rate: f64,
    /// Label carried into reports: this is an approximate baseline, not
    /// the phase-aligned capacity.
    pub approximate: bool,
}

/// Phase-aligned upper baseline: both BTSs act as one transmitter with the
/// pooled budget `P1 + P2`. Each sub-carrier offers either the
/// zero-forcing stream pair or a single-mobile maximum-ratio stream; a
/// common water level spends the pooled budget across all selected
/// streams.
pub fn coherent_upper_baseline(
    ch: &WidebandChannel,
    budgets: &PowerBudget,
    mu: f64,
) -> Result<CoherentResult, BaselineError> {
    let carriers = coherent_carriers(ch)?;
    let total = budgets.p1 + budgets.p2;
    if total <= 0.0 {
        return Ok(CoherentResult {
            rate: 0.0,
            approximate: true,
        });
    }
    let weights = [1.0, mu];

    // Option value at water price lam: each carrier picks ZF-pair or
    // single-mobile MRT by Lagrangian value; bisect lam to meet the pooled
    // budget. Weighted streams use x = (w/(lam ln2) - 1/g)^+.
    let stream = |g: f64, w: f64, lam: f64| -> (f64, f64) {
        if g <= 0.0 || w <= 0.0 {
            return (0.0, 0.0);
        }
        let x = (w / (lam * LN2) - 1.0 / g).max(0.0);
        (x, w * (1.0 + g * x).log2() - lam * x)
    };
    let demand = |lam: f64| -> (f64, f64) {
        let mut power = 0.0;
        let mut rate = 0.0;
        for c in &carriers {
            let mut best = (0.0, 0.0); // (power, rate) of best option
            let mut best_val = 0.0;
            if let Some((e1, e2)) = c.zf {
                let (x1, v1) = stream(e1, weights[0], lam);
                let (x2, v2) = stream(e2, weights[1], lam);
                if v1 + v2 > best_val {
                    best_val = v1 + v2;
                    best = (
                        x1 + x2,
                        weights[0] * (1.0 + e1 * x1).log2() + weights[1] * (1.0 + e2 * x2).log2(),
                    );
                }
            }
            for (j, &w) in weights.iter().enumerate() {
                let g = if j == 0 { c.mrt.0 } else { c.mrt.1 };
                let (x, v) = stream(g, w, lam);
                if v > best_val {
                    best_val = v;
                    best = (x, w * (1.0 + g * x).log2());
                }
            }
            power += best.0;
            rate += best.1;
        }
        (power, rate)
    };

    let max_gain = carriers
        .iter()
        .map(|c| {
            let zf = c.zf.map(|(a, b)| a.max(b)).unwrap_or(0.0);
            zf.max(c.mrt.0).max(c.mrt.1)
        })
        .fold(0.0_f64, f64::max);
    let mut hi = (1.0 + mu.max(1.0)) * max_gain / LN2 + 1e-9;
    let mut lo = hi * 1e-12;
    while demand(lo).0 < total && lo > 1e-300 {
        lo *= 0.5;
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if demand(mid).0 > total {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // feasible side, then spend any tiny remainder by simple scaling of
    // the water price bracket being already tight
    let (_, rate) = demand(hi);
    Ok(CoherentResult {
        rate,
        approximate: true,
    })
}
