//! Narrowband (single-channel) rate region computation.
//!
//! With message sharing, BTS `k` spends `P_jk` on the codeword for mobile
//! `j`, each mobile decodes its own two streams and treats the other
//! mobile's streams as noise:
//!
//! ```text
//! R1 = log2(1 + (g11 P11 + g12 P12) / (1 + g11 P21 + g12 P22))
//! R2 = log2(1 + (g21 P21 + g22 P22) / (1 + g21 P11 + g22 P12))
//! ```
//!
//! The frontier point "maximize R2 subject to R1 = target" is a
//! linear-fractional program. Scaling every power by the reciprocal of the
//! R2 interference term (the Charnes-Cooper substitution, variable `Z`)
//! turns it into a 5-variable LP solved by [`crate::lp`]; dividing the LP
//! solution by `Z` recovers the powers.
//!
//! Weighted-sum-rate maximization needs no LP: the maximum of `R1 + mu R2`
//! is attained at one of four corner power allocations (both BTSs full power
//! to one mobile, swapped service, or non-cooperation), or, when `mu != 1`,
//! possibly at one of four one-free-variable stationary allocations whose
//! optimizing power solves a quadratic.

use crate::channel::{NarrowbandGains, PowerBudget};
use crate::lp::{solve_lp, LinearProgram, LpStatus, DEFAULT_LP_TOL};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NarrowbandError {
    #[error("rate target {target} outside the valid range [0, {max}]")]
    TargetOutOfRange { target: f64, max: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("internal: frontier LP reported {0}; in-range targets must be feasible")]
    FrontierLp(String),
    #[error(transparent)]
    Lp(#[from] crate::lp::LpError),
}

/// Per-message transmit powers; `p_jk` is what BTS `k` spends on mobile `j`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerAllocation {
    pub p11: f64,
    pub p21: f64,
    pub p12: f64,
    pub p22: f64,
}

impl PowerAllocation {
    pub const ZERO: Self = Self {
        p11: 0.0,
        p21: 0.0,
        p12: 0.0,
        p22: 0.0,
    };

    pub fn new(p11: f64, p21: f64, p12: f64, p22: f64) -> Self {
        Self { p11, p21, p12, p22 }
    }

    /// Per-BTS sums `(P11 + P21, P12 + P22)`.
    pub fn bts_sums(&self) -> (f64, f64) {
        (self.p11 + self.p21, self.p12 + self.p22)
    }

    pub fn within_budget(&self, budget: &PowerBudget, tol: f64) -> bool {
        let (s1, s2) = self.bts_sums();
        let nonneg = [self.p11, self.p21, self.p12, self.p22]
            .iter()
            .all(|&p| p >= -tol);
        nonneg && s1 <= budget.p1 + tol && s2 <= budget.p2 + tol
    }
}

/// Achieved rates in bits per channel use.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatePair {
    pub r1: f64,
    pub r2: f64,
}

impl RatePair {
    pub fn weighted(&self, mu: f64) -> f64 {
        self.r1 + mu * self.r2
    }
}

/// Which of the two optimal-allocation regimes a frontier point is in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    /// `(2^R1 - 1)(2^R2 - 1) <= 1`: both BTSs transmit at full power.
    FullPower,
    /// `(2^R1 - 1)(2^R2 - 1) > 1`: each BTS serves only one mobile.
    Exclusive,
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Regime::FullPower => write!(f, "full-power"),
            Regime::Exclusive => write!(f, "exclusive"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrontierPoint {
    pub rates: RatePair,
    pub alloc: PowerAllocation,
    pub regime: Regime,
}

/// Rates achieved by an allocation.
pub fn rate_pair(g: &NarrowbandGains, p: &PowerAllocation) -> RatePair {
    let s1 = g.g11 * p.p11 + g.g12 * p.p12;
    let i1 = g.g11 * p.p21 + g.g12 * p.p22;
    let s2 = g.g21 * p.p21 + g.g22 * p.p22;
    let i2 = g.g21 * p.p11 + g.g22 * p.p12;
    RatePair {
        r1: (1.0 + s1 / (1.0 + i1)).log2(),
        r2: (1.0 + s2 / (1.0 + i2)).log2(),
    }
}

/// Largest achievable `R1`: everything to mobile 1.
pub fn r1_max(g: &NarrowbandGains, budget: &PowerBudget) -> f64 {
    (1.0 + g.g11 * budget.p1 + g.g12 * budget.p2).log2()
}

/// Largest achievable `R2`: everything to mobile 2.
pub fn r2_max(g: &NarrowbandGains, budget: &PowerBudget) -> f64 {
    (1.0 + g.g21 * budget.p1 + g.g22 * budget.p2).log2()
}

/// Maximize `R2` subject to `R1 = r1_target` and the per-BTS budgets.
pub fn frontier_point(
    g: &NarrowbandGains,
    budget: &PowerBudget,
    r1_target: f64,
    tol: f64,
) -> Result<FrontierPoint, NarrowbandError> {
    let max = r1_max(g, budget);
    let grace = 1e-12 * (1.0 + max);
    if !r1_target.is_finite() || r1_target < -grace || r1_target > max + grace {
        return Err(NarrowbandError::TargetOutOfRange {
            target: r1_target,
            max,
        });
    }
    let target = r1_target.clamp(0.0, max);
    let t = target.exp2() - 1.0; // R1 equality in SINR form

    // Variables [p~11, p~21, p~12, p~22, z]; powers are p~jk / z.
    let lp = LinearProgram {
        objective: vec![0.0, g.g21, 0.0, g.g22, 0.0],
        a_eq: vec![
            vec![g.g11, -t * g.g11, g.g12, -t * g.g12, -t],
            vec![g.g21, 0.0, g.g22, 0.0, 1.0],
        ],
        b_eq: vec![0.0, 1.0],
        a_ub: vec![
            vec![1.0, 1.0, 0.0, 0.0, -budget.p1],
            vec![0.0, 0.0, 1.0, 1.0, -budget.p2],
        ],
        b_ub: vec![0.0, 0.0],
    };
    let sol = solve_lp(&lp, tol)?;
    if sol.status != LpStatus::Optimal {
        return Err(NarrowbandError::FrontierLp(format!("{:?}", sol.status)));
    }
    let z = sol.x[4];
    if z <= 1e-12 {
        return Err(NarrowbandError::FrontierLp(format!(
            "scaling variable Z = {z} is not positive"
        )));
    }
    let alloc = PowerAllocation {
        p11: (sol.x[0] / z).max(0.0),
        p21: (sol.x[1] / z).max(0.0),
        p12: (sol.x[2] / z).max(0.0),
        p22: (sol.x[3] / z).max(0.0),
    };
    let rates = rate_pair(g, &alloc);
    let product = (rates.r1.exp2() - 1.0) * (rates.r2.exp2() - 1.0);
    Ok(FrontierPoint {
        rates,
        alloc,
        regime: if product <= 1.0 {
            Regime::FullPower
        } else {
            Regime::Exclusive
        },
    })
}

/// Sweep `n_points` uniformly spaced `R1` targets over the valid range.
pub fn frontier(
    g: &NarrowbandGains,
    budget: &PowerBudget,
    n_points: usize,
) -> Result<Vec<FrontierPoint>, NarrowbandError> {
    if n_points < 2 {
        return Err(NarrowbandError::InvalidParameter(format!(
            "frontier needs at least 2 points, got {n_points}"
        )));
    }
    let max = r1_max(g, budget);
    (0..n_points)
        .map(|i| {
            let target = max * i as f64 / (n_points - 1) as f64;
            frontier_point(g, budget, target, DEFAULT_LP_TOL)
        })
        .collect()
}

#[derive(Debug, Clone, Copy)]
pub struct StructureReport {
    pub regime: Regime,
    pub satisfied: bool,
    /// `(2^R1 - 1)(2^R2 - 1)`, the quantity that selects the regime.
    pub product: f64,
}

/// Check the frontier optimality structure: full power at both BTSs when
/// `(2^R1-1)(2^R2-1) <= 1`, one message per BTS otherwise.
pub fn frontier_structure_check(
    g: &NarrowbandGains,
    budget: &PowerBudget,
    p: &PowerAllocation,
    tol: f64,
) -> StructureReport {
    let rates = rate_pair(g, p);
    let product = (rates.r1.exp2() - 1.0) * (rates.r2.exp2() - 1.0);
    let (s1, s2) = p.bts_sums();
    if product <= 1.0 {
        StructureReport {
            regime: Regime::FullPower,
            satisfied: (s1 - budget.p1).abs() <= tol && (s2 - budget.p2).abs() <= tol,
            product,
        }
    } else {
        StructureReport {
            regime: Regime::Exclusive,
            satisfied: p.p11 * p.p21 <= tol && p.p12 * p.p22 <= tol,
            product,
        }
    }
}

/// Identity of a weighted-sum-rate candidate. The four corners always
/// compete; the stationary families only for `mu != 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WsrCandidate {
    /// Both BTSs full power to mobile 1: `(P1, 0, P2, 0)`.
    CoopToMobile1,
    /// Both BTSs full power to mobile 2: `(0, P1, 0, P2)`.
    CoopToMobile2,
    /// Swapped service, shared messages only: `(0, P1, P2, 0)`.
    CrossAssignment,
    /// Each BTS its own mobile, full power: `(P1, 0, 0, P2)`.
    NonCooperative,
    /// `(P11*, 0, 0, P2)` with `P11*` from the stationarity quadratic.
    StationaryP11,
    /// `(0, P1, P12*, 0)`.
    StationaryP12,
    /// `(P1, 0, 0, P22*)`.
    StationaryP22,
    /// `(0, P21*, P2, 0)`.
    StationaryP21,
}

impl WsrCandidate {
    pub fn is_corner(&self) -> bool {
        matches!(
            self,
            WsrCandidate::CoopToMobile1
                | WsrCandidate::CoopToMobile2
                | WsrCandidate::CrossAssignment
                | WsrCandidate::NonCooperative
        )
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct WsrSolution {
    pub rate: f64,
    pub rates: RatePair,
    pub alloc: PowerAllocation,
    pub candidate: WsrCandidate,
}

/// Smaller real root of `a x^2 + b x + c = 0`, if any.
fn smaller_root(a: f64, b: f64, c: f64) -> Option<f64> {
    if a.abs() < 1e-300 {
        return None;
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return None;
    }
    Some((-b - disc.sqrt()) / (2.0 * a))
}

/// Stationary power for the one-free-variable exclusive families.
///
/// The free power `x` serves mobile A with gain `a` against fixed
/// interference `b * q`; the other BTS spends full power `q` on mobile B
/// with gain `d`, suffering interference `c * x`; mobile B's rate is
/// weighted by `w`. The maximizer of
/// `log2(1 + a x / (1 + b q)) + w log2(1 + d q / (1 + c x))`
/// solves `A x^2 + B x + C = 0` with the coefficients below; the smaller
/// root is the candidate.
fn stationary_power(a: f64, b: f64, c: f64, d: f64, q: f64, w: f64, cap: f64) -> Option<f64> {
    if a <= 0.0 || c <= 0.0 {
        return None; // no interior stationary point without interference coupling
    }
    let qa = a * c * c;
    let qb = a * c * (2.0 + (1.0 - w) * d * q);
    let qc = a * (1.0 + d * q) - w * c * d * q * (1.0 + b * q);
    let x = smaller_root(qa, qb, qc)?;
    (x > 0.0 && x < cap).then_some(x)
}

/// Maximize `R1 + mu R2` over the candidate set.
pub fn max_weighted_sum_rate(g: &NarrowbandGains, budget: &PowerBudget, mu: f64) -> WsrSolution {
    let (p1, p2) = (budget.p1, budget.p2);
    let mut candidates: Vec<(WsrCandidate, PowerAllocation)> = vec![
        (
            WsrCandidate::CoopToMobile1,
            PowerAllocation::new(p1, 0.0, p2, 0.0),
        ),
        (
            WsrCandidate::CoopToMobile2,
            PowerAllocation::new(0.0, p1, 0.0, p2),
        ),
        (
            WsrCandidate::CrossAssignment,
            PowerAllocation::new(0.0, p1, p2, 0.0),
        ),
        (
            WsrCandidate::NonCooperative,
            PowerAllocation::new(p1, 0.0, 0.0, p2),
        ),
    ];
    if mu != 1.0 {
        if let Some(x) = stationary_power(g.g11, g.g12, g.g21, g.g22, p2, mu, p1) {
            candidates.push((
                WsrCandidate::StationaryP11,
                PowerAllocation::new(x, 0.0, 0.0, p2),
            ));
        }
        if let Some(x) = stationary_power(g.g12, g.g11, g.g22, g.g21, p1, mu, p2) {
            candidates.push((
                WsrCandidate::StationaryP12,
                PowerAllocation::new(0.0, p1, x, 0.0),
            ));
        }
        // Mirrored families: mobile 2's stream is the free variable, so the
        // same quadratic applies with the user roles swapped and weight 1/mu.
        if mu > 0.0 {
            if let Some(x) = stationary_power(g.g22, g.g21, g.g12, g.g11, p1, 1.0 / mu, p2) {
                candidates.push((
                    WsrCandidate::StationaryP22,
                    PowerAllocation::new(p1, 0.0, 0.0, x),
                ));
            }
            if let Some(x) = stationary_power(g.g21, g.g22, g.g11, g.g12, p2, 1.0 / mu, p1) {
                candidates.push((
                    WsrCandidate::StationaryP21,
                    PowerAllocation::new(0.0, x, p2, 0.0),
                ));
            }
        }
    }

    let mut best: Option<WsrSolution> = None;
    for (candidate, alloc) in candidates {
        let rates = rate_pair(g, &alloc);
        let rate = rates.weighted(mu);
        // strictly-greater keeps the lowest candidate id on ties
        if best.as_ref().is_none_or(|b| rate > b.rate) {
            best = Some(WsrSolution {
                rate,
                rates,
                alloc,
                candidate,
            });
        }
    }
    best.expect("corner candidates always present")
}
