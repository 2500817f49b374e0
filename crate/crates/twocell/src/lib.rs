//! Noncoherent two-cell downlink cooperation toolkit.
//!
//! Two base stations (BTSs) jointly serve two mobiles on the same resource
//! block without carrier-phase alignment, so cooperative signals add in power
//! rather than amplitude. Each BTS transmits a superposition of two codewords
//! (one per mobile) and each mobile treats the signal intended for the other
//! mobile as noise. This crate computes what that scheme can achieve:
//!
//! - [`narrowband`]: single-channel rate pairs, the Pareto frontier of the
//!   rate region via a linear-fractional program reduced to a small LP, and
//!   weighted-sum-rate maximization over the corner/stationary candidates.
//! - [`wideband`]: power allocation across `L` parallel sub-carriers via
//!   Lagrangian dual decomposition with nested bisection, plus a high-SNR
//!   two-level water-filling approximation.
//! - [`beamforming`]: the multi-antenna (MISO) variants, parameterized by
//!   per-stream beamforming angles between maximum-ratio and zero-forcing.
//! - [`baselines`]: the non-cooperative and equal-power comparison schemes,
//!   and an approximate phase-aligned upper baseline.
//! - [`channel`]: seeded synthesis of correlated Rayleigh-fading channels.
//! - [`oracle`]: slow brute-force reference solvers used to validate the
//!   fast paths.
//! - [`lp`]: the self-contained dense simplex solver behind the frontier
//!   computation.
//! - [`experiment`]: a reproducible experiment driver (JSON config in,
//!   CSV/JSON results out) exposed through the `twocell` binary.
//!
//! Rates are in bits per channel use (base-2 logarithms) and noise power is
//! normalized to 1 throughout, so transmit powers are SNRs.
//!
//! See the `examples/` directory for one runnable example per capability:
//!
//! ```bash
//! cargo run --release --example narrowband_frontier
//! cargo run --release --example weighted_sum_rate
//! cargo run --release --example wideband_power_allocation
//! cargo run --release --example highsnr_waterfill
//! cargo run --release --example beamforming_region
//! cargo run --release --example wideband_beamforming
//! cargo run --release --example channel_synthesis
//! ```

pub mod baselines;
pub mod beamforming;
pub mod channel;
pub mod experiment;
pub mod lp;
pub mod narrowband;
pub mod oracle;
pub mod report;
pub mod wideband;

pub use channel::{MisoChannel, NarrowbandGains, PowerBudget, WidebandChannel};
pub use narrowband::{FrontierPoint, PowerAllocation, RatePair};
pub use wideband::WidebandAllocation;
