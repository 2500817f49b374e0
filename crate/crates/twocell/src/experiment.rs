//! Reproducible experiment driver.
//!
//! A JSON config selects an experiment kind, a channel model, a scheme
//! list, and a sweep; the runner executes the Monte Carlo trials (in
//! parallel, aggregated in trial order so output bytes never depend on the
//! worker count) and writes one long-format CSV plus one JSON summary.
//!
//! Trial `t` uses seed `base_seed + t * 0x9E3779B97F4A7C15` (wrapping);
//! the per-trial seed is logged in every CSV row, so any value can be
//! reproduced by calling the corresponding library function directly.

use crate::baselines;
use crate::beamforming::{self, BfMethod, BfSearchCfg};
use crate::channel::{
    generate_wideband_miso, generate_wideband_scalar, NarrowbandGains, PowerBudget,
    WidebandChannel,
};
use crate::narrowband;
use crate::wideband::{self, SearchCfg};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};
use thiserror::Error;

/// Environment variable naming the default output directory for relative
/// output paths.
pub const OUT_DIR_ENV: &str = "TWOCELL_OUT_DIR";

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("config parse error in {path}: {source}")]
    Parse {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("invalid config:\n{}", .0.join("\n"))]
    Invalid(Vec<String>),
    #[error("trial {trial} failed: {message}")]
    Trial { trial: usize, message: String },
    #[error("output error: {0}")]
    Output(#[from] std::io::Error),
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    /// Narrowband rate-region frontier (cooperative vs non-cooperative).
    Frontier,
    /// Narrowband weighted sum rate vs per-BTS SNR.
    SumrateSweep,
    /// Wideband sum rate vs per-BTS SNR across power-allocation schemes.
    WidebandSweep,
    /// MISO rate-region supporting points over a `mu` sweep.
    BeamformingFrontier,
    /// Wideband MISO sum rate vs per-BTS SNR.
    BeamformingWidebandSweep,
}

impl ExperimentKind {
    fn name(&self) -> &'static str {
        match self {
            ExperimentKind::Frontier => "frontier",
            ExperimentKind::SumrateSweep => "sumrate-sweep",
            ExperimentKind::WidebandSweep => "wideband-sweep",
            ExperimentKind::BeamformingFrontier => "beamforming-frontier",
            ExperimentKind::BeamformingWidebandSweep => "beamforming-wideband-sweep",
        }
    }

    fn known_schemes(&self) -> &'static [&'static str] {
        match self {
            ExperimentKind::Frontier | ExperimentKind::SumrateSweep => {
                &["cooperative", "noncoop-power-control"]
            }
            ExperimentKind::WidebandSweep => &[
                "coop-dual",
                "coop-waterfill",
                "coop-equal-power",
                "noncoop-power-control",
                "noncoop-joint-waterfill",
                "coherent-approx",
            ],
            ExperimentKind::BeamformingFrontier => {
                &["bf-cooperative", "bf-noncoop-joint", "bf-zero-forcing"]
            }
            ExperimentKind::BeamformingWidebandSweep => &[
                "bf-coop-dual",
                "bf-equal-power",
                "bf-nullspace-zf",
                "bf-nullspace-waterfill",
                "coherent-approx",
            ],
        }
    }

    fn needs_miso(&self) -> bool {
        matches!(
            self,
            ExperimentKind::BeamformingFrontier | ExperimentKind::BeamformingWidebandSweep
        )
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSpec {
    /// "scalar" or "miso".
    pub mode: String,
    #[serde(default = "default_l")]
    pub l: usize,
    #[serde(default)]
    pub nt: Option<usize>,
    #[serde(default = "default_means")]
    pub mean_gains: [f64; 4],
    #[serde(default)]
    pub rho: f64,
    #[serde(default)]
    pub seed: u64,
    /// Fixed narrowband gains; when set, narrowband experiments skip the
    /// random draw.
    #[serde(default)]
    pub gains: Option<[f64; 4]>,
}

fn default_l() -> usize {
    1
}

fn default_means() -> [f64; 4] {
    [1.0; 4]
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSpec {
    pub eps_lambda: f64,
    /// Log- and linear-grid points per axis of the inner power search.
    pub inner_grid: usize,
    pub refine_rounds: usize,
    /// Grid points per dimension for beamforming searches.
    pub bf_grid: usize,
    pub bf_line: usize,
    /// Grid for the narrowband non-cooperative power search.
    pub noncoop_grid: usize,
}

impl Default for SolverSpec {
    fn default() -> Self {
        SolverSpec {
            eps_lambda: wideband::DEFAULT_EPS_LAMBDA,
            inner_grid: 12,
            refine_rounds: 3,
            bf_grid: 13,
            bf_line: 31,
            noncoop_grid: 64,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub csv: String,
    pub json: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub channel: ChannelSpec,
    pub schemes: Vec<String>,
    #[serde(default = "default_mu")]
    pub mu: f64,
    /// Per-BTS power sweep in dB (`P = 10^(snr_db/10)`, noise power 1).
    #[serde(default)]
    pub snr_db: Vec<f64>,
    /// Per-BTS budgets for frontier experiments.
    #[serde(default)]
    pub budgets: Option<[f64; 2]>,
    /// Weight sweep for beamforming-frontier experiments.
    #[serde(default)]
    pub mu_list: Vec<f64>,
    /// Number of frontier targets.
    #[serde(default = "default_points")]
    pub r1_points: usize,
    #[serde(default = "default_trials")]
    pub n_trials: usize,
    /// Worker threads for trial parallelism (defaults to the rayon global
    /// pool); output is identical for any value.
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default)]
    pub solver: SolverSpec,
    pub output: OutputSpec,
}

fn default_mu() -> f64 {
    1.0
}

fn default_points() -> usize {
    101
}

fn default_trials() -> usize {
    20
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self, ExperimentError> {
        let text = std::fs::read_to_string(path).map_err(|source| ExperimentError::Io {
            path: path.display().to_string(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|source| ExperimentError::Parse {
            path: path.display().to_string(),
            source,
        })
    }

    /// Schema and semantic validation without execution; every message
    /// names the offending field.
    pub fn validate(&self) -> Result<(), ExperimentError> {
        let mut errs = Vec::new();
        let kind = self.experiment;
        match self.channel.mode.as_str() {
            "scalar" => {
                if kind.needs_miso() {
                    errs.push(format!(
                        "channel.mode: {} experiments need \"miso\"",
                        kind.name()
                    ));
                }
            }
            "miso" => {
                match self.channel.nt {
                    Some(nt) if nt >= 2 => {}
                    Some(nt) => errs.push(format!("channel.nt: Nt must be >= 2, got {nt}")),
                    None => errs.push("channel.nt: required for miso mode".into()),
                }
                if !kind.needs_miso() {
                    errs.push(format!(
                        "channel.mode: {} experiments need \"scalar\"",
                        kind.name()
                    ));
                }
            }
            other => errs.push(format!(
                "channel.mode: unknown mode {other:?}, expected \"scalar\" or \"miso\""
            )),
        }
        if !(0.0..1.0).contains(&self.channel.rho) {
            errs.push(format!(
                "channel.rho: {} outside the valid range [0, 1)",
                self.channel.rho
            ));
        }
        if self.channel.l < 1 {
            errs.push("channel.l: must be >= 1".into());
        }
        for (i, m) in self.channel.mean_gains.iter().enumerate() {
            if !m.is_finite() || *m < 0.0 {
                errs.push(format!("channel.mean_gains[{i}]: must be nonnegative, got {m}"));
            }
        }
        if self.schemes.is_empty() {
            errs.push("schemes: at least one scheme required".into());
        }
        for s in &self.schemes {
            if !kind.known_schemes().contains(&s.as_str()) {
                errs.push(format!(
                    "schemes: unknown scheme {s:?} for {}; known: {:?}",
                    kind.name(),
                    kind.known_schemes()
                ));
            }
        }
        if self.mu < 0.0 || !self.mu.is_finite() {
            errs.push(format!("mu: must be finite and nonnegative, got {}", self.mu));
        }
        if self.n_trials < 1 {
            errs.push("n_trials: must be >= 1".into());
        }
        match kind {
            ExperimentKind::Frontier => {
                if self.budgets.is_none() {
                    errs.push("budgets: required for frontier experiments".into());
                }
                if self.r1_points < 2 {
                    errs.push("r1_points: must be >= 2".into());
                }
            }
            ExperimentKind::BeamformingFrontier => {
                if self.budgets.is_none() {
                    errs.push("budgets: required for beamforming-frontier experiments".into());
                }
                if self.mu_list.is_empty() {
                    errs.push("mu_list: required for beamforming-frontier experiments".into());
                }
                if self.mu_list.iter().any(|m| *m < 0.0) {
                    errs.push("mu_list: weights must be nonnegative".into());
                }
            }
            ExperimentKind::SumrateSweep
            | ExperimentKind::WidebandSweep
            | ExperimentKind::BeamformingWidebandSweep => {
                if self.snr_db.is_empty() {
                    errs.push("snr_db: sweep experiments need at least one SNR point".into());
                }
            }
        }
        if let Some([p1, p2]) = self.budgets {
            if p1 < 0.0 || p2 < 0.0 {
                errs.push(format!("budgets: must be nonnegative, got [{p1}, {p2}]"));
            }
        }
        if self.output.csv.is_empty() || self.output.json.is_empty() {
            errs.push("output: csv and json paths must be nonempty".into());
        }
        if self.solver.eps_lambda <= 0.0 {
            errs.push("solver.eps_lambda: must be positive".into());
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(ExperimentError::Invalid(errs))
        }
    }

    fn search_cfg(&self, ch: &WidebandChannel, budgets: &PowerBudget) -> SearchCfg {
        let mut cfg = SearchCfg::for_problem(ch, budgets);
        cfg.n_log = self.solver.inner_grid;
        cfg.n_lin = self.solver.inner_grid;
        cfg.refine_rounds = self.solver.refine_rounds;
        cfg
    }

    fn bf_cfg(&self) -> BfSearchCfg {
        BfSearchCfg {
            grid: self.solver.bf_grid,
            line: self.solver.bf_line,
            refine_rounds: 2,
            tol: 1e-6,
        }
    }
}

/// One long-format result row.
#[derive(Debug, Clone, Serialize)]
pub struct Row {
    pub experiment: &'static str,
    pub scheme: String,
    pub snr_or_mu: f64,
    pub trial: usize,
    pub seed: u64,
    pub metric: &'static str,
    pub value: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SummaryEntry {
    pub scheme: String,
    pub snr_or_mu: f64,
    pub metric: &'static str,
    pub mean: f64,
    pub stderr: f64,
    pub n_trials: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub experiment: &'static str,
    pub config_hash: String,
    pub base_seed: u64,
    pub version: &'static str,
    pub n_trials: usize,
    pub results: Vec<SummaryEntry>,
}

/// Seed for trial `t`, derived from the base seed by a fixed stride.
pub fn trial_seed(base: u64, t: usize) -> u64 {
    base.wrapping_add((t as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn snr_to_power(snr_db: f64) -> f64 {
    10f64.powf(snr_db / 10.0)
}

fn narrowband_gains_for_trial(
    spec: &ChannelSpec,
    seed: u64,
) -> Result<NarrowbandGains, String> {
    match spec.gains {
        Some([g11, g21, g12, g22]) => {
            NarrowbandGains::new(g11, g21, g12, g22).map_err(|e| e.to_string())
        }
        None => {
            let ch = generate_wideband_scalar(1, spec.mean_gains, spec.rho, seed)
                .map_err(|e| e.to_string())?;
            Ok(ch.scalar_entries().unwrap()[0])
        }
    }
}

fn run_trial(config: &ExperimentConfig, trial: usize) -> Result<Vec<Row>, String> {
    let seed = trial_seed(config.channel.seed, trial);
    let kind = config.experiment;
    let name = kind.name();
    let mut rows = Vec::new();
    let mut push = |scheme: &str, x: f64, metric: &'static str, value: f64| {
        rows.push(Row {
            experiment: name,
            scheme: scheme.to_string(),
            snr_or_mu: x,
            trial,
            seed,
            metric,
            value,
        });
    };

    match kind {
        ExperimentKind::Frontier => {
            let g = narrowband_gains_for_trial(&config.channel, seed)?;
            let [p1, p2] = config.budgets.expect("validated");
            let budget = PowerBudget::new(p1, p2).map_err(|e| e.to_string())?;
            let max = narrowband::r1_max(&g, &budget);
            let targets: Vec<f64> = (0..config.r1_points)
                .map(|i| max * i as f64 / (config.r1_points - 1) as f64)
                .collect();
            for scheme in &config.schemes {
                match scheme.as_str() {
                    "cooperative" => {
                        for &t in &targets {
                            let pt = narrowband::frontier_point(&g, &budget, t, 1e-9)
                                .map_err(|e| e.to_string())?;
                            push(scheme, t, "r2", pt.rates.r2);
                            push(scheme, t, "p11", pt.alloc.p11);
                            push(scheme, t, "p21", pt.alloc.p21);
                            push(scheme, t, "p12", pt.alloc.p12);
                            push(scheme, t, "p22", pt.alloc.p22);
                            push(
                                scheme,
                                t,
                                "regime",
                                match pt.regime {
                                    narrowband::Regime::FullPower => 0.0,
                                    narrowband::Regime::Exclusive => 1.0,
                                },
                            );
                        }
                    }
                    "noncoop-power-control" => {
                        let nc_max = (1.0 + g.g11 * budget.p1).log2();
                        for &t in &targets {
                            // targets above the non-cooperative range are
                            // unreachable without message sharing
                            if t > nc_max {
                                continue;
                            }
                            let r = baselines::noncoop_power_control_frontier(
                                &g,
                                &budget,
                                t,
                                config.solver.noncoop_grid,
                            )
                            .map_err(|e| e.to_string())?;
                            push(scheme, t, "r2", r.rates.r2);
                            push(scheme, t, "p1_use", r.p1_use);
                            push(scheme, t, "p2_use", r.p2_use);
                        }
                    }
                    _ => unreachable!("validated scheme"),
                }
            }
        }
        ExperimentKind::SumrateSweep => {
            let g = narrowband_gains_for_trial(&config.channel, seed)?;
            for &snr in &config.snr_db {
                let p = snr_to_power(snr);
                let budget = PowerBudget::new(p, p).map_err(|e| e.to_string())?;
                for scheme in &config.schemes {
                    match scheme.as_str() {
                        "cooperative" => {
                            let s = narrowband::max_weighted_sum_rate(&g, &budget, config.mu);
                            push(scheme, snr, "weighted_sum_rate", s.rate);
                            push(scheme, snr, "r1", s.rates.r1);
                            push(scheme, snr, "r2", s.rates.r2);
                        }
                        "noncoop-power-control" => {
                            let s = baselines::noncoop_power_control_sumrate(
                                &g,
                                &budget,
                                config.mu,
                                config.solver.noncoop_grid,
                            );
                            push(scheme, snr, "weighted_sum_rate", s.weighted);
                            push(scheme, snr, "r1", s.rates.r1);
                            push(scheme, snr, "r2", s.rates.r2);
                        }
                        _ => unreachable!("validated scheme"),
                    }
                }
            }
        }
        ExperimentKind::WidebandSweep => {
            let spec = &config.channel;
            let ch = generate_wideband_scalar(spec.l, spec.mean_gains, spec.rho, seed)
                .map_err(|e| e.to_string())?;
            for &snr in &config.snr_db {
                let p = snr_to_power(snr);
                let budgets = PowerBudget::new(p, p).map_err(|e| e.to_string())?;
                let cfg = config.search_cfg(&ch, &budgets);
                for scheme in &config.schemes {
                    let mut emit = |rate: f64| {
                        push(scheme, snr, "sum_rate", rate);
                        push(scheme, snr, "sum_rate_per_subcarrier", rate / spec.l as f64);
                    };
                    match scheme.as_str() {
                        "coop-dual" => {
                            let a = wideband::dual_solve(
                                &ch,
                                &budgets,
                                config.mu,
                                config.solver.eps_lambda,
                                &cfg,
                            )
                            .map_err(|e| e.to_string())?;
                            emit(a.weighted_sum_rate);
                            push(scheme, snr, "duality_gap", a.duality_gap);
                        }
                        "coop-waterfill" => {
                            let r = wideband::highsnr_waterfill_mu(&ch, &budgets, config.mu)
                                .map_err(|e| e.to_string())?;
                            emit(r.true_objective);
                            push(scheme, snr, "relaxed_bound", r.relaxed_bound);
                        }
                        "coop-equal-power" => {
                            let a = baselines::equal_power_coop(&ch, &budgets, config.mu)
                                .map_err(|e| e.to_string())?;
                            emit(a.weighted_sum_rate);
                        }
                        "noncoop-power-control" => {
                            let a = baselines::noncoop_binary_wideband(&ch, &budgets, config.mu)
                                .map_err(|e| e.to_string())?;
                            emit(a.weighted_sum_rate);
                        }
                        "noncoop-joint-waterfill" => {
                            let a = baselines::noncoop_wideband(
                                &ch,
                                &budgets,
                                config.mu,
                                config.solver.eps_lambda,
                                &cfg,
                            )
                            .map_err(|e| e.to_string())?;
                            emit(a.weighted_sum_rate);
                        }
                        "coherent-approx" => {
                            let c = baselines::coherent_upper_baseline(&ch, &budgets, config.mu)
                                .map_err(|e| e.to_string())?;
                            emit(c.rate);
                        }
                        _ => unreachable!("validated scheme"),
                    }
                }
            }
        }
        ExperimentKind::BeamformingFrontier => {
            let spec = &config.channel;
            let nt = spec.nt.expect("validated");
            let ch = generate_wideband_miso(1, nt, spec.mean_gains, spec.rho, seed)
                .map_err(|e| e.to_string())?;
            let m = &ch.miso_entries().unwrap()[0];
            let [p1, p2] = config.budgets.expect("validated");
            let budget = PowerBudget::new(p1, p2).map_err(|e| e.to_string())?;
            let bf_cfg = config.bf_cfg();
            for scheme in &config.schemes {
                match scheme.as_str() {
                    "bf-cooperative" => {
                        let pts = beamforming::frontier_bf(
                            m,
                            &budget,
                            &config.mu_list,
                            BfMethod::Iterative,
                            &bf_cfg,
                        )
                        .map_err(|e| e.to_string())?;
                        for (mu, r, _) in pts {
                            push(scheme, mu, "r1", r.r1);
                            push(scheme, mu, "r2", r.r2);
                        }
                    }
                    "bf-noncoop-joint" => {
                        for &mu in &config.mu_list {
                            let r =
                                baselines::noncoop_joint_beamforming(m, &budget, mu, &bf_cfg)
                                    .map_err(|e| e.to_string())?;
                            push(scheme, mu, "r1", r.rates.r1);
                            push(scheme, mu, "r2", r.rates.r2);
                        }
                    }
                    "bf-zero-forcing" => {
                        let r = baselines::zf_rate_pair(m, &budget).map_err(|e| e.to_string())?;
                        for &mu in &config.mu_list {
                            push(scheme, mu, "r1", r.r1);
                            push(scheme, mu, "r2", r.r2);
                        }
                    }
                    _ => unreachable!("validated scheme"),
                }
            }
        }
        ExperimentKind::BeamformingWidebandSweep => {
            let spec = &config.channel;
            let nt = spec.nt.expect("validated");
            let ch = generate_wideband_miso(spec.l, nt, spec.mean_gains, spec.rho, seed)
                .map_err(|e| e.to_string())?;
            for &snr in &config.snr_db {
                let p = snr_to_power(snr);
                let budgets = PowerBudget::new(p, p).map_err(|e| e.to_string())?;
                for scheme in &config.schemes {
                    let mut emit = |rate: f64| {
                        push(scheme, snr, "sum_rate", rate);
                        push(scheme, snr, "sum_rate_per_subcarrier", rate / spec.l as f64);
                    };
                    match scheme.as_str() {
                        "bf-coop-dual" => {
                            let a = beamforming::wideband_bf_dual_solve(
                                &ch,
                                &budgets,
                                config.mu,
                                config.solver.eps_lambda,
                            )
                            .map_err(|e| e.to_string())?;
                            emit(a.weighted_sum_rate);
                            push(scheme, snr, "duality_gap", a.duality_gap);
                        }
                        "bf-equal-power" => {
                            // per-carrier weighted-sum-rate maximization at
                            // uniform per-carrier budgets
                            let l = spec.l as f64;
                            let per = PowerBudget::new(budgets.p1 / l, budgets.p2 / l)
                                .map_err(|e| e.to_string())?;
                            let bf_cfg = config.bf_cfg();
                            let mut total = 0.0;
                            for m in ch.miso_entries().unwrap() {
                                total += beamforming::max_weighted_sum_rate_bf(
                                    m,
                                    &per,
                                    config.mu,
                                    BfMethod::Iterative,
                                    &bf_cfg,
                                )
                                .map_err(|e| e.to_string())?
                                .rate;
                            }
                            emit(total);
                        }
                        "bf-nullspace-zf" => {
                            let a = baselines::noncoop_nullspace_equal_power(
                                &ch, &budgets, config.mu,
                            )
                            .map_err(|e| e.to_string())?;
                            emit(a.weighted_sum_rate);
                        }
                        "bf-nullspace-waterfill" => {
                            let a =
                                baselines::noncoop_nullspace_waterfill(&ch, &budgets, config.mu)
                                    .map_err(|e| e.to_string())?;
                            emit(a.weighted_sum_rate);
                        }
                        "coherent-approx" => {
                            let c = baselines::coherent_upper_baseline(&ch, &budgets, config.mu)
                                .map_err(|e| e.to_string())?;
                            emit(c.rate);
                        }
                        _ => unreachable!("validated scheme"),
                    }
                }
            }
        }
    }
    Ok(rows)
}

fn resolve(path: &str) -> PathBuf {
    let p = PathBuf::from(path);
    if p.is_relative() {
        if let Ok(dir) = std::env::var(OUT_DIR_ENV) {
            if !dir.is_empty() {
                return PathBuf::from(dir).join(p);
            }
        }
    }
    p
}

/// Execute a config: run all trials, write the CSV and the JSON summary,
/// and return the summary. On a trial failure the rows of the preceding
/// trials are still written before the error propagates.
pub fn run(config_path: &Path) -> Result<Summary, ExperimentError> {
    let config = ExperimentConfig::from_path(config_path)?;
    config.validate()?;
    let raw = std::fs::read(config_path).map_err(|source| ExperimentError::Io {
        path: config_path.display().to_string(),
        source,
    })?;
    let config_hash: String = Sha256::digest(&raw)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect();

    let run_all = || -> Vec<Result<Vec<Row>, String>> {
        use rayon::prelude::*;
        (0..config.n_trials)
            .into_par_iter()
            .map(|t| run_trial(&config, t))
            .collect()
    };
    let results: Vec<Result<Vec<Row>, String>> = match config.workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .expect("thread pool")
            .install(run_all),
        None => run_all(),
    };

    // aggregate in trial order regardless of completion order
    let mut rows: Vec<Row> = Vec::new();
    let mut failure: Option<(usize, String)> = None;
    for (t, r) in results.into_iter().enumerate() {
        match r {
            Ok(mut trial_rows) => rows.append(&mut trial_rows),
            Err(message) => {
                failure = Some((t, message));
                break;
            }
        }
    }

    let csv_path = resolve(&config.output.csv);
    write_rows_csv(&csv_path, &rows)?;
    let summary = summarize(&config, &config_hash, &rows);
    if failure.is_none() {
        crate::report::write_json(&resolve(&config.output.json), &summary)?;
    }
    if let Some((trial, message)) = failure {
        return Err(ExperimentError::Trial { trial, message });
    }
    Ok(summary)
}

fn write_rows_csv(path: &Path, rows: &[Row]) -> Result<(), ExperimentError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::CRLF)
        .from_path(path)?;
    w.write_record([
        "experiment",
        "scheme",
        "snr_or_mu",
        "trial",
        "seed",
        "metric",
        "value",
    ])?;
    for r in rows {
        w.write_record([
            r.experiment.to_string(),
            r.scheme.clone(),
            format!("{}", r.snr_or_mu),
            r.trial.to_string(),
            r.seed.to_string(),
            r.metric.to_string(),
            format!("{}", r.value),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn summarize(config: &ExperimentConfig, config_hash: &str, rows: &[Row]) -> Summary {
    // deterministic grouping: (scheme, x-bits, metric) in first-seen order
    let mut order: Vec<(String, u64, &'static str)> = Vec::new();
    let mut acc: std::collections::HashMap<(String, u64, &'static str), Vec<f64>> =
        std::collections::HashMap::new();
    for r in rows {
        let key = (r.scheme.clone(), r.snr_or_mu.to_bits(), r.metric);
        if !acc.contains_key(&key) {
            order.push(key.clone());
        }
        acc.entry(key).or_default().push(r.value);
    }
    let results = order
        .into_iter()
        .map(|key| {
            let values = &acc[&key];
            let n = values.len();
            let mean = values.iter().sum::<f64>() / n as f64;
            let var = if n > 1 {
                values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64
            } else {
                0.0
            };
            SummaryEntry {
                scheme: key.0,
                snr_or_mu: f64::from_bits(key.1),
                metric: key.2,
                mean,
                stderr: (var / n as f64).sqrt(),
                n_trials: n,
            }
        })
        .collect();
    Summary {
        experiment: config.experiment.name(),
        config_hash: config_hash.to_string(),
        base_seed: config.channel.seed,
        version: env!("CARGO_PKG_VERSION"),
        n_trials: config.n_trials,
        results,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_config(dir: &Path, name: &str, body: serde_json::Value) -> PathBuf {
        let path = dir.join(name);
        std::fs::write(&path, serde_json::to_string_pretty(&body).unwrap()).unwrap();
        path
    }

    fn frontier_config(dir: &Path) -> PathBuf {
        write_config(
            dir,
            "frontier.json",
            serde_json::json!({
                "experiment": "frontier",
                "channel": {"mode": "scalar", "gains": [1.0, 0.3, 0.3, 1.0], "seed": 7},
                "schemes": ["cooperative", "noncoop-power-control"],
                "budgets": [5.0, 5.0],
                "r1_points": 9,
                "n_trials": 1,
                "output": {
                    "csv": dir.join("frontier.csv").display().to_string(),
                    "json": dir.join("frontier.json.out").display().to_string()
                }
            }),
        )
    }

    #[test]
    fn validate_accepts_well_formed_config() {
        let dir = tempfile::tempdir().unwrap();
        let path = frontier_config(dir.path());
        let cfg = ExperimentConfig::from_path(&path).unwrap();
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn validate_rejects_unknown_scheme() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_config(
            dir.path(),
            "bad.json",
            serde_json::json!({
                "experiment": "frontier",
                "channel": {"mode": "scalar", "seed": 1},
                "schemes": ["magic"],
                "budgets": [1.0, 1.0],
                "output": {"csv": "a.csv", "json": "a.json"}
            }),
        );
        let cfg = ExperimentConfig::from_path(&path).unwrap();
        let err = cfg.validate().unwrap_err();
        assert!(err.to_string().contains("unknown scheme \"magic\""));
        assert!(err.to_string().contains("schemes:"));
    }

    #[test]
    fn validate_rejects_rho_out_of_range() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_config(
            dir.path(),
            "rho.json",
            serde_json::json!({
                "experiment": "wideband-sweep",
                "channel": {"mode": "scalar", "l": 8, "rho": 1.2, "seed": 1},
                "schemes": ["coop-dual"],
                "snr_db": [0.0],
                "output": {"csv": "a.csv", "json": "a.json"}
            }),
        );
        let cfg = ExperimentConfig::from_path(&path).unwrap();
        let err = cfg.validate().unwrap_err();
        assert!(err.to_string().contains("channel.rho"));
        assert!(err.to_string().contains("[0, 1)"));
    }

    #[test]
    fn frontier_run_produces_contained_noncoop_region() {
        let dir = tempfile::tempdir().unwrap();
        let path = frontier_config(dir.path());
        let summary = run(&path).unwrap();
        assert_eq!(summary.experiment, "frontier");
        // cooperative r2 must dominate non-cooperative r2 at every shared
        // target (feasibility inclusion)
        let text = std::fs::read_to_string(dir.path().join("frontier.csv")).unwrap();
        let mut coop = std::collections::HashMap::new();
        let mut noncoop = std::collections::HashMap::new();
        for line in text.lines().skip(1) {
            let f: Vec<&str> = line.split(',').collect();
            if f[5] == "r2" {
                let x = f[2].to_string();
                let v: f64 = f[6].parse().unwrap();
                if f[1] == "cooperative" {
                    coop.insert(x, v);
                } else {
                    noncoop.insert(x, v);
                }
            }
        }
        assert!(!noncoop.is_empty());
        for (x, nc) in &noncoop {
            let c = coop.get(x).expect("shared target");
            assert!(c >= &(nc - 1e-9), "coop {c} vs noncoop {nc} at target {x}");
        }
    }

    #[test]
    fn reruns_are_byte_identical_across_worker_counts() {
        let dir = tempfile::tempdir().unwrap();
        let mut outputs = Vec::new();
        for (i, workers) in [1usize, 2].iter().enumerate() {
            let path = write_config(
                dir.path(),
                &format!("sweep{i}.json"),
                serde_json::json!({
                    "experiment": "wideband-sweep",
                    "channel": {"mode": "scalar", "l": 8, "rho": 0.9, "seed": 11},
                    "schemes": ["coop-equal-power", "coop-waterfill"],
                    "snr_db": [0.0, 6.0],
                    "n_trials": 3,
                    "workers": workers,
                    "output": {
                        "csv": dir.path().join(format!("sweep{i}.csv")).display().to_string(),
                        "json": dir.path().join(format!("sweep{i}.json.out")).display().to_string()
                    }
                }),
            );
            run(&path).unwrap();
            outputs.push(std::fs::read(dir.path().join(format!("sweep{i}.csv"))).unwrap());
        }
        assert_eq!(outputs[0], outputs[1]);
    }

    #[test]
    fn rows_reproducible_from_logged_seed() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_config(
            dir.path(),
            "repro.json",
            serde_json::json!({
                "experiment": "wideband-sweep",
                "channel": {"mode": "scalar", "l": 6, "rho": 0.5, "seed": 3},
                "schemes": ["coop-equal-power"],
                "snr_db": [3.0],
                "n_trials": 2,
                "output": {
                    "csv": dir.path().join("repro.csv").display().to_string(),
                    "json": dir.path().join("repro.json.out").display().to_string()
                }
            }),
        );
        run(&path).unwrap();
        let text = std::fs::read_to_string(dir.path().join("repro.csv")).unwrap();
        for line in text.lines().skip(1) {
            let f: Vec<&str> = line.split(',').collect();
            if f[5] != "sum_rate" {
                continue;
            }
            let seed: u64 = f[4].parse().unwrap();
            let value: f64 = f[6].parse().unwrap();
            let ch = generate_wideband_scalar(6, [1.0; 4], 0.5, seed).unwrap();
            let budgets = PowerBudget::new(snr_to_power(3.0), snr_to_power(3.0)).unwrap();
            let direct = baselines::equal_power_coop(&ch, &budgets, 1.0).unwrap();
            assert_eq!(direct.weighted_sum_rate, value, "row not reproducible");
        }
    }

    #[test]
    fn trial_seed_is_stable() {
        assert_eq!(trial_seed(42, 0), 42);
        assert_ne!(trial_seed(42, 1), trial_seed(42, 2));
    }
}
