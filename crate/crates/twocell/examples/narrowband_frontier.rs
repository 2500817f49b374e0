//! Narrowband rate-region frontiers: message-sharing cooperation vs joint
//! power control without sharing, for a direct-dominant channel and for
//! the swapped (cross-dominant) channel.
//!
//! ```bash
//! cargo run --release --example narrowband_frontier
//! ```
//!
//! Writes `frontier_direct.csv` and `frontier_swapped.csv` (columns
//! R1,R2,P11,P21,P12,P22,regime,scheme) into the current directory.

use std::path::Path;
use twocell::baselines::noncoop_power_control_frontier;
use twocell::channel::{NarrowbandGains, PowerBudget};
use twocell::narrowband::{frontier, r1_max};
use twocell::report::write_frontier_csv;

fn run_case(name: &str, g: NarrowbandGains, budget: &PowerBudget) {
    let points = frontier(&g, budget, 41).unwrap();
    let mut rows: Vec<(String, _)> = points
        .iter()
        .map(|p| ("cooperative".to_string(), *p))
        .collect();

    println!("{name}: gains {:?}, budgets ({}, {})", g.as_array(), budget.p1, budget.p2);
    println!("  {:>8} {:>8} {:>8} {:>10}", "R1", "coop R2", "nc R2", "regime");
    let nc_max = (1.0 + g.g11 * budget.p1).log2();
    for p in &points {
        let t = p.rates.r1;
        let nc = if t <= nc_max {
            noncoop_power_control_frontier(&g, budget, t, 128)
                .map(|r| r.rates.r2)
                .ok()
        } else {
            None
        };
        if let Some(nc_r2) = nc {
            assert!(
                p.rates.r2 >= nc_r2 - 1e-9,
                "cooperation must contain the non-cooperative region"
            );
        }
        if points.len() <= 41 && (t / r1_max(&g, budget) * 8.0).fract() < 0.2 {
            println!(
                "  {:>8.3} {:>8.3} {:>8} {:>10}",
                t,
                p.rates.r2,
                nc.map(|v| format!("{v:.3}")).unwrap_or_else(|| "-".into()),
                p.regime
            );
        }
    }

    // append the non-cooperative frontier rows for plotting
    for p in &points {
        if p.rates.r1 <= nc_max {
            if let Ok(r) = noncoop_power_control_frontier(&g, budget, p.rates.r1, 128) {
                rows.push((
                    "noncoop-power-control".to_string(),
                    twocell::narrowband::FrontierPoint {
                        rates: r.rates,
                        alloc: twocell::narrowband::PowerAllocation::new(
                            r.p1_use, 0.0, 0.0, r.p2_use,
                        ),
                        regime: twocell::narrowband::Regime::Exclusive,
                    },
                ));
            }
        }
    }
    let path = format!("frontier_{name}.csv");
    write_frontier_csv(Path::new(&path), &rows).unwrap();
    println!("  wrote {path}\n");
}

fn main() {
    let budget = PowerBudget::new(5.0, 5.0).unwrap();
    // direct links stronger than cross links
    run_case(
        "direct",
        NarrowbandGains::new(1.0, 0.3, 0.3, 1.0).unwrap(),
        &budget,
    );
    // swapped: cross links stronger; the cooperative region is unchanged
    // (relabeling which BTS carries which message), the non-cooperative
    // region shrinks sharply
    run_case(
        "swapped",
        NarrowbandGains::new(0.3, 1.0, 1.0, 0.3).unwrap(),
        &budget,
    );
}
