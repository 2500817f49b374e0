//! Weighted-sum-rate maximization by candidate enumeration: the four
//! corner allocations always compete; for `mu != 1` the four exclusive
//! stationary families add their quadratic-root candidates.
//!
//! ```bash
//! cargo run --release --example weighted_sum_rate
//! ```

use twocell::channel::{NarrowbandGains, PowerBudget};
use twocell::narrowband::{max_weighted_sum_rate, rate_pair, PowerAllocation};
use twocell::oracle::grid_sum_rate;

fn main() {
    let g = NarrowbandGains::new(1.0, 0.8, 0.8, 1.0).unwrap();
    let budget = PowerBudget::new(5.0, 5.0).unwrap();
    println!("gains {:?}, budgets ({}, {})", g.as_array(), budget.p1, budget.p2);
    println!(
        "{:>6} {:>10} {:>8} {:>8} {:>22} {:>10}",
        "mu", "R1+mu*R2", "R1", "R2", "winner", "vs lattice"
    );
    for mu in [0.0, 0.25, 0.5, 1.0, 2.0, 3.0, 6.0] {
        let s = max_weighted_sum_rate(&g, &budget, mu);
        let slow = grid_sum_rate(&g, &budget, mu, 60);
        println!(
            "{:>6.2} {:>10.4} {:>8.4} {:>8.4} {:>22} {:>+10.2e}",
            mu,
            s.rate,
            s.rates.r1,
            s.rates.r2,
            format!("{:?}", s.candidate),
            s.rate - slow.rate,
        );
        assert!(s.rate >= slow.rate - 1e-6);
    }

    // the four corners at mu = 1, spelled out
    println!("\ncorner values at mu = 1:");
    let corners = [
        ("both -> mobile 1", PowerAllocation::new(5.0, 0.0, 5.0, 0.0)),
        ("both -> mobile 2", PowerAllocation::new(0.0, 5.0, 0.0, 5.0)),
        ("swapped service", PowerAllocation::new(0.0, 5.0, 5.0, 0.0)),
        ("non-cooperative", PowerAllocation::new(5.0, 0.0, 0.0, 5.0)),
    ];
    for (name, alloc) in corners {
        let r = rate_pair(&g, &alloc);
        println!("  {name:<18} R1 {:>7.4}  R2 {:>7.4}  sum {:>7.4}", r.r1, r.r2, r.r1 + r.r2);
    }
}
