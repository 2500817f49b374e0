//! MISO (`Nt = 2`) narrowband rate region: cooperative beamforming with
//! message sharing against joint beamforming without sharing and the
//! per-BTS zero-forcing point.
//!
//! ```bash
//! cargo run --release --example beamforming_region
//! ```

use twocell::baselines::{noncoop_joint_beamforming, zf_rate_pair};
use twocell::beamforming::{frontier_bf, BfMethod, BfSearchCfg};
use twocell::channel::{generate_wideband_miso, PowerBudget};

fn main() {
    let ch = generate_wideband_miso(1, 2, [0.5; 4], 0.0, 11).unwrap();
    let m = &ch.miso_entries().unwrap()[0];
    let budget = PowerBudget::new(3.0, 3.0).unwrap();
    let g = m.scalar_gains();
    println!(
        "channel: Nt=2, gains {:?}, alignment angles ({:.3}, {:.3}) rad",
        g.as_array(),
        m.alpha1(),
        m.alpha2()
    );
    println!("budgets ({}, {})\n", budget.p1, budget.p2);

    let mu_list = [0.0, 0.2, 0.5, 1.0, 2.0, 5.0, 20.0];
    let cfg = BfSearchCfg::default();
    let coop = frontier_bf(m, &budget, &mu_list, BfMethod::Iterative, &cfg).unwrap();

    println!(
        "{:>6} {:>9} {:>9} {:>9} {:>9}",
        "mu", "coop R1", "coop R2", "nc R1", "nc R2"
    );
    for (mu, rates, _) in &coop {
        let nc = noncoop_joint_beamforming(m, &budget, *mu, &cfg).unwrap();
        println!(
            "{:>6.1} {:>9.4} {:>9.4} {:>9.4} {:>9.4}",
            mu, rates.r1, rates.r2, nc.rates.r1, nc.rates.r2
        );
        // supporting-line containment at every weight
        assert!(
            rates.r1 + mu * rates.r2 >= nc.rates.r1 + mu * nc.rates.r2 - 1e-6,
            "cooperation must dominate at mu = {mu}"
        );
    }

    let zf = zf_rate_pair(m, &budget).unwrap();
    println!("\nper-BTS zero-forcing point: R1 {:.4}, R2 {:.4}", zf.r1, zf.r2);

    // the mu = 1 cooperative maximizer's angles show the MRT/ZF trade-off
    let (_, _, cfg1) = coop.iter().find(|(mu, _, _)| *mu == 1.0).unwrap();
    println!(
        "mu=1 beams (rad): beta11 {:.3}, beta21 {:.3}, beta12 {:.3}, beta22 {:.3} (alpha = MRT, pi/2 = ZF)",
        cfg1.beta11, cfg1.beta21, cfg1.beta12, cfg1.beta22
    );
}
