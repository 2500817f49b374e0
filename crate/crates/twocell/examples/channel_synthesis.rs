//! Seeded channel synthesis and the JSON document format.
//!
//! ```bash
//! cargo run --release --example channel_synthesis
//! ```

use twocell::channel::{generate_wideband_miso, generate_wideband_scalar, WidebandChannel};

fn main() {
    // scalar mode: four AR(1) Rayleigh-fading links across 16 sub-carriers
    let ch = generate_wideband_scalar(16, [1.0, 0.5, 0.5, 1.0], 0.95, 123).unwrap();
    let gains = ch.scalar_entries().unwrap();
    println!("scalar channel, L=16, rho=0.95, seed 123:");
    println!("{:>4} {:>8} {:>8} {:>8} {:>8}", "l", "g11", "g21", "g12", "g22");
    for (l, g) in gains.iter().enumerate().take(6) {
        println!(
            "{:>4} {:>8.4} {:>8.4} {:>8.4} {:>8.4}",
            l, g.g11, g.g21, g.g12, g.g22
        );
    }
    println!("   ... correlated across l; identical seeds reproduce identical channels\n");

    // MISO mode: per-antenna AR(1) sequences, E[g_jk] = Nt * mean
    let miso = generate_wideband_miso(4, 2, [0.5; 4], 0.9, 123).unwrap();
    let m = &miso.miso_entries().unwrap()[0];
    println!(
        "MISO channel, Nt=2: g11 {:.4}, alignment angles ({:.4}, {:.4}) rad",
        m.scalar_gains().g11,
        m.alpha1(),
        m.alpha2()
    );

    // JSON round trip
    let doc = miso.to_json().unwrap();
    let back = WidebandChannel::from_json(&doc).unwrap();
    assert_eq!(miso, back);
    let first_lines: Vec<&str> = doc.lines().take(12).collect();
    println!("\nJSON document head:\n{}", first_lines.join("\n"));
    println!("... round-trips losslessly ({} bytes total)", doc.len());
}
