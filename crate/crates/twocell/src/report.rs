//! CSV and JSON writers for solver results (RFC 4180, UTF-8, header row).

use crate::beamforming::BeamConfig;
use crate::channel::WidebandChannel;
use crate::narrowband::FrontierPoint;
use crate::wideband::WidebandAllocation;
use std::io;
use std::path::Path;

fn csv_writer(path: &Path) -> io::Result<csv::Writer<std::fs::File>> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::CRLF)
        .from_path(path)?)
}

fn num(v: f64) -> String {
    // shortest round-trip representation keeps reruns byte-identical
    format!("{v}")
}

/// Frontier points, one row per point, with a scheme-name column.
pub fn write_frontier_csv(
    path: &Path,
    rows: &[(String, FrontierPoint)],
) -> Result<(), csv::Error> {
    let mut w = csv_writer(path).map_err(csv::Error::from)?;
    w.write_record(["R1", "R2", "P11", "P21", "P12", "P22", "regime", "scheme"])?;
    for (scheme, p) in rows {
        w.write_record([
            num(p.rates.r1),
            num(p.rates.r2),
            num(p.alloc.p11),
            num(p.alloc.p21),
            num(p.alloc.p12),
            num(p.alloc.p22),
            p.regime.to_string(),
            scheme.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Weighted-sum-rate maximizer results, one row per entry, in the same
/// column layout as the frontier CSV plus the winning candidate.
pub fn write_wsr_csv(
    path: &Path,
    rows: &[(String, crate::narrowband::WsrSolution)],
) -> Result<(), csv::Error> {
    let mut w = csv_writer(path).map_err(csv::Error::from)?;
    w.write_record([
        "R1", "R2", "P11", "P21", "P12", "P22", "regime", "scheme", "candidate",
    ])?;
    for (scheme, s) in rows {
        let product = (s.rates.r1.exp2() - 1.0) * (s.rates.r2.exp2() - 1.0);
        let regime = if product <= 1.0 {
            "full-power"
        } else {
            "exclusive"
        };
        w.write_record([
            num(s.rates.r1),
            num(s.rates.r2),
            num(s.alloc.p11),
            num(s.alloc.p21),
            num(s.alloc.p12),
            num(s.alloc.p22),
            regime.to_string(),
            scheme.clone(),
            format!("{:?}", s.candidate),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Wideband allocation, one row per sub-carrier.
pub fn write_allocation_csv(
    path: &Path,
    ch: &WidebandChannel,
    alloc: &WidebandAllocation,
    mu: f64,
) -> Result<(), csv::Error> {
    let gains = ch
        .scalar_entries()
        .expect("allocation CSV needs a scalar-mode channel");
    let contributions = alloc.rate_contributions(ch, mu);
    let mut w = csv_writer(path).map_err(csv::Error::from)?;
    w.write_record([
        "l",
        "g11",
        "g21",
        "g12",
        "g22",
        "P1",
        "P2",
        "scheme",
        "rate_contribution",
    ])?;
    for (l, g) in gains.iter().enumerate() {
        w.write_record([
            l.to_string(),
            num(g.g11),
            num(g.g21),
            num(g.g12),
            num(g.g22),
            num(alloc.p1[l]),
            num(alloc.p2[l]),
            alloc.schemes[l].to_string(),
            num(contributions[l]),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Per-sub-carrier beamforming configs (angles in radians).
pub fn write_bf_allocation_csv(path: &Path, configs: &[BeamConfig]) -> Result<(), csv::Error> {
    let mut w = csv_writer(path).map_err(csv::Error::from)?;
    w.write_record([
        "l", "alpha1", "alpha2", "beta11", "beta21", "beta12", "beta22", "P11", "P21", "P12",
        "P22",
    ])?;
    for (l, c) in configs.iter().enumerate() {
        w.write_record([
            l.to_string(),
            num(c.alpha1),
            num(c.alpha2),
            num(c.beta11),
            num(c.beta21),
            num(c.beta12),
            num(c.beta22),
            num(c.p11),
            num(c.p21),
            num(c.p12),
            num(c.p22),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Serialize any result value as pretty JSON next to its CSV.
pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> io::Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    std::fs::write(path, serde_json::to_string_pretty(value)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{generate_wideband_scalar, NarrowbandGains, PowerBudget};
    use crate::narrowband::frontier;
    use crate::wideband::{dual_solve, SearchCfg, DEFAULT_EPS_LAMBDA};

    #[test]
    fn frontier_csv_round_trips_by_eye() {
        let g = NarrowbandGains::new(1.0, 0.3, 0.3, 1.0).unwrap();
        let b = PowerBudget::new(5.0, 5.0).unwrap();
        let pts = frontier(&g, &b, 5).unwrap();
        let rows: Vec<(String, _)> = pts
            .into_iter()
            .map(|p| ("cooperative".to_string(), p))
            .collect();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("frontier.csv");
        write_frontier_csv(&path, &rows).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("R1,R2,P11,P21,P12,P22,regime,scheme\r\n"));
        assert_eq!(text.lines().count(), 6);
    }

    #[test]
    fn allocation_csv_has_one_row_per_subcarrier() {
        let ch = generate_wideband_scalar(6, [1.0; 4], 0.5, 3).unwrap();
        let b = PowerBudget::new(4.0, 4.0).unwrap();
        let cfg = SearchCfg::for_problem(&ch, &b);
        let a = dual_solve(&ch, &b, 1.0, DEFAULT_EPS_LAMBDA, &cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("alloc.csv");
        write_allocation_csv(&path, &ch, &a, 1.0).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 7);
        assert!(text.contains("rate_contribution"));
    }
}
