//! Acceptance checks over sweep output and the sensitivity table.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use crate::ambd::AmbdKind;
use crate::analysis::{
    binomial_sigma, db_to_linear, slope_per_decade, theory_ber_ncfsk, theory_rss_curve, CellKey, Metric,
    SensitivityReport,
};
use crate::bc_link::{link_budget_rss, BcGeometry, RfSourceConfig};
use crate::error::{Error, Result};

use super::config::RunConfig;
use super::record::{grid_from_records, MetricRecord};
use super::sweep::sweep_points;

/// Minimum bits behind every distance-trend point.
pub const MIN_TREND_BITS: u64 = 72_000;
pub const RSS_TOLERANCE_DB: f64 = 0.05;
pub const RSS_SLOPE: f64 = -20.0;
pub const RSS_SLOPE_TOLERANCE: f64 = 0.5;

/// Outcome of one acceptance check.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckLine {
    pub criterion: u8,
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckLine {
    pub fn new(criterion: u8, name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            criterion,
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

impl fmt::Display for CheckLine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "criterion {} {verdict} {}: {}", self.criterion, self.name, self.detail)
    }
}

/// First row of each cell.
fn by_key(records: &[MetricRecord]) -> BTreeMap<CellKey, &MetricRecord> {
    let mut m = BTreeMap::new();
    for r in records {
        m.entry(r.key()).or_insert(r);
    }
    m
}

/// A cell on both sweep lines is written twice; both rows must agree.
pub fn check_duplicates(records: &[MetricRecord]) -> CheckLine {
    let first = by_key(records);
    let conflicts: Vec<String> = records
        .iter()
        .filter(|r| format!("{:?}", first[&r.key()]) != format!("{r:?}"))
        .map(|r| format!("{} d_led={} d_rx={} p={}", r.bd_kind, r.d_led_bd, r.d_rx_bd, r.p_tx_dbm))
        .collect();
    let passed = conflicts.is_empty();
    let detail = if passed {
        format!("{} rows, {} cells", records.len(), first.len())
    } else {
        format!("conflicting rows for {}", conflicts.join("; "))
    };
    CheckLine::new(8, "repeated cells agree", passed, detail)
}

fn kinds_of(records: &[MetricRecord]) -> Vec<AmbdKind> {
    let mut k: Vec<AmbdKind> = records.iter().map(|r| r.bd_kind).collect();
    k.sort();
    k.dedup();
    k
}

/// Fails unless every sweep point of the kinds present has a row.
pub fn require_complete(records: &[MetricRecord], cfg: &RunConfig) -> Result<()> {
    let have = by_key(records);
    let cfg = RunConfig {
        kinds: kinds_of(records),
        ..cfg.clone()
    };
    if cfg.kinds.is_empty() {
        return Err(Error::IncompleteGrid("no rows".into()));
    }
    let missing: Vec<String> = sweep_points(&cfg)
        .iter()
        .filter(|p| !have.contains_key(&CellKey::new(p.kind, p.d_led_bd, p.d_rx_bd, p.p_tx_dbm)))
        .map(|p| format!("{} d_led={} d_rx={} p={}", p.kind, p.d_led_bd, p.d_rx_bd, p.p_tx_dbm))
        .collect();
    if missing.is_empty() {
        Ok(())
    } else {
        Err(Error::IncompleteGrid(format!("{} missing, first {}", missing.len(), missing[0])))
    }
}

fn line<'a>(
    have: &BTreeMap<CellKey, &'a MetricRecord>,
    kind: AmbdKind,
    cells: impl Iterator<Item = (f64, f64, f64)>,
) -> Vec<&'a MetricRecord> {
    cells
        .filter_map(|(l, r, p)| have.get(&CellKey::new(kind, l, r, p)).copied())
        .collect()
}

/// Distance trends. At the default powers, BER across the LED distances
/// stays within one decade; a cell with no errors counts as one error in
/// its bit count, the smallest resolvable rate. At every power, BER does
/// not fall with receiver distance beyond 3σ confidence-interval overlap.
pub fn check_distance_trends(records: &[MetricRecord], cfg: &RunConfig) -> CheckLine {
    let have = by_key(records);
    let a = &cfg.axes;
    let mut failures = Vec::new();
    let mut notes = Vec::new();
    let few: Vec<&MetricRecord> = records.iter().filter(|r| r.n_bits < MIN_TREND_BITS).collect();
    if let Some(r) = few.first() {
        failures.push(format!("{} rows under {MIN_TREND_BITS} bits (e.g. {} bits)", few.len(), r.n_bits));
    }
    for kind in kinds_of(records) {
        for &p in &a.p_tx_dbm {
            let led = line(&have, kind, a.d_led_bd.iter().map(|&d| (d, a.fixed_d_rx_bd, p)));
            let resolved: Vec<f64> = led.iter().map(|r| r.ber.max(1.0 / r.n_bits.max(1) as f64)).collect();
            if let (Some(hi), Some(lo)) = (
                resolved.iter().copied().reduce(f64::max),
                resolved.iter().copied().reduce(f64::min),
            ) {
                let ratio = hi / lo;
                let default_power = (p - a.fixed_p_tx_dbm).abs() < 1e-9;
                if default_power {
                    notes.push(format!("{kind} d_led spread {ratio:.2}x"));
                    if ratio >= 10.0 {
                        failures.push(format!("{kind} at {p} dBm: d_led BER spread {ratio:.1}x"));
                    }
                }
            }
            let rx = line(&have, kind, a.d_rx_bd.iter().map(|&d| (a.fixed_d_led_bd, d, p)));
            for w in rx.windows(2) {
                let (near, far) = (w[0], w[1]);
                let s_near = binomial_sigma(near.ber, near.n_bits);
                let s_far = binomial_sigma(far.ber, far.n_bits);
                if far.ber + 3.0 * s_far < near.ber - 3.0 * s_near {
                    failures.push(format!(
                        "{kind} at {p} dBm: BER falls {:.3e} -> {:.3e} from d_rx {} to {}",
                        near.ber, far.ber, near.d_rx_bd, far.d_rx_bd
                    ));
                }
            }
        }
    }
    let passed = failures.is_empty();
    let detail = if passed { notes.join(", ") } else { failures.join("; ") };
    CheckLine::new(3, "distance trends", passed, detail)
}

/// BER sensitivity dominated by the optical link for the relay and by the
/// RF link otherwise; RSS dominated by the RF link for every device.
pub fn check_sensitivity(report: &SensitivityReport) -> CheckLine {
    let mut failures = Vec::new();
    let mut notes = Vec::new();
    for row in &report.rows {
        let ok = match (row.metric, row.kind) {
            (Metric::Ber, AmbdKind::VlcRelay) => row.vlc_link > 0.5,
            (Metric::Ber, _) => row.bc_link > 0.5,
            (Metric::Rss, _) => row.bc_link > 0.9,
        };
        let text = format!("{} {} vlc={:.3} bc={:.3}", row.kind, row.metric, row.vlc_link, row.bc_link);
        if ok {
            notes.push(text);
        } else {
            failures.push(text);
        }
    }
    let passed = failures.is_empty() && !report.rows.is_empty();
    let detail = if failures.is_empty() { notes.join(", ") } else { failures.join("; ") };
    CheckLine::new(5, "sensitivity ordering", passed, detail)
}

/// RSS against the link budget. Cells whose budget sits less than
/// `margin_db` above the receiver noise floor are skipped; use `None` for
/// a noiseless run, where every cell counts.
pub fn check_rss(records: &[MetricRecord], cfg: &RunConfig, margin_db: Option<f64>) -> CheckLine {
    let floor = cfg.rx.noise_floor_dbm;
    let usable = |r: &&MetricRecord| match (floor, margin_db) {
        (Some(f), Some(m)) => r.rss_theory_dbm >= f + m,
        _ => true,
    };
    let cells: Vec<&MetricRecord> = records.iter().filter(usable).collect();
    let mut failures = Vec::new();
    let worst = cells
        .iter()
        .map(|r| (r.rss_dbm - r.rss_theory_dbm).abs())
        .fold(0.0, f64::max);
    if cells.is_empty() {
        failures.push("no usable cells".to_string());
    }
    if worst > RSS_TOLERANCE_DB || worst.is_nan() {
        failures.push(format!("worst |RSS - budget| {worst:.4} dB"));
    }
    let a = &cfg.axes;
    let have: BTreeMap<CellKey, &MetricRecord> = cells.iter().map(|r| (r.key(), *r)).collect();
    let mut slopes = Vec::new();
    for kind in kinds_of(records) {
        for &p in &a.p_tx_dbm {
            let l = line(&have, kind, a.d_rx_bd.iter().map(|&d| (a.fixed_d_led_bd, d, p)));
            if l.len() < 2 {
                continue;
            }
            let pts: Vec<(f64, f64)> = l.iter().map(|r| (r.d_rx_bd, r.rss_dbm)).collect();
            if let Ok(s) = slope_per_decade(&pts) {
                slopes.push(s);
                if (s - RSS_SLOPE).abs() > RSS_SLOPE_TOLERANCE {
                    failures.push(format!("{kind} at {p} dBm: slope {s:.3} dB/decade"));
                }
            }
        }
    }
    if slopes.is_empty() {
        failures.push("no line long enough for a slope".into());
    }
    let reference = link_budget_rss(
        &RfSourceConfig::default().with_power(0.0),
        &BcGeometry {
            d_tx_bd: 0.5,
            d_rx_bd: 0.5,
            g_tx: 1.0,
            g_bd: 1.0,
            g_rx: 1.0,
            wavelength: 0.125,
            mod_factor: 1.0,
        },
    );
    if (reference - -68.05).abs() > 0.005 {
        failures.push(format!("reference budget {reference:.3} dBm"));
    }
    let (lo, hi) = slopes
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &s| (l.min(s), h.max(s)));
    let passed = failures.is_empty();
    let detail = if passed {
        format!(
            "{} cells within {worst:.4} dB, slopes {lo:.3}..{hi:.3} dB/decade, reference {reference:.2} dBm",
            cells.len()
        )
    } else {
        failures.join("; ")
    };
    CheckLine::new(2, "link-budget calibration", passed, detail)
}

/// Measured BER against the non-coherent BFSK curve at each cell's
/// injected SNR. Informational: sweep cells include synchronisation.
pub fn theory_deltas(records: &[MetricRecord]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:<12} {:>6} {:>6} {:>6} {:>9} {:>11} {:>11}", "device", "d_led", "d_rx", "p_tx", "snr_inj", "ber", "theory");
    for r in records.iter().filter(|r| r.ber > 0.0) {
        let theory = theory_ber_ncfsk(db_to_linear(r.snr_db_injected)).unwrap_or(f64::NAN);
        let _ = writeln!(
            out,
            "{:<12} {:>6.2} {:>6.2} {:>6.1} {:>9.2} {:>11.3e} {:>11.3e}",
            r.bd_kind, r.d_led_bd, r.d_rx_bd, r.p_tx_dbm, r.snr_db_injected, r.ber, theory
        );
    }
    out
}

/// Acceptance view of one sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub checks: Vec<CheckLine>,
    pub sensitivity: SensitivityReport,
    pub deltas: String,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "cells with errors against theory at injected SNR:")?;
        write!(f, "{}", self.deltas)?;
        writeln!(f)?;
        writeln!(f, "normalised sensitivity:")?;
        write!(f, "{}", self.sensitivity)?;
        writeln!(f)?;
        for c in &self.checks {
            writeln!(f, "{c}")?;
        }
        Ok(())
    }
}

/// Checks a complete sweep.
pub fn report(records: &[MetricRecord], cfg: &RunConfig) -> Result<Report> {
    require_complete(records, cfg)?;
    let grid = grid_from_records(records);
    let sensitivity = SensitivityReport::from_grid(&grid)?;
    let checks = vec![
        check_duplicates(records),
        check_rss(records, cfg, Some(10.0)),
        check_distance_trends(records, cfg),
        check_sensitivity(&sensitivity),
    ];
    Ok(Report {
        checks,
        sensitivity,
        deltas: theory_deltas(records),
    })
}

/// Baseline curves alone: the BFSK waterfall and the RSS budget per power.
pub fn theory_report(cfg: &RunConfig) -> String {
    let mut out = String::from("gamma_db,ber_theory\n");
    for g in (0..=24).map(|i| i as f64 * 0.5) {
        let _ = writeln!(out, "{g},{}", theory_ber_ncfsk(db_to_linear(g)).unwrap_or(f64::NAN));
    }
    out.push_str("\np_tx_dbm,d_rx_bd_m,rss_theory_dbm\n");
    for &p in &cfg.axes.p_tx_dbm {
        for (d, rss) in theory_rss_curve(&cfg.rf.with_power(p), &cfg.bc, &cfg.axes.d_rx_bd) {
            let _ = writeln!(out, "{p},{d},{rss}");
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(cfg: &RunConfig) -> Vec<MetricRecord> {
        sweep_points(cfg)
            .iter()
            .map(|p| {
                let rf = cfg.rf.with_power(p.p_tx_dbm);
                let rss = link_budget_rss(&rf, &cfg.bc.at_distance(p.d_rx_bd));
                let ber = match p.kind {
                    AmbdKind::VlcRelay => 1e-5 * (p.d_led_bd / 0.2).powi(2) + 1e-6 * p.d_rx_bd,
                    _ => 1e-6 * (1.0 + 10.0 * p.d_rx_bd) * (1.0 + 0.01 * p.d_led_bd),
                };
                MetricRecord {
                    bd_kind: p.kind,
                    d_led_bd: p.d_led_bd,
                    d_rx_bd: p.d_rx_bd,
                    p_tx_dbm: p.p_tx_dbm,
                    snr_db: 20.0,
                    snr_db_injected: 20.0,
                    ber,
                    frame_detect_rate: 1.0,
                    rss_dbm: rss,
                    rss_theory_dbm: rss,
                    n_bits: 72_000,
                    n_frames: 4000,
                    seed: 0,
                }
            })
            .collect()
    }

    #[test]
    fn synthetic_grid_passes() {
        let cfg = RunConfig::default();
        let rows = synthetic(&cfg);
        let r = report(&rows, &cfg).unwrap();
        assert!(r.passed(), "{r}");
        assert_eq!(r.sensitivity.rows.len(), 6);
    }

    #[test]
    fn tampered_ber_fails() {
        let cfg = RunConfig::default();
        let mut rows = synthetic(&cfg);
        let i = rows
            .iter()
            .position(|r| r.bd_kind == AmbdKind::EhOnly && r.d_rx_bd == 0.5 && r.d_led_bd == 0.3 && r.p_tx_dbm == 0.0)
            .unwrap();
        rows[i].ber = 0.3;
        let r = report(&rows, &cfg).unwrap();
        assert!(!r.passed());
        assert!(!r.checks.iter().find(|c| c.criterion == 3).unwrap().passed);
    }

    #[test]
    fn missing_row_is_incomplete() {
        let cfg = RunConfig::default();
        let mut rows = synthetic(&cfg);
        rows.pop();
        assert!(matches!(report(&rows, &cfg), Err(Error::IncompleteGrid(_))));
    }

    #[test]
    fn theory_only_lists_curves() {
        let t = theory_report(&RunConfig::default());
        assert!(t.starts_with("gamma_db,ber_theory\n0,0.3032"));
        assert_eq!(t.lines().filter(|l| l.starts_with("0,0.5,")).count(), 1);
        assert!(t.contains("p_tx_dbm,d_rx_bd_m,rss_theory_dbm"));
    }
}
