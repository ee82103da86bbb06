//! Closed-form baselines, statistics helpers and distance sensitivity.

use std::collections::BTreeMap;
use std::fmt;

use crate::ambd::AmbdKind;
use crate::bc_link::{link_budget_rss, BcGeometry, RfSourceConfig};
use crate::error::{invalid, Error, Result};

/// BER floor used before taking logarithms.
pub const BER_FLOOR: f64 = 1e-6;

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Non-coherent orthogonal BFSK: `½·exp(−γ/2)`.
pub fn theory_ber_ncfsk(gamma: f64) -> Result<f64> {
    if !(gamma >= 0.0) {
        return Err(invalid("gamma", "SNR must be non-negative"));
    }
    Ok(0.5 * (-gamma / 2.0).exp())
}

/// Link-budget RSS along a list of device-to-receiver distances.
pub fn theory_rss_curve(src: &RfSourceConfig, base: &BcGeometry, d_rx: &[f64]) -> Vec<(f64, f64)> {
    d_rx.iter()
        .map(|&d| (d, link_budget_rss(src, &base.at_distance(d))))
        .collect()
}

/// Binomial standard deviation of an error-rate estimate.
pub fn binomial_sigma(p: f64, n: u64) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

/// `|measured − p| ≤ k·σ`.
pub fn within_binomial(measured: f64, p: f64, n: u64, k: f64) -> bool {
    (measured - p).abs() <= k * binomial_sigma(p, n)
}

/// Least-squares slope of `y` against `log10(x)`, units of y per decade.
pub fn slope_per_decade(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 2 {
        return Err(invalid("points", "need at least two points for a slope"));
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.log10()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(points).map(|(x, p)| (x - mx) * (p.1 - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(invalid("points", "all distances are equal"));
    }
    Ok(sxy / sxx)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Metric {
    Ber,
    Rss,
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Ber => "BER",
            Self::Rss => "RSS",
        })
    }
}

/// Grid cell coordinates. Distances are held in micrometres and power in
/// milli-dB so they order and compare exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CellKey {
    pub kind: AmbdKind,
    d_led_um: i64,
    d_rx_um: i64,
    p_tx_mdb: i64,
}

impl CellKey {
    pub fn new(kind: AmbdKind, d_led_bd: f64, d_rx_bd: f64, p_tx_dbm: f64) -> Self {
        Self {
            kind,
            d_led_um: (d_led_bd * 1e6).round() as i64,
            d_rx_um: (d_rx_bd * 1e6).round() as i64,
            p_tx_mdb: (p_tx_dbm * 1e3).round() as i64,
        }
    }

    pub fn d_led_bd(&self) -> f64 {
        self.d_led_um as f64 * 1e-6
    }

    pub fn d_rx_bd(&self) -> f64 {
        self.d_rx_um as f64 * 1e-6
    }

    pub fn p_tx_dbm(&self) -> f64 {
        self.p_tx_mdb as f64 * 1e-3
    }
}

/// Aggregated metrics of one cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridCell {
    pub ber: f64,
    pub rss_dbm: f64,
    pub n_bits: u64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricGrid {
    cells: BTreeMap<CellKey, GridCell>,
}

impl MetricGrid {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, key: CellKey, cell: GridCell) {
        self.cells.insert(key, cell);
    }

    pub fn get(&self, key: &CellKey) -> Option<&GridCell> {
        self.cells.get(key)
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn kinds(&self) -> Vec<AmbdKind> {
        let mut k: Vec<_> = self.cells.keys().map(|c| c.kind).collect();
        k.dedup();
        k
    }

    pub fn iter(&self) -> impl Iterator<Item = (&CellKey, &GridCell)> {
        self.cells.iter()
    }

    /// Lines of cells along one distance axis, all other coordinates fixed.
    /// Each line is sorted by the swept distance; lines with one cell are dropped.
    pub fn lines(&self, kind: AmbdKind, axis: Axis) -> Vec<Vec<(f64, GridCell)>> {
        let mut groups: BTreeMap<(i64, i64), Vec<(f64, GridCell)>> = BTreeMap::new();
        for (k, c) in self.cells.iter().filter(|(k, _)| k.kind == kind) {
            let (fixed, swept) = match axis {
                Axis::VlcLink => (k.d_rx_um, k.d_led_bd()),
                Axis::BcLink => (k.d_led_um, k.d_rx_bd()),
            };
            groups.entry((k.p_tx_mdb, fixed)).or_default().push((swept, *c));
        }
        groups
            .into_values()
            .filter(|l| l.len() >= 2)
            .map(|mut l| {
                l.sort_by(|a, b| a.0.total_cmp(&b.0));
                l
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Axis {
    /// LED to device distance.
    VlcLink,
    /// Device to receiver distance.
    BcLink,
}

fn metric_value(metric: Metric, c: &GridCell) -> f64 {
    match metric {
        Metric::Ber => c.ber.max(BER_FLOOR).log10(),
        Metric::Rss => c.rss_dbm,
    }
}

/// Mean |Δmetric| per centimetre along `axis`, averaged over all lines.
pub fn raw_sensitivity(grid: &MetricGrid, metric: Metric, kind: AmbdKind, axis: Axis) -> Result<f64> {
    let lines = grid.lines(kind, axis);
    if lines.is_empty() {
        return Err(Error::IncompleteGrid(format!("{kind}: no {axis:?} line with two or more cells")));
    }
    let per_line: Vec<f64> = lines
        .iter()
        .map(|l| {
            let steps: Vec<f64> = l
                .windows(2)
                .map(|w| {
                    let dcm = (w[1].0 - w[0].0) * 100.0;
                    (metric_value(metric, &w[1].1) - metric_value(metric, &w[0].1)).abs() / dcm
                })
                .collect();
            steps.iter().sum::<f64>() / steps.len() as f64
        })
        .collect();
    Ok(per_line.iter().sum::<f64>() / per_line.len() as f64)
}

/// Normalised sensitivity of one (device, metric) pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensitivityRow {
    pub kind: AmbdKind,
    pub metric: Metric,
    pub vlc_link: f64,
    pub bc_link: f64,
    /// Per-cm values before normalisation.
    pub raw: (f64, f64),
}

/// Pairwise-normalised sensitivities. When both raw values are zero the
/// metric does not react to either link and both are reported as ½.
pub fn sensitivity(grid: &MetricGrid, metric: Metric, kind: AmbdKind) -> Result<SensitivityRow> {
    let v = raw_sensitivity(grid, metric, kind, Axis::VlcLink)?;
    let b = raw_sensitivity(grid, metric, kind, Axis::BcLink)?;
    let (nv, nb) = if v + b > 0.0 { (v / (v + b), b / (v + b)) } else { (0.5, 0.5) };
    Ok(SensitivityRow {
        kind,
        metric,
        vlc_link: nv,
        bc_link: nb,
        raw: (v, b),
    })
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SensitivityReport {
    pub rows: Vec<SensitivityRow>,
}

impl SensitivityReport {
    pub fn from_grid(grid: &MetricGrid) -> Result<Self> {
        let mut rows = Vec::new();
        for kind in grid.kinds() {
            for metric in [Metric::Ber, Metric::Rss] {
                rows.push(sensitivity(grid, metric, kind)?);
            }
        }
        Ok(Self { rows })
    }

    pub fn row(&self, kind: AmbdKind, metric: Metric) -> Option<&SensitivityRow> {
        self.rows.iter().find(|r| r.kind == kind && r.metric == metric)
    }
}

impl fmt::Display for SensitivityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<12} {:<6} {:>10} {:>10}", "device", "metric", "vlc_link", "bc_link")?;
        for r in &self.rows {
            writeln!(f, "{:<12} {:<6} {:>10.4} {:>10.4}", r.kind, r.metric, r.vlc_link, r.bc_link)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ncfsk_values() {
        assert_eq!(theory_ber_ncfsk(0.0).unwrap(), 0.5);
        assert!((theory_ber_ncfsk(1.0).unwrap() - 0.30327).abs() < 1e-5);
        assert!((theory_ber_ncfsk(10.0).unwrap() - 3.369e-3).abs() < 1e-6);
        assert!(theory_ber_ncfsk(-0.1).is_err());
        let mut prev = 0.5;
        for i in 1..100 {
            let p = theory_ber_ncfsk(i as f64 * 0.3).unwrap();
            assert!(p < prev && p > 0.0);
            prev = p;
        }
    }

    #[test]
    fn rss_curve() {
        let src = RfSourceConfig::default();
        let g = BcGeometry::default();
        let d: Vec<f64> = (1..=9).map(|i| i as f64 / 10.0).collect();
        let c = theory_rss_curve(&src, &g, &d);
        assert_eq!(c.len(), 9);
        assert!(c.windows(2).all(|w| w[1].1 < w[0].1));
        assert!((c[0].1 - c[8].1 - 20.0 * 9f64.log10()).abs() < 1e-9);
        assert!((c[0].1 - c[8].1 - 19.085).abs() < 0.001);
        let one = theory_rss_curve(&src, &g, &[0.5]);
        assert_eq!(one, vec![(0.5, link_budget_rss(&src, &g))]);
        assert!((slope_per_decade(&c).unwrap() + 20.0).abs() < 1e-9);
    }

    fn synthetic(f: impl Fn(f64, f64) -> f64) -> MetricGrid {
        let mut g = MetricGrid::new();
        for i in 2..=5 {
            for j in 1..=9 {
                let (dl, dr) = (i as f64 / 10.0, j as f64 / 10.0);
                g.insert(
                    CellKey::new(AmbdKind::EhOnly, dl, dr, 0.0),
                    GridCell {
                        ber: 0.0,
                        rss_dbm: f(dl, dr),
                        n_bits: 1,
                    },
                );
            }
        }
        g
    }

    #[test]
    fn linear_field_sensitivity() {
        let g = synthetic(|dl, dr| 2.0 * dl + dr);
        let r = sensitivity(&g, Metric::Rss, AmbdKind::EhOnly).unwrap();
        assert!((r.vlc_link - 2.0 / 3.0).abs() < 1e-9);
        assert!((r.bc_link - 1.0 / 3.0).abs() < 1e-9);
        assert!((r.vlc_link + r.bc_link - 1.0).abs() < 1e-9);

        let g = synthetic(|_, dr| 5.0 * dr);
        let r = sensitivity(&g, Metric::Rss, AmbdKind::EhOnly).unwrap();
        assert_eq!((r.vlc_link, r.bc_link), (0.0, 1.0));

        let g = synthetic(|dl, dr| dl + dr);
        let r = sensitivity(&g, Metric::Rss, AmbdKind::EhOnly).unwrap();
        assert!((r.vlc_link - 0.5).abs() < 1e-9);
    }

    #[test]
    fn missing_axis_is_reported() {
        let mut g = MetricGrid::new();
        g.insert(
            CellKey::new(AmbdKind::VlcRelay, 0.3, 0.5, 0.0),
            GridCell {
                ber: 0.1,
                rss_dbm: -70.0,
                n_bits: 1,
            },
        );
        assert!(matches!(
            sensitivity(&g, Metric::Ber, AmbdKind::VlcRelay),
            Err(Error::IncompleteGrid(_))
        ));
    }

    #[test]
    fn ci_helpers() {
        assert!(within_binomial(0.1, 0.1, 100, 3.0));
        assert!(!within_binomial(0.2, 0.1, 10_000, 3.0));
        assert!((binomial_sigma(0.5, 100) - 0.05).abs() < 1e-12);
    }
}
