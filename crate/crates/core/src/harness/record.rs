//! Per-point metrics and their CSV form.

use std::io::{Read, Write};

use crate::ambd::AmbdKind;
use crate::analysis::{CellKey, GridCell, MetricGrid};

pub const CSV_HEADER: [&str; 13] = [
    "bd_kind",
    "d_led_bd_m",
    "d_rx_bd_m",
    "p_tx_dbm",
    "snr_db",
    "snr_db_injected",
    "ber",
    "frame_detect_rate",
    "rss_dbm",
    "rss_theory_dbm",
    "n_bits",
    "n_frames",
    "seed",
];

#[derive(Debug, Clone, PartialEq)]
pub struct MetricRecord {
    pub bd_kind: AmbdKind,
    pub d_led_bd: f64,
    pub d_rx_bd: f64,
    pub p_tx_dbm: f64,
    /// Decision-directed estimate; NaN when no frame was found.
    pub snr_db: f64,
    pub snr_db_injected: f64,
    pub ber: f64,
    pub frame_detect_rate: f64,
    pub rss_dbm: f64,
    pub rss_theory_dbm: f64,
    pub n_bits: u64,
    pub n_frames: u64,
    pub seed: u64,
}

impl MetricRecord {
    pub fn key(&self) -> CellKey {
        CellKey::new(self.bd_kind, self.d_led_bd, self.d_rx_bd, self.p_tx_dbm)
    }

    fn fields(&self) -> [String; 13] {
        [
            self.bd_kind.to_string(),
            fmt_num(self.d_led_bd),
            fmt_num(self.d_rx_bd),
            fmt_num(self.p_tx_dbm),
            fmt_num(self.snr_db),
            fmt_num(self.snr_db_injected),
            fmt_num(self.ber),
            fmt_num(self.frame_detect_rate),
            fmt_num(self.rss_dbm),
            fmt_num(self.rss_theory_dbm),
            self.n_bits.to_string(),
            self.n_frames.to_string(),
            self.seed.to_string(),
        ]
    }

    fn from_fields(r: &csv::StringRecord) -> anyhow::Result<Self> {
        if r.len() != CSV_HEADER.len() {
            anyhow::bail!("expected {} columns, found {}", CSV_HEADER.len(), r.len());
        }
        let f = |i: usize| -> anyhow::Result<f64> { Ok(r[i].trim().parse::<f64>()?) };
        let u = |i: usize| -> anyhow::Result<u64> { Ok(r[i].trim().parse::<u64>()?) };
        Ok(Self {
            bd_kind: r[0].parse()?,
            d_led_bd: f(1)?,
            d_rx_bd: f(2)?,
            p_tx_dbm: f(3)?,
            snr_db: f(4)?,
            snr_db_injected: f(5)?,
            ber: f(6)?,
            frame_detect_rate: f(7)?,
            rss_dbm: f(8)?,
            rss_theory_dbm: f(9)?,
            n_bits: u(10)?,
            n_frames: u(11)?,
            seed: u(12)?,
        })
    }
}

/// Shortest text that parses back to the same value.
fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else {
        format!("{x}")
    }
}

pub fn write_header<W: Write>(w: &mut csv::Writer<W>) -> csv::Result<()> {
    w.write_record(CSV_HEADER)
}

pub fn write_record<W: Write>(w: &mut csv::Writer<W>, r: &MetricRecord) -> csv::Result<()> {
    w.write_record(r.fields())
}

pub fn write_csv<W: Write>(out: W, records: &[MetricRecord]) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    write_header(&mut w)?;
    for r in records {
        write_record(&mut w, r)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads every complete row. The header must match exactly.
pub fn read_csv<R: Read>(input: R) -> anyhow::Result<Vec<MetricRecord>> {
    let mut rd = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(input);
    let header = rd.headers()?.clone();
    if header.iter().ne(CSV_HEADER.iter().copied()) {
        anyhow::bail!("unexpected CSV header: {}", header.iter().collect::<Vec<_>>().join(","));
    }
    rd.records()
        .map(|r| MetricRecord::from_fields(&r?))
        .collect()
}

/// Where a cell repeats, the first row wins.
pub fn grid_from_records(records: &[MetricRecord]) -> MetricGrid {
    let mut g = MetricGrid::new();
    for r in records.iter().rev() {
        g.insert(
            r.key(),
            GridCell {
                ber: r.ber,
                rss_dbm: r.rss_dbm,
                n_bits: r.n_bits,
            },
        );
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> MetricRecord {
        MetricRecord {
            bd_kind: AmbdKind::VlcRelay,
            d_led_bd: 0.3,
            d_rx_bd: 0.1 + 0.2,
            p_tx_dbm: -25.0,
            snr_db: 13.257_000_000_000_001,
            snr_db_injected: f64::NAN,
            ber: 1.0 / 72_000.0,
            frame_detect_rate: 0.99975,
            rss_dbm: -80.123,
            rss_theory_dbm: -80.1,
            n_bits: 72_000,
            n_frames: 4000,
            seed: u64::MAX,
        }
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let r = sample();
        let mut buf = Vec::new();
        write_csv(&mut buf, std::slice::from_ref(&r)).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(&CSV_HEADER.join(",")));
        let back = read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.len(), 1);
        let b = &back[0];
        assert_eq!(b.d_rx_bd, r.d_rx_bd);
        assert_eq!(b.ber, r.ber);
        assert_eq!(b.snr_db, r.snr_db);
        assert!(b.snr_db_injected.is_nan());
        assert_eq!(b.seed, r.seed);
    }

    #[test]
    fn wrong_header_is_rejected() {
        assert!(read_csv("a,b\n1,2\n".as_bytes()).is_err());
    }
}
