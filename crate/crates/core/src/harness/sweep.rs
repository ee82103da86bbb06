//! Grid enumeration and parallel execution.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use rayon::prelude::*;

use crate::analysis::CellKey;

use super::config::RunConfig;
use super::record::{read_csv, write_csv, MetricRecord};
use super::runner::{run_point, Point};

/// Points in output order: per kind, the LED-distance line at the fixed
/// receiver distance, then the receiver-distance line at the fixed LED
/// distance, each across every power. A cell on both lines appears twice.
pub fn sweep_points(cfg: &RunConfig) -> Vec<Point> {
    let a = &cfg.axes;
    let mut out = Vec::new();
    for &kind in &cfg.kinds {
        let led = a.d_led_bd.iter().map(|&d| (d, a.fixed_d_rx_bd));
        let rx = a.d_rx_bd.iter().map(|&d| (a.fixed_d_led_bd, d));
        for (d_led_bd, d_rx_bd) in led.chain(rx) {
            for &p_tx_dbm in &a.p_tx_dbm {
                out.push(Point {
                    kind,
                    d_led_bd,
                    d_rx_bd,
                    p_tx_dbm,
                });
            }
        }
    }
    out
}

fn pool(workers: usize) -> anyhow::Result<rayon::ThreadPool> {
    Ok(rayon::ThreadPoolBuilder::new().num_threads(workers).build()?)
}

/// Runs every point not already in `done` and returns all rows in sweep order.
pub fn run_sweep_with(cfg: &RunConfig, done: &[MetricRecord]) -> anyhow::Result<Vec<MetricRecord>> {
    cfg.validate()?;
    let points = sweep_points(cfg);
    let have: BTreeMap<CellKey, &MetricRecord> = done.iter().map(|r| (r.key(), r)).collect();
    let mut queued = BTreeSet::new();
    let todo: Vec<Point> = points
        .iter()
        .filter(|p| {
            let k = CellKey::new(p.kind, p.d_led_bd, p.d_rx_bd, p.p_tx_dbm);
            !have.contains_key(&k) && queued.insert(k)
        })
        .copied()
        .collect();
    let fresh: Vec<MetricRecord> = pool(cfg.workers)?.install(|| {
        todo.par_iter()
            .map(|&p| run_point(cfg, p))
            .collect::<crate::error::Result<Vec<_>>>()
    })?;
    let fresh: BTreeMap<CellKey, MetricRecord> = fresh.into_iter().map(|r| (r.key(), r)).collect();
    Ok(points
        .iter()
        .map(|p| {
            let k = CellKey::new(p.kind, p.d_led_bd, p.d_rx_bd, p.p_tx_dbm);
            fresh.get(&k).cloned().unwrap_or_else(|| have[&k].clone())
        })
        .collect())
}

pub fn run_sweep(cfg: &RunConfig) -> anyhow::Result<Vec<MetricRecord>> {
    run_sweep_with(cfg, &[])
}

/// Runs the sweep into `out`. With `resume`, rows already present in `out`
/// are kept and only the missing ones are computed.
pub fn run_sweep_to(cfg: &RunConfig, out: &Path, resume: bool) -> anyhow::Result<Vec<MetricRecord>> {
    let done = if resume && out.exists() {
        read_csv(File::open(out)?)?
    } else {
        Vec::new()
    };
    let rows = run_sweep_with(cfg, &done)?;
    let file = File::create(out).map_err(|e| anyhow::anyhow!("cannot write {}: {e}", out.display()))?;
    write_csv(BufWriter::new(file), &rows)?;
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ambd::AmbdKind;

    #[test]
    fn default_grid_size() {
        let cfg = RunConfig::default();
        assert_eq!(sweep_points(&cfg).len(), (4 + 9) * 11 * 3);
    }

    #[test]
    fn empty_kinds_rejected() {
        let cfg = RunConfig {
            kinds: vec![],
            ..RunConfig::default()
        };
        assert!(run_sweep(&cfg).is_err());
    }

    #[test]
    fn resume_matches_fresh_run() {
        let mut cfg = RunConfig::default();
        cfg.kinds = vec![AmbdKind::EhOnly];
        cfg.axes.d_led_bd = vec![0.3];
        cfg.axes.d_rx_bd = vec![0.4, 0.5];
        cfg.axes.p_tx_dbm = vec![-5.0, 0.0];
        cfg.frames = 3;
        let dir = tempfile::tempdir().unwrap();
        let full = dir.path().join("full.csv");
        run_sweep_to(&cfg, &full, false).unwrap();
        let rows = read_csv(File::open(&full).unwrap()).unwrap();
        assert_eq!(rows.len(), 6);

        let part = dir.path().join("part.csv");
        write_csv(File::create(&part).unwrap(), &rows[..2]).unwrap();
        run_sweep_to(&cfg, &part, true).unwrap();
        assert_eq!(std::fs::read(&full).unwrap(), std::fs::read(&part).unwrap());
    }
}
