//! Calibration runs outside the sweep grid: the BFSK waterfall and the
//! relay error-inheritance experiment.

use rayon::prelude::*;

use crate::ambd::AmbdKind;
use crate::analysis::{binomial_sigma, db_to_linear, theory_ber_ncfsk};
use crate::error::Result;

use super::config::RunConfig;
use super::runner::{Point, PointTotals, RunOptions, Simulator};

/// One waterfall point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaterfallPoint {
    pub kind: AmbdKind,
    pub gamma_db: f64,
    pub bits: u64,
    pub errors: u64,
    pub theory: f64,
}

impl WaterfallPoint {
    pub fn ber(&self) -> f64 {
        self.errors as f64 / self.bits.max(1) as f64
    }

    /// Binomial standard deviation at the theoretical rate.
    pub fn sigma(&self) -> f64 {
        binomial_sigma(self.theory, self.bits)
    }

    pub fn within(&self, k: f64) -> bool {
        (self.ber() - self.theory).abs() <= k * self.sigma()
    }
}

fn fixed_point(cfg: &RunConfig, kind: AmbdKind) -> Point {
    Point {
        kind,
        d_led_bd: cfg.axes.fixed_d_led_bd,
        d_rx_bd: cfg.axes.fixed_d_rx_bd,
        p_tx_dbm: cfg.axes.fixed_p_tx_dbm,
    }
}

fn frames_for(bits: u64, payload_len: usize) -> u64 {
    bits.div_ceil(payload_len as u64)
}

/// BER against bit SNR at the fixed geometry. The receiver noise is set so
/// that the backscatter reaches each `gamma_db`; frame timing is known.
/// `vlc_clean` removes the optical noise first.
pub fn run_waterfall(
    cfg: &RunConfig,
    kind: AmbdKind,
    gammas_db: &[f64],
    min_bits: u64,
    vlc_clean: bool,
) -> Result<Vec<WaterfallPoint>> {
    let mut cfg = cfg.clone();
    if vlc_clean {
        cfg.pv.electrical_noise_power = 0.0;
    }
    let point = fixed_point(&cfg, kind);
    let frames = frames_for(min_bits, cfg.demod.payload_len);
    gammas_db
        .par_iter()
        .map(|&gamma_db| {
            let probe = Simulator::new(&cfg, point, RunOptions::default())?;
            let gamma = db_to_linear(gamma_db);
            let noise = cfg.demod.noise_for_snr(probe.signal_power(), gamma);
            let opts = RunOptions {
                rx_noise_override: Some(noise),
                genie_timing: true,
                ..RunOptions::default()
            };
            let totals = Simulator::new(&cfg, point, opts)?.run(frames)?;
            Ok(WaterfallPoint {
                kind,
                gamma_db,
                bits: totals.bits,
                errors: totals.errors,
                theory: theory_ber_ncfsk(gamma)?,
            })
        })
        .collect()
}

/// Relay run with a noiseless RF link.
#[derive(Debug, Clone, PartialEq)]
pub struct InheritancePoint {
    pub d_led_bd: f64,
    pub pv_noise: f64,
    pub totals: PointTotals,
}

impl InheritancePoint {
    /// End-to-end BER through the RF link.
    pub fn end_to_end(&self) -> f64 {
        self.totals.ber()
    }

    /// BER of the relay's own switching decisions.
    pub fn vlc_link(&self) -> f64 {
        self.totals.vlc_link_errors as f64 / self.totals.bits.max(1) as f64
    }

    /// BER of a linear tone decoder on the photovoltage, for reference.
    pub fn photovoltage(&self) -> f64 {
        self.totals.pv_errors as f64 / self.totals.bits.max(1) as f64
    }

    pub fn within(&self, k: f64) -> bool {
        let p = self.vlc_link();
        (self.end_to_end() - p).abs() <= k * binomial_sigma(p, self.totals.bits)
    }
}

/// Relay at each `(d_led, pv noise)` with a noiseless RF link.
pub fn run_inheritance(cfg: &RunConfig, cases: &[(f64, f64)], frames: u64) -> Result<Vec<InheritancePoint>> {
    cases
        .par_iter()
        .map(|&(d_led_bd, pv_noise)| {
            let mut c = cfg.clone();
            c.rx.noise_floor_dbm = None;
            c.pv.electrical_noise_power = pv_noise;
            let point = Point {
                d_led_bd,
                ..fixed_point(&c, AmbdKind::VlcRelay)
            };
            let opts = RunOptions {
                track_vlc: true,
                ..RunOptions::default()
            };
            let totals = Simulator::new(&c, point, opts)?.run(frames)?;
            Ok(InheritancePoint {
                d_led_bd,
                pv_noise,
                totals,
            })
        })
        .collect()
}
