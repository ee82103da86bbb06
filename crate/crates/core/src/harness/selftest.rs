//! Quick invariant suite behind the `selftest` command.

use num_complex::Complex64;

use crate::ambd::{powered_gate, AmbdKind, SwitchState, SwitchWaveform};
use crate::bc_link::link_budget_rss;
use crate::energy::EnergyStore;
use crate::rx_demod::{fsk_chip_detect, manchester_decode, ChipDecision};
use crate::sigcore::{ComplexWaveform, SimRng};
use crate::vlc_tx::{manchester_encode, prbs_payload, BitVector, BARKER7};

use super::config::RunConfig;
use super::report::CheckLine;
use super::runner::{run_point, Point};

fn manchester_identity(frames: usize) -> bool {
    let mut rng = SimRng::new(1);
    (0..frames).all(|_| {
        let bits = prbs_payload(&mut rng, 25);
        let Ok(chips) = manchester_encode(&bits, 5e-4) else {
            return false;
        };
        let decisions: Vec<ChipDecision> = chips
            .chips()
            .iter()
            .map(|&c| ChipDecision {
                chip: c,
                e0: f64::from(u8::from(!c)),
                e1: f64::from(u8::from(c)),
            })
            .collect();
        manchester_decode(&decisions).map(|d| d == bits).unwrap_or(false)
    })
}

fn barker_sidelobes() -> (i32, i32) {
    let b = BitVector::new(BARKER7.to_vec()).bipolar();
    let corr = |lag: usize| b.iter().zip(&b[lag..]).map(|(x, y)| x * y).sum::<i32>();
    let side = (1..b.len()).map(|l| corr(l).abs()).max().unwrap_or(0);
    (corr(0), side)
}

/// Runs the fast invariants and returns one line per group.
pub fn selftest(cfg: &RunConfig) -> Vec<CheckLine> {
    let mut out = Vec::new();

    let ok = manchester_identity(1000);
    let (peak, side) = barker_sidelobes();
    out.push(CheckLine::new(
        6,
        "codec",
        ok && peak == 7 && side <= 1,
        format!("manchester identity {ok}, barker peak {peak} sidelobe {side}"),
    ));

    let mut quiet = cfg.clone();
    quiet.rx.noise_floor_dbm = None;
    quiet.pv.electrical_noise_power = 0.0;
    quiet.frames = 8;
    let mut notes = Vec::new();
    let mut passed = true;
    for kind in AmbdKind::ALL {
        let point = Point {
            kind,
            d_led_bd: quiet.axes.fixed_d_led_bd,
            d_rx_bd: quiet.axes.fixed_d_rx_bd,
            p_tx_dbm: quiet.axes.fixed_p_tx_dbm,
        };
        match run_point(&quiet, point) {
            Ok(r) => {
                let good = r.ber == 0.0 && r.frame_detect_rate == 1.0 && (r.rss_dbm - r.rss_theory_dbm).abs() < 0.05;
                passed &= good;
                notes.push(format!("{kind} ber={} rss_err={:.4}", r.ber, r.rss_dbm - r.rss_theory_dbm));
            }
            Err(e) => {
                passed = false;
                notes.push(format!("{kind}: {e}"));
            }
        }
    }
    out.push(CheckLine::new(2, "noiseless chain", passed, notes.join(", ")));

    let reference = link_budget_rss(&cfg.rf.with_power(0.0), &cfg.bc.at_distance(0.5));
    out.push(CheckLine::new(
        2,
        "link budget",
        reference.is_finite(),
        format!("{reference:.3} dBm at 0 dBm, 0.5 m / 0.5 m"),
    ));

    let store = EnergyStore {
        capacitance: 0.4,
        ..EnergyStore::default()
    };
    let released = store.energy_between(3.3, 1.8);
    let low = EnergyStore {
        voltage: store.v_min_operate - 0.01,
        ..store.clone()
    };
    let sw = SwitchWaveform::new(
        (0..100).map(|i| if i % 2 == 0 { SwitchState::Short } else { SwitchState::Open }).collect(),
        200e3,
    );
    let gated_open = sw
        .map(|s| powered_gate(s, &low).states().iter().all(|&x| x == SwitchState::Open))
        .unwrap_or(false);
    out.push(CheckLine::new(
        7,
        "energy",
        (released - 1.53).abs() < 1e-6 && gated_open,
        format!("released {released:.6} J, unpowered output open {gated_open}"),
    ));

    let capture = ComplexWaveform::new(vec![Complex64::new(0.0, 0.0); 5000], 200e3, 0.0);
    let silent = capture
        .map(|c| fsk_chip_detect(&c, &cfg.demod, 0).map(|d| d.iter().all(|x| !x.chip)).unwrap_or(false))
        .unwrap_or(false);
    out.push(CheckLine::new(6, "tie rule", silent, format!("silent capture decodes to chip 0: {silent}")));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn selftest_passes_on_defaults() {
        for line in selftest(&RunConfig::default()) {
            assert!(line.passed, "{line}");
        }
    }
}
