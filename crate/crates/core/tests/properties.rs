use proptest::prelude::*;

use vlcambc::ambd::{
    apply_reflection, eh_only_baseband, powered_gate, relay_baseband, AmbdConfig, AmbdKind, Comparator, ReflectionPair, SwitchState, SwitchWaveform,
};
use vlcambc::analysis::{sensitivity, theory_ber_ncfsk, CellKey, GridCell, Metric, MetricGrid};
use vlcambc::harness::{run_point, Point, RunConfig};
use vlcambc::bc_link::{link_budget_rss, BcGeometry, RfSourceConfig};
use vlcambc::energy::{harvest_step, EnergyStore};
use vlcambc::rx_demod::{fsk_chip_detect, manchester_decode, DemodConfig};
use vlcambc::sigcore::{add_awgn, make_tone, tone_energy, RealWaveform, SimRng};
use vlcambc::vlc_channel::{lambertian_gain, propagate_vlc, PvFrontEnd, VlcGeometry};
use vlcambc::vlc_tx::{build_frame, manchester_encode, BitVector, FrameSpec};

fn bits(len: std::ops::Range<usize>) -> impl Strategy<Value = Vec<bool>> {
    proptest::collection::vec(any::<bool>(), len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tones_spaced_by_whole_cycles_are_orthogonal(k in 1u32..8, base in 3u32..20, phase in 0.0f64..6.28) {
        let fs = 200e3;
        let chip = 5e-4;
        let f0 = 1000.0 * f64::from(base);
        let f1 = f0 + f64::from(k) / chip;
        let w = make_tone(f0, chip, fs, phase).unwrap();
        let on = tone_energy(&w, f0, 0, w.len()).unwrap();
        let off = tone_energy(&w, f1, 0, w.len()).unwrap();
        prop_assert!(off < 1e-12 * on);
    }

    #[test]
    fn noise_is_seed_determined_and_finite(seed in any::<u64>(), power in 0.0f64..10.0) {
        let w = RealWaveform::new(vec![0.5; 256], 1e3).unwrap();
        let a = add_awgn(&w, power, &mut SimRng::new(seed)).unwrap();
        let b = add_awgn(&w, power, &mut SimRng::new(seed)).unwrap();
        prop_assert_eq!(a.samples(), b.samples());
        prop_assert!(a.samples().iter().all(|s| s.is_finite()));
    }

    #[test]
    fn frames_survive_the_chip_detector(payload in bits(1..40)) {
        let spec = FrameSpec::new(payload.len()).unwrap();
        let frame = build_frame(&spec, &BitVector::new(payload)).unwrap();
        let cfg = AmbdConfig::new(AmbdKind::EhOnly);
        let chips = manchester_encode(&frame, cfg.chip_duration).unwrap();
        prop_assert_eq!(chips.len(), 2 * (7 + spec.payload_len()));
        prop_assert_eq!(chips.chips().iter().filter(|&&c| c).count() * 2, chips.len());
        let gamma = apply_reflection(&eh_only_baseband(&frame, &cfg).unwrap(), &ReflectionPair::default()).unwrap();
        let demod = DemodConfig { payload_len: spec.payload_len(), ..cfg.demod_config() };
        let decided = fsk_chip_detect(&gamma, &demod, 0).unwrap();
        prop_assert_eq!(manchester_decode(&decided).unwrap(), frame);
    }

    #[test]
    fn optical_channel_is_linear(a in 0.0f64..5.0, d in 0.2f64..0.5, seed in any::<u64>()) {
        let g = VlcGeometry::default().at_distance(d);
        let fe = PvFrontEnd { electrical_noise_power: 0.0, ..PvFrontEnd::default() };
        let x = RealWaveform::new((0..64).map(|i| 1.0 + (f64::from(i) * 0.3).sin()).collect(), 200e3).unwrap();
        let ax = RealWaveform::new(x.samples().iter().map(|s| a * s).collect(), 200e3).unwrap();
        let y = propagate_vlc(&x, &g, &fe, &mut SimRng::new(seed)).unwrap();
        let ay = propagate_vlc(&ax, &g, &fe, &mut SimRng::new(seed)).unwrap();
        for (p, q) in y.samples().iter().zip(ay.samples()) {
            prop_assert!((a * p - q).abs() <= 1e-12 * (1.0 + q.abs()));
        }
    }

    #[test]
    fn optical_gain_falls_with_distance(d in 0.05f64..2.0, step in 1e-3f64..1.0) {
        let g = VlcGeometry::default();
        prop_assert!(lambertian_gain(&g.at_distance(d)) > lambertian_gain(&g.at_distance(d + step)));
    }

    #[test]
    fn store_conserves_energy_and_stays_bounded(
        steps in proptest::collection::vec((0.0f64..1e-2, 0.0f64..1e-2, 1e-3f64..1.0), 1..30),
    ) {
        let mut s = EnergyStore { capacitance: 0.4, voltage: 2.5, ..EnergyStore::default() };
        for (ph, pl, dt) in steps {
            let expected = s.energy() + (ph - pl) * dt;
            let next = harvest_step(&s, ph, pl, dt);
            prop_assert!(next.voltage >= 0.0 && next.voltage <= next.v_max + 1e-12);
            if expected > 0.0 && expected < s.capacity() {
                prop_assert!((next.energy() - expected).abs() <= 1e-12 * expected.max(1.0));
            }
            s = next;
        }
    }

    #[test]
    fn comparator_toggles_once_per_crossing(amp in 0.0f64..1.0, hyst in 0.05f64..0.5, f in 1e3f64..1e4) {
        let cfg = AmbdConfig {
            comparator: Comparator { threshold: 0.0, hysteresis: hyst },
            ..AmbdConfig::new(AmbdKind::VlcRelay)
        };
        let ac = make_tone(f, 0.01, 200e3, 0.0).unwrap();
        let ac = RealWaveform::new(ac.samples().iter().map(|s| amp * s).collect(), 200e3).unwrap();
        let toggles = relay_baseband(&ac, &cfg).toggles();
        if amp < hyst / 2.0 {
            prop_assert_eq!(toggles, 0);
        }
        let crossings = ac.samples().windows(2).filter(|w| (w[0] > 0.0) != (w[1] > 0.0)).count();
        prop_assert!(toggles <= crossings + 1);
    }

    #[test]
    fn unpowered_device_stays_open(states in bits(1..200), v in 0.0f64..1.8) {
        let sw = SwitchWaveform::new(
            states.into_iter().map(|s| if s { SwitchState::Short } else { SwitchState::Open }).collect(),
            200e3,
        ).unwrap();
        let store = EnergyStore { voltage: v, ..EnergyStore::default() };
        prop_assume!(v < store.v_min_operate);
        prop_assert!(powered_gate(sw, &store).states().iter().all(|&s| s == SwitchState::Open));
    }

    #[test]
    fn link_budget_is_reciprocal(a in 0.1f64..3.0, b in 0.1f64..3.0, p in -30.0f64..10.0) {
        let src = RfSourceConfig::default().with_power(p);
        let g = BcGeometry { d_tx_bd: a, d_rx_bd: b, ..BcGeometry::default() };
        let h = BcGeometry { d_tx_bd: b, d_rx_bd: a, ..BcGeometry::default() };
        prop_assert!((link_budget_rss(&src, &g) - link_budget_rss(&src, &h)).abs() < 1e-9);
    }

    #[test]
    fn theory_ber_is_decreasing_and_bounded(g in 0.0f64..50.0, dg in 1e-3f64..5.0) {
        let a = theory_ber_ncfsk(g).unwrap();
        let b = theory_ber_ncfsk(g + dg).unwrap();
        prop_assert!(a > 0.0 && a <= 0.5);
        prop_assert!(b < a);
    }

    #[test]
    fn sensitivity_pairs_sum_to_one(values in proptest::collection::vec((0.0f64..0.5, -90.0f64..-40.0), 6)) {
        let mut grid = MetricGrid::new();
        let cells = [(0.2, 0.5), (0.3, 0.5), (0.4, 0.5), (0.3, 0.1), (0.3, 0.7), (0.3, 0.9)];
        for (&(dl, dr), &(ber, rss)) in cells.iter().zip(&values) {
            grid.insert(CellKey::new(AmbdKind::EhOnly, dl, dr, 0.0), GridCell { ber, rss_dbm: rss, n_bits: 72_000 });
        }
        for metric in [Metric::Ber, Metric::Rss] {
            let row = sensitivity(&grid, metric, AmbdKind::EhOnly).unwrap();
            prop_assert!((row.vlc_link + row.bc_link - 1.0).abs() < 1e-9);
        }
    }
}

#[test]
fn local_bit_devices_ignore_optical_noise() {
    for kind in [AmbdKind::EhOnly, AmbdKind::VlcControl] {
        let mut quiet = RunConfig::default();
        quiet.frames = 20;
        quiet.pv.electrical_noise_power = 0.0;
        let noisy = RunConfig {
            pv: PvFrontEnd { electrical_noise_power: 1e-9, ..quiet.pv.clone() },
            ..quiet.clone()
        };
        let point = Point { kind, d_led_bd: 0.3, d_rx_bd: 0.5, p_tx_dbm: 0.0 };
        assert_eq!(run_point(&quiet, point).unwrap(), run_point(&noisy, point).unwrap(), "{kind}");
    }
}
