use std::collections::BTreeMap;

use vlcambc::ambd::{apply_reflection, control_respond, eh_only_baseband, AmbdConfig, AmbdKind, ReflectionPair, SensorModel};
use vlcambc::rx_demod::{demodulate, fsk_chip_detect, manchester_decode};
use vlcambc::vlc_tx::{build_frame, manchester_encode, BitVector, FrameSpec};

fn fixture() -> BTreeMap<String, BitVector> {
    include_str!("fixtures/frame_15a2b.txt")
        .lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .map(|l| {
            let (k, v) = l.split_once(' ').unwrap();
            (k.to_string(), v.parse().unwrap())
        })
        .collect()
}

#[test]
fn sensor_frame_matches_fixture() {
    let f = fixture();
    let payload = BitVector::from_u32(0x15A2B, 18);
    assert_eq!(payload, f["payload"]);
    let frame = build_frame(&FrameSpec::default(), &payload).unwrap();
    assert_eq!(frame, f["frame"]);
    let chips = manchester_encode(&frame, 5e-4).unwrap();
    assert_eq!(chips.chips(), f["chips"].bits());
}

#[test]
fn fixture_decodes_back_from_the_waveform() {
    let f = fixture();
    let cfg = AmbdConfig::new(AmbdKind::EhOnly);
    let sw = eh_only_baseband(&f["frame"], &cfg).unwrap();
    assert_eq!(sw.len(), 5000);
    let y = apply_reflection(&sw, &ReflectionPair::default()).unwrap();
    let chips = fsk_chip_detect(&y, &cfg.demod_config(), 0).unwrap();
    let bits: Vec<bool> = chips.iter().map(|c| c.chip).collect();
    assert_eq!(bits, f["chips"].bits());
    assert_eq!(manchester_decode(&chips).unwrap(), f["frame"]);
    assert_eq!(demodulate(&y, &cfg.demod_config()).unwrap().payload.unwrap(), f["payload"]);
}

#[test]
fn fixed_sensor_reading_goes_out_unchanged() {
    let cfg = AmbdConfig {
        sensor_model: SensorModel::Fixed(0x15A2B),
        ..AmbdConfig::new(AmbdKind::VlcControl)
    };
    let cmd = *cfg.command_codebook.keys().next().unwrap();
    let (payload, sw) = control_respond(cmd, 3, &cfg).unwrap();
    assert_eq!(payload, fixture()["payload"]);
    assert_eq!(sw, eh_only_baseband(&fixture()["frame"], &cfg).unwrap());
}
