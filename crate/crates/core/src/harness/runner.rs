//! Frame-level simulation of one grid point through the whole chain.

use crate::ambd::{
    apply_reflection, control_decode, control_respond, eh_only_baseband, powered_gate, relay_baseband,
    AmbdConfig, AmbdKind, SwitchState, SwitchWaveform,
};
use crate::analysis::linear_to_db;
use crate::bc_link::{backscatter_capture, dbm_to_watts, link_budget_rss, muted_capture, BcGeometry, RfSourceConfig, RxFrontEndConfig};
use crate::energy::{harvest_step, harvested_power, pv_split, DeviceState, EnergyStore};
use crate::error::Result;
use crate::rx_demod::{
    bit_errors, clamp_rss_dbm, demodulate, demodulate_at, measure_rss_watts, SnrAccumulator,
};
use crate::sigcore::{derive_seed, RealWaveform, SimRng};
use crate::vlc_channel::{lambertian_gain, propagate_vlc, PvFrontEnd, VlcGeometry};
use crate::vlc_tx::{bfsk_intensity, build_frame, manchester_encode, prbs_payload, BitVector, FrameSpec};

use super::config::RunConfig;
use super::record::MetricRecord;

/// Coordinates of one grid cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub kind: AmbdKind,
    pub d_led_bd: f64,
    pub d_rx_bd: f64,
    pub p_tx_dbm: f64,
}

impl Point {
    fn words(&self) -> [u64; 4] {
        [
            self.kind.index(),
            (self.d_led_bd * 1e6).round() as i64 as u64,
            (self.d_rx_bd * 1e6).round() as i64 as u64,
            (self.p_tx_dbm * 1e3).round() as i64 as u64,
        ]
    }

    pub fn seed(&self, base: u64) -> u64 {
        derive_seed(base, &self.words())
    }
}

/// Knobs used by the calibration experiments; the sweep uses the default.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RunOptions {
    /// Receiver noise per sample, overriding the configured floor.
    pub rx_noise_override: Option<f64>,
    /// Decode at the true frame start instead of searching for it.
    pub genie_timing: bool,
    /// Also decode the relay's switching stream and its photovoltage.
    pub track_vlc: bool,
}

/// Result of one frame.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FrameOutcome {
    pub bit_errors: usize,
    pub detected: bool,
    pub snr: SnrAccumulator,
    pub rss_watts: f64,
    /// Relay only: errors in the switching stream itself (no RF link).
    pub vlc_link_errors: Option<usize>,
    /// Relay only: errors of a linear decoder on the photovoltage.
    pub pv_errors: Option<usize>,
}

/// Totals over a point's frames.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointTotals {
    pub frames: u64,
    pub bits: u64,
    pub errors: u64,
    pub detected: u64,
    pub snr: SnrAccumulator,
    pub rss_watts_sum: f64,
    pub vlc_link_errors: u64,
    pub pv_errors: u64,
}

impl PointTotals {
    fn add(&mut self, f: &FrameOutcome, payload_len: usize) {
        self.frames += 1;
        self.bits += payload_len as u64;
        self.errors += f.bit_errors as u64;
        self.detected += u64::from(f.detected);
        self.snr.merge(&f.snr);
        self.rss_watts_sum += f.rss_watts;
        self.vlc_link_errors += f.vlc_link_errors.unwrap_or(0) as u64;
        self.pv_errors += f.pv_errors.unwrap_or(0) as u64;
    }

    pub fn ber(&self) -> f64 {
        self.errors as f64 / self.bits.max(1) as f64
    }
}

/// Everything fixed for one point.
#[derive(Debug, Clone)]
pub struct Simulator<'a> {
    cfg: &'a RunConfig,
    point: Point,
    opts: RunOptions,
    device: AmbdConfig,
    geometry: VlcGeometry,
    bc: BcGeometry,
    rf: RfSourceConfig,
    rx: RxFrontEndConfig,
    spc: usize,
    p_harvest: f64,
    p_load: f64,
}

impl<'a> Simulator<'a> {
    pub fn new(cfg: &'a RunConfig, point: Point, opts: RunOptions) -> Result<Self> {
        cfg.validate()?;
        let geometry = cfg.geometry.at_distance(point.d_led_bd);
        geometry.validate()?;
        let device = cfg.device(point.kind, point.d_led_bd);
        let mut rx = cfg.rx.clone();
        if let Some(p) = opts.rx_noise_override {
            rx.noise_floor_dbm = (p > 0.0).then(|| 10.0 * (p / 1e-3).log10());
        }
        // supply level is the noiseless PV mean
        let dc = lambertian_gain(&geometry) * cfg.pv.volts_per_watt() * cfg.vlc.optical_power_dc;
        let p = &cfg.profile;
        let p_load = match point.kind {
            AmbdKind::VlcControl => {
                p.draw(DeviceState::Decode) + p.draw(DeviceState::Sense) + p.draw(DeviceState::Modulate)
            }
            _ => p.draw(DeviceState::Modulate),
        };
        Ok(Self {
            cfg,
            point,
            opts,
            device,
            geometry,
            bc: cfg.bc.at_distance(point.d_rx_bd),
            rf: cfg.rf.with_power(point.p_tx_dbm),
            rx,
            spc: cfg.vlc.samples_per_chip(),
            p_harvest: harvested_power(dc, &cfg.pv),
            p_load,
        })
    }

    pub fn device(&self) -> &AmbdConfig {
        &self.device
    }

    pub fn rx(&self) -> &RxFrontEndConfig {
        &self.rx
    }

    /// Backscatter power reaching the receiver, watts.
    pub fn signal_power(&self) -> f64 {
        dbm_to_watts(link_budget_rss(&self.rf, &self.bc))
    }

    /// Bit SNR implied by the link budget and the receiver noise, dB.
    pub fn injected_snr_db(&self) -> f64 {
        let noise = self.rx.noise_power();
        if noise == 0.0 {
            return self.cfg.demod.snr_cap_db;
        }
        linear_to_db(self.cfg.demod.genie_snr(self.signal_power(), noise)).min(self.cfg.demod.snr_cap_db)
    }

    fn frame_spec(&self) -> &FrameSpec {
        &self.device.frame
    }

    /// LED output for a frame padded with unmodulated light.
    fn light(&self, frame: &BitVector, lead: usize, tail: usize) -> Result<RealWaveform> {
        let chips = manchester_encode(frame, self.cfg.vlc.chip_duration)?;
        let body = bfsk_intensity(&chips, &self.cfg.vlc)?;
        let idle = self.cfg.vlc.optical_power_dc;
        let mut s = vec![idle; lead];
        s.extend_from_slice(body.samples());
        s.extend(std::iter::repeat(idle).take(tail));
        RealWaveform::new(s, self.cfg.vlc.sample_rate)
    }

    /// Optical noise draws from its own stream, so it never shifts the RF draws.
    fn photovoltage(&self, index: u64, light: &RealWaveform, fe: &PvFrontEnd) -> Result<RealWaveform> {
        let mut rng = SimRng::new(derive_seed(self.point.seed(self.cfg.seed), &[index, 1]));
        propagate_vlc(light, &self.geometry, fe, &mut rng)
    }

    /// Simulates frame `index` with the device store as it stands.
    pub fn frame(&self, index: u64, store: &EnergyStore) -> Result<FrameOutcome> {
        let mut rng = SimRng::new(derive_seed(self.point.seed(self.cfg.seed), &[index]));
        let spc = self.spc;
        let lead = rng.below(self.cfg.lead_max_chips * spc + 1);
        let tail = self.cfg.tail_chips * spc;
        let frame_samples = self.device.frame_samples();
        let mut outcome = FrameOutcome::default();

        let (payload, sw) = match self.point.kind {
            AmbdKind::EhOnly => {
                let payload = prbs_payload(&mut rng, self.frame_spec().payload_len());
                let frame = build_frame(self.frame_spec(), &payload)?;
                let sw = eh_only_baseband(&frame, &self.device)?.padded(lead, tail, SwitchState::Open);
                (payload, sw)
            }
            AmbdKind::VlcRelay => {
                let payload = prbs_payload(&mut rng, self.frame_spec().payload_len());
                let frame = build_frame(self.frame_spec(), &payload)?;
                let light = self.light(&frame, lead, tail)?;
                let pv = self.photovoltage(index, &light, &self.cfg.pv)?;
                let (_, ac) = pv_split(&pv, &self.device.lpf);
                let sw = relay_baseband(&ac, &self.device);
                if self.opts.track_vlc {
                    let demod = &self.cfg.demod;
                    let direct = apply_reflection(&sw, &self.cfg.reflection)?;
                    let d = if self.opts.genie_timing { demodulate_at(&direct, demod, lead)? } else { demodulate(&direct, demod)? };
                    outcome.vlc_link_errors = Some(bit_errors(&payload, d.payload.as_ref())?);
                    let p = demodulate_at(&pv.to_complex(0.0), demod, lead)?;
                    outcome.pv_errors = Some(bit_errors(&payload, p.payload.as_ref())?);
                }
                (payload, sw)
            }
            AmbdKind::VlcControl => {
                let ids: Vec<u32> = self.device.command_codebook.keys().copied().collect();
                let cmd = ids[rng.below(ids.len())];
                let command = build_frame(self.frame_spec(), &self.device.command_codebook[&cmd])?;
                let light = self.light(&command, lead, tail)?;
                let pv = self.photovoltage(index, &light, &self.device.control_front_end)?;
                let (expected, _) = control_respond(cmd, index, &self.device)?;
                let sw = match control_decode(&pv, &self.device) {
                    Some(heard) => control_respond(heard, index, &self.device)?.1,
                    None => SwitchWaveform::constant(SwitchState::Open, frame_samples, self.device.sample_rate),
                };
                (expected, sw.padded(lead, tail, SwitchState::Open))
            }
        };

        let sw = powered_gate(sw, store);
        let gamma = apply_reflection(&sw, &self.cfg.reflection)?;
        let y = backscatter_capture(&gamma, &self.rf, &self.bc, &self.rx, &mut rng)?;
        let muted = self.rx.noise_floor_dbm.map(|_| muted_capture(&self.rx, self.rf.frequency, &mut rng)).transpose()?;

        let result = if self.opts.genie_timing {
            demodulate_at(&y, &self.cfg.demod, lead)?
        } else {
            demodulate(&y, &self.cfg.demod)?
        };
        outcome.bit_errors = bit_errors(&payload, result.payload.as_ref())?;
        outcome.detected = result.payload.is_some();
        result.bit_stats.iter().for_each(|s| outcome.snr.add(s));
        let span = match result.sync_offset {
            Some(o) => o..o + frame_samples,
            None => 0..y.len(),
        };
        outcome.rss_watts = measure_rss_watts(&y, span, muted.as_ref());
        Ok(outcome)
    }

    /// Runs `frames` consecutive frames, evolving the energy store.
    pub fn run(&self, frames: u64) -> Result<PointTotals> {
        let mut totals = PointTotals::default();
        let mut store = self.cfg.store.clone();
        let frame_time = (self.device.frame_samples() + (self.cfg.lead_max_chips + self.cfg.tail_chips) * self.spc) as f64
            / self.cfg.vlc.sample_rate;
        for i in 0..frames {
            let f = self.frame(i, &store)?;
            totals.add(&f, self.frame_spec().payload_len());
            store = harvest_step(&store, self.p_harvest, self.p_load, frame_time);
        }
        Ok(totals)
    }

    pub fn record(&self, totals: &PointTotals) -> MetricRecord {
        let snr_db = totals.snr.snr_db(self.cfg.demod.snr_cap_db).unwrap_or(f64::NAN);
        MetricRecord {
            bd_kind: self.point.kind,
            d_led_bd: self.point.d_led_bd,
            d_rx_bd: self.point.d_rx_bd,
            p_tx_dbm: self.point.p_tx_dbm,
            snr_db,
            snr_db_injected: self.injected_snr_db(),
            ber: totals.ber(),
            frame_detect_rate: totals.detected as f64 / totals.frames.max(1) as f64,
            rss_dbm: clamp_rss_dbm(totals.rss_watts_sum / totals.frames.max(1) as f64, self.rx.noise_floor_dbm),
            rss_theory_dbm: link_budget_rss(&self.rf, &self.bc),
            n_bits: totals.bits,
            n_frames: totals.frames,
            seed: self.point.seed(self.cfg.seed),
        }
    }
}

/// Full chain at one point with `cfg.frames` frames.
pub fn run_point(cfg: &RunConfig, point: Point) -> Result<MetricRecord> {
    let sim = Simulator::new(cfg, point, RunOptions::default())?;
    let totals = sim.run(cfg.frames as u64)?;
    Ok(sim.record(&totals))
}
