//! Behavioural models of the three backscatter device types. Each produces
//! an antenna switching waveform, either from local bits (MCU baseband) or
//! from the AC part of the received light.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::energy::{EnergyStore, LpfSpec};
use crate::error::{invalid, Error, Result};
use crate::rx_demod::{demodulate, DemodConfig};
use crate::sigcore::{derive_seed, ComplexWaveform, RealWaveform};
use crate::vlc_channel::PvFrontEnd;
use crate::vlc_tx::{build_frame, manchester_encode, samples_per_chip, BitVector, FrameSpec, VlcTxConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AmbdKind {
    /// Harvests light only; MCU generates the PWM baseband.
    EhOnly,
    /// Comparator turns the optical AC component straight into switching.
    VlcRelay,
    /// Decodes a VLC command, then answers with sensor data.
    VlcControl,
}

impl AmbdKind {
    pub const ALL: [AmbdKind; 3] = [Self::EhOnly, Self::VlcRelay, Self::VlcControl];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::EhOnly => "eh_only",
            Self::VlcRelay => "vlc_relay",
            Self::VlcControl => "vlc_control",
        }
    }

    /// Stable index used when deriving seeds.
    pub fn index(self) -> u64 {
        match self {
            Self::EhOnly => 0,
            Self::VlcRelay => 1,
            Self::VlcControl => 2,
        }
    }
}

impl fmt::Display for AmbdKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AmbdKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "eh" | "eh_only" => Ok(Self::EhOnly),
            "relay" | "vlc_relay" => Ok(Self::VlcRelay),
            "control" | "vlc_control" => Ok(Self::VlcControl),
            other => Err(invalid("bd_kind", format!("unknown device kind `{other}`"))),
        }
    }
}

/// Antenna termination.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SwitchState {
    Open,
    Short,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwitchWaveform {
    states: Vec<SwitchState>,
    sample_rate: f64,
}

impl SwitchWaveform {
    pub fn new(states: Vec<SwitchState>, sample_rate: f64) -> Result<Self> {
        if !(sample_rate > 0.0 && sample_rate.is_finite()) {
            return Err(invalid("sample_rate", "must be positive"));
        }
        Ok(Self { states, sample_rate })
    }

    pub fn constant(state: SwitchState, len: usize, sample_rate: f64) -> Self {
        Self {
            states: vec![state; len],
            sample_rate,
        }
    }

    pub fn states(&self) -> &[SwitchState] {
        &self.states
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn short_fraction(&self) -> f64 {
        if self.states.is_empty() {
            return 0.0;
        }
        self.states.iter().filter(|s| **s == SwitchState::Short).count() as f64
            / self.states.len() as f64
    }

    pub fn toggles(&self) -> usize {
        self.states.windows(2).filter(|w| w[0] != w[1]).count()
    }

    /// Pads with `lead` idle samples before and `tail` after.
    pub fn padded(&self, lead: usize, tail: usize, idle: SwitchState) -> Self {
        let mut states = vec![idle; lead];
        states.extend_from_slice(&self.states);
        states.extend(std::iter::repeat(idle).take(tail));
        Self {
            states,
            sample_rate: self.sample_rate,
        }
    }
}

/// Complex reflection coefficients of the two terminations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReflectionPair {
    pub gamma_open: Complex64,
    pub gamma_short: Complex64,
}

impl Default for ReflectionPair {
    fn default() -> Self {
        Self {
            gamma_open: Complex64::new(1.0, 0.0),
            gamma_short: Complex64::new(-1.0, 0.0),
        }
    }
}

impl ReflectionPair {
    /// Antipodal pair whose swing realises modulation factor `m`.
    pub fn antipodal(m: f64) -> Result<Self> {
        if !(m > 0.0 && m <= 1.0) {
            return Err(invalid("mod_factor", "must lie in (0, 1]"));
        }
        let g = m.sqrt();
        Ok(Self {
            gamma_open: Complex64::new(g, 0.0),
            gamma_short: Complex64::new(-g, 0.0),
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.gamma_open.norm() > 1.0 + 1e-12 || self.gamma_short.norm() > 1.0 + 1e-12 {
            return Err(invalid("gamma", "reflection coefficients must satisfy |Γ| ≤ 1"));
        }
        Ok(())
    }
}

/// Hysteresis comparator: switches high above `threshold + h/2`, low below
/// `threshold − h/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Comparator {
    pub threshold: f64,
    pub hysteresis: f64,
}

impl Default for Comparator {
    fn default() -> Self {
        Self {
            threshold: 0.0,
            hysteresis: 0.0,
        }
    }
}

/// Source of the readings a VLC-Control device reports.
#[derive(Debug, Clone, PartialEq)]
pub enum SensorModel {
    /// Always the same raw value.
    Fixed(u32),
    /// A reproducible pseudo-random value per reading index.
    Hashed { seed: u64 },
}

impl Default for SensorModel {
    fn default() -> Self {
        Self::Hashed { seed: 0x5E45_0B5E }
    }
}

impl SensorModel {
    /// Raw reading number `index`, quantised to `bits` bits.
    pub fn reading(&self, index: u64, bits: usize) -> u32 {
        let mask = if bits >= 32 { u32::MAX } else { (1u32 << bits) - 1 };
        let raw = match self {
            Self::Fixed(v) => *v,
            Self::Hashed { seed } => derive_seed(*seed, &[index]) as u32,
        };
        raw & mask
    }
}

/// Device parameters shared by all kinds; kind-specific fields are ignored
/// by the other kinds.
#[derive(Debug, Clone, PartialEq)]
pub struct AmbdConfig {
    pub kind: AmbdKind,
    pub f0: f64,
    pub f1: f64,
    pub chip_duration: f64,
    /// Switching waveform rate, equal to the RF capture rate.
    pub sample_rate: f64,
    /// PWM duty; the prototypes use exactly one half.
    pub duty: f64,
    pub frame: FrameSpec,
    pub comparator: Comparator,
    pub command_codebook: BTreeMap<u32, BitVector>,
    pub sensor_model: SensorModel,
    /// TIA front-end of the control receiver.
    pub control_front_end: PvFrontEnd,
    pub lpf: LpfSpec,
}

impl AmbdConfig {
    pub fn new(kind: AmbdKind) -> Self {
        let tx = VlcTxConfig::default();
        let frame = FrameSpec::default();
        let command_codebook = (0..4u32)
            .map(|id| {
                let pattern = derive_seed(0xC0DE_B00C, &[id as u64]) as u32;
                (id, BitVector::from_u32(pattern, frame.payload_len()))
            })
            .collect();
        Self {
            kind,
            f0: tx.f0,
            f1: tx.f1,
            chip_duration: tx.chip_duration,
            sample_rate: tx.sample_rate,
            duty: 0.5,
            frame,
            comparator: Comparator::default(),
            command_codebook,
            sensor_model: SensorModel::default(),
            control_front_end: PvFrontEnd {
                load_resistance: 20_000.0,
                ..PvFrontEnd::default()
            },
            lpf: LpfSpec::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.duty != 0.5 {
            return Err(invalid("duty", "the PWM duty is fixed at 50%"));
        }
        if !(self.comparator.hysteresis >= 0.0) {
            return Err(invalid("hysteresis", "must be non-negative"));
        }
        samples_per_chip(self.chip_duration, self.sample_rate)?;
        let mut seen = Vec::new();
        for (id, pattern) in &self.command_codebook {
            if pattern.len() != self.frame.payload_len() {
                return Err(invalid(
                    "command_codebook",
                    format!("pattern for command {id} has {} bits", pattern.len()),
                ));
            }
            if seen.contains(&pattern) {
                return Err(invalid("command_codebook", "patterns must be distinct"));
            }
            seen.push(pattern);
        }
        self.lpf.validate(self.f0.min(self.f1))?;
        self.control_front_end.validate()
    }

    pub fn samples_per_chip(&self) -> usize {
        (self.chip_duration * self.sample_rate).round() as usize
    }

    /// Frame duration in samples.
    pub fn frame_samples(&self) -> usize {
        2 * self.frame.frame_len() * self.samples_per_chip()
    }

    pub fn demod_config(&self) -> DemodConfig {
        DemodConfig {
            f0: self.f0,
            f1: self.f1,
            chip_duration: self.chip_duration,
            sample_rate: self.sample_rate,
            payload_len: self.frame.payload_len(),
            ..DemodConfig::default()
        }
    }
}

/// 50%-duty PWM level at sample `n`: high during the first half of each period.
#[inline]
pub fn pwm_high(freq: f64, n: usize, sample_rate: f64) -> bool {
    let x = freq * n as f64 / sample_rate;
    x - x.floor() < 0.5
}

/// MCU baseband: Manchester chips, each a PWM burst at the chip's tone.
/// A high PWM level shorts the antenna.
pub fn eh_only_baseband(frame_bits: &BitVector, cfg: &AmbdConfig) -> Result<SwitchWaveform> {
    let chips = manchester_encode(frame_bits, cfg.chip_duration)?;
    let spc = samples_per_chip(cfg.chip_duration, cfg.sample_rate)?;
    let mut states = Vec::with_capacity(chips.len() * spc);
    for (k, &chip) in chips.chips().iter().enumerate() {
        let f = if chip { cfg.f1 } else { cfg.f0 };
        for i in 0..spc {
            let n = k * spc + i;
            states.push(if pwm_high(f, n, cfg.sample_rate) {
                SwitchState::Short
            } else {
                SwitchState::Open
            });
        }
    }
    SwitchWaveform::new(states, cfg.sample_rate)
}

/// Hysteresis comparator on the photovoltage AC component. Starts open.
pub fn relay_baseband(ac: &RealWaveform, cfg: &AmbdConfig) -> SwitchWaveform {
    let upper = cfg.comparator.threshold + cfg.comparator.hysteresis / 2.0;
    let lower = cfg.comparator.threshold - cfg.comparator.hysteresis / 2.0;
    let mut state = SwitchState::Open;
    let states = ac
        .samples()
        .iter()
        .map(|&v| {
            state = match state {
                SwitchState::Open if v > upper => SwitchState::Short,
                SwitchState::Short if v < lower => SwitchState::Open,
                s => s,
            };
            state
        })
        .collect();
    SwitchWaveform {
        states,
        sample_rate: ac.sample_rate(),
    }
}

/// Decodes a command frame from the photovoltage. `None` when no frame is
/// found or the payload matches no codebook entry exactly.
pub fn control_decode(pv: &RealWaveform, cfg: &AmbdConfig) -> Option<u32> {
    let mut demod = cfg.demod_config();
    demod.sample_rate = pv.sample_rate();
    let result = demodulate(&pv.to_complex(0.0), &demod).ok()?;
    let payload = result.payload?;
    cfg.command_codebook
        .iter()
        .find(|(_, pattern)| **pattern == payload)
        .map(|(id, _)| *id)
}

/// Answers command `cmd` with sensor reading number `reading`. Returns the
/// payload sent and the switching waveform carrying it.
pub fn control_respond(
    cmd: u32,
    reading: u64,
    cfg: &AmbdConfig,
) -> Result<(BitVector, SwitchWaveform)> {
    if !cfg.command_codebook.contains_key(&cmd) {
        return Err(Error::UnknownCommand(cmd));
    }
    let bits = cfg.frame.payload_len();
    let payload = BitVector::from_u32(cfg.sensor_model.reading(reading, bits), bits);
    let frame = build_frame(&cfg.frame, &payload)?;
    let sw = eh_only_baseband(&frame, cfg)?;
    Ok((payload, sw))
}

/// Unit-carrier reflection stream Γ(t).
pub fn apply_reflection(sw: &SwitchWaveform, refl: &ReflectionPair) -> Result<ComplexWaveform> {
    refl.validate()?;
    let samples = sw
        .states
        .iter()
        .map(|s| match s {
            SwitchState::Open => refl.gamma_open,
            SwitchState::Short => refl.gamma_short,
        })
        .collect();
    ComplexWaveform::new(samples, sw.sample_rate, 0.0)
}

/// An unpowered device cannot drive its switch: the antenna stays open.
pub fn powered_gate(sw: SwitchWaveform, store: &EnergyStore) -> SwitchWaveform {
    if store.powered() {
        sw
    } else {
        SwitchWaveform::constant(SwitchState::Open, sw.len(), sw.sample_rate)
    }
}
