//! LED access point: frame assembly, Manchester line coding and the
//! phase-continuous BFSK intensity waveform.

use std::fmt;
use std::str::FromStr;

use crate::error::{invalid, Error, Result};
use crate::sigcore::{RealWaveform, SimRng};

/// Barker-7 preamble `1110010`.
pub const BARKER7: [bool; 7] = [true, true, true, false, false, true, false];

/// Sequence of binary digits.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct BitVector(Vec<bool>);

impl BitVector {
    pub fn new(bits: Vec<bool>) -> Self {
        Self(bits)
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![false; len])
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Most-significant bit first.
    pub fn from_u32(value: u32, len: usize) -> Self {
        Self((0..len).rev().map(|i| (value >> i) & 1 == 1).collect())
    }

    pub fn to_u32(&self) -> u32 {
        self.0.iter().fold(0, |acc, &b| (acc << 1) | b as u32)
    }

    /// `±1` mapping (1 → +1, 0 → −1).
    pub fn bipolar(&self) -> Vec<i32> {
        self.0.iter().map(|&b| if b { 1 } else { -1 }).collect()
    }
}

impl From<Vec<bool>> for BitVector {
    fn from(bits: Vec<bool>) -> Self {
        Self(bits)
    }
}

impl FromStr for BitVector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .filter(|c| !c.is_whitespace())
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(invalid("bits", format!("unexpected character {other:?}"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(Self)
    }
}

impl fmt::Display for BitVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// Frame layout: fixed Barker-7 preamble followed by `payload_len` bits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameSpec {
    preamble: BitVector,
    payload_len: usize,
}

impl FrameSpec {
    pub fn new(payload_len: usize) -> Result<Self> {
        if payload_len == 0 {
            return Err(invalid("payload_len", "must be at least 1"));
        }
        Ok(Self {
            preamble: BitVector(BARKER7.to_vec()),
            payload_len,
        })
    }

    pub fn preamble(&self) -> &BitVector {
        &self.preamble
    }

    pub fn payload_len(&self) -> usize {
        self.payload_len
    }

    pub fn frame_len(&self) -> usize {
        self.preamble.len() + self.payload_len
    }

    /// Strips the preamble from a full frame.
    pub fn payload_of(&self, frame: &BitVector) -> Result<BitVector> {
        if frame.len() != self.frame_len() {
            return Err(Error::LengthMismatch {
                expected: self.frame_len(),
                actual: frame.len(),
            });
        }
        Ok(BitVector(frame.0[self.preamble.len()..].to_vec()))
    }
}

impl Default for FrameSpec {
    fn default() -> Self {
        Self::new(18).expect("default payload length is positive")
    }
}

/// Manchester chips with their duration.
#[derive(Debug, Clone, PartialEq)]
pub struct ChipStream {
    chips: Vec<bool>,
    chip_duration: f64,
}

impl ChipStream {
    pub fn new(chips: Vec<bool>, chip_duration: f64) -> Result<Self> {
        if chips.len() % 2 != 0 {
            return Err(invalid("chips", "Manchester streams have even length"));
        }
        if !(chip_duration > 0.0) {
            return Err(invalid("chip_duration", "must be positive"));
        }
        Ok(Self {
            chips,
            chip_duration,
        })
    }

    pub fn chips(&self) -> &[bool] {
        &self.chips
    }

    pub fn chip_duration(&self) -> f64 {
        self.chip_duration
    }

    pub fn len(&self) -> usize {
        self.chips.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chips.is_empty()
    }
}

/// Tone plan and LED drive of the access point.
#[derive(Debug, Clone, PartialEq)]
pub struct VlcTxConfig {
    /// Tone for chip 0.
    pub f0: f64,
    /// Tone for chip 1.
    pub f1: f64,
    pub chip_duration: f64,
    pub sample_rate: f64,
    /// LED bias point, watts of optical output.
    pub optical_power_dc: f64,
    pub modulation_index: f64,
}

impl Default for VlcTxConfig {
    fn default() -> Self {
        Self {
            f0: 6000.0,
            f1: 8000.0,
            chip_duration: 5e-4,
            sample_rate: 200_000.0,
            optical_power_dc: 1.0,
            modulation_index: 0.5,
        }
    }
}

/// Lowest tone allowed before flicker becomes visible.
pub const FLICKER_LIMIT_HZ: f64 = 2000.0;

impl VlcTxConfig {
    pub fn validate(&self) -> Result<()> {
        let spacing_cycles = (self.f1 - self.f0) * self.chip_duration;
        if !(spacing_cycles > 0.5 && (spacing_cycles - spacing_cycles.round()).abs() < 1e-6) {
            return Err(invalid(
                "f1",
                format!("(f1 - f0)·chip_duration = {spacing_cycles} is not a positive integer"),
            ));
        }
        for (name, f) in [("f0", self.f0), ("f1", self.f1)] {
            if f <= FLICKER_LIMIT_HZ {
                return Err(invalid(name, format!("{f} Hz is inside the flicker band")));
            }
            if f >= self.sample_rate / 2.0 {
                return Err(Error::AboveNyquist {
                    freq: f,
                    nyquist: self.sample_rate / 2.0,
                });
            }
        }
        samples_per_chip(self.chip_duration, self.sample_rate)?;
        if !(self.optical_power_dc > 0.0) {
            return Err(invalid("optical_power_dc", "must be positive"));
        }
        if !(0.0..=1.0).contains(&self.modulation_index) {
            return Err(invalid("modulation_index", "must lie in [0, 1]"));
        }
        Ok(())
    }

    pub fn samples_per_chip(&self) -> usize {
        (self.chip_duration * self.sample_rate).round() as usize
    }

    /// Peak-to-mean AC amplitude of the emitted intensity.
    pub fn ac_amplitude(&self) -> f64 {
        self.optical_power_dc * self.modulation_index
    }
}

/// Chip length in samples; the chip must be an integer number of samples.
pub fn samples_per_chip(chip_duration: f64, sample_rate: f64) -> Result<usize> {
    let exact = chip_duration * sample_rate;
    let n = exact.round();
    if n < 1.0 || (exact - n).abs() > 1e-6 {
        return Err(invalid(
            "chip_duration",
            format!("chip spans {exact} samples, need a positive integer"),
        ));
    }
    Ok(n as usize)
}

/// Uniform random payload bits.
pub fn prbs_payload(rng: &mut SimRng, len: usize) -> BitVector {
    BitVector((0..len).map(|_| rng.bit()).collect())
}

/// `preamble ∥ payload`.
pub fn build_frame(spec: &FrameSpec, payload: &BitVector) -> Result<BitVector> {
    if payload.len() != spec.payload_len {
        return Err(Error::LengthMismatch {
            expected: spec.payload_len,
            actual: payload.len(),
        });
    }
    let mut bits = spec.preamble.0.clone();
    bits.extend_from_slice(&payload.0);
    Ok(BitVector(bits))
}

/// Bit 1 → chips `10`, bit 0 → chips `01`.
pub fn manchester_encode(bits: &BitVector, chip_duration: f64) -> Result<ChipStream> {
    let chips = bits.0.iter().flat_map(|&b| [b, !b]).collect();
    ChipStream::new(chips, chip_duration)
}

/// Phase-continuous tone sequence (unit amplitude) for a chip stream.
pub fn bfsk_tone(chips: &ChipStream, cfg: &VlcTxConfig) -> Vec<f64> {
    let n = cfg.samples_per_chip();
    let mut phase = 0.0f64;
    let mut out = Vec::with_capacity(chips.len() * n);
    for &c in chips.chips() {
        let f = if c { cfg.f1 } else { cfg.f0 };
        let step = std::f64::consts::TAU * f / cfg.sample_rate;
        for _ in 0..n {
            out.push(phase.sin());
            phase = (phase + step).rem_euclid(std::f64::consts::TAU);
        }
    }
    out
}

/// Optical intensity `P_dc·(1 + m·tone)` emitted by the LED array.
pub fn bfsk_intensity(chips: &ChipStream, cfg: &VlcTxConfig) -> Result<RealWaveform> {
    cfg.validate()?;
    if chips.is_empty() {
        return Err(invalid("chips", "nothing to transmit"));
    }
    if (chips.chip_duration() - cfg.chip_duration).abs() > 1e-12 {
        return Err(invalid("chips", "chip duration differs from the transmitter's"));
    }
    let p = cfg.optical_power_dc;
    let m = cfg.modulation_index;
    let samples = bfsk_tone(chips, cfg)
        .into_iter()
        .map(|t| (p * (1.0 + m * t)).max(0.0))
        .collect();
    RealWaveform::new(samples, cfg.sample_rate)
}
