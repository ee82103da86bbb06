//! Receiver chain: direct-path removal, non-coherent tone detection, Barker
//! synchronisation, Manchester decoding and SNR/RSS/BER measurement.
//!
//! Bits are detected pair-wise. A Manchester bit is two chips on two
//! orthogonal tones, so bit 1 and bit 0 are two orthogonal two-chip
//! signals. The detector correlates each hypothesis against its tone
//! template over the whole bit, which is classic non-coherent orthogonal
//! signalling with error rate `½·exp(−γ/2)` at bit SNR `γ`.

use std::ops::Range;

use num_complex::Complex64;

use crate::bc_link::watts_to_dbm;
use crate::error::{invalid, Error, Result};
use crate::sigcore::{block_bins, ComplexWaveform, ToneBank};
use crate::vlc_tx::{samples_per_chip, BitVector, VlcTxConfig, BARKER7};

#[derive(Debug, Clone, PartialEq)]
pub struct DemodConfig {
    pub f0: f64,
    pub f1: f64,
    pub chip_duration: f64,
    pub sample_rate: f64,
    pub payload_len: usize,
    /// Minimum number of preamble bits (of 7) that must match.
    pub sync_threshold: usize,
    /// Minimum mean decision contrast `|z1 − z0| / (z1 + z0)` over the
    /// preamble. Rejects hypotheses built from noise.
    pub sync_contrast: f64,
    /// Reported SNR ceiling, dB.
    pub snr_cap_db: f64,
}

impl Default for DemodConfig {
    fn default() -> Self {
        let tx = VlcTxConfig::default();
        Self {
            f0: tx.f0,
            f1: tx.f1,
            chip_duration: tx.chip_duration,
            sample_rate: tx.sample_rate,
            payload_len: 18,
            sync_threshold: 6,
            sync_contrast: 0.7,
            snr_cap_db: 60.0,
        }
    }
}

impl DemodConfig {
    pub fn validate(&self) -> Result<()> {
        if !(4..=7).contains(&self.sync_threshold) {
            return Err(invalid("sync_threshold", "must lie in [4, 7]"));
        }
        if !(0.0..1.0).contains(&self.sync_contrast) {
            return Err(invalid("sync_contrast", "must lie in [0, 1)"));
        }
        if self.payload_len == 0 {
            return Err(invalid("payload_len", "must be positive"));
        }
        for (name, f) in [("f0", self.f0), ("f1", self.f1)] {
            if !(f > 0.0 && f < self.sample_rate / 2.0) {
                return Err(invalid(name, "tone must lie between 0 and Nyquist"));
            }
        }
        samples_per_chip(self.chip_duration, self.sample_rate).map(|_| ())
    }

    pub fn samples_per_chip(&self) -> usize {
        (self.chip_duration * self.sample_rate).round() as usize
    }

    pub fn frame_len(&self) -> usize {
        BARKER7.len() + self.payload_len
    }

    pub fn frame_samples(&self) -> usize {
        2 * self.frame_len() * self.samples_per_chip()
    }

    /// Single-bin response of one unit ±1 PWM chip at its own tone, phase
    /// referenced to the chip start. Index 0 is `f0`, 1 is `f1`.
    pub fn templates(&self) -> [Complex64; 2] {
        let spc = self.samples_per_chip();
        [self.f0, self.f1].map(|f| {
            let step = -2.0 * std::f64::consts::PI * f / self.sample_rate;
            (0..spc)
                .map(|i| {
                    let x = f * i as f64 / self.sample_rate;
                    let level = if x - x.floor() < 0.5 { -1.0 } else { 1.0 };
                    Complex64::from_polar(level, step * i as f64)
                })
                .sum()
        })
    }

    /// `|b0|² + |b1|²`: noiseless bit-statistic gain per unit signal power.
    pub fn bit_energy(&self) -> f64 {
        self.templates().iter().map(|b| b.norm_sqr()).sum()
    }

    /// Bit SNR for a ±1 switching stream received at `signal_power` in
    /// circular noise of `noise_power` per sample.
    pub fn genie_snr(&self, signal_power: f64, noise_power: f64) -> f64 {
        signal_power * self.bit_energy() / (self.samples_per_chip() as f64 * noise_power)
    }

    /// Noise power giving bit SNR `gamma` at `signal_power`.
    pub fn noise_for_snr(&self, signal_power: f64, gamma: f64) -> f64 {
        signal_power * self.bit_energy() / (self.samples_per_chip() as f64 * gamma)
    }
}

/// Pair statistics for one bit: energy under hypothesis 0 and 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BitStat {
    pub z0: f64,
    pub z1: f64,
}

impl BitStat {
    /// Ties resolve to 0.
    pub fn bit(&self) -> bool {
        self.z1 > self.z0
    }

    pub fn winner(&self) -> f64 {
        self.z0.max(self.z1)
    }

    pub fn loser(&self) -> f64 {
        self.z0.min(self.z1)
    }

    pub fn contrast(&self) -> f64 {
        let s = self.z0 + self.z1;
        if s > 0.0 {
            (self.z1 - self.z0).abs() / s
        } else {
            0.0
        }
    }
}

/// Per-chip decision with its soft tone energies (both images summed).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChipDecision {
    pub chip: bool,
    pub e0: f64,
    pub e1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyncResult {
    pub offset: usize,
    pub score: usize,
    pub contrast: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DemodResult {
    pub payload: Option<BitVector>,
    pub chip_energies: Vec<(f64, f64)>,
    pub bit_stats: Vec<BitStat>,
    pub snr_db: Option<f64>,
    pub rss_dbm: Option<f64>,
    pub sync_offset: Option<usize>,
}

impl DemodResult {
    fn empty() -> Self {
        Self {
            payload: None,
            chip_energies: Vec::new(),
            bit_stats: Vec::new(),
            snr_db: None,
            rss_dbm: None,
            sync_offset: None,
        }
    }
}

/// Subtracts the complex mean (static carrier leakage).
pub fn remove_direct_path(y: &ComplexWaveform) -> ComplexWaveform {
    let mean = y.samples().iter().sum::<Complex64>() / y.len().max(1) as f64;
    let samples = y.samples().iter().map(|s| s - mean).collect();
    ComplexWaveform::new(samples, y.sample_rate(), y.center_frequency())
        .expect("finite input stays finite")
}

/// Sliding bit detector over one capture.
#[derive(Debug, Clone)]
pub struct Detector {
    cfg: DemodConfig,
    spc: usize,
    len: usize,
    banks: [ToneBank; 2],
    weights: [Complex64; 2],
}

impl Detector {
    pub fn new(y: &ComplexWaveform, cfg: &DemodConfig) -> Result<Self> {
        cfg.validate()?;
        if (y.sample_rate() - cfg.sample_rate).abs() > 1e-9 {
            return Err(Error::SampleRateMismatch {
                left: y.sample_rate(),
                right: cfg.sample_rate,
            });
        }
        let banks = [cfg.f0, cfg.f1].map(|f| ToneBank::new(y.samples(), f, cfg.sample_rate));
        Ok(Self {
            spc: cfg.samples_per_chip(),
            len: y.len(),
            weights: cfg.templates().map(|b| b.conj()),
            cfg: cfg.clone(),
            banks,
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn config(&self) -> &DemodConfig {
        &self.cfg
    }

    /// Statistics for the bit whose first chip starts at `start`.
    pub fn bit_stat(&self, start: usize) -> BitStat {
        let n = self.spc;
        let [w0, w1] = self.weights;
        let first = [self.banks[0].bin(start, n), self.banks[1].bin(start, n)];
        let second = [self.banks[0].bin(start + n, n), self.banks[1].bin(start + n, n)];
        BitStat {
            z1: (first[1] * w1 + second[0] * w0).norm_sqr(),
            z0: (first[0] * w0 + second[1] * w1).norm_sqr(),
        }
    }

    fn fits(&self, start: usize, bits: usize) -> bool {
        start + 2 * self.spc * bits <= self.len
    }

    /// Bit statistics for `bits` consecutive bits.
    pub fn bit_stats(&self, start: usize, bits: usize) -> Result<Vec<BitStat>> {
        if !self.fits(start, bits) {
            return Err(Error::WindowOutOfBounds {
                start,
                end: start + 2 * self.spc * bits,
                len: self.len,
            });
        }
        Ok((0..bits).map(|i| self.bit_stat(start + 2 * self.spc * i)).collect())
    }

    fn preamble_check(&self, start: usize) -> (usize, f64) {
        let mut score = 0;
        let mut contrast = 0.0;
        for (i, &p) in BARKER7.iter().enumerate() {
            let st = self.bit_stat(start + 2 * self.spc * i);
            score += usize::from(st.bit() == p);
            contrast += st.contrast();
        }
        (score, contrast / BARKER7.len() as f64)
    }

    /// Coarse search at quarter-chip steps over offsets where a whole frame
    /// fits. Returns the passing offset with the best score, then contrast;
    /// ties go to the earliest.
    pub fn sync(&self) -> Option<SyncResult> {
        let frame_bits = self.cfg.frame_len();
        let q = (self.spc / 4).max(1);
        let mut best: Option<SyncResult> = None;
        let mut o = 0;
        while self.fits(o, frame_bits) {
            let (score, contrast) = self.preamble_check(o);
            if score >= self.cfg.sync_threshold && contrast >= self.cfg.sync_contrast {
                let c = SyncResult { offset: o, score, contrast };
                if best.is_none_or(|b| (c.score, c.contrast) > (b.score, b.contrast)) {
                    best = Some(c);
                }
            }
            o += q;
        }
        best
    }

    /// Sample-level timing: maximises the preamble energy under the known
    /// preamble bits within a quarter chip of `coarse`.
    pub fn refine(&self, coarse: usize) -> usize {
        let q = (self.spc / 4).max(1);
        let frame_bits = self.cfg.frame_len();
        let energy = |s: usize| -> f64 {
            BARKER7
                .iter()
                .enumerate()
                .map(|(i, &p)| {
                    let st = self.bit_stat(s + 2 * self.spc * i);
                    if p {
                        st.z1
                    } else {
                        st.z0
                    }
                })
                .sum()
        };
        let mut best = (coarse, energy(coarse));
        for s in coarse.saturating_sub(q)..=coarse + q {
            if !self.fits(s, frame_bits) {
                break;
            }
            let e = energy(s);
            if e > best.1 {
                best = (s, e);
            }
        }
        best.0
    }

    /// Decodes the frame at `start`; returns the payload and all bit stats.
    pub fn decode_at(&self, start: usize) -> Result<(BitVector, Vec<BitStat>)> {
        let stats = self.bit_stats(start, self.cfg.frame_len())?;
        let payload = stats[BARKER7.len()..].iter().map(BitStat::bit).collect::<Vec<_>>();
        Ok((BitVector::new(payload), stats))
    }
}

/// Per-chip non-coherent decisions over the frame starting at `frame_start`.
/// Each tone's energy sums its `+f` and `−f` images.
pub fn fsk_chip_detect(y: &ComplexWaveform, cfg: &DemodConfig, frame_start: usize) -> Result<Vec<ChipDecision>> {
    cfg.validate()?;
    let spc = cfg.samples_per_chip();
    let chips = 2 * cfg.frame_len();
    if frame_start + chips * spc > y.len() {
        return Err(Error::WindowOutOfBounds {
            start: frame_start,
            end: frame_start + chips * spc,
            len: y.len(),
        });
    }
    let window = &y.samples()[frame_start..frame_start + chips * spc];
    let bins = |f: f64| block_bins(window, f, cfg.sample_rate, spc);
    let [p0, n0, p1, n1] = [cfg.f0, -cfg.f0, cfg.f1, -cfg.f1].map(bins);
    let e = |pos: &[Complex64], neg: &[Complex64], k: usize| (pos[k].norm_sqr() + neg[k].norm_sqr()) / spc as f64;
    Ok((0..chips)
        .map(|k| {
            let (e0, e1) = (e(&p0, &n0, k), e(&p1, &n1, k));
            ChipDecision { chip: e1 > e0, e0, e1 }
        })
        .collect())
}

/// `10 → 1`, `01 → 0`; an invalid pair picks the bit whose chip pattern
/// collects more energy, `E1(a) + E0(b)` against `E0(a) + E1(b)`, ties to 0.
pub fn manchester_decode(chips: &[ChipDecision]) -> Result<BitVector> {
    if chips.len() % 2 != 0 {
        return Err(invalid("chips", "Manchester input must have even length"));
    }
    Ok(BitVector::new(
        chips
            .chunks(2)
            .map(|p| match (p[0].chip, p[1].chip) {
                (true, false) => true,
                (false, true) => false,
                _ => p[0].e1 + p[1].e0 > p[0].e0 + p[1].e1,
            })
            .collect(),
    ))
}

/// Frame search on a raw capture: returns the timing of the first frame.
pub fn sync_barker(y: &ComplexWaveform, cfg: &DemodConfig) -> Option<SyncResult> {
    let clean = remove_direct_path(y);
    Detector::new(&clean, cfg).ok()?.sync()
}

/// Pools decision-directed SNR evidence over many bits.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SnrAccumulator {
    win: f64,
    lose: f64,
    count: u64,
}

impl SnrAccumulator {
    pub fn add(&mut self, st: &BitStat) {
        self.win += st.winner();
        self.lose += st.loser();
        self.count += 1;
    }

    pub fn merge(&mut self, other: &SnrAccumulator) {
        self.win += other.win;
        self.lose += other.lose;
        self.count += other.count;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    /// `(mean winner − mean loser) / mean loser` in dB, capped.
    pub fn snr_db(&self, cap_db: f64) -> Result<f64> {
        if self.count == 0 {
            return Err(Error::NoFrame);
        }
        if self.lose <= 0.0 {
            return Ok(cap_db);
        }
        let ratio = (self.win - self.lose) / self.lose;
        Ok((10.0 * ratio.max(1e-12).log10()).min(cap_db))
    }
}

/// SNR of the frame starting at `frame_start`.
pub fn measure_snr(y: &ComplexWaveform, cfg: &DemodConfig, frame_start: usize) -> Result<f64> {
    let det = Detector::new(&remove_direct_path(y), cfg)?;
    let stats = det.bit_stats(frame_start, cfg.frame_len())?;
    let mut acc = SnrAccumulator::default();
    stats.iter().for_each(|s| acc.add(s));
    acc.snr_db(cfg.snr_cap_db)
}

/// Backscatter power over `span` after mean removal, minus the noise power
/// seen in a carrier-muted capture. Linear watts, unclamped.
pub fn measure_rss_watts(y: &ComplexWaveform, span: Range<usize>, muted: Option<&ComplexWaveform>) -> f64 {
    let end = span.end.min(y.len());
    let start = span.start.min(end);
    let s = &y.samples()[start..end];
    if s.is_empty() {
        return 0.0;
    }
    let mean = s.iter().sum::<Complex64>() / s.len() as f64;
    let power = s.iter().map(|v| (v - mean).norm_sqr()).sum::<f64>() / s.len() as f64;
    let noise = muted.map(|m| m.mean_power(0, m.len())).unwrap_or(0.0);
    power - noise
}

/// Clamps a linear RSS estimate at the noise floor and converts to dBm.
pub fn clamp_rss_dbm(watts: f64, noise_floor_dbm: Option<f64>) -> f64 {
    let floor = noise_floor_dbm.map(crate::bc_link::dbm_to_watts).unwrap_or(1e-30);
    watts_to_dbm(watts.max(floor))
}

/// RSS in dBm over `span`, floor-clamped.
pub fn measure_rss(
    y: &ComplexWaveform,
    span: Range<usize>,
    muted: Option<&ComplexWaveform>,
    noise_floor_dbm: Option<f64>,
) -> f64 {
    clamp_rss_dbm(measure_rss_watts(y, span, muted), noise_floor_dbm)
}

/// Fraction of differing bits; an undecoded frame counts as all wrong.
pub fn ber(reference: &BitVector, decoded: Option<&BitVector>) -> Result<f64> {
    if reference.is_empty() {
        return Err(invalid("reference", "empty bit vector"));
    }
    Ok(bit_errors(reference, decoded)? as f64 / reference.len() as f64)
}

pub fn bit_errors(reference: &BitVector, decoded: Option<&BitVector>) -> Result<usize> {
    match decoded {
        None => Ok(reference.len()),
        Some(d) if d.len() != reference.len() => Err(Error::LengthMismatch {
            expected: reference.len(),
            actual: d.len(),
        }),
        Some(d) => Ok(reference
            .bits()
            .iter()
            .zip(d.bits())
            .filter(|(a, b)| a != b)
            .count()),
    }
}

fn finish(det: &Detector, y: &ComplexWaveform, start: usize) -> Result<DemodResult> {
    let cfg = det.config();
    let (payload, bit_stats) = det.decode_at(start)?;
    let chip_energies = fsk_chip_detect(y, cfg, start)?.iter().map(|c| (c.e0, c.e1)).collect();
    let mut acc = SnrAccumulator::default();
    bit_stats.iter().for_each(|s| acc.add(s));
    Ok(DemodResult {
        payload: Some(payload),
        chip_energies,
        bit_stats,
        snr_db: acc.snr_db(cfg.snr_cap_db).ok(),
        rss_dbm: None,
        sync_offset: Some(start),
    })
}

/// Full receiver: direct-path removal, sync, timing refinement, decoding.
pub fn demodulate(y: &ComplexWaveform, cfg: &DemodConfig) -> Result<DemodResult> {
    let clean = remove_direct_path(y);
    let det = Detector::new(&clean, cfg)?;
    match det.sync() {
        Some(s) => finish(&det, &clean, det.refine(s.offset)),
        None => Ok(DemodResult::empty()),
    }
}

/// Receiver with known frame timing.
pub fn demodulate_at(y: &ComplexWaveform, cfg: &DemodConfig, frame_start: usize) -> Result<DemodResult> {
    let clean = remove_direct_path(y);
    let det = Detector::new(&clean, cfg)?;
    finish(&det, &clean, frame_start)
}
