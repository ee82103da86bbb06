//! Signal containers, tone synthesis, noise injection and single-bin tone energy.
//!
//! Amplitudes in this module are unit-normalised. Physical scaling is applied by
//! the channel and metric modules.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Error, Result};

/// Name of the generator behind [`SimRng`], recorded in run metadata.
pub const RNG_ALGORITHM: &str = "ChaCha8 (rand_chacha 0.9, rand_distr 0.5 ziggurat normals)";

/// Uniformly sampled real signal (optical intensity, photovoltage, ...).
#[derive(Debug, Clone, PartialEq)]
pub struct RealWaveform {
    samples: Vec<f64>,
    sample_rate: f64,
}

impl RealWaveform {
    pub fn new(samples: Vec<f64>, sample_rate: f64) -> Result<Self> {
        check_rate(sample_rate)?;
        if samples.is_empty() {
            return Err(invalid("samples", "a real waveform needs at least one sample"));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(invalid("samples", format!("sample {i} is not finite")));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate
    }

    pub fn mean(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.samples.len() as f64
    }

    /// Same sample rate, samples replaced. Used by pure transforms.
    pub(crate) fn with_samples(&self, samples: Vec<f64>) -> Self {
        Self {
            samples,
            sample_rate: self.sample_rate,
        }
    }

    pub fn to_complex(&self, center_frequency: f64) -> ComplexWaveform {
        ComplexWaveform {
            samples: self.samples.iter().map(|&s| Complex64::new(s, 0.0)).collect(),
            sample_rate: self.sample_rate,
            center_frequency,
        }
    }
}

/// Complex baseband capture around `center_frequency`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexWaveform {
    samples: Vec<Complex64>,
    sample_rate: f64,
    center_frequency: f64,
}

impl ComplexWaveform {
    pub fn new(samples: Vec<Complex64>, sample_rate: f64, center_frequency: f64) -> Result<Self> {
        check_rate(sample_rate)?;
        if let Some(i) = samples.iter().position(|s| !(s.re.is_finite() && s.im.is_finite())) {
            return Err(invalid("samples", format!("sample {i} is not finite")));
        }
        Ok(Self {
            samples,
            sample_rate,
            center_frequency,
        })
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<Complex64> {
        self.samples
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn center_frequency(&self) -> f64 {
        self.center_frequency
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub(crate) fn with_samples(&self, samples: Vec<Complex64>) -> Self {
        Self {
            samples,
            sample_rate: self.sample_rate,
            center_frequency: self.center_frequency,
        }
    }

    /// Appends `other` after `self`. Both must share sample rate.
    pub fn concat(mut self, other: &ComplexWaveform) -> Result<Self> {
        if self.sample_rate != other.sample_rate {
            return Err(Error::SampleRateMismatch {
                left: self.sample_rate,
                right: other.sample_rate,
            });
        }
        self.samples.extend_from_slice(&other.samples);
        Ok(self)
    }

    /// Mean power over `[start, end)`.
    pub fn mean_power(&self, start: usize, end: usize) -> f64 {
        let w = &self.samples[start..end];
        w.iter().map(|s| s.norm_sqr()).sum::<f64>() / w.len().max(1) as f64
    }
}

fn check_rate(sample_rate: f64) -> Result<()> {
    if !(sample_rate.is_finite() && sample_rate > 0.0) {
        return Err(invalid("sample_rate", format!("{sample_rate} is not positive")));
    }
    Ok(())
}

/// Seeded deterministic generator. Identical seeds give identical streams.
#[derive(Debug, Clone)]
pub struct SimRng {
    seed: u64,
    inner: ChaCha8Rng,
}

impl SimRng {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Standard normal draw.
    pub fn normal(&mut self) -> f64 {
        self.inner.sample(StandardNormal)
    }

    pub fn bit(&mut self) -> bool {
        self.inner.random::<bool>()
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    /// Uniform integer in `[0, n)`.
    pub fn below(&mut self, n: usize) -> usize {
        if n <= 1 {
            0
        } else {
            self.inner.random_range(0..n)
        }
    }

    pub fn phase(&mut self) -> f64 {
        2.0 * PI * self.uniform()
    }
}

/// Derives an independent stream seed from a base seed and a list of
/// coordinates (splitmix64 finaliser chained over the words).
pub fn derive_seed(base: u64, words: &[u64]) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    words.iter().fold(mix(base), |acc, &w| mix(acc ^ mix(w)))
}

/// `sin(2π·freq·n/fs + phase)` for `round(duration·fs)` samples.
pub fn make_tone(freq: f64, duration: f64, sample_rate: f64, phase: f64) -> Result<RealWaveform> {
    check_rate(sample_rate)?;
    check_tone(freq, sample_rate)?;
    if !(duration > 0.0 && duration.is_finite()) {
        return Err(invalid("duration", format!("{duration} is not positive")));
    }
    let len = (duration * sample_rate).round() as usize;
    if len == 0 {
        return Err(invalid("duration", "shorter than one sample"));
    }
    let w = 2.0 * PI * freq / sample_rate;
    let samples = (0..len).map(|n| (w * n as f64 + phase).sin()).collect();
    RealWaveform::new(samples, sample_rate)
}

fn check_tone(freq: f64, sample_rate: f64) -> Result<()> {
    let nyquist = sample_rate / 2.0;
    if !(freq > 0.0) {
        return Err(invalid("freq", format!("{freq} Hz is not positive")));
    }
    if freq >= nyquist {
        return Err(Error::AboveNyquist { freq, nyquist });
    }
    Ok(())
}

/// Waveforms that can receive additive white Gaussian noise.
pub trait NoiseTarget: Sized {
    fn with_noise(&self, noise_power: f64, rng: &mut SimRng) -> Self;
}

impl NoiseTarget for RealWaveform {
    fn with_noise(&self, noise_power: f64, rng: &mut SimRng) -> Self {
        let sd = noise_power.sqrt();
        let samples = self.samples.iter().map(|&s| s + sd * rng.normal()).collect();
        self.with_samples(samples)
    }
}

impl NoiseTarget for ComplexWaveform {
    fn with_noise(&self, noise_power: f64, rng: &mut SimRng) -> Self {
        // circular: half the variance on each rail
        let sd = (noise_power / 2.0).sqrt();
        let samples = self
            .samples
            .iter()
            .map(|&s| {
                let re = rng.normal();
                let im = rng.normal();
                s + Complex64::new(sd * re, sd * im)
            })
            .collect();
        self.with_samples(samples)
    }
}

/// Adds zero-mean Gaussian noise with per-sample variance `noise_power`.
pub fn add_awgn<W: NoiseTarget + Clone>(w: &W, noise_power: f64, rng: &mut SimRng) -> Result<W> {
    if !(noise_power >= 0.0 && noise_power.is_finite()) {
        return Err(invalid("noise_power", format!("{noise_power} is negative or not finite")));
    }
    if noise_power == 0.0 {
        return Ok(w.clone());
    }
    Ok(w.with_noise(noise_power, rng))
}

/// Read access to samples as complex values, so tone statistics work on both
/// real photovoltages and complex captures.
pub trait ToneSource {
    fn sample_rate(&self) -> f64;
    fn len(&self) -> usize;
    fn at(&self, i: usize) -> Complex64;
}

impl ToneSource for RealWaveform {
    fn sample_rate(&self) -> f64 {
        self.sample_rate
    }
    fn len(&self) -> usize {
        self.samples.len()
    }
    fn at(&self, i: usize) -> Complex64 {
        Complex64::new(self.samples[i], 0.0)
    }
}

impl ToneSource for ComplexWaveform {
    fn sample_rate(&self) -> f64 {
        self.sample_rate
    }
    fn len(&self) -> usize {
        self.samples.len()
    }
    fn at(&self, i: usize) -> Complex64 {
        self.samples[i]
    }
}

/// Single-bin rectangular-window DFT energy:
/// `|Σ w[start+n]·e^{-j2π·freq·n/fs}|² / len`.
pub fn tone_energy<W: ToneSource>(w: &W, freq: f64, start: usize, len: usize) -> Result<f64> {
    let fs = w.sample_rate();
    if freq.abs() >= fs / 2.0 {
        return Err(Error::AboveNyquist {
            freq,
            nyquist: fs / 2.0,
        });
    }
    let end = start.checked_add(len).unwrap_or(usize::MAX);
    if len == 0 || end > w.len() {
        return Err(Error::WindowOutOfBounds {
            start,
            end,
            len: w.len(),
        });
    }
    let step = -2.0 * PI * freq / fs;
    let acc: Complex64 = (0..len)
        .map(|n| w.at(start + n) * Complex64::from_polar(1.0, step * n as f64))
        .sum();
    Ok(acc.norm_sqr() / len as f64)
}

/// Single-bin DFTs of consecutive `block`-sample windows, each with the
/// template phase restarting at the window start.
pub fn block_bins(samples: &[Complex64], freq: f64, sample_rate: f64, block: usize) -> Vec<Complex64> {
    let omega = -2.0 * PI * freq / sample_rate;
    let phasors: Vec<Complex64> = (0..block).map(|n| Complex64::from_polar(1.0, omega * n as f64)).collect();
    samples
        .chunks_exact(block.max(1))
        .map(|w| w.iter().zip(&phasors).map(|(x, p)| x * p).sum())
        .collect()
}

/// Phasor table for `e^{-j2π·freq·m/fs}`. When `freq/fs` is a ratio with a
/// small denominator the sequence is periodic and is tabulated once.
#[derive(Debug, Clone)]
pub struct Twiddle {
    omega: f64,
    table: Vec<Complex64>,
}

impl Twiddle {
    const MAX_PERIOD: usize = 8192;

    pub fn new(freq: f64, sample_rate: f64) -> Self {
        let ratio = freq / sample_rate;
        let omega = -2.0 * PI * ratio;
        let period = (1..=Self::MAX_PERIOD).find(|&p| {
            let x = ratio * p as f64;
            (x - x.round()).abs() < 1e-9
        });
        let table = period
            .map(|p| {
                (0..p)
                    .map(|m| Complex64::from_polar(1.0, omega * m as f64))
                    .collect()
            })
            .unwrap_or_default();
        Self { omega, table }
    }

    #[inline]
    pub fn at(&self, m: usize) -> Complex64 {
        if self.table.is_empty() {
            Complex64::from_polar(1.0, self.omega * m as f64)
        } else {
            self.table[m % self.table.len()]
        }
    }
}

/// Prefix sums of `x[m]·e^{-jωm}` so that any window's single-bin DFT
/// (template phase restarting at the window start) is O(1).
#[derive(Debug, Clone)]
pub struct ToneBank {
    prefix: Vec<Complex64>,
    twiddle: Twiddle,
}

impl ToneBank {
    pub fn new(samples: &[Complex64], freq: f64, sample_rate: f64) -> Self {
        let twiddle = Twiddle::new(freq, sample_rate);
        let mut prefix = vec![Complex64::new(0.0, 0.0); samples.len() + 1];
        let mut acc = Complex64::new(0.0, 0.0);
        if twiddle.table.is_empty() {
            for (m, &x) in samples.iter().enumerate() {
                acc += x * twiddle.at(m);
                prefix[m + 1] = acc;
            }
        } else {
            let period = twiddle.table.len();
            for (chunk, out) in samples.chunks(period).zip(prefix[1..].chunks_mut(period)) {
                for ((&x, &t), o) in chunk.iter().zip(&twiddle.table).zip(out) {
                    acc += x * t;
                    *o = acc;
                }
            }
        }
        Self { prefix, twiddle }
    }

    /// Number of samples covered.
    pub fn len(&self) -> usize {
        self.prefix.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `Σ_{n<len} x[start+n]·e^{-jωn}`.
    #[inline]
    pub fn bin(&self, start: usize, len: usize) -> Complex64 {
        let raw = self.prefix[start + len] - self.prefix[start];
        // undo the absolute phase of the window start
        raw * self.twiddle.at(start).conj()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FS: f64 = 200_000.0;

    #[test]
    fn six_khz_chip_has_three_cycles() {
        let t = make_tone(6000.0, 5e-4, FS, 0.0).unwrap();
        assert_eq!(t.len(), 100);
        assert_eq!(t.samples()[0], 0.0);
        // sample 100 would close the third cycle; sample 33.33 does not exist,
        // check periodicity over the full chip instead
        let next = (2.0 * PI * 6000.0 * 100.0 / FS).sin();
        assert!(next.abs() < 1e-9);
    }

    #[test]
    fn eight_khz_last_sample_near_zero() {
        let t = make_tone(8000.0, 5e-4, FS, 0.0).unwrap();
        assert_eq!(t.len(), 100);
        // 4 full cycles: the sequence is 25-periodic, sample 99 = sample -1
        let last = t.samples()[99];
        let expected = (2.0 * PI * 8000.0 * 99.0 / FS).sin();
        assert!((last - expected).abs() < 1e-12);
        let wrap = (2.0 * PI * 8000.0 * 100.0 / FS).sin();
        assert!(wrap.abs() < 1e-9);
    }

    #[test]
    fn cosine_phase_starts_at_one() {
        let t = make_tone(6000.0, 5e-4, FS, PI / 2.0).unwrap();
        assert!((t.samples()[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn make_tone_rejects_bad_inputs() {
        assert!(matches!(
            make_tone(100_000.0, 1e-3, FS, 0.0),
            Err(Error::AboveNyquist { .. })
        ));
        assert!(make_tone(6000.0, 0.0, FS, 0.0).is_err());
        assert!(make_tone(6000.0, -1.0, FS, 0.0).is_err());
    }

    #[test]
    fn zero_noise_is_identity() {
        let t = make_tone(6000.0, 1e-3, FS, 0.3).unwrap();
        let mut rng = SimRng::new(1);
        assert_eq!(add_awgn(&t, 0.0, &mut rng).unwrap(), t);
        assert!(add_awgn(&t, -1.0, &mut rng).is_err());
    }

    #[test]
    fn noise_variance_law_of_large_numbers() {
        let z = RealWaveform::new(vec![0.0; 1_000_000], FS).unwrap();
        let mut rng = SimRng::new(7);
        let n = add_awgn(&z, 1.0, &mut rng).unwrap();
        let var = n.samples().iter().map(|x| x * x).sum::<f64>() / n.len() as f64;
        assert!((var - 1.0).abs() < 0.01, "variance {var}");

        let zc = ComplexWaveform::new(vec![Complex64::new(0.0, 0.0); 1_000_000], FS, 0.0).unwrap();
        let nc = add_awgn(&zc, 1.0, &mut rng).unwrap();
        let p = nc.mean_power(0, nc.len());
        assert!((p - 1.0).abs() < 0.01, "complex power {p}");
    }

    #[test]
    fn same_seed_same_noise() {
        let z = RealWaveform::new(vec![0.0; 64], FS).unwrap();
        let a = add_awgn(&z, 2.0, &mut SimRng::new(99)).unwrap();
        let b = add_awgn(&z, 2.0, &mut SimRng::new(99)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn tone_energy_of_one_chip() {
        let t = make_tone(6000.0, 5e-4, FS, 0.0).unwrap();
        let e6 = tone_energy(&t, 6000.0, 0, 100).unwrap();
        let e8 = tone_energy(&t, 8000.0, 0, 100).unwrap();
        assert!((e6 - 25.0).abs() < 1e-9, "{e6}");
        assert!(e8 < 1e-9, "{e8}");
        assert!(e8 < 1e-12 * e6);
    }

    #[test]
    fn tone_energy_zero_input() {
        let z = RealWaveform::new(vec![0.0; 200], FS).unwrap();
        for f in [1000.0, 6000.0, 8000.0, 50_000.0] {
            assert_eq!(tone_energy(&z, f, 10, 100).unwrap(), 0.0);
        }
    }

    #[test]
    fn midpoint_tone_leaks_equally() {
        let s = (0..100)
            .map(|n| Complex64::from_polar(1.0, 2.0 * PI * 7000.0 * n as f64 / FS))
            .collect();
        let t = ComplexWaveform::new(s, FS, 0.0).unwrap();
        let e6 = tone_energy(&t, 6000.0, 0, 100).unwrap();
        let e8 = tone_energy(&t, 8000.0, 0, 100).unwrap();
        assert!(((e6 - e8) / e6).abs() < 1e-9, "{e6} vs {e8}");
    }

    #[test]
    fn tone_energy_window_checks() {
        let t = make_tone(6000.0, 5e-4, FS, 0.0).unwrap();
        assert!(matches!(
            tone_energy(&t, 6000.0, 50, 100),
            Err(Error::WindowOutOfBounds { .. })
        ));
        assert!(tone_energy(&t, 150_000.0, 0, 10).is_err());
    }

    #[test]
    fn tone_bank_matches_direct_sum() {
        let mut rng = SimRng::new(3);
        let x: Vec<Complex64> = (0..1000)
            .map(|_| Complex64::new(rng.normal(), rng.normal()))
            .collect();
        let w = ComplexWaveform::new(x.clone(), FS, 0.0).unwrap();
        for f in [6000.0, 8000.0, 6123.4] {
            let bank = ToneBank::new(&x, f, FS);
            for start in [0usize, 17, 333, 900] {
                let direct = tone_energy(&w, f, start, 100).unwrap();
                let fast = bank.bin(start, 100).norm_sqr() / 100.0;
                assert!((direct - fast).abs() < 1e-9 * direct.max(1.0), "{f} {start}");
            }
        }
    }

    #[test]
    fn derived_seeds_differ_per_coordinate() {
        let a = derive_seed(1, &[1, 2, 3]);
        assert_eq!(a, derive_seed(1, &[1, 2, 3]));
        assert_ne!(a, derive_seed(1, &[1, 2, 4]));
        assert_ne!(a, derive_seed(2, &[1, 2, 3]));
        assert_ne!(derive_seed(0, &[1, 0]), derive_seed(0, &[0, 1]));
    }
}
