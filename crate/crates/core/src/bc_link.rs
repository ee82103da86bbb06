//! RF side: bistatic backscatter link budget and the complex-baseband
//! capture seen by the receiver (backscatter, direct path, noise).

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::sigcore::{add_awgn, ComplexWaveform, SimRng};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

pub fn dbm_to_watts(dbm: f64) -> f64 {
    1e-3 * 10f64.powf(dbm / 10.0)
}

pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * (watts / 1e-3).log10()
}

#[derive(Debug, Clone, PartialEq)]
pub struct BcGeometry {
    /// RF source to device, metres.
    pub d_tx_bd: f64,
    /// Device to receiver, metres.
    pub d_rx_bd: f64,
    pub g_tx: f64,
    pub g_bd: f64,
    pub g_rx: f64,
    /// Carrier wavelength, metres.
    pub wavelength: f64,
    /// Modulation factor M of the load switching.
    pub mod_factor: f64,
}

impl Default for BcGeometry {
    fn default() -> Self {
        Self {
            d_tx_bd: 0.5,
            d_rx_bd: 0.5,
            g_tx: 1.0,
            g_bd: 1.0,
            g_rx: 1.0,
            wavelength: 0.12491,
            mod_factor: 1.0,
        }
    }
}

impl BcGeometry {
    pub fn at_distance(&self, d_rx_bd: f64) -> Self {
        Self {
            d_rx_bd,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("d_tx_bd", self.d_tx_bd),
            ("d_rx_bd", self.d_rx_bd),
            ("g_tx", self.g_tx),
            ("g_bd", self.g_bd),
            ("g_rx", self.g_rx),
            ("wavelength", self.wavelength),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(name, "must be positive"));
            }
        }
        if !(self.mod_factor > 0.0 && self.mod_factor <= 1.0) {
            return Err(invalid("mod_factor", "must lie in (0, 1]"));
        }
        Ok(())
    }
}

/// Ambient continuous-wave source.
#[derive(Debug, Clone, PartialEq)]
pub struct RfSourceConfig {
    pub p_tx_dbm: f64,
    pub frequency: f64,
    pub phase: f64,
}

impl Default for RfSourceConfig {
    fn default() -> Self {
        Self {
            p_tx_dbm: 0.0,
            frequency: 2.4e9,
            phase: 0.0,
        }
    }
}

impl RfSourceConfig {
    pub fn with_power(&self, p_tx_dbm: f64) -> Self {
        Self {
            p_tx_dbm,
            ..self.clone()
        }
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.frequency
    }
}

/// Source-to-receiver leakage.
#[derive(Debug, Clone, PartialEq)]
pub enum DirectPath {
    /// Free-space gain over this distance in metres.
    Friis { d_tx_rx: f64 },
    /// Explicit power gain.
    Gain(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RxFrontEndConfig {
    pub sample_rate: f64,
    /// Total noise in the capture bandwidth. `None` is a noiseless receiver.
    pub noise_floor_dbm: Option<f64>,
    pub direct_path: DirectPath,
    pub carrier_freq_offset: f64,
    /// Length of the carrier-muted capture used to estimate noise power.
    pub noise_capture_len: usize,
}

impl Default for RxFrontEndConfig {
    fn default() -> Self {
        Self {
            sample_rate: 200e3,
            noise_floor_dbm: Some(-90.0),
            direct_path: DirectPath::Friis { d_tx_rx: 0.5 },
            carrier_freq_offset: 0.0,
            noise_capture_len: 1000,
        }
    }
}

impl RxFrontEndConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sample_rate > 0.0) {
            return Err(invalid("sample_rate", "must be positive"));
        }
        match self.direct_path {
            DirectPath::Friis { d_tx_rx } if !(d_tx_rx > 0.0) => {
                Err(invalid("d_tx_rx", "must be positive"))
            }
            DirectPath::Gain(g) if !(g >= 0.0) => Err(invalid("direct_path_gain", "must be non-negative")),
            _ => Ok(()),
        }
    }

    /// Per-sample noise variance, watts.
    pub fn noise_power(&self) -> f64 {
        self.noise_floor_dbm.map(dbm_to_watts).unwrap_or(0.0)
    }

    pub fn direct_path_gain(&self, g: &BcGeometry) -> f64 {
        match self.direct_path {
            DirectPath::Friis { d_tx_rx } => {
                g.g_tx * g.g_rx * (g.wavelength / (4.0 * PI * d_tx_rx)).powi(2)
            }
            DirectPath::Gain(gain) => gain,
        }
    }
}

/// Linear backscatter power `P·g_tx·g_bd²·g_rx·λ⁴·M / ((4π)⁴·d1²·d2²)`.
fn budget_watts(p_tx_dbm: f64, g: &BcGeometry, m: f64) -> f64 {
    dbm_to_watts(p_tx_dbm) * g.g_tx * g.g_bd * g.g_bd * g.g_rx * g.wavelength.powi(4) * m
        / ((4.0 * PI).powi(4) * g.d_tx_bd.powi(2) * g.d_rx_bd.powi(2))
}

/// Bistatic backscatter link budget, dBm.
pub fn link_budget_rss(src: &RfSourceConfig, g: &BcGeometry) -> f64 {
    watts_to_dbm(budget_watts(src.p_tx_dbm, g, g.mod_factor))
}

/// Receiver capture `A·Γ[n]·e^{jθ} + A_dp·e^{jθ_dp} + noise`. The modulation
/// factor lives in the swing of Γ, so `A²` is the budget at `M = 1`. Both
/// carrier phases are drawn from `rng` first, then the noise.
pub fn backscatter_capture(
    gamma: &ComplexWaveform,
    src: &RfSourceConfig,
    g: &BcGeometry,
    fe: &RxFrontEndConfig,
    rng: &mut SimRng,
) -> Result<ComplexWaveform> {
    if (gamma.sample_rate() - fe.sample_rate).abs() > 1e-9 {
        return Err(Error::SampleRateMismatch {
            left: gamma.sample_rate(),
            right: fe.sample_rate,
        });
    }
    g.validate()?;
    fe.validate()?;
    let theta = rng.phase();
    let theta_dp = rng.phase();
    let a_bs = Complex64::from_polar(budget_watts(src.p_tx_dbm, g, 1.0).sqrt(), theta + src.phase);
    let dp = Complex64::from_polar(
        (dbm_to_watts(src.p_tx_dbm) * fe.direct_path_gain(g)).sqrt(),
        theta_dp + src.phase,
    );
    let step = 2.0 * PI * fe.carrier_freq_offset / fe.sample_rate;
    let samples = gamma
        .samples()
        .iter()
        .enumerate()
        .map(|(n, &gm)| {
            let y = a_bs * gm + dp;
            if step == 0.0 {
                y
            } else {
                y * Complex64::from_polar(1.0, step * n as f64)
            }
        })
        .collect();
    let clean = ComplexWaveform::new(samples, fe.sample_rate, src.frequency)?;
    add_awgn(&clean, fe.noise_power(), rng)
}

/// Capture taken with the ambient carrier muted: receiver noise only.
pub fn muted_capture(fe: &RxFrontEndConfig, center_frequency: f64, rng: &mut SimRng) -> Result<ComplexWaveform> {
    let zeros = vec![Complex64::new(0.0, 0.0); fe.noise_capture_len.max(1)];
    let clean = ComplexWaveform::new(zeros, fe.sample_rate, center_frequency)?;
    add_awgn(&clean, fe.noise_power(), rng)
}
