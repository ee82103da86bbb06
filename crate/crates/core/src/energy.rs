//! Harvesting chain: DC/AC split of the photovoltage, supercapacitor storage
//! and energy-neutrality bookkeeping.

use std::collections::BTreeMap;

use crate::error::{invalid, Error, Result};
use crate::sigcore::RealWaveform;
use crate::vlc_channel::PvFrontEnd;

/// Supercapacitor bank.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyStore {
    /// Farads. Four 0.1 F cells in parallel by default.
    pub capacitance: f64,
    pub voltage: f64,
    pub v_max: f64,
    pub v_min_operate: f64,
}

impl Default for EnergyStore {
    fn default() -> Self {
        Self {
            capacitance: 0.4,
            voltage: 2.5,
            v_max: 3.3,
            v_min_operate: 1.8,
        }
    }
}

impl EnergyStore {
    /// Bank of `count` identical cells, parallel or series.
    pub fn from_cells(cell_farads: f64, count: usize, series: bool) -> f64 {
        if series {
            cell_farads / count as f64
        } else {
            cell_farads * count as f64
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.capacitance > 0.0) {
            return Err(invalid("capacitance", "must be positive"));
        }
        if !(self.v_min_operate < self.v_max) {
            return Err(invalid("v_min_operate", "must be below v_max"));
        }
        if !(0.0..=self.v_max).contains(&self.voltage) {
            return Err(invalid("voltage", "must lie in [0, v_max]"));
        }
        Ok(())
    }

    /// Stored energy `½CV²`, joules.
    pub fn energy(&self) -> f64 {
        0.5 * self.capacitance * self.voltage * self.voltage
    }

    pub fn capacity(&self) -> f64 {
        0.5 * self.capacitance * self.v_max * self.v_max
    }

    pub fn powered(&self) -> bool {
        self.voltage >= self.v_min_operate
    }

    /// Energy released when discharging between two voltages.
    pub fn energy_between(&self, v_high: f64, v_low: f64) -> f64 {
        0.5 * self.capacitance * (v_high * v_high - v_low * v_low)
    }
}

/// Operating states of a device's MCU/front-end.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DeviceState {
    Sleep,
    Decode,
    Sense,
    Modulate,
}

impl DeviceState {
    pub const ALL: [DeviceState; 4] = [Self::Sleep, Self::Decode, Self::Sense, Self::Modulate];
}

/// Power draw per state, watts.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerProfile {
    draws: BTreeMap<DeviceState, f64>,
}

impl Default for PowerProfile {
    fn default() -> Self {
        Self::new([
            (DeviceState::Sleep, 1e-6),
            (DeviceState::Decode, 100e-6),
            (DeviceState::Sense, 500e-6),
            (DeviceState::Modulate, 50e-6),
        ])
        .expect("default draws are non-negative")
    }
}

impl PowerProfile {
    pub fn new(draws: impl IntoIterator<Item = (DeviceState, f64)>) -> Result<Self> {
        let draws: BTreeMap<_, _> = draws.into_iter().collect();
        if draws.values().any(|&p| !(p >= 0.0)) {
            return Err(invalid("power_profile", "draws must be non-negative"));
        }
        Ok(Self { draws })
    }

    pub fn draw(&self, state: DeviceState) -> f64 {
        self.draws.get(&state).copied().unwrap_or(0.0)
    }

    pub fn set(&mut self, state: DeviceState, watts: f64) -> Result<()> {
        if !(watts >= 0.0) {
            return Err(invalid("power_profile", "draws must be non-negative"));
        }
        self.draws.insert(state, watts);
        Ok(())
    }

    /// Average draw for a duty split.
    pub fn average(&self, duty: &BTreeMap<DeviceState, f64>) -> Result<f64> {
        let sum: f64 = duty.values().sum();
        if (sum - 1.0).abs() > 1e-9 || duty.values().any(|&d| d < 0.0) {
            return Err(Error::DutySum { sum });
        }
        Ok(duty.iter().map(|(s, d)| d * self.draw(*s)).sum())
    }
}

/// Low-pass filter separating the supply (DC) path from the signal path.
#[derive(Debug, Clone, PartialEq)]
pub struct LpfSpec {
    pub cutoff: f64,
    pub order: u32,
}

impl Default for LpfSpec {
    fn default() -> Self {
        Self {
            cutoff: 100.0,
            order: 1,
        }
    }
}

impl LpfSpec {
    pub fn validate(&self, lowest_tone: f64) -> Result<()> {
        if !(self.cutoff > 0.0 && self.cutoff < lowest_tone) {
            return Err(invalid("cutoff", "must lie between 0 and the lowest tone"));
        }
        if self.order == 0 {
            return Err(invalid("order", "must be positive"));
        }
        Ok(())
    }
}

/// One-pole section run in periodic steady state: the initial state is
/// chosen so the output is what the filter settles to when the block
/// repeats. DC gain is exactly one, so the block mean is preserved.
fn one_pole_steady_state(x: &[f64], alpha: f64) -> Vec<f64> {
    let decay = 1.0 - alpha;
    let mut y = 0.0;
    for &s in x {
        y = decay * y + alpha * s;
    }
    let residual = decay.powi(x.len() as i32);
    let mut state = if residual < 1.0 { y / (1.0 - residual) } else { 0.0 };
    x.iter()
        .map(|&s| {
            state = decay * state + alpha * s;
            state
        })
        .collect()
}

/// Splits a photovoltage into its supply level and the information-bearing
/// AC part `pv − lowpass(pv)`.
pub fn pv_split(pv: &RealWaveform, lpf: &LpfSpec) -> (f64, RealWaveform) {
    let alpha = 1.0 - (-std::f64::consts::TAU * lpf.cutoff / pv.sample_rate()).exp();
    let mut low = pv.samples().to_vec();
    for _ in 0..lpf.order.max(1) {
        low = one_pole_steady_state(&low, alpha);
    }
    let dc_level = low.iter().sum::<f64>() / low.len() as f64;
    let ac = pv
        .samples()
        .iter()
        .zip(&low)
        .map(|(p, l)| p - l)
        .collect();
    (dc_level, pv.with_samples(ac))
}

/// Power delivered to the harvester by the DC path.
pub fn harvested_power(dc_level: f64, fe: &PvFrontEnd) -> f64 {
    fe.conversion_efficiency * dc_level * dc_level / fe.load_resistance
}

/// Advances the store by `dt` seconds, clamping at empty and full.
pub fn harvest_step(store: &EnergyStore, p_harvest: f64, p_load: f64, dt: f64) -> EnergyStore {
    let e = (store.energy() + (p_harvest - p_load) * dt).clamp(0.0, store.capacity());
    EnergyStore {
        voltage: (2.0 * e / store.capacitance).sqrt(),
        ..store.clone()
    }
}

/// Harvest minus duty-weighted draw; non-negative means sustainable.
pub fn energy_neutral_margin(
    profile: &PowerProfile,
    duty: &BTreeMap<DeviceState, f64>,
    p_harvest: f64,
) -> Result<f64> {
    Ok(p_harvest - profile.average(duty)?)
}
