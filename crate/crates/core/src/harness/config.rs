//! Run configuration and its flat dotted-key file format.

use std::path::Path;

use num_complex::Complex64;
use toml::{Table, Value};

use crate::ambd::{AmbdConfig, AmbdKind, ReflectionPair, SensorModel};
use crate::bc_link::{BcGeometry, DirectPath, RfSourceConfig, RxFrontEndConfig};
use crate::energy::{DeviceState, EnergyStore, PowerProfile};
use crate::error::{invalid, Result};
use crate::rx_demod::DemodConfig;
use crate::vlc_channel::{lambertian_gain, PvFrontEnd, VlcGeometry};
use crate::vlc_tx::{BitVector, FrameSpec, VlcTxConfig};

/// Sweep axes and the values held fixed while the other distance moves.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepAxes {
    pub d_led_bd: Vec<f64>,
    pub d_rx_bd: Vec<f64>,
    pub p_tx_dbm: Vec<f64>,
    pub fixed_d_led_bd: f64,
    pub fixed_d_rx_bd: f64,
    pub fixed_p_tx_dbm: f64,
}

impl Default for SweepAxes {
    fn default() -> Self {
        Self {
            d_led_bd: vec![0.2, 0.3, 0.4, 0.5],
            d_rx_bd: (1..=9).map(|i| i as f64 / 10.0).collect(),
            p_tx_dbm: (0..=10).map(|i| -25.0 + 5.0 * i as f64).collect(),
            fixed_d_led_bd: 0.3,
            fixed_d_rx_bd: 0.5,
            fixed_p_tx_dbm: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub axes: SweepAxes,
    pub kinds: Vec<AmbdKind>,
    pub frames: usize,
    pub seed: u64,
    /// Worker threads; 0 uses one per core.
    pub workers: usize,
    pub vlc: VlcTxConfig,
    pub geometry: VlcGeometry,
    pub pv: PvFrontEnd,
    pub store: EnergyStore,
    pub profile: PowerProfile,
    pub ambd: AmbdConfig,
    /// Comparator hysteresis as a fraction of the expected AC amplitude.
    pub hysteresis_fraction: f64,
    pub reflection: ReflectionPair,
    pub bc: BcGeometry,
    pub rf: RfSourceConfig,
    pub rx: RxFrontEndConfig,
    pub demod: DemodConfig,
    /// Idle time before a frame is drawn uniformly from `0..=lead_max_chips` chips.
    pub lead_max_chips: usize,
    pub tail_chips: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            axes: SweepAxes::default(),
            kinds: AmbdKind::ALL.to_vec(),
            frames: 4000,
            seed: 20_240_601,
            workers: 0,
            vlc: VlcTxConfig::default(),
            geometry: VlcGeometry::default(),
            pv: PvFrontEnd {
                electrical_noise_power: 1.6e-3,
                ..PvFrontEnd::default()
            },
            store: EnergyStore::default(),
            profile: PowerProfile::default(),
            ambd: AmbdConfig::new(AmbdKind::EhOnly),
            hysteresis_fraction: 0.1,
            reflection: ReflectionPair::default(),
            bc: BcGeometry::default(),
            rf: RfSourceConfig::default(),
            rx: RxFrontEndConfig::default(),
            demod: DemodConfig::default(),
            lead_max_chips: 2,
            tail_chips: 1,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.kinds.is_empty() {
            return Err(invalid("kinds", "at least one device kind is required"));
        }
        for (name, axis) in [
            ("d_led_bd", &self.axes.d_led_bd),
            ("d_rx_bd", &self.axes.d_rx_bd),
            ("p_tx_dbm", &self.axes.p_tx_dbm),
        ] {
            if axis.is_empty() {
                return Err(invalid(name, "sweep axis is empty"));
            }
            if axis.iter().any(|v| !v.is_finite()) {
                return Err(invalid(name, "sweep values must be finite"));
            }
        }
        if self.frames == 0 {
            return Err(invalid("frames", "must be at least 1"));
        }
        if !(self.hysteresis_fraction >= 0.0) {
            return Err(invalid("hysteresis_fraction", "must be non-negative"));
        }
        self.vlc.validate()?;
        self.geometry.validate()?;
        self.pv.validate()?;
        self.store.validate()?;
        self.ambd.validate()?;
        self.reflection.validate()?;
        self.bc.validate()?;
        self.rx.validate()?;
        self.demod.validate()?;
        if (self.rx.sample_rate - self.vlc.sample_rate).abs() > 1e-9
            || (self.demod.sample_rate - self.vlc.sample_rate).abs() > 1e-9
        {
            return Err(invalid("sample_rate", "optical, device and RF rates must agree"));
        }
        Ok(())
    }

    /// Device configuration for one kind at one LED distance. The relay's
    /// hysteresis follows the AC amplitude expected at that distance.
    pub fn device(&self, kind: AmbdKind, d_led_bd: f64) -> AmbdConfig {
        let mut d = self.ambd.clone();
        d.kind = kind;
        d.f0 = self.vlc.f0;
        d.f1 = self.vlc.f1;
        d.chip_duration = self.vlc.chip_duration;
        d.sample_rate = self.vlc.sample_rate;
        d.frame = FrameSpec::new(self.demod.payload_len).unwrap_or_default();
        d.comparator.hysteresis = self.hysteresis_fraction * self.expected_ac_amplitude(d_led_bd);
        // same cell and noise, higher transimpedance
        d.control_front_end = PvFrontEnd {
            load_resistance: self.ambd.control_front_end.load_resistance,
            ..self.pv.clone()
        };
        d
    }

    /// Peak AC photovoltage at the relay's PV cell.
    pub fn expected_ac_amplitude(&self, d_led_bd: f64) -> f64 {
        lambertian_gain(&self.geometry.at_distance(d_led_bd)) * self.pv.volts_per_watt() * self.vlc.ac_amplitude()
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::default();
        cfg.apply_toml(&text)?;
        Ok(cfg)
    }

    /// Applies overrides written as `section.key = value`.
    pub fn apply_toml(&mut self, text: &str) -> anyhow::Result<()> {
        let table: Table = text.parse()?;
        let mut flat = Vec::new();
        flatten("", &table, &mut flat);
        for (key, value) in flat {
            self.set(&key, &value)
                .map_err(|e| anyhow::anyhow!("config key `{key}`: {e}"))?;
        }
        self.validate()?;
        Ok(())
    }

    fn set(&mut self, key: &str, v: &Value) -> anyhow::Result<()> {
        if let Some(id) = key.strip_prefix("ambd.codebook.") {
            let id: u32 = id.parse()?;
            let bits: BitVector = str_of(v)?.parse()?;
            self.ambd.command_codebook.insert(id, bits);
            return Ok(());
        }
        match key {
            "sweep.d_led_bd_m" => self.axes.d_led_bd = f64_list(v)?,
            "sweep.d_rx_bd_m" => self.axes.d_rx_bd = f64_list(v)?,
            "sweep.p_tx_dbm" => self.axes.p_tx_dbm = f64_list(v)?,
            "sweep.fixed_d_led_bd_m" => self.axes.fixed_d_led_bd = f64_of(v)?,
            "sweep.fixed_d_rx_bd_m" => self.axes.fixed_d_rx_bd = f64_of(v)?,
            "sweep.fixed_p_tx_dbm" => self.axes.fixed_p_tx_dbm = f64_of(v)?,
            "run.kinds" => {
                self.kinds = list_of(v)?
                    .iter()
                    .map(|k| Ok(str_of(k)?.parse::<AmbdKind>()?))
                    .collect::<anyhow::Result<_>>()?
            }
            "run.frames" => self.frames = usize_of(v)?,
            "run.seed" => self.seed = u64_of(v)?,
            "run.workers" => self.workers = usize_of(v)?,
            "run.lead_max_chips" => self.lead_max_chips = usize_of(v)?,
            "run.tail_chips" => self.tail_chips = usize_of(v)?,
            "vlc.f0_hz" => self.vlc.f0 = f64_of(v)?,
            "vlc.f1_hz" => self.vlc.f1 = f64_of(v)?,
            "vlc.chip_duration_s" => self.vlc.chip_duration = f64_of(v)?,
            "vlc.sample_rate_hz" => self.vlc.sample_rate = f64_of(v)?,
            "vlc.optical_power_dc_w" => self.vlc.optical_power_dc = f64_of(v)?,
            "vlc.modulation_index" => self.vlc.modulation_index = f64_of(v)?,
            "vlc.emit_angle_rad" => self.geometry.emit_angle = f64_of(v)?,
            "vlc.incidence_angle_rad" => self.geometry.incidence_angle = f64_of(v)?,
            "vlc.lambertian_order" => self.geometry.lambertian_order = f64_of(v)?,
            "vlc.detector_area_m2" => self.geometry.detector_area = f64_of(v)?,
            "vlc.fov_half_angle_rad" => self.geometry.fov_half_angle = f64_of(v)?,
            "pv.responsivity_a_per_w" => self.pv.responsivity = f64_of(v)?,
            "pv.load_ohm" => self.pv.load_resistance = f64_of(v)?,
            "pv.conversion_efficiency" => self.pv.conversion_efficiency = f64_of(v)?,
            "pv.noise_power_v2" => self.pv.electrical_noise_power = f64_of(v)?,
            "energy.capacitance_f" => self.store.capacitance = f64_of(v)?,
            "energy.voltage_v" => self.store.voltage = f64_of(v)?,
            "energy.v_max_v" => self.store.v_max = f64_of(v)?,
            "energy.v_min_operate_v" => self.store.v_min_operate = f64_of(v)?,
            "energy.lpf_cutoff_hz" => self.ambd.lpf.cutoff = f64_of(v)?,
            "energy.lpf_order" => self.ambd.lpf.order = u32::try_from(u64_of(v)?)?,
            "energy.sleep_w" => self.profile.set(DeviceState::Sleep, f64_of(v)?)?,
            "energy.decode_w" => self.profile.set(DeviceState::Decode, f64_of(v)?)?,
            "energy.sense_w" => self.profile.set(DeviceState::Sense, f64_of(v)?)?,
            "energy.modulate_w" => self.profile.set(DeviceState::Modulate, f64_of(v)?)?,
            "ambd.hysteresis_fraction" => self.hysteresis_fraction = f64_of(v)?,
            "ambd.comparator_threshold_v" => self.ambd.comparator.threshold = f64_of(v)?,
            "ambd.control_load_ohm" => self.ambd.control_front_end.load_resistance = f64_of(v)?,
            "ambd.sensor_fixed" => self.ambd.sensor_model = SensorModel::Fixed(u32::try_from(u64_of(v)?)?),
            "ambd.sensor_seed" => self.ambd.sensor_model = SensorModel::Hashed { seed: u64_of(v)? },
            "ambd.codebook_clear" => {
                if bool_of(v)? {
                    self.ambd.command_codebook.clear()
                }
            }
            "ambd.gamma_open" => self.reflection.gamma_open = complex_of(v)?,
            "ambd.gamma_short" => self.reflection.gamma_short = complex_of(v)?,
            "bc.d_tx_bd_m" => self.bc.d_tx_bd = f64_of(v)?,
            "bc.g_tx" => self.bc.g_tx = f64_of(v)?,
            "bc.g_bd" => self.bc.g_bd = f64_of(v)?,
            "bc.g_rx" => self.bc.g_rx = f64_of(v)?,
            "bc.wavelength_m" => self.bc.wavelength = f64_of(v)?,
            "bc.mod_factor" => self.bc.mod_factor = f64_of(v)?,
            "bc.carrier_hz" => self.rf.frequency = f64_of(v)?,
            "rx.sample_rate_hz" => self.rx.sample_rate = f64_of(v)?,
            "rx.noise_floor_dbm" => self.rx.noise_floor_dbm = Some(f64_of(v)?),
            "rx.noiseless" => {
                if bool_of(v)? {
                    self.rx.noise_floor_dbm = None
                }
            }
            "rx.d_tx_rx_m" => self.rx.direct_path = DirectPath::Friis { d_tx_rx: f64_of(v)? },
            "rx.direct_path_gain" => self.rx.direct_path = DirectPath::Gain(f64_of(v)?),
            "rx.cfo_hz" => self.rx.carrier_freq_offset = f64_of(v)?,
            "rx.noise_capture_len" => self.rx.noise_capture_len = usize_of(v)?,
            "demod.sync_threshold" => self.demod.sync_threshold = usize_of(v)?,
            "demod.sync_contrast" => self.demod.sync_contrast = f64_of(v)?,
            "demod.snr_cap_db" => self.demod.snr_cap_db = f64_of(v)?,
            "frame.payload_len" => self.demod.payload_len = usize_of(v)?,
            _ => anyhow::bail!("unknown key"),
        }
        self.sync_shared();
        Ok(())
    }

    /// Copies tone plan and rates into the receiver configuration.
    pub fn sync_shared(&mut self) {
        self.demod.f0 = self.vlc.f0;
        self.demod.f1 = self.vlc.f1;
        self.demod.chip_duration = self.vlc.chip_duration;
        self.demod.sample_rate = self.vlc.sample_rate;
    }
}

fn flatten(prefix: &str, t: &Table, out: &mut Vec<(String, Value)>) {
    for (k, v) in t {
        let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match v {
            Value::Table(inner) => flatten(&key, inner, out),
            other => out.push((key, other.clone())),
        }
    }
}

fn f64_of(v: &Value) -> anyhow::Result<f64> {
    match v {
        Value::Float(f) => Ok(*f),
        Value::Integer(i) => Ok(*i as f64),
        _ => anyhow::bail!("expected a number"),
    }
}

fn u64_of(v: &Value) -> anyhow::Result<u64> {
    match v {
        Value::Integer(i) if *i >= 0 => Ok(*i as u64),
        _ => anyhow::bail!("expected a non-negative integer"),
    }
}

fn usize_of(v: &Value) -> anyhow::Result<usize> {
    Ok(usize::try_from(u64_of(v)?)?)
}

fn bool_of(v: &Value) -> anyhow::Result<bool> {
    v.as_bool().ok_or_else(|| anyhow::anyhow!("expected a boolean"))
}

fn str_of(v: &Value) -> anyhow::Result<&str> {
    v.as_str().ok_or_else(|| anyhow::anyhow!("expected a string"))
}

fn list_of(v: &Value) -> anyhow::Result<&Vec<Value>> {
    v.as_array().ok_or_else(|| anyhow::anyhow!("expected an array"))
}

fn f64_list(v: &Value) -> anyhow::Result<Vec<f64>> {
    list_of(v)?.iter().map(f64_of).collect()
}

fn complex_of(v: &Value) -> anyhow::Result<Complex64> {
    match f64_list(v)?.as_slice() {
        [re, im] => Ok(Complex64::new(*re, *im)),
        _ => anyhow::bail!("expected [re, im]"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let c = RunConfig::default();
        c.validate().unwrap();
        assert_eq!(c.axes.d_led_bd.len(), 4);
        assert_eq!(c.axes.d_rx_bd.len(), 9);
        assert_eq!(c.axes.p_tx_dbm.len(), 11);
        assert_eq!(c.axes.p_tx_dbm[0], -25.0);
        assert_eq!(c.axes.p_tx_dbm[10], 25.0);
    }

    #[test]
    fn dotted_keys_override() {
        let mut c = RunConfig::default();
        c.apply_toml(
            r#"
            vlc.f0_hz = 10000
            vlc.f1_hz = 12000
            bc.d_tx_bd_m = 0.7
            run.kinds = ["eh", "relay"]
            run.frames = 12
            rx.noiseless = true
            ambd.codebook.7 = "111111111111111111"
            [sweep]
            p_tx_dbm = [0, 5]
            "#,
        )
        .unwrap();
        assert_eq!(c.vlc.f0, 10_000.0);
        assert_eq!(c.demod.f0, 10_000.0);
        assert_eq!(c.bc.d_tx_bd, 0.7);
        assert_eq!(c.kinds, vec![AmbdKind::EhOnly, AmbdKind::VlcRelay]);
        assert_eq!(c.frames, 12);
        assert_eq!(c.rx.noise_floor_dbm, None);
        assert_eq!(c.axes.p_tx_dbm, vec![0.0, 5.0]);
        assert_eq!(c.ambd.command_codebook[&7].len(), 18);
    }

    #[test]
    fn bad_files_are_rejected() {
        let mut c = RunConfig::default();
        assert!(c.apply_toml("vlc.nonsense = 1").is_err());
        let mut c = RunConfig::default();
        assert!(c.apply_toml("run.kinds = []").is_err());
        let mut c = RunConfig::default();
        assert!(c.apply_toml("vlc.f1_hz = 7000").is_err());
    }
}
