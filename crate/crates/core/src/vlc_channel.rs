//! Line-of-sight Lambertian optical channel and photovoltaic front-end.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{invalid, Error, Result};
use crate::sigcore::{add_awgn, RealWaveform, SimRng};

/// LED to device geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct VlcGeometry {
    /// LED array to device distance, metres.
    pub d_led_bd: f64,
    /// Emission angle at the LED, radians.
    pub emit_angle: f64,
    /// Incidence angle at the PV cell, radians.
    pub incidence_angle: f64,
    pub lambertian_order: f64,
    /// PV cell area, m².
    pub detector_area: f64,
    pub fov_half_angle: f64,
}

impl Default for VlcGeometry {
    fn default() -> Self {
        Self {
            d_led_bd: 0.3,
            emit_angle: 0.0,
            incidence_angle: 0.0,
            lambertian_order: 1.0,
            detector_area: 1e-4,
            fov_half_angle: PI / 3.0,
        }
    }
}

impl VlcGeometry {
    pub fn at_distance(&self, d_led_bd: f64) -> Self {
        Self {
            d_led_bd,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.d_led_bd > 0.0) {
            return Err(invalid("d_led_bd", "must be positive"));
        }
        if !(self.detector_area > 0.0) {
            return Err(invalid("detector_area", "must be positive"));
        }
        if !(self.lambertian_order >= 1.0) {
            return Err(invalid("lambertian_order", "must be at least 1"));
        }
        for (name, a) in [
            ("emit_angle", self.emit_angle),
            ("incidence_angle", self.incidence_angle),
            ("fov_half_angle", self.fov_half_angle),
        ] {
            if !(0.0..FRAC_PI_2).contains(&a) {
                return Err(invalid(name, format!("{a} rad is outside [0, π/2)")));
            }
        }
        Ok(())
    }
}

/// Photovoltaic receiver: current responsivity, load that turns the
/// photocurrent into a voltage, harvesting efficiency and output noise.
#[derive(Debug, Clone, PartialEq)]
pub struct PvFrontEnd {
    /// A/W.
    pub responsivity: f64,
    /// Ω.
    pub load_resistance: f64,
    pub conversion_efficiency: f64,
    /// Per-sample noise variance at the electrical output, V².
    pub electrical_noise_power: f64,
}

impl Default for PvFrontEnd {
    fn default() -> Self {
        Self {
            responsivity: 0.5,
            load_resistance: 1000.0,
            conversion_efficiency: 0.8,
            electrical_noise_power: 4e-3,
        }
    }
}

impl PvFrontEnd {
    pub fn validate(&self) -> Result<()> {
        if !(self.responsivity > 0.0) {
            return Err(invalid("responsivity", "must be positive"));
        }
        if !(self.load_resistance > 0.0) {
            return Err(invalid("load_resistance", "must be positive"));
        }
        if !(self.conversion_efficiency > 0.0 && self.conversion_efficiency <= 1.0) {
            return Err(invalid("conversion_efficiency", "must lie in (0, 1]"));
        }
        if !(self.electrical_noise_power >= 0.0) {
            return Err(invalid("electrical_noise_power", "must be non-negative"));
        }
        Ok(())
    }

    /// Volts per watt of optical power at the cell.
    pub fn volts_per_watt(&self) -> f64 {
        self.responsivity * self.load_resistance
    }
}

/// LOS gain `(m+1)·A·cos^m(φ)·cos(ψ) / (2π·d²)`, zero outside the field of view.
pub fn lambertian_gain(g: &VlcGeometry) -> f64 {
    if g.incidence_angle > g.fov_half_angle {
        return 0.0;
    }
    let m = g.lambertian_order;
    (m + 1.0) * g.detector_area * g.emit_angle.cos().powf(m) * g.incidence_angle.cos()
        / (2.0 * PI * g.d_led_bd * g.d_led_bd)
}

/// Optical intensity to PV voltage, with additive electrical noise.
pub fn propagate_vlc(
    tx: &RealWaveform,
    g: &VlcGeometry,
    fe: &PvFrontEnd,
    rng: &mut SimRng,
) -> Result<RealWaveform> {
    g.validate()?;
    fe.validate()?;
    if let Some((index, &value)) = tx.samples().iter().enumerate().find(|(_, &s)| s < 0.0) {
        return Err(Error::NegativeIntensity { index, value });
    }
    let scale = lambertian_gain(g) * fe.volts_per_watt();
    let clean = tx.with_samples(tx.samples().iter().map(|&s| s * scale).collect());
    add_awgn(&clean, fe.electrical_noise_power, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sigcore::make_tone;

    #[test]
    fn reference_gain() {
        let g = VlcGeometry {
            d_led_bd: 0.5,
            ..VlcGeometry::default()
        };
        let expected = 2.0 * 1e-4 / (2.0 * PI * 0.25);
        assert!((lambertian_gain(&g) - expected).abs() < 1e-18);
        assert!((lambertian_gain(&g) - 1.2732e-4).abs() < 1e-8);
    }

    #[test]
    fn outside_fov_is_outage() {
        let g = VlcGeometry {
            incidence_angle: 1.2,
            fov_half_angle: 1.0,
            ..VlcGeometry::default()
        };
        assert_eq!(lambertian_gain(&g), 0.0);
    }

    #[test]
    fn inverse_square() {
        let base = VlcGeometry::default();
        let near = lambertian_gain(&base.at_distance(0.25));
        let far = lambertian_gain(&base.at_distance(0.5));
        assert!((near / far - 4.0).abs() < 1e-12);
        let mut prev = f64::INFINITY;
        for i in 1..50 {
            let g = lambertian_gain(&base.at_distance(0.05 * i as f64));
            assert!(g < prev);
            prev = g;
        }
    }

    #[test]
    fn noiseless_channel_is_linear() {
        let tx = make_tone(6000.0, 1e-3, 200e3, 0.0).unwrap();
        let tx = tx.with_samples(tx.samples().iter().map(|s| 1.0 + 0.5 * s).collect());
        let fe = PvFrontEnd {
            electrical_noise_power: 0.0,
            ..PvFrontEnd::default()
        };
        let g = VlcGeometry::default();
        let mut rng = SimRng::new(0);
        let out = propagate_vlc(&tx, &g, &fe, &mut rng).unwrap();
        let k = lambertian_gain(&g) * fe.volts_per_watt();
        for (o, i) in out.samples().iter().zip(tx.samples()) {
            assert!((o - k * i).abs() < 1e-15);
        }
        let doubled = tx.with_samples(tx.samples().iter().map(|s| 2.0 * s).collect());
        let out2 = propagate_vlc(&doubled, &g, &fe, &mut rng).unwrap();
        for (a, b) in out2.samples().iter().zip(out.samples()) {
            assert!((a - 2.0 * b).abs() < 1e-15);
        }
        let far = propagate_vlc(&tx, &g.at_distance(0.6), &fe, &mut rng).unwrap();
        let ac = |w: &RealWaveform| {
            let m = w.mean();
            w.samples().iter().map(|s| (s - m).abs()).fold(0.0, f64::max)
        };
        assert!((ac(&out) / ac(&far) - 4.0).abs() < 1e-9);
    }

    #[test]
    fn negative_intensity_rejected() {
        let tx = RealWaveform::new(vec![1.0, -0.1], 200e3).unwrap();
        let err = propagate_vlc(
            &tx,
            &VlcGeometry::default(),
            &PvFrontEnd::default(),
            &mut SimRng::new(0),
        );
        assert!(matches!(err, Err(Error::NegativeIntensity { index: 1, .. })));
    }

    #[test]
    fn received_snr_matches_analytic() {
        let fs = 200e3;
        let n = 1_000_000;
        let w = 2.0 * PI * 6000.0 / fs;
        let p_dc = 1.0;
        let m = 0.5;
        let tx = RealWaveform::new(
            (0..n).map(|i| p_dc * (1.0 + m * (w * i as f64).sin())).collect(),
            fs,
        )
        .unwrap();
        let fe = PvFrontEnd {
            electrical_noise_power: 1e-4,
            ..PvFrontEnd::default()
        };
        let g = VlcGeometry::default();
        let out = propagate_vlc(&tx, &g, &fe, &mut SimRng::new(4)).unwrap();
        let k = lambertian_gain(&g) * fe.volts_per_watt();
        // separate the tone by projection, the rest is noise
        let (mut s, mut c) = (0.0, 0.0);
        for (i, &y) in out.samples().iter().enumerate() {
            s += y * (w * i as f64).sin();
            c += y * (w * i as f64).cos();
        }
        let amp = 2.0 * (s * s + c * c).sqrt() / n as f64;
        let mean = out.mean();
        let resid: f64 = out
            .samples()
            .iter()
            .enumerate()
            .map(|(i, &y)| {
                let e = y - mean - amp * (w * i as f64).sin();
                e * e
            })
            .sum::<f64>()
            / n as f64;
        let measured = (amp * amp / 2.0) / resid;
        let analytic = (k * m * p_dc).powi(2) / 2.0 / fe.electrical_noise_power;
        assert!(((measured - analytic) / analytic).abs() < 0.01, "{measured} {analytic}");
    }
}
