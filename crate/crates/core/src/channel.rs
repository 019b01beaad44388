//! Air-to-ground uplink with a probabilistic line-of-sight blend.
//!
//! Attenuation factors are configured in dB and converted to linear scale
//! once, in [`ChannelParams::attenuation_linear`]. The LoS-probability curve
//! consumes the elevation angle in **degrees**; every other angle in the
//! crate is in radians.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelParams {
    pub bandwidth_hz: f64,
    pub transmit_power_w: f64,
    pub noise_power_dbm: f64,
    pub carrier_frequency_hz: f64,
    pub speed_of_light_mps: f64,
    pub path_loss_exponent: f64,
    pub los_attenuation_db: f64,
    pub nlos_attenuation_db: f64,
    pub env_c1: f64,
    pub env_c2: f64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self {
            bandwidth_hz: 1.0e6,
            transmit_power_w: 0.1,
            noise_power_dbm: -110.0,
            carrier_frequency_hz: 2.0e9,
            speed_of_light_mps: 3.0e8,
            path_loss_exponent: 2.0,
            los_attenuation_db: 1.0,
            nlos_attenuation_db: 20.0,
            env_c1: 9.61,
            env_c2: 0.16,
        }
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    db_to_linear(dbm) * 1e-3
}

impl ChannelParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("bandwidth_hz", self.bandwidth_hz),
            ("transmit_power_w", self.transmit_power_w),
            ("carrier_frequency_hz", self.carrier_frequency_hz),
            ("speed_of_light_mps", self.speed_of_light_mps),
            ("env_c1", self.env_c1),
            ("env_c2", self.env_c2),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("channel.{name} must be > 0, got {v}")));
            }
        }
        if !self.noise_power_dbm.is_finite() {
            return Err(Error::Config("channel.noise_power_dbm must be finite".into()));
        }
        if !(self.path_loss_exponent >= 2.0) {
            return Err(Error::Config(format!(
                "channel.path_loss_exponent must be >= 2, got {}",
                self.path_loss_exponent
            )));
        }
        if !(self.los_attenuation_db >= 0.0 && self.nlos_attenuation_db >= self.los_attenuation_db)
        {
            return Err(Error::Config(format!(
                "channel attenuation must satisfy 0 <= los_db <= nlos_db, got {} / {}",
                self.los_attenuation_db, self.nlos_attenuation_db
            )));
        }
        Ok(())
    }

    pub fn noise_power_w(&self) -> f64 {
        dbm_to_watts(self.noise_power_dbm)
    }

    /// `(μ_LoS, μ_NLoS)` on linear scale.
    pub fn attenuation_linear(&self) -> (f64, f64) {
        (
            db_to_linear(self.los_attenuation_db),
            db_to_linear(self.nlos_attenuation_db),
        )
    }

    /// Free-space constant `(4π f_c / c)²`.
    pub fn free_space_constant(&self) -> f64 {
        let k = 4.0 * std::f64::consts::PI * self.carrier_frequency_hz / self.speed_of_light_mps;
        k * k
    }
}

pub fn los_probability(elevation_deg: f64, c1: f64, c2: f64) -> f64 {
    1.0 / (1.0 + c1 * (-c2 * (elevation_deg - c1)).exp())
}

/// Elevation angle in degrees seen from a ground point at horizontal
/// distance `horizontal_m` below a UAV at `altitude_m`.
pub fn elevation_deg(horizontal_m: f64, altitude_m: f64) -> f64 {
    let d = horizontal_m.hypot(altitude_m);
    (altitude_m / d).asin().to_degrees()
}

pub fn channel_gain(horizontal_m: f64, altitude_m: f64, params: &ChannelParams) -> f64 {
    let d = horizontal_m.hypot(altitude_m);
    let p_los = los_probability(elevation_deg(horizontal_m, altitude_m), params.env_c1, params.env_c2);
    let p_nlos = 1.0 - p_los;
    let (mu_los, mu_nlos) = params.attenuation_linear();
    1.0 / (params.free_space_constant()
        * d.powf(params.path_loss_exponent)
        * (p_los * mu_los + p_nlos * mu_nlos))
}

pub fn snr(gain: f64, params: &ChannelParams) -> f64 {
    params.transmit_power_w * gain / params.noise_power_w()
}

/// Shannon rate (bit/s) at a given channel gain.
pub fn transmission_rate(gain: f64, params: &ChannelParams) -> f64 {
    params.bandwidth_hz * snr(gain, params).ln_1p() / std::f64::consts::LN_2
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_snr_params() -> ChannelParams {
        // noise = 1e-3 W, so P_t * g / σ² = 100 g
        ChannelParams {
            noise_power_dbm: 0.0,
            ..ChannelParams::default()
        }
    }

    #[test]
    fn los_probability_at_c1() {
        let p = los_probability(9.61, 9.61, 0.16);
        assert!((p - 1.0 / 10.61).abs() < 1e-15);
        assert!((p - 0.09425).abs() < 1e-5);
    }

    #[test]
    fn los_probability_known_angles() {
        // 1 / (1 + 9.61 exp(-0.16 (θ - 9.61))), evaluated with mpmath at 30 digits
        assert!((los_probability(45.0, 9.61, 0.16) - 0.967_691_899_947_242_3).abs() < 1e-12);
        assert!((los_probability(90.0, 9.61, 0.16) - 0.999_975_074_537_903).abs() < 1e-12);
    }

    #[test]
    fn los_probability_increasing() {
        let mut prev = 0.0;
        for i in 1..=1000 {
            let p = los_probability(i as f64 * 0.09, 9.61, 0.16);
            assert!(p > prev && p < 1.0);
            prev = p;
        }
    }

    #[test]
    fn equal_attenuation_ignores_los() {
        let params = ChannelParams {
            los_attenuation_db: 6.0,
            nlos_attenuation_db: 6.0,
            ..ChannelParams::default()
        };
        let mu = db_to_linear(6.0);
        for h in [0.0, 50.0, 400.0] {
            let d2: f64 = h * h + 120.0 * 120.0;
            let expected = 1.0 / (params.free_space_constant() * d2 * mu);
            let g = channel_gain(h, 120.0, &params);
            assert!((g - expected).abs() / expected < 1e-14);
        }
    }

    #[test]
    fn gain_at_known_geometry() {
        // h = 100, H = 120 with the default channel, evaluated with mpmath at 40 digits
        let g = channel_gain(100.0, 120.0, &ChannelParams::default());
        assert!((g - 2.183_588_965_187_971e-9).abs() / g < 1e-9);
    }

    #[test]
    fn overhead_elevation_is_ninety() {
        assert!((elevation_deg(0.0, 120.0) - 90.0).abs() < 1e-12);
    }

    #[test]
    fn gain_decreasing_in_distance() {
        let params = ChannelParams::default();
        let mut prev = f64::INFINITY;
        for i in 0..2000 {
            let g = channel_gain(i as f64 * 0.5, 120.0, &params);
            assert!(g < prev);
            prev = g;
        }
    }

    #[test]
    fn rate_closed_forms() {
        let params = unit_snr_params();
        let noise = params.noise_power_w();
        let w = params.bandwidth_hz;
        let g1 = noise / params.transmit_power_w;
        assert!((transmission_rate(g1, &params) - w).abs() / w < 1e-12);
        assert!((transmission_rate(3.0 * g1, &params) - 2.0 * w).abs() / w < 1e-12);
        assert_eq!(transmission_rate(0.0, &params), 0.0);
    }

    #[test]
    fn rate_increasing_and_concave() {
        let params = unit_snr_params();
        let h = 1e-4;
        for i in 1..200 {
            let g = i as f64 * 0.05;
            let (lo, mid, hi) = (
                transmission_rate(g - h, &params),
                transmission_rate(g, &params),
                transmission_rate(g + h, &params),
            );
            assert!(hi > mid && mid > lo);
            assert!((hi - 2.0 * mid + lo) / (h * h) <= 0.0);
        }
    }

    #[test]
    fn defaults_validate() {
        ChannelParams::default().validate().unwrap();
        let bad = ChannelParams {
            los_attenuation_db: 30.0,
            ..ChannelParams::default()
        };
        assert!(bad.validate().is_err());
    }
}
