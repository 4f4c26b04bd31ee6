//! BS array and UAV antenna gain patterns.
//!
//! The BS pattern is a vertical uniform linear array of half-wavelength
//! dipoles, electrically steered to the downtilt angle; it is directional in
//! elevation and omnidirectional in azimuth. The array factor is normalized
//! so that the peak array gain equals `num_elements` times the element peak.
//!
//! The UAV antenna is either isotropic or a downward cone: constant main-lobe
//! gain G0 / phi^2 (phi in degrees) inside the footprint radius
//! r_c = (H - H_B) tan(phi), and a residual side-lobe gain outside.

use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};

use super::ChannelError;

/// Peak gain of a lossless half-wavelength dipole (2.15 dBi).
const DIPOLE_PEAK_GAIN: f64 = 1.64;

/// Vertical uniform linear array at the BS.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UlaPattern {
    pub num_elements: usize,
    pub spacing_wavelengths: f64,
    pub downtilt_deg: f64,
}

impl Default for UlaPattern {
    fn default() -> Self {
        Self {
            num_elements: 10,
            spacing_wavelengths: 0.5,
            downtilt_deg: 10.0,
        }
    }
}

impl UlaPattern {
    pub fn validate(&self) -> Result<(), ChannelError> {
        if self.num_elements < 1 {
            return Err(ChannelError::InvalidAntenna(
                "array needs at least one element".into(),
            ));
        }
        if !(self.spacing_wavelengths > 0.0) {
            return Err(ChannelError::InvalidAntenna(
                "element spacing must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Power gain of the BS array toward `elevation_deg` above the horizon
/// (negative values point below the horizon). Azimuth does not enter.
pub fn bs_gain(pattern: &UlaPattern, elevation_deg: f64) -> f64 {
    debug_assert!((-90.0..=90.0).contains(&elevation_deg));
    let elev = elevation_deg.to_radians();
    let element = dipole_element_gain(elev);
    let af = array_factor_power(pattern, elev);
    element * af / pattern.num_elements as f64
}

/// Half-wave dipole element power pattern, peak `DIPOLE_PEAK_GAIN` at the
/// horizon and zero toward the poles.
fn dipole_element_gain(elev_rad: f64) -> f64 {
    let c = elev_rad.cos();
    if c.abs() < 1e-9 {
        return 0.0;
    }
    let num = (FRAC_PI_2 * elev_rad.sin()).cos();
    DIPOLE_PEAK_GAIN * (num / c).powi(2)
}

/// |AF|^2 for the steered array; peaks at N^2 when the sin-space offset from
/// the steering direction vanishes.
fn array_factor_power(pattern: &UlaPattern, elev_rad: f64) -> f64 {
    let steer = (-pattern.downtilt_deg.to_radians()).sin();
    let delta = elev_rad.sin() - steer;
    let x = PI * pattern.spacing_wavelengths * delta;
    let n = pattern.num_elements as f64;
    let s = x.sin();
    if s.abs() < 1e-9 {
        n * n
    } else {
        ((n * x).sin() / s).powi(2)
    }
}

/// Elevation angle (degrees) from a BS antenna to a point, measured from the
/// horizontal plane at the BS.
pub fn elevation_deg(horiz_dist_m: f64, target_height_m: f64, bs_height_m: f64) -> f64 {
    (target_height_m - bs_height_m).atan2(horiz_dist_m).to_degrees()
}

/// UAV antenna model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum UavAntenna {
    Isotropic,
    Directional {
        /// Half of the azimuth/elevation beamwidth, in (0, 90] degrees.
        half_beamwidth_deg: f64,
        /// Main-lobe gain constant G0; main-lobe gain is G0 / phi^2.
        #[serde(default = "default_main_gain")]
        main_gain_const: f64,
        /// Residual gain outside the footprint (g0, approximately zero).
        #[serde(default)]
        side_gain: f64,
    },
}

fn default_main_gain() -> f64 {
    7500.0
}

impl UavAntenna {
    pub fn validate(&self) -> Result<(), ChannelError> {
        if let Self::Directional {
            half_beamwidth_deg,
            main_gain_const,
            side_gain,
        } = self
        {
            if !(*half_beamwidth_deg > 0.0 && *half_beamwidth_deg <= 90.0) {
                return Err(ChannelError::InvalidAntenna(
                    "half beamwidth must lie in (0, 90] degrees".into(),
                ));
            }
            if !(*main_gain_const > 0.0) {
                return Err(ChannelError::InvalidAntenna(
                    "main-lobe gain constant must be positive".into(),
                ));
            }
            if *side_gain < 0.0 {
                return Err(ChannelError::InvalidAntenna(
                    "side-lobe gain cannot be negative".into(),
                ));
            }
        }
        Ok(())
    }

    /// Radius of the main-lobe footprint at BS height, `None` when the
    /// pattern covers everything (isotropic, or beamwidth of 90 degrees).
    pub fn main_lobe_radius_m(
        &self,
        uav_height_m: f64,
        bs_height_m: f64,
    ) -> Result<Option<f64>, ChannelError> {
        match self {
            Self::Isotropic => Ok(None),
            Self::Directional {
                half_beamwidth_deg, ..
            } => {
                if *half_beamwidth_deg >= 90.0 {
                    return Ok(None);
                }
                if uav_height_m <= bs_height_m {
                    return Err(ChannelError::ConeGeometry {
                        uav_height_m,
                        bs_height_m,
                    });
                }
                Ok(Some(
                    (uav_height_m - bs_height_m) * half_beamwidth_deg.to_radians().tan(),
                ))
            }
        }
    }

    /// Gain seen by a BS at horizontal distance `horiz_dist_m`.
    pub fn gain(
        &self,
        horiz_dist_m: f64,
        uav_height_m: f64,
        bs_height_m: f64,
    ) -> Result<f64, ChannelError> {
        match self.main_lobe_radius_m(uav_height_m, bs_height_m)? {
            None => Ok(1.0),
            Some(rc) => {
                let Self::Directional {
                    half_beamwidth_deg,
                    main_gain_const,
                    side_gain,
                } = self
                else {
                    unreachable!()
                };
                if horiz_dist_m <= rc {
                    Ok(main_gain_const / half_beamwidth_deg.powi(2))
                } else {
                    Ok(*side_gain)
                }
            }
        }
    }
}
