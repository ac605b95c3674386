//! Preferred-frame optics: how a drift through an absolute frame would show up
//! in the arm travel times, the rotation phase shift, instrument sizing, and
//! the drift direction seen by a rotating Earth-bound lab.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::check_finite;
use crate::{Constants, Error, Result};

/// Sidereal day, s.
pub const SIDEREAL_DAY: f64 = 86_164.1;

/// Earth rotation rate relative to the fixed stars, rad/s.
pub const EARTH_ROTATION_RATE: f64 = TAU / SIDEREAL_DAY;

/// Maps an angle onto `[0, 2π)`.
pub fn normalize_angle(theta: f64) -> f64 {
    let r = theta.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Two-arm interferometer with equal arms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Interferometer {
    /// Arm length L, m.
    pub arm_length: f64,
    /// Photon wavelength λ, m.
    pub wavelength: f64,
    /// Device phase Φ₀ from the static path difference, rad.
    pub device_phase: f64,
    /// Azimuth of arm 1, rad in `[0, 2π)`. For an in-plane drift along the
    /// azimuth origin this is the arm angle relative to the drift.
    pub orientation: f64,
}

impl Interferometer {
    pub fn new(arm_length: f64, wavelength: f64, device_phase: f64, orientation: f64) -> Result<Self> {
        positive("arm length", arm_length)?;
        positive("wavelength", wavelength)?;
        check_finite("device phase", device_phase)?;
        check_finite("orientation", orientation)?;
        Ok(Interferometer {
            arm_length,
            wavelength,
            device_phase,
            orientation: normalize_angle(orientation),
        })
    }

    /// Same instrument turned by `delta` radians.
    pub fn rotated(&self, delta: f64) -> Self {
        Interferometer {
            orientation: normalize_angle(self.orientation + delta),
            ..*self
        }
    }

    pub fn with_device_phase(&self, device_phase: f64) -> Self {
        Interferometer { device_phase, ..*self }
    }

    /// ν = c/λ, Hz.
    pub fn frequency(&self, k: Constants) -> f64 {
        k.c / self.wavelength
    }

    /// ω = 2πc/λ, rad/s.
    pub fn angular_frequency(&self, k: Constants) -> f64 {
        TAU * k.c / self.wavelength
    }
}

/// Drift of the lab through the preferred frame.
///
/// The drift direction is fixed in equatorial coordinates; the lab sits at the
/// given geodetic latitude and longitude with a horizontal interferometer.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriftConfig {
    /// Drift speed v, m/s.
    pub speed: f64,
    pub right_ascension: f64,
    pub declination: f64,
    pub lab_latitude: f64,
    pub lab_longitude: f64,
}

impl DriftConfig {
    pub fn new(
        speed: f64,
        right_ascension: f64,
        declination: f64,
        lab_latitude: f64,
        lab_longitude: f64,
    ) -> Result<Self> {
        check_finite("drift speed", speed)?;
        check_finite("right ascension", right_ascension)?;
        check_finite("declination", declination)?;
        check_finite("lab latitude", lab_latitude)?;
        check_finite("lab longitude", lab_longitude)?;
        if !(0.0..crate::SPEED_OF_LIGHT).contains(&speed) {
            return Err(Error::invalid("drift speed", format!("{speed} m/s is outside [0, c)")));
        }
        Ok(DriftConfig {
            speed,
            right_ascension,
            declination,
            lab_latitude,
            lab_longitude,
        })
    }

    /// A drift of fixed magnitude lying in the lab plane along azimuth 0 at all
    /// times (drift parallel to the Earth's axis, lab on the equator).
    pub fn in_plane(speed: f64) -> Result<Self> {
        Self::new(speed, 0.0, PI / 2.0, 0.0, 0.0)
    }

    pub fn with_speed(&self, speed: f64) -> Result<Self> {
        Self::new(
            speed,
            self.right_ascension,
            self.declination,
            self.lab_latitude,
            self.lab_longitude,
        )
    }
}

fn positive(name: &'static str, x: f64) -> Result<f64> {
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(Error::invalid(name, format!("{x} must be positive and finite")))
    }
}

fn check_drift_speed(k: Constants, v: f64) -> Result<f64> {
    if (0.0..k.c).contains(&v) {
        Ok(v)
    } else {
        Err(Error::invalid("drift speed", format!("{v} m/s is outside [0, c)")))
    }
}

/// Second-order arm travel-time difference `(L v²/c³)·cos 2θ`, s.
///
/// θ is the angle between arm 1 and the drift; the value is `+Lv²/c³` with arm
/// 1 along the drift and `−Lv²/c³` after a quarter turn.
pub fn drift_time_difference(k: Constants, arm_length: f64, speed: f64, theta: f64) -> Result<f64> {
    positive("arm length", arm_length)?;
    check_drift_speed(k, speed)?;
    check_finite("theta", theta)?;
    Ok(arm_length * speed * speed / (k.c * k.c * k.c) * (2.0 * theta).cos())
}

/// Exact classical round-trip difference `T(θ) − T(θ + π/2)` with
/// `T(θ) = (2L/c)·√(1 − β² sin²θ)/(1 − β²)`, s.
///
/// Evaluated as `(2L/c)·β² cos 2θ / ((1 − β²)(√(1 − β² sin²θ) + √(1 − β² cos²θ)))`,
/// which is the same quantity without the catastrophic cancellation.
pub fn drift_time_difference_exact(k: Constants, arm_length: f64, speed: f64, theta: f64) -> Result<f64> {
    positive("arm length", arm_length)?;
    check_drift_speed(k, speed)?;
    check_finite("theta", theta)?;
    let beta2 = (speed / k.c).powi(2);
    let (s, c) = theta.sin_cos();
    let root_sum = (1.0 - beta2 * s * s).sqrt() + (1.0 - beta2 * c * c).sqrt();
    Ok(2.0 * arm_length / k.c * beta2 * (2.0 * theta).cos() / ((1.0 - beta2) * root_sum))
}

/// Phase shift produced by a 90° rotation, `4π (L/λ)(v²/c²)`, rad.
pub fn rotation_phase_shift(k: Constants, arm_length: f64, wavelength: f64, speed: f64) -> Result<f64> {
    positive("arm length", arm_length)?;
    positive("wavelength", wavelength)?;
    check_drift_speed(k, speed)?;
    Ok(4.0 * PI * arm_length / wavelength * (speed / k.c).powi(2))
}

/// Arm length giving a rotation phase shift `delta_phi`, m.
pub fn solve_arm_length(k: Constants, wavelength: f64, speed: f64, delta_phi: f64) -> Result<f64> {
    positive("wavelength", wavelength)?;
    check_drift_speed(k, speed)?;
    check_finite("phase shift", delta_phi)?;
    if speed == 0.0 {
        return Err(Error::invalid("drift speed", "no arm length yields a shift without drift"));
    }
    Ok(delta_phi * wavelength * k.c * k.c / (4.0 * PI * speed * speed))
}

/// Drift as seen in the horizontal lab plane.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SiderealOrientation {
    /// Angle from the projected drift direction to arm 1, rad in `[0, 2π)`.
    pub theta_eff: f64,
    /// Horizontal drift speed, m/s.
    pub v_eff: f64,
}

/// Projects the drift onto the lab plane at `t` seconds after the epoch.
///
/// The local sidereal angle is `labLongitude + Ω t`, i.e. the epoch is taken
/// at Greenwich sidereal angle zero. Azimuths are measured from local north
/// toward east.
pub fn sidereal_orientation(d: &DriftConfig, arm_azimuth: f64, t: f64) -> SiderealOrientation {
    let hour_angle = d.lab_longitude + EARTH_ROTATION_RATE * t - d.right_ascension;
    let (sin_h, cos_h) = hour_angle.sin_cos();
    let (sin_dec, cos_dec) = d.declination.sin_cos();
    let (sin_lat, cos_lat) = d.lab_latitude.sin_cos();

    let east = -cos_dec * sin_h;
    let north = cos_lat * sin_dec - sin_lat * cos_dec * cos_h;
    let horizontal = east.hypot(north).min(1.0);

    let drift_azimuth = if horizontal > 0.0 { east.atan2(north) } else { 0.0 };
    SiderealOrientation {
        theta_eff: normalize_angle(arm_azimuth - drift_azimuth),
        v_eff: d.speed * horizontal,
    }
}
