//! Vector algebra, axis-angle rotations and the dipolar field of a target
//! spin at the NV sensor.
//!
//! The NV quantization axis is the lab z-axis. The bias-field direction is
//! carried separately wherever it matters.

use std::f64::consts::PI;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::constants::{CODATA, NM_PER_M, S_PER_US};
use crate::error::{finite, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vector3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vector3 {
    pub const ZERO: Vector3 = Vector3::new(0.0, 0.0, 0.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vector3 { x, y, z }
    }

    pub fn from_array(v: [f64; 3]) -> Self {
        Vector3::new(v[0], v[1], v[2])
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    #[inline]
    pub fn dot(&self, other: &Vector3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    #[inline]
    pub fn cross(&self, other: &Vector3) -> Vector3 {
        Vector3::new(
            self.y * other.z - self.z * other.y,
            self.z * other.x - self.x * other.z,
            self.x * other.y - self.y * other.x,
        )
    }

    /// Euclidean norm, scaled by the largest component so that huge or tiny
    /// finite inputs neither overflow nor underflow.
    pub fn norm(&self) -> f64 {
        let scale = self.x.abs().max(self.y.abs()).max(self.z.abs());
        if scale == 0.0 || !scale.is_finite() {
            return scale;
        }
        let (x, y, z) = (self.x / scale, self.y / scale, self.z / scale);
        scale * (x * x + y * y + z * z).sqrt()
    }
}

impl Add for Vector3 {
    type Output = Vector3;
    #[inline]
    fn add(self, o: Vector3) -> Vector3 {
        Vector3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vector3 {
    type Output = Vector3;
    #[inline]
    fn sub(self, o: Vector3) -> Vector3 {
        Vector3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vector3 {
    type Output = Vector3;
    #[inline]
    fn mul(self, s: f64) -> Vector3 {
        Vector3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Neg for Vector3 {
    type Output = Vector3;
    fn neg(self) -> Vector3 {
        Vector3::new(-self.x, -self.y, -self.z)
    }
}

/// A direction in space; normalized on construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(into = "[f64; 3]")]
pub struct UnitVector3(Vector3);

impl UnitVector3 {
    pub const X: UnitVector3 = UnitVector3(Vector3::new(1.0, 0.0, 0.0));
    pub const Y: UnitVector3 = UnitVector3(Vector3::new(0.0, 1.0, 0.0));
    pub const Z: UnitVector3 = UnitVector3(Vector3::new(0.0, 0.0, 1.0));

    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        Self::from_vector(Vector3::new(x, y, z))
    }

    pub fn from_vector(v: Vector3) -> Result<Self> {
        if !v.is_finite() {
            return Err(Error::NonFinite("vector component"));
        }
        let n = v.norm();
        if n == 0.0 {
            return Err(Error::ZeroVector);
        }
        Ok(UnitVector3(v * (1.0 / n)))
    }

    /// Unit vector from polar angle `theta` and azimuth `phi` (radians).
    pub fn from_angles(theta: f64, phi: f64) -> Self {
        let (st, ct) = theta.sin_cos();
        let (sp, cp) = phi.sin_cos();
        UnitVector3(Vector3::new(st * cp, st * sp, ct))
    }

    #[inline]
    pub fn as_vector(&self) -> Vector3 {
        self.0
    }

    #[inline]
    pub fn dot(&self, other: &UnitVector3) -> f64 {
        self.0.dot(&other.0)
    }

    /// A fixed unit vector orthogonal to `self`, built from the lab axis
    /// least aligned with it.
    pub fn orthogonal(&self) -> UnitVector3 {
        let v = self.0;
        let (ax, ay, az) = (v.x.abs(), v.y.abs(), v.z.abs());
        let helper = if ax <= ay && ax <= az {
            Vector3::new(1.0, 0.0, 0.0)
        } else if ay <= az {
            Vector3::new(0.0, 1.0, 0.0)
        } else {
            Vector3::new(0.0, 0.0, 1.0)
        };
        let w = helper - v * v.dot(&helper);
        UnitVector3(w * (1.0 / w.norm()))
    }
}

impl From<UnitVector3> for [f64; 3] {
    fn from(u: UnitVector3) -> Self {
        u.0.to_array()
    }
}

impl<'de> Deserialize<'de> for UnitVector3 {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = <[f64; 3]>::deserialize(d)?;
        UnitVector3::new(raw[0], raw[1], raw[2]).map_err(serde::de::Error::custom)
    }
}

/// Polar and azimuthal angles in radians, `theta` in [0, π], `phi` in [0, 2π).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphericalDirection {
    theta: f64,
    phi: f64,
}

impl SphericalDirection {
    /// `phi` is wrapped into [0, 2π); `theta` outside [0, π] is rejected.
    pub fn new(theta: f64, phi: f64) -> Result<Self> {
        finite("theta", theta)?;
        finite("phi", phi)?;
        if !(0.0..=PI).contains(&theta) {
            return Err(Error::domain("theta", theta, "polar angle must lie in [0, pi]"));
        }
        let mut phi = phi.rem_euclid(2.0 * PI);
        if phi >= 2.0 * PI {
            phi = 0.0;
        }
        Ok(SphericalDirection { theta, phi })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn unit_vector(&self) -> UnitVector3 {
        UnitVector3::from_angles(self.theta, self.phi)
    }
}

/// Rodrigues rotation with precomputed cosine and sine of the angle.
#[inline]
pub(crate) fn rodrigues(v: Vector3, axis: &UnitVector3, cos: f64, sin: f64) -> Vector3 {
    let k = axis.as_vector();
    v * cos + k.cross(&v) * sin + k * (k.dot(&v) * (1.0 - cos))
}

/// Right-handed rotation of `v` about `axis` by `angle` radians.
pub fn rotate_axis_angle(v: UnitVector3, axis: UnitVector3, angle: f64) -> Result<UnitVector3> {
    finite("angle", angle)?;
    let (sin, cos) = angle.sin_cos();
    UnitVector3::from_vector(rodrigues(v.as_vector(), &axis, cos, sin))
}

/// Magnitude and direction of the dipolar field a target electron spin
/// produces at the sensor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DipolarCoupling {
    /// Field magnitude in Tesla.
    pub lambda_mag: f64,
    /// Field direction, `[3(ê_r·ê_z)ê_r − ê_z]` normalized.
    pub e_i: UnitVector3,
    /// Sensor-target separation in nm.
    pub r: f64,
    /// Polar angle of the separation vector, radians.
    pub theta_r: f64,
}

impl DipolarCoupling {
    pub fn lambda_gauss(&self) -> f64 {
        self.lambda_mag * crate::constants::GAUSS_PER_TESLA
    }
}

/// µ0 γ_e ħ / (8π) in T m³.
pub(crate) fn dipolar_scale() -> f64 {
    CODATA.mu0 * CODATA.gamma_e * CODATA.hbar / (8.0 * PI)
}

pub fn dipolar_coupling(r: f64, direction: SphericalDirection) -> Result<DipolarCoupling> {
    finite("r", r)?;
    if r <= 0.0 {
        return Err(Error::domain("r", r, "separation must be positive"));
    }
    let e_r = direction.unit_vector().as_vector();
    let cos_t = e_r.z;
    let angular = (3.0 * cos_t * cos_t + 1.0).sqrt();
    let r_m = r / NM_PER_M;
    let lambda_mag = dipolar_scale() * angular / (r_m * r_m * r_m);
    let bracket = e_r * (3.0 * cos_t) - Vector3::new(0.0, 0.0, 1.0);
    let e_i = UnitVector3::from_vector(bracket * (1.0 / angular))?;
    Ok(DipolarCoupling {
        lambda_mag,
        e_i,
        r,
        theta_r: direction.theta(),
    })
}

/// Dimensionless sensor phase scale `c = γ_e τ λ (ê_B·ê_i)`, signed; `tau` in µs.
pub fn coupling_prefactor(coupling: &DipolarCoupling, tau: f64, e_b: UnitVector3) -> Result<f64> {
    finite("tau", tau)?;
    if tau <= 0.0 {
        return Err(Error::domain("tau", tau, "echo delay must be positive"));
    }
    Ok(CODATA.gamma_e * tau * S_PER_US * coupling.lambda_mag * e_b.dot(&coupling.e_i))
}
