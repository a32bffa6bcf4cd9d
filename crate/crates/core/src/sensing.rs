//! Sensing volume of a shallow NV sensor under a film of target spins.
//!
//! With the angular factor set to one the prefactor falls off as
//! c(r) = κ/r³, and a uniform spin density ρ contributes
//! n c̄² = ∫ ρ c(r)² dV. The NV sits at the origin, a depth `h` below the
//! diamond surface; the film occupies `h ≤ z ≤ h + T`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::constants::{AVOGADRO, CODATA, NM_PER_M, S_PER_US};
use crate::error::{finite, Error, Result};
use crate::geometry::dipolar_scale;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleGeometry {
    /// NV depth below the surface, nm.
    pub nv_depth: f64,
    /// Film thickness in nm; `None` for an infinitely thick film.
    pub film_thickness: Option<f64>,
    /// Target spins per nm³.
    pub spin_density: f64,
}

impl SampleGeometry {
    pub fn new(nv_depth: f64, film_thickness: Option<f64>, spin_density: f64) -> Result<Self> {
        let g = SampleGeometry {
            nv_depth,
            film_thickness,
            spin_density,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        finite("nv_depth", self.nv_depth)?;
        if self.nv_depth <= 0.0 {
            return Err(Error::domain("nv_depth", self.nv_depth, "must be positive"));
        }
        if let Some(t) = self.film_thickness {
            if t.is_nan() || t <= 0.0 {
                return Err(Error::domain("film_thickness", t, "must be positive"));
            }
        }
        finite("spin_density", self.spin_density)?;
        if self.spin_density < 0.0 {
            return Err(Error::domain("spin_density", self.spin_density, "must be non-negative"));
        }
        Ok(())
    }

    fn film_top(&self) -> f64 {
        self.nv_depth + self.film_thickness.unwrap_or(f64::INFINITY)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Region {
    /// The whole film above the surface.
    HalfSpace,
    /// The film within `radius` nm of the NV.
    SphericalCap { radius: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensingModel {
    /// nm³.
    pub kappa: f64,
    /// Detectability threshold on n c̄².
    pub threshold: f64,
    pub region: Region,
    /// Spins closer than this (nm) are excluded.
    pub r_min: f64,
}

impl SensingModel {
    /// Half-space model with threshold 1 and a 0.3 nm floor.
    pub fn for_echo_time(tau: f64) -> Result<Self> {
        Ok(SensingModel {
            kappa: kappa_constant(tau)?,
            threshold: 1.0,
            region: Region::HalfSpace,
            r_min: 0.3,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa > 0.0) || !self.kappa.is_finite() {
            return Err(Error::domain("kappa", self.kappa, "must be positive"));
        }
        if !(self.threshold > 0.0) || !self.threshold.is_finite() {
            return Err(Error::domain("threshold", self.threshold, "must be positive"));
        }
        if !(self.r_min > 0.0) || !self.r_min.is_finite() {
            return Err(Error::domain("r_min", self.r_min, "must be positive"));
        }
        if let Region::SphericalCap { radius } = self.region {
            if !(radius > 0.0) || radius.is_nan() {
                return Err(Error::domain("radius", radius, "must be positive"));
            }
        }
        Ok(())
    }
}

/// κ = µ0 γ_e² ħ τ / (8π) in nm³, `tau` in µs.
pub fn kappa_constant(tau: f64) -> Result<f64> {
    finite("tau", tau)?;
    if tau <= 0.0 {
        return Err(Error::domain("tau", tau, "echo delay must be positive"));
    }
    let m3 = dipolar_scale() * CODATA.gamma_e * tau * S_PER_US;
    Ok(m3 * NM_PER_M.powi(3))
}

/// c(r) = κ/r³.
pub fn prefactor_at(r: f64, model: &SensingModel) -> Result<f64> {
    finite("r", r)?;
    if r <= 0.0 {
        return Err(Error::domain("r", r, "distance must be positive"));
    }
    Ok(model.kappa / (r * r * r))
}

/// Analytic n c̄² = πρκ²/(6h³) for an infinitely thick film.
pub fn half_space_nc2(spin_density: f64, kappa: f64, nv_depth: f64) -> f64 {
    PI * spin_density * kappa * kappa / (6.0 * nv_depth.powi(3))
}

fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + simpson(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson(f, a, b, fa, fm, fb, whole, tol, 40)
}

/// ∫ (A(r)/r⁶) dr over `[r_lo, r_hi]`, A(r) the area of the sphere of radius r
/// inside the film. Integrated in u = r_lo/r, split at the film top.
fn shell_integral(geom: &SampleGeometry, r_min: f64, r_hi: f64) -> f64 {
    let h = geom.nv_depth;
    let top = geom.film_top();
    let r_lo = h.max(r_min);
    if r_hi <= r_lo {
        return 0.0;
    }
    let area = move |r: f64| 2.0 * PI * r * (r.min(top) - h).max(0.0);
    let integrand = move |u: f64| {
        if u <= 0.0 {
            return 0.0;
        }
        let r = r_lo / u;
        area(r) / r.powi(6) * r_lo / (u * u)
    };
    let u_lo = if r_hi.is_finite() { r_lo / r_hi } else { 0.0 };
    // scale of the half-space answer sets the absolute tolerance
    let tol = 1e-12 * PI / (6.0 * r_lo.powi(3));
    let kink = r_lo / top;
    if kink > u_lo && kink < 1.0 {
        adaptive_simpson(&integrand, u_lo, kink, tol) + adaptive_simpson(&integrand, kink, 1.0, tol)
    } else {
        adaptive_simpson(&integrand, u_lo, 1.0, tol)
    }
}

/// n c̄² accumulated over the model's region.
pub fn accumulate_nc2(geom: &SampleGeometry, model: &SensingModel) -> Result<f64> {
    geom.validate()?;
    model.validate()?;
    if geom.spin_density == 0.0 {
        return Ok(0.0);
    }
    let r_hi = match model.region {
        Region::HalfSpace => f64::INFINITY,
        Region::SphericalCap { radius } => radius,
    };
    Ok(geom.spin_density * model.kappa * model.kappa * shell_integral(geom, model.r_min, r_hi))
}

/// Deepest NV that still reaches the threshold, or `None` when no depth
/// does (e.g. ρ = 0). The model's region is taken as the full film.
pub fn threshold_depth(spin_density: f64, film_thickness: Option<f64>, model: &SensingModel) -> Result<Option<f64>> {
    model.validate()?;
    let model = SensingModel {
        region: Region::HalfSpace,
        ..*model
    };
    let nc2 = |h: f64| accumulate_nc2(&SampleGeometry::new(h, film_thickness, spin_density)?, &model);
    let (mut lo, mut hi) = (1e-3, 1e7);
    if nc2(lo)? < model.threshold {
        return Ok(None);
    }
    if nc2(hi)? >= model.threshold {
        return Err(Error::InvalidInput("threshold reached beyond 10 mm depth".into()));
    }
    while hi / lo - 1.0 > 1e-12 {
        let mid = (lo * hi).sqrt();
        if nc2(mid)? >= model.threshold {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Some((lo * hi).sqrt()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RadiusResult {
    Radius { radius: f64 },
    /// The requested fraction is only reached as R → ∞.
    Open,
    /// Total n c̄² is below the detectability threshold; `radius` is where
    /// the fraction would be reached, absent when there are no spins at all.
    NothingDetectable { radius: Option<f64> },
}

/// Radius of the NV-centred sphere holding `signal_fraction` of the total
/// n c̄² from the film.
pub fn detectability_radius(geom: &SampleGeometry, model: &SensingModel, signal_fraction: f64) -> Result<RadiusResult> {
    finite("signal_fraction", signal_fraction)?;
    if !(signal_fraction > 0.0 && signal_fraction <= 1.0) {
        return Err(Error::domain("signal_fraction", signal_fraction, "must lie in (0, 1]"));
    }
    let half = SensingModel {
        region: Region::HalfSpace,
        ..*model
    };
    let total = accumulate_nc2(geom, &half)?;
    if total == 0.0 {
        return Ok(RadiusResult::NothingDetectable { radius: None });
    }
    let detectable = total >= model.threshold;
    if signal_fraction == 1.0 {
        return Ok(if detectable {
            RadiusResult::Open
        } else {
            RadiusResult::NothingDetectable { radius: None }
        });
    }
    let target = signal_fraction * total;
    let within = |radius: f64| {
        accumulate_nc2(
            geom,
            &SensingModel {
                region: Region::SphericalCap { radius },
                ..*model
            },
        )
    };
    let mut lo = geom.nv_depth.max(model.r_min);
    let mut hi = 2.0 * lo;
    while within(hi)? < target {
        lo = hi;
        hi *= 2.0;
        if hi > 1e12 {
            return Ok(if detectable {
                RadiusResult::Open
            } else {
                RadiusResult::NothingDetectable { radius: None }
            });
        }
    }
    while hi - lo > 1e-9 * hi {
        let mid = 0.5 * (lo + hi);
        if within(mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let radius = 0.5 * (lo + hi);
    Ok(if detectable {
        RadiusResult::Radius { radius }
    } else {
        RadiusResult::NothingDetectable { radius: Some(radius) }
    })
}

/// Spins per nm³ from an amount in mol spread over a volume in mm³.
pub fn density_estimate(amount_mol: f64, volume_mm3: f64) -> Result<f64> {
    finite("amount", amount_mol)?;
    finite("volume", volume_mm3)?;
    if amount_mol <= 0.0 {
        return Err(Error::domain("amount", amount_mol, "must be positive"));
    }
    if volume_mm3 <= 0.0 {
        return Err(Error::domain("volume", volume_mm3, "must be positive"));
    }
    const NM3_PER_MM3: f64 = 1e18;
    Ok(amount_mol * AVOGADRO / (volume_mm3 * NM3_PER_MM3))
}
