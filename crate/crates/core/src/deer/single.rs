//! Single-target DEER signal.
//!
//! A drive pulse in the middle of the sensor's spin echo nutates the target
//! spin ê_1 about the rotating-frame drive axis â ∝ (Ω, 0, Δ) by
//! α = 2π t_p √(Ω²+Δ²), followed by a rotation about the bias field by the
//! random drive phase. The sensor picks up φ = c [(R_B R_a ê_1 − ê_1)·ê_B] and
//! the measured signal is ⟨cos φ⟩ over target orientation and drive phase.
//!
//! The rotating frame has its third axis along ê_B and its first axis along a
//! fixed perpendicular of ê_B; the average over the drive phase makes the
//! choice of that perpendicular irrelevant.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{finite, Error, Result};
use crate::geometry::{rodrigues, UnitVector3, Vector3};
use crate::quadrature::{gauss_legendre, periodic_nodes};
use crate::rng::{substream, uniform_angle, uniform_direction, RunningStats};

/// Target-spin drive: Rabi frequency and detuning in MHz, length in µs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DrivePulse {
    pub rabi_freq: f64,
    pub detuning: f64,
    pub length: f64,
}

impl DrivePulse {
    pub fn new(rabi_freq: f64, detuning: f64, length: f64) -> Result<Self> {
        finite("rabi frequency", rabi_freq)?;
        finite("detuning", detuning)?;
        finite("pulse length", length)?;
        if rabi_freq < 0.0 {
            return Err(Error::domain("rabi frequency", rabi_freq, "must be non-negative"));
        }
        if length < 0.0 {
            return Err(Error::domain("pulse length", length, "must be non-negative"));
        }
        let pulse = DrivePulse {
            rabi_freq,
            detuning,
            length,
        };
        finite("rotation angle", pulse.rotation_angle())?;
        Ok(pulse)
    }

    /// Resonant pulse of the given length.
    pub fn resonant(rabi_freq: f64, length: f64) -> Result<Self> {
        Self::new(rabi_freq, 0.0, length)
    }

    /// Generalized Rabi frequency √(Ω²+Δ²), MHz.
    pub fn effective_rabi(&self) -> f64 {
        self.rabi_freq.hypot(self.detuning)
    }

    /// Nutation angle α = 2π t_p √(Ω²+Δ²) in radians.
    pub fn rotation_angle(&self) -> f64 {
        2.0 * PI * self.length * self.effective_rabi()
    }

    pub fn with_detuning(self, detuning: f64) -> Result<Self> {
        Self::new(self.rabi_freq, detuning, self.length)
    }

    pub fn with_length(self, length: f64) -> Result<Self> {
        Self::new(self.rabi_freq, self.detuning, length)
    }
}

/// Spin-echo half length `tau` (µs) and the bias-field direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EchoConfig {
    pub tau: f64,
    pub e_b: UnitVector3,
}

impl EchoConfig {
    pub fn new(tau: f64, e_b: UnitVector3) -> Result<Self> {
        finite("tau", tau)?;
        if tau <= 0.0 {
            return Err(Error::domain("tau", tau, "echo delay must be positive"));
        }
        Ok(EchoConfig { tau, e_b })
    }
}

/// Node counts for the triple average over drive phase, cos θ_1 and φ_1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub n_phi_rand: usize,
    pub n_cos_theta1: usize,
    pub n_phi1: usize,
    /// Largest doubling change still reported as converged.
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
}

fn default_tolerance() -> f64 {
    1e-6
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            n_phi_rand: 32,
            n_cos_theta1: 32,
            n_phi1: 32,
            tolerance: default_tolerance(),
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        let min = self.n_phi_rand.min(self.n_cos_theta1).min(self.n_phi1);
        if min < 4 {
            return Err(Error::InvalidInput(format!(
                "quadrature node counts must each be at least 4, got {}/{}/{}",
                self.n_phi_rand, self.n_cos_theta1, self.n_phi1
            )));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::domain("tolerance", self.tolerance, "must be positive"));
        }
        Ok(())
    }

    pub fn doubled(&self) -> Self {
        QuadratureSpec {
            n_phi_rand: 2 * self.n_phi_rand,
            n_cos_theta1: 2 * self.n_cos_theta1,
            n_phi1: 2 * self.n_phi1,
            tolerance: self.tolerance,
        }
    }
}

/// Normalized DEER signal ⟨cos φ⟩ with its error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeerSignal {
    pub value: f64,
    pub converged: bool,
    pub est_error: f64,
}

impl DeerSignal {
    pub(crate) fn exact(value: f64) -> Self {
        DeerSignal {
            value,
            converged: true,
            est_error: 0.0,
        }
    }
}

/// Drive axis and rotation angles, precomputed once per pulse.
#[derive(Debug, Clone, Copy)]
pub(crate) struct DriveRotation {
    e_b: UnitVector3,
    axis: UnitVector3,
    cos_alpha: f64,
    sin_alpha: f64,
}

impl DriveRotation {
    pub fn new(e_b: UnitVector3, pulse: &DrivePulse) -> Self {
        let eff = pulse.effective_rabi();
        let axis = if eff == 0.0 {
            e_b
        } else {
            let perp = e_b.orthogonal().as_vector();
            let v = perp * (pulse.rabi_freq / eff) + e_b.as_vector() * (pulse.detuning / eff);
            UnitVector3::from_vector(v).unwrap_or(e_b)
        };
        let (sin_alpha, cos_alpha) = pulse.rotation_angle().sin_cos();
        DriveRotation {
            e_b,
            axis,
            cos_alpha,
            sin_alpha,
        }
    }

    /// (R_B(φ_rand) R_a(α) ê_1 − ê_1)·ê_B for a given drive phase.
    #[inline]
    pub fn projected_change(&self, e_1: Vector3, cos_phase: f64, sin_phase: f64) -> f64 {
        let nutated = rodrigues(e_1, &self.axis, self.cos_alpha, self.sin_alpha);
        let turned = rodrigues(nutated, &self.e_b, cos_phase, sin_phase);
        (turned - e_1).dot(&self.e_b.as_vector())
    }
}

/// Sensor phase for one target orientation and drive phase.
pub fn accumulated_phase(
    c: f64,
    e_b: UnitVector3,
    e_1: UnitVector3,
    pulse: &DrivePulse,
    phi_rand: f64,
) -> f64 {
    let drive = DriveRotation::new(e_b, pulse);
    let (s, co) = phi_rand.sin_cos();
    c * drive.projected_change(e_1.as_vector(), co, s)
}

fn quadrature_mean(c: f64, drive: &DriveRotation, quad: &QuadratureSpec) -> f64 {
    let (zs, ws) = gauss_legendre(quad.n_cos_theta1);
    let phis = periodic_nodes(quad.n_phi1);
    let phases: Vec<(f64, f64)> = periodic_nodes(quad.n_phi_rand)
        .into_iter()
        .map(|p| {
            let (s, c) = p.sin_cos();
            (c, s)
        })
        .collect();
    let azimuths: Vec<(f64, f64)> = phis.iter().map(|p| p.sin_cos()).collect();
    let mut total = 0.0;
    let mut weight = 0.0;
    for (&z, &w) in zs.iter().zip(&ws) {
        let rho = (1.0 - z * z).max(0.0).sqrt();
        for &(sp, cp) in &azimuths {
            let e_1 = Vector3::new(rho * cp, rho * sp, z);
            for &(cos_phase, sin_phase) in &phases {
                let phi = c * drive.projected_change(e_1, cos_phase, sin_phase);
                total += w * phi.cos();
                weight += w;
            }
        }
    }
    (total / weight).clamp(-1.0, 1.0)
}

/// Orientation- and phase-averaged signal by product quadrature:
/// Gauss-Legendre in cos θ_1, periodic trapezoid in φ_1 and the drive phase.
///
/// The returned value uses the doubled node counts; `est_error` is the change
/// from the requested counts.
pub fn deer_signal_quadrature(
    c: f64,
    echo: &EchoConfig,
    pulse: &DrivePulse,
    quad: &QuadratureSpec,
) -> Result<DeerSignal> {
    finite("c", c)?;
    quad.validate()?;
    if c == 0.0 {
        return Ok(DeerSignal::exact(1.0));
    }
    let drive = DriveRotation::new(echo.e_b, pulse);
    let coarse = quadrature_mean(c, &drive, quad);
    let fine = quadrature_mean(c, &drive, &quad.doubled());
    let est_error = (fine - coarse).abs().max(1e-13);
    Ok(DeerSignal {
        value: fine,
        converged: est_error <= quad.tolerance,
        est_error,
    })
}

const MC_BLOCK: usize = 8192;

/// Monte Carlo estimate of the same average, keyed by `(seed, stream)`.
pub(crate) fn montecarlo_stream(
    c: f64,
    echo: &EchoConfig,
    pulse: &DrivePulse,
    n_samples: usize,
    seed: u64,
    stream: u64,
) -> Result<DeerSignal> {
    finite("c", c)?;
    if n_samples < 1000 {
        return Err(Error::InvalidInput(format!(
            "Monte Carlo needs at least 1000 samples, got {n_samples}"
        )));
    }
    let drive = DriveRotation::new(echo.e_b, pulse);
    let n_blocks = n_samples.div_ceil(MC_BLOCK);
    let blocks: Vec<RunningStats> = (0..n_blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = substream(seed, &[stream, b as u64]);
            let count = MC_BLOCK.min(n_samples - b * MC_BLOCK);
            let mut stats = RunningStats::default();
            for _ in 0..count {
                let e_1 = uniform_direction(&mut rng).as_vector();
                let (s, co) = uniform_angle(&mut rng).sin_cos();
                stats.push((c * drive.projected_change(e_1, co, s)).cos());
            }
            stats
        })
        .collect();
    let stats = blocks
        .into_iter()
        .fold(RunningStats::default(), RunningStats::merge);
    Ok(DeerSignal {
        value: stats.mean.clamp(-1.0, 1.0),
        converged: true,
        est_error: stats.standard_error(),
    })
}

/// Monte Carlo estimate with `est_error` = sample standard deviation / √n.
/// Identical inputs give bit-identical output regardless of thread count.
pub fn deer_signal_montecarlo(
    c: f64,
    echo: &EchoConfig,
    pulse: &DrivePulse,
    n_samples: usize,
    seed: u64,
) -> Result<DeerSignal> {
    montecarlo_stream(c, echo, pulse, n_samples, seed, 0)
}

/// Detuning of the first revival, where α reaches 2π: √(1/t_p² − Ω²), MHz.
pub fn revival_detuning(pulse: &DrivePulse) -> Result<f64> {
    if pulse.length <= 0.0 {
        return Err(Error::domain("pulse length", pulse.length, "must be positive"));
    }
    let product = pulse.rabi_freq * pulse.length;
    if product > 1.0 {
        return Err(Error::NoRevival(product));
    }
    let inv = 1.0 / pulse.length;
    Ok(((inv - pulse.rabi_freq) * (inv + pulse.rabi_freq)).max(0.0).sqrt())
}

/// How sweeps evaluate each point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Estimator {
    Quadrature(QuadratureSpec),
    /// Grid point `i` draws from substream `(seed, i)`.
    MonteCarlo { n_samples: usize, seed: u64 },
}

impl Default for Estimator {
    fn default() -> Self {
        Estimator::Quadrature(QuadratureSpec::default())
    }
}

impl Estimator {
    fn evaluate(&self, c: f64, echo: &EchoConfig, pulse: &DrivePulse, index: usize) -> Result<DeerSignal> {
        match *self {
            Estimator::Quadrature(ref q) => deer_signal_quadrature(c, echo, pulse, q),
            Estimator::MonteCarlo { n_samples, seed } => {
                montecarlo_stream(c, echo, pulse, n_samples, seed, index as u64)
            }
        }
    }
}

pub(crate) fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidGrid("grid is empty"));
    }
    if grid.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidGrid("grid contains a non-finite value"));
    }
    if grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidGrid("grid is not sorted ascending"));
    }
    Ok(())
}

/// Signal versus detuning at fixed Rabi frequency and pulse length.
pub fn deer_spectrum(
    c: f64,
    echo: &EchoConfig,
    rabi_freq: f64,
    length: f64,
    detunings: &[f64],
    estimator: &Estimator,
) -> Result<Vec<(f64, DeerSignal)>> {
    check_grid(detunings)?;
    detunings
        .par_iter()
        .enumerate()
        .map(|(i, &d)| {
            let pulse = DrivePulse::new(rabi_freq, d, length)?;
            Ok((d, estimator.evaluate(c, echo, &pulse, i)?))
        })
        .collect()
}

/// Signal versus pulse length ("DEER Rabi") at fixed drive.
pub fn deer_rabi(
    c: f64,
    echo: &EchoConfig,
    rabi_freq: f64,
    detuning: f64,
    lengths: &[f64],
    estimator: &Estimator,
) -> Result<Vec<(f64, DeerSignal)>> {
    check_grid(lengths)?;
    lengths
        .par_iter()
        .enumerate()
        .map(|(i, &t)| {
            let pulse = DrivePulse::new(rabi_freq, detuning, t)?;
            Ok((t, estimator.evaluate(c, echo, &pulse, i)?))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::rotate_axis_angle;

    fn echo() -> EchoConfig {
        EchoConfig::new(6.0, UnitVector3::Z).unwrap()
    }

    /// Test-only closed form. A uniformly distributed ê_1 projects onto any
    /// fixed direction uniformly on [-1, 1], and the phase is linear in ê_1
    /// with a coefficient vector of length 2 sinβ |sin(α/2)|, where
    /// sinβ = Ω/√(Ω²+Δ²). Hence f = sin(X)/X with X = 2c sinβ |sin(α/2)|.
    pub(crate) fn sinc_oracle(c: f64, pulse: &DrivePulse) -> f64 {
        let eff = pulse.effective_rabi();
        if eff == 0.0 {
            return 1.0;
        }
        let x = 2.0 * c * (pulse.rabi_freq / eff) * (pulse.rotation_angle() / 2.0).sin().abs();
        if x == 0.0 {
            1.0
        } else {
            x.sin() / x
        }
    }

    #[test]
    fn pulse_validation() {
        assert!(DrivePulse::new(-1.0, 0.0, 0.1).is_err());
        assert!(DrivePulse::new(1.0, 0.0, -0.1).is_err());
        assert!(DrivePulse::new(f64::NAN, 0.0, 0.1).is_err());
        assert!(DrivePulse::new(1e300, 1e300, 1e300).is_err());
        assert!(EchoConfig::new(0.0, UnitVector3::Z).is_err());
        let q = QuadratureSpec {
            n_phi1: 3,
            ..QuadratureSpec::default()
        };
        assert!(q.validate().is_err());
    }

    #[test]
    fn phase_vanishes_without_transverse_drive() {
        let pulse = DrivePulse::new(0.0, 7.0, 0.13).unwrap();
        let e_b = UnitVector3::new(0.3, -0.2, 0.9).unwrap();
        for k in 0..50 {
            let e_1 = UnitVector3::from_angles(0.07 * k as f64, 0.4 * k as f64);
            let phi = accumulated_phase(5.8, e_b, e_1, &pulse, 0.3 * k as f64);
            assert!(phi.abs() < 1e-13, "phi = {phi}");
        }
        let zero_len = DrivePulse::new(5.0, 1.0, 0.0).unwrap();
        let e_1 = UnitVector3::from_angles(1.0, 2.0);
        assert!(accumulated_phase(5.8, e_b, e_1, &zero_len, 1.1).abs() < 1e-15);
    }

    /// Reference evaluation of the composed rotations through the public
    /// axis-angle API and an explicitly built rotating frame.
    #[test]
    fn phase_matches_composed_rotations() {
        let pulse = DrivePulse::resonant(5.0, 0.1).unwrap();
        let e_b = UnitVector3::Z;
        let axis = e_b.orthogonal();
        let alpha = pulse.rotation_angle();
        for i in 0..8 {
            for j in 0..8 {
                let e_1 = UnitVector3::from_angles(0.2 + 0.35 * i as f64, 0.8 * j as f64);
                let phi_rand = 0.9 * (i + j) as f64;
                let step = rotate_axis_angle(e_1, axis, alpha).unwrap();
                let end = rotate_axis_angle(step, e_b, phi_rand).unwrap();
                let expected = 5.8 * (end.dot(&e_b) - e_1.dot(&e_b));
                let got = accumulated_phase(5.8, e_b, e_1, &pulse, phi_rand);
                assert!((got - expected).abs() < 1e-12);
                // a resonant pi pulse flips the ê_B component
                assert!((got + 2.0 * 5.8 * e_1.dot(&e_b)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_coupling_is_exactly_one() {
        let pulse = DrivePulse::resonant(5.0, 0.1).unwrap();
        let q = deer_signal_quadrature(0.0, &echo(), &pulse, &QuadratureSpec::default()).unwrap();
        assert_eq!(q.value, 1.0);
        let mc = deer_signal_montecarlo(0.0, &echo(), &pulse, 1000, 3).unwrap();
        assert_eq!(mc.value, 1.0);
        assert_eq!(mc.est_error, 0.0);
        let none = DrivePulse::resonant(5.0, 0.0).unwrap();
        let q = deer_signal_quadrature(4.0, &echo(), &none, &QuadratureSpec::default()).unwrap();
        assert_eq!(q.value, 1.0);
    }

    #[test]
    fn quadrature_matches_closed_form() {
        let e_b = UnitVector3::new(0.2, 0.5, 0.8).unwrap();
        let echo = EchoConfig::new(6.0, e_b).unwrap();
        for &(c, om, de, tp) in &[
            (1.0, 5.0, 0.0, 0.1),
            (3.0, 5.0, 2.0, 0.07),
            (5.8, 1.12, 0.0, 0.3),
            (10.0, 5.0, 0.0, 0.05),
            (0.4, 2.0, -6.0, 0.4),
        ] {
            let pulse = DrivePulse::new(om, de, tp).unwrap();
            let q = deer_signal_quadrature(c, &echo, &pulse, &QuadratureSpec::default()).unwrap();
            let exact = sinc_oracle(c, &pulse);
            assert!((q.value - exact).abs() < 1e-9, "c={c}: {} vs {exact}", q.value);
            assert!(q.converged);
        }
    }

    #[test]
    fn montecarlo_is_deterministic_and_agrees() {
        let pulse = DrivePulse::resonant(5.0, 0.1).unwrap();
        let a = deer_signal_montecarlo(1.0, &echo(), &pulse, 200_000, 11).unwrap();
        let b = deer_signal_montecarlo(1.0, &echo(), &pulse, 200_000, 11).unwrap();
        assert_eq!(a.value.to_bits(), b.value.to_bits());
        assert_eq!(a.est_error.to_bits(), b.est_error.to_bits());
        let q = deer_signal_quadrature(1.0, &echo(), &pulse, &QuadratureSpec::default()).unwrap();
        assert!((a.value - q.value).abs() <= 3.0 * a.est_error);
        assert!(deer_signal_montecarlo(1.0, &echo(), &pulse, 999, 0).is_err());
    }

    #[test]
    fn revival_detuning_examples() {
        let d = revival_detuning(&DrivePulse::resonant(5.0, 0.1).unwrap()).unwrap();
        assert!((d - 75f64.sqrt()).abs() < 1e-12);
        assert!((d - 8.660).abs() < 1e-3);
        let d = revival_detuning(&DrivePulse::resonant(0.0, 0.1).unwrap()).unwrap();
        assert!((d - 10.0).abs() < 1e-12);
        let d = revival_detuning(&DrivePulse::resonant(4.0, 0.25).unwrap()).unwrap();
        assert_eq!(d, 0.0);
        assert_eq!(
            revival_detuning(&DrivePulse::resonant(6.0, 0.25).unwrap()),
            Err(Error::NoRevival(1.5))
        );
        assert!(revival_detuning(&DrivePulse::resonant(6.0, 0.0).unwrap()).is_err());
    }

    #[test]
    fn spectrum_is_even_and_flat_far_off_resonance() {
        let grid: Vec<f64> = (-20..=20).map(|k| k as f64 * 0.75).collect();
        let spec = deer_spectrum(2.0, &echo(), 5.0, 0.1, &grid, &Estimator::default()).unwrap();
        let n = spec.len();
        for i in 0..n {
            let (a, b) = (spec[i].1, spec[n - 1 - i].1);
            assert!((a.value - b.value).abs() <= 2.0 * a.est_error.max(b.est_error));
        }
        let far = deer_spectrum(2.0, &echo(), 5.0, 0.1, &[250.0], &Estimator::default()).unwrap();
        assert!(far[0].1.value >= 0.99);
        let min = spec
            .iter()
            .min_by(|a, b| a.1.value.total_cmp(&b.1.value))
            .unwrap();
        assert_eq!(min.0, 0.0);
    }

    #[test]
    fn sweeps_reject_bad_grids() {
        let e = Estimator::default();
        assert!(matches!(deer_spectrum(1.0, &echo(), 5.0, 0.1, &[], &e), Err(Error::InvalidGrid(_))));
        assert!(deer_rabi(1.0, &echo(), 5.0, 0.0, &[0.2, 0.1], &e).is_err());
        assert!(deer_rabi(1.0, &echo(), 5.0, 0.0, &[0.0, f64::NAN], &e).is_err());
    }

    #[test]
    fn rabi_sweep_is_periodic_and_marks_pi_and_two_pi() {
        // c = 5.8, Ω = 1.12 MHz: π at 1/(2Ω) ≈ 0.446 µs, 2π at 1/Ω ≈ 0.893 µs
        let om = 1.12;
        let period = 1.0 / om;
        let t_pi = 0.5 / om;
        let grid = [0.0, 0.1, t_pi, 0.6, period, period + 0.1];
        let rabi = deer_rabi(5.8, &echo(), om, 0.0, &grid, &Estimator::default()).unwrap();
        assert_eq!(rabi[0].1.value, 1.0);
        assert!((t_pi - 0.446).abs() < 1e-3 && (period - 0.893).abs() < 1e-3);
        assert!((rabi[4].1.value - 1.0).abs() < 1e-9);
        let expected_pi = (2.0 * 5.8f64).sin() / (2.0 * 5.8);
        assert!((rabi[2].1.value - expected_pi).abs() < 1e-9);
        assert!((rabi[1].1.value - rabi[5].1.value).abs() <= 2.0 * rabi[1].1.est_error.max(rabi[5].1.est_error));
    }

    #[test]
    fn montecarlo_sweep_points_use_independent_streams() {
        let e = Estimator::MonteCarlo {
            n_samples: 4000,
            seed: 5,
        };
        let a = deer_rabi(2.0, &echo(), 5.0, 0.0, &[0.1, 0.1], &e).unwrap();
        assert_ne!(a[0].1.value, a[1].1.value);
        let b = deer_rabi(2.0, &echo(), 5.0, 0.0, &[0.1, 0.1], &e).unwrap();
        assert_eq!(a, b);
    }
}
