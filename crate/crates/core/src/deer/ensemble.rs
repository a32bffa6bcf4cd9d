//! Ensemble DEER signal.
//!
//! With many weakly coupled targets the sensor phase is a sum of independent
//! contributions and tends to a zero-mean Gaussian, so the signal becomes
//! exp(−σ_φ²/2). The Monte Carlo routine sums the per-spin phases explicitly
//! and serves as the check on that approximation.

use rayon::prelude::*;

use crate::error::{finite, Error, Result};
use crate::geometry::{coupling_prefactor, dipolar_coupling, SphericalDirection, UnitVector3};
use crate::rng::{substream, uniform_angle, uniform_direction, RunningStats};

use super::single::{check_grid, DeerSignal, DriveRotation, DrivePulse, EchoConfig};

/// n·c̄²: number of target spins times their mean squared prefactor.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct EnsembleCoupling(f64);

impl EnsembleCoupling {
    pub fn new(n_c2: f64) -> Result<Self> {
        finite("n_c2", n_c2)?;
        if n_c2 < 0.0 {
            return Err(Error::domain("n_c2", n_c2, "must be non-negative"));
        }
        Ok(EnsembleCoupling(n_c2))
    }

    pub fn value(&self) -> f64 {
        self.0
    }
}

/// Phase variance σ_φ² = n c̄² · 4Ω²/(3(Ω²+Δ²)) · sin²(α/2), radians².
pub fn ensemble_variance(n_c2: EnsembleCoupling, pulse: &DrivePulse) -> f64 {
    let eff2 = pulse.rabi_freq * pulse.rabi_freq + pulse.detuning * pulse.detuning;
    if eff2 == 0.0 || n_c2.0 == 0.0 {
        return 0.0;
    }
    let half = (0.5 * pulse.rotation_angle()).sin();
    n_c2.0 * 4.0 * pulse.rabi_freq * pulse.rabi_freq / (3.0 * eff2) * half * half
}

/// Closed-form ensemble signal exp(−σ_φ²/2).
pub fn ensemble_signal(n_c2: EnsembleCoupling, pulse: &DrivePulse) -> DeerSignal {
    DeerSignal::exact((-0.5 * ensemble_variance(n_c2, pulse)).exp())
}

/// Depth of the DEER dip, 1 − signal, i.e. relative to the n c̄² → ∞ limit
/// where the signal vanishes.
pub fn ensemble_dip_depth(n_c2: EnsembleCoupling, pulse: &DrivePulse) -> f64 {
    1.0 - ensemble_signal(n_c2, pulse).value
}

pub fn ensemble_rabi(n_c2: EnsembleCoupling, rabi_freq: f64, detuning: f64, lengths: &[f64]) -> Result<Vec<(f64, DeerSignal)>> {
    check_grid(lengths)?;
    lengths
        .iter()
        .map(|&t| Ok((t, ensemble_signal(n_c2, &DrivePulse::new(rabi_freq, detuning, t)?))))
        .collect()
}

pub fn ensemble_spectrum(n_c2: EnsembleCoupling, rabi_freq: f64, length: f64, detunings: &[f64]) -> Result<Vec<(f64, DeerSignal)>> {
    check_grid(detunings)?;
    detunings
        .iter()
        .map(|&d| Ok((d, ensemble_signal(n_c2, &DrivePulse::new(rabi_freq, d, length)?))))
        .collect()
}

/// Fixed prefactors c_k of the target spins around one sensor.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SpinBath {
    couplings: Vec<f64>,
}

impl SpinBath {
    pub fn new(couplings: Vec<f64>) -> Result<Self> {
        if couplings.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("bath coupling"));
        }
        Ok(SpinBath { couplings })
    }

    /// `n` spins with equal prefactors chosen so that n c̄² = `n_c2`.
    pub fn uniform(n: usize, n_c2: EnsembleCoupling) -> Self {
        let c = if n == 0 { 0.0 } else { (n_c2.value() / n as f64).sqrt() };
        SpinBath {
            couplings: vec![c; n],
        }
    }

    /// Prefactors from target positions (nm, in the NV frame) via the dipolar
    /// field projected on the bias direction.
    pub fn from_positions(positions: &[[f64; 3]], tau: f64, e_b: UnitVector3) -> Result<Self> {
        let couplings = positions
            .iter()
            .map(|p| {
                let r = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
                let theta = if r > 0.0 { (p[2] / r).clamp(-1.0, 1.0).acos() } else { 0.0 };
                let dir = SphericalDirection::new(theta, p[1].atan2(p[0]))?;
                coupling_prefactor(&dipolar_coupling(r, dir)?, tau, e_b)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SpinBath { couplings })
    }

    pub fn couplings(&self) -> &[f64] {
        &self.couplings
    }

    pub fn len(&self) -> usize {
        self.couplings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.couplings.is_empty()
    }

    pub fn n_c2(&self) -> f64 {
        self.couplings.iter().map(|c| c * c).sum()
    }
}

const SHOTS_PER_BLOCK: usize = 4096;

/// Explicit many-spin average: per shot, every target gets an independent
/// orientation, all share one drive phase, and the phases add.
pub fn ensemble_signal_montecarlo(
    bath: &SpinBath,
    echo: &EchoConfig,
    pulse: &DrivePulse,
    n_samples: usize,
    seed: u64,
) -> Result<DeerSignal> {
    ensemble_montecarlo_stream(bath, echo, pulse, n_samples, seed, 0)
}

pub(crate) fn ensemble_montecarlo_stream(
    bath: &SpinBath,
    echo: &EchoConfig,
    pulse: &DrivePulse,
    n_samples: usize,
    seed: u64,
    stream: u64,
) -> Result<DeerSignal> {
    if n_samples < 1000 {
        return Err(Error::InvalidInput(format!(
            "Monte Carlo needs at least 1000 samples, got {n_samples}"
        )));
    }
    if bath.is_empty() || bath.couplings.iter().all(|&c| c == 0.0) {
        return Ok(DeerSignal::exact(1.0));
    }
    let drive = DriveRotation::new(echo.e_b, pulse);
    let n_blocks = n_samples.div_ceil(SHOTS_PER_BLOCK);
    let stats = (0..n_blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = substream(seed, &[stream, b as u64]);
            let shots = SHOTS_PER_BLOCK.min(n_samples - b * SHOTS_PER_BLOCK);
            let mut stats = RunningStats::default();
            for _ in 0..shots {
                let (s, co) = uniform_angle(&mut rng).sin_cos();
                let phi: f64 = bath
                    .couplings
                    .iter()
                    .map(|&c| c * drive.projected_change(uniform_direction(&mut rng).as_vector(), co, s))
                    .sum();
                stats.push(phi.cos());
            }
            stats
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(RunningStats::default(), RunningStats::merge);
    Ok(DeerSignal {
        value: stats.mean.clamp(-1.0, 1.0),
        converged: true,
        est_error: stats.standard_error(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::deer::single::deer_signal_montecarlo;

    fn nc2(v: f64) -> EnsembleCoupling {
        EnsembleCoupling::new(v).unwrap()
    }

    #[test]
    fn variance_examples() {
        let pi_pulse = DrivePulse::resonant(5.0, 0.1).unwrap();
        assert!((ensemble_variance(nc2(1.0), &pi_pulse) - 4.0 / 3.0).abs() < 1e-14);
        assert_eq!(ensemble_variance(nc2(1.0), &DrivePulse::resonant(5.0, 0.0).unwrap()), 0.0);
        assert_eq!(ensemble_variance(nc2(3.0), &DrivePulse::new(0.0, 0.0, 0.3).unwrap()), 0.0);
        let far = DrivePulse::new(5.0, 1e7, 0.1).unwrap();
        assert!(ensemble_variance(nc2(1.0), &far) < 1e-12);
        assert!(EnsembleCoupling::new(-0.1).is_err());
    }

    #[test]
    fn signal_examples() {
        let pi_pulse = DrivePulse::resonant(5.0, 0.1).unwrap();
        assert_eq!(ensemble_signal(nc2(0.0), &pi_pulse).value, 1.0);
        let s = ensemble_signal(nc2(1.0), &pi_pulse).value;
        assert!((s - (-2.0f64 / 3.0).exp()).abs() < 1e-15);
        assert!((s - 0.5134).abs() < 1e-4);
        assert!((ensemble_dip_depth(nc2(1.0), &pi_pulse) - (1.0 - s)).abs() < 1e-15);
    }

    #[test]
    fn fig6c_parameters_reach_the_expected_pi_pulse_depth() {
        // 2 n c̄²/3 = 2.5 with Ω = 2.2 MHz
        let n = nc2(2.5 * 1.5);
        let t_pi = 0.5 / 2.2;
        let curve = ensemble_rabi(n, 2.2, 0.0, &[0.0, t_pi, 2.0 * t_pi]).unwrap();
        assert_eq!(curve[0].1.value, 1.0);
        assert!((curve[1].1.value - (-2.5f64).exp()).abs() < 1e-12);
        assert!((curve[2].1.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn closed_form_is_monotone_and_periodic() {
        for k in 0..200 {
            let t = 0.2 * k as f64 / 200.0;
            let p = DrivePulse::new(3.0, 1.5, t).unwrap();
            let later = DrivePulse::new(3.0, 1.5, t + 1.0 / p.effective_rabi()).unwrap();
            let a = ensemble_signal(nc2(4.0), &p).value;
            assert!(a > 0.0 && a <= 1.0);
            assert!(ensemble_signal(nc2(5.0), &p).value <= a);
            assert!((ensemble_signal(nc2(4.0), &later).value - a).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_bath_gives_one() {
        let echo = EchoConfig::new(6.0, UnitVector3::Z).unwrap();
        let p = DrivePulse::resonant(5.0, 0.1).unwrap();
        let s = ensemble_signal_montecarlo(&SpinBath::default(), &echo, &p, 1000, 0).unwrap();
        assert_eq!(s.value, 1.0);
    }

    #[test]
    fn single_spin_bath_reduces_to_single_target() {
        let echo = EchoConfig::new(6.0, UnitVector3::Z).unwrap();
        let p = DrivePulse::resonant(5.0, 0.1).unwrap();
        let bath = SpinBath::new(vec![2.0]).unwrap();
        let a = ensemble_signal_montecarlo(&bath, &echo, &p, 400_000, 9).unwrap();
        let b = deer_signal_montecarlo(2.0, &echo, &p, 400_000, 10).unwrap();
        let sigma = (a.est_error.powi(2) + b.est_error.powi(2)).sqrt();
        assert!((a.value - b.value).abs() <= 3.0 * sigma, "{a:?} vs {b:?}");
    }

    #[test]
    fn bath_from_positions_matches_direct_prefactors() {
        let positions = [[0.0, 0.0, 10.0], [10.0, 0.0, 0.0]];
        let bath = SpinBath::from_positions(&positions, 6.0, UnitVector3::Z).unwrap();
        assert!((bath.couplings()[0] - 1.962).abs() < 0.005);
        assert!((bath.couplings()[1] + 0.981).abs() < 0.005);
        let u = SpinBath::uniform(4, nc2(9.0));
        assert!((u.n_c2() - 9.0).abs() < 1e-12);
        assert_eq!(u.len(), 4);
    }
}
