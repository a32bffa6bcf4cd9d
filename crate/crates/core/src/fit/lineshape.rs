//! DEER dip lineshapes and weighted least-squares fits.
//!
//! Dips are modelled as `baseline − amplitude · shape(f − center)` where the
//! shape peaks at 1 on resonance.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::nelder_mead::{minimize, NelderMeadOptions};
use crate::error::{finite, Error, Result};

/// Transition probability of a square pulse that is a π pulse on resonance:
/// (π²/4) sinc²(π√(Ω²+Δ²)/(2Ω)).
pub fn sinc_squared_profile(detuning: f64, rabi_freq: f64) -> f64 {
    let x = PI * rabi_freq.hypot(detuning) / (2.0 * rabi_freq);
    let sinc = if x == 0.0 { 1.0 } else { x.sin() / x };
    PI * PI / 4.0 * sinc * sinc
}

/// Unit-height Lorentzian with half width at half maximum `hwhm`.
pub fn lorentzian_profile(detuning: f64, hwhm: f64) -> f64 {
    hwhm * hwhm / (detuning * detuning + hwhm * hwhm)
}

/// Full width at half maximum of the sinc² profile, MHz.
///
/// Solves sin(x)/x = √2/π on (π/2, π) by Newton iteration and maps
/// x = π√(1+δ²)/2 back to the detuning δΩ.
pub fn sinc_squared_fwhm(rabi_freq: f64) -> f64 {
    let target = 2f64.sqrt() / PI;
    let mut x: f64 = 2.0;
    for _ in 0..50 {
        let f = x.sin() / x - target;
        let df = (x * x.cos() - x.sin()) / (x * x);
        let step = f / df;
        x -= step;
        if step.abs() < 1e-15 {
            break;
        }
    }
    let ratio = 2.0 * x / PI;
    2.0 * rabi_freq * (ratio * ratio - 1.0).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LineshapeKind {
    SincSquared,
    Lorentzian,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineshapeModel {
    pub kind: LineshapeKind,
    /// MHz.
    pub center: f64,
    /// Dip depth in signal units.
    pub amplitude: f64,
    /// Rabi frequency Ω for sinc², half width γ for the Lorentzian, MHz.
    pub width: f64,
    pub baseline: f64,
}

impl LineshapeModel {
    pub fn evaluate(&self, freq: f64) -> f64 {
        let d = freq - self.center;
        let shape = match self.kind {
            LineshapeKind::SincSquared => sinc_squared_profile(d, self.width),
            LineshapeKind::Lorentzian => lorentzian_profile(d, self.width),
        };
        self.baseline - self.amplitude * shape
    }

    pub fn fwhm(&self) -> f64 {
        match self.kind {
            LineshapeKind::Lorentzian => 2.0 * self.width,
            LineshapeKind::SincSquared => sinc_squared_fwhm(self.width),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DataPoint {
    pub freq: f64,
    pub signal: f64,
    pub error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineshapeFit {
    pub model: LineshapeModel,
    pub chi2: f64,
    pub reduced_chi2: f64,
    pub converged: bool,
    /// No dip could be resolved (flat data).
    pub degenerate: bool,
    pub evaluations: usize,
}

fn chi2(data: &[DataPoint], model: &LineshapeModel) -> f64 {
    data.iter()
        .map(|p| {
            let r = (p.signal - model.evaluate(p.freq)) / p.error;
            r * r
        })
        .sum()
}

fn model_from(kind: LineshapeKind, p: &[f64]) -> LineshapeModel {
    LineshapeModel {
        kind,
        center: p[0],
        amplitude: p[1],
        width: p[2].abs(),
        baseline: p[3],
    }
}

/// Weighted least squares over (center, amplitude, width, baseline).
///
/// A coarse grid over center and width seeds the search (amplitude and
/// baseline solved linearly at each grid node), then Nelder-Mead refines all
/// four parameters.
pub fn fit_lineshape(data: &[DataPoint], kind: LineshapeKind) -> Result<LineshapeFit> {
    if data.len() < 5 {
        return Err(Error::InvalidInput(format!(
            "lineshape fit needs at least 5 points, got {}",
            data.len()
        )));
    }
    for p in data {
        finite("frequency", p.freq)?;
        finite("signal", p.signal)?;
        finite("error", p.error)?;
        if p.error <= 0.0 {
            return Err(Error::domain("error", p.error, "uncertainties must be positive"));
        }
    }
    let mut sorted = data.to_vec();
    sorted.sort_by(|a, b| a.freq.total_cmp(&b.freq));
    let f_lo = sorted[0].freq;
    let f_hi = sorted[sorted.len() - 1].freq;
    let span = f_hi - f_lo;
    let dof = (data.len() as f64 - 4.0).max(1.0);

    let (s_min, s_max) = data
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.signal), hi.max(p.signal)));
    let scale = s_max.abs().max(s_min.abs());
    if span <= 0.0 || s_max - s_min <= 1e-12 * scale.max(f64::MIN_POSITIVE) {
        let baseline = weighted_mean(data);
        let model = LineshapeModel {
            kind,
            center: 0.5 * (f_lo + f_hi),
            amplitude: 0.0,
            width: span.max(1.0) / 4.0,
            baseline,
        };
        let c2 = chi2(data, &model);
        return Ok(LineshapeFit {
            model,
            chi2: c2,
            reduced_chi2: c2 / dof,
            converged: true,
            degenerate: true,
            evaluations: 0,
        });
    }

    // coarse seed
    let spacing = sorted
        .windows(2)
        .map(|w| w[1].freq - w[0].freq)
        .filter(|d| *d > 0.0)
        .fold(f64::INFINITY, f64::min);
    let w_min = (0.5 * spacing).max(span * 1e-4);
    let w_max = span;
    let mut best = (f64::INFINITY, [0.0; 4]);
    let n_center = 4 * data.len().min(100);
    for ic in 0..=n_center {
        let center = f_lo + span * ic as f64 / n_center as f64;
        for iw in 0..=24 {
            let width = w_min * (w_max / w_min).powf(iw as f64 / 24.0);
            let shape: Vec<f64> = data
                .iter()
                .map(|p| {
                    LineshapeModel {
                        kind,
                        center,
                        amplitude: -1.0,
                        width,
                        baseline: 0.0,
                    }
                    .evaluate(p.freq)
                })
                .collect();
            if let Some((amp, base)) = linear_solve(data, &shape) {
                let m = LineshapeModel {
                    kind,
                    center,
                    amplitude: amp,
                    width,
                    baseline: base,
                };
                let c2 = chi2(data, &m);
                if c2 < best.0 {
                    best = (c2, [center, amp, width, base]);
                }
            }
        }
    }

    let start = best.1;
    let amp_step = if start[1].abs() > 0.0 { 0.1 * start[1].abs() } else { 0.1 * (s_max - s_min) };
    let steps = [
        0.1 * start[2].max(w_min),
        amp_step,
        0.1 * start[2].max(w_min),
        amp_step,
    ];
    let objective = |p: &[f64]| chi2(data, &model_from(kind, p));
    let opts = NelderMeadOptions::default();
    let mut result = minimize(objective, &start, &steps, &opts);
    let mut evaluations = result.evaluations;
    // restart from the optimum until the value settles
    for _ in 0..4 {
        let restart_steps: Vec<f64> = steps.iter().map(|s| s * 0.1).collect();
        let again = minimize(objective, &result.x, &restart_steps, &opts);
        evaluations += again.evaluations;
        let settled = result.value - again.value <= opts.rel_tol * result.value.abs() + opts.abs_tol;
        if again.value <= result.value {
            result = again;
        }
        if settled {
            break;
        }
    }
    let model = model_from(kind, &result.x);
    let c2 = result.value;
    Ok(LineshapeFit {
        model,
        chi2: c2,
        reduced_chi2: c2 / dof,
        converged: result.converged,
        degenerate: model.amplitude == 0.0,
        evaluations,
    })
}

fn weighted_mean(data: &[DataPoint]) -> f64 {
    let (num, den) = data.iter().fold((0.0, 0.0), |(n, d), p| {
        let w = 1.0 / (p.error * p.error);
        (n + w * p.signal, d + w)
    });
    num / den
}

/// Weighted linear least squares for `signal ≈ base + k · shape`; returns (−k, base).
fn linear_solve(data: &[DataPoint], shape: &[f64]) -> Option<(f64, f64)> {
    let (mut sw, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (p, &x) in data.iter().zip(shape) {
        let w = 1.0 / (p.error * p.error);
        sw += w;
        sx += w * x;
        sy += w * p.signal;
        sxx += w * x * x;
        sxy += w * x * p.signal;
    }
    let det = sw * sxx - sx * sx;
    if det.abs() <= 1e-14 * sw * sxx {
        return None;
    }
    let amp = (sw * sxy - sx * sy) / det;
    let base = (sy - amp * sx) / sw;
    // signal = base − amplitude · shape
    Some((-amp, base))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sinc_profile_examples() {
        assert_eq!(sinc_squared_profile(0.0, 1.12), 1.0);
        assert!(sinc_squared_profile(3f64.sqrt() * 2.0, 2.0) < 1e-30);
        assert!((sinc_squared_profile(1.0, 1.0) - sinc_squared_profile(-1.0, 1.0)).abs() < 1e-16);
    }

    fn bisect_half(rabi: f64) -> f64 {
        let (mut lo, mut hi) = (0.0, 3f64.sqrt() * rabi);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if sinc_squared_profile(mid, rabi) > 0.5 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        2.0 * 0.5 * (lo + hi)
    }

    #[test]
    fn sinc_fwhm_matches_bisection() {
        for rabi in [0.5, 1.12, 5.0] {
            assert!((sinc_squared_fwhm(rabi) - bisect_half(rabi)).abs() < 1e-10);
        }
        assert!((sinc_squared_fwhm(1.0) - 1.5976).abs() < 1e-3);
    }

    fn synth(kind: LineshapeKind, center: f64, width: f64, amp: f64, base: f64, noise: &[f64]) -> Vec<DataPoint> {
        let model = LineshapeModel {
            kind,
            center,
            amplitude: amp,
            width,
            baseline: base,
        };
        (0..noise.len())
            .map(|i| {
                let f = center - 10.0 + 20.0 * i as f64 / (noise.len() - 1) as f64;
                DataPoint {
                    freq: f,
                    signal: model.evaluate(f) + noise[i],
                    error: 0.01,
                }
            })
            .collect()
    }

    #[test]
    fn noiseless_lorentzian_roundtrip() {
        let data = synth(LineshapeKind::Lorentzian, 495.0, 1.0, 0.2, 1.0, &[0.0; 81]);
        let fit = fit_lineshape(&data, LineshapeKind::Lorentzian).unwrap();
        assert!((fit.model.fwhm() - 2.0).abs() < 0.01, "{fit:?}");
        assert!((fit.model.center - 495.0).abs() < 1e-3);
        assert!(!fit.degenerate);
    }

    #[test]
    fn constant_data_is_degenerate() {
        let data: Vec<DataPoint> = (0..10)
            .map(|i| DataPoint {
                freq: i as f64,
                signal: 0.8,
                error: 0.01,
            })
            .collect();
        let fit = fit_lineshape(&data, LineshapeKind::Lorentzian).unwrap();
        assert!(fit.degenerate);
        assert_eq!(fit.model.amplitude, 0.0);
        assert!((fit.model.baseline - 0.8).abs() < 1e-15);
    }

    #[test]
    fn noisy_sinc_recovers_center() {
        let mut rng = crate::rng::substream(17, &[]);
        use rand::Rng;
        let noise: Vec<f64> = (0..101)
            .map(|_| {
                // Box-Muller, 1% of the baseline
                let u1: f64 = rng.random::<f64>().max(1e-300);
                let u2: f64 = rng.random();
                0.01 * (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
            })
            .collect();
        let data = synth(LineshapeKind::SincSquared, 486.4, 2.2, 0.3, 1.0, &noise);
        let fit = fit_lineshape(&data, LineshapeKind::SincSquared).unwrap();
        assert!((fit.model.center - 486.4).abs() < 0.1, "{fit:?}");
        assert!(fit.reduced_chi2 < 2.0);
    }

    #[test]
    fn rejects_bad_input() {
        let mut data = synth(LineshapeKind::Lorentzian, 10.0, 1.0, 0.2, 1.0, &[0.0; 6]);
        assert!(fit_lineshape(&data[..4], LineshapeKind::Lorentzian).is_err());
        data[0].error = 0.0;
        assert!(fit_lineshape(&data, LineshapeKind::Lorentzian).is_err());
    }

    #[test]
    fn fit_is_scale_equivariant() {
        let data = synth(LineshapeKind::Lorentzian, 810.0, 1.3, 0.15, 1.0, &[0.002, -0.001, 0.0, 0.003, -0.002, 0.001, 0.0, -0.003, 0.002, 0.0, 0.001, -0.001, 0.0, 0.002, -0.002, 0.001, 0.0, 0.0, -0.001, 0.002, 0.001]);
        let scaled: Vec<DataPoint> = data
            .iter()
            .map(|p| DataPoint {
                freq: p.freq,
                signal: 3.0 * p.signal,
                error: 3.0 * p.error,
            })
            .collect();
        let a = fit_lineshape(&data, LineshapeKind::Lorentzian).unwrap();
        let b = fit_lineshape(&scaled, LineshapeKind::Lorentzian).unwrap();
        assert!((a.model.center - b.model.center).abs() < 1e-6);
        assert!((a.model.width - b.model.width).abs() < 1e-6);
        assert!((3.0 * a.model.amplitude - b.model.amplitude).abs() < 1e-6);
        assert!((3.0 * a.model.baseline - b.model.baseline).abs() < 1e-6);
    }
}
