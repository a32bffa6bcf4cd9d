//! EPR transition spectra.
//!
//! Line intensities use a linearly polarized drive: the electron spin
//! component along the unit vector perpendicular to B in the plane spanned by
//! B and the principal z-axis (principal x when B is along z or zero).

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::hamiltonian::{build_hamiltonian, FieldConfig, SpinSystem};
use super::linalg::{eigen_solve, ComplexMatrix};
use super::operators::spin_operators;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransitionLine {
    pub frequency_mhz: f64,
    pub intensity: f64,
}

/// Lines sorted by frequency, strongest line normalized to 1.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SpectrumResult {
    pub lines: Vec<TransitionLine>,
}

impl SpectrumResult {
    /// The `k` most intense lines, returned in ascending frequency.
    pub fn strongest(&self, k: usize) -> Vec<TransitionLine> {
        let mut by_intensity = self.lines.clone();
        by_intensity.sort_by(|a, b| {
            b.intensity
                .total_cmp(&a.intensity)
                .then(a.frequency_mhz.total_cmp(&b.frequency_mhz))
        });
        by_intensity.truncate(k);
        by_intensity.sort_by(|a, b| a.frequency_mhz.total_cmp(&b.frequency_mhz));
        by_intensity
    }

    pub fn frequencies(&self) -> Vec<f64> {
        self.lines.iter().map(|l| l.frequency_mhz).collect()
    }

    /// Sum of Gaussians of the given FWHM, evaluated on `grid` (MHz).
    pub fn broadened(&self, fwhm_mhz: f64, grid: &[f64]) -> Result<Vec<f64>> {
        if !(fwhm_mhz > 0.0) || !fwhm_mhz.is_finite() {
            return Err(Error::domain("fwhm", fwhm_mhz, "must be positive"));
        }
        let sigma = fwhm_mhz / (2.0 * (2.0 * std::f64::consts::LN_2).sqrt());
        Ok(grid
            .iter()
            .map(|&f| {
                self.lines
                    .iter()
                    .map(|l| {
                        let d = (f - l.frequency_mhz) / sigma;
                        l.intensity * (-0.5 * d * d).exp()
                    })
                    .sum()
            })
            .collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumOptions {
    /// Lines weaker than this fraction of the strongest are dropped.
    pub intensity_floor: f64,
    /// Lines closer than this (MHz) are merged, intensities summed.
    pub merge_tol_mhz: f64,
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        SpectrumOptions {
            intensity_floor: 1e-3,
            merge_tol_mhz: 0.1,
        }
    }
}

fn drive_operator(sys: &SpinSystem, field: &FieldConfig) -> Result<ComplexMatrix> {
    let b = field.cartesian();
    let mag = field.magnitude;
    let mut d = [1.0, 0.0, 0.0];
    if mag > 0.0 {
        let u = [b[0] / mag, b[1] / mag, b[2] / mag];
        let perp = [-u[2] * u[0], -u[2] * u[1], 1.0 - u[2] * u[2]];
        let n = (perp[0] * perp[0] + perp[1] * perp[1] + perp[2] * perp[2]).sqrt();
        if n > 1e-9 {
            d = [perp[0] / n, perp[1] / n, perp[2] / n];
        }
    }
    let s = spin_operators(sys.electron_spin)?;
    let one_n = ComplexMatrix::identity(spin_operators(sys.nuclear_spin)?.dim());
    let mut op = ComplexMatrix::zeros(s.dim());
    for (a, &w) in d.iter().enumerate() {
        if w != 0.0 {
            op = op.add(&s.component(a).scale(w));
        }
    }
    Ok(op.kron(&one_n))
}

pub fn transition_spectrum(sys: &SpinSystem, field: &FieldConfig) -> Result<SpectrumResult> {
    transition_spectrum_with(sys, field, &SpectrumOptions::default())
}

/// All pairwise transitions λ_j − λ_i (i < j), weighted by
/// |⟨j|S_⊥|i⟩|², merged, normalized and thresholded.
pub fn transition_spectrum_with(
    sys: &SpinSystem,
    field: &FieldConfig,
    opts: &SpectrumOptions,
) -> Result<SpectrumResult> {
    let h = build_hamiltonian(sys, field)?;
    let eig = eigen_solve(&h);
    let drive = drive_operator(sys, field)?;
    let n = eig.values.len();
    let vectors: Vec<Vec<Complex64>> = (0..n).map(|k| eig.vector(k)).collect();
    let mut raw = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            let amp = drive.sandwich(&vectors[j], &vectors[i]).norm_sqr();
            raw.push(TransitionLine {
                frequency_mhz: (eig.values[j] - eig.values[i]).abs(),
                intensity: amp,
            });
        }
    }
    raw.sort_by(|a, b| a.frequency_mhz.total_cmp(&b.frequency_mhz));

    let mut merged: Vec<TransitionLine> = Vec::with_capacity(raw.len());
    let mut cluster_end = f64::NEG_INFINITY;
    for line in raw {
        match merged.last_mut() {
            Some(last) if line.frequency_mhz - cluster_end <= opts.merge_tol_mhz => {
                let total = last.intensity + line.intensity;
                if total > 0.0 {
                    last.frequency_mhz =
                        (last.frequency_mhz * last.intensity + line.frequency_mhz * line.intensity) / total;
                }
                last.intensity = total;
            }
            _ => merged.push(line),
        }
        cluster_end = line.frequency_mhz;
    }

    let max = merged.iter().map(|l| l.intensity).fold(0.0, f64::max);
    if max <= 0.0 {
        return Ok(SpectrumResult::default());
    }
    let lines = merged
        .into_iter()
        .map(|l| TransitionLine {
            frequency_mhz: l.frequency_mhz,
            intensity: l.intensity / max,
        })
        .filter(|l| l.intensity >= opts.intensity_floor)
        .collect();
    Ok(SpectrumResult { lines })
}
