//! χ² grid fit of field magnitude and polar angle to observed resonances.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::lineshape::LineshapeFit;
use crate::error::{finite, Error, Result};
use crate::table::fmt_f64;
use crate::spin::{transition_spectrum_with, FieldConfig, SpectrumOptions, SpinSystem};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObservedPeak {
    /// MHz.
    pub frequency: f64,
    /// One-sigma uncertainty, MHz.
    pub uncertainty: f64,
}

impl ObservedPeak {
    pub fn new(frequency: f64, uncertainty: f64) -> Result<Self> {
        finite("peak frequency", frequency)?;
        finite("peak uncertainty", uncertainty)?;
        if uncertainty <= 0.0 {
            return Err(Error::domain("peak uncertainty", uncertainty, "must be positive"));
        }
        Ok(ObservedPeak {
            frequency,
            uncertainty,
        })
    }

    /// Peak from a fitted dip, with half the fitted FWHM as uncertainty.
    pub fn from_fit(fit: &LineshapeFit) -> Result<Self> {
        ObservedPeak::new(fit.model.center, 0.5 * fit.model.fwhm())
    }
}

/// Non-empty set of observed peaks, held in ascending frequency.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObservedPeaks(Vec<ObservedPeak>);

impl ObservedPeaks {
    pub fn new(mut peaks: Vec<ObservedPeak>) -> Result<Self> {
        if peaks.is_empty() {
            return Err(Error::InvalidInput("at least one observed peak is required".into()));
        }
        for p in &peaks {
            ObservedPeak::new(p.frequency, p.uncertainty)?;
        }
        peaks.sort_by(|a, b| {
            a.frequency
                .total_cmp(&b.frequency)
                .then(a.uncertainty.total_cmp(&b.uncertainty))
        });
        Ok(ObservedPeaks(peaks))
    }

    /// Peaks sharing one uncertainty.
    pub fn with_uniform_sigma(frequencies: &[f64], sigma: f64) -> Result<Self> {
        ObservedPeaks::new(
            frequencies
                .iter()
                .map(|&f| ObservedPeak::new(f, sigma))
                .collect::<Result<_>>()?,
        )
    }

    pub fn peaks(&self) -> &[ObservedPeak] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    /// Simulated lines weaker than this (relative to the strongest) are not
    /// eligible for matching.
    pub match_floor: f64,
    pub spectrum: SpectrumOptions,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            match_floor: 0.1,
            spectrum: SpectrumOptions::default(),
        }
    }
}

/// χ² of one set of simulated line frequencies against the observed peaks.
///
/// Pairs are assigned greedily, closest first, each simulated line used at
/// most once; ties are broken by frequency so the result does not depend on
/// the order the peaks were given in. Returns +∞ when there are fewer
/// simulated lines than peaks.
pub fn match_chi2(simulated: &[f64], peaks: &ObservedPeaks) -> f64 {
    let obs = peaks.peaks();
    if simulated.len() < obs.len() {
        return f64::INFINITY;
    }
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(obs.len() * simulated.len());
    for (k, p) in obs.iter().enumerate() {
        for (j, &f) in simulated.iter().enumerate() {
            pairs.push(((f - p.frequency).abs(), k, j));
        }
    }
    pairs.sort_by(|a, b| {
        a.0.total_cmp(&b.0)
            .then(obs[a.1].frequency.total_cmp(&obs[b.1].frequency))
            .then(simulated[a.2].total_cmp(&simulated[b.2]))
    });
    let mut assigned: Vec<Option<f64>> = vec![None; obs.len()];
    let mut used = vec![false; simulated.len()];
    let mut remaining = obs.len();
    for (_, k, j) in pairs {
        if assigned[k].is_none() && !used[j] {
            assigned[k] = Some(simulated[j]);
            used[j] = true;
            remaining -= 1;
            if remaining == 0 {
                break;
            }
        }
    }
    obs.iter()
        .zip(assigned)
        .map(|(p, f)| {
            let d = (f.expect("every peak is assigned") - p.frequency) / p.uncertainty;
            d * d
        })
        .sum()
}

/// χ² at a single (B, θ) with the field in the principal x–z plane.
pub fn chi2_at(sys: &SpinSystem, peaks: &ObservedPeaks, b: f64, theta: f64, opts: &FitOptions) -> Result<f64> {
    let field = FieldConfig::new(b, theta, 0.0)?;
    let spectrum = transition_spectrum_with(sys, &field, &opts.spectrum)?;
    let eligible: Vec<f64> = spectrum
        .lines
        .iter()
        .filter(|l| l.intensity >= opts.match_floor)
        .map(|l| l.frequency_mhz)
        .collect();
    Ok(match_chi2(&eligible, peaks))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridMinimum {
    pub b_index: usize,
    pub theta_index: usize,
    /// Gauss.
    pub b: f64,
    /// Radians.
    pub theta: f64,
    pub chi2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitGrid {
    /// Gauss, ascending.
    pub b_axis: Vec<f64>,
    /// Radians, ascending.
    pub theta_axis: Vec<f64>,
    /// Row-major: `chi2[ib * theta_axis.len() + it]`.
    pub chi2: Vec<f64>,
    /// Grid-local minima, lowest χ² first.
    pub minima: Vec<GridMinimum>,
}

fn check_axis(axis: &[f64], what: &'static str) -> Result<()> {
    if axis.is_empty() {
        return Err(Error::InvalidGrid(what));
    }
    if axis.iter().any(|v| !v.is_finite()) || axis.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidGrid(what));
    }
    Ok(())
}

impl FitGrid {
    /// Wraps a precomputed surface and locates its minima.
    pub fn from_values(b_axis: Vec<f64>, theta_axis: Vec<f64>, chi2: Vec<f64>) -> Result<Self> {
        check_axis(&b_axis, "B axis must be non-empty, finite and strictly ascending")?;
        check_axis(&theta_axis, "theta axis must be non-empty, finite and strictly ascending")?;
        if chi2.len() != b_axis.len() * theta_axis.len() {
            return Err(Error::InvalidInput(format!(
                "chi2 has {} values for a {}x{} grid",
                chi2.len(),
                b_axis.len(),
                theta_axis.len()
            )));
        }
        if chi2.iter().any(|v| v.is_nan() || *v < 0.0) {
            return Err(Error::InvalidInput("chi2 values must be non-negative".into()));
        }
        let mut grid = FitGrid {
            b_axis,
            theta_axis,
            chi2,
            minima: Vec::new(),
        };
        grid.minima = grid.find_minima();
        Ok(grid)
    }

    pub fn at(&self, ib: usize, it: usize) -> f64 {
        self.chi2[ib * self.theta_axis.len() + it]
    }

    fn find_minima(&self) -> Vec<GridMinimum> {
        let (nb, nt) = (self.b_axis.len() as isize, self.theta_axis.len() as isize);
        let mut minima = Vec::new();
        for ib in 0..nb {
            for it in 0..nt {
                let v = self.at(ib as usize, it as usize);
                if !v.is_finite() {
                    continue;
                }
                let is_min = (-1..=1).all(|db| {
                    (-1..=1).all(|dt| {
                        let (jb, jt) = (ib + db, it + dt);
                        (db == 0 && dt == 0)
                            || jb < 0
                            || jt < 0
                            || jb >= nb
                            || jt >= nt
                            || v <= self.at(jb as usize, jt as usize)
                    })
                });
                if is_min {
                    minima.push(GridMinimum {
                        b_index: ib as usize,
                        theta_index: it as usize,
                        b: self.b_axis[ib as usize],
                        theta: self.theta_axis[it as usize],
                        chi2: v,
                    });
                }
            }
        }
        minima.sort_by(|a, b| {
            a.chi2
                .total_cmp(&b.chi2)
                .then(a.b_index.cmp(&b.b_index))
                .then(a.theta_index.cmp(&b.theta_index))
        });
        minima
    }

    /// Surface as CSV: `B,theta,chi2` in G, degrees and dimensionless.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "# units: B [G], theta [deg], chi2 [1]")?;
        writeln!(out, "B,theta,chi2")?;
        for (ib, b) in self.b_axis.iter().enumerate() {
            for (it, t) in self.theta_axis.iter().enumerate() {
                writeln!(out, "{},{},{}", fmt_f64(*b), fmt_f64(t.to_degrees()), fmt_f64(self.at(ib, it)))?;
            }
        }
        Ok(())
    }
}

/// χ² over the full (B, θ) grid. Cells are evaluated in parallel; the result
/// does not depend on evaluation order.
pub fn chi2_surface(
    sys: &SpinSystem,
    peaks: &ObservedPeaks,
    b_grid: &[f64],
    theta_grid: &[f64],
    opts: &FitOptions,
) -> Result<FitGrid> {
    sys.validate()?;
    check_axis(b_grid, "B axis must be non-empty, finite and strictly ascending")?;
    check_axis(theta_grid, "theta axis must be non-empty, finite and strictly ascending")?;
    let nt = theta_grid.len();
    let chi2 = (0..b_grid.len() * nt)
        .into_par_iter()
        .map(|idx| chi2_at(sys, peaks, b_grid[idx / nt], theta_grid[idx % nt], opts))
        .collect::<Result<Vec<_>>>()?;
    FitGrid::from_values(b_grid.to_vec(), theta_grid.to_vec(), chi2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisInterval {
    pub lower: f64,
    pub upper: f64,
    /// The Δχ² = 1 crossing below the minimum lies outside the grid.
    pub lower_open: bool,
    pub upper_open: bool,
}

impl AxisInterval {
    pub fn half_width(&self) -> f64 {
        0.5 * (self.upper - self.lower)
    }

    pub fn is_open(&self) -> bool {
        self.lower_open || self.upper_open
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyIntervals {
    /// Gauss.
    pub b: AxisInterval,
    /// Radians.
    pub theta: AxisInterval,
}

fn walk(axis: &[f64], values: &dyn Fn(usize) -> f64, start: usize, target: f64, step: isize) -> (f64, bool) {
    let mut i = start;
    loop {
        let next = i as isize + step;
        if next < 0 || next as usize >= axis.len() {
            return (axis[i], true);
        }
        let j = next as usize;
        let (vi, vj) = (values(i), values(j));
        if vj > target {
            let t = if vj.is_finite() { (target - vi) / (vj - vi) } else { 0.0 };
            return (axis[i] + t * (axis[j] - axis[i]), false);
        }
        i = j;
    }
}

/// Δχ² = 1 intervals along each axis through a reported minimum, linearly
/// interpolated between grid nodes.
pub fn uncertainty_intervals(grid: &FitGrid, minimum_index: usize) -> Result<UncertaintyIntervals> {
    let m = grid.minima.get(minimum_index).ok_or_else(|| {
        Error::InvalidInput(format!(
            "minimum index {minimum_index} out of range ({} minima)",
            grid.minima.len()
        ))
    })?;
    let target = m.chi2 + 1.0;
    let along_b = |i: usize| grid.at(i, m.theta_index);
    let along_t = |i: usize| grid.at(m.b_index, i);
    let (b_lo, b_lo_open) = walk(&grid.b_axis, &along_b, m.b_index, target, -1);
    let (b_hi, b_hi_open) = walk(&grid.b_axis, &along_b, m.b_index, target, 1);
    let (t_lo, t_lo_open) = walk(&grid.theta_axis, &along_t, m.theta_index, target, -1);
    let (t_hi, t_hi_open) = walk(&grid.theta_axis, &along_t, m.theta_index, target, 1);
    Ok(UncertaintyIntervals {
        b: AxisInterval {
            lower: b_lo,
            upper: b_hi,
            lower_open: b_lo_open,
            upper_open: b_hi_open,
        },
        theta: AxisInterval {
            lower: t_lo,
            upper: t_hi,
            lower_open: t_lo_open,
            upper_open: t_hi_open,
        },
    })
}
