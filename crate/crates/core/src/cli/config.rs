//! JSON run configurations.
//!
//! Every struct rejects unknown fields. After resolution all optional
//! settings are filled in, so the serialized form re-runs identically.

use serde::{Deserialize, Serialize};

use crate::deer::{DrivePulse, EchoConfig, Estimator, QuadratureSpec};
use crate::error::{Error, Result};
use crate::fit::chi2::{FitOptions, ObservedPeak, ObservedPeaks};
use crate::geometry::{coupling_prefactor, dipolar_coupling, SphericalDirection, UnitVector3, Vector3};
use crate::sensing::{density_estimate, Region, SampleGeometry, SensingModel};
use crate::spin::{FieldConfig, SpectrumOptions, SpinSystem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Single,
    Ensemble,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RangeSpec {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

/// Explicit list of values or an evenly spaced inclusive range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GridSpec {
    List(Vec<f64>),
    Range(RangeSpec),
}

impl GridSpec {
    pub fn values(&self, name: &str) -> Result<Vec<f64>> {
        let v = match self {
            GridSpec::List(v) => v.clone(),
            GridSpec::Range(r) => {
                if r.points == 0 {
                    return Err(Error::InvalidInput(format!("{name}: points must be at least 1")));
                }
                if r.points == 1 {
                    vec![r.start]
                } else {
                    let step = (r.stop - r.start) / (r.points - 1) as f64;
                    (0..r.points)
                        .map(|i| if i + 1 == r.points { r.stop } else { r.start + step * i as f64 })
                        .collect()
                }
            }
        };
        if v.is_empty() {
            return Err(Error::InvalidInput(format!("{name}: grid is empty")));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput(format!("{name}: grid contains a non-finite value")));
        }
        if v.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput(format!("{name}: grid must be strictly ascending")));
        }
        Ok(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case", deny_unknown_fields)]
pub enum EstimatorConfig {
    Quadrature {
        #[serde(default = "default_nodes")]
        n_phi_rand: usize,
        #[serde(default = "default_nodes")]
        n_cos_theta1: usize,
        #[serde(default = "default_nodes")]
        n_phi1: usize,
        #[serde(default = "default_tolerance")]
        tolerance: f64,
    },
    MonteCarlo {
        samples: usize,
    },
}

fn default_nodes() -> usize {
    32
}

fn default_tolerance() -> f64 {
    1e-6
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        let q = QuadratureSpec::default();
        EstimatorConfig::Quadrature {
            n_phi_rand: q.n_phi_rand,
            n_cos_theta1: q.n_cos_theta1,
            n_phi1: q.n_phi1,
            tolerance: q.tolerance,
        }
    }
}

impl EstimatorConfig {
    pub fn build(&self, seed: u64) -> Result<Estimator> {
        match *self {
            EstimatorConfig::Quadrature {
                n_phi_rand,
                n_cos_theta1,
                n_phi1,
                tolerance,
            } => {
                let spec = QuadratureSpec {
                    n_phi_rand,
                    n_cos_theta1,
                    n_phi1,
                    tolerance,
                };
                spec.validate()?;
                Ok(Estimator::Quadrature(spec))
            }
            EstimatorConfig::MonteCarlo { samples } => {
                if samples < 1000 {
                    return Err(Error::InvalidInput(format!(
                        "estimator.samples must be at least 1000, got {samples}"
                    )));
                }
                Ok(Estimator::MonteCarlo {
                    n_samples: samples,
                    seed,
                })
            }
        }
    }
}

/// Target spin placed by geometry instead of a bare prefactor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetPosition {
    pub distance_nm: f64,
    pub theta_deg: f64,
    #[serde(default)]
    pub phi_deg: f64,
}

/// Declares a DEER sweep config: the shared fields below plus `$extra`.
macro_rules! deer_config {
    ($(#[$meta:meta])* $name:ident { $($extra:tt)* }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
        #[serde(deny_unknown_fields)]
        pub struct $name {
            #[serde(default, skip_serializing_if = "Option::is_none")]
            pub mode: Option<Mode>,
            #[serde(default, skip_serializing_if = "Option::is_none")]
            pub seed: Option<u64>,
            /// Single-target prefactor c.
            #[serde(default, skip_serializing_if = "Option::is_none")]
            pub c: Option<f64>,
            /// Alternative to `c`: target geometry, with `tau_us`.
            #[serde(default, skip_serializing_if = "Option::is_none")]
            pub target: Option<TargetPosition>,
            /// Echo half length, µs.
            #[serde(default = "default_tau")]
            pub tau_us: f64,
            /// Bias field direction in the NV frame.
            #[serde(default = "default_bias")]
            pub bias_direction: [f64; 3],
            /// Ensemble n c̄².
            #[serde(default, skip_serializing_if = "Option::is_none")]
            pub n_c2: Option<f64>,
            /// Number of bath spins for Monte Carlo in ensemble mode.
            #[serde(default, skip_serializing_if = "Option::is_none")]
            pub bath_size: Option<usize>,
            #[serde(default, skip_serializing_if = "Option::is_none")]
            pub estimator: Option<EstimatorConfig>,
            /// Drive Rabi frequency Ω, MHz.
            pub rabi_mhz: f64,
            $($extra)*
        }

        impl DeerSettings for $name {
            fn shared(&self) -> DeerShared<'_> {
                DeerShared {
                    mode: self.mode,
                    seed: self.seed,
                    c: self.c,
                    target: self.target,
                    tau_us: self.tau_us,
                    bias_direction: self.bias_direction,
                    n_c2: self.n_c2,
                    bath_size: self.bath_size,
                    estimator: self.estimator.as_ref(),
                }
            }

            fn resolve(&mut self, mode: Option<Mode>, seed: Option<u64>) {
                self.mode = Some(mode.or(self.mode).unwrap_or(Mode::Single));
                self.seed = Some(seed.or(self.seed).unwrap_or(0));
                if self.estimator.is_none() {
                    self.estimator = Some(EstimatorConfig::default());
                }
            }
        }
    };
}

fn default_tau() -> f64 {
    6.0
}

fn default_bias() -> [f64; 3] {
    [0.0, 0.0, 1.0]
}

/// Borrowed view of the fields every DEER sweep shares.
#[derive(Debug, Clone, Copy)]
pub struct DeerShared<'a> {
    pub mode: Option<Mode>,
    pub seed: Option<u64>,
    pub c: Option<f64>,
    pub target: Option<TargetPosition>,
    pub tau_us: f64,
    pub bias_direction: [f64; 3],
    pub n_c2: Option<f64>,
    pub bath_size: Option<usize>,
    pub estimator: Option<&'a EstimatorConfig>,
}

pub trait DeerSettings {
    fn shared(&self) -> DeerShared<'_>;
    /// Fills mode, seed and estimator, command-line values taking precedence.
    fn resolve(&mut self, mode: Option<Mode>, seed: Option<u64>);
}

impl DeerShared<'_> {
    pub fn mode(&self) -> Mode {
        self.mode.unwrap_or(Mode::Single)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn estimator(&self) -> Result<Estimator> {
        self.estimator.copied().unwrap_or_default().build(self.seed())
    }

    pub fn echo(&self) -> Result<EchoConfig> {
        let e_b = UnitVector3::from_vector(Vector3::from_array(self.bias_direction))
            .map_err(|_| Error::InvalidInput("bias_direction must be a non-zero finite vector".into()))?;
        EchoConfig::new(self.tau_us, e_b)
    }

    pub fn prefactor(&self) -> Result<f64> {
        match (self.c, self.target) {
            (Some(c), None) => crate::error::finite("c", c),
            (None, Some(t)) => {
                let dir = SphericalDirection::new(t.theta_deg.to_radians(), t.phi_deg.to_radians())?;
                coupling_prefactor(&dipolar_coupling(t.distance_nm, dir)?, self.tau_us, self.echo()?.e_b)
            }
            _ => Err(Error::InvalidInput(
                "single mode needs exactly one of `c` or `target`".into(),
            )),
        }
    }

    pub fn n_c2(&self) -> Result<f64> {
        self.n_c2
            .ok_or_else(|| Error::InvalidInput("ensemble mode needs `n_c2`".into()))
    }
}

deer_config!(
    /// Signal versus drive detuning or absolute drive frequency.
    DeerSpectrumConfig {
        /// Pulse length t_p, µs.
        pub pulse_length_us: f64,
        /// Detuning grid, MHz.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        pub detuning_mhz: Option<GridSpec>,
        /// Absolute drive frequency grid, MHz, used with `resonance_mhz`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        pub frequency_mhz: Option<GridSpec>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        pub resonance_mhz: Option<f64>,
    }
);

pub enum SweepAxis {
    Detuning(Vec<f64>),
    /// Frequencies and the resonance they are measured against.
    Frequency(Vec<f64>, f64),
}

impl DeerSpectrumConfig {
    pub fn axis(&self) -> Result<SweepAxis> {
        match (&self.detuning_mhz, &self.frequency_mhz, self.resonance_mhz) {
            (Some(d), None, None) => Ok(SweepAxis::Detuning(d.values("detuning_mhz")?)),
            (None, Some(f), Some(res)) => {
                crate::error::finite("resonance_mhz", res)?;
                Ok(SweepAxis::Frequency(f.values("frequency_mhz")?, res))
            }
            _ => Err(Error::InvalidInput(
                "give exactly one of `detuning_mhz` or (`frequency_mhz` with `resonance_mhz`)".into(),
            )),
        }
    }

    pub fn base_pulse(&self) -> Result<DrivePulse> {
        DrivePulse::new(self.rabi_mhz, 0.0, self.pulse_length_us)
    }
}

deer_config!(
    /// Signal versus pulse length at fixed drive.
    DeerRabiConfig {
        #[serde(default)]
        pub detuning_mhz: f64,
        /// Pulse length grid, µs.
        pub pulse_length_us: GridSpec,
    }
);

/// Preset name or an inline system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SystemSpec {
    Preset(String),
    Inline(SpinSystem),
}

impl SystemSpec {
    pub fn build(&self) -> Result<SpinSystem> {
        let sys = match self {
            SystemSpec::Preset(name) => SpinSystem::preset(name).ok_or_else(|| {
                Error::InvalidInput(format!(
                    "unknown spin system preset `{name}`; expected one of {:?}",
                    SpinSystem::PRESET_NAMES
                ))
            })?,
            SystemSpec::Inline(sys) => sys.clone(),
        };
        sys.validate()?;
        Ok(sys)
    }
}

/// Field by magnitude and angles, or by Cartesian components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FieldSpec {
    Polar(PolarField),
    Cartesian(CartesianField),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolarField {
    pub magnitude_g: f64,
    pub theta_deg: f64,
    #[serde(default)]
    pub phi_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CartesianField {
    pub cartesian_g: [f64; 3],
}

impl FieldSpec {
    pub fn build(&self) -> Result<FieldConfig> {
        match self {
            FieldSpec::Polar(p) => FieldConfig::new(p.magnitude_g, p.theta_deg.to_radians(), p.phi_deg.to_radians()),
            FieldSpec::Cartesian(c) => FieldConfig::from_cartesian(c.cartesian_g),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Broadening {
    pub fwhm_mhz: f64,
    pub frequency_mhz: GridSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EprConfig {
    pub system: SystemSpec,
    pub field: FieldSpec,
    #[serde(default = "default_floor")]
    pub intensity_floor: f64,
    #[serde(default = "default_merge")]
    pub merge_tol_mhz: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub broadening: Option<Broadening>,
}

fn default_floor() -> f64 {
    SpectrumOptions::default().intensity_floor
}

fn default_merge() -> f64 {
    SpectrumOptions::default().merge_tol_mhz
}

fn spectrum_options(floor: f64, merge: f64) -> Result<SpectrumOptions> {
    if !(0.0..=1.0).contains(&floor) {
        return Err(Error::domain("intensity_floor", floor, "must lie in [0, 1]"));
    }
    if !(merge >= 0.0) || !merge.is_finite() {
        return Err(Error::domain("merge_tol_mhz", merge, "must be non-negative"));
    }
    Ok(SpectrumOptions {
        intensity_floor: floor,
        merge_tol_mhz: merge,
    })
}

impl EprConfig {
    pub fn options(&self) -> Result<SpectrumOptions> {
        spectrum_options(self.intensity_floor, self.merge_tol_mhz)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PeakSpec {
    pub frequency_mhz: f64,
    pub uncertainty_mhz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    pub system: SystemSpec,
    pub peaks: Vec<PeakSpec>,
    /// Field magnitude grid, G.
    pub b_grid_g: GridSpec,
    /// Polar angle grid, degrees.
    pub theta_grid_deg: GridSpec,
    #[serde(default = "default_match_floor")]
    pub match_floor: f64,
    #[serde(default = "default_floor")]
    pub intensity_floor: f64,
    #[serde(default = "default_merge")]
    pub merge_tol_mhz: f64,
}

fn default_match_floor() -> f64 {
    FitOptions::default().match_floor
}

impl FitConfig {
    pub fn peaks(&self) -> Result<ObservedPeaks> {
        ObservedPeaks::new(
            self.peaks
                .iter()
                .map(|p| ObservedPeak::new(p.frequency_mhz, p.uncertainty_mhz))
                .collect::<Result<_>>()?,
        )
    }

    pub fn options(&self) -> Result<FitOptions> {
        if !(0.0..=1.0).contains(&self.match_floor) {
            return Err(Error::domain("match_floor", self.match_floor, "must lie in [0, 1]"));
        }
        Ok(FitOptions {
            match_floor: self.match_floor,
            spectrum: spectrum_options(self.intensity_floor, self.merge_tol_mhz)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleAmount {
    pub amount_mol: f64,
    pub volume_mm3: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VolumeConfig {
    #[serde(default = "default_tau")]
    pub tau_us: f64,
    pub nv_depth_nm: f64,
    /// Absent for an infinitely thick film.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub film_thickness_nm: Option<f64>,
    /// Spins per nm³; alternatively give `sample`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spin_density_nm3: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample: Option<SampleAmount>,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default = "default_r_min")]
    pub r_min_nm: f64,
    #[serde(default = "default_fraction")]
    pub signal_fraction: f64,
}

fn default_threshold() -> f64 {
    1.0
}

fn default_r_min() -> f64 {
    0.3
}

fn default_fraction() -> f64 {
    0.7
}

impl VolumeConfig {
    pub fn density(&self) -> Result<f64> {
        match (self.spin_density_nm3, &self.sample) {
            (Some(rho), None) => Ok(rho),
            (None, Some(s)) => density_estimate(s.amount_mol, s.volume_mm3),
            _ => Err(Error::InvalidInput(
                "give exactly one of `spin_density_nm3` or `sample`".into(),
            )),
        }
    }

    pub fn geometry(&self) -> Result<SampleGeometry> {
        SampleGeometry::new(self.nv_depth_nm, self.film_thickness_nm, self.density()?)
    }

    pub fn model(&self) -> Result<SensingModel> {
        let model = SensingModel {
            threshold: self.threshold,
            r_min: self.r_min_nm,
            region: Region::HalfSpace,
            ..SensingModel::for_echo_time(self.tau_us)?
        };
        model.validate()?;
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_spec_forms() {
        let r: GridSpec = serde_json::from_str(r#"{"start": 0, "stop": 1, "points": 5}"#).unwrap();
        assert_eq!(r.values("g").unwrap(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        let l: GridSpec = serde_json::from_str("[1, 2, 3]").unwrap();
        assert_eq!(l.values("g").unwrap(), vec![1.0, 2.0, 3.0]);
        assert!(GridSpec::List(vec![]).values("g").is_err());
        assert!(GridSpec::List(vec![2.0, 1.0]).values("g").is_err());
        assert!(serde_json::from_str::<GridSpec>(r#"{"start": 0, "stop": 1, "points": 5, "x": 1}"#).is_err());
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let bad = r#"{"rabi_mhz": 5, "pulse_length_us": 0.1, "c": 1, "detuning_mhz": [0], "colour": 1}"#;
        assert!(serde_json::from_str::<DeerSpectrumConfig>(bad).is_err());
        let bad_est = r#"{"method": "monte_carlo", "samples": 1000, "extra": 1}"#;
        assert!(serde_json::from_str::<EstimatorConfig>(bad_est).is_err());
    }

    #[test]
    fn resolved_config_roundtrips() {
        let mut cfg: DeerSpectrumConfig =
            serde_json::from_str(r#"{"rabi_mhz": 5, "pulse_length_us": 0.1, "c": 1, "detuning_mhz": {"start": -20, "stop": 20, "points": 41}}"#).unwrap();
        cfg.resolve(None, Some(7));
        let text = serde_json::to_string(&cfg).unwrap();
        let back: DeerSpectrumConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.seed, Some(7));
        assert_eq!(back.mode, Some(Mode::Single));
    }

    #[test]
    fn presets_and_inline_systems() {
        let s: SystemSpec = serde_json::from_str(r#""Cu2+""#).unwrap();
        assert_eq!(s.build().unwrap(), SpinSystem::cu2());
        let s: SystemSpec = serde_json::from_str(r#""Fe3+""#).unwrap();
        assert!(s.build().is_err());
        let inline = serde_json::to_string(&SpinSystem::p1()).unwrap();
        let s: SystemSpec = serde_json::from_str(&inline).unwrap();
        assert_eq!(s.build().unwrap(), SpinSystem::p1());
    }
}
