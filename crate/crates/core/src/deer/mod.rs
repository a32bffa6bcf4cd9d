//! Single-target and ensemble DEER signals.

pub mod ensemble;
pub mod single;

pub use ensemble::{
    ensemble_dip_depth, ensemble_rabi, ensemble_signal, ensemble_signal_montecarlo,
    ensemble_spectrum, ensemble_variance, EnsembleCoupling, SpinBath,
};
pub use single::{
    accumulated_phase, deer_rabi, deer_signal_montecarlo, deer_signal_quadrature, deer_spectrum,
    revival_detuning, DeerSignal, DrivePulse, EchoConfig, Estimator, QuadratureSpec,
};
