//! C ABI for the `nvdeer` toolkit.
//!
//! Every fallible function returns an [`NvdeerStatus`]; on failure the
//! message is kept per thread and can be copied out with
//! [`nvdeer_last_error_message`]. Spin systems, spectra and fit grids are
//! opaque handles owned by the caller and released with the matching
//! `_free` function. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use nvdeer::deer::{
    deer_signal_montecarlo, deer_signal_quadrature, ensemble_signal, revival_detuning, DeerSignal, DrivePulse,
    EchoConfig, EnsembleCoupling, QuadratureSpec,
};
use nvdeer::fit::chi2::{chi2_surface, uncertainty_intervals, FitGrid, FitOptions, ObservedPeak, ObservedPeaks};
use nvdeer::geometry::{UnitVector3, Vector3};
use nvdeer::sensing::{accumulate_nc2, kappa_constant, threshold_depth, SampleGeometry, SensingModel};
use nvdeer::spin::{transition_spectrum, FieldConfig, SpectrumResult, SpinSystem};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NvdeerStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Infeasible = 3,
    OutOfRange = 4,
    Panic = 5,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn fail(status: NvdeerStatus, msg: impl Into<String>) -> NvdeerStatus {
    set_error(msg);
    status
}

fn from_err(e: nvdeer::Error) -> NvdeerStatus {
    fail(NvdeerStatus::InvalidArgument, e.to_string())
}

/// Runs `f`, clearing the last error first and turning panics into a status.
fn guard<F: FnOnce() -> NvdeerStatus>(f: F) -> NvdeerStatus {
    set_error("");
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => fail(NvdeerStatus::Panic, "internal panic"),
    }
}

macro_rules! out_ref {
    ($p:expr, $name:literal) => {
        match unsafe { $p.as_mut() } {
            Some(r) => r,
            None => return fail(NvdeerStatus::NullPointer, concat!($name, " is null")),
        }
    };
}

macro_rules! in_ref {
    ($p:expr, $name:literal) => {
        match unsafe { $p.as_ref() } {
            Some(r) => r,
            None => return fail(NvdeerStatus::NullPointer, concat!($name, " is null")),
        }
    };
}

macro_rules! try_ffi {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(e) => return from_err(e),
        }
    };
}

/// Library version as a NUL-terminated static string.
#[no_mangle]
pub extern "C" fn nvdeer_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Length in bytes of the last error message on this thread, excluding NUL.
#[no_mangle]
pub extern "C" fn nvdeer_last_error_length() -> usize {
    LAST_ERROR.with(|e| e.borrow().len())
}

/// Copies the last error message (NUL-terminated, truncated to fit) into
/// `buf` and returns the full message length excluding NUL.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn nvdeer_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr().cast(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Drive pulse: Rabi frequency and detuning in MHz, length in µs.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct NvdeerPulse {
    pub rabi_mhz: f64,
    pub detuning_mhz: f64,
    pub length_us: f64,
}

/// DEER signal with its error estimate.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct NvdeerSignal {
    pub value: f64,
    pub est_error: f64,
    pub converged: bool,
}

impl From<DeerSignal> for NvdeerSignal {
    fn from(s: DeerSignal) -> Self {
        NvdeerSignal {
            value: s.value,
            est_error: s.est_error,
            converged: s.converged,
        }
    }
}

fn pulse(p: &NvdeerPulse) -> nvdeer::Result<DrivePulse> {
    DrivePulse::new(p.rabi_mhz, p.detuning_mhz, p.length_us)
}

fn echo(bias: [f64; 3]) -> nvdeer::Result<EchoConfig> {
    // the signal depends on the echo only through c and the bias direction
    EchoConfig::new(1.0, UnitVector3::from_vector(Vector3::from_array(bias))?)
}

unsafe fn vec3(p: *const f64) -> Option<[f64; 3]> {
    if p.is_null() {
        None
    } else {
        Some([*p, *p.add(1), *p.add(2)])
    }
}

/// Single-target DEER signal by quadrature; each node count must be ≥ 4.
///
/// # Safety
/// `pulse_in`, `bias_direction` (3 doubles) and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn nvdeer_deer_signal_quadrature(
    c: f64,
    pulse_in: *const NvdeerPulse,
    bias_direction: *const f64,
    n_phi_rand: usize,
    n_cos_theta1: usize,
    n_phi1: usize,
    out: *mut NvdeerSignal,
) -> NvdeerStatus {
    guard(|| {
        let p = in_ref!(pulse_in, "pulse");
        let Some(b) = vec3(bias_direction) else {
            return fail(NvdeerStatus::NullPointer, "bias_direction is null");
        };
        let out = out_ref!(out, "out");
        let spec = QuadratureSpec {
            n_phi_rand,
            n_cos_theta1,
            n_phi1,
            ..QuadratureSpec::default()
        };
        let s = try_ffi!(deer_signal_quadrature(c, &try_ffi!(echo(b)), &try_ffi!(pulse(p)), &spec));
        *out = s.into();
        NvdeerStatus::Ok
    })
}

/// Single-target DEER signal by Monte Carlo (`n_samples` ≥ 1000).
///
/// # Safety
/// `pulse_in`, `bias_direction` (3 doubles) and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn nvdeer_deer_signal_montecarlo(
    c: f64,
    pulse_in: *const NvdeerPulse,
    bias_direction: *const f64,
    n_samples: usize,
    seed: u64,
    out: *mut NvdeerSignal,
) -> NvdeerStatus {
    guard(|| {
        let p = in_ref!(pulse_in, "pulse");
        let Some(b) = vec3(bias_direction) else {
            return fail(NvdeerStatus::NullPointer, "bias_direction is null");
        };
        let out = out_ref!(out, "out");
        let s = try_ffi!(deer_signal_montecarlo(c, &try_ffi!(echo(b)), &try_ffi!(pulse(p)), n_samples, seed));
        *out = s.into();
        NvdeerStatus::Ok
    })
}

/// Closed-form ensemble signal for a given n c̄².
///
/// # Safety
/// `pulse_in` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn nvdeer_ensemble_signal(n_c2: f64, pulse_in: *const NvdeerPulse, out: *mut NvdeerSignal) -> NvdeerStatus {
    guard(|| {
        let p = in_ref!(pulse_in, "pulse");
        let out = out_ref!(out, "out");
        *out = ensemble_signal(try_ffi!(EnsembleCoupling::new(n_c2)), &try_ffi!(pulse(p))).into();
        NvdeerStatus::Ok
    })
}

/// First revival detuning √(1/t_p² − Ω²), MHz. Infeasible when Ω t_p > 1.
///
/// # Safety
/// `pulse_in` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn nvdeer_revival_detuning(pulse_in: *const NvdeerPulse, out: *mut f64) -> NvdeerStatus {
    guard(|| {
        let p = in_ref!(pulse_in, "pulse");
        let out = out_ref!(out, "out");
        match revival_detuning(&try_ffi!(pulse(p))) {
            Ok(v) => {
                *out = v;
                NvdeerStatus::Ok
            }
            Err(e @ nvdeer::Error::NoRevival(_)) => fail(NvdeerStatus::Infeasible, e.to_string()),
            Err(e) => from_err(e),
        }
    })
}

/// κ in nm³ for an echo half length `tau_us`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn nvdeer_kappa(tau_us: f64, out: *mut f64) -> NvdeerStatus {
    guard(|| {
        let out = out_ref!(out, "out");
        *out = try_ffi!(kappa_constant(tau_us));
        NvdeerStatus::Ok
    })
}

fn thickness(t: f64) -> Option<f64> {
    if t.is_infinite() && t > 0.0 {
        None
    } else {
        Some(t)
    }
}

/// n c̄² of a film above an NV at depth `nv_depth_nm`; pass `INFINITY` as
/// the thickness for an infinitely thick film.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn nvdeer_accumulate_nc2(
    nv_depth_nm: f64,
    film_thickness_nm: f64,
    spin_density_nm3: f64,
    tau_us: f64,
    out: *mut f64,
) -> NvdeerStatus {
    guard(|| {
        let out = out_ref!(out, "out");
        let geom = try_ffi!(SampleGeometry::new(nv_depth_nm, thickness(film_thickness_nm), spin_density_nm3));
        *out = try_ffi!(accumulate_nc2(&geom, &try_ffi!(SensingModel::for_echo_time(tau_us))));
        NvdeerStatus::Ok
    })
}

/// Deepest NV reaching n c̄² = 1. Infeasible when no depth does.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn nvdeer_threshold_depth(
    spin_density_nm3: f64,
    film_thickness_nm: f64,
    tau_us: f64,
    out: *mut f64,
) -> NvdeerStatus {
    guard(|| {
        let out = out_ref!(out, "out");
        let model = try_ffi!(SensingModel::for_echo_time(tau_us));
        match try_ffi!(threshold_depth(spin_density_nm3, thickness(film_thickness_nm), &model)) {
            Some(h) => {
                *out = h;
                NvdeerStatus::Ok
            }
            None => fail(NvdeerStatus::Infeasible, "nothing detectable at any depth"),
        }
    })
}

/// Opaque spin system.
pub struct NvdeerSpinSystem(SpinSystem);

/// Creates a preset: "Cu2+", "P1" or "free-electron".
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn nvdeer_spin_system_preset(name: *const c_char, out: *mut *mut NvdeerSpinSystem) -> NvdeerStatus {
    guard(|| {
        if name.is_null() {
            return fail(NvdeerStatus::NullPointer, "name is null");
        }
        let out = out_ref!(out, "out");
        let name = CStr::from_ptr(name).to_string_lossy();
        match SpinSystem::preset(&name) {
            Some(sys) => {
                *out = Box::into_raw(Box::new(NvdeerSpinSystem(sys)));
                NvdeerStatus::Ok
            }
            None => fail(NvdeerStatus::InvalidArgument, format!("unknown preset `{name}`")),
        }
    })
}

/// Creates a system from principal g and hyperfine (MHz) values.
///
/// # Safety
/// `g` and `hyperfine_mhz` must point to 3 doubles and `out` be valid.
#[no_mangle]
pub unsafe extern "C" fn nvdeer_spin_system_new(
    electron_spin: f64,
    nuclear_spin: f64,
    g: *const f64,
    hyperfine_mhz: *const f64,
    nuclear_g: f64,
    quadrupole_mhz: f64,
    out: *mut *mut NvdeerSpinSystem,
) -> NvdeerStatus {
    guard(|| {
        let (Some(g), Some(a)) = (vec3(g), vec3(hyperfine_mhz)) else {
            return fail(NvdeerStatus::NullPointer, "g or hyperfine_mhz is null");
        };
        let out = out_ref!(out, "out");
        let sys = SpinSystem {
            name: "custom".into(),
            electron_spin,
            nuclear_spin,
            g,
            hyperfine_mhz: a,
            nuclear_g,
            quadrupole_mhz,
        };
        try_ffi!(sys.validate());
        *out = Box::into_raw(Box::new(NvdeerSpinSystem(sys)));
        NvdeerStatus::Ok
    })
}

/// # Safety
/// `sys` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn nvdeer_spin_system_free(sys: *mut NvdeerSpinSystem) {
    if !sys.is_null() {
        drop(Box::from_raw(sys));
    }
}

/// Opaque list of transition lines, ascending in frequency.
pub struct NvdeerSpectrum(SpectrumResult);

/// Transition spectrum at field magnitude `b_gauss` and angles in radians.
///
/// # Safety
/// `sys` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn nvdeer_spectrum_compute(
    sys: *const NvdeerSpinSystem,
    b_gauss: f64,
    theta: f64,
    phi: f64,
    out: *mut *mut NvdeerSpectrum,
) -> NvdeerStatus {
    guard(|| {
        let sys = in_ref!(sys, "sys");
        let out = out_ref!(out, "out");
        let field = try_ffi!(FieldConfig::new(b_gauss, theta, phi));
        let s = try_ffi!(transition_spectrum(&sys.0, &field));
        *out = Box::into_raw(Box::new(NvdeerSpectrum(s)));
        NvdeerStatus::Ok
    })
}

/// Number of lines; 0 for a null handle.
///
/// # Safety
/// `spec` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn nvdeer_spectrum_len(spec: *const NvdeerSpectrum) -> usize {
    spec.as_ref().map_or(0, |s| s.0.lines.len())
}

/// # Safety
/// `spec` must be a live handle; `frequency_mhz` and `intensity` valid.
#[no_mangle]
pub unsafe extern "C" fn nvdeer_spectrum_line(
    spec: *const NvdeerSpectrum,
    index: usize,
    frequency_mhz: *mut f64,
    intensity: *mut f64,
) -> NvdeerStatus {
    guard(|| {
        let spec = in_ref!(spec, "spec");
        let f = out_ref!(frequency_mhz, "frequency_mhz");
        let i = out_ref!(intensity, "intensity");
        match spec.0.lines.get(index) {
            Some(l) => {
                *f = l.frequency_mhz;
                *i = l.intensity;
                NvdeerStatus::Ok
            }
            None => fail(NvdeerStatus::OutOfRange, format!("line {index} of {}", spec.0.lines.len())),
        }
    })
}

/// # Safety
/// `spec` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn nvdeer_spectrum_free(spec: *mut NvdeerSpectrum) {
    if !spec.is_null() {
        drop(Box::from_raw(spec));
    }
}

/// Opaque χ² surface with its local minima.
pub struct NvdeerFitGrid(FitGrid);

/// One grid-local minimum with its Δχ² = 1 intervals (angles in radians).
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct NvdeerMinimum {
    pub b_gauss: f64,
    pub theta: f64,
    pub chi2: f64,
    pub b_lower: f64,
    pub b_upper: f64,
    pub theta_lower: f64,
    pub theta_upper: f64,
    /// Some interval edge ran off the grid.
    pub open: bool,
}

unsafe fn slice<'a>(p: *const f64, n: usize) -> Option<&'a [f64]> {
    if p.is_null() {
        None
    } else {
        Some(std::slice::from_raw_parts(p, n))
    }
}

/// χ² over a B (G) × θ (rad) grid against `n_peaks` observed peaks.
///
/// # Safety
/// Array pointers must be valid for their stated lengths; `sys` a live
/// handle and `out` valid.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn nvdeer_fit_grid_compute(
    sys: *const NvdeerSpinSystem,
    peak_mhz: *const f64,
    peak_sigma_mhz: *const f64,
    n_peaks: usize,
    b_grid: *const f64,
    n_b: usize,
    theta_grid: *const f64,
    n_theta: usize,
    match_floor: f64,
    out: *mut *mut NvdeerFitGrid,
) -> NvdeerStatus {
    guard(|| {
        let sys = in_ref!(sys, "sys");
        let out = out_ref!(out, "out");
        let (Some(f), Some(s), Some(b), Some(t)) = (
            slice(peak_mhz, n_peaks),
            slice(peak_sigma_mhz, n_peaks),
            slice(b_grid, n_b),
            slice(theta_grid, n_theta),
        ) else {
            return fail(NvdeerStatus::NullPointer, "array argument is null");
        };
        let peaks = try_ffi!(f
            .iter()
            .zip(s)
            .map(|(&f, &s)| ObservedPeak::new(f, s))
            .collect::<nvdeer::Result<Vec<_>>>());
        let peaks = try_ffi!(ObservedPeaks::new(peaks));
        if !(0.0..=1.0).contains(&match_floor) {
            return fail(NvdeerStatus::InvalidArgument, "match_floor must lie in [0, 1]");
        }
        let opts = FitOptions {
            match_floor,
            ..FitOptions::default()
        };
        let grid = try_ffi!(chi2_surface(&sys.0, &peaks, b, t, &opts));
        *out = Box::into_raw(Box::new(NvdeerFitGrid(grid)));
        NvdeerStatus::Ok
    })
}

/// χ² at grid cell (`ib`, `it`); +∞ marks infeasible cells.
///
/// # Safety
/// `grid` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn nvdeer_fit_grid_chi2(grid: *const NvdeerFitGrid, ib: usize, it: usize, out: *mut f64) -> NvdeerStatus {
    guard(|| {
        let g = in_ref!(grid, "grid");
        let out = out_ref!(out, "out");
        if ib >= g.0.b_axis.len() || it >= g.0.theta_axis.len() {
            return fail(NvdeerStatus::OutOfRange, "cell index outside the grid");
        }
        *out = g.0.at(ib, it);
        NvdeerStatus::Ok
    })
}

/// Number of grid-local minima; 0 for a null handle.
///
/// # Safety
/// `grid` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn nvdeer_fit_grid_minima_count(grid: *const NvdeerFitGrid) -> usize {
    grid.as_ref().map_or(0, |g| g.0.minima.len())
}

/// The `index`-th minimum, lowest χ² first.
///
/// # Safety
/// `grid` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn nvdeer_fit_grid_minimum(grid: *const NvdeerFitGrid, index: usize, out: *mut NvdeerMinimum) -> NvdeerStatus {
    guard(|| {
        let g = in_ref!(grid, "grid");
        let out = out_ref!(out, "out");
        let Some(m) = g.0.minima.get(index) else {
            return fail(NvdeerStatus::OutOfRange, format!("minimum {index} of {}", g.0.minima.len()));
        };
        let iv = try_ffi!(uncertainty_intervals(&g.0, index));
        *out = NvdeerMinimum {
            b_gauss: m.b,
            theta: m.theta,
            chi2: m.chi2,
            b_lower: iv.b.lower,
            b_upper: iv.b.upper,
            theta_lower: iv.theta.lower,
            theta_upper: iv.theta.upper,
            open: iv.b.is_open() || iv.theta.is_open(),
        };
        NvdeerStatus::Ok
    })
}

/// # Safety
/// `grid` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn nvdeer_fit_grid_free(grid: *mut NvdeerFitGrid) {
    if !grid.is_null() {
        drop(Box::from_raw(grid));
    }
}
