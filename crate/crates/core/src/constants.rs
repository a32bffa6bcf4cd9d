//! Physical constants (CODATA 2018) and the fixed unit conversions used by the
//! spin Hamiltonians.

/// Fundamental constants in SI units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantsTable {
    /// Vacuum permeability, N A⁻².
    pub mu0: f64,
    /// Electron gyromagnetic ratio magnitude, rad s⁻¹ T⁻¹.
    pub gamma_e: f64,
    /// Reduced Planck constant, J s.
    pub hbar: f64,
    /// Bohr magneton, J T⁻¹.
    pub mu_b: f64,
    /// Nuclear magneton, J T⁻¹.
    pub mu_n: f64,
    /// Free-electron g-factor.
    pub g_free: f64,
}

pub const CODATA: ConstantsTable = ConstantsTable {
    mu0: 1.256_637_062_12e-6,
    gamma_e: 1.760_859_630_23e11,
    hbar: 1.054_571_817e-34,
    mu_b: 9.274_010_078_3e-24,
    mu_n: 5.050_783_746_1e-27,
    g_free: 2.002_319_304_362_56,
};

/// Bohr magneton over Planck's constant, MHz per Gauss.
pub const MU_B_MHZ_PER_G: f64 = 1.399_624;

/// Nuclear magneton over Planck's constant, MHz per Gauss.
pub const MU_N_MHZ_PER_G: f64 = 7.622_59e-4;

/// Avogadro constant, mol⁻¹.
pub const AVOGADRO: f64 = 6.022_140_76e23;

pub const GAUSS_PER_TESLA: f64 = 1.0e4;
pub const NM_PER_M: f64 = 1.0e9;
pub const S_PER_US: f64 = 1.0e-6;
