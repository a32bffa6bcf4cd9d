pub mod chi2;
pub mod lineshape;
pub mod nelder_mead;
