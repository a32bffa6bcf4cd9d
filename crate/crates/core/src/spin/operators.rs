//! Angular-momentum matrices in the |m⟩ basis, m = S, S−1, …, −S.

use num_complex::Complex64;

use super::linalg::ComplexMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SpinOperators {
    pub x: ComplexMatrix,
    pub y: ComplexMatrix,
    pub z: ComplexMatrix,
}

impl SpinOperators {
    pub fn component(&self, axis: usize) -> &ComplexMatrix {
        match axis {
            0 => &self.x,
            1 => &self.y,
            _ => &self.z,
        }
    }

    pub fn dim(&self) -> usize {
        self.z.dim()
    }
}

/// Multiplicity 2S+1, rejecting values where 2S is not a non-negative integer.
pub fn multiplicity(spin: f64) -> Result<usize> {
    let twice = 2.0 * spin;
    if !twice.is_finite() || twice < 0.0 || (twice - twice.round()).abs() > 1e-9 || twice > 64.0 {
        return Err(Error::InvalidSpin(spin));
    }
    Ok(twice.round() as usize + 1)
}

/// S_x, S_y, S_z from the ladder operators S_± (units of ħ).
pub fn spin_operators(spin: f64) -> Result<SpinOperators> {
    let dim = multiplicity(spin)?;
    let s = (dim - 1) as f64 / 2.0;
    let m = |i: usize| s - i as f64;
    // ⟨m+1| S_+ |m⟩ = √(S(S+1) − m(m+1)); row i-1 holds m+1 when column i holds m
    let mut plus = ComplexMatrix::zeros(dim);
    for i in 1..dim {
        let mi = m(i);
        plus[(i - 1, i)] = Complex64::new((s * (s + 1.0) - mi * (mi + 1.0)).sqrt(), 0.0);
    }
    let minus = plus.adjoint();
    let x = plus.add(&minus).scale(0.5);
    let half_i = Complex64::new(0.0, -0.5);
    let diff = plus.sub(&minus);
    let y = ComplexMatrix::from_fn(dim, |r, c| diff[(r, c)] * half_i);
    let z = ComplexMatrix::from_real_diagonal(&(0..dim).map(m).collect::<Vec<_>>());
    Ok(SpinOperators { x, y, z })
}
