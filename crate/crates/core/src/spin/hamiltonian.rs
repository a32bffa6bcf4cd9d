use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::linalg::{ComplexMatrix, HermitianMatrix};
use super::operators::{multiplicity, spin_operators};
use crate::constants::{MU_B_MHZ_PER_G, MU_N_MHZ_PER_G};
use crate::error::{finite, Error, Result};

pub const MAX_DIMENSION: usize = 16;

/// Electron spin coupled to one nuclear spin, with g and A tensors diagonal
/// in a shared principal-axis frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpinSystem {
    pub name: String,
    pub electron_spin: f64,
    pub nuclear_spin: f64,
    /// Principal g values (g_x, g_y, g_z).
    pub g: [f64; 3],
    /// Principal hyperfine values, MHz.
    pub hyperfine_mhz: [f64; 3],
    /// Nuclear g-factor; 0 omits the nuclear Zeeman term.
    #[serde(default)]
    pub nuclear_g: f64,
    /// Quadrupole strength P_z, MHz; 0 omits the term.
    #[serde(default)]
    pub quadrupole_mhz: f64,
}

impl SpinSystem {
    /// Cu²⁺ (3d9, I = 3/2) with axial g and A; nuclear Zeeman and quadrupole
    /// terms left out.
    pub fn cu2() -> Self {
        SpinSystem {
            name: "Cu2+".into(),
            electron_spin: 0.5,
            nuclear_spin: 1.5,
            g: [-2.0835, -2.0835, -2.415],
            hyperfine_mhz: [30.0, 30.0, 339.0],
            nuclear_g: 0.0,
            quadrupole_mhz: 0.0,
        }
    }

    /// Substitutional nitrogen in diamond with ¹⁴N (I = 1).
    pub fn p1() -> Self {
        SpinSystem {
            name: "P1".into(),
            electron_spin: 0.5,
            nuclear_spin: 1.0,
            g: [-2.0024, -2.0024, -2.0025],
            hyperfine_mhz: [82.0, 82.0, 114.0],
            nuclear_g: 0.403,
            quadrupole_mhz: -5.6,
        }
    }

    pub fn free_electron() -> Self {
        SpinSystem {
            name: "free-electron".into(),
            electron_spin: 0.5,
            nuclear_spin: 0.0,
            g: [2.0023; 3],
            hyperfine_mhz: [0.0; 3],
            nuclear_g: 0.0,
            quadrupole_mhz: 0.0,
        }
    }

    pub const PRESET_NAMES: [&'static str; 3] = ["Cu2+", "P1", "free-electron"];

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "Cu2+" | "cu2+" | "Cu" | "cu2" => Some(Self::cu2()),
            "P1" | "p1" => Some(Self::p1()),
            "free-electron" | "free_electron" | "electron" => Some(Self::free_electron()),
            _ => None,
        }
    }

    pub fn dimension(&self) -> Result<usize> {
        let d = multiplicity(self.electron_spin)? * multiplicity(self.nuclear_spin)?;
        if d > MAX_DIMENSION {
            return Err(Error::DimensionOverflow(d));
        }
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        self.dimension()?;
        for &v in self.g.iter().chain(&self.hyperfine_mhz) {
            finite("tensor element", v)?;
        }
        finite("nuclear_g", self.nuclear_g)?;
        finite("quadrupole_mhz", self.quadrupole_mhz)?;
        Ok(())
    }
}

/// Static field in the principal frame: magnitude (G), polar angle from the
/// principal z-axis and azimuth (radians).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldConfig {
    pub magnitude: f64,
    pub theta: f64,
    #[serde(default)]
    pub phi: f64,
}

impl FieldConfig {
    pub fn new(magnitude: f64, theta: f64, phi: f64) -> Result<Self> {
        finite("field magnitude", magnitude)?;
        finite("theta", theta)?;
        finite("phi", phi)?;
        if magnitude < 0.0 {
            return Err(Error::domain("field magnitude", magnitude, "must be non-negative"));
        }
        Ok(FieldConfig {
            magnitude,
            theta,
            phi,
        })
    }

    /// Field along the principal z-axis.
    pub fn along_z(magnitude: f64) -> Result<Self> {
        Self::new(magnitude, 0.0, 0.0)
    }

    /// From Cartesian components (G) in the principal frame.
    pub fn from_cartesian(b: [f64; 3]) -> Result<Self> {
        for v in b {
            finite("field component", v)?;
        }
        let mag = (b[0] * b[0] + b[1] * b[1] + b[2] * b[2]).sqrt();
        if mag == 0.0 {
            return Self::new(0.0, 0.0, 0.0);
        }
        Self::new(mag, (b[2] / mag).clamp(-1.0, 1.0).acos(), b[1].atan2(b[0]))
    }

    pub fn cartesian(&self) -> [f64; 3] {
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.phi.sin_cos();
        [
            self.magnitude * st * cp,
            self.magnitude * st * sp,
            self.magnitude * ct,
        ]
    }
}

/// Spin Hamiltonian in MHz on the electron ⊗ nuclear product basis:
///
/// H = µ_B Σ B_a g_a S_a + Σ A_a S_a I_a − g_n µ_n Σ B_a I_a − P_z I_z².
pub fn build_hamiltonian(sys: &SpinSystem, field: &FieldConfig) -> Result<HermitianMatrix> {
    sys.validate()?;
    let s = spin_operators(sys.electron_spin)?;
    let i = spin_operators(sys.nuclear_spin)?;
    let one_e = ComplexMatrix::identity(s.dim());
    let one_n = ComplexMatrix::identity(i.dim());
    let b = field.cartesian();
    let mut h = ComplexMatrix::zeros(s.dim() * i.dim());
    for a in 0..3 {
        let zeeman = MU_B_MHZ_PER_G * b[a] * sys.g[a];
        if zeeman != 0.0 {
            h = h.add(&s.component(a).kron(&one_n).scale(zeeman));
        }
        if sys.hyperfine_mhz[a] != 0.0 {
            h = h.add(&s.component(a).kron(i.component(a)).scale(sys.hyperfine_mhz[a]));
        }
        let nuclear = -sys.nuclear_g * MU_N_MHZ_PER_G * b[a];
        if nuclear != 0.0 {
            h = h.add(&one_e.kron(i.component(a)).scale(nuclear));
        }
    }
    if sys.quadrupole_mhz != 0.0 {
        let iz2 = i.z.matmul(&i.z);
        h = h.add(&one_e.kron(&iz2).scale(-sys.quadrupole_mhz));
    }
    // exact Hermitian symmetry: the imaginary parts come only from S_y, I_y
    let n = h.dim();
    for r in 0..n {
        h[(r, r)] = Complex64::new(h[(r, r)].re, 0.0);
        for c in (r + 1)..n {
            let v = h[(r, c)];
            h[(c, r)] = v.conj();
        }
    }
    HermitianMatrix::new(h)
}
