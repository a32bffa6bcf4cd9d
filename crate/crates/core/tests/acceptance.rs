//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails. Run with `cargo test -p nvdeer --test acceptance`.

use std::f64::consts::PI;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use num_complex::Complex64;
use rand::Rng;

use nvdeer::deer::{
    deer_rabi, deer_signal_montecarlo, deer_signal_quadrature, deer_spectrum, ensemble_rabi,
    ensemble_signal, ensemble_signal_montecarlo, revival_detuning, DrivePulse, EchoConfig,
    EnsembleCoupling, Estimator, QuadratureSpec, SpinBath,
};
use nvdeer::fit::chi2::{chi2_surface, FitOptions, ObservedPeaks};
use nvdeer::fit::lineshape::{
    fit_lineshape, lorentzian_profile, sinc_squared_profile, DataPoint, LineshapeKind,
};
use nvdeer::geometry::UnitVector3;
use nvdeer::rng::{substream, uniform_direction};
use nvdeer::sensing::{half_space_nc2, kappa_constant, prefactor_at, threshold_depth, SensingModel};
use nvdeer::spin::hamiltonian::{FieldConfig, SpinSystem};
use nvdeer::spin::linalg::{eigen_solve, ComplexMatrix, HermitianMatrix};
use nvdeer::spin::operators::spin_operators;
use nvdeer::spin::spectrum::transition_spectrum;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn axis(start: f64, stop: f64, points: usize) -> Vec<f64> {
    (0..points)
        .map(|i| start + (stop - start) * i as f64 / (points - 1) as f64)
        .collect()
}

/// Interior indices where `y` has a strict local maximum (or minimum).
fn extrema(y: &[f64], maxima: bool) -> Vec<usize> {
    (1..y.len() - 1)
        .filter(|&i| {
            if maxima {
                y[i] > y[i - 1] && y[i] >= y[i + 1]
            } else {
                y[i] < y[i - 1] && y[i] <= y[i + 1]
            }
        })
        .collect()
}

fn echo() -> EchoConfig {
    EchoConfig::new(6.0, UnitVector3::Z).unwrap()
}

fn c1_free_electron() -> Outcome {
    let field = FieldConfig::along_z(200.0).map_err(err)?;
    let spec = transition_spectrum(&SpinSystem::free_electron(), &field).map_err(err)?;
    let f = spec.strongest(1)[0].frequency_mhz;
    check(spec.lines.len() == 1 && (f - 560.0).abs() <= 1.0, format!("line at {f:.3} MHz (target 560 ± 1)"))
}

fn c2_p1_lines() -> Outcome {
    let field = FieldConfig::from_cartesian([114.0, 0.0, 163.0]).map_err(err)?;
    let spec = transition_spectrum(&SpinSystem::p1(), &field).map_err(err)?;
    let got: Vec<f64> = spec.strongest(3).iter().map(|l| l.frequency_mhz).collect();
    let want = [79.0, 188.0, 231.0];
    let ok = got.len() == 3 && got.iter().zip(want).all(|(g, w)| (g - w).abs() <= 5.0);
    check(ok, format!("strongest lines {got:.1?} MHz (target {want:?} ± 5)"))
}

fn cu_peaks() -> ObservedPeaks {
    ObservedPeaks::with_uniform_sigma(&[486.0, 811.0, 1104.0], 2.0).unwrap()
}

fn full_axes() -> (Vec<f64>, Vec<f64>) {
    let b = (150..=260).map(f64::from).collect();
    let t = (0..=90).map(|d| f64::from(d).to_radians()).collect();
    (b, t)
}

fn c3_cu_minima() -> Outcome {
    let (b, t) = full_axes();
    let grid = chi2_surface(&SpinSystem::cu2(), &cu_peaks(), &b, &t, &FitOptions::default()).map_err(err)?;
    let near = |b0: f64, t0: f64| {
        grid.minima
            .iter()
            .find(|m| (m.b - b0).abs() <= 3.0 && (m.theta.to_degrees() - t0).abs() <= 3.0)
    };
    let found: Vec<String> = grid
        .minima
        .iter()
        .map(|m| format!("({:.0} G, {:.0}°, χ²={:.2})", m.b, m.theta.to_degrees(), m.chi2))
        .collect();
    check(
        near(192.0, 29.0).is_some() && near(220.0, 50.0).is_some(),
        format!("local minima {}", found.join(" ")),
    )
}

fn c4_roundtrip() -> Outcome {
    let sys = SpinSystem::cu2();
    let field = FieldConfig::new(200.0, 40f64.to_radians(), 0.0).map_err(err)?;
    let freqs: Vec<f64> = transition_spectrum(&sys, &field)
        .map_err(err)?
        .strongest(3)
        .iter()
        .map(|l| l.frequency_mhz)
        .collect();
    let peaks = ObservedPeaks::with_uniform_sigma(&freqs, 2.0).map_err(err)?;
    let (b, t) = full_axes();
    let grid = chi2_surface(&sys, &peaks, &b, &t, &FitOptions::default()).map_err(err)?;
    let at = grid.at(50, 40);
    let best = grid.minima.first().ok_or("no minimum")?;
    let ok = at < 1e-6 && best.b_index == 50 && best.theta_index == 40;
    check(
        ok,
        format!(
            "χ² at (200 G, 40°) = {at:.2e}; global minimum at ({:.0} G, {:.0}°)",
            best.b,
            best.theta.to_degrees()
        ),
    )
}

fn c5_revival() -> Outcome {
    let pulse = DrivePulse::resonant(5.0, 0.1).map_err(err)?;
    let dr = revival_detuning(&pulse).map_err(err)?;
    if (dr - 8.660).abs() > 5e-4 {
        return Err(format!("Δ_R = {dr:.4} MHz, expected 8.660"));
    }
    let quad = Estimator::Quadrature(QuadratureSpec {
        n_phi_rand: 16,
        n_cos_theta1: 16,
        n_phi1: 16,
        tolerance: 1e-6,
    });
    let det = axis(-15.0, 15.0, 1501);
    let mut report = vec![format!("Δ_R = {dr:.4} MHz")];
    let mut ok = true;
    for c in [1.0, 3.0] {
        let f: Vec<f64> = deer_spectrum(c, &echo(), 5.0, 0.1, &det, &quad)
            .map_err(err)?
            .iter()
            .map(|p| p.1.value)
            .collect();
        let maxima: Vec<f64> = extrema(&f, true).into_iter().map(|i| det[i]).collect();
        for target in [-dr, dr] {
            let nearest = maxima
                .iter()
                .copied()
                .min_by(|a, b| (a - target).abs().total_cmp(&(b - target).abs()));
            match nearest {
                Some(m) if (m - target).abs() <= 0.3 => report.push(format!("c={c}: max at {m:+.2}")),
                _ => {
                    ok = false;
                    report.push(format!("c={c}: no maximum near {target:+.3}"));
                }
            }
        }
    }
    check(ok, report.join(", "))
}

fn c6_rabi_phenomenology() -> Outcome {
    let rabi = 5.0;
    // one period of the drive: t_p ∈ [0, 1/Ω]
    let t = axis(0.0, 1.0 / rabi, 201);
    let single: Vec<f64> = deer_rabi(10.0, &echo(), rabi, 0.0, &t, &Estimator::default())
        .map_err(err)?
        .iter()
        .map(|p| p.1.value)
        .collect();
    let n_ext = extrema(&single, true).len() + extrema(&single, false).len();
    // up to the π point t_p = 1/(2Ω)
    let t_pi = axis(0.0, 0.5 / rabi, 101);
    let nc2 = EnsembleCoupling::new(100.0).map_err(err)?;
    let ens: Vec<f64> = ensemble_rabi(nc2, rabi, 0.0, &t_pi)
        .map_err(err)?
        .iter()
        .map(|p| p.1.value)
        .collect();
    let monotone = ens.windows(2).all(|w| w[1] <= w[0]);
    check(
        n_ext >= 2 && monotone,
        format!("single c=10: {n_ext} interior extrema; ensemble n c̄²=100 monotone to π: {monotone}"),
    )
}

fn c7_quadrature_vs_mc() -> Outcome {
    let mut rng = substream(2024, &[7]);
    let mut worst: f64 = 0.0;
    let mut failures = 0;
    for i in 0..20u64 {
        let c = rng.random_range(0.2..4.0);
        let rabi = rng.random_range(1.0..10.0);
        let det = rng.random_range(-10.0..10.0);
        let len = rng.random_range(0.02..0.3);
        let e_b = uniform_direction(&mut rng);
        let echo = EchoConfig::new(6.0, e_b).map_err(err)?;
        let pulse = DrivePulse::new(rabi, det, len).map_err(err)?;
        let q = deer_signal_quadrature(c, &echo, &pulse, &QuadratureSpec::default()).map_err(err)?;
        let mc = deer_signal_montecarlo(c, &echo, &pulse, 1_000_000, 100 + i).map_err(err)?;
        let z = (q.value - mc.value).abs() / mc.est_error;
        worst = worst.max(z);
        if z > 3.0 {
            failures += 1;
        }
    }
    check(failures == 0, format!("20 sets, largest |Δ|/SE = {worst:.2}, {failures} beyond 3 SE"))
}

fn c8_central_limit() -> Outcome {
    let nc2 = EnsembleCoupling::new(9.0).map_err(err)?;
    let bath = SpinBath::uniform(100, nc2);
    let pulse = DrivePulse::resonant(5.0, 0.1).map_err(err)?;
    let mc = ensemble_signal_montecarlo(&bath, &echo(), &pulse, 200_000, 11).map_err(err)?;
    let closed = ensemble_signal(nc2, &pulse).value;
    let target = (-6.0f64).exp();
    check(
        (mc.value - target).abs() <= 0.02 && (closed - target).abs() < 1e-12,
        format!("bath MC {:.5} ± {:.5}, closed form {closed:.5}, exp(-6) = {target:.5}", mc.value, mc.est_error),
    )
}

fn c9_kappa() -> Outcome {
    let kappa = kappa_constant(6.0).map_err(err)?;
    let model = SensingModel::for_echo_time(6.0).map_err(err)?;
    let c = prefactor_at(9.9, &model).map_err(err)?;
    let h = threshold_depth(0.6, None, &model).map_err(err)?.ok_or("nothing detectable")?;
    let oracle = (PI * 0.6 * kappa * kappa / 6.0).cbrt();
    let rel = kappa / 9.9f64.powi(3) - 1.0;
    let ok = rel.abs() <= 0.02
        && (c - 1.0).abs() <= 0.02
        && (h - 67.0).abs() <= 1.0
        && (h - oracle).abs() <= 1e-6 * oracle
        && (half_space_nc2(0.6, kappa, h) - 1.0).abs() < 1e-9;
    check(
        ok,
        format!("κ = {kappa:.2} nm³ ({:+.2}% vs 9.9³), c(9.9 nm) = {c:.4}, threshold depth {h:.3} nm (oracle {oracle:.3})", 100.0 * rel),
    )
}

fn random_hermitian<R: Rng>(rng: &mut R, dim: usize) -> ComplexMatrix {
    let mut m = ComplexMatrix::zeros(dim);
    for i in 0..dim {
        m[(i, i)] = Complex64::new(rng.random_range(-10.0..10.0), 0.0);
        for j in i + 1..dim {
            let z = Complex64::new(rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0));
            m[(i, j)] = z;
            m[(j, i)] = z.conj();
        }
    }
    m
}

fn c10_eigensolver() -> Outcome {
    let mut rng = substream(99, &[10]);
    let mut worst: f64 = 0.0;
    for _ in 0..500 {
        let dim = rng.random_range(2..=16);
        let m = random_hermitian(&mut rng, dim);
        let norm = m.frobenius_norm();
        let eig = eigen_solve(&HermitianMatrix::new(m.clone()).map_err(err)?);
        let resid = eig.reconstruct().sub(&m).frobenius_norm() / norm;
        let ortho = eig
            .vectors
            .adjoint()
            .matmul(&eig.vectors)
            .sub(&ComplexMatrix::identity(dim))
            .frobenius_norm();
        worst = worst.max(resid).max(ortho);
    }
    let i = Complex64::new(0.0, 1.0);
    let mut spin_err: f64 = 0.0;
    for s in [0.5, 1.0, 1.5] {
        let ops = spin_operators(s).map_err(err)?;
        for a in 0..3 {
            let (p, q, r) = (ops.component(a), ops.component((a + 1) % 3), ops.component((a + 2) % 3));
            let comm = p.matmul(q).sub(&q.matmul(p));
            let mut i_r = r.clone();
            for row in 0..ops.dim() {
                for col in 0..ops.dim() {
                    i_r[(row, col)] = r[(row, col)] * i;
                }
            }
            spin_err = spin_err.max(comm.sub(&i_r).frobenius_norm());
        }
        let casimir = ops.x.matmul(&ops.x).add(&ops.y.matmul(&ops.y)).add(&ops.z.matmul(&ops.z));
        let expect = ComplexMatrix::identity(ops.dim()).scale(s * (s + 1.0));
        spin_err = spin_err.max(casimir.sub(&expect).frobenius_norm());
    }
    check(
        worst <= 1e-8 && spin_err <= 1e-12,
        format!("500 matrices, worst relative residual {worst:.1e}; spin identities error {spin_err:.1e}"),
    )
}

fn c11_lineshapes() -> Outcome {
    let data: Vec<DataPoint> = axis(485.0, 505.0, 401)
        .into_iter()
        .map(|f| DataPoint {
            freq: f,
            signal: 1.0 - 0.2 * lorentzian_profile(f - 495.0, 1.0),
            error: 0.01,
        })
        .collect();
    let fit = fit_lineshape(&data, LineshapeKind::Lorentzian).map_err(err)?;
    let fwhm = fit.model.fwhm();
    let rabi = 1.12;
    let p0 = sinc_squared_profile(0.0, rabi);
    let null = 3f64.sqrt() * rabi;
    let p_null = sinc_squared_profile(null, rabi);
    let is_first = axis(0.0, null, 1001)[..1000].iter().all(|&d| sinc_squared_profile(d, rabi) > 1e-6);
    let ok = (fwhm - 2.0).abs() <= 0.01 && (p0 - 1.0).abs() < 1e-15 && p_null < 1e-30 && is_first;
    check(ok, format!("Lorentzian FWHM {fwhm:.5} MHz; sinc² P(0) = {p0}, P(√3Ω) = {p_null:.1e}"))
}

const CLI_CONFIGS: [(&str, &str, &str); 6] = [
    (
        "deer-spectrum",
        "spectrum.json",
        r#"{"c": 2.0, "rabi_mhz": 5.0, "pulse_length_us": 0.1,
            "detuning_mhz": {"start": -12, "stop": 12, "points": 25},
            "estimator": {"method": "quadrature", "n_phi_rand": 8, "n_cos_theta1": 8, "n_phi1": 8}}"#,
    ),
    (
        "deer-rabi",
        "rabi_mc.json",
        r#"{"seed": 5, "c": 3.0, "rabi_mhz": 5.0,
            "pulse_length_us": {"start": 0.02, "stop": 0.2, "points": 10},
            "estimator": {"method": "monte_carlo", "samples": 20000}}"#,
    ),
    (
        "deer-rabi",
        "rabi_bath.json",
        r#"{"mode": "ensemble", "seed": 3, "n_c2": 4.0, "bath_size": 20, "rabi_mhz": 2.2,
            "pulse_length_us": {"start": 0.0, "stop": 0.4, "points": 9},
            "estimator": {"method": "monte_carlo", "samples": 5000}}"#,
    ),
    ("epr", "epr.json", r#"{"system": "Cu2+", "field": {"magnitude_g": 192, "theta_deg": 29}}"#),
    (
        "fit",
        "fit.json",
        r#"{"system": "Cu2+",
            "peaks": [{"frequency_mhz": 486, "uncertainty_mhz": 2},
                      {"frequency_mhz": 811, "uncertainty_mhz": 2},
                      {"frequency_mhz": 1104, "uncertainty_mhz": 2}],
            "b_grid_g": {"start": 185, "stop": 225, "points": 21},
            "theta_grid_deg": {"start": 20, "stop": 56, "points": 19}}"#,
    ),
    ("volume", "volume.json", r#"{"nv_depth_nm": 60, "spin_density_nm3": 0.6}"#),
];

fn run_cli(cmd: &str, config: &Path, out: &Path, threads: usize) -> Result<Vec<u8>, String> {
    let status = Command::new(env!("CARGO_BIN_EXE_nvdeer"))
        .arg(cmd)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .arg("--threads")
        .arg(threads.to_string())
        .output()
        .map_err(err)?;
    if !status.status.success() {
        return Err(format!("{cmd} failed: {}", String::from_utf8_lossy(&status.stderr)));
    }
    let mut bytes = std::fs::read(out).map_err(err)?;
    if cmd == "fit" {
        bytes.extend(std::fs::read(nvdeer::cli::minima_path(out)).map_err(err)?);
    }
    Ok(bytes)
}

fn c12_cli_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(err)?;
    let mut bad = Vec::new();
    for (cmd, name, json) in CLI_CONFIGS {
        let config = dir.path().join(name);
        std::fs::write(&config, json).map_err(err)?;
        let runs: Vec<Vec<u8>> = [(1, "a"), (1, "b"), (3, "c")]
            .iter()
            .map(|(threads, tag)| run_cli(cmd, &config, &dir.path().join(format!("{name}.{tag}.out")), *threads))
            .collect::<Result<_, _>>()?;
        if runs[0] != runs[1] || runs[0] != runs[2] {
            bad.push(name);
        }
    }
    check(
        bad.is_empty(),
        format!("{} runs × 3 (threads 1, 1, 3); differing outputs: {bad:?}", CLI_CONFIGS.len()),
    )
}

fn main() {
    let criteria: [Criterion; 12] = [
        ("free-electron line", c1_free_electron),
        ("P1 spectrum", c2_p1_lines),
        ("Cu2+ fit minima", c3_cu_minima),
        ("fit roundtrip", c4_roundtrip),
        ("revival detuning", c5_revival),
        ("single vs ensemble Rabi", c6_rabi_phenomenology),
        ("quadrature vs Monte Carlo", c7_quadrature_vs_mc),
        ("central-limit convergence", c8_central_limit),
        ("kappa constant", c9_kappa),
        ("eigensolver", c10_eigensolver),
        ("lineshape roundtrip", c11_lineshapes),
        ("CLI determinism", c12_cli_determinism),
    ];
    let mut failed = 0;
    for (n, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS criterion {:>2} {name} [{secs:.1} s]: {detail}", n + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {:>2} {name} [{secs:.1} s]: {detail}", n + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
