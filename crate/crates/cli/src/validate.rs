//! Invariant checks on the configured device, printed as PASS/FAIL lines.

use std::sync::Arc;

use polariton::dynamics::{propagate_vectors, uniform_grid, Hamiltonian, IntegratorOptions, NoiseModel, QuantumState, RwaHamiltonian};
use polariton::gates::{bright_dark_amplitudes, target_unitary_single, SingleQubitGateSpec};
use polariton::hilbert::{CMatrix, CVector, ONE, ZERO};
use polariton::jc_model::{closed_form_splitting, dressed_spectrum, noise_energy_shifts, transition_frequencies, NoiseAxis};
use polariton::single_qubit::{Frame, PolaritonQubit, SingleQubitRun};
use polariton::two_qubit::{CoupledSystem, TwoQubitRun};

use crate::commands::Failure;
use crate::config::ExperimentConfig;

pub struct Check {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

fn check(name: &'static str, pass: bool, detail: String) -> Check {
    Check { name, pass, detail }
}

fn max_entry(a: &CMatrix, b: &CMatrix) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn run(config: &ExperimentConfig) -> Result<Vec<Check>, Failure> {
    let p = config.jc_params()?;
    let mut out = Vec::new();

    let basis = dressed_spectrum(&p)?;
    let w = transition_frequencies(&basis);
    let delta = p.omega_q - p.omega_c;
    let root = (delta * delta + 4.0 * p.g * p.g).sqrt();
    let mean = (p.omega_c + p.omega_q) / 2.0;
    let rel = ((w.omega_minus - (mean - root / 2.0)) / w.omega_minus).abs().max(((w.omega_plus - (mean + root / 2.0)) / w.omega_plus).abs());
    out.push(check("transition frequencies", rel < 1e-9, format!("relative error {rel:.2e}")));

    let split = basis
        .pairs
        .iter()
        .map(|pair| (pair.splitting() - closed_form_splitting(&p, pair.n)).abs() / p.g)
        .fold(0.0, f64::max);
    out.push(check("doublet splittings", split < 1e-10, format!("max error {split:.2e} g")));

    let mut worst_slope: f64 = 0.0;
    for (axis, scale) in [(NoiseAxis::X, p.omega_q), (NoiseAxis::Z, p.g)] {
        let (a, b) = (noise_energy_shifts(&p, 1e-3 * scale, axis)?, noise_energy_shifts(&p, 1e-2 * scale, axis)?);
        for (lo, hi) in [(a.exact_minus, b.exact_minus), (a.exact_plus, b.exact_plus)] {
            let slope = (hi.abs() / lo.abs()).log10();
            worst_slope = worst_slope.max((slope - 2.0).abs());
        }
    }
    out.push(check("quadratic noise shifts", worst_slope <= 0.1, format!("largest slope deviation {worst_slope:.3}")));

    let device = PolaritonQubit::new(p, config.system.model)?;
    let run = config.single_run(&p);
    let spec = run.spec;
    let target = target_unitary_single(&spec);
    let unitary_defect = max_entry(&(target.adjoint() * &target), &CMatrix::identity(2, 2));
    let identity = max_entry(&target_unitary_single(&SingleQubitGateSpec::IDENTITY), &CMatrix::identity(2, 2));
    out.push(check("target matrices", unitary_defect < 1e-12 && identity < 1e-12, format!("unitarity {unitary_defect:.1e}, identity {identity:.1e}")));

    let plus = CVector::from_vec(vec![ZERO, ONE]);
    if !run.noise.is_noiseless() {
        let noisy = device.run_trace(&run, &plus, 5)?;
        let QuantumState::Density(rho) = &noisy.final_state else {
            return Err(Failure::Numerical("dissipative run returned a state vector".into()));
        };
        let herm = (rho - rho.adjoint()).norm();
        out.push(check("trace and hermiticity", noisy.drift < 1e-6 && herm < 1e-10, format!("drift {:.1e}, hermiticity {herm:.1e}", noisy.drift)));
    }

    let closed = SingleQubitRun { noise: NoiseModel::NONE, ..run };
    let fine = SingleQubitRun {
        integrator: IntegratorOptions { steps_per_period: 2.0 * closed.integrator.steps_per_period, step: None },
        ..closed
    };
    let a = device.channel(&closed)?.apply_state(&plus);
    let b = device.channel(&fine)?.apply_state(&plus);
    let halving = max_entry(&a, &b);
    out.push(check("step halving", halving < 1e-7, format!("max change {halving:.1e}")));

    let dark_run = SingleQubitRun { frame: Frame::Rotating, ..closed };
    let seq = device.sequence(&dark_run)?;
    let rwa = RwaHamiltonian {
        energies: device.energies.clone(),
        static_part: CMatrix::zeros(device.dim(), device.dim()),
        drive_operator: device.drive.clone(),
        sequence: Arc::new(seq.clone()),
        drive_scale: 1.0,
        cutoff: p.g,
    };
    let (bright, dark) = bright_dark_amplitudes(spec.theta, spec.phi);
    let d = device.embed_logical(&dark)?;
    let bv = device.embed_logical(&bright)?;
    let times = uniform_grid(seq.duration(), 97);
    let states = propagate_vectors(&rwa, &CMatrix::from_columns(&[d.clone(), bv]), &times, &dark_run.integrator)?;
    let dark_f = states.iter().map(|s| s.column(0).dotc(&d).norm_sqr()).fold(1.0, f64::min);
    out.push(check("dark state", dark_f >= 1.0 - 1e-6, format!("min fidelity {dark_f:.10}")));
    let transport = times
        .iter()
        .zip(&states)
        .map(|(&t, s)| (s.column(1).adjoint() * rwa.at(t) * s.column(0))[(0, 0)].norm())
        .fold(0.0, f64::max);
    out.push(check("parallel transport", transport < 1e-10 * closed.peak, format!("max {:.1e} Omega0", transport / closed.peak)));

    let avg = device.channel(&closed)?.average_fidelity(&target, &config.grid().states());
    out.push(check("noiseless single-qubit gate", avg >= 0.995, format!("average fidelity {avg:.6}")));

    let res = device.run_trace(&closed, &plus, 2)?;
    let pg = res.population("p_G").and_then(|v| v.last().copied()).unwrap_or(f64::NAN);
    out.push(check("ground residual", pg < 5e-3, format!("p_G {pg:.1e}")));

    let system = CoupledSystem::new(config.coupled_params()?)?;
    let quiet = TwoQubitRun { noise: NoiseModel::NONE, ..config.two_qubit_run() };
    let cnot = system.cnot_fidelity(&quiet)?;
    out.push(check(
        "noiseless two-qubit gate",
        cnot.basis_and_superposition >= 0.99,
        format!("basis and superposition {:.6}, grid {:.6}", cnot.basis_and_superposition, cnot.grid_average),
    ));
    Ok(out)
}
