//! One polariton qubit driven through the transmon: model construction and gate runs.
//!
//! Simulations run in the dressed eigenbasis of the chosen model space, where
//! the undriven Hamiltonian is diagonal. Index 0 is |G⟩, 1 is |1,−⟩, 2 is |1,+⟩;
//! the full model continues with the higher doublets and the truncation edge.

use serde::{Deserialize, Serialize};
use std::f64::consts::SQRT_2;
use std::sync::Arc;

use crate::dynamics::{
    evolve_lindblad, evolve_unitary, propagate_density, propagate_vectors, rotate_density, uniform_grid, Dissipation,
    DrivenHamiltonian, Hamiltonian, IntegratorOptions, NoiseModel, Observables, QuantumState, RwaHamiltonian,
    SimResult,
};
use crate::error::{Error, Result};
use crate::gates::{project_density, target_unitary_single, LogicalChannel, SingleQubitGateSpec};
use crate::hilbert::{real, CMatrix, CVector, ONE};
use crate::jc_model::{dressed_spectrum, transition_frequencies, JcParams, PairOperators, PolaritonBasis, TransitionFrequencies, CAVITY, TRANSMON};
use crate::pulses::{compile_single_loop, compile_single_qubit_dct, EnvelopeKind, PulseSequence};
use crate::robustness::{inject_errors, ErrorInjection};

/// Which states of the JC ladder are simulated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelSpace {
    /// |G⟩ and the single-excitation doublet.
    Polariton,
    /// The whole truncated transmon ⊗ cavity space.
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Frame {
    /// Full lab-frame drive, no rotating-wave approximation.
    Lab,
    /// Interaction picture of the undriven Hamiltonian with near-resonant drive terms only.
    Rotating,
}

/// Everything that defines one single-qubit gate run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingleQubitRun {
    pub spec: SingleQubitGateSpec,
    pub envelope: EnvelopeKind,
    /// Ω₀ in rad/s.
    pub peak: f64,
    pub dct: bool,
    pub noise: NoiseModel,
    pub errors: ErrorInjection,
    pub frame: Frame,
    pub integrator: IntegratorOptions,
}

impl SingleQubitRun {
    /// Square DCT pulses with Ω₀ = g/20 and the paper's decoherence rates.
    pub fn paper(spec: SingleQubitGateSpec, params: &JcParams) -> Self {
        Self {
            spec,
            envelope: EnvelopeKind::Square,
            peak: params.g / 20.0,
            dct: true,
            noise: NoiseModel::paper(),
            errors: ErrorInjection::NONE,
            frame: Frame::Lab,
            integrator: IntegratorOptions::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PolaritonQubit {
    pub params: JcParams,
    pub basis: PolaritonBasis,
    pub model: ModelSpace,
    /// Energies of the working basis states.
    pub energies: Vec<f64>,
    /// Columns: working basis states in the transmon ⊗ cavity product basis.
    pub states: CMatrix,
    /// √2 σ_x in the working basis, so that the drive is f(t)·`drive`.
    pub drive: CMatrix,
    pub sigma_z: CMatrix,
    pub ops: PairOperators,
}

impl PolaritonQubit {
    pub fn new(params: JcParams, model: ModelSpace) -> Result<Self> {
        let basis = dressed_spectrum(&params)?;
        let all = basis.eigenstates();
        let keep = match model {
            ModelSpace::Polariton => 3,
            ModelSpace::Full => all.len(),
        };
        let d_full = all[0].0.len();
        let states = CMatrix::from_fn(d_full, keep, |r, c| all[c].0[r]);
        let energies = all[..keep].iter().map(|(_, e)| *e).collect();
        let ops = PairOperators::new(&params.space(), TRANSMON, CAVITY)?;
        let to_working = |m: &CMatrix| states.adjoint() * m * &states;
        let drive = to_working(ops.sigma_x.matrix()) * real(SQRT_2);
        let sigma_z = to_working(ops.sigma_z.matrix());
        Ok(Self { params, basis, model, energies, states, drive, sigma_z, ops })
    }

    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    pub fn carriers(&self) -> TransitionFrequencies {
        transition_frequencies(&self.basis)
    }

    /// Working-basis vector for amplitudes on (|−⟩, |+⟩).
    pub fn embed_logical(&self, amplitudes: &CVector) -> Result<CVector> {
        if amplitudes.len() != 2 {
            return Err(Error::DimensionMismatch { expected: 2, found: amplitudes.len() });
        }
        let mut v = CVector::zeros(self.dim());
        v[1] = amplitudes[0];
        v[2] = amplitudes[1];
        Ok(v)
    }

    pub fn logical_basis(&self) -> Vec<CVector> {
        (1..3).map(|i| unit(self.dim(), i)).collect()
    }

    pub fn sequence(&self, run: &SingleQubitRun) -> Result<PulseSequence> {
        if run.peak > self.params.g / 10.0 {
            log::warn!("drive peak {:e} exceeds g/10; the two tones start to address each other's transitions", run.peak);
        }
        let w = self.carriers();
        if run.dct {
            compile_single_qubit_dct(&run.spec, run.envelope, run.peak, w.omega_minus, w.omega_plus)
        } else {
            compile_single_loop(&run.spec, run.envelope, run.peak, w.omega_minus, w.omega_plus)
        }
    }

    pub fn hamiltonian(&self, run: &SingleQubitRun, sequence: &PulseSequence) -> Result<Arc<dyn Hamiltonian>> {
        run.errors.validate()?;
        let seq = Arc::new(sequence.clone());
        let diag = CMatrix::from_diagonal(&CVector::from_iterator(self.dim(), self.energies.iter().map(|&e| real(e))));
        match run.frame {
            Frame::Lab => {
                let bare = DrivenHamiltonian::pulsed(diag, self.drive.clone(), seq);
                Ok(Arc::new(inject_errors(&bare, &run.errors, run.peak, &self.sigma_z)?))
            }
            Frame::Rotating => {
                let w = self.carriers();
                Ok(Arc::new(RwaHamiltonian {
                    energies: self.energies.clone(),
                    static_part: &self.sigma_z * real(run.errors.delta * run.peak / 2.0),
                    drive_operator: self.drive.clone(),
                    sequence: seq,
                    drive_scale: 1.0 + run.errors.epsilon,
                    cutoff: 0.5 * w.omega_minus,
                }))
            }
        }
    }

    pub fn dissipation(&self, run: &SingleQubitRun) -> Result<Dissipation> {
        run.noise.validate()?;
        let collapse = run.noise.collapse_operators(&self.ops).iter().map(|c| c.transformed(&self.states)).collect();
        let frame_energies = match run.frame {
            Frame::Lab => None,
            Frame::Rotating => Some(self.energies.clone()),
        };
        Ok(Dissipation { collapse, frame_energies })
    }

    /// Energies for rotating integrated states into the interaction picture of H₀.
    fn observable_frame(&self, run: &SingleQubitRun) -> Option<Vec<f64>> {
        match run.frame {
            Frame::Lab => Some(self.energies.clone()),
            Frame::Rotating => None,
        }
    }

    pub fn observables(&self, run: &SingleQubitRun, target: Option<CVector>) -> Observables {
        let d = self.dim();
        Observables {
            projectors: vec![("p_G".into(), unit(d, 0)), ("p_minus".into(), unit(d, 1)), ("p_plus".into(), unit(d, 2))],
            logical_basis: self.logical_basis(),
            target,
            frame_energies: self.observable_frame(run),
        }
    }

    /// Runs the gate from a logical initial state and records `samples` points
    /// (at least 2) evenly spread over the sequence.
    pub fn run_trace(&self, run: &SingleQubitRun, initial: &CVector, samples: usize) -> Result<SimResult> {
        let seq = self.sequence(run)?;
        let h = self.hamiltonian(run, &seq)?;
        let norm = initial.norm();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!("initial logical state has norm {norm}")));
        }
        let target = target_unitary_single(&run.spec) * initial;
        let obs = self.observables(run, Some(target));
        let psi0 = self.embed_logical(initial)?;
        let times = uniform_grid(seq.duration(), samples.max(2));
        if run.noise.is_noiseless() {
            evolve_unitary(h.as_ref(), &QuantumState::Vector(psi0), &times, &run.integrator, &obs)
        } else {
            let diss = self.dissipation(run)?;
            let rho0 = QuantumState::Density(&psi0 * psi0.adjoint());
            evolve_lindblad(h.as_ref(), &rho0, &diss, &times, &run.integrator, &obs)
        }
    }

    /// The logical channel realized by the run, in the interaction picture at the final time.
    pub fn channel(&self, run: &SingleQubitRun) -> Result<LogicalChannel> {
        let seq = self.sequence(run)?;
        let h = self.hamiltonian(run, &seq)?;
        let t_end = seq.duration();
        let times = [0.0, t_end];
        let basis = self.logical_basis();
        let frame = self.observable_frame(run);
        let finish = |rho: &CMatrix| -> Result<CMatrix> {
            let rho = match &frame {
                Some(e) => rotate_density(rho, e, t_end),
                None => rho.clone(),
            };
            Ok(project_density(&rho, &basis)?.rho)
        };
        if run.noise.is_noiseless() {
            let cols = CMatrix::from_fn(self.dim(), 2, |r, c| if r == c + 1 { ONE } else { real(0.0) });
            let out = propagate_vectors(h.as_ref(), &cols, &times, &run.integrator)?;
            let fin = &out[1];
            let images = (0..4)
                .map(|k| finish(&(fin.column(k / 2) * fin.column(k % 2).adjoint())))
                .collect::<Result<Vec<_>>>()?;
            LogicalChannel::new(2, images)
        } else {
            let diss = self.dissipation(run)?;
            LogicalChannel::from_hermitian_runner(2, |unit_l| {
                let mut rho = CMatrix::zeros(self.dim(), self.dim());
                rho.view_mut((1, 1), (2, 2)).copy_from(unit_l);
                let out = propagate_density(h.as_ref(), &diss, &rho, &times, &run.integrator)?;
                finish(&out[1])
            })
        }
    }
}

fn unit(d: usize, i: usize) -> CVector {
    let mut v = CVector::zeros(d);
    v[i] = ONE;
    v
}
