//! Two polariton qubits joined by a modulated cavity-cavity coupling, and the
//! holonomic two-qubit gate through the double-excitation ancilla |2−,G⟩.
//!
//! Runs use the dressed product basis of the two uncoupled pairs restricted
//! to at most two excitations in total. The coupling and every dissipator
//! conserve or lower the excitation number, so that subspace is invariant
//! and the restriction is exact for the logical states.

use std::f64::consts::SQRT_2;
use std::sync::Arc;

use crate::dynamics::{
    evolve_lindblad, evolve_unitary, propagate_density, propagate_vectors, rotate_density, uniform_grid, CollapseOperator,
    Dissipation, DrivenHamiltonian, IntegratorOptions, NoiseModel, Observables, QuantumState, SimResult,
};
use crate::error::{Error, Result};
use crate::gates::{loop_two_qubit_gate, project_density, LogicalChannel, StateGrid, TwoQubitGateSpec};
use crate::hilbert::{embed, fock_annihilation, real, CMatrix, CVector, HilbertSpace, ONE, ZERO};
use crate::jc_model::{dressed_spectrum, jc_hamiltonian_in, JcParams, PairOperators, PolaritonBasis, CAVITY, TRANSMON};
use crate::pulses::{compile_two_qubit, EnvelopeKind, PulseSequence, ToneGains};

/// Dressed states of one pair kept in the two-qubit model: |G⟩, |1,∓⟩, |2,∓⟩.
const PAIR_STATES: usize = 5;
const PAIR_QUANTA: [usize; PAIR_STATES] = [0, 1, 1, 2, 2];
const G: usize = 0;
const MINUS: usize = 1;
const PLUS: usize = 2;
const TWO_MINUS: usize = 3;

/// Logical order of the two-qubit basis, control (left) first.
pub const LOGICAL_LABELS: [&str; 4] = ["p_pp", "p_pm", "p_mp", "p_mm"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoupledParams {
    pub left: JcParams,
    pub right: JcParams,
    /// Coupler tone amplitudes in rad/s.
    pub j1: f64,
    pub j2: f64,
}

impl CoupledParams {
    /// ω_ql = 2π·7.8 GHz, ω_qr = 2π·4.7 GHz, cavities resonant, g = ω_q/20, J₁ = J₂ = 2π·5 MHz.
    pub fn paper_device(n_fock: usize) -> Result<Self> {
        let two_pi = 2.0 * std::f64::consts::PI;
        Ok(Self {
            left: JcParams::resonant(two_pi * 7.8e9, 20.0, n_fock)?,
            right: JcParams::resonant(two_pi * 4.7e9, 20.0, n_fock)?,
            j1: two_pi * 5e6,
            j2: two_pi * 5e6,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.left.validate()?;
        self.right.validate()?;
        if !(self.j1 > 0.0 && self.j2 > 0.0) {
            return Err(Error::InvalidParameter(format!("coupler amplitudes must be positive, got {}, {}", self.j1, self.j2)));
        }
        Ok(())
    }

    /// J_c = √(J₁² + J₂²).
    pub fn coupling_peak(&self) -> f64 {
        self.j1.hypot(self.j2)
    }

    /// The full [transmon_l, cavity_l, transmon_r, cavity_r] space.
    pub fn space(&self) -> Result<HilbertSpace> {
        HilbertSpace::new(vec![2, self.left.n_fock, 2, self.right.n_fock])
    }
}

/// H = H_l + H_r + √2 f(t)(a_l a_r† + a_l† a_r) on the full four-factor space,
/// with f the drive of `sequence`.
pub fn build_coupled_hamiltonian(params: &CoupledParams, sequence: Arc<PulseSequence>) -> Result<DrivenHamiltonian> {
    params.validate()?;
    let space = params.space()?;
    let h0 = jc_hamiltonian_in(&params.left, &space, 0, 1)?.into_matrix() + jc_hamiltonian_in(&params.right, &space, 2, 3)?.into_matrix();
    let al = embed(&fock_annihilation(params.left.n_fock)?, 1, &space)?.into_matrix();
    let ar = embed(&fock_annihilation(params.right.n_fock)?, 3, &space)?.into_matrix();
    let hop = &al * ar.adjoint();
    let coupler = (&hop + hop.adjoint()) * real(SQRT_2);
    Ok(DrivenHamiltonian::pulsed(h0, coupler, sequence))
}

/// Transitions from |−−⟩ and |−+⟩ up to the ancilla and how strongly the coupler drives them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AncillaTransitions {
    /// ω′_− = E_A − E_{−−}.
    pub omega_minus: f64,
    /// ω′_+ = E_A − E_{−+}.
    pub omega_plus: f64,
    /// ⟨−∓|a_l a_r†|A⟩.
    pub element_minus: f64,
    pub element_plus: f64,
    /// Smallest detuning of any other coupler-driven transition from either tone.
    pub unwanted_gap: f64,
}

impl AncillaTransitions {
    /// Effective coupling per unit tone amplitude for the drive √2 f(t) C.
    pub fn gains(&self) -> ToneGains {
        ToneGains { tone1: real(SQRT_2 * self.element_minus), tone2: real(SQRT_2 * self.element_plus) }
    }
}

/// Everything that defines one two-qubit gate run besides the device.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoQubitRun {
    pub spec: TwoQubitGateSpec,
    pub envelope: EnvelopeKind,
    pub noise: NoiseModel,
    pub integrator: IntegratorOptions,
}

impl TwoQubitRun {
    /// CNOT with square pulses and κ = 2π·0.1 kHz, Γ₁ = Γ₂ = 2π·4 kHz on both pairs.
    pub fn paper() -> Self {
        Self {
            spec: TwoQubitGateSpec::CNOT,
            envelope: EnvelopeKind::Square,
            noise: NoiseModel::paper(),
            integrator: IntegratorOptions::default(),
        }
    }
}

/// CNOT figures of merit against the gate the loop closes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CnotFidelity {
    /// Mean state fidelity over the four logical basis states and their uniform superposition.
    pub basis_and_superposition: f64,
    /// Average over products of single-qubit grid states.
    pub grid_average: f64,
}

#[derive(Debug, Clone)]
pub struct CoupledSystem {
    pub params: CoupledParams,
    pub left: PolaritonBasis,
    pub right: PolaritonBasis,
    /// (left, right) dressed indices of each working state.
    pub labels: Vec<(usize, usize)>,
    pub energies: Vec<f64>,
    /// √2(a_l a_r† + a_l† a_r) in the working basis.
    pub coupler: CMatrix,
    pub transitions: AncillaTransitions,
    left_ops: [CMatrix; 3],
    right_ops: [CMatrix; 3],
}

/// a, σ⁻, σ_z of one pair in its first five dressed states.
fn pair_operators(basis: &PolaritonBasis) -> Result<[CMatrix; 3]> {
    let ops = PairOperators::new(&basis.params.space(), TRANSMON, CAVITY)?;
    let w = basis.unitary();
    let dressed = |m: &CMatrix| (w.adjoint() * m * &w).view((0, 0), (PAIR_STATES, PAIR_STATES)).into_owned();
    Ok([dressed(ops.a.matrix()), dressed(ops.sigma_minus.matrix()), dressed(ops.sigma_z.matrix())])
}

fn pair_energies(basis: &PolaritonBasis) -> [f64; PAIR_STATES] {
    let p1 = &basis.pairs[0];
    let p2 = &basis.pairs[1];
    [basis.ground_energy, p1.energy_minus, p1.energy_plus, p2.energy_minus, p2.energy_plus]
}

impl CoupledSystem {
    pub fn new(params: CoupledParams) -> Result<Self> {
        params.validate()?;
        let left = dressed_spectrum(&params.left)?;
        let right = dressed_spectrum(&params.right)?;
        let (el, er) = (pair_energies(&left), pair_energies(&right));
        let labels: Vec<(usize, usize)> = (0..PAIR_STATES)
            .flat_map(|l| (0..PAIR_STATES).map(move |r| (l, r)))
            .filter(|&(l, r)| PAIR_QUANTA[l] + PAIR_QUANTA[r] <= 2)
            .collect();
        let energies: Vec<f64> = labels.iter().map(|&(l, r)| el[l] + er[r]).collect();
        let left_ops = pair_operators(&left)?;
        let right_ops = pair_operators(&right)?;
        let d = labels.len();
        let (al, ar) = (&left_ops[0], &right_ops[0]);
        // ⟨l r|a_l a_r†|l' r'⟩ = a_l[l, l'] · a_r[r', r]
        let hop = CMatrix::from_fn(d, d, |i, j| {
            let ((l, r), (lp, rp)) = (labels[i], labels[j]);
            al[(l, lp)] * ar[(rp, r)].conj()
        });
        let coupler = (&hop + hop.adjoint()) * real(SQRT_2);

        let index = |l: usize, r: usize| labels.iter().position(|&x| x == (l, r)).expect("state kept");
        let anc = index(TWO_MINUS, G);
        let (mm, mp) = (index(MINUS, MINUS), index(MINUS, PLUS));
        let omega_minus = energies[anc] - energies[mm];
        let omega_plus = energies[anc] - energies[mp];
        let mut unwanted_gap = f64::INFINITY;
        for k in 0..d {
            for l in 0..k {
                if coupler[(k, l)].norm() < 1e-12 || [(anc, mm), (anc, mp), (mm, anc), (mp, anc)].contains(&(k, l)) {
                    continue;
                }
                let w = (energies[k] - energies[l]).abs();
                unwanted_gap = unwanted_gap.min((w - omega_minus).abs()).min((w - omega_plus).abs());
            }
        }
        let transitions = AncillaTransitions {
            omega_minus,
            omega_plus,
            element_minus: hop[(mm, anc)].re,
            element_plus: hop[(mp, anc)].re,
            unwanted_gap,
        };
        if unwanted_gap < 10.0 * params.coupling_peak() {
            log::warn!(
                "an unwanted coupler transition lies {:e} rad/s from a tone, less than 10 J_c; the rotating-wave picture of the gate is doubtful",
                unwanted_gap
            );
        }
        Ok(Self { params, left, right, labels, energies, coupler, transitions, left_ops, right_ops })
    }

    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    pub fn index(&self, left: usize, right: usize) -> Option<usize> {
        self.labels.iter().position(|&x| x == (left, right))
    }

    /// Working indices of |++⟩, |+−⟩, |−+⟩, |−−⟩.
    pub fn logical_indices(&self) -> [usize; 4] {
        [(PLUS, PLUS), (PLUS, MINUS), (MINUS, PLUS), (MINUS, MINUS)].map(|(l, r)| self.index(l, r).expect("logical state kept"))
    }

    pub fn ancilla_index(&self) -> usize {
        self.index(TWO_MINUS, G).expect("ancilla kept")
    }

    pub fn logical_basis(&self) -> Vec<CVector> {
        self.logical_indices().iter().map(|&i| unit(self.dim(), i)).collect()
    }

    /// Total excitation number of each working state.
    pub fn quanta(&self) -> Vec<usize> {
        self.labels.iter().map(|&(l, r)| PAIR_QUANTA[l] + PAIR_QUANTA[r]).collect()
    }

    pub fn sequence(&self, run: &TwoQubitRun) -> Result<PulseSequence> {
        let t = &self.transitions;
        if !(t.omega_minus > 0.0 && t.omega_plus > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "the ancilla must lie above |−−⟩ and |−+⟩ (transitions {:e}, {:e} rad/s); use pairs with distinct frequencies",
                t.omega_minus, t.omega_plus
            )));
        }
        compile_two_qubit(&run.spec, run.envelope, self.params.j1, self.params.j2, t.omega_minus, t.omega_plus, t.gains())
    }

    /// Lab-frame Hamiltonian in the working basis.
    pub fn hamiltonian(&self, sequence: &PulseSequence) -> DrivenHamiltonian {
        let diag = CMatrix::from_diagonal(&CVector::from_iterator(self.dim(), self.energies.iter().map(|&e| real(e))));
        DrivenHamiltonian::pulsed(diag, self.coupler.clone(), Arc::new(sequence.clone()))
    }

    /// Operator acting on one pair, lifted to the working basis.
    fn lift(&self, op: &CMatrix, on_left: bool) -> CMatrix {
        let d = self.dim();
        CMatrix::from_fn(d, d, |i, j| {
            let ((l, r), (lp, rp)) = (self.labels[i], self.labels[j]);
            match on_left {
                true if r == rp => op[(l, lp)],
                false if l == lp => op[(r, rp)],
                _ => ZERO,
            }
        })
    }

    /// κ on each cavity, Γ₁ and Γ₂ on each transmon.
    pub fn dissipation(&self, noise: &NoiseModel) -> Result<Dissipation> {
        noise.validate()?;
        let mut collapse = Vec::new();
        for (ops, on_left) in [(&self.left_ops, true), (&self.right_ops, false)] {
            for (rate, op) in [(noise.kappa, &ops[0]), (noise.gamma1, &ops[1]), (noise.gamma2, &ops[2])] {
                if rate > 0.0 {
                    collapse.push(CollapseOperator::new(rate, self.lift(op, on_left)));
                }
            }
        }
        Ok(Dissipation::lab(collapse))
    }

    /// Populations: |GG⟩, control qubit in |−⟩ or |+⟩, the four logical states and the ancilla.
    pub fn observables(&self, target: Option<CVector>) -> Observables {
        let d = self.dim();
        let control = |s: usize| {
            CVector::from_fn(d, |i, _| if self.labels[i].0 == s && PAIR_QUANTA[self.labels[i].1] == 1 { ONE } else { ZERO })
        };
        let mut projectors = vec![
            ("p_G".to_string(), unit(d, self.index(G, G).expect("ground kept"))),
            ("p_minus".to_string(), control(MINUS)),
            ("p_plus".to_string(), control(PLUS)),
        ];
        for (label, &i) in LOGICAL_LABELS.iter().zip(&self.logical_indices()) {
            projectors.push((label.to_string(), unit(d, i)));
        }
        projectors.push(("p_ancilla".to_string(), unit(d, self.ancilla_index())));
        Observables { projectors, logical_basis: self.logical_basis(), target, frame_energies: Some(self.energies.clone()) }
    }

    fn embed_logical(&self, amplitudes: &CVector) -> Result<CVector> {
        if amplitudes.len() != 4 {
            return Err(Error::DimensionMismatch { expected: 4, found: amplitudes.len() });
        }
        let mut v = CVector::zeros(self.dim());
        for (k, &i) in self.logical_indices().iter().enumerate() {
            v[i] = amplitudes[k];
        }
        Ok(v)
    }

    /// Runs the gate from a logical state on (|++⟩, |+−⟩, |−+⟩, |−−⟩), sampling `samples` times.
    pub fn run_trace(&self, run: &TwoQubitRun, initial: &CVector, samples: usize) -> Result<SimResult> {
        let norm = initial.norm();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!("initial logical state has norm {norm}")));
        }
        let seq = self.sequence(run)?;
        let h = self.hamiltonian(&seq);
        let obs = self.observables(Some(loop_two_qubit_gate(&run.spec) * initial));
        let psi0 = self.embed_logical(initial)?;
        let times = uniform_grid(seq.duration(), samples.max(2));
        if run.noise.is_noiseless() {
            evolve_unitary(&h, &QuantumState::Vector(psi0), &times, &run.integrator, &obs)
        } else {
            let diss = self.dissipation(&run.noise)?;
            evolve_lindblad(&h, &QuantumState::Density(&psi0 * psi0.adjoint()), &diss, &times, &run.integrator, &obs)
        }
    }

    /// The logical channel on S₂ in the interaction picture at the final time.
    pub fn channel(&self, run: &TwoQubitRun) -> Result<LogicalChannel> {
        let seq = self.sequence(run)?;
        let h = self.hamiltonian(&seq);
        let t_end = seq.duration();
        let times = [0.0, t_end];
        let basis = self.logical_basis();
        let idx = self.logical_indices();
        let finish = |rho: &CMatrix| -> Result<CMatrix> { Ok(project_density(&rotate_density(rho, &self.energies, t_end), &basis)?.rho) };
        if run.noise.is_noiseless() {
            let cols = CMatrix::from_fn(self.dim(), 4, |r, c| if r == idx[c] { ONE } else { ZERO });
            let out = propagate_vectors(&h, &cols, &times, &run.integrator)?;
            let fin = &out[1];
            let images = (0..16).map(|k| finish(&(fin.column(k / 4) * fin.column(k % 4).adjoint()))).collect::<Result<Vec<_>>>()?;
            LogicalChannel::new(4, images)
        } else {
            let diss = self.dissipation(&run.noise)?;
            LogicalChannel::from_hermitian_runner(4, |u| {
                let mut rho = CMatrix::zeros(self.dim(), self.dim());
                for a in 0..4 {
                    for b in 0..4 {
                        rho[(idx[a], idx[b])] = u[(a, b)];
                    }
                }
                let out = propagate_density(&h, &diss, &rho, &times, &run.integrator)?;
                finish(&out[1])
            })
        }
    }

    /// Both CNOT metrics, with `grid` for the product-state average.
    pub fn cnot_fidelity_on(&self, run: &TwoQubitRun, grid: &StateGrid) -> Result<CnotFidelity> {
        let ch = self.channel(run)?;
        let target = loop_two_qubit_gate(&run.spec);
        let mut inputs: Vec<CVector> = (0..4).map(|i| unit(4, i)).collect();
        inputs.push(CVector::from_element(4, real(0.5)));
        let basis_and_superposition = inputs.iter().map(|psi| ch.state_fidelity(&target, psi)).sum::<f64>() / inputs.len() as f64;
        let grid_average = ch.average_fidelity(&target, &grid.product_states());
        Ok(CnotFidelity { basis_and_superposition, grid_average })
    }

    /// [`Self::cnot_fidelity_on`] with a 21 × 5 single-qubit grid.
    pub fn cnot_fidelity(&self, run: &TwoQubitRun) -> Result<CnotFidelity> {
        self.cnot_fidelity_on(run, &StateGrid { n_theta: 21, n_phi: 5 })
    }
}

/// Convenience wrapper: builds the device and runs from `initial`.
pub fn run_two_qubit_gate(params: CoupledParams, run: &TwoQubitRun, initial: &CVector, samples: usize) -> Result<SimResult> {
    CoupledSystem::new(params)?.run_trace(run, initial, samples)
}

fn unit(d: usize, i: usize) -> CVector {
    let mut v = CVector::zeros(d);
    v[i] = ONE;
    v
}
