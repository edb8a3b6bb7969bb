//! Holonomic gate targets, bright/dark states, logical projection and fidelities.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::hilbert::{orthonormality_defect, real, CMatrix, CVector, C64, I, ONE, ZERO};
use crate::jc_model::PolaritonBasis;

/// Rotation angle γ about the axis (θ, φ).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SingleQubitGateSpec {
    pub gamma: f64,
    pub theta: f64,
    pub phi: f64,
}

impl SingleQubitGateSpec {
    pub const NOT: Self = Self { gamma: PI, theta: PI / 2.0, phi: 0.0 };
    pub const HADAMARD: Self = Self { gamma: PI, theta: PI / 4.0, phi: 0.0 };
    pub const IDENTITY: Self = Self { gamma: 0.0, theta: PI / 2.0, phi: 0.0 };
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoQubitGateSpec {
    pub alpha: f64,
    pub vartheta: f64,
    pub phi: f64,
}

impl TwoQubitGateSpec {
    pub const CNOT: Self = Self { alpha: PI, vartheta: PI / 2.0, phi: 0.0 };
}

/// Bright and dark states as amplitudes on the ordered pair (|−⟩, |+⟩).
pub fn bright_dark_amplitudes(theta: f64, phi: f64) -> (CVector, CVector) {
    let (s, c) = (theta / 2.0).sin_cos();
    let e = C64::from_polar(1.0, phi);
    let bright = CVector::from_vec(vec![-e * s, real(c)]);
    let dark = CVector::from_vec(vec![real(c), e.conj() * s]);
    (bright, dark)
}

/// |b⟩ = cos(θ/2)|+⟩ − sin(θ/2)e^{iφ}|−⟩ and |d⟩ = sin(θ/2)e^{−iφ}|+⟩ + cos(θ/2)|−⟩.
pub fn bright_dark_states(theta: f64, phi: f64, basis: &PolaritonBasis) -> (CVector, CVector) {
    let (b, d) = bright_dark_amplitudes(theta, phi);
    let (minus, plus) = (basis.logical_minus(), basis.logical_plus());
    (minus * b[0] + plus * b[1], minus * d[0] + plus * d[1])
}

/// The single-qubit holonomic gate on (|−⟩, |+⟩), entry by entry.
pub fn target_unitary_single(spec: &SingleQubitGateSpec) -> CMatrix {
    let (sg, cg) = (spec.gamma / 2.0).sin_cos();
    let (st, ct) = spec.theta.sin_cos();
    let e = C64::from_polar(1.0, spec.phi);
    CMatrix::from_row_slice(
        2,
        2,
        &[
            real(cg) - I * sg * ct,
            -I * sg * st * e,
            -I * sg * st * e.conj(),
            real(cg) + I * sg * ct,
        ],
    )
}

/// Identity on (|++⟩, |+−⟩), the single-qubit form with (α, ϑ, φ) on (|−+⟩, |−−⟩).
pub fn target_unitary_two(spec: &TwoQubitGateSpec) -> CMatrix {
    let block = target_unitary_single(&SingleQubitGateSpec { gamma: spec.alpha, theta: spec.vartheta, phi: spec.phi });
    let mut u = CMatrix::identity(4, 4);
    u.view_mut((2, 2), (2, 2)).copy_from(&block);
    u
}

/// The gate the two-segment loop actually closes: the target of
/// [`target_unitary_two`] with an extra phase e^{−iα/2} on the rotated block.
///
/// The dark state of the loop keeps zero phase while the bright state picks up
/// e^{−iα}, so relative to the spectators the block carries e^{−iα/2}. This
/// is a phase on the control qubit's |−⟩ and is removable by a virtual Z.
pub fn loop_two_qubit_gate(spec: &TwoQubitGateSpec) -> CMatrix {
    let mut u = target_unitary_two(spec);
    let phase = C64::from_polar(1.0, -spec.alpha / 2.0);
    for r in 2..4 {
        for c in 2..4 {
            u[(r, c)] *= phase;
        }
    }
    u
}

/// Logical block of a state together with the population outside it.
#[derive(Debug, Clone, PartialEq)]
pub struct LogicalProjection {
    pub rho: CMatrix,
    pub leakage: f64,
}

/// Compresses a density matrix onto the span of `basis` without renormalizing.
pub fn project_density(rho: &CMatrix, basis: &[CVector]) -> Result<LogicalProjection> {
    check_basis(basis, rho.nrows())?;
    let k = basis.len();
    let images: Vec<CVector> = basis.iter().map(|b| rho * b).collect();
    let rho_l = CMatrix::from_fn(k, k, |i, j| basis[i].dotc(&images[j]));
    let trace_full: f64 = rho.trace().re;
    let leakage = trace_full - rho_l.trace().re;
    Ok(LogicalProjection { rho: rho_l, leakage })
}

/// Same as [`project_density`] for a pure state.
pub fn project_vector(psi: &CVector, basis: &[CVector]) -> Result<LogicalProjection> {
    check_basis(basis, psi.len())?;
    let amp = CVector::from_iterator(basis.len(), basis.iter().map(|b| b.dotc(psi)));
    let rho = &amp * amp.adjoint();
    let leakage = psi.norm_squared() - amp.norm_squared();
    Ok(LogicalProjection { rho, leakage })
}

fn check_basis(basis: &[CVector], dim: usize) -> Result<()> {
    if let Some(b) = basis.iter().find(|b| b.len() != dim) {
        return Err(Error::DimensionMismatch { expected: dim, found: b.len() });
    }
    let defect = orthonormality_defect(basis);
    if defect > 1e-10 {
        return Err(Error::NonOrthonormal(defect));
    }
    Ok(())
}

/// F = ⟨ψ|ρ|ψ⟩.
pub fn state_fidelity(rho: &CMatrix, psi: &CVector) -> Result<f64> {
    if rho.nrows() != psi.len() || rho.ncols() != psi.len() {
        return Err(Error::DimensionMismatch { expected: psi.len(), found: rho.nrows() });
    }
    Ok(psi.dotc(&(rho * psi)).re)
}

/// Input states |ψ⟩ = cos θ′|first⟩ + sin θ′ e^{iφ′}|second⟩ on a uniform grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateGrid {
    /// Points on [0, π], both ends included.
    pub n_theta: usize,
    /// Points on [0, 2π), upper end excluded.
    pub n_phi: usize,
}

impl Default for StateGrid {
    fn default() -> Self {
        Self { n_theta: 201, n_phi: 11 }
    }
}

impl StateGrid {
    pub fn states(&self) -> Vec<CVector> {
        let mut out = Vec::with_capacity(self.n_theta * self.n_phi);
        for i in 0..self.n_theta {
            let th = if self.n_theta > 1 { PI * i as f64 / (self.n_theta - 1) as f64 } else { 0.0 };
            for j in 0..self.n_phi {
                let ph = 2.0 * PI * j as f64 / self.n_phi as f64;
                out.push(CVector::from_vec(vec![real(th.cos()), C64::from_polar(th.sin(), ph)]));
            }
        }
        out
    }

    /// Products of single-qubit grid states, for two-qubit averages.
    pub fn product_states(&self) -> Vec<CVector> {
        let single = self.states();
        let mut out = Vec::with_capacity(single.len() * single.len());
        for a in &single {
            for b in &single {
                out.push(a.kronecker(b));
            }
        }
        out
    }
}

/// Mean of ⟨Uψ|ρ_out(ψ)|Uψ⟩ over `states`, evaluated concurrently.
///
/// `simulate` maps an input logical state to the (unnormalized) logical output
/// density matrix and must be a pure function of its input.
pub fn average_gate_fidelity<F>(simulate: F, target: &CMatrix, states: &[CVector]) -> f64
where
    F: Fn(&CVector) -> CMatrix + Sync,
{
    if states.is_empty() {
        return f64::NAN;
    }
    let total: f64 = states
        .par_iter()
        .map(|psi| {
            let ideal = target * psi;
            ideal.dotc(&(simulate(psi) * &ideal)).re
        })
        .collect::<Vec<f64>>()
        .iter()
        .sum();
    total / states.len() as f64
}

/// A linear map on logical density matrices, stored as the images of |i⟩⟨j|.
#[derive(Debug, Clone, PartialEq)]
pub struct LogicalChannel {
    dim: usize,
    images: Vec<CMatrix>,
}

impl LogicalChannel {
    /// `images[i * dim + j]` is the output for input |i⟩⟨j|.
    pub fn new(dim: usize, images: Vec<CMatrix>) -> Result<Self> {
        if images.len() != dim * dim {
            return Err(Error::DimensionMismatch { expected: dim * dim, found: images.len() });
        }
        if let Some(m) = images.iter().find(|m| m.nrows() != dim || m.ncols() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, found: m.nrows() });
        }
        Ok(Self { dim, images })
    }

    /// Builds the channel by evaluating `run` on every matrix unit |i⟩⟨j|.
    pub fn from_runner<F>(dim: usize, run: F) -> Result<Self>
    where
        F: Fn(&CMatrix) -> Result<CMatrix> + Sync,
    {
        let images = (0..dim * dim)
            .into_par_iter()
            .map(|k| {
                let mut unit = CMatrix::zeros(dim, dim);
                unit[(k / dim, k % dim)] = ONE;
                run(&unit)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(dim, images)
    }

    /// As [`Self::from_runner`] for a Hermiticity-preserving map: only units
    /// with i ≤ j are run, the rest are adjoints.
    pub fn from_hermitian_runner<F>(dim: usize, run: F) -> Result<Self>
    where
        F: Fn(&CMatrix) -> Result<CMatrix> + Sync,
    {
        let upper: Vec<(usize, usize)> = (0..dim).flat_map(|i| (i..dim).map(move |j| (i, j))).collect();
        let computed = upper
            .par_iter()
            .map(|&(i, j)| {
                let mut unit = CMatrix::zeros(dim, dim);
                unit[(i, j)] = ONE;
                run(&unit)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut images = vec![CMatrix::zeros(dim, dim); dim * dim];
        for (&(i, j), m) in upper.iter().zip(computed) {
            images[j * dim + i] = m.adjoint();
            images[i * dim + j] = m;
        }
        Self::new(dim, images)
    }

    /// The channel ρ ↦ UρU†.
    pub fn unitary(u: &CMatrix) -> Self {
        let d = u.nrows();
        let images = (0..d * d).map(|k| u.column(k / d) * u.column(k % d).adjoint()).collect();
        Self { dim: d, images }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn apply(&self, rho: &CMatrix) -> CMatrix {
        let d = self.dim;
        let mut out = CMatrix::zeros(d, d);
        for i in 0..d {
            for j in 0..d {
                let c = rho[(i, j)];
                if c != ZERO {
                    out += &self.images[i * d + j] * c;
                }
            }
        }
        out
    }

    pub fn apply_state(&self, psi: &CVector) -> CMatrix {
        self.apply(&(psi * psi.adjoint()))
    }

    pub fn average_fidelity(&self, target: &CMatrix, states: &[CVector]) -> f64 {
        average_gate_fidelity(|psi| self.apply_state(psi), target, states)
    }

    /// State fidelity of the output for one input against the target image.
    pub fn state_fidelity(&self, target: &CMatrix, psi: &CVector) -> f64 {
        let ideal = target * psi;
        ideal.dotc(&(self.apply_state(psi) * &ideal)).re
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{pauli_x, pauli_y, pauli_z};
    use crate::jc_model::{dressed_spectrum, JcParams};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};

    /// exp(−i(γ/2) m·σ) from cos/sin, with σ on the ordered pair (|−⟩, |+⟩).
    fn rotation(gamma: f64, m: [f64; 3]) -> CMatrix {
        let ms = pauli_x() * real(m[0]) + pauli_y() * real(m[1]) + pauli_z() * real(m[2]);
        CMatrix::identity(2, 2) * real((gamma / 2.0).cos()) - ms * (I * (gamma / 2.0).sin())
    }

    fn phase_distance(a: &CMatrix, b: &CMatrix) -> f64 {
        // min over global phase of ‖a − e^{iχ} b‖.
        let overlap = (b.adjoint() * a).trace();
        let phase = if overlap.norm() > 0.0 { overlap / overlap.norm() } else { ONE };
        (a - b * phase).norm()
    }

    #[test]
    fn not_and_hadamard_targets() {
        let x = target_unitary_single(&SingleQubitGateSpec::NOT);
        assert!((&x - pauli_x() * -I).norm() < 1e-15);
        let h = target_unitary_single(&SingleQubitGateSpec::HADAMARD);
        let hadamard = (pauli_x() + pauli_z()) * real(FRAC_1_SQRT_2);
        assert!((&h - hadamard * -I).norm() < 1e-15);
        let id = target_unitary_single(&SingleQubitGateSpec::IDENTITY);
        assert_eq!(id, CMatrix::identity(2, 2));
    }

    #[test]
    fn two_qubit_targets() {
        let u = target_unitary_two(&TwoQubitGateSpec::CNOT);
        let mut expected = CMatrix::identity(4, 4);
        expected.view_mut((2, 2), (2, 2)).copy_from(&(pauli_x() * -I));
        assert!((&u - expected).norm() < 1e-15);
        let id = target_unitary_two(&TwoQubitGateSpec { alpha: 0.0, vartheta: 1.0, phi: 2.0 });
        assert_eq!(id, CMatrix::identity(4, 4));
        // The loop phase e^{−iπ/2} turns the −iσ_x block into −σ_x.
        let l = loop_two_qubit_gate(&TwoQubitGateSpec::CNOT);
        assert!((l.view((2, 2), (2, 2)) - pauli_x() * real(-1.0)).norm() < 1e-15);
    }

    #[test]
    fn bright_dark_limits() {
        let (b, d) = bright_dark_amplitudes(0.0, 0.7);
        assert_eq!((b[0], b[1], d[0], d[1]), (ZERO, ONE, ONE, ZERO));
        let phi = 0.3;
        let (b, _) = bright_dark_amplitudes(PI, phi);
        assert!((b[0] + C64::from_polar(1.0, phi)).norm() < 1e-15);
        assert!(b[1].norm() < 1e-15);

        let p = JcParams::resonant(2.0 * PI * 8e9, 20.0, 5).unwrap();
        let basis = dressed_spectrum(&p).unwrap();
        let (bs, ds) = bright_dark_states(0.0, 0.0, &basis);
        assert!((bs - basis.logical_plus()).norm() < 1e-15);
        assert!((ds - basis.logical_minus()).norm() < 1e-15);
    }

    #[test]
    fn projections() {
        let e = |i: usize| {
            let mut v = CVector::zeros(3);
            v[i] = ONE;
            v
        };
        let logical = [e(1), e(2)];
        let inside = (e(1) + e(2)) / real(SQRT_2);
        let p = project_vector(&inside, &logical).unwrap();
        assert_abs_diff_eq!(p.leakage, 0.0, epsilon = 1e-15);
        let g = project_density(&(e(0) * e(0).adjoint()), &logical).unwrap();
        assert_abs_diff_eq!(g.leakage, 1.0, epsilon = 1e-15);
        assert_eq!(g.rho, CMatrix::zeros(2, 2));
        let bad = [e(1), e(1)];
        assert!(matches!(project_vector(&inside, &bad), Err(Error::NonOrthonormal(_))));
    }

    #[test]
    fn fidelity_examples() {
        let psi = CVector::from_vec(vec![real(0.6), C64::new(0.0, 0.8)]);
        let rho = &psi * psi.adjoint();
        assert_abs_diff_eq!(state_fidelity(&rho, &psi).unwrap(), 1.0, epsilon = 1e-15);
        let orth = CVector::from_vec(vec![C64::new(0.0, 0.8), real(0.6)]);
        assert_abs_diff_eq!(state_fidelity(&(&orth * orth.adjoint()), &psi).unwrap(), 0.0, epsilon = 1e-15);
        let mixed = CMatrix::identity(2, 2) * real(0.5);
        assert_abs_diff_eq!(state_fidelity(&mixed, &psi).unwrap(), 0.5, epsilon = 1e-15);
        assert!(state_fidelity(&CMatrix::identity(3, 3), &psi).is_err());
    }

    #[test]
    fn grid_shape_and_identity_average() {
        let grid = StateGrid::default();
        let states = grid.states();
        assert_eq!(states.len(), 2211);
        assert!(states.iter().all(|s| (s.norm() - 1.0).abs() < 1e-14));
        let id = CMatrix::identity(2, 2);
        let f = average_gate_fidelity(|psi| psi * psi.adjoint(), &id, &states);
        assert_abs_diff_eq!(f, 1.0, epsilon = 1e-14);

        let u = target_unitary_single(&SingleQubitGateSpec::HADAMARD);
        let channel = LogicalChannel::unitary(&u);
        assert_abs_diff_eq!(channel.average_fidelity(&u, &states), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn leakage_lowers_fidelity() {
        let states = StateGrid { n_theta: 21, n_phi: 5 }.states();
        let u = target_unitary_single(&SingleQubitGateSpec::NOT);
        let perfect = average_gate_fidelity(|psi| (&u * psi) * (&u * psi).adjoint(), &u, &states);
        let lossy = average_gate_fidelity(|psi| (&u * psi) * (&u * psi).adjoint() * real(0.99), &u, &states);
        assert!(lossy <= perfect);
        assert_abs_diff_eq!(perfect - lossy, 0.01, epsilon = 1e-12);
    }

    #[test]
    fn channel_from_runner_matches_unitary() {
        let u = target_unitary_single(&SingleQubitGateSpec { gamma: 1.1, theta: 0.4, phi: 2.0 });
        let ch = LogicalChannel::from_runner(2, |m| Ok(&u * m * u.adjoint())).unwrap();
        let herm = LogicalChannel::from_hermitian_runner(2, |m| Ok(&u * m * u.adjoint())).unwrap();
        assert_eq!(ch, herm);
        assert_eq!(ch.dim(), 2);
        let psi = CVector::from_vec(vec![real(0.6), C64::new(0.0, 0.8)]);
        assert_abs_diff_eq!(ch.state_fidelity(&u, &psi), 1.0, epsilon = 1e-14);
        assert!((ch.apply_state(&psi) - LogicalChannel::unitary(&u).apply_state(&psi)).norm() < 1e-14);
    }

    proptest! {
        #[test]
        fn single_target_matches_rotation(gamma in -7.0f64..7.0, theta in -4.0f64..4.0, phi in -7.0f64..7.0) {
            let u = target_unitary_single(&SingleQubitGateSpec { gamma, theta, phi });
            // The matrix is exp(−iγ/2 m·σ) with m = (sinθ cosφ, −sinθ sinφ, cosθ).
            let m = [theta.sin() * phi.cos(), -theta.sin() * phi.sin(), theta.cos()];
            prop_assert!((&u - rotation(gamma, m)).norm() < 1e-12);
            prop_assert!((u.adjoint() * &u - CMatrix::identity(2, 2)).norm() < 1e-12);
        }

        #[test]
        fn composition_on_shared_axis(g1 in -4.0f64..4.0, g2 in -4.0f64..4.0, theta in 0.0f64..3.2, phi in 0.0f64..6.3) {
            let a = target_unitary_single(&SingleQubitGateSpec { gamma: g1, theta, phi });
            let b = target_unitary_single(&SingleQubitGateSpec { gamma: g2, theta, phi });
            let ab = target_unitary_single(&SingleQubitGateSpec { gamma: g1 + g2, theta, phi });
            prop_assert!((a * b - ab).norm() < 1e-10);
        }

        #[test]
        fn two_qubit_target_is_unitary(alpha in -7.0f64..7.0, vartheta in -4.0f64..4.0, phi in -7.0f64..7.0) {
            let spec = TwoQubitGateSpec { alpha, vartheta, phi };
            let u = target_unitary_two(&spec);
            prop_assert!((u.adjoint() * &u - CMatrix::identity(4, 4)).norm() < 1e-12);
            prop_assert!((u.view((0, 0), (2, 2)) - CMatrix::identity(2, 2)).norm() == 0.0);
            let l = loop_two_qubit_gate(&spec);
            prop_assert!(phase_distance(&l.view((2, 2), (2, 2)).into_owned(), &u.view((2, 2), (2, 2)).into_owned()) < 1e-12);
        }

        #[test]
        fn bright_dark_orthonormal(theta in -7.0f64..7.0, phi in -7.0f64..7.0) {
            let (b, d) = bright_dark_amplitudes(theta, phi);
            prop_assert!(b.dotc(&d).norm() < 1e-12);
            prop_assert!((b.norm() - 1.0).abs() < 1e-12 && (d.norm() - 1.0).abs() < 1e-12);
        }
    }
}
