//! Jaynes-Cummings Hamiltonian, dressed (polariton) spectrum and the
//! second-order energy shifts of the polariton levels under transmon noise.

use nalgebra::SymmetricEigen;

use crate::error::{Error, Result};
use crate::hilbert::{
    embed, fock_annihilation, real, sigma_minus, sigma_x, sigma_z, CMatrix, CVector, HilbertSpace, Operator, C64,
};

pub const TRANSMON: usize = 0;
pub const CAVITY: usize = 1;

/// Device parameters of one transmon–cavity pair. Frequencies in rad/s.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JcParams {
    pub omega_q: f64,
    pub omega_c: f64,
    pub g: f64,
    pub n_fock: usize,
}

impl JcParams {
    pub fn new(omega_q: f64, omega_c: f64, g: f64, n_fock: usize) -> Result<Self> {
        let p = Self { omega_q, omega_c, g, n_fock };
        p.validate()?;
        Ok(p)
    }

    /// Qubit resonant with the cavity, g = ω/`coupling_divisor`.
    pub fn resonant(omega: f64, coupling_divisor: f64, n_fock: usize) -> Result<Self> {
        Self::new(omega, omega, omega / coupling_divisor, n_fock)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega_q > 0.0 && self.omega_c > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "frequencies must be positive (omega_q = {}, omega_c = {})",
                self.omega_q, self.omega_c
            )));
        }
        if !(self.g > 0.0) {
            return Err(Error::InvalidParameter(format!("coupling g must be positive, got {}", self.g)));
        }
        if self.n_fock < 3 {
            return Err(Error::InvalidParameter(format!("n_fock must be at least 3, got {}", self.n_fock)));
        }
        if self.g > self.omega_c / 10.0 {
            log::warn!("g = {:e} exceeds omega_c/10; the dressed-state picture assumes weak coupling", self.g);
        }
        Ok(())
    }

    /// δ = ω_c − ω_q.
    pub fn detuning(&self) -> f64 {
        self.omega_c - self.omega_q
    }

    pub fn space(&self) -> HilbertSpace {
        HilbertSpace::new(vec![2, self.n_fock]).expect("validated dimensions")
    }
}

/// Transmon and cavity operators embedded in the pair's space.
#[derive(Debug, Clone)]
pub struct PairOperators {
    pub a: Operator,
    pub sigma_minus: Operator,
    pub sigma_x: Operator,
    pub sigma_z: Operator,
}

impl PairOperators {
    pub fn new(space: &HilbertSpace, transmon_slot: usize, cavity_slot: usize) -> Result<Self> {
        let n_fock = space.factor_dims()[cavity_slot];
        Ok(Self {
            a: embed(&fock_annihilation(n_fock)?, cavity_slot, space)?,
            sigma_minus: embed(&sigma_minus(), transmon_slot, space)?,
            sigma_x: embed(&sigma_x(), transmon_slot, space)?,
            sigma_z: embed(&sigma_z(), transmon_slot, space)?,
        })
    }
}

/// H = (ω_q/2)σ_z + ω_c a†a + g(aσ⁺ + a†σ⁻) on `space`, with the pair at the given slots.
pub fn jc_hamiltonian_in(params: &JcParams, space: &HilbertSpace, transmon_slot: usize, cavity_slot: usize) -> Result<Operator> {
    let ops = PairOperators::new(space, transmon_slot, cavity_slot)?;
    let a = ops.a.matrix();
    let sm = ops.sigma_minus.matrix();
    let h = ops.sigma_z.matrix() * real(params.omega_q / 2.0)
        + a.adjoint() * a * real(params.omega_c)
        + (a * sm.adjoint() + a.adjoint() * sm) * real(params.g);
    Operator::new(space.clone(), h)
}

pub fn build_jc_hamiltonian(params: &JcParams) -> Result<Operator> {
    params.validate()?;
    jc_hamiltonian_in(params, &params.space(), TRANSMON, CAVITY)
}

/// Diagonal operator counting transmon excitations plus photons.
pub fn excitation_number(space: &HilbertSpace) -> Operator {
    let diag = CVector::from_fn(space.dim(), |i, _| real(space.quanta(i) as f64));
    Operator::new(space.clone(), CMatrix::from_diagonal(&diag)).expect("square")
}

/// The doublet |n,−⟩, |n,+⟩ of the n-excitation manifold.
#[derive(Debug, Clone, PartialEq)]
pub struct DressedPair {
    pub n: usize,
    pub minus: CVector,
    pub plus: CVector,
    pub energy_minus: f64,
    pub energy_plus: f64,
    /// |n,+⟩ = cos α |0,n⟩ + sin α |1,n−1⟩.
    pub mixing_angle: f64,
}

impl DressedPair {
    pub fn splitting(&self) -> f64 {
        self.energy_plus - self.energy_minus
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolaritonBasis {
    pub params: JcParams,
    pub ground: CVector,
    pub ground_energy: f64,
    /// Doublets for n = 1 .. n_fock−1, in order.
    pub pairs: Vec<DressedPair>,
    /// The lone state |1, n_fock−1⟩ left at the truncation edge.
    pub top: CVector,
    pub top_energy: f64,
}

impl PolaritonBasis {
    pub fn pair(&self, n: usize) -> Option<&DressedPair> {
        self.pairs.get(n.checked_sub(1)?)
    }

    /// Logical |−⟩ = |1,−⟩.
    pub fn logical_minus(&self) -> &CVector {
        &self.pairs[0].minus
    }

    /// Logical |+⟩ = |1,+⟩.
    pub fn logical_plus(&self) -> &CVector {
        &self.pairs[0].plus
    }

    /// All eigenvectors with their energies: ground, the doublets (− then +), top.
    pub fn eigenstates(&self) -> Vec<(CVector, f64)> {
        let mut out = vec![(self.ground.clone(), self.ground_energy)];
        for p in &self.pairs {
            out.push((p.minus.clone(), p.energy_minus));
            out.push((p.plus.clone(), p.energy_plus));
        }
        out.push((self.top.clone(), self.top_energy));
        out
    }

    /// Unitary whose columns are [`Self::eigenstates`].
    pub fn unitary(&self) -> CMatrix {
        let states = self.eigenstates();
        let d = states.len();
        CMatrix::from_fn(d, d, |r, c| states[c].0[r])
    }
}

/// Numerically diagonalizes each excitation block of the JC Hamiltonian.
///
/// Phases are fixed so that ⟨1,n−1|n,+⟩ ≥ 0 and ⟨0,n|n,−⟩ ≥ 0 (both real).
pub fn dressed_spectrum(params: &JcParams) -> Result<PolaritonBasis> {
    let h = build_jc_hamiltonian(params)?;
    let space = h.space().clone();
    let m = h.matrix();
    let n_fock = params.n_fock;

    let ground_index = space.index_of(&[0, 0])?;
    let top_index = space.index_of(&[1, n_fock - 1])?;

    let mut pairs = Vec::with_capacity(n_fock - 1);
    for n in 1..n_fock {
        let i0 = space.index_of(&[0, n])?;
        let i1 = space.index_of(&[1, n - 1])?;
        let idx = [i0, i1];
        let mean = 0.5 * (m[(i0, i0)].re + m[(i1, i1)].re);
        // Diagonalize relative to the block mean to keep the roundoff at the scale of g.
        let block = CMatrix::from_fn(2, 2, |r, c| m[(idx[r], idx[c])] - if r == c { real(mean) } else { C64::new(0.0, 0.0) });
        let eig = SymmetricEigen::new(block);
        let (lo, hi) = if eig.eigenvalues[0] <= eig.eigenvalues[1] { (0, 1) } else { (1, 0) };
        let splitting = eig.eigenvalues[hi] - eig.eigenvalues[lo];
        if splitting.abs() < 1e-9 * params.g {
            return Err(Error::Degenerate { n, splitting });
        }

        let lift = |col: usize, anchor: usize| -> CVector {
            let v = eig.eigenvectors.column(col);
            let phase = v[anchor] / v[anchor].norm().max(f64::MIN_POSITIVE);
            let mut out = CVector::zeros(space.dim());
            for (k, &i) in idx.iter().enumerate() {
                out[i] = if v[anchor].norm() > 0.0 { v[k] / phase } else { v[k] };
            }
            out
        };
        let plus = lift(hi, 1);
        let minus = lift(lo, 0);
        let mixing_angle = plus[i1].re.atan2(plus[i0].re);
        pairs.push(DressedPair {
            n,
            minus,
            plus,
            energy_minus: mean + eig.eigenvalues[lo],
            energy_plus: mean + eig.eigenvalues[hi],
            mixing_angle,
        });
    }

    let mut ground = CVector::zeros(space.dim());
    ground[ground_index] = real(1.0);
    let mut top = CVector::zeros(space.dim());
    top[top_index] = real(1.0);

    Ok(PolaritonBasis {
        params: *params,
        ground,
        ground_energy: m[(ground_index, ground_index)].re,
        pairs,
        top,
        top_energy: m[(top_index, top_index)].re,
    })
}

/// Closed-form doublet splitting √(δ² + 4ng²).
pub fn closed_form_splitting(params: &JcParams, n: usize) -> f64 {
    let d = params.detuning();
    (d * d + 4.0 * n as f64 * params.g * params.g).sqrt()
}

/// ω_± = E_{1,±} − E_G.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionFrequencies {
    pub omega_minus: f64,
    pub omega_plus: f64,
}

pub fn transition_frequencies(basis: &PolaritonBasis) -> TransitionFrequencies {
    let p = &basis.pairs[0];
    TransitionFrequencies {
        omega_minus: p.energy_minus - basis.ground_energy,
        omega_plus: p.energy_plus - basis.ground_energy,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseAxis {
    X,
    Z,
}

/// Energy shifts of |1,−⟩ and |1,+⟩ under a static h·σ_axis on the transmon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseShift {
    pub exact_minus: f64,
    pub exact_plus: f64,
    /// Leading-order estimates: ∓(h/ω_q)²g for σ_x, ±(h/g)²g/2 for σ_z.
    pub approx_minus: f64,
    pub approx_plus: f64,
    /// False when h ≥ g, where the estimates no longer apply.
    pub perturbative: bool,
}

/// Rediagonalizes H + h·σ_axis and reports the shifts of the logical levels.
pub fn noise_energy_shifts(params: &JcParams, h: f64, axis: NoiseAxis) -> Result<NoiseShift> {
    if !(h >= 0.0) || !h.is_finite() {
        return Err(Error::InvalidParameter(format!("noise amplitude must be finite and non-negative, got {h}")));
    }
    let perturbative = h < params.g;
    if !perturbative {
        log::warn!("noise amplitude {h:e} is not small compared with g = {:e}", params.g);
    }
    let (approx_minus, approx_plus) = match axis {
        NoiseAxis::X => {
            let s = (h / params.omega_q).powi(2) * params.g;
            (s, -s)
        }
        NoiseAxis::Z => {
            let s = (h / params.g).powi(2) * params.g / 2.0;
            (-s, s)
        }
    };
    if h == 0.0 {
        return Ok(NoiseShift { exact_minus: 0.0, exact_plus: 0.0, approx_minus, approx_plus, perturbative });
    }

    let basis = dressed_spectrum(params)?;
    let space = params.space();
    let ops = PairOperators::new(&space, TRANSMON, CAVITY)?;
    let noise = match axis {
        NoiseAxis::X => &ops.sigma_x,
        NoiseAxis::Z => &ops.sigma_z,
    };
    // Work in units of g so eigenvalue roundoff is relative to the coupling scale.
    let h_jc = build_jc_hamiltonian(params)?;
    let scaled = (h_jc.matrix() + noise.matrix() * real(h)) / real(params.g);
    let eig = SymmetricEigen::new(scaled);

    let follow = |target: &CVector| -> f64 {
        let (best, _) = (0..eig.eigenvalues.len())
            .map(|k| (k, eig.eigenvectors.column(k).dotc(target).norm_sqr()))
            .fold((0, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        eig.eigenvalues[best] * params.g
    };
    let pair = &basis.pairs[0];
    Ok(NoiseShift {
        exact_minus: follow(&pair.minus) - pair.energy_minus,
        exact_plus: follow(&pair.plus) - pair.energy_plus,
        approx_minus,
        approx_plus,
        perturbative,
    })
}
