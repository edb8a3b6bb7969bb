//! Dense operator algebra on truncated tensor-product spaces.
//!
//! Factor 0 is the most significant index of the composite basis, so for a
//! transmon ⊗ cavity space `[2, n]` the state |q, n⟩ sits at `q * n_fock + n`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

#[inline]
pub fn real(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// Ordered list of factor dimensions.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct HilbertSpace {
    factor_dims: Vec<usize>,
}

impl HilbertSpace {
    pub fn new(factor_dims: Vec<usize>) -> Result<Self> {
        if factor_dims.is_empty() {
            return Err(Error::InvalidDimension(0));
        }
        if let Some(&d) = factor_dims.iter().find(|&&d| d < 2) {
            return Err(Error::InvalidDimension(d));
        }
        Ok(Self { factor_dims })
    }

    pub fn factor_dims(&self) -> &[usize] {
        &self.factor_dims
    }

    pub fn num_factors(&self) -> usize {
        self.factor_dims.len()
    }

    pub fn dim(&self) -> usize {
        self.factor_dims.iter().product()
    }

    /// Composite index of a product state given one level per factor.
    pub fn index_of(&self, levels: &[usize]) -> Result<usize> {
        if levels.len() != self.factor_dims.len() {
            return Err(Error::DimensionMismatch {
                expected: self.factor_dims.len(),
                found: levels.len(),
            });
        }
        let mut index = 0;
        for (&level, &d) in levels.iter().zip(&self.factor_dims) {
            if level >= d {
                return Err(Error::DimensionMismatch { expected: d, found: level + 1 });
            }
            index = index * d + level;
        }
        Ok(index)
    }

    pub fn levels_of(&self, mut index: usize) -> Vec<usize> {
        let mut levels = vec![0; self.factor_dims.len()];
        for (slot, &d) in self.factor_dims.iter().enumerate().rev() {
            levels[slot] = index % d;
            index /= d;
        }
        levels
    }

    pub fn basis_state(&self, levels: &[usize]) -> Result<CVector> {
        let mut v = CVector::zeros(self.dim());
        v[self.index_of(levels)?] = ONE;
        Ok(v)
    }

    /// Total number of quanta (sum of levels) in a composite basis state.
    ///
    /// For transmon and cavity factors this is the excitation number conserved
    /// by the Jaynes-Cummings coupling.
    pub fn quanta(&self, index: usize) -> usize {
        self.levels_of(index).iter().sum()
    }

    /// Composite indices whose quanta do not exceed `max_quanta`, ascending.
    pub fn indices_up_to_quanta(&self, max_quanta: usize) -> Vec<usize> {
        (0..self.dim()).filter(|&i| self.quanta(i) <= max_quanta).collect()
    }
}

/// Dense complex operator with the space it acts on.
#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    space: HilbertSpace,
    matrix: CMatrix,
}

impl Operator {
    pub fn new(space: HilbertSpace, matrix: CMatrix) -> Result<Self> {
        let d = space.dim();
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(Error::DimensionMismatch { expected: d, found: matrix.nrows().max(matrix.ncols()) });
        }
        Ok(Self { space, matrix })
    }

    /// Operator on a single factor of dimension `matrix.nrows()`.
    pub fn single(matrix: CMatrix) -> Result<Self> {
        let space = HilbertSpace::new(vec![matrix.nrows()])?;
        Self::new(space, matrix)
    }

    pub fn identity(space: &HilbertSpace) -> Self {
        let d = space.dim();
        Self { space: space.clone(), matrix: CMatrix::identity(d, d) }
    }

    pub fn zeros(space: &HilbertSpace) -> Self {
        let d = space.dim();
        Self { space: space.clone(), matrix: CMatrix::zeros(d, d) }
    }

    pub fn space(&self) -> &HilbertSpace {
        &self.space
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn dagger(&self) -> Self {
        Self { space: self.space.clone(), matrix: self.matrix.adjoint() }
    }

    pub fn matmul(&self, other: &Operator) -> Result<Self> {
        self.check_same(other)?;
        Ok(Self { space: self.space.clone(), matrix: &self.matrix * &other.matrix })
    }

    pub fn add(&self, other: &Operator) -> Result<Self> {
        self.check_same(other)?;
        Ok(Self { space: self.space.clone(), matrix: &self.matrix + &other.matrix })
    }

    pub fn scale(&self, factor: C64) -> Self {
        Self { space: self.space.clone(), matrix: &self.matrix * factor }
    }

    /// ⟨ψ|A|ψ⟩ for a state vector in the operator's space.
    pub fn expectation(&self, state: &CVector) -> Result<C64> {
        if state.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: state.len() });
        }
        Ok(state.dotc(&(&self.matrix * state)))
    }

    /// Frobenius norm of A − A† relative to that of A.
    pub fn hermiticity_defect(&self) -> f64 {
        let norm = self.matrix.norm();
        if norm == 0.0 {
            return 0.0;
        }
        (&self.matrix - self.matrix.adjoint()).norm() / norm
    }

    fn check_same(&self, other: &Operator) -> Result<()> {
        if self.space != other.space {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: other.dim() });
        }
        Ok(())
    }
}

/// Truncated bosonic annihilation operator, ⟨n−1|a|n⟩ = √n.
pub fn fock_annihilation(dim: usize) -> Result<Operator> {
    if dim < 2 {
        return Err(Error::InvalidDimension(dim));
    }
    let mut m = CMatrix::zeros(dim, dim);
    for n in 1..dim {
        m[(n - 1, n)] = real((n as f64).sqrt());
    }
    Operator::single(m)
}

/// Transmon lowering operator σ⁻ = |0⟩⟨1|.
pub fn sigma_minus() -> Operator {
    let mut m = CMatrix::zeros(2, 2);
    m[(0, 1)] = ONE;
    Operator::single(m).expect("2x2")
}

/// Transmon σ_x = σ⁺ + σ⁻.
pub fn sigma_x() -> Operator {
    Operator::single(pauli_x()).expect("2x2")
}

/// Transmon σ_z = |1⟩⟨1| − |0⟩⟨0|, so that (ω_q/2)σ_z puts the excited level on top.
pub fn sigma_z() -> Operator {
    Operator::single(CMatrix::from_diagonal(&CVector::from_vec(vec![-ONE, ONE]))).expect("2x2")
}

/// Pauli X in an ordered two-level basis.
pub fn pauli_x() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO])
}

/// Pauli Y in an ordered two-level basis.
pub fn pauli_y() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[ZERO, -I, I, ZERO])
}

/// Pauli Z = diag(+1, −1) in an ordered two-level basis (first basis state is +1).
pub fn pauli_z() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE])
}

/// Places a single-factor operator into `slot` of `space`, identity elsewhere.
pub fn embed(op: &Operator, slot: usize, space: &HilbertSpace) -> Result<Operator> {
    let dims = space.factor_dims();
    if slot >= dims.len() {
        return Err(Error::SlotOutOfRange { slot, factors: dims.len() });
    }
    if op.dim() != dims[slot] {
        return Err(Error::DimensionMismatch { expected: dims[slot], found: op.dim() });
    }
    let mut m = CMatrix::identity(1, 1);
    for (s, &d) in dims.iter().enumerate() {
        m = if s == slot { m.kronecker(op.matrix()) } else { m.kronecker(&CMatrix::identity(d, d)) };
    }
    Operator::new(space.clone(), m)
}

/// Rows and columns of `m` restricted to `indices` (in the given order).
pub fn restrict(m: &CMatrix, indices: &[usize]) -> CMatrix {
    CMatrix::from_fn(indices.len(), indices.len(), |r, c| m[(indices[r], indices[c])])
}

/// Entries of `v` at `indices`.
pub fn restrict_vector(v: &CVector, indices: &[usize]) -> CVector {
    CVector::from_fn(indices.len(), |r, _| v[indices[r]])
}

/// Largest deviation of the Gram matrix of `vectors` from the identity.
pub fn orthonormality_defect(vectors: &[CVector]) -> f64 {
    let mut worst: f64 = 0.0;
    for (i, a) in vectors.iter().enumerate() {
        for (j, b) in vectors.iter().enumerate() {
            let expect = if i == j { ONE } else { ZERO };
            worst = worst.max((a.dotc(b) - expect).norm());
        }
    }
    worst
}
