//! Fixed-step RK4 evolution of state vectors and density matrices.
//!
//! Hamiltonians are evaluated as H(t, anchor): `anchor` is a time strictly
//! inside the current step, so piecewise-defined drives are evaluated on the
//! correct side of a discontinuity even when `t` sits on a segment boundary.

use nalgebra::SymmetricEigen;
use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::gates::{project_density, state_fidelity};
use crate::hilbert::{real, CMatrix, CVector, C64, I, ZERO};
use crate::jc_model::PairOperators;
use crate::pulses::PulseSequence;

pub trait Hamiltonian: Send + Sync {
    fn dim(&self) -> usize;

    /// Writes H(t) into `out` (already sized dim × dim).
    fn write(&self, t: f64, anchor: f64, out: &mut CMatrix);

    /// Fastest explicit time dependence, in rad/s.
    fn max_frequency(&self) -> f64;

    /// Times at which H may jump. Integration steps never straddle them.
    fn breakpoints(&self) -> Vec<f64> {
        Vec::new()
    }

    /// Real diagonal of the time-independent part, when there is one.
    ///
    /// The integrator treats it exactly by working in its interaction picture,
    /// so only the remaining terms limit the RK4 accuracy.
    fn static_diagonal(&self) -> Option<Vec<f64>> {
        None
    }

    fn at(&self, t: f64) -> CMatrix {
        let mut out = CMatrix::zeros(self.dim(), self.dim());
        self.write(t, t, &mut out);
        out
    }
}

impl<T: Hamiltonian + ?Sized> Hamiltonian for Arc<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn write(&self, t: f64, anchor: f64, out: &mut CMatrix) {
        (**self).write(t, anchor, out)
    }
    fn max_frequency(&self) -> f64 {
        (**self).max_frequency()
    }
    fn breakpoints(&self) -> Vec<f64> {
        (**self).breakpoints()
    }
    fn static_diagonal(&self) -> Option<Vec<f64>> {
        (**self).static_diagonal()
    }
}

pub type Coefficient = Arc<dyn Fn(f64, f64) -> C64 + Send + Sync>;

/// c(t)·A, plus c(t)*·A† when `add_conjugate` is set.
#[derive(Clone)]
pub struct DriveTerm {
    pub operator: CMatrix,
    pub coefficient: Coefficient,
    pub add_conjugate: bool,
    /// Marks the control drive, which amplitude errors scale.
    pub control: bool,
}

impl std::fmt::Debug for DriveTerm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DriveTerm")
            .field("dim", &self.operator.nrows())
            .field("add_conjugate", &self.add_conjugate)
            .field("control", &self.control)
            .finish()
    }
}

impl DriveTerm {
    /// A Hermitian operator driven by a pulse sequence's real amplitude f(t).
    pub fn pulsed(operator: CMatrix, sequence: Arc<PulseSequence>, scale: f64) -> Self {
        let coefficient: Coefficient = Arc::new(move |t, anchor| real(scale * sequence.drive_value_near(t, anchor)));
        Self { operator, coefficient, add_conjugate: false, control: true }
    }
}

/// H(t) = static + Σ terms.
#[derive(Debug, Clone)]
pub struct DrivenHamiltonian {
    pub static_part: CMatrix,
    pub terms: Vec<DriveTerm>,
    pub max_frequency: f64,
    pub breakpoints: Vec<f64>,
}

impl DrivenHamiltonian {
    pub fn constant(h: CMatrix) -> Self {
        Self { static_part: h, terms: Vec::new(), max_frequency: 0.0, breakpoints: Vec::new() }
    }

    /// Static part plus `operator`·f(t) with f the drive of `sequence`.
    pub fn pulsed(static_part: CMatrix, operator: CMatrix, sequence: Arc<PulseSequence>) -> Self {
        let max_frequency = sequence.max_carrier();
        let breakpoints = sequence.breakpoints();
        Self { static_part, terms: vec![DriveTerm::pulsed(operator, sequence, 1.0)], max_frequency, breakpoints }
    }
}

impl Hamiltonian for DrivenHamiltonian {
    fn dim(&self) -> usize {
        self.static_part.nrows()
    }

    fn write(&self, t: f64, anchor: f64, out: &mut CMatrix) {
        out.copy_from(&self.static_part);
        for term in &self.terms {
            let c = (term.coefficient)(t, anchor);
            if c == ZERO {
                continue;
            }
            let d = out.nrows();
            for col in 0..d {
                for row in 0..d {
                    let a = term.operator[(row, col)];
                    if a != ZERO {
                        out[(row, col)] += c * a;
                        if term.add_conjugate {
                            out[(col, row)] += c.conj() * a.conj();
                        }
                    }
                }
            }
        }
    }

    fn max_frequency(&self) -> f64 {
        self.max_frequency
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.breakpoints.clone()
    }

    fn static_diagonal(&self) -> Option<Vec<f64>> {
        Some(self.static_part.diagonal().iter().map(|z| z.re).collect())
    }
}

/// H′(t) = U†(t) H(t) U(t) − G with U(t) = exp(−iGt).
pub struct RotatingFrame {
    inner: Arc<dyn Hamiltonian>,
    energies: Vec<f64>,
    vectors: CMatrix,
}

pub fn to_rotating_frame(inner: Arc<dyn Hamiltonian>, generator: &CMatrix) -> Result<RotatingFrame> {
    let d = inner.dim();
    if generator.nrows() != d || generator.ncols() != d {
        return Err(Error::DimensionMismatch { expected: d, found: generator.nrows() });
    }
    let norm = generator.norm().max(f64::MIN_POSITIVE);
    if (generator - generator.adjoint()).norm() > 1e-12 * norm {
        return Err(Error::InvalidParameter("frame generator must be Hermitian".into()));
    }
    let eig = SymmetricEigen::new(generator.clone());
    Ok(RotatingFrame { inner, energies: eig.eigenvalues.iter().copied().collect(), vectors: eig.eigenvectors })
}

impl Hamiltonian for RotatingFrame {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn write(&self, t: f64, anchor: f64, out: &mut CMatrix) {
        let d = self.dim();
        let mut h = CMatrix::zeros(d, d);
        self.inner.write(t, anchor, &mut h);
        let mut m = self.vectors.adjoint() * h * &self.vectors;
        for k in 0..d {
            for l in 0..d {
                m[(k, l)] *= C64::from_polar(1.0, (self.energies[k] - self.energies[l]) * t);
            }
            m[(k, k)] -= real(self.energies[k]);
        }
        out.copy_from(&(&self.vectors * m * self.vectors.adjoint()));
    }

    fn max_frequency(&self) -> f64 {
        let (lo, hi) = self.energies.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &e| (a.min(e), b.max(e)));
        self.inner.max_frequency() + (hi - lo).max(0.0)
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.inner.breakpoints()
    }
}

/// Interaction picture with respect to diag(`energies`) of a Hamiltonian
/// `static_part + drive_scale · f(t) · drive_operator`, keeping only drive
/// components within `cutoff` of a transition.
///
/// Each tone j of f contributes (Ω_j/2) e^{iφ_j} e^{i(ω_kl − ω_j)t} A_kl |k⟩⟨l|
/// (plus conjugate) for every upward transition ω_kl = E_k − E_l > 0 with
/// |ω_kl − ω_j| < `cutoff`. The static part is kept in full.
#[derive(Debug, Clone)]
pub struct RwaHamiltonian {
    pub energies: Vec<f64>,
    pub static_part: CMatrix,
    pub drive_operator: CMatrix,
    pub sequence: Arc<PulseSequence>,
    pub drive_scale: f64,
    pub cutoff: f64,
}

impl RwaHamiltonian {
    fn transitions(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let d = self.energies.len();
        (0..d).flat_map(move |k| (0..d).map(move |l| (k, l))).filter_map(move |(k, l)| {
            let w = self.energies[k] - self.energies[l];
            (w > 0.0 && self.drive_operator[(k, l)] != ZERO).then_some((k, l, w))
        })
    }
}

impl Hamiltonian for RwaHamiltonian {
    fn dim(&self) -> usize {
        self.energies.len()
    }

    fn write(&self, t: f64, anchor: f64, out: &mut CMatrix) {
        let d = self.dim();
        for k in 0..d {
            for l in 0..d {
                let s = self.static_part[(k, l)];
                out[(k, l)] = if s == ZERO { ZERO } else { s * C64::from_polar(1.0, (self.energies[k] - self.energies[l]) * t) };
            }
        }
        let Some(idx) = self.sequence.segment_index(anchor) else { return };
        let seg = &self.sequence.segments[idx];
        let (a1, a2) = seg.tone_amplitudes(t);
        let tones = [(a1, seg.omega1, seg.phi1), (a2, seg.omega2, seg.phi2)];
        for (k, l, w) in self.transitions() {
            for &(amp, wj, phj) in &tones {
                if amp == 0.0 || (w - wj).abs() >= self.cutoff {
                    continue;
                }
                let c = self.drive_operator[(k, l)] * (self.drive_scale * amp / 2.0) * C64::from_polar(1.0, phj + (w - wj) * t);
                out[(k, l)] += c;
                out[(l, k)] += c.conj();
            }
        }
    }

    fn max_frequency(&self) -> f64 {
        let d = self.dim();
        let mut f: f64 = 0.0;
        for k in 0..d {
            for l in 0..d {
                if self.static_part[(k, l)] != ZERO {
                    f = f.max((self.energies[k] - self.energies[l]).abs());
                }
            }
        }
        let carriers: Vec<f64> = self.sequence.segments.iter().flat_map(|s| [s.omega1, s.omega2]).collect();
        for (_, _, w) in self.transitions() {
            for &wj in &carriers {
                if (w - wj).abs() < self.cutoff {
                    f = f.max((w - wj).abs());
                }
            }
        }
        let peak = self.sequence.segments.iter().map(|s| s.envelope.peak).fold(0.0, f64::max);
        let op_max = self.drive_operator.iter().map(|z| z.norm()).fold(0.0, f64::max);
        f.max(peak * self.drive_scale.abs() * op_max)
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.sequence.breakpoints()
    }
}

/// Cavity decay κ, qubit decay Γ₁ and dephasing Γ₂, all in rad/s.
#[derive(Debug, Clone, Copy, PartialEq, Default, serde::Serialize, serde::Deserialize)]
pub struct NoiseModel {
    pub kappa: f64,
    pub gamma1: f64,
    pub gamma2: f64,
}

impl NoiseModel {
    pub const NONE: Self = Self { kappa: 0.0, gamma1: 0.0, gamma2: 0.0 };

    pub fn new(kappa: f64, gamma1: f64, gamma2: f64) -> Result<Self> {
        let n = Self { kappa, gamma1, gamma2 };
        n.validate()?;
        Ok(n)
    }

    /// κ = 2π·0.1 kHz, Γ₁ = Γ₂ = 2π·4 kHz.
    pub fn paper() -> Self {
        Self { kappa: 2.0 * PI * 0.1e3, gamma1: 2.0 * PI * 4e3, gamma2: 2.0 * PI * 4e3 }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, r) in [("kappa", self.kappa), ("gamma1", self.gamma1), ("gamma2", self.gamma2)] {
            if !(r >= 0.0 && r.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be a non-negative rate, got {r}")));
            }
        }
        Ok(())
    }

    pub fn is_noiseless(&self) -> bool {
        self.kappa == 0.0 && self.gamma1 == 0.0 && self.gamma2 == 0.0
    }

    /// (κ, a), (Γ₁, σ⁻), (Γ₂, σ_z) for one pair; zero rates are dropped.
    pub fn collapse_operators(&self, ops: &PairOperators) -> Vec<CollapseOperator> {
        [(self.kappa, &ops.a), (self.gamma1, &ops.sigma_minus), (self.gamma2, &ops.sigma_z)]
            .into_iter()
            .filter(|(r, _)| *r > 0.0)
            .map(|(rate, op)| CollapseOperator::new(rate, op.matrix().clone()))
            .collect()
    }
}

/// Dissipator rate·(AρA† − ½{A†A, ρ}).
#[derive(Debug, Clone, PartialEq)]
pub struct CollapseOperator {
    pub rate: f64,
    pub operator: CMatrix,
}

impl CollapseOperator {
    pub fn new(rate: f64, operator: CMatrix) -> Self {
        Self { rate, operator }
    }

    /// The same operator in the basis whose columns are `basis`.
    pub fn transformed(&self, basis: &CMatrix) -> Self {
        Self { rate: self.rate, operator: basis.adjoint() * &self.operator * basis }
    }
}

/// Collapse operators, optionally defined in a frame rotating with diag(E).
///
/// With `frame_energies` set, the state being integrated is in the interaction
/// picture of diag(E), and each dissipator is applied after rotating back.
#[derive(Debug, Clone, Default)]
pub struct Dissipation {
    pub collapse: Vec<CollapseOperator>,
    pub frame_energies: Option<Vec<f64>>,
}

impl Dissipation {
    pub fn lab(collapse: Vec<CollapseOperator>) -> Self {
        Self { collapse, frame_energies: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum QuantumState {
    Vector(CVector),
    Density(CMatrix),
}

impl QuantumState {
    pub fn dim(&self) -> usize {
        match self {
            QuantumState::Vector(v) => v.len(),
            QuantumState::Density(m) => m.nrows(),
        }
    }

    pub fn density(&self) -> CMatrix {
        match self {
            QuantumState::Vector(v) => v * v.adjoint(),
            QuantumState::Density(m) => m.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            QuantumState::Vector(v) => {
                let n = v.norm_squared();
                if (n - 1.0).abs() > 1e-9 {
                    return Err(Error::InvalidParameter(format!("state vector norm² is {n}, expected 1")));
                }
            }
            QuantumState::Density(m) => {
                if m.nrows() != m.ncols() {
                    return Err(Error::DimensionMismatch { expected: m.nrows(), found: m.ncols() });
                }
                let tr = m.trace();
                if (tr.re - 1.0).abs() > 1e-8 || tr.im.abs() > 1e-8 {
                    return Err(Error::InvalidParameter(format!("density matrix trace is {tr}, expected 1")));
                }
                if (m - m.adjoint()).norm() > 1e-10 {
                    return Err(Error::InvalidParameter("density matrix is not Hermitian".into()));
                }
                let min = SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
                if min < -1e-8 {
                    return Err(Error::InvalidParameter(format!("density matrix has eigenvalue {min}")));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorOptions {
    /// Steps per period of the fastest frequency, used when `step` is unset.
    pub steps_per_period: f64,
    pub step: Option<f64>,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        Self { steps_per_period: 100.0, step: None }
    }
}

/// What to record at each sample time.
#[derive(Debug, Clone, Default)]
pub struct Observables {
    /// Populations ⟨v|ρ|v⟩ of labelled states.
    pub projectors: Vec<(String, CVector)>,
    /// Orthonormal logical basis for the projected density matrix.
    pub logical_basis: Vec<CVector>,
    /// Logical target state for the fidelity trace.
    pub target: Option<CVector>,
    /// Diagonal frame energies: states are rotated by e^{iEt} before measuring.
    pub frame_energies: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub times: Vec<f64>,
    pub labels: Vec<String>,
    /// populations[time][projector]
    pub populations: Vec<Vec<f64>>,
    pub logical: Vec<CMatrix>,
    pub leakage: Vec<f64>,
    pub fidelity: Vec<f64>,
    /// Final state as integrated (before any observable frame rotation).
    pub final_state: QuantumState,
    /// Largest deviation of the norm² (vectors) or trace (densities) from its initial value.
    pub drift: f64,
}

impl SimResult {
    pub fn final_fidelity(&self) -> Option<f64> {
        self.fidelity.last().copied()
    }

    pub fn final_logical(&self) -> Option<&CMatrix> {
        self.logical.last()
    }

    pub fn population(&self, label: &str) -> Option<Vec<f64>> {
        let k = self.labels.iter().position(|l| l == label)?;
        Some(self.populations.iter().map(|p| p[k]).collect())
    }
}

/// Rotates a density matrix (or vector outer product) by e^{iEt}: ρ_kl ↦ ρ_kl e^{i(E_k − E_l)t}.
pub fn rotate_density(rho: &CMatrix, energies: &[f64], t: f64) -> CMatrix {
    CMatrix::from_fn(rho.nrows(), rho.ncols(), |k, l| rho[(k, l)] * C64::from_polar(1.0, (energies[k] - energies[l]) * t))
}

fn measure(rho: &CMatrix, t: f64, obs: &Observables, out: &mut SimResult) -> Result<()> {
    let rotated;
    let rho = match &obs.frame_energies {
        Some(e) => {
            rotated = rotate_density(rho, e, t);
            &rotated
        }
        None => rho,
    };
    out.times.push(t);
    out.populations.push(obs.projectors.iter().map(|(_, v)| v.dotc(&(rho * v)).re).collect());
    if !obs.logical_basis.is_empty() {
        let p = project_density(rho, &obs.logical_basis)?;
        if let Some(target) = &obs.target {
            out.fidelity.push(state_fidelity(&p.rho, target)?);
        }
        out.leakage.push(p.leakage);
        out.logical.push(p.rho);
    }
    Ok(())
}

/// Time points the integrator must land on: samples plus interior breakpoints.
fn pieces(times: &[f64], breakpoints: &[f64]) -> Result<Vec<f64>> {
    if times.is_empty() {
        return Err(Error::InvalidParameter("time grid is empty".into()));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidParameter("time grid must be strictly increasing".into()));
    }
    let (t0, t1) = (times[0], *times.last().unwrap());
    let mut all: Vec<f64> = times.to_vec();
    all.extend(breakpoints.iter().copied().filter(|&b| b > t0 && b < t1));
    all.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let tol = 1e-12 * (t1 - t0).abs().max(f64::MIN_POSITIVE);
    all.dedup_by(|a, b| (*a - *b).abs() <= tol);
    // dedup keeps the first of a run; make sure exact sample times survive.
    for t in times {
        if let Some(x) = all.iter_mut().find(|x| (**x - t).abs() <= tol) {
            *x = *t;
        }
    }
    Ok(all)
}

/// Gershgorin bound on |λ − c| for the spectrum of H about c = tr H / d.
fn gershgorin_radius(h: &CMatrix) -> f64 {
    let d = h.nrows();
    let c = h.trace().re / d as f64;
    (0..d)
        .map(|i| {
            let off: f64 = (0..d).filter(|&j| j != i).map(|j| h[(i, j)].norm()).sum();
            (h[(i, i)].re - c).abs() + off
        })
        .fold(0.0, f64::max)
}

struct Plan {
    nodes: Vec<f64>,
    step: f64,
    /// Diagonal handled exactly through the interaction picture of diag(frame).
    frame: Vec<f64>,
    uniform: bool,
}

fn plan(h: &dyn Hamiltonian, times: &[f64], opts: &IntegratorOptions, extra_rate: f64) -> Result<Plan> {
    let nodes = pieces(times, &h.breakpoints())?;
    let d = h.dim();
    let mut buf = CMatrix::zeros(d, d);
    h.write(nodes[0], nodes[0], &mut buf);
    let frame = match h.static_diagonal() {
        Some(diag) if diag.len() == d => diag,
        _ => vec![buf.trace().re / d as f64; d],
    };
    let uniform = frame.iter().all(|&e| e == frame[0]);

    let mut scale = h.max_frequency().max(extra_rate);
    for w in nodes.windows(2) {
        let mid = 0.5 * (w[0] + w[1]);
        for t in [w[0], mid] {
            h.write(t, mid, &mut buf);
            for i in 0..d {
                buf[(i, i)] -= real(frame[i]);
            }
            scale = scale.max(gershgorin_radius(&buf));
            for k in 0..d {
                for l in 0..d {
                    if buf[(k, l)] != ZERO {
                        scale = scale.max((frame[k] - frame[l]).abs());
                    }
                }
            }
        }
    }
    if !scale.is_finite() {
        return Err(Error::Divergence { t: times[0] });
    }
    let limit = if scale > 0.0 { 2.0 * PI / (50.0 * scale) } else { f64::INFINITY };
    let step = match opts.step {
        Some(s) => {
            if !(s > 0.0) {
                return Err(Error::InvalidParameter(format!("step must be positive, got {s}")));
            }
            if s > limit {
                return Err(Error::StepTooLarge { step: s, limit });
            }
            s
        }
        None => {
            if !(opts.steps_per_period >= 50.0) {
                return Err(Error::InvalidParameter(format!(
                    "steps_per_period must be at least 50, got {}",
                    opts.steps_per_period
                )));
            }
            if scale > 0.0 {
                2.0 * PI / (opts.steps_per_period * scale)
            } else {
                f64::INFINITY
            }
        }
    };
    Ok(Plan { nodes, step, frame, uniform })
}

impl Plan {
    /// u_k = e^{i frame_k t}.
    fn phases(&self, t: f64, out: &mut [C64]) {
        for (o, &e) in out.iter_mut().zip(&self.frame) {
            *o = C64::from_polar(1.0, e * t);
        }
    }

    /// Writes e^{iDt}(H(t) − D)e^{−iDt} into `out`.
    fn interaction(&self, h: &dyn Hamiltonian, t: f64, anchor: f64, u: &mut [C64], out: &mut CMatrix) {
        h.write(t, anchor, out);
        let d = out.nrows();
        for i in 0..d {
            out[(i, i)] -= real(self.frame[i]);
        }
        if !self.uniform {
            self.phases(t, u);
            for l in 0..d {
                let cl = u[l].conj();
                for k in 0..d {
                    out[(k, l)] *= u[k] * cl;
                }
            }
        }
    }
}

struct Rk4 {
    k1: CMatrix,
    k2: CMatrix,
    k3: CMatrix,
    k4: CMatrix,
    tmp: CMatrix,
}

impl Rk4 {
    fn new(rows: usize, cols: usize) -> Self {
        let z = CMatrix::zeros(rows, cols);
        Self { k1: z.clone(), k2: z.clone(), k3: z.clone(), k4: z.clone(), tmp: z }
    }

    fn run<F>(&mut self, y: &mut CMatrix, t0: f64, t1: f64, max_step: f64, rhs: &mut F)
    where
        F: FnMut(f64, f64, &CMatrix, &mut CMatrix),
    {
        let n = if max_step.is_finite() { (((t1 - t0) / max_step) - 1e-9).ceil().max(1.0) as usize } else { 1 };
        let h = (t1 - t0) / n as f64;
        for s in 0..n {
            let t = t0 + s as f64 * h;
            let t_next = if s + 1 == n { t1 } else { t0 + (s + 1) as f64 * h };
            let mid = 0.5 * (t + t_next);
            rhs(t, mid, y, &mut self.k1);
            axpy_into(&mut self.tmp, y, h / 2.0, &self.k1);
            rhs(mid, mid, &self.tmp, &mut self.k2);
            axpy_into(&mut self.tmp, y, h / 2.0, &self.k2);
            rhs(mid, mid, &self.tmp, &mut self.k3);
            axpy_into(&mut self.tmp, y, h, &self.k3);
            rhs(t_next, mid, &self.tmp, &mut self.k4);
            let w = h / 6.0;
            for ((((yv, a), b), c), d) in y
                .iter_mut()
                .zip(self.k1.iter())
                .zip(self.k2.iter())
                .zip(self.k3.iter())
                .zip(self.k4.iter())
            {
                *yv += (*a + (*b + *c) * 2.0 + *d) * w;
            }
        }
    }
}

fn axpy_into(out: &mut CMatrix, y: &CMatrix, a: f64, k: &CMatrix) {
    for ((o, yv), kv) in out.iter_mut().zip(y.iter()).zip(k.iter()) {
        *o = *yv + *kv * a;
    }
}

fn check_finite(m: &CMatrix, t: f64) -> Result<()> {
    if m.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::Divergence { t })
    }
}

/// Multiplies row k by e^{sign·i frame_k t} (and column l by the conjugate when `both`).
fn rotate_in_place(m: &mut CMatrix, frame: &[f64], t: f64, sign: f64, both: bool) {
    let u: Vec<C64> = frame.iter().map(|&e| C64::from_polar(1.0, sign * e * t)).collect();
    for c in 0..m.ncols() {
        for r in 0..m.nrows() {
            m[(r, c)] *= if both { u[r] * u[c].conj() } else { u[r] };
        }
    }
}

/// Propagates the columns of `psi` under iψ̇ = Hψ, returning them at each sample time.
pub fn propagate_vectors(h: &dyn Hamiltonian, psi: &CMatrix, times: &[f64], opts: &IntegratorOptions) -> Result<Vec<CMatrix>> {
    if psi.nrows() != h.dim() {
        return Err(Error::DimensionMismatch { expected: h.dim(), found: psi.nrows() });
    }
    let plan = plan(h, times, opts, 0.0)?;
    let d = h.dim();
    let mut hbuf = CMatrix::zeros(d, d);
    let mut u = vec![ZERO; d];
    let mut rhs = |t: f64, anchor: f64, y: &CMatrix, out: &mut CMatrix| {
        plan.interaction(h, t, anchor, &mut u, &mut hbuf);
        out.gemm(-I, &hbuf, y, ZERO);
    };
    let mut rk = Rk4::new(d, psi.ncols());
    let mut y = psi.clone();
    rotate_in_place(&mut y, &plan.frame, plan.nodes[0], 1.0, false);
    let mut out = Vec::with_capacity(times.len());
    let mut next_sample = 0;
    for (i, &node) in plan.nodes.iter().enumerate() {
        if i > 0 {
            rk.run(&mut y, plan.nodes[i - 1], node, plan.step, &mut rhs);
            check_finite(&y, node)?;
        }
        if next_sample < times.len() && node == times[next_sample] {
            let mut s = y.clone();
            rotate_in_place(&mut s, &plan.frame, node, -1.0, false);
            out.push(s);
            next_sample += 1;
        }
    }
    Ok(out)
}

/// Propagates ρ under the Lindblad equation, returning it at each sample time.
///
/// `rho` need not be a physical state (channel construction passes matrix units);
/// the trace check compares against the initial trace.
pub fn propagate_density(
    h: &dyn Hamiltonian,
    dissipation: &Dissipation,
    rho: &CMatrix,
    times: &[f64],
    opts: &IntegratorOptions,
) -> Result<Vec<CMatrix>> {
    let d = h.dim();
    if rho.nrows() != d || rho.ncols() != d {
        return Err(Error::DimensionMismatch { expected: d, found: rho.nrows() });
    }
    for c in &dissipation.collapse {
        if c.operator.nrows() != d || c.operator.ncols() != d {
            return Err(Error::DimensionMismatch { expected: d, found: c.operator.nrows() });
        }
        if !(c.rate >= 0.0) {
            return Err(Error::InvalidParameter(format!("collapse rate must be non-negative, got {}", c.rate)));
        }
    }
    if let Some(e) = &dissipation.frame_energies {
        if e.len() != d {
            return Err(Error::DimensionMismatch { expected: d, found: e.len() });
        }
    }
    let total_rate: f64 = dissipation
        .collapse
        .iter()
        .map(|c| c.rate * c.operator.iter().map(|z| z.norm_sqr()).sum::<f64>())
        .sum();
    let plan = plan(h, times, opts, total_rate)?;

    // Frame of the integrated variable relative to the lab, for the dissipators.
    let lab_frame: Vec<f64> = match &dissipation.frame_energies {
        Some(f) => plan.frame.iter().zip(f).map(|(a, b)| a + b).collect(),
        None => plan.frame.clone(),
    };
    let lab_uniform = lab_frame.iter().all(|&e| e == lab_frame[0]);

    let nonzeros = |m: &CMatrix| {
        let mut nz = Vec::new();
        for col in 0..d {
            for row in 0..d {
                let a = m[(row, col)];
                if a != ZERO {
                    nz.push((row, col, a));
                }
            }
        }
        nz
    };
    let jumps: Vec<(f64, Vec<(usize, usize, C64)>)> = dissipation.collapse.iter().map(|c| (c.rate, nonzeros(&c.operator))).collect();
    let mut decay = CMatrix::zeros(d, d);
    for c in &dissipation.collapse {
        decay += c.operator.adjoint() * &c.operator * real(c.rate / 2.0);
    }
    let decay = nonzeros(&decay);

    let mut heff = CMatrix::zeros(d, d);
    let mut u = vec![ZERO; d];
    let mut w = vec![ZERO; d];
    let mut nz: Vec<(usize, usize, C64)> = Vec::with_capacity(d * d);
    let mut framed_op: Vec<(usize, usize, C64)> = Vec::new();

    // With ρ_lab = V y V†, V = e^{−iLt}, every lab operator X enters as V†XV,
    // whose entries are X_kl e^{i(L_k − L_l)t}. The anticommutator joins H as
    // H_eff = H − iK, K = Σ (r/2) A†A, and the jumps add Σ r A y A†.
    let mut rhs = |t: f64, anchor: f64, y: &CMatrix, out: &mut CMatrix| {
        plan.interaction(h, t, anchor, &mut u, &mut heff);
        let framed = !lab_uniform;
        if framed {
            for (o, &e) in w.iter_mut().zip(&lab_frame) {
                *o = C64::from_polar(1.0, e * t);
            }
        }
        let phase = |k: usize, l: usize| if framed { w[k] * w[l].conj() } else { C64::new(1.0, 0.0) };
        for &(k, l, v) in &decay {
            heff[(k, l)] -= I * v * phase(k, l);
        }
        nz.clear();
        for col in 0..d {
            for row in 0..d {
                let v = heff[(row, col)];
                if v != ZERO {
                    nz.push((row, col, v));
                }
            }
        }
        out.fill(ZERO);
        for &(k, l, v) in &nz {
            let a = -I * v;
            let b = I * v.conj();
            for c in 0..d {
                out[(k, c)] += a * y[(l, c)];
                out[(c, k)] += y[(c, l)] * b;
            }
        }
        for (rate, ops) in &jumps {
            framed_op.clear();
            framed_op.extend(ops.iter().map(|&(i, j, a)| (i, j, a * phase(i, j))));
            for &(i, j, a) in &framed_op {
                let a = a * *rate;
                for &(k, l, b) in &framed_op {
                    out[(i, k)] += a * y[(j, l)] * b.conj();
                }
            }
        }
    };

    let tr0 = rho.trace();
    let mut rk = Rk4::new(d, d);
    let mut y = rho.clone();
    rotate_in_place(&mut y, &plan.frame, plan.nodes[0], 1.0, true);
    let mut out = Vec::with_capacity(times.len());
    let mut next_sample = 0;
    for (i, &node) in plan.nodes.iter().enumerate() {
        if i > 0 {
            rk.run(&mut y, plan.nodes[i - 1], node, plan.step, &mut rhs);
            check_finite(&y, node)?;
            let drift = (y.trace() - tr0).norm();
            if drift > 1e-6 {
                return Err(Error::TraceDrift { drift });
            }
        }
        if next_sample < times.len() && node == times[next_sample] {
            let mut s = y.clone();
            rotate_in_place(&mut s, &plan.frame, node, -1.0, true);
            out.push(s);
            next_sample += 1;
        }
    }
    Ok(out)
}

fn empty_result(state: QuantumState, labels: Vec<String>) -> SimResult {
    SimResult {
        times: Vec::new(),
        labels,
        populations: Vec::new(),
        logical: Vec::new(),
        leakage: Vec::new(),
        fidelity: Vec::new(),
        final_state: state,
        drift: 0.0,
    }
}

/// Schrödinger evolution of a pure state with observables at each time in `times`.
pub fn evolve_unitary(
    h: &dyn Hamiltonian,
    psi0: &QuantumState,
    times: &[f64],
    opts: &IntegratorOptions,
    obs: &Observables,
) -> Result<SimResult> {
    let QuantumState::Vector(psi) = psi0 else {
        return Err(Error::InvalidParameter("evolve_unitary needs a state vector".into()));
    };
    psi0.validate()?;
    let col = CMatrix::from_column_slice(psi.len(), 1, psi.as_slice());
    let states = propagate_vectors(h, &col, times, opts)?;
    let labels = obs.projectors.iter().map(|(l, _)| l.clone()).collect();
    let mut res = empty_result(psi0.clone(), labels);
    let n0 = psi.norm_squared();
    for (t, s) in times.iter().zip(&states) {
        let v = CVector::from_column_slice(s.as_slice());
        res.drift = res.drift.max((v.norm_squared() - n0).abs());
        measure(&(&v * v.adjoint()), *t, obs, &mut res)?;
    }
    if let Some(last) = states.last() {
        res.final_state = QuantumState::Vector(CVector::from_column_slice(last.as_slice()));
    }
    Ok(res)
}

/// Lindblad evolution with observables at each time in `times`.
pub fn evolve_lindblad(
    h: &dyn Hamiltonian,
    rho0: &QuantumState,
    dissipation: &Dissipation,
    times: &[f64],
    opts: &IntegratorOptions,
    obs: &Observables,
) -> Result<SimResult> {
    rho0.validate()?;
    let rho = rho0.density();
    let states = propagate_density(h, dissipation, &rho, times, opts)?;
    let labels = obs.projectors.iter().map(|(l, _)| l.clone()).collect();
    let mut res = empty_result(rho0.clone(), labels);
    let tr0 = rho.trace();
    for (t, s) in times.iter().zip(&states) {
        res.drift = res.drift.max((s.trace() - tr0).norm());
        measure(s, *t, obs, &mut res)?;
    }
    if let Some(last) = states.last() {
        res.final_state = QuantumState::Density(last.clone());
    }
    Ok(res)
}

/// `n` evenly spaced times on [0, t_end], both ends included.
pub fn uniform_grid(t_end: f64, n: usize) -> Vec<f64> {
    if n < 2 {
        return vec![t_end];
    }
    (0..n).map(|i| if i + 1 == n { t_end } else { t_end * i as f64 / (n - 1) as f64 }).collect()
}
