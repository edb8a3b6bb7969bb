//! Control-error injection, the bare three-level baseline and the sweep harnesses.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

use crate::dynamics::{
    propagate_density, propagate_vectors, CollapseOperator, Coefficient, Dissipation, DrivenHamiltonian,
    IntegratorOptions, NoiseModel, RwaHamiltonian,
};
use crate::error::{Error, Result};
use crate::gates::{target_unitary_single, LogicalChannel, SingleQubitGateSpec, StateGrid};
use crate::hilbert::{real, CMatrix, CVector, ONE, ZERO};
use crate::jc_model::JcParams;
use crate::pulses::{compile_single_loop, EnvelopeKind};
use crate::single_qubit::{Frame, ModelSpace, PolaritonQubit, SingleQubitRun};
use crate::two_qubit::{CoupledSystem, TwoQubitRun};

/// Fractional Z error Δ (static σ_z term ΔΩ₀σ_z/2) and X error ε (drive scaled by 1 + ε).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ErrorInjection {
    pub delta: f64,
    pub epsilon: f64,
}

impl ErrorInjection {
    pub const NONE: Self = Self { delta: 0.0, epsilon: 0.0 };

    pub fn new(delta: f64, epsilon: f64) -> Result<Self> {
        let e = Self { delta, epsilon };
        e.validate()?;
        Ok(e)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta.abs() <= 0.5 && self.epsilon.abs() <= 0.5) {
            return Err(Error::InvalidParameter(format!(
                "error fractions must lie in [-0.5, 0.5], got delta = {}, epsilon = {}",
                self.delta, self.epsilon
            )));
        }
        Ok(())
    }

    pub fn is_none(&self) -> bool {
        self.delta == 0.0 && self.epsilon == 0.0
    }
}

/// Adds ΔΩ₀σ_z/2 to the static part and scales every control term by 1 + ε.
///
/// The X error is the control term itself times ε, so it follows the
/// envelope and carriers of the drive and vanishes between pulses.
pub fn inject_errors(h: &DrivenHamiltonian, errors: &ErrorInjection, omega0: f64, sigma_z: &CMatrix) -> Result<DrivenHamiltonian> {
    errors.validate()?;
    if sigma_z.shape() != h.static_part.shape() {
        return Err(Error::DimensionMismatch { expected: h.static_part.nrows(), found: sigma_z.nrows() });
    }
    let mut out = h.clone();
    if errors.delta != 0.0 {
        out.static_part += sigma_z * real(errors.delta * omega0 / 2.0);
    }
    if errors.epsilon != 0.0 {
        let scale = 1.0 + errors.epsilon;
        for term in out.terms.iter_mut().filter(|t| t.control) {
            let inner = term.coefficient.clone();
            let scaled: Coefficient = Arc::new(move |t, anchor| inner(t, anchor) * scale);
            term.coefficient = scaled;
        }
    }
    Ok(out)
}

/// Gate schemes compared in the robustness sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    PolaritonDct,
    PolaritonSingleLoop,
    BaselineNhqc,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::PolaritonDct, Scheme::PolaritonSingleLoop, Scheme::BaselineNhqc];

    /// CSV column name.
    pub fn column(&self) -> &'static str {
        match self {
            Scheme::PolaritonDct => "polariton_dct",
            Scheme::PolaritonSingleLoop => "polariton_single_loop",
            Scheme::BaselineNhqc => "baseline_nhqc",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorAxis {
    Z,
    X,
}

impl ErrorAxis {
    pub fn injection(&self, fraction: f64) -> ErrorInjection {
        match self {
            ErrorAxis::Z => ErrorInjection { delta: fraction, epsilon: 0.0 },
            ErrorAxis::X => ErrorInjection { delta: 0.0, epsilon: fraction },
        }
    }
}

/// Bare qubit {|0⟩, |1⟩} plus an auxiliary level |e⟩, driven resonantly on
/// |0⟩↔|e⟩ and |1⟩↔|e⟩ by the single-loop sequence in the rotating frame.
///
/// The auxiliary level is the common reference of both transitions and the
/// |0⟩↔|e⟩ element is −1, so the bright state has the same form as for the
/// polariton drive and the same sequence realizes the same target.
/// Basis order: |0⟩, |1⟩, |e⟩. Noise: Γ₁ on |0⟩⟨1|, Γ₂ on σ_z of the qubit.
pub fn baseline_nhqc_channel(
    spec: &SingleQubitGateSpec,
    errors: &ErrorInjection,
    noise: &NoiseModel,
    envelope: EnvelopeKind,
    peak: f64,
    transitions: (f64, f64),
    integrator: &IntegratorOptions,
) -> Result<LogicalChannel> {
    errors.validate()?;
    noise.validate()?;
    let (w0, w1) = transitions;
    if !(w0 > 0.0 && w1 > w0) {
        return Err(Error::InvalidParameter(format!("baseline transitions must satisfy 0 < w0 < w1, got {w0}, {w1}")));
    }
    let seq = compile_single_loop(spec, envelope, peak, w0, w1)?;
    let energies = vec![w0, w1, 0.0];
    let mut drive = CMatrix::zeros(3, 3);
    drive[(0, 2)] = -ONE;
    drive[(2, 0)] = -ONE;
    drive[(1, 2)] = ONE;
    drive[(2, 1)] = ONE;
    let sz = CMatrix::from_diagonal(&CVector::from_vec(vec![-ONE, ONE, ZERO]));
    let t_end = seq.duration();
    let h = RwaHamiltonian {
        energies: energies.clone(),
        static_part: &sz * real(errors.delta * peak / 2.0),
        drive_operator: drive,
        sequence: Arc::new(seq),
        drive_scale: 1.0 + errors.epsilon,
        cutoff: 0.5 * (w1 - w0),
    };
    let times = [0.0, t_end];
    let logical = |m: &CMatrix| m.view((0, 0), (2, 2)).into_owned();
    if noise.is_noiseless() {
        let cols = CMatrix::from_fn(3, 2, |r, c| if r == c { ONE } else { ZERO });
        let out = propagate_vectors(&h, &cols, &times, integrator)?;
        let fin = &out[1];
        let images = (0..4).map(|k| logical(&(fin.column(k / 2) * fin.column(k % 2).adjoint()))).collect();
        return LogicalChannel::new(2, images);
    }
    let mut lower = CMatrix::zeros(3, 3);
    lower[(0, 1)] = ONE;
    let mut collapse = Vec::new();
    if noise.gamma1 > 0.0 {
        collapse.push(CollapseOperator::new(noise.gamma1, lower));
    }
    if noise.gamma2 > 0.0 {
        collapse.push(CollapseOperator::new(noise.gamma2, sz));
    }
    let diss = Dissipation { collapse, frame_energies: Some(energies) };
    LogicalChannel::from_hermitian_runner(2, |unit| {
        let mut rho = CMatrix::zeros(3, 3);
        rho.view_mut((0, 0), (2, 2)).copy_from(unit);
        let out = propagate_density(&h, &diss, &rho, &times, integrator)?;
        Ok(logical(&out[1]))
    })
}

/// Average gate fidelity of the baseline against the single-qubit target.
pub fn baseline_nhqc_gate(
    spec: &SingleQubitGateSpec,
    errors: &ErrorInjection,
    noise: &NoiseModel,
    config: &SweepConfig,
) -> Result<f64> {
    let device = PolaritonQubit::new(config.params, config.model)?;
    baseline_fidelity(spec, errors, noise, config, &device)
}

fn baseline_fidelity(
    spec: &SingleQubitGateSpec,
    errors: &ErrorInjection,
    noise: &NoiseModel,
    config: &SweepConfig,
    device: &PolaritonQubit,
) -> Result<f64> {
    let w = device.carriers();
    let ch = baseline_nhqc_channel(spec, errors, noise, config.envelope, config.peak, (w.omega_minus, w.omega_plus), &config.integrator)?;
    Ok(ch.average_fidelity(&target_unitary_single(spec), &config.grid.states()))
}

/// Shared settings of a single-qubit robustness sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepConfig {
    pub params: JcParams,
    pub model: ModelSpace,
    pub spec: SingleQubitGateSpec,
    pub envelope: EnvelopeKind,
    pub peak: f64,
    pub noise: NoiseModel,
    pub frame: Frame,
    pub integrator: IntegratorOptions,
    pub grid: StateGrid,
}

impl SweepConfig {
    /// Hadamard, Ω₀ = g/20, the paper's decoherence, full 2211-state grid.
    pub fn paper(params: JcParams, envelope: EnvelopeKind) -> Self {
        Self {
            params,
            model: ModelSpace::Polariton,
            spec: SingleQubitGateSpec::HADAMARD,
            envelope,
            peak: params.g / 20.0,
            noise: NoiseModel::paper(),
            frame: Frame::Lab,
            integrator: IntegratorOptions::default(),
            grid: StateGrid::default(),
        }
    }

    fn run(&self, dct: bool, errors: ErrorInjection) -> SingleQubitRun {
        SingleQubitRun {
            spec: self.spec,
            envelope: self.envelope,
            peak: self.peak,
            dct,
            noise: self.noise,
            errors,
            frame: self.frame,
            integrator: self.integrator,
        }
    }
}

/// Average gate fidelity of one scheme at one error setting.
pub fn scheme_fidelity(scheme: Scheme, errors: &ErrorInjection, config: &SweepConfig, device: &PolaritonQubit) -> Result<f64> {
    let target = target_unitary_single(&config.spec);
    match scheme {
        Scheme::PolaritonDct | Scheme::PolaritonSingleLoop => {
            let run = config.run(scheme == Scheme::PolaritonDct, *errors);
            Ok(device.channel(&run)?.average_fidelity(&target, &config.grid.states()))
        }
        Scheme::BaselineNhqc => baseline_fidelity(&config.spec, errors, &config.noise, config, device),
    }
}

/// Fidelity per scheme per sweep value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    /// Name of the swept quantity (also the first CSV column).
    pub axis: String,
    pub values: Vec<f64>,
    /// Column names, one per scheme.
    pub columns: Vec<String>,
    /// fidelity[column][value]
    pub fidelity: Vec<Vec<f64>>,
}

impl SweepResult {
    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.columns.iter().position(|c| c == name).map(|k| self.fidelity[k].as_slice())
    }
}

/// Fidelity of each scheme against the Z or X error fraction, points evaluated concurrently.
pub fn sweep_error(axis: ErrorAxis, fractions: &[f64], schemes: &[Scheme], config: &SweepConfig) -> Result<SweepResult> {
    for &f in fractions {
        axis.injection(f).validate()?;
    }
    let device = PolaritonQubit::new(config.params, config.model)?;
    let jobs: Vec<(usize, usize)> = (0..schemes.len()).flat_map(|s| (0..fractions.len()).map(move |f| (s, f))).collect();
    let values = jobs
        .par_iter()
        .map(|&(s, f)| scheme_fidelity(schemes[s], &axis.injection(fractions[f]), config, &device))
        .collect::<Result<Vec<f64>>>()?;
    let fidelity = values.chunks(fractions.len().max(1)).map(|c| c.to_vec()).collect();
    Ok(SweepResult {
        axis: "fraction".into(),
        values: fractions.to_vec(),
        columns: schemes.iter().map(|s| s.column().to_string()).collect(),
        fidelity,
    })
}

/// CNOT fidelity against the qubit decoherence rate Γ = Γ₁ = Γ₂ (rad/s), κ held fixed.
pub fn sweep_decoherence(gammas: &[f64], system: &CoupledSystem, run: &TwoQubitRun) -> Result<SweepResult> {
    if let Some(g) = gammas.iter().find(|g| !(**g >= 0.0)) {
        return Err(Error::InvalidParameter(format!("decoherence rates must be non-negative, got {g}")));
    }
    let values = gammas
        .par_iter()
        .map(|&g| {
            let noise = NoiseModel { gamma1: g, gamma2: g, ..run.noise };
            Ok(system.cnot_fidelity(&TwoQubitRun { noise, ..*run })?.basis_and_superposition)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(SweepResult {
        axis: "gamma_khz".into(),
        values: gammas.iter().map(|g| g / (2.0 * std::f64::consts::PI) / 1e3).collect(),
        columns: vec!["cnot".into()],
        fidelity: vec![values],
    })
}

/// First ε at which `a − b` changes sign, by linear interpolation between grid points.
pub fn crossing(x: &[f64], a: &[f64], b: &[f64]) -> Option<f64> {
    let diff: Vec<f64> = a.iter().zip(b).map(|(p, q)| p - q).collect();
    for k in 1..diff.len().min(x.len()) {
        let (d0, d1) = (diff[k - 1], diff[k]);
        if d0 == 0.0 {
            return Some(x[k - 1]);
        }
        if d0.signum() != d1.signum() {
            return Some(x[k - 1] + (x[k] - x[k - 1]) * d0 / (d0 - d1));
        }
    }
    None
}
