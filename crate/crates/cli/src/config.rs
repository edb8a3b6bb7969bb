//! JSON experiment configuration. Frequencies are entered as ν in GHz/MHz/kHz
//! and converted to angular frequencies 2πν rad/s; angles are in units of π.

use std::f64::consts::PI;
use std::path::Path;

use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use polariton::dynamics::{IntegratorOptions, NoiseModel};
use polariton::gates::{SingleQubitGateSpec, StateGrid, TwoQubitGateSpec};
use polariton::jc_model::JcParams;
use polariton::pulses::EnvelopeKind;
use polariton::robustness::{Scheme, SweepConfig};
use polariton::single_qubit::{Frame, ModelSpace, SingleQubitRun};
use polariton::two_qubit::{CoupledParams, TwoQubitRun};

fn ghz(x: f64) -> f64 {
    2.0 * PI * (x * 1e9)
}

fn mhz(x: f64) -> f64 {
    2.0 * PI * (x * 1e6)
}

fn khz(x: f64) -> f64 {
    2.0 * PI * (x * 1e3)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Switch {
    On,
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SingleInitial {
    Minus,
    Plus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TwoInitial {
    Pp,
    Pm,
    Mp,
    Mm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Z,
    X,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub system: SystemConfig,
    pub drive: DriveConfig,
    pub noise: NoiseConfig,
    pub gate: GateConfig,
    pub sweep: SweepBlock,
    pub integrator: IntegratorConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    pub omega_c_ghz: f64,
    pub omega_q_ghz: f64,
    pub g_over_omega_c: f64,
    pub n_fock: usize,
    pub model: ModelSpace,
    pub two_qubit: TwoQubitConfig,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self { omega_c_ghz: 8.0, omega_q_ghz: 8.0, g_over_omega_c: 0.05, n_fock: 5, model: ModelSpace::Polariton, two_qubit: TwoQubitConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TwoQubitConfig {
    pub left: PairConfig,
    pub right: PairConfig,
    pub j1_mhz: f64,
    pub j2_mhz: f64,
}

impl Default for TwoQubitConfig {
    fn default() -> Self {
        Self { left: PairConfig::resonant(7.8), right: PairConfig::resonant(4.7), j1_mhz: 5.0, j2_mhz: 5.0 }
    }
}

/// One transmon-cavity pair of the two-qubit device; g is set relative to the qubit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairConfig {
    pub omega_q_ghz: f64,
    pub omega_c_ghz: f64,
    pub g_over_omega_q: f64,
}

impl PairConfig {
    fn resonant(ghz: f64) -> Self {
        Self { omega_q_ghz: ghz, omega_c_ghz: ghz, g_over_omega_q: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DriveConfig {
    pub omega0_over_g: f64,
    pub envelope: EnvelopeKind,
    pub dct: Switch,
}

impl Default for DriveConfig {
    fn default() -> Self {
        Self { omega0_over_g: 0.05, envelope: EnvelopeKind::Square, dct: Switch::On }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    pub kappa_khz: f64,
    pub gamma1_khz: f64,
    pub gamma2_khz: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self { kappa_khz: 0.1, gamma1_khz: 4.0, gamma2_khz: 4.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GateConfig {
    pub gamma_pi: f64,
    pub theta_pi: f64,
    pub phi_pi: f64,
    pub alpha_pi: f64,
    pub vartheta_pi: f64,
    pub initial: SingleInitial,
    pub two_qubit_initial: TwoInitial,
}

impl Default for GateConfig {
    fn default() -> Self {
        Self {
            gamma_pi: 1.0,
            theta_pi: 0.5,
            phi_pi: 0.0,
            alpha_pi: 1.0,
            vartheta_pi: 0.5,
            initial: SingleInitial::Plus,
            two_qubit_initial: TwoInitial::Mp,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepBlock {
    /// Set by the `sweep-z` / `sweep-x` subcommand.
    pub axis: Axis,
    pub min: f64,
    pub max: f64,
    pub points: usize,
    pub schemes: Vec<Scheme>,
    /// Γ₁ = Γ₂ values for `sweep-decoherence`.
    pub gamma_khz: Vec<f64>,
    /// Input-state grid for average gate fidelities.
    pub grid_theta: usize,
    pub grid_phi: usize,
}

impl Default for SweepBlock {
    fn default() -> Self {
        Self {
            axis: Axis::Z,
            min: -0.1,
            max: 0.1,
            points: 21,
            schemes: Scheme::ALL.to_vec(),
            gamma_khz: vec![0.0, 1.0, 2.0, 4.0, 8.0],
            grid_theta: 201,
            grid_phi: 11,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorConfig {
    pub steps_per_carrier_period: f64,
    pub frame: Frame,
    /// Trace rows written by `gate` and `two-qubit`.
    pub samples: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self { steps_per_carrier_period: 100.0, frame: Frame::Lab, samples: 201 }
    }
}

fn positive(name: &str, x: f64) -> Result<(), String> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(format!("{name} must be positive, got {x}"))
    }
}

fn non_negative(name: &str, x: f64) -> Result<(), String> {
    if x >= 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(format!("{name} must be non-negative, got {x}"))
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    pub fn validate(&self) -> Result<(), String> {
        let s = &self.system;
        positive("system.omega_c_ghz", s.omega_c_ghz)?;
        positive("system.omega_q_ghz", s.omega_q_ghz)?;
        positive("system.g_over_omega_c", s.g_over_omega_c)?;
        if s.n_fock < 3 {
            return Err(format!("system.n_fock must be at least 3, got {}", s.n_fock));
        }
        for (name, p) in [("left", &s.two_qubit.left), ("right", &s.two_qubit.right)] {
            positive(&format!("system.two_qubit.{name}.omega_q_ghz"), p.omega_q_ghz)?;
            positive(&format!("system.two_qubit.{name}.omega_c_ghz"), p.omega_c_ghz)?;
            positive(&format!("system.two_qubit.{name}.g_over_omega_q"), p.g_over_omega_q)?;
        }
        positive("system.two_qubit.j1_mhz", s.two_qubit.j1_mhz)?;
        positive("system.two_qubit.j2_mhz", s.two_qubit.j2_mhz)?;
        positive("drive.omega0_over_g", self.drive.omega0_over_g)?;
        non_negative("noise.kappa_khz", self.noise.kappa_khz)?;
        non_negative("noise.gamma1_khz", self.noise.gamma1_khz)?;
        non_negative("noise.gamma2_khz", self.noise.gamma2_khz)?;
        for (name, x) in [
            ("gate.gamma_pi", self.gate.gamma_pi),
            ("gate.theta_pi", self.gate.theta_pi),
            ("gate.phi_pi", self.gate.phi_pi),
            ("gate.alpha_pi", self.gate.alpha_pi),
            ("gate.vartheta_pi", self.gate.vartheta_pi),
        ] {
            if !x.is_finite() {
                return Err(format!("{name} must be finite"));
            }
        }
        let w = &self.sweep;
        if w.points < 2 {
            return Err(format!("sweep.points must be at least 2, got {}", w.points));
        }
        if !(w.min < w.max) {
            return Err(format!("sweep.min must be below sweep.max, got {} and {}", w.min, w.max));
        }
        if w.min.abs() > 0.5 || w.max.abs() > 0.5 {
            return Err("sweep fractions must lie in [-0.5, 0.5]".into());
        }
        if w.schemes.is_empty() {
            return Err("sweep.schemes must not be empty".into());
        }
        if w.gamma_khz.is_empty() {
            return Err("sweep.gamma_khz must not be empty".into());
        }
        for &g in &w.gamma_khz {
            non_negative("sweep.gamma_khz entries", g)?;
        }
        if w.grid_theta < 1 || w.grid_phi < 1 {
            return Err("sweep.grid_theta and sweep.grid_phi must be at least 1".into());
        }
        if !(self.integrator.steps_per_carrier_period >= 50.0) {
            return Err(format!(
                "integrator.steps_per_carrier_period must be at least 50, got {}",
                self.integrator.steps_per_carrier_period
            ));
        }
        if self.integrator.samples < 2 {
            return Err(format!("integrator.samples must be at least 2, got {}", self.integrator.samples));
        }
        Ok(())
    }

    pub fn jc_params(&self) -> polariton::Result<JcParams> {
        let s = &self.system;
        let wc = ghz(s.omega_c_ghz);
        JcParams::new(ghz(s.omega_q_ghz), wc, s.g_over_omega_c * wc, s.n_fock)
    }

    pub fn coupled_params(&self) -> polariton::Result<CoupledParams> {
        let t = &self.system.two_qubit;
        let pair = |p: &PairConfig| {
            let wq = ghz(p.omega_q_ghz);
            JcParams::new(wq, ghz(p.omega_c_ghz), p.g_over_omega_q * wq, self.system.n_fock)
        };
        Ok(CoupledParams { left: pair(&t.left)?, right: pair(&t.right)?, j1: mhz(t.j1_mhz), j2: mhz(t.j2_mhz) })
    }

    pub fn noise_model(&self) -> NoiseModel {
        NoiseModel { kappa: khz(self.noise.kappa_khz), gamma1: khz(self.noise.gamma1_khz), gamma2: khz(self.noise.gamma2_khz) }
    }

    pub fn integrator_options(&self) -> IntegratorOptions {
        IntegratorOptions { steps_per_period: self.integrator.steps_per_carrier_period, step: None }
    }

    pub fn single_spec(&self) -> SingleQubitGateSpec {
        let g = &self.gate;
        SingleQubitGateSpec { gamma: g.gamma_pi * PI, theta: g.theta_pi * PI, phi: g.phi_pi * PI }
    }

    pub fn two_spec(&self) -> TwoQubitGateSpec {
        let g = &self.gate;
        TwoQubitGateSpec { alpha: g.alpha_pi * PI, vartheta: g.vartheta_pi * PI, phi: g.phi_pi * PI }
    }

    pub fn grid(&self) -> StateGrid {
        StateGrid { n_theta: self.sweep.grid_theta, n_phi: self.sweep.grid_phi }
    }

    pub fn single_run(&self, params: &JcParams) -> SingleQubitRun {
        SingleQubitRun {
            spec: self.single_spec(),
            envelope: self.drive.envelope,
            peak: self.drive.omega0_over_g * params.g,
            dct: self.drive.dct == Switch::On,
            noise: self.noise_model(),
            errors: polariton::robustness::ErrorInjection::NONE,
            frame: self.integrator.frame,
            integrator: self.integrator_options(),
        }
    }

    pub fn two_qubit_run(&self) -> TwoQubitRun {
        TwoQubitRun { spec: self.two_spec(), envelope: self.drive.envelope, noise: self.noise_model(), integrator: self.integrator_options() }
    }

    pub fn sweep_config(&self, params: &JcParams) -> SweepConfig {
        SweepConfig {
            params: *params,
            model: self.system.model,
            spec: self.single_spec(),
            envelope: self.drive.envelope,
            peak: self.drive.omega0_over_g * params.g,
            noise: self.noise_model(),
            frame: self.integrator.frame,
            integrator: self.integrator_options(),
            grid: self.grid(),
        }
    }

    /// Evenly spaced error fractions from `min` to `max`, both included.
    pub fn fractions(&self) -> Vec<f64> {
        let w = &self.sweep;
        let n = w.points;
        (0..n).map(|k| if k + 1 == n { w.max } else { w.min + (w.max - w.min) * k as f64 / (n - 1) as f64 }).collect()
    }

    pub fn gammas(&self) -> Vec<f64> {
        self.sweep.gamma_khz.iter().map(|&g| khz(g)).collect()
    }
}
