use std::fmt;

use polariton::dynamics::SimResult;
use polariton::gates::target_unitary_single;
use polariton::hilbert::{CVector, ONE, ZERO};
use polariton::jc_model::{dressed_spectrum, noise_energy_shifts, transition_frequencies, NoiseAxis};
use polariton::robustness::{sweep_decoherence, sweep_error, ErrorAxis, SweepResult};
use polariton::single_qubit::PolaritonQubit;
use polariton::two_qubit::{CoupledSystem, LOGICAL_LABELS};

use crate::config::{Axis, ExperimentConfig, SingleInitial, TwoInitial};

/// Why a command stopped; selects the exit status.
#[derive(Debug)]
pub enum Failure {
    Config(String),
    Numerical(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Config(_) => 1,
            Failure::Numerical(_) => 2,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Config(m) => write!(f, "configuration error: {m}"),
            Failure::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl From<polariton::Error> for Failure {
    fn from(e: polariton::Error) -> Self {
        use polariton::Error::*;
        match e {
            Divergence { .. } | TraceDrift { .. } | StepTooLarge { .. } | NonOrthonormal(_) | OutOfRange { .. } | Degenerate { .. } => {
                Failure::Numerical(e.to_string())
            }
            _ => Failure::Config(e.to_string()),
        }
    }
}

/// A finished command: CSV text and human-readable summary lines.
pub struct Report {
    pub csv: String,
    pub summary: Vec<String>,
}

struct Table {
    writer: csv::Writer<Vec<u8>>,
}

impl Table {
    fn new(header: &[String]) -> Self {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(header).expect("in-memory write");
        Self { writer }
    }

    fn row(&mut self, fields: impl IntoIterator<Item = String>) {
        self.writer.write_record(fields.into_iter().collect::<Vec<_>>()).expect("in-memory write");
    }

    fn finish(self) -> String {
        String::from_utf8(self.writer.into_inner().expect("in-memory flush")).expect("utf-8 csv")
    }
}

fn strings(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

fn to_ghz(w: f64) -> f64 {
    w / (2.0 * std::f64::consts::PI) / 1e9
}

fn to_mhz(w: f64) -> f64 {
    w / (2.0 * std::f64::consts::PI) / 1e6
}

pub fn spectrum(config: &ExperimentConfig) -> Result<Report, Failure> {
    let params = config.jc_params()?;
    let basis = dressed_spectrum(&params)?;
    let w = transition_frequencies(&basis);
    let mut summary = vec![format!("ground energy {} GHz", to_ghz(basis.ground_energy))];
    for pair in &basis.pairs {
        summary.push(format!(
            "n={}: E_- {} GHz, E_+ {} GHz, splitting {} MHz",
            pair.n,
            to_ghz(pair.energy_minus),
            to_ghz(pair.energy_plus),
            to_mhz(pair.splitting())
        ));
    }
    summary.push(format!("omega_- {} GHz, omega_+ {} GHz", to_ghz(w.omega_minus), to_ghz(w.omega_plus)));

    let mut table = Table::new(&strings(&[
        "axis",
        "h_over_scale",
        "h_mhz",
        "shift_minus_mhz",
        "shift_plus_mhz",
        "approx_minus_mhz",
        "approx_plus_mhz",
    ]));
    // σ_x amplitudes are measured against ω_q, σ_z amplitudes against g.
    for (axis, name, scale) in [(NoiseAxis::X, "x", params.omega_q), (NoiseAxis::Z, "z", params.g)] {
        for f in [1e-3, 2e-3, 5e-3, 1e-2, 2e-2] {
            let h = f * scale;
            let s = noise_energy_shifts(&params, h, axis)?;
            table.row([
                name.to_string(),
                format!("{f}"),
                format!("{}", to_mhz(h)),
                format!("{}", to_mhz(s.exact_minus)),
                format!("{}", to_mhz(s.exact_plus)),
                format!("{}", to_mhz(s.approx_minus)),
                format!("{}", to_mhz(s.approx_plus)),
            ]);
        }
    }
    Ok(Report { csv: table.finish(), summary })
}

fn trace_table(res: &SimResult, extra: &[&str]) -> Result<String, Failure> {
    let mut header = strings(&["time_ns", "p_G", "p_minus", "p_plus", "leakage", "fidelity"]);
    header.extend(strings(extra));
    let mut columns = Vec::new();
    for label in header[1..4].iter().chain(&header[6..]) {
        columns.push(res.population(label).ok_or_else(|| Failure::Numerical(format!("trace has no {label} column")))?);
    }
    let mut table = Table::new(&header);
    for (k, t) in res.times.iter().enumerate() {
        let mut row = vec![format!("{}", t * 1e9)];
        row.extend(columns[..3].iter().map(|c| format!("{}", c[k])));
        row.push(format!("{}", res.leakage[k]));
        row.push(format!("{}", res.fidelity[k]));
        row.extend(columns[3..].iter().map(|c| format!("{}", c[k])));
        table.row(row);
    }
    Ok(table.finish())
}

pub fn gate(config: &ExperimentConfig) -> Result<Report, Failure> {
    let params = config.jc_params()?;
    let device = PolaritonQubit::new(params, config.system.model)?;
    let run = config.single_run(&params);
    let initial = match config.gate.initial {
        SingleInitial::Minus => CVector::from_vec(vec![ONE, ZERO]),
        SingleInitial::Plus => CVector::from_vec(vec![ZERO, ONE]),
    };
    let res = device.run_trace(&run, &initial, config.integrator.samples)?;
    let average = device.channel(&run)?.average_fidelity(&target_unitary_single(&run.spec), &config.grid().states());
    let duration = *res.times.last().expect("at least two samples");
    let summary = vec![
        format!("gate duration {} ns", duration * 1e9),
        format!("state fidelity {}", res.final_fidelity().unwrap_or(f64::NAN)),
        format!("average gate fidelity {average}"),
        format!("final leakage {}", res.leakage.last().expect("at least two samples")),
    ];
    Ok(Report { csv: trace_table(&res, &[])?, summary })
}

pub fn two_qubit(config: &ExperimentConfig) -> Result<Report, Failure> {
    let system = CoupledSystem::new(config.coupled_params()?)?;
    let run = config.two_qubit_run();
    let k = match config.gate.two_qubit_initial {
        TwoInitial::Pp => 0,
        TwoInitial::Pm => 1,
        TwoInitial::Mp => 2,
        TwoInitial::Mm => 3,
    };
    let initial = CVector::from_fn(4, |i, _| if i == k { ONE } else { ZERO });
    let res = system.run_trace(&run, &initial, config.integrator.samples)?;
    let metrics = system.cnot_fidelity_on(&run, &config.grid())?;
    let t = &system.transitions;
    let summary = vec![
        format!(
            "ancilla tones {} GHz and {} GHz, matrix elements {} and {}",
            to_ghz(t.omega_minus),
            to_ghz(t.omega_plus),
            t.element_minus,
            t.element_plus
        ),
        format!("gate duration {} ns", res.times.last().expect("at least two samples") * 1e9),
        format!("state fidelity {}", res.final_fidelity().unwrap_or(f64::NAN)),
        format!("basis and superposition fidelity {}", metrics.basis_and_superposition),
        format!("product-grid average fidelity {}", metrics.grid_average),
    ];
    let mut extra: Vec<&str> = LOGICAL_LABELS.to_vec();
    extra.push("p_ancilla");
    Ok(Report { csv: trace_table(&res, &extra)?, summary })
}

fn sweep_table(result: &SweepResult) -> String {
    let mut header = vec![result.axis.clone()];
    header.extend(result.columns.iter().cloned());
    let mut table = Table::new(&header);
    for (k, v) in result.values.iter().enumerate() {
        let mut row = vec![format!("{v}")];
        row.extend(result.fidelity.iter().map(|col| format!("{}", col[k])));
        table.row(row);
    }
    table.finish()
}

fn sweep_summary(result: &SweepResult) -> Vec<String> {
    result
        .columns
        .iter()
        .zip(&result.fidelity)
        .map(|(name, col)| format!("{name}: min {} max {}", col.iter().cloned().fold(f64::INFINITY, f64::min), col.iter().cloned().fold(0.0, f64::max)))
        .collect()
}

pub fn sweep(config: &ExperimentConfig) -> Result<Report, Failure> {
    let params = config.jc_params()?;
    let axis = match config.sweep.axis {
        Axis::Z => ErrorAxis::Z,
        Axis::X => ErrorAxis::X,
    };
    let result = sweep_error(axis, &config.fractions(), &config.sweep.schemes, &config.sweep_config(&params))?;
    Ok(Report { csv: sweep_table(&result), summary: sweep_summary(&result) })
}

pub fn sweep_decoherence_cmd(config: &ExperimentConfig) -> Result<Report, Failure> {
    let system = CoupledSystem::new(config.coupled_params()?)?;
    let result = sweep_decoherence(&config.gammas(), &system, &config.two_qubit_run())?;
    Ok(Report { csv: sweep_table(&result), summary: sweep_summary(&result) })
}
