//! Drive envelopes, two-tone segments and the compiled gate sequences.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::gates::{SingleQubitGateSpec, TwoQubitGateSpec};
use crate::hilbert::C64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvelopeKind {
    Square,
    Sin2,
}

impl EnvelopeKind {
    pub fn label(&self) -> &'static str {
        match self {
            EnvelopeKind::Square => "square",
            EnvelopeKind::Sin2 => "sin2",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Envelope {
    pub kind: EnvelopeKind,
    pub peak: f64,
    pub duration: f64,
}

impl Envelope {
    pub fn new(kind: EnvelopeKind, peak: f64, duration: f64) -> Result<Self> {
        if !(peak > 0.0 && peak.is_finite()) {
            return Err(Error::InvalidParameter(format!("envelope peak must be positive, got {peak}")));
        }
        if !(duration > 0.0 && duration.is_finite()) {
            return Err(Error::InvalidParameter(format!("envelope duration must be positive, got {duration}")));
        }
        Ok(Self { kind, peak, duration })
    }

    /// Envelope whose duration gives ∫Ω(t)/2 dt = `half_area`.
    pub fn for_half_area(kind: EnvelopeKind, peak: f64, half_area: f64) -> Result<Self> {
        let duration = match kind {
            EnvelopeKind::Square => 2.0 * half_area / peak,
            // ∫ sin²(πt/T) dt = T/2
            EnvelopeKind::Sin2 => 4.0 * half_area / peak,
        };
        Self::new(kind, peak, duration)
    }

    /// Ω at time `t` measured from the segment start; zero outside [0, T].
    pub fn value(&self, t: f64) -> f64 {
        if t < 0.0 || t > self.duration {
            return 0.0;
        }
        match self.kind {
            EnvelopeKind::Square => self.peak,
            EnvelopeKind::Sin2 => self.peak * (PI * t / self.duration).sin().powi(2),
        }
    }

    /// ∫₀^T Ω(t) dt.
    pub fn area(&self) -> f64 {
        match self.kind {
            EnvelopeKind::Square => self.peak * self.duration,
            EnvelopeKind::Sin2 => self.peak * self.duration / 2.0,
        }
    }
}

/// One segment of a two-tone drive.
///
/// Tone 1 carries Ω sin(θ/2), tone 2 carries Ω cos(θ/2); each tone is
/// cos(ω t − φ) in absolute time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseSegment {
    pub start: f64,
    pub envelope: Envelope,
    pub theta: f64,
    pub phi1: f64,
    pub phi2: f64,
    pub omega1: f64,
    pub omega2: f64,
    pub half_area: f64,
}

impl PulseSegment {
    pub fn end(&self) -> f64 {
        self.start + self.envelope.duration
    }

    /// Envelope Ω at absolute time `t`.
    ///
    /// `t − start` can round to just outside [0, T] at the segment edges;
    /// such overshoots are clamped so the edges keep the segment's own value.
    pub fn envelope_at(&self, t: f64) -> f64 {
        let slack = 1e-9 * self.envelope.duration;
        let mut local = t - self.start;
        if local >= -slack && local <= self.envelope.duration + slack {
            local = local.clamp(0.0, self.envelope.duration);
        }
        self.envelope.value(local)
    }

    /// Tone amplitudes (Ω₁, Ω₂) at absolute time `t`.
    pub fn tone_amplitudes(&self, t: f64) -> (f64, f64) {
        let omega = self.envelope_at(t);
        let (s, c) = (self.theta / 2.0).sin_cos();
        (omega * s, omega * c)
    }

    /// Ω₁cos(ω₁t − φ₁) + Ω₂cos(ω₂t − φ₂).
    pub fn drive(&self, t: f64) -> f64 {
        let (a1, a2) = self.tone_amplitudes(t);
        a1 * (self.omega1 * t - self.phi1).cos() + a2 * (self.omega2 * t - self.phi2).cos()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PulseSequence {
    pub segments: Vec<PulseSegment>,
    pub total_half_area: f64,
}

impl PulseSequence {
    /// Lays `segments` end to end starting at t = 0 (their `start` fields are overwritten).
    pub fn new(mut segments: Vec<PulseSegment>) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::InvalidParameter("a pulse sequence needs at least one segment".into()));
        }
        let mut t = 0.0;
        for s in &mut segments {
            s.start = t;
            t += s.envelope.duration;
        }
        let total_half_area = segments.iter().map(|s| s.half_area).sum();
        Ok(Self { segments, total_half_area })
    }

    pub fn duration(&self) -> f64 {
        self.segments.last().map_or(0.0, |s| s.end())
    }

    /// Segment boundaries, including 0 and the final time.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut b = vec![0.0];
        b.extend(self.segments.iter().map(|s| s.end()));
        b
    }

    /// Index of the segment owning `t`; a shared boundary belongs to the later segment.
    pub fn segment_index(&self, t: f64) -> Option<usize> {
        if t < 0.0 || t > self.duration() {
            return None;
        }
        let k = self.segments.partition_point(|s| s.end() <= t);
        Some(k.min(self.segments.len() - 1))
    }

    /// f(t) for 0 ≤ t ≤ duration.
    pub fn drive_value(&self, t: f64) -> Result<f64> {
        let k = self.segment_index(t).ok_or(Error::OutOfRange { t, duration: self.duration() })?;
        Ok(self.segments[k].drive(t))
    }

    /// f(t) using the segment that contains `anchor`.
    ///
    /// Integrators pass a point strictly inside the current step as `anchor`,
    /// which picks the correct side of a phase jump when `t` lies on a boundary.
    /// Returns zero outside the sequence.
    pub fn drive_value_near(&self, t: f64, anchor: f64) -> f64 {
        match self.segment_index(anchor) {
            Some(k) => self.segments[k].drive(t),
            None => 0.0,
        }
    }

    /// Envelope magnitude Ω(t) near `anchor`, as for [`Self::drive_value_near`].
    pub fn envelope_near(&self, t: f64, anchor: f64) -> f64 {
        match self.segment_index(anchor) {
            Some(k) => self.segments[k].envelope_at(t),
            None => 0.0,
        }
    }

    /// Largest carrier frequency among tones that carry amplitude.
    pub fn max_carrier(&self) -> f64 {
        self.segments
            .iter()
            .flat_map(|s| {
                let (sn, cs) = (s.theta / 2.0).sin_cos();
                [(sn, s.omega1), (cs, s.omega2)]
            })
            .filter(|(amp, _)| amp.abs() > 1e-15)
            .map(|(_, w)| w.abs())
            .fold(0.0, f64::max)
    }

    /// Plain-text table, one row per segment, tab-separated:
    /// kind, peak (MHz), duration (ns), θ, φ₁, φ₂ (rad), carrier 1 and 2 (GHz).
    /// Frequencies are quoted as ω/2π.
    pub fn to_table(&self) -> String {
        let mut out = String::from("kind\tpeak_mhz\tduration_ns\ttheta\tphi1\tphi2\tcarrier1_ghz\tcarrier2_ghz\n");
        for s in &self.segments {
            let _ = writeln!(
                out,
                "{}\t{:.9}\t{:.9}\t{:.12}\t{:.12}\t{:.12}\t{:.12}\t{:.12}",
                s.envelope.kind.label(),
                s.envelope.peak / (2.0 * PI) / 1e6,
                s.envelope.duration * 1e9,
                s.theta,
                s.phi1,
                s.phi2,
                s.omega1 / (2.0 * PI) / 1e9,
                s.omega2 / (2.0 * PI) / 1e9,
            );
        }
        out
    }
}

fn build(
    table: &[(f64, f64, f64)],
    kind: EnvelopeKind,
    peak: f64,
    theta: f64,
    omega1: f64,
    omega2: f64,
) -> Result<PulseSequence> {
    let segments = table
        .iter()
        .map(|&(half_area, phi1, phi2)| {
            Ok(PulseSegment {
                start: 0.0,
                envelope: Envelope::for_half_area(kind, peak, half_area)?,
                theta,
                phi1,
                phi2,
                omega1,
                omega2,
                half_area,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    PulseSequence::new(segments)
}

/// The six-segment dynamically corrected loop; tone 1 at ω_−, tone 2 at ω_+.
pub fn compile_single_qubit_dct(
    spec: &SingleQubitGateSpec,
    kind: EnvelopeKind,
    peak: f64,
    omega_minus: f64,
    omega_plus: f64,
) -> Result<PulseSequence> {
    let (g, p) = (spec.gamma, spec.phi);
    let table = [
        (PI / 4.0, p + PI, PI),
        (PI / 2.0, p + PI + PI / 2.0, PI + PI / 2.0),
        (PI / 4.0, p + PI, PI),
        (PI / 4.0, p + g, g),
        (PI / 2.0, p + g + PI / 2.0, g + PI / 2.0),
        (PI / 4.0, p + g, g),
    ];
    build(&table, kind, peak, spec.theta, omega_minus, omega_plus)
}

/// The plain two-segment loop realizing the same gate without correction.
pub fn compile_single_loop(
    spec: &SingleQubitGateSpec,
    kind: EnvelopeKind,
    peak: f64,
    omega_minus: f64,
    omega_plus: f64,
) -> Result<PulseSequence> {
    let (g, p) = (spec.gamma, spec.phi);
    let table = [(PI / 2.0, p + PI, PI), (PI / 2.0, p + g, g)];
    build(&table, kind, peak, spec.theta, omega_minus, omega_plus)
}

/// Complex matrix elements by which the coupler drive reaches the wanted
/// transitions: an effective rate `gain * J` for tone amplitude J.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToneGains {
    pub tone1: C64,
    pub tone2: C64,
}

impl ToneGains {
    pub const UNIT: Self = Self { tone1: C64::new(1.0, 0.0), tone2: C64::new(1.0, 0.0) };
}

/// The two-segment loop for the two-qubit gate; tone 1 at ω′_−, tone 2 at ω′_+.
///
/// The effective couplings have peak J_c = √(J₁² + J₂²) and ratio tan(ϑ/2).
/// The programmed tone amplitudes are divided by the gain magnitudes and
/// the phases shifted by the gain arguments, so each segment holds
/// ∫J_c dt = π in the effective couplings.
pub fn compile_two_qubit(
    spec: &TwoQubitGateSpec,
    kind: EnvelopeKind,
    j1: f64,
    j2: f64,
    omega1: f64,
    omega2: f64,
    gains: ToneGains,
) -> Result<PulseSequence> {
    let (m1, m2) = (gains.tone1.norm(), gains.tone2.norm());
    if !(m1 > 0.0 && m2 > 0.0) {
        return Err(Error::InvalidParameter("tone gains must be nonzero".into()));
    }
    if !(j1 >= 0.0 && j2 >= 0.0 && j1 + j2 > 0.0) {
        return Err(Error::InvalidParameter(format!("coupler amplitudes must be non-negative, got {j1}, {j2}")));
    }
    let j_peak = j1.hypot(j2);
    if (2.0 * j1.atan2(j2) - spec.vartheta).abs() > 1e-9 {
        log::warn!("J1/J2 = {j1:e}/{j2:e} disagrees with vartheta = {}; the amplitude ratio follows vartheta", spec.vartheta);
    }
    let (s, c) = (spec.vartheta / 2.0).sin_cos();
    // Raw amplitudes J·s/m1 and J·c/m2 expressed through a raw angle and peak.
    let (r1, r2) = (s / m1, c / m2);
    let raw_peak = j_peak * r1.hypot(r2);
    let raw_theta = 2.0 * r1.atan2(r2);
    let (a, p) = (spec.alpha, spec.phi);
    let (mu1, mu2) = (gains.tone1.arg(), gains.tone2.arg());
    let table = [(PI / 2.0, p - PI + mu1, PI + mu2), (PI / 2.0, p + a + mu1, a + mu2)];
    // Durations follow from the effective peak; the raw peak is what is programmed.
    let segments = table
        .iter()
        .map(|&(half_area, phi1, phi2)| {
            let eff = Envelope::for_half_area(kind, j_peak, half_area)?;
            Ok(PulseSegment {
                start: 0.0,
                envelope: Envelope::new(kind, raw_peak, eff.duration)?,
                theta: raw_theta,
                phi1,
                phi2,
                omega1,
                omega2,
                half_area,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    PulseSequence::new(segments)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    const W_MINUS: f64 = 2.0 * PI * 7.6e9;
    const W_PLUS: f64 = 2.0 * PI * 8.4e9;
    const PEAK: f64 = 2.0 * PI * 20e6;

    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    }

    #[test]
    fn dct_phase_table_is_literal() {
        let spec = SingleQubitGateSpec { gamma: 0.9, theta: 0.7, phi: 0.3 };
        let seq = compile_single_qubit_dct(&spec, EnvelopeKind::Square, PEAK, W_MINUS, W_PLUS).unwrap();
        let (g, p) = (0.9, 0.3);
        let expected = [
            (p + PI, PI),
            (p + PI + PI / 2.0, PI + PI / 2.0),
            (p + PI, PI),
            (p + g, g),
            (p + g + PI / 2.0, g + PI / 2.0),
            (p + g, g),
        ];
        let got: Vec<(f64, f64)> = seq.segments.iter().map(|s| (s.phi1, s.phi2)).collect();
        assert_eq!(got, expected);
        let areas: Vec<f64> = seq.segments.iter().map(|s| s.half_area).collect();
        assert_eq!(areas, vec![PI / 4.0, PI / 2.0, PI / 4.0, PI / 4.0, PI / 2.0, PI / 4.0]);
        assert_relative_eq!(seq.total_half_area, 2.0 * PI);
        assert!(seq.segments.iter().all(|s| s.theta == 0.7 && s.omega1 == W_MINUS && s.omega2 == W_PLUS));
    }

    #[test]
    fn square_durations() {
        let seq = compile_single_qubit_dct(&SingleQubitGateSpec::NOT, EnvelopeKind::Square, PEAK, W_MINUS, W_PLUS).unwrap();
        let d: Vec<f64> = seq.segments.iter().map(|s| s.envelope.duration).collect();
        let q = PI / (2.0 * PEAK);
        for (got, want) in d.iter().zip([q, 2.0 * q, q, q, 2.0 * q, q]) {
            assert_relative_eq!(*got, want, max_relative = 1e-15);
        }
        assert_relative_eq!(seq.duration(), 100e-9, max_relative = 1e-12);

        let sl = compile_single_loop(&SingleQubitGateSpec::NOT, EnvelopeKind::Square, PEAK, W_MINUS, W_PLUS).unwrap();
        assert_relative_eq!(sl.duration(), 2.0 * PI / PEAK, max_relative = 1e-12);
        assert_relative_eq!(sl.duration(), seq.duration() / 2.0, max_relative = 1e-12);
        let phases: Vec<(f64, f64)> = sl.segments.iter().map(|s| (s.phi1, s.phi2)).collect();
        assert_eq!(phases, vec![(PI, PI), (PI, PI)]);
    }

    #[test]
    fn area_quadrature_per_segment() {
        for kind in [EnvelopeKind::Square, EnvelopeKind::Sin2] {
            let spec = SingleQubitGateSpec::HADAMARD;
            let seq = compile_single_qubit_dct(&spec, kind, PEAK, W_MINUS, W_PLUS).unwrap();
            for s in &seq.segments {
                let half = simpson(|t| s.envelope.value(t) / 2.0, 0.0, s.envelope.duration, 2000);
                assert!((half - s.half_area).abs() < 1e-9, "{kind:?}: {half} vs {}", s.half_area);
                assert_relative_eq!(s.envelope.area() / 2.0, s.half_area, max_relative = 1e-14);
            }
        }
        let sin2 = compile_single_qubit_dct(&SingleQubitGateSpec::NOT, EnvelopeKind::Sin2, PEAK, W_MINUS, W_PLUS).unwrap();
        assert_relative_eq!(sin2.duration(), 200e-9, max_relative = 1e-12);
    }

    #[test]
    fn drive_examples() {
        // Only tone 1 (θ = π), square, φ₁ = 0: f(0) = Ω₀.
        let seg = PulseSegment {
            start: 0.0,
            envelope: Envelope::new(EnvelopeKind::Square, PEAK, 1e-8).unwrap(),
            theta: PI,
            phi1: 0.0,
            phi2: 0.4,
            omega1: W_MINUS,
            omega2: W_PLUS,
            half_area: PEAK * 1e-8 / 2.0,
        };
        let seq = PulseSequence::new(vec![seg]).unwrap();
        assert_relative_eq!(seq.drive_value(0.0).unwrap(), PEAK, max_relative = 1e-15);
        assert!(matches!(seq.drive_value(2e-8), Err(Error::OutOfRange { .. })));
        assert!(seq.drive_value(-1e-12).is_err());

        let half = PulseSegment { theta: PI / 2.0, ..seg };
        let (a1, a2) = half.tone_amplitudes(3e-9);
        assert_relative_eq!(a1, a2, max_relative = 1e-15);
        assert_relative_eq!(a1, PEAK / 2f64.sqrt(), max_relative = 1e-15);

        let env = Envelope::new(EnvelopeKind::Sin2, PEAK, 4e-8).unwrap();
        assert_relative_eq!(env.value(2e-8), PEAK, max_relative = 1e-15);
        assert_eq!(env.value(5e-8), 0.0);
        assert!(Envelope::new(EnvelopeKind::Sin2, -1.0, 1.0).is_err());
    }

    #[test]
    fn carrier_phase_uses_absolute_time() {
        let spec = SingleQubitGateSpec::NOT;
        let seq = compile_single_loop(&spec, EnvelopeKind::Square, PEAK, W_MINUS, W_PLUS).unwrap();
        let t = seq.segments[1].start + 1.3e-9;
        let s = &seq.segments[1];
        let (a1, a2) = s.tone_amplitudes(t);
        let expect = a1 * (W_MINUS * t - s.phi1).cos() + a2 * (W_PLUS * t - s.phi2).cos();
        assert_abs_diff_eq!(seq.drive_value(t).unwrap(), expect, epsilon = 1e-6 * PEAK);
    }

    #[test]
    fn segment_edges_keep_the_envelope() {
        let env = Envelope::new(EnvelopeKind::Square, PEAK, 2.4999999999999996e-8).unwrap();
        // A start time where (start + T) − start rounds above T.
        let start = (1..10_000)
            .map(|k| k as f64 * 1.1e-9)
            .find(|&s| (s + env.duration) - s > env.duration)
            .expect("some start overshoots");
        let seg = PulseSegment { start, envelope: env, theta: 1.0, phi1: 0.0, phi2: 0.0, omega1: 1.0, omega2: 1.0, half_area: 1.0 };
        assert_eq!(seg.envelope_at(seg.start), PEAK);
        assert_eq!(seg.envelope_at(seg.end()), PEAK);
        assert_eq!(seg.envelope_at(seg.end() + 1e-12), 0.0);
        assert_eq!(seg.envelope_at(seg.start - 1e-12), 0.0);
    }

    #[test]
    fn boundary_belongs_to_later_segment_unless_anchored() {
        let spec = SingleQubitGateSpec { gamma: 1.0, theta: PI / 2.0, phi: 0.0 };
        let seq = compile_single_loop(&spec, EnvelopeKind::Square, PEAK, W_MINUS, W_PLUS).unwrap();
        let b = seq.segments[0].end();
        assert_eq!(seq.segment_index(b), Some(1));
        assert_eq!(seq.segment_index(seq.duration()), Some(1));
        let early = seq.drive_value_near(b, b - 1e-12);
        assert_eq!(early, seq.segments[0].drive(b));
        assert_eq!(seq.drive_value(b).unwrap(), seq.segments[1].drive(b));
        assert_eq!(seq.breakpoints().len(), 3);
    }

    #[test]
    fn two_qubit_table_and_durations() {
        let spec = TwoQubitGateSpec::CNOT;
        let j = 2.0 * PI * 5e6;
        let jc = j * 2f64.sqrt();
        let seq = compile_two_qubit(&spec, EnvelopeKind::Square, j, j, 2.0 * PI * 3e9, 2.0 * PI * 2.7e9, ToneGains::UNIT).unwrap();
        let phases: Vec<(f64, f64)> = seq.segments.iter().map(|s| (s.phi1, s.phi2)).collect();
        assert_eq!(phases, vec![(-PI, PI), (PI, PI)]);
        // ∫J_c dt = π per segment gives T = π/J_c.
        for s in &seq.segments {
            assert_relative_eq!(s.envelope.duration, PI / jc, max_relative = 1e-14);
            let (a1, a2) = s.tone_amplitudes(s.start + 1e-9);
            assert_relative_eq!(a1, j, max_relative = 1e-14);
            assert_relative_eq!(a2, j, max_relative = 1e-14);
        }
        assert_relative_eq!(seq.duration() * 1e9, 141.42135623730948, max_relative = 1e-12);

        // Gains rescale the programmed amplitudes but keep the effective area.
        let gains = ToneGains { tone1: C64::from_polar(0.5, 0.2), tone2: C64::from_polar(2.0, -0.1) };
        let g = compile_two_qubit(&spec, EnvelopeKind::Square, j, j, 1.0e10, 1.1e10, gains).unwrap();
        let s = &g.segments[0];
        let (a1, a2) = s.tone_amplitudes(s.start);
        assert_relative_eq!(a1 * 0.5, j, max_relative = 1e-12);
        assert_relative_eq!(a2 * 2.0, j, max_relative = 1e-12);
        assert_relative_eq!(s.phi1, -PI + 0.2, max_relative = 1e-15);
        assert_relative_eq!(s.phi2, PI - 0.1, max_relative = 1e-15);
        assert_relative_eq!(s.envelope.duration, PI / jc, max_relative = 1e-14);
    }

    #[test]
    fn table_format() {
        let seq = compile_single_loop(&SingleQubitGateSpec::NOT, EnvelopeKind::Square, PEAK, W_MINUS, W_PLUS).unwrap();
        let table = seq.to_table();
        let lines: Vec<&str> = table.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0], "kind\tpeak_mhz\tduration_ns\ttheta\tphi1\tphi2\tcarrier1_ghz\tcarrier2_ghz");
        assert!(lines[1].starts_with("square\t20.000000000\t25.000000000\t1.570796326795\t3.141592653590\t3.141592653590\t7.6"));
        assert_eq!(seq.max_carrier(), W_PLUS);
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(32))]

        #[test]
        fn every_segment_carries_its_area(gamma in 0.05f64..(2.0 * PI), theta in 0.0f64..PI, phi in 0.0f64..(2.0 * PI), sin2 in proptest::bool::ANY) {
            let kind = if sin2 { EnvelopeKind::Sin2 } else { EnvelopeKind::Square };
            let spec = SingleQubitGateSpec { gamma, theta, phi };
            for seq in [
                compile_single_qubit_dct(&spec, kind, PEAK, W_MINUS, W_PLUS).unwrap(),
                compile_single_loop(&spec, kind, PEAK, W_MINUS, W_PLUS).unwrap(),
            ] {
                for s in &seq.segments {
                    let half = simpson(|t| s.envelope.value(t) / 2.0, 0.0, s.envelope.duration, 2000);
                    proptest::prop_assert!((half - s.half_area).abs() < 1e-9, "{half} vs {}", s.half_area);
                }
                let ends = seq.breakpoints();
                proptest::prop_assert!(ends.windows(2).all(|w| w[1] > w[0]));
            }
        }
    }
}
