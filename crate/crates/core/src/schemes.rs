//! The four phase-control schemes for imprinting `e^{i theta}` on `|g>`.
//!
//! All builders invert the closing condition exactly; the large-detuning
//! approximations only appear in [`far_detuned_estimates`].

use std::f64::consts::PI;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::angle_distance;
use crate::parallel::{self, Execution};
use crate::propagator::{
    integrated_excited_population, propagate_schedule, ControlSegment, IntegratorConfig, PulseSchedule,
};
use crate::state::{BasisLabel, StateVector, Trajectory};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeKind {
    ResonantTwoPulse,
    OffResonant,
    FarOffResonant,
    CaptureRelease,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 4] = [
        SchemeKind::ResonantTwoPulse,
        SchemeKind::OffResonant,
        SchemeKind::FarOffResonant,
        SchemeKind::CaptureRelease,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SchemeKind::ResonantTwoPulse => "resonant_two_pulse",
            SchemeKind::OffResonant => "off_resonant",
            SchemeKind::FarOffResonant => "far_off_resonant",
            SchemeKind::CaptureRelease => "capture_release",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        SchemeKind::ALL.into_iter().find(|k| k.as_str() == s)
    }
}

/// A fully parameterized scheme.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SchemeSpec {
    ResonantTwoPulse { theta: f64, omega: f64 },
    OffResonant { theta: f64, omega: f64 },
    FarOffResonant { theta: f64, omega: f64, loops: u32 },
    CaptureRelease { theta: f64, omega: f64, cone_detuning: f64 },
}

/// Closed-form parameters and metrics of a scheme.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchemeDesign {
    pub duration: f64,
    pub integrated_excited_pop: f64,
    /// Largest detuning applied at any time.
    pub max_detuning: f64,
    /// Detuning while the state is locked (capture-release only).
    pub lock_detuning: Option<f64>,
    pub lock_time: Option<f64>,
    /// Geometric and dynamic parts in the frame of the rotating-frame Hamiltonian.
    pub theta_geo: f64,
    pub theta_dyn: f64,
}

fn check_omega(omega: f64) -> Result<()> {
    if !(omega > 0.0 && omega.is_finite()) {
        return Err(Error::Domain(format!("Rabi frequency must be > 0, got {omega}")));
    }
    Ok(())
}

fn check_theta(theta: f64) -> Result<()> {
    if !theta.is_finite() {
        return Err(Error::Domain("target phase must be finite".into()));
    }
    Ok(())
}

/// Detuning for which one cone loop at Rabi frequency `omega` returns to
/// `|g>` with phase `loop_phase`, i.e. the positive root of
/// `loop_phase = pi (1 - Delta / Omega_R)`.
pub fn loop_detuning(loop_phase: f64, omega: f64) -> Result<f64> {
    check_omega(omega)?;
    let k = 1.0 - loop_phase / PI;
    if !(k > 0.0 && k < 1.0) {
        return Err(Error::Unreachable(format!(
            "loop phase {loop_phase} outside (0, pi) has no positive-detuning solution"
        )));
    }
    Ok(omega * k / (1.0 - k * k).sqrt())
}

/// Phase imprinted by one closed cone loop at detuning `detuning`.
pub fn loop_phase(detuning: f64, omega: f64) -> f64 {
    PI * (1.0 - detuning / omega.hypot(detuning))
}

pub fn build_resonant_two_pulse(theta: f64, omega: f64) -> Result<PulseSchedule> {
    check_theta(theta)?;
    check_omega(omega)?;
    let t = PI / omega;
    PulseSchedule::new(vec![
        ControlSegment::constant(omega, 0.0, 0.0, t)?,
        ControlSegment::constant(omega, PI - theta, 0.0, t)?,
    ])
}

pub fn build_off_resonant(theta: f64, omega: f64) -> Result<PulseSchedule> {
    check_theta(theta)?;
    if theta >= PI {
        return Err(Error::Unreachable(format!(
            "theta = {theta} >= pi needs the negative-detuning branch or another scheme"
        )));
    }
    build_far_off_resonant(theta, omega, 1)
}

pub fn build_far_off_resonant(theta: f64, omega: f64, loops: u32) -> Result<PulseSchedule> {
    check_theta(theta)?;
    check_omega(omega)?;
    if loops == 0 {
        return Err(Error::Domain("loop count must be >= 1".into()));
    }
    let n = loops as f64;
    let detuning = loop_detuning(theta / n, omega)?;
    let rabi = omega.hypot(detuning);
    PulseSchedule::new(vec![ControlSegment::constant(
        omega,
        0.0,
        detuning,
        n * 2.0 * PI / rabi,
    )?])
}

/// Lock detuning `Delta_l = (Delta_c^2 - Omega^2) / (2 Delta_c)`, the root of
/// `Delta_c = Delta_l + sqrt(Omega^2 + Delta_l^2)`.
pub fn lock_detuning(cone_detuning: f64, omega: f64) -> f64 {
    (cone_detuning * cone_detuning - omega * omega) / (2.0 * cone_detuning)
}

pub fn build_capture_release(theta: f64, omega: f64, cone_detuning: f64) -> Result<PulseSchedule> {
    let design = capture_release_design(theta, omega, cone_detuning)?;
    let cone_rabi = omega.hypot(cone_detuning);
    let half = PI / cone_rabi;
    let lock_time = design.lock_time.unwrap_or(0.0);
    if lock_time <= 0.0 {
        return PulseSchedule::new(vec![ControlSegment::constant(omega, 0.0, cone_detuning, 2.0 * half)?]);
    }
    PulseSchedule::new(vec![
        ControlSegment::constant(omega, 0.0, cone_detuning, half)?,
        ControlSegment::constant(omega, 0.0, design.lock_detuning.unwrap(), lock_time)?,
        ControlSegment::constant(omega, 0.0, cone_detuning, half)?,
    ])
}

fn capture_release_design(theta: f64, omega: f64, cone_detuning: f64) -> Result<SchemeDesign> {
    check_theta(theta)?;
    check_omega(omega)?;
    if !(cone_detuning > omega) {
        return Err(Error::Domain(format!(
            "cone detuning {cone_detuning} must exceed the Rabi frequency {omega}"
        )));
    }
    let cone_rabi = omega.hypot(cone_detuning);
    let lock = lock_detuning(cone_detuning, omega);
    let lock_rabi = omega.hypot(lock);
    let geo = loop_phase(cone_detuning, omega);
    let dyn_part = theta - geo;
    if dyn_part < -1e-12 {
        return Err(Error::Unreachable(format!(
            "theta = {theta} is below the geometric part {geo} of one cone"
        )));
    }
    let dyn_part = dyn_part.max(0.0);
    let lock_time = 2.0 * dyn_part / (lock_rabi - lock);
    let locked_excited = 1.0 - (cone_detuning / cone_rabi).powi(2);
    Ok(SchemeDesign {
        duration: 2.0 * PI / cone_rabi + lock_time,
        integrated_excited_pop: PI * omega * omega / cone_rabi.powi(3) + locked_excited * lock_time,
        max_detuning: cone_detuning,
        lock_detuning: Some(lock),
        lock_time: Some(lock_time),
        theta_geo: geo,
        theta_dyn: dyn_part,
    })
}

/// Large-detuning estimates `(duration, integrated population)` for the
/// far-detuned schemes: `4 Delta theta / Omega^2` (or half of it for
/// capture-release) and `2 theta / Delta`.
pub fn far_detuned_estimates(kind: SchemeKind, theta: f64, omega: f64, detuning: f64) -> Option<(f64, f64)> {
    let pop = 2.0 * theta / detuning;
    match kind {
        SchemeKind::FarOffResonant => Some((4.0 * detuning * theta / (omega * omega), pop)),
        SchemeKind::CaptureRelease => Some((2.0 * detuning * theta / (omega * omega), pop)),
        _ => None,
    }
}

impl SchemeSpec {
    pub fn kind(&self) -> SchemeKind {
        match self {
            SchemeSpec::ResonantTwoPulse { .. } => SchemeKind::ResonantTwoPulse,
            SchemeSpec::OffResonant { .. } => SchemeKind::OffResonant,
            SchemeSpec::FarOffResonant { .. } => SchemeKind::FarOffResonant,
            SchemeSpec::CaptureRelease { .. } => SchemeKind::CaptureRelease,
        }
    }

    pub fn theta(&self) -> f64 {
        match *self {
            SchemeSpec::ResonantTwoPulse { theta, .. }
            | SchemeSpec::OffResonant { theta, .. }
            | SchemeSpec::FarOffResonant { theta, .. }
            | SchemeSpec::CaptureRelease { theta, .. } => theta,
        }
    }

    pub fn omega(&self) -> f64 {
        match *self {
            SchemeSpec::ResonantTwoPulse { omega, .. }
            | SchemeSpec::OffResonant { omega, .. }
            | SchemeSpec::FarOffResonant { omega, .. }
            | SchemeSpec::CaptureRelease { omega, .. } => omega,
        }
    }

    pub fn build(&self) -> Result<PulseSchedule> {
        match *self {
            SchemeSpec::ResonantTwoPulse { theta, omega } => build_resonant_two_pulse(theta, omega),
            SchemeSpec::OffResonant { theta, omega } => build_off_resonant(theta, omega),
            SchemeSpec::FarOffResonant { theta, omega, loops } => build_far_off_resonant(theta, omega, loops),
            SchemeSpec::CaptureRelease {
                theta,
                omega,
                cone_detuning,
            } => build_capture_release(theta, omega, cone_detuning),
        }
    }

    pub fn design(&self) -> Result<SchemeDesign> {
        match *self {
            SchemeSpec::ResonantTwoPulse { theta, omega } => {
                check_theta(theta)?;
                check_omega(omega)?;
                Ok(SchemeDesign {
                    duration: 2.0 * PI / omega,
                    integrated_excited_pop: PI / omega,
                    max_detuning: 0.0,
                    lock_detuning: None,
                    lock_time: None,
                    theta_geo: theta,
                    theta_dyn: 0.0,
                })
            }
            SchemeSpec::OffResonant { theta, omega } => {
                if theta >= PI {
                    return Err(Error::Unreachable(format!("theta = {theta} >= pi")));
                }
                SchemeSpec::FarOffResonant { theta, omega, loops: 1 }.design()
            }
            SchemeSpec::FarOffResonant { theta, omega, loops } => {
                if loops == 0 {
                    return Err(Error::Domain("loop count must be >= 1".into()));
                }
                let n = loops as f64;
                let detuning = loop_detuning(theta / n, omega)?;
                let rabi = omega.hypot(detuning);
                Ok(SchemeDesign {
                    duration: n * 2.0 * PI / rabi,
                    integrated_excited_pop: n * PI * omega * omega / rabi.powi(3),
                    max_detuning: detuning,
                    lock_detuning: None,
                    lock_time: None,
                    theta_geo: theta,
                    theta_dyn: 0.0,
                })
            }
            SchemeSpec::CaptureRelease {
                theta,
                omega,
                cone_detuning,
            } => capture_release_design(theta, omega, cone_detuning),
        }
    }
}

/// Simulated figures of merit for one scheme at one target phase.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchemeMetrics {
    pub scheme: SchemeKind,
    pub theta: f64,
    pub duration: f64,
    pub integrated_pop: f64,
    pub max_detuning: f64,
    /// Final `arg c_g`, reported in `[0, 2 pi)`.
    pub theta_achieved: f64,
    pub lock_detuning: Option<f64>,
    pub integrated_pop_closed_form: f64,
    pub final_excited_pop: f64,
}

impl SchemeMetrics {
    /// Distance between achieved and target phase on the circle.
    pub fn phase_error(&self) -> f64 {
        angle_distance(self.theta_achieved, self.theta)
    }
}

#[derive(Clone, Debug)]
pub struct SchemeRun {
    pub spec: SchemeSpec,
    pub design: SchemeDesign,
    pub schedule: PulseSchedule,
    pub trajectory: Trajectory,
    pub metrics: SchemeMetrics,
}

/// Build, simulate from `|g>` and measure a scheme.
pub fn run_scheme(spec: &SchemeSpec, cfg: &IntegratorConfig) -> Result<SchemeRun> {
    let design = spec.design()?;
    let schedule = spec.build()?;
    let trajectory = propagate_schedule(&schedule, &StateVector::ground(), cfg)?;
    let last = trajectory.last();
    let cg = last.amplitude(BasisLabel::G)?;
    let metrics = SchemeMetrics {
        scheme: spec.kind(),
        theta: spec.theta(),
        duration: schedule.total_duration(),
        integrated_pop: integrated_excited_population(&trajectory)?,
        max_detuning: schedule.max_abs_detuning(),
        theta_achieved: cg.arg().rem_euclid(2.0 * PI),
        lock_detuning: design.lock_detuning,
        integrated_pop_closed_form: design.integrated_excited_pop,
        final_excited_pop: last.amplitude(BasisLabel::E)?.norm_sqr(),
    };
    Ok(SchemeRun {
        spec: *spec,
        design,
        schedule,
        trajectory,
        metrics,
    })
}

/// Parameters shared by a scheme comparison sweep.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonSetup {
    pub omega: f64,
    /// Loops of the far-off-resonant scheme.
    pub loops: u32,
}

impl Default for ComparisonSetup {
    fn default() -> Self {
        ComparisonSetup { omega: 1.0, loops: 20 }
    }
}

/// The four specs compared at one target phase. Capture-release reuses
/// the far-off-resonant detuning as its cone detuning.
pub fn comparison_specs(theta: f64, setup: &ComparisonSetup) -> Result<[SchemeSpec; 4]> {
    let cone_detuning = loop_detuning(theta / setup.loops as f64, setup.omega)?;
    Ok([
        SchemeSpec::ResonantTwoPulse {
            theta,
            omega: setup.omega,
        },
        SchemeSpec::OffResonant {
            theta,
            omega: setup.omega,
        },
        SchemeSpec::FarOffResonant {
            theta,
            omega: setup.omega,
            loops: setup.loops,
        },
        SchemeSpec::CaptureRelease {
            theta,
            omega: setup.omega,
            cone_detuning,
        },
    ])
}

/// Simulate all four schemes on a grid of target phases. Rows are ordered
/// by phase, then by [`SchemeKind::ALL`].
pub fn compare_schemes(
    thetas: &[f64],
    setup: &ComparisonSetup,
    cfg: &IntegratorConfig,
    exec: Execution,
) -> Result<Vec<SchemeMetrics>> {
    let mut specs = Vec::with_capacity(4 * thetas.len());
    for &theta in thetas {
        specs.extend(comparison_specs(theta, setup)?);
    }
    parallel::try_map(exec, &specs, |spec| run_scheme(spec, cfg).map(|run| run.metrics))
}

pub fn write_metrics_csv<W: Write>(rows: &[SchemeMetrics], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_metrics_csv<R: Read>(input: R) -> Result<Vec<SchemeMetrics>> {
    let mut r = csv::Reader::from_reader(input);
    let mut rows = Vec::new();
    for row in r.deserialize() {
        rows.push(row?);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::propagator::propagate_constant;

    fn cfg() -> IntegratorConfig {
        IntegratorConfig::default()
    }

    #[test]
    fn resonant_half_pi() {
        let run = run_scheme(
            &SchemeSpec::ResonantTwoPulse {
                theta: PI / 2.0,
                omega: 1.0,
            },
            &cfg(),
        )
        .unwrap();
        assert!((run.metrics.duration - 2.0 * PI).abs() < 1e-12);
        assert!(run.metrics.phase_error() < 1e-7);
        assert_eq!(run.metrics.max_detuning, 0.0);
    }

    #[test]
    fn resonant_pi_is_a_two_pi_pulse() {
        let s = build_resonant_two_pulse(PI, 1.0).unwrap();
        assert_eq!(s.segments()[1].phase, 0.0);
        let run = run_scheme(&SchemeSpec::ResonantTwoPulse { theta: PI, omega: 1.0 }, &cfg()).unwrap();
        let direct = propagate_constant(0.0, 1.0, 0.0, 2.0 * PI, &StateVector::ground()).unwrap();
        let cg = run.trajectory.last().amplitude(BasisLabel::G).unwrap();
        assert!((cg - direct.amplitude(BasisLabel::G).unwrap()).norm() < 1e-7);
        assert!((cg.re + 1.0).abs() < 1e-7);
    }

    #[test]
    fn resonant_small_theta_limit() {
        let run = run_scheme(
            &SchemeSpec::ResonantTwoPulse {
                theta: 1e-7,
                omega: 1.0,
            },
            &cfg(),
        )
        .unwrap();
        assert!(run.metrics.phase_error() < 1e-6);
    }

    #[test]
    fn off_resonant_half_pi_parameters() {
        let s = build_off_resonant(PI / 2.0, 1.0).unwrap();
        let seg = &s.segments()[0];
        assert!((seg.detuning_at(0.0) - 1.0 / 3f64.sqrt()).abs() < 1e-12);
        assert!((s.total_duration() - 2.0 * PI * 3f64.sqrt() / 2.0).abs() < 1e-12);
        let run = run_scheme(
            &SchemeSpec::OffResonant {
                theta: PI / 2.0,
                omega: 1.0,
            },
            &cfg(),
        )
        .unwrap();
        assert!(run.metrics.phase_error() < 1e-6);
        let expect = PI * (3f64.sqrt() / 2.0).powi(3);
        assert!((run.metrics.integrated_pop / expect - 1.0).abs() < 0.01);
    }

    #[test]
    fn off_resonant_rejects_theta_at_or_above_pi() {
        assert!(matches!(build_off_resonant(PI, 1.0), Err(Error::Unreachable(_))));
        assert!(matches!(build_off_resonant(4.0, 1.0), Err(Error::Unreachable(_))));
    }

    #[test]
    fn off_resonant_near_pi_becomes_resonant() {
        let s = build_off_resonant(PI - 1e-9, 1.0).unwrap();
        assert!(s.segments()[0].detuning_at(0.0) < 1e-8);
        assert!((s.total_duration() - 2.0 * PI).abs() < 1e-7);
    }

    #[test]
    fn one_loop_far_off_equals_off_resonant() {
        assert_eq!(
            build_far_off_resonant(1.0, 1.3, 1).unwrap(),
            build_off_resonant(1.0, 1.3).unwrap()
        );
        assert!(matches!(
            build_far_off_resonant(6.0, 1.0, 1),
            Err(Error::Unreachable(_))
        ));
        assert!(build_far_off_resonant(1.0, 1.0, 0).is_err());
    }

    #[test]
    fn far_off_resonant_five_loops() {
        let spec = SchemeSpec::FarOffResonant {
            theta: PI / 2.0,
            omega: 1.0,
            loops: 5,
        };
        let run = run_scheme(&spec, &cfg()).unwrap();
        assert!(run.metrics.phase_error() < 1e-6);
        assert!(run.metrics.final_excited_pop < 1e-8);
    }

    #[test]
    fn capture_release_split() {
        let cone = loop_detuning(PI / 10.0, 1.0).unwrap();
        let spec = SchemeSpec::CaptureRelease {
            theta: PI / 2.0,
            omega: 1.0,
            cone_detuning: cone,
        };
        let d = spec.design().unwrap();
        assert!((d.theta_geo - PI / 10.0).abs() < 1e-12);
        assert!((d.theta_dyn - 4.0 * PI / 10.0).abs() < 1e-12);
        let run = run_scheme(&spec, &cfg()).unwrap();
        assert!(run.metrics.phase_error() < 1e-6);
        assert_eq!(run.schedule.segments().len(), 3);
        // Delta_c = Delta_l + Omega_R^l
        let lock = d.lock_detuning.unwrap();
        assert!((lock + 1f64.hypot(lock) - cone).abs() < 1e-12);
    }

    #[test]
    fn capture_release_without_lock_is_one_cone() {
        let cone = 2.5;
        let geo = loop_phase(cone, 1.0);
        let s = build_capture_release(geo, 1.0, cone).unwrap();
        let reference = build_off_resonant(geo, 1.0).unwrap();
        assert_eq!(s.segments().len(), 1);
        assert!((s.total_duration() - reference.total_duration()).abs() < 1e-12);
        assert!((s.segments()[0].detuning_at(0.0) - reference.segments()[0].detuning_at(0.0)).abs() < 1e-12);
    }

    #[test]
    fn capture_release_errors() {
        assert!(matches!(
            build_capture_release(PI / 2.0, 1.0, 0.9),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            build_capture_release(0.01, 1.0, 2.0),
            Err(Error::Unreachable(_))
        ));
    }

    #[test]
    fn lock_state_is_stationary() {
        let cone = loop_detuning(PI / 10.0, 1.0).unwrap();
        let run = run_scheme(
            &SchemeSpec::CaptureRelease {
                theta: PI / 2.0,
                omega: 1.0,
                cone_detuning: cone,
            },
            &cfg(),
        )
        .unwrap();
        let bloch = run.trajectory.bloch_path().unwrap();
        let pieces = run.trajectory.pieces();
        let (first, last) = pieces[1];
        let times = run.trajectory.times();
        for k in first..last {
            let dr = (0..3)
                .map(|i| (bloch[k + 1].to_array()[i] - bloch[k].to_array()[i]).powi(2))
                .sum::<f64>()
                .sqrt();
            assert!(dr / (times[k + 1] - times[k]) < 1e-6);
        }
    }

    #[test]
    fn off_resonant_detuning_decreases_with_theta() {
        let grid: Vec<f64> = (1..40).map(|k| k as f64 * PI / 40.0).collect();
        let ds: Vec<f64> = grid.iter().map(|&t| loop_detuning(t, 1.0).unwrap()).collect();
        assert!(ds.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn comparison_rows_and_csv_round_trip() {
        let rows = compare_schemes(
            &[0.2 * PI, 0.6 * PI],
            &ComparisonSetup::default(),
            &cfg(),
            Execution::Parallel,
        )
        .unwrap();
        assert_eq!(rows.len(), 8);
        assert!(rows
            .iter()
            .filter(|r| r.scheme == SchemeKind::ResonantTwoPulse)
            .all(|r| r.max_detuning == 0.0));
        let mut buf = Vec::new();
        write_metrics_csv(&rows, &mut buf).unwrap();
        let header = String::from_utf8_lossy(&buf).lines().next().unwrap().to_string();
        assert!(header.starts_with("scheme,theta,duration,integrated_pop,max_detuning,theta_achieved"));
        assert_eq!(read_metrics_csv(buf.as_slice()).unwrap(), rows);
    }
}
