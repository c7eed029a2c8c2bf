//! Lambda and tripod systems reduced to effective two-level dynamics.
//!
//! The populated excited-ancilla superposition `|p(t)> = cos s |e> + sin s |a>`
//! plays the role of `|e>`; the orthogonal `|u(t)>` stays empty when the
//! drives are synthesized from `s(t)` as below.

mod shaping;
mod tripod;

pub use shaping::{Shaping, PRESET_NAMES};
pub use tripod::{
    bright_dark, decompose_gate, gate_target, tripod_gate, GateParameters, TripodControls, TripodDrive, TripodGate,
    TRIPOD_BASIS,
};

use std::f64::consts::PI;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, CVector, C64, I};
use crate::parallel::{self, Execution};
use crate::propagator::{evolve, ConstantDrive, Drive, IntegratorConfig, Piece, PulseSchedule};
use crate::state::{BasisLabel, StateVector, Trajectory};

/// Basis order of the lambda Hamiltonian.
pub const LAMBDA_BASIS: [BasisLabel; 3] = [BasisLabel::E, BasisLabel::G, BasisLabel::A];

/// `(|p>, |u>)` over `{e, a}` for mixing angle `s`.
pub fn p_u_basis(s: f64) -> (StateVector, StateVector) {
    let basis = vec![BasisLabel::E, BasisLabel::A];
    let (sn, cs) = s.sin_cos();
    let p = StateVector::new(basis.clone(), vec![C64::new(cs, 0.0), C64::new(sn, 0.0)]).unwrap();
    let u = StateVector::new(basis, vec![C64::new(-sn, 0.0), C64::new(cs, 0.0)]).unwrap();
    (p, u)
}

/// Closed-form `(c_p, c_g)` of the reduced two-level problem with
/// `Delta = alpha Omega` after pulse area `lambda`.
pub fn reduced_two_level_amplitudes(alpha: f64, lambda: f64) -> (C64, C64) {
    let beta = alpha.hypot(1.0);
    let x = beta * lambda / 2.0;
    let envelope = C64::from_polar(1.0, -alpha * lambda / 2.0);
    let cp = -I / beta * x.sin() * envelope;
    let cg = C64::new(x.cos(), alpha / beta * x.sin()) * envelope;
    (cp, cg)
}

/// Ratio `alpha = Delta / Omega` for which one closed cycle imprints `theta`
/// on `|g>`.
pub fn alpha_for_phase(theta: f64) -> Result<f64> {
    let k = 1.0 - theta / PI;
    if !(k.abs() < 1.0) {
        return Err(Error::Unreachable(format!(
            "phase {theta} outside (0, 2 pi) cannot be reached in one cycle"
        )));
    }
    Ok(k / (1.0 - k * k).sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum SynthesisMode {
    /// Requires `s` to vanish at both ends; any divergence is an error.
    Exact,
    /// Clip drive magnitudes at `cap_factor * Omega`, keeping their phase.
    Capped { cap_factor: f64 },
}

impl SynthesisMode {
    pub const DEFAULT_CAP_FACTOR: f64 = 20.0;

    pub fn capped() -> Self {
        SynthesisMode::Capped {
            cap_factor: Self::DEFAULT_CAP_FACTOR,
        }
    }
}

/// Drive fields at one instant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ControlSample {
    pub time: f64,
    pub omega_ge: C64,
    pub omega_ae: C64,
    pub s: f64,
    pub s_dot: f64,
    pub lambda: f64,
    pub capped: bool,
}

/// Sources of the two excited-state couplings in the first row of the
/// lambda/tripod Hamiltonian: one from the (bright) ground state, one from
/// `|a>`.
pub trait CouplingSource: Sync {
    fn coupling_pieces(&self) -> Vec<Piece>;

    fn couplings(&self, index: usize, t: f64) -> (C64, C64);
}

/// A two-level schedule seen from the atomic frame: the detuning becomes a
/// running phase of the coupling and there is no ancilla drive.
impl CouplingSource for PulseSchedule {
    fn coupling_pieces(&self) -> Vec<Piece> {
        let mut pieces = Drive::pieces(self);
        for (p, seg) in pieces.iter_mut().zip(self.segments()) {
            p.constant = p.constant && seg.max_abs_detuning() == 0.0;
        }
        pieces
    }

    fn couplings(&self, index: usize, t: f64) -> (C64, C64) {
        let (omega, phase, _) = self.controls_in(index, t);
        let chi = self.accumulated_detuning(t);
        (C64::from_polar(omega, phase + chi), C64::new(0.0, 0.0))
    }
}

/// Synthesized lambda drives for a constant base Rabi frequency `omega`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LambdaControls {
    pub shaping: Shaping,
    pub omega: f64,
    pub alpha: f64,
    pub beta: f64,
    pub duration: f64,
    pub mode: SynthesisMode,
    rate: f64,
}

const SCAN_POINTS: usize = 4001;

/// `tan s / tan x`, continued through the common zeros at the pulse ends.
fn tan_ratio(s: f64, s_dot: f64, x: f64, x_dot: f64) -> f64 {
    if x.sin().abs() < 1e-9 {
        if s.abs() < 1e-12 {
            return s_dot / x_dot;
        }
        return f64::INFINITY.copysign(s.tan() * x.cos());
    }
    s.tan() / x.tan()
}

pub fn synthesize_controls(shaping: Shaping, omega: f64, alpha: f64, mode: SynthesisMode) -> Result<LambdaControls> {
    if !(omega > 0.0 && omega.is_finite()) {
        return Err(Error::Domain(format!("Rabi frequency must be > 0, got {omega}")));
    }
    if !alpha.is_finite() {
        return Err(Error::Domain("alpha must be finite".into()));
    }
    shaping.validate()?;
    match mode {
        SynthesisMode::Exact if !shaping.vanishes_at_ends() => {
            return Err(Error::Invalid(
                "exact synthesis needs s(0) = s(T) = 0; use capped mode".into(),
            ))
        }
        SynthesisMode::Capped { cap_factor } if !(cap_factor > 0.0 && cap_factor.is_finite()) => {
            return Err(Error::Domain("cap factor must be > 0".into()))
        }
        _ => {}
    }
    let beta = alpha.hypot(1.0);
    let mut controls = LambdaControls {
        shaping,
        omega,
        alpha,
        beta,
        duration: 2.0 * PI / (beta * omega),
        mode,
        rate: 0.0,
    };
    let mut rate: f64 = 0.0;
    for k in 0..SCAN_POINTS {
        let t = controls.duration * k as f64 / (SCAN_POINTS - 1) as f64;
        let c = controls.at(t);
        let size = c.omega_ge.norm().hypot(c.omega_ae.norm());
        if !size.is_finite() || (mode == SynthesisMode::Exact && size > 1e6 * omega) {
            return Err(Error::SingularControl { time: t });
        }
        rate = rate.max(size);
    }
    controls.rate = rate + alpha.abs() * omega;
    Ok(controls)
}

/// Controls that imprint `theta` on `|g>` over one reduced cycle.
pub fn controls_for_phase(shaping: Shaping, omega: f64, theta: f64, mode: SynthesisMode) -> Result<LambdaControls> {
    synthesize_controls(shaping, omega, alpha_for_phase(theta)?, mode)
}

impl LambdaControls {
    pub fn lambda(&self, t: f64) -> f64 {
        self.omega * t
    }

    /// Uncapped fields at `t`.
    fn raw(&self, t: f64) -> (C64, C64, f64, f64) {
        let s = self.shaping.value(t, self.duration);
        let s_dot = self.shaping.rate(t, self.duration);
        let lam = self.lambda(t);
        let x = self.beta * lam / 2.0;
        let ratio = tan_ratio(s, s_dot, x, self.beta * self.omega / 2.0);
        let phase = C64::from_polar(1.0, self.alpha * lam);
        let ge = self.omega / s.cos() * phase;
        let ae =
            (C64::new(self.omega * s.tan() * self.alpha, -2.0 * s_dot) - I * self.omega * self.beta * ratio) * phase;
        (ge, ae, s, s_dot)
    }

    pub fn at(&self, t: f64) -> ControlSample {
        let (mut ge, mut ae, s, s_dot) = self.raw(t);
        let mut capped = false;
        if let SynthesisMode::Capped { cap_factor } = self.mode {
            let cap = cap_factor * self.omega;
            for z in [&mut ge, &mut ae] {
                if !z.is_finite() {
                    // divergence of unknown phase; keep the sign of the imaginary part
                    *z = C64::new(0.0, -cap);
                    capped = true;
                } else if z.norm() > cap {
                    *z *= cap / z.norm();
                    capped = true;
                }
            }
        }
        ControlSample {
            time: t,
            omega_ge: ge,
            omega_ae: ae,
            s,
            s_dot,
            lambda: self.lambda(t),
            capped,
        }
    }

    /// `n + 1` samples on a uniform grid over the pulse.
    pub fn sample(&self, n: usize) -> Vec<ControlSample> {
        let n = n.max(1);
        (0..=n).map(|k| self.at(self.duration * k as f64 / n as f64)).collect()
    }

    pub fn max_drive(&self, n: usize) -> f64 {
        self.sample(n)
            .iter()
            .map(|c| c.omega_ge.norm().max(c.omega_ae.norm()))
            .fold(0.0, f64::max)
    }

    pub fn hamiltonian_at(&self, t: f64) -> CMatrix {
        let c = self.at(t);
        lambda_hamiltonian(c.omega_ge, c.omega_ae)
    }

    /// `|p>` and `|u>` in the simulation frame (the excited-state energy is
    /// carried by the drive phases, so `|e>` picks up `e^{i alpha Lambda}`).
    pub fn frame_p_u(&self, t: f64) -> (CVector, CVector) {
        let s = self.shaping.value(t, self.duration);
        let (sn, cs) = s.sin_cos();
        let rot = C64::from_polar(1.0, self.alpha * self.lambda(t));
        let p = CVector::from_vec(vec![rot * cs, C64::new(0.0, 0.0), C64::new(sn, 0.0)]);
        let u = CVector::from_vec(vec![rot * (-sn), C64::new(0.0, 0.0), C64::new(cs, 0.0)]);
        (p, u)
    }
}

/// `H^{e g a}` with drives in the first row and column.
pub fn lambda_hamiltonian(omega_ge: C64, omega_ae: C64) -> CMatrix {
    let z = C64::new(0.0, 0.0);
    let h = C64::new(0.5, 0.0);
    CMatrix::from_row_slice(
        3,
        3,
        &[
            z,
            omega_ge * h,
            omega_ae * h,
            omega_ge.conj() * h,
            z,
            z,
            omega_ae.conj() * h,
            z,
            z,
        ],
    )
}

impl CouplingSource for LambdaControls {
    fn coupling_pieces(&self) -> Vec<Piece> {
        vec![Piece {
            start: 0.0,
            end: self.duration,
            rate: self.rate,
            constant: false,
        }]
    }

    fn couplings(&self, _index: usize, t: f64) -> (C64, C64) {
        let c = self.at(t);
        (c.omega_ge, c.omega_ae)
    }
}

impl Drive for LambdaControls {
    fn basis(&self) -> Vec<BasisLabel> {
        LAMBDA_BASIS.to_vec()
    }

    fn pieces(&self) -> Vec<Piece> {
        self.coupling_pieces()
    }

    fn hamiltonian(&self, _index: usize, t: f64) -> CMatrix {
        self.hamiltonian_at(t)
    }
}

/// Constraint residuals of synthesized controls, read back in the
/// `{p, g, u}` frame.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstraintCheck {
    /// `max |cos s Omega_ug + sin s Omega e^{-i phi}| / Omega`.
    pub no_ground_ancilla_coupling: f64,
    /// `max |Omega_up* c_p + Omega_ug* c_g| / Omega`.
    pub u_stays_empty: f64,
    /// Samples skipped because their drives were capped.
    pub skipped: usize,
}

fn mixing_matrix(s: f64) -> CMatrix {
    let (sn, cs) = s.sin_cos();
    let z = C64::new(0.0, 0.0);
    let one = C64::new(1.0, 0.0);
    CMatrix::from_row_slice(
        3,
        3,
        &[
            C64::new(cs, 0.0),
            z,
            C64::new(-sn, 0.0),
            z,
            one,
            z,
            C64::new(sn, 0.0),
            z,
            C64::new(cs, 0.0),
        ],
    )
}

fn mixing_rate(s: f64, s_dot: f64) -> CMatrix {
    let (sn, cs) = s.sin_cos();
    let z = C64::new(0.0, 0.0);
    CMatrix::from_row_slice(
        3,
        3,
        &[
            C64::new(-sn * s_dot, 0.0),
            z,
            C64::new(-cs * s_dot, 0.0),
            z,
            z,
            z,
            C64::new(cs * s_dot, 0.0),
            z,
            C64::new(-sn * s_dot, 0.0),
        ],
    )
}

impl LambdaControls {
    /// The simulated Hamiltonian with the excited-state energy restored
    /// (undoing the `e^{i alpha Lambda}` absorption).
    fn bare_hamiltonian(&self, t: f64) -> CMatrix {
        let mut h = self.hamiltonian_at(t);
        let rot = C64::from_polar(1.0, -self.alpha * self.lambda(t));
        for j in 1..3 {
            h[(0, j)] *= rot;
            h[(j, 0)] *= rot.conj();
        }
        h[(0, 0)] += C64::new(self.alpha * self.omega, 0.0);
        h
    }

    fn pgu_hamiltonian(&self, t: f64, v_dot: &CMatrix) -> CMatrix {
        let s = self.shaping.value(t, self.duration);
        let v = mixing_matrix(s);
        let h = self.bare_hamiltonian(t);
        v.adjoint() * (h - v_dot * v.adjoint() * I) * v
    }

    pub fn constraint_check(&self, samples: usize) -> ConstraintCheck {
        let mut out = ConstraintCheck {
            no_ground_ancilla_coupling: 0.0,
            u_stays_empty: 0.0,
            skipped: 0,
        };
        for c in self.sample(samples) {
            if c.capped {
                out.skipped += 1;
                continue;
            }
            let h = self.pgu_hamiltonian(c.time, &mixing_rate(c.s, c.s_dot));
            let omega_pg = h[(1, 0)] * 2.0;
            let omega_ug = h[(1, 2)] * 2.0;
            let omega_up = h[(0, 2)] * 2.0;
            let (cp, cg) = reduced_two_level_amplitudes(self.alpha, c.lambda);
            let first = (omega_ug * c.s.cos() + omega_pg * c.s.sin()).norm() / self.omega;
            let second = (omega_up.conj() * cp + omega_ug.conj() * cg).norm() / self.omega;
            out.no_ground_ancilla_coupling = out.no_ground_ancilla_coupling.max(first);
            out.u_stays_empty = out.u_stays_empty.max(second);
        }
        out
    }

    /// Largest entry of `V H^{pgu} V† + i dV/dt V† - H^{ega}` over the
    /// samples, with `dV/dt` from centered differences and `H^{pgu}` built
    /// from the reduced closed form and both constraints.
    pub fn transform_residual(&self, samples: usize) -> f64 {
        let h_step = self.duration * 1e-6;
        let mut worst: f64 = 0.0;
        for c in self.sample(samples) {
            if c.capped {
                continue;
            }
            let lo = (c.time - h_step).max(0.0);
            let hi = (c.time + h_step).min(self.duration);
            let v_dot = (mixing_matrix(self.shaping.value(hi, self.duration))
                - mixing_matrix(self.shaping.value(lo, self.duration)))
                / C64::new(hi - lo, 0.0);
            let x = self.beta * c.lambda / 2.0;
            let tan_s = c.s.tan();
            let ratio = tan_ratio(c.s, c.s_dot, x, self.beta * self.omega / 2.0);
            let omega_ug = C64::new(-self.omega * tan_s, 0.0);
            let omega_up = -C64::new(self.omega * self.alpha * tan_s, self.omega * self.beta * ratio);
            let half = C64::new(0.5, 0.0);
            let z = C64::new(0.0, 0.0);
            let pgu = CMatrix::from_row_slice(
                3,
                3,
                &[
                    C64::new(self.alpha * self.omega, 0.0),
                    C64::new(self.omega / 2.0, 0.0),
                    omega_up * half,
                    C64::new(self.omega / 2.0, 0.0),
                    z,
                    omega_ug * half,
                    omega_up.conj() * half,
                    omega_ug.conj() * half,
                    z,
                ],
            );
            let v = mixing_matrix(c.s);
            let rebuilt = &v * pgu * v.adjoint() + &v_dot * v.adjoint() * I;
            worst = worst.max(crate::linalg::max_abs_diff(&rebuilt, &self.bare_hamiltonian(c.time)) / self.omega);
        }
        worst
    }

    pub fn write_csv<W: Write>(&self, samples: usize, out: W) -> Result<()> {
        let rows: Vec<ControlRow> = self.sample(samples).iter().map(ControlRow::from).collect();
        write_control_rows(&rows, out)
    }
}

/// One line of the controls export.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlRow {
    pub time: f64,
    pub abs_omega_ge: f64,
    pub arg_omega_ge: f64,
    pub abs_omega_ae: f64,
    pub arg_omega_ae: f64,
    pub s: f64,
    pub lambda: f64,
}

impl From<&ControlSample> for ControlRow {
    fn from(c: &ControlSample) -> Self {
        ControlRow {
            time: c.time,
            abs_omega_ge: c.omega_ge.norm(),
            arg_omega_ge: c.omega_ge.arg(),
            abs_omega_ae: c.omega_ae.norm(),
            arg_omega_ae: c.omega_ae.arg(),
            s: c.s,
            lambda: c.lambda,
        }
    }
}

pub fn write_control_rows<W: Write>(rows: &[ControlRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_control_rows<R: Read>(input: R) -> Result<Vec<ControlRow>> {
    let mut r = csv::Reader::from_reader(input);
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

/// Outcome of a lambda simulation from `|g>`.
#[derive(Clone, Debug)]
pub struct LambdaRun {
    pub trajectory: Trajectory,
    pub p_population: Vec<f64>,
    pub u_population: Vec<f64>,
    pub metrics: LambdaMetrics,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LambdaMetrics {
    /// `arg c_g(T)` in `[0, 2 pi)`.
    pub final_phase: f64,
    /// `|c_g(T)|^2`.
    pub fidelity: f64,
    pub max_u_population: f64,
    pub max_excited_population: f64,
    /// `max | |c_e|^2 - cos^2 s |c_p|^2 |` and likewise for `|a>`.
    pub population_split_residual: f64,
    /// `max |c_g(t) - c_g^{reduced}(t)|`.
    pub cg_path_deviation: f64,
    pub max_drive: f64,
    pub capped_samples: usize,
}

pub fn simulate_lambda(controls: &LambdaControls, cfg: &IntegratorConfig) -> Result<LambdaRun> {
    let psi0 = StateVector::basis_state(&LAMBDA_BASIS, BasisLabel::G)?;
    let trajectory = evolve(controls, &psi0, cfg)?;
    let mut p_population = Vec::with_capacity(trajectory.len());
    let mut u_population = Vec::with_capacity(trajectory.len());
    let mut split: f64 = 0.0;
    let mut path: f64 = 0.0;
    let mut max_excited: f64 = 0.0;
    for (t, psi) in trajectory.times().iter().zip(trajectory.states()) {
        let (p, u) = controls.frame_p_u(*t);
        let cp = p.dotc(psi);
        let cu = u.dotc(psi);
        p_population.push(cp.norm_sqr());
        u_population.push(cu.norm_sqr());
        let s = controls.shaping.value(*t, controls.duration);
        let (pe, pa) = (psi[0].norm_sqr(), psi[2].norm_sqr());
        split = split
            .max((pe - s.cos().powi(2) * cp.norm_sqr()).abs())
            .max((pa - s.sin().powi(2) * cp.norm_sqr()).abs());
        max_excited = max_excited.max(pe);
        let (_, cg) = reduced_two_level_amplitudes(controls.alpha, controls.lambda(*t));
        path = path.max((psi[1] - cg).norm());
    }
    let last = trajectory.last();
    let cg = last.amplitude(BasisLabel::G)?;
    let samples = controls.sample(2000);
    let metrics = LambdaMetrics {
        final_phase: cg.arg().rem_euclid(2.0 * PI),
        fidelity: cg.norm_sqr(),
        max_u_population: u_population.iter().copied().fold(0.0, f64::max),
        max_excited_population: max_excited,
        population_split_residual: split,
        cg_path_deviation: path,
        max_drive: samples
            .iter()
            .map(|c| c.omega_ge.norm().max(c.omega_ae.norm()))
            .fold(0.0, f64::max),
        capped_samples: samples.iter().filter(|c| c.capped).count(),
    };
    Ok(LambdaRun {
        trajectory,
        p_population,
        u_population,
        metrics,
    })
}

/// Simulate several shapings at the same target phase.
pub fn simulate_shapings(
    shapings: &[Shaping],
    omega: f64,
    theta: f64,
    mode: SynthesisMode,
    cfg: &IntegratorConfig,
    exec: Execution,
) -> Result<Vec<LambdaRun>> {
    parallel::try_map(exec, shapings, |s| {
        let controls = controls_for_phase(s.clone(), omega, theta, mode)?;
        simulate_lambda(&controls, cfg)
    })
}

/// Period of the equal-drive lambda cycle, `2 sqrt(2) pi / Omega`.
pub fn spin1_period(omega: f64) -> f64 {
    2.0 * 2f64.sqrt() * PI / omega
}

/// Drive `g-e` and `a-e` with the same constant real Rabi frequency for
/// `duration` (a whole number of periods) and return `arg <g|psi(T)>`.
pub fn spin1_rotation_check(omega: f64, duration: f64, cfg: &IntegratorConfig) -> Result<f64> {
    if !(omega >= 0.0 && omega.is_finite()) {
        return Err(Error::Domain(format!("Rabi frequency must be >= 0, got {omega}")));
    }
    if !(duration > 0.0 && duration.is_finite()) {
        return Err(Error::Domain(format!("duration must be > 0, got {duration}")));
    }
    if omega == 0.0 {
        return Ok(0.0);
    }
    let cycles = duration / spin1_period(omega);
    if (cycles - cycles.round()).abs() > 1e-9 || cycles.round() < 1.0 {
        return Err(Error::Domain(format!(
            "duration covers {cycles:.6} periods; the check needs a whole number"
        )));
    }
    let run = spin1_trajectory(omega, duration, cfg)?;
    Ok(run.last().amplitude(BasisLabel::G)?.arg())
}

pub fn spin1_trajectory(omega: f64, duration: f64, cfg: &IntegratorConfig) -> Result<Trajectory> {
    let w = C64::new(omega, 0.0);
    let drive = ConstantDrive::new(LAMBDA_BASIS.to_vec(), lambda_hamiltonian(w, w), duration)?;
    evolve(&drive, &StateVector::basis_state(&LAMBDA_BASIS, BasisLabel::G)?, cfg)
}
