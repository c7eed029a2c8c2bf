//! Pure-state propagation: the closed-form constant-drive solution and a
//! fixed-step fourth-order Runge-Kutta integrator for arbitrary drives.

mod pendulum;
mod schedule;

pub use pendulum::{pendulum_residual, PendulumCheck};
pub use schedule::{two_level_hamiltonian, ControlSegment, Envelope, PulseSchedule};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, CVector, C64, I};
use crate::state::{index_of, BasisLabel, StateVector, Trajectory, TWO_LEVEL};

/// Largest admissible `Omega_R * dt`.
pub const MAX_STEP_BOUND: f64 = 0.05;
const NORM_DRIFT_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    /// Upper bound on `rate * dt` for every step.
    pub step_bound: f64,
    /// Minimum number of samples per unit time.
    pub sample_rate: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            step_bound: 0.005,
            sample_rate: 20.0,
        }
    }
}

impl IntegratorConfig {
    pub fn new(step_bound: f64, sample_rate: f64) -> Result<Self> {
        let cfg = IntegratorConfig {
            step_bound,
            sample_rate,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step_bound > 0.0 && self.step_bound <= MAX_STEP_BOUND) {
            return Err(Error::Domain(format!(
                "step_bound must lie in (0, {MAX_STEP_BOUND}], got {}",
                self.step_bound
            )));
        }
        if !(self.sample_rate > 0.0 && self.sample_rate.is_finite()) {
            return Err(Error::Domain(format!(
                "sample_rate must be positive, got {}",
                self.sample_rate
            )));
        }
        Ok(())
    }

    /// Number of uniform steps used for a piece of the given length and rate.
    pub fn steps_for(&self, length: f64, rate: f64) -> usize {
        let density = (rate / self.step_bound).max(self.sample_rate);
        ((length * density) - 1e-9).ceil().max(1.0) as usize
    }
}

/// A smooth stretch of a drive.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Piece {
    pub start: f64,
    pub end: f64,
    /// Frequency scale that bounds the step size inside the piece.
    pub rate: f64,
    /// The Hamiltonian does not change inside the piece.
    pub constant: bool,
}

/// A piecewise-smooth time-dependent Hamiltonian.
///
/// Controls may jump between pieces; inside a piece the Hamiltonian must be
/// smooth so the fourth-order integrator keeps its accuracy.
pub trait Drive: Sync {
    fn basis(&self) -> Vec<BasisLabel>;

    fn pieces(&self) -> Vec<Piece>;

    /// Hamiltonian of piece `index` at absolute time `t` within that piece.
    fn hamiltonian(&self, index: usize, t: f64) -> CMatrix;

    fn duration(&self) -> f64 {
        self.pieces().last().map_or(0.0, |p| p.end)
    }
}

pub(crate) fn schrodinger_rk4(h0: &CMatrix, hm: &CMatrix, h1: &CMatrix, psi: &CVector, dt: f64) -> CVector {
    let f = |h: &CMatrix, v: &CVector| -> CVector { (h * v) * (-I) };
    let half = C64::new(dt / 2.0, 0.0);
    let full = C64::new(dt, 0.0);
    let k1 = f(h0, psi);
    let k2 = f(hm, &(psi + &k1 * half));
    let k3 = f(hm, &(psi + &k2 * half));
    let k4 = f(h1, &(psi + &k3 * full));
    psi + (k1 + k2 * C64::new(2.0, 0.0) + k3 * C64::new(2.0, 0.0) + k4) * C64::new(dt / 6.0, 0.0)
}

/// A time-independent Hamiltonian on an arbitrary basis.
#[derive(Clone, Debug)]
pub struct ConstantDrive {
    basis: Vec<BasisLabel>,
    hamiltonian: CMatrix,
    duration: f64,
}

impl ConstantDrive {
    pub fn new(basis: Vec<BasisLabel>, hamiltonian: CMatrix, duration: f64) -> Result<Self> {
        crate::state::validate_basis(&basis)?;
        let n = basis.len();
        if hamiltonian.nrows() != n || hamiltonian.ncols() != n {
            return Err(Error::BasisMismatch("Hamiltonian dimension differs from basis".into()));
        }
        if crate::linalg::max_abs_diff(&hamiltonian, &hamiltonian.adjoint()) > 1e-12 {
            return Err(Error::Invalid("Hamiltonian is not Hermitian".into()));
        }
        if !(duration > 0.0 && duration.is_finite()) {
            return Err(Error::Domain(format!("duration must be > 0, got {duration}")));
        }
        Ok(ConstantDrive {
            basis,
            hamiltonian,
            duration,
        })
    }
}

impl Drive for ConstantDrive {
    fn basis(&self) -> Vec<BasisLabel> {
        self.basis.clone()
    }

    fn pieces(&self) -> Vec<Piece> {
        vec![Piece {
            start: 0.0,
            end: self.duration,
            rate: crate::linalg::rate_bound(&self.hamiltonian),
            constant: true,
        }]
    }

    fn hamiltonian(&self, _index: usize, _t: f64) -> CMatrix {
        self.hamiltonian.clone()
    }
}

/// One RK4 step for a constant Hamiltonian as a matrix: the fourth-order
/// Taylor polynomial of `exp(-i H dt)`.
pub(crate) fn rk4_step_matrix(h: &CMatrix, dt: f64) -> CMatrix {
    let n = h.nrows();
    let a = h * C64::new(0.0, -dt);
    let mut term = CMatrix::identity(n, n);
    let mut sum = term.clone();
    for k in 1..=4 {
        term = &term * &a / C64::new(k as f64, 0.0);
        sum += &term;
    }
    sum
}

/// Integrate the Schrödinger equation for `drive` starting from `psi0`,
/// recording every step.
pub fn evolve<D: Drive + ?Sized>(drive: &D, psi0: &StateVector, cfg: &IntegratorConfig) -> Result<Trajectory> {
    cfg.validate()?;
    let basis = drive.basis();
    if psi0.basis() != basis.as_slice() {
        return Err(Error::BasisMismatch(format!(
            "initial state basis {:?} differs from drive basis {:?}",
            psi0.basis(),
            basis
        )));
    }
    let pieces = drive.pieces();
    if pieces.is_empty() {
        return Err(Error::EmptySchedule);
    }

    let mut times = vec![pieces[0].start];
    let mut states = vec![psi0.amplitudes().clone()];
    let mut hams = vec![drive.hamiltonian(0, pieces[0].start)];
    let mut boundaries = Vec::new();
    let mut left_limits = Vec::new();
    let mut psi = psi0.amplitudes().clone();
    let mut worst_drift = 0.0f64;

    for (index, piece) in pieces.iter().enumerate() {
        let length = piece.end - piece.start;
        if !(length > 0.0) {
            return Err(Error::Invalid(format!("piece {index} has non-positive length")));
        }
        let n = cfg.steps_for(length, piece.rate);
        let dt = length / n as f64;
        if index > 0 {
            let k = times.len() - 1;
            boundaries.push(k);
            let right = drive.hamiltonian(index, piece.start);
            left_limits.push(std::mem::replace(&mut hams[k], right));
        }
        let fixed = piece
            .constant
            .then(|| drive.hamiltonian(index, piece.start))
            .map(|h| (rk4_step_matrix(&h, dt), h));
        let mut h_left = hams[hams.len() - 1].clone();
        for j in 0..n {
            let t0 = piece.start + j as f64 * dt;
            let t1 = if j + 1 == n {
                piece.end
            } else {
                piece.start + (j + 1) as f64 * dt
            };
            let h1 = match &fixed {
                Some((step, h)) => {
                    psi = step * &psi;
                    h.clone()
                }
                None => {
                    let hm = drive.hamiltonian(index, t0 + 0.5 * (t1 - t0));
                    let h1 = drive.hamiltonian(index, t1);
                    psi = schrodinger_rk4(&h_left, &hm, &h1, &psi, t1 - t0);
                    h1
                }
            };
            worst_drift = worst_drift.max((psi.norm() - 1.0).abs());
            times.push(t1);
            states.push(psi.clone());
            hams.push(h1.clone());
            h_left = h1;
        }
    }

    if !(worst_drift < NORM_DRIFT_TOL) {
        return Err(Error::NormDrift { drift: worst_drift });
    }
    if let Some(last) = states.last_mut() {
        let norm = last.norm();
        *last /= C64::new(norm, 0.0);
    }
    Trajectory::with_boundaries(basis, times, states, Some(hams), boundaries, left_limits)
}

/// Closed-form propagator of the constant two-level Hamiltonian over time
/// `t`, in `{g, e}` ordering.
pub fn constant_propagator(detuning: f64, omega: f64, phase: f64, t: f64) -> CMatrix {
    let rabi = omega.hypot(detuning);
    let global = C64::from_polar(1.0, -detuning * t / 2.0);
    if rabi == 0.0 {
        return CMatrix::identity(2, 2);
    }
    let (s, c) = (rabi * t / 2.0).sin_cos();
    let gg = global * C64::new(c, detuning / rabi * s);
    let ee = global * C64::new(c, -detuning / rabi * s);
    let eg = global * (-I) * C64::from_polar(omega / rabi * s, phase);
    let ge = global * (-I) * C64::from_polar(omega / rabi * s, -phase);
    CMatrix::from_row_slice(2, 2, &[gg, ge, eg, ee])
}

/// Exact evolution of a two-level state under constant controls.
pub fn propagate_constant(detuning: f64, omega: f64, phase: f64, t: f64, psi0: &StateVector) -> Result<StateVector> {
    if psi0.basis() != TWO_LEVEL {
        return Err(Error::BasisMismatch("constant propagation needs a {g, e} state".into()));
    }
    if omega < 0.0 {
        return Err(Error::Domain(format!("Rabi frequency must be >= 0, got {omega}")));
    }
    let u = constant_propagator(detuning, omega, phase, t);
    let out = &u * psi0.amplitudes();
    let norm = out.norm();
    StateVector::from_vector(TWO_LEVEL.to_vec(), out / C64::new(norm, 0.0))
}

pub fn propagate_schedule(schedule: &PulseSchedule, psi0: &StateVector, cfg: &IntegratorConfig) -> Result<Trajectory> {
    evolve(schedule, psi0, cfg)
}

pub(crate) fn trapezoid(times: &[f64], values: &[f64]) -> f64 {
    times
        .windows(2)
        .zip(values.windows(2))
        .map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1]))
        .sum()
}

/// `∫ |c_e(t)|^2 dt` over the samples, by the trapezoid rule.
pub fn integrated_excited_population(trajectory: &Trajectory) -> Result<f64> {
    let e = index_of(trajectory.basis(), BasisLabel::E)?;
    let pops: Vec<f64> = trajectory.states().iter().map(|s| s[e].norm_sqr()).collect();
    Ok(trapezoid(trajectory.times(), &pops))
}
