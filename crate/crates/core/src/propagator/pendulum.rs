//! The ground amplitude as a driven two-dimensional oscillator.
//!
//! `c_g'' = -(Omega^2/4) c_g + (Omega'/Omega - i Delta) c_g'` with speed
//! `|c_g'| = (Omega/2)|c_e|`. These checks compare finite differences of a
//! sampled trajectory against both relations.

use serde::{Deserialize, Serialize};

use super::PulseSchedule;
use crate::error::{Error, Result};
use crate::linalg::{C64, I};
use crate::state::{index_of, BasisLabel, Trajectory};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PendulumCheck {
    /// `max |c_g''_fd - rhs| / Omega_max^2`.
    pub acceleration_residual: f64,
    /// `max ||c_g'_fd| - (Omega/2)|c_e|| / Omega_max`.
    pub speed_residual: f64,
    /// Mean of `Im(conj(v) a_steer)`; negative means the path bends right.
    pub steering: f64,
}

pub fn pendulum_residual(trajectory: &Trajectory, schedule: &PulseSchedule) -> Result<PendulumCheck> {
    if trajectory.len() < 3 {
        return Err(Error::Invalid("pendulum check needs at least 3 samples".into()));
    }
    let g = index_of(trajectory.basis(), BasisLabel::G)?;
    let e = index_of(trajectory.basis(), BasisLabel::E)?;
    let pieces = trajectory.pieces();
    if pieces.len() != schedule.segments().len() {
        return Err(Error::Invalid(
            "trajectory pieces do not match schedule segments".into(),
        ));
    }
    let omega_max = schedule.max_omega();
    let times = trajectory.times();
    let states = trajectory.states();
    let starts = schedule.starts();

    let mut accel: f64 = 0.0;
    let mut speed: f64 = 0.0;
    let mut steer_sum = 0.0;
    let mut count = 0usize;
    for (index, &(first, last)) in pieces.iter().enumerate() {
        let seg = &schedule.segments()[index];
        for k in first + 1..last {
            let h = times[k + 1] - times[k];
            let (prev, here, next) = (states[k - 1][g], states[k][g], states[k + 1][g]);
            let v = (next - prev) / (2.0 * h);
            let a = (next - here * 2.0 + prev) / (h * h);
            let tau = times[k] - starts[index];
            let omega = seg.omega_at(tau);
            let omega_dot = seg.omega_rate_at(tau);
            let detuning = seg.detuning_at(tau);
            let ce = states[k][e];
            // (Omega'/Omega) c_g' written through c_g' = -i (Omega/2) e^{-i phi} c_e
            let ramp = -I * C64::from_polar(omega_dot / 2.0, -seg.phase) * ce;
            let restoring = here * (-omega * omega / 4.0);
            let rhs = restoring + ramp - I * detuning * v;
            accel = accel.max((a - rhs).norm());
            speed = speed.max((v.norm() - omega / 2.0 * ce.norm()).abs());
            steer_sum += (v.conj() * (a - restoring - ramp)).im;
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::Invalid("no interior samples for finite differences".into()));
    }
    let (accel, speed) = if omega_max > 0.0 {
        (accel / (omega_max * omega_max), speed / omega_max)
    } else {
        (accel, speed)
    };
    Ok(PendulumCheck {
        acceleration_residual: accel,
        speed_residual: speed,
        steering: steer_sum / count as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::propagator::{propagate_schedule, ControlSegment, IntegratorConfig};
    use crate::state::StateVector;

    fn run(omega: f64, detuning: f64, duration: f64, rate: f64) -> (Trajectory, PulseSchedule) {
        let s = PulseSchedule::new(vec![ControlSegment::constant(omega, 0.0, detuning, duration).unwrap()]).unwrap();
        let cfg = IntegratorConfig::new(0.02, rate).unwrap();
        (propagate_schedule(&s, &StateVector::ground(), &cfg).unwrap(), s)
    }

    #[test]
    fn constant_resonant_drive_obeys_oscillator_equation() {
        let (traj, s) = run(1.0, 0.0, 6.0, 200.0);
        let check = pendulum_residual(&traj, &s).unwrap();
        assert!(check.acceleration_residual < 1e-3, "{check:?}");
        assert!(check.speed_residual < 1e-3, "{check:?}");
    }

    #[test]
    fn zero_drive_has_vanishing_residual() {
        let (traj, s) = run(0.0, 0.0, 3.0, 50.0);
        let check = pendulum_residual(&traj, &s).unwrap();
        assert_eq!(check.acceleration_residual, 0.0);
        assert_eq!(check.speed_residual, 0.0);
    }

    #[test]
    fn detuning_sign_sets_turning_direction() {
        let (right, s1) = run(1.0, 0.8, 5.0, 200.0);
        let (left, s2) = run(1.0, -0.8, 5.0, 200.0);
        assert!(pendulum_residual(&right, &s1).unwrap().steering < 0.0);
        assert!(pendulum_residual(&left, &s2).unwrap().steering > 0.0);
    }

    #[test]
    fn ramped_envelope_obeys_oscillator_equation() {
        let times: Vec<f64> = (0..=40).map(|k| k as f64 * 0.1).collect();
        let omega: Vec<f64> = times.iter().map(|t| 0.5 + 0.25 * t).collect();
        let detuning = vec![0.3; times.len()];
        let s = PulseSchedule::new(vec![ControlSegment::tabulated(0.2, times, omega, detuning).unwrap()]).unwrap();
        let traj =
            propagate_schedule(&s, &StateVector::ground(), &IntegratorConfig::new(0.01, 400.0).unwrap()).unwrap();
        let check = pendulum_residual(&traj, &s).unwrap();
        assert!(check.acceleration_residual < 1e-3, "{check:?}");
        assert!(check.speed_residual < 1e-3, "{check:?}");
    }

    #[test]
    fn too_few_samples() {
        let g = StateVector::ground().amplitudes().clone();
        let traj = Trajectory::new(
            crate::state::TWO_LEVEL.to_vec(),
            vec![0.0, 1.0],
            vec![g.clone(), g],
            None,
        )
        .unwrap();
        let s = PulseSchedule::new(vec![ControlSegment::constant(1.0, 0.0, 0.0, 1.0).unwrap()]).unwrap();
        assert!(pendulum_residual(&traj, &s).is_err());
    }
}
