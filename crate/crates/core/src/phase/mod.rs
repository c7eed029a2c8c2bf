//! Total, dynamic and geometric phases along a trajectory.

mod frames;
mod solid_angle;

pub use frames::{
    apply_frame, compare_frames, AtomicFrame, EnergyShift, FrameComparison, FrameTransform, Identity, SampledFrame,
    Side, UNITARITY_TOL,
};
pub use solid_angle::{area_phase, solid_angle, SolidAngle, CLOSURE_TOL};

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{expectation, CVector, C64};
use crate::state::Trajectory;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseConfig {
    /// Largest phase change accepted between neighbouring samples.
    pub jump_limit: f64,
    /// Overlaps at or below this make the phase undefined.
    pub overlap_floor: f64,
    /// Allowed disagreement between the two geometric-phase routes.
    pub cross_check_tol: f64,
}

impl Default for PhaseConfig {
    fn default() -> Self {
        PhaseConfig {
            jump_limit: FRAC_PI_2,
            overlap_floor: 1e-6,
            cross_check_tol: 1e-4,
        }
    }
}

/// Phase budget at the final sample.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseDecomposition {
    pub theta_total: f64,
    pub theta_dyn: f64,
    pub theta_geo: f64,
    pub residual: f64,
}

/// Phase budget at every sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseSeries {
    pub times: Vec<f64>,
    pub total: Vec<f64>,
    pub dynamic: Vec<f64>,
    /// Direct integral of `i <lambda|dlambda/dt>`.
    pub geometric: Vec<f64>,
}

impl PhaseSeries {
    pub fn max_residual(&self) -> f64 {
        (0..self.times.len())
            .map(|k| (self.total[k] - self.dynamic[k] - self.geometric[k]).abs())
            .fold(0.0, f64::max)
    }

    pub fn final_decomposition(&self) -> PhaseDecomposition {
        let k = self.times.len() - 1;
        PhaseDecomposition {
            theta_total: self.total[k],
            theta_dyn: self.dynamic[k],
            theta_geo: self.geometric[k],
            residual: self.total[k] - self.dynamic[k] - self.geometric[k],
        }
    }
}

/// Unwrapped `arg <psi(0)|psi(t)>` with default limits.
pub fn total_phase(trajectory: &Trajectory) -> Result<Vec<f64>> {
    total_phase_with(trajectory, &PhaseConfig::default())
}

pub fn total_phase_with(trajectory: &Trajectory, cfg: &PhaseConfig) -> Result<Vec<f64>> {
    let times = trajectory.times();
    let states = trajectory.states();
    let psi0 = &states[0];
    let mut out = Vec::with_capacity(states.len());
    let mut prev_raw = 0.0;
    let mut acc = 0.0;
    for (k, psi) in states.iter().enumerate() {
        let overlap = psi0.dotc(psi);
        let mag = overlap.norm();
        if !(mag > cfg.overlap_floor) {
            return Err(Error::UndefinedPhase {
                time: times[k],
                overlap: mag,
            });
        }
        let raw = overlap.arg();
        if k > 0 {
            let jump = crate::linalg::wrap_angle(raw - prev_raw);
            if jump.abs() >= cfg.jump_limit {
                return Err(Error::Undersampled { time: times[k], jump });
            }
            acc += jump;
        } else {
            acc = 0.0;
        }
        prev_raw = raw;
        out.push(acc);
    }
    Ok(out)
}

/// `arg <psi(0)|psi(T)>` in `(-pi, pi]`, which needs no path information.
/// Usable when the state passes through orthogonality on the way.
pub fn final_phase(trajectory: &Trajectory) -> Result<f64> {
    let states = trajectory.states();
    let overlap = states[0].dotc(&states[states.len() - 1]);
    if !(overlap.norm() > PhaseConfig::default().overlap_floor) {
        return Err(Error::UndefinedPhase {
            time: trajectory.times()[trajectory.len() - 1],
            overlap: overlap.norm(),
        });
    }
    Ok(overlap.arg())
}

/// Cumulative `-∫ <psi|H|psi> dt` by the trapezoid rule, using left limits
/// of the Hamiltonian at piece boundaries.
pub fn dynamic_phase(trajectory: &Trajectory) -> Result<Vec<f64>> {
    let hams = trajectory.hamiltonians().ok_or(Error::MissingHamiltonian)?;
    let times = trajectory.times();
    let states = trajectory.states();
    let mut out = Vec::with_capacity(times.len());
    out.push(0.0);
    let mut acc = 0.0;
    for k in 0..times.len() - 1 {
        let right = expectation(&hams[k], &states[k]).re;
        let left = expectation(trajectory.hamiltonian_before(k + 1).unwrap(), &states[k + 1]).re;
        acc -= 0.5 * (times[k + 1] - times[k]) * (right + left);
        out.push(acc);
    }
    Ok(out)
}

/// Derivative at node `at` of the quadratic through three samples.
fn three_point_derivative(t: [f64; 3], f: [&CVector; 3], at: usize) -> CVector {
    let x = t[at];
    let weight = |j: usize| {
        let (a, b) = match j {
            0 => (1, 2),
            1 => (0, 2),
            _ => (0, 1),
        };
        ((x - t[a]) + (x - t[b])) / ((t[j] - t[a]) * (t[j] - t[b]))
    };
    f[0] * C64::new(weight(0), 0.0) + f[1] * C64::new(weight(1), 0.0) + f[2] * C64::new(weight(2), 0.0)
}

/// `i <lambda|dlambda/dt>` on each sample of a piece, with one-sided
/// differences at the piece ends.
fn connection_on_piece(times: &[f64], lambda: &[CVector]) -> Vec<f64> {
    let n = times.len();
    let integrand = |l: &CVector, d: &CVector| -l.dotc(d).im;
    if n == 2 {
        let d = (&lambda[1] - &lambda[0]) / C64::new(times[1] - times[0], 0.0);
        return vec![integrand(&lambda[0], &d), integrand(&lambda[1], &d)];
    }
    (0..n)
        .map(|k| {
            let (base, at) = match k {
                0 => (0, 0),
                k if k == n - 1 => (n - 3, 2),
                k => (k - 1, 1),
            };
            let t = [times[base], times[base + 1], times[base + 2]];
            let f = [&lambda[base], &lambda[base + 1], &lambda[base + 2]];
            integrand(&lambda[k], &three_point_derivative(t, f, at))
        })
        .collect()
}

/// Direct integral of `i <lambda|dlambda/dt>` with `lambda = e^{-i theta} psi`.
fn geometric_direct(trajectory: &Trajectory, total: &[f64]) -> Vec<f64> {
    let times = trajectory.times();
    let lambda: Vec<CVector> = trajectory
        .states()
        .iter()
        .zip(total)
        .map(|(psi, &th)| psi * C64::from_polar(1.0, -th))
        .collect();
    let mut out = vec![0.0; times.len()];
    let mut acc = 0.0;
    for (first, last) in trajectory.pieces() {
        if last == first {
            continue;
        }
        let g = connection_on_piece(&times[first..=last], &lambda[first..=last]);
        for j in 0..last - first {
            let k = first + j;
            acc += 0.5 * (times[k + 1] - times[k]) * (g[j] + g[j + 1]);
            out[k + 1] = acc;
        }
    }
    out
}

pub fn phase_series(trajectory: &Trajectory) -> Result<PhaseSeries> {
    phase_series_with(trajectory, &PhaseConfig::default())
}

/// Full phase budget with both geometric routes cross-checked.
pub fn phase_series_with(trajectory: &Trajectory, cfg: &PhaseConfig) -> Result<PhaseSeries> {
    let total = total_phase_with(trajectory, cfg)?;
    let dynamic = dynamic_phase(trajectory)?;
    let geometric = geometric_direct(trajectory, &total);
    let disagreement = (0..total.len())
        .map(|k| (total[k] - dynamic[k] - geometric[k]).abs())
        .fold(0.0, f64::max);
    if !(disagreement < cfg.cross_check_tol) {
        return Err(Error::CrossCheck { disagreement });
    }
    Ok(PhaseSeries {
        times: trajectory.times().to_vec(),
        total,
        dynamic,
        geometric,
    })
}

/// Geometric phase at every sample, after the cross-check of both routes.
pub fn geometric_phase(trajectory: &Trajectory) -> Result<Vec<f64>> {
    Ok(phase_series(trajectory)?.geometric)
}

pub fn decompose(trajectory: &Trajectory) -> Result<PhaseDecomposition> {
    Ok(phase_series(trajectory)?.final_decomposition())
}

/// Exported phase summary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseReport {
    pub theta_total: f64,
    pub theta_dyn: f64,
    pub theta_geo: f64,
    pub residual: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub solid_angle: Option<f64>,
    pub frame_tag: String,
}

impl PhaseReport {
    pub fn new(decomposition: &PhaseDecomposition, solid_angle: Option<f64>, frame_tag: impl Into<String>) -> Self {
        PhaseReport {
            theta_total: decomposition.theta_total,
            theta_dyn: decomposition.theta_dyn,
            theta_geo: decomposition.theta_geo,
            residual: decomposition.residual,
            solid_angle,
            frame_tag: frame_tag.into(),
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("report serializes")
    }
}
