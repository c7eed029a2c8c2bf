use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::CouplingSource;
use crate::error::{Error, Result};
use crate::linalg::{max_abs_diff, outer, unitarity_deviation, CMatrix, CVector, C64};
use crate::propagator::{evolve, Drive, IntegratorConfig, Piece};
use crate::state::{BasisLabel, StateVector};

pub const TRIPOD_BASIS: [BasisLabel; 4] = [BasisLabel::E, BasisLabel::Zero, BasisLabel::One, BasisLabel::A];

/// Bright `sin(eta/2)|0> + cos(eta/2) e^{-i gamma}|1>` and dark
/// `cos(eta/2)|0> - sin(eta/2) e^{-i gamma}|1>`.
pub fn bright_dark(eta: f64, gamma: f64) -> (StateVector, StateVector) {
    let (sn, cs) = (eta / 2.0).sin_cos();
    let tilt = C64::from_polar(1.0, -gamma);
    let basis = vec![BasisLabel::Zero, BasisLabel::One];
    let bright = StateVector::new(basis.clone(), vec![C64::new(sn, 0.0), tilt * cs]).unwrap();
    let dark = StateVector::new(basis, vec![C64::new(cs, 0.0), -tilt * sn]).unwrap();
    (bright, dark)
}

/// `e^{i theta}|bright><bright| + |dark><dark|` on `{|0>, |1>}`.
pub fn gate_target(eta: f64, gamma: f64, theta: f64) -> CMatrix {
    let (b, d) = bright_dark(eta, gamma);
    outer(b.amplitudes(), b.amplitudes()) * C64::from_polar(1.0, theta) + outer(d.amplitudes(), d.amplitudes())
}

/// Mixing of one bright-state drive onto the two qubit transitions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TripodControls {
    pub eta: f64,
    pub gamma: f64,
}

impl TripodControls {
    /// `(Omega_0e, Omega_1e)` for bright-state drive `omega_bright`.
    pub fn split(&self, omega_bright: C64) -> (C64, C64) {
        let (sn, cs) = (self.eta / 2.0).sin_cos();
        (omega_bright * sn, omega_bright * cs * C64::from_polar(1.0, self.gamma))
    }
}

pub struct TripodDrive<'a> {
    pub source: &'a dyn CouplingSource,
    pub controls: TripodControls,
}

impl Drive for TripodDrive<'_> {
    fn basis(&self) -> Vec<BasisLabel> {
        TRIPOD_BASIS.to_vec()
    }

    fn pieces(&self) -> Vec<Piece> {
        self.source.coupling_pieces()
    }

    fn hamiltonian(&self, index: usize, t: f64) -> CMatrix {
        let (bright, ancilla) = self.source.couplings(index, t);
        let (zero, one) = self.controls.split(bright);
        let mut h = CMatrix::zeros(4, 4);
        for (j, w) in [(1, zero), (2, one), (3, ancilla)] {
            h[(0, j)] = w * 0.5;
            h[(j, 0)] = w.conj() * 0.5;
        }
        h
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TripodGate {
    /// Final amplitudes on `{|0>, |1>}`, column per input.
    pub realized: CMatrix,
    pub target: CMatrix,
    pub max_entry_error: f64,
    /// Largest population left outside the qubit at the end.
    pub leakage: f64,
    pub unitarity_deviation: f64,
}

/// Simulate the tripod with a phase source acting on the bright state and
/// read back the gate on the qubit.
pub fn tripod_gate(
    eta: f64,
    gamma: f64,
    theta: f64,
    source: &dyn CouplingSource,
    cfg: &IntegratorConfig,
) -> Result<TripodGate> {
    if !(eta.is_finite() && gamma.is_finite() && theta.is_finite()) {
        return Err(Error::Domain("gate angles must be finite".into()));
    }
    let drive = TripodDrive {
        source,
        controls: TripodControls { eta, gamma },
    };
    let mut realized = CMatrix::zeros(2, 2);
    let mut leakage: f64 = 0.0;
    for (col, label) in [BasisLabel::Zero, BasisLabel::One].into_iter().enumerate() {
        let traj = evolve(&drive, &StateVector::basis_state(&TRIPOD_BASIS, label)?, cfg)?;
        let last = traj.last();
        let a0 = last.amplitude(BasisLabel::Zero)?;
        let a1 = last.amplitude(BasisLabel::One)?;
        realized[(0, col)] = a0;
        realized[(1, col)] = a1;
        leakage = leakage.max(1.0 - a0.norm_sqr() - a1.norm_sqr());
    }
    let target = gate_target(eta, gamma, theta);
    Ok(TripodGate {
        max_entry_error: max_abs_diff(&realized, &target),
        unitarity_deviation: unitarity_deviation(&realized),
        realized,
        target,
        leakage,
    })
}

/// `(eta, gamma, theta)` and a global phase with
/// `U = e^{i global} (e^{i theta}|b><b| + |d><d|)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateParameters {
    pub eta: f64,
    pub gamma: f64,
    pub theta: f64,
    pub global_phase: f64,
}

/// Recover gate parameters from a 2x2 unitary through its eigenvectors.
pub fn decompose_gate(u: &CMatrix) -> Result<GateParameters> {
    if u.nrows() != 2 || u.ncols() != 2 {
        return Err(Error::BasisMismatch("gate must be 2x2".into()));
    }
    let dev = unitarity_deviation(u);
    if dev > 1e-8 {
        return Err(Error::NonUnitary {
            time: 0.0,
            deviation: dev,
        });
    }
    let half_trace = (u[(0, 0)] + u[(1, 1)]) * 0.5;
    let det = u[(0, 0)] * u[(1, 1)] - u[(0, 1)] * u[(1, 0)];
    let disc = (half_trace * half_trace - det).sqrt();
    let (l1, l2) = (half_trace + disc, half_trace - disc);
    if (l1 - l2).norm() < 1e-12 {
        return Ok(GateParameters {
            eta: PI,
            gamma: 0.0,
            theta: 0.0,
            global_phase: l1.arg(),
        });
    }
    let first = CVector::from_vec(vec![u[(0, 1)], l1 - u[(0, 0)]]);
    let second = CVector::from_vec(vec![l1 - u[(1, 1)], u[(1, 0)]]);
    let v = if first.norm() >= second.norm() { first } else { second };
    let v = &v / C64::new(v.norm(), 0.0);
    let (a, b) = (v[0], v[1]);
    let eta = 2.0 * a.norm().atan2(b.norm());
    let gamma = if a.norm() < 1e-12 || b.norm() < 1e-12 {
        0.0
    } else {
        (a.arg() - b.arg()).rem_euclid(2.0 * PI)
    };
    Ok(GateParameters {
        eta,
        gamma,
        theta: (l1 / l2).arg().rem_euclid(2.0 * PI),
        global_phase: l2.arg(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schemes::build_resonant_two_pulse;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn bright_dark_pairs() {
        let (b, d) = bright_dark(PI, 0.0);
        assert!((b.amplitude(BasisLabel::Zero).unwrap() - C64::new(1.0, 0.0)).norm() < 1e-15);
        assert!((d.amplitude(BasisLabel::One).unwrap() + C64::new(1.0, 0.0)).norm() < 1e-15);
        let (b, _) = bright_dark(PI / 2.0, 0.0);
        assert!((b.amplitude(BasisLabel::One).unwrap().re - 0.5f64.sqrt()).abs() < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let (b, d) = bright_dark(rng.random_range(0.0..2.0 * PI), rng.random_range(0.0..2.0 * PI));
            assert!(b.overlap(&d).unwrap().norm() < 1e-15);
        }
    }

    #[test]
    fn hadamard_conjugated_flip() {
        let u = gate_target(PI / 2.0, 0.0, PI);
        // (1 + e^{i theta})/2 on the diagonal, (e^{i theta} - 1)/2 off it
        assert!(u[(0, 0)].norm() < 1e-15 && u[(1, 1)].norm() < 1e-15);
        assert!((u[(0, 1)] + C64::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn decomposition_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let (eta, gamma, theta) = (
                rng.random_range(0.1..PI - 0.1),
                rng.random_range(0.0..2.0 * PI),
                rng.random_range(0.1..2.0 * PI - 0.1),
            );
            let global = rng.random_range(-PI..PI);
            let u = gate_target(eta, gamma, theta) * C64::from_polar(1.0, global);
            let p = decompose_gate(&u).unwrap();
            let back = gate_target(p.eta, p.gamma, p.theta) * C64::from_polar(1.0, p.global_phase);
            assert!(max_abs_diff(&u, &back) < 1e-10);
        }
        let id = decompose_gate(&CMatrix::identity(2, 2)).unwrap();
        assert_eq!(id.theta, 0.0);
    }

    #[test]
    fn resonant_source_realizes_flip() {
        let s = build_resonant_two_pulse(PI, 1.0).unwrap();
        let gate = tripod_gate(PI, 0.0, PI, &s, &IntegratorConfig::default()).unwrap();
        assert!(gate.max_entry_error < 1e-6, "{gate:?}");
        assert!(gate.leakage < 1e-8);
        let zero = build_resonant_two_pulse(0.0, 1.0).unwrap();
        let gate = tripod_gate(0.8, 0.3, 0.0, &zero, &IntegratorConfig::default()).unwrap();
        assert!(max_abs_diff(&gate.realized, &CMatrix::identity(2, 2)) < 1e-6);
    }
}
