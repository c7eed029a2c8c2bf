//! Time-dependent changes of frame `|psi'> = R|psi>`, `H' = R H R† + i dR/dt R†`.

use serde::{Deserialize, Serialize};

use super::{phase_series, PhaseDecomposition};
use crate::error::{Error, Result};
use crate::linalg::{expectation, unitarity_deviation, CMatrix, CVector, C64, I};
use crate::propagator::PulseSchedule;
use crate::state::{index_of, BasisLabel, Trajectory};

pub const UNITARITY_TOL: f64 = 1e-10;

/// Which one-sided limit to take where the frame's generator jumps.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

pub trait FrameTransform: Sync {
    fn tag(&self) -> String;

    fn dim(&self) -> usize;

    fn unitary(&self, t: f64) -> CMatrix;

    /// `i dR/dt R†`, the term added to the transformed Hamiltonian.
    fn generator(&self, t: f64, side: Side) -> CMatrix;
}

#[derive(Clone, Copy, Debug)]
pub struct Identity {
    pub dim: usize,
}

impl FrameTransform for Identity {
    fn tag(&self) -> String {
        "identity".into()
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn unitary(&self, _t: f64) -> CMatrix {
        CMatrix::identity(self.dim, self.dim)
    }

    fn generator(&self, _t: f64, _side: Side) -> CMatrix {
        CMatrix::zeros(self.dim, self.dim)
    }
}

/// Collective energy offset: `R = e^{-iEt}`, so `H' = H + E`.
#[derive(Clone, Copy, Debug)]
pub struct EnergyShift {
    pub energy: f64,
    pub dim: usize,
}

impl FrameTransform for EnergyShift {
    fn tag(&self) -> String {
        format!("energy_shift({})", self.energy)
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn unitary(&self, t: f64) -> CMatrix {
        CMatrix::identity(self.dim, self.dim) * C64::from_polar(1.0, -self.energy * t)
    }

    fn generator(&self, _t: f64, _side: Side) -> CMatrix {
        CMatrix::identity(self.dim, self.dim) * C64::new(self.energy, 0.0)
    }
}

/// From the rotating laser frame to the atomic frame of a schedule:
/// `|e>` picks up `e^{i chi(t)}` with `chi = ∫ Delta`, removing the
/// detuning from the diagonal and moving it into the coupling phase.
#[derive(Clone, Debug)]
pub struct AtomicFrame {
    schedule: PulseSchedule,
    basis: Vec<BasisLabel>,
    excited: usize,
}

impl AtomicFrame {
    pub fn new(schedule: PulseSchedule, basis: &[BasisLabel]) -> Result<Self> {
        let excited = index_of(basis, BasisLabel::E)?;
        Ok(AtomicFrame {
            schedule,
            basis: basis.to_vec(),
            excited,
        })
    }

    fn detuning(&self, t: f64, side: Side) -> f64 {
        let starts = self.schedule.starts();
        let index = match side {
            Side::Right => self.schedule.segment_at(t),
            Side::Left => starts.iter().rposition(|&s| s < t).unwrap_or(0),
        };
        self.schedule.controls_in(index, t).2
    }
}

impl FrameTransform for AtomicFrame {
    fn tag(&self) -> String {
        "atomic".into()
    }

    fn dim(&self) -> usize {
        self.basis.len()
    }

    fn unitary(&self, t: f64) -> CMatrix {
        let n = self.dim();
        let mut r = CMatrix::identity(n, n);
        r[(self.excited, self.excited)] = C64::from_polar(1.0, self.schedule.accumulated_detuning(t));
        r
    }

    fn generator(&self, t: f64, side: Side) -> CMatrix {
        let n = self.dim();
        let mut g = CMatrix::zeros(n, n);
        g[(self.excited, self.excited)] = C64::new(-self.detuning(t, side), 0.0);
        g
    }
}

/// A frame given only by samples of `R`; the generator comes from
/// three-point differences on the sample grid.
#[derive(Clone, Debug)]
pub struct SampledFrame {
    tag: String,
    times: Vec<f64>,
    unitaries: Vec<CMatrix>,
}

impl SampledFrame {
    pub fn new(tag: impl Into<String>, times: Vec<f64>, unitaries: Vec<CMatrix>) -> Result<Self> {
        if times.len() < 3 || times.len() != unitaries.len() {
            return Err(Error::Invalid("sampled frame needs >= 3 matching samples".into()));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Invalid("frame sample times must increase strictly".into()));
        }
        let n = unitaries[0].nrows();
        if unitaries.iter().any(|u| u.nrows() != n || u.ncols() != n) {
            return Err(Error::Invalid("frame samples differ in dimension".into()));
        }
        Ok(SampledFrame {
            tag: tag.into(),
            times,
            unitaries,
        })
    }

    fn nearest(&self, t: f64) -> usize {
        match self.times.binary_search_by(|x| x.partial_cmp(&t).unwrap()) {
            Ok(k) => k,
            Err(0) => 0,
            Err(k) if k >= self.times.len() => self.times.len() - 1,
            Err(k) => {
                if t - self.times[k - 1] < self.times[k] - t {
                    k - 1
                } else {
                    k
                }
            }
        }
    }
}

impl FrameTransform for SampledFrame {
    fn tag(&self) -> String {
        self.tag.clone()
    }

    fn dim(&self) -> usize {
        self.unitaries[0].nrows()
    }

    fn unitary(&self, t: f64) -> CMatrix {
        self.unitaries[self.nearest(t)].clone()
    }

    fn generator(&self, t: f64, _side: Side) -> CMatrix {
        let n = self.times.len();
        let k = self.nearest(t);
        let base = k.saturating_sub(1).min(n - 3);
        let x = self.times[k];
        let ts = [self.times[base], self.times[base + 1], self.times[base + 2]];
        let mut d = CMatrix::zeros(self.dim(), self.dim());
        for j in 0..3 {
            let (a, b) = match j {
                0 => (1, 2),
                1 => (0, 2),
                _ => (0, 1),
            };
            let w = ((x - ts[a]) + (x - ts[b])) / ((ts[j] - ts[a]) * (ts[j] - ts[b]));
            d += &self.unitaries[base + j] * C64::new(w, 0.0);
        }
        d * self.unitaries[k].adjoint() * I
    }
}

fn checked_unitary<F: FrameTransform + ?Sized>(frame: &F, t: f64) -> Result<CMatrix> {
    let r = frame.unitary(t);
    let deviation = unitarity_deviation(&r);
    if !(deviation <= UNITARITY_TOL) {
        return Err(Error::NonUnitary { time: t, deviation });
    }
    Ok(r)
}

/// `R psi`, copying amplitudes untouched wherever the row of `R` is a unit
/// basis row, so sectors the frame leaves alone stay bit-identical.
fn rotate(r: &CMatrix, psi: &CVector) -> CVector {
    let mut out = r * psi;
    let one = C64::new(1.0, 0.0);
    for i in 0..r.nrows() {
        let trivial = (0..r.ncols()).all(|j| r[(i, j)] == if i == j { one } else { C64::new(0.0, 0.0) });
        if trivial {
            out[i] = psi[i];
        }
    }
    out
}

/// Transform states and Hamiltonian snapshots into another frame.
pub fn apply_frame<F: FrameTransform + ?Sized>(trajectory: &Trajectory, frame: &F) -> Result<Trajectory> {
    let n = trajectory.basis().len();
    if frame.dim() != n {
        return Err(Error::BasisMismatch(format!(
            "frame acts on dimension {} but the trajectory has {n}",
            frame.dim()
        )));
    }
    let hams = trajectory.hamiltonians().ok_or(Error::MissingHamiltonian)?;
    let times = trajectory.times();
    let mut states = Vec::with_capacity(times.len());
    let mut new_hams = Vec::with_capacity(times.len());
    let mut rs = Vec::with_capacity(times.len());
    for (k, &t) in times.iter().enumerate() {
        let r = checked_unitary(frame, t)?;
        states.push(rotate(&r, &trajectory.states()[k]));
        new_hams.push(&r * &hams[k] * r.adjoint() + frame.generator(t, Side::Right));
        rs.push(r);
    }
    let left_limits = trajectory
        .boundaries()
        .iter()
        .zip(trajectory.left_limits())
        .map(|(&b, h)| &rs[b] * h * rs[b].adjoint() + frame.generator(times[b], Side::Left))
        .collect();
    trajectory.remapped(states, Some(new_hams), left_limits)
}

/// Phase budgets before and after a change of frame, with the shifts
/// predicted from the frame generator alone.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FrameComparison {
    pub frame_tag: String,
    pub original: PhaseDecomposition,
    pub transformed: PhaseDecomposition,
    /// Change of the total phase, `theta' - theta`.
    pub alpha: f64,
    /// `-i ∫ <psi|R† dR/dt|psi> dt`.
    pub predicted_dyn_shift: f64,
    /// `alpha + i ∫ <psi|R† dR/dt|psi> dt`.
    pub predicted_geo_shift: f64,
}

impl FrameComparison {
    pub fn dyn_shift(&self) -> f64 {
        self.transformed.theta_dyn - self.original.theta_dyn
    }

    pub fn geo_shift(&self) -> f64 {
        self.transformed.theta_geo - self.original.theta_geo
    }

    /// Worst mismatch between measured and predicted shifts.
    pub fn covariance_error(&self) -> f64 {
        (self.dyn_shift() - self.predicted_dyn_shift)
            .abs()
            .max((self.geo_shift() - self.predicted_geo_shift).abs())
    }
}

/// Decompose a trajectory in its own frame and in `frame`.
pub fn compare_frames<F: FrameTransform + ?Sized>(
    trajectory: &Trajectory,
    frame: &F,
) -> Result<(FrameComparison, Trajectory)> {
    let original = phase_series(trajectory)?.final_decomposition();
    let moved = apply_frame(trajectory, frame)?;
    let transformed = phase_series(&moved)?.final_decomposition();

    // <psi|R† dR/dt|psi> = -i <psi'|G|psi'> with G = i dR/dt R†
    let times = moved.times();
    let states = moved.states();
    let mut predicted = 0.0;
    for k in 0..times.len() - 1 {
        let a = expectation(&frame.generator(times[k], Side::Right), &states[k]).re;
        let b = expectation(&frame.generator(times[k + 1], Side::Left), &states[k + 1]).re;
        predicted -= 0.5 * (times[k + 1] - times[k]) * (a + b);
    }
    let alpha = transformed.theta_total - original.theta_total;
    Ok((
        FrameComparison {
            frame_tag: frame.tag(),
            original,
            transformed,
            alpha,
            predicted_dyn_shift: predicted,
            predicted_geo_shift: alpha - predicted,
        },
        moved,
    ))
}
