use serde::{Deserialize, Serialize};

use super::{Drive, Piece};
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, C64};
use crate::state::{BasisLabel, TWO_LEVEL};

/// Rotating-frame two-level Hamiltonian in `{g, e}` ordering:
/// `H = Delta |e><e| + (Omega/2)(e^{i phi} |e><g| + h.c.)`.
pub fn two_level_hamiltonian(omega: f64, phase: f64, detuning: f64) -> CMatrix {
    let coupling = C64::from_polar(omega / 2.0, phase);
    CMatrix::from_row_slice(
        2,
        2,
        &[C64::new(0.0, 0.0), coupling.conj(), coupling, C64::new(detuning, 0.0)],
    )
}

/// How the Rabi frequency and detuning vary inside a segment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Envelope {
    Constant {
        omega: f64,
        detuning: f64,
    },
    /// Knots at times relative to the segment start, linearly interpolated.
    Tabulated {
        times: Vec<f64>,
        omega: Vec<f64>,
        detuning: Vec<f64>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlSegment {
    pub envelope: Envelope,
    /// Drive phase, constant across the segment.
    pub phase: f64,
    pub duration: f64,
}

impl ControlSegment {
    pub fn constant(omega: f64, phase: f64, detuning: f64, duration: f64) -> Result<Self> {
        let seg = ControlSegment {
            envelope: Envelope::Constant { omega, detuning },
            phase,
            duration,
        };
        seg.validate()?;
        Ok(seg)
    }

    /// Segment spanning `times[0] = 0 .. times[last]` with interpolated controls.
    pub fn tabulated(phase: f64, times: Vec<f64>, omega: Vec<f64>, detuning: Vec<f64>) -> Result<Self> {
        let duration = times.last().copied().unwrap_or(0.0);
        let seg = ControlSegment {
            envelope: Envelope::Tabulated { times, omega, detuning },
            phase,
            duration,
        };
        seg.validate()?;
        Ok(seg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(Error::Domain(format!(
                "segment duration must be > 0, got {}",
                self.duration
            )));
        }
        if !self.phase.is_finite() {
            return Err(Error::Domain("non-finite drive phase".into()));
        }
        match &self.envelope {
            Envelope::Constant { omega, detuning } => {
                if !(*omega >= 0.0 && omega.is_finite()) || !detuning.is_finite() {
                    return Err(Error::Domain(format!(
                        "invalid constant controls omega={omega}, detuning={detuning}"
                    )));
                }
            }
            Envelope::Tabulated { times, omega, detuning } => {
                if times.len() < 2 || times.len() != omega.len() || times.len() != detuning.len() {
                    return Err(Error::Domain(
                        "tabulated envelope needs matching tables of >= 2 knots".into(),
                    ));
                }
                if times[0] != 0.0 || times.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(Error::Domain("tabulated knots must start at 0 and increase".into()));
                }
                if (times[times.len() - 1] - self.duration).abs() > 1e-12 * self.duration.max(1.0) {
                    return Err(Error::Domain("last knot must equal the segment duration".into()));
                }
                if omega.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
                    return Err(Error::Domain("tabulated Rabi frequency must be >= 0".into()));
                }
                if detuning.iter().any(|d| !d.is_finite()) {
                    return Err(Error::Domain("non-finite tabulated detuning".into()));
                }
            }
        }
        Ok(())
    }

    fn locate(times: &[f64], tau: f64) -> (usize, f64) {
        let last = times.len() - 2;
        let k = match times.binary_search_by(|x| x.partial_cmp(&tau).unwrap()) {
            Ok(k) => k.min(last),
            Err(k) => k.saturating_sub(1).min(last),
        };
        let w = ((tau - times[k]) / (times[k + 1] - times[k])).clamp(0.0, 1.0);
        (k, w)
    }

    /// Rabi frequency at time `tau` after the segment start.
    pub fn omega_at(&self, tau: f64) -> f64 {
        match &self.envelope {
            Envelope::Constant { omega, .. } => *omega,
            Envelope::Tabulated { times, omega, .. } => {
                let (k, w) = Self::locate(times, tau);
                omega[k] + w * (omega[k + 1] - omega[k])
            }
        }
    }

    pub fn detuning_at(&self, tau: f64) -> f64 {
        match &self.envelope {
            Envelope::Constant { detuning, .. } => *detuning,
            Envelope::Tabulated { times, detuning, .. } => {
                let (k, w) = Self::locate(times, tau);
                detuning[k] + w * (detuning[k + 1] - detuning[k])
            }
        }
    }

    /// Time derivative of the Rabi frequency (slope of the enclosing interval).
    pub fn omega_rate_at(&self, tau: f64) -> f64 {
        match &self.envelope {
            Envelope::Constant { .. } => 0.0,
            Envelope::Tabulated { times, omega, .. } => {
                let (k, _) = Self::locate(times, tau);
                (omega[k + 1] - omega[k]) / (times[k + 1] - times[k])
            }
        }
    }

    /// `∫_0^tau Delta dt'`.
    pub fn accumulated_detuning(&self, tau: f64) -> f64 {
        match &self.envelope {
            Envelope::Constant { detuning, .. } => detuning * tau,
            Envelope::Tabulated { times, detuning, .. } => {
                let (k, _) = Self::locate(times, tau);
                let mut acc = 0.0;
                for j in 0..k {
                    acc += 0.5 * (times[j + 1] - times[j]) * (detuning[j] + detuning[j + 1]);
                }
                let end = self.detuning_at(tau);
                acc + 0.5 * (tau - times[k]) * (detuning[k] + end)
            }
        }
    }

    /// Largest generalized Rabi frequency reached in the segment.
    pub fn max_rabi(&self) -> f64 {
        match &self.envelope {
            Envelope::Constant { omega, detuning } => omega.hypot(*detuning),
            Envelope::Tabulated { omega, detuning, .. } => {
                omega.iter().zip(detuning).map(|(w, d)| w.hypot(*d)).fold(0.0, f64::max)
            }
        }
    }

    pub fn max_omega(&self) -> f64 {
        match &self.envelope {
            Envelope::Constant { omega, .. } => *omega,
            Envelope::Tabulated { omega, .. } => omega.iter().copied().fold(0.0, f64::max),
        }
    }

    pub fn max_abs_detuning(&self) -> f64 {
        match &self.envelope {
            Envelope::Constant { detuning, .. } => detuning.abs(),
            Envelope::Tabulated { detuning, .. } => detuning.iter().map(|d| d.abs()).fold(0.0, f64::max),
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.envelope, Envelope::Constant { .. })
    }

    fn scaled(&self, factor: f64) -> ControlSegment {
        let envelope = match &self.envelope {
            Envelope::Constant { omega, detuning } => Envelope::Constant {
                omega: omega * factor,
                detuning: detuning * factor,
            },
            Envelope::Tabulated { times, omega, detuning } => Envelope::Tabulated {
                times: times.iter().map(|t| t / factor).collect(),
                omega: omega.iter().map(|w| w * factor).collect(),
                detuning: detuning.iter().map(|d| d * factor).collect(),
            },
        };
        ControlSegment {
            envelope,
            phase: self.phase,
            duration: self.duration / factor,
        }
    }
}

/// Ordered piecewise controls for the two-level Hamiltonian.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulseSchedule {
    segments: Vec<ControlSegment>,
}

impl PulseSchedule {
    pub fn new(segments: Vec<ControlSegment>) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::EmptySchedule);
        }
        for s in &segments {
            s.validate()?;
        }
        Ok(PulseSchedule { segments })
    }

    pub fn segments(&self) -> &[ControlSegment] {
        &self.segments
    }

    pub fn total_duration(&self) -> f64 {
        self.segments.iter().map(|s| s.duration).sum()
    }

    /// Absolute start time of every segment.
    pub fn starts(&self) -> Vec<f64> {
        let mut acc = 0.0;
        self.segments
            .iter()
            .map(|s| {
                let t = acc;
                acc += s.duration;
                t
            })
            .collect()
    }

    /// Index of the segment active at `t` (right-continuous, clamped).
    pub fn segment_at(&self, t: f64) -> usize {
        let starts = self.starts();
        starts.iter().rposition(|&s| s <= t).unwrap_or(0)
    }

    /// `(Omega, phi, Delta)` of segment `index` at absolute time `t`.
    pub fn controls_in(&self, index: usize, t: f64) -> (f64, f64, f64) {
        let start: f64 = self.segments[..index].iter().map(|s| s.duration).sum();
        let seg = &self.segments[index];
        let tau = (t - start).clamp(0.0, seg.duration);
        (seg.omega_at(tau), seg.phase, seg.detuning_at(tau))
    }

    pub fn controls_at(&self, t: f64) -> (f64, f64, f64) {
        self.controls_in(self.segment_at(t), t)
    }

    /// `∫_0^t Delta dt'` across segments.
    pub fn accumulated_detuning(&self, t: f64) -> f64 {
        let mut acc = 0.0;
        let mut start = 0.0;
        for seg in &self.segments {
            if t <= start + seg.duration {
                return acc + seg.accumulated_detuning((t - start).max(0.0));
            }
            acc += seg.accumulated_detuning(seg.duration);
            start += seg.duration;
        }
        acc
    }

    pub fn max_omega(&self) -> f64 {
        self.segments.iter().map(|s| s.max_omega()).fold(0.0, f64::max)
    }

    pub fn max_abs_detuning(&self) -> f64 {
        self.segments.iter().map(|s| s.max_abs_detuning()).fold(0.0, f64::max)
    }

    /// Multiply every Rabi frequency and detuning by `factor` and divide
    /// every duration by it.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(Error::Domain(format!("scale factor must be > 0, got {factor}")));
        }
        PulseSchedule::new(self.segments.iter().map(|s| s.scaled(factor)).collect())
    }
}

impl Drive for PulseSchedule {
    fn basis(&self) -> Vec<BasisLabel> {
        TWO_LEVEL.to_vec()
    }

    fn pieces(&self) -> Vec<Piece> {
        self.starts()
            .into_iter()
            .zip(&self.segments)
            .map(|(start, s)| Piece {
                start,
                end: start + s.duration,
                rate: s.max_rabi(),
                constant: s.is_constant(),
            })
            .collect()
    }

    fn hamiltonian(&self, index: usize, t: f64) -> CMatrix {
        let (omega, phase, detuning) = self.controls_in(index, t);
        two_level_hamiltonian(omega, phase, detuning)
    }

    fn duration(&self) -> f64 {
        self.total_duration()
    }
}
