//! Bases, pure states, Bloch vectors and sampled trajectories.

use std::fmt;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, CVector, C64};

const NORM_TOL: f64 = 1e-10;
const TRAJECTORY_NORM_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BasisLabel {
    G,
    E,
    A,
    Zero,
    One,
    P,
    U,
    Bright,
    Dark,
}

impl BasisLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            BasisLabel::G => "g",
            BasisLabel::E => "e",
            BasisLabel::A => "a",
            BasisLabel::Zero => "0",
            BasisLabel::One => "1",
            BasisLabel::P => "p",
            BasisLabel::U => "u",
            BasisLabel::Bright => "bright",
            BasisLabel::Dark => "dark",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "g" => BasisLabel::G,
            "e" => BasisLabel::E,
            "a" => BasisLabel::A,
            "0" => BasisLabel::Zero,
            "1" => BasisLabel::One,
            "p" => BasisLabel::P,
            "u" => BasisLabel::U,
            "bright" => BasisLabel::Bright,
            "dark" => BasisLabel::Dark,
            _ => return None,
        })
    }
}

impl fmt::Display for BasisLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Two-level ordering used by every `{g, e}` routine.
pub const TWO_LEVEL: [BasisLabel; 2] = [BasisLabel::G, BasisLabel::E];

pub(crate) fn validate_basis(basis: &[BasisLabel]) -> Result<()> {
    if basis.is_empty() {
        return Err(Error::BasisMismatch("empty basis".into()));
    }
    for (i, a) in basis.iter().enumerate() {
        if basis[..i].contains(a) {
            return Err(Error::BasisMismatch(format!("label {a} repeated")));
        }
    }
    Ok(())
}

pub(crate) fn index_of(basis: &[BasisLabel], label: BasisLabel) -> Result<usize> {
    basis
        .iter()
        .position(|&b| b == label)
        .ok_or_else(|| Error::BasisMismatch(format!("basis has no |{label}> component")))
}

/// A normalized pure state over an ordered basis.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    basis: Vec<BasisLabel>,
    amplitudes: CVector,
}

impl StateVector {
    pub fn new(basis: Vec<BasisLabel>, amplitudes: Vec<C64>) -> Result<Self> {
        Self::from_vector(basis, CVector::from_vec(amplitudes))
    }

    pub fn from_vector(basis: Vec<BasisLabel>, amplitudes: CVector) -> Result<Self> {
        validate_basis(&basis)?;
        if basis.len() != amplitudes.len() {
            return Err(Error::BasisMismatch(format!(
                "{} labels for {} amplitudes",
                basis.len(),
                amplitudes.len()
            )));
        }
        if amplitudes.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Invalid("non-finite amplitude".into()));
        }
        let norm = amplitudes.norm();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::Invalid(format!("state norm {norm} is not 1")));
        }
        Ok(StateVector { basis, amplitudes })
    }

    /// Basis state `|label>` over `basis`.
    pub fn basis_state(basis: &[BasisLabel], label: BasisLabel) -> Result<Self> {
        let k = index_of(basis, label)?;
        let mut amps = CVector::zeros(basis.len());
        amps[k] = C64::new(1.0, 0.0);
        Self::from_vector(basis.to_vec(), amps)
    }

    /// `|g>` of the two-level system.
    pub fn ground() -> Self {
        Self::two_level(C64::new(1.0, 0.0), C64::new(0.0, 0.0)).expect("unit state")
    }

    pub fn two_level(cg: C64, ce: C64) -> Result<Self> {
        Self::new(TWO_LEVEL.to_vec(), vec![cg, ce])
    }

    pub fn basis(&self) -> &[BasisLabel] {
        &self.basis
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn amplitude(&self, label: BasisLabel) -> Result<C64> {
        Ok(self.amplitudes[index_of(&self.basis, label)?])
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    /// `<self|other>`.
    pub fn overlap(&self, other: &StateVector) -> Result<C64> {
        if self.basis != other.basis {
            return Err(Error::BasisMismatch("overlap across different bases".into()));
        }
        Ok(self.amplitudes.dotc(&other.amplitudes))
    }
}

/// Bloch vector with `|g>` at the south pole.
///
/// `x + i y = 2 c_g c_e*` and `z = |c_e|^2 - |c_g|^2`; with this orientation the
/// vector precesses as `dr/dt = W x r` about the torque of [`TorqueVector`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlochVector {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl BlochVector {
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        if !(x.is_finite() && y.is_finite() && z.is_finite()) {
            return Err(Error::Invalid("non-finite Bloch vector".into()));
        }
        if x * x + y * y + z * z > 1.0 + 1e-9 {
            return Err(Error::Invalid("Bloch vector outside the unit ball".into()));
        }
        Ok(BlochVector { x, y, z })
    }

    pub fn from_amplitudes(cg: C64, ce: C64) -> Self {
        let coherence = cg * ce.conj() * 2.0;
        BlochVector {
            x: coherence.re,
            y: coherence.im,
            z: ce.norm_sqr() - cg.norm_sqr(),
        }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn length(self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }
}

pub fn bloch_from_state(psi: &StateVector) -> Result<BlochVector> {
    if psi.dim() != 2 {
        return Err(Error::BasisMismatch(format!(
            "Bloch vector needs a two-level state, got dimension {}",
            psi.dim()
        )));
    }
    let cg = psi.amplitude(BasisLabel::G)?;
    let ce = psi.amplitude(BasisLabel::E)?;
    Ok(BlochVector::from_amplitudes(cg, ce))
}

/// Precession axis `W = [Omega cos(phi), -Omega sin(phi), Delta]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TorqueVector {
    pub wx: f64,
    pub wy: f64,
    pub wz: f64,
}

impl TorqueVector {
    pub fn to_array(self) -> [f64; 3] {
        [self.wx, self.wy, self.wz]
    }

    pub fn cross(self, r: BlochVector) -> [f64; 3] {
        [
            self.wy * r.z - self.wz * r.y,
            self.wz * r.x - self.wx * r.z,
            self.wx * r.y - self.wy * r.x,
        ]
    }
}

pub fn torque_vector(omega: f64, phase: f64, detuning: f64) -> Result<TorqueVector> {
    if !(omega >= 0.0) || !omega.is_finite() {
        return Err(Error::Domain(format!("Rabi frequency must be >= 0, got {omega}")));
    }
    if !phase.is_finite() || !detuning.is_finite() {
        return Err(Error::Domain("non-finite control".into()));
    }
    Ok(TorqueVector {
        wx: omega * phase.cos(),
        wy: -omega * phase.sin(),
        wz: detuning,
    })
}

/// Time-sampled pure-state evolution.
///
/// Samples are dense. Hamiltonian snapshots are stored as right limits; at
/// the first sample of every piece after the first, the left limit (the
/// generator of the previous piece) is kept in `left_limits` so that
/// integrals over piecewise drives stay exact.
#[derive(Clone, Debug)]
pub struct Trajectory {
    basis: Vec<BasisLabel>,
    times: Vec<f64>,
    states: Vec<CVector>,
    hamiltonians: Option<Vec<CMatrix>>,
    boundaries: Vec<usize>,
    left_limits: Vec<CMatrix>,
}

impl Trajectory {
    pub fn new(
        basis: Vec<BasisLabel>,
        times: Vec<f64>,
        states: Vec<CVector>,
        hamiltonians: Option<Vec<CMatrix>>,
    ) -> Result<Self> {
        Self::with_boundaries(basis, times, states, hamiltonians, Vec::new(), Vec::new())
    }

    pub fn with_boundaries(
        basis: Vec<BasisLabel>,
        times: Vec<f64>,
        states: Vec<CVector>,
        hamiltonians: Option<Vec<CMatrix>>,
        boundaries: Vec<usize>,
        left_limits: Vec<CMatrix>,
    ) -> Result<Self> {
        validate_basis(&basis)?;
        if times.is_empty() || times.len() != states.len() {
            return Err(Error::Invalid(format!(
                "{} times for {} states",
                times.len(),
                states.len()
            )));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Invalid("sample times must increase strictly".into()));
        }
        let n = basis.len();
        for (t, s) in times.iter().zip(&states) {
            if s.len() != n {
                return Err(Error::BasisMismatch("state dimension differs from basis".into()));
            }
            let drift = (s.norm() - 1.0).abs();
            if !(drift <= TRAJECTORY_NORM_TOL) {
                return Err(Error::Invalid(format!("state at t = {t} has norm drift {drift:e}")));
            }
        }
        if let Some(hs) = &hamiltonians {
            if hs.len() != times.len() || hs.iter().any(|h| h.nrows() != n || h.ncols() != n) {
                return Err(Error::Invalid("Hamiltonian snapshots do not match samples".into()));
            }
        }
        if boundaries.len() != left_limits.len()
            || boundaries.windows(2).any(|w| w[1] <= w[0])
            || boundaries.iter().any(|&b| b == 0 || b >= times.len())
        {
            return Err(Error::Invalid("malformed piece boundaries".into()));
        }
        Ok(Trajectory {
            basis,
            times,
            states,
            hamiltonians,
            boundaries,
            left_limits,
        })
    }

    pub fn basis(&self) -> &[BasisLabel] {
        &self.basis
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[CVector] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn state(&self, k: usize) -> StateVector {
        StateVector {
            basis: self.basis.clone(),
            amplitudes: self.states[k].clone(),
        }
    }

    pub fn initial(&self) -> StateVector {
        self.state(0)
    }

    pub fn last(&self) -> StateVector {
        self.state(self.len() - 1)
    }

    pub fn hamiltonians(&self) -> Option<&[CMatrix]> {
        self.hamiltonians.as_deref()
    }

    /// Sample indices at which a new piece starts.
    pub fn boundaries(&self) -> &[usize] {
        &self.boundaries
    }

    pub fn left_limits(&self) -> &[CMatrix] {
        &self.left_limits
    }

    /// Inclusive sample ranges `(first, last)` of the smooth pieces.
    pub fn pieces(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.boundaries.len() + 1);
        let mut start = 0;
        for &b in &self.boundaries {
            out.push((start, b));
            start = b;
        }
        out.push((start, self.len() - 1));
        out
    }

    /// Hamiltonian acting just before sample `k` (left limit).
    pub fn hamiltonian_before(&self, k: usize) -> Option<&CMatrix> {
        let hs = self.hamiltonians.as_ref()?;
        match self.boundaries.binary_search(&k) {
            Ok(pos) => Some(&self.left_limits[pos]),
            Err(_) => Some(&hs[k]),
        }
    }

    pub fn component(&self, label: BasisLabel) -> Result<Vec<C64>> {
        let k = index_of(&self.basis, label)?;
        Ok(self.states.iter().map(|s| s[k]).collect())
    }

    pub fn population(&self, label: BasisLabel) -> Result<Vec<f64>> {
        Ok(self.component(label)?.into_iter().map(|z| z.norm_sqr()).collect())
    }

    pub fn bloch_path(&self) -> Result<Vec<BlochVector>> {
        if self.basis.len() != 2 {
            return Err(Error::BasisMismatch("Bloch path needs a two-level trajectory".into()));
        }
        let g = index_of(&self.basis, BasisLabel::G)?;
        let e = index_of(&self.basis, BasisLabel::E)?;
        Ok(self
            .states
            .iter()
            .map(|s| BlochVector::from_amplitudes(s[g], s[e]))
            .collect())
    }

    pub fn max_norm_drift(&self) -> f64 {
        self.states.iter().map(|s| (s.norm() - 1.0).abs()).fold(0.0, f64::max)
    }

    /// Replace states and snapshots, keeping the sample grid and piece layout.
    pub(crate) fn remapped(
        &self,
        states: Vec<CVector>,
        hamiltonians: Option<Vec<CMatrix>>,
        left_limits: Vec<CMatrix>,
    ) -> Result<Trajectory> {
        Trajectory::with_boundaries(
            self.basis.clone(),
            self.times.clone(),
            states,
            hamiltonians,
            self.boundaries.clone(),
            left_limits,
        )
    }
}

/// One point of the complex-plane ground-amplitude plot.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CgSample {
    pub time: f64,
    pub re: f64,
    pub im: f64,
    /// Amplitude outside `|g>`: `|c_e|` for two levels, `|c_p|` when the
    /// auxiliary direction stays empty.
    pub magnitude: f64,
}

impl CgSample {
    pub fn amplitude(&self) -> C64 {
        C64::new(self.re, self.im)
    }
}

pub fn cg_record(trajectory: &Trajectory) -> Result<Vec<CgSample>> {
    let g = index_of(trajectory.basis(), BasisLabel::G)?;
    Ok(trajectory
        .times()
        .iter()
        .zip(trajectory.states())
        .map(|(&t, s)| {
            let cg = s[g];
            CgSample {
                time: t,
                re: cg.re,
                im: cg.im,
                magnitude: (1.0 - cg.norm_sqr()).max(0.0).sqrt(),
            }
        })
        .collect())
}

/// Serializable view of a trajectory: times, amplitudes and, for two
/// levels, the Bloch vector.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryRecord {
    pub basis: Vec<BasisLabel>,
    pub times: Vec<f64>,
    pub amplitudes: Vec<Vec<C64>>,
    pub bloch: Option<Vec<BlochVector>>,
}

impl TrajectoryRecord {
    pub fn from_trajectory(trajectory: &Trajectory) -> Self {
        let bloch = trajectory.bloch_path().ok();
        TrajectoryRecord {
            basis: trajectory.basis().to_vec(),
            times: trajectory.times().to_vec(),
            amplitudes: trajectory
                .states()
                .iter()
                .map(|s| s.iter().copied().collect())
                .collect(),
            bloch,
        }
    }

    pub fn header(&self) -> Vec<String> {
        let mut cols = vec!["time".to_string()];
        for b in &self.basis {
            cols.push(format!("re_{b}"));
            cols.push(format!("im_{b}"));
        }
        if self.bloch.is_some() {
            cols.extend(["bloch_x", "bloch_y", "bloch_z"].map(String::from));
        }
        cols
    }

    fn row(&self, k: usize) -> Vec<f64> {
        let mut row = vec![self.times[k]];
        for z in &self.amplitudes[k] {
            row.push(z.re);
            row.push(z.im);
        }
        if let Some(b) = &self.bloch {
            row.extend(b[k].to_array());
        }
        row
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(self.header())?;
        for k in 0..self.times.len() {
            w.write_record(self.row(k).iter().map(|v| v.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let header = r.headers()?.clone();
        let cols: Vec<&str> = header.iter().collect();
        if cols.first() != Some(&"time") {
            return Err(Error::Invalid("first column must be `time`".into()));
        }
        let mut basis = Vec::new();
        let mut k = 1;
        while k + 1 < cols.len() && cols[k].starts_with("re_") {
            let label = &cols[k][3..];
            if cols[k + 1] != format!("im_{label}") {
                return Err(Error::Invalid(format!("expected im_{label} after re_{label}")));
            }
            basis.push(BasisLabel::parse(label).ok_or_else(|| Error::Invalid(format!("unknown basis label {label}")))?);
            k += 2;
        }
        let has_bloch = match &cols[k..] {
            [] => false,
            ["bloch_x", "bloch_y", "bloch_z"] => true,
            other => return Err(Error::Invalid(format!("unexpected columns {other:?}"))),
        };
        let mut rec = TrajectoryRecord {
            basis,
            times: Vec::new(),
            amplitudes: Vec::new(),
            bloch: has_bloch.then(Vec::new),
        };
        for row in r.records() {
            let row = row?;
            let vals = row
                .iter()
                .map(|s| s.parse::<f64>().map_err(|e| Error::Invalid(format!("{s}: {e}"))))
                .collect::<Result<Vec<f64>>>()?;
            if vals.len() != cols.len() {
                return Err(Error::Invalid("ragged CSV row".into()));
            }
            rec.times.push(vals[0]);
            rec.amplitudes.push(
                vals[1..1 + 2 * rec.basis.len()]
                    .chunks(2)
                    .map(|p| C64::new(p[0], p[1]))
                    .collect(),
            );
            if let Some(b) = rec.bloch.as_mut() {
                let n = vals.len();
                b.push(BlochVector {
                    x: vals[n - 3],
                    y: vals[n - 2],
                    z: vals[n - 1],
                });
            }
        }
        Ok(rec)
    }

    /// JSON mirror of the CSV: one object per sample with the same field names.
    pub fn to_json(&self) -> serde_json::Value {
        let header = self.header();
        let rows = (0..self.times.len())
            .map(|k| {
                let map = header
                    .iter()
                    .zip(self.row(k))
                    .map(|(h, v)| (h.clone(), serde_json::json!(v)))
                    .collect::<serde_json::Map<_, _>>();
                serde_json::Value::Object(map)
            })
            .collect();
        serde_json::Value::Array(rows)
    }
}

pub fn write_cg_csv<W: Write>(record: &[CgSample], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["time", "re", "im", "magnitude"])?;
    for s in record {
        w.write_record([s.time, s.re, s.im, s.magnitude].map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_cg_csv<R: Read>(input: R) -> Result<Vec<CgSample>> {
    let mut r = csv::Reader::from_reader(input);
    let mut out = Vec::new();
    for row in r.deserialize() {
        out.push(row?);
    }
    Ok(out)
}
