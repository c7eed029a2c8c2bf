//! Density matrices under the Lindblad equation and the two-sided master
//! equation `d rho/dt = -i (H_A rho - rho H_B) - 1/2 Σ {C†C, rho} + Σ C rho C†`.
//!
//! With `H_A = H_B` the two-sided equation is the Lindblad equation; with
//! `rho(0) = |g><g|` and `H_B = 0` its `g,g` element carries the phase the
//! drive `H_A` puts on `|g>`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigenvalues, max_abs_diff, outer, CMatrix, C64, I};
use crate::parallel::{self, Execution};
use crate::propagator::{Drive, IntegratorConfig, Piece};
use crate::state::{index_of, validate_basis, BasisLabel, CgSample, StateVector};

const HERMITIAN_TOL: f64 = 1e-10;
const TRACE_TOL: f64 = 1e-8;
/// Trace drift allowed over a propagation.
pub const TRACE_DRIFT_TOL: f64 = 1e-7;
pub const POSITIVITY_TOL: f64 = -1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    basis: Vec<BasisLabel>,
    entries: CMatrix,
}

impl DensityMatrix {
    pub fn new(basis: Vec<BasisLabel>, entries: CMatrix) -> Result<Self> {
        validate_basis(&basis)?;
        let n = basis.len();
        if entries.nrows() != n || entries.ncols() != n {
            return Err(Error::BasisMismatch(
                "density matrix dimension differs from basis".into(),
            ));
        }
        if entries.iter().any(|z| !z.is_finite()) {
            return Err(Error::Invalid("density matrix has non-finite entries".into()));
        }
        if max_abs_diff(&entries, &entries.adjoint()) > HERMITIAN_TOL {
            return Err(Error::Invalid("density matrix is not Hermitian".into()));
        }
        let trace = entries.trace();
        if (trace - C64::new(1.0, 0.0)).norm() > TRACE_TOL {
            return Err(Error::Invalid(format!("density matrix trace {trace} is not 1")));
        }
        let low = hermitian_eigenvalues(&entries)[0];
        if low < POSITIVITY_TOL {
            return Err(Error::Positivity {
                time: 0.0,
                eigenvalue: low,
            });
        }
        Ok(DensityMatrix { basis, entries })
    }

    pub fn pure(psi: &StateVector) -> Self {
        DensityMatrix {
            basis: psi.basis().to_vec(),
            entries: outer(psi.amplitudes(), psi.amplitudes()),
        }
    }

    pub fn basis(&self) -> &[BasisLabel] {
        &self.basis
    }

    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }

    pub fn element(&self, row: BasisLabel, col: BasisLabel) -> Result<C64> {
        Ok(self.entries[(index_of(&self.basis, row)?, index_of(&self.basis, col)?)])
    }
}

/// The operand of the two-sided equation; not Hermitian in general.
#[derive(Clone, Debug, PartialEq)]
pub struct TwoSidedMatrix {
    basis: Vec<BasisLabel>,
    entries: CMatrix,
}

impl TwoSidedMatrix {
    pub fn new(basis: Vec<BasisLabel>, entries: CMatrix) -> Result<Self> {
        validate_basis(&basis)?;
        let n = basis.len();
        if entries.nrows() != n || entries.ncols() != n {
            return Err(Error::BasisMismatch("matrix dimension differs from basis".into()));
        }
        if entries.iter().any(|z| !z.is_finite() || z.norm() > 1.0 + 1e-8) {
            return Err(Error::Invalid(
                "two-sided matrix entries must be finite with magnitude <= 1".into(),
            ));
        }
        Ok(TwoSidedMatrix { basis, entries })
    }

    /// `|label><label|`.
    pub fn projector(basis: &[BasisLabel], label: BasisLabel) -> Result<Self> {
        let k = index_of(basis, label)?;
        let mut m = CMatrix::zeros(basis.len(), basis.len());
        m[(k, k)] = C64::new(1.0, 0.0);
        TwoSidedMatrix::new(basis.to_vec(), m)
    }

    pub fn basis(&self) -> &[BasisLabel] {
        &self.basis
    }

    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CollapseOperator {
    matrix: CMatrix,
}

impl CollapseOperator {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() || matrix.iter().any(|z| !z.is_finite()) {
            return Err(Error::Invalid("collapse operator must be square and finite".into()));
        }
        Ok(CollapseOperator { matrix })
    }

    /// `sqrt(rate) |to><from|`.
    pub fn jump(basis: &[BasisLabel], from: BasisLabel, to: BasisLabel, rate: f64) -> Result<Self> {
        if !(rate >= 0.0 && rate.is_finite()) {
            return Err(Error::Domain(format!("rate must be >= 0, got {rate}")));
        }
        let mut m = CMatrix::zeros(basis.len(), basis.len());
        m[(index_of(basis, to)?, index_of(basis, from)?)] = C64::new(rate.sqrt(), 0.0);
        CollapseOperator::new(m)
    }

    /// Spontaneous emission `sqrt(Gamma) |g><e|`.
    pub fn spontaneous_emission(basis: &[BasisLabel], rate: f64) -> Result<Self> {
        Self::jump(basis, BasisLabel::E, BasisLabel::G, rate)
    }

    /// Pure dephasing `sqrt(gamma) |e><e|`.
    pub fn dephasing(basis: &[BasisLabel], rate: f64) -> Result<Self> {
        Self::jump(basis, BasisLabel::E, BasisLabel::E, rate)
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }
}

/// Sampled matrices on a time grid.
#[derive(Clone, Debug)]
pub struct MatrixTrajectory {
    pub basis: Vec<BasisLabel>,
    pub times: Vec<f64>,
    pub matrices: Vec<CMatrix>,
    /// Largest anti-Hermitian part removed by symmetrization (Lindblad only).
    pub hermiticity_drift: f64,
    pub trace_drift: f64,
}

impl MatrixTrajectory {
    pub fn element(&self, row: BasisLabel, col: BasisLabel) -> Result<Vec<C64>> {
        let (r, c) = (index_of(&self.basis, row)?, index_of(&self.basis, col)?);
        Ok(self.matrices.iter().map(|m| m[(r, c)]).collect())
    }

    pub fn last(&self) -> &CMatrix {
        &self.matrices[self.matrices.len() - 1]
    }

    /// The `g,g` element in the layout of the ground-amplitude record, with
    /// `magnitude = |rho_gg|`.
    pub fn gg_record(&self) -> Result<Vec<CgSample>> {
        Ok(self
            .times
            .iter()
            .zip(self.element(BasisLabel::G, BasisLabel::G)?)
            .map(|(&time, z)| CgSample {
                time,
                re: z.re,
                im: z.im,
                magnitude: z.norm(),
            })
            .collect())
    }
}

struct Generator {
    decay: CMatrix,
    jumps: Vec<CMatrix>,
}

impl Generator {
    fn new(n: usize, collapse: &[CollapseOperator]) -> Result<Self> {
        let mut decay = CMatrix::zeros(n, n);
        for c in collapse {
            if c.matrix.nrows() != n {
                return Err(Error::BasisMismatch(
                    "collapse operator dimension differs from basis".into(),
                ));
            }
            decay += c.matrix.adjoint() * &c.matrix * C64::new(0.5, 0.0);
        }
        Ok(Generator {
            decay,
            jumps: collapse.iter().map(|c| c.matrix.clone()).collect(),
        })
    }

    fn rate(&self) -> f64 {
        2.0 * crate::linalg::rate_bound(&self.decay)
    }

    fn apply(&self, ha: &CMatrix, hb: &CMatrix, rho: &CMatrix) -> CMatrix {
        let mut out = (ha * rho - rho * hb) * (-I) - &self.decay * rho - rho * &self.decay;
        for c in &self.jumps {
            out += c * rho * c.adjoint();
        }
        out
    }

    fn rk4(&self, h: [(&CMatrix, &CMatrix); 3], rho: &CMatrix, dt: f64) -> CMatrix {
        let half = C64::new(dt / 2.0, 0.0);
        let k1 = self.apply(h[0].0, h[0].1, rho);
        let k2 = self.apply(h[1].0, h[1].1, &(rho + &k1 * half));
        let k3 = self.apply(h[1].0, h[1].1, &(rho + &k2 * half));
        let k4 = self.apply(h[2].0, h[2].1, &(rho + &k3 * C64::new(dt, 0.0)));
        rho + (k1 + (k2 + k3) * C64::new(2.0, 0.0) + k4) * C64::new(dt / 6.0, 0.0)
    }
}

fn active_piece(pieces: &[Piece], a: f64) -> usize {
    pieces.iter().rposition(|p| p.start <= a).unwrap_or(0)
}

/// Shared RK4 core; `hermitian` switches on symmetrization and the
/// positivity check.
fn integrate(
    ha: &dyn Drive,
    hb: Option<&dyn Drive>,
    collapse: &[CollapseOperator],
    basis: &[BasisLabel],
    rho0: CMatrix,
    cfg: &IntegratorConfig,
    hermitian: bool,
) -> Result<MatrixTrajectory> {
    cfg.validate()?;
    let n = basis.len();
    if ha.basis() != basis || hb.is_some_and(|b| b.basis() != basis) {
        return Err(Error::BasisMismatch("drive basis differs from the matrix basis".into()));
    }
    let pa = ha.pieces();
    if pa.is_empty() {
        return Err(Error::EmptySchedule);
    }
    let pb = hb.map(|b| b.pieces()).unwrap_or_default();
    let duration = pa[pa.len() - 1].end;
    if let Some(b) = hb {
        if (b.duration() - duration).abs() > 1e-9 * duration.max(1.0) {
            return Err(Error::Invalid("left and right drives differ in duration".into()));
        }
    }
    let generator = Generator::new(n, collapse)?;
    let zero = CMatrix::zeros(n, n);
    let h_b = |t: f64, index: usize| hb.map_or_else(|| zero.clone(), |b| b.hamiltonian(index, t));

    let mut cuts: Vec<f64> = pa.iter().map(|p| p.start).chain(pb.iter().map(|p| p.start)).collect();
    cuts.push(duration);
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-12);

    let trace0 = rho0.trace();
    let mut rho = rho0;
    let mut times = vec![cuts[0]];
    let mut matrices = vec![rho.clone()];
    let mut herm_drift: f64 = 0.0;
    let mut trace_drift: f64 = 0.0;
    for w in cuts.windows(2) {
        let (start, end) = (w[0], w[1]);
        let ia = active_piece(&pa, start);
        let ib = if pb.is_empty() { 0 } else { active_piece(&pb, start) };
        let rate = pa[ia].rate.max(pb.get(ib).map_or(0.0, |p| p.rate)) + generator.rate();
        let steps = cfg.steps_for(end - start, rate);
        let dt = (end - start) / steps as f64;
        for j in 0..steps {
            let t0 = start + j as f64 * dt;
            let t1 = if j + 1 == steps {
                end
            } else {
                start + (j + 1) as f64 * dt
            };
            let tm = 0.5 * (t0 + t1);
            let a = [ha.hamiltonian(ia, t0), ha.hamiltonian(ia, tm), ha.hamiltonian(ia, t1)];
            let b = [h_b(t0, ib), h_b(tm, ib), h_b(t1, ib)];
            rho = generator.rk4([(&a[0], &b[0]), (&a[1], &b[1]), (&a[2], &b[2])], &rho, t1 - t0);
            if hermitian {
                let sym = (&rho + rho.adjoint()) * C64::new(0.5, 0.0);
                herm_drift = herm_drift.max(max_abs_diff(&rho, &sym));
                rho = sym;
                let low = hermitian_eigenvalues(&rho)[0];
                if low < POSITIVITY_TOL {
                    return Err(Error::Positivity {
                        time: t1,
                        eigenvalue: low,
                    });
                }
                trace_drift = trace_drift.max((rho.trace() - trace0).norm());
            }
            times.push(t1);
            matrices.push(rho.clone());
        }
    }
    if hermitian && trace_drift > TRACE_DRIFT_TOL {
        return Err(Error::NormDrift { drift: trace_drift });
    }
    Ok(MatrixTrajectory {
        basis: basis.to_vec(),
        times,
        matrices,
        hermiticity_drift: herm_drift,
        trace_drift,
    })
}

pub fn propagate_lindblad(
    h: &dyn Drive,
    collapse: &[CollapseOperator],
    rho0: &DensityMatrix,
    cfg: &IntegratorConfig,
) -> Result<MatrixTrajectory> {
    integrate(h, Some(h), collapse, &rho0.basis, rho0.entries.clone(), cfg, true)
}

/// `hb = None` is the undriven reference with zero Hamiltonian.
pub fn propagate_two_sided(
    ha: &dyn Drive,
    hb: Option<&dyn Drive>,
    collapse: &[CollapseOperator],
    rho0: &TwoSidedMatrix,
    cfg: &IntegratorConfig,
) -> Result<MatrixTrajectory> {
    integrate(ha, hb, collapse, &rho0.basis, rho0.entries.clone(), cfg, false)
}

/// Survival and phase of the `g,g` coherence at the end.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DissipativePhase {
    pub magnitude: f64,
    pub phase: f64,
}

pub fn dissipative_phase_report(
    ha: &dyn Drive,
    hb: Option<&dyn Drive>,
    collapse: &[CollapseOperator],
    cfg: &IntegratorConfig,
) -> Result<DissipativePhase> {
    let basis = ha.basis();
    let rho0 = TwoSidedMatrix::projector(&basis, BasisLabel::G)?;
    let run = propagate_two_sided(ha, hb, collapse, &rho0, cfg)?;
    let g = index_of(&basis, BasisLabel::G)?;
    let z = run.last()[(g, g)];
    Ok(DissipativePhase {
        magnitude: z.norm(),
        phase: z.arg(),
    })
}

/// Coherence of `H_A` against the undriven reference for a set of
/// spontaneous-emission rates.
pub fn decay_sweep(
    ha: &dyn Drive,
    rates: &[f64],
    cfg: &IntegratorConfig,
    exec: Execution,
) -> Result<Vec<DissipativePhase>> {
    let basis = ha.basis();
    parallel::try_map(exec, rates, |&rate| {
        let c = CollapseOperator::spontaneous_emission(&basis, rate)?;
        dissipative_phase_report(ha, None, &[c], cfg)
    })
}
