//! Runs a validated plan entirely in memory. Files are only written once
//! every result is in hand.

use std::f64::consts::PI;

use groundphase::lambda::{controls_for_phase, decompose_gate, simulate_lambda, tripod_gate, LAMBDA_BASIS};
use groundphase::linalg::wrap_angle;
use groundphase::open::{propagate_two_sided, CollapseOperator, TwoSidedMatrix};
use groundphase::phase::{
    area_phase, compare_frames, dynamic_phase, final_phase, phase_series, solid_angle, AtomicFrame, EnergyShift,
    FrameTransform, PhaseDecomposition, PhaseReport,
};
use groundphase::schemes::{compare_schemes, run_scheme, write_metrics_csv, ComparisonSetup, SchemeKind, SchemeRun};
use groundphase::state::{cg_record, write_cg_csv, CgSample, TrajectoryRecord, TWO_LEVEL};
use groundphase::{BasisLabel, Error, Execution, IntegratorConfig, Trajectory};
use serde_json::{json, Value};

use crate::config::{Format, FrameChoice, Plan, Task};
use crate::svg::{render_bloch, render_cg_disc, render_panels, Panel};

/// Why a run stopped.
#[derive(Debug)]
pub enum Failure {
    /// Inputs the numerics reject (unreachable targets, bad domains).
    Validation(String),
    /// The numerics themselves gave up.
    Numerical(String),
}

fn lift(context: &str) -> impl Fn(Error) -> Failure + '_ {
    move |e| {
        let msg = format!("{context}: {e}");
        if e.is_numerical() {
            Failure::Numerical(msg)
        } else {
            Failure::Validation(msg)
        }
    }
}

type Run<T> = Result<T, Failure>;

pub struct Outputs {
    pub files: Vec<(String, Vec<u8>)>,
    pub results: Value,
}

struct Collector<'a> {
    formats: &'a std::collections::BTreeSet<Format>,
    files: Vec<(String, Vec<u8>)>,
}

impl Collector<'_> {
    fn add(&mut self, format: Format, name: String, bytes: Vec<u8>) {
        if self.formats.contains(&format) {
            self.files.push((name, bytes));
        }
    }

    fn wants(&self, format: Format) -> bool {
        self.formats.contains(&format)
    }

    fn csv(&mut self, name: &str, write: impl FnOnce(&mut Vec<u8>) -> groundphase::Result<()>) -> Run<()> {
        if self.wants(Format::Csv) {
            let mut buf = Vec::new();
            write(&mut buf).map_err(lift(name))?;
            self.files.push((name.to_string(), buf));
        }
        Ok(())
    }

    fn json(&mut self, name: &str, value: &Value) {
        let mut text = serde_json::to_string_pretty(value).expect("json values serialize");
        text.push('\n');
        self.add(Format::Json, name.to_string(), text.into_bytes());
    }

    fn svg(&mut self, name: &str, render: impl FnOnce() -> String) {
        if self.wants(Format::Svg) {
            self.files.push((name.to_string(), render().into_bytes()));
        }
    }
}

/// Phase budget of a trajectory. Paths through a state orthogonal to the
/// start have no continuous total phase; those fall back to the endpoint
/// overlap, with the geometric part taken as the remainder.
fn phase_budget(trajectory: &Trajectory) -> Run<(PhaseDecomposition, bool)> {
    match phase_series(trajectory) {
        Ok(series) => Ok((series.final_decomposition(), true)),
        Err(Error::UndefinedPhase { .. } | Error::Undersampled { .. }) => {
            let total = final_phase(trajectory).map_err(lift("phase"))?;
            let dynamic = *dynamic_phase(trajectory).map_err(lift("phase"))?.last().unwrap();
            Ok((
                PhaseDecomposition {
                    theta_total: total,
                    theta_dyn: dynamic,
                    theta_geo: wrap_angle(total - dynamic),
                    residual: 0.0,
                },
                false,
            ))
        }
        Err(e) => Err(lift("phase")(e)),
    }
}

fn min_abs(record: &[CgSample]) -> f64 {
    record
        .iter()
        .map(|s| s.amplitude().norm())
        .fold(f64::INFINITY, f64::min)
}

fn trajectory_csv(trajectory: &Trajectory) -> impl FnOnce(&mut Vec<u8>) -> groundphase::Result<()> + '_ {
    move |buf| TrajectoryRecord::from_trajectory(trajectory).write_csv(buf)
}

/// Signed enclosed area of a closed Bloch path, when it has one.
fn closed_area(trajectory: &Trajectory) -> Option<f64> {
    let path = trajectory.bloch_path().ok()?;
    solid_angle(&path, None).ok().map(|s| s.area)
}

fn scheme_outputs(out: &mut Collector, run: &SchemeRun) -> Run<Value> {
    let traj = &run.trajectory;
    let (budget, continuous) = phase_budget(traj)?;
    let record = cg_record(traj).map_err(lift("record"))?;
    let area = closed_area(traj);
    let report = PhaseReport::new(&budget, area, "laser");

    out.csv("trajectory.csv", trajectory_csv(traj))?;
    out.csv("cg.csv", |b| write_cg_csv(&record, b))?;
    out.csv("metrics.csv", |b| write_metrics_csv(&[run.metrics], b))?;
    out.json("trajectory.json", &TrajectoryRecord::from_trajectory(traj).to_json());
    out.json("phase.json", &report.to_json());
    let kind = run.spec.kind().as_str();
    out.svg("cg_disc.svg", || render_cg_disc(&record, kind));
    let path = traj.bloch_path().map_err(lift("bloch"))?;
    out.svg("bloch_xz.svg", || render_bloch(&path, (0, 2), kind));
    out.svg("bloch_xy.svg", || render_bloch(&path, (0, 1), kind));

    let min_cg = min_abs(&record);
    Ok(json!({
        "spec": run.spec,
        "design": run.design,
        "metrics": run.metrics,
        "theta_achieved": run.metrics.theta_achieved,
        "theta_total": budget.theta_total,
        "theta_dyn": budget.theta_dyn,
        "theta_geo": budget.theta_geo,
        "phase_residual": budget.residual,
        "phase_path_continuous": continuous,
        "solid_angle": area,
        "area_phase": area.map(area_phase),
        "min_abs_cg": min_cg,
        "cg_stays_near_edge": min_cg > 0.9,
    }))
}

fn frame_outputs(out: &mut Collector, run: &SchemeRun, frame: &dyn FrameTransform) -> Run<Value> {
    let (cmp, moved) = compare_frames(&run.trajectory, frame).map_err(lift("frame"))?;
    let before = cg_record(&run.trajectory).map_err(lift("record"))?;
    let after = cg_record(&moved).map_err(lift("record"))?;
    out.csv("trajectory_original.csv", trajectory_csv(&run.trajectory))?;
    out.csv("trajectory_transformed.csv", trajectory_csv(&moved))?;
    out.csv("cg_original.csv", |b| write_cg_csv(&before, b))?;
    out.csv("cg_transformed.csv", |b| write_cg_csv(&after, b))?;
    let value = serde_json::to_value(&cmp).expect("comparison serializes");
    out.json("frame.json", &value);
    out.svg("cg_disc.svg", || render_cg_disc(&after, &cmp.frame_tag));
    let a = run.trajectory.bloch_path().map_err(lift("bloch"))?;
    let b = moved.bloch_path().map_err(lift("bloch"))?;
    out.svg("bloch_original.svg", || render_bloch(&a, (0, 2), "original"));
    out.svg("bloch_transformed.svg", || render_bloch(&b, (0, 2), &cmp.frame_tag));
    Ok(json!({
        "spec": run.spec,
        "frame": cmp.frame_tag,
        "original": cmp.original,
        "transformed": cmp.transformed,
        "alpha": cmp.alpha,
        "dyn_shift": cmp.dyn_shift(),
        "geo_shift": cmp.geo_shift(),
        "predicted_dyn_shift": cmp.predicted_dyn_shift,
        "predicted_geo_shift": cmp.predicted_geo_shift,
        "covariance_error": cmp.covariance_error(),
        "cg_record_identical": before == after,
    }))
}

fn series<T>(items: &[T], x: impl Fn(&T) -> f64, y: impl Fn(&T) -> f64) -> Vec<(f64, f64)> {
    items.iter().map(|i| (x(i), y(i))).collect()
}

pub fn run(plan: &Plan) -> Run<Outputs> {
    let cfg: &IntegratorConfig = &plan.integrator;
    let mut out = Collector {
        formats: &plan.formats,
        files: Vec::new(),
    };
    let results = match &plan.task {
        Task::Scheme(spec) => {
            let run = run_scheme(spec, cfg).map_err(lift("scheme"))?;
            scheme_outputs(&mut out, &run)?
        }

        Task::Compare { omega, loops, thetas } => {
            let setup = ComparisonSetup {
                omega: *omega,
                loops: *loops,
            };
            let rows = compare_schemes(thetas, &setup, cfg, Execution::Parallel).map_err(lift("compare"))?;
            out.csv("comparison.csv", |b| write_metrics_csv(&rows, b))?;
            out.json("comparison.json", &json!(rows));
            out.svg("comparison.svg", || {
                let per = |f: &dyn Fn(&groundphase::schemes::SchemeMetrics) -> f64| {
                    SchemeKind::ALL
                        .iter()
                        .map(|k| {
                            let mine: Vec<_> = rows.iter().filter(|r| r.scheme == *k).copied().collect();
                            (k.as_str().to_string(), series(&mine, |r| r.theta / PI, f))
                        })
                        .collect::<Vec<_>>()
                };
                render_panels(&[
                    Panel {
                        title: "duration".into(),
                        x_label: "theta / pi".into(),
                        log_y: true,
                        series: per(&|r| r.duration),
                    },
                    Panel {
                        title: "integrated excited population".into(),
                        x_label: "theta / pi".into(),
                        log_y: true,
                        series: per(&|r| r.integrated_pop),
                    },
                    Panel {
                        title: "max |detuning|".into(),
                        x_label: "theta / pi".into(),
                        log_y: false,
                        series: per(&|r| r.max_detuning),
                    },
                ])
            });
            let worst = rows.iter().map(|r| r.phase_error()).fold(0.0, f64::max);
            json!({ "setup": setup, "rows": rows, "max_phase_error": worst })
        }

        Task::Frame { spec, frame } => {
            let run = run_scheme(spec, cfg).map_err(lift("scheme"))?;
            match frame {
                FrameChoice::Atomic => {
                    let f = AtomicFrame::new(run.schedule.clone(), &TWO_LEVEL).map_err(lift("frame"))?;
                    frame_outputs(&mut out, &run, &f)?
                }
                FrameChoice::EnergyShift(energy) => {
                    let f = EnergyShift {
                        energy: *energy,
                        dim: 2,
                    };
                    frame_outputs(&mut out, &run, &f)?
                }
            }
        }

        Task::Lambda {
            shapings,
            omega,
            theta,
            mode,
            samples,
        } => {
            let mut entries = Vec::new();
            let mut ctrl_panel = Vec::new();
            let mut pop_panel = Vec::new();
            let mut s_panel = Vec::new();
            for shaping in shapings {
                let name = shaping.name();
                let controls = controls_for_phase(shaping.clone(), *omega, *theta, *mode).map_err(lift("lambda"))?;
                let run = simulate_lambda(&controls, cfg).map_err(lift("lambda"))?;
                let check = controls.constraint_check(*samples);
                let transform = controls.transform_residual(*samples);
                out.csv(&format!("controls_{name}.csv"), |b| controls.write_csv(*samples, b))?;
                out.csv(&format!("trajectory_{name}.csv"), trajectory_csv(&run.trajectory))?;
                let record = cg_record(&run.trajectory).map_err(lift("record"))?;
                out.csv(&format!("cg_{name}.csv"), |b| write_cg_csv(&record, b))?;
                out.svg(&format!("cg_disc_{name}.svg"), || render_cg_disc(&record, name));

                let rows = controls.sample(*samples);
                ctrl_panel.push((
                    format!("{name} |Omega_ge|"),
                    series(&rows, |c| c.time, |c| c.omega_ge.norm()),
                ));
                ctrl_panel.push((
                    format!("{name} |Omega_ae|"),
                    series(&rows, |c| c.time, |c| c.omega_ae.norm()),
                ));
                s_panel.push((name.to_string(), series(&rows, |c| c.time, |c| c.s)));
                let pe = run.trajectory.population(BasisLabel::E).map_err(lift("lambda"))?;
                let pts: Vec<(f64, f64)> = run.trajectory.times().iter().copied().zip(pe).collect();
                pop_panel.push((format!("{name} |c_e|^2"), pts));
                entries.push(json!({
                    "shaping": shaping,
                    "alpha": controls.alpha,
                    "duration": controls.duration,
                    "metrics": run.metrics,
                    "constraints": check,
                    "transform_residual": transform,
                }));
            }
            out.json("lambda.json", &json!(entries));
            out.svg("lambda_panels.svg", || {
                render_panels(&[
                    Panel {
                        title: "drive magnitudes".into(),
                        x_label: "t".into(),
                        log_y: false,
                        series: ctrl_panel,
                    },
                    Panel {
                        title: "mixing angle s".into(),
                        x_label: "t".into(),
                        log_y: false,
                        series: s_panel,
                    },
                    Panel {
                        title: "excited population".into(),
                        x_label: "t".into(),
                        log_y: false,
                        series: pop_panel,
                    },
                ])
            });
            json!({ "basis": LAMBDA_BASIS.map(|b| b.as_str()), "theta": theta, "omega": omega, "runs": entries })
        }

        Task::Tripod {
            eta,
            gamma,
            theta,
            source,
        } => {
            let schedule = source.build().map_err(lift("tripod.source"))?;
            let gate = tripod_gate(*eta, *gamma, *theta, &schedule, cfg).map_err(lift("tripod"))?;
            let params = decompose_gate(&gate.realized).map_err(lift("tripod"))?;
            out.csv("gate.csv", |b| {
                let mut w = csv::Writer::from_writer(b);
                w.write_record(["row", "col", "realized_re", "realized_im", "target_re", "target_im"])?;
                for i in 0..2 {
                    for j in 0..2 {
                        let (r, t) = (gate.realized[(i, j)], gate.target[(i, j)]);
                        w.write_record([
                            i.to_string(),
                            j.to_string(),
                            r.re.to_string(),
                            r.im.to_string(),
                            t.re.to_string(),
                            t.im.to_string(),
                        ])?;
                    }
                }
                w.flush()?;
                Ok(())
            })?;
            let value = json!({
                "eta": eta,
                "gamma": gamma,
                "theta": theta,
                "source": source,
                "max_entry_error": gate.max_entry_error,
                "leakage": gate.leakage,
                "unitarity_deviation": gate.unitarity_deviation,
                "recovered": params,
            });
            out.json("gate.json", &value);
            value
        }

        Task::OpenSystem {
            spec,
            decay_rates,
            dephasing,
        } => {
            let run = run_scheme(spec, cfg).map_err(lift("scheme"))?;
            let rho0 = TwoSidedMatrix::projector(&TWO_LEVEL, BasisLabel::G).map_err(lift("open_system"))?;
            let mut rows = Vec::new();
            for (k, &rate) in decay_rates.iter().enumerate() {
                let mut collapse = vec![CollapseOperator::spontaneous_emission(&TWO_LEVEL, rate)
                    .map_err(lift("open_system.decay_rates"))?];
                if *dephasing > 0.0 {
                    collapse.push(
                        CollapseOperator::dephasing(&TWO_LEVEL, *dephasing).map_err(lift("open_system.dephasing"))?,
                    );
                }
                let traj =
                    propagate_two_sided(&run.schedule, None, &collapse, &rho0, cfg).map_err(lift("open_system"))?;
                let record = traj.gg_record().map_err(lift("open_system"))?;
                let z = record.last().unwrap().amplitude();
                out.csv(&format!("coherence_{k}.csv"), |b| write_cg_csv(&record, b))?;
                out.svg(&format!("coherence_{k}.svg"), || {
                    render_cg_disc(&record, &format!("rho_gg, Gamma = {rate}"))
                });
                rows.push(json!({
                    "decay_rate": rate,
                    "magnitude": z.norm(),
                    "phase": z.arg(),
                    "phase_shift_from_pure": wrap_angle(z.arg() - run.metrics.theta_achieved),
                }));
            }
            let value = json!({
                "spec": run.spec,
                "dephasing": dephasing,
                "pure_state_phase": run.metrics.theta_achieved,
                "rates": rows,
            });
            out.json("open_system.json", &value);
            value
        }
    };
    Ok(Outputs {
        files: out.files,
        results,
    })
}
