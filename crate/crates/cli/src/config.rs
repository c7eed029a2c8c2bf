//! Scenario files: TOML with a top-level `kind` and one table per scenario
//! kind. Unknown keys are rejected at parse time; missing or out-of-range
//! values are caught by [`ScenarioConfig::validate`] and name their key.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::fmt;
use std::path::PathBuf;

use groundphase::lambda::{Shaping, SynthesisMode};
use groundphase::schemes::{loop_detuning, SchemeKind, SchemeSpec};
use groundphase::IntegratorConfig;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Scheme,
    Compare,
    Frame,
    Lambda,
    Tripod,
    OpenSystem,
}

impl Kind {
    pub fn as_str(self) -> &'static str {
        match self {
            Kind::Scheme => "scheme",
            Kind::Compare => "compare",
            Kind::Frame => "frame",
            Kind::Lambda => "lambda",
            Kind::Tripod => "tripod",
            Kind::OpenSystem => "open_system",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
    Svg,
}

impl Format {
    pub fn parse(s: &str) -> Option<Format> {
        match s.trim() {
            "csv" => Some(Format::Csv),
            "json" => Some(Format::Json),
            "svg" => Some(Format::Svg),
            _ => None,
        }
    }
}

/// A phase given either as a number or as an expression such as `"pi/2"`,
/// `"0.3pi"` or `"3*pi/4"`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Angle {
    Number(f64),
    Expr(String),
}

impl Angle {
    pub fn value(&self) -> Option<f64> {
        match self {
            Angle::Number(x) => Some(*x),
            Angle::Expr(s) => parse_angle(s),
        }
    }
}

pub fn parse_angle(text: &str) -> Option<f64> {
    let s: String = text
        .chars()
        .filter(|c| !c.is_whitespace())
        .collect::<String>()
        .to_lowercase();
    if let Ok(x) = s.parse::<f64>() {
        return Some(x);
    }
    let at = s.find("pi")?;
    let (head, tail) = (&s[..at], &s[at + 2..]);
    let head = head.strip_suffix('*').unwrap_or(head);
    let coef = match head {
        "" | "+" => 1.0,
        "-" => -1.0,
        h => h.parse::<f64>().ok()?,
    };
    let den = match tail {
        "" => 1.0,
        t => t.strip_prefix('/')?.parse::<f64>().ok()?,
    };
    let v = coef * PI / den;
    v.is_finite().then_some(v)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeSection {
    pub scheme: Option<String>,
    pub theta: Option<Angle>,
    pub omega: Option<f64>,
    /// Far-off-resonant loop count.
    pub loops: Option<u32>,
    /// Capture-release cone detuning; alternatively give `cone_phase`,
    /// the geometric part of one cone.
    pub cone_detuning: Option<f64>,
    pub cone_phase: Option<Angle>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareSection {
    pub omega: Option<f64>,
    pub loops: Option<u32>,
    pub thetas: Option<Vec<Angle>>,
    pub theta_min: Option<Angle>,
    pub theta_max: Option<Angle>,
    pub points: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameSection {
    /// `atomic` or `energy_shift`.
    pub frame: Option<String>,
    pub energy: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LambdaSection {
    pub shapings: Option<Vec<String>>,
    pub omega: Option<f64>,
    pub theta: Option<Angle>,
    /// `exact` or `capped`.
    pub mode: Option<String>,
    pub cap_factor: Option<f64>,
    pub samples: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TripodSection {
    pub eta: Option<Angle>,
    pub gamma: Option<Angle>,
    pub theta: Option<Angle>,
    pub omega: Option<f64>,
    /// Scheme driving the bright state; defaults to `resonant_two_pulse`.
    pub source: Option<String>,
    pub loops: Option<u32>,
    pub cone_detuning: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpenSystemSection {
    /// Spontaneous-emission rates `Gamma` to sweep.
    pub decay_rates: Option<Vec<f64>>,
    pub dephasing: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSection {
    pub step_bound: Option<f64>,
    pub sample_rate: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub kind: Kind,
    pub output: Option<PathBuf>,
    pub formats: Option<Vec<String>>,
    pub scheme: Option<SchemeSection>,
    pub compare: Option<CompareSection>,
    pub frame: Option<FrameSection>,
    pub lambda: Option<LambdaSection>,
    pub tripod: Option<TripodSection>,
    pub open_system: Option<OpenSystemSection>,
    pub integrator: Option<IntegratorSection>,
}

/// A rejected value, tagged with the key that carries it.
#[derive(Clone, Debug, PartialEq)]
pub struct Invalid {
    pub key: String,
    pub message: String,
}

impl fmt::Display for Invalid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "`{}`: {}", self.key, self.message)
    }
}

pub fn invalid(key: impl Into<String>, message: impl Into<String>) -> Invalid {
    Invalid {
        key: key.into(),
        message: message.into(),
    }
}

type Checked<T> = Result<T, Invalid>;

fn required<T: Clone>(value: &Option<T>, key: &str) -> Checked<T> {
    value.clone().ok_or_else(|| invalid(key, "required for this scenario"))
}

fn angle(value: &Option<Angle>, key: &str) -> Checked<f64> {
    let a = required(value, key)?;
    match a.value() {
        Some(x) if x.is_finite() => Ok(x),
        _ => Err(invalid(key, format!("cannot read {a:?} as an angle"))),
    }
}

fn frequency(value: &Option<f64>, key: &str, default: Option<f64>) -> Checked<f64> {
    let x = match (value, default) {
        (Some(x), _) => *x,
        (None, Some(d)) => d,
        (None, None) => return Err(invalid(key, "required for this scenario")),
    };
    if !(x > 0.0 && x.is_finite()) {
        return Err(invalid(key, format!("must be a positive frequency, got {x}")));
    }
    Ok(x)
}

fn phase_in(x: f64, key: &str, lo: f64, hi: f64) -> Checked<f64> {
    if !(x > lo && x < hi) {
        return Err(invalid(key, format!("{x} lies outside ({lo:.6}, {hi:.6})")));
    }
    Ok(x)
}

/// Fully checked inputs of one run.
#[derive(Clone, Debug)]
pub struct Plan {
    pub kind: Kind,
    pub output: PathBuf,
    pub formats: BTreeSet<Format>,
    pub integrator: IntegratorConfig,
    pub task: Task,
}

#[derive(Clone, Debug)]
pub enum Task {
    Scheme(SchemeSpec),
    Compare {
        omega: f64,
        loops: u32,
        thetas: Vec<f64>,
    },
    Frame {
        spec: SchemeSpec,
        frame: FrameChoice,
    },
    Lambda {
        shapings: Vec<Shaping>,
        omega: f64,
        theta: f64,
        mode: SynthesisMode,
        samples: usize,
    },
    Tripod {
        eta: f64,
        gamma: f64,
        theta: f64,
        source: SchemeSpec,
    },
    OpenSystem {
        spec: SchemeSpec,
        decay_rates: Vec<f64>,
        dephasing: f64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FrameChoice {
    Atomic,
    EnergyShift(f64),
}

pub const DEFAULT_LOOPS: u32 = 20;

fn scheme_spec(section: &Option<SchemeSection>) -> Checked<SchemeSpec> {
    let s = section
        .as_ref()
        .ok_or_else(|| invalid("scheme", "table required for this scenario"))?;
    let name = required(&s.scheme, "scheme.scheme")?;
    let kind = SchemeKind::parse(&name).ok_or_else(|| {
        let names: Vec<_> = SchemeKind::ALL.iter().map(|k| k.as_str()).collect();
        invalid(
            "scheme.scheme",
            format!("unknown scheme {name:?}; expected one of {names:?}"),
        )
    })?;
    let theta = angle(&s.theta, "scheme.theta")?;
    let omega = frequency(&s.omega, "scheme.omega", Some(1.0))?;
    if s.loops.is_some() && kind != SchemeKind::FarOffResonant {
        return Err(invalid("scheme.loops", "only used by far_off_resonant"));
    }
    if (s.cone_detuning.is_some() || s.cone_phase.is_some()) && kind != SchemeKind::CaptureRelease {
        let key = if s.cone_detuning.is_some() {
            "scheme.cone_detuning"
        } else {
            "scheme.cone_phase"
        };
        return Err(invalid(key, "only used by capture_release"));
    }
    Ok(match kind {
        SchemeKind::ResonantTwoPulse => SchemeSpec::ResonantTwoPulse { theta, omega },
        SchemeKind::OffResonant => SchemeSpec::OffResonant {
            theta: phase_in(theta, "scheme.theta", 0.0, PI)?,
            omega,
        },
        SchemeKind::FarOffResonant => {
            let loops = s.loops.unwrap_or(DEFAULT_LOOPS);
            if loops == 0 {
                return Err(invalid("scheme.loops", "must be >= 1"));
            }
            SchemeSpec::FarOffResonant {
                theta: phase_in(theta, "scheme.theta", 0.0, loops as f64 * PI)?,
                omega,
                loops,
            }
        }
        SchemeKind::CaptureRelease => {
            let cone_detuning = match (&s.cone_detuning, &s.cone_phase) {
                (Some(_), Some(_)) => {
                    return Err(invalid("scheme.cone_phase", "give either cone_detuning or cone_phase"))
                }
                (Some(d), None) => {
                    if !(*d > omega && d.is_finite()) {
                        return Err(invalid("scheme.cone_detuning", format!("must exceed omega = {omega}")));
                    }
                    *d
                }
                (None, Some(_)) => {
                    let p = angle(&s.cone_phase, "scheme.cone_phase")?;
                    let p = phase_in(p, "scheme.cone_phase", 0.0, PI / 2.0)?;
                    loop_detuning(p, omega).map_err(|e| invalid("scheme.cone_phase", e.to_string()))?
                }
                (None, None) => return Err(invalid("scheme.cone_detuning", "required for capture_release")),
            };
            SchemeSpec::CaptureRelease {
                theta,
                omega,
                cone_detuning,
            }
        }
    })
}

fn unexpected_sections(cfg: &ScenarioConfig, allowed: &[&str]) -> Checked<()> {
    let present = [
        ("scheme", cfg.scheme.is_some()),
        ("compare", cfg.compare.is_some()),
        ("frame", cfg.frame.is_some()),
        ("lambda", cfg.lambda.is_some()),
        ("tripod", cfg.tripod.is_some()),
        ("open_system", cfg.open_system.is_some()),
    ];
    for (name, there) in present {
        if there && !allowed.contains(&name) {
            return Err(invalid(
                name,
                format!("table not used by `{}` scenarios", cfg.kind.as_str()),
            ));
        }
    }
    Ok(())
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> Result<ScenarioConfig, toml::de::Error> {
        toml::from_str(text)
    }

    /// Check the config and resolve defaults. `output` and `formats` given
    /// on the command line take precedence.
    pub fn validate(&self, output: Option<PathBuf>, formats: Option<&str>) -> Checked<Plan> {
        let formats = match (formats, &self.formats) {
            (Some(list), _) => parse_formats(list.split(','), "--formats")?,
            (None, Some(list)) => parse_formats(list.iter().map(String::as_str), "formats")?,
            (None, None) => [Format::Csv, Format::Json, Format::Svg].into(),
        };
        let output = output
            .or_else(|| self.output.clone())
            .ok_or_else(|| invalid("output", "no output directory (set `output` or pass --out)"))?;

        let integrator = match &self.integrator {
            None => IntegratorConfig::default(),
            Some(i) => {
                let d = IntegratorConfig::default();
                let step = i.step_bound.unwrap_or(d.step_bound);
                let rate = i.sample_rate.unwrap_or(d.sample_rate);
                IntegratorConfig::new(step, rate).map_err(|e| {
                    let key = if IntegratorConfig::new(step, d.sample_rate).is_err() {
                        "integrator.step_bound"
                    } else {
                        "integrator.sample_rate"
                    };
                    invalid(key, e.to_string())
                })?
            }
        };

        let task = match self.kind {
            Kind::Scheme => {
                unexpected_sections(self, &["scheme"])?;
                Task::Scheme(scheme_spec(&self.scheme)?)
            }
            Kind::Compare => {
                unexpected_sections(self, &["compare"])?;
                self.compare_task()?
            }
            Kind::Frame => {
                unexpected_sections(self, &["scheme", "frame"])?;
                let spec = scheme_spec(&self.scheme)?;
                let f = self.frame.as_ref().ok_or_else(|| invalid("frame", "table required"))?;
                let frame = match required(&f.frame, "frame.frame")?.as_str() {
                    "atomic" => {
                        if f.energy.is_some() {
                            return Err(invalid("frame.energy", "only used by the energy_shift frame"));
                        }
                        FrameChoice::Atomic
                    }
                    "energy_shift" => {
                        let e = required(&f.energy, "frame.energy")?;
                        if !e.is_finite() {
                            return Err(invalid("frame.energy", "must be finite"));
                        }
                        FrameChoice::EnergyShift(e)
                    }
                    other => {
                        return Err(invalid(
                            "frame.frame",
                            format!("unknown frame {other:?}; expected \"atomic\" or \"energy_shift\""),
                        ))
                    }
                };
                Task::Frame { spec, frame }
            }
            Kind::Lambda => {
                unexpected_sections(self, &["lambda"])?;
                self.lambda_task()?
            }
            Kind::Tripod => {
                unexpected_sections(self, &["tripod"])?;
                self.tripod_task()?
            }
            Kind::OpenSystem => {
                unexpected_sections(self, &["scheme", "open_system"])?;
                let spec = scheme_spec(&self.scheme)?;
                let o = self
                    .open_system
                    .as_ref()
                    .ok_or_else(|| invalid("open_system", "table required"))?;
                let decay_rates = required(&o.decay_rates, "open_system.decay_rates")?;
                if decay_rates.is_empty() {
                    return Err(invalid("open_system.decay_rates", "needs at least one rate"));
                }
                if let Some(r) = decay_rates.iter().find(|r| !(**r >= 0.0 && r.is_finite())) {
                    return Err(invalid(
                        "open_system.decay_rates",
                        format!("rates must be >= 0, got {r}"),
                    ));
                }
                let dephasing = o.dephasing.unwrap_or(0.0);
                if !(dephasing >= 0.0 && dephasing.is_finite()) {
                    return Err(invalid("open_system.dephasing", "must be >= 0"));
                }
                Task::OpenSystem {
                    spec,
                    decay_rates,
                    dephasing,
                }
            }
        };
        Ok(Plan {
            kind: self.kind,
            output,
            formats,
            integrator,
            task,
        })
    }

    fn compare_task(&self) -> Checked<Task> {
        let c = self
            .compare
            .as_ref()
            .ok_or_else(|| invalid("compare", "table required"))?;
        let omega = frequency(&c.omega, "compare.omega", Some(1.0))?;
        let loops = c.loops.unwrap_or(DEFAULT_LOOPS);
        if loops == 0 {
            return Err(invalid("compare.loops", "must be >= 1"));
        }
        let thetas = match &c.thetas {
            Some(list) => {
                if c.theta_min.is_some() || c.theta_max.is_some() || c.points.is_some() {
                    return Err(invalid(
                        "compare.thetas",
                        "give either thetas or theta_min/theta_max/points",
                    ));
                }
                list.iter()
                    .map(|a| angle(&Some(a.clone()), "compare.thetas"))
                    .collect::<Checked<Vec<f64>>>()?
            }
            None => {
                let lo = angle(&c.theta_min, "compare.theta_min")?;
                let hi = angle(&c.theta_max, "compare.theta_max")?;
                let n = required(&c.points, "compare.points")?;
                if n < 2 {
                    return Err(invalid("compare.points", "must be >= 2"));
                }
                if !(hi > lo) {
                    return Err(invalid("compare.theta_max", "must exceed theta_min"));
                }
                (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
            }
        };
        if thetas.is_empty() {
            return Err(invalid("compare.thetas", "needs at least one phase"));
        }
        for &t in &thetas {
            phase_in(t, "compare.thetas", 0.0, PI)?;
        }
        Ok(Task::Compare { omega, loops, thetas })
    }

    fn lambda_task(&self) -> Checked<Task> {
        let l = self
            .lambda
            .as_ref()
            .ok_or_else(|| invalid("lambda", "table required"))?;
        let names = l.shapings.clone().unwrap_or_else(|| {
            groundphase::lambda::PRESET_NAMES
                .iter()
                .map(|s| s.to_string())
                .collect()
        });
        if names.is_empty() {
            return Err(invalid("lambda.shapings", "needs at least one preset"));
        }
        let shapings = names
            .iter()
            .map(|n| {
                Shaping::preset(n).ok_or_else(|| {
                    invalid(
                        "lambda.shapings",
                        format!(
                            "unknown preset {n:?}; expected one of {:?}",
                            groundphase::lambda::PRESET_NAMES
                        ),
                    )
                })
            })
            .collect::<Checked<Vec<_>>>()?;
        let omega = frequency(&l.omega, "lambda.omega", Some(1.0))?;
        let theta = phase_in(angle(&l.theta, "lambda.theta")?, "lambda.theta", 0.0, 2.0 * PI)?;
        let mode = match l.mode.as_deref().unwrap_or("exact") {
            "exact" => {
                if l.cap_factor.is_some() {
                    return Err(invalid("lambda.cap_factor", "only used in capped mode"));
                }
                SynthesisMode::Exact
            }
            "capped" => SynthesisMode::Capped {
                cap_factor: frequency(
                    &l.cap_factor,
                    "lambda.cap_factor",
                    Some(SynthesisMode::DEFAULT_CAP_FACTOR),
                )?,
            },
            other => {
                return Err(invalid(
                    "lambda.mode",
                    format!("unknown mode {other:?}; expected \"exact\" or \"capped\""),
                ))
            }
        };
        let samples = l.samples.unwrap_or(400);
        if samples < 2 {
            return Err(invalid("lambda.samples", "must be >= 2"));
        }
        Ok(Task::Lambda {
            shapings,
            omega,
            theta,
            mode,
            samples,
        })
    }

    fn tripod_task(&self) -> Checked<Task> {
        let t = self
            .tripod
            .as_ref()
            .ok_or_else(|| invalid("tripod", "table required"))?;
        let eta = angle(&t.eta, "tripod.eta")?;
        if !(0.0..=PI).contains(&eta) {
            return Err(invalid("tripod.eta", format!("{eta} lies outside [0, pi]")));
        }
        let gamma = angle(&t.gamma, "tripod.gamma")?;
        let theta = angle(&t.theta, "tripod.theta")?;
        let source = SchemeSection {
            scheme: Some(t.source.clone().unwrap_or_else(|| "resonant_two_pulse".into())),
            theta: Some(Angle::Number(theta)),
            omega: t.omega,
            loops: t.loops,
            cone_detuning: t.cone_detuning,
            cone_phase: None,
        };
        let source = scheme_spec(&Some(source)).map_err(|e| Invalid {
            key: e
                .key
                .replace("scheme.scheme", "tripod.source")
                .replace("scheme.", "tripod."),
            message: e.message,
        })?;
        Ok(Task::Tripod {
            eta,
            gamma,
            theta,
            source,
        })
    }
}

fn parse_formats<'a>(items: impl Iterator<Item = &'a str>, key: &str) -> Checked<BTreeSet<Format>> {
    let mut out = BTreeSet::new();
    for item in items {
        out.insert(Format::parse(item).ok_or_else(|| invalid(key, format!("unknown format {item:?}")))?);
    }
    if out.is_empty() {
        return Err(invalid(key, "no formats selected"));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn angle_expressions() {
        let close = |s: &str, v: f64| (parse_angle(s).unwrap() - v).abs() < 1e-15;
        assert!(close("pi/2", PI / 2.0));
        assert!(close("3*pi/4", 0.75 * PI));
        assert!(close("0.1pi", 0.1 * PI));
        assert!(close(" -pi ", -PI));
        assert!(close("1.25", 1.25));
        assert!(parse_angle("tau").is_none());
        assert!(parse_angle("pi/x").is_none());
    }

    #[test]
    fn unknown_keys_fail_to_parse() {
        let text = "kind = \"scheme\"\n[scheme]\nscheme = \"off_resonant\"\ntheta = 1.0\nomgea = 1.0\n";
        assert!(ScenarioConfig::parse(text).is_err());
    }

    #[test]
    fn validation_names_the_key() {
        let text =
            "kind = \"scheme\"\noutput = \"x\"\n[scheme]\nscheme = \"off_resonant\"\ntheta = \"pi/2\"\nomega = -1\n";
        let err = ScenarioConfig::parse(text).unwrap().validate(None, None).unwrap_err();
        assert_eq!(err.key, "scheme.omega");
        let text = "kind = \"scheme\"\noutput = \"x\"\n[scheme]\nscheme = \"capture_release\"\ntheta = \"pi/2\"\n";
        let err = ScenarioConfig::parse(text).unwrap().validate(None, None).unwrap_err();
        assert_eq!(err.key, "scheme.cone_detuning");
    }

    #[test]
    fn cone_phase_resolves_detuning() {
        let text = "kind = \"scheme\"\noutput = \"x\"\n[scheme]\nscheme = \"capture_release\"\ntheta = \"pi/2\"\ncone_phase = \"pi/10\"\n";
        let plan = ScenarioConfig::parse(text)
            .unwrap()
            .validate(None, Some("csv"))
            .unwrap();
        match plan.task {
            Task::Scheme(SchemeSpec::CaptureRelease { cone_detuning, .. }) => {
                assert!((cone_detuning - 0.9 / 0.19f64.sqrt()).abs() < 1e-12)
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(plan.formats, [Format::Csv].into());
    }
}
