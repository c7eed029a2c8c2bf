use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mixing angle `s(t)` between `|e>` and `|a>` over a pulse of length `T`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case")]
pub enum Shaping {
    /// Plain two-level driving.
    Zero,
    /// `peak * sin(pi t / T)`.
    HalfSine { peak: f64 },
    /// Steep rise to `plateau`, held, steep fall:
    /// `plateau * tanh(k t/T) tanh(k (T-t)/T) / tanh(k/2)^2`.
    SaturatingRamp { plateau: f64, steepness: f64 },
    /// Fixed angle; never vanishes, so only usable with capped controls.
    Constant { value: f64 },
    /// Samples on a uniform grid spanning `[0, T]`, linearly interpolated.
    Tabulated { values: Vec<f64> },
}

pub const PRESET_NAMES: [&str; 3] = ["zero", "half_sine", "saturating_ramp"];

impl Shaping {
    pub fn preset(name: &str) -> Option<Shaping> {
        match name {
            "zero" => Some(Shaping::Zero),
            "half_sine" => Some(Shaping::HalfSine { peak: PI / 4.0 }),
            "saturating_ramp" => Some(Shaping::SaturatingRamp {
                plateau: 0.45 * PI,
                steepness: 10.0,
            }),
            _ => None,
        }
    }

    pub fn presets() -> Vec<(&'static str, Shaping)> {
        PRESET_NAMES.iter().map(|&n| (n, Shaping::preset(n).unwrap())).collect()
    }

    pub fn name(&self) -> &'static str {
        match self {
            Shaping::Zero => "zero",
            Shaping::HalfSine { .. } => "half_sine",
            Shaping::SaturatingRamp { .. } => "saturating_ramp",
            Shaping::Constant { .. } => "constant",
            Shaping::Tabulated { .. } => "tabulated",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |x: f64, what: &str| {
            if x.is_finite() {
                Ok(())
            } else {
                Err(Error::Domain(format!("shaping {what} must be finite")))
            }
        };
        match self {
            Shaping::Zero => Ok(()),
            Shaping::HalfSine { peak } => finite(*peak, "peak"),
            Shaping::SaturatingRamp { plateau, steepness } => {
                finite(*plateau, "plateau")?;
                if !(*steepness > 0.0 && steepness.is_finite()) {
                    return Err(Error::Domain("ramp steepness must be > 0".into()));
                }
                Ok(())
            }
            Shaping::Constant { value } => finite(*value, "value"),
            Shaping::Tabulated { values } => {
                if values.len() < 3 {
                    return Err(Error::Invalid("tabulated shaping needs at least 3 samples".into()));
                }
                values.iter().try_for_each(|&v| finite(v, "sample"))
            }
        }
    }

    /// `s(t)` for a pulse of length `duration`.
    pub fn value(&self, t: f64, duration: f64) -> f64 {
        let u = (t / duration).clamp(0.0, 1.0);
        match self {
            Shaping::Zero => 0.0,
            Shaping::HalfSine { peak } => peak * (PI * u).sin(),
            Shaping::SaturatingRamp { plateau, steepness } => {
                let k = *steepness;
                plateau * (k * u).tanh() * (k * (1.0 - u)).tanh() / (k / 2.0).tanh().powi(2)
            }
            Shaping::Constant { value } => *value,
            Shaping::Tabulated { values } => {
                let (k, frac) = grid_position(values.len(), u);
                values[k] + frac * (values[k + 1] - values[k])
            }
        }
    }

    /// `ds/dt`; analytic for the closed-form families, centered differences
    /// (interpolated between nodes) for tabulated ones.
    pub fn rate(&self, t: f64, duration: f64) -> f64 {
        let u = (t / duration).clamp(0.0, 1.0);
        match self {
            Shaping::Zero | Shaping::Constant { .. } => 0.0,
            Shaping::HalfSine { peak } => peak * PI / duration * (PI * u).cos(),
            Shaping::SaturatingRamp { plateau, steepness } => {
                let k = *steepness;
                let (a, b) = ((k * u).tanh(), (k * (1.0 - u)).tanh());
                let scale = plateau / (k / 2.0).tanh().powi(2) * k / duration;
                scale * ((1.0 - a * a) * b - a * (1.0 - b * b))
            }
            Shaping::Tabulated { values } => {
                let n = values.len();
                let h = duration / (n - 1) as f64;
                let node = |k: usize| {
                    if k == 0 {
                        (values[1] - values[0]) / h
                    } else if k == n - 1 {
                        (values[n - 1] - values[n - 2]) / h
                    } else {
                        (values[k + 1] - values[k - 1]) / (2.0 * h)
                    }
                };
                let (k, frac) = grid_position(n, u);
                node(k) + frac * (node(k + 1) - node(k))
            }
        }
    }

    /// True when `s` vanishes at both ends, as exact synthesis requires.
    pub fn vanishes_at_ends(&self) -> bool {
        self.value(0.0, 1.0).abs() < 1e-12 && self.value(1.0, 1.0).abs() < 1e-12
    }
}

fn grid_position(n: usize, u: f64) -> (usize, f64) {
    let x = u * (n - 1) as f64;
    let k = (x.floor() as usize).min(n - 2);
    (k, x - k as f64)
}
