//! Signed spherical area enclosed by a closed Bloch path.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::wrap_angle;
use crate::state::BlochVector;

/// Largest endpoint separation still counted as a closed path.
pub const CLOSURE_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolidAngle {
    /// Total signed area, counter-clockwise about the pole counted positive.
    /// Repeated loops add up.
    pub area: f64,
    /// Net number of turns about the pole.
    pub winding: i64,
    /// Area of a single loop.
    pub per_loop: f64,
    pub pole: [f64; 3],
}

type V3 = [f64; 3];

fn dot(a: V3, b: V3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: V3, b: V3) -> V3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn normalized(a: V3) -> Option<V3> {
    let n = dot(a, a).sqrt();
    (n > 1e-12).then(|| [a[0] / n, a[1] / n, a[2] / n])
}

/// Solid angle of a closed path, measured against `axis` (or the centroid of
/// the path when no axis is given). Each step is closed into a geodesic
/// triangle with the pole and the signed triangle areas are summed.
pub fn solid_angle(path: &[BlochVector], axis: Option<[f64; 3]>) -> Result<SolidAngle> {
    if path.len() < 3 {
        return Err(Error::Invalid("a closed path needs at least three points".into()));
    }
    let points: Vec<V3> = path
        .iter()
        .map(|r| normalized(r.to_array()).ok_or_else(|| Error::Invalid("path point at the origin".into())))
        .collect::<Result<_>>()?;
    let (first, last) = (points[0], points[points.len() - 1]);
    let gap = dot(
        [first[0] - last[0], first[1] - last[1], first[2] - last[2]],
        [first[0] - last[0], first[1] - last[1], first[2] - last[2]],
    )
    .sqrt();
    if gap > CLOSURE_TOL {
        return Err(Error::Invalid(format!("path is not closed (endpoint gap {gap:.3e})")));
    }

    let pole = match axis {
        Some(a) => normalized(a).ok_or_else(|| Error::Invalid("zero axis".into()))?,
        None => {
            let sum = points
                .iter()
                .fold([0.0; 3], |acc, p| [acc[0] + p[0], acc[1] + p[1], acc[2] + p[2]]);
            normalized(sum).ok_or_else(|| Error::Invalid("path centroid vanishes; supply an axis".into()))?
        }
    };
    if points.iter().any(|&p| dot(p, pole).abs() > 1.0 - 1e-12) {
        return Err(Error::Invalid("path passes through the reference pole".into()));
    }

    let e1 = {
        let trial = if pole[0].abs() < 0.9 {
            [1.0, 0.0, 0.0]
        } else {
            [0.0, 1.0, 0.0]
        };
        normalized(cross(pole, trial)).unwrap()
    };
    let e2 = cross(pole, e1);
    let azimuth = |p: V3| dot(p, e2).atan2(dot(p, e1));

    let mut area = 0.0;
    let mut turned = 0.0;
    for w in points.windows(2) {
        let (a, b) = (w[0], w[1]);
        let num = dot(pole, cross(a, b));
        let den = 1.0 + dot(pole, a) + dot(pole, b) + dot(a, b);
        area += 2.0 * num.atan2(den);
        turned += wrap_angle(azimuth(b) - azimuth(a));
    }
    let winding = (turned / (2.0 * PI)).round() as i64;
    let per_loop = if winding != 0 { area / winding as f64 } else { area };
    Ok(SolidAngle {
        area,
        winding,
        per_loop,
        pole,
    })
}

/// Geometric phase of a closed loop from its signed area, `-A/2`, wrapped
/// into `(-pi, pi]`.
pub fn area_phase(area: f64) -> f64 {
    wrap_angle(-area / 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cone(theta: f64, n: usize, turns: f64, clockwise: bool) -> Vec<BlochVector> {
        (0..=n)
            .map(|k| {
                let mut phi = turns * 2.0 * PI * k as f64 / n as f64;
                if clockwise {
                    phi = -phi;
                }
                BlochVector::new(theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()).unwrap()
            })
            .collect()
    }

    #[test]
    fn spherical_cap() {
        for &th in &[0.3, 1.0, 2.0, 2.8] {
            let s = solid_angle(&cone(th, 20000, 1.0, false), Some([0.0, 0.0, 1.0])).unwrap();
            let cap = 2.0 * PI * (1.0 - th.cos());
            assert!((s.area / cap - 1.0).abs() < 1e-6, "{th}: {} vs {cap}", s.area);
            assert_eq!(s.winding, 1);
        }
    }

    #[test]
    fn orientation_flips_sign() {
        let s = solid_angle(&cone(0.8, 4000, 1.0, true), None).unwrap();
        assert!((s.area + 2.0 * PI * (1.0 - 0.8f64.cos())).abs() < 1e-5);
        assert_eq!(s.winding, -1);
    }

    #[test]
    fn great_circle_is_a_hemisphere() {
        let s = solid_angle(&cone(PI / 2.0, 20000, 1.0, false), Some([0.0, 0.0, 1.0])).unwrap();
        assert!((s.area - 2.0 * PI).abs() < 1e-6);
        assert!(solid_angle(&cone(PI / 2.0, 100, 1.0, false), None).is_err());
    }

    #[test]
    fn repeated_loops_multiply() {
        let s = solid_angle(&cone(0.6, 5 * 4000, 5.0, false), Some([0.0, 0.0, 1.0])).unwrap();
        assert_eq!(s.winding, 5);
        assert!((s.per_loop - 2.0 * PI * (1.0 - 0.6f64.cos())).abs() < 1e-5);
    }

    #[test]
    fn rejects_open_paths_and_pole_crossings() {
        let mut open = cone(0.6, 100, 1.0, false);
        open.pop();
        assert!(solid_angle(&open, Some([0.0, 0.0, 1.0])).is_err());
        let through = vec![
            BlochVector::new(0.0, 0.0, 1.0).unwrap(),
            BlochVector::new(1.0, 0.0, 0.0).unwrap(),
            BlochVector::new(0.0, 1.0, 0.0).unwrap(),
            BlochVector::new(0.0, 0.0, 1.0).unwrap(),
        ];
        assert!(solid_angle(&through, Some([0.0, 0.0, 1.0])).is_err());
    }

    #[test]
    fn area_phase_wraps() {
        assert!((area_phase(PI) + PI / 2.0).abs() < 1e-15);
        assert!((area_phase(3.0 * PI) - PI / 2.0).abs() < 1e-12);
    }
}
