use std::fmt;
use std::str::FromStr;

use nalgebra::Matrix3;

use crate::error::Error;
use crate::meshkit::{shapes, Vec3};
use crate::photometrics::bias::minimal_rotation;

/// Illumination condition of a gradient sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Condition {
    X,
    Y,
    Z,
    C,
    Xc,
    Yc,
    Zc,
}

impl Condition {
    /// Storage order, matching `GradientSet` grids.
    pub const ALL: [Condition; 7] = [
        Condition::X,
        Condition::Y,
        Condition::Z,
        Condition::C,
        Condition::Xc,
        Condition::Yc,
        Condition::Zc,
    ];

    /// Intensity of the condition towards direction `w` (rig frame).
    pub fn intensity(self, w: &Vec3) -> f64 {
        match self {
            Condition::X => 0.5 * (w.x + 1.0),
            Condition::Y => 0.5 * (w.y + 1.0),
            Condition::Z => 0.5 * (w.z + 1.0),
            Condition::C => 1.0,
            Condition::Xc => 0.5 * (1.0 - w.x),
            Condition::Yc => 0.5 * (1.0 - w.y),
            Condition::Zc => 0.5 * (1.0 - w.z),
        }
    }

    /// Closed-form `1/pi * int L(w) max(n.w, 0) dw`: a Lambertian surface of
    /// unit albedo reflects `1/2 +- n_k/3` under a gradient and 1 under C.
    pub fn lambert_integral(self, n: &Vec3) -> f64 {
        match self {
            Condition::X => 0.5 + n.x / 3.0,
            Condition::Y => 0.5 + n.y / 3.0,
            Condition::Z => 0.5 + n.z / 3.0,
            Condition::C => 1.0,
            Condition::Xc => 0.5 - n.x / 3.0,
            Condition::Yc => 0.5 - n.y / 3.0,
            Condition::Zc => 0.5 - n.z / 3.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LightMode {
    Continuous,
    Led41,
}

impl FromStr for LightMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "continuous" => Ok(LightMode::Continuous),
            "led41" => Ok(LightMode::Led41),
            other => Err(Error::Argument(format!("unknown light mode `{other}`"))),
        }
    }
}

impl fmt::Display for LightMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LightMode::Continuous => "continuous",
            LightMode::Led41 => "led41",
        })
    }
}

/// Spherical illumination rig. Directions are in the rig frame, which
/// moves with the photometric camera.
#[derive(Debug, Clone, PartialEq)]
pub struct LightRig {
    pub mode: LightMode,
    pub leds: Vec<Vec3>,
    pub dome_radius: f64,
    /// Rig-to-camera rotation; identity keeps the dome aligned with the camera.
    pub orientation: Matrix3<f64>,
}

pub const DOME_RADIUS: f64 = 0.9;

impl LightRig {
    pub fn continuous() -> Self {
        LightRig {
            mode: LightMode::Continuous,
            leds: Vec::new(),
            dome_radius: DOME_RADIUS,
            orientation: Matrix3::identity(),
        }
    }

    pub fn led41() -> Self {
        LightRig {
            mode: LightMode::Led41,
            leds: led_dome(),
            dome_radius: DOME_RADIUS,
            orientation: Matrix3::identity(),
        }
    }

    pub fn new(mode: LightMode) -> Self {
        match mode {
            LightMode::Continuous => Self::continuous(),
            LightMode::Led41 => Self::led41(),
        }
    }

    /// Same rig turned by `r` relative to the camera. Equivalent to turning
    /// camera and subject together while the dome stays put.
    pub fn rotated(mut self, r: Matrix3<f64>) -> Self {
        self.orientation = r * self.orientation;
        self
    }

    /// Camera-frame direction expressed in the rig frame.
    pub fn to_rig(&self, d: &Vec3) -> Vec3 {
        self.orientation.transpose() * d
    }

    /// Solid angle attributed to each LED.
    pub fn led_solid_angle(&self) -> f64 {
        4.0 * std::f64::consts::PI / self.leds.len().max(1) as f64
    }
}

/// 41 dome directions: the 42-vertex geodesic sphere turned so that one
/// vertex points straight down (-y), with that vertex removed.
pub fn led_dome() -> Vec<Vec3> {
    let sphere = shapes::icosphere(1);
    let v = sphere.vertices();
    let mut bottom = 0;
    for i in 1..v.len() {
        if v[i].y < v[bottom].y {
            bottom = i;
        }
    }
    let rot = minimal_rotation(&v[bottom].normalize(), &-Vec3::y()).expect("not antiparallel");
    v.iter()
        .enumerate()
        .filter(|&(i, _)| i != bottom)
        .map(|(_, p)| (rot * p).normalize())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dome_has_41_unit_directions_and_no_bottom() {
        let d = led_dome();
        assert_eq!(d.len(), 41);
        assert!(d.iter().all(|w| (w.norm() - 1.0).abs() < 1e-12));
        assert!(d.iter().all(|w| w.y > -0.999));
    }

    #[test]
    fn complements_sum_to_constant() {
        let w = Vec3::new(0.3, -0.2, 0.9).normalize();
        for (a, b) in [(Condition::X, Condition::Xc), (Condition::Y, Condition::Yc), (Condition::Z, Condition::Zc)] {
            assert!((a.intensity(&w) + b.intensity(&w) - Condition::C.intensity(&w)).abs() < 1e-15);
            assert!((a.lambert_integral(&w) + b.lambert_integral(&w) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn lambert_integral_matches_quadrature() {
        // midpoint quadrature over the sphere of (w_x+1)/2 max(n.w,0)/pi
        let n = Vec3::new(0.4, 0.1, 0.8).normalize();
        let (nt, np) = (400, 800);
        let mut s = 0.0;
        for i in 0..nt {
            let t = (i as f64 + 0.5) * std::f64::consts::PI / nt as f64;
            for j in 0..np {
                let p = (j as f64 + 0.5) * 2.0 * std::f64::consts::PI / np as f64;
                let w = Vec3::new(t.sin() * p.cos(), t.sin() * p.sin(), t.cos());
                let da = t.sin() * (std::f64::consts::PI / nt as f64) * (2.0 * std::f64::consts::PI / np as f64);
                s += Condition::X.intensity(&w) * n.dot(&w).max(0.0) * da;
            }
        }
        assert!((s / std::f64::consts::PI - Condition::X.lambert_integral(&n)).abs() < 1e-4);
    }
}
