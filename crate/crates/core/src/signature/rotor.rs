use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::Vec3;

/// Rotor modelled as one point scatterer at each blade tip.
///
/// Blade length, occlusion and blade-flash specular returns are not modelled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RotorSpec {
    pub n_blades: usize,
    pub blade_radius_m: f64,
    pub rotation_hz: f64,
    /// Unit normal of the rotation plane.
    pub plane_normal: Vec3,
    /// Complex reflectivity gain of each tip.
    pub tip_amplitude: Complex64,
    #[serde(default)]
    pub phase0_rad: f64,
}

impl RotorSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_blades == 0 {
            return Err(Error::Config("rotor needs at least one blade".into()));
        }
        if !(self.blade_radius_m > 0.0) {
            return Err(Error::Config("rotor blade_radius_m must be > 0".into()));
        }
        if (self.plane_normal.norm() - 1.0).abs() > 1e-9 {
            return Err(Error::Config("rotor plane_normal must be a unit vector".into()));
        }
        Ok(())
    }

    /// Fixed in-plane reference direction (blade 0 at zero angle).
    fn basis(&self) -> (Vec3, Vec3) {
        let n = self.plane_normal;
        let axis = if n.x.abs() <= n.y.abs() && n.x.abs() <= n.z.abs() {
            Vec3::x()
        } else if n.y.abs() <= n.z.abs() {
            Vec3::y()
        } else {
            Vec3::z()
        };
        let e = (axis - n * n.dot(&axis)).normalize();
        (e, n.cross(&e))
    }

    fn blade_angle(&self, j: usize, t: f64) -> f64 {
        TAU * self.rotation_hz * t + self.phase0_rad + TAU * j as f64 / self.n_blades as f64
    }
}

/// Tip scatterer positions and gains at time `t` for a rotor centred at `hub`.
pub fn rotor_scatterers(rotor: &RotorSpec, hub: &Vec3, t: f64) -> Vec<(Vec3, Complex64)> {
    let (e, f) = rotor.basis();
    (0..rotor.n_blades)
        .map(|j| {
            let (s, c) = rotor.blade_angle(j, t).sin_cos();
            (hub + (e * c + f * s) * rotor.blade_radius_m, rotor.tip_amplitude)
        })
        .collect()
}

/// Tip velocities relative to the hub at time `t`.
pub fn rotor_tip_velocities(rotor: &RotorSpec, t: f64) -> Vec<Vec3> {
    let (e, f) = rotor.basis();
    let w = TAU * rotor.rotation_hz;
    (0..rotor.n_blades)
        .map(|j| {
            let (s, c) = rotor.blade_angle(j, t).sin_cos();
            (f * c - e * s) * (w * rotor.blade_radius_m)
        })
        .collect()
}
