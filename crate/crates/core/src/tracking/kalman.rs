use nalgebra::{Matrix2, Vector2};

use crate::error::{Error, Result};

/// Constant-velocity filter state in delay: `x = (tau, tau_dot)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KalmanState {
    pub x: Vector2<f64>,
    pub p: Matrix2<f64>,
}

/// Innovation of one measurement against a predicted state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Innovation {
    pub y: Vector2<f64>,
    pub s: Matrix2<f64>,
    /// Squared Mahalanobis distance `y' S^-1 y`.
    pub d2: f64,
}

pub fn transition(dt: f64) -> Matrix2<f64> {
    Matrix2::new(1.0, dt, 0.0, 1.0)
}

/// White-noise-acceleration process covariance.
pub fn process_noise(q: f64, dt: f64) -> Matrix2<f64> {
    let (d2, d3) = (dt * dt, dt * dt * dt);
    Matrix2::new(d3 / 3.0, d2 / 2.0, d2 / 2.0, dt) * q
}

/// Measurement matrix for `z = (tau, doppler)` with `doppler = -fc * tau_dot`.
pub fn measurement_matrix(carrier_hz: f64) -> Matrix2<f64> {
    Matrix2::new(1.0, 0.0, 0.0, -carrier_hz)
}

fn symmetrize(p: Matrix2<f64>) -> Matrix2<f64> {
    (p + p.transpose()) * 0.5
}

impl KalmanState {
    /// State seeded from a single measurement.
    pub fn from_measurement(z: Vector2<f64>, r: &Matrix2<f64>, carrier_hz: f64) -> Self {
        KalmanState {
            x: Vector2::new(z[0], -z[1] / carrier_hz),
            p: Matrix2::new(r[(0, 0)], 0.0, 0.0, r[(1, 1)] / (carrier_hz * carrier_hz)),
        }
    }

    pub fn predict(&self, dt: f64, q: f64) -> Self {
        let f = transition(dt);
        KalmanState {
            x: f * self.x,
            p: symmetrize(f * self.p * f.transpose() + process_noise(q, dt)),
        }
    }

    pub fn innovation(&self, z: Vector2<f64>, r: &Matrix2<f64>, carrier_hz: f64) -> Result<Innovation> {
        let h = measurement_matrix(carrier_hz);
        let y = z - h * self.x;
        let s = symmetrize(h * self.p * h.transpose() + r);
        let s_inv = positive_inverse(&s)?;
        Ok(Innovation { y, s, d2: (y.transpose() * s_inv * y)[0] })
    }

    /// Optimal-gain update, Joseph form.
    pub fn update(&self, z: Vector2<f64>, r: &Matrix2<f64>, carrier_hz: f64) -> Result<(Self, Innovation)> {
        let h = measurement_matrix(carrier_hz);
        let inn = self.innovation(z, r, carrier_hz)?;
        let k = self.p * h.transpose() * positive_inverse(&inn.s)?;
        let a = Matrix2::identity() - k * h;
        let p = symmetrize(a * self.p * a.transpose() + k * r * k.transpose());
        Ok((KalmanState { x: self.x + k * inn.y, p }, inn))
    }

    pub fn delay_s(&self) -> f64 {
        self.x[0]
    }

    pub fn doppler_hz(&self, carrier_hz: f64) -> f64 {
        -carrier_hz * self.x[1]
    }
}

fn positive_inverse(s: &Matrix2<f64>) -> Result<Matrix2<f64>> {
    let det = s.determinant();
    if !(s[(0, 0)] > 0.0 && det > 0.0) || !det.is_finite() {
        return Err(Error::Numerical(format!(
            "innovation covariance is not positive definite (det {det:e}); check r_meas"
        )));
    }
    Ok(Matrix2::new(s[(1, 1)], -s[(0, 1)], -s[(1, 0)], s[(0, 0)]) / det)
}
