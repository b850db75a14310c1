use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MASK_EPS: f64 = 1e-6;

/// Known transmitted pilot spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Pilot {
    /// All-ones pilot: the container already holds channel responses.
    #[default]
    Unit,
    /// Constant-modulus Zadoff-Chu sequence with the given root.
    ZadoffChu { root: usize },
}

impl Pilot {
    pub fn spectrum(&self, n: usize) -> Vec<Complex64> {
        match *self {
            Pilot::Unit => vec![Complex64::new(1.0, 0.0); n],
            Pilot::ZadoffChu { root } => {
                let odd = (n % 2) as f64;
                (0..n)
                    .map(|k| {
                        let k = k as f64;
                        Complex64::from_polar(1.0, -PI * root as f64 * k * (k + odd) / n as f64)
                    })
                    .collect()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelEstimate {
    pub values: Vec<Complex64>,
    /// False where the pilot was too weak to divide by; those values are zero.
    pub valid: Vec<bool>,
}

/// Point-wise division of the received spectrum by the known pilot.
pub fn estimate_channel(rx: &[Complex64], tx: &[Complex64]) -> Result<ChannelEstimate> {
    if rx.len() != tx.len() {
        return Err(Error::Size(format!(
            "received spectrum has {} bins, pilot has {}",
            rx.len(),
            tx.len()
        )));
    }
    let peak = tx.iter().map(|x| x.norm()).fold(0.0, f64::max);
    if peak == 0.0 {
        return Err(Error::Numerical("pilot spectrum is all zero".into()));
    }
    let floor = MASK_EPS * peak;
    let mut values = Vec::with_capacity(rx.len());
    let mut valid = Vec::with_capacity(rx.len());
    for (r, t) in rx.iter().zip(tx) {
        if t.norm() >= floor {
            values.push(r / t);
            valid.push(true);
        } else {
            values.push(Complex64::default());
            valid.push(false);
        }
    }
    Ok(ChannelEstimate { values, valid })
}
