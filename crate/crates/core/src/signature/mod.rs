//! Target signatures: bistatic reflectivity, rotor micro-Doppler and its analysis.

mod reflectivity;
mod rotor;
mod spectrogram;

use std::sync::Arc;

use num_complex::Complex64;

pub use reflectivity::{read_table, reflectivity_lookup, write_table, ReflectivityTable, TableHeader};
pub use rotor::{rotor_scatterers, rotor_tip_velocities, RotorSpec};
pub use spectrogram::{
    flash_rate, flash_rate_with, occupancy, spectrogram, trace_period, FlashRateConfig, SinusoidTrace,
    Spectrogram,
};

/// Reflectivity model of a target body.
#[derive(Debug, Clone)]
pub enum Signature {
    Constant(Complex64),
    Table(Arc<ReflectivityTable>),
}

impl Signature {
    pub fn gain(&self, freq_hz: f64, bistatic_angle_deg: f64) -> Complex64 {
        match self {
            Signature::Constant(g) => *g,
            Signature::Table(t) => t.lookup(freq_hz, bistatic_angle_deg),
        }
    }
}
