//! Multi-static ISAC radar toolkit.
//!
//! The crate covers the whole chain from scene description to evaluated
//! position fixes:
//!
//! * [`scenario`]: node/target geometry, kinematics and bistatic ground truth.
//! * [`signature`]: tabulated bistatic reflectivity, rotor tip scatterers and
//!   micro-Doppler spectrogram analysis.
//! * [`channel`]: geometrically consistent per-link channel frequency
//!   responses (LOS, target, rotor, clutter, noise).
//! * [`sounding_io`]: on-disk dataset container (`meta.json`, `cfr.bin`, `gt.csv`).
//! * [`dsp`]: channel estimation, delay-Doppler maps, background subtraction,
//!   zero-Doppler notch, CA-CFAR and parabolic peak refinement.
//! * [`tracking`]: per-link Kalman tracking with GNN association, and
//!   Gauss-Newton localization from bistatic ranges.
//! * [`eval`]: detection/track/fix metrics against ground truth.
//! * [`commands`]: the file-based stages behind the `isac` binary.

pub mod channel;
pub mod commands;
pub mod dsp;
pub mod error;
pub mod eval;
pub mod scenario;
pub mod scenarios;
pub mod signature;
pub mod sounding_io;
pub mod tracking;

pub use error::{Error, Result};
pub use scenario::{Scenario, ScenarioConfig, Vec3, SPEED_OF_LIGHT};
