//! Processing step 5: per-link (delay, Doppler) tracking and multistatic
//! position fixes from bistatic ranges.

mod assoc;
mod io;
mod kalman;
mod localize;
mod tracker;

pub use assoc::{associate, hungarian, Assignment};
pub use io::{read_fixes_csv, read_tracks_csv, write_fixes_csv, write_tracks_csv, FIXES_HEADER, TRACKS_HEADER};
pub use kalman::{measurement_matrix, process_noise, transition, Innovation, KalmanState};
pub use localize::{grid_search, localize, BistaticMeasurement, LocalizeConfig, PositionFix};
pub use tracker::{chi2_gate, TrackReport, TrackState, TrackStatus, Tracker, TrackerConfig};
