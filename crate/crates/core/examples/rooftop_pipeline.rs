//! End-to-end run on the rooftop scene: synthesize, detect, track, localize, score.
//!
//! `cargo run --release --example rooftop_pipeline [out_dir]`

use std::path::PathBuf;
use std::time::Instant;

use isac_radar::commands::{self, EvalConfig, EvalPaths, GlobalOptions, DETECTIONS_FILE, FIXES_FILE, TRACKS_FILE};
use isac_radar::dsp::{write_detections_csv, CfarConfig, DspConfig};
use isac_radar::scenarios::{rooftop, RooftopOptions};
use isac_radar::tracking::{write_fixes_csv, write_tracks_csv, LocalizeConfig, TrackerConfig};
use isac_radar::Scenario;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("isac_rooftop"));
    let started = Instant::now();
    let opts = GlobalOptions::default();

    let cfg = rooftop(&RooftopOptions::default())?;
    println!("noise power {:.1} dBm per subcarrier", cfg.noise_power_dbm.unwrap());
    let scn = Scenario::new(cfg, None)?;
    let data = out.join("dataset");
    commands::synth_scenario(&scn, &data, &opts, None, Instant::now())?;
    println!("synth    {:6.2} s", started.elapsed().as_secs_f64());

    let dsp = DspConfig { cfar: CfarConfig { pfa: 1e-6, ..Default::default() }, ..Default::default() };
    let dsp_path = out.join("dsp.json");
    std::fs::write(&dsp_path, serde_json::to_string_pretty(&dsp)?)?;
    let detections = commands::process_dataset(&data, &dsp, None)?;
    write_detections_csv(&detections, &out.join(DETECTIONS_FILE))?;
    println!("process  {:6.2} s, {} detections", started.elapsed().as_secs_f64(), detections.len());

    let tracks = commands::track_detections(&detections, &TrackerConfig::default())?;
    write_tracks_csv(&tracks, &out.join(TRACKS_FILE))?;
    let geometry = commands::Geometry::from_scenario(&scn);
    let fixes = commands::localize_tracks(&tracks, &geometry, &LocalizeConfig::default())?;
    write_fixes_csv(&fixes, &out.join(FIXES_FILE))?;
    println!("track+fix {:5.2} s, {} fixes", started.elapsed().as_secs_f64(), fixes.len());

    let report = commands::evaluate(
        &EvalPaths {
            dataset: &data,
            dsp_config: Some(&dsp_path),
            detections: &out.join(DETECTIONS_FILE),
            tracks: Some(&out.join(TRACKS_FILE)),
            fixes: Some(&out.join(FIXES_FILE)),
        },
        &EvalConfig::default(),
    )?;
    println!("{report}");
    println!("total    {:6.2} s, outputs in {}", started.elapsed().as_secs_f64(), out.display());
    Ok(())
}
