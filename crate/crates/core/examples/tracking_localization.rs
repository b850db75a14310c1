//! Tracking and localization from noisy per-link measurements of the rooftop
//! target, with dropouts and false alarms mixed in.

use isac_radar::channel::target_truth;
use isac_radar::commands::{localize_tracks, track_detections, Geometry};
use isac_radar::dsp::Detection;
use isac_radar::scenarios::{rooftop, RooftopOptions};
use isac_radar::tracking::{LocalizeConfig, TrackStatus, TrackerConfig};
use isac_radar::Scenario;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn main() -> isac_radar::Result<()> {
    let scn = Scenario::new(rooftop(&RooftopOptions::default())?, None)?;
    let period = 0.128;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let delay_noise = Normal::new(0.0, 1e-9).unwrap();
    let doppler_noise = Normal::new(0.0, 1.0).unwrap();
    let mut detections = Vec::new();
    for c in 0..150 {
        let t = c as f64 * period;
        for link in 0..scn.n_links() {
            let det = |delay_s: f64, doppler_hz: f64| Detection {
                link,
                cpi_start_s: t,
                delay_s,
                doppler_hz,
                snr_db: 15.0,
                delay_refined: true,
                doppler_refined: true,
            };
            if rng.random_bool(0.9) {
                let (delay, doppler) = target_truth(&scn, link, 0, t)?;
                detections.push(det(delay + delay_noise.sample(&mut rng), doppler + doppler_noise.sample(&mut rng)));
            }
            if rng.random_bool(0.2) {
                detections.push(det(rng.random_range(0.0..6e-6), rng.random_range(-400.0..400.0)));
            }
        }
    }
    let tracks = track_detections(&detections, &TrackerConfig::default())?;
    let confirmed = tracks.iter().filter(|r| r.status == TrackStatus::Confirmed).count();
    let ids: std::collections::BTreeSet<_> = tracks.iter().map(|r| (r.link, r.track_id)).collect();
    println!("{} detections -> {} tracks, {} confirmed reports", detections.len(), ids.len(), confirmed);

    let fixes = localize_tracks(&tracks, &Geometry::from_scenario(&scn), &LocalizeConfig::default())?;
    let mut sq = 0.0;
    for f in &fixes {
        let truth = scn.targets[0].trajectory.position_at(f.t_s);
        sq += (f.position - truth).norm_squared();
    }
    println!("{} fixes, position RMSE {:.2} m", fixes.len(), (sq / fixes.len().max(1) as f64).sqrt());
    Ok(())
}
