//! Builds a bistatic reflectivity table, stores it, and uses it as the target
//! signature of a scenario.

use isac_radar::channel::{paths_at, PathKind};
use isac_radar::scenario::SignatureSource;
use isac_radar::scenarios::{rooftop, RooftopOptions};
use isac_radar::signature::{read_table, write_table, ReflectivityTable};
use isac_radar::Scenario;
use num_complex::Complex32;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join(format!("isac_table_{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;

    // forward scatter grows toward 180 degrees, phase drifts with frequency
    let freqs: Vec<f64> = (0..5).map(|i| 2.99e9 + 5e6 * i as f64).collect();
    let angles: Vec<f64> = (0..=18).map(|i| 10.0 * i as f64).collect();
    let mut gains = Vec::new();
    for (fi, _) in freqs.iter().enumerate() {
        for a in &angles {
            let mag = 0.05 * (1.0 + 3.0 * (a / 180.0).powi(4));
            gains.push(Complex32::from_polar(mag as f32, 0.3 * fi as f32));
        }
    }
    let table = ReflectivityTable::new(freqs, angles, gains, "VV")?;
    let header = dir.join("drone_vv.json");
    write_table(&table, &header)?;
    let back = read_table(&header)?;
    println!("table round trip exact: {}", back == table);
    for beta in [0.0, 45.0, 97.5, 170.0] {
        println!("  |gain| at 3.0 GHz, {beta:5.1} deg: {:.4}", back.lookup(3.0e9, beta).norm());
    }

    let mut cfg = rooftop(&RooftopOptions { n_clutter: 0, ..Default::default() })?;
    let sig = cfg.targets[0].signature_id.clone();
    cfg.signatures.insert(sig, SignatureSource::Table { path: header.display().to_string() });
    let scn = Scenario::new(cfg, None)?;
    for link in 0..scn.n_links() {
        let target = paths_at(&scn, link, 2.0)?.into_iter().find(|p| p.kind == PathKind::Target);
        if let Some(p) = target {
            println!("link {link}: target path amplitude {:.3e}", p.amplitude.norm());
        }
    }
    Ok(())
}
