//! Path inventory and CFR of the rooftop scene at one instant.

use isac_radar::channel::{paths_at, subcarrier_offsets, synthesize_link, target_truth, PathKind};
use isac_radar::scenarios::{rooftop, RooftopOptions};
use isac_radar::Scenario;

fn main() -> isac_radar::Result<()> {
    let cfg = rooftop(&RooftopOptions { n_clutter: 5, ..Default::default() })?;
    let scn = Scenario::new(cfg.clone(), None)?;
    let t = 5.0;
    let offsets = subcarrier_offsets(cfg.n_subcarriers, cfg.bandwidth_hz);
    for link in 0..scn.n_links() {
        let (delay, doppler) = target_truth(&scn, link, 0, t)?;
        println!("link {link}: target at {:.2} ns, {:+.2} Hz", delay * 1e9, doppler);
        for p in paths_at(&scn, link, t)? {
            let tag = match p.kind {
                PathKind::Los => "los",
                PathKind::Target => "target",
                PathKind::Rotor => "rotor",
                PathKind::Clutter => "clutter",
            };
            println!("  {tag:8} {:9.2} ns {:7.1} dB", p.delay_s * 1e9, 20.0 * p.amplitude.norm().log10());
        }
        let index = (t * cfg.snapshot_rate_hz) as usize;
        let h = synthesize_link(&scn, link, index, &offsets)?;
        let mean_power = h.iter().map(|v| v.norm_sqr()).sum::<f64>() / h.len() as f64;
        println!("  CFR mean power {:.1} dB over {} subcarriers", 10.0 * mean_power.log10(), h.len());
    }
    Ok(())
}
