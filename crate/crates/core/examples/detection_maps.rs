//! Delay-Doppler maps, background subtraction and CFAR on one link, with the
//! residual map of each CPI written as a PGM image.
//!
//! `cargo run --release --example detection_maps [out_dir]`

use std::path::PathBuf;

use isac_radar::channel::{target_truth, SnapshotStream, StreamInfo};
use isac_radar::dsp::{write_map_pgm, DspConfig, LinkProcessor};
use isac_radar::scenarios::{rooftop, RooftopOptions};
use isac_radar::Scenario;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("isac_maps"));
    std::fs::create_dir_all(&out)?;
    let scn = Scenario::new(rooftop(&RooftopOptions { duration_s: 2.0, ..Default::default() })?, None)?;
    let info = StreamInfo::from_scenario(&scn);
    let mut dsp = DspConfig::default();
    dsp.cfar.pfa = 1e-6;
    let mut proc = LinkProcessor::for_stream(&info, &dsp)?.remove(0);

    let snapshots = SnapshotStream::new(&scn, 0).collect::<isac_radar::Result<Vec<_>>>()?;
    for (c, block) in snapshots.chunks_exact(dsp.cpi_len).enumerate() {
        let rows: Vec<_> = block.iter().map(|s| s.links[0].as_slice()).collect();
        let cpi = proc.process(block[0].t_s, &rows)?;
        let path = out.join(format!("residual_{c:02}.pgm"));
        write_map_pgm(&cpi.residual, &path)?;
        let centre = block[0].t_s + dsp.epoch_offset_s(info.snapshot_rate_hz);
        let (delay, doppler) = target_truth(&scn, 0, 0, centre)?;
        println!("CPI {c:2}: truth {:8.2} ns {:+7.2} Hz", delay * 1e9, doppler);
        for d in &cpi.detections {
            println!("        det   {:8.2} ns {:+7.2} Hz  {:5.1} dB", d.delay_s * 1e9, d.doppler_hz, d.snr_db);
        }
    }
    println!("maps in {}", out.display());
    Ok(())
}
