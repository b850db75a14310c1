//! Sounding dataset round trip: write, stream back, seek, and detect truncation.

use isac_radar::channel::synthesize_stream;
use isac_radar::scenarios::{rooftop, RooftopOptions};
use isac_radar::sounding_io::{read_dataset, DatasetReader};
use isac_radar::commands::{synth_scenario, GlobalOptions};
use isac_radar::Scenario;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile_dir();
    let scn = Scenario::new(rooftop(&RooftopOptions { duration_s: 1.0, ..Default::default() })?, None)?;
    synth_scenario(&scn, &dir, &GlobalOptions::default(), None, std::time::Instant::now())?;

    let mut reader = DatasetReader::open(&dir)?;
    let meta = reader.meta().clone();
    println!(
        "{} snapshots x {} links x {} subcarriers, {} bytes each",
        meta.n_snapshots,
        meta.links.len(),
        meta.n_subcarriers,
        meta.snapshot_bytes()
    );
    reader.seek(500)?;
    let snap = reader.read_snapshot()?.expect("snapshot 500");
    println!("snapshot 500 at t = {:.3} s", snap.t_s);

    let (stream, gt) = read_dataset(&dir)?;
    let mut reference = synthesize_stream(&scn)?;
    reference.quantize_f32();
    println!("round trip identical after f32 quantization: {}", stream == reference);
    println!("{} ground-truth records", gt.len());

    let bin = dir.join("cfr.bin");
    let len = std::fs::metadata(&bin)?.len();
    std::fs::OpenOptions::new().write(true).open(&bin)?.set_len(len - 6)?;
    match DatasetReader::open(&dir) {
        Ok(_) => println!("truncation went unnoticed"),
        Err(e) => println!("truncated payload rejected: {e}"),
    }
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}

fn tempfile_dir() -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("isac_io_{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    dir
}
