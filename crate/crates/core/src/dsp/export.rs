use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::map::DelayDopplerMap;
use super::refine::Detection;
use crate::error::{Error, Result};

pub const DETECTIONS_HEADER: &str = "cpi_start_s,link,delay_s,doppler_hz,snr_db";

const DB_FLOOR: f64 = -300.0;

fn cell_db(map: &DelayDopplerMap, k: usize, m: usize) -> f64 {
    let p = map.power(k, m);
    if p > 0.0 {
        (10.0 * p.log10()).max(DB_FLOOR)
    } else {
        DB_FLOOR
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

/// Power in dB, one row per delay bin, one column per Doppler bin.
pub fn write_map_csv(map: &DelayDopplerMap, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    let mut line = String::new();
    for k in 0..map.n_delay {
        line.clear();
        for m in 0..map.n_doppler {
            if m > 0 {
                line.push(',');
            }
            line.push_str(&cell_db(map, k, m).to_string());
        }
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// 8-bit binary PGM, Doppler across, delay down, dB scaled min to max.
pub fn write_map_pgm(map: &DelayDopplerMap, path: &Path) -> Result<()> {
    let db: Vec<f64> = (0..map.n_delay)
        .flat_map(|k| (0..map.n_doppler).map(move |m| (k, m)))
        .map(|(k, m)| cell_db(map, k, m))
        .collect();
    let lo = db.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = db.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let pixels: Vec<u8> = db.iter().map(|v| ((v - lo) / span * 255.0).round() as u8).collect();
    let mut w = create(path)?;
    write!(w, "P5\n{} {}\n255\n", map.n_doppler, map.n_delay).map_err(|e| Error::io(path, e))?;
    w.write_all(&pixels).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_detections_csv(detections: &[Detection], path: &Path) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "{DETECTIONS_HEADER}").map_err(|e| Error::io(path, e))?;
    for d in detections {
        writeln!(w, "{},{},{},{},{}", d.cpi_start_s, d.link, d.delay_s, d.doppler_hz, d.snr_db)
            .map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(serde::Deserialize)]
struct Row {
    cpi_start_s: f64,
    link: usize,
    delay_s: f64,
    doppler_hz: f64,
    snr_db: f64,
}

pub fn read_detections_csv(path: &Path) -> Result<Vec<Detection>> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    if header.join(",") != DETECTIONS_HEADER {
        return Err(Error::Data(format!("{}: unexpected header {:?}", path.display(), header.join(","))));
    }
    r.deserialize::<Row>()
        .map(|row| {
            let row = row?;
            Ok(Detection {
                link: row.link,
                cpi_start_s: row.cpi_start_s,
                delay_s: row.delay_s,
                doppler_hz: row.doppler_hz,
                snr_db: row.snr_db,
                delay_refined: true,
                doppler_refined: true,
            })
        })
        .collect()
}
