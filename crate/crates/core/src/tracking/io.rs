use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Deserialize;

use super::localize::PositionFix;
use super::tracker::{TrackReport, TrackStatus};
use crate::error::{Error, Result};
use crate::scenario::Vec3;

pub const TRACKS_HEADER: &str = "t_s,link,track_id,status,delay_s,doppler_hz";
pub const FIXES_HEADER: &str = "t_s,x,y,z,residual_m,n_links";

fn write_lines<I: IntoIterator<Item = String>>(path: &Path, header: &str, lines: I) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    writeln!(w, "{header}").map_err(|e| Error::io(path, e))?;
    for l in lines {
        writeln!(w, "{l}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn open(path: &Path, header: &str) -> Result<csv::Reader<File>> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let mut r = csv::Reader::from_path(path)?;
    let found = r.headers()?.iter().collect::<Vec<_>>().join(",");
    if found != header {
        return Err(Error::Data(format!("{}: expected header {header:?}, found {found:?}", path.display())));
    }
    Ok(r)
}

pub fn write_tracks_csv(reports: &[TrackReport], path: &Path) -> Result<()> {
    write_lines(
        path,
        TRACKS_HEADER,
        reports
            .iter()
            .map(|r| format!("{},{},{},{},{},{}", r.t_s, r.link, r.track_id, r.status, r.delay_s, r.doppler_hz)),
    )
}

#[derive(Deserialize)]
struct TrackRow {
    t_s: f64,
    link: usize,
    track_id: u64,
    status: String,
    delay_s: f64,
    doppler_hz: f64,
}

pub fn read_tracks_csv(path: &Path) -> Result<Vec<TrackReport>> {
    let mut r = open(path, TRACKS_HEADER)?;
    r.deserialize::<TrackRow>()
        .map(|row| {
            let row = row?;
            Ok(TrackReport {
                t_s: row.t_s,
                link: row.link,
                track_id: row.track_id,
                status: row.status.parse::<TrackStatus>()?,
                delay_s: row.delay_s,
                doppler_hz: row.doppler_hz,
            })
        })
        .collect()
}

pub fn write_fixes_csv(fixes: &[PositionFix], path: &Path) -> Result<()> {
    write_lines(
        path,
        FIXES_HEADER,
        fixes.iter().map(|f| {
            format!("{},{},{},{},{},{}", f.t_s, f.position.x, f.position.y, f.position.z, f.residual_m, f.n_links)
        }),
    )
}

#[derive(Deserialize)]
struct FixRow {
    t_s: f64,
    x: f64,
    y: f64,
    z: f64,
    residual_m: f64,
    n_links: usize,
}

pub fn read_fixes_csv(path: &Path) -> Result<Vec<PositionFix>> {
    let mut r = open(path, FIXES_HEADER)?;
    r.deserialize::<FixRow>()
        .map(|row| {
            let row = row?;
            Ok(PositionFix {
                t_s: row.t_s,
                position: Vec3::new(row.x, row.y, row.z),
                residual_m: row.residual_m,
                n_links: row.n_links,
                iterations: 0,
            })
        })
        .collect()
}
