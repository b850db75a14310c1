use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};

use num_complex::{Complex32, Complex64};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const TABLE_FORMAT_VERSION: u32 = 1;

static CLAMP_WARNED: AtomicBool = AtomicBool::new(false);

/// Complex bistatic reflectivity over (frequency, bistatic angle).
///
/// Gains are linear amplitudes stored freq-major, angle-minor. They are kept
/// in single precision so that the on-disk form round-trips bit-exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct ReflectivityTable {
    freq_grid_hz: Vec<f64>,
    angle_grid_deg: Vec<f64>,
    gains: Vec<Complex32>,
    polarization_tag: String,
}

impl ReflectivityTable {
    pub fn new(
        freq_grid_hz: Vec<f64>,
        angle_grid_deg: Vec<f64>,
        gains: Vec<Complex32>,
        polarization_tag: impl Into<String>,
    ) -> Result<Self> {
        if freq_grid_hz.is_empty() || angle_grid_deg.is_empty() {
            return Err(Error::Config("reflectivity table is empty".into()));
        }
        if !strictly_ascending(&freq_grid_hz) || !strictly_ascending(&angle_grid_deg) {
            return Err(Error::Config("reflectivity grids must be strictly ascending".into()));
        }
        if angle_grid_deg[0] < 0.0 || *angle_grid_deg.last().unwrap() > 180.0 {
            return Err(Error::Config("bistatic angle grid must lie in [0, 180] degrees".into()));
        }
        if gains.len() != freq_grid_hz.len() * angle_grid_deg.len() {
            return Err(Error::Size(format!(
                "gain matrix has {} entries, grids need {}x{}",
                gains.len(),
                freq_grid_hz.len(),
                angle_grid_deg.len()
            )));
        }
        if gains.iter().any(|g| !g.re.is_finite() || !g.im.is_finite()) {
            return Err(Error::Config("reflectivity gains must be finite".into()));
        }
        Ok(ReflectivityTable {
            freq_grid_hz,
            angle_grid_deg,
            gains,
            polarization_tag: polarization_tag.into(),
        })
    }

    pub fn constant(freq_grid_hz: Vec<f64>, angle_grid_deg: Vec<f64>, gain: Complex32) -> Result<Self> {
        let n = freq_grid_hz.len() * angle_grid_deg.len();
        Self::new(freq_grid_hz, angle_grid_deg, vec![gain; n], "none")
    }

    pub fn freq_grid_hz(&self) -> &[f64] {
        &self.freq_grid_hz
    }

    pub fn angle_grid_deg(&self) -> &[f64] {
        &self.angle_grid_deg
    }

    pub fn gains(&self) -> &[Complex32] {
        &self.gains
    }

    pub fn polarization_tag(&self) -> &str {
        &self.polarization_tag
    }

    pub fn at(&self, fi: usize, ai: usize) -> Complex64 {
        let g = self.gains[fi * self.angle_grid_deg.len() + ai];
        Complex64::new(g.re as f64, g.im as f64)
    }

    /// Bilinear interpolation of re/im over the enclosing grid cell.
    /// Queries outside the grid clamp to the nearest edge.
    pub fn lookup(&self, freq_hz: f64, beta_deg: f64) -> Complex64 {
        let (fi, u, f_clamped) = cell(&self.freq_grid_hz, freq_hz);
        let (ai, v, a_clamped) = cell(&self.angle_grid_deg, beta_deg);
        if (f_clamped || a_clamped) && !CLAMP_WARNED.swap(true, Ordering::Relaxed) {
            log::warn!(
                "reflectivity query ({freq_hz} Hz, {beta_deg} deg) outside table span; clamping to the edge"
            );
        }
        let fi1 = (fi + 1).min(self.freq_grid_hz.len() - 1);
        let ai1 = (ai + 1).min(self.angle_grid_deg.len() - 1);
        self.at(fi, ai) * ((1.0 - u) * (1.0 - v))
            + self.at(fi1, ai) * (u * (1.0 - v))
            + self.at(fi, ai1) * ((1.0 - u) * v)
            + self.at(fi1, ai1) * (u * v)
    }
}

pub fn reflectivity_lookup(table: &ReflectivityTable, freq_hz: f64, beta_deg: f64) -> Complex64 {
    table.lookup(freq_hz, beta_deg)
}

fn strictly_ascending(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite()) && v.windows(2).all(|w| w[1] > w[0])
}

/// Lower cell index, fractional position within the cell and whether the query was clamped.
fn cell(grid: &[f64], x: f64) -> (usize, f64, bool) {
    let n = grid.len();
    if n == 1 {
        return (0, 0.0, x != grid[0]);
    }
    if x <= grid[0] {
        return (0, 0.0, x < grid[0]);
    }
    if x >= grid[n - 1] {
        return (n - 2, 1.0, x > grid[n - 1]);
    }
    let i = grid.partition_point(|&g| g <= x) - 1;
    (i, (x - grid[i]) / (grid[i + 1] - grid[i]), false)
}

/// JSON header of a reflectivity table file; the payload lives in `data_file`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableHeader {
    pub format_version: u32,
    pub polarization_tag: String,
    pub n_freq: usize,
    pub n_angle: usize,
    pub freq_grid_hz: Vec<f64>,
    pub angle_grid_deg: Vec<f64>,
    /// Little-endian f32 (re, im) pairs, freq-major; path relative to the header.
    pub data_file: String,
}

/// Writes `<stem>.json` plus the adjacent `<stem>.bin` payload.
pub fn write_table(table: &ReflectivityTable, header_path: &Path) -> Result<()> {
    let data_path = header_path.with_extension("bin");
    let data_file = data_path
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .ok_or_else(|| Error::Config(format!("invalid table path {}", header_path.display())))?;
    let header = TableHeader {
        format_version: TABLE_FORMAT_VERSION,
        polarization_tag: table.polarization_tag.clone(),
        n_freq: table.freq_grid_hz.len(),
        n_angle: table.angle_grid_deg.len(),
        freq_grid_hz: table.freq_grid_hz.clone(),
        angle_grid_deg: table.angle_grid_deg.clone(),
        data_file,
    };
    let json = serde_json::to_string_pretty(&header).expect("header serializes");
    fs::write(header_path, json).map_err(|e| Error::io(header_path, e))?;

    let mut bytes = Vec::with_capacity(table.gains.len() * 8);
    for g in &table.gains {
        bytes.extend_from_slice(&g.re.to_le_bytes());
        bytes.extend_from_slice(&g.im.to_le_bytes());
    }
    let mut f = fs::File::create(&data_path).map_err(|e| Error::io(&data_path, e))?;
    f.write_all(&bytes).map_err(|e| Error::io(&data_path, e))?;
    Ok(())
}

pub fn read_table(header_path: &Path) -> Result<ReflectivityTable> {
    if !header_path.exists() {
        return Err(Error::MissingFile(header_path.to_path_buf()));
    }
    let text = fs::read_to_string(header_path).map_err(|e| Error::io(header_path, e))?;
    let header: TableHeader = serde_json::from_str(&text).map_err(|e| Error::Schema {
        path: header_path.display().to_string(),
        message: e.to_string(),
    })?;
    if header.format_version != TABLE_FORMAT_VERSION {
        return Err(Error::Version {
            found: header.format_version,
            supported: TABLE_FORMAT_VERSION,
        });
    }
    if header.n_freq != header.freq_grid_hz.len() || header.n_angle != header.angle_grid_deg.len() {
        return Err(Error::Data("table header dimensions disagree with its grids".into()));
    }
    let data_path: PathBuf = header_path
        .parent()
        .map(|d| d.join(&header.data_file))
        .unwrap_or_else(|| PathBuf::from(&header.data_file));
    if !data_path.exists() {
        return Err(Error::MissingFile(data_path));
    }
    let bytes = fs::read(&data_path).map_err(|e| Error::io(&data_path, e))?;
    let expected = (header.n_freq * header.n_angle * 8) as u64;
    if bytes.len() as u64 != expected {
        return Err(Error::LengthMismatch {
            expected,
            actual: bytes.len() as u64,
        });
    }
    let gains = bytes
        .chunks_exact(8)
        .map(|c| {
            Complex32::new(
                f32::from_le_bytes([c[0], c[1], c[2], c[3]]),
                f32::from_le_bytes([c[4], c[5], c[6], c[7]]),
            )
        })
        .collect();
    ReflectivityTable::new(header.freq_grid_hz, header.angle_grid_deg, gains, header.polarization_tag)
}
