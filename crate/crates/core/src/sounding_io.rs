//! Dataset container for CFR streams and ground truth.
//!
//! A container directory holds exactly three files:
//!
//! * `meta.json`: [`DatasetMeta`].
//! * `cfr.bin`: little-endian `f32` pairs `(re, im)`, laid out
//!   `[snapshot][link][subcarrier]`, row-major, no padding.
//! * `gt.csv`: header `t_s,target_id,x,y,z,vx,vy,vz`; velocity columns may be empty.
//!
//! Snapshot timestamps are not stored; snapshot `n` is at `n / snapshot_rate_hz`.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::{CfrSnapshot, CfrStream, StreamInfo};
use crate::error::{Error, Result};
use crate::scenario::{LinkSpec, Vec3};

pub const FORMAT_VERSION: u32 = 1;
pub const META_FILE: &str = "meta.json";
pub const CFR_FILE: &str = "cfr.bin";
pub const GT_FILE: &str = "gt.csv";
const GT_HEADER: [&str; 8] = ["t_s", "target_id", "x", "y", "z", "vx", "vy", "vz"];

/// Position of a node: fixed coordinates, or a trajectory JSON next to `meta.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NodePosition {
    Fixed(Vec3),
    Trajectory { trajectory_file: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub format_version: u32,
    pub carrier_hz: f64,
    pub bandwidth_hz: f64,
    pub n_subcarriers: usize,
    pub n_snapshots: usize,
    pub n_links: usize,
    pub snapshot_rate_hz: f64,
    pub links: Vec<LinkSpec>,
    pub node_positions: BTreeMap<String, NodePosition>,
}

impl DatasetMeta {
    pub fn stream_info(&self) -> StreamInfo {
        StreamInfo {
            carrier_hz: self.carrier_hz,
            bandwidth_hz: self.bandwidth_hz,
            n_subcarriers: self.n_subcarriers,
            snapshot_rate_hz: self.snapshot_rate_hz,
            links: self.links.clone(),
        }
    }

    pub fn snapshot_bytes(&self) -> u64 {
        (self.n_links * self.n_subcarriers * 8) as u64
    }

    pub fn payload_bytes(&self) -> u64 {
        self.n_snapshots as u64 * self.snapshot_bytes()
    }

    /// Position of a stationary node; `None` for unknown ids or trajectory references.
    pub fn fixed_position(&self, id: &str) -> Option<Vec3> {
        match self.node_positions.get(id)? {
            NodePosition::Fixed(p) => Some(*p),
            NodePosition::Trajectory { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthRecord {
    pub t_s: f64,
    pub target_id: String,
    pub position: Vec3,
    pub velocity: Option<Vec3>,
}

/// Incremental container writer; snapshots are appended in order.
pub struct DatasetWriter {
    dir: PathBuf,
    info: StreamInfo,
    node_positions: BTreeMap<String, NodePosition>,
    cfr: BufWriter<File>,
    written: usize,
}

impl DatasetWriter {
    pub fn create(dir: &Path, info: StreamInfo, node_positions: BTreeMap<String, NodePosition>) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join(CFR_FILE);
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        Ok(DatasetWriter {
            dir: dir.to_path_buf(),
            info,
            node_positions,
            cfr: BufWriter::with_capacity(1 << 20, file),
            written: 0,
        })
    }

    pub fn push(&mut self, snapshot: &CfrSnapshot) -> Result<()> {
        if snapshot.links.len() != self.info.n_links() {
            return Err(Error::Size(format!(
                "snapshot has {} links, container has {}",
                snapshot.links.len(),
                self.info.n_links()
            )));
        }
        let mut buf = Vec::with_capacity(self.info.n_links() * self.info.n_subcarriers * 8);
        for link in &snapshot.links {
            if link.len() != self.info.n_subcarriers {
                return Err(Error::Size(format!(
                    "link vector has {} subcarriers, container has {}",
                    link.len(),
                    self.info.n_subcarriers
                )));
            }
            for v in link {
                buf.extend_from_slice(&(v.re as f32).to_le_bytes());
                buf.extend_from_slice(&(v.im as f32).to_le_bytes());
            }
        }
        let path = self.dir.join(CFR_FILE);
        self.cfr.write_all(&buf).map_err(|e| Error::io(path, e))?;
        self.written += 1;
        Ok(())
    }

    /// Flushes the payload and writes `meta.json` and `gt.csv`.
    pub fn finish(mut self, ground_truth: &[GroundTruthRecord]) -> Result<DatasetMeta> {
        let cfr_path = self.dir.join(CFR_FILE);
        self.cfr.flush().map_err(|e| Error::io(&cfr_path, e))?;
        let meta = DatasetMeta {
            format_version: FORMAT_VERSION,
            carrier_hz: self.info.carrier_hz,
            bandwidth_hz: self.info.bandwidth_hz,
            n_subcarriers: self.info.n_subcarriers,
            n_snapshots: self.written,
            n_links: self.info.n_links(),
            snapshot_rate_hz: self.info.snapshot_rate_hz,
            links: self.info.links.clone(),
            node_positions: std::mem::take(&mut self.node_positions),
        };
        let meta_path = self.dir.join(META_FILE);
        let json = serde_json::to_string_pretty(&meta).expect("meta serializes");
        fs::write(&meta_path, json).map_err(|e| Error::io(&meta_path, e))?;
        write_ground_truth(&self.dir.join(GT_FILE), ground_truth)?;
        Ok(meta)
    }
}

pub fn write_dataset(
    stream: &CfrStream,
    ground_truth: &[GroundTruthRecord],
    node_positions: BTreeMap<String, NodePosition>,
    dir: &Path,
) -> Result<DatasetMeta> {
    let mut w = DatasetWriter::create(dir, stream.info.clone(), node_positions)?;
    for s in &stream.snapshots {
        w.push(s)?;
    }
    w.finish(ground_truth)
}

pub fn write_ground_truth(path: &Path, records: &[GroundTruthRecord]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    w.write_record(GT_HEADER)?;
    for r in records {
        let mut row = vec![
            r.t_s.to_string(),
            r.target_id.clone(),
            r.position.x.to_string(),
            r.position.y.to_string(),
            r.position.z.to_string(),
        ];
        match r.velocity {
            Some(v) => row.extend([v.x.to_string(), v.y.to_string(), v.z.to_string()]),
            None => row.extend([String::new(), String::new(), String::new()]),
        }
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn read_ground_truth(path: &Path) -> Result<Vec<GroundTruthRecord>> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != GT_HEADER {
        return Err(Error::Data(format!("{}: unexpected header {:?}", path.display(), header)));
    }
    let num = |s: &str, what: &str| -> Result<f64> {
        s.trim()
            .parse::<f64>()
            .map_err(|_| Error::Data(format!("{}: bad {what} value {s:?}", path.display())))
    };
    let mut out: Vec<GroundTruthRecord> = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let position = Vec3::new(num(&rec[2], "x")?, num(&rec[3], "y")?, num(&rec[4], "z")?);
        let velocity = if rec[5].trim().is_empty() {
            None
        } else {
            Some(Vec3::new(num(&rec[5], "vx")?, num(&rec[6], "vy")?, num(&rec[7], "vz")?))
        };
        let t_s = num(&rec[0], "t_s")?;
        let target_id = rec[1].to_string();
        if let Some(prev) = out.iter().rev().find(|p| p.target_id == target_id) {
            if t_s < prev.t_s {
                return Err(Error::Ordering(format!(
                    "ground truth for {target_id:?} goes back in time at t = {t_s}"
                )));
            }
        }
        out.push(GroundTruthRecord {
            t_s,
            target_id,
            position,
            velocity,
        });
    }
    Ok(out)
}

pub fn read_meta(dir: &Path) -> Result<DatasetMeta> {
    let path = dir.join(META_FILE);
    if !path.exists() {
        return Err(Error::MissingFile(path));
    }
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    // check the version before the full schema so newer layouts report a version error
    let raw: serde_json::Value = serde_json::from_str(&text).map_err(|e| Error::Schema {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let version = raw.get("format_version").and_then(|v| v.as_u64()).ok_or_else(|| Error::Schema {
        path: "format_version".into(),
        message: "missing or not an integer".into(),
    })?;
    if version != FORMAT_VERSION as u64 {
        return Err(Error::Version {
            found: version as u32,
            supported: FORMAT_VERSION,
        });
    }
    let meta: DatasetMeta = serde_path_to_error::deserialize(raw).map_err(|e| Error::Schema {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    if meta.n_links != meta.links.len() {
        return Err(Error::Data(format!(
            "meta.json declares {} links but lists {}",
            meta.n_links,
            meta.links.len()
        )));
    }
    Ok(meta)
}

/// Sequential snapshot reader; holds one snapshot in memory at a time.
pub struct DatasetReader {
    dir: PathBuf,
    meta: DatasetMeta,
    cfr: BufReader<File>,
    next: usize,
    buf: Vec<u8>,
}

impl DatasetReader {
    /// Opens a container and validates the payload length against `meta.json`.
    pub fn open(dir: &Path) -> Result<Self> {
        let meta = read_meta(dir)?;
        let path = dir.join(CFR_FILE);
        if !path.exists() {
            return Err(Error::MissingFile(path));
        }
        let file = File::open(&path).map_err(|e| Error::io(&path, e))?;
        let actual = file.metadata().map_err(|e| Error::io(&path, e))?.len();
        let expected = meta.payload_bytes();
        if actual != expected {
            return Err(Error::LengthMismatch { expected, actual });
        }
        Ok(DatasetReader {
            dir: dir.to_path_buf(),
            buf: vec![0; meta.snapshot_bytes() as usize],
            meta,
            cfr: BufReader::with_capacity(1 << 20, file),
            next: 0,
        })
    }

    pub fn meta(&self) -> &DatasetMeta {
        &self.meta
    }

    pub fn info(&self) -> StreamInfo {
        self.meta.stream_info()
    }

    pub fn ground_truth(&self) -> Result<Vec<GroundTruthRecord>> {
        read_ground_truth(&self.dir.join(GT_FILE))
    }

    /// Positions the reader so the next snapshot returned is `index`.
    pub fn seek(&mut self, index: usize) -> Result<()> {
        let index = index.min(self.meta.n_snapshots);
        let path = self.dir.join(CFR_FILE);
        self.cfr
            .seek(SeekFrom::Start(index as u64 * self.meta.snapshot_bytes()))
            .map_err(|e| Error::io(path, e))?;
        self.next = index;
        Ok(())
    }

    pub fn read_snapshot(&mut self) -> Result<Option<CfrSnapshot>> {
        if self.next >= self.meta.n_snapshots {
            return Ok(None);
        }
        let path = self.dir.join(CFR_FILE);
        self.cfr.read_exact(&mut self.buf).map_err(|e| Error::io(path, e))?;
        let k = self.meta.n_subcarriers;
        let links = self
            .buf
            .chunks_exact(k * 8)
            .map(|link| {
                link.chunks_exact(8)
                    .map(|c| {
                        Complex64::new(
                            f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64,
                            f32::from_le_bytes([c[4], c[5], c[6], c[7]]) as f64,
                        )
                    })
                    .collect()
            })
            .collect();
        let index = self.next;
        self.next += 1;
        Ok(Some(CfrSnapshot {
            index,
            t_s: self.meta.stream_info().snapshot_time(index),
            links,
        }))
    }
}

impl Iterator for DatasetReader {
    type Item = Result<CfrSnapshot>;

    fn next(&mut self) -> Option<Self::Item> {
        self.read_snapshot().transpose()
    }
}

/// Reads a whole container into memory.
pub fn read_dataset(dir: &Path) -> Result<(CfrStream, Vec<GroundTruthRecord>)> {
    let reader = DatasetReader::open(dir)?;
    let info = reader.info();
    let gt = reader.ground_truth()?;
    let snapshots = reader.collect::<Result<Vec<_>>>()?;
    Ok((CfrStream { info, snapshots }, gt))
}

/// Position and velocity of one target at `t`, interpolated linearly between
/// records (clamped to the record span).
///
/// Velocity comes from the records when they carry it, otherwise from the
/// slope of the enclosing segment.
pub fn interpolate_ground_truth(records: &[GroundTruthRecord], t: f64) -> Result<(Vec3, Vec3)> {
    let Some(first) = records.first() else {
        return Err(Error::InsufficientData("ground truth is empty".into()));
    };
    if records.len() == 1 {
        return Ok((first.position, first.velocity.unwrap_or_else(Vec3::zeros)));
    }
    let last = records.last().unwrap();
    let t = t.clamp(first.t_s, last.t_s);
    let i = records.partition_point(|r| r.t_s <= t).clamp(1, records.len() - 1) - 1;
    let (a, b) = (&records[i], &records[i + 1]);
    let h = b.t_s - a.t_s;
    let u = if h > 0.0 { (t - a.t_s) / h } else { 0.0 };
    let position = a.position * (1.0 - u) + b.position * u;
    let velocity = match (a.velocity, b.velocity) {
        (Some(va), Some(vb)) => va * (1.0 - u) + vb * u,
        _ if h > 0.0 => (b.position - a.position) / h,
        _ => Vec3::zeros(),
    };
    Ok((position, velocity))
}

/// Records of one target, in file order.
pub fn records_for(records: &[GroundTruthRecord], target_id: &str) -> Vec<GroundTruthRecord> {
    records.iter().filter(|r| r.target_id == target_id).cloned().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn info(n_links: usize, k: usize) -> StreamInfo {
        StreamInfo {
            carrier_hz: 3e9,
            bandwidth_hz: 50e6,
            n_subcarriers: k,
            snapshot_rate_hz: 1000.0,
            links: (0..n_links).map(|i| LinkSpec::new("tx", format!("rx{i}"))).collect(),
        }
    }

    fn stream(n: usize, n_links: usize, k: usize) -> CfrStream {
        let info = info(n_links, k);
        let snapshots = (0..n)
            .map(|i| CfrSnapshot {
                index: i,
                t_s: info.snapshot_time(i),
                links: (0..n_links)
                    .map(|l| {
                        (0..k)
                            .map(|s| {
                                let x = (i * 31 + l * 7 + s) as f64;
                                Complex64::new((x * 0.1).sin() as f32 as f64, (x * 0.3).cos() as f32 as f64)
                            })
                            .collect()
                    })
                    .collect(),
            })
            .collect();
        CfrStream { info, snapshots }
    }

    fn positions() -> BTreeMap<String, NodePosition> {
        BTreeMap::from([("tx".to_string(), NodePosition::Fixed(Vec3::new(0.0, 0.0, 20.0)))])
    }

    #[test]
    fn empty_stream_writes_valid_container() {
        let dir = tempfile::tempdir().unwrap();
        write_dataset(&stream(0, 2, 8), &[], positions(), dir.path()).unwrap();
        assert_eq!(fs::metadata(dir.path().join(CFR_FILE)).unwrap().len(), 0);
        let (s, gt) = read_dataset(dir.path()).unwrap();
        assert!(s.snapshots.is_empty() && gt.is_empty());
    }

    #[test]
    fn payload_size_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        write_dataset(&stream(2, 1, 4), &[], positions(), dir.path()).unwrap();
        assert_eq!(fs::metadata(dir.path().join(CFR_FILE)).unwrap().len(), 64);
    }

    #[test]
    fn golden_bytes_layout() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = stream(1, 2, 2);
        s.snapshots[0].links = vec![
            vec![Complex64::new(1.0, -2.0), Complex64::new(0.5, 0.25)],
            vec![Complex64::new(-1.0, 0.0), Complex64::new(3.0, 4.0)],
        ];
        write_dataset(&s, &[], positions(), dir.path()).unwrap();
        let bytes = fs::read(dir.path().join(CFR_FILE)).unwrap();
        let expected: Vec<u8> = [1.0f32, -2.0, 0.5, 0.25, -1.0, 0.0, 3.0, 4.0]
            .iter()
            .flat_map(|v| v.to_le_bytes())
            .collect();
        assert_eq!(bytes, expected);
    }

    #[test]
    fn round_trip_is_bit_identical() {
        let dir = tempfile::tempdir().unwrap();
        let s = stream(50, 3, 16);
        let gt = vec![
            GroundTruthRecord {
                t_s: 0.0,
                target_id: "uav".into(),
                position: Vec3::new(1.0, 2.0, 3.0),
                velocity: Some(Vec3::new(0.5, 0.0, -0.25)),
            },
            GroundTruthRecord {
                t_s: 0.1,
                target_id: "uav".into(),
                position: Vec3::new(1.05, 2.0, 2.975),
                velocity: None,
            },
        ];
        let meta = write_dataset(&s, &gt, positions(), dir.path()).unwrap();
        let (back, gt_back) = read_dataset(dir.path()).unwrap();
        assert_eq!(back, s);
        assert_eq!(gt_back, gt);
        assert_eq!(read_meta(dir.path()).unwrap(), meta);
    }

    #[test]
    fn truncated_payload_reports_sizes() {
        let dir = tempfile::tempdir().unwrap();
        write_dataset(&stream(3, 1, 4), &[], positions(), dir.path()).unwrap();
        let p = dir.path().join(CFR_FILE);
        let bytes = fs::read(&p).unwrap();
        fs::write(&p, &bytes[..90]).unwrap();
        match DatasetReader::open(dir.path()) {
            Err(Error::LengthMismatch { expected, actual }) => {
                assert_eq!((expected, actual), (96, 90));
            }
            other => panic!("expected length mismatch, got {:?}", other.err()),
        }
    }

    #[test]
    fn unknown_version_is_version_error() {
        let dir = tempfile::tempdir().unwrap();
        write_dataset(&stream(1, 1, 4), &[], positions(), dir.path()).unwrap();
        let p = dir.path().join(META_FILE);
        let text = fs::read_to_string(&p).unwrap().replace("\"format_version\": 1", "\"format_version\": 2");
        fs::write(&p, text).unwrap();
        assert!(matches!(
            DatasetReader::open(dir.path()),
            Err(Error::Version { found: 2, supported: 1 })
        ));
    }

    #[test]
    fn missing_files_are_reported() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(DatasetReader::open(dir.path()), Err(Error::MissingFile(_))));
        write_dataset(&stream(1, 1, 4), &[], positions(), dir.path()).unwrap();
        fs::remove_file(dir.path().join(CFR_FILE)).unwrap();
        assert!(matches!(DatasetReader::open(dir.path()), Err(Error::MissingFile(_))));
    }

    #[test]
    fn seek_restarts_mid_stream() {
        let dir = tempfile::tempdir().unwrap();
        let s = stream(10, 2, 4);
        write_dataset(&s, &[], positions(), dir.path()).unwrap();
        let mut r = DatasetReader::open(dir.path()).unwrap();
        r.seek(7).unwrap();
        let rest: Vec<_> = r.map(|x| x.unwrap()).collect();
        assert_eq!(&rest[..], &s.snapshots[7..]);
    }

    fn gt_line(t: f64, p: Vec3, v: Option<Vec3>) -> GroundTruthRecord {
        GroundTruthRecord {
            t_s: t,
            target_id: "uav".into(),
            position: p,
            velocity: v,
        }
    }

    #[test]
    fn ground_truth_interpolation() {
        let recs = vec![
            gt_line(0.0, Vec3::new(0.0, 0.0, 0.0), None),
            gt_line(2.0, Vec3::new(4.0, 2.0, 0.0), None),
        ];
        assert_eq!(interpolate_ground_truth(&recs, 0.0).unwrap().0, Vec3::zeros());
        assert_eq!(interpolate_ground_truth(&recs, 1.0).unwrap().0, Vec3::new(2.0, 1.0, 0.0));
        assert_eq!(interpolate_ground_truth(&recs, 1.0).unwrap().1, Vec3::new(2.0, 1.0, 0.0));
        assert!(matches!(interpolate_ground_truth(&[], 1.0), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn constant_velocity_ground_truth() {
        let v = Vec3::new(3.0, -1.0, 0.5);
        let recs: Vec<_> = (0..20)
            .map(|i| gt_line(i as f64 * 0.1, Vec3::new(10.0, 0.0, 30.0) + v * (i as f64 * 0.1), None))
            .collect();
        for k in 0..50 {
            let t = 0.013 + k as f64 * 0.037;
            let (_, vel) = interpolate_ground_truth(&recs, t).unwrap();
            assert!((vel - v).norm() < 1e-9);
        }
    }

    #[test]
    fn ground_truth_time_regression_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join(GT_FILE);
        write_ground_truth(
            &p,
            &[gt_line(1.0, Vec3::zeros(), None), gt_line(0.5, Vec3::zeros(), None)],
        )
        .unwrap();
        assert!(matches!(read_ground_truth(&p), Err(Error::Ordering(_))));
    }
}
