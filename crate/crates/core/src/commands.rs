//! The five pipeline stages as library calls. Each stage reads the previous
//! stage's files, writes its own outputs plus a `<command>.manifest.json`.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::channel::SnapshotStream;
use crate::dsp::{read_detections_csv, write_detections_csv, write_map_csv, write_map_pgm, Detection, DspConfig, LinkProcessor};
use crate::error::{Error, Result};
use crate::eval::{match_detections, summarize, truth_points, EvalInputs, EvalReport, MatchGate};
use crate::scenario::{BoxSpec, LinkSpec, Scenario, ScenarioConfig, Vec3};
use crate::sounding_io::{DatasetReader, DatasetWriter, GroundTruthRecord, NodePosition};
use crate::tracking::{
    localize, read_fixes_csv, read_tracks_csv, write_fixes_csv, write_tracks_csv, BistaticMeasurement, LocalizeConfig,
    PositionFix, TrackReport, TrackStatus, Tracker, TrackerConfig,
};

pub const GEOMETRY_FILE: &str = "geometry.json";
pub const DETECTIONS_FILE: &str = "detections.csv";
pub const TRACKS_FILE: &str = "tracks.csv";
pub const FIXES_FILE: &str = "fixes.csv";
pub const EVAL_FILE: &str = "eval.json";

/// Flags shared by every command.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GlobalOptions {
    /// Overrides the scenario's rng seed.
    pub seed: Option<u64>,
    /// Worker threads; all cores when absent.
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub config: serde_json::Value,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub seeds: BTreeMap<String, u64>,
    pub threads: Option<usize>,
    pub wall_clock_s: f64,
}

impl RunManifest {
    fn new(command: &str, config: &impl Serialize, opts: &GlobalOptions) -> Self {
        RunManifest {
            command: command.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config: serde_json::to_value(config).expect("config serializes"),
            inputs: Vec::new(),
            outputs: Vec::new(),
            seeds: BTreeMap::new(),
            threads: opts.threads,
            wall_clock_s: 0.0,
        }
    }

    fn write(mut self, dir: &Path, started: Instant) -> Result<Self> {
        self.wall_clock_s = started.elapsed().as_secs_f64();
        let path = dir.join(format!("{}.manifest.json", self.command));
        let json = serde_json::to_string_pretty(&self).expect("manifest serializes");
        fs::write(&path, json).map_err(|e| Error::io(&path, e))?;
        Ok(self)
    }
}

/// Reads JSON, reporting schema violations with their JSON path.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(de).map_err(|e| Error::Schema {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })
}

/// [`read_json`], or the default config when no path is given.
pub fn read_config<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    path.map_or_else(|| Ok(T::default()), read_json)
}

fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    match threads {
        None => f(),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::Config(format!("cannot build thread pool: {e}")))?
            .install(f),
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Node positions and link layout the localizer needs, written by `synth`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub nodes: BTreeMap<String, Vec3>,
    pub links: Vec<LinkSpec>,
    pub search_box: BoxSpec,
    /// Constant per-link delay offset removed before range conversion.
    #[serde(default)]
    pub delay_offsets_s: Vec<f64>,
}

impl Geometry {
    pub fn from_scenario(scn: &Scenario) -> Self {
        let nodes: BTreeMap<String, Vec3> = scn
            .nodes
            .iter()
            .map(|n| (n.id.clone(), n.trajectory.position_at(0.0)))
            .collect();
        let mut min = Vec3::repeat(f64::INFINITY);
        let mut max = Vec3::repeat(f64::NEG_INFINITY);
        for p in nodes.values() {
            min = min.inf(p);
            max = max.sup(p);
        }
        let pad = Vec3::new(250.0, 250.0, 150.0);
        let mut lo = min - pad;
        lo.z = lo.z.max(0.0);
        Geometry {
            nodes,
            links: scn.config.links.clone(),
            search_box: BoxSpec { min: lo, max: max + pad },
            delay_offsets_s: vec![0.0; scn.n_links()],
        }
    }

    pub fn read(path: &Path) -> Result<Self> {
        let g: Geometry = read_json(path)?;
        g.validate()?;
        Ok(g)
    }

    fn validate(&self) -> Result<()> {
        for l in &self.links {
            for id in [&l.tx_id, &l.rx_id] {
                if !self.nodes.contains_key(id) {
                    return Err(Error::Config(format!("geometry link refers to unknown node {id}")));
                }
            }
        }
        if !self.delay_offsets_s.is_empty() && self.delay_offsets_s.len() != self.links.len() {
            return Err(Error::Config("delay_offsets_s needs one entry per link".into()));
        }
        Ok(())
    }

    fn link_nodes(&self, link: usize) -> Option<(Vec3, Vec3)> {
        let l = self.links.get(link)?;
        Some((self.nodes[&l.tx_id], self.nodes[&l.rx_id]))
    }
}

/// Synthesizes a dataset container from a scenario.
pub fn synth(scenario: &Path, out_dir: &Path, opts: &GlobalOptions) -> Result<RunManifest> {
    let started = Instant::now();
    let mut cfg = ScenarioConfig::from_json_file(scenario)?;
    if let Some(seed) = opts.seed {
        cfg.clutter.rng_seed = seed;
    }
    let scn = Scenario::new(cfg, scenario.parent())?;
    synth_scenario(&scn, out_dir, opts, Some(scenario), started)
}

/// [`synth`] for an already compiled scenario.
pub fn synth_scenario(
    scn: &Scenario,
    out_dir: &Path,
    opts: &GlobalOptions,
    source: Option<&Path>,
    started: Instant,
) -> Result<RunManifest> {
    create_dir(out_dir)?;
    let info = crate::channel::StreamInfo::from_scenario(scn);
    let node_positions = scn
        .nodes
        .iter()
        .filter(|n| n.trajectory.is_stationary())
        .map(|n| (n.id.clone(), NodePosition::Fixed(n.trajectory.position_at(0.0))))
        .collect();
    with_threads(opts.threads, || {
        let mut writer = DatasetWriter::create(out_dir, info, node_positions)?;
        let mut gt = Vec::new();
        for snap in SnapshotStream::new(scn, 0) {
            let snap = snap?;
            for tg in &scn.targets {
                gt.push(GroundTruthRecord {
                    t_s: snap.t_s,
                    target_id: tg.id.clone(),
                    position: tg.trajectory.position_at(snap.t_s),
                    velocity: Some(tg.trajectory.velocity_at(snap.t_s)),
                });
            }
            writer.push(&snap)?;
        }
        writer.finish(&gt)?;
        Ok(())
    })?;
    let geometry = Geometry::from_scenario(scn);
    let geo_path = out_dir.join(GEOMETRY_FILE);
    fs::write(&geo_path, serde_json::to_string_pretty(&geometry).expect("geometry serializes"))
        .map_err(|e| Error::io(&geo_path, e))?;

    let mut m = RunManifest::new("synth", &scn.config, opts);
    m.inputs.extend(source.map(Path::to_path_buf));
    m.outputs.push(out_dir.to_path_buf());
    m.seeds.insert("rng_seed".into(), scn.config.clutter.rng_seed);
    m.write(out_dir, started)
}

/// Runs estimation, maps, background removal, CFAR and refinement on every link.
/// With `export_maps`, each residual map is written as CSV and PGM under `maps/`.
pub fn process(
    in_dir: &Path,
    dsp_config: Option<&Path>,
    out_dir: &Path,
    export_maps: bool,
    opts: &GlobalOptions,
) -> Result<RunManifest> {
    let started = Instant::now();
    let cfg: DspConfig = read_config(dsp_config)?;
    create_dir(out_dir)?;
    let detections = with_threads(opts.threads, || process_dataset(in_dir, &cfg, export_maps.then_some(out_dir)))?;
    write_detections_csv(&detections, &out_dir.join(DETECTIONS_FILE))?;
    let mut m = RunManifest::new("process", &cfg, opts);
    m.inputs.push(in_dir.to_path_buf());
    m.inputs.extend(dsp_config.map(Path::to_path_buf));
    m.outputs.push(out_dir.join(DETECTIONS_FILE));
    m.write(out_dir, started)
}

/// Detections of every complete CPI of a container, ordered by CPI then link.
pub fn process_dataset(in_dir: &Path, cfg: &DspConfig, map_dir: Option<&Path>) -> Result<Vec<Detection>> {
    let mut reader = DatasetReader::open(in_dir)?;
    let info = reader.info();
    let mut procs = LinkProcessor::for_stream(&info, cfg)?;
    let maps = map_dir.map(|d| d.join("maps"));
    if let Some(d) = &maps {
        create_dir(d)?;
    }
    let mut detections = Vec::new();
    let mut cpi = 0usize;
    loop {
        let mut block = Vec::with_capacity(cfg.cpi_len);
        while block.len() < cfg.cpi_len {
            match reader.read_snapshot()? {
                Some(s) => block.push(s),
                None => break,
            }
        }
        if block.len() < cfg.cpi_len {
            if !block.is_empty() {
                log::info!("dropping {} trailing snapshots that do not fill a CPI", block.len());
            }
            break;
        }
        let start = block[0].t_s;
        let outputs = procs
            .par_iter_mut()
            .enumerate()
            .map(|(l, p)| {
                let rows: Vec<&[num_complex::Complex64]> = block.iter().map(|s| s.links[l].as_slice()).collect();
                p.process(start, &rows)
            })
            .collect::<Result<Vec<_>>>()?;
        for (l, out) in outputs.into_iter().enumerate() {
            if let Some(d) = &maps {
                write_map_csv(&out.residual, &d.join(format!("map_l{l}_c{cpi:05}.csv")))?;
                write_map_pgm(&out.residual, &d.join(format!("map_l{l}_c{cpi:05}.pgm")))?;
            }
            detections.extend(out.detections);
        }
        cpi += 1;
    }
    log::info!("processed {cpi} CPIs, {} detections", detections.len());
    Ok(detections)
}

/// Time grid of the CPIs in `times` (sorted, distinct), with gaps filled at `period`.
fn cpi_grid(times: &[f64], period: Option<f64>) -> Vec<f64> {
    if times.is_empty() {
        return Vec::new();
    }
    let period = period.unwrap_or_else(|| {
        times.windows(2).map(|w| w[1] - w[0]).filter(|d| *d > 0.0).fold(f64::INFINITY, f64::min)
    });
    if !period.is_finite() {
        return times.to_vec();
    }
    let mut grid = vec![times[0]];
    for w in times.windows(2) {
        let gap = ((w[1] - w[0]) / period).round() as usize;
        for j in 1..gap {
            grid.push(w[0] + j as f64 * period);
        }
        grid.push(w[1]);
    }
    grid
}

/// Per-link tracking of a detection list. Track ids are renumbered globally
/// in order of first report.
pub fn track_detections(detections: &[Detection], cfg: &TrackerConfig) -> Result<Vec<TrackReport>> {
    let n_links = detections.iter().map(|d| d.link + 1).max().unwrap_or(0);
    let mut times: Vec<f64> = detections.iter().map(|d| d.cpi_start_s).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let grid = cpi_grid(&times, cfg.cpi_period_s);
    let mut by_time: HashMap<(u64, usize), Vec<Detection>> = HashMap::new();
    for d in detections {
        by_time.entry((d.cpi_start_s.to_bits(), d.link)).or_default().push(d.clone());
    }
    let per_link = (0..n_links)
        .into_par_iter()
        .map(|link| {
            let mut tracker = Tracker::new(link, cfg.clone())?;
            let mut reports = Vec::new();
            for &t in &grid {
                let dets = by_time.get(&(t.to_bits(), link)).map(Vec::as_slice).unwrap_or(&[]);
                reports.extend(tracker.step(t, dets)?);
            }
            Ok(reports)
        })
        .collect::<Result<Vec<Vec<TrackReport>>>>()?;
    let mut all: Vec<TrackReport> = per_link.into_iter().flatten().collect();
    all.sort_by(|a, b| a.t_s.total_cmp(&b.t_s).then(a.link.cmp(&b.link)).then(a.track_id.cmp(&b.track_id)));
    let mut ids = HashMap::new();
    for r in &mut all {
        let next = ids.len() as u64;
        r.track_id = *ids.entry((r.link, r.track_id)).or_insert(next);
    }
    Ok(all)
}

pub fn track(detections_csv: &Path, tracker_config: Option<&Path>, out_dir: &Path, opts: &GlobalOptions) -> Result<RunManifest> {
    let started = Instant::now();
    let cfg: TrackerConfig = read_config(tracker_config)?;
    cfg.validate()?;
    let detections = read_detections_csv(detections_csv)?;
    create_dir(out_dir)?;
    let reports = with_threads(opts.threads, || track_detections(&detections, &cfg))?;
    write_tracks_csv(&reports, &out_dir.join(TRACKS_FILE))?;
    let mut m = RunManifest::new("track", &cfg, opts);
    m.inputs.push(detections_csv.to_path_buf());
    m.inputs.extend(tracker_config.map(Path::to_path_buf));
    m.outputs.push(out_dir.join(TRACKS_FILE));
    m.write(out_dir, started)
}

/// One fix per report epoch with at least three links tracking. On each link
/// the track with the most reports is used. The previous fix seeds the next
/// solve; the first solve starts from a grid search over the search box.
pub fn localize_tracks(reports: &[TrackReport], geometry: &Geometry, cfg: &LocalizeConfig) -> Result<Vec<PositionFix>> {
    let mut counts: BTreeMap<(usize, u64), usize> = BTreeMap::new();
    for r in reports {
        *counts.entry((r.link, r.track_id)).or_default() += 1;
    }
    let mut primary: BTreeMap<usize, (usize, u64)> = BTreeMap::new();
    for (&(link, id), &n) in &counts {
        let e = primary.entry(link).or_insert((n, id));
        if n > e.0 {
            *e = (n, id);
        }
    }
    let mut epochs: BTreeMap<u64, Vec<&TrackReport>> = BTreeMap::new();
    let mut order = Vec::new();
    for r in reports.iter().filter(|r| r.status != TrackStatus::Deleted) {
        if primary.get(&r.link).map(|p| p.1) == Some(r.track_id) {
            let key = r.t_s.to_bits();
            if !epochs.contains_key(&key) {
                order.push(r.t_s);
            }
            epochs.entry(key).or_default().push(r);
        }
    }
    order.sort_by(f64::total_cmp);
    let cfg = LocalizeConfig {
        search_box: cfg.search_box.or(Some(geometry.search_box)),
        ..cfg.clone()
    };
    let mut fixes = Vec::new();
    let mut last: Option<Vec3> = None;
    for t in order {
        let meas: Vec<BistaticMeasurement> = epochs[&t.to_bits()]
            .iter()
            .filter_map(|r| {
                let (tx, rx) = geometry.link_nodes(r.link)?;
                let offset = geometry.delay_offsets_s.get(r.link).copied().unwrap_or(0.0);
                Some(BistaticMeasurement::from_delay(tx, rx, r.delay_s, offset))
            })
            .collect();
        if meas.len() < 3 {
            continue;
        }
        match localize(&meas, last, &cfg) {
            Ok(mut fix) => {
                fix.t_s = t;
                last = Some(fix.position);
                fixes.push(fix);
            }
            Err(e @ (Error::Degenerate(_) | Error::NotConverged { .. })) => {
                log::warn!("no fix at t = {t}: {e}");
                last = None;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(fixes)
}

pub fn localize_cmd(
    tracks_csv: &Path,
    geometry: &Path,
    localize_config: Option<&Path>,
    out_dir: &Path,
    opts: &GlobalOptions,
) -> Result<RunManifest> {
    let started = Instant::now();
    let cfg: LocalizeConfig = read_config(localize_config)?;
    let geo = Geometry::read(geometry)?;
    let reports = read_tracks_csv(tracks_csv)?;
    create_dir(out_dir)?;
    let fixes = localize_tracks(&reports, &geo, &cfg)?;
    write_fixes_csv(&fixes, &out_dir.join(FIXES_FILE))?;
    let mut m = RunManifest::new("localize", &cfg, opts);
    m.inputs.extend([tracks_csv.to_path_buf(), geometry.to_path_buf()]);
    m.inputs.extend(localize_config.map(Path::to_path_buf));
    m.outputs.push(out_dir.join(FIXES_FILE));
    m.write(out_dir, started)
}

/// Inputs of the `eval` command; the track and fix files are optional.
#[derive(Debug, Clone)]
pub struct EvalPaths<'a> {
    pub dataset: &'a Path,
    pub dsp_config: Option<&'a Path>,
    pub detections: &'a Path,
    pub tracks: Option<&'a Path>,
    pub fixes: Option<&'a Path>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub gate_delay_bins: f64,
    pub gate_doppler_bins: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig { gate_delay_bins: 1.0, gate_doppler_bins: 1.0 }
    }
}

/// Scores persisted pipeline outputs against the dataset's ground truth.
pub fn evaluate(paths: &EvalPaths<'_>, cfg: &EvalConfig) -> Result<EvalReport> {
    let dsp: DspConfig = read_config(paths.dsp_config)?;
    let reader = DatasetReader::open(paths.dataset)?;
    let meta = reader.meta().clone();
    let gt = reader.ground_truth()?;
    let offset = dsp.epoch_offset_s(meta.snapshot_rate_hz);
    let truth = truth_points(&meta, &gt, dsp.cpi_len, offset)?;
    let gate = MatchGate {
        delay_bins: cfg.gate_delay_bins,
        doppler_bins: cfg.gate_doppler_bins,
        delay_bin_s: 1.0 / meta.bandwidth_hz,
        doppler_bin_hz: meta.snapshot_rate_hz / dsp.cpi_len as f64,
        cpi_period_s: dsp.cpi_len as f64 / meta.snapshot_rate_hz,
    };
    let detections = read_detections_csv(paths.detections)?;
    let tracks = paths.tracks.map(read_tracks_csv).transpose()?.unwrap_or_default();
    let fixes = paths.fixes.map(read_fixes_csv).transpose()?.unwrap_or_default();
    let matches = match_detections(&detections, &truth, &gate);
    let inputs = EvalInputs {
        n_links: meta.n_links,
        n_maps: meta.n_snapshots / dsp.cpi_len,
        tracks: &tracks,
        truth: &truth,
        fixes: &fixes,
        ground_truth: &gt,
        epoch_offset_s: offset,
    };
    summarize(&matches, &inputs, &gate)
}

pub fn eval_cmd(paths: &EvalPaths<'_>, eval_config: Option<&Path>, out_dir: &Path, opts: &GlobalOptions) -> Result<(EvalReport, RunManifest)> {
    let started = Instant::now();
    let cfg: EvalConfig = read_config(eval_config)?;
    let report = evaluate(paths, &cfg)?;
    create_dir(out_dir)?;
    let path = out_dir.join(EVAL_FILE);
    fs::write(&path, serde_json::to_string_pretty(&report).expect("report serializes")).map_err(|e| Error::io(&path, e))?;
    let mut m = RunManifest::new("eval", &cfg, opts);
    m.inputs.extend([paths.dataset.to_path_buf(), paths.detections.to_path_buf()]);
    m.inputs.extend(paths.dsp_config.map(Path::to_path_buf));
    m.inputs.extend(paths.tracks.map(Path::to_path_buf));
    m.inputs.extend(paths.fixes.map(Path::to_path_buf));
    m.outputs.push(path);
    Ok((report, m.write(out_dir, started)?))
}
