//! Scene description: nodes, links, targets, clutter and their kinematics.
//!
//! [`ScenarioConfig`] is the serde view of a scenario JSON document. It is
//! compiled into a [`Scenario`], which owns evaluated trajectories, resolved
//! target signatures and the drawn clutter clusters.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;
use std::sync::Arc;

use nalgebra::Vector3;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signature::{read_table, RotorSpec, Signature};

pub type Vec3 = Vector3<f64>;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

const COINCIDENT_EPS_M: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeRole {
    Tx,
    Rx,
    Txrx,
}

impl NodeRole {
    pub fn can_transmit(self) -> bool {
        matches!(self, NodeRole::Tx | NodeRole::Txrx)
    }

    pub fn can_receive(self) -> bool {
        matches!(self, NodeRole::Rx | NodeRole::Txrx)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interpolation {
    #[default]
    Linear,
    Cubic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub t_s: f64,
    pub position: Vec3,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySpec {
    pub waypoints: Vec<Waypoint>,
    #[serde(default)]
    pub interpolation: Interpolation,
}

impl TrajectorySpec {
    pub fn stationary(position: Vec3) -> Self {
        TrajectorySpec {
            waypoints: vec![Waypoint { t_s: 0.0, position }],
            interpolation: Interpolation::Linear,
        }
    }

    pub fn linear(waypoints: impl IntoIterator<Item = (f64, Vec3)>) -> Self {
        TrajectorySpec {
            waypoints: waypoints
                .into_iter()
                .map(|(t_s, position)| Waypoint { t_s, position })
                .collect(),
            interpolation: Interpolation::Linear,
        }
    }

    pub fn cubic(waypoints: impl IntoIterator<Item = (f64, Vec3)>) -> Self {
        TrajectorySpec {
            interpolation: Interpolation::Cubic,
            ..Self::linear(waypoints)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeSpec {
    pub id: String,
    pub role: NodeRole,
    pub trajectory: TrajectorySpec,
    #[serde(default)]
    pub antenna_gain_dbi: f64,
    /// Required for tx-capable roles.
    #[serde(default)]
    pub tx_power_dbm: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetSpec {
    pub id: String,
    pub trajectory: TrajectorySpec,
    pub signature_id: String,
    #[serde(default)]
    pub rotor: Option<RotorSpec>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LinkSpec {
    pub tx_id: String,
    pub rx_id: String,
}

impl LinkSpec {
    pub fn new(tx_id: impl Into<String>, rx_id: impl Into<String>) -> Self {
        LinkSpec {
            tx_id: tx_id.into(),
            rx_id: rx_id.into(),
        }
    }
}

/// Axis-aligned box, meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxSpec {
    pub min: Vec3,
    pub max: Vec3,
}

impl BoxSpec {
    pub fn contains(&self, p: &Vec3) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClutterSpec {
    pub n_clusters: usize,
    pub region: BoxSpec,
    /// Reflectivity range in dB relative to the target reference gain.
    pub amplitude_db_range: (f64, f64),
    pub rng_seed: u64,
}

impl Default for ClutterSpec {
    fn default() -> Self {
        ClutterSpec {
            n_clusters: 0,
            region: BoxSpec {
                min: Vec3::zeros(),
                max: Vec3::zeros(),
            },
            amplitude_db_range: (-10.0, 0.0),
            rng_seed: 0,
        }
    }
}

/// Where a target signature comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SignatureSource {
    /// Fixed complex reflectivity gain `[re, im]`.
    Constant { gain: Complex64 },
    /// Reflectivity table header JSON; relative paths resolve against the scenario file.
    Table { path: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub nodes: Vec<NodeSpec>,
    pub links: Vec<LinkSpec>,
    #[serde(default)]
    pub targets: Vec<TargetSpec>,
    #[serde(default)]
    pub clutter: ClutterSpec,
    pub carrier_hz: f64,
    pub bandwidth_hz: f64,
    pub n_subcarriers: usize,
    pub snapshot_rate_hz: f64,
    pub duration_s: f64,
    /// `None` disables receiver noise.
    #[serde(default)]
    pub noise_power_dbm: Option<f64>,
    #[serde(default)]
    pub signatures: BTreeMap<String, SignatureSource>,
}

impl ScenarioConfig {
    /// Parses a scenario JSON document; errors carry the JSON path of the offending field.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| Error::Schema {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text)
    }

    pub fn n_snapshots(&self) -> usize {
        (self.duration_s * self.snapshot_rate_hz).round().max(0.0) as usize
    }

    pub fn wavelength_m(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_hz
    }

    /// Largest delay representable without wrap-around: `n_subcarriers / bandwidth`.
    pub fn max_delay_s(&self) -> f64 {
        self.n_subcarriers as f64 / self.bandwidth_hz
    }
}

/// Evaluable trajectory: linear or natural cubic spline through waypoints,
/// clamped outside the waypoint span.
#[derive(Debug, Clone)]
pub struct Trajectory {
    times: Vec<f64>,
    points: Vec<Vec3>,
    /// Second derivatives at the knots (cubic only).
    second: Option<Vec<Vec3>>,
}

impl Trajectory {
    pub fn new(spec: &TrajectorySpec) -> Result<Self> {
        if spec.waypoints.is_empty() {
            return Err(Error::Config("trajectory has no waypoints".into()));
        }
        let times: Vec<f64> = spec.waypoints.iter().map(|w| w.t_s).collect();
        let points: Vec<Vec3> = spec.waypoints.iter().map(|w| w.position).collect();
        if times.iter().chain(points.iter().flat_map(|p| p.iter())).any(|v| !v.is_finite()) {
            return Err(Error::Config("trajectory contains non-finite values".into()));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config(
                "trajectory waypoint times must be strictly increasing".into(),
            ));
        }
        let second = match spec.interpolation {
            Interpolation::Cubic if times.len() > 2 => Some(natural_spline_moments(&times, &points)),
            _ => None,
        };
        Ok(Trajectory {
            times,
            points,
            second,
        })
    }

    pub fn is_stationary(&self) -> bool {
        self.points.len() == 1 || self.points.windows(2).all(|w| w[0] == w[1])
    }

    pub fn span(&self) -> (f64, f64) {
        (self.times[0], *self.times.last().unwrap())
    }

    /// Segment index and clamped time.
    fn locate(&self, t: f64) -> (usize, f64) {
        let (t0, t1) = self.span();
        let t = t.clamp(t0, t1);
        let i = self.times.partition_point(|&ti| ti <= t);
        let seg = i.saturating_sub(1).min(self.times.len().saturating_sub(2));
        (seg, t)
    }

    pub fn position_at(&self, t: f64) -> Vec3 {
        if self.points.len() == 1 {
            return self.points[0];
        }
        let (i, t) = self.locate(t);
        let h = self.times[i + 1] - self.times[i];
        let a = (self.times[i + 1] - t) / h;
        let b = (t - self.times[i]) / h;
        let mut p = self.points[i] * a + self.points[i + 1] * b;
        if let Some(m) = &self.second {
            p += (m[i] * (a * a * a - a) + m[i + 1] * (b * b * b - b)) * (h * h / 6.0);
        }
        p
    }

    pub fn velocity_at(&self, t: f64) -> Vec3 {
        if self.points.len() == 1 {
            return Vec3::zeros();
        }
        let (i, t) = self.locate(t);
        let h = self.times[i + 1] - self.times[i];
        let mut v = (self.points[i + 1] - self.points[i]) / h;
        if let Some(m) = &self.second {
            let a = (self.times[i + 1] - t) / h;
            let b = (t - self.times[i]) / h;
            v += m[i] * (-(3.0 * a * a - 1.0) * h / 6.0) + m[i + 1] * ((3.0 * b * b - 1.0) * h / 6.0);
        }
        v
    }

    /// Upper bound on speed, sampled at the knots and segment midpoints.
    pub fn max_speed(&self) -> f64 {
        let mut best: f64 = 0.0;
        for w in self.times.windows(2) {
            for t in [w[0], 0.5 * (w[0] + w[1]), w[1]] {
                best = best.max(self.velocity_at(t).norm());
            }
        }
        best
    }
}

/// Natural cubic spline second derivatives (zero at both ends), Thomas algorithm.
fn natural_spline_moments(t: &[f64], y: &[Vec3]) -> Vec<Vec3> {
    let n = t.len();
    let mut m = vec![Vec3::zeros(); n];
    let inner = n - 2;
    let h: Vec<f64> = t.windows(2).map(|w| w[1] - w[0]).collect();
    let mut diag = vec![0.0; inner];
    let mut upper = vec![0.0; inner];
    let mut rhs = vec![Vec3::zeros(); inner];
    for k in 0..inner {
        let i = k + 1;
        diag[k] = 2.0 * (h[i - 1] + h[i]);
        upper[k] = h[i];
        rhs[k] = ((y[i + 1] - y[i]) / h[i] - (y[i] - y[i - 1]) / h[i - 1]) * 6.0;
    }
    for k in 1..inner {
        let w = h[k] / diag[k - 1];
        diag[k] -= w * upper[k - 1];
        let prev = rhs[k - 1];
        rhs[k] -= prev * w;
    }
    for k in (0..inner).rev() {
        let next = if k + 1 < inner { m[k + 2] } else { Vec3::zeros() };
        m[k + 1] = (rhs[k] - next * upper[k]) / diag[k];
    }
    m
}

pub fn position_at(traj: &TrajectorySpec, t: f64) -> Result<Vec3> {
    Ok(Trajectory::new(traj)?.position_at(t))
}

pub fn velocity_at(traj: &TrajectorySpec, t: f64) -> Result<Vec3> {
    Ok(Trajectory::new(traj)?.velocity_at(t))
}

/// Two-leg path length `|p - tx| + |p - rx|`.
pub fn bistatic_range(tx: &Vec3, rx: &Vec3, target: &Vec3) -> f64 {
    (target - tx).norm() + (target - rx).norm()
}

/// Bistatic Doppler in Hz; a shrinking bistatic range gives a positive shift.
pub fn bistatic_doppler(tx: &Vec3, rx: &Vec3, target: &Vec3, vel: &Vec3, carrier_hz: f64) -> Result<f64> {
    Ok(-carrier_hz / SPEED_OF_LIGHT * bistatic_range_rate(tx, rx, target, vel)?)
}

/// d/dt of the bistatic range for a target moving with `vel`.
pub fn bistatic_range_rate(tx: &Vec3, rx: &Vec3, target: &Vec3, vel: &Vec3) -> Result<f64> {
    let u_tx = unit(target - tx, "target coincides with transmitter")?;
    let u_rx = unit(target - rx, "target coincides with receiver")?;
    Ok(vel.dot(&(u_tx + u_rx)))
}

/// Angle at the target between the directions to Tx and Rx, degrees (0 = monostatic).
pub fn bistatic_angle_deg(tx: &Vec3, rx: &Vec3, target: &Vec3) -> Result<f64> {
    let a = unit(tx - target, "target coincides with transmitter")?;
    let b = unit(rx - target, "target coincides with receiver")?;
    Ok(a.dot(&b).clamp(-1.0, 1.0).acos().to_degrees())
}

pub(crate) fn unit(v: Vec3, what: &str) -> Result<Vec3> {
    let n = v.norm();
    if n < COINCIDENT_EPS_M {
        return Err(Error::Geometry(what.to_string()));
    }
    Ok(v / n)
}

pub fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

#[derive(Debug, Clone)]
pub struct CompiledNode {
    pub id: String,
    pub role: NodeRole,
    pub trajectory: Trajectory,
    pub gain_linear: f64,
    pub tx_power_mw: f64,
}

#[derive(Debug, Clone)]
pub struct CompiledTarget {
    pub id: String,
    pub trajectory: Trajectory,
    pub signature: Signature,
    pub rotor: Option<RotorSpec>,
}

/// A static point scatterer standing in for an environment clutter cluster.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClutterCluster {
    pub position: Vec3,
    /// Complex reflectivity gain used in the bistatic radar equation.
    pub gain: Complex64,
}

/// Validated, compiled scenario. Immutable after construction.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub nodes: Vec<CompiledNode>,
    /// (tx node index, rx node index) per configured link.
    pub links: Vec<(usize, usize)>,
    pub targets: Vec<CompiledTarget>,
    pub clutter: Vec<ClutterCluster>,
}

impl Scenario {
    /// Compiles `config`; relative reflectivity table paths resolve against `base_dir`.
    pub fn new(config: ScenarioConfig, base_dir: Option<&Path>) -> Result<Self> {
        validate_grid(&config)?;

        let mut seen = HashSet::new();
        let mut nodes = Vec::with_capacity(config.nodes.len());
        for n in &config.nodes {
            if !seen.insert(n.id.as_str()) {
                return Err(Error::Config(format!("duplicate node id {:?}", n.id)));
            }
            let tx_power_mw = match (n.role.can_transmit(), n.tx_power_dbm) {
                (true, Some(p)) => dbm_to_mw(p),
                (true, None) => {
                    return Err(Error::Config(format!(
                        "node {:?} can transmit but has no tx_power_dbm",
                        n.id
                    )))
                }
                (false, _) => 0.0,
            };
            nodes.push(CompiledNode {
                id: n.id.clone(),
                role: n.role,
                trajectory: Trajectory::new(&n.trajectory)?,
                gain_linear: 10f64.powf(n.antenna_gain_dbi / 10.0),
                tx_power_mw,
            });
        }
        if !nodes.iter().any(|n| n.role.can_transmit()) || !nodes.iter().any(|n| n.role.can_receive()) {
            return Err(Error::Config(
                "scenario needs at least one tx-capable and one rx-capable node".into(),
            ));
        }

        let index_of = |id: &str| nodes.iter().position(|n| n.id == id);
        let mut links = Vec::with_capacity(config.links.len());
        for l in &config.links {
            let tx = index_of(&l.tx_id).ok_or_else(|| Error::Config(format!("unknown tx node {:?}", l.tx_id)))?;
            let rx = index_of(&l.rx_id).ok_or_else(|| Error::Config(format!("unknown rx node {:?}", l.rx_id)))?;
            if !nodes[tx].role.can_transmit() {
                return Err(Error::Config(format!("link tx {:?} cannot transmit", l.tx_id)));
            }
            if !nodes[rx].role.can_receive() {
                return Err(Error::Config(format!("link rx {:?} cannot receive", l.rx_id)));
            }
            if tx == rx && nodes[tx].role != NodeRole::Txrx {
                return Err(Error::Config(format!("monostatic link on {:?} requires role txrx", l.tx_id)));
            }
            links.push((tx, rx));
        }
        if links.is_empty() {
            return Err(Error::Config("scenario has no links".into()));
        }

        let mut targets = Vec::with_capacity(config.targets.len());
        for t in &config.targets {
            let source = config.signatures.get(&t.signature_id).ok_or_else(|| {
                Error::Config(format!(
                    "target {:?} references unknown signature {:?}",
                    t.id, t.signature_id
                ))
            })?;
            let signature = match source {
                SignatureSource::Constant { gain } => Signature::Constant(*gain),
                SignatureSource::Table { path } => {
                    let p = match base_dir {
                        Some(d) if Path::new(path).is_relative() => d.join(path),
                        _ => Path::new(path).to_path_buf(),
                    };
                    Signature::Table(Arc::new(read_table(&p)?))
                }
            };
            if let Some(r) = &t.rotor {
                r.validate()?;
            }
            targets.push(CompiledTarget {
                id: t.id.clone(),
                trajectory: Trajectory::new(&t.trajectory)?,
                signature,
                rotor: t.rotor.clone(),
            });
        }

        let mut scenario = Scenario {
            config,
            nodes,
            links,
            targets,
            clutter: Vec::new(),
        };
        scenario.clutter = scenario.draw_clutter()?;
        scenario.check_sampling();
        Ok(scenario)
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let cfg = ScenarioConfig::from_json_file(path)?;
        Scenario::new(cfg, path.parent())
    }

    pub fn n_links(&self) -> usize {
        self.links.len()
    }

    pub fn link_nodes(&self, link: usize) -> (&CompiledNode, &CompiledNode) {
        let (tx, rx) = self.links[link];
        (&self.nodes[tx], &self.nodes[rx])
    }

    pub fn link_positions(&self, link: usize, t: f64) -> (Vec3, Vec3) {
        let (tx, rx) = self.link_nodes(link);
        (tx.trajectory.position_at(t), rx.trajectory.position_at(t))
    }

    pub fn snapshot_time(&self, index: usize) -> f64 {
        index as f64 / self.config.snapshot_rate_hz
    }

    /// Magnitude of the first target's reflectivity at t = 0 on link 0; 1 without targets.
    fn reference_gain(&self) -> Result<f64> {
        let Some(target) = self.targets.first() else {
            return Ok(1.0);
        };
        let (tx, rx) = self.link_positions(0, 0.0);
        let p = target.trajectory.position_at(0.0);
        let beta = bistatic_angle_deg(&tx, &rx, &p)?;
        Ok(target.signature.gain(self.config.carrier_hz, beta).norm())
    }

    fn draw_clutter(&self) -> Result<Vec<ClutterCluster>> {
        let spec = &self.config.clutter;
        if spec.n_clusters == 0 {
            return Ok(Vec::new());
        }
        let (lo_db, hi_db) = spec.amplitude_db_range;
        if !(lo_db <= hi_db) {
            return Err(Error::Config("clutter amplitude_db_range must satisfy min <= max".into()));
        }
        if (0..3).any(|i| spec.region.min[i] > spec.region.max[i]) {
            return Err(Error::Config("clutter region min must not exceed max".into()));
        }
        let reference = self.reference_gain()?;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
        let mut out = Vec::with_capacity(spec.n_clusters);
        for _ in 0..spec.n_clusters {
            let mut position = Vec3::zeros();
            for i in 0..3 {
                let (lo, hi) = (spec.region.min[i], spec.region.max[i]);
                position[i] = if hi > lo { rng.random_range(lo..hi) } else { lo };
            }
            let db = if hi_db > lo_db { rng.random_range(lo_db..hi_db) } else { lo_db };
            let phase = rng.random_range(0.0..std::f64::consts::TAU);
            out.push(ClutterCluster {
                position,
                gain: Complex64::from_polar(reference * 10f64.powf(db / 20.0), phase),
            });
        }
        Ok(out)
    }

    /// Largest Doppler magnitude the scene can produce (upper bound).
    pub fn max_expected_doppler_hz(&self) -> f64 {
        let mut speed: f64 = 0.0;
        for t in &self.targets {
            let mut s = t.trajectory.max_speed();
            if let Some(r) = &t.rotor {
                s += std::f64::consts::TAU * r.rotation_hz.abs() * r.blade_radius_m;
            }
            speed = speed.max(s);
        }
        let node_speed = self.nodes.iter().map(|n| n.trajectory.max_speed()).fold(0.0, f64::max);
        2.0 * (speed + node_speed) * self.config.carrier_hz / SPEED_OF_LIGHT
    }

    fn check_sampling(&self) {
        let nu = self.max_expected_doppler_hz();
        if self.config.snapshot_rate_hz < 2.0 * nu {
            log::warn!(
                "snapshot rate {} Hz is below twice the largest expected Doppler ({:.1} Hz); Doppler will alias",
                self.config.snapshot_rate_hz,
                nu
            );
        }
    }
}

fn validate_grid(cfg: &ScenarioConfig) -> Result<()> {
    if cfg.n_subcarriers < 2 {
        return Err(Error::Config("n_subcarriers must be >= 2".into()));
    }
    if !(cfg.bandwidth_hz > 0.0) {
        return Err(Error::Config("bandwidth_hz must be > 0".into()));
    }
    if !(cfg.snapshot_rate_hz > 0.0) {
        return Err(Error::Config("snapshot_rate_hz must be > 0".into()));
    }
    if !(cfg.carrier_hz > 0.0) {
        return Err(Error::Config("carrier_hz must be > 0".into()));
    }
    if !(cfg.duration_s >= 0.0) {
        return Err(Error::Config("duration_s must be >= 0".into()));
    }
    Ok(())
}
