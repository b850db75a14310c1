//! Ready-made scenarios: the rooftop UAV geometry (1 Tx, 3 Rx) and a
//! single-link rotor scene for micro-Doppler work.

use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::channel::{paths_at, PathKind};
use crate::dsp::MapFormer;
use crate::error::{Error, Result};
use crate::scenario::{
    BoxSpec, ClutterSpec, LinkSpec, NodeRole, NodeSpec, Scenario, ScenarioConfig, SignatureSource, TargetSpec,
    TrajectorySpec, Vec3,
};
use crate::signature::RotorSpec;

#[derive(Debug, Clone, PartialEq)]
pub struct RooftopOptions {
    /// Map-domain target SNR on link 0 at mid-track.
    pub snr_db: f64,
    pub duration_s: f64,
    pub snapshot_rate_hz: f64,
    pub n_subcarriers: usize,
    pub n_clutter: usize,
    pub seed: u64,
    /// CPI length the SNR refers to.
    pub cpi_len: usize,
}

impl Default for RooftopOptions {
    fn default() -> Self {
        RooftopOptions {
            snr_db: 20.0,
            duration_s: 20.0,
            snapshot_rate_hz: 1000.0,
            n_subcarriers: 128,
            n_clutter: 20,
            seed: 7,
            cpi_len: 128,
        }
    }
}

fn node(id: &str, role: NodeRole, p: Vec3) -> NodeSpec {
    NodeSpec {
        id: id.into(),
        role,
        trajectory: TrajectorySpec::stationary(p),
        antenna_gain_dbi: 6.0,
        tx_power_dbm: role.can_transmit().then_some(30.0),
    }
}

/// Node layout: one transmitter and three receivers on rooftops of different heights.
pub fn rooftop_nodes() -> Vec<NodeSpec> {
    vec![
        node("tx", NodeRole::Tx, Vec3::new(0.0, 0.0, 22.0)),
        node("rx1", NodeRole::Rx, Vec3::new(140.0, -30.0, 12.0)),
        node("rx2", NodeRole::Rx, Vec3::new(-40.0, 150.0, 30.0)),
        node("rx3", NodeRole::Rx, Vec3::new(-120.0, -110.0, 5.0)),
    ]
}

/// Straight constant-velocity UAV track, receding from the node cluster so its
/// Doppler stays clear of the zero-Doppler notch on every link.
pub fn rooftop_track(duration_s: f64) -> TrajectorySpec {
    let start = Vec3::new(30.0, 40.0, 35.0);
    let velocity = Vec3::new(5.0, 5.0, 1.0);
    TrajectorySpec::linear([(0.0, start), (duration_s, start + velocity * duration_s)])
}

/// Region the localizer searches for its first fix.
pub fn rooftop_search_box() -> BoxSpec {
    BoxSpec { min: Vec3::new(-250.0, -250.0, 0.0), max: Vec3::new(300.0, 300.0, 120.0) }
}

pub fn rooftop(opts: &RooftopOptions) -> Result<ScenarioConfig> {
    let mut signatures = BTreeMap::new();
    // about 0.01 m^2 radar cross-section
    signatures.insert("uav".to_string(), SignatureSource::Constant { gain: Complex64::new(0.1, 0.0) });
    let mut cfg = ScenarioConfig {
        nodes: rooftop_nodes(),
        links: vec![LinkSpec::new("tx", "rx1"), LinkSpec::new("tx", "rx2"), LinkSpec::new("tx", "rx3")],
        targets: vec![TargetSpec {
            id: "uav".into(),
            trajectory: rooftop_track(opts.duration_s),
            signature_id: "uav".into(),
            rotor: None,
        }],
        clutter: ClutterSpec {
            n_clusters: opts.n_clutter,
            region: BoxSpec { min: Vec3::new(-200.0, -200.0, 0.0), max: Vec3::new(200.0, 200.0, 30.0) },
            amplitude_db_range: (0.0, 20.0),
            rng_seed: opts.seed,
        },
        carrier_hz: 3e9,
        bandwidth_hz: 50e6,
        n_subcarriers: opts.n_subcarriers,
        snapshot_rate_hz: opts.snapshot_rate_hz,
        duration_s: opts.duration_s,
        noise_power_dbm: None,
        signatures,
    };
    let t_mid = opts.duration_s / 2.0;
    set_map_snr(&mut cfg, 0, t_mid, opts.snr_db, opts.cpi_len)?;
    Ok(cfg)
}

/// Sets `noise_power_dbm` so that the first target's echo on `link` at time
/// `t` has map-domain SNR `snr_db` for CPIs of `cpi_len` snapshots. Returns the
/// noise power in dBm.
pub fn set_map_snr(cfg: &mut ScenarioConfig, link: usize, t: f64, snr_db: f64, cpi_len: usize) -> Result<f64> {
    let mut clean = cfg.clone();
    clean.noise_power_dbm = None;
    clean.clutter.n_clusters = 0;
    let scn = Scenario::new(clean, None)?;
    let amp = paths_at(&scn, link, t)?
        .into_iter()
        .find(|p| p.kind == PathKind::Target)
        .ok_or_else(|| Error::Config("scenario has no target echo to reference".into()))?
        .amplitude
        .norm();
    let former = MapFormer::new(cfg.n_subcarriers, cpi_len, cfg.bandwidth_hz, cfg.snapshot_rate_hz)?;
    let noise_mw = amp * amp / (former.noise_gain() * 10f64.powf(snr_db / 10.0));
    let dbm = 10.0 * noise_mw.log10();
    cfg.noise_power_dbm = Some(dbm);
    Ok(dbm)
}

/// Single bistatic link looking at a hovering drone with an `n_blades` rotor.
/// The snapshot rate resolves the blade-tip Doppler excursion.
pub fn rotor_scene(rotation_hz: f64, n_blades: usize, duration_s: f64) -> ScenarioConfig {
    let mut signatures = BTreeMap::new();
    signatures.insert("body".to_string(), SignatureSource::Constant { gain: Complex64::new(0.1, 0.0) });
    ScenarioConfig {
        nodes: vec![
            node("tx", NodeRole::Tx, Vec3::new(0.0, 0.0, 2.0)),
            node("rx", NodeRole::Rx, Vec3::new(10.0, 0.0, 2.0)),
        ],
        links: vec![LinkSpec::new("tx", "rx")],
        targets: vec![TargetSpec {
            id: "drone".into(),
            trajectory: TrajectorySpec::stationary(Vec3::new(5.0, 30.0, 2.0)),
            signature_id: "body".into(),
            rotor: Some(RotorSpec {
                n_blades,
                blade_radius_m: 0.2,
                rotation_hz,
                plane_normal: Vec3::new(0.0, 0.0, 1.0),
                tip_amplitude: Complex64::new(0.05, 0.0),
                phase0_rad: 0.0,
            }),
        }],
        clutter: ClutterSpec::default(),
        carrier_hz: 3e9,
        bandwidth_hz: 50e6,
        n_subcarriers: 16,
        snapshot_rate_hz: 16e3,
        duration_s,
        noise_power_dbm: None,
        signatures,
    }
}
