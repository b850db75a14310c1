//! Per-link channel frequency responses that follow the scenario geometry.
//!
//! Each snapshot is synthesized directly in the subcarrier domain as
//! `H(k, t) = sum_p a_p exp(-j 2 pi (f_c + f_k) tau_p(t)) + n_k` with
//! `f_k = (k - K/2) B / K`. Doppler is never injected: it appears only through
//! the time variation of the path delays.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::{bistatic_angle_deg, bistatic_doppler, LinkSpec, Scenario, Vec3, SPEED_OF_LIGHT};
use crate::signature::{rotor_scatterers, rotor_tip_velocities};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathKind {
    Los,
    Target,
    Rotor,
    Clutter,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathComponent {
    pub delay_s: f64,
    pub amplitude: Complex64,
    pub kind: PathKind,
}

/// Grid and link layout shared by every snapshot of a stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamInfo {
    pub carrier_hz: f64,
    pub bandwidth_hz: f64,
    pub n_subcarriers: usize,
    pub snapshot_rate_hz: f64,
    pub links: Vec<LinkSpec>,
}

impl StreamInfo {
    pub fn from_scenario(s: &Scenario) -> Self {
        StreamInfo {
            carrier_hz: s.config.carrier_hz,
            bandwidth_hz: s.config.bandwidth_hz,
            n_subcarriers: s.config.n_subcarriers,
            snapshot_rate_hz: s.config.snapshot_rate_hz,
            links: s.config.links.clone(),
        }
    }

    pub fn n_links(&self) -> usize {
        self.links.len()
    }

    pub fn snapshot_time(&self, index: usize) -> f64 {
        index as f64 / self.snapshot_rate_hz
    }

    pub fn subcarrier_offsets(&self) -> Vec<f64> {
        subcarrier_offsets(self.n_subcarriers, self.bandwidth_hz)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CfrSnapshot {
    pub index: usize,
    pub t_s: f64,
    /// One subcarrier vector per link, in link order.
    pub links: Vec<Vec<Complex64>>,
}

impl CfrSnapshot {
    /// Rounds every sample to single precision (the container's storage precision).
    pub fn quantize_f32(&mut self) {
        for v in self.links.iter_mut().flatten() {
            *v = Complex64::new(v.re as f32 as f64, v.im as f32 as f64);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CfrStream {
    pub info: StreamInfo,
    pub snapshots: Vec<CfrSnapshot>,
}

impl CfrStream {
    pub fn quantize_f32(&mut self) {
        self.snapshots.iter_mut().for_each(CfrSnapshot::quantize_f32);
    }
}

/// Baseband subcarrier offsets `f_k = (k - K/2) B / K`.
pub fn subcarrier_offsets(n_subcarriers: usize, bandwidth_hz: f64) -> Vec<f64> {
    let k2 = (n_subcarriers / 2) as f64;
    let df = bandwidth_hz / n_subcarriers as f64;
    (0..n_subcarriers).map(|k| (k as f64 - k2) * df).collect()
}

fn radar_equation_amplitude(
    tx_power_mw: f64,
    gain_product: f64,
    wavelength: f64,
    reflectivity: Complex64,
    r_tx: f64,
    r_rx: f64,
) -> Complex64 {
    reflectivity * (tx_power_mw.sqrt() * wavelength * gain_product.sqrt() / ((4.0 * PI).powf(1.5) * r_tx * r_rx))
}

/// All propagation paths of `link` at time `t`.
pub fn paths_at(scenario: &Scenario, link: usize, t: f64) -> Result<Vec<PathComponent>> {
    let cfg = &scenario.config;
    let (txn, rxn) = scenario.link_nodes(link);
    let tx = txn.trajectory.position_at(t);
    let rx = rxn.trajectory.position_at(t);
    let lambda = cfg.wavelength_m();
    let gains = txn.gain_linear * rxn.gain_linear;
    let p_tx = txn.tx_power_mw;

    let mut paths = Vec::with_capacity(1 + scenario.targets.len() + scenario.clutter.len());
    if scenario.links[link].0 != scenario.links[link].1 {
        let d = (rx - tx).norm();
        if d < 1e-9 {
            return Err(Error::Geometry(format!("link {link}: transmitter and receiver coincide")));
        }
        paths.push(PathComponent {
            delay_s: d / SPEED_OF_LIGHT,
            amplitude: Complex64::new(p_tx.sqrt() * lambda * gains.sqrt() / (4.0 * PI * d), 0.0),
            kind: PathKind::Los,
        });
    }

    let scatter = |p: &Vec3, g: Complex64, kind: PathKind| -> Result<PathComponent> {
        let r_tx = (p - tx).norm();
        let r_rx = (p - rx).norm();
        if r_tx < 1e-9 || r_rx < 1e-9 {
            return Err(Error::Geometry(format!("link {link}: scatterer coincides with a node")));
        }
        Ok(PathComponent {
            delay_s: (r_tx + r_rx) / SPEED_OF_LIGHT,
            amplitude: radar_equation_amplitude(p_tx, gains, lambda, g, r_tx, r_rx),
            kind,
        })
    };

    for target in &scenario.targets {
        let p = target.trajectory.position_at(t);
        let beta = bistatic_angle_deg(&tx, &rx, &p)?;
        let g = target.signature.gain(cfg.carrier_hz, beta);
        paths.push(scatter(&p, g, PathKind::Target)?);
        if let Some(rotor) = &target.rotor {
            for (tip, g) in rotor_scatterers(rotor, &p, t) {
                paths.push(scatter(&tip, g, PathKind::Rotor)?);
            }
        }
    }
    for c in &scenario.clutter {
        paths.push(scatter(&c.position, c.gain, PathKind::Clutter)?);
    }

    let max_delay = cfg.max_delay_s();
    if let Some(p) = paths.iter().find(|p| p.delay_s > max_delay) {
        return Err(Error::Config(format!(
            "link {link}: {:?} path delay {:.3e} s exceeds the unambiguous delay {:.3e} s",
            p.kind, p.delay_s, max_delay
        )));
    }
    Ok(paths)
}

/// Noise-free CFR of a set of paths on the given subcarrier offsets.
pub fn synthesize_paths(paths: &[PathComponent], carrier_hz: f64, offsets: &[f64]) -> Vec<Complex64> {
    let mut h = vec![Complex64::default(); offsets.len()];
    add_paths(&mut h, paths, carrier_hz, offsets);
    h
}

fn add_paths(h: &mut [Complex64], paths: &[PathComponent], carrier_hz: f64, offsets: &[f64]) {
    for p in paths {
        for (hk, &fk) in h.iter_mut().zip(offsets) {
            // reduce the carrier term modulo one cycle first to keep the phase accurate
            let cycles = (carrier_hz * p.delay_s).fract() + fk * p.delay_s;
            let (s, c) = (-TAU * cycles).sin_cos();
            *hk += p.amplitude * Complex64::new(c, s);
        }
    }
}

const NOISE_DOMAIN: u64 = 0x6e6f_6973_655f_7631;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of the noise generator for one (snapshot, link) cell.
pub fn noise_seed(rng_seed: u64, snapshot: usize, link: usize) -> u64 {
    let a = splitmix64(rng_seed ^ NOISE_DOMAIN);
    let b = splitmix64(a ^ snapshot as u64);
    splitmix64(b ^ (link as u64).rotate_left(32))
}

/// Adds circularly-symmetric complex Gaussian noise of total power `power` per sample.
pub fn add_noise(h: &mut [Complex64], power: f64, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sigma = (power / 2.0).sqrt();
    for v in h.iter_mut() {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        *v += Complex64::new(re * sigma, im * sigma);
    }
}

pub fn synthesize_link(scenario: &Scenario, link: usize, index: usize, offsets: &[f64]) -> Result<Vec<Complex64>> {
    let cfg = &scenario.config;
    let t = scenario.snapshot_time(index);
    let paths = paths_at(scenario, link, t)?;
    let mut h = synthesize_paths(&paths, cfg.carrier_hz, offsets);
    if let Some(dbm) = cfg.noise_power_dbm {
        add_noise(&mut h, crate::scenario::dbm_to_mw(dbm), noise_seed(cfg.clutter.rng_seed, index, link));
    }
    Ok(h)
}

/// Snapshot number `index` (time `index / snapshot_rate_hz`).
pub fn synthesize_snapshot(scenario: &Scenario, index: usize) -> Result<CfrSnapshot> {
    let offsets = subcarrier_offsets(scenario.config.n_subcarriers, scenario.config.bandwidth_hz);
    let links = (0..scenario.n_links())
        .map(|l| synthesize_link(scenario, l, index, &offsets))
        .collect::<Result<Vec<_>>>()?;
    Ok(CfrSnapshot {
        index,
        t_s: scenario.snapshot_time(index),
        links,
    })
}

/// Ordered, lazily generated snapshots; blocks are synthesized in parallel.
pub struct SnapshotStream<'a> {
    scenario: &'a Scenario,
    next: usize,
    end: usize,
    buffer: std::collections::VecDeque<CfrSnapshot>,
    block: usize,
}

impl<'a> SnapshotStream<'a> {
    pub fn new(scenario: &'a Scenario, start: usize) -> Self {
        let end = scenario.config.n_snapshots();
        SnapshotStream {
            scenario,
            next: start.min(end),
            end,
            buffer: Default::default(),
            block: 256,
        }
    }

    pub fn remaining(&self) -> usize {
        self.end - self.next + self.buffer.len()
    }
}

impl Iterator for SnapshotStream<'_> {
    type Item = Result<CfrSnapshot>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.buffer.is_empty() {
            if self.next >= self.end {
                return None;
            }
            let stop = (self.next + self.block).min(self.end);
            let block: Result<Vec<_>> = (self.next..stop)
                .into_par_iter()
                .map(|i| synthesize_snapshot(self.scenario, i))
                .collect();
            self.next = stop;
            match block {
                Ok(b) => self.buffer.extend(b),
                Err(e) => {
                    self.next = self.end;
                    return Some(Err(e));
                }
            }
        }
        self.buffer.pop_front().map(Ok)
    }
}

/// Full stream `t = 0, 1/rate, ...` covering the scenario duration.
pub fn synthesize_stream(scenario: &Scenario) -> Result<CfrStream> {
    // surface configuration errors before the first snapshot
    for l in 0..scenario.n_links() {
        paths_at(scenario, l, 0.0)?;
    }
    let snapshots = SnapshotStream::new(scenario, 0).collect::<Result<Vec<_>>>()?;
    Ok(CfrStream {
        info: StreamInfo::from_scenario(scenario),
        snapshots,
    })
}

/// Ground-truth (delay, Doppler) of a target's body echo on a link.
pub fn target_truth(scenario: &Scenario, link: usize, target: usize, t: f64) -> Result<(f64, f64)> {
    let (tx, rx) = scenario.link_positions(link, t);
    let tr = &scenario.targets[target].trajectory;
    let p = tr.position_at(t);
    let v = tr.velocity_at(t);
    let range = crate::scenario::bistatic_range(&tx, &rx, &p);
    Ok((range / SPEED_OF_LIGHT, bistatic_doppler(&tx, &rx, &p, &v, scenario.config.carrier_hz)?))
}

/// Coherent sum of a CFR steered to `delay_s`: the slow-time sample of one
/// delay cell, used for micro-Doppler series.
pub fn delay_gate(h: &[Complex64], offsets: &[f64], carrier_hz: f64, delay_s: f64) -> Complex64 {
    let sum: Complex64 = h
        .iter()
        .zip(offsets)
        .map(|(v, f)| v * Complex64::from_polar(1.0, TAU * ((carrier_hz + f) * delay_s).fract()))
        .sum();
    sum / h.len().max(1) as f64
}

/// Ground-truth Doppler of each rotor tip of a target on a link.
pub fn rotor_truth_doppler(scenario: &Scenario, link: usize, target: usize, t: f64) -> Result<Vec<f64>> {
    let (tx, rx) = scenario.link_positions(link, t);
    let tgt = &scenario.targets[target];
    let Some(rotor) = &tgt.rotor else {
        return Ok(Vec::new());
    };
    let hub = tgt.trajectory.position_at(t);
    let hub_v = tgt.trajectory.velocity_at(t);
    rotor_scatterers(rotor, &hub, t)
        .iter()
        .zip(rotor_tip_velocities(rotor, t))
        .map(|((p, _), v)| bistatic_doppler(&tx, &rx, p, &(v + hub_v), scenario.config.carrier_hz))
        .collect()
}
